//! The collision map preserves (v + ℓ̇) dt ∧ dv: the jacobian ratio is 1 up
//! to finite-difference error.

use pingpong::{jacobian_check, make_quadratic, make_sine, CollisionState};

fn main() -> pingpong::Result<()> {
    let profiles = [("quadratic A=-1", make_quadratic(-1.0, 1.0)?), ("sine 0.12", make_sine(0.12)?)];
    for (name, profile) in &profiles {
        let mut worst: f64 = 0.0;
        for k in 0..40 {
            let phase = 0.05 + 0.9 * k as f64 / 40.0;
            let v = 20.0 + 10.0 * k as f64;
            let r = jacobian_check(profile, &CollisionState::new(phase, v), 1e-5)?;
            worst = worst.max((r - 1.0).abs());
        }
        println!("{name}: max |ratio - 1| = {worst:.2e}");
    }
    Ok(())
}
