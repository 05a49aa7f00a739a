//! Δ of the sine wall decides what a fast ball does: compare the regime read
//! off Δ with the spread of velocities actually visited.

use pingpong::{compute_params, make_sine, CollisionState, Dynamics};

fn main() -> pingpong::Result<()> {
    for amp in [0.05, 0.12, 0.3, -0.3] {
        let profile = make_sine(amp)?;
        let p = compute_params(&profile, 1e-12)?;
        let dynamics = Dynamics::new(profile);
        let mut s = CollisionState::new(0.2, 50.0);
        let (mut lo, mut hi) = (s.v, s.v);
        for _ in 0..200_000 {
            s = dynamics.step(&s)?.state;
            lo = lo.min(s.v);
            hi = hi.max(s.v);
            if s.v < 2.0 {
                break;
            }
        }
        println!("amplitude {amp:>5}: Δ = {:>8.4} ({}), v ranged over [{lo:.1}, {hi:.1}]", p.delta, p.regime.as_str());
    }
    Ok(())
}
