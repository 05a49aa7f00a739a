//! Angle ϑ(t) and the adiabatic action J = v·ℓ along an orbit: J drifts
//! slowly while ϑ advances by roughly 1/J per collision.

use pingpong::coords::{adiabatic_j, ThetaTable};
use pingpong::{make_quadratic, CollisionState, Dynamics};

fn main() -> pingpong::Result<()> {
    let profile = make_quadratic(-1.0, 1.0)?;
    let table = ThetaTable::new(&profile);
    let dynamics = Dynamics::new(profile.clone());
    let mut s = CollisionState::new(0.1, 80.0);
    println!("n,phase,theta,J");
    for n in 0..30 {
        println!("{n},{:.6},{:.6},{:.6}", s.phase, table.theta(s.phase), adiabatic_j(&profile, &s)?);
        s = dynamics.step(&s)?.state;
    }
    Ok(())
}
