//! A single orbit of the exact collision map, printed as CSV.

use pingpong::{iterate, make_quadratic, CollisionState, Dynamics};

fn main() -> pingpong::Result<()> {
    let dynamics = Dynamics::new(make_quadratic(1.0, 1.0)?);
    let trace = iterate(&dynamics, CollisionState::new(0.3, 40.0), |_, s| s.v < 5.0, 200)?;
    print!("{}", trace.to_csv());
    eprintln!("{} collisions, truncated: {}", trace.steps(), trace.truncated);
    Ok(())
}
