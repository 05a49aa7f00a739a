//! Orbits started near the elliptic fixed point of an elliptic wall keep
//! their velocity within a fixed band; the same run refuses hyperbolic walls.

use pingpong::experiments::trapping_test;
use pingpong::make_quadratic;

fn main() -> pingpong::Result<()> {
    let profile = make_quadratic(-1.0, 1.0)?;
    let r = trapping_test(&profile, 40.0, 100_000, 1e-3, 8, 1)?;
    println!("action {} tau {:.4}", r.action, r.tau);
    println!("v/v̄ in [{:.3}, {:.3}], survived {}", r.min_ratio, r.max_ratio, r.survived);
    match trapping_test(&make_quadratic(1.0, 1.0)?, 40.0, 10, 1e-3, 1, 1) {
        Err(e) => println!("hyperbolic wall: {e}"),
        Ok(_) => println!("hyperbolic wall unexpectedly accepted"),
    }
    Ok(())
}
