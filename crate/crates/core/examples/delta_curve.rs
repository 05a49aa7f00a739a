//! Δ and 𝒥 across the quadratic family ℓ(t) = 1 + A(t − ½)², with the
//! elliptic window 0 < Δ < 4 marked.

use pingpong::wall::elliptic_boundary_a;
use pingpong::{compute_params, make_quadratic};

fn main() -> pingpong::Result<()> {
    println!("{:>6} {:>10} {:>10}  regime", "A", "J", "delta");
    for i in 0..=16 {
        let a = -3.9 + 0.5 * i as f64;
        let p = compute_params(&make_quadratic(a, 1.0)?, 1e-12)?;
        println!("{a:>6.2} {:>10.5} {:>10.5}  {}", p.j_int, p.delta, p.regime.as_str());
    }
    println!("Δ = 4 at A = {:.6}", elliptic_boundary_a(1e-12)?);
    Ok(())
}
