//! Orbits of the sawtooth torus map for an elliptic and a hyperbolic Δ.

use pingpong::normal_form::{portrait, PortraitMap};

fn main() -> pingpong::Result<()> {
    let seeds = [(0.45, 0.02), (0.3, 0.1), (0.1, 0.6)];
    println!("delta,seed,iter,tau,I");
    for delta in [1.0, -0.3] {
        for (s, it, tau, i) in portrait(PortraitMap::Sawtooth, delta, 0.0, 0.0, &seeds, 300)? {
            println!("{delta},{s},{it},{tau:.6},{i:.6}");
        }
    }
    Ok(())
}
