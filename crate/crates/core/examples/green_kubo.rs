//! Diffusion coefficient of the hyperbolic sawtooth map: Green-Kubo sum
//! against the direct variance growth of lifted orbits.

use pingpong::experiments::mixing_proxy;
use pingpong::normal_form::{direct_variance_slope, green_kubo_d2};

fn main() -> pingpong::Result<()> {
    let delta = -0.3;
    let gk = green_kubo_d2(delta, 40, 200_000, 1)?;
    let steps = 500;
    let direct = direct_variance_slope(delta, steps, 20_000, 2);
    println!("Green-Kubo D² = {:.4} ± {:.4}", gk.d2, gk.stderr);
    println!("direct   D² = {:.4}", direct.variance() / steps as f64);
    let mix = mixing_proxy(delta, 1_000_000, 40, 20, 3);
    println!("max tail autocorrelation {:.2e}", mix.max_tail_rho);
    Ok(())
}
