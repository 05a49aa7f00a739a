//! Rescaled action I(t·I₀²)/I₀ in the hyperbolic regime: linear variance
//! growth and gambler's-ruin hitting probabilities.

use pingpong::experiments::{bm_scaling, BmParams};
use pingpong::make_quadratic;

fn main() -> pingpong::Result<()> {
    let profile = make_quadratic(1.0, 1.0)?;
    let params = BmParams { v0: 60.0, a: 0.5, b: 2.0, trials: 300, seed: 5, t_test: 0.1, sample_dt: 0.01, t_max: 50.0 };
    let (_, s) = bm_scaling(&profile, &params)?;
    println!("variance slope {:.4}", s.variance_slope);
    println!("P(hit a first) {:.3} ± {:.3}, Brownian {:.3}", s.p_lower, s.p_lower_stderr, s.p_lower_bm);
    println!("Anderson-Darling {:.3}", s.anderson_darling);
    Ok(())
}
