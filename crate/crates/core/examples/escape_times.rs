//! Escape times for a hyperbolic wall: the fraction returned below C and the
//! censored KS distance to the index-½ stable law.

use pingpong::experiments::{census, escape_time_mc, fit_escape_tail, EscapeParams};
use pingpong::make_quadratic;

fn main() -> pingpong::Result<()> {
    let profile = make_quadratic(1.0, 1.0)?;
    let v0 = 30.0;
    let budget = 2 * 900;
    let params = EscapeParams { v0, c: 3.0, v_max: 1e4, trials: 400, budget, seed: 7 };
    let records = escape_time_mc(&profile, &params)?;
    let c = census(&records);
    println!("returned {} exceeded {} exhausted {}", c.returned, c.exceeded, c.exhausted);
    let fit = fit_escape_tail(&records, v0, budget)?;
    println!("median T/v0² {:.3}, KS {:.3}, predicted returned at budget {:.3}", fit.median_scaled, fit.ks, fit.predicted_returned);
    Ok(())
}
