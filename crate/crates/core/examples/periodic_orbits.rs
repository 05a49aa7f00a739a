//! Periodic orbits of the sawtooth map, found exactly for rational Δ, and
//! the θ-windows where period-N orbits exist.

use pingpong::normal_form::{orbit_search_auto, window_scan};

fn main() -> pingpong::Result<()> {
    let (orbits, exact) = orbit_search_auto(3.0, 3)?;
    println!("Δ = 3, exact arithmetic: {exact}");
    for o in &orbits {
        println!("  N={} winding={:>2} {:?} tau={:.6} I={:.6}", o.period, o.winding, o.stability, o.tau, o.action);
    }
    for w in window_scan(3, 1e-3 * std::f64::consts::PI)? {
        println!("N={} {:?}: θ/π in [{:.3}, {:.3}]", w.period, w.kind, w.theta_lo / std::f64::consts::PI, w.theta_hi / std::f64::consts::PI);
    }
    Ok(())
}
