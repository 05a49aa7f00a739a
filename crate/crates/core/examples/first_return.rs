//! First return of the exact dynamics to the strip next to t ≡ 0, compared
//! with the sawtooth map and its 1/I correction.

use pingpong::coords::ReturnMap;
use pingpong::normal_form::{f_corrected, fhat, TorusPoint};
use pingpong::{make_spline, CollisionState};

fn main() -> pingpong::Result<()> {
    let profile = make_spline(&[[0.0, 1.0], [1.0, 1.0]], 2.0, -1.0)?;
    let p = profile.params();
    let map = ReturnMap::new(&profile);
    println!("delta {:.4}  delta1 {:.4}", p.delta, p.delta1);
    println!("{:>8} {:>12} {:>12}", "I", "err F̂", "err F̂+F1");
    for &v in &[40.0, 120.0, 400.0, 1200.0] {
        let start = map.coords(&CollisionState::new(0.0, v))?;
        let start = map.state_at(0.37, start.action.floor() + 0.4)?;
        let here = map.coords(&start)?;
        let next = map.first_return(&start)?.point;
        let tp = TorusPoint::new(here.tau, here.action);
        let a = fhat(tp, p.delta);
        let b = f_corrected(tp, p.delta, p.delta1, here.action)?;
        println!(
            "{:>8.1} {:>12.3e} {:>12.3e}",
            here.action,
            (next.action - a.lifted()).abs(),
            (next.action - b.lifted()).abs()
        );
    }
    Ok(())
}
