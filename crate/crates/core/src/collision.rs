//! Event-driven dynamics of the ball between the fixed and the moving wall.
//!
//! Collisions are recorded at the moving wall only. Time is kept as an integer
//! winding plus a phase in `[0, 1)`, so runs reaching t ~ 10⁸ lose no precision
//! in the phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wall::{phase_of, WallProfile};

/// Relative tolerance for the fast fixed-point path (and absolute tolerance in
/// elapsed time for bisection).
pub const DEFAULT_FLIGHT_TOL: f64 = 1e-15;

/// Collisions closer than this to an integer time are moved onto `t → 0⁺`.
pub const JUMP_SNAP: f64 = 1e-12;

const MIN_SEARCH_STEP: f64 = 1e-6;
const DEFAULT_HORIZON: f64 = 1e6;
const MAX_FIXED_POINT_ITERS: usize = 200;

/// Post-collision phase point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionState {
    /// Whole periods elapsed since the initial condition.
    pub winding: i64,
    /// Collision time modulo 1, in `[0, 1)`.
    pub phase: f64,
    /// Velocity toward the fixed wall just after the collision.
    pub v: f64,
}

impl CollisionState {
    pub fn new(phase: f64, v: f64) -> Self {
        let k = phase.floor();
        CollisionState {
            winding: k as i64,
            phase: phase_of(phase),
            v,
        }
    }

    /// Absolute time; loses phase precision for very large windings.
    pub fn time(&self) -> f64 {
        self.winding as f64 + self.phase
    }

    /// `v > −ℓ̇(t)`: the ball actually separates from the wall.
    pub fn is_admissible(&self, profile: &WallProfile) -> bool {
        self.v + profile.dl(self.phase) > 0.0
    }
}

/// Outcome of one flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flight {
    pub dt: f64,
    /// The ball reached the fixed wall before the moving wall caught it.
    pub bounced: bool,
}

/// One application of the collision map, with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: CollisionState,
    pub dt: f64,
    pub bounced: bool,
    /// Number of integer times crossed in `(t, t + dt]`.
    pub crossed: i64,
}

/// Flight-time solver settings.
#[derive(Debug, Clone, Copy)]
pub struct FlightSolver {
    pub tol: f64,
    /// Longest elapsed time searched before giving up.
    pub horizon: f64,
}

impl Default for FlightSolver {
    fn default() -> Self {
        FlightSolver {
            tol: DEFAULT_FLIGHT_TOL,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl FlightSolver {
    pub fn with_tol(tol: f64) -> Self {
        FlightSolver {
            tol,
            ..Default::default()
        }
    }

    /// Smallest `δt > 0` at which the ball meets the moving wall again.
    pub fn solve(&self, profile: &WallProfile, phase: f64, v: f64) -> Result<Flight> {
        let lip = profile.lip_bound();
        if v + profile.dl(phase) <= 0.0 {
            return Err(Error::Inadmissible { phase, v });
        }
        if v > 0.0 && lip < 0.5 * v {
            if let Some(dt) = self.fixed_point(profile, phase, v) {
                return Ok(Flight { dt, bounced: true });
            }
        }
        self.bracket(profile, phase, v)
    }

    /// `δt = (ℓ(t) + ℓ(t + δt))/v` by iteration; contracts with factor
    /// `lip/v < ½`.
    fn fixed_point(&self, profile: &WallProfile, phase: f64, v: f64) -> Option<f64> {
        let l = profile.derivs_at_phase(phase)[0];
        let inv_v = 1.0 / v;
        let mut dt = flight_time_expansion(profile, phase, v);
        if !(dt > 0.0) {
            dt = 2.0 * l * inv_v;
        }
        for _ in 0..MAX_FIXED_POINT_ITERS {
            let next = (2.0 * l + profile.l_increment(phase, dt)) * inv_v;
            let change = (next - dt).abs();
            dt = next;
            if change <= self.tol * dt {
                return Some(dt);
            }
        }
        None
    }

    /// General event detection. The gap between ball and moving wall is
    /// `g(s) = ℓ(t+s) − ℓ(t) + v s` before the fixed-wall bounce at
    /// `s₁ = ℓ(t)/v` and `g(s) = ℓ(t+s) + ℓ(t) − v s` after it. Both are
    /// Lipschitz with constant `lip + |v|`, which bounds the march step.
    fn bracket(&self, profile: &WallProfile, phase: f64, v: f64) -> Result<Flight> {
        let l = profile.l(phase);
        let lip = profile.lip_bound() + v.abs();
        let s_bounce = if v > 0.0 { l / v } else { f64::INFINITY };
        let pre = |s: f64| profile.l_increment(phase, s) + v * s;
        let post = |s: f64| profile.l_increment(phase, s) + 2.0 * l - v * s;

        // pre-bounce leg
        let mut s = 0.0;
        let mut g = 0.0;
        loop {
            let step = (g / lip).max(MIN_SEARCH_STEP);
            let mut next = s + step;
            let at_bounce = next >= s_bounce;
            if at_bounce {
                next = s_bounce;
            }
            if next > self.horizon {
                return Err(Error::NoCollision {
                    horizon: self.horizon,
                });
            }
            let gn = pre(next);
            if gn <= 0.0 {
                let dt = refine(&pre, s, next, self.tol)?;
                return Ok(Flight { dt, bounced: false });
            }
            s = next;
            g = gn;
            if at_bounce {
                break;
            }
        }

        // post-bounce leg; g(s₁) = ℓ(t + s₁) > 0
        g = post(s);
        loop {
            let step = (g / lip).max(MIN_SEARCH_STEP);
            let next = s + step;
            if next - s_bounce > self.horizon {
                return Err(Error::NoCollision {
                    horizon: self.horizon,
                });
            }
            let gn = post(next);
            if gn <= 0.0 {
                let dt = refine(&post, s, next, self.tol)?;
                return Ok(Flight { dt, bounced: true });
            }
            s = next;
            g = gn;
        }
    }
}

/// Bisection on a bracket `[lo, hi]` with `g(lo) ≥ 0 ≥ g(hi)`, returning the
/// upper end so that the returned root never lies before the true one.
fn refine<F: Fn(f64) -> f64>(g: &F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    for _ in 0..200 {
        let width = hi - lo;
        if width <= tol * hi.max(f64::MIN_POSITIVE) || width <= tol * 1e-3 {
            break;
        }
        let mid = lo + 0.5 * width;
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(hi > 0.0) {
        return Err(Error::NoCollision { horizon: hi });
    }
    Ok(hi)
}

/// `δt₁ + δt₂ + δt₃ = (2ℓ/v)(1 + ℓ̇/v + (ℓ̇² + ℓℓ̈)/v²)`, accurate to
/// `O(v⁻⁴)` away from the jump.
pub fn flight_time_expansion(profile: &WallProfile, phase: f64, v: f64) -> f64 {
    let [l, dl, ddl, _] = profile.derivs_at_phase(phase);
    let inv_v = 1.0 / v;
    2.0 * l * inv_v * (1.0 + inv_v * (dl + inv_v * (dl * dl + l * ddl)))
}

/// The collision map together with its flight solver.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub profile: WallProfile,
    pub solver: FlightSolver,
}

impl Dynamics {
    pub fn new(profile: WallProfile) -> Self {
        Dynamics {
            profile,
            solver: FlightSolver::default(),
        }
    }

    pub fn with_solver(profile: WallProfile, solver: FlightSolver) -> Self {
        Dynamics { profile, solver }
    }

    pub fn flight(&self, state: &CollisionState) -> Result<Flight> {
        self.solver.solve(&self.profile, state.phase, state.v)
    }

    /// Applies the collision map once.
    pub fn step(&self, state: &CollisionState) -> Result<Step> {
        let flight = self.flight(state)?;
        let raw = state.phase + flight.dt;
        let mut crossed = raw.floor();
        let mut phase = raw - crossed;
        if phase < JUMP_SNAP {
            phase = 0.0;
        } else if phase > 1.0 - JUMP_SNAP {
            phase = 0.0;
            crossed += 1.0;
        }
        let dl = self.profile.derivs_at_phase(phase)[1];
        // Reflection off the moving wall: incoming speed toward it is +v after a
        // fixed-wall bounce and −v when the wall catches the ball first.
        let incoming = if flight.bounced { state.v } else { -state.v };
        let v = incoming - 2.0 * dl;
        let next = CollisionState {
            winding: state.winding + crossed as i64,
            phase,
            v,
        };
        if v + dl <= 0.0 {
            return Err(Error::Inadmissible { phase, v });
        }
        Ok(Step {
            state: next,
            dt: flight.dt,
            bounced: flight.bounced,
            crossed: crossed as i64,
        })
    }
}

/// Smallest positive flight time from `state`, with the bounce flag.
pub fn solve_flight(profile: &WallProfile, state: &CollisionState, tol: f64) -> Result<Flight> {
    FlightSolver::with_tol(tol).solve(profile, state.phase, state.v)
}

/// `f(t, v) = (t + δt, v − 2ℓ̇(t + δt))`.
pub fn collision_map(profile: &WallProfile, state: &CollisionState) -> Result<CollisionState> {
    let dynamics = Dynamics {
        profile: profile.clone(),
        solver: FlightSolver::default(),
    };
    dynamics.step(state).map(|s| s.state)
}

/// A recorded orbit.
#[derive(Debug, Clone, Default)]
pub struct OrbitTrace {
    /// Initial state followed by every post-collision state.
    pub states: Vec<CollisionState>,
    /// Flight time leading to `states[i + 1]`.
    pub dts: Vec<f64>,
    /// Whether that flight touched the fixed wall.
    pub bounced: Vec<bool>,
    /// The step budget ran out before the stop predicate fired.
    pub truncated: bool,
}

impl OrbitTrace {
    pub fn last(&self) -> &CollisionState {
        self.states.last().expect("trace always holds the initial state")
    }

    pub fn steps(&self) -> usize {
        self.dts.len()
    }

    /// CSV with columns `step,winding,phase,v,dt,bounced`; row 0 is the
    /// initial state with an empty flight.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,winding,phase,v,dt,bounced\n");
        for (i, s) in self.states.iter().enumerate() {
            let (dt, b) = if i == 0 {
                (String::new(), String::new())
            } else {
                (
                    crate::io::fmt_f64(self.dts[i - 1]),
                    (self.bounced[i - 1] as u8).to_string(),
                )
            };
            out.push_str(&format!(
                "{i},{},{},{},{dt},{b}\n",
                s.winding,
                crate::io::fmt_f64(s.phase),
                crate::io::fmt_f64(s.v)
            ));
        }
        out
    }
}

/// Applies the collision map until `stop(step, state)` fires or `max_steps`
/// collisions have been made. Budget exhaustion is not an error; the trace
/// comes back flagged as truncated.
pub fn iterate<P>(
    dynamics: &Dynamics,
    initial: CollisionState,
    mut stop: P,
    max_steps: usize,
) -> Result<OrbitTrace>
where
    P: FnMut(usize, &CollisionState) -> bool,
{
    if !initial.is_admissible(&dynamics.profile) {
        return Err(Error::Inadmissible {
            phase: initial.phase,
            v: initial.v,
        });
    }
    let mut trace = OrbitTrace {
        states: vec![initial],
        ..Default::default()
    };
    let mut state = initial;
    for n in 1..=max_steps {
        let step = dynamics.step(&state)?;
        state = step.state;
        trace.states.push(state);
        trace.dts.push(step.dt);
        trace.bounced.push(step.bounced);
        if stop(n, &state) {
            return Ok(trace);
        }
    }
    trace.truncated = true;
    Ok(trace)
}

/// The image of `(t, v)` without reducing the time, so that it is smooth in
/// both arguments away from the discontinuity.
fn lifted_image(solver: &FlightSolver, profile: &WallProfile, t: f64, v: f64) -> Result<(f64, f64, bool)> {
    let flight = solver.solve(profile, t, v)?;
    let t_next = t + flight.dt;
    let incoming = if flight.bounced { v } else { -v };
    Ok((t_next, incoming - 2.0 * profile.dl(t_next), flight.bounced))
}

/// Volume-form check by central differences: returns
/// `|det Df(t,v)| · (v' + ℓ̇(t')) / (v + ℓ̇(t))`, which equals 1 when the
/// map preserves `(v + ℓ̇)dt∧dv`.
pub fn jacobian_check(profile: &WallProfile, state: &CollisionState, h: f64) -> Result<f64> {
    let t = state.phase;
    let v = state.v;
    if !(h > 0.0) || t - h <= 0.0 || t + h >= 1.0 {
        return Err(Error::StencilStraddlesJump { phase: t, h });
    }
    let solver = FlightSolver::default();
    let (t1, v1, b0) = lifted_image(&solver, profile, t, v)?;
    let near_jump = |x: f64| {
        let f = x - x.floor();
        f.min(1.0 - f)
    };
    // the image and its stencil must stay off t ≡ 0 as well
    let reach = 4.0 * h * (1.0 + profile.lip_bound() + v.abs());
    if near_jump(t1) <= reach {
        return Err(Error::StencilStraddlesJump { phase: phase_of(t1), h });
    }
    let eval = |tt: f64, vv: f64| -> Result<(f64, f64)> {
        let (a, b, bounced) = lifted_image(&solver, profile, tt, vv)?;
        if bounced != b0 {
            return Err(Error::StencilStraddlesJump { phase: tt, h });
        }
        Ok((a, b))
    };
    let (tp, vp) = eval(t + h, v)?;
    let (tm, vm) = eval(t - h, v)?;
    let dt_dt = (tp - tm) / (2.0 * h);
    let dv_dt = (vp - vm) / (2.0 * h);
    let (tp, vp) = eval(t, v + h)?;
    let (tm, vm) = eval(t, v - h)?;
    let dt_dv = (tp - tm) / (2.0 * h);
    let dv_dv = (vp - vm) / (2.0 * h);
    let det = dt_dt * dv_dv - dt_dv * dv_dt;
    Ok(det.abs() * (v1 + profile.dl(t1)) / (v + profile.dl(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wall::{make_constant, make_quadratic, make_sine};

    #[test]
    fn constant_wall_flights() {
        let p = make_constant(1.0).unwrap();
        for t in [0.0, 0.3, 0.77] {
            let f = solve_flight(&p, &CollisionState::new(t, 10.0), 1e-15).unwrap();
            assert!((f.dt - 0.2).abs() < 1e-15);
            assert!(f.bounced);
        }
        let p = make_constant(2.0).unwrap();
        let f = solve_flight(&p, &CollisionState::new(0.1, 4.0), 1e-15).unwrap();
        assert!((f.dt - 1.0).abs() < 1e-15);
        assert!(f.bounced);
        // bracket path agrees (lip bound 0 but slow ball)
        let f = solve_flight(&p, &CollisionState::new(0.1, 0.5), 1e-15).unwrap();
        assert!((f.dt - 8.0).abs() < 1e-12);
    }

    #[test]
    fn constant_wall_map() {
        let p = make_constant(1.0).unwrap();
        let s = collision_map(&p, &CollisionState::new(0.3, 5.0)).unwrap();
        assert!((s.phase - 0.7).abs() < 1e-15);
        assert_eq!(s.v, 5.0);
        assert_eq!(s.winding, 0);
        let s = collision_map(&p, &s).unwrap();
        assert!((s.phase - 0.1).abs() < 1e-14);
        assert_eq!(s.winding, 1);
    }

    #[test]
    fn quadratic_map_reflection_law() {
        let p = make_quadratic(-1.0, 1.0).unwrap();
        let st = CollisionState::new(0.5, 50.0);
        let f = solve_flight(&p, &st, 1e-15).unwrap();
        let out = collision_map(&p, &st).unwrap();
        let t1 = 0.5 + f.dt;
        let expected = 50.0 - 2.0 * (2.0 * -1.0 * (t1 - 0.5));
        assert!((out.v - expected).abs() < 1e-12);
        assert!((out.phase - t1).abs() < 1e-15);
    }

    #[test]
    fn fast_and_bracket_paths_agree() {
        let p = make_quadratic(-1.0, 1.0).unwrap();
        for (t, v) in [(0.25, 5.0), (0.7, 3.0), (0.1, 9.0)] {
            let fast = FlightSolver::default().fixed_point(&p, t, v).unwrap();
            let slow = FlightSolver::default().bracket(&p, t, v).unwrap();
            assert!(slow.bounced);
            assert!((fast - slow.dt).abs() < 1e-13, "{fast} {}", slow.dt);
        }
    }

    #[test]
    fn slow_ball_is_caught_before_the_fixed_wall() {
        // wall approaching fast near t = 1⁻ for A = 3: ℓ̇ up to 3, so a ball at
        // v = -1 moving away is recaptured, and a slow v > 0 ball too.
        let p = make_quadratic(-3.0, 1.0).unwrap();
        let st = CollisionState::new(0.05, -1.0);
        assert!(st.is_admissible(&p));
        let f = solve_flight(&p, &st, 1e-15).unwrap();
        assert!(!f.bounced);
        let out = collision_map(&p, &st).unwrap();
        assert!(out.is_admissible(&p));
        assert!(out.v > 0.0);
    }

    #[test]
    fn iterate_stops() {
        let dynamics = Dynamics::new(make_constant(1.0).unwrap());
        let tr = iterate(&dynamics, CollisionState::new(0.0, 10.0), |n, _| n >= 5, 100).unwrap();
        assert_eq!(tr.steps(), 5);
        assert!(!tr.truncated);
        for w in tr.states.windows(2) {
            assert!(((w[1].time() - w[0].time()) - 0.2).abs() < 1e-12);
            assert_eq!(w[1].v, 10.0);
        }
        let tr = iterate(&dynamics, CollisionState::new(0.05, 10.0), |_, s| s.winding >= 1, 100).unwrap();
        let last = tr.last();
        assert_eq!(last.winding, 1);
        assert_eq!(tr.states[tr.states.len() - 2].winding, 0);
        let tr = iterate(&dynamics, CollisionState::new(0.05, 10.0), |_, _| false, 7).unwrap();
        assert!(tr.truncated);
        assert_eq!(tr.steps(), 7);
        assert!(tr.to_csv().starts_with("step,winding,phase,v,dt,bounced\n0,0,"));
    }

    #[test]
    fn jacobian_constant_and_refusal() {
        let p = make_constant(1.0).unwrap();
        let r = jacobian_check(&p, &CollisionState::new(0.3, 7.0), 1e-5).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        assert!(matches!(
            jacobian_check(&p, &CollisionState::new(1e-6, 7.0), 1e-5),
            Err(Error::StencilStraddlesJump { .. })
        ));
    }

    #[test]
    fn jacobian_examples() {
        let p = make_quadratic(-1.0, 1.0).unwrap();
        let r = jacobian_check(&p, &CollisionState::new(0.3, 40.0), 1e-5).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
        let p = make_sine(0.12).unwrap();
        let r = jacobian_check(&p, &CollisionState::new(0.6, 25.0), 1e-5).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn inadmissible_rejected() {
        let p = make_quadratic(-1.0, 1.0).unwrap();
        // ℓ̇(0.9) = -0.8, so v must exceed 0.8
        assert!(solve_flight(&p, &CollisionState::new(0.9, 0.5), 1e-12).is_err());
    }
}
