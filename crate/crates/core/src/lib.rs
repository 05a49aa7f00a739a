//! Simulation and analysis toolkit for piecewise-smooth Fermi-Ulam ping pong
//! models.
//!
//! A ball bounces elastically between a fixed wall and a wall moving with a
//! 1-periodic law ℓ(t) whose velocity jumps once per period. The crate covers
//!
//! - [`wall`]: admissible wall motions and the constants 𝒥, Δ, Δ₁;
//! - [`collision`]: exact event-driven simulation of the collision map;
//! - [`coords`]: angle/action coordinates, the adiabatic invariant and the
//!   first-return map to the strip next to t ≡ 0;
//! - [`normal_form`]: the piecewise-affine limit map, the sawtooth torus map,
//!   periodic-orbit search and Green-Kubo diffusion;
//! - [`experiments`]: seeded Monte Carlo runs (escape times, Brownian scaling,
//!   elliptic trapping, residual orders);
//! - [`config`] and [`runner`]: the config-driven front end used by the
//!   `pingpong` binary.

pub mod collision;
pub mod config;
pub mod coords;
pub mod error;
pub mod experiments;
pub mod io;
pub mod normal_form;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod wall;

pub use collision::{
    collision_map, iterate, jacobian_check, solve_flight, CollisionState, Dynamics, Flight,
    FlightSolver, OrbitTrace, Step,
};
pub use error::{Error, Result};
pub use wall::{
    compute_j, compute_params, delta_closed_form, make_constant, make_quadratic, make_sine,
    make_spline, NormalFormParams, ProfileSpec, Regime, WallProfile,
};
