//! Sensor network localization by block coordinate descent.
//!
//! Sensor positions are recovered from anchor positions and noisy pairwise
//! distances. The rank-constrained semidefinite formulation is replaced by two
//! `d×m` factors `U` and `V` tied together by a quadratic penalty
//! `γ/2 ‖U − V‖²_F`. The resulting objective is convex in every single column,
//! so the solver sweeps over the columns of `U` and then `V`, replacing each by
//! the exact minimizer of a `d×d` linear system.
//!
//! ```
//! use snl_core::{generate::{two_sensor_fixture, random_hull_start}, solver::{solve, GammaMode, SolverConfig}};
//!
//! let instance = two_sensor_fixture();
//! let start = random_hull_start(instance.network(), 1).unwrap();
//! let config = SolverConfig { gamma_mode: GammaMode::Threshold { factor: 1.0 }, ..SolverConfig::default() };
//! let solution = solve(instance.network(), start, &config).unwrap();
//! let estimates = solution.estimates();
//! assert!((estimates.column(0)[1] - 0.5).abs() < 1e-2);
//! ```

pub mod error;
pub mod evaluate;
pub mod files;
pub mod generate;
pub mod linalg;
pub mod problem;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
pub use problem::{FactorPair, Network, Points, ProblemInstance};
pub use solver::{solve, GammaMode, Solution, SolverConfig, Termination};
