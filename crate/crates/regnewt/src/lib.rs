//! Newton-type iterative regularization for nonlinear ill-posed inverse
//! problems `F(x) = y` from noisy data, with pluggable spectral filter
//! families, discrepancy-principle stopping, concrete test problems and
//! numerical verification of the structural assumptions the convergence
//! theory rests on.
//!
//! ```
//! use regnewt::filters::FilterFamily;
//! use regnewt::problems::{diagonal_problem, make_noisy, NoiseSpec};
//! use regnewt::schedule::AlphaSchedule;
//! use regnewt::solver::{run_discrepancy, RunStatus, SolverConfig};
//! use regnewt::space::Vector;
//!
//! // A two-mode linear benchmark with known solution.
//! let problem = diagonal_problem(&[0.5, 0.25], 100.0)?
//!     .with_solution(Vector::euclidean(vec![1.0, -2.0])?)?;
//! let y = problem.exact_data()?;
//! let delta = 1e-4;
//! let ydelta = make_noisy(&y, &NoiseSpec { delta, seed: 7 })?;
//!
//! // Order-1 iterated Tikhonov = the iteratively regularized Gauss-Newton
//! // method; stop by the discrepancy principle with tau = 1.5.
//! let x0 = Vector::euclidean(vec![0.7, -1.6])?;
//! let result = run_discrepancy(
//!     &problem,
//!     FilterFamily::IteratedTikhonov { order: 1 },
//!     &AlphaSchedule::geometric(1.0, 1.5)?,
//!     &SolverConfig::new(1.5, delta)?,
//!     &x0,
//!     &ydelta,
//! )?;
//! assert_eq!(result.status, RunStatus::StoppedByDiscrepancy);
//! let err = result.final_iterate.sub(problem.x_true().unwrap())?.norm();
//! assert!(err < x0.sub(problem.x_true().unwrap())?.norm());
//! # Ok::<(), regnewt::Error>(())
//! ```

// Validation guards are written as `!(x > 0.0)` on purpose: the negated form
// rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filters;
pub mod operator;
pub mod problems;
pub mod schedule;
pub mod solver;
pub mod space;
pub mod verify;

pub use error::{Error, Result};
pub use filters::{FilterConstants, FilterFamily};
pub use operator::{op_norm_estimate, svd_dense, LinearOperator, SvdFactors};
pub use problems::NonlinearProblem;
pub use schedule::AlphaSchedule;
pub use solver::{RunResult, RunStatus, SolverConfig};
pub use space::{inner, Vector, Weights};
