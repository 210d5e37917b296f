//! Matrix-free solvers for convex quadratic programs with box constraints.
//!
//! The crate is organised bottom-up:
//!
//! * [`linop`] holds the operator abstraction every Hessian goes through,
//!   with exact application counters and power-iteration norm estimates.
//! * [`qp`] defines [`BoxQp`] and the free / reduced free / chopped gradient
//!   splittings.
//! * [`mprgp`] is the box-constrained solver with its expansion strategies.
//! * [`smalbe`] wraps it in an augmented Lagrangian loop for `Gx = e`.
//! * [`svm`] turns LIBSVM data into no-bias dual SVM problems.
//! * [`bench`] provides problem generators, strategy sweeps and reporting.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod linop;
pub mod mprgp;
pub mod qp;
pub mod smalbe;
pub mod svm;

pub use error::{Error, Result};
pub use linop::{LinearOperator, OperatorRef};
pub use mprgp::{solve, ExpansionStrategy, SolveReport, SolverConfig};
pub use qp::BoxQp;
