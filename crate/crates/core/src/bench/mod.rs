//! Problem generators, strategy sweeps and result tables.
//!
//! A sweep solves one problem for every `(strategy, alpha_u)` pair and
//! reports the counters of each run as a [`SweepRow`]. The obstacle problem
//! is a small stand-in for large contact problems; its rows are labelled as
//! such through the benchmark id.

mod generators;
mod qpfile;
mod sweep;

pub use generators::{generate_eq_toy, generate_obstacle, EQ_TOY_BOX};
pub use qpfile::{parse_qp, read_qp, write_qp, QpFile};
pub use sweep::{
    emit, parse_csv, run_sweep, Format, ProblemInstance, ProblemSource, RunDetail, SweepOutcome,
    SweepRow, SweepSpec, CSV_HEADER, DEFAULT_ALPHA_GRID,
};
