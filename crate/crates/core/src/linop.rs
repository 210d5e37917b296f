//! Matrix-free linear operators.
//!
//! Every Hessian the solvers touch is reached through [`LinearOperator`], and
//! every operator counts its own applications. The counters are the basis of
//! all cost accounting in this crate, so an operator that wraps another one
//! (see [`ShiftedOperator`]) forwards the count instead of keeping its own.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A symmetric linear map `R^n -> R^n` that counts its applications.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`. Counts as exactly one application.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// Number of applications performed so far.
    fn mults(&self) -> u64;

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

/// Shared handle to an operator; problems and wrapping operators hold these.
pub type OperatorRef = Arc<dyn LinearOperator>;

/// Monotone application counter.
#[derive(Debug, Default)]
pub struct MultCounter(AtomicU64);

impl MultCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) {
    assert_eq!(
        expected, found,
        "{what}: vector length {found} does not match operator dimension {expected}"
    );
}

/// Dense row-major symmetric matrix.
#[derive(Debug)]
pub struct DenseOperator {
    n: usize,
    data: Vec<f64>,
    counter: MultCounter,
}

impl DenseOperator {
    /// Relative tolerance of the symmetry check, measured against the largest entry.
    pub const SYMMETRY_TOL: f64 = 1e-12;

    /// Builds the operator from a row-major `n x n` array.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::NotSquare {
                rows: n,
                cols: data.len().checked_div(n).unwrap_or(data.len()),
            });
        }
        let scale = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = (data[i * n + j] - data[j * n + i]).abs();
                if diff > Self::SYMMETRY_TOL * scale || diff.is_nan() {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        diff,
                    });
                }
            }
        }
        Ok(Self {
            n,
            data,
            counter: MultCounter::default(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self {
            n,
            data,
            counter: MultCounter::default(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        check_len("DenseOperator", self.n, x.len());
        check_len("DenseOperator", self.n, y.len());
        self.counter.bump();
        for (row, yi) in self.data.chunks_exact(self.n.max(1)).zip(y.iter_mut()) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn mults(&self) -> u64 {
        self.counter.get()
    }
}

/// Compressed sparse column storage; columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumns {
    rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColumns {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            col_ptr: vec![0],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a column given as `(row, value)` pairs with strictly ascending rows.
    pub fn push_column(&mut self, entries: &[(usize, f64)]) -> Result<()> {
        let mut last = None;
        for &(row, value) in entries {
            if row >= self.rows {
                return Err(Error::DimensionMismatch {
                    what: "sparse column row index",
                    expected: self.rows,
                    found: row + 1,
                });
            }
            if last.is_some_and(|l| row <= l) {
                return Err(Error::InvalidParameter {
                    name: "entries",
                    reason: "row indices must be strictly ascending".into(),
                });
            }
            last = Some(row);
            self.row_idx.push(row);
            self.values.push(value);
        }
        self.col_ptr.push(self.row_idx.len());
        Ok(())
    }

    /// Dense input, one inner vector per column.
    pub fn from_dense_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut out = Self::new(rows);
        for col in columns {
            if col.len() != rows {
                return Err(Error::DimensionMismatch {
                    what: "dense column",
                    expected: rows,
                    found: col.len(),
                });
            }
            let entries: Vec<_> = col
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect();
            out.push_column(&entries)?;
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Returns a copy with one extra trailing row filled with `value` in every column.
    pub fn with_constant_row(&self, value: f64) -> Self {
        let mut out = Self::new(self.rows + 1);
        for j in 0..self.cols() {
            let mut entries: Vec<_> = self.column(j).collect();
            entries.push((self.rows, value));
            out.push_column(&entries).expect("ascending by construction");
        }
        out
    }

    /// `out += alpha * column_j`.
    pub fn axpy_column(&self, j: usize, alpha: f64, out: &mut [f64]) {
        for (i, v) in self.column(j) {
            out[i] += alpha * v;
        }
    }

    pub fn dot_column(&self, j: usize, v: &[f64]) -> f64 {
        self.column(j).map(|(i, x)| x * v[i]).sum()
    }
}

/// The labeled Gram operator `H = Y X^T X Y` applied without forming `H`.
#[derive(Debug)]
pub struct GramOperator {
    samples: SparseColumns,
    labels: Vec<f64>,
    counter: MultCounter,
}

impl GramOperator {
    pub fn new(samples: SparseColumns, labels: Vec<f64>) -> Result<Self> {
        if samples.cols() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: samples.cols(),
                found: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|y| **y != 1.0 && **y != -1.0) {
            return Err(Error::InvalidLabel(*bad));
        }
        Ok(Self {
            samples,
            labels,
            counter: MultCounter::default(),
        })
    }

    pub fn samples(&self) -> &SparseColumns {
        &self.samples
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

impl LinearOperator for GramOperator {
    fn dim(&self) -> usize {
        self.labels.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let m = self.labels.len();
        check_len("GramOperator", m, x.len());
        check_len("GramOperator", m, y.len());
        self.counter.bump();
        let mut t = vec![0.0; self.samples.rows()];
        for (j, (xj, yj)) in x.iter().zip(&self.labels).enumerate() {
            let c = xj * yj;
            if c != 0.0 {
                self.samples.axpy_column(j, c, &mut t);
            }
        }
        for (j, (out, yj)) in y.iter_mut().zip(&self.labels).enumerate() {
            *out = yj * self.samples.dot_column(j, &t);
        }
    }

    fn mults(&self) -> u64 {
        self.counter.get()
    }
}

/// `base + shift * I`; application counts are the base operator's.
#[derive(Debug)]
pub struct ShiftedOperator {
    base: OperatorRef,
    shift: f64,
}

impl ShiftedOperator {
    pub fn new(base: OperatorRef, shift: f64) -> Result<Self> {
        if !(shift > 0.0) || !shift.is_finite() {
            return Err(Error::InvalidParameter {
                name: "shift",
                reason: format!("must be positive and finite, got {shift}"),
            });
        }
        Ok(Self { base, shift })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

impl LinearOperator for ShiftedOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.base.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self.shift * xi;
        }
    }

    fn mults(&self) -> u64 {
        self.base.mults()
    }
}

/// Five-point finite-difference Laplacian on the interior nodes of a
/// rectangular grid with homogeneous Dirichlet boundary.
///
/// The stencil is scaled by the cell area, i.e. the diagonal is
/// `2 (hy/hx + hx/hy)`, which is `4` on a square grid.
#[derive(Debug)]
pub struct GridLaplacian {
    nx: usize,
    ny: usize,
    wx: f64,
    wy: f64,
    counter: MultCounter,
}

impl GridLaplacian {
    /// `nx`, `ny` are interior node counts, `hx`, `hy` the mesh widths.
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        Self {
            nx,
            ny,
            wx: hy / hx,
            wy: hx / hy,
            counter: MultCounter::default(),
        }
    }
}

impl LinearOperator for GridLaplacian {
    fn dim(&self) -> usize {
        self.nx * self.ny
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        check_len("GridLaplacian", n, x.len());
        check_len("GridLaplacian", n, y.len());
        self.counter.bump();
        let diag = 2.0 * (self.wx + self.wy);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                let mut v = diag * x[k];
                if i > 0 {
                    v -= self.wx * x[k - 1];
                }
                if i + 1 < self.nx {
                    v -= self.wx * x[k + 1];
                }
                if j > 0 {
                    v -= self.wy * x[k - self.nx];
                }
                if j + 1 < self.ny {
                    v -= self.wy * x[k + self.nx];
                }
                y[k] = v;
            }
        }
    }

    fn mults(&self) -> u64 {
        self.counter.get()
    }
}

/// Result of a power-iteration estimate of `||A||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub mults_spent: u64,
}

pub const DEFAULT_NORM_MAX_ITERS: usize = 50;
pub const DEFAULT_NORM_REL_TOL: f64 = 1e-10;

/// Power iteration from a fixed pseudo-random start (seed 0).
pub fn estimate_norm(
    op: &dyn LinearOperator,
    max_iters: usize,
    rel_change_tol: f64,
) -> Result<NormEstimate> {
    estimate_norm_seeded(op, max_iters, rel_change_tol, 0)
}

/// Power iteration returning the last Rayleigh quotient.
///
/// Stops when two successive quotients agree to `rel_change_tol`, when the
/// iterate is an eigenvector to that tolerance, or after `max_iters`
/// applications. If the operator annihilates the start vector the estimate
/// is restarted once from `seed + 1`.
pub fn estimate_norm_seeded(
    op: &dyn LinearOperator,
    max_iters: usize,
    rel_change_tol: f64,
    seed: u64,
) -> Result<NormEstimate> {
    if max_iters == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iters",
            reason: "must be at least 1".into(),
        });
    }
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "operator",
            reason: "dimension is zero".into(),
        });
    }
    let mut spent = 0usize;
    for attempt in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + attempt);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut w = vec![0.0; n];
        let mut prev: Option<f64> = None;
        let mut broke_down = false;
        for it in 1..=max_iters {
            op.apply_into(&v, &mut w);
            spent += 1;
            let rho = dot(&v, &w);
            let nw = norm(&w);
            if nw == 0.0 {
                broke_down = true;
                break;
            }
            let residual = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - rho * b).powi(2))
                .sum::<f64>()
                .sqrt();
            let settled = prev.is_some_and(|p| (rho - p).abs() < rel_change_tol * rho.abs());
            if settled || residual <= rel_change_tol * rho.abs() || it == max_iters {
                return Ok(NormEstimate {
                    value: rho,
                    iterations: spent,
                    mults_spent: spent as u64,
                });
            }
            prev = Some(rho);
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nw;
            }
        }
        if !broke_down {
            unreachable!("loop returns on the last iteration");
        }
    }
    Err(Error::NormEstimateBreakdown)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
