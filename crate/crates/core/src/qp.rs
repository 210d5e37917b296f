//! Box-constrained quadratic programs and their gradient splittings.
//!
//! A [`BoxQp`] is `min 1/2 x'Ax - x'b` subject to `l <= x <= u`, optionally
//! with equality constraints `Gx = e` that only the augmented Lagrangian
//! driver in [`crate::smalbe`] consumes. Absent bounds are stored as
//! infinities, and every formula below treats an infinite bound as never
//! touched.
//!
//! Activity is decided by exact comparison `x_j == l_j` / `x_j == u_j`. The
//! solvers only ever place an iterate on a bound by copying the bound value,
//! so the comparison is reliable.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linop::{dot, OperatorRef};

/// Linear equality constraints `G x = e`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConstraints {
    pub matrix: DMatrix<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BoxQp {
    operator: OperatorRef,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    equality: Option<EqualityConstraints>,
}

impl BoxQp {
    pub fn new(
        operator: OperatorRef,
        rhs: Vec<f64>,
        lower: Option<Vec<f64>>,
        upper: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = operator.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                what: "rhs",
                expected: n,
                found: rhs.len(),
            });
        }
        let lower = lower.unwrap_or_else(|| vec![f64::NEG_INFINITY; n]);
        let upper = upper.unwrap_or_else(|| vec![f64::INFINITY; n]);
        for (what, v) in [("lower bound", &lower), ("upper bound", &upper)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || *l > *u || *l == f64::INFINITY || *u == f64::NEG_INFINITY
            {
                return Err(Error::InvalidBounds {
                    index: j,
                    lower: *l,
                    upper: *u,
                });
            }
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rhs",
                reason: "entries must be finite".into(),
            });
        }
        Ok(Self {
            operator,
            rhs,
            lower,
            upper,
            equality: None,
        })
    }

    /// Attaches equality constraints `G x = e`.
    pub fn with_equality(mut self, matrix: DMatrix<f64>, rhs: Vec<f64>) -> Result<Self> {
        if matrix.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "equality matrix columns",
                expected: self.dim(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() != rhs.len() {
            return Err(Error::DimensionMismatch {
                what: "equality rhs",
                expected: matrix.nrows(),
                found: rhs.len(),
            });
        }
        self.equality = Some(EqualityConstraints { matrix, rhs });
        Ok(self)
    }

    /// Drops the equality constraints, keeping operator, rhs and bounds.
    pub fn without_equality(&self) -> Self {
        Self {
            equality: None,
            ..self.clone()
        }
    }

    /// Same bounds and equality constraints, new operator and rhs.
    pub fn with_operator(&self, operator: OperatorRef, rhs: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(
            operator,
            rhs,
            Some(self.lower.clone()),
            Some(self.upper.clone()),
        )?;
        out.equality = self.equality.clone();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn operator(&self) -> &OperatorRef {
        &self.operator
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn has_lower(&self) -> bool {
        self.lower.iter().any(|v| v.is_finite())
    }

    pub fn has_upper(&self) -> bool {
        self.upper.iter().any(|v| v.is_finite())
    }

    pub fn equality(&self) -> Option<&EqualityConstraints> {
        self.equality.as_ref()
    }

    fn check_len(&self, what: &'static str, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `1/2 x'Ax - x'b`; one operator application.
    pub fn cost(&self, x: &[f64]) -> Result<f64> {
        self.check_len("x", x)?;
        let ax = self.operator.apply(x);
        Ok(0.5 * dot(x, &ax) - dot(x, &self.rhs))
    }

    /// `Ax - b`; one operator application.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("x", x)?;
        let mut g = self.operator.apply(x);
        for (gi, bi) in g.iter_mut().zip(&self.rhs) {
            *gi -= bi;
        }
        Ok(g)
    }

    /// Component-wise clamp onto the box.
    ///
    /// # Panics
    /// If `x` does not have the problem dimension.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "project: dimension mismatch");
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = clamp(*xi, *l, *u);
        }
    }

    pub fn check_feasible(&self, x: &[f64]) -> Result<()> {
        self.check_len("x", x)?;
        for (j, ((xi, l), u)) in x.iter().zip(&self.lower).zip(&self.upper).enumerate() {
            if !(*l <= *xi && *xi <= *u) {
                return Err(Error::Infeasible {
                    index: j,
                    value: *xi,
                    lower: *l,
                    upper: *u,
                });
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.check_feasible(x).is_ok()
    }

    /// Free, reduced free and chopped gradients of `g` at the feasible point `x`.
    ///
    /// `alpha_bar` is the reference step length that caps the reduced free
    /// gradient so that `x - alpha_bar * g_r` stays in the box.
    pub fn split_gradient(&self, x: &[f64], g: &[f64], alpha_bar: f64) -> Result<GradientSplit> {
        self.check_feasible(x)?;
        self.check_len("g", g)?;
        if !(alpha_bar > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha_bar",
                reason: format!("must be positive, got {alpha_bar}"),
            });
        }
        let n = self.dim();
        let mut split = GradientSplit {
            free: vec![0.0; n],
            reduced_free: vec![0.0; n],
            chopped: vec![0.0; n],
            projected_norm: 0.0,
        };
        let mut sq = 0.0;
        for j in 0..n {
            let c = split_component(x[j], self.lower[j], self.upper[j], g[j]);
            split.free[j] = c.free;
            split.chopped[j] = c.chopped;
            split.reduced_free[j] =
                reduced_component(x[j], self.lower[j], self.upper[j], c.free, alpha_bar);
            sq += c.free * c.free + c.chopped * c.chopped;
        }
        split.projected_norm = sq.sqrt();
        Ok(split)
    }

    pub fn active_set(&self, x: &[f64]) -> Result<ActiveSetSnapshot> {
        self.check_feasible(x)?;
        Ok(ActiveSetSnapshot::of(x, &self.lower, &self.upper))
    }
}

#[inline]
pub(crate) fn clamp(x: f64, l: f64, u: f64) -> f64 {
    if x < l {
        l
    } else if x > u {
        u
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitComponent {
    pub free: f64,
    pub chopped: f64,
}

/// Free and chopped parts of one gradient component.
///
/// Components with `l == u` are permanently active and contribute to
/// neither part.
#[inline]
pub(crate) fn split_component(x: f64, l: f64, u: f64, g: f64) -> SplitComponent {
    if l == u {
        SplitComponent {
            free: 0.0,
            chopped: 0.0,
        }
    } else if x == l {
        SplitComponent {
            free: 0.0,
            chopped: g.min(0.0),
        }
    } else if x == u {
        SplitComponent {
            free: 0.0,
            chopped: g.max(0.0),
        }
    } else {
        SplitComponent {
            free: g,
            chopped: 0.0,
        }
    }
}

/// Reduced free gradient component given the free component `gf`.
#[inline]
pub(crate) fn reduced_component(x: f64, l: f64, u: f64, gf: f64, alpha_bar: f64) -> f64 {
    if x == l || x == u {
        0.0
    } else if gf > 0.0 {
        ((x - l) / alpha_bar).min(gf)
    } else {
        ((x - u) / alpha_bar).max(gf)
    }
}

/// Gradient split at a feasible point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSplit {
    pub free: Vec<f64>,
    pub reduced_free: Vec<f64>,
    pub chopped: Vec<f64>,
    pub projected_norm: f64,
}

impl GradientSplit {
    /// `g^P = g^f + g^c`.
    pub fn projected(&self) -> Vec<f64> {
        self.free
            .iter()
            .zip(&self.chopped)
            .map(|(f, c)| f + c)
            .collect()
    }
}

/// Indices sitting on the lower and upper bound.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSetSnapshot {
    pub at_lower: Vec<usize>,
    pub at_upper: Vec<usize>,
}

impl ActiveSetSnapshot {
    pub(crate) fn of(x: &[f64], lower: &[f64], upper: &[f64]) -> Self {
        let mut snap = Self::default();
        for (j, ((xi, l), u)) in x.iter().zip(lower).zip(upper).enumerate() {
            if xi == l {
                snap.at_lower.push(j);
            }
            if xi == u {
                snap.at_upper.push(j);
            }
        }
        snap
    }

    /// Union of both index sets.
    pub fn active(&self) -> BTreeSet<usize> {
        self.at_lower.iter().chain(&self.at_upper).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.active().len()
    }

    pub fn is_empty(&self) -> bool {
        self.at_lower.is_empty() && self.at_upper.is_empty()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.active().is_subset(&other.active())
    }
}
