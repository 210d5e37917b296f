use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{DenseOperator, OperatorRef};
use crate::qp::BoxQp;

/// A bound entry: a number, or `"inf"` / `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum BoundValue {
    Number(f64),
    Text(String),
}

impl BoundValue {
    fn value(&self) -> Result<f64> {
        match self {
            Self::Number(v) => Ok(*v),
            Self::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(Error::InvalidParameter {
                    name: "bound",
                    reason: format!("expected a number, \"inf\" or \"-inf\", got \"{other}\""),
                }),
            },
        }
    }

    fn from_value(v: f64) -> Self {
        if v == f64::INFINITY {
            Self::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            Self::Text("-inf".into())
        } else {
            Self::Number(v)
        }
    }
}

/// JSON layout of a dense QP file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct QpFile {
    pub n: usize,
    A: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default)]
    l: Option<Vec<BoundValue>>,
    #[serde(default)]
    u: Option<Vec<BoundValue>>,
    #[serde(default)]
    G: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    e: Option<Vec<f64>>,
}

fn bounds(v: &Option<Vec<BoundValue>>) -> Result<Option<Vec<f64>>> {
    v.as_ref()
        .map(|v| v.iter().map(BoundValue::value).collect())
        .transpose()
}

impl QpFile {
    pub fn into_problem(self) -> Result<BoxQp> {
        if self.A.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "rows of A",
                expected: self.n,
                found: self.A.len(),
            });
        }
        let op: OperatorRef = Arc::new(DenseOperator::from_rows(&self.A)?);
        let qp = BoxQp::new(op, self.b.clone(), bounds(&self.l)?, bounds(&self.u)?)?;
        match (self.G, self.e) {
            (None, None) => Ok(qp),
            (Some(g), Some(e)) => {
                let m = g.len();
                if let Some(bad) = g.iter().find(|row| row.len() != self.n) {
                    return Err(Error::DimensionMismatch {
                        what: "columns of G",
                        expected: self.n,
                        found: bad.len(),
                    });
                }
                let flat: Vec<f64> = g.into_iter().flatten().collect();
                qp.with_equality(DMatrix::from_row_slice(m, self.n, &flat), e)
            }
            _ => Err(Error::InvalidParameter {
                name: "G/e",
                reason: "G and e must be given together".into(),
            }),
        }
    }

    /// Dense snapshot of a problem; the operator is probed column by column.
    pub fn from_problem(problem: &BoxQp) -> Self {
        let n = problem.dim();
        let op = problem.operator();
        let mut cols = Vec::with_capacity(n);
        let mut unit = vec![0.0; n];
        for k in 0..n {
            unit[k] = 1.0;
            cols.push(op.apply(&unit));
            unit[k] = 0.0;
        }
        let a = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
        let side = |v: &[f64], present: bool| {
            present.then(|| v.iter().copied().map(BoundValue::from_value).collect())
        };
        let (g, e) = match problem.equality() {
            Some(eq) => (
                Some(
                    (0..eq.matrix.nrows())
                        .map(|i| eq.matrix.row(i).iter().copied().collect())
                        .collect(),
                ),
                Some(eq.rhs.clone()),
            ),
            None => (None, None),
        };
        Self {
            n,
            A: a,
            b: problem.rhs().to_vec(),
            l: side(problem.lower(), problem.has_lower()),
            u: side(problem.upper(), problem.has_upper()),
            G: g,
            e,
        }
    }
}

pub fn parse_qp(text: &str) -> Result<BoxQp> {
    serde_json::from_str::<QpFile>(text)?.into_problem()
}

pub fn read_qp(path: impl AsRef<Path>) -> Result<BoxQp> {
    parse_qp(&std::fs::read_to_string(path)?)
}

pub fn write_qp(problem: &BoxQp) -> Result<String> {
    Ok(serde_json::to_string_pretty(&QpFile::from_problem(problem))?)
}
