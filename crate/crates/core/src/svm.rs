//! Linear SVM training through the no-bias dual.
//!
//! Every sample is augmented with a constant trailing component `beta`, which
//! absorbs the bias into the normal vector and leaves a dual with bound
//! constraints only:
//!
//! * l1 loss: `min 1/2 l'Hl - e'l` subject to `0 <= l <= C`,
//! * l2 loss: `min 1/2 l'(H + I/C)l - e'l` subject to `0 <= l`,
//!
//! with `H = Y X'X Y` applied through [`GramOperator`] and never formed.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{GramOperator, OperatorRef, ShiftedOperator, SparseColumns};
use crate::mprgp::{solve, SolveReport, SolverConfig};
use crate::qp::BoxQp;

/// Sparse samples (one column each) with `+1`/`-1` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: SparseColumns,
    labels: Vec<f64>,
}

impl LabeledDataset {
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
        Ok(Self { samples, labels })
    }

    pub fn samples(&self) -> &SparseColumns {
        &self.samples
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_count(&self) -> usize {
        self.samples.rows()
    }

    pub fn sample_count(&self) -> usize {
        self.labels.len()
    }

    /// Same samples with every label negated.
    pub fn flipped(&self) -> Self {
        Self {
            samples: self.samples.clone(),
            labels: self.labels.iter().map(|y| -y).collect(),
        }
    }
}

/// Reads LIBSVM text: `<label> <index>:<value> ...` per line, 1-based
/// strictly ascending indices. Blank lines are skipped.
///
/// The two distinct raw labels are mapped to `-1` (smaller) and `+1`
/// (larger). `feature_count` overrides the largest index seen; it must not
/// be smaller than that index.
pub fn parse_libsvm<R: BufRead>(reader: R, feature_count: Option<usize>) -> Result<LabeledDataset> {
    let mut raw_labels = Vec::new();
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let err = |reason: String| Error::Parse {
            line: lineno,
            reason,
        };
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        let label: f64 = label
            .parse()
            .map_err(|_| err(format!("invalid label `{label}`")))?;
        if !label.is_finite() {
            return Err(err(format!("invalid label `{label}`")));
        }
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, found `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("invalid index `{idx}`")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} does not increase")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("invalid value `{val}`")))?;
            if !val.is_finite() {
                return Err(err(format!("invalid value `{val}`")));
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        raw_labels.push(label);
        columns.push(entries);
    }

    let classes: BTreeSet<u64> = raw_labels.iter().map(|l| l.to_bits()).collect();
    if classes.len() != 2 {
        return Err(Error::ClassCount(classes.len()));
    }
    let top = raw_labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let rows = match feature_count {
        Some(f) if f < max_index => {
            return Err(Error::DimensionMismatch {
                what: "feature count",
                expected: max_index,
                found: f,
            })
        }
        Some(f) => f,
        None => max_index,
    };
    let mut samples = SparseColumns::new(rows);
    for col in &columns {
        samples.push_column(col)?;
    }
    let labels = raw_labels
        .iter()
        .map(|l| if *l == top { 1.0 } else { -1.0 })
        .collect();
    LabeledDataset::new(samples, labels)
}

pub fn read_libsvm(path: impl AsRef<Path>, feature_count: Option<usize>) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path)?;
    parse_libsvm(std::io::BufReader::new(file), feature_count)
}

/// Appends the constant component `beta` to every sample.
pub fn augment_nobias(data: &LabeledDataset, beta: f64) -> Result<LabeledDataset> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must be positive and finite, got {beta}"),
        });
    }
    Ok(LabeledDataset {
        samples: data.samples.with_constant_row(beta),
        labels: data.labels.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    L1,
    L2,
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L1 => "l1",
            Self::L2 => "l2",
        })
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            _ => Err(Error::InvalidParameter {
                name: "loss",
                reason: format!("expected l1 or l2, got `{s}`"),
            }),
        }
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "C",
            reason: format!("must be positive and finite, got {c}"),
        });
    }
    Ok(())
}

/// Dual problem of already augmented data.
pub fn build_dual(data: &LabeledDataset, loss: Loss, c: f64) -> Result<BoxQp> {
    check_c(c)?;
    let m = data.sample_count();
    let gram: OperatorRef = Arc::new(GramOperator::new(data.samples.clone(), data.labels.clone())?);
    match loss {
        Loss::L1 => BoxQp::new(gram, vec![1.0; m], Some(vec![0.0; m]), Some(vec![c; m])),
        Loss::L2 => {
            let op: OperatorRef = Arc::new(ShiftedOperator::new(gram, 1.0 / c)?);
            BoxQp::new(op, vec![1.0; m], Some(vec![0.0; m]), None)
        }
    }
}

/// Starting point of training: just below `C` for l1, zero for l2.
pub fn initial_guess(loss: Loss, c: f64, m: usize) -> Vec<f64> {
    match loss {
        Loss::L1 => vec![(1.0 - 100.0 * f64::EPSILON) * c; m],
        Loss::L2 => vec![0.0; m],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Normal vector of the augmented samples; the last entry multiplies `beta`.
    pub w_hat: Vec<f64>,
    pub beta: f64,
    pub loss: Loss,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(skip)]
    pub dual: Vec<f64>,
}

impl SvmModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `<w_hat, [x; beta]>` for every sample.
    pub fn decision_values(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        let nf = self.w_hat.len() - 1;
        if data.feature_count() > nf {
            return Err(Error::DimensionMismatch {
                what: "sample features",
                expected: nf,
                found: data.feature_count(),
            });
        }
        let bias = self.w_hat[nf] * self.beta;
        Ok((0..data.sample_count())
            .map(|j| data.samples.dot_column(j, &self.w_hat) + bias)
            .collect())
    }
}

/// Trains on raw (not yet augmented) data, starting from [`initial_guess`].
pub fn train(
    data: &LabeledDataset,
    loss: Loss,
    c: f64,
    beta: f64,
    config: &SolverConfig,
) -> Result<(SvmModel, SolveReport)> {
    let augmented = augment_nobias(data, beta)?;
    let dual = build_dual(&augmented, loss, c)?;
    let x0 = initial_guess(loss, c, augmented.sample_count());
    let report = solve(&dual, &x0, config)?;
    let mut w_hat = vec![0.0; augmented.feature_count()];
    for (j, (lambda, y)) in report.x.iter().zip(&augmented.labels).enumerate() {
        augmented.samples.axpy_column(j, lambda * y, &mut w_hat);
    }
    let model = SvmModel {
        w_hat,
        beta,
        loss,
        c,
        dual: report.x.clone(),
    };
    Ok((model, report))
}

/// Predicted labels; a zero decision value counts as `+1`.
pub fn predict(model: &SvmModel, data: &LabeledDataset) -> Result<Vec<f64>> {
    Ok(model
        .decision_values(data)?
        .into_iter()
        .map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
        .collect())
}

/// Fraction of correctly predicted labels.
pub fn accuracy(model: &SvmModel, data: &LabeledDataset) -> Result<f64> {
    let pred = predict(model, data)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / pred.len() as f64)
}
