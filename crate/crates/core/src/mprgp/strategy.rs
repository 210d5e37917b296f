use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Step-length rule of the expansion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// `alpha_u / ||A||`.
    Fixed,
    /// `alpha_u / ||A|| * d'g / d'd`.
    OptApprox,
    /// `alpha_u * d'g / d'Ad`; one extra operator application.
    Opt,
    /// Full CG step projected onto the box, replacing half-step and line search.
    ProjCg,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::OptApprox => "optapprox",
            Self::Opt => "opt",
            Self::ProjCg => "projcg",
        }
    }
}

/// Which splitting of the gradient feeds a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitVector {
    /// Free gradient `g^f`.
    Free,
    /// Reduced free gradient `g^r`.
    Reduced,
}

impl SplitVector {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Free => "gf",
            Self::Reduced => "gr",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "gf" => Some(Self::Free),
            "gr" => Some(Self::Reduced),
            _ => None,
        }
    }
}

/// Expansion-step configuration.
///
/// `steplen` selects the vector `d` in the step-length formula and
/// `direction` the vector the line search moves along. Both are ignored by
/// [`StrategyKind::Fixed`] (which always moves along the projected free
/// gradient) and [`StrategyKind::ProjCg`]. `alpha_u` is ignored by `ProjCg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionStrategy {
    pub kind: StrategyKind,
    pub steplen: SplitVector,
    pub direction: SplitVector,
    pub alpha_u: f64,
}

impl ExpansionStrategy {
    pub fn fixed(alpha_u: f64) -> Self {
        Self {
            kind: StrategyKind::Fixed,
            steplen: SplitVector::Free,
            direction: SplitVector::Free,
            alpha_u,
        }
    }

    pub fn optapprox(direction: SplitVector, steplen: SplitVector, alpha_u: f64) -> Self {
        Self {
            kind: StrategyKind::OptApprox,
            steplen,
            direction,
            alpha_u,
        }
    }

    pub fn opt(direction: SplitVector, steplen: SplitVector, alpha_u: f64) -> Self {
        Self {
            kind: StrategyKind::Opt,
            steplen,
            direction,
            alpha_u,
        }
    }

    pub fn projcg() -> Self {
        Self {
            kind: StrategyKind::ProjCg,
            steplen: SplitVector::Free,
            direction: SplitVector::Free,
            alpha_u: 1.0,
        }
    }

    pub fn with_alpha_u(mut self, alpha_u: f64) -> Self {
        self.alpha_u = alpha_u;
        self
    }

    /// Whether `alpha_u` has any effect.
    pub fn uses_alpha_u(&self) -> bool {
        self.kind != StrategyKind::ProjCg
    }

    /// Whether the strategy needs `||A||`, either for the step length itself
    /// or for the reference step that defines `g^r`.
    pub fn needs_norm(&self) -> bool {
        match self.kind {
            StrategyKind::Fixed | StrategyKind::OptApprox => true,
            StrategyKind::Opt => {
                self.steplen == SplitVector::Reduced || self.direction == SplitVector::Reduced
            }
            StrategyKind::ProjCg => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.uses_alpha_u() && !(self.alpha_u > 0.0 && self.alpha_u <= 2.0) {
            return Err(Error::InvalidParameter {
                name: "alpha_u",
                reason: format!("must lie in (0, 2], got {}", self.alpha_u),
            });
        }
        Ok(())
    }

    /// Canonical name: `fixed`, `projcg`, or `<direction><steplen>-<kind>`
    /// such as `gfgr-opt` (move along `g^f`, step length from `g^r`).
    pub fn name(&self) -> String {
        match self.kind {
            StrategyKind::Fixed | StrategyKind::ProjCg => self.kind.as_str().to_string(),
            kind => format!(
                "{}{}-{}",
                self.direction.as_str(),
                self.steplen.as_str(),
                kind.as_str()
            ),
        }
    }
}

impl fmt::Display for ExpansionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses a strategy name; `alpha_u` is set to 1 and can be changed with
/// [`ExpansionStrategy::with_alpha_u`].
///
/// `<dir><steplen>-fixed` (as in `grgr-fixed`) is accepted as an alias of
/// `fixed`, since the vector choice does not affect the fixed step.
pub fn parse_strategy(name: &str) -> Result<ExpansionStrategy> {
    let unknown = || Error::UnknownStrategy(name.to_string());
    match name {
        "fixed" => return Ok(ExpansionStrategy::fixed(1.0)),
        "projcg" => return Ok(ExpansionStrategy::projcg()),
        _ => {}
    }
    let (vectors, kind) = name.split_once('-').ok_or_else(unknown)?;
    if vectors.len() != 4 || !vectors.is_ascii() {
        return Err(unknown());
    }
    let direction = SplitVector::parse(&vectors[..2]).ok_or_else(unknown)?;
    let steplen = SplitVector::parse(&vectors[2..]).ok_or_else(unknown)?;
    match kind {
        "fixed" => Ok(ExpansionStrategy::fixed(1.0)),
        "optapprox" => Ok(ExpansionStrategy::optapprox(direction, steplen, 1.0)),
        "opt" => Ok(ExpansionStrategy::opt(direction, steplen, 1.0)),
        _ => Err(unknown()),
    }
}

impl FromStr for ExpansionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_strategy(s)
    }
}

/// The strategies compared in the benchmark tables, in table order.
pub fn table_strategies() -> Vec<ExpansionStrategy> {
    use SplitVector::{Free, Reduced};
    vec![
        ExpansionStrategy::fixed(1.0),
        ExpansionStrategy::optapprox(Reduced, Reduced, 1.0),
        ExpansionStrategy::optapprox(Free, Reduced, 1.0),
        ExpansionStrategy::opt(Reduced, Reduced, 1.0),
        ExpansionStrategy::opt(Free, Reduced, 1.0),
        ExpansionStrategy::opt(Free, Free, 1.0),
        ExpansionStrategy::projcg(),
    ]
}
