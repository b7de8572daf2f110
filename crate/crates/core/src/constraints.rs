//! Feasibility checks of a finished pipeline run against the risk-realization
//! problem's side constraints.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::detector::{Classifier, LinearModel};
use crate::gan::OptimumReport;
use crate::grid::is_stable;
use crate::risk::{empirical_cdf, RiskReport};
use crate::{Error, Result};

/// Largest mean deviation of the discriminator from `P_X/(P_X + P_G)` accepted by the optimum check.
pub const OPTIMUM_TOLERANCE: f64 = 0.15;

/// Everything the checks look at. Each field is one pipeline stage.
#[derive(Default)]
pub struct ConstraintInputs<'a> {
    pub scores: Option<&'a [f64]>,
    pub risk: Option<&'a [RiskReport]>,
    pub optimum: Option<&'a OptimumReport>,
    /// Stability indices with the flag each record carries (`true` = stable).
    pub stability: Option<(&'a [f64], &'a [bool])>,
    pub linear_models: Option<(&'a [&'a LinearModel], ArrayView2<'a, f64>)>,
    pub labels: Option<&'a [u8]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Excesses dominate `Υ − ξ` and are nonnegative.
    pub excess: bool,
    /// Discriminator within tolerance of its optimum.
    pub discriminator_optimum: bool,
    /// `h(ξ_η) ≥ η` for every reported `η`.
    pub quantile_coverage: bool,
    /// Records flagged stable have `s ≤ 0`.
    pub stability: bool,
    /// Linear detectors decide by the sign of `ω_0 + ω·x` with finite weights.
    pub linear_margin: bool,
    /// Labels are binary.
    pub binary_labels: bool,
    pub all: bool,
    pub optimum_deviation: f64,
}

fn stage<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::MissingStage(name.to_string()))
}

fn check_excess(scores: &[f64], reports: &[RiskReport]) -> bool {
    reports.iter().all(|r| {
        r.excess.len() == scores.len()
            && r.excess
                .iter()
                .zip(scores)
                .all(|(&d, &s)| d >= 0.0 && d >= s - r.var)
    })
}

fn check_coverage(scores: &[f64], reports: &[RiskReport]) -> Result<bool> {
    for r in reports {
        if empirical_cdf(scores, r.var)? < r.eta {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_linear(models: &[&LinearModel], x: ArrayView2<f64>) -> Result<bool> {
    for m in models {
        if m.weights.len() != x.ncols() + 1 || m.weights.iter().any(|w| !w.is_finite()) {
            return Ok(false);
        }
        let predicted = m.predict(x)?;
        let by_margin = x.rows().into_iter().map(|row| {
            let margin = m.weights[0] + row.iter().zip(&m.weights[1..]).map(|(v, w)| v * w).sum::<f64>();
            (margin >= 0.0) as u8
        });
        if !predicted.into_iter().eq(by_margin) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs every check. Each missing stage is an error naming it.
pub fn constraint_check(inputs: &ConstraintInputs<'_>) -> Result<ConstraintReport> {
    let scores = stage(inputs.scores, "risk scores")?;
    let reports = stage(inputs.risk, "risk reports")?;
    let optimum = stage(inputs.optimum, "discriminator optimum check")?;
    let (stab, flags) = stage(inputs.stability, "stability indices")?;
    let (models, x) = stage(inputs.linear_models, "linear detectors")?;
    let labels = stage(inputs.labels, "detector labels")?;
    if stab.len() != flags.len() {
        return Err(Error::ShapeMismatch("stability indices and flags differ in length".into()));
    }

    let excess = check_excess(scores, reports);
    let discriminator_optimum = optimum.mean_deviation <= OPTIMUM_TOLERANCE;
    let quantile_coverage = check_coverage(scores, reports)?;
    let stability = stab.iter().zip(flags).all(|(&s, &stable)| !stable || is_stable(s));
    let linear_margin = check_linear(models, x)?;
    let binary_labels = labels.iter().all(|&y| y <= 1);
    Ok(ConstraintReport {
        excess,
        discriminator_optimum,
        quantile_coverage,
        stability,
        linear_margin,
        binary_labels,
        all: excess && discriminator_optimum && quantile_coverage && stability && linear_margin && binary_labels,
        optimum_deviation: optimum.mean_deviation,
    })
}
