//! Tail risk of generated attack vectors.
//!
//! Scores `Υ` are per-sample deviations from the real-data centre. On top of
//! them this module computes the empirical CDF, value-at-risk `ξ_η`,
//! conditional value-at-risk `Ψ_η`, the Rockafellar–Uryasev objective
//!
//! ```text
//! Λ_η(ξ) = ξ + 1/((1 − η) n) · Σ_i max(Υ_i − ξ, 0)
//! ```
//!
//! and two Gaussian closed forms.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::fmt::g9;
use crate::message::{Dataset, NormMode, NormalizationStats};
use crate::{Error, Result};

pub const DEFAULT_ETAS: [f64; 3] = [0.90, 0.95, 0.99];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMode {
    #[default]
    Empirical,
    /// `ξ = μ + σ·Γ(η)`, `Ψ = μ + σ·Ω(Γ(η))/(1 − η)`.
    GaussianStandard,
    /// `ξ = Γ(1 − η)·(σ − μ)`, `Ψ = Ω(ξ)·(σ − μ)/(1 − η)`, taken literally.
    GaussianPaper,
}

impl RiskMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskMode::Empirical => "empirical",
            RiskMode::GaussianStandard => "gaussian_standard",
            RiskMode::GaussianPaper => "gaussian_paper",
        }
    }
}

impl fmt::Display for RiskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RiskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(RiskMode::Empirical),
            "gaussian_standard" => Ok(RiskMode::GaussianStandard),
            "gaussian_paper" => Ok(RiskMode::GaussianPaper),
            other => Err(Error::InvalidConfig(format!("unknown risk mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub etas: Vec<f64>,
    pub mode: RiskMode,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            etas: DEFAULT_ETAS.to_vec(),
            mode: RiskMode::Empirical,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.etas.is_empty() {
            return Err(Error::InvalidConfig("at least one eta is required".into()));
        }
        self.etas.iter().try_for_each(|&eta| check_eta(eta))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("eta must lie in (0, 1), got {eta}")))
    }
}

fn check_scores(scores: &[f64], eta: f64) -> Result<()> {
    check_eta(eta)?;
    if scores.is_empty() {
        return Err(Error::Empty("risk scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("risk scores must be finite".into()));
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// 1-based rank of the VaR order statistic, `ceil(η·n)`.
///
/// Products that land within rounding distance of an integer are treated as
/// that integer so that e.g. `0.95 · 100` gives rank 95.
pub fn var_rank(n: usize, eta: f64) -> usize {
    let t = eta * n as f64;
    let nearest = t.round();
    let k = if (t - nearest).abs() <= 1e-9 * t.max(1.0) {
        nearest
    } else {
        t.ceil()
    };
    (k as usize).clamp(1, n)
}

/// Mean and standard deviation of risk scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianFit {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "Gaussian fit needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    /// Sample mean and population standard deviation.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("risk scores".into()));
        }
        let n = scores.len() as f64;
        let mu = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / n;
        Self::new(mu, var.sqrt())
    }
}

/// `Υ(x)`: mean over features of `|x_f − μ_f| / σ_f` with the real-data
/// z-score statistics.
pub fn risk_scores(generated: &Dataset, real_stats: &NormalizationStats) -> Result<Vec<f64>> {
    if generated.schema() != real_stats.schema {
        return Err(Error::SchemaMismatch {
            expected: real_stats.schema.to_string(),
            found: generated.schema().to_string(),
        });
    }
    if generated.stats().is_some() {
        return Err(Error::InvalidConfig("risk scores expect raw (denormalized) data".into()));
    }
    if real_stats.mode() != NormMode::Zscore {
        return Err(Error::InvalidConfig("risk scores need z-score statistics of the real data".into()));
    }
    let (mean, sd) = real_stats.moments()?;
    let names = real_stats.schema.feature_names();
    if let Some(f) = sd.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::ConstantFeature(names[f].to_string()));
    }
    let dims = mean.len() as f64;
    Ok(generated
        .features()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(mean.iter().zip(sd))
                .map(|(x, (m, s))| (x - m).abs() / s)
                .sum::<f64>()
                / dims
        })
        .collect())
}

/// Fraction of scores `≤ xi`.
pub fn empirical_cdf(scores: &[f64], xi: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("risk scores".into()));
    }
    Ok(scores.iter().filter(|&&s| s <= xi).count() as f64 / scores.len() as f64)
}

/// Empirical `ξ_η`: the order statistic `s_(k)`, `k = ceil(η·n)`.
pub fn var(scores: &[f64], eta: f64) -> Result<f64> {
    check_scores(scores, eta)?;
    let s = sorted(scores);
    Ok(s[var_rank(s.len(), eta) - 1])
}

fn cvar_sorted(s: &[f64], eta: f64) -> f64 {
    let n = s.len();
    let k = var_rank(n, eta);
    let boundary = (k as f64 - eta * n as f64).max(0.0);
    let mass = (n - k) as f64 + boundary;
    if mass <= 0.0 {
        return s[n - 1];
    }
    let upper: f64 = s[k..].iter().sum();
    (upper + boundary * s[k - 1]) / mass
}

/// Empirical `Ψ_η`: the average of the upper `(1 − η)` probability tail.
///
/// When `(1 − η)·n` is not an integer, the VaR sample contributes the
/// fraction of its mass that lies above level `η`.
pub fn cvar(scores: &[f64], eta: f64) -> Result<f64> {
    check_scores(scores, eta)?;
    Ok(cvar_sorted(&sorted(scores), eta))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuEvaluation {
    pub lambda: f64,
    /// `Δ_i = max(Υ_i − ξ, 0)`.
    pub excess: Vec<f64>,
}

/// `Λ_η(ξ)` and the per-sample excesses.
pub fn ru_objective(scores: &[f64], eta: f64, xi: f64) -> Result<RuEvaluation> {
    check_scores(scores, eta)?;
    let excess: Vec<f64> = scores.iter().map(|s| (s - xi).max(0.0)).collect();
    let lambda = xi + excess.iter().sum::<f64>() / ((1.0 - eta) * scores.len() as f64);
    Ok(RuEvaluation { lambda, excess })
}

/// Exact minimizer of `Λ_η` over `ξ`.
///
/// `Λ_η` is convex and piecewise linear with kinks at the scores, so it is
/// evaluated at every distinct score; ties go to the smallest `ξ`.
pub fn minimize_ru(scores: &[f64], eta: f64) -> Result<(f64, f64)> {
    check_scores(scores, eta)?;
    let s = sorted(scores);
    let n = s.len();
    let scale = 1.0 / ((1.0 - eta) * n as f64);
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + s[i];
    }
    let mut best = (f64::NAN, f64::INFINITY);
    let mut i = 0;
    while i < n {
        let xi = s[i];
        let mut j = i;
        while j + 1 < n && s[j + 1] == xi {
            j += 1;
        }
        let above = n - (j + 1);
        let lambda = xi + (suffix[j + 1] - above as f64 * xi) * scale;
        if lambda < best.1 {
            best = (xi, lambda);
        }
        i = j + 1;
    }
    Ok(best)
}

/// Gaussian `(ξ_η, Ψ_η)` for the two parametric modes.
pub fn gaussian_risk(fit: GaussianFit, eta: f64, mode: RiskMode) -> Result<(f64, f64)> {
    check_eta(eta)?;
    let unit = Normal::standard();
    let GaussianFit { mu, sigma } = fit;
    match mode {
        RiskMode::GaussianStandard => {
            let z = unit.inverse_cdf(eta);
            Ok((mu + sigma * z, mu + sigma * unit.pdf(z) / (1.0 - eta)))
        }
        RiskMode::GaussianPaper => {
            let xi = unit.inverse_cdf(1.0 - eta) * (sigma - mu);
            Ok((xi, unit.pdf(xi) * (sigma - mu) / (1.0 - eta)))
        }
        RiskMode::Empirical => Err(Error::InvalidConfig(
            "gaussian_risk needs a Gaussian mode".into(),
        )),
    }
}

/// Risk quantities at one `η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub eta: f64,
    pub mode: RiskMode,
    pub var: f64,
    pub cvar: f64,
    pub lambda: f64,
    pub n: usize,
    /// `100 · Ψ_η` relative to the largest real-baseline score, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_pct: Option<f64>,
    #[serde(skip)]
    pub excess: Vec<f64>,
}

impl RiskReport {
    pub const CSV_HEADER: &'static str = "eta,mode,var,cvar,lambda,n,risk_pct";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            g9(self.eta),
            self.mode,
            g9(self.var),
            g9(self.cvar),
            g9(self.lambda),
            self.n,
            self.risk_pct.map(g9).unwrap_or_default()
        )
    }

    pub fn with_baseline(mut self, baseline_max: f64) -> Result<Self> {
        self.risk_pct = Some(risk_percent(self.cvar, baseline_max)?);
        Ok(self)
    }
}

pub fn write_reports_csv<W: Write>(reports: &[RiskReport], mut out: W) -> Result<()> {
    writeln!(out, "{}", RiskReport::CSV_HEADER)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Full report at one `η`. `Λ` and the excesses are always the empirical
/// objective evaluated at the reported `ξ`.
pub fn assess(scores: &[f64], eta: f64, mode: RiskMode) -> Result<RiskReport> {
    check_scores(scores, eta)?;
    let (xi, psi) = match mode {
        RiskMode::Empirical => {
            let s = sorted(scores);
            (s[var_rank(s.len(), eta) - 1], cvar_sorted(&s, eta))
        }
        _ => gaussian_risk(GaussianFit::from_scores(scores)?, eta, mode)?,
    };
    let ru = ru_objective(scores, eta, xi)?;
    Ok(RiskReport {
        eta,
        mode,
        var: xi,
        cvar: psi,
        lambda: ru.lambda,
        n: scores.len(),
        risk_pct: None,
        excess: ru.excess,
    })
}

/// Reports for every `η` in the configuration.
pub fn assess_all(scores: &[f64], cfg: &RiskConfig) -> Result<Vec<RiskReport>> {
    cfg.validate()?;
    cfg.etas.iter().map(|&eta| assess(scores, eta, cfg.mode)).collect()
}

/// `100 · Ψ / baseline_max`.
pub fn risk_percent(cvar: f64, baseline_max: f64) -> Result<f64> {
    if !(baseline_max > 0.0 && baseline_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "risk baseline must be positive, got {baseline_max}"
        )));
    }
    Ok(100.0 * cvar / baseline_max)
}
