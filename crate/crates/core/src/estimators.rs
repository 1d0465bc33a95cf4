//! Sensitivity estimators over replica ensembles.
//!
//! | id    | estimate                                  |
//! |-------|-------------------------------------------|
//! | `i1`  | `(⟨f(X_T)⟩₊ − ⟨f(X_T)⟩₋) / 2ε`, coupled  |
//! | `i2`  | `⟨f(X_T) W⟩`                              |
//! | `i3`  | `⟨f̄ W⟩`                                   |
//! | `i4`  | `⟨f(X_T) W(X_{T−T_d:T})⟩`                 |
//! | `i5`  | `(⟨f̄⟩₊ − ⟨f̄⟩₋) / 2ε`, coupled            |
//! | `cov` | `T · Cov(f̄, W/T)` with the Fisher block   |
//!
//! The `c` suffixed ids subtract the sample mean of the observable first.
//! Standard errors treat the per-replica summands as i.i.d.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, PairEnsemble, Perturbation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    I1,
    I2,
    I2c,
    I3,
    I3c,
    I4,
    I4c,
    I5,
    Cov,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        Self::I1,
        Self::I2,
        Self::I2c,
        Self::I3,
        Self::I3c,
        Self::I4,
        Self::I4c,
        Self::I5,
        Self::Cov,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::I1 => "i1",
            Self::I2 => "i2",
            Self::I2c => "i2c",
            Self::I3 => "i3",
            Self::I3c => "i3c",
            Self::I4 => "i4",
            Self::I4c => "i4c",
            Self::I5 => "i5",
            Self::Cov => "cov",
        }
    }

    /// Finite-difference estimators need perturbed ensembles.
    pub fn is_finite_difference(self) -> bool {
        matches!(self, Self::I1 | Self::I5)
    }

    pub fn needs_window(self) -> bool {
        matches!(self, Self::I4 | Self::I4c)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::Argument(format!("unknown estimator '{s}'")))
    }
}

/// Constant subtracted from the observable before weighting by the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Centering {
    None,
    /// Same-sample mean.
    #[default]
    Plugin,
    /// Mean of the other `M − 1` replicas.
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Screening<S> {
    /// `√(Var(f̄_i) · tr I)` per observable.
    pub trace_bound: Vec<S>,
    /// `√(Var(f̄_i) · I_pp)`, observables × parameters.
    pub per_parameter: Matrix<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport<S> {
    pub estimator: String,
    pub time: S,
    pub replicas: usize,
    pub observables: Vec<String>,
    pub parameters: Vec<String>,
    /// Observables × parameters.
    pub estimate: Matrix<S>,
    pub std_error: Matrix<S>,
    /// `M · Var(estimate)`.
    pub normalized_variance: Matrix<S>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<S>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<S>,
    /// Path-space Fisher information estimate, parameters × parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fim: Option<Matrix<S>>,
    /// `Cov(f̄)`, observables × observables.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable_variance: Option<Matrix<S>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screening: Option<Screening<S>>,
    pub log_scaled: bool,
}

/// Estimate, SE and `M·Var` of the mean of each summand column.
struct Summary<S> {
    estimate: Matrix<S>,
    std_error: Matrix<S>,
    normalized_variance: Matrix<S>,
}

/// Reduces per-replica summands `z[i](obs, par)` in replica order.
fn summarize<S: Real>(m: usize, p: usize, replicas: usize, z: impl Fn(usize, usize, usize) -> S) -> Result<Summary<S>> {
    let mut out = Summary {
        estimate: Matrix::zeros(m, p),
        std_error: Matrix::zeros(m, p),
        normalized_variance: Matrix::zeros(m, p),
    };
    let mut column = vec![S::zero(); replicas];
    for i in 0..m {
        for k in 0..p {
            for (r, c) in column.iter_mut().enumerate() {
                *c = z(r, i, k);
            }
            out.estimate[(i, k)] = stats::mean(&column);
            out.std_error[(i, k)] = stats::standard_error(&column)?;
            out.normalized_variance[(i, k)] = stats::normalized_variance(&column)?;
        }
    }
    Ok(out)
}

fn centers<S: Real>(values: &Matrix<S>, centering: Centering) -> Matrix<S> {
    let (rows, m) = (values.rows(), values.cols());
    let mut c = Matrix::zeros(rows, m);
    if centering == Centering::None {
        return c;
    }
    for i in 0..m {
        let col = values.column(i);
        // sum/M of equal values can be off by an ulp; a constant must center to 0
        if col.iter().all(|&v| v == col[0]) {
            (0..rows).for_each(|r| c[(r, i)] = col[0]);
            continue;
        }
        let total: S = col.iter().copied().sum();
        let mean = total / S::from_len(rows);
        for (r, &v) in col.iter().enumerate() {
            c[(r, i)] = match centering {
                Centering::LeaveOneOut => (total - v) / S::from_len(rows - 1),
                _ => mean,
            };
        }
    }
    c
}

fn weighted<S: Real>(
    ens: &Ensemble<S>,
    values: &Matrix<S>,
    score: &Matrix<S>,
    centering: Centering,
    estimator: String,
) -> Result<SensitivityReport<S>> {
    let rows = ens.replicas();
    if rows < 2 {
        return Err(Error::Argument("an ensemble needs at least 2 replicas".into()));
    }
    if values.rows() != rows || score.rows() != rows || values.cols() != ens.observables.len() {
        return Err(Error::Argument("ensemble blocks have inconsistent shapes".into()));
    }
    let c = centers(values, centering);
    let s = summarize(values.cols(), score.cols(), rows, |r, i, k| {
        (values[(r, i)] - c[(r, i)]) * score[(r, k)]
    })?;
    Ok(SensitivityReport {
        estimator,
        time: ens.time,
        replicas: rows,
        observables: ens.observables.clone(),
        parameters: ens.parameters.clone(),
        estimate: s.estimate,
        std_error: s.std_error,
        normalized_variance: s.normalized_variance,
        window: None,
        epsilon: None,
        fim: None,
        observable_variance: None,
        screening: None,
        log_scaled: false,
    })
}

fn lr_id(base: &str, centering: Centering) -> String {
    match centering {
        Centering::None => base.to_string(),
        Centering::Plugin => format!("{base}c"),
        Centering::LeaveOneOut => format!("{base}c-loo"),
    }
}

/// `⟨(f(X_T) − c) W⟩`.
pub fn lr_single<S: Real>(ens: &Ensemble<S>, centering: Centering) -> Result<SensitivityReport<S>> {
    weighted(ens, &ens.terminal, &ens.score, centering, lr_id("i2", centering))
}

/// `⟨(f̄ − c) W⟩`.
pub fn lr_ergodic<S: Real>(ens: &Ensemble<S>, centering: Centering) -> Result<SensitivityReport<S>> {
    weighted(ens, &ens.ergodic, &ens.score, centering, lr_id("i3", centering))
}

/// `⟨(f(X_T) − c) W(X_{T−T_d:T})⟩`.
pub fn lr_truncated<S: Real>(ens: &Ensemble<S>, window: S, centering: Centering) -> Result<SensitivityReport<S>> {
    if !(window > S::zero()) || window > ens.time {
        return Err(Error::Argument(format!(
            "window {window} must lie in (0, {}]",
            ens.time
        )));
    }
    let w = ens
        .window(window)
        .ok_or_else(|| Error::Capability(format!("no windowed scores recorded for T_d = {window}")))?;
    let mut report = weighted(ens, &ens.terminal, &w.score, centering, lr_id("i4", centering))?;
    report.window = Some(window);
    Ok(report)
}

fn finite_difference<S: Real>(
    pair: &PairEnsemble<S>,
    plus: &Matrix<S>,
    minus: &Matrix<S>,
    estimator: &str,
) -> Result<SensitivityReport<S>> {
    if plus.rows() != minus.rows() || plus.cols() != minus.cols() {
        return Err(Error::Argument(format!(
            "pair counts differ: {} plus, {} minus",
            plus.rows(),
            minus.rows()
        )));
    }
    if plus.rows() < 2 {
        return Err(Error::Argument("finite differences need at least 2 pairs".into()));
    }
    if !(pair.epsilon > S::zero()) {
        return Err(Error::Argument(format!(
            "epsilon must be positive, got {}",
            pair.epsilon
        )));
    }
    let two_eps = S::lit(2.0) * pair.epsilon;
    let s = summarize(plus.cols(), 1, plus.rows(), |r, i, _| {
        (plus[(r, i)] - minus[(r, i)]) / two_eps
    })?;
    Ok(SensitivityReport {
        estimator: estimator.to_string(),
        time: pair.time,
        replicas: plus.rows(),
        observables: pair.observables.clone(),
        parameters: vec![pair.parameter.clone()],
        estimate: s.estimate,
        std_error: s.std_error,
        normalized_variance: s.normalized_variance,
        window: None,
        epsilon: Some(pair.epsilon),
        fim: None,
        observable_variance: None,
        screening: None,
        log_scaled: pair.perturbation == Perturbation::Logarithmic,
    })
}

/// Central difference of `f(X_T)` over coupled pairs.
pub fn cfd_single<S: Real>(pair: &PairEnsemble<S>) -> Result<SensitivityReport<S>> {
    finite_difference(pair, &pair.plus_terminal, &pair.minus_terminal, "i1")
}

/// Central difference of `f̄` over coupled pairs.
pub fn cfd_ergodic<S: Real>(pair: &PairEnsemble<S>) -> Result<SensitivityReport<S>> {
    finite_difference(pair, &pair.plus_ergodic, &pair.minus_ergodic, "i5")
}

/// Joins single-parameter reports column-wise.
pub fn hstack<S: Real>(reports: &[SensitivityReport<S>]) -> Result<SensitivityReport<S>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Argument("nothing to join".into()))?;
    for r in reports {
        if r.estimator != first.estimator
            || r.observables != first.observables
            || r.time != first.time
            || r.log_scaled != first.log_scaled
        {
            return Err(Error::Argument("reports are not compatible".into()));
        }
    }
    let join =
        |get: fn(&SensitivityReport<S>) -> &Matrix<S>| Matrix::hstack(&reports.iter().map(get).collect::<Vec<_>>());
    Ok(SensitivityReport {
        estimator: first.estimator.clone(),
        time: first.time,
        replicas: reports.iter().map(|r| r.replicas).min().unwrap_or(0),
        observables: first.observables.clone(),
        parameters: reports.iter().flat_map(|r| r.parameters.clone()).collect(),
        estimate: join(|r| &r.estimate),
        std_error: join(|r| &r.std_error),
        normalized_variance: join(|r| &r.normalized_variance),
        window: first.window,
        epsilon: first.epsilon,
        fim: None,
        observable_variance: None,
        screening: None,
        log_scaled: first.log_scaled,
    })
}

/// Result of the covariance estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceLr<S> {
    /// Sensitivities (identical to centered ergodic LR) with the Fisher
    /// information and observable covariance attached.
    pub report: SensitivityReport<S>,
    /// `T · Cov(f̄, W/T)`, `(m + P) × (m + P)`.
    pub matrix: Matrix<S>,
}

/// Plug-in covariance with `1/M` normalization.
fn covariance<S: Real>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    let rows = a.rows();
    let n = S::from_len(rows);
    let ma: Vec<S> = (0..a.cols()).map(|i| stats::mean(&a.column(i))).collect();
    let mb: Vec<S> = (0..b.cols()).map(|j| stats::mean(&b.column(j))).collect();
    let mut out = Matrix::zeros(a.cols(), b.cols());
    for i in 0..a.cols() {
        for j in 0..b.cols() {
            let mut s = S::zero();
            for r in 0..rows {
                s += (a[(r, i)] - ma[i]) * (b[(r, j)] - mb[j]);
            }
            out[(i, j)] = s / n;
        }
    }
    out
}

/// Covariance LR: sensitivities, Fisher information and observable
/// variance from one ensemble.
pub fn covariance_lr<S: Real>(ens: &Ensemble<S>) -> Result<CovarianceLr<S>> {
    let (m, p) = (ens.ergodic.cols(), ens.score.cols());
    if m == 0 || p == 0 {
        return Err(Error::Argument(format!(
            "covariance estimator needs observables and parameters (got {m} and {p})"
        )));
    }
    let mut report = lr_ergodic(ens, Centering::Plugin)?;
    report.estimator = "cov".into();
    let fim = covariance(&ens.score, &ens.score);
    let var_f = covariance(&ens.ergodic, &ens.ergodic);
    let t = ens.time;
    let mut matrix = Matrix::zeros(m + p, m + p);
    for i in 0..m {
        for j in 0..m {
            matrix[(i, j)] = t * var_f[(i, j)];
        }
        for k in 0..p {
            matrix[(i, m + k)] = report.estimate[(i, k)];
            matrix[(m + k, i)] = report.estimate[(i, k)];
        }
    }
    for k in 0..p {
        for l in 0..p {
            matrix[(m + k, m + l)] = fim[(k, l)] / t;
        }
    }
    report.fim = Some(fim);
    report.observable_variance = Some(var_f);
    report.screening = Some(screening_bound(&report)?);
    Ok(CovarianceLr { report, matrix })
}

fn clamp_variance<S: Real>(v: S, what: &str) -> S {
    if v < S::zero() {
        log::warn!("negative {what} estimate {v} clamped to 0");
        S::zero()
    } else {
        v
    }
}

/// `√(Var(f̄)·tr I)` per observable and `√(Var(f̄)·I_pp)` per pair.
pub fn screening_bound<S: Real>(report: &SensitivityReport<S>) -> Result<Screening<S>> {
    let (Some(fim), Some(var_f)) = (&report.fim, &report.observable_variance) else {
        return Err(Error::Capability(
            "screening needs the Fisher information and observable variance".into(),
        ));
    };
    let (m, p) = (var_f.rows(), fim.rows());
    let trace = clamp_variance(fim.trace(), "Fisher information trace");
    let mut per_parameter = Matrix::zeros(m, p);
    let mut trace_bound = Vec::with_capacity(m);
    for i in 0..m {
        let v = clamp_variance(var_f[(i, i)], "observable variance");
        trace_bound.push((v * trace).sqrt());
        for k in 0..p {
            per_parameter[(i, k)] = (v * clamp_variance(fim[(k, k)], "Fisher information")).sqrt();
        }
    }
    Ok(Screening {
        trace_bound,
        per_parameter,
    })
}

/// Converts `∂/∂θ_p` into `∂/∂log θ_p` by scaling column `p` with `θ_p`.
pub fn log_rescale<S: Real>(report: &SensitivityReport<S>, theta: &[S]) -> Result<SensitivityReport<S>> {
    if report.log_scaled {
        return Err(Error::Argument("report is already log-scaled".into()));
    }
    if theta.len() != report.parameters.len() {
        return Err(Error::Argument(format!(
            "{} parameter values for {} report columns",
            theta.len(),
            report.parameters.len()
        )));
    }
    if let Some((k, &v)) = theta.iter().enumerate().find(|(_, &v)| !(v > S::zero())) {
        return Err(Error::Parameter {
            name: report.parameters[k].clone(),
            value: v.as_f64(),
            reason: "log-scaling needs a positive value",
        });
    }
    let scale_cols = |a: &Matrix<S>, power: i32| {
        let mut out = a.clone();
        for r in 0..a.rows() {
            for (k, &t) in theta.iter().enumerate() {
                out[(r, k)] *= t.powi(power);
            }
        }
        out
    };
    let mut out = report.clone();
    out.estimate = scale_cols(&report.estimate, 1);
    out.std_error = scale_cols(&report.std_error, 1);
    out.normalized_variance = scale_cols(&report.normalized_variance, 2);
    if let Some(fim) = &report.fim {
        let mut scaled = fim.clone();
        for k in 0..theta.len() {
            for l in 0..theta.len() {
                scaled[(k, l)] *= theta[k] * theta[l];
            }
        }
        out.fim = Some(scaled);
    }
    if out.screening.is_some() {
        out.screening = Some(screening_bound(&out)?);
    }
    out.log_scaled = true;
    Ok(out)
}
