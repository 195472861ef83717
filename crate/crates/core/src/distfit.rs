//! Interval distribution fitting.
//!
//! Two models are supported: a plain exponential (rate = 1 / mean) and a
//! two-component mixture `p * Exp(lambda) + (1 - p) * Normal(mu, sigma)`
//! estimated by the method of moments. The mixture fit equates the first
//! four raw moments and solves the resulting 4x4 nonlinear system as a
//! least-squares problem with a multi-start Nelder-Mead search over an
//! unconstrained reparameterization (logistic `p`, log `lambda`, log
//! `sigma`). Goodness of fit is a chi-square test over equal-probability
//! bins of the fitted model.
//!
//! The normal component is not truncated at zero; for `mu >= 5 sigma` the
//! negative mass is negligible.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::intervals::IntervalSample;
use crate::simplex::{minimize, NelderMeadOptions};
use crate::special::{chi_square_sf, normal_cdf};
use crate::streamgen::stream_rng;

pub const MIN_EXPONENTIAL_SAMPLE: usize = 2;
pub const MIN_GOF_SAMPLE: usize = 30;
pub const DEFAULT_MIN_MIXTURE_SAMPLE: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("sample is empty")]
    EmptySample,
    #[error("moment order must be 1..=4, got {0}")]
    InvalidOrder(u32),
    #[error("need at least {required} positive intervals, got {got}")]
    InsufficientData { required: usize, got: usize },
    #[error("sample contains non-positive or non-finite values")]
    NonPositiveSample,
    #[error("invalid mixture parameters: {0}")]
    InvalidParams(String),
    #[error("sample too small for GOF: {bins} bins left after merging, {dof} degrees of freedom")]
    GofTooFewBins { bins: usize, dof: i64 },
    #[error("GOF resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("no start produced a finite moment residual ({starts} starts, moments {moments:?})")]
    SolverFailed { starts: usize, moments: [f64; 4] },
}

/// `(1/n) * sum(x^order)`.
pub fn empirical_raw_moment(sample: &[f64], order: u32) -> Result<f64, FitError> {
    if sample.is_empty() {
        return Err(FitError::EmptySample);
    }
    if !(1..=4).contains(&order) {
        return Err(FitError::InvalidOrder(order));
    }
    let order = order as i32;
    Ok(sample.iter().map(|x| x.powi(order)).sum::<f64>() / sample.len() as f64)
}

/// First four raw moments in one pass.
pub fn empirical_raw_moments(sample: &[f64]) -> Result<[f64; 4], FitError> {
    if sample.is_empty() {
        return Err(FitError::EmptySample);
    }
    let mut acc = [0.0_f64; 4];
    for &x in sample {
        let x2 = x * x;
        acc[0] += x;
        acc[1] += x2;
        acc[2] += x2 * x;
        acc[3] += x2 * x2;
    }
    let n = sample.len() as f64;
    Ok(acc.map(|s| s / n))
}

/// Parameters of `p * Exp(lambda) + (1 - p) * Normal(mu, sigma)`; time
/// quantities in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Weight of the exponential component.
    pub p: f64,
    /// Exponential rate, per minute.
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl MixtureParams {
    /// Validates `0 <= p <= 1`, `lambda > 0`, `sigma > 0`, finite `mu`.
    /// Fitted parameters always have `p` strictly inside `(0, 1)`; the
    /// closed range is allowed so pure components can be evaluated and
    /// simulated.
    pub fn new(p: f64, lambda: f64, mu: f64, sigma: f64) -> Result<Self, FitError> {
        let params = Self { p, lambda, mu, sigma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |what: &str| Err(FitError::InvalidParams(what.to_string()));
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p must lie in [0, 1]");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive and finite");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive and finite");
        }
        if !self.mu.is_finite() {
            return bad("mu must be finite");
        }
        Ok(())
    }
}

pub fn mixture_density(x: f64, params: &MixtureParams) -> f64 {
    let MixtureParams { p, lambda, mu, sigma } = *params;
    let exponential = if x >= 0.0 { lambda * (-lambda * x).exp() } else { 0.0 };
    let z = (x - mu) / sigma;
    let normal = (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma);
    p * exponential + (1.0 - p) * normal
}

pub fn mixture_cdf(x: f64, params: &MixtureParams) -> f64 {
    let MixtureParams { p, lambda, mu, sigma } = *params;
    let exponential = if x > 0.0 { -(-lambda * x).exp_m1() } else { 0.0 };
    p * exponential + (1.0 - p) * normal_cdf((x - mu) / sigma)
}

/// Raw moments 1..=4 of the mixture.
pub fn mixture_theoretical_moments(params: &MixtureParams) -> [f64; 4] {
    let MixtureParams { p, lambda, mu, sigma } = *params;
    let q = 1.0 - p;
    let (s2, m2) = (sigma * sigma, mu * mu);
    [
        p / lambda + q * mu,
        p * 2.0 / lambda.powi(2) + q * (s2 + m2),
        p * 6.0 / lambda.powi(3) + q * (3.0 * mu * s2 + m2 * mu),
        p * 24.0 / lambda.powi(4) + q * (3.0 * s2 * s2 + 6.0 * m2 * s2 + m2 * m2),
    ]
}

/// Sum of squared relative moment residuals.
pub fn moment_residual(params: &MixtureParams, empirical: &[f64; 4]) -> f64 {
    mixture_theoretical_moments(params)
        .iter()
        .zip(empirical)
        .map(|(t, m)| ((t - m) / m).powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Rate per minute.
    pub lambda: f64,
    pub n: usize,
    pub mean: f64,
}

pub fn fit_exponential(sample: &IntervalSample) -> Result<ExponentialFit, FitError> {
    fit_exponential_values(&sample.intervals)
}

/// Rate = 1 / sample mean.
pub fn fit_exponential_values(values: &[f64]) -> Result<ExponentialFit, FitError> {
    if values.len() < MIN_EXPONENTIAL_SAMPLE {
        return Err(FitError::InsufficientData { required: MIN_EXPONENTIAL_SAMPLE, got: values.len() });
    }
    check_positive(values)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(ExponentialFit { lambda: 1.0 / mean, n: values.len(), mean })
}

fn check_positive(values: &[f64]) -> Result<(), FitError> {
    if values.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(FitError::NonPositiveSample)
    }
}

/// A fitted model to test against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum GofModel {
    Exponential { lambda: f64 },
    Mixture(MixtureParams),
}

impl GofModel {
    /// Number of parameters estimated from the data.
    pub fn fitted_params(&self) -> usize {
        match self {
            GofModel::Exponential { .. } => 1,
            GofModel::Mixture(_) => 4,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            GofModel::Exponential { lambda } => {
                if x > 0.0 {
                    -(-lambda * x).exp_m1()
                } else {
                    0.0
                }
            }
            GofModel::Mixture(params) => mixture_cdf(x, params),
        }
    }

    fn support_min(&self) -> f64 {
        match self {
            GofModel::Exponential { .. } => 0.0,
            GofModel::Mixture(params) if params.p >= 1.0 => 0.0,
            GofModel::Mixture(_) => f64::NEG_INFINITY,
        }
    }

    /// Inverse distribution function for `0 < prob < 1`.
    pub fn quantile(&self, prob: f64) -> f64 {
        match self {
            GofModel::Exponential { lambda } => -(-prob).ln_1p() / lambda,
            GofModel::Mixture(params) => {
                let mut lo = (params.mu - 40.0 * params.sigma).min(0.0);
                let mut hi = (params.mu + 40.0 * params.sigma).max(80.0 / params.lambda);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < prob {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-13 * hi.abs().max(1.0) {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GofBinning {
    /// Equal-probability bins before merging.
    pub bins: usize,
    pub min_expected: f64,
    /// Grid spacing of the data, if it is discretized (1.0 for whole
    /// minutes). Observations are then taken as positive multiples of it:
    /// bin edges snap to half-grid points and the model is conditioned on
    /// exceeding half a step, since zero gaps are dropped upstream.
    pub resolution: Option<f64>,
}

impl Default for GofBinning {
    fn default() -> Self {
        Self { bins: 10, min_expected: 5.0, resolution: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofBin {
    pub lower: f64,
    pub upper: f64,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: Vec<GofBin>,
}

impl GofResult {
    /// Histogram plot data: `lower,upper,observed,expected`.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "lower,upper,observed,expected")?;
        for b in &self.bins {
            writeln!(sink, "{},{},{},{}", b.lower, b.upper, b.observed, b.expected)?;
        }
        Ok(())
    }
}

/// Chi-square goodness of fit over equal-probability bins of `model`.
/// Adjacent bins are merged until every expected count reaches
/// `binning.min_expected`. With `binning.resolution` set the bins are
/// aligned to the data grid instead (see [`GofBinning`]).
pub fn chi_square_gof(sample: &[f64], model: &GofModel, binning: &GofBinning) -> Result<GofResult, FitError> {
    if sample.len() < MIN_GOF_SAMPLE {
        return Err(FitError::InsufficientData { required: MIN_GOF_SAMPLE, got: sample.len() });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(FitError::NonPositiveSample);
    }
    let k = binning.bins.max(1);
    let raw = match binning.resolution {
        None => equal_probability_bins(sample, model, k),
        Some(h) => grid_aligned_bins(sample, model, k, h)?,
    };
    let bins = merge_gof_bins(raw, binning.min_expected);
    chi_square_from_bins(bins, model.fitted_params())
}

fn count_into(sample: &[f64], edges: &[f64]) -> Vec<u64> {
    let k = edges.len() - 1;
    let mut observed = vec![0_u64; k];
    for &x in sample {
        // bins are [lower, upper)
        let idx = edges[1..k].partition_point(|&e| e <= x);
        observed[idx] += 1;
    }
    observed
}

fn equal_probability_bins(sample: &[f64], model: &GofModel, k: usize) -> Vec<GofBin> {
    let mut edges = Vec::with_capacity(k + 1);
    edges.push(model.support_min());
    edges.extend((1..k).map(|i| model.quantile(i as f64 / k as f64)));
    edges.push(f64::INFINITY);
    let observed = count_into(sample, &edges);
    // every bin expects n / k
    let expected = sample.len() as f64 / k as f64;
    (0..k)
        .map(|i| GofBin {
            lower: edges[i],
            upper: edges[i + 1],
            observed: observed[i],
            expected,
        })
        .collect()
}

/// A value `j * h` on the grid stands for the continuous range
/// `[(j - 1/2) h, (j + 1/2) h)`, so the equal-probability edges of the
/// model truncated at `h / 2` are moved to the nearest half-grid point and
/// expected counts come from the truncated CDF.
fn grid_aligned_bins(sample: &[f64], model: &GofModel, k: usize, h: f64) -> Result<Vec<GofBin>, FitError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(FitError::InvalidResolution(h));
    }
    let floor = 0.5 * h;
    let f0 = model.cdf(floor);
    let mass = 1.0 - f0;
    if !(mass > 0.0) {
        return Err(FitError::GofTooFewBins { bins: 0, dof: -1 });
    }
    let mut edges = vec![floor];
    for i in 1..k {
        let q = model.quantile(f0 + mass * i as f64 / k as f64);
        let snapped = (((q / h) - 0.5).round() + 0.5) * h;
        if snapped > *edges.last().expect("non-empty") {
            edges.push(snapped);
        }
    }
    edges.push(f64::INFINITY);
    let observed = count_into(sample, &edges);
    let n = sample.len() as f64;
    Ok(edges
        .windows(2)
        .zip(observed)
        .map(|(w, o)| GofBin {
            lower: w[0],
            upper: w[1],
            observed: o,
            expected: n * (model.cdf(w[1]) - model.cdf(w[0])) / mass,
        })
        .collect())
}

fn merge_gof_bins(raw: Vec<GofBin>, min_expected: f64) -> Vec<GofBin> {
    let mut merged: Vec<GofBin> = Vec::new();
    let mut acc: Option<GofBin> = None;
    for b in raw {
        let cur = match acc.take() {
            Some(a) => GofBin {
                lower: a.lower,
                upper: b.upper,
                observed: a.observed + b.observed,
                expected: a.expected + b.expected,
            },
            None => b,
        };
        if cur.expected >= min_expected {
            merged.push(cur);
        } else {
            acc = Some(cur);
        }
    }
    if let Some(rest) = acc {
        match merged.last_mut() {
            Some(last) => {
                last.upper = rest.upper;
                last.observed += rest.observed;
                last.expected += rest.expected;
            }
            None => merged.push(rest),
        }
    }
    merged
}

/// Statistic, dof and tail probability for pre-binned counts.
pub fn chi_square_from_bins(bins: Vec<GofBin>, fitted_params: usize) -> Result<GofResult, FitError> {
    let dof = bins.len() as i64 - 1 - fitted_params as i64;
    if bins.len() < 3 || dof < 1 {
        return Err(FitError::GofTooFewBins { bins: bins.len(), dof });
    }
    let statistic: f64 = bins
        .iter()
        .map(|b| {
            let d = b.observed as f64 - b.expected;
            d * d / b.expected
        })
        .sum();
    let dof = dof as usize;
    Ok(GofResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof as f64),
        bins,
    })
}

/// Settings for the method-of-moments mixture solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Convergence threshold on the summed squared relative residual.
    pub tolerance: f64,
    /// Nelder-Mead iteration budget per start (restarts included).
    pub max_iterations: usize,
    pub min_sample: usize,
    /// Seeded random starts added to the fixed 12-point grid.
    pub random_starts: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 2000,
            min_sample: DEFAULT_MIN_MIXTURE_SAMPLE,
            random_starts: 4,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub params: MixtureParams,
    /// Summed squared relative moment residual at `params`.
    pub residual_norm: f64,
    pub empirical_moments: [f64; 4],
    pub converged: bool,
    pub starts_tried: usize,
    /// The exponential weight ran to a boundary: one component suffices.
    pub degenerate: bool,
    pub notes: Vec<String>,
}

// minority component weight below which one component is judged enough
const DEGENERATE_WEIGHT: f64 = 0.05;
// seed stream reserved for random solver starts
const START_STREAM: u64 = 0x5eed_0001;

/// Solver coordinates: `(logit p, ln(lambda * m1), mu / m1, ln(sigma / m1))`.
/// Scaling by the sample mean makes the search unit-free.
fn to_coords(params: &MixtureParams, m1: f64) -> [f64; 4] {
    [
        (params.p / (1.0 - params.p)).ln(),
        (params.lambda * m1).ln(),
        params.mu / m1,
        (params.sigma / m1).ln(),
    ]
}

fn from_coords(c: &[f64], m1: f64) -> MixtureParams {
    MixtureParams {
        p: 1.0 / (1.0 + (-c[0]).exp()),
        lambda: c[1].exp() / m1,
        mu: c[2] * m1,
        sigma: c[3].exp() * m1,
    }
}

/// Deterministic start points: the grid `p x lambda x mu` with alternating
/// sigma fractions, then `random_starts` seeded draws.
pub fn start_points(moments: &[f64; 4], config: &SolverConfig) -> Vec<MixtureParams> {
    let m1 = moments[0];
    let sd = (moments[1] - m1 * m1).max(1e-12 * m1 * m1).sqrt();
    let mut starts = Vec::new();
    for &p in &[0.2, 0.5, 0.8] {
        for &lambda_scale in &[1.0, 4.0] {
            for &mu_scale in &[1.0, 2.0] {
                let sigma_frac = if starts.len() % 2 == 0 { 0.25 } else { 0.5 };
                starts.push(MixtureParams {
                    p,
                    lambda: lambda_scale / m1,
                    mu: mu_scale * m1,
                    sigma: sigma_frac * sd,
                });
            }
        }
    }
    let mut rng = stream_rng(config.seed, START_STREAM);
    for _ in 0..config.random_starts {
        starts.push(MixtureParams {
            p: rng.random_range(0.1..0.9),
            lambda: rng.random_range(0.5_f64.ln()..8.0_f64.ln()).exp() / m1,
            mu: rng.random_range(0.5..3.0) * m1,
            sigma: rng.random_range(0.1..1.0) * sd,
        });
    }
    starts
}

struct LocalResult {
    coords: Vec<f64>,
    value: f64,
}

fn local_search(start: &MixtureParams, moments: &[f64; 4], config: &SolverConfig) -> LocalResult {
    let m1 = moments[0];
    let objective = |c: &[f64]| moment_residual(&from_coords(c, m1), moments);
    let mut coords = to_coords(start, m1).to_vec();
    let mut value = objective(&coords);
    let mut budget = config.max_iterations;
    let mut step = 0.5;
    // Restart from the incumbent until a fresh simplex stops improving.
    while budget > 0 {
        let opts = NelderMeadOptions { max_iterations: budget, ..Default::default() };
        let m = minimize(objective, &coords, &[step; 4], &opts);
        budget = budget.saturating_sub(m.iterations.max(1));
        let improved = m.value < value;
        if improved {
            coords = m.x;
            value = m.value;
        }
        if !improved || m.iterations == 0 {
            break;
        }
        step = 0.1;
    }
    LocalResult { coords, value }
}

/// Method-of-moments fit of the exponential + normal mixture.
pub fn fit_mixture_mom(sample: &[f64], config: &SolverConfig) -> Result<MixtureFit, FitError> {
    if sample.len() < config.min_sample {
        return Err(FitError::InsufficientData { required: config.min_sample, got: sample.len() });
    }
    check_positive(sample)?;
    let moments = empirical_raw_moments(sample)?;
    fit_mixture_to_moments(&moments, config)
}

/// Solves the moment system for given raw moments `m1..m4`.
pub fn fit_mixture_to_moments(moments: &[f64; 4], config: &SolverConfig) -> Result<MixtureFit, FitError> {
    if moments.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(FitError::SolverFailed { starts: 0, moments: *moments });
    }
    let starts = start_points(moments, config);
    let results = config.execution.map(&starts, |s| local_search(s, moments, config));
    let best = results
        .iter()
        .filter(|r| r.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(FitError::SolverFailed { starts: starts.len(), moments: *moments })?;

    let params = from_coords(&best.coords, moments[0]);
    let residual_norm = moment_residual(&params, moments);
    let converged = residual_norm <= config.tolerance;
    let degenerate = params.p >= 1.0 - DEGENERATE_WEIGHT || params.p <= DEGENERATE_WEIGHT;
    let mut notes = Vec::new();
    if degenerate {
        notes.push("degenerate: single-component adequate".to_string());
    }
    if !converged {
        notes.push(format!(
            "not converged: residual {residual_norm:.3e} above tolerance {:.1e}",
            config.tolerance
        ));
    }
    if params.mu < 5.0 * params.sigma && params.p < 1.0 - DEGENERATE_WEIGHT {
        notes.push("normal component has noticeable mass below zero (mu < 5 sigma)".to_string());
    }
    Ok(MixtureFit {
        params,
        residual_norm,
        empirical_moments: *moments,
        converged,
        starts_tried: starts.len(),
        degenerate,
        notes,
    })
}

/// Serialized outcome of one model fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub params: serde_json::Value,
    pub n: usize,
    pub residual_norm: Option<f64>,
    pub loglik: Option<f64>,
    pub gof: Option<GofSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofSummary {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl From<&GofResult> for GofSummary {
    fn from(g: &GofResult) -> Self {
        Self { statistic: g.statistic, dof: g.dof, p_value: g.p_value }
    }
}

impl FitReport {
    pub fn exponential(fit: &ExponentialFit, gof: Option<&GofResult>) -> Self {
        Self {
            model: "exponential".into(),
            params: serde_json::json!({ "lambda": fit.lambda }),
            n: fit.n,
            residual_norm: None,
            loglik: None,
            gof: gof.map(GofSummary::from),
        }
    }

    pub fn mixture(fit: &MixtureFit, n: usize, gof: Option<&GofResult>) -> Self {
        let MixtureParams { p, lambda, mu, sigma } = fit.params;
        Self {
            model: "mixture".into(),
            params: serde_json::json!({ "p": p, "lambda": lambda, "mu": mu, "sigma": sigma }),
            n,
            residual_norm: Some(fit.residual_norm),
            loglik: None,
            gof: gof.map(GofSummary::from),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn raw_moments_of_two_and_four() {
        assert_eq!(empirical_raw_moment(&[2.0, 4.0], 1).unwrap(), 3.0);
        assert_eq!(empirical_raw_moment(&[2.0, 4.0], 2).unwrap(), 10.0);
        assert_eq!(empirical_raw_moments(&[2.0, 4.0]).unwrap(), [3.0, 10.0, 36.0, 136.0]);
        assert_eq!(empirical_raw_moment(&[], 1), Err(FitError::EmptySample));
        assert_eq!(empirical_raw_moment(&[1.0], 5), Err(FitError::InvalidOrder(5)));
    }

    #[test]
    fn exponential_rate_is_inverse_mean() {
        let fit = fit_exponential_values(&[5.0, 15.0, 10.0]).unwrap();
        assert_eq!(fit.lambda, 0.1);
        assert_eq!(fit.lambda * fit.mean, 1.0);
        let constant = fit_exponential_values(&[4.0; 10]).unwrap();
        assert_eq!(constant.lambda, 0.25);
        assert_eq!(
            fit_exponential_values(&[1.0]),
            Err(FitError::InsufficientData { required: 2, got: 1 })
        );
        assert_eq!(fit_exponential_values(&[1.0, 0.0]), Err(FitError::NonPositiveSample));
    }

    #[test]
    fn density_special_points() {
        let exp_only = MixtureParams { p: 1.0, lambda: 1.0, mu: 5.0, sigma: 1.0 };
        assert_eq!(mixture_density(0.0, &exp_only), 1.0);
        assert_eq!(mixture_density(-1.0, &exp_only), 0.0);
        let normal_only = MixtureParams { p: 0.0, lambda: 1.0, mu: 7.0, sigma: 2.0 };
        assert_relative_eq!(mixture_density(7.0, &normal_only), 1.0 / ((2.0 * PI).sqrt() * 2.0));
    }

    #[test]
    fn moments_at_boundaries() {
        let exp_only = MixtureParams { p: 1.0, lambda: 2.0, mu: 9.0, sigma: 9.0 };
        assert_eq!(mixture_theoretical_moments(&exp_only), [0.5, 0.5, 0.75, 1.5]);
        let normal_only = MixtureParams { p: 0.0, lambda: 9.0, mu: 3.0, sigma: 1.0 };
        assert_eq!(mixture_theoretical_moments(&normal_only), [3.0, 10.0, 36.0, 138.0]);
    }

    #[test]
    fn param_validation() {
        assert!(MixtureParams::new(0.4, 0.5, 20.0, 3.0).is_ok());
        assert!(MixtureParams::new(1.2, 0.5, 20.0, 3.0).is_err());
        assert!(MixtureParams::new(0.4, 0.0, 20.0, 3.0).is_err());
        assert!(MixtureParams::new(0.4, 0.5, 20.0, -3.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let model = GofModel::Mixture(MixtureParams { p: 0.4, lambda: 0.5, mu: 20.0, sigma: 3.0 });
        for &q in &[0.05, 0.3, 0.5, 0.77, 0.99] {
            assert_relative_eq!(model.cdf(model.quantile(q)), q, epsilon = 1e-10);
        }
        let exp = GofModel::Exponential { lambda: 0.2 };
        assert_relative_eq!(exp.quantile(0.5), 2.0_f64.ln() / 0.2, max_relative = 1e-14);
    }

    #[test]
    fn perfectly_placed_sample_has_zero_statistic() {
        let model = GofModel::Exponential { lambda: 0.3 };
        let sample: Vec<f64> = (0..10)
            .flat_map(|b| (0..5).map(move |j| (b as f64 + (j as f64 + 1.0) / 6.0) / 10.0))
            .map(|u| model.quantile(u))
            .collect();
        let gof = chi_square_gof(&sample, &model, &GofBinning::default()).unwrap();
        assert_eq!(gof.statistic, 0.0);
        assert_eq!(gof.p_value, 1.0);
        assert_eq!(gof.dof, 8);
        assert!(gof.bins.iter().all(|b| b.observed == 5));
    }

    #[test]
    fn constant_sample_is_rejected() {
        let sample = vec![7.0; 200];
        let fit = fit_exponential_values(&sample).unwrap();
        let gof = chi_square_gof(&sample, &GofModel::Exponential { lambda: fit.lambda }, &GofBinning::default()).unwrap();
        assert!(gof.p_value < 1e-12);
    }

    #[test]
    fn gof_merges_and_errors_when_too_small() {
        let model = GofModel::Exponential { lambda: 1.0 };
        let sample: Vec<f64> = (1..=30).map(|i| i as f64 / 15.0).collect();
        let gof = chi_square_gof(&sample, &model, &GofBinning::default()).unwrap();
        // 30 / 10 = 3 per bin, so pairs merge to 6
        assert_eq!(gof.bins.len(), 5);
        assert_eq!(gof.bins.iter().map(|b| b.observed).sum::<u64>(), 30);
        let mix = GofModel::Mixture(MixtureParams { p: 0.5, lambda: 1.0, mu: 3.0, sigma: 0.5 });
        assert!(matches!(
            chi_square_gof(&sample, &mix, &GofBinning::default()),
            Err(FitError::GofTooFewBins { .. })
        ));
        assert!(matches!(
            chi_square_gof(&sample[..29], &model, &GofBinning::default()),
            Err(FitError::InsufficientData { required: 30, got: 29 })
        ));
    }

    #[test]
    fn exact_moments_are_solved() {
        let truth = MixtureParams { p: 0.4, lambda: 0.5, mu: 20.0, sigma: 3.0 };
        let moments = mixture_theoretical_moments(&truth);
        let fit = fit_mixture_to_moments(&moments, &SolverConfig::default()).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!(fit.residual_norm <= 1e-8);
        assert_eq!(fit.starts_tried, 16);
    }

    #[test]
    fn fit_is_deterministic_across_execution_modes() {
        let moments = mixture_theoretical_moments(&MixtureParams { p: 0.3, lambda: 0.2, mu: 30.0, sigma: 4.0 });
        let par = fit_mixture_to_moments(&moments, &SolverConfig::default()).unwrap();
        let seq = fit_mixture_to_moments(
            &moments,
            &SolverConfig { execution: Execution::Sequential, ..Default::default() },
        )
        .unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn small_sample_is_refused() {
        let err = fit_mixture_mom(&[1.0; 49], &SolverConfig::default()).unwrap_err();
        assert_eq!(err, FitError::InsufficientData { required: 50, got: 49 });
    }
}
