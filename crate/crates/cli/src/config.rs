//! Declarative analysis config (TOML) with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDateTime;
use fir_stats::{GofBinning, MixtureParams, RouteKey, Schema, SolverConfig};
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "FIR_STATS_OUT_DIR";
const START_FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Significance level for homogeneity and goodness-of-fit tests.
    pub alpha: f64,
    /// Minimum expected count per chi-square bin.
    pub min_expected: f64,
    pub schema: Schema,
    pub gof: GofSettings,
    pub solver: SolverSettings,
    pub simulate: SimulateSpec,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            out_dir: PathBuf::from("out"),
            seed: 0,
            alpha: 0.05,
            min_expected: 5.0,
            schema: Schema::default(),
            gof: GofSettings::default(),
            solver: SolverSettings::default(),
            simulate: SimulateSpec::default(),
        }
    }
}

/// Goodness-of-fit binning. Records carry whole minutes, so bins align to
/// a one-minute grid unless `resolution` is set to 0 (continuous).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GofSettings {
    pub bins: usize,
    pub min_expected: f64,
    /// Minutes.
    pub resolution: f64,
}

impl Default for GofSettings {
    fn default() -> Self {
        let d = GofBinning::default();
        Self { bins: d.bins, min_expected: d.min_expected, resolution: 1.0 }
    }
}

impl GofSettings {
    pub fn binning(&self) -> GofBinning {
        GofBinning {
            bins: self.bins,
            min_expected: self.min_expected,
            resolution: (self.resolution > 0.0).then_some(self.resolution),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub min_sample: usize,
    pub random_starts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            min_sample: d.min_sample,
            random_starts: d.random_starts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Poisson,
    Nhpp,
    Mixture,
}

/// What `simulate` generates. Each listed route gets an independent stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub generator: GeneratorKind,
    pub routes: Vec<String>,
    /// `YYYY-MM-DDTHH:MM`
    pub start: String,
    pub rate_per_hour: f64,
    pub duration_hours: f64,
    pub days: u32,
    pub hourly_rates: Vec<f64>,
    pub monthly_multipliers: Option<Vec<f64>>,
    pub n: usize,
    pub mixture: Option<MixtureParams>,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            generator: GeneratorKind::Nhpp,
            routes: vec!["NINTA-OPOKA".into()],
            start: "2003-01-01T00:00".into(),
            rate_per_hour: 6.0,
            duration_hours: 24.0 * 30.0,
            days: 30,
            hourly_rates: vec![1.0; 24],
            monthly_multipliers: None,
            n: 1000,
            mixture: None,
        }
    }
}

impl SimulateSpec {
    pub fn start_time(&self) -> anyhow::Result<NaiveDateTime> {
        NaiveDateTime::parse_from_str(&self.start, START_FORMAT)
            .with_context(|| format!("simulate.start {:?} is not YYYY-MM-DDTHH:MM", self.start))
    }

    pub fn route_keys(&self) -> anyhow::Result<Vec<RouteKey>> {
        if self.routes.is_empty() {
            bail!("simulate.routes is empty");
        }
        self.routes
            .iter()
            .map(|r| RouteKey::parse(r).with_context(|| format!("route {r:?} is not ENTRY-EXIT")))
            .collect()
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // relative paths in the file are relative to the file
        if let Some(base) = path.parent() {
            for input in &mut config.inputs {
                if input.is_relative() {
                    *input = base.join(&*input);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        if self.gof.bins < 3 {
            bail!("gof.bins must be at least 3, got {}", self.gof.bins);
        }
        if !(self.min_expected > 0.0) || !(self.gof.min_expected > 0.0) {
            bail!("minimum expected counts must be positive");
        }
        if !(self.gof.resolution >= 0.0 && self.gof.resolution.is_finite()) {
            bail!("gof.resolution must be a finite non-negative number of minutes");
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_iterations == 0 {
            bail!("solver tolerance and max_iterations must be positive");
        }
        Ok(())
    }

    /// Solver settings for one fit; `seed` is the per-fit derived seed.
    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            min_sample: self.solver.min_sample,
            random_starts: self.solver.random_starts,
            seed,
            ..SolverConfig::default()
        }
    }
}
