//! Seeded synthetic arrival streams used as ground truth for the
//! estimators: homogeneous Poisson, nonhomogeneous Poisson by thinning, and
//! renewal streams with exponential + normal mixture gaps.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)` and split into independent streams with
//! `set_stream(id)`. Exponential and normal variates use `rand_distr`.
//! Event times are kept exact in [`GeneratedStream::event_minutes`]; records
//! only get minute resolution (truncation) when emitted.

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distfit::{FitError, MixtureParams};
use crate::records::{FlightRecord, RouteKey};

/// Stream id used by the generators in this module.
pub const GENERATOR_STREAM: u64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Mixture(#[from] FitError),
}

/// ChaCha8 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer over `seed + index`, for deriving child seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Piecewise-constant intensity: a rate per clock hour, optionally scaled
/// per calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityProfile {
    /// Flights per hour for hours 0..24.
    pub hourly_rates: [f64; 24],
    pub monthly_multipliers: Option<[f64; 12]>,
}

impl IntensityProfile {
    pub fn flat(rate: f64) -> Self {
        Self { hourly_rates: [rate; 24], monthly_multipliers: None }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        let all = self.hourly_rates.iter().chain(self.monthly_multipliers.iter().flatten());
        for &r in all {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(StreamError::InvalidParameter(format!("rate {r} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn rate_at(&self, t: NaiveDateTime) -> f64 {
        let month = self.monthly_multipliers.map_or(1.0, |m| m[t.month0() as usize]);
        self.hourly_rates[t.hour() as usize] * month
    }

    pub fn max_rate(&self) -> f64 {
        let hour = self.hourly_rates.iter().copied().fold(0.0, f64::max);
        let month = self.monthly_multipliers.map_or(1.0, |m| m.iter().copied().fold(0.0, f64::max));
        hour * month
    }
}

/// Generating parameters, kept with the stream for oracle comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum StreamTruth {
    HomogeneousPoisson { rate_per_hour: f64, start: NaiveDateTime, duration_hours: f64 },
    Nhpp { profile: IntensityProfile, start: NaiveDateTime, days: u32 },
    MixtureRenewal { params: MixtureParams, n: usize, start: NaiveDateTime },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStream {
    pub records: Vec<FlightRecord>,
    pub truth: StreamTruth,
    pub route: RouteKey,
    pub seed: u64,
    /// Exact event times, minutes after the stream start.
    pub event_minutes: Vec<f64>,
}

impl GeneratedStream {
    /// Sidecar JSON: generating parameters, route and seed.
    pub fn truth_json(&self) -> serde_json::Value {
        serde_json::json!({
            "truth": self.truth,
            "route": self.route.to_string(),
            "seed": self.seed,
            "n_events": self.records.len(),
        })
    }

    pub fn write_truth<W: Write>(&self, sink: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(sink, &self.truth_json())
    }
}

fn emit(start: NaiveDateTime, route: &RouteKey, event_minutes: &[f64]) -> Vec<FlightRecord> {
    event_minutes
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let t = start + Duration::minutes(m.floor() as i64);
            FlightRecord {
                registration_date: t.date(),
                aircraft_type: String::new(),
                flight_code: format!("SIM{i:06}"),
                origin: String::new(),
                destination: String::new(),
                entry_point: route.entry_point.clone(),
                exit_point: route.exit_point.clone(),
                entry_time: t,
            }
        })
        .collect()
}

/// Poisson arrivals at a constant `rate` per hour over `duration` hours.
pub fn gen_homogeneous_poisson(
    rate: f64,
    start: NaiveDateTime,
    duration: f64,
    route: &RouteKey,
    seed: u64,
) -> Result<GeneratedStream, StreamError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(StreamError::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(StreamError::InvalidParameter(format!("duration must be positive, got {duration}")));
    }
    let mut rng = stream_rng(seed, GENERATOR_STREAM);
    let gap = Exp::new(rate).expect("positive rate");
    let mut hours = 0.0;
    let mut event_minutes = Vec::new();
    loop {
        hours += gap.sample(&mut rng);
        if hours >= duration {
            break;
        }
        event_minutes.push(hours * 60.0);
    }
    Ok(GeneratedStream {
        records: emit(start, route, &event_minutes),
        truth: StreamTruth::HomogeneousPoisson { rate_per_hour: rate, start, duration_hours: duration },
        route: route.clone(),
        seed,
        event_minutes,
    })
}

/// Nonhomogeneous Poisson arrivals over `days` days by thinning: candidates
/// at the peak rate, each kept with probability `rate(t) / peak`.
pub fn gen_nhpp(
    profile: &IntensityProfile,
    start: NaiveDateTime,
    days: u32,
    route: &RouteKey,
    seed: u64,
) -> Result<GeneratedStream, StreamError> {
    profile.validate()?;
    let peak = profile.max_rate();
    let horizon = f64::from(days) * 24.0;
    let mut event_minutes = Vec::new();
    if peak > 0.0 && horizon > 0.0 {
        let mut rng = stream_rng(seed, GENERATOR_STREAM);
        let gap = Exp::new(peak).expect("positive peak rate");
        let mut hours = 0.0;
        loop {
            hours += gap.sample(&mut rng);
            if hours >= horizon {
                break;
            }
            let minutes = hours * 60.0;
            // the rate is constant within a clock minute, so truncating here
            // matches the bin the emitted record falls in
            let t = start + Duration::minutes(minutes.floor() as i64);
            let u: f64 = rng.random();
            if u * peak < profile.rate_at(t) {
                event_minutes.push(minutes);
            }
        }
    }
    Ok(GeneratedStream {
        records: emit(start, route, &event_minutes),
        truth: StreamTruth::Nhpp { profile: profile.clone(), start, days },
        route: route.clone(),
        seed,
        event_minutes,
    })
}

/// Draws mixture gaps (minutes): exponential with probability `p`, else a
/// normal draw resampled until positive.
#[derive(Debug, Clone, Copy)]
pub struct MixtureGapSampler {
    p: f64,
    exp: Exp<f64>,
    normal: Normal<f64>,
}

impl MixtureGapSampler {
    pub fn new(params: &MixtureParams) -> Result<Self, StreamError> {
        params.validate()?;
        Ok(Self {
            p: params.p,
            exp: Exp::new(params.lambda).expect("validated lambda"),
            normal: Normal::new(params.mu, params.sigma).expect("validated sigma"),
        })
    }
}

impl Distribution<f64> for MixtureGapSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if u < self.p {
            self.exp.sample(rng)
        } else {
            loop {
                let x = self.normal.sample(rng);
                if x > 0.0 {
                    return x;
                }
            }
        }
    }
}

/// Convenience: `n` mixture gaps from `(seed, GENERATOR_STREAM)`, the same
/// draws [`gen_mixture_renewal`] uses.
pub fn sample_mixture_gaps(params: &MixtureParams, n: usize, seed: u64) -> Result<Vec<f64>, StreamError> {
    let sampler = MixtureGapSampler::new(params)?;
    let rng = stream_rng(seed, GENERATOR_STREAM);
    Ok(sampler.sample_iter(rng).take(n).collect())
}

/// Renewal stream of `n` arrivals whose gaps follow the mixture.
pub fn gen_mixture_renewal(
    params: &MixtureParams,
    n: usize,
    start: NaiveDateTime,
    route: &RouteKey,
    seed: u64,
) -> Result<GeneratedStream, StreamError> {
    let gaps = sample_mixture_gaps(params, n, seed)?;
    let event_minutes: Vec<f64> = gaps
        .iter()
        .scan(0.0, |t, g| {
            *t += g;
            Some(*t)
        })
        .collect();
    Ok(GeneratedStream {
        records: emit(start, route, &event_minutes),
        truth: StreamTruth::MixtureRenewal { params: *params, n, start },
        route: route.clone(),
        seed,
        event_minutes,
    })
}
