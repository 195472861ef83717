//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use chrono::{NaiveDate, NaiveDateTime};
use fir_stats::distfit::fit_mixture_mom;
use fir_stats::profile::StationaryPeriod;
use fir_stats::special::chi_square_sf;
use fir_stats::streamgen::{derive_seed, sample_mixture_gaps, stream_rng};
use fir_stats::*;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2003, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn route() -> RouteKey {
    RouteKey::new("NINTA", "OPOKA")
}

fn par<U: Send>(n: u64, f: impl Fn(u64) -> U + Sync + Send) -> Vec<U> {
    Execution::Parallel.map_range(n, f)
}

fn exp_draws(lambda: f64, n: usize, seed: u64) -> Vec<f64> {
    Exp::new(lambda).unwrap().sample_iter(stream_rng(seed, 7)).take(n).collect()
}

/// Moments of 1e6 renewal gaps against the closed form, 100 parameter sets.
fn moment_system() -> Outcome {
    let sets = 100;
    let n = 1_000_000;
    let results = par(sets, |i| {
        let mut rng = stream_rng(derive_seed(1001, i), 0);
        let mu = rng.random_range(5.0..100.0);
        let params = MixtureParams::new(
            rng.random_range(0.05..0.95),
            rng.random_range(0.02..2.0),
            mu,
            rng.random_range(0.02..0.2) * mu,
        )
        .unwrap();
        let xs = sample_mixture_gaps(&params, n, derive_seed(1002, i)).unwrap();
        let theory = mixture_theoretical_moments(&params);
        let sample = common::moments_with_standard_errors(&xs);
        let z: Vec<f64> = (0..4).map(|v| (sample[v].0 - theory[v]).abs() / sample[v].1).collect();
        (params, z)
    });
    let misses: Vec<String> = results
        .iter()
        .flat_map(|(p, z)| {
            z.iter().enumerate().filter(|(_, &z)| z >= 3.0).map(move |(v, z)| format!("order {} z={z:.2} at {p:?}", v + 1))
        })
        .collect();
    let max_z = results.iter().flat_map(|(_, z)| z.iter().copied()).fold(0.0, f64::max);
    outcome(
        misses.is_empty(),
        format!(
            "{} of {} comparisons beyond 3 SE (max |z| = {max_z:.2}){}",
            misses.len(),
            4 * sets,
            if misses.is_empty() { String::new() } else { format!(": {}", misses.join("; ")) }
        ),
    )
}

fn boundary_reductions() -> Outcome {
    let mut rng = stream_rng(2001, 0);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let (l, m, s) = (rng.random_range(0.01..10.0), rng.random_range(-50.0..50.0), rng.random_range(0.01..20.0));
        let one = mixture_theoretical_moments(&MixtureParams::new(1.0, l, m, s).unwrap());
        let zero = mixture_theoretical_moments(&MixtureParams::new(0.0, l, m, s).unwrap());
        let exp = [1.0 / l, 2.0 / l.powi(2), 6.0 / l.powi(3), 24.0 / l.powi(4)];
        let s2 = s * s;
        let norm = [m, s2 + m * m, 3.0 * m * s2 + m.powi(3), 3.0 * s2 * s2 + 6.0 * m * m * s2 + m.powi(4)];
        for v in 0..4 {
            worst = worst.max(((one[v] - exp[v]) / exp[v]).abs());
            worst = worst.max(((zero[v] - norm[v]) / norm[v]).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max relative deviation {worst:.2e} over 20 points"))
}

fn mom_round_trip() -> Outcome {
    let truth = MixtureParams::new(0.4, 0.5, 20.0, 3.0).unwrap();
    let config = SolverConfig::default();
    let t0 = Instant::now();
    let fits = par(20, |i| {
        let xs = sample_mixture_gaps(&truth, 100_000, derive_seed(3001, i)).unwrap();
        fit_mixture_mom(&xs, &SolverConfig { seed: i, ..config }).unwrap()
    });
    let elapsed = t0.elapsed().as_secs_f64();
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let ok = fits
        .iter()
        .filter(|f| {
            (f.params.p - truth.p).abs() <= 0.05
                && rel(f.params.lambda, truth.lambda) <= 0.1
                && rel(f.params.mu, truth.mu) <= 0.1
                && rel(f.params.sigma, truth.sigma) <= 0.1
        })
        .count();
    let residual_ok = fits.iter().filter(|f| f.converged).all(|f| f.residual_norm <= config.tolerance);
    let converged = fits.iter().filter(|f| f.converged).count();
    outcome(
        ok >= 18 && residual_ok && elapsed < 120.0,
        format!("{ok}/20 within tolerance, {converged} converged, residual bound held: {residual_ok}, {elapsed:.1}s"),
    )
}

fn exponential_recovery() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for lambda in [0.1, 1.0, 10.0] {
        let hits = par(20, |s| {
            let fit = fit_exponential_values(&exp_draws(lambda, 100_000, derive_seed(4001, s))).unwrap();
            ((fit.lambda - lambda) / lambda).abs() < 0.02
        })
        .into_iter()
        .filter(|&h| h)
        .count();
        pass &= hits >= 19;
        parts.push(format!("lambda={lambda}: {hits}/20"));
    }
    outcome(pass, parts.join(", "))
}

fn gof_calibration() -> Outcome {
    let runs = 1000;
    let rejected = par(runs, |s| {
        let xs = exp_draws(1.0, 1000, derive_seed(5001, s));
        let fit = fit_exponential_values(&xs).unwrap();
        chi_square_gof(&xs, &GofModel::Exponential { lambda: fit.lambda }, &GofBinning::default()).unwrap().p_value < 0.05
    })
    .into_iter()
    .filter(|&r| r)
    .count();
    let rate = rejected as f64 / runs as f64;

    // 100 points placed inside each of the 10 equal-probability bins
    let model = GofModel::Exponential { lambda: 0.7 };
    let exact: Vec<f64> = (0..1000).map(|j| model.quantile((j as f64 + 0.5) / 1000.0)).collect();
    let r = chi_square_gof(&exact, &model, &GofBinning::default()).unwrap();
    let exact_ok = r.statistic == 0.0 && r.p_value == 1.0;
    outcome(
        (rate - 0.05).abs() <= 0.02 && exact_ok,
        format!("rejection rate {rate:.3} over {runs} runs; all-expected case statistic {} p {}", r.statistic, r.p_value),
    )
}

fn tail_accuracy() -> Outcome {
    let mut worst = 0.0_f64;
    for s in [0.5, 1.0, 3.333, 10.0, 50.0] {
        for k in [1_u32, 5, 23] {
            worst = worst.max((chi_square_sf(s, f64::from(k)) - common::chi_square_sf_oracle(s, k)).abs());
        }
    }
    outcome(worst <= 1e-8, format!("max absolute error {worst:.2e} against quadrature"))
}

fn segmentation() -> Outcome {
    let mut rates = [1.0; 24];
    rates[13..18].fill(5.0);
    let two_level = IntensityProfile { hourly_rates: rates, monthly_multipliers: None };
    let planted = par(50, |s| {
        let stream = gen_nhpp(&two_level, start(), 365, &route(), derive_seed(7001, s)).unwrap();
        let periods = segment_stationary(&hourly_profile(&stream.records, None), 0.05, 5.0).unwrap();
        let mut starts: Vec<usize> = periods.iter().map(|p| p.start).collect();
        starts.sort_unstable();
        starts.len() == 2 && starts[0].abs_diff(13) <= 1 && starts[1].abs_diff(18) <= 1
    })
    .into_iter()
    .filter(|&h| h)
    .count();
    let flat_runs = 100;
    let single = par(flat_runs, |s| {
        let stream = gen_nhpp(&IntensityProfile::flat(2.0), start(), 365, &route(), derive_seed(7002, s)).unwrap();
        segment_stationary(&hourly_profile(&stream.records, None), 0.05, 5.0).unwrap().len() == 1
    })
    .into_iter()
    .filter(|&h| h)
    .count();
    outcome(
        planted >= 45 && single * 10 >= flat_runs as usize * 9,
        format!("two-level: {planted}/50 with exactly the planted change points (+-1); flat: {single}/{flat_runs} single period"),
    )
}

fn interval_conservation() -> Outcome {
    let mut nhpp_rates = [0.5; 24];
    nhpp_rates[13..18].fill(6.0);
    let mut fixtures = Vec::new();
    for s in 0..5 {
        fixtures.push(gen_homogeneous_poisson(8.0, start(), 24.0 * 20.0, &route(), derive_seed(8001, s)).unwrap());
        fixtures.push(
            gen_nhpp(&IntensityProfile { hourly_rates: nhpp_rates, monthly_multipliers: None }, start(), 30, &route(), derive_seed(8002, s))
                .unwrap(),
        );
        let mix = MixtureParams::new(0.4, 0.5, 20.0, 3.0).unwrap();
        fixtures.push(gen_mixture_renewal(&mix, 3000, start(), &route(), derive_seed(8003, s)).unwrap());
    }
    let (mut windows, mut broken, mut zeros) = (0, 0, 0);
    for f in &fixtures {
        let profile = hourly_profile(&f.records, None);
        for (a, b) in [(0, 23), (13, 17), (22, 3), (5, 5)] {
            let period = StationaryPeriod::hourly_window(&profile, a, b, 0.05, 5.0).unwrap();
            let sample = extract_intervals(&f.records, &route(), &period).unwrap();
            for w in &sample.windows {
                windows += 1;
                zeros += w.zero_dropped;
                let sum_ok = w.retained_sum + w.leading_span + w.trailing_span == w.length();
                let count_ok = w.retained + w.zero_dropped + 1 == w.arrivals;
                broken += usize::from(!(sum_ok && count_ok));
            }
        }
    }
    outcome(
        broken == 0,
        format!("{} fixtures, {windows} day windows ({zeros} zero gaps dropped), {broken} not conserved", fixtures.len()),
    )
}

fn fir_stats_bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fir-stats"));
    c.env_remove("FIR_STATS_OUT_DIR");
    c
}

fn run_bin(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = fir_stats_bin().current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

const PIPELINE_CONFIG: &str = r#"
seed = 2024
inputs = ["sim/stream.csv"]
out_dir = "sim"

[simulate]
generator = "mixture"
routes = ["NINTA-OPOKA", "ADAXA-RIGA", "BALTI-TUKUM"]
n = 4000
mixture = { p = 0.4, lambda = 0.05, mu = 120.0, sigma = 15.0 }
"#;

fn pipeline_once(dir: &Path) -> Result<PathBuf, String> {
    fs::write(dir.join("run.toml"), PIPELINE_CONFIG).map_err(|e| e.to_string())?;
    run_bin(dir, &["--config", "run.toml", "simulate"])?;
    run_bin(dir, &["--config", "run.toml", "--out-dir", "ingested", "ingest"])?;
    run_bin(dir, &["--config", "run.toml", "--input", "ingested/records.csv", "--out-dir", "analysis", "analyze"])?;
    Ok(dir.join("analysis"))
}

fn pipeline_determinism() -> Outcome {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (ra, rb) = match (pipeline_once(a.path()), pipeline_once(b.path())) {
        (Ok(ra), Ok(rb)) => (ra, rb),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let (fa, fb) = (files_under(&ra), files_under(&rb));
    let reports = fa.iter().filter(|p| p.starts_with("reports")).count();
    let identical = fa == fb && fa.iter().all(|p| fs::read(ra.join(p)).unwrap() == fs::read(rb.join(p)).unwrap());
    let mixture_fits = fa
        .iter()
        .filter(|p| p.starts_with("reports"))
        .filter(|p| {
            let v: serde_json::Value = serde_json::from_slice(&fs::read(ra.join(p)).unwrap()).unwrap();
            !v["mixture"].is_null()
        })
        .count();
    outcome(
        identical && reports > 0,
        format!("{} output files, {reports} reports ({mixture_fits} with mixture fits), byte-identical: {identical}", fa.len()),
    )
}

fn qualitative_profile() -> Outcome {
    let dir = TempDir::new().unwrap();
    // quiet night, busy afternoon
    let mut rates = [2.0; 24];
    rates[1..8].fill(0.05);
    rates[14..18].fill(8.0);
    let list = rates.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ");
    let config = format!(
        "seed = 10\ninputs = [\"sim/stream.csv\"]\nout_dir = \"sim\"\n[simulate]\ngenerator = \"nhpp\"\ndays = 365\nhourly_rates = [{list}]\n"
    );
    fs::write(dir.path().join("run.toml"), config).unwrap();
    let ran = run_bin(dir.path(), &["--config", "run.toml", "simulate"])
        .and_then(|_| run_bin(dir.path(), &["--config", "run.toml", "--out-dir", "p", "profile", "--kind", "hourly"]));
    if let Err(e) = ran {
        return outcome(false, format!("pipeline failed: {e}"));
    }
    let text = fs::read_to_string(dir.path().join("p/profile_hourly.csv")).unwrap();
    let mut bins: Vec<(usize, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    bins.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut top: Vec<usize> = bins[..4].iter().map(|b| b.0).collect();
    let mut bottom: Vec<usize> = bins[bins.len() - 7..].iter().map(|b| b.0).collect();
    top.sort_unstable();
    bottom.sort_unstable();
    outcome(
        top.iter().all(|h| (14..18).contains(h)) && bottom.iter().all(|h| (1..8).contains(h)),
        format!("top-4 hours {top:?}, bottom-7 hours {bottom:?}"),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("moment system vs Monte Carlo", moment_system),
        ("boundary reductions", boundary_reductions),
        ("method-of-moments round trip", mom_round_trip),
        ("exponential recovery", exponential_recovery),
        ("goodness-of-fit calibration", gof_calibration),
        ("chi-square tail accuracy", tail_accuracy),
        ("stationary segmentation", segmentation),
        ("interval conservation", interval_conservation),
        ("pipeline determinism", pipeline_determinism),
        ("hourly peak and trough", qualitative_profile),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "[{}] {} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
