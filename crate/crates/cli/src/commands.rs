//! Subcommand implementations. Each command reads the configured inputs,
//! runs one stage of the pipeline and writes CSV/JSON under `out_dir`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use fir_stats::distfit::{FitReport, MIN_GOF_SAMPLE};
use fir_stats::profile::periods_to_json;
use fir_stats::records::write_canonical_csv;
use fir_stats::streamgen::derive_seed;
use fir_stats::{
    chi_square_gof, extract_intervals, fit_exponential, fit_mixture_mom, gen_homogeneous_poisson, gen_mixture_renewal,
    gen_nhpp, group_by_route, hourly_profile, monthly_profile, parse_records, segment_stationary, weekday_profile,
    BinKind, BinProfile, Execution, FlightRecord, GofModel, GofResult, IntensityProfile, ParseReport, RecordsError,
    RouteKey, StationaryPeriod,
};
use serde_json::{json, Value};

use crate::config::{AnalysisConfig, GeneratorKind};

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

pub type CmdResult<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn or_usage(self) -> CmdResult<T>;
    fn or_data(self) -> CmdResult<T>;
    fn or_internal(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_usage(self) -> CmdResult<T> {
        self.map_err(|e| Failure { kind: ExitKind::Usage, error: e.into() })
    }
    fn or_data(self) -> CmdResult<T> {
        self.map_err(|e| Failure { kind: ExitKind::Data, error: e.into() })
    }
    fn or_internal(self) -> CmdResult<T> {
        self.map_err(|e| Failure { kind: ExitKind::Internal, error: e.into() })
    }
}

fn fail<T>(kind: ExitKind, error: anyhow::Error) -> CmdResult<T> {
    Err(Failure { kind, error })
}

/// Parses every configured input and merges the results.
pub fn load_records(config: &AnalysisConfig) -> CmdResult<(Vec<FlightRecord>, ParseReport)> {
    if config.inputs.is_empty() {
        return fail(ExitKind::Usage, anyhow!("no input files; set `inputs` in the config or pass --input"));
    }
    let mut records = Vec::new();
    let mut report = ParseReport::default();
    let many = config.inputs.len() > 1;
    for path in &config.inputs {
        let file = File::open(path).with_context(|| format!("opening {}", path.display())).or_data()?;
        let (recs, mut rep) = match parse_records(BufReader::new(file), &config.schema) {
            Ok(r) => r,
            Err(e @ (RecordsError::MissingColumn { .. } | RecordsError::Header(_))) => {
                return fail(ExitKind::Usage, anyhow!(e).context(format!("reading {}", path.display())))
            }
            Err(e) => return fail(ExitKind::Data, anyhow!(e).context(format!("reading {}", path.display()))),
        };
        if many {
            for issue in rep.rejections.iter_mut().chain(rep.warnings.iter_mut()) {
                issue.reason = format!("{}: {}", path.display(), issue.reason);
            }
        }
        report.accepted += rep.accepted;
        report.rejected += rep.rejected;
        report.rejections.append(&mut rep.rejections);
        report.warnings.append(&mut rep.warnings);
        records.extend(recs);
    }
    records.sort_by_key(|r| r.entry_time);
    Ok((records, report))
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).or_internal()?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display())).or_internal()?;
    Ok(BufWriter::new(file))
}

fn write_json(path: &Path, value: &Value) -> CmdResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).or_internal()?;
    writeln!(w).or_internal()?;
    w.flush().or_internal()
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CmdResult<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("writing {}", path.display())).or_internal()?;
    w.flush().or_internal()
}

/// File-name-safe rendering of a route or period label.
fn slug(s: &str) -> String {
    s.chars()
        .filter(|c| *c != ':')
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn check_route(records: &[FlightRecord], route: &RouteKey) -> CmdResult<()> {
    if records.iter().any(|r| r.entry_point == route.entry_point && r.exit_point == route.exit_point) {
        return Ok(());
    }
    let known: Vec<String> = group_by_route(records).keys().map(ToString::to_string).collect();
    fail(
        ExitKind::Data,
        anyhow!("unknown route {route}; routes in the data: {}", if known.is_empty() { "(none)".into() } else { known.join(", ") }),
    )
}

pub fn cmd_ingest(config: &AnalysisConfig) -> CmdResult<()> {
    let (records, report) = load_records(config)?;
    let dump = config.out_dir.join("records.csv");
    let mut w = create(&dump)?;
    write_canonical_csv(&records, &mut w).or_internal()?;
    w.flush().or_internal()?;
    write_json(&config.out_dir.join("parse_report.json"), &serde_json::to_value(&report).or_internal()?)?;
    println!("accepted {} rejected {} -> {}", report.accepted, report.rejected, dump.display());
    Ok(())
}

fn build_profile(records: &[FlightRecord], kind: BinKind, route: Option<&RouteKey>) -> BinProfile {
    let filtered = |route: &RouteKey| -> Vec<FlightRecord> {
        records
            .iter()
            .filter(|r| r.entry_point == route.entry_point && r.exit_point == route.exit_point)
            .cloned()
            .collect()
    };
    match (kind, route) {
        (BinKind::Hourly, route) => hourly_profile(records, route),
        (BinKind::Monthly, None) => monthly_profile(records),
        (BinKind::Monthly, Some(route)) => monthly_profile(&filtered(route)),
        (BinKind::Weekday, None) => weekday_profile(records),
        (BinKind::Weekday, Some(route)) => weekday_profile(&filtered(route)),
    }
}

fn kind_name(kind: BinKind) -> &'static str {
    match kind {
        BinKind::Monthly => "monthly",
        BinKind::Hourly => "hourly",
        BinKind::Weekday => "weekday",
    }
}

fn output_name(stem: &str, kind: BinKind, route: Option<&RouteKey>, ext: &str) -> String {
    match route {
        Some(r) => format!("{stem}_{}_{}.{ext}", kind_name(kind), slug(&r.to_string())),
        None => format!("{stem}_{}.{ext}", kind_name(kind)),
    }
}

pub fn cmd_profile(config: &AnalysisConfig, kind: BinKind, route: Option<&RouteKey>) -> CmdResult<()> {
    let (records, _) = load_records(config)?;
    if let Some(route) = route {
        check_route(&records, route)?;
    }
    let profile = build_profile(&records, kind, route);
    let path = config.out_dir.join(output_name("profile", kind, route, "csv"));
    write_with(&path, |w| profile.write_csv(w))?;
    println!("{} bins -> {}", profile.bins.len(), path.display());
    Ok(())
}

pub fn cmd_segment(config: &AnalysisConfig, kind: BinKind, route: Option<&RouteKey>) -> CmdResult<()> {
    let (records, _) = load_records(config)?;
    if let Some(route) = route {
        check_route(&records, route)?;
    }
    let profile = build_profile(&records, kind, route);
    let periods = segment_stationary(&profile, config.alpha, config.min_expected).or_data()?;
    let path = config.out_dir.join(output_name("segments", kind, route, "json"));
    write_json(&path, &periods_to_json(&periods))?;
    println!("{} periods -> {}", periods.len(), path.display());
    Ok(())
}

/// Hour window `START-END` (inclusive hour bins), e.g. `13-17`.
pub fn parse_window(s: &str) -> anyhow::Result<(usize, usize)> {
    let (a, b) = s.split_once('-').ok_or_else(|| anyhow!("window {s:?} is not START-END"))?;
    let start: usize = a.trim().parse().with_context(|| format!("bad window start in {s:?}"))?;
    let end: usize = b.trim().parse().with_context(|| format!("bad window end in {s:?}"))?;
    if start > 23 || end > 23 {
        return Err(anyhow!("window hours must be 0..=23, got {s:?}"));
    }
    Ok((start, end))
}

/// (route, period) pairs: the requested route or every route, with the
/// given window or the route's segmented hourly periods.
fn plan_periods(
    config: &AnalysisConfig,
    records: &[FlightRecord],
    route: Option<&RouteKey>,
    window: Option<(usize, usize)>,
) -> CmdResult<Vec<(RouteKey, StationaryPeriod)>> {
    let routes: Vec<RouteKey> = match route {
        Some(r) => {
            check_route(records, r)?;
            vec![r.clone()]
        }
        None => group_by_route(records).into_keys().collect(),
    };
    let mut plan = Vec::new();
    for r in routes {
        let profile = hourly_profile(records, Some(&r));
        let periods = match window {
            Some((a, b)) => vec![StationaryPeriod::hourly_window(&profile, a, b, config.alpha, config.min_expected)
                .or_usage()?],
            None => segment_stationary(&profile, config.alpha, config.min_expected).or_data()?,
        };
        plan.extend(periods.into_iter().map(|p| (r.clone(), p)));
    }
    Ok(plan)
}

fn period_file_stem(route: &RouteKey, period: &StationaryPeriod) -> String {
    format!("{}__{}", slug(&route.to_string()), slug(&period.label()))
}

pub fn cmd_intervals(config: &AnalysisConfig, route: Option<&RouteKey>, window: Option<(usize, usize)>) -> CmdResult<()> {
    let (records, _) = load_records(config)?;
    let plan = plan_periods(config, &records, route, window)?;
    let dir = config.out_dir.join("intervals");
    for (route, period) in &plan {
        let sample = extract_intervals(&records, route, period).or_internal()?;
        let stem = period_file_stem(route, period);
        write_with(&dir.join(format!("{stem}.csv")), |w| sample.write_csv(w))?;
        write_json(&dir.join(format!("{stem}.json")), &sample.sidecar_json())?;
        println!("{route} {}: {} intervals", period.label(), sample.len());
    }
    Ok(())
}

struct Analysis {
    stem: String,
    report: Value,
    histograms: Vec<(&'static str, GofResult)>,
}

fn analyze_one(config: &AnalysisConfig, records: &[FlightRecord], route: &RouteKey, period: &StationaryPeriod, seed: u64) -> Analysis {
    let stem = period_file_stem(route, period);
    let base = json!({
        "route": route.to_string(),
        "period": periods_to_json(std::slice::from_ref(period))[0],
        "alpha": config.alpha,
    });
    let mut report = base;
    let mut histograms = Vec::new();
    let sample = match extract_intervals(records, route, period) {
        Ok(s) => s,
        Err(e) => {
            report["status"] = json!("skipped");
            report["skip_reason"] = json!(e.to_string());
            return Analysis { stem, report, histograms };
        }
    };
    report["sample"] = sample.sidecar_json();
    if sample.len() < MIN_GOF_SAMPLE {
        report["status"] = json!("skipped");
        report["skip_reason"] = json!(format!(
            "insufficient intervals: {} < {MIN_GOF_SAMPLE}",
            sample.len()
        ));
        return Analysis { stem, report, histograms };
    }
    let exp = match fit_exponential(&sample) {
        Ok(f) => f,
        Err(e) => {
            report["status"] = json!("skipped");
            report["skip_reason"] = json!(e.to_string());
            return Analysis { stem, report, histograms };
        }
    };
    report["status"] = json!("fitted");
    let exp_gof = chi_square_gof(&sample.intervals, &GofModel::Exponential { lambda: exp.lambda }, &config.gof.binning()).ok();
    report["exponential"] = json!(FitReport::exponential(&exp, exp_gof.as_ref()));
    let accepted = exp_gof.as_ref().is_some_and(|g| g.p_value >= config.alpha);
    report["exponential_accepted"] = json!(accepted);
    if let Some(g) = exp_gof {
        histograms.push(("exponential", g));
    }

    report["mixture"] = Value::Null;
    if accepted {
        report["mixture_skipped"] = json!("exponential accepted");
        return Analysis { stem, report, histograms };
    }
    match fit_mixture_mom(&sample.intervals, &config.solver_config(seed)) {
        Ok(fit) => {
            let gof = chi_square_gof(&sample.intervals, &GofModel::Mixture(fit.params), &config.gof.binning());
            report["mixture"] = json!(FitReport::mixture(&fit, sample.len(), gof.as_ref().ok()));
            report["mixture_detail"] = json!({
                "converged": fit.converged,
                "starts_tried": fit.starts_tried,
                "degenerate": fit.degenerate,
                "empirical_moments": fit.empirical_moments,
                "notes": fit.notes,
                "solver_seed": seed,
            });
            match gof {
                Ok(g) => histograms.push(("mixture", g)),
                Err(e) => report["mixture_gof_error"] = json!(e.to_string()),
            }
        }
        Err(e) => report["mixture_skipped"] = json!(e.to_string()),
    }
    Analysis { stem, report, histograms }
}

pub fn cmd_analyze(config: &AnalysisConfig, route: Option<&RouteKey>, window: Option<(usize, usize)>) -> CmdResult<()> {
    let (records, _) = load_records(config)?;
    let plan = plan_periods(config, &records, route, window)?;
    let groups: BTreeMap<RouteKey, Vec<FlightRecord>> = group_by_route(&records);
    let jobs: Vec<(usize, &RouteKey, &StationaryPeriod)> = plan.iter().enumerate().map(|(i, (r, p))| (i, r, p)).collect();
    let analyses = Execution::Parallel.map(&jobs, |&(i, route, period)| {
        analyze_one(config, &groups[route], route, period, derive_seed(config.seed, i as u64))
    });

    // single writer, plan order
    let mut index = Vec::new();
    for a in &analyses {
        let file = format!("reports/{}.json", a.stem);
        write_json(&config.out_dir.join(&file), &a.report)?;
        let mut hist_files = Vec::new();
        for (model, gof) in &a.histograms {
            let hist = format!("histograms/{}__{model}.csv", a.stem);
            write_with(&config.out_dir.join(&hist), |w| gof.write_csv(w))?;
            hist_files.push(hist);
        }
        index.push(json!({
            "route": a.report["route"],
            "period": a.report["period"]["label"],
            "status": a.report["status"],
            "exponential_p_value": a.report.pointer("/exponential/gof/p_value").cloned().unwrap_or(Value::Null),
            "exponential_accepted": a.report.get("exponential_accepted").cloned().unwrap_or(Value::Null),
            "mixture_p_value": a.report.pointer("/mixture/gof/p_value").cloned().unwrap_or(Value::Null),
            "report": file,
            "histograms": hist_files,
        }));
        println!("{} {}: {}", a.report["route"], a.report["period"]["label"], a.report["status"]);
    }
    write_json(
        &config.out_dir.join("index.json"),
        &json!({ "alpha": config.alpha, "seed": config.seed, "reports": index }),
    )
}

pub fn cmd_simulate(config: &AnalysisConfig) -> CmdResult<()> {
    let sim = &config.simulate;
    let start = sim.start_time().or_usage()?;
    let routes = sim.route_keys().or_usage()?;
    let mut records = Vec::new();
    let mut truths = Vec::new();
    for (i, route) in routes.iter().enumerate() {
        let seed = derive_seed(config.seed, i as u64);
        let stream = match sim.generator {
            GeneratorKind::Poisson if sim.duration_hours == 0.0 => None,
            GeneratorKind::Poisson => {
                Some(gen_homogeneous_poisson(sim.rate_per_hour, start, sim.duration_hours, route, seed).or_usage()?)
            }
            GeneratorKind::Nhpp => {
                let hourly_rates: [f64; 24] = sim
                    .hourly_rates
                    .as_slice()
                    .try_into()
                    .map_err(|_| anyhow!("simulate.hourly_rates needs 24 values, got {}", sim.hourly_rates.len()))
                    .or_usage()?;
                let monthly_multipliers = match &sim.monthly_multipliers {
                    None => None,
                    Some(m) => Some(
                        <[f64; 12]>::try_from(m.as_slice())
                            .map_err(|_| anyhow!("simulate.monthly_multipliers needs 12 values, got {}", m.len()))
                            .or_usage()?,
                    ),
                };
                let profile = IntensityProfile { hourly_rates, monthly_multipliers };
                Some(gen_nhpp(&profile, start, sim.days, route, seed).or_usage()?)
            }
            GeneratorKind::Mixture => {
                let params = sim
                    .mixture
                    .ok_or_else(|| anyhow!("simulate.mixture parameters are required for the mixture generator"))
                    .or_usage()?;
                Some(gen_mixture_renewal(&params, sim.n, start, route, seed).or_usage()?)
            }
        };
        match stream {
            Some(s) => {
                truths.push(json!({ "route": route.to_string(), "seed": seed, "truth": s.truth, "n_events": s.records.len() }));
                records.extend(s.records);
            }
            None => truths.push(json!({ "route": route.to_string(), "seed": seed, "truth": null, "n_events": 0 })),
        }
    }
    // stable: equal timestamps keep route order
    records.sort_by_key(|r| r.entry_time);

    let path = config.out_dir.join("stream.csv");
    let mut w = create(&path)?;
    write_canonical_csv(&records, &mut w).or_internal()?;
    w.flush().or_internal()?;
    write_json(
        &config.out_dir.join("truth.json"),
        &json!({ "seed": config.seed, "generator": sim.generator, "streams": truths }),
    )?;
    println!("{} records -> {}", records.len(), path.display());
    Ok(())
}
