//! Monthly, hour-of-day and weekday traffic profiles, chi-square count
//! homogeneity and greedy stationary-period segmentation.

use std::io::Write;

use chrono::{Datelike, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::{FlightRecord, RouteKey};
use crate::special::chi_square_sf;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_MIN_EXPECTED: f64 = 5.0;

const MONTH_LABELS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const WEEKDAY_LABELS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("homogeneity test needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("homogeneity test needs at least one event")]
    NoEvents,
    #[error("bin {0} has non-positive exposure")]
    NonPositiveExposure(usize),
    #[error("bins {bins:?} have expected count below {min_expected}; merge them first")]
    SparseBins { bins: Vec<usize>, min_expected: f64 },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("profile has no observed exposure")]
    EmptyProfile,
    #[error("{0:?} profiles are diagnostic only and cannot be segmented")]
    NotSegmentable(BinKind),
    #[error("hour {0} is outside 0..24")]
    InvalidHour(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinKind {
    Monthly,
    Hourly,
    Weekday,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    /// Calendar position: month of year (0 = Jan), hour of day, or weekday
    /// (0 = Monday).
    pub index: usize,
    pub count: u64,
    /// Observed duration contributing to the bin, hours.
    pub exposure: f64,
}

impl Bin {
    /// Flights per hour of exposure; zero for unobserved bins.
    pub fn rate(&self) -> f64 {
        if self.exposure > 0.0 {
            self.count as f64 / self.exposure
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinProfile {
    pub kind: BinKind,
    pub bins: Vec<Bin>,
}

impl BinProfile {
    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn total_exposure(&self) -> f64 {
        self.bins.iter().map(|b| b.exposure).sum()
    }

    /// Writes `label,count,exposure,rate` rows.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "label,count,exposure,rate")?;
        for b in &self.bins {
            writeln!(sink, "{},{},{},{}", b.label, b.count, b.exposure, b.rate())?;
        }
        Ok(())
    }
}

fn date_span(records: &[FlightRecord]) -> Option<(NaiveDate, NaiveDate)> {
    let first = records.iter().map(|r| r.entry_time.date()).min()?;
    let last = records.iter().map(|r| r.entry_time.date()).max()?;
    Some((first, last))
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    };
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    (next.expect("valid month") - first).num_days() as u32
}

/// Flight counts per month of year. Every calendar month touched by the
/// data span gets a bin whose exposure is the full length of that month
/// (summed over years); bins run chronologically from the first month of
/// the span.
pub fn monthly_profile(records: &[FlightRecord]) -> BinProfile {
    let Some((first, last)) = date_span(records) else {
        return BinProfile { kind: BinKind::Monthly, bins: Vec::new() };
    };
    let mut exposure = [0.0_f64; 12];
    let (mut year, mut month) = (first.year(), first.month());
    while (year, month) <= (last.year(), last.month()) {
        exposure[month as usize - 1] += 24.0 * days_in_month(year, month) as f64;
        (year, month) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    }
    let mut counts = [0_u64; 12];
    for r in records {
        counts[r.entry_time.month0() as usize] += 1;
    }
    let start = first.month0() as usize;
    let bins = (0..12)
        .map(|k| (start + k) % 12)
        .filter(|&m| exposure[m] > 0.0)
        .map(|m| Bin {
            label: MONTH_LABELS[m].to_string(),
            index: m,
            count: counts[m],
            exposure: exposure[m],
        })
        .collect();
    BinProfile { kind: BinKind::Monthly, bins }
}

/// Flight counts per hour of day, optionally restricted to one route. Each
/// day of the (whole-data) span contributes one hour of exposure per bin.
pub fn hourly_profile(records: &[FlightRecord], route: Option<&RouteKey>) -> BinProfile {
    let days = date_span(records).map_or(0, |(a, b)| (b - a).num_days() + 1);
    let mut counts = [0_u64; 24];
    for r in records {
        if route.is_none_or(|k| k.entry_point == r.entry_point && k.exit_point == r.exit_point) {
            counts[r.entry_time.hour() as usize] += 1;
        }
    }
    let bins = (0..24)
        .map(|h| Bin {
            label: format!("{h:02}"),
            index: h,
            count: counts[h],
            exposure: days as f64,
        })
        .collect();
    BinProfile { kind: BinKind::Hourly, bins }
}

/// Flight counts per weekday; exposure is 24 h per matching day in the span.
pub fn weekday_profile(records: &[FlightRecord]) -> BinProfile {
    let mut exposure = [0.0_f64; 7];
    if let Some((first, last)) = date_span(records) {
        for day in first.iter_days().take_while(|d| *d <= last) {
            exposure[day.weekday().num_days_from_monday() as usize] += 24.0;
        }
    }
    let mut counts = [0_u64; 7];
    for r in records {
        counts[r.entry_time.weekday().num_days_from_monday() as usize] += 1;
    }
    let bins = (0..7)
        .map(|d| Bin {
            label: WEEKDAY_LABELS[d].to_string(),
            index: d,
            count: counts[d],
            exposure: exposure[d],
        })
        .collect();
    BinProfile { kind: BinKind::Weekday, bins }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub homogeneous: bool,
}

fn check_alpha(alpha: f64) -> Result<(), ProfileError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(ProfileError::InvalidAlpha(alpha))
    }
}

/// Chi-square test that event counts are proportional to exposure.
///
/// `bins` holds `(count, exposure)` pairs. Expected counts below
/// `min_expected` make the test invalid; the offending bin indices are
/// reported so the caller can merge them.
pub fn homogeneity_test(
    bins: &[(u64, f64)],
    alpha: f64,
    min_expected: f64,
) -> Result<HomogeneityResult, ProfileError> {
    check_alpha(alpha)?;
    if bins.len() < 2 {
        return Err(ProfileError::TooFewBins(bins.len()));
    }
    if let Some(i) = bins.iter().position(|&(_, e)| !(e > 0.0)) {
        return Err(ProfileError::NonPositiveExposure(i));
    }
    let total: u64 = bins.iter().map(|&(c, _)| c).sum();
    if total == 0 {
        return Err(ProfileError::NoEvents);
    }
    let total_exposure: f64 = bins.iter().map(|&(_, e)| e).sum();
    let expected: Vec<f64> = bins.iter().map(|&(_, e)| total as f64 * e / total_exposure).collect();
    let sparse: Vec<usize> = expected
        .iter()
        .enumerate()
        .filter(|(_, &e)| e < min_expected)
        .map(|(i, _)| i)
        .collect();
    if !sparse.is_empty() {
        return Err(ProfileError::SparseBins { bins: sparse, min_expected });
    }
    let statistic: f64 = bins
        .iter()
        .zip(&expected)
        .map(|(&(o, _), &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = bins.len() - 1;
    let p_value = chi_square_sf(statistic, dof as f64);
    Ok(HomogeneityResult {
        statistic,
        dof,
        p_value,
        homogeneous: p_value >= alpha,
    })
}

/// Merges consecutive bins until each group's expected count reaches
/// `min_expected` (a short tail joins the last group).
pub fn merge_sparse_bins(bins: &[(u64, f64)], min_expected: f64) -> Vec<(u64, f64)> {
    let total: u64 = bins.iter().map(|&(c, _)| c).sum();
    let total_exposure: f64 = bins.iter().map(|&(_, e)| e).sum();
    if total == 0 || !(total_exposure > 0.0) {
        return bins.to_vec();
    }
    let per_hour = total as f64 / total_exposure;
    let mut groups: Vec<(u64, f64)> = Vec::new();
    let mut acc = (0_u64, 0.0_f64);
    for &(c, e) in bins {
        acc = (acc.0 + c, acc.1 + e);
        if acc.1 * per_hour >= min_expected {
            groups.push(acc);
            acc = (0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0 {
        match groups.last_mut() {
            Some(last) => *last = (last.0 + acc.0, last.1 + acc.1),
            None => groups.push(acc),
        }
    }
    groups
}

/// Homogeneity test after merging sparse bins. `None` when fewer than two
/// groups survive, i.e. the data cannot contradict homogeneity.
pub fn homogeneity_test_merged(
    bins: &[(u64, f64)],
    alpha: f64,
    min_expected: f64,
) -> Result<Option<HomogeneityResult>, ProfileError> {
    let groups = merge_sparse_bins(bins, min_expected);
    if groups.len() < 2 || groups.iter().all(|&(c, _)| c == 0) {
        check_alpha(alpha)?;
        return Ok(None);
    }
    homogeneity_test(&groups, alpha, min_expected).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodKind {
    Monthly,
    Hourly,
}

/// A run of bins judged rate-homogeneous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPeriod {
    pub kind: PeriodKind,
    /// Calendar index of the first bin (hour of day or 0-based month).
    pub start: usize,
    /// Calendar index of the last bin, inclusive. For hourly periods
    /// `end < start` means the period wraps past midnight.
    pub end: usize,
    /// Flights per hour of exposure.
    pub intensity: f64,
    pub n_events: u64,
    pub exposure: f64,
    /// Homogeneity p-value over the period's bins; `None` when untestable
    /// (single bin or too sparse).
    pub p_value: Option<f64>,
}

impl StationaryPeriod {
    /// Clock window `[start_hour, end_hour]` (inclusive bins) computed from
    /// an hourly profile, bypassing segmentation.
    pub fn hourly_window(
        profile: &BinProfile,
        start_hour: usize,
        end_hour: usize,
        alpha: f64,
        min_expected: f64,
    ) -> Result<Self, ProfileError> {
        if profile.kind != BinKind::Hourly {
            return Err(ProfileError::NotSegmentable(profile.kind));
        }
        for h in [start_hour, end_hour] {
            if h >= 24 {
                return Err(ProfileError::InvalidHour(h));
            }
        }
        let len = (end_hour + 24 - start_hour) % 24 + 1;
        let positions: Vec<usize> = (0..len).map(|k| (start_hour + k) % 24).collect();
        build_period(profile, PeriodKind::Hourly, &positions, alpha, min_expected)
    }

    /// Number of covered bins.
    pub fn len_bins(&self) -> usize {
        match self.kind {
            PeriodKind::Hourly => (self.end + 24 - self.start) % 24 + 1,
            PeriodKind::Monthly => (self.end + 12 - self.start) % 12 + 1,
        }
    }

    pub fn wraps(&self) -> bool {
        self.end < self.start
    }

    /// Human-readable span, `13:00-18:00` or `Jan-Feb`.
    pub fn label(&self) -> String {
        match self.kind {
            PeriodKind::Hourly => format!("{:02}:00-{:02}:00", self.start, self.end + 1),
            PeriodKind::Monthly => format!("{}-{}", MONTH_LABELS[self.start], MONTH_LABELS[self.end]),
        }
    }
}

fn bin_pairs(profile: &BinProfile, positions: &[usize]) -> Vec<(u64, f64)> {
    positions
        .iter()
        .map(|&i| (profile.bins[i].count, profile.bins[i].exposure))
        .collect()
}

fn build_period(
    profile: &BinProfile,
    kind: PeriodKind,
    positions: &[usize],
    alpha: f64,
    min_expected: f64,
) -> Result<StationaryPeriod, ProfileError> {
    let pairs = bin_pairs(profile, positions);
    let n_events: u64 = pairs.iter().map(|p| p.0).sum();
    let exposure: f64 = pairs.iter().map(|p| p.1).sum();
    let p_value = homogeneity_test_merged(&pairs, alpha, min_expected)?.map(|r| r.p_value);
    let first = &profile.bins[positions[0]];
    let last = &profile.bins[*positions.last().expect("non-empty period")];
    Ok(StationaryPeriod {
        kind,
        start: first.index,
        end: last.index,
        intensity: if exposure > 0.0 { n_events as f64 / exposure } else { 0.0 },
        n_events,
        exposure,
        p_value,
    })
}

/// Splits a monthly or hourly profile into stationary periods.
///
/// A left-to-right pass extends the current period while the homogeneity
/// test over the candidate (sparse bins merged) accepts at `alpha`. A second
/// pass repeatedly joins the adjacent pair of periods whose union is most
/// homogeneous, as long as the union still accepts; for hourly profiles the
/// last and first periods count as adjacent, so quiet spans can wrap past
/// midnight. Every bin lands in exactly one period.
pub fn segment_stationary(
    profile: &BinProfile,
    alpha: f64,
    min_expected: f64,
) -> Result<Vec<StationaryPeriod>, ProfileError> {
    check_alpha(alpha)?;
    let kind = match profile.kind {
        BinKind::Monthly => PeriodKind::Monthly,
        BinKind::Hourly => PeriodKind::Hourly,
        BinKind::Weekday => return Err(ProfileError::NotSegmentable(BinKind::Weekday)),
    };
    if profile.bins.is_empty() || !(profile.total_exposure() > 0.0) {
        return Err(ProfileError::EmptyProfile);
    }
    let accepts = |positions: &[usize]| -> Result<Option<f64>, ProfileError> {
        let r = homogeneity_test_merged(&bin_pairs(profile, positions), alpha, min_expected)?;
        Ok(match r {
            None => Some(1.0),
            Some(r) if r.homogeneous => Some(r.p_value),
            Some(_) => None,
        })
    };

    // greedy pass
    let mut periods: Vec<Vec<usize>> = Vec::new();
    let mut current = vec![0];
    for i in 1..profile.bins.len() {
        current.push(i);
        if accepts(&current)?.is_none() {
            current.pop();
            periods.push(std::mem::replace(&mut current, vec![i]));
        }
    }
    periods.push(current);

    // merge pass
    let wrap = kind == PeriodKind::Hourly;
    loop {
        let n = periods.len();
        if n < 2 {
            break;
        }
        let pair_count = if wrap && n > 2 { n } else { n - 1 };
        let mut best: Option<(usize, f64)> = None;
        for j in 0..pair_count {
            let k = (j + 1) % n;
            let union: Vec<usize> = periods[j].iter().chain(&periods[k]).copied().collect();
            if let Some(p) = accepts(&union)? {
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((j, p));
                }
            }
        }
        let Some((j, _)) = best else { break };
        let k = (j + 1) % n;
        let tail = periods.remove(k);
        let j = if k < j { j - 1 } else { j };
        periods[j].extend(tail);
    }

    if periods.len() == 1 {
        periods[0].sort_unstable();
    }
    // keep output ordered by the position of the first non-wrapping bin
    periods.sort_by_key(|p| if p.len() > 1 && p[0] > p[p.len() - 1] { usize::MAX } else { p[0] });
    periods
        .iter()
        .map(|positions| build_period(profile, kind, positions, alpha, min_expected))
        .collect()
}

/// Serializes periods as the segmentation JSON array.
pub fn periods_to_json(periods: &[StationaryPeriod]) -> serde_json::Value {
    serde_json::Value::Array(
        periods
            .iter()
            .map(|p| {
                serde_json::json!({
                    "kind": p.kind,
                    "start": p.start,
                    "end": p.end,
                    "label": p.label(),
                    "intensity": p.intensity,
                    "n_events": p.n_events,
                    "p_value": p.p_value,
                })
            })
            .collect(),
    )
}
