//! Inter-arrival intervals for one route inside a stationary clock window.
//!
//! Each calendar day is handled on its own. The open spans between the
//! window edges and the first/last arrival are not intervals; they are
//! counted and kept as censored boundary data but never fitted. Ties at
//! minute resolution produce zero gaps, which are dropped and counted.

use std::io::Write;

use chrono::{NaiveDate, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{PeriodKind, StationaryPeriod};
use crate::records::{FlightRecord, RouteKey};

const MINUTES_PER_DAY: i64 = 24 * 60;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IntervalError {
    #[error("interval extraction needs an hourly period, got a monthly one")]
    NotHourly,
}

/// Bookkeeping for one clock window on one day that saw at least one
/// arrival. All values are whole minutes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub date: NaiveDate,
    /// Window start, minutes after midnight.
    pub start_minute: i64,
    /// Window end (exclusive), minutes after midnight.
    pub end_minute: i64,
    pub arrivals: usize,
    pub retained: usize,
    pub retained_sum: i64,
    pub zero_dropped: usize,
    /// Window start to first arrival.
    pub leading_span: i64,
    /// Last arrival to window end.
    pub trailing_span: i64,
}

impl WindowSummary {
    pub fn length(&self) -> i64 {
        self.end_minute - self.start_minute
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSample {
    pub route: RouteKey,
    pub period: StationaryPeriod,
    /// Positive gaps in minutes, in time order.
    pub intervals: Vec<f64>,
    pub n_zero_dropped: usize,
    pub n_boundary_dropped: usize,
    /// Censored boundary spans in minutes, leading then trailing per window.
    pub boundary_spans: Vec<f64>,
    pub windows: Vec<WindowSummary>,
}

impl IntervalSample {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// One-column CSV of the retained intervals.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "interval_minutes")?;
        for x in &self.intervals {
            writeln!(sink, "{x}")?;
        }
        Ok(())
    }

    /// Counts and window metadata, without the interval values themselves.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "route": self.route.to_string(),
            "period": self.period.label(),
            "n_intervals": self.intervals.len(),
            "n_zero_dropped": self.n_zero_dropped,
            "n_boundary_dropped": self.n_boundary_dropped,
            "n_windows": self.windows.len(),
            "boundary_spans": self.boundary_spans,
        })
    }
}

/// Minute-of-day windows `[lo, hi)` covered by an hourly period. Periods
/// that wrap past midnight are split at midnight so that no interval ever
/// crosses a day boundary.
fn day_windows(period: &StationaryPeriod) -> Vec<(i64, i64)> {
    let lo = period.start as i64 * 60;
    let hi = (period.end as i64 + 1) * 60;
    if period.len_bins() == 24 {
        vec![(0, MINUTES_PER_DAY)]
    } else if period.wraps() {
        vec![(0, hi), (lo, MINUTES_PER_DAY)]
    } else {
        vec![(lo, hi)]
    }
}

/// Extracts the route's inter-arrival intervals inside `period`, one day at
/// a time. `records` must be sorted by entry time.
pub fn extract_intervals(
    records: &[FlightRecord],
    route: &RouteKey,
    period: &StationaryPeriod,
) -> Result<IntervalSample, IntervalError> {
    if period.kind != PeriodKind::Hourly {
        return Err(IntervalError::NotHourly);
    }
    let windows = day_windows(period);
    let mut sample = IntervalSample {
        route: route.clone(),
        period: period.clone(),
        intervals: Vec::new(),
        n_zero_dropped: 0,
        n_boundary_dropped: 0,
        boundary_spans: Vec::new(),
        windows: Vec::new(),
    };

    let on_route = records
        .iter()
        .filter(|r| r.entry_point == route.entry_point && r.exit_point == route.exit_point);
    let mut day: Option<NaiveDate> = None;
    let mut minutes: Vec<i64> = Vec::new();
    for r in on_route {
        let d = r.entry_time.date();
        if day != Some(d) {
            if let Some(prev) = day {
                close_day(&mut sample, prev, &minutes, &windows);
            }
            day = Some(d);
            minutes.clear();
        }
        minutes.push(i64::from(r.entry_time.hour() * 60 + r.entry_time.minute()));
    }
    if let Some(prev) = day {
        close_day(&mut sample, prev, &minutes, &windows);
    }
    Ok(sample)
}

fn close_day(sample: &mut IntervalSample, date: NaiveDate, minutes: &[i64], windows: &[(i64, i64)]) {
    for &(lo, hi) in windows {
        let inside: Vec<i64> = minutes.iter().copied().filter(|m| (lo..hi).contains(m)).collect();
        let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
            continue;
        };
        let mut summary = WindowSummary {
            date,
            start_minute: lo,
            end_minute: hi,
            arrivals: inside.len(),
            retained: 0,
            retained_sum: 0,
            zero_dropped: 0,
            leading_span: first - lo,
            trailing_span: hi - last,
        };
        for gap in inside.windows(2).map(|w| w[1] - w[0]) {
            if gap == 0 {
                summary.zero_dropped += 1;
            } else {
                summary.retained += 1;
                summary.retained_sum += gap;
                sample.intervals.push(gap as f64);
            }
        }
        sample.n_zero_dropped += summary.zero_dropped;
        sample.n_boundary_dropped += 2;
        sample.boundary_spans.push(summary.leading_span as f64);
        sample.boundary_spans.push(summary.trailing_span as f64);
        sample.windows.push(summary);
    }
}
