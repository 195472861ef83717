//! Flight-plan transit records: parsing, validation, canonical dump and
//! per-route grouping.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column order of the canonical record dump.
pub const CANONICAL_COLUMNS: [&str; 8] = [
    "date",
    "entry_time",
    "entry_point",
    "exit_point",
    "aircraft_type",
    "flight_code",
    "origin",
    "destination",
];

const DATE_FORMAT: &str = "%Y-%m-%d";
const TIME_FORMAT: &str = "%H:%M";

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("failed to read record source: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema field `{field}` expects column `{column}`, which is not in the header")]
    MissingColumn { field: &'static str, column: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("failed to write records: {0}")]
    Write(String),
}

/// Ordered (entry point, exit point) pair identifying an air route.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteKey {
    pub entry_point: String,
    pub exit_point: String,
}

impl RouteKey {
    pub fn new(entry_point: impl Into<String>, exit_point: impl Into<String>) -> Self {
        Self {
            entry_point: entry_point.into(),
            exit_point: exit_point.into(),
        }
    }

    /// Entry and exit at the same point.
    pub fn is_degenerate(&self) -> bool {
        self.entry_point == self.exit_point
    }

    /// Parses `ENTRY-EXIT`. Points themselves may not contain `-`.
    pub fn parse(s: &str) -> Option<Self> {
        let (a, b) = s.split_once('-')?;
        let (a, b) = (a.trim(), b.trim());
        (!a.is_empty() && !b.is_empty() && !b.contains('-')).then(|| Self::new(a, b))
    }
}

impl fmt::Display for RouteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.entry_point, self.exit_point)
    }
}

/// One transit through the FIR as registered in a flight-plan report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub registration_date: NaiveDate,
    pub aircraft_type: String,
    pub flight_code: String,
    pub origin: String,
    pub destination: String,
    pub entry_point: String,
    pub exit_point: String,
    /// Time of entry into the FIR, minute resolution.
    pub entry_time: NaiveDateTime,
}

impl FlightRecord {
    pub fn route_key(&self) -> RouteKey {
        route_key(self)
    }
}

pub fn route_key(record: &FlightRecord) -> RouteKey {
    RouteKey::new(record.entry_point.clone(), record.exit_point.clone())
}

/// Column names for each record field, resolved against the file header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    /// Field separator, usually `,` or `;`.
    pub delimiter: char,
    pub date: String,
    pub entry_point: String,
    pub exit_point: String,
    pub entry_time: String,
    pub aircraft_type: Option<String>,
    pub flight_code: Option<String>,
    pub origin: Option<String>,
    pub destination: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            delimiter: ',',
            date: "date".into(),
            entry_point: "entry_point".into(),
            exit_point: "exit_point".into(),
            entry_time: "entry_time".into(),
            aircraft_type: Some("aircraft_type".into()),
            flight_code: Some("flight_code".into()),
            origin: Some("origin".into()),
            destination: Some("destination".into()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ColumnMap {
    date: usize,
    entry_point: usize,
    exit_point: usize,
    entry_time: usize,
    aircraft_type: Option<usize>,
    flight_code: Option<usize>,
    origin: Option<usize>,
    destination: Option<usize>,
}

impl Schema {
    fn resolve(&self, header: &csv::StringRecord) -> Result<ColumnMap, RecordsError> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let required = |field: &'static str, name: &String| {
            find(name).ok_or_else(|| RecordsError::MissingColumn {
                field,
                column: name.clone(),
            })
        };
        // Optional columns absent from the header default to empty tokens.
        let optional = |name: &Option<String>| name.as_deref().and_then(find);
        Ok(ColumnMap {
            date: required("date", &self.date)?,
            entry_point: required("entry_point", &self.entry_point)?,
            exit_point: required("exit_point", &self.exit_point)?,
            entry_time: required("entry_time", &self.entry_time)?,
            aircraft_type: optional(&self.aircraft_type),
            flight_code: optional(&self.flight_code),
            origin: optional(&self.origin),
            destination: optional(&self.destination),
        })
    }
}

/// A source line with the reason it was rejected or flagged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineIssue {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rejections: Vec<LineIssue>,
    /// Accepted lines worth a look, e.g. routes entering and leaving at the
    /// same point.
    pub warnings: Vec<LineIssue>,
}

/// Parses delimited flight records. Malformed lines are rejected
/// individually; the returned records are sorted by entry time (stable, so
/// ties keep file order).
pub fn parse_records<R: Read>(
    source: R,
    schema: &Schema,
) -> Result<(Vec<FlightRecord>, ParseReport), RecordsError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema.delimiter)?)
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header = reader.headers().map_err(csv_to_records_error)?.clone();
    let columns = schema.resolve(&header)?;

    let mut records = Vec::new();
    let mut report = ParseReport::default();
    let mut row = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(0, |p| p.line());
                match parse_row(&row, &columns) {
                    Ok(record) => {
                        if record.entry_point == record.exit_point {
                            report.warnings.push(LineIssue {
                                line,
                                reason: format!("degenerate route {}", record.route_key()),
                            });
                        }
                        report.accepted += 1;
                        records.push(record);
                    }
                    Err(reason) => {
                        report.rejected += 1;
                        report.rejections.push(LineIssue { line, reason });
                    }
                }
            }
            Err(err) => {
                if let csv::ErrorKind::Io(_) = err.kind() {
                    return Err(csv_to_records_error(err));
                }
                let line = err.position().map_or(0, |p| p.line());
                report.rejected += 1;
                report.rejections.push(LineIssue {
                    line,
                    reason: format!("unreadable line: {err}"),
                });
            }
        }
    }
    records.sort_by_key(|r| r.entry_time);
    Ok((records, report))
}

fn delimiter_byte(c: char) -> Result<u8, RecordsError> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| RecordsError::Header(format!("delimiter {c:?} is not a single ASCII byte")))
}

fn csv_to_records_error(err: csv::Error) -> RecordsError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => RecordsError::Io(e),
        other => RecordsError::Header(format!("{other:?}")),
    }
}

fn parse_row(row: &csv::StringRecord, cols: &ColumnMap) -> Result<FlightRecord, String> {
    let field = |idx: usize| row.get(idx).map(str::trim).unwrap_or("");
    let required = |idx: usize, name: &str| {
        let v = field(idx);
        if v.is_empty() {
            Err(format!("missing {name}"))
        } else {
            Ok(v.to_string())
        }
    };
    let optional = |idx: Option<usize>| idx.map(field).unwrap_or("").to_string();

    let date_raw = required(cols.date, "date")?;
    let registration_date = NaiveDate::parse_from_str(&date_raw, DATE_FORMAT)
        .map_err(|_| format!("invalid date {date_raw:?}"))?;
    let entry_point = required(cols.entry_point, "entry_point")?;
    let exit_point = required(cols.exit_point, "exit_point")?;
    let time_raw = required(cols.entry_time, "entry_time")?;
    let entry_time = parse_entry_time(&time_raw, registration_date)?;

    Ok(FlightRecord {
        registration_date,
        aircraft_type: optional(cols.aircraft_type),
        flight_code: optional(cols.flight_code),
        origin: optional(cols.origin),
        destination: optional(cols.destination),
        entry_point,
        exit_point,
        entry_time,
    })
}

/// Accepts `HH:MM` (composed with the registration date) or a full
/// `YYYY-MM-DDTHH:MM` / `YYYY-MM-DD HH:MM` timestamp whose date must equal
/// the registration date.
fn parse_entry_time(raw: &str, date: NaiveDate) -> Result<NaiveDateTime, String> {
    if let Ok(t) = NaiveTime::parse_from_str(raw, TIME_FORMAT) {
        return Ok(date.and_time(t));
    }
    for fmt in ["%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(ts) = NaiveDateTime::parse_from_str(raw, fmt) {
            if ts.date() != date {
                return Err(format!("entry_time date {} differs from registration date {date}", ts.date()));
            }
            return Ok(ts);
        }
    }
    Err(format!("invalid entry_time {raw:?}"))
}

/// Writes records in the canonical column order (comma separated, header
/// first, `HH:MM` entry times).
pub fn write_canonical_csv<W: Write>(records: &[FlightRecord], sink: W) -> Result<(), RecordsError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    let write_err = |e: csv::Error| RecordsError::Write(e.to_string());
    writer.write_record(CANONICAL_COLUMNS).map_err(write_err)?;
    for r in records {
        let date = r.registration_date.format(DATE_FORMAT).to_string();
        let time = r.entry_time.format(TIME_FORMAT).to_string();
        writer
            .write_record([
                date.as_str(),
                time.as_str(),
                &r.entry_point,
                &r.exit_point,
                &r.aircraft_type,
                &r.flight_code,
                &r.origin,
                &r.destination,
            ])
            .map_err(write_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Splits time-ordered records by route; each group keeps the input order.
pub fn group_by_route(records: &[FlightRecord]) -> BTreeMap<RouteKey, Vec<FlightRecord>> {
    let mut groups: BTreeMap<RouteKey, Vec<FlightRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.route_key()).or_default().push(r.clone());
    }
    groups
}
