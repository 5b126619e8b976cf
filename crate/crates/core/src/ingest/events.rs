use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Permit,
    Crime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Location {
    /// WGS84 decimal degrees.
    Point { lat: f64, lon: f64 },
    /// Pre-aggregated record; bypasses the spatial join.
    BlockGroup(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEvent {
    pub date: NaiveDate,
    pub time: Option<NaiveTime>,
    pub location: Location,
    pub raw_type: String,
    pub kind: EventKind,
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudyWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn crimes() -> Self {
        Self::new(ymd(2006, 1, 1), ymd(2015, 12, 31))
    }

    pub fn permits() -> Self {
        Self::new(ymd(2006, 1, 1), ymd(2016, 5, 31))
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    /// Data rows read, excluding the header.
    pub rows: usize,
    pub skipped_out_of_window: usize,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    // Accept a trailing time part ("2010-07-04T12:00:00", "2010-07-04 12:00").
    let head = s.trim().get(..10)?;
    NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()
}

fn parse_time(s: &str) -> Option<NaiveTime> {
    let s = s.trim();
    NaiveTime::parse_from_str(s, "%H:%M:%S").or_else(|_| NaiveTime::parse_from_str(s, "%H:%M")).ok()
}

struct Columns {
    date: usize,
    time: Option<usize>,
    lat: Option<usize>,
    lon: Option<usize>,
    bg: Option<usize>,
    kind: usize,
}

fn columns(headers: &csv::StringRecord, path: &str, type_col: &str, want_time: bool) -> Result<Columns, IngestError> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn { path: path.to_string(), column: name.to_string() });
    let date = need("date")?;
    let kind = need(type_col)?;
    let bg = find("blockgroup_id");
    let (lat, lon) = (find("lat"), find("lon"));
    if bg.is_none() {
        need("lat")?;
        need("lon")?;
    }
    if want_time && bg.is_none() {
        need("time")?;
    }
    Ok(Columns { date, time: find("time"), lat, lon, bg, kind })
}

fn parse_events<R: Read>(reader: R, path: &str, kind: EventKind, window: StudyWindow) -> Result<Parsed<PointEvent>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).trim(csv::Trim::Fields).from_reader(reader);
    let file_err = |e: csv::Error| IngestError::File { path: path.to_string(), message: e.to_string() };
    let headers = rdr.headers().map_err(file_err)?.clone();
    let type_col = match kind {
        EventKind::Permit => "event_type",
        EventKind::Crime => "crime_type",
    };
    let cols = columns(&headers, path, type_col, kind == EventKind::Crime)?;

    let mut out = Parsed { records: Vec::new(), rows: 0, skipped_out_of_window: 0 };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            IngestError::row(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.rows += 1;
        let field = |i: usize| rec.get(i).unwrap_or("");

        let date = parse_date(field(cols.date)).ok_or_else(|| IngestError::row(path, line, format!("malformed date `{}`", field(cols.date))))?;
        let time = match cols.time.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => Some(parse_time(s).ok_or_else(|| IngestError::row(path, line, format!("malformed time `{s}`")))?),
        };
        let bg = cols.bg.map(field).filter(|s| !s.is_empty());
        let location = match bg {
            Some(id) => Location::BlockGroup(id.to_string()),
            None => {
                let coord = |i: Option<usize>, name: &str, lim: f64| -> Result<f64, IngestError> {
                    let raw = i.map(field).unwrap_or("");
                    let v: f64 = raw.parse().map_err(|_| IngestError::row(path, line, format!("malformed {name} `{raw}`")))?;
                    if !(v.abs() <= lim) {
                        return Err(IngestError::row(path, line, format!("{name} out of range")));
                    }
                    Ok(v)
                };
                let lat = coord(cols.lat, "latitude", 90.0)?;
                let lon = coord(cols.lon, "longitude", 180.0)?;
                Location::Point { lat, lon }
            }
        };
        let raw_type = field(cols.kind).to_string();
        if raw_type.is_empty() {
            return Err(IngestError::row(path, line, format!("empty {type_col}")));
        }
        if !window.contains(date) {
            out.skipped_out_of_window += 1;
            continue;
        }
        out.records.push(PointEvent { date, time, location, raw_type, kind });
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Permits: `date,lat,lon,event_type` or `date,blockgroup_id,event_type`.
/// Consecutive-day rows stay separate events.
pub fn parse_permits(path: &Path, window: StudyWindow) -> Result<Parsed<PointEvent>, IngestError> {
    parse_events(open(path)?, &path.display().to_string(), EventKind::Permit, window)
}

pub fn parse_permits_from<R: Read>(reader: R, window: StudyWindow) -> Result<Parsed<PointEvent>, IngestError> {
    parse_events(reader, "<permits>", EventKind::Permit, window)
}

/// Crimes: `date,time,lat,lon,crime_type`; time may be empty.
pub fn parse_crimes(path: &Path, window: StudyWindow) -> Result<Parsed<PointEvent>, IngestError> {
    parse_events(open(path)?, &path.display().to_string(), EventKind::Crime, window)
}

pub fn parse_crimes_from<R: Read>(reader: R, window: StudyWindow) -> Result<Parsed<PointEvent>, IngestError> {
    parse_events(reader, "<crimes>", EventKind::Crime, window)
}
