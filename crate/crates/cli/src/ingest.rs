//! Groups a timestamp log into one realization per day or week.
//!
//! Timestamps are ISO-8601 date-times (grouped by calendar day or ISO week)
//! or decimal hours counted from an arbitrary origin (grouped by
//! `floor(h / period)`). Event times are hours since the start of the period.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use ilr_depth::geometry::{PointProcess, TimeDomain};

use crate::io::{CliError, CliResult, Sample};

/// Share of unreadable rows above which ingestion fails.
pub const MAX_BAD_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Period {
    Day,
    Week,
}

impl Period {
    pub fn hours(self) -> f64 {
        match self {
            Period::Day => 24.0,
            Period::Week => 168.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOpts {
    pub time_column: String,
    pub split_by: Option<String>,
    pub period: Period,
    pub keep_empty: bool,
    /// Sub-window of the period, in hours; events outside it are dropped.
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum PeriodKey {
    Start(NaiveDate),
    Index(i64),
}

#[derive(Debug)]
pub struct Ingested {
    /// One sample per category (a single `None` entry without `split_by`),
    /// sorted by category.
    pub groups: Vec<(Option<String>, Sample)>,
    /// `(line, reason)` for each skipped row.
    pub bad_rows: Vec<(u64, String)>,
    pub dropped_outside_window: usize,
}

const DATE_TIME_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

fn parse_date_time(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    DATE_TIME_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn locate(raw: &str, period: Period) -> Result<(PeriodKey, f64), String> {
    let s = raw.trim();
    if let Ok(h) = s.parse::<f64>() {
        if !h.is_finite() {
            return Err(format!("non-finite hour value '{s}'"));
        }
        let idx = (h / period.hours()).floor();
        return Ok((PeriodKey::Index(idx as i64), h - idx * period.hours()));
    }
    let dt = parse_date_time(s).ok_or_else(|| format!("unreadable timestamp '{s}'"))?;
    let date = dt.date();
    let start = match period {
        Period::Day => date,
        Period::Week => date - Duration::days(date.weekday().num_days_from_monday() as i64),
    };
    let since = dt - start.and_hms_opt(0, 0, 0).expect("midnight exists");
    Ok((PeriodKey::Start(start), since.num_microseconds().expect("within a week") as f64 / 3.6e9))
}

fn period_id(key: PeriodKey, period: Period) -> String {
    match (key, period) {
        (PeriodKey::Start(d), Period::Day) => d.format("%Y-%m-%d").to_string(),
        (PeriodKey::Start(d), Period::Week) => d.format("%G-W%V").to_string(),
        (PeriodKey::Index(i), _) => i.to_string(),
    }
}

fn next_key(key: PeriodKey, period: Period) -> PeriodKey {
    match key {
        PeriodKey::Start(d) => PeriodKey::Start(d + Duration::days(period.hours() as i64 / 24)),
        PeriodKey::Index(i) => PeriodKey::Index(i + 1),
    }
}

pub fn ingest(reader: impl Read, o: &IngestOpts) -> CliResult<Ingested> {
    let domain = match o.window {
        Some((a, b)) if a >= 0.0 && b <= o.period.hours() => TimeDomain::new(a, b)?,
        Some((a, b)) => {
            return Err(CliError::Usage(format!("window [{a}, {b}] must lie within [0, {}]", o.period.hours())));
        }
        None => TimeDomain::new(0.0, o.period.hours())?,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Data(format!("cannot read header: {e}")))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Usage(format!("no column named '{name}' in header")))
    };
    let time_col = column(&o.time_column)?;
    let cat_col = o.split_by.as_deref().map(column).transpose()?;

    let mut groups: BTreeMap<Option<String>, BTreeMap<PeriodKey, Vec<f64>>> = BTreeMap::new();
    let mut bad_rows = Vec::new();
    let mut rows = 0usize;
    let mut dropped = 0usize;
    let mut kind: Option<bool> = None;
    for rec in rdr.records() {
        rows += 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                bad_rows.push((line, e.to_string()));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = rec
            .get(time_col)
            .ok_or_else(|| "missing timestamp field".to_string())
            .and_then(|raw| locate(raw, o.period));
        let (key, offset) = match parsed {
            Ok(v) => v,
            Err(reason) => {
                bad_rows.push((line, reason));
                continue;
            }
        };
        let decimal = matches!(key, PeriodKey::Index(_));
        if *kind.get_or_insert(decimal) != decimal {
            bad_rows.push((line, "mixes decimal hours with calendar timestamps".into()));
            continue;
        }
        let category = match cat_col {
            Some(c) => match rec.get(c) {
                Some(v) => Some(v.trim().to_string()),
                None => {
                    bad_rows.push((line, "missing category field".into()));
                    continue;
                }
            },
            None => None,
        };
        let periods = groups.entry(category).or_default();
        if !domain.contains(offset) {
            dropped += 1;
            periods.entry(key).or_default();
            continue;
        }
        periods.entry(key).or_default().push(offset);
    }
    if rows > 0 && bad_rows.len() as f64 > MAX_BAD_FRACTION * rows as f64 {
        let listed: Vec<String> = bad_rows.iter().take(5).map(|(l, r)| format!("line {l}: {r}")).collect();
        return Err(CliError::Data(format!(
            "{} of {rows} rows unreadable (limit {}%); first: {}",
            bad_rows.len(),
            MAX_BAD_FRACTION * 100.0,
            listed.join("; ")
        )));
    }

    let span = groups
        .values()
        .flat_map(|p| p.keys().copied())
        .fold(None, |acc: Option<(PeriodKey, PeriodKey)>, k| match acc {
            None => Some((k, k)),
            Some((lo, hi)) => Some((lo.min(k), hi.max(k))),
        });
    let mut out = Vec::new();
    for (category, mut periods) in groups {
        if o.keep_empty {
            if let Some((lo, hi)) = span {
                let mut k = lo;
                while k <= hi {
                    periods.entry(k).or_default();
                    k = next_key(k, o.period);
                }
            }
        }
        let mut sample = Sample::default();
        for (key, events) in periods {
            if events.is_empty() && !o.keep_empty {
                continue;
            }
            sample.push(period_id(key, o.period), PointProcess::from_unsorted(domain, events)?);
        }
        out.push((category, sample));
    }
    Ok(Ingested { groups: out, bad_rows, dropped_outside_window: dropped })
}
