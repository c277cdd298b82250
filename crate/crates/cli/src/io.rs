//! Realization files (one JSON object per line), CSV number formatting and
//! the error type shared by every command.

use std::io::{BufRead, Write};

use ilr_depth::geometry::{PointProcess, TimeDomain};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ilr_depth::Error> for CliError {
    fn from(e: ilr_depth::Error) -> Self {
        use ilr_depth::Error as E;
        match e {
            E::BoundViolation { .. } | E::InvalidIntensity(_) | E::Singular | E::Boundary { .. } => {
                CliError::Numeric(e.to_string())
            }
            E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Realizations sharing one observation window, with their ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub ids: Vec<String>,
    pub processes: Vec<PointProcess>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.processes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processes.is_empty()
    }

    pub fn domain(&self) -> Option<TimeDomain> {
        self.processes.first().map(PointProcess::domain)
    }

    pub fn push(&mut self, id: String, p: PointProcess) {
        self.ids.push(id);
        self.processes.push(p);
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    t1: f64,
    t2: f64,
    events: Vec<f64>,
}

pub fn read_realizations(reader: impl BufRead) -> CliResult<Sample> {
    let mut sample = Sample::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| CliError::Data(format!("line {}: {msg}", i + 1));
        let rec: Record = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let d = TimeDomain::new(rec.t1, rec.t2).map_err(|e| at(e.to_string()))?;
        if let Some(first) = sample.domain() {
            if first != d {
                return Err(at(format!(
                    "window [{}, {}] differs from the first record's [{}, {}]",
                    rec.t1,
                    rec.t2,
                    first.t1(),
                    first.t2()
                )));
            }
        }
        let p = PointProcess::new(d, rec.events).map_err(|e| at(e.to_string()))?;
        sample.push(rec.id, p);
    }
    Ok(sample)
}

pub fn write_realizations(mut w: impl Write, sample: &Sample) -> CliResult<()> {
    for (id, p) in sample.ids.iter().zip(&sample.processes) {
        let rec = Record { id: id.clone(), t1: p.domain().t1(), t2: p.domain().t2(), events: p.events().to_vec() };
        serde_json::to_writer(&mut w, &rec).map_err(|e| CliError::Data(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// `%.12g`: twelve significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e12)`.
pub fn fmt_num(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
