//! CSV files with a provenance header, and the pulse file format.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lindblad::PiecewiseControl;
use crate::model::FrequencyConvention;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies the code and configuration that produced a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub version: &'static str,
}

impl Provenance {
    pub fn new(config_hash: String) -> Self {
        Provenance {
            config_hash,
            version: VERSION,
        }
    }

    pub fn header(&self) -> String {
        format!("# tlsctl {}\n# config_sha256 {}\n", self.version, self.config_hash)
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("csv: {other:?}")),
    }
}

/// Writes `# …` provenance lines followed by a header row and `rows`.
pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(prov.header().as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest string that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub const PULSE_HEADER: [&str; 4] = ["t_start_ns", "t_end_ns", "delta_rad_per_ns", "delta_mhz"];

pub fn write_pulse_csv(
    path: &Path,
    prov: &Provenance,
    control: &PiecewiseControl,
    convention: FrequencyConvention,
) -> Result<()> {
    let dt = control.dt();
    let rows: Vec<Vec<String>> = control
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            vec![
                num(j as f64 * dt),
                num((j + 1) as f64 * dt),
                num(v),
                num(convention.rad_per_ns_to_mhz(v)),
            ]
        })
        .collect();
    write_csv(path, prov, &PULSE_HEADER, &rows)
}

/// Reads a pulse written by [`write_pulse_csv`]. Only the time columns and
/// `delta_rad_per_ns` are used; slices must be contiguous and equal.
pub fn read_pulse_csv(path: &Path) -> Result<PiecewiseControl> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let headers = r.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column `{name}`", path.display())))
    };
    let (c0, c1, cv) = (col("t_start_ns")?, col("t_end_ns")?, col("delta_rad_per_ns")?);
    let mut slices = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("{}: bad number in row {}", path.display(), line + 1)))
        };
        slices.push((get(c0)?, get(c1)?, get(cv)?));
    }
    let Some(&(_, total, _)) = slices.last() else {
        return Err(Error::Parse(format!("{}: pulse has no slices", path.display())));
    };
    let dt = total / slices.len() as f64;
    for (j, &(a, b, _)) in slices.iter().enumerate() {
        let tol = 1e-9 * total;
        if (a - j as f64 * dt).abs() > tol || (b - (j + 1) as f64 * dt).abs() > tol {
            return Err(Error::Parse(format!(
                "{}: slice {} is not on a uniform grid",
                path.display(),
                j + 1
            )));
        }
    }
    PiecewiseControl::new(total, slices.into_iter().map(|s| s.2).collect())
}
