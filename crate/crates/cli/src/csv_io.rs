//! CSV emission and parsing for snapshots, norm traces and sweeps.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses
//! back to the identical `f64`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use biofilm_core::analysis::{NormSample, NormTrace, SobolevNorms};
use biofilm_core::dissipativity::SweepResult;
use biofilm_core::solver::{FieldState, Grid1D};
use biofilm_core::PhaseState;

use crate::CliError;

pub const SNAPSHOT_HEADER: [&str; 6] = ["x", "B", "E", "D", "v", "L"];
pub const TRACE_HEADER: [&str; 5] = ["t", "l2", "h1", "h2", "energy"];
pub const SWEEP_HEADER: [&str; 8] = ["a", "a1", "a2", "a3", "rh1", "rh2", "rh3", "verdict"];

/// Prefix of the footer line carrying the refined transition.
pub const TRANSITION_FOOTER: &str = "# a* =";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_write_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => CliError::Io {
            path: path.to_path_buf(),
            source: io::Error::other(format!("{other:?}")),
        },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(rdr: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<(), CliError> {
    let header = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::Input(format!(
            "{}: header must be {}, found {}",
            path.display(),
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn parse_row(path: &Path, line: usize, record: &csv::StringRecord, width: usize) -> Result<Vec<f64>, CliError> {
    if record.len() != width {
        return Err(CliError::Input(format!(
            "{}: line {line} has {} fields, expected {width}",
            path.display(),
            record.len()
        )));
    }
    record
        .iter()
        .map(|field| {
            field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                CliError::Input(format!("{}: line {line}: {field:?} is not a finite number", path.display()))
            })
        })
        .collect()
}

pub fn snapshot_file_name(step: usize) -> String {
    format!("snapshot_{step:06}.csv")
}

pub fn write_snapshot(path: &Path, grid: &Grid1D<f64>, state: &FieldState<f64>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(SNAPSHOT_HEADER).map_err(|e| csv_write_err(path, e))?;
    for (i, u) in state.cells.iter().enumerate() {
        let row = [grid.center(i), u.b, u.e, u.d, u.v, u.liquid_fraction()].map(num);
        w.write_record(&row).map_err(|e| csv_write_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `snapshot_{step:06}.csv` into `dir`.
pub fn write_snapshot_in(dir: &Path, grid: &Grid1D<f64>, state: &FieldState<f64>) -> Result<PathBuf, CliError> {
    let path = dir.join(snapshot_file_name(state.step));
    write_snapshot(&path, grid, state)?;
    Ok(path)
}

/// Cell centres and states; `L` is read but must agree with `1 − (B+E+D)`.
pub fn read_snapshot(path: &Path) -> Result<(Vec<f64>, Vec<PhaseState<f64>>), CliError> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &SNAPSHOT_HEADER)?;
    let mut xs = Vec::new();
    let mut cells = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let r = parse_row(path, i + 2, &rec, 6)?;
        xs.push(r[0]);
        cells.push(PhaseState::new(r[1], r[2], r[3], r[4]));
    }
    Ok((xs, cells))
}

pub struct TraceWriter {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut inner = writer(path)?;
        inner.write_record(TRACE_HEADER).map_err(|e| csv_write_err(path, e))?;
        Ok(TraceWriter {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn push(&mut self, s: &NormSample<f64>) -> Result<(), CliError> {
        self.inner
            .write_record([s.t, s.l2, s.h1, s.h2, s.energy].map(num))
            .map_err(|e| csv_write_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| io_err(&self.path, e))
    }
}

pub fn write_trace(path: &Path, trace: &NormTrace<f64>) -> Result<(), CliError> {
    let mut w = TraceWriter::create(path)?;
    for s in trace.samples() {
        w.push(s)?;
    }
    w.finish()
}

/// Reads a trace; the `energy` column must equal `½ h2²`. The file carries
/// no grid spacing, so `dx` is set to zero.
pub fn read_trace(path: &Path) -> Result<NormTrace<f64>, CliError> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &TRACE_HEADER)?;
    let mut trace = NormTrace::new(0.0);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let r = parse_row(path, line, &rec, 5)?;
        let sample = NormSample::new(
            r[0],
            SobolevNorms {
                l2: r[1],
                h1: r[2],
                h2: r[3],
            },
        );
        let tol = 1e-12 * sample.energy.abs().max(f64::MIN_POSITIVE);
        if (sample.energy - r[4]).abs() > tol {
            return Err(CliError::Input(format!(
                "{}: line {line}: energy {} differs from h2²/2 = {}",
                path.display(),
                r[4],
                sample.energy
            )));
        }
        trace
            .push(sample)
            .map_err(|e| CliError::Input(format!("{}: line {line}: {e}", path.display())))?;
    }
    Ok(trace)
}

pub fn write_sweep(path: &Path, result: &SweepResult<f64>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_HEADER).map_err(|e| csv_write_err(path, e))?;
    for row in &result.rows {
        let c = row.report.coefficients;
        let f = row.report.rh.as_array();
        let record = [
            num(row.a),
            num(c.a1),
            num(c.a2),
            num(c.a3),
            f[0].to_string(),
            f[1].to_string(),
            f[2].to_string(),
            row.report.verdict.to_string(),
        ];
        w.write_record(&record).map_err(|e| csv_write_err(path, e))?;
    }
    let mut inner = w
        .into_inner()
        .map_err(|e| io_err(path, io::Error::other(e.to_string())))?;
    let footer = if result.transitions.is_empty() {
        format!("{TRANSITION_FOOTER} none\n")
    } else {
        let points: Vec<String> = result.transitions.iter().map(|t| num(t.point())).collect();
        format!("{TRANSITION_FOOTER} {}\n", points.join(" "))
    };
    inner.write_all(footer.as_bytes()).map_err(|e| io_err(path, e))?;
    inner.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCsvRow {
    pub a: f64,
    pub coefficients: [f64; 3],
    pub flags: [bool; 3],
    pub verdict: bool,
}

/// Rows and the transition points from the footer.
pub fn read_sweep(path: &Path) -> Result<(Vec<SweepCsvRow>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    let transitions = text
        .lines()
        .find_map(|l| l.strip_prefix(TRANSITION_FOOTER))
        .map(|rest| {
            rest.split_whitespace()
                .filter(|s| *s != "none")
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()
        .map_err(|e| CliError::Input(format!("{}: bad footer: {e}", path.display())))?
        .unwrap_or_default();

    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &SWEEP_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = i + 2;
        let bad = || CliError::Input(format!("{}: line {line} is malformed", path.display()));
        if rec.len() != SWEEP_HEADER.len() {
            return Err(bad());
        }
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad());
        let b = |k: usize| rec[k].parse::<bool>().map_err(|_| bad());
        rows.push(SweepCsvRow {
            a: f(0)?,
            coefficients: [f(1)?, f(2)?, f(3)?],
            flags: [b(4)?, b(5)?, b(6)?],
            verdict: b(7)?,
        });
    }
    Ok((rows, transitions))
}
