//! CSV persistence. Floats are written in shortest round-trip form; empty
//! cells are missing values.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dynamics::{CameraInput, Vec2, Vec3};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::scenario::{LogRecord, MonteCarloReport, RunResult};

/// Measurement-log columns; `chi` is optional on input.
pub const LOG_COLUMNS: [&str; 13] = ["t", "x", "y", "chi", "vx", "vy", "vz", "wx", "wy", "wz", "ax", "ay", "az"];

/// Columns appended to the log columns in a run file.
pub const RUN_EXTRA_COLUMNS: [&str; 9] =
    ["x_hat", "y_hat", "chi_hat", "z", "sigma1", "gain_check", "stack_updated", "x_true", "y_true"];

pub const DIAGNOSTICS_COLUMNS: [&str; 5] = ["t", "sigma1", "sigma_bar", "update_flag", "pe_window_integral"];

/// Headered numeric table with optional cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// All cells of a column; `None` if the column is absent.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.headers).map_err(csv_write)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default())).map_err(csv_write)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    /// Parses a table. `origin` names the source in error messages.
    pub fn read_from<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
        let parse_err = |line: usize, msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };
        let headers: Vec<String> =
            rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
        if headers.iter().all(|h| h.is_empty()) {
            return Err(parse_err(1, "missing header".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != headers.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", headers.len(), rec.len())));
            }
            let row = rec
                .iter()
                .zip(&headers)
                .map(|(cell, h)| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| parse_err(line, format!("column `{h}`: bad number `{cell}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?, path)
    }
}

fn csv_write(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Run time series: log columns (measured point and input, true `chi`) plus the estimates.
pub fn run_table(run: &RunResult) -> Table {
    let mut t = Table::new(LOG_COLUMNS.iter().chain(RUN_EXTRA_COLUMNS.iter()).copied());
    for s in &run.steps {
        let u = &s.input;
        t.push(vec![
            Some(s.t),
            Some(s.s[0]),
            Some(s.s[1]),
            s.chi_true,
            Some(u.v[0]),
            Some(u.v[1]),
            Some(u.v[2]),
            Some(u.omega[0]),
            Some(u.omega[1]),
            Some(u.omega[2]),
            Some(u.v_dot[0]),
            Some(u.v_dot[1]),
            Some(u.v_dot[2]),
            s.s_hat.map(|p| p[0]),
            s.s_hat.map(|p| p[1]),
            Some(s.chi_hat),
            s.z(),
            Some(s.sigma1),
            s.gain_check.map(flag),
            Some(flag(s.updated)),
            s.s_true.map(|p| p[0]),
            s.s_true.map(|p| p[1]),
        ]);
    }
    t
}

pub fn diagnostics_table(run: &RunResult) -> Table {
    let mut t = Table::new(DIAGNOSTICS_COLUMNS);
    for s in &run.steps {
        t.push(vec![Some(s.t), Some(s.sigma1), Some(s.sigma_bar), Some(flag(s.updated)), Some(s.pe_window_integral)]);
    }
    t
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Flat `key = value` summary.
pub fn metrics_summary(metrics: Option<&MetricsReport>, n_diverged: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("rmse_m = {}\n", fmt_opt(metrics.map(|m| m.rmse_m))));
    out.push_str(&format!("mape_pct = {}\n", fmt_opt(metrics.map(|m| m.mape_pct))));
    out.push_str(&format!("conv_time_s = {}\n", fmt_opt(metrics.and_then(|m| m.conv_time_s))));
    out.push_str(&format!("n_diverged = {n_diverged}\n"));
    if let Some(m) = metrics {
        out.push_str(&format!("window_start_s = {}\nwindow_end_s = {}\n", m.window.t_start, m.window.t_end));
    }
    out
}

pub fn monte_carlo_summary(rep: &MonteCarloReport) -> String {
    format!(
        "rmse_m = {}\nmape_pct = {}\nconv_time_s = {}\nn_diverged = {}\nn_runs = {}\nn_converged = {}\n",
        fmt_opt(rep.rmse_m),
        fmt_opt(rep.mape_pct),
        fmt_opt(rep.conv_time_median_s),
        rep.n_diverged,
        rep.runs.len(),
        rep.n_converged
    )
}

/// Per-run metrics of a batch.
pub fn monte_carlo_table(rep: &MonteCarloReport) -> Table {
    let mut t = Table::new(["run", "rmse_m", "mape_pct", "conv_time_s", "diverged"]);
    for r in &rep.runs {
        t.push(vec![
            Some(r.index as f64),
            r.metrics.map(|m| m.rmse_m),
            r.metrics.map(|m| m.mape_pct),
            r.metrics.and_then(|m| m.conv_time_s),
            Some(flag(r.diverged)),
        ]);
    }
    t
}

/// Parses a `key = value` summary; `none` becomes `None`.
pub fn parse_summary(text: &str) -> Vec<(String, Option<f64>)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().parse::<f64>().ok()))
        .collect()
}

pub fn log_table(records: &[LogRecord]) -> Table {
    let mut t = Table::new(LOG_COLUMNS);
    for r in records {
        let u = &r.input;
        t.push(vec![
            Some(r.t),
            Some(r.s[0]),
            Some(r.s[1]),
            r.chi,
            Some(u.v[0]),
            Some(u.v[1]),
            Some(u.v[2]),
            Some(u.omega[0]),
            Some(u.omega[1]),
            Some(u.omega[2]),
            Some(u.v_dot[0]),
            Some(u.v_dot[1]),
            Some(u.v_dot[2]),
        ]);
    }
    t
}

/// Reads a measurement log (any table with the log columns; extra columns are ignored).
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    records_from_table(&Table::read(path)?, path)
}

pub fn records_from_table(table: &Table, origin: &Path) -> Result<Vec<LogRecord>> {
    let idx = |name: &str| {
        table
            .column_index(name)
            .ok_or_else(|| Error::MissingColumn { path: origin.to_path_buf(), column: name.to_string() })
    };
    let required: Vec<usize> =
        LOG_COLUMNS.iter().filter(|c| **c != "chi").map(|c| idx(c)).collect::<Result<Vec<_>>>()?;
    let chi = table.column_index("chi");
    table
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let mut v = [0.0; 12];
            for (slot, &i) in v.iter_mut().zip(&required) {
                *slot = row[i].ok_or_else(|| Error::Parse {
                    path: origin.to_path_buf(),
                    line: k + 2,
                    msg: format!("empty `{}`", table.headers[i]),
                })?;
            }
            Ok(LogRecord {
                t: v[0],
                s: Vec2::new(v[1], v[2]),
                chi: chi.and_then(|i| row[i]),
                input: CameraInput::new(
                    v[0],
                    Vec3::new(v[3], v[4], v[5]),
                    Vec3::new(v[6], v[7], v[8]),
                    Vec3::new(v[9], v[10], v[11]),
                ),
            })
        })
        .collect()
}
