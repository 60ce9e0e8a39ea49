//! Plot-ready series for each figure panel.

use crate::error::{Error, Result};
use crate::io::Table;
use crate::scenario::RunResult;

pub const FIGURE_IDS: [&str; 11] = ["1a", "1b", "1c", "1d", "2a", "2b", "2c", "3a", "3b", "3c", "3d"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Panel {
    Depth,
    States,
    DepthError,
    Excitation,
    ExcitationUpdates,
    ExcitationSigma,
}

fn panel(id: &str) -> Option<Panel> {
    Some(match id {
        "1a" | "2a" | "3a" => Panel::Depth,
        "1b" | "3b" => Panel::States,
        "1c" | "2b" | "3c" => Panel::DepthError,
        "1d" => Panel::Excitation,
        "2c" => Panel::ExcitationUpdates,
        "3d" => Panel::ExcitationSigma,
        _ => return None,
    })
}

fn missing(what: &str, run: &RunResult) -> Error {
    Error::Config(format!("run `{}` has no {what} channel", run.name))
}

/// Builds the table behind panel `id`. Estimate columns carry the observer
/// name as a suffix when more than one run is given; runs must share a time grid.
pub fn export_figure_data(runs: &[&RunResult], id: &str) -> Result<Table> {
    let p = panel(id).ok_or_else(|| Error::UnknownFigure(id.to_string()))?;
    let first = *runs.first().ok_or_else(|| Error::Config("no runs to export".into()))?;
    let n = first.steps.len();
    for r in runs {
        if r.steps.len() != n || r.steps.iter().zip(&first.steps).any(|(a, b)| a.t != b.t) {
            return Err(Error::Config(format!("run `{}` is on a different time grid", r.name)));
        }
    }
    let suffix = |r: &RunResult| if runs.len() > 1 { format!("_{}", r.observer) } else { String::new() };

    let mut headers = vec!["t".to_string()];
    let mut cols: Vec<Vec<Option<f64>>> = vec![first.times().into_iter().map(Some).collect()];
    match p {
        Panel::Depth => {
            let truth: Vec<Option<f64>> = first.steps.iter().map(|s| s.depth_true()).collect();
            if truth.iter().any(Option::is_none) {
                return Err(missing("true depth", first));
            }
            headers.push("z_true".into());
            cols.push(truth);
            for r in runs {
                headers.push(format!("z_hat{}", suffix(r)));
                cols.push(r.steps.iter().map(|s| Some(s.depth_hat())).collect());
            }
        }
        Panel::States => {
            headers.extend(["x_true".to_string(), "y_true".to_string()]);
            cols.push(first.steps.iter().map(|s| Some(s.s_true.unwrap_or(s.s)[0])).collect());
            cols.push(first.steps.iter().map(|s| Some(s.s_true.unwrap_or(s.s)[1])).collect());
            for r in runs {
                if r.steps.iter().any(|s| s.s_hat.is_none()) {
                    return Err(missing("state estimate", r));
                }
                headers.push(format!("x_hat{}", suffix(r)));
                headers.push(format!("y_hat{}", suffix(r)));
                cols.push(r.steps.iter().map(|s| s.s_hat.map(|v| v[0])).collect());
                cols.push(r.steps.iter().map(|s| s.s_hat.map(|v| v[1])).collect());
            }
        }
        Panel::DepthError => {
            for r in runs {
                let err: Vec<Option<f64>> = r.steps.iter().map(|s| s.depth_true().map(|z| s.depth_hat() - z)).collect();
                if err.iter().any(Option::is_none) {
                    return Err(missing("true depth", r));
                }
                headers.push(format!("z_error{}", suffix(r)));
                cols.push(err);
            }
        }
        Panel::Excitation | Panel::ExcitationUpdates | Panel::ExcitationSigma => {
            headers.push("omega_omega_t".into());
            cols.push(first.steps.iter().map(|s| Some(s.info)).collect());
            if p == Panel::ExcitationUpdates {
                headers.push("stack_updated".into());
                cols.push(first.steps.iter().map(|s| Some(if s.updated { 1.0 } else { 0.0 })).collect());
            }
            if p == Panel::ExcitationSigma {
                headers.push("sigma1".into());
                cols.push(first.steps.iter().map(|s| Some(s.sigma1)).collect());
            }
        }
    }

    let mut table = Table::new(headers);
    for k in 0..n {
        table.push(cols.iter().map(|c| c[k]).collect());
    }
    Ok(table)
}
