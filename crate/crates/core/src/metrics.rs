//! Depth-error metrics. All metrics are in depth `Z = 1 / chi`, in meters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative-depth-error threshold for convergence, percent.
pub const DEFAULT_CONV_THRESHOLD_PCT: f64 = 5.0;

/// Closed time window `[t_start, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
}

impl Window {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        Self { t_start, t_end }
    }

    /// Everything.
    pub fn all() -> Self {
        Self { t_start: f64::NEG_INFINITY, t_end: f64::INFINITY }
    }

    /// The trailing `len` seconds of a run ending at `horizon`.
    pub fn tail(horizon: f64, len: f64) -> Self {
        Self { t_start: (horizon - len).max(0.0), t_end: horizon }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start - 1e-9 && t <= self.t_end + 1e-9
    }
}

/// Aligned depth series.
#[derive(Clone, Copy, Debug)]
pub struct DepthSeries<'a> {
    pub t: &'a [f64],
    pub truth: &'a [f64],
    pub est: &'a [f64],
}

impl<'a> DepthSeries<'a> {
    pub fn new(t: &'a [f64], truth: &'a [f64], est: &'a [f64]) -> Result<Self> {
        if t.len() != truth.len() || t.len() != est.len() {
            return Err(Error::Config(format!(
                "series lengths differ: t {}, truth {}, est {}",
                t.len(),
                truth.len(),
                est.len()
            )));
        }
        Ok(Self { t, truth, est })
    }

    /// `(truth, est)` pairs inside the window.
    pub fn in_window(&self, w: Window) -> impl Iterator<Item = (f64, f64)> + 'a {
        let (t, truth, est) = (self.t, self.truth, self.est);
        (0..t.len()).filter(move |&k| w.contains(t[k])).map(move |k| (truth[k], est[k]))
    }

    fn nonempty(&self, w: Window) -> Result<usize> {
        match self.in_window(w).count() {
            0 => Err(Error::EmptyWindow { t0: w.t_start, t1: w.t_end }),
            n => Ok(n),
        }
    }
}

/// Sum of squared depth errors and sample count; the pooled RMSE over several
/// runs is `sqrt(sum / count)` of the combined accumulators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorAccumulator {
    pub sum_sq: f64,
    pub sum_rel: f64,
    pub count: usize,
}

impl ErrorAccumulator {
    pub fn of(series: &DepthSeries<'_>, w: Window) -> Self {
        series.in_window(w).fold(Self::default(), |mut acc, (z, zh)| {
            acc.sum_sq += (zh - z) * (zh - z);
            acc.sum_rel += ((zh - z) / z).abs();
            acc.count += 1;
            acc
        })
    }

    pub fn merge(&mut self, other: &Self) {
        self.sum_sq += other.sum_sq;
        self.sum_rel += other.sum_rel;
        self.count += other.count;
    }

    pub fn rmse(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_sq / self.count as f64).sqrt())
    }

    pub fn mape(&self) -> Option<f64> {
        (self.count > 0).then(|| 100.0 * self.sum_rel / self.count as f64)
    }
}

pub fn rmse(series: &DepthSeries<'_>, w: Window) -> Result<f64> {
    let n = series.nonempty(w)?;
    let ss: f64 = series.in_window(w).map(|(z, zh)| (zh - z) * (zh - z)).sum();
    Ok((ss / n as f64).sqrt())
}

pub fn mape(series: &DepthSeries<'_>, w: Window) -> Result<f64> {
    let n = series.nonempty(w)?;
    let s: f64 = series.in_window(w).map(|(z, zh)| ((zh - z) / z).abs()).sum();
    Ok(100.0 * s / n as f64)
}

/// First sample time after which the relative depth error stays below
/// `threshold_pct` for every remaining sample. `None` if the last sample is
/// outside the threshold.
pub fn convergence_time(series: &DepthSeries<'_>, threshold_pct: f64) -> Option<f64> {
    let thr = threshold_pct / 100.0;
    let mut first = None;
    for k in (0..series.t.len()).rev() {
        let rel = ((series.est[k] - series.truth[k]) / series.truth[k]).abs();
        if rel < thr {
            first = Some(series.t[k]);
        } else {
            break;
        }
    }
    first
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_m: f64,
    pub mape_pct: f64,
    pub conv_time_s: Option<f64>,
    pub window: Window,
}

impl MetricsReport {
    pub fn compute(series: &DepthSeries<'_>, w: Window, threshold_pct: f64) -> Result<Self> {
        Ok(Self {
            rmse_m: rmse(series, w)?,
            mape_pct: mape(series, w)?,
            conv_time_s: convergence_time(series, threshold_pct),
            window: w,
        })
    }
}
