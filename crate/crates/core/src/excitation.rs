//! History stack, auxiliary stack, and excitation measures.
//!
//! The history stack holds `M - 1` recorded samples used by the
//! concurrent-learning sums; the current sample plays the role of entry `M`
//! and is supplied separately by the observers. The auxiliary stack is a
//! sliding window over the `N` most recent samples from which the most
//! informative `M - 1` are drawn whenever their total information clears
//! `epsilon`.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::{excitation, omega_row, CameraInput, Vec2, Vec3};
use crate::error::{Error, Result};

/// One recorded sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StackEntry {
    pub t: f64,
    pub s: Vec2,
    pub input: CameraInput,
    /// Numerical image-point derivative; required by the full-order and
    /// differential reduced-order observers.
    pub s_dot_bar: Option<Vec2>,
    /// True inverse depth at `t`, when known. Diagnostics only.
    pub chi_true: Option<f64>,
    info: f64,
}

impl StackEntry {
    pub fn new(t: f64, s: Vec2, input: CameraInput) -> Self {
        let info = excitation(&s, &input.v);
        Self { t, s, input, s_dot_bar: None, chi_true: None, info }
    }

    /// The zero tuple stacks are initialized with.
    pub fn zero() -> Self {
        let mut e = Self::new(0.0, Vec2::zeros(), CameraInput::at_rest(0.0));
        e.s_dot_bar = Some(Vec2::zeros());
        e
    }

    pub fn with_derivative(mut self, s_dot_bar: Vec2) -> Self {
        self.s_dot_bar = Some(s_dot_bar);
        self
    }

    pub fn with_truth(mut self, chi: f64) -> Self {
        self.chi_true = Some(chi);
        self
    }

    /// `Omega_j Omega_j^T`.
    pub fn info(&self) -> f64 {
        self.info
    }

    pub fn omega_row(&self) -> Vec2 {
        omega_row(&self.s, &self.input.v)
    }

    pub fn v(&self) -> &Vec3 {
        &self.input.v
    }

    /// `theta_j = [x_j, y_j, -(x_j^2 + y_j^2) / 2]`.
    pub fn theta(&self) -> Vec3 {
        theta(&self.s)
    }
}

pub fn theta(s: &Vec2) -> Vec3 {
    Vec3::new(s[0], s[1], -0.5 * (s[0] * s[0] + s[1] * s[1]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryStack {
    capacity: usize,
    epsilon: f64,
    entries: Vec<StackEntry>,
    sigma_bar: f64,
    replacements: usize,
}

impl HistoryStack {
    /// `capacity` is `M - 1`.
    pub fn new(capacity: usize, epsilon: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("history stack needs capacity >= 1".into()));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self { capacity, epsilon, entries: Vec::with_capacity(capacity), sigma_bar: 0.0, replacements: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    /// Fully populated with a positive information sum.
    pub fn is_complete(&self) -> bool {
        self.is_full() && self.sigma1() > 0.0
    }

    /// Number of gated replacements so far.
    pub fn replacements(&self) -> usize {
        self.replacements
    }

    /// Sum of `Omega_j Omega_j^T` over the stored entries.
    pub fn sigma1(&self) -> f64 {
        self.entries.iter().map(StackEntry::info).sum()
    }

    /// Largest `Omega_j Omega_j^T` of any entry ever stored.
    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    fn store(&mut self, e: StackEntry) {
        self.sigma_bar = self.sigma_bar.max(e.info());
        self.entries.push(e);
    }

    /// Checks that every entry carries what the given consumer needs.
    pub fn require_derivatives(&self) -> Result<()> {
        match self.entries.iter().position(|e| e.s_dot_bar.is_none()) {
            Some(j) => Err(Error::MalformedStack(format!("entry {j} has no image-point derivative"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryStack {
    capacity: usize,
    entries: VecDeque<StackEntry>,
}

impl AuxiliaryStack {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("auxiliary stack needs capacity >= 1".into()));
        }
        Ok(Self { capacity, entries: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Oldest first.
    pub fn entries(&self) -> impl DoubleEndedIterator<Item = &StackEntry> + ExactSizeIterator {
        self.entries.iter()
    }

    pub fn push(&mut self, e: StackEntry) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(e);
    }

    /// The `count` entries with the largest information, ordered by information
    /// descending with newer entries first among ties. Zero tuples pad the
    /// result while the window is still short.
    pub fn most_informative(&self, count: usize) -> Vec<StackEntry> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| match self.entries[b].info().total_cmp(&self.entries[a].info()) {
            Ordering::Equal => b.cmp(&a),
            o => o,
        });
        let mut picked: Vec<StackEntry> = order.into_iter().take(count).map(|i| self.entries[i]).collect();
        picked.resize(count, StackEntry::zero());
        picked
    }
}

/// Concurrent-learning stack update: returns `true` when the
/// history stack was replaced.
pub fn push_measurement(aux: &mut AuxiliaryStack, hist: &mut HistoryStack, entry: StackEntry) -> bool {
    if !hist.is_full() {
        hist.store(entry);
    }
    aux.push(entry);
    if !hist.is_full() {
        return false;
    }
    let candidates = aux.most_informative(hist.capacity);
    let total: f64 = candidates.iter().map(StackEntry::info).sum();
    if total >= hist.epsilon {
        hist.entries.clear();
        for e in candidates {
            hist.store(e);
        }
        hist.replacements += 1;
        true
    } else {
        false
    }
}

/// The history and auxiliary stack of one observer.
#[derive(Clone, Debug, PartialEq)]
pub struct StackPair {
    pub history: HistoryStack,
    pub auxiliary: AuxiliaryStack,
}

impl StackPair {
    /// `history` is `M - 1`, `auxiliary` is `N`.
    pub fn new(history: usize, auxiliary: usize, epsilon: f64) -> Result<Self> {
        if auxiliary < history {
            return Err(Error::Config(format!(
                "auxiliary stack ({auxiliary}) must be at least as large as the history stack ({history})"
            )));
        }
        Ok(Self { history: HistoryStack::new(history, epsilon)?, auxiliary: AuxiliaryStack::new(auxiliary)? })
    }

    pub fn push(&mut self, entry: StackEntry) -> bool {
        push_measurement(&mut self.auxiliary, &mut self.history, entry)
    }
}

/// Trapezoidal integral of a sampled signal over `[t0, t1]`, with linear
/// interpolation when the limits fall between samples.
pub fn trapezoid(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<f64> {
    let n = times.len();
    if n < 2 || values.len() != n {
        return Err(Error::InsufficientSamples { needed: 2, got: n.min(values.len()) });
    }
    let (lo, hi) = (times[0], times[n - 1]);
    let tol = 1e-9 * (hi - lo).abs().max(1.0);
    if !(t0 < t1) || t0 < lo - tol || t1 > hi + tol {
        return Err(Error::IntervalOutOfRange { t0, t1, lo, hi });
    }
    let (t0, t1) = (t0.max(lo), t1.min(hi));
    let interp = |k: usize, t: f64| {
        let w = (t - times[k]) / (times[k + 1] - times[k]);
        values[k] + w * (values[k + 1] - values[k])
    };
    let mut acc = 0.0;
    for k in 0..n - 1 {
        let (a, b) = (times[k], times[k + 1]);
        let ca = a.max(t0);
        let cb = b.min(t1);
        if cb - ca <= tol {
            continue;
        }
        let fa = if ca - a <= tol { values[k] } else { interp(k, ca) };
        let fb = if b - cb <= tol { values[k + 1] } else { interp(k, cb) };
        acc += 0.5 * (fa + fb) * (cb - ca);
    }
    Ok(acc)
}

/// `Omega Omega^T` along a series of (image point, linear velocity) pairs.
pub fn excitation_series<'a, I>(samples: I) -> Vec<f64>
where
    I: IntoIterator<Item = (&'a Vec2, &'a Vec3)>,
{
    samples.into_iter().map(|(s, v)| excitation(s, v)).collect()
}

/// Trapezoidal approximation of the persistence-of-excitation integral.
pub fn pe_integral(times: &[f64], info: &[f64], t0: f64, t1: f64) -> Result<f64> {
    trapezoid(times, info, t0, t1)
}

/// Information-sum summary of a history stack.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StackSnapshot {
    pub sigma1: f64,
    pub sigma_bar: f64,
    pub len: usize,
    pub updated: bool,
}

impl StackSnapshot {
    pub fn of(hist: &HistoryStack, updated: bool) -> Self {
        Self { sigma1: hist.sigma1(), sigma_bar: hist.sigma_bar(), len: hist.len(), updated }
    }
}
