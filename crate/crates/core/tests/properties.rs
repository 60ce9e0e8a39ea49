use std::path::Path;

use cldepth::dynamics::{CameraInput, ChiProjection, Vec2, Vec3};
use cldepth::excitation::{StackEntry, StackPair};
use cldepth::io::Table;
use cldepth::metrics::{mape, rmse, DepthSeries, Window};
use proptest::prelude::*;

/// Entry with regressor row `(a, b)`: point at the origin, `v = (-a, -b, 0)`.
fn entry(t: f64, a: f64, b: f64) -> StackEntry {
    StackEntry::new(t, Vec2::zeros(), CameraInput::new(t, Vec3::new(-a, -b, 0.0), Vec3::zeros(), Vec3::zeros()))
}

/// Independent reference for the stack update: keep the window, sort by
/// information descending (newest first among ties), pad with zeros.
struct Reference {
    window: Vec<StackEntry>,
    history: Vec<StackEntry>,
    m: usize,
    n: usize,
    eps: f64,
}

impl Reference {
    fn push(&mut self, e: StackEntry) -> bool {
        if self.history.len() < self.m {
            self.history.push(e);
        }
        self.window.push(e);
        if self.window.len() > self.n {
            self.window.remove(0);
        }
        if self.history.len() < self.m {
            return false;
        }
        let mut idx: Vec<usize> = (0..self.window.len()).collect();
        idx.sort_by(|&i, &j| {
            let (a, b) = (self.window[i].info(), self.window[j].info());
            b.partial_cmp(&a).unwrap().then(j.cmp(&i))
        });
        let mut pick: Vec<StackEntry> = idx.iter().take(self.m).map(|&i| self.window[i]).collect();
        while pick.len() < self.m {
            pick.push(StackEntry::zero());
        }
        if pick.iter().map(|e| e.info()).sum::<f64>() >= self.eps {
            self.history = pick;
            true
        } else {
            false
        }
    }
}

fn push_sequence() -> impl Strategy<Value = (usize, usize, f64, Vec<(f64, f64)>)> {
    (1usize..6, 0usize..6, 0.0f64..8.0, prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..60))
        .prop_map(|(m, extra, eps, rows)| (m, m + extra, eps, rows))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn stack_update_matches_reference((m, n, eps, rows) in push_sequence()) {
        let mut pair = StackPair::new(m, n, eps).unwrap();
        let mut twin = pair.clone();
        let mut reference = Reference { window: vec![], history: vec![], m, n, eps };
        let mut replaced = false;
        for (k, (a, b)) in rows.iter().enumerate() {
            let e = entry(k as f64, *a, *b);
            let updated = pair.push(e);
            prop_assert_eq!(updated, twin.push(e));
            prop_assert_eq!(updated, reference.push(e));
            prop_assert_eq!(pair.history.entries(), &reference.history[..]);
            replaced |= updated;
            if replaced {
                prop_assert!(pair.history.sigma1() >= eps * (1.0 - 1e-12), "sigma1 {} < eps {}", pair.history.sigma1(), eps);
            }
        }
        prop_assert_eq!(&pair, &twin);
    }
}

proptest! {
    #[test]
    fn hard_projection_never_moves_away_from_truth(chi in 0.01f64..100.0, chi_hat in -1e3f64..1e3) {
        let p = ChiProjection::hard(0.01, 100.0);
        prop_assert!((chi - p.apply(chi_hat)).abs() <= (chi - chi_hat).abs());
    }

    #[test]
    fn soft_projection_never_moves_away_from_interior_truth(chi in 1.0f64..99.0, chi_hat in -1e3f64..1e3) {
        let p = ChiProjection::soft(0.01, 100.0, 0.99);
        let out = p.apply(chi_hat);
        prop_assert!((0.01..=100.0).contains(&out));
        prop_assert!((chi - out).abs() <= (chi - chi_hat).abs() + 1e-12);
    }

    #[test]
    fn metrics_vanish_on_identical_series(z in prop::collection::vec(0.1f64..50.0, 1..200)) {
        let t: Vec<f64> = (0..z.len()).map(|k| k as f64 * 0.1).collect();
        let s = DepthSeries::new(&t, &z, &z).unwrap();
        prop_assert_eq!(rmse(&s, Window::all()).unwrap(), 0.0);
        prop_assert_eq!(mape(&s, Window::all()).unwrap(), 0.0);
    }

    #[test]
    fn rmse_ignores_order_and_mape_scales_with_error(
        pairs in prop::collection::vec((0.1f64..50.0, -5.0f64..5.0), 1..200)
    ) {
        let t: Vec<f64> = (0..pairs.len()).map(|k| k as f64).collect();
        let z: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let zh: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
        let zh2: Vec<f64> = pairs.iter().map(|p| p.0 + 2.0 * p.1).collect();
        let rz: Vec<f64> = z.iter().rev().copied().collect();
        let rzh: Vec<f64> = zh.iter().rev().copied().collect();
        let fwd = rmse(&DepthSeries::new(&t, &z, &zh).unwrap(), Window::all()).unwrap();
        let rev = rmse(&DepthSeries::new(&t, &rz, &rzh).unwrap(), Window::all()).unwrap();
        prop_assert!((fwd - rev).abs() <= 1e-12 * fwd.max(1.0));
        let m1 = mape(&DepthSeries::new(&t, &z, &zh).unwrap(), Window::all()).unwrap();
        let m2 = mape(&DepthSeries::new(&t, &z, &zh2).unwrap(), Window::all()).unwrap();
        prop_assert!((m2 - 2.0 * m1).abs() <= 1e-9 * m1.max(1.0));
    }

    #[test]
    fn csv_round_trip_is_lossless(
        rows in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, any::<f64>().prop_filter("finite", |v| v.is_finite())), 3), 0..40)
    ) {
        let mut t = Table::new(["a", "b", "c"]);
        for r in rows {
            t.push(r);
        }
        let back = Table::read_from(&t.to_bytes().unwrap()[..], Path::new("prop.csv")).unwrap();
        prop_assert_eq!(back, t);
    }
}
