//! Gain conditions, the Lipschitz constant of the depth-error coupling term,
//! and the ultimate-bound expressions for a complete history stack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FullOrderGains;
use crate::dynamics::{CameraInput, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    pub pass: bool,
    /// Gain minus the required minimum; `-inf` when the requirement is infinite.
    pub margin: f64,
    /// Smallest gain that satisfies the strict inequality; `inf` when `sigma1 == 0`.
    pub required: f64,
}

impl GainCheck {
    fn of(gain: f64, required: f64) -> Self {
        Self { pass: required.is_finite() && gain > required, margin: gain - required, required }
    }
}

fn requirement(l_g: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        l_g / denom
    } else {
        f64::INFINITY
    }
}

/// `K_CL > L_g / (sigma1 * Gamma)`.
pub fn check_gain_condition_full(k_cl: f64, gamma: f64, sigma1: f64, l_g: f64) -> GainCheck {
    GainCheck::of(k_cl, requirement(l_g, sigma1 * gamma))
}

/// `K_bar > L_g / sigma1`.
pub fn check_gain_condition_reduced(k_bar: f64, sigma1: f64, l_g: f64) -> GainCheck {
    GainCheck::of(k_bar, requirement(l_g, sigma1))
}

/// `f_u(s, chi, u) - f_u(s, chi_hat, u) = g_term * (chi - chi_hat)`.
pub fn g_term(s: &Vec2, chi: f64, chi_hat: f64, u: &CameraInput) -> f64 {
    (chi + chi_hat) * u.v[2] + (s[1] * u.omega[0] - s[0] * u.omega[1])
}

/// A measured point along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzSample {
    pub s: Vec2,
    pub input: CameraInput,
}

/// Sup of `|g_term|` over the samples with `chi, chi_hat` ranging over `chi`.
/// `g_term` is affine in `chi + chi_hat`, so the range endpoints suffice.
pub fn lipschitz_over_samples(samples: &[LipschitzSample], chi: [f64; 2]) -> f64 {
    samples
        .iter()
        .map(|p| g_term(&p.s, chi[0], chi[0], &p.input).abs().max(g_term(&p.s, chi[1], chi[1], &p.input).abs()))
        .fold(0.0, f64::max)
}

/// Box of states and inputs for [`lipschitz_over_box`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub chi: [f64; 2],
    pub v_z: [f64; 2],
    pub omega_x: [f64; 2],
    pub omega_y: [f64; 2],
}

impl LipschitzBox {
    fn ranges(&self) -> [[f64; 2]; 6] {
        [self.x, self.y, self.chi, self.v_z, self.omega_x, self.omega_y]
    }

    fn eval(p: [f64; 6], chi_hat: f64) -> f64 {
        let [x, y, chi, vz, wx, wy] = p;
        let u = CameraInput::new(0.0, [0.0, 0.0, vz].into(), [wx, wy, 0.0].into(), [0.0; 3].into());
        g_term(&Vec2::new(x, y), chi, chi_hat, &u).abs()
    }

    /// Uniform random point `(s, chi, chi_hat, u)` inside the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec2, f64, f64, CameraInput) {
        let mut draw = |r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.random_range(r[0]..=r[1]) };
        let x = draw(self.x);
        let y = draw(self.y);
        let chi = draw(self.chi);
        let chi_hat = draw(self.chi);
        let vz = draw(self.v_z);
        let wx = draw(self.omega_x);
        let wy = draw(self.omega_y);
        let u = CameraInput::new(0.0, [0.0, 0.0, vz].into(), [wx, wy, 0.0].into(), [0.0; 3].into());
        (Vec2::new(x, y), chi, chi_hat, u)
    }
}

/// Grid plus random sampling of `|g_term|` over a box. A grid of at least two
/// points per axis includes every vertex.
pub fn lipschitz_over_box(b: &LipschitzBox, grid: usize, random: usize, seed: u64) -> f64 {
    let ranges = b.ranges();
    let n = grid.max(2);
    let axis = |r: [f64; 2], i: usize| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64;
    let mut best: f64 = 0.0;
    let total = n.pow(6);
    for idx in 0..total {
        let mut rem = idx;
        let mut p = [0.0; 6];
        for (d, r) in ranges.iter().enumerate() {
            p[d] = axis(*r, rem % n);
            rem /= n;
        }
        // |g| is affine in chi_hat, so its endpoints suffice.
        best = best.max(LipschitzBox::eval(p, b.chi[0])).max(LipschitzBox::eval(p, b.chi[1]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let (s, chi, chi_hat, u) = b.sample(&mut rng);
        best = best.max(g_term(&s, chi, chi_hat, &u).abs());
    }
    best
}

/// Empirical `L_g`: trajectory samples with the given depth range, and
/// optionally a configured box. Never used inside an observer update.
pub fn estimate_lipschitz_g(samples: &[LipschitzSample], chi: [f64; 2], bounds: Option<&LipschitzBox>) -> f64 {
    let traj = lipschitz_over_samples(samples, chi);
    match bounds {
        Some(b) => traj.max(lipschitz_over_box(b, 3, 10_000, 0)),
        None => traj,
    }
}

/// Ultimate bound on `(xi, z)` for the full-order observer with a complete
/// stack. `None` when the gain condition fails (`k3 <= 0`).
pub fn ultimate_bound_full_complete(
    gains: &FullOrderGains,
    m: usize,
    sigma1: f64,
    sigma_bar: f64,
    chi_bar: f64,
    d_bar: f64,
    l_g: f64,
) -> Option<f64> {
    let g = gains.gamma;
    let c3 = 0.5f64.min(0.5 / g);
    let c4 = 0.5f64.max(0.5 / g);
    let k1 = gains.h[0].min(gains.h[1]);
    let k3 = gains.k_cl * sigma1 - l_g / g;
    if !(k3 > 0.0) || m == 0 {
        return None;
    }
    let alpha1 = k1.min(k3 / 2.0);
    let drive = (m - 1) as f64 * sigma_bar * chi_bar + m as f64 * d_bar * sigma_bar.sqrt();
    let beta2 = gains.k_cl * drive / (2.0 * k3 * alpha1).sqrt();
    Some((c4 / c3).sqrt() * beta2)
}

/// Rate `k5` and ultimate bound `beta4` for the reduced-order observer with a
/// complete stack. `None` when `k5 <= 0`.
pub fn ultimate_bound_reduced_complete(
    k_bar: f64,
    m: usize,
    sigma1: f64,
    sigma_bar: f64,
    chi_bar: f64,
    l_g: f64,
) -> Option<ReducedBound> {
    let k5 = k_bar * sigma1 - l_g;
    if !(k5 > 0.0) || m == 0 {
        return None;
    }
    Some(ReducedBound { k5, beta4: k_bar * sigma_bar * (m - 1) as f64 * chi_bar / k5 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedBound {
    pub k5: f64,
    pub beta4: f64,
}

impl ReducedBound {
    /// `|z(t0 + t)| <= sqrt(z0^2 e^{-k5 t} + beta4^2 (1 - e^{-k5 t}))`.
    pub fn envelope(&self, z0: f64, t: f64) -> f64 {
        let e = (-self.k5 * t).exp();
        (z0 * z0 * e + self.beta4 * self.beta4 * (1.0 - e)).sqrt()
    }
}
