use nalgebra::SVector;

/// One classical fourth-order Runge-Kutta step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(t: f64, y: &SVector<f64, N>, dt: f64, mut f: F) -> SVector<f64, N>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let half = 0.5 * dt;
    let k1 = f(t, y);
    let k2 = f(t + half, &(y + k1 * half));
    let k3 = f(t + half, &(y + k2 * half));
    let k4 = f(t + dt, &(y + k3 * dt));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Scalar convenience wrapper around [`rk4_step`].
pub fn rk4_scalar<F>(t: f64, y: f64, dt: f64, mut f: F) -> f64
where
    F: FnMut(f64, f64) -> f64,
{
    rk4_step::<1, _>(t, &SVector::<f64, 1>::new(y), dt, |t, y| SVector::<f64, 1>::new(f(t, y[0])))[0]
}

/// Number of fixed steps covering `[0, horizon]`.
pub fn step_count(dt: f64, horizon: f64) -> usize {
    (horizon / dt).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |dt: f64| {
            let n = step_count(dt, 1.0);
            let mut y = 1.0;
            for k in 0..n {
                y = rk4_scalar(k as f64 * dt, y, dt, |_, y| -y);
            }
            (y - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn time_argument_reaches_stage_points() {
        // y' = 3 t^2 is integrated exactly by Simpson weights.
        let y = rk4_scalar(1.0, 0.0, 0.5, |t, _| 3.0 * t * t);
        assert!((y - (1.5f64.powi(3) - 1.0)).abs() < 1e-14);
    }
}
