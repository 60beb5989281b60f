//! Dormand-Prince 5(4) integrator with PI step-size control for complex
//! state vectors.

use num_complex::Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Config {
    pub rel_tolerance: f64,
    pub abs_tolerance: f64,
    /// First trial step; chosen from the right-hand side when `None`.
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    /// Integration fails when the step shrinks below this value.
    pub min_step: f64,
}

impl Default for Dopri5Config {
    fn default() -> Self {
        Self { rel_tolerance: 1e-8, abs_tolerance: 1e-10, initial_step: None, max_step: None, min_step: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dopri5Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Last step size the controller proposed; a good start for a follow-up interval.
    pub next_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepUnderflow {
    pub time: f64,
    pub step: f64,
}

fn axpy(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..out.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Weighted RMS norm of the error estimate.
fn error_norm(err: &[Complex64], y: &[Complex64], y_new: &[Complex64], cfg: &Dopri5Config) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let scale = cfg.abs_tolerance + cfg.rel_tolerance * a.norm().max(b.norm());
            (e.norm() / scale).powi(2)
        })
        .sum();
    (sum / err.len().max(1) as f64).sqrt()
}

/// Initial step following Hairer, Nørsett and Wanner (II.4).
fn initial_step<F>(rhs: &mut F, t: f64, y: &[Complex64], f0: &[Complex64], span: f64, cfg: &Dopri5Config) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let scaled = |v: &[Complex64]| {
        let s: f64 =
            v.iter().zip(y).map(|(x, y0)| (x.norm() / (cfg.abs_tolerance + cfg.rel_tolerance * y0.norm())).powi(2)).sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let d0 = scaled(y);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let mut y1 = vec![Complex64::new(0.0, 0.0); y.len()];
    axpy(&mut y1, y, h0, &[(1.0, f0)]);
    let mut f1 = vec![Complex64::new(0.0, 0.0); y.len()];
    rhs(t + h0, &y1, &mut f1);
    let diff: Vec<Complex64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` in place.
pub fn dopri5<F>(mut rhs: F, t0: f64, t1: f64, y: &mut [Complex64], cfg: &Dopri5Config) -> Result<Dopri5Stats, StepUnderflow>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y.len();
    let span = t1 - t0;
    let mut stats = Dopri5Stats::default();
    if span <= 0.0 {
        stats.next_step = cfg.initial_step.unwrap_or(0.0);
        return Ok(stats);
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut err = vec![zero; n];

    rhs(t0, y, &mut k[0]);
    stats.evaluations += 1;
    let max_step = cfg.max_step.unwrap_or(f64::INFINITY).min(span);
    let mut h = match cfg.initial_step {
        Some(h) => h,
        None => {
            stats.evaluations += 1;
            initial_step(&mut rhs, t0, y, &k[0], span, cfg)
        }
    }
    .min(max_step);

    let mut t = t0;
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;
    while t < t1 {
        let remaining = t1 - t;
        // Land exactly on t1 instead of leaving a sliver.
        let step_hit_end = h >= remaining * (1.0 - 1e-12);
        if step_hit_end {
            h = remaining;
        }
        if h < cfg.min_step && !step_hit_end {
            return Err(StepUnderflow { time: t, step: h });
        }

        {
            let (k0, rest) = k.split_at_mut(1);
            let k0 = &k0[0];
            axpy(&mut stage, y, h, &[(A21, k0)]);
            rhs(t + C2 * h, &stage, &mut rest[0]);
            axpy(&mut stage, y, h, &[(A31, k0), (A32, &rest[0])]);
            rhs(t + C3 * h, &stage, &mut rest[1]);
            axpy(&mut stage, y, h, &[(A41, k0), (A42, &rest[0]), (A43, &rest[1])]);
            rhs(t + C4 * h, &stage, &mut rest[2]);
            axpy(&mut stage, y, h, &[(A51, k0), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])]);
            rhs(t + C5 * h, &stage, &mut rest[3]);
            axpy(&mut stage, y, h, &[(A61, k0), (A62, &rest[0]), (A63, &rest[1]), (A64, &rest[2]), (A65, &rest[3])]);
            rhs(t + h, &stage, &mut rest[4]);
            axpy(&mut y_new, y, h, &[(A71, k0), (A73, &rest[1]), (A74, &rest[2]), (A75, &rest[3]), (A76, &rest[4])]);
            rhs(t + h, &y_new, &mut rest[5]);
            for i in 0..n {
                err[i] =
                    (k0[i] * E1 + rest[1][i] * E3 + rest[2][i] * E4 + rest[3][i] * E5 + rest[4][i] * E6 + rest[5][i] * E7) * h;
            }
        }
        stats.evaluations += 6;

        let e = error_norm(&err, y, &y_new, cfg);
        if e.is_finite() && e <= 1.0 {
            let e = e.max(1e-10);
            let fac = (e.powf(EXPO) / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (h / fac).min(max_step);
            if last_rejected {
                h_new = h_new.min(h);
            }
            err_old = e.max(1e-4);
            t = if step_hit_end { t1 } else { t + h };
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            stats.accepted += 1;
            last_rejected = false;
            if !step_hit_end {
                h = h_new;
            }
            stats.next_step = h_new;
        } else {
            let shrink = if e.is_finite() { (SAFETY * e.powf(-EXPO)).max(FAC_MIN) } else { FAC_MIN };
            h *= shrink.min(1.0);
            stats.rejected += 1;
            last_rejected = true;
            if h < cfg.min_step {
                return Err(StepUnderflow { time: t, step: h });
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotating_phase() {
        // y' = -i w y, exact y = e^{-i w t}
        let w = 3.0;
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let cfg = Dopri5Config::default();
        let stats = dopri5(|_, y, dy| dy[0] = Complex64::new(0.0, -w) * y[0], 0.0, 10.0, &mut y, &cfg).unwrap();
        let exact = Complex64::from_polar(1.0, -w * 10.0);
        assert!((y[0] - exact).norm() < 1e-6);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn decay_with_time_dependence() {
        // y' = -2 t y, exact y = e^{-t^2}
        let mut y = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        let cfg = Dopri5Config { rel_tolerance: 1e-10, abs_tolerance: 1e-12, ..Default::default() };
        dopri5(
            |t, y, dy| {
                for i in 0..2 {
                    dy[i] = y[i] * (-2.0 * t);
                }
            },
            0.0,
            2.0,
            &mut y,
            &cfg,
        )
        .unwrap();
        let exact = (-4.0f64).exp();
        assert!((y[0].re - exact).abs() < 1e-9);
        assert!((y[1].im - 2.0 * exact).abs() < 1e-9);
    }

    #[test]
    fn tolerance_controls_error() {
        let run = |rtol: f64| {
            let mut y = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let cfg = Dopri5Config { rel_tolerance: rtol, abs_tolerance: rtol * 1e-2, ..Default::default() };
            // harmonic oscillator
            dopri5(
                |_, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                0.0,
                20.0,
                &mut y,
                &cfg,
            )
            .unwrap();
            (y[0].re - 20f64.cos()).abs()
        };
        let coarse = run(1e-4);
        let fine = run(1e-9);
        assert!(fine < coarse);
        assert!(fine < 1e-7);
    }

    #[test]
    fn empty_interval_is_noop() {
        let mut y = vec![Complex64::new(2.0, 1.0)];
        let stats = dopri5(|_, _, dy| dy[0] = Complex64::new(1.0, 0.0), 1.0, 1.0, &mut y, &Dopri5Config::default()).unwrap();
        assert_eq!(y[0], Complex64::new(2.0, 1.0));
        assert_eq!(stats.evaluations, 0);
    }

    #[test]
    fn blow_up_reports_underflow() {
        // y' = y^2 from y(0)=1 explodes at t=1
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let cfg = Dopri5Config { min_step: 1e-10, ..Default::default() };
        let res = dopri5(|_, y, dy| dy[0] = y[0] * y[0], 0.0, 2.0, &mut y, &cfg);
        let fail = res.unwrap_err();
        assert!(fail.time < 1.0 && fail.time > 0.99);
    }
}
