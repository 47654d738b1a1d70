//! Dormand–Prince 5(4) embedded Runge–Kutta pair with PI step control.
//!
//! Butcher tableau (exact rationals; the f64 constants below are the
//! correctly rounded values of these fractions):
//!
//! ```text
//! c  | a
//! 0     |
//! 1/5   | 1/5
//! 3/10  | 3/40        9/40
//! 4/5   | 44/45      −56/15       32/9
//! 8/9   | 19372/6561 −25360/2187  64448/6561  −212/729
//! 1     | 9017/3168  −355/33      46732/5247   49/176  −5103/18656
//! 1     | 35/384      0           500/1113    125/192  −2187/6784   11/84
//! ------+-------------------------------------------------------------------
//! b5    | 35/384      0           500/1113    125/192  −2187/6784   11/84     0
//! b5−b4 | 71/57600    0          −71/16695     71/1920 −17253/339200 22/525  −1/40
//! ```
//!
//! The last stage is evaluated at the accepted point and reused as the first
//! stage of the next step (FSAL).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::solver::SolverSettings;

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

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Step-size controller (Hairer, Nørsett & Wanner, DOPRI5 defaults).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const MAX_GROWTH: f64 = 10.0;
const MAX_SHRINK: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates y' = f(t, y) from `t0` to `t1` (either direction).
///
/// `h_init` and `h_max` are magnitudes. Every component's real and imaginary
/// part is held to `abs_tol + rel_tol·|y|`.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[C64],
    h_init: f64,
    h_max: f64,
    settings: &SolverSettings,
) -> Result<(Vec<C64>, IntegrationStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let dim = y0.len();
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    if t0 == t1 || dim == 0 {
        return Ok((y, stats));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let h_max = h_max.min(span);
    let mut h = h_init.min(h_max);

    let zero = C64::new(0.0, 0.0);
    let mut k1 = vec![zero; dim];
    let mut k2 = vec![zero; dim];
    let mut k3 = vec![zero; dim];
    let mut k4 = vec![zero; dim];
    let mut k5 = vec![zero; dim];
    let mut k6 = vec![zero; dim];
    let mut k7 = vec![zero; dim];
    let mut stage = vec![zero; dim];
    let mut y_new = vec![zero; dim];

    let mut t = t0;
    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let expo = 0.2 - BETA * 0.75;
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if stats.accepted + stats.rejected >= settings.max_steps {
            return Err(Error::TooManySteps { t, norm: norm(&y) });
        }
        let mut finishing = false;
        if h >= remaining {
            h = remaining;
            finishing = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, norm: norm(&y) });
        }
        let hs = h * dir;

        for i in 0..dim {
            stage[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &stage, &mut k2);
        for i in 0..dim {
            stage[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &stage, &mut k3);
        for i in 0..dim {
            stage[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &stage, &mut k4);
        for i in 0..dim {
            stage[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &stage, &mut k5);
        for i in 0..dim {
            stage[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + hs, &stage, &mut k6);
        for i in 0..dim {
            y_new[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if finishing { t1 } else { t + hs };
        f(t_new, &y_new, &mut k7);
        stats.evaluations += 6;

        let mut acc = 0.0;
        for i in 0..dim {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc_re = settings.abs_tol + settings.rel_tol * y[i].re.abs().max(y_new[i].re.abs());
            let sc_im = settings.abs_tol + settings.rel_tol * y[i].im.abs().max(y_new[i].im.abs());
            acc += (e.re / sc_re).powi(2) + (e.im / sc_im).powi(2);
        }
        let err = (acc / (2 * dim) as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::NonFinite { t, norm: norm(&y) });
        }

        let fac_err = err.powf(expo);
        if err <= 1.0 {
            let fac = (fac_err / err_old.powf(BETA) / SAFETY).clamp(1.0 / MAX_GROWTH, 1.0 / MAX_SHRINK);
            err_old = err.max(1e-4);
            stats.accepted += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            if finishing {
                break;
            }
            let mut h_new = (h / fac).min(h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac_err / SAFETY).min(1.0 / MAX_SHRINK);
        }
    }
    Ok((y, stats))
}

fn norm(y: &[C64]) -> f64 {
    y.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
