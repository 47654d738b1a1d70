use serde::Serialize;

use super::{preparation, resonant_target, Numerics};
use crate::error::{Error, Result};
use crate::physics::{DiffractionConfig, MomentumGrid, PulseKind};
use crate::transition::ColumnInput;

/// Curves whose maximum is below this have no resonance.
pub const MIN_PEAK: f64 = 1e-6;
/// Half-range of the first width scan, in ħK.
const INITIAL_HALF_RANGE: i32 = 1;
/// Widest half-range tried before giving up.
const MAX_HALF_RANGE: i32 = 4;

/// Full width at half maximum of a sampled curve.
///
/// With `all_peaks` the width spans the outermost half-maximum crossings of
/// every peak; otherwise it spans the crossings around the global maximum
/// only. Crossings are located by linear interpolation. `xs` must increase.
pub fn fwhm(xs: &[f64], ys: &[f64], all_peaks: bool) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::config("curve", "need at least three samples of matching length"));
    }
    let imax = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty").0;
    fwhm_from(xs, ys, imax, all_peaks)
}

/// Single-peak width of the highest sample with |x − center| ≤ radius.
pub fn fwhm_near(xs: &[f64], ys: &[f64], center: f64, radius: f64) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::config("curve", "need at least three samples of matching length"));
    }
    let imax = (0..xs.len())
        .filter(|&i| (xs[i] - center).abs() <= radius)
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
        .ok_or(Error::NoResonance { maximum: 0.0 })?;
    fwhm_from(xs, ys, imax, false)
}

fn fwhm_from(xs: &[f64], ys: &[f64], imax: usize, all_peaks: bool) -> Result<f64> {
    let ymax = ys[imax];
    if !(ymax >= MIN_PEAK) {
        return Err(Error::NoResonance { maximum: ymax });
    }
    let half = 0.5 * ymax;
    let (first, last) = if all_peaks {
        let first = ys.iter().position(|&y| y >= half).expect("maximum is above half");
        let last = ys.iter().rposition(|&y| y >= half).expect("maximum is above half");
        (first, last)
    } else {
        let mut first = imax;
        while first > 0 && ys[first - 1] >= half {
            first -= 1;
        }
        let mut last = imax;
        while last + 1 < ys.len() && ys[last + 1] >= half {
            last += 1;
        }
        (first, last)
    };
    let half_range = 0.5 * (xs[xs.len() - 1] - xs[0]);
    if first == 0 || last == ys.len() - 1 {
        return Err(Error::UnbracketedWidth { half_range });
    }
    let cross = |i: usize, j: usize| xs[i] + (half - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
    Ok(cross(last, last + 1) - cross(first - 1, first))
}

#[derive(Clone, Debug, Serialize)]
pub struct WidthResult {
    pub width: f64,
    /// Initial momentum p (ħK) for single, p with p_i = p − ħK for double.
    pub momenta: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub n_max_used: usize,
    pub truncation_difference: f64,
}

/// Resonance width 𝒲 of the mirror transfer probability.
///
/// Single geometry uses |G(p+ħK, p)|², double uses |G(p+ħK, p−ħK)|², both
/// sampled around p₀. The scan starts at ±1.5ħK and widens while the curve
/// is still above half maximum at the edges.
pub fn resonance_width(config: &DiffractionConfig, numerics: &Numerics, all_peaks: bool) -> Result<WidthResult> {
    let cfg = config.with_area(PulseKind::Mirror.area());
    let start = preparation(cfg.mechanism, cfg.geometry, PulseKind::Mirror);
    let end = resonant_target(cfg.mechanism, cfg.geometry, PulseKind::Mirror);
    let grid = MomentumGrid::centered(numerics.grid_points, cfg.p0);
    let mut half_range = INITIAL_HALF_RANGE;
    let mut shifts: Vec<i32> = Vec::new();
    let mut curve: Vec<(i32, Vec<f64>)> = Vec::new();
    let mut n_max_used = 0;
    let mut truncation_difference = f64::NAN;
    loop {
        let needed: Vec<i32> = (-half_range..=half_range).filter(|j| !shifts.contains(j)).collect();
        let inputs: Vec<ColumnInput> = needed.iter().map(|&j| ColumnInput::new(start.state, start.order + j)).collect();
        let tf = numerics.build(&cfg, grid, &inputs)?;
        n_max_used = n_max_used.max(tf.n_max_used());
        truncation_difference = truncation_difference.max(tf.max_truncation_difference());
        for (&j, &input) in needed.iter().zip(&inputs) {
            let ys = (0..grid.points_per_hbark)
                .map(|k| tf.element(end.state, end.order + j, input, k).norm_sqr())
                .collect();
            curve.push((j, ys));
        }
        shifts.extend(needed);
        curve.sort_by_key(|c| c.0);

        // p = q + j in both geometries: p_i = p for single, p − ħK for double
        let momenta: Vec<f64> = curve
            .iter()
            .flat_map(|&(j, _)| grid.quasi_momenta().map(move |q| q + j as f64))
            .collect();
        let probabilities: Vec<f64> = curve.iter().flat_map(|(_, ys)| ys.iter().copied()).collect();
        match fwhm(&momenta, &probabilities, all_peaks) {
            Err(Error::UnbracketedWidth { .. }) if half_range < MAX_HALF_RANGE => half_range += 1,
            Err(Error::UnbracketedWidth { .. }) => {
                return Err(Error::UnbracketedWidth {
                    half_range: half_range as f64 + 0.5,
                })
            }
            Err(e) => return Err(e),
            Ok(width) => {
                return Ok(WidthResult {
                    width,
                    momenta,
                    probabilities,
                    n_max_used,
                    truncation_difference,
                })
            }
        }
    }
}
