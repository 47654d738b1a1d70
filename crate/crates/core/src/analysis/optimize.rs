use std::f64::consts::PI;

use serde::Serialize;

use super::{fwhm_near, packet_n_max, IntervalSet, Numerics, INPUT_THRESHOLD};
use crate::error::{Error, Result};
use crate::physics::{AmplitudeState, DiffractionConfig, Geometry, InternalState, Mechanism, MomentumGrid, WavePacket};
use crate::solver::{evolve_converged, SolverSettings};
use crate::transition::{occupied_inputs, ColumnInput};

/// Samples of the coarse area scan.
pub const COARSE_POINTS: usize = 64;
/// Golden-section stopping width, radians.
pub const AREA_TOLERANCE: f64 = 1e-3;
const SEARCH: (f64, f64) = (0.5 * PI, 1.5 * PI);

/// Maximiser of a unimodal function on [a, b] to within `tol`.
pub fn golden_section_max(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    // the midpoint can only lose to an interior probe on a non-unimodal patch
    Ok([(x, fx), (c, fc), (d, fd)].into_iter().max_by(|p, q| p.1.total_cmp(&q.1)).expect("three candidates"))
}

/// Final state and order of |p₀⟩ → |p₀ + ħK⟩.
fn transfer_states(mechanism: Mechanism) -> (InternalState, InternalState) {
    match mechanism {
        Mechanism::Raman => (InternalState::Ground, InternalState::Excited),
        Mechanism::Bragg => (InternalState::Ground, InternalState::Ground),
    }
}

/// Converts an area in the single-diffraction convention (Ω_R = 2Ω) to the
/// convention of `geometry`.
pub fn area_in_geometry(single_convention_area: f64, geometry: Geometry) -> f64 {
    single_convention_area * geometry.rabi_factor() / Geometry::Single.rabi_factor()
}

/// Eigenstate transfer |p₀⟩ → |p₀ + ħK⟩ for an area in single convention.
pub fn transfer_probability(config: &DiffractionConfig, single_convention_area: f64, settings: &SolverSettings) -> Result<f64> {
    let cfg = config.with_area(area_in_geometry(single_convention_area, config.geometry));
    let (from, to) = transfer_states(cfg.mechanism);
    let initial = AmplitudeState::eigenstate(cfg.mechanism, 3, cfg.p0, from, 0)?;
    let out = evolve_converged(&initial, &cfg, settings)?;
    Ok(out.state.probability(to, 1))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OptimalArea {
    /// Maximiser in the single-diffraction convention, radians.
    pub area: f64,
    pub transfer: f64,
}

/// Area 𝒜_opt in [π/2, 3π/2] (single convention) maximising the eigenstate
/// transfer at p₀, with the lasers tuned to resonance at p₀.
pub fn optimal_pulse_area(config: &DiffractionConfig, settings: &SolverSettings) -> Result<OptimalArea> {
    let cfg = config.with_p0_resonant(config.p0);
    let (area, transfer) = scan_then_refine(|a| transfer_probability(&cfg, a, settings), SEARCH.0, SEARCH.1)?;
    Ok(OptimalArea { area, transfer })
}

/// Coarse scan of [lo, hi] followed by golden-section refinement around the
/// best sample.
fn scan_then_refine(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let step = (hi - lo) / (COARSE_POINTS - 1) as f64;
    let coarse: Vec<(f64, f64)> = (0..COARSE_POINTS)
        .map(|i| {
            let x = lo + i as f64 * step;
            f(x).map(|y| (x, y))
        })
        .collect::<Result<_>>()?;
    let (min, max) = coarse.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, y)| (a.min(y), b.max(y)));
    if max - min < 1e-6 {
        return Err(Error::FlatObjective { variation: max - min });
    }
    let best = coarse.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("non-empty").0;
    let a = coarse[best.saturating_sub(1)].0;
    let b = coarse[(best + 1).min(COARSE_POINTS - 1)].0;
    golden_section_max(f, a, b, AREA_TOLERANCE)
}

/// Efficiency map over (p₀, Δ℘) with the per-p₀ optimal area.
#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub p0: Vec<f64>,
    pub delta_p: Vec<f64>,
    /// efficiency[i][j] at p0[i], delta_p[j].
    pub efficiency: Vec<Vec<f64>>,
    /// Optimal area per p₀, single convention.
    pub area: Vec<f64>,
    /// Width of the peak of |G(p + ħK, p)|² nearest p₀.
    pub width: Vec<f64>,
    pub n_max_used: Vec<usize>,
    pub truncation_difference: Vec<f64>,
}

/// For every p₀: retune to resonance, apply 𝒜_opt(p₀), diffract Gaussians
/// centred at p₀ and integrate over [p₀ + ħK/2, p₀ + 3ħK/2].
pub fn transition_scan(config: &DiffractionConfig, p0s: &[f64], delta_ps: &[f64], numerics: &Numerics) -> Result<ScanResult> {
    config.validate()?;
    let widest = delta_ps.iter().copied().fold(0.0, f64::max);
    let mut out = ScanResult {
        p0: p0s.to_vec(),
        delta_p: delta_ps.to_vec(),
        efficiency: Vec::with_capacity(p0s.len()),
        area: Vec::with_capacity(p0s.len()),
        width: Vec::with_capacity(p0s.len()),
        n_max_used: Vec::with_capacity(p0s.len()),
        truncation_difference: Vec::with_capacity(p0s.len()),
    };
    let (from, to) = transfer_states(config.mechanism);
    for &p0 in p0s {
        let base = config.with_p0_resonant(p0);
        let opt = optimal_pulse_area(&base, &numerics.settings)?;
        let cfg = base.with_area(area_in_geometry(opt.area, base.geometry));
        let grid = MomentumGrid::centered(numerics.grid_points, p0);
        let packets: Vec<WavePacket> = delta_ps
            .iter()
            .map(|&dp| WavePacket::gaussian(grid, packet_n_max(0, widest), cfg.mechanism, from, p0, dp))
            .collect::<Result<_>>()?;
        let mut inputs: Vec<ColumnInput> = (-1..=1).map(|j| ColumnInput::new(from, j)).collect();
        for psi in &packets {
            for input in occupied_inputs(psi, INPUT_THRESHOLD) {
                if !inputs.contains(&input) {
                    inputs.push(input);
                }
            }
        }
        inputs.sort();
        let tf = numerics.build(&cfg, grid, &inputs)?;
        let target = IntervalSet::target().shifted(p0);
        let row = packets
            .iter()
            .map(|psi| tf.apply(psi).map(|f| target.probability(&f).clamp(0.0, 1.0)))
            .collect::<Result<Vec<_>>>()?;

        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for j in -1..=1 {
            for (k, q) in grid.quasi_momenta().enumerate() {
                xs.push(q + j as f64);
                ys.push(tf.element(to, j + 1, ColumnInput::new(from, j), k).norm_sqr());
            }
        }
        out.width.push(fwhm_near(&xs, &ys, p0, 0.5)?);
        out.efficiency.push(row);
        out.area.push(opt.area);
        out.n_max_used.push(tf.n_max_used());
        out.truncation_difference.push(tf.max_truncation_difference());
    }
    Ok(out)
}
