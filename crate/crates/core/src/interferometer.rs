//! Mach-Zehnder (beam splitter, mirror, beam splitter) signal from the two
//! resonant arms.
//!
//! Each arm keeps, after every pulse, only one internal state in one ħK cell
//! and discards everything else, which removes the spurious paths. Free
//! evolution between the pulses is not modelled: its phase is the same on
//! both arms and drops out of the signal, so the interrogation time T never
//! enters.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::analysis::{packet_n_max, Numerics};
use crate::error::{Error, Result};
use crate::physics::{DiffractionConfig, Geometry, InternalState, Mechanism, MomentumGrid, PulseKind, WavePacket, C64};
use crate::transition::{ColumnInput, TransitionFunction};

pub const MIN_PHASE_SAMPLES: usize = 32;

/// Block of one pulse kept on an arm: input cell → output cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ArmStep {
    pub from: ColumnInput,
    pub to: ColumnInput,
}

impl ArmStep {
    fn new(from: (InternalState, i32), to: (InternalState, i32)) -> Self {
        ArmStep {
            from: ColumnInput::new(from.0, from.1),
            to: ColumnInput::new(to.0, to.1),
        }
    }
}

/// Three chained steps, one per pulse.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmSpec {
    steps: [ArmStep; 3],
}

impl ArmSpec {
    pub fn new(steps: [ArmStep; 3]) -> Result<Self> {
        for w in steps.windows(2) {
            if w[0].to != w[1].from {
                return Err(Error::ArmMismatch(format!(
                    "step ends in ({}, {}) but the next starts from ({}, {})",
                    w[0].to.state.label(),
                    w[0].to.order,
                    w[1].from.state.label(),
                    w[1].from.order
                )));
            }
        }
        Ok(ArmSpec { steps })
    }

    pub fn steps(&self) -> &[ArmStep; 3] {
        &self.steps
    }

    /// Upper and lower arm starting and ending in |g, 0⟩.
    pub fn standard(mechanism: Mechanism, geometry: Geometry) -> (ArmSpec, ArmSpec) {
        use InternalState::{Excited as E, Ground as G};
        let moved = if mechanism == Mechanism::Raman { E } else { G };
        let (upper, lower) = match geometry {
            Geometry::Single => (
                [ArmStep::new((G, 0), (moved, 1)), ArmStep::new((moved, 1), (G, 0)), ArmStep::new((G, 0), (G, 0))],
                [ArmStep::new((G, 0), (G, 0)), ArmStep::new((G, 0), (moved, 1)), ArmStep::new((moved, 1), (G, 0))],
            ),
            Geometry::Double => (
                [ArmStep::new((G, 0), (moved, 1)), ArmStep::new((moved, 1), (moved, -1)), ArmStep::new((moved, -1), (G, 0))],
                [ArmStep::new((G, 0), (moved, -1)), ArmStep::new((moved, -1), (moved, 1)), ArmStep::new((moved, 1), (G, 0))],
            ),
        };
        (ArmSpec { steps: upper }, ArmSpec { steps: lower })
    }
}

/// Beam splitter and mirror transition functions for one geometry.
#[derive(Clone, Debug)]
pub struct PulseSequence {
    pub beam_splitter: TransitionFunction,
    pub mirror: TransitionFunction,
}

impl PulseSequence {
    /// Builds the π/2 and π pulses with the columns both arms need.
    pub fn calibrated(config: &DiffractionConfig, arms: &[&ArmSpec], numerics: &Numerics) -> Result<Self> {
        let grid = MomentumGrid::centered(numerics.grid_points, config.p0);
        let mut bs_inputs = Vec::new();
        let mut m_inputs = Vec::new();
        for arm in arms {
            for (i, step) in arm.steps.iter().enumerate() {
                let list = if i == 1 { &mut m_inputs } else { &mut bs_inputs };
                if !list.contains(&step.from) {
                    list.push(step.from);
                }
            }
        }
        bs_inputs.sort();
        m_inputs.sort();
        Ok(PulseSequence {
            beam_splitter: numerics.build(&config.with_area(PulseKind::BeamSplitter.area()), grid, &bs_inputs)?,
            mirror: numerics.build(&config.with_area(PulseKind::Mirror.area()), grid, &m_inputs)?,
        })
    }

    pub fn pulse(&self, index: usize) -> &TransitionFunction {
        if index == 1 {
            &self.mirror
        } else {
            &self.beam_splitter
        }
    }

    pub fn n_max_used(&self) -> usize {
        self.beam_splitter.n_max_used().max(self.mirror.n_max_used())
    }

    pub fn truncation_difference(&self) -> f64 {
        self.beam_splitter.max_truncation_difference().max(self.mirror.max_truncation_difference())
    }
}

/// Sends `psi` through the three pulses, keeping only the arm's blocks.
pub fn propagate_arm(psi: &WavePacket, arm: &ArmSpec, pulses: [&TransitionFunction; 3]) -> Result<WavePacket> {
    let mut current = psi.clone();
    for (step, tf) in arm.steps.iter().zip(pulses) {
        let input = current.project(step.from.state, step.from.order);
        current = tf.apply(&input)?.project(step.to.state, step.to.order);
    }
    Ok(current)
}

#[derive(Clone, Debug, Serialize)]
pub struct InterferogramResult {
    pub phases: Vec<f64>,
    pub intensities: Vec<f64>,
    /// A = max I + min I over the samples.
    pub amplitude: f64,
    /// C = (max I − min I)/A.
    pub contrast: f64,
    /// Largest deviation from the least-squares fit a + b cos δφ + c sin δφ,
    /// relative to A.
    pub fit_residual: f64,
    pub n_max_used: usize,
    pub truncation_difference: f64,
}

/// I(δφ) = ∫_window |ψ_up e^{iδφ} + ψ_low|² dp at `samples` phases spanning
/// [0, 2π] inclusive.
pub fn interferogram(upper: &WavePacket, lower: &WavePacket, window: (f64, f64), samples: usize) -> Result<InterferogramResult> {
    if samples < MIN_PHASE_SAMPLES {
        return Err(Error::config("phase_samples", format!("need at least {MIN_PHASE_SAMPLES}, got {samples}")));
    }
    let n = upper.n_max().max(lower.n_max());
    let upper = widen(upper, n)?;
    let lower = widen(lower, n)?;
    let phases: Vec<f64> = (0..samples).map(|i| TAU * i as f64 / (samples - 1) as f64).collect();
    let intensities = phases
        .iter()
        .map(|&phi| {
            let sum = upper.combine(C64::from_polar(1.0, phi), &lower, C64::new(1.0, 0.0))?;
            Ok(sum.integrate(window.0, window.1))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = intensities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = intensities.iter().copied().fold(f64::INFINITY, f64::min);
    let amplitude = max + min;
    if !(amplitude >= 1e-9) {
        return Err(Error::DegenerateSignal { amplitude });
    }
    let fit = cosine_fit(&phases, &intensities);
    let fit_residual = phases
        .iter()
        .zip(&intensities)
        .map(|(&x, &y)| (y - (fit[0] + fit[1] * x.cos() + fit[2] * x.sin())).abs())
        .fold(0.0, f64::max)
        / amplitude;
    Ok(InterferogramResult {
        phases,
        intensities,
        amplitude,
        contrast: (max - min) / amplitude,
        fit_residual,
        n_max_used: 0,
        truncation_difference: f64::NAN,
    })
}

fn widen(psi: &WavePacket, n_max: usize) -> Result<WavePacket> {
    if psi.n_max() == n_max {
        return Ok(psi.clone());
    }
    let mut out = WavePacket::zeros(*psi.grid(), n_max, psi.mechanism());
    let points = psi.grid().points_per_hbark;
    for s in [InternalState::Ground, InternalState::Excited] {
        let Some(src) = psi.component(s) else { continue };
        let shift = (n_max - psi.n_max()) * points;
        out.component_mut(s)?[shift..shift + src.len()].copy_from_slice(src);
    }
    Ok(out)
}

/// Least-squares coefficients of a + b cos x + c sin x.
fn cosine_fit(xs: &[f64], ys: &[f64]) -> [f64; 3] {
    let mut m = [[0.0; 4]; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let basis = [1.0, x.cos(), x.sin()];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            m[i][3] += basis[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting on the 3×4 augmented system
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).expect("rows");
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let tail: f64 = (i + 1..3).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][3] - tail) / m[i][i];
    }
    x
}

/// Full Mach-Zehnder signal for a Gaussian of width `delta_p` at p₀.
pub fn signal(config: &DiffractionConfig, delta_p: f64, phase_samples: usize, numerics: &Numerics) -> Result<InterferogramResult> {
    config.validate()?;
    let (upper, lower) = ArmSpec::standard(config.mechanism, config.geometry);
    let pulses = PulseSequence::calibrated(config, &[&upper, &lower], numerics)?;
    let grid = MomentumGrid::centered(numerics.grid_points, config.p0);
    let psi = WavePacket::gaussian(grid, packet_n_max(0, delta_p), config.mechanism, InternalState::Ground, config.p0, delta_p)?;
    let order = [pulses.pulse(0), pulses.pulse(1), pulses.pulse(2)];
    let up = propagate_arm(&psi, &upper, order)?;
    let low = propagate_arm(&psi, &lower, order)?;
    let mut result = interferogram(&up, &low, (config.p0 - 0.5, config.p0 + 0.5), phase_samples)?;
    result.n_max_used = pulses.n_max_used();
    result.truncation_difference = pulses.truncation_difference();
    Ok(result)
}

/// Signal over a (Δ℘, Δτ) grid; result[i][j] is at delta_ps[i], delta_taus[j].
pub fn signal_map(
    config: &DiffractionConfig,
    delta_ps: &[f64],
    delta_taus: &[f64],
    phase_samples: usize,
    numerics: &Numerics,
) -> Result<Vec<Vec<InterferogramResult>>> {
    delta_ps
        .iter()
        .map(|&dp| {
            delta_taus
                .iter()
                .map(|&tau| {
                    let mut cfg = *config;
                    cfg.delta_tau = tau;
                    signal(&cfg, dp, phase_samples, numerics)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn standard_arms_chain() {
        for mech in [Mechanism::Raman, Mechanism::Bragg] {
            for geom in [Geometry::Single, Geometry::Double] {
                let (u, l) = ArmSpec::standard(mech, geom);
                assert!(ArmSpec::new(u.steps).is_ok());
                assert!(ArmSpec::new(l.steps).is_ok());
                assert_eq!(u.steps[0].from, ColumnInput::ground(0));
                assert_eq!(l.steps[2].to, ColumnInput::ground(0));
            }
        }
        let (u, _) = ArmSpec::standard(Mechanism::Raman, Geometry::Double);
        assert_eq!(u.steps[1], ArmStep::new((InternalState::Excited, 1), (InternalState::Excited, -1)));
        let mut broken = u.steps;
        broken[2].from = ColumnInput::ground(0);
        assert!(matches!(ArmSpec::new(broken), Err(Error::ArmMismatch(_))));
    }

    #[test]
    fn identical_arms_interfere_perfectly() {
        let grid = MomentumGrid::new(64);
        let psi = WavePacket::gaussian(grid, 2, Mechanism::Bragg, InternalState::Ground, 0.0, 0.1).unwrap();
        let r = interferogram(&psi, &psi, (-0.5, 0.5), 65).unwrap();
        assert!((r.contrast - 1.0).abs() < 1e-12);
        // δφ = π is the middle sample
        assert!(r.intensities[32].abs() < 1e-14);
        assert!(r.fit_residual < 1e-12);
        assert!(matches!(interferogram(&psi, &psi, (-0.5, 0.5), 8), Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn cosine_fit_recovers_coefficients() {
        let xs: Vec<f64> = (0..40).map(|i| TAU * i as f64 / 39.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 + 0.2 * x.cos() - 0.05 * x.sin()).collect();
        let c = cosine_fit(&xs, &ys);
        assert!((c[0] - 0.3).abs() < 1e-14 && (c[1] - 0.2).abs() < 1e-14 && (c[2] + 0.05).abs() < 1e-14);
    }

    #[test]
    fn dark_pulses_block_every_arm() {
        let cfg = DiffractionConfig::resonant(Mechanism::Raman, Geometry::Single, 3.0, 0.0);
        let numerics = Numerics::default().with_grid_points(32);
        let (upper, lower) = ArmSpec::standard(cfg.mechanism, cfg.geometry);
        let grid = MomentumGrid::new(32);
        let dark = |area: f64| numerics.build(&cfg.with_area(area), grid, &[ColumnInput::ground(0), ColumnInput::excited(1)]).unwrap();
        let (bs, m) = (dark(0.0), dark(0.0));
        let psi = WavePacket::gaussian(grid, 2, Mechanism::Raman, InternalState::Ground, 0.0, 0.05).unwrap();
        for arm in [&upper, &lower] {
            let out = propagate_arm(&psi, arm, [&bs, &m, &bs]).unwrap();
            assert_eq!(out.norm_sqr(), 0.0);
        }
    }

    #[test]
    fn single_raman_has_full_contrast() {
        let cfg = DiffractionConfig::resonant(Mechanism::Raman, Geometry::Single, 3.5, PI);
        let r = signal(&cfg, 0.01, 64, &Numerics::default().with_grid_points(64)).unwrap();
        assert!(r.contrast > 0.99, "{}", r.contrast);
        assert!(r.amplitude > 0.9, "{}", r.amplitude);
    }
}
