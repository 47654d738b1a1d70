//! Scalar diagnostics of diffracted wave packets.

mod optimize;
mod width;

pub use optimize::{golden_section_max, optimal_pulse_area, transfer_probability, transition_scan, OptimalArea, ScanResult, COARSE_POINTS};
pub use width::{fwhm, fwhm_near, resonance_width, WidthResult};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{DiffractionConfig, Geometry, Mechanism, MomentumGrid, PulseKind, WavePacket};
use crate::solver::SolverSettings;
use crate::transition::{cache, occupied_inputs, ColumnInput, TransitionFunction};

/// Samples per ħK for density-level results.
pub const DENSITY_GRID_POINTS: usize = 256;
/// Samples per ħK for width extraction.
pub const WIDTH_GRID_POINTS: usize = 1024;
/// Cells lighter than this are not propagated.
pub const INPUT_THRESHOLD: f64 = 1e-14;

/// Disjoint closed momentum intervals in units of ħK.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config("interval", format!("[{lo}, {hi}] is empty or not finite")));
            }
        }
        for w in intervals.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(Error::config("interval", format!("[{}, {}] overlaps [{}, {}]", w[0].0, w[0].1, w[1].0, w[1].1)));
            }
        }
        Ok(IntervalSet { intervals })
    }

    pub fn single(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    /// [ħK/2, 3ħK/2], the default efficiency target.
    pub fn target() -> Self {
        IntervalSet { intervals: vec![(0.5, 1.5)] }
    }

    /// Integration interval ℐ counted as "not lost" for a pulse.
    pub fn loss_window(geometry: Geometry, kind: PulseKind) -> Self {
        let intervals = match (geometry, kind) {
            (Geometry::Single, _) => vec![(-0.5, 1.5)],
            (Geometry::Double, PulseKind::Mirror) => vec![(-1.5, -0.5), (0.5, 1.5)],
            (Geometry::Double, _) => vec![(-1.5, 1.5)],
        };
        IntervalSet { intervals }
    }

    pub fn shifted(&self, by: f64) -> Self {
        IntervalSet {
            intervals: self.intervals.iter().map(|&(a, b)| (a + by, b + by)).collect(),
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// ∫ |ψ|² dp over the set (trapezoidal).
    pub fn probability(&self, psi: &WavePacket) -> f64 {
        self.intervals.iter().map(|&(a, b)| psi.integrate(a, b)).sum()
    }
}

/// Solver, grid and cache choices shared by every analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct Numerics {
    pub settings: SolverSettings,
    pub grid_points: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            settings: SolverSettings::default(),
            grid_points: DENSITY_GRID_POINTS,
            cache_dir: None,
        }
    }
}

impl Numerics {
    pub fn with_grid_points(mut self, grid_points: usize) -> Self {
        self.grid_points = grid_points;
        self
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn build(&self, config: &DiffractionConfig, grid: MomentumGrid, inputs: &[ColumnInput]) -> Result<TransitionFunction> {
        cache::build_cached(self.cache_dir.as_deref(), config, grid, inputs, &self.settings)
    }
}

/// Initial (state, order) of the packet fed to a pulse.
///
/// Double-diffraction mirrors start from −ħK (in |e⟩ for Raman, so that the
/// resonant path runs e → g → e); everything else starts from the rest cell
/// in |g⟩.
pub fn preparation(mechanism: Mechanism, geometry: Geometry, kind: PulseKind) -> ColumnInput {
    match (geometry, kind, mechanism) {
        (Geometry::Double, PulseKind::Mirror, Mechanism::Raman) => ColumnInput::excited(-1),
        (Geometry::Double, PulseKind::Mirror, Mechanism::Bragg) => ColumnInput::ground(-1),
        _ => ColumnInput::ground(0),
    }
}

/// Diffraction order reached by the resonant path of a pulse.
pub fn resonant_target(mechanism: Mechanism, geometry: Geometry, kind: PulseKind) -> ColumnInput {
    let start = preparation(mechanism, geometry, kind);
    match (geometry, kind, mechanism) {
        (Geometry::Double, PulseKind::Mirror, _) => ColumnInput::new(start.state, start.order + 2),
        (_, _, Mechanism::Raman) => ColumnInput::excited(start.order + 1),
        (_, _, Mechanism::Bragg) => ColumnInput::ground(start.order + 1),
    }
}

/// Order range a Gaussian packet needs before its tails drop below
/// [`INPUT_THRESHOLD`].
pub fn packet_n_max(center_order: i32, delta_p: f64) -> usize {
    (center_order.unsigned_abs() as usize + (8.0 * delta_p + 1.5).ceil() as usize).max(2)
}

/// Input and output packets of one pulse plus truncation diagnostics.
#[derive(Clone, Debug)]
pub struct Diffraction {
    pub initial: WavePacket,
    pub output: WavePacket,
    pub n_max_used: usize,
    /// Worst n_max vs n_max+1 change over the columns used (NaN if fixed).
    pub truncation_difference: f64,
}

/// Diffracts a Gaussian of width `delta_p` prepared per [`preparation`]
/// and centred on p₀ plus the preparation order.
pub fn diffract(config: &DiffractionConfig, delta_p: f64, numerics: &Numerics) -> Result<Diffraction> {
    config.validate()?;
    let kind = PulseKind::from_area(config.pulse_area);
    let start = preparation(config.mechanism, config.geometry, kind);
    let grid = MomentumGrid::centered(numerics.grid_points, config.p0);
    let initial = WavePacket::gaussian(
        grid,
        packet_n_max(start.order, delta_p),
        config.mechanism,
        start.state,
        config.p0 + start.order as f64,
        delta_p,
    )?;
    let inputs = occupied_inputs(&initial, INPUT_THRESHOLD);
    let tf = numerics.build(config, grid, &inputs)?;
    let output = tf.apply(&initial)?;
    Ok(Diffraction {
        initial,
        output,
        n_max_used: tf.n_max_used(),
        truncation_difference: tf.max_truncation_difference(),
    })
}

/// Probability found in `target` after the pulse, clamped to [0, 1].
#[derive(Clone, Debug)]
pub struct Measured {
    pub value: f64,
    pub n_max_used: usize,
    pub truncation_difference: f64,
}

/// ℰ = ∫_target |ψ_f|² dp. `None` uses [ħK/2, 3ħK/2] shifted by p₀.
pub fn efficiency(config: &DiffractionConfig, delta_p: f64, target: Option<&IntervalSet>, numerics: &Numerics) -> Result<Measured> {
    let d = diffract(config, delta_p, numerics)?;
    let target = target.cloned().unwrap_or_else(|| IntervalSet::target().shifted(config.p0));
    Ok(Measured {
        value: target.probability(&d.output).clamp(0.0, 1.0),
        n_max_used: d.n_max_used,
        truncation_difference: d.truncation_difference,
    })
}

/// ℒ = 1 − ∫_ℐ |ψ_f|² dp with ℐ chosen by geometry and pulse kind.
pub fn losses(config: &DiffractionConfig, delta_p: f64, kind: PulseKind, numerics: &Numerics) -> Result<Measured> {
    let cfg = config.with_area(kind.area());
    let d = diffract(&cfg, delta_p, numerics)?;
    let window = IntervalSet::loss_window(cfg.geometry, kind).shifted(cfg.p0);
    Ok(Measured {
        value: (1.0 - window.probability(&d.output)).clamp(0.0, 1.0),
        n_max_used: d.n_max_used,
        truncation_difference: d.truncation_difference,
    })
}

/// Populations after a double-diffraction mirror.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Populations {
    pub minus: f64,
    pub rest: f64,
    pub plus: f64,
    /// Everything outside [−3ħK/2, 3ħK/2].
    pub other: f64,
    pub n_max_used: usize,
    pub truncation_difference: f64,
}

impl Populations {
    pub fn total(&self) -> f64 {
        self.minus + self.rest + self.plus + self.other
    }
}

pub fn populations(config: &DiffractionConfig, delta_p: f64, numerics: &Numerics) -> Result<Populations> {
    if config.geometry != Geometry::Double {
        return Err(Error::config("geometry", "populations are defined for double diffraction"));
    }
    let cfg = config.with_area(PulseKind::Mirror.area());
    let d = diffract(&cfg, delta_p, numerics)?;
    let p0 = cfg.p0;
    let psi = &d.output;
    let edge = (psi.n_max() as f64 + 1.0) + p0.abs();
    Ok(Populations {
        minus: psi.integrate(p0 - 1.5, p0 - 0.5),
        rest: psi.integrate(p0 - 0.5, p0 + 0.5),
        plus: psi.integrate(p0 + 0.5, p0 + 1.5),
        other: psi.integrate(p0 - 2.0 * edge, p0 - 1.5) + psi.integrate(p0 + 1.5, p0 + 2.0 * edge),
        n_max_used: d.n_max_used,
        truncation_difference: d.truncation_difference,
    })
}
