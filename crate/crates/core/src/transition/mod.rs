//! Momentum-space transition functions.
//!
//! A pulse conserves quasi-momentum, so G(p_f, p_i) is block diagonal: for
//! every grid point q it maps the ladder {q + mħK} onto itself. Each column
//! is one converged ladder solve started from |s_i, q + mħK⟩.

pub mod cache;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{AmplitudeState, DiffractionConfig, InternalState, Mechanism, MomentumGrid, PulseKind, WavePacket, C64};
use crate::solver::{evolve_converged, SolverSettings};

/// Cell mass an input packet may carry on columns the function lacks.
pub const UNCOVERED_TOLERANCE: f64 = 1e-12;

/// Initial internal state and diffraction order of one family of columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnInput {
    pub state: InternalState,
    pub order: i32,
}

impl ColumnInput {
    pub fn new(state: InternalState, order: i32) -> Self {
        ColumnInput { state, order }
    }

    pub fn ground(order: i32) -> Self {
        ColumnInput::new(InternalState::Ground, order)
    }

    pub fn excited(order: i32) -> Self {
        ColumnInput::new(InternalState::Excited, order)
    }
}

/// One solved column with its truncation diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub state: AmplitudeState,
    /// Max-norm change against n_max + 1; NaN for fixed truncation.
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionFunction {
    config: DiffractionConfig,
    grid: MomentumGrid,
    settings: SolverSettings,
    inputs: Vec<ColumnInput>,
    /// Input-major: columns[i * N + k] belongs to inputs[i] at grid point k.
    columns: Vec<Column>,
}

impl TransitionFunction {
    /// Solves one column per (input, grid point), in parallel.
    pub fn build(config: &DiffractionConfig, grid: MomentumGrid, inputs: &[ColumnInput], settings: &SolverSettings) -> Result<Self> {
        config.validate()?;
        grid.validate()?;
        settings.validate()?;
        if inputs.is_empty() {
            return Err(Error::config("inputs", "at least one input column is required"));
        }
        let mut unique = inputs.to_vec();
        unique.sort();
        unique.dedup();
        if unique.len() != inputs.len() {
            return Err(Error::config("inputs", "duplicate input columns"));
        }
        for input in inputs {
            if input.state == InternalState::Excited && config.mechanism == Mechanism::Bragg {
                return Err(Error::config("inputs", "Bragg transition functions take ground-state inputs only"));
            }
        }
        let n = grid.points_per_hbark;
        let columns = (0..inputs.len() * n)
            .into_par_iter()
            .map(|j| {
                let input = inputs[j / n];
                let q = grid.quasi_momentum(j % n);
                solve_column(config, settings, input, q).map_err(|e| Error::Column { q, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TransitionFunction {
            config: *config,
            grid,
            settings: *settings,
            inputs: inputs.to_vec(),
            columns,
        })
    }

    pub(crate) fn from_parts(
        config: DiffractionConfig,
        grid: MomentumGrid,
        settings: SolverSettings,
        inputs: Vec<ColumnInput>,
        columns: Vec<Column>,
    ) -> Result<Self> {
        if columns.len() != inputs.len() * grid.points_per_hbark {
            return Err(Error::Cache(format!(
                "expected {} columns, found {}",
                inputs.len() * grid.points_per_hbark,
                columns.len()
            )));
        }
        Ok(TransitionFunction {
            config,
            grid,
            settings,
            inputs,
            columns,
        })
    }

    pub fn config(&self) -> &DiffractionConfig {
        &self.config
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn inputs(&self) -> &[ColumnInput] {
        &self.inputs
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn pulse_kind(&self) -> PulseKind {
        PulseKind::from_area(self.config.pulse_area)
    }

    /// Largest truncation order used by any column.
    pub fn n_max_used(&self) -> usize {
        self.columns.iter().map(|c| c.state.n_max()).max().unwrap_or(0)
    }

    /// Worst truncation difference over all columns (NaN when fixed).
    pub fn max_truncation_difference(&self) -> f64 {
        self.columns.iter().map(|c| c.difference).fold(f64::NAN, f64::max)
    }

    pub fn column(&self, input: ColumnInput, k: usize) -> Option<&AmplitudeState> {
        let i = self.inputs.iter().position(|&x| x == input)?;
        (k < self.grid.points_per_hbark).then(|| &self.columns[i * self.grid.points_per_hbark + k].state)
    }

    /// ⟨s_f, q_k + nħK| pulse |s_i, q_k + mħK⟩.
    pub fn element(&self, out: InternalState, order: i32, input: ColumnInput, k: usize) -> C64 {
        self.column(input, k).map_or(C64::new(0.0, 0.0), |c| c.amplitude(out, order))
    }

    /// ψ_f(q + nħK) = Σ_{s_i, m} G[s_f, n ← s_i, m](q) ψ_i(q + mħK).
    ///
    /// The output keeps the input grid and is widened to hold every order the
    /// columns reach. Fails if ψ carries weight on inputs without a column.
    pub fn apply(&self, psi: &WavePacket) -> Result<WavePacket> {
        if psi.mechanism() != self.config.mechanism {
            return Err(Error::GridMismatch(format!(
                "{:?} wave packet passed to a {:?} transition function",
                psi.mechanism(),
                self.config.mechanism
            )));
        }
        if !psi.grid().compatible_with(&self.grid) {
            return Err(Error::GridMismatch(format!(
                "packet grid ({} per hbar K, offset {}) does not align with transition grid ({} per hbar K, offset {})",
                psi.grid().points_per_hbark,
                psi.grid().offset,
                self.grid.points_per_hbark,
                self.grid.offset
            )));
        }
        let n = self.grid.points_per_hbark;
        // psi cell index k ↦ (column index, order shift s): q_psi(k) = q_G(col) + s
        let base = ((psi.grid().offset - self.grid.offset) * n as f64).round() as i64;
        let map: Vec<(usize, i32)> = (0..n)
            .map(|k| {
                let j = base + k as i64;
                (j.rem_euclid(n as i64) as usize, j.div_euclid(n as i64) as i32)
            })
            .collect();

        let total = psi.norm_sqr();
        let states: Vec<InternalState> = [InternalState::Ground, InternalState::Excited]
            .into_iter()
            .filter(|&s| psi.component(s).is_some())
            .collect();
        for &s in &states {
            for order in psi.orders() {
                let input_at = |shift: i32| ColumnInput::new(s, order + shift);
                let uncovered: f64 = (0..n)
                    .filter(|&k| !self.inputs.contains(&input_at(map[k].1)))
                    .map(|k| psi.value(s, order, k).norm_sqr())
                    .sum::<f64>()
                    * psi.grid().spacing();
                if uncovered > UNCOVERED_TOLERANCE * total.max(f64::MIN_POSITIVE) {
                    return Err(Error::GridMismatch(format!(
                        "packet carries weight {uncovered:e} on ({}, order {order}) which has no transition column",
                        s.label()
                    )));
                }
            }
        }

        let max_shift = map.iter().map(|&(_, s)| s.unsigned_abs() as usize).max().unwrap_or(0);
        let out_n_max = psi.n_max().max(self.n_max_used() + max_shift);
        let mut out = WavePacket::zeros(*psi.grid(), out_n_max, psi.mechanism());
        for (i, input) in self.inputs.iter().enumerate() {
            let Some(src) = psi.component(input.state) else { continue };
            for (k, &(col, shift)) in map.iter().enumerate() {
                let order_in = input.order - shift;
                let Some(idx) = psi.index(order_in, k) else { continue };
                let amp = src[idx];
                if amp == C64::new(0.0, 0.0) {
                    continue;
                }
                let column = &self.columns[i * n + col].state;
                for &s in &states {
                    let dst = out.component_mut(s)?;
                    for order_g in column.orders() {
                        let g = column.amplitude(s, order_g);
                        if g == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let j = (order_g - shift + out_n_max as i32) as usize * n + k;
                        dst[j] += g * amp;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn solve_column(config: &DiffractionConfig, settings: &SolverSettings, input: ColumnInput, q: f64) -> Result<Column> {
    let radius = input.order.unsigned_abs() as usize;
    let n_max = match config.n_max {
        crate::physics::TruncationOrder::Fixed(n) => n,
        crate::physics::TruncationOrder::Auto => crate::solver::TRUNCATION_FLOOR.max(radius + 1),
    };
    let initial = AmplitudeState::eigenstate(config.mechanism, n_max, q, input.state, input.order)?;
    let converged = evolve_converged(&initial, config, settings)?;
    Ok(Column {
        state: converged.state,
        difference: converged.difference.unwrap_or(f64::NAN),
    })
}

/// (state, order) cells of `psi` holding more than `threshold` probability.
pub fn occupied_inputs(psi: &WavePacket, threshold: f64) -> Vec<ColumnInput> {
    let mut out = Vec::new();
    for s in [InternalState::Ground, InternalState::Excited] {
        let Some(c) = psi.component(s) else { continue };
        let n = psi.grid().points_per_hbark;
        for order in psi.orders() {
            let start = psi.index(order, 0).expect("order within packet");
            let mass: f64 = c[start..start + n].iter().map(|a| a.norm_sqr()).sum::<f64>() * psi.grid().spacing();
            if mass > threshold {
                out.push(ColumnInput::new(s, order));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::Geometry;
    use std::f64::consts::PI;

    #[test]
    fn dark_pulse_is_the_identity() {
        let cfg = DiffractionConfig::resonant(Mechanism::Raman, Geometry::Double, 2.0, 0.0);
        let grid = MomentumGrid::new(8);
        let g = TransitionFunction::build(&cfg, grid, &[ColumnInput::ground(0), ColumnInput::excited(-1)], &SolverSettings::default()).unwrap();
        for k in 0..8 {
            assert_eq!(g.element(InternalState::Ground, 0, ColumnInput::ground(0), k), C64::new(1.0, 0.0));
            assert_eq!(g.element(InternalState::Excited, -1, ColumnInput::excited(-1), k), C64::new(1.0, 0.0));
            let col = g.column(ColumnInput::ground(0), k).unwrap();
            assert_eq!(col.norm_sqr(), 1.0);
        }
        let psi = WavePacket::gaussian(grid, 2, Mechanism::Raman, InternalState::Ground, 0.0, 0.05).unwrap();
        assert_eq!(g.apply(&psi).unwrap().norm_sqr(), psi.norm_sqr());
    }

    #[test]
    fn long_raman_mirror_transfers_at_rest() {
        let cfg = DiffractionConfig::resonant(Mechanism::Raman, Geometry::Single, 8.0, PI);
        let grid = MomentumGrid::new(4);
        let g = TransitionFunction::build(&cfg, grid, &[ColumnInput::ground(0)], &SolverSettings::default()).unwrap();
        // grid point k = 2 sits at q = 0
        let p = g.element(InternalState::Excited, 1, ColumnInput::ground(0), 2).norm_sqr();
        assert!((p - 1.0).abs() < 1e-3, "{p}");
    }

    #[test]
    fn uncovered_inputs_are_rejected() {
        let cfg = DiffractionConfig::resonant(Mechanism::Bragg, Geometry::Single, 3.0, PI);
        let grid = MomentumGrid::new(16);
        let g = TransitionFunction::build(&cfg, grid, &[ColumnInput::ground(0)], &SolverSettings::default()).unwrap();
        let psi = WavePacket::gaussian(grid, 3, Mechanism::Bragg, InternalState::Ground, 1.0, 0.05).unwrap();
        assert!(matches!(g.apply(&psi), Err(Error::GridMismatch(_))));
        let shifted = WavePacket::zeros(MomentumGrid::centered(16, 0.01), 3, Mechanism::Bragg);
        assert!(matches!(g.apply(&shifted), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn shifted_grids_are_remapped() {
        // the two builds truncate around different ladder centres
        let cfg = DiffractionConfig::resonant(Mechanism::Bragg, Geometry::Single, 3.0, PI);
        let settings = SolverSettings::with_tolerances(1e-9, 1e-11);
        let inputs = [ColumnInput::ground(-1), ColumnInput::ground(0), ColumnInput::ground(1)];
        let a = TransitionFunction::build(&cfg, MomentumGrid::new(16), &inputs, &settings).unwrap();
        let b = TransitionFunction::build(&cfg, MomentumGrid::centered(16, 0.25), &inputs, &settings).unwrap();
        let psi = WavePacket::gaussian(MomentumGrid::new(16), 4, Mechanism::Bragg, InternalState::Ground, 0.1, 0.08).unwrap();
        let fa = a.apply(&psi).unwrap();
        let fb = b.apply(&psi).unwrap();
        assert_eq!(fa.n_max(), fb.n_max());
        for (x, y) in fa.density().iter().zip(fb.density()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn occupied_inputs_cover_the_packet() {
        let grid = MomentumGrid::new(64);
        let psi = WavePacket::gaussian(grid, 4, Mechanism::Raman, InternalState::Excited, -1.0, 0.2).unwrap();
        let inputs = occupied_inputs(&psi, 1e-14);
        assert_eq!(inputs, vec![ColumnInput::excited(-3), ColumnInput::excited(-2), ColumnInput::excited(-1), ColumnInput::excited(0), ColumnInput::excited(1)]);
    }
}
