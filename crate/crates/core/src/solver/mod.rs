//! Time evolution of amplitude states through one light pulse.

pub mod dopri;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{AmplitudeState, DiffractionConfig, Ladder, TruncationOrder};

pub use dopri::{integrate, IntegrationStats};

/// Smallest ladder tried by the truncation search.
pub const TRUNCATION_FLOOR: usize = 3;
/// Largest ladder tried before giving up.
pub const TRUNCATION_CEILING: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step in units of 1/ω_K; `None` means Δτ/4.
    #[serde(default)]
    pub max_step: Option<f64>,
    /// Truncation acceptance threshold; `None` means `rel_tol`.
    #[serde(default)]
    pub convergence_norm_tol: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    2_000_000
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rel_tol: 1e-3,
            abs_tol: 1e-6,
            max_step: None,
            convergence_norm_tol: None,
            max_steps: default_max_steps(),
        }
    }
}

impl SolverSettings {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        SolverSettings {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol <= self.rel_tol && self.rel_tol < 1.0) {
            return Err(Error::config(
                "rel_tol",
                format!("need 0 < abs_tol ≤ rel_tol < 1, got abs_tol = {}, rel_tol = {}", self.abs_tol, self.rel_tol),
            ));
        }
        if let Some(h) = self.max_step {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::config("max_step", "must be positive"));
            }
        }
        if let Some(tol) = self.convergence_norm_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::config("convergence_norm_tol", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn convergence_tol(&self) -> f64 {
        self.convergence_norm_tol.unwrap_or(self.rel_tol)
    }
}

/// Result of a truncation-controlled solve.
#[derive(Clone, Debug)]
pub struct Converged {
    pub state: AmplitudeState,
    pub n_max: usize,
    /// Max-norm change against the next larger ladder; `None` when the
    /// order was fixed by the caller.
    pub difference: Option<f64>,
}

/// Propagates `initial` across the pulse window.
///
/// Uses the ladder size of `initial` unless the config fixes `n_max`.
pub fn evolve(initial: &AmplitudeState, config: &DiffractionConfig, settings: &SolverSettings) -> Result<AmplitudeState> {
    config.validate()?;
    settings.validate()?;
    if initial.mechanism() != config.mechanism {
        return Err(Error::MalformedState(format!(
            "{:?} pulse applied to a {:?} state",
            config.mechanism,
            initial.mechanism()
        )));
    }
    let start = match config.n_max {
        TruncationOrder::Fixed(n) if n != initial.n_max() => {
            if initial.support_radius() > n {
                return Err(Error::MalformedState(format!("initial state does not fit into n_max = {n}")));
            }
            initial.resized(n)
        }
        _ => initial.clone(),
    };
    let ladder = Ladder::new(config, start.n_max(), start.quasi_momentum());
    if ladder.envelope().is_dark() {
        return Ok(start);
    }
    let (t0, t1) = config.time_window();
    let h_init = config.delta_tau / 100.0;
    let h_max = settings.max_step.unwrap_or(config.delta_tau / 4.0);
    let (y, _) = integrate(|t, y, dy| ladder.derivative(t, y, dy), t0, t1, &start.to_flat(), h_init, h_max, settings)?;
    AmplitudeState::from_flat(config.mechanism, start.n_max(), start.quasi_momentum(), &y)
}

/// Propagates with the smallest ladder whose result agrees with the next
/// larger one to within `convergence_tol` (max-norm over shared orders).
///
/// A fixed `n_max` in the config bypasses the search.
pub fn evolve_converged(initial: &AmplitudeState, config: &DiffractionConfig, settings: &SolverSettings) -> Result<Converged> {
    evolve_converged_from(initial, config, settings, TRUNCATION_FLOOR)
}

/// As [`evolve_converged`] but starting the search at `floor`.
pub fn evolve_converged_from(
    initial: &AmplitudeState,
    config: &DiffractionConfig,
    settings: &SolverSettings,
    floor: usize,
) -> Result<Converged> {
    if let TruncationOrder::Fixed(n) = config.n_max {
        let state = evolve(initial, config, settings)?;
        return Ok(Converged {
            state,
            n_max: n,
            difference: None,
        });
    }
    let tol = settings.convergence_tol();
    let mut n = floor.max(TRUNCATION_FLOOR).max(initial.support_radius() + 1);
    let mut current = evolve(&initial.resized(n), config, settings)?;
    let mut difference = f64::INFINITY;
    while n < TRUNCATION_CEILING {
        let next = evolve(&initial.resized(n + 1), config, settings)?;
        difference = current.overlap_distance(&next);
        if difference <= tol {
            return Ok(Converged {
                state: current,
                n_max: n,
                difference: Some(difference),
            });
        }
        current = next;
        n += 1;
    }
    Err(Error::NotConverged {
        n_max: TRUNCATION_CEILING,
        difference,
    })
}
