//! Right-hand sides of the coupled momentum-ladder equations.
//!
//! All four systems share one structure. A grating couples a state at
//! order m to a state at order m + 1 with the interaction-picture phase
//! e^{−iνt}, where ν is the energy mismatch of the two-photon transition:
//!
//! * the co-propagating grating (absorbs Δω): ν = 2(p + m) + 1 − δ
//! * the counter-propagating grating (emits Δω): ν = 2(p + m) + 1 + δ
//!
//! with p the quasi-momentum (ħK units) and δ the combined two-photon
//! detuning (ω_K units). The amplitude equations are
//!
//! ```text
//! d/dt lower = iΩ(t) e^{−iνt} upper,    d/dt upper = iΩ(t) e^{+iνt} lower
//! ```
//!
//! Which internal states a grating links depends on the mechanism:
//!
//! | system        | co-propagating        | counter-propagating   |
//! |---------------|-----------------------|-----------------------|
//! | single Bragg  | g_m ↔ g_{m+1}         | (none)                |
//! | double Bragg  | g_m ↔ g_{m+1}         | g_m ↔ g_{m+1}         |
//! | single Raman  | g_m ↔ e_{m+1}         | (none)                |
//! | double Raman  | g_m ↔ e_{m+1}         | e_m ↔ g_{m+1}         |
//!
//! Expanding the table reproduces the general equations term by term,
//! including the resonant special cases. Bonds that would leave
//! [−n_max, n_max] are dropped.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::physics::config::{DiffractionConfig, Envelope, Geometry, Mechanism};
use crate::physics::state::{internal_states, AmplitudeState};
use crate::physics::units::doppler_frequency;

/// Relative strength of the two gratings. Single diffraction is the
/// double-diffraction system with the counter-propagating grating switched off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GratingWeights {
    pub co: f64,
    pub counter: f64,
}

impl GratingWeights {
    pub fn for_geometry(geometry: Geometry) -> Self {
        match geometry {
            Geometry::Single => GratingWeights { co: 1.0, counter: 0.0 },
            Geometry::Double => GratingWeights { co: 1.0, counter: 1.0 },
        }
    }
}

/// A fully specified ladder Hamiltonian for one quasi-momentum.
#[derive(Clone, Debug)]
pub struct Ladder {
    mechanism: Mechanism,
    weights: GratingWeights,
    n_max: usize,
    quasi_momentum: f64,
    detuning: f64,
    envelope: Envelope,
}

impl Ladder {
    pub fn new(config: &DiffractionConfig, n_max: usize, quasi_momentum: f64) -> Self {
        Ladder {
            mechanism: config.mechanism,
            weights: GratingWeights::for_geometry(config.geometry),
            n_max,
            quasi_momentum,
            detuning: config.two_photon_detuning,
            envelope: config.envelope(),
        }
    }

    pub fn with_weights(mut self, weights: GratingWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn dimension(&self) -> usize {
        (2 * self.n_max + 1) * internal_states(self.mechanism)
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    /// dy/dt for the flat layout of [`AmplitudeState::to_flat`].
    pub fn derivative(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        debug_assert_eq!(y.len(), self.dimension());
        dy.iter_mut().for_each(|d| *d = C64::new(0.0, 0.0));
        let omega = self.envelope.at(t);
        if omega == 0.0 || self.n_max == 0 {
            return;
        }
        let n = self.n_max as i32;
        let len = 2 * self.n_max + 1;
        // e^{−iνt} for consecutive m differs by e^{−2it}.
        let step = C64::from_polar(1.0, -2.0 * t);
        let base = doppler_frequency(self.quasi_momentum + (-n) as f64) + 1.0;

        let gratings = [(self.weights.co, -self.detuning), (self.weights.counter, self.detuning)];
        for (which, &(weight, shift)) in gratings.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            let strength = C64::new(0.0, omega * weight);
            let mut phase = C64::from_polar(1.0, -(base + shift) * t);
            for i in 0..len - 1 {
                // lower index i (order i − n), upper index i + 1
                let (lower, upper) = match (self.mechanism, which) {
                    (Mechanism::Bragg, _) => (i, i + 1),
                    (Mechanism::Raman, 0) => (i, len + i + 1),
                    (Mechanism::Raman, _) => (len + i, i + 1),
                };
                let c = strength * phase;
                let c_conj = strength * phase.conj();
                dy[lower] += c * y[upper];
                dy[upper] += c_conj * y[lower];
                phase *= step;
            }
        }
    }
}

/// Public form of the right-hand side for a single state.
///
/// Fails when the state does not carry the amplitudes the mechanism needs.
pub fn rhs(state: &AmplitudeState, t: f64, config: &DiffractionConfig) -> Result<AmplitudeState> {
    if state.mechanism() != config.mechanism {
        return Err(Error::MalformedState(format!(
            "{:?} right-hand side invoked on a {:?} state",
            config.mechanism,
            state.mechanism()
        )));
    }
    let ladder = Ladder::new(config, state.n_max(), state.quasi_momentum());
    let y = state.to_flat();
    let mut dy = vec![C64::new(0.0, 0.0); y.len()];
    ladder.derivative(t, &y, &mut dy);
    AmplitudeState::from_flat(config.mechanism, state.n_max(), state.quasi_momentum(), &dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::config::DiffractionConfig;
    use crate::physics::state::InternalState::{Excited as E, Ground as G};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const I: C64 = C64::new(0.0, 1.0);

    fn cis(x: f64) -> C64 {
        C64::from_polar(1.0, x)
    }

    fn random_state(mech: Mechanism, n_max: usize, q: f64, rng: &mut ChaCha8Rng) -> AmplitudeState {
        let mut s = AmplitudeState::zeros(mech, n_max, q);
        for n in s.orders() {
            s.set(G, n, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
            if mech == Mechanism::Raman {
                s.set(E, n, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
            }
        }
        s
    }

    fn config(mech: Mechanism, geom: Geometry, detuning: f64) -> DiffractionConfig {
        let mut c = DiffractionConfig::resonant(mech, geom, 1.3, PI);
        c.two_photon_detuning = detuning;
        c
    }

    // Direct transcriptions of the general equations, written out with
    // explicit ω_D, δ and recoil terms. Truncation: neighbours outside the
    // ladder contribute nothing.

    fn oracle_single_raman(s: &AmplitudeState, t: f64, omega: f64, delta: f64) -> AmplitudeState {
        let wd = 2.0 * s.quasi_momentum();
        let mut d = AmplitudeState::zeros(Mechanism::Raman, s.n_max(), s.quasi_momentum());
        for n in s.orders() {
            let nf = n as f64;
            // i ġ_n = −Ω e^{−iω_D t} e^{−i[−δ + (1+2n)]t} e_{n+1}
            let dg = I * omega * cis(-wd * t) * cis(-(-delta + 1.0 + 2.0 * nf) * t) * s.amplitude(E, n + 1);
            // i ė_{n} = −Ω e^{iω_D t} e^{−i[δ − (1+2(n−1))]t} g_{n−1}
            let m = nf - 1.0;
            let de = I * omega * cis(wd * t) * cis(-(delta - (1.0 + 2.0 * m)) * t) * s.amplitude(G, n - 1);
            d.set(G, n, dg).unwrap();
            d.set(E, n, de).unwrap();
        }
        d
    }

    fn oracle_single_bragg(s: &AmplitudeState, t: f64, omega: f64, delta: f64) -> AmplitudeState {
        let wd = 2.0 * s.quasi_momentum();
        let mut d = AmplitudeState::zeros(Mechanism::Bragg, s.n_max(), s.quasi_momentum());
        for n in s.orders() {
            let nf = n as f64;
            let up = cis(-wd * t) * cis((delta - (2.0 * nf + 1.0)) * t) * s.amplitude(G, n + 1);
            let down = cis(wd * t) * cis(-(delta - (2.0 * nf - 1.0)) * t) * s.amplitude(G, n - 1);
            d.set(G, n, I * omega * (up + down)).unwrap();
        }
        d
    }

    fn oracle_double_raman(s: &AmplitudeState, t: f64, omega: f64, delta: f64) -> AmplitudeState {
        let wd = 2.0 * s.quasi_momentum();
        let mut d = AmplitudeState::zeros(Mechanism::Raman, s.n_max(), s.quasi_momentum());
        for n in s.orders() {
            let nf = n as f64;
            let dg = cis(-wd * t) * cis(-(-delta + 1.0 + 2.0 * nf) * t) * s.amplitude(E, n + 1)
                + cis(wd * t) * cis(-(-delta + 1.0 - 2.0 * nf) * t) * s.amplitude(E, n - 1);
            d.set(G, n, I * omega * dg).unwrap();
            // written for e_{m+1} with m = n − 1
            let m = nf - 1.0;
            let de = cis(-wd * t) * cis(-(delta + 3.0 + 2.0 * m) * t) * s.amplitude(G, n + 1)
                + cis(wd * t) * cis(-(delta - (1.0 + 2.0 * m)) * t) * s.amplitude(G, n - 1);
            d.set(E, n, I * omega * de).unwrap();
        }
        d
    }

    fn oracle_double_bragg(s: &AmplitudeState, t: f64, omega: f64, delta: f64) -> AmplitudeState {
        let wd = 2.0 * s.quasi_momentum();
        let mut d = AmplitudeState::zeros(Mechanism::Bragg, s.n_max(), s.quasi_momentum());
        for n in s.orders() {
            let nf = n as f64;
            let up = cis(-wd * t) * (cis(-(delta + 2.0 * nf + 1.0) * t) + cis((delta - (2.0 * nf + 1.0)) * t)) * s.amplitude(G, n + 1);
            let down = cis(wd * t) * (cis((delta + 2.0 * nf - 1.0) * t) + cis(-(delta - (2.0 * nf - 1.0)) * t)) * s.amplitude(G, n - 1);
            d.set(G, n, I * omega * (up + down)).unwrap();
        }
        d
    }

    fn assert_close(a: &AmplitudeState, b: &AmplitudeState, tol: f64) {
        let dist = a.overlap_distance(b);
        assert!(dist < tol, "distance {dist}");
    }

    #[test]
    fn matches_general_equations_for_all_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let q = rng.gen_range(-0.5..0.5);
            let delta = rng.gen_range(-1.0..3.0);
            let t = rng.gen_range(-6.0..6.0);
            let n_max = 2 + trial % 5;
            for (mech, geom) in [
                (Mechanism::Raman, Geometry::Single),
                (Mechanism::Bragg, Geometry::Single),
                (Mechanism::Raman, Geometry::Double),
                (Mechanism::Bragg, Geometry::Double),
            ] {
                let cfg = config(mech, geom, delta);
                let omega = cfg.envelope().at(t);
                let s = random_state(mech, n_max, q, &mut rng);
                let got = rhs(&s, t, &cfg).unwrap();
                let want = match (mech, geom) {
                    (Mechanism::Raman, Geometry::Single) => oracle_single_raman(&s, t, omega, delta),
                    (Mechanism::Bragg, Geometry::Single) => oracle_single_bragg(&s, t, omega, delta),
                    (Mechanism::Raman, Geometry::Double) => oracle_double_raman(&s, t, omega, delta),
                    (Mechanism::Bragg, Geometry::Double) => oracle_double_bragg(&s, t, omega, delta),
                };
                assert_close(&got, &want, 1e-12);
            }
        }
    }

    #[test]
    fn resonant_single_raman_is_the_two_level_system() {
        // ġ_n = iΩ e^{−i(ω_D + 2n)t} e_{n+1}, ė_{n+1} = iΩ e^{i(ω_D + 2n)t} g_n
        let cfg = config(Mechanism::Raman, Geometry::Single, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(Mechanism::Raman, 5, 0.2, &mut rng);
        let t = 0.7;
        let omega = cfg.envelope().at(t);
        let d = rhs(&s, t, &cfg).unwrap();
        let wd = 0.4;
        for n in -5..5 {
            let nf = n as f64;
            let dg = I * omega * cis(-(wd + 2.0 * nf) * t) * s.amplitude(E, n + 1);
            assert!((d.amplitude(G, n) - dg).norm() < 1e-13);
            let de = I * omega * cis((wd + 2.0 * nf) * t) * s.amplitude(G, n);
            assert!((d.amplitude(E, n + 1) - de).norm() < 1e-13);
        }
    }

    #[test]
    fn resonant_double_bragg_center_has_static_and_oscillating_terms() {
        // ġ_0 = iΩ[(e^{−2it} + 1) g_1 + (1 + e^{−2it}) g_{−1}] at ω_D = 0.
        let cfg = config(Mechanism::Bragg, Geometry::Double, 1.0);
        let mut s = AmplitudeState::zeros(Mechanism::Bragg, 3, 0.0);
        s.set(G, 1, C64::new(1.0, 0.0)).unwrap();
        s.set(G, -1, C64::new(0.0, 1.0)).unwrap();
        let t = 0.9;
        let omega = cfg.envelope().at(t);
        let d = rhs(&s, t, &cfg).unwrap();
        let want = I * omega * ((cis(-2.0 * t) + 1.0) * C64::new(1.0, 0.0) + (1.0 + cis(-2.0 * t)) * C64::new(0.0, 1.0));
        assert!((d.amplitude(G, 0) - want).norm() < 1e-13);
    }

    #[test]
    fn dark_pulse_gives_zero_derivative() {
        for mech in [Mechanism::Raman, Mechanism::Bragg] {
            let cfg = DiffractionConfig::resonant(mech, Geometry::Double, 2.0, 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let s = random_state(mech, 4, 0.1, &mut rng);
            let d = rhs(&s, 0.0, &cfg).unwrap();
            assert_eq!(d.norm_sqr(), 0.0);
        }
    }

    #[test]
    fn generator_is_anti_hermitian() {
        // Re⟨y, f(y)⟩ = 0 for every y, so d|y|²/dt vanishes identically.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (mech, geom) in [
            (Mechanism::Raman, Geometry::Single),
            (Mechanism::Bragg, Geometry::Single),
            (Mechanism::Raman, Geometry::Double),
            (Mechanism::Bragg, Geometry::Double),
        ] {
            let cfg = config(mech, geom, 1.3);
            let s = random_state(mech, 4, 0.3, &mut rng);
            let d = rhs(&s, 0.4, &cfg).unwrap();
            let y = s.to_flat();
            let dy = d.to_flat();
            let rate: f64 = y.iter().zip(&dy).map(|(a, b)| (a.conj() * b).re).sum();
            assert!(rate.abs() < 1e-13, "{rate}");
        }
    }

    #[test]
    fn single_bragg_is_double_bragg_without_counter_grating() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let double = config(Mechanism::Bragg, Geometry::Double, 1.2);
        let single = config(Mechanism::Bragg, Geometry::Single, 1.2);
        let s = random_state(Mechanism::Bragg, 5, -0.2, &mut rng);
        // same area ⇒ the double pulse is brighter by 2/√2
        let ladder = Ladder::new(&double, 5, -0.2).with_weights(GratingWeights {
            co: std::f64::consts::FRAC_1_SQRT_2,
            counter: 0.0,
        });
        let mut a = vec![C64::new(0.0, 0.0); ladder.dimension()];
        ladder.derivative(1.1, &s.to_flat(), &mut a);
        let b = rhs(&s, 1.1, &single).unwrap().to_flat();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let cfg = config(Mechanism::Raman, Geometry::Single, 1.0);
        let s = AmplitudeState::zeros(Mechanism::Bragg, 3, 0.0);
        assert!(matches!(rhs(&s, 0.0, &cfg), Err(Error::MalformedState(_))));
    }
}
