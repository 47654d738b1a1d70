//! Unit conventions.
//!
//! Everything inside the solver is dimensionless: momenta in units of the
//! two-photon recoil ħK, frequencies in units of the recoil frequency
//! ω_K = ħK²/2M and times in units of 1/ω_K. An [`AtomPreset`] is only
//! needed to translate laboratory seconds into that time unit.

use serde::{Deserialize, Serialize};

/// Reduced Planck constant, J s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Mass and laser wavelength of the diffracted species.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomPreset {
    pub mass_kg: f64,
    pub wavelength_m: f64,
}

impl AtomPreset {
    /// ⁸⁷Rb on the D2 line.
    pub const RB87: AtomPreset = AtomPreset {
        mass_kg: 1.443_160_648e-25,
        wavelength_m: 780.241_209_686e-9,
    };

    /// Effective two-photon wave number K = k_b + k_r ≈ 2·(2π/λ), in 1/m.
    pub fn two_photon_wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::TAU / self.wavelength_m
    }

    /// Recoil frequency ω_K = ħK²/2M in rad/s.
    pub fn recoil_frequency(&self) -> f64 {
        let k = self.two_photon_wavenumber();
        HBAR * k * k / (2.0 * self.mass_kg)
    }
}

impl Default for AtomPreset {
    fn default() -> Self {
        AtomPreset::RB87
    }
}

/// Dimensionless unit system (ħK = ω_K = 1) plus the atom used for
/// second ↔ 1/ω_K conversions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub atom: AtomPreset,
}

impl UnitSystem {
    pub fn new(atom: AtomPreset) -> Self {
        UnitSystem { atom }
    }

    pub fn recoil_frequency(&self) -> f64 {
        self.atom.recoil_frequency()
    }

    pub fn seconds_to_dimensionless(&self, seconds: f64) -> f64 {
        seconds * self.recoil_frequency()
    }

    pub fn dimensionless_to_seconds(&self, time: f64) -> f64 {
        time / self.recoil_frequency()
    }

    pub fn micros_to_dimensionless(&self, micros: f64) -> f64 {
        self.seconds_to_dimensionless(micros * 1e-6)
    }

    pub fn dimensionless_to_micros(&self, time: f64) -> f64 {
        self.dimensionless_to_seconds(time) * 1e6
    }
}

/// Doppler frequency ω_D = pK/M for a momentum `p` in units of ħK, returned
/// in units of ω_K. With ħK = ω_K = 1 this is 2p.
pub fn doppler_frequency(p: f64) -> f64 {
    2.0 * p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rb87_recoil_frequency_matches_hand_computation() {
        // K = 4π/λ, ω_K = ħK²/2M computed step by step.
        let k = 4.0 * std::f64::consts::PI / 780.241_209_686e-9;
        let omega = 1.054_571_817e-34 * k * k / (2.0 * 1.443_160_648e-25);
        let units = UnitSystem::default();
        assert!((units.recoil_frequency() - omega).abs() / omega < 1e-14);
        // ≈ 2π × 15.08 kHz, i.e. 1/ω_K ≈ 10.55 µs.
        let khz = units.recoil_frequency() / std::f64::consts::TAU / 1e3;
        assert!((khz - 15.08).abs() < 0.01, "{khz}");
        let unit_time_us = units.dimensionless_to_micros(1.0);
        assert!((unit_time_us - 10.55).abs() < 0.01, "{unit_time_us}");
    }

    #[test]
    fn second_round_trip() {
        let units = UnitSystem::default();
        for &s in &[1e-9, 12.5e-6, 37.5e-6, 1.0, 3.7e2] {
            let back = units.dimensionless_to_seconds(units.seconds_to_dimensionless(s));
            assert!((back - s).abs() / s < 1e-12);
        }
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_frequency(0.0), 0.0);
        assert_eq!(doppler_frequency(0.5), 1.0);
        assert_eq!(doppler_frequency(-1.0), -2.0);
    }
}
