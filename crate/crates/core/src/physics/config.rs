use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::units::doppler_frequency;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Raman,
    Bragg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Single,
    Double,
}

impl Geometry {
    /// Ratio Ω_R/Ω of the effective Rabi frequency to the single-grating
    /// coupling strength.
    pub fn rabi_factor(self) -> f64 {
        match self {
            Geometry::Single => 2.0,
            Geometry::Double => SQRT_2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    /// Ω(t) = Ω₀ exp(−t²/2Δτ²).
    #[default]
    Gaussian,
    /// Ω(t) = Ω₀ on [−Δτ/2, Δτ/2]; `delta_tau` is the full duration.
    Box,
}

/// Largest retained diffraction order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TruncationOrder {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for TruncationOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TruncationOrder::Auto => s.serialize_str("auto"),
            TruncationOrder::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TruncationOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(n) => Ok(TruncationOrder::Fixed(n)),
            Raw::Text(t) if t.eq_ignore_ascii_case("auto") => Ok(TruncationOrder::Auto),
            Raw::Text(t) => t
                .parse()
                .map(TruncationOrder::Fixed)
                .map_err(|_| serde::de::Error::custom(format!("n_max must be `auto` or an integer, got `{t}`"))),
        }
    }
}

impl fmt::Display for TruncationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationOrder::Auto => f.write_str("auto"),
            TruncationOrder::Fixed(n) => write!(f, "{n}"),
        }
    }
}

/// Nominal pulse roles. Beam splitter and mirror fix the area to π/2 and π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    BeamSplitter,
    Mirror,
    Custom(f64),
}

impl PulseKind {
    pub fn area(self) -> f64 {
        match self {
            PulseKind::BeamSplitter => PI / 2.0,
            PulseKind::Mirror => PI,
            PulseKind::Custom(a) => a,
        }
    }

    /// Nominal role of a pulse with the given area.
    pub fn from_area(area: f64) -> Self {
        if (area - PI / 2.0).abs() < 1e-12 {
            PulseKind::BeamSplitter
        } else if (area - PI).abs() < 1e-12 {
            PulseKind::Mirror
        } else {
            PulseKind::Custom(area)
        }
    }
}

/// Everything needed to simulate one pulse.
///
/// `two_photon_detuning` is the combination Δω − ω_eg − ω_AC for Raman and
/// Δω for Bragg, in units of ω_K. The hyperfine splitting never enters on
/// its own.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffractionConfig {
    pub mechanism: Mechanism,
    pub geometry: Geometry,
    pub delta_tau: f64,
    pub pulse_area: f64,
    pub p0: f64,
    pub two_photon_detuning: f64,
    #[serde(default)]
    pub n_max: TruncationOrder,
    #[serde(default = "default_window")]
    pub time_window_factor: f64,
    #[serde(default)]
    pub shape: PulseShape,
}

fn default_window() -> f64 {
    5.0
}

impl DiffractionConfig {
    /// Gaussian pulse at p₀ = 0 with the detuning on resonance.
    pub fn resonant(mechanism: Mechanism, geometry: Geometry, delta_tau: f64, pulse_area: f64) -> Self {
        DiffractionConfig {
            mechanism,
            geometry,
            delta_tau,
            pulse_area,
            p0: 0.0,
            two_photon_detuning: resonance_detuning(mechanism, 0.0),
            n_max: TruncationOrder::Auto,
            time_window_factor: default_window(),
            shape: PulseShape::Gaussian,
        }
    }

    /// Moves the mean momentum and re-tunes the lasers to |p₀⟩ → |p₀+ħK⟩.
    pub fn with_p0_resonant(mut self, p0: f64) -> Self {
        self.p0 = p0;
        self.two_photon_detuning = resonance_detuning(self.mechanism, p0);
        self
    }

    pub fn with_area(mut self, area: f64) -> Self {
        self.pulse_area = area;
        self
    }

    pub fn with_n_max(mut self, n_max: TruncationOrder) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_tau.is_finite() && self.delta_tau > 0.0) {
            return Err(Error::config("delta_tau", format!("must be positive, got {}", self.delta_tau)));
        }
        if !(self.pulse_area.is_finite() && self.pulse_area >= 0.0) {
            return Err(Error::config("pulse_area", format!("must be non-negative, got {}", self.pulse_area)));
        }
        if !self.p0.is_finite() {
            return Err(Error::config("p0", "must be finite"));
        }
        if !self.two_photon_detuning.is_finite() {
            return Err(Error::config("two_photon_detuning", "must be finite"));
        }
        if let TruncationOrder::Fixed(n) = self.n_max {
            if n < 2 {
                return Err(Error::config("n_max", format!("must be at least 2, got {n}")));
            }
        }
        if !(self.time_window_factor.is_finite() && self.time_window_factor > 0.0) {
            return Err(Error::config("time_window_factor", "must be positive"));
        }
        Ok(())
    }

    /// Peak coupling Ω₀ realising `pulse_area` for this geometry and shape.
    pub fn peak_coupling(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian => peak_coupling_from_area(self.pulse_area, self.delta_tau, self.geometry),
            PulseShape::Box => self.pulse_area / (self.geometry.rabi_factor() * self.delta_tau),
        }
    }

    /// Regime parameter ε = Ω₀/ω_K.
    pub fn regime_parameter(&self) -> f64 {
        self.peak_coupling()
    }

    /// Integration interval. Gaussian pulses are cut at ±fΔτ.
    pub fn time_window(&self) -> (f64, f64) {
        match self.shape {
            PulseShape::Gaussian => {
                let half = self.time_window_factor * self.delta_tau;
                (-half, half)
            }
            PulseShape::Box => (-0.5 * self.delta_tau, 0.5 * self.delta_tau),
        }
    }

    pub fn envelope(&self) -> Envelope {
        match self.shape {
            PulseShape::Gaussian => Envelope::Gaussian {
                peak: self.peak_coupling(),
                width: self.delta_tau,
            },
            PulseShape::Box => Envelope::Box {
                height: self.peak_coupling(),
                start: -0.5 * self.delta_tau,
                end: 0.5 * self.delta_tau,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Envelope {
    Gaussian { peak: f64, width: f64 },
    Box { height: f64, start: f64, end: f64 },
}

impl Envelope {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Envelope::Gaussian { peak, width } => gaussian_envelope(t, peak, width),
            Envelope::Box { height, start, end } => {
                if t >= start && t <= end {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_dark(&self) -> bool {
        match *self {
            Envelope::Gaussian { peak, .. } => peak == 0.0,
            Envelope::Box { height, .. } => height == 0.0,
        }
    }
}

#[inline]
pub fn gaussian_envelope(t: f64, peak: f64, delta_tau: f64) -> f64 {
    peak * (-t * t / (2.0 * delta_tau * delta_tau)).exp()
}

/// Ω₀ such that ∫Ω_R dt equals `area` for a Gaussian of width `delta_tau`.
pub fn peak_coupling_from_area(area: f64, delta_tau: f64, geometry: Geometry) -> f64 {
    area / (geometry.rabi_factor() * delta_tau * (2.0 * PI).sqrt())
}

/// Two-photon detuning that makes |p₀⟩ → |p₀+ħK⟩ resonant, ω_K + p₀K/M.
/// Identical for both mechanisms in the combined-detuning convention.
pub fn resonance_detuning(_mechanism: Mechanism, p0: f64) -> f64 {
    1.0 + doppler_frequency(p0)
}
