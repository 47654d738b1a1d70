use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::config::Mechanism;

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InternalState {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl InternalState {
    pub fn label(self) -> &'static str {
        match self {
            InternalState::Ground => "g",
            InternalState::Excited => "e",
        }
    }

    pub fn index(self) -> usize {
        match self {
            InternalState::Ground => 0,
            InternalState::Excited => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            InternalState::Ground
        } else {
            InternalState::Excited
        }
    }
}

/// Number of internal states carried for a mechanism.
pub fn internal_states(mechanism: Mechanism) -> usize {
    match mechanism {
        Mechanism::Raman => 2,
        Mechanism::Bragg => 1,
    }
}

/// Amplitudes g_n = g(p + nħK) (and e_n for Raman) for n ∈ [−n_max, n_max].
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeState {
    n_max: usize,
    quasi_momentum: f64,
    g: Vec<C64>,
    e: Option<Vec<C64>>,
}

impl AmplitudeState {
    pub fn zeros(mechanism: Mechanism, n_max: usize, quasi_momentum: f64) -> Self {
        let len = 2 * n_max + 1;
        AmplitudeState {
            n_max,
            quasi_momentum,
            g: vec![C64::new(0.0, 0.0); len],
            e: match mechanism {
                Mechanism::Raman => Some(vec![C64::new(0.0, 0.0); len]),
                Mechanism::Bragg => None,
            },
        }
    }

    /// Momentum eigenstate |state, p + order·ħK⟩.
    pub fn eigenstate(mechanism: Mechanism, n_max: usize, quasi_momentum: f64, state: InternalState, order: i32) -> Result<Self> {
        let mut s = Self::zeros(mechanism, n_max, quasi_momentum);
        s.set(state, order, C64::new(1.0, 0.0))?;
        Ok(s)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn quasi_momentum(&self) -> f64 {
        self.quasi_momentum
    }

    pub fn mechanism(&self) -> Mechanism {
        if self.e.is_some() {
            Mechanism::Raman
        } else {
            Mechanism::Bragg
        }
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<i32> {
        -(self.n_max as i32)..=self.n_max as i32
    }

    pub fn ground(&self) -> &[C64] {
        &self.g
    }

    pub fn excited(&self) -> Option<&[C64]> {
        self.e.as_deref()
    }

    fn slot(&self, order: i32) -> Option<usize> {
        let i = order + self.n_max as i32;
        (i >= 0 && i <= 2 * self.n_max as i32).then_some(i as usize)
    }

    /// Amplitude of |state, p + order·ħK⟩; zero outside the ladder.
    pub fn amplitude(&self, state: InternalState, order: i32) -> C64 {
        let Some(i) = self.slot(order) else {
            return C64::new(0.0, 0.0);
        };
        match state {
            InternalState::Ground => self.g[i],
            InternalState::Excited => self.e.as_ref().map_or(C64::new(0.0, 0.0), |e| e[i]),
        }
    }

    pub fn set(&mut self, state: InternalState, order: i32, value: C64) -> Result<()> {
        let i = self
            .slot(order)
            .ok_or_else(|| Error::MalformedState(format!("order {order} outside ±{}", self.n_max)))?;
        match state {
            InternalState::Ground => self.g[i] = value,
            InternalState::Excited => match self.e.as_mut() {
                Some(e) => e[i] = value,
                None => return Err(Error::MalformedState("Bragg states carry no excited amplitudes".into())),
            },
        }
        Ok(())
    }

    pub fn probability(&self, state: InternalState, order: i32) -> f64 {
        self.amplitude(state, order).norm_sqr()
    }

    /// Total probability in diffraction order `order`, summed over internal states.
    pub fn order_probability(&self, order: i32) -> f64 {
        self.probability(InternalState::Ground, order) + self.probability(InternalState::Excited, order)
    }

    pub fn norm_sqr(&self) -> f64 {
        let e = self.e.as_ref().map_or(0.0, |e| e.iter().map(|a| a.norm_sqr()).sum());
        self.g.iter().map(|a| a.norm_sqr()).sum::<f64>() + e
    }

    /// Flat layout used by the integrator: all g then all e.
    pub fn to_flat(&self) -> Vec<C64> {
        let mut v = self.g.clone();
        if let Some(e) = &self.e {
            v.extend_from_slice(e);
        }
        v
    }

    pub fn from_flat(mechanism: Mechanism, n_max: usize, quasi_momentum: f64, flat: &[C64]) -> Result<Self> {
        let len = 2 * n_max + 1;
        let expected = len * internal_states(mechanism);
        if flat.len() != expected {
            return Err(Error::MalformedState(format!("expected {expected} amplitudes, got {}", flat.len())));
        }
        Ok(AmplitudeState {
            n_max,
            quasi_momentum,
            g: flat[..len].to_vec(),
            e: match mechanism {
                Mechanism::Raman => Some(flat[len..].to_vec()),
                Mechanism::Bragg => None,
            },
        })
    }

    /// Copy onto a ladder of a different size, dropping orders that no longer fit.
    pub fn resized(&self, n_max: usize) -> Self {
        let mut out = Self::zeros(self.mechanism(), n_max, self.quasi_momentum);
        let keep = n_max.min(self.n_max) as i32;
        for n in -keep..=keep {
            let src = (n + self.n_max as i32) as usize;
            let dst = (n + n_max as i32) as usize;
            out.g[dst] = self.g[src];
            if let (Some(a), Some(b)) = (out.e.as_mut(), self.e.as_ref()) {
                a[dst] = b[src];
            }
        }
        out
    }

    /// Largest |order| with a non-zero amplitude.
    pub fn support_radius(&self) -> usize {
        self.orders()
            .filter(|&n| self.order_probability(n) > 0.0)
            .map(|n| n.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Max-norm distance over the orders both ladders share.
    pub fn overlap_distance(&self, other: &AmplitudeState) -> f64 {
        let keep = self.n_max.min(other.n_max) as i32;
        let mut worst: f64 = 0.0;
        for n in -keep..=keep {
            for s in [InternalState::Ground, InternalState::Excited] {
                worst = worst.max((self.amplitude(s, n) - other.amplitude(s, n)).norm());
            }
        }
        worst
    }
}
