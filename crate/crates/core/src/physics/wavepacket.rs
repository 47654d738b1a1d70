use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::config::Mechanism;
use crate::physics::state::{internal_states, InternalState, C64};

/// Uniform quasi-momentum sampling of one ħK cell.
///
/// Samples sit at q_k = offset − ½ + k/N for k = 0..N, so every momentum
/// p = q_k + n (n integer) is itself a grid point and shifts by whole
/// recoils map the grid onto itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    pub points_per_hbark: usize,
    pub offset: f64,
}

impl MomentumGrid {
    pub fn new(points_per_hbark: usize) -> Self {
        MomentumGrid {
            points_per_hbark,
            offset: 0.0,
        }
    }

    pub fn centered(points_per_hbark: usize, offset: f64) -> Self {
        MomentumGrid { points_per_hbark, offset }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_hbark < 2 {
            return Err(Error::config("grid_points", format!("need at least 2 samples per hbar K, got {}", self.points_per_hbark)));
        }
        if !self.offset.is_finite() {
            return Err(Error::config("grid_offset", "must be finite"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_hbark as f64
    }

    pub fn quasi_momentum(&self, k: usize) -> f64 {
        self.offset - 0.5 + k as f64 / self.points_per_hbark as f64
    }

    pub fn quasi_momenta(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points_per_hbark).map(move |k| self.quasi_momentum(k))
    }

    /// Same spacing and offsets differing by a whole number of samples.
    pub fn compatible_with(&self, other: &MomentumGrid) -> bool {
        if self.points_per_hbark != other.points_per_hbark {
            return false;
        }
        let shift = (self.offset - other.offset) * self.points_per_hbark as f64;
        (shift - shift.round()).abs() < 1e-9
    }
}

/// Momentum-space wave function on [offset − n_max − ½, offset + n_max + ½).
///
/// Sample index (order n, cell index k) sits at p = q_k + n. Normalisation
/// is Σ|ψ|²·dp = 1, the trapezoidal rule for functions that vanish at the
/// grid edges.
#[derive(Clone, Debug, PartialEq)]
pub struct WavePacket {
    grid: MomentumGrid,
    n_max: usize,
    g: Vec<C64>,
    e: Option<Vec<C64>>,
}

impl WavePacket {
    pub fn zeros(grid: MomentumGrid, n_max: usize, mechanism: Mechanism) -> Self {
        let len = (2 * n_max + 1) * grid.points_per_hbark;
        WavePacket {
            grid,
            n_max,
            g: vec![C64::new(0.0, 0.0); len],
            e: (internal_states(mechanism) == 2).then(|| vec![C64::new(0.0, 0.0); len]),
        }
    }

    /// Normalised Gaussian ψ(p) ∝ exp[−(p − center)²/4Δ℘²] in `state`.
    pub fn gaussian(
        grid: MomentumGrid,
        n_max: usize,
        mechanism: Mechanism,
        state: InternalState,
        center: f64,
        width: f64,
    ) -> Result<Self> {
        grid.validate()?;
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::config("delta_p", format!("must be positive, got {width}")));
        }
        let mut packet = Self::zeros(grid, n_max, mechanism);
        let values: Vec<C64> = (0..packet.len())
            .map(|i| {
                let x = packet.momentum_at(i) - center;
                C64::new((-x * x / (4.0 * width * width)).exp(), 0.0)
            })
            .collect();
        *packet.component_mut(state)? = values;
        let norm = packet.norm_sqr();
        if norm == 0.0 {
            return Err(Error::config("delta_p", "packet has no weight on the grid"));
        }
        packet.scale(1.0 / norm.sqrt());
        Ok(packet)
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mechanism(&self) -> Mechanism {
        if self.e.is_some() {
            Mechanism::Raman
        } else {
            Mechanism::Bragg
        }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<i32> {
        -(self.n_max as i32)..=self.n_max as i32
    }

    pub fn index(&self, order: i32, k: usize) -> Option<usize> {
        let slot = order + self.n_max as i32;
        (slot >= 0 && slot <= 2 * self.n_max as i32 && k < self.grid.points_per_hbark)
            .then(|| slot as usize * self.grid.points_per_hbark + k)
    }

    pub fn momentum_at(&self, i: usize) -> f64 {
        let n = (i / self.grid.points_per_hbark) as i32 - self.n_max as i32;
        self.grid.quasi_momentum(i % self.grid.points_per_hbark) + n as f64
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.momentum_at(i)).collect()
    }

    pub fn component(&self, state: InternalState) -> Option<&[C64]> {
        match state {
            InternalState::Ground => Some(&self.g),
            InternalState::Excited => self.e.as_deref(),
        }
    }

    pub fn component_mut(&mut self, state: InternalState) -> Result<&mut Vec<C64>> {
        match state {
            InternalState::Ground => Ok(&mut self.g),
            InternalState::Excited => self
                .e
                .as_mut()
                .ok_or_else(|| Error::MalformedState("Bragg wave packets carry no excited component".into())),
        }
    }

    pub fn value(&self, state: InternalState, order: i32, k: usize) -> C64 {
        match (self.index(order, k), self.component(state)) {
            (Some(i), Some(c)) => c[i],
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.g.iter_mut().for_each(|a| *a *= factor);
        if let Some(e) = self.e.as_mut() {
            e.iter_mut().for_each(|a| *a *= factor);
        }
    }

    /// |ψ_g|² + |ψ_e|² per sample.
    pub fn density(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.g.iter().map(|a| a.norm_sqr()).collect();
        if let Some(e) = &self.e {
            d.iter_mut().zip(e).for_each(|(x, a)| *x += a.norm_sqr());
        }
        d
    }

    pub fn norm_sqr(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.grid.spacing()
    }

    /// Probability in the cell [offset + order − ½, offset + order + ½).
    pub fn cell_probability(&self, order: i32) -> f64 {
        let n = self.grid.points_per_hbark;
        match self.index(order, 0) {
            Some(start) => self.density()[start..start + n].iter().sum::<f64>() * self.grid.spacing(),
            None => 0.0,
        }
    }

    /// ∫|ψ|² dp over [a, b] using the piecewise-linear interpolant of the
    /// density. Equals the trapezoidal rule when a and b are grid points.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if b <= a || self.is_empty() {
            return 0.0;
        }
        let density = self.density();
        let h = self.grid.spacing();
        let p0 = self.momentum_at(0);
        let mut total = 0.0;
        for i in 0..density.len() - 1 {
            let (x0, x1) = (p0 + i as f64 * h, p0 + (i + 1) as f64 * h);
            let lo = x0.max(a);
            let hi = x1.min(b);
            if hi <= lo {
                continue;
            }
            // exact integral of the linear segment over [lo, hi]
            let f = |x: f64| density[i] + (density[i + 1] - density[i]) * (x - x0) / h;
            total += 0.5 * (f(lo) + f(hi)) * (hi - lo);
        }
        total
    }

    /// Copy only the (state, order) cell, zeroing everything else.
    pub fn project(&self, state: InternalState, order: i32) -> WavePacket {
        let mut out = WavePacket::zeros(self.grid, self.n_max, self.mechanism());
        if let (Some(start), Some(src)) = (self.index(order, 0), self.component(state)) {
            let n = self.grid.points_per_hbark;
            if let Ok(dst) = out.component_mut(state) {
                dst[start..start + n].copy_from_slice(&src[start..start + n]);
            }
        }
        out
    }

    /// Linear combination a·self + b·other on identical grids.
    pub fn combine(&self, a: C64, other: &WavePacket, b: C64) -> Result<WavePacket> {
        if self.grid != other.grid || self.n_max != other.n_max || self.mechanism() != other.mechanism() {
            return Err(Error::GridMismatch("cannot combine packets on different grids".into()));
        }
        let mix = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect::<Vec<_>>();
        Ok(WavePacket {
            grid: self.grid,
            n_max: self.n_max,
            g: mix(&self.g, &other.g),
            e: match (&self.e, &other.e) {
                (Some(x), Some(y)) => Some(mix(x, y)),
                _ => None,
            },
        })
    }
}
