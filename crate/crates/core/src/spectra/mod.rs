//! One-dimensional bound systems: potentials, spectra and eigenfunctions.
//!
//! All quantities use natural units with `ħ = 1` and `2M = 1`, so the
//! Hamiltonian is `H = -d²/dx² + V(x)`, the local momentum is
//! `p_n(x) = √(E_n − V(x))` and a classical particle moves with `ẋ = 2p`.
//!
//! The infinite square well and the harmonic oscillator have closed-form
//! eigenfunctions. The Morse and Rosen-Morse I potentials use analytic
//! spectra but Numerov eigenfunctions, solved lazily and cached per level.
//! A bare polynomial spectrum (no potential) is supported for time-scale
//! analysis only.

mod classical;
mod numerov;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

pub(crate) use classical::unfold_in_well;
pub use classical::{classical_period, classical_trajectory, turning_points, Path, PathPoint};
pub use numerov::{EigenState, NumerovConfig};

/// The supported families of bound systems, with their shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Infinite square well on `[0, width]`: `E_n = (nπ/L)²`, `n ≥ 1`.
    InfiniteWell { width: f64 },
    /// `V = ω²x²/4`, `E_n = ω(n + 1/2)`, `n ≥ 0`.
    Harmonic { omega: f64 },
    /// `V = A² + B²e^(−2αx) − 2B(A + α/2)e^(−αx)`, `E_n = A² − (A − αn)²`.
    Morse { a: f64, b: f64, alpha: f64 },
    /// `V = A(A−α)csc²(αx) + 2B cot(αx) − A² + B²/A²` on `(0, π/α)`,
    /// `E_n = (A+αn)² − A² + B²/A² − B²/(A+αn)²`.
    RosenMorseI { a: f64, b: f64, alpha: f64 },
    /// Spectrum-only model `E_n = Σ_k positive[k]·n^k + Σ_k negative[k]·n^(−(k+1))`.
    Polynomial { positive: Vec<f64>, negative: Vec<f64> },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::InfiniteWell { .. } => "infinite square well",
            ModelKind::Harmonic { .. } => "harmonic oscillator",
            ModelKind::Morse { .. } => "Morse potential",
            ModelKind::RosenMorseI { .. } => "Rosen-Morse I potential",
            ModelKind::Polynomial { .. } => "polynomial spectrum",
        }
    }
}

/// A bound system together with its spatial domain and eigenstate cache.
///
/// Immutable after construction. Numerov eigenstates are filled in on first
/// use through [`OnceLock`], so concurrent readers never race; call
/// [`SpectrumModel::prepare`] to populate the cache eagerly.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    kind: ModelKind,
    domain: (f64, f64),
    max_level: u32,
    numerov: NumerovConfig,
    states: Vec<OnceLock<Result<Arc<EigenState>>>>,
}

const DEFAULT_HARMONIC_LEVELS: u32 = 40;
const DEFAULT_WELL_LEVELS: u32 = 256;
const DEFAULT_POLYNOMIAL_LEVELS: u32 = 100_000;

impl SpectrumModel {
    pub fn infinite_well(width: f64) -> Result<Self> {
        positive("width", width)?;
        Self::build(ModelKind::InfiniteWell { width }, DEFAULT_WELL_LEVELS, None)
    }

    pub fn harmonic(omega: f64) -> Result<Self> {
        positive("omega", omega)?;
        Self::build(ModelKind::Harmonic { omega }, DEFAULT_HARMONIC_LEVELS, None)
    }

    /// Morse potential; supports every bound level `A − αn > 0` by default.
    pub fn morse(a: f64, b: f64, alpha: f64) -> Result<Self> {
        positive("a", a)?;
        positive("b", b)?;
        positive("alpha", alpha)?;
        let top = morse_top_level(a, alpha);
        Self::build(ModelKind::Morse { a, b, alpha }, top, None)
    }

    pub fn rosen_morse_i(a: f64, b: f64, alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        if !(a > alpha) {
            return Err(Error::Domain(format!(
                "Rosen-Morse I needs a > alpha for repulsive walls (a = {a}, alpha = {alpha})"
            )));
        }
        if !b.is_finite() {
            return Err(Error::Domain("b must be finite".into()));
        }
        Self::build(ModelKind::RosenMorseI { a, b, alpha }, DEFAULT_HARMONIC_LEVELS, None)
    }

    pub fn polynomial(positive: Vec<f64>, negative: Vec<f64>) -> Result<Self> {
        if positive.iter().chain(&negative).all(|c| *c == 0.0) {
            return Err(Error::Domain("polynomial spectrum needs a nonzero coefficient".into()));
        }
        if positive.iter().chain(&negative).any(|c| !c.is_finite()) {
            return Err(Error::Domain("polynomial coefficients must be finite".into()));
        }
        Self::build(ModelKind::Polynomial { positive, negative }, DEFAULT_POLYNOMIAL_LEVELS, None)
    }

    /// Rebuilds the model supporting levels up to `max_level`; the domain of
    /// smooth wells is re-derived so that level stays well converged.
    pub fn with_max_level(self, max_level: u32) -> Result<Self> {
        if max_level < self.min_level() {
            return Err(Error::Domain(format!("max level {max_level} is below the lowest level {}", self.min_level())));
        }
        if let ModelKind::Morse { a, alpha, .. } = self.kind {
            let top = morse_top_level(a, alpha);
            if max_level > top {
                return Err(Error::Domain(format!(
                    "Morse potential binds levels 0..={top} only (requested {max_level})"
                )));
            }
        }
        Self::build(self.kind, max_level, Some(self.numerov))
    }

    pub fn with_numerov(self, numerov: NumerovConfig) -> Result<Self> {
        if numerov.points < 16 {
            return Err(Error::Domain("Numerov grid needs at least 16 points".into()));
        }
        Self::build(self.kind, self.max_level, Some(numerov))
    }

    /// Overrides the computed domain (smooth wells only).
    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("invalid domain [{lo}, {hi}]")));
        }
        match self.kind {
            ModelKind::InfiniteWell { .. } | ModelKind::Polynomial { .. } => {
                return Err(Error::Unsupported { model: self.kind.name(), what: "custom domain".into() })
            }
            ModelKind::RosenMorseI { alpha, .. } if lo <= 0.0 || hi >= PI / alpha => {
                return Err(Error::Domain(format!("Rosen-Morse I domain must lie inside (0, {})", PI / alpha)))
            }
            _ => {}
        }
        self.domain = (lo, hi);
        self.states = fresh_cache(self.min_level(), self.max_level);
        Ok(self)
    }

    fn build(kind: ModelKind, max_level: u32, numerov: Option<NumerovConfig>) -> Result<Self> {
        let mut model = SpectrumModel {
            kind,
            domain: (0.0, 0.0),
            max_level,
            numerov: numerov.unwrap_or_default(),
            states: Vec::new(),
        };
        model.domain = model.derive_domain()?;
        if model.uses_numerov() {
            model.states = fresh_cache(model.min_level(), max_level);
        }
        Ok(model)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn min_level(&self) -> u32 {
        match &self.kind {
            ModelKind::InfiniteWell { .. } => 1,
            ModelKind::Polynomial { negative, .. } if !negative.is_empty() => 1,
            _ => 0,
        }
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn numerov_config(&self) -> &NumerovConfig {
        &self.numerov
    }

    pub fn is_infinite_well(&self) -> bool {
        matches!(self.kind, ModelKind::InfiniteWell { .. })
    }

    /// Whether eigenfunctions come from the Numerov solver.
    pub fn uses_numerov(&self) -> bool {
        matches!(self.kind, ModelKind::Morse { .. } | ModelKind::RosenMorseI { .. })
    }

    pub fn has_potential(&self) -> bool {
        !matches!(self.kind, ModelKind::Polynomial { .. })
    }

    /// `v_0 = ħπ/(2ML) = π/L` for the square well.
    pub fn well_speed_unit(&self) -> Option<f64> {
        match self.kind {
            ModelKind::InfiniteWell { width } => Some(PI / width),
            _ => None,
        }
    }

    pub fn check_level(&self, n: u32) -> Result<()> {
        let lo = self.min_level();
        if n < lo || n > self.max_level {
            return Err(Error::Domain(format!(
                "quantum number {n} outside the valid range {lo}..={} for the {}",
                self.max_level,
                self.kind.name()
            )));
        }
        Ok(())
    }

    /// Checks `x` against the domain, snapping values within rounding
    /// distance of an edge onto it.
    pub fn check_position(&self, x: f64) -> Result<f64> {
        if !self.has_potential() {
            return Err(Error::Unsupported { model: self.kind.name(), what: "position-space quantities".into() });
        }
        let (lo, hi) = self.domain;
        let slack = 1e-9 * (hi - lo);
        if x.is_nan() || x < lo - slack || x > hi + slack {
            return Err(Error::Domain(format!("x = {x} outside domain [{lo}, {hi}]")));
        }
        Ok(x.clamp(lo, hi))
    }

    /// Analytic `E_n`.
    pub fn energy(&self, n: u32) -> Result<f64> {
        self.check_level(n)?;
        Ok(self.energy_at(n as f64))
    }

    /// The spectrum formula continued to real `n`.
    pub fn energy_at(&self, n: f64) -> f64 {
        match &self.kind {
            ModelKind::InfiniteWell { width } => {
                let k = n * PI / width;
                k * k
            }
            ModelKind::Harmonic { omega } => omega * (n + 0.5),
            ModelKind::Morse { a, alpha, .. } => {
                let d = a - alpha * n;
                a * a - d * d
            }
            ModelKind::RosenMorseI { a, b, alpha } => {
                let u = a + alpha * n;
                u * u - a * a + b * b / (a * a) - b * b / (u * u)
            }
            ModelKind::Polynomial { positive, negative } => {
                let pos: f64 = positive.iter().enumerate().map(|(m, c)| c * n.powi(m as i32)).sum();
                let neg: f64 = negative.iter().enumerate().map(|(m, c)| c * n.powi(-(m as i32 + 1))).sum();
                pos + neg
            }
        }
    }

    /// `d^j E / dn^j` at real `n`, from the closed-form spectrum.
    pub fn energy_derivative(&self, n: f64, order: u32) -> f64 {
        if order == 0 {
            return self.energy_at(n);
        }
        let j = order as i32;
        match &self.kind {
            ModelKind::InfiniteWell { width } => {
                let c = (PI / width).powi(2);
                match order {
                    1 => 2.0 * c * n,
                    2 => 2.0 * c,
                    _ => 0.0,
                }
            }
            ModelKind::Harmonic { omega } => {
                if order == 1 {
                    *omega
                } else {
                    0.0
                }
            }
            ModelKind::Morse { a, alpha, .. } => match order {
                1 => 2.0 * alpha * (a - alpha * n),
                2 => -2.0 * alpha * alpha,
                _ => 0.0,
            },
            ModelKind::RosenMorseI { a, b, alpha } => {
                let u = a + alpha * n;
                // d^j/du^j of u² − B²u^(−2), times α^j from the chain rule.
                let square = match order {
                    1 => 2.0 * u,
                    2 => 2.0,
                    _ => 0.0,
                };
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                let inverse = sign * factorial(order + 1) * u.powi(-2 - j);
                alpha.powi(j) * (square - b * b * inverse)
            }
            ModelKind::Polynomial { positive, negative } => {
                // Σ a_m n^m · m!/((m−j)! n^j) over m ≥ j.
                let pos: f64 = positive
                    .iter()
                    .enumerate()
                    .skip(order as usize)
                    .map(|(m, c)| c * n.powi(m as i32 - j) * falling(m as u32, order))
                    .sum();
                // Σ a_m n^(−m) (−1)^j (m+j−1)!/((m−1)! n^j).
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                let neg: f64 = negative
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let m = k as u32 + 1;
                        c * sign * rising(m, order) * n.powi(-(m as i32) - j)
                    })
                    .sum();
                pos + neg
            }
        }
    }

    pub fn potential_value(&self, x: f64) -> Result<f64> {
        let x = self.check_position(x)?;
        Ok(self.potential_unchecked(x))
    }

    pub(crate) fn potential_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::InfiniteWell { .. } => 0.0,
            ModelKind::Harmonic { omega } => 0.25 * omega * omega * x * x,
            ModelKind::Morse { a, b, alpha } => {
                let e = (-alpha * x).exp();
                a * a + b * b * e * e - 2.0 * b * (a + 0.5 * alpha) * e
            }
            ModelKind::RosenMorseI { a, b, alpha } => {
                let (s, c) = (alpha * x).sin_cos();
                a * (a - alpha) / (s * s) + 2.0 * b * c / s - a * a + b * b / (a * a)
            }
            ModelKind::Polynomial { .. } => f64::NAN,
        }
    }

    /// `dV/dx`.
    pub(crate) fn potential_slope(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::InfiniteWell { .. } => 0.0,
            ModelKind::Harmonic { omega } => 0.5 * omega * omega * x,
            ModelKind::Morse { a, b, alpha } => {
                let e = (-alpha * x).exp();
                -2.0 * alpha * b * b * e * e + 2.0 * alpha * b * (a + 0.5 * alpha) * e
            }
            ModelKind::RosenMorseI { a, b, alpha } => {
                let (s, c) = (alpha * x).sin_cos();
                -2.0 * alpha / (s * s) * (a * (a - alpha) * c / s + b)
            }
            ModelKind::Polynomial { .. } => f64::NAN,
        }
    }

    /// Location of the potential minimum.
    pub fn potential_minimum(&self) -> f64 {
        match self.kind {
            ModelKind::InfiniteWell { width } => 0.5 * width,
            ModelKind::Harmonic { .. } => 0.0,
            ModelKind::Morse { a, b, alpha } => (b / (a + 0.5 * alpha)).ln() / alpha,
            ModelKind::RosenMorseI { a, b, alpha } => (1.0f64).atan2(-b / (a * (a - alpha))) / alpha,
            ModelKind::Polynomial { .. } => f64::NAN,
        }
    }

    /// Normalized real eigenfunction `ψ_n(x)`.
    pub fn eigenfunction(&self, n: u32, x: f64) -> Result<f64> {
        self.check_level(n)?;
        let x = self.check_position(x)?;
        match self.kind {
            ModelKind::InfiniteWell { width } => Ok((2.0 / width).sqrt() * (n as f64 * PI * x / width).sin()),
            ModelKind::Harmonic { omega } => Ok(hermite_function(n, omega, x)),
            ModelKind::Morse { .. } | ModelKind::RosenMorseI { .. } => Ok(self.eigenstate(n)?.value_at(x)),
            ModelKind::Polynomial { .. } => unreachable!("rejected by check_position"),
        }
    }

    /// Cached Numerov eigenstate for smooth wells; a fresh solve otherwise.
    pub fn eigenstate(&self, n: u32) -> Result<Arc<EigenState>> {
        self.check_level(n)?;
        if !self.uses_numerov() {
            return solve_numerov(self, n).map(Arc::new);
        }
        let slot = &self.states[(n - self.min_level()) as usize];
        slot.get_or_init(|| numerov::solve(self, n).map(Arc::new)).clone()
    }

    /// Solves every level in `levels` up front, in parallel.
    pub fn prepare(&self, levels: impl IntoIterator<Item = u32>) -> Result<()> {
        use rayon::prelude::*;
        if !self.uses_numerov() {
            return Ok(());
        }
        let levels: Vec<u32> = levels.into_iter().collect();
        levels.par_iter().try_for_each(|&n| self.eigenstate(n).map(|_| ()))
    }

    /// `p_n(x) = √(E_n − V(x))`.
    pub fn local_momentum(&self, n: u32, x: f64) -> Result<f64> {
        let e = self.energy(n)?;
        let v = self.potential_value(x)?;
        momentum_from(e, v, x)
    }

    fn derive_domain(&self) -> Result<(f64, f64)> {
        match self.kind {
            ModelKind::InfiniteWell { width } => Ok((0.0, width)),
            ModelKind::Polynomial { .. } => Ok((0.0, 0.0)),
            _ => {
                let e_max = self.energy_at(self.max_level as f64);
                let spacing = if self.max_level > self.min_level() {
                    e_max - self.energy_at(self.max_level as f64 - 1.0)
                } else {
                    self.energy_at(self.max_level as f64 + 1.0) - e_max
                };
                let (xl, xr) = classical::turning_points_unchecked(self, e_max)?;
                let lo = self.edge_beyond(xl, -1.0, e_max, spacing);
                let hi = self.edge_beyond(xr, 1.0, e_max, spacing);
                Ok((lo, hi))
            }
        }
    }

    /// Walks outward from a turning point until the potential has risen
    /// 10 level spacings above `e` and the barrier integral `∫√(V−E)dx`
    /// reaches the configured decay depth.
    fn edge_beyond(&self, turn: f64, dir: f64, e: f64, spacing: f64) -> f64 {
        let wall = match self.kind {
            ModelKind::RosenMorseI { alpha, .. } => Some(if dir < 0.0 { 0.0 } else { PI / alpha }),
            _ => None,
        };
        let scale = (turn - self.potential_minimum()).abs().max(1e-3);
        let step = scale / 2000.0;
        // The Morse potential levels off at A² on the right, so only the
        // barrier integral can terminate that side.
        let threshold = match self.kind {
            ModelKind::Morse { .. } if dir > 0.0 => f64::NEG_INFINITY,
            _ => e + 10.0 * spacing.abs(),
        };
        let mut x = turn;
        let mut integral = 0.0;
        let mut prev = 0.0;
        for _ in 0..10_000_000 {
            let next = x + dir * step;
            if let Some(w) = wall {
                // Stop short of the singular wall.
                if (w - next).abs() < 4.0 * step {
                    return next;
                }
            }
            let kappa = (self.potential_unchecked(next) - e).max(0.0).sqrt();
            integral += 0.5 * (prev + kappa) * step;
            prev = kappa;
            x = next;
            if integral >= self.numerov.decay_depth && self.potential_unchecked(x) >= threshold {
                return x;
            }
        }
        x
    }
}

fn fresh_cache(lo: u32, hi: u32) -> Vec<OnceLock<Result<Arc<EigenState>>>> {
    (lo..=hi).map(|_| OnceLock::new()).collect()
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite (got {value})")))
    }
}

fn morse_top_level(a: f64, alpha: f64) -> u32 {
    let top = (a / alpha).ceil() - 1.0;
    top.max(0.0) as u32
}

pub(crate) fn momentum_from(e: f64, v: f64, x: f64) -> Result<f64> {
    let diff = e - v;
    if diff >= 0.0 {
        return Ok(diff.sqrt());
    }
    if -diff <= 1e-12 * e.abs().max(v.abs()).max(1.0) {
        return Ok(0.0);
    }
    Err(Error::Forbidden { x, deficit: diff, imaginary: (-diff).sqrt() })
}

/// Harmonic-oscillator eigenfunction, `ξ = √(ω/2)x`, via the stable
/// three-term recurrence for normalized Hermite functions.
fn hermite_function(n: u32, omega: f64, x: f64) -> f64 {
    let xi = (0.5 * omega).sqrt() * x;
    let scale = (0.5 * omega).powf(0.25);
    let mut prev = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    if n == 0 {
        return scale * prev;
    }
    let mut cur = std::f64::consts::SQRT_2 * xi * prev;
    for k in 1..n {
        let k = k as f64;
        let next = (2.0 / (k + 1.0)).sqrt() * xi * cur - (k / (k + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    scale * cur
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// m!/(m−j)!
fn falling(m: u32, j: u32) -> f64 {
    (m - j + 1..=m).map(f64::from).product()
}

/// (m+j−1)!/(m−1)!
fn rising(m: u32, j: u32) -> f64 {
    (m..m + j).map(f64::from).product()
}

/// Shooting solution for level `n` on the model's domain, uncached.
pub fn solve_numerov(model: &SpectrumModel, n: u32) -> Result<EigenState> {
    model.check_level(n)?;
    if !model.has_potential() {
        return Err(Error::Unsupported { model: model.kind.name(), what: "Numerov eigenstates".into() });
    }
    numerov::solve(model, n)
}
