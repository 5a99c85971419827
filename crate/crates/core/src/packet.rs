//! Weighting coefficients and the wavefunction sums built from them.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::SpectrumModel;

/// How to build a coefficient distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientKind {
    /// `c_n ∝ exp(−(n − n̄)²/(4σ²))`, so `|c_n|²` has standard deviation σ.
    /// Entries below `cutoff` times the peak amplitude are dropped.
    Gaussian {
        center: f64,
        sigma: f64,
        cutoff: f64,
    },
    Uniform {
        lo: u32,
        hi: u32,
    },
    /// Equal weights on `1, 4, 9, …, ⌊√max⌋²`.
    PerfectSquares {
        max: u32,
    },
    Custom(Vec<(u32, Complex64)>),
}

impl CoefficientKind {
    pub fn gaussian(center: f64, sigma: f64) -> Self {
        CoefficientKind::Gaussian { center, sigma, cutoff: 1e-8 }
    }
}

/// Normalized coefficients `c_n`, ordered by `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    entries: Vec<(u32, Complex64)>,
    center: f64,
    width: f64,
}

impl CoefficientSet {
    pub fn entries(&self) -> &[(u32, Complex64)] {
        &self.entries
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn get(&self, n: u32) -> Complex64 {
        self.entries.binary_search_by_key(&n, |(k, _)| *k).map(|i| self.entries[i].1).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `n̄`: the Gaussian center, or the `|c_n|²`-weighted mean otherwise.
    pub fn center(&self) -> f64 {
        self.center
    }

    /// `Δn`: σ for Gaussians, the weighted standard deviation otherwise.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Index origin for the classicized sum: the supported level nearest
    /// `n̄`, ties going to the lower level.
    pub fn rounded_center(&self) -> u32 {
        let mut best = self.entries[0].0;
        for &(n, _) in &self.entries {
            // Tolerance keeps exact half-integer centers from rounding up
            // through accumulated error in the weighted mean.
            if (n as f64 - self.center).abs() < (best as f64 - self.center).abs() - 1e-9 {
                best = n;
            }
        }
        best
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    pub fn min_level(&self) -> u32 {
        self.entries[0].0
    }

    pub fn max_level(&self) -> u32 {
        self.entries[self.entries.len() - 1].0
    }

    /// Describes a violation of `1 ≪ Δn ≪ n̄`, if any (advisory only).
    pub fn semiclassical_warning(&self) -> Option<String> {
        let (c, w) = (self.center, self.width);
        if !(w > 1.0 && w < c) {
            Some(format!("semiclassical ordering 1 << dn << n-bar does not hold (dn = {w:.3}, n-bar = {c:.3})"))
        } else {
            None
        }
    }
}

/// Builds a normalized coefficient set whose levels are all valid for `model`.
pub fn make_coefficients(kind: &CoefficientKind, model: &SpectrumModel) -> Result<CoefficientSet> {
    let (lo, hi) = (model.min_level(), model.max_level());
    let mut given_center = None;
    let raw: Vec<(u32, Complex64)> = match kind {
        CoefficientKind::Gaussian { center, sigma, cutoff } => {
            if !(*sigma > 0.0) || !center.is_finite() {
                return Err(Error::Construction(format!(
                    "gaussian needs finite center and sigma > 0 (center {center}, sigma {sigma})"
                )));
            }
            if !(*cutoff > 0.0 && *cutoff < 1.0) {
                return Err(Error::Construction(format!("gaussian cutoff {cutoff} must lie in (0, 1)")));
            }
            given_center = Some((*center, *sigma));
            let reach = 2.0 * sigma * (1.0 / cutoff).ln().sqrt();
            let first = (center - reach).ceil().max(lo as f64);
            let last = (center + reach).floor().min(hi as f64);
            let mut raw = Vec::new();
            if first <= last {
                for n in first as u32..=last as u32 {
                    let d = n as f64 - center;
                    raw.push((n, Complex64::new((-d * d / (4.0 * sigma * sigma)).exp(), 0.0)));
                }
            }
            let peak = raw.iter().fold(0.0f64, |m, (_, c)| m.max(c.re));
            raw.retain(|(_, c)| c.re >= cutoff * peak);
            raw
        }
        CoefficientKind::Uniform { lo: a, hi: b } => {
            if a > b {
                return Err(Error::Construction(format!("uniform range {a}..={b} is empty")));
            }
            check_range(*a, lo, hi)?;
            check_range(*b, lo, hi)?;
            (*a..=*b).map(|n| (n, Complex64::new(1.0, 0.0))).collect()
        }
        CoefficientKind::PerfectSquares { max } => {
            if *max < 1 {
                return Err(Error::Construction("perfect squares need max >= 1".into()));
            }
            let root = (*max as f64).sqrt().floor() as u32;
            let root = if (root + 1) * (root + 1) <= *max { root + 1 } else { root };
            let raw: Vec<_> = (1..=root).map(|r| (r * r, Complex64::new(1.0, 0.0))).collect();
            for (n, _) in &raw {
                check_range(*n, lo, hi)?;
            }
            raw
        }
        CoefficientKind::Custom(list) => {
            if list.is_empty() {
                return Err(Error::Construction("custom coefficient list is empty".into()));
            }
            let mut seen = BTreeSet::new();
            for (n, c) in list {
                if !seen.insert(*n) {
                    return Err(Error::Construction(format!("duplicate quantum number {n}")));
                }
                if !c.re.is_finite() || !c.im.is_finite() {
                    return Err(Error::Construction(format!("coefficient for n = {n} is not finite")));
                }
                check_range(*n, lo, hi)?;
            }
            let mut raw: Vec<_> = list.iter().filter(|(_, c)| c.norm_sqr() > 0.0).copied().collect();
            raw.sort_by_key(|(n, _)| *n);
            raw
        }
    };
    if raw.is_empty() {
        return Err(Error::Construction(format!("empty support after truncation to levels {lo}..={hi}")));
    }
    let total: f64 = raw.iter().map(|(_, c)| c.norm_sqr()).sum();
    let scale = total.sqrt().recip();
    let entries: Vec<_> = raw.into_iter().map(|(n, c)| (n, c * scale)).collect();

    let mean: f64 = entries.iter().map(|(n, c)| *n as f64 * c.norm_sqr()).sum();
    let var: f64 = entries.iter().map(|(n, c)| (*n as f64 - mean).powi(2) * c.norm_sqr()).sum();
    let (center, width) = given_center.unwrap_or((mean, var.sqrt()));
    let set = CoefficientSet { entries, center, width };
    if center < set.min_level() as f64 - 0.5 || center > set.max_level() as f64 + 0.5 {
        return Err(Error::Construction(format!(
            "center {center} lies outside the retained support {}..={}",
            set.min_level(),
            set.max_level()
        )));
    }
    if let Some(warning) = set.semiclassical_warning() {
        log::warn!("{warning}");
    }
    Ok(set)
}

fn check_range(n: u32, lo: u32, hi: u32) -> Result<()> {
    if n < lo || n > hi {
        Err(Error::Construction(format!("quantum number {n} outside the model range {lo}..={hi}")))
    } else {
        Ok(())
    }
}

/// `Ψ(x,t) = Σ_n c_n ψ_n(x) e^(−iE_n t)`, summed in increasing `n`.
pub fn psi(model: &SpectrumModel, coeffs: &CoefficientSet, x: f64, t: f64) -> Result<Complex64> {
    let mut total = Complex64::default();
    for &(n, c) in coeffs.entries() {
        let phase = Complex64::from_polar(1.0, -model.energy(n)? * t);
        total += c * model.eigenfunction(n, x)? * phase;
    }
    Ok(total)
}

/// Linear frequency `E'(n₀)` of the classicized sum, with `n₀` the rounded center.
pub fn classical_frequency(model: &SpectrumModel, coeffs: &CoefficientSet) -> Result<f64> {
    let origin = coeffs.rounded_center();
    let slope = model.energy_derivative(origin as f64, 1);
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::DegenerateSpectrum(format!("E'({origin}) = {slope}: classical period undefined")));
    }
    Ok(slope)
}

/// `Ψ_cl(x,t) = Σ_k c_{n₀+k} ψ_{n₀+k}(x) e^(−2πik t/T_cl)`, with the sign of
/// `E'(n₀)` carried in the phase so it matches the linear spectrum term.
pub fn psi_cl(model: &SpectrumModel, coeffs: &CoefficientSet, x: f64, t: f64) -> Result<Complex64> {
    let omega = classical_frequency(model, coeffs)?;
    let origin = coeffs.rounded_center() as i64;
    let mut total = Complex64::default();
    for &(n, c) in coeffs.entries() {
        let k = n as i64 - origin;
        let phase = Complex64::from_polar(1.0, -omega * k as f64 * t);
        total += c * model.eigenfunction(n, x)? * phase;
    }
    Ok(total)
}

/// `T_cl = 2π / |E'(n₀)|`.
pub fn classical_time(model: &SpectrumModel, coeffs: &CoefficientSet) -> Result<f64> {
    Ok(2.0 * PI / classical_frequency(model, coeffs)?.abs())
}

/// Eigenfunction values `ψ_n(x_j)` for every level of a coefficient set on
/// a fixed x grid, so repeated time slices avoid re-evaluating the basis.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub levels: Vec<u32>,
    pub energies: Vec<f64>,
    pub xs: Vec<f64>,
    /// `values[level_index][x_index]`.
    pub values: Vec<Vec<f64>>,
}

impl BasisTable {
    pub fn new(model: &SpectrumModel, coeffs: &CoefficientSet, xs: &[f64]) -> Result<BasisTable> {
        use rayon::prelude::*;
        let levels: Vec<u32> = coeffs.levels().collect();
        model.prepare(levels.iter().copied())?;
        let energies = levels.iter().map(|&n| model.energy(n)).collect::<Result<Vec<_>>>()?;
        let values = levels
            .par_iter()
            .map(|&n| xs.iter().map(|&x| model.eigenfunction(n, x)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(BasisTable { levels, energies, xs: xs.to_vec(), values })
    }

    /// `Ψ(x_j, t)` for all `j`, given per-level complex weights
    /// (already including the time phase).
    pub fn combine(&self, weights: &[Complex64]) -> Vec<Complex64> {
        let mut row = vec![Complex64::default(); self.xs.len()];
        for (w, basis) in weights.iter().zip(&self.values) {
            for (out, b) in row.iter_mut().zip(basis) {
                *out += w * b;
            }
        }
        row
    }

    /// `Ψ(x_j, t)` on the table's grid.
    pub fn psi_row(&self, coeffs: &CoefficientSet, t: f64) -> Vec<Complex64> {
        let weights: Vec<_> = coeffs
            .entries()
            .iter()
            .zip(&self.energies)
            .map(|((_, c), e)| c * Complex64::from_polar(1.0, -e * t))
            .collect();
        self.combine(&weights)
    }

    /// `Ψ_cl(x_j, t)` for linear frequency `omega` about level `origin`.
    pub fn psi_cl_row(&self, coeffs: &CoefficientSet, omega: f64, origin: u32, t: f64) -> Vec<Complex64> {
        let weights: Vec<_> = coeffs
            .entries()
            .iter()
            .map(|&(n, c)| {
                let k = n as i64 - origin as i64;
                c * Complex64::from_polar(1.0, -omega * k as f64 * t)
            })
            .collect();
        self.combine(&weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn well() -> SpectrumModel {
        SpectrumModel::infinite_well(PI).unwrap()
    }

    #[test]
    fn gaussian_is_normalized() {
        let sho = SpectrumModel::harmonic(2.0).unwrap();
        let set = make_coefficients(&CoefficientKind::gaussian(6.0, 2.0), &sho).unwrap();
        assert!((set.total_weight() - 1.0).abs() < 1e-12);
        assert_eq!(set.min_level(), 0);
        assert_eq!(set.center(), 6.0);
    }

    #[test]
    fn gaussian_truncation_threshold() {
        let set = make_coefficients(&CoefficientKind::gaussian(50.0, 2.0), &well()).unwrap();
        let peak = set.get(50).norm();
        for &(_, c) in set.entries() {
            assert!(c.norm() >= 1e-8 * peak);
        }
        // 2σ√ln(1e8) ≈ 17.2 levels either side.
        assert_eq!((set.min_level(), set.max_level()), (33, 67));
    }

    #[test]
    fn uniform_weights() {
        let set = make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 10 }, &well()).unwrap();
        for &(_, c) in set.entries() {
            assert_relative_eq!(c.norm_sqr(), 0.1, epsilon = 1e-15);
        }
        assert_eq!(set.rounded_center(), 5);
    }

    #[test]
    fn perfect_squares_support() {
        let sho = SpectrumModel::harmonic(2.0).unwrap().with_max_level(100).unwrap();
        let set = make_coefficients(&CoefficientKind::PerfectSquares { max: 81 }, &sho).unwrap();
        let support: Vec<u32> = set.levels().collect();
        assert_eq!(support, vec![1, 4, 9, 16, 25, 36, 49, 64, 81]);
        let set = make_coefficients(&CoefficientKind::PerfectSquares { max: 80 }, &sho).unwrap();
        assert_eq!(set.max_level(), 64);
    }

    #[test]
    fn construction_errors() {
        let one = Complex64::new(1.0, 0.0);
        let dup = CoefficientKind::Custom(vec![(1, one), (1, one)]);
        assert!(matches!(make_coefficients(&dup, &well()), Err(Error::Construction(_))));
        let empty = CoefficientKind::Custom(vec![]);
        assert!(matches!(make_coefficients(&empty, &well()), Err(Error::Construction(_))));
        let morse = SpectrumModel::morse(5.0, 1.0, 1.0).unwrap();
        let far = CoefficientKind::gaussian(40.0, 1.0);
        assert!(matches!(make_coefficients(&far, &morse), Err(Error::Construction(_))));
        let bad = CoefficientKind::Custom(vec![(0, one)]);
        assert!(make_coefficients(&bad, &well()).is_err());
    }

    #[test]
    fn psi_at_time_zero_is_plain_sum() {
        let model = well();
        let set = make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 10 }, &model).unwrap();
        let x = 0.77;
        let direct: f64 = (1..=10).map(|n| model.eigenfunction(n, x).unwrap() / 10f64.sqrt()).sum();
        let value = psi(&model, &set, x, 0.0).unwrap();
        assert_relative_eq!(value.re, direct, epsilon = 1e-14);
        assert_eq!(value.im, 0.0);
        assert_eq!(psi_cl(&model, &set, x, 0.0).unwrap(), value);
    }

    #[test]
    fn psi_vanishes_at_walls() {
        let model = well();
        let set = make_coefficients(&CoefficientKind::gaussian(8.0, 2.0), &model).unwrap();
        for t in [0.0, 0.3, 1.7, 5.0] {
            assert!(psi(&model, &set, 0.0, t).unwrap().norm() < 1e-14);
            assert!(psi(&model, &set, PI, t).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_classical_frequency() {
        // E'(n) = 2A α − 2α² n vanishes at n = A/α for a Morse spectrum.
        let poly = SpectrumModel::polynomial(vec![0.0, 20.0, -1.0], vec![]).unwrap();
        let set = make_coefficients(&CoefficientKind::Uniform { lo: 9, hi: 11 }, &poly).unwrap();
        assert!(matches!(classical_frequency(&poly, &set), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn basis_table_matches_pointwise() {
        let model = well();
        let set = make_coefficients(&CoefficientKind::Uniform { lo: 2, hi: 5 }, &model).unwrap();
        let xs = [0.1, 1.0, 2.0];
        let table = BasisTable::new(&model, &set, &xs).unwrap();
        let t = 0.4;
        let weights: Vec<_> = set
            .entries()
            .iter()
            .zip(&table.energies)
            .map(|((_, c), e)| c * Complex64::from_polar(1.0, -e * t))
            .collect();
        let row = table.combine(&weights);
        for (j, &x) in xs.iter().enumerate() {
            let direct = psi(&model, &set, x, t).unwrap();
            assert!((row[j] - direct).norm() < 1e-14);
        }
    }
}
