//! Shared workloads for the benchmarks.

use std::f64::consts::PI;

use qcarpet::{make_coefficients, CoefficientKind, CoefficientSet, SpectrumModel};

pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Square well of width π holding levels 1..=10 with equal weight.
pub fn well_uniform() -> (SpectrumModel, CoefficientSet) {
    let model = SpectrumModel::infinite_well(PI).expect("valid width");
    let coeffs = make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 10 }, &model).expect("valid levels");
    (model, coeffs)
}

/// Morse well (A = 20, B = 5, α = 1) with a Gaussian packet about level 12.
pub fn morse_gaussian() -> (SpectrumModel, CoefficientSet) {
    let model = SpectrumModel::morse(20.0, 5.0, 1.0).expect("valid parameters");
    let coeffs = make_coefficients(&CoefficientKind::gaussian(12.0, 2.0), &model).expect("valid packet");
    (model, coeffs)
}
