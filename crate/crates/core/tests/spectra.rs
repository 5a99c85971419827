use std::f64::consts::PI;

use qcarpet::spectra::{classical_period, classical_trajectory, solve_numerov, turning_points};
use qcarpet::SpectrumModel;

fn overlap(a: &qcarpet::EigenState, b: &qcarpet::EigenState) -> f64 {
    assert_eq!(a.values.len(), b.values.len());
    let n = a.values.len();
    let mut sum = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += w * a.values[i] * b.values[i];
    }
    sum * a.step
}

#[test]
fn numerov_well_eigenvalues_match_closed_form() {
    let well = SpectrumModel::infinite_well(PI).unwrap();
    for n in 1..=20u32 {
        let state = solve_numerov(&well, n).unwrap();
        let exact = (n * n) as f64;
        assert!((state.energy - exact).abs() / exact <= 1e-6, "n={n}: {}", state.energy);
        assert_eq!(state.node_count(), (n - 1) as usize);
    }
}

#[test]
fn numerov_oscillator_eigenvalues_match_closed_form() {
    for omega in [1.0, 2.0] {
        let sho = SpectrumModel::harmonic(omega).unwrap();
        for n in 0..=20u32 {
            let state = solve_numerov(&sho, n).unwrap();
            let exact = omega * (n as f64 + 0.5);
            assert!((state.energy - exact).abs() / exact <= 1e-6, "omega={omega}, n={n}: {}", state.energy);
        }
    }
}

#[test]
fn numerov_states_are_orthonormal() {
    for model in [SpectrumModel::infinite_well(PI).unwrap(), SpectrumModel::harmonic(2.0).unwrap()] {
        let lo = model.min_level();
        let states: Vec<_> = (lo..=12).map(|n| solve_numerov(&model, n).unwrap()).collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                let residual = (overlap(a, b) - target).abs();
                assert!(residual <= 1e-5, "{}: <{i}|{j}> off by {residual}", model.kind().name());
            }
        }
    }
}

#[test]
fn smooth_well_numerov_reproduces_closed_form_spectra() {
    let morse = SpectrumModel::morse(20.0, 5.0, 1.0).unwrap();
    for n in [0u32, 5, 12, 18] {
        let state = solve_numerov(&morse, n).unwrap();
        let exact = morse.energy(n).unwrap();
        assert!((state.energy - exact).abs() <= 1e-5 * exact.abs().max(1.0), "Morse n={n}");
    }
    let rosen = SpectrumModel::rosen_morse_i(4.0, 2.0, 1.0).unwrap();
    for n in [0u32, 3, 8] {
        let state = solve_numerov(&rosen, n).unwrap();
        let exact = rosen.energy(n).unwrap();
        assert!((state.energy - exact).abs() <= 1e-5 * exact.abs().max(1.0), "Rosen-Morse n={n}");
    }
}

#[test]
fn morse_ground_state_matches_closed_form() {
    // ψ₀ ∝ exp(−Ax − (B/α)e^(−αx)) for this potential.
    let (a, b, alpha) = (20.0, 5.0, 1.0);
    let morse = SpectrumModel::morse(a, b, alpha).unwrap();
    let state = solve_numerov(&morse, 0).unwrap();
    let exact: Vec<f64> = state.samples().map(|(x, _)| -a * x - b / alpha * (-alpha * x).exp()).collect();
    let top = exact.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exact: Vec<f64> = exact.iter().map(|l| (l - top).exp()).collect();
    let norm = (exact.iter().map(|v| v * v).sum::<f64>() * state.step).sqrt();
    let worst = exact.iter().zip(&state.values).map(|(e, v)| (e / norm - v).abs()).fold(0.0, f64::max);
    let peak = state.values.iter().copied().fold(0.0, f64::max);
    assert!(worst < 1e-4 * peak, "max deviation {worst}");
}

#[test]
fn trajectories_conserve_energy_over_ten_periods() {
    let morse = SpectrumModel::morse(20.0, 5.0, 1.0).unwrap();
    let e = morse.energy(10).unwrap();
    let period = classical_period(&morse, e).unwrap();
    let (left, _) = turning_points(&morse, e).unwrap();
    let ts: Vec<f64> = (0..=400).map(|i| 10.0 * period * i as f64 / 400.0).collect();
    let path = classical_trajectory(&morse, e, left, 1.0, &ts).unwrap();
    for p in &path.points {
        let residual = e - morse.potential_value(p.x).unwrap() - (p.velocity / 2.0).powi(2);
        assert!(residual.abs() <= 1e-8 * e, "t={}: {residual}", p.t);
    }
    let last = path.points.last().unwrap();
    assert!((last.x - left).abs() < 1e-6);
}
