use std::f64::consts::PI;

use qcarpet::interference::slow_degeneracy_classes;
use qcarpet::revival::{revival_copies, DEFAULT_HIERARCHY_RATIO};
use qcarpet::*;

fn well() -> SpectrumModel {
    SpectrumModel::infinite_well(PI).unwrap()
}

#[test]
fn well_revival_to_classical_ratio_is_twice_the_center() {
    for center in [1u32, 5, 10, 50, 120] {
        let report = time_scales(&well(), center as f64, 3).unwrap();
        assert_eq!(report.ratios[0], Some(2.0 * center as f64), "center {center}");
        let quotient = report.revival().unwrap() / report.classical();
        assert!((quotient - 2.0 * center as f64).abs() <= 1e-12 * quotient);
        assert!(report.period(3).is_none());
    }
}

#[test]
fn polynomial_hierarchies_hold_far_from_the_origin() {
    let cases: Vec<(Vec<f64>, Vec<f64>, u32)> = vec![
        (vec![0.0, 1.0], vec![], 1),
        (vec![0.0, 1.0, 1.0], vec![], 2),
        (vec![0.0, 1.0, 1.0, 1.0], vec![], 3),
        (vec![0.0, 1.0, 0.5, 0.2, 0.1], vec![], 4),
        (vec![0.0, 2.0, -0.01, 1e-4, -1e-6], vec![], 4),
        (vec![], vec![1.0], 1),
        (vec![], vec![1.0, 1.0, 1.0, 1.0], 4),
        (vec![0.0, 1.0, 1.0], vec![3.0, 0.5], 2),
    ];
    for (positive, negative, degree) in cases {
        let model = SpectrumModel::polynomial(positive.clone(), negative.clone()).unwrap();
        let report = time_scales(&model, 100.0, 4).unwrap();
        let check = hierarchy_check(&report, Some(degree), DEFAULT_HIERARCHY_RATIO);
        assert!(check.ok, "{positive:?} / {negative:?}: {:?}", check.diagnostics);
        assert!(check.diagnostics.iter().any(|d| d.contains("is at least")));
    }
}

#[test]
fn polynomial_derivatives_follow_the_power_rule() {
    // E = n³ + n^(−2): E' = 3n² − 2n^(−3), E'' = 6n + 6n^(−4).
    let model = SpectrumModel::polynomial(vec![0.0, 0.0, 0.0, 1.0], vec![0.0, 1.0]).unwrap();
    let n: f64 = 7.0;
    let report = time_scales(&model, n, 3).unwrap();
    let expected = [3.0 * n * n - 2.0 / n.powi(3), 6.0 * n + 6.0 / n.powi(4), 6.0 - 24.0 / n.powi(5)];
    for (got, want) in report.derivatives.iter().zip(expected) {
        assert!((got - want).abs() <= 1e-12 * want.abs());
    }
}

#[test]
fn low_center_hierarchy_is_flagged() {
    let model = SpectrumModel::polynomial(vec![0.0, 1.0, 1.0, 1.0], vec![]).unwrap();
    let report = time_scales(&model, 3.0, 3).unwrap();
    let check = hierarchy_check(&report, Some(3), DEFAULT_HIERARCHY_RATIO);
    assert!(!check.ok);
    assert!(check.diagnostics.iter().any(|d| d.contains("is not at least")));
}

#[test]
fn fractional_revivals_of_the_well_are_exact() {
    let model = well();
    let coeffs = make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 10 }, &model).unwrap();
    let xs: Vec<f64> = (0..=400).map(|i| PI * i as f64 / 400.0).collect();
    for (p, q) in [(1, 2), (1, 3), (1, 4), (2, 5), (3, 8), (5, 12)] {
        let rec = reconstruct_fractional(&model, &coeffs, p, q, &xs).unwrap();
        assert!(rec.error <= 1e-9, "{p}/{q}: {}", rec.error);
        assert_eq!(rec.plan.l, revival_copies(q));
    }
}

#[test]
fn quarter_revival_splits_into_two_equal_copies() {
    let plan = gauss_coefficients(1, 4).unwrap();
    assert_eq!(plan.l, 2);
    for a in &plan.a {
        assert!((a.norm_sqr() - 0.5).abs() < 1e-14);
    }
    let half = gauss_coefficients(1, 2).unwrap();
    assert!(half.a[0].norm() < 1e-14 && (half.a[1].norm() - 1.0).abs() < 1e-14);
}

#[test]
fn oscillator_perfect_squares_form_a_large_slow_class() {
    let sho = SpectrumModel::harmonic(1.0).unwrap().with_max_level(90).unwrap();
    let coeffs = make_coefficients(&CoefficientKind::PerfectSquares { max: 81 }, &sho).unwrap();
    let center = coeffs.center();
    let tolerance = 0.02 * sho.energy_at(center).sqrt();
    let classes = slow_degeneracy_classes(&sho, &coeffs, tolerance).unwrap();
    let largest = classes.iter().map(|c| c.multiplicity()).max().unwrap();
    assert!(largest >= 3, "largest class {largest}");

    let gaussian =
        make_coefficients(&CoefficientKind::gaussian(6.0, 2.0), &SpectrumModel::harmonic(1.0).unwrap()).unwrap();
    let model = SpectrumModel::harmonic(1.0).unwrap();
    let exact = slow_degeneracy_classes(&model, &gaussian, 0.0).unwrap();
    assert!(exact.iter().all(|c| c.multiplicity() <= 2), "{:?}", exact.iter().map(|c| c.multiplicity()).max());
}

#[test]
fn quadratic_spectrum_fast_branch_is_fully_degenerate() {
    let model = SpectrumModel::polynomial(vec![0.0, 0.0, 1.0], vec![]).unwrap();
    let coeffs = make_coefficients(&CoefficientKind::Uniform { lo: 45, hi: 55 }, &model).unwrap();
    let report = vcl_degeneracy(&model, &coeffs, 1e-12).unwrap();
    assert!(report.quadratic);
    // With E = n², (n − m)/(n − m) = 1 for every fast pair.
    assert_eq!(report.fast.distinct(), 1);
    assert!(report.ratio_collisions.is_empty());

    let wide = make_coefficients(
        &CoefficientKind::Custom(vec![(1, 1.0.into()), (2, 1.0.into()), (4, 1.0.into()), (8, 1.0.into())]),
        &model,
    )
    .unwrap();
    let report = vcl_degeneracy(&model, &wide, 1e-12).unwrap();
    assert!(report.ratio_collisions.contains(&((4, 1), (8, 2))) || report.ratio_collisions.contains(&((8, 2), (4, 1))));
}

fn squarefree_part(mut n: u32) -> u32 {
    let mut part = 1;
    let mut f = 2;
    while f * f <= n {
        while n % (f * f) == 0 {
            n /= f * f;
        }
        if n % f == 0 {
            part *= f;
            n /= f;
        }
        f += 1;
    }
    part * n
}

/// Fast velocities of a linear spectrum go as `√n + √m`, which can only
/// coincide for two pairs whose levels all share one square-free part.
#[test]
fn linear_spectrum_fast_collisions_need_square_structure() {
    let model = SpectrumModel::polynomial(vec![0.0, 1.0], vec![]).unwrap();
    for (lo, hi, expect_collision) in
        [(1u32, 12u32, false), (7, 30, false), (90, 100, false), (1, 16, true), (40, 100, true)]
    {
        let coeffs = make_coefficients(&CoefficientKind::Uniform { lo, hi }, &model).unwrap();
        let report = vcl_degeneracy(&model, &coeffs, 1e-12).unwrap();
        let mut sorted = report.fast.velocities.clone();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut collisions = 0;
        for w in sorted.windows(2) {
            if (w[1].1 - w[0].1).abs() <= 1e-12 * w[1].1.abs() {
                collisions += 1;
                let ((n, m), (a, b)) = (w[0].0, w[1].0);
                let part = squarefree_part(n);
                assert!(
                    [m, a, b].iter().all(|&k| squarefree_part(k) == part),
                    "{lo}..={hi}: {:?} vs {:?}",
                    w[0].0,
                    w[1].0
                );
            }
        }
        let pairs = (hi - lo + 1) as usize * (hi - lo) as usize / 2;
        assert_eq!(report.fast.distinct() + collisions, pairs);
        assert_eq!(collisions > 0, expect_collision, "support {lo}..={hi}");
    }
}
