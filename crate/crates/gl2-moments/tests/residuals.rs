mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use gl2_moments::characters::{Character, CharacterGroup};
use gl2_moments::lseries::{rankin_L1, SmoothedEstimate};
use gl2_moments::modforms::HeckeEigenform;
use gl2_moments::mainterms::{MainTerm, MainTermInputs};
use gl2_moments::residuals::*;
use num_complex::Complex64;

fn ones(lo: u64, hi: u64) -> BTreeMap<u64, (Complex64, f64)> {
    (lo..=hi).map(|q| (q, (Complex64::new(1.0, 0.0), 0.0))).collect()
}

#[test]
fn residual_of_prediction_is_zero() {
    let pred = MainTerm { value: Complex64::new(0.7, -0.1), error_bound: 2e-6 };
    let moment = SmoothedEstimate { value: pred.value, error_bound: 3e-6, x_ladder: vec![], truncation: 0 };
    let e = residual_from(11, &moment, &pred);
    assert_eq!(e.residual, Complex64::new(0.0, 0.0));
    assert!((e.error_bound - 5e-6).abs() < 1e-20);
}

#[test]
fn gaussian_weight_properties() {
    assert_eq!(gaussian_weight(100.0, 100.0, 3.0), 1.0);
    let (a, b) = (gaussian_weight(25.0, 100.0, 2.0), gaussian_weight(400.0, 100.0, 2.0));
    assert!((a - b).abs() < 1e-15);
    let w1 = gaussian_weight(37.0, 100.0, 1.5);
    let w2 = gaussian_weight(37.0, 100.0, 3.0);
    assert!((w2 - w1.powi(4)).abs() < 1e-15);
}

#[test]
fn constant_average_matches_weight_integral() {
    // (y/Q) sum_q w(q) is a Riemann sum for (y/Q) int_0^inf w = 2 pi e^{pi/y^2}
    for (y, tol) in [(4.0, 0.02), (8.0, 0.005)] {
        let (_, hi) = weight_window(100.0, y);
        let avg = weighted_average(&ones(1, hi as u64 + 1), 100.0, y, 1).unwrap();
        let want = weight_normalization(y);
        assert!((avg.value.re / want - 1.0).abs() < tol, "y={y}: {} vs {want}", avg.value.re);
        assert!(avg.omitted_weight < 1e-10);
    }
    // the Gaussian factor alone, y int e^{-y^2 t^2/4 pi} dt = 2 pi, is what
    // the shift e^{pi/y^2} moves away from
    assert!((weight_normalization(1e6) - 2.0 * PI).abs() < 1e-9);
}

#[test]
fn spike_and_linearity() {
    let (y, big_q) = (4.0, 100.0);
    let (_, hi) = weight_window(big_q, y);
    let mut spike: BTreeMap<u64, (Complex64, f64)> = (1..=hi as u64).map(|q| (q, (Complex64::new(0.0, 0.0), 0.0))).collect();
    spike.insert(100, (Complex64::new(3.0, 1.0), 0.0));
    let avg = weighted_average(&spike, big_q, y, 1).unwrap();
    assert!((avg.value - Complex64::new(3.0, 1.0) * (y / big_q)).norm() < 1e-15);

    let a: BTreeMap<u64, (Complex64, f64)> =
        (1..=hi as u64).map(|q| (q, (Complex64::new((q as f64).sqrt(), 0.0), 0.0))).collect();
    let b: BTreeMap<u64, (Complex64, f64)> =
        (1..=hi as u64).map(|q| (q, (Complex64::new(0.0, 1.0 / q as f64), 0.0))).collect();
    let ab: BTreeMap<u64, (Complex64, f64)> = a.iter().map(|(&q, &(v, _))| (q, (2.0 * v - b[&q].0, 0.0))).collect();
    let (va, vb, vab) = (
        weighted_average(&a, big_q, y, 1).unwrap().value,
        weighted_average(&b, big_q, y, 1).unwrap().value,
        weighted_average(&ab, big_q, y, 1).unwrap().value,
    );
    assert!((vab - (2.0 * va - vb)).norm() < 1e-10 * vab.norm());
}

#[test]
fn average_requires_coverage() {
    let mut m = ones(1, 30_000);
    m.remove(&97);
    assert!(matches!(weighted_average(&m, 100.0, 4.0, 1), Err(gl2_moments::Error::Coverage(_))));
    // level 2: even q are not needed
    let odd: BTreeMap<u64, (Complex64, f64)> = (1..=30_000).step_by(2).map(|q| (q, (Complex64::new(1.0, 0.0), 0.0))).collect();
    assert!(weighted_average(&odd, 100.0, 4.0, 2).is_ok());
}

#[test]
fn window_reports_omitted_mass() {
    let m = ones(25, 400);
    let w = weighted_average_window(&m, 100.0, 4.0, 1, 25, 400).unwrap();
    let full = weighted_average(&ones(1, 30_000), 100.0, 4.0, 1).unwrap();
    let missing = full.value.re - w.value.re;
    assert!(missing > 0.0 && missing <= w.omitted_weight);
    assert!(w.omitted_weight < 1.5 * missing);
}

#[test]
fn contour_quadrature_is_gaussian_over_two_pi() {
    // the line integral converges to e^{-y^2 log^2 X/4 pi}/(2 pi)
    for x in [0.5, 1.0, 2.0] {
        for y in [1.0, 2.0, 4.0] {
            let c = contour_identity_check(x, y).unwrap();
            assert!((2.0 * PI * c.lhs - c.rhs).abs() <= 1e-8, "X={x} y={y}: {c:?}");
        }
    }
    let c = contour_identity_check(1.0, 1.0).unwrap();
    assert_eq!(c.rhs, 1.0);
    assert!((c.diff - (1.0 - 1.0 / (2.0 * PI))).abs() < 1e-8);
}

fn planted(f: impl Fn(f64) -> f64) -> Vec<ResidualEntry> {
    (10..30u64)
        .map(|q| ResidualEntry { q, residual: Complex64::new(f(q as f64), 0.0), error_bound: 0.0 })
        .collect()
}

#[test]
fn exponent_fit_recovers_power_laws() {
    let fit = exponent_fit(&planted(|q| 3.0 * q.powf(-0.39))).unwrap();
    assert!((fit.slope + 0.39).abs() < 1e-10);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    let fit = exponent_fit(&planted(|_| 0.25)).unwrap();
    assert!(fit.slope.abs() < 1e-12);
    let mut few = planted(|q| q);
    for e in few.iter_mut().skip(5) {
        e.error_bound = e.residual.norm();
    }
    assert!(matches!(exponent_fit(&few), Err(gl2_moments::Error::TooFewPoints { have: 5, need: 8 })));
}

#[test]
fn csv_round_trip() {
    let mut s = ResidualSeries::new("a", "b", 1);
    for (q, r) in [(7u64, 0.25), (11, -1.5e-3), (13, 2.0)] {
        s.push(ResidualEntry { q, residual: Complex64::new(r, -r / 3.0), error_bound: 1e-7 }).unwrap();
    }
    assert!(s.push(ResidualEntry { q: 13, residual: Complex64::new(0.0, 0.0), error_bound: 0.0 }).is_err());
    let text = s.to_csv();
    assert!(text.starts_with("q,res_re,res_im,err\n"));
    let back = ResidualSeries::from_csv(&text, "a", "b", 1).unwrap();
    assert_eq!(back.entries(), s.entries());
    assert!(ResidualSeries::from_csv("q,res_re,res_im,err\n5,1,0,0\n3,1,0,0\n", "a", "b", 1).is_err());
}

// Gamma(a, x)/Gamma(a) for integer a
fn upper_gamma_ratio(a: u32, x: f64) -> f64 {
    let (mut t, mut s) = (1.0, 1.0);
    for j in 1..a {
        t *= x / j as f64;
        s += t;
    }
    (-x).exp() * s
}

/// L(1/2, f, chi) at prime q from the classical approximate functional
/// equation, root number i^k tau(chi)^2 / q, level one.
fn afe_central_value(f: &HeckeEigenform, group: &CharacterGroup, chi: &Character) -> Complex64 {
    let q = group.modulus();
    let a = f.weight() / 2;
    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
    let mut tau = Complex64::new(0.0, 0.0);
    for r in 1..q {
        tau += group.evaluate(chi, r) * Complex64::from_polar(1.0, 2.0 * PI * r as f64 / q as f64);
    }
    let eps = sign * tau * tau / q as f64;
    let mut l = Complex64::new(0.0, 0.0);
    for m in 1..40 * q {
        let c = group.evaluate(chi, m);
        if c.norm() == 0.0 {
            continue;
        }
        let w = f.coefficient(m).unwrap().re / (m as f64).sqrt() * upper_gamma_ratio(a, 2.0 * PI * m as f64 / q as f64);
        l += w * (c + eps * c.conj());
    }
    l
}

#[test]
fn residual_is_moment_minus_prediction() {
    let fs = common::level1(24, 400_000);
    let inputs = MainTermInputs::pair(&fs[0], &fs[1]).unwrap();
    let q = 53;
    let (series, points) = residual_series(&inputs, &[q], None).unwrap();
    let (e, p) = (series.entries()[0], &points[0]);
    let sum = p.report.s_direct.error_bound + p.prediction.error_bound;
    assert!((e.error_bound - sum).abs() <= 1e-15 * sum);
    assert_eq!(p.report.residual, Some(e.residual));

    // the moment itself, from an independent central-value formula
    let group = CharacterGroup::new(q);
    let l1 = fs[0].coefficient(q).unwrap().re / (q as f64).sqrt();
    let l2 = fs[1].coefficient(q).unwrap().re / (q as f64).sqrt();
    let (c0, c1) = (common::central_value_level1(&fs[0]), common::central_value_level1(&fs[1]));
    let mut s = Complex64::new(c0 * (1.0 - l1 + 1.0 / q as f64) * c1 * (1.0 - l2 + 1.0 / q as f64), 0.0);
    for chi in group.characters().skip(1) {
        s += afe_central_value(&fs[0], &group, &chi) * afe_central_value(&fs[1], &group, &chi).conj();
    }
    s /= group.order() as f64;
    assert!((s - p.report.s_direct.value).norm() < 1e-6, "{s} vs {}", p.report.s_direct.value);
    // at this size the residual is of the same order as the main term
    let two_l = 2.0 * rankin_L1(&fs[0], &fs[1]).unwrap().value.norm();
    assert!(e.residual.norm() > two_l);
}

#[test]
fn nonvanish_witnesses() {
    let delta = common::delta(400_000);
    let w = nonvanish_search(&delta, &delta, 50, None).unwrap();
    assert!((43..=57).contains(&w.q));
    assert!(w.lf.value.norm() > 10.0 * w.lf.error_bound);
    let again = nonvanish_search(&delta, &delta, 50, None).unwrap();
    assert_eq!((w.q, w.index), (again.q, again.index));

    let fs = common::level1(24, 400_000);
    let w = nonvanish_search(&fs[0], &fs[1], 50, Some((45, 55))).unwrap();
    assert!((45..=55).contains(&w.q));
    assert!(w.lf.value.norm() > 10.0 * w.lf.error_bound && w.lg.value.norm() > 10.0 * w.lg.error_bound);
    assert!(nonvanish_search(&fs[0], &fs[1], 50, Some((30, 55))).is_err());
}
