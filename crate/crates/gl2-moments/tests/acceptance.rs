//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 6, 8, 9 and 10 are known not to hold as stated (see README,
//! "Known limits"). They are still evaluated and printed; only a failure
//! outside that list makes the binary exit nonzero.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use gl2_moments::arith::{gcd, is_prime, is_squarefree, primes_up_to};
use gl2_moments::eisenstein::z_identity;
use gl2_moments::lseries::{rankin_L1, symsq_L1, LadderPolicy};
use gl2_moments::mainterms::{prediction_fneq, thm_main_rhs_fneq, thm_main_rhs_fneq_rederived, MainTermInputs, PRIME_CUTOFF};
use gl2_moments::modforms::{eta24_oracle, rational_eigenform_exact, HeckeEigenform};
use gl2_moments::moments::{hecke_sieve_check, orthogonality_bridge, second_moment, sieve_decomposition, ExactCoefficients};
use gl2_moments::numeric::{linear_fit, zeta_real};
use gl2_moments::residuals::*;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;

const DOCUMENTED: [u32; 4] = [6, 8, 9, 10];

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, notes: Vec::new() }
}

struct Run {
    unexpected: Vec<u32>,
}

impl Run {
    fn criterion(&mut self, id: u32, name: &str, budget_s: f64, body: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let o = body();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs < budget_s;
        let pass = o.pass && in_time;
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}  {name}: {}  [{secs:.1} s, budget {budget_s} s]", o.detail);
        for n in &o.notes {
            println!("               {n}");
        }
        if !pass && !DOCUMENTED.contains(&id) {
            self.unexpected.push(id);
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&q| is_prime(q)).collect()
}

fn pair(bound: usize) -> Vec<HeckeEigenform> {
    common::level1(24, bound)
}

fn main() -> ExitCode {
    let mut run = Run { unexpected: Vec::new() };
    let two = BigRational::from_integer(BigInt::from(2));

    run.criterion(1, "z-identity, square-free N <= 100, Q <= 100", 5.0, || {
        let mut bad = 0;
        let mut cases = 0;
        for n in (1..=100u64).filter(|&n| is_squarefree(n)) {
            for q in 1..=100u64 {
                cases += 1;
                if z_identity(n, q).map(|v| v != two).unwrap_or(true) {
                    bad += 1;
                }
            }
        }
        outcome(bad == 0, format!("{cases} cases, {bad} not equal to 2"))
    });

    run.criterion(2, "Hecke sieve identity, k = 12, d <= 210, n <= 500", 10.0, || {
        let c = ExactCoefficients::level1(12, 210 * 500).unwrap();
        let mut bad = 0;
        for d in (1..=210u64).filter(|&d| is_squarefree(d)) {
            for n in 1..=500 {
                if !hecke_sieve_check(&c, d, n).unwrap_or(false) {
                    bad += 1;
                }
            }
        }
        outcome(bad == 0, format!("{bad} failures"))
    });

    run.criterion(3, "sieve decomposition, Q in {6,10,15,30,49}, X in {8,16}", 30.0, || {
        let d = common::delta(5000);
        let p = pair(5000);
        let mut worst: f64 = 0.0;
        for q in [6u64, 10, 15, 30, 49] {
            for x in [8.0, 16.0] {
                for (f, g) in [(&d, &d), (&p[0], &p[1])] {
                    worst = worst.max(sieve_decomposition(f, g, q, x).unwrap().difference);
                }
            }
        }
        outcome(worst <= 1e-9, format!("max |direct - sieved| {worst:.2e} (tol 1e-9)"))
    });

    run.criterion(4, "orthogonality bridge, M = 2000, Q <= 30", 60.0, || {
        let d = common::delta(2000);
        let p = pair(2000);
        let mut worst: f64 = 0.0;
        for q in 1..=30 {
            for (f, g) in [(&d, &d), (&p[0], &p[1])] {
                worst = worst.max(orthogonality_bridge(f, g, q, 2000, 300.0).unwrap().difference);
            }
        }
        outcome(worst <= 1e-9, format!("max difference {worst:.2e} (tol 1e-9)"))
    });

    run.criterion(5, "Eisenstein closed forms vs brute force", 60.0, || {
        let t = gl2_moments::cli::eisenstein_table().unwrap();
        let ok = t.rows.iter().all(|r| r.status == "PASS");
        let detail = t.rows.iter().map(|r| format!("{}: {}", r.suite, r.detail)).collect::<Vec<_>>().join("; ");
        outcome(ok, detail)
    });

    run.criterion(6, "contour identity on X in {0.5,1,2}, y in {1,2,4}", 5.0, || {
        let (mut lit, mut cor): (f64, f64) = (0.0, 0.0);
        for x in [0.5, 1.0, 2.0] {
            for y in [1.0, 2.0, 4.0] {
                let c = contour_identity_check(x, y).unwrap();
                lit = lit.max(c.diff);
                cor = cor.max((2.0 * PI * c.lhs - c.rhs).abs());
            }
        }
        let mut o = outcome(lit <= 1e-8, format!("max |lhs - rhs| {lit:.3e} (tol 1e-8)"));
        o.notes.push(format!("with the 1/(2 pi) of the line integral restored: max |2 pi lhs - rhs| {cor:.2e}"));
        o
    });

    run.criterion(7, "level-one coefficients", 30.0, || {
        let tau = rational_eigenform_exact(12, 90_000).unwrap();
        let eta = eta24_oracle(1000);
        let eta_bad = (1..=1000).filter(|&n| tau[n] != BigInt::from(eta[n])).count();
        let mut mult_bad = 0;
        for m in 1..=300usize {
            for n in 1..=300usize {
                if gcd(m as u64, n as u64) == 1 && tau[m * n] != &tau[m] * &tau[n] {
                    mult_bad += 1;
                }
            }
        }
        let d = common::delta(10_000);
        let p = pair(10_000);
        let mut worst: f64 = 0.0;
        for f in [&d, &p[0], &p[1]] {
            for q in primes_up_to(10_000) {
                worst = worst.max(f.coefficient(q).unwrap().norm());
            }
        }
        outcome(
            eta_bad == 0 && mult_bad == 0 && worst <= 2.0 + 1e-9,
            format!("eta^24 mismatches {eta_bad}, multiplicativity failures {mult_bad}, max |A(p)| {worst:.6}"),
        )
    });

    run.criterion(8, "f != g convergence, weight 24 pair, primes in [50,150]", 1200.0, || {
        let qs = primes_in(50, 150);
        let p = pair(LadderPolicy::for_form(24, 1, 150).max_truncation() as usize);
        let inputs = MainTermInputs::pair(&p[0], &p[1]).unwrap();
        let two_l = 2.0 * rankin_L1(&p[0], &p[1]).unwrap().value;
        let (series, points) = residual_series(&inputs, &qs, None).unwrap();
        let med = median(points.iter().map(|pt| (pt.report.s_direct.value - two_l).norm()).collect());
        let ratio = med / two_l.norm();
        let fit = exponent_fit(series.entries());
        let (slope, r2) = fit.as_ref().map(|f| (f.slope, f.r2)).unwrap_or((f64::NAN, f64::NAN));
        let mut o = outcome(
            ratio <= 0.2 && slope <= -0.25,
            format!("2L(1,f x g) = {:.7}, median |S - 2L| / |2L| = {ratio:.3} (tol 0.2), residual slope {slope:+.3} R^2 {r2:.2e} (tol <= -0.25)", two_l.re),
        );
        let spread: Vec<String> = points.iter().take(6).map(|pt| format!("S({}) = {:+.6}", pt.report.q, pt.report.s_direct.value.re)).collect();
        o.notes.push(spread.join(", "));
        o
    });

    run.criterion(9, "f = g calibration, Delta, primes in [50,150]", 1200.0, || {
        let qs = primes_in(50, 150);
        let d = common::delta(LadderPolicy::for_form(12, 1, 150).max_truncation() as usize);
        let s: Vec<(u64, f64, f64)> = qs
            .iter()
            .map(|&q| {
                let r = second_moment(&d, &d, q, None).unwrap();
                (q, r.s_direct.value.re, r.s_direct.error_bound)
            })
            .collect();
        let xs: Vec<f64> = s.iter().map(|t| (t.0 as f64).ln()).collect();
        let ys: Vec<f64> = s.iter().map(|t| t.1).collect();
        let (slope, _, r2) = linear_fit(&xs, &ys);
        let want = 2.0 * symsq_L1(&d).unwrap().value.re / zeta_real(2.0);
        let rel = (slope / want - 1.0).abs();

        // fit on every other prime, look for a trend in what is left
        let train: Vec<usize> = (0..s.len()).step_by(2).collect();
        let tx: Vec<f64> = train.iter().map(|&i| xs[i]).collect();
        let ty: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
        let (b, a, _) = linear_fit(&tx, &ty);
        let held: Vec<ResidualEntry> = (1..s.len())
            .step_by(2)
            .map(|i| ResidualEntry { q: s[i].0, residual: Complex64::new(ys[i] - (a + b * xs[i]), 0.0), error_bound: s[i].2 })
            .collect();
        let trend = exponent_fit(&held).map(|f| f.slope).unwrap_or(f64::NAN);
        outcome(
            rel <= 0.1 && r2 >= 0.99 && trend.abs() <= 0.1,
            format!("slope {slope:.4} vs 2L(1,sym^2)/zeta(2) = {want:.4} (rel {rel:.3}, tol 0.1), R^2 {r2:.3} (tol 0.99), held-out log-log slope {trend:+.3} (tol 0.1)"),
        )
    });

    run.criterion(10, "weighted average, Q = 100, y = 4, q in [25,400]", 1800.0, || {
        let p = pair(LadderPolicy::for_form(24, 1, 400).max_truncation() as usize);
        let inputs = MainTermInputs::pair(&p[0], &p[1]).unwrap();
        let mut vals = BTreeMap::new();
        for q in 25..=400u64 {
            let r = second_moment(&p[0], &p[1], q, None).unwrap();
            vals.insert(q, (r.s_direct.value, r.s_direct.error_bound));
        }
        let avg = weighted_average_window(&vals, 100.0, 4.0, 1, 25, 400).unwrap();
        let lit = thm_main_rhs_fneq(&inputs, 4.0, PRIME_CUTOFF).unwrap();
        let red = thm_main_rhs_fneq_rederived(&inputs, 4.0, PRIME_CUTOFF).unwrap();
        let budget = avg.error_bound + lit.error_bound;
        let diff = (avg.value - lit.value).norm();
        let mut o = outcome(
            diff <= 0.1 * lit.value.norm() + budget,
            format!("average {:.6} vs rhs {:.6}: |diff| {diff:.4} (allowed {:.4})", avg.value.re, lit.value.re, 0.1 * lit.value.norm() + budget),
        );
        let rdiff = (avg.value - red.value).norm();
        o.notes.push(format!(
            "re-derived rhs {:.6}: |diff| {rdiff:.4} ({:.1}%); weight outside [25,400] {:.3e}",
            red.value.re,
            100.0 * rdiff / red.value.norm(),
            avg.omitted_weight
        ));
        let preds: BTreeMap<u64, (Complex64, f64)> = (25..=400u64)
            .map(|q| {
                let p = prediction_fneq(&inputs, q).unwrap();
                (q, (p.value, p.error_bound))
            })
            .collect();
        let pw = weighted_average_window(&preds, 100.0, 4.0, 1, 25, 400).unwrap();
        o.notes.push(format!("prediction averaged over the same window {:.6}: |diff| {:.4}", pw.value.re, (avg.value - pw.value).norm()));
        o
    });

    run.criterion(11, "non-vanishing witnesses at X in {50, 100}", 300.0, || {
        let p = pair(LadderPolicy::for_form(24, 1, 100 + 100f64.powf(0.6) as u64 + 1).max_truncation() as usize);
        let mut details = Vec::new();
        let mut ok = true;
        for x in [50u64, 100] {
            match nonvanish_search(&p[0], &p[1], x, None) {
                Ok(w) => {
                    ok &= w.lf.value.norm() > 10.0 * w.lf.error_bound && w.lg.value.norm() > 10.0 * w.lg.error_bound;
                    details.push(format!(
                        "X={x}: q={} chi#{} |L_f| {:.3e} (err {:.1e}) |L_g| {:.3e} (err {:.1e})",
                        w.q,
                        w.index,
                        w.lf.value.norm(),
                        w.lf.error_bound,
                        w.lg.value.norm(),
                        w.lg.error_bound
                    ));
                }
                Err(e) => {
                    ok = false;
                    details.push(format!("X={x}: {e}"));
                }
            }
        }
        outcome(ok, details.join("; "))
    });

    run.criterion(12, "sweep determinism across 1, 4, 8 threads", 1200.0, || {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
        std::fs::create_dir_all(&dir).unwrap();
        let cache = common::cache_dir().display().to_string();
        let mut outputs = Vec::new();
        for threads in ["1", "4", "8"] {
            let out = dir.join(format!("sweep-{threads}.csv"));
            let args = [
                "gl2m", "sweep", "--f", "k24+", "--g", "k24-", "--q-min", "50", "--q-max", "70", "--cache", &cache,
                "--threads", threads, "--output", out.to_str().unwrap(),
            ];
            let code = gl2_moments::cli::main_with_args(args);
            if code != ExitCode::SUCCESS {
                return outcome(false, format!("sweep with {threads} threads did not succeed"));
            }
            outputs.push(std::fs::read(&out).unwrap());
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        let rows = outputs[0].iter().filter(|&&b| b == b'\n').count() - 1;
        outcome(same && rows == 21, format!("{rows} rows, identical bytes: {same}"))
    });

    if run.unexpected.is_empty() {
        println!("acceptance: no failures outside {DOCUMENTED:?}");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {:?}", run.unexpected);
        ExitCode::FAILURE
    }
}
