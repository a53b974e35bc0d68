//! Acceptance suite: one line per criterion. Runs as its own binary so the
//! lines are always printed; exits non-zero when a criterion outside
//! `KNOWN_FAILURES` fails, or when a known failure starts passing.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::{Float, Rational};

use common::*;
use muntz::biorthogonal::{dual_family, norm_growth_check};
use muntz::completeness::{hereditary_sweep, PartitionSelection};
use muntz::exponents::{generate_exponents, ExponentKind, ExponentSequence};
use muntz::gram::{cauchy_determinant, cauchy_inverse, distance_product, gram_matrix};
use muntz::hardy::{attach_radial, h2_membership, Membership};
use muntz::muntz_space::{project, recover_coefficients, BlackBox, Function, MuntzSeries};
use muntz::operators::{
    dilation_operator, finite_rank_errors, synthesis_certificate, CertificateTolerances, CheckStatus,
};
use muntz::quadrature::QuadratureSpec;

/// Criteria whose stated threshold does not hold for the exact quantities;
/// they are evaluated as written and reported.
const KNOWN_FAILURES: &[u32] = &[9];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn squares(n: usize) -> ExponentSequence {
    power(2.0, n)
}

fn integer_squares(n: usize) -> ExponentSequence {
    generate_exponents(ExponentKind::Integers, &[("p".to_string(), 2.0)].into_iter().collect(), n).unwrap()
}

fn c1() -> Outcome {
    let start = Instant::now();
    let lam = squares(10);
    let fam = dual_family(&lam, 10, 256).unwrap();
    let v = lam.values();
    // ⟨e_j, r_n⟩ = Σ_k c_kn / (λ_j + λ_k + 1), from fresh analytic entries
    let mut worst = Float::new(256);
    for j in 0..10 {
        for n in 0..10 {
            let mut s = Float::new(256);
            for (k, lk) in v.iter().enumerate() {
                s += Float::with_val(256, fam.coeffs.get(k, n)) / (Float::with_val(256, v[j]) + lk + 1u32);
            }
            if j == n {
                s -= 1u32;
            }
            worst = worst.max(&s.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-40 && secs < 10.0, format!("max |<e_j, r_n> - delta| = {:.3e} (< 1e-40), {secs:.2} s (< 10 s)", worst.to_f64()))
}

fn c2() -> Outcome {
    let mut worst = 0.0f64;
    let mut sets: Vec<Vec<f64>> = (1..=8).map(|n| squares(n).values().to_vec()).collect();
    sets.push(vec![0.5, 1.25, 2.0, 3.75, 6.0, 9.5, 13.0, 20.0]);
    sets.push(lacunary(2.0, 8).values().to_vec());
    for v in &sets {
        let g = gram_matrix(&seq(v), 256).unwrap();
        let exact = rational_gram(v);
        worst = worst.max(rel_err(&cauchy_determinant(&g).unwrap(), &lu_determinant(&exact)));
        let inv = cauchy_inverse(&g).unwrap();
        for (i, row) in lu_inverse(&exact).iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                worst = worst.max(rel_err(inv.matrix.get(i, j), w));
            }
        }
    }
    outcome(worst < 1e-25, format!("max rel err vs exact elimination over {} sets, N <= 8: {worst:.3e} (< 1e-25)", sets.len()))
}

fn c3() -> Outcome {
    let lam = squares(10);
    let fam = dual_family(&lam, 10, 256).unwrap();
    let mut worst = Float::new(256);
    for n in 1..=10 {
        let d = distance_product(&lam, n, 256).unwrap();
        let defect = (d * &fam.norms[n - 1] - 1u32).abs();
        worst = worst.max(&defect);
    }
    let two = seq(&[1.0, 2.0]);
    let want = [1.0 / (4.0 * 3f64.sqrt()), 1.0 / (4.0 * 5f64.sqrt())];
    let hand = (1..=2)
        .map(|n| {
            let exact = Float::with_val(256, if n == 1 { 3 } else { 5 }).sqrt() * 4u32;
            let exact = Float::with_val(256, 1) / exact;
            (distance_product(&two, n, 256).unwrap() - exact).abs().to_f64()
        })
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-25 && hand < 1e-20,
        format!(
            "max |D_n ||r_n|| - 1| = {:.3e} (< 1e-25); hand values {:.6}, {:.6} reproduced to {hand:.1e} (< 1e-20)",
            worst.to_f64(),
            want[0],
            want[1]
        ),
    )
}

fn c4() -> Outcome {
    let lam = squares(10);
    let fam = dual_family(&lam, 10, 256).unwrap();
    let f = MuntzSeries::from_real(seq(&[4.0, 49.0]), &[3.0, -5.0], 256).unwrap();
    let want = [0.0, 3.0, 0.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0];
    let quad = QuadratureSpec::for_precision(256);
    let exact = recover_coefficients(&Function::from(f.clone()), &fam, &quad).unwrap();
    let exact_ok = exact.exact
        && exact
            .coefficients
            .iter()
            .zip(&want)
            .all(|(c, w)| c.im.is_zero() && Rational::from_f64(*w).is_some_and(|r| c.re == r));
    let bb = BlackBox::from_series(&f).unwrap();
    let numeric = recover_coefficients(&Function::from(bb), &fam, &quad).unwrap();
    let err = numeric
        .coefficients
        .iter()
        .zip(&want)
        .map(|(c, w)| (c.re.to_f64() - w).abs().max(c.im.to_f64().abs()))
        .fold(0.0, f64::max);
    outcome(exact_ok && err < 1e-8, format!("analytic path exact: {exact_ok}; quadrature path max err {err:.3e} (< 1e-8)"))
}

fn c5() -> Outcome {
    let quad = QuadratureSpec::for_precision(256);
    let fam2 = dual_family(&seq(&[1.0, 2.0]), 2, 256).unwrap();
    let t3 = MuntzSeries::monomial(3.0, 256).unwrap();
    let p = project(&Function::from(t3), &fam2, &quad).unwrap();
    let a = p.series.coeffs[0].re.to_f64();
    let b = p.series.coeffs[1].re.to_f64();
    let coeff_ok = (a + 0.4).abs() < 1e-20 && (b - 4.0 / 3.0).abs() < 1e-20;
    let r = p.residual.to_f64();
    let resid_ok = (r - 0.02520).abs() <= 1e-4;

    let lam = squares(6);
    let fam = dual_family(&lam, 6, 256).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_idem = 0.0f64;
    let mut worst_gram = 0.0f64;
    for _ in 0..20 {
        let mut exps: Vec<f64> = Vec::new();
        while exps.len() < 3 {
            let e = rng.gen_range(1..160) as f64 / 8.0;
            if !exps.contains(&e) {
                exps.push(e);
            }
        }
        exps.sort_by(|x, y| x.total_cmp(y));
        let cs: Vec<f64> = (0..3).map(|_| rng.gen_range(-32..=32) as f64 / 4.0).collect();
        let f = MuntzSeries::from_real(seq(&exps), &cs, 256).unwrap();
        let pf = project(&Function::from(f), &fam, &quad).unwrap();
        worst_gram = worst_gram.max(pf.consistency.to_f64());
        let again = project(&Function::from(pf.series.clone()), &fam, &quad).unwrap();
        let d = again
            .series
            .coeffs
            .iter()
            .zip(&pf.series.coeffs)
            .map(|(x, y)| x.sub(y).abs().to_f64())
            .fold(0.0, f64::max);
        worst_idem = worst_idem.max(d);
    }
    outcome(
        coeff_ok && resid_ok && worst_idem < 1e-20 && worst_gram < 1e-20,
        format!(
            "f* = {a:.6} t + {b:.6} t^2, residual {r:.5} (0.02520 +- 1e-4); 20 random series: idempotence {worst_idem:.2e}, Gram agreement {worst_gram:.2e} (< 1e-20)"
        ),
    )
}

fn c6() -> Outcome {
    let fam2 = dual_family(&seq(&[1.0, 2.0]), 2, 256).unwrap();
    let op2 = dilation_operator(&fam2.lambda, 0.5, 2, 256).unwrap();
    let cert2 = synthesis_certificate(&op2, &fam2, &CertificateTolerances::for_precision(256), PartitionSelection::All).unwrap();
    let eig: Vec<f64> = cert2.eigenvalues.iter().map(|z| z.re.to_f64()).collect();
    let eig_ok = eig.contains(&0.5) && eig.contains(&0.25);
    let normality = cert2.normality.value.to_f64();
    let norm_ok = (normality - 1.875f64.sqrt()).abs() <= 1e-4;
    let t1 = finite_rank_errors(&op2, &fam2).unwrap()[1].computed.to_f64();
    let t1_ok = (t1 - 1.0).abs() <= 1e-6;

    let start = Instant::now();
    let lam = squares(10);
    let fam = dual_family(&lam, 10, 512).unwrap();
    let op = dilation_operator(&lam, 0.5, 10, 512).unwrap();
    let cert = synthesis_certificate(&op, &fam, &CertificateTolerances::for_precision(512), PartitionSelection::All).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let items = [
        &cert.finite_rank,
        &cert.eigen_relations,
        &cert.adjoint_relations,
        &cert.kernel,
        &cert.spectrum,
        &cert.simplicity,
        &cert.normality,
    ];
    let seven = items.iter().all(|i| i.status == CheckStatus::Pass);
    let eigen = cert.eigen_relations.value.to_f64();
    // T_m is defined for m = 1, 2, ...
    let errs = &cert.finite_rank_errors;
    let decreasing = errs[1..].windows(2).all(|w| w[1].computed < w[0].computed);
    let enveloped = errs[1..].iter().all(|e| e.computed <= e.bound);
    outcome(
        eig_ok && norm_ok && t1_ok && seven && eigen < 1e-40 && decreasing && enveloped && secs < 60.0,
        format!(
            "N=2: eigenvalues {eig:?}, normality {normality:.5}, ||T-T_1|| = {t1:.7}; N=10 @512: seven items pass {seven}, eigen residual {eigen:.2e} (< 1e-40), decreasing {decreasing}, under envelope {enveloped}, {} partitions, {secs:.1} s (< 60 s)",
            cert.partitions_checked
        ),
    )
}

fn c7() -> Outcome {
    let quad = QuadratureSpec::for_precision(256);
    let t3 = Function::from(MuntzSeries::monomial(3.0, 256).unwrap());
    let lam = squares(10);
    let mut per_n = Vec::new();
    let mut invertible_all = true;
    let mut spread = 0.0f64;
    let mut rows10 = 0;
    for n in [4usize, 6, 8, 10] {
        let fam = dual_family(&lam, n, 256).unwrap();
        let rows = hereditary_sweep(&fam, PartitionSelection::All, Some(&t3), &quad).unwrap();
        invertible_all &= rows.iter().all(|r| r.invertible);
        let res: Vec<Float> = rows.iter().map(|r| r.residual.clone().unwrap()).collect();
        let lo = res.iter().min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
        let hi = res.iter().max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
        spread = spread.max(Float::with_val(256, hi - lo).to_f64());
        per_n.push(res[0].clone());
        if n == 10 {
            rows10 = rows.len();
        }
    }
    let nonincreasing = per_n.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = per_n.iter().map(|r| format!("{:.6e}", r.to_f64())).collect();
    outcome(
        invertible_all && rows10 == 1024 && spread < 1e-20 && nonincreasing,
        format!(
            "{rows10} partitions at N=10, all invertible {invertible_all}; residual spread {spread:.2e} (< 1e-20); t^3 residual at N=4,6,8,10: {} non-increasing {nonincreasing}",
            shown.join(", ")
        ),
    )
}

fn c8() -> Outcome {
    let lam = integer_squares(1);
    let inv_n = MuntzSeries::from_tag(lam.clone(), "inv_n").unwrap();
    let mut yes = h2_membership(&inv_n, 1000, 256).unwrap();
    let inv_sqrt = MuntzSeries::from_tag(lam, "inv_sqrt_n").unwrap();
    let no = h2_membership(&inv_sqrt, 1000, 256).unwrap();
    let qf = no.quadratic_form.clone().unwrap();
    let thetas = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI];
    let quad = QuadratureSpec::for_precision(256);
    let radial = attach_radial(&mut yes, &inv_n, &thetas, 1000, 64, &quad, 256).unwrap();
    let holds = radial.iter().all(|b| b.holds);
    let m = radial[0].bound_m.to_f64();
    let worst = radial.iter().map(|b| b.numeric_integral.to_f64()).fold(0.0, f64::max);
    let sums: Vec<String> = qf.partial_sums.iter().map(|s| format!("{:.5}", s.to_f64())).collect();
    outcome(
        yes.member == Membership::Yes && no.member == Membership::No && qf.bounded_cauchy && holds,
        format!(
            "1/n: {:?}; n^-1/2: {:?}, quadratic-form sums at K={:?}: {} (bounded and Cauchy {}); radial integral max {worst:.5} <= M = {m:.5} at 5 angles: {holds}",
            yes.member,
            no.member,
            qf.checkpoints,
            sums.join(", "),
            qf.bounded_cauchy
        ),
    )
}

fn c9() -> Outcome {
    let lam = squares(12);
    let fam = dual_family(&lam, 12, 512).unwrap();
    let rep = norm_growth_check(&fam, 0.05).unwrap();
    // independent: ||r_n|| = 1 / D_n from the closed-form product
    let oracle: Vec<f64> = (1..=12)
        .map(|n| {
            let d = distance_product(&lam, n, 512).unwrap();
            -d.ln().to_f64() / lam.values()[n - 1]
        })
        .collect();
    let agree = oracle.iter().zip(&rep.ratios).all(|(a, b)| (a - b).abs() < 1e-12);
    let max = oracle.iter().cloned().fold(f64::MIN, f64::max);
    let trend = oracle[3..].windows(2).all(|w| w[1] <= w[0]);
    outcome(
        agree && max <= 0.05 && trend,
        format!("max_n log||r_n||/lambda_n = {max:.4} (<= 0.05), non-increasing for n >= 4: {trend}, oracle agreement {agree}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "biorthogonality", c1),
        (2, "closed forms vs elimination", c2),
        (3, "distance duality", c3),
        (4, "representation round trip", c4),
        (5, "projection", c5),
        (6, "operator certificate", c6),
        (7, "hereditary completeness", c7),
        (8, "Hardy membership", c8),
        (9, "norm growth", c9),
    ];
    let mut bad = Vec::new();
    for (id, name, run) in criteria {
        let o = run();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (listed as known failure)",
        };
        println!("criterion {id} [{name}]: {tag}: {}", o.detail);
        if o.pass == known {
            bad.push(id);
        }
    }
    if !bad.is_empty() {
        eprintln!("unexpected outcome for criteria {bad:?}");
        std::process::exit(1);
    }
}
