mod common;

use common::*;
use muntz::biorthogonal::dual_family;
use muntz::exponents::{generate_exponents, ExponentKind};
use muntz::hardy::{h2_membership, radial_l2_bound, Membership};
use muntz::muntz_space::{quadratic_form_evidence, MuntzSeries};
use muntz::operators::{dilation_operator, finite_rank_errors, matrix_representation, normality_defect};
use muntz::quadrature::QuadratureSpec;

fn int_squares() -> muntz::exponents::ExponentSequence {
    generate_exponents(ExponentKind::Integers, &[("p".to_string(), 2.0)].into_iter().collect(), 1).unwrap()
}

#[test]
fn quadratic_form_matches_double_precision_oracle() {
    // c^T G c with c_n = n^{-1/2}, λ_n = n², summed in double precision
    let oracle = [1.4561812224008932, 1.46907556759185, 1.475673299895983, 1.4790236181984935];
    let f = MuntzSeries::from_tag(int_squares(), "inv_sqrt_n").unwrap();
    let ev = quadratic_form_evidence(&f, 1000, 128).unwrap();
    assert_eq!(ev.checkpoints, vec![125, 250, 500, 1000]);
    for (s, o) in ev.partial_sums.iter().zip(oracle) {
        assert!((s.to_f64() - o).abs() < 1e-12, "{} vs {o}", s.to_f64());
    }
    assert!(ev.bounded_cauchy);
    assert!(ev.increment_ratios.iter().all(|r| *r < 0.6));
}

#[test]
fn l2_sums_follow_the_zeta_tail() {
    let f = MuntzSeries::from_tag(int_squares(), "inv_n").unwrap();
    let h = h2_membership(&f, 1000, 128).unwrap();
    assert_eq!(h.member, Membership::Yes);
    // Σ_{n≤1000} 1/n² = π²/6 - ψ'(1001), and ψ'(1001) ≈ 1/1000.5
    let want = std::f64::consts::PI.powi(2) / 6.0 - 1.0 / 1000.5;
    assert!((h.l2_coeff_sums.last().unwrap().to_f64() - want).abs() < 1e-9);
    assert!(h.tail_bound.unwrap() >= 1.0 / 1000.5);
}

#[test]
fn radial_bound_is_angle_independent() {
    let f = MuntzSeries::from_tag(int_squares(), "power:1.5").unwrap();
    let quad = QuadratureSpec::for_precision(128);
    let a = radial_l2_bound(&f, 0.0, 500, 16, &quad, 128).unwrap();
    let b = radial_l2_bound(&f, 2.0, 500, 16, &quad, 128).unwrap();
    assert_eq!(a.bound_m, b.bound_m);
    assert!(a.holds && b.holds);
    // θ = 0 integrand is the real series on [0,1]
    assert!((a.numeric_integral.clone() - &a.analytic_integral).abs() < 1e-25);
}

#[test]
fn operator_matrix_against_exact_oracle() {
    // M = L^T diag(u) L^{-T}; its similarity class is diag(u), so trace and
    // determinant match the exact values Σu and Πu
    let v = [1.0, 2.0, 4.0];
    let lam = seq(&v);
    let fam = dual_family(&lam, 3, 256).unwrap();
    let op = dilation_operator(&lam, 0.5, 3, 256).unwrap();
    let m = matrix_representation(&op, &fam).unwrap();
    let tr: f64 = (0..3).map(|i| m.re.get(i, i).to_f64()).sum();
    assert!((tr - (0.5 + 0.25 + 0.0625)).abs() < 1e-30);
    for i in 0..3 {
        for j in 0..i {
            assert!(m.re.get(i, j).to_f64().abs() < 1e-60);
        }
    }
    assert!(normality_defect(&op, &fam).unwrap() > 1e-3);
    let errs = finite_rank_errors(&op, &fam).unwrap();
    assert!(errs[3].computed.is_zero() || errs[3].computed < 1e-60);
}
