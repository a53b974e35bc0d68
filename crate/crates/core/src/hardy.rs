//! Membership in the gap Hardy space `H²(𝔻, Λ)` for integer exponents: the
//! ℓ² test on coefficients, the closure test through the dual family, and
//! the radial L² bound along rays `t e^{iθ}`.

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::biorthogonal::dual_family_auto;
use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::muntz_space::{
    project, quadratic_form, quadratic_form_evidence, quadrature_moments, Function, MuntzSeries,
    QuadraticFormEvidence,
};
use crate::numeric::{serde_float, serde_float_opt, serde_float_vec, CFloat};
use crate::quadrature::{integrate_vec, QuadratureSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Yes,
    No,
    Inconclusive,
}

/// Distance of `f` to `span{e_1..e_N}` at one truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    #[serde(rename = "N")]
    pub truncation: usize,
    #[serde(with = "serde_float")]
    pub residual: Float,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub member: Membership,
    /// Why the verdict holds: the comparison used, or what was missing.
    pub certificate: String,
    pub checkpoints: Vec<usize>,
    /// `Σ_{n≤K} |c_n|²` (or `Σ |⟨f, r_n⟩|²`) at each checkpoint.
    #[serde(with = "serde_float_vec")]
    pub l2_coeff_sums: Vec<Float>,
    /// Certified bound on `Σ_{n>K} |c_n|²` when one is known.
    pub tail_bound: Option<f64>,
    /// Partial sums of the L²(0,1) quadratic form, for rule series.
    #[serde(default)]
    pub quadratic_form: Option<QuadraticFormEvidence>,
    /// Recovered `⟨f, r_n^(N)⟩` at the largest truncation of a frame test.
    #[serde(default)]
    pub coefficients: Vec<CFloat>,
    #[serde(default)]
    pub residuals: Vec<ResidualPoint>,
    #[serde(with = "serde_float_opt", default)]
    pub radial_bound_m: Option<Float>,
    /// `θ` → quadrature estimate of `∫₀¹ |f(t e^{iθ})|² dt`.
    #[serde(default)]
    pub radial_integral_estimates: BTreeMap<String, String>,
}

fn require_integer(lambda: &ExponentSequence, k: usize) -> Result<ExponentSequence> {
    let prefix = lambda.truncated(k)?;
    if !prefix.values().iter().all(|v| v.fract() == 0.0) {
        return Err(MuntzError::Domain("H²(𝔻, Λ) needs integer exponents".into()));
    }
    Ok(prefix)
}

fn dyadic_checkpoints(k: usize) -> Vec<usize> {
    let mut c: Vec<usize> = [k / 8, k / 4, k / 2, k].into_iter().filter(|&x| x >= 1).collect();
    c.dedup();
    c
}

fn partial_sums(coeffs: &[CFloat], checkpoints: &[usize], prec: u32) -> Vec<Float> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = Float::new(prec);
    let mut done = 0;
    for &c in checkpoints {
        for z in &coeffs[done..c.min(coeffs.len())] {
            acc += z.norm_sqr();
        }
        done = c.min(coeffs.len());
        out.push(acc.clone());
    }
    out
}

/// Comparison certificate for `Σ |c_n|²` supplied by a named rule:
/// `Ok(tail)` when it converges, `Err(lower bound growth)` otherwise.
fn rule_comparison(f: &MuntzSeries, k: usize) -> Option<std::result::Result<f64, String>> {
    let rule = f.rule.as_ref()?;
    f.rule_tag.as_ref()?;
    let s2 = rule.scale * rule.scale;
    if s2 == 0.0 {
        return Some(Ok(0.0));
    }
    let two_s = 2.0 * rule.decay;
    if two_s > 1.0 {
        // Σ_{n>K} n^{-2s} ≤ ∫_K^∞ x^{-2s} dx
        Some(Ok(s2 * (k as f64).powf(1.0 - two_s) / (two_s - 1.0)))
    } else {
        Some(Err(format!(
            "|c_n|^2 = {s2} n^(-{two_s}) >= {s2}/n for n >= 1; partial sums exceed {s2}·ln(K+1) and diverge with the harmonic series"
        )))
    }
}

/// ℓ² test on the coefficients of a Müntz series.
pub fn h2_membership(f: &MuntzSeries, budget: usize, prec: u32) -> Result<HardyReport> {
    if budget == 0 {
        return Err(MuntzError::Parameter("term budget must be positive".into()));
    }
    let k = if f.is_finite() { f.coeffs.len().max(1) } else { budget };
    require_integer(&f.lambda, k)?;
    let coeffs: Vec<CFloat> = (1..=k).map(|n| f.coefficient(n, prec)).collect();
    let checkpoints = dyadic_checkpoints(k);
    let l2_coeff_sums = partial_sums(&coeffs, &checkpoints, prec);
    let quadratic = if f.is_finite() { None } else { Some(quadratic_form_evidence(f, budget, prec)?) };

    let (member, certificate, tail_bound) = if f.is_finite() {
        (Membership::Yes, "finite series".to_string(), Some(0.0))
    } else {
        match rule_comparison(f, k) {
            Some(Ok(tail)) => (
                Membership::Yes,
                format!("p-series comparison: tail after K = {k} is at most {tail:e}"),
                Some(tail),
            ),
            Some(Err(why)) => (Membership::No, why, None),
            None => (
                Membership::Inconclusive,
                "no named rule supplies a comparison; partial sums only".to_string(),
                None,
            ),
        }
    };
    Ok(HardyReport {
        member,
        certificate,
        checkpoints,
        l2_coeff_sums,
        tail_bound,
        quadratic_form: quadratic,
        coefficients: Vec::new(),
        residuals: Vec::new(),
        radial_bound_m: None,
        radial_integral_estimates: BTreeMap::new(),
    })
}

/// Options for the closure test.
#[derive(Clone, Debug)]
pub struct FrameOptions {
    /// Residual below which `f` counts as lying in the truncated span.
    pub residual_tolerance: f64,
    pub quadrature: QuadratureSpec,
    /// Precision ceiling for the dual families.
    pub max_bits: u32,
}

impl FrameOptions {
    pub fn for_precision(bits: u32) -> Self {
        FrameOptions {
            residual_tolerance: 1e-10,
            quadrature: QuadratureSpec::for_precision(bits),
            max_bits: bits * 4,
        }
    }
}

/// Lower bound on `dist(t^μ, closed span of Λ)` from the truncated distance
/// `d_N`: each omitted factor `1 - (2μ+1)/(λ_k+μ+1) ≥ exp(-2(2μ+1)/(λ_k+μ+1))`
/// once `λ_{N+1} + μ + 1 ≥ 2(2μ+1)`.
fn monomial_distance_lower_bound(lambda: &ExponentSequence, mu: f64, n: usize, d_n: &Float) -> Option<Float> {
    let next = lambda.value_at(n + 1).ok()?;
    if next + mu + 1.0 < 2.0 * (2.0 * mu + 1.0) {
        return None;
    }
    let tail = lambda.reciprocal_tail_bound(n)?;
    let p = d_n.prec();
    let factor = Float::with_val(p, -2.0 * (2.0 * mu + 1.0) * tail).exp();
    Some(factor * d_n)
}

/// Closure test through projections on `span{e_1..e_N}` and ℓ² summability of
/// the recovered coefficients, over dyadic truncations up to `K`.
pub fn closure_membership_via_frame(
    f: &Function,
    lambda: &ExponentSequence,
    k: usize,
    prec: u32,
    opts: &FrameOptions,
) -> Result<HardyReport> {
    if k == 0 {
        return Err(MuntzError::Parameter("term budget must be positive".into()));
    }
    require_integer(lambda, k)?;
    let checkpoints = dyadic_checkpoints(k);

    // Black boxes are integrated once against all K monomials.
    let moments = match f {
        Function::BlackBox(bb) => {
            let lam = lambda.truncated(k)?;
            Some(quadrature_moments(bb, lam.values(), &opts.quadrature, prec)?)
        }
        Function::Series(s) if !s.is_finite() => {
            return Err(MuntzError::Parameter("closure test needs a finite series or a black box".into()))
        }
        Function::Series(_) => None,
    };

    let mut residuals = Vec::with_capacity(checkpoints.len());
    let mut coefficients = Vec::new();
    for &n in &checkpoints {
        let family = dual_family_auto(lambda, n, prec, opts.max_bits)?;
        let p = family.precision_bits();
        let (coeffs, residual) = match (&moments, f) {
            (Some((b, _)), _) => {
                let norm_sq = &b[k].re;
                let a: Vec<CFloat> = (0..n)
                    .map(|col| {
                        let mut s = CFloat::zero(p);
                        for (row, bk) in b[..n].iter().enumerate() {
                            s.add_scaled(bk, family.coeffs.get(row, col));
                        }
                        s
                    })
                    .collect();
                let mut r2 = Float::with_val(p, norm_sq);
                for (an, bn) in a.iter().zip(&b[..n]) {
                    r2 -= bn.re_mul_conj(an);
                }
                (a, r2.max(&Float::new(p)).sqrt())
            }
            (None, _) => {
                let proj = project(f, &family, &opts.quadrature)?;
                (proj.series.coeffs, proj.residual)
            }
        };
        residuals.push(ResidualPoint { truncation: n, residual });
        coefficients = coeffs;
    }
    let l2_coeff_sums = partial_sums(&coefficients, &checkpoints, prec);
    let last = &residuals.last().unwrap().residual;

    let (member, certificate) = if *last <= opts.residual_tolerance {
        (
            Membership::Yes,
            format!(
                "residual {:e} at N = {k} is within {:e}: f lies in span{{e_1..e_{k}}}, so its coefficients are finitely supported",
                last.to_f64(),
                opts.residual_tolerance
            ),
        )
    } else {
        match single_off_lambda_monomial(f, lambda, k) {
            Some(mu) => {
                let bound = residuals
                    .iter()
                    .rev()
                    .find_map(|r| monomial_distance_lower_bound(lambda, mu, r.truncation, &r.residual).map(|b| (r.truncation, b)));
                match bound {
                    Some((n, b)) if b > 0 => (
                        Membership::No,
                        format!(
                            "dist(t^{mu}, closed span) >= {:e} (from the distance at N = {n}); t^{mu} is not in the closure",
                            b.to_f64()
                        ),
                    ),
                    _ => (
                        Membership::Inconclusive,
                        "residual stays positive but no tail bound applies at these truncations".into(),
                    ),
                }
            }
            None => (
                Membership::Inconclusive,
                format!("residual {:e} above tolerance at N = {k}", last.to_f64()),
            ),
        }
    };
    Ok(HardyReport {
        member,
        certificate,
        checkpoints,
        l2_coeff_sums,
        tail_bound: None,
        quadratic_form: None,
        coefficients,
        residuals,
        radial_bound_m: None,
        radial_integral_estimates: BTreeMap::new(),
    })
}

/// `μ` when `f` is a single monomial `c t^μ` with `μ ∉ Λ`.
fn single_off_lambda_monomial(f: &Function, lambda: &ExponentSequence, k: usize) -> Option<f64> {
    let Function::Series(s) = f else { return None };
    let terms = s.terms().ok()?;
    let nonzero: Vec<&(f64, CFloat)> = terms.iter().filter(|(_, c)| !c.is_zero()).collect();
    let [(mu, _)] = nonzero.as_slice() else { return None };
    let on_lambda = (1..=k + 1).any(|n| lambda.value_at(n).map(|l| l == *mu).unwrap_or(false))
        || lambda.value_at(k + 1).map(|l| *mu > l).unwrap_or(true);
    (!on_lambda).then_some(*mu)
}

/// Radial L² bound along one ray next to its numerical value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBound {
    pub theta: f64,
    /// `(Σ|c_n|² + tail)(Σ 1/(2λ_n+1) + tail)`; independent of `θ`.
    #[serde(with = "serde_float")]
    pub bound_m: Float,
    /// Quadrature estimate of `∫₀¹ |f_K(t e^{iθ})|² dt` over the evaluated prefix.
    #[serde(with = "serde_float")]
    pub numeric_integral: Float,
    /// `Σ_{j,k} c_j c̄_k e^{i(λ_j-λ_k)θ} / (λ_j+λ_k+1)`, the same integral in closed form.
    #[serde(with = "serde_float")]
    pub analytic_integral: Float,
    pub quadrature_error: f64,
    pub terms: usize,
    pub holds: bool,
}

/// `M` for a series with a certified coefficient tail.
pub fn radial_constant(f: &MuntzSeries, budget: usize, prec: u32) -> Result<Float> {
    let k = if f.is_finite() { f.coeffs.len().max(1) } else { budget };
    let lam = require_integer(&f.lambda, k)?;
    let coeff_tail = if f.is_finite() {
        0.0
    } else {
        match rule_comparison(f, k) {
            Some(Ok(t)) => t,
            Some(Err(why)) => return Err(MuntzError::NonMember(why)),
            None => {
                return Err(MuntzError::Parameter(
                    "radial bound needs a named rule to bound the coefficient tail".into(),
                ))
            }
        }
    };
    let lambda_tail = if f.is_finite() {
        0.0
    } else {
        // Σ_{n>K} 1/(2λ_n+1) ≤ ½ Σ_{n>K} 1/λ_n
        0.5 * f.lambda.reciprocal_tail_bound(k).ok_or_else(|| {
            MuntzError::Parameter("no reciprocal tail bound for these exponents".into())
        })?
    };
    let mut sc = Float::with_val(prec, coeff_tail);
    for n in 1..=k {
        sc += f.coefficient(n, prec).norm_sqr();
    }
    let mut sl = Float::with_val(prec, lambda_tail);
    for &l in lam.values() {
        sl += Float::with_val(prec, 1) / (Float::with_val(prec, l) * 2u32 + 1u32);
    }
    Ok(sc * sl)
}

/// `M` together with `∫₀¹ |f(t e^{iθ})|² dt` for the first `terms` terms.
pub fn radial_l2_bound(
    f: &MuntzSeries,
    theta: f64,
    budget: usize,
    terms: usize,
    quad: &QuadratureSpec,
    prec: u32,
) -> Result<RadialBound> {
    let bound_m = radial_constant(f, budget, prec)?;
    let prefix = f.prefix(terms.min(budget), prec)?;
    let lam = require_integer(&prefix.lambda, prefix.coeffs.len().max(1))?;
    let th = Float::with_val(prec, theta);
    // c_n e^{iλ_n θ}; integer λ makes the ray well defined for every θ
    let rotated: Vec<(f64, CFloat)> = lam
        .values()
        .iter()
        .zip(&prefix.coeffs)
        .map(|(&l, c)| (l, c.mul(&CFloat::from_polar(&Float::with_val(prec, 1), &Float::with_val(prec, &th * l)))))
        .collect();
    let n = rotated.len();
    let r = integrate_vec(
        &|t| {
            let mut s = CFloat::zero(prec);
            for (l, c) in &rotated {
                s.add_scaled(c, &crate::numeric::pow_real(t, *l));
            }
            vec![CFloat::real(s.norm_sqr())]
        },
        1,
        quad,
        prec,
    )?;
    let numeric_integral = r.values[0].re.clone();
    let analytic_integral = quadratic_form(&rotated, prec);
    Ok(RadialBound {
        theta,
        holds: numeric_integral <= bound_m,
        bound_m,
        numeric_integral,
        analytic_integral,
        quadrature_error: r.error,
        terms: n,
    })
}

/// Radial bounds at several angles, in parallel; fills the report fields.
pub fn attach_radial(
    report: &mut HardyReport,
    f: &MuntzSeries,
    thetas: &[f64],
    budget: usize,
    terms: usize,
    quad: &QuadratureSpec,
    prec: u32,
) -> Result<Vec<RadialBound>> {
    let bounds = thetas
        .par_iter()
        .map(|&th| radial_l2_bound(f, th, budget, terms, quad, prec))
        .collect::<Result<Vec<_>>>()?;
    report.radial_bound_m = bounds.first().map(|b| b.bound_m.clone());
    report.radial_integral_estimates = bounds
        .iter()
        .map(|b| (format!("{}", b.theta), crate::numeric::to_decimal(&b.numeric_integral)))
        .collect();
    Ok(bounds)
}
