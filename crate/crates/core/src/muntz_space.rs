//! Müntz series `f(z) = Σ c_n z^{λ_n}`: evaluation on the slit disk, L² norms,
//! coefficient recovery against the dual family, the projection `f*` and the
//! dilation approximation by Müntz polynomials.
//!
//! Series supported on finitely many exponents take an exact rational path
//! (every `f64` exponent and every MPFR coefficient is a dyadic rational).
//! Black-box functions go through adaptive quadrature.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::biorthogonal::BiorthogonalFamily;
use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::linalg::cholesky_solve;
use crate::numeric::{pow_real, serde_float, serde_float_vec, to_rational, CFloat, DEFAULT_PRECISION_BITS};
use crate::quadrature::{integrate_vec, QuadratureSpec};

/// Default number of terms of a rule series examined by norm-based checks.
pub const DEFAULT_TERM_BUDGET: usize = 1000;
/// Largest ratio of consecutive dyadic increments accepted as Cauchy behaviour.
pub const BOUNDED_CAUCHY_RATIO: f64 = 0.9;
/// `approximate_in_span` gives up when `ρ` would have to exceed `1 - RHO_CEILING_GAP`.
pub const RHO_CEILING_GAP: f64 = 1e-9;
const MAX_EVAL_TERMS: usize = 1_000_000;

/// `c_n = scale · n^{-decay}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRule {
    pub scale: f64,
    pub decay: f64,
}

impl CoefficientRule {
    pub fn new(scale: f64, decay: f64) -> Result<Self> {
        if !scale.is_finite() || !decay.is_finite() {
            return Err(MuntzError::Parameter("coefficient rule needs finite scale and decay".into()));
        }
        Ok(CoefficientRule { scale, decay })
    }

    /// Named fixtures: `inv_n`, `inv_sqrt_n`, `power:<s>`.
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "inv_n" => Self::new(1.0, 1.0),
            "inv_sqrt_n" => Self::new(1.0, 0.5),
            _ => {
                let s = tag
                    .strip_prefix("power:")
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| MuntzError::Parameter(format!("unknown coefficient rule '{tag}'")))?;
                Self::new(1.0, s)
            }
        }
    }

    pub fn coefficient(&self, n: usize, prec: u32) -> Float {
        let base = Float::with_val(prec, n);
        let v = if self.decay == 0.0 {
            Float::with_val(prec, 1)
        } else {
            let e = Float::with_val(prec, -self.decay);
            base.pow(&e)
        };
        v * self.scale
    }

    pub fn coefficient_f64(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(-self.decay)
    }

    /// `sup_{n ≥ k} |c_{n+1} / c_n|`.
    pub fn abs_ratio_bound(&self, k: usize) -> f64 {
        if self.decay >= 0.0 {
            1.0
        } else {
            let k = k.max(1) as f64;
            ((k + 1.0) / k).powf(-self.decay)
        }
    }
}

/// `f(z) = Σ c_n z^{λ_n}`, either with finitely many stored coefficients or
/// with coefficients produced by a rule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuntzSeries {
    pub lambda: ExponentSequence,
    #[serde(default)]
    pub coeffs: Vec<CFloat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<CoefficientRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_tag: Option<String>,
}

impl MuntzSeries {
    pub fn finite(lambda: ExponentSequence, coeffs: Vec<CFloat>) -> Result<Self> {
        let s = MuntzSeries { lambda, coeffs, rule: None, rule_tag: None };
        s.validate()?;
        Ok(s)
    }

    pub fn from_real(lambda: ExponentSequence, coeffs: &[f64], prec: u32) -> Result<Self> {
        let c = coeffs.iter().map(|&x| CFloat::from_f64(prec, x, 0.0)).collect();
        Self::finite(lambda, c)
    }

    /// Single monomial `t^μ`.
    pub fn monomial(mu: f64, prec: u32) -> Result<Self> {
        let lambda = ExponentSequence::custom(vec![mu], crate::exponents::DEFAULT_MIN_GAP)?;
        Self::from_real(lambda, &[1.0], prec)
    }

    /// Series with coefficients from `rule`; `lambda` must be generated.
    pub fn from_rule(lambda: ExponentSequence, rule: CoefficientRule) -> Result<Self> {
        let s = MuntzSeries { lambda, coeffs: Vec::new(), rule: Some(rule), rule_tag: None };
        s.validate()?;
        Ok(s)
    }

    pub fn from_tag(lambda: ExponentSequence, tag: &str) -> Result<Self> {
        let mut s = Self::from_rule(lambda, CoefficientRule::from_tag(tag)?)?;
        s.rule_tag = Some(tag.to_string());
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.rule {
            None => {
                if self.coeffs.len() > self.lambda.len() {
                    return Err(MuntzError::Input(format!(
                        "{} coefficients for {} exponents",
                        self.coeffs.len(),
                        self.lambda.len()
                    )));
                }
            }
            Some(rule) => {
                if !self.lambda.is_generated() {
                    return Err(MuntzError::Parameter(
                        "a coefficient rule needs a generated exponent sequence".into(),
                    ));
                }
                if let Some(tag) = &self.rule_tag {
                    if &CoefficientRule::from_tag(tag)? != rule {
                        return Err(MuntzError::Input(format!("rule tag '{tag}' does not match the rule")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.rule.is_none()
    }

    /// Working precision of the stored coefficients.
    pub fn precision(&self) -> u32 {
        self.coeffs.iter().map(CFloat::prec).max().unwrap_or(DEFAULT_PRECISION_BITS)
    }

    /// `c_n` (1-based); zero past the stored prefix of a finite series.
    pub fn coefficient(&self, n: usize, prec: u32) -> CFloat {
        match &self.rule {
            Some(rule) => CFloat::real(rule.coefficient(n, prec)),
            None => match self.coeffs.get(n.wrapping_sub(1)) {
                Some(c) => c.with_prec(prec),
                None => CFloat::zero(prec),
            },
        }
    }

    /// `(λ_n, c_n)` for every stored term of a finite series.
    pub fn terms(&self) -> Result<Vec<(f64, CFloat)>> {
        if !self.is_finite() {
            return Err(MuntzError::Parameter("operation needs a finite series".into()));
        }
        Ok(self.lambda.values().iter().copied().zip(self.coeffs.iter().cloned()).collect())
    }

    /// The finite series made of the first `k` terms.
    pub fn prefix(&self, k: usize, prec: u32) -> Result<MuntzSeries> {
        let k = if self.is_finite() { k.min(self.coeffs.len()).max(1) } else { k };
        let lambda = self.lambda.truncated(k)?;
        let coeffs = (1..=k).map(|n| self.coefficient(n, prec)).collect();
        MuntzSeries::finite(lambda, coeffs)
    }
}

/// A point of `𝔻* = 𝔻 \ (-1, 0]`, or the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct SlitDiskPoint {
    pub z: CFloat,
}

impl SlitDiskPoint {
    pub fn new(z: CFloat) -> Result<Self> {
        if z.is_zero() {
            return Ok(SlitDiskPoint { z });
        }
        if z.abs() >= 1u32 {
            return Err(MuntzError::Domain(format!("|z| >= 1 at z = {z}")));
        }
        if z.im.is_zero() && z.re.is_sign_negative() {
            return Err(MuntzError::Domain(format!("z = {z} lies on the slit (-1, 0]")));
        }
        Ok(SlitDiskPoint { z })
    }

    pub fn is_origin(&self) -> bool {
        self.z.is_zero()
    }
}

/// Principal branch `z^λ = exp(λ (ln|z| + i arg z))` from precomputed `ln|z|`, `arg z`.
fn principal_power(ln_r: &Float, theta: &Float, lambda: f64) -> CFloat {
    let p = ln_r.prec();
    let mag = Float::with_val(p, ln_r * lambda).exp();
    let ang = Float::with_val(p, theta * lambda);
    CFloat::from_polar(&mag, &ang)
}

/// `f(z)` on the slit disk, summing until the tail bound drops below `tol`.
pub fn evaluate(f: &MuntzSeries, z: &SlitDiskPoint, tol: f64) -> Result<CFloat> {
    if !(tol > 0.0) {
        return Err(MuntzError::Parameter("tolerance must be positive".into()));
    }
    let prec = z.z.prec();
    if z.is_origin() {
        return Ok(CFloat::zero(prec));
    }
    let ln_r = z.z.abs().ln();
    let theta = Float::with_val(prec, z.z.im.atan2_ref(&z.z.re));
    let mut sum = CFloat::zero(prec);
    let Some(rule) = &f.rule else {
        for (lam, c) in f.terms()? {
            if !c.is_zero() {
                sum = sum.add(&c.mul(&principal_power(&ln_r, &theta, lam)));
            }
        }
        return Ok(sum);
    };
    let ln_r64 = ln_r.to_f64();
    for n in 1..=MAX_EVAL_TERMS {
        let lam = f.lambda.value_at(n)?;
        let c = CFloat::real(rule.coefficient(n, prec));
        sum = sum.add(&c.mul(&principal_power(&ln_r, &theta, lam)));

        let next = f.lambda.value_at(n + 1)?;
        let lead = rule.coefficient_f64(n + 1).abs() * (next * ln_r64).exp();
        let gap = f
            .lambda
            .tail_gap_bound(n + 1)
            .ok_or_else(|| MuntzError::Convergence("no gap bound for the exponent tail".into()))?;
        let q = rule.abs_ratio_bound(n + 1) * (gap * ln_r64).exp();
        if q < 1.0 && lead / (1.0 - q) < tol {
            return Ok(sum);
        }
    }
    Err(MuntzError::Convergence(format!(
        "tail bound above {tol:e} after {MAX_EVAL_TERMS} terms"
    )))
}

/// `f(t)` for real `t ∈ [0, 1]` and a finite series.
pub fn evaluate_real(terms: &[(f64, CFloat)], t: &Float) -> CFloat {
    let mut s = CFloat::zero(t.prec());
    for (lam, c) in terms {
        s.add_scaled(c, &pow_real(t, *lam));
    }
    s
}

/// `Σ_{j,k} Re(c_j c̄_k) / (μ_j + μ_k + 1)` over `(μ, c)` pairs.
pub fn quadratic_form(terms: &[(f64, CFloat)], prec: u32) -> Float {
    quadratic_rows(terms, prec)
        .into_iter()
        .fold(Float::new(prec), |acc, r| acc + r)
}

/// Row `j` holds the lower-triangle contribution `|c_j|² w_jj + 2 Σ_{k<j} …`,
/// so prefix sums of rows give the forms of every prefix.
fn quadratic_rows(terms: &[(f64, CFloat)], prec: u32) -> Vec<Float> {
    let lam: Vec<Float> = terms.iter().map(|(l, _)| Float::with_val(prec, *l)).collect();
    (0..terms.len())
        .into_par_iter()
        .map(|j| {
            let mut s = Float::new(prec);
            let cj = &terms[j].1;
            if cj.is_zero() {
                return s;
            }
            for k in 0..=j {
                let ck = &terms[k].1;
                if ck.is_zero() {
                    continue;
                }
                let w = Float::with_val(prec, &lam[j] + &lam[k]) + 1u32;
                let mut t = Float::with_val(prec, cj.re_mul_conj(ck)) / w;
                if k < j {
                    t *= 2u32;
                }
                s += t;
            }
            s
        })
        .collect()
}

/// `‖f‖_{L²(0,1)}` for a finite series.
pub fn l2_norm(f: &MuntzSeries) -> Result<Float> {
    let terms = f.terms()?;
    let q = quadratic_form(&terms, f.precision());
    Ok(q.max(&Float::new(f.precision())).sqrt())
}

/// Analytic `⟨f, g⟩ = Σ c_j d̄_k / (μ_j + ν_k + 1)` for finite series.
pub fn inner_product(f: &MuntzSeries, g: &MuntzSeries) -> Result<CFloat> {
    let prec = f.precision().max(g.precision());
    let mut s = CFloat::zero(prec);
    for (mu, c) in f.terms()? {
        for (nu, d) in g.terms()? {
            let w = Float::with_val(prec, 1) / (Float::with_val(prec, mu) + nu + 1u32);
            s.add_scaled(&c.mul(&d.conj()), &w);
        }
    }
    Ok(s)
}

/// A function on (0, 1) known only through point evaluations.
#[derive(Clone)]
pub struct BlackBox {
    label: String,
    f: Arc<dyn Fn(&Float) -> CFloat + Send + Sync>,
}

impl BlackBox {
    pub fn new(label: impl Into<String>, f: impl Fn(&Float) -> CFloat + Send + Sync + 'static) -> Self {
        BlackBox { label: label.into(), f: Arc::new(f) }
    }

    pub fn monomial(mu: f64) -> Self {
        BlackBox::new(format!("t^{mu}"), move |t| CFloat::real(pow_real(t, mu)))
    }

    /// Point evaluation of a finite series, hiding its coefficients.
    pub fn from_series(f: &MuntzSeries) -> Result<Self> {
        let terms = f.terms()?;
        Ok(BlackBox::new("series", move |t| evaluate_real(&terms, t)))
    }

    pub fn call(&self, t: &Float) -> CFloat {
        (self.f)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlackBox({})", self.label)
    }
}

#[derive(Clone, Debug)]
pub enum Function {
    Series(MuntzSeries),
    BlackBox(BlackBox),
}

impl From<MuntzSeries> for Function {
    fn from(s: MuntzSeries) -> Self {
        Function::Series(s)
    }
}

impl From<BlackBox> for Function {
    fn from(b: BlackBox) -> Self {
        Function::BlackBox(b)
    }
}

/// `∫₀¹ f(t) conj(g(t)) dt` by adaptive quadrature; returns the value and the
/// error estimate.
pub fn quadrature_inner_product(f: &BlackBox, g: &MuntzSeries, quad: &QuadratureSpec, prec: u32) -> Result<(CFloat, f64)> {
    let terms = g.terms()?;
    let r = integrate_vec(
        &|t| vec![f.call(t).mul(&evaluate_real(&terms, t).conj())],
        1,
        quad,
        prec,
    )?;
    Ok((r.values.into_iter().next().unwrap(), r.error))
}

/// The dual element `r_n^(N)` as a finite series on `Λ_N`.
pub fn dual_series(family: &BiorthogonalFamily, n: usize) -> Result<MuntzSeries> {
    let c = family.dual_coefficients(n)?.into_iter().map(CFloat::real).collect();
    MuntzSeries::finite(family.lambda.clone(), c)
}

#[derive(Clone, Debug, PartialEq)]
struct CRational {
    re: Rational,
    im: Rational,
}

impl CRational {
    fn from_cfloat(c: &CFloat) -> Self {
        CRational { re: to_rational(&c.re), im: to_rational(&c.im) }
    }

    fn to_cfloat(&self, prec: u32) -> CFloat {
        CFloat::new(Float::with_val(prec, &self.re), Float::with_val(prec, &self.im))
    }
}

fn rational(x: f64) -> Rational {
    Rational::from_f64(x).unwrap_or_default()
}

fn exact_terms(f: &MuntzSeries) -> Result<Vec<(Rational, CRational)>> {
    Ok(f.terms()?
        .iter()
        .map(|(mu, c)| (rational(*mu), CRational::from_cfloat(c)))
        .collect())
}

/// Exact `⟨f, e_k⟩ = Σ_j c_j / (μ_j + λ_k + 1)`.
fn exact_moments(terms: &[(Rational, CRational)], lambda: &[f64]) -> Vec<CRational> {
    lambda
        .iter()
        .map(|&l| {
            let l = rational(l);
            let mut re = Rational::new();
            let mut im = Rational::new();
            for (mu, c) in terms {
                let d = Rational::from(mu + &l) + 1u32;
                re += Rational::from(&c.re / &d);
                im += Rational::from(&c.im / &d);
            }
            CRational { re, im }
        })
        .collect()
}

fn exact_quadratic(terms: &[(Rational, CRational)]) -> Rational {
    let mut s = Rational::new();
    for (mj, cj) in terms {
        for (mk, ck) in terms {
            let num = Rational::from(&cj.re * &ck.re) + Rational::from(&cj.im * &ck.im);
            let d = Rational::from(mj + mk) + 1u32;
            s += num / d;
        }
    }
    s
}

/// `a = G⁻¹ b` with the exact inverse.
fn exact_apply_inverse(inv: &[Vec<Rational>], b: &[CRational]) -> Vec<CRational> {
    (0..b.len())
        .map(|n| {
            let mut re = Rational::new();
            let mut im = Rational::new();
            for (k, bk) in b.iter().enumerate() {
                re += Rational::from(&inv[k][n] * &bk.re);
                im += Rational::from(&inv[k][n] * &bk.im);
            }
            CRational { re, im }
        })
        .collect()
}

/// Moments `⟨f, e_k⟩` by quadrature, plus `‖f‖²` in the last slot, and the
/// quadrature error estimate.
pub fn quadrature_moments(f: &BlackBox, lambda: &[f64], quad: &QuadratureSpec, prec: u32) -> Result<(Vec<CFloat>, f64)> {
    let dim = lambda.len() + 1;
    let r = integrate_vec(
        &|t| {
            let v = f.call(t);
            let mut out: Vec<CFloat> = lambda.iter().map(|&l| v.scale(&pow_real(t, l))).collect();
            out.push(CFloat::real(v.norm_sqr()));
            out
        },
        dim,
        quad,
        prec,
    )?;
    Ok((r.values, r.error))
}

fn apply_inverse(family: &BiorthogonalFamily, b: &[CFloat]) -> Vec<CFloat> {
    let prec = family.precision_bits();
    (0..b.len())
        .map(|n| {
            let mut s = CFloat::zero(prec);
            for (k, bk) in b.iter().enumerate() {
                s.add_scaled(bk, family.coeffs.get(k, n));
            }
            s
        })
        .collect()
}

/// Recovered `⟨f, r_n^(N)⟩` for every `n ≤ N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Recovery {
    pub coefficients: Vec<CFloat>,
    /// True when computed in exact rational arithmetic.
    pub exact: bool,
    /// Bound on the propagated quadrature error, `max_n Σ_k |(G⁻¹)_kn| · err`.
    pub error_bound: f64,
}

fn amplification(family: &BiorthogonalFamily) -> f64 {
    let n = family.truncation();
    (0..n)
        .map(|col| (0..n).map(|k| family.coeffs.get(k, col).to_f64().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn recover_coefficients(f: &Function, family: &BiorthogonalFamily, quad: &QuadratureSpec) -> Result<Recovery> {
    let prec = family.precision_bits();
    match f {
        Function::Series(s) => {
            if !s.is_finite() {
                return Err(MuntzError::Parameter(
                    "coefficient recovery needs a finite series; take a prefix first".into(),
                ));
            }
            let terms = exact_terms(s)?;
            let b = exact_moments(&terms, family.lambda.values());
            let a = exact_apply_inverse(family.exact_inverse()?, &b);
            Ok(Recovery {
                coefficients: a.iter().map(|c| c.to_cfloat(prec)).collect(),
                exact: true,
                error_bound: 0.0,
            })
        }
        Function::BlackBox(bb) => {
            let (mut b, err) = quadrature_moments(bb, family.lambda.values(), quad, prec)?;
            b.pop();
            Ok(Recovery {
                coefficients: apply_inverse(family, &b),
                exact: false,
                error_bound: err * amplification(family),
            })
        }
    }
}

/// `⟨f, r_n^(N)⟩` for a single 1-based `n`.
pub fn coefficient_recover(f: &Function, family: &BiorthogonalFamily, n: usize, quad: &QuadratureSpec) -> Result<CFloat> {
    family.check_index(n)?;
    let mut r = recover_coefficients(f, family, quad)?;
    Ok(r.coefficients.swap_remove(n - 1))
}

/// The associated series `f* = Σ ⟨f, r_n⟩ t^{λ_n}` together with the Gram
/// least-squares solution it must agree with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Projection {
    pub series: MuntzSeries,
    /// Solution of `G a = b`, `b_n = ⟨f, e_n⟩`, by Cholesky.
    pub gram_solution: Vec<CFloat>,
    /// `max_n |⟨f, r_n⟩ - a_n| / max_n |a_n|`.
    #[serde(with = "serde_float")]
    pub consistency: Float,
    /// `‖f - f*‖`.
    #[serde(with = "serde_float")]
    pub residual: Float,
    pub exact: bool,
    pub error_bound: f64,
}

pub fn project(f: &Function, family: &BiorthogonalFamily, quad: &QuadratureSpec) -> Result<Projection> {
    let prec = family.precision_bits();
    let lambda = family.lambda.values();
    let (b, coeffs, residual_sq, exact, error_bound) = match f {
        Function::Series(s) => {
            if !s.is_finite() {
                return Err(MuntzError::Parameter("projection needs a finite series; take a prefix first".into()));
            }
            let terms = exact_terms(s)?;
            let b = exact_moments(&terms, lambda);
            let a = exact_apply_inverse(family.exact_inverse()?, &b);
            // ‖f - f*‖² = ‖f‖² - Re Σ ā_n b_n for the orthogonal projection.
            let mut r2 = exact_quadratic(&terms);
            for (an, bn) in a.iter().zip(&b) {
                r2 -= Rational::from(&an.re * &bn.re) + Rational::from(&an.im * &bn.im);
            }
            (
                b.iter().map(|c| c.to_cfloat(prec)).collect::<Vec<_>>(),
                a.iter().map(|c| c.to_cfloat(prec)).collect::<Vec<_>>(),
                Float::with_val(prec, &r2),
                true,
                0.0,
            )
        }
        Function::BlackBox(bb) => {
            let (mut b, err) = quadrature_moments(bb, lambda, quad, prec)?;
            let norm_sq = b.pop().unwrap().re;
            let a = apply_inverse(family, &b);
            let mut r2 = norm_sq;
            for (an, bn) in a.iter().zip(&b) {
                r2 -= bn.re_mul_conj(an);
            }
            (b, a, r2, false, err * amplification(family))
        }
    };

    let l = family.cholesky()?;
    let re: Vec<Float> = b.iter().map(|c| c.re.clone()).collect();
    let im: Vec<Float> = b.iter().map(|c| c.im.clone()).collect();
    let gram_solution: Vec<CFloat> = cholesky_solve(l, &re)
        .into_iter()
        .zip(cholesky_solve(l, &im))
        .map(|(r, i)| CFloat::new(r, i))
        .collect();
    let scale = gram_solution
        .iter()
        .map(CFloat::abs)
        .fold(Float::new(prec), |m, x| m.max(&x));
    let diff = coeffs
        .iter()
        .zip(&gram_solution)
        .map(|(x, y)| x.sub(y).abs())
        .fold(Float::new(prec), |m, x| m.max(&x));
    let consistency = if scale.is_zero() { diff } else { diff / scale };
    let residual = residual_sq.max(&Float::new(prec)).sqrt();

    Ok(Projection {
        series: MuntzSeries::finite(family.lambda.clone(), coeffs)?,
        gram_solution,
        consistency,
        residual,
        exact,
        error_bound,
    })
}

/// Partial sums of the L² quadratic form of a series at dyadic checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFormEvidence {
    pub checkpoints: Vec<usize>,
    #[serde(with = "serde_float_vec")]
    pub partial_sums: Vec<Float>,
    /// `|Q(K_{i+1}) - Q(K_i)| / |Q(K_i) - Q(K_{i-1})|`.
    pub increment_ratios: Vec<f64>,
    pub bounded_cauchy: bool,
    /// Last partial sum plus the geometric tail implied by the worst ratio.
    pub extrapolated_limit: f64,
}

/// Evidence that `‖f_K‖²` stays bounded and Cauchy as `K` grows to `budget`.
pub fn quadratic_form_evidence(f: &MuntzSeries, budget: usize, prec: u32) -> Result<QuadraticFormEvidence> {
    if budget == 0 {
        return Err(MuntzError::Parameter("term budget must be positive".into()));
    }
    let prefix = f.prefix(budget, prec)?;
    let terms = prefix.terms()?;
    let k = terms.len();
    let mut checkpoints: Vec<usize> = [k / 8, k / 4, k / 2, k].into_iter().filter(|&c| c >= 1).collect();
    checkpoints.dedup();
    let rows = quadratic_rows(&terms, prec);
    let mut partial_sums = Vec::with_capacity(checkpoints.len());
    let mut acc = Float::new(prec);
    let mut done = 0;
    for &c in &checkpoints {
        for r in &rows[done..c] {
            acc += r;
        }
        done = c;
        partial_sums.push(acc.clone());
    }
    let incs: Vec<f64> = partial_sums
        .windows(2)
        .map(|w| Float::with_val(prec, &w[1] - &w[0]).abs().to_f64())
        .collect();
    let increment_ratios: Vec<f64> = incs
        .windows(2)
        .map(|w| if w[0] == 0.0 { if w[1] == 0.0 { 0.0 } else { f64::INFINITY } } else { w[1] / w[0] })
        .collect();
    let worst = increment_ratios.iter().copied().fold(0.0, f64::max);
    let bounded_cauchy = if f.is_finite() {
        true
    } else {
        !increment_ratios.is_empty() && worst <= BOUNDED_CAUCHY_RATIO
    };
    let last = partial_sums.last().map(Float::to_f64).unwrap_or(0.0);
    let last_inc = incs.last().copied().unwrap_or(0.0);
    let extrapolated_limit = if f.is_finite() {
        last
    } else if worst < 1.0 {
        last + last_inc * worst / (1.0 - worst)
    } else {
        f64::INFINITY
    };
    Ok(QuadraticFormEvidence {
        checkpoints,
        partial_sums,
        increment_ratios,
        bounded_cauchy,
        extrapolated_limit,
    })
}

/// Result of approximating `f` by a dilated, truncated Müntz polynomial.
#[derive(Clone, Debug, Serialize)]
pub struct SpanApproximation {
    pub rho: f64,
    #[serde(rename = "N")]
    pub terms: usize,
    pub polynomial: MuntzSeries,
    /// `‖f_K - f_K(ρ ·)‖` from the bisection.
    pub dilation_error: f64,
    /// `‖f_K - Σ_{n≤N} c_n ρ^{λ_n} t^{λ_n}‖` at working precision.
    #[serde(with = "serde_float")]
    pub certified_error: Float,
    /// Number of terms `K` of `f` the certificate refers to.
    pub prefix_terms: usize,
}

/// `‖Σ c_n (1 - ρ^{λ_n}) t^{λ_n}‖` in double precision.
fn dilation_error_f64(lam: &[f64], c: &[(f64, f64)], rho: f64) -> f64 {
    let ln_rho = rho.ln();
    let d: Vec<(f64, f64)> = lam
        .iter()
        .zip(c)
        .map(|(&l, &(re, im))| {
            let w = -(l * ln_rho).exp_m1();
            (re * w, im * w)
        })
        .collect();
    let q: f64 = (0..lam.len())
        .into_par_iter()
        .map(|j| {
            let mut s = 0.0;
            for k in 0..=j {
                let t = (d[j].0 * d[k].0 + d[j].1 * d[k].1) / (lam[j] + lam[k] + 1.0);
                s += if k < j { 2.0 * t } else { t };
            }
            s
        })
        .sum();
    q.max(0.0).sqrt()
}

/// Find `ρ` with dilation error in `[ε/2, ε]`, then `N` with truncation error
/// below `ε/2`, and certify the combined error below `2ε`. Works on the first
/// `budget` terms of a rule series; a finite series is returned as is.
pub fn approximate_in_span(f: &MuntzSeries, eps: f64, budget: usize, prec: u32) -> Result<SpanApproximation> {
    if !(eps > 0.0) {
        return Err(MuntzError::Parameter("epsilon must be positive".into()));
    }
    if f.is_finite() {
        return Ok(SpanApproximation {
            rho: 1.0,
            terms: f.coeffs.len(),
            polynomial: f.clone(),
            dilation_error: 0.0,
            certified_error: Float::new(prec),
            prefix_terms: f.coeffs.len(),
        });
    }
    let evidence = quadratic_form_evidence(f, budget, prec)?;
    if !evidence.bounded_cauchy {
        return Err(MuntzError::NonMember(format!(
            "quadratic-form increments do not contract (ratios {:?})",
            evidence.increment_ratios
        )));
    }
    let prefix = f.prefix(budget, prec)?;
    let terms = prefix.terms()?;
    let lam: Vec<f64> = terms.iter().map(|(l, _)| *l).collect();
    let c64: Vec<(f64, f64)> = terms.iter().map(|(_, c)| c.to_f64_pair()).collect();

    // s = -ln(1 - ρ); the dilation error decreases in s.
    let rho_of = |s: f64| -(-s).exp_m1();
    let err_at = |s: f64| dilation_error_f64(&lam, &c64, rho_of(s));
    let mut lo = std::f64::consts::LN_2;
    let mut hi = -RHO_CEILING_GAP.ln();
    let mut s = lo;
    let mut e = err_at(lo);
    if e > eps {
        let e_hi = err_at(hi);
        if e_hi > eps {
            return Err(MuntzError::NonMember(format!(
                "dilation error {e_hi:e} above {eps:e} at rho = 1 - {RHO_CEILING_GAP:e}"
            )));
        }
        s = hi;
        e = e_hi;
        for _ in 0..200 {
            if e >= eps / 2.0 && e <= eps {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let em = err_at(mid);
            if em > eps {
                lo = mid;
            } else {
                hi = mid;
                s = mid;
                e = em;
            }
        }
    }
    let rho = rho_of(s);

    // Smallest N whose dilated tail bound Σ_{n>N} |c_n| ρ^{λ_n} / √(2λ_n+1) is below ε/2.
    let bounds: Vec<f64> = lam
        .iter()
        .zip(&c64)
        .map(|(&l, &(re, im))| re.hypot(im) * (l * rho.ln()).exp() / (2.0 * l + 1.0).sqrt())
        .collect();
    let mut tail = 0.0;
    let mut n_terms = lam.len();
    for (i, b) in bounds.iter().enumerate().rev() {
        if tail + b >= eps / 2.0 {
            break;
        }
        tail += b;
        n_terms = i;
    }
    let n_terms = n_terms.max(1);

    let rho_f = Float::with_val(prec, rho);
    let mut poly = Vec::with_capacity(n_terms);
    let mut diff = Vec::with_capacity(terms.len());
    for (i, (l, c)) in terms.iter().enumerate() {
        if i < n_terms {
            let w = pow_real(&rho_f, *l);
            let pc = c.scale(&w);
            diff.push((*l, c.sub(&pc)));
            poly.push(pc);
        } else {
            diff.push((*l, c.clone()));
        }
    }
    let certified_error = quadratic_form(&diff, prec).max(&Float::new(prec)).sqrt();
    if certified_error >= 2.0 * eps {
        return Err(MuntzError::Convergence(format!(
            "certified error {} not below 2ε",
            certified_error.to_f64()
        )));
    }
    Ok(SpanApproximation {
        rho,
        terms: n_terms,
        polynomial: MuntzSeries::finite(f.lambda.truncated(n_terms)?, poly)?,
        dilation_error: e,
        certified_error,
        prefix_terms: terms.len(),
    })
}
