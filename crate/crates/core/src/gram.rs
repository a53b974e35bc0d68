//! Gram matrix of `{t^λ_n}` in L²(0,1), its Cauchy closed forms, and the
//! distances `D_n` from each monomial to the span of the others.
//!
//! With nodes `x_i = λ_i + 1/2` the Gram matrix is the Cauchy matrix
//! `1/(x_i + x_j)`, so determinant, inverse and distances all have product
//! formulas. Products are accumulated as sums of logarithms with explicit
//! sign tracking.

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::linalg::Matrix;
use crate::numeric::{check_precision, scaled_tolerance, serde_float, serde_float_opt};

/// Gram matrix `G_jk = 1/(λ_j + λ_k + 1)` at a fixed working precision.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub lambda: ExponentSequence,
    pub entries: Matrix,
    pub precision_bits: u32,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Cauchy nodes `λ_i + 1/2`.
    pub fn nodes(&self) -> Vec<Float> {
        cauchy_nodes(&self.lambda, self.precision_bits)
    }
}

fn cauchy_nodes(lambda: &ExponentSequence, prec: u32) -> Vec<Float> {
    lambda
        .values()
        .iter()
        .map(|&l| Float::with_val(prec, l) + 0.5f64)
        .collect()
}

pub fn gram_matrix(lambda: &ExponentSequence, precision_bits: u32) -> Result<GramMatrix> {
    check_precision(precision_bits)?;
    if lambda.is_empty() {
        return Err(MuntzError::Input("empty exponent sequence".into()));
    }
    let p = precision_bits;
    let v = lambda.values();
    let entries = Matrix::from_fn(v.len(), v.len(), p, |j, k| {
        let denom = Float::with_val(p, v[j]) + v[k] + 1u32;
        Float::with_val(p, 1) / denom
    });
    Ok(GramMatrix {
        lambda: lambda.clone(),
        entries,
        precision_bits,
    })
}

fn check_distinct(nodes: &[Float]) -> Result<()> {
    for i in 0..nodes.len() {
        for k in i + 1..nodes.len() {
            if nodes[i] == nodes[k] {
                return Err(MuntzError::Degenerate(format!(
                    "duplicate Cauchy nodes at positions {} and {}",
                    i + 1,
                    k + 1
                )));
            }
        }
    }
    Ok(())
}

/// `∏_{j<k}(x_j-x_k)² / ∏_{j,k}(x_j+x_k)` evaluated through logarithms.
pub fn cauchy_determinant(g: &GramMatrix) -> Result<Float> {
    let p = g.precision_bits;
    let x = g.nodes();
    check_distinct(&x)?;
    let n = x.len();
    let mut log_det = Float::new(p);
    for j in 0..n {
        for k in 0..n {
            let s = Float::with_val(p, &x[j] + &x[k]);
            log_det -= s.ln();
            if j < k {
                let d = Float::with_val(p, &x[j] - &x[k]).abs();
                log_det += d.ln() * 2u32;
            }
        }
    }
    Ok(log_det.exp())
}

/// Signed log-magnitude accumulator.
struct LogProduct {
    log: Float,
    negative: bool,
}

impl LogProduct {
    fn new(prec: u32) -> Self {
        LogProduct {
            log: Float::new(prec),
            negative: false,
        }
    }

    fn mul(&mut self, x: Float) {
        self.negative ^= x.is_sign_negative();
        self.log += x.abs().ln();
    }

    fn div(&mut self, x: Float) {
        self.negative ^= x.is_sign_negative();
        self.log -= x.abs().ln();
    }

    fn value(&self) -> Float {
        let v = self.log.clone().exp();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

/// `A_i = ∏_k (x_i+x_k) / ∏_{k≠i} (x_i-x_k)`.
fn cauchy_weights(x: &[Float], prec: u32) -> Vec<Float> {
    (0..x.len())
        .map(|i| {
            let mut acc = LogProduct::new(prec);
            for k in 0..x.len() {
                acc.mul(Float::with_val(prec, &x[i] + &x[k]));
                if k != i {
                    acc.div(Float::with_val(prec, &x[i] - &x[k]));
                }
            }
            acc.value()
        })
        .collect()
}

/// Closed-form inverse together with its measured residual `max|G·M - I|`.
#[derive(Clone, Debug)]
pub struct CauchyInverse {
    pub matrix: Matrix,
    pub residual: Float,
    pub tolerance: f64,
    pub precision_bits: u32,
}

/// Residual tolerance for a given working precision: `10^(-bits/8)`.
pub fn inverse_tolerance(bits: u32) -> f64 {
    scaled_tolerance(bits, 8)
}

/// `(G⁻¹)_ij = A_i A_j / (x_i + x_j)`; fails when the residual shows the
/// working precision is exhausted.
pub fn cauchy_inverse(g: &GramMatrix) -> Result<CauchyInverse> {
    let p = g.precision_bits;
    let x = g.nodes();
    check_distinct(&x)?;
    let a = cauchy_weights(&x, p);
    let n = x.len();
    let matrix = Matrix::from_fn(n, n, p, |i, j| {
        let num = Float::with_val(p, &a[i] * &a[j]);
        num / Float::with_val(p, &x[i] + &x[j])
    });
    let residual = g.entries.mul(&matrix).identity_residual();
    let tolerance = inverse_tolerance(p);
    if !(residual < tolerance) {
        return Err(MuntzError::PrecisionInsufficient {
            bits: p,
            residual: residual.to_f64(),
            tolerance,
        });
    }
    Ok(CauchyInverse {
        matrix,
        residual,
        tolerance,
        precision_bits: p,
    })
}

/// Doubling precision from `bits` until the inverse residual is acceptable.
pub fn cauchy_inverse_auto(lambda: &ExponentSequence, bits: u32, max_bits: u32) -> Result<(GramMatrix, CauchyInverse)> {
    let mut b = bits;
    loop {
        let g = gram_matrix(lambda, b)?;
        match cauchy_inverse(&g) {
            Ok(inv) => return Ok((g, inv)),
            Err(e) if e.is_precision() && b * 2 <= max_bits => b *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// Exact rational Cauchy inverse; every finite `f64` exponent is a dyadic rational.
pub fn exact_cauchy_inverse(lambda: &ExponentSequence) -> Result<Vec<Vec<Rational>>> {
    let half = Rational::from((1, 2));
    let x: Vec<Rational> = lambda
        .values()
        .iter()
        .map(|&l| {
            Rational::from_f64(l)
                .map(|r| r + &half)
                .ok_or_else(|| MuntzError::Input(format!("non-finite exponent {l}")))
        })
        .collect::<Result<_>>()?;
    let n = x.len();
    for i in 0..n {
        for k in i + 1..n {
            if x[i] == x[k] {
                return Err(MuntzError::Degenerate(format!(
                    "duplicate Cauchy nodes at positions {} and {}",
                    i + 1,
                    k + 1
                )));
            }
        }
    }
    let a: Vec<Rational> = (0..n)
        .map(|i| {
            let mut num = Rational::from(1);
            let mut den = Rational::from(1);
            for k in 0..n {
                num *= Rational::from(&x[i] + &x[k]);
                if k != i {
                    den *= Rational::from(&x[i] - &x[k]);
                }
            }
            num / den
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| Rational::from(&a[i] * &a[j]) / Rational::from(&x[i] + &x[j]))
                .collect()
        })
        .collect())
}

/// Distance from `t^λ_n` to the span of the other monomials of a truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub truncation: usize,
    #[serde(with = "serde_float")]
    pub distance: Float,
    #[serde(with = "serde_float")]
    pub dual_norm: Float,
    /// `|distance · dual_norm - 1|`.
    #[serde(with = "serde_float")]
    pub duality_defect: Float,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, with = "serde_float_opt", skip_serializing_if = "Option::is_none")]
    pub m_fit: Option<Float>,
}

/// `D_n = (2λ_n+1)^{-1/2} ∏_{k≠n} |λ_n-λ_k|/(λ_n+λ_k+1)`, log-space.
pub fn distance_product(lambda: &ExponentSequence, n: usize, prec: u32) -> Result<Float> {
    let v = lambda.values();
    if n == 0 || n > v.len() {
        return Err(MuntzError::IndexOutOfRange { index: n, len: v.len() });
    }
    let ln = Float::with_val(prec, v[n - 1]);
    let mut log = -(Float::with_val(prec, &ln * 2u32) + 1u32).ln() / 2u32;
    for (k, &lk) in v.iter().enumerate() {
        if k == n - 1 {
            continue;
        }
        let diff = Float::with_val(prec, &ln - lk).abs();
        if diff.is_zero() {
            return Err(MuntzError::Degenerate(format!("λ_{n} repeated at {}", k + 1)));
        }
        log += diff.ln();
        log -= (Float::with_val(prec, &ln + lk) + 1u32).ln();
    }
    Ok(log.exp())
}

fn report_from(inv: &CauchyInverse, lambda: &ExponentSequence, n: usize) -> Result<DistanceReport> {
    let p = inv.precision_bits;
    let distance = distance_product(lambda, n, p)?;
    let dual_norm = Float::with_val(p, inv.matrix.get(n - 1, n - 1)).sqrt();
    let duality_defect = (Float::with_val(p, &distance * &dual_norm) - 1u32).abs();
    Ok(DistanceReport {
        n,
        truncation: lambda.len(),
        distance,
        dual_norm,
        duality_defect,
        epsilon: None,
        m_fit: None,
    })
}

/// Distance report for one index of the truncation `Λ_N`.
pub fn distance(lambda: &ExponentSequence, n: usize, truncation: usize, precision_bits: u32) -> Result<DistanceReport> {
    if n == 0 || n > truncation {
        return Err(MuntzError::IndexOutOfRange { index: n, len: truncation });
    }
    let lam = lambda.truncated(truncation)?;
    let g = gram_matrix(&lam, precision_bits)?;
    let inv = cauchy_inverse(&g)?;
    report_from(&inv, &lam, n)
}

/// Reports for every `n ≤ N`, sharing one inverse.
pub fn distances(lambda: &ExponentSequence, truncation: usize, precision_bits: u32) -> Result<Vec<DistanceReport>> {
    let lam = lambda.truncated(truncation)?;
    let g = gram_matrix(&lam, precision_bits)?;
    let inv = cauchy_inverse(&g)?;
    (1..=truncation).map(|n| report_from(&inv, &lam, n)).collect()
}

/// Fitted constant of the lower bound `D_n ≥ m (1-ε)^{λ_n}` for all `n ≤ N`,
/// together with its value along every smaller truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub epsilon: f64,
    pub reports: Vec<DistanceReport>,
    #[serde(with = "serde_float")]
    pub m_fit: Float,
    /// `(N', m_fit at N')` for `N' = 1..=N`.
    pub trend: Vec<(usize, String)>,
    pub pass: bool,
}

fn fit_lower_constant(reports: &[DistanceReport], lambda: &ExponentSequence, epsilon: f64, prec: u32) -> Float {
    let base = Float::with_val(prec, 1) - epsilon;
    reports
        .iter()
        .map(|r| {
            let scale = Float::with_val(prec, base.clone().ln() * lambda.values()[r.n - 1]).exp();
            Float::with_val(prec, &r.distance / &scale)
        })
        .reduce(|a, b| if b < a { b } else { a })
        .unwrap_or_else(|| Float::new(prec))
}

pub fn distance_lower_bound_check(
    lambda: &ExponentSequence,
    truncation: usize,
    epsilon: f64,
    precision_bits: u32,
) -> Result<LowerBoundReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MuntzError::Parameter(format!("ε must lie in (0,1), got {epsilon}")));
    }
    let lam = lambda.truncated(truncation)?;
    let mut trend = Vec::with_capacity(truncation);
    for k in 1..truncation {
        let sub = lam.truncated(k)?;
        let reps = distances(&sub, k, precision_bits)?;
        let m = fit_lower_constant(&reps, &sub, epsilon, precision_bits);
        trend.push((k, crate::numeric::to_decimal(&m)));
    }
    let mut reports = distances(&lam, truncation, precision_bits)?;
    let m_fit = fit_lower_constant(&reports, &lam, epsilon, precision_bits);
    trend.push((truncation, crate::numeric::to_decimal(&m_fit)));
    for r in &mut reports {
        r.epsilon = Some(epsilon);
        r.m_fit = Some(m_fit.clone());
    }
    let pass = m_fit > 0;
    Ok(LowerBoundReport {
        epsilon,
        reports,
        m_fit,
        trend,
        pass,
    })
}
