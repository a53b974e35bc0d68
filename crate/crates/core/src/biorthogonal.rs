//! Truncated biorthogonal duals `r_n^(N) = Σ_k (G⁻¹)_kn t^{λ_k}` and their
//! growth and stability diagnostics.

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::gram::{self, CauchyInverse, GramMatrix};
use crate::linalg::Matrix;
use crate::numeric::{serde_float, serde_float_vec, to_decimal};

/// Dual family of a truncation `Λ_N`, immutable once built.
#[derive(Debug)]
pub struct BiorthogonalFamily {
    pub lambda: ExponentSequence,
    pub gram: GramMatrix,
    /// Column `n` holds the monomial coefficients of `r_n`.
    pub coeffs: Matrix,
    pub norms: Vec<Float>,
    /// `D_{n,N} = ‖e_n - φ_n‖`.
    pub projection_deficit: Vec<Float>,
    /// `⟨e_j, r_n⟩` computed from `G · G⁻¹` at working precision.
    pub pairing: Matrix,
    pub biorthogonality_residual: Float,
    pub inverse_residual: Float,
    cholesky: OnceLock<Result<Matrix>>,
    exact: OnceLock<Result<Vec<Vec<Rational>>>>,
}

impl BiorthogonalFamily {
    pub fn truncation(&self) -> usize {
        self.lambda.len()
    }

    pub fn precision_bits(&self) -> u32 {
        self.gram.precision_bits
    }

    /// Coefficients of `r_n` (1-based `n`) in the monomial basis.
    pub fn dual_coefficients(&self, n: usize) -> Result<Vec<Float>> {
        self.check_index(n)?;
        Ok(self.coeffs.column(n - 1))
    }

    pub fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.truncation() {
            Err(MuntzError::IndexOutOfRange { index: n, len: self.truncation() })
        } else {
            Ok(())
        }
    }

    /// Lower Cholesky factor `L` of the Gram matrix, `G = L Lᵀ`.
    pub fn cholesky(&self) -> Result<&Matrix> {
        self.cholesky
            .get_or_init(|| self.gram.entries.cholesky())
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Exact rational `G⁻¹`, built on first use.
    pub fn exact_inverse(&self) -> Result<&Vec<Vec<Rational>>> {
        self.exact
            .get_or_init(|| gram::exact_cauchy_inverse(&self.lambda))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `⟨t^μ, r_n⟩ = Σ_k (G⁻¹)_kn / (μ + λ_k + 1)` for every `n`.
    pub fn monomial_pairings(&self, mu: f64) -> Vec<Float> {
        let p = self.precision_bits();
        let lam = self.lambda.values();
        let weights: Vec<Float> = lam
            .iter()
            .map(|&l| Float::with_val(p, 1) / (Float::with_val(p, mu) + l + 1u32))
            .collect();
        (0..lam.len())
            .map(|n| {
                let mut s = Float::new(p);
                for (k, w) in weights.iter().enumerate() {
                    s += Float::with_val(p, self.coeffs.get(k, n) * w);
                }
                s
            })
            .collect()
    }

    /// Exact `⟨t^μ, r_n⟩` for every `n`.
    pub fn exact_monomial_pairings(&self, mu: f64) -> Result<Vec<Rational>> {
        let inv = self.exact_inverse()?;
        let mu = Rational::from_f64(mu).ok_or_else(|| MuntzError::Input("non-finite exponent".into()))?;
        let lam: Vec<Rational> = self
            .lambda
            .values()
            .iter()
            .map(|&l| Rational::from_f64(l).unwrap_or_default())
            .collect();
        let n = lam.len();
        Ok((0..n)
            .map(|col| {
                let mut s = Rational::new();
                for (k, lk) in lam.iter().enumerate() {
                    let denom = Rational::from(&mu + lk) + 1u32;
                    s += Rational::from(&inv[k][col] / &denom);
                }
                s
            })
            .collect())
    }
}

pub fn dual_family(lambda: &ExponentSequence, truncation: usize, precision_bits: u32) -> Result<BiorthogonalFamily> {
    let lam = lambda.truncated(truncation)?;
    let g = gram::gram_matrix(&lam, precision_bits)?;
    let inv = gram::cauchy_inverse(&g)?;
    Ok(from_inverse(lam, g, inv))
}

/// Like [`dual_family`], doubling precision up to `max_bits` when needed.
pub fn dual_family_auto(lambda: &ExponentSequence, truncation: usize, precision_bits: u32, max_bits: u32) -> Result<BiorthogonalFamily> {
    let lam = lambda.truncated(truncation)?;
    let (g, inv) = gram::cauchy_inverse_auto(&lam, precision_bits, max_bits)?;
    Ok(from_inverse(lam, g, inv))
}

fn from_inverse(lambda: ExponentSequence, gram: GramMatrix, inv: CauchyInverse) -> BiorthogonalFamily {
    let p = gram.precision_bits;
    let n = lambda.len();
    let CauchyInverse { matrix: coeffs, residual: inverse_residual, .. } = inv;
    let pairing = gram.entries.mul(&coeffs);
    let biorthogonality_residual = pairing.identity_residual();
    let norms: Vec<Float> = (0..n).map(|i| Float::with_val(p, coeffs.get(i, i)).sqrt()).collect();
    let projection_deficit = (1..=n)
        .map(|i| gram::distance_product(&lambda, i, p).expect("validated exponents"))
        .collect();
    BiorthogonalFamily {
        lambda,
        gram,
        coeffs,
        norms,
        projection_deficit,
        pairing,
        biorthogonality_residual,
        inverse_residual,
        cholesky: OnceLock::new(),
        exact: OnceLock::new(),
    }
}

/// Growth of `‖r_n‖` against `(1+ε)^{λ_n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormGrowthReport {
    pub epsilon: f64,
    #[serde(with = "serde_float_vec")]
    pub norms: Vec<Float>,
    /// `log‖r_n‖ / λ_n`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `max_n ‖r_n‖ / (1+ε)^{λ_n}`.
    #[serde(with = "serde_float")]
    pub m_fit: Float,
    /// First index from which the ratios never increase again.
    pub nonincreasing_from: usize,
    #[serde(with = "serde_float_vec")]
    pub duality_defects: Vec<Float>,
}

pub fn norm_growth_check(family: &BiorthogonalFamily, epsilon: f64) -> Result<NormGrowthReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MuntzError::Parameter(format!("ε must lie in (0,1), got {epsilon}")));
    }
    let p = family.precision_bits();
    let lam = family.lambda.values();
    let log_base = Float::with_val(p, 1.0 + epsilon).ln();
    let mut m_fit = Float::new(p);
    let mut ratios = Vec::with_capacity(lam.len());
    for (norm, &l) in family.norms.iter().zip(lam) {
        let log_norm = Float::with_val(p, norm.ln_ref());
        ratios.push(Float::with_val(p, &log_norm / l).to_f64());
        let scaled = Float::with_val(p, &log_norm - Float::with_val(p, &log_base * l)).exp();
        if scaled > m_fit {
            m_fit = scaled;
        }
    }
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut nonincreasing_from = ratios.len().max(1);
    for i in (1..=ratios.len()).rev() {
        if i == ratios.len() || ratios[i] <= ratios[i - 1] {
            nonincreasing_from = i;
        } else {
            break;
        }
    }
    let duality_defects = family
        .norms
        .iter()
        .zip(&family.projection_deficit)
        .map(|(a, d)| (Float::with_val(p, a * d) - 1u32).abs())
        .collect();
    Ok(NormGrowthReport {
        epsilon,
        norms: family.norms.clone(),
        ratios,
        max_ratio,
        m_fit,
        nonincreasing_from,
        duality_defects,
    })
}

/// `‖r_n^(N2) - r_n^(N1)‖` with the shorter dual zero-padded.
pub fn truncation_convergence(lambda: &ExponentSequence, n: usize, n1: usize, n2: usize, precision_bits: u32) -> Result<Float> {
    if n == 0 || n > n1 {
        return Err(MuntzError::IndexOutOfRange { index: n, len: n1 });
    }
    if n2 < n1 {
        return Err(MuntzError::Parameter(format!("need N1 ≤ N2, got {n1} > {n2}")));
    }
    let p = precision_bits;
    if n1 == n2 {
        return Ok(Float::new(p));
    }
    let small = dual_family(lambda, n1, p)?;
    let large = dual_family(lambda, n2, p)?;
    let mut diff = large.dual_coefficients(n)?;
    for (k, c) in small.dual_coefficients(n)?.iter().enumerate() {
        diff[k] -= c;
    }
    let gd = large.gram.entries.mul_vec(&diff);
    let q = crate::linalg::dot(&diff, &gd, p);
    Ok(if q > 0 { q.sqrt() } else { Float::new(p) })
}

/// Serializable view of a family: decimal coefficients, norms and residuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub lambda: Vec<f64>,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub precision_bits: u32,
    /// `coefficients[n][k]` multiplies `t^{λ_k}` in `r_{n+1}`.
    pub coefficients: Vec<Vec<String>>,
    #[serde(with = "serde_float_vec")]
    pub norms: Vec<Float>,
    #[serde(with = "serde_float_vec")]
    pub distances: Vec<Float>,
    #[serde(with = "serde_float")]
    pub biorthogonality_residual: Float,
    #[serde(with = "serde_float")]
    pub inverse_residual: Float,
}

impl From<&BiorthogonalFamily> for FamilyReport {
    fn from(f: &BiorthogonalFamily) -> Self {
        let n = f.truncation();
        FamilyReport {
            lambda: f.lambda.values().to_vec(),
            truncation: n,
            precision_bits: f.precision_bits(),
            coefficients: (0..n)
                .map(|col| (0..n).map(|k| to_decimal(f.coeffs.get(k, col))).collect())
                .collect(),
            norms: f.norms.clone(),
            distances: f.projection_deficit.clone(),
            biorthogonality_residual: f.biorthogonality_residual.clone(),
            inverse_residual: f.inverse_residual.clone(),
        }
    }
}
