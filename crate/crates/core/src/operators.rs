//! Diagonal operators `T f = Σ ⟨f, r_n⟩ u_n t^{λ_n}` with `|u_n| ≤ ρ^{λ_n}`,
//! their matrices in orthonormal coordinates, and a certificate for the
//! spectral-synthesis properties of the class.

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::biorthogonal::{norm_growth_check, BiorthogonalFamily};
use crate::completeness::{mixed_completeness_check, partitions, PartitionSelection};
use crate::error::{MuntzError, Result};
use crate::exponents::ExponentSequence;
use crate::linalg::{CMatrix, Matrix};
use crate::muntz_space::{recover_coefficients, Function, MuntzSeries};
use crate::numeric::{pow_real, scaled_tolerance, serde_float, CFloat};
use crate::quadrature::QuadratureSpec;

/// Truncated operator of the class: eigenvalues `u_n` on `e_n = t^{λ_n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuntzOperator {
    pub lambda: ExponentSequence,
    pub u: Vec<CFloat>,
    pub rho: f64,
}

impl MuntzOperator {
    /// Checks `0 < ρ < 1`, `u_n ≠ 0`, distinctness and `|u_n| ≤ ρ^{λ_n}`.
    pub fn new(lambda: ExponentSequence, u: Vec<CFloat>, rho: f64) -> Result<Self> {
        let op = Self::new_unchecked(lambda, u, rho)?;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(MuntzError::Parameter(format!("rho must lie in (0, 1), got {rho}")));
        }
        for (i, ui) in op.u.iter().enumerate() {
            if ui.is_zero() {
                return Err(MuntzError::Input(format!("u_{} is zero", i + 1)));
            }
            let bound = pow_real(&Float::with_val(ui.prec(), rho), op.lambda.values()[i]);
            let slack = Float::with_val(ui.prec(), Float::i_exp(1, 8 - ui.prec() as i32)) + 1u32;
            if ui.abs() > bound * slack {
                return Err(MuntzError::Input(format!("|u_{}| exceeds rho^lambda", i + 1)));
            }
            if op.u[..i].iter().any(|uj| uj == ui) {
                return Err(MuntzError::Input(format!("u_{} repeats an earlier value", i + 1)));
            }
        }
        Ok(op)
    }

    /// Skips the eigenvalue invariants; for exercising failure paths.
    pub fn new_unchecked(lambda: ExponentSequence, u: Vec<CFloat>, rho: f64) -> Result<Self> {
        if u.is_empty() || u.len() > lambda.len() {
            return Err(MuntzError::Input(format!(
                "{} eigenvalues for {} exponents",
                u.len(),
                lambda.len()
            )));
        }
        let lambda = lambda.truncated(u.len())?;
        Ok(MuntzOperator { lambda, u, rho })
    }

    pub fn truncation(&self) -> usize {
        self.u.len()
    }

    pub fn precision(&self) -> u32 {
        self.u.iter().map(CFloat::prec).max().unwrap_or(crate::numeric::DEFAULT_PRECISION_BITS)
    }

    fn check_family(&self, family: &BiorthogonalFamily) -> Result<()> {
        if family.lambda.values() != self.lambda.values() {
            return Err(MuntzError::Input(
                "operator and dual family use different exponents".into(),
            ));
        }
        Ok(())
    }
}

/// `T_ρ f(x) = f(ρx)`: `u_n = ρ^{λ_n}`.
pub fn dilation_operator(lambda: &ExponentSequence, rho: f64, truncation: usize, prec: u32) -> Result<MuntzOperator> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(MuntzError::Parameter(format!("rho must lie in (0, 1), got {rho}")));
    }
    let lam = lambda.truncated(truncation)?;
    let r = Float::with_val(prec, rho);
    let u = lam.values().iter().map(|&l| CFloat::real(pow_real(&r, l))).collect();
    MuntzOperator::new(lam, u, rho)
}

/// `T f = Σ_{n≤N} ⟨f, r_n⟩ u_n t^{λ_n}`.
pub fn apply_operator(op: &MuntzOperator, f: &Function, family: &BiorthogonalFamily, quad: &QuadratureSpec) -> Result<MuntzSeries> {
    op.check_family(family)?;
    let rec = recover_coefficients(f, family, quad)?;
    let coeffs = rec.coefficients.iter().zip(&op.u).map(|(c, u)| c.mul(u)).collect();
    MuntzSeries::finite(op.lambda.clone(), coeffs)
}

fn diagonal_parts(u: &[CFloat], prec: u32) -> (Matrix, Matrix) {
    let re: Vec<Float> = u.iter().map(|z| Float::with_val(prec, &z.re)).collect();
    let im: Vec<Float> = u.iter().map(|z| Float::with_val(prec, &z.im)).collect();
    (Matrix::diagonal(&re, prec), Matrix::diagonal(&im, prec))
}

/// `Lᵀ diag(u) L^{-T}` for a given lower factor `L` of the Gram matrix.
pub fn conjugated_diagonal(u: &[CFloat], l: &Matrix) -> Result<CMatrix> {
    let p = l.prec();
    let lt = l.transpose();
    let lit = l.lower_triangular_inverse()?.transpose();
    let (dr, di) = diagonal_parts(u, p);
    Ok(CMatrix {
        re: lt.mul(&dr).mul(&lit),
        im: lt.mul(&di).mul(&lit),
    })
}

/// Matrix of `T` in the orthonormal basis obtained from `G = L Lᵀ`.
pub fn matrix_representation(op: &MuntzOperator, family: &BiorthogonalFamily) -> Result<CMatrix> {
    op.check_family(family)?;
    conjugated_diagonal(&op.u, family.cholesky()?)
}

/// `‖M M* - M* M‖_F`.
pub fn commutator_defect(m: &CMatrix) -> Float {
    let a = m.adjoint();
    m.mul(&a).sub(&a.mul(m)).frobenius_norm()
}

pub fn normality_defect(op: &MuntzOperator, family: &BiorthogonalFamily) -> Result<Float> {
    Ok(commutator_defect(&matrix_representation(op, family)?))
}

/// `ε` for which `ρ (1+ε) ≤ (1+ρ)/2`, kept inside the admissible `(0, 1)`.
pub fn envelope_epsilon(rho: f64) -> f64 {
    ((1.0 - rho) / (2.0 * rho)).min(0.99)
}

/// `‖T - T_m‖` next to the envelope `m_fit Σ_{n>m} ((1+ρ)/2)^{λ_n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteRankError {
    pub m: usize,
    #[serde(with = "serde_float")]
    pub computed: Float,
    #[serde(with = "serde_float")]
    pub bound: Float,
}

fn envelope_tail(op: &MuntzOperator, m: usize, m_fit: &Float) -> Float {
    let p = m_fit.prec();
    let base = Float::with_val(p, 1.0 + op.rho) / 2u32;
    let tail = op.lambda.values()[m..]
        .iter()
        .fold(Float::new(p), |acc, &l| acc + pow_real(&base, l));
    tail * m_fit
}

fn tail_norm(op: &MuntzOperator, l: &Matrix, m: usize) -> Result<Float> {
    let p = l.prec();
    let tail: Vec<CFloat> = op
        .u
        .iter()
        .enumerate()
        .map(|(i, u)| if i < m { CFloat::zero(p) } else { u.clone() })
        .collect();
    Ok(conjugated_diagonal(&tail, l)?.operator_norm())
}

pub fn finite_rank_error(op: &MuntzOperator, family: &BiorthogonalFamily, m: usize) -> Result<FiniteRankError> {
    op.check_family(family)?;
    let n = op.truncation();
    if m > n {
        return Err(MuntzError::IndexOutOfRange { index: m, len: n });
    }
    let growth = norm_growth_check(family, envelope_epsilon(op.rho))?;
    Ok(FiniteRankError {
        m,
        computed: tail_norm(op, family.cholesky()?, m)?,
        bound: envelope_tail(op, m, &growth.m_fit),
    })
}

/// Every `m = 0..=N`, computed in parallel.
pub fn finite_rank_errors(op: &MuntzOperator, family: &BiorthogonalFamily) -> Result<Vec<FiniteRankError>> {
    op.check_family(family)?;
    let growth = norm_growth_check(family, envelope_epsilon(op.rho))?;
    let l = family.cholesky()?;
    (0..=op.truncation())
        .into_par_iter()
        .map(|m| {
            Ok(FiniteRankError {
                m,
                computed: tail_norm(op, l, m)?,
                bound: envelope_tail(op, m, &growth.m_fit),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl CheckStatus {
    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }

    /// Fail dominates, then inconclusive.
    pub fn combine(items: impl IntoIterator<Item = CheckStatus>) -> Self {
        items.into_iter().fold(CheckStatus::Pass, |acc, s| match (acc, s) {
            (CheckStatus::Fail, _) | (_, CheckStatus::Fail) => CheckStatus::Fail,
            (CheckStatus::Inconclusive, _) | (_, CheckStatus::Inconclusive) => CheckStatus::Inconclusive,
            _ => CheckStatus::Pass,
        })
    }
}

/// One certificate item: a measured value against a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub status: CheckStatus,
    #[serde(with = "serde_float")]
    pub value: Float,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckItem {
    fn inconclusive(prec: u32, err: &MuntzError) -> Self {
        CheckItem {
            status: CheckStatus::Inconclusive,
            value: Float::with_val(prec, f64::NAN),
            tolerance: 0.0,
            detail: err.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateTolerances {
    /// Bound on `max_k ‖T e_k - u_k e_k‖`.
    pub eigen: f64,
    /// Bound on `max_{j,k} |⟨T e_j, r_k⟩ - u_k δ_jk|`.
    pub adjoint: f64,
    /// Cutoff separating a trivial kernel from rounding.
    pub kernel: f64,
    /// Relative bound on `|M_kk - u_k|` and on the strictly lower part of `M`.
    pub similarity: f64,
    /// Smallest commutator norm, relative to `‖M‖²`, counted as non-normal.
    pub normality: f64,
}

impl CertificateTolerances {
    pub fn for_precision(bits: u32) -> Self {
        CertificateTolerances {
            eigen: scaled_tolerance(bits, 8),
            adjoint: scaled_tolerance(bits, 8),
            kernel: scaled_tolerance(bits, 4),
            similarity: scaled_tolerance(bits, 8),
            normality: scaled_tolerance(bits, 4),
        }
    }
}

/// Certificate of the seven spectral-synthesis obligations plus the mixed
/// system check, each pass / fail / inconclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisCertificate {
    pub lambda: Vec<f64>,
    pub rho: f64,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub precision_bits: u32,
    pub status: CheckStatus,
    /// Item 1: `‖T - T_m‖` strictly decreasing for `m ≥ 1` and under the envelope.
    pub finite_rank: CheckItem,
    pub finite_rank_errors: Vec<FiniteRankError>,
    /// Item 2: `T e_k = u_k e_k`.
    pub eigen_relations: CheckItem,
    /// Item 3: `⟨T e_j, r_k⟩ = u_k δ_jk`, the weak form of `T* r_k = ū_k r_k`.
    pub adjoint_relations: CheckItem,
    /// Item 4: smallest singular value of `M`.
    pub kernel: CheckItem,
    /// Item 5: `σ(T) = {0} ∪ {u_k}` read off the triangular `M`.
    pub spectrum: CheckItem,
    pub eigenvalues: Vec<CFloat>,
    /// Item 6: smallest `|u_j - u_k|`.
    pub simplicity: CheckItem,
    /// Item 7: `‖M M* - M* M‖_F`.
    pub normality: CheckItem,
    /// Smallest singular value over the mixed systems visited.
    pub mixed_system: CheckItem,
    pub partitions_checked: usize,
}

fn gram_norm(coeffs: &[CFloat], g: &Matrix) -> Float {
    let p = g.prec();
    let mut s = Float::new(p);
    for (i, ci) in coeffs.iter().enumerate() {
        for (j, cj) in coeffs.iter().enumerate() {
            s += Float::with_val(p, ci.re_mul_conj(cj)) * g.get(i, j);
        }
    }
    s.max(&Float::new(p)).sqrt()
}

/// `max_k ‖Σ_n (⟨e_k, r_n⟩ - δ_kn) u_n e_n‖`, with the pairing from `G · G⁻¹`.
fn eigen_check(op: &MuntzOperator, family: &BiorthogonalFamily, tol: f64) -> CheckItem {
    let p = family.precision_bits();
    let n = op.truncation();
    let worst = (0..n)
        .map(|k| {
            let d: Vec<CFloat> = (0..n)
                .map(|j| {
                    let mut pk = family.pairing.get(k, j).clone();
                    if j == k {
                        pk -= 1u32;
                    }
                    op.u[j].scale(&pk)
                })
                .collect();
            gram_norm(&d, &family.gram.entries)
        })
        .fold(Float::new(p), |m, x| m.max(&x));
    CheckItem {
        status: CheckStatus::from_bool(worst < tol),
        value: worst,
        tolerance: tol,
        detail: "max_k ||T e_k - u_k e_k||".into(),
    }
}

/// `max_{j,k} |Σ_n P_jn u_n P_nk - u_k δ_jk|` with `P_jn = ⟨e_j, r_n⟩`.
fn adjoint_check(op: &MuntzOperator, family: &BiorthogonalFamily, tol: f64) -> CheckItem {
    let p = family.precision_bits();
    let n = op.truncation();
    let pm = &family.pairing;
    let mut worst = Float::new(p);
    for j in 0..n {
        for k in 0..n {
            let mut s = CFloat::zero(p);
            for m in 0..n {
                let w = Float::with_val(p, pm.get(j, m) * pm.get(m, k));
                s.add_scaled(&op.u[m], &w);
            }
            if j == k {
                s = s.sub(&op.u[k]);
            }
            worst = worst.max(&s.abs());
        }
    }
    CheckItem {
        status: CheckStatus::from_bool(worst < tol),
        value: worst,
        tolerance: tol,
        detail: "max_{j,k} |<T e_j, r_k> - u_k delta_jk|".into(),
    }
}

/// `σ_min(M) = 1 / σ_max(M⁻¹)` with `M⁻¹ = Lᵀ diag(1/u) L^{-T}`.
fn kernel_check(op: &MuntzOperator, l: &Matrix, tol: f64) -> Result<CheckItem> {
    let p = l.prec();
    if let Some(k) = op.u.iter().position(CFloat::is_zero) {
        return Ok(CheckItem {
            status: CheckStatus::Fail,
            value: Float::new(p),
            tolerance: tol,
            detail: format!("u_{} = 0 puts e_{} in the kernel", k + 1, k + 1),
        });
    }
    let inv: Vec<CFloat> = op
        .u
        .iter()
        .map(|z| {
            let d = z.norm_sqr();
            let c = z.conj();
            CFloat::new(Float::with_val(p, &c.re / &d), Float::with_val(p, &c.im / &d))
        })
        .collect();
    let smax = conjugated_diagonal(&inv, l)?.operator_norm();
    let smin = Float::with_val(p, 1) / smax;
    Ok(CheckItem {
        status: if smin > tol { CheckStatus::Pass } else { CheckStatus::Inconclusive },
        value: smin,
        tolerance: tol,
        detail: "smallest singular value of M".into(),
    })
}

/// `M` is upper triangular with `u` on the diagonal; measure both facts.
fn spectrum_check(op: &MuntzOperator, m: &CMatrix, tol: f64) -> CheckItem {
    let p = m.prec();
    let n = op.truncation();
    let scale = op.u.iter().map(CFloat::abs).fold(Float::new(p), |a, x| a.max(&x));
    let mut worst = Float::new(p);
    for i in 0..n {
        for j in 0..=i {
            let entry = CFloat::new(m.re.get(i, j).clone(), m.im.get(i, j).clone());
            let dev = if i == j { entry.sub(&op.u[i]).abs() } else { entry.abs() };
            worst = worst.max(&dev);
        }
    }
    let rel = if scale.is_zero() { worst } else { worst / &scale };
    CheckItem {
        status: CheckStatus::from_bool(rel < tol),
        value: rel,
        tolerance: tol,
        detail: "spectrum {0} U {u_k}; max relative deviation of M from triangular with diagonal u".into(),
    }
}

fn simplicity_check(op: &MuntzOperator) -> CheckItem {
    let p = op.precision();
    let mut sep: Option<Float> = None;
    for i in 0..op.u.len() {
        for j in i + 1..op.u.len() {
            let d = op.u[i].sub(&op.u[j]).abs();
            sep = Some(match sep {
                Some(s) if s <= d => s,
                _ => d,
            });
        }
    }
    let value = sep.unwrap_or_else(|| Float::with_val(p, f64::INFINITY));
    CheckItem {
        status: CheckStatus::from_bool(!value.is_zero()),
        value,
        tolerance: 0.0,
        detail: "min_{j != k} |u_j - u_k|".into(),
    }
}

fn normality_check(m: &CMatrix, tol: f64) -> CheckItem {
    let defect = commutator_defect(m);
    let norm = m.frobenius_norm();
    let cutoff = Float::with_val(m.prec(), norm.square_ref()) * tol;
    let status = if m.rows() == 1 {
        // a scalar is normal; the obligation only concerns N ≥ 2
        CheckStatus::Pass
    } else {
        CheckStatus::from_bool(defect > cutoff)
    };
    CheckItem {
        status,
        value: defect,
        tolerance: tol,
        detail: "||M M* - M* M||_F, relative cutoff on ||M||_F^2".into(),
    }
}

fn finite_rank_check(errors: &[FiniteRankError], prec: u32) -> CheckItem {
    let decreasing = errors.windows(2).skip(1).all(|w| w[1].computed < w[0].computed);
    let under = errors.iter().all(|e| e.computed <= e.bound);
    let worst = errors
        .iter()
        .filter(|e| !e.bound.is_zero())
        .map(|e| Float::with_val(prec, &e.computed / &e.bound))
        .fold(Float::new(prec), |a, x| a.max(&x));
    CheckItem {
        status: CheckStatus::from_bool(decreasing && under),
        value: worst,
        tolerance: 1.0,
        detail: format!(
            "||T - T_m|| strictly decreasing for m >= 1: {decreasing}; under envelope: {under}; value = max computed/bound"
        ),
    }
}

fn mixed_check(family: &BiorthogonalFamily, selection: PartitionSelection) -> Result<(CheckItem, usize)> {
    let p = family.precision_bits();
    let parts = partitions(family.truncation(), selection)?;
    family.cholesky()?;
    let checks = parts
        .par_iter()
        .map(|pt| mixed_completeness_check(pt, family))
        .collect::<Result<Vec<_>>>()?;
    let threshold = checks.first().map(|c| c.threshold).unwrap_or(0.0);
    let min = checks
        .iter()
        .map(|c| c.min_singular.clone())
        .reduce(|a, b| a.min(&b))
        .unwrap_or_else(|| Float::new(p));
    let all = checks.iter().all(|c| c.invertible);
    Ok((
        CheckItem {
            status: if all { CheckStatus::Pass } else { CheckStatus::Inconclusive },
            value: min,
            tolerance: threshold,
            detail: "smallest singular value over mixed systems".into(),
        },
        parts.len(),
    ))
}

fn or_inconclusive(r: Result<CheckItem>, prec: u32) -> Result<CheckItem> {
    match r {
        Ok(item) => Ok(item),
        Err(e) if e.is_precision() => Ok(CheckItem::inconclusive(prec, &e)),
        Err(e) => Err(e),
    }
}

/// Partitions visited by default: all of them up to `N = 10`, else 100 sampled.
pub fn default_selection(truncation: usize, seed: u64) -> PartitionSelection {
    if truncation <= 10 {
        PartitionSelection::All
    } else {
        PartitionSelection::Sample { count: 100, seed }
    }
}

pub fn synthesis_certificate(
    op: &MuntzOperator,
    family: &BiorthogonalFamily,
    tolerances: &CertificateTolerances,
    selection: PartitionSelection,
) -> Result<SynthesisCertificate> {
    op.check_family(family)?;
    let p = family.precision_bits();

    let (finite_rank, finite_rank_errors) = match finite_rank_errors(op, family) {
        Ok(errs) => (finite_rank_check(&errs, p), errs),
        Err(e) if e.is_precision() => (CheckItem::inconclusive(p, &e), Vec::new()),
        Err(e) => return Err(e),
    };
    let eigen_relations = eigen_check(op, family, tolerances.eigen);
    let adjoint_relations = adjoint_check(op, family, tolerances.adjoint);
    let kernel = or_inconclusive(family.cholesky().and_then(|l| kernel_check(op, l, tolerances.kernel)), p)?;
    let (spectrum, normality) = match matrix_representation(op, family) {
        Ok(m) => (spectrum_check(op, &m, tolerances.similarity), normality_check(&m, tolerances.normality)),
        Err(e) if e.is_precision() => (CheckItem::inconclusive(p, &e), CheckItem::inconclusive(p, &e)),
        Err(e) => return Err(e),
    };
    let simplicity = simplicity_check(op);
    let (mixed_system, partitions_checked) = match mixed_check(family, selection) {
        Ok(r) => r,
        Err(e) if e.is_precision() => (CheckItem::inconclusive(p, &e), 0),
        Err(e) => return Err(e),
    };
    let mut eigenvalues = vec![CFloat::zero(p)];
    eigenvalues.extend(op.u.iter().cloned());

    let status = CheckStatus::combine(
        [&finite_rank, &eigen_relations, &adjoint_relations, &kernel, &spectrum, &simplicity, &normality, &mixed_system]
            .iter()
            .map(|i| i.status),
    );
    Ok(SynthesisCertificate {
        lambda: op.lambda.values().to_vec(),
        rho: op.rho,
        truncation: op.truncation(),
        precision_bits: p,
        status,
        finite_rank,
        finite_rank_errors,
        eigen_relations,
        adjoint_relations,
        kernel,
        spectrum,
        eigenvalues,
        simplicity,
        normality,
        mixed_system,
        partitions_checked,
    })
}
