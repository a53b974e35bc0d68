//! Mixed systems `{e_n : n ∈ N₁} ∪ {r_n : n ∈ N₂}` at a finite truncation:
//! invertibility in orthonormal coordinates and least-squares residuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::biorthogonal::BiorthogonalFamily;
use crate::error::{MuntzError, Result};
use crate::linalg::{singular_values, Matrix};
use crate::muntz_space::{project, Function, Projection};
use crate::numeric::{scaled_tolerance, serde_float, serde_float_opt, CFloat};
use crate::quadrature::QuadratureSpec;

/// Largest truncation for which every partition can be enumerated.
pub const MAX_EXHAUSTIVE_N: usize = 20;

/// Disjoint cover `N₁ ∪ N₂ = {1..N}`; members are 1-based and sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
    #[serde(rename = "N")]
    pub truncation: usize,
}

impl Partition {
    pub fn new(mut n1: Vec<usize>, mut n2: Vec<usize>, truncation: usize) -> Result<Self> {
        n1.sort_unstable();
        n2.sort_unstable();
        let mut all: Vec<usize> = n1.iter().chain(&n2).copied().collect();
        all.sort_unstable();
        if all != (1..=truncation).collect::<Vec<_>>() {
            return Err(MuntzError::Input(format!(
                "N1 and N2 must partition 1..={truncation}"
            )));
        }
        Ok(Partition { n1, n2, truncation })
    }

    /// Bit `i` of `mask` set puts `i + 1` in `N₂`.
    pub fn from_mask(mask: u64, truncation: usize) -> Self {
        let (n2, n1): (Vec<usize>, Vec<usize>) = (1..=truncation).partition(|&n| mask >> (n - 1) & 1 == 1);
        Partition { n1, n2, truncation }
    }

    pub fn mask(&self) -> u64 {
        self.n2.iter().fold(0, |m, &n| m | 1 << (n - 1))
    }

    /// Odd indices in `N₁`, even ones in `N₂`.
    pub fn alternating(truncation: usize) -> Self {
        let (n1, n2) = (1..=truncation).partition(|n| n % 2 == 1);
        Partition { n1, n2, truncation }
    }

    pub fn uses_dual(&self, n: usize) -> bool {
        self.n2.binary_search(&n).is_ok()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        write!(f, "e{{{}}} r{{{}}}", join(&self.n1), join(&self.n2))
    }
}

fn check_partition(partition: &Partition, family: &BiorthogonalFamily) -> Result<()> {
    if partition.truncation != family.truncation() {
        return Err(MuntzError::Input(format!(
            "partition of 1..={} used with a family of size {}",
            partition.truncation,
            family.truncation()
        )));
    }
    Ok(())
}

/// Monomial coefficients of the mixed system, one column per index.
fn mixed_coefficients(partition: &Partition, family: &BiorthogonalFamily) -> Matrix {
    let n = family.truncation();
    let p = family.precision_bits();
    Matrix::from_fn(n, n, p, |i, j| {
        if partition.uses_dual(j + 1) {
            family.coeffs.get(i, j).clone()
        } else if i == j {
            Float::with_val(p, 1)
        } else {
            Float::new(p)
        }
    })
}

/// Orthonormal coordinates `Lᵀ C` of the mixed system.
pub fn mixed_system_matrix(partition: &Partition, family: &BiorthogonalFamily) -> Result<Matrix> {
    check_partition(partition, family)?;
    let l = family.cholesky()?;
    Ok(l.transpose().mul(&mixed_coefficients(partition, family)))
}

/// Singular-value cutoff `10^(-bits/4)`.
pub fn singular_threshold(bits: u32) -> f64 {
    scaled_tolerance(bits, 4)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedCheck {
    #[serde(with = "serde_float")]
    pub min_singular: Float,
    pub invertible: bool,
    pub threshold: f64,
}

pub fn mixed_completeness_check(partition: &Partition, family: &BiorthogonalFamily) -> Result<MixedCheck> {
    let x = mixed_system_matrix(partition, family)?;
    let min_singular = singular_values(&x)
        .into_iter()
        .next()
        .unwrap_or_else(|| Float::new(x.prec()));
    let threshold = singular_threshold(family.precision_bits());
    Ok(MixedCheck {
        invertible: min_singular > threshold,
        min_singular,
        threshold,
    })
}

/// Least-squares residual `min_x ‖f - Σ_j x_j φ_j‖` over the mixed system `φ`.
pub fn mixed_reconstruction_residual(
    target: &Function,
    partition: &Partition,
    family: &BiorthogonalFamily,
    quad: &QuadratureSpec,
) -> Result<Float> {
    check_partition(partition, family)?;
    residual_from_projection(&project(target, family, quad)?, partition, family)
}

/// The projection supplies `‖f‖²` and `b = (⟨f, e_k⟩)`, which do not depend
/// on the partition; the solve in mixed coordinates does.
fn residual_from_projection(proj: &Projection, partition: &Partition, family: &BiorthogonalFamily) -> Result<Float> {
    let p = family.precision_bits();
    let b: Vec<CFloat> = family.gram.entries.row_products(&proj.series.coeffs);
    let norm_sq = Float::with_val(p, proj.residual.square_ref()) + real_dot(&proj.series.coeffs, &b, p);

    let l = family.cholesky()?;
    let linv = l.lower_triangular_inverse()?;
    let c = mixed_coefficients(partition, family);
    let x = l.transpose().mul(&c);
    let w_re = linv.mul_vec(&b.iter().map(|z| z.re.clone()).collect::<Vec<_>>());
    let w_im = linv.mul_vec(&b.iter().map(|z| z.im.clone()).collect::<Vec<_>>());
    let x_re = x.solve(&w_re).map_err(|_| precision_failure(p))?;
    let x_im = x.solve(&w_im).map_err(|_| precision_failure(p))?;
    // a = C x in the monomial basis; ‖f - Σ a e‖² = ‖f‖² - 2 Re(aᴴ b) + aᴴ G a.
    let a: Vec<CFloat> = c
        .mul_vec(&x_re)
        .into_iter()
        .zip(c.mul_vec(&x_im))
        .map(|(r, i)| CFloat::new(r, i))
        .collect();
    let ga = family.gram.entries.row_products(&a);
    let mut r2 = norm_sq;
    r2 -= Float::with_val(p, real_dot(&a, &b, p) * 2u32);
    r2 += real_dot(&a, &ga, p);
    Ok(r2.max(&Float::new(p)).sqrt())
}

fn precision_failure(bits: u32) -> MuntzError {
    MuntzError::PrecisionInsufficient { bits, residual: f64::INFINITY, tolerance: singular_threshold(bits) }
}

/// `Re Σ ā_n b_n`.
fn real_dot(a: &[CFloat], b: &[CFloat], prec: u32) -> Float {
    a.iter()
        .zip(b)
        .fold(Float::new(prec), |acc, (x, y)| acc + y.re_mul_conj(x))
}

trait RowProducts {
    fn row_products(&self, v: &[CFloat]) -> Vec<CFloat>;
}

impl RowProducts for Matrix {
    fn row_products(&self, v: &[CFloat]) -> Vec<CFloat> {
        let p = self.prec();
        (0..self.rows())
            .map(|i| {
                let mut s = CFloat::zero(p);
                for (j, x) in v.iter().enumerate() {
                    s.add_scaled(x, self.get(i, j));
                }
                s
            })
            .collect()
    }
}

/// Which partitions a sweep visits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionSelection {
    All,
    Sample { count: usize, seed: u64 },
}

impl PartitionSelection {
    /// `all` or `sample:<count>`.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        if s == "all" {
            return Ok(PartitionSelection::All);
        }
        let count = s
            .strip_prefix("sample:")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| MuntzError::Parameter(format!("expected 'all' or 'sample:<count>', got '{s}'")))?;
        Ok(PartitionSelection::Sample { count, seed })
    }
}

pub fn partitions(truncation: usize, selection: PartitionSelection) -> Result<Vec<Partition>> {
    if truncation == 0 || truncation > 63 {
        return Err(MuntzError::Parameter(format!("truncation {truncation} outside 1..=63")));
    }
    let total = 1u64 << truncation;
    match selection {
        PartitionSelection::All => {
            if truncation > MAX_EXHAUSTIVE_N {
                return Err(MuntzError::Parameter(format!(
                    "exhaustive sweep limited to N ≤ {MAX_EXHAUSTIVE_N}"
                )));
            }
            Ok((0..total).map(|m| Partition::from_mask(m, truncation)).collect())
        }
        PartitionSelection::Sample { count, seed } => {
            let count = (count as u64).min(total) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut masks = BTreeSet::new();
            while masks.len() < count {
                masks.insert(rng.gen_range(0..total));
            }
            Ok(masks.into_iter().map(|m| Partition::from_mask(m, truncation)).collect())
        }
    }
}

/// One row of a hereditary-completeness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mask: u64,
    pub partition: Partition,
    #[serde(with = "serde_float")]
    pub min_singular: Float,
    pub invertible: bool,
    #[serde(with = "serde_float_opt", default)]
    pub residual: Option<Float>,
}

/// Check every selected partition, in parallel; rows are ordered by mask.
pub fn hereditary_sweep(
    family: &BiorthogonalFamily,
    selection: PartitionSelection,
    target: Option<&Function>,
    quad: &QuadratureSpec,
) -> Result<Vec<SweepRow>> {
    let parts = partitions(family.truncation(), selection)?;
    family.cholesky()?;
    let proj = target.map(|t| project(t, family, quad)).transpose()?;
    parts
        .into_par_iter()
        .map(|p| {
            let check = mixed_completeness_check(&p, family)?;
            let residual = match &proj {
                Some(pr) => Some(residual_from_projection(pr, &p, family)?),
                None => None,
            };
            Ok(SweepRow {
                mask: p.mask(),
                partition: p,
                min_singular: check.min_singular,
                invertible: check.invertible,
                residual,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biorthogonal::dual_family;
    use crate::exponents::ExponentSequence;
    use crate::muntz_space::{BlackBox, MuntzSeries};

    fn fam(v: &[f64], bits: u32) -> BiorthogonalFamily {
        let l = ExponentSequence::custom(v.to_vec(), 1e-6).unwrap();
        dual_family(&l, v.len(), bits).unwrap()
    }

    #[test]
    fn partition_validation_and_masks() {
        assert!(Partition::new(vec![1], vec![1, 2], 2).is_err());
        assert!(Partition::new(vec![1], vec![], 2).is_err());
        let p = Partition::new(vec![3, 1], vec![2], 3).unwrap();
        assert_eq!(p.mask(), 0b010);
        assert_eq!(Partition::from_mask(0b010, 3), p);
        assert_eq!(Partition::alternating(4).n2, vec![2, 4]);
    }

    #[test]
    fn mixed_pair_gram() {
        let f = fam(&[1.0, 2.0], 128);
        let p = Partition::new(vec![1], vec![2], 2).unwrap();
        let x = mixed_system_matrix(&p, &f).unwrap();
        let g = x.transpose().mul(&x);
        assert!((g.get(0, 0).to_f64() - 1.0 / 3.0).abs() < 1e-30);
        assert!(g.get(0, 1).to_f64().abs() < 1e-30);
        assert!((g.get(1, 1).to_f64() - 80.0).abs() < 1e-25);
        assert!(mixed_completeness_check(&p, &f).unwrap().invertible);
    }

    #[test]
    fn trivial_partitions() {
        let f = fam(&[1.0, 2.0, 3.5], 128);
        let all_e = mixed_system_matrix(&Partition::from_mask(0, 3), &f).unwrap();
        assert_eq!(all_e, f.cholesky().unwrap().transpose());
        let all_r = mixed_system_matrix(&Partition::from_mask(0b111, 3), &f).unwrap();
        let linv = f.cholesky().unwrap().lower_triangular_inverse().unwrap();
        assert!(all_r.sub(&linv).max_abs() < 1e-30);
    }

    #[test]
    fn residual_of_cube_is_partition_invariant() {
        let f = fam(&[1.0, 2.0], 128);
        let quad = QuadratureSpec::for_precision(128);
        let want = (1.0f64 / 7.0 - 32.0 / 225.0).sqrt();
        for target in [
            Function::from(MuntzSeries::monomial(3.0, 128).unwrap()),
            Function::from(BlackBox::monomial(3.0)),
        ] {
            for mask in 0..4 {
                let r = mixed_reconstruction_residual(&target, &Partition::from_mask(mask, 2), &f, &quad).unwrap();
                assert!((r.to_f64() - want).abs() < 1e-12, "mask {mask}: {r}");
            }
        }
        let e1 = Function::from(MuntzSeries::monomial(1.0, 128).unwrap());
        let r = mixed_reconstruction_residual(&e1, &Partition::from_mask(1, 2), &f, &quad).unwrap();
        assert!(r < 1e-30);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = partitions(12, PartitionSelection::Sample { count: 100, seed: 7 }).unwrap();
        let b = partitions(12, PartitionSelection::Sample { count: 100, seed: 7 }).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert_eq!(partitions(3, PartitionSelection::All).unwrap().len(), 8);
        assert!(PartitionSelection::parse("sample:x", 0).is_err());
    }
}
