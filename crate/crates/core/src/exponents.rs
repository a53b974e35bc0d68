//! Exponent sequences for Müntz systems: generation, validation, and the
//! reciprocal-tail bounds that the generators know analytically.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{MuntzError, Result};

/// Smallest admissible gap unless configured otherwise.
pub const DEFAULT_MIN_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentKind {
    /// `n^p`, `p > 1`.
    Power,
    /// `q^n`, `q > 1`.
    Lacunary,
    /// `n^p` for an integer `p >= 2`; integer-valued by construction.
    Integers,
    /// Arbitrary validated data with no analytic tail.
    Custom,
}

impl ExponentKind {
    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "power" => Ok(ExponentKind::Power),
            "lacunary" => Ok(ExponentKind::Lacunary),
            "integers" => Ok(ExponentKind::Integers),
            "custom" => Ok(ExponentKind::Custom),
            other => Err(MuntzError::Parameter(format!("unknown exponent kind '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExponentKind::Power => "power",
            ExponentKind::Lacunary => "lacunary",
            ExponentKind::Integers => "integers",
            ExponentKind::Custom => "custom",
        }
    }
}

/// Validated finite prefix `λ_1 < λ_2 < … < λ_N` with its measured gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSequence {
    pub kind: ExponentKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub values: Vec<f64>,
    #[serde(rename = "delta")]
    pub gap: f64,
}

/// Outcome of [`validate_exponents`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    /// Minimum consecutive difference (negative when the sequence decreases).
    pub gap: f64,
    /// Zero-based index of the first offending element.
    pub first_violation: Option<usize>,
}

/// Check positivity, strict monotonicity and the minimum gap.
pub fn validate_exponents(seq: &[f64], min_gap: f64) -> Result<ValidationReport> {
    if seq.is_empty() {
        return Err(MuntzError::Input("empty exponent sequence".into()));
    }
    let mut first_violation = None;
    if let Some(i) = seq.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        first_violation = Some(i);
    }
    let mut gap = f64::INFINITY;
    for (i, w) in seq.windows(2).enumerate() {
        let d = w[1] - w[0];
        gap = gap.min(d);
        if !(d >= min_gap) && first_violation.is_none_or(|v| i + 1 < v) {
            first_violation = Some(i + 1);
        }
    }
    Ok(ValidationReport {
        pass: first_violation.is_none(),
        gap,
        first_violation,
    })
}

fn param(params: &BTreeMap<String, f64>, name: &str) -> Result<f64> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| MuntzError::Parameter(format!("missing parameter '{name}'")))
}

/// Build the first `n` exponents of a generator family.
pub fn generate_exponents(kind: ExponentKind, params: &BTreeMap<String, f64>, n: usize) -> Result<ExponentSequence> {
    if n == 0 {
        return Err(MuntzError::Parameter("N must be at least 1".into()));
    }
    match kind {
        ExponentKind::Power | ExponentKind::Integers => {
            let p = param(params, "p")?;
            if !(p > 1.0) || !p.is_finite() {
                return Err(MuntzError::Parameter(format!(
                    "power exponent p must exceed 1 (sum of 1/n^p diverges), got {p}"
                )));
            }
            if kind == ExponentKind::Integers && (p.fract() != 0.0 || p < 2.0) {
                return Err(MuntzError::Parameter(format!(
                    "integers kind needs an integer p >= 2, got {p}"
                )));
            }
        }
        ExponentKind::Lacunary => {
            let q = param(params, "q")?;
            if !(q > 1.0) || !q.is_finite() {
                return Err(MuntzError::Parameter(format!("lacunary ratio q must exceed 1, got {q}")));
            }
        }
        ExponentKind::Custom => {
            return Err(MuntzError::Parameter(
                "custom sequences are loaded from data, not generated".into(),
            ))
        }
    }
    let mut seq = ExponentSequence {
        kind,
        params: params.clone(),
        values: Vec::new(),
        gap: 0.0,
    };
    seq.values = (1..=n).map(|i| seq.generated_value(i)).collect();
    let report = validate_exponents(&seq.values, 0.0)?;
    if !report.pass {
        return Err(MuntzError::Parameter(format!(
            "generator produced a non-increasing sequence at index {:?}",
            report.first_violation
        )));
    }
    seq.gap = if n == 1 { seq.first_gap() } else { report.gap };
    Ok(seq)
}

impl ExponentSequence {
    /// Wrap measured data; validated against `min_gap`.
    pub fn custom(values: Vec<f64>, min_gap: f64) -> Result<Self> {
        let report = validate_exponents(&values, min_gap)?;
        if !report.pass {
            return Err(MuntzError::Input(format!(
                "exponents fail validation at index {} (gap {})",
                report.first_violation.unwrap_or(0),
                report.gap
            )));
        }
        let gap = if values.len() == 1 { min_gap } else { report.gap };
        let kind = if values.iter().all(|v| v.fract() == 0.0) {
            ExponentKind::Integers
        } else {
            ExponentKind::Custom
        };
        Ok(ExponentSequence {
            kind,
            params: BTreeMap::new(),
            values,
            gap,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when the values come from a formula valid for every index.
    pub fn is_generated(&self) -> bool {
        self.kind != ExponentKind::Custom && !self.params.is_empty()
    }

    fn generated_value(&self, n: usize) -> f64 {
        match self.kind {
            ExponentKind::Power | ExponentKind::Integers => {
                let p = self.params["p"];
                if p.fract() == 0.0 {
                    (n as f64).powi(p as i32)
                } else {
                    (n as f64).powf(p)
                }
            }
            ExponentKind::Lacunary => self.params["q"].powi(n as i32),
            ExponentKind::Custom => unreachable!("custom sequences are not generated"),
        }
    }

    fn first_gap(&self) -> f64 {
        self.generated_value(2) - self.generated_value(1)
    }

    /// `λ_n` (1-based), extending past the stored prefix for generated kinds.
    pub fn value_at(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(MuntzError::IndexOutOfRange { index: 0, len: self.len() });
        }
        if n <= self.len() {
            return Ok(self.values[n - 1]);
        }
        if self.is_generated() {
            Ok(self.generated_value(n))
        } else {
            Err(MuntzError::IndexOutOfRange { index: n, len: self.len() })
        }
    }

    /// The first `n` exponents; generated kinds may extend beyond the prefix.
    pub fn truncated(&self, n: usize) -> Result<ExponentSequence> {
        if n == 0 {
            return Err(MuntzError::Parameter("truncation must be at least 1".into()));
        }
        let values = (1..=n).map(|i| self.value_at(i)).collect::<Result<Vec<_>>>()?;
        let gap = if n == 1 {
            if self.len() > 1 || self.is_generated() {
                self.value_at(2)? - values[0]
            } else {
                self.gap
            }
        } else {
            values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
        };
        Ok(ExponentSequence {
            kind: self.kind,
            params: self.params.clone(),
            values,
            gap,
        })
    }

    /// All stored values are positive integers.
    pub fn is_integer_valued(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    /// Upper bound on `Σ_{n>k} 1/λ_n`, when the generator provides one.
    pub fn reciprocal_tail_bound(&self, k: usize) -> Option<f64> {
        if !self.is_generated() {
            return None;
        }
        let k = k as f64;
        match self.kind {
            ExponentKind::Power | ExponentKind::Integers => {
                let p = self.params["p"];
                if k < 1.0 {
                    // ζ(p) ≤ 1 + 1/(p-1)
                    Some(1.0 + 1.0 / (p - 1.0))
                } else {
                    Some(k.powf(1.0 - p) / (p - 1.0))
                }
            }
            ExponentKind::Lacunary => {
                let q = self.params["q"];
                Some(q.powf(-k) / (q - 1.0))
            }
            ExponentKind::Custom => None,
        }
    }

    /// Lower bound on `λ_{n+1} - λ_n` for every `n >= k` (1-based), when known.
    pub fn tail_gap_bound(&self, k: usize) -> Option<f64> {
        if self.is_generated() {
            // both generators have increasing consecutive differences
            let a = self.value_at(k.max(1)).ok()?;
            let b = self.value_at(k.max(1) + 1).ok()?;
            Some(b - a)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(name: &str, v: f64) -> BTreeMap<String, f64> {
        BTreeMap::from([(name.to_string(), v)])
    }

    #[test]
    fn power_and_lacunary_formulas() {
        let s = generate_exponents(ExponentKind::Power, &params("p", 2.0), 5).unwrap();
        assert_eq!(s.values, vec![1.0, 4.0, 9.0, 16.0, 25.0]);
        assert_eq!(s.gap, 3.0);
        let s = generate_exponents(ExponentKind::Lacunary, &params("q", 2.0), 4).unwrap();
        assert_eq!(s.values, vec![2.0, 4.0, 8.0, 16.0]);
        assert_eq!(s.gap, 2.0);
    }

    #[test]
    fn rejects_divergent_parameters() {
        for (kind, name, v) in [
            (ExponentKind::Power, "p", 1.0),
            (ExponentKind::Power, "p", 0.5),
            (ExponentKind::Lacunary, "q", 1.0),
            (ExponentKind::Integers, "p", 2.5),
        ] {
            let err = generate_exponents(kind, &params(name, v), 3).unwrap_err();
            assert!(matches!(err, MuntzError::Parameter(_)), "{kind:?} {v}");
        }
        assert!(generate_exponents(ExponentKind::Power, &BTreeMap::new(), 3).is_err());
        assert!(generate_exponents(ExponentKind::Power, &params("p", 2.0), 0).is_err());
    }

    #[test]
    fn validation_examples() {
        let r = validate_exponents(&[1.0, 2.0, 4.0, 8.0], 0.5).unwrap();
        assert!(r.pass);
        assert_eq!(r.gap, 1.0);
        assert_eq!(r.first_violation, None);

        let r = validate_exponents(&[1.0, 1.5, 1.6], 0.5).unwrap();
        assert!(!r.pass);
        assert_eq!(r.first_violation, Some(2));
        assert!((r.gap - 0.1).abs() < 1e-12);

        let r = validate_exponents(&[2.0, 1.0, 3.0], 0.1).unwrap();
        assert!(!r.pass);
        assert_eq!(r.first_violation, Some(1));

        assert!(matches!(validate_exponents(&[], 0.1), Err(MuntzError::Input(_))));
        let r = validate_exponents(&[-1.0, 2.0], 0.1).unwrap();
        assert_eq!(r.first_violation, Some(0));
    }

    #[test]
    fn extends_generated_sequences() {
        let s = generate_exponents(ExponentKind::Power, &params("p", 2.0), 3).unwrap();
        assert_eq!(s.value_at(10).unwrap(), 100.0);
        assert_eq!(s.truncated(6).unwrap().values, vec![1.0, 4.0, 9.0, 16.0, 25.0, 36.0]);
        let c = ExponentSequence::custom(vec![0.5, 1.5], 1e-6).unwrap();
        assert!(c.value_at(3).is_err());
        assert_eq!(c.reciprocal_tail_bound(2), None);
    }

    #[test]
    fn reciprocal_tail_bounds_dominate_sums() {
        let s = generate_exponents(ExponentKind::Power, &params("p", 2.0), 1).unwrap();
        for k in [1usize, 5, 50] {
            let partial: f64 = (k + 1..200_000).map(|n| 1.0 / (n as f64).powi(2)).sum();
            assert!(partial <= s.reciprocal_tail_bound(k).unwrap());
        }
        let l = generate_exponents(ExponentKind::Lacunary, &params("q", 2.0), 1).unwrap();
        let exact: f64 = (4..60).map(|n| 0.5f64.powi(n)).sum();
        assert!((l.reciprocal_tail_bound(3).unwrap() - exact).abs() < 1e-15);
    }

    #[test]
    fn custom_integer_data_is_tagged() {
        let s = ExponentSequence::custom(vec![1.0, 3.0, 7.0], 1e-6).unwrap();
        assert_eq!(s.kind, ExponentKind::Integers);
        assert!(s.is_integer_valued());
        assert!(ExponentSequence::custom(vec![1.0, 1.0 + 1e-9], DEFAULT_MIN_GAP).is_err());
    }
}
