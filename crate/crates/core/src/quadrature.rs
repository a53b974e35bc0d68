//! Adaptive Gauss–Legendre quadrature on [0, 1] at working precision.
//!
//! The interval is first cut into panels that shrink geometrically toward
//! `t = 0`, where integrands behave like `t^{λ_1}` with possibly fractional
//! `λ_1`. Each panel is then bisected until the one-panel and two-half-panel
//! rules agree.

use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{MuntzError, Result};
use crate::numeric::{scaled_tolerance, CFloat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre points per panel.
    pub nodes: usize,
    /// Absolute error target for the whole interval.
    pub tolerance: f64,
    pub max_depth: u32,
    /// Number of dyadic panels `[2^-k-1, 2^-k]` laid out before adapting.
    pub zero_panels: u32,
}

impl QuadratureSpec {
    pub fn for_precision(bits: u32) -> Self {
        QuadratureSpec {
            nodes: 32,
            tolerance: scaled_tolerance(bits, 8),
            max_depth: 240,
            zero_panels: 8,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureResult {
    pub values: Vec<CFloat>,
    /// Sum over panels of the largest component disagreement.
    pub error: f64,
    pub panels: usize,
}

type Rule = Arc<(Vec<Float>, Vec<Float>)>;

fn rule_cache() -> &'static Mutex<HashMap<(usize, u32), Rule>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize, prec: u32) -> Rule {
    if let Some(rule) = rule_cache().lock().unwrap().get(&(n, prec)) {
        return rule.clone();
    }
    let work = prec + 32;
    let pi = Float::with_val(work, Constant::Pi);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let tiny = Float::with_val(work, Float::i_exp(1, -(work as i32) + 8));
    for i in 1..=n {
        let guess = Float::with_val(work, &pi * (i as f64 - 0.25)) / (n as f64 + 0.5);
        let mut x = guess.cos();
        let mut dp = Float::new(work);
        for _ in 0..200 {
            let (p, d) = legendre(n, &x);
            dp = d;
            let dx = Float::with_val(work, &p / &dp);
            x -= &dx;
            if dx.abs() < tiny {
                break;
            }
        }
        let (_, d) = legendre(n, &x);
        dp.clone_from(&d);
        let one_minus = Float::with_val(work, 1) - Float::with_val(work, x.square_ref());
        let w = Float::with_val(work, 2) / (one_minus * Float::with_val(work, dp.square_ref()));
        nodes.push(Float::with_val(prec, &x));
        weights.push(Float::with_val(prec, &w));
    }
    let rule = Arc::new((nodes, weights));
    rule_cache().lock().unwrap().insert((n, prec), rule.clone());
    rule
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: &Float) -> (Float, Float) {
    let p = x.prec();
    let mut p0 = Float::with_val(p, 1);
    let mut p1 = x.clone();
    for k in 2..=n {
        let a = Float::with_val(p, x * &p1) * (2 * k - 1) as u32;
        let b = Float::with_val(p, &p0 * (k - 1) as u32);
        let p2 = (a - b) / k as u32;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (Float::with_val(p, 1), Float::new(p));
    }
    let num = Float::with_val(p, x * &p1) - &p0;
    let den = Float::with_val(p, x.square_ref()) - 1u32;
    let d = num * n as u32 / den;
    (p1, d)
}

fn panel(f: &dyn Fn(&Float) -> Vec<CFloat>, dim: usize, a: &Float, b: &Float, rule: &Rule) -> Vec<CFloat> {
    let p = a.prec();
    let half = Float::with_val(p, b - a) / 2u32;
    let mid = Float::with_val(p, a + b) / 2u32;
    let mut acc = vec![CFloat::zero(p); dim];
    for (x, w) in rule.0.iter().zip(&rule.1) {
        let t = Float::with_val(p, &half * x) + &mid;
        let vals = f(&t);
        debug_assert_eq!(vals.len(), dim);
        for (s, v) in acc.iter_mut().zip(&vals) {
            s.add_scaled(v, w);
        }
    }
    acc.iter().map(|s| s.scale(&half)).collect()
}

fn max_diff(a: &[CFloat], b: &[CFloat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.sub(y).abs().to_f64())
        .fold(0.0, f64::max)
}

fn max_abs(a: &[CFloat]) -> f64 {
    a.iter().map(|x| x.abs().to_f64()).fold(0.0, f64::max)
}

/// Integrate a vector-valued integrand over [0, 1].
pub fn integrate_vec(
    f: &dyn Fn(&Float) -> Vec<CFloat>,
    dim: usize,
    spec: &QuadratureSpec,
    prec: u32,
) -> Result<QuadratureResult> {
    let rule = gauss_legendre(spec.nodes, prec);
    let rounding = 2f64.powi(-(prec as i32) + 12);
    let mut total = vec![CFloat::zero(prec); dim];
    let mut error = 0.0;
    let mut panels = 0usize;

    let mut stack: Vec<(Float, Float, Vec<CFloat>, u32)> = Vec::new();
    let mut hi = Float::with_val(prec, 1);
    for _ in 0..spec.zero_panels {
        let lo = Float::with_val(prec, &hi / 2u32);
        let est = panel(f, dim, &lo, &hi, &rule);
        stack.push((lo.clone(), hi, est, 0));
        hi = lo;
    }
    let lo = Float::new(prec);
    let est = panel(f, dim, &lo, &hi, &rule);
    stack.push((lo, hi, est, 0));

    while let Some((a, b, whole, depth)) = stack.pop() {
        let mid = Float::with_val(prec, &a + &b) / 2u32;
        let left = panel(f, dim, &a, &mid, &rule);
        let right = panel(f, dim, &mid, &b, &rule);
        let refined: Vec<CFloat> = left.iter().zip(&right).map(|(l, r)| l.add(r)).collect();
        let diff = max_diff(&whole, &refined);
        let width = Float::with_val(prec, &b - &a).to_f64();
        let accept = diff <= spec.tolerance * width || diff <= rounding * max_abs(&refined);
        if accept || depth >= spec.max_depth {
            for (s, v) in total.iter_mut().zip(&refined) {
                *s = s.add(v);
            }
            error += diff;
            panels += 1;
        } else {
            stack.push((a, mid.clone(), left, depth + 1));
            stack.push((mid, b, right, depth + 1));
        }
    }
    if error > spec.tolerance {
        return Err(MuntzError::Quadrature {
            estimate: total.first().map(|v| v.to_string()).unwrap_or_default(),
            error,
            tolerance: spec.tolerance,
        });
    }
    Ok(QuadratureResult {
        values: total,
        error,
        panels,
    })
}

/// Scalar convenience wrapper over [`integrate_vec`].
pub fn integrate(f: &dyn Fn(&Float) -> CFloat, spec: &QuadratureSpec, prec: u32) -> Result<(CFloat, f64)> {
    let r = integrate_vec(&|t| vec![f(t)], 1, spec, prec)?;
    Ok((r.values.into_iter().next().unwrap(), r.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::pow_real;
    use rug::ops::Pow;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let rule = gauss_legendre(8, 128);
        let sum_w: Float = rule.1.iter().fold(Float::new(128), |a, w| a + w);
        assert!((sum_w.to_f64() - 2.0).abs() < 1e-30);
        // ∫_{-1}^{1} x^14 = 2/15
        let mut s = Float::new(128);
        for (x, w) in rule.0.iter().zip(&rule.1) {
            s += Float::with_val(128, x.clone().pow(14u32) * w);
        }
        let want = Float::with_val(128, 2) / 15u32;
        assert!(Float::with_val(128, &s - &want).abs() < 1e-35);
    }

    #[test]
    fn integrates_fractional_power_at_zero() {
        let spec = QuadratureSpec::for_precision(128);
        let (v, err) = integrate(&|t| CFloat::real(pow_real(t, 0.5)), &spec, 128).unwrap();
        // ∫ t^{1/2} = 2/3
        let want = Float::with_val(128, 2) / 3u32;
        assert!(Float::with_val(128, &v.re - &want).abs() < 1e-15);
        assert!(err <= spec.tolerance);
    }

    #[test]
    fn basic_integrals() {
        let spec = QuadratureSpec::for_precision(128);
        let (v, _) = integrate(&|t| CFloat::real(t.clone()), &spec, 128).unwrap();
        assert!((v.re.to_f64() - 0.5).abs() < 1e-15);
        let (v, _) = integrate(&|t| CFloat::real(pow_real(t, 900.0)), &spec, 128).unwrap();
        assert!((v.re.to_f64() - 1.0 / 901.0).abs() < 1e-15);
    }

    #[test]
    fn reports_failure_when_depth_exhausted() {
        let spec = QuadratureSpec { nodes: 2, tolerance: 1e-30, max_depth: 2, zero_panels: 0 };
        let err = integrate(&|t| CFloat::real(Float::with_val(t.prec(), t.cos_ref()) * 50u32), &spec, 128);
        assert!(matches!(err, Err(MuntzError::Quadrature { .. })));
    }
}
