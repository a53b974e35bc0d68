//! Exact rational oracles shared by the integration tests.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use rug::{Float, Rational};
use std::collections::BTreeMap;

use muntz::exponents::{generate_exponents, ExponentKind, ExponentSequence};

pub fn seq(v: &[f64]) -> ExponentSequence {
    ExponentSequence::custom(v.to_vec(), 1e-6).unwrap()
}

pub fn power(p: f64, n: usize) -> ExponentSequence {
    generate_exponents(ExponentKind::Power, &BTreeMap::from([("p".to_string(), p)]), n).unwrap()
}

pub fn lacunary(q: f64, n: usize) -> ExponentSequence {
    generate_exponents(ExponentKind::Lacunary, &BTreeMap::from([("q".to_string(), q)]), n).unwrap()
}

/// `1/(λ_j + λ_k + 1)` in exact arithmetic.
pub fn rational_gram(lambda: &[f64]) -> Vec<Vec<Rational>> {
    let r: Vec<Rational> = lambda.iter().map(|&l| Rational::from_f64(l).unwrap()).collect();
    r.iter()
        .map(|a| r.iter().map(|b| Rational::from(1) / (Rational::from(a + b) + 1u32)).collect())
        .collect()
}

/// Determinant by Gaussian elimination with exact pivots.
pub fn lu_determinant(a: &[Vec<Rational>]) -> Rational {
    let mut m = a.to_vec();
    let n = m.len();
    let mut det = Rational::from(1);
    for k in 0..n {
        let p = (k..n).find(|&i| m[i][k] != 0).expect("singular");
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= &m[k][k];
        for i in k + 1..n {
            let f = Rational::from(&m[i][k] / &m[k][k]);
            for j in k..n {
                let t = Rational::from(&f * &m[k][j]);
                m[i][j] -= t;
            }
        }
    }
    det
}

/// Solve `a x = b` by Gauss–Jordan elimination.
pub fn lu_solve(a: &[Vec<Rational>], b: &[Rational]) -> Vec<Rational> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a.iter().zip(b).map(|(r, bi)| {
        let mut row = r.clone();
        row.push(bi.clone());
        row
    }).collect();
    for k in 0..n {
        let p = (k..n).find(|&i| m[i][k] != 0).expect("singular");
        m.swap(p, k);
        let piv = m[k][k].clone();
        for x in m[k].iter_mut() {
            *x /= &piv;
        }
        for i in 0..n {
            if i != k && m[i][k] != 0 {
                let f = m[i][k].clone();
                for j in k..=n {
                    let t = Rational::from(&f * &m[k][j]);
                    m[i][j] -= t;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n].clone()).collect()
}

pub fn lu_inverse(a: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    let cols: Vec<Vec<Rational>> = (0..n)
        .map(|j| lu_solve(a, &(0..n).map(|i| Rational::from((i == j) as u32)).collect::<Vec<_>>()))
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect()
}

/// `|x - r| / |r|`, or `|x|` when `r = 0`.
pub fn rel_err(x: &Float, r: &Rational) -> f64 {
    let p = x.prec() * 2;
    let rf = Float::with_val(p, r);
    let d = Float::with_val(p, x - &rf).abs();
    if *r == 0 {
        d.to_f64()
    } else {
        (d / rf.abs()).to_f64()
    }
}
