mod common;

use common::*;
use muntz::biorthogonal::dual_family;
use muntz::gram::{cauchy_determinant, cauchy_inverse, distance, gram_matrix};
use rug::Rational;

fn families() -> Vec<Vec<f64>> {
    let mut out = vec![
        vec![1.0, 2.0],
        vec![0.5, 1.5, 2.5, 3.25],
        vec![0.25, 1.0, 3.0, 7.5, 10.0, 12.0, 20.0, 33.0],
    ];
    for n in 1..=8 {
        out.push(power(2.0, n).values().to_vec());
    }
    out.push(lacunary(2.0, 8).values().to_vec());
    out
}

#[test]
fn determinant_matches_exact_elimination() {
    for v in families() {
        let g = gram_matrix(&seq(&v), 256).unwrap();
        let det = cauchy_determinant(&g).unwrap();
        let want = lu_determinant(&rational_gram(&v));
        let e = rel_err(&det, &want);
        assert!(e < 1e-25, "{v:?}: rel err {e:e}");
    }
}

#[test]
fn inverse_matches_exact_elimination() {
    for v in families() {
        let g = gram_matrix(&seq(&v), 256).unwrap();
        let inv = cauchy_inverse(&g).unwrap();
        let want = lu_inverse(&rational_gram(&v));
        let scale = want.iter().flatten().map(|r| r.to_f64().abs()).fold(0.0, f64::max);
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                let d = (inv.matrix.get(i, j).clone() - rug::Float::with_val(512, w)).abs().to_f64();
                assert!(d / scale < 1e-25, "{v:?} ({i},{j}): {:e}", d / scale);
            }
        }
    }
}

#[test]
fn distance_is_ratio_of_determinants() {
    // D_n² = det G / det G with row and column n removed
    for v in families().into_iter().filter(|v| v.len() >= 2) {
        let g = rational_gram(&v);
        let full = lu_determinant(&g);
        for n in 1..=v.len() {
            let minor: Vec<Vec<Rational>> = g
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != n - 1)
                .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != n - 1).map(|(_, x)| x.clone()).collect())
                .collect();
            let want = Rational::from(&full / &lu_determinant(&minor));
            let d = distance(&seq(&v), n, v.len(), 256).unwrap().distance;
            let e = rel_err(&d.square(), &want);
            assert!(e < 1e-25, "{v:?} n={n}: {e:e}");
        }
    }
}

#[test]
fn dual_coefficients_solve_the_gram_system() {
    for v in families() {
        let fam = dual_family(&seq(&v), v.len(), 256).unwrap();
        let g = rational_gram(&v);
        for n in 1..=v.len() {
            let e: Vec<Rational> = (0..v.len()).map(|i| Rational::from((i + 1 == n) as u32)).collect();
            let want = lu_solve(&g, &e);
            let got = fam.dual_coefficients(n).unwrap();
            let scale = want.iter().map(|r| r.to_f64().abs()).fold(0.0, f64::max);
            for (x, w) in got.iter().zip(&want) {
                let d = (x.clone() - rug::Float::with_val(512, w)).abs().to_f64();
                assert!(d / scale < 1e-25);
            }
            assert_eq!(fam.exact_inverse().unwrap().iter().map(|r| r[n - 1].clone()).collect::<Vec<_>>(), want);
        }
    }
}
