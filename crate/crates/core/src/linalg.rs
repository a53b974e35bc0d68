//! Dense linear algebra at working precision, sized for N up to a few dozen.

use rug::Float;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::error::{MuntzError, Result};
use crate::numeric::to_decimal;

/// Row-major real matrix of MPFR floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    prec: u32,
    data: Vec<Float>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, prec: u32) -> Self {
        Matrix {
            rows,
            cols,
            prec,
            data: vec![Float::new(prec); rows * cols],
        }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        let mut m = Matrix::zeros(n, n, prec);
        for i in 0..n {
            m.data[i * n + i] = Float::with_val(prec, 1);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, prec: u32, mut f: impl FnMut(usize, usize) -> Float) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(Float::with_val(prec, f(i, j)));
            }
        }
        Matrix { rows, cols, prec, data }
    }

    pub fn diagonal(values: &[Float], prec: u32) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n, prec);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = Float::with_val(prec, v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn get(&self, i: usize, j: usize) -> &Float {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Float) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<Float> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row(&self, i: usize) -> &[Float] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, self.prec, |i, j| self.get(j, i).clone())
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let p = self.prec;
        let mut out = Matrix::zeros(self.rows, other.cols, p);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = Float::with_val(p, a * other.get(k, j));
                    out.data[i * other.cols + j] += prod;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Float]) -> Vec<Float> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| dot(self.row(i), v, self.prec))
            .collect()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, self.prec, |i, j| {
            Float::with_val(self.prec, self.get(i, j) - other.get(i, j))
        })
    }

    pub fn scale(&self, k: &Float) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, self.prec, |i, j| {
            Float::with_val(self.prec, self.get(i, j) * k)
        })
    }

    pub fn max_abs(&self) -> Float {
        self.data
            .iter()
            .map(|x| Float::with_val(self.prec, x.abs_ref()))
            .fold(Float::new(self.prec), |a, b| if b > a { b } else { a })
    }

    /// `max |self - I|` entrywise.
    pub fn identity_residual(&self) -> Float {
        let id = Matrix::identity(self.rows, self.prec);
        self.sub(&id).max_abs()
    }

    pub fn frobenius_norm(&self) -> Float {
        let mut s = Float::new(self.prec);
        for x in &self.data {
            s += Float::with_val(self.prec, x.square_ref());
        }
        s.sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Lower-triangular `L` with `self = L Lᵀ`.
    pub fn cholesky(&self) -> Result<Matrix> {
        let n = self.rows;
        let p = self.prec;
        let mut l = Matrix::zeros(n, n, p);
        for j in 0..n {
            let mut d = self.get(j, j).clone();
            for k in 0..j {
                d -= Float::with_val(p, l.get(j, k).square_ref());
            }
            if !(d > 0) {
                return Err(MuntzError::NotPositiveDefinite(j + 1));
            }
            let djj = d.sqrt();
            for i in j + 1..n {
                let mut s = self.get(i, j).clone();
                for k in 0..j {
                    s -= Float::with_val(p, l.get(i, k) * l.get(j, k));
                }
                l.set(i, j, s / &djj);
            }
            l.set(j, j, djj);
        }
        Ok(l)
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_triangular_inverse(&self) -> Result<Matrix> {
        let n = self.rows;
        let p = self.prec;
        let mut inv = Matrix::zeros(n, n, p);
        for j in 0..n {
            if self.get(j, j).is_zero() {
                return Err(MuntzError::Degenerate(format!("zero pivot at {}", j + 1)));
            }
            for i in j..n {
                let mut s = if i == j { Float::with_val(p, 1) } else { Float::new(p) };
                for k in j..i {
                    s -= Float::with_val(p, self.get(i, k) * inv.get(k, j));
                }
                inv.set(i, j, s / self.get(i, i));
            }
        }
        Ok(inv)
    }

    /// Solve `self x = b` for symmetric positive definite `self`.
    pub fn solve_spd(&self, b: &[Float]) -> Result<Vec<Float>> {
        let l = self.cholesky()?;
        Ok(cholesky_solve(&l, b))
    }

    /// Solve `self x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[Float]) -> Result<Vec<Float>> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let p = self.prec;
        let mut a = self.clone();
        let mut x: Vec<Float> = b.iter().map(|v| Float::with_val(p, v)).collect();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a.get(i, k).cmp_abs(a.get(j, k)).unwrap())
                .unwrap();
            if a.get(piv, k).is_zero() {
                return Err(MuntzError::Degenerate(format!("singular matrix at column {}", k + 1)));
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                x.swap(k, piv);
            }
            for i in k + 1..n {
                let f = Float::with_val(p, a.get(i, k) / a.get(k, k));
                if f.is_zero() {
                    continue;
                }
                for j in k..n {
                    let d = Float::with_val(p, &f * a.get(k, j));
                    a.data[i * n + j] -= d;
                }
                let d = Float::with_val(p, &f * &x[k]);
                x[i] -= d;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i].clone();
            for j in i + 1..n {
                s -= Float::with_val(p, a.get(i, j) * &x[j]);
            }
            x[i] = s / a.get(i, i);
        }
        Ok(x)
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(to_decimal).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

pub fn dot(a: &[Float], b: &[Float], prec: u32) -> Float {
    let mut s = Float::new(prec);
    for (x, y) in a.iter().zip(b) {
        s += Float::with_val(prec, x * y);
    }
    s
}

/// Solve `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[Float]) -> Vec<Float> {
    let n = l.rows();
    let p = l.prec();
    let mut y: Vec<Float> = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = Float::with_val(p, &b[i]);
        for k in 0..i {
            s -= Float::with_val(p, l.get(i, k) * &y[k]);
        }
        y.push(s / l.get(i, i));
    }
    let mut x = vec![Float::new(p); n];
    for i in (0..n).rev() {
        let mut s = y[i].clone();
        for k in i + 1..n {
            s -= Float::with_val(p, l.get(k, i) * &x[k]);
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<Float> {
    let n = a.rows();
    let p = a.prec();
    let mut m = a.clone();
    let eps = Float::with_val(p, Float::i_exp(1, -(p as i32) + 4));
    let scale = m.frobenius_norm();
    for _sweep in 0..64 {
        let mut off = Float::new(p);
        for i in 0..n {
            for j in i + 1..n {
                off += Float::with_val(p, m.get(i, j).square_ref());
            }
        }
        let off = off.sqrt();
        if off <= Float::with_val(p, &eps * &scale) {
            break;
        }
        for i in 0..n {
            for j in i + 1..n {
                if m.get(i, j).is_zero() {
                    continue;
                }
                rotate(&mut m, i, j);
            }
        }
    }
    let mut eig: Vec<Float> = (0..n).map(|i| m.get(i, i).clone()).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

fn rotate(m: &mut Matrix, pi: usize, qi: usize) {
    let p = m.prec();
    let n = m.rows();
    let apq = m.get(pi, qi).clone();
    let app = m.get(pi, pi).clone();
    let aqq = m.get(qi, qi).clone();
    let tau = Float::with_val(p, &aqq - &app) / Float::with_val(p, &apq * 2u32);
    let root = Float::with_val(p, tau.square_ref()) + 1u32;
    let root = root.sqrt();
    let t = if tau >= 0 {
        Float::with_val(p, 1) / (Float::with_val(p, &tau) + &root)
    } else {
        Float::with_val(p, -1) / (Float::with_val(p, -&tau) + &root)
    };
    let c = Float::with_val(p, 1) / (Float::with_val(p, t.square_ref()) + 1u32).sqrt();
    let s = Float::with_val(p, &t * &c);
    for k in 0..n {
        let akp = m.get(k, pi).clone();
        let akq = m.get(k, qi).clone();
        let new_p = Float::with_val(p, &c * &akp) - Float::with_val(p, &s * &akq);
        let new_q = Float::with_val(p, &s * &akp) + Float::with_val(p, &c * &akq);
        m.set(k, pi, new_p);
        m.set(k, qi, new_q);
    }
    for k in 0..n {
        let apk = m.get(pi, k).clone();
        let aqk = m.get(qi, k).clone();
        let new_p = Float::with_val(p, &c * &apk) - Float::with_val(p, &s * &aqk);
        let new_q = Float::with_val(p, &s * &apk) + Float::with_val(p, &c * &aqk);
        m.set(pi, k, new_p);
        m.set(qi, k, new_q);
    }
    // the rotation annihilates (p, q) exactly in exact arithmetic
    m.set(pi, qi, Float::new(p));
    m.set(qi, pi, Float::new(p));
}

/// Singular values of a real matrix, ascending.
pub fn singular_values(a: &Matrix) -> Vec<Float> {
    let gram = a.transpose().mul(a);
    symmetric_eigenvalues(&gram)
        .into_iter()
        .map(|x| if x > 0 { x.sqrt() } else { Float::new(a.prec()) })
        .collect()
}

/// Complex matrix stored as `re + i·im`.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub re: Matrix,
    pub im: Matrix,
}

impl CMatrix {
    pub fn from_real(re: Matrix) -> Self {
        let im = Matrix::zeros(re.rows(), re.cols(), re.prec());
        CMatrix { re, im }
    }

    pub fn rows(&self) -> usize {
        self.re.rows()
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        let re = self.re.mul(&other.re).sub(&self.im.mul(&other.im));
        let a = self.re.mul(&other.im);
        let b = self.im.mul(&other.re);
        let im = Matrix::from_fn(a.rows(), a.cols(), a.prec(), |i, j| {
            Float::with_val(a.prec(), a.get(i, j) + b.get(i, j))
        });
        CMatrix { re, im }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            re: self.re.sub(&other.re),
            im: self.im.sub(&other.im),
        }
    }

    pub fn adjoint(&self) -> CMatrix {
        let p = self.prec();
        let minus_one = Float::with_val(p, -1);
        CMatrix {
            re: self.re.transpose(),
            im: self.im.transpose().scale(&minus_one),
        }
    }

    pub fn frobenius_norm(&self) -> Float {
        let a = self.re.frobenius_norm();
        let b = self.im.frobenius_norm();
        Float::with_val(self.prec(), a.hypot_ref(&b))
    }

    /// Real symmetric `[[A, -B], [B, A]]` for Hermitian `A + iB`; each eigenvalue appears twice.
    fn hermitian_embedding(&self) -> Matrix {
        let n = self.rows();
        let p = self.prec();
        Matrix::from_fn(2 * n, 2 * n, p, |i, j| {
            let (bi, ii) = (i / n, i % n);
            let (bj, jj) = (j / n, j % n);
            match (bi, bj) {
                (0, 0) | (1, 1) => self.re.get(ii, jj).clone(),
                (0, 1) => Float::with_val(p, -self.im.get(ii, jj)),
                _ => self.im.get(ii, jj).clone(),
            }
        })
    }

    /// Singular values, ascending.
    pub fn singular_values(&self) -> Vec<Float> {
        let h = self.adjoint().mul(self);
        let eig = symmetric_eigenvalues(&h.hermitian_embedding());
        eig.into_iter()
            .step_by(2)
            .map(|x| if x > 0 { x.sqrt() } else { Float::new(self.prec()) })
            .collect()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> Float {
        self.singular_values()
            .pop()
            .unwrap_or_else(|| Float::new(self.prec()))
    }
}
