use std::fmt;

use super::Complex;
use crate::error::{Error, Result};

/// Condition-number estimate above which [`pseudo_inverse`] refuses to invert.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Dense row-major complex matrix. Column vectors are `n x 1` matrices.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} entries supplied for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(entries: Vec<Complex>) -> Self {
        Self { rows: entries.len(), cols: 1, data: entries }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of column `c` as an `rows x 1` matrix.
    pub fn col(&self, c: usize) -> CMatrix {
        CMatrix::column((0..self.rows).map(|r| self.get(r, c)).collect())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm (Euclidean norm for vectors).
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        matmul(self, rhs)
    }

    pub fn hermitian(&self) -> CMatrix {
        hermitian(self)
    }

    /// `self^H * v` for two column vectors of equal length.
    pub fn inner(&self, v: &CMatrix) -> Complex {
        debug_assert_eq!(self.cols, 1);
        debug_assert_eq!(v.cols, 1);
        self.data.iter().zip(&v.data).map(|(a, b)| a.conj() * b).sum()
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self.get(r, c);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!("cannot multiply {}x{} by {}x{}", a.rows, a.cols, b.rows, b.cols)));
    }
    let mut out = CMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Conjugate transpose.
pub fn hermitian(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.cols, a.rows, |r, c| a.get(c, r).conj())
}

/// Moore-Penrose pseudo-inverse of a full-rank matrix.
///
/// The tall one of `A` and `A^H` is factored as `Q R` (Gram-Schmidt with one
/// reorthogonalisation pass), so accuracy follows the condition number of
/// `A` itself rather than its square. The ratio of the largest to the
/// smallest `|R_ii|` estimates that condition number; anything above
/// [`SINGULAR_CONDITION`] is rejected, as is a diagonal entry lost in
/// round-off.
pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::Shape("pseudo-inverse of an empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::Domain("pseudo-inverse of a non-finite matrix".into()));
    }
    if a.rows <= a.cols {
        // A^H = Q R  =>  pinv(A) = Q R^-H = (R^-1 Q^H)^H
        Ok(hermitian(&qr_solve(&hermitian(a))?))
    } else {
        // A = Q R  =>  pinv(A) = R^-1 Q^H
        qr_solve(a)
    }
}

/// `R^-1 Q^H` for the thin QR factorisation of a tall full-rank `b`.
fn qr_solve(b: &CMatrix) -> Result<CMatrix> {
    let (m, n) = b.shape();
    let cols: Vec<Vec<Complex>> = (0..n).map(|j| (0..m).map(|i| b.get(i, j)).collect()).collect();
    let scale = cols.iter().map(|c| norm_of(c)).fold(0.0, f64::max);
    let floor = 8.0 * m.max(n) as f64 * f64::EPSILON * scale;
    let mut q: Vec<Vec<Complex>> = Vec::with_capacity(n);
    let mut r = CMatrix::zeros(n, n);
    for (j, col) in cols.into_iter().enumerate() {
        let mut v = col;
        for _pass in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c: Complex = qk.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * qi;
                }
                r.set(k, j, r.get(k, j) + c);
            }
        }
        let d = norm_of(&v);
        if !(d > floor) {
            return Err(Error::Singular(f64::INFINITY));
        }
        r.set(j, j, Complex::new(d, 0.0));
        v.iter_mut().for_each(|x| *x /= d);
        q.push(v);
    }
    let (lo, hi) = (0..n).map(|i| r.get(i, i).re).fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let cond = hi / lo;
    if !(cond <= SINGULAR_CONDITION) {
        return Err(Error::Singular(cond));
    }
    // Back substitution R X = Q^H, one column of Q^H at a time.
    let mut x = CMatrix::zeros(n, m);
    for c in 0..m {
        for i in (0..n).rev() {
            let mut s = q[i][c].conj();
            for k in (i + 1)..n {
                s -= r.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / r.get(i, i));
        }
    }
    Ok(x)
}

fn norm_of(v: &[Complex]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
