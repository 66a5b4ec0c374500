//! Dense complex matrices: arithmetic, norms, inverses, spectra and numerical ranges.
//!
//! Storage is an `nalgebra::DMatrix<Complex64>`; the public surface speaks in
//! row-major terms to match the JSON exchange format.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Tolerances shared by the inverse/resolvent routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixTolerances {
    /// Reject a shift when `sigma_min(zI - A) <= singular_floor * ||zI - A||`.
    pub singular_floor: f64,
    /// Accept `R` only when `||(zI - A) R - I|| <= residual * ||zI - A|| * ||R||`.
    pub residual: f64,
}

impl Default for MatrixTolerances {
    fn default() -> Self {
        Self { singular_floor: 1e-13, residual: 1e-10 }
    }
}

/// Dense complex matrix with explicit dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { data: DMatrix::from_row_slice(rows, cols, &entries) })
    }

    /// Builds a matrix from row-major real entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self { data: DMatrix::from_fn(rows, cols, f) }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { data: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    pub fn scalar(z: Complex64) -> Self {
        Self::from_diagonal(&[z])
    }

    pub fn from_nalgebra(data: DMatrix<Complex64>) -> Self {
        Self { data }
    }

    pub fn as_nalgebra(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_nalgebra(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(Error::NotSquare { rows: self.rows(), cols: self.cols() })
        }
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self { data: self.data.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        Self { data: self.data.transpose() }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self { data: &self.data * z }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(Complex64::new(x, 0.0))
    }

    /// Returns `self + z I`.
    pub fn shifted(&self, z: Complex64) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows().min(self.cols()) {
            out.data[(i, i)] += z;
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows().min(self.cols())).map(|i| self.data[(i, i)]).collect()
    }

    /// Copies the `nr x nc` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self { data: self.data.view((r0, c0), (nr, nc)).into_owned() }
    }

    /// Assembles `[[a11, a12], [a21, a22]]`.
    pub fn from_blocks(a11: &Self, a12: &Self, a21: &Self, a22: &Self) -> Result<Self> {
        let (r1, r2) = (a11.rows(), a21.rows());
        let (c1, c2) = (a11.cols(), a12.cols());
        if a12.rows() != r1 || a22.rows() != r2 || a21.cols() != c1 || a22.cols() != c2 {
            return Err(Error::Dimension("inconsistent 2x2 block layout".into()));
        }
        let mut data = DMatrix::zeros(r1 + r2, c1 + c2);
        data.view_mut((0, 0), (r1, c1)).copy_from(&a11.data);
        data.view_mut((0, c1), (r1, c2)).copy_from(&a12.data);
        data.view_mut((r1, 0), (r2, c1)).copy_from(&a21.data);
        data.view_mut((r1, c1), (r2, c2)).copy_from(&a22.data);
        Ok(Self { data })
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self { data: self.data.kronecker(&other.data) }
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        Self { data: DMatrix::from_column_slice(r * c, 1, self.data.as_slice()) }
    }

    /// Inverse of [`ComplexMatrix::vec`].
    pub fn unvec(v: &Self, rows: usize, cols: usize) -> Result<Self> {
        if v.cols() != 1 || v.rows() != rows * cols {
            return Err(Error::Dimension("unvec length mismatch".into()));
        }
        Ok(Self { data: DMatrix::from_column_slice(rows, cols, v.data.as_slice()) })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.data.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        if self.data.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return 0.0;
        }
        self.singular_values()[0]
    }

    /// Smallest singular value (square matrices give `1/||A^{-1}||`).
    pub fn sigma_min(&self) -> f64 {
        *self.singular_values().last().unwrap_or(&0.0)
    }

    pub fn hermitian_part(&self) -> Result<Self> {
        self.ensure_square()?;
        Ok(Self { data: (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0) })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && (&self.data - self.data.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    /// `ln |det A|` via LU; `-inf` for exactly singular input.
    pub fn log_abs_det(&self) -> Result<f64> {
        self.ensure_square()?;
        let lu = self.data.clone().lu();
        let u = lu.u();
        Ok((0..u.nrows()).map(|i| u[(i, i)].norm().ln()).sum())
    }

    /// LU inverse without conditioning checks; fails only on exact singularity or overflow.
    pub fn inverse_unchecked(&self) -> Result<Self> {
        self.ensure_square()?;
        match self.data.clone().lu().try_inverse() {
            Some(inv) if inv.iter().all(|z| z.is_finite()) => Ok(Self { data: inv }),
            _ => Err(Error::SingularShift { sigma_min: 0.0 }),
        }
    }

    /// Inverse with the default singular floor and residual check.
    pub fn inverse(&self) -> Result<Self> {
        self.inverse_with(&MatrixTolerances::default())
    }

    pub fn inverse_with(&self, tol: &MatrixTolerances) -> Result<Self> {
        let n = self.ensure_square()?;
        let singular = || Error::SingularShift { sigma_min: self.sigma_min() };
        let inv = match self.data.clone().lu().try_inverse() {
            Some(inv) if inv.iter().all(|z| z.is_finite()) => Self { data: inv },
            _ => return Err(singular()),
        };
        // Frobenius norms give cheap sufficient conditions; fall back to SVDs only
        // when they are inconclusive.
        let fro_a = self.frobenius_norm();
        let fro_r = inv.frobenius_norm();
        let nf = n as f64;
        if 1.0 / fro_r <= tol.singular_floor * fro_a {
            let smin = self.sigma_min();
            if smin <= tol.singular_floor * self.operator_norm() {
                return Err(Error::SingularShift { sigma_min: smin });
            }
        }
        let resid = (&self.data * &inv.data - DMatrix::<Complex64>::identity(n, n))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid > tol.residual * fro_a * fro_r / nf {
            let r_op = inv.operator_norm();
            let e_op = (self * &inv - Self::identity(n)).operator_norm();
            let scale = self.operator_norm() * r_op;
            if e_op > tol.residual * scale {
                return Err(Error::Residual { residual: e_op / scale });
            }
        }
        Ok(inv)
    }

    /// Solves `self * X = rhs` by LU with a relative residual check.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        self.ensure_square()?;
        if rhs.rows() != self.rows() {
            return Err(Error::Dimension("solve: row mismatch".into()));
        }
        let x = self
            .data
            .clone()
            .lu()
            .solve(&rhs.data)
            .filter(|x| x.iter().all(|z| z.is_finite()))
            .ok_or_else(|| Error::SingularShift { sigma_min: self.sigma_min() })?;
        let x = Self { data: x };
        let resid = (self * &x - rhs).frobenius_norm();
        let scale = self.frobenius_norm() * x.frobenius_norm() + rhs.frobenius_norm();
        if resid > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Residual { residual: resid / scale });
        }
        Ok(x)
    }

    /// Eigenvalues of a Hermitian matrix in ascending order with orthonormal eigenvectors
    /// (column `j` belongs to eigenvalue `j`).
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, Self)> {
        self.ensure_square()?;
        let h = self.hermitian_part()?;
        let eig = h.data.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let n = self.rows();
        let vectors = Self::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok((values, vectors))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let h = self.hermitian_part()?;
        let mut v: Vec<f64> = h.data.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        Ok(v)
    }

    /// Eigenvalues via a complex Schur form, checked by reconstruction.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        Ok(self.schur()?.1)
    }

    /// Eigenvalues plus, when numerically diagonalizable, unit-column eigenvectors and κ(V).
    pub fn spectral_data(&self) -> Result<SpectralData> {
        let ((q, t), values) = self.schur()?;
        let n = self.rows();
        let triangular = (1..n).all(|i| t.data[(i, i - 1)] == Complex64::new(0.0, 0.0));
        if !triangular {
            return Ok(SpectralData { eigenvalues: values, right_eigenvectors: None, kappa_v: None });
        }
        let tnorm = t.frobenius_norm().max(f64::MIN_POSITIVE);
        let small = f64::EPSILON * tnorm;
        let mut y = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let lam = t.data[(i, i)];
            y[(i, i)] = Complex64::new(1.0, 0.0);
            for j in (0..i).rev() {
                let mut s = Complex64::new(0.0, 0.0);
                for l in (j + 1)..=i {
                    s += t.data[(j, l)] * y[(l, i)];
                }
                let mut d = t.data[(j, j)] - lam;
                if d.norm() < small {
                    d = Complex64::new(small, 0.0);
                }
                y[(j, i)] = -s / d;
            }
        }
        let mut v = &q.data * y;
        for mut col in v.column_iter_mut() {
            let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            col /= Complex64::new(nrm, 0.0);
        }
        let v = Self { data: v };
        let sv = v.singular_values();
        let kappa = sv[0] / sv[n - 1];
        let lam = Self::from_diagonal(&values);
        let resid = (self * &v - &v * &lam).frobenius_norm();
        let ok = kappa.is_finite() && kappa < 1e12 && resid <= 1e-8 * self.frobenius_norm().max(1.0);
        if ok {
            Ok(SpectralData { eigenvalues: values, right_eigenvectors: Some(v), kappa_v: Some(kappa.max(1.0)) })
        } else {
            Ok(SpectralData { eigenvalues: values, right_eigenvectors: None, kappa_v: None })
        }
    }

    fn schur(&self) -> Result<((Self, Self), Vec<Complex64>)> {
        let n = self.ensure_square()?;
        let schur = nalgebra::Schur::try_new(self.data.clone(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NoConvergence { method: "schur".into(), iterations: 10_000 })?;
        let (q, t) = schur.unpack();
        let (q, t) = (Self { data: q }, Self { data: t });
        let resid = (&(&q * &t) * &q.adjoint() - self).frobenius_norm();
        if resid > 1e-10 * self.frobenius_norm().max(1.0) {
            return Err(Error::Residual { residual: resid });
        }
        let mut values = Vec::with_capacity(n);
        let tol = f64::EPSILON * t.frobenius_norm();
        let mut i = 0;
        while i < n {
            if i + 1 < n && t.data[(i + 1, i)].norm() > tol {
                let (a, b, c, d) = (t.data[(i, i)], t.data[(i, i + 1)], t.data[(i + 1, i)], t.data[(i + 1, i + 1)]);
                let tr = a + d;
                let det = a * d - b * c;
                let disc = (tr * tr - det * 4.0).sqrt();
                values.push((tr + disc) / 2.0);
                values.push((tr - disc) / 2.0);
                i += 2;
            } else {
                values.push(t.data[(i, i)]);
                i += 1;
            }
        }
        Ok(((q, t), values))
    }
}

/// Eigen-information for a square matrix; eigenvectors only when numerically diagonalizable.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub eigenvalues: Vec<Complex64>,
    pub right_eigenvectors: Option<ComplexMatrix>,
    pub kappa_v: Option<f64>,
}

impl SpectralData {
    /// `min |Re λ|` over the spectrum.
    pub fn imaginary_axis_gap(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min)
    }
}

pub fn hermitian_part(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.hermitian_part()
}

pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    a.operator_norm()
}

/// `(zI - A)^{-1}` with the default tolerances.
pub fn resolvent(a: &ComplexMatrix, z: Complex64) -> Result<ComplexMatrix> {
    resolvent_with(a, z, &MatrixTolerances::default())
}

pub fn resolvent_with(a: &ComplexMatrix, z: Complex64, tol: &MatrixTolerances) -> Result<ComplexMatrix> {
    a.ensure_square()?;
    (-a).shifted(z).inverse_with(tol)
}

/// `λ_min(H(e^{iθ} A))`, i.e. `min Re` over `W(e^{iθ} A)`.
pub fn numerical_range_margin(a: &ComplexMatrix, angle: f64) -> Result<f64> {
    let rotated = a.scale(Complex64::from_polar(1.0, angle));
    Ok(rotated.hermitian_eigenvalues()?[0])
}

/// Support points `x* A x` of `W(A)` for `n_angles` uniformly spaced rotations.
pub fn numerical_range_boundary(a: &ComplexMatrix, n_angles: usize) -> Result<Vec<Complex64>> {
    a.ensure_square()?;
    if n_angles < 8 {
        return Err(Error::InvalidParameter(format!("n_angles = {n_angles} < 8")));
    }
    let n = a.rows();
    (0..n_angles)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n_angles as f64;
            let (_, vecs) = a.scale(Complex64::from_polar(1.0, theta)).hermitian_eigen()?;
            let x = vecs.block(0, 0, n, 1);
            let ax = a * &x;
            Ok((0..n).map(|i| x[(i, 0)].conj() * ax[(i, 0)]).sum())
        })
        .collect()
}

/// `i·t` as a complex number.
pub fn imag(t: f64) -> Complex64 {
    I * t
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.data[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Complex64 {
        &mut self.data[idx]
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $m(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { data: &self.data $op &rhs.data }
            }
        }
        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $m(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { data: self.data $op rhs.data }
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $m(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { data: self.data $op &rhs.data }
            }
        }
        impl $tr<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $m(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { data: &self.data $op rhs.data }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.data += &rhs.data;
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.data -= &rhs.data;
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { data: -&self.data }
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { data: -self.data }
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            rows: self.rows(),
            cols: self.cols(),
            entries: self.entries().into_iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = MatrixJson::deserialize(d)?;
        let entries = m.entries.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        ComplexMatrix::new(m.rows, m.cols, entries).map_err(serde::de::Error::custom)
    }
}
