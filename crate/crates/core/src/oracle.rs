//! Dense reference solvers used as ground truth in verification runs.
//!
//! None of these routines share code paths with the quadrature solvers: the sign
//! function comes from a scaled Newton iteration, Sylvester solutions from the
//! vectorized Kronecker system, and square roots from Denman-Beavers.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Residual threshold above which an oracle result is rejected.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
/// Spectra with `|Re λ| < AXIS_FLOOR * ||M||` are treated as touching the imaginary axis.
pub const AXIS_FLOOR: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: ComplexMatrix,
    pub method: String,
    pub residual: f64,
}

fn accept(value: ComplexMatrix, method: &str, residual: f64) -> Result<OracleResult> {
    if !(residual <= ACCEPT_RESIDUAL) {
        return Err(Error::OracleRejected { method: method.into(), residual });
    }
    Ok(OracleResult { value, method: method.into(), residual })
}

fn check_axis_gap(m: &ComplexMatrix) -> Result<()> {
    let scale = m.operator_norm();
    let min_re = m.eigenvalues()?.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    if min_re < AXIS_FLOOR * scale || scale == 0.0 {
        return Err(Error::ImaginaryAxis { min_re });
    }
    Ok(())
}

/// Matrix sign function by Newton iteration with determinant scaling.
pub fn sign_dense(m: &ComplexMatrix) -> Result<OracleResult> {
    let n = m.ensure_square()?;
    check_axis_gap(m)?;
    let mut s = m.clone();
    let mut scaling = true;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let inv = s.inverse_unchecked()?;
        let mu = if scaling { (-s.log_abs_det()? / n as f64).exp() } else { 1.0 };
        let next = (s.scale_real(mu) + inv.scale_real(1.0 / mu)).scale_real(0.5);
        let diff = (&next - &s).frobenius_norm() / next.frobenius_norm();
        s = next;
        if diff < 1e-2 {
            scaling = false;
        }
        if converged {
            break;
        }
        if diff < 1e-13 {
            // one extra step to land on the quadratically convergent fixed point
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { method: "newton_sign".into(), iterations: MAX_ITERATIONS });
    }
    let id = ComplexMatrix::identity(n);
    let r1 = (&(&s * &s) - &id).operator_norm();
    let r2 = (&(&s * m) - &(m * &s)).operator_norm();
    accept(s, "newton_sign", r1.max(r2))
}

/// Solves `AX + XB = C` through `(I ⊗ A + Bᵀ ⊗ I) vec X = vec C`.
pub fn sylvester_kron_solve(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<OracleResult> {
    let n = a.ensure_square()?;
    let m = b.ensure_square()?;
    if c.rows() != n || c.cols() != m {
        return Err(Error::Dimension(format!("C is {}x{}, expected {n}x{m}", c.rows(), c.cols())));
    }
    let ea = a.eigenvalues()?;
    let eb = b.eigenvalues()?;
    let sep = ea
        .iter()
        .flat_map(|x| eb.iter().map(move |y| (x + y).norm()))
        .fold(f64::INFINITY, f64::min);
    if sep <= 1e-12 * (a.operator_norm() + b.operator_norm()) {
        return Err(Error::Hypothesis("spectra of A and -B intersect".into()));
    }
    let k = ComplexMatrix::identity(m).kron(a) + b.transpose().kron(&ComplexMatrix::identity(n));
    let x = ComplexMatrix::unvec(&k.solve(&c.vec())?, n, m)?;
    let c_norm = c.operator_norm();
    let defect = (&(a * &x) + &(&x * b) - c).operator_norm();
    let residual = if c_norm == 0.0 { defect } else { defect / c_norm };
    accept(x, "kronecker_solve", residual)
}

/// Solves `AXD + EXB = C` through `(Dᵀ ⊗ A + Bᵀ ⊗ E) vec X = vec C`.
pub fn generalized_sylvester_kron_solve(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
    e: &ComplexMatrix,
    d: &ComplexMatrix,
) -> Result<OracleResult> {
    let n = a.ensure_square()?;
    let m = b.ensure_square()?;
    if e.rows() != n || e.cols() != n || d.rows() != m || d.cols() != m || c.rows() != n || c.cols() != m {
        return Err(Error::Dimension("generalized Sylvester shapes".into()));
    }
    let k = d.transpose().kron(a) + b.transpose().kron(e);
    let x = ComplexMatrix::unvec(&k.solve(&c.vec())?, n, m)?;
    let c_norm = c.operator_norm();
    let defect = (&(&(a * &x) * d) + &(&(e * &x) * b) - c).operator_norm();
    let residual = if c_norm == 0.0 { defect } else { defect / c_norm };
    accept(x, "kronecker_solve_generalized", residual)
}

/// Principal square root by the determinant-scaled Denman-Beavers iteration.
pub fn principal_sqrt_dense(a: &ComplexMatrix) -> Result<OracleResult> {
    let n = a.ensure_square()?;
    let scale = a.operator_norm();
    let floor = AXIS_FLOOR * scale;
    if scale == 0.0 || a.eigenvalues()?.iter().any(|z| z.im.abs() <= floor && z.re <= floor) {
        return Err(Error::NegativeRealAxis);
    }
    let mut y = a.clone();
    let mut z = ComplexMatrix::identity(n);
    let mut scaling = true;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let yi = y.inverse_unchecked()?;
        let zi = z.inverse_unchecked()?;
        let mu = if scaling {
            (-(y.log_abs_det()? + z.log_abs_det()?) / (2.0 * n as f64)).exp()
        } else {
            1.0
        };
        let y_next = (y.scale_real(mu) + zi.scale_real(1.0 / mu)).scale_real(0.5);
        let z_next = (z.scale_real(mu) + yi.scale_real(1.0 / mu)).scale_real(0.5);
        let diff = (&y_next - &y).frobenius_norm() / y_next.frobenius_norm();
        y = y_next;
        z = z_next;
        if diff < 1e-2 {
            scaling = false;
        }
        if converged {
            break;
        }
        if diff < 1e-13 {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { method: "denman_beavers".into(), iterations: MAX_ITERATIONS });
    }
    if y.eigenvalues()?.iter().any(|z| z.re <= 0.0) {
        return Err(Error::NegativeRealAxis);
    }
    let residual = (&(&y * &y) - a).operator_norm() / scale;
    accept(y, "denman_beavers", residual)
}

/// `A # B = A (A^{-1} B)^{1/2}`.
pub fn geometric_mean_dense(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<OracleResult> {
    let root = principal_sqrt_dense(&a.solve(b)?)?;
    Ok(OracleResult { value: a * &root.value, method: "geometric_mean_via_sqrt".into(), residual: root.residual })
}

/// `H = [[A, -G], [-Q, -A*]]`.
pub fn hamiltonian(a: &ComplexMatrix, g: &ComplexMatrix, q: &ComplexMatrix) -> Result<ComplexMatrix> {
    ComplexMatrix::from_blocks(a, &(-g), &(-q), &(-&a.adjoint()))
}

/// Stable spectral projector `Π_- = (I - sign H)/2` of the Hamiltonian.
pub fn care_projector_dense(a: &ComplexMatrix, g: &ComplexMatrix, q: &ComplexMatrix) -> Result<OracleResult> {
    let h = hamiltonian(a, g, q)?;
    let s = sign_dense(&h)?;
    let n2 = h.rows();
    let pi = (&ComplexMatrix::identity(n2) - &s.value).scale_real(0.5);
    Ok(OracleResult { value: pi, method: "newton_sign_projector".into(), residual: s.residual })
}

/// Stabilizing CARE solution `X = Π_21 Π_11^{-1}` from the stable invariant subspace.
pub fn care_stable_subspace_solve(a: &ComplexMatrix, g: &ComplexMatrix, q: &ComplexMatrix) -> Result<OracleResult> {
    let n = a.ensure_square()?;
    let pi = care_projector_dense(a, g, q)?.value;
    let p11 = pi.block(0, 0, n, n);
    let p21 = pi.block(n, 0, n, n);
    if p11.sigma_min() <= 1e-12 * pi.operator_norm().max(1.0) {
        return Err(Error::Hypothesis("leading projector block is singular".into()));
    }
    let x = &p21 * &p11.inverse()?;
    let residual = care_defect(a, g, q, &x) / q.operator_norm().max(1.0);
    accept(x, "hamiltonian_projector", residual)
}

/// `||A* X + X A - X G X + Q||`.
pub fn care_defect(a: &ComplexMatrix, g: &ComplexMatrix, q: &ComplexMatrix, x: &ComplexMatrix) -> f64 {
    let lhs = &(&(&a.adjoint() * x) + &(x * a)) - &(&(x * g) * x);
    (&lhs + q).operator_norm()
}

/// Scalar helper for the tests and fixtures.
pub fn scalar(x: f64) -> ComplexMatrix {
    ComplexMatrix::scalar(Complex64::new(x, 0.0))
}
