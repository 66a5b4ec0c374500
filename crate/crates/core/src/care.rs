//! Continuous-time algebraic Riccati equation `A* X + X A - X G X + Q = 0` through the
//! stable spectral projector `Π_- = (I - sign H)/2` of the Hamiltonian.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    build_profile, strip_bound_diagonalizable, strip_bound_sampled, Family, NodewiseProfile, ProfileParams, StripCertificate,
};
use crate::ensemble::rng;
use crate::error::{Error, Result};
use crate::ledger::{lcu, product, qsvt_inverse, BlockEncodingDescriptor, LedgerSummary, Payload, C_Q};
use crate::matrix::ComplexMatrix;
use crate::oracle::{care_defect, care_stable_subspace_solve, hamiltonian};
use crate::quadrature::{balanced_grid, default_beta, weight_sums, QuadratureGrid, SincErrorBudget};
use crate::sylvester::shift_pair_inverse;

const HERMITIAN_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues with `|Re λ|` below this (after normalization) count as on the axis.
const AXIS_TOL: f64 = 1e-10;
/// Sample counts for the fallback strip bound of `H`.
const SAMPLES: (usize, usize) = (21, 81);

/// Normalized Hamiltonian `H = λ_H [[A, -G], [-Q, -A*]]` with its strip certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTask {
    #[serde(rename = "A")]
    pub a: ComplexMatrix,
    #[serde(rename = "G")]
    pub g: ComplexMatrix,
    #[serde(rename = "Q")]
    pub q: ComplexMatrix,
    #[serde(rename = "H")]
    pub h: ComplexMatrix,
    pub lambda_h: f64,
    /// `min |Re λ(H)|` after normalization.
    pub delta: f64,
    pub kappa_v: Option<f64>,
    pub gamma_h: StripCertificate,
}

impl HamiltonianTask {
    pub fn n(&self) -> usize {
        self.a.rows()
    }
}

/// `J = [[0, I], [-I, 0]]`.
pub fn symplectic_j(n: usize) -> ComplexMatrix {
    let i = ComplexMatrix::identity(n);
    let z = ComplexMatrix::zeros(n, n);
    ComplexMatrix::from_blocks(&z, &i, &(-&i), &z).expect("square blocks")
}

/// Assembles and normalizes `H`, checks the Hamiltonian symmetry and the imaginary-axis
/// gap, and attaches `γ_H`: `2κ(V)/δ` at `a = δ/2` when diagonalizable, sampled otherwise.
pub fn build_hamiltonian(a: &ComplexMatrix, g: &ComplexMatrix, q: &ComplexMatrix) -> Result<HamiltonianTask> {
    let n = a.ensure_square()?;
    for (name, m) in [("G", g), ("Q", q)] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::Dimension(format!("{name} must be {n}x{n}")));
        }
        if !m.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::Hypothesis(format!("{name} is not Hermitian")));
        }
    }
    let h0 = hamiltonian(a, g, q)?;
    let norm = h0.operator_norm();
    if !(norm > 0.0) {
        return Err(Error::Hypothesis("Hamiltonian is zero".into()));
    }
    let lambda_h = 1.0 / norm;
    let h = h0.scale_real(lambda_h);
    let j = symplectic_j(n);
    let asym = (&(&h.adjoint() * &j) + &(&j * &h)).operator_norm();
    if asym > SYMMETRY_TOL {
        return Err(Error::Hypothesis(format!("H*J + JH has norm {asym:e}")));
    }
    let data = h.spectral_data()?;
    let delta = data.imaginary_axis_gap();
    if delta <= AXIS_TOL {
        return Err(Error::ImaginaryAxis { min_re: delta });
    }
    let a_h = delta / 2.0;
    let gamma_h = match data.kappa_v {
        Some(_) => strip_bound_diagonalizable(&h, a_h)?,
        None => strip_bound_sampled(&h, a_h.min(0.25), SAMPLES.0, SAMPLES.1)?,
    };
    Ok(HamiltonianTask { a: a.clone(), g: g.clone(), q: q.clone(), h, lambda_h, delta, kappa_v: data.kappa_v, gamma_h })
}

/// Nodewise bound used by the sign stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianProfile {
    /// Constant `r_H = 3γ_H`, validated against the exact norms.
    Plain,
    Exact,
}

impl FromStr for HamiltonianProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "exact" => Ok(Self::Exact),
            _ => Err(Error::Parse(format!("unknown hamiltonian profile {s:?}"))),
        }
    }
}

/// LCU weight of the sign stage against the constant-weight two-inverse alternative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    /// `R_H Λ^care`.
    pub single_family: f64,
    /// `2 R_H² Λ^syl`.
    pub two_inverse: f64,
    pub lambda_care: f64,
    pub lambda_syl: f64,
}

/// Output of [`hamiltonian_sign`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignStage {
    #[serde(rename = "S_tilde")]
    pub s_tilde: ComplexMatrix,
    pub beta_sign: f64,
    /// `eps_sgn + Θ ε_H / R_H`.
    pub eps_sign: f64,
    pub eps_sgn: f64,
    pub eps_impl: f64,
    pub eps_h: f64,
    pub grid: QuadratureGrid,
    pub budget: SincErrorBudget,
    pub profile: NodewiseProfile,
    pub what_if: WhatIf,
    pub mult_h: u64,
    pub ledger: LedgerSummary,
    #[serde(skip)]
    descriptor: Option<BlockEncodingDescriptor>,
}

/// `S_{K,h}(H) = Σ w_k (1+t_k)((H - i t_k)^{-1} + (H + i t_k)^{-1})` with
/// `w_k = h t_k/(π(1+t_k))`, built through one QSVT inverse of the multiplexed family.
pub fn hamiltonian_sign(task: &HamiltonianTask, eps_sign_target: f64, profile: HamiltonianProfile, seed: u64) -> Result<SignStage> {
    if !(eps_sign_target > 0.0 && eps_sign_target.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps_sign = {eps_sign_target} must be positive")));
    }
    let strip = &task.gamma_h;
    let (grid, budget) = balanced_grid((eps_sign_target / 2.0).min(1.0), default_beta(strip.a), strip.a, strip.gamma)?;
    let r = match profile {
        HamiltonianProfile::Plain => Some(3.0 * strip.gamma),
        HamiltonianProfile::Exact => None,
    };
    let profile = build_profile(ProfileParams::ShiftPair { family: Family::Hamiltonian, r, m: Some(&task.h) }, &grid)?;
    let r_h = profile.r_max;
    let mut eps_h = (eps_sign_target * r_h / (2.0 * profile.theta)).min(1.0);
    while profile.theta * eps_h / r_h > eps_sign_target / 2.0 {
        eps_h /= 2.0;
    }
    let uh = BlockEncodingDescriptor::oracle("H", &task.h, 1)?;
    let inv = shift_pair_inverse(&uh, &grid, &profile, eps_h, seed)?;
    let coeffs: Vec<f64> = profile.weights.iter().zip(&profile.rho).map(|(w, p)| w * p / r_h).collect();
    let summed = crate::ledger::index_lcu(&inv, &coeffs)?;
    let eps_impl = summed.eps;
    let desc = summed.add_error(budget.eps_sgn)?;
    let sums = weight_sums(&grid);
    let what_if = WhatIf {
        single_family: r_h * sums.lambda_care,
        two_inverse: 2.0 * r_h * r_h * sums.lambda_syl,
        lambda_care: sums.lambda_care,
        lambda_syl: sums.lambda_syl,
    };
    Ok(SignStage {
        s_tilde: dense(&desc.payload),
        beta_sign: desc.alpha,
        eps_sign: desc.eps,
        eps_sgn: budget.eps_sgn,
        eps_impl,
        eps_h,
        grid,
        budget,
        profile,
        what_if,
        mult_h: desc.query("H"),
        ledger: desc.summary(),
        descriptor: Some(desc),
    })
}

fn dense(p: &Payload) -> ComplexMatrix {
    match p {
        Payload::Dense(m) => m.clone(),
        Payload::BlockDiag(_) => unreachable!("sign stage payload is dense"),
    }
}

/// Blocks of the approximate stable projector `Π̃ = (I - S̃)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorBlocks {
    pub pi11: ComplexMatrix,
    pub pi12: ComplexMatrix,
    pub pi21: ComplexMatrix,
    pub pi22: ComplexMatrix,
    /// `σ_min(π̃11)`.
    pub sigma: f64,
    /// `||Π̃||`.
    pub p_h: f64,
    pub eps_sign: f64,
}

impl ProjectorBlocks {
    pub fn from_sign(s_tilde: &ComplexMatrix, eps_sign: f64) -> Result<Self> {
        let n2 = s_tilde.ensure_square()?;
        if n2 % 2 != 0 {
            return Err(Error::Dimension("Hamiltonian dimension must be even".into()));
        }
        let n = n2 / 2;
        let pi = (&ComplexMatrix::identity(n2) - s_tilde).scale_real(0.5);
        let pi11 = pi.block(0, 0, n, n);
        Ok(Self {
            sigma: pi11.sigma_min(),
            pi12: pi.block(0, n, n, n),
            pi21: pi.block(n, 0, n, n),
            pi22: pi.block(n, n, n, n),
            pi11,
            p_h: pi.operator_norm(),
            eps_sign,
        })
    }

    pub fn assemble(&self) -> ComplexMatrix {
        ComplexMatrix::from_blocks(&self.pi11, &self.pi12, &self.pi21, &self.pi22).expect("consistent blocks")
    }

    /// Weyl lower bound `σ(Π_11) ≥ σ̃ - ε_sign/2`.
    pub fn sigma_exact_lower(&self) -> f64 {
        self.sigma - self.eps_sign / 2.0
    }
}

/// Where `||X||` in the error bound comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XNormSource {
    /// Dense stabilizing solution (verification mode).
    Oracle,
    /// A-posteriori bound from `||X̃||` and the error terms (standalone mode).
    Estimate,
}

/// Bookkeeping of one Riccati solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CareReport {
    #[serde(rename = "X_approx")]
    pub x_approx: ComplexMatrix,
    pub beta_sign: f64,
    #[serde(rename = "beta_X")]
    pub beta_x: f64,
    pub sigma: f64,
    pub sigma_exact_lower: f64,
    pub p_h: f64,
    pub eps_sign: f64,
    pub eps_pi_inv: f64,
    pub x_norm: f64,
    pub x_norm_source: XNormSource,
    /// `(ε_sign/2)(1 + ||X||)/σ̃`.
    pub eps_projector: f64,
    /// `||π̃21|| ε_{Π^{-1}}`.
    pub eps_inversion: f64,
    pub error_bound: f64,
    pub residual: f64,
    pub residual_bound: f64,
    pub mult_h: u64,
    pub mult_pi: u64,
    pub queries: BTreeMap<String, u64>,
    pub c_q: f64,
    pub lambda_h: f64,
    pub strip: StripCertificate,
    pub heuristic: bool,
    pub sign: SignStage,
    pub ledger: LedgerSummary,
    pub seed: u64,
}

impl CareReport {
    pub fn q(&self, name: &str) -> u64 {
        self.queries.get(name).copied().unwrap_or(0)
    }
}

/// `X̃ = π̃21 Y` with `Y` the QSVT inverse of `π̃11`, where `Π̃ = (I - S̃)/2`.
///
/// Error: `||X̃ - X|| ≤ (ε_sign/2)(1+||X||)/σ̃ + ||π̃21|| ε_{Π^{-1}}`. The first term comes
/// from `π̃21 π̃11^{-1} - X = (E21 - X E11) π̃11^{-1}` with `||E|| ≤ ε_sign/2`.
pub fn care_solve(
    task: &HamiltonianTask,
    eps_sign_target: f64,
    eps_pi_inv: f64,
    profile: HamiltonianProfile,
    x_norm_source: XNormSource,
    seed: u64,
) -> Result<CareReport> {
    if !(eps_pi_inv > 0.0 && eps_pi_inv.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps_pi_inv = {eps_pi_inv} must be positive")));
    }
    let n = task.n();
    let sign = hamiltonian_sign(task, eps_sign_target, profile, seed)?;
    let s_desc = sign.descriptor.clone().expect("fresh sign stage");
    let eps_sign = sign.eps_sign;
    let half = Complex64::new(0.5, 0.0);
    let pi = lcu(&[half, -half], &[BlockEncodingDescriptor::identity(2 * n), s_desc])?;
    let blocks = ProjectorBlocks::from_sign(&sign.s_tilde, eps_sign)?;
    let sigma = blocks.sigma;
    if !(sigma > eps_sign / 2.0) {
        return Err(Error::Hypothesis(format!("sigma_min(pi11) = {sigma:e} not above eps_sign/2 = {:e}", eps_sign / 2.0)));
    }
    let beta_pi = pi.alpha;
    let pi11 = pi.sub_block(0, 0, n, n)?.rebase_exact();
    let pi21 = pi.sub_block(n, 0, n, n)?.rebase_exact();
    let unit = pi11.rescale(1.0 / beta_pi)?;
    let eps_scaled = (beta_pi * eps_pi_inv).min(1.0);
    let y = qsvt_inverse(&unit, beta_pi / sigma, eps_scaled, &mut rng(seed ^ 0x9e37_79b9_7f4a_7c15))?.rescale(1.0 / beta_pi)?;
    let mult_pi = y.query("H") / sign.mult_h.max(1);
    let x_desc = product(&pi21, &y)?;
    let x_tilde = dense(&x_desc.payload);
    let eps_inversion = x_desc.eps;
    let c1 = eps_sign / (2.0 * sigma);
    let x_norm = match x_norm_source {
        XNormSource::Oracle => care_stable_subspace_solve(&task.a, &task.g, &task.q)?.value.operator_norm(),
        // ||X|| ≤ ||X̃|| + c1 (1 + ||X||) + eps_inversion
        XNormSource::Estimate => {
            if c1 >= 1.0 {
                return Err(Error::Hypothesis("a-posteriori norm estimate needs eps_sign < 2 sigma".into()));
            }
            (x_tilde.operator_norm() + c1 + eps_inversion) / (1.0 - c1)
        }
    };
    let eps_projector = c1 * (1.0 + x_norm);
    let x_desc = x_desc.add_error(eps_projector)?;
    let error_bound = x_desc.eps;
    let (residual, residual_bound) = care_residual(&task.a, &task.g, &task.q, &x_tilde, error_bound);
    Ok(CareReport {
        x_approx: x_tilde,
        beta_sign: sign.beta_sign,
        beta_x: x_desc.alpha,
        sigma,
        sigma_exact_lower: blocks.sigma_exact_lower(),
        p_h: blocks.p_h,
        eps_sign,
        eps_pi_inv: eps_scaled / beta_pi,
        x_norm,
        x_norm_source,
        eps_projector,
        eps_inversion,
        error_bound,
        residual,
        residual_bound,
        mult_h: sign.mult_h,
        mult_pi,
        queries: x_desc.queries.clone(),
        c_q: C_Q,
        lambda_h: task.lambda_h,
        strip: task.gamma_h.clone(),
        heuristic: task.gamma_h.heuristic(),
        ledger: x_desc.summary(),
        sign,
        seed,
    })
}

/// Residual `||A* X̃ + X̃ A - X̃ G X̃ + Q||` and the bound
/// `(2||A|| + 2||G|| ||X||) δ + ||G|| δ²` for `δ ≥ ||X̃ - X||`.
///
/// `||X||` is replaced by `||X̃|| + δ`, and the bound carries a rounding allowance.
pub fn care_residual(a: &ComplexMatrix, g: &ComplexMatrix, q: &ComplexMatrix, x_tilde: &ComplexMatrix, delta: f64) -> (f64, f64) {
    let residual = care_defect(a, g, q, x_tilde);
    let (na, ng, nx) = (a.operator_norm(), g.operator_norm(), x_tilde.operator_norm());
    let x_norm = nx + delta;
    let rounding = 64.0 * f64::EPSILON * (a.rows() as f64) * (2.0 * na * nx + ng * nx * nx + q.operator_norm());
    let bound = (2.0 * na + 2.0 * ng * x_norm) * delta + ng * delta * delta + rounding;
    (residual, bound)
}
