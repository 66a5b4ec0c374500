//! Principal square roots and geometric means from the sign embeddings
//! `K(A) = [[0, A], [I, 0]]` and `χ G(A, B) = χ [[0, B], [A^{-1}, 0]]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certificates::{build_profile, strip_bound_sampled, NodewiseProfile, ProfileParams, StripCertificate, StripProvenance};
use crate::ensemble::rng;
use crate::error::{Error, Result};
use crate::ledger::{index_lcu, mux_shift, product, qsvt_inverse, BlockEncodingDescriptor, LedgerSummary, MuxShift, Payload, ShiftCoefficients, C_Q};
use crate::matrix::{numerical_range_margin, ComplexMatrix};
use crate::oracle::sign_dense;
use crate::quadrature::{balanced_grid, default_beta, ordered_node_sum, QuadratureGrid, SincErrorBudget};

/// `||χ G(A, B)||` is kept at `1/1.05` of the unit bound.
pub const CHI_MARGIN: f64 = 1.05;
/// Grid used to sample the strip bound of `χ G(A, B)`.
pub const GEOM_STRIP_SAMPLES: (usize, usize) = (21, 81);

/// `K(A) = [[0, A], [I, 0]]`, whose sign is `[[0, A^{1/2}], [A^{-1/2}, 0]]`.
pub fn sqrt_embedding(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.ensure_square()?;
    ComplexMatrix::from_blocks(&ComplexMatrix::zeros(n, n), a, &ComplexMatrix::identity(n), &ComplexMatrix::zeros(n, n))
}

/// `A^{-1/2}_{K,h} = (2h/π) Σ t_k (A + t_k² I)^{-1}` and `A^{1/2}_{K,h} = A A^{-1/2}_{K,h}`.
pub fn sqrt_approximants(a: &ComplexMatrix, grid: &QuadratureGrid) -> Result<(ComplexMatrix, ComplexMatrix)> {
    a.ensure_square()?;
    let sum = ordered_node_sum(grid, |_, t| Ok(a.shifted(Complex64::new(t * t, 0.0)).inverse()?.scale_real(t)))?;
    let inv_sqrt = sum.scale_real(2.0 * grid.h / PI);
    let sqrt = a * &inv_sqrt;
    Ok((inv_sqrt, sqrt))
}

/// Square-root task in normalized coordinates `A = λ_A A0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqrtTask {
    #[serde(rename = "A")]
    pub a: ComplexMatrix,
    pub mu: f64,
    pub lambda_a: f64,
}

impl SqrtTask {
    /// Normalizes with `λ_A = min(1, 1/||A0||)` and measures `μ = λ_min(H(A))`.
    pub fn new(a0: &ComplexMatrix) -> Result<Self> {
        a0.ensure_square()?;
        let norm = a0.operator_norm();
        if !(norm > 0.0) {
            return Err(Error::Hypothesis("A is zero".into()));
        }
        let lambda_a = (1.0 / norm).min(1.0);
        let a = if lambda_a == 1.0 { a0.clone() } else { a0.scale_real(lambda_a) };
        let mu = numerical_range_margin(&a, 0.0)?;
        if !(mu > 0.0) {
            return Err(Error::Hypothesis(format!("H(A) margin {mu} is not positive")));
        }
        Ok(Self { a, mu: mu.min(1.0), lambda_a })
    }
}

/// One labeled output with its own ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputReport {
    pub value: ComplexMatrix,
    pub beta: f64,
    pub eps_det: f64,
    pub eps_impl: f64,
    /// Factor mapping `value` back to the caller's coordinates.
    pub recovery_scale: f64,
    pub queries: BTreeMap<String, u64>,
    pub ledger: LedgerSummary,
}

impl OutputReport {
    pub fn error_bound(&self) -> f64 {
        self.eps_det + self.eps_impl
    }

    /// Output in the caller's coordinates.
    pub fn recovered(&self) -> ComplexMatrix {
        self.value.scale_real(self.recovery_scale)
    }
}

/// Report for the two-output matrix-function solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub kind: String,
    pub outputs: BTreeMap<String, OutputReport>,
    pub grid: QuadratureGrid,
    pub budget: SincErrorBudget,
    pub profile: NodewiseProfile,
    pub strip: StripCertificate,
    pub heuristic: bool,
    pub eps_inv: f64,
    pub c_q: f64,
    pub seed: u64,
}

impl FunctionReport {
    pub fn output(&self, name: &str) -> &OutputReport {
        &self.outputs[name]
    }
}

fn dense(desc: &BlockEncodingDescriptor) -> ComplexMatrix {
    match &desc.payload {
        Payload::Dense(m) => m.clone(),
        Payload::BlockDiag(_) => unreachable!("contracted payload is dense"),
    }
}

fn output(desc: BlockEncodingDescriptor, eps_det: f64, recovery_scale: f64) -> Result<OutputReport> {
    let eps_impl = desc.eps;
    let desc = desc.add_error(eps_det)?;
    Ok(OutputReport {
        value: dense(&desc),
        beta: desc.alpha,
        eps_det,
        eps_impl,
        recovery_scale,
        queries: desc.queries.clone(),
        ledger: desc.summary(),
    })
}

/// Contracted, QSVT-inverted and node-summed single family:
/// `Σ_j c_j (F_j)^{-1}` with `F_j = mux_j` and entries weighted by `ρ_j/R`.
fn single_family(
    mux: &BlockEncodingDescriptor,
    profile: &NodewiseProfile,
    dim: usize,
    eps_inv: f64,
    seed: u64,
) -> Result<BlockEncodingDescriptor> {
    let r = profile.r_max;
    let contraction = mux_shift(MuxShift::DiagContraction { dim, deltas: profile.rho.iter().map(|p| p / r).collect() })?;
    let f_rho = product(&contraction, mux)?;
    let mut g = rng(seed);
    let inv = qsvt_inverse(&f_rho, r, eps_inv, &mut g)?;
    let coeffs: Vec<f64> = profile.weights.iter().zip(&profile.rho).map(|(w, p)| w * p / r).collect();
    index_lcu(&inv, &coeffs)
}

/// Halves `eps_inv` until the implementation term `Θ ε_inv / R` is at most `eps/2`.
fn shrink(mut eps_inv: f64, profile: &NodewiseProfile, eps: f64) -> f64 {
    while profile.theta * eps_inv / profile.r_max > eps / 2.0 {
        eps_inv /= 2.0;
    }
    eps_inv
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps = {eps} must be positive")))
    }
}

/// `A^{-1/2}` and `A^{1/2}` with `a = √μ/2`, `γ_K = 4/(μ - a²)` and the profile
/// `ρ = (1+t²)/(μ+t²)`; `beta = 2Θ`.
pub fn sqrt_solve(task: &SqrtTask, eps: f64, seed: u64) -> Result<FunctionReport> {
    check_eps(eps)?;
    let n = task.a.rows();
    let mu = task.mu;
    let a = mu.sqrt() / 2.0;
    let gamma = 4.0 / (mu - a * a);
    let strip = StripCertificate { a, gamma, provenance: StripProvenance::FovFormula };
    let (grid, budget) = balanced_grid(eps / 2.0, default_beta(a), a, gamma)?;
    let profile = build_profile(ProfileParams::Sqrt { mu, a: Some(&task.a) }, &grid)?;
    let eps_inv = shrink((eps * mu.sqrt() / 4.0).min(1.0), &profile, eps);
    let ua = BlockEncodingDescriptor::oracle("A", &task.a, 1)?;
    let coeffs: ShiftCoefficients = grid
        .nodes
        .iter()
        .map(|t| {
            let s = 1.0 + t * t;
            (Complex64::new(1.0 / s, 0.0), Complex64::new(t * t / s, 0.0))
        })
        .collect();
    let mux = mux_shift(MuxShift::OneMatrix { t: &ua, coeffs })?;
    let inv = single_family(&mux, &profile, n, eps_inv, seed)?;
    let sqrt = product(&ua, &inv)?;
    let scale = task.lambda_a.sqrt();
    let mut outputs = BTreeMap::new();
    outputs.insert("inv_sqrt".to_string(), output(inv, budget.eps_sgn, scale)?);
    outputs.insert("sqrt".to_string(), output(sqrt, budget.eps_sgn, 1.0 / scale)?);
    Ok(FunctionReport {
        kind: "sqrt".into(),
        outputs,
        grid,
        budget,
        profile,
        strip,
        heuristic: false,
        eps_inv,
        c_q: C_Q,
        seed,
    })
}

/// `χ G(A, B)`, checked for the principal branch and for `sign(χG) = sign(G)`.
pub fn geom_embedding(a: &ComplexMatrix, b: &ComplexMatrix, chi: f64) -> Result<ComplexMatrix> {
    let n = a.ensure_square()?;
    if b.rows() != n || b.cols() != n {
        return Err(Error::Dimension("A and B must have the same shape".into()));
    }
    if !(chi > 0.0) {
        return Err(Error::InvalidParameter(format!("chi = {chi} must be positive")));
    }
    let a_inv = a.inverse()?;
    branch_check(&a_inv, b)?;
    let g = ComplexMatrix::from_blocks(&ComplexMatrix::zeros(n, n), b, &a_inv, &ComplexMatrix::zeros(n, n))?;
    let scaled = g.scale_real(chi);
    let s_g = sign_dense(&g)?.value;
    let s_m = sign_dense(&scaled)?.value;
    let gap = (&s_g - &s_m).operator_norm();
    if gap > 1e-9 * s_g.operator_norm().max(1.0) {
        return Err(Error::Residual { residual: gap });
    }
    Ok(scaled)
}

fn branch_check(a_inv: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    let ev = (a_inv * b).eigenvalues()?;
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    if ev.iter().any(|z| z.re <= 0.0 && z.im.abs() <= 1e-12 * scale) {
        return Err(Error::NegativeRealAxis);
    }
    Ok(())
}

/// Geometric-mean task in normalized coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomMeanTask {
    #[serde(rename = "A")]
    pub a: ComplexMatrix,
    #[serde(rename = "B")]
    pub b: ComplexMatrix,
    pub chi: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    /// `A = λ A0`, `B = λ B0`; `A0 # B0 = (A # B)/λ`.
    pub lambda: f64,
    pub gamma_sharp: StripCertificate,
}

impl GeomMeanTask {
    /// Scales by `λ = min(1, 1/max(||A0||, ||B0||))`, picks `χ = 1/(1.05 ||G(A, B)||)` and
    /// samples the strip bound of `χ G`.
    ///
    /// `a` is half the imaginary-axis gap of `χ G`, capped at 1/2.
    pub fn new(a0: &ComplexMatrix, b0: &ComplexMatrix) -> Result<Self> {
        let norm = a0.operator_norm().max(b0.operator_norm());
        if !(norm > 0.0) {
            return Err(Error::Hypothesis("A and B are zero".into()));
        }
        let lambda = (1.0 / norm).min(1.0);
        let (a, b) = if lambda == 1.0 { (a0.clone(), b0.clone()) } else { (a0.scale_real(lambda), b0.scale_real(lambda)) };
        let (a, b) = (&a, &b);
        let mu_a = numerical_range_margin(a, 0.0)?;
        let mu_b = numerical_range_margin(b, 0.0)?;
        if !(mu_a > 0.0 && mu_b > 0.0) {
            return Err(Error::Hypothesis(format!("margins mu_A = {mu_a}, mu_B = {mu_b} must be positive")));
        }
        let n = a.ensure_square()?;
        let g = ComplexMatrix::from_blocks(&ComplexMatrix::zeros(n, n), b, &a.inverse()?, &ComplexMatrix::zeros(n, n))?;
        let chi = 1.0 / (CHI_MARGIN * g.operator_norm());
        let m = geom_embedding(a, b, chi)?;
        let gap = m.eigenvalues()?.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
        let strip_a = (gap / 2.0).min(0.5);
        let gamma_sharp = strip_bound_sampled(&m, strip_a, GEOM_STRIP_SAMPLES.0, GEOM_STRIP_SAMPLES.1)?;
        Ok(Self { a: a.clone(), b: b.clone(), chi, mu_a: mu_a.min(1.0), mu_b: mu_b.min(1.0), lambda, gamma_sharp })
    }
}

/// `(A#B)^{-1} ≈ (2h/π) Σ s_k (B + s_k² A)^{-1}` and `A#B ≈ B (A#B)^{-1}_{K,h} A`.
pub fn geom_solve(task: &GeomMeanTask, eps: f64, seed: u64) -> Result<FunctionReport> {
    check_eps(eps)?;
    let n = task.a.rows();
    let strip = task.gamma_sharp.clone();
    let (grid, budget) = balanced_grid(eps / 2.0, default_beta(strip.a), strip.a, strip.gamma)?;
    if grid.h > PI {
        return Err(Error::InvalidParameter(format!("step h = {} exceeds pi", grid.h)));
    }
    let profile = build_profile(
        ProfileParams::GeomMean { mu_a: task.mu_a, mu_b: task.mu_b, chi: task.chi, ab: Some((&task.a, &task.b)) },
        &grid,
    )?;
    let mu_sharp = task.mu_a.min(task.mu_b);
    let eps_inv = shrink((eps * (task.mu_a * task.mu_b).sqrt() / (4.0 * mu_sharp)).min(1.0), &profile, eps);
    let ua = BlockEncodingDescriptor::oracle("A", &task.a, 1)?;
    let ub = BlockEncodingDescriptor::oracle("B", &task.b, 1)?;
    let coeffs: ShiftCoefficients = grid
        .nodes
        .iter()
        .map(|t| {
            let s = t / task.chi;
            let d = 1.0 + s * s;
            (Complex64::new(1.0 / d, 0.0), Complex64::new(s * s / d, 0.0))
        })
        .collect();
    let mux = mux_shift(MuxShift::TwoMatrix { t: &ub, u: &ua, coeffs })?;
    let inv = single_family(&mux, &profile, n, eps_inv, seed)?;
    let mean = product(&ub, &product(&inv, &ua)?)?;
    let mut outputs = BTreeMap::new();
    outputs.insert("inverse_mean".to_string(), output(inv, budget.eps_sgn, task.lambda)?);
    outputs.insert("mean".to_string(), output(mean, budget.eps_sgn, 1.0 / task.lambda)?);
    Ok(FunctionReport {
        kind: "geomean".into(),
        outputs,
        grid,
        budget,
        profile,
        heuristic: strip.heuristic(),
        strip,
        eps_inv,
        c_q: C_Q,
        seed,
    })
}

/// Scaled node set `s_k = t_k / χ`.
pub fn scaled_nodes(grid: &QuadratureGrid, chi: f64) -> Vec<f64> {
    grid.nodes.iter().map(|t| t / chi).collect()
}
