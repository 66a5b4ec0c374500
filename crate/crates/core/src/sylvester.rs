//! Sylvester, generalized Sylvester and generalized Lyapunov solvers through the
//! sign block of the augmented matrix `[[A, C], [0, -B]]`.
//!
//! Every solve assembles its output through the block-encoding ledger: scaled
//! shifted-inverse families are built with multiplexed shift gadgets, inverted by
//! the (emulated) QSVT rule and contracted over the node register. The reported
//! `beta_X`, `eps_impl` and query counts are the ledger values of that pipeline.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    augmented, band_check, build_profile, imaginary_extent, normalize_problem, optimal_shift_rotation,
    shift_pair_weights, strip_bound_fov, strip_bound_sampled_with, strip_bound_weighted_fov, Certificate, Family,
    FovCertificate, NodewiseProfile, PencilPair, ProfileParams, StripCertificate, SAMPLED_SAFETY,
};
use crate::ensemble::rng;
use crate::error::{Error, Result};
use crate::ledger::{
    index_lcu, mux_shift, product, qsvt_inverse, BlockEncodingDescriptor, LedgerSummary, MuxShift, ShiftCoefficients, C_Q,
};
use crate::matrix::{imag, numerical_range_margin, ComplexMatrix};
use crate::quadrature::{balanced_grid, default_beta, ordered_node_sum, QuadratureGrid, SincErrorBudget};

/// Constant `c` in the inverse-stage precision `min(1, c·ε·μ)` (or `min(1, c·ε/γ)`).
pub const INVERSE_PRECISION_CONSTANT: f64 = 1.0 / 64.0;

const NORM_TOL: f64 = 1e-12;
const MARGIN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Fov,
    Strip,
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fov" => Ok(Regime::Fov),
            "strip" => Ok(Regime::Strip),
            _ => Err(Error::Parse(format!("unknown regime '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Plain,
    Rebalanced,
    Banded,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "rebalanced" => Ok(Mode::Rebalanced),
            "banded" => Ok(Mode::Banded),
            _ => Err(Error::Parse(format!("unknown mode '{s}'"))),
        }
    }
}

/// `AX + XB = C` in transformed, normalized coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SylvesterProblem {
    #[serde(rename = "A")]
    pub a: ComplexMatrix,
    #[serde(rename = "B")]
    pub b: ComplexMatrix,
    #[serde(rename = "C")]
    pub c: ComplexMatrix,
    pub regime: Regime,
    pub certificate: Certificate,
}

impl SylvesterProblem {
    /// Validates already-transformed data against its certificate.
    pub fn new(a: ComplexMatrix, b: ComplexMatrix, c: ComplexMatrix, certificate: Certificate) -> Result<Self> {
        let m = augmented(&a, &b, &c)?;
        let norm = m.operator_norm();
        if norm > 1.0 + NORM_TOL {
            return Err(Error::Hypothesis(format!("augmented matrix has norm {norm} > 1")));
        }
        let regime = match &certificate {
            Certificate::Fov(cert) => {
                for (name, x) in [("A", &a), ("B", &b)] {
                    let margin = numerical_range_margin(x, 0.0)?;
                    if margin < cert.mu - MARGIN_TOL {
                        return Err(Error::Hypothesis(format!("H({name}) margin {margin} below mu = {}", cert.mu)));
                    }
                }
                if !(cert.mu > 0.0) {
                    return Err(Error::Hypothesis("FoV margin must be positive".into()));
                }
                Regime::Fov
            }
            Certificate::Strip(s) => {
                if !(s.a > 0.0 && s.a < 1.0 && s.gamma >= 1.0) {
                    return Err(Error::Hypothesis(format!("invalid strip certificate a = {}, gamma = {}", s.a, s.gamma)));
                }
                check_half_planes(&a, &b)?;
                Regime::Strip
            }
        };
        Ok(Self { a, b, c, regime, certificate })
    }

    /// Shift-rotates a FoV-gapped pair and normalizes the augmented matrix.
    ///
    /// The solution of the returned problem equals the solution of `A0 X + X B0 = C0`.
    pub fn from_fov(a0: &ComplexMatrix, b0: &ComplexMatrix, c0: &ComplexMatrix, n_angles: usize) -> Result<Self> {
        augmented(a0, b0, c0)?;
        let cert = optimal_shift_rotation(a0, b0, n_angles)?;
        let (a1, b1) = cert.transform(a0, b0);
        let c1 = c0.scale(cert.eta);
        let (a, b, c, lambda) = normalize_problem(&a1, &b1, &c1)?;
        Self::new(a, b, c, Certificate::Fov(cert.scaled(lambda)))
    }

    /// Normalizes the data and attaches a sampled strip certificate with
    /// `a = min |Re λ(M)| / 2` unless given.
    pub fn from_strip(
        a0: &ComplexMatrix,
        b0: &ComplexMatrix,
        c0: &ComplexMatrix,
        a: Option<f64>,
        samples: (usize, usize),
        safety: f64,
    ) -> Result<Self> {
        let (a1, b1, c1, _) = normalize_problem(a0, b0, c0)?;
        let m = augmented(&a1, &b1, &c1)?;
        let gap = m.eigenvalues()?.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
        let a = a.unwrap_or((gap / 2.0).min(0.5));
        let cert = strip_bound_sampled_with(&m, a, samples.0, samples.1, safety)?;
        Self::new(a1, b1, c1, Certificate::Strip(cert))
    }

    pub fn augmented(&self) -> ComplexMatrix {
        augmented(&self.a, &self.b, &self.c).expect("validated on construction")
    }

    /// Strip parameters used by the quadrature: the FoV formula at `a = μ/2`, or the
    /// attached strip certificate.
    pub fn strip(&self) -> Result<StripCertificate> {
        match &self.certificate {
            Certificate::Fov(f) => strip_bound_fov(f.mu, f.mu / 2.0, self.c.operator_norm()),
            Certificate::Strip(s) => Ok(s.clone()),
        }
    }

    fn fov_mu(&self) -> Option<f64> {
        match &self.certificate {
            Certificate::Fov(f) => Some(f.mu),
            Certificate::Strip(_) => None,
        }
    }
}

/// Bookkeeping of one Sylvester-type solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(rename = "X_approx")]
    pub x_approx: ComplexMatrix,
    #[serde(rename = "beta_X")]
    pub beta_x: f64,
    pub eps_det: f64,
    pub eps_impl: f64,
    /// Inverse-stage precisions, left family first.
    pub eps_inverse: Vec<f64>,
    pub queries: BTreeMap<String, u64>,
    pub c_q: f64,
    pub mode: String,
    pub grid: QuadratureGrid,
    pub budget: SincErrorBudget,
    pub profile: NodewiseProfile,
    pub certificate: Certificate,
    pub strip: StripCertificate,
    pub heuristic: bool,
    pub ledger: LedgerSummary,
    pub seed: u64,
}

impl SolveReport {
    pub fn q(&self, name: &str) -> u64 {
        self.queries.get(name).copied().unwrap_or(0)
    }

    /// `eps_det + eps_impl`.
    pub fn error_bound(&self) -> f64 {
        self.eps_det + self.eps_impl
    }
}

/// `X_{K,h} = (h/2π) Σ t_k [(A - i t_k)^{-1} C (B + i t_k)^{-1} + (A + i t_k)^{-1} C (B - i t_k)^{-1}]`.
pub fn approximant_factored(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix, grid: &QuadratureGrid) -> Result<ComplexMatrix> {
    pencil_approximant(a, None, b, None, c, grid)
}

/// Pencil form with `A ∓ i t E` and `B ± i t D`; `None` weights are identities.
pub fn pencil_approximant(
    a: &ComplexMatrix,
    e: Option<&ComplexMatrix>,
    b: &ComplexMatrix,
    d: Option<&ComplexMatrix>,
    c: &ComplexMatrix,
    grid: &QuadratureGrid,
) -> Result<ComplexMatrix> {
    let shift = |x: &ComplexMatrix, w: Option<&ComplexMatrix>, z: Complex64| match w {
        Some(w) => x + &w.scale(z),
        None => x.shifted(z),
    };
    let sum = ordered_node_sum(grid, |_, t| {
        let it = imag(t);
        let am = shift(a, e, -it).inverse()?;
        let ap = shift(a, e, it).inverse()?;
        let bp = shift(b, d, it).inverse()?;
        let bm = shift(b, d, -it).inverse()?;
        Ok((&(&am * c) * &bp + &(&ap * c) * &bm).scale_real(t))
    })?;
    Ok(sum.scale_real(grid.h / (2.0 * PI)))
}

/// One side of a (possibly generalized) Sylvester problem.
#[derive(Clone, Copy)]
struct Side<'a> {
    x: &'a ComplexMatrix,
    w: Option<&'a ComplexMatrix>,
    x_name: &'static str,
    w_name: &'static str,
}

/// Unit encoding of `⊕_j (X + s_j W)/((1+t_j) d_j)` inverted by QSVT at norm `r`.
///
/// Entries `j < N` use shift `first · i t`, the rest `-first · i t`.
fn inverse_family(
    side: Side<'_>,
    grid: &QuadratureGrid,
    rho: (&[f64], &[f64]),
    first: f64,
    r: f64,
    eps_inv: f64,
    rng: &mut impl rand::Rng,
) -> Result<BlockEncodingDescriptor> {
    let coeffs: ShiftCoefficients = [(rho.0, first), (rho.1, -first)]
        .iter()
        .flat_map(|(rho, sign)| {
            grid.nodes.iter().zip(rho.iter()).map(move |(t, p)| {
                let scale = p / (r * (1.0 + t));
                (Complex64::new(scale, 0.0), imag(sign * t) * scale)
            })
        })
        .collect();
    let ux = BlockEncodingDescriptor::oracle(side.x_name, side.x, 1)?;
    let mux = match side.w {
        None => mux_shift(MuxShift::OneMatrix { t: &ux, coeffs })?,
        Some(w) => {
            let uw = BlockEncodingDescriptor::oracle(side.w_name, w, 1)?;
            mux_shift(MuxShift::TwoMatrix { t: &ux, u: &uw, coeffs })?
        }
    };
    qsvt_inverse(&mux, r, eps_inv, rng).map_err(|e| match e {
        Error::SingularNode { node, sigma_min } => {
            let n = grid.len() as i64;
            Error::SingularNode { node: node % n - grid.k as i64, sigma_min }
        }
        other => other,
    })
}

/// Ledger pipeline of the rebalanced Sylvester sum; returns the descriptor before
/// the quadrature error is added.
fn sylvester_pipeline(
    left: Side<'_>,
    right: Side<'_>,
    c: &ComplexMatrix,
    grid: &QuadratureGrid,
    profile: &NodewiseProfile,
    eps: (f64, f64),
    seed: u64,
) -> Result<BlockEncodingDescriptor> {
    let (ra, rb) = (profile.r_a.expect("sylvester profile"), profile.r_b.expect("sylvester profile"));
    let mut g = rng(seed);
    let pa = inverse_family(left, grid, (&profile.rho_a_minus, &profile.rho_a_plus), -1.0, ra, eps.0, &mut g)?;
    let pb = inverse_family(right, grid, (&profile.rho_b_plus, &profile.rho_b_minus), 1.0, rb, eps.1, &mut g)?;
    let uc = BlockEncodingDescriptor::oracle("C", c, 1)?.lift(2 * grid.len())?;
    let terms = product(&product(&pa, &uc)?, &pb)?;
    let norm = ra * rb;
    let coeffs: Vec<f64> = (0..grid.len())
        .map(|k| profile.weights[k] * profile.rho_a_minus[k] * profile.rho_b_plus[k] / norm)
        .chain((0..grid.len()).map(|k| profile.weights[k] * profile.rho_a_plus[k] * profile.rho_b_minus[k] / norm))
        .collect();
    index_lcu(&terms, &coeffs)
}

/// `Θ ||C|| (ε_A/R_A + ε_B/R_B + ε_A ε_B/(R_A R_B))`.
pub fn implementation_error(theta: f64, norm_c: f64, eps_a: f64, r_a: f64, eps_b: f64, r_b: f64) -> f64 {
    theta * norm_c * (eps_a / r_a + eps_b / r_b + eps_a * eps_b / (r_a * r_b))
}

/// Starts from `min(1, base)` and halves until the implementation term is at most `eps/2`.
fn inverse_precisions(eps: f64, base: f64, profile: &NodewiseProfile, norm_c: f64) -> f64 {
    let (ra, rb) = (profile.r_a.expect("sylvester profile"), profile.r_b.expect("sylvester profile"));
    let mut e = base.min(1.0);
    while implementation_error(profile.theta, norm_c, e, ra, e, rb) > eps / 2.0 {
        e /= 2.0;
    }
    e
}

/// The sign route returns the Sylvester solution only when `Λ(A)` and `Λ(B)` lie in the
/// open right half-plane; a strip gap alone does not ensure this.
fn check_half_planes(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    for (name, x) in [("A", a), ("B", b)] {
        let min_re = x.eigenvalues()?.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if !(min_re > 0.0) {
            return Err(Error::Hypothesis(format!("spectrum of {name} reaches Re = {min_re:e}, outside the open right half-plane")));
        }
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps = {eps} must be positive")))
    }
}

/// Grid from `choose_K` at `ε_sgn = eps`, `β = arcsin(a)/2`.
fn grid_for(eps: f64, strip: &StripCertificate) -> Result<(QuadratureGrid, SincErrorBudget)> {
    balanced_grid(eps, default_beta(strip.a), strip.a, strip.gamma)
}

fn mode_name(mode: Mode) -> String {
    match mode {
        Mode::Plain => "plain",
        Mode::Rebalanced => "rebalanced",
        Mode::Banded => "banded",
    }
    .to_string()
}

/// Ordinary Sylvester solve.
///
/// `banded_tau` is only used in banded mode; when absent the smallest band
/// containing `W(A)` and `W(B)` is used.
pub fn solve(problem: &SylvesterProblem, eps: f64, mode: Mode, banded_tau: Option<f64>, seed: u64) -> Result<SolveReport> {
    check_eps(eps)?;
    let strip = problem.strip()?;
    let (grid, budget) = grid_for(eps, &strip)?;
    solve_on_grid(problem, grid, budget, eps, mode, banded_tau, seed)
}

/// [`solve`] on a caller-chosen grid (e.g. a `K` sweep); the inverse stages are
/// sized so that `eps_impl ≤ eps/2`.
pub fn solve_with_grid(problem: &SylvesterProblem, grid: QuadratureGrid, mode: Mode, banded_tau: Option<f64>, seed: u64) -> Result<SolveReport> {
    let strip = problem.strip()?;
    if grid.a != strip.a {
        return Err(Error::InvalidParameter(format!("grid a = {} differs from the certificate a = {}", grid.a, strip.a)));
    }
    let budget = crate::quadrature::grid_budget(&grid, strip.gamma)?;
    let eps = budget.eps_sgn;
    solve_on_grid(problem, grid, budget, eps, mode, banded_tau, seed)
}

fn solve_on_grid(
    problem: &SylvesterProblem,
    grid: QuadratureGrid,
    budget: SincErrorBudget,
    eps: f64,
    mode: Mode,
    banded_tau: Option<f64>,
    seed: u64,
) -> Result<SolveReport> {
    let strip = problem.strip()?;
    let pair = PencilPair { a: &problem.a, e: None, b: &problem.b, d: None };
    let params = match mode {
        Mode::Plain => {
            let r = match problem.fov_mu() {
                Some(mu) => 3.0 / mu,
                None => 3.0 * strip.gamma,
            };
            ProfileParams::SylvesterPlain { r_a: r, r_b: r, check: Some(pair) }
        }
        Mode::Rebalanced => ProfileParams::SylvesterExact { pair },
        Mode::Banded => {
            let mu = problem
                .fov_mu()
                .ok_or_else(|| Error::Hypothesis("banded mode needs a FoV certificate".into()))?;
            let tau = match banded_tau {
                Some(t) => t,
                None => imaginary_extent(&problem.a)?.max(imaginary_extent(&problem.b)?),
            };
            for (name, x) in [("A", &problem.a), ("B", &problem.b)] {
                if !band_check(x, mu, tau, MARGIN_TOL)? {
                    return Err(Error::Hypothesis(format!("W({name}) is not inside the band Re >= {mu}, |Im| <= {tau}")));
                }
            }
            ProfileParams::SylvesterBanded { mu, tau, check: Some(pair) }
        }
    };
    let profile = build_profile(params, &grid)?;
    let base = match problem.fov_mu() {
        Some(mu) => INVERSE_PRECISION_CONSTANT * eps * mu,
        None => INVERSE_PRECISION_CONSTANT * eps / strip.gamma,
    };
    let norm_c = problem.c.operator_norm();
    let e = inverse_precisions(eps, base, &profile, norm_c);
    let left = Side { x: &problem.a, w: None, x_name: "A", w_name: "E" };
    let right = Side { x: &problem.b, w: None, x_name: "B", w_name: "D" };
    let desc = sylvester_pipeline(left, right, &problem.c, &grid, &profile, (e, e), seed)?;
    finish(desc, budget, grid, profile, problem.certificate.clone(), strip, mode_name(mode), vec![e, e], seed)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    desc: BlockEncodingDescriptor,
    budget: SincErrorBudget,
    grid: QuadratureGrid,
    profile: NodewiseProfile,
    certificate: Certificate,
    strip: StripCertificate,
    mode: String,
    eps_inverse: Vec<f64>,
    seed: u64,
) -> Result<SolveReport> {
    let eps_det = budget.eps_sgn / 2.0;
    let eps_impl = desc.eps;
    let desc = desc.add_error(eps_det)?;
    let x_approx = match &desc.payload {
        crate::ledger::Payload::Dense(m) => m.clone(),
        _ => unreachable!("index contraction yields a dense payload"),
    };
    Ok(SolveReport {
        x_approx,
        beta_x: desc.alpha,
        eps_det,
        eps_impl,
        eps_inverse,
        queries: desc.queries.clone(),
        c_q: C_Q,
        mode,
        grid,
        budget,
        profile,
        heuristic: strip.heuristic(),
        certificate,
        strip,
        ledger: desc.summary(),
        seed,
    })
}

/// Profile choice for the direct augmented solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DirectProfile {
    /// Constant bound `r_M` on `(1+t)||(M ± i t)^{-1}||`.
    Plain(f64),
    /// Exact nodewise norms.
    Exact,
}

/// `X = ½ [S_{K,h}(M)]_{12}` from one shifted-inverse family of the augmented matrix.
pub fn solve_direct_augmented(problem: &SylvesterProblem, eps: f64, profile_m: DirectProfile, seed: u64) -> Result<SolveReport> {
    check_eps(eps)?;
    let strip = problem.strip()?;
    let (grid, budget) = grid_for(eps, &strip)?;
    let m = problem.augmented();
    let params = match profile_m {
        DirectProfile::Plain(r) => ProfileParams::ShiftPair { family: Family::Direct, r: Some(r), m: Some(&m) },
        DirectProfile::Exact => ProfileParams::ShiftPair { family: Family::Direct, r: None, m: Some(&m) },
    };
    let profile = build_profile(params, &grid)?;
    let r = profile.r_max;
    let mut eps_m = (eps * r / (2.0 * profile.theta)).min(1.0);
    while profile.theta * eps_m / r > eps / 2.0 {
        eps_m /= 2.0;
    }
    let queries: BTreeMap<String, u64> = ["A", "B", "C"].iter().map(|k| (k.to_string(), 1)).collect();
    let um = BlockEncodingDescriptor::oracle_with_queries(&m, 1, queries)?;
    let inv = shift_pair_inverse(&um, &grid, &profile, eps_m, seed)?;
    let coeffs: Vec<f64> = profile.weights.iter().zip(&profile.rho).map(|(w, p)| w * p / r).collect();
    let half_sign = index_lcu(&inv, &coeffs)?;
    let (n, k) = (problem.a.rows(), problem.b.rows());
    let desc = half_sign.sub_block(0, n, n, k)?;
    let mode = match profile_m {
        DirectProfile::Plain(_) => "direct_plain",
        DirectProfile::Exact => "direct_exact",
    };
    finish(desc, budget, grid, profile, problem.certificate.clone(), strip, mode.into(), vec![eps_m], seed)
}

/// QSVT inverse of `⊕_j (M ∓ i t)/((1+t) d_j)` for a shift-pair profile (`-i t` block first).
pub(crate) fn shift_pair_inverse(
    um: &BlockEncodingDescriptor,
    grid: &QuadratureGrid,
    profile: &NodewiseProfile,
    eps_inv: f64,
    seed: u64,
) -> Result<BlockEncodingDescriptor> {
    let r = profile.r_max;
    let n = grid.len();
    let coeffs: ShiftCoefficients = profile
        .rho
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let t = grid.nodes[j % n];
            let sign = if j < n { -1.0 } else { 1.0 };
            let scale = p / (r * (1.0 + t));
            (Complex64::new(scale, 0.0), imag(sign * t) * scale)
        })
        .collect();
    let mux = mux_shift(MuxShift::OneMatrix { t: um, coeffs })?;
    let mut g = rng(seed);
    qsvt_inverse(&mux, r, eps_inv, &mut g)
}

/// Weights of the direct family, exposed for tests: `h t/(2π(1+t))` twice.
pub fn direct_weights(grid: &QuadratureGrid) -> Vec<f64> {
    shift_pair_weights(Family::Direct, grid)
}

/// `A X D + E X B = C` with invertible weights `E`, `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedProblem {
    #[serde(rename = "A")]
    pub a: ComplexMatrix,
    #[serde(rename = "B")]
    pub b: ComplexMatrix,
    #[serde(rename = "C")]
    pub c: ComplexMatrix,
    #[serde(rename = "E")]
    pub e: ComplexMatrix,
    #[serde(rename = "D")]
    pub d: ComplexMatrix,
    /// `(Ã, B̃, C̃) = (E^{-1}A, B D^{-1}, E^{-1} C D^{-1})`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reduced: Option<(ComplexMatrix, ComplexMatrix, ComplexMatrix)>,
}

impl GeneralizedProblem {
    pub fn new(a: ComplexMatrix, b: ComplexMatrix, c: ComplexMatrix, e: ComplexMatrix, d: ComplexMatrix) -> Result<Self> {
        augmented(&a, &b, &c)?;
        if (e.rows(), e.cols()) != (a.rows(), a.cols()) || (d.rows(), d.cols()) != (b.rows(), b.cols()) {
            return Err(Error::Dimension("weights must match A and B".into()));
        }
        Ok(Self { a, b, c, e, d, reduced: None })
    }
}

/// Populates the reduced triple and checks the reduced-resolvent identity at `t = 1`.
pub fn reduce_generalized(p: &GeneralizedProblem) -> Result<GeneralizedProblem> {
    let e_inv = p.e.inverse().map_err(|_| Error::Hypothesis("E is singular".into()))?;
    let d_inv = p.d.inverse().map_err(|_| Error::Hypothesis("D is singular".into()))?;
    let at = &e_inv * &p.a;
    let bt = &p.b * &d_inv;
    let ct = &(&e_inv * &p.c) * &d_inv;
    let it = imag(1.0);
    let lhs = &(&(&p.a + &p.e.scale(-it)).inverse()? * &p.c) * &(&p.b + &p.d.scale(it)).inverse()?;
    let rhs = &(&at.shifted(-it).inverse()? * &ct) * &bt.shifted(it).inverse()?;
    let gap = (&lhs - &rhs).operator_norm();
    if gap > 1e-10 * lhs.operator_norm().max(1.0) {
        return Err(Error::Residual { residual: gap });
    }
    Ok(GeneralizedProblem { reduced: Some((at, bt, ct)), ..p.clone() })
}

/// Certificate family for a generalized solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeneralizedRegime {
    /// `E, D ≻ 0` with weighted margins `H(E^{-1/2} A E^{-1/2}), H(D^{-1/2} B D^{-1/2}) ⪰ μ > 0`.
    WeightedFov,
    /// Sampled strip bound of the reduced augmented matrix at the given `a`
    /// (default: half its imaginary-axis gap).
    Strip { a: Option<f64>, samples: (usize, usize) },
}

fn inverse_sqrt_hpd(e: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    if !e.is_hermitian(1e-12 * e.operator_norm().max(1.0)) {
        return Err(Error::Hypothesis("weight is not Hermitian".into()));
    }
    let (vals, vecs) = e.hermitian_eigen()?;
    if !(vals[0] > 0.0) {
        return Err(Error::Hypothesis("weight is not positive definite".into()));
    }
    let d: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    let kappa = vals[vals.len() - 1] / vals[0];
    Ok((&(&vecs * &ComplexMatrix::from_real_diagonal(&d)) * &vecs.adjoint(), kappa))
}

/// Generalized Sylvester solve through pencil resolvents.
///
/// The data are scaled down, when needed, so the reduced augmented matrix (and, in
/// the weighted FoV regime, the weighted coefficients) have norm at most one, and each pencil is
/// divided by `max(||A||, ||E||)` (resp. `max(||B||, ||D||)`) so the input oracles
/// are unit encodings. None of these scalings changes `X`.
pub fn solve_generalized(p: &GeneralizedProblem, eps: f64, regime: GeneralizedRegime, mode: Mode, seed: u64) -> Result<SolveReport> {
    check_eps(eps)?;
    let reduced = reduce_generalized(p)?;
    let (at, bt, ct) = reduced.reduced.as_ref().expect("reduced");
    let m_red = augmented(at, bt, ct)?;
    let weighted = match regime {
        GeneralizedRegime::WeightedFov => {
            let (e_is, kappa_e) = inverse_sqrt_hpd(&p.e)?;
            let (d_is, kappa_d) = inverse_sqrt_hpd(&p.d)?;
            let ah = &(&e_is * &p.a) * &e_is;
            let bh = &(&d_is * &p.b) * &d_is;
            Some((ah, bh, kappa_e, kappa_d))
        }
        GeneralizedRegime::Strip { .. } => None,
    };
    let mut scale_norm = m_red.operator_norm();
    if let Some((ah, bh, _, _)) = &weighted {
        scale_norm = scale_norm.max(ah.operator_norm()).max(bh.operator_norm());
    }
    if !(scale_norm > 0.0) {
        return Err(Error::InvalidParameter("reduced augmented matrix is zero".into()));
    }
    let lambda = 1.0 / scale_norm.max(1.0);
    let (a1, b1) = (p.a.scale_real(lambda), p.b.scale_real(lambda));
    let s_l = a1.operator_norm().max(p.e.operator_norm());
    let s_r = b1.operator_norm().max(p.d.operator_norm());
    let (a, e) = (a1.scale_real(1.0 / s_l), p.e.scale_real(1.0 / s_l));
    let (b, d) = (b1.scale_real(1.0 / s_r), p.d.scale_real(1.0 / s_r));
    let c = p.c.scale_real(lambda / (s_l * s_r));
    let ct_norm = ct.operator_norm() * lambda;
    let e_inv_norm = 1.0 / e.sigma_min();
    let d_inv_norm = 1.0 / d.sigma_min();

    let (strip, mu, certificate) = match (&weighted, regime) {
        (Some((ah, bh, kappa_e, kappa_d)), _) => {
            let mu = lambda * numerical_range_margin(ah, 0.0)?.min(numerical_range_margin(bh, 0.0)?);
            if !(mu > 0.0) {
                return Err(Error::Hypothesis(format!("weighted margin {mu} is not positive")));
            }
            let strip = strip_bound_weighted_fov(*kappa_e, *kappa_d, mu, mu / 2.0, ct_norm)?;
            let cert = Certificate::Fov(FovCertificate { lambda, ..FovCertificate::identity(mu) });
            (strip, Some(mu), cert)
        }
        (None, GeneralizedRegime::Strip { a, samples }) => {
            check_half_planes(at, bt)?;
            let m = m_red.scale_real(lambda);
            let gap = m.eigenvalues()?.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
            let a = a.unwrap_or((gap / 2.0).min(0.5));
            let strip = strip_bound_sampled_with(&m, a, samples.0, samples.1, SAMPLED_SAFETY)?;
            (strip.clone(), None, Certificate::Strip(strip))
        }
        (None, GeneralizedRegime::WeightedFov) => unreachable!(),
    };
    let (grid, budget) = grid_for(eps, &strip)?;
    let pair = PencilPair { a: &a, e: Some(&e), b: &b, d: Some(&d) };
    let params = match mode {
        Mode::Plain => {
            let (ra, rb) = match mu {
                Some(mu) => (3.0 * e_inv_norm / mu, 3.0 * d_inv_norm / mu),
                None => (3.0 * e_inv_norm * strip.gamma, 3.0 * d_inv_norm * strip.gamma),
            };
            ProfileParams::SylvesterPlain { r_a: ra, r_b: rb, check: Some(pair) }
        }
        Mode::Rebalanced => ProfileParams::SylvesterExact { pair },
        Mode::Banded => return Err(Error::InvalidParameter("banded mode is not available for generalized problems".into())),
    };
    let profile = build_profile(params, &grid)?;
    let base = match mu {
        Some(mu) => INVERSE_PRECISION_CONSTANT * eps * mu,
        None => INVERSE_PRECISION_CONSTANT * eps / strip.gamma,
    };
    let eps_inv = inverse_precisions(eps, base, &profile, c.operator_norm());
    let left = Side { x: &a, w: Some(&e), x_name: "A", w_name: "E" };
    let right = Side { x: &b, w: Some(&d), x_name: "B", w_name: "D" };
    let desc = sylvester_pipeline(left, right, &c, &grid, &profile, (eps_inv, eps_inv), seed)?;
    finish(desc, budget, grid, profile, certificate, strip, mode_name(mode), vec![eps_inv, eps_inv], seed)
}

/// `A* X E + E* X A = -Q` via the left pair `(A*, E*)` and right pair `(A, E)`.
///
/// A stable `A` (negative weighted margin) is reflected to `-A` with right-hand side
/// `Q`, which leaves `X` unchanged.
pub fn solve_lyapunov(a: &ComplexMatrix, e: &ComplexMatrix, q: &ComplexMatrix, eps: f64, mode: Mode, seed: u64) -> Result<SolveReport> {
    let (e_is, _) = inverse_sqrt_hpd(e)?;
    let margin = numerical_range_margin(&(&(&e_is * a) * &e_is), 0.0)?;
    let (a, c) = if margin < 0.0 { (-a, q.clone()) } else { (a.clone(), -q) };
    let p = GeneralizedProblem::new(a.adjoint(), a.clone(), c, e.adjoint(), e.clone())?;
    solve_generalized(&p, eps, GeneralizedRegime::WeightedFov, mode, seed)
}
