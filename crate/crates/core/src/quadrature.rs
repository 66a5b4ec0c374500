//! Logarithmic-sinc quadrature for the matrix sign function.
//!
//! The sign integral `sign(M) = (2/π) ∫_0^∞ M (M² + t² I)^{-1} dt` is discretized on
//! the nodes `t_k = e^{kh}`, `k = -K..K`, giving the partial-fraction sum
//! `S_{K,h}(M) = (h/π) Σ t_k [(M - i t_k)^{-1} + (M + i t_k)^{-1}]`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Nodes `t_k = e^{kh}` for `k = -K..K`, stored at index `k + K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    #[serde(rename = "K")]
    pub k: usize,
    pub h: f64,
    pub beta: f64,
    pub a: f64,
    pub balanced: bool,
    pub nodes: Vec<f64>,
}

/// How the log step `h` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    /// `h = √(2πβ/K)`.
    Balanced,
    Fixed(f64),
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node `t_k` for `k ∈ [-K, K]`.
    pub fn node(&self, k: i64) -> f64 {
        self.nodes[(k + self.k as i64) as usize]
    }

    /// Signed index `k` of storage slot `i`.
    pub fn index(&self, i: usize) -> i64 {
        i as i64 - self.k as i64
    }

    /// Truncation length `s = Kh`.
    pub fn span(&self) -> f64 {
        self.k as f64 * self.h
    }
}

/// `β = arcsin(a)/2`, the default strip half-width used by every solver.
pub fn default_beta(a: f64) -> f64 {
    a.asin() / 2.0
}

fn check_beta_a(beta: f64, a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("a = {a} outside (0, 1)")));
    }
    if !(beta > 0.0 && beta < a.asin()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} outside (0, arcsin a = {})", a.asin())));
    }
    Ok(())
}

pub fn build_grid(k: usize, beta: f64, a: f64, step: Step) -> Result<QuadratureGrid> {
    check_beta_a(beta, a)?;
    if k == 0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    let (h, balanced) = match step {
        Step::Balanced => ((2.0 * PI * beta / k as f64).sqrt(), true),
        Step::Fixed(h) if h > 0.0 && h.is_finite() => (h, false),
        Step::Fixed(h) => return Err(Error::InvalidParameter(format!("h = {h} must be positive"))),
    };
    let kk = k as i64;
    let mut nodes = vec![0.0; 2 * k + 1];
    nodes[k] = 1.0;
    for j in 1..=kk {
        let t = (j as f64 * h).exp();
        nodes[(kk + j) as usize] = t;
        nodes[(kk - j) as usize] = 1.0 / t;
    }
    Ok(QuadratureGrid { k, h, beta, a, balanced, nodes })
}

/// Explicit error bound for `||sign(M) - S_{K,h}(M)||`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SincErrorBudget {
    pub c_beta_a_gamma: f64,
    pub c_tilde: f64,
    pub eps_sgn: f64,
    pub gamma: f64,
    /// Periodization term, negative-tail term, positive-tail term.
    pub components: [f64; 3],
}

/// `C_{β,a,γ} = (4/π)(aγ/sin β + sin β/(a - sin β))`.
pub fn c_beta_a_gamma(beta: f64, a: f64, gamma: f64) -> f64 {
    let sb = beta.sin();
    4.0 / PI * (a * gamma / sb + sb / (a - sb))
}

/// `C̃ = 2 C_{β,a,γ} + (2γ + 4)/π`.
pub fn c_tilde(beta: f64, a: f64, gamma: f64) -> f64 {
    2.0 * c_beta_a_gamma(beta, a, gamma) + (2.0 * gamma + 4.0) / PI
}

pub fn error_budget(k: usize, h: f64, beta: f64, a: f64, gamma: f64) -> Result<SincErrorBudget> {
    check_beta_a(beta, a)?;
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be finite and >= 1")));
    }
    if !(h > 0.0) || k == 0 {
        return Err(Error::InvalidParameter("need K >= 1 and h > 0".into()));
    }
    let c = c_beta_a_gamma(beta, a, gamma);
    let s = k as f64 * h;
    let periodization = c / (2.0 * PI * beta / h).exp_m1();
    let negative_tail = 2.0 * gamma / PI * (-s).exp();
    let positive_tail = 2.0 / (PI * s.exp_m1());
    Ok(SincErrorBudget {
        c_beta_a_gamma: c,
        c_tilde: c_tilde(beta, a, gamma),
        eps_sgn: periodization + negative_tail + positive_tail,
        gamma,
        components: [periodization, negative_tail, positive_tail],
    })
}

pub fn grid_budget(grid: &QuadratureGrid, gamma: f64) -> Result<SincErrorBudget> {
    error_budget(grid.k, grid.h, grid.beta, grid.a, gamma)
}

/// Smallest `K` from the closed-form sufficient condition, bumped until the
/// balanced-grid budget is at most `eps`.
pub fn choose_k(eps: f64, beta: f64, a: f64, gamma: f64) -> Result<usize> {
    check_beta_a(beta, a)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} outside (0, 1]")));
    }
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be finite and >= 1")));
    }
    let ct = c_tilde(beta, a, gamma);
    let l = (1.0 + ct / eps).ln();
    let mut k = ((LN_2 * LN_2).max(l * l) / (2.0 * PI * beta)).ceil().max(1.0) as usize;
    loop {
        let grid = build_grid(k, beta, a, Step::Balanced)?;
        if grid_budget(&grid, gamma)?.eps_sgn <= eps {
            return Ok(k);
        }
        k += 1;
    }
}

/// Balanced grid with `K = choose_k(eps, ..)` together with its budget.
pub fn balanced_grid(eps: f64, beta: f64, a: f64, gamma: f64) -> Result<(QuadratureGrid, SincErrorBudget)> {
    let k = choose_k(eps, beta, a, gamma)?;
    let grid = build_grid(k, beta, a, Step::Balanced)?;
    let budget = grid_budget(&grid, gamma)?;
    Ok((grid, budget))
}

/// Re-labels a singular-shift error with the quadrature node it came from.
pub(crate) fn at_node(k: i64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::SingularShift { sigma_min } => Error::SingularNode { node: k, sigma_min },
        other => other,
    }
}

/// Evaluates `f` at every node in parallel and sums the results in index order.
pub(crate) fn ordered_node_sum<F>(grid: &QuadratureGrid, f: F) -> Result<ComplexMatrix>
where
    F: Fn(i64, f64) -> Result<ComplexMatrix> + Sync,
{
    let terms: Vec<ComplexMatrix> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let k = grid.index(i);
            f(k, grid.nodes[i]).map_err(at_node(k))
        })
        .collect::<Result<_>>()?;
    let mut iter = terms.into_iter();
    let mut acc = iter.next().expect("grid has at least one node");
    for term in iter {
        acc += &term;
    }
    Ok(acc)
}

/// Partial-fraction form of `S_{K,h}(M)`.
pub fn sign_approximant(m: &ComplexMatrix, grid: &QuadratureGrid) -> Result<ComplexMatrix> {
    m.ensure_square()?;
    let sum = ordered_node_sum(grid, |_, t| {
        let it = Complex64::new(0.0, t);
        let minus = m.shifted(-it).inverse()?;
        let plus = m.shifted(it).inverse()?;
        Ok((minus + plus).scale_real(t))
    })?;
    Ok(sum.scale_real(grid.h / PI))
}

/// Symmetric form `(2h/π) Σ t_k M (M² + t_k² I)^{-1}`.
pub fn sign_approximant_symmetric(m: &ComplexMatrix, grid: &QuadratureGrid) -> Result<ComplexMatrix> {
    m.ensure_square()?;
    let m2 = m * m;
    let sum = ordered_node_sum(grid, |_, t| {
        let inv = m2.shifted(Complex64::new(t * t, 0.0)).inverse()?;
        Ok((m * &inv).scale_real(t))
    })?;
    Ok(sum.scale_real(2.0 * grid.h / PI))
}

/// Coefficient sums of the three node-weight families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSums {
    /// `Σ h t_k / (π (1 + t_k)²)`.
    pub lambda_syl: f64,
    /// `Σ 2 h t_k / (π (1 + t_k²))`.
    pub lambda_sq: f64,
    /// `Σ 2 h t_k / (π (1 + t_k))`.
    pub lambda_care: f64,
}

pub fn weight_sums(grid: &QuadratureGrid) -> WeightSums {
    let h = grid.h;
    let mut w = WeightSums { lambda_syl: 0.0, lambda_sq: 0.0, lambda_care: 0.0 };
    for &t in &grid.nodes {
        w.lambda_syl += h * t / (PI * (1.0 + t) * (1.0 + t));
        w.lambda_sq += 2.0 * h * t / (PI * (1.0 + t * t));
        w.lambda_care += 2.0 * h * t / (PI * (1.0 + t));
    }
    w
}
