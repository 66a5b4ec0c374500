//! Convergence and normalization sweeps over seeded FoV ensembles.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use signet_core::certificates::{Certificate, FovCertificate};
use signet_core::ensemble::{fov_triple, random_hpd, random_with_norm, rng};
use signet_core::oracle::{sign_dense, sylvester_kron_solve};
use signet_core::quadrature::{build_grid, grid_budget, sign_approximant, Step};
use signet_core::sylvester::{solve, solve_with_grid, Mode, SolveReport, SylvesterProblem};
use signet_core::{Error, Result};

use crate::commands::{parse, to_value};
use crate::report::{format_csv_float, Outcome, Verdict};
use crate::RunConfig;

/// Balanced-rule strip parameter used by the `K` sweep when it fits under `arcsin(a)`.
pub const SWEEP_BETA: f64 = 0.25;
/// Relative tolerance on the fitted decay slope.
pub const SLOPE_TOL: f64 = 0.2;
/// Errors below this are treated as rounding and excluded from the slope fit.
const ERROR_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Fixed problem, varying `K` on the balanced rule.
    K,
    /// Plain-mode normalization against `1/μ²`.
    Mu,
    /// Banded (`τ = 0`) against plain normalization.
    Banded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub n: usize,
    pub m: usize,
    pub mu: Vec<f64>,
    pub beta: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { kind: SweepKind::K, n: 3, m: 3, mu: vec![], beta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub h: f64,
    pub eps_sgn_budget: f64,
    pub actual_error: f64,
    #[serde(rename = "beta_X")]
    pub beta_x: f64,
    pub q_a: u64,
    pub q_b: u64,
    pub mode: String,
    pub mu: f64,
}

impl SweepRow {
    fn from_report(r: &SolveReport, actual_error: f64, mu: f64) -> Self {
        Self {
            k: r.grid.k,
            h: r.grid.h,
            eps_sgn_budget: r.budget.eps_sgn,
            actual_error,
            beta_x: r.beta_x,
            q_a: r.q("A"),
            q_b: r.q("B"),
            mode: r.mode.clone(),
            mu,
        }
    }
}

pub fn csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("K,h,eps_sgn_budget,actual_error,beta_X,q_A,q_B,mode,mu\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.k,
            format_csv_float(r.h),
            format_csv_float(r.eps_sgn_budget),
            format_csv_float(r.actual_error),
            format_csv_float(r.beta_x),
            r.q_a,
            r.q_b,
            r.mode,
            format_csv_float(r.mu)
        ));
    }
    s
}

/// Least-squares slope of `ln(error)` against `√K`, skipping rows at the rounding floor.
pub fn fitted_slope(rows: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|(_, e)| *e > ERROR_FLOOR).map(|&(k, e)| ((k as f64).sqrt(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn fov_problem(seed: u64, n: usize, m: usize, mu: f64) -> Result<SylvesterProblem> {
    let (a, b, c) = fov_triple(&mut rng(seed), n, m, mu);
    SylvesterProblem::new(a, b, c, Certificate::Fov(FovCertificate::identity(mu)))
}

fn oracle_error(p: &SylvesterProblem, r: &SolveReport) -> Result<f64> {
    Ok((&r.x_approx - &sylvester_kron_solve(&p.a, &p.b, &p.c)?.value).operator_norm())
}

pub(crate) fn sweep(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let spec: SweepSpec = parse(input)?;
    if spec.n.max(spec.m) > config.max_dim {
        return Err(Error::DimensionCap { dim: spec.n.max(spec.m), cap: config.max_dim });
    }
    match spec.kind {
        SweepKind::K => k_sweep(config, &spec),
        SweepKind::Mu => mu_sweep(config, &spec),
        SweepKind::Banded => banded_sweep(config, &spec),
    }
}

fn k_sweep(config: &RunConfig, spec: &SweepSpec) -> Result<Outcome> {
    let mu = spec.mu.first().copied().unwrap_or(0.6);
    let p = fov_problem(config.seed, spec.n, spec.m, mu)?;
    let strip = p.strip()?;
    let beta = spec.beta.unwrap_or(if SWEEP_BETA < strip.a.asin() { SWEEP_BETA } else { strip.a.asin() / 2.0 });
    let mode: Mode = config.mode.parse()?;
    let m = p.augmented();
    let exact = sign_dense(&m)?.value;
    let mut rows = vec![];
    let mut verdicts = vec![];
    for &k in &config.ks {
        let grid = build_grid(k, beta, strip.a, Step::Balanced)?;
        let budget = grid_budget(&grid, strip.gamma)?;
        let actual = (&sign_approximant(&m, &grid)? - &exact).operator_norm();
        verdicts.push(Verdict::le(&format!("budget_dominates_K{k}"), actual, budget.eps_sgn));
        let r = solve_with_grid(&p, grid, mode, None, config.seed)?;
        rows.push(SweepRow::from_report(&r, actual, mu));
    }
    let expected = -(2.0 * std::f64::consts::PI * beta).sqrt();
    let slope = fitted_slope(&rows.iter().map(|r| (r.k, r.actual_error)).collect::<Vec<_>>());
    verdicts.push(match slope {
        Some(s) => Verdict::le("slope_relative_deviation", ((s - expected) / expected).abs(), SLOPE_TOL),
        None => Verdict::holds("slope_fit_has_points", false),
    });
    let report = json!({ "kind": "k", "beta": beta, "strip": to_value(&strip), "slope": slope, "expected_slope": expected, "rows": to_value(&rows) });
    Ok(Outcome { csv: Some(csv(&rows)), report, oracle: None, verdicts })
}

fn mu_list(spec: &SweepSpec) -> Vec<f64> {
    if spec.mu.is_empty() {
        vec![0.1, 0.2, 0.4]
    } else {
        spec.mu.clone()
    }
}

fn mu_sweep(config: &RunConfig, spec: &SweepSpec) -> Result<Outcome> {
    let mut rows = vec![];
    let mut verdicts = vec![];
    for (i, &mu) in mu_list(spec).iter().enumerate() {
        let p = fov_problem(config.seed.wrapping_add(i as u64), spec.n, spec.m, mu)?;
        let r = solve(&p, config.eps, Mode::Plain, None, config.seed)?;
        let err = oracle_error(&p, &r)?;
        verdicts.push(Verdict::le(&format!("error_within_bound_mu{mu}"), err, r.error_bound()));
        rows.push(SweepRow::from_report(&r, err, mu));
    }
    let scaled: Vec<f64> = rows.iter().map(|r| r.beta_x * r.mu * r.mu).collect();
    let ratio = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    verdicts.push(Verdict::le("beta_mu_squared_spread", ratio, 2.0));
    let report = json!({ "kind": "mu", "beta_mu_squared": scaled, "rows": to_value(&rows) });
    Ok(Outcome { csv: Some(csv(&rows)), report, oracle: None, verdicts })
}

fn banded_sweep(config: &RunConfig, spec: &SweepSpec) -> Result<Outcome> {
    let mut rows = vec![];
    let mut verdicts = vec![];
    for (i, &mu) in mu_list(spec).iter().enumerate() {
        let mut g = rng(config.seed.wrapping_add(i as u64));
        let a = random_hpd(&mut g, spec.n, mu, 0.75);
        let b = random_hpd(&mut g, spec.m, mu, 0.75);
        let c = random_with_norm(&mut g, spec.n, spec.m, 0.2);
        let p = SylvesterProblem::new(a, b, c, Certificate::Fov(FovCertificate::identity(mu)))?;
        let plain = solve(&p, config.eps, Mode::Plain, None, config.seed)?;
        let banded = solve(&p, config.eps, Mode::Banded, Some(0.0), config.seed)?;
        verdicts.push(Verdict::le(&format!("banded_le_plain_mu{mu}"), banded.beta_x, plain.beta_x));
        verdicts.push(Verdict::le(&format!("banded_le_4_over_mu{mu}"), banded.beta_x, 4.0 / mu));
        for r in [&plain, &banded] {
            let err = oracle_error(&p, r)?;
            verdicts.push(Verdict::le(&format!("{}_error_within_bound_mu{mu}", r.mode), err, r.error_bound()));
            rows.push(SweepRow::from_report(r, err, mu));
        }
    }
    let report = json!({ "kind": "banded", "rows": to_value(&rows) });
    Ok(Outcome { csv: Some(csv(&rows)), report, oracle: None, verdicts })
}
