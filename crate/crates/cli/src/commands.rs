use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use signet_core::care::{build_hamiltonian, care_solve, HamiltonianProfile, XNormSource};
use signet_core::certificates::{conditioning_report, optimal_shift_rotation, Certificate};
use signet_core::ledger::LedgerSummary;
use signet_core::matrix::numerical_range_margin;
use signet_core::matrix_functions::{geom_solve, sqrt_solve, FunctionReport, GeomMeanTask, SqrtTask};
use signet_core::oracle::{
    care_stable_subspace_solve, generalized_sylvester_kron_solve, geometric_mean_dense, principal_sqrt_dense, sign_dense,
    sylvester_kron_solve, OracleResult,
};
use signet_core::quadrature::{build_grid, default_beta, grid_budget, sign_approximant, Step};
use signet_core::sylvester::{
    solve, solve_direct_augmented, solve_generalized, solve_lyapunov, DirectProfile, GeneralizedProblem, GeneralizedRegime,
    Mode, Regime, SolveReport, SylvesterProblem,
};
use signet_core::{certificates, ComplexMatrix, Error, Result};

use crate::report::{format_csv_float, Outcome, Verdict};
use crate::{Command, RunConfig, STRIP_SAMPLES};

/// Relative tolerance for "ledger alpha equals reported normalization".
const ALPHA_TOL: f64 = 1e-10;

pub(crate) fn dispatch(config: &RunConfig, input: &Value) -> Result<Outcome> {
    match config.command {
        Command::SolveSylvester => solve_sylvester(config, input),
        Command::SolveGeneralized => solve_generalized_cmd(config, input),
        Command::SolveLyapunov => solve_lyapunov_cmd(config, input),
        Command::Sqrt => sqrt_cmd(config, input),
        Command::Geomean => geomean_cmd(config, input),
        Command::Care => care_cmd(config, input),
        Command::Certify => certify(config, input),
        Command::VerifySign => verify_sign(config, input),
        Command::Sweep => crate::sweep::sweep(config, input),
        Command::Conditioning => conditioning(config, input),
    }
}

pub(crate) fn parse<T: DeserializeOwned>(input: &Value) -> Result<T> {
    serde_json::from_value(input.clone()).map_err(|e| Error::Parse(e.to_string()))
}

pub(crate) fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

pub(crate) fn cap(config: &RunConfig, ms: &[&ComplexMatrix]) -> Result<()> {
    for m in ms {
        let dim = m.rows().max(m.cols());
        if dim > config.max_dim {
            return Err(Error::DimensionCap { dim, cap: config.max_dim });
        }
    }
    Ok(())
}

fn regime(config: &RunConfig) -> Result<Regime> {
    config.regime.parse()
}

fn oracle_json(o: &OracleResult, error: f64, bound: f64) -> Value {
    json!({ "method": o.method, "residual": o.residual, "error": error, "bound": bound })
}

fn alpha_verdict(name: &str, ledger: &LedgerSummary, beta: f64) -> Verdict {
    Verdict::close(name, ledger.alpha, beta, ALPHA_TOL)
}

#[derive(Deserialize)]
struct Triple {
    #[serde(rename = "A")]
    a: ComplexMatrix,
    #[serde(rename = "B")]
    b: ComplexMatrix,
    #[serde(rename = "C")]
    c: ComplexMatrix,
    #[serde(default)]
    tau: Option<f64>,
}

pub(crate) fn sylvester_problem(config: &RunConfig, a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<SylvesterProblem> {
    match regime(config)? {
        Regime::Fov => SylvesterProblem::from_fov(a, b, c, config.angles),
        Regime::Strip => SylvesterProblem::from_strip(a, b, c, None, STRIP_SAMPLES, config.safety),
    }
}

/// Normalization formula for the plain and banded modes, if one applies.
fn sylvester_beta_bound(report: &SolveReport, banded_tau_zero: bool) -> Option<(&'static str, f64)> {
    let mu = match &report.certificate {
        Certificate::Fov(f) => Some(f.mu),
        Certificate::Strip(_) => None,
    };
    match (report.mode.as_str(), mu) {
        ("plain", Some(mu)) => Some(("beta_fov_plain", 21.0 / (mu * mu))),
        ("plain", None) => Some(("beta_strip_plain", 21.0 * report.strip.gamma * report.strip.gamma)),
        ("banded", Some(mu)) if banded_tau_zero => Some(("beta_banded_tau0", 4.0 / mu)),
        _ => None,
    }
}

fn sylvester_verdicts(report: &SolveReport, banded_tau_zero: bool) -> Vec<Verdict> {
    let mut v = vec![alpha_verdict("ledger_alpha_equals_beta", &report.ledger, report.beta_x)];
    if let Some((name, bound)) = sylvester_beta_bound(report, banded_tau_zero) {
        v.push(Verdict::le(name, report.beta_x, bound));
    }
    v
}

fn solve_sylvester(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let t: Triple = parse(input)?;
    cap(config, &[&t.a, &t.b, &t.c])?;
    let problem = sylvester_problem(config, &t.a, &t.b, &t.c)?;
    let (report, tau_zero) = if config.mode == "direct" {
        (solve_direct_augmented(&problem, config.eps, DirectProfile::Exact, config.seed)?, false)
    } else {
        let mode: Mode = config.mode.parse()?;
        let tau_zero = match t.tau {
            Some(tau) => tau == 0.0,
            None => {
                certificates::imaginary_extent(&problem.a)?.max(certificates::imaginary_extent(&problem.b)?) <= 1e-12
            }
        };
        (solve(&problem, config.eps, mode, t.tau, config.seed)?, tau_zero)
    };
    let mut verdicts = sylvester_verdicts(&report, tau_zero);
    let oracle = if config.no_verify {
        None
    } else {
        let o = sylvester_kron_solve(&t.a, &t.b, &t.c)?;
        let err = (&report.x_approx - &o.value).operator_norm();
        verdicts.push(Verdict::le("oracle_error_within_bound", err, report.error_bound()));
        Some(oracle_json(&o, err, report.error_bound()))
    };
    Ok(Outcome { report: to_value(&report), oracle, verdicts, csv: None })
}

#[derive(Deserialize)]
struct GeneralizedInput {
    #[serde(rename = "A")]
    a: ComplexMatrix,
    #[serde(rename = "B")]
    b: ComplexMatrix,
    #[serde(rename = "C")]
    c: ComplexMatrix,
    #[serde(rename = "E")]
    e: ComplexMatrix,
    #[serde(rename = "D")]
    d: ComplexMatrix,
}

fn generalized_regime(config: &RunConfig) -> Result<GeneralizedRegime> {
    Ok(match regime(config)? {
        Regime::Fov => GeneralizedRegime::WeightedFov,
        Regime::Strip => GeneralizedRegime::Strip { a: None, samples: STRIP_SAMPLES },
    })
}

fn solve_generalized_cmd(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let g: GeneralizedInput = parse(input)?;
    cap(config, &[&g.a, &g.b, &g.c, &g.e, &g.d])?;
    let p = GeneralizedProblem::new(g.a.clone(), g.b.clone(), g.c.clone(), g.e.clone(), g.d.clone())?;
    let report = solve_generalized(&p, config.eps, generalized_regime(config)?, config.mode.parse()?, config.seed)?;
    let mut verdicts = vec![alpha_verdict("ledger_alpha_equals_beta", &report.ledger, report.beta_x)];
    if report.mode == "plain" {
        // r_A r_B = 9 ||E^{-1}|| ||D^{-1}||/μ² (or 9 ||E^{-1}|| ||D^{-1}|| γ²) in solver coordinates
        let (ra, rb) = (report.profile.r_a.unwrap_or(f64::NAN), report.profile.r_b.unwrap_or(f64::NAN));
        verdicts.push(Verdict::le("beta_generalized_plain", report.beta_x, 21.0 / 9.0 * ra * rb));
    }
    let oracle = if config.no_verify {
        None
    } else {
        let o = generalized_sylvester_kron_solve(&g.a, &g.b, &g.c, &g.e, &g.d)?;
        let err = (&report.x_approx - &o.value).operator_norm();
        verdicts.push(Verdict::le("oracle_error_within_bound", err, report.error_bound()));
        Some(oracle_json(&o, err, report.error_bound()))
    };
    Ok(Outcome { report: to_value(&report), oracle, verdicts, csv: None })
}

#[derive(Deserialize)]
struct LyapunovInput {
    #[serde(rename = "A")]
    a: ComplexMatrix,
    #[serde(rename = "E")]
    e: Option<ComplexMatrix>,
    #[serde(rename = "Q")]
    q: ComplexMatrix,
}

fn solve_lyapunov_cmd(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let l: LyapunovInput = parse(input)?;
    let e = l.e.unwrap_or_else(|| ComplexMatrix::identity(l.a.rows()));
    cap(config, &[&l.a, &e, &l.q])?;
    let report = solve_lyapunov(&l.a, &e, &l.q, config.eps, config.mode.parse()?, config.seed)?;
    let mut verdicts = vec![alpha_verdict("ledger_alpha_equals_beta", &report.ledger, report.beta_x)];
    let oracle = if config.no_verify {
        None
    } else {
        let o = generalized_sylvester_kron_solve(&l.a.adjoint(), &l.a, &(-&l.q), &e.adjoint(), &e)?;
        let err = (&report.x_approx - &o.value).operator_norm();
        verdicts.push(Verdict::le("oracle_error_within_bound", err, report.error_bound()));
        Some(oracle_json(&o, err, report.error_bound()))
    };
    Ok(Outcome { report: to_value(&report), oracle, verdicts, csv: None })
}

fn function_verdicts(r: &FunctionReport, bound: f64, label: &str) -> Vec<Verdict> {
    let mut v = vec![];
    for (name, o) in &r.outputs {
        v.push(alpha_verdict(&format!("{name}_ledger_alpha_equals_beta"), &o.ledger, o.beta));
        v.push(Verdict::le(&format!("{name}_{label}"), o.beta, bound));
    }
    v
}

/// Compares recovered outputs with oracle matrices; errors scale with `recovery_scale`.
fn compare_outputs(r: &FunctionReport, expected: &[(&str, &ComplexMatrix)], verdicts: &mut Vec<Verdict>) -> Value {
    let mut out = serde_json::Map::new();
    for (name, m) in expected {
        let o = r.output(name);
        let err = (&o.recovered() - *m).operator_norm();
        let bound = o.error_bound() * o.recovery_scale;
        verdicts.push(Verdict::le(&format!("{name}_oracle_error_within_bound"), err, bound));
        out.insert(name.to_string(), json!({ "error": err, "bound": bound }));
    }
    Value::Object(out)
}

#[derive(Deserialize)]
struct SingleInput {
    #[serde(rename = "A")]
    a: ComplexMatrix,
}

fn sqrt_cmd(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let s: SingleInput = parse(input)?;
    cap(config, &[&s.a])?;
    let task = SqrtTask::new(&s.a)?;
    let r = sqrt_solve(&task, config.eps, config.seed)?;
    let mut verdicts = function_verdicts(&r, 4.0 / task.mu.sqrt(), "beta_le_4_over_sqrt_mu");
    let oracle = if config.no_verify {
        None
    } else {
        let root = principal_sqrt_dense(&s.a)?;
        let inv = root.value.inverse()?;
        let mut cmp = compare_outputs(&r, &[("sqrt", &root.value), ("inv_sqrt", &inv)], &mut verdicts);
        cmp["method"] = json!(root.method);
        Some(cmp)
    };
    Ok(Outcome { report: json!({ "task": to_value(&task), "solve": to_value(&r) }), oracle, verdicts, csv: None })
}

#[derive(Deserialize)]
struct PairInput {
    #[serde(rename = "A")]
    a: ComplexMatrix,
    #[serde(rename = "B")]
    b: ComplexMatrix,
    #[serde(rename = "C", default)]
    c: Option<ComplexMatrix>,
    #[serde(default)]
    mu: Option<f64>,
}

fn geomean_cmd(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let p: PairInput = parse(input)?;
    cap(config, &[&p.a, &p.b])?;
    let task = GeomMeanTask::new(&p.a, &p.b)?;
    let r = geom_solve(&task, config.eps, config.seed)?;
    let mut verdicts = function_verdicts(&r, 4.0 / (task.mu_a * task.mu_b).sqrt(), "beta_le_4_over_sqrt_mu_a_mu_b");
    let oracle = if config.no_verify {
        None
    } else {
        let mean = geometric_mean_dense(&p.a, &p.b)?;
        let inv = mean.value.inverse()?;
        let mut cmp = compare_outputs(&r, &[("mean", &mean.value), ("inverse_mean", &inv)], &mut verdicts);
        cmp["method"] = json!(mean.method);
        Some(cmp)
    };
    Ok(Outcome { report: json!({ "task": to_value(&task), "solve": to_value(&r) }), oracle, verdicts, csv: None })
}

#[derive(Deserialize)]
struct CareInput {
    #[serde(rename = "A")]
    a: ComplexMatrix,
    #[serde(rename = "G")]
    g: ComplexMatrix,
    #[serde(rename = "Q")]
    q: ComplexMatrix,
}

fn care_cmd(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let c: CareInput = parse(input)?;
    cap(config, &[&c.a, &c.g, &c.q])?;
    let task = build_hamiltonian(&c.a, &c.g, &c.q)?;
    let profile = match config.mode.as_str() {
        "plain" => HamiltonianProfile::Plain,
        "rebalanced" | "exact" => HamiltonianProfile::Exact,
        other => return Err(Error::Parse(format!("mode '{other}' is not available for care"))),
    };
    let source = if config.no_verify { XNormSource::Estimate } else { XNormSource::Oracle };
    let r = care_solve(&task, config.eps, config.eps, profile, source, config.seed)?;
    let closed = &c.a - &(&c.g * &r.x_approx);
    let max_re = closed.eigenvalues()?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let mut verdicts = vec![
        alpha_verdict("ledger_alpha_equals_beta", &r.ledger, r.beta_x),
        Verdict::le("beta_x_formula", r.beta_x, (1.0 + r.beta_sign) / r.sigma_exact_lower),
        Verdict::le("residual_within_bound", r.residual, r.residual_bound),
        Verdict::le("closed_loop_max_real_part", max_re, 0.0),
    ];
    let oracle = if config.no_verify {
        None
    } else {
        let o = care_stable_subspace_solve(&c.a, &c.g, &c.q)?;
        let err = (&r.x_approx - &o.value).operator_norm();
        verdicts.push(Verdict::le("oracle_error_within_bound", err, r.error_bound));
        Some(oracle_json(&o, err, r.error_bound))
    };
    Ok(Outcome { report: json!({ "task": to_value(&task), "solve": to_value(&r) }), oracle, verdicts, csv: None })
}

fn certify(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let p: PairInput = parse(input)?;
    cap(config, &[&p.a, &p.b])?;
    let fov = optimal_shift_rotation(&p.a, &p.b, config.angles)?;
    let (a1, b1) = fov.transform(&p.a, &p.b);
    let margin = numerical_range_margin(&a1, 0.0)?.min(numerical_range_margin(&b1, 0.0)?);
    let mut verdicts = vec![Verdict::le("transformed_margin_deficit", fov.delta / 2.0 - 1e-6 - margin, 0.0)];
    let mut report = json!({ "fov": to_value(&fov), "transformed_margin": margin });
    if let Some(c) = &p.c {
        cap(config, &[c])?;
        let x0 = sylvester_kron_solve(&p.a, &p.b, c)?.value;
        let x1 = sylvester_kron_solve(&a1, &b1, &c.scale(fov.eta * fov.lambda))?.value;
        let gap = (&x0 - &x1).operator_norm() / x0.operator_norm().max(1.0);
        verdicts.push(Verdict::le("shift_rotation_invariance", gap, 1e-9));
        let strip = SylvesterProblem::from_strip(&p.a, &p.b, c, None, STRIP_SAMPLES, config.safety).and_then(|s| s.strip());
        report["strip"] = match strip {
            Ok(s) => to_value(&s),
            Err(e) => json!({ "error": e.to_string() }),
        };
    }
    Ok(Outcome { report, oracle: None, verdicts, csv: None })
}

fn conditioning(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let p: PairInput = parse(input)?;
    cap(config, &[&p.a, &p.b])?;
    let mu = match p.mu {
        Some(mu) => mu,
        None => numerical_range_margin(&p.a, 0.0)?.min(numerical_range_margin(&p.b, 0.0)?),
    };
    let r = conditioning_report(&p.a, &p.b, mu)?;
    let mut verdicts = vec![];
    if mu > 0.0 {
        verdicts.push(Verdict::le("sigma_min_deficit", r.sep_lower - 1e-10 - r.sigma_min_kron, 0.0));
    }
    Ok(Outcome { report: to_value(&r), oracle: None, verdicts, csv: None })
}

#[derive(Deserialize)]
struct SignInput {
    #[serde(rename = "M", default)]
    m: Option<ComplexMatrix>,
    #[serde(rename = "A", default)]
    a: Option<ComplexMatrix>,
    #[serde(rename = "B", default)]
    b: Option<ComplexMatrix>,
    #[serde(rename = "C", default)]
    c: Option<ComplexMatrix>,
}

fn verify_sign(config: &RunConfig, input: &Value) -> Result<Outcome> {
    let s: SignInput = parse(input)?;
    let (m, strip) = match (s.m, s.a, s.b, s.c) {
        (Some(m), None, None, None) => {
            cap(config, &[&m])?;
            let norm = m.operator_norm();
            let m = if norm > 1.0 { m.scale_real(1.0 / norm) } else { m };
            let gap = m.eigenvalues()?.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
            let strip = certificates::strip_bound_sampled_with(&m, (gap / 2.0).min(0.5), STRIP_SAMPLES.0, STRIP_SAMPLES.1, config.safety)?;
            (m, strip)
        }
        (None, Some(a), Some(b), Some(c)) => {
            cap(config, &[&a, &b, &c])?;
            let p = sylvester_problem(config, &a, &b, &c)?;
            let strip = p.strip()?;
            (p.augmented(), strip)
        }
        _ => return Err(Error::Parse("verify-sign needs either M or A, B, C".into())),
    };
    let exact = sign_dense(&m)?;
    let beta = default_beta(strip.a);
    let mut rows = vec![];
    let mut verdicts = vec![];
    let mut csv = String::from("K,h,actual_error,budget\n");
    for &k in &config.ks {
        let grid = build_grid(k, beta, strip.a, Step::Balanced)?;
        let budget = grid_budget(&grid, strip.gamma)?;
        let actual = (&sign_approximant(&m, &grid)? - &exact.value).operator_norm();
        verdicts.push(Verdict::le(&format!("budget_dominates_K{k}"), actual, budget.eps_sgn));
        csv.push_str(&format!("{k},{},{},{}\n", format_csv_float(grid.h), format_csv_float(actual), format_csv_float(budget.eps_sgn)));
        rows.push(json!({ "K": k, "h": grid.h, "actual_error": actual, "budget": budget.eps_sgn }));
    }
    let report = json!({ "strip": to_value(&strip), "beta": beta, "rows": rows });
    Ok(Outcome { report, oracle: Some(json!({ "method": exact.method, "residual": exact.residual })), verdicts, csv: Some(csv) })
}
