use std::time::Instant;

use anyhow::{anyhow, Context};
use cellplan::evaluation::{check_feasibility, objective_of, CheckMode, Constraint, Violation};
use cellplan::instance::{generate_instance, write_instance, GeneratorConfig, SiteLayout};
use cellplan::solver::{bound_trace, relative_gap};
use cellplan::tabu::write_tabu_trace;
use cellplan::{enumerate_optimum, solve as run_solver, OracleLimits, OracleResult, SolverParams};
use serde::Serialize;
use serde_json::Value;

use crate::args::{GenerateArgs, OracleArgs, Preset, SolveArgs, VerifyArgs};
use crate::config::{load_config, load_instance, sha256_hex, RunConfig};
use crate::exit::{self, Failure, Outcome};
use crate::output::{create, run_report, write_deployment_map, write_json, Solution, SolveFile};

/// Relative tolerance when checking a reported objective.
const OBJECTIVE_RTOL: f64 = 1e-9;

pub fn generate(a: GenerateArgs) -> Outcome {
    let mut cfg = match a.preset {
        Preset::Table1 => GeneratorConfig::table1(),
    };
    if let Some(path) = &a.config {
        cfg = load_config(path)?;
    }
    if let Some(n) = a.users {
        cfg.n_users = n;
    }
    if let Some(n) = a.small_sites {
        cfg.n_small_sites = n;
    }
    if a.grid_layout {
        cfg.layout = SiteLayout::Grid;
    }
    let inst = generate_instance(&cfg, a.seed)?;
    if a.out == "-" {
        let mut out = std::io::stdout().lock();
        write_instance(&inst, &mut out)?;
    } else {
        write_instance(&inst, create(a.out.as_ref())?)?;
    }
    Ok(exit::OK)
}

fn solver_params(config: Option<&std::path::Path>) -> Result<SolverParams, Failure> {
    let params = match config {
        Some(path) => load_config(path)?,
        None => SolverParams::default(),
    };
    Ok(params)
}

pub fn solve(a: SolveArgs) -> Outcome {
    let mut params = solver_params(a.config.as_deref())?;
    if a.single_level {
        params.tabu.single_level = true;
    }
    if let Some(n) = a.max_iterations {
        params.max_iterations = n;
    }
    params.validate()?;
    let (inst, input) = load_instance(&a.instance)?;

    let mut run = RunConfig::new("solve", a.seed);
    run.inputs.push(input);
    run.solver = Some(params);

    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))
        .map_err(Failure::io)?;
    let path = |name: &str| a.out_dir.join(name).to_string_lossy().into_owned();
    write_json(&run, &path("config.json"))?;

    let started = Instant::now();
    let result = run_solver(&inst, &params, a.seed)?;
    let elapsed = started.elapsed().as_secs_f64();

    let file = SolveFile {
        result: &result,
        solution: Solution {
            deployment: result.best_y.clone(),
            assignment: result.best_x.clone(),
            objective: Some(result.objective.objective),
        },
    };
    write_json(&file, &path("solve_result.json"))?;
    bound_trace(&result, create(a.out_dir.join("bounds.csv").as_ref())?)?;
    write_tabu_trace(&result.tabu_trace, create(a.out_dir.join("tabu.csv").as_ref())?)?;
    write_deployment_map(
        &inst,
        &result.best_y,
        &result.best_x,
        create(a.out_dir.join("deployment_map.csv").as_ref())?,
    )
    .map_err(Failure::io)?;

    let report = run_report(&inst, &result, elapsed);
    write_json(&report, &path("report.json"))?;
    write_json(&report, "-")?;
    Ok(exit::OK)
}

#[derive(Serialize)]
struct VerifyReport {
    instance_sha256: String,
    solution_sha256: String,
    mode: CheckMode,
    feasible: bool,
    violations: Vec<Violation>,
    reported_objective: Option<f64>,
    recomputed_objective: Option<f64>,
    objective_matches: bool,
}

/// Finds the solution inside a result file: a `solution` member when there
/// is one, the document root otherwise.
fn extract_solution(doc: Value) -> Result<Solution, Failure> {
    let body = match doc {
        Value::Object(mut map) if map.contains_key("solution") => map.remove("solution").unwrap_or_default(),
        other => other,
    };
    serde_json::from_value(body)
        .context("solution must hold `deployment` and `assignment`")
        .map_err(Failure::bad_input)
}

pub fn verify(a: VerifyArgs) -> Outcome {
    let (inst, input) = load_instance(&a.instance.to_string_lossy())?;
    let bytes = std::fs::read(&a.solution)
        .with_context(|| format!("reading {}", a.solution.display()))
        .map_err(Failure::bad_input)?;
    let doc: Value = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing {}", a.solution.display()))
        .map_err(Failure::bad_input)?;
    let sol = extract_solution(doc)?;

    let mode = if a.strict {
        CheckMode::Strict
    } else {
        CheckMode::Relaxed
    };
    let violations = check_feasibility(&sol.deployment, &sol.assignment, &inst, mode);
    // The objective is only defined once the vectors index real facilities.
    let well_formed = !violations
        .iter()
        .any(|v| matches!(v.constraint, Constraint::Shape | Constraint::UnknownFacility));
    let recomputed = well_formed.then(|| objective_of(&sol.deployment, &sol.assignment, &inst).objective);
    let objective_matches = match (sol.objective, recomputed) {
        (Some(r), Some(c)) => (r - c).abs() <= OBJECTIVE_RTOL * r.abs().max(c.abs()).max(1.0),
        (None, _) => true,
        (Some(_), None) => false,
    };

    let report = VerifyReport {
        instance_sha256: input.sha256,
        solution_sha256: sha256_hex(&bytes),
        mode,
        feasible: violations.is_empty(),
        violations,
        reported_objective: sol.objective,
        recomputed_objective: recomputed,
        objective_matches,
    };
    write_json(&report, &a.out)?;
    if report.feasible && report.objective_matches {
        Ok(exit::OK)
    } else {
        Ok(exit::VIOLATION)
    }
}

#[derive(Serialize)]
struct Comparison {
    lower: f64,
    upper: f64,
    optimum: f64,
    gap: f64,
    lower_ok: bool,
    upper_ok: bool,
}

#[derive(Serialize)]
struct OracleFile<'a> {
    config: RunConfig,
    #[serde(flatten)]
    result: &'a OracleResult,
    solution: Solution,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

pub fn oracle(a: OracleArgs) -> Outcome {
    let mut limits = OracleLimits::default();
    if let Some(n) = a.max_deployments {
        limits.max_deployments = n;
    }
    if let Some(n) = a.max_users {
        limits.max_users = n;
    }
    let params = solver_params(a.config.as_deref())?;
    if a.compare {
        params.validate()?;
    }
    let (inst, input) = load_instance(&a.instance.to_string_lossy())?;

    let mut run = RunConfig::new("oracle", a.seed);
    run.inputs.push(input);
    run.oracle = Some(limits);
    if a.compare {
        run.solver = Some(params);
    }

    let result = enumerate_optimum(&inst, &limits)?;
    let comparison = if a.compare {
        let solved = run_solver(&inst, &params, a.seed)?;
        Some(Comparison {
            lower: solved.lower,
            upper: solved.upper,
            optimum: result.optimum,
            gap: relative_gap(solved.lower, solved.upper),
            lower_ok: solved.lower - 1e-6 <= result.optimum,
            upper_ok: result.optimum <= solved.upper + 1e-9,
        })
    } else {
        None
    };
    let failed = comparison.as_ref().is_some_and(|c| !(c.lower_ok && c.upper_ok));

    let file = OracleFile {
        config: run,
        result: &result,
        solution: Solution {
            deployment: result.optimal_y.clone(),
            assignment: result.optimal_x.clone(),
            objective: Some(result.optimum),
        },
        comparison,
    };
    write_json(&file, &a.out)?;
    if failed {
        return Err(Failure {
            code: exit::VIOLATION,
            error: anyhow!("bounds do not enclose the enumerated optimum"),
        });
    }
    Ok(exit::OK)
}
