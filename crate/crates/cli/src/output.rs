//! Files written into run directories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use cellplan::evaluation::{check_feasibility, sir_of, CheckMode, Constraint, ObjectiveReport};
use cellplan::instance::{linear_to_db, FacilityKind};
use cellplan::{Assignment, Deployment, ProblemInstance, SolveResult};
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

/// The part of a result that `verify` reads back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub deployment: Deployment,
    pub assignment: Assignment,
    #[serde(default)]
    pub objective: Option<f64>,
}

#[derive(Serialize)]
pub struct SolveFile<'a> {
    #[serde(flatten)]
    pub result: &'a SolveResult,
    pub solution: Solution,
}

/// Writes `value` as pretty JSON to `target`, or stdout for `-`.
pub fn write_json<T: Serialize>(value: &T, target: &str) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .context("serializing output")
        .map_err(Failure::io)?;
    text.push('\n');
    if target == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .context("writing stdout")
            .map_err(Failure::io)
    } else {
        std::fs::write(target, text)
            .with_context(|| format!("writing {target}"))
            .map_err(Failure::io)
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::io)
}

pub const DEPLOYMENT_MAP_HEADER: [&str; 12] = [
    "record",
    "id",
    "x_m",
    "y_m",
    "is_macro_site",
    "facility_type",
    "load_bps",
    "capacity_bps",
    "demand_bps",
    "serving_site",
    "serving_type",
    "sir_db",
];

/// One `site` row per site and one `user` row per user; fields that do not
/// apply to a record are left empty. Unopened sites have type `none`,
/// unserved users an empty serving site.
pub fn write_deployment_map<W: Write>(
    inst: &ProblemInstance,
    y: &Deployment,
    x: &Assignment,
    out: W,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DEPLOYMENT_MAP_HEADER)?;
    for site in inst.sites() {
        let (kind, load, cap) = match y.get(site.id) {
            Some(k) => {
                let f = cellplan::FacilityRef::new(site.id, k);
                let g = inst.global_index(f);
                (
                    inst.spec(f).kind.as_str().to_string(),
                    x.served_demand[g].to_string(),
                    inst.capacity(f).to_string(),
                )
            }
            None => ("none".to_string(), String::new(), String::new()),
        };
        w.write_record([
            "site".to_string(),
            site.id.to_string(),
            site.position.x.to_string(),
            site.position.y.to_string(),
            site.is_macro_site.to_string(),
            kind,
            load,
            cap,
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for (j, user) in inst.users().iter().enumerate() {
        let (site, kind, sir) = match x.serving[j] {
            Some(f) => {
                let sir = sir_of(inst, y, j, f).map(linear_to_db)?;
                (
                    f.site.to_string(),
                    inst.spec(f).kind.as_str().to_string(),
                    sir.to_string(),
                )
            }
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            "user".to_string(),
            user.id.to_string(),
            user.position.x.to_string(),
            user.position.y.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            user.demand.to_string(),
            site,
            kind,
            sir,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary of a solved deployment.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub small_cells_opened: usize,
    pub massive_mimo_upgrades: usize,
    pub conventional_macros: usize,
    pub users: usize,
    pub served_users: usize,
    pub unserved_users: usize,
    pub covered_demand_bps: f64,
    pub total_demand_bps: f64,
    pub min_served_sir_db: Option<f64>,
    /// Served users below their own SIR target; zero for a valid solution.
    pub sir_violations: usize,
    pub violations: usize,
    pub objective: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub iterations: usize,
    pub termination_reason: String,
    pub threads: usize,
    pub elapsed_seconds: f64,
}

pub fn run_report(inst: &ProblemInstance, result: &SolveResult, elapsed_seconds: f64) -> RunReport {
    let y = &result.best_y;
    let x = &result.best_x;
    let report: &ObjectiveReport = &result.objective;
    let violations = check_feasibility(y, x, inst, CheckMode::Relaxed);
    let min_sir = report
        .per_user_sir
        .iter()
        .flatten()
        .copied()
        .map(linear_to_db)
        .reduce(f64::min);
    RunReport {
        small_cells_opened: y.count_kind(inst, FacilityKind::SmallCell),
        massive_mimo_upgrades: y.count_kind(inst, FacilityKind::MacroMassiveMimo),
        conventional_macros: y.count_kind(inst, FacilityKind::MacroConventional),
        users: inst.n_users(),
        served_users: x.served_count(),
        unserved_users: inst.n_users() - x.served_count(),
        covered_demand_bps: report.covered_demand,
        total_demand_bps: inst.total_demand(),
        min_served_sir_db: min_sir,
        sir_violations: violations.iter().filter(|v| v.constraint == Constraint::Sir).count(),
        violations: violations.len(),
        objective: result.objective.objective,
        lower: result.lower,
        upper: result.upper,
        gap: result.gap,
        iterations: result.iterations,
        termination_reason: result.termination_reason.as_str().to_string(),
        threads: rayon::current_num_threads(),
        elapsed_seconds,
    }
}
