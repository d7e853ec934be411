//! Lagrangian lower bounds alternated with tabu upper bounds.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::evaluation::{assign_users, objective_of, Assignment, Deployment, ObjectiveReport};
use crate::instance::ProblemInstance;
use crate::relaxation::{
    complementary_slackness, solve_relaxed_master, subgradient_step, LagrangianState, RelaxationParams, Subgradient,
};
use crate::tabu::{two_level_search, TabuParams, TabuTraceRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub max_iterations: usize,
    /// Non-improving iterations before the step scale is halved.
    pub stall_limit: usize,
    /// The step scale is reset whenever the iteration counter is a multiple
    /// of this.
    pub reset_period: usize,
    /// Relative gap at which to stop.
    pub epsilon: f64,
    pub initial_step: f64,
    /// Start each tabu run from the best deployment so far instead of the
    /// relaxed one.
    pub warm_start_from_best: bool,
    pub tabu: TabuParams,
    pub relaxation: RelaxationParams,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            stall_limit: 5,
            reset_period: 50,
            epsilon: 0.01,
            initial_step: 2.0,
            warm_start_from_best: false,
            tabu: TabuParams::default(),
            relaxation: RelaxationParams::default(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if self.stall_limit < 1 || self.reset_period < 1 {
            return bad("stall_limit and reset_period must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial_step must be positive");
        }
        if !(self.relaxation.slackness_tol >= 0.0) {
            return bad("slackness_tol must be non-negative");
        }
        self.tabu.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Gap,
    ComplementarySlackness,
    MaxIterations,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Gap => "gap",
            TerminationReason::ComplementarySlackness => "complementary_slackness",
            TerminationReason::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Value of the relaxed problem at this iteration's multipliers.
    pub relaxed_value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Stall counter after the bound update, before any halving.
    pub stall: usize,
    /// Step scale used for this iteration's multiplier update.
    pub step_scale: f64,
    pub halved: bool,
    /// The scale was reset to its initial value on entering this iteration.
    pub reset: bool,
    pub grad_norm: f64,
    pub step_length: f64,
    pub tabu_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best_y: Deployment,
    pub best_x: Assignment,
    pub objective: ObjectiveReport,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub iterations: usize,
    pub termination_reason: TerminationReason,
    pub seed: u64,
    pub params: SolverParams,
    pub trace: Vec<IterationRecord>,
    #[serde(skip)]
    pub tabu_trace: Vec<TabuTraceRow>,
}

/// `(U - L) / |U|`, with `U = 0` mapped to 0 when the bounds meet.
pub fn relative_gap(lower: f64, upper: f64) -> f64 {
    if upper == 0.0 {
        if upper - lower <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (upper - lower) / upper.abs()
    }
}

struct CachedSearch {
    best_y: Deployment,
    upper: f64,
    trace: Vec<TabuTraceRow>,
}

/// Runs the bound loop. The search is deterministic; `seed` is recorded in
/// the result for provenance.
pub fn solve(inst: &ProblemInstance, params: &SolverParams, seed: u64) -> Result<SolveResult> {
    params.validate()?;
    let p = params;
    let mut state = LagrangianState::new(inst.n_users(), p.initial_step);
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut best_y: Option<Deployment> = None;
    let mut q = 0usize;
    let mut t = 1usize;
    let mut reset_pending = false;
    let mut trace = Vec::new();
    let mut tabu_trace = Vec::new();
    // Same start, same search: reuse earlier runs.
    let mut searches: HashMap<Deployment, CachedSearch> = HashMap::new();

    let reason = loop {
        let relaxed = solve_relaxed_master(inst, &state.multipliers, &p.relaxation);
        let relaxed_value = relaxed.lower_bound;
        if relaxed_value > lower {
            lower = relaxed_value;
            q = 0;
        } else {
            q += 1;
        }
        let stall = q;
        let halved = q == p.stall_limit;
        if halved {
            state.step_scale /= 2.0;
            q = 0;
        }

        let start = match (&best_y, p.warm_start_from_best) {
            (Some(b), true) => b.clone(),
            _ => relaxed.deployment.clone(),
        };
        let cached = searches.entry(start).or_insert_with_key(|start| {
            let out = two_level_search(start, inst, &p.tabu);
            CachedSearch {
                best_y: out.best_y,
                upper: out.upper,
                trace: out.trace,
            }
        });
        tabu_trace.extend(cached.trace.iter().map(|r| TabuTraceRow {
            solver_iteration: t,
            ..r.clone()
        }));
        if cached.upper < upper {
            upper = cached.upper;
            best_y = Some(cached.best_y.clone());
        }
        let tabu_upper = cached.upper;
        state.best_lower = lower;
        state.best_upper = upper;

        let grad = Subgradient::compute(inst, &relaxed);
        let slack = complementary_slackness(&relaxed, &grad, &state.multipliers, p.relaxation.slackness_tol);
        let gap = relative_gap(lower, upper);
        let mut record = IterationRecord {
            t,
            relaxed_value,
            lower,
            upper,
            stall,
            step_scale: state.step_scale,
            halved,
            reset: reset_pending,
            grad_norm: grad.norm_sq(inst, p.relaxation.scaling).sqrt(),
            step_length: 0.0,
            tabu_upper,
        };
        reset_pending = false;

        if gap < p.epsilon {
            trace.push(record);
            break TerminationReason::Gap;
        }
        if slack {
            trace.push(record);
            break TerminationReason::ComplementarySlackness;
        }
        let step = subgradient_step(&mut state, &grad, relaxed_value, inst, p.relaxation.scaling);
        record.step_length = step.step;
        trace.push(record);
        t += 1;
        if t % p.reset_period == 0 {
            state.step_scale = p.initial_step;
            reset_pending = true;
        }
        if t > p.max_iterations {
            break TerminationReason::MaxIterations;
        }
    };

    let best_y = best_y.expect("at least one search ran");
    let best_x = assign_users(&best_y, inst);
    let objective = objective_of(&best_y, &best_x, inst);
    debug_assert_eq!(objective.objective, upper);
    Ok(SolveResult {
        gap: relative_gap(lower, upper),
        iterations: trace.len(),
        best_y,
        best_x,
        objective,
        lower,
        upper,
        termination_reason: reason,
        seed,
        params: *params,
        trace,
        tabu_trace,
    })
}

pub const BOUND_TRACE_HEADER: [&str; 11] = [
    "t",
    "relaxed_value",
    "lower",
    "upper",
    "stall",
    "step_scale",
    "halved",
    "reset",
    "grad_norm",
    "step_length",
    "tabu_upper",
];

/// Per-iteration bound rows as CSV.
pub fn bound_trace<W: Write>(result: &SolveResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUND_TRACE_HEADER)?;
    for r in &result.trace {
        w.write_record([
            r.t.to_string(),
            format!("{:?}", r.relaxed_value),
            format!("{:?}", r.lower),
            format!("{:?}", r.upper),
            r.stall.to_string(),
            format!("{:?}", r.step_scale),
            r.halved.to_string(),
            r.reset.to_string(),
            format!("{:?}", r.grad_norm),
            format!("{:?}", r.step_length),
            format!("{:?}", r.tabu_upper),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{check_feasibility, deployment_value, CheckMode};
    use crate::instance::fixtures::*;
    use crate::instance::{generate_instance, GeneratorConfig, Point};
    use crate::oracle::{enumerate_optimum, OracleLimits};
    use proptest::prelude::*;

    fn quick() -> SolverParams {
        SolverParams {
            max_iterations: 30,
            tabu: TabuParams {
                max_outer: 4,
                max_inner: 10,
                ..TabuParams::default()
            },
            ..SolverParams::default()
        }
    }

    fn tiny(users: usize, small: usize, seed: u64) -> ProblemInstance {
        let cfg = GeneratorConfig {
            n_users: users,
            n_small_sites: small,
            area_width_m: 1000.0,
            area_height_m: 1000.0,
            macro_positions: vec![Point::new(300.0, 500.0)],
            demand_lo_bps: 1e6,
            demand_hi_bps: 40e6,
            ..GeneratorConfig::table1()
        };
        generate_instance(&cfg, seed).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(SolverParams::default().validate().is_ok());
        for bad in [
            SolverParams {
                max_iterations: 0,
                ..Default::default()
            },
            SolverParams {
                epsilon: 0.0,
                ..Default::default()
            },
            SolverParams {
                epsilon: 1.0,
                ..Default::default()
            },
            SolverParams {
                initial_step: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn gap_conventions() {
        assert_eq!(relative_gap(-10.0, -9.0), 1.0 / 9.0);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
        assert_eq!(relative_gap(-1.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn one_macro_one_user_closes_the_gap() {
        let inst = inverse_square(
            vec![site(0, 0.0, 0.0, true, f64::INFINITY)],
            vec![user(0, 25.0, 0.0, 3e6, 8.0)],
        );
        let r = solve(&inst, &SolverParams::default(), 0).unwrap();
        assert_eq!(r.upper, -0.2 * 3e6);
        assert_eq!(r.best_y.as_slice(), &[Some(0)]);
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.lower, r.upper);
        assert_ne!(r.termination_reason, TerminationReason::MaxIterations);
    }

    #[test]
    fn toy_matches_oracle() {
        let inst = tiny(6, 2, 5);
        assert_eq!(inst.n_sites(), 3);
        let r = solve(&inst, &SolverParams::default(), 1).unwrap();
        let o = enumerate_optimum(&inst, &OracleLimits::default()).unwrap();
        assert!(r.lower <= o.optimum + 1e-6, "{} > {}", r.lower, o.optimum);
        assert_eq!(r.upper, o.optimum);
        assert!(check_feasibility(&r.best_y, &r.best_x, &inst, CheckMode::Relaxed).is_empty());
    }

    #[test]
    fn bound_trace_csv_shape() {
        let inst = tiny(8, 3, 2);
        let r = solve(&inst, &quick(), 0).unwrap();
        let mut buf = Vec::new();
        bound_trace(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), BOUND_TRACE_HEADER.join(","));
        assert_eq!(lines.count(), r.trace.len());
        assert!(r.trace.len() <= 30);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trace_contracts(seed in any::<u64>(), n1 in 1usize..4, n2 in 2usize..9) {
            let inst = tiny(7, 3, seed);
            let params = SolverParams { stall_limit: n1, reset_period: n2, epsilon: 1e-9, ..quick() };
            let r = solve(&inst, &params, seed).unwrap();
            prop_assert!(r.trace.len() <= params.max_iterations);
            prop_assert_eq!(r.upper, deployment_value(&r.best_y, &inst));
            prop_assert_eq!(r.objective.objective, r.upper);
            prop_assert!(r.lower <= r.upper + 1e-9);
            let mut prev_s = params.initial_step;
            let mut prev: Option<&IterationRecord> = None;
            for rec in &r.trace {
                if let Some(p) = prev {
                    prop_assert!(rec.lower >= p.lower);
                    prop_assert!(rec.upper <= p.upper);
                }
                prop_assert_eq!(rec.halved, rec.stall == n1);
                prop_assert_eq!(rec.reset, rec.t % n2 == 0);
                let base = if rec.reset { params.initial_step } else { prev_s };
                let expected = if rec.halved { base / 2.0 } else { base };
                prop_assert_eq!(rec.step_scale, expected);
                prev_s = rec.step_scale;
                prev = Some(rec);
            }
            if r.termination_reason == TerminationReason::Gap {
                prop_assert!(r.gap < params.epsilon);
            }
        }

        #[test]
        fn deterministic(seed in any::<u64>()) {
            let inst = tiny(6, 3, seed);
            let a = solve(&inst, &quick(), 3).unwrap();
            let b = solve(&inst, &quick(), 3).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            prop_assert_eq!(a.tabu_trace, b.tabu_trace);
        }
    }
}
