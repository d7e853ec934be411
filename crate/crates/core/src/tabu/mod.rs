//! Two-level tabu search over deployments.
//!
//! The outer level changes macro types with small cells fixed; after every
//! outer step a full inner loop opens, closes and moves small cells with the
//! macro layout fixed. Both levels share one tabu list driven by a single
//! step clock.

mod moves;

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluation::{deployment_value, Deployment, LocalEvaluator};
use crate::instance::ProblemInstance;
use crate::Result;

pub use moves::{
    nearest_empty_sites, neighborhood_macro, neighborhood_small, Attribute, Direction, Move, MoveKind, SiteChange,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabuParams {
    /// Steps a reversed attribute stays forbidden.
    pub tenure: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    pub n_swap: usize,
    /// Facilities opened by a diversification; 0 disables it.
    pub n_div: usize,
    /// Inner steps without improving the best value before diversifying.
    pub n_no_improve: usize,
    /// Macro sites stay conventional and the outer neighborhood is empty.
    pub single_level: bool,
}

impl Default for TabuParams {
    fn default() -> Self {
        Self {
            tenure: 7,
            max_outer: 20,
            max_inner: 50,
            n_swap: 5,
            n_div: 3,
            n_no_improve: 10,
            single_level: false,
        }
    }
}

impl TabuParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_div > 0 && self.n_no_improve == 0 {
            return Err(crate::Error::InvalidConfig(
                "n_no_improve must be positive when diversification is enabled".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabuEntry {
    pub forbidden: Attribute,
    /// Last step at which the entry applies.
    pub expires: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabuState {
    pub tabu_list: VecDeque<TabuEntry>,
    /// Steps each facility has been open, by global index.
    pub open_frequency: Vec<u64>,
    pub best_y: Deployment,
    pub best_value: f64,
    pub no_improve_count: usize,
    pub t1: usize,
    pub t2: usize,
    /// Steps taken over both levels.
    pub clock: u64,
    pub tenure: usize,
}

impl TabuState {
    pub fn new(inst: &ProblemInstance, y0: &Deployment, value: f64, tenure: usize) -> Self {
        Self {
            tabu_list: VecDeque::new(),
            open_frequency: vec![0; inst.n_facilities()],
            best_y: y0.clone(),
            best_value: value,
            no_improve_count: 0,
            t1: 0,
            t2: 0,
            clock: 0,
            tenure,
        }
    }

    /// Starts the next step and drops expired entries.
    pub fn begin_step(&mut self) -> u64 {
        self.clock += 1;
        let now = self.clock;
        self.tabu_list.retain(|e| e.expires >= now);
        now
    }

    pub fn is_tabu(&self, mv: &Move) -> bool {
        mv.attributes().any(|a| {
            self.tabu_list
                .iter()
                .any(|e| e.forbidden == a && e.expires >= self.clock)
        })
    }

    /// Forbids undoing `mv` for the next `tenure` steps.
    pub fn record(&mut self, mv: &Move) {
        if self.tenure == 0 {
            return;
        }
        let expires = self.clock + self.tenure as u64;
        for a in mv.attributes() {
            self.tabu_list.push_back(TabuEntry {
                forbidden: a.reversed(),
                expires,
            });
        }
    }

    pub fn evict_oldest(&mut self) -> bool {
        self.tabu_list.pop_front().is_some()
    }

    pub fn clear_tabu(&mut self) {
        self.tabu_list.clear();
    }

    pub fn count_open(&mut self, y: &Deployment, inst: &ProblemInstance) {
        for g in y.open_globals(inst) {
            self.open_frequency[g] += 1;
        }
    }
}

/// Opens up to `n_div` facilities at empty non-macro sites, least frequently
/// open first (global index breaks ties), then resets the tabu memory.
pub fn diversify(y: &Deployment, state: &mut TabuState, inst: &ProblemInstance, n_div: usize) -> Deployment {
    let mut candidates: Vec<(u64, usize)> = inst
        .small_sites()
        .filter(|&i| y.get(i).is_none())
        .flat_map(|i| {
            (0..inst.site(i).catalog.len()).map(move |k| inst.global_index(crate::instance::FacilityRef::new(i, k)))
        })
        .map(|g| (state.open_frequency[g], g))
        .collect();
    candidates.sort_unstable();
    let mut out = y.clone();
    let mut opened = 0;
    for (_, g) in candidates {
        if opened == n_div {
            break;
        }
        let f = inst.facility_ref(g);
        if out.get(f.site).is_none() {
            out.set(f.site, Some(f.facility));
            opened += 1;
        }
    }
    state.clear_tabu();
    state.no_improve_count = 0;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Start,
    Outer,
    Inner,
    Diversify,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Start => "start",
            Level::Outer => "outer",
            Level::Inner => "inner",
            Level::Diversify => "diversify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabuTraceRow {
    /// Iteration of the enclosing solver loop; 0 for standalone searches.
    pub solver_iteration: usize,
    pub level: Level,
    pub outer_iteration: usize,
    pub inner_iteration: usize,
    pub move_kind: Option<MoveKind>,
    /// Value of the deployment moved to.
    pub candidate_value: f64,
    pub upper: f64,
    pub tabu_hits: usize,
    pub aspiration: bool,
    pub diversifications: usize,
}

pub const TABU_TRACE_HEADER: [&str; 10] = [
    "solver_iteration",
    "level",
    "outer_iteration",
    "inner_iteration",
    "move_kind",
    "candidate_value",
    "upper",
    "tabu_hits",
    "aspiration",
    "diversifications",
];

pub fn write_tabu_trace<W: Write>(rows: &[TabuTraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABU_TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.solver_iteration.to_string(),
            r.level.as_str().to_string(),
            r.outer_iteration.to_string(),
            r.inner_iteration.to_string(),
            r.move_kind.map(MoveKind::as_str).unwrap_or("").to_string(),
            format!("{:?}", r.candidate_value),
            format!("{:?}", r.upper),
            r.tabu_hits.to_string(),
            r.aspiration.to_string(),
            r.diversifications.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_y: Deployment,
    pub upper: f64,
    pub trace: Vec<TabuTraceRow>,
    pub state: TabuState,
    /// Deployment after every trace row but the first, when requested.
    pub path: Option<Vec<Deployment>>,
    pub evaluations: u64,
}

struct Search<'a> {
    inst: &'a ProblemInstance,
    params: TabuParams,
    state: TabuState,
    current: Deployment,
    trace: Vec<TabuTraceRow>,
    path: Option<Vec<Deployment>>,
    diversifications: usize,
    evaluations: u64,
}

impl Search<'_> {
    fn row(&self, level: Level, kind: Option<MoveKind>, value: f64, hits: usize, aspiration: bool) -> TabuTraceRow {
        TabuTraceRow {
            solver_iteration: 0,
            level,
            outer_iteration: self.state.t1,
            inner_iteration: self.state.t2,
            move_kind: kind,
            candidate_value: value,
            upper: self.state.best_value,
            tabu_hits: hits,
            aspiration,
            diversifications: self.diversifications,
        }
    }

    fn offer(&mut self, y: &Deployment, value: f64) -> bool {
        if value < self.state.best_value {
            self.state.best_value = value;
            self.state.best_y = y.clone();
            true
        } else {
            false
        }
    }

    /// One move over `moves`. Returns whether the best value improved.
    fn step(&mut self, level: Level, moves: Vec<Move>) -> bool {
        if moves.is_empty() {
            return false;
        }
        self.state.begin_step();
        let evaluator = LocalEvaluator::new(self.inst, &self.current);
        let values: Vec<f64> = moves
            .par_iter()
            .map_init(|| evaluator.scratch(), |s, m| evaluator.value_with(&m.assignments(), s))
            .collect();
        self.evaluations += moves.len() as u64;

        let argmin = |allowed: &dyn Fn(usize) -> bool| {
            (0..moves.len())
                .filter(|&i| allowed(i))
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(b) if values[b] <= values[i] => Some(b),
                    _ => Some(i),
                })
        };
        let mut tabu: Vec<bool> = moves.iter().map(|m| self.state.is_tabu(m)).collect();
        let hits = tabu.iter().filter(|&&t| t).count();
        let best = argmin(&|_| true).expect("non-empty neighborhood");

        let (chosen, aspiration) = if values[best] < self.state.best_value {
            (best, tabu[best])
        } else {
            loop {
                if let Some(i) = argmin(&|i| !tabu[i]) {
                    break (i, false);
                }
                self.state.evict_oldest();
                tabu = moves.iter().map(|m| self.state.is_tabu(m)).collect();
            }
        };

        let mv = &moves[chosen];
        debug_assert!(match level {
            Level::Outer => mv.kind.is_macro(),
            _ => !mv.kind.is_macro(),
        });
        self.current = mv.apply(&self.current);
        debug_assert!(self.current.is_valid(self.inst));
        self.state.record(mv);
        self.state.count_open(&self.current, self.inst);
        let current = self.current.clone();
        let improved = self.offer(&current, values[chosen]);
        if let Some(p) = &mut self.path {
            p.push(current);
        }
        let row = self.row(level, Some(mv.kind), values[chosen], hits, aspiration);
        self.trace.push(row);
        improved
    }

    fn run(mut self) -> SearchOutcome {
        let p = self.params;
        for t1 in 0..p.max_outer {
            self.state.t1 = t1 + 1;
            self.state.t2 = 0;
            let macro_moves = if p.single_level {
                Vec::new()
            } else {
                neighborhood_macro(&self.current, self.inst)
            };
            self.step(Level::Outer, macro_moves);
            for t2 in 0..p.max_inner {
                self.state.t2 = t2 + 1;
                let small_moves = neighborhood_small(&self.current, self.inst, p.n_swap);
                if self.step(Level::Inner, small_moves) {
                    self.state.no_improve_count = 0;
                } else {
                    self.state.no_improve_count += 1;
                }
                if p.n_div > 0 && self.state.no_improve_count >= p.n_no_improve {
                    self.current = diversify(&self.current, &mut self.state, self.inst, p.n_div);
                    self.diversifications += 1;
                    let value = deployment_value(&self.current, self.inst);
                    self.evaluations += 1;
                    let current = self.current.clone();
                    self.offer(&current, value);
                    if let Some(p) = &mut self.path {
                        p.push(current);
                    }
                    let row = self.row(Level::Diversify, None, value, 0, false);
                    self.trace.push(row);
                }
            }
        }
        SearchOutcome {
            best_y: self.state.best_y.clone(),
            upper: self.state.best_value,
            trace: self.trace,
            state: self.state,
            path: self.path,
            evaluations: self.evaluations,
        }
    }
}

/// Prepares a start deployment: fills empty macro sites and, in
/// single-level mode, resets every macro site to its conventional type.
pub fn prepare_start(y0: &Deployment, inst: &ProblemInstance, params: &TabuParams) -> Deployment {
    let mut y = y0.clone();
    y.repair(inst);
    if params.single_level {
        for i in inst.macro_sites() {
            y.set(i, Some(inst.default_macro_facility(i)));
        }
    }
    y
}

pub fn two_level_search(y0: &Deployment, inst: &ProblemInstance, params: &TabuParams) -> SearchOutcome {
    search(y0, inst, params, false)
}

/// As [`two_level_search`], also returning the deployment after every step.
pub fn two_level_search_with_path(y0: &Deployment, inst: &ProblemInstance, params: &TabuParams) -> SearchOutcome {
    search(y0, inst, params, true)
}

fn search(y0: &Deployment, inst: &ProblemInstance, params: &TabuParams, record_path: bool) -> SearchOutcome {
    let start = prepare_start(y0, inst, params);
    let value = deployment_value(&start, inst);
    let state = TabuState::new(inst, &start, value, params.tenure);
    let mut s = Search {
        inst,
        params: *params,
        state,
        current: start,
        trace: Vec::new(),
        path: record_path.then(Vec::new),
        diversifications: 0,
        evaluations: 1,
    };
    let row = s.row(Level::Start, None, value, 0, false);
    s.trace.push(row);
    s.run()
}
