//! Deployments, user association, objective evaluation and feasibility checks.
//!
//! Interference is the worst case: every open facility transmits at full load,
//! so a user's SIR depends only on which facilities are open and which one
//! serves it.

mod feasibility;
mod local;

pub use feasibility::{check_feasibility, CheckMode, Constraint, Violation};
pub use local::{LocalEvaluator, LocalScratch};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FacilityKind, FacilityRef, ProblemInstance};

/// At most one open facility per site, stored as the catalog index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Deployment {
    open: Vec<Option<usize>>,
}

impl Deployment {
    pub fn empty(n_sites: usize) -> Self {
        Self {
            open: vec![None; n_sites],
        }
    }

    /// Every macro site runs its conventional type, no small cells.
    pub fn baseline(inst: &ProblemInstance) -> Self {
        let mut y = Self::empty(inst.n_sites());
        for i in inst.macro_sites() {
            y.open[i] = Some(inst.default_macro_facility(i));
        }
        y
    }

    pub fn from_vec(open: Vec<Option<usize>>) -> Self {
        Self { open }
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.open
    }

    pub fn n_sites(&self) -> usize {
        self.open.len()
    }

    pub fn get(&self, site: usize) -> Option<usize> {
        self.open[site]
    }

    pub fn set(&mut self, site: usize, facility: Option<usize>) {
        self.open[site] = facility;
    }

    pub fn is_open(&self, f: FacilityRef) -> bool {
        self.open.get(f.site).copied().flatten() == Some(f.facility)
    }

    pub fn open_facilities(&self) -> impl Iterator<Item = FacilityRef> + '_ {
        self.open
            .iter()
            .enumerate()
            .filter_map(|(i, k)| k.map(|k| FacilityRef::new(i, k)))
    }

    /// Global indices of the open facilities, ascending.
    pub fn open_globals(&self, inst: &ProblemInstance) -> Vec<usize> {
        self.open_facilities().map(|f| inst.global_index(f)).collect()
    }

    pub fn count_open_small(&self, inst: &ProblemInstance) -> usize {
        self.open_facilities()
            .filter(|f| !inst.site(f.site).is_macro_site)
            .count()
    }

    pub fn count_kind(&self, inst: &ProblemInstance, kind: FacilityKind) -> usize {
        self.open_facilities().filter(|&f| inst.spec(f).kind == kind).count()
    }

    pub fn cost(&self, inst: &ProblemInstance) -> f64 {
        self.open_facilities().map(|f| inst.spec(f).cost).sum()
    }

    /// `cost` of this deployment with `changes` applied, without building it.
    pub(crate) fn cost_with(&self, inst: &ProblemInstance, changes: &[(usize, Option<usize>)]) -> f64 {
        (0..self.open.len())
            .filter_map(|i| {
                let k = changes.iter().rev().find(|c| c.0 == i).map_or(self.open[i], |c| c.1)?;
                Some(inst.spec(FacilityRef::new(i, k)).cost)
            })
            .sum()
    }

    /// Checks the structural invariants: right length, catalog indices in
    /// range, and every macro site filled.
    pub fn validate(&self, inst: &ProblemInstance) -> Result<()> {
        if self.open.len() != inst.n_sites() {
            return Err(Error::Logic(format!(
                "deployment covers {} sites, instance has {}",
                self.open.len(),
                inst.n_sites()
            )));
        }
        for (i, k) in self.open.iter().enumerate() {
            match k {
                Some(k) if *k >= inst.site(i).catalog.len() => {
                    return Err(Error::Logic(format!("site {i}: facility {k} not in catalog")))
                }
                None if inst.site(i).is_macro_site => return Err(Error::Logic(format!("macro site {i} is closed"))),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn is_valid(&self, inst: &ProblemInstance) -> bool {
        self.validate(inst).is_ok()
    }

    /// Fills empty macro sites with their conventional type and drops
    /// out-of-range catalog indices.
    pub fn repair(&mut self, inst: &ProblemInstance) {
        self.open.resize(inst.n_sites(), None);
        for i in 0..inst.n_sites() {
            if let Some(k) = self.open[i] {
                if k >= inst.site(i).catalog.len() {
                    self.open[i] = None;
                }
            }
            if self.open[i].is_none() && inst.site(i).is_macro_site {
                self.open[i] = Some(inst.default_macro_facility(i));
            }
        }
    }
}

/// Which facility serves each user, plus the resulting per-facility load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub serving: Vec<Option<FacilityRef>>,
    /// Served demand in bits/s, indexed by global facility number.
    pub served_demand: Vec<f64>,
}

impl Assignment {
    pub fn unserved(inst: &ProblemInstance) -> Self {
        Self {
            serving: vec![None; inst.n_users()],
            served_demand: vec![0.0; inst.n_facilities()],
        }
    }

    /// Builds an assignment from server choices, deriving the loads.
    pub fn from_serving(inst: &ProblemInstance, serving: Vec<Option<FacilityRef>>) -> Self {
        let served_demand = facility_loads(inst, &serving);
        Self { serving, served_demand }
    }

    pub fn served_count(&self) -> usize {
        self.serving.iter().filter(|s| s.is_some()).count()
    }
}

/// Per-facility load summed in user order.
pub(crate) fn facility_loads(inst: &ProblemInstance, serving: &[Option<FacilityRef>]) -> Vec<f64> {
    let mut loads = vec![0.0; inst.n_facilities()];
    for (j, s) in serving.iter().enumerate() {
        if let Some(f) = s {
            if inst.contains(*f) && j < inst.n_users() {
                loads[inst.global_index(*f)] += inst.user(j).demand;
            }
        }
    }
    loads
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub cost: f64,
    pub covered_demand: f64,
    pub objective: f64,
    /// Share of users that are served.
    pub coverage_fraction: f64,
    /// Linear SIR at the serving facility; `None` for unserved users.
    /// An interference-free user is written as the string `"inf"`.
    #[serde(with = "sir_list")]
    pub per_user_sir: Vec<Option<f64>>,
}

mod sir_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Value(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Option<Entry>> = v
            .iter()
            .map(|x| {
                x.map(|x| {
                    if x.is_finite() {
                        Entry::Value(x)
                    } else {
                        Entry::Text("inf".into())
                    }
                })
            })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<f64>>, D::Error> {
        let entries: Vec<Option<Entry>> = Vec::deserialize(d)?;
        Ok(entries
            .into_iter()
            .map(|e| {
                e.map(|e| match e {
                    Entry::Value(x) => x,
                    Entry::Text(_) => f64::INFINITY,
                })
            })
            .collect())
    }
}

/// Sentinel for "no facility" in the dense per-user arrays.
pub(crate) const NONE: u32 = u32::MAX;

/// Phase-one state: strongest open facility per user and the exact total
/// interference each user sees from all open facilities.
#[derive(Debug, Clone)]
pub(crate) struct Attachment {
    pub best: Vec<u32>,
    pub best_power: Vec<f64>,
    pub interference: Vec<i128>,
}

impl Attachment {
    pub fn from_scratch(inst: &ProblemInstance, open_globals: &[usize]) -> Self {
        let n = inst.n_users();
        let mut best = vec![NONE; n];
        let mut best_power = vec![f64::NEG_INFINITY; n];
        let mut interference = vec![0i128; n];
        // Ascending global order with a strict comparison keeps the lowest
        // (site, facility) on ties.
        for &g in open_globals {
            let power = inst.received_row(g);
            let quanta = inst.quanta_row(g);
            for j in 0..n {
                interference[j] += quanta[j];
                if power[j] > best_power[j] {
                    best_power[j] = power[j];
                    best[j] = g as u32;
                }
            }
        }
        Self {
            best,
            best_power,
            interference,
        }
    }
}

/// Reusable buffers for [`resolve`].
#[derive(Debug, Clone, Default)]
pub(crate) struct ResolveScratch {
    pub served: Vec<u32>,
    pub loads: Vec<f64>,
    running: Vec<f64>,
    cursor: Vec<usize>,
}

/// Phases two and three of the association heuristic. Users failing their
/// SIR target at the strongest facility are dropped; overloaded facilities
/// then shed users smallest-demand first (ties: highest user index first)
/// until the load fits.
///
/// Dropping users never changes interference, so no SIR recheck follows.
pub(crate) fn resolve(
    inst: &ProblemInstance,
    best: &[u32],
    interference: &[i128],
    scratch: &mut ResolveScratch,
) -> f64 {
    let n = inst.n_users();
    let demands = inst.demands();
    scratch.served.clear();
    scratch.served.resize(n, NONE);
    scratch.loads.clear();
    scratch.loads.resize(inst.n_facilities(), 0.0);
    let mut covered = 0.0;
    for j in 0..n {
        let g = best[j];
        if g == NONE {
            continue;
        }
        let others = interference[j] - inst.interference_quanta(g as usize, j);
        if inst.meets_sir(g as usize, j, others) {
            scratch.served[j] = g;
            scratch.loads[g as usize] += demands[j];
            covered += demands[j];
        }
    }

    trim_overloads(inst, scratch, covered)
}

/// Phase three on `scratch.served`.
///
/// Sheds users in one sweep of the global trim order; each facility's
/// members appear in it in exactly its own shedding order. A running sum
/// decides when to stop, then the user-order sum confirms it; rounding
/// disagreements resume the sweep where it stopped.
pub(crate) fn trim_overloads(inst: &ProblemInstance, scratch: &mut ResolveScratch, mut covered: f64) -> f64 {
    let order = inst.trim_order();
    let trim_demands = inst.trim_demands();
    let capacities = inst.capacities();
    let mut cursor_ready = false;
    loop {
        if scratch.loads.iter().zip(capacities).all(|(l, c)| l <= c) {
            return covered;
        }
        if !cursor_ready {
            scratch.cursor.clear();
            scratch.cursor.resize(capacities.len(), 0);
            cursor_ready = true;
        }
        scratch.running.clear();
        scratch.running.extend_from_slice(&scratch.loads);
        for (pos, (&j, &d)) in order.iter().zip(trim_demands).enumerate() {
            let g = scratch.served[j as usize];
            if g == NONE {
                continue;
            }
            let g = g as usize;
            if scratch.running[g] > capacities[g] && pos >= scratch.cursor[g] {
                scratch.served[j as usize] = NONE;
                scratch.running[g] -= d;
                scratch.cursor[g] = pos + 1;
            }
        }
        covered = canonical_loads(inst, &scratch.served, &mut scratch.loads);
    }
}

/// Per-facility loads and the covered total, both summed in user order.
fn canonical_loads(inst: &ProblemInstance, served: &[u32], loads: &mut Vec<f64>) -> f64 {
    loads.clear();
    loads.resize(inst.n_facilities(), 0.0);
    let mut covered = 0.0;
    for (&g, &d) in served.iter().zip(inst.demands()) {
        if g != NONE {
            loads[g as usize] += d;
            covered += d;
        }
    }
    covered
}

/// `cost - w * covered` with both sums taken in index order.
pub(crate) fn objective_parts(
    inst: &ProblemInstance,
    y: &Deployment,
    served: impl Iterator<Item = bool>,
) -> (f64, f64, f64) {
    objective_from_cost(inst, y.cost(inst), served)
}

pub(crate) fn objective_from_cost(
    inst: &ProblemInstance,
    cost: f64,
    served: impl Iterator<Item = bool>,
) -> (f64, f64, f64) {
    let covered: f64 = served
        .zip(inst.users())
        .filter(|(s, _)| *s)
        .map(|(_, u)| u.demand)
        .sum();
    (cost, covered, cost - inst.bias_w() * covered)
}

/// SIR of `user` when served by `serving` under deployment `y`:
/// `P_serving / sum_{other open} P E`. Infinite when nothing else is open.
pub fn sir_of(inst: &ProblemInstance, y: &Deployment, user: usize, serving: FacilityRef) -> Result<f64> {
    if !y.is_open(serving) || !inst.contains(serving) {
        return Err(Error::Logic(format!(
            "facility {} at site {} is not open",
            serving.facility, serving.site
        )));
    }
    let g = inst.global_index(serving);
    let others: i128 = y
        .open_facilities()
        .filter(|&f| f != serving && inst.contains(f))
        .map(|f| inst.interference_quanta(inst.global_index(f), user))
        .sum();
    Ok(inst.received_power(g, user) / inst.quanta_to_power(others))
}

/// Associates users with the open facilities of `y`: strongest received
/// power first, then the SIR filter, then capacity trimming.
pub fn assign_users(y: &Deployment, inst: &ProblemInstance) -> Assignment {
    let attach = Attachment::from_scratch(inst, &y.open_globals(inst));
    let mut scratch = ResolveScratch::default();
    resolve(inst, &attach.best, &attach.interference, &mut scratch);
    let serving = scratch
        .served
        .iter()
        .map(|&g| (g != NONE).then(|| inst.facility_ref(g as usize)))
        .collect();
    Assignment::from_serving(inst, serving)
}

pub fn objective_of(y: &Deployment, x: &Assignment, inst: &ProblemInstance) -> ObjectiveReport {
    let (cost, covered_demand, objective) = objective_parts(inst, y, x.serving.iter().map(Option::is_some));
    let per_user_sir = x
        .serving
        .iter()
        .enumerate()
        .map(|(j, s)| s.and_then(|f| sir_of(inst, y, j, f).ok()))
        .collect();
    let coverage_fraction = if inst.n_users() == 0 {
        1.0
    } else {
        x.served_count() as f64 / inst.n_users() as f64
    };
    ObjectiveReport {
        cost,
        covered_demand,
        objective,
        coverage_fraction,
        per_user_sir,
    }
}

/// `V_P(y)`: the objective reached by the association heuristic on `y`.
pub fn deployment_value(y: &Deployment, inst: &ProblemInstance) -> f64 {
    let attach = Attachment::from_scratch(inst, &y.open_globals(inst));
    let mut scratch = ResolveScratch::default();
    let covered = resolve(inst, &attach.best, &attach.interference, &mut scratch);
    y.cost(inst) - inst.bias_w() * covered
}
