use super::{trim_overloads, Attachment, Deployment, ResolveScratch, NONE};
use crate::instance::{FacilityRef, ProblemInstance};

/// Evaluates deployments that differ from a base deployment in a few sites.
///
/// Phase-one state is patched per user rather than rebuilt. Interference
/// totals are fixed-point, so the patched state is identical to a
/// from-scratch build and every value returned equals `deployment_value` on
/// the modified deployment.
pub struct LocalEvaluator<'a> {
    inst: &'a ProblemInstance,
    base: Deployment,
    base_open: Vec<usize>,
    attach: Attachment,
}

#[derive(Debug, Default)]
pub struct LocalScratch {
    open: Vec<usize>,
    best: Vec<u32>,
    best_power: Vec<f64>,
    closed: Vec<usize>,
    opened: Vec<usize>,
    resolve: ResolveScratch,
}

impl<'a> LocalEvaluator<'a> {
    pub fn new(inst: &'a ProblemInstance, base: &Deployment) -> Self {
        let base_open = base.open_globals(inst);
        let attach = Attachment::from_scratch(inst, &base_open);
        Self {
            inst,
            base: base.clone(),
            base_open,
            attach,
        }
    }

    pub fn base(&self) -> &Deployment {
        &self.base
    }

    pub fn scratch(&self) -> LocalScratch {
        LocalScratch::default()
    }

    /// Value of the base deployment with each `(site, facility)` in `changes`
    /// applied.
    pub fn value_with(&self, changes: &[(usize, Option<usize>)], s: &mut LocalScratch) -> f64 {
        let inst = self.inst;
        s.closed.clear();
        s.opened.clear();
        for (idx, &(site, new)) in changes.iter().enumerate() {
            // Later changes to the same site override earlier ones.
            if changes[idx + 1..].iter().any(|c| c.0 == site) {
                continue;
            }
            if let Some(k) = self.base.get(site) {
                s.closed.push(inst.global_index(FacilityRef::new(site, k)));
            }
            if let Some(k) = new {
                s.opened.push(inst.global_index(FacilityRef::new(site, k)));
            }
        }
        // A facility both closed and reopened is unchanged.
        let (closed, opened) = (&mut s.closed, &mut s.opened);
        closed.retain(|g| {
            if let Some(p) = opened.iter().position(|o| o == g) {
                opened.swap_remove(p);
                false
            } else {
                true
            }
        });
        opened.sort_unstable();

        s.open.clear();
        s.open
            .extend(self.base_open.iter().copied().filter(|g| !s.closed.contains(g)));
        s.open.extend(s.opened.iter().copied());
        s.open.sort_unstable();

        let n = inst.n_users();
        s.best.clear();
        s.best.extend_from_slice(&self.attach.best);
        s.best_power.clear();
        s.best_power.extend_from_slice(&self.attach.best_power);
        // Users whose strongest facility closed pick again among the new
        // open set.
        for &c in &s.closed {
            for j in 0..n {
                if s.best[j] == c as u32 {
                    let mut b = NONE;
                    let mut bp = f64::NEG_INFINITY;
                    for &g in &s.open {
                        let p = inst.received_power(g, j);
                        if p > bp {
                            bp = p;
                            b = g as u32;
                        }
                    }
                    s.best[j] = b;
                    s.best_power[j] = bp;
                }
            }
        }
        // Everyone else compares against the new facilities; repeating this
        // for users that just rescanned changes nothing.
        for &g in &s.opened {
            let g32 = g as u32;
            for ((b, bp), &p) in s.best.iter_mut().zip(s.best_power.iter_mut()).zip(inst.received_row(g)) {
                if p > *bp || (p == *bp && g32 < *b) {
                    *bp = p;
                    *b = g32;
                }
            }
        }

        let demands = inst.demands();
        let served = &mut s.resolve.served;
        served.clear();
        served.resize(n, NONE);
        let loads = &mut s.resolve.loads;
        loads.clear();
        loads.resize(inst.n_facilities(), 0.0);
        let mut covered = 0.0;
        let base_interference = &self.attach.interference;
        let closed_rows: Vec<&[i128]> = s.closed.iter().map(|&g| inst.quanta_row(g)).collect();
        let opened_rows: Vec<&[i128]> = s.opened.iter().map(|&g| inst.quanta_row(g)).collect();
        for j in 0..n {
            let b = s.best[j];
            if b == NONE {
                continue;
            }
            let mut interference = base_interference[j];
            for row in &closed_rows {
                interference -= row[j];
            }
            for row in &opened_rows {
                interference += row[j];
            }
            let others = interference - inst.interference_quanta(b as usize, j);
            if inst.meets_sir(b as usize, j, others) {
                served[j] = b;
                loads[b as usize] += demands[j];
                covered += demands[j];
            }
        }

        let covered = trim_overloads(inst, &mut s.resolve, covered);
        self.base.cost_with(inst, changes) - inst.bias_w() * covered
    }
}
