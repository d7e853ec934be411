//! Exhaustive solver for tiny instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluation::{assign_users, objective_parts, Assignment, Deployment};
use crate::instance::{FacilityRef, ProblemInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleLimits {
    pub max_deployments: u64,
    pub max_users: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_deployments: 100_000,
            max_users: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub optimum: f64,
    pub optimal_y: Deployment,
    pub optimal_x: Assignment,
    pub enumerated_count: u64,
    /// Objective of the heuristic assignment on `optimal_y`.
    pub heuristic_value: f64,
}

/// Number of valid deployments: `K_i + 1` choices per non-macro site and
/// `K_i` per macro site. Saturates on overflow.
pub fn deployment_count(inst: &ProblemInstance) -> u128 {
    inst.sites().iter().fold(1u128, |acc, s| {
        let choices = s.catalog.len() as u128 + u128::from(!s.is_macro_site);
        acc.saturating_mul(choices)
    })
}

/// The `index`-th valid deployment in lexicographic order: site 0 is the
/// most significant digit and "closed" sorts before every facility.
fn decode(inst: &ProblemInstance, mut index: u64) -> Deployment {
    let mut open = vec![None; inst.n_sites()];
    for i in (0..inst.n_sites()).rev() {
        let s = inst.site(i);
        let choices = s.catalog.len() as u64 + u64::from(!s.is_macro_site);
        let digit = (index % choices) as usize;
        index /= choices;
        open[i] = if s.is_macro_site {
            Some(digit)
        } else {
            digit.checked_sub(1)
        };
    }
    Deployment::from_vec(open)
}

struct Selection<'a> {
    demand: &'a [f64],
    candidates: &'a [Vec<usize>],
    order: &'a [usize],
    suffix: Vec<f64>,
    room: Vec<f64>,
    current: Vec<Option<usize>>,
    best: Vec<Option<usize>>,
    best_covered: f64,
}

impl Selection<'_> {
    fn dfs(&mut self, depth: usize, covered: f64) {
        if covered > self.best_covered {
            self.best_covered = covered;
            self.best.clone_from(&self.current);
        }
        if depth == self.order.len() || covered + self.suffix[depth] <= self.best_covered {
            return;
        }
        let j = self.order[depth];
        let r = self.demand[j];
        for c in 0..self.candidates[j].len() {
            let g = self.candidates[j][c];
            if self.room[g] >= r {
                self.room[g] -= r;
                self.current[j] = Some(g);
                self.dfs(depth + 1, covered + r);
                self.current[j] = None;
                self.room[g] += r;
            }
        }
        self.dfs(depth + 1, covered);
    }
}

/// Serving facility (global index) per user maximizing covered demand on
/// `y`, subject to SIR and capacity.
fn best_assignment(inst: &ProblemInstance, y: &Deployment) -> Vec<Option<usize>> {
    let n = inst.n_users();
    let open = y.open_globals(inst);
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|j| {
            let total: i128 = open.iter().map(|&g| inst.interference_quanta(g, j)).sum();
            open.iter()
                .copied()
                .filter(|&g| {
                    let others = total - inst.interference_quanta(g, j);
                    inst.meets_sir(g, j, others)
                })
                .collect()
        })
        .collect();
    let demand: Vec<f64> = inst.users().iter().map(|u| u.demand).collect();
    let mut order: Vec<usize> = (0..n).filter(|&j| !candidates[j].is_empty()).collect();
    order.sort_by(|&a, &b| demand[b].total_cmp(&demand[a]).then(a.cmp(&b)));
    let mut suffix = vec![0.0; order.len() + 1];
    for d in (0..order.len()).rev() {
        suffix[d] = suffix[d + 1] + demand[order[d]];
    }
    let mut room = vec![0.0; inst.n_facilities()];
    for &g in &open {
        room[g] = inst.capacity_of(g);
    }
    let mut s = Selection {
        demand: &demand,
        candidates: &candidates,
        order: &order,
        suffix,
        room,
        current: vec![None; n],
        best: vec![None; n],
        best_covered: 0.0,
    };
    s.dfs(0, 0.0);
    s.best
}

pub fn enumerate_optimum(inst: &ProblemInstance, limits: &OracleLimits) -> Result<OracleResult> {
    let count = deployment_count(inst);
    if count > u128::from(limits.max_deployments) || inst.n_users() > limits.max_users {
        return Err(Error::TooLarge {
            deployments: count,
            max_deployments: u128::from(limits.max_deployments),
            users: inst.n_users(),
            max_users: limits.max_users,
        });
    }
    let count = count as u64;
    let value_of = |index: u64| {
        let y = decode(inst, index);
        let served = best_assignment(inst, &y);
        objective_parts(inst, &y, served.iter().map(Option::is_some)).2
    };
    let (optimum, index) = (0..count).into_par_iter().map(|i| (value_of(i), i)).reduce(
        || (f64::INFINITY, u64::MAX),
        |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
    );

    let optimal_y = decode(inst, index);
    let serving = best_assignment(inst, &optimal_y)
        .into_iter()
        .map(|s| s.map(|g| inst.facility_ref(g)))
        .collect::<Vec<Option<FacilityRef>>>();
    let optimal_x = Assignment::from_serving(inst, serving);
    let heuristic = assign_users(&optimal_y, inst);
    let heuristic_value = objective_parts(inst, &optimal_y, heuristic.serving.iter().map(Option::is_some)).2;
    Ok(OracleResult {
        optimum,
        optimal_y,
        optimal_x,
        enumerated_count: count,
        heuristic_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{check_feasibility, deployment_value, objective_of, CheckMode};
    use crate::instance::fixtures::*;
    use crate::instance::{generate_instance, GeneratorConfig, Point, Site, User};
    use proptest::prelude::*;

    fn tiny(users: usize, small: usize, seed: u64) -> ProblemInstance {
        let cfg = GeneratorConfig {
            n_users: users,
            n_small_sites: small,
            area_width_m: 1000.0,
            area_height_m: 1000.0,
            macro_positions: vec![Point::new(250.0, 500.0), Point::new(750.0, 500.0)],
            demand_lo_bps: 1e6,
            demand_hi_bps: 60e6,
            ..GeneratorConfig::table1()
        };
        generate_instance(&cfg, seed).unwrap()
    }

    #[test]
    fn counts_eight_deployments() {
        let inst = inverse_square(
            vec![
                site(0, 0.0, 0.0, true, f64::INFINITY),
                site(1, 100.0, 0.0, false, 1e8),
                site(2, 0.0, 100.0, false, 1e8),
            ],
            (0..4).map(|j| user(j, 10.0 * j as f64, 20.0, 1e6, 8.0)).collect(),
        );
        assert_eq!(deployment_count(&inst), 8);
        let r = enumerate_optimum(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.enumerated_count, 8);
    }

    #[test]
    fn lexicographic_decode() {
        let inst = inverse_square(
            vec![site(0, 0.0, 0.0, true, f64::INFINITY), site(1, 100.0, 0.0, false, 1e8)],
            vec![user(0, 1.0, 1.0, 1e6, 8.0)],
        );
        let all: Vec<Vec<Option<usize>>> = (0..4).map(|i| decode(&inst, i).as_slice().to_vec()).collect();
        assert_eq!(
            all,
            vec![
                vec![Some(0), None],
                vec![Some(0), Some(0)],
                vec![Some(1), None],
                vec![Some(1), Some(0)],
            ]
        );
    }

    #[test]
    fn macro_only_space() {
        let inst = inverse_square(
            vec![site(0, 0.0, 0.0, true, f64::INFINITY)],
            vec![user(0, 30.0, 0.0, 90e6, 8.0), user(1, 40.0, 0.0, 90e6, 8.0)],
        );
        let r = enumerate_optimum(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.enumerated_count, 2);
        assert_eq!(r.optimal_y.as_slice(), &[Some(1)]);
        assert_eq!(r.optimum, 30.0 - 0.2 * 180e6);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = tiny(11, 1, 0);
        match enumerate_optimum(&inst, &OracleLimits::default()) {
            Err(Error::TooLarge {
                users: 11,
                max_users: 10,
                deployments: 8,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
        let limits = OracleLimits {
            max_deployments: 7,
            max_users: 20,
        };
        assert!(matches!(enumerate_optimum(&inst, &limits), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn exact_assignment_beats_demand_order_trimming() {
        // Capacity 100: the heuristic drops the 50 then keeps 60; the
        // exact search packs 60 + 40.
        let mut s = site(0, 0.0, 0.0, true, f64::INFINITY);
        s.catalog.truncate(1);
        let users = vec![
            user(0, 10.0, 0.0, 60e6, 8.0),
            user(1, 11.0, 0.0, 50e6, 8.0),
            user(2, 12.0, 0.0, 40e6, 8.0),
        ];
        let inst = inverse_square(vec![s], users);
        let r = enumerate_optimum(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(r.optimum, -0.2 * 100e6);
        assert_eq!(r.heuristic_value, deployment_value(&r.optimal_y, &inst));
        assert!(r.heuristic_value > r.optimum);
    }

    fn permute(inst: &ProblemInstance, site_perm: &[usize], user_perm: &[usize]) -> ProblemInstance {
        // site_perm[new] = old, keeping macro sites first so the catalog
        // layout stays valid.
        let sites: Vec<Site> = site_perm
            .iter()
            .enumerate()
            .map(|(new, &old)| Site {
                id: new,
                ..inst.site(old).clone()
            })
            .collect();
        let users: Vec<User> = user_perm
            .iter()
            .enumerate()
            .map(|(new, &old)| User {
                id: new,
                ..inst.user(old).clone()
            })
            .collect();
        let mut gains = Vec::new();
        for &old_site in site_perm {
            for k in 0..inst.site(old_site).catalog.len() {
                for &old_user in user_perm {
                    gains.push(inst.gain(FacilityRef::new(old_site, k), old_user));
                }
            }
        }
        ProblemInstance::with_tight_big_m(sites, users, gains, inst.bias_w()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn optimum_is_feasible_and_dominates_heuristic(seed in any::<u64>(), users in 1usize..8, small in 0usize..4) {
            let inst = tiny(users, small, seed);
            let r = enumerate_optimum(&inst, &OracleLimits::default()).unwrap();
            prop_assert!(check_feasibility(&r.optimal_y, &r.optimal_x, &inst, CheckMode::Relaxed).is_empty());
            prop_assert_eq!(objective_of(&r.optimal_y, &r.optimal_x, &inst).objective, r.optimum);
            prop_assert!(r.optimum <= r.heuristic_value);
            for i in 0..r.enumerated_count {
                let y = decode(&inst, i);
                prop_assert!(y.is_valid(&inst));
                prop_assert!(deployment_value(&y, &inst) >= r.optimum);
            }
        }

        #[test]
        fn invariant_under_reindexing(seed in any::<u64>(), users in 1usize..7, small in 0usize..4, rot in 0usize..8) {
            let inst = tiny(users, small, seed);
            let n_macro = inst.macro_sites().count();
            let mut site_perm: Vec<usize> = (0..n_macro).rev().collect();
            let mut smalls: Vec<usize> = (n_macro..inst.n_sites()).collect();
            if !smalls.is_empty() {
                let k = rot % smalls.len();
                smalls.rotate_left(k);
            }
            site_perm.extend(smalls);
            let mut user_perm: Vec<usize> = (0..users).collect();
            user_perm.rotate_left(rot % users);
            user_perm.reverse();
            let a = enumerate_optimum(&inst, &OracleLimits::default()).unwrap();
            let b = enumerate_optimum(&permute(&inst, &site_perm, &user_perm), &OracleLimits::default()).unwrap();
            prop_assert!((a.optimum - b.optimum).abs() <= 1e-9 * a.optimum.abs().max(1.0));
        }
    }
}
