//! Lagrangian lower bounds.
//!
//! Dualizing the at-most-one-server rows (multipliers `lambda1`) and the
//! big-M SIR rows (multipliers `lambda2`) splits the problem into one
//! knapsack per facility plus a trivial site-selection master. Each knapsack
//! is solved greedily in ratio order; its fractional (Dantzig) completion is
//! a lower bound on the knapsack optimum and is what the master minimizes, so
//! the reported bound is valid even when the greedy selection is not optimal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluation::Deployment;
use crate::instance::{FacilityRef, ProblemInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(n_users: usize) -> Self {
        Self {
            lambda1: vec![0.0; n_users],
            lambda2: vec![0.0; n_users],
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lambda1.iter().chain(&self.lambda2).all(|&v| v >= 0.0)
    }
}

/// How the SIR-row residuals are weighted in the subgradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgradientScaling {
    /// Plain subgradient in `(lambda1, lambda2)`.
    Raw,
    /// Steps `lambda2` in units of `1/M`, so both residual families are
    /// comparable in size.
    BigMNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationParams {
    /// Keep scanning past a rejected user and admit later ones that fit.
    pub backfill: bool,
    pub scaling: SubgradientScaling,
    /// Relative tolerance of the complementary-slackness stop.
    pub slackness_tol: f64,
}

impl Default for RelaxationParams {
    fn default() -> Self {
        Self {
            backfill: false,
            scaling: SubgradientScaling::BigMNormalized,
            slackness_tol: 1e-6,
        }
    }
}

/// Multipliers, step scale and the best bounds seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    pub multipliers: Multipliers,
    pub step_scale: f64,
    pub best_lower: f64,
    pub best_upper: f64,
    pub stall_count: usize,
}

impl LagrangianState {
    pub fn new(n_users: usize, step_scale: f64) -> Self {
        Self {
            multipliers: Multipliers::zeros(n_users),
            step_scale,
            best_lower: f64::NEG_INFINITY,
            best_upper: f64::INFINITY,
            stall_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnapsackCase {
    /// Every user with a non-positive coefficient fits.
    AllFit,
    /// Capacity binds; users are admitted greedily.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub facility: FacilityRef,
    /// Objective of the selected users: constant plus their coefficients.
    pub value: f64,
    /// Fractional-knapsack value; never above the integer optimum.
    pub bound: f64,
    pub selected: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub case: KnapsackCase,
}

impl SubproblemResult {
    /// The selection provably attains the knapsack optimum.
    pub fn is_exact(&self) -> bool {
        self.bound == self.value
    }
}

/// Coefficient of `x_ij^k` in the facility subproblem:
/// `lambda1_j - r_j w - (P_ij^k + gamma_j P_ij^k E_ki - M) lambda2_j`.
pub fn knapsack_coefficient(inst: &ProblemInstance, user: usize, facility: FacilityRef, lambda: &Multipliers) -> f64 {
    let g = inst.global_index(facility);
    let u = inst.user(user);
    let p = inst.received_power(g, user);
    let e = inst.spec(facility).interference_suppression;
    lambda.lambda1[user]
        - u.demand * inst.bias_w()
        - (p + u.sir_threshold * p * e - inst.big_m()) * lambda.lambda2[user]
}

/// Constant part of a facility subproblem:
/// `c_ki + sum_j lambda2_j gamma_j P_ij^k E_ki`.
pub fn subproblem_constant(inst: &ProblemInstance, facility: FacilityRef, lambda: &Multipliers) -> f64 {
    let g = inst.global_index(facility);
    let interference: f64 = (0..inst.n_users())
        .map(|j| lambda.lambda2[j] * inst.user(j).sir_threshold * inst.interfering_power(g, j))
        .sum();
    inst.spec(facility).cost + interference
}

pub fn solve_subproblem(
    inst: &ProblemInstance,
    facility: FacilityRef,
    lambda: &Multipliers,
    params: &RelaxationParams,
) -> SubproblemResult {
    let constant = subproblem_constant(inst, facility, lambda);
    let coefficients: Vec<f64> = (0..inst.n_users())
        .map(|j| knapsack_coefficient(inst, j, facility, lambda))
        .collect();
    let candidates: Vec<usize> = (0..inst.n_users()).filter(|&j| coefficients[j] <= 0.0).collect();
    let cap = inst.capacity(facility);
    let demand = |j: usize| inst.user(j).demand;
    let total: f64 = candidates.iter().map(|&j| demand(j)).sum();

    if total <= cap {
        let value = constant + candidates.iter().map(|&j| coefficients[j]).sum::<f64>();
        return SubproblemResult {
            facility,
            value,
            bound: value,
            selected: candidates,
            coefficients,
            case: KnapsackCase::AllFit,
        };
    }

    let mut order = candidates;
    order.sort_by(|&a, &b| {
        (coefficients[a] / demand(a))
            .total_cmp(&(coefficients[b] / demand(b)))
            .then(a.cmp(&b))
    });

    let mut selected = Vec::new();
    let mut load = 0.0;
    let mut value = constant;
    for &j in &order {
        if load + demand(j) <= cap {
            selected.push(j);
            load += demand(j);
            value += coefficients[j];
        } else if !params.backfill {
            break;
        }
    }

    let mut bound = constant;
    let mut room = cap;
    for &j in &order {
        if demand(j) <= room {
            bound += coefficients[j];
            room -= demand(j);
        } else {
            bound += coefficients[j] * (room / demand(j));
            break;
        }
    }
    // Rounding in the fractional term must not lift the bound over a
    // feasible value.
    let bound = bound.min(value);

    SubproblemResult {
        facility,
        value,
        bound,
        selected,
        coefficients,
        case: KnapsackCase::Greedy,
    }
}

/// Optimal solution of the relaxed problem for fixed multipliers.
#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    pub deployment: Deployment,
    pub lower_bound: f64,
    /// Subproblem of every facility, by global index.
    pub subproblems: Vec<SubproblemResult>,
}

impl RelaxedSolution {
    /// Subproblems of the facilities the master opened.
    pub fn open_subproblems(&self) -> impl Iterator<Item = &SubproblemResult> {
        self.subproblems.iter().filter(|s| self.deployment.is_open(s.facility))
    }

    /// Relaxed `x`: for every user, the open facilities that selected it.
    pub fn servers_per_user(&self, n_users: usize) -> Vec<Vec<FacilityRef>> {
        let mut out = vec![Vec::new(); n_users];
        for s in self.open_subproblems() {
            for &j in &s.selected {
                out[j].push(s.facility);
            }
        }
        out
    }

    pub fn is_exact(&self) -> bool {
        self.open_subproblems().all(SubproblemResult::is_exact)
    }
}

/// Solves every facility subproblem, then picks per site: macro sites open
/// their cheapest facility, other sites open theirs only when it is
/// negative. Ties go to the lowest catalog index.
pub fn solve_relaxed_master(
    inst: &ProblemInstance,
    lambda: &Multipliers,
    params: &RelaxationParams,
) -> RelaxedSolution {
    let subproblems: Vec<SubproblemResult> = (0..inst.n_facilities())
        .into_par_iter()
        .map(|g| solve_subproblem(inst, inst.facility_ref(g), lambda, params))
        .collect();

    let mut y = Deployment::empty(inst.n_sites());
    let mut total = 0.0;
    for i in 0..inst.n_sites() {
        let base = inst.global_index(FacilityRef::new(i, 0));
        let (best_k, best_v) = (0..inst.site(i).catalog.len())
            .map(|k| (k, subproblems[base + k].bound))
            .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
        if inst.site(i).is_macro_site || best_v < 0.0 {
            y.set(i, Some(best_k));
            total += best_v;
        }
    }
    let dual_constant: f64 = (0..inst.n_users())
        .map(|j| lambda.lambda1[j] + inst.big_m() * lambda.lambda2[j])
        .sum();
    RelaxedSolution {
        deployment: y,
        lower_bound: total - dual_constant,
        subproblems,
    }
}

/// Residuals of the dualized rows at a relaxed solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    /// `sum x - 1` per user.
    pub served_residual: Vec<f64>,
    /// `gamma sum (y - x) P E - (1 - sum x) M - sum x P` per user.
    pub sir_residual: Vec<f64>,
}

impl Subgradient {
    pub fn compute(inst: &ProblemInstance, relaxed: &RelaxedSolution) -> Self {
        let n = inst.n_users();
        let servers = relaxed.servers_per_user(n);
        let open = relaxed.deployment.open_globals(inst);
        let m = inst.big_m();
        let mut served_residual = vec![0.0; n];
        let mut sir_residual = vec![0.0; n];
        for j in 0..n {
            let count = servers[j].len() as f64;
            let mut interference = 0.0;
            let mut signal = 0.0;
            for &g in &open {
                if servers[j].contains(&inst.facility_ref(g)) {
                    signal += inst.received_power(g, j);
                } else {
                    interference += inst.interfering_power(g, j);
                }
            }
            served_residual[j] = count - 1.0;
            sir_residual[j] = inst.user(j).sir_threshold * interference - (1.0 - count) * m - signal;
        }
        Self {
            served_residual,
            sir_residual,
        }
    }

    /// Relaxed solution satisfies every dualized row.
    pub fn is_feasible(&self) -> bool {
        self.served_residual.iter().chain(&self.sir_residual).all(|&r| r <= 0.0)
    }

    /// `lambda . g`.
    pub fn dot(&self, lambda: &Multipliers) -> f64 {
        let a: f64 = self
            .served_residual
            .iter()
            .zip(&lambda.lambda1)
            .map(|(g, l)| g * l)
            .sum();
        let b: f64 = self.sir_residual.iter().zip(&lambda.lambda2).map(|(g, l)| g * l).sum();
        a + b
    }

    fn sir_weight(inst: &ProblemInstance, scaling: SubgradientScaling) -> f64 {
        match scaling {
            SubgradientScaling::Raw => 1.0,
            SubgradientScaling::BigMNormalized => 1.0 / inst.big_m(),
        }
    }

    /// Squared norm in the (possibly rescaled) multiplier coordinates.
    pub fn norm_sq(&self, inst: &ProblemInstance, scaling: SubgradientScaling) -> f64 {
        let w = Self::sir_weight(inst, scaling);
        self.served_residual.iter().map(|g| g * g).sum::<f64>()
            + self.sir_residual.iter().map(|g| (g * w) * (g * w)).sum::<f64>()
    }
}

/// Whether the relaxed solution is feasible and complementary, which makes
/// it optimal for the original problem.
pub fn complementary_slackness(relaxed: &RelaxedSolution, grad: &Subgradient, lambda: &Multipliers, tol: f64) -> bool {
    relaxed.is_exact() && grad.is_feasible() && grad.dot(lambda).abs() <= tol * (1.0 + relaxed.lower_bound.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Step length `s (U - L_t) / |g|^2`; zero when the step was skipped.
    pub step: f64,
    pub norm: f64,
    /// The subgradient vanished and nothing was updated.
    pub zero_gradient: bool,
}

/// Projected subgradient step referenced to the incumbent upper bound:
/// `lambda <- max(0, lambda + t g)` with `t = s (U - L_t) / |g|^2`.
pub fn subgradient_step(
    state: &mut LagrangianState,
    grad: &Subgradient,
    relaxed_value: f64,
    inst: &ProblemInstance,
    scaling: SubgradientScaling,
) -> StepOutcome {
    let norm_sq = grad.norm_sq(inst, scaling);
    if norm_sq == 0.0 || !norm_sq.is_finite() {
        return StepOutcome {
            step: 0.0,
            norm: norm_sq.sqrt(),
            zero_gradient: norm_sq == 0.0,
        };
    }
    let gap = (state.best_upper - relaxed_value).max(0.0);
    let t = state.step_scale * gap / norm_sq;
    let w = Subgradient::sir_weight(inst, scaling);
    let lambda = &mut state.multipliers;
    for (l, g) in lambda.lambda1.iter_mut().zip(&grad.served_residual) {
        *l = (*l + t * g).max(0.0);
    }
    for (l, g) in lambda.lambda2.iter_mut().zip(&grad.sir_residual) {
        *l = (*l + t * w * w * g).max(0.0);
    }
    StepOutcome {
        step: t,
        norm: norm_sq.sqrt(),
        zero_gradient: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::*;
    use crate::instance::{generate_instance, GeneratorConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_facility(demands: &[f64], cap: f64) -> ProblemInstance {
        let mut s = site(0, 0.0, 0.0, true, f64::INFINITY);
        s.catalog.truncate(1);
        s.catalog[0].access_capacity = cap;
        let users = demands
            .iter()
            .enumerate()
            .map(|(j, &d)| user(j, 10.0 + j as f64, 0.0, d, 8.0))
            .collect();
        inverse_square(vec![s], users)
    }

    #[test]
    fn zero_multipliers_give_negative_coefficients() {
        let inst = single_facility(&[1e6, 2e6, 3e6], 100e6);
        let lambda = Multipliers::zeros(3);
        for j in 0..3 {
            let c = knapsack_coefficient(&inst, j, FacilityRef::new(0, 0), &lambda);
            assert_eq!(c, -inst.user(j).demand * 0.2);
        }
    }

    #[test]
    fn large_lambda1_excludes_user() {
        let inst = single_facility(&[1e6, 2e6], 100e6);
        let mut lambda = Multipliers::zeros(2);
        lambda.lambda1[0] = 1e6;
        let c = knapsack_coefficient(&inst, 0, FacilityRef::new(0, 0), &lambda);
        assert_eq!(c, 1e6 - 0.2e6);
        let r = solve_subproblem(&inst, FacilityRef::new(0, 0), &lambda, &RelaxationParams::default());
        assert_eq!(r.selected, vec![1]);
    }

    #[test]
    fn coefficient_longhand() {
        let inst = single_facility(&[4e6], 100e6);
        let mut lambda = Multipliers::zeros(1);
        lambda.lambda1[0] = 3.5e5;
        lambda.lambda2[0] = 2.0e9;
        let f = FacilityRef::new(0, 0);
        let p = inst.received_power(0, 0);
        let gamma = inst.user(0).sir_threshold;
        let m = inst.big_m();
        // single facility, E = 1: M = gamma * P exactly
        assert_eq!(m, gamma * p);
        let expected = 3.5e5 - 4e6 * 0.2 - (p + gamma * p - m) * 2.0e9;
        let got = knapsack_coefficient(&inst, 0, f, &lambda);
        assert!((got - expected).abs() <= 1e-12 * expected.abs(), "{got} vs {expected}");
        // p + gamma p - M = p, so the coefficient is 3.5e5 - 8e5 - 2e9 p.
        assert!((got - (3.5e5 - 8e5 - 2.0e9 * p)).abs() <= 1e-9 * got.abs());
        let constant = subproblem_constant(&inst, f, &lambda);
        assert!((constant - (0.0 + 2.0e9 * gamma * p)).abs() <= 1e-12 * constant.abs());
    }

    #[test]
    fn case_one_selects_everyone() {
        let inst = single_facility(&[10e6, 20e6, 30e6], 100e6);
        let r = solve_subproblem(
            &inst,
            FacilityRef::new(0, 0),
            &Multipliers::zeros(3),
            &RelaxationParams::default(),
        );
        assert_eq!(r.case, KnapsackCase::AllFit);
        assert_eq!(r.selected, vec![0, 1, 2]);
        assert!((r.value - (0.0 - 0.2 * 60e6)).abs() < 1e-6);
        assert!(r.is_exact());
    }

    #[test]
    fn case_two_hand_trace() {
        let inst = single_facility(&[60e6, 50e6, 1e6], 100e6);
        let f = FacilityRef::new(0, 0);
        let lambda = Multipliers::zeros(3);
        // All ratios equal -w: admission follows user index.
        let strict = solve_subproblem(&inst, f, &lambda, &RelaxationParams::default());
        assert_eq!(strict.case, KnapsackCase::Greedy);
        assert_eq!(strict.selected, vec![0]);
        assert_eq!(strict.value, -0.2 * 60e6);
        // LP completion takes 40/50 of user 1.
        assert!((strict.bound - (-0.2 * 100e6)).abs() < 1e-6);
        assert!(!strict.is_exact());

        let backfill = RelaxationParams {
            backfill: true,
            ..Default::default()
        };
        let skip = solve_subproblem(&inst, f, &lambda, &backfill);
        assert_eq!(skip.selected, vec![0, 2]);
        assert!(skip.selected.iter().map(|&j| inst.user(j).demand).sum::<f64>() <= 100e6);
    }

    #[test]
    fn master_prefers_cheaper_macro_and_skips_positive_sites() {
        let inst = inverse_square(
            vec![site(0, 0.0, 0.0, true, f64::INFINITY), site(1, 5000.0, 0.0, false, 1e8)],
            vec![user(0, 20.0, 0.0, 1e6, 8.0)],
        );
        let mut lambda = Multipliers::zeros(1);
        // Keep the remote small cell from claiming the user.
        lambda.lambda1[0] = 0.0;
        let r = solve_relaxed_master(&inst, &lambda, &RelaxationParams::default());
        // V(conv) = -0.2e6 < V(massive) = 30 - 0.2e6
        assert_eq!(r.deployment.get(0), Some(0));
        // The small cell also has a negative value at zero multipliers.
        assert_eq!(r.deployment.get(1), Some(0));

        lambda.lambda1[0] = 1e9;
        let r = solve_relaxed_master(&inst, &lambda, &RelaxationParams::default());
        assert_eq!(r.deployment.get(1), None);
        assert_eq!(r.deployment.get(0), Some(0));
    }

    #[test]
    fn step_length_formula() {
        let inst = single_facility(&[1e6, 1e6], 100e6);
        let mut state = LagrangianState::new(2, 1.0);
        state.best_upper = 2.0;
        let grad = Subgradient {
            served_residual: vec![2.0, 0.0],
            sir_residual: vec![0.0, 0.0],
        };
        let out = subgradient_step(&mut state, &grad, 0.0, &inst, SubgradientScaling::Raw);
        assert_eq!(out.step, 0.5);
        assert_eq!(state.multipliers.lambda1, vec![1.0, 0.0]);
    }

    #[test]
    fn double_service_raises_lambda1() {
        let inst = inverse_square(
            vec![site(0, 0.0, 0.0, false, 1e8), site(1, 10.0, 0.0, false, 1e8)],
            vec![user(0, 5.0, 0.0, 1e6, 8.0)],
        );
        let relaxed = solve_relaxed_master(&inst, &Multipliers::zeros(1), &RelaxationParams::default());
        assert_eq!(relaxed.servers_per_user(1)[0].len(), 2);
        let grad = Subgradient::compute(&inst, &relaxed);
        assert_eq!(grad.served_residual, vec![1.0]);
        let mut state = LagrangianState::new(1, 2.0);
        state.best_upper = 0.0;
        subgradient_step(
            &mut state,
            &grad,
            relaxed.lower_bound,
            &inst,
            SubgradientScaling::BigMNormalized,
        );
        assert!(state.multipliers.lambda1[0] > 0.0);
    }

    #[test]
    fn zero_gradient_is_flagged_noop() {
        let inst = single_facility(&[1e6], 100e6);
        let mut state = LagrangianState::new(1, 1.0);
        state.best_upper = 5.0;
        state.multipliers.lambda1[0] = 0.3;
        let grad = Subgradient {
            served_residual: vec![0.0],
            sir_residual: vec![0.0],
        };
        let before = state.clone();
        let out = subgradient_step(&mut state, &grad, 1.0, &inst, SubgradientScaling::BigMNormalized);
        assert!(out.zero_gradient);
        assert_eq!(state, before);
    }

    #[test]
    fn single_macro_relaxation_is_tight() {
        // One site, one user: serving it alone is feasible and complementary.
        let inst = inverse_square(
            vec![site(0, 0.0, 0.0, true, f64::INFINITY)],
            vec![user(0, 30.0, 0.0, 2e6, 8.0)],
        );
        let lambda = Multipliers::zeros(1);
        let relaxed = solve_relaxed_master(&inst, &lambda, &RelaxationParams::default());
        let grad = Subgradient::compute(&inst, &relaxed);
        assert!(grad.is_feasible());
        assert!(complementary_slackness(&relaxed, &grad, &lambda, 1e-6));
        assert!((relaxed.lower_bound - (-0.2 * 2e6)).abs() < 1e-9);
    }

    fn random_lambda(inst: &ProblemInstance, rng: &mut impl Rng) -> Multipliers {
        let n = inst.n_users();
        let scale1 = 0.2 * 8e6;
        Multipliers {
            lambda1: (0..n)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..scale1)
                    }
                })
                .collect(),
            lambda2: (0..n)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        0.0
                    } else {
                        rng.random_range(0.0..scale1 / inst.big_m())
                    }
                })
                .collect(),
        }
    }

    fn cfg(users: usize, small: usize) -> GeneratorConfig {
        GeneratorConfig {
            n_users: users,
            n_small_sites: small,
            ..GeneratorConfig::table1()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn step_preserves_nonnegativity(seed in any::<u64>(), s in 0.01f64..4.0) {
            let inst = generate_instance(&cfg(25, 6), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = LagrangianState::new(inst.n_users(), s);
            state.multipliers = random_lambda(&inst, &mut rng);
            state.best_upper = 0.0;
            for _ in 0..5 {
                let relaxed = solve_relaxed_master(&inst, &state.multipliers, &RelaxationParams::default());
                let grad = Subgradient::compute(&inst, &relaxed);
                subgradient_step(&mut state, &grad, relaxed.lower_bound, &inst, SubgradientScaling::BigMNormalized);
                prop_assert!(state.multipliers.is_nonnegative());
            }
        }

        #[test]
        fn master_decomposes(seed in any::<u64>()) {
            let inst = generate_instance(&cfg(30, 8), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lambda = random_lambda(&inst, &mut rng);
            let r = solve_relaxed_master(&inst, &lambda, &RelaxationParams::default());
            let mut total = 0.0;
            for i in 0..inst.n_sites() {
                let values: Vec<f64> = (0..inst.site(i).catalog.len())
                    .map(|k| r.subproblems[inst.global_index(FacilityRef::new(i, k))].bound)
                    .collect();
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                if inst.site(i).is_macro_site || min < 0.0 {
                    total += min;
                }
            }
            let constant: f64 = (0..inst.n_users()).map(|j| lambda.lambda1[j] + inst.big_m() * lambda.lambda2[j]).sum();
            let expected = total - constant;
            prop_assert!((r.lower_bound - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }

        #[test]
        fn case_detection_matches_total_demand(seed in any::<u64>()) {
            let inst = generate_instance(&GeneratorConfig { demand_hi_bps: 40e6, ..cfg(20, 4) }, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lambda = random_lambda(&inst, &mut rng);
            for g in 0..inst.n_facilities() {
                let f = inst.facility_ref(g);
                let r = solve_subproblem(&inst, f, &lambda, &RelaxationParams::default());
                let total: f64 = (0..inst.n_users())
                    .filter(|&j| knapsack_coefficient(&inst, j, f, &lambda) <= 0.0)
                    .map(|j| inst.user(j).demand)
                    .sum();
                prop_assert_eq!(r.case == KnapsackCase::AllFit, total <= inst.capacity(f));
                let load: f64 = r.selected.iter().map(|&j| inst.user(j).demand).sum();
                prop_assert!(load <= inst.capacity(f));
                prop_assert!(r.bound <= r.value);
            }
        }

        #[test]
        fn zero_lambda_bound_is_capacity_times_w(seed in any::<u64>()) {
            let inst = generate_instance(&GeneratorConfig { demand_hi_bps: 40e6, ..cfg(20, 3) }, seed).unwrap();
            let lambda = Multipliers::zeros(inst.n_users());
            for g in 0..inst.n_facilities() {
                let f = inst.facility_ref(g);
                let r = solve_subproblem(&inst, f, &lambda, &RelaxationParams::default());
                // Every bit earns w, so the fractional fill saturates capacity
                // whenever it binds.
                let cap = inst.capacity(f);
                let cost = inst.spec(f).cost;
                let load: f64 = r.selected.iter().map(|&j| inst.user(j).demand).sum();
                prop_assert!((r.value - (cost - 0.2 * load)).abs() <= 1e-9 * r.value.abs().max(1.0));
                if r.case == KnapsackCase::Greedy {
                    let expected = cost - 0.2 * cap;
                    prop_assert!((r.bound - expected).abs() <= 1e-9 * expected.abs());
                }
            }
        }
    }
}
