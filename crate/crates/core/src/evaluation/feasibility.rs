use serde::{Deserialize, Serialize};

use super::{facility_loads, Assignment, Deployment};
use crate::instance::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Constraints of the coverage-rewarding model: users may stay unserved.
    Relaxed,
    /// Additionally requires every user to be served.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Deployment or assignment vector has the wrong length.
    Shape,
    /// A catalog index that does not exist at its site.
    UnknownFacility,
    /// A user is attached to a facility that is not open.
    OpenConnected,
    /// Strict mode: a user is not served.
    MustServe,
    /// A served user misses its SIR target.
    Sir,
    AccessCapacity,
    Backhaul,
    /// A macro site without an open facility.
    MacroOpen,
    /// Stored per-facility loads disagree with the serving vector.
    LoadBookkeeping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub site: Option<usize>,
    pub facility: Option<usize>,
    pub user: Option<usize>,
    /// Signed slack of the violated inequality (negative when violated).
    pub slack: f64,
    pub message: String,
}

impl Violation {
    fn new(constraint: Constraint, message: String) -> Self {
        Self {
            constraint,
            site: None,
            facility: None,
            user: None,
            slack: f64::NAN,
            message,
        }
    }

    fn at(mut self, site: Option<usize>, facility: Option<usize>, user: Option<usize>) -> Self {
        self.site = site;
        self.facility = facility;
        self.user = user;
        self
    }

    fn slack(mut self, slack: f64) -> Self {
        self.slack = slack;
        self
    }
}

/// Lists every violated constraint of `(x, y)`. An empty list means the pair
/// is feasible. At most one facility per site and at most one server per user
/// hold by construction of the types.
pub fn check_feasibility(y: &Deployment, x: &Assignment, inst: &ProblemInstance, mode: CheckMode) -> Vec<Violation> {
    let mut out = Vec::new();
    if y.n_sites() != inst.n_sites() {
        out.push(Violation::new(
            Constraint::Shape,
            format!("deployment has {} sites, instance {}", y.n_sites(), inst.n_sites()),
        ));
        return out;
    }
    if x.serving.len() != inst.n_users() {
        out.push(Violation::new(
            Constraint::Shape,
            format!("assignment has {} users, instance {}", x.serving.len(), inst.n_users()),
        ));
        return out;
    }

    for i in 0..inst.n_sites() {
        match y.get(i) {
            Some(k) if k >= inst.site(i).catalog.len() => out.push(
                Violation::new(
                    Constraint::UnknownFacility,
                    format!(
                        "site {i} opens facility {k}, catalog has {}",
                        inst.site(i).catalog.len()
                    ),
                )
                .at(Some(i), Some(k), None),
            ),
            None if inst.site(i).is_macro_site => out.push(
                Violation::new(Constraint::MacroOpen, format!("macro site {i} has no open facility"))
                    .at(Some(i), None, None)
                    .slack(-1.0),
            ),
            _ => {}
        }
    }

    let mut valid_serving = true;
    for (j, s) in x.serving.iter().enumerate() {
        let Some(f) = *s else {
            if mode == CheckMode::Strict {
                out.push(
                    Violation::new(Constraint::MustServe, format!("user {j} is not served"))
                        .at(None, None, Some(j))
                        .slack(-1.0),
                );
            }
            continue;
        };
        if !inst.contains(f) {
            valid_serving = false;
            out.push(
                Violation::new(
                    Constraint::UnknownFacility,
                    format!("user {j} points at site {} facility {}", f.site, f.facility),
                )
                .at(Some(f.site), Some(f.facility), Some(j)),
            );
            continue;
        }
        if !y.is_open(f) {
            out.push(
                Violation::new(
                    Constraint::OpenConnected,
                    format!("user {j} served by closed facility {} at site {}", f.facility, f.site),
                )
                .at(Some(f.site), Some(f.facility), Some(j))
                .slack(-1.0),
            );
            continue;
        }
        if y.open_facilities().any(|o| !inst.contains(o)) {
            continue;
        }
        let g = inst.global_index(f);
        let others: i128 = y
            .open_facilities()
            .filter(|&o| o != f)
            .map(|o| inst.interference_quanta(inst.global_index(o), j))
            .sum();
        let signal = inst.received_power(g, j);
        let required = inst.user(j).sir_threshold * inst.quanta_to_power(others);
        if !inst.meets_sir(g, j, others) {
            out.push(
                Violation::new(
                    Constraint::Sir,
                    format!("user {j}: received {signal:.6e} mW below required {required:.6e} mW"),
                )
                .at(Some(f.site), Some(f.facility), Some(j))
                .slack(signal - required),
            );
        }
    }

    let loads = facility_loads(inst, &x.serving);
    for (g, &load) in loads.iter().enumerate() {
        if load == 0.0 {
            continue;
        }
        let f = inst.facility_ref(g);
        let access = inst.spec(f).access_capacity;
        if load > access {
            out.push(
                Violation::new(
                    Constraint::AccessCapacity,
                    format!(
                        "site {} facility {}: load {load} > access capacity {access}",
                        f.site, f.facility
                    ),
                )
                .at(Some(f.site), Some(f.facility), None)
                .slack(access - load),
            );
        }
        let backhaul = inst.site(f.site).backhaul_capacity;
        if load > backhaul {
            out.push(
                Violation::new(
                    Constraint::Backhaul,
                    format!("site {}: load {load} > backhaul {backhaul}", f.site),
                )
                .at(Some(f.site), Some(f.facility), None)
                .slack(backhaul - load),
            );
        }
    }

    if valid_serving {
        if x.served_demand.len() != loads.len() {
            out.push(Violation::new(
                Constraint::LoadBookkeeping,
                format!(
                    "served_demand has {} entries, instance has {} facilities",
                    x.served_demand.len(),
                    loads.len()
                ),
            ));
        } else {
            for (g, (&stored, &actual)) in x.served_demand.iter().zip(&loads).enumerate() {
                if (stored - actual).abs() > 1e-9 * actual.abs().max(1.0) {
                    let f = inst.facility_ref(g);
                    out.push(
                        Violation::new(
                            Constraint::LoadBookkeeping,
                            format!(
                                "site {} facility {}: stored load {stored}, actual {actual}",
                                f.site, f.facility
                            ),
                        )
                        .at(Some(f.site), Some(f.facility), None)
                        .slack(actual - stored),
                    );
                }
            }
        }
    }
    out
}
