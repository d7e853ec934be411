//! Problem data: candidate sites with their facility catalogs, users, and the
//! channel gain table linking every facility to every user.

pub mod generator;
pub mod hata;
mod io;

pub use generator::{generate_instance, GeneratorConfig, SiteLayout};
pub use io::{load_instance, read_instance, save_instance, write_instance, SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityKind {
    MacroConventional,
    MacroMassiveMimo,
    SmallCell,
}

impl FacilityKind {
    pub fn is_macro(self) -> bool {
        matches!(self, Self::MacroConventional | Self::MacroMassiveMimo)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MacroConventional => "macro_conventional",
            Self::MacroMassiveMimo => "macro_massive_mimo",
            Self::SmallCell => "small_cell",
        }
    }
}

/// One entry of a site's catalog of installable base stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilitySpec {
    pub kind: FacilityKind,
    pub cost: f64,
    pub tx_power_dbm: f64,
    /// Radio access capacity in bits/s.
    pub access_capacity: f64,
    /// Linear factor in (0, 1] scaling the interference this facility causes.
    pub interference_suppression: f64,
}

impl FacilitySpec {
    pub fn tx_power_mw(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub position: Point,
    pub is_macro_site: bool,
    pub catalog: Vec<FacilitySpec>,
    /// Backhaul limit in bits/s; `f64::INFINITY` for fiber-fed sites.
    pub backhaul_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: usize,
    pub position: Point,
    /// Requested rate in bits/s.
    pub demand: f64,
    /// Linear SIR target.
    pub sir_threshold: f64,
}

/// Addresses facility `facility` in the catalog of site `site`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FacilityRef {
    pub site: usize,
    pub facility: usize,
}

impl FacilityRef {
    pub fn new(site: usize, facility: usize) -> Self {
        Self { site, facility }
    }
}

/// A validated problem instance. Immutable once built.
///
/// Facilities are numbered globally in (site, catalog index) order; the gain
/// table is stored facility-major: `gains[global * n_users + user]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    sites: Vec<Site>,
    users: Vec<User>,
    gains: Vec<f64>,
    bias_w: f64,
    big_m: f64,
    offsets: Vec<usize>,
    owners: Vec<FacilityRef>,
    received: Vec<f64>,
    interfering: Vec<f64>,
    capacities: Vec<f64>,
    quanta: Vec<i128>,
    quanta_scale: f64,
    sir_limits: Vec<i128>,
    trim_order: Vec<u32>,
    demands: Vec<f64>,
    trim_demands: Vec<f64>,
}

/// Headroom exponent for fixed-point interference sums: the largest per-user
/// total maps to roughly 2^QUANTA_BITS, far below the i128 limit.
const QUANTA_BITS: i32 = 100;

/// Relative slack applied against the SIR threshold in the integer test.
const SIR_MARGIN: f64 = 1e-12;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl ProblemInstance {
    pub fn new(sites: Vec<Site>, users: Vec<User>, gains: Vec<f64>, bias_w: f64, big_m: f64) -> Result<Self> {
        let inst = Self::build_unchecked(sites, users, gains, bias_w, big_m)?;
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance whose big-M is the smallest value that keeps the
    /// SIR constraint slack for every unserved user.
    pub fn with_tight_big_m(sites: Vec<Site>, users: Vec<User>, gains: Vec<f64>, bias_w: f64) -> Result<Self> {
        let mut inst = Self::build_unchecked(sites, users, gains, bias_w, 0.0)?;
        inst.big_m = inst.required_big_m();
        if inst.big_m <= 0.0 {
            // No users: any positive constant satisfies the invariant.
            inst.big_m = 1.0;
        }
        inst.validate()?;
        Ok(inst)
    }

    fn build_unchecked(sites: Vec<Site>, users: Vec<User>, gains: Vec<f64>, bias_w: f64, big_m: f64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Validation("instance has no sites".into()));
        }
        let mut offsets = Vec::with_capacity(sites.len() + 1);
        let mut owners = Vec::new();
        offsets.push(0);
        for (i, site) in sites.iter().enumerate() {
            for k in 0..site.catalog.len() {
                owners.push(FacilityRef::new(i, k));
            }
            offsets.push(owners.len());
        }
        let n_fac = owners.len();
        if gains.len() != n_fac * users.len() {
            return Err(Error::Validation(format!(
                "gain table has {} entries, expected {} facilities x {} users = {}",
                gains.len(),
                n_fac,
                users.len(),
                n_fac * users.len()
            )));
        }
        let n_users = users.len();
        let mut received = vec![0.0; gains.len()];
        let mut interfering = vec![0.0; gains.len()];
        for (g, owner) in owners.iter().enumerate() {
            let spec = &sites[owner.site].catalog[owner.facility];
            let p = spec.tx_power_mw();
            for j in 0..n_users {
                let r = p * gains[g * n_users + j];
                received[g * n_users + j] = r;
                interfering[g * n_users + j] = r * spec.interference_suppression;
            }
        }
        let capacities = owners
            .iter()
            .map(|f| {
                sites[f.site].catalog[f.facility]
                    .access_capacity
                    .min(sites[f.site].backhaul_capacity)
            })
            .collect();

        let max_total = (0..n_users)
            .map(|j| (0..n_fac).map(|g| interfering[g * n_users + j]).sum::<f64>())
            .fold(0.0, f64::max);
        let exponent = if max_total > 0.0 && max_total.is_finite() {
            QUANTA_BITS - max_total.log2().ceil() as i32
        } else {
            0
        };
        let quanta_scale = 2f64.powi(exponent);
        let quanta = interfering
            .iter()
            .map(|&p| {
                let q = (p * quanta_scale).round();
                if q.is_finite() && q.abs() < 2f64.powi(120) {
                    q as i128
                } else {
                    0
                }
            })
            .collect();
        // Largest interference (in quanta) a facility's signal tolerates.
        // The small margin keeps floating-point SIR reports on the passing
        // side of the threshold.
        let n = users.len();
        let sir_limits = received
            .iter()
            .enumerate()
            .map(|(idx, &p)| {
                let x = (p * quanta_scale / users[idx % n].sir_threshold * (1.0 - SIR_MARGIN)).floor();
                if x >= 2f64.powi(125) {
                    1i128 << 125
                } else if x >= 0.0 {
                    x as i128
                } else {
                    -1
                }
            })
            .collect();
        let mut trim_order: Vec<u32> = (0..users.len() as u32).collect();
        trim_order.sort_by(|&a, &b| {
            users[a as usize]
                .demand
                .total_cmp(&users[b as usize].demand)
                .then(b.cmp(&a))
        });
        let demands: Vec<f64> = users.iter().map(|u| u.demand).collect();
        let trim_demands = trim_order.iter().map(|&j| demands[j as usize]).collect();

        Ok(Self {
            sites,
            users,
            gains,
            bias_w,
            big_m,
            offsets,
            owners,
            received,
            interfering,
            capacities,
            quanta,
            quanta_scale,
            sir_limits,
            trim_order,
            demands,
            trim_demands,
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if !(self.bias_w.is_finite() && self.bias_w > 0.0) {
            return bad(format!("bias_w must be positive, got {}", self.bias_w));
        }
        for (i, site) in self.sites.iter().enumerate() {
            if site.id != i {
                return bad(format!("site at position {i} has id {}", site.id));
            }
            if !(site.position.x.is_finite() && site.position.y.is_finite()) {
                return bad(format!("site {i}: position is not finite"));
            }
            if site.catalog.is_empty() {
                return bad(format!("site {i}: empty catalog"));
            }
            if site.backhaul_capacity.is_nan() || site.backhaul_capacity <= 0.0 {
                return bad(format!(
                    "site {i}: backhaul_capacity must be positive, got {}",
                    site.backhaul_capacity
                ));
            }
            for (k, spec) in site.catalog.iter().enumerate() {
                if spec.kind.is_macro() != site.is_macro_site {
                    return bad(format!(
                        "site {i} facility {k}: kind {} not allowed at a {} site",
                        spec.kind.as_str(),
                        if site.is_macro_site { "macro" } else { "small-cell" }
                    ));
                }
                if !(spec.cost.is_finite() && spec.cost >= 0.0) {
                    return bad(format!("site {i} facility {k}: cost must be >= 0"));
                }
                if !(spec.access_capacity.is_finite() && spec.access_capacity > 0.0) {
                    return bad(format!("site {i} facility {k}: access_capacity must be positive"));
                }
                let e = spec.interference_suppression;
                if !(e > 0.0 && e <= 1.0) {
                    return bad(format!(
                        "site {i} facility {k}: interference_suppression {e} outside (0, 1]"
                    ));
                }
                if !spec.tx_power_dbm.is_finite() {
                    return bad(format!("site {i} facility {k}: tx_power_dbm not finite"));
                }
            }
        }
        for (j, user) in self.users.iter().enumerate() {
            if user.id != j {
                return bad(format!("user at position {j} has id {}", user.id));
            }
            if !(user.position.x.is_finite() && user.position.y.is_finite()) {
                return bad(format!("user {j}: position is not finite"));
            }
            if !(user.demand.is_finite() && user.demand > 0.0) {
                return bad(format!("user {j}: demand must be positive, got {}", user.demand));
            }
            if !(user.sir_threshold.is_finite() && user.sir_threshold > 0.0) {
                return bad(format!(
                    "user {j}: sir_threshold must be positive, got {}",
                    user.sir_threshold
                ));
            }
        }
        let n_users = self.users.len();
        for (idx, &h) in self.gains.iter().enumerate() {
            if !(h.is_finite() && h > 0.0) {
                let owner = self.owners[idx / n_users];
                return bad(format!(
                    "gain for site {} facility {} user {} must be positive and finite, got {h}",
                    owner.site,
                    owner.facility,
                    idx % n_users
                ));
            }
        }
        if self.received.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return bad("received power table has non-positive entries".into());
        }
        let required = self.required_big_m();
        if !(self.big_m.is_finite() && self.big_m > 0.0 && self.big_m >= required) {
            return bad(format!("big_m {} is below the required {required}", self.big_m));
        }
        Ok(())
    }

    /// `max_j gamma_j * sum_{i,k} P_ki h_ij^k E_ki`.
    pub fn required_big_m(&self) -> f64 {
        (0..self.n_users())
            .map(|j| {
                let total: f64 = (0..self.n_facilities()).map(|g| self.interfering_power(g, j)).sum();
                self.users[j].sir_threshold * total
            })
            .fold(0.0, f64::max)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn user(&self, j: usize) -> &User {
        &self.users[j]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn bias_w(&self) -> f64 {
        self.bias_w
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_facilities(&self) -> usize {
        self.owners.len()
    }

    pub fn global_index(&self, f: FacilityRef) -> usize {
        debug_assert!(f.facility < self.sites[f.site].catalog.len());
        self.offsets[f.site] + f.facility
    }

    pub fn facility_ref(&self, global: usize) -> FacilityRef {
        self.owners[global]
    }

    pub fn contains(&self, f: FacilityRef) -> bool {
        f.site < self.sites.len() && f.facility < self.sites[f.site].catalog.len()
    }

    pub fn spec(&self, f: FacilityRef) -> &FacilitySpec {
        &self.sites[f.site].catalog[f.facility]
    }

    pub fn gain(&self, f: FacilityRef, user: usize) -> f64 {
        self.gains[self.global_index(f) * self.n_users() + user]
    }

    /// Received power `P_ij^k` in mW, by global facility index.
    #[inline]
    pub fn received_power(&self, global: usize, user: usize) -> f64 {
        self.received[global * self.users.len() + user]
    }

    /// `P_ij^k * E_ki`: the interference this facility causes at `user`.
    #[inline]
    pub fn interfering_power(&self, global: usize, user: usize) -> f64 {
        self.interfering[global * self.users.len() + user]
    }

    pub fn received_row(&self, global: usize) -> &[f64] {
        let n = self.users.len();
        &self.received[global * n..(global + 1) * n]
    }

    pub fn interfering_row(&self, global: usize) -> &[f64] {
        let n = self.users.len();
        &self.interfering[global * n..(global + 1) * n]
    }

    /// Effective carrying limit `min(C_ki, C^b_i)`.
    pub fn capacity(&self, f: FacilityRef) -> f64 {
        self.capacities[self.global_index(f)]
    }

    #[inline]
    /// Capacities by global facility index.
    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn capacity_of(&self, global: usize) -> f64 {
        self.capacities[global]
    }

    /// Interference `P_ij^k E_ki` as a fixed-point integer. Sums of these are
    /// exact, so an aggregate does not depend on the order it was built in.
    #[inline]
    pub fn interference_quanta(&self, global: usize, user: usize) -> i128 {
        self.quanta[global * self.users.len() + user]
    }

    pub fn quanta_row(&self, global: usize) -> &[i128] {
        let n = self.users.len();
        &self.quanta[global * n..(global + 1) * n]
    }

    /// Converts a fixed-point interference sum back to mW.
    #[inline]
    pub fn quanta_to_power(&self, q: i128) -> f64 {
        q as f64 / self.quanta_scale
    }

    /// Whether `global` meets its user's SIR target against `others` quanta
    /// of interference. Every component uses this one test.
    #[inline]
    pub fn meets_sir(&self, global: usize, user: usize, others: i128) -> bool {
        others <= self.sir_limits[global * self.users.len() + user]
    }

    /// Users by nondecreasing demand, higher index first among equals: the
    /// order in which overloaded facilities shed users.
    pub fn trim_order(&self) -> &[u32] {
        &self.trim_order
    }

    /// User demands in index order.
    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    /// User demands in `trim_order`.
    pub(crate) fn trim_demands(&self) -> &[f64] {
        &self.trim_demands
    }

    pub fn macro_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().filter(|s| s.is_macro_site).map(|s| s.id)
    }

    pub fn small_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().filter(|s| !s.is_macro_site).map(|s| s.id)
    }

    /// Catalog index of the first entry of `kind` at `site`, if any.
    pub fn find_kind(&self, site: usize, kind: FacilityKind) -> Option<usize> {
        self.sites[site].catalog.iter().position(|s| s.kind == kind)
    }

    /// Catalog index used when a macro site must be filled with a default
    /// type: the conventional macro if present, else the first entry.
    pub fn default_macro_facility(&self, site: usize) -> usize {
        self.find_kind(site, FacilityKind::MacroConventional).unwrap_or(0)
    }

    pub fn total_demand(&self) -> f64 {
        self.users.iter().map(|u| u.demand).sum()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn macro_catalog() -> Vec<FacilitySpec> {
        vec![
            FacilitySpec {
                kind: FacilityKind::MacroConventional,
                cost: 0.0,
                tx_power_dbm: 46.0,
                access_capacity: 100e6,
                interference_suppression: 1.0,
            },
            FacilitySpec {
                kind: FacilityKind::MacroMassiveMimo,
                cost: 30.0,
                tx_power_dbm: 46.0,
                access_capacity: 5e9,
                interference_suppression: 0.01,
            },
        ]
    }

    pub fn small_catalog() -> Vec<FacilitySpec> {
        vec![FacilitySpec {
            kind: FacilityKind::SmallCell,
            cost: 1.0,
            tx_power_dbm: 30.0,
            access_capacity: 100e6,
            interference_suppression: 1.0,
        }]
    }

    pub fn site(id: usize, x: f64, y: f64, is_macro: bool, backhaul: f64) -> Site {
        Site {
            id,
            position: Point::new(x, y),
            is_macro_site: is_macro,
            catalog: if is_macro { macro_catalog() } else { small_catalog() },
            backhaul_capacity: backhaul,
        }
    }

    pub fn user(id: usize, x: f64, y: f64, demand: f64, sir_db: f64) -> User {
        User {
            id,
            position: Point::new(x, y),
            demand,
            sir_threshold: db_to_linear(sir_db),
        }
    }

    /// Builds an instance with gains derived from an inverse-square law so
    /// hand calculations stay easy.
    pub fn inverse_square(sites: Vec<Site>, users: Vec<User>) -> ProblemInstance {
        let mut gains = Vec::new();
        for s in &sites {
            for _ in &s.catalog {
                for u in &users {
                    let d = s.position.distance(&u.position).max(1.0);
                    gains.push(1e-6 / (d * d));
                }
            }
        }
        ProblemInstance::with_tight_big_m(sites, users, gains, 0.2).unwrap()
    }
}
