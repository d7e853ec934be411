//! Randomized instances over a rectangular service area.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hata::{gain_from_loss_db, hata_path_loss};
use super::{db_to_linear, FacilityKind, FacilitySpec, Point, ProblemInstance, Site, User};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteLayout {
    /// Candidate small-cell sites drawn i.i.d. uniformly over the area.
    Uniform,
    /// Candidate sites at the centers of a near-square grid of cells.
    Grid,
}

/// Everything needed to draw an instance. Defaults reproduce the reference
/// setup: 2 km x 2 km area, four macro sites, 120 candidate small-cell sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub n_users: usize,
    pub n_small_sites: usize,
    pub macro_positions: Vec<Point>,
    pub layout: SiteLayout,
    pub demand_lo_bps: f64,
    pub demand_hi_bps: f64,
    pub backhaul_lo_bps: f64,
    pub backhaul_hi_bps: f64,
    pub bias_w: f64,
    pub sir_threshold_db: f64,
    pub macro_tx_power_dbm: f64,
    pub small_tx_power_dbm: f64,
    pub macro_cost: f64,
    pub massive_cost: f64,
    pub small_cost: f64,
    pub massive_suppression_db: f64,
    pub macro_access_capacity_bps: f64,
    pub massive_access_capacity_bps: f64,
    pub small_access_capacity_bps: f64,
    pub carrier_mhz: f64,
    pub macro_height_m: f64,
    pub small_height_m: f64,
    pub ue_height_m: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::table1()
    }
}

impl GeneratorConfig {
    pub fn table1() -> Self {
        Self {
            area_width_m: 2000.0,
            area_height_m: 2000.0,
            n_users: 700,
            n_small_sites: 120,
            macro_positions: vec![
                Point::new(500.0, 500.0),
                Point::new(1500.0, 500.0),
                Point::new(500.0, 1500.0),
                Point::new(1500.0, 1500.0),
            ],
            layout: SiteLayout::Uniform,
            demand_lo_bps: 100e3,
            demand_hi_bps: 8e6,
            backhaul_lo_bps: 50e6,
            backhaul_hi_bps: 150e6,
            bias_w: 0.2,
            sir_threshold_db: 8.0,
            macro_tx_power_dbm: 46.0,
            small_tx_power_dbm: 30.0,
            macro_cost: 0.0,
            massive_cost: 30.0,
            small_cost: 1.0,
            massive_suppression_db: -20.0,
            macro_access_capacity_bps: 100e6,
            massive_access_capacity_bps: 5e9,
            small_access_capacity_bps: 100e6,
            carrier_mhz: 1500.0,
            macro_height_m: 30.0,
            small_height_m: 10.0,
            ue_height_m: 1.5,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_users == 0 {
            return bad("n_users must be at least 1");
        }
        if self.n_small_sites + self.macro_positions.len() == 0 {
            return bad("instance needs at least one site");
        }
        if !(self.area_width_m > 0.0 && self.area_height_m > 0.0)
            || !(self.area_width_m.is_finite() && self.area_height_m.is_finite())
        {
            return bad("area dimensions must be positive and finite");
        }
        for p in &self.macro_positions {
            if !(0.0..=self.area_width_m).contains(&p.x) || !(0.0..=self.area_height_m).contains(&p.y) {
                return bad("macro position outside the area");
            }
        }
        if !(self.demand_lo_bps > 0.0 && self.demand_lo_bps <= self.demand_hi_bps) {
            return bad("demand range must satisfy 0 < lo <= hi");
        }
        if !(self.backhaul_lo_bps > 0.0 && self.backhaul_lo_bps <= self.backhaul_hi_bps) {
            return bad("backhaul range must satisfy 0 < lo <= hi");
        }
        if self.massive_suppression_db > 0.0 {
            return bad("massive_suppression_db must be <= 0");
        }
        Ok(())
    }

    fn macro_catalog(&self) -> Vec<FacilitySpec> {
        vec![
            FacilitySpec {
                kind: FacilityKind::MacroConventional,
                cost: self.macro_cost,
                tx_power_dbm: self.macro_tx_power_dbm,
                access_capacity: self.macro_access_capacity_bps,
                interference_suppression: 1.0,
            },
            FacilitySpec {
                kind: FacilityKind::MacroMassiveMimo,
                cost: self.massive_cost,
                tx_power_dbm: self.macro_tx_power_dbm,
                access_capacity: self.massive_access_capacity_bps,
                interference_suppression: db_to_linear(self.massive_suppression_db),
            },
        ]
    }

    fn small_catalog(&self) -> Vec<FacilitySpec> {
        vec![FacilitySpec {
            kind: FacilityKind::SmallCell,
            cost: self.small_cost,
            tx_power_dbm: self.small_tx_power_dbm,
            access_capacity: self.small_access_capacity_bps,
            interference_suppression: 1.0,
        }]
    }

    fn grid_positions(&self) -> Vec<Point> {
        let n = self.n_small_sites;
        if n == 0 {
            return Vec::new();
        }
        let aspect = self.area_width_m / self.area_height_m;
        let cols = ((n as f64 * aspect).sqrt().ceil() as usize).max(1);
        let rows = n.div_ceil(cols);
        let dx = self.area_width_m / cols as f64;
        let dy = self.area_height_m / rows as f64;
        (0..n)
            .map(|idx| {
                let (r, c) = (idx / cols, idx % cols);
                Point::new((c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy)
            })
            .collect()
    }
}

/// Draws an instance. Macro sites come first, then the candidate small-cell
/// sites; the stream is fully determined by `seed`.
pub fn generate_instance(config: &GeneratorConfig, seed: u64) -> Result<ProblemInstance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = db_to_linear(config.sir_threshold_db);

    let users: Vec<User> = (0..config.n_users)
        .map(|id| {
            let x = rng.random_range(0.0..config.area_width_m);
            let y = rng.random_range(0.0..config.area_height_m);
            let demand = rng.random_range(config.demand_lo_bps..=config.demand_hi_bps);
            User {
                id,
                position: Point::new(x, y),
                demand,
                sir_threshold: gamma,
            }
        })
        .collect();

    let small_positions = match config.layout {
        SiteLayout::Uniform => (0..config.n_small_sites)
            .map(|_| {
                Point::new(
                    rng.random_range(0.0..config.area_width_m),
                    rng.random_range(0.0..config.area_height_m),
                )
            })
            .collect(),
        SiteLayout::Grid => config.grid_positions(),
    };

    let mut sites = Vec::with_capacity(config.macro_positions.len() + small_positions.len());
    for &position in &config.macro_positions {
        sites.push(Site {
            id: sites.len(),
            position,
            is_macro_site: true,
            catalog: config.macro_catalog(),
            backhaul_capacity: f64::INFINITY,
        });
    }
    for position in small_positions {
        let backhaul = rng.random_range(config.backhaul_lo_bps..=config.backhaul_hi_bps);
        sites.push(Site {
            id: sites.len(),
            position,
            is_macro_site: false,
            catalog: config.small_catalog(),
            backhaul_capacity: backhaul,
        });
    }

    let mut gains = Vec::new();
    for site in &sites {
        let bs_height = if site.is_macro_site {
            config.macro_height_m
        } else {
            config.small_height_m
        };
        for _ in &site.catalog {
            for user in &users {
                let d = site.position.distance(&user.position);
                let loss = hata_path_loss(d, config.carrier_mhz, bs_height, config.ue_height_m)?;
                gains.push(gain_from_loss_db(loss));
            }
        }
    }

    ProblemInstance::with_tight_big_m(sites, users, gains, config.bias_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> GeneratorConfig {
        GeneratorConfig {
            n_users: 40,
            n_small_sites: 10,
            ..GeneratorConfig::table1()
        }
    }

    #[test]
    fn table1_defaults() {
        let c = GeneratorConfig::table1();
        assert_eq!(c.bias_w, 0.2);
        assert_eq!(c.sir_threshold_db, 8.0);
        assert_eq!(c.macro_tx_power_dbm, 46.0);
        assert_eq!(c.small_tx_power_dbm, 30.0);
        assert_eq!((c.macro_cost, c.small_cost, c.massive_cost), (0.0, 1.0, 30.0));
        assert_eq!(c.massive_suppression_db, -20.0);
        assert_eq!((c.backhaul_lo_bps, c.backhaul_hi_bps), (50e6, 150e6));
        assert_eq!((c.demand_lo_bps, c.demand_hi_bps), (100e3, 8e6));
        assert_eq!(c.massive_access_capacity_bps, 5e9);
        assert_eq!(c.macro_access_capacity_bps, 100e6);
        assert_eq!(c.small_access_capacity_bps, 100e6);
        assert_eq!(c.n_small_sites, 120);
        assert_eq!(c.macro_positions.len(), 4);
    }

    #[test]
    fn generated_values_respect_ranges() {
        let c = small_config();
        let inst = generate_instance(&c, 3).unwrap();
        assert_eq!(inst.n_sites(), 14);
        assert_eq!(inst.n_users(), 40);
        for u in inst.users() {
            assert!(u.demand >= c.demand_lo_bps && u.demand <= c.demand_hi_bps);
            assert!((0.0..c.area_width_m).contains(&u.position.x));
            assert!((0.0..c.area_height_m).contains(&u.position.y));
            assert!((u.sir_threshold - 10f64.powf(0.8)).abs() < 1e-12);
        }
        for s in inst.sites() {
            if s.is_macro_site {
                assert!(s.backhaul_capacity.is_infinite());
                assert_eq!(s.catalog.len(), 2);
                assert!((s.catalog[1].interference_suppression - 0.01).abs() < 1e-15);
            } else {
                assert!(s.backhaul_capacity >= 50e6 && s.backhaul_capacity <= 150e6);
                assert!((0.0..c.area_width_m).contains(&s.position.x));
            }
        }
        assert!(inst.gains().iter().all(|&h| h > 0.0 && h < 1.0));
        assert_eq!(inst.big_m(), inst.required_big_m());
    }

    #[test]
    fn deterministic_per_seed() {
        let c = small_config();
        let a = generate_instance(&c, 11).unwrap();
        let b = generate_instance(&c, 11).unwrap();
        let d = generate_instance(&c, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn grid_layout_stays_inside() {
        let c = GeneratorConfig {
            layout: SiteLayout::Grid,
            ..small_config()
        };
        let inst = generate_instance(&c, 0).unwrap();
        let small: Vec<_> = inst.small_sites().collect();
        assert_eq!(small.len(), 10);
        for i in small {
            let p = inst.site(i).position;
            assert!(p.x > 0.0 && p.x < 2000.0 && p.y > 0.0 && p.y < 2000.0);
        }
    }

    #[test]
    fn zero_users_or_sites_rejected() {
        let c = GeneratorConfig {
            n_users: 0,
            ..small_config()
        };
        assert!(matches!(generate_instance(&c, 0), Err(Error::InvalidConfig(_))));
        let c = GeneratorConfig {
            n_small_sites: 0,
            macro_positions: vec![],
            ..small_config()
        };
        assert!(matches!(generate_instance(&c, 0), Err(Error::InvalidConfig(_))));
    }
}
