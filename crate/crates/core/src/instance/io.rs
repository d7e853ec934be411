//! JSON instance files.
//!
//! The document is self-describing: a `format` tag, a `schema_version`, and a
//! `gain_layout` string spelling out the flat gain-array strides. Unlimited
//! backhaul is written as `null`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FacilitySpec, Point, ProblemInstance, Site, User};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
const FORMAT_TAG: &str = "cellplan-instance";
const GAIN_LAYOUT: &str = "gains[(facility_offset[site] + k) * n_users + user], \
     facility_offset[site] = sum of catalog lengths of sites with a lower id; \
     linear power gain";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format: String,
    schema_version: u32,
    gain_layout: String,
    n_users: usize,
    n_facilities: usize,
    bias_w: f64,
    big_m: f64,
    sites: Vec<SiteRecord>,
    users: Vec<User>,
    gains: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteRecord {
    id: usize,
    position: Point,
    is_macro_site: bool,
    backhaul_capacity: Option<f64>,
    catalog: Vec<FacilitySpec>,
}

impl From<&Site> for SiteRecord {
    fn from(s: &Site) -> Self {
        Self {
            id: s.id,
            position: s.position,
            is_macro_site: s.is_macro_site,
            backhaul_capacity: s.backhaul_capacity.is_finite().then_some(s.backhaul_capacity),
            catalog: s.catalog.clone(),
        }
    }
}

impl From<SiteRecord> for Site {
    fn from(r: SiteRecord) -> Self {
        Self {
            id: r.id,
            position: r.position,
            is_macro_site: r.is_macro_site,
            catalog: r.catalog,
            backhaul_capacity: r.backhaul_capacity.unwrap_or(f64::INFINITY),
        }
    }
}

pub fn write_instance<W: Write>(inst: &ProblemInstance, writer: W) -> Result<()> {
    let file = InstanceFile {
        format: FORMAT_TAG.to_string(),
        schema_version: SCHEMA_VERSION,
        gain_layout: GAIN_LAYOUT.to_string(),
        n_users: inst.n_users(),
        n_facilities: inst.n_facilities(),
        bias_w: inst.bias_w(),
        big_m: inst.big_m(),
        sites: inst.sites().iter().map(SiteRecord::from).collect(),
        users: inst.users().to_vec(),
        gains: inst.gains().to_vec(),
    };
    let mut writer = writer;
    serde_json::to_writer(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_instance<R: Read>(reader: R) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_reader(reader)?;
    if file.format != FORMAT_TAG {
        return Err(Error::Validation(format!(
            "format: expected \"{FORMAT_TAG}\", found \"{}\"",
            file.format
        )));
    }
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: file.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if file.n_users != file.users.len() {
        return Err(Error::Validation(format!(
            "n_users: header says {}, users array has {}",
            file.n_users,
            file.users.len()
        )));
    }
    let inst = ProblemInstance::new(
        file.sites.into_iter().map(Site::from).collect(),
        file.users,
        file.gains,
        file.bias_w,
        file.big_m,
    )?;
    if file.n_facilities != inst.n_facilities() {
        return Err(Error::Validation(format!(
            "n_facilities: header says {}, catalogs define {}",
            file.n_facilities,
            inst.n_facilities()
        )));
    }
    Ok(inst)
}

pub fn save_instance(inst: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_instance(inst, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    read_instance(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_instance, GeneratorConfig};
    use proptest::prelude::*;

    fn config(users: usize, sites: usize) -> GeneratorConfig {
        GeneratorConfig {
            n_users: users,
            n_small_sites: sites,
            ..GeneratorConfig::table1()
        }
    }

    fn to_value(inst: &ProblemInstance) -> serde_json::Value {
        let mut buf = Vec::new();
        write_instance(inst, &mut buf).unwrap();
        serde_json::from_slice(&buf).unwrap()
    }

    fn from_value(v: &serde_json::Value) -> Result<ProblemInstance> {
        read_instance(serde_json::to_vec(v).unwrap().as_slice())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_is_identity(seed in any::<u64>(), users in 1usize..30, sites in 0usize..8) {
            let inst = generate_instance(&config(users, sites), seed).unwrap();
            let mut buf = Vec::new();
            write_instance(&inst, &mut buf).unwrap();
            let back = read_instance(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &inst);
            let mut again = Vec::new();
            write_instance(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }

    #[test]
    fn file_round_trip() {
        let inst = generate_instance(&config(12, 5), 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        save_instance(&inst, &path).unwrap();
        assert_eq!(load_instance(&path).unwrap(), inst);
    }

    #[test]
    fn negative_demand_names_user() {
        let inst = generate_instance(&config(6, 2), 1).unwrap();
        let mut v = to_value(&inst);
        v["users"][3]["demand"] = serde_json::json!(-5.0);
        let err = from_value(&v).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("user 3"), "{err}");
    }

    #[test]
    fn missing_gains_is_parse_error() {
        let inst = generate_instance(&config(6, 2), 1).unwrap();
        let mut v = to_value(&inst);
        v.as_object_mut().unwrap().remove("gains");
        let err = from_value(&v).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("gains"), "{err}");
    }

    #[test]
    fn wrong_schema_version() {
        let inst = generate_instance(&config(3, 1), 1).unwrap();
        let mut v = to_value(&inst);
        v["schema_version"] = serde_json::json!(99);
        assert!(matches!(
            from_value(&v).unwrap_err(),
            Error::SchemaVersion { found: 99, .. }
        ));
    }

    #[test]
    fn infinite_backhaul_written_as_null() {
        let inst = generate_instance(&config(3, 1), 1).unwrap();
        let v = to_value(&inst);
        assert!(v["sites"][0]["backhaul_capacity"].is_null());
        assert!(v["sites"][4]["backhaul_capacity"].is_number());
    }
}
