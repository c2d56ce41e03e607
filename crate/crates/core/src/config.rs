//! Run configuration: JSON grammar, validation (collecting every violation,
//! not just the first), canonical serialization and the settings hash.
//!
//! Weights and override heights are rational strings ("1/2"), never floats.
//! The group is its list of invariant factors. Ramification sets are element
//! lists that must be closed under the unit-exponentiation action.

use num::rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::group::{FiniteAbelianGroup, GroupElement, RamSet, WeightFunction};
use crate::heights::{HeightSpec, Override, Place};
use crate::local::{LocalCondition, LocalData};
use crate::util::parse_rational;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("bad rational: {0}")]
    BadRational(String),
    #[error("bad group: {0}")]
    BadGroup(String),
    #[error("bad weight key {0:?}: expected comma-separated coordinates")]
    BadWeightKey(String),
    #[error("weight violation: {0}")]
    BadWeight(String),
    #[error("R is not valid: {0}")]
    BadRamSet(String),
    #[error("bad override place {0:?}")]
    BadOverridePlace(String),
    #[error("override violation at {0}: {1}")]
    BadOverride(String, String),
    #[error("bad condition: {0}")]
    BadCondition(String),
    #[error("extra_S entry {0} is not prime")]
    BadExtraS(u64),
    #[error("bound must be >= 1")]
    BadBound,
    #[error("json: {0}")]
    Json(String),
}

/// One local condition literal: `{"place": 2, "split": true}` or
/// `{"place": 7, "orbit_in": [[1],[3]]}` (`"inf"` for the real place).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConditionSpec {
    pub place: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit_in: Option<Vec<Vec<u32>>>,
}

/// Height override: a rational string (constant) or a class map.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OverrideSpec {
    Constant(String),
    ByClass(BTreeMap<String, String>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub group: Vec<u32>,
    /// orbit representative coordinates (comma separated) -> rational string
    pub weights: BTreeMap<String, String>,
    #[serde(rename = "R")]
    pub ram_set: Vec<Vec<u32>>,
    #[serde(default)]
    pub extra_s: Vec<u64>,
    /// place ("inf" or a prime, as string keys) -> override
    #[serde(default)]
    pub overrides: BTreeMap<String, OverrideSpec>,
    #[serde(default)]
    pub conditions: Vec<ConditionSpec>,
    #[serde(default = "default_bound")]
    pub bound: u64,
    /// number of geometric checkpoints (×10 from 10^3 up to the bound)
    #[serde(default)]
    pub checkpoints: u32,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub workers: usize,
}

fn default_bound() -> u64 {
    1000
}

/// Everything a run needs, validated.
pub struct RunSetup {
    pub ld: LocalData,
    pub heights: HeightSpec,
    pub r: RamSet,
    pub conditions: BTreeMap<Place, LocalCondition>,
    pub bound: u64,
    pub checkpoints: Vec<u64>,
    pub eps: f64,
    pub workers: usize,
    pub config: RunConfig,
}

pub fn parse_config(text: &str) -> Result<RunSetup, Vec<ConfigError>> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| vec![ConfigError::Json(e.to_string())])?;
    validate(config)
}

fn parse_place(v: &serde_json::Value) -> Result<Place, ConfigError> {
    match v {
        serde_json::Value::String(s) if s == "inf" => Ok(Place::Inf),
        serde_json::Value::String(s) => s
            .parse::<u64>()
            .map(Place::Finite)
            .map_err(|_| ConfigError::BadOverridePlace(s.clone())),
        serde_json::Value::Number(n) => n
            .as_u64()
            .map(Place::Finite)
            .ok_or_else(|| ConfigError::BadOverridePlace(n.to_string())),
        other => Err(ConfigError::BadOverridePlace(other.to_string())),
    }
}

fn parse_coords(key: &str) -> Result<Vec<u32>, ConfigError> {
    key.split(',')
        .map(|c| c.trim().parse::<u32>())
        .collect::<Result<Vec<u32>, _>>()
        .map_err(|_| ConfigError::BadWeightKey(key.to_string()))
}

pub fn validate(config: RunConfig) -> Result<RunSetup, Vec<ConfigError>> {
    let mut errors: Vec<ConfigError> = Vec::new();

    let group = match FiniteAbelianGroup::new(&config.group) {
        Ok(g) => g,
        Err(e) => {
            errors.push(ConfigError::BadGroup(e.to_string()));
            return Err(errors);
        }
    };

    // weights
    let mut wmap: BTreeMap<GroupElement, BigRational> = BTreeMap::new();
    for (key, val) in &config.weights {
        let coords = match parse_coords(key) {
            Ok(c) => c,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        match parse_rational(val) {
            Ok(r) => {
                wmap.insert(GroupElement { coords }, r);
            }
            Err(e) => errors.push(e),
        }
    }
    let weight = match WeightFunction::from_orbit_map(&group, &wmap) {
        Ok(w) => Some(w),
        Err(ws) => {
            for e in ws {
                errors.push(ConfigError::BadWeight(e.to_string()));
            }
            None
        }
    };

    // R
    let mut r_indices = Vec::new();
    for coords in &config.ram_set {
        match group.index_of(&GroupElement {
            coords: coords.clone(),
        }) {
            Ok(i) => r_indices.push(i),
            Err(e) => errors.push(ConfigError::BadRamSet(e.to_string())),
        }
    }
    let ram = match RamSet::new(&group, &r_indices) {
        Ok(r) => Some(r),
        Err(e) => {
            errors.push(ConfigError::BadRamSet(e.to_string()));
            None
        }
    };

    // extra_S
    for &q in &config.extra_s {
        if !crate::primes::is_prime(q) {
            errors.push(ConfigError::BadExtraS(q));
        }
    }

    // overrides
    let mut overrides: BTreeMap<Place, Override> = BTreeMap::new();
    for (key, spec) in &config.overrides {
        let place = if key == "inf" {
            Place::Inf
        } else {
            match key.parse::<u64>() {
                Ok(p) => Place::Finite(p),
                Err(_) => {
                    errors.push(ConfigError::BadOverridePlace(key.clone()));
                    continue;
                }
            }
        };
        let ov = match spec {
            OverrideSpec::Constant(s) => match parse_rational(s) {
                Ok(r) => Override::Constant(r),
                Err(e) => {
                    errors.push(ConfigError::BadOverride(key.clone(), e.to_string()));
                    continue;
                }
            },
            OverrideSpec::ByClass(map) => {
                let mut out = BTreeMap::new();
                let mut bad = false;
                for (class, val) in map {
                    let class_idx = if let Ok(i) = class.parse::<u32>() {
                        i
                    } else if let Ok(coords) = parse_coords(class) {
                        match group.index_of(&GroupElement { coords }) {
                            Ok(i) => i,
                            Err(e) => {
                                errors.push(ConfigError::BadOverride(
                                    key.clone(),
                                    e.to_string(),
                                ));
                                bad = true;
                                continue;
                            }
                        }
                    } else {
                        errors.push(ConfigError::BadOverride(key.clone(), class.clone()));
                        bad = true;
                        continue;
                    };
                    match parse_rational(val) {
                        Ok(r) => {
                            out.insert(class_idx, r);
                        }
                        Err(e) => {
                            errors.push(ConfigError::BadOverride(key.clone(), e.to_string()));
                            bad = true;
                        }
                    }
                }
                if bad {
                    continue;
                }
                Override::ByClass {
                    map: out,
                    default: None,
                }
            }
        };
        overrides.insert(place, ov);
    }

    // conditions
    let mut conditions: BTreeMap<Place, LocalCondition> = BTreeMap::new();
    for spec in &config.conditions {
        let place = match parse_place(&spec.place) {
            Ok(p) => p,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let cond = match (&spec.split, &spec.orbit_in) {
            (Some(true), None) => LocalCondition::Split,
            (None, Some(orbits)) => {
                let mut reps = Vec::new();
                let mut ok = true;
                for coords in orbits {
                    match group.index_of(&GroupElement {
                        coords: coords.clone(),
                    }) {
                        Ok(i) => reps.push(group.orbit_rep(i)),
                        Err(e) => {
                            errors.push(ConfigError::BadCondition(e.to_string()));
                            ok = false;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                reps.sort_unstable();
                reps.dedup();
                LocalCondition::OrbitIn(reps)
            }
            _ => {
                errors.push(ConfigError::BadCondition(format!(
                    "condition at {place:?} needs exactly one of split/orbit_in"
                )));
                continue;
            }
        };
        conditions.insert(place, cond);
    }

    if config.bound == 0 {
        errors.push(ConfigError::BadBound);
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let weight = weight.expect("validated");
    let ram = ram.expect("validated");
    let ld = LocalData::new(group, &config.extra_s);
    let heights = match HeightSpec::new(&ld.group, weight, overrides) {
        Ok(h) => h,
        Err(e) => return Err(vec![ConfigError::BadOverride("heights".into(), e.to_string())]),
    };

    // geometric checkpoint grid ×10 from 10^3, always ending at the bound
    let mut checkpoints = Vec::new();
    if config.checkpoints > 0 {
        let mut b = 1000u64;
        while b < config.bound && checkpoints.len() + 1 < config.checkpoints as usize {
            checkpoints.push(b);
            b = b.saturating_mul(10);
        }
    }
    checkpoints.push(config.bound);

    Ok(RunSetup {
        ld,
        heights,
        r: ram,
        conditions,
        bound: config.bound,
        checkpoints,
        eps: config.eps.unwrap_or(1e-8),
        workers: config.workers,
        config,
    })
}

/// Canonical serialization (stable key order via BTreeMaps).
pub fn canonical_json(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("serializable")
}

/// Content hash of a canonical config + operation + bound.
pub fn settings_hash(config: &RunConfig, operation: &str, bound: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_json(config).as_bytes());
    hasher.update(operation.as_bytes());
    hasher.update(bound.to_le_bytes());
    let digest = hasher.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn packaged_configs_parse() {
        for name in examples::NAMES {
            let text = examples::config_text(name).unwrap();
            let setup = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
            assert!(setup.bound >= 1);
            // round-trip through the canonical form
            let canon = canonical_json(&setup.config);
            let again = parse_config(&canon).unwrap();
            assert_eq!(setup.config, again.config);
        }
    }

    #[test]
    fn rejects_unstable_r() {
        // R = {1} for Z/4 is not closed under the unit action
        let text = r#"{
            "group": [4],
            "weights": {"1": "1", "2": "2"},
            "R": [[1]],
            "bound": 100
        }"#;
        let errs = parse_config(text).err().expect("must fail");
        assert!(errs.iter().any(|e| matches!(e, ConfigError::BadRamSet(_))));
    }

    #[test]
    fn rejects_zero_weight_and_collects_all_violations() {
        let text = r#"{
            "group": [4],
            "weights": {"1": "0", "2": "x"},
            "R": [[1]],
            "bound": 0
        }"#;
        let errs = parse_config(text).err().expect("must fail");
        // zero weight, bad rational, unstable R, bad bound: all reported
        assert!(errs.len() >= 3, "{errs:?}");
        assert!(errs.iter().any(|e| matches!(e, ConfigError::BadWeight(_))));
        assert!(errs.iter().any(|e| matches!(e, ConfigError::BadRational(_))));
        assert!(errs.iter().any(|e| matches!(e, ConfigError::BadBound)));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let setup = parse_config(examples::config_text("example-1.8-part2").unwrap()).unwrap();
        let h1 = settings_hash(&setup.config, "count", 1000);
        let h2 = settings_hash(&setup.config, "count", 1000);
        assert_eq!(h1, h2);
        let h3 = settings_hash(&setup.config, "count", 2000);
        assert_ne!(h1, h3);
    }
}
