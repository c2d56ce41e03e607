//! Packaged regression configurations. The quartic example carries the
//! weights 1 ↦ 1, 2 ↦ 2, 3 ↦ 1 with trivial heights at 2 and ∞; the three
//! parts differ in the ramification set and the split conditions. The ℤ/2
//! conductor baseline is the classical quadratic count.

pub const NAMES: [&str; 4] = [
    "example-1.8-part1",
    "example-1.8-part2",
    "example-1.8-part3",
    "z2-conductor",
];

pub const EXAMPLE_PART1: &str = r#"{
  "group": [4],
  "weights": {"1": "1", "2": "2"},
  "R": [[1], [2], [3]],
  "extra_s": [],
  "overrides": {"2": "1", "inf": "1"},
  "conditions": [
    {"place": 2, "split": true},
    {"place": "inf", "split": true}
  ],
  "bound": 10000000,
  "checkpoints": 5,
  "workers": 0
}"#;

pub const EXAMPLE_PART2: &str = r#"{
  "group": [4],
  "weights": {"1": "1", "2": "2"},
  "R": [[1], [3]],
  "extra_s": [],
  "overrides": {"2": "1", "inf": "1"},
  "conditions": [
    {"place": 2, "split": true},
    {"place": "inf", "split": true}
  ],
  "bound": 10000000,
  "checkpoints": 5,
  "workers": 0
}"#;

pub const EXAMPLE_PART3: &str = r#"{
  "group": [4],
  "weights": {"1": "1", "2": "2"},
  "R": [[2]],
  "extra_s": [],
  "overrides": {"2": "1", "inf": "1"},
  "conditions": [],
  "bound": 100000000,
  "checkpoints": 5,
  "workers": 0
}"#;

pub const Z2_CONDUCTOR: &str = r#"{
  "group": [2],
  "weights": {"1": "1"},
  "R": [[1]],
  "extra_s": [],
  "overrides": {"2": "1", "inf": "1"},
  "conditions": [],
  "bound": 10000000,
  "checkpoints": 5,
  "workers": 0
}"#;

pub fn config_text(name: &str) -> Option<&'static str> {
    match name {
        "example-1.8-part1" => Some(EXAMPLE_PART1),
        "example-1.8-part2" => Some(EXAMPLE_PART2),
        "example-1.8-part3" => Some(EXAMPLE_PART3),
        "z2-conductor" => Some(Z2_CONDUCTOR),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, settings_hash};

    /// The packaged quartic config hash is pinned; regression reports embed
    /// it, so a change here is a deliberate format break.
    #[test]
    fn part2_hash_pinned() {
        let setup = parse_config(EXAMPLE_PART2).unwrap();
        let h = settings_hash(&setup.config, "verify", setup.bound);
        assert_eq!(h, PART2_PINNED_HASH, "packaged config hash changed");
    }

    pub const PART2_PINNED_HASH: &str = "93d8f2e0027808808d5121e6d5efee1f";
}
