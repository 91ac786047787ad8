//! On-disk frozen-constant registry.
//!
//! The file maps constant names to `{module, value, tol}`. Entries absent from
//! the file are compared against the shipped baseline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use apollonian::frozen::{compare, Comparison, BASELINE};
use serde::{Deserialize, Serialize};

use crate::config::{input_err, CliResult};

pub const SCHEMA: &str = "apollo-frozen/1";
pub const FILE_NAME: &str = "frozen.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub module: String,
    pub value: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub schema: String,
    pub constants: BTreeMap<String, Entry>,
}

impl Registry {
    pub fn baseline() -> Self {
        let constants = BASELINE
            .iter()
            .map(|c| (c.name.to_string(), Entry { module: c.module.to_string(), value: c.value, tol: c.tol }))
            .collect();
        Registry { schema: SCHEMA.to_string(), constants }
    }

    pub fn load(path: &Path) -> CliResult<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        let reg: Registry = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => return input_err(format!("{}: {e}", path.display())),
        };
        if reg.schema != SCHEMA {
            return input_err(format!("{}: schema {} (expected {SCHEMA})", path.display(), reg.schema));
        }
        Ok(Some(reg))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Ok(std::fs::write(path, serde_json::to_string_pretty(self).expect("serializable") + "\n")?)
    }

    /// Compare a measurement with this registry, falling back to the baseline.
    pub fn compare(&self, name: &str, measured: f64) -> Option<Comparison> {
        let base = Registry::baseline();
        let e = self.constants.get(name).or_else(|| base.constants.get(name))?;
        Some(compare(name, e.value, measured, e.tol))
    }

    pub fn record(&mut self, name: &str, measured: f64) {
        let base = Registry::baseline();
        let Some(b) = base.constants.get(name) else { return };
        let tol = self.constants.get(name).map_or(b.tol, |e| e.tol);
        self.constants.insert(name.to_string(), Entry { module: b.module.clone(), value: measured, tol });
    }
}

/// `$APOLLO_CACHE_DIR/frozen.json`, else `./frozen.json`.
pub fn default_path() -> PathBuf {
    crate::cache::dir().map_or_else(|| PathBuf::from(FILE_NAME), |d| d.join(FILE_NAME))
}

/// One line per failed comparison, for the verify diff.
pub fn diff(comparisons: &[Comparison]) -> Vec<String> {
    comparisons
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            format!(
                "- {}: {}\n+ {}: {}   (|Δ| = {:e} > tol {:e})",
                c.name,
                c.frozen,
                c.name,
                c.measured,
                (c.measured - c.frozen).abs(),
                c.tol
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_round_trips_through_disk() {
        let dir = std::env::temp_dir().join(format!("apollo-registry-{}", std::process::id()));
        let path = dir.join(FILE_NAME);
        let reg = Registry::baseline();
        reg.save(&path).unwrap();
        assert_eq!(Registry::load(&path).unwrap(), Some(reg));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn tampered_entry_fails_with_diff() {
        let mut reg = Registry::baseline();
        reg.constants.get_mut("expsums.singular_96").unwrap().value += 0.5;
        let good = BASELINE.iter().find(|c| c.name == "expsums.singular_96").unwrap().value;
        let c = reg.compare("expsums.singular_96", good).unwrap();
        assert!(!c.pass);
        let d = diff(&[c]);
        assert_eq!(d.len(), 1);
        assert!(d[0].starts_with("- expsums.singular_96"));
    }

    #[test]
    fn unknown_names_are_not_recorded() {
        let mut reg = Registry::baseline();
        reg.record("nope", 1.0);
        assert!(!reg.constants.contains_key("nope"));
        assert!(reg.compare("nope", 1.0).is_none());
    }
}
