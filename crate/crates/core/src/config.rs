//! Tunable parameters for every module, grouped the way they appear in
//! scenario files and `--config` override files.

use serde::{Deserialize, Serialize};

use crate::avcontrol::ControllerConfig;
use crate::hazard::HazardConfig;
use crate::hud::HudConfig;
use crate::physio::PhysioConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub controller: ControllerConfig,
    pub hazard: HazardConfig,
    pub hud: HudConfig,
    pub physio: PhysioConfig,
}

const SECTIONS: [&str; 4] = ["controller", "hazard", "hud", "physio"];

impl Settings {
    /// Builds settings from the module sections of a parsed TOML document,
    /// ignoring unrelated top-level keys.
    pub fn from_table(doc: &toml::Table) -> Result<Self, String> {
        let mut picked = toml::Table::new();
        for key in SECTIONS {
            if let Some(v) = doc.get(key) {
                picked.insert(key.to_string(), v.clone());
            }
        }
        toml::Value::Table(picked)
            .try_into()
            .map_err(|e: toml::de::Error| e.to_string())
    }

    /// Applies an override document on top of `self`. Keys present in the
    /// override replace the current values; everything else is kept.
    pub fn with_overrides(&self, overrides: &str) -> Result<Self, String> {
        let over: toml::Table = overrides
            .parse()
            .map_err(|e: toml::de::Error| e.to_string())?;
        for key in over.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                return Err(format!("unknown config section `{key}`"));
            }
        }
        let base = toml::Value::try_from(self).map_err(|e| e.to_string())?;
        let mut merged = base.as_table().cloned().unwrap_or_default();
        merge(&mut merged, &over);
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| e.to_string())
    }
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}
