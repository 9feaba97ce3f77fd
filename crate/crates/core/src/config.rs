//! JSON configuration: defaults merging, validation and hashing.
//!
//! Rates in `device` and `pump` are plain Hz; times are seconds.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dynamics::CoherenceParams;
use crate::error::{Error, Result};
use crate::experiments::ExperimentSpec;
use crate::hamiltonian::{DeviceParams, PumpParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub device: DeviceParams,
    pub coherence: CoherenceParams,
    pub pump: PumpParams,
    pub experiment: ExperimentSpec,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            coherence: CoherenceParams::default(),
            pump: PumpParams::default(),
            experiment: ExperimentSpec::default(),
            seed: 1,
        }
    }
}

/// Overlays `user` onto `base`, rejecting keys `base` lacks. Returns the
/// dotted paths that were filled from `base`.
fn merge(base: &mut Value, user: Value, path: &str, filled: &mut Vec<String>) -> Result<()> {
    match (base, user) {
        // Tagged enums are replaced, not merged: their variants differ in fields.
        (Value::Object(b), Value::Object(u)) if !b.contains_key("kind") => {
            for key in b.keys() {
                if !u.contains_key(key) {
                    filled.push(join(path, key));
                }
            }
            for (key, val) in u {
                let sub = join(path, &key);
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, val, &sub, filled)?,
                    None => return Err(Error::Config(format!("unknown key `{sub}`"))),
                }
            }
            Ok(())
        }
        (slot, val) => {
            *slot = val;
            Ok(())
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Config {
    /// Parses a user config, filling missing keys from defaults. Each
    /// filled key is logged at info level.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("malformed JSON at line {}, column {}: {e}", e.line(), e.column()))
        })?;
        if !user.is_object() {
            return Err(Error::Config("top level must be a JSON object".into()));
        }
        let mut base = serde_json::to_value(Config::default()).expect("defaults serialize");
        let mut filled = Vec::new();
        merge(&mut base, user, "", &mut filled)?;
        for key in &filled {
            log::info!("config: `{key}` not given, using default");
        }
        let cfg: Config = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.coherence.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.device.phi_q * self.pump.xi.norm() >= 0.5 {
            return Err(Error::Config("pump |phi_q * xi| must stay below 0.5".into()));
        }
        self.experiment.validate()
    }

    /// Canonical JSON of the effective configuration (sorted keys).
    pub fn effective_json(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    /// First 12 hex digits of SHA-256 over [`Config::effective_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.effective_json().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}
