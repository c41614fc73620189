//! Sweep specification: flags or a JSON config file with the same field names.

use std::fmt;
use std::path::{Path, PathBuf};

use barron_core::build::Arch;
use barron_core::spectral::SpectralMeasure;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Norm exponent `p ∈ [1, ∞]`, written as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(pub f64);

impl Exponent {
    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        let v = match t {
            "inf" | "infinity" | "Inf" => f64::INFINITY,
            _ => t.parse::<f64>().map_err(|_| format!("invalid norm exponent `{t}`"))?,
        };
        if !(v >= 1.0) {
            return Err(format!("norm exponent must be >= 1, got {t}"));
        }
        Ok(Exponent(v))
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_inf() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(v) => v.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Frequency split applied before building.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitRule {
    #[default]
    None,
    /// threshold `R = 1`
    Unit,
    /// threshold `R = N^L (1 + dL ln N)^{-L}`
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub target: PathBuf,
    pub s: f64,
    #[serde(rename = "L", default = "defaults::depth")]
    pub depth: usize,
    pub sweep: Vec<usize>,
    #[serde(default = "defaults::p")]
    pub p: Vec<Exponent>,
    pub seed: u64,
    #[serde(default = "defaults::attempts")]
    pub attempts: usize,
    #[serde(default = "defaults::arch")]
    pub arch: Arch,
    #[serde(default)]
    pub split: SplitRule,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// midpoint-grid cells per axis for finite `p` (d ≤ 3)
    #[serde(default = "defaults::grid")]
    pub grid: usize,
    /// Monte Carlo points for finite `p` when d > 3
    #[serde(default = "defaults::mc_points")]
    pub mc_points: usize,
    /// uniform points used to rank the K candidates
    #[serde(default = "defaults::selection_points")]
    pub selection_points: usize,
    #[serde(default = "defaults::cert_resolution")]
    pub cert_resolution: usize,
    #[serde(default = "defaults::cert_slack")]
    pub cert_slack: f64,
    #[serde(default = "defaults::cert_levels")]
    pub cert_levels: usize,
    /// exit with status 1 if any fitted slope exceeds this
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_slope: Option<f64>,
}

mod defaults {
    use super::*;
    pub fn depth() -> usize {
        1
    }
    pub fn p() -> Vec<Exponent> {
        vec![Exponent(2.0)]
    }
    pub fn attempts() -> usize {
        8
    }
    pub fn arch() -> Arch {
        Arch::Shallow
    }
    pub fn grid() -> usize {
        128
    }
    pub fn mc_points() -> usize {
        20_000
    }
    pub fn selection_points() -> usize {
        1024
    }
    pub fn cert_resolution() -> usize {
        64
    }
    pub fn cert_slack() -> f64 {
        0.1
    }
    pub fn cert_levels() -> usize {
        12
    }
}

impl SweepSpec {
    /// Builds a spec from an optional config file overlaid with flag values
    /// (`flags` holds only the flags that were given).
    pub fn from_sources(config: Option<&Path>, flags: serde_json::Map<String, serde_json::Value>) -> Result<Self> {
        let mut map = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
                match serde_json::from_str(&text) {
                    Ok(serde_json::Value::Object(m)) => m,
                    Ok(_) => return Err(CliError::usage("config file must hold a JSON object")),
                    Err(e) => return Err(CliError::usage(format!("config {}: {e}", path.display()))),
                }
            }
            None => Default::default(),
        };
        // relative target paths in a config file are relative to the file
        if let (Some(path), Some(serde_json::Value::String(t))) = (config, map.get("target").cloned()) {
            if !flags.contains_key("target") && Path::new(&t).is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                map.insert("target".into(), base.join(t).to_string_lossy().into_owned().into());
            }
        }
        map.extend(flags);
        let spec: SweepSpec =
            serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| CliError::usage(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(CliError::usage("field `sweep`: needs at least one width"));
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) || self.sweep[0] == 0 {
            return Err(CliError::usage("field `sweep`: widths must be positive and strictly increasing"));
        }
        if self.p.is_empty() {
            return Err(CliError::usage("field `p`: needs at least one exponent"));
        }
        if self.depth == 0 {
            return Err(CliError::usage("field `L`: must be positive"));
        }
        if self.attempts == 0 {
            return Err(CliError::usage("field `attempts`: must be positive"));
        }
        if self.arch == Arch::Shallow && self.depth != 1 {
            return Err(CliError::usage("field `L`: shallow sweeps need L = 1"));
        }
        if self.arch == Arch::Shallow && self.p.iter().any(|p| p.is_inf()) {
            return Err(CliError::usage(
                "field `p`: certified sup norms need a Lipschitz network (arch deep)",
            ));
        }
        if !(self.s > 0.0 && self.s <= 0.5) {
            return Err(CliError::usage("field `s`: must lie in (0, 1/2]"));
        }
        if self.arch == Arch::Deep && !(self.s * self.depth as f64 <= 0.5) {
            return Err(CliError::usage("fields `s`, `L`: deep sweeps need sL <= 1/2"));
        }
        if self.grid < 16 || self.selection_points == 0 || self.mc_points < 2 || self.cert_resolution == 0 {
            return Err(CliError::usage("grid >= 16, selection_points >= 1, mc_points >= 2 and cert_resolution >= 1"));
        }
        Ok(())
    }

    pub fn load_target(&self) -> Result<(SpectralMeasure, String)> {
        let text = std::fs::read_to_string(&self.target)
            .map_err(|e| CliError::usage(format!("field `target`: cannot read {}: {e}", self.target.display())))?;
        let m = SpectralMeasure::from_json(&text)
            .map_err(|e| CliError::usage(format!("field `target`: {e}")))?;
        Ok((m, text))
    }

    /// First 16 hex digits of SHA-256 over the spec (minus output path and
    /// target location) and the target file contents.
    pub fn config_hash(&self, target_text: &str) -> String {
        let mut view = serde_json::to_value(self).expect("spec serializes");
        if let serde_json::Value::Object(m) = &mut view {
            m.remove("target");
        }
        let mut h = Sha256::new();
        h.update(view.to_string().as_bytes());
        h.update([0u8]);
        h.update(target_text.as_bytes());
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
