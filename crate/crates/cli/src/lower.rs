//! Lower-bound reports: seeded (L,N)-networks checked against the
//! oscillatory witness.

use std::path::Path;

use barron_core::lowerbound::{interval_l1_lower, make_witness, LowerBoundReport, Witness};
use barron_core::netcore::random_relu_network;
use barron_core::rng::{stream, stream_id};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerSpec {
    #[serde(rename = "L")]
    pub depth: usize,
    #[serde(rename = "N")]
    pub width: usize,
    pub s: f64,
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    #[serde(default = "defaults::d")]
    pub d: usize,
    #[serde(default = "defaults::networks")]
    pub networks: usize,
    /// x₁-lines per axis of the transverse grid
    #[serde(default = "defaults::lines")]
    pub lines: usize,
    pub seed: u64,
}

mod defaults {
    pub fn eps() -> f64 {
        0.1
    }
    pub fn d() -> usize {
        2
    }
    pub fn networks() -> usize {
        50
    }
    pub fn lines() -> usize {
        20
    }
}

impl LowerSpec {
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
        map.extend(flags);
        let spec: LowerSpec =
            serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| CliError::usage(e.to_string()))?;
        if spec.networks == 0 || spec.lines == 0 {
            return Err(CliError::usage("fields `networks`, `lines`: must be positive"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkResult {
    pub index: usize,
    pub stable_count_min: usize,
    pub certified_lower: f64,
    pub measured_l1: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerReport {
    pub n: usize,
    pub s: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L")]
    pub depth: usize,
    #[serde(rename = "N")]
    pub width: usize,
    pub eps: f64,
    pub guarantee: i64,
    pub theorem_bound: f64,
    pub stable_count_min: usize,
    pub certified_lower: f64,
    pub measured_l1: f64,
    pub networks: Vec<NetworkResult>,
    pub pass: bool,
}

impl LowerReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn judge(w: &Witness, index: usize, r: &LowerBoundReport) -> NetworkResult {
    let bound = w.theorem_bound();
    let pass = r.stable_count_min as i64 >= w.stable_guarantee()
        && r.certified_lower >= bound
        && r.measured_l1 >= r.certified_lower;
    NetworkResult {
        index,
        stable_count_min: r.stable_count_min,
        certified_lower: r.certified_lower,
        measured_l1: r.measured_l1,
        pass,
    }
}

/// Network `i` has all hidden widths equal to `N` and weights drawn from
/// stream `(seed, i)`.
pub fn run_lower(spec: &LowerSpec) -> Result<LowerReport> {
    let w = make_witness(spec.depth, spec.width, spec.s, spec.eps, spec.d)?;
    let widths = vec![spec.width; spec.depth];
    let results: Vec<Result<NetworkResult>> = (0..spec.networks)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(spec.seed, stream_id(&[i as u64]));
            let net = random_relu_network(spec.d, &widths, &mut rng)?;
            let r = interval_l1_lower(&w, &net, spec.lines)?;
            Ok(judge(&w, i, &r))
        })
        .collect();
    let networks = results.into_iter().collect::<Result<Vec<_>>>()?;
    let stable_count_min = networks.iter().map(|r| r.stable_count_min).min().unwrap_or(0);
    let certified_lower = networks.iter().map(|r| r.certified_lower).fold(f64::INFINITY, f64::min);
    let measured_l1 = networks.iter().map(|r| r.measured_l1).fold(f64::INFINITY, f64::min);
    let pass = networks.iter().all(|r| r.pass);
    Ok(LowerReport {
        n: w.n,
        s: w.s,
        r: w.r,
        depth: w.depth,
        width: w.width,
        eps: w.eps,
        guarantee: w.stable_guarantee(),
        theorem_bound: w.theorem_bound(),
        stable_count_min,
        certified_lower,
        measured_l1,
        networks,
        pass,
    })
}
