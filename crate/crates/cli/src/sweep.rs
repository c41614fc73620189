//! Width sweeps: best-of-K builds at each budget, errors per exponent, and
//! log-log rate fits.

use std::fmt::Write as _;

use barron_core::build::{
    build_best, expected_dnn_widths, expected_snn_units, Arch, BuildConfig, BuildReport, SelectionSet,
};
use barron_core::metrics::{
    fit_rate_flagged, linf_error_certified_refined, lp_error_grid, lp_error_mc, uniform_points, ErrorEstimate,
    FitStatus, MAX_GRID_DIM,
};
use barron_core::netcore::{Activation, Network, ReluNetwork, ShallowNet};
use barron_core::rng::{stream, stream_id};
use barron_core::spectral::{log_adjusted_threshold, SpectralMeasure};
use barron_core::Error;
use rayon::prelude::*;

use crate::error::Result;
use crate::spec::{Exponent, SplitRule, SweepSpec};

// stream tags
const SELECTION: u64 = 0x5e1;
const EVALUATION: u64 = 0xe7a;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub p: Exponent,
    pub estimate: ErrorEstimate,
    /// realized max layer width
    pub width: usize,
    /// samples in the chosen network
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub p: Exponent,
    pub status: FitStatus,
    pub slope: f64,
    pub residual: f64,
    pub excluded: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<FitRow>,
    pub seed: u64,
    pub config_hash: String,
}

impl SweepOutput {
    pub const HEADER: &'static str = "N,p,error,std_error,method,seed,config_hash,width,samples";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", Self::HEADER).unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                r.p,
                r.estimate.value,
                r.estimate.std_error,
                r.estimate.method.as_str(),
                self.seed,
                self.config_hash,
                r.width,
                r.samples
            )
            .unwrap();
        }
        for f in &self.fits {
            let method = match f.status {
                FitStatus::Ok => "fit",
                FitStatus::Saturated => "fit-saturated",
            };
            writeln!(out, "slope,{},{},{},{},{},{},,", f.p, f.slope, f.residual, method, self.seed, self.config_hash)
                .unwrap();
        }
        out
    }

    pub fn slope(&self, p: f64) -> Option<f64> {
        self.fits.iter().find(|f| f.p.0 == p && f.status == FitStatus::Ok).map(|f| f.slope)
    }
}

/// Expected max-layer width contributed by one sample.
fn width_per_sample(measure: &SpectralMeasure, spec: &SweepSpec, threshold: Option<f64>) -> Result<f64> {
    let one = |m: &SpectralMeasure, s: f64, depth: usize| -> Result<f64> {
        Ok(match spec.arch {
            Arch::Shallow => expected_snn_units(m, s)?,
            Arch::Deep => expected_dnn_widths(m, s, depth)?.into_iter().fold(0.0, f64::max),
        })
    };
    let Some(r) = threshold else { return one(measure, spec.s, spec.depth) };
    let (low, high) = measure.frequency_split(r)?;
    let low_w = if low.split_constant()?.1.is_empty() { None } else { Some(one(&low, 0.5, 1)?) };
    let high_w = if high.is_empty() { None } else { Some(one(&high, spec.s, spec.depth)?) };
    Ok(match (low_w, high_w) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => 0.0,
    })
}

fn constant_network(measure: &SpectralMeasure, spec: &SweepSpec) -> Result<Network> {
    let d = measure.dim();
    let c = measure.split_constant()?.0;
    Ok(match spec.arch {
        Arch::Shallow => Network::Shallow(ShallowNet::new(d, Vec::new(), c, Activation::Heaviside)?),
        Arch::Deep => Network::Relu(ReluNetwork::constant(d, spec.depth, c)?),
    })
}

/// Best-of-K network within width `n`: starts from the sample count whose
/// expected width fills the budget and shrinks it until some attempt fits.
pub fn build_at_width(
    measure: &SpectralMeasure,
    spec: &SweepSpec,
    n: usize,
    selection: &SelectionSet,
) -> Result<(Network, BuildReport)> {
    let threshold = match spec.split {
        SplitRule::None => None,
        SplitRule::Unit => Some(1.0),
        SplitRule::Log => Some(log_adjusted_threshold(n, measure.dim(), spec.depth)),
    };
    let per_sample = width_per_sample(measure, spec, threshold)?;
    let mut m = if per_sample > 0.0 { (n as f64 / per_sample).floor() as usize } else { 1 };
    let seed = stream_id(&[spec.seed, n as u64]);
    while m > 0 {
        let cfg = BuildConfig {
            s: spec.s,
            depth: spec.depth,
            m,
            attempts: spec.attempts,
            budget: Some(n),
            p: 2.0,
            seed,
        };
        match build_best(measure, &cfg, spec.arch, threshold, selection) {
            Ok(found) => return Ok(found),
            Err(Error::BudgetExceeded { .. }) => m = (m * 4 / 5).min(m - 1),
            Err(e) => return Err(e.into()),
        }
    }
    let net = constant_network(measure, spec)?;
    let report = BuildReport {
        widths: vec![0; spec.depth],
        units: 0,
        samples: 0,
        scales: Vec::new(),
        constant: measure.split_constant()?.0,
        attempt: 0,
        estimated_error: Some(selection.error(&net)),
    };
    Ok((net, report))
}

fn measure_error(
    measure: &SpectralMeasure,
    net: &Network,
    p: Exponent,
    spec: &SweepSpec,
    n: usize,
) -> Result<ErrorEstimate> {
    if p.is_inf() {
        let Network::Relu(relu) = net else {
            return Err(crate::CliError::usage("certified sup norms need a ReLU network"));
        };
        return Ok(linf_error_certified_refined(
            measure,
            relu,
            relu.lipschitz_bound_blockwise(),
            spec.cert_resolution,
            spec.cert_slack,
            spec.cert_levels,
        )?);
    }
    if measure.dim() <= MAX_GRID_DIM {
        Ok(lp_error_grid(measure, net, p.0, spec.grid)?)
    } else {
        let mut rng = stream(spec.seed, stream_id(&[EVALUATION, n as u64]));
        Ok(lp_error_mc(measure, net, p.0, spec.mc_points, &mut rng)?)
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let (measure, text) = spec.load_target()?;
    let hash = spec.config_hash(&text);
    let d = measure.dim();
    let sel_p = spec.p.iter().map(|p| p.0).fold(1.0, f64::max);
    let mut sel_rng = stream(spec.seed, SELECTION);
    let selection = SelectionSet::new(&measure, uniform_points(d, spec.selection_points, &mut sel_rng), sel_p)?;

    let per_n: Vec<Result<Vec<SweepRow>>> = spec
        .sweep
        .par_iter()
        .map(|&n| {
            let (net, report) = build_at_width(&measure, spec, n, &selection)?;
            spec.p
                .iter()
                .map(|&p| {
                    Ok(SweepRow {
                        n,
                        p,
                        estimate: measure_error(&measure, &net, p, spec, n)?,
                        width: report.max_width(),
                        samples: report.samples,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_n {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.p.0.total_cmp(&b.p.0)));

    let trivial = measure.total_mass()?;
    let mut ps: Vec<Exponent> = spec.p.clone();
    ps.sort_by(|a, b| a.0.total_cmp(&b.0));
    ps.dedup();
    let mut fits = Vec::new();
    for p in ps {
        let points: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.p == p).map(|r| (r.n as f64, r.estimate.value)).collect();
        let flagged = fit_rate_flagged(&points, trivial)?;
        let (slope, residual) = flagged.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.slope, f.residual));
        fits.push(FitRow { p, status: flagged.status, slope, residual, excluded: flagged.excluded });
    }
    Ok(SweepOutput { rows, fits, seed: spec.seed, config_hash: hash })
}
