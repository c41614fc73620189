//! Targets given by explicit Fourier data.
//!
//! An atomic measure represents `f(x) = Σ_k a_k cos(2π ξ_k·x + φ_k)`; the
//! continuous family is the Bessel potential. Norms are those of this fixed
//! extension, which upper-bound the infimum over all extensions.

use std::f64::consts::PI;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bessel::BesselTarget;
use crate::error::{invalid, Error, Result};
use crate::function::Function;

/// Largest supported input dimension.
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAtom {
    xi: Vec<f64>,
    amplitude: f64,
    phase: f64,
}

impl SpectralAtom {
    /// The phase is reduced into `[0, 2π)`.
    pub fn new(xi: Vec<f64>, amplitude: f64, phase: f64) -> Result<Self> {
        if xi.is_empty() {
            return Err(invalid("frequency vector must have length d >= 1"));
        }
        if xi.iter().any(|v| !v.is_finite()) || !amplitude.is_finite() || !phase.is_finite() {
            return Err(invalid("atom components must be finite"));
        }
        if amplitude < 0.0 {
            return Err(invalid(format!("amplitude must be nonnegative, got {amplitude}")));
        }
        let mut phase = phase.rem_euclid(2.0 * PI);
        if phase >= 2.0 * PI {
            phase = 0.0;
        }
        Ok(Self { xi, amplitude, phase })
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// `|ξ|₁`
    pub fn l1(&self) -> f64 {
        self.xi.iter().map(|v| v.abs()).sum()
    }

    /// ℓ¹ norm of the negative part of ξ.
    pub fn negative_l1(&self) -> f64 {
        self.xi.iter().filter(|v| **v < 0.0).map(|v| -v).sum()
    }

    pub fn is_zero_frequency(&self) -> bool {
        self.xi.iter().all(|v| *v == 0.0)
    }

    /// Integer-shifted phase θ with `cos(2π(ξ·x + θ)) = cos(2π ξ·x + φ)` and
    /// `0 ≤ ξ·x + θ ≤ 1 + |ξ|₁` on the unit cube.
    pub fn shifted_phase(&self) -> f64 {
        let frac = self.phase / (2.0 * PI);
        frac + (self.negative_l1() - frac).ceil()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.amplitude * (2.0 * PI * dot(&self.xi, x) + self.phase).cos()
    }
}

/// Spectral measure of a target function.
#[derive(Debug, Clone)]
pub enum SpectralMeasure {
    Atomic { dim: usize, atoms: Vec<SpectralAtom> },
    Bessel(BesselTarget),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarronNorm {
    /// `υ_{f,s} = ∫ |ξ|₁^s |f̂|`
    pub seminorm: f64,
    /// `‖f‖_{B^s} = ∫ (1+|ξ|₁)^s |f̂|`
    pub full_norm: f64,
}

/// Draw from the shallow-construction measure: frequency plus dyadic scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnSample {
    pub atom: usize,
    pub xi: Vec<f64>,
    pub level: u32,
}

/// Draw from the deep-construction measure: frequency plus `r ∈ (0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnSample {
    pub atom: usize,
    pub xi: Vec<f64>,
    pub r: f64,
}

impl SpectralMeasure {
    /// Atomic measure with at least one atom, all of dimension `dim`.
    pub fn atomic(dim: usize, atoms: Vec<SpectralAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("atomic measure needs at least one atom"));
        }
        Self::atomic_allow_empty(dim, atoms)
    }

    pub(crate) fn atomic_allow_empty(dim: usize, atoms: Vec<SpectralAtom>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        for a in &atoms {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.dim() });
            }
        }
        Ok(SpectralMeasure::Atomic { dim, atoms })
    }

    /// The zero function on `[0,1]^dim`.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::atomic_allow_empty(dim, Vec::new())
    }

    pub fn bessel(target: BesselTarget) -> Self {
        SpectralMeasure::Bessel(target)
    }

    pub fn dim(&self) -> usize {
        match self {
            SpectralMeasure::Atomic { dim, .. } => *dim,
            SpectralMeasure::Bessel(t) => t.dim(),
        }
    }

    pub fn atoms(&self) -> Result<&[SpectralAtom]> {
        match self {
            SpectralMeasure::Atomic { atoms, .. } => Ok(atoms),
            SpectralMeasure::Bessel(_) => Err(Error::UnsupportedTarget(
                "operation requires an atomic measure".into(),
            )),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SpectralMeasure::Atomic { atoms, .. } if atoms.is_empty())
    }

    /// Pointwise value of the target.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("evaluation point must be finite"));
        }
        Ok(self.value_unchecked(x))
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            SpectralMeasure::Atomic { atoms, .. } => atoms.iter().map(|a| a.value(x)).sum(),
            SpectralMeasure::Bessel(t) => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                t.eval_radial(r)
            }
        }
    }

    /// Seminorm and full norm of the canonical extension.
    pub fn barron_norm(&self, s: f64) -> Result<BarronNorm> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(invalid(format!("smoothness index must be finite and >= 0, got {s}")));
        }
        match self {
            SpectralMeasure::Atomic { atoms, .. } => {
                let mut seminorm = 0.0;
                let mut full_norm = 0.0;
                for a in atoms {
                    let w = a.l1();
                    if w > 0.0 {
                        seminorm += a.amplitude * w.powf(s);
                    }
                    full_norm += a.amplitude * (1.0 + w).powf(s);
                }
                Ok(BarronNorm { seminorm, full_norm })
            }
            SpectralMeasure::Bessel(t) => t.barron_norm(s),
        }
    }

    /// `Q = Σ a_k (1+|ξ_k|₁)^{-s}`.
    pub fn normalizer(&self, s: f64) -> Result<f64> {
        Ok(self
            .atoms()?
            .iter()
            .map(|a| a.amplitude * (1.0 + a.l1()).powf(-s))
            .sum())
    }

    /// `Σ a_k`, an upper bound on `sup |f|`.
    pub fn total_mass(&self) -> Result<f64> {
        Ok(self.atoms()?.iter().map(|a| a.amplitude).sum())
    }

    /// Global Lipschitz constant with respect to `|·|_∞`: `2π Σ a_k |ξ_k|₁`.
    pub fn lipschitz_bound(&self) -> Result<f64> {
        Ok(2.0 * PI * self.atoms()?.iter().map(|a| a.amplitude * a.l1()).sum::<f64>())
    }

    /// Atoms with `|ξ|₁ < threshold` go low, the rest high.
    pub fn frequency_split(&self, threshold: f64) -> Result<(SpectralMeasure, SpectralMeasure)> {
        if !(threshold > 0.0) {
            return Err(invalid(format!("split threshold must be positive, got {threshold}")));
        }
        let (low, high): (Vec<_>, Vec<_>) =
            self.atoms()?.iter().cloned().partition(|a| a.l1() < threshold);
        Ok((
            Self::atomic_allow_empty(self.dim(), low)?,
            Self::atomic_allow_empty(self.dim(), high)?,
        ))
    }

    /// Splits off zero-frequency atoms; returns their constant value and the
    /// remaining oscillatory measure.
    pub fn split_constant(&self) -> Result<(f64, SpectralMeasure)> {
        let mut constant = 0.0;
        let mut rest = Vec::new();
        for a in self.atoms()? {
            if a.is_zero_frequency() {
                constant += a.amplitude * a.phase.cos();
            } else {
                rest.push(a.clone());
            }
        }
        Ok((constant, Self::atomic_allow_empty(self.dim(), rest)?))
    }

    pub fn atom_sampler(&self, s: f64) -> Result<AtomSampler> {
        AtomSampler::new(self, s)
    }

    pub fn sample_snn<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> Result<SnnSample> {
        check_sampling_index(s)?;
        Ok(self.atom_sampler(s)?.sample_snn(self, rng))
    }

    pub fn sample_dnn<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> Result<DnnSample> {
        check_sampling_index(s)?;
        Ok(self.atom_sampler(s)?.sample_dnn(self, rng))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TargetFile = serde_json::from_str(text)?;
        file.into_measure()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            SpectralMeasure::Atomic { dim, atoms } => TargetFile::Atomic {
                d: *dim,
                atoms: atoms
                    .iter()
                    .map(|a| AtomRecord { xi: a.xi.clone(), a: a.amplitude, phi: a.phase })
                    .collect(),
            },
            SpectralMeasure::Bessel(t) => TargetFile::Family {
                d: t.dim(),
                family: "bessel".into(),
                alpha: t.alpha(),
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

impl Function for SpectralMeasure {
    fn dim(&self) -> usize {
        SpectralMeasure::dim(self)
    }
    fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), SpectralMeasure::dim(self));
        self.value_unchecked(x)
    }
}

fn check_sampling_index(s: f64) -> Result<()> {
    if s > 0.0 && s <= 0.5 {
        Ok(())
    } else {
        Err(invalid(format!("sampling requires 0 < s <= 1/2, got {s}")))
    }
}

/// Categorical law over atoms with weights `a_k (1+|ξ_k|₁)^{-s} / Q`.
#[derive(Debug, Clone)]
pub struct AtomSampler {
    s: f64,
    index: WeightedIndex<f64>,
}

impl AtomSampler {
    pub fn new(m: &SpectralMeasure, s: f64) -> Result<Self> {
        let atoms = m.atoms()?;
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let weights: Vec<f64> = atoms.iter().map(|a| a.amplitude * (1.0 + a.l1()).powf(-s)).collect();
        let index = WeightedIndex::new(&weights).map_err(|_| Error::EmptyMeasure)?;
        Ok(Self { s, index })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn sample_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }

    /// Scale index with `P(l) = (1 - 2^{-(1+s)}) 2^{-(1+s) l}`.
    pub fn sample_level<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let q = 2f64.powf(-(1.0 + self.s));
        // u in (0, 1]
        let u: f64 = 1.0 - rng.gen::<f64>();
        let l = (u.ln() / q.ln()).floor();
        if l.is_finite() && l >= 0.0 {
            l.min(u32::MAX as f64) as u32
        } else {
            0
        }
    }

    pub fn sample_snn<R: Rng + ?Sized>(&self, m: &SpectralMeasure, rng: &mut R) -> SnnSample {
        let atom = self.sample_atom(rng);
        let level = self.sample_level(rng);
        let xi = m.atoms().expect("sampler built from atomic measure")[atom].xi.clone();
        SnnSample { atom, xi, level }
    }

    pub fn sample_dnn<R: Rng + ?Sized>(&self, m: &SpectralMeasure, rng: &mut R) -> DnnSample {
        let atom = self.sample_atom(rng);
        let r = sample_sine_law(rng);
        let xi = m.atoms().expect("sampler built from atomic measure")[atom].xi.clone();
        DnnSample { atom, xi, r }
    }
}

/// Probability of scale index `l` under the shallow-construction measure.
pub fn level_pmf(s: f64, l: u32) -> f64 {
    let q = 2f64.powf(-(1.0 + s));
    (1.0 - q) * q.powi(l as i32)
}

/// Inverse CDF of the density `(π/2) sin(π r)` on (0,1).
pub fn sine_law_quantile(u: f64) -> f64 {
    (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos() / PI
}

fn sample_sine_law<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            let r = sine_law_quantile(u);
            if r > 0.0 && r < 1.0 {
                return r;
            }
        }
    }
}

/// `R = N^L (1 + dL ln N)^{-L}` threshold for the log-adjusted frequency split.
pub fn log_adjusted_threshold(width: usize, dim: usize, depth: usize) -> f64 {
    let n = width as f64;
    let l = depth as f64;
    n.powf(l) * (1.0 + dim as f64 * l * n.ln()).powf(-l)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Serialize, Deserialize)]
struct AtomRecord {
    xi: Vec<f64>,
    a: f64,
    phi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TargetFile {
    Atomic { d: usize, atoms: Vec<AtomRecord> },
    Family { d: usize, family: String, alpha: f64 },
}

impl TargetFile {
    fn into_measure(self) -> Result<SpectralMeasure> {
        match self {
            TargetFile::Atomic { d, atoms } => {
                let atoms = atoms
                    .into_iter()
                    .map(|r| SpectralAtom::new(r.xi, r.a, r.phi))
                    .collect::<Result<Vec<_>>>()?;
                SpectralMeasure::atomic(d, atoms)
            }
            TargetFile::Family { d, family, alpha } => match family.as_str() {
                "bessel" => Ok(SpectralMeasure::Bessel(BesselTarget::new(alpha, d)?)),
                other => Err(Error::UnsupportedTarget(format!(
                    "unknown density family {other:?}; only \"bessel\" is registered"
                ))),
            },
        }
    }
}
