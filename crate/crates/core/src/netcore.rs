//! Network containers: dense ReLU networks and shallow sigmoidal networks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::function::Function;
use crate::pwl::PiecewiseLinear;

pub const FILE_VERSION: u64 = 1;

#[inline]
fn relu(t: f64) -> f64 {
    t.max(0.0)
}

/// Row-compressed copy of a dense matrix, used for evaluation.
#[derive(Debug, Clone, PartialEq)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_dense(rows: &[Vec<f64>]) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in rows {
            for (j, v) in r.iter().enumerate() {
                if *v != 0.0 {
                    cols.push(j);
                    vals.push(*v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals }
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(j, v)| v * x[*j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// one row per output unit
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl DenseLayer {
    pub fn new(w: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        Self { w, b }
    }

    pub fn width(&self) -> usize {
        self.w.len()
    }

    fn input_dim(&self) -> usize {
        self.w.first().map_or(0, |r| r.len())
    }

    /// `‖W‖_{∞→∞}`, the largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.w.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// `x ↦ W_L·ReLU(W_{L−1}·(… ReLU(W_0 x + b_0) …) + b_{L−1}) + b_L`.
#[derive(Debug, Clone)]
pub struct ReluNetwork {
    d: usize,
    layers: Vec<DenseLayer>,
    out_w: Vec<f64>,
    out_b: f64,
    sparse: Vec<Csr>,
}

impl PartialEq for ReluNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.layers == other.layers && self.out_w == other.out_w && self.out_b == other.out_b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkStats {
    pub depth: usize,
    pub widths: Vec<usize>,
    pub parameters: usize,
    pub lipschitz: f64,
}

impl ReluNetwork {
    pub fn new(d: usize, layers: Vec<DenseLayer>, out_w: Vec<f64>, out_b: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        if layers.is_empty() {
            return Err(invalid("network needs at least one hidden layer"));
        }
        let mut fan_in = d;
        for (k, layer) in layers.iter().enumerate() {
            if layer.width() == 0 {
                return Err(invalid(format!("hidden layer {k} is empty")));
            }
            if layer.b.len() != layer.width() {
                return Err(invalid(format!("layer {k}: bias length {} != width {}", layer.b.len(), layer.width())));
            }
            if layer.w.iter().any(|r| r.len() != fan_in) {
                return Err(Error::DimensionMismatch { expected: fan_in, got: layer.input_dim() });
            }
            fan_in = layer.width();
        }
        if out_w.len() != fan_in {
            return Err(Error::DimensionMismatch { expected: fan_in, got: out_w.len() });
        }
        let all_finite = layers
            .iter()
            .flat_map(|l| l.w.iter().flatten().chain(&l.b))
            .chain(&out_w)
            .chain(std::iter::once(&out_b))
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(invalid("network weights must be finite"));
        }
        let sparse = layers.iter().map(|l| Csr::from_dense(&l.w)).collect();
        Ok(Self { d, layers, out_w, out_b, sparse })
    }

    /// Network with `depth` width-1 zero layers and output constant `c`.
    pub fn constant(d: usize, depth: usize, c: f64) -> Result<Self> {
        let mut layers = vec![DenseLayer::new(vec![vec![0.0; d]], vec![0.0])];
        for _ in 1..depth {
            layers.push(DenseLayer::new(vec![vec![0.0]], vec![0.0]));
        }
        Self::new(d, layers, vec![0.0], c)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn out_w(&self) -> &[f64] {
        &self.out_w
    }

    pub fn out_b(&self) -> f64 {
        self.out_b
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.width()).collect()
    }

    pub fn max_width(&self) -> usize {
        self.layers.iter().map(|l| l.width()).max().unwrap_or(0)
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let mut h = x.to_vec();
        for (layer, csr) in self.layers.iter().zip(&self.sparse) {
            h = layer.b.iter().enumerate().map(|(i, b)| relu(csr.row_dot(i, &h) + b)).collect();
        }
        self.out_w.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + self.out_b
    }

    /// `Π_ℓ ‖W_ℓ‖_{∞→∞}`, a Lipschitz constant with respect to `|·|_∞`.
    pub fn lipschitz_bound(&self) -> f64 {
        let out: f64 = self.out_w.iter().map(|v| v.abs()).sum();
        self.layers.iter().map(|l| l.inf_norm()).product::<f64>() * out
    }

    /// Lipschitz constant with respect to `|·|_∞` that splits the network
    /// into independent blocks (connected components of the weight graph)
    /// and sums their constants. A block whose first-layer rows are all
    /// multiples of one vector `v` is a function `h(v·x)` and gets the exact
    /// `|v|₁ · max|h′|`; other blocks get the product of their norms.
    pub fn lipschitz_bound_blockwise(&self) -> f64 {
        let offsets: Vec<usize> = std::iter::once(0)
            .chain(self.layers.iter().scan(0, |acc, l| {
                *acc += l.width();
                Some(*acc)
            }))
            .collect();
        let total = *offsets.last().unwrap();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for (k, csr) in self.sparse.iter().enumerate().skip(1) {
            for i in 0..self.layers[k].width() {
                for &j in &csr.cols[csr.row_ptr[i]..csr.row_ptr[i + 1]] {
                    let a = find(&mut parent, offsets[k] + i);
                    let b = find(&mut parent, offsets[k - 1] + j);
                    parent[a] = b;
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<Vec<usize>>> = Default::default();
        for (k, l) in self.layers.iter().enumerate() {
            for i in 0..l.width() {
                let root = find(&mut parent, offsets[k] + i);
                groups.entry(root).or_insert_with(|| vec![Vec::new(); self.layers.len()])[k].push(i);
            }
        }
        groups.values().map(|members| self.block_lipschitz(members)).sum()
    }

    fn block_lipschitz(&self, members: &[Vec<usize>]) -> f64 {
        // blocks missing a layer are constant in x or never reach the output
        if members.iter().any(|m| m.is_empty()) {
            return 0.0;
        }
        let last = members.len() - 1;
        let out: Vec<f64> = members[last].iter().map(|&i| self.out_w[i]).collect();
        if out.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let sub = |k: usize, i: usize| -> Vec<f64> { members[k - 1].iter().map(|&j| self.layers[k].w[i][j]).collect() };
        let first: Vec<&Vec<f64>> = members[0].iter().map(|&i| &self.layers[0].w[i]).collect();
        let pivot = first
            .iter()
            .flat_map(|r| r.iter().enumerate().map(|(c, v)| (c, v.abs())))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((col, vmax)) = pivot else { return 0.0 };
        if vmax == 0.0 {
            return 0.0;
        }
        let v = first.iter().find(|r| r[col].abs() == vmax).unwrap().to_vec();
        let coeffs: Vec<f64> = first.iter().map(|r| r[col] / v[col]).collect();
        let rank_one = first.iter().zip(&coeffs).all(|(r, c)| {
            let scale = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
            r.iter().zip(&v).all(|(a, b)| (a - c * b).abs() <= 1e-12 * scale)
        });
        if rank_one {
            let mut layers = vec![DenseLayer::new(
                coeffs.iter().map(|c| vec![*c]).collect(),
                members[0].iter().map(|&i| self.layers[0].b[i]).collect(),
            )];
            for k in 1..members.len() {
                layers.push(DenseLayer::new(
                    members[k].iter().map(|&i| sub(k, i)).collect(),
                    members[k].iter().map(|&i| self.layers[k].b[i]).collect(),
                ));
            }
            let zlo: f64 = v.iter().map(|x| x.min(0.0)).sum();
            let zhi: f64 = v.iter().map(|x| x.max(0.0)).sum();
            if zlo < zhi {
                if let Ok(line) = ReluNetwork::new(1, layers, out.clone(), 0.0)
                    .and_then(|h| h.restrict_to_line(&[0.0], &[1.0], (zlo, zhi)))
                {
                    let slope = line
                        .xs()
                        .windows(2)
                        .zip(line.ys().windows(2))
                        .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
                        .fold(0.0, f64::max);
                    return slope * (zhi - zlo);
                }
            }
        }
        let mut bound: f64 = first.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        for k in 1..members.len() {
            bound *= members[k]
                .iter()
                .map(|&i| sub(k, i).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max);
        }
        bound * out.iter().map(|x| x.abs()).sum::<f64>()
    }

    pub fn stats(&self) -> NetworkStats {
        let parameters = self.layers.iter().map(|l| l.width() * (l.input_dim() + 1)).sum::<usize>()
            + self.out_w.len()
            + 1;
        NetworkStats {
            depth: self.depth(),
            widths: self.widths(),
            parameters,
            lipschitz: self.lipschitz_bound(),
        }
    }

    /// Exact restriction `t ↦ forward(base + t·dir)` on `[t0, t1]`.
    pub fn restrict_to_line(&self, base: &[f64], dir: &[f64], t_range: (f64, f64)) -> Result<PiecewiseLinear> {
        if base.len() != self.d || dir.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: base.len().min(dir.len()) });
        }
        if dir.iter().all(|v| *v == 0.0) {
            return Err(invalid("line direction must be nonzero"));
        }
        let (t0, t1) = t_range;
        if !(t0 < t1) {
            return Err(invalid(format!("empty parameter range [{t0}, {t1}]")));
        }
        // pre-activations of the first layer are affine in t
        let first = &self.layers[0];
        let a: Vec<f64> = first.w.iter().zip(&first.b).map(|(r, b)| dot(r, base) + b).collect();
        let s: Vec<f64> = first.w.iter().map(|r| dot(r, dir)).collect();
        let mut ts = vec![t0, t1];
        for (ai, si) in a.iter().zip(&s) {
            if *si != 0.0 {
                let t = -ai / si;
                if t > t0 && t < t1 {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(|x, y| x.total_cmp(y));
        ts.dedup();
        let mut h: Vec<Vec<f64>> = ts
            .iter()
            .map(|t| a.iter().zip(&s).map(|(ai, si)| relu(ai + si * t)).collect())
            .collect();
        for (layer, csr) in self.layers.iter().zip(&self.sparse).skip(1) {
            let z: Vec<Vec<f64>> = h
                .iter()
                .map(|hv| layer.b.iter().enumerate().map(|(i, b)| csr.row_dot(i, hv) + b).collect())
                .collect();
            let (nts, nz) = refine_at_zero_crossings(&ts, &z);
            ts = nts;
            h = nz.into_iter().map(|zv| zv.into_iter().map(relu).collect()).collect();
        }
        let ys = h
            .iter()
            .map(|hv| self.out_w.iter().zip(hv).map(|(w, v)| w * v).sum::<f64>() + self.out_b)
            .collect();
        PiecewiseLinear::new(ts, ys)
    }
}

/// Inserts the zero crossings of every coordinate of the piecewise-linear
/// vector function sampled as `z` at `ts`.
fn refine_at_zero_crossings(ts: &[f64], z: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut out_t = Vec::with_capacity(ts.len() * 2);
    let mut out_z = Vec::with_capacity(ts.len() * 2);
    let mut lambdas = Vec::new();
    for k in 0..ts.len() {
        out_t.push(ts[k]);
        out_z.push(z[k].clone());
        if k + 1 == ts.len() {
            break;
        }
        let (za, zb) = (&z[k], &z[k + 1]);
        lambdas.clear();
        for (p, q) in za.iter().zip(zb) {
            if (*p < 0.0 && *q > 0.0) || (*p > 0.0 && *q < 0.0) {
                let lam = p / (p - q);
                if lam > 1e-13 && lam < 1.0 - 1e-13 {
                    lambdas.push(lam);
                }
            }
        }
        lambdas.sort_by(|x, y| x.total_cmp(y));
        lambdas.dedup_by(|x, y| *x - *y <= 1e-13);
        let (ta, tb) = (ts[k], ts[k + 1]);
        for &lam in &lambdas {
            let t = ta + lam * (tb - ta);
            if t <= *out_t.last().unwrap() || t >= tb {
                continue;
            }
            let mut zt: Vec<f64> = za.iter().zip(zb).map(|(p, q)| p + lam * (q - p)).collect();
            for (v, (p, q)) in zt.iter_mut().zip(za.iter().zip(zb)) {
                let own = p / (p - q);
                if ((*p < 0.0 && *q > 0.0) || (*p > 0.0 && *q < 0.0)) && (own - lam).abs() <= 1e-13 {
                    *v = 0.0;
                }
            }
            out_t.push(t);
            out_z.push(zt);
        }
    }
    (out_t, out_z)
}

impl Function for ReluNetwork {
    fn dim(&self) -> usize {
        self.d
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.forward_unchecked(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Heaviside,
    ClippedRamp,
    Logistic,
}

impl Activation {
    /// Heaviside uses `H(0) = 1`; the ramp is `clamp(t, 0, 1)`.
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Activation::Heaviside => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::ClippedRamp => t.clamp(0.0, 1.0),
            Activation::Logistic => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// `δ(ε)` with `|σ(t) − H(t)| < ε` whenever `|t| > δ`; `None` for Heaviside.
    pub fn tail_width(self, eps: f64) -> Option<f64> {
        match self {
            Activation::Heaviside => None,
            Activation::ClippedRamp => Some(1.0),
            Activation::Logistic => Some((1.0 / eps).ln().max(0.0)),
        }
    }

    pub fn sup_norm(self) -> f64 {
        1.0
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Heaviside => "heaviside",
            Activation::ClippedRamp => "clipped-ramp",
            Activation::Logistic => "logistic",
        }
    }
}

/// `c · σ(τ (w·x + b))`
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowUnit {
    pub c: f64,
    pub w: Vec<f64>,
    pub b: f64,
    pub tau: f64,
}

/// `x ↦ Σ_i c_i σ(τ_i(w_i·x + b_i)) + c_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNet {
    d: usize,
    units: Vec<ShallowUnit>,
    constant: f64,
    activation: Activation,
}

impl ShallowNet {
    pub fn new(d: usize, units: Vec<ShallowUnit>, constant: f64, activation: Activation) -> Result<Self> {
        if d == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        for u in &units {
            if u.w.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: u.w.len() });
            }
            if !(u.tau > 0.0) || !u.tau.is_finite() {
                return Err(invalid(format!("unit sharpness must be positive and finite, got {}", u.tau)));
            }
            if !u.c.is_finite() || !u.b.is_finite() || u.w.iter().any(|v| !v.is_finite()) {
                return Err(invalid("unit parameters must be finite"));
            }
        }
        if !constant.is_finite() {
            return Err(invalid("constant must be finite"));
        }
        Ok(Self { d, units, constant, activation })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn units(&self) -> &[ShallowUnit] {
        &self.units
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn width(&self) -> usize {
        self.units.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let act = self.activation;
        self.units
            .iter()
            .map(|u| {
                let z = dot(&u.w, x) + u.b;
                let arg = if act == Activation::Heaviside { z } else { u.tau * z };
                u.c * act.eval(arg)
            })
            .sum::<f64>()
            + self.constant
    }

    /// Unit concatenation; constants add.
    pub fn concat(&self, other: &ShallowNet) -> Result<ShallowNet> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: other.d });
        }
        if self.activation != other.activation {
            return Err(invalid("cannot concatenate networks with different activations"));
        }
        let mut units = self.units.clone();
        units.extend(other.units.iter().cloned());
        ShallowNet::new(self.d, units, self.constant + other.constant, self.activation)
    }

    /// Exact ReLU form of a clipped-ramp network:
    /// `clamp(z,0,1) = ReLU(z) − ReLU(z − 1)`, then `depth − 1` identity layers
    /// (the hidden values are nonnegative, so `ReLU` passes them through).
    pub fn to_relu_network(&self, depth: usize) -> Result<ReluNetwork> {
        if self.activation != Activation::ClippedRamp {
            return Err(invalid("exact ReLU embedding requires the clipped-ramp activation"));
        }
        if depth == 0 {
            return Err(invalid("depth must be positive"));
        }
        if self.units.is_empty() {
            return ReluNetwork::constant(self.d, depth, self.constant);
        }
        let n = 2 * self.units.len();
        let mut w = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for u in &self.units {
            let row: Vec<f64> = u.w.iter().map(|v| u.tau * v).collect();
            w.push(row.clone());
            b.push(u.tau * u.b);
            w.push(row);
            b.push(u.tau * u.b - 1.0);
            out.push(u.c);
            out.push(-u.c);
        }
        let mut layers = vec![DenseLayer::new(w, b)];
        for _ in 1..depth {
            layers.push(identity_layer(n));
        }
        ReluNetwork::new(self.d, layers, out, self.constant)
    }
}

impl Function for ShallowNet {
    fn dim(&self) -> usize {
        self.d
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.forward_unchecked(x)
    }
}

/// `n × n` identity with zero bias.
pub fn identity_layer(n: usize) -> DenseLayer {
    let w = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    DenseLayer::new(w, vec![0.0; n])
}

/// Network with i.i.d. uniform weights in `[-1, 1]` and biases in `[-1, 1]`.
pub fn random_relu_network<R: Rng + ?Sized>(d: usize, widths: &[usize], rng: &mut R) -> Result<ReluNetwork> {
    let mut fan_in = d;
    let mut layers = Vec::with_capacity(widths.len());
    for &n in widths {
        let w = (0..n).map(|_| (0..fan_in).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        let b = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        layers.push(DenseLayer::new(w, b));
        fan_in = n;
    }
    let out = (0..fan_in).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let ob = rng.gen_range(-1.0..=1.0);
    ReluNetwork::new(d, layers, out, ob)
}

/// Concatenates networks of equal depth into block-diagonal form; outputs add.
pub fn stack_block_diagonal(nets: &[ReluNetwork]) -> Result<ReluNetwork> {
    let first = nets.first().ok_or_else(|| invalid("nothing to stack"))?;
    let (d, depth) = (first.dim(), first.depth());
    if nets.iter().any(|n| n.dim() != d) {
        return Err(invalid("stacked networks must share the input dimension"));
    }
    if nets.iter().any(|n| n.depth() != depth) {
        return Err(invalid("stacked networks must share the depth"));
    }
    let mut layers = Vec::with_capacity(depth);
    for k in 0..depth {
        let total: usize = nets.iter().map(|n| n.layers[k].width()).sum();
        let total_in: usize = if k == 0 { d } else { nets.iter().map(|n| n.layers[k - 1].width()).sum() };
        let mut w = Vec::with_capacity(total);
        let mut b = Vec::with_capacity(total);
        let mut offset = 0;
        for n in nets {
            let layer = &n.layers[k];
            for (row, bias) in layer.w.iter().zip(&layer.b) {
                if k == 0 {
                    w.push(row.clone());
                } else {
                    let mut full = vec![0.0; total_in];
                    full[offset..offset + row.len()].copy_from_slice(row);
                    w.push(full);
                }
                b.push(*bias);
            }
            if k > 0 {
                offset += n.layers[k - 1].width();
            }
        }
        layers.push(DenseLayer::new(w, b));
    }
    let out_w = nets.iter().flat_map(|n| n.out_w.iter().copied()).collect();
    let out_b = nets.iter().map(|n| n.out_b).sum();
    ReluNetwork::new(d, layers, out_w, out_b)
}

/// Appends identity layers until the network has `depth` hidden layers.
pub fn pad_depth(net: &ReluNetwork, depth: usize) -> Result<ReluNetwork> {
    if depth < net.depth() {
        return Err(invalid(format!("cannot reduce depth {} to {depth}", net.depth())));
    }
    let mut layers = net.layers.clone();
    let last = net.layers.last().unwrap().width();
    while layers.len() < depth {
        layers.push(identity_layer(last));
    }
    ReluNetwork::new(net.d, layers, net.out_w.clone(), net.out_b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Either network kind, as read from a network file.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Relu(ReluNetwork),
    Shallow(ShallowNet),
}

impl Function for Network {
    fn dim(&self) -> usize {
        match self {
            Network::Relu(n) => n.dim(),
            Network::Shallow(n) => n.dim(),
        }
    }
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Network::Relu(n) => n.value(x),
            Network::Shallow(n) => n.value(x),
        }
    }
}

impl Network {
    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            Network::Relu(n) => NetworkFile {
                version: FILE_VERSION,
                kind: "relu".into(),
                d: n.d,
                layers: n.layers.iter().map(|l| LayerRecord { w: l.w.clone(), b: l.b.clone() }).collect(),
                out: OutRecord { w: n.out_w.clone(), b: n.out_b },
                activation: ActivationRecord { family: "relu".into(), tau: None },
            },
            Network::Shallow(n) => NetworkFile {
                version: FILE_VERSION,
                kind: "shallow".into(),
                d: n.d,
                layers: vec![LayerRecord {
                    w: n.units.iter().map(|u| u.w.clone()).collect(),
                    b: n.units.iter().map(|u| u.b).collect(),
                }],
                out: OutRecord { w: n.units.iter().map(|u| u.c).collect(), b: n.constant },
                activation: ActivationRecord {
                    family: n.activation.name().into(),
                    tau: Some(n.units.iter().map(|u| u.tau).collect()),
                },
            },
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Parse("missing integer field \"version\"".into()))?;
        if version != FILE_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let file: NetworkFile = serde_json::from_value(raw)?;
        if file.layers.iter().any(|l| l.w.is_empty()) {
            return Err(Error::Parse("network file contains an empty layer".into()));
        }
        let parse = |e: Error| Error::Parse(e.to_string());
        match file.kind.as_str() {
            "relu" => {
                let layers = file.layers.into_iter().map(|l| DenseLayer::new(l.w, l.b)).collect();
                ReluNetwork::new(file.d, layers, file.out.w, file.out.b).map(Network::Relu).map_err(parse)
            }
            "shallow" => {
                let activation = match file.activation.family.as_str() {
                    "heaviside" => Activation::Heaviside,
                    "clipped-ramp" => Activation::ClippedRamp,
                    "logistic" => Activation::Logistic,
                    other => return Err(Error::Parse(format!("unknown activation family {other:?}"))),
                };
                if file.layers.len() != 1 {
                    return Err(Error::Parse("shallow network must have exactly one layer".into()));
                }
                let layer = file.layers.into_iter().next().unwrap();
                let n = layer.w.len();
                let tau = file.activation.tau.unwrap_or_else(|| vec![1.0; n]);
                if layer.b.len() != n || file.out.w.len() != n || tau.len() != n {
                    return Err(Error::Parse("shallow network field lengths disagree".into()));
                }
                let units = layer
                    .w
                    .into_iter()
                    .zip(layer.b)
                    .zip(file.out.w)
                    .zip(tau)
                    .map(|(((w, b), c), tau)| ShallowUnit { c, w, b, tau })
                    .collect();
                ShallowNet::new(file.d, units, file.out.b, activation).map(Network::Shallow).map_err(parse)
            }
            other => Err(Error::Parse(format!("unknown network kind {other:?}"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerRecord {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutRecord {
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActivationRecord {
    family: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    tau: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    version: u64,
    kind: String,
    d: usize,
    layers: Vec<LayerRecord>,
    out: OutRecord,
    activation: ActivationRecord,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::{make_beta, pwl_equal, to_relu_units};
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn beta_network() -> ReluNetwork {
        let u = to_relu_units(&make_beta());
        let w = u.units.iter().map(|v| vec![v.a]).collect();
        let b = u.units.iter().map(|v| -v.b).collect();
        let out = u.units.iter().map(|v| v.c).collect();
        ReluNetwork::new(1, vec![DenseLayer::new(w, b)], out, u.constant).unwrap()
    }

    fn identity_gadget() -> ReluNetwork {
        ReluNetwork::new(1, vec![DenseLayer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0])], vec![1.0, -1.0], 0.0)
            .unwrap()
    }

    #[test]
    fn forward_examples() {
        let c = ReluNetwork::constant(3, 2, 1.25).unwrap();
        assert_eq!(c.forward(&[0.1, 0.7, 0.3]).unwrap(), 1.25);
        let id = identity_gadget();
        for t in [-2.0, -0.3, 0.0, 0.4, 5.0] {
            assert_eq!(id.forward(&[t]).unwrap(), t);
        }
        assert!((beta_network().forward(&[0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(c.forward(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn shallow_examples() {
        let unit = ShallowUnit { c: 1.0, w: vec![1.0, 0.0], b: -0.5, tau: 1.0 };
        let net = ShallowNet::new(2, vec![unit], 0.0, Activation::Heaviside).unwrap();
        assert_eq!(net.forward(&[0.7, 0.2]).unwrap(), 1.0);
        assert_eq!(net.forward(&[0.3, 0.2]).unwrap(), 0.0);
        let chi = ShallowNet::new(
            1,
            vec![
                ShallowUnit { c: 1.0, w: vec![1.0], b: 0.0, tau: 1.0 },
                ShallowUnit { c: -1.0, w: vec![1.0], b: -1.0, tau: 1.0 },
            ],
            0.0,
            Activation::Heaviside,
        )
        .unwrap();
        assert_eq!(chi.forward(&[0.5]).unwrap(), 1.0);
        assert_eq!(chi.forward(&[1.5]).unwrap(), 0.0);
        assert_eq!(chi.forward(&[0.0]).unwrap(), 1.0);
        assert_eq!(chi.forward(&[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn restriction_examples() {
        let beta = beta_network();
        let line = beta.restrict_to_line(&[0.0], &[1.0], (0.0, 1.0)).unwrap();
        assert!(pwl_equal(&line.simplify(1e-15), &make_beta(), 1e-15).unwrap());

        let mut rng = stream(9, 0);
        let net = random_relu_network(3, &[6, 5, 4], &mut rng).unwrap();
        let base = [0.2, -0.1, 0.5];
        let dir = [1.0, 0.3, -0.7];
        let line = net.restrict_to_line(&base, &dir, (-2.0, 2.0)).unwrap();
        for _ in 0..1000 {
            let t: f64 = rng.gen_range(-2.0..2.0);
            let x: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
            assert!((line.eval(t) - net.forward(&x).unwrap()).abs() < 1e-10);
        }
        let bound = 2f64.powi(3) * (6.0 * 5.0 * 4.0);
        assert!((line.piece_count() as f64) <= bound);
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(ReluNetwork::constant(2, 1, 3.0).unwrap().lipschitz_bound(), 0.0);
        assert!(identity_gadget().lipschitz_bound() >= 1.0);
        let mut rng = stream(4, 0);
        let net = random_relu_network(2, &[8, 8], &mut rng).unwrap();
        let lip = net.lipschitz_bound();
        for _ in 0..10_000 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let y = [rng.gen::<f64>(), rng.gen::<f64>()];
            let dist = (x[0] - y[0]).abs().max((x[1] - y[1]).abs());
            let diff = (net.forward(&x).unwrap() - net.forward(&y).unwrap()).abs();
            assert!(diff <= lip * dist + 1e-12);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let beta = Network::Relu(beta_network());
        let again = Network::from_json(&beta.to_json().unwrap()).unwrap();
        assert_eq!(again, beta);
        let mut rng = stream(1, 1);
        let net = Network::Relu(random_relu_network(4, &[7, 3], &mut rng).unwrap());
        assert_eq!(Network::from_json(&net.to_json().unwrap()).unwrap(), net);
        let shallow = Network::Shallow(
            ShallowNet::new(
                2,
                vec![ShallowUnit { c: 0.1 + 0.2, w: vec![1.0 / 3.0, -2.0], b: 0.7, tau: 13.5 }],
                -0.25,
                Activation::Logistic,
            )
            .unwrap(),
        );
        assert_eq!(Network::from_json(&shallow.to_json().unwrap()).unwrap(), shallow);
    }

    #[test]
    fn malformed_files() {
        let empty = r#"{"version":1,"kind":"relu","d":1,"layers":[{"W":[],"b":[]}],"out":{"W":[],"b":0},"activation":{"family":"relu"}}"#;
        assert!(matches!(Network::from_json(empty), Err(Error::Parse(_))));
        let v2 = r#"{"version":2,"kind":"relu","d":1,"layers":[],"out":{"W":[],"b":0},"activation":{"family":"relu"}}"#;
        assert!(matches!(Network::from_json(v2), Err(Error::UnsupportedVersion(2))));
        assert!(matches!(Network::from_json("{"), Err(Error::Parse(_))));
        let bad_shape = r#"{"version":1,"kind":"relu","d":2,"layers":[{"W":[[1.0]],"b":[0.0]}],"out":{"W":[1.0],"b":0},"activation":{"family":"relu"}}"#;
        assert!(matches!(Network::from_json(bad_shape), Err(Error::Parse(_))));
    }

    #[test]
    fn ramp_embedding_matches_heaviside_away_from_breakpoints() {
        let mut rng = stream(21, 0);
        let units: Vec<ShallowUnit> = (0..6)
            .map(|_| ShallowUnit {
                c: rng.gen_range(-1.0..1.0),
                w: vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                b: rng.gen_range(-1.0..1.0),
                tau: 1.0,
            })
            .collect();
        let heavi = ShallowNet::new(2, units.clone(), 0.3, Activation::Heaviside).unwrap();
        let tau = 1e6;
        let ramp_units = units.iter().map(|u| ShallowUnit { tau, ..u.clone() }).collect();
        let ramp = ShallowNet::new(2, ramp_units, 0.3, Activation::ClippedRamp).unwrap();
        for depth in [1, 3] {
            let deep = ramp.to_relu_network(depth).unwrap();
            let mut checked = 0;
            while checked < 500 {
                let x = [rng.gen::<f64>(), rng.gen::<f64>()];
                let near = units.iter().any(|u| (dot(&u.w, &x) + u.b).abs() < 2.0 / tau);
                if near {
                    continue;
                }
                assert!((deep.forward(&x).unwrap() - heavi.forward(&x).unwrap()).abs() < 1e-9);
                checked += 1;
            }
        }
    }

    #[test]
    fn stacking_and_padding() {
        let mut rng = stream(3, 3);
        let a = random_relu_network(2, &[3, 2], &mut rng).unwrap();
        let b = random_relu_network(2, &[4, 5], &mut rng).unwrap();
        let s = stack_block_diagonal(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.widths(), vec![7, 7]);
        let shallow = random_relu_network(2, &[3], &mut rng).unwrap();
        let padded = pad_depth(&shallow, 3).unwrap();
        assert_eq!(padded.depth(), 3);
        for _ in 0..100 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let sum = a.forward(&x).unwrap() + b.forward(&x).unwrap();
            assert!((s.forward(&x).unwrap() - sum).abs() < 1e-12);
            assert!((padded.forward(&x).unwrap() - shallow.forward(&x).unwrap()).abs() < 1e-12);
        }
        assert!(stack_block_diagonal(&[a, padded]).is_err());
    }

    #[test]
    fn activation_tails() {
        for eps in [1e-2, 1e-4] {
            let delta = Activation::Logistic.tail_width(eps).unwrap();
            for t in [delta * 1.0001, delta * 2.0, delta * 10.0] {
                assert!((Activation::Logistic.eval(t) - 1.0).abs() < eps);
                assert!(Activation::Logistic.eval(-t) < eps);
            }
        }
        assert!(Activation::Heaviside.tail_width(0.1).is_none());
        assert_eq!(Activation::ClippedRamp.eval(1.5), 1.0);
    }

    fn empirical_lipschitz(net: &ReluNetwork, rng: &mut crate::rng::Stream) -> f64 {
        let mut best: f64 = 0.0;
        for _ in 0..5000 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let h = 1e-3;
            let y = [x[0] + rng.gen_range(-h..h), x[1] + rng.gen_range(-h..h)];
            let dist = (x[0] - y[0]).abs().max((x[1] - y[1]).abs());
            best = best.max((net.forward(&x).unwrap() - net.forward(&y).unwrap()).abs() / dist);
        }
        best
    }

    #[test]
    fn blockwise_lipschitz_on_stacked_ridges() {
        // ridge blocks h_i(v_i·x): the blockwise bound is exact per block
        let mut rng = stream(21, 0);
        let mut blocks = Vec::new();
        for k in 0..6 {
            let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w0 = c.iter().map(|ci| vec![ci * v[0], ci * v[1]]).collect();
            let b0 = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l1 = DenseLayer::new((0..2).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(), vec![0.1 * k as f64, -0.2]);
            let out = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            blocks.push(ReluNetwork::new(2, vec![DenseLayer::new(w0, b0), l1], out, 0.0).unwrap());
        }
        let net = stack_block_diagonal(&blocks).unwrap();
        let tight = net.lipschitz_bound_blockwise();
        let loose = net.lipschitz_bound();
        let parts: f64 = blocks.iter().map(|b| b.lipschitz_bound_blockwise()).sum();
        assert!((tight - parts).abs() < 1e-12 * parts);
        assert!(tight <= loose);
        assert!(empirical_lipschitz(&net, &mut rng) <= tight * (1.0 + 1e-9));
    }

    #[test]
    fn blockwise_lipschitz_of_constant() {
        assert_eq!(ReluNetwork::constant(3, 2, 1.0).unwrap().lipschitz_bound_blockwise(), 0.0);
    }

    proptest! {
        #[test]
        fn restriction_agrees_with_forward(seed in 0u64..1000, widths in prop::collection::vec(1usize..6, 1..4)) {
            let mut rng = stream(seed, 7);
            let net = random_relu_network(2, &widths, &mut rng).unwrap();
            let base = [rng.gen::<f64>(), rng.gen::<f64>()];
            let dir = [rng.gen_range(-1.0..1.0), 1.0];
            let line = net.restrict_to_line(&base, &dir, (0.0, 1.0)).unwrap();
            for i in 0..=50 {
                let t = i as f64 / 50.0;
                let x = [base[0] + t * dir[0], base[1] + t * dir[1]];
                prop_assert!((line.eval(t) - net.forward(&x).unwrap()).abs() < 1e-10);
            }
        }

        #[test]
        fn blockwise_lipschitz_is_valid(seed in 0u64..1000, widths in prop::collection::vec(1usize..6, 1..4)) {
            let mut rng = stream(seed, 9);
            let net = random_relu_network(2, &widths, &mut rng).unwrap();
            let tight = net.lipschitz_bound_blockwise();
            prop_assert!(tight <= net.lipschitz_bound() * (1.0 + 1e-12));
            prop_assert!(empirical_lipschitz(&net, &mut rng) <= tight * (1.0 + 1e-9) + 1e-12);
        }

        #[test]
        fn round_trip_is_bit_exact(seed in 0u64..1000) {
            let mut rng = stream(seed, 8);
            let net = Network::Relu(random_relu_network(3, &[4, 2], &mut rng).unwrap());
            prop_assert_eq!(Network::from_json(&net.to_json().unwrap()).unwrap(), net);
        }
    }
}
