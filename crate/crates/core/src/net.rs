//! Multilayer-perceptron surrogate.
//!
//! Weights of layer `l` are stored row-major as a `fan_in × fan_out` block
//! followed by the `fan_out` biases, so a batch `X` (rows = points) maps to
//! `X · W + b` without transposes. Trainable PDE parameters, if any, follow
//! the network entries at the end of the flat vector.
//!
//! Batched evaluation splits rows into fixed-size chunks. Chunk boundaries
//! depend only on the row count, and per-chunk gradients are summed in
//! chunk order, so results are bit-identical for any rayon pool size.

use std::cell::Cell;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::rng::RngKey;

const CHUNK_ROWS: usize = 256;

thread_local! {
    static EVALUATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of network forward evaluations (rows) made on this thread.
pub fn evaluation_count() -> u64 {
    EVALUATIONS.with(|c| c.get())
}

pub fn reset_evaluation_count() {
    EVALUATIONS.with(|c| c.set(0));
}

fn count_evaluations(n: usize) {
    EVALUATIONS.with(|c| c.set(c.get() + n as u64));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    /// Linear hidden layers; only used to build affine test networks.
    Identity,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self {
            input_dim,
            hidden,
            activation: Activation::Tanh,
        }
    }

    /// Four hidden layers of 64 units.
    pub fn standard(input_dim: usize) -> Self {
        Self::new(input_dim, vec![64; 4])
    }

    /// `[input, hidden..., 1]`
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        Ok(())
    }
}

/// Trainable PDE coefficient stored in the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PdeParam {
    Alpha,
    Gamma,
    Diffusion,
    /// Velocity component (zero-based).
    Velocity(usize),
}

impl PdeParam {
    pub fn name(&self) -> String {
        match self {
            PdeParam::Alpha => "alpha".into(),
            PdeParam::Gamma => "gamma".into(),
            PdeParam::Diffusion => "c".into(),
            PdeParam::Velocity(k) => format!("v{}", k + 1),
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(PdeParam::Alpha),
            "gamma" => Ok(PdeParam::Gamma),
            "c" => Ok(PdeParam::Diffusion),
            v if v.starts_with('v') => v[1..]
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .map(|k| PdeParam::Velocity(k - 1))
                .ok_or_else(|| Error::Config(format!("bad PDE parameter name '{s}'"))),
            _ => Err(Error::Config(format!("bad PDE parameter name '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlots {
    pub weights: usize,
    pub bias: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub spec: NetworkSpec,
    pub layers: Vec<LayerSlots>,
    pub network_len: usize,
    pub pde: Vec<PdeParam>,
}

impl ParamLayout {
    pub fn new(spec: NetworkSpec, pde: Vec<PdeParam>) -> Self {
        let mut layers = Vec::new();
        let mut off = 0;
        for p in spec.widths().windows(2) {
            let (fan_in, fan_out) = (p[0], p[1]);
            layers.push(LayerSlots {
                weights: off,
                bias: off + fan_in * fan_out,
                fan_in,
                fan_out,
            });
            off += fan_in * fan_out + fan_out;
        }
        Self {
            spec,
            layers,
            network_len: off,
            pde,
        }
    }

    pub fn len(&self) -> usize {
        self.network_len + self.pde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pde_slot(&self, p: PdeParam) -> Option<usize> {
        self.pde.iter().position(|&q| q == p).map(|i| self.network_len + i)
    }
}

/// Every trainable scalar: network weights and biases, then PDE parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn zeros(spec: NetworkSpec, pde: Vec<PdeParam>) -> Self {
        let layout = ParamLayout::new(spec, pde);
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    /// Append trainable PDE parameters with their initial values.
    pub fn with_pde(mut self, pde: &[(PdeParam, f64)]) -> Self {
        for &(p, v) in pde {
            assert!(self.layout.pde_slot(p).is_none(), "duplicate PDE parameter");
            self.layout.pde.push(p);
            self.values.push(v);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.layout.spec
    }

    pub fn pde_value(&self, p: PdeParam) -> Option<f64> {
        self.layout.pde_slot(p).map(|s| self.values[s])
    }

    pub fn set_pde(&mut self, p: PdeParam, v: f64) {
        let slot = self.layout.pde_slot(p).expect("PDE parameter not present");
        self.values[slot] = v;
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let s = self.layout.layers[layer];
        ArrayView2::from_shape(
            (s.fan_in, s.fan_out),
            &self.values[s.weights..s.weights + s.fan_in * s.fan_out],
        )
        .expect("layer shape")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let s = self.layout.layers[layer];
        ArrayView1::from(&self.values[s.bias..s.bias + s.fan_out])
    }

    /// Per-layer `(weights, bias)` copies.
    pub fn unpack(&self) -> Vec<(Array2<f64>, Vec<f64>)> {
        (0..self.layout.layers.len())
            .map(|l| (self.weights(l).to_owned(), self.bias(l).to_vec()))
            .collect()
    }

    /// Inverse of [`ParamVector::unpack`]; PDE values are taken in layout order.
    pub fn pack(
        spec: NetworkSpec,
        layers: &[(Array2<f64>, Vec<f64>)],
        pde: &[(PdeParam, f64)],
    ) -> Result<Self> {
        let mut out = Self::zeros(spec, Vec::new());
        if layers.len() != out.layout.layers.len() {
            return Err(Error::Config("layer count mismatch".into()));
        }
        for (slots, (w, b)) in out.layout.layers.clone().iter().zip(layers) {
            if w.dim() != (slots.fan_in, slots.fan_out) || b.len() != slots.fan_out {
                return Err(Error::Config("layer shape mismatch".into()));
            }
            for (k, v) in w.iter().enumerate() {
                out.values[slots.weights + k] = *v;
            }
            out.values[slots.bias..slots.bias + slots.fan_out].copy_from_slice(b);
        }
        Ok(out.with_pde(pde))
    }
}

/// Glorot-uniform weights, zero biases, no PDE parameters.
pub fn init_params(spec: &NetworkSpec, key: &RngKey) -> ParamVector {
    let mut p = ParamVector::zeros(spec.clone(), Vec::new());
    let mut stream = key.stream();
    for slots in p.layout.layers.clone() {
        let limit = (6.0 / (slots.fan_in + slots.fan_out) as f64).sqrt();
        for k in 0..slots.fan_in * slots.fan_out {
            p.values[slots.weights + k] = stream.uniform_in(-limit, limit);
        }
    }
    p
}

#[derive(Debug, Clone)]
struct ChunkCache {
    rows: usize,
    // acts[0] is the input block; acts[l] the output of hidden layer l.
    acts: Vec<Array2<f64>>,
    tans: Vec<Array2<f64>>,
}

/// Forward activations retained for the reverse pass.
#[derive(Debug, Clone, Default)]
pub struct BatchCache {
    chunks: Vec<ChunkCache>,
}

pub struct BatchForward {
    pub outputs: Vec<f64>,
    pub tangents: Option<Vec<f64>>,
    pub cache: BatchCache,
}

pub struct BatchBackward {
    /// Same length as the parameter vector; PDE entries are zero.
    pub params: Vec<f64>,
    /// Row-major `rows × input_dim`.
    pub inputs: Option<Vec<f64>>,
    pub directions: Option<Vec<f64>>,
}

fn forward_chunk(
    params: &ParamVector,
    x: ArrayView2<'_, f64>,
    dirs: Option<ArrayView2<'_, f64>>,
) -> (Vec<f64>, Option<Vec<f64>>, ChunkCache) {
    let nl = params.layout.layers.len();
    let act = params.layout.spec.activation;
    let rows = x.nrows();
    let mut acts = Vec::with_capacity(nl);
    let mut tans = Vec::new();
    let mut a = x.to_owned();
    let mut t = dirs.map(|d| d.to_owned());
    for l in 0..nl {
        let w = params.weights(l);
        let b = params.bias(l);
        let mut z = Array2::from_shape_fn((rows, b.len()), |(_, j)| b[j]);
        general_mat_mul(1.0, &a, &w, 1.0, &mut z);
        let mut zt = t.as_ref().map(|t| t.dot(&w));
        if l + 1 == nl {
            acts.push(a);
            if let Some(t) = t {
                tans.push(t);
            }
            let out = z.column(0).to_vec();
            let tan = zt.map(|v| v.column(0).to_vec());
            return (out, tan, ChunkCache { rows, acts, tans });
        }
        if act == Activation::Tanh {
            crate::act::tanh_in_place(z.as_slice_mut().expect("standard layout"));
            if let Some(zt) = zt.as_mut() {
                zt.zip_mut_with(&z, |d, &h| *d *= 1.0 - h * h);
            }
        }
        acts.push(std::mem::replace(&mut a, z));
        if let Some(zt) = zt {
            if let Some(old) = t.replace(zt) {
                tans.push(old);
            }
        }
    }
    unreachable!("network has at least one layer")
}

/// Evaluate `rows = x.len() / input_dim` inputs, optionally with tangents.
pub fn forward_batch(params: &ParamVector, x: &[f64], dirs: Option<&[f64]>) -> BatchForward {
    let in_dim = params.layout.spec.input_dim;
    assert_eq!(x.len() % in_dim, 0, "input length must be a multiple of input_dim");
    let rows = x.len() / in_dim;
    if let Some(d) = dirs {
        assert_eq!(d.len(), x.len(), "direction block must match inputs");
    }
    count_evaluations(rows);
    let starts: Vec<usize> = (0..rows).step_by(CHUNK_ROWS).collect();
    let results: Vec<_> = starts
        .par_iter()
        .map(|&s| {
            let e = (s + CHUNK_ROWS).min(rows);
            let xv = ArrayView2::from_shape((e - s, in_dim), &x[s * in_dim..e * in_dim]).unwrap();
            let dv = dirs.map(|d| {
                ArrayView2::from_shape((e - s, in_dim), &d[s * in_dim..e * in_dim]).unwrap()
            });
            forward_chunk(params, xv, dv)
        })
        .collect();
    let mut outputs = Vec::with_capacity(rows);
    let mut tangents = dirs.map(|_| Vec::with_capacity(rows));
    let mut chunks = Vec::with_capacity(results.len());
    for (o, t, c) in results {
        outputs.extend(o);
        if let (Some(ts), Some(t)) = (tangents.as_mut(), t) {
            ts.extend(t);
        }
        chunks.push(c);
    }
    BatchForward {
        outputs,
        tangents,
        cache: BatchCache { chunks },
    }
}

struct ChunkBackward {
    grad: Vec<f64>,
    inputs: Option<Array2<f64>>,
    directions: Option<Array2<f64>>,
}

fn backward_chunk(
    params: &ParamVector,
    cache: &ChunkCache,
    out_adj: &[f64],
    tan_adj: Option<&[f64]>,
    want_input: bool,
    want_dir: bool,
) -> ChunkBackward {
    let layout = &params.layout;
    let nl = layout.layers.len();
    let act = layout.spec.activation;
    let n = cache.rows;
    let mut grad = vec![0.0; layout.network_len];
    let mut zbar = Array2::from_shape_vec((n, 1), out_adj.to_vec()).unwrap();
    let mut zdbar = tan_adj.map(|t| Array2::from_shape_vec((n, 1), t.to_vec()).unwrap());
    let mut result = ChunkBackward {
        grad: Vec::new(),
        inputs: None,
        directions: None,
    };
    for l in (0..nl).rev() {
        let slots = layout.layers[l];
        let w = params.weights(l);
        {
            let mut gw = ArrayViewMut2::from_shape(
                (slots.fan_in, slots.fan_out),
                &mut grad[slots.weights..slots.weights + slots.fan_in * slots.fan_out],
            )
            .expect("layer shape");
            general_mat_mul(1.0, &cache.acts[l].t(), &zbar, 1.0, &mut gw);
            if let Some(zd) = zdbar.as_ref() {
                general_mat_mul(1.0, &cache.tans[l].t(), zd, 1.0, &mut gw);
            }
        }
        let gb = zbar.sum_axis(Axis(0));
        for (dst, src) in grad[slots.bias..slots.bias + slots.fan_out].iter_mut().zip(gb.iter()) {
            *dst += src;
        }
        if l == 0 {
            if want_input {
                result.inputs = Some(zbar.dot(&w.t()));
            }
            if want_dir {
                result.directions = zdbar.as_ref().map(|zd| zd.dot(&w.t()));
            }
            break;
        }
        let abar = zbar.dot(&w.t());
        let tbar = zdbar.as_ref().map(|zd| zd.dot(&w.t()));
        match act {
            Activation::Identity => {
                zbar = abar;
                zdbar = tbar;
            }
            Activation::Tanh => {
                let a = &cache.acts[l];
                let mut zb = abar;
                zb.zip_mut_with(a, |g, &h| *g *= 1.0 - h * h);
                if let Some(tb) = tbar.as_ref() {
                    // second-order term from the tangent channel: σ''(z)·ż = -2 a ȧ
                    let ta = &cache.tans[l];
                    ndarray::Zip::from(&mut zb)
                        .and(tb)
                        .and(a)
                        .and(ta)
                        .for_each(|g, &tb, &h, &hd| *g -= 2.0 * tb * h * hd);
                }
                zbar = zb;
                zdbar = tbar.map(|mut tb| {
                    tb.zip_mut_with(a, |g, &h| *g *= 1.0 - h * h);
                    tb
                });
            }
        }
    }
    result.grad = grad;
    result
}

/// Reverse pass for a batch previously produced by [`forward_batch`].
pub fn backward_batch(
    params: &ParamVector,
    cache: &BatchCache,
    out_adj: &[f64],
    tan_adj: Option<&[f64]>,
    want_input: bool,
    want_dir: bool,
) -> BatchBackward {
    let in_dim = params.layout.spec.input_dim;
    let mut offsets = Vec::with_capacity(cache.chunks.len());
    let mut s = 0;
    for c in &cache.chunks {
        offsets.push(s);
        s += c.rows;
    }
    assert_eq!(s, out_adj.len(), "adjoint length must match batch rows");
    let parts: Vec<ChunkBackward> = cache
        .chunks
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(c, &off)| {
            backward_chunk(
                params,
                c,
                &out_adj[off..off + c.rows],
                tan_adj.map(|t| &t[off..off + c.rows]),
                want_input,
                want_dir,
            )
        })
        .collect();
    let mut grad = vec![0.0; params.values.len()];
    let mut inputs = want_input.then(|| Vec::with_capacity(s * in_dim));
    let mut directions = (want_dir && tan_adj.is_some()).then(|| Vec::with_capacity(s * in_dim));
    for p in parts {
        for (g, v) in grad.iter_mut().zip(&p.grad) {
            *g += v;
        }
        if let (Some(dst), Some(src)) = (inputs.as_mut(), p.inputs) {
            dst.extend(src.iter());
        }
        if let (Some(dst), Some(src)) = (directions.as_mut(), p.directions) {
            dst.extend(src.iter());
        }
    }
    BatchBackward {
        params: grad,
        inputs,
        directions,
    }
}

/// Single-point evaluation.
pub fn forward(params: &ParamVector, input: &[f64]) -> f64 {
    assert_eq!(input.len(), params.layout.spec.input_dim, "input dimension mismatch");
    forward_batch(params, input, None).outputs[0]
}

/// `direction · ∇ forward(input)`; `direction` may be shorter than the
/// input (spatial slots only) and is zero-padded.
pub fn directional_derivative(params: &ParamVector, input: &[f64], direction: &[f64]) -> f64 {
    let in_dim = params.layout.spec.input_dim;
    assert_eq!(input.len(), in_dim, "input dimension mismatch");
    assert!(direction.len() <= in_dim, "direction longer than input");
    let mut dir = direction.to_vec();
    dir.resize(in_dim, 0.0);
    forward_batch(params, input, Some(&dir)).tangents.unwrap()[0]
}

const CHECKPOINT_MAGIC: &str = "mcpinn-checkpoint 1";

/// Text checkpoint: a header describing the layout, then one value per line.
pub fn checkpoint_string(params: &ParamVector) -> String {
    let spec = &params.layout.spec;
    let mut s = String::new();
    let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(s, "input_dim {}", spec.input_dim);
    let hidden: Vec<String> = spec.hidden.iter().map(|w| w.to_string()).collect();
    let _ = writeln!(s, "hidden {}", hidden.join(" ").trim());
    let _ = writeln!(s, "activation {}", spec.activation.name());
    let pde: Vec<String> = params.layout.pde.iter().map(|p| p.name()).collect();
    let _ = writeln!(s, "pde {}", pde.join(" ").trim());
    let _ = writeln!(s, "values {}", params.values.len());
    for v in &params.values {
        let _ = writeln!(s, "{}", fmt_f64(*v));
    }
    s
}

pub fn parse_checkpoint(text: &str) -> Result<ParamVector> {
    let bad = |m: &str| Error::Config(format!("checkpoint: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CHECKPOINT_MAGIC) {
        return Err(bad("missing header line"));
    }
    let mut field = |name: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| bad(&format!("missing '{name}' line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(&format!("expected '{name}' line, found '{line}'")));
        }
        Ok(parts.map(str::to_string).collect())
    };
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad integer '{s}'")));
    let input_dim = parse_usize(field("input_dim")?.first().ok_or_else(|| bad("input_dim"))?)?;
    let hidden = field("hidden")?
        .iter()
        .map(|s| parse_usize(s))
        .collect::<Result<Vec<_>>>()?;
    let activation = Activation::from_name(field("activation")?.first().ok_or_else(|| bad("activation"))?)?;
    let pde = field("pde")?
        .iter()
        .map(|s| PdeParam::from_name(s))
        .collect::<Result<Vec<_>>>()?;
    let count = parse_usize(field("values")?.first().ok_or_else(|| bad("values"))?)?;
    let spec = NetworkSpec {
        input_dim,
        hidden,
        activation,
    };
    spec.validate()?;
    let mut p = ParamVector::zeros(spec, pde);
    if p.len() != count {
        return Err(bad(&format!("layout needs {} values, header says {count}", p.len())));
    }
    for (k, slot) in p.values.iter_mut().enumerate() {
        let line = lines.next().ok_or_else(|| bad(&format!("missing value {k}")))?;
        *slot = line
            .trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("bad value on data line {k}: '{line}'")))?;
    }
    Ok(p)
}

pub fn save_checkpoint(params: &ParamVector, path: &Path) -> Result<()> {
    crate::fmt::write_atomic(path, checkpoint_string(params).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamVector> {
    parse_checkpoint(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ParamVector {
        let spec = NetworkSpec::new(3, vec![5, 4]);
        init_params(&spec, &RngKey::new(seed))
    }

    #[test]
    fn layout_length() {
        let spec = NetworkSpec::standard(2);
        let p = init_params(&spec, &RngKey::new(0));
        assert_eq!(p.len(), 2 * 64 + 64 + 3 * (64 * 64 + 64) + 64 + 1);
        let with = p.with_pde(&[(PdeParam::Alpha, 1.7), (PdeParam::Velocity(0), 0.05)]);
        assert_eq!(with.len(), spec.param_count() + 2);
        assert_eq!(with.pde_value(PdeParam::Alpha), Some(1.7));
        assert_eq!(with.pde_value(PdeParam::Velocity(0)), Some(0.05));
        assert_eq!(with.pde_value(PdeParam::Gamma), None);
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let spec = NetworkSpec::standard(2);
        let a = init_params(&spec, &RngKey::new(11));
        let b = init_params(&spec, &RngKey::new(11));
        let c = init_params(&spec, &RngKey::new(12));
        assert_eq!(a, b);
        let weights: Vec<usize> = a
            .layout
            .layers
            .iter()
            .flat_map(|s| s.weights..s.weights + s.fan_in * s.fan_out)
            .collect();
        let differ = weights.iter().filter(|&&k| a.values[k] != c.values[k]).count();
        assert!(differ as f64 >= 0.99 * weights.len() as f64);
        for s in &a.layout.layers {
            let lim = (6.0 / (s.fan_in + s.fan_out) as f64).sqrt();
            for k in s.weights..s.weights + s.fan_in * s.fan_out {
                assert!(a.values[k].abs() <= lim);
            }
            assert!(a.values[s.bias..s.bias + s.fan_out].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let p = small(3).with_pde(&[(PdeParam::Gamma, 0.9)]);
        let q = ParamVector::pack(p.spec().clone(), &p.unpack(), &[(PdeParam::Gamma, 0.9)]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_network_is_zero() {
        let p = ParamVector::zeros(NetworkSpec::standard(4), Vec::new());
        assert_eq!(forward(&p, &[0.3, -0.2, 0.9, 0.1]), 0.0);
        assert_eq!(directional_derivative(&p, &[0.3, -0.2, 0.9, 0.1], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn affine_network() {
        let mut p = ParamVector::zeros(NetworkSpec::new(3, vec![]), Vec::new());
        p.values.copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
        let x = [1.0, 2.0, 3.0];
        assert!((forward(&p, &x) - (0.5 - 2.0 + 6.0 + 0.25)).abs() < 1e-15);
        let v = [0.3, 0.1];
        assert!((directional_derivative(&p, &x, &v) - (0.15 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn weight_perturbation_matches_gradient() {
        let p = small(5);
        let x = [0.2, -0.4, 0.7];
        let fwd = forward_batch(&p, &x, None);
        let back = backward_batch(&p, &fwd.cache, &[1.0], None, false, false);
        let h = 1e-4;
        for k in [0, 7, 20, p.len() - 1] {
            let mut q = p.clone();
            q.values[k] += h;
            let delta = forward(&q, &x) - forward(&p, &x);
            assert!((delta - h * back.params[k]).abs() < 1e-7, "slot {k}");
        }
    }

    #[test]
    fn directional_matches_central_difference() {
        let p = small(8);
        let x = [0.1, 0.5, -0.3];
        let v = [0.6, -0.8, 0.0];
        let h = 1e-5;
        let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = (forward(&p, &plus) - forward(&p, &minus)) / (2.0 * h);
        let dd = directional_derivative(&p, &x, &v);
        assert!(((dd - fd) / fd).abs() < 1e-6, "{dd} vs {fd}");
    }

    #[test]
    fn tangent_is_linear_in_direction() {
        let p = small(9);
        let x = [0.4, 0.1, -0.2];
        let v1 = [0.3, -0.7, 0.2];
        let v2 = [-1.1, 0.4, 0.9];
        let (a, b) = (0.7, -1.3);
        let combo: Vec<f64> = v1.iter().zip(&v2).map(|(p, q)| a * p + b * q).collect();
        let lhs = directional_derivative(&p, &x, &combo);
        let rhs = a * directional_derivative(&p, &x, &v1) + b * directional_derivative(&p, &x, &v2);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn counter_counts_rows_and_backward_adds_none() {
        let p = small(1);
        reset_evaluation_count();
        let x: Vec<f64> = (0..30).map(|k| k as f64 * 0.01).collect();
        let fwd = forward_batch(&p, &x, None);
        assert_eq!(evaluation_count(), 10);
        let _ = backward_batch(&p, &fwd.cache, &[1.0; 10], None, true, false);
        assert_eq!(evaluation_count(), 10);
        forward(&p, &[0.0, 0.0, 0.0]);
        assert_eq!(evaluation_count(), 11);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let p = small(2).with_pde(&[(PdeParam::Alpha, 1.7), (PdeParam::Velocity(2), 0.04)]);
        let text = checkpoint_string(&p);
        assert_eq!(parse_checkpoint(&text).unwrap(), p);
        assert!(parse_checkpoint("garbage").is_err());
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(parse_checkpoint(&truncated).is_err());
    }

    #[test]
    fn chunked_batch_matches_single_rows() {
        let p = small(4);
        let rows = 600;
        let x: Vec<f64> = (0..rows * 3).map(|k| ((k * 37) % 101) as f64 / 101.0 - 0.5).collect();
        let fwd = forward_batch(&p, &x, None);
        for r in [0, 255, 256, 599] {
            assert_eq!(fwd.outputs[r], forward(&p, &x[r * 3..r * 3 + 3]));
        }
    }
}
