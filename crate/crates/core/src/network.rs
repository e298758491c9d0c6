//! MLPs with one learnable SiLU slope per hidden neuron, and KANs built from
//! B-spline edge activations. Both expose the same forward / backward /
//! flatten surface so the trainer and benchmark treat them uniformly.
//!
//! Flattened parameter layout (also the layout of [`GradientBundle::params`]):
//!
//! * MLP, per hidden layer: `W` row-major (`out x in`), then `b`, then `beta`;
//!   then the output layer's `W` row-major and `b`.
//! * KAN, per layer (the output layer last): edges in row-major order
//!   (output node major, input node minor), each as `w_b, w_s, c_1..c_{G+k}`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activations::{dot, sigmoid, silu, silu_grad, softmax_into, KanEdge};
use crate::bspline::{GridConfig, SplineGrid};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Mlp,
    Kan,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Kan => "kan",
        }
    }
}

impl core::fmt::Display for Arch {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output head: one sigmoid unit, or one softmax unit per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HeadKind {
    Sigmoid,
    Softmax { classes: usize },
}

impl HeadKind {
    /// Sigmoid for two classes, softmax otherwise.
    pub fn for_classes(classes: usize) -> Self {
        if classes == 2 {
            HeadKind::Sigmoid
        } else {
            HeadKind::Softmax { classes }
        }
    }

    pub fn outputs(self) -> usize {
        match self {
            HeadKind::Sigmoid => 1,
            HeadKind::Softmax { classes } => classes,
        }
    }

    pub fn classes(self) -> usize {
        match self {
            HeadKind::Sigmoid => 2,
            HeadKind::Softmax { classes } => classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "kebab-case")]
pub enum ArchSpec {
    Mlp,
    Kan { grid: GridConfig },
}

/// Architecture description; everything needed to build or count a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(flatten)]
    pub arch: ArchSpec,
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub head: HeadKind,
}

impl NetworkSpec {
    pub fn mlp(input_dim: usize, hidden_widths: Vec<usize>, head: HeadKind) -> Self {
        NetworkSpec {
            arch: ArchSpec::Mlp,
            input_dim,
            hidden_widths,
            head,
        }
    }

    pub fn kan(input_dim: usize, hidden_widths: Vec<usize>, grid: GridConfig, head: HeadKind) -> Self {
        NetworkSpec {
            arch: ArchSpec::Kan { grid },
            input_dim,
            hidden_widths,
            head,
        }
    }

    /// `depth` hidden layers of constant `width`.
    pub fn uniform(arch: ArchSpec, input_dim: usize, width: usize, depth: usize, head: HeadKind) -> Self {
        NetworkSpec {
            arch,
            input_dim,
            hidden_widths: vec![width; depth],
            head,
        }
    }

    pub fn arch(&self) -> Arch {
        match self.arch {
            ArchSpec::Mlp => Arch::Mlp,
            ArchSpec::Kan { .. } => Arch::Kan,
        }
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Layer widths from input to output, e.g. `[7, 2, 2, 3]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(self.head.outputs());
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input dimension must be at least 1".into()));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::Config(format!(
                "hidden widths must be positive, got {:?}",
                self.hidden_widths
            )));
        }
        if let HeadKind::Softmax { classes } = self.head {
            if classes < 2 {
                return Err(Error::Config(format!("softmax head needs >= 2 classes, got {classes}")));
            }
        }
        if let ArchSpec::Kan { grid } = self.arch {
            SplineGrid::from_config(grid)?;
        }
        Ok(())
    }

    /// Learnable scalar count.
    ///
    /// MLP: `sum_hidden (n_in n_out + 2 n_out) + (n_L n_out + n_out)`.
    /// KAN: `sum_layers n_in n_out (G + k + 2)`, output layer included.
    pub fn param_count(&self) -> usize {
        let dims = self.layer_dims();
        match self.arch {
            ArchSpec::Mlp => {
                let last = dims.len() - 2;
                dims.windows(2)
                    .enumerate()
                    .map(|(l, w)| {
                        let (n_in, n_out) = (w[0], w[1]);
                        if l == last {
                            n_in * n_out + n_out
                        } else {
                            n_in * n_out + 2 * n_out
                        }
                    })
                    .sum()
            }
            ArchSpec::Kan { grid } => {
                let per_edge = grid.basis_count() + 2;
                dims.windows(2).map(|w| w[0] * w[1] * per_edge).sum()
            }
        }
    }
}

/// Hidden MLP layer: `a_i = SiLU(W_i x + b_i; beta_i)`, one slope per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSiluLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub beta: Vec<f64>,
}

impl DenseSiluLayer {
    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len() + self.beta.len()
    }
}

/// Affine output layer feeding the sigmoid/softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// KAN layer: `out_j = sum_i g_{j,i}(in_i)`; all edges share one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    grid: SplineGrid,
    in_dim: usize,
    out_dim: usize,
    edges: Vec<KanEdge>,
}

impl KanLayer {
    pub fn new(grid: SplineGrid, in_dim: usize, out_dim: usize, edges: Vec<KanEdge>) -> Result<Self> {
        if edges.len() != in_dim * out_dim {
            return Err(Error::shape(
                "KanLayer::new",
                format!("{out_dim}x{in_dim} edges"),
                format!("{} edges", edges.len()),
            ));
        }
        for e in &edges {
            grid.check_coeffs(&e.coeffs)?;
        }
        Ok(KanLayer {
            grid,
            in_dim,
            out_dim,
            edges,
        })
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Edge from input node `i` to output node `j`.
    pub fn edge(&self, j: usize, i: usize) -> &KanEdge {
        &self.edges[j * self.in_dim + i]
    }

    pub fn edge_mut(&mut self, j: usize, i: usize) -> &mut KanEdge {
        &mut self.edges[j * self.in_dim + i]
    }

    pub fn edges(&self) -> &[KanEdge] {
        &self.edges
    }

    pub fn param_count(&self) -> usize {
        self.edges.len() * (2 + self.grid.basis_count())
    }

    /// Single-sample layer output.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::shape(
                "KanLayer::eval",
                format!("{} inputs", self.in_dim),
                format!("{} values", x.len()),
            ));
        }
        (0..self.out_dim)
            .map(|j| {
                x.iter()
                    .enumerate()
                    .map(|(i, &xi)| self.edge(j, i).eval(&self.grid, xi))
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Mlp {
        hidden: Vec<DenseSiluLayer>,
        output: LinearLayer,
    },
    Kan {
        layers: Vec<KanLayer>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    body: Body,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense {
        input: Matrix,
        pre: Matrix,
    },
    Linear {
        input: Matrix,
    },
    Kan {
        input: Matrix,
        // per (sample, input node): basis values and derivatives, SiLU and SiLU'
        basis: Vec<f64>,
        dbasis: Vec<f64>,
        act: Vec<f64>,
        dact: Vec<f64>,
    },
}

/// Intermediate values from a forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    layers: Vec<LayerCache>,
    probs: Matrix,
}

impl ForwardCache {
    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn batch_size(&self) -> usize {
        self.probs.rows()
    }
}

/// Gradients in flattened-parameter order, plus the gradient with respect to the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub params: Vec<f64>,
    pub input: Matrix,
}

impl GradientBundle {
    pub fn is_zero(&self) -> bool {
        self.params.iter().all(|&g| g == 0.0) && self.input.as_slice().iter().all(|&g| g == 0.0)
    }
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

fn glorot_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    let bound = glorot_bound(cols, rows);
    let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

impl Network {
    /// Random initialization.
    ///
    /// MLP: Glorot-uniform weights, zero biases, `beta = 1`.
    /// KAN: `w_b` Glorot-uniform over the layer's fan-in/fan-out, `w_s = 1`,
    /// spline coefficients drawn from `N(0, 0.1^2)`.
    pub fn init(spec: &NetworkSpec, rng: &mut RngStream) -> Result<Network> {
        spec.validate()?;
        let dims = spec.layer_dims();
        let body = match spec.arch {
            ArchSpec::Mlp => {
                let mut hidden = Vec::with_capacity(spec.depth());
                for w in dims[..dims.len() - 1].windows(2) {
                    let (n_in, n_out) = (w[0], w[1]);
                    hidden.push(DenseSiluLayer {
                        weights: glorot_matrix(n_out, n_in, rng),
                        bias: vec![0.0; n_out],
                        beta: vec![1.0; n_out],
                    });
                }
                let (n_in, n_out) = (dims[dims.len() - 2], dims[dims.len() - 1]);
                let output = LinearLayer {
                    weights: glorot_matrix(n_out, n_in, rng),
                    bias: vec![0.0; n_out],
                };
                Body::Mlp { hidden, output }
            }
            ArchSpec::Kan { grid } => {
                let grid = SplineGrid::from_config(grid)?;
                let nb = grid.basis_count();
                let mut layers = Vec::with_capacity(dims.len() - 1);
                for w in dims.windows(2) {
                    let (n_in, n_out) = (w[0], w[1]);
                    let bound = glorot_bound(n_in, n_out);
                    let edges = (0..n_in * n_out)
                        .map(|_| {
                            let base = rng.uniform_range(-bound, bound);
                            let coeffs = (0..nb).map(|_| 0.1 * rng.normal()).collect();
                            KanEdge::new(base, 1.0, coeffs)
                        })
                        .collect();
                    layers.push(KanLayer::new(grid.clone(), n_in, n_out, edges)?);
                }
                Body::Kan { layers }
            }
        };
        Ok(Network {
            spec: spec.clone(),
            body,
        })
    }

    /// Builds an MLP from explicit layers; dimensions must chain.
    pub fn from_mlp_layers(hidden: Vec<DenseSiluLayer>, output: LinearLayer, head: HeadKind) -> Result<Network> {
        let input_dim = hidden.first().map_or(output.weights.cols(), |l| l.weights.cols());
        let mut prev = input_dim;
        for (l, layer) in hidden.iter().enumerate() {
            let n_out = layer.weights.rows();
            if layer.weights.cols() != prev || layer.bias.len() != n_out || layer.beta.len() != n_out {
                return Err(Error::shape(
                    "from_mlp_layers",
                    format!("hidden layer {l} expecting {prev} inputs"),
                    format!(
                        "W {}x{}, b {}, beta {}",
                        n_out,
                        layer.weights.cols(),
                        layer.bias.len(),
                        layer.beta.len()
                    ),
                ));
            }
            prev = n_out;
        }
        if output.weights.cols() != prev
            || output.weights.rows() != head.outputs()
            || output.bias.len() != head.outputs()
        {
            return Err(Error::shape(
                "from_mlp_layers",
                format!("output layer {}x{prev}", head.outputs()),
                format!(
                    "W {}x{}, b {}",
                    output.weights.rows(),
                    output.weights.cols(),
                    output.bias.len()
                ),
            ));
        }
        let spec = NetworkSpec::mlp(input_dim, hidden.iter().map(|l| l.weights.rows()).collect(), head);
        spec.validate()?;
        Ok(Network {
            spec,
            body: Body::Mlp { hidden, output },
        })
    }

    /// Builds a KAN from explicit layers (the last one is the output layer).
    pub fn from_kan_layers(layers: Vec<KanLayer>, head: HeadKind) -> Result<Network> {
        let Some(first) = layers.first() else {
            return Err(Error::Config("a KAN needs at least an output layer".into()));
        };
        let grid = first.grid.config();
        let mut prev = first.in_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.in_dim != prev || layer.grid.config() != grid {
                return Err(Error::shape(
                    "from_kan_layers",
                    format!("layer {l} with {prev} inputs on grid {grid:?}"),
                    format!("{} inputs on grid {:?}", layer.in_dim, layer.grid.config()),
                ));
            }
            prev = layer.out_dim;
        }
        if prev != head.outputs() {
            return Err(Error::shape(
                "from_kan_layers",
                format!("{} head outputs", head.outputs()),
                format!("{prev} outputs"),
            ));
        }
        let hidden_widths = layers[..layers.len() - 1].iter().map(|l| l.out_dim).collect();
        let spec = NetworkSpec::kan(first.in_dim, hidden_widths, grid, head);
        spec.validate()?;
        Ok(Network {
            spec,
            body: Body::Kan { layers },
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn arch(&self) -> Arch {
        self.spec.arch()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn head(&self) -> HeadKind {
        self.spec.head
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    pub fn mlp_layers(&self) -> Option<(&[DenseSiluLayer], &LinearLayer)> {
        match &self.body {
            Body::Mlp { hidden, output } => Some((hidden, output)),
            Body::Kan { .. } => None,
        }
    }

    pub fn kan_layers(&self) -> Option<&[KanLayer]> {
        match &self.body {
            Body::Kan { layers } => Some(layers),
            Body::Mlp { .. } => None,
        }
    }

    /// Parameters in the documented layout.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(|v| out.push(v));
        out
    }

    fn visit_params(&self, mut f: impl FnMut(f64)) {
        match &self.body {
            Body::Mlp { hidden, output } => {
                for layer in hidden {
                    layer.weights.as_slice().iter().for_each(|&v| f(v));
                    layer.bias.iter().for_each(|&v| f(v));
                    layer.beta.iter().for_each(|&v| f(v));
                }
                output.weights.as_slice().iter().for_each(|&v| f(v));
                output.bias.iter().for_each(|&v| f(v));
            }
            Body::Kan { layers } => {
                for layer in layers {
                    for e in &layer.edges {
                        f(e.base_weight);
                        f(e.spline_weight);
                        e.coeffs.iter().for_each(|&v| f(v));
                    }
                }
            }
        }
    }

    /// Overwrites all parameters from a flat vector in the documented layout.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(
                "set_params",
                format!("{} parameters", self.param_count()),
                format!("{} values", params.len()),
            ));
        }
        let mut it = params.iter().copied();
        let mut fill = |dst: &mut [f64]| {
            for d in dst {
                *d = it.next().expect("length checked");
            }
        };
        match &mut self.body {
            Body::Mlp { hidden, output } => {
                for layer in hidden {
                    fill(layer.weights.as_mut_slice());
                    fill(&mut layer.bias);
                    fill(&mut layer.beta);
                }
                fill(output.weights.as_mut_slice());
                fill(&mut output.bias);
            }
            Body::Kan { layers } => {
                for layer in layers {
                    for e in &mut layer.edges {
                        fill(core::slice::from_mut(&mut e.base_weight));
                        fill(core::slice::from_mut(&mut e.spline_weight));
                        fill(&mut e.coeffs);
                    }
                }
            }
        }
        Ok(())
    }

    /// Copy of this network carrying `params` instead.
    pub fn unflatten_params(&self, params: &[f64]) -> Result<Network> {
        let mut net = self.clone();
        net.set_params(params)?;
        Ok(net)
    }

    fn fingerprint(&self) -> u64 {
        // FNV-1a over architecture dims and parameter bits
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for d in self.spec.layer_dims() {
            eat(d as u64);
        }
        eat(self.arch() as u64);
        self.visit_params(|v| eat(v.to_bits()));
        h
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::shape(
                "forward",
                format!("network expecting {} features", self.spec.input_dim),
                format!("batch {}x{}", x.rows(), x.cols()),
            ));
        }
        Ok(())
    }

    /// Batched forward pass returning output probabilities (`n x outputs`)
    /// and the cache needed for [`Network::backward`].
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut caches = Vec::new();
        let logits = match &self.body {
            Body::Mlp { hidden, output } => {
                let mut h = x.clone();
                for layer in hidden {
                    let pre = affine(&h, &layer.weights, &layer.bias);
                    let mut act = pre.clone();
                    for r in 0..act.rows() {
                        for (a, &beta) in act.row_mut(r).iter_mut().zip(&layer.beta) {
                            *a = silu(*a, beta);
                        }
                    }
                    caches.push(LayerCache::Dense { input: h, pre });
                    h = act;
                }
                let logits = affine(&h, &output.weights, &output.bias);
                caches.push(LayerCache::Linear { input: h });
                logits
            }
            Body::Kan { layers } => {
                let mut h = x.clone();
                for layer in layers {
                    let (out, cache) = kan_layer_forward(layer, h);
                    caches.push(cache);
                    h = out;
                }
                h
            }
        };
        let probs = apply_head(self.spec.head, &logits);
        let cache = ForwardCache {
            fingerprint: self.fingerprint(),
            layers: caches,
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    /// Forward pass without keeping a cache.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let logits = match &self.body {
            Body::Mlp { hidden, output } => {
                let mut h = x.clone();
                for layer in hidden {
                    h = affine(&h, &layer.weights, &layer.bias);
                    for r in 0..h.rows() {
                        for (a, &beta) in h.row_mut(r).iter_mut().zip(&layer.beta) {
                            *a = silu(*a, beta);
                        }
                    }
                }
                affine(&h, &output.weights, &output.bias)
            }
            Body::Kan { layers } => {
                let mut h = x.clone();
                for layer in layers {
                    let mut out = Matrix::zeros(h.rows(), layer.out_dim);
                    for r in 0..h.rows() {
                        let row = layer.eval(h.row(r))?;
                        out.row_mut(r).copy_from_slice(&row);
                    }
                    h = out;
                }
                h
            }
        };
        Ok(apply_head(self.spec.head, &logits))
    }

    /// Reverse-mode gradients given the upstream gradient `d_probs` of a
    /// scalar loss with respect to the probabilities from `forward`.
    pub fn backward(&self, cache: &ForwardCache, d_probs: &Matrix) -> Result<GradientBundle> {
        if cache.fingerprint != self.fingerprint() || cache.layers.len() != self.layer_count() {
            return Err(Error::Usage(
                "forward cache does not belong to this network (parameters changed since forward?)".into(),
            ));
        }
        if d_probs.shape() != cache.probs.shape() {
            return Err(Error::shape(
                "backward",
                format!("probs {}x{}", cache.probs.rows(), cache.probs.cols()),
                format!("d_probs {}x{}", d_probs.rows(), d_probs.cols()),
            ));
        }
        let mut grad = vec![0.0; self.param_count()];
        let mut upstream = head_backward(self.spec.head, &cache.probs, d_probs);
        let mut offset = grad.len();
        match &self.body {
            Body::Mlp { hidden, output } => {
                let LayerCache::Linear { input } = cache.layers.last().expect("non-empty") else {
                    return Err(stale());
                };
                let n = output.weights.rows() * output.weights.cols() + output.bias.len();
                offset -= n;
                upstream = affine_backward(&output.weights, input, &upstream, &mut grad[offset..offset + n]);
                for (layer, lc) in hidden.iter().zip(&cache.layers[..hidden.len()]).rev() {
                    let LayerCache::Dense { input, pre } = lc else {
                        return Err(stale());
                    };
                    let n_out = layer.weights.rows();
                    let n = layer.param_count();
                    offset -= n;
                    let g = &mut grad[offset..offset + n];
                    let (g_affine, g_beta) = g.split_at_mut(n - n_out);
                    let mut d_pre = upstream;
                    for r in 0..d_pre.rows() {
                        for (o, d) in d_pre.row_mut(r).iter_mut().enumerate() {
                            let (dz, dbeta) = silu_grad(pre[(r, o)], layer.beta[o]);
                            g_beta[o] += *d * dbeta;
                            *d *= dz;
                        }
                    }
                    upstream = affine_backward(&layer.weights, input, &d_pre, g_affine);
                }
            }
            Body::Kan { layers } => {
                for (layer, lc) in layers.iter().zip(&cache.layers).rev() {
                    let n = layer.param_count();
                    offset -= n;
                    upstream = kan_layer_backward(layer, lc, &upstream, &mut grad[offset..offset + n])?;
                }
            }
        }
        debug_assert_eq!(offset, 0);
        Ok(GradientBundle {
            params: grad,
            input: upstream,
        })
    }

    fn layer_count(&self) -> usize {
        match &self.body {
            Body::Mlp { hidden, .. } => hidden.len() + 1,
            Body::Kan { layers } => layers.len(),
        }
    }
}

fn stale() -> Error {
    Error::Usage("forward cache layout does not match this network".into())
}

/// `x W^T + b` for a batch `x` (n x in).
fn affine(x: &Matrix, w: &Matrix, b: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), w.rows());
    for r in 0..x.rows() {
        let xr = x.row(r);
        for (o, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = dot(w.row(o), xr) + b[o];
        }
    }
    out
}

/// Accumulates `dW` (row-major) then `db` into `g`; returns `d_x`.
fn affine_backward(w: &Matrix, x: &Matrix, d_out: &Matrix, g: &mut [f64]) -> Matrix {
    let (n_out, n_in) = w.shape();
    let (gw, gb) = g.split_at_mut(n_out * n_in);
    let mut d_x = Matrix::zeros(x.rows(), n_in);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let dr = d_out.row(r);
        for (o, &d) in dr.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            for (gwi, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(xr) {
                *gwi += d * xi;
            }
            for (dx, &wi) in d_x.row_mut(r).iter_mut().zip(w.row(o)) {
                *dx += d * wi;
            }
        }
    }
    d_x
}

fn kan_layer_forward(layer: &KanLayer, input: Matrix) -> (Matrix, LayerCache) {
    let n = input.rows();
    let nb = layer.grid.basis_count();
    let cells = n * layer.in_dim;
    let mut basis = vec![0.0; cells * nb];
    let mut dbasis = vec![0.0; cells * nb];
    let mut act = vec![0.0; cells];
    let mut dact = vec![0.0; cells];
    for (c, &x) in input.as_slice().iter().enumerate() {
        layer
            .grid
            .basis_and_derivative_into(x, &mut basis[c * nb..(c + 1) * nb], &mut dbasis[c * nb..(c + 1) * nb]);
        act[c] = silu(x, 1.0);
        dact[c] = silu_grad(x, 1.0).0;
    }
    let mut out = Matrix::zeros(n, layer.out_dim);
    for r in 0..n {
        for j in 0..layer.out_dim {
            let mut s = 0.0;
            for i in 0..layer.in_dim {
                let c = r * layer.in_dim + i;
                let e = layer.edge(j, i);
                s += e.base_weight * act[c] + e.spline_weight * dot(&e.coeffs, &basis[c * nb..(c + 1) * nb]);
            }
            out[(r, j)] = s;
        }
    }
    let cache = LayerCache::Kan {
        input,
        basis,
        dbasis,
        act,
        dact,
    };
    (out, cache)
}

fn kan_layer_backward(layer: &KanLayer, cache: &LayerCache, d_out: &Matrix, g: &mut [f64]) -> Result<Matrix> {
    let LayerCache::Kan {
        input,
        basis,
        dbasis,
        act,
        dact,
    } = cache
    else {
        return Err(stale());
    };
    let nb = layer.grid.basis_count();
    let per_edge = nb + 2;
    let mut d_in = Matrix::zeros(input.rows(), layer.in_dim);
    for r in 0..input.rows() {
        for j in 0..layer.out_dim {
            let d = d_out[(r, j)];
            if d == 0.0 {
                continue;
            }
            for i in 0..layer.in_dim {
                let c = r * layer.in_dim + i;
                let b = &basis[c * nb..(c + 1) * nb];
                let db = &dbasis[c * nb..(c + 1) * nb];
                let e = layer.edge(j, i);
                let ge = &mut g[(j * layer.in_dim + i) * per_edge..][..per_edge];
                ge[0] += d * act[c];
                ge[1] += d * dot(&e.coeffs, b);
                let ds = d * e.spline_weight;
                for (gc, &bv) in ge[2..].iter_mut().zip(b) {
                    *gc += ds * bv;
                }
                d_in[(r, i)] += d * (e.base_weight * dact[c] + e.spline_weight * dot(&e.coeffs, db));
            }
        }
    }
    Ok(d_in)
}

fn apply_head(head: HeadKind, logits: &Matrix) -> Matrix {
    let mut probs = logits.clone();
    match head {
        HeadKind::Sigmoid => probs.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v)),
        HeadKind::Softmax { .. } => {
            for r in 0..logits.rows() {
                softmax_into(logits.row(r), probs.row_mut(r));
            }
        }
    }
    probs
}

/// Chain rule through the head: `d_logits` from `d_probs`.
fn head_backward(head: HeadKind, probs: &Matrix, d_probs: &Matrix) -> Matrix {
    let mut d = Matrix::zeros(probs.rows(), probs.cols());
    match head {
        HeadKind::Sigmoid => {
            for ((o, &p), &dp) in d
                .as_mut_slice()
                .iter_mut()
                .zip(probs.as_slice())
                .zip(d_probs.as_slice())
            {
                *o = dp * p * (1.0 - p);
            }
        }
        HeadKind::Softmax { .. } => {
            for r in 0..probs.rows() {
                let p = probs.row(r);
                let dp = d_probs.row(r);
                let inner = dot(p, dp);
                for (c, o) in d.row_mut(r).iter_mut().enumerate() {
                    *o = p[c] * (dp[c] - inner);
                }
            }
        }
    }
    d
}

/// Predicted class per row: sigmoid probability strictly above 0.5 is class 1;
/// softmax argmax with ties going to the lowest index.
pub fn predicted_classes(head: HeadKind, probs: &Matrix) -> Vec<usize> {
    match head {
        HeadKind::Sigmoid => probs.as_slice().iter().map(|&p| usize::from(p > 0.5)).collect(),
        HeadKind::Softmax { .. } => probs
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect(),
    }
}

pub fn mlp_forward(net: &Network, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    expect_arch(net, Arch::Mlp)?;
    net.forward(x)
}

pub fn kan_forward(net: &Network, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    expect_arch(net, Arch::Kan)?;
    net.forward(x)
}

pub fn backward(net: &Network, cache: &ForwardCache, d_probs: &Matrix) -> Result<GradientBundle> {
    net.backward(cache, d_probs)
}

pub fn param_count(net: &Network) -> usize {
    net.param_count()
}

fn expect_arch(net: &Network, arch: Arch) -> Result<()> {
    if net.arch() != arch {
        return Err(Error::Usage(format!("expected a {arch} network, got {}", net.arch())));
    }
    Ok(())
}

/// Human-readable `7-2-2-3` style layer summary.
pub fn describe(spec: &NetworkSpec) -> String {
    let dims: Vec<String> = spec.layer_dims().iter().map(|d| format!("{d}")).collect();
    format!("{} {}", spec.arch(), dims.join("-"))
}
