//! GCN and multi-head GAT layers, the prediction head, and the ego-node loss.

use std::rc::Rc;

use auginf_numerics::{glorot, Bound, ParamId, ParamStore, Tape, Tensor2, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, AugInfError, Result};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const ELU_ALPHA: f64 = 1.0;

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degrees of `A + I`.
pub fn normalized_adjacency(a: &Tensor2) -> Result<Tensor2> {
    let n = a.rows();
    if a.cols() != n {
        return Err(config(format!("adjacency must be square, got {:?}", a.shape())));
    }
    for i in 0..n {
        if a.get(i, i) != 0.0 {
            return Err(AugInfError::Data(format!("adjacency has nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            if a.get(i, j) != a.get(j, i) {
                return Err(AugInfError::Data(format!("adjacency is asymmetric at ({i},{j})")));
            }
        }
    }
    let inv_sqrt: Vec<f64> = a.row_sums().iter().map(|d| 1.0 / (d + 1.0).sqrt()).collect();
    Ok(Tensor2::from_fn(n, n, |i, j| {
        let tilde = if i == j { 1.0 } else { a.get(i, j) };
        tilde * inv_sqrt[i] * inv_sqrt[j]
    }))
}

/// `A + I`, the set each node attends over.
pub fn attention_mask(a: &Tensor2) -> Tensor2 {
    Tensor2::from_fn(a.rows(), a.cols(), |i, j| if i == j || a.get(i, j) != 0.0 { 1.0 } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Elu,
}

impl Activation {
    pub fn apply<'t>(&self, x: Var<'t>) -> Var<'t> {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.relu(),
            Activation::Elu => x.elu(ELU_ALPHA),
        }
    }
}

/// Graph inputs shared by every layer of one forward pass.
#[derive(Clone, Debug)]
pub struct GraphTensors {
    /// 0/1 adjacency.
    pub adjacency: Rc<Tensor2>,
    /// Symmetric-normalized adjacency with self loops.
    pub normalized: Rc<Tensor2>,
    /// Attention support `A + I`.
    pub mask: Rc<Tensor2>,
}

impl GraphTensors {
    pub fn new(adjacency: Tensor2) -> Result<Self> {
        let normalized = normalized_adjacency(&adjacency)?;
        let mask = attention_mask(&adjacency);
        Ok(Self { adjacency: Rc::new(adjacency), normalized: Rc::new(normalized), mask: Rc::new(mask) })
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }
}

#[derive(Clone, Debug)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(format!("{name}.w"), glorot(in_dim, out_dim, rng));
        Self { weight, in_dim, out_dim, activation }
    }

    /// `σ(Â · H · W)`.
    pub fn forward<'t>(&self, p: &Bound<'t>, h: Var<'t>, a_hat: Var<'t>) -> Result<Var<'t>> {
        let hw = h.matmul(&p.var(self.weight))?;
        Ok(self.activation.apply(a_hat.matmul(&hw)?))
    }
}

#[derive(Clone, Debug)]
pub struct GatHead {
    pub weight: ParamId,
    /// `2F'×1`: first half scores the attending node, second half the attended.
    pub attn: ParamId,
}

#[derive(Clone, Debug)]
pub struct GatLayer {
    pub heads: Vec<GatHead>,
    pub in_dim: usize,
    pub head_dim: usize,
    pub slope: f64,
    /// Concatenate heads (hidden layers) or average them (output layer).
    pub concat: bool,
    pub activation: Activation,
}

impl GatLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        head_dim: usize,
        n_heads: usize,
        concat: bool,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let heads = (0..n_heads)
            .map(|k| GatHead {
                weight: store.add(format!("{name}.h{k}.w"), glorot(in_dim, head_dim, rng)),
                attn: store.add(format!("{name}.h{k}.a"), glorot(2 * head_dim, 1, rng)),
            })
            .collect();
        Self { heads, in_dim, head_dim, slope: LEAKY_SLOPE, concat, activation }
    }

    pub fn out_dim(&self) -> usize {
        if self.concat {
            self.heads.len() * self.head_dim
        } else {
            self.head_dim
        }
    }

    fn head_attention<'t>(&self, p: &Bound<'t>, head: &GatHead, wh: Var<'t>, mask: &Tensor2) -> Result<Var<'t>> {
        let a = p.var(head.attn);
        let f = self.head_dim;
        let src = wh.matmul(&a.slice_rows(0, f)?)?;
        let dst = wh.matmul(&a.slice_rows(f, 2 * f)?)?;
        let scores = src.outer_sum(&dst.transpose())?.leaky_relu(self.slope);
        Ok(scores.row_softmax_masked(mask)?)
    }

    /// Per-head `n×n` attention coefficients, zero outside `N(i) ∪ {i}`.
    pub fn attention<'t>(&self, p: &Bound<'t>, h: Var<'t>, mask: &Tensor2) -> Result<Vec<Var<'t>>> {
        self.heads
            .iter()
            .map(|head| {
                let wh = h.matmul(&p.var(head.weight))?;
                self.head_attention(p, head, wh, mask)
            })
            .collect()
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, h: Var<'t>, mask: &Tensor2) -> Result<Var<'t>> {
        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let wh = h.matmul(&p.var(head.weight))?;
            let alpha = self.head_attention(p, head, wh, mask)?;
            outs.push(alpha.matmul(&wh)?);
        }
        let combined = if self.concat {
            Var::concat_cols(&outs)?
        } else {
            let mut acc = outs[0];
            for o in &outs[1..] {
                acc = acc.add(o)?;
            }
            acc.scale(1.0 / outs.len() as f64)
        };
        Ok(self.activation.apply(combined))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadVariant {
    Gat,
    Gcn,
}

impl std::str::FromStr for HeadVariant {
    type Err = AugInfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gat" => Ok(HeadVariant::Gat),
            "gcn" => Ok(HeadVariant::Gcn),
            other => Err(config(format!("unknown model variant {other:?} (expected gat or gcn)"))),
        }
    }
}

impl std::fmt::Display for HeadVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeadVariant::Gat => "gat",
            HeadVariant::Gcn => "gcn",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub variant: HeadVariant,
    /// Widths of the hidden layers.
    pub hidden: Vec<usize>,
    /// Attention heads per hidden GAT layer; each head gets `hidden / heads` units.
    pub heads: usize,
    /// Heads averaged in the output GAT layer.
    pub output_heads: usize,
    pub dropout: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self { variant: HeadVariant::Gat, hidden: vec![128, 128], heads: 8, output_heads: 8, dropout: 0.2 }
    }
}

#[derive(Clone, Debug)]
pub enum HeadLayer {
    Gcn(GcnLayer),
    Gat(GatLayer),
}

/// Stack of GNN layers ending in a 2-unit output per node.
#[derive(Clone, Debug)]
pub struct PredictionNet {
    pub config: HeadConfig,
    pub in_dim: usize,
    pub layers: Vec<HeadLayer>,
    pub params: ParamStore,
}

impl PredictionNet {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, cfg: HeadConfig, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&cfg.dropout) {
            return Err(config_err_dropout(cfg.dropout));
        }
        let mut params = ParamStore::new();
        let mut layers = Vec::new();
        let mut width = in_dim;
        for (l, &h) in cfg.hidden.iter().enumerate() {
            let name = format!("layer{l}");
            let layer = match cfg.variant {
                HeadVariant::Gcn => HeadLayer::Gcn(GcnLayer::new(&mut params, &name, width, h, Activation::Elu, rng)),
                HeadVariant::Gat => {
                    if cfg.heads == 0 || h % cfg.heads != 0 {
                        return Err(config(format!("hidden width {h} is not divisible by {} heads", cfg.heads)));
                    }
                    let per_head = h / cfg.heads;
                    HeadLayer::Gat(GatLayer::new(
                        &mut params,
                        &name,
                        width,
                        per_head,
                        cfg.heads,
                        true,
                        Activation::Elu,
                        rng,
                    ))
                }
            };
            layers.push(layer);
            width = h;
        }
        let name = format!("layer{}", cfg.hidden.len());
        let out = match cfg.variant {
            HeadVariant::Gcn => HeadLayer::Gcn(GcnLayer::new(&mut params, &name, width, 2, Activation::Identity, rng)),
            HeadVariant::Gat => {
                if cfg.output_heads == 0 {
                    return Err(config("output layer needs at least one head"));
                }
                HeadLayer::Gat(GatLayer::new(
                    &mut params,
                    &name,
                    width,
                    2,
                    cfg.output_heads,
                    false,
                    Activation::Identity,
                    rng,
                ))
            }
        };
        layers.push(out);
        Ok(Self { config: cfg, in_dim, layers, params })
    }

    /// Per-node 2-class logits. Dropout is applied to each layer's input.
    pub fn forward<'t, R: Rng + ?Sized>(
        &self,
        p: &Bound<'t>,
        x: Var<'t>,
        graph: &GraphTensors,
        rng: &mut R,
        train: bool,
    ) -> Result<Var<'t>> {
        if x.shape().1 != self.in_dim {
            return Err(config(format!("prediction head expects {} input features, got {}", self.in_dim, x.shape().1)));
        }
        let tape = x.tape();
        let a_hat = tape.constant_rc(Rc::clone(&graph.normalized));
        let mut h = x;
        for layer in &self.layers {
            h = h.dropout(self.config.dropout, rng, train)?;
            h = match layer {
                HeadLayer::Gcn(l) => l.forward(p, h, a_hat)?,
                HeadLayer::Gat(l) => l.forward(p, h, &graph.mask)?,
            };
        }
        Ok(h)
    }
}

fn config_err_dropout(p: f64) -> AugInfError {
    config(format!("dropout probability {p} outside [0, 1)"))
}

/// Negative log-likelihood of `label` under the softmax of the ego's row.
pub fn ego_nll<'t>(logits: Var<'t>, ego: usize, label: u8) -> Result<Var<'t>> {
    let (n, c) = logits.shape();
    if ego >= n {
        return Err(config(format!("ego {ego} out of range for {n} nodes")));
    }
    if label as usize >= c {
        return Err(config(format!("label {label} out of range for {c} classes")));
    }
    let logp = logits.row(ego)?.log_softmax_rows();
    Ok(logp.slice_cols(label as usize, label as usize + 1)?.scale(-1.0))
}

/// Softmax of the ego's logit row.
pub fn ego_probabilities(logits: &Tensor2, ego: usize) -> Vec<f64> {
    let row = logits.slice_rows(ego, ego + 1);
    auginf_numerics::tape::log_softmax_rows(&row).as_slice().iter().map(|v| v.exp()).collect()
}

/// Convenience for evaluating a head without recording gradients.
pub fn predict_logits(net: &PredictionNet, x: &Tensor2, graph: &GraphTensors) -> Result<Tensor2> {
    let tape = Tape::new();
    let p = net.params.bind_frozen(&tape);
    let mut rng = auginf_numerics::rng::stream(0, &[]);
    let out = net.forward(&p, tape.constant(x.clone()), graph, &mut rng, false)?;
    Ok(out.value().as_ref().clone())
}
