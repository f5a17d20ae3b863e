//! Graph autoencoders: a deterministic GAE and a variational VGAE, both with a
//! two-layer GCN encoder and an inner-product decoder.

use std::rc::Rc;

use auginf_numerics::tape::sigmoid;
use auginf_numerics::{glorot, AdagradConfig, Bound, Checkpoint, ParamId, ParamStore, StreamRng, Tape, Tensor2, Var};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::fit::{fit, FitConfig, FitReport, Trainable};
use crate::gnn::GraphTensors;

pub const LOGVAR_CLAMP: (f64, f64) = (-10.0, 10.0);

/// How positives are weighted in the reconstruction loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosWeight {
    /// `#off-diagonal zeros / #off-diagonal ones`.
    Balanced,
    Unit,
}

/// Precomputed targets for the reconstruction loss of one graph.
#[derive(Clone, Debug)]
pub struct ReconTarget {
    pub adjacency: Rc<Tensor2>,
    /// Zero on the diagonal, `pos_weight` on edges, one elsewhere.
    pub weights: Rc<Tensor2>,
    pub pos_weight: f64,
    /// Number of off-diagonal pairs.
    pub denom: f64,
}

impl ReconTarget {
    pub fn new(adjacency: Rc<Tensor2>, mode: PosWeight) -> Result<Self> {
        let n = adjacency.rows();
        let pairs = n * n.saturating_sub(1);
        let ones = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && adjacency.get(i, j) != 0.0)
            .count();
        if pairs == 0 {
            return Err(config("reconstruction loss needs at least two nodes"));
        }
        let pos_weight = match mode {
            PosWeight::Unit => 1.0,
            PosWeight::Balanced => {
                if ones == 0 {
                    return Err(config("graph has no edges; positive weight is undefined"));
                }
                (pairs - ones) as f64 / ones as f64
            }
        };
        let weights = Tensor2::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else if adjacency.get(i, j) != 0.0 {
                pos_weight
            } else {
                1.0
            }
        });
        Ok(Self { adjacency, weights: Rc::new(weights), pos_weight, denom: pairs as f64 })
    }
}

/// `sigmoid(Z Zᵀ)`, symmetric by construction.
pub fn inner_product_decode(z: &Tensor2) -> Tensor2 {
    let n = z.rows();
    let mut m = Tensor2::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 = z.row(i).iter().zip(z.row(j).iter()).map(|(a, b)| a * b).sum();
            let p = sigmoid(dot);
            m.set(i, j, p);
            m.set(j, i, p);
        }
    }
    m
}

/// Weighted mean binary cross-entropy between probabilities `m` and the
/// target adjacency over off-diagonal pairs.
pub fn reconstruction_ce(m: &Tensor2, target: &ReconTarget) -> Result<f64> {
    if m.shape() != target.adjacency.shape() {
        return Err(config(format!("decoded shape {:?} vs target {:?}", m.shape(), target.adjacency.shape())));
    }
    let n = m.rows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = m.get(i, j);
            let w = target.weights.get(i, j);
            total += if target.adjacency.get(i, j) != 0.0 { -w * p.ln() } else { -w * (1.0 - p).ln() };
        }
    }
    Ok(total / target.denom)
}

/// Differentiable reconstruction loss from embeddings, via logits `Z Zᵀ`.
pub fn reconstruction_loss<'t>(z: Var<'t>, target: &ReconTarget) -> Result<Var<'t>> {
    let logits = z.matmul(&z.transpose())?;
    Ok(logits.weighted_bce_with_logits(Rc::clone(&target.adjacency), Rc::clone(&target.weights), target.denom)?)
}

/// `½ Σ (σ² + μ² − log σ² − 1) / n` for `n` rows.
pub fn kld<'t>(mu: Var<'t>, logvar: Var<'t>) -> Result<Var<'t>> {
    let n = mu.shape().0.max(1) as f64;
    let inner = logvar.exp().add(&mu.hadamard(&mu)?)?.sub(&logvar)?.offset(-1.0);
    Ok(inner.sum().scale(0.5 / n))
}

pub fn kld_value(mu: &Tensor2, logvar: &Tensor2) -> Result<f64> {
    let tape = Tape::new();
    let v = kld(tape.constant(mu.clone()), tape.constant(logvar.clone()))?;
    Ok(v.value().get(0, 0))
}

/// Autoencoder input for one graph.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub features: Rc<Tensor2>,
    pub graph: GraphTensors,
    /// `None` for graphs too small or too sparse to reconstruct.
    pub target: Option<ReconTarget>,
}

impl GraphInput {
    pub fn new(features: Rc<Tensor2>, graph: GraphTensors) -> Self {
        let target = ReconTarget::new(Rc::clone(&graph.adjacency), PosWeight::Balanced).ok();
        Self { features, graph, target }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub input: usize,
    pub hidden: usize,
    pub latent: usize,
}

/// Deterministic two-layer GCN autoencoder.
#[derive(Clone, Debug)]
pub struct GaeModel {
    pub dims: EncoderDims,
    pub params: ParamStore,
    pub w0: ParamId,
    pub w1: ParamId,
}

impl GaeModel {
    pub fn new<R: Rng + ?Sized>(dims: EncoderDims, rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        let w0 = params.add("w0", glorot(dims.input, dims.hidden, rng));
        let w1 = params.add("w1", glorot(dims.hidden, dims.latent, rng));
        Self { dims, params, w0, w1 }
    }

    /// `Z = Â · ReLU(Â · X · W0) · W1`.
    pub fn encode<'t>(&self, p: &Bound<'t>, x: Var<'t>, a_hat: Var<'t>) -> Result<Var<'t>> {
        two_layer(p.var(self.w0), p.var(self.w1), x, a_hat)
    }

    pub fn embed(&self, x: &Tensor2, graph: &GraphTensors) -> Result<Tensor2> {
        let tape = Tape::new();
        let p = self.params.bind_frozen(&tape);
        let z = self.encode(&p, tape.constant(x.clone()), tape.constant_rc(Rc::clone(&graph.normalized)))?;
        Ok(z.value().as_ref().clone())
    }

    pub fn to_checkpoint(&self, prefix: &str, ck: &mut Checkpoint) {
        ck.push_store(prefix, &self.params);
        ck.meta.insert(format!("{prefix}dims"), dims_str(&self.dims));
    }

    pub fn from_checkpoint(prefix: &str, ck: &Checkpoint) -> Result<Self> {
        let dims = parse_dims(ck.meta_str(&format!("{prefix}dims"))?)?;
        let mut m = Self::new(dims, &mut auginf_numerics::rng::stream(0, &[]));
        ck.fill_store(prefix, &mut m.params)?;
        Ok(m)
    }
}

fn dims_str(d: &EncoderDims) -> String {
    format!("{},{},{}", d.input, d.hidden, d.latent)
}

fn parse_dims(s: &str) -> Result<EncoderDims> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.parse().map_err(|_| config(format!("bad encoder dims {s:?}"))))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [input, hidden, latent] => Ok(EncoderDims { input: *input, hidden: *hidden, latent: *latent }),
        _ => Err(config(format!("bad encoder dims {s:?}"))),
    }
}

fn two_layer<'t>(w0: Var<'t>, w1: Var<'t>, x: Var<'t>, a_hat: Var<'t>) -> Result<Var<'t>> {
    let h = a_hat.matmul(&x.matmul(&w0)?)?.relu();
    Ok(a_hat.matmul(&h.matmul(&w1)?)?)
}

pub struct VgaeOutput<'t> {
    pub z: Var<'t>,
    pub mu: Var<'t>,
    pub logvar: Var<'t>,
}

/// Variational autoencoder; `W0` is shared by the mean and log-variance heads.
#[derive(Clone, Debug)]
pub struct VgaeModel {
    pub dims: EncoderDims,
    pub params: ParamStore,
    pub w0: ParamId,
    pub w1_mu: ParamId,
    /// Produces log σ².
    pub w1_sigma: ParamId,
    pub logvar_clamp: (f64, f64),
}

impl VgaeModel {
    pub fn new<R: Rng + ?Sized>(dims: EncoderDims, rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        let w0 = params.add("w0", glorot(dims.input, dims.hidden, rng));
        let w1_mu = params.add("w1_mu", glorot(dims.hidden, dims.latent, rng));
        let w1_sigma = params.add("w1_sigma", glorot(dims.hidden, dims.latent, rng));
        Self { dims, params, w0, w1_mu, w1_sigma, logvar_clamp: LOGVAR_CLAMP }
    }

    /// A model whose weights are all zero (decodes to 0.5 everywhere).
    pub fn zeros(dims: EncoderDims) -> Self {
        let mut m = Self::new(dims, &mut auginf_numerics::rng::stream(0, &[]));
        for v in m.params.values_mut() {
            *v = Tensor2::zeros(v.rows(), v.cols());
        }
        m
    }

    /// Encodes; with `noise = Some(ε)` returns `Z = μ + exp(½ log σ²) ⊙ ε`,
    /// otherwise `Z = μ`.
    pub fn encode<'t>(
        &self,
        p: &Bound<'t>,
        x: Var<'t>,
        a_hat: Var<'t>,
        noise: Option<Rc<Tensor2>>,
    ) -> Result<VgaeOutput<'t>> {
        if x.shape().1 != self.dims.input {
            return Err(config(format!("VGAE expects {} input features, got {}", self.dims.input, x.shape().1)));
        }
        let h = a_hat.matmul(&x.matmul(&p.var(self.w0))?)?.relu();
        let mu = a_hat.matmul(&h.matmul(&p.var(self.w1_mu))?)?;
        let (lo, hi) = self.logvar_clamp;
        let logvar = a_hat.matmul(&h.matmul(&p.var(self.w1_sigma))?)?.clamp(lo, hi);
        let z = match noise {
            Some(eps) => mu.add(&logvar.scale(0.5).exp().mul_const(eps)?)?,
            None => mu,
        };
        Ok(VgaeOutput { z, mu, logvar })
    }

    /// Sampled encoding in train mode, `Z = μ` otherwise.
    pub fn encode_with_rng<'t, R: Rng + ?Sized>(
        &self,
        p: &Bound<'t>,
        x: Var<'t>,
        a_hat: Var<'t>,
        rng: &mut R,
        train: bool,
    ) -> Result<VgaeOutput<'t>> {
        let noise = train.then(|| Rc::new(sample_noise(x.shape().0, self.dims.latent, rng)));
        self.encode(p, x, a_hat, noise)
    }

    /// Eval-mode embedding `μ`.
    pub fn mean_embedding(&self, x: &Tensor2, graph: &GraphTensors) -> Result<Tensor2> {
        let tape = Tape::new();
        let p = self.params.bind_frozen(&tape);
        let out = self.encode(&p, tape.constant(x.clone()), tape.constant_rc(Rc::clone(&graph.normalized)), None)?;
        Ok(out.mu.value().as_ref().clone())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new()
            .with_meta("kind", "vgae")
            .with_meta("d", self.dims.latent)
            .with_meta("h1", self.dims.hidden)
            .with_meta("input", self.dims.input)
            .with_meta("logvar_min", self.logvar_clamp.0)
            .with_meta("logvar_max", self.logvar_clamp.1);
        ck.push_store("", &self.params);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta_str("kind")? != "vgae" {
            return Err(config("checkpoint does not hold a VGAE"));
        }
        let dims =
            EncoderDims { input: ck.meta_parse("input")?, hidden: ck.meta_parse("h1")?, latent: ck.meta_parse("d")? };
        let mut m = Self::zeros(dims);
        m.logvar_clamp = (ck.meta_parse("logvar_min")?, ck.meta_parse("logvar_max")?);
        ck.fill_store("", &mut m.params)?;
        Ok(m)
    }
}

pub fn sample_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor2 {
    Tensor2::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderTrainConfig {
    pub epochs: usize,
    pub optimizer: AdagradConfig,
    pub seed: u64,
}

impl Default for AutoencoderTrainConfig {
    fn default() -> Self {
        Self { epochs: 200, optimizer: AdagradConfig::default(), seed: 0 }
    }
}

impl AutoencoderTrainConfig {
    fn fit_config(&self) -> FitConfig {
        FitConfig { epochs: self.epochs, optimizer: self.optimizer, batch_size: None, seed: self.seed, trace: true }
    }
}

struct VgaeObjective<'m>(&'m mut VgaeModel);

impl Trainable for VgaeObjective<'_> {
    type Item = GraphInput;

    fn stores(&self) -> Vec<&ParamStore> {
        vec![&self.0.params]
    }

    fn stores_mut(&mut self) -> Vec<&mut ParamStore> {
        vec![&mut self.0.params]
    }

    fn loss<'t>(
        &self,
        tape: &'t Tape,
        params: &[Bound<'t>],
        item: &GraphInput,
        rng: &mut StreamRng,
        train: bool,
    ) -> Result<(Var<'t>, Vec<f64>)> {
        let target = item.target.as_ref().ok_or_else(|| config("graph cannot be reconstructed"))?;
        let x = tape.constant_rc(Rc::clone(&item.features));
        let a_hat = tape.constant_rc(Rc::clone(&item.graph.normalized));
        let out = self.0.encode_with_rng(&params[0], x, a_hat, rng, train)?;
        let ce = reconstruction_loss(out.z, target)?;
        let kl = kld(out.mu, out.logvar)?;
        let parts = vec![ce.value().get(0, 0), kl.value().get(0, 0)];
        Ok((ce.add(&kl.scale(kl_weight(item.graph.n())))?, parts))
    }
}

/// Weight of the per-node KL term in the VGAE objective for an `n`-node graph.
///
/// The per-node average is scaled by a further `1/n`, the usual VGAE
/// normalisation: the reconstruction term is a mean over `n²` pairs, so each
/// node touches only about `1/n` of it. At weight 1 the posterior collapses
/// to the prior on graphs of a few dozen nodes and every decoded probability
/// sits near 0.5.
pub fn kl_weight(n: usize) -> f64 {
    1.0 / n.max(1) as f64
}

/// Trains on `CE + kl_weight(n) · KLD`, one full-batch step per epoch. Graphs
/// without a reconstruction target are skipped. Trace parts are the
/// unweighted `[ce, kld]`.
pub fn train_vgae(model: &mut VgaeModel, graphs: &[GraphInput], cfg: &AutoencoderTrainConfig) -> Result<FitReport> {
    let usable: Vec<GraphInput> = graphs.iter().filter(|g| g.target.is_some()).cloned().collect();
    if usable.is_empty() {
        return Err(config("no reconstructable training graphs for the VGAE"));
    }
    fit(&mut VgaeObjective(model), &usable, &cfg.fit_config())
}

struct GaeObjective<'m>(&'m mut GaeModel);

impl Trainable for GaeObjective<'_> {
    type Item = GraphInput;

    fn stores(&self) -> Vec<&ParamStore> {
        vec![&self.0.params]
    }

    fn stores_mut(&mut self) -> Vec<&mut ParamStore> {
        vec![&mut self.0.params]
    }

    fn loss<'t>(
        &self,
        tape: &'t Tape,
        params: &[Bound<'t>],
        item: &GraphInput,
        _rng: &mut StreamRng,
        _train: bool,
    ) -> Result<(Var<'t>, Vec<f64>)> {
        let target = item.target.as_ref().ok_or_else(|| config("graph cannot be reconstructed"))?;
        let x = tape.constant_rc(Rc::clone(&item.features));
        let a_hat = tape.constant_rc(Rc::clone(&item.graph.normalized));
        let z = self.0.encode(&params[0], x, a_hat)?;
        let ce = reconstruction_loss(z, target)?;
        let v = ce.value().get(0, 0);
        Ok((ce, vec![v]))
    }
}

/// Trains the GAE on the reconstruction loss alone.
pub fn train_gae(model: &mut GaeModel, graphs: &[GraphInput], cfg: &AutoencoderTrainConfig) -> Result<FitReport> {
    let usable: Vec<GraphInput> = graphs.iter().filter(|g| g.target.is_some()).cloned().collect();
    if usable.is_empty() {
        return Err(config("no reconstructable training graphs for the GAE"));
    }
    fit(&mut GaeObjective(model), &usable, &cfg.fit_config())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use auginf_numerics::rng::stream;

    #[test]
    fn decode_zero_and_identity() {
        let m = inner_product_decode(&Tensor2::zeros(3, 2));
        assert!(m.as_slice().iter().all(|&v| v == 0.5));
        let m = inner_product_decode(&Tensor2::identity(2));
        assert_relative_eq!(m.get(0, 0), 0.731_058_578_630_005, epsilon = 1e-12);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(0, 0), m.get(1, 1));
    }

    #[test]
    fn unweighted_ce_of_half_is_ln2() {
        let a = Rc::new(Tensor2::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]));
        let t = ReconTarget::new(a, PosWeight::Unit).unwrap();
        let ce = reconstruction_ce(&Tensor2::filled(3, 3, 0.5), &t).unwrap();
        assert_relative_eq!(ce, 2f64.ln(), epsilon = 1e-15);
    }

    // 3 nodes, one edge: 6 ordered off-diagonal pairs, 2 positives with
    // pos_weight 4/2 = 2, 4 negatives with weight 1. With M = 0.5 each term
    // is ln 2, so CE = (2*2 + 4) ln 2 / 6.
    #[test]
    fn weighted_ce_by_hand() {
        let a = Rc::new(Tensor2::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]));
        let t = ReconTarget::new(a, PosWeight::Balanced).unwrap();
        assert_eq!(t.pos_weight, 2.0);
        let ce = reconstruction_ce(&Tensor2::filled(3, 3, 0.5), &t).unwrap();
        assert_relative_eq!(ce, 8.0 * 2f64.ln() / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn saturated_prediction_has_tiny_loss() {
        let adj = Tensor2::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let m = adj.map(|v| if v > 0.5 { 1.0 - 1e-9 } else { 1e-9 });
        let t = ReconTarget::new(Rc::new(adj), PosWeight::Balanced).unwrap();
        assert!(reconstruction_ce(&m, &t).unwrap() <= 2.1e-8);
    }

    #[test]
    fn edgeless_target_is_a_config_error() {
        assert!(ReconTarget::new(Rc::new(Tensor2::zeros(3, 3)), PosWeight::Balanced).is_err());
    }

    #[test]
    fn logits_loss_matches_probability_form() {
        let mut rng = stream(9, &[]);
        let z = Tensor2::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let adj = Tensor2::from_rows(&[
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
        ]);
        let t = ReconTarget::new(Rc::new(adj), PosWeight::Balanced).unwrap();
        let tape = Tape::new();
        let via_logits = reconstruction_loss(tape.constant(z.clone()), &t).unwrap().value().get(0, 0);
        let via_probs = reconstruction_ce(&inner_product_decode(&z), &t).unwrap();
        assert_relative_eq!(via_logits, via_probs, epsilon = 1e-12);
    }

    #[test]
    fn kld_spot_values() {
        assert_eq!(kld_value(&Tensor2::zeros(3, 2), &Tensor2::zeros(3, 2)).unwrap(), 0.0);
        let v = kld_value(&Tensor2::filled(1, 1, 1.0), &Tensor2::zeros(1, 1)).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gae_zero_features_give_zero_embedding() {
        let mut rng = stream(1, &[]);
        let m = GaeModel::new(EncoderDims { input: 3, hidden: 4, latent: 2 }, &mut rng);
        let g = GraphTensors::new(Tensor2::from_rows(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        assert_eq!(m.embed(&Tensor2::zeros(2, 3), &g).unwrap(), Tensor2::zeros(2, 2));
    }

    #[test]
    fn gae_single_node_identity_weights() {
        let mut rng = stream(1, &[]);
        let mut m = GaeModel::new(EncoderDims { input: 1, hidden: 1, latent: 1 }, &mut rng);
        *m.params.get_mut(m.w0) = Tensor2::identity(1);
        *m.params.get_mut(m.w1) = Tensor2::identity(1);
        let g = GraphTensors::new(Tensor2::zeros(1, 1)).unwrap();
        assert_eq!(m.embed(&Tensor2::filled(1, 1, 2.5), &g).unwrap(), Tensor2::filled(1, 1, 2.5));
    }

    #[test]
    fn vgae_checkpoint_round_trip() {
        let mut rng = stream(2, &[]);
        let m = VgaeModel::new(EncoderDims { input: 5, hidden: 4, latent: 3 }, &mut rng);
        let back = VgaeModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        for ((_, a), (_, b)) in m.params.iter().zip(back.params.iter()) {
            assert_eq!(a, b);
        }
        assert_eq!(back.logvar_clamp, LOGVAR_CLAMP);
    }

    #[test]
    fn minimum_logvar_collapses_to_mean() {
        let mut rng = stream(3, &[]);
        let mut m = VgaeModel::new(EncoderDims { input: 2, hidden: 3, latent: 2 }, &mut rng);
        *m.params.get_mut(m.w0) = Tensor2::filled(2, 3, 0.5);
        *m.params.get_mut(m.w1_sigma) = Tensor2::filled(3, 2, -1e6);
        let tape = Tape::new();
        let p = m.params.bind_frozen(&tape);
        let x = tape.constant(Tensor2::filled(2, 2, 1.0));
        let a_hat = tape.constant(Tensor2::identity(2));
        let eps = sample_noise(2, 2, &mut rng);
        let bound = (-5f64).exp() * eps.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let out = m.encode(&p, x, a_hat, Some(Rc::new(eps))).unwrap();
        assert!(out.logvar.value().as_slice().iter().all(|&v| v == -10.0));
        assert!(out.z.value().max_abs_diff(&out.mu.value()) <= bound + 1e-15);
        let no_noise = m.encode(&p, x, a_hat, None).unwrap();
        assert_eq!(*no_noise.z.value(), *no_noise.mu.value());
    }
}
