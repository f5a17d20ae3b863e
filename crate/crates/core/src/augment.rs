//! Edge-addition augmentation driven by VGAE edge probabilities.
//!
//! Pairs whose decoded probability exceeds a threshold become candidates and
//! each candidate is then added independently with its own probability.
//! Edges are only ever added.

use auginf_numerics::rng::{stream, tag};
use auginf_numerics::Tensor2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autoenc::{inner_product_decode, VgaeModel};
use crate::error::{config, Result};
use crate::gnn::GraphTensors;
use crate::graph::{EgoSample, UndirectedGraph};

/// Symmetric decoded edge probabilities for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProbMatrix {
    pub probs: Tensor2,
    pub sample_id: u64,
    /// Fingerprint of the VGAE parameters that produced `probs`.
    pub source: String,
}

impl EdgeProbMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs.get(i, j)
    }

    pub fn n(&self) -> usize {
        self.probs.rows()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub threshold: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self { threshold: 0.8, count: 3, seed: 0 }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(config(format!("augmentation threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

/// `sigmoid(μ μᵀ)` from the eval-mode VGAE embedding of `sample`.
pub fn edge_probabilities(sample: &EgoSample, features: &Tensor2, vgae: &VgaeModel) -> Result<EdgeProbMatrix> {
    if features.cols() != vgae.dims.input {
        return Err(config(format!(
            "sample {} has {} feature columns but the VGAE checkpoint expects {}",
            sample.id,
            features.cols(),
            vgae.dims.input
        )));
    }
    if features.rows() != sample.n() {
        return Err(config(format!("sample {}: {} feature rows for {} nodes", sample.id, features.rows(), sample.n())));
    }
    let graph = GraphTensors::new(sample.graph.to_tensor())?;
    let mu = vgae.mean_embedding(features, &graph)?;
    Ok(EdgeProbMatrix {
        probs: inner_product_decode(&mu),
        sample_id: sample.id,
        source: format!("{:016x}", vgae.params.fingerprint()),
    })
}

/// Non-edges `(i, j)`, `i < j`, with `M_ij > t`, in lexicographic order.
pub fn candidate_edges(m: &EdgeProbMatrix, graph: &UndirectedGraph, t: f64) -> Vec<(usize, usize)> {
    let n = graph.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !graph.has_edge(i, j) && m.get(i, j) > t {
                out.push((i, j));
            }
        }
    }
    out
}

/// Adds each candidate `(i, j)` independently with probability `M_ij`.
///
/// One uniform is drawn per node pair in lexicographic order whether or not
/// it is a candidate, so for a fixed stream the edges added at a higher
/// threshold are a subset of those added at a lower one.
pub fn sample_augmentation<R: Rng + ?Sized>(
    sample: &EgoSample,
    candidates: &[(usize, usize)],
    m: &EdgeProbMatrix,
    rng: &mut R,
) -> EgoSample {
    let n = sample.n();
    let mut out = sample.clone();
    let mut next = candidates.iter().peekable();
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.random();
            if next.peek() == Some(&&(i, j)) {
                next.next();
                if u < m.get(i, j) {
                    out.graph.add_edge(i, j);
                }
            }
        }
    }
    out
}

/// RNG stream for augmentation `k` of `sample_id`.
pub fn augmentation_stream(seed: u64, sample_id: u64, k: usize) -> auginf_numerics::StreamRng {
    stream(seed, &[tag("augment"), sample_id, k as u64])
}

/// `cfg.count` augmentations from precomputed probabilities.
pub fn augment_with_probs(sample: &EgoSample, m: &EdgeProbMatrix, cfg: &AugmentationConfig) -> Result<Vec<EgoSample>> {
    cfg.validate()?;
    let candidates = candidate_edges(m, &sample.graph, cfg.threshold);
    Ok((0..cfg.count)
        .map(|k| sample_augmentation(sample, &candidates, m, &mut augmentation_stream(cfg.seed, sample.id, k)))
        .collect())
}

pub fn generate_augmentations(
    sample: &EgoSample,
    features: &Tensor2,
    vgae: &VgaeModel,
    cfg: &AugmentationConfig,
) -> Result<Vec<EgoSample>> {
    cfg.validate()?;
    if cfg.count == 0 {
        return Ok(Vec::new());
    }
    let m = edge_probabilities(sample, features, vgae)?;
    augment_with_probs(sample, &m, cfg)
}

/// Edges in `augmented` that are not in `original`.
pub fn added_edges(original: &EgoSample, augmented: &EgoSample) -> Vec<(usize, usize)> {
    augmented.graph.edges().into_iter().filter(|&(i, j)| !original.graph.has_edge(i, j)).collect()
}
