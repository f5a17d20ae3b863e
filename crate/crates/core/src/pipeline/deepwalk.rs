//! DeepWalk: skip-gram with negative sampling over uniform random walks.

use auginf_numerics::tape::sigmoid;
use auginf_numerics::Tensor2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::UndirectedGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepWalkConfig {
    pub dim: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
}

impl Default for DeepWalkConfig {
    fn default() -> Self {
        Self { dim: 64, walks_per_node: 10, walk_length: 40, window: 5, negatives: 5, learning_rate: 0.025 }
    }
}

/// `walks_per_node` rounds; each round starts one walk at every node, in a
/// shuffled order. Walks stop early at isolated nodes.
pub fn random_walks<R: Rng + ?Sized>(
    neighbours: &[Vec<usize>],
    walks_per_node: usize,
    walk_length: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut starts: Vec<usize> = (0..neighbours.len()).collect();
    let mut walks = Vec::with_capacity(walks_per_node * starts.len());
    for _ in 0..walks_per_node {
        starts.shuffle(rng);
        for &s in &starts {
            let mut walk = Vec::with_capacity(walk_length);
            walk.push(s);
            while walk.len() < walk_length {
                match neighbours[*walk.last().unwrap()].choose(rng) {
                    Some(&next) => walk.push(next),
                    None => break,
                }
            }
            walks.push(walk);
        }
    }
    walks
}

/// (center, context) pairs within `window` positions of each other.
pub fn walk_pairs(walk: &[usize], window: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &center) in walk.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len() - 1);
        for (j, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
            if j != i {
                out.push((center, ctx));
            }
        }
    }
    out
}

/// Skip-gram state: input vectors (the embeddings) and context vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SkipGram {
    pub dim: usize,
    pub input: Vec<f64>,
    pub context: Vec<f64>,
}

impl SkipGram {
    /// Input vectors uniform in `±0.5 / dim`, context vectors zero.
    pub fn init<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Self {
        let input = (0..n * dim).map(|_| (rng.random::<f64>() - 0.5) / dim.max(1) as f64).collect();
        Self { dim, input, context: vec![0.0; n * dim] }
    }

    /// The rows of `self` for `nodes`, in that order.
    pub fn subset(&self, nodes: &[usize]) -> Self {
        let d = self.dim;
        let pick = |v: &[f64]| nodes.iter().flat_map(|&u| v[u * d..(u + 1) * d].iter().copied()).collect();
        Self { dim: d, input: pick(&self.input), context: pick(&self.context) }
    }

    pub fn n(&self) -> usize {
        self.input.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn embeddings(&self) -> Tensor2 {
        Tensor2::from_vec(self.n(), self.dim, self.input.clone()).expect("n*dim values")
    }

    /// One pass of negative-sampling updates over walks on `g`, with the
    /// learning rate decayed linearly to `1e-4` of its start.
    pub fn train<R: Rng + ?Sized>(&mut self, g: &UndirectedGraph, cfg: &DeepWalkConfig, rng: &mut R) {
        let n = g.n();
        let d = self.dim;
        assert_eq!(self.n(), n, "skip-gram rows must match the graph");
        if d == 0 || n == 0 {
            return;
        }
        let walks = random_walks(&g.neighbour_lists(), cfg.walks_per_node, cfg.walk_length, rng);
        let mut freq = vec![0.0f64; n];
        for w in &walks {
            for &v in w {
                freq[v] += 1.0;
            }
        }
        let pairs: Vec<(usize, usize)> = walks.iter().flat_map(|w| walk_pairs(w, cfg.window)).collect();
        if pairs.is_empty() {
            return;
        }
        // unigram^0.75 noise distribution; only nodes seen in walks carry weight
        let noise = WeightedIndex::new(freq.iter().map(|f| f.powf(0.75))).expect("some node was walked");
        let total = pairs.len() as f64;
        let mut grad = vec![0.0; d];
        for (step, &(center, context)) in pairs.iter().enumerate() {
            let lr = (cfg.learning_rate * (1.0 - step as f64 / total)).max(cfg.learning_rate * 1e-4);
            grad.iter_mut().for_each(|g| *g = 0.0);
            for k in 0..=cfg.negatives {
                let (target, label) = if k == 0 {
                    (context, 1.0)
                } else {
                    let t = noise.sample(rng);
                    if t == context {
                        continue;
                    }
                    (t, 0.0)
                };
                let c = &self.input[center * d..(center + 1) * d];
                let o = &mut self.context[target * d..(target + 1) * d];
                let dot: f64 = c.iter().zip(o.iter()).map(|(a, b)| a * b).sum();
                let g = (label - sigmoid(dot)) * lr;
                for ((acc, ov), cv) in grad.iter_mut().zip(o.iter_mut()).zip(c) {
                    *acc += g * *ov;
                    *ov += g * cv;
                }
            }
            for (e, g) in self.input[center * d..(center + 1) * d].iter_mut().zip(&grad) {
                *e += g;
            }
        }
    }
}

/// `n × dim` node embeddings. Nodes that never appear in a training pair keep
/// their initial vectors.
pub fn deepwalk_embed<R: Rng + ?Sized>(g: &UndirectedGraph, cfg: &DeepWalkConfig, rng: &mut R) -> Tensor2 {
    let mut sg = SkipGram::init(g.n(), cfg.dim, rng);
    sg.train(g, cfg, rng);
    sg.embeddings()
}
