use std::collections::BTreeMap;

use auginf_numerics::rng::{stream, tag};
use auginf_numerics::Tensor2;

use super::deepwalk::{deepwalk_embed, DeepWalkConfig, SkipGram};
use crate::error::{config, Result};
use crate::graph::{EgoSample, UndirectedGraph};

/// Column 0: has the node taken the action. Column 1: is it the ego.
pub fn influence_features(s: &EgoSample) -> Tensor2 {
    Tensor2::from_fn(s.n(), 2, |i, c| match c {
        0 => s.influence_state[i] as f64,
        _ => (i == s.ego) as u8 as f64,
    })
}

/// DeepWalk trained once on the network reassembled from every sample's
/// subgraph, matched across samples through external node ids.
#[derive(Clone, Debug)]
pub struct PretrainedWalks {
    index: BTreeMap<u64, usize>,
    model: SkipGram,
}

impl PretrainedWalks {
    /// `None` when the embedding width is zero or some sample carries no
    /// node ids.
    pub fn pretrain(samples: &[EgoSample], dw: &DeepWalkConfig, seed: u64) -> Option<Self> {
        if dw.dim == 0 || samples.is_empty() {
            return None;
        }
        let mut index = BTreeMap::new();
        for s in samples {
            for &id in s.graph.node_ids()? {
                index.insert(id, 0);
            }
        }
        for (k, v) in index.values_mut().enumerate() {
            *v = k;
        }
        let mut edges = Vec::new();
        for s in samples {
            let ids = s.graph.node_ids()?;
            edges.extend(s.graph.edges().into_iter().map(|(i, j)| {
                let (a, b) = (index[&ids[i]], index[&ids[j]]);
                (a.min(b), a.max(b))
            }));
        }
        edges.sort_unstable();
        edges.dedup();
        let g = UndirectedGraph::from_edges(index.len(), &edges).ok()?;
        let mut rng = stream(seed, &[tag("deepwalk-network")]);
        let mut model = SkipGram::init(g.n(), dw.dim, &mut rng);
        model.train(&g, dw, &mut rng);
        Some(Self { index, model })
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    fn rows(&self, s: &EgoSample) -> Option<Vec<usize>> {
        s.graph.node_ids()?.iter().map(|id| self.index.get(id).copied()).collect()
    }
}

/// `[influence ∥ deepwalk]`, the per-node input shared by the autoencoders
/// and the prediction head. `variant` is 0 for an original sample and
/// `k + 1` for its k-th augmentation.
///
/// With pretrained network embeddings an original sample takes its nodes'
/// rows as they are, and an augmented one continues DeepWalk training from
/// those rows on its own (augmented) subgraph. Without them DeepWalk runs
/// from scratch on the sample's subgraph. Either way the stream is keyed by
/// `(seed, sample id, variant)`.
pub fn node_features(
    s: &EgoSample,
    dw: &DeepWalkConfig,
    seed: u64,
    variant: usize,
    pretrained: Option<&PretrainedWalks>,
) -> Result<Tensor2> {
    let influence = influence_features(s);
    if dw.dim == 0 {
        return Ok(influence);
    }
    let mut rng = stream(seed, &[tag("deepwalk"), s.id, variant as u64]);
    let rows = pretrained.filter(|p| p.dim() == dw.dim).and_then(|p| Some((p, p.rows(s)?)));
    let walk = match rows {
        Some((p, rows)) => {
            let mut sg = p.model.subset(&rows);
            if variant > 0 {
                sg.train(&s.graph, dw, &mut rng);
            }
            sg.embeddings()
        }
        None => deepwalk_embed(&s.graph, dw, &mut rng),
    };
    Ok(Tensor2::concat_cols(&[&influence, &walk])?)
}

/// Prediction-head input `[Z ∥ influence ∥ deepwalk]` with recorded widths.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBundle {
    pub matrix: Tensor2,
    pub latent_width: usize,
    pub influence_width: usize,
    pub deepwalk_width: usize,
}

impl FeatureBundle {
    pub fn new(z: &Tensor2, node_features: &Tensor2) -> Result<Self> {
        if z.rows() != node_features.rows() {
            return Err(config(format!("{} embedding rows vs {} feature rows", z.rows(), node_features.rows())));
        }
        if node_features.cols() < 2 {
            return Err(config("node features must start with the two influence columns"));
        }
        Ok(Self {
            matrix: Tensor2::concat_cols(&[z, node_features])?,
            latent_width: z.cols(),
            influence_width: 2,
            deepwalk_width: node_features.cols() - 2,
        })
    }

    pub fn width(&self) -> usize {
        self.latent_width + self.influence_width + self.deepwalk_width
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::UndirectedGraph;

    fn sample(ego: usize, state: Vec<u8>) -> EgoSample {
        EgoSample { id: 0, graph: UndirectedGraph::empty(state.len()), ego, influence_state: state, label: 0 }
    }

    #[test]
    fn influence_columns() {
        let f = influence_features(&sample(1, vec![1, 0, 0]));
        assert_eq!(f, Tensor2::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]));
        let f = influence_features(&sample(2, vec![0, 0, 0, 0]));
        assert!((0..4).all(|i| f.get(i, 0) == 0.0));
        assert_eq!((0..4).filter(|&i| f.get(i, 1) == 1.0).count(), 1);
    }

    #[test]
    fn pretrained_rows_follow_node_ids() {
        let dw = DeepWalkConfig { dim: 3, walks_per_node: 2, walk_length: 5, ..DeepWalkConfig::default() };
        let g = |ids: Vec<u64>| UndirectedGraph::from_edges(2, &[(0, 1)]).unwrap().with_node_ids(ids);
        let a = EgoSample { id: 0, graph: g(vec![7, 9]), ego: 0, influence_state: vec![0, 1], label: 0 };
        let b = EgoSample { id: 1, graph: g(vec![9, 4]), ego: 1, influence_state: vec![1, 0], label: 1 };
        let p = PretrainedWalks::pretrain(&[a.clone(), b.clone()], &dw, 3).unwrap();
        let fa = node_features(&a, &dw, 3, 0, Some(&p)).unwrap();
        let fb = node_features(&b, &dw, 3, 0, Some(&p)).unwrap();
        // node 9 is row 1 of `a` and row 0 of `b`
        assert_eq!(fa.slice_rows(1, 2).slice_cols(2, 5), fb.slice_rows(0, 1).slice_cols(2, 5));
        let aug = node_features(&a, &dw, 3, 1, Some(&p)).unwrap();
        assert_ne!(aug, fa);
    }

    #[test]
    fn no_pretraining_without_node_ids() {
        let dw = DeepWalkConfig::default();
        assert!(PretrainedWalks::pretrain(&[sample(0, vec![0, 0])], &dw, 0).is_none());
    }

    #[test]
    fn bundle_widths() {
        let s = sample(0, vec![0, 1, 0]);
        let dw = DeepWalkConfig { dim: 4, walks_per_node: 1, walk_length: 3, ..DeepWalkConfig::default() };
        let x = node_features(&s, &dw, 1, 0, None).unwrap();
        let b = FeatureBundle::new(&Tensor2::zeros(3, 5), &x).unwrap();
        assert_eq!(b.matrix.shape(), (3, 11));
        assert_eq!(b.width(), 11);
        assert_eq!(b.deepwalk_width, 4);
    }
}
