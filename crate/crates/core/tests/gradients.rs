//! Finite-difference checks of every layer and loss, through the same
//! parameter stores the models train.

use std::rc::Rc;

use auginf::autoenc::{kld, reconstruction_loss, EncoderDims, GaeModel, PosWeight, ReconTarget, VgaeModel};
use auginf::gnn::{Activation, GatLayer, GcnLayer, GraphTensors, HeadConfig, HeadVariant};
use auginf::graph::{EgoSample, UndirectedGraph};
use auginf::pipeline::deepwalk::DeepWalkConfig;
use auginf::pipeline::{Ablation, JointModel, Prepared, TrainConfig};
use auginf_numerics::rng::stream;
use auginf_numerics::{grad_check, Bound, ParamStore, Result, Tape, Tensor2, Var};
use rand::Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const SEEDS: u64 = 100;

fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
    Tensor2::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random graph on 2..=8 nodes with at least one edge.
fn random_graph(rng: &mut impl Rng) -> UndirectedGraph {
    let n = rng.random_range(2..=8);
    let mut g = UndirectedGraph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.4 {
                g.add_edge(i, j);
            }
        }
    }
    if g.edge_count() == 0 {
        g.add_edge(0, 1);
    }
    g
}

fn weighted_sum<'t>(tape: &'t Tape, out: Var<'t>, seed: u64) -> Result<Var<'t>> {
    let (r, c) = out.shape();
    let w = tape.constant(random(r, c, &mut stream(seed, &[77])));
    Ok(out.hadamard(&w)?.sum())
}

/// Checks `f` with respect to every parameter in `store` and every extra
/// input.
fn check_store<F>(name: &str, seed: u64, store: &ParamStore, inputs: Vec<Tensor2>, f: F)
where
    F: for<'t> Fn(&'t Tape, &Bound<'t>, &[Var<'t>]) -> Result<Var<'t>>,
{
    let k = store.len();
    let mut points: Vec<Tensor2> = store.iter().map(|(_, t)| t.clone()).collect();
    points.extend(inputs);
    let report = grad_check(|t, v| f(t, &Bound::from_vars(v[..k].to_vec()), &v[k..]), &points, STEP, TOL).unwrap();
    assert!(report.passed, "{name}, seed {seed}: {report:?}");
}

pub fn gcn_layer() {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[1]);
        let g = random_graph(&mut rng);
        let (fin, fout) = (rng.random_range(1..5), rng.random_range(1..5));
        let mut store = ParamStore::new();
        let layer = GcnLayer::new(&mut store, "l", fin, fout, Activation::Elu, &mut rng);
        let a_hat = GraphTensors::new(g.to_tensor()).unwrap().normalized;
        let x = random(g.n(), fin, &mut rng);
        check_store("gcn", seed, &store, vec![x], |t, p, v| {
            let out = layer.forward(p, v[0], t.constant_rc(Rc::clone(&a_hat))).map_err(to_numerics)?;
            weighted_sum(t, out, seed)
        });
    }
}

fn check_gat(heads: usize, concat: bool, tag: u64) {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[tag]);
        let g = random_graph(&mut rng);
        let (fin, fh) = (rng.random_range(1..4), rng.random_range(1..4));
        let mut store = ParamStore::new();
        let layer = GatLayer::new(&mut store, "l", fin, fh, heads, concat, Activation::Elu, &mut rng);
        let mask = GraphTensors::new(g.to_tensor()).unwrap().mask;
        let x = random(g.n(), fin, &mut rng);
        check_store("gat", seed, &store, vec![x], |t, p, v| {
            weighted_sum(t, layer.forward(p, v[0], &mask).map_err(to_numerics)?, seed)
        });
    }
}

pub fn gat_single_head() {
    check_gat(1, true, 2);
}

pub fn gat_multi_head_concatenated() {
    check_gat(3, true, 3);
}

pub fn gat_multi_head_averaged() {
    check_gat(3, false, 4);
}

pub fn gae_reconstruction() {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[5]);
        let g = random_graph(&mut rng);
        let dims = EncoderDims { input: rng.random_range(1..4), hidden: rng.random_range(1..4), latent: 2 };
        let gae = GaeModel::new(dims, &mut rng);
        let gt = GraphTensors::new(g.to_tensor()).unwrap();
        let target = ReconTarget::new(Rc::clone(&gt.adjacency), PosWeight::Balanced).unwrap();
        let x = random(g.n(), dims.input, &mut rng);
        check_store("gae", seed, &gae.params, vec![x], |t, p, v| {
            let z = gae.encode(p, v[0], t.constant_rc(Rc::clone(&gt.normalized))).map_err(to_numerics)?;
            reconstruction_loss(z, &target).map_err(to_numerics)
        });
    }
}

pub fn vgae_with_frozen_noise() {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[6]);
        let g = random_graph(&mut rng);
        let dims = EncoderDims { input: rng.random_range(1..4), hidden: rng.random_range(1..4), latent: 2 };
        let vgae = VgaeModel::new(dims, &mut rng);
        let gt = GraphTensors::new(g.to_tensor()).unwrap();
        let target = ReconTarget::new(Rc::clone(&gt.adjacency), PosWeight::Balanced).unwrap();
        let eps = Rc::new(random(g.n(), dims.latent, &mut rng));
        let x = random(g.n(), dims.input, &mut rng);
        check_store("vgae", seed, &vgae.params, vec![x], |t, p, v| {
            let out = vgae
                .encode(p, v[0], t.constant_rc(Rc::clone(&gt.normalized)), Some(Rc::clone(&eps)))
                .map_err(to_numerics)?;
            let ce = reconstruction_loss(out.z, &target).map_err(to_numerics)?;
            ce.add(&kld(out.mu, out.logvar).map_err(to_numerics)?)
        });
    }
}

fn to_numerics(e: auginf::AugInfError) -> auginf_numerics::NumericsError {
    match e {
        auginf::AugInfError::Numerics(n) => n,
        other => auginf_numerics::NumericsError::Config(other.to_string()),
    }
}

fn joint_check(variant: HeadVariant, tag: u64) {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[tag]);
        let g = random_graph(&mut rng);
        let n = g.n();
        let sample = EgoSample {
            id: seed,
            ego: rng.random_range(0..n),
            influence_state: (0..n).map(|_| rng.random_range(0..2)).collect(),
            label: rng.random_range(0..2),
            graph: g,
        };
        let cfg = TrainConfig {
            head: HeadConfig { variant, hidden: vec![4], heads: 2, output_heads: 2, dropout: 0.2 },
            gae_hidden: 3,
            latent_dim: 2,
            deepwalk: DeepWalkConfig { dim: 2, walks_per_node: 2, walk_length: 6, ..DeepWalkConfig::default() },
            seed,
            ..TrainConfig::default()
        };
        let model = JointModel::new(&cfg, Ablation::from_arm(8).unwrap()).unwrap();
        let item = Prepared::new(sample, 0, &cfg, None).unwrap();
        assert!(item.target.is_some());
        let complete = item.sample.graph.edge_count() == n * (n - 1) / 2;
        let kg = model.gae.params.len();
        let mut points: Vec<Tensor2> = model.gae.params.iter().map(|(_, t)| t.clone()).collect();
        points.extend(model.head.params.iter().map(|(_, t)| t.clone()));
        let report = grad_check(
            |t, v| {
                let gae = Bound::from_vars(v[..kg].to_vec());
                let head = Bound::from_vars(v[kg..].to_vec());
                let (loss, parts) =
                    model.loss(t, &gae, &head, &item, &mut stream(0, &[]), false).map_err(to_numerics)?;
                // a complete graph has no non-edges, so its balanced loss is zero
                assert!(complete || parts[1] > 0.0, "reconstruction term missing: {parts:?}");
                Ok(loss)
            },
            &points,
            STEP,
            TOL,
        )
        .unwrap();
        assert!(report.passed, "joint {variant}, seed {seed}: {report:?}");
    }
}

pub fn joint_loss_gat_head() {
    joint_check(HeadVariant::Gat, 7);
}

pub fn joint_loss_gcn_head() {
    joint_check(HeadVariant::Gcn, 8);
}

mod checks {
    #[test]
    fn gcn_layer() {
        super::gcn_layer();
    }

    #[test]
    fn gat_single_head() {
        super::gat_single_head();
    }

    #[test]
    fn gat_multi_head_concatenated() {
        super::gat_multi_head_concatenated();
    }

    #[test]
    fn gat_multi_head_averaged() {
        super::gat_multi_head_averaged();
    }

    #[test]
    fn gae_reconstruction() {
        super::gae_reconstruction();
    }

    #[test]
    fn vgae_with_frozen_noise() {
        super::vgae_with_frozen_noise();
    }

    #[test]
    fn joint_loss_gat_head() {
        super::joint_loss_gat_head();
    }

    #[test]
    fn joint_loss_gcn_head() {
        super::joint_loss_gcn_head();
    }
}
