//! End-to-end training and evaluation: features, the jointly trained
//! GAE + prediction head, VGAE augmentation of training and test graphs,
//! and the eight-arm ablation.

pub mod deepwalk;
pub mod features;
pub mod metrics;
pub mod rwr;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::rc::Rc;

use auginf_numerics::rng::{stream, tag};
use auginf_numerics::{AdagradConfig, Bound, Checkpoint, ParamStore, StreamRng, Tape, Tensor2, Var};
use log::info;
use serde::{Deserialize, Serialize};

use crate::augment::{added_edges, generate_augmentations, AugmentationConfig};
use crate::autoenc::{
    reconstruction_loss, train_gae, train_vgae, AutoencoderTrainConfig, EncoderDims, GaeModel, GraphInput, PosWeight,
    ReconTarget, VgaeModel,
};
use crate::error::{config, AugInfError, Result};
use crate::fit::{fit, FitConfig, FitReport, Trainable};
use crate::gnn::{ego_nll, ego_probabilities, GraphTensors, HeadConfig, HeadVariant, PredictionNet};
use crate::graph::{Dataset, EgoSample};
use deepwalk::DeepWalkConfig;
use features::{node_features, PretrainedWalks};
use metrics::{binary_metrics, mean_std, BinaryMetrics};

/// Which of the three techniques are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ablation {
    /// Train the GAE together with the head on the summed objective.
    pub joint: bool,
    /// Add VGAE-augmented copies of every training sample.
    pub train_aug: bool,
    /// Average predictions over the test sample and its augmentations.
    pub test_aug: bool,
}

impl Ablation {
    pub const ARMS: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

    /// Arm numbering: 1 none, 2 joint, 3 train-aug, 4 test-aug,
    /// 5 train+test-aug, 6 joint+train-aug, 7 joint+test-aug, 8 all.
    pub fn from_arm(arm: u8) -> Result<Self> {
        let (joint, train_aug, test_aug) = match arm {
            1 => (false, false, false),
            2 => (true, false, false),
            3 => (false, true, false),
            4 => (false, false, true),
            5 => (false, true, true),
            6 => (true, true, false),
            7 => (true, false, true),
            8 => (true, true, true),
            _ => return Err(config(format!("ablation arm {arm} is not in 1..=8"))),
        };
        Ok(Self { joint, train_aug, test_aug })
    }

    pub fn arm(&self) -> u8 {
        Self::ARMS.into_iter().find(|&a| Self::from_arm(a).ok() == Some(*self)).expect("every combination is an arm")
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.joint {
            parts.push("joint");
        }
        if self.train_aug {
            parts.push("train-aug");
        }
        if self.test_aug {
            parts.push("test-aug");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: AdagradConfig,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub head: HeadConfig,
    pub gae_hidden: usize,
    pub latent_dim: usize,
    pub deepwalk: DeepWalkConfig,
    pub aug_threshold: f64,
    pub aug_count: usize,
    /// Epochs for the VGAE and for the stand-alone GAE of non-joint arms.
    pub autoencoder_epochs: usize,
    /// Record the eval-mode objective at every epoch.
    #[serde(default = "default_trace")]
    pub trace: bool,
    pub seed: u64,
}

fn default_trace() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            optimizer: AdagradConfig::default(),
            batch_size: None,
            head: HeadConfig::default(),
            gae_hidden: 64,
            latent_dim: 64,
            deepwalk: DeepWalkConfig::default(),
            aug_threshold: 0.8,
            aug_count: 3,
            autoencoder_epochs: 200,
            trace: true,
            seed: 0,
        }
    }
}

/// Upper bound on augmentations per sample (keeps per-item keys distinct).
pub const MAX_AUG_COUNT: usize = 1000;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(config("epochs must be positive"));
        }
        if self.aug_count > MAX_AUG_COUNT {
            return Err(config(format!("augmentation count {} exceeds {MAX_AUG_COUNT}", self.aug_count)));
        }
        self.augmentation().validate()?;
        if !(self.optimizer.learning_rate >= 0.0 && self.optimizer.weight_decay >= 0.0) {
            return Err(config("learning rate and weight decay must be non-negative"));
        }
        if self.latent_dim == 0 || self.gae_hidden == 0 {
            return Err(config("autoencoder widths must be positive"));
        }
        Ok(())
    }

    /// Augmentation settings; the stream seed is the run seed.
    pub fn augmentation(&self) -> AugmentationConfig {
        AugmentationConfig { threshold: self.aug_threshold, count: self.aug_count, seed: self.seed }
    }

    pub fn input_dim(&self) -> usize {
        2 + self.deepwalk.dim
    }

    pub fn encoder_dims(&self) -> EncoderDims {
        EncoderDims { input: self.input_dim(), hidden: self.gae_hidden, latent: self.latent_dim }
    }

    fn autoencoder(&self) -> AutoencoderTrainConfig {
        AutoencoderTrainConfig { epochs: self.autoencoder_epochs, optimizer: self.optimizer, seed: self.seed }
    }
}

/// A sample (original or augmented) with its model inputs precomputed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub sample: EgoSample,
    /// 0 for the original graph, `k + 1` for augmentation `k`.
    pub variant: usize,
    pub features: Rc<Tensor2>,
    pub graph: GraphTensors,
    pub target: Option<ReconTarget>,
}

impl Prepared {
    pub fn new(sample: EgoSample, variant: usize, cfg: &TrainConfig, walks: Option<&PretrainedWalks>) -> Result<Self> {
        let features = Rc::new(node_features(&sample, &cfg.deepwalk, cfg.seed, variant, walks)?);
        let graph = GraphTensors::new(sample.graph.to_tensor())?;
        let target = ReconTarget::new(Rc::clone(&graph.adjacency), PosWeight::Balanced).ok();
        Ok(Self { sample, variant, features, graph, target })
    }

    /// Stable per-item key for RNG streams.
    pub fn key(&self) -> u64 {
        self.sample.id * (MAX_AUG_COUNT as u64 + 1) + self.variant as u64
    }

    fn graph_input(&self) -> GraphInput {
        GraphInput { features: Rc::clone(&self.features), graph: self.graph.clone(), target: self.target.clone() }
    }
}

/// GAE encoder feeding a GAT/GCN head through `[Z ∥ X]`.
#[derive(Clone, Debug)]
pub struct JointModel {
    pub gae: GaeModel,
    pub head: PredictionNet,
    pub ablation: Ablation,
}

impl JointModel {
    pub fn new(cfg: &TrainConfig, ablation: Ablation) -> Result<Self> {
        let dims = cfg.encoder_dims();
        let gae = GaeModel::new(dims, &mut stream(cfg.seed, &[tag("gae-init")]));
        let head =
            PredictionNet::new(dims.latent + dims.input, cfg.head.clone(), &mut stream(cfg.seed, &[tag("head-init")]))?;
        Ok(Self { gae, head, ablation })
    }

    fn head_input<'t>(&self, gae: &Bound<'t>, tape: &'t Tape, item: &Prepared) -> Result<(Var<'t>, Var<'t>)> {
        let x = tape.constant_rc(Rc::clone(&item.features));
        let a_hat = tape.constant_rc(Rc::clone(&item.graph.normalized));
        let z = self.gae.encode(gae, x, a_hat)?;
        Ok((z, Var::concat_cols(&[z, x])?))
    }

    /// Eval-mode probability that the ego of `item` is influenced.
    pub fn ego_probability(&self, item: &Prepared) -> Result<f64> {
        let tape = Tape::new();
        let (_, h) = self.head_input(&self.gae.params.bind_frozen(&tape), &tape, item)?;
        let mut rng = stream(0, &[]);
        let logits = self.head.forward(&self.head.params.bind_frozen(&tape), h, &item.graph, &mut rng, false)?;
        Ok(ego_probabilities(&logits.value(), item.sample.ego)[1])
    }

    /// Training objective for one item: the ego's negative log-likelihood,
    /// plus the GAE reconstruction loss when the arm trains jointly and the
    /// item's graph has a reconstruction target. Parts are `[nll, recon]`.
    pub fn loss<'t, R: rand::Rng + ?Sized>(
        &self,
        tape: &'t Tape,
        gae: &Bound<'t>,
        head: &Bound<'t>,
        item: &Prepared,
        rng: &mut R,
        train: bool,
    ) -> Result<(Var<'t>, Vec<f64>)> {
        let (z, h) = self.head_input(gae, tape, item)?;
        let logits = self.head.forward(head, h, &item.graph, rng, train)?;
        let nll = ego_nll(logits, item.sample.ego, item.sample.label)?;
        let nll_v = nll.value().get(0, 0);
        match (&item.target, self.ablation.joint) {
            (Some(target), true) => {
                let rec = reconstruction_loss(z, target)?;
                let rec_v = rec.value().get(0, 0);
                Ok((nll.add(&rec)?, vec![nll_v, rec_v]))
            }
            _ => Ok((nll, vec![nll_v, 0.0])),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let h = &self.head.config;
        let mut ck = Checkpoint::new()
            .with_meta("kind", "joint")
            .with_meta("arm", self.ablation.arm())
            .with_meta("head.variant", h.variant)
            .with_meta("head.hidden", h.hidden.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .with_meta("head.heads", h.heads)
            .with_meta("head.output_heads", h.output_heads)
            .with_meta("head.dropout", h.dropout)
            .with_meta("head.in_dim", self.head.in_dim);
        self.gae.to_checkpoint("gae.", &mut ck);
        ck.push_store("head.", &self.head.params);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta_str("kind")? != "joint" {
            return Err(config("checkpoint does not hold a joint model"));
        }
        let gae = GaeModel::from_checkpoint("gae.", ck)?;
        let hidden_s = ck.meta_str("head.hidden")?;
        let hidden = if hidden_s.is_empty() {
            Vec::new()
        } else {
            hidden_s
                .split(',')
                .map(|v| v.parse().map_err(|_| config(format!("bad hidden widths {hidden_s:?}"))))
                .collect::<Result<Vec<usize>>>()?
        };
        let head_cfg = HeadConfig {
            variant: ck.meta_parse::<HeadVariant>("head.variant")?,
            hidden,
            heads: ck.meta_parse("head.heads")?,
            output_heads: ck.meta_parse("head.output_heads")?,
            dropout: ck.meta_parse("head.dropout")?,
        };
        let mut head = PredictionNet::new(ck.meta_parse("head.in_dim")?, head_cfg, &mut stream(0, &[]))?;
        ck.fill_store("head.", &mut head.params)?;
        Ok(Self { gae, head, ablation: Ablation::from_arm(ck.meta_parse("arm")?)? })
    }
}

struct JointObjective<'m>(&'m mut JointModel);

impl Trainable for JointObjective<'_> {
    type Item = Prepared;

    fn stores(&self) -> Vec<&ParamStore> {
        if self.0.ablation.joint {
            vec![&self.0.gae.params, &self.0.head.params]
        } else {
            vec![&self.0.head.params]
        }
    }

    fn stores_mut(&mut self) -> Vec<&mut ParamStore> {
        if self.0.ablation.joint {
            vec![&mut self.0.gae.params, &mut self.0.head.params]
        } else {
            vec![&mut self.0.head.params]
        }
    }

    fn loss<'t>(
        &self,
        tape: &'t Tape,
        params: &[Bound<'t>],
        item: &Prepared,
        rng: &mut StreamRng,
        train: bool,
    ) -> Result<(Var<'t>, Vec<f64>)> {
        let m = &*self.0;
        if m.ablation.joint {
            m.loss(tape, &params[0], &params[1], item, rng, train)
        } else {
            m.loss(tape, &m.gae.params.bind_frozen(tape), &params[0], item, rng, train)
        }
    }

    fn item_key(&self, item: &Prepared, _index: usize) -> u64 {
        item.key()
    }
}

/// Per-seed cache of everything the arms share: prepared originals, the
/// VGAE, the stand-alone GAE and the augmented samples.
pub struct RunContext {
    pub cfg: TrainConfig,
    pub walks: Option<Rc<PretrainedWalks>>,
    pub train: Vec<Prepared>,
    pub test: Vec<Prepared>,
    vgae: Option<VgaeModel>,
    pretrained_gae: Option<GaeModel>,
    train_augs: Option<Vec<Prepared>>,
    test_augs: Option<Vec<Vec<Prepared>>>,
}

impl RunContext {
    pub fn new(dataset: &Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        dataset.validate()?;
        let walks = PretrainedWalks::pretrain(&dataset.samples, &cfg.deepwalk, cfg.seed).map(Rc::new);
        let prep = |list: Vec<&EgoSample>| -> Result<Vec<Prepared>> {
            list.into_iter().map(|s| Prepared::new(s.clone(), 0, &cfg, walks.as_deref())).collect()
        };
        let train = prep(dataset.train())?;
        let test = prep(dataset.test())?;
        if train.is_empty() {
            return Err(AugInfError::Data("training split is empty".into()));
        }
        Ok(Self { cfg, walks, train, test, vgae: None, pretrained_gae: None, train_augs: None, test_augs: None })
    }

    /// Context holding only the test split, for evaluating a saved model.
    pub fn for_test(dataset: &Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        dataset.validate()?;
        let walks = PretrainedWalks::pretrain(&dataset.samples, &cfg.deepwalk, cfg.seed).map(Rc::new);
        let test = dataset
            .test()
            .into_iter()
            .map(|s| Prepared::new(s.clone(), 0, &cfg, walks.as_deref()))
            .collect::<Result<_>>()?;
        Ok(Self {
            cfg,
            walks,
            train: Vec::new(),
            test,
            vgae: None,
            pretrained_gae: None,
            train_augs: None,
            test_augs: None,
        })
    }

    /// Same originals and autoencoders under different augmentation
    /// settings.
    pub fn with_augmentation(&self, threshold: f64, count: usize) -> Result<Self> {
        let cfg = TrainConfig { aug_threshold: threshold, aug_count: count, ..self.cfg.clone() };
        cfg.validate()?;
        Ok(Self {
            cfg,
            walks: self.walks.clone(),
            train: self.train.clone(),
            test: self.test.clone(),
            vgae: self.vgae.clone(),
            pretrained_gae: self.pretrained_gae.clone(),
            train_augs: None,
            test_augs: None,
        })
    }

    /// Uses an externally trained VGAE instead of training one.
    pub fn set_vgae(&mut self, vgae: VgaeModel) -> Result<()> {
        if vgae.dims.input != self.cfg.input_dim() {
            return Err(config(format!(
                "VGAE expects {} input features but the data provides {}",
                vgae.dims.input,
                self.cfg.input_dim()
            )));
        }
        self.vgae = Some(vgae);
        self.train_augs = None;
        self.test_augs = None;
        Ok(())
    }

    /// The VGAE, trained on the original training graphs on first use.
    pub fn vgae(&mut self) -> Result<&VgaeModel> {
        if self.vgae.is_none() {
            info!("training VGAE on {} graphs", self.train.len());
            let mut m = VgaeModel::new(self.cfg.encoder_dims(), &mut stream(self.cfg.seed, &[tag("vgae-init")]));
            let inputs: Vec<GraphInput> = self.train.iter().map(Prepared::graph_input).collect();
            train_vgae(&mut m, &inputs, &self.cfg.autoencoder())?;
            self.vgae = Some(m);
        }
        Ok(self.vgae.as_ref().expect("just set"))
    }

    /// Reconstruction-only GAE used frozen by the non-joint arms.
    pub fn pretrained_gae(&mut self) -> Result<&GaeModel> {
        if self.pretrained_gae.is_none() {
            let mut m = GaeModel::new(self.cfg.encoder_dims(), &mut stream(self.cfg.seed, &[tag("gae-init")]));
            let inputs: Vec<GraphInput> = self.train.iter().map(Prepared::graph_input).collect();
            train_gae(&mut m, &inputs, &self.cfg.autoencoder())?;
            self.pretrained_gae = Some(m);
        }
        Ok(self.pretrained_gae.as_ref().expect("just set"))
    }

    fn augment_all(&mut self, originals: &[Prepared]) -> Result<Vec<Vec<Prepared>>> {
        let aug = self.cfg.augmentation();
        let cfg = self.cfg.clone();
        let walks = self.walks.clone();
        let vgae = self.vgae()?;
        originals
            .iter()
            .map(|p| {
                generate_augmentations(&p.sample, &p.features, vgae, &aug)?
                    .into_iter()
                    .enumerate()
                    .map(|(k, s)| Prepared::new(s, k + 1, &cfg, walks.as_deref()))
                    .collect()
            })
            .collect()
    }

    pub fn train_augmentations(&mut self) -> Result<&[Prepared]> {
        if self.train_augs.is_none() {
            let originals = self.train.clone();
            let augs = self.augment_all(&originals)?.into_iter().flatten().collect();
            self.train_augs = Some(augs);
        }
        Ok(self.train_augs.as_deref().expect("just set"))
    }

    pub fn test_augmentations(&mut self) -> Result<&[Vec<Prepared>]> {
        if self.test_augs.is_none() {
            let originals = self.test.clone();
            self.test_augs = Some(self.augment_all(&originals)?);
        }
        Ok(self.test_augs.as_deref().expect("just set"))
    }

    /// Mean share of edges added by the training augmentations, in percent.
    pub fn added_edge_percent(&mut self) -> Result<f64> {
        let originals: Vec<EgoSample> = self.train.iter().map(|p| p.sample.clone()).collect();
        let augs = self.train_augmentations()?;
        let mut added = 0usize;
        let mut base = 0usize;
        for a in augs {
            let o = originals.iter().find(|s| s.id == a.sample.id).expect("augmentation of a training sample");
            added += added_edges(o, &a.sample).len();
            base += o.graph.edge_count();
        }
        Ok(if base == 0 { 0.0 } else { 100.0 * added as f64 / base as f64 })
    }
}

/// A trained model and its loss trace.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub model: JointModel,
    pub report: FitReport,
}

/// Trains one arm. Non-joint arms train only the head on top of the frozen
/// stand-alone GAE.
pub fn train_joint(ctx: &mut RunContext, ablation: Ablation) -> Result<TrainedRun> {
    let mut model = JointModel::new(&ctx.cfg, ablation)?;
    if !ablation.joint {
        model.gae = ctx.pretrained_gae()?.clone();
    }
    let mut items = ctx.train.clone();
    if ablation.train_aug {
        items.extend_from_slice(ctx.train_augmentations()?);
    }
    train_on(&mut model, &items, &ctx.cfg)
}

/// Trains `model` on `items` (originals and any augmentations).
pub fn train_on(model: &mut JointModel, items: &[Prepared], cfg: &TrainConfig) -> Result<TrainedRun> {
    let fit_cfg = FitConfig {
        epochs: cfg.epochs,
        optimizer: cfg.optimizer,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        trace: cfg.trace,
    };
    info!("training arm {} on {} items for {} epochs", model.ablation.arm(), items.len(), cfg.epochs);
    let report = fit(&mut JointObjective(model), items, &fit_cfg)?;
    Ok(TrainedRun { model: model.clone(), report })
}

/// Arithmetic mean of per-path class-1 probabilities.
pub fn average_probability(paths: &[f64]) -> f64 {
    paths.iter().sum::<f64>() / paths.len() as f64
}

/// Probability averaged over the original and each augmented variant.
pub fn predict(model: &JointModel, original: &Prepared, augmentations: &[Prepared]) -> Result<f64> {
    let paths = std::iter::once(original)
        .chain(augmentations)
        .map(|p| model.ego_probability(p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(average_probability(&paths))
}

/// Test-split scores and metrics for a trained model.
pub fn evaluate_run(ctx: &mut RunContext, model: &JointModel) -> Result<(Vec<f64>, BinaryMetrics)> {
    let test = ctx.test.clone();
    let empty: Vec<Vec<Prepared>> = vec![Vec::new(); test.len()];
    let augs: &[Vec<Prepared>] = if model.ablation.test_aug { ctx.test_augmentations()? } else { &empty };
    let scores = test.iter().zip(augs).map(|(p, a)| predict(model, p, a)).collect::<Result<Vec<f64>>>()?;
    let labels: Vec<u8> = test.iter().map(|p| p.sample.label).collect();
    let m = binary_metrics(&scores, &labels)?;
    Ok((scores, m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub arm: u8,
    pub run_seed: u64,
    pub auc: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: u8,
    pub label: String,
    pub runs: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

/// Per-seed difference to the baseline arm, summarised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    pub arm: u8,
    pub baseline: u8,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub records: Vec<MetricRecord>,
}

impl AblationReport {
    fn arms(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.arm).collect::<BTreeSet<_>>().into_iter().collect()
    }

    fn of_arm(&self, arm: u8) -> Vec<&MetricRecord> {
        self.records.iter().filter(|r| r.arm == arm).collect()
    }

    pub fn summary(&self) -> Vec<ArmSummary> {
        self.arms()
            .into_iter()
            .map(|arm| {
                let rs = self.of_arm(arm);
                let (auc_mean, auc_std) = mean_std(&rs.iter().map(|r| r.auc).collect::<Vec<_>>());
                let (f1_mean, f1_std) = mean_std(&rs.iter().map(|r| r.f1).collect::<Vec<_>>());
                let label = Ablation::from_arm(arm).map(|a| a.label()).unwrap_or_default();
                ArmSummary { arm, label, runs: rs.len(), auc_mean, auc_std, f1_mean, f1_std }
            })
            .collect()
    }

    /// Differences to `baseline` over the seeds both arms share.
    pub fn deltas(&self, baseline: u8) -> Vec<PairedDelta> {
        let base = self.of_arm(baseline);
        if base.is_empty() {
            return Vec::new();
        }
        self.arms()
            .into_iter()
            .filter(|&a| a != baseline)
            .map(|arm| {
                let (mut da, mut df) = (Vec::new(), Vec::new());
                for r in self.of_arm(arm) {
                    if let Some(b) = base.iter().find(|b| b.run_seed == r.run_seed) {
                        da.push(r.auc - b.auc);
                        df.push(r.f1 - b.f1);
                    }
                }
                let (auc_mean, auc_std) = mean_std(&da);
                let (f1_mean, f1_std) = mean_std(&df);
                PairedDelta { arm, baseline, auc_mean, auc_std, f1_mean, f1_std }
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).expect("plain record") + "\n").collect()
    }

    /// Human-readable table of means ± standard deviations and paired deltas.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ =
            writeln!(out, "{:<4} {:<26} {:>4} {:>17} {:>17} {:>10}", "arm", "techniques", "runs", "AUC", "F1", "dAUC");
        let deltas = self.deltas(1);
        for s in self.summary() {
            let d = deltas
                .iter()
                .find(|d| d.arm == s.arm)
                .map(|d| format!("{:+.4}", d.auc_mean))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<4} {:<26} {:>4} {:>8.4} ± {:<6.4} {:>8.4} ± {:<6.4} {:>10}",
                s.arm, s.label, s.runs, s.auc_mean, s.auc_std, s.f1_mean, s.f1_std, d
            );
        }
        out
    }
}

/// Trains and evaluates every requested arm for every seed. Work shared
/// across arms (features, VGAE, stand-alone GAE, augmentations) is done once
/// per seed.
pub fn run_ablation(dataset: &Dataset, cfg: &TrainConfig, arms: &[u8], seeds: &[u64]) -> Result<AblationReport> {
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(config("run seeds must be distinct"));
    }
    if seeds.is_empty() || arms.is_empty() {
        return Err(config("need at least one arm and one seed"));
    }
    let arms = arms.iter().map(|&a| Ablation::from_arm(a)).collect::<Result<Vec<_>>>()?;
    let mut report = AblationReport::default();
    for &seed in seeds {
        let mut ctx = RunContext::new(dataset, TrainConfig { seed, ..cfg.clone() })?;
        for &abl in &arms {
            let run = train_joint(&mut ctx, abl)?;
            let (_, m) = evaluate_run(&mut ctx, &run.model)?;
            info!("seed {seed} arm {}: AUC {:.4} F1 {:.4}", abl.arm(), m.auc, m.f1);
            report.records.push(MetricRecord { arm: abl.arm(), run_seed: seed, auc: m.auc, f1: m.f1 });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub threshold: f64,
    pub count: usize,
    pub run_seed: u64,
    pub auc: f64,
    pub f1: f64,
    pub added_edge_percent: f64,
}

/// Evaluates one arm over `(threshold, count)` grid points. The VGAE and
/// features are shared across points of the same seed.
pub fn sweep(
    dataset: &Dataset,
    cfg: &TrainConfig,
    ablation: Ablation,
    points: &[(f64, usize)],
    seeds: &[u64],
) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    for &seed in seeds {
        let mut base = RunContext::new(dataset, TrainConfig { seed, ..cfg.clone() })?;
        base.vgae()?;
        if !ablation.joint {
            base.pretrained_gae()?;
        }
        for &(threshold, count) in points {
            let mut ctx = base.with_augmentation(threshold, count)?;
            let run = train_joint(&mut ctx, ablation)?;
            let (_, m) = evaluate_run(&mut ctx, &run.model)?;
            let added_edge_percent = ctx.added_edge_percent()?;
            out.push(SweepRecord { threshold, count, run_seed: seed, auc: m.auc, f1: m.f1, added_edge_percent });
        }
    }
    Ok(out)
}
