//! Shared Adagrad training loop over per-item tapes.

use auginf_numerics::rng::{stream, tag};
use auginf_numerics::{AdagradConfig, AdagradState, Bound, ParamStore, StreamRng, Tape, Tensor2, Var};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config, AugInfError, Result};

/// A model whose parameters are trained item by item.
pub trait Trainable {
    type Item;

    fn stores(&self) -> Vec<&ParamStore>;
    fn stores_mut(&mut self) -> Vec<&mut ParamStore>;

    /// Scalar loss for one item plus named components for the trace.
    /// `train == false` must be deterministic.
    fn loss<'t>(
        &self,
        tape: &'t Tape,
        params: &[Bound<'t>],
        item: &Self::Item,
        rng: &mut StreamRng,
        train: bool,
    ) -> Result<(Var<'t>, Vec<f64>)>;

    /// Stable key for an item's RNG streams; defaults to its position.
    fn item_key(&self, _item: &Self::Item, index: usize) -> u64 {
        index as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub optimizer: AdagradConfig,
    /// `None` means one full-batch step per epoch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Evaluate the deterministic objective at the start of every epoch.
    pub trace: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub parts: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Objective at the start of each epoch (eval mode).
    pub trace: Vec<EpochRecord>,
    /// Objective after the last update.
    pub last: Option<EpochRecord>,
}

impl FitReport {
    pub fn losses(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.loss).collect()
    }
}

/// Mean eval-mode loss (and components) over `items`.
pub fn evaluate<M: Trainable>(model: &M, items: &[M::Item], epoch: usize) -> Result<EpochRecord> {
    let mut total = 0.0;
    let mut parts: Vec<f64> = Vec::new();
    let mut rng = stream(0, &[tag("eval")]);
    for (i, item) in items.iter().enumerate() {
        let tape = Tape::new();
        let bound: Vec<Bound<'_>> = model.stores().iter().map(|s| s.bind_frozen(&tape)).collect();
        let (loss, p) = model.loss(&tape, &bound, item, &mut rng, false)?;
        let v = loss.value().get(0, 0);
        if !v.is_finite() {
            return Err(AugInfError::Divergence(format!(
                "epoch {epoch}, item {}: non-finite loss",
                model.item_key(item, i)
            )));
        }
        total += v;
        if parts.is_empty() {
            parts = vec![0.0; p.len()];
        }
        for (acc, x) in parts.iter_mut().zip(p) {
            *acc += x;
        }
    }
    let n = items.len().max(1) as f64;
    Ok(EpochRecord { epoch, loss: total / n, parts: parts.into_iter().map(|x| x / n).collect() })
}

pub fn fit<M: Trainable>(model: &mut M, items: &[M::Item], cfg: &FitConfig) -> Result<FitReport> {
    if items.is_empty() {
        return Err(config("cannot train on an empty item set"));
    }
    if cfg.batch_size == Some(0) {
        return Err(config("batch size must be positive"));
    }
    let mut optimizers = model
        .stores()
        .iter()
        .map(|s| AdagradState::for_store(cfg.optimizer, s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut report = FitReport::default();
    let batch = cfg.batch_size.unwrap_or(items.len()).min(items.len());

    for epoch in 0..cfg.epochs {
        if cfg.trace {
            report.trace.push(evaluate(model, items, epoch)?);
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        if cfg.batch_size.is_some() {
            order.shuffle(&mut stream(cfg.seed, &[tag("shuffle"), epoch as u64]));
        }
        for chunk in order.chunks(batch) {
            let mut acc: Vec<Vec<Tensor2>> = model
                .stores()
                .iter()
                .map(|s| s.iter().map(|(_, t)| Tensor2::zeros(t.rows(), t.cols())).collect())
                .collect();
            for &i in chunk {
                let key = model.item_key(&items[i], i);
                let mut rng = stream(cfg.seed, &[tag("train"), epoch as u64, key]);
                let tape = Tape::new();
                let bound: Vec<Bound<'_>> = model.stores().iter().map(|s| s.bind(&tape)).collect();
                let (loss, _) = model.loss(&tape, &bound, &items[i], &mut rng, true)?;
                if !loss.value().get(0, 0).is_finite() {
                    return Err(AugInfError::Divergence(format!("epoch {epoch}, item {key}: non-finite loss")));
                }
                let g = tape.backward(loss)?;
                for (a, b) in acc.iter_mut().zip(&bound) {
                    auginf_numerics::params::accumulate(a, &b.grads(&g))?;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            for ((opt, store), grads) in optimizers.iter_mut().zip(model.stores_mut()).zip(acc) {
                let grads: Vec<Tensor2> = grads.into_iter().map(|g| g.scale(scale)).collect();
                if grads.iter().any(|g| !g.is_finite()) {
                    return Err(AugInfError::Divergence(format!("epoch {epoch}: non-finite gradient")));
                }
                opt.step_store(store, &grads)?;
            }
        }
    }
    if cfg.trace {
        report.last = Some(evaluate(model, items, cfg.epochs)?);
    }
    Ok(report)
}
