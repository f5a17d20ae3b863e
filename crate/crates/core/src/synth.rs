//! Synthetic influence datasets: a random social graph, independent-cascade
//! diffusion over it, and ego samples cut out by random walks with restart.
//!
//! A sample observes the cascade at step `T`: its ego is a node still
//! inactive at `T` with at least one neighbour active by `T`, the influence
//! state marks the nodes activated exactly at `T` (the only ones that can
//! still activate anybody) and the label is whether the ego activates at
//! `T + 1`.

use std::collections::BTreeSet;

use auginf_numerics::rng::{stream, tag};
use log::{info, warn};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, AugInfError, Result};
use crate::graph::{Dataset, DatasetMetadata, EgoSample, Splits, UndirectedGraph};
use crate::pipeline::rwr::rwr_sample_lists;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphModel {
    /// Ring lattice with `k` neighbours per node, each edge rewired with
    /// probability `beta`.
    SmallWorld { k: usize, beta: f64 },
    /// Each new node attaches to `m` existing nodes chosen by degree.
    PreferentialAttachment { m: usize },
}

pub fn generate_graph<R: Rng + ?Sized>(model: GraphModel, n: usize, rng: &mut R) -> Result<UndirectedGraph> {
    match model {
        GraphModel::SmallWorld { k, beta } => {
            if k % 2 != 0 || k == 0 || k >= n {
                return Err(config(format!("small-world degree {k} must be even and in (0, {n})")));
            }
            if !(0.0..=1.0).contains(&beta) {
                return Err(config(format!("rewiring probability {beta} outside [0, 1]")));
            }
            let mut g = UndirectedGraph::empty(n);
            for i in 0..n {
                for j in 1..=k / 2 {
                    g.add_edge(i, (i + j) % n);
                }
            }
            for j in 1..=k / 2 {
                for i in 0..n {
                    let v = (i + j) % n;
                    if rng.random::<f64>() >= beta || !g.has_edge(i, v) {
                        continue;
                    }
                    let free: Vec<usize> = (0..n).filter(|&w| w != i && !g.has_edge(i, w)).collect();
                    if let Some(&w) = free.choose(rng) {
                        remove_edge(&mut g, i, v);
                        g.add_edge(i, w);
                    }
                }
            }
            Ok(g)
        }
        GraphModel::PreferentialAttachment { m } => {
            if m == 0 || m >= n {
                return Err(config(format!("attachment count {m} must be in (0, {n})")));
            }
            let mut g = UndirectedGraph::empty(n);
            // every edge endpoint once: sampling from it is degree-proportional
            let mut endpoints: Vec<usize> = Vec::new();
            for v in m..n {
                let mut targets = BTreeSet::new();
                if v == m {
                    targets.extend(0..m);
                } else {
                    while targets.len() < m {
                        targets.insert(endpoints[rng.random_range(0..endpoints.len())]);
                    }
                }
                for t in targets {
                    g.add_edge(v, t);
                    endpoints.push(v);
                    endpoints.push(t);
                }
            }
            Ok(g)
        }
    }
}

fn remove_edge(g: &mut UndirectedGraph, i: usize, j: usize) {
    let n = g.n();
    let mut dense: Vec<u8> = (0..n * n).map(|k| g.entry(k / n, k % n)).collect();
    dense[i * n + j] = 0;
    dense[j * n + i] = 0;
    *g = UndirectedGraph::from_dense_unchecked(n, dense);
}

/// Independent cascade: every node activated at step `t` gets one chance to
/// activate each inactive neighbour at step `t + 1` with probability `p`.
/// Returns each node's activation step.
pub fn independent_cascade<R: Rng + ?Sized>(
    neighbours: &[Vec<usize>],
    seeds: &[usize],
    p: f64,
    rng: &mut R,
) -> Vec<Option<usize>> {
    let mut time = vec![None; neighbours.len()];
    let mut frontier: Vec<usize> = Vec::new();
    for &s in seeds {
        if time[s].is_none() {
            time[s] = Some(0);
            frontier.push(s);
        }
    }
    let mut t = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &neighbours[u] {
                if time[v].is_none() && rng.random::<f64>() < p {
                    time[v] = Some(t + 1);
                    next.push(v);
                }
            }
        }
        frontier = next;
        t += 1;
    }
    time
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub graph: GraphModel,
    pub nodes: usize,
    pub seeds_per_cascade: usize,
    pub activation_p: f64,
    pub samples: usize,
    pub subgraph_size: usize,
    pub restart_p: f64,
    /// Target share of positive samples; `None` keeps the natural rate.
    pub positive_fraction: Option<f64>,
    /// At most this many samples are taken from one cascade.
    pub per_cascade: usize,
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            graph: GraphModel::PreferentialAttachment { m: 4 },
            nodes: 300,
            seeds_per_cascade: 5,
            activation_p: 0.15,
            samples: 500,
            subgraph_size: 30,
            restart_p: 0.8,
            positive_fraction: Some(0.25),
            per_cascade: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub positives: usize,
    pub negatives: usize,
    pub cascades: usize,
    /// Egos whose walk found fewer than `subgraph_size` nodes.
    pub skipped_small: usize,
}

const MAX_CASCADES_PER_SAMPLE: usize = 200;

pub fn synthesize(cfg: &CascadeConfig) -> Result<(Dataset, SynthReport)> {
    if cfg.samples == 0 || cfg.per_cascade == 0 || cfg.seeds_per_cascade == 0 {
        return Err(config("samples, per-cascade count and seed count must be positive"));
    }
    if cfg.subgraph_size < 2 || cfg.subgraph_size > cfg.nodes {
        return Err(config(format!("subgraph size {} must be in [2, {}]", cfg.subgraph_size, cfg.nodes)));
    }
    if !(0.0..=1.0).contains(&cfg.activation_p) {
        return Err(config(format!("activation probability {} outside [0, 1]", cfg.activation_p)));
    }
    let targets = match cfg.positive_fraction {
        Some(f) if (0.0..=1.0).contains(&f) => {
            let pos = (cfg.samples as f64 * f).round() as usize;
            Some((pos, cfg.samples - pos))
        }
        Some(f) => return Err(config(format!("positive fraction {f} outside [0, 1]"))),
        None => None,
    };

    let base = generate_graph(cfg.graph, cfg.nodes, &mut stream(cfg.seed, &[tag("graph")]))?;
    let neighbours = base.neighbour_lists();
    let mut report = SynthReport::default();
    let mut samples: Vec<EgoSample> = Vec::with_capacity(cfg.samples);

    let full = |r: &SynthReport, label: u8| match targets {
        Some((pos, neg)) => {
            if label == 1 {
                r.positives >= pos
            } else {
                r.negatives >= neg
            }
        }
        None => false,
    };

    while samples.len() < cfg.samples {
        if report.cascades >= MAX_CASCADES_PER_SAMPLE * cfg.samples {
            warn!("stopping after {} cascades with {} of {} samples", report.cascades, samples.len(), cfg.samples);
            break;
        }
        let c = report.cascades as u64;
        report.cascades += 1;
        let mut rng = stream(cfg.seed, &[tag("cascade"), c]);
        let mut all: Vec<usize> = (0..cfg.nodes).collect();
        all.shuffle(&mut rng);
        let time =
            independent_cascade(&neighbours, &all[..cfg.seeds_per_cascade.min(cfg.nodes)], cfg.activation_p, &mut rng);
        let last = time.iter().flatten().copied().max().unwrap_or(0);
        if last == 0 {
            continue;
        }
        // observe at a step after which something still happens
        let t_obs = rng.random_range(0..last);
        let active = |v: usize| time[v].is_some_and(|t| t <= t_obs);
        // only nodes activated at the observation step can still spread
        let frontier = |v: usize| time[v] == Some(t_obs);
        let mut candidates: Vec<usize> =
            (0..cfg.nodes).filter(|&v| !active(v) && neighbours[v].iter().any(|&u| active(u))).collect();
        candidates.shuffle(&mut rng);
        let mut taken = 0;
        for ego in candidates {
            if taken == cfg.per_cascade || samples.len() == cfg.samples {
                break;
            }
            let label = (time[ego] == Some(t_obs + 1)) as u8;
            if full(&report, label) {
                continue;
            }
            let walk = rwr_sample_lists(&base, &neighbours, ego, cfg.subgraph_size, cfg.restart_p, &mut rng)?;
            if walk.truncated {
                report.skipped_small += 1;
                continue;
            }
            samples.push(EgoSample {
                id: samples.len() as u64,
                influence_state: walk.nodes.iter().map(|&v| frontier(v) as u8).collect(),
                graph: walk.graph,
                ego: walk.ego,
                label,
            });
            if label == 1 {
                report.positives += 1;
            } else {
                report.negatives += 1;
            }
            taken += 1;
        }
    }
    if report.positives == 0 || report.negatives == 0 {
        return Err(AugInfError::Data(format!(
            "synthetic dataset has a single class ({} positive, {} negative)",
            report.positives, report.negatives
        )));
    }
    info!(
        "synthesised {} samples ({} positive) from {} cascades; {} undersized walks skipped",
        samples.len(),
        report.positives,
        report.cascades,
        report.skipped_small
    );
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let dataset = Dataset {
        splits: stratified_split(&labels, cfg.seed),
        samples,
        metadata: DatasetMetadata { source: "synthetic-cascade".into(), seed: cfg.seed },
    };
    dataset.validate()?;
    Ok((dataset, report))
}

/// 75 / 12.5 / 12.5 split preserving the label ratio; indices ascending.
pub fn stratified_split(labels: &[u8], seed: u64) -> Splits {
    let mut splits = Splits::default();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut stream(seed, &[tag("split"), class as u64]));
        let n = idx.len();
        let train = (n as f64 * 0.75).round() as usize;
        let valid = ((n as f64 * 0.125).round() as usize).min(n - train);
        splits.train.extend_from_slice(&idx[..train]);
        splits.valid.extend_from_slice(&idx[train..train + valid]);
        splits.test.extend_from_slice(&idx[train + valid..]);
    }
    splits.train.sort_unstable();
    splits.valid.sort_unstable();
    splits.test.sort_unstable();
    splits
}
