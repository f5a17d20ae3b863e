//! Graph and ego-sample data model, validation, and the JSON-lines dataset
//! format.
//!
//! A dataset lives in two files: `<name>.jsonl` with one sample per line
//!
//! ```text
//! {"id":7,"n":4,"edges":[[0,1],[1,3]],"ego":1,"state":[0,0,1,0],"label":1}
//! ```
//!
//! and a sibling `<name>.splits.json` holding `{"train":[..],"valid":[..],"test":[..]}`
//! plus an optional `"metadata"` object.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use auginf_numerics::Tensor2;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{AugInfError, Result};

/// Simple undirected graph on nodes `0..n` stored as a dense 0/1 matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    n: usize,
    adjacency: Vec<u8>,
    node_ids: Option<Vec<u64>>,
}

impl UndirectedGraph {
    pub fn empty(n: usize) -> Self {
        Self { n, adjacency: vec![0; n * n], node_ids: None }
    }

    /// Builds from an undirected edge list; every pair is stored both ways.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(AugInfError::Data(format!("edge ({i},{j}) outside 0..{n}")));
            }
            if i == j {
                return Err(AugInfError::Data(format!("self-loop at {i}")));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    /// Ingests directed arcs by symmetrizing: `i -> j` becomes `{i, j}`.
    /// Self-loops are dropped. Direction is lost.
    pub fn from_directed_edges(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        let mut dropped_loops = 0usize;
        let mut asymmetric = 0usize;
        let arcset: BTreeSet<(usize, usize)> = arcs.iter().copied().collect();
        for &(i, j) in arcs {
            if i >= n || j >= n {
                return Err(AugInfError::Data(format!("arc ({i},{j}) outside 0..{n}")));
            }
            if i == j {
                dropped_loops += 1;
                continue;
            }
            if !arcset.contains(&(j, i)) {
                asymmetric += 1;
            }
            g.add_edge(i, j);
        }
        if dropped_loops > 0 || asymmetric > 0 {
            warn!("symmetrized directed input: {asymmetric} one-way arcs, {dropped_loops} self-loops dropped");
        }
        Ok(g)
    }

    /// Raw constructor used by importers and tests; call [`validate_graph`]
    /// before trusting the result.
    pub fn from_dense_unchecked(n: usize, adjacency: Vec<u8>) -> Self {
        assert_eq!(adjacency.len(), n * n, "adjacency must be n*n");
        Self { n, adjacency, node_ids: None }
    }

    pub fn with_node_ids(mut self, ids: Vec<u64>) -> Self {
        assert_eq!(ids.len(), self.n);
        self.node_ids = Some(ids);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_ids(&self) -> Option<&[u64]> {
        self.node_ids.as_deref()
    }

    pub fn entry(&self, i: usize, j: usize) -> u8 {
        self.adjacency[i * self.n + j]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.entry(i, j) != 0
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.adjacency[i * self.n + j] = 1;
        self.adjacency[j * self.n + i] = 1;
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn neighbour_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|i| self.neighbours(i).collect()).collect()
    }

    /// The adjacency as an fp64 matrix.
    pub fn to_tensor(&self) -> Tensor2 {
        Tensor2::from_fn(self.n, self.n, |i, j| self.entry(i, j) as f64)
    }

    /// Subgraph induced by `nodes`, relabelled to `0..nodes.len()` in the
    /// given order. External ids are carried over when present, otherwise the
    /// original indices become the ids.
    pub fn induced(&self, nodes: &[usize]) -> Self {
        let k = nodes.len();
        let mut g = Self::empty(k);
        for (a, &u) in nodes.iter().enumerate() {
            for (b, &v) in nodes.iter().enumerate().skip(a + 1) {
                if self.has_edge(u, v) {
                    g.add_edge(a, b);
                }
            }
        }
        let ids = match &self.node_ids {
            Some(ids) => nodes.iter().map(|&u| ids[u]).collect(),
            None => nodes.iter().map(|&u| u as u64).collect(),
        };
        g.with_node_ids(ids)
    }
}

/// Invariant violations of a bare graph.
pub fn validate_graph(g: &UndirectedGraph) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..g.n {
        if g.entry(i, i) != 0 {
            out.push(format!("nonzero diagonal at {i}"));
        }
        for j in 0..g.n {
            let v = g.entry(i, j);
            if v > 1 {
                out.push(format!("entry ({i},{j}) = {v} is not 0/1"));
            }
            if j > i && v != g.entry(j, i) {
                out.push(format!("asymmetric entry at ({i},{j})"));
            }
        }
    }
    out
}

/// Row sums of the adjacency.
pub fn degree_vector(g: &UndirectedGraph) -> Vec<usize> {
    (0..g.n).map(|i| (0..g.n).map(|j| g.entry(i, j) as usize).sum()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EgoSample {
    pub id: u64,
    pub graph: UndirectedGraph,
    pub ego: usize,
    /// Whether each node has taken the action at observation time.
    pub influence_state: Vec<u8>,
    /// Whether the ego takes the action next.
    pub label: u8,
}

impl EgoSample {
    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

/// Empty iff every sample invariant holds.
pub fn validate_sample(s: &EgoSample) -> Vec<String> {
    let mut out = validate_graph(&s.graph);
    let n = s.graph.n();
    if s.ego >= n {
        out.push("ego out of range".to_string());
    }
    if s.influence_state.len() != n {
        out.push(format!("state length {} differs from n = {n}", s.influence_state.len()));
    }
    if let Some(i) = s.influence_state.iter().position(|&v| v > 1) {
        out.push(format!("state entry at {i} is not 0/1"));
    }
    if s.label > 1 {
        out.push(format!("label {} is not 0/1", s.label));
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Checks indices are in range and the three lists are pairwise disjoint.
    pub fn check(&self, n_samples: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (name, list) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            for &i in list {
                if i >= n_samples {
                    return Err(AugInfError::Data(format!(
                        "{name} split index {i} out of range ({n_samples} samples)"
                    )));
                }
                if !seen.insert(i) {
                    return Err(AugInfError::Data(format!("sample index {i} appears in more than one split slot")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub source: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub samples: Vec<EgoSample>,
    pub splits: Splits,
    pub metadata: DatasetMetadata,
}

impl Dataset {
    pub fn split(&self, idx: &[usize]) -> Vec<&EgoSample> {
        idx.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn train(&self) -> Vec<&EgoSample> {
        self.split(&self.splits.train)
    }

    pub fn test(&self) -> Vec<&EgoSample> {
        self.split(&self.splits.test)
    }

    /// Every sample valid, one shared node count, splits disjoint.
    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            let v = validate_sample(s);
            if !v.is_empty() {
                return Err(AugInfError::Validation { sample_id: s.id, violations: v });
            }
        }
        if let Some(first) = self.samples.first() {
            if let Some(other) = self.samples.iter().find(|s| s.n() != first.n()) {
                return Err(AugInfError::Validation {
                    sample_id: other.id,
                    violations: vec![format!("n = {} but dataset uses n = {}", other.n(), first.n())],
                });
            }
        }
        self.splits.check(self.samples.len())
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    id: u64,
    n: usize,
    edges: Vec<[usize; 2]>,
    ego: usize,
    state: Vec<u8>,
    label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_ids: Option<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct SplitsFile {
    train: Vec<usize>,
    valid: Vec<usize>,
    test: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<DatasetMetadata>,
}

impl From<&EgoSample> for SampleRecord {
    fn from(s: &EgoSample) -> Self {
        SampleRecord {
            id: s.id,
            n: s.graph.n(),
            edges: s.graph.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            ego: s.ego,
            state: s.influence_state.clone(),
            label: s.label,
            node_ids: s.graph.node_ids.clone(),
        }
    }
}

impl SampleRecord {
    fn into_sample(self) -> Result<EgoSample> {
        let mut violations = Vec::new();
        let mut g = UndirectedGraph::empty(self.n);
        let mut seen = BTreeSet::new();
        for [i, j] in self.edges {
            if i >= self.n || j >= self.n {
                violations.push(format!("edge ({i},{j}) outside 0..{}", self.n));
            } else if i == j {
                violations.push(format!("nonzero diagonal at {i}"));
            } else if i > j {
                violations.push(format!("edge ({i},{j}) is not in canonical i<j form (directed or asymmetric entry)"));
            } else if !seen.insert((i, j)) {
                violations.push(format!("duplicate edge ({i},{j})"));
            } else {
                g.add_edge(i, j);
            }
        }
        if let Some(ids) = &self.node_ids {
            if ids.len() != self.n {
                violations.push(format!("{} node ids for n = {}", ids.len(), self.n));
            }
        }
        if !violations.is_empty() {
            return Err(AugInfError::Validation { sample_id: self.id, violations });
        }
        if let Some(ids) = self.node_ids {
            g = g.with_node_ids(ids);
        }
        let sample = EgoSample { id: self.id, graph: g, ego: self.ego, influence_state: self.state, label: self.label };
        let v = validate_sample(&sample);
        if !v.is_empty() {
            return Err(AugInfError::Validation { sample_id: sample.id, violations: v });
        }
        Ok(sample)
    }
}

/// Canonical one-line JSON for a sample.
pub fn sample_to_json(s: &EgoSample) -> String {
    serde_json::to_string(&SampleRecord::from(s)).expect("sample records always serialize")
}

/// `data.jsonl` -> `data.splits.json`.
pub fn splits_path(path: &Path) -> PathBuf {
    path.with_extension("splits.json")
}

pub fn write_samples<W: Write>(samples: &[EgoSample], w: &mut W) -> Result<()> {
    for s in samples {
        writeln!(w, "{}", sample_to_json(s))?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(r: R) -> Result<Vec<EgoSample>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord =
            serde_json::from_str(&line).map_err(|e| AugInfError::Parse { line: idx + 1, message: e.to_string() })?;
        out.push(rec.into_sample()?);
    }
    Ok(out)
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_samples(&d.samples, &mut w)?;
    w.flush()?;
    let splits = SplitsFile {
        train: d.splits.train.clone(),
        valid: d.splits.valid.clone(),
        test: d.splits.test.clone(),
        metadata: Some(d.metadata.clone()),
    };
    let mut sw = BufWriter::new(File::create(splits_path(path))?);
    serde_json::to_writer(&mut sw, &splits).map_err(|e| AugInfError::Data(e.to_string()))?;
    writeln!(sw)?;
    sw.flush()?;
    Ok(())
}

/// Reads samples and, when present, the sibling splits file. The result is
/// validated before it is returned.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| AugInfError::Data(format!("cannot open {}: {e}", path.display())))?;
    let samples = read_samples(BufReader::new(file))?;
    let sp = splits_path(path);
    let (splits, metadata) = if sp.exists() {
        let f: SplitsFile = serde_json::from_reader(BufReader::new(File::open(&sp)?))
            .map_err(|e| AugInfError::Parse { line: e.line(), message: format!("{}: {e}", sp.display()) })?;
        (Splits { train: f.train, valid: f.valid, test: f.test }, f.metadata.unwrap_or_default())
    } else {
        (Splits::default(), DatasetMetadata::default())
    };
    let d = Dataset { samples, splits, metadata };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_sample() -> EgoSample {
        EgoSample {
            id: 1,
            graph: UndirectedGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap(),
            ego: 0,
            influence_state: vec![0, 1, 0],
            label: 1,
        }
    }

    #[test]
    fn valid_sample_has_no_violations() {
        assert!(validate_sample(&triangle_sample()).is_empty());
    }

    #[test]
    fn diagonal_entry_is_reported() {
        let mut s = triangle_sample();
        let mut adj = vec![0u8; 9];
        adj[4] = 1;
        s.graph = UndirectedGraph::from_dense_unchecked(3, adj);
        assert_eq!(validate_sample(&s), vec!["nonzero diagonal at 1".to_string()]);
    }

    #[test]
    fn ego_out_of_range_is_reported() {
        let mut s = triangle_sample();
        s.ego = 5;
        assert_eq!(validate_sample(&s), vec!["ego out of range".to_string()]);
    }

    #[test]
    fn asymmetric_dense_entry_is_reported() {
        let mut s = triangle_sample();
        s.graph = UndirectedGraph::from_dense_unchecked(3, vec![0, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(validate_sample(&s), vec!["asymmetric entry at (0,1)".to_string()]);
    }

    #[test]
    fn degree_vectors() {
        assert_eq!(degree_vector(&UndirectedGraph::empty(3)), vec![0, 0, 0]);
        let tri = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(degree_vector(&tri), vec![2, 2, 2]);
        let path = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(degree_vector(&path), vec![1, 2, 1]);
    }

    #[test]
    fn directed_arcs_are_symmetrized() {
        let g = UndirectedGraph::from_directed_edges(3, &[(0, 1), (2, 1), (2, 2)]).unwrap();
        assert!(g.has_edge(1, 0) && g.has_edge(1, 2));
        assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn record_with_reversed_edge_names_the_sample() {
        let line = r#"{"id":42,"n":3,"edges":[[1,0]],"ego":0,"state":[0,0,0],"label":0}"#;
        match read_samples(line.as_bytes()) {
            Err(AugInfError::Validation { sample_id, .. }) => assert_eq!(sample_id, 42),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_reports_line_number() {
        let text = "{\"id\":1,\"n\":1,\"edges\":[],\"ego\":0,\"state\":[0],\"label\":0}\n{\"id\":2,\"n\":";
        match read_samples(text.as_bytes()) {
            Err(AugInfError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn splits_must_be_disjoint() {
        let s = Splits { train: vec![0, 1], valid: vec![], test: vec![1] };
        assert!(s.check(3).is_err());
        let s = Splits { train: vec![0], valid: vec![], test: vec![3] };
        assert!(s.check(3).is_err());
    }

    #[test]
    fn induced_subgraph_keeps_ids() {
        let g = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let sub = g.induced(&[3, 2, 0]);
        assert_eq!(sub.edges(), vec![(0, 1)]);
        assert_eq!(sub.node_ids(), Some(&[3u64, 2, 0][..]));
    }
}
