//! Per-identity match graphs: all-pairs thresholded edges, anchor selection
//! by maximum degree, and extraction of the anchor's connected component as
//! the kept set for that identity.
//!
//! Components are computed to a fixed point (breadth-first traversal), so
//! the kept set is the full connected component of the anchor regardless of
//! record insertion order. Groups are independent and may be filtered on
//! concurrent workers; results are merged by label with no ordering
//! sensitivity.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CleanedDataset, RecordId, WeakDataset};
use crate::embed::{distance, EmbeddingModel};
use crate::error::{Error, Result};

/// Which component of the match graph becomes the kept set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ComponentRule {
    /// The component containing the maximum-degree node.
    #[default]
    Anchor,
    /// The largest component; ties broken by lowest minimum record id.
    Largest,
}

/// Parameters of one cleaning pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanParams {
    pub threshold: f64,
    pub min_group_size: usize,
    pub component_rule: ComponentRule,
}

impl CleanParams {
    /// Validated constructor: the threshold must lie in (0, 2] (the distance
    /// range of unit-vector embeddings) and the size gate must be positive.
    pub fn new(threshold: f64, min_group_size: usize, component_rule: ComponentRule) -> Result<Self> {
        if !threshold.is_finite() || threshold <= 0.0 || threshold > 2.0 {
            return Err(Error::InvalidConfig(format!(
                "threshold {threshold} outside (0, 2]"
            )));
        }
        if min_group_size == 0 {
            return Err(Error::InvalidConfig("min_group_size must be >= 1".into()));
        }
        Ok(CleanParams {
            threshold,
            min_group_size,
            component_rule,
        })
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        CleanParams {
            threshold,
            ..self.clone()
        }
    }
}

impl Default for CleanParams {
    fn default() -> Self {
        CleanParams {
            threshold: 0.2,
            min_group_size: 2,
            component_rule: ComponentRule::Anchor,
        }
    }
}

/// Cached pairwise distances for one weak-label group, so threshold sweeps
/// do not recompute embeddings.
#[derive(Debug, Clone)]
pub struct GroupDistances {
    label: String,
    ids: Vec<RecordId>,
    // Upper triangle, row-major: entry for (i, j), i < j.
    dists: Vec<f64>,
}

impl GroupDistances {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn ids(&self) -> &[RecordId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    fn tri_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let n = self.ids.len();
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.dists[self.tri_index(i, j)],
            std::cmp::Ordering::Greater => self.dists[self.tri_index(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Largest pairwise distance within the group, if any pair exists.
    pub fn max_distance(&self) -> Option<f64> {
        self.dists.iter().copied().reduce(f64::max)
    }

    pub fn min_distance(&self) -> Option<f64> {
        self.dists.iter().copied().reduce(f64::min)
    }
}

/// Compute the exact all-pairs distance cache for one group.
pub fn group_distances(
    ds: &WeakDataset,
    label: &str,
    model: &EmbeddingModel,
) -> Result<GroupDistances> {
    let ids = ds
        .group(label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let embeddings = ids
        .iter()
        .map(|&id| model.embed(ds.record(id).expect("group ids are valid")))
        .collect::<Result<Vec<_>>>()?;
    let n = ids.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(distance(&embeddings[i], &embeddings[j])?);
        }
    }
    Ok(GroupDistances {
        label: label.to_string(),
        ids: ids.to_vec(),
        dists,
    })
}

/// Distance caches for every group, computed in parallel on the current
/// rayon pool and returned in label order.
pub fn dataset_distances(ds: &WeakDataset, model: &EmbeddingModel) -> Result<Vec<GroupDistances>> {
    let labels: Vec<&str> = ds.labels().collect();
    labels
        .par_iter()
        .map(|label| group_distances(ds, label, model))
        .collect()
}

/// Per-identity match graph under a distance threshold.
#[derive(Debug, Clone)]
pub struct IdentityGraph {
    label: String,
    nodes: Vec<RecordId>,
    adj: Vec<Vec<usize>>,
    threshold: f64,
}

impl IdentityGraph {
    /// Graph with an explicit edge list over node indices (self-loops and
    /// duplicate edges are ignored). Mainly useful for synthetic graphs in
    /// tests and tooling.
    pub fn from_edges(
        label: impl Into<String>,
        nodes: Vec<RecordId>,
        edges: &[(usize, usize)],
        threshold: f64,
    ) -> Self {
        let n = nodes.len();
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            assert!(i < n && j < n, "edge endpoint out of range");
            if i != j && !adj[i].contains(&j) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        IdentityGraph {
            label: label.into(),
            nodes,
            adj,
            threshold,
        }
    }

    /// Thresholded graph from a distance cache: edge (i, j) iff
    /// distance < T, i ≠ j.
    pub fn from_distances(cache: &GroupDistances, threshold: f64) -> Self {
        let n = cache.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if cache.get(i, j) < threshold {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        IdentityGraph {
            label: cache.label.clone(),
            nodes: cache.ids.clone(),
            adj,
            threshold,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn nodes(&self) -> &[RecordId] {
        &self.nodes
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(&j)
    }
}

/// Build the exact all-pairs thresholded graph for one group (O(n²)
/// distance evaluations).
pub fn build_graph(
    ds: &WeakDataset,
    label: &str,
    model: &EmbeddingModel,
    threshold: f64,
) -> Result<IdentityGraph> {
    let cache = group_distances(ds, label, model)?;
    Ok(IdentityGraph::from_distances(&cache, threshold))
}

/// The anchor: the node of maximum degree, ties broken by lowest record id.
pub fn find_anchor(g: &IdentityGraph) -> usize {
    assert!(g.node_count() > 0, "anchor of an empty graph");
    (0..g.node_count())
        .max_by(|&a, &b| {
            g.degree(a)
                .cmp(&g.degree(b))
                .then_with(|| g.nodes[b].cmp(&g.nodes[a]))
        })
        .expect("graph is non-empty")
}

/// The full connected component containing `root`, computed to a fixed
/// point by breadth-first traversal. The result is independent of node
/// insertion order.
pub fn extract_component(g: &IdentityGraph, root: usize) -> BTreeSet<RecordId> {
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    let mut out = BTreeSet::new();
    while let Some(node) = queue.pop_front() {
        out.insert(g.nodes[node]);
        for &next in g.neighbors(node) {
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    out
}

/// All connected components, sorted by (size desc, min record id asc).
fn components_by_size(g: &IdentityGraph) -> Vec<BTreeSet<RecordId>> {
    let mut seen = vec![false; g.node_count()];
    let mut comps = Vec::new();
    for start in 0..g.node_count() {
        if seen[start] {
            continue;
        }
        let comp = extract_component(g, start);
        for id in &comp {
            let idx = g.nodes.iter().position(|n| n == id).expect("node exists");
            seen[idx] = true;
        }
        comps.push(comp);
    }
    comps.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.iter().next().cmp(&b.iter().next()))
    });
    comps
}

/// Per-group cleaning diagnostics, emitted as JSONL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDiagnostic {
    pub label: String,
    pub group_size: usize,
    pub edge_count: usize,
    pub anchor: Option<RecordId>,
    pub component_size: usize,
    pub second_component_size: usize,
}

fn clean_from_distances(cache: &GroupDistances, params: &CleanParams) -> (BTreeSet<RecordId>, GroupDiagnostic) {
    if cache.len() < params.min_group_size {
        return (
            BTreeSet::new(),
            GroupDiagnostic {
                label: cache.label.clone(),
                group_size: cache.len(),
                edge_count: 0,
                anchor: None,
                component_size: 0,
                second_component_size: 0,
            },
        );
    }
    let g = IdentityGraph::from_distances(cache, params.threshold);
    let anchor = find_anchor(&g);
    let comps = components_by_size(&g);
    let kept = match params.component_rule {
        ComponentRule::Anchor => extract_component(&g, anchor),
        ComponentRule::Largest => comps.first().cloned().unwrap_or_default(),
    };
    let second_component_size = comps
        .iter()
        .filter(|c| **c != kept)
        .map(|c| c.len())
        .max()
        .unwrap_or(0);
    let diag = GroupDiagnostic {
        label: cache.label.clone(),
        group_size: cache.len(),
        edge_count: g.edge_count(),
        anchor: Some(g.nodes[anchor]),
        component_size: kept.len(),
        second_component_size,
    };
    (kept, diag)
}

/// Clean one identity: groups under the size gate keep nothing; otherwise
/// build the graph, pick the anchor, and keep its component (or the largest
/// one, per the component rule).
pub fn clean_identity(
    ds: &WeakDataset,
    label: &str,
    model: &EmbeddingModel,
    params: &CleanParams,
) -> Result<BTreeSet<RecordId>> {
    let cache = group_distances(ds, label, model)?;
    Ok(clean_from_distances(&cache, params).0)
}

/// Clean every group of the dataset independently. Deterministic and
/// independent of group processing order or worker count.
pub fn clean_dataset(
    ds: &WeakDataset,
    model: &EmbeddingModel,
    params: &CleanParams,
) -> Result<CleanedDataset> {
    Ok(clean_dataset_full(ds, model, params)?.0)
}

/// [`clean_dataset`] plus per-group diagnostics (in label order).
pub fn clean_dataset_full(
    ds: &WeakDataset,
    model: &EmbeddingModel,
    params: &CleanParams,
) -> Result<(CleanedDataset, Vec<GroupDiagnostic>)> {
    let caches = dataset_distances(ds, model)?;
    Ok(clean_cached_full(&caches, params))
}

/// Cleaning over precomputed distance caches (threshold sweeps reuse this).
pub fn clean_cached(caches: &[GroupDistances], params: &CleanParams) -> CleanedDataset {
    clean_cached_full(caches, params).0
}

pub fn clean_cached_full(
    caches: &[GroupDistances],
    params: &CleanParams,
) -> (CleanedDataset, Vec<GroupDiagnostic>) {
    let results: Vec<(BTreeSet<RecordId>, GroupDiagnostic)> = caches
        .par_iter()
        .map(|cache| clean_from_distances(cache, params))
        .collect();
    let mut kept = BTreeMap::new();
    let mut diagnostics = Vec::with_capacity(results.len());
    for (set, diag) in results {
        if !set.is_empty() {
            kept.insert(diag.label.clone(), set);
        }
        diagnostics.push(diag);
    }
    (
        CleanedDataset {
            kept,
            iteration: 1,
            threshold_used: params.threshold,
        },
        diagnostics,
    )
}

/// Run a closure on a rayon pool with the given worker count (0 = the
/// global pool). Filtering output is identical for any worker count.
pub fn run_with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool")
            .install(f)
    }
}

/// Write per-group diagnostics as JSONL.
pub fn write_diagnostics(diags: &[GroupDiagnostic], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in diags {
        let line = serde_json::to_string(d).expect("diagnostic serialization cannot fail");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FaceRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(id: u64, label: &str, features: Vec<f64>) -> FaceRecord {
        FaceRecord {
            record_id: RecordId(id),
            weak_label: label.into(),
            features,
            truth_label: None,
        }
    }

    /// Dataset of unit-circle points at the given angles, one group.
    fn circle_dataset(label: &str, angles: &[f64]) -> WeakDataset {
        let records = angles
            .iter()
            .enumerate()
            .map(|(i, a)| rec(i as u64, label, vec![a.cos(), a.sin()]))
            .collect();
        WeakDataset::new(records, 2).unwrap()
    }

    /// Minimal union-find oracle for component checks.
    struct UnionFind(Vec<usize>);

    impl UnionFind {
        fn new(n: usize) -> Self {
            UnionFind((0..n).collect())
        }
        fn find(&mut self, x: usize) -> usize {
            if self.0[x] != x {
                let root = self.find(self.0[x]);
                self.0[x] = root;
            }
            self.0[x]
        }
        fn union(&mut self, a: usize, b: usize) {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra != rb {
                self.0[ra] = rb;
            }
        }
    }

    #[test]
    fn threshold_boundary_gives_path_graph() {
        // Chord distances: (0,1) ≈ 0.1, (1,2) ≈ 0.1, (0,2) ≈ 0.2.
        let step = 2.0 * (0.05_f64).asin();
        let ds = circle_dataset("a", &[0.0, step, 2.0 * step]);
        let model = EmbeddingModel::identity(2);
        let g = build_graph(&ds, "a", &model, 0.15).unwrap();
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(1, 2));
        assert!(!g.has_edge(0, 2));
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn maximum_threshold_gives_complete_graph() {
        let ds = circle_dataset("a", &[0.0, 1.0, 2.5, 3.14159, 4.0]);
        let model = EmbeddingModel::identity(2);
        let g = build_graph(&ds, "a", &model, 2.01).unwrap();
        assert_eq!(g.edge_count(), 5 * 4 / 2);
    }

    #[test]
    fn single_node_group_has_no_edges() {
        let ds = circle_dataset("a", &[1.0]);
        let model = EmbeddingModel::identity(2);
        let g = build_graph(&ds, "a", &model, 0.5).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    fn graph_from_edges(ids: &[u64], edges: &[(usize, usize)]) -> IdentityGraph {
        IdentityGraph::from_edges("t", ids.iter().map(|&i| RecordId(i)).collect(), edges, 0.0)
    }

    #[test]
    fn anchor_is_max_degree() {
        let g = graph_from_edges(&[0, 1, 2], &[(0, 1), (1, 2)]);
        assert_eq!(find_anchor(&g), 1);
    }

    #[test]
    fn anchor_ties_break_by_lowest_record_id() {
        // Max degree 2 is shared by record ids 7, 3, and 5; the tie goes to 3.
        let g = graph_from_edges(&[7, 3, 9, 5], &[(0, 1), (0, 3), (1, 3)]);
        assert_eq!(g.nodes()[find_anchor(&g)], RecordId(3));
    }

    #[test]
    fn all_isolated_anchor_is_lowest_record_id() {
        let g = graph_from_edges(&[12, 4, 9], &[]);
        assert_eq!(g.nodes()[find_anchor(&g)], RecordId(4));
        assert_eq!(g.degree(find_anchor(&g)), 0);
    }

    #[test]
    fn component_extraction_stops_at_component_boundary() {
        let g = graph_from_edges(&[0, 1, 2, 3, 4], &[(0, 1), (1, 2), (3, 4)]);
        let comp = extract_component(&g, 1);
        assert_eq!(
            comp,
            BTreeSet::from([RecordId(0), RecordId(1), RecordId(2)])
        );
    }

    #[test]
    fn isolated_root_yields_singleton() {
        let g = graph_from_edges(&[5, 6], &[]);
        assert_eq!(extract_component(&g, 0), BTreeSet::from([RecordId(5)]));
    }

    #[test]
    fn chain_extraction_reaches_fixed_point_regardless_of_order() {
        // A single-pass reading of the inner loops could miss multi-hop
        // members depending on visiting order; the fixed-point semantics may
        // not. Checked against a union-find oracle on random graphs.
        let g = graph_from_edges(&[0, 1, 2, 3], &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(extract_component(&g, 0).len(), 4);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random_bool(0.08) {
                        edges.push((i, j));
                    }
                }
            }
            let ids: Vec<u64> = (0..n as u64).collect();
            let g = graph_from_edges(&ids, &edges);
            let mut uf = UnionFind::new(n);
            for &(i, j) in &edges {
                uf.union(i, j);
            }
            let root = rng.random_range(0..n);
            let expected: BTreeSet<RecordId> = (0..n)
                .filter(|&i| uf.find(i) == uf.find(root))
                .map(|i| RecordId(i as u64))
                .collect();
            assert_eq!(extract_component(&g, root), expected);
        }
    }

    /// Two clusters on the unit circle: a wide chained majority around angle
    /// 0 and a tight minority around angle 2.5, plus loose outliers.
    fn contaminated_dataset() -> WeakDataset {
        let mut angles = Vec::new();
        for i in 0..8 {
            angles.push(i as f64 * 0.08); // chain: consecutive chords ≈ 0.08
        }
        angles.push(2.5);
        angles.push(2.52);
        circle_dataset("a", &angles)
    }

    #[test]
    fn clean_identity_keeps_anchor_component_only() {
        let ds = contaminated_dataset();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.1, 2, ComponentRule::Anchor).unwrap();
        let kept = clean_identity(&ds, "a", &model, &params).unwrap();
        let expected: BTreeSet<RecordId> = (0..8).map(RecordId).collect();
        assert_eq!(kept, expected);
    }

    #[test]
    fn minority_clique_is_excluded_even_when_tight() {
        // The minority pair is mutually closer than any majority pair, but
        // the anchor (max degree) lies in the majority chain.
        let ds = contaminated_dataset();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.1, 2, ComponentRule::Anchor).unwrap();
        let kept = clean_identity(&ds, "a", &model, &params).unwrap();
        assert!(!kept.contains(&RecordId(8)));
        assert!(!kept.contains(&RecordId(9)));
    }

    #[test]
    fn size_gate_drops_small_groups() {
        let ds = circle_dataset("a", &[0.0, 0.01]);
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.5, 3, ComponentRule::Anchor).unwrap();
        let kept = clean_identity(&ds, "a", &model, &params).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn largest_component_need_not_contain_the_anchor() {
        // Star of 3 around node 0 (degree 3) versus a 5-chain: the largest
        // component does not contain the max-degree node.
        let g = graph_from_edges(
            &[0, 1, 2, 3, 10, 11, 12, 13, 14],
            &[(0, 1), (0, 2), (0, 3), (4, 5), (5, 6), (6, 7), (7, 8)],
        );
        let anchor = find_anchor(&g);
        assert_eq!(g.nodes()[anchor], RecordId(0));
        let comps = components_by_size(&g);
        assert_eq!(comps[0].len(), 5);
        assert!(comps[0].contains(&RecordId(10)));
    }

    #[test]
    fn clean_dataset_unions_independent_groups() {
        let mut records = Vec::new();
        for i in 0..4 {
            records.push(rec(i, "a", vec![(i as f64 * 0.05).cos(), (i as f64 * 0.05).sin()]));
        }
        for i in 0..3 {
            records.push(rec(
                10 + i,
                "b",
                vec![(2.0 + i as f64 * 0.05).cos(), (2.0 + i as f64 * 0.05).sin()],
            ));
        }
        let ds = WeakDataset::new(records, 2).unwrap();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.12, 2, ComponentRule::Anchor).unwrap();
        let cleaned = clean_dataset(&ds, &model, &params).unwrap();
        assert_eq!(cleaned.kept.len(), 2);
        assert_eq!(cleaned.kept["a"].len(), 4);
        assert_eq!(cleaned.kept["b"].len(), 3);

        let a_only = clean_identity(&ds, "a", &model, &params).unwrap();
        assert_eq!(cleaned.kept["a"], a_only);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut records = Vec::new();
        let mut id = 0;
        for gi in 0..12 {
            let center = gi as f64 * 0.5;
            for _ in 0..rng.random_range(3..20) {
                let a = center + rng.random_range(-0.2..0.2);
                records.push(rec(id, &format!("g{gi}"), vec![a.cos(), a.sin()]));
                id += 1;
            }
        }
        let ds = WeakDataset::new(records, 2).unwrap();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.15, 2, ComponentRule::Anchor).unwrap();

        let one = run_with_workers(1, || clean_dataset(&ds, &model, &params)).unwrap();
        let eight = run_with_workers(8, || clean_dataset(&ds, &model, &params)).unwrap();
        assert_eq!(one.kept, eight.kept);

        let again = run_with_workers(1, || clean_dataset(&ds, &model, &params)).unwrap();
        assert_eq!(one.kept, again.kept);
    }

    #[test]
    fn component_grows_monotonically_with_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(3..25);
            let angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let ds = circle_dataset("a", &angles);
            let model = EmbeddingModel::identity(2);
            let cache = group_distances(&ds, "a", &model).unwrap();
            let (t1, t2) = {
                let a: f64 = rng.random_range(0.01..1.0);
                let b: f64 = rng.random_range(0.01..1.0);
                (a.min(b), a.max(b))
            };
            let g1 = IdentityGraph::from_distances(&cache, t1);
            let g2 = IdentityGraph::from_distances(&cache, t2);
            let root = rng.random_range(0..n);
            let c1 = extract_component(&g1, root);
            let c2 = extract_component(&g2, root);
            assert!(c1.is_subset(&c2), "t1={t1} t2={t2}");
        }
    }

    #[test]
    fn kept_pairs_are_linked_below_threshold() {
        let ds = contaminated_dataset();
        let model = EmbeddingModel::identity(2);
        let t = 0.1;
        let cache = group_distances(&ds, "a", &model).unwrap();
        let g = IdentityGraph::from_distances(&cache, t);
        let kept = extract_component(&g, find_anchor(&g));
        // Every kept pair is connected by a path whose edges are all < T.
        // BFS within the kept set must reach every member from any member.
        let kept_idx: Vec<usize> = (0..g.node_count())
            .filter(|&i| kept.contains(&g.nodes()[i]))
            .collect();
        for &start in &kept_idx {
            let comp = extract_component(&g, start);
            assert_eq!(comp, kept);
        }
    }

    #[test]
    fn diagnostics_report_components() {
        let ds = contaminated_dataset();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.1, 2, ComponentRule::Anchor).unwrap();
        let (_, diags) = clean_dataset_full(&ds, &model, &params).unwrap();
        assert_eq!(diags.len(), 1);
        let d = &diags[0];
        assert_eq!(d.group_size, 10);
        assert_eq!(d.component_size, 8);
        assert_eq!(d.second_component_size, 2);
        assert!(d.anchor.is_some());
    }
}
