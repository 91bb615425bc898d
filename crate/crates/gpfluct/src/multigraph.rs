//! Loopy undirected multigraphs with edge multiplicities: disjoint powers,
//! contraction by set partitions, and canonical forms for memoization.
//!
//! Canonical keys are computed per connected component by color refinement
//! followed by an exhaustive lexicographic-minimum search within refinement
//! cells; component keys are sorted and concatenated, and isolated vertices
//! are folded into the header as a count. All graphs handled here have at
//! most 12 vertices, so the search stays small.

use crate::setpart::SetPartition;
use serde_json::{json, Value};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Vertex cap for canonical forms and contraction sweeps.
pub const MAX_CANON_VERTICES: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex index {v} outside 1..={n}")]
    VertexRange { v: usize, n: usize },
    #[error("edge multiplicity must be at least 1")]
    ZeroMultiplicity,
    #[error("graph has {0} vertices; this operation supports at most {MAX_CANON_VERTICES}")]
    VertexBound(usize),
    #[error("partition of {got} elements cannot contract a graph on {expected} vertices")]
    ContractShape { got: usize, expected: usize },
    #[error("invalid graph JSON: {0}")]
    Json(String),
}

/// An unoriented graph on `1..=vertex_count`, possibly with loops and with
/// multiple edges. Keys of `edges` satisfy `u <= v`; `u == v` is a loop.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Multigraph {
    vertex_count: usize,
    edges: BTreeMap<(usize, usize), u32>,
}

impl Multigraph {
    pub fn new(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            edges: BTreeMap::new(),
        }
    }

    /// The path on `k` vertices (k−1 simple edges).
    pub fn path(k: usize) -> Self {
        let mut g = Self::new(k);
        for i in 1..k {
            g.add_edge(i, i + 1, 1).unwrap();
        }
        g
    }

    /// The complete simple graph on `k` vertices.
    pub fn complete(k: usize) -> Self {
        let mut g = Self::new(k);
        for u in 1..=k {
            for v in u + 1..=k {
                g.add_edge(u, v, 1).unwrap();
            }
        }
        g
    }

    /// Two vertices joined by `mult` parallel edges.
    pub fn bond(mult: u32) -> Self {
        let mut g = Self::new(2);
        g.add_edge(1, 2, mult).unwrap();
        g
    }

    pub fn add_edge(&mut self, u: usize, v: usize, mult: u32) -> Result<(), GraphError> {
        for w in [u, v] {
            if w == 0 || w > self.vertex_count {
                return Err(GraphError::VertexRange {
                    v: w,
                    n: self.vertex_count,
                });
            }
        }
        if mult == 0 {
            return Err(GraphError::ZeroMultiplicity);
        }
        let key = (u.min(v), u.max(v));
        *self.edges.entry(key).or_insert(0) += mult;
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.edges.iter().map(|(&(u, v), &m)| (u, v, m))
    }

    pub fn edge_mult(&self, u: usize, v: usize) -> u32 {
        self.edges
            .get(&(u.min(v), u.max(v)))
            .copied()
            .unwrap_or(0)
    }

    /// Total edge count with multiplicity.
    pub fn total_multiplicity(&self) -> u64 {
        self.edges.values().map(|&m| u64::from(m)).sum()
    }

    pub fn has_loop(&self) -> bool {
        self.edges.keys().any(|&(u, v)| u == v)
    }

    pub fn loop_mult(&self, v: usize) -> u32 {
        self.edge_mult(v, v)
    }

    /// Non-loop neighbors of `v` with multiplicities, ascending by index.
    pub fn neighbors(&self, v: usize) -> Vec<(usize, u32)> {
        let mut out = Vec::new();
        for (&(a, b), &m) in &self.edges {
            if a == b {
                continue;
            }
            if a == v {
                out.push((b, m));
            } else if b == v {
                out.push((a, m));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_isolated(&self, v: usize) -> bool {
        self.loop_mult(v) == 0 && self.neighbors(v).is_empty()
    }

    /// Disjoint union of `r` copies; copy `a` occupies vertices
    /// `(a−1)p+1 ..= ap`.
    pub fn disjoint_power(&self, r: usize) -> Self {
        let p = self.vertex_count;
        let mut g = Self::new(p * r);
        for a in 0..r {
            for (u, v, m) in self.edges() {
                g.add_edge(u + a * p, v + a * p, m).unwrap();
            }
        }
        g
    }

    /// Contraction by a set partition of the vertex set: vertices become the
    /// blocks of π in canonical block order, multiplicities add, and edges
    /// inside a block become loops.
    pub fn contract(&self, pi: &SetPartition) -> Result<Self, GraphError> {
        if pi.ground_set_size() != self.vertex_count {
            return Err(GraphError::ContractShape {
                got: pi.ground_set_size(),
                expected: self.vertex_count,
            });
        }
        let mut g = Self::new(pi.block_count());
        for (u, v, m) in self.edges() {
            let bu = pi.block_index_of(u) + 1;
            let bv = pi.block_index_of(v) + 1;
            g.add_edge(bu, bv, m).unwrap();
        }
        Ok(g)
    }

    /// Deletes vertex `x` and its incident edges; vertices above `x` shift
    /// down by one.
    pub fn remove_vertex(&self, x: usize) -> Self {
        let mut g = Self::new(self.vertex_count - 1);
        let map = |v: usize| if v > x { v - 1 } else { v };
        for (u, v, m) in self.edges() {
            if u != x && v != x {
                g.add_edge(map(u), map(v), m).unwrap();
            }
        }
        g
    }

    /// Relabels vertices: `perm[i]` is the new 1-based label of old vertex
    /// `i+1`; `perm` must be a permutation of `1..=vertex_count`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        debug_assert_eq!(perm.len(), self.vertex_count);
        let mut g = Self::new(self.vertex_count);
        for (u, v, m) in self.edges() {
            g.add_edge(perm[u - 1], perm[v - 1], m).unwrap();
        }
        g
    }

    /// The subgraph induced on `vertices` (1-based, ascending), re-indexed
    /// to `1..=vertices.len()` in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Self {
        let mut index = vec![0usize; self.vertex_count + 1];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i + 1;
        }
        let mut g = Self::new(vertices.len());
        for (u, v, m) in self.edges() {
            if index[u] > 0 && index[v] > 0 {
                g.add_edge(index[u], index[v], m).unwrap();
            }
        }
        g
    }

    /// Connected components as ascending vertex lists (loops do not connect;
    /// a vertex with only a loop is its own component).
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.vertex_count;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for (&(u, v), _) in &self.edges {
            let (a, b) = (find(&mut parent, u - 1), find(&mut parent, v - 1));
            parent[a] = b;
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let root = find(&mut parent, v);
            groups.entry(root).or_default().push(v + 1);
        }
        groups.into_values().collect()
    }

    pub fn canonical_key(&self) -> Result<CanonicalKey, GraphError> {
        if self.vertex_count > MAX_CANON_VERTICES {
            return Err(GraphError::VertexBound(self.vertex_count));
        }
        let mut isolated = 0usize;
        let mut comp_keys: Vec<Vec<u8>> = Vec::new();
        for comp in self.connected_components() {
            if comp.len() == 1 && self.is_isolated(comp[0]) {
                isolated += 1;
                continue;
            }
            comp_keys.push(canonical_component_bytes(&self.induced(&comp)));
        }
        comp_keys.sort_unstable();
        let mut bytes = vec![
            self.vertex_count as u8,
            isolated as u8,
            comp_keys.len() as u8,
        ];
        for key in comp_keys {
            bytes.extend_from_slice(&(key.len() as u16).to_be_bytes());
            bytes.extend_from_slice(&key);
        }
        Ok(CanonicalKey(bytes))
    }

    pub fn to_json(&self) -> Value {
        let edges: Vec<Value> = self
            .edges()
            .map(|(u, v, m)| json!([u, v, m]))
            .collect();
        json!({ "vertices": self.vertex_count, "edges": edges })
    }

    /// Parses `{"vertices": k, "edges": [[u, v, mult], ...]}` with 1-based
    /// vertices; rejects out-of-range endpoints and `mult < 1`.
    pub fn from_json(v: &Value) -> Result<Self, GraphError> {
        let obj = v
            .as_object()
            .ok_or_else(|| GraphError::Json("expected an object".into()))?;
        let n = obj
            .get("vertices")
            .and_then(Value::as_u64)
            .ok_or_else(|| GraphError::Json("missing positive \"vertices\"".into()))?;
        if n == 0 {
            return Err(GraphError::Json("\"vertices\" must be at least 1".into()));
        }
        let mut g = Self::new(n as usize);
        let edges = obj
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| GraphError::Json("missing \"edges\" array".into()))?;
        for e in edges {
            let triple = e
                .as_array()
                .filter(|t| t.len() == 3)
                .ok_or_else(|| GraphError::Json(format!("bad edge entry {}", e)))?;
            let mut parts = [0u64; 3];
            for (i, x) in triple.iter().enumerate() {
                parts[i] = x
                    .as_u64()
                    .ok_or_else(|| GraphError::Json(format!("bad edge entry {}", e)))?;
            }
            if parts[2] == 0 {
                return Err(GraphError::Json(format!("edge {} has multiplicity 0", e)));
            }
            g.add_edge(parts[0] as usize, parts[1] as usize, parts[2] as u32)
                .map_err(|err| GraphError::Json(err.to_string()))?;
        }
        Ok(g)
    }
}

/// Byte string identifying the isomorphism class of a multigraph with loops:
/// keys are equal iff the graphs are isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{:02x}", b)).collect()
    }
}

/// Iterative color refinement: start from (loop multiplicity, sorted incident
/// multiplicities) and refine by sorted neighborhood color/mult signatures
/// until the partition stabilizes. Color ids are assigned in sorted signature
/// order, so they are isomorphism-invariant.
fn refine_colors(g: &Multigraph) -> Vec<usize> {
    let n = g.vertex_count();
    let init: Vec<(u32, Vec<u32>)> = (1..=n)
        .map(|v| {
            let mut mults: Vec<u32> = g.neighbors(v).into_iter().map(|(_, m)| m).collect();
            mults.sort_unstable();
            (g.loop_mult(v), mults)
        })
        .collect();
    let mut colors = assign_ids(&init);
    loop {
        let sig: Vec<(usize, Vec<(usize, u32)>)> = (1..=n)
            .map(|v| {
                let mut nb: Vec<(usize, u32)> = g
                    .neighbors(v)
                    .into_iter()
                    .map(|(u, m)| (colors[u - 1], m))
                    .collect();
                nb.sort_unstable();
                (colors[v - 1], nb)
            })
            .collect();
        let next = assign_ids(&sig);
        if next == colors {
            return colors;
        }
        colors = next;
    }
}

fn assign_ids<T: Ord>(sigs: &[T]) -> Vec<usize> {
    let sorted: BTreeSet<&T> = sigs.iter().collect();
    let ids: Vec<&T> = sorted.into_iter().collect();
    sigs.iter()
        .map(|s| ids.binary_search(&s).unwrap())
        .collect()
}

/// Per-vertex encoding row emitted as labels are assigned: refinement color,
/// loop multiplicity, and edges back to already-labeled vertices.
type Row = (usize, u32, Vec<(usize, u32)>);

struct CanonSearch<'a> {
    g: &'a Multigraph,
    colors: Vec<usize>,
    best: Option<Vec<Row>>,
}

impl CanonSearch<'_> {
    fn run(mut self) -> Vec<Row> {
        let n = self.g.vertex_count();
        let mut label_of = vec![None; n];
        let mut rows = Vec::with_capacity(n);
        self.dfs(&mut label_of, &mut rows, Ordering::Equal);
        self.best.unwrap()
    }

    fn dfs(&mut self, label_of: &mut Vec<Option<usize>>, rows: &mut Vec<Row>, prefix: Ordering) {
        let n = self.g.vertex_count();
        let t = rows.len();
        if t == n {
            if self.best.is_none() || prefix == Ordering::Less {
                self.best = Some(rows.clone());
            }
            return;
        }
        let min_color = (0..n)
            .filter(|&v| label_of[v].is_none())
            .map(|v| self.colors[v])
            .min()
            .unwrap();
        for v in 0..n {
            if label_of[v].is_some() || self.colors[v] != min_color {
                continue;
            }
            let mut back: Vec<(usize, u32)> = self
                .g
                .neighbors(v + 1)
                .into_iter()
                .filter_map(|(u, m)| label_of[u - 1].map(|lab| (lab, m)))
                .collect();
            back.sort_unstable();
            let row: Row = (self.colors[v], self.g.loop_mult(v + 1), back);
            let next_prefix = match (prefix, &self.best) {
                (Ordering::Less, _) | (_, None) => Ordering::Less,
                (Ordering::Equal, Some(best)) => {
                    let cmp = row.cmp(&best[t]);
                    if cmp == Ordering::Greater {
                        continue;
                    }
                    cmp
                }
                (Ordering::Greater, _) => unreachable!(),
            };
            label_of[v] = Some(t);
            rows.push(row);
            self.dfs(label_of, rows, next_prefix);
            rows.pop();
            label_of[v] = None;
        }
    }
}

fn canonical_component_bytes(g: &Multigraph) -> Vec<u8> {
    let colors = refine_colors(g);
    let rows = CanonSearch {
        g,
        colors,
        best: None,
    }
    .run();
    let mut bytes = vec![g.vertex_count() as u8];
    for (color, loop_mult, back) in rows {
        bytes.push(color as u8);
        bytes.extend_from_slice(&loop_mult.to_be_bytes());
        bytes.push(back.len() as u8);
        for (lab, m) in back {
            bytes.push(lab as u8);
            bytes.extend_from_slice(&m.to_be_bytes());
        }
    }
    bytes
}

#[derive(Debug, Clone)]
pub struct ContractionClass {
    pub count: u64,
    pub representative: Multigraph,
}

#[derive(Debug, Clone, Default)]
pub struct ContractionCensus {
    /// Number of partitions whose contraction is loop-free.
    pub total_loopless: u64,
    pub classes: BTreeMap<CanonicalKey, ContractionClass>,
}

/// Sweeps every set partition of the vertex set of `g^r`, contracts, drops
/// the loopy outcomes, and groups the rest by isomorphism class.
pub fn count_loopless_contractions(
    g: &Multigraph,
    r: usize,
) -> Result<ContractionCensus, GraphError> {
    let total = g.vertex_count() * r;
    if total == 0 || total > MAX_CANON_VERTICES {
        return Err(GraphError::VertexBound(total));
    }
    let power = g.disjoint_power(r);
    let mut census = ContractionCensus::default();
    for pi in crate::setpart::enumerate_partitions(total).expect("size checked above") {
        let contracted = power.contract(&pi)?;
        if contracted.has_loop() {
            continue;
        }
        census.total_loopless += 1;
        let key = contracted.canonical_key()?;
        census
            .classes
            .entry(key)
            .or_insert_with(|| ContractionClass {
                count: 0,
                representative: contracted,
            })
            .count += 1;
    }
    Ok(census)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force isomorphism oracle, independent of canonical keys.
    fn isomorphic_brute(a: &Multigraph, b: &Multigraph) -> bool {
        if a.vertex_count() != b.vertex_count() {
            return false;
        }
        let n = a.vertex_count();
        let mut perm: Vec<usize> = (1..=n).collect();
        permute_all(&mut perm, 0, &mut |p| a.permute(p) == *b)
    }

    fn permute_all(perm: &mut Vec<usize>, k: usize, found: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if k == perm.len() {
            return found(perm);
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            if permute_all(perm, k + 1, found) {
                return true;
            }
            perm.swap(k, i);
        }
        false
    }

    #[test]
    fn disjoint_power_examples() {
        let g = Multigraph::path(3).disjoint_power(2);
        assert_eq!(g.vertex_count(), 6);
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(1, 2, 1), (2, 3, 1), (4, 5, 1), (5, 6, 1)]);
        let same = Multigraph::path(4);
        assert_eq!(same.disjoint_power(1), same);
        assert_eq!(Multigraph::bond(1).disjoint_power(3).edges().count(), 3);
    }

    #[test]
    fn contraction_examples() {
        let g = Multigraph::path(3).disjoint_power(2);
        let pi = SetPartition::new(
            6,
            vec![vec![1, 4], vec![2], vec![3], vec![5], vec![6]],
        )
        .unwrap();
        let c = g.contract(&pi).unwrap();
        assert_eq!(c.vertex_count(), 5);
        // merged vertex is block {1,4} -> new vertex 1, adjacent to old 2 and old 5
        assert_eq!(c.neighbors(1), vec![(2, 1), (4, 1)]);
        assert_eq!(c.total_multiplicity(), g.total_multiplicity());

        let singles = SetPartition::new(3, vec![vec![1], vec![2], vec![3]]).unwrap();
        let path = Multigraph::path(3);
        assert_eq!(path.contract(&singles).unwrap(), path);

        let merged = Multigraph::bond(1)
            .contract(&SetPartition::new(2, vec![vec![1, 2]]).unwrap())
            .unwrap();
        assert_eq!(merged.vertex_count(), 1);
        assert!(merged.has_loop());
        assert_eq!(merged.loop_mult(1), 1);

        assert!(matches!(
            path.contract(&SetPartition::new(2, vec![vec![1], vec![2]]).unwrap()),
            Err(GraphError::ContractShape { .. })
        ));
    }

    #[test]
    fn loop_detection() {
        assert!(!Multigraph::path(3).has_loop());
        let mut g = Multigraph::new(2);
        g.add_edge(2, 2, 1).unwrap();
        assert!(g.has_loop());
    }

    #[test]
    fn canonical_key_reversal_and_separation() {
        let path = Multigraph::path(3);
        let reversed = path.permute(&[3, 2, 1]);
        assert_eq!(
            path.canonical_key().unwrap(),
            reversed.canonical_key().unwrap()
        );

        // double edge vs two parallel single edges on four vertices
        let double = Multigraph::bond(2);
        let mut two_comp = Multigraph::new(4);
        two_comp.add_edge(1, 2, 1).unwrap();
        two_comp.add_edge(3, 4, 1).unwrap();
        assert_ne!(
            double.canonical_key().unwrap(),
            two_comp.canonical_key().unwrap()
        );
        assert!(Multigraph::new(13).canonical_key().is_err());
    }

    #[test]
    fn canonical_key_invariant_under_random_permutations() {
        let graphs = vec![
            Multigraph::path(4),
            Multigraph::complete(4),
            Multigraph::path(3).disjoint_power(2),
            Multigraph::bond(3),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in graphs {
            let key = g.canonical_key().unwrap();
            let n = g.vertex_count();
            for _ in 0..200 {
                let mut perm: Vec<usize> = (1..=n).collect();
                perm.shuffle(&mut rng);
                assert_eq!(g.permute(&perm).canonical_key().unwrap(), key);
            }
        }
    }

    #[test]
    fn keys_agree_with_brute_force_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut graphs = Vec::new();
        for n in 2..=5usize {
            for _ in 0..12 {
                let mut g = Multigraph::new(n);
                for u in 1..=n {
                    for v in u..=n {
                        let roll: u8 = rand::Rng::gen_range(&mut rng, 0..4);
                        if roll == 1 {
                            g.add_edge(u, v, 1).unwrap();
                        } else if roll == 2 {
                            g.add_edge(u, v, 2).unwrap();
                        }
                    }
                }
                graphs.push(g);
            }
        }
        for a in &graphs {
            for b in &graphs {
                if a.vertex_count() != b.vertex_count() {
                    continue;
                }
                assert_eq!(
                    a.canonical_key().unwrap() == b.canonical_key().unwrap(),
                    isomorphic_brute(a, b),
                    "key/brute-force disagreement on {:?} vs {:?}",
                    a,
                    b
                );
            }
        }
    }

    #[test]
    fn loopless_contraction_counts() {
        let census = count_loopless_contractions(&Multigraph::path(3), 2).unwrap();
        assert_eq!(census.total_loopless, 67);

        let point = Multigraph::new(1);
        let census = count_loopless_contractions(&point, 2).unwrap();
        assert_eq!(census.total_loopless, 2);
        assert_eq!(census.classes.len(), 2);

        assert!(count_loopless_contractions(&Multigraph::path(5), 3).is_err());
    }

    #[test]
    fn contraction_class_count_matches_brute_force_grouping() {
        let census = count_loopless_contractions(&Multigraph::path(3), 2).unwrap();
        // group representatives by brute-force isomorphism; every pair of
        // distinct classes must be non-isomorphic
        let reps: Vec<&Multigraph> = census
            .classes
            .values()
            .map(|c| &c.representative)
            .collect();
        for (i, a) in reps.iter().enumerate() {
            for b in reps.iter().skip(i + 1) {
                assert!(!isomorphic_brute(a, b));
            }
        }
        let total: u64 = census.classes.values().map(|c| c.count).sum();
        assert_eq!(total, 67);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = Multigraph::path(3).disjoint_power(2);
        let back = Multigraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);

        let bad = json!({"vertices": 2, "edges": [[1, 3, 1]]});
        assert!(Multigraph::from_json(&bad).is_err());
        let bad = json!({"vertices": 2, "edges": [[1, 2, 0]]});
        assert!(Multigraph::from_json(&bad).is_err());
        let bad = json!({"vertices": 0, "edges": []});
        assert!(Multigraph::from_json(&bad).is_err());
    }

    #[test]
    fn edge_count_is_conserved_by_contraction() {
        let g = Multigraph::path(3).disjoint_power(2);
        for pi in crate::setpart::enumerate_partitions(6).unwrap() {
            assert_eq!(
                g.contract(&pi).unwrap().total_multiplicity(),
                g.total_multiplicity()
            );
        }
    }
}
