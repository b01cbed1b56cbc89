//! Simple undirected graphs with block labels.
//!
//! Adjacency is stored in a compressed sparse layout: `offsets[u]..offsets[u + 1]`
//! indexes the ascending neighbor list of `u` inside `neighbors`. Blocks are
//! 0-based internally; text formats use 1-based block indices.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_stream;

const RHO_SUM_TOL: f64 = 1e-12;

/// Stochastic block model description `SBM(n, b, p_in, p_out, rho)`.
///
/// The block count `b` is `rho.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModelParams {
    pub n: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub rho: Vec<f64>,
}

impl BlockModelParams {
    pub fn new(n: usize, p_in: f64, p_out: f64, rho: Vec<f64>) -> Result<Self> {
        let params = BlockModelParams {
            n,
            p_in,
            p_out,
            rho,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn block_count(&self) -> usize {
        self.rho.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "node count must be positive"));
        }
        if self.rho.is_empty() {
            return Err(Error::param("rho", "at least one block is required"));
        }
        for (key, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(key, format!("{p} is not in [0, 1]")));
            }
        }
        if let Some(r) = self.rho.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::param(
                "rho",
                format!("block fraction {r} is negative"),
            ));
        }
        let total: f64 = self.rho.iter().sum();
        if (total - 1.0).abs() > RHO_SUM_TOL {
            return Err(Error::param(
                "rho",
                format!("fractions sum to {total}, not 1"),
            ));
        }
        self.block_sizes().map(|_| ())
    }

    /// `round(n * rho_i)` per block, with the largest block absorbing the
    /// rounding remainder.
    pub fn block_sizes(&self) -> Result<Vec<usize>> {
        let mut sizes: Vec<i64> = self
            .rho
            .iter()
            .map(|r| (self.n as f64 * r).round() as i64)
            .collect();
        let diff = self.n as i64 - sizes.iter().sum::<i64>();
        if diff != 0 {
            let largest = (0..sizes.len())
                .max_by(|&a, &b| {
                    self.rho[a]
                        .partial_cmp(&self.rho[b])
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .unwrap();
            sizes[largest] += diff;
            if sizes[largest] < 0 {
                return Err(Error::param(
                    "rho",
                    format!(
                        "rounded block sizes cannot be made to sum to n = {}",
                        self.n
                    ),
                ));
            }
        }
        Ok(sizes.into_iter().map(|s| s as usize).collect())
    }
}

/// Immutable simple undirected graph with a block label per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    block_of: Vec<u32>,
    block_count: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

/// Versioned on-disk form of a [`Graph`]. Blocks are stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub version: u32,
    pub n: usize,
    pub block_count: usize,
    pub blocks: Vec<u32>,
    pub offsets: Vec<usize>,
    pub neighbors: Vec<u32>,
}

pub const GRAPH_FORMAT_VERSION: u32 = 1;

impl Graph {
    /// Builds a graph from an undirected edge list. Self-loops and duplicate
    /// edges are dropped.
    pub fn from_edges(
        block_of: Vec<u32>,
        block_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = block_of.len();
        if let Some(b) = block_of.iter().find(|&&b| b as usize >= block_count) {
            return Err(Error::Format(format!(
                "block index {b} out of range for {block_count} blocks"
            )));
        }
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, w) in edges {
            if u >= n || w >= n {
                return Err(Error::NodeOutOfRange { node: u.max(w), n });
            }
            if u != w {
                adj[u].push(w as u32);
                adj[w].push(u as u32);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Ok(Graph {
            block_of,
            block_count,
            offsets,
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.block_of.len()
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Sum of degrees, `2m`.
    pub fn degree_sum(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|u| self.degree(u)).collect()
    }

    /// Ascending neighbor ids of `u`.
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn has_edge(&self, u: usize, w: usize) -> bool {
        self.neighbors(u).binary_search(&(w as u32)).is_ok()
    }

    pub fn block_of(&self, u: usize) -> usize {
        self.block_of[u] as usize
    }

    pub fn blocks(&self) -> &[u32] {
        &self.block_of
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.block_count];
        for &b in &self.block_of {
            sizes[b as usize] += 1;
        }
        sizes
    }

    /// Node ids of `block`, ascending.
    pub fn block_members(&self, block: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&u| self.block_of(u) == block)
            .collect()
    }

    /// Undirected edges `(u, w)` with `u < w`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&w| w as usize)
                .filter(move |&w| w > u)
                .map(move |w| (u, w))
        })
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            version: GRAPH_FORMAT_VERSION,
            n: self.node_count(),
            block_count: self.block_count,
            blocks: self.block_of.clone(),
            offsets: self.offsets.clone(),
            neighbors: self.neighbors.clone(),
        }
    }

    /// Validates a [`GraphFile`]: version, CSR shape, sorted simple symmetric
    /// adjacency.
    pub fn from_file(file: GraphFile) -> Result<Self> {
        if file.version != GRAPH_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported graph format version {}",
                file.version
            )));
        }
        let n = file.n;
        if file.blocks.len() != n || file.offsets.len() != n + 1 {
            return Err(Error::Format("array lengths do not match n".into()));
        }
        if file.offsets[0] != 0
            || file.offsets.windows(2).any(|w| w[0] > w[1])
            || file.offsets[n] != file.neighbors.len()
        {
            return Err(Error::Format("offsets are not a valid prefix sum".into()));
        }
        if file.blocks.iter().any(|&b| b as usize >= file.block_count) {
            return Err(Error::Format("block index out of range".into()));
        }
        let g = Graph {
            block_of: file.blocks,
            block_count: file.block_count,
            offsets: file.offsets,
            neighbors: file.neighbors,
        };
        for u in 0..n {
            let list = g.neighbors(u);
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!(
                    "neighbors of {u} not strictly ascending"
                )));
            }
            for &w in list {
                let w = w as usize;
                if w >= n || w == u || !g.has_edge(w, u) {
                    return Err(Error::Format(format!(
                        "adjacency not simple/symmetric at ({u}, {w})"
                    )));
                }
            }
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Graph::from_file(file)
    }
}

/// Samples `SBM(n, b, p_in, p_out, rho)` with contiguous block assignment.
///
/// Every unordered pair is an independent Bernoulli trial, so this is
/// `O(n^2)` and meant for dense desk-scale graphs.
pub fn generate_sbm(params: &BlockModelParams, seed: u64) -> Result<Graph> {
    params.validate()?;
    let sizes = params.block_sizes()?;
    let n = params.n;
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat_n(b as u32, size));
    }

    let mut rng = derive_stream(seed, &[]);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for u in 0..n {
        for w in (u + 1)..n {
            let p = if block_of[u] == block_of[w] {
                params.p_in
            } else {
                params.p_out
            };
            if rng.random::<f64>() < p {
                adj[u].push(w as u32);
                adj[w].push(u as u32);
            }
        }
    }
    // u iterates ascending, so every list is already sorted
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::new();
    offsets.push(0);
    for list in adj {
        neighbors.extend(list);
        offsets.push(neighbors.len());
    }
    Ok(Graph {
        block_of,
        block_count: params.block_count(),
        offsets,
        neighbors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Nodes with degree below this are removed.
    pub min_degree: usize,
    /// Repeat pruning until no node falls below `min_degree`.
    pub iterative: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_degree: 2,
            iterative: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneStats {
    pub raw_edge_lines: usize,
    pub self_loops: usize,
    pub duplicate_edges: usize,
    pub nodes_before_pruning: usize,
    pub edges_before_pruning: usize,
    pub pruning_rounds: usize,
    pub nodes_removed: usize,
    pub edges_removed: usize,
}

/// A loaded graph plus the dense-id to original-id map.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// `original_ids[dense]` is the id used in the input.
    pub original_ids: Vec<String>,
    pub stats: PruneStats,
}

/// Builds a graph from an edge stream and 1-based block labels.
///
/// Self-loops are dropped, duplicate edges collapse, low-degree nodes are
/// pruned per `opts`. Surviving nodes get dense ids ordered by original id
/// (numerically when every id is an integer, lexicographically otherwise), so
/// reloading the emitted edge list reproduces the same graph.
pub fn load_partitioned_edge_list<I, S>(
    edges: I,
    labels: &HashMap<String, usize>,
    opts: IngestOptions,
) -> Result<LoadedGraph>
where
    I: IntoIterator<Item = (S, S)>,
    S: AsRef<str>,
{
    let mut stats = PruneStats::default();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut intern = |s: &str| -> usize {
        if let Some(&i) = ids.get(s) {
            return i;
        }
        ids.insert(s.to_owned(), names.len());
        names.push(s.to_owned());
        names.len() - 1
    };
    let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (a, b) in edges {
        stats.raw_edge_lines += 1;
        let (u, w) = (intern(a.as_ref()), intern(b.as_ref()));
        if u == w {
            stats.self_loops += 1;
            continue;
        }
        if !edge_set.insert((u.min(w), u.max(w))) {
            stats.duplicate_edges += 1;
        }
    }
    if edge_set.is_empty() {
        return Err(Error::Ingestion("edge set is empty".into()));
    }

    let mut missing: Vec<String> = names
        .iter()
        .filter(|s| !labels.contains_key(s.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::Unlabeled(missing));
    }
    if let Some((id, _)) = names
        .iter()
        .map(|s| (s, labels[s.as_str()]))
        .find(|(_, b)| *b == 0)
    {
        return Err(Error::Ingestion(format!(
            "block labels are 1-based; node {id} has label 0"
        )));
    }

    let n0 = names.len();
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n0];
    for &(u, w) in &edge_set {
        adj[u].insert(w);
        adj[w].insert(u);
    }
    stats.nodes_before_pruning = n0;
    stats.edges_before_pruning = edge_set.len();

    let mut alive = vec![true; n0];
    loop {
        let doomed: Vec<usize> = (0..n0)
            .filter(|&u| alive[u] && adj[u].len() < opts.min_degree)
            .collect();
        if doomed.is_empty() {
            break;
        }
        stats.pruning_rounds += 1;
        for &u in &doomed {
            alive[u] = false;
        }
        for &u in &doomed {
            for w in std::mem::take(&mut adj[u]) {
                if adj[w].remove(&u) {
                    stats.edges_removed += 1;
                }
            }
        }
        stats.nodes_removed += doomed.len();
        if !opts.iterative {
            break;
        }
    }

    let mut survivors: Vec<usize> = (0..n0).filter(|&u| alive[u]).collect();
    if survivors.is_empty() {
        return Err(Error::Ingestion(format!(
            "no nodes left after pruning to minimum degree {}",
            opts.min_degree
        )));
    }
    let numeric: Option<Vec<u64>> = survivors.iter().map(|&u| names[u].parse().ok()).collect();
    match numeric {
        Some(keys) => {
            let mut keyed: Vec<(u64, usize)> = keys.into_iter().zip(survivors).collect();
            keyed.sort_unstable();
            survivors = keyed.into_iter().map(|(_, u)| u).collect();
        }
        None => survivors.sort_by(|&a, &b| names[a].cmp(&names[b])),
    }
    let mut dense = vec![usize::MAX; n0];
    for (i, &u) in survivors.iter().enumerate() {
        dense[u] = i;
    }

    let block_of: Vec<u32> = survivors
        .iter()
        .map(|&u| (labels[names[u].as_str()] - 1) as u32)
        .collect();
    let block_count = block_of.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
    let dense_edges = survivors.iter().flat_map(|&u| {
        adj[u]
            .iter()
            .filter(move |&&w| w > u)
            .map(|&w| (dense[u], dense[w]))
            .collect::<Vec<_>>()
    });
    let graph = Graph::from_edges(block_of, block_count, dense_edges)?;
    let original_ids = survivors.iter().map(|&u| names[u].clone()).collect();
    Ok(LoadedGraph {
        graph,
        original_ids,
        stats,
    })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Reads whitespace-separated node pairs, one per line; `#` starts a comment.
pub fn read_edge_list(reader: impl BufRead) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Ingestion(e.to_string()))?;
        let mut fields = strip_comment(&line).split_whitespace();
        match (fields.next(), fields.next()) {
            (None, _) => continue,
            (Some(a), Some(b)) => edges.push((a.to_owned(), b.to_owned())),
            (Some(_), None) => {
                return Err(Error::Ingestion(format!(
                    "line {}: expected two node ids",
                    lineno + 1
                )))
            }
        }
    }
    Ok(edges)
}

/// Reads `node block` lines with 1-based block indices.
pub fn read_labels(reader: impl BufRead) -> Result<HashMap<String, usize>> {
    let mut labels = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Ingestion(e.to_string()))?;
        let mut fields = strip_comment(&line).split_whitespace();
        let Some(node) = fields.next() else { continue };
        let block = fields
            .next()
            .and_then(|b| b.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::Ingestion(format!("line {}: expected `node block`", lineno + 1))
            })?;
        labels.insert(node.to_owned(), block);
    }
    Ok(labels)
}

/// Extracts edges and labels from a GML file whose nodes carry an integer
/// `value` attribute (0-based class, as in the usual Political Blogs
/// release). Labels are returned 1-based.
pub fn read_gml(text: &str) -> Result<(Vec<(String, String)>, HashMap<String, usize>)> {
    let tokens = gml_tokens(text);
    let mut edges = Vec::new();
    let mut labels = HashMap::new();
    let mut i = 0;
    while i < tokens.len() {
        let kind = tokens[i].as_str();
        if (kind == "node" || kind == "edge") && tokens.get(i + 1).map(String::as_str) == Some("[")
        {
            let mut depth = 0;
            let mut j = i + 1;
            let mut attrs: HashMap<&str, &str> = HashMap::new();
            loop {
                let Some(t) = tokens.get(j) else {
                    return Err(Error::Ingestion("unterminated GML record".into()));
                };
                match t.as_str() {
                    "[" => depth += 1,
                    "]" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    key if depth == 1 => {
                        if let Some(v) = tokens.get(j + 1).filter(|v| v.as_str() != "[") {
                            attrs.entry(key).or_insert(v.as_str());
                            j += 1;
                        }
                    }
                    _ => {}
                }
                j += 1;
            }
            if kind == "node" {
                let id = attrs
                    .get("id")
                    .ok_or_else(|| Error::Ingestion("GML node without id".into()))?;
                if let Some(v) = attrs.get("value") {
                    let class: usize = v
                        .parse()
                        .map_err(|_| Error::Ingestion(format!("bad GML value `{v}`")))?;
                    labels.insert((*id).to_owned(), class + 1);
                }
            } else {
                match (attrs.get("source"), attrs.get("target")) {
                    (Some(s), Some(t)) => edges.push(((*s).to_owned(), (*t).to_owned())),
                    _ => return Err(Error::Ingestion("GML edge without source/target".into())),
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok((edges, labels))
}

fn gml_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '[' || c == ']' {
            tokens.push(c.to_string());
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut s = String::from("\"");
            for c in chars.by_ref() {
                if c == '"' {
                    break;
                }
                s.push(c);
            }
            s.push('"');
            tokens.push(s);
        } else {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '[' || c == ']' {
                    break;
                }
                s.push(c);
                chars.next();
            }
            tokens.push(s);
        }
    }
    tokens
}

/// Which normalization [`estimate_block_probs`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Edge count divided by the number of candidate node pairs.
    #[default]
    PerPair,
    /// Fraction of all edges that are intra- or inter-block.
    EdgeFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockProbEstimate {
    pub estimator: Estimator,
    pub p_in_hat: f64,
    pub p_out_hat: f64,
    pub rho_hat: Vec<f64>,
    pub intra_edges: usize,
    pub inter_edges: usize,
}

/// Empirical block probabilities.
///
/// With [`Estimator::PerPair`], `p_out_hat` is 0 when the graph has a single
/// non-empty block (there are no inter-block pairs to observe).
pub fn estimate_block_probs(g: &Graph, estimator: Estimator) -> Result<BlockProbEstimate> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::Estimation("need at least two nodes".into()));
    }
    let (mut intra, mut inter) = (0usize, 0usize);
    for (u, w) in g.edges() {
        if g.block_of(u) == g.block_of(w) {
            intra += 1;
        } else {
            inter += 1;
        }
    }
    let sizes = g.block_sizes();
    let rho_hat: Vec<f64> = sizes.iter().map(|&s| s as f64 / n as f64).collect();
    let (p_in_hat, p_out_hat) = match estimator {
        Estimator::PerPair => {
            let intra_pairs: f64 = sizes
                .iter()
                .map(|&s| (s * s.saturating_sub(1) / 2) as f64)
                .sum();
            if intra_pairs == 0.0 {
                return Err(Error::Estimation(
                    "every block has fewer than two nodes; p_in is unidentifiable".into(),
                ));
            }
            let total_pairs = (n * (n - 1) / 2) as f64;
            let inter_pairs = total_pairs - intra_pairs;
            let p_out = if inter_pairs > 0.0 {
                inter as f64 / inter_pairs
            } else {
                0.0
            };
            (intra as f64 / intra_pairs, p_out)
        }
        Estimator::EdgeFraction => {
            let m = g.edge_count();
            if m == 0 {
                return Err(Error::Estimation("graph has no edges".into()));
            }
            (intra as f64 / m as f64, inter as f64 / m as f64)
        }
    };
    Ok(BlockProbEstimate {
        estimator,
        p_in_hat,
        p_out_hat,
        rho_hat,
        intra_edges: intra,
        inter_edges: inter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pairs: &[(&str, usize)]) -> HashMap<String, usize> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn no_pruning() -> IngestOptions {
        IngestOptions {
            min_degree: 0,
            iterative: true,
        }
    }

    #[test]
    fn degenerate_sbm_is_two_cliques() {
        let params = BlockModelParams::new(4, 1.0, 0.0, vec![0.5, 0.5]).unwrap();
        let g = generate_sbm(&params, 1).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
        assert_eq!(g.blocks(), &[0, 0, 1, 1]);
        let est = estimate_block_probs(&g, Estimator::PerPair).unwrap();
        assert_eq!((est.p_in_hat, est.p_out_hat), (1.0, 0.0));
    }

    #[test]
    fn sbm_is_deterministic_per_seed() {
        let params = BlockModelParams::new(3, 0.5, 0.3, vec![1.0]).unwrap();
        let a = generate_sbm(&params, 42).unwrap();
        let b = generate_sbm(&params, 42).unwrap();
        assert_eq!(a, b);
        let big = BlockModelParams::new(60, 0.5, 0.3, vec![0.5, 0.5]).unwrap();
        assert_ne!(
            generate_sbm(&big, 1).unwrap(),
            generate_sbm(&big, 2).unwrap()
        );
    }

    #[test]
    fn block_sizes_absorb_remainder_in_largest_block() {
        let p = BlockModelParams::new(10, 0.5, 0.5, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert_eq!(p.block_sizes().unwrap(), vec![4, 3, 3]);
        let p = BlockModelParams::new(2000, 0.8, 0.2, vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(p.block_sizes().unwrap(), vec![1000, 0, 1000]);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(BlockModelParams::new(0, 0.5, 0.5, vec![1.0]).is_err());
        assert!(BlockModelParams::new(5, 1.5, 0.5, vec![1.0]).is_err());
        assert!(BlockModelParams::new(5, 0.5, -0.1, vec![1.0]).is_err());
        assert!(BlockModelParams::new(5, 0.5, 0.5, vec![0.5, 0.4]).is_err());
        assert!(BlockModelParams::new(5, 0.5, 0.5, vec![1.2, -0.2]).is_err());
        // p_out > p_in is allowed
        assert!(BlockModelParams::new(5, 0.1, 0.9, vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn self_loops_and_duplicates_collapse() {
        let edges = [("a", "a"), ("a", "b"), ("a", "b")];
        let loaded =
            load_partitioned_edge_list(edges, &labels(&[("a", 1), ("b", 1)]), no_pruning())
                .unwrap();
        assert_eq!(loaded.graph.node_count(), 2);
        assert_eq!(loaded.graph.edge_count(), 1);
        assert_eq!(loaded.stats.self_loops, 1);
        assert_eq!(loaded.stats.duplicate_edges, 1);
        assert_eq!(loaded.original_ids, vec!["a", "b"]);
    }

    #[test]
    fn iterative_pruning_can_empty_a_path() {
        let edges = [("a", "b"), ("b", "c")];
        let l = labels(&[("a", 1), ("b", 1), ("c", 1)]);
        let err = load_partitioned_edge_list(edges, &l, IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Ingestion(_)));
    }

    #[test]
    fn single_pass_pruning_differs_from_iterative() {
        // triangle a-b-c with a tail c-d-e
        let edges = [("a", "b"), ("b", "c"), ("c", "a"), ("c", "d"), ("d", "e")];
        let l = labels(&[("a", 1), ("b", 1), ("c", 1), ("d", 2), ("e", 2)]);
        let it = load_partitioned_edge_list(edges, &l, IngestOptions::default()).unwrap();
        assert_eq!(it.graph.node_count(), 3);
        assert_eq!(it.stats.pruning_rounds, 2);
        let single = IngestOptions {
            min_degree: 2,
            iterative: false,
        };
        let sp = load_partitioned_edge_list(edges, &l, single).unwrap();
        assert_eq!(sp.graph.node_count(), 4);
        assert_eq!(sp.graph.edge_count(), 4);
        assert_eq!(sp.graph.degree(3), 1);
    }

    #[test]
    fn unlabeled_nodes_are_listed() {
        let err = load_partitioned_edge_list(
            [("x", "y"), ("y", "z")],
            &labels(&[("y", 1)]),
            no_pruning(),
        )
        .unwrap_err();
        assert_eq!(err, Error::Unlabeled(vec!["x".into(), "z".into()]));
    }

    #[test]
    fn empty_edge_set_is_an_error() {
        let edges: Vec<(String, String)> = Vec::new();
        assert!(matches!(
            load_partitioned_edge_list(edges, &HashMap::new(), no_pruning()),
            Err(Error::Ingestion(_))
        ));
    }

    #[test]
    fn numeric_ids_are_ordered_numerically() {
        let edges = [("10", "2"), ("2", "9")];
        let l = labels(&[("10", 1), ("2", 2), ("9", 1)]);
        let loaded = load_partitioned_edge_list(edges, &l, no_pruning()).unwrap();
        assert_eq!(loaded.original_ids, vec!["2", "9", "10"]);
        assert_eq!(loaded.graph.blocks(), &[1, 0, 0]);
    }

    #[test]
    fn triangle_estimates() {
        let g = Graph::from_edges(vec![0, 0, 1], 2, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let est = estimate_block_probs(&g, Estimator::PerPair).unwrap();
        assert_eq!(est.p_in_hat, 1.0);
        assert_eq!(est.p_out_hat, 1.0);
        let frac = estimate_block_probs(&g, Estimator::EdgeFraction).unwrap();
        assert!((frac.p_in_hat - 1.0 / 3.0).abs() < 1e-15);
        assert!((frac.p_out_hat - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn estimation_needs_an_intra_pair() {
        let g = Graph::from_edges(vec![0, 1], 2, [(0, 1)]).unwrap();
        assert!(matches!(
            estimate_block_probs(&g, Estimator::PerPair),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let params = BlockModelParams::new(30, 0.4, 0.1, vec![0.5, 0.5]).unwrap();
        let g = generate_sbm(&params, 3).unwrap();
        assert_eq!(Graph::from_json(&g.to_json()).unwrap(), g);

        let mut file = g.to_file();
        file.neighbors[0] = file.neighbors[1];
        assert!(Graph::from_file(file).is_err());
        let mut file = g.to_file();
        file.version = 99;
        assert!(Graph::from_file(file).is_err());
    }

    #[test]
    fn text_readers() {
        let edges = read_edge_list("# header\n1 2\n\n2 3 # trailing\n".as_bytes()).unwrap();
        assert_eq!(
            edges,
            vec![("1".into(), "2".into()), ("2".into(), "3".into())]
        );
        assert!(read_edge_list("1\n".as_bytes()).is_err());
        let l = read_labels("1 1\n2 2\n".as_bytes()).unwrap();
        assert_eq!(l["2"], 2);
    }

    #[test]
    fn gml_reader() {
        let text = r#"graph [
          directed 1
          node [ id 1 label "a.com" value 0 source "x" ]
          node [ id 2 label "b.com" value 1 ]
          edge [ source 1 target 2 ]
          edge [ source 2 target 2 ]
        ]"#;
        let (edges, labels) = read_gml(text).unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(labels["1"], 1);
        assert_eq!(labels["2"], 2);
    }
}
