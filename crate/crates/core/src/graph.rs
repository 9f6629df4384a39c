//! Undirected interference networks, k-step neighborhoods, reference groups,
//! effective treatments and informative sets.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{Arm, Assignment, Design};
use crate::error::{LabError, Result};

/// A simple undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphSpec", into = "GraphSpec")]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

/// JSON form used in run configs: `{"n": 3, "edges": [[0, 1], [1, 2]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphSpec> for Graph {
    type Error = LabError;

    fn try_from(spec: GraphSpec) -> Result<Self> {
        Graph::new(spec.n, &spec.edges)
    }
}

impl From<Graph> for GraphSpec {
    fn from(g: Graph) -> Self {
        GraphSpec { n: g.n, edges: g.edges().collect() }
    }
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(LabError::InvalidArgument(format!(
                    "edge ({u}, {v}) has an endpoint outside [0, {n})"
                )));
            }
            if u == v {
                return Err(LabError::InvalidArgument(format!("self-loop on node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(LabError::InvalidArgument(format!("duplicate edge ({u}, {v})")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph { n, adj })
    }

    pub fn empty(n: usize) -> Self {
        Graph { n, adj: vec![Vec::new(); n] }
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Graph { n, adj }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(n, &edges).expect("path edges are valid")
    }

    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Graph::new(n, &edges).expect("star edges are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Parses the plain-text graph format: a first line holding `N`, then one
    /// whitespace-separated `u v` pair per line. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| LabError::Parse("graph file is empty".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| LabError::Parse(format!("bad node count {header:?}")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| LabError::Parse(format!("bad node id {s:?} on edge line {}", lineno + 1)))
            };
            match fields.as_slice() {
                [u, v] => edges.push((parse(u)?, parse(v)?)),
                _ => {
                    return Err(LabError::Parse(format!(
                        "edge line {} must hold exactly two node ids: {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Graph::new(n, &edges).map_err(|e| match e {
            LabError::InvalidArgument(msg) => LabError::Parse(msg),
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Graph::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(LabError::InvalidArgument(format!(
                "node {i} out of range for a graph on {} nodes",
                self.n
            )));
        }
        Ok(())
    }

    /// Closed ball of radius `k` around `i`, ascending.
    pub fn k_step_neighborhood(&self, i: usize, k: usize) -> Result<Vec<usize>> {
        self.check_node(i)?;
        let mut dist = vec![usize::MAX; self.n];
        dist[i] = 0;
        let mut queue = VecDeque::from([i]);
        let mut ball = vec![i];
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    ball.push(v);
                    queue.push_back(v);
                }
            }
        }
        ball.sort_unstable();
        Ok(ball)
    }
}

/// Precomputed closed k-step neighborhoods for every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodIndex {
    k: usize,
    closed_nbhd: Vec<Vec<usize>>,
}

impl NeighborhoodIndex {
    pub fn build(graph: &Graph, k: usize) -> Self {
        let closed_nbhd = (0..graph.n())
            .map(|i| graph.k_step_neighborhood(i, k).expect("node in range"))
            .collect();
        NeighborhoodIndex { k, closed_nbhd }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.closed_nbhd.len()
    }

    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.closed_nbhd[i]
    }

    pub fn max_size(&self) -> usize {
        self.closed_nbhd.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `|N_i ∩ N_j|` by merging the two sorted lists.
    pub fn overlap(&self, i: usize, j: usize) -> usize {
        let (a, b) = (&self.closed_nbhd[i], &self.closed_nbhd[j]);
        let (mut x, mut y, mut count) = (0, 0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        count
    }

    /// True iff every unit of `N_i` is on `arm` under `z`.
    pub fn is_exposed(&self, i: usize, z: &Assignment, arm: Arm) -> bool {
        z.all_on(&self.closed_nbhd[i], arm)
    }
}

/// How far interference reaches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterferenceStructure {
    NoInterference { n: usize },
    KLocal { graph: Graph, index: NeighborhoodIndex },
    Arbitrary { n: usize },
}

impl InterferenceStructure {
    pub fn k_local(graph: Graph, k: usize) -> Self {
        let index = NeighborhoodIndex::build(&graph, k);
        InterferenceStructure::KLocal { graph, index }
    }

    pub fn n(&self) -> usize {
        match self {
            InterferenceStructure::NoInterference { n } | InterferenceStructure::Arbitrary { n } => *n,
            InterferenceStructure::KLocal { graph, .. } => graph.n(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InterferenceStructure::NoInterference { .. } => "no_interference",
            InterferenceStructure::KLocal { .. } => "k_local",
            InterferenceStructure::Arbitrary { .. } => "arbitrary",
        }
    }

    pub fn index(&self) -> Option<&NeighborhoodIndex> {
        match self {
            InterferenceStructure::KLocal { index, .. } => Some(index),
            _ => None,
        }
    }

    /// `G_i`: the smallest unit set determining unit `i`'s outcome, ascending.
    pub fn reference_group(&self, i: usize) -> Vec<usize> {
        match self {
            InterferenceStructure::NoInterference { .. } => vec![i],
            InterferenceStructure::KLocal { index, .. } => index.neighborhood(i).to_vec(),
            InterferenceStructure::Arbitrary { n } => (0..*n).collect(),
        }
    }

    pub fn group_size(&self, i: usize) -> usize {
        match self {
            InterferenceStructure::NoInterference { .. } => 1,
            InterferenceStructure::KLocal { index, .. } => index.neighborhood(i).len(),
            InterferenceStructure::Arbitrary { n } => *n,
        }
    }

    /// `z` restricted to `G_i`, in ascending node order.
    pub fn effective_treatment(&self, i: usize, z: &Assignment) -> Vec<Arm> {
        self.reference_group(i).into_iter().map(|u| z.arm(u)).collect()
    }

    /// `E_i = 2^{|G_i|}`.
    pub fn effective_treatment_count(&self, i: usize) -> u128 {
        1u128 << self.group_size(i)
    }

    /// Size of the informative set and the informative fraction under BD.
    ///
    /// Both are independent of `z`: `S_i = 2^{N - |G_i|}`, `F_i = 1 / E_i`.
    pub fn informative_set(&self, design: &Design, i: usize, z: &Assignment) -> Result<(u128, f64)> {
        if !design.is_bernoulli() {
            return Err(LabError::UnsupportedDesign(format!(
                "informative-set identities are stated for bd, not {}",
                design.name()
            )));
        }
        if z.len() != self.n() || design.n() != self.n() {
            return Err(LabError::InvalidArgument("dimension mismatch".into()));
        }
        let g = self.group_size(i);
        let size = 1u128 << (self.n() - g);
        let fraction = 0.5f64.powi(g as i32);
        Ok((size, fraction))
    }
}
