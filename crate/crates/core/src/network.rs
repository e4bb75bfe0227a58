//! Undirected communication graphs, their Laplacians and the consensus norm.
//!
//! The lifted Laplacian `W = L (x) I_n` is never formed; every operation works
//! block-wise on stacked `m * n` vectors.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Erdos-Renyi draws attempted before disconnected components get bridged.
pub const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Star,
    Cycle,
    Complete,
    ErdosRenyi,
    Path,
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "star" => GraphKind::Star,
            "cycle" => GraphKind::Cycle,
            "complete" => GraphKind::Complete,
            "erdos_renyi" | "erdos-renyi" | "er" => GraphKind::ErdosRenyi,
            "path" => GraphKind::Path,
            other => return Err(Error::InvalidParameter(format!("unknown graph kind `{other}`"))),
        })
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Star => "star",
            GraphKind::Cycle => "cycle",
            GraphKind::Complete => "complete",
            GraphKind::ErdosRenyi => "erdos_renyi",
            GraphKind::Path => "path",
        })
    }
}

/// How a random graph was obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphMeta {
    /// Rejected disconnected draws.
    pub resamples: usize,
    /// Edges added to join components after [`MAX_RESAMPLES`] failed draws.
    pub bridge_edges: usize,
}

/// Connected undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    m: usize,
    /// Sorted `(i, j)` with `i < j`.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    pub meta: GraphMeta,
}

impl NetworkGraph {
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = Self::build(m, edges)?;
        if !g.is_connected() {
            return Err(Error::InvalidParameter("graph is not connected".into()));
        }
        Ok(g)
    }

    fn build(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= m || b >= m {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {m} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut adjacency = vec![Vec::new(); m];
        for &(a, b) in &norm {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        Ok(NetworkGraph {
            m,
            edges: norm,
            adjacency,
            meta: GraphMeta::default(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.m && self.adjacency[a].binary_search(&b).is_ok()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.m];
        let mut out = Vec::new();
        for start in 0..self.m {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// BFS from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Text edge list: node count on the first line, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.m);
        for (a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing node count".into(),
        })?;
        let m: usize = first.parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("invalid node count `{first}`"),
        })?;
        if m > 1_000_000 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("node count {m} too large"),
            });
        }
        let mut edges = Vec::new();
        for (ln, line) in lines {
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize> {
                let tok = it.next().ok_or(Error::Parse {
                    line: ln,
                    msg: "expected two node indices".into(),
                })?;
                tok.parse().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("invalid node index `{tok}`"),
                })
            };
            let (a, b) = (next()?, next()?);
            if it.next().is_some() {
                return Err(Error::Parse {
                    line: ln,
                    msg: "trailing tokens".into(),
                });
            }
            edges.push((a, b));
        }
        Self::from_edges(m, &edges)
    }
}

/// Deterministic topology generator; `edge_prob` is required for Erdos-Renyi only.
pub fn generate_graph(
    kind: GraphKind,
    m: usize,
    edge_prob: Option<f64>,
    seed: u64,
) -> Result<NetworkGraph> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    match (kind, edge_prob) {
        (GraphKind::ErdosRenyi, Some(p)) if p > 0.0 && p <= 1.0 => {}
        (GraphKind::ErdosRenyi, _) => {
            return Err(Error::InvalidParameter(
                "erdos_renyi requires edge_prob in (0, 1]".into(),
            ))
        }
        (_, Some(_)) => {
            return Err(Error::InvalidParameter(format!(
                "edge_prob only applies to erdos_renyi, not {kind}"
            )))
        }
        _ => {}
    }
    let edges: Vec<(usize, usize)> = match kind {
        GraphKind::Star => (1..m).map(|i| (0, i)).collect(),
        GraphKind::Path => (1..m).map(|i| (i - 1, i)).collect(),
        GraphKind::Cycle => {
            let mut e: Vec<_> = (1..m).map(|i| (i - 1, i)).collect();
            if m > 2 {
                e.push((0, m - 1));
            }
            e
        }
        GraphKind::Complete => (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect(),
        GraphKind::ErdosRenyi => return erdos_renyi(m, edge_prob.unwrap_or(1.0), seed),
    };
    NetworkGraph::from_edges(m, &edges)
}

fn erdos_renyi(m: usize, p: f64, seed: u64) -> Result<NetworkGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let edges: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .filter(|_| rng.random::<f64>() < p)
            .collect();
        NetworkGraph::build(m, &edges)
    };
    let mut graph = draw(&mut rng)?;
    let mut resamples = 0;
    while !graph.is_connected() && resamples < MAX_RESAMPLES {
        resamples += 1;
        graph = draw(&mut rng)?;
    }
    let mut bridge_edges = 0;
    let comps = graph.components();
    if comps.len() > 1 {
        let mut edges = graph.edges.clone();
        for pair in comps.windows(2) {
            let a = pair[0][rng.random_range(0..pair[0].len())];
            let b = pair[1][rng.random_range(0..pair[1].len())];
            edges.push((a, b));
            bridge_edges += 1;
        }
        graph = NetworkGraph::build(m, &edges)?;
    }
    debug_assert!(graph.is_connected());
    graph.meta = GraphMeta {
        resamples,
        bridge_edges,
    };
    Ok(graph)
}

/// Graph Laplacian `D - A` together with the neighbor structure it came from.
#[derive(Debug, Clone)]
pub struct Laplacian {
    matrix: Array2<f64>,
    degrees: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    d_max: usize,
    d_min: usize,
}

/// One agent's row of the Laplacian: its degree and neighbor indices.
#[derive(Debug, Clone, Copy)]
pub struct LaplacianRow<'a> {
    pub agent: usize,
    pub degree: usize,
    pub neighbors: &'a [usize],
}

pub fn laplacian(graph: &NetworkGraph) -> Laplacian {
    let m = graph.node_count();
    let mut matrix = Array2::zeros((m, m));
    for &(a, b) in graph.edges() {
        matrix[[a, b]] = -1.0;
        matrix[[b, a]] = -1.0;
    }
    let degrees: Vec<usize> = (0..m).map(|i| graph.degree(i)).collect();
    for (i, &d) in degrees.iter().enumerate() {
        matrix[[i, i]] = d as f64;
    }
    let (d_max, d_min) = degree_extremes(graph);
    Laplacian {
        matrix,
        neighbors: (0..m).map(|i| graph.neighbors(i).to_vec()).collect(),
        edges: graph.edges().to_vec(),
        degrees,
        d_max,
        d_min,
    }
}

pub fn degree_extremes(graph: &NetworkGraph) -> (usize, usize) {
    let degs = (0..graph.node_count()).map(|i| graph.degree(i));
    (
        degs.clone().max().unwrap_or(0),
        degs.min().unwrap_or(0),
    )
}

impl Laplacian {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn node_count(&self) -> usize {
        self.degrees.len()
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn row(&self, agent: usize) -> LaplacianRow<'_> {
        LaplacianRow {
            agent,
            degree: self.degrees[agent],
            neighbors: &self.neighbors[agent],
        }
    }

    fn check_len(&self, p: &[f64]) -> Result<usize> {
        let m = self.node_count();
        if p.is_empty() || p.len() % m != 0 {
            return Err(Error::DimensionMismatch {
                expected: m * (p.len() / m).max(1),
                got: p.len(),
            });
        }
        Ok(p.len() / m)
    }

    /// `p^T (L (x) I_n) p` evaluated row by row.
    pub fn quadratic_form(&self, p: &[f64]) -> Result<f64> {
        let n = self.check_len(p)?;
        let block = |i: usize| &p[i * n..(i + 1) * n];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        Ok((0..self.node_count())
            .map(|i| {
                let pi = block(i);
                self.degrees[i] as f64 * dot(pi, pi)
                    - self.neighbors[i].iter().map(|&j| dot(pi, block(j))).sum::<f64>()
            })
            .sum())
    }
}

/// `|sqrt(W) p|_2`, computed as the square root of the sum of squared edge differences.
pub fn consensus_norm(p_stacked: &[f64], lap: &Laplacian) -> Result<f64> {
    let n = lap.check_len(p_stacked)?;
    let block = |i: usize| &p_stacked[i * n..(i + 1) * n];
    let sq: f64 = lap
        .edges
        .iter()
        .map(|&(a, b)| {
            block(a)
                .iter()
                .zip(block(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum();
    Ok(sq.sqrt())
}

/// Smoothness `d_max / gamma` of the lifted dual.
pub fn smoothness_constant(lap: &Laplacian, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::NonPositiveGamma(gamma));
    }
    Ok(lap.d_max as f64 / gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn sqrt_laplacian(lap: &Laplacian) -> DMatrix<f64> {
        let m = lap.node_count();
        let dm = DMatrix::from_fn(m, m, |i, j| lap.matrix()[[i, j]]);
        let eig = dm.symmetric_eigen();
        let sq = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&sq) * eig.eigenvectors.transpose()
    }

    #[test]
    fn degree_examples() {
        let g = generate_graph(GraphKind::Cycle, 5, None, 0).unwrap();
        assert!((0..5).all(|i| g.degree(i) == 2));
        assert_eq!(degree_extremes(&g), (2, 2));
        let g = generate_graph(GraphKind::Complete, 4, None, 0).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert!((0..4).all(|i| g.degree(i) == 3));
        let star = generate_graph(GraphKind::Star, 10, None, 0).unwrap();
        assert_eq!(degree_extremes(&star), (9, 1));
        let cyc = generate_graph(GraphKind::Cycle, 7, None, 0).unwrap();
        assert_eq!(degree_extremes(&cyc), (2, 2));
        let k50 = generate_graph(GraphKind::Complete, 50, None, 0).unwrap();
        assert_eq!(degree_extremes(&k50), (49, 49));
    }

    #[test]
    fn erdos_renyi_thousand_nodes_is_connected() {
        let g = generate_graph(GraphKind::ErdosRenyi, 1000, Some(4.0 / 1000.0), 7).unwrap();
        assert!(g.is_connected());
        assert_eq!(g.meta.resamples, MAX_RESAMPLES);
        assert!(g.meta.bridge_edges > 0);
        let again = generate_graph(GraphKind::ErdosRenyi, 1000, Some(4.0 / 1000.0), 7).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn erdos_renyi_dense_needs_no_bridges() {
        let g = generate_graph(GraphKind::ErdosRenyi, 30, Some(0.3), 1).unwrap();
        assert!(g.is_connected());
        assert_eq!(g.meta.bridge_edges, 0);
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        assert!(generate_graph(GraphKind::ErdosRenyi, 5, None, 0).is_err());
        assert!(generate_graph(GraphKind::ErdosRenyi, 5, Some(0.0), 0).is_err());
        assert!(generate_graph(GraphKind::ErdosRenyi, 5, Some(1.5), 0).is_err());
        assert!(generate_graph(GraphKind::Star, 5, Some(0.5), 0).is_err());
        assert!(generate_graph(GraphKind::Star, 0, None, 0).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let lap = laplacian(&generate_graph(GraphKind::Complete, 3, None, 0).unwrap());
        let expect = ndarray::arr2(&[[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]);
        assert_eq!(lap.matrix(), &expect);
        let lap = laplacian(&generate_graph(GraphKind::Star, 4, None, 0).unwrap());
        assert_eq!(lap.matrix().diag().to_vec(), vec![3.0, 1.0, 1.0, 1.0]);
        assert_eq!((lap.d_max(), lap.d_min()), (3, 1));
        for row in lap.matrix().rows() {
            assert_eq!(row.sum(), 0.0);
        }
    }

    #[test]
    fn consensus_examples() {
        let lap = laplacian(&generate_graph(GraphKind::Path, 2, None, 0).unwrap());
        let v = consensus_norm(&[1.0, 0.0, 0.0, 1.0], &lap).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        let lap = laplacian(&generate_graph(GraphKind::Cycle, 4, None, 0).unwrap());
        let same: Vec<f64> = [0.2, 0.3, 0.5].repeat(4);
        assert_eq!(consensus_norm(&same, &lap).unwrap(), 0.0);
        assert!(matches!(
            consensus_norm(&[0.0; 5], &lap),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn smoothness_examples() {
        let l = |k, m| laplacian(&generate_graph(k, m, None, 0).unwrap());
        assert_eq!(smoothness_constant(&l(GraphKind::Complete, 5), 1.0).unwrap(), 4.0);
        assert!((smoothness_constant(&l(GraphKind::Star, 4), 0.1).unwrap() - 30.0).abs() < 1e-12);
        assert!((smoothness_constant(&l(GraphKind::Cycle, 6), 0.1).unwrap() - 20.0).abs() < 1e-12);
        assert!(smoothness_constant(&l(GraphKind::Cycle, 6), 0.0).is_err());
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = generate_graph(GraphKind::ErdosRenyi, 12, Some(0.4), 3).unwrap();
        let text = g.to_edge_list();
        let back = NetworkGraph::parse_edge_list(&text).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert!(NetworkGraph::parse_edge_list("").is_err());
        assert!(NetworkGraph::parse_edge_list("3\n0 1\n").is_err()); // disconnected
        assert!(NetworkGraph::parse_edge_list("2\n0 0\n").is_err());
        assert!(NetworkGraph::parse_edge_list("2\n0 1\n1 0\n").is_err());
        assert!(NetworkGraph::parse_edge_list("2\n0 x\n").is_err());
        assert!(NetworkGraph::parse_edge_list("2\n0 5\n").is_err());
        assert!(NetworkGraph::parse_edge_list("1\n").is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn laplacian_psd_and_norm_identities(seed in any::<u64>(), m in 2usize..9, n in 1usize..5) {
            let g = generate_graph(GraphKind::ErdosRenyi, m, Some(0.5), seed).unwrap();
            prop_assert!(g.is_connected());
            let lap = laplacian(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            for _ in 0..100 {
                let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                prop_assert!(lap.quadratic_form(&v).unwrap() >= -1e-12);
            }
            let p: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let edge = consensus_norm(&p, &lap).unwrap();
            let quad = lap.quadratic_form(&p).unwrap();
            prop_assert!((edge * edge - quad).abs() < 1e-10);

            // Dense eigendecomposition oracle: |(sqrt(L) (x) I_n) p|_2.
            let s = sqrt_laplacian(&lap);
            let mut sq = 0.0;
            for i in 0..m {
                for c in 0..n {
                    let v: f64 = (0..m).map(|j| s[(i, j)] * p[j * n + c]).sum();
                    sq += v * v;
                }
            }
            prop_assert!((sq.sqrt() - edge).abs() < 1e-10);
        }
    }
}
