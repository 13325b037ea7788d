//! Progressive-edge-growth Tanner graph construction and alist interchange.
//!
//! Variable nodes are laid out in increasing degree order, so with a
//! two-class UEP profile the high-degree (strong) class occupies the upper
//! half of the codeword. Each edge of a variable goes to the check that is
//! farthest from it in the current graph; ties go to the lowest current check
//! degree, then to the lowest check rank.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;

use crate::degree::{DegreeDistribution, Perspective};
use crate::error::{Error, Result};
use crate::rng;

/// Bipartite code graph. Columns of `H` are variables, rows are checks.
#[derive(Debug)]
pub struct TannerGraph {
    n_var: usize,
    n_chk: usize,
    var_adj: Vec<Vec<usize>>,
    chk_adj: Vec<Vec<usize>>,
    girth: OnceLock<Option<usize>>,
}

impl Clone for TannerGraph {
    fn clone(&self) -> Self {
        Self {
            n_var: self.n_var,
            n_chk: self.n_chk,
            var_adj: self.var_adj.clone(),
            chk_adj: self.chk_adj.clone(),
            girth: self.girth.clone(),
        }
    }
}

impl PartialEq for TannerGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n_var == other.n_var && self.n_chk == other.n_chk && self.var_adj == other.var_adj
    }
}

/// Per-placement record kept while growing the graph.
#[derive(Debug, Clone, Default)]
pub struct PegLog {
    /// Edges placed to a check the BFS tree never reached (no cycle formed).
    pub unsaturated_placements: usize,
    /// Edges that closed a cycle, i.e. the tree covered every check.
    pub saturated_placements: usize,
    /// Shortest cycle closed by any placement.
    pub min_cycle_created: Option<usize>,
}

impl TannerGraph {
    /// Builds a graph from per-variable check lists. Duplicate edges and
    /// out-of-range indices are rejected; every check must have degree ≥ 1.
    pub fn from_var_adjacency(n_chk: usize, mut var_adj: Vec<Vec<usize>>) -> Result<Self> {
        let mut chk_adj = vec![Vec::new(); n_chk];
        for (v, checks) in var_adj.iter_mut().enumerate() {
            checks.sort_unstable();
            if checks.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Construction(format!("parallel edge at variable {v}")));
            }
            for &c in checks.iter() {
                if c >= n_chk {
                    return Err(Error::Construction(format!("check index {c} out of range")));
                }
                chk_adj[c].push(v);
            }
        }
        if let Some(c) = chk_adj.iter().position(|a| a.is_empty()) {
            return Err(Error::Construction(format!("check {c} has no edges")));
        }
        Ok(Self { n_var: var_adj.len(), n_chk, var_adj, chk_adj, girth: OnceLock::new() })
    }

    pub fn n_var(&self) -> usize {
        self.n_var
    }

    pub fn n_chk(&self) -> usize {
        self.n_chk
    }

    pub fn n_edges(&self) -> usize {
        self.var_adj.iter().map(Vec::len).sum()
    }

    pub fn var_adj(&self) -> &[Vec<usize>] {
        &self.var_adj
    }

    pub fn chk_adj(&self) -> &[Vec<usize>] {
        &self.chk_adj
    }

    /// `1 − M/N`.
    pub fn rate_bound(&self) -> f64 {
        1.0 - self.n_chk as f64 / self.n_var as f64
    }

    /// Degree profile measured from the graph, node perspective.
    pub fn measured_distribution(&self) -> DegreeDistribution {
        let hist = |degs: Vec<usize>| -> Vec<(usize, f64)> {
            let mut counts = std::collections::BTreeMap::new();
            for d in degs {
                *counts.entry(d).or_insert(0usize) += 1;
            }
            counts.into_iter().map(|(d, c)| (d, c as f64)).collect()
        };
        DegreeDistribution::new(
            hist(self.var_adj.iter().map(Vec::len).collect()),
            hist(self.chk_adj.iter().map(Vec::len).collect()),
            Perspective::Node,
        )
        .expect("graph degrees are positive")
    }

    /// `H vᵀ` over GF(2) is zero.
    pub fn is_codeword(&self, v: &[u8]) -> bool {
        self.chk_adj.iter().all(|row| row.iter().fold(0u8, |acc, &i| acc ^ (v[i] & 1)) == 0)
    }

    pub fn syndrome_weight(&self, v: &[u8]) -> usize {
        self.chk_adj
            .iter()
            .filter(|row| row.iter().fold(0u8, |acc, &i| acc ^ (v[i] & 1)) == 1)
            .count()
    }

    /// Length of the shortest cycle, `None` for a forest.
    pub fn girth(&self) -> Option<usize> {
        *self.girth.get_or_init(|| self.compute_girth())
    }

    fn compute_girth(&self) -> Option<usize> {
        // Nodes 0..n_var are variables, n_var.. are checks.
        let total = self.n_var + self.n_chk;
        let neighbours = |u: usize| -> &[usize] {
            if u < self.n_var {
                &self.var_adj[u]
            } else {
                &self.chk_adj[u - self.n_var]
            }
        };
        let offset = |u: usize, w: usize| if u < self.n_var { w + self.n_var } else { w };
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; total];
        let mut parent = vec![usize::MAX; total];
        let mut queue = VecDeque::new();
        let mut touched = Vec::new();
        for root in 0..self.n_var {
            for &t in &touched {
                dist[t] = usize::MAX;
                parent[t] = usize::MAX;
            }
            touched.clear();
            queue.clear();
            dist[root] = 0;
            touched.push(root);
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                if best.is_some_and(|b| 2 * dist[u] >= b) {
                    break;
                }
                for &w in neighbours(u) {
                    let w = offset(u, w);
                    if w == parent[u] {
                        continue;
                    }
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        touched.push(w);
                        queue.push_back(w);
                    } else {
                        let len = dist[u] + dist[w] + 1;
                        if best.is_none_or(|b| len < b) {
                            best = Some(len);
                        }
                    }
                }
            }
        }
        best
    }

    /// Writes the graph in alist format (1-based indices, zero padded).
    pub fn to_alist(&self) -> String {
        let max_col = self.var_adj.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.chk_adj.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = String::new();
        let join = |it: &mut dyn Iterator<Item = usize>| it.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{} {}", self.n_var, self.n_chk);
        let _ = writeln!(s, "{max_col} {max_row}");
        let _ = writeln!(s, "{}", join(&mut self.var_adj.iter().map(Vec::len)));
        let _ = writeln!(s, "{}", join(&mut self.chk_adj.iter().map(Vec::len)));
        for adj in &self.var_adj {
            let mut row: Vec<usize> = adj.iter().map(|&c| c + 1).collect();
            row.resize(max_col, 0);
            let _ = writeln!(s, "{}", join(&mut row.into_iter()));
        }
        for adj in &self.chk_adj {
            let mut row: Vec<usize> = adj.iter().map(|&v| v + 1).collect();
            row.resize(max_row, 0);
            let _ = writeln!(s, "{}", join(&mut row.into_iter()));
        }
        s
    }

    /// Parses alist text. Zero padding in the index lists is optional.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next_nums = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (i, line) = lines.next().ok_or_else(|| Error::Alist { line: 0, msg: format!("missing {what}") })?;
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| Error::Alist { line: i + 1, msg: format!("{what}: {e}") }))
                .collect::<Result<Vec<_>>>()?;
            Ok((i + 1, nums))
        };
        let (l, dims) = next_nums("dimensions")?;
        if dims.len() != 2 {
            return Err(Error::Alist { line: l, msg: "expected `N M`".into() });
        }
        let (n, m) = (dims[0], dims[1]);
        next_nums("maximum degrees")?;
        let (l, col_deg) = next_nums("column degrees")?;
        if col_deg.len() != n {
            return Err(Error::Alist { line: l, msg: format!("expected {n} column degrees") });
        }
        let (l, row_deg) = next_nums("row degrees")?;
        if row_deg.len() != m {
            return Err(Error::Alist { line: l, msg: format!("expected {m} row degrees") });
        }
        let mut var_adj = Vec::with_capacity(n);
        for (v, &deg) in col_deg.iter().enumerate() {
            let (l, nums) = next_nums("column list")?;
            let idx: Vec<usize> = nums.into_iter().filter(|&x| x != 0).map(|x| x - 1).collect();
            if idx.len() != deg {
                return Err(Error::Alist { line: l, msg: format!("column {} lists {} entries, degree {deg}", v + 1, idx.len()) });
            }
            var_adj.push(idx);
        }
        let graph = Self::from_var_adjacency(m, var_adj).map_err(|e| Error::Alist { line: 0, msg: e.to_string() })?;
        for (c, &deg) in row_deg.iter().enumerate() {
            if graph.chk_adj[c].len() != deg {
                return Err(Error::Alist { line: 0, msg: format!("row {} degree mismatch", c + 1) });
            }
        }
        Ok(graph)
    }

    pub fn save_alist(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_alist())?;
        Ok(())
    }

    pub fn load_alist(path: &Path) -> Result<Self> {
        Self::from_alist(&std::fs::read_to_string(path)?)
    }
}

/// Number of checks realizing a distribution with a specified check side:
/// `round(n · avg_var_degree / avg_chk_degree)`.
pub fn checks_for_distribution(dist: &DegreeDistribution, n: usize) -> Result<usize> {
    let avg_c = dist
        .avg_chk_degree()
        .ok_or_else(|| Error::InfeasibleDistribution("check side unspecified".into()))?;
    Ok((n as f64 * dist.avg_var_degree() / avg_c).round() as usize)
}

/// Number of checks for a nominal rate: `round(n (1 − rate))`.
pub fn checks_for_rate(n: usize, rate: f64) -> usize {
    (n as f64 * (1.0 - rate)).round() as usize
}

/// Grows a Tanner graph with `n` variables and `m` checks.
///
/// With `seed == 0` the final tie-break is the plain check index; any other
/// seed ranks checks by a seeded permutation, giving an alternative graph for
/// encoder retries.
pub fn peg_construct(dist: &DegreeDistribution, n: usize, m: usize, seed: u64) -> Result<TannerGraph> {
    peg_construct_logged(dist, n, m, seed).map(|(g, _)| g)
}

pub fn peg_construct_logged(dist: &DegreeDistribution, n: usize, m: usize, seed: u64) -> Result<(TannerGraph, PegLog)> {
    if m == 0 || m >= n {
        return Err(Error::Construction(format!("need 1 ≤ checks < n, got {m} checks for n={n}")));
    }
    let counts = dist.var_node_counts(n);
    if let Some(&(d, _)) = counts.iter().find(|&&(d, c)| c > 0 && d < 2) {
        return Err(Error::Construction(format!("variable degree {d} unsupported (need ≥ 2)")));
    }
    if let Some(&(d, _)) = counts.iter().find(|&&(d, c)| c > 0 && d > m) {
        return Err(Error::Construction(format!("variable degree {d} exceeds {m} checks")));
    }
    let degrees: Vec<usize> = counts.iter().flat_map(|&(d, c)| std::iter::repeat_n(d, c)).collect();

    let mut rank: Vec<usize> = (0..m).collect();
    if seed != 0 {
        rank.shuffle(&mut rng::stream(seed, &[0x0070_6567]));
    }

    let mut var_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut chk_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut log = PegLog::default();

    // BFS scratch: check depth marks, variable visited marks, keyed by epoch.
    let mut chk_mark = vec![0u64; m];
    let mut var_mark = vec![0u64; n];
    let mut epoch = 0u64;
    let mut frontier: Vec<usize> = Vec::new();
    let mut next_frontier: Vec<usize> = Vec::new();

    let pick = |cands: &mut dyn Iterator<Item = usize>, chk_adj: &[Vec<usize>]| -> usize {
        cands
            .min_by_key(|&c| (chk_adj[c].len(), rank[c]))
            .expect("candidate set non-empty")
    };

    for (v, &deg) in degrees.iter().enumerate() {
        for k in 0..deg {
            if k == 0 {
                let c = pick(&mut (0..m), &chk_adj);
                var_adj[v].push(c);
                chk_adj[c].push(v);
                log.unsaturated_placements += 1;
                continue;
            }
            epoch += 1;
            var_mark[v] = epoch;
            frontier.clear();
            let mut reached = 0usize;
            for &c in &var_adj[v] {
                chk_mark[c] = epoch;
                frontier.push(c);
                reached += 1;
            }
            let mut layer = 0usize;
            let chosen = loop {
                next_frontier.clear();
                for &c in &frontier {
                    for &u in &chk_adj[c] {
                        if var_mark[u] == epoch {
                            continue;
                        }
                        var_mark[u] = epoch;
                        for &c2 in &var_adj[u] {
                            if chk_mark[c2] != epoch {
                                chk_mark[c2] = epoch;
                                next_frontier.push(c2);
                            }
                        }
                    }
                }
                reached += next_frontier.len();
                if next_frontier.is_empty() && reached < m {
                    // Tree stopped growing before covering every check.
                    log.unsaturated_placements += 1;
                    break pick(&mut (0..m).filter(|&c| chk_mark[c] != epoch), &chk_adj);
                }
                if reached == m {
                    layer += 1;
                    log.saturated_placements += 1;
                    let cycle = 2 * layer + 2;
                    log.min_cycle_created = Some(log.min_cycle_created.map_or(cycle, |c| c.min(cycle)));
                    break pick(&mut next_frontier.iter().copied(), &chk_adj);
                }
                layer += 1;
                std::mem::swap(&mut frontier, &mut next_frontier);
            };
            var_adj[v].push(chosen);
            chk_adj[chosen].push(v);
        }
    }
    let graph = TannerGraph::from_var_adjacency(m, var_adj)?;
    Ok((graph, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_deg2() -> DegreeDistribution {
        DegreeDistribution::new(vec![(2, 1.0)], vec![], Perspective::Node).unwrap()
    }

    /// Exhaustive shortest-cycle oracle: enumerates simple cycles by DFS over
    /// the bipartite graph and keeps the shortest.
    fn brute_girth(g: &TannerGraph) -> Option<usize> {
        let n = g.n_var();
        let total = n + g.n_chk();
        let nb = |u: usize| -> Vec<usize> {
            if u < n {
                g.var_adj()[u].iter().map(|&c| c + n).collect()
            } else {
                g.chk_adj()[u - n].clone()
            }
        };
        fn dfs(start: usize, u: usize, depth: usize, on: &mut Vec<bool>, nb: &dyn Fn(usize) -> Vec<usize>, best: &mut Option<usize>) {
            for w in nb(u) {
                if w == start && depth >= 3 {
                    let len = depth + 1;
                    if best.is_none_or(|b| len < b) {
                        *best = Some(len);
                    }
                } else if !on[w] && w > start {
                    on[w] = true;
                    dfs(start, w, depth + 1, on, nb, best);
                    on[w] = false;
                }
            }
        }
        let mut best = None;
        for s in 0..total {
            let mut on = vec![false; total];
            on[s] = true;
            dfs(s, s, 0, &mut on, &nb, &mut best);
        }
        best
    }

    #[test]
    fn eight_by_four_degree_two() {
        let (g, log) = peg_construct_logged(&all_deg2(), 8, 4, 0).unwrap();
        assert_eq!(g.n_chk(), 4);
        assert!(g.var_adj().iter().all(|a| a.len() == 2));
        // Eight degree-2 columns over four rows must repeat one of the six
        // row pairs, so a 4-cycle is unavoidable.
        assert_eq!(brute_girth(&g), Some(4));
        assert_eq!(g.girth(), Some(4));
        assert_eq!(log.min_cycle_created, Some(4));
    }

    #[test]
    fn six_by_four_reaches_girth_six() {
        let (g, log) = peg_construct_logged(&all_deg2(), 6, 4, 0).unwrap();
        assert_eq!(brute_girth(&g), g.girth());
        assert!(g.girth().unwrap() >= 6);
        assert!(log.min_cycle_created.unwrap() >= 6);
    }

    #[test]
    fn degree_one_rejected() {
        let d = DegreeDistribution::new(vec![(1, 1.0)], vec![], Perspective::Node).unwrap();
        assert!(matches!(peg_construct(&d, 4, 2, 0), Err(Error::Construction(_))));
        assert!(peg_construct(&all_deg2(), 4, 0, 0).is_err());
    }

    #[test]
    fn girth_matches_oracle_on_small_irregular_graphs() {
        let d = DegreeDistribution::new(vec![(2, 0.5), (3, 0.5)], vec![], Perspective::Node).unwrap();
        for (n, m, seed) in [(10, 5, 0), (12, 6, 3), (14, 7, 9), (16, 8, 1)] {
            let (g, log) = peg_construct_logged(&d, n, m, seed).unwrap();
            assert_eq!(g.girth(), brute_girth(&g), "n={n}");
            assert_eq!(g.girth(), log.min_cycle_created, "n={n}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = DegreeDistribution::new(vec![(2, 0.5), (5, 0.5)], vec![], Perspective::Node).unwrap();
        let a = peg_construct(&d, 200, 70, 5).unwrap();
        let b = peg_construct(&d, 200, 70, 5).unwrap();
        let c = peg_construct(&d, 200, 70, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn alist_round_trip() {
        let d = DegreeDistribution::new(vec![(2, 0.5), (3, 0.5)], vec![], Perspective::Node).unwrap();
        let g = peg_construct(&d, 30, 12, 0).unwrap();
        let text = g.to_alist();
        assert_eq!(TannerGraph::from_alist(&text).unwrap(), g);
        let unpadded = "3 2\n2 3\n1 2 1\n2 2\n1\n1 2\n2\n1 2\n2 3\n";
        let h = TannerGraph::from_alist(unpadded).unwrap();
        assert_eq!(h.chk_adj()[1], vec![1, 2]);
        assert!(matches!(TannerGraph::from_alist("3 2\n2 3\n1 2\n"), Err(Error::Alist { line: 3, .. })));
    }
}
