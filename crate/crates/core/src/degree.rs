//! Degree-distribution algebra for irregular LDPC ensembles.
//!
//! A distribution carries a variable side and a check side, each a list of
//! `(degree, weight)` pairs, in either the edge perspective (`λ`, `ρ`: the
//! fraction of edges attached to nodes of a degree) or the node perspective
//! (`δ`, `γ`: the fraction of nodes of a degree).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perspective {
    Edge,
    Node,
}

/// Variable and check degree profiles in one perspective.
///
/// The check side may be empty, meaning "not specified": check profiles of
/// PEG graphs are measured from the built graph rather than imposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DegreeDistribution {
    var: Vec<(usize, f64)>,
    chk: Vec<(usize, f64)>,
    perspective: Perspective,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    var: Vec<(usize, f64)>,
    #[serde(default)]
    chk: Vec<(usize, f64)>,
    perspective: Perspective,
}

impl TryFrom<RawDistribution> for DegreeDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        DegreeDistribution::new(raw.var, raw.chk, raw.perspective)
    }
}

impl From<DegreeDistribution> for RawDistribution {
    fn from(d: DegreeDistribution) -> Self {
        RawDistribution { var: d.var, chk: d.chk, perspective: d.perspective }
    }
}

fn normalize_side(side: Vec<(usize, f64)>, name: &str, allow_empty: bool) -> Result<Vec<(usize, f64)>> {
    if side.is_empty() {
        if allow_empty {
            return Ok(side);
        }
        return Err(Error::InvalidDistribution(format!("{name} side is empty")));
    }
    let mut side = side;
    side.sort_by_key(|&(d, _)| d);
    for w in side.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidDistribution(format!("{name} degree {} listed twice", w[0].0)));
        }
    }
    for &(d, w) in &side {
        if d == 0 {
            return Err(Error::InvalidDistribution(format!("{name} side contains degree 0")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidDistribution(format!("{name} weight {w} for degree {d}")));
        }
    }
    let total: f64 = side.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution(format!("{name} weights sum to zero")));
    }
    Ok(side.into_iter().filter(|&(_, w)| w > 0.0).map(|(d, w)| (d, w / total)).collect())
}

impl DegreeDistribution {
    /// Builds a distribution, sorting degrees and normalizing each side to
    /// unit mass. Zero-weight entries are dropped.
    pub fn new(var: Vec<(usize, f64)>, chk: Vec<(usize, f64)>, perspective: Perspective) -> Result<Self> {
        Ok(Self {
            var: normalize_side(var, "variable", false)?,
            chk: normalize_side(chk, "check", true)?,
            perspective,
        })
    }

    /// Node-perspective distribution from degree lists and weights, the form
    /// the code tables use (`VND`, `δ`, `CND`, `γ`).
    pub fn from_node_lists(vnd: &[usize], delta: &[f64], cnd: &[usize], gamma: &[f64]) -> Result<Self> {
        if vnd.len() != delta.len() || cnd.len() != gamma.len() {
            return Err(Error::InvalidDistribution("degree and weight lists differ in length".into()));
        }
        Self::new(
            vnd.iter().copied().zip(delta.iter().copied()).collect(),
            cnd.iter().copied().zip(gamma.iter().copied()).collect(),
            Perspective::Node,
        )
    }

    pub fn var(&self) -> &[(usize, f64)] {
        &self.var
    }

    pub fn chk(&self) -> &[(usize, f64)] {
        &self.chk
    }

    pub fn perspective(&self) -> Perspective {
        self.perspective
    }

    pub fn max_var_degree(&self) -> usize {
        self.var.last().map_or(0, |&(d, _)| d)
    }

    pub fn max_chk_degree(&self) -> usize {
        self.chk.last().map_or(0, |&(d, _)| d)
    }

    /// `δ_k = (λ_k / k) / Σ_j λ_j / j`, and likewise `γ` from `ρ`.
    pub fn edge_to_node(&self) -> Result<Self> {
        if self.perspective != Perspective::Edge {
            return Err(Error::InvalidDistribution("expected an edge-perspective distribution".into()));
        }
        let conv = |side: &[(usize, f64)]| -> Vec<(usize, f64)> {
            let total: f64 = side.iter().map(|&(d, w)| w / d as f64).sum();
            side.iter().map(|&(d, w)| (d, (w / d as f64) / total)).collect()
        };
        Ok(Self { var: conv(&self.var), chk: conv(&self.chk), perspective: Perspective::Node })
    }

    /// `λ_k = k δ_k / Σ_j j δ_j`, and likewise `ρ` from `γ`.
    pub fn node_to_edge(&self) -> Result<Self> {
        if self.perspective != Perspective::Node {
            return Err(Error::InvalidDistribution("expected a node-perspective distribution".into()));
        }
        let conv = |side: &[(usize, f64)]| -> Vec<(usize, f64)> {
            let total: f64 = side.iter().map(|&(d, w)| w * d as f64).sum();
            side.iter().map(|&(d, w)| (d, (w * d as f64) / total)).collect()
        };
        Ok(Self { var: conv(&self.var), chk: conv(&self.chk), perspective: Perspective::Edge })
    }

    pub fn to_node(&self) -> Self {
        match self.perspective {
            Perspective::Node => self.clone(),
            Perspective::Edge => self.edge_to_node().expect("perspective checked"),
        }
    }

    pub fn to_edge(&self) -> Self {
        match self.perspective {
            Perspective::Edge => self.clone(),
            Perspective::Node => self.node_to_edge().expect("perspective checked"),
        }
    }

    /// Average variable-node degree `Σ k δ_k`.
    pub fn avg_var_degree(&self) -> f64 {
        self.to_node().var.iter().map(|&(d, w)| d as f64 * w).sum()
    }

    /// Average check-node degree `Σ l γ_l`; `None` when the check side is unspecified.
    pub fn avg_chk_degree(&self) -> Option<f64> {
        if self.chk.is_empty() {
            return None;
        }
        Some(self.to_node().chk.iter().map(|&(d, w)| d as f64 * w).sum())
    }

    /// Design rate `1 − (Σ ρ_l / l) / (Σ λ_k / k)`.
    pub fn design_rate(&self) -> Result<f64> {
        let edge = self.to_edge();
        if edge.chk.is_empty() {
            return Err(Error::InfeasibleDistribution("check side unspecified".into()));
        }
        let v: f64 = edge.var.iter().map(|&(d, w)| w / d as f64).sum();
        let c: f64 = edge.chk.iter().map(|&(d, w)| w / d as f64).sum();
        let rate = 1.0 - c / v;
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InfeasibleDistribution(format!("design rate {rate} outside (0,1)")));
        }
        Ok(rate)
    }

    /// Integer variable-node counts for a block of `n` nodes.
    pub fn var_node_counts(&self, n: usize) -> Vec<(usize, usize)> {
        round_counts(&self.to_node().var, n)
    }

    /// Integer check-node counts for `m` checks.
    pub fn chk_node_counts(&self, m: usize) -> Vec<(usize, usize)> {
        round_counts(&self.to_node().chk, m)
    }

    /// Checks the weight invariants to within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        let ok = |side: &[(usize, f64)]| {
            side.is_empty() || (side.iter().map(|&(_, w)| w).sum::<f64>() - 1.0).abs() <= tol
        };
        ok(&self.var) && ok(&self.chk)
    }
}

/// Rounds `w_k · n` to integers; the largest-weight class absorbs the
/// rounding residue so the counts sum to `n`.
pub fn round_counts(side: &[(usize, f64)], n: usize) -> Vec<(usize, usize)> {
    if side.is_empty() {
        return Vec::new();
    }
    let mut counts: Vec<(usize, i64)> = side.iter().map(|&(d, w)| (d, (w * n as f64).round() as i64)).collect();
    let total: i64 = counts.iter().map(|&(_, c)| c).sum();
    let largest = side
        .iter()
        .enumerate()
        .fold(0, |best, (i, &(_, w))| if w > side[best].1 { i } else { best });
    counts[largest].1 += n as i64 - total;
    counts.into_iter().map(|(d, c)| (d, c.max(0) as usize)).collect()
}

impl Default for DegreeDistribution {
    fn default() -> Self {
        Self { var: vec![(3, 1.0)], chk: vec![(6, 1.0)], perspective: Perspective::Node }
    }
}
