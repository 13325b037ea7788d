//! Flooding belief-propagation decoding: sum-product and min-sum.
//!
//! LLR convention: positive means bit 0. All messages are clipped to
//! `±LLR_CLIP`. A [`DecoderState`] owns the per-edge messages; with
//! `reset = false` the check-to-variable messages survive between calls and
//! only the intrinsic (channel) term is replaced, which is the non-reset
//! schedule used inside turbo equalization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peg::TannerGraph;

pub const LLR_CLIP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    SumProduct,
    MinSum,
}

/// Edge-indexed view of a Tanner graph. Edges are numbered check-major.
#[derive(Debug)]
pub struct EdgeGraph {
    graph: TannerGraph,
    chk_start: Vec<usize>,
    edge_var: Vec<usize>,
    var_start: Vec<usize>,
    var_edges: Vec<usize>,
}

impl EdgeGraph {
    pub fn new(graph: TannerGraph) -> Self {
        let mut chk_start = Vec::with_capacity(graph.n_chk() + 1);
        let mut edge_var = Vec::with_capacity(graph.n_edges());
        chk_start.push(0);
        for adj in graph.chk_adj() {
            edge_var.extend_from_slice(adj);
            chk_start.push(edge_var.len());
        }
        let mut per_var: Vec<Vec<usize>> = vec![Vec::new(); graph.n_var()];
        for (e, &v) in edge_var.iter().enumerate() {
            per_var[v].push(e);
        }
        let mut var_start = Vec::with_capacity(graph.n_var() + 1);
        let mut var_edges = Vec::with_capacity(edge_var.len());
        var_start.push(0);
        for edges in per_var {
            var_edges.extend(edges);
            var_start.push(var_edges.len());
        }
        Self { graph, chk_start, edge_var, var_start, var_edges }
    }

    pub fn graph(&self) -> &TannerGraph {
        &self.graph
    }

    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    fn var_edge_slice(&self, v: usize) -> &[usize] {
        &self.var_edges[self.var_start[v]..self.var_start[v + 1]]
    }
}

/// Output of one [`DecoderState::decode`] call.
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub app: Vec<f64>,
    pub extrinsic: Vec<f64>,
    pub hard: Vec<u8>,
    pub parity_ok: bool,
}

/// Per-frame decoder messages.
#[derive(Debug, Clone)]
pub struct DecoderState {
    code: Arc<EdgeGraph>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    iterations: usize,
}

#[inline]
fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

/// `φ(x) = −ln tanh(x/2)`, its own inverse on `(0, ∞)`.
#[inline]
fn phi(x: f64) -> f64 {
    let x = x.max(1e-300);
    (2.0 / x.exp_m1()).ln_1p()
}

impl DecoderState {
    pub fn new(code: Arc<EdgeGraph>) -> Self {
        let e = code.n_edges();
        Self { code, v2c: vec![0.0; e], c2v: vec![0.0; e], iterations: 0 }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Check-to-variable messages, check-major edge order.
    pub fn check_messages(&self) -> &[f64] {
        &self.c2v
    }

    pub fn reset(&mut self) {
        self.c2v.iter_mut().for_each(|m| *m = 0.0);
        self.v2c.iter_mut().for_each(|m| *m = 0.0);
        self.iterations = 0;
    }

    pub fn decode(&mut self, channel_llr: &[f64], iters: usize, algo: Algorithm, reset: bool) -> Result<DecodeOutput> {
        let code = Arc::clone(&self.code);
        let n = code.graph.n_var();
        if channel_llr.len() != n {
            return Err(Error::Dimension(format!("{} channel LLRs for N = {n}", channel_llr.len())));
        }
        if iters == 0 {
            return Err(Error::Input("iterations must be ≥ 1".into()));
        }
        if channel_llr.iter().any(|x| x.is_nan()) {
            return Err(Error::Input("NaN channel LLR".into()));
        }
        if reset {
            self.reset();
        }
        let ch: Vec<f64> = channel_llr.iter().map(|&x| clip(x)).collect();
        self.variable_update(&code, &ch);
        for _ in 0..iters {
            match algo {
                Algorithm::SumProduct => self.check_update_sp(&code),
                Algorithm::MinSum => self.check_update_ms(&code),
            }
            self.variable_update(&code, &ch);
            self.iterations += 1;
        }
        let mut app = vec![0.0; n];
        let mut extrinsic = vec![0.0; n];
        for v in 0..n {
            let s: f64 = code.var_edge_slice(v).iter().map(|&e| self.c2v[e]).sum();
            extrinsic[v] = clip(s);
            app[v] = ch[v] + extrinsic[v];
        }
        let hard: Vec<u8> = app.iter().map(|&l| u8::from(l < 0.0)).collect();
        let parity_ok = code.graph.is_codeword(&hard);
        Ok(DecodeOutput { app, extrinsic, hard, parity_ok })
    }

    fn variable_update(&mut self, code: &EdgeGraph, ch: &[f64]) {
        for (v, &l) in ch.iter().enumerate() {
            let edges = code.var_edge_slice(v);
            let total: f64 = l + edges.iter().map(|&e| self.c2v[e]).sum::<f64>();
            for &e in edges {
                self.v2c[e] = clip(total - self.c2v[e]);
            }
        }
    }

    fn check_update_ms(&mut self, code: &EdgeGraph) {
        for c in 0..code.graph.n_chk() {
            let range = code.chk_start[c]..code.chk_start[c + 1];
            let msgs = &self.v2c[range.clone()];
            let mut min1 = f64::INFINITY;
            let mut min2 = f64::INFINITY;
            let mut arg = usize::MAX;
            let mut sign_neg = false;
            for (i, &m) in msgs.iter().enumerate() {
                let a = m.abs();
                sign_neg ^= m < 0.0;
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    arg = i;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for (i, e) in range.enumerate() {
                let m = self.v2c[e];
                let mag = if i == arg { min2 } else { min1 };
                let neg = sign_neg ^ (m < 0.0);
                self.c2v[e] = clip(if neg { -mag } else { mag });
            }
        }
    }

    fn check_update_sp(&mut self, code: &EdgeGraph) {
        let mut prefix: Vec<f64> = Vec::new();
        for c in 0..code.graph.n_chk() {
            let range = code.chk_start[c]..code.chk_start[c + 1];
            let d = range.len();
            let phis: Vec<f64> = self.v2c[range.clone()].iter().map(|m| phi(m.abs())).collect();
            // Exclusive sums without cancellation: prefix then running suffix.
            prefix.clear();
            prefix.push(0.0);
            for i in 0..d {
                let p = prefix[i] + phis[i];
                prefix.push(p);
            }
            let sign_neg = self.v2c[range.clone()].iter().fold(false, |s, &m| s ^ (m < 0.0));
            let mut suffix = 0.0;
            for i in (0..d).rev() {
                let e = range.start + i;
                let m = self.v2c[e];
                let mag = phi(prefix[i] + suffix).min(LLR_CLIP);
                let neg = sign_neg ^ (m < 0.0);
                self.c2v[e] = if neg { -mag } else { mag };
                suffix += phis[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree::{DegreeDistribution, Perspective};
    use crate::encoder::Encoder;
    use crate::peg::peg_construct;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Girth-6 (8,4) code: the six edges of K4 plus two leaves.
    fn small() -> Arc<EdgeGraph> {
        let adj = vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3], vec![0], vec![1]];
        Arc::new(EdgeGraph::new(TannerGraph::from_var_adjacency(4, adj).unwrap()))
    }

    fn medium() -> Arc<EdgeGraph> {
        let d = DegreeDistribution::new(vec![(2, 0.5), (5, 0.5)], vec![], Perspective::Node).unwrap();
        Arc::new(EdgeGraph::new(peg_construct(&d, 256, 90, 0).unwrap()))
    }

    #[test]
    fn phi_is_involution() {
        for &x in &[1e-6, 0.01, 0.5, 1.0, 3.0, 10.0, 20.0] {
            assert!((phi(phi(x)) - x).abs() / x < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn noiseless_all_zero() {
        let code = medium();
        for algo in [Algorithm::SumProduct, Algorithm::MinSum] {
            let mut st = DecoderState::new(code.clone());
            let out = st.decode(&vec![10.0; 256], 1, algo, true).unwrap();
            assert!(out.parity_ok);
            assert!(out.hard.iter().all(|&b| b == 0));
            for (a, x) in out.app.iter().zip(&out.extrinsic) {
                assert!((a - 10.0 - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nan_and_length_rejected() {
        let mut st = DecoderState::new(small());
        let mut llr = vec![1.0; 8];
        llr[3] = f64::NAN;
        assert!(matches!(st.decode(&llr, 1, Algorithm::MinSum, true), Err(Error::Input(_))));
        assert!(st.decode(&[1.0; 7], 1, Algorithm::MinSum, true).is_err());
        assert!(st.decode(&[1.0; 8], 0, Algorithm::MinSum, true).is_err());
    }

    #[test]
    fn min_sum_dominates_sum_product_in_magnitude() {
        let code = medium();
        let mut rng = crate::rng::stream(3, &[]);
        let llr: Vec<f64> = (0..256).map(|_| rng.random_range(-4.0..6.0)).collect();
        let mut sp = DecoderState::new(code.clone());
        let mut ms = DecoderState::new(code.clone());
        sp.decode(&llr, 1, Algorithm::SumProduct, true).unwrap();
        ms.decode(&llr, 1, Algorithm::MinSum, true).unwrap();
        for (a, b) in sp.check_messages().iter().zip(ms.check_messages()) {
            assert_eq!(a.signum(), b.signum());
            assert!(b.abs() >= a.abs() - 1e-12);
        }
    }

    #[test]
    fn extrinsic_ignores_own_channel_value() {
        let code = medium();
        let mut rng = crate::rng::stream(4, &[]);
        let llr: Vec<f64> = (0..256).map(|_| rng.random_range(-3.0..5.0)).collect();
        let mut other = llr.clone();
        other[17] = -20.0;
        for algo in [Algorithm::SumProduct, Algorithm::MinSum] {
            let a = DecoderState::new(code.clone()).decode(&llr, 1, algo, true).unwrap();
            let b = DecoderState::new(code.clone()).decode(&other, 1, algo, true).unwrap();
            assert_eq!(a.extrinsic[17], b.extrinsic[17]);
        }
    }

    #[test]
    fn reset_decoding_is_pure_and_non_reset_carries_state() {
        let code = medium();
        let mut rng = crate::rng::stream(5, &[]);
        let llr: Vec<f64> = (0..256).map(|_| rng.random_range(-2.0..4.0)).collect();
        let mut st = DecoderState::new(code.clone());
        let a = st.decode(&llr, 2, Algorithm::SumProduct, true).unwrap();
        let b = st.decode(&llr, 2, Algorithm::SumProduct, true).unwrap();
        assert_eq!(a.app, b.app);
        let c = st.decode(&llr, 2, Algorithm::SumProduct, false).unwrap();
        assert_ne!(b.app, c.app);
        assert_eq!(st.iterations(), 4);
    }

    /// Bitwise MAP over the 16 codewords of the (8,4) code.
    #[test]
    fn bp_agrees_with_bitwise_map_on_small_code() {
        let code = small();
        let enc = Encoder::build(code.graph()).unwrap();
        let book: Vec<Vec<u8>> = (0u32..256)
            .map(|x| (0..8).map(|i| (x >> i & 1) as u8).collect::<Vec<u8>>())
            .filter(|v| code.graph().is_codeword(v))
            .collect();
        let ebn0 = 10f64.powf(0.4);
        let sigma = (1.0 / (2.0 * enc.rate() * ebn0)).sqrt();
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = crate::rng::stream(6, &[]);
        let trials = 10_000;
        let mut agree = 0;
        for _ in 0..trials {
            let u: Vec<u8> = (0..4).map(|_| rng.random_range(0..2)).collect();
            let v = enc.encode(&u).unwrap();
            let r: Vec<f64> = v.iter().map(|&b| 1.0 - 2.0 * b as f64 + noise.sample(&mut rng)).collect();
            let llr: Vec<f64> = r.iter().map(|&y| 2.0 * y / (sigma * sigma)).collect();
            let map: Vec<u8> = (0..8)
                .map(|i| {
                    let (mut p0, mut p1) = (0.0, 0.0);
                    for c in &book {
                        let ll: f64 = c.iter().zip(&llr).map(|(&b, &l)| if b == 0 { l / 2.0 } else { -l / 2.0 }).sum();
                        if c[i] == 0 {
                            p0 += ll.exp();
                        } else {
                            p1 += ll.exp();
                        }
                    }
                    u8::from(p1 > p0)
                })
                .collect();
            let out = DecoderState::new(code.clone()).decode(&llr, 20, Algorithm::SumProduct, true).unwrap();
            if out.hard == map {
                agree += 1;
            }
        }
        assert!(agree as f64 >= 0.99 * trials as f64, "agreement {agree}/{trials}");
    }

    #[test]
    fn parity_ok_means_codeword() {
        let code = medium();
        let mut rng = crate::rng::stream(8, &[]);
        for _ in 0..50 {
            let llr: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..3.0)).collect();
            let out = DecoderState::new(code.clone()).decode(&llr, 10, Algorithm::MinSum, true).unwrap();
            assert_eq!(out.parity_ok, code.graph().is_codeword(&out.hard));
        }
    }
}
