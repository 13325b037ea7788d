//! Deliberate-flipping `(0,k)` constrainers.
//!
//! A window of `k+1` positions slides over the block; whenever the window is
//! all zero in both the data and the location vector, its last position is
//! marked. In the binary case the marked bit is inverted; in the quaternary
//! case the marked zero symbol is replaced by the fill symbol. The constraint
//! is enforced inside one block; no state crosses block boundaries.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Positions altered by the constrainer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationVector {
    pub q: Vec<u8>,
    /// Symbol written at marked positions (quaternary only, `1` or `2`).
    pub fill: Option<u8>,
}

impl LocationVector {
    pub fn count(&self) -> usize {
        self.q.iter().filter(|&&b| b == 1).count()
    }

    /// Applies the vector: XOR for binary, fill substitution for quaternary.
    pub fn apply(&self, seq: &[u8]) -> Vec<u8> {
        match self.fill {
            None => seq.iter().zip(&self.q).map(|(&a, &b)| a ^ b).collect(),
            Some(f) => seq.iter().zip(&self.q).map(|(&a, &b)| if b == 1 { f } else { a }).collect(),
        }
    }
}

fn locate_zero_runs(seq: &[u8], k: usize) -> Vec<u8> {
    let mut q = vec![0u8; seq.len()];
    let mut run = 0usize;
    for (j, &s) in seq.iter().enumerate() {
        if s == 0 {
            run += 1;
            if run == k + 1 {
                q[j] = 1;
                run = 0;
            }
        } else {
            run = 0;
        }
    }
    q
}

/// Location vector for a binary block under the `(0,k)` constraint.
pub fn binary_locate(v: &[u8], k: usize) -> Result<LocationVector> {
    if v.len() <= k {
        return Err(Error::Input(format!("block length {} must exceed k = {k}", v.len())));
    }
    if v.iter().any(|&b| b > 1) {
        return Err(Error::Input("binary block contains a non-bit".into()));
    }
    Ok(LocationVector { q: locate_zero_runs(v, k), fill: None })
}

/// Location vector for a quaternary symbol block; every `(k+1)`-th
/// consecutive zero becomes `fill`.
pub fn quaternary_locate(w: &[u8], k: usize, fill: u8) -> Result<LocationVector> {
    if !(fill == 1 || fill == 2) {
        return Err(Error::Input(format!("fill symbol {fill} not in {{1,2}}")));
    }
    if w.iter().any(|&s| s > 3) {
        return Err(Error::Input("symbol outside {0,1,2,3}".into()));
    }
    Ok(LocationVector { q: locate_zero_runs(w, k), fill: Some(fill) })
}

/// True when no run of more than `k` zeros occurs within the block.
pub fn verify_rll(seq: &[u8], k: usize) -> bool {
    let mut run = 0usize;
    for &s in seq {
        if s == 0 {
            run += 1;
            if run > k {
                return false;
            }
        } else {
            run = 0;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alphabet {
    Binary,
    Quaternary,
}

impl Alphabet {
    pub fn size(self) -> u8 {
        match self {
            Alphabet::Binary => 2,
            Alphabet::Quaternary => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipStats {
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// Monte-Carlo flips per symbol over i.i.d. uniform blocks of length `n`.
/// `std` is the across-trial standard deviation of the per-block rate.
pub fn flip_rate(k: usize, n: usize, trials: usize, alphabet: Alphabet, seed: u64) -> Result<FlipStats> {
    if trials < 100 {
        return Err(Error::Input(format!("need ≥ 100 trials, got {trials}")));
    }
    if n <= k {
        return Err(Error::Input(format!("block length {n} must exceed k = {k}")));
    }
    let a = alphabet.size();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for t in 0..trials {
        let mut r = rng::stream(seed, &[t as u64]);
        let seq: Vec<u8> = (0..n).map(|_| r.random_range(0..a)).collect();
        let rate = locate_zero_runs(&seq, k).iter().filter(|&&b| b == 1).count() as f64 / n as f64;
        sum += rate;
        sumsq += rate * rate;
    }
    let mean = sum / trials as f64;
    let var = (sumsq / trials as f64 - mean * mean).max(0.0) * trials as f64 / (trials - 1) as f64;
    Ok(FlipStats { mean, std: var.sqrt(), trials })
}

/// Long-run flips per symbol for i.i.d. symbols that are zero with
/// probability `p`: `p^(k+1) / Σ_{s=0}^{k} p^s`.
pub fn stationary_flip_rate(k: usize, p_zero: f64) -> f64 {
    let denom: f64 = (0..=k).map(|s| p_zero.powi(s as i32)).sum();
    p_zero.powi(k as i32 + 1) / denom
}
