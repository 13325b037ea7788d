//! Mutual information between LLRs and code bits from empirical histograms,
//! and EXIT trajectories of the turbo loop.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ldpc::LLR_CLIP;
use crate::rng;
use crate::turbo::{IterationView, Link, TurboSchedule};
use rand::Rng as _;

/// Minimum sample count for [`exit_transfer`].
pub const MIN_EXIT_SAMPLES: usize = 10_000;
const BIN_WIDTH: f64 = 0.1;

/// Per-class LLR histogram on bins mirrored about zero, so negating every
/// LLR maps each bin onto its mirror.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiHistogram {
    /// `counts[0]` for bit 0 (`X = +1`), `counts[1]` for bit 1.
    counts: [Vec<u64>; 2],
}

impl Default for MiHistogram {
    fn default() -> Self {
        Self::new()
    }
}

impl MiHistogram {
    fn half() -> usize {
        (LLR_CLIP / BIN_WIDTH).round() as usize
    }

    pub fn new() -> Self {
        let n = 2 * Self::half();
        Self { counts: [vec![0; n], vec![0; n]] }
    }

    fn bin(l: f64) -> usize {
        let h = Self::half();
        let k = ((l.abs() / BIN_WIDTH).floor() as usize).min(h - 1);
        if l >= 0.0 {
            h + k
        } else {
            h - 1 - k
        }
    }

    pub fn add(&mut self, llr: &[f64], bits: &[u8]) -> Result<()> {
        if llr.len() != bits.len() {
            return Err(Error::Dimension(format!("{} LLRs for {} bits", llr.len(), bits.len())));
        }
        for (&l, &b) in llr.iter().zip(bits) {
            if l.is_nan() || b > 1 {
                return Err(Error::Input("NaN LLR or non-binary reference".into()));
            }
            self.counts[b as usize][Self::bin(l)] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        for c in 0..2 {
            self.counts[c].iter_mut().zip(&other.counts[c]).for_each(|(a, b)| *a += b);
        }
    }

    pub fn samples(&self) -> usize {
        self.counts.iter().map(|c| c.iter().sum::<u64>()).sum::<u64>() as usize
    }

    /// `I = ½ Σ_x Σ_ξ p(ξ|x) log₂(2p(ξ|x) / (p(ξ|+1) + p(ξ|−1)))`.
    ///
    /// An empty class is replaced by the mirror image of the other, which
    /// assumes a symmetric channel; a warning is logged.
    pub fn value(&self) -> Result<f64> {
        let n0: u64 = self.counts[0].iter().sum();
        let n1: u64 = self.counts[1].iter().sum();
        let (p0, p1): (Vec<f64>, Vec<f64>) = match (n0, n1) {
            (0, 0) => return Err(Error::Input("no samples".into())),
            (_, 0) | (0, _) => {
                log::warn!("one bit class is empty; mirroring the other");
                let (c, n) = if n1 == 0 { (&self.counts[0], n0) } else { (&self.counts[1], n1) };
                let p: Vec<f64> = c.iter().map(|&x| x as f64 / n as f64).collect();
                let mut m = p.clone();
                m.reverse();
                if n1 == 0 {
                    (p, m)
                } else {
                    (m, p)
                }
            }
            _ => (
                self.counts[0].iter().map(|&x| x as f64 / n0 as f64).collect(),
                self.counts[1].iter().map(|&x| x as f64 / n1 as f64).collect(),
            ),
        };
        let mut i = 0.0;
        for (&a, &b) in p0.iter().zip(&p1) {
            if a > 0.0 {
                i += a * (2.0 * a / (a + b)).log2();
            }
            if b > 0.0 {
                i += b * (2.0 * b / (a + b)).log2();
            }
        }
        Ok((0.5 * i).clamp(0.0, 1.0))
    }
}

/// Mutual information between LLRs and bits (LLR > 0 favours bit 0).
pub fn mutual_information(llr: &[f64], bits: &[u8]) -> Result<f64> {
    let mut h = MiHistogram::new();
    h.add(llr, bits)?;
    h.value()
}

/// `(I_in, I_out)` for two LLR sets on the same reference bits.
pub fn exit_transfer(llr_in: &[f64], llr_out: &[f64], bits: &[u8]) -> Result<(f64, f64)> {
    if bits.len() < MIN_EXIT_SAMPLES {
        return Err(Error::Input(format!("need ≥ {MIN_EXIT_SAMPLES} samples, got {}", bits.len())));
    }
    Ok((mutual_information(llr_in, bits)?, mutual_information(llr_out, bits)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitPoint {
    /// Outer iteration, from 1.
    pub outer: usize,
    /// Information in the decoder input `L_d(v)`.
    pub i_in: f64,
    /// Information in the decoder extrinsic output `L_D(v)`.
    pub i_out: f64,
    pub samples: usize,
}

/// Measured trajectory over `frames` random codewords with every outer
/// iteration run.
pub fn exit_trajectory(link: &Link, sched: &TurboSchedule, frames: usize, seed: u64) -> Result<Vec<ExitPoint>> {
    if frames == 0 {
        return Err(Error::Input("need at least one frame".into()));
    }
    let sched = TurboSchedule { early_stop: false, ..*sched };
    let per_frame = |f: usize| -> Result<Vec<(MiHistogram, MiHistogram)>> {
        let mut r = rng::stream(seed, &[f as u64]);
        let u: Vec<u8> = (0..link.k()).map(|_| r.random_range(0..2u8)).collect();
        let w = link.write(&u)?;
        let y = link.receive(&w, &mut r);
        let mut hists = vec![(MiHistogram::new(), MiHistogram::new()); sched.outer];
        let mut failure = None;
        let mut obs = |view: &IterationView<'_>| {
            let (hi, ho) = &mut hists[view.outer];
            if let Err(e) = hi.add(view.detector_extrinsic, &w.v).and_then(|_| ho.add(view.decoder_extrinsic, &w.v)) {
                failure.get_or_insert(e);
            }
        };
        link.turbo_decode(&y, &sched, Some(&mut obs))?;
        match failure {
            Some(e) => Err(e),
            None => Ok(hists),
        }
    };
    let hists = (0..frames).into_par_iter().map(per_frame).try_reduce(
        || vec![(MiHistogram::new(), MiHistogram::new()); sched.outer],
        |mut a, b| {
            for ((ai, ao), (bi, bo)) in a.iter_mut().zip(&b) {
                ai.merge(bi);
                ao.merge(bo);
            }
            Ok(a)
        },
    )?;
    hists
        .iter()
        .enumerate()
        .map(|(u, (hi, ho))| {
            Ok(ExitPoint { outer: u + 1, i_in: hi.value()?, i_out: ho.value()?, samples: hi.samples() })
        })
        .collect()
}
