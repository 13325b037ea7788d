//! Monte-Carlo BER measurement.
//!
//! Frames run in parallel batches; results are folded back in frame order
//! and the stopping rule is applied frame by frame, so a point never
//! depends on the thread count.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::degree::DegreeDistribution;
use crate::encoder::Encoder;
use crate::equalize::BitMap;
use crate::error::{Error, Result};
use crate::ldpc::EdgeGraph;
use crate::mapping::Scheme;
use crate::peg::{checks_for_distribution, checks_for_rate, peg_construct, TannerGraph};
use crate::rng;
use crate::turbo::{FlipSpec, FrameOutcome, Link, TurboSchedule};

/// How to obtain the parity-check matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    pub n: usize,
    /// Nominal rate, used for the check count when the distribution has
    /// no check side.
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub distribution: Option<DegreeDistribution>,
    /// Alist file; overrides the distribution.
    #[serde(default)]
    pub alist: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl CodeSpec {
    pub fn from_distribution(dist: DegreeDistribution, n: usize, rate: f64) -> Self {
        Self { n, rate: Some(rate), distribution: Some(dist), alist: None, seed: 0 }
    }

    pub fn check_count(&self) -> Result<usize> {
        let dist = self.distribution.as_ref().ok_or_else(|| Error::Config("code needs a distribution or an alist".into()))?;
        if !dist.chk().is_empty() {
            return checks_for_distribution(dist, self.n);
        }
        let rate = self.rate.ok_or_else(|| Error::Config("code rate required when the check side is unspecified".into()))?;
        Ok(checks_for_rate(self.n, rate))
    }

    pub fn build_graph(&self) -> Result<TannerGraph> {
        let g = match &self.alist {
            Some(path) => TannerGraph::load_alist(path)?,
            None => {
                let dist = self.distribution.as_ref().ok_or_else(|| Error::Config("code needs a distribution or an alist".into()))?;
                peg_construct(dist, self.n, self.check_count()?, self.seed)?
            }
        };
        if g.n_var() != self.n {
            return Err(Error::Config(format!("alist has {} columns, config says n = {}", g.n_var(), self.n)));
        }
        Ok(g)
    }
}

/// Graph plus encoder, shareable across links.
#[derive(Debug, Clone)]
pub struct Code {
    pub graph: Arc<EdgeGraph>,
    pub encoder: Arc<Encoder>,
}

impl Code {
    pub fn build(spec: &CodeSpec) -> Result<Self> {
        let g = spec.build_graph()?;
        let encoder = Arc::new(Encoder::build(&g)?);
        Ok(Self { graph: Arc::new(EdgeGraph::new(g)), encoder })
    }

    pub fn link(&self, scheme: Scheme, map: BitMap, flip: Option<FlipSpec>, channel: ChannelParams) -> Result<Link> {
        Link::new(Arc::clone(&self.graph), Arc::clone(&self.encoder), scheme, map, flip, channel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Maximum frames per SNR point.
    pub max_frames: usize,
    /// Stop once this many frames are in error; 0 disables.
    #[serde(default)]
    pub stop_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub frames: usize,
    pub message_bits: usize,
    /// Bit errors after each outer iteration.
    pub bit_errors: Vec<u64>,
    pub frame_errors: u64,
    pub flips: u64,
}

impl BerPoint {
    fn bits(&self) -> f64 {
        (self.frames * self.message_bits) as f64
    }

    /// Final-iteration BER.
    pub fn ber(&self) -> f64 {
        self.ber_at(self.bit_errors.len() - 1)
    }

    pub fn ber_at(&self, iteration: usize) -> f64 {
        if self.frames == 0 {
            return f64::NAN;
        }
        self.bit_errors[iteration] as f64 / self.bits()
    }

    pub fn fer(&self) -> f64 {
        self.frame_errors as f64 / self.frames as f64
    }

    pub fn final_bit_errors(&self) -> u64 {
        *self.bit_errors.last().expect("non-empty trace")
    }

    /// Flips per transmitted symbol.
    pub fn flip_rate(&self, symbols_per_frame: usize) -> f64 {
        self.flips as f64 / (self.frames * symbols_per_frame) as f64
    }
}

/// BER at `link`'s SNR. Frame `f` uses stream `(seed, point, f)`.
pub fn ber_point(link: &Link, sched: &TurboSchedule, budget: Budget, point: u64, seed: u64) -> Result<BerPoint> {
    sched.validate()?;
    if budget.max_frames == 0 {
        return Err(Error::Config("max_frames must be ≥ 1".into()));
    }
    let batch = (rayon::current_num_threads() * 4).max(1);
    let mut p = BerPoint {
        snr_db: link.channel().ebn0_db,
        frames: 0,
        message_bits: link.k(),
        bit_errors: vec![0; sched.outer],
        frame_errors: 0,
        flips: 0,
    };
    let mut next = 0;
    'outer: while next < budget.max_frames {
        let end = (next + batch).min(budget.max_frames);
        let outcomes: Vec<FrameOutcome> = (next..end)
            .into_par_iter()
            .map(|f| link.simulate_frame(sched, &mut rng::stream(seed, &[point, f as u64])))
            .collect::<Result<_>>()?;
        for o in outcomes {
            p.frames += 1;
            p.flips += o.flips as u64;
            for (acc, &e) in p.bit_errors.iter_mut().zip(&o.bit_errors) {
                *acc += e as u64;
            }
            if *o.bit_errors.last().expect("non-empty trace") > 0 {
                p.frame_errors += 1;
            }
            if budget.stop_errors > 0 && p.frame_errors >= budget.stop_errors as u64 {
                break 'outer;
            }
        }
        next = end;
    }
    Ok(p)
}

/// BER over a list of SNRs; point `i` uses stream coordinate `i`.
pub fn ber_sweep(link: &Link, snrs: &[f64], sched: &TurboSchedule, budget: Budget, seed: u64) -> Result<Vec<BerPoint>> {
    snrs.iter()
        .enumerate()
        .map(|(i, &s)| ber_point(&link.at_snr(s), sched, budget, i as u64, seed))
        .collect()
}

/// SNR at which log10(BER) crosses `log10(target)`, by linear
/// interpolation between the first bracketing pair of points.
pub fn snr_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    points.windows(2).find_map(|w| {
        let (s0, b0) = w[0];
        let (s1, b1) = w[1];
        if b0 >= target && b1 < target {
            if b1 <= 0.0 {
                return Some(s1);
            }
            let (l0, l1) = (b0.log10(), b1.log10());
            Some(s0 + (lt - l0) * (s1 - s0) / (l1 - l0))
        } else {
            None
        }
    })
}

/// log10 BER at `snr` by linear interpolation; zero-BER points are
/// skipped.
pub fn ber_at_snr(points: &[(f64, f64)], snr: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, b)| b > 0.0).collect();
    pts.windows(2).find_map(|w| {
        let (s0, b0) = w[0];
        let (s1, b1) = w[1];
        (s0 <= snr && snr <= s1).then(|| {
            let t = if s1 == s0 { 0.0 } else { (snr - s0) / (s1 - s0) };
            10f64.powf(b0.log10() + t * (b1.log10() - b0.log10()))
        })
    })
}
