//! End-to-end write/read link and the turbo-equalization loop.
//!
//! Write side: encode, interleave, group bits into symbols, apply the
//! deliberate-flipping constrainer, precode, map, and prepend a preamble of
//! `memory` zero symbols so the detector starts from a known state. Read
//! side: alternate BCJR detection and LDPC decoding, exchanging extrinsic
//! LLRs `L_a(v) = L(y) − L_a(y)` and `L_a(y) = L(v) − L_a(v)`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::encoder::Encoder;
use crate::equalize::{bcjr_log, bit_llr_to_log_priors, symbol_bit_llr_log, BitMap, Trellis};
use crate::error::{Error, Result};
use crate::ldpc::{Algorithm, DecoderState, EdgeGraph};
use crate::mapping::{bpsk_amplitude, pam4_amplitude, precode, Interleaver, Scheme};
use crate::rll::{binary_locate, quaternary_locate};

/// Deliberate-flipping parameters. `fill` is the label written into a
/// violating zero run (quaternary only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipSpec {
    pub k: usize,
    #[serde(default = "default_fill")]
    pub fill: u8,
}

fn default_fill() -> u8 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurboSchedule {
    pub outer: usize,
    pub inner: usize,
    #[serde(default)]
    pub reset: bool,
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Stop once the hard decision satisfies every check; later trace
    /// entries repeat the final state.
    #[serde(default = "default_true")]
    pub early_stop: bool,
}

fn default_true() -> bool {
    true
}

impl TurboSchedule {
    pub fn new(outer: usize, inner: usize) -> Result<Self> {
        let s = Self { outer, inner, reset: false, algorithm: Algorithm::SumProduct, early_stop: true };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer == 0 || self.inner == 0 {
            return Err(Error::Input(format!("U_o = {} and U_i = {} must be ≥ 1", self.outer, self.inner)));
        }
        Ok(())
    }
}

/// Everything the write side produced for one frame.
#[derive(Debug, Clone)]
pub struct Written {
    /// Codeword, code order.
    pub v: Vec<u8>,
    /// Channel symbols before precoding, after flipping.
    pub symbols: Vec<u8>,
    pub flips: usize,
    /// Amplitudes including the preamble.
    pub amplitudes: Vec<f64>,
}

/// Per-outer-iteration snapshot passed to observers. LLRs are in code order.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub outer: usize,
    /// Detector extrinsic `L_a(v)`, the decoder's channel input.
    pub detector_extrinsic: &'a [f64],
    /// Decoder extrinsic `L(v) − L_a(v)`.
    pub decoder_extrinsic: &'a [f64],
    /// Detector a-priori input `L_a(y)`, deinterleaved.
    pub detector_prior: &'a [f64],
    pub hard: &'a [u8],
    pub parity_ok: bool,
}

#[derive(Debug, Clone)]
pub struct TurboOutput {
    /// Decoded message after each outer iteration.
    pub messages: Vec<Vec<u8>>,
    pub parity_ok: Vec<bool>,
    /// Outer iterations actually run.
    pub iterations_run: usize,
}

#[derive(Debug, Clone)]
pub struct FrameOutcome {
    /// Message bit errors after each outer iteration.
    pub bit_errors: Vec<usize>,
    pub flips: usize,
    pub parity_ok: bool,
}

/// Write/read path without the code: interleaver, constrainer, precoder,
/// channel and detector.
#[derive(Debug, Clone)]
pub struct Chain {
    interleaver: Interleaver,
    map: BitMap,
    flip: Option<FlipSpec>,
    channel: ChannelParams,
    trellis: Arc<Trellis>,
}

impl Chain {
    pub fn new(n: usize, scheme: Scheme, map: BitMap, flip: Option<FlipSpec>, channel: ChannelParams) -> Result<Self> {
        if !n.is_multiple_of(map.bits_per_symbol()) {
            return Err(Error::Dimension(format!("N = {n} not a multiple of {} bits per symbol", map.bits_per_symbol())));
        }
        if channel.bits_per_symbol != map.bits_per_symbol() {
            return Err(Error::Dimension(format!(
                "channel expects {} bits per symbol, mapping has {}",
                channel.bits_per_symbol,
                map.bits_per_symbol()
            )));
        }
        if let Some(f) = flip {
            if map.bits_per_symbol() == 2 && !(f.fill == 1 || f.fill == 2) {
                return Err(Error::Input(format!("fill symbol {} not in {{1,2}}", f.fill)));
            }
            if f.k + 1 > n / map.bits_per_symbol() {
                return Err(Error::Input(format!("k = {} too large for the block", f.k)));
            }
        }
        let interleaver = Interleaver::new(scheme, n)?;
        let trellis = match map {
            BitMap::Binary => Trellis::binary(&channel.taps, true)?,
            BitMap::Quaternary(_) => Trellis::pam4(&channel.taps, true)?,
        };
        Ok(Self { interleaver, map, flip, channel: channel.validated()?, trellis: Arc::new(trellis) })
    }

    pub fn n(&self) -> usize {
        self.interleaver.len()
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn bit_map(&self) -> BitMap {
        self.map
    }

    pub fn flip(&self) -> Option<FlipSpec> {
        self.flip
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }

    /// Same chain at another Eb/N0.
    pub fn at_snr(&self, ebn0_db: f64) -> Self {
        Self { channel: self.channel.with_ebn0(ebn0_db), ..self.clone() }
    }

    pub fn with_noiseless(&self, noiseless: bool) -> Self {
        Self { channel: ChannelParams { noiseless, ..self.channel.clone() }, ..self.clone() }
    }

    /// Write side for an arbitrary `N`-bit word in code order.
    pub fn write_word(&self, v: Vec<u8>) -> Result<Written> {
        if v.len() != self.n() {
            return Err(Error::Dimension(format!("word length {} != N = {}", v.len(), self.n())));
        }
        let y = self.interleaver.interleave(&v)?;
        let (symbols, flips, amps): (Vec<u8>, usize, fn(u8) -> f64) = match self.map {
            BitMap::Binary => match self.flip {
                Some(f) => {
                    let q = binary_locate(&y, f.k)?;
                    (q.apply(&y), q.count(), bpsk_amplitude)
                }
                None => (y, 0, bpsk_amplitude),
            },
            BitMap::Quaternary(lab) => {
                let labels: Vec<u8> = y.chunks_exact(2).map(|p| p[0] << 1 | p[1]).collect();
                let (labels, flips) = match self.flip {
                    Some(f) => {
                        let q = quaternary_locate(&labels, f.k, f.fill)?;
                        (q.apply(&labels), q.count())
                    }
                    None => (labels, 0),
                };
                (labels.iter().map(|&l| lab.level(l)).collect(), flips, pam4_amplitude)
            }
        };
        let base = self.map.alphabet() as u8;
        let mut amplitudes = vec![amps(0); self.trellis.memory()];
        amplitudes.extend(precode(&symbols, base).into_iter().map(amps));
        Ok(Written { v, symbols, flips, amplitudes })
    }

    /// Channel output for the data symbols (preamble samples dropped).
    pub fn receive<R: Rng + ?Sized>(&self, written: &Written, rng: &mut R) -> Vec<f64> {
        let r = self.channel.transmit(&written.amplitudes, rng);
        r[self.trellis.memory()..].to_vec()
    }

    /// One detector pass: bit LLRs `L(y)` in interleaved order, given
    /// a-priori bit LLRs in interleaved order.
    pub fn detect(&self, r: &[f64], prior: Option<&[f64]>) -> Result<Vec<f64>> {
        let lp = prior.map(|p| bit_llr_to_log_priors(p, &self.map));
        let app = bcjr_log(r, &self.trellis, self.channel.detector_sigma(), lp.as_deref(), Some(0))?;
        Ok(symbol_bit_llr_log(&app, &self.map))
    }

    /// Decoder-input LLRs `L_d(v)` after a single detector pass with no
    /// prior, in code order.
    pub fn detector_llr(&self, r: &[f64]) -> Result<Vec<f64>> {
        let l = self.detect(r, None)?;
        self.interleaver.deinterleave(&l)
    }
}

/// A chain plus the LDPC code.
#[derive(Debug, Clone)]
pub struct Link {
    graph: Arc<EdgeGraph>,
    encoder: Arc<Encoder>,
    chain: Chain,
}

impl std::ops::Deref for Link {
    type Target = Chain;

    fn deref(&self) -> &Chain {
        &self.chain
    }
}

impl Link {
    /// The channel's `code_rate` is replaced by the encoder's `K/N`.
    pub fn new(
        graph: Arc<EdgeGraph>,
        encoder: Arc<Encoder>,
        scheme: Scheme,
        map: BitMap,
        flip: Option<FlipSpec>,
        channel: ChannelParams,
    ) -> Result<Self> {
        let n = graph.graph().n_var();
        if encoder.n() != n {
            return Err(Error::Dimension(format!("encoder length {} != graph length {n}", encoder.n())));
        }
        let channel = ChannelParams { code_rate: encoder.rate(), ..channel };
        let chain = Chain::new(n, scheme, map, flip, channel)?;
        Ok(Self { graph, encoder, chain })
    }

    pub fn k(&self) -> usize {
        self.encoder.k()
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn graph(&self) -> &Arc<EdgeGraph> {
        &self.graph
    }

    pub fn at_snr(&self, ebn0_db: f64) -> Self {
        Self { chain: self.chain.at_snr(ebn0_db), ..self.clone() }
    }

    pub fn with_noiseless(&self, noiseless: bool) -> Self {
        Self { chain: self.chain.with_noiseless(noiseless), ..self.clone() }
    }

    /// Write side for a message.
    pub fn write(&self, u: &[u8]) -> Result<Written> {
        let v = self.encoder.encode(u)?;
        self.chain.write_word(v)
    }

    pub fn turbo_decode(
        &self,
        r: &[f64],
        sched: &TurboSchedule,
        mut observer: Option<&mut dyn FnMut(&IterationView<'_>)>,
    ) -> Result<TurboOutput> {
        sched.validate()?;
        let n = self.n();
        if r.len() * self.chain.map.bits_per_symbol() != n {
            return Err(Error::Dimension(format!("{} samples for N = {n}", r.len())));
        }
        let mut dec = DecoderState::new(Arc::clone(&self.graph));
        let mut la_y = vec![0.0; n];
        let mut messages = Vec::with_capacity(sched.outer);
        let mut parity = Vec::with_capacity(sched.outer);
        let mut run = 0;
        for outer in 0..sched.outer {
            let l_y = self.detect(r, (outer > 0).then_some(la_y.as_slice()))?;
            let le_y: Vec<f64> = l_y.iter().zip(&la_y).map(|(a, b)| a - b).collect();
            let la_v = self.chain.interleaver.deinterleave(&le_y)?;
            let out = dec.decode(&la_v, sched.inner, sched.algorithm, sched.reset)?;
            let prior_y = std::mem::replace(&mut la_y, self.chain.interleaver.interleave(&out.extrinsic)?);
            messages.push(self.encoder.extract_message(&out.hard));
            parity.push(out.parity_ok);
            run = outer + 1;
            if let Some(obs) = observer.as_deref_mut() {
                let prior = self.chain.interleaver.deinterleave(&prior_y)?;
                obs(&IterationView {
                    outer,
                    detector_extrinsic: &la_v,
                    decoder_extrinsic: &out.extrinsic,
                    detector_prior: &prior,
                    hard: &out.hard,
                    parity_ok: out.parity_ok,
                });
            }
            if sched.early_stop && out.parity_ok {
                break;
            }
        }
        while messages.len() < sched.outer {
            messages.push(messages[messages.len() - 1].clone());
            parity.push(parity[parity.len() - 1]);
        }
        Ok(TurboOutput { messages, parity_ok: parity, iterations_run: run })
    }

    /// Random message through the whole chain.
    pub fn simulate_frame<R: Rng + ?Sized>(&self, sched: &TurboSchedule, rng: &mut R) -> Result<FrameOutcome> {
        let u: Vec<u8> = (0..self.k()).map(|_| rng.random_range(0..2u8)).collect();
        let w = self.write(&u)?;
        let r = self.receive(&w, rng);
        let out = self.turbo_decode(&r, sched, None)?;
        let bit_errors = out.messages.iter().map(|m| m.iter().zip(&u).filter(|(a, b)| a != b).count()).collect();
        Ok(FrameOutcome { bit_errors, flips: w.flips, parity_ok: *out.parity_ok.last().unwrap_or(&false) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PR1221;
    use crate::degree::{DegreeDistribution, Perspective};
    use crate::mapping::{Labeling, LabelingKind};
    use crate::peg::{checks_for_rate, peg_construct};
    use crate::rng;

    fn link(n: usize, scheme: Scheme, flip: Option<FlipSpec>, snr: f64) -> Link {
        let d = DegreeDistribution::new(vec![(2, 0.5), (5, 0.5)], vec![], Perspective::Node).unwrap();
        let g = peg_construct(&d, n, checks_for_rate(n, 0.65), 0).unwrap();
        let enc = Arc::new(Encoder::build(&g).unwrap());
        let ch = ChannelParams::pr(&PR1221, snr, 0.65, 2).unwrap();
        let map = BitMap::Quaternary(Labeling::new(LabelingKind::Natural));
        Link::new(Arc::new(EdgeGraph::new(g)), enc, scheme, map, flip, ch).unwrap()
    }

    #[test]
    fn noiseless_unflipped_recovers_message() {
        let l = link(256, Scheme::TypeII, None, 20.0).with_noiseless(true);
        let sched = TurboSchedule::new(1, 5).unwrap();
        let out = l.simulate_frame(&sched, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(out.bit_errors, vec![0]);
        assert!(out.parity_ok);
    }

    #[test]
    fn flips_land_on_the_strong_half() {
        let flip = FlipSpec { k: 3, fill: 2 };
        let l = link(256, Scheme::TypeII, Some(flip), 5.0);
        let w = l.write_word(vec![0; 256]).unwrap();
        assert!(w.flips > 0);
        // Recover labels and compare against the unflipped word bit by bit.
        let lab = Labeling::new(LabelingKind::Natural);
        let bits: Vec<u8> = w.symbols.iter().flat_map(|&s| {
            let (a, b) = lab.bits(s);
            [a, b]
        }).collect();
        let back = l.interleaver().deinterleave(&bits).unwrap();
        for (i, &b) in back.iter().enumerate() {
            if b == 1 {
                assert!(i >= 128, "flip in weak half at {i}");
            }
        }
        assert_eq!(back.iter().filter(|&&b| b == 1).count(), w.flips);
    }

    #[test]
    fn extrinsic_identity_holds_every_iteration() {
        let l = link(256, Scheme::TypeII, Some(FlipSpec { k: 3, fill: 2 }), 6.0);
        let u = vec![0u8; l.k()];
        let w = l.write(&u).unwrap();
        let r = l.receive(&w, &mut rng::stream(2, &[]));
        let mut sched = TurboSchedule::new(4, 2).unwrap();
        sched.early_stop = false;
        let mut seen = 0;
        let mut check = |view: &IterationView<'_>| {
            seen += 1;
            // L_a(v) + L_a(y) reproduces the detector output L(y).
            let interleaved_sum: Vec<f64> =
                view.detector_extrinsic.iter().zip(view.detector_prior).map(|(a, b)| a + b).collect();
            let l_y = l.detect(&r, (view.outer > 0).then_some(l.interleaver().interleave(view.detector_prior).unwrap().as_slice())).unwrap();
            let l_y = l.interleaver().deinterleave(&l_y).unwrap();
            for (a, b) in interleaved_sum.iter().zip(&l_y) {
                assert!((a - b).abs() < 1e-9);
            }
        };
        l.turbo_decode(&r, &sched, Some(&mut check)).unwrap();
        assert_eq!(seen, 4);
    }

    #[test]
    fn early_stop_fills_trace() {
        let l = link(256, Scheme::TypeII, None, 20.0);
        let sched = TurboSchedule::new(5, 3).unwrap();
        let u = vec![1u8; l.k()];
        let w = l.write(&u).unwrap();
        let r = l.receive(&w, &mut rng::stream(3, &[]));
        let out = l.turbo_decode(&r, &sched, None).unwrap();
        assert_eq!(out.messages.len(), 5);
        assert!(out.iterations_run < 5);
        assert!(out.messages.iter().all(|m| m == &u));
    }

    #[test]
    fn frames_are_reproducible() {
        let l = link(256, Scheme::TypeII, Some(FlipSpec { k: 3, fill: 2 }), 4.0);
        let sched = TurboSchedule::new(3, 2).unwrap();
        let a = l.simulate_frame(&sched, &mut rng::stream(7, &[0])).unwrap();
        let b = l.simulate_frame(&sched, &mut rng::stream(7, &[0])).unwrap();
        assert_eq!(a.bit_errors, b.bit_errors);
    }

    #[test]
    fn dimension_errors() {
        let l = link(256, Scheme::TypeII, None, 5.0);
        let sched = TurboSchedule::new(1, 1).unwrap();
        assert!(l.turbo_decode(&[0.0; 10], &sched, None).is_err());
        assert!(TurboSchedule::new(0, 1).is_err());
    }
}
