//! Joint precoder/ISI trellis and exact BCJR symbol detection.
//!
//! A trellis state holds the last `memory` precoded symbols, so the detector
//! outputs posteriors of the symbols *before* the precoder. Recursions run
//! on scaled probabilities, falling back to exact log-sum-exp when a step
//! underflows; neither path uses the max-log approximation.

use crate::error::{Error, Result};
use crate::mapping::{bpsk_amplitude, pam4_amplitude, Labeling};

/// Stand-in for `ln 0` that keeps arithmetic finite.
const LOG_ZERO: f64 = -1e30;

#[derive(Debug, Clone)]
pub struct Trellis {
    alphabet: usize,
    memory: usize,
    n_states: usize,
    precoded: bool,
    /// `next[s * A + a]`
    next: Vec<usize>,
    /// Noiseless output of branch `(s, a)`.
    output: Vec<f64>,
    /// Incoming branches of each state as `(s, a)`.
    incoming: Vec<Vec<(usize, usize)>>,
}

impl Trellis {
    /// Trellis for an alphabet of `amplitudes.len()` symbols sent through
    /// `taps`. With `precoded`, input `a` drives the running sum
    /// `x'_t = x'_{t−1} + a mod A`.
    pub fn new(taps: &[f64], amplitudes: &[f64], precoded: bool) -> Result<Self> {
        let a = amplitudes.len();
        if a < 2 || taps.is_empty() {
            return Err(Error::Input("trellis needs ≥ 2 symbols and ≥ 1 tap".into()));
        }
        let memory = (taps.len() - 1).max(usize::from(precoded));
        let n_states = a.pow(memory as u32);
        let digit = |s: usize, j: usize| (s / a.pow(j as u32)) % a;
        let mut next = vec![0; n_states * a];
        let mut output = vec![0.0; n_states * a];
        let mut incoming = vec![Vec::with_capacity(a); n_states];
        for s in 0..n_states {
            for input in 0..a {
                let x = if precoded { (digit(s, 0) + input) % a } else { input };
                let ns = if memory == 0 { 0 } else { x + a * (s % a.pow(memory as u32 - 1)) };
                let mut y = taps[0] * amplitudes[x];
                for (j, &h) in taps.iter().enumerate().skip(1) {
                    y += h * amplitudes[digit(s, j - 1)];
                }
                next[s * a + input] = ns;
                output[s * a + input] = y;
                incoming[ns].push((s, input));
            }
        }
        Ok(Self { alphabet: a, memory, n_states, precoded, next, output, incoming })
    }

    /// Binary `(−1)^z` symbols.
    pub fn binary(taps: &[f64], precoded: bool) -> Result<Self> {
        Self::new(taps, &[bpsk_amplitude(0), bpsk_amplitude(1)], precoded)
    }

    /// 4-PAM levels.
    pub fn pam4(taps: &[f64], precoded: bool) -> Result<Self> {
        Self::new(taps, &[0, 1, 2, 3].map(pam4_amplitude), precoded)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn precoded(&self) -> bool {
        self.precoded
    }

    pub fn next_state(&self, s: usize, input: usize) -> usize {
        self.next[s * self.alphabet + input]
    }

    pub fn branch_output(&self, s: usize, input: usize) -> f64 {
        self.output[s * self.alphabet + input]
    }

    pub fn incoming(&self, s: usize) -> &[(usize, usize)] {
        &self.incoming[s]
    }
}

#[inline]
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(LOG_ZERO, f64::max);
    if m <= LOG_ZERO {
        return LOG_ZERO;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log-domain BCJR. `log_priors` is `T × A` (row-major) or `None` for
/// uniform priors; `start` fixes the initial state, `None` leaves it
/// uniform. The end state is always free. Returns normalized log-APPs,
/// `T × A`.
pub fn bcjr_log(r: &[f64], trellis: &Trellis, sigma: f64, log_priors: Option<&[f64]>, start: Option<usize>) -> Result<Vec<f64>> {
    validate(r, trellis, sigma, log_priors, start)?;
    Ok(match bcjr_scaled(r, trellis, sigma, log_priors, start) {
        Some(app) => app,
        None => bcjr_log_domain(r, trellis, sigma, log_priors, start),
    })
}

fn validate(r: &[f64], trellis: &Trellis, sigma: f64, log_priors: Option<&[f64]>, start: Option<usize>) -> Result<()> {
    let a = trellis.alphabet;
    let ns = trellis.n_states;
    let t_len = r.len();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Input(format!("σ = {sigma} must be positive")));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite channel sample".into()));
    }
    if let Some(lp) = log_priors {
        if lp.len() != t_len * a {
            return Err(Error::Dimension(format!("prior table has {} entries, expected {}", lp.len(), t_len * a)));
        }
        if lp.iter().any(|x| x.is_nan()) {
            return Err(Error::Input("NaN prior".into()));
        }
    }
    if let Some(s) = start {
        if s >= ns {
            return Err(Error::Input(format!("start state {s} ≥ {ns}")));
        }
    }
    Ok(())
}

/// Probability-domain recursions with per-step scaling. Branch weights are
/// `exp(metric − max_t metric)`; returns `None` if a recursion underflows
/// so the caller can fall back to the log domain.
fn bcjr_scaled(r: &[f64], trellis: &Trellis, sigma: f64, log_priors: Option<&[f64]>, start: Option<usize>) -> Option<Vec<f64>> {
    let a = trellis.alphabet;
    let ns = trellis.n_states;
    let nb = ns * a;
    let t_len = r.len();
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let mut gamma = vec![0.0; t_len * nb];
    for t in 0..t_len {
        let g = &mut gamma[t * nb..(t + 1) * nb];
        let mut m = f64::NEG_INFINITY;
        for (b, gv) in g.iter_mut().enumerate() {
            let d = r[t] - trellis.output[b];
            *gv = log_priors.map_or(0.0, |lp| lp[t * a + b % a]) - d * d * inv2s2;
            m = m.max(*gv);
        }
        for gv in g.iter_mut() {
            *gv = (*gv - m).exp();
        }
    }
    let mut alpha = vec![0.0; (t_len + 1) * ns];
    match start {
        Some(s) => alpha[s] = 1.0,
        None => alpha[..ns].fill(1.0 / ns as f64),
    }
    for t in 0..t_len {
        let g = &gamma[t * nb..(t + 1) * nb];
        let (cur, nxt) = alpha[t * ns..(t + 2) * ns].split_at_mut(ns);
        for (s, &al) in cur.iter().enumerate() {
            if al == 0.0 {
                continue;
            }
            for i in 0..a {
                nxt[trellis.next[s * a + i]] += al * g[s * a + i];
            }
        }
        let sum: f64 = nxt.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return None;
        }
        let inv = 1.0 / sum;
        nxt.iter_mut().for_each(|x| *x *= inv);
    }
    let mut beta = vec![1.0; ns];
    let mut beta_prev = vec![0.0; ns];
    let mut app = vec![0.0; t_len * a];
    for t in (0..t_len).rev() {
        let g = &gamma[t * nb..(t + 1) * nb];
        let al = &alpha[t * ns..(t + 1) * ns];
        let row = &mut app[t * a..(t + 1) * a];
        for s in 0..ns {
            let mut bsum = 0.0;
            for i in 0..a {
                let w = g[s * a + i] * beta[trellis.next[s * a + i]];
                row[i] += al[s] * w;
                bsum += w;
            }
            beta_prev[s] = bsum;
        }
        let total: f64 = row.iter().sum();
        let bmax = beta_prev.iter().copied().fold(0.0, f64::max);
        if !(total > 0.0 && total.is_finite() && bmax > 0.0 && bmax.is_finite()) {
            return None;
        }
        for p in row.iter_mut() {
            *p = if *p > 0.0 { (*p / total).ln().max(LOG_ZERO) } else { LOG_ZERO };
        }
        let inv = 1.0 / bmax;
        for (b, &p) in beta.iter_mut().zip(&beta_prev) {
            *b = p * inv;
        }
    }
    Some(app)
}

fn bcjr_log_domain(r: &[f64], trellis: &Trellis, sigma: f64, log_priors: Option<&[f64]>, start: Option<usize>) -> Vec<f64> {
    let a = trellis.alphabet;
    let ns = trellis.n_states;
    let t_len = r.len();
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let gamma_at = |t: usize, gamma: &mut [f64]| {
        for s in 0..ns {
            for i in 0..a {
                let d = r[t] - trellis.output[s * a + i];
                let p = log_priors.map_or(0.0, |lp| lp[t * a + i]);
                gamma[s * a + i] = p - d * d * inv2s2;
            }
        }
    };

    let mut alpha = vec![LOG_ZERO; (t_len + 1) * ns];
    match start {
        Some(s) => alpha[s] = 0.0,
        None => alpha[..ns].fill(0.0),
    }
    let mut gamma = vec![0.0; ns * a];
    for t in 0..t_len {
        gamma_at(t, &mut gamma);
        let (cur, nxt) = alpha[t * ns..(t + 2) * ns].split_at_mut(ns);
        for (sp, out) in nxt.iter_mut().enumerate() {
            *out = log_sum_exp(trellis.incoming[sp].iter().map(|&(s, i)| cur[s] + gamma[s * a + i]));
        }
        let m = nxt.iter().copied().fold(LOG_ZERO, f64::max);
        for v in nxt.iter_mut() {
            *v = (*v - m).max(LOG_ZERO);
        }
    }

    let mut beta = vec![0.0; ns];
    let mut beta_prev = vec![0.0; ns];
    let mut app = vec![0.0; t_len * a];
    let mut terms = vec![0.0; ns];
    for t in (0..t_len).rev() {
        gamma_at(t, &mut gamma);
        let al = &alpha[t * ns..(t + 1) * ns];
        for i in 0..a {
            for s in 0..ns {
                terms[s] = al[s] + gamma[s * a + i] + beta[trellis.next[s * a + i]];
            }
            app[t * a + i] = log_sum_exp(terms.iter().copied());
        }
        let norm = log_sum_exp(app[t * a..(t + 1) * a].iter().copied());
        for v in &mut app[t * a..(t + 1) * a] {
            *v = (*v - norm).max(LOG_ZERO);
        }
        for (s, out) in beta_prev.iter_mut().enumerate() {
            *out = log_sum_exp((0..a).map(|i| gamma[s * a + i] + beta[trellis.next[s * a + i]]));
        }
        let m = beta_prev.iter().copied().fold(LOG_ZERO, f64::max);
        for (b, &p) in beta.iter_mut().zip(&beta_prev) {
            *b = (p - m).max(LOG_ZERO);
        }
    }
    app
}

/// BCJR with a probability-domain interface: prior rows and returned APP
/// rows sum to one.
pub fn bcjr(r: &[f64], trellis: &Trellis, sigma: f64, priors: Option<&[f64]>, start: Option<usize>) -> Result<Vec<f64>> {
    let lp: Option<Vec<f64>> = priors.map(|p| p.iter().map(|&x| if x > 0.0 { x.ln() } else { LOG_ZERO }).collect());
    let app = bcjr_log(r, trellis, sigma, lp.as_deref(), start)?;
    Ok(app.into_iter().map(f64::exp).collect())
}

/// How symbols carry bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitMap {
    Binary,
    Quaternary(Labeling),
}

impl BitMap {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            BitMap::Binary => 1,
            BitMap::Quaternary(_) => 2,
        }
    }

    pub fn alphabet(&self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Bit `j` of symbol `s`; for 4-PAM, `j = 0` is `Z1`.
    #[inline]
    pub fn bit(&self, s: usize, j: usize) -> u8 {
        match self {
            BitMap::Binary => s as u8,
            BitMap::Quaternary(lab) => {
                let (z1, z2) = lab.bits(s as u8);
                if j == 0 {
                    z1
                } else {
                    z2
                }
            }
        }
    }
}

/// Bit LLRs `ln(P(b=0)/P(b=1))` from log-APP rows.
pub fn symbol_bit_llr_log(log_app: &[f64], map: &BitMap) -> Vec<f64> {
    let a = map.alphabet();
    let bps = map.bits_per_symbol();
    let mut out = Vec::with_capacity(log_app.len() / a * bps);
    for row in log_app.chunks_exact(a) {
        for j in 0..bps {
            let l0 = log_sum_exp((0..a).filter(|&s| map.bit(s, j) == 0).map(|s| row[s]));
            let l1 = log_sum_exp((0..a).filter(|&s| map.bit(s, j) == 1).map(|s| row[s]));
            out.push(l0 - l1);
        }
    }
    out
}

/// Bit LLRs from probability-domain APP rows.
pub fn symbol_bit_llr(app: &[f64], map: &BitMap) -> Vec<f64> {
    let log_app: Vec<f64> = app.iter().map(|&p| if p > 0.0 { p.ln() } else { LOG_ZERO }).collect();
    symbol_bit_llr_log(&log_app, map)
}

/// `ln P(b)` for a bit with LLR `l`.
#[inline]
fn log_bit_prob(l: f64, bit: u8) -> f64 {
    let x = if bit == 0 { -l } else { l };
    // −ln(1 + e^x), computed stably.
    if x > 0.0 {
        -x - (-x).exp().ln_1p()
    } else {
        -x.exp().ln_1p()
    }
}

/// Symbol log-priors from bit LLRs, assuming the bits of a symbol are
/// independent.
pub fn bit_llr_to_log_priors(llr: &[f64], map: &BitMap) -> Vec<f64> {
    let a = map.alphabet();
    let bps = map.bits_per_symbol();
    let mut out = Vec::with_capacity(llr.len() / bps * a);
    for bits in llr.chunks_exact(bps) {
        for s in 0..a {
            out.push((0..bps).map(|j| log_bit_prob(bits[j], map.bit(s, j))).sum());
        }
    }
    out
}

pub fn bit_llr_to_priors(llr: &[f64], map: &BitMap) -> Vec<f64> {
    bit_llr_to_log_priors(llr, map).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PR1221;
    use crate::mapping::LabelingKind;
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Exhaustive posterior over all `A^L` input sequences from state 0.
    fn brute_force(r: &[f64], taps: &[f64], amps: &[f64], precoded: bool, sigma: f64, lp: &[f64]) -> Vec<f64> {
        let a = amps.len();
        let l = r.len();
        let mut acc = vec![Vec::new(); l * a];
        for code in 0..a.pow(l as u32) {
            let inputs: Vec<usize> = (0..l).map(|t| (code / a.pow(t as u32)) % a).collect();
            let mut state = 0usize;
            let sent: Vec<usize> = inputs
                .iter()
                .map(|&i| {
                    state = if precoded { (state + i) % a } else { i };
                    state
                })
                .collect();
            let mut ll = 0.0;
            for t in 0..l {
                let y: f64 = (0..taps.len()).map(|j| taps[j] * if t >= j { amps[sent[t - j]] } else { amps[0] }).sum();
                ll += -(r[t] - y).powi(2) / (2.0 * sigma * sigma) + lp[t * a + inputs[t]];
            }
            for t in 0..l {
                acc[t * a + inputs[t]].push(ll);
            }
        }
        let mut out: Vec<f64> = acc.iter().map(|v| log_sum_exp(v.iter().copied())).collect();
        for row in out.chunks_exact_mut(a) {
            let n = log_sum_exp(row.iter().copied());
            row.iter_mut().for_each(|x| *x -= n);
        }
        out
    }

    fn max_llr_error(taps: &[f64], amps: &[f64], sigma: f64, seed: u64) -> f64 {
        let a = amps.len();
        let trellis = Trellis::new(taps, amps, true).unwrap();
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut worst: f64 = 0.0;
        for trial in 0..100 {
            let mut rg = rng::stream(seed, &[trial]);
            let inputs: Vec<usize> = (0..8).map(|_| rg.random_range(0..a)).collect();
            let mut st = 0;
            let sent: Vec<f64> = inputs
                .iter()
                .map(|&i| {
                    st = (st + i) % a;
                    amps[st]
                })
                .collect();
            let r: Vec<f64> = (0..8)
                .map(|t| (0..taps.len()).map(|j| taps[j] * if t >= j { sent[t - j] } else { amps[0] }).sum::<f64>() + noise.sample(&mut rg))
                .collect();
            let lp: Vec<f64> = (0..8 * a).map(|_| rg.random_range(-1.5..0.0)).collect();
            let fast = bcjr_log(&r, &trellis, sigma, Some(&lp), Some(0)).unwrap();
            let slow = brute_force(&r, taps, amps, true, sigma, &lp);
            for t in 0..8 {
                for i in 1..a {
                    let e = (fast[t * a + i] - fast[t * a]) - (slow[t * a + i] - slow[t * a]);
                    worst = worst.max(e.abs());
                }
            }
        }
        worst
    }

    #[test]
    fn matches_brute_force_binary_pr() {
        let h: Vec<f64> = PR1221.iter().map(|x| x / 10f64.sqrt()).collect();
        let err = max_llr_error(&h, &[1.0, -1.0], 0.5, 1);
        assert!(err < 1e-9, "max LLR error {err}");
    }

    #[test]
    fn matches_brute_force_pam4_memory_three() {
        let h: Vec<f64> = PR1221.iter().map(|x| x / 10f64.sqrt()).collect();
        let amps = [0, 1, 2, 3].map(pam4_amplitude);
        let err = max_llr_error(&h, &amps, 0.3, 2);
        assert!(err < 1e-9, "max LLR error {err}");
    }

    #[test]
    fn scaled_and_log_domain_agree() {
        let h: Vec<f64> = PR1221.iter().map(|x| x / 10f64.sqrt()).collect();
        let t = Trellis::pam4(&h, true).unwrap();
        let mut rg = rng::stream(6, &[]);
        let r: Vec<f64> = (0..300).map(|_| rg.random_range(-2.0..2.0)).collect();
        let lp: Vec<f64> = (0..1200).map(|_| rg.random_range(-3.0..0.0)).collect();
        let a = bcjr_scaled(&r, &t, 0.2, Some(&lp), Some(0)).unwrap();
        let b = bcjr_log_domain(&r, &t, 0.2, Some(&lp), Some(0));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 || (*x <= -700.0 && *y <= -700.0), "{x} vs {y}");
        }
    }

    #[test]
    fn log_domain_survives_extreme_metrics() {
        let h: Vec<f64> = PR1221.iter().map(|x| x / 10f64.sqrt()).collect();
        let t = Trellis::pam4(&h, true).unwrap();
        let r = [1e3, -1e3, 0.5, 1e3];
        let app = bcjr_log_domain(&r, &t, 1e-3, None, Some(0));
        assert!(app.iter().all(|x| x.is_finite()));
        for row in app.chunks_exact(4) {
            assert!((log_sum_exp(row.iter().copied())).abs() < 1e-9);
        }
    }

    #[test]
    fn memoryless_binary_llr() {
        let t = Trellis::binary(&[1.0], false).unwrap();
        assert_eq!(t.n_states(), 1);
        let sigma = 0.8;
        let r = [0.3, -1.2, 2.0];
        let prior_llr = [0.5, -0.25, 0.0];
        let lp = bit_llr_to_log_priors(&prior_llr, &BitMap::Binary);
        let app = bcjr_log(&r, &t, sigma, Some(&lp), None).unwrap();
        let llr = symbol_bit_llr_log(&app, &BitMap::Binary);
        for i in 0..3 {
            let expect = 2.0 * r[i] / (sigma * sigma) + prior_llr[i];
            assert!((llr[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_input_gives_zero_llr() {
        let h: Vec<f64> = PR1221.iter().map(|x| x / 10f64.sqrt()).collect();
        let t = Trellis::binary(&h, false).unwrap();
        let app = bcjr(&[0.0; 9], &t, 0.7, None, None).unwrap();
        let llr = symbol_bit_llr(&app, &BitMap::Binary);
        assert!(llr[4].abs() < 1e-12);
    }

    #[test]
    fn trellis_structure() {
        let t = Trellis::pam4(&[0.5, 0.5, 0.5, 0.5], true).unwrap();
        assert_eq!(t.n_states(), 64);
        let mut indeg = vec![0; 64];
        for s in 0..64 {
            for i in 0..4 {
                indeg[t.next_state(s, i)] += 1;
            }
        }
        assert!(indeg.iter().all(|&d| d == 4));
        assert!((0..64).all(|s| t.incoming(s).len() == 4));
    }

    #[test]
    fn app_rows_normalized() {
        let h: Vec<f64> = PR1221.iter().map(|x| x / 10f64.sqrt()).collect();
        let t = Trellis::pam4(&h, true).unwrap();
        let mut rg = rng::stream(4, &[]);
        let r: Vec<f64> = (0..200).map(|_| rg.random_range(-3.0..3.0)).collect();
        let app = bcjr(&r, &t, 0.05, None, Some(0)).unwrap();
        for row in app.chunks_exact(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|p| p.is_finite()));
        }
        assert!(bcjr(&r, &t, 0.0, None, None).is_err());
    }

    #[test]
    fn bit_llr_conversions() {
        let nat = BitMap::Quaternary(Labeling::new(LabelingKind::Natural));
        let llr = symbol_bit_llr(&[1e-20, 1e-20, 1e-20, 1.0], &nat);
        assert!(llr.iter().all(|&l| l < -40.0));
        let llr = symbol_bit_llr(&[0.25; 4], &nat);
        assert!(llr.iter().all(|&l| l.abs() < 1e-12));
        // Bit → prior → bit is a fixed point for product-form priors.
        let gray = BitMap::Quaternary(Labeling::new(LabelingKind::Gray));
        let mut rg = rng::stream(5, &[]);
        for map in [nat, gray] {
            let bits: Vec<f64> = (0..40).map(|_| rg.random_range(-8.0..8.0)).collect();
            let priors = bit_llr_to_priors(&bits, &map);
            for row in priors.chunks_exact(4) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let back = symbol_bit_llr(&priors, &map);
            for (a, b) in bits.iter().zip(&back) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
