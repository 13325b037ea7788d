//! Discrete-time recording channels.
//!
//! Eb/N0 convention: `N0 = E_s / (R · bits_per_symbol · 10^(Eb/N0 / 10))`
//! where `E_s` is the received signal energy per symbol for a unit-energy
//! input, i.e. the squared norm of the read-back taps. AWGN has variance
//! `N0 / 2`. PR targets are normalized to unit norm; the magneto-optical
//! taps are used as tabulated.
//!
//! Magneto-optical channel, with the output re-indexed so that sample `t`
//! depends on `x_t .. x_{t−3}` through `g`:
//!
//! `r_t = Σ_{m=0}^{3} g_{m+1} x_{t−m} − Σ_{i=−2}^{2} x_{t+1−i} Δ_{t+1−i} Tf_i + n_t`
//!
//! with `Δ ~ N(0, σ_Δ²)`, `σ_Δ² = β N0 / Σ Tf_i²`, so the jitter term has
//! power `β N0` per sample.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PR1221: [f64; 4] = [1.0, 2.0, 2.0, 1.0];
pub const MO_BINARY_TF: [f64; 5] = [0.0962, 0.1085, 0.1128, 0.1085, 0.0962];
pub const MO_BINARY_G: [f64; 4] = [0.1114, 0.1028, 0.1028, 0.1114];
pub const MO_4LEVEL_TF: [f64; 5] = [0.0981, 0.2251, 0.2969, 0.2251, 0.0981];
pub const MO_4LEVEL_G: [f64; 4] = [0.1601, 0.2727, 0.2727, 0.1601];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Pr,
    MoBinary,
    #[serde(rename = "mo_4level")]
    Mo4Level,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub kind: ChannelKind,
    /// Read-back taps (`h` for PR, `g` for MO), already normalized.
    pub taps: Vec<f64>,
    /// Jitter taps `Tf_{−2..2}`; empty for PR.
    pub jitter_taps: Vec<f64>,
    pub ebn0_db: f64,
    pub beta: f64,
    pub code_rate: f64,
    pub bits_per_symbol: usize,
    /// Suppresses noise and jitter while keeping the nominal σ for detection.
    pub noiseless: bool,
}

/// AWGN standard deviation `sqrt(N0/2)` under the crate's Eb/N0 convention.
pub fn noise_sigma(ebn0_db: f64, rate: f64, bits_per_symbol: usize, signal_energy: f64) -> f64 {
    (n0(ebn0_db, rate, bits_per_symbol, signal_energy) / 2.0).sqrt()
}

fn n0(ebn0_db: f64, rate: f64, bits_per_symbol: usize, signal_energy: f64) -> f64 {
    signal_energy / (rate * bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

impl ChannelParams {
    /// PR target with the given (unnormalized) impulse response.
    pub fn pr(h: &[f64], ebn0_db: f64, code_rate: f64, bits_per_symbol: usize) -> Result<Self> {
        let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        if h.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::Input("PR target must be non-empty and non-zero".into()));
        }
        Self {
            kind: ChannelKind::Pr,
            taps: h.iter().map(|x| x / norm).collect(),
            jitter_taps: Vec::new(),
            ebn0_db,
            beta: 0.0,
            code_rate,
            bits_per_symbol,
            noiseless: false,
        }
        .validated()
    }

    pub fn mo_binary(ebn0_db: f64, beta: f64, code_rate: f64) -> Result<Self> {
        Self::mo(ChannelKind::MoBinary, &MO_BINARY_G, &MO_BINARY_TF, ebn0_db, beta, code_rate, 1)
    }

    pub fn mo_4level(ebn0_db: f64, beta: f64, code_rate: f64) -> Result<Self> {
        Self::mo(ChannelKind::Mo4Level, &MO_4LEVEL_G, &MO_4LEVEL_TF, ebn0_db, beta, code_rate, 2)
    }

    /// MO channel with caller-supplied taps.
    pub fn mo(
        kind: ChannelKind,
        g: &[f64],
        tf: &[f64],
        ebn0_db: f64,
        beta: f64,
        code_rate: f64,
        bits_per_symbol: usize,
    ) -> Result<Self> {
        if kind == ChannelKind::Pr {
            return Err(Error::Input("use ChannelParams::pr for PR targets".into()));
        }
        if g.len() != 4 || tf.len() != 5 {
            return Err(Error::Input(format!("MO taps need |g| = 4 and |Tf| = 5, got {} and {}", g.len(), tf.len())));
        }
        Self {
            kind,
            taps: g.to_vec(),
            jitter_taps: tf.to_vec(),
            ebn0_db,
            beta,
            code_rate,
            bits_per_symbol,
            noiseless: false,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !self.ebn0_db.is_finite() {
            return Err(Error::Input(format!("Eb/N0 {} dB is not finite", self.ebn0_db)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Input(format!("jitter fraction β = {} must be ≥ 0", self.beta)));
        }
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return Err(Error::Input(format!("code rate {} outside (0, 1]", self.code_rate)));
        }
        if self.bits_per_symbol == 0 {
            return Err(Error::Input("bits_per_symbol must be ≥ 1".into()));
        }
        if self.kind == ChannelKind::Pr && self.beta != 0.0 {
            return Err(Error::Input("PR channel has no jitter; β must be 0".into()));
        }
        Ok(self)
    }

    pub fn with_ebn0(&self, ebn0_db: f64) -> Self {
        Self { ebn0_db, ..self.clone() }
    }

    pub fn signal_energy(&self) -> f64 {
        self.taps.iter().map(|x| x * x).sum()
    }

    pub fn n0(&self) -> f64 {
        n0(self.ebn0_db, self.code_rate, self.bits_per_symbol, self.signal_energy())
    }

    /// AWGN standard deviation.
    pub fn sigma(&self) -> f64 {
        (self.n0() / 2.0).sqrt()
    }

    /// Standard deviation seen by the detector: AWGN plus the jitter term
    /// treated as white Gaussian noise of power `β N0`.
    pub fn detector_sigma(&self) -> f64 {
        (self.n0() * (0.5 + self.beta)).sqrt()
    }

    /// Standard deviation of the per-symbol position jitter `Δ`.
    pub fn jitter_sigma(&self) -> f64 {
        let e: f64 = self.jitter_taps.iter().map(|x| x * x).sum();
        if e == 0.0 {
            0.0
        } else {
            (self.beta * self.n0() / e).sqrt()
        }
    }

    /// Channel memory in symbols (taps minus one).
    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    /// Passes amplitudes through the channel. Samples before the start are
    /// zero; the output has the input's length.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let parts = self.transmit_parts(x, rng);
        parts.signal.iter().zip(&parts.jitter).zip(&parts.noise).map(|((s, j), n)| s + j + n).collect()
    }

    /// Same draws as [`transmit`](Self::transmit), with the three
    /// components kept apart.
    pub fn transmit_parts<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> ChannelParts {
        let n = x.len();
        let signal = convolve(x, &self.taps);
        let mut jitter = vec![0.0; n];
        if !self.jitter_taps.is_empty() && self.beta > 0.0 {
            let sd = self.jitter_sigma();
            let delta: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            let half = self.jitter_taps.len() / 2;
            for (t, out) in jitter.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (ti, &tf) in self.jitter_taps.iter().enumerate() {
                    // Symbol index t + 1 − i with i = ti − half.
                    let j = t as isize + 1 - (ti as isize - half as isize);
                    if j >= 0 && (j as usize) < n {
                        acc += x[j as usize] * delta[j as usize] * tf;
                    }
                }
                *out = -acc;
            }
        }
        let sigma = self.sigma();
        let noise: Vec<f64> = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        if self.noiseless {
            let zeros = vec![0.0; n];
            return ChannelParts { signal, jitter: zeros.clone(), noise: zeros };
        }
        ChannelParts { signal, jitter, noise }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelParts {
    pub signal: Vec<f64>,
    pub jitter: Vec<f64>,
    pub noise: Vec<f64>,
}

/// Causal convolution truncated to the input length.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|t| h.iter().enumerate().take(t + 1).map(|(j, &hj)| hj * x[t - j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn pr_impulse_response() {
        let mut ch = ChannelParams::pr(&PR1221, 10.0, 1.0, 1).unwrap();
        ch.noiseless = true;
        let mut x = vec![0.0; 6];
        x[0] = 1.0;
        let r = ch.transmit(&x, &mut rng::stream(0, &[]));
        let s = 10f64.sqrt();
        for (a, b) in r.iter().zip([1.0 / s, 2.0 / s, 2.0 / s, 1.0 / s, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((ch.signal_energy() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mo_tables() {
        let ch = ChannelParams::mo_binary(7.0, 0.15, 0.65).unwrap();
        assert_eq!(ch.jitter_taps[2], 0.1128);
        assert_eq!(ch.taps, MO_BINARY_G.to_vec());
        let ch4 = ChannelParams::mo_4level(7.0, 0.15, 0.65).unwrap();
        assert_eq!(ch4.jitter_taps[2], 0.2969);
        assert_eq!(ch4.memory(), 3);
    }

    #[test]
    fn noise_sigma_convention() {
        assert!((noise_sigma(0.0, 1.0, 1, 1.0).powi(2) - 0.5).abs() < 1e-15);
        assert!((noise_sigma(10.0, 1.0, 1, 1.0).powi(2) - 0.05).abs() < 1e-15);
        // 7.4 dB → 10^0.74; N0 = 1 / (0.65 · 2 · 10^0.74), σ² = N0 / 2.
        let lin = (7.4f64 * std::f64::consts::LN_10 / 10.0).exp();
        let expect = 0.5 / (1.3 * lin);
        assert!((noise_sigma(7.4, 0.65, 2, 1.0).powi(2) - expect).abs() < 1e-15);
        assert!((expect - 0.07002).abs() < 1e-4);
    }

    #[test]
    fn jitter_term_energy_tracks_beta() {
        let ch = ChannelParams::mo_4level(7.4, 0.15, 0.65).unwrap();
        let mut r = rng::stream(3, &[]);
        let x: Vec<f64> = (0..1_000_000).map(|_| crate::mapping::pam4_amplitude(r.random_range(0..4))).collect();
        let parts = ch.transmit_parts(&x, &mut r);
        let e = parts.jitter.iter().map(|j| j * j).sum::<f64>() / x.len() as f64;
        assert!((e / ch.n0() - 0.15).abs() < 0.01, "ratio {}", e / ch.n0());
    }

    #[test]
    fn zero_beta_is_convolution_plus_awgn() {
        let ch = ChannelParams::mo_binary(5.0, 0.0, 0.5).unwrap();
        let mut r = rng::stream(4, &[]);
        let x: Vec<f64> = (0..500).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let parts = ch.transmit_parts(&x, &mut r);
        assert!(parts.jitter.iter().all(|&j| j == 0.0));
        assert_eq!(parts.signal, convolve(&x, &MO_BINARY_G));
        assert!((ch.detector_sigma() - ch.sigma()).abs() < 1e-15);
    }

    #[test]
    fn noiseless_pr_matches_naive_convolution() {
        let mut ch = ChannelParams::pr(&[1.0, -0.5, 0.25], 3.0, 0.8, 1).unwrap();
        ch.noiseless = true;
        let mut r = rng::stream(5, &[]);
        let x: Vec<f64> = (0..300).map(|_| r.random_range(-1.0..1.0)).collect();
        let y = ch.transmit(&x, &mut r);
        let mut naive = vec![0.0; x.len()];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &hj) in ch.taps.iter().enumerate() {
                if i + j < x.len() {
                    naive[i + j] += xi * hj;
                }
            }
        }
        for (a, b) in y.iter().zip(&naive) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let ch = ChannelParams::mo_4level(6.0, 0.15, 0.65).unwrap();
        let x: Vec<f64> = (0..200).map(|i| crate::mapping::pam4_amplitude((i % 4) as u8)).collect();
        let a = ch.transmit(&x, &mut rng::stream(9, &[1]));
        let b = ch.transmit(&x, &mut rng::stream(9, &[1]));
        assert_eq!(a, b);
        assert_ne!(a, ch.transmit(&x, &mut rng::stream(9, &[2])));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChannelParams::mo_binary(f64::NAN, 0.1, 0.5).is_err());
        assert!(ChannelParams::mo_binary(5.0, -0.1, 0.5).is_err());
        assert!(ChannelParams::pr(&[0.0, 0.0], 5.0, 0.5, 1).is_err());
        assert!(ChannelParams::mo(ChannelKind::Mo4Level, &[1.0], &MO_4LEVEL_TF, 5.0, 0.1, 0.5, 2).is_err());
    }
}
