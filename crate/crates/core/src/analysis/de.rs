//! Min-sum density evolution with flipped and non-flipped message classes.
//!
//! Variable nodes are laid out by increasing degree and the flipped class is
//! the upper half of the block, so each degree sees a fixed mixture of the
//! two channel densities. The first check update takes the two classes
//! separately; later iterations work on the merged density.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::pdf::{Grid, QuantizedPdf};
use crate::degree::DegreeDistribution;
use crate::error::{Error, Result};
use crate::rng;
use crate::turbo::Chain;
use rand::Rng as _;

/// Minimum number of codewords for the initial-density estimate.
pub const MIN_TRIALS: usize = 1000;
/// Class sample count below which the estimate is flagged.
pub const MIN_CLASS_SAMPLES: u64 = 10_000;

/// Min-sum check-node output density for one input density, mixed over the
/// edge-perspective check degrees `rho`.
pub fn check_update_merged(pdf: &QuantizedPdf, rho: &[(usize, f64)]) -> Result<QuantizedPdf> {
    if rho.is_empty() {
        return Err(Error::InvalidDistribution("check side unspecified".into()));
    }
    if let Some(&(d, _)) = rho.iter().find(|&&(d, _)| d < 2) {
        return Err(Error::InvalidDistribution(format!("check degree {d} < 2")));
    }
    let grid = pdf.grid();
    let s = grid.half_bins + 1;
    // Tails G±(m) = P(±V ≥ m) for m = 1..=s, index m.
    let mut gp = vec![0.0; s + 2];
    let mut gm = vec![0.0; s + 2];
    for m in (1..=s).rev() {
        gp[m] = gp[m + 1] + pdf.at(m as i64);
        gm[m] = gm[m + 1] + pdf.at(-(m as i64));
    }
    let mut out = vec![0.0; grid.len()];
    for &(d, w) in rho {
        let n = (d - 1) as i32;
        let mut sp = vec![0.0; s + 2];
        let mut sm = vec![0.0; s + 2];
        for m in 1..=s {
            let a = (gp[m] + gm[m]).powi(n);
            let b = (gp[m] - gm[m]).powi(n);
            sp[m] = 0.5 * (a + b);
            sm[m] = 0.5 * (a - b);
        }
        for m in 1..=s {
            out[grid.index_of(m as i64)] += w * (sp[m] - sp[m + 1]).max(0.0);
            out[grid.index_of(-(m as i64))] += w * (sm[m] - sm[m + 1]).max(0.0);
        }
        out[grid.index_of(0)] += w * (1.0 - (gp[1] + gm[1]).powi(n)).max(0.0);
    }
    Ok(QuantizedPdf::from_raw(grid, out))
}

/// Check update with separate flipped and non-flipped input densities. A
/// fraction `flipped_edges` of check-node inputs come from the flipped
/// class.
pub fn check_update(
    pdf_f: &QuantizedPdf,
    pdf_nf: &QuantizedPdf,
    flipped_edges: f64,
    rho: &[(usize, f64)],
) -> Result<QuantizedPdf> {
    check_update_merged(&QuantizedPdf::mix(pdf_f, pdf_nf, flipped_edges)?, rho)
}

/// Variable-node output density: for each `(d, λ_d)` the channel density
/// `channels[i]` convolved with `d−1` copies of the check density, mixed by
/// `λ`. Computed with one cyclic FFT large enough to avoid wrap-around;
/// mass beyond the interior folds into the saturation bins.
pub fn variable_update(
    check: &QuantizedPdf,
    lambda: &[(usize, f64)],
    channels: &[QuantizedPdf],
) -> Result<QuantizedPdf> {
    if lambda.len() != channels.len() {
        return Err(Error::Dimension(format!("{} degrees, {} channel densities", lambda.len(), channels.len())));
    }
    let grid = check.grid();
    if channels.iter().any(|c| c.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let d_max = lambda.iter().map(|&(d, _)| d).max().ok_or_else(|| Error::Input("empty λ".into()))?;
    if d_max == 0 {
        return Err(Error::InvalidDistribution("variable degree 0".into()));
    }
    let s = grid.half_bins + 1;
    let size = (2 * d_max * s + 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let spectrum = |p: &QuantizedPdf| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (i, &m) in p.mass().iter().enumerate() {
            buf[grid.bin_of(i).rem_euclid(size as i64) as usize].re = m;
        }
        fwd.process(&mut buf);
        buf
    };
    let q = spectrum(check);
    let mut acc = vec![Complex::new(0.0, 0.0); size];
    for (&(d, w), ch) in lambda.iter().zip(channels) {
        let mut term = spectrum(ch);
        for _ in 1..d {
            term.iter_mut().zip(&q).for_each(|(t, x)| *t *= x);
        }
        acc.iter_mut().zip(&term).for_each(|(a, t)| *a += w * t);
    }
    inv.process(&mut acc);
    let scale = 1.0 / size as f64;
    let reach = (d_max * s) as i64;
    let mut out = vec![0.0; grid.len()];
    for v in -reach..=reach {
        let m = (acc[v.rem_euclid(size as i64) as usize].re * scale).max(0.0);
        out[grid.index_of(v)] += m;
    }
    Ok(QuantizedPdf::from_raw(grid, out))
}

/// Fraction of degree-`d` variable nodes inside the flipped upper half of
/// an `n`-node block laid out by increasing degree.
pub fn flipped_fractions(dist: &DegreeDistribution, n: usize) -> Vec<(usize, f64)> {
    let half = n / 2;
    let mut start = 0;
    dist.var_node_counts(n)
        .into_iter()
        .map(|(d, c)| {
            let end = start + c;
            let inside = end.saturating_sub(start.max(half));
            start = end;
            (d, if c == 0 { 0.0 } else { inside as f64 / c as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DeConfig {
    /// Variable and check profiles (either perspective).
    pub dist: DegreeDistribution,
    pub n: usize,
    pub u_max: usize,
    pub target_pe: f64,
}

impl DeConfig {
    pub fn new(dist: DegreeDistribution, n: usize) -> Self {
        Self { dist, n, u_max: 15, target_pe: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeResult {
    /// `pe[0]` is the channel-only error probability; `pe[u]` follows
    /// iteration `u`.
    pub pe: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl DeResult {
    pub fn final_pe(&self) -> f64 {
        *self.pe.last().expect("at least one entry")
    }
}

pub fn de_run(cfg: &DeConfig, pdf_f: &QuantizedPdf, pdf_nf: &QuantizedPdf) -> Result<DeResult> {
    if pdf_f.grid() != pdf_nf.grid() {
        return Err(Error::GridMismatch);
    }
    let edge = cfg.dist.to_edge();
    let lambda = edge.var();
    let rho = edge.chk();
    if rho.is_empty() {
        return Err(Error::InvalidDistribution("density evolution needs a check profile".into()));
    }
    let fractions = flipped_fractions(&cfg.dist, cfg.n);
    let channels: Vec<QuantizedPdf> = fractions
        .iter()
        .map(|&(_, f)| QuantizedPdf::mix(pdf_f, pdf_nf, f))
        .collect::<Result<_>>()?;
    let flipped_edges: f64 = lambda.iter().zip(&fractions).map(|(&(_, l), &(_, f))| l * f).sum();
    let parts: Vec<(f64, &QuantizedPdf)> = lambda.iter().map(|&(_, l)| l).zip(&channels).collect();
    let mut v = QuantizedPdf::mixture(&parts)?;
    let mut pe = vec![v.error_probability()];
    let mut u = 0;
    while pe[u] >= cfg.target_pe && u < cfg.u_max {
        let q = if u == 0 {
            check_update(pdf_f, pdf_nf, flipped_edges, rho)?
        } else {
            check_update_merged(&v, rho)?
        };
        v = variable_update(&q, lambda, &channels)?;
        pe.push(v.error_probability());
        u += 1;
    }
    Ok(DeResult { converged: pe[u] < cfg.target_pe, pe, iterations: u })
}

#[derive(Debug, Clone)]
pub struct InitialPdfs {
    /// Positions in the upper (flipped) half of the code block.
    pub flipped: QuantizedPdf,
    pub non_flipped: QuantizedPdf,
    pub samples_flipped: u64,
    pub samples_non_flipped: u64,
    /// Set when either class has fewer than [`MIN_CLASS_SAMPLES`] samples.
    pub low_samples: bool,
}

/// Decoder-input LLR densities after one detector pass, from uniformly
/// random words, sign-adjusted so positive means correct.
pub fn estimate_initial_pdfs(chain: &Chain, grid: Grid, trials: usize, seed: u64) -> Result<InitialPdfs> {
    if trials < MIN_TRIALS {
        return Err(Error::Input(format!("need ≥ {MIN_TRIALS} codewords, got {trials}")));
    }
    let n = chain.n();
    let half = n / 2;
    let bins = grid.len();
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            let mut r = rng::stream(seed, &[t as u64]);
            let v: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
            let w = chain.write_word(v)?;
            let y = chain.receive(&w, &mut r);
            let llr = chain.detector_llr(&y)?;
            let mut c = vec![0u64; 2 * bins];
            for (i, (&l, &b)) in llr.iter().zip(&w.v).enumerate() {
                let signed = if b == 0 { l } else { -l };
                c[if i >= half { 0 } else { bins } + grid.quantize(signed)] += 1;
            }
            Ok(c)
        })
        .try_reduce(
            || vec![0u64; 2 * bins],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let samples_flipped = ((n - half) * trials) as u64;
    let samples_non_flipped = (half * trials) as u64;
    let low_samples = samples_flipped.min(samples_non_flipped) < MIN_CLASS_SAMPLES;
    if low_samples {
        log::warn!("initial densities from only {} samples per class", samples_flipped.min(samples_non_flipped));
    }
    Ok(InitialPdfs {
        flipped: QuantizedPdf::from_counts(grid, &counts[..bins])?,
        non_flipped: QuantizedPdf::from_counts(grid, &counts[bins..])?,
        samples_flipped,
        samples_non_flipped,
        low_samples,
    })
}
