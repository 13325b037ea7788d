//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "mode": "ber",
//!   "seed": 1,
//!   "code": {"n": 4608, "rate": 0.65,
//!            "distribution": {"var": [[2, 0.5], [5, 0.5]], "perspective": "node"}},
//!   "scheme": "type_II",
//!   "labeling": "natural",
//!   "flip": {"k": 3, "fill": 2},
//!   "channel": {"kind": "pr", "h": [1, 2, 2, 1]},
//!   "snr_db": [14.0, 14.5, 15.0],
//!   "schedule": {"outer": 5, "inner": 3},
//!   "budget": {"max_frames": 1000, "stop_errors": 50}
//! }
//! ```
//!
//! Unknown fields are rejected; parse errors carry line and column.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::Grid;
use crate::channel::{ChannelKind, ChannelParams, MO_4LEVEL_G, MO_4LEVEL_TF, MO_BINARY_G, MO_BINARY_TF, PR1221};
use crate::degree::DegreeDistribution;
use crate::equalize::BitMap;
use crate::error::{Error, Result};
use crate::mapping::{Labeling, LabelingKind, Scheme};
use crate::optimize::DegreeFour;
use crate::rll::Alphabet;
use crate::sim::{Budget, CodeSpec};
use crate::turbo::{FlipSpec, TurboSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ber,
    De,
    Exit,
    Optimize,
    FlipStats,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Ber => "ber",
            Mode::De => "de",
            Mode::Exit => "exit",
            Mode::Optimize => "optimize",
            Mode::FlipStats => "flip_stats",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Binary,
    #[default]
    Pam4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    /// PR target; defaults to (1,2,2,1).
    #[serde(default)]
    pub h: Option<Vec<f64>>,
    /// MO read-back taps; default to the tabulated ones for the kind.
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    #[serde(default)]
    pub tf: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: f64,
}

impl ChannelConfig {
    pub fn params(&self, ebn0_db: f64, rate: f64, bits_per_symbol: usize) -> Result<ChannelParams> {
        match self.kind {
            ChannelKind::Pr => ChannelParams::pr(self.h.as_deref().unwrap_or(&PR1221), ebn0_db, rate, bits_per_symbol),
            kind => {
                let (g, tf): (&[f64], &[f64]) = match kind {
                    ChannelKind::MoBinary => (&MO_BINARY_G, &MO_BINARY_TF),
                    _ => (&MO_4LEVEL_G, &MO_4LEVEL_TF),
                };
                let g = self.g.as_deref().unwrap_or(g);
                let tf = self.tf.as_deref().unwrap_or(tf);
                ChannelParams::mo(kind, g, tf, ebn0_db, self.beta, rate, bits_per_symbol)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDistribution {
    pub name: String,
    pub distribution: DegreeDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeSection {
    #[serde(default = "default_step")]
    pub grid_step: f64,
    #[serde(default = "default_half_bins")]
    pub half_bins: usize,
    #[serde(default = "default_u_max")]
    pub u_max: usize,
    #[serde(default = "default_target")]
    pub target_pe: f64,
    /// Codewords for the initial densities.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Distributions to evaluate; the main code's when empty.
    #[serde(default)]
    pub codes: Vec<NamedDistribution>,
}

impl Default for DeSection {
    fn default() -> Self {
        Self {
            grid_step: default_step(),
            half_bins: default_half_bins(),
            u_max: default_u_max(),
            target_pe: default_target(),
            trials: default_trials(),
            codes: Vec::new(),
        }
    }
}

impl DeSection {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_step, self.half_bins)
    }
}

fn default_step() -> f64 {
    0.05
}
fn default_half_bins() -> usize {
    500
}
fn default_u_max() -> usize {
    15
}
fn default_target() -> f64 {
    1e-6
}
fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitSection {
    /// Codewords per SNR; every bit of every frame is one sample.
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    /// Starting best distribution, node perspective.
    pub init: Vec<(usize, f64)>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_population")]
    pub population: usize,
    pub max_degree: usize,
    #[serde(default = "default_generations")]
    pub max_generations: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub degree_four: DegreeFour,
    /// BER probes run here and one dB above.
    pub reference_snr_db: f64,
    pub budget: Budget,
}

fn default_alpha() -> f64 {
    0.5
}
fn default_population() -> usize {
    50
}
fn default_generations() -> usize {
    50
}
fn default_patience() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipStatsSection {
    pub k: Vec<usize>,
    pub n: usize,
    pub trials: usize,
    #[serde(default = "default_alphabet")]
    pub alphabet: Alphabet,
}

fn default_alphabet() -> Alphabet {
    Alphabet::Quaternary
}

fn default_schedule() -> TurboSchedule {
    TurboSchedule::new(5, 3).expect("valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub code: Option<CodeSpec>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub labeling: Option<LabelingKind>,
    #[serde(default)]
    pub modulation: Modulation,
    #[serde(default)]
    pub flip: Option<FlipSpec>,
    #[serde(default)]
    pub channel: Option<ChannelConfig>,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_schedule")]
    pub schedule: TurboSchedule,
    #[serde(default)]
    pub budget: Option<Budget>,
    /// Zero noise and jitter; the detector keeps the nominal σ.
    #[serde(default)]
    pub noiseless: bool,
    /// CSV file name inside the output directory; `<mode>.csv` by default.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub de: Option<DeSection>,
    #[serde(default)]
    pub exit: Option<ExitSection>,
    #[serde(default)]
    pub optimize: Option<OptimizeSection>,
    #[serde(default)]
    pub flip_stats: Option<FlipStatsSection>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn bits_per_symbol(&self) -> usize {
        match self.modulation {
            Modulation::Binary => 1,
            Modulation::Pam4 => 2,
        }
    }

    pub fn bit_map(&self) -> BitMap {
        match self.modulation {
            Modulation::Binary => BitMap::Binary,
            Modulation::Pam4 => BitMap::Quaternary(Labeling::new(self.labeling.unwrap_or(LabelingKind::Natural))),
        }
    }

    pub fn channel_params(&self, ebn0_db: f64, rate: f64) -> Result<ChannelParams> {
        let ch = self.channel.as_ref().ok_or_else(|| Error::Config("`channel` is required".into()))?;
        let mut p = ch.params(ebn0_db, rate, self.bits_per_symbol())?;
        p.noiseless = self.noiseless;
        Ok(p)
    }

    /// Nominal code rate: the configured rate, else the design rate.
    pub fn nominal_rate(&self) -> Result<f64> {
        let code = self.code.as_ref().ok_or_else(|| Error::Config("`code` is required".into()))?;
        match (code.rate, &code.distribution) {
            (Some(r), _) => Ok(r),
            (None, Some(d)) => d.design_rate(),
            (None, None) => Err(Error::Config("`code.rate` is required with an alist".into())),
        }
    }

    /// Short SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("serializable");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("{}.csv", self.mode.name()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.mode != Mode::FlipStats {
            let Some(code) = &self.code else { return bad("`code` is required".into()) };
            let own_code = match self.mode {
                Mode::Optimize => false,
                Mode::De => self.de.as_ref().is_none_or(|d| d.codes.is_empty()),
                _ => true,
            };
            if own_code && code.distribution.is_none() && code.alist.is_none() {
                return bad("`code` needs `distribution` or `alist`".into());
            }
            if code.n % self.bits_per_symbol() != 0 {
                return bad(format!("`code.n` = {} must be even for 4-level modulation", code.n));
            }
            if let Some(r) = code.rate {
                if !(r > 0.0 && r < 1.0) {
                    return bad(format!("`code.rate` = {r} outside (0, 1)"));
                }
            }
            if self.channel.is_none() {
                return bad("`channel` is required".into());
            }
            self.schedule.validate().map_err(|e| Error::Config(format!("`schedule`: {e}")))?;
        }
        if self.modulation == Modulation::Binary && self.labeling.is_some() {
            return bad("`labeling` applies to pam4 modulation only".into());
        }
        if let Some(f) = self.flip {
            if self.modulation == Modulation::Pam4 && !(f.fill == 1 || f.fill == 2) {
                return bad(format!("`flip.fill` = {} must be 1 or 2", f.fill));
            }
        }
        if let Some(ch) = &self.channel {
            if ch.kind == ChannelKind::Pr && ch.beta != 0.0 {
                return bad("`channel.beta` must be 0 for PR channels".into());
            }
            if ch.kind == ChannelKind::Mo4Level && self.modulation != Modulation::Pam4 {
                return bad("mo_4level needs pam4 modulation".into());
            }
            if ch.kind == ChannelKind::MoBinary && self.modulation != Modulation::Binary {
                return bad("mo_binary needs binary modulation".into());
            }
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("`snr_db` entries must be finite".into());
        }
        let need_snr = matches!(self.mode, Mode::Ber | Mode::De | Mode::Exit);
        if need_snr && self.snr_db.is_empty() {
            return bad(format!("`snr_db` is required for mode {}", self.mode.name()));
        }
        match self.mode {
            Mode::Ber => match self.budget {
                None => return bad("`budget` is required for mode ber".into()),
                Some(b) if b.max_frames == 0 => return bad("`budget.max_frames` must be ≥ 1".into()),
                _ => {}
            },
            Mode::De => {
                let de = self.de.clone().unwrap_or_default();
                de.grid()?;
                if de.trials < crate::analysis::de::MIN_TRIALS {
                    return bad(format!("`de.trials` must be ≥ {}", crate::analysis::de::MIN_TRIALS));
                }
                let main = self.code.as_ref().and_then(|c| c.distribution.as_ref());
                let dists: Vec<&DegreeDistribution> = if de.codes.is_empty() {
                    main.into_iter().collect()
                } else {
                    de.codes.iter().map(|c| &c.distribution).collect()
                };
                if dists.is_empty() {
                    return bad("density evolution needs a distribution".into());
                }
                if dists.iter().any(|d| d.chk().is_empty()) {
                    return bad("density evolution needs check-degree profiles".into());
                }
            }
            Mode::Exit => {
                let Some(e) = &self.exit else { return bad("`exit` section is required".into()) };
                let n = self.code.as_ref().map_or(0, |c| c.n);
                if e.frames * n < crate::analysis::exit::MIN_EXIT_SAMPLES {
                    return bad(format!(
                        "`exit.frames` × n = {} is below {} samples",
                        e.frames * n,
                        crate::analysis::exit::MIN_EXIT_SAMPLES
                    ));
                }
            }
            Mode::Optimize => {
                let Some(o) = &self.optimize else { return bad("`optimize` section is required".into()) };
                if o.budget.max_frames == 0 {
                    return bad("`optimize.budget.max_frames` must be ≥ 1".into());
                }
                if !(0.0..=1.0).contains(&o.alpha) {
                    return bad(format!("`optimize.alpha` = {} outside [0, 1]", o.alpha));
                }
                if self.code.as_ref().is_some_and(|c| c.rate.is_none()) {
                    return bad("`code.rate` is required for mode optimize".into());
                }
            }
            Mode::FlipStats => {
                let Some(f) = &self.flip_stats else { return bad("`flip_stats` section is required".into()) };
                if f.trials < 100 {
                    return bad("`flip_stats.trials` must be ≥ 100".into());
                }
                if f.k.iter().any(|&k| k >= f.n) {
                    return bad("`flip_stats.k` must be below n".into());
                }
            }
        }
        Ok(())
    }
}
