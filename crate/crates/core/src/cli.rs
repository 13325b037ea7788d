//! Experiment runner behind the `uepsim` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{de_run, estimate_initial_pdfs, exit_trajectory, DeConfig};
use crate::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::optimize::{de_optimize, Candidate, Fitness, OptimizerConfig};
use crate::rll::{flip_rate, stationary_flip_rate};
use crate::sim::{ber_point, Code, CodeSpec};
use crate::turbo::Chain;

pub const GIT_DESCRIBE: &str = env!("UEPSIM_GIT_DESCRIBE");
pub const THREADS_ENV: &str = "UEPSIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "uepsim", version, about = "RLL-constrained UEP-LDPC recording simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a JSON config.
    Run(RunArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; overrides UEPSIM_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Failure classes mapped to exit codes 1 and 2.
#[derive(Debug)]
pub enum RunError {
    Config(Error),
    Runtime(Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 1,
            RunError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

/// Thread count from the flag, else the environment, else rayon's default.
pub fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, RunError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| RunError::Config(Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))),
        Err(_) => Ok(None),
    }
}

/// Loads, validates and runs; returns the CSV path.
pub fn run(args: &RunArgs) -> std::result::Result<PathBuf, RunError> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(RunError::Config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let threads = thread_count(args.threads)?;
    if threads == Some(0) {
        return Err(RunError::Config(Error::Config("thread count must be ≥ 1".into())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Runtime(Error::Input(e.to_string())))?;
    std::fs::create_dir_all(&args.out).map_err(|e| RunError::Runtime(e.into()))?;
    let path = args.out.join(cfg.output_name());
    pool.install(|| execute(&cfg, &path)).map_err(RunError::Runtime)?;
    Ok(path)
}

struct CsvOut {
    w: BufWriter<File>,
    prefix: String,
}

impl CsvOut {
    fn create(path: &Path, cfg: &ExperimentConfig, columns: &str, comment: &str) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# {comment}")?;
        writeln!(w, "config_hash,seed,git_describe,{columns}")?;
        Ok(Self { w, prefix: format!("{},{},{}", cfg.hash(), cfg.seed, GIT_DESCRIBE) })
    }

    fn row(&mut self, fields: &str) -> Result<()> {
        writeln!(self.w, "{},{fields}", self.prefix)?;
        Ok(())
    }

    /// Flushes so completed points survive an interrupted run.
    fn flush(&mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn execute(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    match cfg.mode {
        Mode::Ber => run_ber(cfg, path),
        Mode::De => run_de(cfg, path),
        Mode::Exit => run_exit(cfg, path),
        Mode::Optimize => run_optimize(cfg, path),
        Mode::FlipStats => run_flip_stats(cfg, path),
    }
}

fn code_spec(cfg: &ExperimentConfig) -> Result<&CodeSpec> {
    cfg.code.as_ref().ok_or_else(|| Error::Config("`code` is required".into()))
}

fn run_ber(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let code = Code::build(code_spec(cfg)?)?;
    let rate = code.encoder.rate();
    let budget = cfg.budget.ok_or_else(|| Error::Config("`budget` is required".into()))?;
    let link = code.link(cfg.scheme, cfg.bit_map(), cfg.flip, cfg.channel_params(cfg.snr_db[0], rate)?)?;
    let iters: Vec<String> = (1..=cfg.schedule.outer).map(|u| format!("ber_{u}")).collect();
    let mut out = CsvOut::create(
        path,
        cfg,
        &format!("snr_db,trials,bit_errors,ber,frame_errors,fer,{}", iters.join(",")),
        "BER per SNR point; trials are frames, ber_u is the BER after outer iteration u",
    )?;
    for (i, &snr) in cfg.snr_db.iter().enumerate() {
        let p = ber_point(&link.at_snr(snr), &cfg.schedule, budget, i as u64, cfg.seed)?;
        let per: Vec<String> = (0..cfg.schedule.outer).map(|u| format!("{:.6e}", p.ber_at(u))).collect();
        out.row(&format!(
            "{snr},{},{},{:.6e},{},{:.6e},{}",
            p.frames,
            p.final_bit_errors(),
            p.ber(),
            p.frame_errors,
            p.fer(),
            per.join(",")
        ))?;
        out.flush()?;
        log::info!("{snr} dB: {} frames, BER {:.3e}, FER {:.3e}", p.frames, p.ber(), p.fer());
    }
    Ok(())
}

fn run_de(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let de = cfg.de.clone().unwrap_or_default();
    let spec = code_spec(cfg)?;
    let codes: Vec<(String, _)> = if de.codes.is_empty() {
        let d = spec.distribution.clone().ok_or_else(|| Error::Config("density evolution needs a distribution".into()))?;
        vec![("code".to_string(), d)]
    } else {
        de.codes.iter().map(|c| (c.name.clone(), c.distribution.clone())).collect()
    };
    let rate = cfg.nominal_rate()?;
    let grid = de.grid()?;
    let mut out = CsvOut::create(
        path,
        cfg,
        "code,snr_db,iteration,pe,converged",
        "min-sum density evolution; iteration 0 is the detector output",
    )?;
    for (i, &snr) in cfg.snr_db.iter().enumerate() {
        let chain = Chain::new(spec.n, cfg.scheme, cfg.bit_map(), cfg.flip, cfg.channel_params(snr, rate)?)?;
        let init = estimate_initial_pdfs(&chain, grid, de.trials, crate::rng::derive_seed(cfg.seed, &[i as u64]))?;
        for (name, dist) in &codes {
            let r = de_run(&DeConfig { dist: dist.clone(), n: spec.n, u_max: de.u_max, target_pe: de.target_pe }, &init.flipped, &init.non_flipped)?;
            for (u, pe) in r.pe.iter().enumerate() {
                out.row(&format!("{name},{snr},{u},{pe:.6e},{}", r.converged))?;
            }
            log::info!("{name} at {snr} dB: P_e {:.3e} after {} iterations", r.final_pe(), r.iterations);
        }
        out.flush()?;
    }
    Ok(())
}

fn run_exit(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let frames = cfg.exit.as_ref().ok_or_else(|| Error::Config("`exit` section is required".into()))?.frames;
    let code = Code::build(code_spec(cfg)?)?;
    let rate = code.encoder.rate();
    let link = code.link(cfg.scheme, cfg.bit_map(), cfg.flip, cfg.channel_params(cfg.snr_db[0], rate)?)?;
    let mut out = CsvOut::create(
        path,
        cfg,
        "snr_db,outer,i_in,i_out,samples",
        "EXIT trajectory; i_in from decoder input L_d(v), i_out from decoder extrinsic L_D(v)",
    )?;
    for (i, &snr) in cfg.snr_db.iter().enumerate() {
        let pts = exit_trajectory(&link.at_snr(snr), &cfg.schedule, frames, crate::rng::derive_seed(cfg.seed, &[i as u64]))?;
        for p in pts {
            out.row(&format!("{snr},{},{:.6},{:.6},{}", p.outer, p.i_in, p.i_out, p.samples))?;
        }
        out.flush()?;
    }
    Ok(())
}

/// Fitness from BER probes at the reference SNR and one dB above.
pub fn pipeline_fitness(cfg: &ExperimentConfig, candidate: &Candidate, seed: u64) -> Result<Fitness> {
    let o = cfg.optimize.as_ref().ok_or_else(|| Error::Config("`optimize` section is required".into()))?;
    let base = code_spec(cfg)?;
    let spec = CodeSpec { distribution: Some(candidate.distribution()?), alist: None, ..base.clone() };
    let code = Code::build(&spec)?;
    let link = code.link(cfg.scheme, cfg.bit_map(), cfg.flip, cfg.channel_params(o.reference_snr_db, code.encoder.rate())?)?;
    let r0 = ber_point(&link, &cfg.schedule, o.budget, 0, seed)?;
    let r1 = ber_point(&link.at_snr(o.reference_snr_db + 1.0), &cfg.schedule, o.budget, 1, seed)?;
    Ok(Fitness::from_probe(r0.ber(), r1.ber()))
}

fn run_optimize(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let o = cfg.optimize.clone().ok_or_else(|| Error::Config("`optimize` section is required".into()))?;
    let oc = OptimizerConfig {
        alpha: o.alpha,
        population: o.population,
        max_degree: o.max_degree,
        max_generations: o.max_generations,
        patience: o.patience,
        degree_four: o.degree_four,
        seed: cfg.seed,
    };
    let init = Candidate::new(&o.init, o.degree_four)?;
    let result = de_optimize(&init, &oc, |c, s| pipeline_fitness(cfg, c, s))?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# differential-evolution search log, one row per evaluated trial; best marks a trial that became the best so far")?;
    result.write_csv(
        &mut w,
        &[("config_hash", cfg.hash()), ("seed", cfg.seed.to_string()), ("git_describe", GIT_DESCRIBE.to_string())],
    )?;
    w.flush()?;
    log::info!("best {} (floor {}, BER {:.3e})", result.best, result.best_fitness.floor, result.best_fitness.ber);
    Ok(())
}

fn run_flip_stats(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let f = cfg.flip_stats.clone().ok_or_else(|| Error::Config("`flip_stats` section is required".into()))?;
    let mut out = CsvOut::create(
        path,
        cfg,
        "k,n,trials,alphabet,mean,std,oracle",
        "flips per symbol over i.i.d. uniform blocks; oracle is the stationary zero-run chain rate",
    )?;
    for (i, &k) in f.k.iter().enumerate() {
        let s = flip_rate(k, f.n, f.trials, f.alphabet, crate::rng::derive_seed(cfg.seed, &[i as u64]))?;
        let oracle = stationary_flip_rate(k, 1.0 / f.alphabet.size() as f64);
        let name = serde_json::to_value(f.alphabet).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        out.row(&format!("{k},{},{},{name},{:.9e},{:.9e},{oracle:.9e}", f.n, s.trials, s.mean, s.std))?;
    }
    out.flush()
}
