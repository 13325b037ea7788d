//! Differential-evolution search over two-class variable-node
//! distributions.
//!
//! Degrees split into a weak class (2, 3, and optionally 4) and a strong
//! class (4 or 5 upwards), each carrying node mass 0.5. Mutants are
//! `best + α (δ_i − δ_j)`, projected back onto the class constraints. The
//! degree ceiling grows by one per generation up to a cap; at each increase
//! the non-best members are redrawn over the wider support so the new degree
//! can enter through the differences.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{DegreeDistribution, Perspective};
use crate::error::{Error, Result};
use crate::rng;

const CLASS_MASS: f64 = 0.5;

/// Lexicographic fitness: no error floor first, then lower BER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fitness {
    pub floor: bool,
    pub ber: f64,
}

impl Fitness {
    pub fn cmp_quality(&self, other: &Self) -> Ordering {
        self.floor.cmp(&other.floor).then(self.ber.total_cmp(&other.ber))
    }

    pub fn better_than(&self, other: &Self) -> bool {
        self.cmp_quality(other) == Ordering::Less
    }

    /// Floor flag from BER at the reference SNR and one dB above.
    pub fn from_probe(ber_ref: f64, ber_next: f64) -> Self {
        let floor = ber_ref > 0.0 && ber_ref < 1e-3 && ber_next / ber_ref > 0.5;
        Self { floor, ber: ber_ref }
    }
}

/// Which class degree 4 belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeFour {
    Weak,
    #[default]
    Strong,
}

impl DegreeFour {
    pub fn is_weak(self, d: usize) -> bool {
        d <= 3 || (d == 4 && self == DegreeFour::Weak)
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    /// Dense node-perspective weights; entry `d` is degree `d`.
    delta: Vec<f64>,
}

impl Candidate {
    /// Builds from degree/weight pairs, projecting onto the class masses.
    pub fn new(pairs: &[(usize, f64)], four: DegreeFour) -> Result<Self> {
        let top = pairs.iter().map(|&(d, _)| d).max().ok_or_else(|| Error::Input("empty candidate".into()))?;
        let mut delta = vec![0.0; top + 1];
        for &(d, w) in pairs {
            if d < 2 {
                return Err(Error::InvalidDistribution(format!("variable degree {d} < 2")));
            }
            delta[d] += w;
        }
        let c = Self { delta };
        c.project(four, None).ok_or_else(|| Error::InvalidDistribution("a class has no mass".into()))
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.pairs().into_iter().map(|(d, _)| d).collect()
    }

    /// Non-zero `(degree, weight)` pairs.
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.delta.iter().enumerate().filter(|&(_, &w)| w > 0.0).map(|(d, &w)| (d, w)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.pairs().last().map_or(0, |&(d, _)| d)
    }

    pub fn weight(&self, d: usize) -> f64 {
        self.delta.get(d).copied().unwrap_or(0.0)
    }

    pub fn class_masses(&self, four: DegreeFour) -> (f64, f64) {
        self.pairs().iter().fold((0.0, 0.0), |(w, s), &(d, x)| if four.is_weak(d) { (w + x, s) } else { (w, s + x) })
    }

    pub fn distribution(&self) -> Result<DegreeDistribution> {
        DegreeDistribution::new(self.pairs(), vec![], Perspective::Node)
    }

    /// Clips negatives, drops degrees above `ceiling`, and rescales each
    /// class to 0.5. `None` when a class ends up empty.
    fn project(&self, four: DegreeFour, ceiling: Option<usize>) -> Option<Self> {
        let top = ceiling.unwrap_or(self.delta.len() - 1);
        let mut delta: Vec<f64> = self.delta.iter().take(top + 1).map(|&w| w.max(0.0)).collect();
        delta.iter_mut().take(2).for_each(|w| *w = 0.0);
        let (mut weak, mut strong) = (0.0, 0.0);
        for (d, &w) in delta.iter().enumerate() {
            if four.is_weak(d) {
                weak += w;
            } else {
                strong += w;
            }
        }
        if weak <= 0.0 || strong <= 0.0 {
            return None;
        }
        for (d, w) in delta.iter_mut().enumerate() {
            *w *= CLASS_MASS / if four.is_weak(d) { weak } else { strong };
        }
        Some(Self { delta })
    }

    fn dense(&self, len: usize) -> Vec<f64> {
        let mut v = self.delta.clone();
        v.resize(len.max(v.len()), 0.0);
        v
    }

    /// Random member over degrees `2..=ceiling`: each class keeps a random
    /// non-empty subset of its degrees with uniform weights.
    fn random<R: Rng + ?Sized>(ceiling: usize, four: DegreeFour, rng: &mut R) -> Self {
        let mut delta = vec![0.0; ceiling + 1];
        for weak in [true, false] {
            let class: Vec<usize> = (2..=ceiling).filter(|&d| four.is_weak(d) == weak).collect();
            let keep = rng.random_range(1..=class.len());
            for i in sample(rng, class.len(), keep) {
                delta[class[i]] = rng.random_range(0.01..1.0);
            }
        }
        Self { delta }.project(four, None).expect("both classes populated")
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.pairs() == other.pairs()
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.pairs();
        let d: Vec<String> = p.iter().map(|(d, _)| d.to_string()).collect();
        let w: Vec<String> = p.iter().map(|(_, w)| format!("{w:.6}")).collect();
        write!(f, "[{}] [{}]", d.join(";"), w.join(";"))
    }
}

/// `best + α (δ_i − δ_j)` for two distinct members other than `best`,
/// projected onto the class constraints over `2..=ceiling`. If projection
/// empties a class the mutant keeps the best member's weights for it.
pub fn mutate<R: Rng + ?Sized>(
    population: &[Candidate],
    best: usize,
    alpha: f64,
    ceiling: usize,
    four: DegreeFour,
    rng: &mut R,
) -> Result<Candidate> {
    if best >= population.len() {
        return Err(Error::Optimizer(format!("best index {best} outside population of {}", population.len())));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Optimizer(format!("α = {alpha} outside [0, 1]")));
    }
    let b = &population[best];
    if alpha == 0.0 {
        return Ok(b.project(four, Some(ceiling)).unwrap_or_else(|| b.clone()));
    }
    if population.len() < 4 {
        return Err(Error::Optimizer(format!("population of {} is below 4", population.len())));
    }
    let others: Vec<usize> = (0..population.len()).filter(|&k| k != best).collect();
    let pick = sample(rng, others.len(), 2);
    let (i, j) = (others[pick.index(0)], others[pick.index(1)]);
    let len = ceiling + 1;
    let (vb, vi, vj) = (b.dense(len), population[i].dense(len), population[j].dense(len));
    let raw: Vec<f64> = (0..len).map(|d| vb[d] + alpha * (vi[d] - vj[d])).collect();
    let mut delta = Candidate { delta: raw }.project(four, Some(ceiling)).map(|c| c.delta);
    if delta.is_none() {
        // Rebuild the empty class from the best member.
        let mut fixed: Vec<f64> = (0..len).map(|d| (vb[d] + alpha * (vi[d] - vj[d])).max(0.0)).collect();
        for weak in [true, false] {
            let mass: f64 = (2..len).filter(|&d| four.is_weak(d) == weak).map(|d| fixed[d]).sum();
            if mass <= 0.0 {
                (2..len).filter(|&d| four.is_weak(d) == weak).for_each(|d| fixed[d] = vb[d]);
            }
        }
        delta = Candidate { delta: fixed }.project(four, Some(ceiling)).map(|c| c.delta);
    }
    delta
        .map(|delta| Candidate { delta })
        .ok_or_else(|| Error::Optimizer("best member has an empty class below the ceiling".into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_population")]
    pub population: usize,
    /// Largest degree the ceiling may reach.
    pub max_degree: usize,
    /// Hard limit on generations.
    #[serde(default = "default_generations")]
    pub max_generations: usize,
    /// Generations without improvement, once the ceiling is at the cap,
    /// before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub degree_four: DegreeFour,
    #[serde(default)]
    pub seed: u64,
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

impl OptimizerConfig {
    pub fn new(max_degree: usize) -> Self {
        Self {
            alpha: default_alpha(),
            population: default_population(),
            max_degree,
            max_generations: default_generations(),
            patience: default_patience(),
            degree_four: DegreeFour::Strong,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogEntry {
    pub generation: usize,
    pub member: usize,
    pub ceiling: usize,
    pub candidate: Candidate,
    pub fitness: Fitness,
    /// This trial became the best so far.
    pub is_best: bool,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: Candidate,
    pub best_fitness: Fitness,
    pub generations: usize,
    /// Best fitness after each generation, generation 0 first.
    pub best_history: Vec<Fitness>,
    pub log: Vec<LogEntry>,
}

impl SearchResult {
    pub fn write_csv<W: Write>(&self, mut w: W, prefix: &[(&str, String)]) -> Result<()> {
        let head: Vec<&str> = prefix.iter().map(|(k, _)| *k).collect();
        let pre: Vec<&str> = prefix.iter().map(|(_, v)| v.as_str()).collect();
        writeln!(w, "{}generation,member,ceiling,vnd,delta,error_floor,ber,best", head.iter().map(|h| format!("{h},")).collect::<String>())?;
        for e in &self.log {
            let p = e.candidate.pairs();
            let vnd: Vec<String> = p.iter().map(|(d, _)| d.to_string()).collect();
            let dl: Vec<String> = p.iter().map(|(_, x)| format!("{x:.9}")).collect();
            writeln!(
                w,
                "{}{},{},{},{},{},{},{:.6e},{}",
                pre.iter().map(|v| format!("{v},")).collect::<String>(),
                e.generation,
                e.member,
                e.ceiling,
                vnd.join(";"),
                dl.join(";"),
                e.fitness.floor,
                e.fitness.ber,
                e.is_best
            )?;
        }
        Ok(())
    }
}

/// Runs the search. `evaluate(candidate, seed)` must be deterministic in
/// its arguments.
pub fn de_optimize<F>(init_best: &Candidate, cfg: &OptimizerConfig, evaluate: F) -> Result<SearchResult>
where
    F: Fn(&Candidate, u64) -> Result<Fitness> + Sync,
{
    let four = cfg.degree_four;
    if cfg.population == 0 {
        return Err(Error::Optimizer("empty population".into()));
    }
    if cfg.population < 4 && cfg.alpha != 0.0 {
        return Err(Error::Optimizer(format!("population of {} is below 4", cfg.population)));
    }
    let mut ceiling = init_best.max_degree();
    if cfg.max_degree < ceiling {
        return Err(Error::Optimizer(format!("degree cap {} below the initial maximum {ceiling}", cfg.max_degree)));
    }
    if (2..=cfg.max_degree).all(|d| four.is_weak(d)) {
        return Err(Error::Optimizer("degree cap leaves the strong class empty".into()));
    }
    let run = |cands: &[Candidate], g: usize| -> Result<Vec<Fitness>> {
        cands
            .par_iter()
            .enumerate()
            .map(|(l, c)| {
                evaluate(c, rng::derive_seed(cfg.seed, &[g as u64, l as u64, 2]))
                    .map_err(|e| Error::Optimizer(format!("generation {g}, member {l}, candidate {c}: {e}")))
            })
            .collect()
    };

    let draw = |ceiling: usize, g: usize, l: usize, fallback: &Candidate| {
        Candidate::random(ceiling.max(5), four, &mut rng::stream(cfg.seed, &[g as u64, l as u64, 1]))
            .project(four, Some(ceiling))
            .unwrap_or_else(|| fallback.clone())
    };
    let mut pop: Vec<Candidate> =
        std::iter::once(init_best.clone()).chain((1..cfg.population).map(|l| draw(ceiling, 0, l, init_best))).collect();
    let mut fit = run(&pop, 0)?;
    let mut best = argbest(&fit);
    let mut log = Vec::new();
    push_log(&mut log, 0, ceiling, &pop, &fit, best);

    let mut history = vec![fit[best]];
    let mut stale = 0;
    let mut generation = 0;
    while generation < cfg.max_generations {
        generation += 1;
        let g = generation;
        if ceiling < cfg.max_degree {
            ceiling += 1;
            let keep = pop[best].clone();
            for (l, (c, f)) in pop.iter_mut().zip(fit.iter_mut()).enumerate() {
                if l != best {
                    *c = draw(ceiling, g, l, &keep);
                    *f = Fitness { floor: true, ber: f64::INFINITY };
                }
            }
        }
        let mutants: Vec<Candidate> = (0..cfg.population)
            .map(|l| mutate(&pop, best, cfg.alpha, ceiling, four, &mut rng::stream(cfg.seed, &[g as u64, l as u64, 0])))
            .collect::<Result<_>>()?;
        let mf = run(&mutants, g)?;
        let previous = fit[best];
        for l in 0..cfg.population {
            if mf[l].better_than(&fit[l]) {
                pop[l] = mutants[l].clone();
                fit[l] = mf[l];
            }
        }
        best = argbest(&fit);
        push_log(&mut log, g, ceiling, &mutants, &mf, usize::MAX);
        if let Some(e) = log.iter_mut().rev().take(cfg.population).find(|e| e.candidate == pop[best] && e.fitness == fit[best]) {
            e.is_best = true;
        }
        history.push(fit[best]);
        let improved = fit[best].better_than(&previous);
        stale = if improved { 0 } else { stale + 1 };
        log::info!("generation {g}: ceiling {ceiling}, best {} ber {:.3e}", pop[best], fit[best].ber);
        if ceiling >= cfg.max_degree && stale >= cfg.patience {
            break;
        }
    }
    Ok(SearchResult { best: pop[best].clone(), best_fitness: fit[best], generations: generation, best_history: history, log })
}

fn argbest(fit: &[Fitness]) -> usize {
    (0..fit.len()).fold(0, |b, l| if fit[l].better_than(&fit[b]) { l } else { b })
}

fn push_log(log: &mut Vec<LogEntry>, g: usize, ceiling: usize, cands: &[Candidate], fit: &[Fitness], best: usize) {
    for (l, (c, f)) in cands.iter().zip(fit).enumerate() {
        log.push(LogEntry { generation: g, member: l, ceiling, candidate: c.clone(), fitness: *f, is_best: l == best });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cand(p: &[(usize, f64)]) -> Candidate {
        Candidate::new(p, DegreeFour::Strong).unwrap()
    }

    fn assert_classes(c: &Candidate, four: DegreeFour) {
        let (w, s) = c.class_masses(four);
        assert!((w - 0.5).abs() < 1e-9 && (s - 0.5).abs() < 1e-9, "{c}");
        assert!(c.pairs().iter().all(|&(_, x)| x >= 0.0));
    }

    #[test]
    fn fitness_order_is_lexicographic() {
        let clean = Fitness { floor: false, ber: 1e-2 };
        let floored = Fitness { floor: true, ber: 1e-6 };
        assert!(clean.better_than(&floored));
        assert!(Fitness { floor: false, ber: 1e-3 }.better_than(&clean));
        assert!(Fitness::from_probe(1e-4, 9e-5).floor);
        assert!(!Fitness::from_probe(1e-4, 1e-6).floor);
        assert!(!Fitness::from_probe(1e-2, 1e-2).floor);
        assert!(!Fitness::from_probe(0.0, 0.0).floor);
    }

    #[test]
    fn hand_computed_mutations() {
        let best = cand(&[(2, 0.4), (3, 0.1), (5, 0.3), (6, 0.2)]);
        let a = cand(&[(2, 0.1), (3, 0.4), (5, 0.5)]);
        let pop = vec![best.clone(), a, best.clone(), best.clone()];
        // best + ½(a − best): no clipping needed.
        let forward = cand(&[(2, 0.25), (3, 0.25), (5, 0.4), (6, 0.1)]);
        // best + ½(best − a) = [0.55, −0.05, 0.2, 0.3]: degree 3 clipped,
        // weak class rescaled to 0.5.
        let backward = cand(&[(2, 0.5), (5, 0.2), (6, 0.3)]);
        let mut seen = [false; 3];
        for s in 0..100 {
            let m = mutate(&pop, 0, 0.5, 6, DegreeFour::Strong, &mut rng::stream(s, &[])).unwrap();
            let close = |c: &Candidate| (2..=6).all(|d| (m.weight(d) - c.weight(d)).abs() < 1e-12);
            let k = [&forward, &backward, &best].iter().position(|c| close(c)).unwrap_or_else(|| panic!("unexpected mutant {m}"));
            seen[k] = true;
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn zero_alpha_and_flat_population_return_best() {
        let best = cand(&[(2, 0.5), (5, 0.5)]);
        let other = cand(&[(3, 0.5), (7, 0.5)]);
        let pop = vec![best.clone(), other.clone(), other.clone(), other];
        let m = mutate(&pop, 0, 0.0, 8, DegreeFour::Strong, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(m, best);
        let same = vec![best.clone(); 5];
        let m = mutate(&same, 2, 0.5, 8, DegreeFour::Strong, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(m, best);
        assert!(mutate(&same[..3], 0, 0.5, 8, DegreeFour::Strong, &mut rng::stream(1, &[])).is_err());
    }

    #[test]
    fn single_member_search_keeps_init() {
        let best = cand(&[(2, 0.5), (5, 0.5)]);
        let cfg = OptimizerConfig { alpha: 0.0, population: 1, max_generations: 10, ..OptimizerConfig::new(7) };
        let r = de_optimize(&best, &cfg, |c, _| Ok(Fitness { floor: false, ber: c.weight(2) })).unwrap();
        assert_eq!(r.best, best);
        assert!(r.generations <= 10);
    }

    fn distance(c: &Candidate, target: &Candidate) -> f64 {
        (0..12).map(|d| (c.weight(d) - target.weight(d)).powi(2)).sum()
    }

    #[test]
    fn synthetic_objective_converges() {
        let target = cand(&[(2, 0.35), (3, 0.15), (5, 0.3), (6, 0.15), (7, 0.05)]);
        let init = cand(&[(2, 0.5), (5, 0.5)]);
        let cfg = OptimizerConfig { seed: 4, ..OptimizerConfig::new(7) };
        let r = de_optimize(&init, &cfg, |c, _| Ok(Fitness { floor: false, ber: distance(c, &target) })).unwrap();
        assert!(r.generations <= 50);
        for d in 2..=7 {
            assert!((r.best.weight(d) - target.weight(d)).abs() < 1e-3, "{} vs {}", r.best, target);
        }
        assert!(r.best_history.windows(2).all(|w| !w[0].better_than(&w[1])));
        for e in &r.log {
            assert_classes(&e.candidate, DegreeFour::Strong);
            assert!(e.candidate.max_degree() <= e.ceiling);
        }
    }

    #[test]
    fn searches_are_deterministic() {
        let init = cand(&[(2, 0.5), (5, 0.5)]);
        let cfg = OptimizerConfig { population: 8, max_generations: 5, seed: 9, ..OptimizerConfig::new(8) };
        let eval = |c: &Candidate, s: u64| Ok(Fitness { floor: false, ber: c.weight(7) + (s % 7) as f64 * 1e-9 });
        let a = de_optimize(&init, &cfg, eval).unwrap();
        let b = de_optimize(&init, &cfg, eval).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x, &[]).unwrap();
        b.write_csv(&mut y, &[]).unwrap();
        assert_eq!(x, y);
        assert!(String::from_utf8(x).unwrap().starts_with("generation,member,ceiling,vnd,delta,error_floor,ber,best\n"));
    }

    #[test]
    fn evaluator_errors_name_the_candidate() {
        let init = cand(&[(2, 0.5), (5, 0.5)]);
        let cfg = OptimizerConfig { population: 4, ..OptimizerConfig::new(6) };
        let err = de_optimize(&init, &cfg, |_, _| Err(Error::Input("boom".into()))).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("boom") && msg.contains("[2;5]"), "{msg}");
    }

    #[test]
    fn degree_four_switch() {
        let c = Candidate::new(&[(2, 0.2), (4, 0.3), (6, 1.0)], DegreeFour::Weak).unwrap();
        assert_classes(&c, DegreeFour::Weak);
        assert!((c.weight(4) - 0.3).abs() < 1e-12);
        let c = Candidate::new(&[(2, 0.2), (4, 0.3), (6, 1.0)], DegreeFour::Strong).unwrap();
        assert!((c.weight(2) - 0.5).abs() < 1e-12);
        assert!(Candidate::new(&[(2, 1.0), (3, 1.0)], DegreeFour::Strong).is_err());
    }

    proptest! {
        #[test]
        fn mutants_respect_class_masses(
            ws in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 8), 4..10),
            alpha in 0.0f64..1.0,
            seed in 0u64..1000,
            weak_four in proptest::bool::ANY,
        ) {
            let four = if weak_four { DegreeFour::Weak } else { DegreeFour::Strong };
            let pop: Vec<Candidate> = ws
                .iter()
                .map(|w| {
                    let pairs: Vec<(usize, f64)> = w.iter().enumerate().map(|(i, &x)| (i + 2, x + 1e-3)).collect();
                    Candidate::new(&pairs, four).unwrap()
                })
                .collect();
            let m = mutate(&pop, 0, alpha, 9, four, &mut rng::stream(seed, &[])).unwrap();
            let (w, s) = m.class_masses(four);
            prop_assert!((w - 0.5).abs() < 1e-9 && (s - 0.5).abs() < 1e-9);
            prop_assert!(m.pairs().iter().all(|&(_, x)| x >= 0.0));
        }
    }
}
