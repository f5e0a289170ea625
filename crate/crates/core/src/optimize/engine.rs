use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::particle::{decode, repair, Particle};
use super::{OptimError, OptimizerConfig};
use crate::model::{
    stage_transfer_time, ChargePolicy, PlacementMap, Scenario, Stage, TransferTime,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaheuristicKind {
    Random,
    De,
    Dpso,
    GaDpso,
    DeDpso,
}

/// The update acceptance test compares a candidate against the global
/// best (the published rule). `VsPrevious` is the conventional
/// per-particle alternative, kept behind this switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionRule {
    #[default]
    VsGbest,
    VsPrevious,
}

/// Discrete DE mutation: dimensions where the two donors differ adopt the
/// first donor's value with probability `f`; everything else keeps `x`.
pub fn mutate<R: Rng>(x: &Particle, a: &Particle, b: &Particle, f: f64, rng: &mut R) -> Particle {
    assert_eq!(x.dim(), a.dim());
    assert_eq!(x.dim(), b.dim());
    let mut out = x.positions.clone();
    for k in 0..out.len() {
        if a.positions[k] != b.positions[k] && rng.random::<f64>() < f {
            out[k] = a.positions[k];
        }
    }
    Particle::new(out)
}

/// Uniform crossover: each dimension takes x1 with probability `prob`,
/// else x2.
pub fn crossover<R: Rng>(x1: &Particle, x2: &Particle, prob: f64, rng: &mut R) -> Particle {
    assert_eq!(x1.dim(), x2.dim());
    let positions = (0..x1.dim())
        .map(|k| {
            if rng.random::<f64>() < prob {
                x1.positions[k]
            } else {
                x2.positions[k]
            }
        })
        .collect();
    Particle::new(positions)
}

/// Acceptance rule: the candidate replaces the previous particle only when
/// it strictly beats the reference fitness.
pub fn select_next(
    candidate: Particle,
    previous: Particle,
    candidate_fitness: &TransferTime,
    reference_fitness: &TransferTime,
) -> Particle {
    if candidate_fitness < reference_fitness {
        candidate
    } else {
        previous
    }
}

/// Memoizing fitness: build-stage transfer time of the repaired, decoded
/// placement. Pure in the particle, so caching by positions is safe.
pub struct FitnessEvaluator<'a> {
    scenario: &'a Scenario,
    policy: ChargePolicy,
    cache: HashMap<Vec<u16>, TransferTime>,
    pub evaluations: u64,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        FitnessEvaluator {
            scenario,
            policy: ChargePolicy::default(),
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn with_policy(scenario: &'a Scenario, policy: ChargePolicy) -> Self {
        FitnessEvaluator {
            scenario,
            policy,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn fitness(&mut self, p: &Particle) -> Result<TransferTime, OptimError> {
        if let Some(hit) = self.cache.get(&p.positions) {
            return Ok(hit.clone());
        }
        self.evaluations += 1;
        let map = repair(decode(p, self.scenario)?, self.scenario)?;
        let times = stage_transfer_time(self.scenario, &map, Stage::Build, self.policy)?;
        self.cache.insert(p.positions.clone(), times.total.clone());
        Ok(times.total)
    }

    pub fn placement(&self, p: &Particle) -> Result<PlacementMap, OptimError> {
        repair(decode(p, self.scenario)?, self.scenario)
    }
}

/// Swarm bookkeeping exposed for invariant tests.
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub fits: Vec<TransferTime>,
    pub pbest: Vec<(Particle, TransferTime)>,
    pub gbest: (Particle, TransferTime),
    pub iteration: usize,
}

/// Uniform placement of the public datasets, then repair.
pub fn random_placement(
    s: &Scenario,
    seed: u64,
) -> Result<(PlacementMap, TransferTime), OptimError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let p = Particle::random(s.public_order().len(), s.datacenters.len(), &mut rng);
    let mut eval = FitnessEvaluator::new(s);
    let fit = eval.fitness(&p)?;
    Ok((eval.placement(&p)?, fit))
}

pub fn run_de_dpso(
    s: &Scenario,
    cfg: &OptimizerConfig,
) -> Result<(PlacementMap, TransferTime), OptimError> {
    run_metaheuristic(MetaheuristicKind::DeDpso, s, cfg, SelectionRule::default())
}

pub fn run_baseline(
    kind: MetaheuristicKind,
    s: &Scenario,
    cfg: &OptimizerConfig,
) -> Result<(PlacementMap, TransferTime), OptimError> {
    run_metaheuristic(kind, s, cfg, SelectionRule::default())
}

pub fn run_metaheuristic(
    kind: MetaheuristicKind,
    s: &Scenario,
    cfg: &OptimizerConfig,
    rule: SelectionRule,
) -> Result<(PlacementMap, TransferTime), OptimError> {
    if kind == MetaheuristicKind::Random {
        return random_placement(s, cfg.seed);
    }
    let mut eval = FitnessEvaluator::new(s);
    let dim = s.public_order().len();
    let num_dc = s.datacenters.len();
    let (best, fit) = run_discrete_search(kind, dim, num_dc, cfg, rule, None, &mut |p| {
        eval.fitness(p)
    })?;
    let map = eval.placement(&best)?;
    Ok((map, fit))
}

/// The swarm loop over an arbitrary discrete fitness; used directly by the
/// per-slot placers, whose objective is not the build-stage time. An
/// optional warm start joins the initial swarm so an incumbent solution
/// is never lost.
pub fn run_discrete_search(
    kind: MetaheuristicKind,
    dim: usize,
    num_dc: usize,
    cfg: &OptimizerConfig,
    rule: SelectionRule,
    warm_start: Option<Particle>,
    fitness: &mut dyn FnMut(&Particle) -> Result<TransferTime, OptimError>,
) -> Result<(Particle, TransferTime), OptimError> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    if kind == MetaheuristicKind::Random {
        let p = Particle::random(dim, num_dc, &mut rng);
        let fit = fitness(&p)?;
        return Ok((p, fit));
    }
    let n = cfg.n.max(1);

    let mut particles = Vec::with_capacity(n);
    let mut fits = Vec::with_capacity(n);
    if let Some(p) = warm_start {
        assert_eq!(p.dim(), dim, "warm start dimension");
        let fit = fitness(&p)?;
        particles.push(p);
        fits.push(fit);
    }
    while particles.len() < n {
        let p = Particle::random(dim, num_dc, &mut rng);
        let fit = fitness(&p)?;
        particles.push(p);
        fits.push(fit);
    }
    let mut pbest: Vec<(Particle, TransferTime)> = particles
        .iter()
        .cloned()
        .zip(fits.iter().cloned())
        .collect();
    let gbest_at = (0..n).min_by_key(|&i| fits[i].clone()).unwrap_or(0);
    let mut gbest = (particles[gbest_at].clone(), fits[gbest_at].clone());

    for _iter in 0..cfg.itermax {
        for i in 0..n {
            let candidate = match kind {
                MetaheuristicKind::DeDpso => {
                    let (a, b) = two_distinct(n, &mut rng);
                    let u = mutate(&particles[i], &particles[a], &particles[b], cfg.f, &mut rng);
                    let v = crossover(&pbest[i].0, &u, cfg.cr_p, &mut rng);
                    crossover(&gbest.0, &v, cfg.cr_g, &mut rng)
                }
                MetaheuristicKind::De => {
                    let (a, b) = two_distinct(n, &mut rng);
                    mutate(&particles[i], &particles[a], &particles[b], cfg.f, &mut rng)
                }
                MetaheuristicKind::Dpso => {
                    let v = crossover(&pbest[i].0, &particles[i], cfg.cr_p, &mut rng);
                    crossover(&gbest.0, &v, cfg.cr_g, &mut rng)
                }
                MetaheuristicKind::GaDpso => {
                    let v = crossover(&pbest[i].0, &particles[i], cfg.cr_p, &mut rng);
                    let w = crossover(&gbest.0, &v, cfg.cr_g, &mut rng);
                    reset_mutation(&w, cfg.f, num_dc, &mut rng)
                }
                MetaheuristicKind::Random => unreachable!(),
            };
            let fit = fitness(&candidate)?;
            let reference = match rule {
                SelectionRule::VsGbest => &gbest.1,
                SelectionRule::VsPrevious => &fits[i],
            };
            if fit < *reference {
                particles[i] = candidate;
                fits[i] = fit;
            }
            if fits[i] < pbest[i].1 {
                pbest[i] = (particles[i].clone(), fits[i].clone());
            }
            if fits[i] < gbest.1 {
                gbest = (particles[i].clone(), fits[i].clone());
            }
        }
    }

    Ok(gbest)
}

/// Per-dimension uniform reset at rate `rate` (the GA-style mutation).
fn reset_mutation<R: Rng>(x: &Particle, rate: f64, num_dc: usize, rng: &mut R) -> Particle {
    let positions = x
        .positions
        .iter()
        .map(|&v| {
            if rng.random::<f64>() < rate {
                rng.random_range(0..num_dc) as u16
            } else {
                v
            }
        })
        .collect();
    Particle::new(positions)
}

fn two_distinct<R: Rng>(n: usize, rng: &mut R) -> (usize, usize) {
    if n < 2 {
        return (0, 0);
    }
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n);
    while b == a {
        b = rng.random_range(0..n);
    }
    (a, b)
}
