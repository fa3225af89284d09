//! Adaptive-restart genetic algorithm over (decoding order, powers, ρ).
//!
//! Each round evolves a population for `generations` generations with
//! tournament selection, crossover, mutation, repair and elitism. The next
//! round starts from the elites of the previous one, chromosomes sampled
//! around them, and a random fill.

use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chromosome::{decode, Chromosome};
use crate::channel::{ChannelState, Scenario};
use crate::error::{Error, Result};
use crate::noma::{union_bound_ber, FirstUserObjective, NomaDesign};
use crate::rng::{stream, Stream};

const TAG_INIT: u64 = 1;
const TAG_OFFSPRING: u64 = 2;

/// Share of a restart fill sampled around the elites.
const ADAPTIVE_FILL: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Wall-clock limit `t_max` in seconds, checked between generations.
    pub max_time_s: f64,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub elite_count: usize,
    pub restart_rounds: usize,
    pub rng_seed: u64,
    /// Standard deviation of the Gaussian mutation, as a fraction of the
    /// gene range.
    pub mutation_scale: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 50,
            max_time_s: 60.0,
            crossover_prob: 0.9,
            mutation_prob: 0.05,
            elite_count: 10,
            restart_rounds: 5,
            rng_seed: 0,
            mutation_scale: 0.1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.population_size < 2 {
            return bad(format!("population size {} < 2", self.population_size));
        }
        if self.elite_count == 0 || self.elite_count >= self.population_size {
            return bad(format!(
                "elite count {} must be in [1, population size {})",
                self.elite_count, self.population_size
            ));
        }
        if self.restart_rounds == 0 {
            return bad("restart_rounds must be >= 1".into());
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if !(self.mutation_scale >= 0.0) || !(self.max_time_s > 0.0) {
            return bad("mutation_scale must be >= 0 and max_time_s > 0".into());
        }
        Ok(())
    }

    /// Single-round GA with the same number of generations in total, hence
    /// the same evaluation budget.
    pub fn budget_matched_plain(&self) -> Self {
        let per_round = self.generations + 1;
        Self {
            restart_rounds: 1,
            generations: self.restart_rounds * per_round - 1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaRun {
    pub best_design: NomaDesign,
    pub best_fitness: f64,
    /// Best fitness of the population after every generation, including
    /// the initial population of each round.
    pub fitness_trace: Vec<f64>,
    /// Trace indices at which a restart round begins (round 0 excluded).
    pub restart_markers: Vec<usize>,
    pub evaluation_count: u64,
    /// No light reaches any user; the returned design is arbitrary.
    pub degenerate: bool,
    pub timed_out: bool,
}

impl GaRun {
    /// Slices of the trace belonging to each round.
    pub fn rounds(&self) -> Vec<&[f64]> {
        let mut bounds = vec![0];
        bounds.extend(&self.restart_markers);
        bounds.push(self.fitness_trace.len());
        bounds
            .windows(2)
            .map(|w| &self.fitness_trace[w[0]..w[1]])
            .collect()
    }
}

#[derive(Clone)]
struct Member {
    chromosome: Chromosome,
    design: NomaDesign,
    fitness: f64,
}

pub fn ga_optimize(scenario: &Scenario, state: &ChannelState, config: &GaConfig) -> Result<GaRun> {
    config.validate()?;
    let k = scenario.num_users();
    let n = scenario.num_elements();
    if state.num_users() != k || state.num_elements() != n {
        return Err(Error::Domain(format!(
            "channel is {}x{}, scenario {k}x{n}",
            state.num_users(),
            state.num_elements()
        )));
    }
    let objective = FirstUserObjective::new(scenario, state)?;

    if state.is_dark() {
        let design = decode(&Chromosome {
            order_genes: (0..k).collect(),
            power_genes: vec![0.0; k],
            rho_genes: vec![1.0; n],
        });
        let fitness = union_bound_ber(&design, state, scenario)?.union_bound_ber_first_user;
        return Ok(GaRun {
            best_design: design,
            best_fitness: fitness,
            fitness_trace: vec![fitness],
            restart_markers: Vec::new(),
            evaluation_count: 1,
            degenerate: true,
            timed_out: false,
        });
    }

    let start = Instant::now();
    let limit = Duration::from_secs_f64(config.max_time_s);
    let seed = config.rng_seed;
    let evaluate = |c: Chromosome| {
        let design = decode(&c);
        let fitness = objective.evaluate(&design);
        Member {
            chromosome: c,
            design,
            fitness,
        }
    };

    let mut trace = Vec::new();
    let mut markers = Vec::new();
    let mut evaluations = 0u64;
    let mut best: Option<Member> = None;
    let mut elites: Vec<Member> = Vec::new();
    let mut timed_out = false;

    'rounds: for round in 0..config.restart_rounds {
        if round > 0 {
            markers.push(trace.len());
        }
        let fresh: Vec<Member> = (elites.len()..config.population_size)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, &[TAG_INIT, round as u64, i as u64]);
                evaluate(restart_member(&elites, i, k, n, config, &mut rng))
            })
            .collect();
        evaluations += fresh.len() as u64;
        let mut population: Vec<Member> = elites.drain(..).chain(fresh).collect();
        sort_by_fitness(&mut population);
        trace.push(population[0].fitness);

        for gen in 1..=config.generations {
            if start.elapsed() > limit {
                timed_out = true;
                elites = population;
                break 'rounds;
            }
            let parents = &population;
            let offspring: Vec<Member> = (config.elite_count..config.population_size)
                .into_par_iter()
                .map(|i| {
                    let mut rng =
                        stream(seed, &[TAG_OFFSPRING, round as u64, gen as u64, i as u64]);
                    let a = tournament(parents, &mut rng);
                    let b = tournament(parents, &mut rng);
                    let mut child = if rng.random::<f64>() < config.crossover_prob {
                        crossover(&a.chromosome, &b.chromosome, &mut rng)
                    } else {
                        a.chromosome.clone()
                    };
                    mutate(&mut child, config, &mut rng);
                    evaluate(child)
                })
                .collect();
            evaluations += offspring.len() as u64;
            population.truncate(config.elite_count);
            population.extend(offspring);
            sort_by_fitness(&mut population);
            trace.push(population[0].fitness);
        }
        population.truncate(config.elite_count);
        elites = population;
        let round_best = &elites[0];
        if best.as_ref().is_none_or(|b| round_best.fitness < b.fitness) {
            best = Some(round_best.clone());
        }
    }
    if timed_out {
        if let Some(m) = elites.first() {
            if best.as_ref().is_none_or(|b| m.fitness < b.fitness) {
                best = Some(m.clone());
            }
        }
    }
    let best = best.expect("at least one population is evaluated");
    Ok(GaRun {
        best_design: best.design,
        best_fitness: best.fitness,
        fitness_trace: trace,
        restart_markers: markers,
        evaluation_count: evaluations,
        degenerate: false,
        timed_out,
    })
}

/// Initial chromosome `i` of a round. After the first round most of the
/// fill is sampled around the carried elites (every power and ρ gene
/// perturbed with the mutation spread); the remainder stays uniformly random.
fn restart_member(
    elites: &[Member],
    i: usize,
    k: usize,
    n: usize,
    config: &GaConfig,
    rng: &mut Stream,
) -> Chromosome {
    let fill = config.population_size - elites.len();
    let seeded = (fill as f64 * ADAPTIVE_FILL) as usize;
    if elites.is_empty() || i >= elites.len() + seeded {
        return Chromosome::random(k, n, rng);
    }
    let mut c = elites[i % elites.len()].chromosome.clone();
    let noise = Normal::new(0.0, config.mutation_scale).expect("scale validated");
    for g in c.power_genes.iter_mut().chain(c.rho_genes.iter_mut()) {
        *g = (*g + noise.sample(rng)).clamp(0.0, 1.0);
    }
    c
}

/// Stable sort, so ties keep elites ahead of newer chromosomes.
fn sort_by_fitness(population: &mut [Member]) {
    population.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
}

fn tournament<'a>(population: &'a [Member], rng: &mut Stream) -> &'a Member {
    let i = rng.random_range(0..population.len());
    let j = rng.random_range(0..population.len());
    // Population is sorted, so the lower index is never worse.
    &population[i.min(j)]
}

fn crossover(a: &Chromosome, b: &Chromosome, rng: &mut Stream) -> Chromosome {
    let blend = |x: &[f64], y: &[f64], rng: &mut Stream| -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(&u, &v)| {
                let l: f64 = rng.random();
                l * u + (1.0 - l) * v
            })
            .collect()
    };
    Chromosome {
        order_genes: order_crossover(&a.order_genes, &b.order_genes, rng),
        power_genes: blend(&a.power_genes, &b.power_genes, rng),
        rho_genes: blend(&a.rho_genes, &b.rho_genes, rng),
    }
}

/// OX1: keep a slice of `a`, fill the rest with the missing genes in the
/// order they appear in `b`.
fn order_crossover(a: &[usize], b: &[usize], rng: &mut Stream) -> Vec<usize> {
    let k = a.len();
    if k < 2 {
        return a.to_vec();
    }
    let (mut lo, mut hi) = (rng.random_range(0..k), rng.random_range(0..k));
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let kept = &a[lo..=hi];
    let mut rest = b.iter().filter(|g| !kept.contains(g));
    (0..k)
        .map(|i| {
            if (lo..=hi).contains(&i) {
                a[i]
            } else {
                *rest.next().expect("b is a permutation of a")
            }
        })
        .collect()
}

fn mutate(c: &mut Chromosome, config: &GaConfig, rng: &mut Stream) {
    let pm = config.mutation_prob;
    let k = c.order_genes.len();
    let positions: Vec<usize> = (0..k).collect();
    for i in 0..k {
        if rng.random::<f64>() < pm {
            let j = *positions.choose(rng).expect("k > 0");
            c.order_genes.swap(i, j);
        }
    }
    let noise = Normal::new(0.0, config.mutation_scale).expect("scale validated");
    for g in c.power_genes.iter_mut().chain(c.rho_genes.iter_mut()) {
        if rng.random::<f64>() < pm {
            *g = (*g + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
}

/// Convergence trace as CSV rows `(generation, best_fitness, restart_flag)`.
pub fn trace_rows(run: &GaRun) -> Vec<(usize, f64, bool)> {
    run.fitness_trace
        .iter()
        .enumerate()
        .map(|(g, &f)| (g, f, run.restart_markers.contains(&g)))
        .collect()
}
