//! The generational loop shared by GA, GGA, BGGA and LGGA.
//!
//! Each generation `t < t_max` runs, in order: gender draw, mutation-rate
//! update, gender-based mutation, learning (BGGA/LGGA), fitness evaluation,
//! then elitism plus gendered mating to build `P(t + 1)`. The final population
//! `P(t_max)` is evaluated once more so the history covers `t = 0..=t_max`.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learning::learn;
use crate::model::{
    assign_genders, init_population, EvolutionConfig, Gender, Individual, LearnSource,
    LearningMode, Population, RealVector,
};
use crate::objectives::{Clock, Objective};
use crate::operators::{
    crossover, elite_indices, male_selection_weights, mutate, mutation_rates, select_female,
    select_male, MutationRates, SelectionWeights,
};
use crate::random::RandomSource;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub t: usize,
    pub best_fitness: f64,
    /// Where `best_fitness` is attained: the learned phenotype for learning variants.
    pub best_point: RealVector,
    pub mean_fitness: f64,
    pub rates: MutationRates,
    pub male_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    /// One record per generation, `t = 0..=t_max`.
    pub records: Vec<GenerationRecord>,
    pub config_digest: String,
    pub seed: u64,
    /// Number of generations whose mating hit an empty gender pool.
    pub mating_fallbacks: usize,
    pub final_population: Population,
}

impl RunHistory {
    pub fn final_record(&self) -> &GenerationRecord {
        self.records.last().expect("history is never empty")
    }

    /// Running maximum of `best_fitness`.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(f64::NEG_INFINITY, |acc, r| {
                *acc = acc.max(r.best_fitness);
                Some(*acc)
            })
            .collect()
    }
}

/// Hooks around the learning pass. Both see the population of generation `t`.
pub trait Observer {
    fn before_learning(&mut self, _t: usize, _members: &[Individual]) {}
    fn after_learning(&mut self, _t: usize, _members: &[Individual]) {}
}

impl Observer for () {}

/// Short, stable identifier of a configuration.
pub fn config_digest(config: &EvolutionConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serialises");
    let hash = Sha256::digest(&json);
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn evolve(
    config: &EvolutionConfig,
    objective: &dyn Objective,
    rng: &mut RandomSource,
) -> Result<RunHistory> {
    evolve_observed(config, objective, rng, &mut ())
}

pub fn evolve_observed(
    config: &EvolutionConfig,
    objective: &dyn Objective,
    rng: &mut RandomSource,
    observer: &mut dyn Observer,
) -> Result<RunHistory> {
    config.validate()?;
    if objective.dimension() != config.dimension {
        return Err(Error::Usage(format!(
            "objective `{}` has dimension {}, configuration has {}",
            objective.descriptor().name,
            objective.dimension(),
            config.dimension
        )));
    }
    let t_max = config.max_generation;
    let mut pop = init_population(config, rng)?;
    let mut records = Vec::with_capacity(t_max + 1);
    let mut fallbacks = 0;

    for t in 0..t_max {
        pop.generation = t;
        if config.variant.is_gendered() {
            assign_genders(&mut pop, config.gender_probability, rng);
        }
        let rates = mutation_rates(t, t_max, &config.mutation_schedule);
        let learn_pre = config.learning_mode().is_some()
            && config.learn_source == LearnSource::PreMutation;
        let before_mutation = learn_pre.then(|| pop.members.clone());

        for m in &mut pop.members {
            m.reset_caches();
            if std::mem::take(&mut m.elite) {
                continue;
            }
            let p = match m.gender {
                Some(Gender::Male) => rates.p_m,
                _ => rates.p_f,
            };
            if rng.uniform() < p {
                m.genotype = mutate(&m.genotype, config.mutation_sigma, &config.search_bounds, rng);
            }
        }

        let clock = Clock::new(t, t_max);
        match before_mutation {
            Some(mut parents) => {
                // Learn on P(t), carry its fitness onto PM(t).
                evaluate(&mut parents, objective, clock, config, observer)?;
                for (m, p) in pop.members.iter_mut().zip(parents) {
                    if config.learning_mode() == Some(LearningMode::Lamarck) {
                        m.genotype = p.genotype.clone();
                    }
                    m.raw_fitness = p.raw_fitness;
                    m.learned_fitness = p.learned_fitness;
                    m.learned_phenotype = p.learned_phenotype;
                    m.learned_step = p.learned_step;
                }
            }
            None => evaluate(&mut pop.members, objective, clock, config, observer)?,
        }
        let fitness = fitness_of(&pop.members);
        records.push(record(t, &pop, &fitness, rates));

        let next = reproduce(&pop, &fitness, config, rng)?;
        fallbacks += usize::from(next.fallback);
        pop = next.population;
    }

    pop.generation = t_max;
    if config.variant.is_gendered() {
        assign_genders(&mut pop, config.gender_probability, rng);
    }
    for m in &mut pop.members {
        m.reset_caches();
        m.elite = false;
    }
    evaluate(
        &mut pop.members,
        objective,
        Clock::new(t_max, t_max),
        config,
        observer,
    )?;
    let fitness = fitness_of(&pop.members);
    records.push(record(
        t_max,
        &pop,
        &fitness,
        mutation_rates(t_max, t_max, &config.mutation_schedule),
    ));

    Ok(RunHistory {
        records,
        config_digest: config_digest(config),
        seed: config.seed,
        mating_fallbacks: fallbacks,
        final_population: pop,
    })
}

/// Raw evaluation, then the learning pass when the variant learns.
fn evaluate(
    members: &mut [Individual],
    objective: &dyn Objective,
    clock: Clock,
    config: &EvolutionConfig,
    observer: &mut dyn Observer,
) -> Result<()> {
    let fail = |index: usize, detail: String| Error::Generation {
        generation: clock.t,
        index,
        detail,
    };
    for (i, m) in members.iter_mut().enumerate() {
        let v = objective.evaluate(&m.genotype, clock);
        if !v.is_finite() {
            return Err(fail(i, format!("objective returned {v}")));
        }
        m.raw_fitness = Some(v);
    }
    let Some(mode) = config.learning_mode() else {
        return Ok(());
    };
    observer.before_learning(clock.t, members);
    for (i, m) in members.iter_mut().enumerate() {
        *m = learn(
            m,
            objective,
            clock,
            mode,
            &config.search_bounds,
            config.fd_step,
        )
        .map_err(|e| fail(i, e.to_string()))?;
    }
    observer.after_learning(clock.t, members);
    Ok(())
}

fn fitness_of(members: &[Individual]) -> Vec<f64> {
    members
        .iter()
        .map(|m| m.fitness().expect("evaluated"))
        .collect()
}

fn record(t: usize, pop: &Population, fitness: &[f64], rates: MutationRates) -> GenerationRecord {
    let best = elite_indices(fitness, 1)[0];
    GenerationRecord {
        t,
        best_fitness: fitness[best],
        best_point: pop.members[best].phenotype().clone(),
        mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
        rates,
        male_count: pop.count(Gender::Male),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub population: Population,
    /// A gendered mating had an empty male or female pool.
    pub fallback: bool,
}

/// Elites plus `N - k` offspring of selected parents.
///
/// Gendered variants pick fathers by windowed roulette over the males and
/// mothers uniformly among the females; an empty pool is replaced by roulette
/// over the whole population. The plain GA uses whole-population roulette for
/// both parents.
pub fn reproduce(
    pop: &Population,
    fitness: &[f64],
    config: &EvolutionConfig,
    rng: &mut RandomSource,
) -> Result<Reproduction> {
    if fitness.len() != pop.len() {
        return Err(Error::Usage(format!(
            "{} fitness values for {} individuals",
            fitness.len(),
            pop.len()
        )));
    }
    let n = config.population_size;
    let eps = config.selection_window_fraction;
    let mut next: Vec<Individual> = elite_indices(fitness, config.elitism_count)
        .into_iter()
        .map(|i| Individual {
            elite: true,
            ..Individual::new(pop.members[i].genotype.clone())
        })
        .collect();

    let whole = male_selection_weights(fitness, eps)?;
    let pool = |g: Gender| -> Vec<usize> {
        if !config.variant.is_gendered() {
            return Vec::new();
        }
        (0..pop.len())
            .filter(|&i| pop.members[i].gender == Some(g))
            .collect()
    };
    let males = pool(Gender::Male);
    let females = pool(Gender::Female);
    let male_weights: Option<SelectionWeights> = if males.is_empty() {
        None
    } else {
        let f: Vec<f64> = males.iter().map(|&i| fitness[i]).collect();
        Some(male_selection_weights(&f, eps)?)
    };
    let fallback = config.variant.is_gendered() && (males.is_empty() || females.is_empty());

    while next.len() < n {
        let father = match &male_weights {
            Some(w) => males[select_male(w, rng)],
            None => select_male(&whole, rng),
        };
        let mother = if females.is_empty() {
            select_male(&whole, rng)
        } else {
            females[select_female(&females, rng)?]
        };
        let child = crossover(
            &pop.members[father].genotype,
            &pop.members[mother].genotype,
            config.crossover_lambda_range,
            config.crossover_form,
            &config.search_bounds,
            rng,
        )?;
        next.push(Individual::new(child));
    }

    Ok(Reproduction {
        population: Population {
            members: next,
            generation: pop.generation + 1,
        },
        fallback,
    })
}
