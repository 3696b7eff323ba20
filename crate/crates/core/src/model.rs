//! Chromosomes, individuals, populations and the algorithm configuration.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::RandomSource;

/// Fixed-length real chromosome. All components are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if let Some(k) = components.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "component {k} is not finite ({})",
                components[k]
            )));
        }
        Ok(Self(components))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Callers guarantee finiteness (outputs of clamped arithmetic on finite inputs).
    pub(crate) fn from_finite(components: Vec<f64>) -> Self {
        debug_assert!(components.iter().all(|v| v.is_finite()));
        Self(components)
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

/// Closed per-coordinate box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchBounds(Vec<[f64; 2]>);

impl SearchBounds {
    pub fn new(intervals: Vec<[f64; 2]>) -> Result<Self> {
        let bounds = Self(intervals);
        bounds.validate()?;
        Ok(bounds)
    }

    /// The same interval on every coordinate.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![[lo, hi]; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config("search bounds are empty".into()));
        }
        for (k, &[lo, hi]) in self.0.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::Config(format!(
                    "search bounds for coordinate {k} must satisfy lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[[f64; 2]] {
        &self.0
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, &[lo, hi]) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.0.len() && x.iter().zip(&self.0).all(|(v, &[lo, hi])| lo <= *v && *v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Individual {
    pub genotype: RealVector,
    /// `None` for the plain GA and before the per-generation gender draw.
    pub gender: Option<Gender>,
    pub raw_fitness: Option<f64>,
    pub learned_fitness: Option<f64>,
    pub learned_phenotype: Option<RealVector>,
    /// Whether the last learning pass accepted a Newton step.
    pub learned_step: bool,
    /// Carried over by elitism; exempt from mutation in its first generation.
    pub elite: bool,
}

impl Default for RealVector {
    fn default() -> Self {
        Self(Vec::new())
    }
}

impl Individual {
    pub fn new(genotype: RealVector) -> Self {
        Self {
            genotype,
            ..Default::default()
        }
    }

    /// Learned fitness when a learning pass ran, raw fitness otherwise.
    pub fn fitness(&self) -> Option<f64> {
        self.learned_fitness.or(self.raw_fitness)
    }

    /// Where the fitness was realised: the learned phenotype if any, else the genotype.
    pub fn phenotype(&self) -> &RealVector {
        self.learned_phenotype.as_ref().unwrap_or(&self.genotype)
    }

    /// Drop everything derived from the genotype.
    pub(crate) fn reset_caches(&mut self) {
        self.raw_fitness = None;
        self.learned_fitness = None;
        self.learned_phenotype = None;
        self.learned_step = false;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn count(&self, gender: Gender) -> usize {
        self.members
            .iter()
            .filter(|m| m.gender == Some(gender))
            .count()
    }
}

/// The four compared algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// No genders, proportional selection of both parents, no learning.
    GA,
    /// Gender genetic algorithm.
    GGA,
    /// GGA with Baldwinian one-step Newton learning.
    BGGA,
    /// GGA with Lamarckian one-step Newton learning.
    LGGA,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::GA, Variant::GGA, Variant::BGGA, Variant::LGGA];

    pub fn is_gendered(self) -> bool {
        !matches!(self, Variant::GA)
    }

    pub fn learning_mode(self) -> Option<LearningMode> {
        match self {
            Variant::BGGA => Some(LearningMode::Baldwin),
            Variant::LGGA => Some(LearningMode::Lamarck),
            Variant::GA | Variant::GGA => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::GA => "GA",
            Variant::GGA => "GGA",
            Variant::BGGA => "BGGA",
            Variant::LGGA => "LGGA",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearningMode {
    /// Fitness credit only; the genotype is kept.
    Baldwin,
    /// The learned phenotype replaces the genotype.
    Lamarck,
}

/// Which population the learning pass reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnSource {
    PreMutation,
    PostMutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverForm {
    /// `z = x + λ (x − y)`.
    Extrapolate,
    /// `z = x − λ (x − y)`, a convex combination of the parents.
    Convex,
}

/// Initial per-gender mutation probabilities and their exponential decay constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationSchedule {
    pub p_f0: f64,
    pub p_m0: f64,
    pub a_f: f64,
    pub a_m: f64,
}

impl MutationSchedule {
    /// Meta-learned values reported for the static benchmark.
    pub const REFERENCE: MutationSchedule = MutationSchedule {
        p_f0: 0.37,
        p_m0: 0.36,
        a_f: 4.55,
        a_m: 3.57,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_f0", self.p_f0), ("p_m0", self.p_m0)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        for (name, a) in [("a_f", self.a_f), ("a_m", self.a_m)] {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

impl Default for MutationSchedule {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// Every knob of one evolutionary run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub variant: Variant,
    pub population_size: usize,
    pub max_generation: usize,
    pub dimension: usize,
    pub search_bounds: SearchBounds,
    pub gender_probability: f64,
    pub mutation_schedule: MutationSchedule,
    pub mutation_sigma: f64,
    pub crossover_lambda_range: [f64; 2],
    pub crossover_form: CrossoverForm,
    pub elitism_count: usize,
    pub selection_window_fraction: f64,
    /// Switches the learning pass off for BGGA/LGGA (ablation).
    pub learning_enabled: bool,
    pub learn_source: LearnSource,
    /// Relative finite-difference step used when an objective has no analytic derivatives.
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            variant: Variant::BGGA,
            population_size: 100,
            max_generation: 15,
            dimension: 2,
            search_bounds: SearchBounds(vec![[-5.12, 5.12]; 2]),
            gender_probability: 0.5,
            mutation_schedule: MutationSchedule::REFERENCE,
            mutation_sigma: 0.05,
            crossover_lambda_range: [0.0, 1.0],
            crossover_form: CrossoverForm::Convex,
            elitism_count: 1,
            selection_window_fraction: 0.1,
            learning_enabled: true,
            learn_source: LearnSource::PostMutation,
            fd_step: 1e-5,
            seed: 42,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.population_size == 0 {
            return fail("population_size must be positive".into());
        }
        if self.max_generation == 0 {
            return fail("max_generation must be positive".into());
        }
        if self.dimension == 0 {
            return fail("dimension must be positive".into());
        }
        self.search_bounds.validate()?;
        if self.search_bounds.dim() != self.dimension {
            return fail(format!(
                "search_bounds has {} intervals but dimension is {}",
                self.search_bounds.dim(),
                self.dimension
            ));
        }
        if !(0.0..=1.0).contains(&self.gender_probability) {
            return fail(format!(
                "gender_probability must lie in [0, 1], got {}",
                self.gender_probability
            ));
        }
        self.mutation_schedule.validate()?;
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma > 0.0) {
            return fail(format!(
                "mutation_sigma must be positive, got {}",
                self.mutation_sigma
            ));
        }
        let [lo, hi] = self.crossover_lambda_range;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return fail(format!(
                "crossover_lambda_range must be a sub-interval of (0, 1), got ({lo}, {hi})"
            ));
        }
        if self.elitism_count >= self.population_size {
            return fail(format!(
                "elitism_count ({}) must be below population_size ({})",
                self.elitism_count, self.population_size
            ));
        }
        if !(self.selection_window_fraction.is_finite() && self.selection_window_fraction >= 0.0)
        {
            return fail(format!(
                "selection_window_fraction must be non-negative, got {}",
                self.selection_window_fraction
            ));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return fail(format!("fd_step must be positive, got {}", self.fd_step));
        }
        Ok(())
    }

    /// Learning mode actually in force for this run.
    pub fn learning_mode(&self) -> Option<LearningMode> {
        self.variant
            .learning_mode()
            .filter(|_| self.learning_enabled)
    }
}

/// Uniform, independent sampling of every coordinate inside `bounds`.
pub fn init_population(
    config: &EvolutionConfig,
    rng: &mut RandomSource,
) -> Result<Population> {
    config.search_bounds.validate()?;
    let members = (0..config.population_size)
        .map(|_| {
            let genes = config
                .search_bounds
                .intervals()
                .iter()
                .map(|&[lo, hi]| rng.uniform_in(lo, hi))
                .collect();
            Individual::new(RealVector::from_finite(genes))
        })
        .collect();
    Ok(Population {
        members,
        generation: 0,
    })
}

/// Each individual draws `p ~ U[0, 1)` and becomes male iff `p < p_g`.
pub fn assign_genders(pop: &mut Population, p_g: f64, rng: &mut RandomSource) {
    for m in &mut pop.members {
        m.gender = Some(if rng.uniform() < p_g {
            Gender::Male
        } else {
            Gender::Female
        });
    }
}
