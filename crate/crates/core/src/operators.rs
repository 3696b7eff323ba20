//! Genetic operators: mutation schedule, arithmetic crossover, Gaussian
//! mutation, per-gender parent selection and elitism.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrossoverForm, Individual, MutationSchedule, RealVector, SearchBounds};
use crate::random::RandomSource;

/// Per-individual mutation probabilities at one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub p_f: f64,
    pub p_m: f64,
}

/// `p = p0 * exp(-a t / t_max)` for each gender.
pub fn mutation_rates(t: usize, t_max: usize, sched: &MutationSchedule) -> MutationRates {
    let progress = t as f64 / t_max as f64;
    MutationRates {
        p_f: sched.p_f0 * (-sched.a_f * progress).exp(),
        p_m: sched.p_m0 * (-sched.a_m * progress).exp(),
    }
}

/// Crossover with explicit per-gene coefficients and no clamping.
pub fn crossover_with(
    x: &[f64],
    y: &[f64],
    lambdas: &[f64],
    form: CrossoverForm,
) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != lambdas.len() {
        return Err(Error::Usage(format!(
            "crossover dimension mismatch: {} / {} / {}",
            x.len(),
            y.len(),
            lambdas.len()
        )));
    }
    let sign = match form {
        CrossoverForm::Extrapolate => 1.0,
        CrossoverForm::Convex => -1.0,
    };
    Ok(x.iter()
        .zip(y)
        .zip(lambdas)
        .map(|((&xk, &yk), &l)| xk + sign * l * (xk - yk))
        .collect())
}

/// Offspring of male parent `x` and female parent `y`, with a fresh
/// `λ ~ U(lo, hi)` for every gene, clamped to `bounds`.
///
/// [`CrossoverForm::Convex`] places the child between the parents;
/// [`CrossoverForm::Extrapolate`] pushes it beyond `x`, away from `y`.
pub fn crossover(
    x: &RealVector,
    y: &RealVector,
    lambda_range: [f64; 2],
    form: CrossoverForm,
    bounds: &SearchBounds,
    rng: &mut RandomSource,
) -> Result<RealVector> {
    if x.dim() != y.dim() {
        return Err(Error::Usage(format!(
            "crossover parents differ in dimension: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    let lambdas: Vec<f64> = (0..x.dim())
        .map(|_| rng.uniform_open(lambda_range[0], lambda_range[1]))
        .collect();
    let mut z = crossover_with(x, y, &lambdas, form)?;
    bounds.clamp(&mut z);
    Ok(RealVector::from_finite(z))
}

/// `x + r`, clamped.
pub fn mutate_with(x: &[f64], r: &[f64], bounds: &SearchBounds) -> RealVector {
    let mut z: Vec<f64> = x.iter().zip(r).map(|(a, b)| a + b).collect();
    bounds.clamp(&mut z);
    RealVector::from_finite(z)
}

/// Adds independent `N(0, sigma^2)` noise to every coordinate.
pub fn mutate(
    x: &RealVector,
    sigma: f64,
    bounds: &SearchBounds,
    rng: &mut RandomSource,
) -> RealVector {
    let r: Vec<f64> = (0..x.dim()).map(|_| sigma * rng.standard_normal()).collect();
    mutate_with(x, &r, bounds)
}

/// Normalised roulette probabilities, one per candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionWeights {
    probabilities: Vec<f64>,
}

impl SelectionWeights {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Fitness-proportional weights over a windowed fitness.
///
/// Each weight is `f_i - f_min + eps` with `eps = eps_frac * (f_max - f_min)`,
/// which keeps the ordering of arbitrary-sign fitness values. When every value
/// is equal the weights are uniform. With `eps_frac == 0` and strictly positive
/// fitness the raw ratio `f_i / sum(f)` is used instead.
pub fn male_selection_weights(fitness: &[f64], eps_frac: f64) -> Result<SelectionWeights> {
    if fitness.is_empty() {
        return Err(Error::Usage("selection over an empty pool".into()));
    }
    if let Some(i) = fitness.iter().position(|f| !f.is_finite()) {
        return Err(Error::Evaluation(format!(
            "fitness of candidate {i} is not finite ({})",
            fitness[i]
        )));
    }
    let (min, max) = fitness
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| {
            (lo.min(f), hi.max(f))
        });
    let raw: Vec<f64> = if max == min {
        vec![1.0; fitness.len()]
    } else if eps_frac == 0.0 && min > 0.0 {
        fitness.to_vec()
    } else {
        let eps = eps_frac * (max - min);
        fitness.iter().map(|f| f - min + eps).collect()
    };
    let total: f64 = raw.iter().sum();
    Ok(SelectionWeights {
        probabilities: raw.into_iter().map(|w| w / total).collect(),
    })
}

/// Roulette-wheel draw: index `i` with probability `weights[i]`.
pub fn select_male(weights: &SelectionWeights, rng: &mut RandomSource) -> usize {
    let p = weights.probabilities();
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum just under u: take the last live slot.
    p.iter().rposition(|&w| w > 0.0).unwrap_or(p.len() - 1)
}

/// Uniform random pick.
pub fn select_female<T>(females: &[T], rng: &mut RandomSource) -> Result<usize> {
    if females.is_empty() {
        return Err(Error::Usage("female selection over an empty pool".into()));
    }
    Ok(rng.index(females.len()))
}

/// Indices of the `k` fittest candidates, best first, ties to the lower index.
pub fn elite_indices(fitness: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

pub fn elites(members: &[Individual], fitness: &[f64], k: usize) -> Vec<Individual> {
    elite_indices(fitness, k)
        .into_iter()
        .map(|i| members[i].clone())
        .collect()
}
