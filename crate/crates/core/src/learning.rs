//! Lifetime learning: a single Newton–Raphson step towards the nearest
//! stationary point, accepted only if it raises fitness.
//!
//! In Baldwin mode the learned fitness is credited to the individual while the
//! genotype is kept; in Lamarck mode the learned point replaces the genotype.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Individual, LearningMode, RealVector, SearchBounds};
use crate::objectives::{Clock, Objective};

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub point: Vec<f64>,
    /// `false` when the Hessian was singular or ill-conditioned and `point == x`.
    pub stepped: bool,
}

/// Solves `H (x - x') = ∇f(x)` for `x'`.
pub fn newton_step(x: &[f64], d: &DerivativeBundle) -> Result<NewtonStep> {
    let n = x.len();
    if d.gradient.len() != n || d.hessian.nrows() != n || d.hessian.ncols() != n {
        return Err(Error::Usage(format!(
            "derivative dimensions ({}, {}x{}) do not match point dimension {n}",
            d.gradient.len(),
            d.hessian.nrows(),
            d.hessian.ncols()
        )));
    }
    if d.gradient.iter().chain(d.hessian.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite derivative entry".into()));
    }
    let unchanged = || NewtonStep {
        point: x.to_vec(),
        stepped: false,
    };
    let sv = d.hessian.singular_values();
    let (smin, smax) = sv
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Ok(unchanged());
    }
    let g = DVector::from_column_slice(&d.gradient);
    let Some(delta) = d.hessian.clone().lu().solve(&g) else {
        return Ok(unchanged());
    };
    let point: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a - b).collect();
    if point.iter().any(|v| !v.is_finite()) {
        return Ok(unchanged());
    }
    Ok(NewtonStep {
        point,
        stepped: true,
    })
}

fn step_sizes(x: &[f64], h: f64) -> Vec<f64> {
    x.iter().map(|v| h * v.abs().max(1.0)).collect()
}

fn eval(objective: &dyn Objective, x: &[f64], clock: Clock) -> Result<f64> {
    let v = objective.evaluate(x, clock);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("objective returned {v} at {x:?}")))
    }
}

/// Central differences with step `h * max(1, |x_k|)` on coordinate `k`.
pub fn fd_gradient(objective: &dyn Objective, x: &[f64], clock: Clock, h: f64) -> Result<Vec<f64>> {
    let steps = step_sizes(x, h);
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for (k, &hk) in steps.iter().enumerate() {
        probe[k] = x[k] + hk;
        let up = eval(objective, &probe, clock)?;
        probe[k] = x[k] - hk;
        let down = eval(objective, &probe, clock)?;
        probe[k] = x[k];
        grad.push((up - down) / (2.0 * hk));
    }
    Ok(grad)
}

/// Central second differences, symmetrised.
pub fn fd_hessian(
    objective: &dyn Objective,
    x: &[f64],
    clock: Clock,
    h: f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let steps = step_sizes(x, h);
    let f0 = eval(objective, x, clock)?;
    let mut probe = x.to_vec();
    let mut at = |shifts: &[(usize, f64)]| -> Result<f64> {
        for &(k, s) in shifts {
            probe[k] += s;
        }
        let v = eval(objective, &probe, clock);
        probe.copy_from_slice(x);
        v
    };
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = steps[i];
        let up = at(&[(i, hi)])?;
        let down = at(&[(i, -hi)])?;
        a[(i, i)] = (up - 2.0 * f0 + down) / (hi * hi);
        for j in (i + 1)..n {
            let hj = steps[j];
            let pp = at(&[(i, hi), (j, hj)])?;
            let pm = at(&[(i, hi), (j, -hj)])?;
            let mp = at(&[(i, -hi), (j, hj)])?;
            let mm = at(&[(i, -hi), (j, -hj)])?;
            a[(i, j)] = (pp - pm - mp + mm) / (4.0 * hi * hj);
            a[(j, i)] = a[(i, j)];
        }
    }
    Ok((&a + a.transpose()) * 0.5)
}

/// Analytic derivatives when the objective provides them, finite differences otherwise.
pub fn derivatives(
    objective: &dyn Objective,
    x: &[f64],
    clock: Clock,
    fd_step: f64,
) -> Result<DerivativeBundle> {
    let gradient = match objective.gradient(x, clock) {
        Some(g) => g,
        None => fd_gradient(objective, x, clock, fd_step)?,
    };
    let hessian = match objective.hessian(x, clock) {
        Some(h) => h,
        None => fd_hessian(objective, x, clock, fd_step)?,
    };
    Ok(DerivativeBundle { gradient, hessian })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub phenotype: RealVector,
    pub fitness: f64,
    pub stepped: bool,
}

/// One gated Newton step from `x`, whose fitness is `raw`.
pub fn learn_point(
    x: &RealVector,
    raw: f64,
    objective: &dyn Objective,
    clock: Clock,
    bounds: &SearchBounds,
    fd_step: f64,
) -> Result<LearnOutcome> {
    let d = derivatives(objective, x, clock, fd_step)?;
    let step = newton_step(x, &d)?;
    if step.stepped && bounds.contains(&step.point) {
        let candidate = eval(objective, &step.point, clock)?;
        if candidate > raw {
            return Ok(LearnOutcome {
                phenotype: RealVector::from_finite(step.point),
                fitness: candidate,
                stepped: true,
            });
        }
    }
    Ok(LearnOutcome {
        phenotype: x.clone(),
        fitness: raw,
        stepped: false,
    })
}

/// Evaluates and learns one individual.
///
/// Sets `raw_fitness`, `learned_fitness`, `learned_phenotype` and
/// `learned_step`; in Lamarck mode also overwrites the genotype.
pub fn learn(
    ind: &Individual,
    objective: &dyn Objective,
    clock: Clock,
    mode: LearningMode,
    bounds: &SearchBounds,
    fd_step: f64,
) -> Result<Individual> {
    let raw = match ind.raw_fitness {
        Some(v) => v,
        None => eval(objective, &ind.genotype, clock)?,
    };
    let outcome = learn_point(&ind.genotype, raw, objective, clock, bounds, fd_step)?;
    let mut out = ind.clone();
    out.raw_fitness = Some(raw);
    out.learned_fitness = Some(outcome.fitness);
    out.learned_step = outcome.stepped;
    if mode == LearningMode::Lamarck {
        out.genotype = outcome.phenotype.clone();
    }
    out.learned_phenotype = Some(outcome.phenotype);
    Ok(out)
}
