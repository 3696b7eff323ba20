//! Fitness landscapes (all maximised): the negated Rastrigin function, a
//! decaying Gaussian bump, their time-dependent sum, and a concave quadratic.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Position in the generational loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    pub t: usize,
    pub t_max: usize,
}

impl Clock {
    pub fn new(t: usize, t_max: usize) -> Self {
        Self { t, t_max }
    }

    /// `t / t_max`.
    pub fn progress(self) -> f64 {
        self.t as f64 / self.t_max as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Descriptor {
    pub name: String,
    pub params: Value,
}

/// A scalar field to maximise, possibly changing with the generation.
pub trait Objective: Send + Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &[f64], clock: Clock) -> f64;

    fn gradient(&self, _x: &[f64], _clock: Clock) -> Option<Vec<f64>> {
        None
    }

    fn hessian(&self, _x: &[f64], _clock: Clock) -> Option<DMatrix<f64>> {
        None
    }

    fn descriptor(&self) -> Descriptor;
}

/// `cos(2πx)` after exact reduction of `x` to `[-0.5, 0.5]`.
fn cos_2pi(x: f64) -> f64 {
    (2.0 * PI * (x - x.round())).cos()
}

fn sin_2pi(x: f64) -> f64 {
    (2.0 * PI * (x - x.round())).sin()
}

/// `-[10 n + Σ (x_k² - 10 cos 2π x_k)]`; maximum 0 at the origin.
pub fn rastrigin(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|&v| v * v - 10.0 * cos_2pi(v)).sum();
    -(10.0 * x.len() as f64 + sum)
}

pub fn rastrigin_grad(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| -(2.0 * v + 20.0 * PI * sin_2pi(v)))
        .collect()
}

pub fn rastrigin_hess(x: &[f64]) -> DMatrix<f64> {
    let diag: Vec<f64> = x
        .iter()
        .map(|&v| -(2.0 + 40.0 * PI * PI * cos_2pi(v)))
        .collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
}

/// Gaussian bump whose amplitude decays as `A0 exp(-λ t / t_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationParams {
    pub amplitude: f64,
    pub decay_rate: f64,
    pub sigma_squared: f64,
    pub center: Vec<f64>,
}

impl Default for PerturbationParams {
    fn default() -> Self {
        Self {
            amplitude: 2.0,
            decay_rate: 0.5,
            sigma_squared: 1.0 / 40.0,
            center: vec![0.0, 1.0],
        }
    }
}

impl PerturbationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_squared.is_finite() && self.sigma_squared > 0.0) {
            return Err(Error::Config(format!(
                "sigma_squared must be positive, got {}",
                self.sigma_squared
            )));
        }
        if !(self.decay_rate.is_finite() && self.decay_rate >= 0.0) {
            return Err(Error::Config(format!(
                "decay_rate must be non-negative, got {}",
                self.decay_rate
            )));
        }
        if !self.amplitude.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("perturbation parameters must be finite".into()));
        }
        Ok(())
    }

    /// Current amplitude `A0 exp(-λ t / t_max)`.
    pub fn amplitude_at(&self, clock: Clock) -> f64 {
        self.amplitude * (-self.decay_rate * clock.progress()).exp()
    }
}

pub fn perturbation(x: &[f64], clock: Clock, p: &PerturbationParams) -> f64 {
    let r2: f64 = x
        .iter()
        .zip(&p.center)
        .map(|(a, c)| (a - c) * (a - c))
        .sum();
    p.amplitude_at(clock) * (-r2 / (2.0 * p.sigma_squared)).exp()
}

pub fn perturbation_grad(x: &[f64], clock: Clock, p: &PerturbationParams) -> Vec<f64> {
    let g = perturbation(x, clock, p);
    x.iter()
        .zip(&p.center)
        .map(|(a, c)| -g * (a - c) / p.sigma_squared)
        .collect()
}

pub fn perturbation_hess(x: &[f64], clock: Clock, p: &PerturbationParams) -> DMatrix<f64> {
    let g = perturbation(x, clock, p);
    let s = p.sigma_squared;
    let d: Vec<f64> = x.iter().zip(&p.center).map(|(a, c)| a - c).collect();
    DMatrix::from_fn(x.len(), x.len(), |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        g * (d[i] * d[j] / (s * s) - delta / s)
    })
}

/// The static two-variable Rastrigin landscape.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticRastrigin;

impl Objective for StaticRastrigin {
    fn dimension(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64], _clock: Clock) -> f64 {
        rastrigin(x)
    }

    fn gradient(&self, x: &[f64], _clock: Clock) -> Option<Vec<f64>> {
        Some(rastrigin_grad(x))
    }

    fn hessian(&self, x: &[f64], _clock: Clock) -> Option<DMatrix<f64>> {
        Some(rastrigin_hess(x))
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            name: "rastrigin".into(),
            params: Value::Object(Default::default()),
        }
    }
}

pub fn static_rastrigin() -> StaticRastrigin {
    StaticRastrigin
}

/// Rastrigin plus the decaying Gaussian bump: two competing maxima.
#[derive(Debug, Clone)]
pub struct PerturbedRastrigin {
    params: PerturbationParams,
}

impl PerturbedRastrigin {
    pub fn new(params: PerturbationParams) -> Result<Self> {
        params.validate()?;
        if params.center.len() != 2 {
            return Err(Error::Config(format!(
                "perturbation center must have 2 coordinates, got {}",
                params.center.len()
            )));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &PerturbationParams {
        &self.params
    }
}

pub fn dynamic_objective(params: PerturbationParams) -> Result<PerturbedRastrigin> {
    PerturbedRastrigin::new(params)
}

impl Objective for PerturbedRastrigin {
    fn dimension(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64], clock: Clock) -> f64 {
        rastrigin(x) + perturbation(x, clock, &self.params)
    }

    fn gradient(&self, x: &[f64], clock: Clock) -> Option<Vec<f64>> {
        let g = perturbation_grad(x, clock, &self.params);
        Some(rastrigin_grad(x).iter().zip(g).map(|(a, b)| a + b).collect())
    }

    fn hessian(&self, x: &[f64], clock: Clock) -> Option<DMatrix<f64>> {
        Some(rastrigin_hess(x) + perturbation_hess(x, clock, &self.params))
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            name: "perturbed_rastrigin".into(),
            params: serde_json::to_value(&self.params).expect("plain struct"),
        }
    }
}

/// `peak - (x - m)ᵀ A (x - m)` with `A` symmetric positive-definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcaveQuadratic {
    pub center: Vec<f64>,
    /// Row-major `n × n` curvature matrix.
    pub curvature: Vec<Vec<f64>>,
    #[serde(default)]
    pub peak: f64,
}

impl ConcaveQuadratic {
    pub fn new(center: Vec<f64>, curvature: Vec<Vec<f64>>, peak: f64) -> Result<Self> {
        let q = Self {
            center,
            curvature,
            peak,
        };
        q.validate()?;
        Ok(q)
    }

    /// `-Σ (x_k - m_k)²` scaled by `scale`.
    pub fn isotropic(center: Vec<f64>, scale: f64) -> Result<Self> {
        let n = center.len();
        let curvature = (0..n)
            .map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect();
        Self::new(center, curvature, 0.0)
    }

    fn validate(&self) -> Result<()> {
        let n = self.center.len();
        if n == 0 || self.curvature.len() != n || self.curvature.iter().any(|r| r.len() != n) {
            return Err(Error::Config(
                "quadratic curvature must be an n×n matrix matching the center".into(),
            ));
        }
        let a = self.matrix();
        if (&a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
            return Err(Error::Config("quadratic curvature must be symmetric".into()));
        }
        if a.cholesky().is_none() {
            return Err(Error::Config(
                "quadratic curvature must be positive-definite".into(),
            ));
        }
        Ok(())
    }

    fn matrix(&self) -> DMatrix<f64> {
        let n = self.center.len();
        DMatrix::from_fn(n, n, |i, j| self.curvature[i][j])
    }
}

impl Objective for ConcaveQuadratic {
    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn evaluate(&self, x: &[f64], _clock: Clock) -> f64 {
        let n = self.center.len();
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, m)| a - m).collect();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += d[i] * self.curvature[i][j] * d[j];
            }
        }
        self.peak - q
    }

    fn gradient(&self, x: &[f64], _clock: Clock) -> Option<Vec<f64>> {
        let n = self.center.len();
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, m)| a - m).collect();
        Some(
            (0..n)
                .map(|i| -(0..n).map(|j| (self.curvature[i][j] + self.curvature[j][i]) * d[j]).sum::<f64>())
                .collect(),
        )
    }

    fn hessian(&self, _x: &[f64], _clock: Clock) -> Option<DMatrix<f64>> {
        let a = self.matrix();
        Some(-(&a + a.transpose()))
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            name: "quadratic".into(),
            params: serde_json::to_value(self).expect("plain struct"),
        }
    }
}

pub type Constructor = Arc<dyn Fn(&Value) -> Result<Arc<dyn Objective>> + Send + Sync>;

/// Maps objective names to constructors taking a JSON parameter record.
#[derive(Clone)]
pub struct ObjectiveRegistry {
    constructors: BTreeMap<String, Constructor>,
}

fn params_of<T: serde::de::DeserializeOwned>(name: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone())
        .map_err(|e| Error::Schema(format!("objective `{name}` parameters: {e}")))
}

impl ObjectiveRegistry {
    pub fn empty() -> Self {
        Self {
            constructors: BTreeMap::new(),
        }
    }

    /// `rastrigin`, `perturbed_rastrigin` and `quadratic`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("rastrigin", |v| {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct NoParams {}
            let _: NoParams = params_of("rastrigin", &normalise(v))?;
            Ok(Arc::new(StaticRastrigin) as Arc<dyn Objective>)
        });
        r.register("perturbed_rastrigin", |v| {
            let p: PerturbationParams = params_of("perturbed_rastrigin", v)?;
            Ok(Arc::new(PerturbedRastrigin::new(p)?) as Arc<dyn Objective>)
        });
        r.register("quadratic", |v| {
            let q: ConcaveQuadratic = params_of("quadratic", v)?;
            q.validate()?;
            Ok(Arc::new(q) as Arc<dyn Objective>)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, ctor: F)
    where
        F: Fn(&Value) -> Result<Arc<dyn Objective>> + Send + Sync + 'static,
    {
        self.constructors.insert(name.to_owned(), Arc::new(ctor));
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Arc<dyn Objective>> {
        let ctor = self
            .constructors
            .get(name)
            .ok_or_else(|| Error::UnknownObjective(name.to_owned()))?;
        ctor(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.constructors.keys().map(String::as_str)
    }
}

fn normalise(v: &Value) -> Value {
    if v.is_null() {
        Value::Object(Default::default())
    } else {
        v.clone()
    }
}

impl Default for ObjectiveRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
