//! Ensemble harness: averaged histories, peak-chase classification, the
//! decay-rate bifurcation sweep, variant comparison, and meta-optimization
//! of the mutation schedule.
//!
//! Run `k` of an ensemble with base seed `s` always uses
//! `RandomSource::stream(s, k)`. Runs execute on the current rayon pool and
//! are reduced in index order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::{evolve, RunHistory};
use crate::error::{Error, Result};
use crate::model::{EvolutionConfig, MutationSchedule, RealVector, SearchBounds, Variant};
use crate::objectives::{
    dynamic_objective, static_rastrigin, Clock, Descriptor, Objective, PerturbationParams,
};
use crate::random::{mix_seed, RandomSource};

/// One-sided 99% critical value of the standard normal.
pub const Z_99: f64 = 2.326_347_874_040_840_8;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation over `standard error = sd / sqrt(n)`; zero for `n < 2`.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// One-sided z-test of `H1: mean_a > mean_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTest {
    pub difference: f64,
    pub combined_stderr: f64,
    pub z: f64,
    pub p_value: f64,
    pub significant_99: bool,
}

pub fn one_sided_z(mean_a: f64, se_a: f64, mean_b: f64, se_b: f64) -> ZTest {
    let difference = mean_a - mean_b;
    let combined_stderr = (se_a * se_a + se_b * se_b).sqrt();
    let z = if combined_stderr > 0.0 {
        difference / combined_stderr
    } else if difference > 0.0 {
        f64::INFINITY
    } else if difference < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let normal = Normal::standard();
    let p_value = 1.0 - normal.cdf(z);
    ZTest {
        difference,
        combined_stderr,
        z,
        p_value,
        significant_99: z > Z_99,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub stream: u64,
    pub best_fitness: Vec<f64>,
    pub best_points: Vec<RealVector>,
    pub mating_fallbacks: usize,
}

impl RunSummary {
    fn from_history(stream: u64, h: &RunHistory) -> Self {
        Self {
            stream,
            best_fitness: h.records.iter().map(|r| r.best_fitness).collect(),
            best_points: h.records.iter().map(|r| r.best_point.clone()).collect(),
            mating_fallbacks: h.mating_fallbacks,
        }
    }

    pub fn final_fitness(&self) -> f64 {
        *self.best_fitness.last().expect("non-empty")
    }

    pub fn final_point(&self) -> &RealVector {
        self.best_points.last().expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub n_runs: usize,
    pub base_seed: u64,
    pub mean_best_fitness: Vec<f64>,
    pub stderr_best_fitness: Vec<f64>,
    pub mean_best_point: Vec<Vec<f64>>,
    #[serde(skip)]
    pub runs: Vec<RunSummary>,
}

impl EnsembleResult {
    pub fn from_runs(base_seed: u64, runs: Vec<RunSummary>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Usage("an ensemble needs at least one run".into()));
        }
        let generations = runs[0].best_fitness.len();
        let dim = runs[0].best_points[0].dim();
        let mut mean_best_fitness = Vec::with_capacity(generations);
        let mut stderr_best_fitness = Vec::with_capacity(generations);
        let mut mean_best_point = Vec::with_capacity(generations);
        for g in 0..generations {
            let column: Vec<f64> = runs.iter().map(|r| r.best_fitness[g]).collect();
            mean_best_fitness.push(mean(&column));
            stderr_best_fitness.push(standard_error(&column));
            mean_best_point.push(
                (0..dim)
                    .map(|k| mean(&runs.iter().map(|r| r.best_points[g][k]).collect::<Vec<_>>()))
                    .collect(),
            );
        }
        Ok(Self {
            n_runs: runs.len(),
            base_seed,
            mean_best_fitness,
            stderr_best_fitness,
            mean_best_point,
            runs,
        })
    }

    pub fn final_best_fitness(&self) -> Vec<f64> {
        self.runs.iter().map(RunSummary::final_fitness).collect()
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean_best_fitness.last().expect("non-empty")
    }

    pub fn final_stderr(&self) -> f64 {
        *self.stderr_best_fitness.last().expect("non-empty")
    }

    /// Label of every run's best point at every generation.
    pub fn labels(&self, centers: &ChaseCenters, radius: f64) -> Vec<Vec<ChaseLabel>> {
        self.runs
            .iter()
            .map(|r| {
                r.best_points
                    .iter()
                    .map(|p| classify_chase(p, centers, radius))
                    .collect()
            })
            .collect()
    }

    pub fn final_labels(&self, centers: &ChaseCenters, radius: f64) -> Vec<ChaseLabel> {
        self.runs
            .iter()
            .map(|r| classify_chase(r.final_point(), centers, radius))
            .collect()
    }

    pub fn mating_fallbacks(&self) -> usize {
        self.runs.iter().map(|r| r.mating_fallbacks).sum()
    }
}

/// `n_runs` independent realizations on sub-streams `0..n_runs` of `base_seed`.
pub fn run_ensemble(
    config: &EvolutionConfig,
    objective: &dyn Objective,
    n_runs: usize,
    base_seed: u64,
) -> Result<EnsembleResult> {
    if n_runs == 0 {
        return Err(Error::Usage("n_runs must be at least 1".into()));
    }
    config.validate()?;
    let config = EvolutionConfig {
        seed: base_seed,
        ..config.clone()
    };
    let outcomes: Vec<Result<RunSummary>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = RandomSource::stream(base_seed, k);
            evolve(&config, objective, &mut rng)
                .map(|h| RunSummary::from_history(k, &h))
                .map_err(|e| Error::Run {
                    run: k,
                    base_seed,
                    source: Box::new(e),
                })
        })
        .collect();
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    EnsembleResult::from_runs(base_seed, runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChaseLabel {
    PerturbationPeak,
    RastriginPeak,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaseCenters {
    pub rastrigin: Vec<f64>,
    pub perturbation: Vec<f64>,
}

impl ChaseCenters {
    pub fn for_params(p: &PerturbationParams) -> Self {
        Self {
            rastrigin: vec![0.0; p.center.len()],
            perturbation: p.center.clone(),
        }
    }
}

/// Which maximum a point is chasing: whichever ball of `radius` contains it,
/// the nearer center when both do (ties go to the perturbation peak).
pub fn classify_chase(point: &[f64], centers: &ChaseCenters, radius: f64) -> ChaseLabel {
    let dist = |c: &[f64]| {
        point
            .iter()
            .zip(c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let d_pert = dist(&centers.perturbation);
    let d_rast = dist(&centers.rastrigin);
    match (d_pert <= radius, d_rast <= radius) {
        (true, true) if d_rast < d_pert => ChaseLabel::RastriginPeak,
        (true, _) => ChaseLabel::PerturbationPeak,
        (false, true) => ChaseLabel::RastriginPeak,
        (false, false) => ChaseLabel::Neither,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationReport {
    pub lambda_grid: Vec<f64>,
    /// Fraction of runs whose final best point is labelled `RastriginPeak`.
    pub switch_fraction: Vec<f64>,
    /// Binomial standard error `sqrt(f (1 - f) / n)` of each fraction.
    pub switch_stderr: Vec<f64>,
    pub n_runs: usize,
    /// Smallest grid value with a switch fraction above one half.
    pub bifurcation_lambda: Option<f64>,
    #[serde(skip)]
    pub ensembles: Vec<EnsembleResult>,
}

impl BifurcationReport {
    /// Whether `switch_fraction` never drops by more than `k` combined
    /// standard errors between any two grid points.
    pub fn is_monotone_within(&self, k: f64) -> bool {
        let f = &self.switch_fraction;
        let se = &self.switch_stderr;
        (0..f.len()).all(|i| {
            (i + 1..f.len()).all(|j| f[j] >= f[i] - k * (se[i] * se[i] + se[j] * se[j]).sqrt())
        })
    }
}

/// Ensembles of the perturbed benchmark for every decay rate in `lambda_grid`.
/// Every grid point reuses the same run sub-streams.
pub fn bifurcation_sweep(
    config: &EvolutionConfig,
    perturbation: &PerturbationParams,
    lambda_grid: &[f64],
    n_runs: usize,
    base_seed: u64,
    radius: f64,
) -> Result<BifurcationReport> {
    if lambda_grid.is_empty() {
        return Err(Error::Usage("lambda grid is empty".into()));
    }
    if lambda_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("lambda grid must be sorted ascending".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Usage(format!("chase radius must be positive, got {radius}")));
    }
    let centers = ChaseCenters::for_params(perturbation);
    let mut switch_fraction = Vec::with_capacity(lambda_grid.len());
    let mut switch_stderr = Vec::with_capacity(lambda_grid.len());
    let mut ensembles = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let objective = dynamic_objective(PerturbationParams {
            decay_rate: lambda,
            ..perturbation.clone()
        })?;
        let ens = run_ensemble(config, &objective, n_runs, base_seed)?;
        let switched = ens
            .final_labels(&centers, radius)
            .into_iter()
            .filter(|&l| l == ChaseLabel::RastriginPeak)
            .count();
        let f = switched as f64 / n_runs as f64;
        switch_fraction.push(f);
        switch_stderr.push((f * (1.0 - f) / n_runs as f64).sqrt());
        ensembles.push(ens);
    }
    let bifurcation_lambda = lambda_grid
        .iter()
        .zip(&switch_fraction)
        .find(|(_, &f)| f > 0.5)
        .map(|(&l, _)| l);
    Ok(BifurcationReport {
        lambda_grid: lambda_grid.to_vec(),
        switch_fraction,
        switch_stderr,
        n_runs,
        bifurcation_lambda,
        ensembles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantRow {
    pub variant: Variant,
    pub mean_final_best_fitness: f64,
    pub stderr_final_best_fitness: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseTest {
    pub better: Variant,
    pub worse: Variant,
    pub test: ZTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Input order.
    pub rows: Vec<VariantRow>,
    /// Variants ordered by mean final best fitness, best first.
    pub ranking: Vec<Variant>,
    /// `H1: row a > row b` for every ordered pair `a != b`.
    pub pairwise: Vec<PairwiseTest>,
    #[serde(skip)]
    pub ensembles: Vec<EnsembleResult>,
}

impl Comparison {
    pub fn row(&self, v: Variant) -> Option<&VariantRow> {
        self.rows.iter().find(|r| r.variant == v)
    }

    pub fn test(&self, better: Variant, worse: Variant) -> Option<&ZTest> {
        self.pairwise
            .iter()
            .find(|p| p.better == better && p.worse == worse)
            .map(|p| &p.test)
    }
}

/// The same ensemble (budget and seeds) for every variant.
pub fn compare_variants(
    objective: &dyn Objective,
    variants: &[Variant],
    config: &EvolutionConfig,
    n_runs: usize,
    base_seed: u64,
) -> Result<Comparison> {
    let mut rows = Vec::with_capacity(variants.len());
    let mut ensembles = Vec::with_capacity(variants.len());
    for &variant in variants {
        let cfg = EvolutionConfig {
            variant,
            ..config.clone()
        };
        let ens = run_ensemble(&cfg, objective, n_runs, base_seed)?;
        rows.push(VariantRow {
            variant,
            mean_final_best_fitness: ens.final_mean(),
            stderr_final_best_fitness: ens.final_stderr(),
            n_runs,
        });
        ensembles.push(ens);
    }
    let mut ranking: Vec<&VariantRow> = rows.iter().collect();
    ranking.sort_by(|a, b| b.mean_final_best_fitness.total_cmp(&a.mean_final_best_fitness));
    let ranking = ranking.into_iter().map(|r| r.variant).collect();
    let mut pairwise = Vec::new();
    for a in &rows {
        for b in &rows {
            if a.variant != b.variant {
                pairwise.push(PairwiseTest {
                    better: a.variant,
                    worse: b.variant,
                    test: one_sided_z(
                        a.mean_final_best_fitness,
                        a.stderr_final_best_fitness,
                        b.mean_final_best_fitness,
                        b.stderr_final_best_fitness,
                    ),
                });
            }
        }
    }
    Ok(Comparison {
        rows,
        ranking,
        pairwise,
        ensembles,
    })
}

/// Search box and budget of the outer (meta) GGA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    /// `[lo, hi]` for `p_f0`, `p_m0`, `a_f`, `a_m`; `lo == hi` pins a coordinate.
    pub search_box: [[f64; 2]; 4],
    pub population_size: usize,
    pub generations: usize,
    pub inner_runs: usize,
    pub inner_variant: Variant,
    pub mutation_sigma: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            search_box: [[0.0, 1.0], [0.0, 1.0], [1e-3, 10.0], [1e-3, 10.0]],
            population_size: 20,
            generations: 10,
            inner_runs: 20,
            inner_variant: Variant::GGA,
            mutation_sigma: 0.1,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        for (k, &[lo, hi]) in self.search_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!(
                    "meta search box coordinate {k} must satisfy lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        for k in 0..2 {
            let [lo, hi] = self.search_box[k];
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::Config(format!(
                    "meta search box for initial probability {k} must lie in [0, 1]"
                )));
            }
        }
        for k in 2..4 {
            if self.search_box[k][0] <= 0.0 {
                return Err(Error::Config(
                    "meta search box for decay constants must be positive".into(),
                ));
            }
        }
        if self.population_size < 2 || self.generations == 0 || self.inner_runs == 0 {
            return Err(Error::Config(
                "meta budget needs population_size >= 2, generations >= 1, inner_runs >= 1".into(),
            ));
        }
        if !(self.mutation_sigma > 0.0) {
            return Err(Error::Config("meta mutation_sigma must be positive".into()));
        }
        Ok(())
    }
}

fn schedule_from(v: [f64; 4]) -> MutationSchedule {
    MutationSchedule {
        p_f0: v[0],
        p_m0: v[1],
        a_f: v[2],
        a_m: v[3],
    }
}

/// Ensemble-mean final best fitness (and its standard error) of `template`
/// run with `schedule` on the static Rastrigin landscape.
pub fn inner_performance(
    template: &EvolutionConfig,
    schedule: MutationSchedule,
    inner_runs: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let cfg = EvolutionConfig {
        mutation_schedule: schedule,
        ..template.clone()
    };
    let ens = run_ensemble(&cfg, &static_rastrigin(), inner_runs, seed)?;
    Ok((ens.final_mean(), ens.final_stderr()))
}

/// Schedule parameters as a fitness landscape: the chromosome holds the free
/// coordinates of the search box.
struct ScheduleLandscape<'a> {
    template: &'a EvolutionConfig,
    pinned: [f64; 4],
    free: Vec<usize>,
    inner_runs: usize,
    inner_seed: u64,
}

impl ScheduleLandscape<'_> {
    fn expand(&self, x: &[f64]) -> [f64; 4] {
        let mut v = self.pinned;
        for (&k, &xi) in self.free.iter().zip(x) {
            v[k] = xi;
        }
        v
    }
}

impl Objective for ScheduleLandscape<'_> {
    fn dimension(&self) -> usize {
        self.free.len()
    }

    fn evaluate(&self, x: &[f64], _clock: Clock) -> f64 {
        inner_performance(
            self.template,
            schedule_from(self.expand(x)),
            self.inner_runs,
            self.inner_seed,
        )
        .map(|(m, _)| m)
        .unwrap_or(f64::NAN)
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            name: "mutation_schedule".into(),
            params: serde_json::json!({ "free": self.free, "inner_runs": self.inner_runs }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaResult {
    pub schedule: MutationSchedule,
    /// Inner performance of `schedule` as seen by the search.
    pub fitness: f64,
    /// Outer best fitness per generation.
    pub outer_best: Vec<f64>,
    pub inner_seed: u64,
}

/// Tunes `(p_f0, p_m0, a_f, a_m)` with an outer GGA whose fitness is the
/// inner ensemble-mean final best fitness on static Rastrigin. Every
/// candidate is scored on the same inner seeds.
pub fn meta_optimize(
    inner_template: &EvolutionConfig,
    meta: &MetaConfig,
    base_seed: u64,
) -> Result<MetaResult> {
    meta.validate()?;
    let template = EvolutionConfig {
        variant: meta.inner_variant,
        ..inner_template.clone()
    };
    template.validate()?;
    let inner_seed = mix_seed(base_seed, 1);
    let pinned = meta.search_box.map(|[lo, _]| lo);
    let free: Vec<usize> = (0..4)
        .filter(|&k| meta.search_box[k][0] < meta.search_box[k][1])
        .collect();
    let landscape = ScheduleLandscape {
        template: &template,
        pinned,
        free: free.clone(),
        inner_runs: meta.inner_runs,
        inner_seed,
    };
    if free.is_empty() {
        let schedule = schedule_from(pinned);
        let (fitness, _) = inner_performance(&template, schedule, meta.inner_runs, inner_seed)?;
        return Ok(MetaResult {
            schedule,
            fitness,
            outer_best: vec![fitness],
            inner_seed,
        });
    }
    let outer = EvolutionConfig {
        variant: Variant::GGA,
        population_size: meta.population_size,
        max_generation: meta.generations,
        dimension: free.len(),
        search_bounds: SearchBounds::new(free.iter().map(|&k| meta.search_box[k]).collect())?,
        mutation_sigma: meta.mutation_sigma,
        elitism_count: 1,
        seed: base_seed,
        ..EvolutionConfig::default()
    };
    let mut rng = RandomSource::stream(mix_seed(base_seed, 2), 0);
    let history = evolve(&outer, &landscape, &mut rng)?;
    let best = history
        .records
        .iter()
        .fold(None::<&crate::engine::GenerationRecord>, |acc, r| match acc {
            Some(b) if b.best_fitness >= r.best_fitness => Some(b),
            _ => Some(r),
        })
        .expect("non-empty history");
    Ok(MetaResult {
        schedule: schedule_from(landscape.expand(&best.best_point)),
        fitness: best.best_fitness,
        outer_best: history.records.iter().map(|r| r.best_fitness).collect(),
        inner_seed,
    })
}
