//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`), e.g.
//! `cargo test --release --test acceptance`.

mod support;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bgga::engine::{evolve, evolve_observed, Observer};
use bgga::experiments::{
    bifurcation_sweep, compare_variants, inner_performance, meta_optimize, one_sided_z,
    BifurcationReport, ChaseCenters, ChaseLabel, MetaConfig,
};
use bgga::learning::{fd_gradient, fd_hessian, newton_step, DerivativeBundle};
use bgga::model::{
    assign_genders, init_population, CrossoverForm, EvolutionConfig, Gender, Individual,
    MutationSchedule, Variant,
};
use bgga::objectives::{
    dynamic_objective, perturbation, perturbation_grad, perturbation_hess, rastrigin,
    static_rastrigin, Clock, ConcaveQuadratic, Descriptor, Objective, PerturbationParams,
};
use bgga::operators::{
    crossover, crossover_with, male_selection_weights, mutation_rates, select_male,
};
use bgga::random::RandomSource;
use nalgebra::DMatrix;
use support::ddouble;

const SEED: u64 = 20_240_515;
const RUNS: usize = 500;
/// Upper 1% point of the χ² distribution with 2 degrees of freedom.
const CHI2_2DF_99: f64 = 9.210340371976184;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(limit: Duration, start: Instant, detail: String) -> Outcome {
    let took = start.elapsed();
    ensure(took < limit, format!("{detail}; {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()))
}

fn ac1_newton() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomSource::new(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let b = DMatrix::from_fn(2, 2, |_, _| rng.uniform_in(-2.0, 2.0));
        let a = b.transpose() * &b + DMatrix::identity(2, 2) * 0.1;
        let center = vec![rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
        let rows = (0..2).map(|i| (0..2).map(|j| a[(i, j)]).collect()).collect();
        let q = ConcaveQuadratic::new(center.clone(), rows, 0.0).map_err(|e| e.to_string())?;
        let x = [rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
        let clock = Clock::new(0, 1);
        let d = DerivativeBundle {
            gradient: q.gradient(&x, clock).unwrap(),
            hessian: q.hessian(&x, clock).unwrap(),
        };
        let step = newton_step(&x, &d).map_err(|e| e.to_string())?;
        let err = ((step.point[0] - center[0]).powi(2) + (step.point[1] - center[1]).powi(2)).sqrt();
        worst = worst.max(if step.stepped { err } else { f64::INFINITY });
    }
    ensure(worst < 1e-9, format!("max distance to optimum {worst:.2e}"))
        .and_then(|d| within_time(Duration::from_secs(1), start, d))
}

fn ac2_rastrigin() -> Outcome {
    let start = Instant::now();
    if rastrigin(&[0.0, 0.0]) != 0.0 {
        return Err(format!("f(0,0) = {:e}", rastrigin(&[0.0, 0.0])));
    }
    let mut rng = RandomSource::new(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = [rng.uniform_in(-5.12, 5.12), rng.uniform_in(-5.12, 5.12)];
        let exact = ddouble::rastrigin(&p).to_f64();
        worst = worst.max((rastrigin(&p) - exact).abs() / exact.abs().max(1.0));
    }
    let n = 1001;
    let step = 10.24 / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for i in 0..n {
        for j in 0..n {
            let v = rastrigin(&[-5.12 + i as f64 * step, -5.12 + j as f64 * step]);
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    let at_origin = best.1 == 500 && best.2 == 500;
    ensure(
        worst < 1e-12 && at_origin,
        format!(
            "max relative error {worst:.2e}; grid argmax at index ({}, {})",
            best.1, best.2
        ),
    )
    .and_then(|d| within_time(Duration::from_secs(10), start, d))
}

struct Bump(PerturbationParams);

impl Objective for Bump {
    fn dimension(&self) -> usize {
        2
    }
    fn evaluate(&self, x: &[f64], clock: Clock) -> f64 {
        perturbation(x, clock, &self.0)
    }
    fn gradient(&self, x: &[f64], clock: Clock) -> Option<Vec<f64>> {
        Some(perturbation_grad(x, clock, &self.0))
    }
    fn hessian(&self, x: &[f64], clock: Clock) -> Option<DMatrix<f64>> {
        Some(perturbation_hess(x, clock, &self.0))
    }
    fn descriptor(&self) -> Descriptor {
        Descriptor {
            name: "bump".into(),
            params: serde_json::Value::Null,
        }
    }
}

fn ac3_derivatives() -> Outcome {
    let start = Instant::now();
    let params = PerturbationParams::default();
    let composite = dynamic_objective(params.clone()).map_err(|e| e.to_string())?;
    let bump = Bump(params);
    let rast = static_rastrigin();
    let cases: [(&str, &dyn Objective); 3] =
        [("rastrigin", &rast), ("perturbation", &bump), ("composite", &composite)];
    let mut rng = RandomSource::new(SEED);
    let (mut g_worst, mut h_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        // Half the points near the bump, where its derivatives are not negligible.
        let p = if rng.uniform() < 0.5 {
            [rng.uniform_in(-5.12, 5.12), rng.uniform_in(-5.12, 5.12)]
        } else {
            [rng.uniform_in(-0.5, 0.5), rng.uniform_in(0.5, 1.5)]
        };
        let clock = Clock::new(rng.index(16), 15);
        for (_, f) in cases {
            let g = f.gradient(&p, clock).unwrap();
            let h = f.hessian(&p, clock).unwrap();
            let gn = fd_gradient(f, &p, clock, 1e-5).map_err(|e| e.to_string())?;
            let hn = fd_hessian(f, &p, clock, 1e-4).map_err(|e| e.to_string())?;
            for k in 0..2 {
                g_worst = g_worst.max((g[k] - gn[k]).abs() / g[k].abs().max(1.0));
                for l in 0..2 {
                    h_worst = h_worst.max((h[(k, l)] - hn[(k, l)]).abs() / h[(k, l)].abs().max(1.0));
                }
            }
        }
    }
    ensure(
        g_worst < 1e-5 && h_worst < 1e-3,
        format!("gradient {g_worst:.1e}, hessian {h_worst:.1e}"),
    )
    .and_then(|d| within_time(Duration::from_secs(1), start, d))
}

fn ac4_schedule() -> Outcome {
    let s = MutationSchedule::REFERENCE;
    let t_max = 15;
    let mut worst: f64 = 0.0;
    let mut prev = (f64::INFINITY, f64::INFINITY);
    let mut decreasing = true;
    for t in 0..=t_max {
        let r = mutation_rates(t, t_max, &s);
        let tau = t as f64 / t_max as f64;
        worst = worst
            .max((r.p_f - 0.37 * (-4.55 * tau).exp()).abs())
            .max((r.p_m - 0.36 * (-3.57 * tau).exp()).abs());
        decreasing &= r.p_f < prev.0 && r.p_m < prev.1;
        prev = (r.p_f, r.p_m);
    }
    ensure(
        worst < 1e-12 && decreasing,
        format!("max deviation {worst:.1e}, strictly decreasing: {decreasing}"),
    )
}

fn ac5_operators() -> Outcome {
    let mut rng = RandomSource::new(SEED);
    let cfg = EvolutionConfig {
        population_size: 10_000,
        ..EvolutionConfig::default()
    };
    let mut pop = init_population(&cfg, &mut rng).map_err(|e| e.to_string())?;
    assign_genders(&mut pop, 0.5, &mut rng);
    let male = pop.count(Gender::Male) as f64 / 1e4;

    let w = male_selection_weights(&[1.0, 1.0, 2.0], 0.0).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 3];
    let draws = 100_000;
    for _ in 0..draws {
        counts[select_male(&w, &mut rng)] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(w.probabilities())
        .map(|(&c, &p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();

    let mut exact = true;
    let mut recovered = true;
    let bounds = cfg.search_bounds.clone();
    for _ in 0..1000 {
        let x: Vec<f64> = (0..2).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let l: Vec<f64> = (0..2).map(|_| rng.uniform()).collect();
        let z = crossover_with(&x, &y, &l, CrossoverForm::Extrapolate).map_err(|e| e.to_string())?;
        let c = crossover_with(&x, &y, &l, CrossoverForm::Convex).map_err(|e| e.to_string())?;
        for k in 0..2 {
            exact &= z[k] == x[k] + l[k] * (x[k] - y[k]);
            exact &= c[k] == x[k] - l[k] * (x[k] - y[k]);
        }
        let xv = bgga::model::RealVector::new(x.clone()).unwrap();
        let yv = bgga::model::RealVector::new(y.clone()).unwrap();
        let child = crossover(&xv, &yv, [0.0, 1.0], CrossoverForm::Convex, &bounds, &mut rng)
            .map_err(|e| e.to_string())?;
        for k in 0..2 {
            let lam = (x[k] - child[k]) / (x[k] - y[k]);
            recovered &= (-1e-9..=1.0 + 1e-9).contains(&lam);
        }
    }
    ensure(
        (male - 0.5).abs() <= 0.015 && chi2 < CHI2_2DF_99 && exact && recovered,
        format!(
            "male fraction {male:.4}; roulette chi2 {chi2:.3} (< {CHI2_2DF_99:.4}); collinearity exact: {exact}, coefficients in range: {recovered}"
        ),
    )
}

fn ac6_reduction() -> Outcome {
    let f = static_rastrigin();
    for seed in [SEED, 1, 2, 3, 4] {
        let run = |variant, learning_enabled| {
            let cfg = EvolutionConfig {
                variant,
                learning_enabled,
                ..EvolutionConfig::default()
            };
            evolve(&cfg, &f, &mut RandomSource::new(seed)).map_err(|e| e.to_string())
        };
        let a = run(Variant::BGGA, false)?;
        let b = run(Variant::GGA, true)?;
        let same = a.records.len() == 16
            && a.records.iter().zip(&b.records).all(|(x, y)| {
                x.best_fitness.to_bits() == y.best_fitness.to_bits()
                    && x.mean_fitness.to_bits() == y.mean_fitness.to_bits()
                    && x.best_point == y.best_point
            })
            && a.final_population == b.final_population;
        if !same {
            return Err(format!("histories differ for seed {seed}"));
        }
    }
    Ok("5 seeds, 16 generations each, bit-identical".into())
}

#[derive(Default)]
struct Audit {
    stepped: usize,
    violations: usize,
}

struct Watch {
    lamarck: bool,
    audit: Audit,
}

impl Observer for Watch {
    fn after_learning(&mut self, _t: usize, members: &[Individual]) {
        for m in members {
            let Some(p) = &m.learned_phenotype else {
                self.audit.violations += 1;
                continue;
            };
            self.audit.stepped += m.learned_step as usize;
            let equal = &m.genotype == p;
            if self.lamarck && !equal || !self.lamarck && m.learned_step && equal {
                self.audit.violations += 1;
            }
        }
    }
}

fn ac7_baldwin_lamarck() -> Outcome {
    let f = dynamic_objective(PerturbationParams::default()).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for (variant, lamarck) in [(Variant::BGGA, false), (Variant::LGGA, true)] {
        let cfg = EvolutionConfig {
            variant,
            ..EvolutionConfig::default()
        };
        let mut w = Watch {
            lamarck,
            audit: Audit::default(),
        };
        evolve_observed(&cfg, &f, &mut RandomSource::new(SEED), &mut w).map_err(|e| e.to_string())?;
        let line = format!(
            "{}: {} steps, {} violations",
            variant.name(),
            w.audit.stepped,
            w.audit.violations
        );
        if w.audit.violations > 0 || w.audit.stepped == 0 {
            return Err(line);
        }
        lines.push(line);
    }
    Ok(lines.join("; "))
}

fn ac8_static_ordering() -> Outcome {
    let start = Instant::now();
    let cmp = compare_variants(
        &static_rastrigin(),
        &[Variant::GA, Variant::BGGA, Variant::LGGA],
        &EvolutionConfig::default(),
        RUNS,
        SEED,
    )
    .map_err(|e| e.to_string())?;
    let row = |v| cmp.row(v).unwrap();
    let (ga, bgga, lgga) = (row(Variant::GA), row(Variant::BGGA), row(Variant::LGGA));
    let z = one_sided_z(
        bgga.mean_final_best_fitness,
        bgga.stderr_final_best_fitness,
        ga.mean_final_best_fitness,
        ga.stderr_final_best_fitness,
    );
    let bl = one_sided_z(
        bgga.mean_final_best_fitness,
        bgga.stderr_final_best_fitness,
        lgga.mean_final_best_fitness,
        lgga.stderr_final_best_fitness,
    );
    ensure(
        z.significant_99,
        format!(
            "GA {:.4}±{:.4}, BGGA {:.4}±{:.4}, z = {:.2}, p = {:.1e}; recorded BGGA-LGGA: LGGA {:.4}±{:.4}, z = {:.2}",
            ga.mean_final_best_fitness,
            ga.stderr_final_best_fitness,
            bgga.mean_final_best_fitness,
            bgga.stderr_final_best_fitness,
            z.z,
            z.p_value,
            lgga.mean_final_best_fitness,
            lgga.stderr_final_best_fitness,
            bl.z,
        ),
    )
    .and_then(|d| within_time(Duration::from_secs(120), start, d))
}

fn majority(report: &BifurcationReport, idx: usize, radius: f64, params: &PerturbationParams) -> ChaseLabel {
    let labels = report.ensembles[idx].final_labels(&ChaseCenters::for_params(params), radius);
    let count = |l| labels.iter().filter(|&&x| x == l).count();
    [ChaseLabel::PerturbationPeak, ChaseLabel::RastriginPeak, ChaseLabel::Neither]
        .into_iter()
        .max_by_key(|&l| count(l))
        .unwrap()
}

fn ac9_bifurcation() -> Outcome {
    let start = Instant::now();
    let params = PerturbationParams::default();
    let grid: Vec<f64> = (1..=12).map(|i| i as f64 / 10.0).collect();
    let radius = 0.25;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut star = Vec::new();
    for variant in [Variant::BGGA, Variant::LGGA] {
        let cfg = EvolutionConfig {
            variant,
            ..EvolutionConfig::default()
        };
        let r = bifurcation_sweep(&cfg, &params, &grid, RUNS, SEED, radius).map_err(|e| e.to_string())?;
        let low = majority(&r, 0, radius, &params);
        let high = majority(&r, grid.len() - 1, radius, &params);
        let a = low == ChaseLabel::PerturbationPeak && high == ChaseLabel::RastriginPeak;
        let b = r.is_monotone_within(2.0);
        ok &= a && b && r.bifurcation_lambda.is_some();
        star.push(r.bifurcation_lambda);
        let fractions: Vec<String> = r.switch_fraction.iter().map(|f| format!("{f:.3}")).collect();
        lines.push(format!(
            "{}: majority {low:?}@0.1 {high:?}@1.2, monotone {b}, lambda* {:?}, fractions [{}]",
            variant.name(),
            r.bifurcation_lambda,
            fractions.join(" ")
        ));
    }
    let c = matches!((star[0], star[1]), (Some(b), Some(l)) if b <= l);
    ok &= c;
    lines.push(format!("lambda*(BGGA) <= lambda*(LGGA): {c}"));
    ensure(ok, lines.join("; ")).and_then(|d| within_time(Duration::from_secs(900), start, d))
}

fn ac10_meta() -> Outcome {
    let meta = MetaConfig::default();
    let template = EvolutionConfig {
        variant: meta.inner_variant,
        ..EvolutionConfig::default()
    };
    let result = meta_optimize(&template, &meta, SEED).map_err(|e| e.to_string())?;
    let s = result.schedule;
    let inside = [s.p_f0, s.p_m0, s.a_f, s.a_m]
        .iter()
        .zip(&meta.search_box)
        .all(|(v, [lo, hi])| (lo..=hi).contains(&v));
    // Both schedules scored on the same fresh seeds, same per-run budget.
    let fresh = SEED ^ 0x5eed;
    let (m_tuned, se_tuned) =
        inner_performance(&template, s, meta.inner_runs, fresh).map_err(|e| e.to_string())?;
    let (m_ref, se_ref) = inner_performance(&template, MutationSchedule::REFERENCE, meta.inner_runs, fresh)
        .map_err(|e| e.to_string())?;
    let margin = 2.0 * (se_tuned * se_tuned + se_ref * se_ref).sqrt();
    ensure(
        inside && m_tuned >= m_ref - margin,
        format!(
            "tuned ({:.3}, {:.3}, {:.3}, {:.3}) inside box: {inside}; tuned {m_tuned:.4}±{se_tuned:.4} vs reference {m_ref:.4}±{se_ref:.4} (margin {margin:.4})",
            s.p_f0, s.p_m0, s.a_f, s.a_m
        ),
    )
}

fn ac11_cli() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": {"n_runs": 100}}"#).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, jobs) in ["1", "1", "8"].iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_bgga"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--seed", "42", "--jobs", jobs])
            .arg("--out-dir")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let read = |n: &str| std::fs::read(out.join(n)).map_err(|e| e.to_string());
        outputs.push((read("history.csv")?, read("summary.json")?));
    }
    let repeat = outputs[0] == outputs[1];
    let jobs = outputs[0] == outputs[2];
    ensure(
        repeat && jobs,
        format!("identical across invocations: {repeat}, across --jobs 1/8: {jobs}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Newton exactness", ac1_newton),
        ("Rastrigin correctness", ac2_rastrigin),
        ("Derivative consistency", ac3_derivatives),
        ("Schedule law", ac4_schedule),
        ("Operator statistics", ac5_operators),
        ("Variant reduction", ac6_reduction),
        ("Baldwin immutability / Lamarck write-back", ac7_baldwin_lamarck),
        ("Static superiority ordering", ac8_static_ordering),
        ("Dynamic tracking and bifurcation", ac9_bifurcation),
        ("Meta-optimization sanity", ac10_meta),
        ("End-to-end determinism", ac11_cli),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("[PASS] AC-{} {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("[FAIL] AC-{} {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
