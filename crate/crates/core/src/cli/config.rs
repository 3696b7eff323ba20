//! The experiment document: one JSON file, one section per module.
//!
//! Loading starts from the built-in defaults, merges the file over them,
//! applies `section.key=value` overrides, and only then deserializes with
//! unknown keys rejected, so a misspelled key fails whether it comes from the
//! file or the command line.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::experiments::MetaConfig;
use crate::model::{
    CrossoverForm, EvolutionConfig, LearnSource, MutationSchedule, SearchBounds, Variant,
};
use crate::objectives::{Objective, ObjectiveRegistry, PerturbationParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreSection {
    pub population_size: usize,
    pub max_generation: usize,
    pub dimension: usize,
    pub search_bounds: Vec<[f64; 2]>,
    pub gender_probability: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub mutation_schedule: MutationSchedule,
    pub mutation_sigma: f64,
    pub crossover_lambda_range: [f64; 2],
    pub crossover_form: CrossoverForm,
    pub elitism_count: usize,
    pub selection_window_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    pub enabled: bool,
    pub learn_source: LearnSource,
    pub fd_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_runs: usize,
    pub chase_radius: f64,
    pub lambda_grid: Vec<f64>,
    pub variants: Vec<Variant>,
    pub meta: MetaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Document {
    pub core: CoreSection,
    pub operators: OperatorSection,
    pub learning: LearningSection,
    pub objective: ObjectiveSection,
    pub engine: EngineSection,
    pub experiment: ExperimentSection,
}

impl Default for Document {
    fn default() -> Self {
        let e = EvolutionConfig::default();
        Self {
            core: CoreSection {
                population_size: e.population_size,
                max_generation: e.max_generation,
                dimension: e.dimension,
                search_bounds: e.search_bounds.intervals().to_vec(),
                gender_probability: e.gender_probability,
                seed: e.seed,
            },
            operators: OperatorSection {
                mutation_schedule: e.mutation_schedule,
                mutation_sigma: e.mutation_sigma,
                crossover_lambda_range: e.crossover_lambda_range,
                crossover_form: e.crossover_form,
                elitism_count: e.elitism_count,
                selection_window_fraction: e.selection_window_fraction,
            },
            learning: LearningSection {
                enabled: e.learning_enabled,
                learn_source: e.learn_source,
                fd_step: e.fd_step,
            },
            objective: ObjectiveSection {
                name: "perturbed_rastrigin".into(),
                params: serde_json::to_value(PerturbationParams::default())
                    .expect("plain struct"),
            },
            engine: EngineSection { variant: e.variant },
            experiment: ExperimentSection {
                n_runs: 500,
                chase_radius: 0.25,
                lambda_grid: (1..=12).map(|i| i as f64 / 10.0).collect(),
                variants: Variant::ALL.to_vec(),
                meta: MetaConfig::default(),
            },
        }
    }
}

impl Default for CoreSection {
    fn default() -> Self {
        Document::default().core
    }
}

impl Default for OperatorSection {
    fn default() -> Self {
        Document::default().operators
    }
}

impl Default for LearningSection {
    fn default() -> Self {
        Document::default().learning
    }
}

impl Default for EngineSection {
    fn default() -> Self {
        Document::default().engine
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Document::default().experiment
    }
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Document::default().objective
    }
}

impl Document {
    pub fn evolution_config(&self) -> Result<EvolutionConfig> {
        let cfg = EvolutionConfig {
            variant: self.engine.variant,
            population_size: self.core.population_size,
            max_generation: self.core.max_generation,
            dimension: self.core.dimension,
            search_bounds: SearchBounds::new(self.core.search_bounds.clone())?,
            gender_probability: self.core.gender_probability,
            mutation_schedule: self.operators.mutation_schedule,
            mutation_sigma: self.operators.mutation_sigma,
            crossover_lambda_range: self.operators.crossover_lambda_range,
            crossover_form: self.operators.crossover_form,
            elitism_count: self.operators.elitism_count,
            selection_window_fraction: self.operators.selection_window_fraction,
            learning_enabled: self.learning.enabled,
            learn_source: self.learning.learn_source,
            fd_step: self.learning.fd_step,
            seed: self.core.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn objective(&self, registry: &ObjectiveRegistry) -> Result<Arc<dyn Objective>> {
        registry.build(&self.objective.name, &self.objective.params)
    }

    /// The perturbation parameters, for experiments that need the two-peak landscape.
    pub fn perturbation(&self) -> Result<PerturbationParams> {
        if self.objective.name != "perturbed_rastrigin" {
            return Err(Error::Schema(format!(
                "this command needs objective `perturbed_rastrigin`, found `{}`",
                self.objective.name
            )));
        }
        let p: PerturbationParams = serde_json::from_value(self.objective.params.clone())
            .map_err(|e| Error::Schema(format!("objective.params: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// Checks every section that does not need a registry.
    pub fn validate(&self) -> Result<()> {
        self.evolution_config()?;
        let x = &self.experiment;
        if x.n_runs == 0 {
            return Err(Error::Config("experiment.n_runs must be at least 1".into()));
        }
        if !(x.chase_radius > 0.0) {
            return Err(Error::Config("experiment.chase_radius must be positive".into()));
        }
        x.meta.validate()
    }

    /// Defaults, merged with `file` (if any), then `overrides`.
    pub fn resolve(file: Option<Value>, overrides: &[String]) -> Result<Self> {
        let mut tree = serde_json::to_value(Document::default()).expect("plain struct");
        if let Some(file) = file {
            let Value::Object(file) = file else {
                return Err(Error::Schema("configuration root must be an object".into()));
            };
            merge_document(&mut tree, file);
        }
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let doc: Document =
            serde_json::from_value(tree).map_err(|e| Error::Schema(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Some(serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: p.to_owned(),
                    source: e,
                })?)
            }
            None => None,
        };
        Self::resolve(file, overrides)
    }
}

/// Deep merge, except that a file-provided `objective` section replaces the
/// default wholesale (its parameters depend on its name).
fn merge_document(base: &mut Value, file: Map<String, Value>) {
    let Value::Object(base) = base else {
        unreachable!("defaults serialize to an object")
    };
    for (k, v) in file {
        match base.get_mut(&k) {
            Some(slot) if k != "objective" => merge(slot, v),
            _ => {
                base.insert(k, v);
            }
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; `value` is read as JSON, falling back to a bare string.
pub fn apply_override(tree: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Schema(format!("override `{spec}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Schema(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = tree;
    for key in &keys[..keys.len() - 1] {
        let Value::Object(map) = node else {
            return Err(Error::Schema(format!("override `{spec}`: `{key}` is not a section")));
        };
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    let Value::Object(map) = node else {
        return Err(Error::Schema(format!("override `{spec}` does not address a key")));
    };
    map.insert(keys[keys.len() - 1].to_owned(), value);
    Ok(())
}
