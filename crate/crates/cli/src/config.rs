//! Scenario configuration files: JSON schema, validation, and construction
//! of the model and policies they describe. The format is documented in
//! `scenario.schema` at the repository root.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use indexmap::IndexMap;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use prefsim_core::choice_model::{
    deterministic_greedy_ai, maximally_inclusive_ai, softmax_choice_distribution, tempered_ai,
    GenerativePolicy, PopulationChoiceDistribution, PopulationModel, PromptSpace, ResponseSpace,
};
use prefsim_core::decision::DecisionProblem;
use prefsim_core::matrix::Matrix;
use prefsim_core::rng;

fn default_trials() -> u64 {
    1000
}

fn default_reps() -> u64 {
    1000
}

fn default_delta() -> f64 {
    0.05
}

/// One scenario file. Field defaults: uniform prompts, `trials_T` 1000,
/// `reps` 1000, `seed` 0, `delta` 0.05.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_prompts: usize,
    pub num_responses: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_distribution: Option<Vec<f64>>,
    /// Exactly one of `utility` and `utility_generator` must be present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_generator: Option<UtilityGenerator>,
    /// Replaces the softmax population choice distribution wherever one is
    /// consumed (policy builders, decision values, bounds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_override: Option<Vec<Vec<f64>>>,
    pub policies: PolicyMap,
    #[serde(rename = "trials_T", default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionConfig>,
}

/// Utilities drawn i.i.d. uniform on [low, high] from a dedicated seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityGenerator {
    pub seed: u64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionConfig {
    pub prompt: usize,
    pub values: Vec<Vec<f64>>,
}

/// How one policy is specified: a builder name, a tempered-softmax block,
/// or an explicit row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Named(String),
    Tempered { tempered: TemperedParams },
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperedParams {
    pub temperature: f64,
}

/// Ordered policy map that rejects duplicate names at parse time (plain
/// JSON object parsing would silently keep the last duplicate).
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct PolicyMap(pub IndexMap<String, PolicySpec>);

impl<'de> Deserialize<'de> for PolicyMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct MapVisitor;

        impl<'de> Visitor<'de> for MapVisitor {
            type Value = PolicyMap;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of policy name to policy spec")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<PolicyMap, A::Error> {
                let mut map = IndexMap::new();
                while let Some((name, spec)) = access.next_entry::<String, PolicySpec>()? {
                    if map.insert(name.clone(), spec).is_some() {
                        return Err(serde::de::Error::custom(format!(
                            "duplicate policy name \"{name}\""
                        )));
                    }
                }
                Ok(PolicyMap(map))
            }
        }

        deserializer.deserialize_map(MapVisitor)
    }
}

/// Everything a command needs, built and validated from a config.
#[derive(Debug)]
pub struct BuiltScenario {
    pub model: PopulationModel,
    /// Population choice distribution: the softmax of the utilities, or
    /// the explicit override when one was given.
    pub pcd: PopulationChoiceDistribution,
    pub policies: IndexMap<String, GenerativePolicy>,
    pub problem: Option<DecisionProblem>,
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .with_context(|| format!("config file {} is not a valid scenario", path.display()))?;
    config.validate()?;
    Ok(config)
}

impl ScenarioConfig {
    /// Structural checks that do not need the model built.
    pub fn validate(&self) -> Result<()> {
        if self.num_prompts == 0 {
            bail!("num_prompts must be positive");
        }
        if self.num_responses == 0 {
            bail!("num_responses must be positive");
        }
        match (&self.utility, &self.utility_generator) {
            (Some(_), Some(_)) => {
                bail!("give exactly one of `utility` and `utility_generator`, not both")
            }
            (None, None) => bail!("give exactly one of `utility` and `utility_generator`"),
            _ => {}
        }
        if let Some(g) = &self.utility_generator {
            if !(g.low.is_finite() && g.high.is_finite() && g.low < g.high) {
                bail!("utility_generator requires finite low < high");
            }
        }
        if self.policies.0.is_empty() {
            bail!("at least one policy is required");
        }
        if self.reps < 2 {
            bail!("reps must be at least 2 (got {})", self.reps);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta must lie strictly between 0 and 1 (got {})", self.delta);
        }
        for (name, spec) in &self.policies.0 {
            if let PolicySpec::Named(n) = spec {
                if n != "maximally_inclusive" && n != "deterministic_greedy" {
                    bail!(
                        "policies.{name}: unknown policy name \"{n}\" (expected \
                         \"maximally_inclusive\", \"deterministic_greedy\", a tempered block, \
                         or an explicit matrix)"
                    );
                }
            }
        }
        Ok(())
    }

    /// Builds the model, choice distribution, policies, and optional
    /// decision problem. Every shape and stochasticity violation is
    /// reported with the config field that caused it.
    pub fn build(&self) -> Result<BuiltScenario> {
        let utility = match (&self.utility, &self.utility_generator) {
            (Some(rows), None) => Matrix::from_rows(rows.clone()).context("utility")?,
            (None, Some(g)) => {
                use rand::Rng;
                let mut r = rng::stream(g.seed, 0);
                let data: Vec<f64> = (0..self.num_prompts * self.num_responses)
                    .map(|_| r.gen_range(g.low..=g.high))
                    .collect();
                Matrix::from_flat(self.num_prompts, self.num_responses, data)
                    .context("utility_generator")?
            }
            _ => unreachable!("validate() enforces exactly one utility source"),
        };
        if utility.rows() != self.num_prompts || utility.cols() != self.num_responses {
            bail!(
                "utility: expected {} x {} matrix, got {} x {}",
                self.num_prompts,
                self.num_responses,
                utility.rows(),
                utility.cols()
            );
        }

        let prompts = match &self.prompt_distribution {
            Some(w) => {
                if w.len() != self.num_prompts {
                    bail!(
                        "prompt_distribution: expected {} entries, got {}",
                        self.num_prompts,
                        w.len()
                    );
                }
                PromptSpace::new(w.clone()).context("prompt_distribution")?
            }
            None => PromptSpace::uniform(self.num_prompts).context("prompt_distribution")?,
        };
        let responses = ResponseSpace::new(self.num_responses).context("num_responses")?;
        let model = PopulationModel::new(prompts, responses, utility).context("utility")?;

        let pcd = match &self.population_override {
            Some(rows) => {
                let m = Matrix::from_rows(rows.clone()).context("population_override")?;
                if m.rows() != self.num_prompts || m.cols() != self.num_responses {
                    bail!(
                        "population_override: expected {} x {} matrix, got {} x {}",
                        self.num_prompts,
                        self.num_responses,
                        m.rows(),
                        m.cols()
                    );
                }
                PopulationChoiceDistribution::new(m).context("population_override")?
            }
            None => softmax_choice_distribution(&model),
        };

        let mut policies = IndexMap::new();
        for (name, spec) in &self.policies.0 {
            let policy = build_policy(spec, &model, &pcd)
                .with_context(|| format!("policies.{name}"))?;
            if policy.num_prompts() != self.num_prompts
                || policy.num_responses() != self.num_responses
            {
                bail!(
                    "policies.{name}: expected {} x {} matrix, got {} x {}",
                    self.num_prompts,
                    self.num_responses,
                    policy.num_prompts(),
                    policy.num_responses()
                );
            }
            policies.insert(name.clone(), policy);
        }

        let problem = match &self.decision {
            Some(d) => {
                if d.prompt >= self.num_prompts {
                    bail!(
                        "decision.prompt: index {} out of range for {} prompts",
                        d.prompt,
                        self.num_prompts
                    );
                }
                let values = Matrix::from_rows(d.values.clone()).context("decision.values")?;
                if values.cols() != self.num_responses {
                    bail!(
                        "decision.values: expected {} response columns, got {}",
                        self.num_responses,
                        values.cols()
                    );
                }
                Some(DecisionProblem::new(d.prompt, values).context("decision.values")?)
            }
            None => None,
        };

        Ok(BuiltScenario {
            model,
            pcd,
            policies,
            problem,
        })
    }
}

fn build_policy(
    spec: &PolicySpec,
    model: &PopulationModel,
    pcd: &PopulationChoiceDistribution,
) -> Result<GenerativePolicy> {
    Ok(match spec {
        PolicySpec::Named(name) => match name.as_str() {
            "maximally_inclusive" => maximally_inclusive_ai(pcd),
            "deterministic_greedy" => deterministic_greedy_ai(pcd),
            other => bail!("unknown policy name \"{other}\""),
        },
        PolicySpec::Tempered { tempered } => tempered_ai(model, tempered.temperature)?,
        PolicySpec::Explicit(rows) => GenerativePolicy::new(Matrix::from_rows(rows.clone())?)?,
    })
}
