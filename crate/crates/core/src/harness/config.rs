//! JSON experiment configuration and its resolution into live objects.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conditions::BGammaMu;
use crate::error::{Error, Result};
use crate::iterate::IterationConfig;
use crate::mappings::{MapSpec, Mapping, MappingFamily};
use crate::schedules::AlphaSchedule;
use crate::vecspace::{Domain, SampleMode, SamplePlan, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingDescriptor {
    pub builtin: MapSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_points: Vec<Vector>,
    /// Register as `T: C → X` without the self-map check.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ambient: bool,
    /// Must equal the top-level domain when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

/// One requested check, applied to every configured mapping. Parameters left
/// out fall back to the top-level `condition`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Nonexpansive,
    QuasiNonexpansive,
    ConditionC,
    ConditionCLambda {
        lambda: f64,
    },
    ConditionB {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
    },
    FixedPointDistance {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
    },
    Prop1 {
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
    },
    /// Pairwise commutativity over all configured mappings.
    Commuting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Krasnoselskii,
    MultiMap,
    TruncatedFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub engine: Engine,
    pub x0: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Every γ with every μ.
    #[default]
    Cartesian,
    /// `(γ_i, μ_i)` position by position.
    Zip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub gammas: Vec<f64>,
    pub mus: Vec<f64>,
    #[serde(default)]
    pub pairing: Pairing,
    /// Label of the swept mapping; the first mapping when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<String>,
}

impl SweepSpec {
    pub fn cells(&self) -> Result<Vec<(f64, f64)>> {
        match self.pairing {
            Pairing::Cartesian => Ok(crate::conditions::cartesian_cells(&self.gammas, &self.mus)),
            Pairing::Zip => {
                if self.gammas.len() != self.mus.len() {
                    return Err(Error::Config(format!(
                        "sweep: zip pairing needs equal lengths, got {} gammas and {} mus",
                        self.gammas.len(),
                        self.mus.len()
                    )));
                }
                Ok(self.gammas.iter().copied().zip(self.mus.iter().copied()).collect())
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for reports; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// File stem for all outputs; the config's `name` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mappings: Vec<MappingDescriptor>,
    /// Labels in family order; configuration order when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_order: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<AlphaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<BGammaMu>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<SamplePlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<IterationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("field `{path}`: {}", e.into_inner()))
        })
    }

    /// Reads a config file; the name defaults to the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(cfg)
    }

    /// Replaces the seed of a random plan.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(SamplePlan { mode: SampleMode::Random { seed: s, .. }, .. }) = self.plan.as_mut() {
            *s = seed;
        }
    }

    pub fn plan_or_default(&self) -> SamplePlan {
        self.plan.clone().unwrap_or_else(|| match &self.domain {
            Some(d) => d.registration_plan(),
            None => SamplePlan::grid(2),
        })
    }

    pub fn stem(&self) -> String {
        match (&self.output.stem, self.name.is_empty()) {
            (Some(s), _) => s.clone(),
            (None, false) => self.name.clone(),
            (None, true) => "experiment".into(),
        }
    }

    /// `condition` with per-check overrides applied.
    pub fn gamma_mu(&self, gamma: Option<f64>, mu: Option<f64>) -> Result<BGammaMu> {
        let base = self.condition.unwrap_or_else(BGammaMu::zero);
        BGammaMu::new(gamma.unwrap_or(base.gamma()), mu.unwrap_or(base.mu()))
            .map_err(|e| Error::Config(format!("condition: {e}")))
    }
}

/// A config whose references all resolve.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub mappings: Vec<Mapping>,
    /// Indices into `mappings`, in family order.
    pub order: Vec<usize>,
}

impl Resolved {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let cfg_err = |field: String, e: Error| Error::Config(format!("{field}: {e}"));
        if let Some(d) = &config.domain {
            d.validate().map_err(|e| cfg_err("domain".into(), e))?;
        }
        if let Some(p) = &config.plan {
            p.validate().map_err(|e| cfg_err("plan".into(), e))?;
        }
        if let Some(s) = &config.schedule {
            s.validate().map_err(|e| cfg_err("schedule".into(), e))?;
        }
        if let Some(it) = &config.iteration {
            it.validate_with(config.condition.as_ref()).map_err(|e| cfg_err("iteration".into(), e))?;
        }

        let mut mappings = Vec::new();
        if !config.mappings.is_empty() {
            let domain = config
                .domain
                .as_ref()
                .ok_or_else(|| Error::Config("field `domain`: required when mappings are given".into()))?;
            let mut seen = HashSet::new();
            for (i, desc) in config.mappings.iter().enumerate() {
                let field = format!("mappings[{i}]");
                if desc.domain.as_ref().is_some_and(|d| d != domain) {
                    return Err(Error::Config(format!("{field}.domain: differs from the declared domain")));
                }
                let m = desc
                    .builtin
                    .build(domain, desc.label.clone(), desc.fixed_points.clone(), desc.ambient)
                    .map_err(|e| cfg_err(field.clone(), e))?;
                if !seen.insert(m.label().to_string()) {
                    return Err(Error::Config(format!("{field}: duplicate label `{}`", m.label())));
                }
                mappings.push(m);
            }
        }

        let order = match &config.family_order {
            None => (0..mappings.len()).collect(),
            Some(labels) => labels
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    mappings.iter().position(|m| m.label() == l).ok_or_else(|| {
                        Error::Config(format!("family_order[{i}]: no mapping labelled `{l}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };

        if let Some(sweep) = &config.sweep {
            sweep.cells()?;
            if let Some(l) = &sweep.mapping {
                if !mappings.iter().any(|m| m.label() == l) {
                    return Err(Error::Config(format!("sweep.mapping: no mapping labelled `{l}`")));
                }
            }
        }
        Ok(Resolved { config, mappings, order })
    }

    pub fn family(&self) -> Result<MappingFamily> {
        let members = self.order.iter().map(|&i| self.mappings[i].clone()).collect();
        MappingFamily::new(members).map_err(|e| Error::Config(format!("family_order: {e}")))
    }

    pub fn mapping(&self, label: Option<&str>) -> Result<&Mapping> {
        match label {
            Some(l) => self.mappings.iter().find(|m| m.label() == l),
            None => self.mappings.first(),
        }
        .ok_or_else(|| Error::Config("field `mappings`: no mapping configured".into()))
    }
}
