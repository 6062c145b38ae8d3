//! Scenario configuration: schema gate, typed parse and conversion into
//! engine objects.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use qmetro::catalog;
use qmetro::dqs::{ProbeSpec, Reference};
use qmetro::model::ParametricModel;
use qmetro::{Density, Hermitian, Povm64, Weight};

use crate::error::CliError;

pub const SCENARIO_SCHEMA: &str = include_str!("../schemas/scenario.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Bounds,
    Holevo,
    Dqs,
    Simulate,
    Bayes,
}

/// `[re, im]`.
pub type ComplexPair = [f64; 2];
pub type ComplexMatrix = Vec<Vec<ComplexPair>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Pure(Vec<ComplexPair>),
    Density(ComplexMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitarySpec {
    pub state: StateSpec,
    pub generators: Vec<ComplexMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Catalog(String),
    Unitary(UnitarySpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PovmSpec {
    Catalog(String),
    Elements(Vec<ComplexMatrix>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<PovmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// Bayes only: steps at which the posterior is written to CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// Schema check followed by the typed parse; both failures are validation errors.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("config is not JSON: {e}")))?;
    validate_against(SCENARIO_SCHEMA, &value)?;
    let cfg: ScenarioConfig =
        serde_json::from_value(value).map_err(|e| CliError::validation(format!("config: {e}")))?;
    cfg.check()?;
    Ok(cfg)
}

pub fn validate_against(schema: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let schema: serde_json::Value = serde_json::from_str(schema).expect("shipped schema is JSON");
    let validator = jsonschema::validator_for(&schema).expect("shipped schema compiles");
    let problems: Vec<String> = validator
        .iter_errors(value)
        .map(|e| format!("{}: {}", e.instance_path(), e))
        .collect();
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "schema violation: {}",
            problems.join("; ")
        )))
    }
}

fn complex(p: &ComplexPair) -> Complex<f64> {
    Complex::new(p[0], p[1])
}

pub fn complex_matrix(rows: &ComplexMatrix) -> Result<DMatrix<Complex<f64>>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::validation("complex matrices must be square and non-empty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| complex(&rows[i][j])))
}

impl ScenarioConfig {
    fn need<T>(&self, v: &Option<T>, name: &str) -> Result<(), CliError> {
        if v.is_none() {
            return Err(CliError::validation(format!(
                "'{name}' is required for {:?} scenarios",
                self.kind
            )));
        }
        Ok(())
    }

    /// Cross-field requirements the schema leaves to the program.
    fn check(&self) -> Result<(), CliError> {
        match self.kind {
            Kind::Bounds => {
                if self.model.is_some() == self.probe.is_some() {
                    return Err(CliError::validation(
                        "bounds scenarios take exactly one of 'model' or 'probe'",
                    ));
                }
                if self.model.is_some() {
                    self.need(&self.theta, "theta")?;
                } else if self.povm.is_some() {
                    return Err(CliError::validation("a POVM cannot be combined with a probe"));
                }
            }
            Kind::Holevo => {
                self.need(&self.model, "model")?;
                self.need(&self.theta, "theta")?;
            }
            Kind::Dqs => self.need(&self.probe, "probe")?,
            Kind::Simulate | Kind::Bayes => {
                self.need(&self.model, "model")?;
                self.need(&self.povm, "povm")?;
                self.need(&self.theta, "theta")?;
                self.need(&self.m, "m")?;
                self.need(&self.domain, "domain")?;
                if self.kind == Kind::Simulate {
                    self.need(&self.trials, "trials")?;
                }
            }
        }
        if self.snapshots.is_some() && self.kind != Kind::Bayes {
            return Err(CliError::validation("'snapshots' applies to bayes scenarios only"));
        }
        Ok(())
    }

    pub fn repetitions(&self) -> usize {
        self.m.unwrap_or(1)
    }

    pub fn build_model(&self) -> Result<ParametricModel<f64>, CliError> {
        let spec = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::validation("'model' is missing"))?;
        match spec {
            ModelSpec::Catalog(name) => catalog::named_model(name).map_err(CliError::from_engine),
            ModelSpec::Unitary(u) => {
                let rho = match &u.state {
                    StateSpec::Pure(psi) => {
                        let v = DVector::from_iterator(psi.len(), psi.iter().map(complex));
                        Density::from_pure(&v)
                    }
                    StateSpec::Density(rows) => Density::new(complex_matrix(rows)?),
                }
                .map_err(CliError::from_engine)?;
                let gens = u
                    .generators
                    .iter()
                    .map(|g| complex_matrix(g).and_then(|m| Hermitian::new(m).map_err(CliError::from_engine)))
                    .collect::<Result<Vec<_>, _>>()?;
                ParametricModel::unitary(rho, gens).map_err(CliError::from_engine)
            }
        }
    }

    pub fn build_povm(&self, dim: usize) -> Result<Option<Povm64>, CliError> {
        let Some(spec) = &self.povm else {
            return Ok(None);
        };
        let povm = match spec {
            PovmSpec::Catalog(name) => catalog::named_povm(name, dim),
            PovmSpec::Elements(els) => {
                let ops = els
                    .iter()
                    .map(|e| complex_matrix(e).and_then(|m| Hermitian::new(m).map_err(CliError::from_engine)))
                    .collect::<Result<Vec<_>, _>>()?;
                Povm64::new(ops)
            }
        }
        .map_err(CliError::from_engine)?;
        Ok(Some(povm))
    }

    /// The configured weight, or the identity.
    pub fn build_weight(&self, d: usize) -> Result<Weight, CliError> {
        match &self.weight {
            None => Ok(Weight::identity(d)),
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(CliError::validation(format!("weight must be {d}×{d}")));
                }
                Weight::new(DMatrix::from_fn(d, d, |i, j| rows[i][j])).map_err(CliError::from_engine)
            }
        }
    }

    /// Configured directions, defaulting to `ν_ave` on local networks.
    pub fn directions(&self, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
        let dirs = match (&self.nu, &self.probe) {
            (Some(n), _) => n.clone(),
            (None, Some(p)) if p.network.reference == Reference::Local => vec![vec![1.0 / d as f64; d]],
            _ => Vec::new(),
        };
        if let Some(bad) = dirs.iter().find(|v| v.len() != d) {
            return Err(CliError::validation(format!(
                "direction {bad:?} has {} entries, expected {d}",
                bad.len()
            )));
        }
        Ok(dirs)
    }

    pub fn domain_box(&self) -> Vec<(f64, f64)> {
        self.domain
            .as_ref()
            .map(|d| d.iter().map(|[a, b]| (*a, *b)).collect())
            .unwrap_or_default()
    }
}
