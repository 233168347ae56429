use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::noise::{NoiseFamily, NoiseSpec};
use crate::drcc::{ConstraintKind, DrccError, TwoSidedConstraint};
use crate::linalg::{CostSpec, LinalgError, SystemModel};
use crate::ocp::{OcpDesign, OcpError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot write scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Drcc(#[from] DrccError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
}

/// On-disk layout. Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub model: ModelSection,
    pub noise: NoiseSection,
    pub cost: CostSection,
    #[serde(default)]
    pub constraints: Vec<ConstraintSection>,
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Overrides::is_empty")]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    /// Noise channel; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub family: NoiseFamily,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub kind: ConstraintKind,
    pub direction: Vec<f64>,
    pub bound: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub steps: usize,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    /// Reference terminal weight. Only compared against the computed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Vec<f64>>>,
}

impl Overrides {
    fn is_empty(&self) -> bool {
        self.k.is_none() && self.s.is_none()
    }
}

pub(crate) fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ScenarioError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(ScenarioError::Shape(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(ScenarioError::Shape(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: SystemModel,
    pub cost: CostSpec,
    pub constraints: Vec<TwoSidedConstraint>,
    pub noise: NoiseSpec,
    pub steps: usize,
    pub x0: DVector<f64>,
    pub k_override: Option<DMatrix<f64>>,
    pub s_reference: Option<DMatrix<f64>>,
}

impl Scenario {
    pub fn from_file_data(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.schema != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(file.schema));
        }
        let a = to_matrix(&file.model.a, "model.a")?;
        let b = to_matrix(&file.model.b, "model.b")?;
        let wd = to_matrix(&file.noise.covariance, "noise.covariance")?;
        let e = match &file.model.e {
            Some(e) => to_matrix(e, "model.e")?,
            None => DMatrix::identity(a.nrows(), wd.nrows()),
        };
        let model = SystemModel::new(a, b, e, wd.clone())?;
        let noise = NoiseSpec::new(file.noise.family, wd).map_err(|e| ScenarioError::Shape(e.to_string()))?;
        let cost = CostSpec::new(
            to_matrix(&file.cost.q, "cost.q")?,
            to_matrix(&file.cost.r, "cost.r")?,
            file.cost.horizon,
        )?;
        let mut constraints = Vec::with_capacity(file.constraints.len());
        for (i, c) in file.constraints.iter().enumerate() {
            let con = TwoSidedConstraint::new(
                DVector::from_vec(c.direction.clone()),
                c.bound,
                c.epsilon,
                c.kind,
            )?;
            let want = con.expected_dim(model.nx(), model.nu());
            if c.direction.len() != want {
                return Err(ScenarioError::Shape(format!(
                    "constraint {i}: {:?} direction has length {}, expected {want}",
                    c.kind,
                    c.direction.len()
                )));
            }
            constraints.push(con);
        }
        if file.simulation.x0.len() != model.nx() {
            return Err(ScenarioError::Shape(format!(
                "simulation.x0 has length {}, expected {}",
                file.simulation.x0.len(),
                model.nx()
            )));
        }
        let k_override = file
            .overrides
            .k
            .as_deref()
            .map(|k| to_matrix(k, "overrides.k"))
            .transpose()?;
        let s_reference = file
            .overrides
            .s
            .as_deref()
            .map(|s| to_matrix(s, "overrides.s"))
            .transpose()?;
        Ok(Self {
            name: file.name,
            model,
            cost,
            constraints,
            noise,
            steps: file.simulation.steps,
            x0: DVector::from_vec(file.simulation.x0),
            k_override,
            s_reference,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        Self::from_file_data(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_data(&self) -> ScenarioFile {
        ScenarioFile {
            schema: SCHEMA_VERSION,
            name: self.name.clone(),
            model: ModelSection {
                a: from_matrix(self.model.a()),
                b: from_matrix(self.model.b()),
                e: Some(from_matrix(self.model.e())),
            },
            noise: NoiseSection {
                family: self.noise.family(),
                covariance: from_matrix(self.noise.covariance()),
            },
            cost: CostSection {
                q: from_matrix(self.cost.q()),
                r: from_matrix(self.cost.r()),
                horizon: self.cost.horizon(),
            },
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintSection {
                    kind: c.kind(),
                    direction: c.direction().iter().copied().collect(),
                    bound: c.bound(),
                    epsilon: c.epsilon(),
                })
                .collect(),
            simulation: SimulationSection {
                steps: self.steps,
                x0: self.x0.iter().copied().collect(),
            },
            overrides: Overrides {
                k: self.k_override.as_ref().map(from_matrix),
                s: self.s_reference.as_ref().map(from_matrix),
            },
        }
    }

    pub fn to_toml_string(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(&self.to_file_data())?)
    }

    /// Synthesizes the controller design (LQR gain unless overridden).
    pub fn design(&self) -> Result<OcpDesign, ScenarioError> {
        Ok(OcpDesign::synthesize(
            self.model.clone(),
            self.cost.clone(),
            self.constraints.clone(),
            self.k_override.clone(),
        )?)
    }
}
