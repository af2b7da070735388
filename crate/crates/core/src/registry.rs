//! Named model registry. Each entry builds a `(ControlSystem,
//! CostFunctional, x0)` triple from a JSON-serializable configuration;
//! matrices in configurations are row-major nested arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::{build_heat_system, HeatConfig};
use crate::linalg::Weight;
use crate::model::{ControlSystem, CostFunctional, Matrix, Vector};

/// Row-major nested-array matrix in a configuration document.
pub type MatrixRows = Vec<Vec<f64>>;

fn to_matrix(rows: &MatrixRows, what: &str) -> Result<Matrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config(format!("{what}: matrix must be non-empty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what}: ragged rows")));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_rows(m: &Matrix) -> MatrixRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Linear-quadratic model data: `ẋ = 𝒜x + ℬu`,
/// `J = ½‖x−x_d‖²_Q + ½‖u−u_d‖²_R`, Euclidean inner products.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModelConfig {
    pub lin_state_op: MatrixRows,
    pub control_op: MatrixRows,
    pub q: MatrixRows,
    pub x_d: Vec<f64>,
    pub r: MatrixRows,
    pub u_d: Vec<f64>,
    pub x0: Vec<f64>,
    #[serde(default = "default_lin_horizon")]
    pub horizon: f64,
    #[serde(default = "default_lin_dt")]
    pub dt: f64,
}

fn default_lin_horizon() -> f64 {
    10.0
}
fn default_lin_dt() -> f64 {
    0.05
}

/// Configuration of a registered model; serializes with a `model` tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelConfig {
    /// Scalar regulator driven to the origin from the origin: every curve
    /// is identically zero and the whole horizon is turnpike.
    Lq1d,
    /// Scalar tracking problem `𝒜=−1, ℬ=1, Q=R=1, x_d=1`: steady optimum
    /// `x̄=ū=0.5`, deviation decay rate `√2`.
    LqTracking,
    /// Two-state counterexample with an unstable mode that is neither
    /// controlled nor penalized: the deviation never settles and interval
    /// detection comes up empty.
    NoTurnpike,
    Heat2d(HeatConfig),
    CustomLinear(LinearModelConfig),
}

pub const MODEL_NAMES: [&str; 5] = ["lq1d", "lq-tracking", "no-turnpike", "heat2d", "custom-linear"];

impl ModelConfig {
    /// Default configuration of a registry name. `custom-linear` has no
    /// default and must come from a configuration document.
    pub fn by_name(name: &str) -> Result<ModelConfig> {
        match name {
            "lq1d" => Ok(ModelConfig::Lq1d),
            "lq-tracking" => Ok(ModelConfig::LqTracking),
            "no-turnpike" => Ok(ModelConfig::NoTurnpike),
            "heat2d" => Ok(ModelConfig::Heat2d(HeatConfig::default())),
            "custom-linear" => Err(Error::Config(
                "custom-linear needs a configuration document with its matrices".into(),
            )),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (registered: {})",
                MODEL_NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Lq1d => "lq1d",
            ModelConfig::LqTracking => "lq-tracking",
            ModelConfig::NoTurnpike => "no-turnpike",
            ModelConfig::Heat2d(_) => "heat2d",
            ModelConfig::CustomLinear(_) => "custom-linear",
        }
    }
}

/// A model ready to solve: system, cost, initial state, and nominal
/// discretization defaults.
pub struct BuiltModel {
    pub name: String,
    pub system: ControlSystem,
    pub cost: CostFunctional,
    pub x0: Vector,
    pub default_horizon: f64,
    pub default_dt: f64,
}

fn scalar_lq(a: f64, b: f64, x_d: f64) -> Result<(ControlSystem, CostFunctional)> {
    let sys = ControlSystem::new(
        Matrix::from_element(1, 1, a),
        Matrix::from_element(1, 1, b),
        Weight::identity(1),
        Weight::identity(1),
    )?;
    let cost = CostFunctional::quadratic(
        Matrix::identity(1, 1),
        Vector::from_element(1, x_d),
        Matrix::identity(1, 1),
        Vector::zeros(1),
    )?;
    Ok((sys, cost))
}

/// Builds the system, cost, and initial state of a configured model.
pub fn build_model(config: &ModelConfig) -> Result<BuiltModel> {
    let name = config.name().to_string();
    match config {
        ModelConfig::Lq1d => {
            let (system, cost) = scalar_lq(-1.0, 1.0, 0.0)?;
            Ok(BuiltModel {
                name,
                system,
                cost,
                x0: Vector::zeros(1),
                default_horizon: 10.0,
                default_dt: 0.05,
            })
        }
        ModelConfig::LqTracking => {
            let (system, cost) = scalar_lq(-1.0, 1.0, 1.0)?;
            Ok(BuiltModel {
                name,
                system,
                cost,
                x0: Vector::zeros(1),
                default_horizon: 10.0,
                default_dt: 0.05,
            })
        }
        ModelConfig::NoTurnpike => {
            // second state: ẋ₂ = 0.5·x₂, no control column, no cost weight
            let system = ControlSystem::new(
                Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.5]),
                Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
                Weight::identity(2),
                Weight::identity(1),
            )?;
            let cost = CostFunctional::quadratic(
                Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
                Vector::from_vec(vec![1.0, 0.0]),
                Matrix::identity(1, 1),
                Vector::zeros(1),
            )?;
            Ok(BuiltModel {
                name,
                system,
                cost,
                x0: Vector::from_vec(vec![0.0, 1.0]),
                default_horizon: 10.0,
                default_dt: 0.05,
            })
        }
        ModelConfig::Heat2d(hc) => {
            let built = build_heat_system(hc)?;
            let n = built.system.n_state();
            Ok(BuiltModel {
                name,
                system: built.system,
                cost: built.cost,
                x0: Vector::zeros(n),
                default_horizon: hc.horizon,
                default_dt: hc.dt,
            })
        }
        ModelConfig::CustomLinear(lc) => {
            let a = to_matrix(&lc.lin_state_op, "lin_state_op")?;
            let b = to_matrix(&lc.control_op, "control_op")?;
            let q = to_matrix(&lc.q, "q")?;
            let r = to_matrix(&lc.r, "r")?;
            let n = a.nrows();
            let m = b.ncols();
            if lc.x_d.len() != n || lc.x0.len() != n || lc.u_d.len() != m {
                return Err(Error::Config("x_d/x0/u_d lengths must match the operators".into()));
            }
            let system = ControlSystem::new(a, b, Weight::identity(n), Weight::identity(m))?;
            let cost = CostFunctional::quadratic(
                q,
                Vector::from_vec(lc.x_d.clone()),
                r,
                Vector::from_vec(lc.u_d.clone()),
            )?;
            if !(lc.horizon > 0.0 && lc.dt > 0.0) {
                return Err(Error::Config("horizon and dt must be positive".into()));
            }
            Ok(BuiltModel {
                name,
                system,
                cost,
                x0: Vector::from_vec(lc.x0.clone()),
                default_horizon: lc.horizon,
                default_dt: lc.dt,
            })
        }
    }
}

/// Serializes a `ControlSystem`-shaped linear config back to nested rows
/// (used when echoing effective configurations into report bundles).
pub fn linear_config_of(sys: &ControlSystem, cost: &CostFunctional, x0: &Vector) -> Option<LinearModelConfig> {
    let quad = cost.quadratic_data()?;
    Some(LinearModelConfig {
        lin_state_op: to_rows(sys.lin_state_op()),
        control_op: to_rows(sys.control_op()),
        q: to_rows(&quad.q),
        x_d: quad.x_d.iter().cloned().collect(),
        r: to_rows(&quad.r),
        u_d: quad.u_d.iter().cloned().collect(),
        x0: x0.iter().cloned().collect(),
        horizon: default_lin_horizon(),
        dt: default_lin_dt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::stability_margin;
    use crate::steady::{solve_steady, SteadyOptions};
    use approx::assert_relative_eq;

    #[test]
    fn registry_names_round_trip_through_json() {
        for name in ["lq1d", "lq-tracking", "no-turnpike", "heat2d"] {
            let config = ModelConfig::by_name(name).unwrap();
            assert_eq!(config.name(), name);
            let json = serde_json::to_string(&config).unwrap();
            assert!(json.contains(&format!("\"model\":\"{name}\"")));
            let parsed: ModelConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(parsed.name(), name);
            build_model(&parsed).unwrap();
        }
        assert!(ModelConfig::by_name("nope").is_err());
        assert!(ModelConfig::by_name("custom-linear").is_err());
    }

    #[test]
    fn tracking_model_reaches_the_half_point_and_regulator_stays_at_zero() {
        let m = build_model(&ModelConfig::LqTracking).unwrap();
        let s = solve_steady(&m.system, &m.cost, &SteadyOptions::default()).unwrap();
        assert_relative_eq!(s.x_bar[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(s.u_bar[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(s.lambda_bar[0].abs(), 0.5, epsilon = 1e-9);
        assert_relative_eq!(s.objective, 0.25, epsilon = 1e-9);

        let z = build_model(&ModelConfig::Lq1d).unwrap();
        let s = solve_steady(&z.system, &z.cost, &SteadyOptions::default()).unwrap();
        assert!(s.x_bar.amax() < 1e-12 && s.u_bar.amax() < 1e-12 && s.lambda_bar.amax() < 1e-12);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn counterexample_model_has_an_unpenalized_unstable_mode() {
        let m = build_model(&ModelConfig::NoTurnpike).unwrap();
        assert!(stability_margin(m.system.lin_state_op()) > 0.0);
        // the unstable mode is uncontrolled and unpenalized
        assert_eq!(m.system.control_op()[(1, 0)], 0.0);
        assert_eq!(m.cost.quadratic_data().unwrap().q[(1, 1)], 0.0);
        assert_eq!(m.x0[1], 1.0);
        // its steady problem is still well posed
        let s = solve_steady(&m.system, &m.cost, &SteadyOptions::default()).unwrap();
        assert_relative_eq!(s.x_bar[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(s.x_bar[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn custom_linear_model_parses_row_major_matrices() {
        let json = r#"{
            "model": "custom-linear",
            "lin_state_op": [[-1.0, 0.5], [0.0, -2.0]],
            "control_op": [[1.0], [0.3]],
            "q": [[1.0, 0.0], [0.0, 2.0]],
            "x_d": [1.0, 0.0],
            "r": [[1.0]],
            "u_d": [0.0],
            "x0": [0.0, 0.0]
        }"#;
        let config: ModelConfig = serde_json::from_str(json).unwrap();
        let m = build_model(&config).unwrap();
        assert_eq!(m.system.n_state(), 2);
        assert_eq!(m.system.n_control(), 1);
        assert_relative_eq!(m.system.lin_state_op()[(0, 1)], 0.5);
        assert_relative_eq!(m.default_dt, 0.05);

        let ragged = json.replace("[[-1.0, 0.5], [0.0, -2.0]]", "[[-1.0], [0.0, -2.0]]");
        let config: ModelConfig = serde_json::from_str(&ragged).unwrap();
        assert!(build_model(&config).is_err());
    }
}
