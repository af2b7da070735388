//! 2D semilinear heat model on [0,lx]×[0,ly]: 5-point Laplacian with
//! Neumann boundary control by ghost-node elimination, cubic reaction
//! `−x³`, bump tracking reference, and trapezoidal L₂(Ω) / H¹(Ω) / L₂(∂Ω)
//! quadrature weights.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Weight;
use crate::model::{ControlSystem, CostFunctional, Matrix, Nonlinearity, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatConfig {
    #[serde(default = "default_lx")]
    pub lx: f64,
    #[serde(default = "default_ly")]
    pub ly: f64,
    /// Grid cells along each side; the node grid is `(nx+1)×(ny+1)`.
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_ny")]
    pub ny: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_bump_center")]
    pub bump_center: (f64, f64),
    #[serde(default = "default_bump_scale")]
    pub bump_scale: f64,
    #[serde(default = "default_bump_amplitude")]
    pub bump_amplitude: f64,
}

fn default_lx() -> f64 {
    3.0
}
fn default_ly() -> f64 {
    1.0
}
fn default_nx() -> usize {
    30
}
fn default_ny() -> usize {
    10
}
fn default_horizon() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    0.1
}
fn default_bump_center() -> (f64, f64) {
    (1.5, 0.5)
}
fn default_bump_scale() -> f64 {
    10.0 / 3.0
}
fn default_bump_amplitude() -> f64 {
    10.0
}

impl Default for HeatConfig {
    fn default() -> HeatConfig {
        HeatConfig {
            lx: default_lx(),
            ly: default_ly(),
            nx: default_nx(),
            ny: default_ny(),
            horizon: default_horizon(),
            dt: default_dt(),
            bump_center: default_bump_center(),
            bump_scale: default_bump_scale(),
            bump_amplitude: default_bump_amplitude(),
        }
    }
}

impl HeatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::InvalidArgument("grid needs nx, ny ≥ 3".into()));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::InvalidArgument(
                "domain lengths, horizon and dt must be positive".into(),
            ));
        }
        if !(self.bump_scale > 0.0) {
            return Err(Error::InvalidArgument("bump scale must be positive".into()));
        }
        Ok(())
    }

    fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Lexicographic node index of grid position `(i, j)`.
    fn node(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.lx / self.nx as f64, j as f64 * self.ly / self.ny as f64)
    }
}

/// The three norm weights of the model.
#[derive(Debug, Clone)]
pub struct HeatWeights {
    /// Trapezoidal L₂(Ω) mass.
    pub l2: Weight,
    /// Mass plus stiffness (discrete H¹(Ω)).
    pub h1: Weight,
    /// Trapezoidal L₂(∂Ω) mass on the boundary nodes.
    pub boundary_l2: Weight,
}

/// Assembled model: system, tracking cost, norm weights, and the node
/// indices of the control degrees of freedom (one per boundary node, in
/// lexicographic node order).
pub struct HeatSystem {
    pub system: ControlSystem,
    pub cost: CostFunctional,
    pub weights: HeatWeights,
    pub boundary_nodes: Vec<usize>,
    pub config: HeatConfig,
}

/// Nodal tracking target.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceField {
    pub values: Vector,
}

/// Bump profile `amplitude·e^{1−1/(1−s²)}` for `s < 1`, continuously
/// extended by zero.
fn bump(config: &HeatConfig, x: f64, y: f64) -> f64 {
    let s = config.bump_scale * ((x - config.bump_center.0).powi(2) + (y - config.bump_center.1).powi(2)).sqrt();
    if s < 1.0 {
        config.bump_amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Evaluates the tracking reference at the grid nodes; exactly zero
/// outside the bump support.
pub fn reference_field(config: &HeatConfig) -> Result<ReferenceField> {
    config.validate()?;
    let mut values = Vector::zeros(config.n_nodes());
    for i in 0..=config.nx {
        for j in 0..=config.ny {
            let (x, y) = config.coords(i, j);
            values[config.node(i, j)] = bump(config, x, y);
        }
    }
    Ok(ReferenceField { values })
}

/// Builds the heat model: Laplacian with ghost-eliminated Neumann rows,
/// boundary-control injection `(2/h_normal)·u` (corners collect both edge
/// injections), cubic reaction, and the tracking cost
/// `½‖x−x_d‖²_{L₂(Ω)} + ½‖u‖²_{L₂(∂Ω)}`.
pub fn build_heat_system(config: &HeatConfig) -> Result<HeatSystem> {
    config.validate()?;
    let (nx, ny) = (config.nx, config.ny);
    let hx = config.lx / nx as f64;
    let hy = config.ly / ny as f64;
    let n = config.n_nodes();

    let boundary_nodes: Vec<usize> = (0..=nx)
        .flat_map(|i| (0..=ny).map(move |j| (i, j)))
        .filter(|&(i, j)| i == 0 || i == nx || j == 0 || j == ny)
        .map(|(i, j)| config.node(i, j))
        .collect();
    let m = boundary_nodes.len();
    let control_index: std::collections::HashMap<usize, usize> =
        boundary_nodes.iter().enumerate().map(|(c, &node)| (node, c)).collect();

    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, m);
    for i in 0..=nx {
        for j in 0..=ny {
            let row = config.node(i, j);
            let mut diag = 0.0;
            // x-direction second difference; ghost elimination doubles the
            // inner neighbor on the two vertical edges
            diag -= 2.0 / (hx * hx);
            if i > 0 && i < nx {
                a[(row, config.node(i - 1, j))] += 1.0 / (hx * hx);
                a[(row, config.node(i + 1, j))] += 1.0 / (hx * hx);
            } else {
                let inner = if i == 0 { config.node(1, j) } else { config.node(nx - 1, j) };
                a[(row, inner)] += 2.0 / (hx * hx);
                b[(row, control_index[&row])] += 2.0 / hx;
            }
            // y-direction
            diag -= 2.0 / (hy * hy);
            if j > 0 && j < ny {
                a[(row, config.node(i, j - 1))] += 1.0 / (hy * hy);
                a[(row, config.node(i, j + 1))] += 1.0 / (hy * hy);
            } else {
                let inner = if j == 0 { config.node(i, 1) } else { config.node(i, ny - 1) };
                a[(row, inner)] += 2.0 / (hy * hy);
                b[(row, control_index[&row])] += 2.0 / hy;
            }
            a[(row, row)] += diag;
        }
    }

    // trapezoidal quadrature: half weight on edge layers of each direction
    let mut mass = DVector::zeros(n);
    for i in 0..=nx {
        let cx = if i == 0 || i == nx { 0.5 } else { 1.0 };
        for j in 0..=ny {
            let cy = if j == 0 || j == ny { 0.5 } else { 1.0 };
            mass[config.node(i, j)] = cx * cy * hx * hy;
        }
    }
    let l2 = Weight::diagonal(mass.clone())?;

    // perimeter trapezoid: corners collect half-cells from both edges
    let mut bmass = DVector::zeros(m);
    for (c, &node) in boundary_nodes.iter().enumerate() {
        let (i, j) = (node / (ny + 1), node % (ny + 1));
        let mut w = 0.0;
        if j == 0 || j == ny {
            w += if i == 0 || i == nx { 0.5 * hx } else { hx };
        }
        if i == 0 || i == nx {
            w += if j == 0 || j == ny { 0.5 * hy } else { hy };
        }
        bmass[c] = w;
    }
    let boundary_l2 = Weight::diagonal(bmass)?;

    // stiffness from summation by parts: K = −W_Ω Δ_h is SPD up to
    // constants, symmetric by construction of the ghost elimination
    let wa = l2.apply_mat(&a);
    let stiffness = -(&wa + wa.transpose()) * 0.5;
    let h1_mat = Matrix::from_diagonal(&mass) + stiffness;
    let h1 = Weight::dense(h1_mat)?;

    let reference = reference_field(config)?;
    let cost = CostFunctional::quadratic(
        l2.to_matrix(),
        reference.values,
        boundary_l2.to_matrix(),
        Vector::zeros(m),
    )?;

    let nonlin = Nonlinearity {
        f: Box::new(|x: &Vector, _u: &Vector| x.map(|v| -v * v * v)),
        jac_x: Box::new(|x: &Vector, _u| Matrix::from_diagonal(&x.map(|v| -3.0 * v * v))),
        jac_u: {
            let n = n;
            Box::new(move |_x: &Vector, u: &Vector| Matrix::zeros(n, u.len()))
        },
        jac_x_bandwidth: Some(0),
        jac_x_diag: Some(Box::new(|x: &Vector, _u| x.map(|v| -3.0 * v * v))),
        hess_x_action: Some(Box::new(|x: &Vector, _u, w: &Vector| {
            // ∂/∂x [f_x(x)ᵀ w] with f_x = −3 diag(x²)
            Matrix::from_diagonal(&Vector::from_fn(x.len(), |i, _| -6.0 * x[i] * w[i]))
        })),
    };

    let system = ControlSystem::new(a, b, l2.clone(), boundary_l2.clone())?
        .with_h1_inner(h1.clone())?
        .with_nonlinearity(nonlin);

    Ok(HeatSystem {
        system,
        cost,
        weights: HeatWeights { l2, h1, boundary_l2 },
        boundary_nodes,
        config: config.clone(),
    })
}

impl HeatSystem {
    /// Boundary trace of a state vector, in control ordering.
    pub fn boundary_trace(&self, v: &Vector) -> Vector {
        Vector::from_fn(self.boundary_nodes.len(), |c, _| v[self.boundary_nodes[c]])
    }
}

/// Weighted norms of a state vector: `(L₂(Ω), H¹(Ω), L₂(∂Ω) of the
/// boundary trace)`. The trace ordering is the lexicographic boundary-node
/// ordering used for controls.
pub fn discrete_norms(sys: &HeatSystem, v: &Vector) -> Result<(f64, f64, f64)> {
    if v.len() != sys.system.n_state() {
        return Err(Error::DimensionMismatch("state vector length".into()));
    }
    let trace = sys.boundary_trace(v);
    Ok((
        sys.weights.l2.norm(v),
        sys.weights.h1.norm(v),
        sys.weights.boundary_l2.norm(&trace),
    ))
}
