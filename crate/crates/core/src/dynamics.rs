//! Full-order simulators: Brusselator reaction-diffusion on the graph, the
//! linear diffusion / heat-kernel system, explicit integrators, snapshot
//! generation, and dispersion-relation stability classification.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::graphcore::{dense_symmetric_eigen, laplacian, Multipliers, WeightedGraph};
use crate::{Error, Result};

/// Any component of the state exceeding this magnitude aborts integration.
pub const BLOW_UP_LIMIT: f64 = 1e8;

/// Kinetic rates and diffusion coefficients of the two-species Brusselator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrusselatorParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub d_x: f64,
    pub d_y: f64,
}

impl Default for BrusselatorParams {
    fn default() -> Self {
        Self { a: 1.0, b: 3.0, c: 1.0, d: 1.0, d_x: 0.1, d_y: 1.4 }
    }
}

impl BrusselatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.a <= 0.0 || self.c <= 0.0 || self.d <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kinetic rates a, c, d must be positive (a={}, c={}, d={})",
                self.a, self.c, self.d
            )));
        }
        if self.d_x < 0.0 || self.d_y < 0.0 {
            return Err(Error::InvalidArgument("diffusion coefficients must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Uniform fixed point `(a/d, bd/(ac))` of the Brusselator kinetics.
pub fn fixed_point(p: &BrusselatorParams) -> Result<(f64, f64)> {
    if p.d == 0.0 || p.a == 0.0 || p.c == 0.0 {
        return Err(Error::InvalidArgument("fixed point undefined: zero denominator".into()));
    }
    Ok((p.a / p.d, p.b * p.d / (p.a * p.c)))
}

/// Integration schemes for the explicit integrators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerForward,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, dt: f64, steps: usize) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("step count must be at least 1".into()));
        }
        Ok(Self { scheme, dt, steps })
    }
}

/// A sampled trajectory: strictly increasing times, one state per instant.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    /// CSV export with header `t,node,species,value`. States of dimension 2n
    /// are interpreted as species blocks (x_1..x_n, y_1..y_n); dimension-n
    /// states are a single species.
    pub fn to_csv(&self, n_nodes: usize) -> String {
        let mut out = String::from("t,node,species,value\n");
        for (t, state) in self.times.iter().zip(&self.states) {
            let species = state.len() / n_nodes;
            for s in 0..species {
                for node in 0..n_nodes {
                    let _ = writeln!(out, "{t:.17e},{node},{s},{:.17e}", state[s * n_nodes + node]);
                }
            }
        }
        out
    }

    pub fn terminal(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Brusselator vector field on a graph: state is `(x_1..x_n, y_1..y_n)`.
///
/// `ẋ = a − (b+d)x + c x²y − D_x L(γ̄) x`,
/// `ẏ = b x − c x²y − D_y L(γ̄) y`.
pub fn brusselator_field(
    state: &DVector<f64>,
    g: &WeightedGraph,
    gamma: &Multipliers,
    p: &BrusselatorParams,
) -> Result<DVector<f64>> {
    let n = g.n();
    if state.len() != 2 * n {
        return Err(Error::Dimension(format!(
            "state has length {} but expected 2n = {}",
            state.len(),
            2 * n
        )));
    }
    let x = state.rows(0, n).clone_owned();
    let y = state.rows(n, n).clone_owned();
    let lx = g.laplacian_apply(gamma, &x)?;
    let ly = g.laplacian_apply(gamma, &y)?;
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        let xy2 = p.c * x[i] * x[i] * y[i];
        out[i] = p.a - (p.b + p.d) * x[i] + xy2 - p.d_x * lx[i];
        out[n + i] = p.b * x[i] - xy2 - p.d_y * ly[i];
    }
    Ok(out)
}

/// Jacobian-vector product of the Brusselator field, matrix-free in O(n + m).
pub fn brusselator_jvp(
    state: &DVector<f64>,
    dir: &DVector<f64>,
    g: &WeightedGraph,
    gamma: &Multipliers,
    p: &BrusselatorParams,
) -> Result<DVector<f64>> {
    let n = g.n();
    if state.len() != 2 * n || dir.len() != 2 * n {
        return Err(Error::Dimension("jvp arguments must have length 2n".into()));
    }
    let dx = dir.rows(0, n).clone_owned();
    let dy = dir.rows(n, n).clone_owned();
    let ldx = g.laplacian_apply(gamma, &dx)?;
    let ldy = g.laplacian_apply(gamma, &dy)?;
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        let x = state[i];
        let y = state[n + i];
        let fxx = -(p.b + p.d) + 2.0 * p.c * x * y;
        let fxy = p.c * x * x;
        out[i] = fxx * dx[i] + fxy * dy[i] - p.d_x * ldx[i];
        out[n + i] = (p.b - 2.0 * p.c * x * y) * dx[i] - fxy * dy[i] - p.d_y * ldy[i];
    }
    Ok(out)
}

/// Applies the heat kernel `e^{−L(γ̄)t}` to `f` via a dense eigendecomposition.
pub fn heat_kernel_apply(
    g: &WeightedGraph,
    gamma: &Multipliers,
    f: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    if f.len() != g.n() {
        return Err(Error::Dimension(format!(
            "vector has length {} but graph has {} vertices",
            f.len(),
            g.n()
        )));
    }
    let l = laplacian(g, gamma)?;
    let (vals, vecs) = dense_symmetric_eigen(&l)?;
    let mut out = DVector::zeros(g.n());
    for (lam, v) in vals.iter().zip(&vecs) {
        out += v * (v.dot(f) * (-lam * t).exp());
    }
    Ok(out)
}

/// Integrates `ẋ = field(x)` with the chosen explicit scheme, recording every
/// step. Aborts with the step index when the state leaves the finite range.
pub fn integrate(
    field: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(cfg.steps + 1);
    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut x = x0.clone();
    times.push(0.0);
    states.push(x.clone());
    for q in 0..cfg.steps {
        x = match cfg.scheme {
            Scheme::EulerForward => {
                let k = field(&x)?;
                &x + k * cfg.dt
            }
            Scheme::Rk4 => {
                let k1 = field(&x)?;
                let k2 = field(&(&x + &k1 * (cfg.dt / 2.0)))?;
                let k3 = field(&(&x + &k2 * (cfg.dt / 2.0)))?;
                let k4 = field(&(&x + &k3 * cfg.dt))?;
                &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (cfg.dt / 6.0)
            }
        };
        let magnitude = x.amax();
        if !magnitude.is_finite() || magnitude > BLOW_UP_LIMIT {
            return Err(Error::BlowUp { step: q + 1, magnitude });
        }
        times.push(cfg.dt * (q + 1) as f64);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

/// Stability classification of one Laplacian eigenmode under the linearized
/// reaction-diffusion dynamics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeStability {
    pub eigenvalue: f64,
    /// Largest real part of the eigenvalues of `J_α`.
    pub growth_rate: f64,
    pub unstable: bool,
}

/// Dispersion relation: for each Laplacian eigenvalue λ, the eigenvalues of
/// `J_α = D_r F(r*) − diag(D_x, D_y)·λ` decide the mode's stability.
pub fn dispersion_stability(
    p: &BrusselatorParams,
    laplacian_eigenvalues: &[f64],
) -> Result<Vec<ModeStability>> {
    p.validate()?;
    let (xs, ys) = fixed_point(p)?;
    // Reaction Jacobian at the uniform fixed point.
    let j11 = -(p.b + p.d) + 2.0 * p.c * xs * ys;
    let j12 = p.c * xs * xs;
    let j21 = p.b - 2.0 * p.c * xs * ys;
    let j22 = -p.c * xs * xs;
    Ok(laplacian_eigenvalues
        .iter()
        .map(|&lam| {
            let a11 = j11 - p.d_x * lam;
            let a22 = j22 - p.d_y * lam;
            let tr = a11 + a22;
            let det = a11 * a22 - j12 * j21;
            let disc = tr * tr - 4.0 * det;
            let growth_rate =
                if disc >= 0.0 { (tr + disc.sqrt()) / 2.0 } else { tr / 2.0 };
            ModeStability { eigenvalue: lam, growth_rate, unstable: growth_rate > 0.0 }
        })
        .collect())
}

/// Runs the Brusselator forward from each initial condition and assembles the
/// snapshot matrix: states sampled at a uniform stride, columns grouped by
/// trajectory. Returns the matrix together with the retained trajectories and
/// the per-trajectory sampled step indices.
pub fn snapshot_ensemble(
    g: &WeightedGraph,
    gamma: &Multipliers,
    p: &BrusselatorParams,
    initial_conditions: &[DVector<f64>],
    cfg: &IntegratorConfig,
    samples_per_trajectory: usize,
) -> Result<(DMatrix<f64>, Vec<Trajectory>, Vec<Vec<usize>>)> {
    if initial_conditions.is_empty() {
        return Err(Error::InvalidArgument("need at least one initial condition".into()));
    }
    if samples_per_trajectory == 0 {
        return Err(Error::InvalidArgument("need at least one sample per trajectory".into()));
    }
    let d = 2 * g.n();
    let n_traj = initial_conditions.len();
    let mut snapshots = DMatrix::zeros(d, n_traj * samples_per_trajectory);
    let mut trajectories = Vec::with_capacity(n_traj);
    let mut sample_sets = Vec::with_capacity(n_traj);
    for (c, x0) in initial_conditions.iter().enumerate() {
        let traj = integrate(|x| brusselator_field(x, g, gamma, p), x0, cfg)?;
        let indices = sample_indices(cfg.steps, samples_per_trajectory);
        for (s, &idx) in indices.iter().enumerate() {
            snapshots.set_column(c * samples_per_trajectory + s, &traj.states[idx]);
        }
        sample_sets.push(indices);
        trajectories.push(traj);
    }
    Ok((snapshots, trajectories, sample_sets))
}

/// Uniform-stride sample indices over `[0, steps]`, always including 0.
pub fn sample_indices(steps: usize, samples: usize) -> Vec<usize> {
    if samples == 1 {
        return vec![0];
    }
    (0..samples).map(|i| i * steps / (samples - 1)).collect()
}

/// Uniform fixed-point state replicated over the graph.
pub fn uniform_fixed_point_state(n: usize, p: &BrusselatorParams) -> Result<DVector<f64>> {
    let (xs, ys) = fixed_point(p)?;
    let mut state = DVector::zeros(2 * n);
    for i in 0..n {
        state[i] = xs;
        state[n + i] = ys;
    }
    Ok(state)
}
