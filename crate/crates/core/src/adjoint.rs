//! Discrete Euler-forward model on the reduced system, the assimilation cost,
//! and its gradient via the backward adjoint recursion.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::{integrate, IntegratorConfig, Scheme, Trajectory};
use crate::graphcore::Multipliers;
use crate::rom::RomModel;
use crate::{Error, Result};

/// A parameterized vector field `ẋ = F(x, p)` with analytic Jacobians, the
/// contract the adjoint sweep needs from any model it differentiates through.
pub trait ParamModel: Sync {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    /// `F(x, p)`.
    fn field(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>>;
    /// `D_x F(x, p)`, `state_dim × state_dim`.
    fn jac_state(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// `D_p F(x, p)`, `state_dim × param_dim`.
    fn jac_param(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>>;
}

impl ParamModel for RomModel<'_> {
    fn state_dim(&self) -> usize {
        self.k()
    }

    fn param_dim(&self) -> usize {
        self.m()
    }

    fn field(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        let gamma = Multipliers::from(p.clone());
        RomModel::field(self, x, &gamma)
    }

    fn jac_state(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let gamma = Multipliers::from(p.clone());
        self.jac_z(x, &gamma)
    }

    fn jac_param(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let gamma = Multipliers::from(p.clone());
        self.jac_gamma(x, &gamma)
    }
}

/// Lotka–Volterra predator–prey fixture with parameters `p = (α, β, γ, δ)`:
/// `ẋ₁ = αx₁ − βx₁x₂`, `ẋ₂ = δx₁x₂ − γx₂`. Small enough that the Euler-step
/// Jacobians are known in closed form, which makes it the reference fixture
/// for the adjoint machinery.
#[derive(Debug, Clone, Copy, Default)]
pub struct LotkaVolterra;

impl ParamModel for LotkaVolterra {
    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        4
    }

    fn field(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        check_dims(self, x, p)?;
        let (x1, x2) = (x[0], x[1]);
        let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
        Ok(DVector::from_column_slice(&[a * x1 - b * x1 * x2, d * x1 * x2 - c * x2]))
    }

    fn jac_state(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dims(self, x, p)?;
        let (x1, x2) = (x[0], x[1]);
        let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
        Ok(DMatrix::from_row_slice(2, 2, &[a - b * x2, -b * x1, d * x2, d * x1 - c]))
    }

    fn jac_param(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dims(self, x, p)?;
        let (x1, x2) = (x[0], x[1]);
        Ok(DMatrix::from_row_slice(
            2,
            4,
            &[x1, -x1 * x2, 0.0, 0.0, 0.0, 0.0, -x2, x1 * x2],
        ))
    }
}

fn check_dims<M: ParamModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<()> {
    if x.len() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "state has length {} but the model expects {}",
            x.len(),
            model.state_dim()
        )));
    }
    if p.len() != model.param_dim() {
        return Err(Error::Dimension(format!(
            "parameter vector has length {} but the model expects {}",
            p.len(),
            model.param_dim()
        )));
    }
    Ok(())
}

/// One assimilation trajectory: a reduced initial condition, the 1-based step
/// indices where the state is observed, and the reduced observations there.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    z0: DVector<f64>,
    indices: Vec<usize>,
    values: Vec<DVector<f64>>,
}

impl ObservationSet {
    pub fn new(
        z0: DVector<f64>,
        indices: Vec<usize>,
        values: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} observation indices but {} observed states",
                indices.len(),
                values.len()
            )));
        }
        if indices.iter().any(|&j| j == 0) {
            return Err(Error::InvalidArgument(
                "observation indices are 1-based; index 0 (the known initial state) is not allowed"
                    .into(),
            ));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "observation indices must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| v.len() != z0.len()) {
            return Err(Error::Dimension(
                "observed states must share the reduced dimension of z0".into(),
            ));
        }
        Ok(Self { z0, indices, values })
    }

    pub fn z0(&self) -> &DVector<f64> {
        &self.z0
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Configuration of the assimilation cost: ℓ1 weight and the Euler-forward
/// discretization the adjoint sweep is derived against.
#[derive(Debug, Clone, Copy)]
pub struct CostConfig {
    pub alpha: f64,
    pub dt: f64,
    pub steps: usize,
}

impl CostConfig {
    pub fn new(alpha: f64, dt: f64, steps: usize) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} must be ≥ 0")));
        }
        // dt/steps validation is delegated to the integrator config
        IntegratorConfig::new(Scheme::EulerForward, dt, steps)?;
        Ok(Self { alpha, dt, steps })
    }

    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::new(Scheme::EulerForward, self.dt, self.steps)
            .expect("validated at construction")
    }

    fn check_indices(&self, obs: &ObservationSet) -> Result<()> {
        if let Some(&last) = obs.indices.last() {
            if last > self.steps {
                return Err(Error::InvalidArgument(format!(
                    "observation index {last} exceeds the {} forward steps",
                    self.steps
                )));
            }
        }
        Ok(())
    }
}

/// Euler-forward iterates `z_{q+1} = z_q + Δt·F(z_q, p)`, blow-up guarded.
pub fn forward_rom<M: ParamModel + ?Sized>(
    model: &M,
    params: &DVector<f64>,
    z0: &DVector<f64>,
    cfg: &CostConfig,
) -> Result<Trajectory> {
    check_dims(model, z0, params)?;
    integrate(|z| model.field(z, params), z0, &cfg.integrator())
}

/// Jacobians of the Euler step `M(x, p) = x + Δt·F(x, p)`:
/// `A = I + Δt·D_x F` and `B = Δt·D_p F`.
pub fn step_jacobians<M: ParamModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    params: &DVector<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.state_dim();
    let a = DMatrix::identity(n, n) + model.jac_state(x, params)? * dt;
    let b = model.jac_param(x, params)? * dt;
    Ok((a, b))
}

/// `J(γ̄) = ½ Σ_c Σ_{j∈A^c} ‖z_j − F^c(t_j)‖² + (α/2)‖γ̄‖₁`.
pub fn cost_j<M: ParamModel + ?Sized>(
    model: &M,
    params: &DVector<f64>,
    obs: &[ObservationSet],
    cfg: &CostConfig,
) -> Result<f64> {
    let mismatch: Vec<f64> = obs
        .par_iter()
        .map(|set| -> Result<f64> {
            cfg.check_indices(set)?;
            let traj = forward_rom(model, params, &set.z0, cfg)?;
            let mut acc = 0.0;
            for (&j, target) in set.indices.iter().zip(&set.values) {
                acc += (&traj.states[j] - target).norm_squared();
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let l1: f64 = params.iter().map(|g| g.abs()).sum();
    Ok(0.5 * mismatch.iter().sum::<f64>() + 0.5 * cfg.alpha * l1)
}

/// Gradient of [`cost_j`] via the adjoint recursion, one backward sweep per
/// trajectory: `λ_N = η̄_N`, `λ_j = A_jᵀλ_{j+1} + η̄_j`, accumulating
/// `Σ_k B_{k−1}ᵀλ_k`, where `η̄_j = z_j − F^c(t_j)` at observed steps and zero
/// elsewhere. The ℓ1 term contributes the subgradient `(α/2)·sign(γ̄)` with
/// `sign(0) = 0`.
pub fn grad_j_adjoint<M: ParamModel + ?Sized>(
    model: &M,
    params: &DVector<f64>,
    obs: &[ObservationSet],
    cfg: &CostConfig,
) -> Result<DVector<f64>> {
    let per_traj: Vec<DVector<f64>> = obs
        .par_iter()
        .map(|set| -> Result<DVector<f64>> {
            cfg.check_indices(set)?;
            let traj = forward_rom(model, params, &set.z0, cfg)?;
            let k = model.state_dim();
            let n_steps = cfg.steps;
            // η̄_j for j = 1..=N, zero away from the observation indices
            let mut eta = vec![DVector::zeros(k); n_steps + 1];
            for (&j, target) in set.indices.iter().zip(&set.values) {
                eta[j] = &traj.states[j] - target;
            }
            let mut grad = DVector::zeros(model.param_dim());
            let mut lambda = eta[n_steps].clone();
            for q in (1..=n_steps).rev() {
                // grad += B_{q−1}ᵀ λ_q, then λ_{q−1} = A_{q−1}ᵀ λ_q + η̄_{q−1}
                let (a, b) = step_jacobians(model, &traj.states[q - 1], params, cfg.dt)?;
                grad += b.transpose() * &lambda;
                if q > 1 {
                    lambda = a.transpose() * lambda + &eta[q - 1];
                }
            }
            Ok(grad)
        })
        .collect::<Result<_>>()?;
    let mut grad = DVector::zeros(model.param_dim());
    for g in per_traj {
        grad += g;
    }
    for (gi, &p) in grad.iter_mut().zip(params.iter()) {
        *gi += 0.5 * cfg.alpha * p.signum() * f64::from(u8::from(p != 0.0));
    }
    Ok(grad)
}
