//! Constrained first-order solver: augmented Lagrangian over the linear
//! connectivity rows and the nonlinear spectral bound, with projected-gradient
//! inner iterations on the nonnegativity box.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Scalar-valued callback on the decision vector.
pub type ScalarFn<'a> = Box<dyn Fn(&DVector<f64>) -> Result<f64> + 'a>;
/// Vector-valued callback on the decision vector.
pub type VecFn<'a> = Box<dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + 'a>;
/// Opaque branch signature of a piecewise-defined constraint; steps that
/// change it are rejected during the line search.
pub type SignatureFn<'a> = Box<dyn Fn(&DVector<f64>) -> Result<Vec<u8>> + 'a>;

/// Nonlinear inequality `value(x) ≤ bound` with analytic gradient.
pub struct NlConstraint<'a> {
    pub value: ScalarFn<'a>,
    pub grad: VecFn<'a>,
    pub bound: f64,
}

/// Minimize `objective(x)` subject to `x ≥ 0`, optional linear rows
/// `Q'x ≥ τ`, and an optional nonlinear bound.
pub struct ConstrainedProblem<'a> {
    pub dim: usize,
    pub objective: ScalarFn<'a>,
    pub gradient: VecFn<'a>,
    /// `(Q', τ)` for `Q'x ≥ τ`.
    pub linear: Option<(DMatrix<f64>, DVector<f64>)>,
    pub nonlinear: Option<NlConstraint<'a>>,
    pub x0: DVector<f64>,
    /// Piecewise-branch signature of the nonlinear constraint, if it has one.
    pub branch_signature: Option<SignatureFn<'a>>,
    /// Enforce `x ≥ 0` by projection (the multiplier problems do; the neural
    /// parameter problem does not).
    pub nonneg: bool,
}

/// How the ℓ1 part of the objective is treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum L1Mode {
    /// The objective/gradient callbacks already include the ℓ1 term (as a
    /// subgradient); the solver treats the whole thing as smooth.
    Subgradient,
    /// Callbacks are the smooth part only; the solver adds `weight·‖x‖₁` and
    /// handles it with a soft-threshold proximal step.
    Prox { weight: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub outer_cap: usize,
    pub inner_cap: usize,
    /// Stop when the projected-gradient norm falls below this.
    pub grad_tol: f64,
    /// Allowed violation of the nonlinear bound at exit.
    pub tol_nl: f64,
    pub l1: L1Mode,
    /// Initial augmented-Lagrangian penalty.
    pub rho0: f64,
    /// Emit one log line per outer iteration.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            outer_cap: 50,
            inner_cap: 500,
            grad_tol: 1e-6,
            tol_nl: 1e-8,
            l1: L1Mode::Subgradient,
            rho0: 10.0,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Projected gradient and all constraint violations within tolerance.
    Converged,
    /// Outer iteration cap reached; best feasible-ish iterate returned.
    IterationCap,
}

/// Constraint violations measured (not estimated) at a point.
#[derive(Debug, Clone)]
pub struct ViolationReport {
    /// `max(0, τ_i − (Q'x)_i)` per linear row.
    pub linear: DVector<f64>,
    /// `max(0, −x_i)` per coordinate.
    pub bounds: DVector<f64>,
    /// `max(0, value(x) − bound)` for the nonlinear constraint (0 if absent).
    pub nonlinear: f64,
}

impl ViolationReport {
    pub fn max(&self) -> f64 {
        let lin = self.linear.iter().cloned().fold(0.0, f64::max);
        let bnd = self.bounds.iter().cloned().fold(0.0, f64::max);
        lin.max(bnd).max(self.nonlinear)
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub x: DVector<f64>,
    pub objective_history: Vec<f64>,
    pub violations: ViolationReport,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub termination: Termination,
}

/// Measured violations of all constraint groups at `x`.
pub fn check_feasibility(problem: &ConstrainedProblem, x: &DVector<f64>) -> Result<ViolationReport> {
    if x.len() != problem.dim {
        return Err(Error::Dimension(format!(
            "point has length {} but the problem has dimension {}",
            x.len(),
            problem.dim
        )));
    }
    let linear = match &problem.linear {
        Some((q, tau)) => {
            let slack = tau - q * x;
            slack.map(|s| s.max(0.0))
        }
        None => DVector::zeros(0),
    };
    let bounds = if problem.nonneg { x.map(|v| (-v).max(0.0)) } else { DVector::zeros(x.len()) };
    let nonlinear = match &problem.nonlinear {
        Some(nl) => ((nl.value)(x)? - nl.bound).max(0.0),
        None => 0.0,
    };
    Ok(ViolationReport { linear, bounds, nonlinear })
}

/// Composite value the line search monotonically decreases: augmented
/// Lagrangian plus the prox-handled ℓ1 term (if any).
struct AugState {
    /// Multipliers for the linear rows.
    mu_lin: DVector<f64>,
    /// Multiplier for the nonlinear bound.
    mu_nl: f64,
    rho: f64,
}

fn l1_weight(opts: &SolverOptions) -> f64 {
    match opts.l1 {
        L1Mode::Subgradient => 0.0,
        L1Mode::Prox { weight } => weight,
    }
}

/// AL value at `x`: `f(x) + Σᵢ ψ(cᵢ; μᵢ, ρ) + w‖x‖₁` with the classic
/// inequality penalty `ψ(c; μ, ρ) = (max(0, μ − ρc)² − μ²) / (2ρ)`.
fn aug_value(
    problem: &ConstrainedProblem,
    st: &AugState,
    w: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    let mut val = (problem.objective)(x)? + w * x.iter().map(|v| v.abs()).sum::<f64>();
    let psi = |c: f64, mu: f64| ((mu - st.rho * c).max(0.0).powi(2) - mu * mu) / (2.0 * st.rho);
    if let Some((q, tau)) = &problem.linear {
        let slack = q * x - tau;
        for (i, &c) in slack.iter().enumerate() {
            val += psi(c, st.mu_lin[i]);
        }
    }
    if let Some(nl) = &problem.nonlinear {
        val += psi(nl.bound - (nl.value)(x)?, st.mu_nl);
    }
    Ok(val)
}

/// Gradient of the smooth part of [`aug_value`] (everything except `w‖x‖₁`).
fn aug_grad(problem: &ConstrainedProblem, st: &AugState, x: &DVector<f64>) -> Result<DVector<f64>> {
    let mut grad = (problem.gradient)(x)?;
    if let Some((q, tau)) = &problem.linear {
        let slack = q * x - tau;
        for (i, &c) in slack.iter().enumerate() {
            let force = (st.mu_lin[i] - st.rho * c).max(0.0);
            if force > 0.0 {
                // ∂ψ/∂x = −force · ∇c, ∇c = row i of Q'
                grad -= q.row(i).transpose() * force;
            }
        }
    }
    if let Some(nl) = &problem.nonlinear {
        let c = nl.bound - (nl.value)(x)?;
        let force = (st.mu_nl - st.rho * c).max(0.0);
        if force > 0.0 {
            // ∇c = −∇value
            grad += (nl.grad)(x)? * force;
        }
    }
    Ok(grad)
}

fn project_box(x: &mut DVector<f64>) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// One proximal/projected step from `x` along `−t·grad`, soft-thresholded by
/// `t·w`, clipped to the box when `nonneg` holds.
fn prox_step(x: &DVector<f64>, grad: &DVector<f64>, t: f64, w: f64, nonneg: bool) -> DVector<f64> {
    let mut out = x - grad * t;
    if w > 0.0 {
        let thr = t * w;
        for v in out.iter_mut() {
            *v = v.signum() * (v.abs() - thr).max(0.0);
        }
    }
    if nonneg {
        project_box(&mut out);
    }
    out
}

/// Augmented-Lagrangian solve with projected-gradient inner iterations.
///
/// Rejects up front if the linear rows are unattainable even at `x = 1` (the
/// original-graph multipliers), the only point guaranteed feasible for the
/// spectral bound.
pub fn solve(problem: &ConstrainedProblem, opts: &SolverOptions) -> Result<SolverReport> {
    if problem.x0.len() != problem.dim {
        return Err(Error::Dimension(format!(
            "x0 has length {} but the problem has dimension {}",
            problem.x0.len(),
            problem.dim
        )));
    }
    let tol_lin = match &problem.linear {
        Some((q, tau)) => {
            if q.ncols() != problem.dim || q.nrows() != tau.len() {
                return Err(Error::Dimension("linear constraint shapes are inconsistent".into()));
            }
            let ones = DVector::from_element(problem.dim, 1.0);
            let worst = (tau - q * ones).max();
            if worst > 0.0 {
                return Err(Error::Infeasible(format!(
                    "connectivity threshold unattainable even at γ̄ = 1 (worst slack {worst:.3e})"
                )));
            }
            1e-6 * tau.amax()
        }
        None => 0.0,
    };

    let w = l1_weight(opts);
    let mut x = problem.x0.clone();
    if problem.nonneg {
        project_box(&mut x);
    }
    let mut st = AugState {
        mu_lin: DVector::zeros(problem.linear.as_ref().map_or(0, |(_, t)| t.len())),
        mu_nl: 0.0,
        rho: opts.rho0,
    };

    let mut history = vec![(problem.objective)(&x)? + w * x.iter().map(|v| v.abs()).sum::<f64>()];
    let mut inner_total = 0;
    let mut termination = Termination::IterationCap;
    let mut outer_done = 0;
    let mut prev_viol = f64::INFINITY;

    for outer in 0..opts.outer_cap {
        outer_done = outer + 1;
        let mut t = 1.0;
        let mut converged_inner = false;
        for _ in 0..opts.inner_cap {
            inner_total += 1;
            let val = aug_value(problem, &st, w, &x)?;
            let grad = aug_grad(problem, &st, &x)?;
            // projected-gradient optimality measure at unit step
            let pg = (&x - prox_step(&x, &grad, 1.0, w, problem.nonneg)).norm();
            if pg <= opts.grad_tol {
                converged_inner = true;
                break;
            }
            let sig = match &problem.branch_signature {
                Some(f) => Some(f(&x)?),
                None => None,
            };
            let mut accepted = false;
            let guard_floor = 1e-8 * x.norm().max(1.0);
            for _ in 0..60 {
                let cand = prox_step(&x, &grad, t, w, problem.nonneg);
                let step = (&cand - &x).norm_squared();
                if step == 0.0 {
                    break;
                }
                // branch guard: halve through piecewise-branch crossings;
                // once the step is tiny the crossing is unavoidable and
                // blocking it would pin the iterate to the branch boundary
                if step.sqrt() > guard_floor {
                    if let (Some(f), Some(s)) = (&problem.branch_signature, &sig) {
                        if &f(&cand)? != s {
                            t *= 0.5;
                            continue;
                        }
                    }
                }
                let cand_val = aug_value(problem, &st, w, &cand)?;
                if cand_val <= val - 1e-4 / t * step {
                    x = cand;
                    accepted = true;
                    t = (t * 2.0).min(1e6);
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                converged_inner = true;
                break;
            }
        }

        let viol = check_feasibility(problem, &x)?;
        let lin_viol = viol.linear.iter().cloned().fold(0.0, f64::max);
        let j = (problem.objective)(&x)? + w * x.iter().map(|v| v.abs()).sum::<f64>();
        history.push(j);
        if opts.verbose {
            let zeta = match &problem.nonlinear {
                Some(nl) => (nl.value)(&x)?,
                None => 0.0,
            };
            let g = aug_grad(problem, &st, &x)?.norm();
            println!(
                "iter {outer}, J = {j:.6e}, ‖grad‖ = {g:.3e}, max_violation = {:.3e}, ζ̄ = {zeta:.6e}",
                viol.max()
            );
        }
        if converged_inner && lin_viol <= tol_lin && viol.nonlinear <= opts.tol_nl {
            termination = Termination::Converged;
            break;
        }

        // first-order multiplier updates, then tighten the penalty if the
        // violation is not shrinking fast enough
        if let Some((q, tau)) = &problem.linear {
            let slack = q * &x - tau;
            for (i, &c) in slack.iter().enumerate() {
                st.mu_lin[i] = (st.mu_lin[i] - st.rho * c).max(0.0);
            }
        }
        if let Some(nl) = &problem.nonlinear {
            let c = nl.bound - (nl.value)(&x)?;
            st.mu_nl = (st.mu_nl - st.rho * c).max(0.0);
        }
        let v = viol.max();
        if v > 0.25 * prev_viol {
            st.rho = (st.rho * 10.0).min(1e12);
        }
        prev_viol = v;
    }

    let violations = check_feasibility(problem, &x)?;
    Ok(SolverReport {
        x,
        objective_history: history,
        violations,
        outer_iterations: outer_done,
        inner_iterations: inner_total,
        termination,
    })
}
