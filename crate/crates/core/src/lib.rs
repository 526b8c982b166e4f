//! Sparsification of weighted undirected graphs that preserves reaction-diffusion
//! dynamics.
//!
//! The toolkit removes and reweights edges so that trajectories of a
//! reaction-diffusion system (or a linear diffusion system) on the sparsified
//! graph stay close to trajectories on the original graph. The core machinery:
//!
//! * [`graphcore`] — weighted graphs, incidence matrices, and multiplier-scaled
//!   Laplacians `L(γ) = Bᵀ W^{1/2} diag(γ) W^{1/2} B`.
//! * [`dynamics`] — full-order Brusselator / heat-kernel simulators and
//!   dispersion-relation stability classification.
//! * [`rom`] — POD basis construction and the reduced-order vector fields with
//!   analytic Jacobians.
//! * [`spectral`] — cheap eigenpair estimates for the perturbed Laplacian and
//!   the spectral error functions ζ (exact) and ζ̄ (estimated), with gradient.
//! * [`adjoint`] — trajectory-misfit cost and its gradient by the discrete
//!   adjoint recursion.
//! * [`optimizer`] — augmented-Lagrangian solver with projected-gradient inner
//!   iterations, handling bounds, linear inequalities, and one nonlinear
//!   inequality.
//! * [`pipeline`] — the end-to-end sparsification procedure, edge pruning, and
//!   the correlation-coefficient evaluation.
//! * [`odenet`] — sparse parameter recovery for a small neural ODE using the
//!   same adjoint machinery.
//! * [`cli`] — batch entry points and plot-data emission.

pub mod adjoint;
pub mod cli;
pub mod dynamics;
mod error;
pub mod graphcore;
pub mod odenet;
pub mod optimizer;
pub mod pipeline;
pub mod rom;
pub mod spectral;

pub use error::{Error, Result};
