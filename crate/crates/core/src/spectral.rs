//! Perturbed-eigenpair estimation, the exact and approximate spectral error
//! functions ζ and ζ̄, the piecewise discontinuity repair, and the ζ̄ gradient.
//!
//! For a multiplier vector γ̄ the perturbed Laplacian is `L̃ = L + E` with
//! `E = Bᵀ W^{1/2} diag(γ̄ − 1) W^{1/2} B`. Each preserved eigenpair (λᵢ, φᵢ)
//! of `L` is mapped to an estimate (λ̃ᵢ, φ̃ᵢ) of the corresponding eigenpair of
//! `L̃` by one Rayleigh-iteration step started at φᵢ, with a four-case
//! piecewise repair at the discontinuities of that map.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graphcore::{dense_symmetric_eigen, laplacian, Multipliers, SpectralReference, WeightedGraph};
use crate::{Error, Result};

/// `|ε|` and `‖Eφ‖` below this fraction of `‖E‖₂` count as zero.
const DEGEN_EPS_REL: f64 = 1e-12;
/// `‖M a‖` below this fraction of `‖a‖` selects the exact-shift branch.
const DEGEN_MA_REL: f64 = 1e-10;
/// `‖(‖a‖²/denom)·a − φ‖` below this selects the `y = 0` branch.
const Y_ZERO_TOL: f64 = 1e-10;
/// Relative tolerance of the power iteration for `‖E‖₂`.
const POWER_TOL: f64 = 1e-6;
/// Reference eigenvalues closer than this (relative) form a degenerate cluster.
const CLUSTER_TOL: f64 = 1e-8;

/// Which branch of the piecewise eigenpair repair was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `Eφᵢ = 0`: the original eigenpair is exact.
    Unperturbed,
    /// `yᵢ = 0`, `Eφᵢ ≠ 0`: Rayleigh quotient of `a` in `Mᵢ`, vector kept.
    RayleighOfA,
    /// `Mᵢa = 0`: `(λᵢ + ε, a/‖a‖)` is an exact eigenpair of `L̃`.
    ShiftedExact,
    /// The generic estimate `(r(yᵢ), yᵢ/‖yᵢ‖)`.
    Generic,
    /// ε and the denominator both vanished: fall back to `(λᵢ + ε, φᵢ)`.
    DegenerateFallback,
    /// Repeated reference eigenvalue: eigenpair of `Φ_cᵀ(L+E)Φ_c` over the
    /// degenerate cluster, which resolves the splitting a single-vector
    /// estimate cannot see.
    Cluster,
}

/// One estimated eigenpair with its provenance.
#[derive(Debug, Clone)]
pub struct EigenpairEstimate {
    pub lambda: f64,
    /// Unit vector, sign-aligned so that `⟨φ̃ᵢ, φᵢ⟩ ≥ 0`.
    pub phi: DVector<f64>,
    /// `⟨φ̃ᵢ, φᵢ⟩` after alignment.
    pub overlap: f64,
    pub branch: Branch,
    /// True when the declared-degenerate fallback was used.
    pub degenerate: bool,
}

/// Value and per-mode bookkeeping of one ζ̄ evaluation.
#[derive(Debug, Clone)]
pub struct ZetaEvaluation {
    pub value: f64,
    pub zeta_l: f64,
    pub zeta_q: f64,
    /// Indices of modes that hit the declared-degenerate fallback.
    pub degenerate_modes: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct ModeDiagnostic {
    mode: usize,
    branch: Branch,
    lambda_ref: f64,
    lambda_est: f64,
    overlap: f64,
    residual: f64,
    bound: f64,
}

/// Everything needed to evaluate the spectral constraint for one graph:
/// the reference eigenpairs and matrix-free handles for `E(γ̄)`.
///
/// The context is immutable after construction; evaluations take γ̄ by
/// reference and may run mode-wise in parallel.
#[derive(Debug, Clone)]
pub struct PerturbationContext<'a> {
    g: &'a WeightedGraph,
    reference: SpectralReference,
    sqrt_w: Vec<f64>,
    /// Σᵢ λᵢ² over the preserved modes (normalizer of ζ_l).
    lambda_sq_sum: f64,
    /// Per mode, the `[start, end)` index range of its degenerate reference
    /// cluster (length 1 for simple eigenvalues).
    cluster_span: Vec<(usize, usize)>,
}

/// Intermediates of one mode's estimate, kept for the gradient.
struct ModeWork {
    lambda_ref: f64,
    estimate: EigenpairEstimate,
    /// sign flip applied during alignment (±1)
    sign: f64,
    a: DVector<f64>,
    ma: DVector<f64>,
    eps: f64,
    denom: f64,
    alpha: f64,
    /// generic branch only
    y: Option<DVector<f64>>,
    lt_y: Option<DVector<f64>>,
    /// cluster branch only
    cluster: Option<ClusterWork>,
}

/// Eigendecomposition of the cluster-projected perturbed block, kept for the
/// gradient. `vecs` columns follow `theta`, both in descending-root order.
struct ClusterWork {
    start: usize,
    /// This mode's rank inside the cluster.
    pos: usize,
    theta: Vec<f64>,
    vecs: DMatrix<f64>,
}

impl<'a> PerturbationContext<'a> {
    pub fn new(g: &'a WeightedGraph, reference: SpectralReference) -> Result<Self> {
        if reference.n != g.n() {
            return Err(Error::Dimension(format!(
                "reference is for {} vertices but graph has {}",
                reference.n,
                g.n()
            )));
        }
        if reference.n_p() == 0 {
            return Err(Error::InvalidArgument("reference holds no modes".into()));
        }
        for (i, v) in reference.eigenvectors.iter().enumerate() {
            if (v.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "reference eigenvector {i} is not unit norm"
                )));
            }
            for (j, u) in reference.eigenvectors[..i].iter().enumerate() {
                if v.dot(u).abs() > 1e-8 {
                    return Err(Error::InvalidArgument(format!(
                        "reference eigenvectors {j} and {i} are not orthogonal"
                    )));
                }
            }
        }
        let lambda_sq_sum: f64 = reference.eigenvalues.iter().map(|l| l * l).sum();
        if lambda_sq_sum <= 0.0 {
            return Err(Error::InvalidArgument(
                "all preserved eigenvalues are zero; ζ is undefined".into(),
            ));
        }
        let sqrt_w = g.weights().iter().map(|w| w.sqrt()).collect();
        let n_p = reference.n_p();
        let mut cluster_span = vec![(0usize, 0usize); n_p];
        let mut start = 0;
        while start < n_p {
            let mut end = start + 1;
            while end < n_p {
                let prev = reference.eigenvalues[end - 1];
                if (reference.eigenvalues[end] - prev).abs() <= CLUSTER_TOL * prev.abs().max(1.0) {
                    end += 1;
                } else {
                    break;
                }
            }
            for s in cluster_span.iter_mut().take(end).skip(start) {
                *s = (start, end);
            }
            start = end;
        }
        Ok(Self { g, reference, sqrt_w, lambda_sq_sum, cluster_span })
    }

    pub fn reference(&self) -> &SpectralReference {
        &self.reference
    }

    pub fn graph(&self) -> &WeightedGraph {
        self.g
    }

    pub fn n_p(&self) -> usize {
        self.reference.n_p()
    }

    /// `E(γ̄)·v`, matrix-free in O(m).
    pub fn perturbation_apply(&self, gamma: &Multipliers, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(gamma)?;
        if v.len() != self.g.n() {
            return Err(Error::Dimension(format!(
                "vector has length {} but graph has {} vertices",
                v.len(),
                self.g.n()
            )));
        }
        let mut out = DVector::zeros(self.g.n());
        for (e, &(u, w)) in self.g.edges().iter().enumerate() {
            let c = self.g.weights()[e] * (gamma.as_slice()[e] - 1.0) * (v[u] - v[w]);
            out[u] += c;
            out[w] -= c;
        }
        Ok(out)
    }

    fn check(&self, gamma: &Multipliers) -> Result<()> {
        if gamma.len() != self.g.m() {
            return Err(Error::Dimension(format!(
                "multiplier vector has length {} but graph has {} edges",
                gamma.len(),
                self.g.m()
            )));
        }
        Ok(())
    }

    /// `‖E(γ̄)‖₂` by power iteration on the matrix-free operator.
    pub fn e_norm(&self, gamma: &Multipliers) -> Result<f64> {
        self.check(gamma)?;
        let n = self.g.n();
        if self.g.m() == 0 || gamma.as_slice().iter().all(|&g| g == 1.0) {
            return Ok(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        v /= v.norm();
        let mut prev = 0.0;
        for _ in 0..1000 {
            let u = self.perturbation_apply(gamma, &v)?;
            let norm = u.norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            v = u / norm;
            if (norm - prev).abs() <= POWER_TOL * norm {
                return Ok(norm);
            }
            prev = norm;
        }
        Ok(prev)
    }

    /// `b_jᵀ x = √w_j (x_u − x_v)` for edge `j = (u, v)`.
    fn bt_dot(&self, j: usize, x: &DVector<f64>) -> f64 {
        let (u, v) = self.g.edges()[j];
        self.sqrt_w[j] * (x[u] - x[v])
    }

    fn mode_work(&self, gamma: &Multipliers, i: usize, e_norm: f64) -> Result<ModeWork> {
        if i >= self.n_p() {
            return Err(Error::InvalidArgument(format!(
                "mode {i} out of range [0, {})",
                self.n_p()
            )));
        }
        let phi = &self.reference.eigenvectors[i];
        let lam = self.reference.eigenvalues[i];
        let a = self.perturbation_apply(gamma, phi)?;
        let a_norm = a.norm();
        let case1 = |branch| ModeWork {
            lambda_ref: lam,
            estimate: EigenpairEstimate {
                lambda: lam,
                phi: phi.clone(),
                overlap: 1.0,
                branch,
                degenerate: false,
            },
            sign: 1.0,
            a: a.clone(),
            ma: DVector::zeros(phi.len()),
            eps: 0.0,
            denom: 0.0,
            alpha: 0.0,
            y: None,
            lt_y: None,
            cluster: None,
        };
        if a_norm <= DEGEN_EPS_REL * e_norm || a_norm == 0.0 {
            return Ok(case1(Branch::Unperturbed));
        }
        let eps = phi.dot(&a);
        let shift = lam + eps;
        // M·a = (L + E − (λ + ε)I)·a
        let ma = self.g.laplacian_apply(gamma, &a)? - &a * shift;
        let ma_norm = ma.norm();
        if ma_norm <= DEGEN_MA_REL * a_norm {
            // a is an exact eigenvector of L̃ at λ + ε
            let mut phi_t = &a / a_norm;
            let mut overlap = phi_t.dot(phi);
            let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
            phi_t *= sign;
            overlap *= sign;
            return Ok(ModeWork {
                lambda_ref: lam,
                estimate: EigenpairEstimate {
                    lambda: shift,
                    phi: phi_t,
                    overlap,
                    branch: Branch::ShiftedExact,
                    degenerate: false,
                },
                sign,
                a,
                ma,
                eps,
                denom: 0.0,
                alpha: 0.0,
                y: None,
                lt_y: None,
                cluster: None,
            });
        }
        let (c_start, c_end) = self.cluster_span[i];
        if c_end - c_start >= 2 {
            // repeated reference eigenvalue: resolve the splitting inside the
            // degenerate eigenspace instead of perturbing a single mode
            return self.cluster_mode_work(gamma, i, c_start, c_end, a);
        }
        let denom = a.dot(&ma);
        let eps_degenerate = eps.abs() <= DEGEN_EPS_REL * e_norm;
        let denom_degenerate = denom.abs() <= 1e-12 * a_norm * ma_norm;
        if eps_degenerate && denom_degenerate {
            let mut work = case1(Branch::DegenerateFallback);
            work.estimate.lambda = shift;
            work.estimate.degenerate = true;
            work.eps = eps;
            work.ma = ma;
            return Ok(work);
        }
        if denom == 0.0 || eps == 0.0 {
            // exact zero in a single factor: no finite y exists
            let mut work = case1(Branch::DegenerateFallback);
            work.estimate.lambda = shift;
            work.estimate.degenerate = true;
            work.eps = eps;
            work.ma = ma;
            work.denom = denom;
            return Ok(work);
        }
        let alpha = a.norm_squared() / denom;
        let v = &a * alpha - phi;
        if v.norm() <= Y_ZERO_TOL {
            // y = 0: keep φ, take the Rayleigh quotient of a in M
            let mut work = case1(Branch::RayleighOfA);
            work.estimate.lambda = denom / a.norm_squared();
            work.eps = eps;
            work.ma = ma;
            work.denom = denom;
            work.alpha = alpha;
            return Ok(work);
        }
        let y = v / eps;
        let lt_y = self.g.laplacian_apply(gamma, &y)?;
        let y2 = y.norm_squared();
        let lambda_hat = y.dot(&lt_y) / y2;
        let y_norm = y2.sqrt();
        let mut phi_t = &y / y_norm;
        let mut overlap = phi_t.dot(phi);
        let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
        phi_t *= sign;
        overlap *= sign;
        Ok(ModeWork {
            lambda_ref: lam,
            estimate: EigenpairEstimate {
                lambda: lambda_hat,
                phi: phi_t,
                overlap,
                branch: Branch::Generic,
                degenerate: false,
            },
            sign,
            a,
            ma,
            eps,
            denom,
            alpha,
            y: Some(y),
            lt_y: Some(lt_y),
            cluster: None,
        })
    }

    /// Estimated eigenpair of `L + E(γ̄)` for preserved mode `i`.
    pub fn eigenpair_estimate(&self, gamma: &Multipliers, i: usize) -> Result<EigenpairEstimate> {
        let e_norm = self.e_norm(gamma)?;
        Ok(self.mode_work(gamma, i, e_norm)?.estimate)
    }

    /// Residual `‖(L + E − λ̃ᵢ I)φ̃ᵢ‖₂` and the bound `τ + ‖E‖₂` with
    /// `τ = max(|λ_n − λ₂(L+E)|, λ_n(L+E))`. Dense eigensolver for the
    /// perturbed extremes (diagnostic, desk scale).
    pub fn residual_bound_check(&self, gamma: &Multipliers, i: usize) -> Result<(f64, f64)> {
        let e_norm = self.e_norm(gamma)?;
        let est = self.mode_work(gamma, i, e_norm)?.estimate;
        let lphi = self.g.laplacian_apply(gamma, &est.phi)?;
        let residual = (lphi - &est.phi * est.lambda).norm();
        let lt = laplacian(self.g, gamma)?;
        let (vals, _) = dense_symmetric_eigen(&lt)?;
        let n = self.g.n();
        let lambda2_pert = if n >= 2 { vals[1] } else { vals[0] };
        let lambdan_pert = vals[n - 1];
        let tau = (self.reference.lambda_n - lambda2_pert).abs().max(lambdan_pert);
        Ok((residual, tau + e_norm))
    }

    /// Eigenpair estimate for a mode whose reference eigenvalue is repeated:
    /// diagonalize `P = Φ_cᵀ(L+E)Φ_c` over the cluster and take this mode's
    /// root and rotated vector. A single-vector correction cannot resolve how
    /// the perturbation splits a degenerate eigenspace; the projected block
    /// can.
    fn cluster_mode_work(
        &self,
        gamma: &Multipliers,
        i: usize,
        start: usize,
        end: usize,
        a: DVector<f64>,
    ) -> Result<ModeWork> {
        let size = end - start;
        let pos = i - start;
        let members = &self.reference.eigenvectors[start..end];
        let mut p = DMatrix::zeros(size, size);
        for (c, phi_c) in members.iter().enumerate() {
            let e_phi = self.perturbation_apply(gamma, phi_c)?;
            for (r, phi_r) in members.iter().enumerate() {
                p[(r, c)] = phi_r.dot(&e_phi);
            }
            p[(c, c)] += self.reference.eigenvalues[start + c];
        }
        // symmetrize away the O(ulp) asymmetry of the two projections
        p = (&p + p.transpose()) * 0.5;
        let (vals, vecs) = dense_symmetric_eigen(&p)?;
        // descending roots to match the reference ordering
        let theta: Vec<f64> = vals.iter().rev().copied().collect();
        let mut vmat = DMatrix::zeros(size, size);
        for (col, v) in vecs.iter().rev().enumerate() {
            vmat.set_column(col, v);
        }
        let v = vmat.column(pos).clone_owned();
        let mut phi_t = DVector::zeros(self.g.n());
        for (r, phi_r) in members.iter().enumerate() {
            phi_t += phi_r * v[r];
        }
        let mut overlap = v[pos];
        let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
        phi_t *= sign;
        overlap *= sign;
        if sign < 0.0 {
            let mut col = vmat.column_mut(pos);
            col *= -1.0;
        }
        Ok(ModeWork {
            lambda_ref: self.reference.eigenvalues[i],
            estimate: EigenpairEstimate {
                lambda: theta[pos],
                phi: phi_t,
                overlap,
                branch: Branch::Cluster,
                degenerate: false,
            },
            sign,
            a,
            ma: DVector::zeros(self.g.n()),
            eps: 0.0,
            denom: 0.0,
            alpha: 0.0,
            y: None,
            lt_y: None,
            cluster: Some(ClusterWork { start, pos, theta, vecs: vmat }),
        })
    }

    fn zeta_from_works(&self, works: &[ModeWork]) -> ZetaEvaluation {
        let n_p = self.n_p() as f64;
        let mut lin = 0.0;
        let mut quad = 0.0;
        let mut degenerate_modes = Vec::new();
        for (i, w) in works.iter().enumerate() {
            let dl = w.estimate.lambda - w.lambda_ref;
            lin += dl * dl;
            let dq = w.estimate.overlap - 1.0;
            quad += dq * dq;
            if w.estimate.degenerate {
                degenerate_modes.push(i);
            }
        }
        let zeta_l = lin / (n_p * self.lambda_sq_sum);
        let zeta_q = quad / n_p;
        ZetaEvaluation {
            value: self.reference.n as f64 * zeta_l + zeta_q,
            zeta_l,
            zeta_q,
            degenerate_modes,
        }
    }

    /// ζ̄(γ̄): the spectral error using the estimated eigenpairs. Modes are
    /// evaluated in parallel and reduced in fixed index order, so the result
    /// is bit-identical to [`Self::zeta_approx_serial`].
    pub fn zeta_approx(&self, gamma: &Multipliers) -> Result<ZetaEvaluation> {
        let e_norm = self.e_norm(gamma)?;
        let works: Vec<ModeWork> = (0..self.n_p())
            .into_par_iter()
            .map(|i| self.mode_work(gamma, i, e_norm))
            .collect::<Result<_>>()?;
        Ok(self.zeta_from_works(&works))
    }

    /// Sequential reference evaluation of ζ̄ (also the baseline for the
    /// parallel-speedup benchmark).
    pub fn zeta_approx_serial(&self, gamma: &Multipliers) -> Result<ZetaEvaluation> {
        let e_norm = self.e_norm(gamma)?;
        let works: Vec<ModeWork> = (0..self.n_p())
            .map(|i| self.mode_work(gamma, i, e_norm))
            .collect::<Result<_>>()?;
        Ok(self.zeta_from_works(&works))
    }

    /// dζ̄/dγ̄: branch-consistent analytic gradient. Each per-edge term uses
    /// only the two incidence entries of that edge, so one mode costs
    /// O(m + n).
    pub fn zeta_approx_gradient(&self, gamma: &Multipliers) -> Result<DVector<f64>> {
        let e_norm = self.e_norm(gamma)?;
        let m = self.g.m();
        let n_p = self.n_p() as f64;
        let coef_l = 2.0 * self.reference.n as f64 / (n_p * self.lambda_sq_sum);
        let coef_q = 2.0 / n_p;
        let per_mode: Vec<DVector<f64>> = (0..self.n_p())
            .into_par_iter()
            .map(|i| -> Result<DVector<f64>> {
                let w = self.mode_work(gamma, i, e_norm)?;
                let mut grad = DVector::zeros(m);
                let phi = &self.reference.eigenvectors[i];
                let dl_scale = coef_l * (w.estimate.lambda - w.lambda_ref);
                let dq_scale = coef_q * (w.estimate.overlap - 1.0);
                match w.estimate.branch {
                    Branch::Unperturbed => {}
                    Branch::Cluster => {
                        let cw = w.cluster.as_ref().expect("cluster branch stores its block");
                        let size = cw.theta.len();
                        let members =
                            &self.reference.eigenvectors[cw.start..cw.start + size];
                        let p = cw.pos;
                        for j in 0..m {
                            // ∂P/∂γ_j = ccᵀ with c_r = b_jᵀφ_r, so in the
                            // block's eigenbasis ∂P couples through g = Vᵀc
                            let c: Vec<f64> =
                                members.iter().map(|phi_r| self.bt_dot(j, phi_r)).collect();
                            let g: Vec<f64> = (0..size)
                                .map(|q| {
                                    (0..size).map(|r| cw.vecs[(r, q)] * c[r]).sum::<f64>()
                                })
                                .collect();
                            let d_lambda = g[p] * g[p];
                            let mut d_v_pos = 0.0;
                            for q in 0..size {
                                if q == p {
                                    continue;
                                }
                                let gap = cw.theta[p] - cw.theta[q];
                                if gap.abs() <= 1e-12 * cw.theta[p].abs().max(1.0) {
                                    // unsplit pair: the rotation derivative
                                    // is undefined, leave it out
                                    continue;
                                }
                                d_v_pos += g[q] * g[p] / gap * cw.vecs[(p, q)];
                            }
                            grad[j] = dl_scale * d_lambda + dq_scale * d_v_pos;
                        }
                    }
                    Branch::DegenerateFallback => {
                        // λ̃ = λ + ε, φ̃ = φ: only ∂ε = (b_jᵀφ)² survives
                        for j in 0..m {
                            let c = self.bt_dot(j, phi);
                            grad[j] = dl_scale * c * c;
                        }
                    }
                    Branch::RayleighOfA => {
                        // λ̃ = aᵀMa / aᵀa, φ̃ = φ
                        let a2 = w.a.norm_squared();
                        for j in 0..m {
                            let c = self.bt_dot(j, phi);
                            let bta = self.bt_dot(j, &w.a);
                            let btma = self.bt_dot(j, &w.ma);
                            let d_eps = c * c;
                            let d_a2 = 2.0 * c * bta;
                            let d_denom = 2.0 * c * btma + bta * bta - d_eps * a2;
                            grad[j] = dl_scale * (d_denom * a2 - w.denom * d_a2) / (a2 * a2);
                        }
                    }
                    Branch::ShiftedExact => {
                        // λ̃ = λ + ε, φ̃ = s·a/‖a‖
                        let a_norm = w.a.norm();
                        let atphi = w.a.dot(phi);
                        for j in 0..m {
                            let c = self.bt_dot(j, phi);
                            let bta = self.bt_dot(j, &w.a);
                            let d_eps = c * c;
                            let d_o = w.sign
                                * (c * c / a_norm - atphi * c * bta / (a_norm * a_norm * a_norm));
                            grad[j] = dl_scale * d_eps + dq_scale * d_o;
                        }
                    }
                    Branch::Generic => {
                        let y = w.y.as_ref().expect("generic branch stores y");
                        let lt_y = w.lt_y.as_ref().expect("generic branch stores L̃y");
                        let a2 = w.a.norm_squared();
                        let y2 = y.norm_squared();
                        let y_norm = y2.sqrt();
                        let ytlty = y.dot(lt_y);
                        let atlty = w.a.dot(lt_y);
                        let aty = w.a.dot(y);
                        let ytphi = y.dot(phi);
                        let atphi = w.a.dot(phi);
                        for j in 0..m {
                            let c = self.bt_dot(j, phi);
                            let bta = self.bt_dot(j, &w.a);
                            let btma = self.bt_dot(j, &w.ma);
                            let bty = self.bt_dot(j, y);
                            let btlty = self.bt_dot(j, lt_y);
                            let d_eps = c * c;
                            let d_a2 = 2.0 * c * bta;
                            let d_denom = 2.0 * c * btma + bta * bta - d_eps * a2;
                            let d_alpha =
                                (d_a2 * w.denom - a2 * d_denom) / (w.denom * w.denom);
                            // ∂y = u1·y + u2·a + u3·b_j
                            let u1 = -d_eps / w.eps;
                            let u2 = d_alpha / w.eps;
                            let u3 = w.alpha * c / w.eps;
                            let dyt_y = u1 * y2 + u2 * aty + u3 * bty;
                            let dyt_lty = u1 * ytlty + u2 * atlty + u3 * btlty;
                            // ∂(yᵀL̃y) = 2 ∂yᵀ(L̃y) + (b_jᵀy)²  (the (b_jᵀy)² term is yᵀ(∂E)y)
                            let d_quad = 2.0 * dyt_lty + bty * bty;
                            let d_lambda = (d_quad * y2 - ytlty * 2.0 * dyt_y) / (y2 * y2);
                            let dyt_phi = u1 * ytphi + u2 * atphi + u3 * c;
                            let d_o = w.sign
                                * (dyt_phi / y_norm - ytphi * dyt_y / (y_norm * y_norm * y_norm));
                            grad[j] = dl_scale * d_lambda + dq_scale * d_o;
                        }
                    }
                }
                Ok(grad)
            })
            .collect::<Result<_>>()?;
        let mut total = DVector::zeros(m);
        for g in &per_mode {
            total += g;
        }
        Ok(total)
    }

    /// JSON diagnostic dump: per-mode branch, λ̃, ⟨φ̃, φ⟩, residual, bound.
    pub fn diagnostics_json(&self, gamma: &Multipliers) -> Result<String> {
        let mut modes = Vec::with_capacity(self.n_p());
        for i in 0..self.n_p() {
            let est = self.eigenpair_estimate(gamma, i)?;
            let (residual, bound) = self.residual_bound_check(gamma, i)?;
            modes.push(ModeDiagnostic {
                mode: i,
                branch: est.branch,
                lambda_ref: self.reference.eigenvalues[i],
                lambda_est: est.lambda,
                overlap: est.overlap,
                residual,
                bound,
            });
        }
        serde_json::to_string_pretty(&modes).map_err(|e| Error::Numerical(e.to_string()))
    }
}

/// Exact spectral error ζ = n·ζ_l + ζ_q from a dense eigendecomposition of the
/// perturbed Laplacian. Modes are matched to the reference by descending
/// eigenvalue order; within a degenerate reference cluster the overlap is
/// measured against the projection of φᵢ onto the span of the matched
/// perturbed eigenvectors (orientation-free).
pub fn zeta_exact(
    g: &WeightedGraph,
    gamma: &Multipliers,
    reference: &SpectralReference,
) -> Result<f64> {
    Ok(zeta_exact_parts(g, gamma, reference)?.0)
}

/// `(ζ, ζ_l, ζ_q)` as computed by [`zeta_exact`].
pub fn zeta_exact_parts(
    g: &WeightedGraph,
    gamma: &Multipliers,
    reference: &SpectralReference,
) -> Result<(f64, f64, f64)> {
    let n_p = reference.n_p();
    if n_p == 0 || reference.n != g.n() {
        return Err(Error::InvalidArgument("reference does not match the graph".into()));
    }
    let lt = laplacian(g, gamma)?;
    let (vals, vecs) = dense_symmetric_eigen(&lt)?;
    let n = g.n();
    // descending order to match the reference layout
    let val_desc: Vec<f64> = vals.iter().rev().take(n_p).copied().collect();
    let vec_desc: Vec<&DVector<f64>> = vecs.iter().rev().take(n_p).collect();
    // cluster exactly-repeated reference eigenvalues; within a cluster only
    // the preserved span is meaningful, not the individual vectors
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n_p {
        let joins = match clusters.last() {
            Some(c) => {
                let prev = reference.eigenvalues[*c.last().unwrap()];
                (reference.eigenvalues[i] - prev).abs() <= CLUSTER_TOL * prev.abs().max(1.0)
            }
            None => false,
        };
        if joins {
            clusters.last_mut().unwrap().push(i);
        } else {
            clusters.push(vec![i]);
        }
    }
    let lambda_sq_sum: f64 = reference.eigenvalues.iter().map(|l| l * l).sum();
    if lambda_sq_sum <= 0.0 {
        return Err(Error::InvalidArgument("all preserved eigenvalues are zero".into()));
    }
    let mut lin = 0.0;
    let mut quad = 0.0;
    for cluster in &clusters {
        for &i in cluster {
            let dl = val_desc[i] - reference.eigenvalues[i];
            lin += dl * dl;
            // projection of φ_i onto the span of the cluster's perturbed modes
            let phi = &reference.eigenvectors[i];
            let mut proj_sq = 0.0;
            for &j in cluster {
                let c = vec_desc[j].dot(phi);
                proj_sq += c * c;
            }
            let o = proj_sq.sqrt();
            quad += (o - 1.0) * (o - 1.0);
        }
    }
    let zeta_l = lin / (n_p as f64 * lambda_sq_sum);
    let zeta_q = quad / n_p as f64;
    Ok((n as f64 * zeta_l + zeta_q, zeta_l, zeta_q))
}
