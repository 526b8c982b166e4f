//! POD basis construction and the reduced-order vector fields with analytic
//! Jacobians.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::dynamics::BrusselatorParams;
use crate::graphcore::{dense_symmetric_eigen, fix_sign, Multipliers, WeightedGraph};
use crate::{Error, Result};

/// Singular values below `RANK_TOL · σ_max` do not count toward the numerical
/// rank of the centered snapshot matrix.
const RANK_TOL: f64 = 1e-12;

/// A POD projection: `ρ` is `k×d` with orthonormal rows, `x̄` the ensemble mean.
#[derive(Debug, Clone)]
pub struct PodBasis {
    rho: DMatrix<f64>,
    xbar: DVector<f64>,
}

impl PodBasis {
    pub fn from_parts(rho: DMatrix<f64>, xbar: DVector<f64>) -> Result<Self> {
        if rho.ncols() != xbar.len() {
            return Err(Error::Dimension(format!(
                "ρ has {} columns but x̄ has length {}",
                rho.ncols(),
                xbar.len()
            )));
        }
        if rho.nrows() > rho.ncols() {
            return Err(Error::Dimension("reduced dimension k exceeds full dimension d".into()));
        }
        let gram = &rho * rho.transpose();
        let k = rho.nrows();
        if (gram - DMatrix::identity(k, k)).norm() > 1e-10 {
            return Err(Error::Numerical("rows of ρ are not orthonormal".into()));
        }
        Ok(Self { rho, xbar })
    }

    pub fn k(&self) -> usize {
        self.rho.nrows()
    }

    pub fn d(&self) -> usize {
        self.rho.ncols()
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn xbar(&self) -> &DVector<f64> {
        &self.xbar
    }

    /// `z = ρ(x − x̄)`.
    pub fn reduce(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.d() {
            return Err(Error::Dimension(format!(
                "state has length {} but basis expects {}",
                x.len(),
                self.d()
            )));
        }
        Ok(&self.rho * (x - &self.xbar))
    }

    /// `x = ρᵀz + x̄`.
    pub fn lift(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.k() {
            return Err(Error::Dimension(format!(
                "reduced state has length {} but basis has k = {}",
                z.len(),
                self.k()
            )));
        }
        Ok(self.rho.transpose() * z + &self.xbar)
    }

    /// Writes `<prefix>.json` (k, d, checksum) and `<prefix>.csv` (rows of ρ,
    /// then x̄ as the last row), with 17-significant-digit floats.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let mut csv = String::new();
        let fmt_row = |row: &[f64]| {
            row.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",")
        };
        for i in 0..self.k() {
            let row: Vec<f64> = self.rho.row(i).iter().copied().collect();
            csv.push_str(&fmt_row(&row));
            csv.push('\n');
        }
        let xb: Vec<f64> = self.xbar.iter().copied().collect();
        csv.push_str(&fmt_row(&xb));
        csv.push('\n');
        let header = serde_json::json!({
            "k": self.k(),
            "d": self.d(),
            "checksum": format!("{:016x}", fnv1a(csv.as_bytes())),
        });
        std::fs::write(prefix.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
        std::fs::write(prefix.with_extension("csv"), csv)?;
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            k: usize,
            d: usize,
            checksum: String,
        }
        let header: Header =
            serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json"))?)
                .map_err(|e| Error::Parse(format!("basis header: {e}")))?;
        let csv = std::fs::read_to_string(prefix.with_extension("csv"))?;
        if format!("{:016x}", fnv1a(csv.as_bytes())) != header.checksum {
            return Err(Error::Parse("basis checksum mismatch".into()));
        }
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .map(|l| {
                l.split(',')
                    .map(|t| t.trim().parse().map_err(|e| Error::Parse(format!("basis csv: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != header.k + 1 {
            return Err(Error::Parse(format!(
                "basis csv has {} rows, expected k+1 = {}",
                rows.len(),
                header.k + 1
            )));
        }
        let rho = DMatrix::from_fn(header.k, header.d, |i, j| rows[i][j]);
        let xbar = DVector::from_column_slice(&rows[header.k]);
        Self::from_parts(rho, xbar)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Builds a rank-`k` POD basis from a `d×S` snapshot matrix.
///
/// The rows of `ρ` are the `k` leading eigenvectors of the snapshot covariance,
/// descending eigenvalue order, largest-magnitude component positive. The
/// covariance eigenproblem is solved through the `S×S` Gram matrix when
/// `S < d`.
pub fn pod_basis(snapshots: &DMatrix<f64>, k: usize) -> Result<PodBasis> {
    let (d, s) = snapshots.shape();
    if k == 0 || k > d.min(s) {
        return Err(Error::InvalidArgument(format!("k = {k} out of range [1, min({d},{s})]")));
    }
    let xbar = DVector::from_fn(d, |i, _| snapshots.row(i).sum() / s as f64);
    let mut centered = snapshots.clone();
    for mut col in centered.column_iter_mut() {
        col -= &xbar;
    }
    let (sigmas, modes) = if s < d {
        // Gram trick: eigenvectors v of ZᵀZ give left modes Z v / σ.
        let gram = centered.transpose() * &centered;
        let (vals, vecs) = dense_symmetric_eigen(&gram)?;
        let mut sigmas = Vec::new();
        let mut modes = Vec::new();
        for i in (0..s).rev() {
            let sigma = vals[i].max(0.0).sqrt();
            sigmas.push(sigma);
            if sigma > 0.0 {
                let mut u = &centered * &vecs[i] / sigma;
                let norm = u.norm();
                if norm > 0.0 {
                    u /= norm;
                }
                fix_sign(&mut u);
                modes.push(u);
            }
        }
        (sigmas, modes)
    } else {
        let cov = &centered * centered.transpose();
        let (vals, vecs) = dense_symmetric_eigen(&cov)?;
        let sigmas: Vec<f64> = (0..d).rev().map(|i| vals[i].max(0.0).sqrt()).collect();
        let modes: Vec<DVector<f64>> = (0..d).rev().map(|i| vecs[i].clone()).collect();
        (sigmas, modes)
    };
    let sigma_max = sigmas.first().copied().unwrap_or(0.0);
    let rank = sigmas.iter().filter(|&&s| s > RANK_TOL * sigma_max && s > 0.0).count();
    if k > rank {
        return Err(Error::RankDeficient { requested: k, attainable: rank });
    }
    let mut rho = DMatrix::zeros(k, d);
    for i in 0..k {
        rho.row_mut(i).copy_from(&modes[i].transpose());
    }
    PodBasis::from_parts(rho, xbar)
}

/// `z₀ = ρ(x₀ − x̄)`.
pub fn reduce_ic(x0: &DVector<f64>, basis: &PodBasis) -> Result<DVector<f64>> {
    basis.reduce(x0)
}

/// Which full-order system the reduced model mirrors.
#[derive(Debug, Clone, Copy)]
pub enum ReducedSystem {
    /// Linear diffusion `ẋ = −L(γ̄)x`; full dimension `n`.
    Linear,
    /// Brusselator reaction-diffusion; full dimension `2n`.
    Brusselator(BrusselatorParams),
}

/// Reduced-order model bound to a graph and a POD basis. Field and Jacobian
/// evaluations are pure; the struct is safe to share across threads.
#[derive(Debug, Clone)]
pub struct RomModel<'a> {
    g: &'a WeightedGraph,
    basis: &'a PodBasis,
    system: ReducedSystem,
}

impl<'a> RomModel<'a> {
    pub fn new(g: &'a WeightedGraph, basis: &'a PodBasis, system: ReducedSystem) -> Result<Self> {
        let expected = match system {
            ReducedSystem::Linear => g.n(),
            ReducedSystem::Brusselator(_) => 2 * g.n(),
        };
        if basis.d() != expected {
            return Err(Error::Dimension(format!(
                "basis has full dimension {} but the system needs {expected}",
                basis.d()
            )));
        }
        Ok(Self { g, basis, system })
    }

    pub fn graph(&self) -> &WeightedGraph {
        self.g
    }

    pub fn basis(&self) -> &PodBasis {
        self.basis
    }

    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn m(&self) -> usize {
        self.g.m()
    }

    /// ψ(z, γ̄): the reduced vector field.
    pub fn field(&self, z: &DVector<f64>, gamma: &Multipliers) -> Result<DVector<f64>> {
        let u = self.basis.lift(z)?;
        let full = self.full_field(&u, gamma)?;
        let out = self.basis.rho() * full;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("reduced field produced a non-finite value".into()));
        }
        Ok(out)
    }

    fn full_field(&self, u: &DVector<f64>, gamma: &Multipliers) -> Result<DVector<f64>> {
        match self.system {
            ReducedSystem::Linear => Ok(-self.g.laplacian_apply(gamma, u)?),
            ReducedSystem::Brusselator(p) => {
                crate::dynamics::brusselator_field(u, self.g, gamma, &p)
            }
        }
    }

    /// `D_z ψ` (k×k), analytic.
    pub fn jac_z(&self, z: &DVector<f64>, gamma: &Multipliers) -> Result<DMatrix<f64>> {
        let k = self.k();
        let u = self.basis.lift(z)?;
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let dir = self.basis.rho().row(j).transpose();
            let jv = match self.system {
                ReducedSystem::Linear => -self.g.laplacian_apply(gamma, &dir)?,
                ReducedSystem::Brusselator(p) => {
                    crate::dynamics::brusselator_jvp(&u, &dir, self.g, gamma, &p)?
                }
            };
            jac.set_column(j, &(self.basis.rho() * jv));
        }
        Ok(jac)
    }

    /// `D_γ̄ ψ` (k×m), analytic: column `j` depends only on edge `j`'s
    /// incidence rows.
    pub fn jac_gamma(&self, z: &DVector<f64>, _gamma: &Multipliers) -> Result<DMatrix<f64>> {
        let k = self.k();
        let m = self.g.m();
        let u = self.basis.lift(z)?;
        let mut jac = DMatrix::zeros(k, m);
        let rho = self.basis.rho();
        match self.system {
            ReducedSystem::Linear => {
                for (e, &(a, b)) in self.g.edges().iter().enumerate() {
                    let w = self.g.weights()[e];
                    let flow = w * (u[a] - u[b]);
                    for i in 0..k {
                        jac[(i, e)] = -flow * (rho[(i, a)] - rho[(i, b)]);
                    }
                }
            }
            ReducedSystem::Brusselator(p) => {
                let n = self.g.n();
                for (e, &(a, b)) in self.g.edges().iter().enumerate() {
                    let w = self.g.weights()[e];
                    let flow_x = w * (u[a] - u[b]);
                    let flow_y = w * (u[n + a] - u[n + b]);
                    for i in 0..k {
                        let bx = rho[(i, a)] - rho[(i, b)];
                        let by = rho[(i, n + a)] - rho[(i, n + b)];
                        jac[(i, e)] = -p.d_x * flow_x * bx - p.d_y * flow_y * by;
                    }
                }
            }
        }
        Ok(jac)
    }
}

/// Reduced linear-diffusion field `ż = −ρ L̄ ρᵀ z − ρ L̄ x̄`.
pub fn reduced_linear_field(
    z: &DVector<f64>,
    g: &WeightedGraph,
    gamma: &Multipliers,
    basis: &PodBasis,
) -> Result<DVector<f64>> {
    RomModel::new(g, basis, ReducedSystem::Linear)?.field(z, gamma)
}

/// Reduced Brusselator field ψ(z, γ̄): reaction block lifted through the basis,
/// diffusion applied species-blockwise with the multiplier-scaled Laplacian.
pub fn reduced_brusselator_field(
    z: &DVector<f64>,
    g: &WeightedGraph,
    gamma: &Multipliers,
    p: &BrusselatorParams,
    basis: &PodBasis,
) -> Result<DVector<f64>> {
    RomModel::new(g, basis, ReducedSystem::Brusselator(*p))?.field(z, gamma)
}

/// Analytic Jacobians `(D_z ψ, D_γ̄ ψ)` of the reduced Brusselator field.
pub fn reduced_jacobians(
    z: &DVector<f64>,
    g: &WeightedGraph,
    gamma: &Multipliers,
    p: &BrusselatorParams,
    basis: &PodBasis,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let model = RomModel::new(g, basis, ReducedSystem::Brusselator(*p))?;
    Ok((model.jac_z(z, gamma)?, model.jac_gamma(z, gamma)?))
}
