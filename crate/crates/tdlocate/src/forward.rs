//! Synthetic filtered boundary data and measurement noise.
//!
//! Data are produced directly as the filtered scattered field from the
//! leading-order small-inclusion expansion; no transmission problem is solved.

use crate::error::{invalid, Result};
use crate::greens::{curl_vector_from_geometry, dyadic_from_geometry, WaveContext};
use crate::math::{
    ccross, ccross_r, cmat_cvec, mat_cvec, norm, scale, stream, sub, Vec3C, C64, CZERO3,
};
use crate::scene::{plane_wave, Incidence, Inclusion, Materials};
use crate::math::SphereMesh;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::sync::Arc;

/// Filtered data `(½I − P^κ)[(H_ρ − H₀)×ν]` at every boundary node, one
/// column per incidence.
#[derive(Debug, Clone)]
pub struct FilteredBoundaryData {
    pub mesh: Arc<SphereMesh>,
    pub incidences: Vec<Incidence>,
    /// `values[k][i]` is the datum of incidence `k` at node `i`.
    pub values: Vec<Vec<Vec3C>>,
}

impl FilteredBoundaryData {
    pub fn zeros(mesh: Arc<SphereMesh>, incidences: Vec<Incidence>) -> Self {
        let values = vec![vec![CZERO3; mesh.len()]; incidences.len()];
        Self { mesh, incidences, values }
    }

    /// Largest `|F·ν|` over all nodes and incidences.
    pub fn max_normal_component(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|col| col.iter().zip(&self.mesh.normals))
            .map(|(f, nu)| (f[0] * nu[0] + f[1] * nu[1] + f[2] * nu[2]).norm())
            .fold(0.0, f64::max)
    }

    /// Quadrature L² norm over all incidences.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .flat_map(|col| col.iter().zip(&self.mesh.weights))
            .map(|(f, w)| w * f.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        s.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// Only the `½I` part of the filter acts on the noise.
    Half,
    /// `½I − P^κ` with `P^κ` in its far-field form, quadratured on the mesh.
    FarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoiseSpec {
    pub sigma: f64,
    pub filter_mode: FilterMode,
    pub seed: u64,
}

/// Leading-order filtered data for every incidence.
///
/// At node `x` with normal `ν`:
/// `F = ρ³κ²(μ₁ᵣ−1)ε₀⁻¹ [Γ(z_D,x)×ν] M_μ H₀(z_D)
///    + ρ³(ε₁ᵣ−1)ε₀⁻¹ [(∇_{z_D}×Γ(x,z_D))ᵀ×ν] M_ε ∇×H₀(z_D)`.
pub fn synthesize_all(
    materials: &Materials,
    inclusion: &Inclusion,
    mesh: &Arc<SphereMesh>,
    incidences: &[Incidence],
) -> Result<FilteredBoundaryData> {
    let ctx = materials.wave()?;
    check_inside(&ctx, mesh, inclusion)?;
    let kappa = ctx.kappa;
    let rho3 = inclusion.rho.powi(3);
    let coef_mu = rho3 * kappa * kappa * (materials.mu1r() - 1.0) / ctx.eps0;
    let coef_eps = rho3 * (materials.eps1r() - 1.0) / ctx.eps0;
    let zd = inclusion.center;

    // Polarized sources at z_D, shared by every node.
    let sources: Vec<(Vec3C, Vec3C)> = incidences
        .iter()
        .map(|inc| {
            let (h, curl) = plane_wave(inc.theta, inc.pol, kappa, zd);
            (mat_cvec(&inclusion.m_mu, h), mat_cvec(&inclusion.m_eps, curl))
        })
        .collect();

    let per_node: Vec<Vec<Vec3C>> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let x = mesh.nodes[i];
            let nu = mesh.normals[i];
            let d = sub(zd, x);
            let r = norm(d);
            let rh = scale(1.0 / r, d);
            let gamma = dyadic_from_geometry(&ctx, r, rh);
            // ∇_{z_D}×Γ(x,z_D) = [c]× with c from the curl in the first slot
            // of Γ(z_D,x); its transpose is −[c]×.
            let c = curl_vector_from_geometry(&ctx, r, rh);
            sources
                .iter()
                .map(|(sm, se)| {
                    let mut f = CZERO3;
                    if coef_mu != 0.0 {
                        let t = cmat_cvec(&gamma, *sm);
                        f = ccross_r(t, nu).map(|v| v * coef_mu);
                    }
                    if coef_eps != 0.0 {
                        let t = ccross(c, *se).map(|v| -v);
                        let t = ccross_r(t, nu);
                        for k in 0..3 {
                            f[k] += coef_eps * t[k];
                        }
                    }
                    f
                })
                .collect()
        })
        .collect();

    let mut data = FilteredBoundaryData::zeros(mesh.clone(), incidences.to_vec());
    for (i, row) in per_node.into_iter().enumerate() {
        for (k, f) in row.into_iter().enumerate() {
            data.values[k][i] = f;
        }
    }
    Ok(data)
}

/// Data for a single incidence.
pub fn synthesize_filtered_data(
    materials: &Materials,
    inclusion: &Inclusion,
    mesh: &Arc<SphereMesh>,
    incidence: Incidence,
) -> Result<FilteredBoundaryData> {
    synthesize_all(materials, inclusion, mesh, &[incidence])
}

fn check_inside(ctx: &WaveContext, mesh: &SphereMesh, inclusion: &Inclusion) -> Result<()> {
    let depth = mesh.radius - norm(sub(inclusion.center, mesh.center));
    if depth <= ctx.r_min() {
        return Err(invalid("inclusion centre must lie strictly inside the boundary sphere"));
    }
    Ok(())
}

/// Circular Gaussian draws at every node: each complex component has variance
/// `σ²/wᵢ` split evenly between real and imaginary parts.
pub fn draw_noise(mesh: &SphereMesh, sigma: f64, seed: u64, incidence_index: u64) -> Vec<Vec3C> {
    let mut rng = stream(seed, "measurement-noise", incidence_index);
    mesh.weights
        .iter()
        .map(|w| {
            let s = sigma / (2.0 * w).sqrt();
            [(); 3].map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(s * re, s * im)
            })
        })
        .collect()
}

/// Filtered image of raw noise `η`: `½(η×ν)` and, in far-field mode,
/// `− (iκ/ε₀) (Σ_y w_y Γ(y,x) η(y)) × ν(x)` with the self node skipped.
pub fn filter_noise(ctx: &WaveContext, mesh: &SphereMesh, eta: &[Vec3C], mode: FilterMode) -> Vec<Vec3C> {
    let half: Vec<Vec3C> = eta
        .iter()
        .zip(&mesh.normals)
        .map(|(e, nu)| ccross_r(*e, *nu).map(|c| 0.5 * c))
        .collect();
    if mode == FilterMode::Half {
        return half;
    }
    let pref = C64::new(0.0, -ctx.kappa / ctx.eps0);
    (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let x = mesh.nodes[i];
            let mut acc = CZERO3;
            for (j, y) in mesh.nodes.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = sub(*y, x);
                let r = norm(d);
                let g = dyadic_from_geometry(ctx, r, scale(1.0 / r, d));
                let v = cmat_cvec(&g, eta[j]);
                for k in 0..3 {
                    acc[k] += mesh.weights[j] * v[k];
                }
            }
            let p = ccross_r(acc, mesh.normals[i]);
            [0, 1, 2].map(|k| half[i][k] + pref * p[k])
        })
        .collect()
}

/// Adds filtered measurement noise, independent across nodes, components
/// and incidences.
pub fn inject_measurement_noise(
    data: &FilteredBoundaryData,
    spec: &MeasurementNoiseSpec,
    ctx: &WaveContext,
) -> Result<FilteredBoundaryData> {
    if !(spec.sigma >= 0.0) {
        return Err(invalid("measurement noise sigma must be >= 0"));
    }
    let mut out = data.clone();
    if spec.sigma == 0.0 {
        return Ok(out);
    }
    for (k, col) in out.values.iter_mut().enumerate() {
        let eta = draw_noise(&data.mesh, spec.sigma, spec.seed, k as u64);
        let f = filter_noise(ctx, &data.mesh, &eta, spec.filter_mode);
        for (v, n) in col.iter_mut().zip(f) {
            for c in 0..3 {
                v[c] += n[c];
            }
        }
    }
    Ok(out)
}

/// Adds `scale·ρ⁴` times a smooth random tangential field, a stand-in for the
/// neglected higher-order terms of the expansion.
pub fn perturb_higher_order(data: &FilteredBoundaryData, kappa: f64, rho: f64, scale_factor: f64, seed: u64) -> FilteredBoundaryData {
    let mut out = data.clone();
    if scale_factor == 0.0 {
        return out;
    }
    let amp = scale_factor * rho.powi(4);
    for (k, col) in out.values.iter_mut().enumerate() {
        let mut rng = stream(seed, "higher-order", k as u64);
        let modes: Vec<(Vec3C, [f64; 3])> = (0..4)
            .map(|_| {
                let a = [(); 3].map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
                let d: [f64; 3] = [(); 3].map(|_| rng.sample(StandardNormal));
                let n = norm(d);
                (a, scale(1.0 / n, d))
            })
            .collect();
        for (i, v) in col.iter_mut().enumerate() {
            let x = data.mesh.nodes[i];
            let mut c = CZERO3;
            for (a, d) in &modes {
                let e = C64::from_polar(amp, kappa * crate::math::dot(*d, x));
                for q in 0..3 {
                    c[q] += e * a[q];
                }
            }
            let t = ccross_r(c, data.mesh.normals[i]);
            for q in 0..3 {
                v[q] += t[q];
            }
        }
    }
    out
}
