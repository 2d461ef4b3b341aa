//! Monte Carlo statistics of noisy maps: measurement-noise covariance and
//! SNR, and medium-noise speckle.

use crate::error::{invalid, Error, Result};
use crate::forward::{draw_noise, FilterMode, FilteredBoundaryData};
use crate::greens::{curl_im_dyadic_green, dyadic_from_geometry, im_dyadic_green, WaveContext};
use crate::imaging::{backpropagate, direction_count, td_from_fields};
use crate::math::{
    cconj, contract_real, cross_matrix, fibonacci_sphere, frobenius_real, mat_mul, norm, scale, sub,
    transpose, ComplexMat3, Mat3, RandomField, RandomFieldSpec, SphereMesh, Vec3, Vec3C, C64, CZERO3,
};
use crate::scene::{plane_wave, Incidence, Kind, Materials, SphereConstants, TrialInclusion};
use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct MCConfig {
    pub n_trials: usize,
    pub probe_pairs: Vec<(Vec3, Vec3)>,
    pub seed: u64,
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 2 {
            return Err(Error::CheckFailed(format!(
                "Monte Carlo needs at least 2 trials, got {}",
                self.n_trials
            )));
        }
        Ok(())
    }
}

/// Linear functionals on the conjugated filtered data `W`, pulled back to
/// functionals on the conjugated raw noise `η̄`.
///
/// Each row has `3N` entries, node-major. The filter is `F = Tη` with
/// `T_ii = −½[ν_i]×` and, in far-field mode, `T_ij = (iκ/ε₀)w_j[ν_i]×Γ(x_j,x_i)`.
fn pull_back(ctx: &WaveContext, mesh: &SphereMesh, mode: FilterMode, rows: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = mesh.len();
    let half = |r: &[C64], j: usize| -> [C64; 3] {
        // r_j·(−½[ν_j]×)
        let nu = cross_matrix(mesh.normals[j]);
        [0, 1, 2].map(|b| (0..3).map(|a| r[3 * j + a] * (-0.5 * nu[a][b])).sum())
    };
    if mode == FilterMode::Half {
        return rows
            .iter()
            .map(|r| (0..n).flat_map(|j| half(r, j)).collect())
            .collect();
    }
    let pref = C64::new(0.0, -ctx.kappa / ctx.eps0);
    let cols: Vec<Vec<[C64; 3]>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc: Vec<[C64; 3]> = rows.iter().map(|r| half(r, j)).collect();
            let xj = mesh.nodes[j];
            for i in 0..n {
                if i == j {
                    continue;
                }
                let d = sub(xj, mesh.nodes[i]);
                let r = norm(d);
                let g = dyadic_from_geometry(ctx, r, scale(1.0 / r, d));
                let nu = cross_matrix(mesh.normals[i]);
                // conj(T_ij) = −(iκ/ε₀) w_j [ν_i]× conj(Γ_ij)
                let mut t = [[C64::new(0.0, 0.0); 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        let s: C64 = (0..3).map(|c| nu[a][c] * g[c][b].conj()).sum();
                        t[a][b] = pref * mesh.weights[j] * s;
                    }
                }
                for (row, out) in rows.iter().zip(acc.iter_mut()) {
                    let ri = [row[3 * i], row[3 * i + 1], row[3 * i + 2]];
                    if ri.iter().all(|c| c.norm_sqr() == 0.0) {
                        continue;
                    }
                    for b in 0..3 {
                        out[b] += ri[0] * t[0][b] + ri[1] * t[1][b] + ri[2] * t[2][b];
                    }
                }
            }
            acc
        })
        .collect();
    (0..rows.len())
        .map(|q| (0..n).flat_map(|j| cols[j][q]).collect())
        .collect()
}

/// Rows of `U(z) = −(1/ε₀)Σ w Γ(x,z)(ν×W)` as functionals on `W`.
fn backprop_rows(ctx: &WaveContext, mesh: &SphereMesh, z: Vec3) -> [Vec<C64>; 3] {
    let n = mesh.len();
    let mut rows = [vec![C64::new(0.0, 0.0); 3 * n], vec![C64::new(0.0, 0.0); 3 * n], vec![C64::new(0.0, 0.0); 3 * n]];
    for i in 0..n {
        let d = sub(z, mesh.nodes[i]);
        let r = norm(d);
        let g = dyadic_from_geometry(ctx, r, scale(1.0 / r, d));
        let nu = cross_matrix(mesh.normals[i]);
        let w = -mesh.weights[i] / ctx.eps0;
        for a in 0..3 {
            for b in 0..3 {
                rows[a][3 * i + b] = w * (0..3).map(|c| g[a][c] * nu[c][b]).sum::<C64>();
            }
        }
    }
    rows
}

fn apply_row(row: &[C64], eta_bar: &[Vec3C]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (j, e) in eta_bar.iter().enumerate() {
        s += row[3 * j] * e[0] + row[3 * j + 1] * e[1] + row[3 * j + 2] * e[2];
    }
    s
}

/// Back-propagation of filtered noise-only data at fixed probe points,
/// composed into one linear map per point.
#[derive(Debug, Clone)]
pub struct NoiseBackprop {
    pub points: Vec<Vec3>,
    rows: Vec<Vec<C64>>,
}

impl NoiseBackprop {
    pub fn new(ctx: &WaveContext, mesh: &SphereMesh, points: &[Vec3], mode: FilterMode) -> Result<Self> {
        for &z in points {
            let d = mesh.distance_to_surface(z);
            if !(d > ctx.r_min()) || norm(sub(z, mesh.center)) >= mesh.radius {
                return Err(Error::Singularity { distance: d, r_min: ctx.r_min() });
            }
        }
        let rows: Vec<Vec<C64>> = points.iter().flat_map(|&z| backprop_rows(ctx, mesh, z)).collect();
        Ok(Self { points: points.to_vec(), rows: pull_back(ctx, mesh, mode, &rows) })
    }

    /// `U^noise` at every probe point for raw nodal noise `η`.
    pub fn apply(&self, eta: &[Vec3C]) -> Vec<Vec3C> {
        let eta_bar: Vec<Vec3C> = eta.iter().map(|e| cconj(*e)).collect();
        self.rows
            .chunks(3)
            .map(|r| [0, 1, 2].map(|a| apply_row(&r[a], &eta_bar)))
            .collect()
    }
}

/// Empirical `E[U(z)U(z′)ᴴ]` next to its prediction `−σ²/(4κε₀) Im Γ(z,z′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEntry {
    pub z: Vec3,
    pub z_prime: Vec3,
    pub empirical: ComplexMat3,
    pub prediction: Mat3,
    /// Monte Carlo standard errors of the real and imaginary parts.
    pub std_error_re: Mat3,
    pub std_error_im: Mat3,
}

impl CovarianceEntry {
    /// Largest entrywise deviation in units of the standard error.
    pub fn max_z_score(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let dr = (self.empirical[a][b].re - self.prediction[a][b]).abs() / self.std_error_re[a][b];
                let di = self.empirical[a][b].im.abs() / self.std_error_im[a][b];
                worst = worst.max(dr).max(di);
            }
        }
        worst
    }

    pub fn max_z_score_diagonal(&self) -> f64 {
        (0..3)
            .map(|a| {
                let dr = (self.empirical[a][a].re - self.prediction[a][a]).abs() / self.std_error_re[a][a];
                let di = self.empirical[a][a].im.abs() / self.std_error_im[a][a];
                dr.max(di)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct NoiseCovarianceReport {
    pub mode: FilterMode,
    pub sigma: f64,
    pub n_trials: usize,
    pub entries: Vec<CovarianceEntry>,
    /// Sample mean of `U^noise` at the first probe point of each pair.
    pub means: Vec<Vec3C>,
    /// Excess kurtosis of the real parts of `U^noise` at the first probe of each pair.
    pub excess_kurtosis: Vec<[f64; 3]>,
}

/// `−σ²/(4κε₀) Im Γ(z,z′)`.
pub fn noise_covariance_prediction(ctx: &WaveContext, sigma: f64, z: Vec3, z_prime: Vec3) -> Mat3 {
    let m = im_dyadic_green(ctx, z, z_prime);
    let s = -sigma * sigma / (4.0 * ctx.kappa * ctx.eps0);
    m.map(|r| r.map(|v| s * v))
}

/// Draws `n_trials` noise-only data sets and back-propagates them to the
/// probe pairs.
pub fn mc_noise_covariance(
    ctx: &WaveContext,
    mesh: &SphereMesh,
    sigma: f64,
    mode: FilterMode,
    cfg: &MCConfig,
) -> Result<NoiseCovarianceReport> {
    cfg.validate()?;
    if !(sigma >= 0.0) {
        return Err(invalid("noise sigma must be >= 0"));
    }
    let points: Vec<Vec3> = cfg.probe_pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let op = NoiseBackprop::new(ctx, mesh, &points, mode)?;
    let samples: Vec<Vec<Vec3C>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| op.apply(&draw_noise(mesh, sigma, cfg.seed, t as u64)))
        .collect();
    let nt = cfg.n_trials as f64;
    let mut entries = Vec::new();
    let mut means = Vec::new();
    let mut kurt = Vec::new();
    for (p, &(z, zp)) in cfg.probe_pairs.iter().enumerate() {
        let mut emp = [[C64::new(0.0, 0.0); 3]; 3];
        let mut se_re = [[0.0; 3]; 3];
        let mut se_im = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let xs: Vec<C64> = samples.iter().map(|s| s[2 * p][a] * s[2 * p + 1][b].conj()).collect();
                let m: C64 = xs.iter().sum::<C64>() / nt;
                let vr = xs.iter().map(|x| (x.re - m.re).powi(2)).sum::<f64>() / (nt - 1.0);
                let vi = xs.iter().map(|x| (x.im - m.im).powi(2)).sum::<f64>() / (nt - 1.0);
                emp[a][b] = m;
                se_re[a][b] = (vr / nt).sqrt();
                se_im[a][b] = (vi / nt).sqrt();
            }
        }
        let mean: Vec3C = [0, 1, 2].map(|a| samples.iter().map(|s| s[2 * p][a]).sum::<C64>() / nt);
        let k = [0, 1, 2].map(|a| {
            let xs: Vec<f64> = samples.iter().map(|s| s[2 * p][a].re).collect();
            excess_kurtosis(&xs)
        });
        entries.push(CovarianceEntry {
            z,
            z_prime: zp,
            empirical: emp,
            prediction: noise_covariance_prediction(ctx, sigma, z, zp),
            std_error_re: se_re,
            std_error_im: se_im,
        });
        means.push(mean);
        kurt.push(k);
    }
    Ok(NoiseCovarianceReport { mode, sigma, n_trials: cfg.n_trials, entries, means, excess_kurtosis: kurt })
}

/// Sample excess kurtosis; its standard error for Gaussian data is `√(24/n)`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrStats {
    /// Noise-free map value at the probe.
    pub signal: f64,
    pub mean: f64,
    pub std: f64,
    pub snr: f64,
    /// Variance of the noise part alone.
    pub noise_variance: f64,
    pub n_trials: usize,
}

/// Noisy multi-incidence map value at `z` over `n_trials` noise draws;
/// SNR = mean/std.
///
/// The noise part of the map is linear in the raw noise, so it is composed
/// into one functional per incidence before sampling.
#[allow(clippy::too_many_arguments)]
pub fn mc_snr(
    materials: &Materials,
    trial: &TrialInclusion,
    data: &FilteredBoundaryData,
    z: Vec3,
    sigma: f64,
    mode: FilterMode,
    n_trials: usize,
    seed: u64,
) -> Result<SnrStats> {
    if n_trials < 2 {
        return Err(Error::CheckFailed(format!("Monte Carlo needs at least 2 trials, got {n_trials}")));
    }
    let ctx = materials.wave()?;
    let mesh = &data.mesh;
    let n_dir = direction_count(&data.incidences).max(1) as f64;
    let clean = backpropagate(data, &ctx, z)?;
    let signal = data
        .incidences
        .iter()
        .zip(&clean)
        .map(|(inc, (u, c))| td_from_fields(materials, trial, inc, z, *u, *c))
        .sum::<f64>()
        / n_dir;

    // map noise = −(1/n)Σ_k Re{g_k·W_k}, with g_k from U and ∇×U rows
    let u_rows = backprop_rows(&ctx, mesh, z);
    let curl_rows = curl_rows(&ctx, mesh, z);
    let kappa = materials.kappa();
    let (a_mu, a_eps) = (materials.a_mu(), materials.a_eps());
    let funcs: Vec<Vec<C64>> = data
        .incidences
        .iter()
        .map(|inc| {
            let (h, c) = plane_wave(inc.theta, inc.pol, kappa, z);
            let mh = crate::math::mat_cvec(&trial.m_mu, h);
            let mc = crate::math::mat_cvec(&trial.m_eps, c);
            (0..3 * mesh.len())
                .map(|col| {
                    let mut s = C64::new(0.0, 0.0);
                    for a in 0..3 {
                        s += kappa * kappa * a_mu * u_rows[a][col] * mh[a] + a_eps * curl_rows[a][col] * mc[a];
                    }
                    s
                })
                .collect()
        })
        .collect();
    let funcs = pull_back(&ctx, mesh, mode, &funcs);
    let nk = data.incidences.len() as u64;
    let noise: Vec<f64> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut s = 0.0;
            for (k, f) in funcs.iter().enumerate() {
                let eta = draw_noise(mesh, sigma, seed, t * nk + k as u64);
                let eta_bar: Vec<Vec3C> = eta.iter().map(|e| cconj(*e)).collect();
                s += apply_row(f, &eta_bar).re;
            }
            -s / n_dir
        })
        .collect();
    let nt = n_trials as f64;
    let nm = noise.iter().sum::<f64>() / nt;
    let noise_variance = noise.iter().map(|x| (x - nm).powi(2)).sum::<f64>() / (nt - 1.0);
    let mean = signal + nm;
    let std = noise_variance.sqrt();
    if !(std > 0.0) {
        return Err(Error::DegenerateMap("zero variance in SNR estimate".into()));
    }
    Ok(SnrStats { signal, mean, std, snr: mean / std, noise_variance, n_trials })
}

/// Rows of `∇×U(z)` as functionals on `W`.
fn curl_rows(ctx: &WaveContext, mesh: &SphereMesh, z: Vec3) -> [Vec<C64>; 3] {
    let n = mesh.len();
    let mut rows = [vec![C64::new(0.0, 0.0); 3 * n], vec![C64::new(0.0, 0.0); 3 * n], vec![C64::new(0.0, 0.0); 3 * n]];
    for i in 0..n {
        let d = sub(z, mesh.nodes[i]);
        let r = norm(d);
        let c = cross_matrix(crate::greens::curl_vector_from_geometry(ctx, r, scale(1.0 / r, d)));
        let nu = cross_matrix(mesh.normals[i]);
        let w = -mesh.weights[i] / ctx.eps0;
        for a in 0..3 {
            for b in 0..3 {
                rows[a][3 * i + b] = w * (0..3).map(|q| c[a][q] * nu[q][b]).sum::<C64>();
            }
        }
    }
    rows
}

/// Closed-form covariance of the noisy map for balls:
/// `σ²ã²κ²(2n)⁻¹ ‖Im Γ(z,z′)‖²`.
pub fn td_cov_prediction(kind: Kind, z: Vec3, z_prime: Vec3, materials: &Materials, sigma: f64, n: usize) -> Result<f64> {
    let ctx = materials.wave()?;
    if n == 0 {
        return Err(invalid("need at least one direction"));
    }
    let a = SphereConstants::new(materials, kind, 4.0 * PI / 3.0, 4.0 * PI / 3.0).a_tilde;
    let m = im_dyadic_green(&ctx, z, z_prime);
    let k = ctx.kappa;
    Ok(sigma * sigma * a * a * k * k / (2.0 * n as f64) * contract_real(&m, &m))
}

/// Which medium parameter fluctuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluctuationKind {
    /// `μ = μ₀(1 + γ)`.
    Permeability,
    /// `ε⁻¹ = ε₀⁻¹(1 + α)`.
    Permittivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeckleKernelKind {
    /// `Im Γ : M Im Γ`.
    QGamma,
    /// `B : M B` with `B = ∇_z×Im Γ`.
    QGammaTilde,
    /// `tr(M B Bᵀ)`.
    QAlpha,
    /// `Im Γ M : Im Γ`.
    QAlphaTilde,
}

/// Contraction kernels of the speckle covariance; `A` must be symmetric.
pub fn speckle_kernel(kind: SpeckleKernelKind, m: &Mat3, y: Vec3, z: Vec3, ctx: &WaveContext) -> f64 {
    match kind {
        SpeckleKernelKind::QGamma => {
            let a = im_dyadic_green(ctx, y, z);
            contract_real(&a, &mat_mul(m, &a))
        }
        SpeckleKernelKind::QAlphaTilde => {
            let a = im_dyadic_green(ctx, y, z);
            contract_real(&mat_mul(&a, m), &a)
        }
        SpeckleKernelKind::QGammaTilde => {
            let b = curl_im_dyadic_green(ctx, y, z);
            contract_real(&b, &mat_mul(m, &b))
        }
        SpeckleKernelKind::QAlpha => {
            let b = curl_im_dyadic_green(ctx, y, z);
            let bbt = mat_mul(&b, &transpose(&b));
            (0..3).map(|i| mat_mul(m, &bbt)[i][i]).sum()
        }
    }
}

/// Continuum response of the multi-incidence map at `z` to a unit
/// fluctuation at `y` (many directions): the speckle map is `∫ γ(y) K(y,z) dy`.
pub fn speckle_td_kernel(fluct: FluctuationKind, materials: &Materials, trial: &TrialInclusion, y: Vec3, z: Vec3) -> Result<f64> {
    let ctx = materials.wave()?;
    let k2 = ctx.kappa * ctx.kappa;
    let c = -4.0 * PI / (ctx.eps0 * ctx.eps0);
    let (a_mu, a_eps) = (materials.a_mu(), materials.a_eps());
    let mut v = 0.0;
    match fluct {
        FluctuationKind::Permeability => {
            if a_mu != 0.0 {
                v += c * k2 * a_mu * speckle_kernel(SpeckleKernelKind::QGamma, &trial.m_mu, y, z, &ctx);
            }
            if a_eps != 0.0 {
                v += c * a_eps * speckle_kernel(SpeckleKernelKind::QGammaTilde, &trial.m_eps, y, z, &ctx);
            }
        }
        FluctuationKind::Permittivity => {
            if a_mu != 0.0 {
                v += c * a_mu * speckle_kernel(SpeckleKernelKind::QAlpha, &trial.m_mu, y, z, &ctx);
            }
            if a_eps != 0.0 {
                v += c * k2 * a_eps * speckle_kernel(SpeckleKernelKind::QAlphaTilde, &trial.m_eps, y, z, &ctx);
            }
        }
    }
    Ok(v)
}

/// Ball of random medium: Gauss-Legendre radial shells times Fibonacci
/// spheres whose size grows like `r²`, with a `cos²` taper to zero over the
/// outer `taper_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMesh {
    pub center: Vec3,
    pub radius: f64,
    pub taper_width: f64,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub taper: Vec<f64>,
}

impl VolumeMesh {
    pub fn ball(center: Vec3, radius: f64, taper_width: f64, n_radial: usize, spacing: f64) -> Result<Self> {
        if !(radius > 0.0) || !(spacing > 0.0) || !(0.0..=radius).contains(&taper_width) {
            return Err(invalid("volume mesh needs radius > 0, spacing > 0 and 0 <= taper <= radius"));
        }
        let nr = NonZeroUsize::new(n_radial).ok_or_else(|| invalid("need at least one radial shell"))?;
        let gl = GaussLegendre::new(nr);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut taper = Vec::new();
        for &(x, w) in gl.as_node_weight_pairs() {
            let r = 0.5 * radius * (x + 1.0);
            let wr = 0.5 * radius * w;
            let n = ((4.0 * PI * r * r) / (spacing * spacing)).round().max(1.0) as usize;
            let t = taper_profile(r, radius, taper_width);
            for u in fibonacci_sphere(n)? {
                nodes.push(crate::math::add(center, scale(r, u)));
                weights.push(wr * 4.0 * PI * r * r / n as f64);
                taper.push(t);
            }
        }
        Ok(Self { center, radius, taper_width, nodes, weights, taper })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn taper_profile(r: f64, radius: f64, width: f64) -> f64 {
    let start = radius - width;
    if r <= start || width == 0.0 {
        1.0
    } else {
        let s = ((r - start) / width).min(1.0);
        (0.5 * PI * s).cos().powi(2)
    }
}

#[derive(Debug, Clone)]
pub struct MediumNoiseSpec {
    pub kind: FluctuationKind,
    pub field: RandomFieldSpec,
    pub mesh: Arc<VolumeMesh>,
}

impl MediumNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        self.field.validate()
    }

    /// Born linearization is trusted for `σ ≤ 0.2`.
    pub fn born_regime(&self) -> bool {
        self.field.sigma <= 0.2
    }

    /// Tapered fluctuation values on the mesh for realization `index`.
    pub fn realization(&self, index: u64) -> Result<Vec<f64>> {
        let f = RandomField::realization(&self.field, index)?;
        Ok(self.mesh.nodes.iter().zip(&self.mesh.taper).map(|(&y, t)| t * f.eval(y)).collect())
    }
}

// (U, ∇×U) at z from a unit fluctuation at y for one incidence.
fn born_point(kind: FluctuationKind, ctx: &WaveContext, y: Vec3, z: Vec3, inc: &Incidence) -> (Vec3C, Vec3C) {
    let a = im_dyadic_green(ctx, y, z);
    let b = curl_im_dyadic_green(ctx, y, z);
    let (h, c) = plane_wave(inc.theta, inc.pol, ctx.kappa, y);
    let (src, fu, fc) = match kind {
        FluctuationKind::Permeability => (cconj(h), -ctx.kappa / ctx.eps0, -ctx.kappa / ctx.eps0),
        FluctuationKind::Permittivity => (cconj(c), -1.0 / (ctx.kappa * ctx.eps0), -ctx.kappa / ctx.eps0),
    };
    // permeability: U from A, ∇×U from B; permittivity: U from B, ∇×U from A
    let (mu, mc) = match kind {
        FluctuationKind::Permeability => (a, b),
        FluctuationKind::Permittivity => (b, a),
    };
    let u = crate::math::mat_cvec(&mu, src).map(|v| v * fu);
    let cu = crate::math::mat_cvec(&mc, src).map(|v| v * fc);
    (u, cu)
}

/// Born back-propagated field of a medium realization for one incidence.
///
/// Permeability: `U = −(κ/ε₀)∫ γ Im Γ(y,z) H̄₀(y) dy`. Permittivity, after
/// moving the curl onto the Green's function:
/// `U = −(1/(κε₀))∫ α B(y,z) conj(∇×H₀)(y) dy`.
pub fn born_speckle_backprop(
    spec: &MediumNoiseSpec,
    realization: &[f64],
    z: Vec3,
    incidence: &Incidence,
    ctx: &WaveContext,
) -> Result<(Vec3C, Vec3C)> {
    if realization.len() != spec.mesh.len() {
        return Err(invalid("realization length does not match the volume mesh"));
    }
    let mut u = CZERO3;
    let mut cu = CZERO3;
    for ((&y, &w), &g) in spec.mesh.nodes.iter().zip(&spec.mesh.weights).zip(realization) {
        if g == 0.0 {
            continue;
        }
        let (a, b) = born_point(spec.kind, ctx, y, z, incidence);
        for q in 0..3 {
            u[q] += w * g * a[q];
            cu[q] += w * g * b[q];
        }
    }
    Ok((u, cu))
}

/// Map response at `z` to a unit fluctuation at each mesh node, summed over
/// the actual incidences.
pub fn speckle_node_response(
    spec: &MediumNoiseSpec,
    materials: &Materials,
    trial: &TrialInclusion,
    incidences: &[Incidence],
    z: Vec3,
) -> Result<Vec<f64>> {
    let ctx = materials.wave()?;
    let n = direction_count(incidences).max(1) as f64;
    Ok(spec
        .mesh
        .nodes
        .par_iter()
        .map(|&y| {
            incidences
                .iter()
                .map(|inc| {
                    let (u, cu) = born_point(spec.kind, &ctx, y, z, inc);
                    td_from_fields(materials, trial, inc, z, u, cu)
                })
                .sum::<f64>()
                / n
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleCovariance {
    pub prediction: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub n_realizations: usize,
}

/// `∬ C(y,y′) K(y,z) K(y′,z′) dy dy′` on the volume mesh with
/// `C = σ² t(y)t(y′) exp(−|y−y′|²/(2ℓ²))`; pairs beyond `6ℓ` are dropped.
pub fn speckle_covariance_prediction(
    spec: &MediumNoiseSpec,
    materials: &Materials,
    trial: &TrialInclusion,
    z: Vec3,
    z_prime: Vec3,
) -> Result<f64> {
    spec.validate()?;
    let mesh = &spec.mesh;
    let kz = mesh
        .nodes
        .par_iter()
        .map(|&y| speckle_td_kernel(spec.kind, materials, trial, y, z))
        .collect::<Result<Vec<f64>>>()?;
    let kzp = if z_prime == z {
        kz.clone()
    } else {
        mesh.nodes
            .par_iter()
            .map(|&y| speckle_td_kernel(spec.kind, materials, trial, y, z_prime))
            .collect::<Result<Vec<f64>>>()?
    };
    let l2 = spec.field.corr_len * spec.field.corr_len;
    let cut2 = 36.0 * l2;
    let a: Vec<f64> = (0..mesh.len()).map(|i| mesh.weights[i] * mesh.taper[i] * kz[i]).collect();
    let b: Vec<f64> = (0..mesh.len()).map(|i| mesh.weights[i] * mesh.taper[i] * kzp[i]).collect();
    let rows: Vec<f64> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            if a[i] == 0.0 {
                return 0.0;
            }
            let yi = mesh.nodes[i];
            let mut s = 0.0;
            for (j, yj) in mesh.nodes.iter().enumerate() {
                let d = sub(yi, *yj);
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                if r2 < cut2 {
                    s += (-0.5 * r2 / l2).exp() * b[j];
                }
            }
            a[i] * s
        })
        .collect();
    let sigma2 = spec.field.sigma * spec.field.sigma;
    Ok(sigma2 * rows.iter().sum::<f64>())
}

/// Prediction and Monte Carlo estimate of `Cov(speckle(z), speckle(z′))`.
pub fn speckle_covariance(
    spec: &MediumNoiseSpec,
    materials: &Materials,
    trial: &TrialInclusion,
    incidences: &[Incidence],
    z: Vec3,
    z_prime: Vec3,
    n_realizations: usize,
) -> Result<SpeckleCovariance> {
    if n_realizations < 2 {
        return Err(Error::CheckFailed("speckle statistics need at least 2 realizations".into()));
    }
    let prediction = speckle_covariance_prediction(spec, materials, trial, z, z_prime)?;
    let rz = speckle_node_response(spec, materials, trial, incidences, z)?;
    let rzp = if z_prime == z { rz.clone() } else { speckle_node_response(spec, materials, trial, incidences, z_prime)? };
    let w = &spec.mesh.weights;
    let products = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let g = spec.realization(r)?;
            let x: f64 = g.iter().zip(w).zip(&rz).map(|((g, w), k)| g * w * k).sum();
            let y: f64 = g.iter().zip(w).zip(&rzp).map(|((g, w), k)| g * w * k).sum();
            Ok(x * y)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = n_realizations as f64;
    let m = products.iter().sum::<f64>() / n;
    let v = products.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SpeckleCovariance { prediction, empirical: m, std_error: (v / n).sqrt(), n_realizations })
}

/// `‖Im Γ(z,z′)‖²`.
pub fn im_green_norm_sq(ctx: &WaveContext, z: Vec3, z_prime: Vec3) -> f64 {
    frobenius_real(&im_dyadic_green(ctx, z, z_prime)).powi(2)
}
