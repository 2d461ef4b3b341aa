//! Back-propagation, topological-derivative maps and peak metrics.

use crate::error::{invalid, Error, Result};
use crate::forward::FilteredBoundaryData;
use crate::greens::{curl_vector_from_geometry, dyadic_from_geometry, im_dyadic_green, WaveContext};
use crate::math::{
    add, cconj, ccross, cdot, cmat_cvec, mat_cvec, mat_mul, norm, scale, sub, Mat3, Vec3,
    Vec3C, C64, CZERO3, IDENTITY,
};
use crate::scene::{plane_wave, Incidence, Inclusion, Kind, Materials, TrialInclusion};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Regular search grid `origin + i·h·a₀ + j·h·a₁ + k·h·a₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    /// Orthonormal grid axes, the identity unless the scene is rotated.
    pub axes: Mat3,
}

impl SearchGrid {
    pub fn new(origin: Vec3, spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        if dims.contains(&0) {
            return Err(invalid("grid dims must be >= 1"));
        }
        Ok(Self { origin, spacing, dims, axes: IDENTITY })
    }

    /// Square `m×m` slice centred on `center`, normal to axis `normal_axis`.
    pub fn slice(center: Vec3, spacing: f64, m: usize, normal_axis: usize) -> Result<Self> {
        if normal_axis > 2 {
            return Err(invalid("slice axis must be 0, 1 or 2"));
        }
        let half = spacing * (m as f64 - 1.0) / 2.0;
        let mut dims = [m; 3];
        dims[normal_axis] = 1;
        let mut origin = center;
        for (a, o) in origin.iter_mut().enumerate() {
            if a != normal_axis {
                *o -= half;
            }
        }
        Self::new(origin, spacing, dims)
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, `x` fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.ijk(idx);
        let mut p = self.origin;
        for (a, n) in [i, j, k].into_iter().enumerate() {
            p = add(p, scale(n as f64 * self.spacing, self.axes[a]));
        }
        p
    }

    pub fn points(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Grid rotated by `r` about the world origin.
    pub fn rotated(&self, r: &Mat3) -> Self {
        let axes = crate::math::transpose(&mat_mul(r, &crate::math::transpose(&self.axes)));
        Self { origin: crate::math::mat_vec(r, self.origin), spacing: self.spacing, dims: self.dims, axes }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakMetrics {
    pub argmax: usize,
    pub location: Vec3,
    pub value: f64,
    pub localization_error: f64,
    /// Main-lobe full width at half maximum along the two in-slice axes.
    pub fwhm: [f64; 2],
    /// Peak value over the largest value outside the main lobe.
    pub sidelobe_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ImagingMap {
    pub grid: SearchGrid,
    pub values: Vec<f64>,
}

impl ImagingMap {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn peak(&self) -> (Vec3, f64) {
        let i = self.argmax();
        (self.grid.point(i), self.values[i])
    }
}

/// Number of distinct consecutive directions among the incidences.
pub fn direction_count(incidences: &[Incidence]) -> usize {
    let mut n = 0;
    let mut last: Option<Vec3> = None;
    for inc in incidences {
        if last != Some(inc.theta) {
            n += 1;
            last = Some(inc.theta);
        }
    }
    n
}

fn check_point(data: &FilteredBoundaryData, ctx: &WaveContext, z: Vec3) -> Result<()> {
    let d = data.mesh.distance_to_surface(z);
    if !(d > ctx.r_min()) {
        return Err(Error::Singularity { distance: d, r_min: ctx.r_min() });
    }
    if norm(sub(z, data.mesh.center)) >= data.mesh.radius {
        return Err(invalid("search point outside the boundary sphere"));
    }
    Ok(())
}

/// `U(z) = −(1/ε₀)Σ w Γ(x,z)(ν×W)` and `∇×U(z)` for every incidence, with
/// `W` the conjugate data.
pub fn backpropagate(data: &FilteredBoundaryData, ctx: &WaveContext, z: Vec3) -> Result<Vec<(Vec3C, Vec3C)>> {
    check_point(data, ctx, z)?;
    let mesh = &data.mesh;
    let mut out = vec![(CZERO3, CZERO3); data.incidences.len()];
    let s = -1.0 / ctx.eps0;
    for i in 0..mesh.len() {
        let d = sub(z, mesh.nodes[i]);
        let r = norm(d);
        let rh = scale(1.0 / r, d);
        let g = dyadic_from_geometry(ctx, r, rh);
        // ∇_z×Γ(x,z) is the first-slot curl of Γ(z,x)
        let c = curl_vector_from_geometry(ctx, r, rh);
        let w = s * mesh.weights[i];
        for (k, col) in data.values.iter().enumerate() {
            let v = ccross(crate::math::to_complex(mesh.normals[i]), cconj(col[i]));
            let u = cmat_cvec(&g, v);
            let cu = ccross(c, v);
            for a in 0..3 {
                out[k].0[a] += w * u[a];
                out[k].1[a] += w * cu[a];
            }
        }
    }
    Ok(out)
}

/// Which back-propagated fields a map needs.
#[derive(Debug, Clone, Copy)]
pub struct Needs {
    pub u: bool,
    pub curl: bool,
}

impl Needs {
    pub fn for_materials(m: &Materials) -> Self {
        Self { u: m.a_mu() != 0.0, curl: m.a_eps() != 0.0 }
    }
}

/// Batched back-propagation at many points, grouped into complex GEMMs.
///
/// Returns `U` and `∇×U` per point per incidence (zeros where not needed).
pub fn backpropagate_many(
    data: &FilteredBoundaryData,
    ctx: &WaveContext,
    points: &[Vec3],
    needs: Needs,
) -> Result<Vec<Vec<(Vec3C, Vec3C)>>> {
    for &z in points {
        check_point(data, ctx, z)?;
    }
    let mesh = &data.mesh;
    let n = mesh.len();
    let nj = data.incidences.len();
    // V[(3i+a), k] = w_i (ν_i × W_k(x_i))_a, row-major 3n × nj
    let mut vr = vec![0.0; 3 * n * nj];
    let mut vi = vec![0.0; 3 * n * nj];
    for (k, col) in data.values.iter().enumerate() {
        for i in 0..n {
            let v = ccross(crate::math::to_complex(mesh.normals[i]), cconj(col[i]));
            for a in 0..3 {
                let c = v[a] * mesh.weights[i];
                vr[(3 * i + a) * nj + k] = c.re;
                vi[(3 * i + a) * nj + k] = c.im;
            }
        }
    }
    const CHUNK: usize = 24;
    let s = -1.0 / ctx.eps0;
    let chunks: Vec<Vec<Vec<(Vec3C, Vec3C)>>> = points
        .par_chunks(CHUNK)
        .map(|pts| {
            let p = pts.len();
            let mut res = vec![vec![(CZERO3, CZERO3); nj]; p];
            let mut ar = vec![0.0; 3 * p * 3 * n];
            let mut ai = vec![0.0; 3 * p * 3 * n];
            let mut cr = vec![0.0; 3 * p * nj];
            let mut ci = vec![0.0; 3 * p * nj];
            for pass in 0..2 {
                let want = if pass == 0 { needs.u } else { needs.curl };
                if !want {
                    continue;
                }
                for (q, &z) in pts.iter().enumerate() {
                    for i in 0..n {
                        let d = sub(z, mesh.nodes[i]);
                        let r = norm(d);
                        let rh = scale(1.0 / r, d);
                        let m = if pass == 0 {
                            dyadic_from_geometry(ctx, r, rh)
                        } else {
                            crate::math::cross_matrix(curl_vector_from_geometry(ctx, r, rh))
                        };
                        for a in 0..3 {
                            for b in 0..3 {
                                let idx = (3 * q + a) * 3 * n + 3 * i + b;
                                ar[idx] = s * m[a][b].re;
                                ai[idx] = s * m[a][b].im;
                            }
                        }
                    }
                }
                complex_gemm(3 * p, 3 * n, nj, &ar, &ai, &vr, &vi, &mut cr, &mut ci);
                for q in 0..p {
                    for k in 0..nj {
                        let v = [0, 1, 2].map(|a| C64::new(cr[(3 * q + a) * nj + k], ci[(3 * q + a) * nj + k]));
                        if pass == 0 {
                            res[q][k].0 = v;
                        } else {
                            res[q][k].1 = v;
                        }
                    }
                }
            }
            res
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// `C = A·B` for row-major complex matrices split into real and imaginary
/// parts; `A` is `m×k`, `B` is `k×n`.
#[allow(clippy::too_many_arguments)]
fn complex_gemm(m: usize, k: usize, n: usize, ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64], cr: &mut [f64], ci: &mut [f64]) {
    let (ka, na) = (k as isize, n as isize);
    // SAFETY: slices are sized m·k, k·n and m·n with row-major strides.
    unsafe {
        use matrixmultiply::dgemm;
        dgemm(m, k, n, 1.0, ar.as_ptr(), ka, 1, br.as_ptr(), na, 1, 0.0, cr.as_mut_ptr(), na, 1);
        dgemm(m, k, n, -1.0, ai.as_ptr(), ka, 1, bi.as_ptr(), na, 1, 1.0, cr.as_mut_ptr(), na, 1);
        dgemm(m, k, n, 1.0, ar.as_ptr(), ka, 1, bi.as_ptr(), na, 1, 0.0, ci.as_mut_ptr(), na, 1);
        dgemm(m, k, n, 1.0, ai.as_ptr(), ka, 1, br.as_ptr(), na, 1, 1.0, ci.as_mut_ptr(), na, 1);
    }
}

/// Topological derivative contribution of one incidence from its
/// back-propagated fields:
/// `−Re{κ²a_μ U·M_μH₀ + a_ε ∇×U·M_ε∇×H₀}`.
pub fn td_from_fields(
    materials: &Materials,
    trial: &TrialInclusion,
    incidence: &Incidence,
    z: Vec3,
    u: Vec3C,
    curl_u: Vec3C,
) -> f64 {
    let kappa = materials.kappa();
    let (h, curl) = plane_wave(incidence.theta, incidence.pol, kappa, z);
    let mut s = C64::new(0.0, 0.0);
    let a_mu = materials.a_mu();
    if a_mu != 0.0 {
        s += kappa * kappa * a_mu * cdot(u, mat_cvec(&trial.m_mu, h));
    }
    let a_eps = materials.a_eps();
    if a_eps != 0.0 {
        s += a_eps * cdot(curl_u, mat_cvec(&trial.m_eps, curl));
    }
    -s.re
}

/// Single-incidence topological derivative at `z` for incidence index `k`.
pub fn td_single(
    data: &FilteredBoundaryData,
    k: usize,
    z: Vec3,
    materials: &Materials,
    trial: &TrialInclusion,
) -> Result<f64> {
    let ctx = materials.wave()?;
    let inc = data.incidences.get(k).ok_or_else(|| invalid("incidence index out of range"))?;
    let fields = backpropagate(data, &ctx, z)?;
    Ok(td_from_fields(materials, trial, inc, z, fields[k].0, fields[k].1))
}

/// `(1/n)Σ_{j,l}` of single-incidence derivatives over a grid, with `n` the
/// number of distinct directions.
pub fn td_multi(
    data: &FilteredBoundaryData,
    grid: &SearchGrid,
    materials: &Materials,
    trial: &TrialInclusion,
) -> Result<ImagingMap> {
    let ctx = materials.wave()?;
    let points = grid.points();
    let fields = backpropagate_many(data, &ctx, &points, Needs::for_materials(materials))?;
    let n = direction_count(&data.incidences).max(1) as f64;
    let values = points
        .iter()
        .zip(&fields)
        .map(|(&z, f)| {
            data.incidences
                .iter()
                .zip(f)
                .map(|(inc, (u, cu))| td_from_fields(materials, trial, inc, z, *u, *cu))
                .sum::<f64>()
                / n
        })
        .collect();
    Ok(ImagingMap { grid: grid.clone(), values })
}

/// `4πρ³κ²C/ε₀² · Re{Im Γ M_D : M_S Im Γ}` at `z_S`.
pub fn td_closed_form(
    kind: Kind,
    z_s: Vec3,
    materials: &Materials,
    inclusion: &Inclusion,
    trial: &TrialInclusion,
) -> Result<f64> {
    let ctx = materials.wave()?;
    let a = im_dyadic_green(&ctx, z_s, inclusion.center);
    let c = match kind {
        Kind::Permeable => materials.c_mu(),
        Kind::Dielectric => materials.c_eps(),
    };
    let left = mat_mul(&a, inclusion.tensor(kind));
    let right = mat_mul(trial.tensor(kind), &a);
    let k = ctx.kappa;
    Ok(4.0 * PI * inclusion.rho.powi(3) * k * k * c / (ctx.eps0 * ctx.eps0) * crate::math::contract_real(&left, &right))
}

pub fn td_closed_form_map(
    grid: &SearchGrid,
    materials: &Materials,
    inclusion: &Inclusion,
    trial: &TrialInclusion,
) -> Result<ImagingMap> {
    let mut values = Vec::with_capacity(grid.len());
    for z in grid.points() {
        let mut v = 0.0;
        if materials.c_mu() != 0.0 {
            v += td_closed_form(Kind::Permeable, z, materials, inclusion, trial)?;
        }
        if materials.c_eps() != 0.0 {
            v += td_closed_form(Kind::Dielectric, z, materials, inclusion, trial)?;
        }
        values.push(v);
    }
    Ok(ImagingMap { grid: grid.clone(), values })
}

/// Peak location, localization error, main-lobe widths and sidelobe ratio.
pub fn peak_metrics(map: &ImagingMap, z_true: Vec3) -> Result<PeakMetrics> {
    let vals = &map.values;
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > min) || !max.is_finite() {
        return Err(Error::DegenerateMap("map is constant or not finite".into()));
    }
    let grid = &map.grid;
    let argmax = map.argmax();
    let location = grid.point(argmax);
    let axes: Vec<usize> = (0..3).filter(|&a| grid.dims[a] > 1).collect();
    let mut fwhm = [f64::NAN; 2];
    for (slot, &axis) in axes.iter().take(2).enumerate() {
        fwhm[slot] = half_width(map, argmax, axis);
    }

    // main lobe: everything reachable from the peak by non-increasing steps
    let mut in_lobe = vec![false; vals.len()];
    let mut stack = vec![argmax];
    in_lobe[argmax] = true;
    while let Some(idx) = stack.pop() {
        let ijk = grid.ijk(idx);
        for a in 0..3 {
            for step in [-1isize, 1] {
                let m = ijk[a] as isize + step;
                if m < 0 || m >= grid.dims[a] as isize {
                    continue;
                }
                let mut nb = ijk;
                nb[a] = m as usize;
                let j = grid.index(nb[0], nb[1], nb[2]);
                if !in_lobe[j] && vals[j] <= vals[idx] {
                    in_lobe[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    let side = vals
        .iter()
        .zip(&in_lobe)
        .filter(|(_, l)| !**l)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let sidelobe_ratio = if side > 0.0 { max / side } else { f64::INFINITY };
    Ok(PeakMetrics {
        argmax,
        location,
        value: max,
        localization_error: norm(sub(location, z_true)),
        fwhm,
        sidelobe_ratio,
    })
}

// Width of the level set at half the peak along one grid axis, with linear
// interpolation between samples; NaN if the map never drops below half.
fn half_width(map: &ImagingMap, argmax: usize, axis: usize) -> f64 {
    let grid = &map.grid;
    let peak = map.values[argmax];
    let half = 0.5 * peak;
    let base = grid.ijk(argmax);
    let at = |m: usize| {
        let mut p = base;
        p[axis] = m;
        map.values[grid.index(p[0], p[1], p[2])]
    };
    let c = base[axis];
    let mut right = None;
    for m in c + 1..grid.dims[axis] {
        let (v0, v1) = (at(m - 1), at(m));
        if v1 < half {
            right = Some((m - 1) as f64 + (v0 - half) / (v0 - v1));
            break;
        }
    }
    let mut left = None;
    for m in (0..c).rev() {
        let (v0, v1) = (at(m + 1), at(m));
        if v1 < half {
            left = Some((m + 1) as f64 - (v0 - half) / (v0 - v1));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => (r - l) * grid.spacing,
        _ => f64::NAN,
    }
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// `‖Im Γ(z, z_D)‖²` sampled on a grid, the reference resolution pattern.
pub fn im_green_norm_map(grid: &SearchGrid, ctx: &WaveContext, z_d: Vec3) -> ImagingMap {
    let values = grid
        .points()
        .into_iter()
        .map(|z| {
            let m = im_dyadic_green(ctx, z, z_d);
            crate::math::frobenius_real(&m).powi(2)
        })
        .collect();
    ImagingMap { grid: grid.clone(), values }
}
