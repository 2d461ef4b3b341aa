//! Free-space scalar and dyadic Green's functions.
//!
//! `Γ(x,y) = −ε₀(I + κ⁻²∇∇ᵀ)g(x,y)` with `g = e^{iκr}/(4πr)`. Everything is
//! closed form; `hk_residual` checks the Helmholtz–Kirchhoff identities by
//! quadrature on a large sphere.

use crate::error::{invalid, Error, Result};
use crate::math::{
    cmat_add, cmat_conj, cmat_mul, cmat_sub, cross_matrix, fibonacci_point, frobenius, j0, j1, j2,
    mat_cross, norm, pairwise_sum, scale, sub, to_cmat, transpose, ComplexMat3, Mat3, Vec3, C64,
    CZERO33,
};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveContext {
    pub kappa: f64,
    pub eps0: f64,
}

impl WaveContext {
    pub fn new(kappa: f64, eps0: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid("wavenumber must be positive"));
        }
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(invalid("eps0 must be positive"));
        }
        Ok(Self { kappa, eps0 })
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.kappa
    }

    /// Closest separation at which the singular kernels are evaluated.
    pub fn r_min(&self) -> f64 {
        1e-6 * self.wavelength()
    }

    fn separation(&self, x: Vec3, y: Vec3) -> Result<(f64, Vec3)> {
        let d = sub(x, y);
        let r = norm(d);
        if !(r > self.r_min()) {
            return Err(Error::Singularity { distance: r, r_min: self.r_min() });
        }
        Ok((r, scale(1.0 / r, d)))
    }
}

fn g_of_r(kappa: f64, r: f64) -> C64 {
    C64::from_polar(1.0 / (4.0 * PI * r), kappa * r)
}

pub fn scalar_green(ctx: &WaveContext, x: Vec3, y: Vec3) -> Result<C64> {
    let (r, _) = ctx.separation(x, y)?;
    Ok(g_of_r(ctx.kappa, r))
}

/// `∇ₓg(x,y) = g (iκ − 1/r) r̂` with `r̂ = (x−y)/r`.
pub fn grad_scalar_green(ctx: &WaveContext, x: Vec3, y: Vec3) -> Result<[C64; 3]> {
    let (r, rh) = ctx.separation(x, y)?;
    let f = g_of_r(ctx.kappa, r) * C64::new(-1.0 / r, ctx.kappa);
    Ok(rh.map(|c| f * c))
}

pub fn dyadic_green(ctx: &WaveContext, x: Vec3, y: Vec3) -> Result<ComplexMat3> {
    let (r, rh) = ctx.separation(x, y)?;
    Ok(dyadic_from_geometry(ctx, r, rh))
}

#[inline]
pub(crate) fn dyadic_from_geometry(ctx: &WaveContext, r: f64, rh: Vec3) -> ComplexMat3 {
    let kr = ctx.kappa * r;
    let inv = 1.0 / kr;
    let inv2 = inv * inv;
    let g = g_of_r(ctx.kappa, r) * (-ctx.eps0);
    let a = g * C64::new(1.0 - inv2, inv);
    let b = g * C64::new(1.0 - 3.0 * inv2, 3.0 * inv);
    let mut m = CZERO33;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = -b * (rh[i] * rh[j]);
        }
        m[i][i] += a;
    }
    m
}

/// `∇ₓ×Γ(x,y) = −ε₀[∇ₓg]×`, the curl acting column-wise in the first
/// argument. The `∇∇ᵀg` part of `Γ` is curl free.
pub fn curl_dyadic_green(ctx: &WaveContext, x: Vec3, y: Vec3) -> Result<ComplexMat3> {
    let grad = grad_scalar_green(ctx, x, y)?;
    Ok(cross_matrix(grad.map(|c| c * (-ctx.eps0))))
}

/// Vector `c` with `∇ₓ×Γ(x,y) = [c]×`.
#[inline]
pub(crate) fn curl_vector_from_geometry(ctx: &WaveContext, r: f64, rh: Vec3) -> [C64; 3] {
    let f = g_of_r(ctx.kappa, r) * C64::new(-1.0 / r, ctx.kappa) * (-ctx.eps0);
    rh.map(|c| f * c)
}

/// `Im Γ(x,y) = −(ε₀κ/4π)[(2/3)j₀(κr)I + j₂(κr)(r̂r̂ᵀ − I/3)]`, finite at `x = y`.
pub fn im_dyadic_green(ctx: &WaveContext, x: Vec3, y: Vec3) -> Mat3 {
    let d = sub(x, y);
    let r = norm(d);
    let pref = -ctx.eps0 * ctx.kappa / (4.0 * PI);
    let kr = ctx.kappa * r;
    let a = 2.0 / 3.0 * j0(kr);
    let mut m = [[0.0; 3]; 3];
    if r == 0.0 {
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = pref * a;
        }
        return m;
    }
    let b = j2(kr);
    let rh = scale(1.0 / r, d);
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = pref * b * rh[i] * rh[j];
        }
        m[i][i] += pref * (a - b / 3.0);
    }
    m
}

/// `∇_z × Im Γ(y,z)` as a function of the second argument; equals
/// `(ε₀κ²/4π) j₁(κ|z−y|) [r̂]×` with `r̂ = (z−y)/|z−y|`, and vanishes at `y = z`.
pub fn curl_im_dyadic_green(ctx: &WaveContext, y: Vec3, z: Vec3) -> Mat3 {
    let d = sub(z, y);
    let r = norm(d);
    if r == 0.0 {
        return [[0.0; 3]; 3];
    }
    let f = ctx.eps0 * ctx.kappa * ctx.kappa / (4.0 * PI) * j1(ctx.kappa * r) / r;
    cross_matrix(scale(f, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkVariant {
    Plain,
    Tangential,
    Curl,
}

#[derive(Debug, Clone)]
pub struct HkResidual {
    pub quadrature: ComplexMat3,
    pub prediction: Mat3,
    pub residual: ComplexMat3,
    pub norm: f64,
    pub n_nodes: usize,
}

/// Default node count for an HK quadrature on a sphere of radius `r`.
pub fn hk_nodes(ctx: &WaveContext, r: f64) -> usize {
    let kr = ctx.kappa * r;
    (40.0 * kr * kr).ceil().max(2000.0) as usize
}

/// Quadrature of a Helmholtz–Kirchhoff integral over the sphere `|z| = r`
/// minus its large-`r` prediction.
///
/// * plain: `∫ Γ̄(x,z)Γ(z,y) dσ(z)` against `−(ε₀/κ) Im Γ(x,y)`
/// * tangential: `∫ (Γ̄(z,x)×ν)ᵀ(Γ(z,y)×ν) dσ` against the same
/// * curl: `∫ (∇_z×Γ̄(x,z) ×ν)ᵀ(∇_z×Γ(y,z) ×ν) dσ` against `−κε₀ Im Γ(x,y)`
pub fn hk_residual(
    ctx: &WaveContext,
    variant: HkVariant,
    r: f64,
    x: Vec3,
    y: Vec3,
    n_nodes: Option<usize>,
) -> Result<HkResidual> {
    if !(r > 0.0) {
        return Err(invalid("hk_residual: radius must be positive"));
    }
    if norm(x) > 0.5 * r || norm(y) > 0.5 * r {
        return Err(invalid("hk_residual: points must stay within r/2 of the centre"));
    }
    let n = n_nodes.unwrap_or_else(|| hk_nodes(ctx, r));
    let w = 4.0 * PI * r * r / n as f64;

    let term = |i: usize| -> ComplexMat3 {
        let nu = fibonacci_point(i, n);
        let z = scale(r, nu);
        let (a, b) = match variant {
            HkVariant::Plain => (
                dyadic_from_pair(ctx, z, x),
                dyadic_from_pair(ctx, z, y),
            ),
            HkVariant::Tangential => (
                mat_cross(&dyadic_from_pair(ctx, z, x), nu),
                mat_cross(&dyadic_from_pair(ctx, z, y), nu),
            ),
            HkVariant::Curl => (
                mat_cross(&curl_from_pair(ctx, z, x), nu),
                mat_cross(&curl_from_pair(ctx, z, y), nu),
            ),
        };
        let mut m = cmat_mul(&transpose(&cmat_conj(&a)), &b);
        for row in m.iter_mut() {
            for c in row.iter_mut() {
                *c *= w;
            }
        }
        m
    };
    let quadrature = pairwise_sum(n, CZERO33, &term, &|p, q| cmat_add(&p, &q));

    let im = im_dyadic_green(ctx, x, y);
    let factor = match variant {
        HkVariant::Plain | HkVariant::Tangential => -ctx.eps0 / ctx.kappa,
        HkVariant::Curl => -ctx.kappa * ctx.eps0,
    };
    let prediction = im.map(|row| row.map(|c| factor * c));
    let residual = cmat_sub(&quadrature, &to_cmat(&prediction));
    Ok(HkResidual { quadrature, prediction, norm: frobenius(&residual), residual, n_nodes: n })
}

// Boundary nodes sit far from interior points, so the singular branch is
// unreachable from hk_residual.
fn dyadic_from_pair(ctx: &WaveContext, z: Vec3, x: Vec3) -> ComplexMat3 {
    let d = sub(z, x);
    let r = norm(d);
    dyadic_from_geometry(ctx, r, scale(1.0 / r, d))
}

fn curl_from_pair(ctx: &WaveContext, z: Vec3, x: Vec3) -> ComplexMat3 {
    let d = sub(z, x);
    let r = norm(d);
    cross_matrix(curl_vector_from_geometry(ctx, r, scale(1.0 / r, d)))
}
