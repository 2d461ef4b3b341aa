//! Materials, inclusions, trial inclusions and incident plane waves.

use crate::error::{invalid, Result};
use crate::greens::{im_dyadic_green, WaveContext};
use crate::math::{
    cross, dot, fibonacci_sphere, j0, mat_scale, norm, orthonormal_triad, sym_eigenvalues,
    transpose, ComplexMat3, Mat3, Vec3, Vec3C, C64, CZERO33, IDENTITY,
};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Materials {
    pub eps0: f64,
    pub mu0: f64,
    pub eps1: f64,
    pub mu1: f64,
    pub eps2: f64,
    pub mu2: f64,
    pub omega: f64,
}

impl Materials {
    pub fn validate(&self) -> Result<()> {
        let all = [self.eps0, self.mu0, self.eps1, self.mu1, self.eps2, self.mu2, self.omega];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("material parameters and omega must be positive"));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.omega * (self.eps0 * self.mu0).sqrt()
    }

    pub fn wave(&self) -> Result<WaveContext> {
        WaveContext::new(self.kappa(), self.eps0)
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.kappa()
    }

    pub fn mu1r(&self) -> f64 {
        self.mu0 / self.mu1
    }

    pub fn eps1r(&self) -> f64 {
        self.eps0 / self.eps1
    }

    pub fn mu2r(&self) -> f64 {
        self.mu0 / self.mu2
    }

    pub fn eps2r(&self) -> f64 {
        self.eps0 / self.eps2
    }

    pub fn a_mu(&self) -> f64 {
        self.mu2r() - 1.0
    }

    pub fn a_eps(&self) -> f64 {
        self.eps2r() - 1.0
    }

    pub fn c_mu(&self) -> f64 {
        (self.mu1r() - 1.0) * (self.mu2r() - 1.0)
    }

    pub fn c_eps(&self) -> f64 {
        (self.eps1r() - 1.0) * (self.eps2r() - 1.0)
    }
}

/// Which material parameter an imaging quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Permeable,
    Dielectric,
}

/// `M = 3/(2k+1)·|B|·I₃`, the polarization tensor of a ball.
pub fn polarization_tensor_sphere(contrast_k: f64, volume: f64) -> Result<Mat3> {
    if !(contrast_k > 0.0) {
        return Err(invalid("polarization tensor needs a positive contrast"));
    }
    if !(volume > 0.0) {
        return Err(invalid("polarization tensor needs a positive volume"));
    }
    Ok(mat_scale(3.0 / (2.0 * contrast_k + 1.0) * volume, &IDENTITY))
}

fn check_spd(m: &Mat3, what: &str) -> Result<()> {
    let asym = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (m[i][j] - m[j][i]).abs());
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if asym.fold(0.0, f64::max) > 1e-12 * scale.max(1.0) {
        return Err(invalid(format!("{what} must be symmetric")));
    }
    if sym_eigenvalues(m)[0] <= 0.0 {
        return Err(invalid(format!("{what} must be positive definite")));
    }
    Ok(())
}

/// The small inclusion `D = ρB_D + z_D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inclusion {
    pub center: Vec3,
    pub rho: f64,
    pub ref_volume: f64,
    pub m_mu: Mat3,
    pub m_eps: Mat3,
}

impl Inclusion {
    /// Ball-shaped inclusion with tensors from `materials`.
    pub fn sphere(materials: &Materials, center: Vec3, rho: f64) -> Result<Self> {
        let volume = 4.0 * PI / 3.0;
        Self::custom(
            center,
            rho,
            volume,
            polarization_tensor_sphere(materials.mu1r(), volume)?,
            polarization_tensor_sphere(materials.eps1r(), volume)?,
        )
    }

    pub fn custom(center: Vec3, rho: f64, ref_volume: f64, m_mu: Mat3, m_eps: Mat3) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(invalid("inclusion scale rho must be positive"));
        }
        check_spd(&m_mu, "M_D^mu")?;
        check_spd(&m_eps, "M_D^eps")?;
        Ok(Self { center, rho, ref_volume, m_mu, m_eps })
    }

    /// `ρκ > 0.1` means the leading-order expansion is getting rough.
    pub fn is_large(&self, kappa: f64) -> bool {
        self.rho * kappa > 0.1
    }
}

/// Trial inclusion `B_S` nucleated at search points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInclusion {
    pub ref_volume: f64,
    pub m_mu: Mat3,
    pub m_eps: Mat3,
}

impl TrialInclusion {
    /// Unit-ball trial with tensors from the trial parameters `(ε₂, μ₂)`.
    pub fn sphere(materials: &Materials) -> Result<Self> {
        let volume = 4.0 * PI / 3.0;
        Ok(Self {
            ref_volume: volume,
            m_mu: polarization_tensor_sphere(materials.mu2r(), volume)?,
            m_eps: polarization_tensor_sphere(materials.eps2r(), volume)?,
        })
    }

    pub fn tensor(&self, kind: Kind) -> &Mat3 {
        match kind {
            Kind::Permeable => &self.m_mu,
            Kind::Dielectric => &self.m_eps,
        }
    }
}

impl Inclusion {
    pub fn tensor(&self, kind: Kind) -> &Mat3 {
        match kind {
            Kind::Permeable => &self.m_mu,
            Kind::Dielectric => &self.m_eps,
        }
    }
}

/// Contrast constants for ball-shaped inclusions, always recomputed from the
/// materials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereConstants {
    /// `C̃` such that the multi-incidence map is `ρ³κ²C̃‖Im Γ‖²`.
    pub c_tilde: f64,
    /// `ã` such that the measurement-noise map covariance is `σ²ã²κ²(2n)⁻¹‖Im Γ‖²`.
    pub a_tilde: f64,
    /// `b` such that the medium-noise speckle kernel is `−bκ²Q`.
    pub b: f64,
}

impl SphereConstants {
    pub fn new(m: &Materials, kind: Kind, vol_d: f64, vol_s: f64) -> Self {
        let (p0, p1, p2, c) = match kind {
            Kind::Permeable => (m.mu0, m.mu1, m.mu2, m.c_mu()),
            Kind::Dielectric => (m.eps0, m.eps1, m.eps2, m.c_eps()),
        };
        let e2 = m.eps0 * m.eps0;
        Self {
            c_tilde: 36.0 * PI * p1 * p2 * c * vol_d * vol_s / (e2 * (2.0 * p0 + p1) * (2.0 * p0 + p2)),
            a_tilde: 3.0 * PI.sqrt() * (p0 - p2) * vol_s / (m.eps0 * (2.0 * p0 + p2)),
            b: 12.0 * PI * (p0 - p2) * vol_s / (e2 * (2.0 * p0 + p2)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    pub theta: Vec3,
    pub pol: Vec3,
}

/// `n` Fibonacci directions, each with its two triad polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceSet {
    pub directions: Vec<Vec3>,
    pub pols: Vec<(Vec3, Vec3)>,
}

impl IncidenceSet {
    pub fn fibonacci(n: usize) -> Result<Self> {
        let directions = fibonacci_sphere(n)?;
        Self::from_directions(directions)
    }

    pub fn from_directions(directions: Vec<Vec3>) -> Result<Self> {
        let pols = directions.iter().map(|&t| orthonormal_triad(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { directions, pols })
    }

    /// Same set with every direction and polarization mapped by `r`.
    pub fn rotated(&self, r: &Mat3) -> Self {
        let f = |v: Vec3| crate::math::mat_vec(r, v);
        Self {
            directions: self.directions.iter().map(|&d| f(d)).collect(),
            pols: self.pols.iter().map(|&(a, b)| (f(a), f(b))).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.directions.len()
    }

    /// All `2n` incidences ordered `(j, l)` with `l` fastest.
    pub fn incidences(&self) -> Vec<Incidence> {
        self.directions
            .iter()
            .zip(&self.pols)
            .flat_map(|(&theta, &(p1, p2))| [Incidence { theta, pol: p1 }, Incidence { theta, pol: p2 }])
            .collect()
    }
}

/// Plane wave `H₀ = θ⊥e^{iκθ·x}` and its curl `iκ(θ×θ⊥)e^{iκθ·x}`.
pub fn incident_field(theta: Vec3, pol: Vec3, kappa: f64, x: Vec3) -> Result<(Vec3C, Vec3C)> {
    if (norm(theta) - 1.0).abs() > 1e-9 || (norm(pol) - 1.0).abs() > 1e-9 {
        return Err(invalid("incident_field: direction and polarization must be unit vectors"));
    }
    if dot(theta, pol).abs() > 1e-9 {
        return Err(invalid("incident_field: polarization must be orthogonal to the direction"));
    }
    Ok(plane_wave(theta, pol, kappa, x))
}

#[inline]
pub(crate) fn plane_wave(theta: Vec3, pol: Vec3, kappa: f64, x: Vec3) -> (Vec3C, Vec3C) {
    let e = C64::from_polar(1.0, kappa * dot(theta, x));
    let h = pol.map(|c| e * c);
    let ie = C64::new(0.0, kappa) * e;
    let curl = cross(theta, pol).map(|c| ie * c);
    (h, curl)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCheck {
    pub lhs: C64,
    pub rhs: f64,
    pub error: f64,
}

/// `(1/n)Σⱼ e^{iκθⱼ·d}` against its limit `j₀(κ|d|)`.
pub fn direction_identity_check(incidences: &IncidenceSet, kappa: f64, d: Vec3) -> DirectionCheck {
    let n = incidences.n() as f64;
    let lhs: C64 = incidences.directions.iter().map(|&t| C64::from_polar(1.0, kappa * dot(t, d))).sum::<C64>() / n;
    let rhs = j0(kappa * norm(d));
    DirectionCheck { lhs, rhs, error: (lhs - rhs).norm() }
}

#[derive(Debug, Clone)]
pub struct DirectionMatrixCheck {
    /// `(1/n)ΣⱼΣₗ θ⊥θ⊥ᵀ e^{iκθ·d}`
    pub pol_sum: ComplexMat3,
    /// `(1/n)ΣⱼΣₗ (θ×θ⊥)(θ×θ⊥)ᵀ e^{iκθ·d}`
    pub cross_sum: ComplexMat3,
    /// `−(4π/κε₀) Im Γ(d, 0)`
    pub limit: Mat3,
    pub pol_error: f64,
    pub cross_error: f64,
}

pub fn direction_matrix_check(incidences: &IncidenceSet, ctx: &WaveContext, d: Vec3) -> DirectionMatrixCheck {
    let n = incidences.n() as f64;
    let mut pol_sum = CZERO33;
    let mut cross_sum = CZERO33;
    for (&t, &(p1, p2)) in incidences.directions.iter().zip(&incidences.pols) {
        let e = C64::from_polar(1.0 / n, ctx.kappa * dot(t, d));
        for p in [p1, p2] {
            let q = cross(t, p);
            for i in 0..3 {
                for j in 0..3 {
                    pol_sum[i][j] += e * (p[i] * p[j]);
                    cross_sum[i][j] += e * (q[i] * q[j]);
                }
            }
        }
    }
    let f = -4.0 * PI / (ctx.kappa * ctx.eps0);
    let limit = mat_scale(f, &im_dyadic_green(ctx, d, [0.0; 3]));
    let err = |m: &ComplexMat3| {
        let mut e: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                e = e.max((m[i][j] - limit[i][j]).norm());
            }
        }
        e
    };
    DirectionMatrixCheck { pol_error: err(&pol_sum), cross_error: err(&cross_sum), pol_sum, cross_sum, limit }
}

/// Rotation about a unit axis by `angle` (Rodrigues).
pub fn rotation(axis: Vec3, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    let k = crate::math::cross_matrix(axis);
    let kk = crate::math::mat_mul(&k, &k);
    let mut r = IDENTITY;
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += s * k[i][j] + (1.0 - c) * kk[i][j];
        }
    }
    r
}

/// `M ↦ RMRᵀ` for tensors of a rotated scene.
pub fn rotate_tensor(r: &Mat3, m: &Mat3) -> Mat3 {
    crate::math::mat_mul(&crate::math::mat_mul(r, m), &transpose(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_values() {
        let m = polarization_tensor_sphere(1.0, 2.5).unwrap();
        assert_eq!(m, mat_scale(2.5, &IDENTITY));
        let m = polarization_tensor_sphere(2.0, 1.0).unwrap();
        assert!((m[0][0] - 0.6).abs() < 1e-15);
        assert!(polarization_tensor_sphere(0.0, 1.0).is_err());
        assert!(polarization_tensor_sphere(-1.0, 1.0).is_err());
    }

    #[test]
    fn incident_field_rejects_bad_triads() {
        assert!(incident_field([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 1.0, [0.0; 3]).is_err());
        assert!(incident_field([0.0, 0.0, 2.0], [1.0, 0.0, 0.0], 1.0, [0.0; 3]).is_err());
    }

    #[test]
    fn direction_sum_at_origin() {
        let set = IncidenceSet::fibonacci(17).unwrap();
        let c = direction_identity_check(&set, 2.0, [0.0; 3]);
        assert!((c.lhs - C64::from(1.0)).norm() < 1e-14);
        assert_eq!(c.rhs, 1.0);
    }

    #[test]
    fn sphere_constant_signs_follow_contrasts() {
        let m = Materials { eps0: 1.0, mu0: 1.0, eps1: 1.0, mu1: 3.0, eps2: 1.0, mu2: 3.0, omega: 1.0 };
        let k = SphereConstants::new(&m, Kind::Permeable, 1.0, 1.0);
        assert!(k.c_tilde > 0.0 && k.a_tilde < 0.0 && k.b < 0.0);
        let m2 = Materials { mu2: 0.5, ..m };
        let k2 = SphereConstants::new(&m2, Kind::Permeable, 1.0, 1.0);
        assert!(k2.c_tilde < 0.0 && k2.a_tilde > 0.0 && k2.b > 0.0);
    }
}
