use super::{add, cross, dot, norm, scale, sub, Vec3};
use crate::error::{invalid, Result};
use std::f64::consts::PI;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653; // π(3 − √5)

/// Node `i` of the `n`-point Fibonacci spiral lattice on the unit sphere.
///
/// Heights are the midpoints of `n` equal bands, so every node carries the
/// same area `4π/n`.
#[inline]
pub fn fibonacci_point(i: usize, n: usize) -> Vec3 {
    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = GOLDEN_ANGLE * i as f64;
    let (s, c) = phi.sin_cos();
    [r * c, r * s, z]
}

pub fn fibonacci_sphere(n: usize) -> Result<Vec<Vec3>> {
    if n == 0 {
        return Err(invalid("fibonacci_sphere needs n >= 1"));
    }
    Ok((0..n).map(|i| fibonacci_point(i, n)).collect())
}

/// Right-handed orthonormal pair `(θ⊥¹, θ⊥²)` with `θ⊥¹ × θ⊥² = θ`.
///
/// `θ = e₃` maps to `(e₁, e₂)`; the helper axis switches to `e₂` only when
/// `θ` is close to `±e₁`.
pub fn orthonormal_triad(theta: Vec3) -> Result<(Vec3, Vec3)> {
    let n = norm(theta);
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("orthonormal_triad: zero direction"));
    }
    if (n - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("orthonormal_triad: |theta| = {n}, expected 1")));
    }
    let helper = if theta[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = sub(helper, scale(dot(helper, theta), theta));
    let p1 = scale(1.0 / norm(p), p);
    let p2 = cross(theta, p1);
    Ok((p1, p2))
}

/// Equal-weight Fibonacci quadrature on a sphere.
#[derive(Debug, Clone)]
pub struct SphereMesh {
    pub center: Vec3,
    pub radius: f64,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec3>,
}

impl SphereMesh {
    pub fn new(center: Vec3, radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("sphere mesh radius must be positive"));
        }
        let normals = fibonacci_sphere(n)?;
        let nodes = normals.iter().map(|&u| add(center, scale(radius, u))).collect();
        let w = 4.0 * PI * radius * radius / n as f64;
        Ok(Self { center, radius, nodes, weights: vec![w; n], normals })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Distance from `x` to the sphere surface.
    pub fn distance_to_surface(&self, x: Vec3) -> f64 {
        (norm(sub(x, self.center)) - self.radius).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_unit() {
        let p = fibonacci_sphere(1).unwrap();
        assert_eq!(p.len(), 1);
        assert!((norm(p[0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_points_rejected() {
        assert!(fibonacci_sphere(0).is_err());
    }

    #[test]
    fn lattice_is_balanced() {
        let p = fibonacci_sphere(1000).unwrap();
        let mut m = [0.0; 3];
        for q in &p {
            m = add(m, *q);
        }
        assert!(norm(scale(1e-3, m)) < 0.01);
    }

    #[test]
    fn mesh_weights_sum_to_area() {
        let mesh = SphereMesh::new([0.5, -1.0, 2.0], 3.0, 777).unwrap();
        let total: f64 = mesh.weights.iter().sum();
        let area = 4.0 * PI * 9.0;
        assert!((total - area).abs() / area < 1e-12);
        for (x, nu) in mesh.nodes.iter().zip(&mesh.normals) {
            let d = scale(1.0 / 3.0, sub(*x, mesh.center));
            assert!(norm(sub(d, *nu)) < 1e-14);
        }
    }

    #[test]
    fn canonical_triad() {
        let (p1, p2) = orthonormal_triad([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(p1, [1.0, 0.0, 0.0]);
        assert_eq!(p2, [0.0, 1.0, 0.0]);
        assert!(orthonormal_triad([0.0; 3]).is_err());
        assert!(orthonormal_triad([0.0, 0.0, 2.0]).is_err());
    }
}
