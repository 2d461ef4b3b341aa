//! Small fixed-size linear algebra, special functions, point sets and random
//! streams.
//!
//! Vectors and matrices are plain arrays so they stay `Copy` and live on the
//! stack; matrices are row-major, `m[i][j]` is row `i`, column `j`.

mod bessel;
mod random;
mod sphere;

pub use bessel::spherical_bessel;
pub(crate) use bessel::{j0, j1, j2};
pub use random::{pairwise_sum, sample_random_field, stream, RandomField, RandomFieldSpec};
pub use sphere::{fibonacci_point, fibonacci_sphere, orthonormal_triad, SphereMesh};

pub use num_complex::Complex64 as C64;

pub type Vec3 = [f64; 3];
pub type Vec3C = [C64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type ComplexMat3 = [[C64; 3]; 3];

pub const ZERO_C: C64 = C64 { re: 0.0, im: 0.0 };
pub const I_UNIT: C64 = C64 { re: 0.0, im: 1.0 };
pub const CZERO3: Vec3C = [ZERO_C; 3];
pub const CZERO33: ComplexMat3 = [[ZERO_C; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector along `a`, `None` for the zero vector.
pub fn unit(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(1.0 / n, a))
    } else {
        None
    }
}

#[inline]
pub fn to_complex(a: Vec3) -> Vec3C {
    [C64::from(a[0]), C64::from(a[1]), C64::from(a[2])]
}

#[inline]
pub fn cscale(s: C64, a: Vec3C) -> Vec3C {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn cadd(a: Vec3C, b: Vec3C) -> Vec3C {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Bilinear dot product `a·b = Σ aᵢbᵢ`, no conjugation.
#[inline]
pub fn cdot(a: Vec3C, b: Vec3C) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn ccross(a: Vec3C, b: Vec3C) -> Vec3C {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `a × b` for a complex `a` and real `b`.
#[inline]
pub fn ccross_r(a: Vec3C, b: Vec3) -> Vec3C {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn cconj(a: Vec3C) -> Vec3C {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

pub fn cnorm(a: Vec3C) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

#[inline]
pub fn mat_cvec(m: &Mat3, v: Vec3C) -> Vec3C {
    let mut out = CZERO3;
    for i in 0..3 {
        out[i] = v[0] * m[i][0] + v[1] * m[i][1] + v[2] * m[i][2];
    }
    out
}

#[inline]
pub fn cmat_cvec(m: &ComplexMat3, v: Vec3C) -> Vec3C {
    let mut out = CZERO3;
    for i in 0..3 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn cmat_mul(a: &ComplexMat3, b: &ComplexMat3) -> ComplexMat3 {
    let mut out = CZERO33;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose<T: Copy>(m: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut out = *m;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub fn cmat_conj(m: &ComplexMat3) -> ComplexMat3 {
    m.map(|row| row.map(|c| c.conj()))
}

pub fn to_cmat(m: &Mat3) -> ComplexMat3 {
    m.map(|row| row.map(C64::from))
}

pub fn cmat_sub(a: &ComplexMat3, b: &ComplexMat3) -> ComplexMat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] -= b[i][j];
        }
    }
    out
}

pub fn cmat_add(a: &ComplexMat3, b: &ComplexMat3) -> ComplexMat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn cmat_scale(s: C64, m: &ComplexMat3) -> ComplexMat3 {
    m.map(|row| row.map(|c| s * c))
}

pub fn mat_scale(s: f64, m: &Mat3) -> Mat3 {
    m.map(|row| row.map(|c| s * c))
}

pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i] * b[j];
        }
    }
    out
}

pub fn couter(a: Vec3C, b: Vec3C) -> ComplexMat3 {
    let mut out = CZERO33;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i] * b[j];
        }
    }
    out
}

/// Cross-product matrix: `cross_matrix(v) p = v × p`.
pub fn cross_matrix<T: Copy + std::ops::Neg<Output = T> + Default>(v: [T; 3]) -> [[T; 3]; 3] {
    let z = T::default();
    [[z, -v[2], v[1]], [v[2], z, -v[0]], [-v[1], v[0], z]]
}

/// The matrix `A×ν` defined by `(A×ν)p = (Ap)×ν`: each row is crossed.
///
/// Row `i` of `A×ν` collects the `i`-th component of `(Ap)×ν`, which mixes
/// rows `i+1` and `i+2` of `A`.
pub fn mat_cross(a: &ComplexMat3, nu: Vec3) -> ComplexMat3 {
    // (Ap)×ν = -ν×(Ap) = -[ν]× A p
    let nx = cross_matrix(nu);
    let mut out = CZERO33;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = -(a[0][j] * nx[i][0] + a[1][j] * nx[i][1] + a[2][j] * nx[i][2]);
        }
    }
    out
}

/// Contraction `A:B = Σᵢⱼ aᵢⱼbᵢⱼ`, bilinear.
pub fn contract(a: &ComplexMat3, b: &ComplexMat3) -> C64 {
    let mut s = ZERO_C;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

pub fn contract_real(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Frobenius norm `√(Σ|aᵢⱼ|²)`.
pub fn frobenius(a: &ComplexMat3) -> f64 {
    a.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_real(a: &Mat3) -> f64 {
    a.iter().flatten().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn trace(a: &ComplexMat3) -> C64 {
    a[0][0] + a[1][1] + a[2][2]
}

/// Largest entrywise modulus, handy for matrix error norms.
pub fn max_abs(a: &ComplexMat3) -> f64 {
    a.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Sorted eigenvalues of a real symmetric 3×3 matrix (closed-form
/// trigonometric solution).
pub fn sym_eigenvalues(a: &Mat3) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut e = [a[0][0], a[1][1], a[2][2]];
        e.sort_by(|x, y| x.total_cmp(y));
        return e;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= q;
        for v in row.iter_mut() {
            *v /= p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e3, e2, e1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_of_identity() {
        let i3 = to_cmat(&IDENTITY);
        assert_eq!(contract(&i3, &i3), C64::from(3.0));
        assert!((frobenius(&i3) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn contraction_with_identity_is_trace() {
        let a = [
            [C64::new(1.0, 2.0), C64::new(0.5, 0.0), C64::new(0.0, 1.0)],
            [C64::new(-1.0, 0.0), C64::new(3.0, -1.0), C64::new(0.0, 0.0)],
            [C64::new(2.0, 2.0), C64::new(0.0, 0.0), C64::new(-4.0, 0.5)],
        ];
        let i3 = to_cmat(&IDENTITY);
        assert_eq!(contract(&a, &i3), trace(&a));
    }

    #[test]
    fn mat_cross_acts_row_wise() {
        let a = [
            [C64::new(1.0, 2.0), C64::new(0.5, 0.0), C64::new(0.0, 1.0)],
            [C64::new(-1.0, 0.0), C64::new(3.0, -1.0), C64::new(0.0, 0.0)],
            [C64::new(2.0, 2.0), C64::new(0.0, 0.0), C64::new(-4.0, 0.5)],
        ];
        let nu = [0.2, -0.7, 0.4];
        let p = [C64::new(0.3, -0.1), C64::new(1.0, 0.2), C64::new(-0.5, 0.0)];
        let lhs = cmat_cvec(&mat_cross(&a, nu), p);
        let rhs = ccross_r(cmat_cvec(&a, p), nu);
        for k in 0..3 {
            assert!((lhs[k] - rhs[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn eigenvalues_of_diagonal_and_rotated() {
        let e = sym_eigenvalues(&[[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.5]]);
        assert_eq!(e, [-1.0, 0.5, 2.0]);
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let e = sym_eigenvalues(&a);
        for (x, y) in e.iter().zip([1.0, 3.0, 5.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
