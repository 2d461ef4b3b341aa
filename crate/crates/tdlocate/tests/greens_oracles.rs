//! Green's functions and Bessel values against independent oracles:
//! finite differences of a locally written scalar kernel, a power series,
//! and a frozen high-precision table.

use num_complex::Complex64 as C;
use proptest::prelude::*;
use std::f64::consts::PI;
use tdlocate::greens::*;
use tdlocate::math::{spherical_bessel, transpose};
use tdlocate::scene::incident_field;

fn g_oracle(kappa: f64, x: [f64; 3], y: [f64; 3]) -> C {
    let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
    C::from_polar(1.0, kappa * r) / (4.0 * PI * r)
}

fn shifted(x: [f64; 3], a: usize, h: f64) -> [f64; 3] {
    let mut p = x;
    p[a] += h;
    p
}

/// `−ε₀(I + ∇∇/κ²)g` with the Hessian from central differences.
fn gamma_fd(kappa: f64, eps0: f64, x: [f64; 3], y: [f64; 3]) -> [[C; 3]; 3] {
    let h = 1e-4;
    let g = |p| g_oracle(kappa, p, y);
    let mut m = [[C::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let hess = if a == b {
                (g(shifted(x, a, h)) - 2.0 * g(x) + g(shifted(x, a, -h))) / (h * h)
            } else {
                (g(shifted(shifted(x, a, h), b, h)) - g(shifted(shifted(x, a, h), b, -h))
                    - g(shifted(shifted(x, a, -h), b, h))
                    + g(shifted(shifted(x, a, -h), b, -h)))
                    / (4.0 * h * h)
            };
            let id = if a == b { g(x) } else { C::new(0.0, 0.0) };
            m[a][b] = -eps0 * (id + hess / (kappa * kappa));
        }
    }
    m
}

fn max_abs_diff(a: &[[C; 3]; 3], b: &[[C; 3]; 3]) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            e = e.max((a[i][j] - b[i][j]).norm());
        }
    }
    e
}

fn max_abs(a: &[[C; 3]; 3]) -> f64 {
    a.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
}

const PAIRS: [([f64; 3], [f64; 3]); 4] = [
    ([0.3, -0.5, 0.8], [1.5, 0.7, -0.4]),
    ([0.0, 0.0, 0.0], [0.0, 0.0, 0.25]),
    ([2.0, 1.0, -1.0], [-3.0, 2.5, 4.0]),
    ([0.1, 0.2, 0.3], [0.9, 0.2, 0.3]),
];

#[test]
fn scalar_green_matches_closed_form() {
    let ctx = WaveContext::new(1.7, 2.0).unwrap();
    for (x, y) in PAIRS {
        let got = scalar_green(&ctx, x, y).unwrap();
        let want = g_oracle(1.7, x, y);
        assert!((got - want).norm() <= 1e-14 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn grad_green_matches_finite_differences() {
    let ctx = WaveContext::new(1.3, 1.0).unwrap();
    let h = 1e-5;
    for (x, y) in PAIRS {
        let got = grad_scalar_green(&ctx, x, y).unwrap();
        for a in 0..3 {
            let fd = (g_oracle(1.3, shifted(x, a, h), y) - g_oracle(1.3, shifted(x, a, -h), y)) / (2.0 * h);
            assert!((got[a] - fd).norm() < 1e-6 * (1.0 + fd.norm()), "axis {a}: {} vs {fd}", got[a]);
        }
    }
}

#[test]
fn dyadic_green_matches_hessian_construction() {
    for (kappa, eps0) in [(1.0, 1.0), (2.3, 0.7)] {
        let ctx = WaveContext::new(kappa, eps0).unwrap();
        for (x, y) in PAIRS {
            let got = dyadic_green(&ctx, x, y).unwrap();
            let want = gamma_fd(kappa, eps0, x, y);
            let rel = max_abs_diff(&got, &want) / max_abs(&want);
            assert!(rel < 1e-5, "relative error {rel:.3e}");
        }
    }
}

#[test]
fn curl_matches_finite_difference_curl() {
    let ctx = WaveContext::new(1.1, 1.4).unwrap();
    let h = 1e-5;
    for (x, y) in PAIRS {
        let got = curl_dyadic_green(&ctx, x, y).unwrap();
        // column j of the curl is ∇×(Γ e_j)
        let d = |a: usize, i: usize, j: usize| {
            let p = dyadic_green(&ctx, shifted(x, a, h), y).unwrap()[i][j];
            let m = dyadic_green(&ctx, shifted(x, a, -h), y).unwrap()[i][j];
            (p - m) / (2.0 * h)
        };
        let mut want = [[C::new(0.0, 0.0); 3]; 3];
        for j in 0..3 {
            want[0][j] = d(1, 2, j) - d(2, 1, j);
            want[1][j] = d(2, 0, j) - d(0, 2, j);
            want[2][j] = d(0, 1, j) - d(1, 0, j);
        }
        let rel = max_abs_diff(&got, &want) / max_abs(&want);
        assert!(rel < 1e-5, "relative error {rel:.3e}");
    }
}

#[test]
fn im_dyadic_green_is_imaginary_part() {
    let ctx = WaveContext::new(0.9, 1.2).unwrap();
    for (x, y) in PAIRS {
        let full = dyadic_green(&ctx, x, y).unwrap();
        let im = im_dyadic_green(&ctx, x, y);
        for i in 0..3 {
            for j in 0..3 {
                assert!((full[i][j].im - im[i][j]).abs() < 1e-10, "({i},{j})");
            }
        }
    }
}

#[test]
fn im_dyadic_green_coincident_value() {
    let ctx = WaveContext::new(2.0, 3.0).unwrap();
    let m = im_dyadic_green(&ctx, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]);
    let want = -3.0 * 2.0 / (6.0 * PI);
    for i in 0..3 {
        for j in 0..3 {
            let w = if i == j { want } else { 0.0 };
            assert!((m[i][j] - w).abs() < 1e-15);
        }
    }
}

#[test]
fn curl_im_green_matches_finite_difference() {
    let ctx = WaveContext::new(1.0, 1.0).unwrap();
    let h = 1e-5;
    let (y, z) = ([0.2, -0.1, 0.4], [1.0, 0.5, -0.3]);
    let b = curl_im_dyadic_green(&ctx, y, z);
    let d = |a: usize, i: usize, j: usize| {
        (im_dyadic_green(&ctx, y, shifted(z, a, h))[i][j] - im_dyadic_green(&ctx, y, shifted(z, a, -h))[i][j]) / (2.0 * h)
    };
    for j in 0..3 {
        let want = [d(1, 2, j) - d(2, 1, j), d(2, 0, j) - d(0, 2, j), d(0, 1, j) - d(1, 0, j)];
        for i in 0..3 {
            assert!((b[i][j] - want[i]).abs() < 1e-8, "({i},{j}) {} vs {}", b[i][j], want[i]);
        }
    }
}

#[test]
fn plane_wave_curl_matches_finite_difference() {
    let kappa = 1.6;
    let theta = [0.0, 0.6, 0.8];
    let pol = [1.0, 0.0, 0.0];
    let x = [0.3, -0.2, 0.7];
    let h = 1e-5;
    let (_, curl) = incident_field(theta, pol, kappa, x).unwrap();
    let d = |a: usize, i: usize| {
        (incident_field(theta, pol, kappa, shifted(x, a, h)).unwrap().0[i]
            - incident_field(theta, pol, kappa, shifted(x, a, -h)).unwrap().0[i])
            / (2.0 * h)
    };
    let want = [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)];
    for i in 0..3 {
        assert!((curl[i] - want[i]).norm() < 1e-8);
    }
}

// Frozen from a 40-digit evaluation of sqrt(π/2x)·J_{n+1/2}(x).
const BESSEL_TABLE: [(f64, [f64; 3]); 10] = [
    (0.5, [0.95885107720840600055, 0.16253703063606656886, 0.016371106607993412617]),
    (1.0, [0.84147098480789650665, 0.30116867893975678925, 0.062035052011373861102]),
    (2.5, [0.23938885764158259762, 0.41621298927540652498, 0.26006672948890523236]),
    (4.0, [-0.18920062382698206284, 0.11611074925915746295, 0.27628368577135016005]),
    (5.0, [-0.19178485493262769378, -0.095089408079170791649, 0.13473121008512521879]),
    (7.5, [0.12506666356996518106, -0.029542487235341417322, -0.13688365846410174799]),
    (10.0, [-0.05440211108893698134, 0.078466941798751547092, 0.077942193628562445468]),
    (13.3, [0.050343591142601674719, -0.052060570042185546539, -0.06208657686640292519]),
    (17.0, [-0.05655279363997393278, 0.012859443788918999379, 0.058822107249783167965]),
    (20.0, [0.045647262536381382719, -0.018121739963850530167, -0.048365523530958962244]),
];

#[test]
fn bessel_matches_frozen_table() {
    for (x, want) in BESSEL_TABLE {
        for n in 0..3 {
            let got = spherical_bessel(n, x).unwrap();
            assert!((got - want[n as usize]).abs() < 1e-12, "j{n}({x}) = {got} vs {}", want[n as usize]);
        }
    }
}

/// `jₙ(x) = xⁿ Σₖ (−x²/2)ᵏ / (k! (2n+2k+1)!!)`, accurate in f64 for small x.
fn bessel_series(n: u32, x: f64) -> f64 {
    let mut dfact = 1.0;
    for m in (1..=2 * n + 1).step_by(2) {
        dfact *= m as f64;
    }
    let mut term = x.powi(n as i32) / dfact;
    let mut sum = term;
    for k in 1..40 {
        term *= -0.5 * x * x / (k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
    }
    sum
}

proptest! {
    #[test]
    fn bessel_matches_series(x in 0.0f64..4.0, n in 0u32..3) {
        let got = spherical_bessel(n, x).unwrap();
        prop_assert!((got - bessel_series(n, x)).abs() < 1e-12);
    }

    #[test]
    fn dyadic_reciprocity(
        x in prop::array::uniform3(-3.0f64..3.0),
        y in prop::array::uniform3(-3.0f64..3.0),
        kappa in 0.2f64..4.0,
    ) {
        let ctx = WaveContext::new(kappa, 1.0).unwrap();
        prop_assume!(tdlocate::math::norm(tdlocate::math::sub(x, y)) > 1e-3);
        let a = dyadic_green(&ctx, x, y).unwrap();
        let b = transpose(&dyadic_green(&ctx, y, x).unwrap());
        prop_assert!(max_abs_diff(&a, &b) <= 1e-13 * max_abs(&a));
        // Γ is symmetric
        prop_assert!(max_abs_diff(&a, &transpose(&a)) <= 1e-13 * max_abs(&a));
        let c = curl_dyadic_green(&ctx, x, y).unwrap();
        let d = transpose(&curl_dyadic_green(&ctx, y, x).unwrap());
        prop_assert!(max_abs_diff(&c, &d) <= 1e-13 * max_abs(&c));
    }

    #[test]
    fn im_green_is_even_and_bounded(d in prop::array::uniform3(-5.0f64..5.0)) {
        let ctx = WaveContext::new(1.0, 1.0).unwrap();
        let a = im_dyadic_green(&ctx, d, [0.0; 3]);
        let b = im_dyadic_green(&ctx, [0.0; 3], d);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((a[i][j] - b[i][j]).abs() < 1e-15);
                prop_assert!((a[i][j] - a[j][i]).abs() < 1e-15);
                prop_assert!(a[i][j].abs() <= 1.0 / (6.0 * PI) + 1e-15);
            }
        }
    }
}

#[test]
fn singular_pairs_are_rejected() {
    let ctx = WaveContext::new(1.0, 1.0).unwrap();
    let x = [1.0, 2.0, 3.0];
    assert!(dyadic_green(&ctx, x, x).is_err());
    assert!(curl_dyadic_green(&ctx, x, [1.0, 2.0, 3.0 + 1e-9]).is_err());
    assert!(scalar_green(&ctx, x, x).is_err());
}

#[test]
fn hk_residual_shrinks_with_radius() {
    let ctx = WaveContext::new(1.0, 1.0).unwrap();
    let lam = 2.0 * PI;
    let (x, y) = ([0.3, -0.5, 0.8], [1.5, 0.7, -0.4]);
    for v in [HkVariant::Plain, HkVariant::Tangential, HkVariant::Curl] {
        let a = hk_residual(&ctx, v, 5.0 * lam, x, y, None).unwrap();
        let b = hk_residual(&ctx, v, 10.0 * lam, x, y, None).unwrap();
        assert!(b.norm < 0.6 * a.norm, "{v:?}: {} -> {}", a.norm, b.norm);
        assert!(b.norm < 0.05 * tdlocate::math::frobenius_real(&b.prediction));
    }
}
