use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;
use tdlocate::forward::*;
use tdlocate::greens::{hk_residual, HkVariant};
use tdlocate::imaging::*;
use tdlocate::math::*;
use tdlocate::scene::*;
use tdlocate::Error;

const LAM: f64 = 2.0 * PI;

fn permeable() -> Materials {
    Materials { eps0: 1.0, mu0: 1.0, eps1: 1.0, mu1: 3.0, eps2: 1.0, mu2: 3.0, omega: 1.0 }
}

fn dielectric() -> Materials {
    Materials { eps0: 1.0, mu0: 1.0, eps1: 3.0, mu1: 1.0, eps2: 3.0, mu2: 1.0, omega: 1.0 }
}

struct Case {
    materials: Materials,
    inclusion: Inclusion,
    trial: TrialInclusion,
    data: FilteredBoundaryData,
}

fn case(materials: Materials, zd: Vec3, n_nodes: usize, n_dirs: usize) -> Case {
    let inclusion = Inclusion::sphere(&materials, zd, 0.05).unwrap();
    let trial = TrialInclusion::sphere(&materials).unwrap();
    let mesh = Arc::new(SphereMesh::new([0.0; 3], 10.0 * LAM, n_nodes).unwrap());
    let incs = IncidenceSet::fibonacci(n_dirs).unwrap().incidences();
    let data = synthesize_all(&materials, &inclusion, &mesh, &incs).unwrap();
    Case { materials, inclusion, trial, data }
}

fn cmax(v: &[(Vec3C, Vec3C)]) -> f64 {
    v.iter().flat_map(|(a, b)| a.iter().chain(b.iter())).map(|c| c.norm()).fold(0.0, f64::max)
}

#[test]
fn backpropagation_of_zero_data_is_zero() {
    let c = case(permeable(), [0.4, 0.0, 0.0], 300, 4);
    let zero = FilteredBoundaryData::zeros(c.data.mesh.clone(), c.data.incidences.clone());
    let ctx = c.materials.wave().unwrap();
    assert_eq!(cmax(&backpropagate(&zero, &ctx, [0.1, 0.2, 0.3]).unwrap()), 0.0);
}

#[test]
fn batched_backpropagation_matches_direct_sum() {
    let c = case(permeable(), [0.4, -0.2, 0.1], 700, 6);
    let ctx = c.materials.wave().unwrap();
    let pts: Vec<Vec3> = (0..30).map(|i| [0.1 * i as f64 - 1.0, 0.3, -0.2]).collect();
    let batched = backpropagate_many(&c.data, &ctx, &pts, Needs { u: true, curl: true }).unwrap();
    for (p, b) in pts.iter().zip(&batched) {
        let d = backpropagate(&c.data, &ctx, *p).unwrap();
        let scale = cmax(&d);
        for ((u1, c1), (u2, c2)) in d.iter().zip(b) {
            for k in 0..3 {
                assert!((u1[k] - u2[k]).norm() <= 1e-12 * scale);
                assert!((c1[k] - c2[k]).norm() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn backpropagation_is_linear() {
    let c1 = case(permeable(), [0.4, -0.2, 0.1], 400, 3);
    let c2 = case(dielectric(), [-0.7, 0.5, 0.0], 400, 3);
    let ctx = c1.materials.wave().unwrap();
    let (a, b) = (C64::new(0.7, -1.3), C64::new(-2.0, 0.4));
    let mut mix = c1.data.clone();
    for (col, (x, y)) in mix.values.iter_mut().zip(c1.data.values.iter().zip(&c2.data.values)) {
        for (v, (p, q)) in col.iter_mut().zip(x.iter().zip(y)) {
            for k in 0..3 {
                v[k] = a * p[k] + b * q[k];
            }
        }
    }
    let z = [0.2, 0.1, -0.3];
    let u1 = backpropagate(&c1.data, &ctx, z).unwrap();
    let u2 = backpropagate(&c2.data, &ctx, z).unwrap();
    let um = backpropagate(&mix, &ctx, z).unwrap();
    // W is the conjugate, so coefficients enter conjugated
    let scale = cmax(&um);
    for k in 0..um.len() {
        for q in 0..3 {
            let want = a.conj() * u1[k].0[q] + b.conj() * u2[k].0[q];
            assert!((um[k].0[q] - want).norm() <= 1e-12 * scale);
        }
    }
}

#[test]
fn search_point_on_boundary_is_singular() {
    let c = case(permeable(), [0.4, 0.0, 0.0], 100, 2);
    let ctx = c.materials.wave().unwrap();
    let on = c.data.mesh.nodes[3];
    assert!(matches!(backpropagate(&c.data, &ctx, on), Err(Error::Singularity { .. })));
}

#[test]
fn single_incidence_matches_hk_quadrature_path() {
    // td_single = ρ³κ⁴a_μ(μ₁ᵣ−1)/ε₀² Re{M_S H₀(z_S)·R̄ M_D H̄₀(z_D)}, with R the
    // tangential Helmholtz-Kirchhoff quadrature on the same nodes
    let zd = [0.4, -0.2, 0.1];
    let c = case(permeable(), zd, 2000, 1);
    let ctx = c.materials.wave().unwrap();
    let m = &c.materials;
    for zs in [zd, [0.9, -0.2, 0.3], [0.0, 0.5, -0.4]] {
        let hk = hk_residual(&ctx, HkVariant::Tangential, 10.0 * LAM, zs, zd, Some(2000)).unwrap();
        for (k, inc) in c.data.incidences.iter().enumerate() {
            let got = td_single(&c.data, k, zs, m, &c.trial).unwrap();
            let (hs, _) = incident_field(inc.theta, inc.pol, 1.0, zs).unwrap();
            let (hd, _) = incident_field(inc.theta, inc.pol, 1.0, zd).unwrap();
            let left = mat_cvec(&c.trial.m_mu, hs);
            let right = cmat_cvec(&cmat_conj(&hk.quadrature), cconj(mat_cvec(&c.inclusion.m_mu, hd)));
            let want = 0.05f64.powi(3) * m.a_mu() * (m.mu1r() - 1.0) * cdot(left, right).re;
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-12), "{got} vs {want}");
        }
    }
}

#[test]
fn multi_with_one_direction_is_sum_of_singles() {
    let c = {
        let m = permeable();
        let inclusion = Inclusion::sphere(&m, [0.3, 0.0, 0.0], 0.05).unwrap();
        let mesh = Arc::new(SphereMesh::new([0.0; 3], 10.0 * LAM, 800).unwrap());
        let incs = IncidenceSet::from_directions(vec![[0.0, 0.6, 0.8]]).unwrap().incidences();
        let data = synthesize_all(&m, &inclusion, &mesh, &incs).unwrap();
        Case { materials: m, inclusion, trial: TrialInclusion::sphere(&m).unwrap(), data }
    };
    let grid = SearchGrid::new([0.0, -0.2, 0.1], 0.3, [3, 2, 1]).unwrap();
    let map = td_multi(&c.data, &grid, &c.materials, &c.trial).unwrap();
    for (i, v) in map.values.iter().enumerate() {
        let z = grid.point(i);
        let s = td_single(&c.data, 0, z, &c.materials, &c.trial).unwrap() + td_single(&c.data, 1, z, &c.materials, &c.trial).unwrap();
        assert!((v - s).abs() <= 1e-12 * s.abs().max(1e-15));
    }
}

#[test]
fn map_tracks_closed_form_for_both_kinds() {
    for m in [permeable(), dielectric()] {
        let zd = [0.5, -0.3, 0.2];
        let c = case(m, zd, 2000, 60);
        let grid = SearchGrid::slice(zd, LAM / 16.0, 11, 2).unwrap();
        let map = td_multi(&c.data, &grid, &c.materials, &c.trial).unwrap();
        let cf = td_closed_form_map(&grid, &c.materials, &c.inclusion, &c.trial).unwrap();
        let peak = cf.values.iter().cloned().fold(f64::MIN, f64::max);
        for (a, b) in map.values.iter().zip(&cf.values) {
            if *b > 0.1 * peak {
                assert!((a - b).abs() < 0.05 * b, "{a} vs {b}");
            }
        }
        assert_eq!(map.argmax(), cf.argmax());
    }
}

#[test]
fn zero_contrast_map_vanishes() {
    let m = Materials { mu1: 1.0, ..permeable() };
    let c = case(m, [0.2, 0.0, 0.0], 300, 5);
    let grid = SearchGrid::slice([0.2, 0.0, 0.0], 0.4, 5, 2).unwrap();
    let map = td_multi(&c.data, &grid, &c.materials, &c.trial).unwrap();
    assert!(map.values.iter().all(|v| *v == 0.0));
    assert!(matches!(peak_metrics(&map, [0.0; 3]), Err(Error::DegenerateMap(_))));
}

#[test]
fn trial_sign_flip_negates_map() {
    let zd = [0.2, 0.1, 0.0];
    let c = case(permeable(), zd, 600, 12);
    let grid = SearchGrid::slice(zd, 0.5, 7, 0).unwrap();
    let m2 = Materials { mu2: 1.0 / 3.0, ..permeable() };
    let trial2 = TrialInclusion::sphere(&m2).unwrap();
    let a = td_multi(&c.data, &grid, &c.materials, &c.trial).unwrap();
    let b = td_multi(&c.data, &grid, &m2, &trial2).unwrap();
    // map ∝ a_μ M_S, a scalar for balls: pointwise ratio is one negative constant
    let ratio = m2.a_mu() * trial2.m_mu[0][0] / (c.materials.a_mu() * c.trial.m_mu[0][0]);
    assert!(ratio < 0.0);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((y - ratio * x).abs() <= 1e-12 * x.abs().max(1e-14));
    }
}

#[test]
fn analytic_pattern_peaks_at_inclusion_with_rayleigh_width() {
    let ctx = permeable().wave().unwrap();
    let zd = [0.31, -0.17, 0.05];
    let grid = SearchGrid::slice([0.3, -0.2, 0.05], LAM / 16.0, 41, 2).unwrap();
    let map = im_green_norm_map(&grid, &ctx, zd);
    let m = peak_metrics(&map, zd).unwrap();
    assert!(m.localization_error <= LAM / 16.0);
    for w in m.fwhm {
        assert!((0.35 * LAM..=0.6 * LAM).contains(&w), "fwhm {}", w / LAM);
    }
    let shifted = ImagingMap { grid: map.grid.clone(), values: map.values.iter().map(|v| v + 3.0).collect() };
    assert_eq!(shifted.argmax(), map.argmax());
}

#[test]
fn rotation_leaves_map_invariant() {
    let m = permeable();
    let zd = [0.3, -0.1, 0.2];
    let r = rotation([0.0, 0.6, 0.8], 0.7);
    let mesh = Arc::new(SphereMesh::new([0.0; 3], 10.0 * LAM, 2500).unwrap());
    let set = IncidenceSet::fibonacci(80).unwrap();
    let grid = SearchGrid::slice(zd, LAM / 8.0, 7, 2).unwrap();
    let run = |set: &IncidenceSet, zd: Vec3, grid: &SearchGrid| {
        let inc = Inclusion::sphere(&m, zd, 0.05).unwrap();
        let data = synthesize_all(&m, &inc, &mesh, &set.incidences()).unwrap();
        td_multi(&data, grid, &m, &TrialInclusion::sphere(&m).unwrap()).unwrap()
    };
    let a = run(&set, zd, &grid);
    let b = run(&set.rotated(&r), mat_vec(&r, zd), &grid.rotated(&r));
    let peak = a.values.iter().cloned().fold(f64::MIN, f64::max);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-3 * peak, "{x} vs {y}");
    }
}

#[test]
fn pearson_of_affine_copy_is_one() {
    let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
    let b: Vec<f64> = a.iter().map(|v| 2.0 * v - 1.0).collect();
    assert!((pearson(&a, &b) - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn grid_index_roundtrip(i in 0usize..5, j in 0usize..4, k in 0usize..3) {
        let g = SearchGrid::new([0.0; 3], 0.1, [5, 4, 3]).unwrap();
        let idx = g.index(i, j, k);
        prop_assert_eq!(g.ijk(idx), [i, j, k]);
        let p = g.point(idx);
        prop_assert!((p[0] - 0.1 * i as f64).abs() < 1e-15);
    }

    #[test]
    fn argmax_invariant_under_constant_shift(vals in prop::collection::vec(-5.0f64..5.0, 12), c in -10.0f64..10.0) {
        let grid = SearchGrid::new([0.0; 3], 1.0, [4, 3, 1]).unwrap();
        let a = ImagingMap { grid: grid.clone(), values: vals.clone() };
        let b = ImagingMap { grid, values: vals.iter().map(|v| v + c).collect() };
        prop_assert_eq!(a.argmax(), b.argmax());
    }
}
