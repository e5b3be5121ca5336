mod common;

use rfwgan_core::diagnostics::{
    classify_stationarity, flat_cells, grad_check, landscape_direct_2d, landscape_plane,
    landscape_random_plane, local_minima, min_singular_scan, mode_coverage, random_plane,
    square_grid, Classification, LandscapeGrid, StationarityTolerances,
};
use rfwgan_core::linalg::dot;
use rfwgan_core::networks::sample_generator_bank;
use rfwgan_core::{
    Activation, DiscriminatorFeatureBank, DiscriminatorScheme, FixtureName, FrozenObjective,
    GaussianMixture, GeneratorFeatureBank, GeneratorScheme, LatentSpec, Matrix, QuadratureSet,
    SeedStream,
};

use common::small;

#[test]
fn duplicated_features_violate_the_point_condition() {
    let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
    let d = DiscriminatorFeatureBank::from_parts(Activation::Tanh, a, vec![0.3, 0.3]).unwrap();
    let scan = min_singular_scan(&d, &square_grid(-2.0, 2.0, 9)).unwrap();
    assert!(scan.point_condition_applicable);
    assert!(scan.min <= 1e-12, "{}", scan.min);
}

#[test]
fn gaussian_features_satisfy_it_on_a_grid() {
    let d = DiscriminatorFeatureBank::sample(2, 2, Activation::Tanh, &DiscriminatorScheme::Gaussian { std: 1.0 }, &mut SeedStream::new(0).derive("d")).unwrap();
    let scan = min_singular_scan(&d, &square_grid(-1.0, 1.0, 11)).unwrap();
    assert!(scan.min > 0.0);
    assert_eq!(scan.values.len(), 121);
    assert_eq!(scan.values[scan.argmin], scan.min);
}

#[test]
fn plane_directions_are_orthonormal() {
    let (u, v) = random_plane(40, &mut SeedStream::new(1).derive("p")).unwrap();
    assert!((dot(&u, &u) - 1.0).abs() < 1e-12);
    assert!((dot(&v, &v) - 1.0).abs() < 1e-12);
    assert!(dot(&u, &v).abs() < 1e-12);
    assert!(random_plane(1, &mut SeedStream::new(1).derive("p")).is_err());
}

#[test]
fn landscapes_are_deterministic_and_order_free() {
    let s = small(2, 2, 6);
    let obj = FrozenObjective::new(&s.g, &s.d, &s.q).unwrap();
    let a = landscape_direct_2d(&obj, (-2.0, 2.0), 9).unwrap();
    assert_eq!(a, landscape_direct_2d(&obj, (-2.0, 2.0), 9).unwrap());
    let rev = |m: &Matrix| m.select_rows(&(0..m.nrows()).rev().collect::<Vec<_>>());
    let q2 = QuadratureSet::new(rev(s.q.x()), rev(s.q.z())).unwrap();
    let b = landscape_direct_2d(&FrozenObjective::new(&s.g, &s.d, &q2).unwrap(), (-2.0, 2.0), 9).unwrap();
    for (x, y) in a.values.as_slice().iter().zip(b.values.as_slice()) {
        assert!((x - y).abs() <= 1e-13 * x.max(1.0));
    }
    let (is, it) = (3, 5);
    let direct = obj.j(&[a.s_axis[is], a.t_axis[it]]).unwrap();
    assert_eq!(a.values.get(it, is), direct);
}

#[test]
fn direct_mode_rejects_other_widths() {
    let s = small(2, 3, 6);
    let obj = FrozenObjective::new(&s.g, &s.d, &s.q).unwrap();
    let err = landscape_direct_2d(&obj, (-1.0, 1.0), 5).unwrap_err();
    assert!(err.to_string().contains("direct mode requires N_g=2, got N_g=3"), "{err}");
}

#[test]
fn plane_landscape_passes_through_the_center() {
    let s = small(6, 12, 8);
    let obj = FrozenObjective::new(&s.g, &s.d, &s.q).unwrap();
    let center: Vec<f64> = (0..12).map(|i| 0.1 * i as f64).collect();
    let grid = landscape_random_plane(&obj, &center, &mut SeedStream::new(6).derive("dir"), (-1.0, 1.0), 5).unwrap();
    assert_eq!(grid.values.get(2, 2), obj.j(&center).unwrap());
    let dirs = grid.directions.clone().unwrap();
    let again = landscape_plane(&obj, &center, dirs, (-1.0, 1.0), 5).unwrap();
    assert_eq!(grid, again);
}

fn synthetic(values: Vec<f64>, res: usize) -> LandscapeGrid {
    let axis: Vec<f64> = (0..res).map(|i| i as f64).collect();
    LandscapeGrid {
        s_axis: axis.clone(),
        t_axis: axis,
        values: Matrix::from_vec(res, res, values).unwrap(),
        center: vec![0.0, 0.0],
        directions: None,
    }
}

#[test]
fn minima_and_plateaus() {
    // A tilted background with a strict well at (1, 1) and a two-cell tied
    // well at (2, 3), (3, 3).
    let mut v: Vec<f64> = (0..25).map(|i| 10.0 + i as f64).collect();
    v[5 + 1] = 1.0;
    v[3 * 5 + 3] = 2.0;
    v[3 * 5 + 2] = 2.0;
    let g = synthetic(v, 5);
    assert_eq!(local_minima(&g), vec![(1, 1)]);
    let mut flat = flat_cells(&g);
    flat.sort();
    assert_eq!(flat, vec![(2, 3), (3, 3)]);
    assert_eq!(g.argmin(), (1, 1));
}

#[test]
fn samples_at_the_modes_cover_every_mode() {
    let s = small(0, 4, 4);
    let x = s.gmm.sample(20_000, &mut SeedStream::new(0).derive("cov")).unwrap();
    let cov = mode_coverage(&x, &s.gmm, 3.0).unwrap();
    assert_eq!(cov.len(), 8);
    assert!(cov.iter().all(|&c| (c - 0.125).abs() < 0.01), "{cov:?}");
    let g = sample_generator_bank(2, 2, 4, 1.0, &mut SeedStream::new(0).derive("g")).unwrap();
    let collapsed = g.forward_batch(&[0.0; 4], &x).unwrap();
    assert!(mode_coverage(&collapsed, &s.gmm, 3.0).unwrap().iter().all(|&c| c == 0.0));
}

/// Two constant features: `g_θ(z) = tanh(1)·θ`, a point mass.
fn point_generator() -> GeneratorFeatureBank {
    GeneratorFeatureBank::from_parts(2, 2, Activation::Tanh, 2, vec![0.0; 8], vec![1.0, 0.0, 0.0, 1.0]).unwrap()
}

fn gaussian_bank(nd: usize, seed: u64) -> DiscriminatorFeatureBank {
    DiscriminatorFeatureBank::sample(2, nd, Activation::Tanh, &DiscriminatorScheme::Gaussian { std: 1.0 }, &mut SeedStream::new(seed).derive("d")).unwrap()
}

fn tolerances(count: usize) -> StationarityTolerances {
    StationarityTolerances { x_count: count, z_count: count, ..StationarityTolerances::default() }
}

#[test]
fn matched_target_is_near_global() {
    let g = point_generator();
    let d = gaussian_bank(6, 1);
    let target = [0.4, -0.7];
    let gmm = GaussianMixture::isotropic(&[target.to_vec()], 1e-8).unwrap();
    let theta: Vec<f64> = target.iter().map(|c| c / 1f64.tanh()).collect();
    let s = SeedStream::new(1);
    let latent = LatentSpec::new(2).unwrap();
    let r = classify_stationarity(&g, &d, &gmm, &latent, &theta, tolerances(2048), &mut s.derive("x"), &mut s.derive("z")).unwrap();
    assert_eq!(r.classification, Classification::NearGlobal);
    assert!(r.j_hat < 1e-8 && r.grad_norm < 1e-3, "{r:?}");
    assert!(r.key_values().contains("classification=near_global"));

    // Its plane landscape bottoms out at the center.
    let q = QuadratureSet::sample(&gmm, &latent, 512, 64, &mut s.derive("x"), &mut s.derive("z")).unwrap();
    let obj = FrozenObjective::new(&g, &d, &q).unwrap();
    let grid = landscape_random_plane(&obj, &theta, &mut s.derive("dir"), (-1.0, 1.0), 11).unwrap();
    let (is, it) = grid.argmin();
    assert!(is.abs_diff(5) <= 1 && it.abs_diff(5) <= 1, "{is} {it}");
    assert!(grid.values.as_slice().iter().all(|&v| v >= 0.0));
}

#[test]
fn distant_parameters_are_non_stationary() {
    let s = small(9, 20, 12);
    let theta: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 3.0 } else { -2.0 }).collect();
    let r = classify_stationarity(&s.g, &s.d, &s.gmm, &s.latent, &theta, tolerances(1024), &mut SeedStream::new(9).derive("x"), &mut SeedStream::new(9).derive("z")).unwrap();
    assert_eq!(r.classification, Classification::NonStationary);
    assert!(r.j_std.is_finite() && r.j_std > 0.0);
}

/// Newton iterations on the frozen objective, Hessian by central
/// differences of the analytic gradient.
fn polish(obj: &FrozenObjective, mut theta: [f64; 2]) -> [f64; 2] {
    let h = 1e-6;
    for _ in 0..20 {
        let g = obj.grad(&theta).unwrap();
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            let (mut up, mut dn) = (theta, theta);
            up[i] += h;
            dn[i] -= h;
            let (gu, gd) = (obj.grad(&up).unwrap(), obj.grad(&dn).unwrap());
            for j in 0..2 {
                hess[j][i] = (gu[j] - gd[j]) / (2.0 * h);
            }
        }
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        theta[0] -= (hess[1][1] * g[0] - hess[0][1] * g[1]) / det;
        theta[1] -= (hess[0][0] * g[1] - hess[1][0] * g[0]) / det;
    }
    theta
}

#[test]
fn narrow_generator_has_spurious_minima() {
    let gmm = FixtureName::TwoVertical.build();
    let latent = LatentSpec::new(2).unwrap();
    let scheme = GeneratorScheme::ScaledIsotropic { bias_std: 0.3f64.sqrt() };
    let tol = tolerances(2048);
    let mut found = 0;
    for seed in 0..4 {
        let s = SeedStream::new(seed);
        let g = GeneratorFeatureBank::sample(2, 2, 2, Activation::Tanh, &scheme, &mut s.derive("g")).unwrap();
        let d = gaussian_bank(8, seed);
        // The classifier redraws its quadrature from these streams, so it
        // sees exactly the set the minimum was polished on.
        let q = QuadratureSet::sample(&gmm, &latent, tol.x_count, tol.z_count, &mut s.derive("x"), &mut s.derive("z")).unwrap();
        let obj = FrozenObjective::new(&g, &d, &q).unwrap();
        let grid = landscape_direct_2d(&obj, (-3.0, 3.0), 41).unwrap();
        for (is, it) in local_minima(&grid) {
            let theta = polish(&obj, [grid.s_axis[is], grid.t_axis[it]]);
            let r = classify_stationarity(&g, &d, &gmm, &latent, &theta, tol, &mut s.derive("x"), &mut s.derive("z")).unwrap();
            if r.classification == Classification::SpuriousSuspect {
                assert!(r.j_hat >= tol.tol_j && r.grad_norm < tol.tol_g);
                found += 1;
            }
        }
    }
    assert!(found >= 1, "no spurious minimum over the fixed seeds");
}

#[test]
fn finite_difference_error_grows_with_the_step() {
    let s = small(3, 10, 8);
    let obj = FrozenObjective::new(&s.g, &s.d, &s.q).unwrap();
    let theta: Vec<f64> = (0..10).map(|i| 0.2 * (i as f64 - 4.5)).collect();
    let errs: Vec<f64> = [1e-5, 1e-2, 3e-1, 1.0].iter().map(|&h| grad_check(&obj, &theta, h).unwrap().max_rel_error).collect();
    assert!(errs[0] < 1e-5);
    assert!(errs.windows(2).all(|w| w[0] < w[1]), "{errs:?}");
    assert!(grad_check(&obj, &theta, 0.0).is_err());
}

#[test]
fn minima_of_simple_grids() {
    assert!(local_minima(&synthetic(vec![1.0; 49], 7)).is_empty());
    let bowl: Vec<f64> = (0..49).map(|i| ((i % 7) as f64 - 3.0).powi(2) + ((i / 7) as f64 - 3.0).powi(2)).collect();
    assert_eq!(local_minima(&synthetic(bowl, 7)), vec![(3, 3)]);
}

#[test]
fn coverage_of_a_collapsed_generator() {
    let gmm = FixtureName::EightRing.build();
    let mode = gmm.components()[3].mean().to_vec();
    let at_mode = Matrix::from_rows(&vec![mode; 100]).unwrap();
    let cov = mode_coverage(&at_mode, &gmm, 3.0).unwrap();
    assert_eq!(cov[3], 1.0);
    assert_eq!(cov.iter().sum::<f64>(), 1.0);
    let spread = gmm.sample(1000, &mut SeedStream::new(2).derive("x")).unwrap();
    assert!(mode_coverage(&spread, &gmm, 1e6).unwrap().iter().all(|&c| c == 1.0));
    assert!(mode_coverage(&spread, &gmm, 0.0).is_err());
}
