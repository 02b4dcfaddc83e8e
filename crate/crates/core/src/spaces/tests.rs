use super::*;
use approx::assert_relative_eq;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ActiveSet, Parameter};

fn disc(nx: usize, nt: usize, t_final: f64) -> Discretization {
    Discretization::new(build_grid(nx, nt, 1.0, t_final).unwrap()).unwrap()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_field(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

#[test]
fn riesz_map_is_an_isometry() {
    let d = disc(17, 6, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let v = random_vec(17, &mut rng);
        let dv = d.riesz_apply(&v);
        assert_relative_eq!(d.inner_ustar(&dv, &dv), d.inner_u(&v, &v), max_relative = 1e-12);
        let back = d.riesz_solve(&dv);
        for (a, b) in back.iter().zip(&v) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn laplacian_eigenvalues_match_closed_form() {
    // Independent oracle: dense symmetric eigensolver on M^{-1} K.
    let d = disc(12, 4, 1.0);
    let nx = 12;
    let hx = d.hx();
    let k = &d.ops().riesz_du;
    let dense = DMatrix::from_fn(nx, nx, |i, j| {
        let kij = if i == j {
            k.diag[i] - hx
        } else if i + 1 == j {
            k.off[i]
        } else if j + 1 == i {
            k.off[j]
        } else {
            0.0
        };
        kij / hx
    });
    let mut eig: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (idx, lam) in eig.iter().enumerate() {
        let kk = (idx + 1) as f64;
        let closed = 4.0 / (hx * hx) * (kk * std::f64::consts::PI * hx / 2.0).sin().powi(2);
        assert_relative_eq!(*lam, closed, max_relative = 1e-10);
    }
}

#[test]
fn riesz_map_scales_eigenvectors_by_one_plus_lambda() {
    let d = disc(20, 4, 1.0);
    let hx = d.hx();
    let x = d.grid().nodes();
    for k in [1usize, 3, 7] {
        let kk = k as f64;
        let v: Vec<f64> = x.iter().map(|xi| (kk * std::f64::consts::PI * xi).sin()).collect();
        let lam = 4.0 / (hx * hx) * (kk * std::f64::consts::PI * hx / 2.0).sin().powi(2);
        let dv = d.riesz_apply(&v);
        for (a, b) in dv.iter().zip(&v) {
            // Dual vector of (1 + lambda) v under the lumped mass.
            assert_relative_eq!(a / hx, (1.0 + lam) * b, epsilon = 1e-9);
        }
    }
}

#[test]
fn space_time_norm_of_stationary_sine() {
    // ||sin(pi x)||^2 in L^2(0,1; H^1_0) with the full H^1 norm is (pi^2 + 1) / 2.
    let pi = std::f64::consts::PI;
    let exact = (pi * pi + 1.0) / 2.0;
    let mut errs = Vec::new();
    for &(nx, nt) in &[(19usize, 20usize), (39, 40), (79, 80)] {
        let d = disc(nx, nt, 1.0);
        let x = d.grid().nodes();
        let u = Array2::from_shape_fn((nt + 1, nx), |(_, i)| (pi * x[i]).sin());
        let v = d
            .inner(SpaceTag::CalU, Operand::Field(u.view()), Operand::Field(u.view()))
            .unwrap();
        errs.push((v - exact).abs() / exact);
    }
    assert!(errs[0] < 0.06, "{errs:?}");
    assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
}

#[test]
fn v_norm_splits_into_state_and_time_derivative() {
    let d = disc(9, 7, 0.5);
    let u = random_field(8, 9, 5);
    let du = d.time_derivative(u.view());
    let lhs = d.inner_cal_v(u.view(), u.view());
    let rhs = d.inner_cal_u(u.view(), u.view()) + d.inner_cal_ustar(du.view(), du.view());
    assert_eq!(lhs, rhs);
}

#[test]
fn v_gram_matches_bilinear_form() {
    let d = disc(11, 9, 0.5);
    let u = random_field(10, 11, 6);
    let h = random_field(10, 11, 7);
    let gu = d.v_gram_apply(u.view()).unwrap();
    let pairing: f64 = gu.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
    assert_relative_eq!(pairing, d.inner_cal_v(h.view(), u.view()), max_relative = 1e-11);
}

#[test]
fn v_representer_reproduces_functional() {
    let d = disc(13, 12, 0.5);
    let g = random_field(13, 13, 8);
    let (rep, stats) = d.v_representer_with_stats(g.view()).unwrap();
    assert!(stats.rel_residual <= 1e-10);
    assert!(
        stats.iterations <= 3,
        "preconditioned CG took {} iterations",
        stats.iterations
    );
    for seed in 0..3 {
        let h = random_field(13, 13, 100 + seed);
        let lhs = d.inner_cal_v(rep.view(), h.view());
        let rhs: f64 = g.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }
}

#[test]
fn plain_cg_agrees_with_preconditioned_cg() {
    let base = disc(9, 8, 0.5);
    let plain = base.clone().with_cg_options(CgOptions {
        preconditioner: VPreconditioner::None,
        ..CgOptions::default()
    });
    let g = random_field(9, 9, 9);
    let a = base.v_representer(g.view()).unwrap();
    let (b, stats) = plain.v_representer_with_stats(g.view()).unwrap();
    assert!(stats.iterations > 3);
    let diff = &a - &b;
    assert!(base.norm_cal_v(diff.view()) <= 1e-8 * base.norm_cal_v(a.view()));
}

#[test]
fn cg_reports_stall_when_capped() {
    // A tolerance below rounding can never be met, so CG runs into its cap.
    let d = disc(9, 8, 0.5).with_cg_options(CgOptions {
        rel_tol: 1e-30,
        cap_factor: 1,
        preconditioner: VPreconditioner::None,
    });
    let g = random_field(9, 9, 10);
    match d.v_representer(g.view()) {
        Err(crate::Error::Cg { iterations, .. }) => assert_eq!(iterations, 81),
        other => panic!("expected CG stall, got {other:?}"),
    }
    let bad = random_field(3, 9, 11);
    assert!(d.v_representer(bad.view()).is_err());
}

fn all_active() -> ActiveSet {
    ActiveSet {
        a: true,
        c: true,
        phi: true,
        u0: true,
    }
}

fn random_param(d: &Discretization, active: ActiveSet, seed: u64) -> Parameter {
    let mut p = Parameter::zeros(d.grid(), active);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    p.a.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    p.c.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    p.phi.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    p.u0.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    p.zero_inactive();
    p
}

#[test]
fn parameter_riesz_map_inverts_gram() {
    let d = disc(10, 6, 0.5);
    for active in [all_active(), ActiveSet::default()] {
        let g = random_param(&d, active, 21);
        let x = d.apply_i_x(&g).unwrap();
        let xi = random_param(&d, active, 22);
        assert_relative_eq!(d.inner_x(&x, &xi).unwrap(), g.pairing(&xi), max_relative = 1e-10);
        let back = d.x_gram_apply(&x).unwrap();
        let err: f64 = back.diff(&g).active_vec().iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }
}

#[test]
fn mass_dual_maps_back_to_nodal_values() {
    let d = disc(10, 6, 0.5);
    let active = ActiveSet {
        c: true,
        u0: true,
        ..ActiveSet::none()
    };
    let g = random_param(&d, active, 23);
    let mut dual = g.clone();
    dual.c = &g.c * d.hx();
    dual.u0 = &g.u0 * d.hx();
    let x = d.apply_i_x(&dual).unwrap();
    for (a, b) in x.c.iter().zip(g.c.iter()) {
        assert_relative_eq!(a, b, epsilon = 1e-14);
    }
    for (a, b) in x.u0.iter().zip(g.u0.iter()) {
        assert_relative_eq!(a, b, epsilon = 1e-14);
    }
}

#[test]
fn inactive_dual_component_is_rejected() {
    let d = disc(10, 6, 0.5);
    let mut g = Parameter::zeros(d.grid(), ActiveSet::default());
    g.a.fill(0.0);
    g.c[2] = 1.0;
    assert_eq!(d.apply_i_x(&g).unwrap_err(), crate::Error::InactiveComponent("c"));
}

#[test]
fn tag_dispatch_checks_operands() {
    let d = disc(5, 4, 1.0);
    let u = random_field(5, 5, 1);
    let r = random_field(4, 5, 2);
    assert!(d
        .inner(SpaceTag::CalU, Operand::Field(u.view()), Operand::Field(u.view()))
        .is_ok());
    assert!(d
        .inner(SpaceTag::CalUstar, Operand::Field(r.view()), Operand::Field(r.view()))
        .is_ok());
    assert!(d
        .inner(SpaceTag::CalU, Operand::Field(r.view()), Operand::Field(r.view()))
        .is_err());
    assert!(d
        .inner(SpaceTag::H, Operand::Field(u.view()), Operand::Field(u.view()))
        .is_err());
    let p = Parameter::zeros(d.grid(), ActiveSet::default());
    assert_eq!(d.inner(SpaceTag::X, Operand::Param(&p), Operand::Param(&p)).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inner_products_are_symmetric_and_positive(seed in 0u64..1000, nx in 3usize..12, nt in 2usize..8) {
        let d = disc(nx, nt, 0.7);
        let u = random_field(nt + 1, nx, seed);
        let v = random_field(nt + 1, nx, seed + 1);
        for tag in [SpaceTag::CalU, SpaceTag::CalV] {
            let uv = d.inner(tag, Operand::Field(u.view()), Operand::Field(v.view())).unwrap();
            let vu = d.inner(tag, Operand::Field(v.view()), Operand::Field(u.view())).unwrap();
            prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));
            let uu = d.inner(tag, Operand::Field(u.view()), Operand::Field(u.view())).unwrap();
            prop_assert!(uu > 0.0);
        }
        let r = random_field(nt, nx, seed + 2);
        prop_assert!(d.inner_cal_ustar(r.view(), r.view()) > 0.0);
    }

    #[test]
    fn riesz_isometry_random(seed in 0u64..1000, nx in 2usize..30) {
        let d = disc(nx, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_vec(nx, &mut rng);
        let dv = d.riesz_apply(&v);
        let a = d.inner_ustar(&dv, &dv);
        let b = d.inner_u(&v, &v);
        prop_assert!((a - b).abs() <= 1e-10 * b);
    }
}
