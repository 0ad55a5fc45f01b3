use std::f64::consts::PI;

use elastoslab::diagnostics::{
    constraint_report, energy_kappa, energy_limit, energy_record, flowmap_norm_sq, good_unknown_residual,
    hodge_check, normal_trace_check, psi_smallness, reconstruct_tangential, select_minor, tangential_system,
    MINOR_PAIRS,
};
use elastoslab::evolution::smooth_flowmap;
use elastoslab::geometry::{jacobian_and_cofactor, vector_gradient};
use elastoslab::grid::{BoundaryVectorField, Face, Grid, MatrixField, ScalarField, VectorField};
use elastoslab::initial_data::{make_g0, standard_velocity, BoundaryPartition, G0Recipe, Regime};
use elastoslab::random::{band_limited_boundary, band_limited_vector, rng};
use elastoslab::{Error, FlowMap, InitialDeformation, KappaSystem, MollifierKernel, SimState, Slab};
use proptest::prelude::*;

fn slab(n: usize) -> Slab {
    Slab::new(Grid::cube(n).unwrap())
}

fn grad_eta(s: &Slab, st: &SimState) -> MatrixField {
    let mut f = vector_gradient(s, &st.eta.disp);
    for i in 0..3 {
        f.c[i][i].data.iter_mut().for_each(|x| *x += 1.0);
    }
    f
}

fn canonical(s: &Slab) -> InitialDeformation {
    make_g0(s, &G0Recipe::Canonical).unwrap()
}

#[test]
fn equilibrium_energy_is_six() {
    let s = slab(16);
    let st = SimState::equilibrium(s.grid);
    let g0 = canonical(&s);
    let e = energy_limit(&s, &g0, &BoundaryPartition::both_nc(), &st, &grad_eta(&s, &st)).unwrap();
    assert_eq!(e.v, 0.0);
    assert!((e.eta - 4.0).abs() < 1e-12 && (e.g0_eta - 2.0).abs() < 1e-12 && e.boundary == 0.0);
    assert!((e.total() - 6.0).abs() < 1e-12);
}

#[test]
fn flowmap_norm_matches_closed_forms() {
    let eps = 0.03;
    // eta = x + eps x3 e3; the vertical quadrature of x3^2 is second order
    let want = 4.0 + 8.0 * eps / 3.0 + 4.0 * eps * eps / 3.0;
    let errs: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let s = slab(n);
            let d = VectorField::from_fn(s.grid, |_, _, x3| [0.0, 0.0, eps * x3]);
            (flowmap_norm_sq(&s, &d) - want).abs()
        })
        .collect();
    assert!(errs[1] < 1e-5 && (errs[0] / errs[1] - 4.0).abs() < 0.1, "{errs:?}");
    let s = slab(16);
    // eta = x + eps sin(2 pi x1) e1
    let d = VectorField::from_fn(s.grid, |x1, _, _| [eps * (2.0 * PI * x1).sin(), 0.0, 0.0]);
    let w2 = 4.0 * PI * PI;
    let higher: f64 = (2..=4).map(|k| w2.powi(k) * eps * eps / 2.0).sum();
    let want = 1.0 / 3.0 - eps / PI + eps * eps / 2.0 + 2.0 / 3.0 + 1.0 + 2.0 * PI * PI * eps * eps + 2.0 + higher;
    let got = flowmap_norm_sq(&s, &d);
    assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
    // a constant shift c: int |x + c|^2 + 3
    let c = [0.1, -0.2, 0.3];
    let d = VectorField::from_fn(s.grid, |_, _, _| c);
    let want = 1.0 + (c[0] + c[1] + c[2]) + c.iter().map(|x| x * x).sum::<f64>() + 3.0;
    assert!((flowmap_norm_sq(&s, &d) - want).abs() < 1e-12);
}

#[test]
fn kappa_energy_equals_limit_without_rt_faces() {
    let s = slab(16);
    let sys = KappaSystem::new(&s, MollifierKernel::new(0.2, &s).unwrap(), canonical(&s), BoundaryPartition::both_nc());
    let d = band_limited_vector(s.grid, &mut rng(3), 2, 2);
    let st = SimState::new(FlowMap::from_displacement(d.scale(0.003 / d.max_abs())), standard_velocity(&s, 1, 0.05));
    let ev = sys.right_side(&st).unwrap();
    let rec = energy_record(&sys, &st, &ev, &mut None);
    assert_eq!(rec.e_limit, rec.e_kappa);
    assert!(rec.limit_parts.v > 0.0);
    assert!(rec.rt_margins.iter().all(|m| m.is_nan()));
    assert_eq!(rec.nc_margins, [1.0, 1.0]);
    assert_eq!(rec.residuals.curl_growth, 0.0);
}

#[test]
fn velocity_energy_is_quadratic() {
    let s = slab(16);
    let g0 = canonical(&s);
    let p = BoundaryPartition::both_nc();
    let v = standard_velocity(&s, 2, 0.1);
    let st1 = SimState::new(FlowMap::identity(s.grid), v.clone());
    let st3 = SimState::new(FlowMap::identity(s.grid), v.scale(3.0));
    let f = grad_eta(&s, &st1);
    let e1 = energy_limit(&s, &g0, &p, &st1, &f).unwrap().v;
    let e3 = energy_limit(&s, &g0, &p, &st3, &f).unwrap().v;
    assert!((e3 - 9.0 * e1).abs() < 1e-12 * e3);
}

#[test]
fn affine_maps_have_no_boundary_energy() {
    let s = slab(16);
    let g0 = canonical(&s);
    let p = BoundaryPartition::new(Regime::Rt, Regime::Rt, 0.1, 0.1);
    let d = VectorField::from_fn(s.grid, |_, _, x3| [0.01 * x3, 0.02 * x3, 0.05 * x3]);
    let st = SimState::new(FlowMap::from_displacement(d), VectorField::zeros(s.grid));
    let f = grad_eta(&s, &st);
    assert!(energy_limit(&s, &g0, &p, &st, &f).unwrap().boundary < 1e-20);
    let k = MollifierKernel::new(0.2, &s).unwrap();
    let (_, a) = jacobian_and_cofactor(&f).unwrap();
    assert!(energy_kappa(&s, &k, &g0, &p, &st, &f, &a).boundary < 1e-20);
    // a tangential wave on the face does carry boundary energy
    let d = VectorField::from_fn(s.grid, |x1, _, _| [0.0, 0.0, 0.001 * (2.0 * PI * x1).cos()]);
    let st = SimState::new(FlowMap::from_displacement(d), VectorField::zeros(s.grid));
    let f = grad_eta(&s, &st);
    let b = energy_limit(&s, &g0, &p, &st, &f).unwrap().boundary;
    // two faces, |d1^4 d3|^2 averaged, n3 close to one
    let want = 2.0 * (0.001 * (2.0 * PI).powi(4)).powi(2) / 2.0;
    assert!((b - want).abs() < 1e-2 * want, "{b} vs {want}");
}

#[test]
fn normal_trace_closed_form() {
    let s = slab(32);
    let w = VectorField::from_fn(s.grid, |x1, _, _| [0.0, 0.0, (2.0 * PI * x1).cos()]);
    let r = normal_trace_check(&s, &w);
    let face = 2.0 * PI * (1.0 + 4.0 * PI * PI).powf(-0.25) / 2f64.sqrt();
    for f in r.lhs_faces {
        assert!((f - face).abs() < 1e-12, "{f} vs {face}");
    }
    assert!((r.rhs - 2.0 * PI / 2f64.sqrt()).abs() < 1e-12);
    assert!(r.ratio < 1.0);
}

#[test]
fn hodge_ratios_stay_bounded() {
    let s = slab(16);
    for seed in 0..4 {
        let w = band_limited_vector(s.grid, &mut rng(seed), 3, 3);
        for order in 1..=4 {
            let r = hodge_check(&s, &w, order);
            assert!(r.is_finite() && r > 0.0 && r < 4.0, "seed {seed} order {order}: {r}");
        }
    }
}

#[test]
fn canonical_g0_selects_the_tangential_minor() {
    let s = slab(8);
    let g0 = canonical(&s);
    assert_eq!(MINOR_PAIRS[select_minor(&g0.g0.at(0))], (0, 1));
}

#[test]
fn degenerate_minor_is_reported() {
    let g = Grid::cube(8).unwrap();
    let g0 = InitialDeformation {
        g0: MatrixField::constant(g, [[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 0.0]]),
    };
    let z = BoundaryVectorField::zeros(g, Face::Top);
    let w = tangential_system(&g0, &z, &z);
    assert!(matches!(reconstruct_tangential(&g0, &w, 0.1), Err(Error::DegenerateMinor { node: 0 })));
}

#[test]
fn tangential_reconstruction_round_trip() {
    let s = slab(16);
    let g0 = make_g0(&s, &G0Recipe::columnar_sines(s.grid, 0.4)).unwrap();
    let mut r = rng(77);
    for _ in 0..20 {
        let mut pick = || BoundaryVectorField {
            c: std::array::from_fn(|_| band_limited_boundary(s.grid, Face::Bottom, &mut r, 3)),
        };
        let (d1, d2) = (pick(), pick());
        let w = tangential_system(&g0, &d1, &d2);
        let (e1, e2) = reconstruct_tangential(&g0, &w, 0.1).unwrap();
        for i in 0..3 {
            assert!(e1.c[i].zip_map(&d1.c[i], |a, b| a - b).max_abs() < 1e-12);
            assert!(e2.c[i].zip_map(&d2.c[i], |a, b| a - b).max_abs() < 1e-12);
        }
    }
}

#[test]
fn good_unknown_identity_trivial_cases() {
    let s = slab(16);
    let id = VectorField::zeros(s.grid);
    let a = MatrixField::identity(s.grid);
    let f = ScalarField::from_fn(s.grid, |x1, x2, x3| (2.0 * PI * x1).sin() * (2.0 * PI * x2).cos() * x3);
    let r = good_unknown_residual(&s, &id, &a, &f, 0, (1, 2));
    assert!(r.residual < 1e-9 * r.lhs, "{r:?}");
    let c = ScalarField::constant(s.grid, 2.0);
    assert_eq!(good_unknown_residual(&s, &id, &a, &c, 1, (1, 1)).residual, 0.0);
}

#[test]
fn good_unknown_identity_holds_for_smoothed_maps() {
    let res: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let s = slab(n);
            let k = MollifierKernel::new(0.2, &s).unwrap();
            let d = VectorField::from_fn(s.grid, |x1, x2, x3| {
                [
                    0.01 * (2.0 * PI * x2).sin() * x3,
                    0.01 * (2.0 * PI * x1).cos() * (PI * x3).sin(),
                    0.005 * (2.0 * PI * (x1 + x2)).sin(),
                ]
            });
            let ek = smooth_flowmap(&s, &k, &FlowMap::from_displacement(d));
            let st = SimState::new(ek.clone(), VectorField::zeros(s.grid));
            let (_, a) = jacobian_and_cofactor(&grad_eta(&s, &st)).unwrap();
            let f = ScalarField::from_fn(s.grid, |x1, x2, x3| (2.0 * PI * x1).cos() * (2.0 * PI * x2).sin() * x3 * x3);
            let r = good_unknown_residual(&s, &ek.disp, &a, &f, 2, (1, 2));
            r.residual / r.lhs
        })
        .collect();
    assert!(res[1] < 1e-5 && res[0] / res[1] > 8.0, "{res:?}");
}

#[test]
fn equilibrium_constraints_vanish() {
    let s = slab(16);
    let sys = KappaSystem::new(&s, MollifierKernel::new(0.2, &s).unwrap(), canonical(&s), BoundaryPartition::both_nc());
    let st = SimState::equilibrium(s.grid);
    let ev = sys.right_side(&st).unwrap();
    let r = constraint_report(&sys, &st, &ev);
    assert_eq!((r.div_a_v, r.j_minus_1, r.f_identity, r.div_v, r.curl_a_v), (0.0, 0.0, 0.0, 0.0, 0.0));
    // third vertical differences amplify round-off by about n^3
    assert!(r.piola < 1e-14 && r.div_g0t_eta < 1e-12 && r.curl_a_g0t_eta < 1e-9, "{r:?}");
    assert_eq!(psi_smallness(&s, 0.2, &ev.psi), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn normal_trace_is_linear(c in -3.0f64..3.0, seed in 0u64..100) {
        let s = slab(8);
        let w = band_limited_vector(s.grid, &mut rng(seed), 2, 2);
        let a = normal_trace_check(&s, &w);
        let b = normal_trace_check(&s, &w.scale(c));
        prop_assert!((b.lhs - c.abs() * a.lhs).abs() <= 1e-12 * (1.0 + a.lhs));
        prop_assert!((b.rhs - c.abs() * a.rhs).abs() <= 1e-12 * (1.0 + a.rhs));
    }

    #[test]
    fn flowmap_norm_is_translation_consistent(t in -0.5f64..0.5) {
        // ||x + t e3||^2 = 1 + t + t^2 + 3
        let s = slab(8);
        let d = VectorField::from_fn(s.grid, |_, _, _| [0.0, 0.0, t]);
        prop_assert!((flowmap_norm_sq(&s, &d) - (4.0 + t + t * t)).abs() < 1e-12);
    }
}
