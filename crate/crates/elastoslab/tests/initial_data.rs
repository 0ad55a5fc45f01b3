use std::f64::consts::PI;

use elastoslab::geometry::InitialDeformation;
use elastoslab::grid::{Face, Grid, MatrixField, ScalarField, VectorField};
use elastoslab::initial_data::{
    assemble_initial_data, check_noncollinearity, check_rayleigh_taylor, g0_constraint_residuals, initial_pressure,
    make_g0, mixed_velocity, project_divergence_free, standard_velocity, BoundaryPartition, G0Recipe, Regime, TAU_CON,
};
use elastoslab::random::{band_limited_vector, rng};
use elastoslab::slab::Slab;
use elastoslab::Error;
use proptest::prelude::*;

fn slab(n: usize) -> Slab {
    Slab::new(Grid::cube(n).unwrap())
}

fn interior_div(s: &Slab, v: &VectorField) -> f64 {
    s.divergence(v).l2_interior()
}

#[test]
fn projection_keeps_solenoidal_fields() {
    let s = slab(16);
    let v = VectorField::from_fn(s.grid, |_, x2, _| [(2.0 * PI * x2).sin(), 0.0, 0.0]);
    assert!(project_divergence_free(&s, &v).sub(&v).max_abs() < TAU_CON);
    let z = VectorField::zeros(s.grid);
    assert_eq!(project_divergence_free(&s, &z).max_abs(), 0.0);
}

#[test]
fn projection_removes_gradient_divergence() {
    let s = slab(16);
    let phi = ScalarField::from_fn(s.grid, |x1, _, x3| (2.0 * PI * x1).sin() * (PI * x3).sin());
    let v = s.gradient(&phi);
    assert!(interior_div(&s, &v) > 1.0);
    assert!(interior_div(&s, &project_divergence_free(&s, &v)) < TAU_CON);
    let r = band_limited_vector(s.grid, &mut rng(9), 3, 3);
    assert!(interior_div(&s, &project_divergence_free(&s, &r)) < TAU_CON);
}

#[test]
fn recipes_satisfy_constraints() {
    let s = slab(16);
    let c = make_g0(&s, &G0Recipe::Canonical).unwrap();
    assert_eq!(g0_constraint_residuals(&s, &c), (0.0, 0.0));
    assert_eq!(check_noncollinearity(&c, Face::Top, 0.1).margin, 1.0);
    assert_eq!(check_noncollinearity(&c, Face::Bottom, 0.1).margin, 1.0);
    let col = make_g0(&s, &G0Recipe::columnar_sines(s.grid, 1.0)).unwrap();
    let (d, f) = g0_constraint_residuals(&s, &col);
    assert!(d <= TAU_CON && f <= TAU_CON);
    let sh = make_g0(&s, &G0Recipe::Sheared { amplitude: 0.4 }).unwrap();
    let (d, f) = g0_constraint_residuals(&s, &sh);
    assert!(d <= TAU_CON && f <= TAU_CON);
}

#[test]
fn identity_g0_violates_face_condition() {
    let s = slab(8);
    let g0 = InitialDeformation {
        g0: MatrixField::constant(s.grid, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
    };
    let (_, face) = g0_constraint_residuals(&s, &g0);
    assert_eq!(face, 1.0);
}

#[test]
fn initial_pressure_vanishes_for_trivial_data() {
    let s = slab(16);
    let g0 = make_g0(&s, &G0Recipe::Canonical).unwrap();
    let q = initial_pressure(&s, &VectorField::zeros(s.grid), &g0).unwrap();
    assert_eq!(q.max_abs(), 0.0);
    let shear = VectorField::from_fn(s.grid, |_, x2, _| [(2.0 * PI * x2).sin(), 0.0, 0.0]);
    assert!(initial_pressure(&s, &shear, &g0).unwrap().max_abs() < 1e-14);
}

#[test]
fn initial_pressure_has_zero_trace() {
    let s = slab(16);
    let g0 = make_g0(&s, &G0Recipe::columnar_sines(s.grid, 0.5)).unwrap();
    let v = standard_velocity(&s, 3, 0.1);
    let q = initial_pressure(&s, &v, &g0).unwrap();
    assert!(q.trace(Face::Bottom).max_abs() < 1e-14 && q.trace(Face::Top).max_abs() < 1e-14);
    assert!(q.max_abs() > 0.0);
}

#[test]
fn rayleigh_taylor_margins() {
    let s = slab(32);
    let q = ScalarField::from_fn(s.grid, |_, _, x3| (PI * x3).sin());
    let c = check_rayleigh_taylor(&s, &q, Face::Bottom, 0.1);
    assert!(c.pass && (c.margin - PI).abs() < 1e-4);
    let q = ScalarField::from_fn(s.grid, |_, _, x3| x3 * (1.0 - x3));
    let c = check_rayleigh_taylor(&s, &q, Face::Top, 0.1);
    assert!(c.pass && (c.margin - 1.0).abs() < 1e-12);
    let c = check_rayleigh_taylor(&s, &ScalarField::zeros(s.grid), Face::Top, 1e-6);
    assert!(!c.pass && c.margin == 0.0);
}

#[test]
fn collinear_rows_have_zero_margin() {
    let g = Grid::cube(8).unwrap();
    let g0 = InitialDeformation {
        g0: MatrixField::constant(g, [[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 0.0]]),
    };
    let c = check_noncollinearity(&g0, Face::Top, 0.1);
    assert!(!c.pass && c.margin == 0.0);
}

#[test]
fn assemble_accepts_nc_equilibrium_and_rejects_rt() {
    let s = slab(16);
    let zero = VectorField::zeros(s.grid);
    let d = assemble_initial_data(&s, &zero, &G0Recipe::Canonical, BoundaryPartition::both_nc()).unwrap();
    assert_eq!(d.margins.nc, [1.0, 1.0]);
    assert_eq!(d.margins.rt, [0.0, 0.0]);
    let rt = BoundaryPartition::new(Regime::Rt, Regime::Rt, 0.1, 0.1);
    assert!(matches!(
        assemble_initial_data(&s, &zero, &G0Recipe::Canonical, rt),
        Err(Error::StabilityViolation { face: Face::Bottom, .. })
    ));
}

#[test]
fn mixed_datum_passes_both_conditions() {
    let s = slab(32);
    let p = BoundaryPartition::new(Regime::Rt, Regime::Nc, 0.1, 0.1);
    let d = assemble_initial_data(&s, &mixed_velocity(s.grid, 1.0), &G0Recipe::Canonical, p).unwrap();
    // slope of the mean part a^2 x3 (1 - x3) / 2 minus that of the cos 4 pi x1 part
    let expect = 0.5 - (4.0 * PI * (2.0 * PI).tanh()) / (16.0 * PI * PI);
    assert!((d.margins.rt[0] - expect).abs() < 1e-3, "{:?}", d.margins);
    assert!(d.margins.rt[0] >= 0.1 && d.margins.nc[1] >= 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noncollinearity_is_rotation_invariant(theta in 0.0f64..6.3, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let g = Grid::cube(8).unwrap();
        let rows = [[1.0, a, 0.2], [b, 1.0, -0.3], [0.0, 0.0, 0.0]];
        let (c, s) = (theta.cos(), theta.sin());
        let rot = |r: [f64; 3]| [c * r[0] - s * r[1], s * r[0] + c * r[1], r[2]];
        let m0 = InitialDeformation { g0: MatrixField::constant(g, rows) };
        let m1 = InitialDeformation { g0: MatrixField::constant(g, [rot(rows[0]), rot(rows[1]), rows[2]]) };
        let x = check_noncollinearity(&m0, Face::Top, 0.1).margin;
        let y = check_noncollinearity(&m1, Face::Top, 0.1).margin;
        prop_assert!((x - y).abs() < 1e-13);
    }

    #[test]
    fn constant_data_give_zero_pressure_rhs(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let s = slab(8);
        let g0 = InitialDeformation { g0: MatrixField::constant(s.grid, [[1.0, a, 0.0], [b, 1.0, 0.0], [0.0, 0.0, 0.0]]) };
        let v = VectorField::from_fn(s.grid, |_, _, _| [a, b, a * b]);
        prop_assert!(initial_pressure(&s, &v, &g0).unwrap().max_abs() < 1e-13);
    }
}
