//! Measurement routines behind the `verify` verb. Each returns raw measured
//! numbers; tolerances are applied by the caller.

use std::f64::consts::PI;

use elastoslab::diagnostics::{
    commutator_constants, good_unknown_residual, hodge_check, mollifier_loss, mollifier_operator_norm,
    noncollinear_gain_check, normal_trace_check, psi_smallness, reconstruct_tangential, tangential_system,
};
use elastoslab::elliptic::solve_pressure;
use elastoslab::evolution::{smooth_flowmap, Trajectory};
use elastoslab::geometry::{det3, jacobian_and_cofactor, vector_gradient};
use elastoslab::grid::BoundaryVectorField;
use elastoslab::initial_data::{
    assemble_initial_data, check_noncollinearity, make_g0, mixed_velocity, standard_velocity,
};
use elastoslab::random::{band_limited_boundary, band_limited_scalar, band_limited_vector, rng, HorizontalPattern};
use elastoslab::{
    BoundaryPartition, Error, Face, FlowMap, G0Recipe, Grid, InitialDeformation, KappaSystem, MatrixField,
    MollifierKernel, Regime, ScalarField, SimState, Slab, VectorField,
};
use rand::Rng;

use crate::error::CliResult;

type M3 = [[f64; 3]; 3];

/// Largest Sobolev drift and pressure residual over an equilibrium run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumDrift {
    /// max over steps of ||eta - Id||_4 + ||v||_4.
    pub drift: f64,
    pub max_pressure_residual: f64,
    pub steps: usize,
}

/// Integrate (Id, 0) with canonical G0 and both faces NC.
pub fn equilibrium_drift(
    grid: Grid,
    kappa: f64,
    floor: f64,
    t_final: f64,
    dt: f64,
    force_sign: f64,
) -> CliResult<EquilibriumDrift> {
    let slab = Slab::new(grid);
    let g0 = make_g0(&slab, &G0Recipe::Canonical)?;
    let mut sys = KappaSystem::new(&slab, MollifierKernel::with_floor(kappa, &slab, floor)?, g0, BoundaryPartition::both_nc());
    sys.force_sign = force_sign;
    let steps = (t_final / dt).round() as usize;
    let mut st = SimState::equilibrium(grid);
    let (mut drift, mut res) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let ev = sys.refresh(&mut st)?;
        res = res.max(ev.pressure_residual);
        st = sys.step(&st, dt)?;
        drift = drift.max(slab.sobolev_norm_vector(&st.eta.disp, 4) + slab.sobolev_norm_vector(&st.v, 4));
    }
    Ok(EquilibriumDrift {
        drift,
        max_pressure_residual: res,
        steps,
    })
}

/// Relative max error of the elastic force against its closed form for
/// canonical G0, where it reduces to the tangential Laplacian of eta.
pub fn force_oracle_error(grid: Grid, force_sign: f64) -> CliResult<f64> {
    let slab = Slab::new(grid);
    let g0 = make_g0(&slab, &G0Recipe::Canonical)?;
    let mut sys = KappaSystem::new(&slab, MollifierKernel::new(0.2, &slab)?, g0, BoundaryPartition::both_nc());
    sys.force_sign = force_sign;
    let eps = 0.01;
    let w = 2.0 * PI;
    let disp = VectorField::from_fn(grid, |x1, x2, _| [0.0, eps * (w * x1).sin() * (w * x2).cos(), 0.0]);
    let want = VectorField::from_fn(grid, |x1, x2, _| [0.0, -2.0 * w * w * eps * (w * x1).sin() * (w * x2).cos(), 0.0]);
    let ev = sys.right_side(&SimState::new(FlowMap::from_displacement(disp), VectorField::zeros(grid)))?;
    Ok(ev.force.sub(&want).max_abs() / want.max_abs())
}

/// Suprema over a trajectory's records of |J - 1|, ||div_A v|| and the
/// F identity residual.
pub fn constraint_sup(traj: &Trajectory) -> [f64; 3] {
    traj.records.iter().fold([0.0f64; 3], |m, r| {
        [
            m[0].max(r.residuals.j_minus_1),
            m[1].max(r.residuals.div_a_v),
            m[2].max(r.residuals.f_identity),
        ]
    })
}

/// A frozen representative state: small smooth displacement plus the
/// standard velocity.
pub fn representative_state(slab: &Slab, seed: u64) -> SimState {
    let d = band_limited_vector(slab.grid, &mut rng(1000 + seed), 2, 2);
    let d = d.scale(0.005 / d.max_abs());
    SimState::new(FlowMap::from_displacement(d), standard_velocity(slab, seed, 0.02))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiStudy {
    pub kappa: Vec<f64>,
    /// max over states of |d psi|_inf / sqrt(kappa).
    pub ratio: Vec<f64>,
    /// Least-squares slope of ratio against 1/sqrt(kappa), with its
    /// standard error.
    pub slope: f64,
    pub slope_se: f64,
    pub max_pressure_residual: f64,
}

/// Least-squares line y = a + b x; returns (b, standard error of b).
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let se = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (b, se)
}

pub fn psi_study(grid: Grid, kappas: &[f64], floor: f64, states: usize) -> CliResult<PsiStudy> {
    let slab = Slab::new(grid);
    let g0 = make_g0(&slab, &G0Recipe::Canonical)?;
    let sts: Vec<SimState> = (0..states as u64).map(|s| representative_state(&slab, s + 1)).collect();
    let mut ratio = Vec::with_capacity(kappas.len());
    let mut res = 0.0f64;
    for &k in kappas {
        let sys = KappaSystem::new(&slab, MollifierKernel::with_floor(k, &slab, floor)?, g0.clone(), BoundaryPartition::both_nc());
        let mut worst = 0.0f64;
        for st in &sts {
            let ev = sys.right_side(st)?;
            res = res.max(ev.pressure_residual / ev.g.l2_interior().max(f64::MIN_POSITIVE));
            worst = worst.max(psi_smallness(&slab, k, &ev.psi));
        }
        ratio.push(worst);
    }
    let x: Vec<f64> = kappas.iter().map(|k| 1.0 / k.sqrt()).collect();
    let (slope, slope_se) = fit_slope(&x, &ratio);
    Ok(PsiStudy {
        kappa: kappas.to_vec(),
        ratio,
        slope,
        slope_se,
        max_pressure_residual: res,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifierStudy {
    pub kappa: Vec<f64>,
    /// sup |rho_hat| per radius; the same number bounds H^s for every s.
    pub operator_norm: Vec<f64>,
    /// (s, fitted log-log slope of the tangential-gradient loss in kappa).
    pub loss_slopes: Vec<(f64, f64)>,
    /// Commutator constants per radius.
    pub commutators: Vec<[f64; 3]>,
    /// max over radii / min over radii, per estimate.
    pub commutator_spread: [f64; 3],
}

pub fn mollifier_study(grid: Grid, kappas: &[f64]) -> CliResult<MollifierStudy> {
    let slab = Slab::new(grid);
    let kernels = kappas
        .iter()
        .map(|&k| MollifierKernel::new(k, &slab))
        .collect::<Result<Vec<_>, _>>()?;
    let operator_norm = kernels.iter().map(mollifier_operator_norm).collect();
    let lk: Vec<f64> = kappas.iter().map(|k| k.ln()).collect();
    let loss_slopes = [0.0, 0.5]
        .iter()
        .map(|&s| {
            let y: Vec<f64> = kernels.iter().map(|k| mollifier_loss(&slab, k, s).ln()).collect();
            (s, fit_slope(&lk, &y).0)
        })
        .collect();
    let commutators: Vec<[f64; 3]> = kernels.iter().map(|k| commutator_constants(&slab, k)).collect();
    let commutator_spread = std::array::from_fn(|e| {
        let hi = commutators.iter().map(|c| c[e]).fold(f64::NEG_INFINITY, f64::max);
        let lo = commutators.iter().map(|c| c[e]).fold(f64::INFINITY, f64::min);
        hi / lo
    });
    Ok(MollifierStudy {
        kappa: kappas.to_vec(),
        operator_norm,
        loss_slopes,
        commutators,
        commutator_spread,
    })
}

const FLOW_EPS: f64 = 0.02;

/// Analytic deformation gradient of the displacement
/// (e sin(2 pi x2) sin(pi x3), e cos(2 pi x1) sin(pi x3), e sin(2 pi (x1 + x2)) x3 (1 - x3)).
fn flow_gradient(x: [f64; 3]) -> M3 {
    let (t, p, e) = (2.0 * PI, PI, FLOW_EPS);
    let [x1, x2, x3] = x;
    let s = t * (x1 + x2);
    let mut f = [
        [0.0, e * t * (t * x2).cos() * (p * x3).sin(), e * p * (t * x2).sin() * (p * x3).cos()],
        [-e * t * (t * x1).sin() * (p * x3).sin(), 0.0, e * p * (t * x1).cos() * (p * x3).cos()],
        [e * t * s.cos() * x3 * (1.0 - x3), e * t * s.cos() * x3 * (1.0 - x3), e * s.sin() * (1.0 - 2.0 * x3)],
    ];
    for (i, row) in f.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    f
}

/// E = J F^{-1} F^{-T}.
fn flow_coefficient(x: [f64; 3]) -> M3 {
    let f = flow_gradient(x);
    let j = det3(&f);
    let c = elastoslab::geometry::cofactor3(&f);
    // F^{-1} = cof(F)^T / J
    std::array::from_fn(|r| std::array::from_fn(|s| (0..3).map(|k| c[k][r] * c[k][s]).sum::<f64>() / j))
}

fn q_exact(x: [f64; 3]) -> f64 {
    (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() * (PI * x[2]).sin()
}

fn q_grad(x: [f64; 3]) -> [f64; 3] {
    let (t, p) = (2.0 * PI, PI);
    [
        t * (t * x[0]).cos() * (t * x[1]).cos() * (p * x[2]).sin(),
        -t * (t * x[0]).sin() * (t * x[1]).sin() * (p * x[2]).sin(),
        p * (t * x[0]).sin() * (t * x[1]).cos() * (p * x[2]).cos(),
    ]
}

/// -div(E grad q) by fourth-order central differences of the analytic flux.
fn flow_rhs(x: [f64; 3]) -> f64 {
    let h = 1e-3;
    let flux = |y: [f64; 3], j: usize| {
        let e = flow_coefficient(y);
        let g = q_grad(y);
        (0..3).map(|k| e[j][k] * g[k]).sum::<f64>()
    };
    let mut div = 0.0;
    for j in 0..3 {
        let at = |s: f64| {
            let mut y = x;
            y[j] += s;
            flux(y, j)
        };
        div += (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
    }
    -div
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticStudy {
    pub n: Vec<usize>,
    /// Relative max errors, identity coefficient.
    pub constant: Vec<f64>,
    /// Relative max errors, coefficient from a flow map.
    pub flow: Vec<f64>,
    pub flow_iterations: Vec<usize>,
    /// Residual relative to the right side, worst over all solves.
    pub max_residual: f64,
}

pub fn elliptic_study(ns: &[usize]) -> CliResult<EllipticStudy> {
    let mut out = EllipticStudy {
        n: ns.to_vec(),
        constant: Vec::new(),
        flow: Vec::new(),
        flow_iterations: Vec::new(),
        max_residual: 0.0,
    };
    for &n in ns {
        let grid = Grid::cube(n)?;
        let slab = Slab::new(grid);
        let exact = ScalarField::from_fn(grid, |a, b, c| q_exact([a, b, c]));
        let rhs = exact.scale(9.0 * PI * PI);
        let sol = solve_pressure(&slab, &MatrixField::identity(grid), &rhs)?;
        out.constant.push((&sol.field - &exact).max_abs() / exact.max_abs());
        out.max_residual = out.max_residual.max(sol.residual_norm / rhs.l2_interior());
        let e = MatrixField::from_nodes(grid, |idx| flow_coefficient(grid.coords(idx)));
        let rhs = ScalarField::from_fn(grid, |a, b, c| flow_rhs([a, b, c]));
        let sol = solve_pressure(&slab, &e, &rhs)?;
        out.flow.push((&sol.field - &exact).max_abs() / exact.max_abs());
        out.flow_iterations.push(sol.iterations);
        out.max_residual = out.max_residual.max(sol.residual_norm / rhs.l2_interior());
    }
    Ok(out)
}

/// Observed orders log2(e_k / e_{k+1}) for successive halvings.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Relative residuals of the commutation identity on `count` random
/// smoothed states at resolution n.
pub fn alinhac_residuals(n: usize, count: usize, seed: u64) -> CliResult<Vec<f64>> {
    let slab = Slab::new(Grid::cube(n)?);
    // 1.5 cells keeps kappa = 0.2 admissible down to n = 8
    let kernel = MollifierKernel::with_floor(0.2, &slab, 1.5)?;
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let d = band_limited_vector(slab.grid, &mut r, 2, 2);
        let d = d.scale(0.01 / d.max_abs());
        let f = band_limited_scalar(slab.grid, &mut r, 2, 2);
        let f = f.scale(1.0 / f.max_abs());
        let a: usize = r.gen_range(1..=2);
        let b: usize = r.gen_range(1..=2);
        let ek = smooth_flowmap(&slab, &kernel, &FlowMap::from_displacement(d));
        let mut grad = vector_gradient(&slab, &ek.disp);
        for i in 0..3 {
            grad.c[i][i].data.iter_mut().for_each(|x| *x += 1.0);
        }
        let (_, a_k) = jacobian_and_cofactor(&grad)?;
        let res = good_unknown_residual(&slab, &ek.disp, &a_k, &f, k % 3, (a, b));
        out.push(res.residual / res.lhs);
    }
    Ok(out)
}

/// Random admissible G0: canonical plus a columnar perturbation with
/// |grad psi| <= 1/2, so the face margin stays at least 1/2.
fn random_g0(slab: &Slab, r: &mut impl Rng) -> CliResult<InitialDeformation> {
    let p = HorizontalPattern::random(r, 2).without_mean();
    let raw = ScalarField::from_fn(slab.grid, |x1, x2, _| p.eval(x1, x2));
    let g = slab.gradient(&raw);
    let slope = g.c[0].max_abs().hypot(g.c[1].max_abs());
    let stream = raw.scale(0.5 / slope);
    Ok(make_g0(slab, &G0Recipe::Columnar { stream })?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrip {
    pub max_error: f64,
    pub min_margin: f64,
}

/// Tangential reconstruction on `pairs` random (G0, eta) pairs.
pub fn ig0_round_trip(n: usize, pairs: usize, seed: u64) -> CliResult<RoundTrip> {
    let slab = Slab::new(Grid::cube(n)?);
    let mut r = rng(seed);
    let mut out = RoundTrip {
        max_error: 0.0,
        min_margin: f64::INFINITY,
    };
    for k in 0..pairs {
        let face = if k % 2 == 0 { Face::Bottom } else { Face::Top };
        let g0 = random_g0(&slab, &mut r)?;
        out.min_margin = out.min_margin.min(check_noncollinearity(&g0, face, 0.1).margin);
        let trace: Vec<_> = (0..3).map(|_| band_limited_boundary(slab.grid, face, &mut r, 3)).collect();
        let d1 = BoundaryVectorField {
            c: std::array::from_fn(|i| slab.boundary_derivative(&trace[i], 1, 0)),
        };
        let d2 = BoundaryVectorField {
            c: std::array::from_fn(|i| slab.boundary_derivative(&trace[i], 0, 1)),
        };
        let w = tangential_system(&g0, &d1, &d2);
        let (e1, e2) = reconstruct_tangential(&g0, &w, 0.1)?;
        for i in 0..3 {
            let scale = d1.c[i].max_abs().max(d2.c[i].max_abs()).max(1.0);
            let err = e1.c[i].zip_map(&d1.c[i], |a, b| a - b).max_abs().max(e2.c[i].zip_map(&d2.c[i], |a, b| a - b).max_abs());
            out.max_error = out.max_error.max(err / scale);
        }
    }
    Ok(out)
}

/// Forced selection cases: a degenerate (1,2) minor must fall through to
/// another pair, and an all-degenerate node must be reported.
pub fn ig0_forced_cases() -> CliResult<bool> {
    let grid = Grid::cube(8)?;
    let mut r = rng(5);
    let face = Face::Top;
    let mut random_pair = || -> (BoundaryVectorField, BoundaryVectorField) {
        let mut pick = || BoundaryVectorField {
            c: std::array::from_fn(|_| band_limited_boundary(grid, face, &mut r, 2)),
        };
        (pick(), pick())
    };
    let mut ok = true;
    // rows (1,0,0), (0,0,1): only the (2,0) minor is nonzero
    // rows (0,1,0), (0,0,1): only the (1,2) minor is nonzero
    for rows in [
        [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
    ] {
        let g0 = InitialDeformation {
            g0: MatrixField::constant(grid, rows),
        };
        let (d1, d2) = random_pair();
        let (e1, e2) = reconstruct_tangential(&g0, &tangential_system(&g0, &d1, &d2), 0.1)?;
        for i in 0..3 {
            ok &= e1.c[i].zip_map(&d1.c[i], |a, b| a - b).max_abs() < 1e-12;
            ok &= e2.c[i].zip_map(&d2.c[i], |a, b| a - b).max_abs() < 1e-12;
        }
    }
    let collinear = InitialDeformation {
        g0: MatrixField::constant(grid, [[1.0, 2.0, 0.5], [2.0, 4.0, 1.0], [0.0, 0.0, 0.0]]),
    };
    let (d1, d2) = random_pair();
    ok &= matches!(
        reconstruct_tangential(&collinear, &tangential_system(&collinear, &d1, &d2), 0.1),
        Err(Error::DegenerateMinor { .. })
    );
    Ok(ok)
}

/// Non-collinear gain ratio on a fixed smooth state at resolution n.
pub fn ig0_gain(n: usize) -> CliResult<f64> {
    let slab = Slab::new(Grid::cube(n)?);
    let g0 = make_g0(&slab, &G0Recipe::columnar_sines(slab.grid, 0.3))?;
    let d = VectorField::from_fn(slab.grid, |x1, x2, x3| {
        let w = 2.0 * PI;
        [
            0.01 * (w * x2).sin() * (PI * x3).cos(),
            0.01 * (w * x1).cos() * (1.0 + x3 * x3),
            0.01 * (w * (x1 + x2)).sin() * (PI * x3).sin(),
        ]
    });
    let st = SimState::new(FlowMap::from_displacement(d), VectorField::zeros(slab.grid));
    Ok(Face::BOTH
        .into_iter()
        .map(|f| noncollinear_gain_check(&slab, &g0, &st, f))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConstants {
    /// max ratio per Sobolev order 1..=4.
    pub hodge: [f64; 4],
    pub normal_trace: f64,
}

/// Max Hodge and normal-trace ratios over `count` random fields at
/// resolution n; the fields are the same continuous functions at every n.
pub fn trace_constants(n: usize, count: usize, seed: u64) -> CliResult<TraceConstants> {
    let slab = Slab::new(Grid::cube(n)?);
    let mut out = TraceConstants {
        hodge: [0.0; 4],
        normal_trace: 0.0,
    };
    for k in 0..count as u64 {
        let w = band_limited_vector(slab.grid, &mut rng(seed + k), 2, 2);
        for s in 1..=4 {
            out.hodge[s - 1] = out.hodge[s - 1].max(hodge_check(&slab, &w, s));
        }
        out.normal_trace = out.normal_trace.max(normal_trace_check(&slab, &w).ratio);
    }
    Ok(out)
}

/// |measured - closed form| for w = (0, 0, cos 2 pi x1), per face value
/// 2 pi (1 + 4 pi^2)^(-1/4) / sqrt 2.
pub fn normal_trace_closed_form_error(n: usize) -> CliResult<f64> {
    let slab = Slab::new(Grid::cube(n)?);
    let w = VectorField::from_fn(slab.grid, |x1, _, _| [0.0, 0.0, (2.0 * PI * x1).cos()]);
    let want = 2.0 * PI * (1.0 + 4.0 * PI * PI).powf(-0.25) / 2f64.sqrt();
    let r = normal_trace_check(&slab, &w);
    Ok(r.lhs_faces.iter().map(|f| (f - want).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGate {
    /// (rt, nc) margins of the NC-only datum, per face.
    pub nc_only: Option<([f64; 2], [f64; 2])>,
    pub mixed: Option<([f64; 2], [f64; 2])>,
    pub rt_on_zero_pressure_rejected: bool,
}

pub fn stability_gate(n: usize) -> CliResult<StabilityGate> {
    let slab = Slab::new(Grid::cube(n)?);
    let zero = VectorField::zeros(slab.grid);
    let nc = assemble_initial_data(&slab, &zero, &G0Recipe::Canonical, BoundaryPartition::both_nc())
        .ok()
        .map(|d| (d.margins.rt, d.margins.nc));
    let p = BoundaryPartition::new(Regime::Rt, Regime::Nc, 0.1, 0.1);
    let mixed = assemble_initial_data(&slab, &mixed_velocity(slab.grid, 1.0), &G0Recipe::Canonical, p)
        .ok()
        .map(|d| (d.margins.rt, d.margins.nc));
    let p = BoundaryPartition::new(Regime::Nc, Regime::Rt, 0.1, 0.1);
    let rejected = matches!(
        assemble_initial_data(&slab, &zero, &G0Recipe::Canonical, p),
        Err(Error::StabilityViolation { face: Face::Top, .. })
    );
    Ok(StabilityGate {
        nc_only: nc,
        mixed,
        rt_on_zero_pressure_rejected: rejected,
    })
}
