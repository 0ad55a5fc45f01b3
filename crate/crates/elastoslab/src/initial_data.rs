//! Initial data: divergence-free velocity, admissible G0, initial pressure
//! and the two boundary stability conditions.

use std::f64::consts::PI;

use crate::elliptic::{laplace_spectrum, normal_pressure_gradient, solve_laplace_dirichlet};
use crate::error::{Error, Result};
use crate::geometry::{vector_gradient, InitialDeformation};
use crate::grid::{BoundaryScalarField, Face, Grid, MatrixField, ScalarField, VectorField};
use crate::random::{rng, HorizontalPattern};
use crate::slab::Slab;

/// Absolute tolerance for div v0, div G0^T and the face rows of G0.
pub const TAU_CON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Rayleigh-Taylor sign condition.
    Rt,
    /// Non-collinearity condition.
    Nc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPartition {
    pub bottom: Regime,
    pub top: Regime,
    pub lambda: f64,
    pub delta: f64,
}

impl BoundaryPartition {
    pub fn new(bottom: Regime, top: Regime, lambda: f64, delta: f64) -> Self {
        assert!(lambda > 0.0 && delta > 0.0, "stability floors must be positive");
        Self {
            bottom,
            top,
            lambda,
            delta,
        }
    }

    pub fn both_nc() -> Self {
        Self::new(Regime::Nc, Regime::Nc, 0.1, 0.1)
    }

    pub fn regime(&self, face: Face) -> Regime {
        match face {
            Face::Bottom => self.bottom,
            Face::Top => self.top,
        }
    }

    pub fn rt_faces(&self) -> Vec<Face> {
        Face::BOTH.into_iter().filter(|&f| self.regime(f) == Regime::Rt).collect()
    }
}

#[derive(Debug, Clone)]
pub enum G0Recipe {
    Canonical,
    /// Canonical plus `amplitude * sin(2 pi x1)` in G0_21.
    Sheared { amplitude: f64 },
    /// Canonical plus (d2 psi, -d1 psi, 0) added to the first column.
    Columnar { stream: ScalarField },
}

impl G0Recipe {
    /// Columnar recipe with psi = a sin(2 pi x1) sin(2 pi x2) / (2 pi).
    pub fn columnar_sines(grid: Grid, amplitude: f64) -> Self {
        G0Recipe::Columnar {
            stream: ScalarField::from_fn(grid, |x1, x2, _| {
                amplitude * (2.0 * PI * x1).sin() * (2.0 * PI * x2).sin() / (2.0 * PI)
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub pass: bool,
    pub margin: f64,
}

/// Measured margins indexed [bottom, top].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    pub rt: [f64; 2],
    pub nc: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub v0: VectorField,
    pub g0: InitialDeformation,
    pub q0: ScalarField,
    pub partition: BoundaryPartition,
    pub margins: Margins,
}

/// Returns (max_l ||D_k G0_kl||_0, max over faces and l of |G0_3l|).
pub fn g0_constraint_residuals(slab: &Slab, g0: &InitialDeformation) -> (f64, f64) {
    let mut div = 0.0f64;
    for l in 0..3 {
        let col = VectorField::from_components(|k| g0.g0.c[k][l].clone());
        div = div.max(slab.divergence(&col).l2());
    }
    let mut face = 0.0f64;
    for f in Face::BOTH {
        for l in 0..3 {
            face = face.max(g0.g0.c[2][l].trace(f).max_abs());
        }
    }
    (div, face)
}

pub fn make_g0(slab: &Slab, recipe: &G0Recipe) -> Result<InitialDeformation> {
    let grid = slab.grid;
    let mut g0 = MatrixField::constant(grid, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
    match recipe {
        G0Recipe::Canonical => {}
        G0Recipe::Sheared { amplitude } => {
            let a = *amplitude;
            g0.c[1][0] = ScalarField::from_fn(grid, |x1, _, _| a * (2.0 * PI * x1).sin());
        }
        G0Recipe::Columnar { stream } => {
            let d1 = slab.tangential_derivative(stream, 1, 1);
            let d2 = slab.tangential_derivative(stream, 2, 1);
            g0.c[0][0].axpy(1.0, &d2);
            g0.c[1][0].axpy(-1.0, &d1);
        }
    }
    let g0 = InitialDeformation { g0 };
    let (div, face) = g0_constraint_residuals(slab, &g0);
    if div.max(face) > TAU_CON {
        return Err(Error::InvalidRecipe(div.max(face)));
    }
    Ok(g0)
}

/// v - grad(phi) with -Lap phi = -div v and phi = 0 on the faces.
///
/// The divergence vanishes at interior nodes; face nodes keep the defect of
/// the one-sided stencils.
pub fn project_divergence_free(slab: &Slab, v: &VectorField) -> VectorField {
    let div = slab.divergence(v);
    let phi_spec = laplace_spectrum(slab, &slab.forward_one(&div.scale(-1.0).data), None, None);
    let phi = ScalarField::from_vec(slab.grid, slab.inverse_one(&phi_spec));
    let grad = slab.gradient(&phi);
    v.sub(&grad)
}

/// Solve -Lap q0 = d_j v_i d_i v_j - d_j G0_ik d_i G0_jk, q0 = 0 on the faces.
pub fn initial_pressure(slab: &Slab, v0: &VectorField, g0: &InitialDeformation) -> Result<ScalarField> {
    let grid = slab.grid;
    let dv = vector_gradient(slab, v0);
    let fields: Vec<&ScalarField> = g0.g0.c.iter().flatten().collect();
    let dg = slab.gradients(&fields);
    // dg[i * 3 + k].c[j] = D_j G0_ik
    let mut rhs = ScalarField::zeros(grid);
    for idx in 0..grid.len() {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += dv.c[i][j].data[idx] * dv.c[j][i].data[idx];
                for k in 0..3 {
                    s -= dg[i * 3 + k].c[j].data[idx] * dg[j * 3 + k].c[i].data[idx];
                }
            }
        }
        rhs.data[idx] = s;
    }
    let zb = BoundaryScalarField::zeros(grid, Face::Bottom);
    let zt = BoundaryScalarField::zeros(grid, Face::Top);
    Ok(solve_laplace_dirichlet(slab, &rhs, &zb, &zt)?.field)
}

/// margin = min over the face of -grad q . N.
pub fn check_rayleigh_taylor(slab: &Slab, q: &ScalarField, face: Face, lambda: f64) -> Check {
    let margin = normal_pressure_gradient(slab, q, face)
        .data
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min(x));
    Check {
        pass: margin >= lambda,
        margin,
    }
}

/// |G0_1. x G0_2.| at one node, where G0_k. = (G0_k1, G0_k2, G0_k3).
pub fn cross_norm(g: &[[f64; 3]; 3]) -> f64 {
    let (a, b) = (g[0], g[1]);
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

pub fn check_noncollinearity(g0: &InitialDeformation, face: Face, delta: f64) -> Check {
    let grid = g0.grid();
    let off = grid.face_layer(face) * grid.layer_len();
    let margin = (0..grid.layer_len())
        .map(|p| cross_norm(&g0.g0.at(off + p)))
        .fold(f64::INFINITY, f64::min);
    Check {
        pass: margin >= delta,
        margin,
    }
}

pub fn assemble_initial_data(
    slab: &Slab,
    v_raw: &VectorField,
    recipe: &G0Recipe,
    partition: BoundaryPartition,
) -> Result<InitialData> {
    let v0 = project_divergence_free(slab, v_raw);
    let g0 = make_g0(slab, recipe)?;
    let q0 = initial_pressure(slab, &v0, &g0)?;
    let mut margins = Margins {
        rt: [0.0; 2],
        nc: [0.0; 2],
    };
    for (n, face) in Face::BOTH.into_iter().enumerate() {
        margins.rt[n] = check_rayleigh_taylor(slab, &q0, face, partition.lambda).margin;
        margins.nc[n] = check_noncollinearity(&g0, face, partition.delta).margin;
    }
    for (n, face) in Face::BOTH.into_iter().enumerate() {
        let ok = match partition.regime(face) {
            Regime::Rt => margins.rt[n] >= partition.lambda,
            Regime::Nc => margins.nc[n] >= partition.delta,
        };
        if !ok {
            return Err(Error::StabilityViolation {
                face,
                rt_margin: margins.rt[n],
                nc_margin: margins.nc[n],
            });
        }
    }
    Ok(InitialData {
        v0,
        g0,
        q0,
        partition,
        margins,
    })
}

/// Velocity of the standard perturbed run: the discrete curl of
/// sin^2(pi x3) P(x1, x2) with P a random field of wavenumbers |k| <= 2,
/// scaled to the given pointwise maximum.
pub fn standard_velocity(slab: &Slab, seed: u64, amplitude: f64) -> VectorField {
    let grid = slab.grid;
    let mut r = rng(seed);
    let potential = VectorField::from_components(|_| {
        let p = HorizontalPattern::random(&mut r, 2).without_mean();
        ScalarField::from_fn(grid, |x1, x2, x3| (PI * x3).sin().powi(2) * p.eval(x1, x2))
    });
    let dp = vector_gradient(slab, &potential);
    let curl = VectorField::new([
        &dp.c[2][1] - &dp.c[1][2],
        &dp.c[0][2] - &dp.c[2][0],
        &dp.c[1][0] - &dp.c[0][1],
    ]);
    let peak = curl.max_norm();
    curl.scale(amplitude / peak)
}

/// Velocity whose initial pressure satisfies the sign condition on the
/// bottom face: a (-sin(2 pi x1) / (2 pi), 0, x3 cos(2 pi x1)).
pub fn mixed_velocity(grid: Grid, amplitude: f64) -> VectorField {
    VectorField::from_fn(grid, |x1, _, x3| {
        [
            -amplitude * (2.0 * PI * x1).sin() / (2.0 * PI),
            0.0,
            amplitude * x3 * (2.0 * PI * x1).cos(),
        ]
    })
}
