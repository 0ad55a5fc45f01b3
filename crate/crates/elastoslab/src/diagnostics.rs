//! Energies, constraint residuals and measured lemma constants.

use crate::error::{AprioriStatus, Error, Result};
use crate::evolution::{Evaluation, KappaSystem, SimState};
use crate::geometry::{
    a_curl_from_gradient, a_divergence, deformation_from_flowmap, directional_from_gradient, jacobian_and_cofactor,
    row_divergence, vector_gradient, InitialDeformation,
};
use crate::grid::{BoundaryScalarField, BoundaryVectorField, Face, MatrixField, ScalarField, VectorField};
use crate::initial_data::{check_noncollinearity, check_rayleigh_taylor, BoundaryPartition, Regime};
use crate::mollifier::{commutator, MollifierKernel};
use crate::slab::{Slab, Spectrum, C64};

/// The four summands of an energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    pub v: f64,
    pub eta: f64,
    pub g0_eta: f64,
    pub boundary: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.v + self.eta + self.g0_eta + self.boundary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// ||div_{A^kappa} v||_0
    pub div_a_v: f64,
    /// max |J^kappa - 1|
    pub j_minus_1: f64,
    /// max over i of ||D_j(J^kappa A^kappa_ij)||_0
    pub piola: f64,
    /// ||grad(eta) G0 - F||_0 against the co-evolved F, 0 when not tracked.
    pub f_identity: f64,
    /// ||div v||_3
    pub div_v: f64,
    /// ||div(G0^T grad eta)||_3
    pub div_g0t_eta: f64,
    pub curl_a_v: f64,
    pub curl_a_g0t_eta: f64,
    /// Change of curl_a_v + curl_a_g0t_eta since the first record.
    pub curl_growth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub e_limit: f64,
    pub e_kappa: f64,
    pub limit_parts: EnergyParts,
    pub kappa_parts: EnergyParts,
    pub residuals: Residuals,
    /// RT margins per face [bottom, top], NaN on NC faces.
    pub rt_margins: [f64; 2],
    /// NC margins per face, NaN on RT faces.
    pub nc_margins: [f64; 2],
    pub apriori: AprioriStatus,
    pub pressure_iterations: usize,
    pub pressure_residual: f64,
}

/// int over the slab of x_axis * f, exact horizontally for trigonometric f.
fn moment(slab: &Slab, f: &ScalarField, axis: usize) -> f64 {
    let grid = f.grid;
    let w = grid.vertical_weights();
    if axis == 2 {
        let m = grid.layer_len() as f64;
        return w
            .iter()
            .enumerate()
            .map(|(l, wz)| {
                let x3 = l as f64 * grid.h3();
                wz * x3 * f.layer(l).iter().sum::<f64>() / m
            })
            .sum();
    }
    let n = if axis == 0 { grid.n1 } else { grid.n2 };
    let spec = slab.forward_one(&f.data);
    let norm = 1.0 / grid.layer_len() as f64;
    let mut total = 0.0;
    for (l, wz) in w.iter().enumerate() {
        let layer = spec.layer(l);
        let at = |k: usize| if axis == 0 { layer[k] } else { layer[k * grid.n1] };
        let mut s = at(0).re * norm / 2.0;
        for k in 1..n / 2 {
            s += at(k).im * norm / (std::f64::consts::PI * k as f64);
        }
        total += wz * s;
    }
    total
}

/// ||eta||_4^2 for eta = x + d.
pub fn flowmap_norm_sq(slab: &Slab, disp: &VectorField) -> f64 {
    let d = slab.sobolev_norm_sq_many(&[&disp.c[0], &disp.c[1], &disp.c[2]], 4);
    let xd: f64 = (0..3).map(|i| moment(slab, &disp.c[i], i)).sum();
    let div = disp.c[2].trace(Face::Top).mean() - disp.c[2].trace(Face::Bottom).mean();
    d + 1.0 + 2.0 * xd + 3.0 + 2.0 * div
}

/// Sum over a1 + a2 = 4 of |d^a(sum_i f_i n_i)|^2 on a face, where the
/// spectra `specs[i]` are face spectra of f_i and `n` is given nodewise.
fn tangential_four_sq(slab: &Slab, specs: &[Spectrum], n: &[Vec<f64>; 3]) -> f64 {
    let mut total = 0.0;
    for a1 in 0..=4 {
        let mult = slab.hmult(a1, 4 - a1);
        let ds: Vec<Spectrum> = specs.iter().map(|s| s.times(&mult)).collect();
        let phys = slab.inverse(&[&ds[0], &ds[1], &ds[2]]);
        let m = phys[0].len();
        let s: f64 = (0..m)
            .map(|p| {
                let x: f64 = (0..3).map(|i| phys[i][p] * n[i][p]).sum();
                x * x
            })
            .sum();
        total += s / m as f64;
    }
    total
}

fn bulk_parts(slab: &Slab, g0: &InitialDeformation, st: &SimState, grad_eta: &MatrixField) -> EnergyParts {
    let v = slab.sobolev_norm_sq_many(&[&st.v.c[0], &st.v.c[1], &st.v.c[2]], 4);
    let eta = flowmap_norm_sq(slab, &st.eta.disp);
    let w = directional_from_gradient(g0, grad_eta);
    let fields: Vec<&ScalarField> = w.c.iter().flatten().collect();
    let g0_eta = slab.sobolev_norm_sq_many(&fields, 4);
    EnergyParts {
        v,
        eta,
        g0_eta,
        boundary: 0.0,
    }
}

fn face_column(a: &MatrixField, face: Face, unit: bool) -> [Vec<f64>; 3] {
    let grid = a.grid();
    let m = grid.layer_len();
    let off = grid.face_layer(face) * m;
    let mut col: [Vec<f64>; 3] = std::array::from_fn(|i| a.c[i][2].data[off..off + m].to_vec());
    if unit {
        for p in 0..m {
            let r = (col[0][p].powi(2) + col[1][p].powi(2) + col[2][p].powi(2)).sqrt();
            for c in col.iter_mut() {
                c[p] /= r;
            }
        }
    }
    col
}

/// Energy of the limit problem, with the unit normal built from the
/// un-smoothed flow map.
pub fn energy_limit(
    slab: &Slab,
    g0: &InitialDeformation,
    partition: &BoundaryPartition,
    st: &SimState,
    grad_eta: &MatrixField,
) -> Result<EnergyParts> {
    let mut parts = bulk_parts(slab, g0, st, grad_eta);
    let rt = partition.rt_faces();
    if !rt.is_empty() {
        let (_, a) = jacobian_and_cofactor(grad_eta)?;
        for face in rt {
            let specs: Vec<Spectrum> = st.eta.disp.c.iter().map(|c| slab.face_spectrum(&c.trace(face))).collect();
            parts.boundary += tangential_four_sq(slab, &specs, &face_column(&a, face, true));
        }
    }
    Ok(parts)
}

/// Energy of the kappa problem; the boundary factor is
/// d^4 (Lambda_kappa eta_i) A^kappa_i3.
pub fn energy_kappa(
    slab: &Slab,
    kernel: &MollifierKernel,
    g0: &InitialDeformation,
    partition: &BoundaryPartition,
    st: &SimState,
    grad_eta: &MatrixField,
    a_k: &MatrixField,
) -> EnergyParts {
    let mut parts = bulk_parts(slab, g0, st, grad_eta);
    for face in partition.rt_faces() {
        let specs: Vec<Spectrum> = st
            .eta
            .disp
            .c
            .iter()
            .map(|c| kernel.mollify_spectrum(&slab.face_spectrum(&c.trace(face))))
            .collect();
        parts.boundary += tangential_four_sq(slab, &specs, &face_column(a_k, face, false));
    }
    parts
}

/// Both energies together; when there is no RT face they share the bulk
/// computation.
fn energies(system: &KappaSystem<'_>, st: &SimState, ev: &Evaluation) -> Result<(EnergyParts, EnergyParts)> {
    let slab = system.slab;
    if system.partition.rt_faces().is_empty() {
        let p = bulk_parts(slab, &system.g0, st, &ev.grad_eta);
        return Ok((p, p));
    }
    let lim = energy_limit(slab, &system.g0, &system.partition, st, &ev.grad_eta)?;
    let mut kap = lim;
    kap.boundary = 0.0;
    for face in system.partition.rt_faces() {
        let specs: Vec<Spectrum> = st
            .eta
            .disp
            .c
            .iter()
            .map(|c| system.kernel.mollify_spectrum(&slab.face_spectrum(&c.trace(face))))
            .collect();
        kap.boundary += tangential_four_sq(slab, &specs, &face_column(&ev.a_k, face, false));
    }
    Ok((lim, kap))
}

/// Constraint residuals of a state with a fresh evaluation.
pub fn constraint_report(system: &KappaSystem<'_>, st: &SimState, ev: &Evaluation) -> Residuals {
    let slab = system.slab;
    let div_a_v = crate::geometry::a_divergence_from_gradient(&ev.a_k, &ev.grad_v).l2();
    let j_minus_1 = ev.j_k.data.iter().fold(0.0f64, |m, j| m.max((j - 1.0).abs()));
    let ja = MatrixField::from_entries(|r, s| &ev.j_k * &ev.a_k.c[r][s]);
    let piola = row_divergence(slab, &ja).c.iter().map(ScalarField::l2).fold(0.0, f64::max);
    let f_identity = match &st.deformation {
        Some(f) => deformation_from_flowmap(&ev.grad_eta, &system.g0).sub(f).l2(),
        None => 0.0,
    };
    let div_v = slab.sobolev_norm(&slab.divergence(&st.v), 3);
    let w = directional_from_gradient(&system.g0, &ev.grad_eta);
    // column l of G0^T grad eta as a vector field over i
    let cols: Vec<VectorField> = (0..3).map(|l| VectorField::from_components(|i| w.c[l][i].clone())).collect();
    let divs: Vec<ScalarField> = cols.iter().map(|c| slab.divergence(c)).collect();
    let div_g0t_eta = slab.sobolev_norm_sq_many(&divs.iter().collect::<Vec<_>>(), 3).sqrt();
    let curl_v = a_curl_from_gradient(&ev.a_k, &ev.grad_v);
    let curl_a_v = slab.sobolev_norm_vector(&curl_v, 3);
    let curls: Vec<VectorField> = cols
        .iter()
        .map(|c| a_curl_from_gradient(&ev.a_k, &vector_gradient(slab, c)))
        .collect();
    let fields: Vec<&ScalarField> = curls.iter().flat_map(|c| c.c.iter()).collect();
    let curl_a_g0t_eta = slab.sobolev_norm_sq_many(&fields, 3).sqrt();
    Residuals {
        div_a_v,
        j_minus_1,
        piola,
        f_identity,
        div_v,
        div_g0t_eta,
        curl_a_v,
        curl_a_g0t_eta,
        curl_growth: 0.0,
    }
}

/// Build the per-snapshot record. `reference` holds the curl sum of the
/// first record and is filled on the first call.
pub fn energy_record(
    system: &KappaSystem<'_>,
    st: &SimState,
    ev: &Evaluation,
    reference: &mut Option<f64>,
) -> EnergyRecord {
    let (limit_parts, kappa_parts) = energies(system, st, ev).unwrap_or_else(|_| {
        let nan = EnergyParts {
            v: f64::NAN,
            eta: f64::NAN,
            g0_eta: f64::NAN,
            boundary: f64::NAN,
        };
        (nan, nan)
    });
    let mut residuals = constraint_report(system, st, ev);
    let curl = residuals.curl_a_v + residuals.curl_a_g0t_eta;
    let base = *reference.get_or_insert(curl);
    residuals.curl_growth = curl - base;
    let mut rt_margins = [f64::NAN; 2];
    let mut nc_margins = [f64::NAN; 2];
    for (n, face) in Face::BOTH.into_iter().enumerate() {
        match system.partition.regime(face) {
            Regime::Rt => rt_margins[n] = check_rayleigh_taylor(system.slab, &ev.q, face, 0.0).margin,
            Regime::Nc => nc_margins[n] = check_noncollinearity(&system.g0, face, 0.0).margin,
        }
    }
    EnergyRecord {
        t: st.t,
        e_limit: limit_parts.total(),
        e_kappa: kappa_parts.total(),
        limit_parts,
        kappa_parts,
        residuals,
        rt_margins,
        nc_margins,
        apriori: ev.status,
        pressure_iterations: ev.pressure_iterations,
        pressure_residual: ev.pressure_residual,
    }
}

fn face_gradient_norm(slab: &Slab, f: &BoundaryScalarField, s: f64) -> f64 {
    let spec = slab.face_spectrum(f);
    let a = slab.boundary_norm_of_spectrum(&spec.times(&slab.hmult(1, 0)), s);
    let b = slab.boundary_norm_of_spectrum(&spec.times(&slab.hmult(0, 1)), s);
    (a * a + b * b).sqrt()
}

/// ||w||_s over ||w||_0 + ||curl w||_{s-1} + ||div w||_{s-1}
///   + sum over faces |d(w . N)|_{s-3/2}.
pub fn hodge_check(slab: &Slab, w: &VectorField, s: usize) -> f64 {
    assert!((1..=4).contains(&s), "Hodge order must be 1..=4");
    let dw = vector_gradient(slab, w);
    let curl = a_curl_from_gradient(&MatrixField::identity(slab.grid), &dw);
    let mut div = dw.c[0][0].clone();
    div.axpy(1.0, &dw.c[1][1]);
    div.axpy(1.0, &dw.c[2][2]);
    let lhs = slab.sobolev_norm_vector(w, s);
    let mut rhs = slab.sobolev_norm_vector(w, 0)
        + slab.sobolev_norm_vector(&curl, s - 1)
        + slab.sobolev_norm(&div, s - 1);
    for face in Face::BOTH {
        rhs += face_gradient_norm(slab, &w.c[2].trace(face), s as f64 - 1.5);
    }
    lhs / rhs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalTrace {
    /// |d(w . N)|_{-1/2} on [bottom, top].
    pub lhs_faces: [f64; 2],
    pub lhs: f64,
    /// ||dw||_0 + ||div w||_0 with d tangential.
    pub rhs: f64,
    pub ratio: f64,
}

pub fn normal_trace_check(slab: &Slab, w: &VectorField) -> NormalTrace {
    let mut lhs_faces = [0.0; 2];
    for (n, face) in Face::BOTH.into_iter().enumerate() {
        lhs_faces[n] = face_gradient_norm(slab, &w.c[2].trace(face), -0.5);
    }
    let lhs = (lhs_faces[0].powi(2) + lhs_faces[1].powi(2)).sqrt();
    let dw = vector_gradient(slab, w);
    let mut tang = 0.0;
    for i in 0..3 {
        for a in 0..2 {
            tang += dw.c[i][a].l2().powi(2);
        }
    }
    let rhs = tang.sqrt() + slab.divergence(w).l2();
    NormalTrace {
        lhs_faces,
        lhs,
        rhs,
        ratio: lhs / rhs,
    }
}

/// Column pairs (a, b) of the three 2x2 minors in selection order.
pub const MINOR_PAIRS: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];

/// Minor P = G0_1a G0_2b - G0_2a G0_1b of a node matrix.
pub fn minor(g: &[[f64; 3]; 3], (a, b): (usize, usize)) -> f64 {
    g[0][a] * g[1][b] - g[1][a] * g[0][b]
}

/// Index into MINOR_PAIRS of the largest minor; ties keep the earlier pair.
pub fn select_minor(g: &[[f64; 3]; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if minor(g, MINOR_PAIRS[k]).abs() > minor(g, MINOR_PAIRS[best]).abs() {
            best = k;
        }
    }
    best
}

/// W_l = G0_1l d1 eta + G0_2l d2 eta on a face, l = 1..3.
pub fn tangential_system(
    g0: &InitialDeformation,
    d1: &BoundaryVectorField,
    d2: &BoundaryVectorField,
) -> [BoundaryVectorField; 3] {
    let face = d1.c[0].face;
    let grid = g0.grid();
    let m = grid.layer_len();
    let off = grid.face_layer(face) * m;
    std::array::from_fn(|l| BoundaryVectorField {
        c: std::array::from_fn(|i| {
            let mut out = BoundaryScalarField::zeros(grid, face);
            for p in 0..m {
                out.data[p] = g0.g0.c[0][l].data[off + p] * d1.c[i].data[p] + g0.g0.c[1][l].data[off + p] * d2.c[i].data[p];
            }
            out
        }),
    })
}

/// Recover (d1 eta, d2 eta) from the three combinations W_l by a nodewise
/// 2x2 solve on the largest minor.
pub fn reconstruct_tangential(
    g0: &InitialDeformation,
    w: &[BoundaryVectorField; 3],
    delta: f64,
) -> Result<(BoundaryVectorField, BoundaryVectorField)> {
    let face = w[0].c[0].face;
    let grid = g0.grid();
    let m = grid.layer_len();
    let off = grid.face_layer(face) * m;
    let mut d1 = BoundaryVectorField::zeros(grid, face);
    let mut d2 = BoundaryVectorField::zeros(grid, face);
    for p in 0..m {
        let g = g0.g0.at(off + p);
        let k = select_minor(&g);
        let (a, b) = MINOR_PAIRS[k];
        let det = minor(&g, (a, b));
        if det * det < delta * delta / 3.0 {
            return Err(Error::DegenerateMinor { node: p });
        }
        for i in 0..3 {
            let (wa, wb) = (w[a].c[i].data[p], w[b].c[i].data[p]);
            d1.c[i].data[p] = (g[1][b] * wa - g[1][a] * wb) / det;
            d2.c[i].data[p] = (-g[0][b] * wa + g[0][a] * wb) / det;
        }
    }
    Ok((d1, d2))
}

/// |d^4 eta|_{1/2} on a face over ||G0^T grad eta||_4.
pub fn noncollinear_gain_check(slab: &Slab, g0: &InitialDeformation, st: &SimState, face: Face) -> f64 {
    let mut lhs = 0.0;
    for c in &st.eta.disp.c {
        let spec = slab.face_spectrum(&c.trace(face));
        for a1 in 0..=4 {
            lhs += slab.boundary_norm_of_spectrum(&spec.times(&slab.hmult(a1, 4 - a1)), 0.5).powi(2);
        }
    }
    let grad = crate::geometry::deformation_gradient(slab, &st.eta);
    let w = directional_from_gradient(g0, &grad);
    let fields: Vec<&ScalarField> = w.c.iter().flatten().collect();
    lhs.sqrt() / slab.sobolev_norm_sq_many(&fields, 4).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodUnknownResidual {
    /// L2 norm of lhs - rhs.
    pub residual: f64,
    /// L2 norm of the left side.
    pub lhs: f64,
}

fn apply_mult(slab: &Slab, f: &ScalarField, mult: &[C64]) -> ScalarField {
    ScalarField::from_vec(slab.grid, slab.inverse_one(&slab.forward_one(&f.data).times(mult)))
}

/// Both sides of the commutation identity for T = d_a d_b Lap_*:
///   T(A_ij D_j f) = A_ij D_j(T f - T eta_m A_mk D_k f) + C1 + C2 - C3
/// with C1 = T(A_ij D_j f) - T(A_ij) D_j f - A_ij D_j T f,
/// C2 = T eta_m A_mk D_k(A_ij D_j f),
/// C3 = sum [P(A_il A_mj X_lm) - A_il A_mj P(X_lm)] D_j f,
/// P = d_a Lap_*, X_lm = d_b D_l eta_m, A and eta from the smoothed map.
pub fn good_unknown_residual(
    slab: &Slab,
    eta_k: &VectorField,
    a_k: &MatrixField,
    f: &ScalarField,
    i: usize,
    (a, b): (usize, usize),
) -> GoodUnknownResidual {
    let unit = |ax: usize| if ax == 1 { (1, 0) } else { (0, 1) };
    let lap: Vec<C64> = slab.hmult(2, 0).iter().zip(slab.hmult(0, 2)).map(|(x, y)| x + y).collect();
    let (pa1, pa2) = unit(a);
    let (pb1, pb2) = unit(b);
    let p_mult: Vec<C64> = slab.hmult(pa1, pa2).iter().zip(&lap).map(|(x, y)| x * y).collect();
    let t_mult: Vec<C64> = p_mult.iter().zip(slab.hmult(pb1, pb2)).map(|(x, y)| x * y).collect();
    let b_mult = slab.hmult(pb1, pb2);
    let t = |g: &ScalarField| apply_mult(slab, g, &t_mult);
    let p = |g: &ScalarField| apply_mult(slab, g, &p_mult);

    let df = slab.gradient(f);
    let grad_a = |g: &VectorField, r: usize| {
        let mut out = ScalarField::zeros(slab.grid);
        for k in 0..3 {
            out.axpy(1.0, &(&a_k.c[r][k] * &g.c[k]));
        }
        out
    };
    let ga_f = grad_a(&df, i);
    let lhs = t(&ga_f);

    let tf = t(f);
    let teta: Vec<ScalarField> = eta_k.c.iter().map(&t).collect();
    let mut good = tf.clone();
    let ga_all: Vec<ScalarField> = (0..3).map(|m| grad_a(&df, m)).collect();
    for m in 0..3 {
        good.axpy(-1.0, &(&teta[m] * &ga_all[m]));
    }
    let mut rhs = grad_a(&slab.gradient(&good), i);

    // C1
    let dtf = slab.gradient(&tf);
    let mut c1 = lhs.clone();
    for j in 0..3 {
        c1.axpy(-1.0, &(&t(&a_k.c[i][j]) * &df.c[j]));
        c1.axpy(-1.0, &(&a_k.c[i][j] * &dtf.c[j]));
    }
    // C2
    let dga = slab.gradient(&ga_f);
    let mut c2 = ScalarField::zeros(slab.grid);
    for m in 0..3 {
        c2.axpy(1.0, &(&teta[m] * &grad_a(&dga, m)));
    }
    // C3
    let deta = vector_gradient(slab, eta_k);
    let x: Vec<Vec<ScalarField>> = (0..3)
        .map(|l| (0..3).map(|m| apply_mult(slab, &deta.c[m][l], &b_mult)).collect())
        .collect();
    let px: Vec<Vec<ScalarField>> = x.iter().map(|row| row.iter().map(&p).collect()).collect();
    let mut c3 = ScalarField::zeros(slab.grid);
    for j in 0..3 {
        let mut inner = ScalarField::zeros(slab.grid);
        let mut prod = ScalarField::zeros(slab.grid);
        for l in 0..3 {
            for m in 0..3 {
                let coef = &a_k.c[i][l] * &a_k.c[m][j];
                prod.axpy(1.0, &(&coef * &x[l][m]));
                inner.axpy(1.0, &(&coef * &px[l][m]));
            }
        }
        let bracket = &p(&prod) - &inner;
        c3.axpy(1.0, &(&bracket * &df.c[j]));
    }
    rhs.axpy(1.0, &c1);
    rhs.axpy(1.0, &c2);
    rhs.axpy(-1.0, &c3);
    GoodUnknownResidual {
        residual: (&lhs - &rhs).l2(),
        lhs: lhs.l2(),
    }
}

/// sup |rho_hat| over the grid: the H^s operator norm of Lambda_kappa for
/// every s.
pub fn mollifier_operator_norm(kernel: &MollifierKernel) -> f64 {
    kernel.spectrum_max_abs()
}

/// sup_k |k| |rho_hat(k)| (1 + |k|^2)^(-s/2): the H^s to L2 norm of the
/// tangential gradient of Lambda_kappa.
pub fn mollifier_loss(slab: &Slab, kernel: &MollifierKernel, s: f64) -> f64 {
    slab.k_squared()
        .iter()
        .zip(&kernel.spectrum)
        .map(|(k2, r)| k2.sqrt() * r.abs() * (1.0 + k2).powf(-s / 2.0))
        .fold(0.0, f64::max)
}

/// Ratios of the three commutator estimates for one (h, g) pair, with d
/// the tangential gradient:
/// |[L,h]g|_0 / (|h|_inf |g|_0),
/// |[L,h]dg|_0 / (|h|_W1inf |g|_0),
/// |[L,h]dg|_{1/2} / (|h|_W1inf |g|_{1/2}).
pub fn commutator_ratios(
    slab: &Slab,
    kernel: &MollifierKernel,
    h: &BoundaryScalarField,
    g: &BoundaryScalarField,
) -> [f64; 3] {
    let h_inf = h.max_abs();
    let d1h = slab.boundary_derivative(h, 1, 0);
    let d2h = slab.boundary_derivative(h, 0, 1);
    let dh_inf = d1h.zip_map(&d2h, |a, b| (a * a + b * b).sqrt()).max_abs();
    let h_w1 = h_inf + dh_inf;
    let c0 = commutator(slab, kernel, h, g);
    let (mut n0, mut n_half) = (0.0, 0.0);
    for (a1, a2) in [(1, 0), (0, 1)] {
        let c = commutator(slab, kernel, h, &slab.boundary_derivative(g, a1, a2));
        n0 += slab.boundary_norm(&c, 0.0).powi(2);
        n_half += slab.boundary_norm(&c, 0.5).powi(2);
    }
    [
        slab.boundary_norm(&c0, 0.0) / (h_inf * slab.boundary_norm(g, 0.0)),
        n0.sqrt() / (h_w1 * slab.boundary_norm(g, 0.0)),
        n_half.sqrt() / (h_w1 * slab.boundary_norm(g, 0.5)),
    ]
}

/// Measured commutator constants: the largest ratio over h and g drawn from
/// sin and cos of 2 pi m x_a, m a power of two up to a quarter of the grid.
pub fn commutator_constants(slab: &Slab, kernel: &MollifierKernel) -> [f64; 3] {
    use std::f64::consts::PI;
    let grid = slab.grid;
    let face = Face::Bottom;
    let mut family = Vec::new();
    let mut m = 1;
    while m <= grid.n1.min(grid.n2) / 4 {
        let w = 2.0 * PI * m as f64;
        family.push(BoundaryScalarField::from_fn(grid, face, |x1, _| (w * x1).sin()));
        family.push(BoundaryScalarField::from_fn(grid, face, |x1, _| (w * x1).cos()));
        family.push(BoundaryScalarField::from_fn(grid, face, |_, x2| (w * x2).sin()));
        family.push(BoundaryScalarField::from_fn(grid, face, |_, x2| (w * x2).cos()));
        m *= 2;
    }
    let mut best = [0.0f64; 3];
    for h in family.iter().step_by(2) {
        for g in &family {
            let r = commutator_ratios(slab, kernel, h, g);
            for (b, x) in best.iter_mut().zip(r) {
                *b = b.max(x);
            }
        }
    }
    best
}

/// max over faces of |d psi|_inf / sqrt(kappa).
pub fn psi_smallness(slab: &Slab, kappa: f64, psi: &VectorField) -> f64 {
    let mut m = 0.0f64;
    for face in Face::BOTH {
        let traces: Vec<BoundaryScalarField> = psi.c.iter().map(|c| c.trace(face)).collect();
        let mut sq = vec![0.0; slab.grid.layer_len()];
        for t in &traces {
            for (a1, a2) in [(1, 0), (0, 1)] {
                for (s, x) in sq.iter_mut().zip(&slab.boundary_derivative(t, a1, a2).data) {
                    *s += x * x;
                }
            }
        }
        m = m.max(sq.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt());
    }
    m / kappa.sqrt()
}

/// ||div_A v||_0 for an arbitrary A, convenience for tests.
pub fn a_divergence_norm(slab: &Slab, a: &MatrixField, v: &VectorField) -> f64 {
    a_divergence(slab, a, v).l2()
}
