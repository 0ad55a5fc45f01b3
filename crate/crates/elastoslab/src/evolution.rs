//! The kappa-regularized system: boundary smoothing, the modification term,
//! the pressure solve and RK4 time stepping.

use std::sync::Arc;

use crate::diagnostics::{self, EnergyRecord};
use crate::elliptic::{
    harmonic_extension_spectrum, normal_pressure_gradient, solve_laplace_dirichlet, solve_pressure,
    surface_inverse_laplacian_spectrum,
};
use crate::error::{AprioriStatus, Error, Result};
use crate::geometry::{
    directional_from_gradient, elastic_stress, jacobian_and_cofactor, row_divergence, vector_gradient, FlowMap,
    InitialDeformation,
};
use crate::grid::{Face, Grid, MatrixField, ScalarField, VectorField};
use crate::initial_data::{BoundaryPartition, InitialData};
use crate::mollifier::MollifierKernel;
use crate::slab::{Slab, Spectrum};

/// A priori thresholds on |J - 1| and |A - I|.
pub const APRIORI_BOUND: f64 = 0.125;
pub const CFL_FACTOR: f64 = 0.3;

/// Spectrum of s + H[(Lambda^2 - 1) s] where H is the harmonic extension of
/// the face values.
pub fn smooth_spectrum(slab: &Slab, kernel: &MollifierKernel, s: &Spectrum) -> Spectrum {
    let defect: Vec<f64> = kernel.spectrum.iter().map(|r| r * r - 1.0).collect();
    let b = s.face(Face::Bottom).times_real(&defect);
    let t = s.face(Face::Top).times_real(&defect);
    s.add(&harmonic_extension_spectrum(slab, &b, &t))
}

fn smooth_vector(slab: &Slab, kernel: &MollifierKernel, w: &VectorField) -> VectorField {
    let specs = slab.forward(&[&w.c[0].data, &w.c[1].data, &w.c[2].data]);
    let sm: Vec<Spectrum> = specs.iter().map(|s| smooth_spectrum(slab, kernel, s)).collect();
    let mut out = slab.inverse(&[&sm[0], &sm[1], &sm[2]]).into_iter();
    VectorField::from_components(|_| ScalarField::from_vec(slab.grid, out.next().unwrap()))
}

/// eta^kappa: same interior Laplacian as eta, boundary trace Lambda^2 eta.
pub fn smooth_flowmap(slab: &Slab, kernel: &MollifierKernel, eta: &FlowMap) -> FlowMap {
    FlowMap::from_displacement(smooth_vector(slab, kernel, &eta.disp))
}

/// The same map obtained by three full Dirichlet solves.
pub fn smooth_flowmap_by_solve(slab: &Slab, kernel: &MollifierKernel, eta: &FlowMap) -> Result<FlowMap> {
    let mut comps = Vec::with_capacity(3);
    for d in &eta.disp.c {
        let rhs = slab.laplacian(d).scale(-1.0);
        let gb = kernel.mollify_twice_boundary(slab, &d.trace(Face::Bottom));
        let gt = kernel.mollify_twice_boundary(slab, &d.trace(Face::Top));
        comps.push(solve_laplace_dirichlet(slab, &rhs, &gb, &gt)?.field);
    }
    let mut it = comps.into_iter();
    Ok(FlowMap::from_displacement(VectorField::from_components(|_| it.next().unwrap())))
}

/// d_t eta^kappa from w = v + psi: interior Laplacian of w, trace Lambda^2 w.
pub fn smoothed_time_derivative(slab: &Slab, kernel: &MollifierKernel, v: &VectorField, psi: &VectorField) -> VectorField {
    smooth_vector(slab, kernel, &v.add(psi))
}

/// Face spectra of the modification term, per component: [bottom, top].
fn modification_faces(
    slab: &Slab,
    kernel: &MollifierKernel,
    d_spec: &[Spectrum],
    v_spec: &[Spectrum],
    a_k: &MatrixField,
) -> [[Spectrum; 2]; 3] {
    let grid = slab.grid;
    let m = grid.layer_len();
    let lap = slab.lap_star_symbol();
    let rho2 = kernel.squared_spectrum();
    let dh = [slab.hmult(1, 0), slab.hmult(0, 1)];
    let mut out: [[Spectrum; 2]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| Spectrum::zeros(grid, 1)));
    for (fi, face) in Face::BOTH.into_iter().enumerate() {
        let mut specs = Vec::with_capacity(18);
        for s in d_spec {
            let l = s.face(face).times_real(&lap);
            specs.push(l.times_real(&rho2));
            specs.push(l);
        }
        for s in v_spec {
            let f = s.face(face);
            for d in &dh {
                let dv = f.times(d);
                specs.push(dv.times_real(&rho2));
                specs.push(dv);
            }
        }
        let refs: Vec<&Spectrum> = specs.iter().collect();
        let phys = slab.inverse(&refs);
        // phys[2j] = Lap* Lambda^2 d_j, phys[2j+1] = Lap* d_j,
        // phys[6 + 4i + 2a] = d_a Lambda^2 v_i, phys[6 + 4i + 2a + 1] = d_a v_i.
        let off = grid.face_layer(face) * m;
        let mut faces = Vec::with_capacity(3);
        for i in 0..3 {
            let mut b = vec![0.0; m];
            for (p, bp) in b.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..3 {
                    for a in 0..2 {
                        let aja = a_k.c[j][a].data[off + p];
                        acc += aja
                            * (phys[2 * j + 1][p] * phys[6 + 4 * i + 2 * a][p]
                                - phys[2 * j][p] * phys[6 + 4 * i + 2 * a + 1][p]);
                    }
                }
                *bp = acc;
            }
            faces.push(b);
        }
        let refs: Vec<&[f64]> = faces.iter().map(Vec::as_slice).collect();
        for (i, s) in slab.forward(&refs).into_iter().enumerate() {
            out[i][fi] = surface_inverse_laplacian_spectrum(slab, &s);
        }
    }
    out
}

fn modification_spectra(
    slab: &Slab,
    kernel: &MollifierKernel,
    d_spec: &[Spectrum],
    v_spec: &[Spectrum],
    a_k: &MatrixField,
) -> Vec<Spectrum> {
    modification_faces(slab, kernel, d_spec, v_spec, a_k)
        .iter()
        .map(|[b, t]| harmonic_extension_spectrum(slab, b, t))
        .collect()
}

/// psi^kappa: harmonic extension of the projected, inverted surface term.
pub fn modification_term(
    slab: &Slab,
    kernel: &MollifierKernel,
    eta: &FlowMap,
    v: &VectorField,
    a_k: &MatrixField,
) -> VectorField {
    let d_spec = slab.forward(&[&eta.disp.c[0].data, &eta.disp.c[1].data, &eta.disp.c[2].data]);
    let v_spec = slab.forward(&[&v.c[0].data, &v.c[1].data, &v.c[2].data]);
    let s = modification_spectra(slab, kernel, &d_spec, &v_spec, a_k);
    let mut out = slab.inverse(&[&s[0], &s[1], &s[2]]).into_iter();
    VectorField::from_components(|_| ScalarField::from_vec(slab.grid, out.next().unwrap()))
}

/// Jacobian matrix `[i][k] = D_k f_i` from spectra and physical values.
fn gradient_matrix(slab: &Slab, specs: &[Spectrum], values: &VectorField) -> MatrixField {
    let grads = slab.gradients_from_spectra(specs, &[&values.c[0], &values.c[1], &values.c[2]]);
    MatrixField::from_entries(|i, k| grads[i].c[k].clone())
}

fn vector_from_spectra(slab: &Slab, specs: &[Spectrum]) -> VectorField {
    let mut out = slab.inverse(&[&specs[0], &specs[1], &specs[2]]).into_iter();
    VectorField::from_components(|_| ScalarField::from_vec(slab.grid, out.next().unwrap()))
}

fn add_identity(m: &mut MatrixField) {
    for i in 0..3 {
        for v in m.c[i][i].data.iter_mut() {
            *v += 1.0;
        }
    }
}

/// d_t A = -A (d_t F)^T A, with dfk[m][l] = D_l d_t eta_m.
fn cofactor_rate(a: &MatrixField, dfk: &MatrixField) -> MatrixField {
    let grid = a.grid();
    MatrixField::from_nodes(grid, |idx| {
        let am = a.at(idx);
        let df = dfk.at(idx);
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = 0.0;
                for l in 0..3 {
                    for m in 0..3 {
                        s += am[i][l] * df[m][l] * am[m][j];
                    }
                }
                -s
            })
        })
    })
}

fn contract(a: &MatrixField, b: &MatrixField) -> ScalarField {
    let grid = a.grid();
    let mut out = ScalarField::zeros(grid);
    for i in 0..3 {
        for j in 0..3 {
            out.axpy(1.0, &(&a.c[i][j] * &b.c[i][j]));
        }
    }
    out
}

/// Everything one right-side evaluation produces.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// d_t eta = v + psi.
    pub deta: VectorField,
    pub dv: VectorField,
    pub ddeformation: Option<MatrixField>,
    pub eta_k: FlowMap,
    pub psi: VectorField,
    pub deta_k: VectorField,
    pub q: ScalarField,
    pub a_k: MatrixField,
    pub j_k: ScalarField,
    pub e: MatrixField,
    /// Right side G of div(E grad q) = G.
    pub g: ScalarField,
    pub force: VectorField,
    pub grad_v: MatrixField,
    pub grad_eta: MatrixField,
    pub da_k: MatrixField,
    pub status: AprioriStatus,
    pub pressure_iterations: usize,
    pub pressure_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub eta: FlowMap,
    pub v: VectorField,
    /// Independently evolved F, when tracked.
    pub deformation: Option<MatrixField>,
    pub cache: Option<Arc<Evaluation>>,
}

impl SimState {
    pub fn new(eta: FlowMap, v: VectorField) -> Self {
        Self {
            t: 0.0,
            eta,
            v,
            deformation: None,
            cache: None,
        }
    }

    pub fn equilibrium(grid: Grid) -> Self {
        Self::new(FlowMap::identity(grid), VectorField::zeros(grid))
    }

    fn advanced(&self, rates: &[(&Evaluation, f64)], dt: f64) -> SimState {
        let mut eta = self.eta.clone();
        let mut v = self.v.clone();
        let mut deformation = self.deformation.clone();
        for (k, c) in rates {
            eta.disp.axpy(*c, &k.deta);
            v.axpy(*c, &k.dv);
            if let (Some(f), Some(df)) = (deformation.as_mut(), k.ddeformation.as_ref()) {
                f.axpy(*c, df);
            }
        }
        SimState {
            t: self.t + dt,
            eta,
            v,
            deformation,
            cache: None,
        }
    }
}

/// Literal and compact forms of the pressure right side.
#[derive(Debug, Clone)]
pub struct PressureRhs {
    pub e: MatrixField,
    /// Compact form J d_tA_ij D_j v_i + J A_ij D_j f_i with the
    /// conservative force; this is what the stepper solves with.
    pub g: ScalarField,
    /// J d_tA_ij D_j v_i + [J A_ij D_j, G0^T grad](G0^T grad eta)_i.
    pub g1: ScalarField,
    /// J A_ij D_j (G0^T grad eta_i), one entry per column of G0.
    pub g2: VectorField,
    /// g1 + G0^T grad g2.
    pub g_literal: ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub status: AprioriStatus,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub disp: VectorField,
    pub v: VectorField,
    pub q: ScalarField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<EnergyRecord>,
    pub snapshots: Vec<Snapshot>,
    pub t_run: f64,
    pub steps: usize,
    pub violation: Option<Violation>,
    pub max_pressure_iterations: usize,
    /// Largest pressure residual relative to its right side over all stages.
    pub max_pressure_residual: f64,
    pub final_state: SimState,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_every: usize,
}

pub struct KappaSystem<'a> {
    pub slab: &'a Slab,
    pub kernel: MollifierKernel,
    pub g0: InitialDeformation,
    pub partition: BoundaryPartition,
    /// +1 for the physical force; flipping it is a mutation hook.
    pub force_sign: f64,
    pub track_deformation: bool,
    stress_b: MatrixField,
    g0_norm: f64,
}

impl<'a> KappaSystem<'a> {
    pub fn new(slab: &'a Slab, kernel: MollifierKernel, g0: InitialDeformation, partition: BoundaryPartition) -> Self {
        let stress_b = g0.stress_coefficient();
        let g0_norm = g0.max_norm();
        Self {
            slab,
            kernel,
            g0,
            partition,
            force_sign: 1.0,
            track_deformation: false,
            stress_b,
            g0_norm,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kernel.kappa
    }

    pub fn initial_state(&self, init: &InitialData) -> SimState {
        let grid = self.slab.grid;
        let mut st = SimState::new(FlowMap::identity(grid), init.v0.clone());
        if self.track_deformation {
            st.deformation = Some(self.g0.g0.clone());
        }
        st
    }

    pub fn cfl_bound(&self, v: &VectorField) -> f64 {
        CFL_FACTOR * self.slab.grid.h_min() / (v.max_norm() + self.g0_norm)
    }

    pub fn monitor_apriori(&self, j_k: &ScalarField, a_k: &MatrixField, q: Option<&ScalarField>) -> AprioriStatus {
        let jk_dev = j_k.data.iter().fold(0.0f64, |m, j| m.max((j - 1.0).abs()));
        let mut ak_dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let d = if i == j { 1.0 } else { 0.0 };
                for &x in &a_k.c[i][j].data {
                    ak_dev = ak_dev.max((x - d).abs());
                }
            }
        }
        let rt_margin = match q {
            Some(q) => self
                .partition
                .rt_faces()
                .into_iter()
                .map(|f| {
                    normal_pressure_gradient(self.slab, q, f)
                        .data
                        .iter()
                        .fold(f64::INFINITY, |m, &x| m.min(x))
                })
                .fold(f64::INFINITY, f64::min),
            None => f64::NAN,
        };
        let rt_ok = self.partition.rt_faces().is_empty() || rt_margin >= 0.5 * self.partition.lambda;
        AprioriStatus {
            jk_dev,
            ak_dev,
            rt_margin,
            ok: jk_dev <= APRIORI_BOUND && ak_dev <= APRIORI_BOUND && (q.is_none() || rt_ok),
        }
    }

    /// Rebuild every cached quantity and return both time derivatives.
    pub fn right_side(&self, st: &SimState) -> Result<Evaluation> {
        let slab = self.slab;
        let d = &st.eta.disp;
        let v = &st.v;
        let d_spec = slab.forward(&[&d.c[0].data, &d.c[1].data, &d.c[2].data]);
        let v_spec = slab.forward(&[&v.c[0].data, &v.c[1].data, &v.c[2].data]);

        let dk_spec: Vec<Spectrum> = d_spec.iter().map(|s| smooth_spectrum(slab, &self.kernel, s)).collect();
        let eta_k = FlowMap::from_displacement(vector_from_spectra(slab, &dk_spec));
        let mut f_k = gradient_matrix(slab, &dk_spec, &eta_k.disp);
        add_identity(&mut f_k);
        let (j_k, a_k) = jacobian_and_cofactor(&f_k)?;
        let pre = self.monitor_apriori(&j_k, &a_k, None);
        if !pre.ok {
            return Err(Error::AprioriViolation(pre));
        }

        let mut grad_eta = gradient_matrix(slab, &d_spec, d);
        add_identity(&mut grad_eta);

        let psi_spec = modification_spectra(slab, &self.kernel, &d_spec, &v_spec, &a_k);
        let psi = vector_from_spectra(slab, &psi_spec);
        let w_spec: Vec<Spectrum> = v_spec.iter().zip(&psi_spec).map(|(a, b)| a.add(b)).collect();
        let wk_spec: Vec<Spectrum> = w_spec.iter().map(|s| smooth_spectrum(slab, &self.kernel, s)).collect();
        let deta_k = vector_from_spectra(slab, &wk_spec);
        let dwk = gradient_matrix(slab, &wk_spec, &deta_k);
        let da_k = cofactor_rate(&a_k, &dwk);

        let grad_v = gradient_matrix(slab, &v_spec, v);
        let force = row_divergence(slab, &elastic_stress(&grad_eta, &self.stress_b)).scale(self.force_sign);
        let grad_f = vector_gradient(slab, &force);

        let mut g = contract(&da_k, &grad_v);
        g.axpy(1.0, &contract(&a_k, &grad_f));
        let g = &g * &j_k;
        let e = MatrixField::from_nodes(slab.grid, |idx| {
            let a = a_k.at(idx);
            let j = j_k.data[idx];
            std::array::from_fn(|r| std::array::from_fn(|s| j * (0..3).map(|i| a[i][r] * a[i][s]).sum::<f64>()))
        });
        let sol = solve_pressure(slab, &e, &g.scale(-1.0))?;
        let q = sol.field;
        let status = self.monitor_apriori(&j_k, &a_k, Some(&q));
        if !status.ok {
            return Err(Error::AprioriViolation(status));
        }
        let grad_q = slab.gradient(&q);
        let dv = VectorField::from_components(|i| {
            let mut out = force.c[i].clone();
            for k in 0..3 {
                out.axpy(-1.0, &(&a_k.c[i][k] * &grad_q.c[k]));
            }
            out
        });

        let ddeformation = match &st.deformation {
            Some(fev) => {
                let grad_w = gradient_matrix(slab, &w_spec, &v.add(&psi));
                let (_, a) = jacobian_and_cofactor(&grad_eta)?;
                Some(MatrixField::from_nodes(slab.grid, |idx| {
                    let dw = grad_w.at(idx);
                    let am = a.at(idx);
                    let f = fev.at(idx);
                    // dw . F^{-1} . F, with F^{-1} = A^T
                    std::array::from_fn(|i| {
                        std::array::from_fn(|j| {
                            let mut s = 0.0;
                            for p in 0..3 {
                                for r in 0..3 {
                                    s += dw[i][p] * am[r][p] * f[r][j];
                                }
                            }
                            s
                        })
                    })
                }))
            }
            None => None,
        };

        Ok(Evaluation {
            deta: v.add(&psi),
            dv,
            ddeformation,
            eta_k,
            psi,
            deta_k,
            q,
            a_k,
            j_k,
            e,
            g,
            force,
            grad_v,
            grad_eta,
            da_k,
            status,
            pressure_iterations: sol.iterations,
            pressure_residual: sol.residual_norm,
        })
    }

    /// Fill the cache if it is empty.
    pub fn refresh(&self, st: &mut SimState) -> Result<Arc<Evaluation>> {
        if let Some(c) = &st.cache {
            return Ok(c.clone());
        }
        let e = Arc::new(self.right_side(st)?);
        st.cache = Some(e.clone());
        Ok(e)
    }

    /// Pressure right side in both forms, from a fresh evaluation.
    pub fn pressure_rhs(&self, st: &SimState) -> Result<PressureRhs> {
        let slab = self.slab;
        let ev = self.right_side(st)?;
        let w = directional_from_gradient(&self.g0, &ev.grad_eta);
        // w.c[l][i] = (G0^T grad eta)_{l i}
        let fields: Vec<&ScalarField> = w.c.iter().flatten().collect();
        let dw = slab.gradients(&fields);
        let dw_at = |l: usize, i: usize| &dw[l * 3 + i];
        let mut nested = VectorField::zeros(slab.grid);
        let mut g2 = VectorField::zeros(slab.grid);
        for i in 0..3 {
            for l in 0..3 {
                for k in 0..3 {
                    nested.c[i].axpy(1.0, &(&self.g0.g0.c[k][l] * &dw_at(l, i).c[k]));
                }
                for j in 0..3 {
                    g2.c[l].axpy(1.0, &(&ev.a_k.c[i][j] * &dw_at(l, i).c[j]));
                }
            }
        }
        let g2 = g2.map(|c| c * &ev.j_k);
        let dn = vector_gradient(slab, &nested);
        let first = &contract(&ev.a_k, &dn) * &ev.j_k;
        let dg2 = vector_gradient(slab, &g2);
        let mut second = ScalarField::zeros(slab.grid);
        for l in 0..3 {
            for k in 0..3 {
                second.axpy(1.0, &(&self.g0.g0.c[k][l] * &dg2.c[l][k]));
            }
        }
        let mut g1 = &contract(&ev.da_k, &ev.grad_v) * &ev.j_k;
        g1.axpy(1.0, &first);
        g1.axpy(-1.0, &second);
        let g_literal = &g1 + &second;
        Ok(PressureRhs {
            e: ev.e,
            g: ev.g,
            g1,
            g2,
            g_literal,
        })
    }

    fn stage(&self, st: &SimState, stage: usize) -> Result<Arc<Evaluation>> {
        match self.right_side(st) {
            Ok(e) => Ok(Arc::new(e)),
            Err(Error::AprioriViolation(status)) => Err(Error::StepRejected { stage, status }),
            Err(e) => Err(e),
        }
    }

    /// One classical RK4 step.
    pub fn step(&self, st: &SimState, dt: f64) -> Result<SimState> {
        let bound = self.cfl_bound(&st.v);
        if dt.abs() > bound * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, bound });
        }
        let k1 = match &st.cache {
            Some(c) => c.clone(),
            None => self.stage(st, 1)?,
        };
        let k2 = self.stage(&st.advanced(&[(&k1, 0.5 * dt)], 0.5 * dt), 2)?;
        let k3 = self.stage(&st.advanced(&[(&k2, 0.5 * dt)], 0.5 * dt), 3)?;
        let k4 = self.stage(&st.advanced(&[(&k3, dt)], dt), 4)?;
        let c = dt / 6.0;
        Ok(st.advanced(&[(&k1, c), (&k2, 2.0 * c), (&k3, 2.0 * c), (&k4, c)], dt))
    }

    /// Step to `t_final`, recording diagnostics every `snapshot_every` steps.
    /// Leaving the a priori regime ends the run early and is reported, not
    /// raised.
    pub fn run(&self, init: &InitialData, opts: RunOptions) -> Result<Trajectory> {
        let nsteps = (opts.t_final / opts.dt).round() as usize;
        let every = opts.snapshot_every.max(1);
        let mut st = self.initial_state(init);
        let mut records = Vec::new();
        let mut snapshots = Vec::new();
        let mut violation = None;
        let mut max_iters = 0usize;
        let mut max_res = 0.0f64;
        let mut reference = None;
        let mut steps = 0;
        loop {
            let ev = match self.refresh(&mut st) {
                Ok(ev) => ev,
                Err(Error::AprioriViolation(status)) => {
                    violation = Some(Violation { t: st.t, status });
                    break;
                }
                Err(e) => return Err(e),
            };
            max_iters = max_iters.max(ev.pressure_iterations);
            let g_norm = ev.g.l2_interior();
            if g_norm > 0.0 {
                max_res = max_res.max(ev.pressure_residual / g_norm);
            }
            if steps % every == 0 || steps == nsteps {
                let rec = diagnostics::energy_record(self, &st, &ev, &mut reference);
                records.push(rec);
                snapshots.push(Snapshot {
                    t: st.t,
                    disp: st.eta.disp.clone(),
                    v: st.v.clone(),
                    q: ev.q.clone(),
                });
            }
            if steps == nsteps {
                break;
            }
            match self.step(&st, opts.dt) {
                Ok(mut next) => {
                    next.t = (steps + 1) as f64 * opts.dt;
                    st = next;
                    steps += 1;
                }
                Err(Error::StepRejected { status, .. }) => {
                    violation = Some(Violation { t: st.t, status });
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Trajectory {
            records,
            snapshots,
            t_run: st.t,
            steps,
            violation,
            max_pressure_iterations: max_iters,
            max_pressure_residual: max_res,
            final_state: st,
        })
    }
}
