//! Dirichlet Laplace solves per horizontal mode, the variable-coefficient
//! pressure problem, and surface operators on the faces.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{BoundaryScalarField, Face, MatrixField, ScalarField, VectorField};
use crate::slab::{Slab, Spectrum, C64};

pub const TAU_ELL: f64 = 1e-10;
pub const MAX_ITER: usize = 500;
pub const SPD_FLOOR: f64 = 0.3;
const EPS_FLOOR: f64 = 1e-30;
const RESTART: usize = 40;

#[derive(Debug, Clone)]
pub struct EllipticSolution<T> {
    pub field: T,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Dense inverse with partial pivoting (Gauss-Jordan).
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .expect("nonempty");
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p != 0.0, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Per-mode factorizations of (|k|^2 - d3 d3) with Dirichlet faces.
#[derive(Debug, Clone)]
pub struct LaplaceTable {
    class_of_mode: Vec<usize>,
    /// Row-major inverse of the interior block, one per distinct |k|^2.
    inverses: Vec<Vec<f64>>,
    /// Harmonic profiles over all n3 + 1 nodes (value 1 on their own face).
    bottom: Vec<Vec<f64>>,
    top: Vec<Vec<f64>>,
}

impl LaplaceTable {
    pub fn build(slab: &Slab) -> Self {
        let n3 = slab.grid.n3;
        let ni = n3 - 1;
        let dd = slab.d3d3_op().to_dense();
        let mut classes: HashMap<u64, usize> = HashMap::new();
        let mut mus = Vec::new();
        let class_of_mode = slab
            .lap_h_symbol()
            .iter()
            .map(|&l| {
                let mu = -l;
                *classes.entry(mu.to_bits()).or_insert_with(|| {
                    mus.push(mu);
                    mus.len() - 1
                })
            })
            .collect();
        let mut inverses = Vec::with_capacity(mus.len());
        let mut bottom = Vec::with_capacity(mus.len());
        let mut top = Vec::with_capacity(mus.len());
        for mu in mus {
            let block: Vec<Vec<f64>> = (1..n3)
                .map(|i| {
                    (1..n3)
                        .map(|j| if i == j { mu - dd[i][j] } else { -dd[i][j] })
                        .collect()
                })
                .collect();
            let inv = invert(&block);
            let profile = |face_col: usize| {
                let mut p = vec![0.0; n3 + 1];
                p[face_col] = 1.0;
                for i in 0..ni {
                    p[i + 1] = (0..ni).map(|j| inv[i][j] * dd[j + 1][face_col]).sum();
                }
                p
            };
            bottom.push(profile(0));
            top.push(profile(n3));
            inverses.push(inv.into_iter().flatten().collect());
        }
        Self {
            class_of_mode,
            inverses,
            bottom,
            top,
        }
    }

    pub fn classes(&self) -> usize {
        self.inverses.len()
    }
}

/// Spectral Dirichlet solve of -Lap u = rhs with face data.
pub fn laplace_spectrum(
    slab: &Slab,
    rhs: &Spectrum,
    bottom: Option<&Spectrum>,
    top: Option<&Spectrum>,
) -> Spectrum {
    let g = slab.grid;
    let (n3, m) = (g.n3, g.layer_len());
    let ni = n3 - 1;
    let table = slab.laplace_table();
    let mut out = Spectrum::zeros(g, g.layers());
    let mut col = vec![C64::default(); ni];
    for p in 0..m {
        let c = table.class_of_mode[p];
        let inv = &table.inverses[c];
        for (i, v) in col.iter_mut().enumerate() {
            *v = rhs.data[(i + 1) * m + p];
        }
        for i in 0..ni {
            let row = &inv[i * ni..(i + 1) * ni];
            let mut acc = C64::default();
            for (a, v) in row.iter().zip(&col) {
                acc += v * *a;
            }
            out.data[(i + 1) * m + p] = acc;
        }
        if let Some(b) = bottom {
            let gb = b.data[p];
            for (l, w) in table.bottom[c].iter().enumerate() {
                out.data[l * m + p] += gb * *w;
            }
        }
        if let Some(t) = top {
            let gt = t.data[p];
            for (l, w) in table.top[c].iter().enumerate() {
                out.data[l * m + p] += gt * *w;
            }
        }
    }
    out
}

/// Harmonic extension of face spectra, as a 3D spectrum.
pub fn harmonic_extension_spectrum(slab: &Slab, bottom: &Spectrum, top: &Spectrum) -> Spectrum {
    let g = slab.grid;
    let m = g.layer_len();
    let table = slab.laplace_table();
    let mut out = Spectrum::zeros(g, g.layers());
    for p in 0..m {
        let c = table.class_of_mode[p];
        let (gb, gt) = (bottom.data[p], top.data[p]);
        for l in 0..g.layers() {
            out.data[l * m + p] = gb * table.bottom[c][l] + gt * table.top[c][l];
        }
    }
    out
}

pub fn harmonic_extension(slab: &Slab, bottom: &BoundaryScalarField, top: &BoundaryScalarField) -> ScalarField {
    let s = harmonic_extension_spectrum(slab, &slab.face_spectrum(bottom), &slab.face_spectrum(top));
    ScalarField::from_vec(slab.grid, slab.inverse_one(&s))
}

fn dirichlet_residual(slab: &Slab, u: &ScalarField, rhs: &ScalarField) -> f64 {
    let mut r = slab.laplacian(u);
    r.axpy(1.0, rhs);
    r.l2_interior()
}

/// Solve -Lap u = rhs in the slab with u = g on the faces.
pub fn solve_laplace_dirichlet(
    slab: &Slab,
    rhs: &ScalarField,
    g_bottom: &BoundaryScalarField,
    g_top: &BoundaryScalarField,
) -> Result<EllipticSolution<ScalarField>> {
    let s = laplace_spectrum(
        slab,
        &slab.forward_one(&rhs.data),
        Some(&slab.face_spectrum(g_bottom)),
        Some(&slab.face_spectrum(g_top)),
    );
    let field = ScalarField::from_vec(slab.grid, slab.inverse_one(&s));
    let residual_norm = dirichlet_residual(slab, &field, rhs);
    let scale = rhs.l2_interior() + g_bottom.l2() + g_top.l2() + EPS_FLOOR;
    if residual_norm > TAU_ELL * scale {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual: residual_norm / scale,
        });
    }
    Ok(EllipticSolution {
        field,
        residual_norm,
        iterations: 1,
    })
}

pub fn solve_laplace_dirichlet_vector(
    slab: &Slab,
    rhs: &VectorField,
    g_bottom: &[BoundaryScalarField; 3],
    g_top: &[BoundaryScalarField; 3],
) -> Result<EllipticSolution<VectorField>> {
    let mut comps = Vec::with_capacity(3);
    let mut residual_norm: f64 = 0.0;
    for i in 0..3 {
        let s = solve_laplace_dirichlet(slab, &rhs.c[i], &g_bottom[i], &g_top[i])?;
        residual_norm = residual_norm.max(s.residual_norm);
        comps.push(s.field);
    }
    let mut it = comps.into_iter();
    Ok(EllipticSolution {
        field: VectorField::from_components(|_| it.next().unwrap()),
        residual_norm,
        iterations: 1,
    })
}

/// Eigenvalues of a symmetric 3x3 matrix in ascending order.
pub fn sym3_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut e = [a[0][0], a[1][1], a[2][2]];
        e.sort_by(f64::total_cmp);
        return e;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: [[f64; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p));
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e3, e2, e1]
}

pub fn min_eigenvalue(e: &MatrixField) -> f64 {
    (0..e.grid().len())
        .map(|idx| sym3_eigenvalues(&e.at(idx))[0])
        .fold(f64::INFINITY, f64::min)
}

/// Apply -D_j(E_jk D_k q), given the spectrum of q; face rows are zero.
fn pressure_apply(slab: &Slab, e: &MatrixField, q_spec: &Spectrum) -> Vec<f64> {
    let g = slab.grid;
    let m = g.layer_len();
    let d1 = q_spec.times(&slab.hmult(1, 0));
    let d2 = q_spec.times(&slab.hmult(0, 1));
    let phys = slab.inverse(&[&d1, &d2, q_spec]);
    let d3 = slab.vertical_op(1).apply(&phys[2], m);
    let grad = [&phys[0], &phys[1], &d3];
    let flux: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            (0..g.len())
                .map(|n| (0..3).map(|k| e.c[j][k].data[n] * grad[k][n]).sum())
                .collect()
        })
        .collect();
    let fs = slab.forward(&[&flux[0], &flux[1]]);
    let div_h = fs[0].times(&slab.hmult(1, 0)).add(&fs[1].times(&slab.hmult(0, 1)));
    let mut out = slab.inverse_one(&div_h);
    let d3f = slab.vertical_op(1).apply(&flux[2], m);
    for (o, v) in out.iter_mut().zip(d3f) {
        *o = -(*o + v);
    }
    zero_faces(&mut out, m);
    out
}

fn interior_norm(slab: &Slab, v: &[f64]) -> f64 {
    let g = slab.grid;
    let m = g.layer_len();
    let s: f64 = v[m..g.n3 * m].iter().map(|x| x * x).sum();
    (s * g.h1() * g.h2() * g.h3()).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero-data preconditioner: spectrum of (-Lap)^{-1} w.
fn precondition(slab: &Slab, w: &[f64]) -> Spectrum {
    laplace_spectrum(slab, &slab.forward_one(w), None, None)
}

fn zero_faces(data: &mut [f64], m: usize) {
    let n = data.len();
    data[..m].fill(0.0);
    data[n - m..].fill(0.0);
}

/// Solve -div(E grad q) = rhs with q = 0 on both faces.
///
/// Restarted GMRES, right-preconditioned by the constant-coefficient
/// Dirichlet solve.
pub fn solve_pressure(slab: &Slab, e: &MatrixField, rhs: &ScalarField) -> Result<EllipticSolution<ScalarField>> {
    let g = slab.grid;
    let m = g.layer_len();
    let min_eig = min_eigenvalue(e);
    if min_eig < SPD_FLOOR {
        return Err(Error::NotSpd { min_eig });
    }
    let mut b = rhs.data.clone();
    zero_faces(&mut b, m);
    let b_norm = interior_norm(slab, &b);
    if b_norm == 0.0 {
        return Ok(EllipticSolution {
            field: ScalarField::zeros(g),
            residual_norm: 0.0,
            iterations: 0,
        });
    }
    let tol = TAU_ELL * (b_norm + EPS_FLOOR);
    let mut q_spec = Spectrum::zeros(g, g.layers());
    let mut r = b.clone();
    let mut iterations = 0;
    loop {
        let beta = interior_norm(slab, &r);
        if beta <= tol {
            break;
        }
        if iterations >= MAX_ITER {
            return Err(Error::NoConvergence {
                iterations,
                residual: beta / b_norm,
            });
        }
        let scale = 1.0 / dot(&r, &r).sqrt();
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|x| x * scale).collect()];
        let mut z: Vec<Spectrum> = Vec::new();
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut gvec = vec![dot(&r, &r).sqrt()];
        let beta_euclid = gvec[0];
        for j in 0..RESTART {
            let zj = precondition(slab, &basis[j]);
            let mut w = pressure_apply(slab, e, &zj);
            z.push(zj);
            let mut hj = vec![0.0; j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(&w, vi);
                hj[i] = hij;
                for (a, b) in w.iter_mut().zip(vi) {
                    *a -= hij * b;
                }
            }
            let wn = dot(&w, &w).sqrt();
            hj[j + 1] = wn;
            for i in 0..j {
                let t = cs[i] * hj[i] + sn[i] * hj[i + 1];
                hj[i + 1] = -sn[i] * hj[i] + cs[i] * hj[i + 1];
                hj[i] = t;
            }
            let denom = (hj[j] * hj[j] + hj[j + 1] * hj[j + 1]).sqrt();
            let (c, s) = (hj[j] / denom, hj[j + 1] / denom);
            cs.push(c);
            sn.push(s);
            hj[j] = denom;
            hj[j + 1] = 0.0;
            gvec.push(-s * gvec[j]);
            gvec[j] *= c;
            h.push(hj);
            iterations += 1;
            let est = gvec[j + 1].abs() / beta_euclid * beta;
            if est <= 0.5 * tol || wn == 0.0 || iterations >= MAX_ITER {
                break;
            }
            basis.push(w.iter().map(|x| x / wn).collect());
        }
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|l| h[l][i] * y[l]).sum();
            y[i] = (gvec[i] - s) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            q_spec.axpy(*yi, zi);
        }
        let lq = pressure_apply(slab, e, &q_spec);
        r = b.iter().zip(&lq).map(|(x, y)| x - y).collect();
    }
    let mut field = ScalarField::from_vec(g, slab.inverse_one(&q_spec));
    zero_faces(&mut field.data, m);
    let residual_norm = interior_norm(slab, &r);
    Ok(EllipticSolution {
        field,
        residual_norm,
        iterations,
    })
}

/// Apply the pressure operator to a physical field (for residual checks).
pub fn pressure_operator(slab: &Slab, e: &MatrixField, q: &ScalarField) -> ScalarField {
    ScalarField::from_vec(slab.grid, pressure_apply(slab, e, &slab.forward_one(&q.data)))
}

/// f minus its mean over the face.
pub fn mean_zero_project(f: &BoundaryScalarField) -> BoundaryScalarField {
    let mean = f.mean();
    f.map(|x| x - mean)
}

/// Spectral form: mean removed, then divided by -|k|^2.
pub fn surface_inverse_laplacian_spectrum(slab: &Slab, s: &Spectrum) -> Spectrum {
    let mult: Vec<f64> = slab
        .lap_star_symbol()
        .into_iter()
        .map(|l| if l == 0.0 { 0.0 } else { 1.0 / l })
        .collect();
    s.times_real(&mult)
}

pub fn surface_inverse_laplacian(slab: &Slab, f: &BoundaryScalarField) -> BoundaryScalarField {
    let s = surface_inverse_laplacian_spectrum(slab, &slab.face_spectrum(f));
    slab.face_from_spectrum(&s, f.face)
}

pub fn surface_laplacian(slab: &Slab, f: &BoundaryScalarField) -> BoundaryScalarField {
    let s = slab.face_spectrum(f).times_real(&slab.lap_star_symbol());
    slab.face_from_spectrum(&s, f.face)
}

/// Outward normal derivative -grad q . N on a face, with a one-sided stencil.
pub fn normal_pressure_gradient(slab: &Slab, q: &ScalarField, face: Face) -> BoundaryScalarField {
    let g = slab.grid;
    let m = g.layer_len();
    let layer = g.face_layer(face);
    let row = &slab.vertical_op(1).rows[layer];
    let mut data = vec![0.0; m];
    for &(j, c) in row {
        for (d, v) in data.iter_mut().zip(q.layer(j)) {
            *d += c * v;
        }
    }
    let sign = -face.normal_sign();
    BoundaryScalarField {
        grid: g,
        face,
        data: data.into_iter().map(|x| sign * x).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn symmetric_eigenvalues_of_known_matrix() {
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let e = sym3_eigenvalues(&a);
        for (x, y) in e.iter().zip([1.0, 3.0, 5.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = vec![vec![4.0, 1.0, 2.0], vec![1.0, 0.0, 3.0], vec![2.0, 5.0, 1.0]];
        let inv = invert(&a);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let slab = Slab::new(Grid::cube(8).unwrap());
        let z = ScalarField::zeros(slab.grid);
        let b = BoundaryScalarField::zeros(slab.grid, Face::Bottom);
        let t = BoundaryScalarField::zeros(slab.grid, Face::Top);
        let s = solve_laplace_dirichlet(&slab, &z, &b, &t).unwrap();
        assert_eq!(s.field.max_abs(), 0.0);
    }
}
