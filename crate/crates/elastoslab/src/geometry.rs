//! Flow-map kinematics and the elastic force.

use crate::error::{Error, Result};
use crate::grid::{Grid, MatrixField, ScalarField, VectorField};
use crate::slab::Slab;

/// Nodewise determinant floor below which a map counts as singular.
pub const EPS_J: f64 = 1e-8;

pub type Mat3 = [[f64; 3]; 3];

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cofactor matrix: cof_ij = (-1)^(i+j) minor_ij, so that cof = det * m^{-T}.
pub fn cofactor3(m: &Mat3) -> Mat3 {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
            let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        })
    })
}

pub fn matmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// eta = Id + displacement; the displacement is horizontally periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub disp: VectorField,
}

impl FlowMap {
    pub fn identity(grid: Grid) -> Self {
        Self {
            disp: VectorField::zeros(grid),
        }
    }

    pub fn from_displacement(disp: VectorField) -> Self {
        Self { disp }
    }

    pub fn grid(&self) -> Grid {
        self.disp.grid()
    }

    /// Node positions eta(x).
    pub fn positions(&self) -> VectorField {
        let g = self.grid();
        let mut out = self.disp.clone();
        for idx in 0..g.len() {
            let x = g.coords(idx);
            for (i, xi) in x.iter().enumerate() {
                out.c[i].data[idx] += xi;
            }
        }
        out
    }
}

/// Initial deformation tensor G0 with entries `g0.c[k][l] = G0_kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDeformation {
    pub g0: MatrixField,
}

impl InitialDeformation {
    pub fn grid(&self) -> Grid {
        self.g0.grid()
    }

    /// B_ml = G0_mk G0_lk.
    pub fn stress_coefficient(&self) -> MatrixField {
        let g = &self.g0;
        MatrixField::from_entries(|m, l| {
            let mut b = ScalarField::zeros(g.grid());
            for k in 0..3 {
                b.axpy(1.0, &(&g.c[m][k] * &g.c[l][k]));
            }
            b
        })
    }

    /// Largest spectral norm of G0 over the nodes.
    pub fn max_norm(&self) -> f64 {
        let b = self.stress_coefficient();
        (0..self.grid().len())
            .map(|idx| crate::elliptic::sym3_eigenvalues(&b.at(idx))[2].max(0.0))
            .fold(0.0, f64::max)
            .sqrt()
    }
}

/// Jacobian matrix of a vector field: `[i][k] = D_k v_i`.
pub fn vector_gradient(slab: &Slab, v: &VectorField) -> MatrixField {
    let grads = slab.gradients(&[&v.c[0], &v.c[1], &v.c[2]]);
    MatrixField::from_entries(|i, k| grads[i].c[k].clone())
}

/// F_ij = delta_ij + D_j d_i.
pub fn deformation_gradient(slab: &Slab, eta: &FlowMap) -> MatrixField {
    let mut f = vector_gradient(slab, &eta.disp);
    for i in 0..3 {
        for v in f.c[i][i].data.iter_mut() {
            *v += 1.0;
        }
    }
    f
}

/// J = det F and A = F^{-T}.
pub fn jacobian_and_cofactor(f: &MatrixField) -> Result<(ScalarField, MatrixField)> {
    let g = f.grid();
    let mut j = ScalarField::zeros(g);
    let mut a = MatrixField::zeros(g);
    let mut min_det = f64::INFINITY;
    for idx in 0..g.len() {
        let m = f.at(idx);
        let d = det3(&m);
        min_det = min_det.min(d);
        j.data[idx] = d;
        let c = cofactor3(&m);
        a.set(idx, &std::array::from_fn(|r| std::array::from_fn(|s| c[r][s] / d)));
    }
    if !(min_det > EPS_J) {
        return Err(Error::SingularMap { min_det });
    }
    Ok((j, a))
}

/// Divergence of each row: out_i = D_l M_il.
pub fn row_divergence(slab: &Slab, m: &MatrixField) -> VectorField {
    let specs = slab.forward(&[
        &m.c[0][0].data,
        &m.c[0][1].data,
        &m.c[1][0].data,
        &m.c[1][1].data,
        &m.c[2][0].data,
        &m.c[2][1].data,
    ]);
    let (m1, m2) = (slab.hmult(1, 0), slab.hmult(0, 1));
    let sums: Vec<_> = (0..3)
        .map(|i| specs[2 * i].times(&m1).add(&specs[2 * i + 1].times(&m2)))
        .collect();
    let mut phys = slab.inverse(&[&sums[0], &sums[1], &sums[2]]).into_iter();
    VectorField::from_components(|i| {
        let mut f = ScalarField::from_vec(slab.grid, phys.next().unwrap());
        f.axpy(1.0, &slab.d3(&m.c[i][2]));
        f
    })
}

/// max_i || D_j (J A_ij) ||_0.
pub fn piola_residual(slab: &Slab, eta: &FlowMap) -> Result<f64> {
    let f = deformation_gradient(slab, eta);
    let (j, a) = jacobian_and_cofactor(&f)?;
    let ja = MatrixField::from_entries(|r, s| &j * &a.c[r][s]);
    let div = row_divergence(slab, &ja);
    Ok(div.c.iter().map(ScalarField::l2).fold(0.0, f64::max))
}

/// (G0^T grad f)_i = G0_ki D_k f.
pub fn directional_scalar(slab: &Slab, g0: &InitialDeformation, f: &ScalarField) -> VectorField {
    let grad = slab.gradient(f);
    VectorField::from_components(|i| {
        let mut out = ScalarField::zeros(slab.grid);
        for k in 0..3 {
            out.axpy(1.0, &(&g0.g0.c[k][i] * &grad.c[k]));
        }
        out
    })
}

/// W_ij = G0_ki * grad[j][k], where grad[j][k] = D_k f_j.
pub fn directional_from_gradient(g0: &InitialDeformation, grad: &MatrixField) -> MatrixField {
    MatrixField::from_entries(|i, j| {
        let mut out = ScalarField::zeros(grad.grid());
        for k in 0..3 {
            out.axpy(1.0, &(&g0.g0.c[k][i] * &grad.c[j][k]));
        }
        out
    })
}

/// (G0^T grad f)_ij = G0_ki D_k f_j for a periodic vector field.
pub fn directional_vector(slab: &Slab, g0: &InitialDeformation, f: &VectorField) -> MatrixField {
    directional_from_gradient(g0, &vector_gradient(slab, f))
}

/// (G0^T grad eta)_ij including the identity part.
pub fn directional_flowmap(slab: &Slab, g0: &InitialDeformation, eta: &FlowMap) -> MatrixField {
    directional_from_gradient(g0, &deformation_gradient(slab, eta))
}

/// Stress S_il = F_im B_ml.
pub fn elastic_stress(f: &MatrixField, b: &MatrixField) -> MatrixField {
    MatrixField::from_entries(|i, l| {
        let mut out = ScalarField::zeros(f.grid());
        for m in 0..3 {
            out.axpy(1.0, &(&f.c[i][m] * &b.c[m][l]));
        }
        out
    })
}

/// f_i = D_l (D_m eta_i G0_mk G0_lk).
pub fn elastic_force(slab: &Slab, g0: &InitialDeformation, eta: &FlowMap) -> VectorField {
    let f = deformation_gradient(slab, eta);
    row_divergence(slab, &elastic_stress(&f, &g0.stress_coefficient()))
}

/// F = grad(eta) G0.
pub fn deformation_from_flowmap(f: &MatrixField, g0: &InitialDeformation) -> MatrixField {
    let g = f.grid();
    MatrixField::from_nodes(g, |idx| matmul3(&f.at(idx), &g0.g0.at(idx)))
}

/// (grad_A f)_i = A_ik D_k f.
pub fn a_gradient_scalar(slab: &Slab, a: &MatrixField, f: &ScalarField) -> VectorField {
    let grad = slab.gradient(f);
    VectorField::from_components(|i| {
        let mut out = ScalarField::zeros(slab.grid);
        for k in 0..3 {
            out.axpy(1.0, &(&a.c[i][k] * &grad.c[k]));
        }
        out
    })
}

/// (grad_A v)_ij = A_jk D_k v_i.
pub fn a_gradient_vector(slab: &Slab, a: &MatrixField, v: &VectorField) -> MatrixField {
    let dv = vector_gradient(slab, v);
    MatrixField::from_entries(|i, j| {
        let mut out = ScalarField::zeros(slab.grid);
        for k in 0..3 {
            out.axpy(1.0, &(&a.c[j][k] * &dv.c[i][k]));
        }
        out
    })
}

/// A_ij dv[i][j], with dv[i][j] = D_j v_i.
pub fn a_divergence_from_gradient(a: &MatrixField, dv: &MatrixField) -> ScalarField {
    let g = a.grid();
    let mut out = ScalarField::zeros(g);
    for idx in 0..g.len() {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += a.c[i][j].data[idx] * dv.c[i][j].data[idx];
            }
        }
        out.data[idx] = s;
    }
    out
}

pub fn a_divergence(slab: &Slab, a: &MatrixField, v: &VectorField) -> ScalarField {
    a_divergence_from_gradient(a, &vector_gradient(slab, v))
}

/// (curl_A g)_i = eps_ijl A_jm dg[l][m].
pub fn a_curl_from_gradient(a: &MatrixField, dg: &MatrixField) -> VectorField {
    let g = a.grid();
    let mut out = VectorField::zeros(g);
    for idx in 0..g.len() {
        let mut d = [[0.0; 3]; 3];
        for (j, dj) in d.iter_mut().enumerate() {
            for (l, djl) in dj.iter_mut().enumerate() {
                *djl = (0..3).map(|m| a.c[j][m].data[idx] * dg.c[l][m].data[idx]).sum();
            }
        }
        out.c[0].data[idx] = d[1][2] - d[2][1];
        out.c[1].data[idx] = d[2][0] - d[0][2];
        out.c[2].data[idx] = d[0][1] - d[1][0];
    }
    out
}

pub fn a_curl(slab: &Slab, a: &MatrixField, v: &VectorField) -> VectorField {
    a_curl_from_gradient(a, &vector_gradient(slab, v))
}

/// Rank-3 field stored as 27 components, index `(i * 3 + j) * 3 + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank3Field {
    pub c: Vec<ScalarField>,
}

impl Rank3Field {
    pub fn get(&self, i: usize, j: usize, k: usize) -> &ScalarField {
        &self.c[(i * 3 + j) * 3 + k]
    }
}

/// (curl G)_ijk = D_i G_kj - D_j G_ki.
pub fn matrix_curl(slab: &Slab, g: &MatrixField) -> Rank3Field {
    let fields: Vec<&ScalarField> = g.c.iter().flatten().collect();
    let grads = slab.gradients(&fields);
    let d = |a: usize, b: usize, dir: usize| &grads[a * 3 + b].c[dir];
    let mut c = Vec::with_capacity(27);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c.push(d(k, j, i) - d(k, i, j));
            }
        }
    }
    Rank3Field { c }
}
