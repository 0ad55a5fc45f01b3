//! Operator context for the slab: horizontal Fourier transforms, vertical
//! stencils, derivatives and Sobolev norms.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::elliptic::LaplaceTable;
use crate::grid::{BoundaryScalarField, Face, Grid, ScalarField, VectorField};
use crate::stencil::VerticalOp;

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Horizontal DFT of a real field, layer by layer, in FFT index order.
///
/// The number of layers is implied by the data length, so face spectra use
/// the same type with a single layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Grid,
    pub data: Vec<C64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid, layers: usize) -> Self {
        Self {
            grid,
            data: vec![C64::default(); grid.layer_len() * layers],
        }
    }

    pub fn layers(&self) -> usize {
        self.data.len() / self.grid.layer_len()
    }

    pub fn layer(&self, i3: usize) -> &[C64] {
        let m = self.grid.layer_len();
        &self.data[i3 * m..(i3 + 1) * m]
    }

    pub fn layer_spectrum(&self, i3: usize) -> Spectrum {
        Spectrum {
            grid: self.grid,
            data: self.layer(i3).to_vec(),
        }
    }

    pub fn face(&self, face: Face) -> Spectrum {
        self.layer_spectrum(self.grid.face_layer(face))
    }

    /// Multiply every layer by a per-mode complex multiplier.
    pub fn times(&self, m: &[C64]) -> Spectrum {
        let n = m.len();
        Spectrum {
            grid: self.grid,
            data: self
                .data
                .iter()
                .enumerate()
                .map(|(i, z)| z * m[i % n])
                .collect(),
        }
    }

    pub fn times_real(&self, m: &[f64]) -> Spectrum {
        let n = m.len();
        Spectrum {
            grid: self.grid,
            data: self
                .data
                .iter()
                .enumerate()
                .map(|(i, z)| z * m[i % n])
                .collect(),
        }
    }

    pub fn add(&self, other: &Spectrum) -> Spectrum {
        Spectrum {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, x: &Spectrum) {
        for (y, v) in self.data.iter_mut().zip(&x.data) {
            *y += v * a;
        }
    }
}

/// Shared discretization context. Immutable after construction apart from
/// lazily built solver tables.
pub struct Slab {
    pub grid: Grid,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers 2 pi k per horizontal mode, and Nyquist flags.
    kx: Vec<f64>,
    ky: Vec<f64>,
    nyq_x: Vec<bool>,
    nyq_y: Vec<bool>,
    d_v: [VerticalOp; 4],
    d3d3: VerticalOp,
    laplace: OnceLock<LaplaceTable>,
}

impl std::fmt::Debug for Slab {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Slab").field("grid", &self.grid).finish()
    }
}

fn signed_wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Slab {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let (n1, n2) = (grid.n1, grid.n2);
        let mut kx = Vec::with_capacity(grid.layer_len());
        let mut ky = Vec::with_capacity(grid.layer_len());
        let mut nyq_x = Vec::with_capacity(grid.layer_len());
        let mut nyq_y = Vec::with_capacity(grid.layer_len());
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                kx.push(2.0 * PI * signed_wavenumber(i1, n1) as f64);
                ky.push(2.0 * PI * signed_wavenumber(i2, n2) as f64);
                nyq_x.push(i1 == n1 / 2);
                nyq_y.push(i2 == n2 / 2);
            }
        }
        let d_v = std::array::from_fn(|m| VerticalOp::derivative(grid.n3, m + 1));
        let d3d3 = d_v[0].compose(&d_v[0]);
        Self {
            grid,
            row_fwd: planner.plan_fft_forward(n1),
            row_inv: planner.plan_fft_inverse(n1),
            col_fwd: planner.plan_fft_forward(n2),
            col_inv: planner.plan_fft_inverse(n2),
            kx,
            ky,
            nyq_x,
            nyq_y,
            d_v,
            d3d3,
            laplace: OnceLock::new(),
        }
    }

    pub fn laplace_table(&self) -> &LaplaceTable {
        self.laplace.get_or_init(|| LaplaceTable::build(self))
    }

    /// Vertical operator for the given derivative order (direct stencil).
    pub fn vertical_op(&self, order: usize) -> &VerticalOp {
        &self.d_v[order - 1]
    }

    /// First vertical derivative applied twice.
    pub fn d3d3_op(&self) -> &VerticalOp {
        &self.d3d3
    }

    pub fn wavenumbers(&self) -> (&[f64], &[f64]) {
        (&self.kx, &self.ky)
    }

    /// |k|^2 in angular units with Nyquist entries kept.
    pub fn k_squared(&self) -> Vec<f64> {
        self.kx.iter().zip(&self.ky).map(|(a, b)| a * a + b * b).collect()
    }

    /// Fourier symbol of d1^a1 d2^a2; odd powers vanish at Nyquist.
    pub fn hmult(&self, a1: usize, a2: usize) -> Vec<C64> {
        (0..self.grid.layer_len())
            .map(|p| {
                let f1 = if a1 % 2 == 1 && self.nyq_x[p] {
                    C64::default()
                } else {
                    (I * self.kx[p]).powu(a1 as u32)
                };
                let f2 = if a2 % 2 == 1 && self.nyq_y[p] {
                    C64::default()
                } else {
                    (I * self.ky[p]).powu(a2 as u32)
                };
                f1 * f2
            })
            .collect()
    }

    /// Symbol of the horizontal Laplacian built as d1 d1 + d2 d2.
    pub fn lap_h_symbol(&self) -> Vec<f64> {
        (0..self.grid.layer_len())
            .map(|p| {
                let a = if self.nyq_x[p] { 0.0 } else { self.kx[p] * self.kx[p] };
                let b = if self.nyq_y[p] { 0.0 } else { self.ky[p] * self.ky[p] };
                -(a + b)
            })
            .collect()
    }

    /// Symbol of the surface Laplacian, -|k|^2.
    pub fn lap_star_symbol(&self) -> Vec<f64> {
        self.k_squared().into_iter().map(|k| -k).collect()
    }

    fn fft2(&self, buf: &mut [C64], inverse: bool) {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let m = n1 * n2;
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let mut scratch = vec![
            C64::default();
            row.get_inplace_scratch_len().max(col.get_inplace_scratch_len())
        ];
        let mut tr = vec![C64::default(); m];
        let scale = 1.0 / m as f64;
        for layer in buf.chunks_exact_mut(m) {
            row.process_with_scratch(layer, &mut scratch);
            for i2 in 0..n2 {
                for i1 in 0..n1 {
                    tr[i1 * n2 + i2] = layer[i2 * n1 + i1];
                }
            }
            col.process_with_scratch(&mut tr, &mut scratch);
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    layer[i2 * n1 + i1] = tr[i1 * n2 + i2];
                }
            }
            if inverse {
                for z in layer.iter_mut() {
                    *z *= scale;
                }
            }
        }
    }

    /// Forward transforms of real layer-major arrays, two per complex FFT.
    pub fn forward(&self, fields: &[&[f64]]) -> Vec<Spectrum> {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let m = n1 * n2;
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let a = pair[0];
            let mut z: Vec<C64> = match pair.get(1) {
                Some(b) => a.iter().zip(b.iter()).map(|(&x, &y)| C64::new(x, y)).collect(),
                None => a.iter().map(|&x| C64::new(x, 0.0)).collect(),
            };
            self.fft2(&mut z, false);
            if pair.len() == 1 {
                out.push(Spectrum { grid: self.grid, data: z });
                continue;
            }
            let mut sa = vec![C64::default(); z.len()];
            let mut sb = vec![C64::default(); z.len()];
            for (l, zl) in z.chunks_exact(m).enumerate() {
                for i2 in 0..n2 {
                    let j2 = (n2 - i2) % n2;
                    for i1 in 0..n1 {
                        let j1 = (n1 - i1) % n1;
                        let zk = zl[i2 * n1 + i1];
                        let zm = zl[j2 * n1 + j1].conj();
                        sa[l * m + i2 * n1 + i1] = (zk + zm) * 0.5;
                        sb[l * m + i2 * n1 + i1] = (zk - zm) * C64::new(0.0, -0.5);
                    }
                }
            }
            out.push(Spectrum { grid: self.grid, data: sa });
            out.push(Spectrum { grid: self.grid, data: sb });
        }
        out
    }

    pub fn forward_one(&self, f: &[f64]) -> Spectrum {
        self.forward(&[f]).pop().expect("one spectrum")
    }

    /// Inverse transforms of spectra of real fields, two per complex FFT.
    pub fn inverse(&self, specs: &[&Spectrum]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(specs.len());
        for pair in specs.chunks(2) {
            let mut z: Vec<C64> = match pair.get(1) {
                Some(b) => pair[0]
                    .data
                    .iter()
                    .zip(&b.data)
                    .map(|(x, y)| x + I * y)
                    .collect(),
                None => pair[0].data.clone(),
            };
            self.fft2(&mut z, true);
            out.push(z.iter().map(|c| c.re).collect());
            if pair.len() == 2 {
                out.push(z.iter().map(|c| c.im).collect());
            }
        }
        out
    }

    pub fn inverse_one(&self, s: &Spectrum) -> Vec<f64> {
        self.inverse(&[s]).pop().expect("one field")
    }

    /// Vertical derivative of a spectrum, applied layer-wise.
    pub fn d3_spectrum(&self, s: &Spectrum) -> Spectrum {
        Spectrum {
            grid: self.grid,
            data: self.d_v[0].apply(&s.data, self.grid.layer_len()),
        }
    }

    fn scalar(&self, data: Vec<f64>) -> ScalarField {
        ScalarField::from_vec(self.grid, data)
    }

    pub fn tangential_derivative(&self, f: &ScalarField, axis: usize, order: usize) -> ScalarField {
        assert!(axis == 1 || axis == 2, "tangential axis must be 1 or 2");
        let m = if axis == 1 { self.hmult(order, 0) } else { self.hmult(0, order) };
        let s = self.forward_one(&f.data).times(&m);
        self.scalar(self.inverse_one(&s))
    }

    /// Mixed tangential derivative d1^a1 d2^a2.
    pub fn tangential_mixed(&self, f: &ScalarField, a1: usize, a2: usize) -> ScalarField {
        let s = self.forward_one(&f.data).times(&self.hmult(a1, a2));
        self.scalar(self.inverse_one(&s))
    }

    pub fn vertical_derivative(&self, f: &ScalarField, order: usize) -> ScalarField {
        assert!((1..=4).contains(&order), "vertical derivative order must be 1..=4");
        self.scalar(self.d_v[order - 1].apply(&f.data, self.grid.layer_len()))
    }

    pub fn d3(&self, f: &ScalarField) -> ScalarField {
        self.vertical_derivative(f, 1)
    }

    /// Gradients of many scalar fields, batching the transforms.
    pub fn gradients(&self, fields: &[&ScalarField]) -> Vec<VectorField> {
        let raw: Vec<&[f64]> = fields.iter().map(|f| f.data.as_slice()).collect();
        let specs = self.forward(&raw);
        self.gradients_from_spectra(&specs, fields)
    }

    /// Gradients given the spectra and the physical values of the fields.
    pub fn gradients_from_spectra(
        &self,
        specs: &[Spectrum],
        fields: &[&ScalarField],
    ) -> Vec<VectorField> {
        let m1 = self.hmult(1, 0);
        let m2 = self.hmult(0, 1);
        let hs: Vec<Spectrum> = specs
            .iter()
            .flat_map(|s| [s.times(&m1), s.times(&m2)])
            .collect();
        let refs: Vec<&Spectrum> = hs.iter().collect();
        let mut phys = self.inverse(&refs).into_iter();
        fields
            .iter()
            .map(|f| {
                let a = phys.next().expect("d1");
                let b = phys.next().expect("d2");
                VectorField::new([self.scalar(a), self.scalar(b), self.d3(f)])
            })
            .collect()
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        self.gradients(&[f]).pop().expect("one gradient")
    }

    pub fn divergence(&self, v: &VectorField) -> ScalarField {
        let specs = self.forward(&[&v.c[0].data, &v.c[1].data]);
        let s = specs[0].times(&self.hmult(1, 0)).add(&specs[1].times(&self.hmult(0, 1)));
        let mut out = self.scalar(self.inverse_one(&s));
        out.axpy(1.0, &self.d3(&v.c[2]));
        out
    }

    /// Laplacian as the divergence of the gradient (d_j d_j).
    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let s = self.forward_one(&f.data).times_real(&self.lap_h_symbol());
        let mut out = self.scalar(self.inverse_one(&s));
        let dd = self.d3d3.apply(&f.data, self.grid.layer_len());
        for (o, v) in out.data.iter_mut().zip(dd) {
            *o += v;
        }
        out
    }

    /// Weight sum over a1 + a2 <= r of |symbol of d1^a1 d2^a2|^2.
    fn horizontal_weight(&self, r: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.layer_len()];
        for a1 in 0..=r {
            for a2 in 0..=(r - a1) {
                for (wp, m) in w.iter_mut().zip(self.hmult(a1, a2)) {
                    *wp += m.norm_sqr();
                }
            }
        }
        w
    }

    /// Sum of squared H^s norms of several fields.
    pub fn sobolev_norm_sq_many(&self, fields: &[&ScalarField], s: usize) -> f64 {
        assert!(s <= 4, "Sobolev order must be at most 4");
        let g = self.grid;
        let m = g.layer_len();
        let vw = g.vertical_weights();
        let norm = 1.0 / (m as f64 * m as f64);
        let weights: Vec<Vec<f64>> = (0..=s).map(|r| self.horizontal_weight(r)).collect();
        let mut total = 0.0;
        for f in fields {
            let derivs: Vec<Vec<f64>> = (0..=s)
                .map(|a3| {
                    if a3 == 0 {
                        f.data.clone()
                    } else {
                        self.d_v[a3 - 1].apply(&f.data, m)
                    }
                })
                .collect();
            let refs: Vec<&[f64]> = derivs.iter().map(Vec::as_slice).collect();
            for (a3, spec) in self.forward(&refs).iter().enumerate() {
                let w = &weights[s - a3];
                for (l, wz) in vw.iter().enumerate() {
                    let layer = spec.layer(l);
                    let acc: f64 = layer.iter().zip(w).map(|(z, wk)| z.norm_sqr() * wk).sum();
                    total += wz * acc * norm;
                }
            }
        }
        total
    }

    /// (sum over |a| <= s of ||D^a f||_0^2)^(1/2), horizontal sums exact,
    /// trapezoid in x3.
    pub fn sobolev_norm(&self, f: &ScalarField, s: usize) -> f64 {
        self.sobolev_norm_sq_many(&[f], s).sqrt()
    }

    pub fn sobolev_norm_vector(&self, v: &VectorField, s: usize) -> f64 {
        self.sobolev_norm_sq_many(&[&v.c[0], &v.c[1], &v.c[2]], s).sqrt()
    }

    pub fn face_spectrum(&self, f: &BoundaryScalarField) -> Spectrum {
        self.forward_one(&f.data)
    }

    pub fn face_from_spectrum(&self, s: &Spectrum, face: Face) -> BoundaryScalarField {
        BoundaryScalarField {
            grid: self.grid,
            face,
            data: self.inverse_one(s),
        }
    }

    /// |f|_s = || (1 + |k|^2)^(s/2) f^ ||, normalized so |c|_s = |c|.
    pub fn boundary_norm(&self, f: &BoundaryScalarField, s: f64) -> f64 {
        self.boundary_norm_of_spectrum(&self.face_spectrum(f), s)
    }

    pub fn boundary_norm_of_spectrum(&self, spec: &Spectrum, s: f64) -> f64 {
        let m = self.grid.layer_len() as f64;
        let sum: f64 = spec
            .data
            .iter()
            .zip(self.k_squared())
            .map(|(z, k2)| (1.0 + k2).powf(s) * z.norm_sqr())
            .sum();
        (sum / (m * m)).sqrt()
    }

    /// Tangential derivative d1^a1 d2^a2 of a face function.
    pub fn boundary_derivative(&self, f: &BoundaryScalarField, a1: usize, a2: usize) -> BoundaryScalarField {
        let s = self.face_spectrum(f).times(&self.hmult(a1, a2));
        self.face_from_spectrum(&s, f.face)
    }

    pub fn trace(&self, f: &ScalarField, face: Face) -> BoundaryScalarField {
        f.trace(face)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab(n: usize) -> Slab {
        Slab::new(Grid::cube(n).unwrap())
    }

    #[test]
    fn cosine_derivative_is_exact() {
        let s = slab(16);
        let f = ScalarField::from_fn(s.grid, |x, _, _| (2.0 * PI * x).cos());
        let d = s.tangential_derivative(&f, 1, 1);
        let e = ScalarField::from_fn(s.grid, |x, _, _| -2.0 * PI * (2.0 * PI * x).sin());
        assert!((&d - &e).max_abs() < 1e-12);
    }

    #[test]
    fn paired_transform_round_trip() {
        let s = slab(8);
        let a = ScalarField::from_fn(s.grid, |x, y, z| (x * 7.0 + y * 3.0 + z).sin());
        let b = ScalarField::from_fn(s.grid, |x, y, z| (x * 2.0 - y + z * z).cos());
        let specs = s.forward(&[&a.data, &b.data]);
        let single = s.forward_one(&b.data);
        for (u, w) in specs[1].data.iter().zip(&single.data) {
            assert!((u - w).norm() < 1e-11);
        }
        let back = s.inverse(&[&specs[0], &specs[1]]);
        for (u, w) in back[0].iter().zip(&a.data) {
            assert!((u - w).abs() < 1e-13);
        }
        for (u, w) in back[1].iter().zip(&b.data) {
            assert!((u - w).abs() < 1e-13);
        }
    }

    #[test]
    fn unit_constant_has_unit_norm() {
        let s = slab(8);
        let f = ScalarField::constant(s.grid, 1.0);
        for k in 0..=4 {
            assert!((s.sobolev_norm(&f, k) - 1.0).abs() < 1e-13);
        }
    }
}
