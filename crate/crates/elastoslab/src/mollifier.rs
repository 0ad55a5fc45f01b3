//! Horizontal convolution by layers with a dilated bump kernel.

use crate::error::{Error, Result};
use crate::grid::{BoundaryScalarField, Grid, ScalarField, VectorField};
use crate::slab::{Slab, Spectrum};

/// exp(-1/(1 - r^2)) on r < 1, zero outside. Not normalized.
pub fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct MollifierKernel {
    pub kappa: f64,
    pub grid: Grid,
    /// rho_kappa on the horizontal grid, centred at the origin with wrap-around.
    pub samples: Vec<f64>,
    /// Discrete Fourier transform of the samples times h1*h2 (real).
    pub spectrum: Vec<f64>,
}

fn wrapped_offset(i: usize, n: usize) -> f64 {
    let j = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
    j / n as f64
}

impl MollifierKernel {
    /// Kernel with a caller-chosen resolvability floor of `floor_cells`
    /// horizontal cells; used where a finer floor than the standard one is
    /// chosen deliberately.
    pub fn with_floor(kappa: f64, slab: &Slab, floor_cells: f64) -> Result<Self> {
        let grid = slab.grid;
        if !(kappa > 0.0 && kappa < 0.25) {
            return Err(Error::InvalidKappa(kappa));
        }
        let floor = floor_cells * grid.h1().max(grid.h2());
        if kappa < floor {
            return Err(Error::KernelUnresolved { kappa, floor });
        }
        let (n1, n2) = (grid.n1, grid.n2);
        let mut samples = vec![0.0; grid.layer_len()];
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                let (x, y) = (wrapped_offset(i1, n1), wrapped_offset(i2, n2));
                samples[i2 * n1 + i1] = bump((x * x + y * y).sqrt() / kappa);
            }
        }
        let hh = grid.h1() * grid.h2();
        let mass: f64 = samples.iter().sum::<f64>() * hh;
        for s in samples.iter_mut() {
            *s /= mass;
        }
        let spec = slab.forward_one(&samples);
        let spectrum = spec.data.iter().map(|z| z.re * hh).collect();
        Ok(Self {
            kappa,
            grid,
            samples,
            spectrum,
        })
    }

    /// Standard kernel; requires kappa >= 2 max(h1, h2).
    pub fn new(kappa: f64, slab: &Slab) -> Result<Self> {
        Self::with_floor(kappa, slab, 2.0)
    }

    pub fn mass(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.grid.h1() * self.grid.h2()
    }

    pub fn squared_spectrum(&self) -> Vec<f64> {
        self.spectrum.iter().map(|r| r * r).collect()
    }

    pub fn mollify_spectrum(&self, s: &Spectrum) -> Spectrum {
        s.times_real(&self.spectrum)
    }

    pub fn mollify(&self, slab: &Slab, f: &ScalarField) -> ScalarField {
        let s = self.mollify_spectrum(&slab.forward_one(&f.data));
        ScalarField::from_vec(f.grid, slab.inverse_one(&s))
    }

    pub fn mollify_vector(&self, slab: &Slab, v: &VectorField) -> VectorField {
        let specs = slab.forward(&[&v.c[0].data, &v.c[1].data, &v.c[2].data]);
        let sm: Vec<Spectrum> = specs.iter().map(|s| self.mollify_spectrum(s)).collect();
        let mut out = slab.inverse(&[&sm[0], &sm[1], &sm[2]]).into_iter();
        VectorField::from_components(|_| ScalarField::from_vec(v.grid(), out.next().unwrap()))
    }

    pub fn mollify_boundary(&self, slab: &Slab, f: &BoundaryScalarField) -> BoundaryScalarField {
        let s = self.mollify_spectrum(&slab.face_spectrum(f));
        slab.face_from_spectrum(&s, f.face)
    }

    /// Lambda_kappa^2 on a face.
    pub fn mollify_twice_boundary(&self, slab: &Slab, f: &BoundaryScalarField) -> BoundaryScalarField {
        let s = slab.face_spectrum(f).times_real(&self.squared_spectrum());
        slab.face_from_spectrum(&s, f.face)
    }

    /// Direct wrap-around convolution on one layer; cross-checks the
    /// spectral path.
    pub fn convolve_direct(&self, layer: &[f64]) -> Vec<f64> {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let hh = self.grid.h1() * self.grid.h2();
        let support: Vec<(usize, usize, f64)> = (0..n2)
            .flat_map(|j2| (0..n1).map(move |j1| (j1, j2)))
            .filter_map(|(j1, j2)| {
                let w = self.samples[j2 * n1 + j1];
                (w != 0.0).then_some((j1, j2, w * hh))
            })
            .collect();
        let mut out = vec![0.0; layer.len()];
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                let mut acc = 0.0;
                for &(j1, j2, w) in &support {
                    let y1 = (i1 + n1 - j1) % n1;
                    let y2 = (i2 + n2 - j2) % n2;
                    acc += w * layer[y2 * n1 + y1];
                }
                out[i2 * n1 + i1] = acc;
            }
        }
        out
    }

    pub fn mollify_direct(&self, f: &ScalarField) -> ScalarField {
        let m = f.grid.layer_len();
        let mut data = Vec::with_capacity(f.data.len());
        for layer in f.data.chunks_exact(m) {
            data.extend(self.convolve_direct(layer));
        }
        ScalarField::from_vec(f.grid, data)
    }

    /// Largest |rho_hat| over the grid modes.
    pub fn spectrum_max_abs(&self) -> f64 {
        self.spectrum.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// [Lambda_kappa, h] g = Lambda_kappa(h g) - h Lambda_kappa g on a face.
pub fn commutator(
    slab: &Slab,
    kernel: &MollifierKernel,
    h: &BoundaryScalarField,
    g: &BoundaryScalarField,
) -> BoundaryScalarField {
    let hg = h.zip_map(g, |a, b| a * b);
    let lhg = kernel.mollify_boundary(slab, &hg);
    let lg = kernel.mollify_boundary(slab, g);
    lhg.zip_map(&lg.zip_map(h, |a, b| a * b), |a, b| a - b)
}

/// Continuous Fourier transform of the unit-mass rho_kappa at angular
/// frequency `omega`, by radial quadrature. Independent of any grid.
pub fn continuous_spectrum(kappa: f64, omega: f64) -> f64 {
    // rho_hat(omega) = (2 pi / M) int_0^1 bump(r) J0(omega kappa r) r dr,
    // M = 2 pi int_0^1 bump(r) r dr.
    let n = 4000;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let r = (i as f64 + 0.5) / n as f64;
        let w = bump(r) * r;
        num += w * bessel_j0(omega * kappa * r);
        den += w;
    }
    num / den
}

/// J0 via (1/pi) int_0^pi cos(x sin t) dt; the trapezoid rule is spectrally
/// accurate for this periodic integrand.
fn bessel_j0(x: f64) -> f64 {
    let n = 256 + (x.abs() as usize) * 4;
    let h = std::f64::consts::PI / n as f64;
    let s: f64 = (0..n).map(|i| (x * (i as f64 * h).sin()).cos()).sum();
    s / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_matches_known_values() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-13);
        assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-12);
    }

    #[test]
    fn unresolved_kernel_is_rejected() {
        let slab = Slab::new(Grid::new(16, 16, 8).unwrap());
        assert!(matches!(
            MollifierKernel::new(0.1, &slab),
            Err(Error::KernelUnresolved { .. })
        ));
        assert!(matches!(MollifierKernel::new(0.3, &slab), Err(Error::InvalidKappa(_))));
    }
}
