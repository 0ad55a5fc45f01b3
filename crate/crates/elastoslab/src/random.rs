//! Seeded band-limited random fields for studies and initial data.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{BoundaryScalarField, Face, Grid, ScalarField, VectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Horizontal modes with 0 < |k| <= kmax, one of each +/- pair.
fn half_plane_modes(kmax: usize) -> Vec<(i64, i64)> {
    let km = kmax as i64;
    let mut out = Vec::new();
    for k2 in -km..=km {
        for k1 in -km..=km {
            if k1 * k1 + k2 * k2 > km * km || (k1, k2) == (0, 0) {
                continue;
            }
            if k2 > 0 || (k2 == 0 && k1 > 0) {
                out.push((k1, k2));
            }
        }
    }
    out
}

/// Random trigonometric polynomial on T^2 with |k| <= kmax (and a mean).
pub struct HorizontalPattern {
    terms: Vec<(f64, f64, f64, f64)>,
    mean: f64,
}

impl HorizontalPattern {
    pub fn random(rng: &mut impl Rng, kmax: usize) -> Self {
        let terms = half_plane_modes(kmax)
            .into_iter()
            .map(|(k1, k2)| {
                (
                    2.0 * PI * k1 as f64,
                    2.0 * PI * k2 as f64,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        Self {
            terms,
            mean: rng.gen_range(-1.0..1.0),
        }
    }

    pub fn without_mean(mut self) -> Self {
        self.mean = 0.0;
        self
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.mean
            + self
                .terms
                .iter()
                .map(|&(w1, w2, a, b)| {
                    let ph = w1 * x1 + w2 * x2;
                    a * ph.cos() + b * ph.sin()
                })
                .sum::<f64>()
    }
}

/// Sum over vertical modes m < nz of pattern_m(x1, x2) * cos(m pi x3 + phase_m).
pub fn band_limited_scalar(grid: Grid, rng: &mut impl Rng, kmax: usize, nz: usize) -> ScalarField {
    let layers: Vec<(HorizontalPattern, f64)> = (0..nz)
        .map(|_| (HorizontalPattern::random(rng, kmax), rng.gen_range(0.0..PI)))
        .collect();
    ScalarField::from_fn(grid, |x1, x2, x3| {
        layers
            .iter()
            .enumerate()
            .map(|(m, (p, ph))| p.eval(x1, x2) * (m as f64 * PI * x3 + ph).cos())
            .sum()
    })
}

pub fn band_limited_vector(grid: Grid, rng: &mut impl Rng, kmax: usize, nz: usize) -> VectorField {
    VectorField::from_components(|_| band_limited_scalar(grid, rng, kmax, nz))
}

pub fn band_limited_boundary(grid: Grid, face: Face, rng: &mut impl Rng, kmax: usize) -> BoundaryScalarField {
    let p = HorizontalPattern::random(rng, kmax);
    BoundaryScalarField::from_fn(grid, face, |x1, x2| p.eval(x1, x2))
}
