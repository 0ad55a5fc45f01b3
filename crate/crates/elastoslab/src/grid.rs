use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Sample layout of T^2 x [0, 1] with unit horizontal period.
///
/// Storage is layer-major: `idx = (i3 * n2 + i2) * n1 + i1`, with `n3 + 1`
/// layers so both faces carry nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Grid {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Result<Self> {
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two >= 8"
                )));
            }
        }
        if n3 < 8 {
            return Err(Error::InvalidGrid(format!("n3 = {n3} must be >= 8")));
        }
        Ok(Self { n1, n2, n3 })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn h1(&self) -> f64 {
        1.0 / self.n1 as f64
    }
    pub fn h2(&self) -> f64 {
        1.0 / self.n2 as f64
    }
    pub fn h3(&self) -> f64 {
        1.0 / self.n3 as f64
    }
    pub fn h_min(&self) -> f64 {
        self.h1().min(self.h2()).min(self.h3())
    }

    pub fn layers(&self) -> usize {
        self.n3 + 1
    }
    pub fn layer_len(&self) -> usize {
        self.n1 * self.n2
    }
    pub fn len(&self) -> usize {
        self.layer_len() * self.layers()
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn idx(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i3 * self.n2 + i2) * self.n1 + i1
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let i1 = idx % self.n1;
        let i2 = (idx / self.n1) % self.n2;
        let i3 = idx / self.layer_len();
        [
            i1 as f64 * self.h1(),
            i2 as f64 * self.h2(),
            i3 as f64 * self.h3(),
        ]
    }

    pub fn face_layer(&self, face: Face) -> usize {
        match face {
            Face::Bottom => 0,
            Face::Top => self.n3,
        }
    }

    /// Trapezoid weights in x3 (the horizontal weight h1*h2 is not included).
    pub fn vertical_weights(&self) -> Vec<f64> {
        let h = self.h3();
        (0..self.layers())
            .map(|i| if i == 0 || i == self.n3 { 0.5 * h } else { h })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Bottom,
    Top,
}

impl Face {
    pub const BOTH: [Face; 2] = [Face::Bottom, Face::Top];

    /// Third component of the outward unit normal.
    pub fn normal_sign(self) -> f64 {
        match self {
            Face::Bottom => -1.0,
            Face::Top => 1.0,
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Face::Bottom => "bottom",
            Face::Top => "top",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            data: vec![c; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len(), "field length does not match grid");
        Self { grid, data }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let data = (0..grid.len())
            .map(|i| {
                let [x1, x2, x3] = grid.coords(i);
                f(x1, x2, x3)
            })
            .collect();
        Self { grid, data }
    }

    pub fn layer(&self, i3: usize) -> &[f64] {
        let m = self.grid.layer_len();
        &self.data[i3 * m..(i3 + 1) * m]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, &xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Discrete L2 norm: exact horizontal sum, trapezoid in x3.
    pub fn l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let g = self.grid;
        let w = g.vertical_weights();
        let hh = g.h1() * g.h2();
        let m = g.layer_len();
        let mut s = 0.0;
        for (i3, wz) in w.iter().enumerate() {
            let a = &self.data[i3 * m..(i3 + 1) * m];
            let b = &other.data[i3 * m..(i3 + 1) * m];
            s += wz * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        }
        s * hh
    }

    /// L2 norm over the interior layers only (faces excluded).
    pub fn l2_interior(&self) -> f64 {
        let g = self.grid;
        let m = g.layer_len();
        let s: f64 = self.data[m..g.n3 * m].iter().map(|x| x * x).sum();
        (s * g.h1() * g.h2() * g.h3()).sqrt()
    }

    pub fn trace(&self, face: Face) -> BoundaryScalarField {
        BoundaryScalarField {
            grid: self.grid,
            face,
            data: self.layer(self.grid.face_layer(face)).to_vec(),
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub c: [ScalarField; 3],
}

impl VectorField {
    pub fn new(c: [ScalarField; 3]) -> Self {
        assert!(c[0].grid == c[1].grid && c[1].grid == c[2].grid);
        Self { c }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_components(|_| ScalarField::zeros(grid))
    }

    pub fn from_components(f: impl FnMut(usize) -> ScalarField) -> Self {
        Self::new(std::array::from_fn(f))
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.len() {
            let [x1, x2, x3] = grid.coords(i);
            let v = f(x1, x2, x3);
            for k in 0..3 {
                out.c[k].data[i] = v[k];
            }
        }
        out
    }

    pub fn grid(&self) -> Grid {
        self.c[0].grid
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::from_components(|i| f(&self.c[i]))
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|c| c.scale(a))
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for k in 0..3 {
            self.c[k].axpy(a, &x.c[k]);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_components(|i| &self.c[i] + &other.c[i])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_components(|i| &self.c[i] - &other.c[i])
    }

    /// Sqrt of the sum of component L2 norms squared.
    pub fn l2(&self) -> f64 {
        self.c.iter().map(|c| c.dot(c)).sum::<f64>().sqrt()
    }

    /// Largest pointwise Euclidean length.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid().len())
            .map(|i| self.c.iter().map(|c| c.data[i] * c.data[i]).sum::<f64>())
            .fold(0.0f64, f64::max)
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }

    pub fn trace(&self, face: Face) -> BoundaryVectorField {
        BoundaryVectorField {
            c: std::array::from_fn(|i| self.c[i].trace(face)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    pub c: [[ScalarField; 3]; 3],
}

impl MatrixField {
    pub fn from_entries(mut f: impl FnMut(usize, usize) -> ScalarField) -> Self {
        Self {
            c: std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))),
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_entries(|_, _| ScalarField::zeros(grid))
    }

    pub fn identity(grid: Grid) -> Self {
        Self::constant(grid, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn constant(grid: Grid, m: [[f64; 3]; 3]) -> Self {
        Self::from_entries(|i, j| ScalarField::constant(grid, m[i][j]))
    }

    pub fn grid(&self) -> Grid {
        self.c[0][0].grid
    }

    /// Matrix at one node.
    pub fn at(&self, idx: usize) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.c[i][j].data[idx]))
    }

    pub fn set(&mut self, idx: usize, m: &[[f64; 3]; 3]) {
        for i in 0..3 {
            for j in 0..3 {
                self.c[i][j].data[idx] = m[i][j];
            }
        }
    }

    /// Build a matrix field node by node.
    pub fn from_nodes(grid: Grid, f: impl Fn(usize) -> [[f64; 3]; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            out.set(idx, &f(idx));
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_entries(|i, j| self.c[j][i].clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_entries(|i, j| &self.c[i][j] - &other.c[i][j])
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.c[i][j].axpy(a, &x.c[i][j]);
            }
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_entries(|i, j| self.c[i][j].scale(a))
    }

    pub fn row(&self, i: usize) -> VectorField {
        VectorField::from_components(|j| self.c[i][j].clone())
    }

    /// Sqrt of the sum of entry L2 norms squared.
    pub fn l2(&self) -> f64 {
        self.c
            .iter()
            .flatten()
            .map(|c| c.dot(c))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .flatten()
            .map(ScalarField::max_abs)
            .fold(0.0, f64::max)
    }
}

/// A function on one face of the slab.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScalarField {
    pub grid: Grid,
    pub face: Face,
    pub data: Vec<f64>,
}

impl BoundaryScalarField {
    pub fn zeros(grid: Grid, face: Face) -> Self {
        Self {
            grid,
            face,
            data: vec![0.0; grid.layer_len()],
        }
    }

    pub fn from_fn(grid: Grid, face: Face, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = (0..grid.layer_len())
            .map(|i| {
                let [x1, x2, _] = grid.coords(i);
                f(x1, x2)
            })
            .collect();
        Self { grid, face, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            face: self.face,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            face: self.face,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn l2(&self) -> f64 {
        (self.data.iter().map(|x| x * x).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVectorField {
    pub c: [BoundaryScalarField; 3],
}

impl BoundaryVectorField {
    pub fn zeros(grid: Grid, face: Face) -> Self {
        Self {
            c: std::array::from_fn(|_| BoundaryScalarField::zeros(grid, face)),
        }
    }
}
