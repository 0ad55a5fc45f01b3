//! Finite-difference operators along x3 on the nodes `0, h, ..., 1`.

use std::ops::{AddAssign, Mul};

/// Fornberg's recursion: weights `w[m][j]` so that `sum_j w[m][j] f(x_j)`
/// approximates the m-th derivative at `x0`.
pub fn fornberg_weights(x0: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Sparse linear operator on a column of `n3 + 1` vertical nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalOp {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl VerticalOp {
    /// Fourth-order stencil for the derivative of the given order (1..=4).
    ///
    /// Centered where it fits; near the faces a one-sided window of
    /// `order + 4` nodes anchored at the face.
    pub fn derivative(n3: usize, order: usize) -> Self {
        assert!((1..=4).contains(&order), "vertical derivative order must be 1..=4");
        let h = 1.0 / n3 as f64;
        let half = if order <= 2 { 2 } else { 3 };
        let width = order + 4;
        assert!(n3 + 1 >= width, "too few vertical nodes for the stencil");
        let rows = (0..=n3)
            .map(|i| {
                let (lo, hi) = if i >= half && i + half <= n3 {
                    (i - half, i + half)
                } else if i < half {
                    (0, width - 1)
                } else {
                    (n3 + 1 - width, n3)
                };
                let nodes: Vec<f64> = (lo..=hi).map(|j| (j as f64 - i as f64) * h).collect();
                let w = fornberg_weights(0.0, &nodes, order);
                (lo..=hi)
                    .zip(&w[order])
                    .filter(|(_, &c)| c != 0.0)
                    .map(|(j, &c)| (j, c))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn identity(n3: usize) -> Self {
        Self {
            rows: (0..=n3).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &Self) -> Self {
        let n = self.len();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(k, a) in row {
                    for &(j, b) in &other.rows[k] {
                        dense[j] += a * b;
                    }
                }
                dense
                    .into_iter()
                    .enumerate()
                    .filter(|(_, c)| *c != 0.0)
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0.0; n];
                for &(j, c) in row {
                    d[j] += c;
                }
                d
            })
            .collect()
    }

    /// Apply along x3 to layer-major data with `block` entries per layer.
    pub fn apply<T>(&self, data: &[T], block: usize) -> Vec<T>
    where
        T: Copy + Default + AddAssign + Mul<f64, Output = T>,
    {
        let mut out = vec![T::default(); data.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let dst = &mut out[i * block..(i + 1) * block];
            for &(j, c) in row {
                let src = &data[j * block..(j + 1) * block];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s * c;
                }
            }
        }
        out
    }

    /// Apply to a single column.
    pub fn apply_column(&self, col: &[f64]) -> Vec<f64> {
        self.apply(col, 1)
    }
}
