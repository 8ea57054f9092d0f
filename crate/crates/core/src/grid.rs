//! Uniform periodic-style grid on the cube [-L, L)^3 with the origin on a node.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return argument(format!("half width must be positive, got {half_width}"));
        }
        if n < 4 || n % 2 != 0 {
            return argument(format!("points per axis must be even and >= 4, got {n}"));
        }
        Ok(Self { half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.n;
        let j = (idx / self.n) % self.n;
        (idx / (self.n * self.n), j, k)
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |idx| self.point(idx))
    }

    /// Squared distance to the origin in units of h^2 (always an integer).
    pub fn radius2_units(&self, idx: usize) -> usize {
        let (i, j, k) = self.unravel(idx);
        let c = (self.n / 2) as i64;
        let d = |a: usize| {
            let x = a as i64 - c;
            (x * x) as usize
        };
        d(i) + d(j) + d(k)
    }

    /// Index offset of the origin node.
    pub fn origin_index(&self) -> usize {
        let c = self.n / 2;
        self.index(c, c, c)
    }

    /// Twice the extent, twice the points; this grid sits at offset `n/2`.
    pub fn padded(&self) -> Grid {
        Grid { half_width: 2.0 * self.half_width, n: 2 * self.n }
    }

    /// Half width of the symmetric cube covered by the cells of nodes 1..n-1.
    pub fn inner_half_width(&self) -> f64 {
        self.half_width - 0.5 * self.spacing()
    }

    /// True for nodes whose cells tile the symmetric inner cube.
    pub fn in_inner_cube(&self, idx: usize) -> bool {
        let (i, j, k) = self.unravel(idx);
        i > 0 && j > 0 && k > 0
    }

    pub fn embed_in_padded(&self, f: &[f64]) -> Vec<f64> {
        let p = self.padded();
        let off = self.n / 2;
        let mut out = vec![0.0; p.len()];
        for i in 0..self.n {
            for j in 0..self.n {
                let src = self.index(i, j, 0);
                let dst = p.index(i + off, j + off, off);
                out[dst..dst + self.n].copy_from_slice(&f[src..src + self.n]);
            }
        }
        out
    }

    pub fn restrict_from_padded(&self, f: &[f64]) -> Vec<f64> {
        let p = self.padded();
        let off = self.n / 2;
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n {
            for j in 0..self.n {
                let dst = self.index(i, j, 0);
                let src = p.index(i + off, j + off, off);
                out[dst..dst + self.n].copy_from_slice(&f[src..src + self.n]);
            }
        }
        out
    }

    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        self.points().map(f).collect()
    }

    pub fn sample_vector<F: Fn([f64; 3]) -> [f64; 3]>(&self, f: F) -> [Vec<f64>; 3] {
        let mut out = [vec![0.0; self.len()], vec![0.0; self.len()], vec![0.0; self.len()]];
        for idx in 0..self.len() {
            let v = f(self.point(idx));
            for c in 0..3 {
                out[c][idx] = v[c];
            }
        }
        out
    }

    /// Trapezoidal (periodic) quadrature of samples.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_volume()
    }
}
