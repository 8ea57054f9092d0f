//! Three-dimensional FFT plumbing and Fourier multipliers on a [`Grid`].
//!
//! Odd-order derivatives zero the Nyquist wavenumber so that gradients of
//! real fields stay real and `div grad` inverts exactly on resolved modes.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Wavenumbers in FFT order.
    k: Vec<f64>,
    /// Same with the Nyquist entry zeroed (used for odd derivatives).
    k_odd: Vec<f64>,
}

pub type Vec3Field = [Vec<f64>; 3];

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = std::f64::consts::PI / grid.half_width;
        let k: Vec<f64> = (0..n)
            .map(|m| {
                let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                m * base
            })
            .collect();
        let mut k_odd = k.clone();
        k_odd[n / 2] = 0.0;
        Self { grid, forward, inverse, k, k_odd }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumber(&self, m: usize) -> f64 {
        self.k[m]
    }

    fn transform(&self, data: &mut [Complex64], fwd: bool) {
        let n = self.grid.n;
        let plan = if fwd { &self.forward } else { &self.inverse };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis: contiguous rows
        for row in data.chunks_mut(n) {
            plan.process_with_scratch(row, &mut scratch);
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        // middle axis
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    line[j] = data[(i * n + j) * n + k];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for j in 0..n {
                    data[(i * n + j) * n + k] = line[j];
                }
            }
        }
        // first axis
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    line[i] = data[(i * n + j) * n + k];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n {
                    data[(i * n + j) * n + k] = line[i];
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut c, true);
        c
    }

    pub fn inverse(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut c, false);
        let scale = 1.0 / self.grid.len() as f64;
        c.into_iter().map(|z| z.re * scale).collect()
    }

    /// Wave vector of a flat spectral index (odd-derivative convention).
    #[inline]
    pub fn wave_vector(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.grid.unravel(idx);
        [self.k_odd[i], self.k_odd[j], self.k_odd[k]]
    }

    /// Wave vector including Nyquist entries (even-derivative convention).
    #[inline]
    pub fn wave_vector_full(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.grid.unravel(idx);
        [self.k[i], self.k[j], self.k[k]]
    }

    pub fn apply<M: Fn([f64; 3]) -> f64>(&self, f: &[f64], multiplier: M) -> Vec<f64> {
        let mut c = self.forward(f);
        for (idx, z) in c.iter_mut().enumerate() {
            *z *= multiplier(self.wave_vector(idx));
        }
        self.inverse(c)
    }

    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let mut c = self.forward(f);
        for (idx, z) in c.iter_mut().enumerate() {
            let kv = self.wave_vector(idx);
            *z *= Complex64::new(0.0, kv[axis]);
        }
        self.inverse(c)
    }

    pub fn gradient(&self, f: &[f64]) -> Vec3Field {
        let c = self.forward(f);
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(3);
        for axis in 0..3 {
            let d: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(idx, z)| z * Complex64::new(0.0, self.wave_vector(idx)[axis]))
                .collect();
            out.push(self.inverse(d));
        }
        [out.remove(0), out.remove(0), out.remove(0)]
    }

    pub fn divergence(&self, v: &Vec3Field) -> Vec<f64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for axis in 0..3 {
            let c = self.forward(&v[axis]);
            for (idx, z) in c.into_iter().enumerate() {
                acc[idx] += z * Complex64::new(0.0, self.wave_vector(idx)[axis]);
            }
        }
        self.inverse(acc)
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut c = self.forward(f);
        for (idx, z) in c.iter_mut().enumerate() {
            let kv = self.wave_vector_full(idx);
            *z *= -(kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]);
        }
        self.inverse(c)
    }

    /// Solves `-Δ_odd φ = f` with zero mean, where `Δ_odd = div grad` in the
    /// odd-derivative convention.
    pub fn inverse_laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, |kv| {
            let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if k2 > 0.0 {
                1.0 / k2
            } else {
                0.0
            }
        })
    }

    /// Helmholtz-Leray projection onto (discretely) divergence-free fields.
    pub fn leray_project(&self, v: &Vec3Field) -> Vec3Field {
        let c: Vec<Vec<Complex64>> = v.iter().map(|f| self.forward(f)).collect();
        let mut out: Vec<Vec<Complex64>> = c.clone();
        for idx in 0..self.grid.len() {
            let kv = self.wave_vector(idx);
            let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if k2 == 0.0 {
                continue;
            }
            let dot = kv[0] * c[0][idx] + kv[1] * c[1][idx] + kv[2] * c[2][idx];
            for a in 0..3 {
                out[a][idx] = c[a][idx] - dot * (kv[a] / k2);
            }
        }
        let mut it = out.into_iter().map(|z| self.inverse(z));
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }

    /// L^2 norm with Fourier weight `(1 + |k|^2)^{power}` (power -1/2 gives the
    /// H^{-1} surrogate, +1/2 the H^1 norm).
    pub fn sobolev_norm(&self, v: &[&[f64]], power: f64) -> f64 {
        let n3 = self.grid.len() as f64;
        let mut total = 0.0;
        for f in v {
            let c = self.forward(f);
            for (idx, z) in c.iter().enumerate() {
                let kv = self.wave_vector_full(idx);
                let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                total += z.norm_sqr() * (1.0 + k2).powf(2.0 * power);
            }
        }
        (total * self.grid.cell_volume() / n3).sqrt()
    }
}
