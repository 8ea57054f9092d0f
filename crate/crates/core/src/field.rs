//! Sampled fields on a [`Grid`] with an optional analytic description of the
//! field beyond (and inside a small cube around) the singular origin.
//!
//! Binary layout (little endian): `b"LRLF"`, `u32` format version, `u32`
//! header length, JSON header (`grid`, `components`, `tail`,
//! `divergence_free`), then `components × N³` `f64` samples, component-major,
//! each component in `(i, j, k)` row-major order with `k` fastest.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::data::{AnalyticData, DssExtension};
use crate::error::{LabError, Result};
use crate::grid::Grid;
use crate::radial::{Evaluation, SmoothedData};
use crate::spectral::Spectral;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"LRLF";

/// Analytic description used for exterior tails and the origin cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TailDescriptor {
    /// The field equals this data.
    Data(AnalyticData),
    /// The field equals the heat-smoothed data at similarity time `s`.
    Smoothed { data: AnalyticData, s: f64 },
    /// Discretely self-similar extension of an annulus profile.
    Extension(DssExtension),
}

pub type PointEval = Box<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;

/// Tabulated smoothing of `data`, built once per distinct data set.
pub fn tabulated(data: &AnalyticData) -> Arc<SmoothedData> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<SmoothedData>>>> = OnceLock::new();
    let key = serde_json::to_string(data).unwrap_or_default();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(sm) = cache.lock().unwrap().get(&key) {
        return sm.clone();
    }
    let sm = Arc::new(SmoothedData::with_tables(data));
    cache.lock().unwrap().insert(key, sm.clone());
    sm
}

impl TailDescriptor {
    pub fn evaluator(&self) -> PointEval {
        match self {
            TailDescriptor::Data(d) => {
                let d = d.clone();
                Box::new(move |x| d.eval(x))
            }
            TailDescriptor::Smoothed { data, s } => {
                let sm = tabulated(data);
                let s = *s;
                Box::new(move |y| sm.eval(y, s, Evaluation::Tabulated).value)
            }
            TailDescriptor::Extension(e) => {
                let e = e.clone();
                Box::new(move |x| e.eval(x))
            }
        }
    }

    /// Whether the described field has a `1/|x|` singularity at the origin.
    pub fn is_singular(&self) -> bool {
        !matches!(self, TailDescriptor::Smoothed { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    grid: Grid,
    components: usize,
    tail: Option<TailDescriptor>,
    divergence_free: bool,
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Grid,
    pub comps: [Vec<f64>; 3],
    pub tail: Option<TailDescriptor>,
    pub divergence_free: bool,
}

#[derive(Debug, Clone)]
pub struct TensorField {
    pub columns: [VectorField; 3],
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Average of `f` over the cell centred at the origin (midpoint subcells, so
/// the singular point itself is never sampled).
pub fn origin_cell_average(f: &dyn Fn([f64; 3]) -> [f64; 3], h: f64) -> [f64; 3] {
    let m = 8;
    let mut acc = [0.0; 3];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let p = |a: usize| (-0.5 + (a as f64 + 0.5) / m as f64) * h;
                let v = f([p(i), p(j), p(k)]);
                for c in 0..3 {
                    acc[c] += v[c];
                }
            }
        }
    }
    let n = (m * m * m) as f64;
    [acc[0] / n, acc[1] / n, acc[2] / n]
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            comps: [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]],
            tail: None,
            divergence_free: true,
        }
    }

    pub fn from_fn<F: Fn([f64; 3]) -> [f64; 3]>(grid: Grid, f: F) -> Self {
        Self { grid, comps: grid.sample_vector(f), tail: None, divergence_free: false }
    }

    /// Samples a descriptor; a singular origin node receives the cell average.
    pub fn from_descriptor(grid: Grid, tail: TailDescriptor) -> Self {
        let eval = tail.evaluator();
        let mut comps = grid.sample_vector(|x| eval(x));
        if tail.is_singular() {
            let avg = origin_cell_average(&*eval, grid.spacing());
            let o = grid.origin_index();
            for c in 0..3 {
                comps[c][o] = avg[c];
            }
        }
        let divergence_free = match &tail {
            TailDescriptor::Data(d) | TailDescriptor::Smoothed { data: d, .. } => d.is_divergence_free(),
            TailDescriptor::Extension(e) => e.profile.data.is_divergence_free(),
        };
        Self { grid, comps, tail: Some(tail), divergence_free }
    }

    pub fn with_tail(mut self, tail: Option<TailDescriptor>) -> Self {
        self.tail = tail;
        self
    }

    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| (self.comps[0][i].powi(2) + self.comps[1][i].powi(2) + self.comps[2][i].powi(2)).sqrt())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    pub fn scale(&mut self, f: f64) {
        for c in self.comps.iter_mut() {
            for v in c.iter_mut() {
                *v *= f;
            }
        }
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for c in 0..3 {
            for (v, w) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *v += a * w;
            }
        }
    }

    /// Max spectral divergence over the grid.
    pub fn spectral_divergence(&self, sp: &Spectral) -> f64 {
        sp.divergence(&self.comps).into_iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max relative mismatch between samples and the descriptor on the
    /// outermost shell of the inner cube.
    pub fn tail_mismatch(&self) -> Option<f64> {
        let tail = self.tail.as_ref()?;
        let eval = tail.evaluator();
        let n = self.grid.n;
        let mut worst: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let (i, j, k) = self.grid.unravel(idx);
            let edge = |a: usize| a == 1 || a == n - 1;
            if !(self.grid.in_inner_cube(idx) && (edge(i) || edge(j) || edge(k))) {
                continue;
            }
            let v = eval(self.grid.point(idx));
            let g = self.at(idx);
            let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let d = ((v[0] - g[0]).powi(2) + (v[1] - g[1]).powi(2) + (v[2] - g[2]).powi(2)).sqrt();
            if nv > 0.0 {
                worst = worst.max(d / nv);
            }
        }
        Some(worst)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header { grid: self.grid, components: 3, tail: self.tail.clone(), divergence_free: self.divergence_free };
        write_payload(&mut w, &header, self.comps.iter().map(|c| c.as_slice()))
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let (header, mut data) = read_payload(&mut r)?;
        if header.components != 3 {
            return Err(LabError::Format(format!("expected 3 components, found {}", header.components)));
        }
        let c2 = data.pop().unwrap();
        let c1 = data.pop().unwrap();
        let c0 = data.pop().unwrap();
        Ok(Self { grid: header.grid, comps: [c0, c1, c2], tail: header.tail, divergence_free: header.divergence_free })
    }

    /// CSV with `# key = value` header lines and `x,y,z,f1,f2,f3` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# half_width = {}", self.grid.half_width)?;
        writeln!(w, "# n = {}", self.grid.n)?;
        let tail = serde_json::to_string(&self.tail).map_err(|e| LabError::Format(e.to_string()))?;
        writeln!(w, "# tail = {tail}")?;
        writeln!(w, "x,y,z,f1,f2,f3")?;
        for idx in 0..self.grid.len() {
            let p = self.grid.point(idx);
            writeln!(w, "{},{},{},{:e},{:e},{:e}", p[0], p[1], p[2], self.comps[0][idx], self.comps[1][idx], self.comps[2][idx])?;
        }
        Ok(())
    }
}

impl ScalarField {
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header { grid: self.grid, components: 1, tail: None, divergence_free: false };
        write_payload(&mut w, &header, std::iter::once(self.values.as_slice()))
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let (header, mut data) = read_payload(&mut r)?;
        if header.components != 1 {
            return Err(LabError::Format(format!("expected 1 component, found {}", header.components)));
        }
        Ok(Self { grid: header.grid, values: data.pop().unwrap() })
    }
}

fn write_payload<'a, W: Write>(w: &mut W, header: &Header, comps: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| LabError::Format(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for c in comps {
        let mut buf = Vec::with_capacity(c.len() * 8);
        for v in c {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_payload<R: Read>(r: &mut R) -> Result<(Header, Vec<Vec<f64>>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LabError::Format("bad magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(LabError::Format(format!("unsupported field format version {version}")));
    }
    r.read_exact(&mut word)?;
    let len = u32::from_le_bytes(word) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| LabError::Format(e.to_string()))?;
    let n = header.grid.len();
    let mut data = Vec::with_capacity(header.components);
    let mut buf = vec![0u8; n * 8];
    for _ in 0..header.components {
        r.read_exact(&mut buf)?;
        data.push(buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect());
    }
    Ok((header, data))
}
