use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{param_err, Error, Result};

const MAGIC: &[u8; 4] = b"SGF1";

/// Periodic box `[-extent/2, extent/2)^dim` with `points` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    extent: f64,
    points: usize,
}

impl TorusGrid {
    pub fn new(extent: f64, points: usize, dim: usize) -> Result<Self> {
        if !(extent > 0.0 && extent.is_finite()) {
            return param_err(format!("extent must be positive, got {extent}"));
        }
        if !(1..=2).contains(&dim) {
            return param_err(format!("torus grids are 1- or 2-dimensional, got {dim}"));
        }
        if !points.is_power_of_two() {
            return param_err(format!("points per axis must be a power of two, got {points}"));
        }
        let min = if dim == 1 { 256 } else { 128 };
        if points < min {
            return param_err(format!("need at least {min} points per axis in {dim}-d, got {points}"));
        }
        Ok(Self { dim, extent, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points as f64
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest resolved angular frequency, `pi M / extent`.
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.extent
    }

    /// Node coordinates along one axis.
    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| -0.5 * self.extent + i as f64 * h).collect()
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.extent + i as f64 * self.spacing()
    }

    /// Coordinates of flat index `idx` (row-major, first axis slowest).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.coordinate(idx)],
            _ => vec![self.coordinate(idx / self.points), self.coordinate(idx % self.points)],
        }
    }

    /// Angular wavenumber of FFT bin `m`: `2 pi m / extent`, negative above `M/2`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.points as i64;
        let m = m as i64;
        let signed = if m <= n / 2 { m } else { m - n };
        2.0 * PI * signed as f64 / self.extent
    }

    /// `|k|` for every flat FFT bin.
    pub fn wavenumber_norms(&self) -> Vec<f64> {
        let k: Vec<f64> = (0..self.points).map(|m| self.wavenumber(m)).collect();
        match self.dim {
            1 => k.iter().map(|v| v.abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for k0 in &k {
                    for k1 in &k {
                        out.push((k0 * k0 + k1 * k1).sqrt());
                    }
                }
                out
            }
        }
    }

    /// Wraps a coordinate into `[-extent/2, extent/2)`.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.extent;
        x - l * ((x + 0.5 * l) / l).floor()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform_axis(data: &mut [Complex64], grid: &TorusGrid, inverse: bool) {
    let n = grid.points;
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let fft = if inverse { p.plan_fft_inverse(n) } else { p.plan_fft_forward(n) };
        match grid.dim {
            1 => fft.process(data),
            _ => {
                // rows are contiguous; columns go through a scratch copy
                fft.process(data);
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for c in 0..n {
                    for r in 0..n {
                        col[r] = data[r * n + c];
                    }
                    fft.process(&mut col);
                    for r in 0..n {
                        data[r * n + c] = col[r];
                    }
                }
            }
        }
    });
}

/// Unnormalized forward DFT of real samples.
pub fn forward(grid: &TorusGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_axis(&mut data, grid, false);
    data
}

/// Inverse DFT normalized by `1/len`, real part only.
pub fn inverse_real(grid: &TorusGrid, mut spectrum: Vec<Complex64>) -> Vec<f64> {
    transform_axis(&mut spectrum, grid, true);
    let s = 1.0 / grid.len() as f64;
    spectrum.iter().map(|c| c.re * s).collect()
}

/// Samples of a real function on a [`TorusGrid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return param_err(format!("{} values for a grid of {} nodes", values.len(), grid.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("grid function has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn new_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::new_unchecked(*grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self::new_unchecked(*grid, vec![c; grid.len()])
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new_unchecked(*grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.grid.cell_volume()).powf(1.0 / p)
    }

    /// Riemann sum `sum_i f_i h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `sum_i f_i g_i h^d`.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new_unchecked(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn axpy(&mut self, a: f64, x: &GridFunction) {
        for (y, v) in self.values.iter_mut().zip(&x.values) {
            *y += a * v;
        }
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        let v = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self::new_unchecked(self.grid, v)
    }

    /// Applies the radial Fourier multiplier `m(|k|)`.
    pub fn radial_multiplier(&self, m: impl Fn(f64) -> f64) -> Self {
        let norms = self.grid.wavenumber_norms();
        let weights: Vec<f64> = norms.iter().map(|&k| m(k)).collect();
        self.multiplier_table(&weights)
    }

    /// Applies a real multiplier given per FFT bin.
    pub fn multiplier_table(&self, weights: &[f64]) -> Self {
        let mut spec = forward(&self.grid, &self.values);
        for (c, w) in spec.iter_mut().zip(weights) {
            *c *= *w;
        }
        Self::new_unchecked(self.grid, inverse_real(&self.grid, spec))
    }

    /// Spectral partial derivative `d^order / dx_axis^order`.
    pub fn derivative(&self, axis: usize, order: u32) -> Self {
        let n = self.grid.points;
        let mut spec = forward(&self.grid, &self.values);
        let ik = |m: usize| {
            // the Nyquist bin has no well-defined sign for odd orders
            if order % 2 == 1 && m == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.grid.wavenumber(m)).powu(order)
            }
        };
        for (idx, c) in spec.iter_mut().enumerate() {
            let m = match (self.grid.dim, axis) {
                (1, _) => idx,
                (_, 0) => idx / n,
                _ => idx % n,
            };
            *c *= ik(m);
        }
        Self::new_unchecked(self.grid, inverse_real(&self.grid, spec))
    }

    /// Periodic linear interpolation at an arbitrary point.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.points;
        let h = g.spacing();
        let loc = |xi: f64| {
            let s = (g.wrap(xi) + 0.5 * g.extent) / h;
            let i = s.floor();
            let w = s - i;
            ((i as usize) % n, w)
        };
        match g.dim {
            1 => {
                let (i, w) = loc(x[0]);
                (1.0 - w) * self.values[i] + w * self.values[(i + 1) % n]
            }
            _ => {
                let (i, wx) = loc(x[0]);
                let (j, wy) = loc(x[1]);
                let (i1, j1) = ((i + 1) % n, (j + 1) % n);
                let v = &self.values;
                (1.0 - wx) * ((1.0 - wy) * v[i * n + j] + wy * v[i * n + j1])
                    + wx * ((1.0 - wy) * v[i1 * n + j] + wy * v[i1 * n + j1])
            }
        }
    }

    /// Fraction of `int |f|` carried outside the middle half `[-extent/4, extent/4)^d`.
    pub fn outer_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let q = 0.25 * self.grid.extent;
        let inner: f64 = (0..self.values.len())
            .filter(|&i| self.grid.point(i).iter().all(|x| *x >= -q && *x < q))
            .map(|i| self.values[i].abs())
            .sum();
        1.0 - inner / total
    }

    /// Binary layout: magic `SGF1`, extent (f64), dim (i32), points per
    /// axis (i32), the axis coordinates, then the values; little-endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.grid.extent.to_le_bytes())?;
        w.write_all(&(self.grid.dim as i32).to_le_bytes())?;
        w.write_all(&(self.grid.points as i32).to_le_bytes())?;
        for v in self.grid.axis().iter().chain(&self.values) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a grid function (bad magic)".into()));
        }
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b8)?;
        let extent = f64::from_le_bytes(b8);
        r.read_exact(&mut b4)?;
        let dim = i32::from_le_bytes(b4);
        r.read_exact(&mut b4)?;
        let points = i32::from_le_bytes(b4);
        if dim < 1 || points < 1 {
            return Err(Error::Format(format!("bad header: dim={dim} points={points}")));
        }
        let grid = TorusGrid::new(extent, points as usize, dim as usize)
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut next = || -> Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        for i in 0..grid.points {
            let x = next()?;
            if (x - grid.coordinate(i)).abs() > 1e-9 * extent {
                return Err(Error::Format(format!("axis coordinate {i} is {x}, expected {}", grid.coordinate(i))));
            }
        }
        let values = (0..grid.len()).map(|_| next()).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(20 + 8 * (self.grid.points + self.values.len()));
        self.write_binary(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary(std::fs::read(path)?.as_slice())
    }

    /// CSV with header `x0[,x1],value`, one row per node.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let header = if self.grid.dim == 1 { "x0,value" } else { "x0,x1,value" };
        writeln!(w, "{header}")?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            let coords: Vec<String> = p.iter().map(|c| format!("{c:.17e}")).collect();
            writeln!(w, "{},{v:.17e}", coords.join(","))?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`write_csv`](Self::write_csv) for a known grid.
    pub fn read_csv(grid: &TorusGrid, r: impl BufRead) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let last = line
                .rsplit(',')
                .next()
                .ok_or_else(|| Error::Format(format!("line {}: empty", n + 1)))?;
            let v: f64 = last
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            values.push(v);
        }
        Self::new(*grid, values).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(80.0, 4096, 1).is_ok());
        assert!(TorusGrid::new(80.0, 3000, 1).is_err());
        assert!(TorusGrid::new(80.0, 128, 1).is_err());
        assert!(TorusGrid::new(80.0, 128, 2).is_ok());
        assert!(TorusGrid::new(80.0, 128, 3).is_err());
        assert!(TorusGrid::new(-1.0, 256, 1).is_err());
    }

    #[test]
    fn derivative_of_mode() {
        let g = TorusGrid::new(2.0 * PI, 256, 1).unwrap();
        let f = GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin());
        let df = f.derivative(0, 1);
        let exact = GridFunction::from_fn(&g, |x| 3.0 * (3.0 * x[0]).cos());
        assert!(df.sub(&exact).sup_norm() < 1e-11);
        let d2 = f.derivative(0, 2);
        assert!((d2.sub(&f.scaled(-9.0))).sup_norm() < 1e-10);
    }

    #[test]
    fn two_dimensional_derivative_axes() {
        let g = TorusGrid::new(2.0 * PI, 128, 2).unwrap();
        let f = GridFunction::from_fn(&g, |x| (2.0 * x[0]).sin() * x[1].cos());
        let dx = f.derivative(0, 1);
        let exact = GridFunction::from_fn(&g, |x| 2.0 * (2.0 * x[0]).cos() * x[1].cos());
        assert!(dx.sub(&exact).sup_norm() < 1e-11);
        let dy = f.derivative(1, 1);
        let exact = GridFunction::from_fn(&g, |x| -(2.0 * x[0]).sin() * x[1].sin());
        assert!(dy.sub(&exact).sup_norm() < 1e-11);
    }

    #[test]
    fn interpolation_is_periodic_and_exact_at_nodes() {
        let g = TorusGrid::new(10.0, 256, 1).unwrap();
        let f = GridFunction::from_fn(&g, |x| x[0].sin());
        let x = g.coordinate(17);
        assert!((f.interpolate(&[x]) - f.values()[17]).abs() < 1e-14);
        assert!((f.interpolate(&[x + 10.0]) - f.values()[17]).abs() < 1e-12);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let g = TorusGrid::new(7.0, 256, 1).unwrap();
        let f = GridFunction::from_fn(&g, |x| (x[0] * 0.3).cos());
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SGF1");
        assert_eq!(buf.len(), 4 + 8 + 4 + 4 + 8 * 512);
        assert_eq!(GridFunction::read_binary(buf.as_slice()).unwrap(), f);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let back = GridFunction::read_csv(&g, csv.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn wrap_into_box() {
        let g = TorusGrid::new(80.0, 256, 1).unwrap();
        assert_eq!(g.wrap(0.0), 0.0);
        assert!((g.wrap(41.0) + 39.0).abs() < 1e-12);
        assert!((g.wrap(-40.0) + 40.0).abs() < 1e-12);
        assert!((g.wrap(40.0) + 40.0).abs() < 1e-12);
    }
}
