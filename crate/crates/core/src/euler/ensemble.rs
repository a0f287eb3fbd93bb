use rayon::prelude::*;

use crate::error::{param_err, Result};
use crate::fokker_planck::InitialDensity;
use crate::rng::{stream_id, RngStream, StreamDomain};
use crate::stable::fill_increment_unchecked;

/// Particles per random stream. Fixed so that results do not depend on the
/// number of worker threads.
pub const CHUNK: usize = 1024;

/// Particle positions in `R^d` (never wrapped) with one random stream per
/// chunk of [`CHUNK`] particles.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub time: f64,
    dim: usize,
    positions: Vec<f64>,
    streams: Vec<RngStream>,
}

impl ParticleEnsemble {
    /// `n` i.i.d. draws from `initial`. Chunk `c` draws its starting points
    /// from stream `(seed, InitialSample:c)` and its increments from
    /// `(seed, Increments:c)`.
    pub fn sample(initial: &InitialDensity, n: usize, seed: u64) -> Result<Self> {
        initial.validate()?;
        let dim = initial.dim();
        let mut positions = vec![0.0; n * dim];
        positions
            .par_chunks_mut(CHUNK * dim)
            .enumerate()
            .for_each(|(c, block)| {
                let mut rng = RngStream::new(seed, stream_id(StreamDomain::InitialSample, c as u64));
                for x in block.chunks_mut(dim) {
                    initial.sample(&mut rng, x);
                }
            });
        Ok(Self::from_positions(dim, positions, seed, StreamDomain::Increments))
    }

    /// `n` particles at `x0`, driven by streams of `domain`.
    pub fn at_point(x0: &[f64], n: usize, seed: u64, domain: StreamDomain) -> Result<Self> {
        if x0.is_empty() || n == 0 {
            return param_err("need a point and at least one particle");
        }
        let positions = x0.iter().copied().cycle().take(n * x0.len()).collect();
        Ok(Self::from_positions(x0.len(), positions, seed, domain))
    }

    /// Ensemble at time 0 with explicit positions (row-major, `dim` per particle).
    pub fn from_positions(dim: usize, positions: Vec<f64>, seed: u64, domain: StreamDomain) -> Self {
        assert!(dim > 0 && positions.len() % dim == 0);
        let n = positions.len() / dim;
        let streams = (0..n.div_ceil(CHUNK))
            .map(|c| RngStream::new(seed, stream_id(domain, c as u64)))
            .collect();
        Self {
            time: 0.0,
            dim,
            positions,
            streams,
        }
    }

    /// Replaces every stream by a fresh one from `seed`, keeping positions.
    pub fn reseed(&mut self, seed: u64, domain: StreamDomain) {
        for (c, s) in self.streams.iter_mut().enumerate() {
            *s = RngStream::new(seed, stream_id(domain, c as u64));
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn streams(&self) -> &[RngStream] {
        &self.streams
    }

    /// Moves particle `i` by `displacement(i, x_i) + L_{t+dt} - L_t` over `dt`
    /// and returns the number of `displacement` calls. Within a chunk
    /// particles draw their increments in index order.
    pub fn advance<F>(&mut self, dt: f64, alpha: f64, displacement: Option<F>) -> usize
    where
        F: Fn(usize, &[f64], &mut [f64]) + Sync,
    {
        let d = self.dim;
        let calls: usize = self
            .positions
            .par_chunks_mut(CHUNK * d)
            .zip(self.streams.par_iter_mut())
            .enumerate()
            .map(|(c, (block, rng))| {
                let mut inc = vec![0.0; d];
                let mut shift = vec![0.0; d];
                let mut calls = 0;
                for (j, x) in block.chunks_mut(d).enumerate() {
                    if let Some(f) = &displacement {
                        f(c * CHUNK + j, x, &mut shift);
                        calls += 1;
                    }
                    fill_increment_unchecked(dt, alpha, rng, &mut inc);
                    for k in 0..d {
                        x[k] += shift[k] + inc[k];
                    }
                }
                calls
            })
            .sum();
        self.time += dt;
        calls
    }

    /// Fraction of particles outside the middle half `[-extent/4, extent/4)^d`.
    pub fn outer_fraction(&self, extent: f64) -> f64 {
        let q = 0.25 * extent;
        let out = self
            .positions
            .par_chunks(self.dim)
            .filter(|x| x.iter().any(|v| !(*v >= -q && *v < q)))
            .count();
        out as f64 / self.len() as f64
    }
}
