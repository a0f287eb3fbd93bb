use serde::{Deserialize, Serialize};

use super::grid::{GridFunction, TorusGrid};
use crate::error::{param_err, Result};

fn g(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth radial cutoff: 1 on `|xi| <= 1`, 0 on `|xi| >= 3/2`.
pub fn chi(xi: f64) -> f64 {
    let r = xi.abs();
    let a = g(1.5 - r);
    let b = g(r - 1.0);
    a / (a + b)
}

/// `psi = chi - chi(2 .)`, supported in `1/2 <= |xi| <= 3/2`.
pub fn psi(xi: f64) -> f64 {
    chi(xi) - chi(2.0 * xi)
}

/// Multiplier of block `j`: `chi(2 xi)` for `j = -1`, `psi(2^-j xi)` otherwise.
///
/// The low block uses `chi(2 .)` rather than `chi` so that the blocks sum to
/// one and `R_j R~_j = R_j` holds.
pub fn block_multiplier(j: i32, xi: f64) -> f64 {
    if j < 0 {
        chi(2.0 * xi)
    } else {
        psi(xi * 0.5f64.powi(j))
    }
}

/// Dyadic partition of unity sampled on the frequency grid of a torus.
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    grid: TorusGrid,
    j_max: i32,
    /// `chi(|k|)` per FFT bin.
    chi: Vec<f64>,
    /// Multipliers for `j = -1, 0, ..., j_max`.
    blocks: Vec<Vec<f64>>,
}

/// Checks the Nyquist budget `pi M / extent >= 2^{j_max + 1}` and
/// tabulates every block multiplier.
pub fn build_partition(grid: &TorusGrid, j_max: i32) -> Result<DyadicPartition> {
    if j_max < 4 {
        return param_err(format!("j_max must be at least 4, got {j_max}"));
    }
    let need = 2f64.powi(j_max + 1);
    if grid.nyquist() < need {
        return param_err(format!(
            "Nyquist frequency {:.3} below 2^(j_max+1) = {need} for j_max = {j_max}",
            grid.nyquist()
        ));
    }
    let norms = grid.wavenumber_norms();
    let chi_tab = norms.iter().map(|&k| chi(k)).collect();
    let blocks = (-1..=j_max)
        .map(|j| norms.iter().map(|&k| block_multiplier(j, k)).collect())
        .collect();
    Ok(DyadicPartition {
        grid: *grid,
        j_max,
        chi: chi_tab,
        blocks,
    })
}

impl DyadicPartition {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn chi_table(&self) -> &[f64] {
        &self.chi
    }

    /// Multiplier table of block `j`.
    pub fn multiplier(&self, j: i32) -> Result<&[f64]> {
        if j < -1 || j > self.j_max {
            return param_err(format!("block index {j} outside -1..={}", self.j_max));
        }
        Ok(&self.blocks[(j + 1) as usize])
    }
}

fn check_grid(f: &GridFunction, part: &DyadicPartition) -> Result<()> {
    if f.grid() != part.grid() {
        return param_err("function and partition live on different grids");
    }
    Ok(())
}

/// `R_j f` by Fourier multiplication.
pub fn block(f: &GridFunction, j: i32, part: &DyadicPartition) -> Result<GridFunction> {
    check_grid(f, part)?;
    Ok(f.multiplier_table(part.multiplier(j)?))
}

/// Integrability exponent for Besov norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    One,
    Two,
    Infinity,
}

impl Exponent {
    pub fn value(&self) -> f64 {
        match self {
            Exponent::One => 1.0,
            Exponent::Two => 2.0,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

/// Block norms `||R_j f||_p` for `j = -1..=j_max` and their weighted `l^q` total.
#[derive(Debug, Clone, Serialize)]
pub struct BesovProfile {
    pub beta: f64,
    pub p: Exponent,
    pub q: Exponent,
    pub per_block_norms: Vec<f64>,
    pub total: f64,
}

impl BesovProfile {
    /// `l^q` norm of `2^{beta j} ||R_j f||_p` over `j = -1..`.
    pub fn aggregate(beta: f64, q: Exponent, per_block: &[f64]) -> f64 {
        let weighted = per_block
            .iter()
            .enumerate()
            .map(|(i, n)| 2f64.powf(beta * (i as f64 - 1.0)) * n);
        match q {
            Exponent::Infinity => weighted.fold(0.0, f64::max),
            Exponent::One => weighted.sum(),
            Exponent::Two => weighted.map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

pub fn besov_norm(f: &GridFunction, beta: f64, p: Exponent, q: Exponent, part: &DyadicPartition) -> Result<BesovProfile> {
    check_grid(f, part)?;
    let spec = super::grid::forward(f.grid(), f.values());
    let per_block_norms: Vec<f64> = (-1..=part.j_max)
        .map(|j| {
            let m = &part.blocks[(j + 1) as usize];
            let s = spec.iter().zip(m).map(|(c, w)| c * *w).collect();
            let b = GridFunction::new_unchecked(*f.grid(), super::grid::inverse_real(f.grid(), s));
            b.lp_norm(p.value())
        })
        .collect();
    let total = BesovProfile::aggregate(beta, q, &per_block_norms);
    Ok(BesovProfile {
        beta,
        p,
        q,
        per_block_norms,
        total,
    })
}
