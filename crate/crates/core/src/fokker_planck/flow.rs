use serde::{Deserialize, Serialize};
use std::path::Path;

use super::DriftSpec;
use crate::besov::{GridFunction, TorusGrid};
use crate::error::{param_err, Error, Result};

/// Densities `rho_t` at increasing times on one grid.
#[derive(Debug, Clone)]
pub struct DensityFlow {
    pub grid: TorusGrid,
    pub alpha: f64,
    /// Number of solver steps over `[0, times.last()]`.
    pub steps: usize,
    pub times: Vec<f64>,
    pub densities: Vec<GridFunction>,
    pub drift: Option<DriftSpec>,
    /// Total mass removed by clipping negative values.
    pub clipped_mass: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    alpha: f64,
    t_final: f64,
    steps: usize,
    grid: TorusGrid,
    drift: Option<DriftSpec>,
    clipped_mass: f64,
    times: Vec<f64>,
    files: Vec<String>,
}

impl DensityFlow {
    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last(&self) -> &GridFunction {
        self.densities.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the saved time closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// `max_t ||self_t - other_t||_inf` over common saved times.
    pub fn sup_distance(&self, other: &DensityFlow) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .densities
            .iter()
            .zip(&other.densities)
            .map(|(a, b)| a.sub(b).sup_norm())
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_compatible(&self, other: &DensityFlow) -> Result<()> {
        if self.grid != other.grid {
            return param_err("flows live on different grids");
        }
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
        {
            return param_err("flows are saved at different times");
        }
        Ok(())
    }

    /// Keeps only the saved times that match `times`.
    pub fn restrict_to(&self, times: &[f64]) -> Result<DensityFlow> {
        let mut out_t = Vec::with_capacity(times.len());
        let mut out_d = Vec::with_capacity(times.len());
        for &t in times {
            let i = self.index_of(t);
            if (self.times[i] - t).abs() > 1e-12 * (1.0 + t.abs()) {
                return param_err(format!("time {t} is not saved in this flow"));
            }
            out_t.push(self.times[i]);
            out_d.push(self.densities[i].clone());
        }
        Ok(DensityFlow {
            times: out_t,
            densities: out_d,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> DensityFlow {
        DensityFlow {
            grid: self.grid,
            alpha: self.alpha,
            steps: self.steps,
            times: Vec::new(),
            densities: Vec::new(),
            drift: self.drift.clone(),
            clipped_mass: self.clipped_mass,
        }
    }

    /// Writes `manifest.json` and one `SGF1` file per saved time.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let files: Vec<String> = (0..self.times.len()).map(|i| format!("density_{i:05}.sgf")).collect();
        for (f, rho) in files.iter().zip(&self.densities) {
            rho.save_binary(dir.join(f))?;
        }
        let manifest = Manifest {
            format: "density-flow-1".into(),
            alpha: self.alpha,
            t_final: self.t_final(),
            steps: self.steps,
            grid: self.grid,
            drift: self.drift.clone(),
            clipped_mass: self.clipped_mass,
            times: self.times.clone(),
            files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if m.times.len() != m.files.len() {
            return Err(Error::Format("manifest lists different numbers of times and files".into()));
        }
        let densities = m
            .files
            .iter()
            .map(|f| GridFunction::load_binary(dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        if densities.iter().any(|d| *d.grid() != m.grid) {
            return Err(Error::Format("density file grid differs from manifest".into()));
        }
        Ok(DensityFlow {
            grid: m.grid,
            alpha: m.alpha,
            steps: m.steps,
            times: m.times,
            densities,
            drift: m.drift,
            clipped_mass: m.clipped_mass,
        })
    }
}
