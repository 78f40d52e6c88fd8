//! Run configuration shared by the command line and every output container.

use serde::{Deserialize, Serialize};

use crate::error::{HtrwError, Result};
use crate::grids::{make_sphere_grid, PGrid, SphereGrid, TimeGrid};
use crate::range::Thresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dimension: usize,
    pub n_t: usize,
    pub t_ext: f64,
    /// Sphere grid parameter of the boundary data.
    pub q: usize,
    pub lmax: usize,
    pub n_max: usize,
    pub deriv_max: usize,
    /// Samples of p on [-1, 1] used for reconstruction.
    pub n_p: usize,
    pub theta_pass: f64,
    pub theta_fail: f64,
    pub seed: u64,
    /// Sphere grid parameter of the backprojection; 0 picks 96 (d=3) or
    /// 256 (d=2).
    pub q_recon: usize,
    /// Nodes per axis of the reconstructed volume; 0 picks 48 (d=3) or 128 (d=2).
    pub n_vox: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: 3,
            n_t: 2048,
            t_ext: 4.0,
            q: 32,
            lmax: 12,
            n_max: 8,
            deriv_max: 8,
            n_p: 512,
            theta_pass: 1e-3,
            theta_fail: 1e-1,
            seed: 0x5eed,
            q_recon: 0,
            n_vox: 0,
        }
    }
}

impl RunConfig {
    pub fn for_dim(dimension: usize) -> Self {
        RunConfig { dimension, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 2 && self.dimension != 3 {
            return Err(HtrwError::Config(format!("dimension {} not supported", self.dimension)));
        }
        if self.n_p < 4 || self.n_p % 2 == 1 {
            return Err(HtrwError::Config(format!("n_p must be even and >= 4, got {}", self.n_p)));
        }
        if self.deriv_max > 16 {
            return Err(HtrwError::Config(format!("deriv_max {} too large", self.deriv_max)));
        }
        self.time_grid()?;
        self.sphere_grid()?;
        self.thresholds()?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.n_t, self.t_ext)
    }

    pub fn sphere_grid(&self) -> Result<SphereGrid> {
        make_sphere_grid(self.dimension, self.q)
    }

    pub fn recon_grid(&self) -> Result<SphereGrid> {
        let q = match (self.q_recon, self.dimension) {
            (0, 3) => 96,
            (0, _) => 256,
            (q, _) => q,
        };
        make_sphere_grid(self.dimension, q)
    }

    pub fn volume_nodes(&self) -> usize {
        match (self.n_vox, self.dimension) {
            (0, 3) => 48,
            (0, _) => 128,
            (n, _) => n,
        }
    }

    /// Full p grid on [-1, 1] with n_p intervals.
    pub fn p_grid(&self) -> PGrid {
        PGrid::full(self.n_p / 2)
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Thresholds::new(self.theta_pass, self.theta_fail)
    }
}
