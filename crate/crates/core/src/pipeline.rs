//! End-to-end runs on boundary data: range check, reconstruction, and the
//! structured violation used to exercise the checker.

use serde_json::json;

use crate::config::RunConfig;
use crate::error::{HtrwError, Result};
use crate::exterior::{channel_response_with, ChannelFunctions};
use crate::forward::bump_profile;
use crate::grids::{extend_and_transform, sh_analysis, BoundaryData};
use crate::range::{moment_residuals, smoothness_residuals, verdict, RangeReport};
use crate::recon::{assemble_sinogram, invert_radon, ReconVolume};
use crate::special::{channel_position, sph_harm_all, HarmonicIndex};

fn check_dims(b: &BoundaryData, cfg: &RunConfig) -> Result<()> {
    if b.sphere.dim != cfg.dimension {
        return Err(HtrwError::Config(format!(
            "data are d={}, configuration asks for d={}",
            b.sphere.dim, cfg.dimension
        )));
    }
    Ok(())
}

/// sh_analysis, extension and transform, channel response.
pub fn channel_functions(b: &BoundaryData, cfg: &RunConfig) -> Result<ChannelFunctions> {
    check_dims(b, cfg)?;
    let ch = extend_and_transform(&sh_analysis(b, cfg.lmax)?);
    let mut opts = crate::exterior::DerivOptions::for_step(b.time.dt());
    opts.deriv_max = cfg.deriv_max;
    channel_response_with(&ch, opts)
}

/// Grid descriptors echoed into reports and containers.
pub fn grid_descriptor(b: &BoundaryData, cfg: &RunConfig) -> serde_json::Value {
    json!({
        "sphere": { "dim": b.sphere.dim, "q": b.sphere.q, "nodes": b.sphere.len() },
        "time": { "n_t": b.time.n_t, "t_ext": b.time.t_ext, "dt": b.time.dt(), "n_phys": b.time.n_phys() },
        "lmax": cfg.lmax,
        "n_max": cfg.n_max,
        "deriv_max": cfg.deriv_max,
    })
}

pub fn check(b: &BoundaryData, cfg: &RunConfig) -> Result<RangeReport> {
    let thresholds = cfg.thresholds()?;
    let r = channel_functions(b, cfg)?;
    let mo = moment_residuals(&r, cfg.n_max);
    let sm = smoothness_residuals(&r, cfg.deriv_max);
    verdict(b.sphere.dim, mo, sm, thresholds, grid_descriptor(b, cfg), r.b_norm)
}

/// f -> g -> R -> F -> f^ on the configured reconstruction grids.
pub fn reconstruct(b: &BoundaryData, cfg: &RunConfig) -> Result<ReconVolume> {
    let r = channel_functions(b, cfg)?;
    let f = assemble_sinogram(&r, &cfg.recon_grid()?, &cfg.p_grid())?;
    invert_radon(&f, cfg.volume_nodes())
}

/// A smooth channel w(t) Y_l^m added to the data, scaled to eps ||b||.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub l: usize,
    /// None picks m = 0 (d=3) or m = -l (d=2).
    pub m: Option<i32>,
    /// Moment order the perturbation is meant to break.
    pub n: usize,
    pub eps: f64,
}

impl Violation {
    /// Parses `l=5,n=1,eps=1e-2[,m=0]`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut v = Violation { l: 5, m: None, n: 1, eps: 1e-2 };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, val) = part
                .split_once('=')
                .ok_or_else(|| HtrwError::Config(format!("expected key=value, got '{part}'")))?;
            let bad = || HtrwError::Config(format!("bad value in '{part}'"));
            match k.trim() {
                "l" => v.l = val.trim().parse().map_err(|_| bad())?,
                "m" => v.m = Some(val.trim().parse().map_err(|_| bad())?),
                "n" => v.n = val.trim().parse().map_err(|_| bad())?,
                "eps" => v.eps = val.trim().parse().map_err(|_| bad())?,
                other => return Err(HtrwError::Config(format!("unknown violation key '{other}'"))),
            }
        }
        Ok(v)
    }

    fn index(&self, d: usize) -> Result<HarmonicIndex> {
        let m = self.m.unwrap_or(if d == 2 { -(self.l as i32) } else { 0 });
        let idx = HarmonicIndex::new(self.l, m);
        if !idx.is_valid(d) {
            return Err(HtrwError::Config(format!("invalid harmonic ({}, {m}) for d={d}", self.l)));
        }
        Ok(idx)
    }
}

/// b + alpha w(t) Y_l^m(theta), w(t) = phi((t - 0.55)/0.35), with alpha set
/// so that the added term has L2 norm eps ||b||. Needs l > n and l + n even
/// so that the broken moment is one the range conditions constrain.
pub fn inject_violation(b: &BoundaryData, v: &Violation) -> Result<BoundaryData> {
    if !(v.l > v.n && (v.l + v.n).is_multiple_of(2)) {
        return Err(HtrwError::Config(format!(
            "violation needs l > n and l + n even (l={}, n={})",
            v.l, v.n
        )));
    }
    if !(v.eps >= 0.0) {
        return Err(HtrwError::Config(format!("violation eps must be >= 0, got {}", v.eps)));
    }
    let d = b.sphere.dim;
    let idx = v.index(d)?;
    let pos = channel_position(d, idx);
    let y: Vec<f64> = b.sphere.nodes.iter().map(|w| sph_harm_all(d, v.l, w)[pos]).collect();
    let nn = b.sphere.len();
    let mut pert = BoundaryData::zeros(b.sphere.clone(), b.time);
    for k in 0..b.time.n_phys() {
        let w = bump_profile((b.time.t(k) - 0.55) / 0.35);
        for i in 0..nn {
            pert.values[k * nn + i] = w * y[i];
        }
    }
    let pn = pert.l2_norm();
    let alpha = if pn > 0.0 { v.eps * b.l2_norm() / pn } else { 0.0 };
    let values = b.values.iter().zip(&pert.values).map(|(a, p)| a + alpha * p).collect();
    BoundaryData::new(b.sphere.clone(), b.time, values)
}
