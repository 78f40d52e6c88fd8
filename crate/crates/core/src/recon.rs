//! Sinogram assembly from channel functions and Radon inversion.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HtrwError, Result};
use crate::exterior::ChannelFunctions;
use crate::forward::{eval_phantom, interp_cubic, Phantom, Sinogram};
use crate::grids::{smooth_cutoff, PGrid, SphereGrid};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconVolume {
    pub dim: usize,
    /// Nodes per axis over [-1, 1].
    pub n: usize,
    /// Row-major, last axis fastest.
    pub values: Vec<f64>,
}

impl ReconVolume {
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + 2.0 * i as f64 / (self.n - 1) as f64
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        let mut r = flat;
        for a in (0..self.dim).rev() {
            p[a] = self.coord(r % self.n);
            r /= self.n;
        }
        p
    }

    /// Samples of a phantom on the same grid.
    pub fn sample(ph: &Phantom, n: usize) -> Self {
        let mut v = ReconVolume { dim: ph.dim, n, values: vec![0.0; n.pow(ph.dim as u32)] };
        let vals = par::map_range(v.values.len(), |k| eval_phantom(ph, &v.point(k)));
        v.values = vals;
        v
    }
}

/// F(w, p) = sum 2 R_l^m(-p) Y_l^m(w) for p > 0, F(w, -p) = F(-w, p), and
/// the antipodal mean at p = 0.
pub fn assemble_sinogram(r: &ChannelFunctions, sg: &SphereGrid, pgrid: &PGrid) -> Result<Sinogram> {
    if !pgrid.is_symmetric() {
        return Err(HtrwError::Config("assemble_sinogram needs a symmetric p grid".into()));
    }
    if sg.dim != r.dim {
        return Err(HtrwError::Config(format!("channels are d={}, grid is d={}", r.dim, sg.dim)));
    }
    let table = sg.harmonic_table(r.lmax);
    let np = pgrid.n;
    let mid = np / 2;
    let p_end = (r.n_r() - 1) as f64 * r.dt;
    // 2 R(-p) on the p >= 0 half of the grid, per channel
    let on_grid: Vec<Vec<f64>> = (0..r.len())
        .map(|c| {
            let rv = r.reversed(c);
            (mid..np)
                .map(|j| {
                    let p = pgrid.p(j);
                    if p > p_end + 1e-12 {
                        0.0
                    } else {
                        2.0 * interp_cubic(&rv, 0.0, r.dt, p)
                    }
                })
                .collect()
        })
        .collect();
    let half: Vec<Vec<f64>> = par::map_range(sg.len(), |i| {
        let mut row = vec![0.0; np - mid];
        for (rc, y) in on_grid.iter().zip(&table[i]) {
            for (o, v) in row.iter_mut().zip(rc) {
                *o += v * y;
            }
        }
        row
    });
    let mut values = vec![0.0; sg.len() * np];
    for i in 0..sg.len() {
        let a = sg.antipode(i);
        for j in 0..np {
            values[i * np + j] = if j >= mid { half[i][j - mid] } else { half[a][np - 1 - j - mid] };
        }
        // F(w, 0) and F(-w, 0) come from different channels sums; they agree
        // only up to the smoothness residual, so take the mean
        values[i * np + mid] = 0.5 * (half[i][0] + half[a][0]);
    }
    Ok(Sinogram { sphere: sg.clone(), pgrid: *pgrid, values })
}

/// Raised-cosine roll-off: 1 below 80% of Nyquist, 0 at Nyquist.
fn rolloff(frac: f64) -> f64 {
    let a = 0.8;
    if frac <= a {
        1.0
    } else if frac >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (frac - a) / (1.0 - a)).cos())
    }
}

/// Frequency response of the filter on a zero-padded length `size` with
/// sample step h. d=2: the band-limited ramp built from its spatial
/// samples, which avoids the offset a sampled |sigma| leaves behind.
/// d=3: the second derivative, -sigma^2.
fn filter_response(d: usize, size: usize, h: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let nyq = PI / h;
    let sigma = |k: usize| {
        let kk = if k <= size / 2 { k as f64 } else { k as f64 - size as f64 };
        2.0 * PI * kk / (size as f64 * h)
    };
    let base: Vec<f64> = if d == 2 {
        let mut ker: Vec<C64> = (0..size)
            .map(|k| {
                let n = if k <= size / 2 { k as i64 } else { k as i64 - size as i64 };
                let v = if n == 0 {
                    1.0 / (4.0 * h * h)
                } else if n % 2 != 0 {
                    -1.0 / (PI * PI * (n * n) as f64 * h * h)
                } else {
                    0.0
                };
                C64::new(v * h, 0.0)
            })
            .collect();
        planner.plan_fft_forward(size).process(&mut ker);
        // the kernel realizes |sigma| / 2 pi
        ker.iter().map(|v| 2.0 * PI * v.re).collect()
    } else {
        (0..size).map(|k| -sigma(k) * sigma(k)).collect()
    };
    base.iter().enumerate().map(|(k, b)| b * rolloff(sigma(k).abs() / nyq)).collect()
}

/// Apply a real frequency response to a row with zero padding and an
/// endpoint taper. The result covers `ext` extra samples on each side,
/// where a nonlocal filter leaves a tail.
fn filter_row(row: &[f64], response: &[f64], ext: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = row.len();
    let size = response.len();
    let taper_w = (n as f64 * 0.03).max(2.0);
    let mut buf: Vec<C64> = (0..size)
        .map(|k| {
            if k >= n {
                return C64::new(0.0, 0.0);
            }
            let edge = (k as f64).min((n - 1 - k) as f64);
            let w = 1.0 - smooth_cutoff(edge / taper_w);
            C64::new(row[k] * w, 0.0)
        })
        .collect();
    planner.plan_fft_forward(size).process(&mut buf);
    for (v, m) in buf.iter_mut().zip(response) {
        *v *= *m;
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    // index k of the output is row index k - ext; negative ones wrap
    (0..n + 2 * ext)
        .map(|k| buf[(k + size - ext) % size].re / size as f64)
        .collect()
}

/// d=2: filtered backprojection with a rolled-off ramp filter.
/// d=3: f(x) = -(1/8 pi^2) int_{S^2} d^2_p F(w, x.w) dw.
pub fn invert_radon(f: &Sinogram, n: usize) -> Result<ReconVolume> {
    if !f.pgrid.is_symmetric() {
        return Err(HtrwError::Config("invert_radon needs a symmetric p grid".into()));
    }
    let sg = &f.sphere;
    let d = sg.dim;
    let h = f.pgrid.step();
    let lo = f.pgrid.lo - ((f.pgrid.n - 1) / 2) as f64 * h;
    // rows extended to |p| <= 2 so corner points see the whole filtered tail
    let ext = (f.pgrid.n - 1) / 2;
    let size = (4 * f.pgrid.n).next_power_of_two();
    let response = filter_response(d, size, h, &mut FftPlanner::new());
    let filtered: Vec<Vec<f64>> =
        par::map_range(sg.len(), |i| filter_row(f.row(i), &response, ext, &mut FftPlanner::new()));
    let pref = if d == 2 { 1.0 / (4.0 * PI) } else { -1.0 / (8.0 * PI * PI) };
    let mut vol = ReconVolume { dim: d, n, values: vec![0.0; n.pow(d as u32)] };
    let line = n;
    let step = 2.0 / (n - 1) as f64;
    let inv_h = 1.0 / h;
    // one chunk per line along the last axis; directions outermost inside a
    // chunk so every point sums its directions in the same order
    par::for_each_chunk(&mut vol.values, line, |li, out| {
        let base = li * line;
        let mut x0 = vec![0.0; d];
        let mut r = base;
        for a in (0..d).rev() {
            x0[a] = -1.0 + step * (r % n) as f64;
            r /= n;
        }
        for (i, w) in sg.nodes.iter().enumerate() {
            let row = &filtered[i];
            let p0: f64 = x0.iter().zip(w).map(|(a, b)| a * b).sum();
            let dp = step * w[d - 1];
            let wt = pref * sg.weights[i];
            for (k, o) in out.iter_mut().enumerate() {
                let u = (p0 + dp * k as f64 - lo) * inv_h;
                *o += wt * cubic_at(row, u);
            }
        }
    });
    Ok(vol)
}

/// 4-point Lagrange interpolation at fractional index u, zero outside.
#[inline]
fn cubic_at(y: &[f64], u: f64) -> f64 {
    let n = y.len();
    if !(u >= 0.0 && u <= (n - 1) as f64) {
        return 0.0;
    }
    let j = (u as usize).clamp(1, n - 3);
    let s = u - j as f64;
    let (ym1, y0, y1, y2) = (y[j - 1], y[j], y[j + 1], y[j + 2]);
    let sm1 = s - 1.0;
    let sm2 = s - 2.0;
    let sp1 = s + 1.0;
    (-s * sm1 * sm2 * ym1 + 3.0 * sp1 * sm1 * sm2 * y0 - 3.0 * sp1 * s * sm2 * y1 + sp1 * s * sm1 * y2) / 6.0
}

/// Relative L2 error over grid nodes inside the closed unit ball.
pub fn l2_error(fh: &ReconVolume, ph: &Phantom) -> Result<f64> {
    if fh.dim != ph.dim {
        return Err(HtrwError::Config(format!("volume is d={}, phantom is d={}", fh.dim, ph.dim)));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, v) in fh.values.iter().enumerate() {
        let x = fh.point(k);
        if x.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
            let f = eval_phantom(ph, &x);
            num += (v - f).powi(2);
            den += f * f;
        }
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}
