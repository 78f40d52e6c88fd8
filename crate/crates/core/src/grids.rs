//! Sphere, time, frequency and p grids; spherical-harmonic analysis and
//! synthesis; the extension of channel data past t = 1 and its transform
//! onto the shifted frequency line.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HtrwError, Result};
use crate::fit;
use crate::par;
use crate::quad::gauss_legendre;
use crate::special::{harmonic_indices, sph_harm_all, HarmonicIndex};

/// Default imaginary shift of the frequency line.
pub const DEFAULT_SIGMA: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub dim: usize,
    pub q: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// (cos, sin) of 2 pi k / q, built so that reflections of the index give
/// exactly reflected values.
fn unit_angle(k: usize, q: usize) -> (f64, f64) {
    let k = k % q;
    if 2 * k > q {
        let (c, s) = unit_angle(q - k, q);
        (c, -s)
    } else if 4 * k > q {
        let (c, s) = unit_angle(q / 2 - k, q);
        (-c, s)
    } else {
        let a = 2.0 * PI * k as f64 / q as f64;
        (a.cos(), a.sin())
    }
}

/// d=2: Q uniform angles. d=3: Q/2 Gauss–Legendre polar nodes times Q
/// uniform azimuths, polar-major ordering. Nodes are exactly symmetric
/// under y -> -y and (d=3) z -> -z.
pub fn make_sphere_grid(d: usize, q: usize) -> Result<SphereGrid> {
    if q < 4 || q % 2 == 1 {
        return Err(HtrwError::Config(format!("sphere grid needs even Q >= 4, got {q}")));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match d {
        2 => {
            for k in 0..q {
                let (c, s) = unit_angle(k, q);
                nodes.push(vec![c, s]);
                weights.push(2.0 * PI / q as f64);
            }
        }
        3 => {
            let np = q / 2;
            let (mut x, mut w) = gauss_legendre(np);
            for i in 0..np / 2 {
                x[np - 1 - i] = -x[i];
                w[np - 1 - i] = w[i];
            }
            if np % 2 == 1 {
                x[np / 2] = 0.0;
            }
            for (ct, wt) in x.iter().zip(&w) {
                let st = (1.0 - ct * ct).sqrt();
                for k in 0..q {
                    let (c, s) = unit_angle(k, q);
                    nodes.push(vec![st * c, st * s, *ct]);
                    weights.push(wt * 2.0 * PI / q as f64);
                }
            }
        }
        _ => return Err(HtrwError::Config(format!("dimension {d} not supported"))),
    }
    Ok(SphereGrid { dim: d, q, nodes, weights })
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest degree integrated exactly against another harmonic of the same degree.
    pub fn max_exact_degree(&self) -> usize {
        self.q / 2 - 1
    }

    /// Index of the node at -theta_i.
    pub fn antipode(&self, i: usize) -> usize {
        let q = self.q;
        if self.dim == 2 {
            (i + q / 2) % q
        } else {
            let np = q / 2;
            let (ip, k) = (i / q, i % q);
            (np - 1 - ip) * q + (k + q / 2) % q
        }
    }

    /// Index of the node mirrored in y.
    pub fn mirror_y(&self, i: usize) -> usize {
        let q = self.q;
        (i / q) * q + (q - i % q) % q
    }

    /// Index of the node mirrored in z (d=3; identity for d=2).
    pub fn mirror_z(&self, i: usize) -> usize {
        if self.dim == 2 {
            return i;
        }
        let q = self.q;
        (q / 2 - 1 - i / q) * q + i % q
    }

    /// Harmonics at every node: `[node][channel]`.
    pub fn harmonic_table(&self, lmax: usize) -> Vec<Vec<f64>> {
        par::map_range(self.len(), |i| sph_harm_all(self.dim, lmax, &self.nodes[i]))
    }

    /// Projections onto every harmonic of `nrows` functions on the grid,
    /// `value(row, node)`: `[channel][row]`.
    ///
    /// Each harmonic is even or odd under the two mirrors, so the sum runs
    /// over one representative per mirror orbit of folded values. A
    /// mirror-symmetric input then gives exact zeros in the odd channels.
    pub fn analyze<F>(&self, lmax: usize, nrows: usize, value: F) -> Vec<Vec<f64>>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let q = self.q;
        let reps: Vec<usize> = (0..self.len())
            .filter(|&i| i % q <= q / 2 && (self.dim == 2 || i / q < q.div_ceil(4)))
            .collect();
        let indices = harmonic_indices(self.dim, lmax);
        let table: Vec<Vec<f64>> = reps.iter().map(|&i| sph_harm_all(self.dim, lmax, &self.nodes[i])).collect();
        let class: Vec<usize> = indices
            .iter()
            .map(|ix| {
                let odd_y = ix.m < 0;
                let odd_z = self.dim == 3 && (ix.l + ix.m.unsigned_abs() as usize) % 2 == 1;
                odd_y as usize + 2 * odd_z as usize
            })
            .collect();
        let fold = |row: usize, i: usize, odd_y: bool, odd_z: bool| -> f64 {
            let fy = |j: usize| {
                let my = self.mirror_y(j);
                if my == j {
                    value(row, j)
                } else if odd_y {
                    value(row, j) - value(row, my)
                } else {
                    value(row, j) + value(row, my)
                }
            };
            let mz = self.mirror_z(i);
            if mz == i {
                fy(i)
            } else if odd_z {
                fy(i) - fy(mz)
            } else {
                fy(i) + fy(mz)
            }
        };
        let per_row: Vec<Vec<f64>> = par::map_range(nrows, |row| {
            let folded: Vec<Vec<f64>> = (0..4)
                .map(|cl| reps.iter().map(|&i| self.weights[i] * fold(row, i, cl & 1 == 1, cl & 2 == 2)).collect())
                .collect();
            (0..indices.len())
                .map(|c| {
                    let f = &folded[class[c]];
                    table.iter().zip(f).map(|(y, v)| y[c] * v).sum()
                })
                .collect()
        });
        (0..indices.len()).map(|c| per_row.iter().map(|r| r[c]).collect()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_t: usize,
    pub t_ext: f64,
}

impl TimeGrid {
    pub fn new(n_t: usize, t_ext: f64) -> Result<Self> {
        if !n_t.is_power_of_two() {
            return Err(HtrwError::Config(format!("N_t must be a power of two, got {n_t}")));
        }
        if !(t_ext >= 2.0) {
            return Err(HtrwError::Config(format!("T_ext must be >= 2, got {t_ext}")));
        }
        let per_unit = n_t as f64 / t_ext;
        if (per_unit - per_unit.round()).abs() > 1e-9 {
            return Err(HtrwError::Config(format!(
                "N_t / T_ext must be an integer so t = 1 is a sample (got {per_unit})"
            )));
        }
        Ok(TimeGrid { n_t, t_ext })
    }

    pub fn dt(&self) -> f64 {
        self.t_ext / self.n_t as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// Samples per unit time.
    pub fn per_unit(&self) -> usize {
        (self.n_t as f64 / self.t_ext).round() as usize
    }

    /// Number of physical samples t_k in [0, 1].
    pub fn n_phys(&self) -> usize {
        self.per_unit() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub n: usize,
    pub t_ext: f64,
    pub sigma: f64,
}

impl FrequencyGrid {
    pub fn new(tg: &TimeGrid, sigma: f64) -> Self {
        FrequencyGrid { n: tg.n_t, t_ext: tg.t_ext, sigma }
    }

    pub fn d_lambda(&self) -> f64 {
        2.0 * PI / self.t_ext
    }

    /// Real part lambda_j = (j + 1/2 - N/2) 2 pi / T_ext.
    pub fn lambda(&self, j: usize) -> f64 {
        (j as f64 + 0.5 - self.n as f64 / 2.0) * self.d_lambda()
    }

    /// Evaluation point z_j = lambda_j + i sigma.
    pub fn z(&self, j: usize) -> C64 {
        C64::new(self.lambda(j), self.sigma)
    }

    /// Index of the mirror frequency -lambda_j.
    pub fn mirror(&self, j: usize) -> usize {
        self.n - 1 - j
    }
}

/// Uniform grid on [lo, hi] including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl PGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        PGrid { lo, hi, n }
    }

    /// [-1, 1] with spacing 1/n_half.
    pub fn full(n_half: usize) -> Self {
        PGrid::new(-1.0, 1.0, 2 * n_half + 1)
    }

    /// [0, 1] with spacing 1/n_half.
    pub fn half(n_half: usize) -> Self {
        PGrid::new(0.0, 1.0, n_half + 1)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.step()
    }

    pub fn is_symmetric(&self) -> bool {
        (self.lo + self.hi).abs() < 1e-12 && self.n % 2 == 1
    }
}

/// Sampled b(t_k, theta_i) on the physical window, time-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub sphere: SphereGrid,
    pub time: TimeGrid,
    /// b vanishes for all t_k <= t_quiet.
    pub t_quiet: f64,
    /// `values[k * n_nodes + i]`, k < n_phys.
    pub values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(sphere: SphereGrid, time: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let n = time.n_phys() * sphere.len();
        if values.len() != n {
            return Err(HtrwError::Config(format!("boundary data has {} samples, expected {n}", values.len())));
        }
        let t_quiet = quiet_time(&values, sphere.len(), time.dt());
        Ok(BoundaryData { sphere, time, t_quiet, values })
    }

    pub fn zeros(sphere: SphereGrid, time: TimeGrid) -> Self {
        let n = time.n_phys() * sphere.len();
        BoundaryData { t_quiet: 1.0, sphere, time, values: vec![0.0; n] }
    }

    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.sphere.len() + i]
    }

    /// L2 norm over (0,1] x S.
    pub fn l2_norm(&self) -> f64 {
        let n = self.sphere.len();
        let dt = self.time.dt();
        let mut s = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            s += v * v * self.sphere.weights[idx % n];
        }
        (s * dt).sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= alpha;
        }
        out
    }
}

fn quiet_time(values: &[f64], n_nodes: usize, dt: f64) -> f64 {
    let n_steps = values.len() / n_nodes.max(1);
    for k in 0..n_steps {
        if values[k * n_nodes..(k + 1) * n_nodes].iter().any(|v| *v != 0.0) {
            return if k == 0 { 0.0 } else { (k - 1) as f64 * dt };
        }
    }
    (n_steps.max(1) - 1) as f64 * dt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicChannels {
    pub dim: usize,
    pub lmax: usize,
    pub time: TimeGrid,
    pub indices: Vec<HarmonicIndex>,
    /// Physical-window series per channel (n_phys samples).
    pub series: Vec<Vec<f64>>,
    /// Spectra on the shifted frequency line, when transformed.
    pub spectra: Option<Vec<Vec<C64>>>,
    pub freq: Option<FrequencyGrid>,
    /// L2 norm of the boundary data the channels came from.
    pub b_norm: f64,
}

impl HarmonicChannels {
    pub fn zeros(dim: usize, lmax: usize, time: TimeGrid) -> Self {
        let indices = harmonic_indices(dim, lmax);
        let series = vec![vec![0.0; time.n_phys()]; indices.len()];
        HarmonicChannels { dim, lmax, time, indices, series, spectra: None, freq: None, b_norm: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// b_l^m(t_k) = sum_i w_i b(t_k, theta_i) Y_l^m(theta_i).
pub fn sh_analysis(b: &BoundaryData, lmax: usize) -> Result<HarmonicChannels> {
    let sg = &b.sphere;
    if 2 * lmax + 2 > sg.q {
        return Err(HtrwError::Capacity(format!("lmax = {lmax} too large for Q = {}", sg.q)));
    }
    let nn = sg.len();
    let series = sg.analyze(lmax, b.time.n_phys(), |k, i| b.values[k * nn + i]);
    Ok(HarmonicChannels {
        dim: sg.dim,
        lmax,
        time: b.time,
        indices: harmonic_indices(sg.dim, lmax),
        series,
        spectra: None,
        freq: None,
        b_norm: b.l2_norm(),
    })
}

/// Pointwise synthesis of the truncated series on `grid`.
pub fn sh_synthesis(c: &HarmonicChannels, grid: &SphereGrid) -> Result<BoundaryData> {
    if c.dim != grid.dim {
        return Err(HtrwError::Config(format!("channels are d={}, grid is d={}", c.dim, grid.dim)));
    }
    let table = grid.harmonic_table(c.lmax);
    let nn = grid.len();
    let np = c.time.n_phys();
    let mut values = vec![0.0; np * nn];
    par::for_each_chunk(&mut values, nn, |k, row| {
        for (i, out) in row.iter_mut().enumerate() {
            let y = &table[i];
            *out = c.series.iter().zip(y).map(|(s, yv)| s[k] * yv).sum();
        }
    });
    BoundaryData::new(grid.clone(), c.time, values)
}

/// How channel data are continued past t = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extension {
    /// Cubic Taylor polynomial at t = 1 (derivatives from a one-sided fit)
    /// times a flat C-infinity cutoff.
    CubicTaylor,
    /// Taylor polynomial of the given order, same construction.
    Taylor(usize),
    /// Value and slope only, times the same cutoff.
    Linear,
    /// Zero beyond t = 1.
    Zero,
}

impl Default for Extension {
    fn default() -> Self {
        Extension::Taylor(4)
    }
}

fn flat(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// 1 at s <= 0, 0 at s >= 1, all derivatives zero at both ends.
pub fn smooth_cutoff(s: f64) -> f64 {
    let a = flat(1.0 - s);
    let b = flat(s);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Full-length extended series on the time grid (n_t samples).
pub fn extend_series(series: &[f64], tg: &TimeGrid, kind: Extension) -> Vec<f64> {
    let n = tg.n_t;
    let np = tg.n_phys();
    let dt = tg.dt();
    let mut out = vec![0.0; n];
    out[..np].copy_from_slice(&series[..np]);
    let width = 0.5 * (tg.t_ext - 1.0).min(1.0);
    let order = match kind {
        Extension::Zero => return out,
        Extension::Taylor(k) => k,
        Extension::CubicTaylor => 3,
        Extension::Linear => 1,
    };
    let d = fit::endpoint_derivatives(&series[..np], dt, 12, 24, order);
    let mut fact = 1.0;
    let coef: Vec<f64> = (0..=order)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            d[k] / fact
        })
        .collect();
    for (k, o) in out.iter_mut().enumerate().skip(np) {
        let u = tg.t(k) - 1.0;
        let s = u / width;
        if s >= 1.0 {
            break;
        }
        let mut p = 0.0;
        for &ck in coef.iter().rev() {
            p = p * u + ck;
        }
        *o = p * smooth_cutoff(s);
    }
    out
}

/// Damped transform of a full-length series onto the shifted line:
/// c(z_j) = dt * sum_k x_k exp(i z_j t_k).
pub fn transform_series(x: &[f64], fg: &FrequencyGrid, planner: &mut FftPlanner<f64>) -> Vec<C64> {
    let n = fg.n;
    let dt = fg.t_ext / n as f64;
    let fft = planner.plan_fft_inverse(n);
    let mut buf: Vec<C64> = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            C64::from_polar(sign * x[k] * (-fg.sigma * t).exp(), PI * k as f64 / n as f64)
        })
        .collect();
    fft.process(&mut buf);
    for v in buf.iter_mut() {
        *v *= dt;
    }
    // exact Hermitian symmetry c(-conj z) = conj c(z)
    for j in 0..n / 2 {
        let m = n - 1 - j;
        let a = 0.5 * (buf[j] + buf[m].conj());
        buf[j] = a;
        buf[m] = a.conj();
    }
    buf
}

/// Extend every channel past t = 1 and transform it onto the shifted line.
pub fn extend_and_transform(c: &HarmonicChannels) -> HarmonicChannels {
    extend_and_transform_with(c, Extension::default(), DEFAULT_SIGMA)
}

pub fn extend_and_transform_with(c: &HarmonicChannels, kind: Extension, sigma: f64) -> HarmonicChannels {
    let fg = FrequencyGrid::new(&c.time, sigma);
    let spectra = par::map_range(c.len(), |i| {
        let mut planner = FftPlanner::new();
        let x = extend_series(&c.series[i], &c.time, kind);
        transform_series(&x, &fg, &mut planner)
    });
    let mut out = c.clone();
    out.spectra = Some(spectra);
    out.freq = Some(fg);
    out
}
