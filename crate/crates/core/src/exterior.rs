//! Channel functions R_l^m(t) on [−1, 0] of the exterior problem with
//! Dirichlet data b on the unit sphere, their transfer functions and
//! convolution kernels.
//!
//! Transforms are taken along the line Im z = sigma above the real axis,
//! where T_l is analytic. This realizes the causal (λ + i0) convention and
//! makes every kernel vanish for t < −1 up to the periodization error
//! exp(−sigma (T_ext − 1)).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HtrwError, Result};
use crate::fit;
use crate::grids::{FrequencyGrid, HarmonicChannels, TimeGrid, DEFAULT_SIGMA};
use crate::par;
use crate::special::{minus_i_pow, sph_hankel_all, HarmonicIndex, L_MAX};

/// Options for the derivatives of R at tau = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivOptions {
    pub deriv_max: usize,
    pub fit_degree: usize,
    pub fit_window: usize,
}

impl Default for DerivOptions {
    fn default() -> Self {
        DerivOptions { deriv_max: 8, fit_degree: 12, fit_window: 24 }
    }
}

impl DerivOptions {
    /// Defaults for sample step `dt`: 24 samples at dt = 1/512, growing
    /// like dt^{-1/2} so that the window narrows under refinement while the
    /// rounding amplification of the fit stays bounded.
    pub fn for_step(dt: f64) -> Self {
        let w = (24.0 * (1.0 / (512.0 * dt)).sqrt()).round() as usize;
        DerivOptions { fit_window: w.max(16), ..Default::default() }
    }
}

/// T_l(z) = 2^{d/2} pi^{d/2-1} (-i)^l / (z^{d-1} h_l^d(z)) for l = 0..=lmax.
pub fn transfer_at(d: usize, lmax: usize, z: C64) -> Vec<C64> {
    let h = sph_hankel_all(d, lmax, z);
    let pref = 2f64.powf(d as f64 / 2.0) * PI.powf(d as f64 / 2.0 - 1.0);
    let zp = if d == 3 { z * z } else { z };
    h.iter()
        .enumerate()
        .map(|(l, hl)| {
            let den = zp * hl;
            if !den.is_finite() || den.norm() < 1e-300 {
                log::warn!("transfer function clamped to 0 at l={l}, z={z}");
                C64::new(0.0, 0.0)
            } else {
                pref * minus_i_pow(l) / den
            }
        })
        .collect()
}

/// Transfer values `[l][j]` on the shifted grid, mirrored so that
/// T(-conj z) = conj T(z) holds exactly.
pub fn transfer_table(d: usize, lmax: usize, fg: &FrequencyGrid) -> Vec<Vec<C64>> {
    let n = fg.n;
    let upper: Vec<Vec<C64>> = par::map_range(n / 2, |jj| transfer_at(d, lmax, fg.z(n / 2 + jj)));
    (0..=lmax)
        .map(|l| {
            let mut v = vec![C64::new(0.0, 0.0); n];
            for jj in 0..n / 2 {
                let j = n / 2 + jj;
                v[j] = upper[jj][l];
                v[fg.mirror(j)] = upper[jj][l].conj();
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub dim: usize,
    pub l: usize,
    pub freq: FrequencyGrid,
    pub values: Vec<C64>,
}

impl TransferFunction {
    /// max_j |T(z_{mirror j}) - conj T(z_j)|, relative to max |T|.
    pub fn symmetry_residual(&self) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            num = num.max((self.values[self.freq.mirror(j)] - v.conj()).norm());
            den = den.max(v.norm());
        }
        num / den.max(1e-300)
    }
}

pub fn transfer_function(d: usize, l: usize, fg: &FrequencyGrid) -> Result<TransferFunction> {
    if l > L_MAX {
        return Err(HtrwError::Capacity(format!("degree {l} exceeds L_MAX = {L_MAX}")));
    }
    let mut t = transfer_table(d, l, fg);
    Ok(TransferFunction { dim: d, l, freq: *fg, values: t.swap_remove(l) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFunctions {
    pub dim: usize,
    pub lmax: usize,
    pub indices: Vec<HarmonicIndex>,
    /// Spacing of the tau grid; samples run from tau = -1 to 0.
    pub dt: f64,
    /// `samples[c][k]` = R_c(-1 + k dt).
    pub samples: Vec<Vec<f64>>,
    /// d^n R_c / d tau^n at tau = 0 from a one-sided fit, n <= deriv_max.
    pub derivs: Vec<Vec<f64>>,
    /// Same derivatives from the spectral sum with (-i z)^n inserted.
    pub spectral_derivs: Vec<Vec<f64>>,
    /// max over tau in [-1, 0] of |d^n R_c|.
    pub deriv_scales: Vec<Vec<f64>>,
    pub deriv_opts: DerivOptions,
    /// Largest |Im R| over all channels and samples.
    pub imag_residue: f64,
    pub b_norm: f64,
}

impl ChannelFunctions {
    pub fn n_r(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn tau(&self, k: usize) -> f64 {
        -1.0 + k as f64 * self.dt
    }

    /// R_c(-p) on p = j dt, j = 0..n_r-1.
    pub fn reversed(&self, c: usize) -> Vec<f64> {
        self.samples[c].iter().rev().copied().collect()
    }

    pub fn sup_norm(&self, c: usize) -> f64 {
        self.samples[c].iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Recompute derivatives, scales from the current samples.
    pub fn refresh_derivatives(&mut self) {
        let o = self.deriv_opts;
        let dt = self.dt;
        let out: Vec<(Vec<f64>, Vec<f64>)> = par::map_range(self.samples.len(), |c| {
            let s = &self.samples[c];
            (
                fit::endpoint_derivatives(s, dt, o.fit_degree, o.fit_window, o.deriv_max),
                fit::max_abs_derivatives(s, dt, o.fit_degree, o.fit_window, o.deriv_max),
            )
        });
        self.derivs = out.iter().map(|x| x.0.clone()).collect();
        self.deriv_scales = out.into_iter().map(|x| x.1).collect();
    }
}

/// R_l^m(t) = (1/2 pi) sum_j T_l(z_j) b^_l^m(z_j) e^{-i z_j t} dlambda on [-1, 0].
pub fn channel_response(c: &HarmonicChannels) -> Result<ChannelFunctions> {
    channel_response_with(c, DerivOptions::for_step(c.time.dt()))
}

pub fn channel_response_with(c: &HarmonicChannels, opts: DerivOptions) -> Result<ChannelFunctions> {
    let spectra = c
        .spectra
        .as_ref()
        .ok_or_else(|| HtrwError::State("channels carry no spectra; run extend_and_transform first".into()))?;
    let fg = c.freq.ok_or_else(|| HtrwError::State("channels carry no frequency grid".into()))?;
    if c.time.t_ext < 2.0 {
        return Err(HtrwError::Config("T_ext must be >= 2".into()));
    }
    let table = transfer_table(c.dim, c.lmax, &fg);
    let n = fg.n;
    let m_max = c.time.per_unit();
    let dt = c.time.dt();
    let scale = fg.d_lambda() / (2.0 * PI);
    let per: Vec<(Vec<f64>, Vec<f64>, f64)> = par::map_range(c.len(), |ci| {
        let l = c.indices[ci].l;
        let t = &table[l];
        let prod: Vec<C64> = spectra[ci].iter().zip(t).map(|(b, tv)| b * tv).collect();
        let mut spec_d = vec![0.0; opts.deriv_max + 1];
        for (j, pv) in prod.iter().enumerate() {
            let miz = -C64::new(0.0, 1.0) * fg.z(j);
            let mut f = C64::new(1.0, 0.0);
            for sd in spec_d.iter_mut() {
                *sd += (pv * f).re * scale;
                f *= miz;
            }
        }
        let mut buf = prod;
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(n).process(&mut buf);
        let mut samples = vec![0.0; m_max + 1];
        let mut imag: f64 = 0.0;
        for m in 0..=m_max {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let ph = C64::from_polar(sign * scale * (-fg.sigma * m as f64 * dt).exp(), PI * m as f64 / n as f64);
            let v = ph * buf[m];
            samples[m_max - m] = v.re;
            imag = imag.max(v.im.abs());
        }
        (samples, spec_d, imag)
    });
    let mut out = ChannelFunctions {
        dim: c.dim,
        lmax: c.lmax,
        indices: c.indices.clone(),
        dt,
        samples: per.iter().map(|p| p.0.clone()).collect(),
        derivs: Vec::new(),
        spectral_derivs: per.iter().map(|p| p.1.clone()).collect(),
        deriv_scales: Vec::new(),
        deriv_opts: opts,
        imag_residue: per.iter().fold(0.0, |a, p| a.max(p.2)),
        b_norm: c.b_norm,
    };
    out.refresh_derivatives();
    Ok(out)
}

/// K_l(t) = prefactor * H(t+1) * Re sum_r A_r exp(-i z_r (t+1)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleExpansion {
    pub prefactor: f64,
    pub poles: Vec<C64>,
    pub residues: Vec<C64>,
}

impl PoleExpansion {
    /// Value at t; at t = -1 the right limit.
    pub fn eval(&self, t: f64) -> f64 {
        if t < -1.0 {
            return 0.0;
        }
        let s = t + 1.0;
        let v: C64 = self
            .poles
            .iter()
            .zip(&self.residues)
            .map(|(z, a)| a * (-C64::new(0.0, 1.0) * z * s).exp())
            .sum();
        self.prefactor * v.re
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub dim: usize,
    pub l: usize,
    /// Samples K(t0 + k dt), k < n.
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    /// Width (in t) of the Gaussian mollifier applied to the sampled kernel.
    pub mollifier_width: f64,
    pub poles: Option<PoleExpansion>,
}

impl KernelTable {
    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Largest |K| over sampled t in [a, b].
    pub fn max_abs_on(&self, a: f64, b: f64) -> f64 {
        (0..self.samples.len())
            .filter(|&k| self.t(k) >= a - 1e-12 && self.t(k) <= b + 1e-12)
            .fold(0.0, |m, k| m.max(self.samples[k].abs()))
    }
}

/// Coefficients of the reverse Bessel polynomial theta_l, highest power first.
fn reverse_bessel_coeffs(l: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    let mut v = 1.0;
    for k in 0..l {
        v *= ((l + k + 1) as f64) * ((l - k) as f64) / ((k + 1) as f64) / 2.0;
        c.push(v);
    }
    c
}

/// Poles and residues of z^{l-1}/P_l(z) for the d=3 kernel, where
/// P_l(z) = i^l theta_l(-i z) has all its roots in the lower half-plane.
pub fn pole_expansion_3d(l: usize) -> Result<PoleExpansion> {
    let pre = 2.0 * PI;
    if l == 0 {
        return Ok(PoleExpansion { prefactor: pre, poles: vec![C64::new(0.0, 0.0)], residues: vec![C64::new(1.0, 0.0)] });
    }
    if l > 40 {
        return Err(HtrwError::Capacity(format!("pole expansion not supported for l = {l}")));
    }
    let c = reverse_bessel_coeffs(l);
    // companion matrix of the monic polynomial theta_l
    let mut m = DMatrix::<f64>::zeros(l, l);
    for j in 0..l {
        m[(0, j)] = -c[j + 1];
    }
    for i in 1..l {
        m[(i, i - 1)] = 1.0;
    }
    let roots_x = m.complex_eigenvalues();
    let theta = |x: C64| -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &ck in &c {
            dp = dp * x + p;
            p = p * x + ck;
        }
        (p, dp)
    };
    let mut poles = Vec::with_capacity(l);
    let mut residues = Vec::with_capacity(l);
    for x0 in roots_x.iter() {
        let mut x = *x0;
        for _ in 0..50 {
            let (p, dp) = theta(x);
            let step = p / dp;
            x -= step;
            if step.norm() < 1e-15 * x.norm().max(1.0) {
                break;
            }
        }
        let (p, dp) = theta(x);
        let scale: f64 = c.iter().enumerate().map(|(k, ck)| ck * x.norm().powi((l - k) as i32)).sum();
        if p.norm() > 1e-8 * scale || x.re >= 0.0 {
            return Err(HtrwError::Capacity(format!("root polishing failed for l = {l}")));
        }
        // z = i x; P_l'(z) = i^l * theta'(x) * (-i)
        let z = C64::new(0.0, 1.0) * x;
        let dpz = C64::new(0.0, 1.0).powu(l as u32) * dp * C64::new(0.0, -1.0);
        poles.push(z);
        residues.push(z.powu(l as u32 - 1) / dpz);
    }
    Ok(PoleExpansion { prefactor: pre, poles, residues })
}

/// Sampled K_l on t in [1 - T_ext, 1) by inverse transform of T_l on the
/// shifted line, mollified by a Gaussian of width 6/lambda_max so that the
/// jump (d=3) or inverse square-root singularity (d=2) at t = -1 stays
/// local. For d=3 the exact pole expansion is attached.
pub fn kernel_time_domain(d: usize, l: usize, tg: &TimeGrid) -> Result<KernelTable> {
    if l > L_MAX {
        return Err(HtrwError::Capacity(format!("degree {l} exceeds L_MAX = {L_MAX}")));
    }
    let fg = FrequencyGrid::new(tg, DEFAULT_SIGMA);
    let n = fg.n;
    let dt = tg.dt();
    let t0 = 1.0 - tg.t_ext;
    let lam_max = fg.lambda(n - 1);
    let s = lam_max / 6.0;
    let tf = transfer_function(d, l, &fg)?;
    let mut buf: Vec<C64> = (0..n)
        .map(|j| {
            let z = fg.z(j);
            let w = (-z * z / (2.0 * s * s)).exp();
            tf.values[j] * w * C64::from_polar(1.0, -fg.lambda(j) * t0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = fg.d_lambda() / (2.0 * PI);
    let samples = (0..n)
        .map(|k| {
            let t = t0 + k as f64 * dt;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let ph = C64::from_polar(sign * scale * (fg.sigma * t).exp(), -PI * k as f64 / n as f64);
            (ph * buf[k]).re
        })
        .collect();
    let poles = if d == 3 { Some(pole_expansion_3d(l)?) } else { None };
    Ok(KernelTable { dim: d, l, t0, dt, samples, mollifier_width: 1.0 / s, poles })
}

/// Fourth-order end-corrected trapezoid weights for n+1 equispaced points
/// (falls back to the plain trapezoid rule for short intervals).
fn quad_weights(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    let mut w = vec![1.0; n + 1];
    if n + 1 >= 8 {
        let e = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
        for (k, v) in e.iter().enumerate() {
            w[k] = *v;
            w[n - k] = *v;
        }
    } else {
        w[0] = 0.5;
        w[n] = 0.5;
    }
    w
}

/// R(tau) = int_0^{1+tau} b(s) K(tau - s) ds on the tau grid [-1, 0], using
/// only the physical window of b.
pub fn convolve_channel(series: &[f64], k: &KernelTable, tg: &TimeGrid) -> Vec<f64> {
    let m = tg.per_unit();
    let dt = tg.dt();
    // K(-1 + j dt), j = 0..=m, right limit at j = 0
    let lag: Vec<f64> = (0..=m)
        .map(|j| match &k.poles {
            Some(p) => p.eval(-1.0 + j as f64 * dt),
            None => {
                let idx = ((-1.0 + j as f64 * dt - k.t0) / k.dt).round() as usize;
                k.samples.get(idx).copied().unwrap_or(0.0)
            }
        })
        .collect();
    (0..=m)
        .map(|kk| {
            let w = quad_weights(kk);
            (0..=kk).map(|i| w[i] * series[i] * lag[kk - i]).sum::<f64>() * dt
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reverse_bessel_low_degrees() {
        assert_eq!(reverse_bessel_coeffs(1), vec![1.0, 1.0]);
        assert_eq!(reverse_bessel_coeffs(2), vec![1.0, 3.0, 3.0]);
        assert_eq!(reverse_bessel_coeffs(3), vec![1.0, 6.0, 15.0, 15.0]);
    }

    #[test]
    fn quad_weights_integrate_cubics() {
        for n in [8usize, 9, 20] {
            let h = 1.0 / n as f64;
            let w = quad_weights(n);
            let s: f64 = (0..=n).map(|i| w[i] * (i as f64 * h).powi(3)).sum::<f64>() * h;
            assert!((s - 0.25).abs() < 1e-14);
        }
    }
}
