//! Bessel and Hankel functions of integer and half-integer order, the
//! dimension-scaled spherical Hankel functions h_l^d, and real spherical
//! harmonics on S^1 and S^2.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HtrwError, Result};
use crate::grids::SphereGrid;

/// Largest supported degree.
pub const L_MAX: usize = 64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HankelValue {
    pub re: f64,
    pub im: f64,
}

impl HankelValue {
    pub fn to_complex(self) -> C64 {
        C64::new(self.re, self.im)
    }
}

impl From<C64> for HankelValue {
    fn from(z: C64) -> Self {
        HankelValue { re: z.re, im: z.im }
    }
}

/// Degree `l` and order `m`. For d=3, `-l <= m <= l`. For d=2 the channel
/// with `m = l` is `cos(l phi)/sqrt(pi)`, `m = -l` is `sin(l phi)/sqrt(pi)`,
/// and `(0, 0)` is `1/sqrt(2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub l: usize,
    pub m: i32,
}

impl HarmonicIndex {
    pub fn new(l: usize, m: i32) -> Self {
        HarmonicIndex { l, m }
    }

    pub fn is_valid(&self, d: usize) -> bool {
        match d {
            2 => (self.l == 0 && self.m == 0) || (self.l > 0 && self.m.unsigned_abs() as usize == self.l),
            3 => self.m.unsigned_abs() as usize <= self.l,
            _ => false,
        }
    }
}

/// All indices with degree <= lmax, in channel order.
pub fn harmonic_indices(d: usize, lmax: usize) -> Vec<HarmonicIndex> {
    let mut out = Vec::new();
    for l in 0..=lmax {
        if d == 2 {
            if l == 0 {
                out.push(HarmonicIndex::new(0, 0));
            } else {
                out.push(HarmonicIndex::new(l, l as i32));
                out.push(HarmonicIndex::new(l, -(l as i32)));
            }
        } else {
            for m in -(l as i32)..=(l as i32) {
                out.push(HarmonicIndex::new(l, m));
            }
        }
    }
    out
}

/// Position of `idx` in [`harmonic_indices`] order.
pub fn channel_position(d: usize, idx: HarmonicIndex) -> usize {
    if d == 2 {
        if idx.l == 0 {
            0
        } else {
            2 * idx.l - 1 + usize::from(idx.m < 0)
        }
    } else {
        idx.l * idx.l + (idx.m + idx.l as i32) as usize
    }
}

pub fn channel_count(d: usize, lmax: usize) -> usize {
    if d == 2 {
        2 * lmax + 1
    } else {
        (lmax + 1) * (lmax + 1)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(HtrwError::Domain(format!("dimension {d} not supported")))
    }
}

// ---------------------------------------------------------------------------
// Integer-order Bessel functions, complex argument

fn asymptotic_h12(nu: f64, z: C64) -> (C64, C64) {
    let mu = 4.0 * nu * nu;
    let chi = z - (0.5 * nu + 0.25) * PI;
    let pre = (2.0 / (PI * z)).sqrt();
    let mut s1 = C64::new(1.0, 0.0);
    let mut s2 = C64::new(1.0, 0.0);
    let mut a = 1.0;
    let iz = I / z;
    let mut p1 = C64::new(1.0, 0.0);
    let mut p2 = C64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        a *= (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf);
        p1 *= iz;
        p2 *= -iz;
        let t1 = p1 * a;
        let t2 = p2 * a;
        let mag = t1.norm();
        if mag > last {
            break;
        }
        s1 += t1;
        s2 += t2;
        last = mag;
        if mag < 1e-17 * s1.norm() {
            break;
        }
    }
    let e = (I * chi).exp();
    (pre * e * s1, pre / e * s2)
}

/// J_n(z) and Y_n(z) for n = 0..=nmax.
pub fn bessel_jy(nmax: usize, z: C64) -> (Vec<C64>, Vec<C64>) {
    let az = z.norm();
    let mut j = vec![C64::new(0.0, 0.0); nmax + 1];
    let mut y = vec![C64::new(0.0, 0.0); nmax + 1];
    if az > 30f64.max(2.0 * nmax as f64) {
        for nu in 0..=1usize.min(nmax) {
            let (h1, h2) = asymptotic_h12(nu as f64, z);
            j[nu] = 0.5 * (h1 + h2);
            y[nu] = (h1 - h2) / (2.0 * I);
        }
        if nmax == 0 {
            return (j, y);
        }
        for n in 1..nmax {
            let f = 2.0 * n as f64 / z;
            j[n + 1] = f * j[n] - j[n - 1];
            y[n + 1] = f * y[n] - y[n - 1];
        }
        return (j, y);
    }

    // Miller backward recurrence for J, normalized by J_0 + 2 sum J_2k = 1.
    let top = (nmax as f64).max(az);
    let mut m = (top + 25.0 + 3.0 * top.sqrt()) as usize + 2;
    if m % 2 == 1 {
        m += 1;
    }
    let mut jj = vec![C64::new(0.0, 0.0); m + 2];
    jj[m] = C64::new(1e-30, 0.0);
    for k in (1..=m).rev() {
        jj[k - 1] = (2.0 * k as f64 / z) * jj[k] - jj[k + 1];
        if jj[k - 1].norm() > 1e250 {
            for v in jj.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = jj[0];
    let mut k = 2;
    while k <= m {
        norm += 2.0 * jj[k];
        k += 2;
    }
    for v in jj.iter_mut() {
        *v /= norm;
    }
    j[..=nmax].copy_from_slice(&jj[..=nmax]);

    // Neumann series for Y_0 and its derivative for Y_1.
    let lg = (z / 2.0).ln() + EULER_GAMMA;
    let mut s0 = C64::new(0.0, 0.0);
    let mut s1 = C64::new(0.0, 0.0);
    let mut k = 1;
    while 2 * k < m {
        let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sgn * jj[2 * k] / k as f64;
        s1 += sgn * (jj[2 * k - 1] - jj[2 * k + 1]) / k as f64;
        k += 1;
    }
    y[0] = (2.0 / PI) * (lg * jj[0]) - (4.0 / PI) * s0;
    if nmax >= 1 {
        y[1] = (2.0 / PI) * (lg * jj[1] - jj[0] / z) + (2.0 / PI) * s1;
        for n in 1..nmax {
            y[n + 1] = (2.0 * n as f64 / z) * y[n] - y[n - 1];
        }
    }
    (j, y)
}

/// H^(1)_n(z) for n = 0..=nmax.
pub fn hankel1(nmax: usize, z: C64) -> Vec<C64> {
    let (j, y) = bessel_jy(nmax, z);
    j.iter().zip(&y).map(|(a, b)| a + I * b).collect()
}

// ---------------------------------------------------------------------------
// Spherical Hankel functions h_l^d

/// Closed form of h_l^3(z) = H_{l+1/2}(z)/sqrt(z), valid for any complex z != 0.
pub fn sph_hankel3(l: usize, z: C64) -> C64 {
    let w = I / (2.0 * z);
    let mut c = 1.0;
    let mut coeffs = Vec::with_capacity(l + 1);
    coeffs.push(c);
    for k in 0..l {
        c *= ((l + k + 1) as f64) * ((l - k) as f64) / ((k + 1) as f64);
        coeffs.push(c);
    }
    let mut s = C64::new(0.0, 0.0);
    for &ck in coeffs.iter().rev() {
        s = s * w + ck;
    }
    (2.0 / PI).sqrt() * minus_i_pow(l + 1) * (I * z).exp() / z * s
}

/// (-i)^n.
pub fn minus_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// h_l^d(z) for l = 0..=lmax at complex z (principal branch of z^{d/2-1}).
pub fn sph_hankel_all(d: usize, lmax: usize, z: C64) -> Vec<C64> {
    if d == 3 {
        let mut h = vec![C64::new(0.0, 0.0); lmax + 1];
        h[0] = sph_hankel3(0, z);
        if lmax >= 1 {
            h[1] = sph_hankel3(1, z);
        }
        for l in 1..lmax {
            h[l + 1] = ((2 * l + 1) as f64 / z) * h[l] - h[l - 1];
        }
        h
    } else {
        hankel1(lmax, z)
    }
}

/// (h_l^d, j_l^d) at real lambda > 0 for l = 0..=lmax, where j_l^d is
/// computed independently of the Neumann part so it keeps full relative
/// accuracy when it is small.
fn hankel_and_bessel_real(d: usize, lmax: usize, x: f64) -> (Vec<C64>, Vec<f64>) {
    if d == 3 {
        let h = sph_hankel_all(3, lmax, C64::new(x, 0.0));
        let j = sph_bessel3_all(lmax, x);
        (h, j)
    } else {
        let (j, y) = bessel_jy(lmax, C64::new(x, 0.0));
        let h = j.iter().zip(&y).map(|(a, b)| C64::new(a.re, b.re)).collect();
        (h, j.iter().map(|v| v.re).collect())
    }
}

/// j_l^3(x) = sqrt(2/pi) * spherical j_l(x), via downward recurrence.
fn sph_bessel3_all(lmax: usize, x: f64) -> Vec<f64> {
    let s = (2.0 / PI).sqrt();
    let mut out = vec![0.0; lmax + 1];
    if x > (lmax as f64).max(1.0) {
        // upward recurrence is stable here
        let j0 = x.sin() / x;
        out[0] = j0;
        if lmax >= 1 {
            out[1] = x.sin() / (x * x) - x.cos() / x;
        }
        for l in 1..lmax {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
    } else {
        let m = lmax + 30 + (2.0 * x) as usize;
        let mut next = 0.0;
        let mut cur = 1e-300;
        let mut vals = vec![0.0; m + 1];
        vals[m] = cur;
        for l in (1..=m).rev() {
            let prev = (2 * l + 1) as f64 / x * cur - next;
            next = cur;
            cur = prev;
            vals[l - 1] = cur;
            if cur.abs() > 1e250 {
                for v in vals.iter_mut().skip(l - 1) {
                    *v *= 1e-250;
                }
                cur *= 1e-250;
                next *= 1e-250;
            }
        }
        let j0 = if x == 0.0 { 1.0 } else { x.sin() / x };
        let j1 = x.sin() / (x * x) - x.cos() / x;
        // normalize against whichever of j0, j1 is larger
        let scale = if j0.abs() > j1.abs() { j0 / vals[0] } else { j1 / vals[1] };
        for l in 0..=lmax {
            out[l] = vals[l] * scale;
        }
    }
    out.iter().map(|v| v * s).collect()
}

/// h_l^d(lambda) for real lambda != 0. For lambda < 0 returns the conjugate
/// of the value at -lambda.
pub fn sph_hankel(d: usize, l: usize, lambda: f64) -> Result<HankelValue> {
    check_dim(d)?;
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(HtrwError::Domain(format!("sph_hankel undefined at lambda = {lambda}")));
    }
    if l > L_MAX {
        return Err(HtrwError::Capacity(format!("degree {l} exceeds L_MAX = {L_MAX}")));
    }
    let x = lambda.abs();
    let v = if d == 3 {
        sph_hankel3(l, C64::new(x, 0.0))
    } else {
        let (j, y) = bessel_jy(l, C64::new(x, 0.0));
        C64::new(j[l].re, y[l].re)
    };
    Ok(if lambda < 0.0 { v.conj() } else { v }.into())
}

/// j_l^d(lambda) = Re h_l^d(lambda), lambda > 0.
pub fn sph_bessel(d: usize, l: usize, lambda: f64) -> Result<f64> {
    check_dim(d)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(HtrwError::Domain(format!("sph_bessel needs lambda > 0, got {lambda}")));
    }
    if l > L_MAX {
        return Err(HtrwError::Capacity(format!("degree {l} exceeds L_MAX = {L_MAX}")));
    }
    let (_, j) = hankel_and_bessel_real(d, l, lambda);
    Ok(j[l])
}

/// |h' j - h j' - 2i/(pi lambda^{d-1})| relative to the identity value, with
/// derivatives from the recurrence h_l' = h_{l-1} - (l+d-2)/lambda h_l
/// (h_0' = -h_1).
pub fn wronskian_residual(d: usize, l: usize, lambda: f64) -> Result<f64> {
    check_dim(d)?;
    if !(lambda > 0.0) {
        return Err(HtrwError::Domain(format!("wronskian needs lambda > 0, got {lambda}")));
    }
    if l + 1 > L_MAX + 1 {
        return Err(HtrwError::Capacity(format!("degree {l} exceeds L_MAX = {L_MAX}")));
    }
    let (h, j) = hankel_and_bessel_real(d, l + 1, lambda);
    let deriv = |hl: C64, hm1: Option<C64>, hp1: C64| -> C64 {
        match hm1 {
            Some(prev) => prev - hl * ((l + d - 2) as f64 / lambda),
            None => -hp1,
        }
    };
    let hm1 = if l > 0 { Some(h[l - 1]) } else { None };
    let jm1 = if l > 0 { Some(C64::new(j[l - 1], 0.0)) } else { None };
    let dh = deriv(h[l], hm1, h[l + 1]);
    let dj = deriv(C64::new(j[l], 0.0), jm1, C64::new(j[l + 1], 0.0));
    let lhs = dh * j[l] - h[l] * dj;
    let rhs = C64::new(0.0, 2.0 / (PI * lambda.powi(d as i32 - 1)));
    Ok((lhs - rhs).norm() / rhs.norm())
}

// ---------------------------------------------------------------------------
// Real spherical harmonics

fn check_direction(d: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != d {
        return Err(HtrwError::Domain(format!("direction has {} components, expected {d}", theta.len())));
    }
    let n: f64 = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-12 {
        return Err(HtrwError::Domain(format!("direction is not unit length (|theta| = {n})")));
    }
    Ok(())
}

/// All real orthonormal harmonics of degree <= lmax at a unit direction, in
/// [`harmonic_indices`] order. No domain check.
pub fn sph_harm_all(d: usize, lmax: usize, theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; channel_count(d, lmax)];
    if d == 2 {
        out[0] = 1.0 / (2.0 * PI).sqrt();
        let s = 1.0 / PI.sqrt();
        let r = theta[0].hypot(theta[1]);
        let e1 = C64::new(theta[0] / r, theta[1] / r);
        let mut e = C64::new(1.0, 0.0);
        for l in 1..=lmax {
            e *= e1;
            out[2 * l - 1] = s * e.re;
            out[2 * l] = s * e.im;
        }
        return out;
    }
    let ct = theta[2].clamp(-1.0, 1.0);
    let st = (theta[0] * theta[0] + theta[1] * theta[1]).sqrt();
    // exp(i m phi) by repeated multiplication keeps mirror symmetry exact
    let e1 = if st > 0.0 { C64::new(theta[0] / st, theta[1] / st) } else { C64::new(1.0, 0.0) };
    let mut em = C64::new(1.0, 0.0);
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    let sqrt2 = 2f64.sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st;
        }
        if m > 0 {
            em *= e1;
        }
        let (sn, cs) = (em.im, em.re);
        let mut put = |l: usize, p: f64| {
            let base = l * l + l;
            if m == 0 {
                out[base] = p;
            } else {
                out[base + m] = sqrt2 * p * cs;
                out[base - m] = sqrt2 * p * sn;
            }
        };
        put(m, pmm);
        if m == lmax {
            break;
        }
        let mut p_lm2 = pmm;
        let mut p_lm1 = ((2 * m + 3) as f64).sqrt() * ct * pmm;
        put(m + 1, p_lm1);
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            let p = a * (ct * p_lm1 - b * p_lm2);
            put(l, p);
            p_lm2 = p_lm1;
            p_lm1 = p;
        }
    }
    out
}

/// Real orthonormal harmonic Y_idx(theta).
pub fn real_sph_harm(d: usize, idx: HarmonicIndex, theta: &[f64]) -> Result<f64> {
    check_dim(d)?;
    check_direction(d, theta)?;
    if !idx.is_valid(d) {
        return Err(HtrwError::Domain(format!("invalid harmonic index {idx:?} for d={d}")));
    }
    let all = sph_harm_all(d, idx.l, theta);
    Ok(all[channel_position(d, idx)])
}

/// Fixed test directions for identity checks.
fn test_directions(d: usize) -> Vec<Vec<f64>> {
    if d == 2 {
        (0..7)
            .map(|k| {
                let a = 0.3 + 0.9 * k as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        let mut v = vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
        for k in 0..6 {
            let th = 0.2 + 0.45 * k as f64;
            let ph = 0.7 + 1.1 * k as f64;
            v.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
        }
        v
    }
}

/// Relative residual of the Jacobi–Anger projection
/// int_S e^{-i lambda w.theta} Y(theta) dtheta = (2 pi)^{d/2} (-i)^l Y(w) j_l^d(lambda),
/// maximized over a fixed set of directions w.
pub fn jacobi_anger_residual(d: usize, idx: HarmonicIndex, lambda: f64, grid: &SphereGrid) -> Result<f64> {
    check_dim(d)?;
    if grid.dim != d {
        return Err(HtrwError::Config(format!("grid dimension {} != {d}", grid.dim)));
    }
    if !idx.is_valid(d) {
        return Err(HtrwError::Domain(format!("invalid harmonic index {idx:?} for d={d}")));
    }
    let need = idx.l as f64 + lambda.abs() + 10.0;
    let have = (grid.q - 1) as f64;
    if have < need {
        return Err(HtrwError::Capacity(format!(
            "quadrature degree {have} too small for l={} lambda={lambda}",
            idx.l
        )));
    }
    let pos = channel_position(d, idx);
    let yq: Vec<f64> = grid.nodes.iter().map(|n| sph_harm_all(d, idx.l, n)[pos]).collect();
    let jl = sph_bessel(d, idx.l, lambda)?;
    let pref = (2.0 * PI).powf(d as f64 / 2.0) * minus_i_pow(idx.l) * jl;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for w in test_directions(d) {
        let mut lhs = C64::new(0.0, 0.0);
        for ((n, wt), y) in grid.nodes.iter().zip(&grid.weights).zip(&yq) {
            let dot: f64 = n.iter().zip(&w).map(|(a, b)| a * b).sum();
            lhs += C64::from_polar(wt * y, -lambda * dot);
        }
        let rhs = pref * sph_harm_all(d, idx.l, &w)[pos];
        num = num.max((lhs - rhs).norm());
        den = den.max(rhs.norm());
    }
    Ok(if den > 0.0 { num / den } else { num })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_argument_bessel_matches_series() {
        // J_0 and J_1 at x = 0.5 from their power series
        let x: f64 = 0.5;
        let (j, _) = bessel_jy(3, C64::new(x, 0.0));
        let mut j0 = 0.0;
        let mut t = 1.0;
        for k in 0..20 {
            if k > 0 {
                t *= -(x * x / 4.0) / (k * k) as f64;
            }
            j0 += t;
        }
        assert!((j[0].re - j0).abs() < 1e-15);
    }

    #[test]
    fn channel_positions_match_order() {
        for d in [2, 3] {
            for (i, idx) in harmonic_indices(d, 6).into_iter().enumerate() {
                assert_eq!(channel_position(d, idx), i);
            }
        }
    }
}
