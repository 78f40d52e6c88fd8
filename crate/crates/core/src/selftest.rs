//! Built-in invariant suites run by `htrw selftest`.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::Result;
use crate::exterior::{channel_response, convolve_channel, kernel_time_domain, pole_expansion_3d};
use crate::forward::{wave_data, Bump, Phantom};
use crate::grids::{extend_and_transform, extend_and_transform_with, make_sphere_grid, sh_analysis, Extension, TimeGrid, DEFAULT_SIGMA};
use crate::special::{harmonic_indices, jacobi_anger_residual, sph_bessel, sph_hankel_all};

/// h_l^d(z) for l = 0..=lmax; swappable so a faulty implementation can be
/// plugged in.
pub type HankelFn = fn(usize, usize, C64) -> Vec<C64>;

fn corrupted_hankel(d: usize, lmax: usize, z: C64) -> Vec<C64> {
    sph_hankel_all(d, lmax, z).into_iter().map(|h| h * 1.001).collect()
}

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    /// Wronskian degrees up to 8 instead of 32.
    pub quick: bool,
    pub hankel: HankelFn,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { quick: false, hankel: sph_hankel_all }
    }
}

impl SelftestOptions {
    /// Test fixture: every Hankel value scaled by 1.001.
    pub fn with_corrupt_hankel(mut self) -> Self {
        self.hankel = corrupted_hankel;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

fn suite(name: &'static str, worst: f64, tolerance: f64, detail: String) -> SuiteResult {
    SuiteResult { name, worst, tolerance, pass: worst <= tolerance, detail }
}

/// Relative residual of h' j - h j' = 2i / (pi lambda^{d-1}) with h from
/// `hankel` and j from the library's independent real-axis evaluation.
pub fn wronskian_with(hankel: HankelFn, d: usize, l: usize, lambda: f64) -> Result<f64> {
    let h = hankel(d, l + 1, C64::new(lambda, 0.0));
    let j: Vec<f64> = (0..=l + 1).map(|k| sph_bessel(d, k, lambda)).collect::<Result<_>>()?;
    let shift = (l + d - 2) as f64 / lambda;
    let (dh, dj) = if l == 0 {
        (-h[1], -j[1])
    } else {
        (h[l - 1] - h[l] * shift, j[l - 1] - j[l] * shift)
    };
    let lhs = dh * j[l] - h[l] * dj;
    let rhs = C64::new(0.0, 2.0 / (PI * lambda.powi(d as i32 - 1)));
    Ok((lhs - rhs).norm() / rhs.norm())
}

fn wronskian_suite(o: &SelftestOptions) -> Result<SuiteResult> {
    let lmax = if o.quick { 8 } else { 32 };
    let mut worst: f64 = 0.0;
    let mut at = (0, 0, 0.0);
    for d in [2, 3] {
        for l in 0..=lmax {
            for k in 0..=60 {
                let lam = 0.5 * 200f64.powf(k as f64 / 60.0);
                let r = wronskian_with(o.hankel, d, l, lam)?;
                if r > worst {
                    worst = r;
                    at = (d, l, lam);
                }
            }
        }
    }
    Ok(suite("wronskian", worst, 1e-8, format!("l <= {lmax}, lambda in [0.5, 100]; worst at d={} l={} lambda={:.3}", at.0, at.1, at.2)))
}

fn jacobi_anger_suite() -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    for d in [2, 3] {
        let g = make_sphere_grid(d, 96)?;
        for idx in harmonic_indices(d, 8) {
            for lam in [1.0, 5.0, 20.0] {
                worst = worst.max(jacobi_anger_residual(d, idx, lam, &g)?);
            }
        }
    }
    Ok(suite("jacobi-anger", worst, 1e-7, "l <= 8, lambda in {1, 5, 20}, Q = 96".into()))
}

/// max |G - I| of the discrete Gram matrix for l <= Q/2 - 1.
pub fn gram_deviation(d: usize, q: usize) -> Result<f64> {
    let g = make_sphere_grid(d, q)?;
    let table = g.harmonic_table(q / 2 - 1);
    let nc = table[0].len();
    let mut worst: f64 = 0.0;
    for a in 0..nc {
        for b in a..nc {
            let s: f64 = (0..g.len()).map(|i| g.weights[i] * table[i][a] * table[i][b]).sum();
            worst = worst.max((s - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(worst)
}

fn gram_suite() -> Result<SuiteResult> {
    let worst = gram_deviation(2, 32)?.max(gram_deviation(3, 32)?);
    Ok(suite("gram", worst, 1e-10, "Q = 32, l <= 15".into()))
}

fn kernel_support_suite() -> Result<SuiteResult> {
    let tg = TimeGrid::new(2048, 4.0)?;
    let mut worst: f64 = 0.0;
    let mut pole_leak: f64 = 0.0;
    for d in [2, 3] {
        for l in 0..=8 {
            let k = kernel_time_domain(d, l, &tg)?;
            let m = k.max_abs_on(k.t0, 1.0);
            worst = worst.max(k.max_abs_on(-3.0, -1.1) / m);
            if d == 3 {
                let p = pole_expansion_3d(l)?;
                for i in 0..=190 {
                    pole_leak = pole_leak.max(p.eval(-3.0 + 0.01 * i as f64).abs());
                }
            }
        }
    }
    let mut r = suite("kernel-support", worst, 1e-5, format!("l <= 8, t in [-3, -1.1]; pole expansion leak {pole_leak:e}"));
    r.pass &= pole_leak == 0.0;
    Ok(r)
}

fn reference_phantom(d: usize) -> Result<Phantom> {
    let mut c = vec![0.0; d];
    c[0] = 0.3;
    Phantom::new(d, vec![Bump::new(c, 0.4, 1.0)])
}

/// Extension independence and two-path agreement on the reference phantom.
fn pipeline_suites() -> Result<Vec<SuiteResult>> {
    let tg = TimeGrid::new(2048, 4.0)?;
    let mut ext: f64 = 0.0;
    let mut two: f64 = 0.0;
    for d in [2, 3] {
        let sg = make_sphere_grid(d, 32)?;
        let b = wave_data(&reference_phantom(d)?, &tg, &sg)?;
        let bn = b.l2_norm();
        let ch = sh_analysis(&b, 12)?;
        let a = channel_response(&extend_and_transform(&ch))?;
        let c = channel_response(&extend_and_transform_with(&ch, Extension::CubicTaylor, DEFAULT_SIGMA))?;
        for (x, y) in a.samples.iter().zip(&c.samples) {
            for (u, v) in x.iter().zip(y) {
                ext = ext.max((u - v).abs() / bn);
            }
        }
        if d == 3 {
            for (i, idx) in a.indices.iter().enumerate().filter(|(_, ix)| ix.l <= 8) {
                let k = kernel_time_domain(3, idx.l, &tg)?;
                let rc = convolve_channel(&ch.series[i], &k, &tg);
                for (u, v) in rc.iter().zip(&a.samples[i]) {
                    two = two.max((u - v).abs() / bn);
                }
            }
        }
    }
    Ok(vec![
        suite("extension-independence", ext, 1e-6, "Taylor(4) vs cubic Taylor, d = 2, 3, relative to ||b||".into()),
        suite("two-path", two, 1e-6, "d = 3, l <= 8, relative to ||b||".into()),
    ])
}

pub fn run(o: &SelftestOptions) -> Result<Vec<SuiteResult>> {
    let mut out = vec![wronskian_suite(o)?, jacobi_anger_suite()?, gram_suite()?, kernel_support_suite()?];
    out.extend(pipeline_suites()?);
    Ok(out)
}

pub fn table(results: &[SuiteResult]) -> String {
    let mut s = format!("{:<24} {:>11} {:>9}  {}\n", "suite", "worst", "tol", "result");
    for r in results {
        s.push_str(&format!(
            "{:<24} {:>11.3e} {:>9.0e}  {}  ({})\n",
            r.name,
            r.worst,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        ));
    }
    s
}
