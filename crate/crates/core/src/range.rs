//! Moment and smoothness residuals of the half-time range conditions, the
//! half-range and full-range Radon conditions, and the verdict.

use serde::{Deserialize, Serialize};

use crate::error::{HtrwError, Result};
use crate::exterior::ChannelFunctions;
use crate::fit;
use crate::forward::Sinogram;
use crate::quad::gauss_legendre;
use crate::special::{harmonic_indices, HarmonicIndex};

/// Relative floor added to every normalization constant.
pub const EPS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub l: usize,
    pub m: i32,
    pub n: usize,
    pub value: f64,
}

/// int_a^b y(x) x^n dx for uniform samples y on [a, b], integrating the
/// piecewise quartic interpolant exactly.
pub fn integrate_moment(y: &[f64], a: f64, b: f64, n: usize) -> f64 {
    let len = y.len();
    if len < 2 {
        return 0.0;
    }
    let h = (b - a) / (len - 1) as f64;
    let (gx, gw) = gauss_legendre(8);
    let deg = 4.min(len - 1);
    let mut total = 0.0;
    let mut start = 0;
    while start < len - 1 {
        let end = (start + deg).min(len - 1);
        // interpolation nodes: deg+1 consecutive samples containing [start, end]
        let s0 = end.saturating_sub(deg);
        let xa = a + start as f64 * h;
        let xb = a + end as f64 * h;
        let half = 0.5 * (xb - xa);
        let mid = 0.5 * (xb + xa);
        for (x, w) in gx.iter().zip(&gw) {
            let xx = mid + half * x;
            let u = (xx - a) / h - s0 as f64;
            let mut v = 0.0;
            for i in 0..=deg {
                let mut li = 1.0;
                for j in 0..=deg {
                    if j != i {
                        li *= (u - j as f64) / (i as f64 - j as f64);
                    }
                }
                v += li * y[s0 + i];
            }
            total += w * half * v * xx.powi(n as i32);
        }
        start = end;
    }
    total
}

/// |int_0^1 R(-p) p^n dp| / (||R||_inf + floor) for l > n, l + n even.
pub fn moment_residuals(r: &ChannelFunctions, n_max: usize) -> Vec<Residual> {
    let floor = EPS_FLOOR * r.b_norm;
    let mut out = Vec::new();
    for (c, idx) in r.indices.iter().enumerate() {
        let rev = r.reversed(c);
        let p_end = (rev.len() - 1) as f64 * r.dt;
        let norm = r.sup_norm(c) + floor;
        for n in 0..=n_max {
            if idx.l > n && (idx.l + n) % 2 == 0 {
                let v = integrate_moment(&rev, 0.0, p_end, n).abs();
                out.push(Residual { l: idx.l, m: idx.m, n, value: if norm > 0.0 { v / norm } else { 0.0 } });
            }
        }
    }
    out
}

/// Derivative floors: the largest n-th derivative the estimator can report
/// for a perturbation of size `value_floor`.
fn deriv_floors(value_floor: f64, h: f64, opts: &crate::exterior::DerivOptions, deriv_max: usize) -> Vec<f64> {
    fit::endpoint_gain(h, opts.fit_degree, opts.fit_window, deriv_max)
        .into_iter()
        .map(|g| value_floor * g)
        .collect()
}

fn parity_orders(l: usize, deriv_max: usize) -> impl Iterator<Item = usize> {
    (0..=deriv_max).filter(move |n| (l + n) % 2 == 1)
}

/// |d^n_p F(0)| for the orders that must vanish (odd n for even l, even n
/// for odd l), with F(p) = 2 R(-p), normalized by max over the interval of
/// |d^n F| plus the estimator's response to a value-floor perturbation.
pub fn smoothness_residuals(r: &ChannelFunctions, deriv_max: usize) -> Vec<Residual> {
    let deriv_max = deriv_max.min(r.deriv_opts.deriv_max);
    let floors = deriv_floors(EPS_FLOOR * r.b_norm, r.dt, &r.deriv_opts, deriv_max);
    let mut out = Vec::new();
    for (c, idx) in r.indices.iter().enumerate() {
        for n in parity_orders(idx.l, deriv_max) {
            // chain rule: d^n_p [2 R(-p)] = 2 (-1)^n R^(n)(0); the factor
            // and sign cancel in the normalized value
            let v = r.derivs[c][n].abs();
            let norm = r.deriv_scales[c][n] + floors[n];
            out.push(Residual { l: idx.l, m: idx.m, n, value: if norm > 0.0 { v / norm } else { 0.0 } });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRangeResiduals {
    /// max |F(w, p) - F(-w, -p)|
    pub symmetry: f64,
    /// |int_S M_n(w) Y_l^m(w) dw| for l > n
    pub moments: Vec<Residual>,
}

/// Classical range conditions of a full sinogram on [-1, 1].
pub fn radon_full_range_residuals(f: &Sinogram, n_max: usize, lmax: usize) -> Result<FullRangeResiduals> {
    let sg = &f.sphere;
    if sg.q % 2 == 1 {
        return Err(HtrwError::Config("sphere grid lacks the antipodal map (odd azimuth count)".into()));
    }
    if !f.pgrid.is_symmetric() {
        return Err(HtrwError::Config("full-range residuals need a symmetric p grid".into()));
    }
    let np = f.pgrid.n;
    let mut sym: f64 = 0.0;
    for i in 0..sg.len() {
        let a = sg.antipode(i);
        for j in 0..np {
            sym = sym.max((f.at(i, j) - f.at(a, np - 1 - j)).abs());
        }
    }
    let moments_by_dir: Vec<Vec<f64>> = (0..sg.len())
        .map(|i| (0..=n_max).map(|n| integrate_moment(f.row(i), f.pgrid.lo, f.pgrid.hi, n)).collect())
        .collect();
    let table = sg.harmonic_table(lmax);
    let mut moments = Vec::new();
    for (c, idx) in harmonic_indices(sg.dim, lmax).iter().enumerate() {
        for n in 0..=n_max {
            if idx.l > n {
                let v: f64 = (0..sg.len()).map(|i| sg.weights[i] * moments_by_dir[i][n] * table[i][c]).sum();
                moments.push(Residual { l: idx.l, m: idx.m, n, value: v.abs() });
            }
        }
    }
    Ok(FullRangeResiduals { symmetry: sym, moments })
}

/// F_l^m(p) on the p grid by quadrature in omega: `[channel][j]`.
pub fn sinogram_channels(f: &Sinogram, lmax: usize) -> Vec<Vec<f64>> {
    let np = f.pgrid.n;
    f.sphere.analyze(lmax, np, |j, i| f.values[i * np + j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfRangeResiduals {
    pub moments: Vec<Residual>,
    pub smoothness: Vec<Residual>,
}

/// Half-range conditions of a sinogram on p in [0, 1]; derivatives at p = 0
/// from a one-sided polynomial fit of the sampled channels.
pub fn half_range_residuals(f: &Sinogram, n_max: usize, deriv_max: usize, lmax: usize) -> Result<HalfRangeResiduals> {
    if f.pgrid.lo.abs() > 1e-12 {
        return Err(HtrwError::Config("half-range residuals need a p grid starting at 0".into()));
    }
    let ch = sinogram_channels(f, lmax);
    let indices = harmonic_indices(f.sphere.dim, lmax);
    let h = f.pgrid.step();
    let opts = crate::exterior::DerivOptions { deriv_max, ..Default::default() };
    let norms: Vec<f64> = ch.iter().map(|y| y.iter().fold(0.0f64, |a, v| a.max(v.abs()))).collect();
    let floor = EPS_FLOOR * norms.iter().fold(0.0, |a: f64, v| a.max(*v));
    let mut moments = Vec::new();
    let mut derivs = Vec::new();
    let mut scales = Vec::new();
    for (c, idx) in indices.iter().enumerate() {
        let y = &ch[c];
        for n in 0..=n_max {
            if idx.l > n && (idx.l + n) % 2 == 0 {
                let v = integrate_moment(y, f.pgrid.lo, f.pgrid.hi, n).abs();
                let norm = norms[c] + floor;
                moments.push(Residual { l: idx.l, m: idx.m, n, value: if norm > 0.0 { v / norm } else { 0.0 } });
            }
        }
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        derivs.push(fit::endpoint_derivatives(&rev, h, opts.fit_degree, opts.fit_window, deriv_max));
        scales.push(fit::max_abs_derivatives(&rev, h, opts.fit_degree, opts.fit_window, deriv_max));
    }
    let floors = deriv_floors(floor, h, &opts, deriv_max);
    let mut smoothness = Vec::new();
    for (c, idx) in indices.iter().enumerate() {
        for n in parity_orders(idx.l, deriv_max) {
            let v = derivs[c][n].abs();
            let norm = scales[c][n] + floors[n];
            smoothness.push(Residual { l: idx.l, m: idx.m, n, value: if norm > 0.0 { v / norm } else { 0.0 } });
        }
    }
    Ok(HalfRangeResiduals { moments, smoothness })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    InRange,
    OutOfRange,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::InRange => 0,
            Verdict::OutOfRange => 3,
            Verdict::Inconclusive => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub pass: f64,
    pub fail: f64,
}

impl Thresholds {
    pub fn new(pass: f64, fail: f64) -> Result<Self> {
        if !(pass < fail) || !(pass >= 0.0) {
            return Err(HtrwError::Config(format!(
                "threshold misordering: pass {pass} must be below fail {fail}"
            )));
        }
        Ok(Thresholds { pass, fail })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { pass: 1e-3, fail: 1e-1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub overall: f64,
    pub moments: f64,
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub b_norm: f64,
    pub eps_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub report_version: u32,
    pub dimension: usize,
    pub grids: serde_json::Value,
    pub moment_residuals: Vec<Residual>,
    pub smoothness_residuals: Vec<Residual>,
    pub normalization: Normalization,
    pub aggregate: Aggregate,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
}

impl RangeReport {
    /// Largest entry of either table, with its family.
    pub fn worst(&self) -> Option<(&'static str, Residual)> {
        let m = self.moment_residuals.iter().map(|r| ("moment", *r));
        let s = self.smoothness_residuals.iter().map(|r| ("smoothness", *r));
        m.chain(s).max_by(|a, b| a.1.value.total_cmp(&b.1.value))
    }

    pub fn lookup(&self, family: &str, idx: HarmonicIndex, n: usize) -> Option<f64> {
        let t = if family == "moment" { &self.moment_residuals } else { &self.smoothness_residuals };
        t.iter().find(|r| r.l == idx.l && r.m == idx.m && r.n == n).map(|r| r.value)
    }
}

fn max_value(t: &[Residual]) -> f64 {
    t.iter().fold(0.0, |a, r| a.max(r.value))
}

/// Aggregate = max normalized residual; in-range iff <= pass, out-of-range
/// iff >= fail.
pub fn verdict(
    dimension: usize,
    moments: Vec<Residual>,
    smoothness: Vec<Residual>,
    thresholds: Thresholds,
    grids: serde_json::Value,
    b_norm: f64,
) -> Result<RangeReport> {
    if !(thresholds.pass < thresholds.fail) {
        return Err(HtrwError::Config(format!(
            "threshold misordering: pass {} must be below fail {}",
            thresholds.pass, thresholds.fail
        )));
    }
    let am = max_value(&moments);
    let asm = max_value(&smoothness);
    let overall = am.max(asm);
    let v = if overall <= thresholds.pass {
        Verdict::InRange
    } else if overall >= thresholds.fail {
        Verdict::OutOfRange
    } else {
        Verdict::Inconclusive
    };
    Ok(RangeReport {
        report_version: 1,
        dimension,
        grids,
        moment_residuals: moments,
        smoothness_residuals: smoothness,
        normalization: Normalization { b_norm, eps_floor: EPS_FLOOR },
        aggregate: Aggregate { overall, moments: am, smoothness: asm },
        verdict: v,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_integration_is_exact_for_quartics() {
        let n = 33;
        let y: Vec<f64> = (0..n).map(|k| {
            let x = k as f64 / (n - 1) as f64;
            1.0 + x - 2.0 * x.powi(4)
        }).collect();
        // int_0^1 (1 + x - 2x^4) x^2 dx = 1/3 + 1/4 - 2/7
        let v = integrate_moment(&y, 0.0, 1.0, 2);
        assert!((v - (1.0 / 3.0 + 0.25 - 2.0 / 7.0)).abs() < 1e-14);
    }

    #[test]
    fn verdict_bands() {
        let r = |v| vec![Residual { l: 1, m: 0, n: 0, value: v }];
        let t = Thresholds::default();
        let g = serde_json::Value::Null;
        assert_eq!(verdict(3, r(0.0), vec![], t, g.clone(), 1.0).unwrap().verdict, Verdict::InRange);
        assert_eq!(verdict(3, r(1e-2), vec![], t, g.clone(), 1.0).unwrap().verdict, Verdict::Inconclusive);
        assert_eq!(verdict(3, r(0.5), vec![], t, g.clone(), 1.0).unwrap().verdict, Verdict::OutOfRange);
        assert!(verdict(3, r(0.0), vec![], Thresholds { pass: 0.1, fail: 0.1 }, g, 1.0).is_err());
    }
}
