//! Analytic bump phantoms, their spherical means, the boundary traces of the
//! free-space wave they launch, and their Radon transforms.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HtrwError, Result};
use crate::grids::{BoundaryData, PGrid, SphereGrid, TimeGrid};
use crate::par;
use crate::quad::gauss_legendre;

const NQ: usize = 64;

/// phi(s) = exp(1 - 1/(1 - s^2)) for |s| < 1, else 0.
pub fn bump_profile(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

/// phi'(s)/s.
fn bump_dprofile_over_s(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s2;
        -2.0 * (1.0 - 1.0 / q).exp() / (q * q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub rho: f64,
    pub amp: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, rho: f64, amp: f64) -> Self {
        Bump { center, rho, amp }
    }

    fn dist_to(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    pub fn extent(&self) -> f64 {
        self.center.iter().map(|v| v * v).sum::<f64>().sqrt() + self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub dim: usize,
    pub bumps: Vec<Bump>,
}

impl Phantom {
    /// Validates |c| + rho < 1 for every bump.
    pub fn new(dim: usize, bumps: Vec<Bump>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(HtrwError::Config(format!("dimension {dim} not supported")));
        }
        for (i, b) in bumps.iter().enumerate() {
            if b.center.len() != dim {
                return Err(HtrwError::Config(format!("bump {i}: center has {} coordinates, expected {dim}", b.center.len())));
            }
            if !(b.rho > 0.0) {
                return Err(HtrwError::Config(format!("bump {i}: radius must be positive")));
            }
            if b.extent() >= 1.0 {
                return Err(HtrwError::Config(format!(
                    "bump {i} at {:?} with rho {}: |c| + rho = {} >= 1",
                    b.center,
                    b.rho,
                    b.extent()
                )));
            }
        }
        Ok(Phantom { dim, bumps })
    }

    /// Distance from supp f to the unit sphere.
    pub fn delta_s(&self) -> f64 {
        1.0 - self.bumps.iter().map(Bump::extent).fold(0.0, f64::max)
    }
}

pub fn eval_phantom(ph: &Phantom, x: &[f64]) -> f64 {
    ph.bumps.iter().map(|b| b.amp * bump_profile(b.dist_to(x) / b.rho)).sum()
}

/// Gradient of the phantom at x.
pub fn grad_phantom(ph: &Phantom, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for b in &ph.bumps {
        let f = b.amp * bump_dprofile_over_s(b.dist_to(x) / b.rho) / (b.rho * b.rho);
        for (gi, (xi, ci)) in g.iter_mut().zip(x.iter().zip(&b.center)) {
            *gi += f * (xi - ci);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeansTable {
    pub sphere: SphereGrid,
    pub radii: Vec<f64>,
    /// `values[r_index * n_nodes + node]`
    pub values: Vec<f64>,
}

struct Gl {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Gl {
    fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Gl { x, w }
    }

    fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.x.iter().zip(&self.w).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    }
}

/// Spherical integral of one bump over the sphere of radius r at distance D
/// from its center (d=3 shell reduction, or d=2 arc reduction), together
/// with the r-derivative for d=2.
fn bump_mean(d: usize, gl: &Gl, b: &Bump, dist: f64, r: f64) -> (f64, f64) {
    let rho = b.rho;
    if r <= 0.0 || r <= dist - rho || r >= dist + rho {
        return (0.0, 0.0);
    }
    if d == 3 {
        let lo = (r - dist).abs();
        let hi = (r + dist).min(rho);
        let s = gl.integrate(lo, hi, |s| bump_profile(s / rho) * s);
        (2.0 * PI * b.amp * s / (r * dist), 0.0)
    } else {
        let kappa = (dist * dist + r * r - rho * rho) / (2.0 * r * dist);
        let beta0 = kappa.clamp(-1.0, 1.0).acos();
        let s_of = |beta: f64| (dist * dist + r * r - 2.0 * r * dist * beta.cos()).max(0.0).sqrt();
        let m = gl.integrate(0.0, beta0, |beta| bump_profile(s_of(beta) / rho));
        let mr = gl.integrate(0.0, beta0, |beta| {
            bump_dprofile_over_s(s_of(beta) / rho) * (r - dist * beta.cos()) / (rho * rho)
        });
        (2.0 * b.amp * m, 2.0 * b.amp * mr)
    }
}

/// M(r, theta) = integral over the unit sphere of directions tau of f(theta + r tau).
pub fn spherical_means(ph: &Phantom, centers: &SphereGrid, radii: &[f64]) -> MeansTable {
    let gl = Gl::new(NQ);
    let nn = centers.len();
    let mut values = vec![0.0; radii.len() * nn];
    par::for_each_chunk(&mut values, nn, |ri, row| {
        let r = radii[ri];
        for (i, out) in row.iter_mut().enumerate() {
            let th = &centers.nodes[i];
            *out = ph
                .bumps
                .iter()
                .map(|b| bump_mean(ph.dim, &gl, b, b.dist_to(th), r).0)
                .sum();
        }
    });
    MeansTable { sphere: centers.clone(), radii: radii.to_vec(), values }
}

/// g(t, theta) for d=3: (1/4 pi) d/dt [t M(t, theta)]. With the shell
/// reduction t M is an integral of s phi(s / rho) between |t - D| and t + D,
/// so the derivative is exact: per bump g = a (D - t) phi(|D - t| / rho) / 2D
/// (the t + D end lies outside every bump since D > rho).
fn wave_data_3d(ph: &Phantom, tg: &TimeGrid, sg: &SphereGrid) -> Vec<f64> {
    let np = tg.n_phys();
    let nn = sg.len();
    let mut values = vec![0.0; np * nn];
    par::for_each_chunk(&mut values, nn, |k, row| {
        let t = tg.t(k);
        for (i, out) in row.iter_mut().enumerate() {
            let th = &sg.nodes[i];
            *out = ph
                .bumps
                .iter()
                .map(|b| {
                    let dist = b.dist_to(th);
                    let s = dist - t;
                    b.amp * s * bump_profile(s.abs() / b.rho) / (2.0 * dist)
                })
                .sum();
        }
    });
    values
}

/// g(t, theta) for d=2: (1/2 pi) int_0^{pi/2} sin(psi) d_r(r M)(t sin psi) dpsi,
/// which is the Abel-type integral after r = t sin(psi).
fn wave_data_2d(ph: &Phantom, tg: &TimeGrid, sg: &SphereGrid) -> Vec<f64> {
    let gl = Gl::new(NQ);
    let np = tg.n_phys();
    let nn = sg.len();
    let mut values = vec![0.0; np * nn];
    par::for_each_chunk(&mut values, nn, |k, row| {
        let t = tg.t(k);
        for (i, out) in row.iter_mut().enumerate() {
            let th = &sg.nodes[i];
            let mut acc = 0.0;
            for b in &ph.bumps {
                let dist = b.dist_to(th);
                if t <= dist - b.rho {
                    continue;
                }
                let plo = ((dist - b.rho) / t).min(1.0).asin();
                let phi = ((dist + b.rho) / t).min(1.0).asin();
                acc += gl.integrate(plo, phi, |psi| {
                    let r = t * psi.sin();
                    let (m, mr) = bump_mean(2, &gl, b, dist, r);
                    psi.sin() * (m + r * mr)
                });
            }
            *out = acc / (2.0 * PI);
        }
    });
    values
}

/// Boundary traces g = u(t, theta) on the physical window (0, 1].
pub fn wave_data(ph: &Phantom, tg: &TimeGrid, sg: &SphereGrid) -> Result<BoundaryData> {
    if ph.dim != sg.dim {
        return Err(HtrwError::Config(format!("phantom is d={}, sphere grid is d={}", ph.dim, sg.dim)));
    }
    let values = if ph.dim == 3 { wave_data_3d(ph, tg, sg) } else { wave_data_2d(ph, tg, sg) };
    BoundaryData::new(sg.clone(), *tg, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub sphere: SphereGrid,
    pub pgrid: PGrid,
    /// `values[node * n_p + j]`
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(sphere: SphereGrid, pgrid: PGrid) -> Self {
        let n = sphere.len() * pgrid.n;
        Sinogram { sphere, pgrid, values: vec![0.0; n] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.pgrid.n..(i + 1) * self.pgrid.n]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.pgrid.n + j]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Cubic (4-point Lagrange) interpolation in p along direction i; zero
    /// outside the grid.
    pub fn interp(&self, i: usize, p: f64) -> f64 {
        interp_cubic(self.row(i), self.pgrid.lo, self.pgrid.step(), p)
    }
}

/// 4-point Lagrange interpolation of uniform samples, zero outside.
pub fn interp_cubic(y: &[f64], lo: f64, h: f64, x: f64) -> f64 {
    let n = y.len();
    let u = (x - lo) / h;
    if u < -1e-12 || u > (n - 1) as f64 + 1e-12 {
        return 0.0;
    }
    let u = u.clamp(0.0, (n - 1) as f64);
    let j = (u.floor() as usize).clamp(1, n.saturating_sub(3).max(1));
    let s = u - j as f64;
    let get = |k: isize| -> f64 {
        if k < 0 || k as usize >= n {
            0.0
        } else {
            y[k as usize]
        }
    };
    let j = j as isize;
    let (ym1, y0, y1, y2) = (get(j - 1), get(j), get(j + 1), get(j + 2));
    -s * (s - 1.0) * (s - 2.0) / 6.0 * ym1 + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * y0
        - (s + 1.0) * s * (s - 2.0) / 2.0 * y1
        + (s + 1.0) * s * (s - 1.0) / 6.0 * y2
}

/// Radon transform of one bump at signed plane distance q from its center.
fn bump_radon(d: usize, gl: &Gl, b: &Bump, q: f64) -> f64 {
    let qt = (q / b.rho).abs();
    if qt >= 1.0 {
        return 0.0;
    }
    if d == 3 {
        // disk integral in polar coordinates about the foot point
        let rmax = (1.0 - qt * qt).sqrt();
        2.0 * PI * b.amp * b.rho * b.rho * gl.integrate(0.0, rmax, |v| bump_profile((qt * qt + v * v).sqrt()) * v)
    } else {
        let vmax = (1.0 - qt * qt).sqrt();
        2.0 * b.amp * b.rho * gl.integrate(0.0, vmax, |v| bump_profile((qt * qt + v * v).sqrt()))
    }
}

/// F(omega, p) = integral of f over the hyperplane x . omega = p.
pub fn radon_of_phantom(ph: &Phantom, sg: &SphereGrid, pgrid: &PGrid) -> Result<Sinogram> {
    if ph.dim != sg.dim {
        return Err(HtrwError::Config(format!("phantom is d={}, sphere grid is d={}", ph.dim, sg.dim)));
    }
    let gl = Gl::new(NQ);
    let np = pgrid.n;
    let mut values = vec![0.0; sg.len() * np];
    par::for_each_chunk(&mut values, np, |i, row| {
        let w = &sg.nodes[i];
        for (j, out) in row.iter_mut().enumerate() {
            let p = pgrid.p(j);
            *out = ph
                .bumps
                .iter()
                .map(|b| {
                    let wc: f64 = w.iter().zip(&b.center).map(|(a, c)| a * c).sum();
                    bump_radon(ph.dim, &gl, b, p - wc)
                })
                .sum();
        }
    });
    Ok(Sinogram { sphere: sg.clone(), pgrid: *pgrid, values })
}

/// [Ru](t, omega_i, p) = (F(omega_i, p + t) + F(omega_i, p - t)) / 2.
pub fn dalembert_projection(f: &Sinogram, t: f64, node: usize, p: f64) -> f64 {
    let at = |x: f64| if x.abs() > 1.0 { 0.0 } else { f.interp(node, x) };
    0.5 * (at(p + t) + at(p - t))
}
