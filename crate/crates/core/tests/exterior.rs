use htrw::exterior::*;
use htrw::forward::{radon_of_phantom, wave_data, Bump, Phantom};
use htrw::grids::*;
use htrw::range::sinogram_channels;
use htrw::special::sph_hankel_all;
use htrw::HtrwError;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

fn off_center(d: usize) -> Phantom {
    let mut c = vec![0.0; d];
    c[0] = 0.3;
    Phantom::new(d, vec![Bump::new(c, 0.4, 1.0)]).unwrap()
}

fn channels(ph: &Phantom, q: usize, lmax: usize) -> (BoundaryData, HarmonicChannels, ChannelFunctions) {
    let tg = TimeGrid::new(2048, 4.0).unwrap();
    let b = wave_data(ph, &tg, &make_sphere_grid(ph.dim, q).unwrap()).unwrap();
    let raw = sh_analysis(&b, lmax).unwrap();
    let r = channel_response(&extend_and_transform(&raw)).unwrap();
    (b, raw, r)
}

#[test]
fn t0_closed_form_in_3d() {
    // T_0(z) = 2 pi i e^{-iz} / z
    let v = transfer_at(3, 0, C64::new(2.0 * PI, 0.0))[0];
    assert!((v - C64::new(0.0, 1.0)).norm() < 1e-12, "{v}");
    for z in [C64::new(0.7, 5.0), C64::new(-13.0, 5.0), C64::new(40.0, 0.5)] {
        let want = C64::new(0.0, 2.0 * PI) * (-C64::new(0.0, 1.0) * z).exp() / z;
        let got = transfer_at(3, 0, z)[0];
        assert!((got - want).norm() < 1e-12 * want.norm(), "z={z}");
    }
}

#[test]
fn transfer_hermitian_symmetry() {
    let fg = FrequencyGrid::new(&TimeGrid::new(2048, 4.0).unwrap(), DEFAULT_SIGMA);
    for d in [2, 3] {
        for l in [0, 1, 4, 12] {
            let t = transfer_function(d, l, &fg).unwrap();
            assert!(t.symmetry_residual() <= 1e-12, "d={d} l={l}");
        }
    }
}

#[test]
fn transfer_matches_hankel_definition() {
    for d in [2usize, 3] {
        let pref = 2f64.powf(d as f64 / 2.0) * PI.powf(d as f64 / 2.0 - 1.0);
        for z in [C64::new(3.0, 5.0), C64::new(25.0, 5.0)] {
            let h = sph_hankel_all(d, 6, z);
            let t = transfer_at(d, 6, z);
            for l in 0..=6 {
                let want = pref * C64::new(0.0, -1.0).powu(l as u32) / (z.powu(d as u32 - 1) * h[l]);
                assert!((t[l] - want).norm() < 1e-12 * want.norm());
            }
        }
    }
}

#[test]
fn large_argument_magnitude() {
    // |z^{d-1} h_l(z)| ~ sqrt(2/pi) z^{(d-1)/2} on the real axis
    for d in [2usize, 3] {
        let lam = 2000.0;
        let h = sph_hankel_all(d, 5, C64::new(lam, 0.0));
        for hl in h {
            let got = lam.powi(d as i32 - 1) * hl.norm();
            let want = (2.0 / PI).sqrt() * lam.powf((d as f64 - 1.0) / 2.0);
            assert!((got / want - 1.0).abs() < 1e-3, "d={d}");
        }
    }
}

#[test]
fn pole_expansion_l0_is_step() {
    let p = pole_expansion_3d(0).unwrap();
    assert_eq!(p.eval(-1.5), 0.0);
    for t in [-1.0, -0.3, 0.0, 0.7] {
        assert!((p.eval(t) - 2.0 * PI).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn pole_expansion_l1_single_pole() {
    let p = pole_expansion_3d(1).unwrap();
    assert_eq!(p.poles.len(), 1);
    assert!((p.poles[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
    // causal: identically zero before t = -1
    for i in 0..100 {
        assert_eq!(p.eval(-3.0 + 0.0199 * i as f64), 0.0);
    }
}

#[test]
fn poles_lie_in_lower_half_plane() {
    for l in 1..=20 {
        let p = pole_expansion_3d(l).unwrap();
        assert_eq!(p.poles.len(), l);
        assert!(p.poles.iter().all(|z| z.im < 0.0), "l={l}");
    }
}

#[test]
fn numeric_kernel_matches_poles_away_from_jump() {
    let tg = TimeGrid::new(2048, 4.0).unwrap();
    for l in [0, 1, 3, 6] {
        let k = kernel_time_domain(3, l, &tg).unwrap();
        let p = k.poles.as_ref().unwrap();
        let scale = k.max_abs_on(-1.0, 1.0);
        let mut worst: f64 = 0.0;
        for (i, v) in k.samples.iter().enumerate() {
            let t = k.t(i);
            if (-0.8..0.9).contains(&t) {
                worst = worst.max((v - p.eval(t)).abs() / scale);
            }
        }
        // the mollifier perturbs the smooth part slightly
        assert!(worst < 1e-3, "l={l}: {worst:e}");
    }
}

#[test]
fn kernels_vanish_before_minus_one() {
    let tg = TimeGrid::new(2048, 4.0).unwrap();
    for d in [2, 3] {
        for l in [0, 2, 7] {
            let k = kernel_time_domain(d, l, &tg).unwrap();
            let ratio = k.max_abs_on(-3.0, -1.1) / k.max_abs_on(k.t0, 1.0);
            assert!(ratio < 1e-5, "d={d} l={l}: {ratio:e}");
        }
    }
}

#[test]
fn zero_data_gives_zero_response() {
    for d in [2, 3] {
        let b = BoundaryData::zeros(make_sphere_grid(d, 16).unwrap(), TimeGrid::new(1024, 4.0).unwrap());
        let r = channel_response(&extend_and_transform(&sh_analysis(&b, 6).unwrap())).unwrap();
        assert!(r.samples.iter().flatten().all(|v| *v == 0.0));
        assert!(r.derivs.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(r.imag_residue, 0.0);
    }
}

#[test]
fn missing_spectra_is_state_error() {
    let b = BoundaryData::zeros(make_sphere_grid(3, 8).unwrap(), TimeGrid::new(512, 4.0).unwrap());
    let raw = sh_analysis(&b, 2).unwrap();
    assert!(matches!(channel_response(&raw), Err(HtrwError::State(_))));
}

#[test]
fn centered_radial_phantom_only_excites_l0() {
    let ph = Phantom::new(3, vec![Bump::new(vec![0.0; 3], 0.5, 1.0)]).unwrap();
    let (b, _, r) = channels(&ph, 32, 8);
    let bn = b.l2_norm();
    assert!(r.sup_norm(0) > 1e-3 * bn);
    for c in 1..r.len() {
        assert!(r.sup_norm(c) <= 1e-8 * bn, "channel {c}: {:e}", r.sup_norm(c));
    }
}

#[test]
fn response_is_real() {
    for d in [2, 3] {
        let (b, _, r) = channels(&off_center(d), 32, 12);
        assert!(r.imag_residue <= 1e-9 * b.l2_norm(), "d={d}: {:e}", r.imag_residue);
    }
}

#[test]
fn kernel_convolution_agrees_with_transform() {
    let ph = off_center(3);
    let (b, raw, r) = channels(&ph, 32, 8);
    let tg = b.time;
    let bn = b.l2_norm();
    let mut worst: f64 = 0.0;
    for (i, _) in raw.indices.iter().enumerate() {
        let k = kernel_time_domain(3, raw.indices[i].l, &tg).unwrap();
        let rc = convolve_channel(&raw.series[i], &k, &tg);
        for (u, v) in rc.iter().zip(&r.samples[i]) {
            worst = worst.max((u - v).abs() / bn);
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn response_reproduces_half_radon_channels() {
    // 2 R_l^m(-p) = F_l^m(p) on [0, 1]
    for d in [2, 3] {
        let ph = off_center(d);
        let q = if d == 2 { 64 } else { 32 };
        let (_, _, r) = channels(&ph, q, 12);
        let n = r.n_r();
        let pg = PGrid::new(0.0, 1.0, n);
        let f = radon_of_phantom(&ph, &make_sphere_grid(d, q).unwrap(), &pg).unwrap();
        let fc = sinogram_channels(&f, 12);
        let (mut num, mut den) = (0.0, 0.0);
        for c in 0..r.len() {
            let rev = r.reversed(c);
            for j in 0..n {
                num += (2.0 * rev[j] - fc[c][j]).powi(2);
                den += fc[c][j].powi(2);
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel <= 1e-3, "d={d}: {rel:e}");
    }
}

#[test]
fn for_step_window_rule() {
    assert_eq!(DerivOptions::for_step(1.0 / 512.0).fit_window, 24);
    assert_eq!(DerivOptions::for_step(1.0 / 2048.0).fit_window, 48);
    assert_eq!(DerivOptions::for_step(1.0 / 64.0).fit_window, 16);
}
