use htrw::config::RunConfig;
use htrw::container::*;
use htrw::forward::{wave_data, Bump, Phantom};
use htrw::HtrwError;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htrw"))
        .args(args)
        .env_remove("HTRW_THREADS")
        .output()
        .expect("spawn htrw")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }
    fn p(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

/// phantom + forward for the reference bump; returns the boundary path.
fn reference_data(dir: &Dir, d: usize) -> PathBuf {
    let ph = dir.p("f.htrw");
    let bump = if d == 3 { "0.3,0,0,0.4,1" } else { "0.3,0,0.4,1" };
    let o = bin(&["phantom", "--dim", &d.to_string(), "--bump", bump, "--out", s(&ph)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g = dir.p("g.htrw");
    let o = bin(&["forward", "--in", s(&ph), "--out", s(&g)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    g
}

#[test]
fn container_round_trip_is_bit_exact() {
    let dir = Dir::new();
    let cfg = RunConfig::for_dim(3);
    let ph = Phantom::new(3, vec![Bump::new(vec![0.3, 0.0, 0.0], 0.4, 1.0)]).unwrap();
    let b = wave_data(&ph, &cfg.time_grid().unwrap(), &cfg.sphere_grid().unwrap()).unwrap();
    let c = boundary_container(&b, &cfg);
    c.write(&dir.p("b.htrw")).unwrap();
    let back = Container::read(&dir.p("b.htrw")).unwrap();
    assert_eq!(back, c);
    let b2 = boundary_from(&back).unwrap();
    assert!(b.values.iter().zip(&b2.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(b2.sphere, b.sphere);
    assert_eq!(back.header.config, cfg);
    assert_eq!(back.to_bytes().unwrap(), c.to_bytes().unwrap());
}

#[test]
fn container_rejects_bad_files() {
    let cfg = RunConfig::for_dim(2);
    let ph = Phantom::new(2, vec![Bump::new(vec![0.1, 0.2], 0.3, 2.0)]).unwrap();
    let bytes = phantom_container(&ph, &cfg).to_bytes().unwrap();
    assert!(Container::from_bytes(&bytes).is_ok());

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Container::from_bytes(&bad).is_err());

    let mut v2 = bytes.clone();
    v2[4..8].copy_from_slice(&2u32.to_le_bytes());
    let e = Container::from_bytes(&v2).unwrap_err();
    assert!(e.to_string().contains("version"), "{e}");

    let short = &bytes[..bytes.len() - 8];
    assert!(Container::from_bytes(short).is_err());
    let mut long = bytes.clone();
    long.extend_from_slice(&[0u8; 8]);
    assert!(Container::from_bytes(&long).is_err());
    assert!(Container::from_bytes(&bytes[..10]).is_err());

    let c = Container::from_bytes(&bytes).unwrap();
    assert!(matches!(boundary_from(&c), Err(HtrwError::Format(_)) | Err(HtrwError::Config(_))));
}

#[test]
fn phantom_keeps_bumps_in_order() {
    let dir = Dir::new();
    let out = dir.p("two.htrw");
    let o = bin(&["phantom", "--dim", "2", "--bump", "0.3,0,0.4,1", "--bump", "-0.2,0.1,0.3,-0.5", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let ph = phantom_from(&Container::read(&out).unwrap()).unwrap();
    assert_eq!(ph.bumps.len(), 2);
    assert_eq!(ph.bumps[0].center, vec![0.3, 0.0]);
    assert_eq!(ph.bumps[1].center, vec![-0.2, 0.1]);
    assert_eq!(ph.bumps[1].amp, -0.5);
}

#[test]
fn phantom_support_violation_names_bump() {
    let dir = Dir::new();
    let o = bin(&["phantom", "--dim", "3", "--bump", "0.8,0,0,0.3,1", "--out", s(&dir.p("x.htrw"))]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bump 0"), "{err}");
    assert!(!dir.p("x.htrw").exists());
    let o = bin(&["phantom", "--dim", "3", "--bump", "0.1,0.2,0.3", "--out", s(&dir.p("y.htrw"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn forward_dimension_mismatch() {
    let dir = Dir::new();
    let ph = dir.p("f.htrw");
    assert_eq!(code(&bin(&["phantom", "--dim", "2", "--bump", "0.3,0,0.4,1", "--out", s(&ph)])), 0);
    let o = bin(&["forward", "--in", s(&ph), "--out", s(&dir.p("g.htrw")), "--dim", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn check_verdicts_and_exit_codes() {
    let dir = Dir::new();
    let g = reference_data(&dir, 3);
    let rep = dir.p("r.json");
    let o = bin(&["check", "--in", s(&g), "--report", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert_eq!(v["verdict"], "in-range");
    assert!(v["aggregate"]["overall"].as_f64().unwrap() <= 1e-3);
    assert_eq!(v["config"]["lmax"], 12);

    let o = bin(&["check", "--in", s(&g), "--inject-violation", "l=5,n=1,eps=1e-2"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));

    let o = bin(&["check", "--in", s(&g), "--inject-violation", "l=4,n=1,eps=1e-2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_data_checks_in_range() {
    let dir = Dir::new();
    let cfg = RunConfig::for_dim(2);
    let b = htrw::grids::BoundaryData::zeros(cfg.sphere_grid().unwrap(), cfg.time_grid().unwrap());
    let g = dir.p("zero.htrw");
    boundary_container(&b, &cfg).write(&g).unwrap();
    let rep = dir.p("r.json");
    assert_eq!(code(&bin(&["check", "--in", s(&g), "--report", s(&rep)])), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert_eq!(v["aggregate"]["overall"].as_f64().unwrap(), 0.0);

    let vol = dir.p("v.htrw");
    let o = bin(&["reconstruct", "--in", s(&g), "--out", s(&vol), "--q-recon", "32", "--n-vox", "24"]);
    assert_eq!(code(&o), 0);
    let v = volume_from(&Container::read(&vol).unwrap()).unwrap();
    assert!(v.values.iter().all(|x| *x == 0.0));
}

#[test]
fn malformed_container_is_input_error() {
    let dir = Dir::new();
    let junk = dir.p("junk.htrw");
    std::fs::write(&junk, b"HTRW\x01\x00\x00\x00garbage").unwrap();
    assert_eq!(code(&bin(&["check", "--in", s(&junk)])), 2);
    assert_eq!(code(&bin(&["check", "--in", s(&dir.p("missing.htrw"))])), 2);
    // a phantom where boundary data are expected
    let ph = dir.p("f.htrw");
    assert_eq!(code(&bin(&["phantom", "--dim", "2", "--bump", "0.3,0,0.4,1", "--out", s(&ph)])), 0);
    assert_eq!(code(&bin(&["check", "--in", s(&ph)])), 2);
}

#[test]
fn bad_config_is_input_error() {
    let dir = Dir::new();
    let g = reference_data(&dir, 2);
    assert_eq!(code(&bin(&["check", "--in", s(&g), "--theta-pass", "0.5", "--theta-fail", "0.1"])), 2);
    let cfgf = dir.p("c.json");
    std::fs::write(&cfgf, "[1, 2]").unwrap();
    assert_eq!(code(&bin(&["check", "--in", s(&g), "--config", s(&cfgf)])), 2);
    assert_eq!(code(&bin(&["frobnicate"])), 2);
}

#[test]
fn report_is_deterministic_across_thread_counts_and_rereads() {
    let dir = Dir::new();
    let g = reference_data(&dir, 3);
    let (r1, r2) = (dir.p("r1.json"), dir.p("r2.json"));
    let (c1, c2) = (dir.p("r1.htrw"), dir.p("r2.htrw"));
    assert_eq!(code(&bin(&["--threads", "1", "check", "--in", s(&g), "--report", s(&r1), "--out", s(&c1)])), 0);
    assert_eq!(code(&bin(&["check", "--threads", "2", "--in", s(&g), "--report", s(&r2), "--out", s(&c2)])), 0);
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());

    // rewrite the boundary container from its parsed form and check again
    let b = boundary_from(&Container::read(&g).unwrap()).unwrap();
    let cfg = Container::read(&g).unwrap().header.config;
    let g2 = dir.p("g2.htrw");
    boundary_container(&b, &cfg).write(&g2).unwrap();
    assert_eq!(std::fs::read(&g).unwrap(), std::fs::read(&g2).unwrap());
    let r3 = dir.p("r3.json");
    assert_eq!(code(&bin(&["check", "--in", s(&g2), "--report", s(&r3)])), 0);
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r3).unwrap());

    let report = report_from(&Container::read(&c1).unwrap()).unwrap();
    let direct = htrw::pipeline::check(&b, &cfg).unwrap();
    assert_eq!(report, direct);
}

#[test]
fn forward_is_deterministic_with_env_threads() {
    let dir = Dir::new();
    let g = reference_data(&dir, 2);
    let ph = dir.p("f.htrw");
    let g2 = dir.p("g2.htrw");
    let o = Command::new(env!("CARGO_BIN_EXE_htrw"))
        .args(["forward", "--in", s(&ph), "--out", s(&g2)])
        .env("HTRW_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&g).unwrap(), std::fs::read(&g2).unwrap());
}

#[test]
fn reconstruct_is_linear_and_reports_error() {
    let dir = Dir::new();
    let g = reference_data(&dir, 2);
    let c = Container::read(&g).unwrap();
    let b = boundary_from(&c).unwrap();
    let g2 = dir.p("g2.htrw");
    boundary_container(&b.scaled(2.0), &c.header.config).write(&g2).unwrap();
    let (v1, v2) = (dir.p("v1.htrw"), dir.p("v2.htrw"));
    let small = ["--q-recon", "64", "--n-vox", "48"];
    let mut a1 = vec!["reconstruct", "--in", s(&g), "--out", s(&v1), "--truth"];
    let truth = dir.p("f.htrw");
    a1.push(s(&truth));
    a1.extend(small);
    let o = bin(&a1);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("relative L2 error"));
    let mut a2 = vec!["reconstruct", "--in", s(&g2), "--out", s(&v2)];
    a2.extend(small);
    assert_eq!(code(&bin(&a2)), 0);
    let x = volume_from(&Container::read(&v1).unwrap()).unwrap();
    let y = volume_from(&Container::read(&v2).unwrap()).unwrap();
    let scale = x.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(x.values.iter().zip(&y.values).all(|(p, q)| (2.0 * p - q).abs() <= 1e-12 * scale));
    let vc = Container::read(&v1).unwrap();
    assert_eq!(vc.header.config.q_recon, 64);
}

#[test]
fn selftest_quick_passes_and_fault_injection_fails() {
    let o = bin(&["selftest", "--quick"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    for name in ["wronskian", "jacobi-anger", "kernel-support", "extension-independence", "two-path"] {
        assert!(out.contains(name), "{name}");
    }
    let o = bin(&["selftest", "--quick", "--corrupt-hankel"]);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    let line = out.lines().find(|l| l.starts_with("wronskian")).unwrap();
    assert!(line.contains("FAIL"), "{line}");
}
