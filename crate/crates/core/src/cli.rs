//! Command-line front end. Exit codes: 0 success or in-range, 1 selftest
//! failure, 2 usage or input error, 3 out-of-range, 4 inconclusive.

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::container::{
    boundary_container, boundary_from, phantom_container, phantom_from, report_container, volume_container, Container,
};
use crate::error::{HtrwError, Result};
use crate::forward::{wave_data, Bump, Phantom};
use crate::pipeline::{check, inject_violation, reconstruct, Violation};
use crate::recon::l2_error;
use crate::selftest::{self, SelftestOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "htrw", version, about = "Half-time range test for wave boundary data")]
pub struct Cli {
    /// Worker threads (falls back to HTRW_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a bump phantom.
    Phantom(PhantomArgs),
    /// Simulate boundary traces on (0, 1] x S for a phantom.
    Forward(ForwardArgs),
    /// Evaluate the range conditions; exit 0 in-range, 3 out-of-range, 4 inconclusive.
    Check(CheckArgs),
    /// Reconstruct the source from boundary traces.
    Reconstruct(ReconstructArgs),
    /// Run the built-in invariant suites.
    Selftest(SelftestArgs),
}

/// Overrides applied on top of the configuration carried by the input.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// JSON file with RunConfig fields; unset fields keep their values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_t: Option<usize>,
    #[arg(long)]
    pub t_ext: Option<f64>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub lmax: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub deriv_max: Option<usize>,
    #[arg(long)]
    pub n_p: Option<usize>,
    #[arg(long)]
    pub theta_pass: Option<f64>,
    #[arg(long)]
    pub theta_fail: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub q_recon: Option<usize>,
    #[arg(long)]
    pub n_vox: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub dim: usize,
    /// cx,cy[,cz],rho,amp; repeat for several bumps.
    #[arg(long = "bump", required = true, allow_hyphen_values = true)]
    pub bumps: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Phantom container.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected dimension; a mismatch with the phantom is an input error.
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Boundary container.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report JSON destination.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Report container destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test hook: add a smooth violating channel, e.g. l=5,n=1,eps=1e-2.
    #[arg(long)]
    pub inject_violation: Option<String>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Boundary container.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Phantom container; prints the relative L2 error against it.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub quick: bool,
    /// Fault injection: scale every Hankel value by 1.001.
    #[arg(long, hide = true)]
    pub corrupt_hankel: bool,
}

impl ConfigArgs {
    fn apply(&self, mut c: RunConfig) -> Result<RunConfig> {
        if let Some(p) = &self.config {
            let base = serde_json::to_value(&c)?;
            let over: serde_json::Value = serde_json::from_slice(&std::fs::read(p)?)?;
            let mut merged = base;
            if let (Some(m), Some(o)) = (merged.as_object_mut(), over.as_object()) {
                for (k, v) in o {
                    m.insert(k.clone(), v.clone());
                }
            } else {
                return Err(HtrwError::Config("config file must hold a JSON object".into()));
            }
            c = serde_json::from_value(merged)?;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(n_t, t_ext, q, lmax, n_max, deriv_max, n_p, theta_pass, theta_fail, seed, q_recon, n_vox);
        Ok(c)
    }
}

pub fn parse_bump(s: &str, dim: usize) -> Result<Bump> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| HtrwError::Config(format!("bump '{s}': expected comma-separated numbers")))?;
    if v.len() != dim + 2 {
        return Err(HtrwError::Config(format!("bump '{s}': expected {} numbers for d={dim}", dim + 2)));
    }
    Ok(Bump::new(v[..dim].to_vec(), v[dim], v[dim + 1]))
}

fn read_container(p: &Path) -> Result<Container> {
    Container::read(p).map_err(|e| match e {
        HtrwError::Io(io) => HtrwError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", p.display()))),
        other => other,
    })
}

fn cmd_phantom(a: &PhantomArgs) -> Result<i32> {
    let bumps = a.bumps.iter().map(|s| parse_bump(s, a.dim)).collect::<Result<Vec<_>>>()?;
    let ph = Phantom::new(a.dim, bumps)?;
    let cfg = a.cfg.apply(RunConfig::for_dim(a.dim))?;
    if cfg.dimension != a.dim {
        return Err(HtrwError::Config(format!("configuration is d={}, --dim is {}", cfg.dimension, a.dim)));
    }
    cfg.validate()?;
    phantom_container(&ph, &cfg).write(&a.out)?;
    println!("wrote phantom with {} bump(s) to {}", ph.bumps.len(), a.out.display());
    Ok(EXIT_OK)
}

fn cmd_forward(a: &ForwardArgs) -> Result<i32> {
    let c = read_container(&a.input)?;
    let ph = phantom_from(&c)?;
    if let Some(d) = a.dim {
        if d != ph.dim {
            return Err(HtrwError::Config(format!("--dim {d} does not match the d={} phantom", ph.dim)));
        }
    }
    let cfg = a.cfg.apply(c.header.config.clone())?;
    if cfg.dimension != ph.dim {
        return Err(HtrwError::Config(format!("configuration is d={}, phantom is d={}", cfg.dimension, ph.dim)));
    }
    cfg.validate()?;
    let b = wave_data(&ph, &cfg.time_grid()?, &cfg.sphere_grid()?)?;
    boundary_container(&b, &cfg).write(&a.out)?;
    println!(
        "wrote boundary data ({} times x {} nodes, ||b|| = {:.6e}) to {}",
        b.time.n_phys(),
        b.sphere.len(),
        b.l2_norm(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_check(a: &CheckArgs) -> Result<i32> {
    let c = read_container(&a.input)?;
    let mut b = boundary_from(&c)?;
    let cfg = a.cfg.apply(c.header.config.clone())?;
    cfg.validate()?;
    if let Some(spec) = &a.inject_violation {
        b = inject_violation(&b, &Violation::parse(spec)?)?;
    }
    let report = check(&b, &cfg)?;
    if let Some(p) = &a.report {
        let mut v = serde_json::to_value(&report)?;
        v["config"] = serde_json::to_value(&cfg)?;
        std::fs::write(p, serde_json::to_string_pretty(&v)?)?;
    }
    if let Some(p) = &a.out {
        report_container(&report, &cfg)?.write(p)?;
    }
    let worst = report
        .worst()
        .map(|(f, r)| format!("{f} (l={}, m={}, n={})", r.l, r.m, r.n))
        .unwrap_or_else(|| "none".into());
    println!(
        "verdict {:?}: aggregate {:.3e} (moments {:.3e}, smoothness {:.3e}); worst {worst}",
        report.verdict, report.aggregate.overall, report.aggregate.moments, report.aggregate.smoothness
    );
    Ok(report.verdict.exit_code())
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<i32> {
    let c = read_container(&a.input)?;
    let b = boundary_from(&c)?;
    let cfg = a.cfg.apply(c.header.config.clone())?;
    cfg.validate()?;
    let truth = a.truth.as_deref().map(|p| read_container(p).and_then(|c| phantom_from(&c))).transpose()?;
    let vol = reconstruct(&b, &cfg)?;
    volume_container(&vol, &cfg).write(&a.out)?;
    println!("wrote volume ({} nodes per axis) to {}", vol.n, a.out.display());
    if let Some(ph) = truth {
        println!("relative L2 error {:.6e}", l2_error(&vol, &ph)?);
    }
    Ok(EXIT_OK)
}

fn cmd_selftest(a: &SelftestArgs) -> Result<i32> {
    let mut o = SelftestOptions { quick: a.quick, ..Default::default() };
    if a.corrupt_hankel {
        o = o.with_corrupt_hankel();
    }
    let results = selftest::run(&o)?;
    print!("{}", selftest::table(&results));
    Ok(if results.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_SELFTEST })
}

fn thread_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var("HTRW_THREADS").ok()?.trim().parse().ok()).filter(|&n| n > 0)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Some(n) = thread_count(cli.threads) {
        crate::par::init_threads(n);
    }
    let out = match &cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Forward(a) => cmd_forward(a),
        Command::Check(a) => cmd_check(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("htrw: {e}");
            EXIT_INPUT
        }
    }
}
