//! On-disk container shared by every artifact kind.
//!
//! Layout: `HTRW`, u32 LE format version, u64 LE header length, UTF-8 JSON
//! header, then the f64 LE arrays in header order.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{HtrwError, Result};
use crate::forward::{Bump, Phantom, Sinogram};
use crate::grids::{make_sphere_grid, BoundaryData, HarmonicChannels, PGrid, SphereGrid, TimeGrid};
use crate::range::RangeReport;
use crate::recon::ReconVolume;
use crate::special::harmonic_indices;

pub const MAGIC: &[u8; 4] = b"HTRW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Phantom,
    Boundary,
    Sinogram,
    Channels,
    Volume,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayDesc {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: Kind,
    pub dimension: usize,
    pub grids: Value,
    pub config: RunConfig,
    pub arrays: Vec<ArrayDesc>,
    #[serde(default)]
    pub meta: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Header,
    pub arrays: Vec<Vec<f64>>,
}

fn fmt_err(msg: impl Into<String>) -> HtrwError {
    HtrwError::Format(msg.into())
}

impl Container {
    pub fn new(kind: Kind, dimension: usize, grids: Value, config: &RunConfig) -> Self {
        Container {
            header: Header { kind, dimension, grids, config: config.clone(), arrays: Vec::new(), meta: Value::Null },
            arrays: Vec::new(),
        }
    }

    pub fn push_array(&mut self, name: &str, data: Vec<f64>) {
        self.header.arrays.push(ArrayDesc { name: name.to_string(), len: data.len() });
        self.arrays.push(data);
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        self.header
            .arrays
            .iter()
            .position(|a| a.name == name)
            .map(|i| self.arrays[i].as_slice())
            .ok_or_else(|| fmt_err(format!("container has no array '{name}'")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let payload: usize = self.arrays.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for a in &self.arrays {
            for v in a {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(fmt_err("not an HTRW container (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(fmt_err(format!("unsupported container version {version} (expected {FORMAT_VERSION})")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let rest = (bytes.len() - 16) as u64;
        if hlen > rest {
            return Err(fmt_err(format!("header length {hlen} exceeds file size")));
        }
        let hend = 16 + hlen as usize;
        let header: Header = serde_json::from_slice(&bytes[16..hend])?;
        let declared: usize = header.arrays.iter().map(|a| a.len).sum();
        let payload = &bytes[hend..];
        if declared.checked_mul(8) != Some(payload.len()) {
            return Err(fmt_err(format!(
                "payload is {} bytes, header declares {} values",
                payload.len(),
                declared
            )));
        }
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut off = 0;
        for a in &header.arrays {
            let v = payload[off..off + 8 * a.len]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            off += 8 * a.len;
            arrays.push(v);
        }
        Ok(Container { header, arrays })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn expect_kind(&self, kind: Kind) -> Result<()> {
        if self.header.kind != kind {
            return Err(fmt_err(format!("expected a {kind:?} container, found {:?}", self.header.kind)));
        }
        Ok(())
    }

    fn grid_field(&self, key: &str) -> Result<&Value> {
        self.header.grids.get(key).ok_or_else(|| fmt_err(format!("header grids lack '{key}'")))
    }
}

fn as_usize(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| fmt_err(format!("missing integer '{key}'")))
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    v.get(key).and_then(Value::as_f64).ok_or_else(|| fmt_err(format!("missing number '{key}'")))
}

fn sphere_json(sg: &SphereGrid) -> Value {
    json!({ "dim": sg.dim, "q": sg.q })
}

fn sphere_from(v: &Value) -> Result<SphereGrid> {
    make_sphere_grid(as_usize(v, "dim")?, as_usize(v, "q")?).map_err(|e| fmt_err(e.to_string()))
}

fn time_json(tg: &TimeGrid) -> Value {
    json!({ "n_t": tg.n_t, "t_ext": tg.t_ext })
}

fn time_from(v: &Value) -> Result<TimeGrid> {
    TimeGrid::new(as_usize(v, "n_t")?, as_f64(v, "t_ext")?).map_err(|e| fmt_err(e.to_string()))
}

pub fn phantom_container(ph: &Phantom, cfg: &RunConfig) -> Container {
    let mut c = Container::new(Kind::Phantom, ph.dim, json!({ "bumps": ph.bumps.len() }), cfg);
    let flat = ph
        .bumps
        .iter()
        .flat_map(|b| b.center.iter().copied().chain([b.rho, b.amp]))
        .collect();
    c.push_array("bumps", flat);
    c
}

pub fn phantom_from(c: &Container) -> Result<Phantom> {
    c.expect_kind(Kind::Phantom)?;
    let d = c.header.dimension;
    let flat = c.array("bumps")?;
    if flat.len() % (d + 2) != 0 {
        return Err(fmt_err("bump array length is not a multiple of d + 2"));
    }
    let bumps = flat
        .chunks_exact(d + 2)
        .map(|r| Bump::new(r[..d].to_vec(), r[d], r[d + 1]))
        .collect();
    Phantom::new(d, bumps)
}

pub fn boundary_container(b: &BoundaryData, cfg: &RunConfig) -> Container {
    let grids = json!({ "sphere": sphere_json(&b.sphere), "time": time_json(&b.time), "t_quiet": b.t_quiet });
    let mut c = Container::new(Kind::Boundary, b.sphere.dim, grids, cfg);
    c.push_array("values", b.values.clone());
    c
}

pub fn boundary_from(c: &Container) -> Result<BoundaryData> {
    c.expect_kind(Kind::Boundary)?;
    let sg = sphere_from(c.grid_field("sphere")?)?;
    let tg = time_from(c.grid_field("time")?)?;
    BoundaryData::new(sg, tg, c.array("values")?.to_vec()).map_err(|e| fmt_err(e.to_string()))
}

pub fn sinogram_container(f: &Sinogram, cfg: &RunConfig) -> Container {
    let p = &f.pgrid;
    let grids = json!({ "sphere": sphere_json(&f.sphere), "p": { "lo": p.lo, "hi": p.hi, "n": p.n } });
    let mut c = Container::new(Kind::Sinogram, f.sphere.dim, grids, cfg);
    c.push_array("values", f.values.clone());
    c
}

pub fn sinogram_from(c: &Container) -> Result<Sinogram> {
    c.expect_kind(Kind::Sinogram)?;
    let sphere = sphere_from(c.grid_field("sphere")?)?;
    let p = c.grid_field("p")?;
    let pgrid = PGrid::new(as_f64(p, "lo")?, as_f64(p, "hi")?, as_usize(p, "n")?);
    let values = c.array("values")?.to_vec();
    if values.len() != sphere.len() * pgrid.n {
        return Err(fmt_err("sinogram size does not match its grids"));
    }
    Ok(Sinogram { sphere, pgrid, values })
}

/// Time series only; spectra are recomputed on demand.
pub fn channels_container(h: &HarmonicChannels, cfg: &RunConfig) -> Container {
    let grids = json!({ "lmax": h.lmax, "time": time_json(&h.time), "b_norm": h.b_norm });
    let mut c = Container::new(Kind::Channels, h.dim, grids, cfg);
    c.push_array("series", h.series.iter().flatten().copied().collect());
    c
}

pub fn channels_from(c: &Container) -> Result<HarmonicChannels> {
    c.expect_kind(Kind::Channels)?;
    let d = c.header.dimension;
    let lmax = as_usize(&c.header.grids, "lmax")?;
    let time = time_from(c.grid_field("time")?)?;
    let b_norm = as_f64(&c.header.grids, "b_norm")?;
    let flat = c.array("series")?;
    let np = time.n_phys();
    let indices = harmonic_indices(d, lmax);
    if flat.len() != indices.len() * np {
        return Err(fmt_err("channel array size does not match its grids"));
    }
    let series = flat.chunks_exact(np).map(<[f64]>::to_vec).collect();
    Ok(HarmonicChannels { dim: d, lmax, time, indices, series, spectra: None, freq: None, b_norm })
}

pub fn volume_container(v: &ReconVolume, cfg: &RunConfig) -> Container {
    let mut c = Container::new(Kind::Volume, v.dim, json!({ "n": v.n, "lo": -1.0, "hi": 1.0 }), cfg);
    c.push_array("values", v.values.clone());
    c
}

pub fn volume_from(c: &Container) -> Result<ReconVolume> {
    c.expect_kind(Kind::Volume)?;
    let dim = c.header.dimension;
    let n = as_usize(&c.header.grids, "n")?;
    let values = c.array("values")?.to_vec();
    if values.len() != n.pow(dim as u32) {
        return Err(fmt_err("volume size does not match its grid"));
    }
    Ok(ReconVolume { dim, n, values })
}

/// The report travels in the header; there is no payload.
pub fn report_container(r: &RangeReport, cfg: &RunConfig) -> Result<Container> {
    let mut c = Container::new(Kind::Report, r.dimension, r.grids.clone(), cfg);
    c.header.meta = serde_json::to_value(r)?;
    Ok(c)
}

pub fn report_from(c: &Container) -> Result<RangeReport> {
    c.expect_kind(Kind::Report)?;
    Ok(serde_json::from_value(c.header.meta.clone())?)
}
