//! Config files, run manifests, binary snapshots, CSV time series and run
//! directories.
//!
//! # Config format
//!
//! One `key = value` pair per line; `#` starts a comment. Unknown keys and
//! repeated keys are errors. `k` and `l` are required; every other key
//! falls back to the default listed in [`KEYS`].
//!
//! # Snapshot format
//!
//! `b"SBURG001"`, `n: u32`, `L: f64`, `t: f64`, then `n` values, all
//! little-endian.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grid::{Field, Grid};
use crate::integrator::{DiagRow, InitialKind, SimConfig, SimParams};
use crate::noise::SigmaKind;
use crate::{Error, Result};

/// Accepted keys with their defaults, in render order.
pub const KEYS: [(&str, &str); 19] = [
    ("L", "32"),
    ("n", "2047"),
    ("dt", "0.001"),
    ("T", "50"),
    ("k", "required"),
    ("l", "required"),
    ("sigma_kind", "linear"),
    ("a0", "0.5"),
    ("r", "1"),
    ("J", "64"),
    ("M", "200"),
    ("seed", "42"),
    ("N_max", "100"),
    ("p", "2"),
    ("snapshot_stride", "50"),
    ("retain_states", "false"),
    ("u0", "gaussian"),
    ("u0_amp", "1"),
    ("convection", "true"),
];

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config { line, msg: format!("`{key}` expects a {}, got `{v}`", kind_name::<T>()) })
}

fn kind_name<T>() -> &'static str {
    let n = std::any::type_name::<T>();
    match n {
        "f64" => "real number",
        "usize" | "u64" => "nonnegative integer",
        "bool" => "boolean (true/false)",
        _ => n,
    }
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut p = SimParams::default();
    let mut seen: Vec<&str> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Config { line, msg: format!("expected key = value, got `{body}`") })?;
        let Some(&(key, _)) = KEYS.iter().find(|(k, _)| *k == key) else {
            return Err(Error::Config { line, msg: format!("unknown key `{key}`") });
        };
        if seen.contains(&key) {
            return Err(Error::Config { line, msg: format!("key `{key}` given twice") });
        }
        seen.push(key);
        match key {
            "L" => p.half_width = parse_value(line, key, value)?,
            "n" => p.n = parse_value(line, key, value)?,
            "dt" => p.dt = parse_value(line, key, value)?,
            "T" => p.horizon = parse_value(line, key, value)?,
            "k" => p.k = parse_value(line, key, value)?,
            "l" => p.l = parse_value(line, key, value)?,
            "sigma_kind" => {
                p.sigma_kind = SigmaKind::parse(value)
                    .ok_or_else(|| Error::Config { line, msg: format!("sigma_kind must be linear or saturating, got `{value}`") })?
            }
            "a0" => p.a0 = parse_value(line, key, value)?,
            "r" => p.r = parse_value(line, key, value)?,
            "J" => p.modes = parse_value(line, key, value)?,
            "M" => p.ensemble = parse_value(line, key, value)?,
            "seed" => p.seed = parse_value(line, key, value)?,
            "N_max" => p.n_max = parse_value(line, key, value)?,
            "p" => p.p = parse_value(line, key, value)?,
            "snapshot_stride" => p.snapshot_stride = parse_value(line, key, value)?,
            "retain_states" => p.retain_states = parse_value(line, key, value)?,
            "u0" => {
                p.u0 = InitialKind::parse(value)
                    .ok_or_else(|| Error::Config { line, msg: format!("u0 must be gaussian, mode1 or zero, got `{value}`") })?
            }
            "u0_amp" => p.u0_amp = parse_value(line, key, value)?,
            "convection" => p.convection = parse_value(line, key, value)?,
            _ => unreachable!(),
        }
    }
    for req in ["k", "l"] {
        if !seen.contains(&req) {
            return Err(Error::MissingKey(req));
        }
    }
    SimConfig::new(p)
}

/// Every key, one per line, in [`KEYS`] order. Parses back to an equal config.
pub fn render(cfg: &SimConfig) -> String {
    let p = cfg.params();
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("L", p.half_width.to_string());
    put("n", p.n.to_string());
    put("dt", p.dt.to_string());
    put("T", p.horizon.to_string());
    put("k", p.k.to_string());
    put("l", p.l.to_string());
    put("sigma_kind", p.sigma_kind.name().into());
    put("a0", p.a0.to_string());
    put("r", p.r.to_string());
    put("J", p.modes.to_string());
    put("M", p.ensemble.to_string());
    put("seed", p.seed.to_string());
    put("N_max", p.n_max.to_string());
    put("p", p.p.to_string());
    put("snapshot_stride", p.snapshot_stride.to_string());
    put("retain_states", p.retain_states.to_string());
    put("u0", p.u0.name().into());
    put("u0_amp", p.u0_amp.to_string());
    put("convection", p.convection.to_string());
    s
}

/// Human-readable warnings for parameters outside the proven regimes.
pub fn regime_warnings(cfg: &SimConfig) -> Vec<String> {
    let mut w = Vec::new();
    let al2 = cfg.noise_strength();
    if !cfg.bound_regime() {
        w.push(format!("a*l^2 = {al2:.6} >= k/(p-1) = {:.6}: moment bound not guaranteed", cfg.moment_threshold()));
    }
    if !cfg.invariant_regime() {
        w.push(format!(
            "a*l^2 = {al2:.6} >= 3k/7 = {:.6}: existence of an invariant measure not guaranteed",
            cfg.invariant_threshold()
        ));
    }
    w
}

/// Errors unless `a·l² < 3k/7`.
pub fn require_invariant_regime(cfg: &SimConfig) -> Result<()> {
    if cfg.invariant_regime() {
        Ok(())
    } else {
        Err(Error::Regime(format!(
            "a*l^2 = {:.6} must be below 3k/7 = {:.6} for the invariant-measure suite",
            cfg.noise_strength(),
            cfg.invariant_threshold()
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `a = Σ a_j²`
    pub trace: f64,
    pub noise_strength: f64,
    pub moment_threshold: f64,
    pub invariant_threshold: f64,
    pub bound_regime: bool,
    pub invariant_regime: bool,
}

impl DerivedConstants {
    pub fn of(cfg: &SimConfig) -> Self {
        Self {
            trace: cfg.trace(),
            noise_strength: cfg.noise_strength(),
            moment_threshold: cfg.moment_threshold(),
            invariant_threshold: cfg.invariant_threshold(),
            bound_regime: cfg.bound_regime(),
            invariant_regime: cfg.invariant_regime(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command options as `(name, value)` pairs, in the order given.
    pub options: Vec<(String, String)>,
    /// Rendered config.
    pub config: String,
    pub seed: u64,
    pub derived: DerivedConstants,
    /// Output files relative to the run directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &SimConfig, command: &str, options: Vec<(String, String)>) -> Self {
        Self {
            tool: "sburg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            options,
            config: render(cfg),
            seed: cfg.params().seed,
            derived: DerivedConstants::of(cfg),
            outputs: Vec::new(),
        }
    }

    /// First 16 hex digits of the SHA-256 of everything but the outputs.
    pub fn key(&self) -> String {
        let ident = Self { outputs: Vec::new(), ..self.clone() };
        let bytes = serde_json::to_vec(&ident).expect("manifest serializes");
        Sha256::digest(&bytes).iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Parses a manifest and checks its derived constants against the config.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        let cfg = m.sim_config()?;
        if DerivedConstants::of(&cfg) != m.derived {
            return Err(Error::Format("stored derived constants do not match the config".into()));
        }
        Ok(m)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        parse_config(&self.config)
    }
}

const MAGIC: &[u8; 8] = b"SBURG001";

pub fn write_snapshot(w: &mut impl Write, f: &Field, t: f64) -> Result<()> {
    let g = f.grid();
    let n = u32::try_from(g.len()).map_err(|_| Error::Format("grid too large".into()))?;
    let mut buf = Vec::with_capacity(28 + 8 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&g.half_width().to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(r: &mut impl Read) -> Result<(Field, f64)> {
    let mut head = [0u8; 28];
    r.read_exact(&mut head).map_err(|_| Error::Format("truncated header".into()))?;
    if &head[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let n = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let l = f64::from_le_bytes(head[12..20].try_into().expect("8 bytes"));
    let t = f64::from_le_bytes(head[20..28].try_into().expect("8 bytes"));
    let mut body = vec![0u8; 8 * n];
    r.read_exact(&mut body).map_err(|_| Error::Format("truncated body".into()))?;
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((Field::new(Grid::new(l, n)?, values)?, t))
}

pub const TIMESERIES_HEADER: &str = "t,l2sq,lpp,h1sq,tail_N1,tail_N2,c1,c2,c3,c4,c5,c6,c7,c8";

/// One line per row under [`TIMESERIES_HEADER`]; `tail_N1`, `tail_N2` are
/// the tail masses at `L/4` and `L/2`.
pub fn timeseries_csv(rows: &[DiagRow]) -> String {
    let mut s = String::with_capacity(200 * (rows.len() + 1));
    s.push_str(TIMESERIES_HEADER);
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{:e},{:e},{:e},{:e},{:e}", r.t, r.l2sq, r.lpp, r.h1sq, r.tail[0], r.tail[1]);
        for c in &r.coeffs {
            let _ = write!(s, ",{c:e}");
        }
        s.push('\n');
    }
    s
}

/// Output directory `<root>/<manifest key>`. The manifest is written by
/// [`RunDir::commit`], after every other file.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    pub fn create(root: &Path, manifest: RunManifest) -> Result<Self> {
        let path = root.join(manifest.key());
        if path.join("manifest.json").exists() {
            fs::remove_file(path.join("manifest.json"))?;
        }
        fs::create_dir_all(&path)?;
        Ok(Self { path, manifest })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = Path::new(name).parent() {
            fs::create_dir_all(self.path.join(dir))?;
        }
        fs::write(self.path.join(name), bytes)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        self.manifest.outputs.sort();
        fs::write(self.path.join("manifest.json"), self.manifest.to_json())?;
        Ok(self.path)
    }
}
