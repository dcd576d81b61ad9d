//! Flat `key = value` configuration with the precedence
//! built-in preset < config file < command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use magsplit::nfft::DEFAULT_MEMORY_BUDGET;
use magsplit::presets::{by_name, Experiment, Formulation};
use magsplit::{AdvectionBackend, NfftConfig, Precompute, SplittingScheme};

use crate::custom;

/// A configuration problem; reported with exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Keys shared by every preset. Flags mirror them with `-` for `_`.
pub const RUN_KEYS: &[&str] = &[
    "preset",
    "N",
    "steps",
    "T",
    "eps",
    "scheme",
    "backend",
    "p",
    "m",
    "precompute",
    "mem_budget",
    "substeps",
    "formulation",
    "order_sweep",
    "out",
    "seed",
    "plot",
];

pub const PRESETS: &[&str] = &["ex1d", "ex2d", "ex3d", "custom"];

pub const DEFAULT_OUT: &str = "magsplit-out";
pub const DEFAULT_INTERP_ORDER: usize = 8;

fn valid_keys() -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = RUN_KEYS.to_vec();
    for k in custom::REQUIRED_KEYS.iter().chain(custom::OPTIONAL_KEYS) {
        if !keys.contains(k) {
            keys.push(k);
        }
    }
    keys
}

fn canonical_key(raw: &str) -> Result<String> {
    let key = raw.trim().replace('-', "_");
    let valid = valid_keys();
    if valid.contains(&key.as_str()) {
        return Ok(key);
    }
    // N and T are conventionally upper case, accept either
    if let Some(k) = valid.iter().find(|k| k.eq_ignore_ascii_case(&key)) {
        return Ok(k.to_string());
    }
    bail!(ConfigError(format!("unknown key '{}'; valid keys: {}", raw.trim(), valid.join(", "))))
}

/// `key = value` lines; `#` starts a comment line.
pub fn parse_text(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!(ConfigError(format!("{origin}:{}: expected 'key = value', got '{line}'", i + 1)));
        };
        let key = canonical_key(k).map_err(|e| ConfigError(format!("{origin}:{}: {e}", i + 1)))?;
        if out.iter().any(|(existing, _)| *existing == key) {
            bail!(ConfigError(format!("{origin}:{}: key '{key}' is set twice", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", path.display())))?;
    parse_text(&text, &path.display().to_string())
}

/// Merges the layers in order; later layers win.
pub fn merge(layers: &[Vec<(String, String)>]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for layer in layers {
        for (k, v) in layer {
            map.insert(canonical_key(k)?, v.clone());
        }
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    map.get(key)
        .map(|raw| {
            raw.trim()
                .parse::<T>()
                .map_err(|e| ConfigError(format!("key '{key}': invalid value '{raw}': {e}")).into())
        })
        .transpose()
}

/// One integer for every axis, or one per axis separated by commas.
pub fn parse_sizes(raw: &str, dim: usize) -> Result<Vec<usize>> {
    let parts: Vec<usize> = raw
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError(format!("key 'N': invalid value '{raw}': {e}")))?;
    let sizes = match parts.len() {
        1 => vec![parts[0]; dim],
        n if n == dim => parts,
        n => bail!(ConfigError(format!("key 'N': {n} sizes given for {dim} dimensions"))),
    };
    if let Some(bad) = sizes.iter().find(|&&n| n < 2 || n % 2 == 1) {
        bail!(ConfigError(format!("key 'N': sizes must be even and at least 2, got {bad}")));
    }
    Ok(sizes)
}

fn parse_flag(key: &str, raw: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => bail!(ConfigError(format!("key '{key}': expected true or false, got '{raw}'"))),
    }
}

pub fn parse_precompute(raw: &str) -> Result<Precompute> {
    match raw.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "onfly" | "on_the_fly" => Ok(Precompute::OnTheFly),
        "psi" | "pre_psi" => Ok(Precompute::PrePsi),
        "fullpsi" | "pre_full_psi" => Ok(Precompute::PreFullPsi),
        _ => bail!(ConfigError(format!("key 'precompute': expected onfly, psi or fullpsi, got '{raw}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BackendKind {
    Direct,
    Interp,
    Nfft,
}

fn parse_backend(raw: &str) -> Result<BackendKind> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "dfs" | "direct" => Ok(BackendKind::Direct),
        "interp" => Ok(BackendKind::Interp),
        "nfft" => Ok(BackendKind::Nfft),
        _ => bail!(ConfigError(format!("key 'backend': expected dfs, interp or nfft, got '{raw}'"))),
    }
}

fn kind_of(b: &AdvectionBackend) -> BackendKind {
    match b {
        AdvectionBackend::DirectFourier => BackendKind::Direct,
        AdvectionBackend::LocalInterp { .. } => BackendKind::Interp,
        AdvectionBackend::Nfft(_) => BackendKind::Nfft,
    }
}

fn parse_formulation(raw: &str) -> Result<Formulation> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "gauged" => Ok(Formulation::Gauged),
        "corrected" => Ok(Formulation::Corrected),
        _ => bail!(ConfigError(format!("key 'formulation': expected gauged or corrected, got '{raw}'"))),
    }
}

fn parse_sweep(raw: &str) -> Result<Vec<usize>> {
    let steps: Vec<usize> = raw
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError(format!("key 'order_sweep': invalid list '{raw}': {e}")))?;
    if steps.len() < 3 {
        bail!(ConfigError(format!("key 'order_sweep': an order fit needs at least 3 step counts, got {}", steps.len())));
    }
    if steps.contains(&0) {
        bail!(ConfigError("key 'order_sweep': step counts must be positive".into()));
    }
    Ok(steps)
}

/// A validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: String,
    pub experiment: Experiment,
    pub formulation: Formulation,
    pub order_sweep: Vec<usize>,
    pub out: PathBuf,
    pub seed: u64,
    pub plot: bool,
    /// The merged key/value layers, for the report.
    pub settings: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let Some(preset) = map.get("preset").map(|s| s.trim().to_string()) else {
            bail!(ConfigError(format!("no preset given; choose one of {}", PRESETS.join(", "))));
        };
        let mut e = match preset.as_str() {
            "custom" => custom::experiment(&map)?,
            name if PRESETS.contains(&name) => by_name(name)?,
            other => bail!(ConfigError(format!("unknown preset '{other}'; choose one of {}", PRESETS.join(", ")))),
        };
        if preset != "custom" {
            if let Some(key) = ["dim", "lo", "hi", "V", "ax", "ay", "az", "u0_re", "u0_im"].iter().find(|k| map.contains_key(**k)) {
                bail!(ConfigError(format!("key '{key}' only applies to the custom preset")));
            }
        }
        let dim = e.domain.dim();
        if let Some(raw) = map.get("N") {
            e.sizes = parse_sizes(raw, dim)?;
        }
        if let Some(steps) = parse_value::<usize>(&map, "steps")? {
            if steps == 0 {
                bail!(ConfigError("key 'steps': at least one step is required".into()));
            }
            e.steps = steps;
        }
        if let Some(t) = parse_value::<f64>(&map, "T")? {
            if !(t > 0.0 && t.is_finite()) {
                bail!(ConfigError(format!("key 'T': final time must be positive, got {t}")));
            }
            e.final_time = t;
        }
        if let Some(eps) = parse_value::<f64>(&map, "eps")? {
            if !(eps > 0.0 && eps <= 1.0) {
                bail!(ConfigError(format!("key 'eps': expected 0 < eps <= 1, got {eps}")));
            }
            e.epsilon = eps;
        }
        if let Some(raw) = map.get("scheme") {
            e.scheme = raw.trim().parse::<SplittingScheme>().map_err(|err| ConfigError(format!("key 'scheme': {err}")))?;
        }
        if let Some(s) = parse_value::<usize>(&map, "substeps")? {
            if s == 0 {
                bail!(ConfigError("key 'substeps': at least one substep is required".into()));
            }
            e.substeps = s;
        }
        e.backend = backend(&map, &e.backend)?;
        let formulation = map.get("formulation").map(|r| parse_formulation(r)).transpose()?.unwrap_or_default();
        let order_sweep = map.get("order_sweep").map(|r| parse_sweep(r)).transpose()?.unwrap_or_default();
        let plot = map.get("plot").map(|r| parse_flag("plot", r)).transpose()?.unwrap_or(false);
        Ok(Self {
            preset,
            experiment: e,
            formulation,
            order_sweep,
            out: PathBuf::from(map.get("out").map(|s| s.trim()).unwrap_or(DEFAULT_OUT)),
            seed: parse_value::<u64>(&map, "seed")?.unwrap_or(0),
            plot,
            settings: map,
        })
    }

    /// Preset, then the optional file, then the flags.
    pub fn load(config_file: Option<&Path>, flags: Vec<(String, String)>) -> Result<Self> {
        let file = match config_file {
            Some(p) => read_file(p)?,
            None => Vec::new(),
        };
        let map = merge(&[file, flags])?;
        Self::from_map(map)
    }
}

fn backend(map: &BTreeMap<String, String>, preset: &AdvectionBackend) -> Result<AdvectionBackend> {
    let kind = match map.get("backend") {
        Some(raw) => parse_backend(raw)?,
        None => kind_of(preset),
    };
    let p = parse_value::<usize>(map, "p")?;
    let m = parse_value::<usize>(map, "m")?;
    let budget = parse_value::<u128>(map, "mem_budget")?;
    let precompute = map.get("precompute").map(|r| parse_precompute(r)).transpose()?;
    if kind != BackendKind::Interp && p.is_some() {
        bail!(ConfigError("key 'p' applies only to backend interp".into()));
    }
    if kind != BackendKind::Nfft {
        for (key, set) in [("m", m.is_some()), ("precompute", precompute.is_some()), ("mem_budget", budget.is_some())] {
            if set {
                bail!(ConfigError(format!("key '{key}' applies only to backend nfft")));
            }
        }
    }
    Ok(match kind {
        BackendKind::Direct => AdvectionBackend::DirectFourier,
        BackendKind::Interp => {
            let p = p.unwrap_or(match preset {
                AdvectionBackend::LocalInterp { p } => *p,
                _ => DEFAULT_INTERP_ORDER,
            });
            if p == 0 || p % 2 == 1 || p > 64 {
                bail!(ConfigError(format!("key 'p': interpolation order must be even and between 2 and 64, got {p}")));
            }
            AdvectionBackend::LocalInterp { p }
        }
        BackendKind::Nfft => {
            let mut cfg = match preset {
                AdvectionBackend::Nfft(c) => c.clone(),
                _ => NfftConfig::default(),
            };
            if let Some(m) = m {
                if m == 0 {
                    bail!(ConfigError("key 'm': cutoff must be at least 1".into()));
                }
                cfg.m = m;
            }
            if let Some(pc) = precompute {
                cfg.precompute = pc;
            }
            cfg.memory_budget = budget.unwrap_or(DEFAULT_MEMORY_BUDGET);
            AdvectionBackend::Nfft(cfg)
        }
    })
}
