//! Plain-text configuration: one `section.key = value` per line, `#` comments.
//!
//! ```text
//! grid.dim = 2
//! grid.n_cells = 128
//! domain.shape = sphere
//! domain.radius = 0.3
//! initial.P0 = uniform(0.6)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::format_number;
use crate::domain::{AdvectionScheme, BoundaryVelocity, Shape, VelocityPreset};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{validate_params, POSITIVE_KEYS, RATE_KEYS, RESPONSE_KEYS};
use crate::sim::{InitialProfile, Numerics, RunSettings, Scenario};

const SCHEME_KEYS: [&str; 3] = ["eps_penalty", "omega", "eta"];
const NUMERIC_KEYS: [&str; 11] = [
    "eps_chem",
    "lambda_pen",
    "picard_sweeps",
    "picard_tol",
    "cfl_safety",
    "dt_max",
    "reinit_every",
    "smoothing_k",
    "tol_lin",
    "scheme",
    "project_sum",
];
const INITIAL_KEYS: [&str; 5] = ["P0", "Q0", "D0", "C0", "W0"];

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: Scenario,
    pub run: RunSettings,
    pub warnings: Vec<String>,
}

fn known_key(key: &str) -> bool {
    const FIXED: [&str; 21] = [
        "grid.dim",
        "grid.n_cells",
        "grid.half_extent",
        "domain.shape",
        "domain.center",
        "domain.radius",
        "domain.semi_axes",
        "domain.spheres",
        "domain.velocity",
        "domain.velocity.vector",
        "domain.velocity.rate",
        "domain.velocity.angular",
        "domain.velocity.scale",
        "domain.velocity.expr.x",
        "domain.velocity.expr.y",
        "domain.velocity.expr.z",
        "run.T",
        "run.snapshot_every",
        "run.out_dir",
        "run.deterministic",
        "run.wall_clock_budget",
    ];
    if FIXED.contains(&key) {
        return true;
    }
    if let Some(k) = key.strip_prefix("params.") {
        return RATE_KEYS.contains(&k) || POSITIVE_KEYS.contains(&k) || RESPONSE_KEYS.contains(&k);
    }
    if let Some(k) = key.strip_prefix("numerics.") {
        return SCHEME_KEYS.contains(&k) || NUMERIC_KEYS.contains(&k);
    }
    if let Some(k) = key.strip_prefix("initial.") {
        return INITIAL_KEYS.contains(&k);
    }
    false
}

/// Parse `key = value` lines into a map; rejects unknown and repeated keys.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !known_key(k) {
            return Err(Error::Config(format!("unknown key '{k}' (line {})", n + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("key '{k}' set twice")));
        }
    }
    Ok(map)
}

/// Apply `key=value`, with the same key rules as the file.
pub fn apply_override(map: &mut BTreeMap<String, String>, entry: &str) -> Result<()> {
    let (k, v) = entry.split_once('=').ok_or_else(|| Error::Config(format!("override '{entry}' is not key=value")))?;
    let k = k.trim();
    if !known_key(k) {
        return Err(Error::Config(format!("unknown key '{k}'")));
    }
    map.insert(k.to_string(), v.trim().to_string());
    Ok(())
}

fn num(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{key}: '{s}' is not a finite number"))),
    }
}

fn req(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    num(map, key)?.ok_or_else(|| Error::Config(format!("{key} is required")))
}

fn int(map: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    match map.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{key}: '{s}' is not a nonnegative integer"))),
    }
}

fn boolean(map: &BTreeMap<String, String>, key: &str) -> Result<Option<bool>> {
    match map.get(key).map(String::as_str) {
        None => Ok(None),
        Some("true") => Ok(Some(true)),
        Some("false") => Ok(Some(false)),
        Some(s) => Err(Error::Config(format!("{key}: '{s}' is not true/false"))),
    }
}

fn vector(key: &str, s: &str, dim: usize) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: bad component in '{s}'"))))
        .collect::<Result<_>>()?;
    if parts.len() != dim {
        return Err(Error::Config(format!("{key}: expected {dim} components, got {}", parts.len())));
    }
    let mut v = [0.0; 3];
    v[..dim].copy_from_slice(&parts);
    Ok(v)
}

fn fmt_vec(v: &[f64; 3], dim: usize) -> String {
    v[..dim].iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(",")
}

fn parse_profile(key: &str, s: &str, dim: usize) -> Result<InitialProfile> {
    let s = s.trim();
    let bad = || {
        Error::Config(format!(
            "{key}: cannot parse profile '{s}' (zero, complement, uniform(v), gaussian(center;width;amplitude))"
        ))
    };
    match s {
        "zero" => return Ok(InitialProfile::Zero),
        "complement" => return Ok(InitialProfile::Complement),
        _ => {}
    }
    let (name, rest) = s.split_once('(').ok_or_else(bad)?;
    let inner = rest.strip_suffix(')').ok_or_else(bad)?;
    match name.trim() {
        "uniform" => {
            let v: f64 = inner.trim().parse().map_err(|_| bad())?;
            Ok(InitialProfile::Uniform(v))
        }
        "gaussian" => {
            let parts: Vec<&str> = inner.split(';').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let center = vector(key, parts[0], dim)?;
            let width: f64 = parts[1].trim().parse().map_err(|_| bad())?;
            let amplitude: f64 = parts[2].trim().parse().map_err(|_| bad())?;
            Ok(InitialProfile::Gaussian { center, width, amplitude })
        }
        _ => Err(bad()),
    }
}

fn fmt_profile(p: &InitialProfile, dim: usize) -> String {
    match p {
        InitialProfile::Zero => "zero".into(),
        InitialProfile::Complement => "complement".into(),
        InitialProfile::Uniform(v) => format!("uniform({})", format_number(*v)),
        InitialProfile::Gaussian { center, width, amplitude } => {
            format!("gaussian({};{};{})", fmt_vec(center, dim), format_number(*width), format_number(*amplitude))
        }
    }
}

fn parse_shape(map: &BTreeMap<String, String>, dim: usize) -> Result<Shape> {
    let kind = map.get("domain.shape").map(String::as_str).unwrap_or("sphere");
    let center = match map.get("domain.center") {
        Some(s) => vector("domain.center", s, dim)?,
        None => [0.0; 3],
    };
    let shape = match kind {
        "sphere" => Shape::Sphere { center, radius: req(map, "domain.radius")? },
        "ellipsoid" => {
            let s = map.get("domain.semi_axes").ok_or_else(|| Error::Config("domain.semi_axes is required".into()))?;
            let mut semi_axes = vector("domain.semi_axes", s, dim)?;
            for a in dim..3 {
                semi_axes[a] = semi_axes[0];
            }
            Shape::Ellipsoid { center, semi_axes }
        }
        "union" => {
            let s = map.get("domain.spheres").ok_or_else(|| Error::Config("domain.spheres is required".into()))?;
            let parts = s
                .split(';')
                .filter(|p| !p.trim().is_empty())
                .map(|p| {
                    let v = vector("domain.spheres", p, dim + 1)?;
                    let mut c = [0.0; 3];
                    c[..dim].copy_from_slice(&v[..dim]);
                    Ok((c, v[dim]))
                })
                .collect::<Result<Vec<_>>>()?;
            Shape::Union(parts)
        }
        other => return Err(Error::Config(format!("domain.shape: unknown shape '{other}'"))),
    };
    shape.validate()?;
    Ok(shape)
}

fn parse_velocity(map: &BTreeMap<String, String>, dim: usize, support: f64) -> Result<BoundaryVelocity> {
    let kind = map.get("domain.velocity").map(String::as_str).unwrap_or("zero");
    let scale = num(map, "domain.velocity.scale")?.unwrap_or(0.8 * support);
    let preset = match kind {
        "zero" => return Ok(BoundaryVelocity::zero(support)),
        "translation" => {
            let s = map
                .get("domain.velocity.vector")
                .ok_or_else(|| Error::Config("domain.velocity.vector is required".into()))?;
            VelocityPreset::Translation(vector("domain.velocity.vector", s, dim)?)
        }
        "radial_expansion" => VelocityPreset::RadialExpansion { rate: req(map, "domain.velocity.rate")? },
        "rotation" => {
            if dim != 2 {
                return Err(Error::Config("rotation preset is two-dimensional".into()));
            }
            VelocityPreset::Rotation { angular: req(map, "domain.velocity.angular")? }
        }
        "expression" => {
            let exprs = ["x", "y", "z"][..dim]
                .iter()
                .map(|c| {
                    map.get(&format!("domain.velocity.expr.{c}"))
                        .cloned()
                        .ok_or_else(|| Error::Config(format!("domain.velocity.expr.{c} is required")))
                })
                .collect::<Result<Vec<_>>>()?;
            return BoundaryVelocity::user_expression(&exprs, scale, support);
        }
        other => return Err(Error::Config(format!("domain.velocity: unknown preset '{other}'"))),
    };
    BoundaryVelocity::new(preset, scale, support)
}

/// Build a validated [`Config`] from a key map.
pub fn config_from_map(map: &BTreeMap<String, String>) -> Result<Config> {
    for k in map.keys() {
        if !known_key(k) {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
    }
    let dim = int(map, "grid.dim")?.ok_or_else(|| Error::Config("grid.dim is required".into()))?;
    let n_cells = int(map, "grid.n_cells")?.ok_or_else(|| Error::Config("grid.n_cells is required".into()))?;
    let half_extent = req(map, "grid.half_extent")?;
    let grid = Grid::new(dim, n_cells, half_extent)?;
    let support = grid.support_radius();

    let shape = parse_shape(map, dim)?;
    let reach = shape.outer_radius();
    if reach >= support {
        return Err(Error::Shape(format!("shape reaches |x| = {reach}; it must lie inside |x| < R = {support}")));
    }
    let velocity = parse_velocity(map, dim, support)?;

    let mut flat = BTreeMap::new();
    for (k, v) in map {
        if let Some(s) = k.strip_prefix("params.") {
            flat.insert(s.to_string(), v.clone());
        }
    }
    for s in SCHEME_KEYS {
        if let Some(v) = map.get(&format!("numerics.{s}")) {
            flat.insert(s.to_string(), v.clone());
        }
    }
    let (params, warnings) = validate_params(&flat)?;

    let d = Numerics::default();
    let scheme = match map.get("numerics.scheme").map(String::as_str) {
        None | Some("upwind1") => AdvectionScheme::Upwind1,
        Some("eno2") => AdvectionScheme::Eno2,
        Some(s) => return Err(Error::Config(format!("numerics.scheme: unknown scheme '{s}' (upwind1 or eno2)"))),
    };
    let numerics = Numerics {
        eps_chem: num(map, "numerics.eps_chem")?,
        lambda_pen: num(map, "numerics.lambda_pen")?.unwrap_or(d.lambda_pen),
        picard_sweeps: int(map, "numerics.picard_sweeps")?.unwrap_or(d.picard_sweeps),
        picard_tol: num(map, "numerics.picard_tol")?.unwrap_or(d.picard_tol),
        cfl_safety: num(map, "numerics.cfl_safety")?.unwrap_or(d.cfl_safety),
        dt_max: num(map, "numerics.dt_max")?.unwrap_or(d.dt_max),
        reinit_every: int(map, "numerics.reinit_every")?.unwrap_or(d.reinit_every),
        smoothing_k: num(map, "numerics.smoothing_k")?.unwrap_or(d.smoothing_k),
        tol_lin: num(map, "numerics.tol_lin")?.unwrap_or(d.tol_lin),
        scheme,
        project_sum: boolean(map, "numerics.project_sum")?.unwrap_or(d.project_sum),
    };
    let mut errs = Vec::new();
    if numerics.eps_chem.is_some_and(|e| !(e > 0.0)) {
        errs.push("eps_chem must be positive".to_string());
    }
    if !(numerics.lambda_pen > 0.0) {
        errs.push("lambda_pen must be positive".into());
    }
    if numerics.picard_sweeps == 0 {
        errs.push("picard_sweeps must be at least 1".into());
    }
    if !(numerics.cfl_safety > 0.0 && numerics.cfl_safety <= 1.0) {
        errs.push("cfl_safety must lie in (0, 1]".into());
    }
    if !(numerics.dt_max > 0.0) {
        errs.push("dt_max must be positive".into());
    }
    if !(numerics.smoothing_k >= 1.0) {
        errs.push("smoothing_k must be >= 1".into());
    }
    if !(numerics.tol_lin > 0.0 && numerics.tol_lin < 1.0) {
        errs.push("tol_lin must lie in (0, 1)".into());
    }

    let mut initial: [InitialProfile; 5] = std::array::from_fn(|_| InitialProfile::Zero);
    for (slot, key) in INITIAL_KEYS.iter().enumerate() {
        let full = format!("initial.{key}");
        if let Some(s) = map.get(&full) {
            initial[slot] = parse_profile(&full, s, dim)?;
        }
    }
    check_initial(&initial, &shape, &grid, &params, &mut errs);

    let run = RunSettings {
        t_end: num(map, "run.T")?.unwrap_or(0.1),
        snapshot_every: num(map, "run.snapshot_every")?.unwrap_or(0.0),
        out_dir: map.get("run.out_dir").map(PathBuf::from),
        deterministic: boolean(map, "run.deterministic")?.unwrap_or(true),
        wall_clock_budget: num(map, "run.wall_clock_budget")?,
    };
    if !(run.t_end >= 0.0) {
        errs.push("run.T must be nonnegative".into());
    }
    if !(run.snapshot_every >= 0.0) {
        errs.push("run.snapshot_every must be nonnegative".into());
    }
    if run.wall_clock_budget.is_some_and(|b| !(b > 0.0)) {
        errs.push("run.wall_clock_budget must be positive".into());
    }
    if !errs.is_empty() {
        return Err(Error::Params(errs));
    }
    Ok(Config { scenario: Scenario { grid, shape, velocity, params, numerics, initial }, run, warnings })
}

fn check_initial(
    initial: &[InitialProfile; 5],
    shape: &Shape,
    grid: &Grid,
    params: &crate::model::ModelParams,
    errs: &mut Vec<String>,
) {
    let names = ["P0", "Q0", "D0", "C0", "W0"];
    for (k, p) in initial.iter().enumerate() {
        match p {
            InitialProfile::Uniform(v) if *v < 0.0 => errs.push(format!("{} must be nonnegative", names[k])),
            InitialProfile::Gaussian { width, amplitude, .. } if !(*width > 0.0) || *amplitude < 0.0 => {
                errs.push(format!("{}: gaussian needs width > 0 and amplitude >= 0", names[k]))
            }
            InitialProfile::Complement if k >= 3 => {
                errs.push(format!("{}: complement applies to P0, Q0, D0 only", names[k]))
            }
            _ => {}
        }
    }
    let complements = initial[..3].iter().filter(|p| **p == InitialProfile::Complement).count();
    if complements > 1 {
        errs.push("at most one of P0, Q0, D0 may be complement".into());
    }
    let rho = params.rho_f;
    let dim = grid.dim();
    let mut worst: f64 = 0.0;
    let mut over: f64 = 0.0;
    for i in 0..grid.len() {
        let x = grid.coords(i);
        if !shape.contains(x, dim) {
            continue;
        }
        let s: f64 = initial[..3].iter().map(|p| p.value(x)).sum();
        worst = worst.max((s - rho).abs());
        over = over.max(s - rho);
    }
    if complements == 0 && worst > 1e-12 * rho {
        errs.push("P0+Q0+D0 must equal rho_f inside the tumor".into());
    }
    if complements == 1 && over > 1e-12 * rho {
        errs.push("P0+Q0+D0 must equal rho_f inside the tumor (profiles exceed rho_f)".into());
    }
    if initial[3].peak() > params.c_bar {
        errs.push("C0 must not exceed C_bar (C0 <= C_bar)".into());
    }
}

impl Config {
    /// Normalized key map: every applicable key, defaults filled in, numbers
    /// in canonical form.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let sc = &self.scenario;
        let dim = sc.grid.dim();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("grid.dim", dim.to_string());
        put("grid.n_cells", sc.grid.n_cells().to_string());
        put("grid.half_extent", format_number(sc.grid.half_extent()));
        match &sc.shape {
            Shape::Sphere { center, radius } => {
                put("domain.shape", "sphere".into());
                put("domain.center", fmt_vec(center, dim));
                put("domain.radius", format_number(*radius));
            }
            Shape::Ellipsoid { center, semi_axes } => {
                put("domain.shape", "ellipsoid".into());
                put("domain.center", fmt_vec(center, dim));
                put("domain.semi_axes", fmt_vec(semi_axes, dim));
            }
            Shape::Union(parts) => {
                put("domain.shape", "union".into());
                let s = parts
                    .iter()
                    .map(|(c, r)| {
                        let mut v = [0.0; 3];
                        v[..dim].copy_from_slice(&c[..dim]);
                        format!("{},{}", fmt_vec(&v, dim), format_number(*r))
                    })
                    .collect::<Vec<_>>()
                    .join(";");
                put("domain.spheres", s);
            }
        }
        let v = &sc.velocity;
        match v.preset() {
            VelocityPreset::Zero => put("domain.velocity", "zero".into()),
            VelocityPreset::Translation(u) => {
                put("domain.velocity", "translation".into());
                put("domain.velocity.vector", fmt_vec(u, dim));
            }
            VelocityPreset::RadialExpansion { rate } => {
                put("domain.velocity", "radial_expansion".into());
                put("domain.velocity.rate", format_number(*rate));
            }
            VelocityPreset::Rotation { angular } => {
                put("domain.velocity", "rotation".into());
                put("domain.velocity.angular", format_number(*angular));
            }
            VelocityPreset::UserExpression { sources, .. } => {
                put("domain.velocity", "expression".into());
                for (c, e) in ["x", "y", "z"].iter().zip(sources) {
                    put(&format!("domain.velocity.expr.{c}"), e.clone());
                }
            }
        }
        if !v.is_zero() {
            put("domain.velocity.scale", format_number(v.scale()));
        }
        for (k, val) in sc.params.to_map() {
            let section = if SCHEME_KEYS.contains(&k.as_str()) { "numerics" } else { "params" };
            put(&format!("{section}.{k}"), val);
        }
        let n = &sc.numerics;
        if let Some(e) = n.eps_chem {
            put("numerics.eps_chem", format_number(e));
        }
        put("numerics.lambda_pen", format_number(n.lambda_pen));
        put("numerics.picard_sweeps", n.picard_sweeps.to_string());
        put("numerics.picard_tol", format_number(n.picard_tol));
        put("numerics.cfl_safety", format_number(n.cfl_safety));
        put("numerics.dt_max", format_number(n.dt_max));
        put("numerics.reinit_every", n.reinit_every.to_string());
        put("numerics.smoothing_k", format_number(n.smoothing_k));
        put("numerics.tol_lin", format_number(n.tol_lin));
        put(
            "numerics.scheme",
            match n.scheme {
                AdvectionScheme::Upwind1 => "upwind1",
                AdvectionScheme::Eno2 => "eno2",
            }
            .into(),
        );
        put("numerics.project_sum", n.project_sum.to_string());
        for (k, p) in INITIAL_KEYS.iter().zip(&sc.initial) {
            put(&format!("initial.{k}"), fmt_profile(p, dim));
        }
        let r = &self.run;
        put("run.T", format_number(r.t_end));
        put("run.snapshot_every", format_number(r.snapshot_every));
        if let Some(d) = &r.out_dir {
            put("run.out_dir", d.display().to_string());
        }
        put("run.deterministic", r.deterministic.to_string());
        if let Some(b) = r.wall_clock_budget {
            put("run.wall_clock_budget", format_number(b));
        }
        m
    }

    /// Normalized file text, keys sorted.
    pub fn dump(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn parse_config(text: &str) -> Result<Config> {
    config_from_map(&parse_key_values(text)?)
}

pub fn load_config(path: &Path) -> Result<Config> {
    load_config_with(path, &[])
}

/// Load a file and apply `key=value` overrides on top.
pub fn load_config_with(path: &Path, overrides: &[String]) -> Result<Config> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = parse_key_values(&text)?;
    for o in overrides {
        apply_override(&mut map, o)?;
    }
    config_from_map(&map)
}
