//! Flat `key = value` run configuration; `#` starts a comment.
//!
//! Unknown keys are collected and reported together. [`to_text`] writes a
//! canonical form that parses back to the same configuration.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::error::{NschError, Result};
use crate::material::GradientCoefficient;
use crate::phasefield::{ChScheme, Stabilization};
use crate::sim::{InitialCondition, InitialPhase, InitialVelocity, SimConfig, SplitOrder};

pub const KEYS: &[&str] = &[
    "grid.nx",
    "grid.ny",
    "grid.lx",
    "grid.ly",
    "material.rho1",
    "material.rho2",
    "material.eta1",
    "material.eta2",
    "material.a",
    "material.a1",
    "material.eps",
    "material.c0",
    "material.K",
    "time.dt",
    "time.t_end",
    "scheme.ch",
    "scheme.stabilization",
    "scheme.enforce_stability",
    "scheme.split_order",
    "scheme.flow",
    "init.phase",
    "init.mean",
    "init.amplitude",
    "init.center",
    "init.width",
    "init.radius",
    "init.value",
    "init.seed",
    "init.velocity",
    "init.velocity_amplitude",
    "sweep.eps",
    "output.snap_every",
    "solver.tol",
    "solver.viscous_tol",
    "solver.max_iter",
    "solver.flow_max_iter",
];

fn bad(key: &str, value: &str, what: &str) -> NschError {
    NschError::Config(format!("{key} = {value:?}: expected {what}"))
}

fn float(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "a finite number"))
}

fn uint(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

#[derive(Debug, Default)]
struct InitKeys {
    phase: Option<String>,
    mean: Option<f64>,
    amplitude: Option<f64>,
    center: Option<f64>,
    width: Option<f64>,
    radius: Option<f64>,
    value: Option<f64>,
    seed: Option<u64>,
    velocity: Option<String>,
    velocity_amplitude: Option<f64>,
}

/// Splits the text into `(line, key, value)` triples.
pub fn tokenize(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NschError::Config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(NschError::Config(format!("line {}: empty key or value", n + 1)));
        }
        if !seen.insert(k.clone()) {
            return Err(NschError::Config(format!("line {}: duplicate key {k}", n + 1)));
        }
        out.push((n + 1, k, v));
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<SimConfig> {
    let entries = tokenize(text)?;
    let unknown: Vec<&str> = entries.iter().map(|(_, k, _)| k.as_str()).filter(|k| !KEYS.contains(k)).collect();
    if !unknown.is_empty() {
        return Err(NschError::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    let mut c = SimConfig::default();
    let (mut a0, mut a1) = (1.0, 0.0);
    let mut init = InitKeys::default();
    for (_, k, v) in &entries {
        let (k, v) = (k.as_str(), v.as_str());
        match k {
            "grid.nx" => c.grid.nx = uint(k, v)?,
            "grid.ny" => c.grid.ny = uint(k, v)?,
            "grid.lx" => c.grid.lx = float(k, v)?,
            "grid.ly" => c.grid.ly = float(k, v)?,
            "material.rho1" => c.material.rho1 = float(k, v)?,
            "material.rho2" => c.material.rho2 = float(k, v)?,
            "material.eta1" => c.material.eta1 = float(k, v)?,
            "material.eta2" => c.material.eta2 = float(k, v)?,
            "material.a" => a0 = float(k, v)?,
            "material.a1" => a1 = float(k, v)?,
            "material.eps" => c.material.eps = float(k, v)?,
            "material.c0" => c.material.c0 = Some(float(k, v)?),
            "material.K" => c.material.k_bound = Some(float(k, v)?),
            "time.dt" => c.dt = float(k, v)?,
            "time.t_end" => c.t_end = float(k, v)?,
            "scheme.ch" => {
                c.ch.scheme = match v {
                    "stabilized" => ChScheme::Stabilized,
                    "explicit" => ChScheme::Explicit,
                    _ => return Err(bad(k, v, "stabilized or explicit")),
                }
            }
            "scheme.stabilization" => {
                c.ch.stabilization = match v {
                    "adaptive" => Stabilization::Adaptive,
                    "global" => Stabilization::Global,
                    _ => return Err(bad(k, v, "adaptive or global")),
                }
            }
            "scheme.enforce_stability" => {
                let b = boolean(k, v)?;
                c.ch.enforce_stability = b;
                c.flow.enforce_stability = b;
            }
            "scheme.split_order" => {
                c.split_order = match v {
                    "ch_first" => SplitOrder::ChFirst,
                    "flow_first" => SplitOrder::FlowFirst,
                    _ => return Err(bad(k, v, "ch_first or flow_first")),
                }
            }
            "scheme.flow" => c.flow_enabled = boolean(k, v)?,
            "init.phase" => init.phase = Some(v.to_string()),
            "init.mean" => init.mean = Some(float(k, v)?),
            "init.amplitude" => init.amplitude = Some(float(k, v)?),
            "init.center" => init.center = Some(float(k, v)?),
            "init.width" => init.width = Some(float(k, v)?),
            "init.radius" => init.radius = Some(float(k, v)?),
            "init.value" => init.value = Some(float(k, v)?),
            "init.seed" => init.seed = Some(v.parse().map_err(|_| bad(k, v, "a non-negative integer"))?),
            "init.velocity" => init.velocity = Some(v.to_string()),
            "init.velocity_amplitude" => init.velocity_amplitude = Some(float(k, v)?),
            "sweep.eps" => {
                c.sweep_eps = v.split(',').map(|s| float(k, s.trim())).collect::<Result<_>>()?;
            }
            "output.snap_every" => c.snap_every = uint(k, v)?,
            "solver.tol" => {
                let t = float(k, v)?;
                c.ch.tol = t;
                c.flow.pressure_tol = t;
            }
            "solver.viscous_tol" => c.flow.viscous_tol = float(k, v)?,
            "solver.max_iter" => c.ch.max_iter = uint(k, v)?,
            "solver.flow_max_iter" => c.flow.max_iter = Some(uint(k, v)?),
            _ => unreachable!("key table checked above"),
        }
    }
    c.material.coefficient = if a1 == 0.0 { GradientCoefficient::Constant(a0) } else { GradientCoefficient::Quadratic { a0, a1 } };
    c.init = build_init(init, &c)?;
    c.validate()?;
    Ok(c)
}

fn build_init(k: InitKeys, c: &SimConfig) -> Result<InitialCondition> {
    let d = InitialCondition::default();
    let kind = k.phase.as_deref().unwrap_or("disk");
    let used: &[(&str, bool)] = &[
        ("init.mean", k.mean.is_some()),
        ("init.amplitude", k.amplitude.is_some()),
        ("init.center", k.center.is_some()),
        ("init.width", k.width.is_some()),
        ("init.radius", k.radius.is_some()),
        ("init.value", k.value.is_some()),
    ];
    let allowed: &[&str] = match kind {
        "random" => &["init.mean", "init.amplitude"],
        "stripe" => &["init.center", "init.width"],
        "disk" => &["init.radius", "init.width"],
        "constant" => &["init.value"],
        _ => return Err(bad("init.phase", kind, "random, stripe, disk or constant")),
    };
    let stray: Vec<&str> = used.iter().filter(|(n, set)| *set && !allowed.contains(n)).map(|(n, _)| *n).collect();
    if !stray.is_empty() {
        return Err(NschError::Config(format!("keys not used by init.phase = {kind}: {}", stray.join(", "))));
    }
    let phase = match kind {
        "random" => InitialPhase::Random { mean: k.mean.unwrap_or(0.0), amplitude: k.amplitude.unwrap_or(0.05) },
        "stripe" => InitialPhase::Stripe { center: k.center.unwrap_or(0.5 * c.grid.lx), width: k.width.unwrap_or(0.02) },
        "disk" => InitialPhase::Disk { radius: k.radius.unwrap_or(0.25), width: k.width.unwrap_or(0.02) },
        _ => InitialPhase::Constant { value: k.value.unwrap_or(0.0) },
    };
    match phase {
        InitialPhase::Random { mean, amplitude } if mean.abs() + amplitude >= 1.0 || amplitude < 0.0 => {
            return Err(NschError::Config("random initial data must satisfy |mean| + amplitude < 1".into()))
        }
        InitialPhase::Stripe { width, .. } | InitialPhase::Disk { width, .. } if width <= 0.0 => {
            return Err(NschError::Config("init.width must be positive".into()))
        }
        InitialPhase::Constant { value } if value.abs() > 1.0 => {
            return Err(NschError::Config("init.value must lie in [-1, 1]".into()))
        }
        _ => {}
    }
    let amp = k.velocity_amplitude;
    let velocity = match k.velocity.as_deref().unwrap_or("zero") {
        "zero" if amp.is_some() => return Err(NschError::Config("init.velocity_amplitude needs init.velocity = random or vortex".into())),
        "zero" => InitialVelocity::Zero,
        "random" => InitialVelocity::Random { amplitude: amp.unwrap_or(0.1) },
        "vortex" => InitialVelocity::Vortex { amplitude: amp.unwrap_or(0.1) },
        other => return Err(bad("init.velocity", other, "zero, random or vortex")),
    };
    Ok(InitialCondition { phase, velocity, seed: k.seed.unwrap_or(d.seed) })
}

/// Canonical text for `c`; floats use the shortest exact representation.
pub fn to_text(c: &SimConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let f = |x: f64| format!("{x:?}");
    kv("grid.nx", c.grid.nx.to_string());
    kv("grid.ny", c.grid.ny.to_string());
    kv("grid.lx", f(c.grid.lx));
    kv("grid.ly", f(c.grid.ly));
    let m = &c.material;
    kv("material.rho1", f(m.rho1));
    kv("material.rho2", f(m.rho2));
    kv("material.eta1", f(m.eta1));
    kv("material.eta2", f(m.eta2));
    match m.coefficient {
        GradientCoefficient::Constant(a0) => kv("material.a", f(a0)),
        GradientCoefficient::Quadratic { a0, a1 } => {
            kv("material.a", f(a0));
            kv("material.a1", f(a1));
        }
    }
    kv("material.eps", f(m.eps));
    if let Some(c0) = m.c0 {
        kv("material.c0", f(c0));
    }
    if let Some(k) = m.k_bound {
        kv("material.K", f(k));
    }
    kv("time.dt", f(c.dt));
    kv("time.t_end", f(c.t_end));
    kv("scheme.ch", match c.ch.scheme { ChScheme::Stabilized => "stabilized", ChScheme::Explicit => "explicit" }.into());
    kv("scheme.stabilization", match c.ch.stabilization { Stabilization::Adaptive => "adaptive", Stabilization::Global => "global" }.into());
    kv("scheme.enforce_stability", c.ch.enforce_stability.to_string());
    kv("scheme.split_order", match c.split_order { SplitOrder::ChFirst => "ch_first", SplitOrder::FlowFirst => "flow_first" }.into());
    kv("scheme.flow", c.flow_enabled.to_string());
    match c.init.phase {
        InitialPhase::Random { mean, amplitude } => {
            kv("init.phase", "random".into());
            kv("init.mean", f(mean));
            kv("init.amplitude", f(amplitude));
        }
        InitialPhase::Stripe { center, width } => {
            kv("init.phase", "stripe".into());
            kv("init.center", f(center));
            kv("init.width", f(width));
        }
        InitialPhase::Disk { radius, width } => {
            kv("init.phase", "disk".into());
            kv("init.radius", f(radius));
            kv("init.width", f(width));
        }
        InitialPhase::Constant { value } => {
            kv("init.phase", "constant".into());
            kv("init.value", f(value));
        }
    }
    kv("init.seed", c.init.seed.to_string());
    match c.init.velocity {
        InitialVelocity::Zero => kv("init.velocity", "zero".into()),
        InitialVelocity::Random { amplitude } => {
            kv("init.velocity", "random".into());
            kv("init.velocity_amplitude", f(amplitude));
        }
        InitialVelocity::Vortex { amplitude } => {
            kv("init.velocity", "vortex".into());
            kv("init.velocity_amplitude", f(amplitude));
        }
    }
    kv("sweep.eps", c.sweep_eps.iter().map(|e| f(*e)).collect::<Vec<_>>().join(", "));
    kv("output.snap_every", c.snap_every.to_string());
    kv("solver.tol", f(c.ch.tol));
    kv("solver.viscous_tol", f(c.flow.viscous_tol));
    kv("solver.max_iter", c.ch.max_iter.to_string());
    if let Some(n) = c.flow.max_iter {
        kv("solver.flow_max_iter", n.to_string());
    }
    s
}
