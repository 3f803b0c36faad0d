//! INI run configuration.
//!
//! ```ini
//! [params]
//! family_a = 0.7        # or explicit kB, kE, kD, kN, eps, alpha
//! gamma = 1
//! M = 1e-6
//!
//! [grid]
//! x_min = -1
//! x_max = 1
//! nx = 400
//!
//! [sim]
//! cfl = 0.9
//! t_end = 10
//! bc = equilibrium-dirichlet
//! snapshot_every = 100
//! preset = fast
//!
//! [perturbation]
//! profile = sine
//! amplitudes = 1e-3
//! width_or_wavenumber = 1
//! center = 0
//!
//! [analysis]
//! fit_window_start_fraction = 0.5
//! ```
//!
//! Parameters are given unscaled; the preset's factor is applied on
//! resolution. A `[run]` section (written into `run.meta`) is ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use biofilm_core::dissipativity::param_family;
use biofilm_core::solver::{BoundaryCondition, Grid1D, Perturbation, Preset, Profile, SimConfig};
use biofilm_core::ModelParams;
use ini::Ini;

use crate::CliError;

const PARAM_KEYS: &[&str] = &["kB", "kE", "kD", "kN", "eps", "alpha", "gamma", "M", "family_a"];
const RATE_KEYS: &[&str] = &["kB", "kE", "kD", "kN", "eps", "alpha"];
const GRID_KEYS: &[&str] = &["x_min", "x_max", "nx"];
const SIM_KEYS: &[&str] = &[
    "cfl",
    "t_end",
    "bc",
    "snapshot_every",
    "preset",
    "omega_radius",
    "dt_max",
];
const PERTURBATION_KEYS: &[&str] = &["profile", "amplitudes", "width_or_wavenumber", "center"];
const ANALYSIS_KEYS: &[&str] = &["fit_window_start_fraction"];

/// Where the rates come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSource {
    /// Reference rates, each optionally overridden.
    Explicit {
        k_b: f64,
        k_e: f64,
        k_d: f64,
        k_n: f64,
        eps: f64,
        alpha: f64,
    },
    Family { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Gaussian,
    Sine,
    Uniform,
}

impl ProfileKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(Self::Gaussian),
            "sine" => Some(Self::Sine),
            "uniform" => Some(Self::Uniform),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Sine => "sine",
            Self::Uniform => "uniform",
        }
    }
}

/// Fully defaulted configuration, before preset scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rates: RateSource,
    pub gamma: f64,
    /// Friction coefficient `M`.
    pub friction: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub bc: BoundaryCondition,
    pub snapshot_every: usize,
    pub preset: Preset,
    pub omega_radius: f64,
    pub dt_max: Option<f64>,
    pub profile: ProfileKind,
    pub amplitudes: [f64; 4],
    pub width_or_wavenumber: f64,
    pub center: f64,
    pub fit_window_start_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t1 = ModelParams::<f64>::table1();
        RunConfig {
            rates: RateSource::Explicit {
                k_b: t1.k_b,
                k_e: t1.k_e,
                k_d: t1.k_d,
                k_n: t1.k_n,
                eps: t1.eps,
                alpha: t1.alpha,
            },
            gamma: t1.gamma,
            friction: t1.friction,
            x_min: -1.0,
            x_max: 1.0,
            nx: 200,
            cfl: 0.9,
            t_end: 10.0,
            bc: BoundaryCondition::EquilibriumDirichlet,
            snapshot_every: 100,
            preset: Preset::Table1,
            omega_radius: 0.1,
            dt_max: None,
            profile: ProfileKind::Gaussian,
            amplitudes: [0.0; 4],
            width_or_wavenumber: 0.1,
            center: 0.0,
            fit_window_start_fraction: 0.5,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_f64(section: &str, key: &str, raw: &str) -> Result<f64, CliError> {
    let x: f64 = raw
        .trim()
        .parse()
        .map_err(|_| config_err(format!("[{section}] {key} = {raw:?} is not a number")))?;
    if !x.is_finite() {
        return Err(config_err(format!("[{section}] {key} must be finite")));
    }
    Ok(x)
}

fn parse_usize(section: &str, key: &str, raw: &str) -> Result<usize, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| config_err(format!("[{section}] {key} = {raw:?} is not a non-negative integer")))
}

fn parse_amplitudes(raw: &str) -> Result<[f64; 4], CliError> {
    let values = raw
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64("perturbation", "amplitudes", s))
        .collect::<Result<Vec<_>, _>>()?;
    match values.as_slice() {
        [a] => Ok([*a; 4]),
        [b, e, d, v] => Ok([*b, *e, *d, *v]),
        _ => Err(config_err(format!(
            "[perturbation] amplitudes needs 1 or 4 values, got {}",
            values.len()
        ))),
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| config_err(format!("malformed config: {e}")))?;
        let mut sections: BTreeMap<&str, BTreeMap<&str, &str>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(config_err(format!("key {key:?} outside any section")));
                }
                continue;
            };
            let allowed = match name {
                "params" => PARAM_KEYS,
                "grid" => GRID_KEYS,
                "sim" => SIM_KEYS,
                "perturbation" => PERTURBATION_KEYS,
                "analysis" => ANALYSIS_KEYS,
                "run" => continue,
                other => return Err(config_err(format!("unknown section [{other}]"))),
            };
            let entries = sections.entry(name).or_default();
            for (key, value) in props.iter() {
                if !allowed.contains(&key) {
                    return Err(config_err(format!("unknown key {key:?} in [{name}]")));
                }
                if entries.insert(key, value).is_some() {
                    return Err(config_err(format!("duplicate key {key:?} in [{name}]")));
                }
            }
        }

        let mut cfg = RunConfig::default();
        let get = |s: &str, k: &str| sections.get(s).and_then(|m| m.get(k)).copied();

        if let Some(p) = sections.get("params") {
            let explicit: Vec<&&str> = RATE_KEYS.iter().filter(|k| p.contains_key(**k)).collect();
            if let Some(a) = p.get("family_a") {
                if !explicit.is_empty() {
                    return Err(config_err(format!(
                        "[params] family_a cannot be combined with explicit rates ({})",
                        explicit.iter().map(|k| **k).collect::<Vec<_>>().join(", ")
                    )));
                }
                cfg.rates = RateSource::Family {
                    a: parse_f64("params", "family_a", a)?,
                };
            } else if let RateSource::Explicit {
                k_b,
                k_e,
                k_d,
                k_n,
                eps,
                alpha,
            } = &mut cfg.rates
            {
                for (key, slot) in [
                    ("kB", k_b),
                    ("kE", k_e),
                    ("kD", k_d),
                    ("kN", k_n),
                    ("eps", eps),
                    ("alpha", alpha),
                ] {
                    if let Some(raw) = p.get(key) {
                        *slot = parse_f64("params", key, raw)?;
                    }
                }
            }
            if let Some(raw) = p.get("gamma") {
                cfg.gamma = parse_f64("params", "gamma", raw)?;
            }
            if let Some(raw) = p.get("M") {
                cfg.friction = parse_f64("params", "M", raw)?;
            }
        }

        if let Some(raw) = get("grid", "x_min") {
            cfg.x_min = parse_f64("grid", "x_min", raw)?;
        }
        if let Some(raw) = get("grid", "x_max") {
            cfg.x_max = parse_f64("grid", "x_max", raw)?;
        }
        if let Some(raw) = get("grid", "nx") {
            cfg.nx = parse_usize("grid", "nx", raw)?;
        }

        if let Some(raw) = get("sim", "cfl") {
            cfg.cfl = parse_f64("sim", "cfl", raw)?;
        }
        if let Some(raw) = get("sim", "t_end") {
            cfg.t_end = parse_f64("sim", "t_end", raw)?;
        }
        if let Some(raw) = get("sim", "bc") {
            cfg.bc = BoundaryCondition::parse(raw.trim())
                .ok_or_else(|| config_err(format!("[sim] bc = {raw:?} (expected periodic or equilibrium-dirichlet)")))?;
        }
        if let Some(raw) = get("sim", "snapshot_every") {
            cfg.snapshot_every = parse_usize("sim", "snapshot_every", raw)?;
        }
        if let Some(raw) = get("sim", "preset") {
            cfg.preset = parse_preset(raw)?;
        }
        if let Some(raw) = get("sim", "omega_radius") {
            cfg.omega_radius = parse_f64("sim", "omega_radius", raw)?;
        }
        if let Some(raw) = get("sim", "dt_max") {
            cfg.dt_max = Some(parse_f64("sim", "dt_max", raw)?);
        }

        if let Some(raw) = get("perturbation", "profile") {
            cfg.profile = ProfileKind::parse(raw.trim()).ok_or_else(|| {
                config_err(format!("[perturbation] profile = {raw:?} (expected gaussian, sine or uniform)"))
            })?;
        }
        if let Some(raw) = get("perturbation", "amplitudes") {
            cfg.amplitudes = parse_amplitudes(raw)?;
        }
        if let Some(raw) = get("perturbation", "width_or_wavenumber") {
            cfg.width_or_wavenumber = parse_f64("perturbation", "width_or_wavenumber", raw)?;
        }
        if let Some(raw) = get("perturbation", "center") {
            cfg.center = parse_f64("perturbation", "center", raw)?;
        }

        if let Some(raw) = get("analysis", "fit_window_start_fraction") {
            cfg.fit_window_start_fraction = parse_f64("analysis", "fit_window_start_fraction", raw)?;
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no model evaluation; the rest surfaces when the
    /// core types are built.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..1.0).contains(&self.fit_window_start_fraction) {
            return Err(config_err("[analysis] fit_window_start_fraction must lie in [0, 1)"));
        }
        if self.profile == ProfileKind::Gaussian && self.width_or_wavenumber <= 0.0 {
            return Err(config_err("[perturbation] gaussian width must be positive"));
        }
        Ok(())
    }

    /// Unscaled parameters.
    pub fn base_params(&self) -> Result<ModelParams<f64>, CliError> {
        let p = match self.rates {
            RateSource::Explicit {
                k_b,
                k_e,
                k_d,
                k_n,
                eps,
                alpha,
            } => ModelParams {
                k_b,
                k_e,
                k_d,
                k_n,
                eps,
                alpha,
                gamma: self.gamma,
                friction: self.friction,
            },
            RateSource::Family { a } => param_family(a, self.gamma, self.friction)?,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with the preset's scale factor applied.
    pub fn params(&self) -> Result<ModelParams<f64>, CliError> {
        Ok(self.base_params()?.with_rates_scaled(self.preset.scale_factor()))
    }

    pub fn perturbation(&self) -> Perturbation<f64> {
        let profile = match self.profile {
            ProfileKind::Gaussian => Profile::Gaussian {
                width: self.width_or_wavenumber,
                center: self.center,
            },
            ProfileKind::Sine => Profile::Sine {
                wavenumber: self.width_or_wavenumber,
            },
            ProfileKind::Uniform => Profile::Uniform,
        };
        Perturbation {
            profile,
            amplitude: self.amplitudes,
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig<f64>, CliError> {
        let grid = Grid1D::new(self.x_min, self.x_max, self.nx)?;
        let cfg = SimConfig {
            grid,
            cfl: self.cfl,
            t_end: self.t_end,
            bc: self.bc,
            perturbation: self.perturbation(),
            snapshot_every: self.snapshot_every,
            params: self.params()?,
            preset: self.preset,
            omega_radius: self.omega_radius,
            dt_max: self.dt_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// INI text that parses back to `self`. Floats use shortest round-trip
    /// formatting.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        s.push_str("[params]\n");
        match self.rates {
            RateSource::Explicit {
                k_b,
                k_e,
                k_d,
                k_n,
                eps,
                alpha,
            } => {
                for (k, v) in [
                    ("kB", k_b),
                    ("kE", k_e),
                    ("kD", k_d),
                    ("kN", k_n),
                    ("eps", eps),
                    ("alpha", alpha),
                ] {
                    let _ = writeln!(s, "{k} = {v:e}");
                }
            }
            RateSource::Family { a } => {
                let _ = writeln!(s, "family_a = {a:e}");
            }
        }
        let _ = writeln!(s, "gamma = {:e}", self.gamma);
        let _ = writeln!(s, "M = {:e}", self.friction);

        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "x_min = {:e}", self.x_min);
        let _ = writeln!(s, "x_max = {:e}", self.x_max);
        let _ = writeln!(s, "nx = {}", self.nx);

        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "cfl = {:e}", self.cfl);
        let _ = writeln!(s, "t_end = {:e}", self.t_end);
        let _ = writeln!(s, "bc = {}", self.bc.name());
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "preset = {}", self.preset.name());
        let _ = writeln!(s, "omega_radius = {:e}", self.omega_radius);
        if let Some(dt) = self.dt_max {
            let _ = writeln!(s, "dt_max = {dt:e}");
        }

        let _ = writeln!(s, "\n[perturbation]");
        let _ = writeln!(s, "profile = {}", self.profile.name());
        let a = self.amplitudes;
        let _ = writeln!(s, "amplitudes = {:e}, {:e}, {:e}, {:e}", a[0], a[1], a[2], a[3]);
        let _ = writeln!(s, "width_or_wavenumber = {:e}", self.width_or_wavenumber);
        let _ = writeln!(s, "center = {:e}", self.center);

        let _ = writeln!(s, "\n[analysis]");
        let _ = writeln!(s, "fit_window_start_fraction = {:e}", self.fit_window_start_fraction);
        s
    }
}

pub fn parse_preset(raw: &str) -> Result<Preset, CliError> {
    Preset::parse(raw.trim())
        .ok_or_else(|| config_err(format!("unknown preset {raw:?} (expected table1, fast or custom)")))
}
