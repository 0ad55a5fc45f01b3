//! Flat `key = value` run configuration.
//!
//! Recognised keys and defaults:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `n1`, `n2`, `n3` | 32 | grid intervals |
//! | `kappa` | `0.1` | comma-separated mollifier radii, descending |
//! | `t_final` | 0.5 | end time |
//! | `dt` | 0.001 | fixed step (exclusive with `cfl`) |
//! | `cfl` | - | step as a fraction of the initial CFL bound |
//! | `velocity` | `standard` | `equilibrium`, `standard` or `mixed` |
//! | `amplitude` | 0.02 | pointwise size of the initial velocity |
//! | `g0` | `canonical` | `canonical`, `sheared` or `columnar` |
//! | `g0_amplitude` | 0.3 | perturbation size for the non-canonical G0 |
//! | `bottom`, `top` | `nc` | face regime, `nc` or `rt` |
//! | `lambda`, `delta` | 0.1 | stability floors |
//! | `snapshot_every` | 50 | steps between records |
//! | `kernel_floor` | 2.0 | smallest admissible kappa in grid cells |
//! | `track_deformation` | `true` | co-evolve F for the identity check |
//! | `output` | `runs` | output directory |
//! | `seed` | 7 | velocity seed |
//! | `force_sign` | 1 | sign of the elastic force; -1 is a mutation hook |

use std::fmt::Write as _;
use std::path::PathBuf;

use elastoslab::{BoundaryPartition, G0Recipe, Grid, Regime, Slab};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Name of the offending field for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { field, .. } => Some(field),
            ConfigError::Parse { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// Fraction of the CFL bound evaluated on the initial velocity.
    Cfl(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityRecipe {
    Equilibrium,
    Standard,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum G0Kind {
    Canonical,
    Sheared,
    Columnar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub kappa: Vec<f64>,
    pub t_final: f64,
    pub time_step: TimeStep,
    pub velocity: VelocityRecipe,
    pub amplitude: f64,
    pub g0: G0Kind,
    pub g0_amplitude: f64,
    pub bottom: Regime,
    pub top: Regime,
    pub lambda: f64,
    pub delta: f64,
    pub snapshot_every: usize,
    pub kernel_floor: f64,
    pub track_deformation: bool,
    pub output: PathBuf,
    pub seed: u64,
    pub force_sign: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n1: 32,
            n2: 32,
            n3: 32,
            kappa: vec![0.1],
            t_final: 0.5,
            time_step: TimeStep::Fixed(1e-3),
            velocity: VelocityRecipe::Standard,
            amplitude: 0.02,
            g0: G0Kind::Canonical,
            g0_amplitude: 0.3,
            bottom: Regime::Nc,
            top: Regime::Nc,
            lambda: 0.1,
            delta: 0.1,
            snapshot_every: 50,
            kernel_floor: 2.0,
            track_deformation: true,
            output: PathBuf::from("runs"),
            seed: 7,
            force_sign: 1.0,
        }
    }
}

fn number(field: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| ConfigError::invalid(field, format!("`{value}` is not a number")))
}

fn positive(field: &str, value: &str) -> Result<f64, ConfigError> {
    let x = number(field, value)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(ConfigError::invalid(field, "must be positive"));
    }
    Ok(x)
}

fn count(field: &str, value: &str) -> Result<usize, ConfigError> {
    let x = positive(field, value)?;
    if x.fract() != 0.0 {
        return Err(ConfigError::invalid(field, "must be a whole number"));
    }
    Ok(x as usize)
}

fn regime(field: &str, value: &str) -> Result<Regime, ConfigError> {
    match value {
        "nc" => Ok(Regime::Nc),
        "rt" => Ok(Regime::Rt),
        _ => Err(ConfigError::invalid(field, "expected `nc` or `rt`")),
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Nc => "nc",
        Regime::Rt => "rt",
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    let (mut dt, mut cfl) = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, found `{body}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        match key {
            "n1" => c.n1 = count(key, value)?,
            "n2" => c.n2 = count(key, value)?,
            "n3" => c.n3 = count(key, value)?,
            "kappa" => {
                c.kappa = value
                    .split(',')
                    .map(|v| positive(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "t_final" => c.t_final = positive(key, value)?,
            "dt" => dt = Some(positive(key, value)?),
            "cfl" => cfl = Some(positive(key, value)?),
            "velocity" => {
                c.velocity = match value {
                    "equilibrium" => VelocityRecipe::Equilibrium,
                    "standard" => VelocityRecipe::Standard,
                    "mixed" => VelocityRecipe::Mixed,
                    _ => return Err(ConfigError::invalid(key, "expected equilibrium, standard or mixed")),
                }
            }
            "amplitude" => c.amplitude = positive(key, value)?,
            "g0" => {
                c.g0 = match value {
                    "canonical" => G0Kind::Canonical,
                    "sheared" => G0Kind::Sheared,
                    "columnar" => G0Kind::Columnar,
                    _ => return Err(ConfigError::invalid(key, "expected canonical, sheared or columnar")),
                }
            }
            "g0_amplitude" => c.g0_amplitude = positive(key, value)?,
            "bottom" => c.bottom = regime(key, value)?,
            "top" => c.top = regime(key, value)?,
            "lambda" => c.lambda = positive(key, value)?,
            "delta" => c.delta = positive(key, value)?,
            "snapshot_every" => c.snapshot_every = count(key, value)?,
            "kernel_floor" => c.kernel_floor = positive(key, value)?,
            "track_deformation" => {
                c.track_deformation = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(ConfigError::invalid(key, "expected true or false")),
                }
            }
            "output" => c.output = PathBuf::from(value),
            "seed" => {
                c.seed = value
                    .parse()
                    .map_err(|_| ConfigError::invalid(key, "expected a non-negative integer"))?
            }
            "force_sign" => {
                c.force_sign = number(key, value)?;
                if c.force_sign.abs() != 1.0 {
                    return Err(ConfigError::invalid(key, "must be 1 or -1"));
                }
            }
            _ => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
    }
    c.time_step = match (dt, cfl) {
        (Some(_), Some(_)) => return Err(ConfigError::invalid("cfl", "give either dt or cfl, not both")),
        (Some(d), None) => TimeStep::Fixed(d),
        (None, Some(f)) => TimeStep::Cfl(f),
        (None, None) => c.time_step,
    };
    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, n) in [("n1", self.n1), ("n2", self.n2)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(ConfigError::invalid(name, "must be a power of two >= 8"));
            }
        }
        if self.n3 < 8 {
            return Err(ConfigError::invalid("n3", "must be >= 8"));
        }
        if self.kappa.is_empty() {
            return Err(ConfigError::invalid("kappa", "list is empty"));
        }
        if self.kappa.iter().any(|&k| k >= 0.25) {
            return Err(ConfigError::invalid("kappa", "every radius must lie below 1/4"));
        }
        if self.kappa.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ConfigError::invalid("kappa", "list must be strictly descending"));
        }
        if let TimeStep::Cfl(f) = self.time_step {
            if f > 1.0 {
                return Err(ConfigError::invalid("cfl", "fraction must not exceed 1"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n1, self.n2, self.n3).expect("validated grid")
    }

    pub fn partition(&self) -> BoundaryPartition {
        BoundaryPartition::new(self.bottom, self.top, self.lambda, self.delta)
    }

    pub fn g0_recipe(&self, slab: &Slab) -> G0Recipe {
        match self.g0 {
            G0Kind::Canonical => G0Recipe::Canonical,
            G0Kind::Sheared => G0Recipe::Sheared {
                amplitude: self.g0_amplitude,
            },
            G0Kind::Columnar => G0Recipe::columnar_sines(slab.grid, self.g0_amplitude),
        }
    }

    /// The same configuration restricted to one radius, as parseable text.
    pub fn to_text_for(&self, kappa: &[f64]) -> String {
        let mut s = String::new();
        let list: Vec<String> = kappa.iter().map(|k| format!("{k:?}")).collect();
        let _ = writeln!(s, "n1 = {}\nn2 = {}\nn3 = {}", self.n1, self.n2, self.n3);
        let _ = writeln!(s, "kappa = {}", list.join(", "));
        let _ = writeln!(s, "t_final = {:?}", self.t_final);
        match self.time_step {
            TimeStep::Fixed(d) => writeln!(s, "dt = {d:?}"),
            TimeStep::Cfl(f) => writeln!(s, "cfl = {f:?}"),
        }
        .unwrap();
        let velocity = match self.velocity {
            VelocityRecipe::Equilibrium => "equilibrium",
            VelocityRecipe::Standard => "standard",
            VelocityRecipe::Mixed => "mixed",
        };
        let g0 = match self.g0 {
            G0Kind::Canonical => "canonical",
            G0Kind::Sheared => "sheared",
            G0Kind::Columnar => "columnar",
        };
        let _ = writeln!(s, "velocity = {velocity}\namplitude = {:?}", self.amplitude);
        let _ = writeln!(s, "g0 = {g0}\ng0_amplitude = {:?}", self.g0_amplitude);
        let _ = writeln!(s, "bottom = {}\ntop = {}", regime_name(self.bottom), regime_name(self.top));
        let _ = writeln!(s, "lambda = {:?}\ndelta = {:?}", self.lambda, self.delta);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "kernel_floor = {:?}", self.kernel_floor);
        let _ = writeln!(s, "track_deformation = {}", self.track_deformation);
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "force_sign = {:?}", self.force_sign);
        s
    }

    pub fn to_text(&self) -> String {
        self.to_text_for(&self.kappa)
    }
}
