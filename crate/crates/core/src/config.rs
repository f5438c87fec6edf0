//! Physical, geometric and PML parameters, plus the on-disk configuration format.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral;

/// Relative tolerance used to detect Wood anomalies (|α_n| equal to a wavenumber).
pub const WOOD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("Wood anomaly at mode {n}: alpha_n = {alpha_n} has the magnitude of {which}")]
    Wood {
        n: i64,
        alpha_n: f64,
        which: Wavenumber,
    },
    #[error("PML target {target:e} not reached after {doublings} doublings of sigma (F1*sqrt(L)={f1:e}, F2*sqrt(L)={f2:e}); increase delta")]
    NotAchievable {
        target: f64,
        doublings: u32,
        f1: f64,
        f2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wavenumber {
    Fluid,
    Compressional,
    Shear,
}

impl fmt::Display for Wavenumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Wavenumber::Fluid => "kappa",
            Wavenumber::Compressional => "kappa1",
            Wavenumber::Shear => "kappa2",
        })
    }
}

/// One period cell: materials, incidence, artificial boundary heights and the grating profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub omega: f64,
    pub rho: f64,
    pub rho_f: f64,
    pub lambda: f64,
    pub mu: f64,
    pub theta: f64,
    pub kappa: f64,
    pub period: f64,
    pub h1: f64,
    pub h2: f64,
    /// Polyline vertices (x1, x2), from x1 = 0 to x1 = period.
    pub profile: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub sigma1: C64,
    pub sigma2: C64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ProblemConfig {
    /// The flat-interface benchmark: unit materials, κ = 1, ω = π, θ = π/6.
    pub fn flat_example() -> Self {
        ProblemConfig {
            omega: PI,
            rho: 1.0,
            rho_f: 1.0,
            lambda: 1.0,
            mu: 1.0,
            theta: PI / 6.0,
            kappa: 1.0,
            period: 1.0,
            h1: 1.0,
            h2: -1.0,
            profile: vec![[0.0, 0.0], [1.0, 0.0]],
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let positive = [
            ("omega", self.omega),
            ("rho", self.rho),
            ("rho_f", self.rho_f),
            ("kappa", self.kappa),
            ("period", self.period),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    field,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.lambda.is_finite() && self.lambda + self.mu > 0.0) {
            return Err(invalid("lambda", "lambda + mu must be positive".into()));
        }
        if !(self.theta.is_finite() && self.theta.abs() < PI / 2.0) {
            return Err(invalid(
                "theta",
                format!("must lie in (-pi/2, pi/2), got {}", self.theta),
            ));
        }
        if !(self.h1.is_finite() && self.h2.is_finite()) {
            return Err(invalid("h1", "heights must be finite".into()));
        }
        self.check_profile()
    }

    fn check_profile(&self) -> Result<(), ConfigError> {
        let p = &self.profile;
        if p.len() < 2 {
            return Err(ConfigError::Geometry(
                "profile needs at least two vertices".into(),
            ));
        }
        if p.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(ConfigError::Geometry(
                "profile has non-finite coordinates".into(),
            ));
        }
        if p[0][0] != 0.0 {
            return Err(ConfigError::Geometry(format!(
                "profile must start at x1 = 0, starts at {}",
                p[0][0]
            )));
        }
        let last = p[p.len() - 1];
        if (last[0] - self.period).abs() > 1e-12 * self.period {
            return Err(ConfigError::Geometry(format!(
                "profile must end at x1 = period = {}, ends at {}",
                self.period, last[0]
            )));
        }
        if p.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(ConfigError::Geometry(
                "profile x1 must be strictly increasing".into(),
            ));
        }
        if (p[0][1] - last[1]).abs() > 1e-12 * (1.0 + p[0][1].abs()) {
            return Err(ConfigError::Geometry(
                "profile height at 0 and at period differ".into(),
            ));
        }
        let lo = p.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
        let hi = p.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
        if !(self.h2 < lo && hi < self.h1) {
            return Err(ConfigError::Geometry(format!(
                "profile range [{lo}, {hi}] must lie strictly inside (h2, h1) = ({}, {})",
                self.h2, self.h1
            )));
        }
        Ok(())
    }

    /// Profile height f(x1) on [0, period], by linear interpolation.
    pub fn profile_height(&self, x1: f64) -> f64 {
        let p = &self.profile;
        let k = p.partition_point(|v| v[0] <= x1).clamp(1, p.len() - 1);
        let (a, b) = (p[k - 1], p[k]);
        let t = (x1 - a[0]) / (b[0] - a[0]);
        a[1] + t * (b[1] - a[1])
    }

    pub fn is_flat(&self) -> bool {
        self.profile.iter().all(|v| v[1] == 0.0)
    }
}

fn invalid(field: &'static str, reason: String) -> ConfigError {
    ConfigError::Invalid { field, reason }
}

impl PmlConfig {
    pub fn uniform(delta: f64, sigma: C64, t: f64) -> Self {
        PmlConfig {
            delta1: delta,
            delta2: delta,
            sigma1: sigma,
            sigma2: sigma,
            t,
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        for (field, d) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(d.is_finite() && d > 0.0) {
                return Err(invalid(
                    field,
                    format!("layer thickness must be positive, got {d}"),
                ));
            }
        }
        for (field, s) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(s.re >= 0.0 && s.im > 0.0 && s.is_finite()) {
                return Err(invalid(field, format!("need Re >= 0 and Im > 0, got {s}")));
            }
        }
        if !(self.t.is_finite() && self.t >= 1.0) {
            return Err(invalid("t", format!("degree must be >= 1, got {}", self.t)));
        }
        Ok(())
    }

    pub fn medium(&self, cfg: &ProblemConfig) -> Medium {
        Medium {
            h1: cfg.h1,
            h2: cfg.h2,
            pml: *self,
        }
    }

    fn scaled_sigma(&self, f: f64) -> Self {
        PmlConfig {
            sigma1: self.sigma1 * f,
            sigma2: self.sigma2 * f,
            ..*self
        }
    }
}

/// The polynomial medium function s(x2) and the complex stretched coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    pub h1: f64,
    pub h2: f64,
    pub pml: PmlConfig,
}

impl Medium {
    pub fn s(&self, x2: f64) -> C64 {
        let p = &self.pml;
        if x2 > self.h1 {
            1.0 + p.sigma1 * ((x2 - self.h1) / p.delta1).powf(p.t)
        } else if x2 < self.h2 {
            1.0 + p.sigma2 * ((self.h2 - x2) / p.delta2).powf(p.t)
        } else {
            C64::new(1.0, 0.0)
        }
    }

    /// ds/dx2.
    pub fn ds(&self, x2: f64) -> C64 {
        let p = &self.pml;
        if x2 > self.h1 {
            p.sigma1 * (p.t / p.delta1) * ((x2 - self.h1) / p.delta1).powf(p.t - 1.0)
        } else if x2 < self.h2 {
            -p.sigma2 * (p.t / p.delta2) * ((self.h2 - x2) / p.delta2).powf(p.t - 1.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// x̂2 = x2 + ∫(s − 1): identity in the physical strip, complex inside the layers.
    pub fn stretched(&self, x2: f64) -> C64 {
        let p = &self.pml;
        if x2 > self.h1 {
            let r = (x2 - self.h1) / p.delta1;
            x2 + p.sigma1 * p.delta1 * r.powf(p.t + 1.0) / (p.t + 1.0)
        } else if x2 < self.h2 {
            let r = (self.h2 - x2) / p.delta2;
            x2 - p.sigma2 * p.delta2 * r.powf(p.t + 1.0) / (p.t + 1.0)
        } else {
            C64::new(x2, 0.0)
        }
    }

    pub fn top(&self) -> f64 {
        self.h1 + self.pml.delta1
    }

    pub fn bottom(&self) -> f64 {
        self.h2 - self.pml.delta2
    }
}

pub fn derive(cfg: &ProblemConfig) -> DerivedParams {
    DerivedParams {
        kappa1: cfg.omega * (cfg.rho / (2.0 * cfg.mu + cfg.lambda)).sqrt(),
        kappa2: cfg.omega * (cfg.rho / cfg.mu).sqrt(),
        alpha: cfg.kappa * cfg.theta.sin(),
        beta: cfg.kappa * cfg.theta.cos(),
    }
}

/// Largest |n| in the mode window: every propagating mode plus ten evanescent ones per side.
pub fn mode_window(cfg: &ProblemConfig) -> i64 {
    let d = derive(cfg);
    let k = cfg.kappa.max(d.kappa2);
    ((k + d.alpha.abs()) * cfg.period / (2.0 * PI)).ceil() as i64 + 10
}

pub fn alpha_n(cfg: &ProblemConfig, n: i64) -> f64 {
    2.0 * PI * n as f64 / cfg.period + derive(cfg).alpha
}

/// Lists every mode |n| ≤ window at which |α_n| coincides with κ, κ1 or κ2.
pub fn validate(cfg: &ProblemConfig, window: i64) -> Vec<ConfigError> {
    let d = derive(cfg);
    let mut out = Vec::new();
    for n in -window..=window {
        let a = alpha_n(cfg, n).abs();
        for (k, which) in [
            (cfg.kappa, Wavenumber::Fluid),
            (d.kappa1, Wavenumber::Compressional),
            (d.kappa2, Wavenumber::Shear),
        ] {
            if (a - k).abs() <= WOOD_TOL * k {
                out.push(ConfigError::Wood {
                    n,
                    alpha_n: alpha_n(cfg, n),
                    which,
                });
            }
        }
    }
    out
}

/// Full admissibility check used by every pipeline entry point.
pub fn admissible(cfg: &ProblemConfig) -> Result<DerivedParams, ConfigError> {
    cfg.check()?;
    if let Some(e) = validate(cfg, mode_window(cfg)).into_iter().next() {
        return Err(e);
    }
    Ok(derive(cfg))
}

pub const MAX_DOUBLINGS: u32 = 60;

/// Chooses σ so that F1·√Λ and F2·√Λ are both at most `target`.
///
/// A template that already meets the target is returned unchanged; otherwise σ
/// starts at 1 + 1i and is doubled (real and imaginary parts in lockstep).
pub fn select_pml_parameters(
    cfg: &ProblemConfig,
    target: f64,
    template: &PmlConfig,
) -> Result<PmlConfig, ConfigError> {
    let scale = cfg.period.sqrt();
    let meets = |p: &PmlConfig| {
        let f1 = spectral::bound_f1(cfg, p) * scale;
        let f2 = spectral::bound_f2(cfg, p) * scale;
        (f1 <= target && f2 <= target, f1, f2)
    };
    if meets(template).0 {
        return Ok(*template);
    }
    let start = PmlConfig {
        sigma1: C64::new(1.0, 1.0),
        sigma2: C64::new(1.0, 1.0),
        ..*template
    };
    let mut last = (f64::NAN, f64::NAN);
    for k in 0..=MAX_DOUBLINGS {
        let cand = start.scaled_sigma(2f64.powi(k as i32));
        let (ok, f1, f2) = meets(&cand);
        if ok {
            return Ok(cand);
        }
        last = (f1, f2);
    }
    Err(ConfigError::NotAchievable {
        target,
        doublings: MAX_DOUBLINGS,
        f1: last.0,
        f2: last.1,
    })
}

// ---------------------------------------------------------------------------
// On-disk format
// ---------------------------------------------------------------------------

/// Loop controls for the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub tol: f64,
    pub tau: f64,
    pub max_iter: usize,
    pub h0: f64,
    pub dof_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol: 1e-3,
            tau: 0.5,
            max_iter: 12,
            h0: 0.25,
            dof_cap: 500_000,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        if !(self.tol > 0.0) {
            return Err(invalid(
                "tol",
                format!("must be positive, got {}", self.tol),
            ));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid(
                "tau",
                format!("must lie in (0, 1), got {}", self.tau),
            ));
        }
        if !(self.h0.is_finite() && self.h0 > 0.0) {
            return Err(invalid("h0", format!("must be positive, got {}", self.h0)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub problem: ProblemConfig,
    pub pml: PmlConfig,
    pub run: RunConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    omega: f64,
    rho: f64,
    rho_f: f64,
    lambda: f64,
    mu: f64,
    theta: f64,
    kappa: f64,
    period: f64,
    h1: f64,
    h2: f64,
    profile: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmlSection {
    delta: f64,
    sigma_re: f64,
    sigma_im: f64,
    #[serde(default = "default_t")]
    t: f64,
}

fn default_t() -> f64 {
    2.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFormat {
    problem: ProblemSection,
    pml: PmlSection,
    #[serde(default)]
    run: RunConfig,
}

fn parse_profile(s: &str) -> Result<Vec<[f64; 2]>, ConfigError> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|pair| {
            let (a, b) = pair.split_once(':').ok_or_else(|| {
                ConfigError::Parse(format!("profile entry `{pair}` is not x1:x2"))
            })?;
            let x = a.trim().parse::<f64>();
            let y = b.trim().parse::<f64>();
            match (x, y) {
                (Ok(x), Ok(y)) => Ok([x, y]),
                _ => Err(ConfigError::Parse(format!(
                    "profile entry `{pair}` is not numeric"
                ))),
            }
        })
        .collect()
}

fn format_profile(p: &[[f64; 2]]) -> String {
    p.iter()
        .map(|v| format!("{:?}:{:?}", v[0], v[1]))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Config {
    pub fn flat_example() -> Self {
        Config {
            problem: ProblemConfig::flat_example(),
            pml: PmlConfig::uniform(3.0, C64::new(64.0, 64.0), 2.0),
            run: RunConfig::default(),
        }
    }

    /// Parses the sectioned key-value text, applies `section.key=value` overrides and validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let raw: FileFormat = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let p = raw.problem;
        let cfg = Config {
            problem: ProblemConfig {
                omega: p.omega,
                rho: p.rho,
                rho_f: p.rho_f,
                lambda: p.lambda,
                mu: p.mu,
                theta: p.theta,
                kappa: p.kappa,
                period: p.period,
                h1: p.h1,
                h2: p.h2,
                profile: parse_profile(&p.profile)?,
            },
            pml: PmlConfig::uniform(
                raw.pml.delta,
                C64::new(raw.pml.sigma_re, raw.pml.sigma_im),
                raw.pml.t,
            ),
            run: raw.run,
        };
        cfg.problem.check()?;
        cfg.pml.check()?;
        cfg.run.check()?;
        Ok(cfg)
    }

    /// Serializes back to the text format; `parse(dump())` reproduces `self` exactly.
    pub fn dump(&self) -> String {
        let p = &self.problem;
        let raw = FileFormat {
            problem: ProblemSection {
                omega: p.omega,
                rho: p.rho,
                rho_f: p.rho_f,
                lambda: p.lambda,
                mu: p.mu,
                theta: p.theta,
                kappa: p.kappa,
                period: p.period,
                h1: p.h1,
                h2: p.h2,
                profile: format_profile(&p.profile),
            },
            pml: PmlSection {
                delta: self.pml.delta1,
                sigma_re: self.pml.sigma1.re,
                sigma_im: self.pml.sigma1.im,
                t: self.pml.t,
            },
            run: self.run,
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

const SECTIONS: [&str; 3] = ["problem", "pml", "run"];

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<(), ConfigError> {
    let (key, value) = ov
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("override `{ov}` is not key=value")))?;
    let key = key.trim();
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s.to_string(), f.to_string()),
        None => {
            let owner = SECTIONS.iter().find(|s| {
                table
                    .get(**s)
                    .and_then(|v| v.as_table())
                    .is_some_and(|t| t.contains_key(key))
            });
            match owner {
                Some(s) => (s.to_string(), key.to_string()),
                None => {
                    return Err(ConfigError::Parse(format!(
                        "override key `{key}` needs a section prefix"
                    )))
                }
            }
        }
    };
    if !SECTIONS.contains(&section.as_str()) {
        return Err(ConfigError::Parse(format!("unknown section `{section}`")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let parsed = match parsed {
        // Integers are accepted wherever floats are expected.
        toml::Value::Integer(i) if !matches!(field.as_str(), "max_iter" | "dof_cap") => {
            toml::Value::Float(i as f64)
        }
        v => v,
    };
    table
        .entry(section)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| ConfigError::Parse("section is not a table".into()))?
        .insert(field, parsed);
    Ok(())
}
