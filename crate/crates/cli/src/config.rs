//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Every key has a
//! default; a config file and then `--set` overrides are applied on top.
//! [`RunConfig::echo`] prints a config that parses back to the same value.

use std::fmt;
use std::str::FromStr;

use covsense::bottleneck::{SolverConfig, DEFAULT_MU_BRACKET};
use covsense::photon_stats::{ChannelParams, ProbeFamily, ProbeSpec, DEFAULT_EPS_TAIL};
use covsense::sensing::{RateConfig, DEFAULT_TMSV_COPIES};
use covsense::chernoff::DEFAULT_ALPHA_TOL;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{key}: {msg}")]
pub struct ConfigError {
    /// Offending key, or the source that failed to parse.
    pub key: String,
    pub msg: String,
}

fn bad<T>(key: &str, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        key: key.to_string(),
        msg: msg.into(),
    })
}

/// A list of reals written out or generated from a range.
///
/// `lin:a:b:n` and `log:a:b:n` give `n` points from `a` to `b` inclusive;
/// anything else is a comma-separated list, possibly empty.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    List(Vec<f64>),
    Lin { start: f64, stop: f64, n: usize },
    Log { start: f64, stop: f64, n: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Lin { start, stop, n } => spaced(n, |t| start + (stop - start) * t),
            Grid::Log { start, stop, n } => spaced(n, |t| start * (stop / start).powf(t)),
        }
    }
}

fn spaced(n: usize, at: impl Fn(f64) -> f64) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![at(0.0)],
        _ => (0..n).map(|i| at(i as f64 / (n - 1) as f64)).collect(),
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("not a number: {x:?}"));
        if let Some(rest) = s.strip_prefix("lin:").or_else(|| s.strip_prefix("log:")) {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("range must look like {}a:b:n", &s[..4]));
            }
            let (start, stop) = (num(parts[0])?, num(parts[1])?);
            let n = parts[2].trim().parse::<usize>().map_err(|_| format!("bad point count {:?}", parts[2]))?;
            if !(start.is_finite() && stop.is_finite()) {
                return Err("range ends must be finite".into());
            }
            return Ok(if s.starts_with("log:") {
                if !(start > 0.0 && stop > 0.0) {
                    return Err("log range ends must be positive".into());
                }
                Grid::Log { start, stop, n }
            } else {
                Grid::Lin { start, stop, n }
            });
        }
        if s.is_empty() {
            return Ok(Grid::List(vec![]));
        }
        s.split(',').map(num).collect::<Result<_, _>>().map(Grid::List)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::List(v) => {
                let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "{}", items.join(","))
            }
            Grid::Lin { start, stop, n } => write!(f, "lin:{start:?}:{stop:?}:{n}"),
            Grid::Log { start, stop, n } => write!(f, "log:{start:?}:{stop:?}:{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyChoice {
    Coherent,
    Tmsv,
    Both,
}

impl FamilyChoice {
    pub fn families(&self, copies: u64) -> Vec<ProbeFamily> {
        let tmsv = ProbeFamily::Tmsv { copies };
        match self {
            FamilyChoice::Coherent => vec![ProbeFamily::Coherent],
            FamilyChoice::Tmsv => vec![tmsv],
            FamilyChoice::Both => vec![ProbeFamily::Coherent, tmsv],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FamilyChoice::Coherent => "coherent",
            FamilyChoice::Tmsv => "tmsv",
            FamilyChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kappa: f64,
    pub mu_b: f64,
    pub eta_a: f64,
    pub eta_e: f64,
    pub m_slots: usize,
    pub family: FamilyChoice,
    /// TMSV copies per mode-group.
    pub copies: u64,
    /// Photons per mode for single-energy commands.
    pub mu: f64,
    pub mu_grid: Grid,
    /// Extra background levels for `delta-xi`; empty uses `mu_b` alone.
    pub mu_b_sweep: Grid,
    pub eps_tail: f64,
    pub alpha_tol: f64,
    pub d: Grid,
    pub beta_grid: Grid,
    pub mu_min: f64,
    pub mu_max: f64,
    pub trials: u64,
    /// `None` picks the grid from the rates.
    pub m_values: Option<Grid>,
    pub seed: u64,
    /// Output file; `-` is stdout.
    pub path: String,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kappa: 0.2,
            mu_b: 10.0,
            eta_a: 1.0,
            eta_e: 1.0,
            m_slots: 2,
            family: FamilyChoice::Both,
            copies: DEFAULT_TMSV_COPIES,
            mu: 1e-3,
            mu_grid: Grid::Log {
                start: 1e-4,
                stop: 10.0,
                n: 41,
            },
            mu_b_sweep: Grid::List(vec![]),
            eps_tail: DEFAULT_EPS_TAIL,
            alpha_tol: DEFAULT_ALPHA_TOL,
            d: Grid::List(vec![1e-8]),
            beta_grid: Grid::List(vec![]),
            mu_min: DEFAULT_MU_BRACKET.0,
            mu_max: DEFAULT_MU_BRACKET.1,
            trials: 100_000,
            m_values: None,
            seed: 1,
            path: "-".into(),
            format: Format::Csv,
        }
    }
}

pub const KEYS: [&str; 21] = [
    "kappa", "mu_B", "eta_A", "eta_E", "m_slots", "family", "R", "mu", "mu_grid", "mu_B_sweep",
    "eps_tail", "alpha_tol", "d", "beta_grid", "mu_min", "mu_max", "trials", "M_values", "seed",
    "path", "format",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .or_else(|_| bad(key, format!("cannot parse {value:?}")))
}

fn grid(key: &str, value: &str) -> Result<Grid, ConfigError> {
    value.parse().or_else(|msg| bad(key, msg))
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "kappa" => self.kappa = parse(key, v)?,
            "mu_B" => self.mu_b = parse(key, v)?,
            "eta_A" => self.eta_a = parse(key, v)?,
            "eta_E" => self.eta_e = parse(key, v)?,
            "m_slots" => self.m_slots = parse(key, v)?,
            "family" => {
                self.family = match v {
                    "coherent" => FamilyChoice::Coherent,
                    "tmsv" => FamilyChoice::Tmsv,
                    "both" => FamilyChoice::Both,
                    _ => return bad(key, format!("expected coherent, tmsv or both, got {v:?}")),
                }
            }
            "R" => self.copies = parse(key, v)?,
            "mu" => self.mu = parse(key, v)?,
            "mu_grid" => self.mu_grid = grid(key, v)?,
            "mu_B_sweep" => self.mu_b_sweep = grid(key, v)?,
            "eps_tail" => self.eps_tail = parse(key, v)?,
            "alpha_tol" => self.alpha_tol = parse(key, v)?,
            "d" => self.d = grid(key, v)?,
            "beta_grid" => self.beta_grid = grid(key, v)?,
            "mu_min" => self.mu_min = parse(key, v)?,
            "mu_max" => self.mu_max = parse(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "M_values" => self.m_values = if v == "auto" { None } else { Some(grid(key, v)?) },
            "seed" => self.seed = parse(key, v)?,
            "path" => {
                if v.is_empty() {
                    return bad(key, "empty path");
                }
                self.path = v.to_string();
            }
            "format" => {
                if v != "csv" {
                    return bad(key, format!("only csv is supported, got {v:?}"));
                }
                self.format = Format::Csv;
            }
            _ => return bad(key, "unknown key"),
        }
        Ok(())
    }

    /// Applies a `--set key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        match assignment.split_once('=') {
            Some((k, v)) => self.set(k.trim(), v),
            None => bad(assignment, "override must look like key=value"),
        }
    }

    /// Applies every assignment in a config file body. A key may appear once.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return bad(&format!("line {}", lineno + 1), format!("expected key = value, got {line:?}"));
            };
            let k = k.trim();
            if seen.contains(&k) {
                return bad(k, "key given twice");
            }
            seen.push(k);
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its value, in canonical order.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let values = [
            format!("{:?}", self.kappa),
            format!("{:?}", self.mu_b),
            format!("{:?}", self.eta_a),
            format!("{:?}", self.eta_e),
            self.m_slots.to_string(),
            self.family.name().to_string(),
            self.copies.to_string(),
            format!("{:?}", self.mu),
            self.mu_grid.to_string(),
            self.mu_b_sweep.to_string(),
            format!("{:?}", self.eps_tail),
            format!("{:?}", self.alpha_tol),
            self.d.to_string(),
            self.beta_grid.to_string(),
            format!("{:?}", self.mu_min),
            format!("{:?}", self.mu_max),
            self.trials.to_string(),
            self.m_values.as_ref().map_or("auto".to_string(), |g| g.to_string()),
            self.seed.to_string(),
            self.path.clone(),
            "csv".to_string(),
        ];
        KEYS.into_iter().zip(values).collect()
    }

    pub fn to_text(&self) -> String {
        self.echo()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}").trim_end().to_string() + "\n")
            .collect()
    }

    /// Range checks across keys, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, v) in [("kappa", self.kappa), ("eta_A", self.eta_a), ("eta_E", self.eta_e)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, format!("must lie in [0, 1], got {v}"));
            }
        }
        if !(self.mu_b.is_finite() && self.mu_b >= 0.0) {
            return bad("mu_B", "must be finite and >= 0");
        }
        if self.m_slots < 2 {
            return bad("m_slots", "need at least 2 slots");
        }
        if self.copies == 0 {
            return bad("R", "need at least one copy");
        }
        if let Err(e) = ProbeSpec::coherent(self.mu).validate() {
            return bad("mu", e.to_string());
        }
        let positive = |key: &str, g: &Grid| -> Result<(), ConfigError> {
            let v = g.values();
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad(key, "entries must be positive and finite");
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return bad(key, "entries must be strictly ascending");
            }
            Ok(())
        };
        positive("mu_grid", &self.mu_grid)?;
        positive("d", &self.d)?;
        if self.mu_b_sweep.values().iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad("mu_B_sweep", "background levels must be finite and >= 0");
        }
        if self.beta_grid.values().iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("beta_grid", "multipliers must be finite and >= 0");
        }
        if !(self.eps_tail > 0.0 && self.eps_tail < 1e-3) {
            return bad("eps_tail", "must lie in (0, 1e-3)");
        }
        if !(self.alpha_tol > 0.0 && self.alpha_tol < 1.0) {
            return bad("alpha_tol", "must lie in (0, 1)");
        }
        if !(self.mu_min.is_finite() && self.mu_min >= 0.0) {
            return bad("mu_min", "must be finite and >= 0");
        }
        if !(self.mu_max.is_finite() && self.mu_max > self.mu_min) {
            return bad("mu_max", "must be finite and above mu_min");
        }
        if self.trials == 0 {
            return bad("trials", "must be >= 1");
        }
        if self.m_values.is_some() {
            self.explicit_modes()?;
        }
        Ok(())
    }

    /// Explicit `M_values`, rounded to integers and deduplicated.
    pub fn explicit_modes(&self) -> Result<Option<Vec<u32>>, ConfigError> {
        let Some(g) = &self.m_values else {
            return Ok(None);
        };
        let mut out: Vec<u32> = Vec::new();
        for x in g.values() {
            if !(x.is_finite() && x >= 1.0 && x <= u32::MAX as f64) {
                return bad("M_values", format!("{x} is not a mode count >= 1"));
            }
            let m = x.round() as u32;
            if out.last().is_some_and(|&last| m < last) {
                return bad("M_values", "entries must be ascending");
            }
            if out.last() != Some(&m) {
                out.push(m);
            }
        }
        Ok(Some(out))
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            kappa: self.kappa,
            eta_a: self.eta_a,
            eta_e: self.eta_e,
            mu_b: self.mu_b,
            m_slots: self.m_slots,
        }
    }

    pub fn rates(&self) -> RateConfig {
        RateConfig {
            eps_tail: self.eps_tail,
            alpha_tol: self.alpha_tol,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            rates: self.rates(),
            ..SolverConfig::default()
        }
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.mu_min, self.mu_max)
    }
}
