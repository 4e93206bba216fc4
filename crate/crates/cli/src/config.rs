//! Flat `key = value` run configuration. File values are read first, flags
//! override them, and every field is range-checked before any compute.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use pmlab_core::solver::ShapeParams;

/// Bad configuration or command line; exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const KEYS: [&str; 11] = [
    "phi",
    "t0",
    "eps",
    "eps_ladder",
    "n",
    "dt_max",
    "c0",
    "c1",
    "delta",
    "t_end_factor",
    "out",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum T0Choice {
    /// The binding admissibility bound.
    Auto,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub phi: String,
    pub t0: T0Choice,
    pub eps: f64,
    pub eps_ladder: Vec<f64>,
    pub n: usize,
    /// `None` keeps dt_max = 2 t0 / n.
    pub dt_max: Option<f64>,
    pub shape: ShapeParams,
    pub delta: f64,
    pub t_end_factor: f64,
    pub out: PathBuf,
}

/// Raw key/value pairs before validation.
#[derive(Clone, Debug, Default)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut map = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected `key = value`", k + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(usage(format!("config line {}: unknown key `{key}`", k + 1)));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: Option<&String>) {
        if let Some(v) = value {
            self.0.insert(key.to_string(), v.trim().to_string());
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn number(&self, key: &str, default: f64) -> anyhow::Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_number(key, v),
        }
    }

    pub fn validate(&self) -> anyhow::Result<RunConfig> {
        let phi = self
            .get("phi")
            .filter(|s| !s.is_empty())
            .ok_or_else(|| usage("missing `phi` (e.g. --phi log)"))?
            .to_string();
        let t0 = match self.get("t0") {
            None | Some("auto") => T0Choice::Auto,
            Some(v) => {
                let t0 = parse_number("t0", v)?;
                if !(t0 > 0.0) {
                    return Err(usage(format!("t0 must be positive or `auto`, got {v}")));
                }
                T0Choice::Value(t0)
            }
        };
        let eps = self.number("eps", 0.05)?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(usage(format!("eps must lie in (0, 1), got {eps}")));
        }
        let eps_ladder = match self.get("eps_ladder") {
            None => vec![0.1, 0.05, 0.025],
            Some(v) => v
                .split(',')
                .map(|x| parse_number("eps_ladder", x.trim()))
                .collect::<anyhow::Result<Vec<f64>>>()?,
        };
        if eps_ladder.len() < 3 || eps_ladder.windows(2).any(|w| w[1] >= w[0]) || eps_ladder.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(usage(format!(
                "eps_ladder needs at least 3 strictly decreasing values in (0, 1), got {eps_ladder:?}"
            )));
        }
        let n = match self.get("n") {
            None => 400,
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| usage(format!("n must be a positive integer, got `{v}`")))?,
        };
        if n < 8 {
            return Err(usage(format!("n must be at least 8, got {n}")));
        }
        let dt_max = match self.get("dt_max") {
            None | Some("auto") => None,
            Some(v) => {
                let dt = parse_number("dt_max", v)?;
                if !(dt > 0.0) {
                    return Err(usage(format!("dt_max must be positive, got {v}")));
                }
                Some(dt)
            }
        };
        let shape = ShapeParams {
            c0: self.number("c0", 0.0)?,
            c1: self.number("c1", 0.0)?,
        };
        let delta = self.number("delta", pmlab_core::verification::DEFAULT_DELTA)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(usage(format!("delta must lie in (0, 1), got {delta}")));
        }
        let t_end_factor = self.number("t_end_factor", 2.0)?;
        if !(t_end_factor > 1.0) {
            return Err(usage(format!("t_end_factor must exceed 1, got {t_end_factor}")));
        }
        let out = PathBuf::from(self.get("out").unwrap_or("."));
        Ok(RunConfig {
            phi,
            t0,
            eps,
            eps_ladder,
            n,
            dt_max,
            shape,
            delta,
            t_end_factor,
            out,
        })
    }
}

fn parse_number(key: &str, v: &str) -> anyhow::Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| usage(format!("{key} must be a finite number, got `{v}`")))
}

impl RunConfig {
    /// `key = value` text with t0 resolved; reading it back gives the same run.
    pub fn to_text(&self, t0: f64) -> String {
        let mut s = String::new();
        let ladder: Vec<String> = self.eps_ladder.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "phi = {}", self.phi);
        match self.t0 {
            T0Choice::Auto => {
                let _ = writeln!(s, "# t0 = auto");
            }
            T0Choice::Value(_) => {}
        }
        let _ = writeln!(s, "t0 = {t0:e}");
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "eps_ladder = {}", ladder.join(","));
        let _ = writeln!(s, "n = {}", self.n);
        match self.dt_max {
            Some(dt) => {
                let _ = writeln!(s, "dt_max = {dt}");
            }
            None => {
                let _ = writeln!(s, "dt_max = auto");
            }
        }
        let _ = writeln!(s, "c0 = {}", self.shape.c0);
        let _ = writeln!(s, "c1 = {}", self.shape.c1);
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "t_end_factor = {}", self.t_end_factor);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}
