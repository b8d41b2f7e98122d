//! Sweep configuration: defaults, `--quick` preset, and file parsing.

use std::path::Path;

use jointspar::l21base::BaselineOptions;
use jointspar::mansolve::SolverOptions;
use jointspar::penalty::ObjectiveParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Manifold,
    L21,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Manifold => "manifold",
            Method::L21 => "l21",
        }
    }

    /// Stable index used in seed derivation.
    pub fn id(&self) -> u64 {
        match self {
            Method::Manifold => 0,
            Method::L21 => 1,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim() {
            "manifold" => Ok(Method::Manifold),
            "l21" => Ok(Method::L21),
            other => Err(BenchError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(rename = "M_full")]
    pub m_full: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub s: usize,
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    pub lambda: f64,
    pub grad_rel_tol: f64,
    pub max_iter: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub success_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            m_full: 80,
            n: 300,
            k: 70,
            s: 30,
            k_grid: (38..=80).step_by(2).collect(),
            trials: 22,
            delta: 1e-3,
            lambda: 9.0,
            grad_rel_tol: 1e-8,
            max_iter: 1000,
            n_starts: 5,
            seed: 0,
            methods: vec![Method::Manifold, Method::L21],
            success_tol: 1e-3,
        }
    }
}

impl SweepConfig {
    /// 8 trials, every other grid point, 3 starts.
    pub fn quick() -> Self {
        Self {
            k_grid: (38..=80).step_by(4).collect(),
            trials: 8,
            n_starts: 3,
            ..Self::default()
        }
    }

    /// `default`, `quick`, or a path to a key-value or JSON file.
    pub fn load(name: &str) -> Result<Self, BenchError> {
        match name {
            "default" => Ok(Self::default()),
            "quick" => Ok(Self::quick()),
            path => Self::from_file(path),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Accepts a JSON object, or `key = value` lines (`#` starts a comment,
    /// lists are comma separated).
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| BenchError::Config(format!("JSON config: {e}")))?
        } else {
            Value::Object(parse_key_values(text)?)
        };
        let cfg: SweepConfig =
            serde_json::from_value(value).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.m_full == 0 || self.n == 0 || self.k == 0 || self.s == 0 {
            return fail("M_full, N, K and s must be positive".into());
        }
        if self.s > self.n {
            return fail(format!("s = {} exceeds N = {}", self.s, self.n));
        }
        if self.k_grid.is_empty() {
            return fail("k_grid is empty".into());
        }
        if let Some(&k) = self.k_grid.iter().find(|&&k| k == 0 || k > self.m_full) {
            return fail(format!("k = {k} outside 1..={}", self.m_full));
        }
        let mut sorted = self.k_grid.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.k_grid.len() {
            return fail("k_grid has duplicates".into());
        }
        if self.trials == 0 || self.max_iter == 0 || self.n_starts == 0 {
            return fail("trials, max_iter and n_starts must be >= 1".into());
        }
        if self.methods.is_empty() {
            return fail("no methods selected".into());
        }
        for (name, v) in [
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("grad_rel_tol", self.grad_rel_tol),
            ("success_tol", self.success_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn objective_params(&self) -> Result<ObjectiveParams<f64>, BenchError> {
        Ok(ObjectiveParams::new(self.lambda, self.delta)?)
    }

    /// Solver options for one cell; `seed` drives the multistart draws.
    pub fn solver_options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            max_iter: self.max_iter,
            grad_rel_tol: self.grad_rel_tol,
            n_starts: self.n_starts,
            seed,
            ..SolverOptions::default()
        }
    }

    pub fn baseline_options(&self) -> BaselineOptions {
        BaselineOptions::default()
    }

    /// Methods in canonical output order.
    pub fn ordered_methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn parse_key_values(text: &str) -> Result<Map<String, Value>, BenchError> {
    let mut map = Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            BenchError::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let parsed = match key {
            "k_grid" => Value::Array(
                split_list(value)
                    .map(|v| parse_scalar(v, lineno))
                    .collect::<Result<_, _>>()?,
            ),
            "methods" => Value::Array(split_list(value).map(|v| Value::String(v.to_string())).collect()),
            _ => parse_scalar(value, lineno)?,
        };
        if map.insert(key.to_string(), parsed).is_some() {
            return Err(BenchError::Config(format!("line {}: duplicate key {key}", lineno + 1)));
        }
    }
    Ok(map)
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
}

fn parse_scalar(v: &str, lineno: usize) -> Result<Value, BenchError> {
    if let Ok(i) = v.parse::<u64>() {
        return Ok(Value::from(i));
    }
    if let Ok(f) = v.parse::<f64>() {
        return Ok(Value::from(f));
    }
    Err(BenchError::Config(format!("line {}: cannot parse {v:?} as a number", lineno + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_protocol() {
        let c = SweepConfig::default();
        assert_eq!((c.m_full, c.n, c.k, c.s), (80, 300, 70, 30));
        assert_eq!(c.k_grid.len(), 22);
        assert_eq!(c.k_grid.first(), Some(&38));
        assert_eq!(c.k_grid.last(), Some(&80));
        assert_eq!(c.trials, 22);
        assert!(c.validate().is_ok());
        let q = SweepConfig::quick();
        assert_eq!(q.k_grid, vec![38, 42, 46, 50, 54, 58, 62, 66, 70, 74, 78]);
        assert_eq!((q.trials, q.n_starts), (8, 3));
    }

    #[test]
    fn key_value_and_json_agree() {
        let kv = "# small\nM_full = 20\nN = 40\nK = 5\ns = 4\nk_grid = 10, 14, 18\ntrials = 2\nmethods = l21\nseed = 7\ndelta = 1e-2\n";
        let json = r#"{"M_full": 20, "N": 40, "K": 5, "s": 4, "k_grid": [10, 14, 18],
                      "trials": 2, "methods": ["l21"], "seed": 7, "delta": 0.01}"#;
        let a = SweepConfig::parse(kv).unwrap();
        let b = SweepConfig::parse(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lambda, 9.0);
        assert_eq!(a.methods, vec![Method::L21]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "k_grid = 81",
            "k_grid = 0",
            "s = 400",
            "trials = 0",
            "methods = music",
            "bogus = 1",
            "delta = -1",
            "k_grid = 40, 40",
            "N 300",
        ] {
            assert!(SweepConfig::parse(text).is_err(), "{text}");
        }
    }
}
