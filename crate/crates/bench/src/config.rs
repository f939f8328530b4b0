//! Benchmark configuration and the parsers behind the CLI flags.

use std::fmt;
use std::str::FromStr;

use crate::gen::CauchyConfig;
use crate::metrics::MetricsOptions;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid {what} `{input}`: {reason}")]
    Invalid {
        what: &'static str,
        input: String,
        reason: String,
    },
    #[error("{0}")]
    Inconsistent(String),
}

fn invalid(what: &'static str, input: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        what,
        input: input.chars().take(64).collect(),
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Hqr,
    Cholqr,
    Cholqr2,
    Dense,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hqr, Method::Cholqr, Method::Cholqr2, Method::Dense];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hqr => "hqr",
            Method::Cholqr => "cholqr",
            Method::Cholqr2 => "cholqr2",
            Method::Dense => "dense",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| invalid("method", s, "expected hqr, cholqr, cholqr2 or dense"))
    }
}

/// Which test matrix to generate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatrixSpec {
    /// Random HODLR matrix with off-diagonal blocks of the given rank.
    Random { rank: usize },
    Cauchy(CauchyConfig),
    /// Geometrically spaced singular values with the given condition number.
    Spectrum { kappa: f64 },
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec::Random { rank: 1 }
    }
}

impl fmt::Display for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixSpec::Random { rank: 1 } => f.write_str("random"),
            MatrixSpec::Random { rank } => write!(f, "random:{rank}"),
            MatrixSpec::Cauchy(c) => write!(f, "cauchy:{}", c.name()),
            MatrixSpec::Spectrum { kappa } => write!(f, "spectrum:{kappa:e}"),
        }
    }
}

/// `random`, `random:<rank>`, `cauchy:a1|a2|a3` or `spectrum:<kappa>`.
pub fn parse_matrix_spec(s: &str) -> Result<MatrixSpec, ConfigError> {
    let s = s.trim();
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    match (kind, arg) {
        ("random", None) => Ok(MatrixSpec::Random { rank: 1 }),
        ("random", Some(a)) => match a.parse::<usize>() {
            Ok(rank) if rank >= 1 => Ok(MatrixSpec::Random { rank }),
            _ => Err(invalid("matrix", s, "rank must be a positive integer")),
        },
        ("cauchy", Some(a)) => CauchyConfig::ALL
            .into_iter()
            .find(|c| c.name() == a)
            .map(MatrixSpec::Cauchy)
            .ok_or_else(|| invalid("matrix", s, "expected cauchy:a1, cauchy:a2 or cauchy:a3")),
        ("spectrum", Some(a)) => match a.parse::<f64>() {
            Ok(kappa) if kappa.is_finite() && kappa >= 1.0 => Ok(MatrixSpec::Spectrum { kappa }),
            _ => Err(invalid("matrix", s, "condition number must be finite and at least 1")),
        },
        _ => Err(invalid("matrix", s, "expected random, cauchy:a1|a2|a3 or spectrum:<kappa>")),
    }
}

/// Comma-separated list of numbers, e.g. `1000,2000,4000`.
pub fn parse_number_list<T: FromStr>(s: &str) -> Result<Vec<T>, ConfigError> {
    if s.trim().is_empty() {
        return Err(invalid("number list", s, "empty list"));
    }
    s.split(',')
        .map(|item| {
            item.trim()
                .parse::<T>()
                .map_err(|_| invalid("number list", s, format!("cannot parse `{}`", item.trim())))
        })
        .collect()
}

/// Comma-separated positive, finite tolerances.
pub fn parse_eps_list(s: &str) -> Result<Vec<f64>, ConfigError> {
    let eps = parse_number_list::<f64>(s)?;
    match eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        Some(e) => Err(invalid("eps list", s, format!("{e} is not a positive finite tolerance"))),
        None => Ok(eps),
    }
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>, ConfigError> {
    if s.trim().is_empty() {
        return Err(invalid("method list", s, "empty list"));
    }
    s.split(',').map(str::parse).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub matrix: MatrixSpec,
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub eps: f64,
    pub n_min: usize,
    /// Use `eps` as an absolute threshold instead of `eps * ||A||_2`.
    pub absolute_eps: bool,
    pub metrics: MetricsOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            matrix: MatrixSpec::default(),
            methods: vec![Method::Hqr, Method::Cholqr, Method::Cholqr2],
            sizes: vec![1000, 2000, 4000],
            seeds: vec![0],
            eps: 1e-10,
            n_min: 250,
            absolute_eps: false,
            metrics: MetricsOptions::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.methods.is_empty() || self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(ConfigError::Inconsistent("methods, sizes and seeds must be nonempty".into()));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n == 0) {
            return Err(ConfigError::Inconsistent(format!("size {n} must be positive")));
        }
        if self.n_min == 0 {
            return Err(ConfigError::Inconsistent("nmin must be positive".into()));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ConfigError::Inconsistent(format!("eps {} must be positive and finite", self.eps)));
        }
        if !self.metrics.estimate {
            if let Some(n) = self.sizes.iter().find(|&&n| n > self.metrics.dense_limit) {
                return Err(ConfigError::Inconsistent(format!(
                    "n = {n} exceeds the dense limit {}; pass --estimate to use power-iteration norms",
                    self.metrics.dense_limit
                )));
            }
        }
        Ok(())
    }
}
