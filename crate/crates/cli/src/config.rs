//! Run configuration: a flat `key = value` text document plus command-line
//! overrides. Coefficients are given sparsely as `coeff.K = <expr>`; every
//! unspecified entry defaults to zero, since the algebra dimension grows
//! quickly with rank.

use std::collections::BTreeMap;
use weinorman::exprdsl::{parse_expr, CoeffExpr};
use weinorman::integrate::SolveMode;
use weinorman::rootsys::Family;

#[derive(Debug, Clone)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub family: Option<Family>,
    pub rank: Option<usize>,
    /// Sparse 1-based coefficient expressions.
    pub coefficients: BTreeMap<usize, String>,
    pub t0: f64,
    pub t1: f64,
    pub mode: SolveMode,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,
    pub reanchor: bool,
    pub output_path: Option<String>,
    pub output_format: OutputFormat,
    pub stride: usize,
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    pub structure_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: None,
            rank: None,
            coefficients: BTreeMap::new(),
            t0: 0.0,
            t1: 1.0,
            mode: SolveMode::Staged,
            rtol: 1e-9,
            atol: 1e-9,
            max_step: None,
            reanchor: false,
            output_path: None,
            output_format: OutputFormat::Csv,
            stride: 1,
            trials: 5,
            tol: 1e-6,
            seed: 42,
            structure_only: false,
        }
    }
}

pub fn parse_family(s: &str) -> Result<Family, ConfigError> {
    match s {
        "A" | "a" => Ok(Family::A),
        "B" | "b" => Ok(Family::B),
        "C" | "c" => Ok(Family::C),
        "D" | "d" => Ok(Family::D),
        "G2" | "g2" => Ok(Family::G2),
        other => Err(ConfigError(format!("unknown algebra family `{}`", other))),
    }
}

impl RunConfig {
    /// Merge a config file into this configuration.
    pub fn load_file(&mut self, path: &str) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config `{}`: {}", path, e)))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "{}:{}: expected `key = value`, got `{}`",
                    path,
                    lineno + 1,
                    raw.trim()
                )));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("{}:{}: {}", path, lineno + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |what: &str| ConfigError(format!("invalid {} `{}`", what, value));
        match key {
            "algebra" => self.family = Some(parse_family(value)?),
            "rank" => self.rank = Some(value.parse().map_err(|_| bad("rank"))?),
            "t0" => self.t0 = value.parse().map_err(|_| bad("t0"))?,
            "t1" => self.t1 = value.parse().map_err(|_| bad("t1"))?,
            "mode" => {
                self.mode = match value {
                    "staged" => SolveMode::Staged,
                    "monolithic" => SolveMode::Monolithic,
                    _ => return Err(bad("mode (staged|monolithic)")),
                }
            }
            "rtol" => self.rtol = value.parse().map_err(|_| bad("rtol"))?,
            "atol" => self.atol = value.parse().map_err(|_| bad("atol"))?,
            "max_step" => self.max_step = Some(value.parse().map_err(|_| bad("max_step"))?),
            "reanchor" => self.reanchor = value.parse().map_err(|_| bad("reanchor"))?,
            "output" => self.output_path = Some(value.to_string()),
            "format" => {
                self.output_format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(bad("format (csv|json)")),
                }
            }
            "stride" => self.stride = value.parse().map_err(|_| bad("stride"))?,
            "trials" => self.trials = value.parse().map_err(|_| bad("trials"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("tol"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            _ => {
                if let Some(idx) = key.strip_prefix("coeff.") {
                    let k: usize =
                        idx.parse().map_err(|_| ConfigError(format!("bad index `{}`", key)))?;
                    if k == 0 {
                        return Err(ConfigError("coefficient indices are 1-based".into()));
                    }
                    // Validate the expression now so errors carry positions.
                    parse_expr(value).map_err(|e| ConfigError(format!("coeff.{}: {}", k, e)))?;
                    self.coefficients.insert(k, value.to_string());
                } else {
                    return Err(ConfigError(format!("unknown config key `{}`", key)));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.t1 > self.t0) {
            return Err(ConfigError("t1 must exceed t0".into()));
        }
        if self.trials < 1 {
            return Err(ConfigError("trials must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(ConfigError("stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolve `(family, rank)`; `G2` may omit the rank.
    pub fn algebra(&self) -> Result<(Family, usize), ConfigError> {
        let family =
            self.family.ok_or_else(|| ConfigError("missing --algebra".to_string()))?;
        let rank = match (family, self.rank) {
            (Family::G2, None) => 2,
            (Family::G2, Some(2)) => 2,
            (Family::G2, Some(r)) => {
                return Err(ConfigError(format!("G2 has fixed rank 2, got {}", r)))
            }
            (_, Some(r)) => r,
            (_, None) => return Err(ConfigError("missing --rank".to_string())),
        };
        Ok((family, rank))
    }

    /// Expand the sparse coefficient table to a full vector of expressions.
    pub fn coefficient_exprs(&self, dim: usize) -> Result<Vec<CoeffExpr>, ConfigError> {
        let mut out = vec![CoeffExpr::zero(); dim];
        for (&k, src) in &self.coefficients {
            if k > dim {
                return Err(ConfigError(format!(
                    "coeff.{} exceeds algebra dimension {}",
                    k, dim
                )));
            }
            out[k - 1] =
                parse_expr(src).map_err(|e| ConfigError(format!("coeff.{}: {}", k, e)))?;
        }
        Ok(out)
    }
}
