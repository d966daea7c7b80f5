use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::inference::JointThreshold;
use crate::longrun::BlockSchedule;

/// Settings shared by every experiment command.
///
/// Fields left as `None` fall back to per-command defaults. Values come from
/// an optional `key=value` file and are then overridden key by key, so the
/// command line and the file go through the same parser.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub d: Option<usize>,
    pub p: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub n: Option<u64>,
    pub runs: Option<u64>,
    pub c: f64,
    pub zeta: Option<f64>,
    pub omega: f64,
    pub seed: u64,
    /// Every sample size is divided by this.
    pub scale: u64,
    pub checkpoints: Option<Vec<u64>>,
    pub out_dir: PathBuf,
    /// Rows of the fixed design used by the GD traces.
    pub design_rows: Option<usize>,
    /// Feed i.i.d. standard normal vectors to the covariance estimator instead of SGD iterates.
    pub oracle: bool,
    pub joint_threshold: JointThreshold,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: None,
            p: None,
            alpha: None,
            n: None,
            runs: None,
            c: 1.0,
            zeta: None,
            omega: 0.05,
            seed: 20240917,
            scale: 1,
            checkpoints: None,
            out_dir: PathBuf::from("."),
            design_rows: None,
            oracle: false,
            joint_threshold: JointThreshold::default(),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "d",
    "p",
    "alpha",
    "n",
    "runs",
    "c",
    "zeta",
    "omega",
    "seed",
    "scale",
    "checkpoints",
    "out",
    "design_rows",
    "oracle",
    "joint_threshold",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("cannot parse {key}={value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "d" => self.d = Some(parse(key, value)?),
            "p" => self.p = Some(parse(key, value)?),
            "alpha" => self.alpha = Some(parse_list(key, value)?),
            "n" => self.n = Some(parse(key, value)?),
            "runs" => self.runs = Some(parse(key, value)?),
            "c" => self.c = parse(key, value)?,
            "zeta" => self.zeta = Some(parse(key, value)?),
            "omega" => self.omega = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "scale" => self.scale = parse(key, value)?,
            "checkpoints" => self.checkpoints = Some(parse_list(key, value)?),
            "out" => self.out_dir = PathBuf::from(value.trim()),
            "design_rows" => self.design_rows = Some(parse(key, value)?),
            "oracle" => self.oracle = parse(key, value)?,
            "joint_threshold" => {
                self.joint_threshold = match value.trim() {
                    "half_omega" => JointThreshold::HalfOmega,
                    "conventional" => JointThreshold::Conventional,
                    other => {
                        return Err(Error::Parameter(format!(
                            "joint_threshold must be half_omega or conventional, got {other:?}"
                        )))
                    }
                }
            }
            other => return Err(Error::Parameter(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == Some(0) {
            return Err(Error::Parameter("d must be positive".into()));
        }
        if let Some(p) = self.p {
            crate::error::check_probability(p)?;
        }
        if let Some(alphas) = &self.alpha {
            if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(Error::Parameter(format!("learning rates must be positive, got {alphas:?}")));
            }
        }
        if self.n == Some(0) || self.runs == Some(0) || self.scale == 0 || self.design_rows == Some(0) {
            return Err(Error::Parameter("counts must be positive".into()));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Parameter(format!("omega must lie in (0, 1), got {}", self.omega)));
        }
        if let Some(cps) = &self.checkpoints {
            if cps.is_empty() || cps[0] == 0 || cps.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parameter(format!("checkpoints must be positive and strictly increasing, got {cps:?}")));
            }
            if let Some(n) = self.n {
                if *cps.last().unwrap() > n {
                    return Err(Error::Parameter(format!("checkpoints exceed n = {n}")));
                }
            }
        }
        BlockSchedule::new(self.c, self.zeta.unwrap_or(2.0))?;
        Ok(())
    }

    /// Block schedule with `zeta` defaulting to `default_zeta`.
    pub fn schedule(&self, default_zeta: f64) -> Result<BlockSchedule> {
        BlockSchedule::new(self.c, self.zeta.unwrap_or(default_zeta))
    }

    /// `n / scale`, at least 1.
    pub fn scaled(&self, n: u64) -> u64 {
        (n / self.scale).max(1)
    }
}

/// `d` points evenly spaced over `[0, 1]`.
pub fn equidistant_beta(d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![0.0];
    }
    (0..d).map(|j| j as f64 / (d - 1) as f64).collect()
}
