//! Run configuration: defaults, a flat `key = value` file, then flag overrides.
//!
//! File schema (one entry per line, `#` starts a comment):
//!
//! ```text
//! seed = 42
//! hbar = 1.0
//! xi = binary            # binary | uniform | gaussian
//! dims = 2-6             # or a list: 2,3,5
//! trials = 200
//! samples = 100000
//! grid_min = -10
//! grid_max = 10
//! grid_points = 4096
//! out = cval-lab-out
//! format = json          # json | csv
//! threads = 4
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use cval_core::contvar::Grid;
use cval_core::{XiKind, XiModel};
use serde::Serialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum XiChoice {
    Binary,
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub hbar: f64,
    pub xi: XiChoice,
    pub dims: Vec<usize>,
    pub trials: usize,
    pub samples: usize,
    pub grid: GridSpec,
    pub output_dir: PathBuf,
    pub format: Format,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            hbar: 1.0,
            xi: XiChoice::Binary,
            dims: (2..=6).collect(),
            trials: 200,
            samples: 100_000,
            grid: GridSpec {
                q_min: -10.0,
                q_max: 10.0,
                points: 4096,
            },
            output_dir: PathBuf::from("cval-lab-out"),
            format: Format::Json,
            threads: None,
        }
    }
}

/// Values given on the command line; `None` keeps the file or default value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub hbar: Option<f64>,
    pub xi: Option<XiChoice>,
    pub dims: Option<String>,
    pub trials: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("invalid value for {key}: {value:?}")))
}

/// `2-6`, `2..6` (inclusive) or a comma list.
pub fn parse_dims(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    let range = spec.split_once("..").or_else(|| spec.split_once('-'));
    let dims: Vec<usize> = match range {
        Some((lo, hi)) => {
            let (lo, hi): (usize, usize) = (parse("dims", lo.trim())?, parse("dims", hi.trim())?);
            (lo..=hi).collect()
        }
        None => spec
            .split(',')
            .map(|s| parse("dims", s.trim()))
            .collect::<Result<_>>()?,
    };
    if dims.is_empty() {
        return Err(ConfigError(format!("empty dimension list {spec:?}")));
    }
    Ok(dims)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "hbar" => self.hbar = parse(key, value)?,
            "xi" => {
                self.xi = <XiChoice as clap::ValueEnum>::from_str(value, true)
                    .map_err(|_| ConfigError(format!("unknown xi model {value:?}")))?
            }
            "dims" => self.dims = parse_dims(value)?,
            "trials" => self.trials = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "grid_min" => self.grid.q_min = parse(key, value)?,
            "grid_max" => self.grid.q_max = parse(key, value)?,
            "grid_points" => self.grid.points = parse(key, value)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(value),
            "format" => {
                self.format = <Format as clap::ValueEnum>::from_str(value, true)
                    .map_err(|_| ConfigError(format!("unknown format {value:?}")))?
            }
            "threads" => self.threads = Some(parse(key, value)?),
            _ => return Err(ConfigError(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.hbar {
            self.hbar = v;
        }
        if let Some(v) = o.xi {
            self.xi = v;
        }
        if let Some(v) = &o.dims {
            self.dims = parse_dims(v)?;
        }
        if let Some(v) = o.trials {
            self.trials = v;
        }
        if let Some(v) = o.samples {
            self.samples = v;
        }
        if let Some(v) = &o.out {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.format {
            self.format = v;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(ConfigError("trials must be at least 1".into()));
        }
        if let Some(d) = self.dims.iter().find(|d| !(2..=64).contains(*d)) {
            return Err(ConfigError(format!("dimension {d} outside [2, 64]")));
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(ConfigError(format!("hbar must be positive, got {}", self.hbar)));
        }
        if self.samples < 2 {
            return Err(ConfigError("samples must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(ConfigError("threads must be at least 1".into()));
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.q_min, self.grid.q_max, self.grid.points).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn xi_model(&self) -> XiModel {
        let kind = match self.xi {
            XiChoice::Binary => XiKind::Binary,
            XiChoice::Uniform => XiKind::Uniform,
            XiChoice::Gaussian => XiKind::Gaussian,
        };
        XiModel::new(kind, self.hbar, self.seed).expect("validated hbar")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_forms() {
        assert_eq!(parse_dims("2-4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_dims("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_dims("3, 5,8").unwrap(), vec![3, 5, 8]);
        assert!(parse_dims("a").is_err());
    }

    #[test]
    fn file_then_flags() {
        let mut cfg = RunConfig::from_text("# run\nseed = 7\nxi = gaussian\ndims = 3,4 # two\ntrials=5\n").unwrap();
        assert_eq!((cfg.seed, cfg.xi, cfg.trials), (7, XiChoice::Gaussian, 5));
        assert_eq!(cfg.dims, vec![3, 4]);
        cfg.apply(&Overrides {
            seed: Some(9),
            dims: Some("2".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!((cfg.seed, cfg.dims.clone(), cfg.trials), (9, vec![2], 5));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_text("seed 3").is_err());
        assert!(RunConfig::from_text("colour = red").is_err());
        assert!(RunConfig::from_text("trials = 0").is_err());
        assert!(RunConfig::from_text("dims = 1-3").is_err());
        assert!(RunConfig::from_text("dims = 2,65").is_err());
        assert!(RunConfig::from_text("hbar = -1").is_err());
    }
}
