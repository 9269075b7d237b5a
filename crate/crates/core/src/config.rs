//! Run configuration: a flat `key = value` file whose entries are overridden
//! by command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::bayes::{ModelVariant, DEFAULT_BURN_IN, DEFAULT_ITERS};
use crate::copula::CopulaStructure;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_DAYS: usize = 20;
pub const DEFAULT_COPULA_WINDOW_DAYS: usize = 100;
pub const DEFAULT_SAMPLES: usize = 1000;

const KEYS: &[&str] = &[
    "data",
    "out",
    "model",
    "window_days",
    "copula_window_days",
    "iters",
    "burn_in",
    "samples",
    "copula",
    "seed",
    "from",
    "to",
    "sweep",
    "sweep_samples",
    "trajectories",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory holding `forecasts.csv`, `production.csv` and `mask.csv`.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub model: ModelVariant,
    pub window_days: usize,
    pub copula_window_days: usize,
    pub iters: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub copula: Option<CopulaStructure>,
    pub seed: u64,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    /// Training window lengths for the sensitivity sweep; empty disables it.
    pub sweep: Vec<usize>,
    pub sweep_samples: usize,
    pub write_trajectories: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            model: ModelVariant::FULL,
            window_days: DEFAULT_WINDOW_DAYS,
            copula_window_days: DEFAULT_COPULA_WINDOW_DAYS,
            iters: DEFAULT_ITERS,
            burn_in: DEFAULT_BURN_IN,
            samples: DEFAULT_SAMPLES,
            copula: None,
            seed: 1,
            from: None,
            to: None,
            sweep: Vec::new(),
            sweep_samples: 200,
            write_trajectories: true,
        }
    }
}

fn field(key: &str) -> &'static str {
    KEYS.iter().find(|k| **k == key).copied().unwrap_or("config")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        field: field(key),
        reason: format!("`{value}` is not a valid number"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config {
            field: field(key),
            reason: format!("`{value}` is not a boolean"),
        }),
    }
}

fn parse_date(key: &str, value: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| Error::Config {
        field: field(key),
        reason: format!("`{value}` is not a YYYY-MM-DD date"),
    })
}

/// `off`/`none` disables the copula; `on` selects the full structure.
pub fn parse_copula(value: &str) -> Result<Option<CopulaStructure>> {
    match value.trim() {
        "off" | "none" | "false" => Ok(None),
        "on" | "true" => Ok(Some(CopulaStructure::Full)),
        other => other.parse().map(Some),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        match key {
            "data" => self.data_dir = PathBuf::from(value),
            "out" => self.out_dir = PathBuf::from(value),
            "model" => self.model = value.parse()?,
            "window_days" => self.window_days = parse_num(key, value)?,
            "copula_window_days" => self.copula_window_days = parse_num(key, value)?,
            "iters" => self.iters = parse_num(key, value)?,
            "burn_in" => self.burn_in = parse_num(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "copula" => self.copula = parse_copula(value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "from" => self.from = Some(parse_date(key, value)?),
            "to" => self.to = Some(parse_date(key, value)?),
            "sweep" => {
                self.sweep = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_>>()?
            }
            "sweep_samples" => self.sweep_samples = parse_num(key, value)?,
            "trajectories" => self.write_trajectories = parse_bool(key, value)?,
            other => {
                return Err(Error::Config {
                    field: "config",
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                field: "config",
                reason: format!("line {} is not `key = value`", i + 1),
            })?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::Config { field, reason });
        if self.window_days == 0 {
            return bad("window_days", "must be at least 1".into());
        }
        if self.copula_window_days == 0 {
            return bad("copula_window_days", "must be at least 1".into());
        }
        if self.iters <= self.burn_in {
            return bad(
                "iters",
                format!("must exceed burn_in ({} <= {})", self.iters, self.burn_in),
            );
        }
        if self.samples == 0 {
            return bad("samples", "must be at least 1".into());
        }
        if self.copula.is_some() && self.samples < 2 {
            return bad("samples", "the copula needs at least 2 samples".into());
        }
        if let (Some(f), Some(t)) = (self.from, self.to) {
            if t < f {
                return bad("to", format!("{t} precedes from date {f}"));
            }
        }
        if self.sweep.contains(&0) {
            return bad("sweep", "window lengths must be at least 1".into());
        }
        if !self.sweep.is_empty() && self.sweep_samples == 0 {
            return bad("sweep_samples", "must be at least 1".into());
        }
        Ok(())
    }

    /// The configuration as `key = value` lines, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt_date = |d: Option<NaiveDate>| d.map(|d| d.to_string());
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("data", self.data_dir.display().to_string());
        put("out", self.out_dir.display().to_string());
        put("model", self.model.label());
        put("window_days", self.window_days.to_string());
        put("copula_window_days", self.copula_window_days.to_string());
        put("iters", self.iters.to_string());
        put("burn_in", self.burn_in.to_string());
        put("samples", self.samples.to_string());
        put("copula", self.copula.map_or("off".into(), |c| c.to_string()));
        put("seed", self.seed.to_string());
        if let Some(d) = opt_date(self.from) {
            put("from", d);
        }
        if let Some(d) = opt_date(self.to) {
            put("to", d);
        }
        if !self.sweep.is_empty() {
            put("sweep", self.sweep.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
        }
        put("sweep_samples", self.sweep_samples.to_string());
        put("trajectories", self.write_trajectories.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.window_days, 20);
        assert_eq!(cfg.copula_window_days, 100);
        assert_eq!(cfg.samples, 1000);
    }

    #[test]
    fn file_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("model", "indep").unwrap();
        cfg.set("copula", "ar1").unwrap();
        cfg.set("sweep", "5, 10,20").unwrap();
        cfg.set("from", "2011-03-01").unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.sweep, vec![5, 10, 20]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = RunConfig::parse("# run\n\nwindow_days = 7  # short\nseed=9\n").unwrap();
        assert_eq!(cfg.window_days, 7);
        assert_eq!(cfg.seed, 9);
    }

    fn rejected_field(cfg: &RunConfig) -> &'static str {
        match cfg.validate() {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn violations_name_their_field() {
        let base = RunConfig::default();
        let cases: Vec<(RunConfig, &str)> = vec![
            (RunConfig { window_days: 0, ..base.clone() }, "window_days"),
            (RunConfig { copula_window_days: 0, ..base.clone() }, "copula_window_days"),
            (RunConfig { iters: 500, burn_in: 500, ..base.clone() }, "iters"),
            (RunConfig { samples: 0, ..base.clone() }, "samples"),
            (
                RunConfig {
                    samples: 1,
                    copula: Some(CopulaStructure::Full),
                    ..base.clone()
                },
                "samples",
            ),
            (RunConfig { sweep: vec![5, 0], ..base.clone() }, "sweep"),
        ];
        for (cfg, want) in cases {
            assert_eq!(rejected_field(&cfg), want);
        }
    }

    #[test]
    fn parse_errors_name_their_field() {
        let mut cfg = RunConfig::default();
        for (k, v, want) in [
            ("window_days", "ten", "window_days"),
            ("from", "March", "from"),
            ("model", "ar9", "model"),
            ("copula", "banded", "copula"),
            ("colour", "red", "config"),
        ] {
            match cfg.set(k, v) {
                Err(Error::Config { field, .. }) => assert_eq!(field, want),
                other => panic!("{k}: {other:?}"),
            }
        }
    }
}
