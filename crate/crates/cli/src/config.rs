//! Flat key-value run configuration with CLI overrides.
//!
//! Precedence: command-line `--set key=value` (and `--seed`/`--threads`
//! flags) over the config file over built-in defaults. Unknown keys are
//! rejected before any compute.

use e3dtv_core::error::{Error, Result};
use e3dtv_core::harness::{NoiseCase, NoiseSpec};
use e3dtv_core::solver::{SolverConfig, SolverMode};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const KNOWN_KEYS: &[&str] = &[
    // general
    "seed",
    "threads",
    "clip",
    // paths
    "input",
    "estimate",
    "output",
    "output_x",
    "output_e",
    "output_z",
    "report",
    "measurements",
    "metrics_out",
    "export_dir",
    "export_bands",
    "bench_out",
    // solver
    "tau",
    "c_tau",
    "lambda",
    "rank",
    "mu0",
    "mu_growth",
    "mu_max",
    "eps1",
    "eps2",
    "max_iters",
    "mu4_factor",
    "mode",
    // noise
    "noise_case",
    "noise_sigma",
    "noise_impulse",
    "strict_variance",
    "deadline_lo",
    "deadline_hi",
    "stripe_lo",
    "stripe_hi",
    // compressed sensing
    "ratio",
    // phantom generation
    "phantom_h",
    "phantom_w",
    "phantom_s",
    "phantom_rank",
    "phantom_smoothness",
    // benchmark
    "bench_kind",
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Load from an optional file plus `--set` overrides, then validate
    /// the key set.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::invalid(format!(
                        "{}:{}: expected 'key = value', got '{raw}'",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        for item in overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("--set expects key=value, got '{item}'")))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        let cfg = RunConfig { values };
        for key in cfg.values.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::invalid(format!("unknown config key '{key}'")));
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::invalid(format!("missing required config key '{key}'")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::invalid(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parse::<u64>(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parse::<usize>(key)?.unwrap_or(default))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parse::<f64>(key)?.unwrap_or(default))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.parse::<f64>(key)
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.parse::<usize>(key)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(Error::invalid(format!(
                "config key '{key}': expected a boolean, got '{v}'"
            ))),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64_or("seed", 0)
    }

    pub fn threads(&self) -> Result<usize> {
        let t = self.usize_or("threads", 1)?;
        if t == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        Ok(t)
    }

    /// Solver configuration for an `h x w` spatial grid. `tau` overrides
    /// `c_tau * sqrt(hw)`; `lambda` defaults to `1/sqrt(hw)`.
    pub fn solver(&self, h: usize, w: usize) -> Result<SolverConfig> {
        let hw = (h * w) as f64;
        let mut cfg = SolverConfig::default();
        let c_tau = self.f64_or("c_tau", 0.004)?;
        cfg.tau = self.f64_or("tau", c_tau * hw.sqrt())?;
        cfg.lambda = self.f64_or("lambda", 1.0 / hw.sqrt())?;
        cfg.rank = self.usize_or("rank", cfg.rank)?;
        cfg.mu0 = self.f64_or("mu0", cfg.mu0)?;
        cfg.mu_growth = self.f64_or("mu_growth", cfg.mu_growth)?;
        cfg.mu_max = self.f64_or("mu_max", cfg.mu_max)?;
        cfg.eps1 = self.f64_or("eps1", cfg.eps1)?;
        cfg.eps2 = self.f64_or("eps2", cfg.eps2)?;
        cfg.max_iters = self.usize_or("max_iters", cfg.max_iters)?;
        cfg.mu4_factor = self.f64_or("mu4_factor", cfg.mu4_factor)?;
        cfg.mode = match self.raw("mode").unwrap_or("e3dtv") {
            "e3dtv" => SolverMode::E3dtv,
            "3dtv" | "tv3d" => SolverMode::Tv3dBaseline,
            other => {
                return Err(Error::invalid(format!(
                    "mode must be 'e3dtv' or '3dtv', got '{other}'"
                )))
            }
        };
        Ok(cfg)
    }

    /// Noise specification for `s` bands.
    pub fn noise(&self, s: usize) -> Result<NoiseSpec> {
        let case = NoiseCase::parse(self.raw("noise_case").unwrap_or("a"))?;
        let mut spec = NoiseSpec::for_case(case, s, self.seed()?);
        if let Some(sigma) = self.f64_opt("noise_sigma")? {
            spec.gaussian_sigma = sigma;
        }
        if let Some(ratio) = self.f64_opt("noise_impulse")? {
            spec.impulse_ratio = ratio;
        }
        if let Some(lo) = self.usize_opt("deadline_lo")? {
            spec.deadline_bands.0 = lo;
        }
        if let Some(hi) = self.usize_opt("deadline_hi")? {
            spec.deadline_bands.1 = hi;
        }
        if let Some(lo) = self.usize_opt("stripe_lo")? {
            spec.stripe_bands.0 = lo;
        }
        if let Some(hi) = self.usize_opt("stripe_hi")? {
            spec.stripe_bands.1 = hi;
        }
        spec.strict_variance = self.bool_or("strict_variance", false)?;
        Ok(spec)
    }

    /// Comma-separated band index list, e.g. `export_bands = 0,5,9`.
    pub fn band_list(&self, key: &str) -> Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<usize>().map_err(|_| {
                        Error::invalid(format!("config key '{key}': bad band index '{tok}'"))
                    })
                })
                .collect(),
        }
    }
}
