//! `key = value` config overlay. Resolution order: defaults, then the
//! config file, then command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rulesift::pipeline::PipelineConfig;

use crate::CliError;

pub const CONFIG_ENV: &str = "RULESIFT_CONFIG";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overlay {
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub retries: Option<u32>,
    pub validation_attempts: Option<u32>,
    pub seed: Option<u64>,
    pub timeout: Option<f64>,
    pub max_vars: Option<usize>,
    pub max_body: Option<usize>,
    pub max_clauses: Option<usize>,
    pub jobs: Option<usize>,
    pub solver_cmd: Option<PathBuf>,
}

fn value<T: FromStr>(path: &Path, line: usize, key: &str, raw: &str) -> Result<Option<T>, CliError> {
    raw.parse()
        .map(Some)
        .map_err(|_| CliError::Config(format!("{}:{line}: bad value `{raw}` for `{key}`", path.display())))
}

impl Overlay {
    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut o = Overlay::default();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}:{n}: expected `key = value`", path.display())))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "rho" => o.rho = value(path, n, k, v)?,
                "tau" => o.tau = value(path, n, k, v)?,
                "retries" => o.retries = value(path, n, k, v)?,
                "validation_attempts" => o.validation_attempts = value(path, n, k, v)?,
                "seed" => o.seed = value(path, n, k, v)?,
                "timeout" => o.timeout = value(path, n, k, v)?,
                "max_vars" => o.max_vars = value(path, n, k, v)?,
                "max_body" => o.max_body = value(path, n, k, v)?,
                "max_clauses" => o.max_clauses = value(path, n, k, v)?,
                "jobs" => o.jobs = value(path, n, k, v)?,
                "solver_cmd" => o.solver_cmd = Some(PathBuf::from(v)),
                other => return Err(CliError::Config(format!("{}:{n}: unknown key `{other}`", path.display()))),
            }
        }
        Ok(o)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Overlay::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Overlay::parse(p, &text)
            }
        }
    }

    /// `self` with every field set in `top` replaced.
    pub fn then(self, top: Overlay) -> Overlay {
        Overlay {
            rho: top.rho.or(self.rho),
            tau: top.tau.or(self.tau),
            retries: top.retries.or(self.retries),
            validation_attempts: top.validation_attempts.or(self.validation_attempts),
            seed: top.seed.or(self.seed),
            timeout: top.timeout.or(self.timeout),
            max_vars: top.max_vars.or(self.max_vars),
            max_body: top.max_body.or(self.max_body),
            max_clauses: top.max_clauses.or(self.max_clauses),
            jobs: top.jobs.or(self.jobs),
            solver_cmd: top.solver_cmd.or(self.solver_cmd),
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let d = PipelineConfig::default();
        let timeout = match self.timeout {
            Some(t) if !(t.is_finite() && t > 0.0) => return Err(CliError::Config("timeout must be a positive number of seconds".into())),
            Some(t) => Duration::from_secs_f64(t),
            None => d.timeout,
        };
        let cfg = PipelineConfig {
            rho: self.rho.unwrap_or(d.rho),
            tau: self.tau.unwrap_or(d.tau),
            max_retries: self.retries.unwrap_or(d.max_retries),
            validation_attempts: self.validation_attempts.unwrap_or(d.validation_attempts),
            seed: self.seed.unwrap_or(d.seed),
            max_vars: self.max_vars.or(d.max_vars),
            max_body: self.max_body.or(d.max_body),
            max_clauses: self.max_clauses.or(d.max_clauses),
            timeout,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be positive".into()));
        }
        Ok(cfg)
    }
}
