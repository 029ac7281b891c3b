//! Run configuration: defaults, JSON files and flag overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use vrlab::fields::AxisymGrid;
use vrlab::steady::RingSpec;
use vrlab::{Error, Result};

use crate::{Command, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub nr: usize,
    pub nz: usize,
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NRxNZ, got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        Ok(Self { nr: parse(a)?, nz: parse(b)? })
    }
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nr, self.nz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub r0: f64,
    pub r1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match v[..] {
            [r0, r1, z0, z1] => Ok(Self { r0, r1, z0, z1 }),
            _ => Err(format!("expected r0,r1,z0,z1, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub kappa: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub eps: f64,
    pub p: f64,
    pub grid: GridSize,
    /// Defaults to `[0, 4r*] × [-2r*, 2r*]` with `r* = κ/4πW`.
    pub domain: Option<Domain>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: u64,
    /// `ε` values for `ring-params`.
    pub sweep: Option<Vec<f64>>,
    pub steps: usize,
    /// Perturbation size for `evolve`, in units of `κ`.
    pub delta: f64,
    pub quick: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            kappa: 1.0,
            w: 1.0 / (4.0 * std::f64::consts::PI),
            eps: 0.05,
            p: 2.0,
            grid: GridSize { nr: 512, nz: 512 },
            domain: None,
            tol: None,
            out: None,
            threads: None,
            seed: 0,
            sweep: None,
            steps: 1000,
            delta: 0.0,
            quick: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn apply_flags(&mut self, c: &Common, cmd: &Command) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = c.$field { self.$field = v; } )* };
        }
        take!(kappa, w, eps, p, grid, seed);
        if c.domain.is_some() {
            self.domain = c.domain;
        }
        if c.tol.is_some() {
            self.tol = c.tol;
        }
        if c.threads.is_some() {
            self.threads = c.threads;
        }
        if c.out.is_some() {
            self.out.clone_from(&c.out);
        }
        match cmd {
            Command::RingParams { sweep: Some(s) } => self.sweep = Some(s.clone()),
            Command::Evolve { steps, delta } => {
                if let Some(s) = steps {
                    self.steps = *s;
                }
                if let Some(d) = delta {
                    self.delta = *d;
                }
            }
            Command::VerifyAll { quick } => self.quick |= quick,
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        RingSpec::new(self.kappa, self.w, self.eps, self.p)?;
        for &e in self.sweep.iter().flatten() {
            RingSpec::new(self.kappa, self.w, e, self.p)?;
        }
        if self.grid.nr < 2 || self.grid.nz < 2 {
            return Err(Error::Domain(format!("grid {} needs at least two cells per direction", self.grid)));
        }
        if let Some(d) = self.domain {
            AxisymGrid::new(d.r0, d.r1, d.z0, d.z1, self.grid.nr, self.grid.nz)?;
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!("tol = {t} must be positive")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Domain("threads must be at least 1".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain(format!("delta = {} must be nonnegative", self.delta)));
        }
        Ok(())
    }

    /// `--out`, else `$VRLAB_OUT/<command>`, else `vrlab-out/<command>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(o) = &self.out {
            return o.clone();
        }
        let root = std::env::var_os("VRLAB_OUT").map_or_else(|| PathBuf::from("vrlab-out"), PathBuf::from);
        root.join(&self.command)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_domain_parse() {
        assert_eq!("128x64".parse::<GridSize>().unwrap(), GridSize { nr: 128, nz: 64 });
        assert!("128".parse::<GridSize>().is_err());
        let d: Domain = "0,4,-2,2".parse().unwrap();
        assert_eq!((d.r0, d.r1, d.z0, d.z1), (0.0, 4.0, -2.0, 2.0));
        assert!("0,4,-2".parse::<Domain>().is_err());
    }

    #[test]
    fn file_config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"eps": 0.1, "bogus": 1}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"eps": 0.1, "W": 0.5}"#).unwrap();
        assert_eq!((c.eps, c.w, c.kappa), (0.1, 0.5, 1.0));
    }

    #[test]
    fn validation_catches_bad_ranges() {
        let bad = RunConfig { eps: 1.5, ..Default::default() };
        assert!(bad.validate().unwrap_err().is_validation());
        let bad = RunConfig { p: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
