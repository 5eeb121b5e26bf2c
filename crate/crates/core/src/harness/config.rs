use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::targets::{
    gaussian_target, load_dataset, logistic_target, sde_simulate, sde_target, student_t_target, sv_simulate, sv_target,
    synthetic_dataset, wishart_scale, TargetModel,
};

/// Recognised configuration keys, in file order.
pub const CONFIG_KEYS: [&str; 14] = [
    "target",
    "dataset",
    "kernel",
    "h",
    "L",
    "s",
    "jitter",
    "iters",
    "burnin",
    "chains",
    "seed",
    "pretune_iters",
    "auto_ar",
    "out",
];

/// A target name with `key=value` parameters, written `name:k1=v1,k2=v2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl FromStr for TargetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("target parameter `{item}` is not key=value")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let name = name.trim().to_ascii_lowercase();
        if name.is_empty() {
            return Err(Error::Config("empty target name".into()));
        }
        Ok(Self { name, params })
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

impl TargetSpec {
    fn get<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.params.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("target parameter `{key}` has invalid value `{v}`"))),
            None => default.ok_or_else(|| Error::Config(format!("target `{}` needs parameter `{key}`", self.name))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!("target `{}` has no parameter `{k}`", self.name)));
            }
        }
        Ok(())
    }

    /// Builds the model; `dataset` is needed only for `logistic` without
    /// `synthetic`.
    ///
    /// | name        | parameters (defaults)                                     |
    /// |-------------|-----------------------------------------------------------|
    /// | `gaussian`  | `d`, `mean` (0), `var` (1), `rho` (0, equicorrelation)    |
    /// | `student-t` | `d`, `nu` (3), `loc` (0), `rho` (0)                       |
    /// | `logistic`  | `label` (`label`), or `synthetic=1,n,p,seed`              |
    /// | `sv`        | `T` (100), `phi` (0.5), `sigma` (10), `seed` (1)          |
    /// | `sde`       | `d` (50), `N` (100), `T` (5), `df` (= d), `seed` (1)      |
    pub fn build(&self, dataset: Option<&Path>) -> Result<Box<dyn TargetModel>> {
        match self.name.as_str() {
            "gaussian" | "normal" => {
                self.check_keys(&["d", "mean", "var", "rho"])?;
                let d: usize = self.get("d", None)?;
                let cov = equicorrelated(d, self.get("var", Some(1.0))?, self.get("rho", Some(0.0))?)?;
                Ok(Box::new(gaussian_target(d, DVector::from_element(d, self.get("mean", Some(0.0))?), cov)?))
            }
            "student-t" | "t" => {
                self.check_keys(&["d", "nu", "loc", "rho"])?;
                let d: usize = self.get("d", None)?;
                let scale = equicorrelated(d, 1.0, self.get("rho", Some(0.0))?)?;
                let loc = DVector::from_element(d, self.get("loc", Some(0.0))?);
                Ok(Box::new(student_t_target(d, self.get("nu", Some(3.0))?, loc, scale)?))
            }
            "logistic" => {
                self.check_keys(&["label", "synthetic", "n", "p", "seed"])?;
                let data = if self.get("synthetic", Some(0u8))? != 0 {
                    synthetic_dataset(self.get("n", Some(569))?, self.get("p", Some(30))?, self.get("seed", Some(1))?)?
                } else {
                    let path = dataset.ok_or_else(|| Error::Config("logistic target needs `dataset`".into()))?;
                    let label: String = self.get("label", Some("label".to_string()))?;
                    load_dataset(path, &label)?
                };
                Ok(Box::new(logistic_target(&data)?))
            }
            "sv" => {
                self.check_keys(&["T", "phi", "sigma", "seed"])?;
                let sim = sv_simulate(
                    self.get("T", Some(100))?,
                    self.get("phi", Some(0.5))?,
                    self.get("sigma", Some(10.0))?,
                    self.get("seed", Some(1))?,
                )?;
                Ok(Box::new(sv_target(&sim.observations)?))
            }
            "sde" => {
                self.check_keys(&["d", "N", "T", "df", "seed"])?;
                let d: usize = self.get("d", Some(50))?;
                let n: usize = self.get("N", Some(100))?;
                let horizon: f64 = self.get("T", Some(5.0))?;
                let seed: u64 = self.get("seed", Some(1))?;
                let sigma_v = wishart_scale(d, self.get("df", Some(d))?, seed)?;
                let alpha = DVector::zeros(d);
                let path = sde_simulate(d, n, horizon, &alpha, sigma_v.clone(), seed.wrapping_add(1))?;
                Ok(Box::new(sde_target(&path, horizon / n as f64, sigma_v)?))
            }
            other => Err(Error::Config(format!("unknown target `{other}`"))),
        }
    }
}

fn equicorrelated(d: usize, var: f64, rho: f64) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::Config("target dimension must be at least 1".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| if i == j { var } else { var * rho }))
}

/// A step size given explicitly or left to the acceptance-rate tuner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StepSetting {
    Auto,
    Fixed(f64),
}

impl FromStr for StepSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(StepSetting::Auto);
        }
        parse_num(s).map(StepSetting::Fixed)
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Config(format!("cannot parse `{s}`")))
}

/// Settings of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub dataset: Option<PathBuf>,
    pub kernels: Vec<KernelKind>,
    /// Angle or step size for every kernel except `rwm`.
    pub h: StepSetting,
    pub steps: usize,
    /// Proposal scale for `rwm`.
    pub s: StepSetting,
    pub jitter: f64,
    pub iters: usize,
    /// `None` means 10% of `iters`.
    pub burnin: Option<usize>,
    pub chains: usize,
    pub seed: u64,
    pub pretune_iters: usize,
    /// Acceptance-rate target for tuned kernels; `None` uses each kernel's default.
    pub auto_ar: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: TargetSpec {
                name: "gaussian".into(),
                params: BTreeMap::from([("d".to_string(), "10".to_string())]),
            },
            dataset: None,
            kernels: KernelKind::ALL.to_vec(),
            h: StepSetting::Auto,
            steps: 1,
            s: StepSetting::Auto,
            jitter: 0.0,
            iters: 100_000,
            burnin: None,
            chains: 1,
            seed: 1,
            pretune_iters: 100_000,
            auto_ar: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    /// Sets one key; later calls win.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "target" => self.target = value.parse()?,
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "kernel" => {
                self.kernels = if value.eq_ignore_ascii_case("all") {
                    KernelKind::ALL.to_vec()
                } else {
                    value
                        .split(',')
                        .map(|k| k.parse())
                        .collect::<Result<Vec<KernelKind>>>()?
                };
            }
            "h" => self.h = value.parse()?,
            "L" => self.steps = parse_num(value)?,
            "s" => self.s = value.parse()?,
            "jitter" => self.jitter = parse_num(value)?,
            "iters" => self.iters = parse_num(value)?,
            "burnin" => self.burnin = Some(parse_num(value)?),
            "chains" => self.chains = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "pretune_iters" => self.pretune_iters = parse_num(value)?,
            "auto_ar" => self.auto_ar = Some(parse_num(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn burnin(&self) -> usize {
        self.burnin.unwrap_or(self.iters / 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(Error::Config("no kernel selected".into()));
        }
        if self.iters <= self.burnin() {
            return Err(Error::Config(format!(
                "iters ({}) must exceed burnin ({})",
                self.iters,
                self.burnin()
            )));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config("jitter must lie in [0, 1)".into()));
        }
        if let Some(ar) = self.auto_ar {
            if !(ar > 0.0 && ar < 1.0) {
                return Err(Error::Config("auto_ar must lie in (0, 1)".into()));
            }
        }
        for (name, s) in [("h", self.h), ("s", self.s)] {
            if let StepSetting::Fixed(v) = s {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive")));
                }
            }
        }
        Ok(())
    }
}
