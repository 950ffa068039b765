//! Strict JSON experiment configuration.
//!
//! The top-level object names its experiment in the `"experiment"` key; the
//! remaining keys are parsed into that experiment's parameter struct, which
//! rejects unknown keys. Missing optional keys take the defaults below, and
//! the resolved configuration (minus `workers` and `output_dir`, which do not
//! influence results) is echoed into every summary.

use std::path::PathBuf;

use anderson_core::eigen::DEFAULT_DENSE_LIMIT;
use anderson_core::model::{DisorderLaw, DisorderSpec};
use anderson_core::stats::{Interval, DEFAULT_BANDWIDTH, DEFAULT_PROBES};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("at `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("`{key}`: {message}")]
    Range { key: String, message: String },
}

fn range(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        message: message.into(),
    }
}

/// A single value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    pub law: DisorderLaw,
    pub a: f64,
    pub b: f64,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        Self {
            law: DisorderLaw::Uniform,
            a: 0.0,
            b: 4.0,
        }
    }
}

impl DisorderConfig {
    pub fn spec(&self, seed: u64) -> DisorderSpec {
        DisorderSpec {
            law: self.law,
            a: self.a,
            b: self.b,
            base_seed: seed,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.spec(0)
            .validate()
            .map_err(|e| range("disorder", e.to_string()))
    }
}

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub seed: u64,
    pub bandwidth: f64,
    /// Explicit grid; when absent a uniform grid over the spectrum hull.
    pub grid: Option<Vec<f64>>,
    pub grid_step: f64,
    pub mass_tolerance: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for DosConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: 100,
            disorder: DisorderConfig::default(),
            realizations: 100,
            seed: DEFAULT_SEED,
            bandwidth: DEFAULT_BANDWIDTH,
            grid: None,
            grid_step: 0.01,
            mass_tolerance: 0.02,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WegnerConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: OneOrMany<usize>,
    pub disorder: DisorderConfig,
    #[serde(rename = "J")]
    pub j: OneOrMany<Interval>,
    pub realizations: u64,
    pub seed: u64,
    /// Largest allowed relative spread of the ratio across `L` at fixed `J`.
    pub stability_tolerance: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for WegnerConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: OneOrMany::Many(vec![50, 100, 200]),
            disorder: DisorderConfig::default(),
            j: OneOrMany::One(Interval::new(1.9, 2.1)),
            realizations: 2000,
            seed: DEFAULT_SEED,
            stability_tolerance: 0.1,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinamiConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: OneOrMany<usize>,
    pub disorder: DisorderConfig,
    #[serde(rename = "J")]
    pub j: OneOrMany<Interval>,
    /// One `K` per `J`; defaults to `K = J`.
    #[serde(rename = "K")]
    pub k: Option<OneOrMany<Interval>>,
    pub realizations: u64,
    pub seed: u64,
    /// Largest allowed max/min ratio across `L` at fixed `(J, K)`.
    pub stability_factor: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for MinamiConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: OneOrMany::Many(vec![50, 100, 200]),
            disorder: DisorderConfig::default(),
            j: OneOrMany::One(Interval::new(1.95, 2.05)),
            k: None,
            realizations: 1000,
            seed: DEFAULT_SEED,
            stability_factor: 2.0,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecorrelationConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: OneOrMany<usize>,
    pub alpha: f64,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    #[serde(rename = "E_prime")]
    pub e_prime: Option<f64>,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for DecorrelationConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: OneOrMany::Many(vec![150, 300, 600]),
            alpha: 0.7,
            e: None,
            e_prime: None,
            disorder: DisorderConfig::default(),
            realizations: 10_000,
            seed: DEFAULT_SEED,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub seed: u64,
    pub windows: Vec<Interval>,
    pub spacing_window: Interval,
    pub bandwidth: f64,
    pub dos_realizations: u64,
    /// Smallest density of states accepted at `E`.
    pub min_density: f64,
    pub tv_threshold: f64,
    pub ks_threshold: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: 1000,
            e: None,
            disorder: DisorderConfig::default(),
            realizations: 300,
            seed: DEFAULT_SEED,
            windows: vec![Interval::new(-1.0, 1.0)],
            spacing_window: Interval::new(-10.0, 10.0),
            bandwidth: DEFAULT_BANDWIDTH,
            dos_realizations: 40,
            min_density: 1e-3,
            tv_threshold: 0.1,
            ks_threshold: 0.08,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndependenceConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    #[serde(rename = "E_prime")]
    pub e_prime: Option<f64>,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub seed: u64,
    #[serde(rename = "U")]
    pub u: Interval,
    #[serde(rename = "U_prime")]
    pub u_prime: Interval,
    pub probes: Vec<(f64, f64)>,
    pub bandwidth: f64,
    pub dos_realizations: u64,
    pub min_density: f64,
    pub correlation_threshold: f64,
    pub laplace_threshold: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for IndependenceConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: 1000,
            e: None,
            e_prime: None,
            disorder: DisorderConfig::default(),
            realizations: 500,
            seed: DEFAULT_SEED,
            u: Interval::new(-1.0, 1.0),
            u_prime: Interval::new(-1.0, 1.0),
            probes: DEFAULT_PROBES.to_vec(),
            bandwidth: DEFAULT_BANDWIDTH,
            dos_realizations: 40,
            min_density: 1e-3,
            correlation_threshold: 0.1,
            laplace_threshold: 0.05,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub seed: u64,
    /// Fraction of the ordered spectrum assumed localized.
    pub quantile_window: Interval,
    /// Energy window; overrides `quantile_window` when present.
    pub energy_window: Option<Interval>,
    pub min_decay_rate: f64,
    /// Largest allowed relative spread of the median decay rate.
    pub stability_tolerance: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: 500,
            disorder: DisorderConfig::default(),
            realizations: 2,
            seed: DEFAULT_SEED,
            quantile_window: Interval::new(0.3, 0.7),
            energy_window: None,
            min_decay_rate: 0.1,
            stability_tolerance: 0.2,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub seed: u64,
    pub gradient_fd_samples: usize,
    pub hessian_fd_samples: usize,
    pub hessian_instances: u64,
    pub sign_patterns: usize,
    pub minor_trials: u64,
    pub minor_n_max: usize,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: 50,
            disorder: DisorderConfig::default(),
            realizations: 50,
            seed: DEFAULT_SEED,
            gradient_fd_samples: 20,
            hessian_fd_samples: 10,
            hessian_instances: 20,
            sign_patterns: 200,
            minor_trials: 100_000,
            minor_n_max: 50,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirichletConfig {
    pub n_max: usize,
    pub gap_n_max: usize,
    pub gap_floor: f64,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for DirichletConfig {
    fn default() -> Self {
        Self {
            n_max: 200,
            gap_n_max: 10_000,
            gap_floor: 0.5,
            seed: DEFAULT_SEED,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxMatchingConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub ell: OneOrMany<usize>,
    pub epsilon: f64,
    pub window: Interval,
    pub center: Option<Vec<i64>>,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub seed: u64,
    pub max_distance_threshold: f64,
    pub shrink_factor: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for BoxMatchingConfig {
    fn default() -> Self {
        Self {
            d: 1,
            l: 400,
            ell: OneOrMany::Many(vec![50, 100]),
            epsilon: 0.3,
            window: Interval::new(0.4, 0.6),
            center: None,
            disorder: DisorderConfig::default(),
            realizations: 10,
            seed: DEFAULT_SEED,
            max_distance_threshold: 1e-2,
            shrink_factor: 0.5,
            workers: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Dos(DosConfig),
    Wegner(WegnerConfig),
    Minami(MinamiConfig),
    Decorrelation(DecorrelationConfig),
    Poisson(PoissonConfig),
    Independence(IndependenceConfig),
    Localization(LocalizationConfig),
    PerturbationChecks(PerturbationConfig),
    DirichletOracle(DirichletConfig),
    BoxMatching(BoxMatchingConfig),
}

fn parse_body<T: serde::de::DeserializeOwned>(body: Map<String, Value>) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(Value::Object(body)).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Field {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(mut body) = value else {
        return Err(ConfigError::NotAnObject);
    };
    let kind = match body.remove("experiment") {
        Some(Value::String(s)) => s,
        Some(_) => {
            return Err(ConfigError::Field {
                path: "experiment".into(),
                message: "expected a string".into(),
            })
        }
        None => return Err(ConfigError::Missing("experiment".into())),
    };
    let config = match kind.as_str() {
        "dos" => ExperimentConfig::Dos(parse_body(body)?),
        "wegner" => ExperimentConfig::Wegner(parse_body(body)?),
        "minami" => ExperimentConfig::Minami(parse_body(body)?),
        "decorrelation" => ExperimentConfig::Decorrelation(parse_body(body)?),
        "poisson" => ExperimentConfig::Poisson(parse_body(body)?),
        "independence" => ExperimentConfig::Independence(parse_body(body)?),
        "localization" => ExperimentConfig::Localization(parse_body(body)?),
        "perturbation-checks" => ExperimentConfig::PerturbationChecks(parse_body(body)?),
        "dirichlet-oracle" => ExperimentConfig::DirichletOracle(parse_body(body)?),
        "box-matching" => ExperimentConfig::BoxMatching(parse_body(body)?),
        other => return Err(ConfigError::UnknownExperiment(other.to_string())),
    };
    config.validate()?;
    Ok(config)
}

fn check_dim(d: usize) -> Result<(), ConfigError> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(range("d", format!("must be 1, 2 or 3, got {d}")))
    }
}

fn check_positive_usize(key: &str, x: usize) -> Result<(), ConfigError> {
    if x == 0 {
        Err(range(key, "must be positive"))
    } else {
        Ok(())
    }
}

fn check_realizations(x: u64, min: u64) -> Result<(), ConfigError> {
    if x < min {
        Err(range(
            "realizations",
            format!("must be at least {min}, got {x}"),
        ))
    } else {
        Ok(())
    }
}

fn check_positive(key: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(range(key, format!("must be positive and finite, got {x}")))
    }
}

fn check_interval(key: &str, i: &Interval) -> Result<(), ConfigError> {
    if !(i.lo.is_finite() && i.hi.is_finite()) {
        return Err(range(key, "endpoints must be finite"));
    }
    if i.is_empty() {
        return Err(range(key, format!("empty interval [{}, {}]", i.lo, i.hi)));
    }
    Ok(())
}

fn required(key: &str, x: Option<f64>) -> Result<f64, ConfigError> {
    let v = x.ok_or_else(|| ConfigError::Missing(key.to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(range(key, "must be finite"))
    }
}

fn check_dense(d: usize, l: usize) -> Result<(), ConfigError> {
    let n = (2 * l + 1).checked_pow(d as u32).unwrap_or(usize::MAX);
    if n > DEFAULT_DENSE_LIMIT {
        Err(range(
            "L",
            format!("eigenvectors of {n} sites exceed the dense limit {DEFAULT_DENSE_LIMIT}"),
        ))
    } else {
        Ok(())
    }
}

fn check_eigenvalue_size(d: usize, l: usize) -> Result<(), ConfigError> {
    if d == 1 {
        return Ok(());
    }
    check_dense(d, l)
}

fn check_sizes(d: usize, ls: &[usize]) -> Result<(), ConfigError> {
    if ls.is_empty() {
        return Err(range("L", "at least one value is required"));
    }
    for &l in ls {
        check_positive_usize("L", l)?;
        check_eigenvalue_size(d, l)?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Dos(_) => "dos",
            ExperimentConfig::Wegner(_) => "wegner",
            ExperimentConfig::Minami(_) => "minami",
            ExperimentConfig::Decorrelation(_) => "decorrelation",
            ExperimentConfig::Poisson(_) => "poisson",
            ExperimentConfig::Independence(_) => "independence",
            ExperimentConfig::Localization(_) => "localization",
            ExperimentConfig::PerturbationChecks(_) => "perturbation-checks",
            ExperimentConfig::DirichletOracle(_) => "dirichlet-oracle",
            ExperimentConfig::BoxMatching(_) => "box-matching",
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            ExperimentConfig::Dos(c) => {
                check_dim(c.d)?;
                check_sizes(c.d, &[c.l])?;
                c.disorder.validate()?;
                check_realizations(c.realizations, 10)?;
                check_positive("bandwidth", c.bandwidth)?;
                check_positive("grid_step", c.grid_step)?;
                check_positive("mass_tolerance", c.mass_tolerance)?;
                if let Some(g) = &c.grid {
                    if g.is_empty()
                        || !g.windows(2).all(|w| w[0] < w[1])
                        || !g.iter().all(|x| x.is_finite())
                    {
                        return Err(range(
                            "grid",
                            "must be non-empty, finite and strictly ascending",
                        ));
                    }
                }
            }
            ExperimentConfig::Wegner(c) => {
                check_dim(c.d)?;
                check_sizes(c.d, &c.l.to_vec())?;
                c.disorder.validate()?;
                check_realizations(c.realizations, 1)?;
                let js = c.j.to_vec();
                if js.is_empty() {
                    return Err(range("J", "at least one interval is required"));
                }
                for j in &js {
                    check_interval("J", j)?;
                }
                check_positive("stability_tolerance", c.stability_tolerance)?;
            }
            ExperimentConfig::Minami(c) => {
                check_dim(c.d)?;
                check_sizes(c.d, &c.l.to_vec())?;
                c.disorder.validate()?;
                check_realizations(c.realizations, 1)?;
                let js = c.j.to_vec();
                if js.is_empty() {
                    return Err(range("J", "at least one interval is required"));
                }
                for j in &js {
                    check_interval("J", j)?;
                }
                if let Some(k) = &c.k {
                    let ks = k.to_vec();
                    if ks.len() != js.len() {
                        return Err(range("K", "needs one interval per J"));
                    }
                    for (j, k) in js.iter().zip(&ks) {
                        check_interval("K", k)?;
                        if !j.is_subset_of(k) {
                            return Err(range(
                                "K",
                                format!("J = [{}, {}] is not contained in K", j.lo, j.hi),
                            ));
                        }
                    }
                }
                check_positive("stability_factor", c.stability_factor)?;
            }
            ExperimentConfig::Decorrelation(c) => {
                check_dim(c.d)?;
                c.disorder.validate()?;
                if !(c.alpha > 0.0 && c.alpha < 1.0) {
                    return Err(range(
                        "alpha",
                        format!("must lie in (0, 1), got {}", c.alpha),
                    ));
                }
                let ls = c.l.to_vec();
                check_sizes(c.d, &ls)?;
                let e = required("E", c.e)?;
                let ep = required("E_prime", c.e_prime)?;
                if e == ep {
                    return Err(range("E_prime", "must differ from E"));
                }
                for &l in &ls {
                    let ell = (l as f64).powf(c.alpha).round() as usize;
                    if ell < 3 {
                        return Err(range(
                            "L",
                            format!("round(L^alpha) = {ell} for L = {l}; need at least 3"),
                        ));
                    }
                }
                check_realizations(c.realizations, 1)?;
            }
            ExperimentConfig::Poisson(c) => {
                check_dim(c.d)?;
                check_sizes(c.d, &[c.l])?;
                c.disorder.validate()?;
                required("E", c.e)?;
                check_realizations(c.realizations, 1)?;
                if c.windows.is_empty() {
                    return Err(range("windows", "at least one window is required"));
                }
                for (i, w) in c.windows.iter().enumerate() {
                    check_interval("windows", w)?;
                    if c.windows[..i].iter().any(|v| v.overlaps(w)) {
                        return Err(range("windows", "windows must be pairwise disjoint"));
                    }
                }
                check_interval("spacing_window", &c.spacing_window)?;
                check_positive("bandwidth", c.bandwidth)?;
                if c.dos_realizations < 10 {
                    return Err(range("dos_realizations", "must be at least 10"));
                }
                check_positive("min_density", c.min_density)?;
                check_positive("tv_threshold", c.tv_threshold)?;
                check_positive("ks_threshold", c.ks_threshold)?;
            }
            ExperimentConfig::Independence(c) => {
                check_dim(c.d)?;
                check_sizes(c.d, &[c.l])?;
                c.disorder.validate()?;
                let e = required("E", c.e)?;
                let ep = required("E_prime", c.e_prime)?;
                if e == ep {
                    return Err(range("E_prime", "must differ from E"));
                }
                check_realizations(c.realizations, 2)?;
                check_interval("U", &c.u)?;
                check_interval("U_prime", &c.u_prime)?;
                if c.probes
                    .iter()
                    .any(|&(t, s)| !(t >= 0.0 && s >= 0.0 && t.is_finite() && s.is_finite()))
                {
                    return Err(range(
                        "probes",
                        "probe values must be finite and nonnegative",
                    ));
                }
                check_positive("bandwidth", c.bandwidth)?;
                if c.dos_realizations < 10 {
                    return Err(range("dos_realizations", "must be at least 10"));
                }
                check_positive("min_density", c.min_density)?;
                check_positive("correlation_threshold", c.correlation_threshold)?;
                check_positive("laplace_threshold", c.laplace_threshold)?;
            }
            ExperimentConfig::Localization(c) => {
                check_dim(c.d)?;
                check_positive_usize("L", c.l)?;
                check_dense(c.d, c.l)?;
                c.disorder.validate()?;
                check_realizations(c.realizations, 1)?;
                let q = c.quantile_window;
                if !(0.0 <= q.lo && q.lo < q.hi && q.hi <= 1.0) {
                    return Err(range("quantile_window", "must satisfy 0 <= lo < hi <= 1"));
                }
                if let Some(w) = &c.energy_window {
                    check_interval("energy_window", w)?;
                }
                check_positive("min_decay_rate", c.min_decay_rate)?;
                check_positive("stability_tolerance", c.stability_tolerance)?;
            }
            ExperimentConfig::PerturbationChecks(c) => {
                check_dim(c.d)?;
                check_positive_usize("L", c.l)?;
                check_dense(c.d, c.l)?;
                c.disorder.validate()?;
                check_realizations(c.realizations, 1)?;
                if c.hessian_instances > c.realizations {
                    return Err(range("hessian_instances", "cannot exceed realizations"));
                }
                if c.minor_n_max < 2 {
                    return Err(range("minor_n_max", "must be at least 2"));
                }
            }
            ExperimentConfig::DirichletOracle(c) => {
                if c.n_max < 2 {
                    return Err(range("n_max", "must be at least 2"));
                }
                if c.n_max > DEFAULT_DENSE_LIMIT {
                    return Err(range(
                        "n_max",
                        format!("must not exceed {DEFAULT_DENSE_LIMIT}"),
                    ));
                }
                if c.gap_n_max < 2 {
                    return Err(range("gap_n_max", "must be at least 2"));
                }
                check_positive("gap_floor", c.gap_floor)?;
            }
            ExperimentConfig::BoxMatching(c) => {
                check_dim(c.d)?;
                check_positive_usize("L", c.l)?;
                check_dense(c.d, c.l)?;
                c.disorder.validate()?;
                let ells = c.ell.to_vec();
                if ells.is_empty() {
                    return Err(range("ell", "at least one value is required"));
                }
                for &e in &ells {
                    if e == 0 || e > c.l {
                        return Err(range("ell", format!("must lie in 1..={}, got {e}", c.l)));
                    }
                }
                if !(c.epsilon >= 0.0 && c.epsilon.is_finite()) {
                    return Err(range("epsilon", "must be nonnegative"));
                }
                check_interval("window", &c.window)?;
                if let Some(center) = &c.center {
                    if center.len() != c.d {
                        return Err(range("center", format!("needs {} coordinates", c.d)));
                    }
                }
                check_realizations(c.realizations, 1)?;
                check_positive("max_distance_threshold", c.max_distance_threshold)?;
                check_positive("shrink_factor", c.shrink_factor)?;
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Dos(c) => c.seed,
            ExperimentConfig::Wegner(c) => c.seed,
            ExperimentConfig::Minami(c) => c.seed,
            ExperimentConfig::Decorrelation(c) => c.seed,
            ExperimentConfig::Poisson(c) => c.seed,
            ExperimentConfig::Independence(c) => c.seed,
            ExperimentConfig::Localization(c) => c.seed,
            ExperimentConfig::PerturbationChecks(c) => c.seed,
            ExperimentConfig::DirichletOracle(c) => c.seed,
            ExperimentConfig::BoxMatching(c) => c.seed,
        }
    }

    fn runtime(&mut self) -> (&mut u64, &mut Option<usize>, &mut Option<PathBuf>) {
        match self {
            ExperimentConfig::Dos(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
            ExperimentConfig::Wegner(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
            ExperimentConfig::Minami(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
            ExperimentConfig::Decorrelation(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
            ExperimentConfig::Poisson(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
            ExperimentConfig::Independence(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
            ExperimentConfig::Localization(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
            ExperimentConfig::PerturbationChecks(c) => {
                (&mut c.seed, &mut c.workers, &mut c.output_dir)
            }
            ExperimentConfig::DirichletOracle(c) => {
                (&mut c.seed, &mut c.workers, &mut c.output_dir)
            }
            ExperimentConfig::BoxMatching(c) => (&mut c.seed, &mut c.workers, &mut c.output_dir),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        *self.runtime().0 = seed;
    }

    pub fn set_workers(&mut self, workers: usize) {
        *self.runtime().1 = Some(workers);
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        *self.runtime().2 = Some(dir);
    }

    fn runtime_ref(&self) -> (Option<usize>, Option<&PathBuf>) {
        match self {
            ExperimentConfig::Dos(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::Wegner(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::Minami(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::Decorrelation(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::Poisson(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::Independence(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::Localization(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::PerturbationChecks(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::DirichletOracle(c) => (c.workers, c.output_dir.as_ref()),
            ExperimentConfig::BoxMatching(c) => (c.workers, c.output_dir.as_ref()),
        }
    }

    /// Worker count; 1 when unset.
    pub fn workers(&self) -> usize {
        self.runtime_ref().0.unwrap_or(1)
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.runtime_ref().1.cloned()
    }

    /// The resolved configuration as echoed into summaries. Runtime-only
    /// settings (workers and output_dir) are omitted.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }
}

/// Keys excluded from the echo.
pub const RUNTIME_ONLY_KEYS: [&str; 2] = ["workers", "output_dir"];
