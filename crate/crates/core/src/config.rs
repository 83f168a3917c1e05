//! Experiment configuration (TOML).
//!
//! ```toml
//! task = "estimands"
//! seed = 7
//! method = "auto"            # auto | exact | binomial | mc
//! replications = 10000
//!
//! [model]
//! kind = "fig1"
//! setting = 2
//! graph = { kind = "circulant", n = 500, half_width = 50 }
//!
//! [design]
//! kind = "bernoulli"
//! pi = 0.5
//!
//! [sweep]
//! start = 0.1
//! stop = 0.9
//! steps = 9
//! ```
//!
//! Relative paths are resolved against the directory holding the config
//! file. Validation errors name the offending key path.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::design::{BernoulliDesign, Design, TwoStageClusteredDesign};
use crate::error::{Error, Result};
use crate::estimands::{Method, DEFAULT_FD_STEP};
use crate::graph::InterferenceGraph;
use crate::model::{NoiseSpec, OutcomeModel};
use crate::treatment::ProbabilityVector;
use crate::zoo::{self, ExposureOutcomes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Estimands,
    Estimators,
    Fig1,
    #[serde(alias = "verify_theorem1")]
    VerifyTheorem1,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Estimands => "estimands",
            Task::Estimators => "estimators",
            Task::Fig1 => "fig1",
            Task::VerifyTheorem1 => "verify-theorem1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    /// Edge-list file (`n <count>` header, 1-indexed `i j` lines).
    File { path: PathBuf },
    Circulant { n: usize, half_width: usize },
    Complete { n: usize },
    Empty { n: usize },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    LinearInMeans {
        /// `[β1, β2, β3]`
        beta: [f64; 3],
        graph: GraphConfig,
    },
    SaturatedLinear {
        /// CSV: `unit,alpha,beta,nu_1,…,nu_n`
        file: Option<PathBuf>,
        alpha: Option<Vec<f64>>,
        beta: Option<Vec<f64>>,
        nu: Option<Vec<Vec<f64>>>,
    },
    FourTypeExposure {
        m: usize,
        /// CSV: `unit,treated_exposed,treated,exposed,none`
        file: Option<PathBuf>,
        /// Inline rows `[treated_exposed, treated, exposed, none]`.
        outcomes: Option<Vec<[f64; 4]>>,
        /// CSV: `unit,cluster`
        clusters: Option<PathBuf>,
    },
    Fig1 {
        setting: u8,
        graph: GraphConfig,
    },
    DivergingAnonymous {
        n: usize,
        pi0: f64,
    },
    NoInterference {
        n: usize,
        #[serde(default)]
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PiConfig {
    Constant(f64),
    PerUnit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignConfig {
    Bernoulli {
        pi: PiConfig,
    },
    TwoStage {
        m: usize,
        rho: f64,
        /// CSV: `unit,cluster`
        clusters: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepConfig {
    /// `steps` evenly spaced points from `start` to `stop` inclusive.
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| self.start + span * k as f64 / last)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimatorsConfig {
    /// Analyst interference graph; defaults to the model's dependency sets.
    pub analyst_graph: Option<GraphConfig>,
    #[serde(default)]
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig1Config {
    pub n: usize,
    pub half_width: usize,
    pub points: usize,
    pub start: f64,
    pub stop: f64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            n: 500,
            half_width: 50,
            points: 81,
            start: 0.1,
            stop: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub instances: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub edge_probability: f64,
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            instances: 24,
            min_n: 4,
            max_n: 10,
            edge_probability: 0.35,
            tolerance: 1e-6,
        }
    }
}

fn default_replications() -> usize {
    10_000
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    pub model: Option<ModelConfig>,
    pub design: Option<DesignConfig>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub estimators: EstimatorsConfig,
    #[serde(default)]
    pub fig1: Fig1Config,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn in_open_unit(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must lie strictly inside (0, 1), got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite, got {v}")))
    }
}

fn positive(key: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::config(key, "must be at least 1"))
    }
}

impl GraphConfig {
    fn validate(&self, key: &str) -> Result<()> {
        match self {
            GraphConfig::File { .. } => Ok(()),
            GraphConfig::Circulant { n, half_width } => {
                if *half_width == 0 || 2 * half_width >= *n {
                    return Err(Error::config(
                        format!("{key}.half_width"),
                        format!("need 0 < 2·half_width < n (n = {n}, half_width = {half_width})"),
                    ));
                }
                Ok(())
            }
            GraphConfig::Complete { n } | GraphConfig::Empty { n } => positive(&format!("{key}.n"), *n),
        }
    }

    pub fn build(&self, base: &Path, key: &str) -> Result<InterferenceGraph> {
        self.validate(key)?;
        let graph = match self {
            GraphConfig::File { path } => InterferenceGraph::load(&base.join(path)),
            GraphConfig::Circulant { n, half_width } => InterferenceGraph::circulant(*n, *half_width),
            GraphConfig::Complete { n } => Ok(InterferenceGraph::complete(*n)),
            GraphConfig::Empty { n } => Ok(InterferenceGraph::empty(*n)),
        };
        graph.map_err(|e| Error::config(key, e.to_string()))
    }
}

/// Reads a `unit,cluster` CSV into a partition (0-indexed units, clusters
/// ordered by first appearance of their label).
pub fn load_cluster_partition(path: &Path) -> Result<Vec<Vec<usize>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut labels: Vec<String> = Vec::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        if record.len() != 2 {
            return Err(bad(format!("row {}: expected `unit,cluster`", row + 1)));
        }
        let unit: usize = record[0]
            .parse()
            .ok()
            .filter(|&u| u >= 1)
            .ok_or_else(|| bad(format!("row {}: unit must be a 1-indexed integer", row + 1)))?;
        let label = record[1].to_string();
        let idx = match labels.iter().position(|l| *l == label) {
            Some(i) => i,
            None => {
                labels.push(label);
                clusters.push(Vec::new());
                clusters.len() - 1
            }
        };
        clusters[idx].push(unit - 1);
    }
    Ok(clusters)
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "<root>".to_string() } else { path };
            Error::config(key, e.into_inner().message().trim().to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Range checks that do not need files on disk.
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::config("replications", "must be at least 2"));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return Err(Error::config("fd_step", format!("must lie in (0, 0.5), got {}", self.fd_step)));
        }
        if let Some(t) = self.threads {
            positive("threads", t)?;
        }
        if let Some(s) = &self.sweep {
            in_open_unit("sweep.start", s.start)?;
            in_open_unit("sweep.stop", s.stop)?;
            positive("sweep.steps", s.steps)?;
            if s.start > s.stop {
                return Err(Error::config("sweep.stop", "must not be below sweep.start"));
            }
        }
        if let Some(m) = &self.model {
            self.validate_model(m)?;
        }
        if let Some(d) = &self.design {
            match d {
                DesignConfig::Bernoulli { pi } => match pi {
                    PiConfig::Constant(p) => in_open_unit("design.pi", *p)?,
                    PiConfig::PerUnit(ps) => {
                        if ps.is_empty() {
                            return Err(Error::config("design.pi", "per-unit list is empty"));
                        }
                        for (k, p) in ps.iter().enumerate() {
                            in_open_unit(&format!("design.pi[{k}]"), *p)?;
                        }
                    }
                },
                DesignConfig::TwoStage { m, rho, .. } => {
                    positive("design.m", *m)?;
                    if !(0.0..=1.0).contains(rho) {
                        return Err(Error::config("design.rho", format!("must lie in [0, 1], got {rho}")));
                    }
                }
            }
        }
        if self.sweep.is_some() && matches!(self.design, Some(DesignConfig::TwoStage { .. })) {
            return Err(Error::config("sweep", "a π sweep needs a Bernoulli design"));
        }
        if let Some(g) = &self.estimators.analyst_graph {
            g.validate("estimators.analyst_graph")?;
        }
        if !(self.estimators.noise_sigma >= 0.0 && self.estimators.noise_sigma.is_finite()) {
            return Err(Error::config("estimators.noise_sigma", "must be finite and non-negative"));
        }
        let f = &self.fig1;
        if f.half_width == 0 || 2 * f.half_width >= f.n {
            return Err(Error::config("fig1.half_width", "need 0 < 2·half_width < n"));
        }
        if f.points < 3 {
            return Err(Error::config("fig1.points", "need at least 3 grid points"));
        }
        in_open_unit("fig1.start", f.start)?;
        in_open_unit("fig1.stop", f.stop)?;
        if f.start >= f.stop {
            return Err(Error::config("fig1.stop", "must exceed fig1.start"));
        }
        let v = &self.verify;
        positive("verify.instances", v.instances)?;
        if v.min_n < 2 {
            return Err(Error::config("verify.min_n", "must be at least 2"));
        }
        if v.max_n < v.min_n || v.max_n > 12 {
            return Err(Error::config("verify.max_n", "must lie in [min_n, 12]"));
        }
        if !(0.0..=1.0).contains(&v.edge_probability) {
            return Err(Error::config("verify.edge_probability", "must lie in [0, 1]"));
        }
        if !(v.tolerance > 0.0) {
            return Err(Error::config("verify.tolerance", "must be positive"));
        }
        Ok(())
    }

    fn validate_model(&self, m: &ModelConfig) -> Result<()> {
        match m {
            ModelConfig::LinearInMeans { beta, graph } => {
                for (k, b) in beta.iter().enumerate() {
                    finite(&format!("model.beta[{k}]"), *b)?;
                }
                graph.validate("model.graph")
            }
            ModelConfig::SaturatedLinear { file, alpha, beta, nu } => {
                let inline = alpha.is_some() || beta.is_some() || nu.is_some();
                match (file.is_some(), inline) {
                    (true, true) => Err(Error::config("model.file", "give either a file or inline alpha/beta/nu, not both")),
                    (false, false) => Err(Error::config("model", "saturated_linear needs `file` or inline `alpha`, `beta`, `nu`")),
                    (false, true) if alpha.is_none() || beta.is_none() || nu.is_none() => {
                        Err(Error::config("model", "inline saturated_linear needs all of `alpha`, `beta`, `nu`"))
                    }
                    _ => Ok(()),
                }
            }
            ModelConfig::FourTypeExposure { m, file, outcomes, .. } => {
                if *m < 2 {
                    return Err(Error::config("model.m", "cluster size must be at least 2"));
                }
                if file.is_some() == outcomes.is_some() {
                    return Err(Error::config("model", "four_type_exposure needs exactly one of `file` or `outcomes`"));
                }
                Ok(())
            }
            ModelConfig::Fig1 { setting, graph } => {
                if !(1..=3).contains(setting) {
                    return Err(Error::config("model.setting", format!("must be 1, 2 or 3, got {setting}")));
                }
                graph.validate("model.graph")
            }
            ModelConfig::DivergingAnonymous { n, pi0 } => {
                if *n < 2 {
                    return Err(Error::config("model.n", "must be at least 2"));
                }
                in_open_unit("model.pi0", *pi0)
            }
            ModelConfig::NoInterference { n, alpha, beta } => {
                positive("model.n", *n)?;
                finite("model.alpha", *alpha)?;
                finite("model.beta", *beta)
            }
        }
    }

    pub fn model_config(&self) -> Result<&ModelConfig> {
        self.model.as_ref().ok_or_else(|| Error::config("model", "missing table"))
    }

    pub fn build_model(&self) -> Result<Box<dyn OutcomeModel>> {
        let model_err = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config("model", other.to_string()),
        };
        let model: Box<dyn OutcomeModel> = match self.model_config()? {
            ModelConfig::LinearInMeans { beta, graph } => {
                let graph = graph.build(&self.base_dir, "model.graph")?;
                Box::new(
                    zoo::make_linear_in_means(zoo::LinearInMeansSpec {
                        graph,
                        beta1: beta[0],
                        beta2: beta[1],
                        beta3: beta[2],
                    })
                    .map_err(model_err)?,
                )
            }
            ModelConfig::SaturatedLinear { file, alpha, beta, nu } => match file {
                Some(f) => Box::new(zoo::SaturatedLinear::load_csv(&self.resolve(f)).map_err(model_err)?),
                None => Box::new(
                    zoo::make_saturated_linear(zoo::SaturatedLinearSpec {
                        alpha: alpha.clone().unwrap_or_default(),
                        beta: beta.clone().unwrap_or_default(),
                        nu: nu.clone().unwrap_or_default(),
                    })
                    .map_err(model_err)?,
                ),
            },
            ModelConfig::FourTypeExposure { m, file, outcomes, clusters } => {
                let partition = clusters
                    .as_ref()
                    .map(|p| load_cluster_partition(&self.resolve(p)))
                    .transpose()
                    .map_err(|e| Error::config("model.clusters", e.to_string()))?;
                match (file, outcomes) {
                    (Some(f), _) => Box::new(
                        zoo::FourTypeExposure::load_csv(&self.resolve(f), *m, partition).map_err(model_err)?,
                    ),
                    (None, Some(rows)) => Box::new(
                        zoo::make_four_type_exposure(zoo::FourTypeExposureSpec {
                            cluster_size: *m,
                            clusters: partition,
                            outcomes: rows
                                .iter()
                                .map(|r| ExposureOutcomes {
                                    treated_exposed: r[0],
                                    treated: r[1],
                                    exposed: r[2],
                                    none: r[3],
                                })
                                .collect(),
                        })
                        .map_err(model_err)?,
                    ),
                    (None, None) => unreachable!("validated"),
                }
            }
            ModelConfig::Fig1 { setting, graph } => {
                let graph = graph.build(&self.base_dir, "model.graph")?;
                Box::new(
                    zoo::make_fig1_setting(zoo::Fig1SettingSpec {
                        setting: *setting,
                        graph,
                    })
                    .map_err(model_err)?,
                )
            }
            ModelConfig::DivergingAnonymous { n, pi0 } => Box::new(
                zoo::make_diverging_anonymous(zoo::DivergingAnonymousSpec { pi0: *pi0 }, *n).map_err(model_err)?,
            ),
            ModelConfig::NoInterference { n, alpha, beta } => {
                Box::new(zoo::NoInterference::constant(*n, *alpha, *beta))
            }
        };
        Ok(model)
    }

    /// The configured design for `n` units; `pi_override` replaces a
    /// Bernoulli design's probabilities with a constant (sweep points).
    pub fn build_design(&self, n: usize, pi_override: Option<f64>) -> Result<Design> {
        let design = self.design.as_ref().ok_or_else(|| Error::config("design", "missing table"))?;
        match design {
            DesignConfig::Bernoulli { pi } => {
                let values = match (pi_override, pi) {
                    (Some(p), _) | (None, &PiConfig::Constant(p)) => vec![p; n],
                    (None, PiConfig::PerUnit(ps)) => {
                        if ps.len() != n {
                            return Err(Error::config(
                                "design.pi",
                                format!("has {} entries but the model has {n} units", ps.len()),
                            ));
                        }
                        ps.clone()
                    }
                };
                let pi = ProbabilityVector::new(values).map_err(|e| Error::config("design.pi", e.to_string()))?;
                Ok(BernoulliDesign::new(pi).into())
            }
            DesignConfig::TwoStage { m, rho, clusters } => {
                let d = match clusters {
                    Some(p) => {
                        let partition = load_cluster_partition(&self.resolve(p))
                            .map_err(|e| Error::config("design.clusters", e.to_string()))?;
                        TwoStageClusteredDesign::with_clusters(n, *m, *rho, partition)
                    }
                    None => TwoStageClusteredDesign::new(n, *m, *rho),
                };
                d.map(Design::from).map_err(|e| Error::config("design", e.to_string()))
            }
        }
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        if self.estimators.noise_sigma == 0.0 {
            Ok(NoiseSpec::None)
        } else {
            NoiseSpec::gaussian(self.estimators.noise_sigma)
                .map_err(|e| Error::config("estimators.noise_sigma", e.to_string()))
        }
    }

    /// Analyst graph; defaults to the model's own dependency sets.
    pub fn analyst_graph(&self, model: &dyn OutcomeModel) -> Result<InterferenceGraph> {
        match &self.estimators.analyst_graph {
            Some(g) => g.build(&self.base_dir, "estimators.analyst_graph"),
            None => InterferenceGraph::new((0..model.n()).map(|j| model.dependencies(j).to_vec()).collect()),
        }
    }
}
