//! Experiment configuration: an INI-style `key = value` file with sections.
//! Values are applied on top of the defaults in file order, and command-line
//! flags are applied last through the same [`Config::set`] entry point.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::dec::ClusterConfig;
use crate::error::{OdxuError, Result};
use crate::gbt::GbtParams;
use crate::nn::{AeArch, Optimizer, TrainConfig};
use crate::transfer::{self, EarlyStop, ScenarioSpec, Settings};
use crate::uq::Recipe;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub target: DataSource,
    pub synth_classes: usize,
    pub synth_per_class: usize,
    pub synth_overlap: f64,
    pub source_seed: u64,
    pub target_seed: u64,
    pub benign_class: String,
    pub benign_downsample: f64,
    pub upsample: BTreeMap<String, f64>,
    /// Class withheld from training and used as the unknown attack.
    pub holdout: Option<String>,
    /// Out-of-support synthetic unknowns added to the open-set evaluation.
    pub synth_unknowns: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synth,
            target: DataSource::Synth,
            synth_classes: 10,
            synth_per_class: 200,
            synth_overlap: 0.1,
            source_seed: 1,
            target_seed: 2,
            benign_class: crate::dataio::SYNTH_BENIGN.to_string(),
            benign_downsample: 0.0,
            upsample: BTreeMap::new(),
            holdout: None,
            synth_unknowns: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub case: usize,
    pub portion: f64,
    pub eta: Option<usize>,
    pub delta_ae: Option<f64>,
    pub delta_cluster: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            case: 6,
            portion: 0.5,
            eta: None,
            delta_ae: None,
            delta_cluster: None,
        }
    }
}

impl ScenarioConfig {
    /// Early stopping is on only when all three of eta and the deltas are set.
    pub fn stop(&self) -> Result<Option<EarlyStop>> {
        match (self.eta, self.delta_ae, self.delta_cluster) {
            (None, None, None) => Ok(None),
            (Some(eta), Some(delta_ae), Some(delta_cluster)) => {
                let s = EarlyStop {
                    eta,
                    delta_ae,
                    delta_cluster,
                };
                s.validate()?;
                Ok(Some(s))
            }
            _ => Err(OdxuError::Config(
                "[scenario] eta, delta_ae and delta_cluster must be given together".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqConfig {
    pub recipes: Vec<Recipe>,
    /// Correct-to-misclassified ratio in the metamodel set.
    pub ratio: usize,
    pub train_fraction: f64,
    pub threshold: f64,
    /// Recipe whose score drives the competence metric.
    pub competence_recipe: Recipe,
    pub params: GbtParams,
}

impl Default for UqConfig {
    fn default() -> Self {
        Self {
            recipes: Recipe::ALL.to_vec(),
            ratio: 5,
            train_fraction: 0.8,
            threshold: crate::uq::DEFAULT_SUSPICIOUS_THRESHOLD,
            competence_recipe: Recipe::Shap,
            params: GbtParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub enabled: bool,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            hidden: vec![1024, 512, 100],
            train: TrainConfig {
                max_epochs: 20,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub data: DataConfig,
    pub arch: AeArch,
    pub ae: TrainConfig,
    pub cluster: ClusterConfig,
    pub n_clusters: Option<usize>,
    pub alpha: f64,
    pub clf: GbtParams,
    pub finetune_rounds: usize,
    pub scenario: ScenarioConfig,
    pub uq: UqConfig,
    pub baseline: BaselineConfig,
}

impl Default for Config {
    fn default() -> Self {
        let s = Settings::default();
        Self {
            seed: 0,
            data: DataConfig::default(),
            arch: AeArch::default(),
            ae: s.ae,
            cluster: s.cluster,
            n_clusters: None,
            alpha: 1.0,
            clf: s.clf,
            finetune_rounds: s.finetune_rounds,
            scenario: ScenarioConfig::default(),
            uq: UqConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| OdxuError::Config(format!("[{section}] {key}: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| parse(section, key, v))
        .collect()
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(OdxuError::Config(format!("[{section}] {key}: expected true/false, got `{value}`"))),
    }
}

fn parse_source(value: &str) -> DataSource {
    match value.trim() {
        "synth" => DataSource::Synth,
        path => DataSource::File(PathBuf::from(path)),
    }
}

fn optional<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" | "auto" => Ok(None),
        v => parse(section, key, v).map(Some),
    }
}

fn set_train(cfg: &mut TrainConfig, section: &str, key: &str, value: &str) -> Result<bool> {
    match key {
        "learning_rate" => cfg.learning_rate = parse(section, key, value)?,
        "batch_size" => cfg.batch_size = parse(section, key, value)?,
        "epochs" => cfg.max_epochs = parse(section, key, value)?,
        "optimizer" => {
            cfg.optimizer = match value.trim() {
                "adam" => Optimizer::adam(),
                "sgd" => Optimizer::Sgd { momentum: 0.0 },
                v => {
                    return Err(OdxuError::Config(format!(
                        "[{section}] optimizer: expected adam or sgd, got `{v}`"
                    )))
                }
            }
        }
        "momentum" => match &mut cfg.optimizer {
            Optimizer::Sgd { momentum } => *momentum = parse(section, key, value)?,
            Optimizer::Adam { .. } => {
                return Err(OdxuError::Config(format!("[{section}] momentum requires optimizer = sgd")))
            }
        },
        _ => return Ok(false),
    }
    Ok(true)
}

fn set_gbt(p: &mut GbtParams, section: &str, key: &str, value: &str) -> Result<bool> {
    match key {
        "n_rounds" => p.n_rounds = parse(section, key, value)?,
        "max_depth" => p.max_depth = parse(section, key, value)?,
        "learning_rate" => p.learning_rate = parse(section, key, value)?,
        "reg_lambda" => p.reg_lambda = parse(section, key, value)?,
        "gamma" => p.gamma = parse(section, key, value)?,
        "min_child_weight" => p.min_child_weight = parse(section, key, value)?,
        "base_score" => p.base_score = parse(section, key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn write_train(out: &mut String, cfg: &TrainConfig) {
    let _ = writeln!(out, "learning_rate = {}", cfg.learning_rate);
    let _ = writeln!(out, "batch_size = {}", cfg.batch_size);
    let _ = writeln!(out, "epochs = {}", cfg.max_epochs);
    match cfg.optimizer {
        Optimizer::Adam { .. } => {
            let _ = writeln!(out, "optimizer = adam");
        }
        Optimizer::Sgd { momentum } => {
            let _ = writeln!(out, "optimizer = sgd");
            let _ = writeln!(out, "momentum = {momentum}");
        }
    }
}

fn write_gbt(out: &mut String, p: &GbtParams) {
    let _ = writeln!(out, "n_rounds = {}", p.n_rounds);
    let _ = writeln!(out, "max_depth = {}", p.max_depth);
    let _ = writeln!(out, "learning_rate = {}", p.learning_rate);
    let _ = writeln!(out, "reg_lambda = {}", p.reg_lambda);
    let _ = writeln!(out, "gamma = {}", p.gamma);
    let _ = writeln!(out, "min_child_weight = {}", p.min_child_weight);
    let _ = writeln!(out, "base_score = {}", p.base_score);
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), ToString::to_string)
}

fn source_str(s: &DataSource) -> String {
    match s {
        DataSource::Synth => "synth".into(),
        DataSource::File(p) => p.display().to_string(),
    }
}

impl Config {
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_ini_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| OdxuError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    pub fn apply_ini_str(&mut self, text: &str) -> Result<()> {
        let ini = Ini::load_from_str(text).map_err(|e| OdxuError::Config(e.to_string()))?;
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                self.set(section.unwrap_or("run"), key, value)?;
            }
        }
        Ok(())
    }

    /// Sets one value; `section.key=value` overrides from the command line
    /// go through here as well.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let handled = match section {
            "run" => match key {
                "seed" => {
                    self.seed = parse(section, key, value)?;
                    true
                }
                _ => false,
            },
            "data" => {
                let d = &mut self.data;
                match key {
                    "source" => d.source = parse_source(value),
                    "target" => d.target = parse_source(value),
                    "synth_classes" => d.synth_classes = parse(section, key, value)?,
                    "synth_per_class" => d.synth_per_class = parse(section, key, value)?,
                    "synth_overlap" => d.synth_overlap = parse(section, key, value)?,
                    "source_seed" => d.source_seed = parse(section, key, value)?,
                    "target_seed" => d.target_seed = parse(section, key, value)?,
                    "benign_class" => d.benign_class = value.trim().to_string(),
                    "benign_downsample" => d.benign_downsample = parse(section, key, value)?,
                    "upsample" => {
                        d.upsample.clear();
                        for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                            let (cls, f) = item.rsplit_once(':').ok_or_else(|| {
                                OdxuError::Config(format!("[data] upsample: expected CLASS:FACTOR, got `{item}`"))
                            })?;
                            d.upsample.insert(cls.trim().to_string(), parse(section, key, f)?);
                        }
                    }
                    "holdout" => d.holdout = optional::<String>(section, key, value)?,
                    "synth_unknowns" => d.synth_unknowns = parse(section, key, value)?,
                    _ => return Err(unknown(section, key)),
                }
                true
            }
            "ae" => match key {
                "hidden" => {
                    self.arch.hidden = parse_list(section, key, value)?;
                    true
                }
                "latent" => {
                    self.arch.latent = parse(section, key, value)?;
                    true
                }
                _ => set_train(&mut self.ae, section, key, value)?,
            },
            "cluster" => match key {
                "k" => {
                    self.n_clusters = optional(section, key, value)?;
                    true
                }
                "alpha" => {
                    self.alpha = parse(section, key, value)?;
                    true
                }
                "update_interval" => {
                    self.cluster.update_interval = parse(section, key, value)?;
                    true
                }
                "freeze_encoder" => {
                    self.cluster.freeze_encoder = parse_bool(section, key, value)?;
                    true
                }
                _ => set_train(&mut self.cluster.train, section, key, value)?,
            },
            "clf" => match key {
                "finetune_rounds" => {
                    self.finetune_rounds = parse(section, key, value)?;
                    true
                }
                _ => set_gbt(&mut self.clf, section, key, value)?,
            },
            "scenario" => {
                let s = &mut self.scenario;
                match key {
                    "case" => s.case = parse(section, key, value)?,
                    "portion" => s.portion = parse(section, key, value)?,
                    "eta" => s.eta = optional(section, key, value)?,
                    "delta_ae" => s.delta_ae = optional(section, key, value)?,
                    "delta_cluster" => s.delta_cluster = optional(section, key, value)?,
                    _ => return Err(unknown(section, key)),
                }
                true
            }
            "uq" => {
                let u = &mut self.uq;
                match key {
                    "recipes" => u.recipes = parse_list(section, key, value)?,
                    "ratio" => u.ratio = parse(section, key, value)?,
                    "train_fraction" => u.train_fraction = parse(section, key, value)?,
                    "threshold" => u.threshold = parse(section, key, value)?,
                    "competence_recipe" => u.competence_recipe = parse(section, key, value)?,
                    _ => return if set_gbt(&mut u.params, section, key, value)? { Ok(()) } else { Err(unknown(section, key)) },
                }
                true
            }
            "baseline" => match key {
                "enabled" => {
                    self.baseline.enabled = parse_bool(section, key, value)?;
                    true
                }
                "hidden" => {
                    self.baseline.hidden = parse_list(section, key, value)?;
                    true
                }
                _ => set_train(&mut self.baseline.train, section, key, value)?,
            },
            _ => return Err(OdxuError::Config(format!("unknown section [{section}]"))),
        };
        if handled {
            Ok(())
        } else {
            Err(unknown(section, key))
        }
    }

    /// Parses `section.key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (lhs, value) = assignment
            .split_once('=')
            .ok_or_else(|| OdxuError::Config(format!("expected section.key=value, got `{assignment}`")))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| OdxuError::Config(format!("expected section.key=value, got `{assignment}`")))?;
        self.set(section, key, value)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: OdxuError| OdxuError::Config(e.to_string());
        self.ae.validate().map_err(wrap)?;
        self.cluster.train.validate().map_err(wrap)?;
        self.clf.validate().map_err(wrap)?;
        self.uq.params.validate().map_err(wrap)?;
        self.baseline.train.validate().map_err(wrap)?;
        self.scenario_spec()?;
        if self.arch.latent == 0 || self.arch.hidden.contains(&0) {
            return Err(OdxuError::Config("[ae] layer widths must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(OdxuError::Config("[cluster] alpha must be > 0".into()));
        }
        if self.cluster.update_interval == 0 {
            return Err(OdxuError::Config("[cluster] update_interval must be >= 1".into()));
        }
        if self.n_clusters.is_some_and(|k| k < 2) {
            return Err(OdxuError::Config("[cluster] k must be >= 2".into()));
        }
        if self.uq.recipes.is_empty() {
            return Err(OdxuError::Config("[uq] recipes must not be empty".into()));
        }
        if self.uq.ratio == 0 {
            return Err(OdxuError::Config("[uq] ratio must be >= 1".into()));
        }
        if !(self.uq.train_fraction > 0.0 && self.uq.train_fraction < 1.0) {
            return Err(OdxuError::Config("[uq] train_fraction must lie in (0, 1)".into()));
        }
        let d = &self.data;
        if d.synth_classes < 2 || d.synth_per_class == 0 {
            return Err(OdxuError::Config("[data] synthetic data needs >= 2 classes and >= 1 sample per class".into()));
        }
        if !(0.0..=1.0).contains(&d.synth_overlap) {
            return Err(OdxuError::Config("[data] synth_overlap must lie in [0, 1]".into()));
        }
        self.split_plan().validate().map_err(wrap)?;
        Ok(())
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let stop = self.scenario.stop()?;
        ScenarioSpec::from_case(self.scenario.case, self.scenario.portion, stop, self.seed)
    }

    pub fn settings(&self) -> Settings {
        Settings {
            ae: self.ae.clone(),
            cluster: self.cluster.clone(),
            clf: self.clf.clone(),
            finetune_rounds: self.finetune_rounds,
            n_clusters: self.n_clusters,
            alpha: self.alpha,
        }
    }

    pub fn split_plan(&self) -> crate::dataio::SplitPlan {
        crate::dataio::SplitPlan {
            seed: self.seed,
            benign_class: self.data.benign_class.clone(),
            benign_downsample: self.data.benign_downsample,
            upsample_classes: self.data.upsample.clone(),
            portion: self.scenario.portion,
            holdout_class: self.data.holdout.clone(),
        }
    }

    /// Canonical text form with every key; parsing it gives back `self`.
    pub fn to_ini_string(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "[run]\nseed = {}\n", self.seed);
        let d = &self.data;
        let _ = writeln!(o, "[data]");
        let _ = writeln!(o, "source = {}", source_str(&d.source));
        let _ = writeln!(o, "target = {}", source_str(&d.target));
        let _ = writeln!(o, "synth_classes = {}", d.synth_classes);
        let _ = writeln!(o, "synth_per_class = {}", d.synth_per_class);
        let _ = writeln!(o, "synth_overlap = {}", d.synth_overlap);
        let _ = writeln!(o, "source_seed = {}", d.source_seed);
        let _ = writeln!(o, "target_seed = {}", d.target_seed);
        let _ = writeln!(o, "benign_class = {}", d.benign_class);
        let _ = writeln!(o, "benign_downsample = {}", d.benign_downsample);
        let ups: Vec<String> = d.upsample.iter().map(|(c, f)| format!("{c}:{f}")).collect();
        let _ = writeln!(o, "upsample = {}", ups.join(","));
        let _ = writeln!(o, "holdout = {}", opt(&d.holdout));
        let _ = writeln!(o, "synth_unknowns = {}\n", d.synth_unknowns);
        let _ = writeln!(o, "[ae]\nhidden = {}\nlatent = {}", join(&self.arch.hidden), self.arch.latent);
        write_train(&mut o, &self.ae);
        let _ = writeln!(o, "\n[cluster]\nk = {}\nalpha = {}", opt(&self.n_clusters), self.alpha);
        let _ = writeln!(o, "update_interval = {}", self.cluster.update_interval);
        let _ = writeln!(o, "freeze_encoder = {}", self.cluster.freeze_encoder);
        write_train(&mut o, &self.cluster.train);
        let _ = writeln!(o, "\n[clf]\nfinetune_rounds = {}", self.finetune_rounds);
        write_gbt(&mut o, &self.clf);
        let s = &self.scenario;
        let _ = writeln!(o, "\n[scenario]\ncase = {}\nportion = {}", s.case, s.portion);
        let _ = writeln!(o, "eta = {}\ndelta_ae = {}\ndelta_cluster = {}", opt(&s.eta), opt(&s.delta_ae), opt(&s.delta_cluster));
        let u = &self.uq;
        let _ = writeln!(o, "\n[uq]\nrecipes = {}\nratio = {}", join(&u.recipes), u.ratio);
        let _ = writeln!(o, "train_fraction = {}\nthreshold = {}", u.train_fraction, u.threshold);
        let _ = writeln!(o, "competence_recipe = {}", u.competence_recipe);
        write_gbt(&mut o, &u.params);
        let b = &self.baseline;
        let _ = writeln!(o, "\n[baseline]\nenabled = {}\nhidden = {}", b.enabled, join(&b.hidden));
        write_train(&mut o, &b.train);
        o
    }
}

fn unknown(section: &str, key: &str) -> OdxuError {
    OdxuError::Config(format!("unknown key `{key}` in [{section}]"))
}

/// Reads the Table-3 style `delta_ae:delta_cluster` pairs.
pub fn parse_delta_pairs(value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, c) = pair
                .split_once(':')
                .ok_or_else(|| OdxuError::Config(format!("expected DELTA_AE:DELTA_CLUSTER, got `{pair}`")))?;
            Ok((parse("grid", "deltas", a)?, parse("grid", "deltas", c)?))
        })
        .collect()
}

/// Case number check shared by commands taking `--case`.
pub fn check_case(case: usize) -> Result<()> {
    transfer::case(case).map(|_| ())
}
