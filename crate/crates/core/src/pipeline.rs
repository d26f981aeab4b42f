//! End-to-end run: data preparation, source pretraining, the transfer
//! scenario on the target, metamodel training, evaluation and reporting.
//! Every run leaves a manifest next to its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Bundle, Classifier};
use crate::config::{Config, DataSource};
use crate::dataio::{self, Dataset, LabelMap};
use crate::dec;
use crate::error::{OdxuError, Result};
use crate::eval::{self, ModelMetrics, Report, ScenarioRow, UqRow};
use crate::gbt::{self, TreeEnsemble};
use crate::nn::{self, Autoencoder, TrainConfig};
use crate::transfer::{self, Downstream, Phase, PhaseRecord};
use crate::uq::{self, MetaSet, MetamodelBundle, Recipe};

pub const MANIFEST_SCHEMA: &str = "odxu-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub ok: bool,
    pub seconds: f64,
    pub wall_clock: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

/// Everything needed to reproduce a run, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    /// Canonical configuration text; re-running it reproduces the outputs.
    pub config: String,
    pub seeds: BTreeMap<String, u64>,
    /// Input file → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &Config) -> Self {
        let seeds = [
            ("run".to_string(), cfg.seed),
            ("source_data".to_string(), cfg.data.source_seed),
            ("target_data".to_string(), cfg.data.target_seed),
        ]
        .into_iter()
        .collect();
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            command: command.to_string(),
            config: cfg.to_ini_string(),
            seeds,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            stages: Vec::new(),
            error: None,
            details: BTreeMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(OdxuError::Config(format!("unsupported manifest schema `{}`", m.schema)));
        }
        Ok(m)
    }

    /// Parses the recorded configuration.
    pub fn config(&self) -> Result<Config> {
        Config::from_ini_str(&self.config)
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), checkpoint::file_sha256(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.outputs.insert(name.to_string(), checkpoint::file_sha256(dir.join(name))?);
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        if let Ok(v) = serde_json::to_value(value) {
            self.details.insert(key.to_string(), v);
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    /// Runs `f` as the named stage, timing it. On failure the partial
    /// manifest is written to `dir` and the error is tagged with the stage.
    pub fn stage<T>(&mut self, dir: &Path, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        log::info!("stage {name}");
        let started = Instant::now();
        let result = f(self);
        let elapsed = started.elapsed();
        self.stages.push(StageRecord {
            name: name.to_string(),
            ok: result.is_ok(),
            seconds: elapsed.as_secs_f64(),
            wall_clock: transfer::format_hms(elapsed),
        });
        result.map_err(|e| {
            self.error = Some(StageError {
                stage: name.to_string(),
                message: e.to_string(),
            });
            if let Err(w) = self.write(dir) {
                log::error!("could not write partial manifest: {w}");
            }
            OdxuError::Stage {
                stage: name.to_string(),
                source: Box::new(e),
            }
        })
    }
}

/// Source and target data after rebalancing and hold-out removal.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub source: Dataset,
    pub target: Dataset,
    /// Records of the held-out class (empty without a hold-out).
    pub unknown: Dataset,
}

fn load_source(src: &DataSource, cfg: &Config, seed: u64, manifest: &mut Manifest) -> Result<Dataset> {
    match src {
        DataSource::Synth => dataio::synth_generate(cfg.data.synth_classes, cfg.data.synth_per_class, cfg.data.synth_overlap, seed),
        DataSource::File(p) => {
            manifest.record_input(p)?;
            dataio::load_any(p)
        }
    }
}

fn drop_class(ds: Dataset, class: &str) -> Result<(Dataset, Dataset)> {
    if ds.count(class) == 0 {
        return Ok((ds, Dataset::default()));
    }
    dataio::holdout_unknown(&ds, class)
}

pub fn prepare_data(cfg: &Config, manifest: &mut Manifest) -> Result<Prepared> {
    let source = load_source(&cfg.data.source, cfg, cfg.data.source_seed, manifest)?;
    let target = load_source(&cfg.data.target, cfg, cfg.data.target_seed, manifest)?;
    let mut plan = cfg.split_plan();
    plan.portion = 1.0;
    let target = if plan.benign_downsample > 0.0 || !plan.upsample_classes.is_empty() {
        dataio::rebalance(&target, &plan)?
    } else {
        target
    };
    let (source, target, unknown) = match &cfg.data.holdout {
        Some(class) => {
            if target.count(class) == 0 {
                return Err(OdxuError::UnknownClass(class.clone()));
            }
            let (source, _) = drop_class(source, class)?;
            let (target, unknown) = drop_class(target, class)?;
            (source, target, unknown)
        }
        None => (source, target, Dataset::default()),
    };
    let unknown = if cfg.data.synth_unknowns > 0 {
        let extra = dataio::synth_out_of_support(cfg.data.synth_classes, cfg.data.synth_unknowns, cfg.data.target_seed)?;
        Dataset::concat([&unknown, &extra])
    } else {
        unknown
    };
    Ok(Prepared { source, target, unknown })
}

fn ae_config(cfg: &Config, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        stop: cfg.scenario_spec().ok().and_then(|s| s.stop),
        ..cfg.ae.clone()
    }
}

/// Autoencoder pretraining (75/25 train/validation split of `data`).
pub fn pretrain_ae(cfg: &Config, data: &Dataset) -> Result<(Autoencoder, PhaseRecord)> {
    let mut parts = dataio::split(data, &[0.75, 0.25], true, cfg.seed)?;
    let val = parts.pop().expect("two parts");
    let train = parts.pop().expect("two parts");
    let ae = Autoencoder::new(&cfg.arch, cfg.seed)?;
    let (ae, hist) = nn::ae_pretrain_validated(ae, &train, Some(&val), &ae_config(cfg, cfg.seed))?;
    Ok((ae, phase_record(Phase::Ae, "Train", &hist)))
}

fn phase_record(phase: Phase, action: &str, h: &nn::History) -> PhaseRecord {
    PhaseRecord {
        phase,
        action: action.to_string(),
        epochs: h.epochs(),
        losses: h.losses.clone(),
        stopped_early: h.stopped_early,
    }
}

/// Fresh clustering on the encoder's latents of `data`.
pub fn train_cluster(cfg: &Config, ae: Autoencoder, data: &Dataset) -> Result<(Autoencoder, dec::ClusteringHead, PhaseRecord)> {
    let z = nn::encode(&ae, data);
    let k = cfg.n_clusters.unwrap_or(data.class_table().len());
    let head = dec::init_head(z.view(), k, cfg.seed)?;
    let head = dec::ClusteringHead::new(head.centroids().clone(), cfg.alpha)?;
    let mut ccfg = cfg.cluster.clone();
    ccfg.train.seed = cfg.seed;
    ccfg.train.stop = cfg.scenario_spec().ok().and_then(|s| s.stop);
    let (ae, head, hist) = dec::dec_train(ae, head, data, &ccfg)?;
    Ok((ae, head, phase_record(Phase::Cluster, "Train", &hist)))
}

/// Fresh classifier on the latents of `data`.
pub fn train_classifier(cfg: &Config, ae: &Autoencoder, data: &Dataset) -> Result<Classifier> {
    let labels = LabelMap::from_dataset(data);
    let x = nn::encode(ae, data);
    let y = labels.encode(data)?;
    let model = gbt::fit(x.view(), &y, labels.len(), &cfg.clf)?;
    Ok(Classifier { model, labels })
}

/// Source-side training of all three components.
pub fn pretrain_source(cfg: &Config, source: &Dataset) -> Result<(Bundle, Vec<PhaseRecord>)> {
    let (ae, ae_rec) = pretrain_ae(cfg, source)?;
    let (ae, head, cl_rec) = train_cluster(cfg, ae, source)?;
    let clf = train_classifier(cfg, &ae, source)?;
    let bundle = Bundle {
        ae: Some(ae),
        cluster: Some(head),
        clf: Some(clf),
        ..Bundle::default()
    };
    Ok((bundle, vec![ae_rec, cl_rec]))
}

/// Trained metamodels with the data they were fitted and tested on.
#[derive(Debug, Clone)]
pub struct UqArtifacts {
    pub metas: BTreeMap<Recipe, MetamodelBundle>,
    pub meta_train: MetaSet,
    pub meta_test: MetaSet,
}

pub fn train_uq(cfg: &Config, base: &TreeEnsemble, x: &Array2<f64>, y: &[usize]) -> Result<UqArtifacts> {
    let set = uq::build_meta_set(base, x.view(), y, cfg.uq.ratio, cfg.seed)?;
    let (meta_train, meta_test) = set.split(cfg.uq.train_fraction, cfg.seed)?;
    log::info!(
        "metamodel set: {} rows ({} misclassified), {} train / {} test",
        set.len(),
        set.n_misclassified(),
        meta_train.len(),
        meta_test.len()
    );
    let mut metas = BTreeMap::new();
    for &recipe in &cfg.uq.recipes {
        let mut m = uq::meta_fit(recipe, base, &meta_train, &cfg.uq.params)?;
        m.threshold = cfg.uq.threshold;
        metas.insert(recipe, m);
    }
    Ok(UqArtifacts {
        metas,
        meta_train,
        meta_test,
    })
}

/// Display names used in reports.
pub fn method_name(recipe: Option<Recipe>) -> String {
    match recipe {
        None => "Confidence".to_string(),
        Some(Recipe::Prob) => "MetaUQ_prob".to_string(),
        Some(Recipe::Shap) => "MetaUQ_SHAP".to_string(),
        Some(Recipe::Ig) => "MetaUQ_IG".to_string(),
    }
}

/// Uncertainty-oriented scores (higher = more likely wrong) of every UQ
/// method on the rows of `x`.
pub fn uq_scores(base: &TreeEnsemble, metas: &BTreeMap<Recipe, MetamodelBundle>, x: &Array2<f64>) -> Result<Vec<(String, Vec<f64>)>> {
    let probs = base.predict_proba_matrix(x.view())?;
    let mut conf = Vec::with_capacity(x.nrows());
    let mut ent = Vec::with_capacity(x.nrows());
    for row in probs.rows() {
        let p = row.to_vec();
        conf.push(uq::confidence(&p)?.as_uncertainty());
        ent.push(uq::entropy(&p)?.as_uncertainty());
    }
    let mut out = vec![(method_name(None), conf), ("Entropy".to_string(), ent)];
    for (&recipe, m) in metas {
        out.push((method_name(Some(recipe)), uq::meta_score(m, base, x.view())?));
    }
    Ok(out)
}

fn ranking_metrics(scores: &[f64], labels: &[bool]) -> (Option<f64>, Option<f64>) {
    match (eval::auroc(scores, labels), eval::tp_at_tn(scores, labels, eval::TN_TARGET)) {
        (Ok(a), Ok(t)) => (Some(a), Some(t)),
        (Err(e), _) | (_, Err(e)) => {
            log::warn!("misclassification metrics unavailable: {e}");
            (None, None)
        }
    }
}

/// UQ table rows: misclassification detection on the metamodel test set and,
/// when unknowns exist, open-set detection on an equal-count mix.
pub fn evaluate_uq(
    base: &TreeEnsemble,
    uqa: &UqArtifacts,
    unknown_x: Option<&Array2<f64>>,
    seed: u64,
) -> Result<Vec<UqRow>> {
    let test = &uqa.meta_test;
    let labels: Vec<bool> = test.labels.iter().map(|&y| y == 1).collect();
    let scores = uq_scores(base, &uqa.metas, &test.features)?;
    let osr_scores = match unknown_x.filter(|u| u.nrows() > 0) {
        Some(u) => {
            let (ki, ui) = eval::osr_pairing(test.len(), u.nrows(), seed)?;
            let known = uq_scores(base, &uqa.metas, &test.features.select(Axis(0), &ki))?;
            let unknown = uq_scores(base, &uqa.metas, &u.select(Axis(0), &ui))?;
            Some((known, unknown, u.nrows()))
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(scores.len());
    for (i, (method, s)) in scores.iter().enumerate() {
        let (auroc, tp) = ranking_metrics(s, &labels);
        let osr = match &osr_scores {
            Some((k, u, _)) => Some(eval::osr_from_scores(&k[i].1, &u[i].1)?),
            None => None,
        };
        rows.push(UqRow {
            method: method.clone(),
            misclassification_auroc: auroc,
            misclassification_tp_at_tn: tp,
            osr,
        });
    }
    Ok(rows)
}

/// Attack-recognition metrics on the classifier test half. Competence uses
/// the configured metamodel on the test rows it was not trained on.
pub fn evaluate_classifier(
    cfg: &Config,
    clf: &Classifier,
    data: &Downstream,
    uqa: Option<&UqArtifacts>,
) -> Result<eval::ClassificationMetrics> {
    let benign = clf
        .labels
        .index_of(&cfg.data.benign_class)
        .ok_or_else(|| OdxuError::UnknownClass(cfg.data.benign_class.clone()))?;
    let k = clf.labels.len();
    let preds = clf.model.predict_classes(data.test_x.view())?;
    let mut metrics = eval::classification_metrics(&preds, &data.test_y, k, benign, None)?;
    if let Some(meta) = uqa.and_then(|u| u.metas.get(&cfg.uq.competence_recipe).map(|m| (u, m))) {
        let (uqa, meta) = meta;
        let trained: std::collections::BTreeSet<usize> = uqa.meta_train.source_rows.iter().copied().collect();
        let rows: Vec<usize> = (0..data.test_y.len()).filter(|i| !trained.contains(i)).collect();
        let z = uq::meta_score(meta, &clf.model, data.test_x.select(Axis(0), &rows).view())?;
        let p: Vec<usize> = rows.iter().map(|&i| preds[i]).collect();
        let y: Vec<usize> = rows.iter().map(|&i| data.test_y[i]).collect();
        let held = eval::classification_metrics(&p, &y, k, benign, Some((&z, meta.threshold)))?;
        metrics.competence = held.competence;
        metrics.competence_threshold = held.competence_threshold;
        metrics.competence_coverage = held.competence_coverage;
    }
    Ok(metrics)
}

/// Raw-byte FcNN baseline trained on the classifier training half.
pub fn run_baseline(cfg: &Config, splits: &transfer::TargetSplits, labels: &LabelMap) -> Result<(nn::DenseNet, eval::ClassificationMetrics)> {
    let x = splits.clf_train.feature_matrix();
    let y = labels.encode(&splits.clf_train)?;
    let net = nn::fcnn_new(x.ncols(), &cfg.baseline.hidden, labels.len(), cfg.seed)?;
    let tcfg = TrainConfig {
        seed: cfg.seed,
        stop: None,
        ..cfg.baseline.train.clone()
    };
    let (net, _) = nn::fcnn_train(net, &x, &y, &tcfg)?;
    let tx = splits.clf_test.feature_matrix();
    let ty = labels.encode(&splits.clf_test)?;
    let preds = nn::fcnn_classify(&net, tx.view(), &ty)?;
    let benign = labels
        .index_of(&cfg.data.benign_class)
        .ok_or_else(|| OdxuError::UnknownClass(cfg.data.benign_class.clone()))?;
    let metrics = eval::classification_metrics(&preds, &ty, labels.len(), benign, None)?;
    Ok((net, metrics))
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub manifest: Manifest,
    pub bundle: Bundle,
    pub dir: PathBuf,
}

pub const SOURCE_BUNDLE: &str = "source.odxm";
pub const MODEL_BUNDLE: &str = "model.odxm";

/// Runs the whole pipeline into `out`: `source.odxm`, `model.odxm`,
/// `report.json`, `report.txt` and `manifest.json`.
pub fn run_pipeline(cfg: &Config, out: &Path) -> Result<PipelineOutput> {
    cfg.validate()?;
    let spec = cfg.scenario_spec()?;
    fs::create_dir_all(out)?;
    let mut m = Manifest::new("pipeline", cfg);

    let data = m.stage(out, "ingest", |m| {
        let d = prepare_data(cfg, m)?;
        m.detail(
            "data",
            serde_json::json!({
                "source_records": d.source.len(),
                "target_records": d.target.len(),
                "unknown_records": d.unknown.len(),
            }),
        );
        Ok(d)
    })?;
    let source = m.stage(out, "pretrain", |m| {
        let (b, phases) = pretrain_source(cfg, &data.source)?;
        m.detail("source_phases", &phases);
        b.save(out.join(SOURCE_BUNDLE))?;
        m.record_output(out, SOURCE_BUNDLE)?;
        Ok(b)
    })?;
    let outcome = m.stage(out, "transfer", |m| {
        let o = transfer::run_scenario(&spec, &cfg.settings(), &source, &data.target)?;
        m.detail("scenario_phases", &o.phases);
        Ok(o)
    })?;
    let clf = outcome.bundle.require_clf()?.clone();
    let baseline = if cfg.baseline.enabled {
        Some(m.stage(out, "baseline", |_| {
            let splits = transfer::split_target(&data.target, spec.portion, spec.seed)?;
            run_baseline(cfg, &splits, &clf.labels)
        })?)
    } else {
        None
    };
    let uqa = m.stage(out, "uq-train", |_| train_uq(cfg, &clf.model, &outcome.data.test_x, &outcome.data.test_y))?;
    let report = m.stage(out, "evaluate", |_| {
        let ae = outcome.bundle.require_ae()?;
        let unknown_x = (!data.unknown.is_empty()).then(|| nn::encode(ae, &data.unknown));
        let odxu = evaluate_classifier(cfg, &clf, &outcome.data, Some(&uqa))?;
        let mut classification = Vec::new();
        if let Some((_, fc)) = &baseline {
            classification.push(ModelMetrics {
                model: "FcNN".into(),
                metrics: fc.clone(),
            });
        }
        classification.push(ModelMetrics {
            model: "ODXU".into(),
            metrics: odxu,
        });
        Ok(Report {
            scenarios: vec![ScenarioRow {
                case: cfg.scenario.case,
                ae: spec.ae.to_string(),
                cluster: spec.cluster.to_string(),
                clf: spec.clf.to_string(),
                portion: spec.portion,
                accuracy: outcome.accuracy,
            }],
            classification,
            uq: evaluate_uq(&clf.model, &uqa, unknown_x.as_ref(), cfg.seed)?,
            definitions: eval::metric_definitions(),
            ..Report::default()
        })
    })?;
    let mut bundle = outcome.bundle.clone();
    bundle.metas = uqa.metas.clone();
    bundle.fcnn = baseline.map(|(net, _)| net);
    m.stage(out, "report", |m| {
        bundle.save(out.join(MODEL_BUNDLE))?;
        m.record_output(out, MODEL_BUNDLE)?;
        eval::emit_report(&report, out)?;
        m.record_output(out, "report.json")?;
        m.record_output(out, "report.txt")?;
        Ok(())
    })?;
    m.write(out)?;
    Ok(PipelineOutput {
        report,
        manifest: m,
        bundle,
        dir: out.to_path_buf(),
    })
}

/// Re-runs the configuration recorded in a manifest.
pub fn rerun_manifest(manifest: impl AsRef<Path>, out: &Path) -> Result<PipelineOutput> {
    let cfg = Manifest::load(manifest)?.config()?;
    run_pipeline(&cfg, out)
}
