//! Transfer-learning scenarios: which pipeline components are reused as is,
//! fine-tuned, or trained from scratch on a target dataset, plus the
//! loss-delta early stopping rule shared by the training loops.

use std::fmt;
use std::time::{Duration, Instant};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Bundle, Classifier};
use crate::dataio::{self, Dataset, LabelMap};
use crate::dec::{self, ClusterConfig};
use crate::error::{invalid, OdxuError, Result};
use crate::gbt::{self, GbtParams};
use crate::nn::{self, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Ae,
    Cluster,
    Classifier,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Ae => "ae",
            Phase::Cluster => "cluster",
            Phase::Classifier => "classifier",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    /// Number of consecutive small loss changes that halts training.
    pub eta: usize,
    pub delta_ae: f64,
    pub delta_cluster: f64,
}

impl EarlyStop {
    pub fn validate(&self) -> Result<()> {
        if self.eta == 0 {
            return invalid("early stopping eta must be >= 1");
        }
        for d in [self.delta_ae, self.delta_cluster] {
            if !(d > 0.0 && d.is_finite()) {
                return invalid(format!("early stopping delta {d} must be > 0"));
            }
        }
        Ok(())
    }

    /// Threshold for a phase; the classifier phase has none.
    pub fn delta(&self, phase: Phase) -> Option<f64> {
        match phase {
            Phase::Ae => Some(self.delta_ae),
            Phase::Cluster => Some(self.delta_cluster),
            Phase::Classifier => None,
        }
    }
}

/// True when the last `eta` epoch-to-epoch loss changes are all below the
/// phase threshold. With `history[0]` being epoch 1, a flat loss first halts
/// after epoch `eta + 1`.
pub fn early_stop_check(history: &[f64], stop: &EarlyStop, phase: Phase) -> bool {
    let Some(delta) = stop.delta(phase) else {
        return false;
    };
    if stop.eta == 0 || history.len() < stop.eta + 1 {
        return false;
    }
    history[history.len() - stop.eta - 1..]
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() < delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AeAction {
    AsIs,
    FineTune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    FineTune,
    Train,
}

impl fmt::Display for AeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AeAction::AsIs => "As is",
            AeAction::FineTune => "FT",
        })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::FineTune => "FT",
            Action::Train => "Train",
        })
    }
}

pub type Case = (AeAction, Action, Action);

/// The six valid (autoencoder, clustering, classifier) combinations, in case
/// order 1 to 6.
pub fn enumerate_cases() -> [Case; 6] {
    use Action::{FineTune as Ft, Train};
    use AeAction::{AsIs, FineTune as AeFt};
    [
        (AeFt, Train, Train),
        (AsIs, Ft, Train),
        (AsIs, Train, Train),
        (AeFt, Train, Ft),
        (AsIs, Ft, Ft),
        (AsIs, Train, Ft),
    ]
}

pub fn case(number: usize) -> Result<Case> {
    enumerate_cases()
        .get(number.wrapping_sub(1))
        .copied()
        .ok_or_else(|| OdxuError::InvalidScenario(format!("case {number} outside 1..=6")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub ae: AeAction,
    pub cluster: Action,
    pub clf: Action,
    /// Fraction of the DEC training half used for autoencoder and clustering.
    pub portion: f64,
    pub stop: Option<EarlyStop>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(ae: AeAction, cluster: Action, clf: Action, portion: f64, stop: Option<EarlyStop>, seed: u64) -> Result<Self> {
        let spec = Self {
            ae,
            cluster,
            clf,
            portion,
            stop,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_case(number: usize, portion: f64, stop: Option<EarlyStop>, seed: u64) -> Result<Self> {
        let (ae, cluster, clf) = case(number)?;
        Self::new(ae, cluster, clf, portion, stop, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ae == AeAction::FineTune && self.cluster == Action::FineTune {
            // A fine-tuned encoder moves the latent space under the old centroids.
            return Err(OdxuError::InvalidScenario(format!(
                "FT-FT-{} is invalid: fine-tuning the autoencoder requires training the clustering",
                self.clf
            )));
        }
        if !(self.portion > 0.0 && self.portion <= 1.0) {
            return Err(OdxuError::InvalidScenario(format!(
                "portion {} outside (0, 1]",
                self.portion
            )));
        }
        if let Some(stop) = &self.stop {
            stop.validate()?;
        }
        Ok(())
    }

    pub fn case_number(&self) -> Option<usize> {
        enumerate_cases()
            .iter()
            .position(|&c| c == (self.ae, self.cluster, self.clf))
            .map(|i| i + 1)
    }
}

/// Training hyperparameters for the phases a scenario may run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub ae: TrainConfig,
    pub cluster: ClusterConfig,
    pub clf: GbtParams,
    /// Boosting rounds appended when the classifier is fine-tuned.
    pub finetune_rounds: usize,
    /// Centroid count for freshly trained clustering; defaults to the number
    /// of target classes.
    pub n_clusters: Option<usize>,
    /// Student-t degrees of freedom for freshly trained clustering.
    pub alpha: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            ae: TrainConfig::default(),
            cluster: ClusterConfig::default(),
            clf: GbtParams::default(),
            finetune_rounds: 100,
            n_clusters: None,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub action: String,
    pub epochs: usize,
    pub losses: Vec<f64>,
    pub stopped_early: bool,
}

/// Latent features and encoded labels for the classifier halves.
#[derive(Debug, Clone)]
pub struct Downstream {
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub spec: ScenarioSpec,
    pub bundle: Bundle,
    pub phases: Vec<PhaseRecord>,
    /// Multiclass accuracy on the classifier test half.
    pub accuracy: f64,
    pub elapsed: Duration,
    pub data: Downstream,
}

/// The four target partitions a scenario works on.
#[derive(Debug, Clone)]
pub struct TargetSplits {
    pub dec_train: Dataset,
    pub dec_val: Dataset,
    pub clf_train: Dataset,
    pub clf_test: Dataset,
}

/// Halves the target into DEC and classifier parts (stratified), keeps
/// `portion` of the DEC half split 75/25 into train/validation, and halves
/// the classifier part into train/test.
pub fn split_target(target: &Dataset, portion: f64, seed: u64) -> Result<TargetSplits> {
    let mut halves = dataio::split(target, &[0.5, 0.5], true, seed)?;
    let clf_part = halves.pop().expect("two parts");
    let dec_part = halves.pop().expect("two parts");
    let dec_portion = dataio::take_portion(&dec_part, portion, seed.wrapping_add(1))?;
    let mut dec = dataio::split(&dec_portion, &[0.75, 0.25], true, seed.wrapping_add(2))?;
    let mut clf = dataio::split(&clf_part, &[0.5, 0.5], true, seed.wrapping_add(3))?;
    Ok(TargetSplits {
        dec_val: dec.pop().expect("two parts"),
        dec_train: dec.pop().expect("two parts"),
        clf_test: clf.pop().expect("two parts"),
        clf_train: clf.pop().expect("two parts"),
    })
}

fn record(phase: Phase, action: impl fmt::Display, history: Option<&nn::History>) -> PhaseRecord {
    PhaseRecord {
        phase,
        action: action.to_string(),
        epochs: history.map_or(0, |h| h.epochs()),
        losses: history.map_or_else(Vec::new, |h| h.losses.clone()),
        stopped_early: history.is_some_and(|h| h.stopped_early),
    }
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Runs autoencoder, clustering and classifier actions in that order on the
/// target data, starting from the sections of `source` each action needs.
pub fn run_scenario(spec: &ScenarioSpec, settings: &Settings, source: &Bundle, target: &Dataset) -> Result<ScenarioOutcome> {
    spec.validate()?;
    let ae_src = source.require_ae()?;
    let cluster_src = match spec.cluster {
        Action::FineTune => Some(source.require_cluster()?),
        Action::Train => None,
    };
    let clf_src = match spec.clf {
        Action::FineTune => Some(source.require_clf()?),
        Action::Train => None,
    };
    let started = Instant::now();
    let splits = split_target(target, spec.portion, spec.seed)?;
    let mut phases = Vec::with_capacity(3);

    let ae = match spec.ae {
        AeAction::AsIs => {
            phases.push(record(Phase::Ae, spec.ae, None));
            ae_src.clone()
        }
        AeAction::FineTune => {
            let cfg = TrainConfig {
                seed: spec.seed,
                stop: spec.stop,
                ..settings.ae.clone()
            };
            let (ae, hist) = nn::ae_pretrain_validated(ae_src.clone(), &splits.dec_train, Some(&splits.dec_val), &cfg)?;
            phases.push(record(Phase::Ae, spec.ae, Some(&hist)));
            ae
        }
    };

    let mut ccfg = settings.cluster.clone();
    ccfg.train.seed = spec.seed;
    ccfg.train.stop = spec.stop;
    // An as-is encoder must come out of the run untouched.
    ccfg.freeze_encoder |= spec.ae == AeAction::AsIs;
    let head = match cluster_src {
        Some(h) => {
            if h.dim() != ae.latent_dim() {
                return Err(OdxuError::DimensionMismatch {
                    expected: ae.latent_dim(),
                    got: h.dim(),
                });
            }
            h.clone()
        }
        None => {
            let z = nn::encode(&ae, &splits.dec_train);
            let k = settings.n_clusters.unwrap_or(target.class_table().len());
            let head = dec::init_head(z.view(), k, spec.seed)?;
            dec::ClusteringHead::new(head.centroids().clone(), settings.alpha)?
        }
    };
    let (ae, head, hist) = dec::dec_train(ae, head, &splits.dec_train, &ccfg)?;
    phases.push(record(Phase::Cluster, spec.cluster, Some(&hist)));

    let labels = match clf_src {
        Some(c) => c.labels.clone(),
        None => LabelMap::from_dataset(target),
    };
    let data = Downstream {
        train_x: dec::latent_features(&ae, &head, &splits.clf_train),
        train_y: labels.encode(&splits.clf_train)?,
        test_x: dec::latent_features(&ae, &head, &splits.clf_test),
        test_y: labels.encode(&splits.clf_test)?,
    };
    let model = match clf_src {
        Some(c) => gbt::continue_fit(&c.model, data.train_x.view(), &data.train_y, settings.finetune_rounds)?,
        None => gbt::fit(data.train_x.view(), &data.train_y, labels.len(), &settings.clf)?,
    };
    phases.push(PhaseRecord {
        phase: Phase::Classifier,
        action: spec.clf.to_string(),
        epochs: model.rounds(),
        losses: model.train_loss().to_vec(),
        stopped_early: false,
    });
    let acc = accuracy(&model.predict_classes(data.test_x.view())?, &data.test_y);

    let bundle = Bundle {
        ae: Some(ae),
        cluster: Some(head),
        clf: Some(Classifier { model, labels }),
        ..Bundle::default()
    };
    Ok(ScenarioOutcome {
        spec: spec.clone(),
        bundle,
        phases,
        accuracy: acc,
        elapsed: started.elapsed(),
        data,
    })
}

/// Formats a duration as `h:mm:ss`, e.g. 25 minutes → `0:25:00`.
pub fn format_hms(d: Duration) -> String {
    let s = d.as_secs();
    format!("{}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub portion: f64,
    pub accuracy: f64,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub exp: usize,
    pub eta: usize,
    pub delta_ae: f64,
    pub delta_cluster: f64,
    pub cells: Vec<GridCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub case: usize,
    pub rows: Vec<GridRow>,
}

impl GridReport {
    /// Aligned text table: one row per experiment, accuracy then training
    /// time for every portion.
    pub fn to_table(&self) -> String {
        let portions: Vec<f64> = self.rows.first().map_or_else(Vec::new, |r| r.cells.iter().map(|c| c.portion).collect());
        let mut header = vec!["Exp".to_string(), "eta".into(), "delta_ae".into(), "delta_cluster".into()];
        for p in &portions {
            header.push(format!("Acc {:.0}%", p * 100.0));
        }
        for p in &portions {
            header.push(format!("Time {:.0}%", p * 100.0));
        }
        let mut rows = vec![header];
        for r in &self.rows {
            let mut row = vec![r.exp.to_string(), r.eta.to_string(), r.delta_ae.to_string(), r.delta_cluster.to_string()];
            row.extend(r.cells.iter().map(|c| crate::eval::fmt_metric(c.accuracy)));
            row.extend(r.cells.iter().map(|c| format_hms(c.elapsed)));
            rows.push(row);
        }
        crate::eval::render_table(&rows)
    }
}

/// Runs `base_case` for every (eta, delta pair, portion) combination.
/// Experiments are numbered with eta varying slowest.
#[allow(clippy::too_many_arguments)]
pub fn run_grid(
    base_case: usize,
    etas: &[usize],
    deltas: &[(f64, f64)],
    portions: &[f64],
    settings: &Settings,
    source: &Bundle,
    target: &Dataset,
    seed: u64,
) -> Result<GridReport> {
    case(base_case)?;
    let mut rows = Vec::with_capacity(etas.len() * deltas.len());
    for &eta in etas {
        for &(delta_ae, delta_cluster) in deltas {
            let stop = EarlyStop {
                eta,
                delta_ae,
                delta_cluster,
            };
            let mut cells = Vec::with_capacity(portions.len());
            for &portion in portions {
                let spec = ScenarioSpec::from_case(base_case, portion, Some(stop), seed)?;
                let out = run_scenario(&spec, settings, source, target)?;
                log::info!(
                    "grid exp {} portion {portion}: accuracy {:.4} in {}",
                    rows.len() + 1,
                    out.accuracy,
                    format_hms(out.elapsed)
                );
                cells.push(GridCell {
                    portion,
                    accuracy: out.accuracy,
                    elapsed: out.elapsed,
                });
            }
            rows.push(GridRow {
                exp: rows.len() + 1,
                eta,
                delta_ae,
                delta_cluster,
                cells,
            });
        }
    }
    Ok(GridReport { case: base_case, rows })
}
