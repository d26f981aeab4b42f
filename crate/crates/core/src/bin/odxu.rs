use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Axis;

use odxu_core::checkpoint::{Bundle, Classifier};
use odxu_core::config::{self, Config};
use odxu_core::dataio::{self, Dataset, LabelMap};
use odxu_core::eval::{self, ModelMetrics, Report, ScenarioRow, UqRow};
use odxu_core::pipeline::{self, Manifest};
use odxu_core::{dec, gbt, nn, transfer, OdxuError, Result};

#[derive(Parser, Debug)]
#[command(name = "odxu", version, about = "Payload-byte intrusion detection with uncertainty-aware open-set recognition")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// Experiment configuration file (INI style).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one value, e.g. `--set ae.epochs=10`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
struct StopArgs {
    /// Early-stopping patience in epochs.
    #[arg(long)]
    eta: Option<usize>,

    #[arg(long)]
    delta_ae: Option<f64>,

    #[arg(long)]
    delta_cluster: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a `payload,label` CSV into a binary dataset, optionally rebalancing.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Fraction of benign records to drop.
        #[arg(long)]
        benign_downsample: Option<f64>,
        /// Replication factors, e.g. `ICMP Flood:2,UDP Flood:2`.
        #[arg(long)]
        upsample: Option<String>,
        /// Class to move into a separate unknown-attack file.
        #[arg(long)]
        holdout: Option<String>,
        #[arg(long, requires = "holdout")]
        unknown_output: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate a synthetic labelled payload dataset.
    Synth {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 0.1)]
        overlap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Also write this many out-of-support unknown records.
        #[arg(long, default_value_t = 0)]
        unknowns: usize,
        #[arg(long)]
        unknown_output: Option<PathBuf>,
    },
    /// Pretrain the autoencoder on a dataset.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        stop: StopArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train (or fine-tune) the clustering head on the encoder's latents.
    Cluster {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Continue from the bundle's centroids instead of re-initializing.
        #[arg(long)]
        finetune: bool,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        stop: StopArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train (or fine-tune) the boosted classifier on latent features.
    TrainClf {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Append boosting rounds to the bundle's classifier.
        #[arg(long)]
        finetune: bool,
        #[arg(long)]
        rounds: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run one transfer scenario from a source bundle onto target data.
    Transfer {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        case: Option<usize>,
        #[arg(long)]
        portion: Option<f64>,
        #[command(flatten)]
        stop: StopArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Early-stopping grid over patience and loss thresholds.
    Grid {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        case: usize,
        #[arg(long, value_delimiter = ',', default_value = "10,15,20")]
        etas: Vec<usize>,
        /// `DELTA_AE:DELTA_CLUSTER` pairs.
        #[arg(long, default_value = "0.001:0.01,0.0005:0.005")]
        deltas: String,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.75")]
        portions: Vec<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train metamodels that predict the base classifier's errors.
    UqTrain {
        #[arg(long)]
        bundle: PathBuf,
        /// Labelled data the classifier was not trained on.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Where to write the metamodel test records.
        #[arg(long)]
        meta_test: Option<PathBuf>,
        #[arg(long)]
        recipes: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Classification and misclassification-detection metrics on labelled data.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Open-set detection of a held-out attack against known traffic.
    Osr {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        known: PathBuf,
        #[arg(long)]
        unknown: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print a saved report as text tables or JSON.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "text", value_parser = ["text", "json"])]
        format: String,
    },
    /// Full run from data to report.
    Pipeline {
        #[arg(long)]
        out: PathBuf,
        /// Re-run the configuration recorded in a manifest.
        #[arg(long, conflicts_with = "config")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        case: Option<usize>,
        #[arg(long)]
        portion: Option<f64>,
        #[command(flatten)]
        stop: StopArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn build_config(args: &ConfigArgs, extra: &[(&str, &str, Option<String>)]) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for o in &args.overrides {
        cfg.set_assignment(o)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    for (section, key, value) in extra {
        if let Some(v) = value {
            cfg.set(section, key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stop_overrides(s: &StopArgs) -> Vec<(&'static str, &'static str, Option<String>)> {
    vec![
        ("scenario", "eta", s.eta.map(|v| v.to_string())),
        ("scenario", "delta_ae", s.delta_ae.map(|v| v.to_string())),
        ("scenario", "delta_cluster", s.delta_cluster.map(|v| v.to_string())),
    ]
}

fn sidecar_manifest(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn write_sidecar(m: &mut Manifest, output: &Path) -> Result<()> {
    let dir = parent_dir(output);
    std::fs::create_dir_all(&dir)?;
    if let Some(name) = output.file_name().and_then(|n| n.to_str()) {
        if output.exists() {
            m.record_output(&dir, name)?;
        }
    }
    std::fs::write(sidecar_manifest(output), serde_json::to_string_pretty(m)? + "\n")?;
    Ok(())
}

fn load_data(m: &mut Manifest, path: &Path) -> Result<Dataset> {
    m.record_input(path)?;
    dataio::load_any(path)
}

fn load_bundle(m: &mut Manifest, path: &Path) -> Result<Bundle> {
    m.record_input(path)?;
    Bundle::load(path)
}

fn save_data(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::create_dir_all(parent_dir(path))?;
    dataio::save_any(ds, path)
}

fn save_bundle(b: &Bundle, path: &Path) -> Result<()> {
    std::fs::create_dir_all(parent_dir(path))?;
    b.save(path)
}

fn finish_report(m: &mut Manifest, report: &Report, out: &Path) -> Result<()> {
    eval::emit_report(report, out)?;
    m.record_output(out, "report.json")?;
    m.record_output(out, "report.txt")?;
    m.write(out)?;
    print!("{}", report.to_text());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            classes,
            per_class,
            overlap,
            seed,
            output,
            unknowns,
            unknown_output,
        } => {
            let mut cfg = Config::default();
            cfg.data.synth_classes = classes;
            cfg.data.synth_per_class = per_class;
            cfg.data.synth_overlap = overlap;
            cfg.data.source_seed = seed;
            cfg.validate()?;
            let mut m = Manifest::new("synth", &cfg);
            let ds = m.stage(&parent_dir(&output), "synth", |_| {
                let ds = dataio::synth_generate(classes, per_class, overlap, seed)?;
                save_data(&ds, &output)?;
                if unknowns > 0 {
                    let u = dataio::synth_out_of_support(classes, unknowns, seed)?;
                    let upath = unknown_output.clone().unwrap_or_else(|| output.with_extension("unknown.odxd"));
                    save_data(&u, &upath)?;
                    println!("wrote {} unknown records to {}", u.len(), upath.display());
                }
                Ok(ds)
            })?;
            write_sidecar(&mut m, &output)?;
            println!("wrote {} records to {}", ds.len(), output.display());
        }
        Command::Ingest {
            input,
            output,
            benign_downsample,
            upsample,
            holdout,
            unknown_output,
            cfg,
        } => {
            let cfg = build_config(
                &cfg,
                &[
                    ("data", "benign_downsample", benign_downsample.map(|v| v.to_string())),
                    ("data", "upsample", upsample),
                    ("data", "holdout", holdout),
                ],
            )?;
            let mut m = Manifest::new("ingest", &cfg);
            let dir = parent_dir(&output);
            m.stage(&dir, "ingest", |m| {
                m.record_input(&input)?;
                let ing = dataio::load_csv(&input)?;
                if ing.truncated > 0 {
                    log::warn!("{} payloads longer than {} bytes were truncated", ing.truncated, dataio::PAYLOAD_LEN);
                }
                m.detail("truncated", ing.truncated);
                let mut plan = cfg.split_plan();
                plan.portion = 1.0;
                let mut ds = if plan.benign_downsample > 0.0 || !plan.upsample_classes.is_empty() {
                    dataio::rebalance(&ing.dataset, &plan)?
                } else {
                    ing.dataset
                };
                if let Some(class) = &cfg.data.holdout {
                    let (known, unknown) = dataio::holdout_unknown(&ds, class)?;
                    let upath = unknown_output.clone().unwrap_or_else(|| output.with_extension("unknown.odxd"));
                    save_data(&unknown, &upath)?;
                    println!("wrote {} unknown records to {}", unknown.len(), upath.display());
                    ds = known;
                }
                save_data(&ds, &output)?;
                println!("wrote {} records to {}", ds.len(), output.display());
                Ok(())
            })?;
            write_sidecar(&mut m, &output)?;
        }
        Command::Pretrain {
            data,
            output,
            epochs,
            stop,
            cfg,
        } => {
            let mut extra = stop_overrides(&stop);
            extra.push(("ae", "epochs", epochs.map(|v| v.to_string())));
            let cfg = build_config(&cfg, &extra)?;
            let mut m = Manifest::new("pretrain", &cfg);
            m.stage(&parent_dir(&output), "pretrain", |m| {
                let ds = load_data(m, &data)?;
                let (ae, rec) = pipeline::pretrain_ae(&cfg, &ds)?;
                println!("autoencoder: {} epochs, final loss {:.6}", rec.epochs, rec.losses.last().copied().unwrap_or(f64::NAN));
                m.detail("phases", [&rec]);
                save_bundle(
                    &Bundle {
                        ae: Some(ae),
                        ..Bundle::default()
                    },
                    &output,
                )
            })?;
            write_sidecar(&mut m, &output)?;
        }
        Command::Cluster {
            bundle,
            data,
            output,
            finetune,
            k,
            epochs,
            stop,
            cfg,
        } => {
            let mut extra = stop_overrides(&stop);
            extra.push(("cluster", "k", k.map(|v| v.to_string())));
            extra.push(("cluster", "epochs", epochs.map(|v| v.to_string())));
            let cfg = build_config(&cfg, &extra)?;
            let mut m = Manifest::new("cluster", &cfg);
            m.stage(&parent_dir(&output), "cluster", |m| {
                let mut b = load_bundle(m, &bundle)?;
                let ds = load_data(m, &data)?;
                let ae = b.require_ae()?.clone();
                let (ae, head, rec) = if finetune {
                    let head = b.require_cluster()?.clone();
                    let mut ccfg = cfg.cluster.clone();
                    ccfg.train.seed = cfg.seed;
                    ccfg.train.stop = cfg.scenario.stop()?;
                    let (ae, head, h) = dec::dec_train(ae, head, &ds, &ccfg)?;
                    let rec = transfer::PhaseRecord {
                        phase: transfer::Phase::Cluster,
                        action: "FT".into(),
                        epochs: h.epochs(),
                        losses: h.losses,
                        stopped_early: h.stopped_early,
                    };
                    (ae, head, rec)
                } else {
                    pipeline::train_cluster(&cfg, ae, &ds)?
                };
                let labels = LabelMap::from_dataset(&ds).encode(&ds)?;
                let z = nn::encode(&ae, &ds);
                let purity = dec::purity(&dec::hard_assign(&dec::soft_assign(&head, z.view())), &labels);
                println!("clustering: {} epochs, purity {}", rec.epochs, eval::fmt_metric(purity));
                m.detail("phases", [&rec]);
                m.detail("purity", purity);
                b.ae = Some(ae);
                b.cluster = Some(head);
                save_bundle(&b, &output)
            })?;
            write_sidecar(&mut m, &output)?;
        }
        Command::TrainClf {
            bundle,
            data,
            output,
            finetune,
            rounds,
            cfg,
        } => {
            let key = if finetune { "finetune_rounds" } else { "n_rounds" };
            let cfg = build_config(&cfg, &[("clf", key, rounds.map(|v| v.to_string()))])?;
            let mut m = Manifest::new("train-clf", &cfg);
            m.stage(&parent_dir(&output), "train-clf", |m| {
                let mut b = load_bundle(m, &bundle)?;
                let ds = load_data(m, &data)?;
                let ae = b.require_ae()?;
                let clf = if finetune {
                    let old = b.require_clf()?;
                    let x = nn::encode(ae, &ds);
                    let y = old.labels.encode(&ds)?;
                    Classifier {
                        model: gbt::continue_fit(&old.model, x.view(), &y, cfg.finetune_rounds)?,
                        labels: old.labels.clone(),
                    }
                } else {
                    pipeline::train_classifier(&cfg, ae, &ds)?
                };
                let x = nn::encode(ae, &ds);
                let pred = clf.model.predict_classes(x.view())?;
                let y = clf.labels.encode(&ds)?;
                let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len().max(1) as f64;
                println!("classifier: {} rounds, training accuracy {}", clf.model.rounds(), eval::fmt_metric(acc));
                m.detail("train_loss", clf.model.train_loss());
                b.clf = Some(clf);
                b.metas.clear();
                save_bundle(&b, &output)
            })?;
            write_sidecar(&mut m, &output)?;
        }
        Command::Transfer {
            source,
            target,
            out,
            case,
            portion,
            stop,
            cfg,
        } => {
            let mut extra = stop_overrides(&stop);
            extra.push(("scenario", "case", case.map(|v| v.to_string())));
            extra.push(("scenario", "portion", portion.map(|v| v.to_string())));
            let cfg = build_config(&cfg, &extra)?;
            let spec = cfg.scenario_spec()?;
            let mut m = Manifest::new("transfer", &cfg);
            let report = m.stage(&out, "transfer", |m| {
                let src = load_bundle(m, &source)?;
                let tgt = load_data(m, &target)?;
                let o = transfer::run_scenario(&spec, &cfg.settings(), &src, &tgt)?;
                m.detail("phases", &o.phases);
                m.detail("training_time", transfer::format_hms(o.elapsed));
                save_bundle(&o.bundle, &out.join(pipeline::MODEL_BUNDLE))?;
                m.record_output(&out, pipeline::MODEL_BUNDLE)?;
                let clf = o.bundle.require_clf()?;
                let metrics = pipeline::evaluate_classifier(&cfg, clf, &o.data, None)?;
                Ok(Report {
                    scenarios: vec![ScenarioRow {
                        case: cfg.scenario.case,
                        ae: spec.ae.to_string(),
                        cluster: spec.cluster.to_string(),
                        clf: spec.clf.to_string(),
                        portion: spec.portion,
                        accuracy: o.accuracy,
                    }],
                    classification: vec![ModelMetrics {
                        model: "ODXU".into(),
                        metrics,
                    }],
                    definitions: eval::metric_definitions(),
                    ..Report::default()
                })
            })?;
            finish_report(&mut m, &report, &out)?;
        }
        Command::Grid {
            source,
            target,
            out,
            case,
            etas,
            deltas,
            portions,
            cfg,
        } => {
            let cfg = build_config(&cfg, &[])?;
            config::check_case(case)?;
            let deltas = config::parse_delta_pairs(&deltas)?;
            let mut m = Manifest::new("grid", &cfg);
            let report = m.stage(&out, "grid", |m| {
                let src = load_bundle(m, &source)?;
                let tgt = load_data(m, &target)?;
                let grid = transfer::run_grid(case, &etas, &deltas, &portions, &cfg.settings(), &src, &tgt, cfg.seed)?;
                let times: Vec<Vec<String>> = grid
                    .rows
                    .iter()
                    .map(|r| r.cells.iter().map(|c| transfer::format_hms(c.elapsed)).collect())
                    .collect();
                m.detail("training_time", times);
                print!("{}", grid.to_table());
                Ok(Report {
                    grid: Some(grid),
                    ..Report::default()
                })
            })?;
            eval::emit_report(&report, &out)?;
            m.record_output(&out, "report.json")?;
            m.record_output(&out, "report.txt")?;
            m.write(&out)?;
        }
        Command::UqTrain {
            bundle,
            data,
            output,
            meta_test,
            recipes,
            cfg,
        } => {
            let cfg = build_config(&cfg, &[("uq", "recipes", recipes)])?;
            let mut m = Manifest::new("uq-train", &cfg);
            m.stage(&parent_dir(&output), "uq-train", |m| {
                let mut b = load_bundle(m, &bundle)?;
                let ds = load_data(m, &data)?;
                let clf = b.require_clf()?;
                let x = nn::encode(b.require_ae()?, &ds);
                let y = clf.labels.encode(&ds)?;
                let uqa = pipeline::train_uq(&cfg, &clf.model, &x, &y)?;
                let test_path = meta_test.clone().unwrap_or_else(|| output.with_extension("meta_test.odxd"));
                save_data(&ds.subset(&uqa.meta_test.source_rows), &test_path)?;
                println!(
                    "metamodels {:?}: {} training rows ({} misclassified); test records in {}",
                    uqa.metas.keys().map(|r| r.tag()).collect::<Vec<_>>(),
                    uqa.meta_train.len(),
                    uqa.meta_train.n_misclassified(),
                    test_path.display()
                );
                b.metas = uqa.metas;
                save_bundle(&b, &output)
            })?;
            write_sidecar(&mut m, &output)?;
        }
        Command::Evaluate { bundle, data, out, cfg } => {
            let cfg = build_config(&cfg, &[])?;
            let mut m = Manifest::new("evaluate", &cfg);
            let report = m.stage(&out, "evaluate", |m| {
                let b = load_bundle(m, &bundle)?;
                let ds = load_data(m, &data)?;
                let clf = b.require_clf()?;
                let x = nn::encode(b.require_ae()?, &ds);
                let y = clf.labels.encode(&ds)?;
                let benign = clf
                    .labels
                    .index_of(&cfg.data.benign_class)
                    .ok_or_else(|| OdxuError::UnknownClass(cfg.data.benign_class.clone()))?;
                let pred = clf.model.predict_classes(x.view())?;
                let competence = match b.metas.get(&cfg.uq.competence_recipe) {
                    Some(meta) => Some((odxu_core::uq::meta_score(meta, &clf.model, x.view())?, meta.threshold)),
                    None => None,
                };
                let metrics = eval::classification_metrics(
                    &pred,
                    &y,
                    clf.labels.len(),
                    benign,
                    competence.as_ref().map(|(z, t)| (z.as_slice(), *t)),
                )?;
                let wrong: Vec<bool> = pred.iter().zip(&y).map(|(p, t)| p != t).collect();
                let mut uq_rows = Vec::new();
                for (method, s) in pipeline::uq_scores(&clf.model, &b.metas, &x)? {
                    let (a, t) = match (eval::auroc(&s, &wrong), eval::tp_at_tn(&s, &wrong, eval::TN_TARGET)) {
                        (Ok(a), Ok(t)) => (Some(a), Some(t)),
                        _ => (None, None),
                    };
                    uq_rows.push(UqRow {
                        method,
                        misclassification_auroc: a,
                        misclassification_tp_at_tn: t,
                        osr: None,
                    });
                }
                Ok(Report {
                    classification: vec![ModelMetrics {
                        model: "ODXU".into(),
                        metrics,
                    }],
                    uq: uq_rows,
                    definitions: eval::metric_definitions(),
                    ..Report::default()
                })
            })?;
            finish_report(&mut m, &report, &out)?;
        }
        Command::Osr {
            bundle,
            known,
            unknown,
            out,
            cfg,
        } => {
            let cfg = build_config(&cfg, &[])?;
            let mut m = Manifest::new("osr", &cfg);
            let report = m.stage(&out, "osr", |m| {
                let b = load_bundle(m, &bundle)?;
                let kd = load_data(m, &known)?;
                let ud = load_data(m, &unknown)?;
                let ae = b.require_ae()?;
                let clf = b.require_clf()?;
                let (kx, ux) = (nn::encode(ae, &kd), nn::encode(ae, &ud));
                let (ki, ui) = eval::osr_pairing(kx.nrows(), ux.nrows(), cfg.seed)?;
                let ks = pipeline::uq_scores(&clf.model, &b.metas, &kx.select(Axis(0), &ki))?;
                let us = pipeline::uq_scores(&clf.model, &b.metas, &ux.select(Axis(0), &ui))?;
                let mut rows = Vec::new();
                for ((method, k), (_, u)) in ks.into_iter().zip(us) {
                    let mut r = eval::osr_from_scores(&k, &u)?;
                    if ux.nrows() < eval::MIN_UNKNOWNS {
                        r.warning = Some(format!(
                            "only {} unknown samples (fewer than {}) against {} known",
                            ux.nrows(),
                            eval::MIN_UNKNOWNS,
                            kx.nrows()
                        ));
                    }
                    rows.push(UqRow {
                        method,
                        misclassification_auroc: None,
                        misclassification_tp_at_tn: None,
                        osr: Some(r),
                    });
                }
                Ok(Report {
                    uq: rows,
                    definitions: eval::metric_definitions(),
                    ..Report::default()
                })
            })?;
            finish_report(&mut m, &report, &out)?;
        }
        Command::Report { input, format } => {
            let report = Report::from_json(&std::fs::read_to_string(&input)?)?;
            if format == "json" {
                print!("{}", report.to_json()?);
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Pipeline {
            out,
            manifest,
            case,
            portion,
            stop,
            cfg,
        } => {
            let out_put = match manifest {
                Some(path) => pipeline::rerun_manifest(&path, &out)?,
                None => {
                    let mut extra = stop_overrides(&stop);
                    extra.push(("scenario", "case", case.map(|v| v.to_string())));
                    extra.push(("scenario", "portion", portion.map(|v| v.to_string())));
                    let cfg = build_config(&cfg, &extra)?;
                    pipeline::run_pipeline(&cfg, &out)?
                }
            };
            print!("{}", out_put.report.to_text());
            println!("outputs in {}", out_put.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
