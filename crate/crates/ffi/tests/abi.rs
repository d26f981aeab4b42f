use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;
use std::sync::OnceLock;

use odxu_core::config::Config;
use odxu_core::pipeline;
use odxu_ffi::*;

fn small_config() -> Config {
    let mut cfg = Config::default();
    for kv in [
        "data.synth_classes=4",
        "data.synth_per_class=40",
        "ae.hidden=32",
        "ae.latent=6",
        "ae.epochs=3",
        "cluster.epochs=2",
        "clf.n_rounds=10",
        "clf.finetune_rounds=5",
        "uq.n_rounds=10",
        "data.synth_overlap=0.6",
    ] {
        cfg.set_assignment(kv).unwrap();
    }
    cfg
}

/// One small trained bundle shared by every test in this file.
fn bundle_path() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        pipeline::run_pipeline(&small_config(), dir.path()).unwrap();
        dir
    });
    static PATH: OnceLock<PathBuf> = OnceLock::new();
    PATH.get_or_init(|| dir.path().join(pipeline::MODEL_BUNDLE))
}

fn last_error() -> String {
    let p = odxu_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn dataset_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("d.csv").to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(odxu_dataset_synth(3, 4, 0.1, 9, &mut ds), OdxuStatus::Ok);
        assert_eq!(odxu_dataset_len(ds), 12);
        assert_eq!(odxu_dataset_n_classes(ds), 3);
        assert_eq!(odxu_dataset_save(ds, path.as_ptr()), OdxuStatus::Ok);

        let mut back = ptr::null_mut();
        assert_eq!(odxu_dataset_load(path.as_ptr(), &mut back), OdxuStatus::Ok);
        assert_eq!(odxu_dataset_len(back), 12);
        let mut a = vec![0u8; odxu_payload_len()];
        let mut b = vec![0u8; odxu_payload_len()];
        odxu_dataset_payload(ds, 5, a.as_mut_ptr(), a.len());
        odxu_dataset_payload(back, 5, b.as_mut_ptr(), b.len());
        assert_eq!(a, b);
        odxu_dataset_free(ds);
        odxu_dataset_free(back);
    }
}

#[test]
fn errors_set_code_and_message() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(odxu_dataset_synth(0, 4, 0.1, 1, &mut ds), OdxuStatus::InvalidArgument);
        assert!(ds.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(odxu_dataset_synth(2, 2, 0.1, 1, ptr::null_mut()), OdxuStatus::NullPointer);

        let missing = CString::new("/nonexistent/x.odxm").unwrap();
        let mut b = ptr::null_mut();
        assert_eq!(odxu_bundle_load(missing.as_ptr(), &mut b), OdxuStatus::Io);

        let mut v = 0.0;
        assert_eq!(odxu_uq_confidence([0.7, 0.7].as_ptr(), 2, &mut v), OdxuStatus::InvalidArgument);
        // success clears the message
        assert_eq!(odxu_uq_entropy([0.5, 0.5].as_ptr(), 2, &mut v), OdxuStatus::Ok);
        assert!(odxu_last_error_message().is_null());
        assert!((v - 2f64.ln()).abs() < 1e-12);
        assert_eq!(odxu_dataset_len(ptr::null()), 0);
    }
}

#[test]
fn eval_metrics_match_core() {
    let scores = [0.1, 0.4, 0.35, 0.8, 0.2, 0.9];
    let labels = [0u8, 0, 1, 1, 0, 1];
    let bools: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
    unsafe {
        let mut a = 0.0;
        assert_eq!(odxu_eval_auroc(scores.as_ptr(), labels.as_ptr(), 6, &mut a), OdxuStatus::Ok);
        assert_eq!(a, odxu_core::eval::auroc(&scores, &bools).unwrap());
        let mut t = 0.0;
        assert_eq!(odxu_eval_tp_at_tn(scores.as_ptr(), labels.as_ptr(), 6, 0.95, &mut t), OdxuStatus::Ok);
        assert_eq!(t, odxu_core::eval::tp_at_tn(&scores, &bools, 0.95).unwrap());
    }
}

#[test]
fn bundle_prediction_matches_core() {
    let path = CString::new(bundle_path().to_str().unwrap()).unwrap();
    let core = odxu_core::checkpoint::Bundle::load(bundle_path()).unwrap();
    let ds = odxu_core::dataio::synth_generate(4, 2, 0.6, 11).unwrap();
    let raw = ds.records()[3].raw_bytes();
    unsafe {
        let mut b = ptr::null_mut();
        assert_eq!(odxu_bundle_load(path.as_ptr(), &mut b), OdxuStatus::Ok);
        let mut k = 0;
        assert_eq!(odxu_bundle_n_classes(b, &mut k), OdxuStatus::Ok);
        let mut d = 0;
        assert_eq!(odxu_bundle_latent_dim(b, &mut d), OdxuStatus::Ok);
        assert_eq!(d, 6);

        let mut z = vec![0.0; d];
        assert_eq!(odxu_bundle_encode(b, raw.as_ptr(), raw.len(), z.as_mut_ptr(), d), OdxuStatus::Ok);
        let expect_z = odxu_core::nn::encode(core.require_ae().unwrap(), &ds.subset(&[3]));
        assert_eq!(z, expect_z.row(0).to_vec());

        let mut p = vec![0.0; k];
        assert_eq!(odxu_bundle_predict_proba(b, raw.as_ptr(), raw.len(), p.as_mut_ptr(), k), OdxuStatus::Ok);
        let expect_p = core.require_clf().unwrap().model.predict_proba(&z).unwrap();
        assert_eq!(p, expect_p);

        let mut small = [0.0];
        assert_eq!(
            odxu_bundle_predict_proba(b, raw.as_ptr(), raw.len(), small.as_mut_ptr(), 1),
            OdxuStatus::BufferTooSmall
        );

        let mut name = [0 as std::ffi::c_char; 64];
        assert_eq!(odxu_bundle_class_name(b, 0, name.as_mut_ptr(), 64), OdxuStatus::Ok);
        assert_eq!(CStr::from_ptr(name.as_ptr()).to_str().unwrap(), core.require_clf().unwrap().labels.names()[0]);

        for recipe in ["prob", "shap", "ig"] {
            let r = CString::new(recipe).unwrap();
            let mut s = -1.0;
            assert_eq!(odxu_bundle_meta_score(b, r.as_ptr(), raw.as_ptr(), raw.len(), &mut s), OdxuStatus::Ok);
            assert!((0.0..=1.0).contains(&s), "{recipe}: {s}");
        }
        let bad = CString::new("nope").unwrap();
        let mut s = 0.0;
        assert_eq!(
            odxu_bundle_meta_score(b, bad.as_ptr(), raw.as_ptr(), raw.len(), &mut s),
            OdxuStatus::InvalidArgument
        );
        odxu_bundle_free(b);
    }
}

#[test]
fn missing_section_is_reported() {
    let bytes = std::fs::read(bundle_path()).unwrap();
    let stripped = odxu_core::checkpoint::drop_section(&bytes, "clf").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("noclf.odxm");
    std::fs::write(&p, stripped).unwrap();
    let c = CString::new(p.to_str().unwrap()).unwrap();
    unsafe {
        let mut b = ptr::null_mut();
        assert_eq!(odxu_bundle_load(c.as_ptr(), &mut b), OdxuStatus::Ok);
        let mut k = 0;
        assert_eq!(odxu_bundle_n_classes(b, &mut k), OdxuStatus::MissingSection);
        assert!(last_error().contains("clf"));
        odxu_bundle_free(b);
    }
}

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/odxu.h")
}

#[test]
fn header_declares_the_exported_api() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for name in [
        "typedef struct OdxuDataset OdxuDataset",
        "typedef struct OdxuBundle OdxuBundle",
        "ODXU_STATUS_MISSING_SECTION = 6",
        "odxu_last_error_message(void)",
        "odxu_dataset_synth(",
        "odxu_bundle_predict_proba(",
        "odxu_bundle_meta_score(",
        "odxu_eval_tp_at_tn(",
        "odxu_pipeline_run(",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles a C program against the header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let exe_dir = std::env::current_exe().unwrap();
    let lib_dir = exe_dir.parent().unwrap().parent().unwrap();
    if !lib_dir.join("libodxu_ffi.so").exists() {
        eprintln!("shared library not built at {}, skipping", lib_dir.display());
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(&src)
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg("-L")
        .arg(lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lodxu_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).arg(bundle_path()).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("len 15 classes 3"), "{stdout}");
    assert!(stdout.contains("k 4 sum 1.000000 conf_ok 1"), "{stdout}");
    assert!(stdout.contains("small buffer 8 msg set"), "{stdout}");
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
