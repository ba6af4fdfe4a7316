use std::ffi::{CStr, CString};
use std::process::Command;
use std::sync::Arc;

use mctspo::harness::{AlgorithmKind, ExperimentConfig};
use mctspo::{EnvKind, Genome, NetworkShape};

use super::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = mctspo_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> String {
    let mut cfg = ExperimentConfig::desk(EnvKind::SparseMountainCar, AlgorithmKind::Mctspo);
    cfg.network.hidden_dims = vec![8];
    cfg.budget = 3_000;
    cfg.to_json()
}

#[test]
fn genome_json_roundtrip_and_replay() {
    let shape = Arc::new(NetworkShape::mlp(2, &[4], vec![1.0]));
    let genome = Genome::from_seed(shape, 17);
    let json = cstr(&genome.to_json().unwrap());

    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(mctspo_genome_from_json(json.as_ptr(), &mut h), MctspoStatus::Ok);
        assert_eq!(mctspo_genome_depth(h), 1);

        let mut text = ptr::null_mut();
        assert_eq!(mctspo_genome_to_json(h, &mut text), MctspoStatus::Ok);
        assert_eq!(
            Genome::from_json(CStr::from_ptr(text).to_str().unwrap()).unwrap(),
            genome
        );
        mctspo_string_free(text);

        let (mut ret, mut goal) = (f64::NAN, true);
        let env = cstr("sparse-mountain-car");
        assert_eq!(mctspo_replay(h, env.as_ptr(), &mut ret, &mut goal), MctspoStatus::Ok);
        let expected = mctspo::harness::replay_genome(&genome, &mctspo::EnvSpec::sparse_mountain_car()).unwrap();
        assert_eq!(ret, expected.total_return);
        assert_eq!(goal, expected.reached_goal);

        // Wrong task: observation size differs.
        let acrobot = cstr("sparse-acrobot");
        assert_eq!(
            mctspo_replay(h, acrobot.as_ptr(), &mut ret, &mut goal),
            MctspoStatus::Config
        );
        assert!(last_error().contains("task needs"));
        mctspo_genome_free(h);
    }
}

#[test]
fn load_from_file_and_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    Genome::from_seed(Arc::new(NetworkShape::mlp(6, &[3], vec![1.0])), 2)
        .save(&path)
        .unwrap();

    unsafe {
        let mut h = ptr::null_mut();
        let p = cstr(path.to_str().unwrap());
        assert_eq!(mctspo_genome_load(p.as_ptr(), &mut h), MctspoStatus::Ok);
        assert!(mctspo_last_error().is_null());
        mctspo_genome_free(h);

        let missing = cstr(dir.path().join("nope.json").to_str().unwrap());
        let mut h = ptr::null_mut();
        assert_eq!(mctspo_genome_load(missing.as_ptr(), &mut h), MctspoStatus::Io);
        assert!(h.is_null());
        assert!(last_error().contains("nope.json"));

        let garbage = cstr("{not json");
        assert_eq!(mctspo_genome_from_json(garbage.as_ptr(), &mut h), MctspoStatus::Parse);
        assert_eq!(mctspo_genome_from_json(ptr::null(), &mut h), MctspoStatus::NullPointer);
        assert_eq!(
            mctspo_genome_load(p.as_ptr(), ptr::null_mut()),
            MctspoStatus::NullPointer
        );

        let bad_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(
            mctspo_genome_from_json(bad_utf8.as_ptr().cast(), &mut h),
            MctspoStatus::InvalidUtf8
        );
        assert_eq!(mctspo_genome_depth(ptr::null()), 0);
        mctspo_genome_free(ptr::null_mut());
        mctspo_string_free(ptr::null_mut());
    }
}

#[test]
fn run_matches_library_and_exposes_curve() {
    let config = small_config();
    let c = cstr(&config);
    let parsed: ExperimentConfig = serde_json::from_str(&config).unwrap();
    let direct = mctspo::harness::run_trial(&parsed, 5).unwrap();

    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(mctspo_run(c.as_ptr(), 5, &mut run), MctspoStatus::Ok);
        let mut best = f64::NAN;
        assert_eq!(mctspo_run_best_return(run, &mut best), MctspoStatus::Ok);
        assert_eq!(best, direct.best_return);
        assert_eq!(mctspo_run_env_calls(run), direct.env_calls);
        assert!(mctspo_run_env_calls(run) <= 3_000);

        let n = mctspo_run_curve_len(run);
        assert_eq!(n, direct.curve.len());
        for (i, p) in direct.curve.iter().enumerate() {
            let (mut calls, mut ret) = (0, 0.0);
            assert_eq!(mctspo_run_curve_point(run, i, &mut calls, &mut ret), MctspoStatus::Ok);
            assert_eq!((calls, ret), (p.env_calls, p.best_return));
        }
        let (mut calls, mut ret) = (0, 0.0);
        assert_eq!(
            mctspo_run_curve_point(run, n, &mut calls, &mut ret),
            MctspoStatus::OutOfRange
        );

        let mut g = ptr::null_mut();
        assert_eq!(mctspo_run_best_genome(run, &mut g), MctspoStatus::Ok);
        assert_eq!(mctspo_genome_depth(g), direct.best_genome.depth());
        mctspo_genome_free(g);
        mctspo_run_free(run);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg: ExperimentConfig = serde_json::from_str(&small_config()).unwrap();
    cfg.budget = 0;
    let c = cstr(&cfg.to_json());
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(mctspo_run(c.as_ptr(), 0, &mut run), MctspoStatus::Config);
        assert!(run.is_null());
        assert!(last_error().contains("budget"));
    }
}

/// The generated header must parse as both C and C++.
#[test]
fn header_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/mctspo.h");
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    for lang in ["c", "c++"] {
        let out = Command::new(&compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .output();
        match out {
            Ok(out) => assert!(
                out.status.success(),
                "{lang} header check failed:\n{}",
                String::from_utf8_lossy(&out.stderr)
            ),
            Err(e) => {
                eprintln!("skipping header check: cannot run `{compiler}`: {e}");
                return;
            }
        }
    }
}
