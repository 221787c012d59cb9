#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use argus::harness::{BenchmarkConfig, PlannedAttack};
use argus::simulator::AttackKind;
use argus_core::nn::TrainConfig;

pub const BIN: &str = env!("CARGO_BIN_EXE_argus");

pub fn argus(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("spawn argus")
}

/// Runs and requires exit code 0.
pub fn argus_ok(dir: &Path, args: &[&str]) -> Output {
    let out = argus(dir, args);
    assert!(
        out.status.success(),
        "argus {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn tiny_train(seed: u64) -> TrainConfig {
    TrainConfig {
        encoder_hidden: vec![8, 4],
        decoder_hidden: vec![4, 8],
        max_epochs: 3,
        batch_size: 32,
        seed,
        ..TrainConfig::desk()
    }
}

/// Four days, two for training, two attacks, a network small enough for
/// seconds-long runs.
pub fn tiny_bench(seed: u64) -> BenchmarkConfig {
    let mut cfg = BenchmarkConfig::desk(seed);
    cfg.days = 4;
    cfg.train_days = 2;
    cfg.fit.train = tiny_train(seed);
    cfg.attacks = vec![
        PlannedAttack::new(AttackKind::LightFlickering, 2, "19:00", "22:00"),
        PlannedAttack::new(AttackKind::LightsOnDuringNight, 3, "00:30", "05:00"),
    ];
    cfg
}

/// Every file under `dir`, sorted, with its bytes.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

/// Runs every subcommand in a fresh directory and returns, per subcommand,
/// its stdout and the files it wrote.
pub fn run_all(dir: &Path, seed: u64) -> Vec<(String, Vec<u8>, Vec<(PathBuf, Vec<u8>)>)> {
    let s = seed.to_string();
    let bench = tiny_bench(seed);
    std::fs::write(dir.join("bench.json"), serde_json::to_vec(&bench).unwrap()).unwrap();
    let fit = argus_core::detector::FitConfig { train: tiny_train(seed), ..Default::default() };
    std::fs::write(dir.join("fit.json"), serde_json::to_vec(&fit).unwrap()).unwrap();
    let mapping = r#"{"timezone":"Europe/Berlin"}"#;
    std::fs::write(dir.join("mapping.json"), mapping).unwrap();
    let csv = "entity_id,state,last_changed\n\
               light.a,on,2024-01-08T10:00:00+00:00\n\
               sensor.t,21.5,2024-01-08T10:01:00+00:00\n\
               light.a,off,2024-01-08T10:05:00+00:00\n\
               sensor.t,unavailable,2024-01-08T10:06:00+00:00\n";
    std::fs::write(dir.join("history.csv"), csv).unwrap();

    let steps: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", vec!["simulate", "--days", "4", "--seed", &s, "-o", "home.jsonl"]),
        ("simulate-train", vec!["simulate", "--days", "2", "--seed", &s, "-o", "train.jsonl"]),
        (
            "attack",
            vec![
                "attack", "--in", "home.jsonl", "--kind", "light-flickering", "--start",
                "2024-01-10T19:00:00+01:00", "--end", "2024-01-10T22:00:00+01:00", "--seed", &s, "-o",
                "labeled.jsonl",
            ],
        ),
        ("train", vec!["train", "--in", "train.jsonl", "--config", "fit.json", "--seed", &s, "-o", "model.bin"]),
        (
            "detect",
            vec!["detect", "--model", "model.bin", "--in", "labeled.jsonl", "--save-state", "state.bin", "-o", "verdicts.jsonl"],
        ),
        ("evaluate", vec!["evaluate", "--model", "model.bin", "--in", "labeled.jsonl", "-o", "report.json"]),
        ("gradcheck", vec!["gradcheck", "--seed", &s]),
        ("import-ha", vec!["import-ha", "--in", "history.csv", "--mapping", "mapping.json", "-o", "imported.jsonl"]),
        ("ablate-threshold", vec!["ablate", "--kind", "threshold", "--bench-config", "bench.json", "--seed", &s, "--out-dir", "r"]),
        (
            "ablate-alphabeta",
            vec!["ablate", "--kind", "alphabeta", "--bench-config", "bench.json", "--seed", &s, "--alphas", "0,0.5", "--betas", "0.2", "--out-dir", "r"],
        ),
        (
            "ablate-duration",
            vec!["ablate", "--kind", "duration", "--bench-config", "bench.json", "--seed", &s, "--out-dir", "r"],
        ),
        (
            "ablate-noise",
            vec!["ablate", "--kind", "noise", "--bench-config", "bench.json", "--seed", &s, "--sigmas", "1,3", "--out-dir", "r"],
        ),
        (
            "ablate-poison",
            vec!["ablate", "--kind", "poison", "--bench-config", "bench.json", "--seed", &s, "--fractions", "0,0.01", "--out-dir", "r"],
        ),
    ];
    let mut results = Vec::new();
    for (name, args) in steps {
        let out = argus_ok(dir, &args);
        let mut files = snapshot(dir);
        let reports = dir.join("r");
        if reports.is_dir() {
            files.extend(snapshot(&reports).into_iter().map(|(p, b)| (Path::new("r").join(p), b)));
        }
        results.push((name.to_owned(), out.stdout, files));
    }
    results
}

/// Names of subcommands whose outputs differ between two fresh runs.
pub fn nondeterministic_commands(seed: u64) -> Vec<String> {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run_all(a.path(), seed), run_all(b.path(), seed));
    ra.iter().zip(&rb).filter(|(x, y)| x != y).map(|(x, _)| x.0.clone()).collect()
}
