use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mimo_drl::harness::{load_config, load_csv, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimo-drl"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const TINY: &str = r#"
seeds = [3]
slots = 12
policies = ["random", "sah"]
[system]
tx_antennas = 4
rx_antennas = 2
users = 2
streams_per_user = 1
[codebook]
tx_codewords = 4
rx_codewords = 2
[learning]
hidden = [8]
warmup_slots = 4
batch_size = 2
"#;

#[test]
fn shipped_configs_load() {
    let desk = load_config(configs().join("desk.toml")).unwrap();
    assert_eq!(desk, ExperimentConfig::desk());
    let full = load_config(configs().join("full.toml")).unwrap();
    assert_eq!(full.system, ExperimentConfig::default().system);
    assert_eq!(full.codebook, ExperimentConfig::default().codebook);
}

#[test]
fn run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--policy",
        "random,ddrl",
        "--slots",
        "9",
        "--seed",
        "4",
        "--seed",
        "5",
        "--deterministic",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rec = load_csv(out_dir.join("results.csv")).unwrap();
    assert_eq!(rec.rows.len(), 2 * 2 * 9);
    assert_eq!(rec.runs().len(), 4);
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    let echoed = load_config(out_dir.join("config.toml")).unwrap();
    assert_eq!(echoed.seeds, vec![4, 5]);
    assert_eq!(echoed.slots, 9);
    assert!(String::from_utf8_lossy(&out.stdout).contains("policy=ddrl"));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let mut files = Vec::new();
    for (i, extra) in [&["--deterministic"][..], &["--deterministic"][..], &[][..]].iter().enumerate() {
        let out_dir = dir.path().join(format!("o{i}"));
        let mut args = vec![
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--policy",
            "ddrl,greedy,random",
        ];
        args.extend_from_slice(extra);
        assert_eq!(code(&run(&args)), 0);
        files.push(fs::read(out_dir.join("results.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    // Parallel jobs are merged in job order.
    assert_eq!(files[0], files[2]);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let crowded = write(dir.path(), "crowded.toml", "[system]\ntx_antennas = 4\nusers = 4\nstreams_per_user = 2\n");
    let out = run(&["run", "--config", crowded.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("tx_antennas"));

    let unknown = write(dir.path(), "unknown.toml", "[system]\nantennas = 4\n");
    assert_eq!(code(&run(&["run", "--config", unknown.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 2);

    let missing = dir.path().join("missing.toml");
    assert_ne!(code(&run(&["run", "--config", missing.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 0);

    assert_eq!(code(&run(&["run", "--policy", "oracle", "--out", out_dir.to_str().unwrap()])), 2);
    assert!(!out_dir.join("results.csv").exists());
}

#[test]
fn all_singular_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Zero channel: nothing to invert in any slot.
    let cfg = write(dir.path(), "dead.toml", &TINY.replace("[system]", "[system]\nreference_loss_db = 5000.0"));
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--policy",
        "zf_pcsi,random",
    ]);
    assert_eq!(code(&out), 3);
    let rec = load_csv(out_dir.join("results.csv")).unwrap();
    assert!(rec.rows.iter().filter(|r| r.policy.name() == "zf_pcsi").all(|r| r.singular));

    let ok = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--policy", "random"]);
    assert_eq!(code(&ok), 0);
}

#[test]
fn sweep_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--policy",
        "random",
        "--set",
        "system.rho=0.5,1.0",
        "--set",
        "codebook.tx_codewords=2,4,8",
        "--deterministic",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("system.rho,codebook.tx_codewords,seed,policy"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("0.5,2,3,random"));
    assert!(rows[5].starts_with("1.0,8,3,random"));
    let point = out_dir.join("system.rho=1.0_codebook.tx_codewords=8");
    assert_eq!(load_config(point.join("config.toml")).unwrap().codebook.tx_codewords, 8);
    assert_eq!(load_csv(point.join("results.csv")).unwrap().rows.len(), 12);

    let bad = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "system.users=9",
    ]);
    assert_eq!(code(&bad), 2);
    let unknown = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "system.bogus=1",
    ]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn stats_reports_quartiles_and_cdf() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let out_dir = dir.path().join("out");
    assert_eq!(code(&run(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 0);
    let stats_dir = dir.path().join("stats");
    let results = out_dir.join("results.csv");
    let out = run(&[
        "stats",
        results.to_str().unwrap(),
        "--grid",
        "11",
        "--window",
        "5",
        "--out",
        stats_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("policy,count,mean,min,q1,median,q3,max,final_moving_average"));
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.contains("\nrandom,12,"));
    let cdf = fs::read_to_string(stats_dir.join("cdf.csv")).unwrap();
    assert_eq!(cdf.lines().count(), 1 + 2 * 11);
    assert!(cdf.lines().rfind(|l| l.starts_with("sah,")).unwrap().ends_with(",1"));
    assert_eq!(fs::read_to_string(stats_dir.join("quartiles.csv")).unwrap(), stdout);

    let garbage = write(dir.path(), "garbage.csv", "a,b\n1,2\n");
    assert_ne!(code(&run(&["stats", garbage.to_str().unwrap()])), 0);
}
