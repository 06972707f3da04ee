use std::path::Path;
use std::process::{Command, Output};

use subdiff::config::ExperimentConfig;
use subdiff::io::write_bank_file;
use subdiff_core::filterbank::AnalysisBank;

fn subdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subdiff"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

const SMALL: [&str; 4] = ["--set", "trials=3", "--set", "iterations=400"];

#[test]
fn presets_list() {
    let o = subdiff(&["presets", "list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("net7") && text.contains("net15"));
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials": 3, "colour": "blue"}"#).unwrap();
    for args in [
        vec!["run", "--set", "nope=1"],
        vec!["run", "--set", "algorithm=md-rls"],
        vec!["run", "--set", "trials=0"],
        vec!["run", "--set", "step.n_w=4"],
        vec!["run", "--topology", "/nonexistent/net.json"],
        vec!["run", "--config", bad.to_str().unwrap()],
        vec!["compare", "--study", "fig3"],
        vec!["frobnicate"],
    ] {
        let o = subdiff(&args);
        assert_eq!(
            code(&o),
            3,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn divergence_exits_2_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = subdiff(&[
        "run",
        "--set",
        "step.mu=6",
        "--set",
        "iterations=3000",
        "--set",
        "trials=2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(read(&out).lines().last().unwrap().ends_with(",300"));
}

#[test]
fn run_schema_and_config_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let mut args = vec!["run"];
    args.extend(SMALL);
    args.extend(["--out", out.to_str().unwrap()]);
    assert_eq!(code(&subdiff(&args)), 0);
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,msd_db"));
    assert_eq!(lines.count(), 400);

    // the same experiment from a config file
    let mut cfg = ExperimentConfig::default();
    cfg.set("trials=3").unwrap();
    cfg.set("iterations=400").unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg.to_json()).unwrap();
    let out2 = dir.path().join("run2.csv");
    let o = subdiff(&[
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&out), read(&out2));
}

#[test]
fn bank_file_matches_designed_bank() {
    let dir = tempfile::tempdir().unwrap();
    let bank = dir.path().join("bank.txt");
    write_bank_file(&bank, &AnalysisBank::with_default_length(4).unwrap()).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let mut args = vec!["run"];
    args.extend(SMALL);
    let mut with_file = args.clone();
    with_file.extend([
        "--bank-file",
        bank.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    args.extend(["--out", a.to_str().unwrap()]);
    assert_eq!(code(&subdiff(&args)), 0);
    assert_eq!(code(&subdiff(&with_file)), 0);
    assert_eq!(read(&a), read(&b));

    // wrong subband count
    let mut wrong = vec![
        "run",
        "--set",
        "step.n_d=2",
        "--bank-file",
        bank.to_str().unwrap(),
    ];
    wrong.extend(SMALL);
    assert_eq!(code(&subdiff(&wrong)), 3);
}

#[test]
fn custom_topology_and_signal_dump() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("tri.json");
    std::fs::write(
        &topo,
        r#"{"nodes": 3, "edges": [[1, 2], [2, 3]], "clusters": [1, 1, 2], "offsets": [0.0, 0.1]}"#,
    )
    .unwrap();
    let (out, sig) = (dir.path().join("o.csv"), dir.path().join("s.csv"));
    let o = subdiff(&[
        "run",
        "--topology",
        topo.to_str().unwrap(),
        "--set",
        "trials=2",
        "--set",
        "iterations=50",
        "--set",
        "step.n_d=2",
        "--dump-signals",
        sig.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&sig);
    assert!(text.starts_with("t,node,u,v,d\n"));
    // 3 nodes x 50 iterations x 2 samples per iteration
    assert_eq!(text.lines().count(), 1 + 3 * 100);
    assert!(text.lines().last().unwrap().starts_with("99,3,"));
}

#[test]
fn sweep_and_compare_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let (sweep, curves) = (dir.path().join("sweep.csv"), dir.path().join("curves.csv"));
    let mut args = vec![
        "sweep",
        "--no-theory",
        "--set",
        "sweep.mu=[0.01,0.02]",
        "--set",
        "sweep.n_d=[2]",
    ];
    args.extend(SMALL);
    args.extend([
        "--out",
        sweep.to_str().unwrap(),
        "--curves",
        curves.to_str().unwrap(),
    ]);
    assert_eq!(code(&subdiff(&args)), 0);
    let text = read(&sweep);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "mu,n_d,sim_db,theory_db,diverged");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.01,2,") && lines[1].ends_with(",,false"));
    assert!(read(&curves).starts_with("n,msd_db,mu,n_d\n0,"));

    let cmp = dir.path().join("cmp.csv");
    let mut args = vec!["compare", "--input", "ar1"];
    args.extend(SMALL);
    args.extend(["--out", cmp.to_str().unwrap()]);
    assert_eq!(code(&subdiff(&args)), 0);
    let text = read(&cmp);
    assert!(text.starts_with("n,msd_db,algorithm\n"));
    assert_eq!(text.lines().count(), 1 + 5 * 400);
}

#[test]
fn theory_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (out, bounds, cache) = (
        dir.path().join("t.csv"),
        dir.path().join("b.csv"),
        dir.path().join("cache"),
    );
    let args = [
        "theory",
        "--set",
        "iterations=200",
        "--set",
        "theory.moment_samples=2000",
        "--set",
        "theory.analytic_p=true",
        "--set",
        "step.mu=0.05",
        "--out",
        out.to_str().unwrap(),
        "--bounds",
        bounds.to_str().unwrap(),
        "--cache-dir",
        cache.to_str().unwrap(),
    ];
    let o = subdiff(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    assert!(text.starts_with("n,msd_db\n"));
    assert_eq!(text.lines().count(), 1 + 201);
    let b = read(&bounds);
    assert!(b.starts_with("quantity,value\nmean_step_bound,"));
    assert!(b.contains("\nms_step_bound,") && b.contains("\nsteady_state_db,"));
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
    // second run reads the cache and reproduces the output
    let first = text.clone();
    assert_eq!(code(&subdiff(&args)), 0);
    assert_eq!(read(&out), first);
}

#[test]
fn complexity_table() {
    let o = subdiff(&[
        "complexity",
        "--topology",
        "net7",
        "--m",
        "8",
        "--n-d",
        "2",
        "--p",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("algorithm,multiplications,additions,dmi_order\n"));
    assert_eq!(text.lines().count(), 6);
}
