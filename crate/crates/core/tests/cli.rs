use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_uwb-mapper"));
    c.env("UWB_MAPPER_LOG", "error");
    c
}

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn uwb-mapper")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Simulates the approach scene and runs the pipeline on it.
fn simulate_and_run(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let caps = dir.join("caps.jsonl");
    let truth = dir.join("truth.json");
    let out = dir.join("out");
    let o = run(bin()
        .arg("simulate")
        .arg(scene("fig7a_metal.json"))
        .arg("-o")
        .arg(&caps)
        .arg("--truth")
        .arg(&truth));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(bin().arg("run").arg(&caps).arg("-o").arg(&out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (caps, truth, out)
}

#[test]
fn full_chain_writes_all_artifacts() {
    let dir = TempDir::new().unwrap();
    let (_, truth, out) = simulate_and_run(dir.path());
    for f in ["snapshots.jsonl", "peaks.jsonl", "summary.json", "latency.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let eval = dir.path().join("eval");
    let o = run(bin()
        .arg("evaluate")
        .arg(out.join("snapshots.jsonl"))
        .arg("--truth")
        .arg(&truth)
        .args(["--mode", "step3", "--label", "metal", "--channel-label", "9"])
        .arg("-o")
        .arg(&eval));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["fp"], 0);
    assert_eq!(report["fn"], 0);
    let table = fs::read_to_string(eval.join("report.md")).unwrap();
    assert!(table.contains("| metal |"), "{table}");
    assert!(fs::read_to_string(eval.join("cdf.csv")).unwrap().lines().count() > 1);
}

#[test]
fn simulate_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let outs: Vec<Vec<u8>> = ["a.csv", "b.csv"]
        .iter()
        .map(|name| {
            let p = dir.path().join(name);
            let o = run(bin().arg("simulate").arg(scene("corridor.json")).arg("-o").arg(&p));
            assert_eq!(code(&o), 0);
            fs::read(p).unwrap()
        })
        .collect();
    assert!(!outs[0].is_empty());
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn out_of_range_obstacle_warns() {
    let dir = TempDir::new().unwrap();
    let o = run(bin()
        .arg("simulate")
        .arg(scene("corridor.json"))
        .arg("-o")
        .arg(dir.path().join("c.jsonl")));
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("far wall"));
}

#[test]
fn missing_input_is_io_error() {
    let dir = TempDir::new().unwrap();
    let o = run(bin().arg("run").arg(dir.path().join("nope.jsonl")).arg("-o").arg(dir.path()));
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_capture_is_data_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.jsonl");
    fs::write(&p, "{\"timestamp_ms\": 1}\n").unwrap();
    let o = run(bin().arg("run").arg(&p).arg("-o").arg(dir.path().join("out")));
    assert_eq!(code(&o), 3);
}

#[test]
fn empty_snapshots_is_data_error() {
    let dir = TempDir::new().unwrap();
    let (_, truth, _) = simulate_and_run(dir.path());
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = run(bin()
        .arg("evaluate")
        .arg(&empty)
        .arg("--truth")
        .arg(&truth)
        .args(["--mode", "step3"])
        .arg("-o")
        .arg(dir.path().join("e")));
    assert_eq!(code(&o), 3);
}

#[test]
fn bad_params_is_config_error() {
    let dir = TempDir::new().unwrap();
    let (caps, _, _) = simulate_and_run(dir.path());
    let params = dir.path().join("p.toml");
    fs::write(&params, "[cluster]\nbogus = 1\n").unwrap();
    let o = run(bin().arg("run").arg(&caps).arg("--params").arg(&params).arg("-o").arg(dir.path().join("o2")));
    assert_eq!(code(&o), 4);

    fs::write(&params, "[cluster]\neps = -3.0\n").unwrap();
    let o = run(bin().arg("run").arg(&caps).arg("--params").arg(&params).arg("-o").arg(dir.path().join("o3")));
    assert_eq!(code(&o), 4);
}

#[test]
fn shipped_params_file_is_accepted() {
    let dir = TempDir::new().unwrap();
    let (caps, _, _) = simulate_and_run(dir.path());
    let o = run(bin()
        .arg("run")
        .arg(&caps)
        .arg("--params")
        .arg(scene("params.toml"))
        .args(["--execution", "sequential"])
        .arg("-o")
        .arg(dir.path().join("o")));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn plot_draws_one_hull_per_cluster() {
    let dir = TempDir::new().unwrap();
    let (_, _, out) = simulate_and_run(dir.path());
    let svg = dir.path().join("map.svg");
    let o = run(bin()
        .arg("plot")
        .arg(out.join("snapshots.jsonl"))
        .arg("--peaks")
        .arg(out.join("peaks.jsonl"))
        .args(["--step", "all"])
        .arg("-o")
        .arg(&svg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&svg).unwrap();
    let last = fs::read_to_string(out.join("snapshots.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(last.lines().last().unwrap()).unwrap();
    let n_clusters = last["clusters"].as_array().unwrap().len();
    assert_eq!(text.matches(r#"class="hull""#).count(), n_clusters);
    assert_eq!(text.matches(r#"class="panel""#).count(), 5);
    assert!(text.contains(r#"class="colorbar""#));
}
