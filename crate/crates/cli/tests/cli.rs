use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn apsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

#[test]
fn generate_writes_document_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "k2.json");
    let run = apsearch(&["generate", "--generation", "2", "--out", &out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let doc = read_json(Path::new(&out));
    assert_eq!(doc["kind"], "apollonian");
    assert_eq!(doc["nodes"].as_array().unwrap().len(), 7);
    assert_eq!(doc["edges"].as_array().unwrap().len(), 15);
    let manifest = read_json(Path::new(&format!("{out}.manifest.json")));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["outputs"][0], out);
}

#[test]
fn random_generation_is_seeded() {
    let dir = TempDir::new().unwrap();
    let a = p(&dir, "a.json");
    let b = p(&dir, "b.json");
    for out in [&a, &b] {
        let run = apsearch(&[
            "generate", "--kind", "random", "--iterations", "3", "--subdivisions", "2", "--seed", "7", "--out", out,
        ]);
        assert!(run.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_json(Path::new(&a))["seed"], 7);
}

#[test]
fn search_on_a_saved_graph() {
    let dir = TempDir::new().unwrap();
    let graph = p(&dir, "k4.json");
    assert!(apsearch(&["generate", "--generation", "4", "--out", &graph]).status.success());
    let trace = p(&dir, "trace.csv");
    let run = apsearch(&[
        "search", "--graph", &graph, "--marked", "42", "--init", "full", "--steps", "12", "--trace", &trace,
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,p_marked,p_subspace,p_conditional");
    assert_eq!(lines.len(), 14);
    assert!(lines[11].starts_with("10,"));
    assert!(Path::new(&format!("{trace}.manifest.json")).exists());
}

#[test]
fn zero_steps_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let trace = p(&dir, "t.csv");
    let run = apsearch(&["search", "--generation", "3", "--marked", "0", "--steps", "0", "--trace", &trace]);
    assert!(run.status.success());
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 2);
}

#[test]
fn unknown_node_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let run = apsearch(&["search", "--generation", "2", "--marked", "7", "--trace", &p(&dir, "t.csv")]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("0..=6"));
}

#[test]
fn malformed_graph_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let graph = p(&dir, "bad.json");
    std::fs::write(&graph, r#"{"kind":"apollonian","generation":1,"nodes":[],"edges":[]}"#).unwrap();
    let run = apsearch(&["search", "--graph", &graph, "--marked", "0", "--trace", &p(&dir, "t.csv")]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn sweep_writes_groups_summary_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "sweep");
    let run = apsearch(&[
        "sweep", "--generation", "4", "--marked-set", "all", "--group-by-generation", "--out", &out,
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for g in 0..=4 {
        assert!(Path::new(&out).join(format!("group_gen{g}.csv")).exists());
    }
    let summary = std::fs::read_to_string(Path::new(&out).join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("generation,n_last,t_p,two_sqrt_n_last,p_bar"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["4", "27", "10"]);
    let manifest = read_json(&Path::new(&out).join("manifest.json"));
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["parameters"]["horizon"], 40);
}

#[test]
fn sampled_sweep_records_members() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "s");
    let run = apsearch(&[
        "sweep", "--generation", "5", "--group-by-generation", "--sample", "10", "--seed", "5", "--steps", "20", "--out", &out,
    ]);
    assert!(run.status.success());
    let manifest = read_json(&Path::new(&out).join("manifest.json"));
    assert_eq!(manifest["seed"], 5);
    let sampled = manifest["parameters"]["sampled_groups"].as_array().unwrap();
    assert_eq!(sampled[0]["members"].as_array().unwrap().len(), 10);
}

#[test]
fn spectrum_report_and_capacity_exit() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "spec.json");
    let run = apsearch(&["spectrum", "--generation", "2", "--out", &out]);
    assert!(run.status.success());
    let report = read_json(Path::new(&out));
    assert_eq!(report["spectrum"]["plus_one_dim"], 10);
    assert!(report["invariant_checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));

    let run = apsearch(&["spectrum", "--generation", "8", "--out", &p(&dir, "big.json")]);
    assert_eq!(run.status.code(), Some(3));
    assert!(!dir.path().join("big.json").exists());
}
