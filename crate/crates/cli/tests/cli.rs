use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    /// A small simulated system with a short training schedule.
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let toml = format!(
            "seed = 1\n[paths]\ndataset = {:?}\ncheckpoint = {:?}\nout = {:?}\n\
             [sim]\nn_failures = 30\n[train]\nmax_epochs = 4\npatience = 4\n\
             [model]\nlayers = 2\n[interpret.decoder]\nsteps = 10\n",
            root.join("data"),
            root.join("out/model.json"),
            root.join("out"),
        );
        std::fs::write(root.join("run.toml"), toml).unwrap();
        Self { _tmp: tmp, root }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_unitrank"))
            .arg("--config")
            .arg(self.root.join("run.toml"))
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root.join("out").join(name)
    }

    fn first_failure(&self) -> String {
        let failures: Value = read_json(&self.root.join("data/failures.json"));
        failures[0]["failure_id"].as_str().unwrap().to_string()
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn assert_valid(schema: &str, path: &Path) {
    let schema = read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(schema));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let doc = read_json(path);
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{} violates the schema: {errors:?}", path.display());
}

#[test]
fn pipeline_outputs_match_schemas() {
    let ws = Workspace::new();
    ws.ok(&["simulate"]);
    ws.ok(&["train"]);
    assert!(ws.root.join("out/model.json").is_file());
    assert!(ws.out("train_log.csv").is_file());

    let table = ws.ok(&["evaluate"]);
    assert!(table.contains("MAR"));
    assert_valid("eval_report.schema.json", &ws.out("eval_dejavu.json"));

    let id = ws.first_failure();
    let stdout = ws.ok(&["localize", "--failure", &id, "--k", "3"]);
    // first line is the JSON document, then the table
    let first: Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(first["failure_id"], id.as_str());
    assert_valid("ranking.schema.json", &ws.out(&format!("ranking_{id}.json")));

    ws.ok(&["interpret-global"]);
    assert_valid("interpret_global.schema.json", &ws.out("interpret_global.json"));
    let rules: Vec<PathBuf> = std::fs::read_dir(ws.out("rules"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    assert!(!rules.is_empty());
    for p in &rules {
        assert_valid("class_rules.schema.json", p);
    }

    ws.ok(&["interpret-local", "--failure", &id, "--k", "2"]);
    assert_valid("similar.schema.json", &ws.out(&format!("similar_{id}.json")));
}

#[test]
fn unknown_failure_is_named() {
    let ws = Workspace::new();
    ws.ok(&["simulate"]);
    let out = ws.run(&["localize", "--failure", "no-such-failure"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no-such-failure"), "{err}");
}

#[test]
fn random_walk_needs_no_checkpoint() {
    let ws = Workspace::new();
    ws.ok(&["simulate"]);
    ws.ok(&["evaluate", "--producer", "rw_fi"]);
    ws.ok(&["evaluate", "--producer", "rw_metric"]);
    assert!(!ws.root.join("out/model.json").exists());
    assert_valid("eval_report.schema.json", &ws.out("eval_rw_fi.json"));
    let csv = std::fs::read_to_string(ws.out("metrics_rw_metric.csv")).unwrap();
    assert!(csv.starts_with("name,MAR,A@1,A@2,A@3,A@5\nrw_metric,"));

    // the model producer does need one
    let out = ws.run(&["evaluate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
}

#[test]
fn missing_dataset_fails_with_one_line() {
    let ws = Workspace::new();
    let out = ws.run(&["train"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error")).collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].contains("does not exist"));
}

#[test]
fn flags_override_the_config_file() {
    let ws = Workspace::new();
    let text = ws.ok(&["--seed", "42", "--out", "elsewhere", "config"]);
    let cfg: toml::Table = text.parse().unwrap();
    assert_eq!(cfg["seed"].as_integer(), Some(42));
    assert_eq!(cfg["paths"]["out"].as_str(), Some("elsewhere"));
    // the seed reaches the simulator and the trainer
    assert_eq!(cfg["sim"]["seed"].as_integer(), Some(42));
    assert_eq!(cfg["train"]["seed"].as_integer(), Some(42));
    assert_eq!(cfg["sim"]["n_failures"].as_integer(), Some(30));
}

#[test]
fn malformed_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "[train]\nmax_epochs = \"many\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_unitrank")).arg("--config").arg(&path).arg("config").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}
