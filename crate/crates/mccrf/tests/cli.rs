use std::path::{Path, PathBuf};
use std::process::Command;

use mccrf::cli::run;
use mccrf::error::{EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
use mccrf::model::ModelFile;
use mccrf::report::RunReport;
use tempfile::TempDir;

fn mccrf(args: &[&str]) -> i32 {
    run(std::iter::once("mccrf").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, count: usize) -> PathBuf {
    let data = dir.join("data");
    let n = count.to_string();
    assert_eq!(mccrf(&["gen", "--k", "3", "--per-cluster", "3", "--count", &n, "--seed", "5", "--out", p(&data)]), 0);
    data
}

fn unary_model(dir: &Path, data: &Path) -> PathBuf {
    let model = dir.join("unary.json");
    let code = mccrf(&["train", "--data", p(data), "--stage", "unary", "--epochs", "5", "--hidden", "4", "--model-out", p(&model)]);
    assert_eq!(code, EXIT_OK);
    model
}

fn report(path: &Path) -> RunReport {
    RunReport::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d");
    assert_eq!(mccrf(&["gen", "--k", "0", "--out", p(&out)]), EXIT_USAGE);
    assert_eq!(mccrf(&["gen", "--k", "2", "--count", "0", "--out", p(&out)]), EXIT_USAGE);
    assert_eq!(mccrf(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(mccrf(&["solve"]), EXIT_USAGE);
    assert_eq!(mccrf(&["--help"]), EXIT_OK);

    let data = gen(dir.path(), 3);
    let model = dir.path().join("m.json");
    let code = mccrf(&["train", "--data", p(&data), "--stage", "end2end", "--model-out", p(&model)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!model.exists());
    let code = mccrf(&["train", "--data", p(&data), "--stage", "unary", "--rate=-1", "--model-out", p(&model)]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn data_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"nodes": [{"id": 0, "feature": [1.0]}], "complete": true, "colour": 1}"#).unwrap();
    let r = dir.path().join("r.json");
    assert_eq!(mccrf(&["solve", p(&bad), "--report", p(&r)]), EXIT_DATA);
    assert_eq!(mccrf(&["solve", p(&dir.path().join("missing.json")), "--report", p(&r)]), EXIT_DATA);
    // No costs and no model: nothing to solve on.
    let plain = dir.path().join("plain.json");
    std::fs::write(&plain, r#"{"nodes": [{"id": 0, "feature": [1.0]}, {"id": 1, "feature": [2.0]}], "complete": true}"#)
        .unwrap();
    assert_eq!(mccrf(&["solve", p(&plain), "--report", p(&r)]), EXIT_DATA);
}

#[test]
fn divergence_and_non_finite_potentials_exit_three() {
    let dir = TempDir::new().unwrap();
    let data = gen(dir.path(), 4);
    let m = dir.path().join("m.json");
    let code = mccrf(&["train", "--data", p(&data), "--stage", "unary", "--rate", "1e300", "--epochs", "3", "--model-out", p(&m)]);
    assert_eq!(code, EXIT_NUMERIC);

    // A model whose logits overflow to infinity.
    let model = unary_model(dir.path(), &data);
    let text = std::fs::read_to_string(&model).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    for layer in doc["layers"].as_array_mut().unwrap() {
        for row in layer["weights"].as_array_mut().unwrap() {
            for w in row.as_array_mut().unwrap() {
                *w = serde_json::json!(1e308);
            }
        }
    }
    let huge = dir.path().join("huge.json");
    std::fs::write(&huge, doc.to_string()).unwrap();
    let r = dir.path().join("r.json");
    assert_eq!(mccrf(&["infer", p(&data), "--model", p(&huge), "--report", p(&r)]), EXIT_NUMERIC);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mccrf");
    let status = Command::new(bin).args(["gen", "--k", "0"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&status.stderr).contains("mccrf: error:"));
    let status = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
}

#[test]
fn exact_solver_refuses_large_instances() {
    let dir = TempDir::new().unwrap();
    let write = |n: usize| {
        let nodes: Vec<_> = (0..n).map(|i| serde_json::json!({"id": i, "feature": [i as f64]})).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push(serde_json::json!({"u": u, "v": v, "cost": if (u + v) % 3 == 0 { -1.0 } else { 0.5 }}));
            }
        }
        let path = dir.path().join(format!("k{n}.json"));
        std::fs::write(&path, serde_json::json!({"nodes": nodes, "edges": edges}).to_string()).unwrap();
        path
    };
    let r = dir.path().join("r.json");
    assert_eq!(mccrf(&["solve", p(&write(13)), "--exact", "--report", p(&r)]), EXIT_DATA);
    assert_eq!(mccrf(&["solve", p(&write(7)), "--exact", "--report", p(&r)]), EXIT_OK);
    let rep = report(&r);
    let solvers = &rep.instances[0].solvers;
    let exact = solvers.iter().find(|s| s.method == "exact").expect("exact row");
    assert!(solvers.iter().all(|s| s.objective >= exact.objective - 1e-12));
    assert_eq!(rep.instances[0].cost_source, "instance");
}

#[test]
fn eval_over_directory_reports_each_instance_and_the_mean() {
    let dir = TempDir::new().unwrap();
    let data = gen(dir.path(), 5);
    let model = unary_model(dir.path(), &data);
    let r = dir.path().join("eval.json");
    assert_eq!(mccrf(&["eval", p(&data), "--model", p(&model), "--report", p(&r)]), EXIT_OK);
    let rep = report(&r);
    assert_eq!(rep.instances.len(), 5);
    assert!(rep.instances.windows(2).all(|w| w[0].name < w[1].name));
    let mean = rep.mean.as_ref().unwrap();
    assert_eq!(mean.instances, 5);
    assert_eq!(mean.iterations.len(), 4);
    let avg: f64 = rep.instances.iter().map(|i| i.metrics.as_ref().unwrap().thresholded_edge_accuracy).sum::<f64>() / 5.0;
    assert!((mean.thresholded_edge_accuracy.unwrap() - avg).abs() < 1e-12);
    assert!(rep.total_seconds.is_none());

    let marginals = std::fs::read_to_string(dir.path().join("eval.marginals.csv")).unwrap();
    let lines: Vec<&str> = marginals.lines().collect();
    assert_eq!(lines[0], "instance,iteration,mean_cut_probability,join_marginal,cut_marginal");
    assert_eq!(lines.len(), 1 + 6 * 4);
    assert_eq!(lines.iter().filter(|l| l.starts_with("mean,")).count(), 4);
    let invalid = std::fs::read_to_string(dir.path().join("eval.invalid.csv")).unwrap();
    assert_eq!(invalid.lines().count(), 1 + 6 * 4);
}

#[test]
fn zero_iterations_reports_a_single_row() {
    let dir = TempDir::new().unwrap();
    let data = gen(dir.path(), 2);
    let model = unary_model(dir.path(), &data);
    let r = dir.path().join("r.json");
    let code = mccrf(&["infer", p(&data.join("inst-0000.json")), "--model", p(&model), "--iterations", "0", "--report", p(&r)]);
    assert_eq!(code, EXIT_OK);
    let rep = report(&r);
    assert_eq!(rep.instances.len(), 1);
    assert!(rep.mean.is_none());
    assert_eq!(rep.instances[0].iterations.len(), 1);
    assert_eq!(rep.instances[0].iterations[0].iteration, 0);
    assert_eq!(rep.config.iterations, Some(0));
}

#[test]
fn unlabeled_instances_infer_but_do_not_train() {
    let dir = TempDir::new().unwrap();
    let data = gen(dir.path(), 3);
    let model = unary_model(dir.path(), &data);
    let csv = dir.path().join("cloud.csv");
    std::fs::write(&csv, "id,x,y\na,0.0,0.1\nb,0.1,0.0\nc,2.0,2.1\nd,2.1,2.0\n").unwrap();
    let unlabeled = dir.path().join("u");
    std::fs::create_dir(&unlabeled).unwrap();
    let inst = unlabeled.join("cloud.json");
    assert_eq!(mccrf(&["import", p(&csv), "--out", p(&inst)]), EXIT_OK);

    // The model expects 5-dimensional edge features; build a matching 2-d model.
    let labeled_csv = dir.path().join("labeled.csv");
    std::fs::write(&labeled_csv, "id,x,y,label\na,0.0,0.1,0\nb,0.1,0.0,0\nc,2.0,2.1,1\nd,2.1,2.0,1\n").unwrap();
    let ldir = dir.path().join("l");
    std::fs::create_dir(&ldir).unwrap();
    assert_eq!(mccrf(&["import", p(&labeled_csv), "--out", p(&ldir.join("a.json"))]), EXIT_OK);
    let m2 = dir.path().join("m2.json");
    let code = mccrf(&["train", "--data", p(&ldir), "--stage", "unary", "--epochs", "3", "--validation-fraction", "0", "--model-out", p(&m2)]);
    assert_eq!(code, EXIT_OK);

    let r = dir.path().join("r.json");
    assert_eq!(mccrf(&["infer", p(&inst), "--model", p(&m2), "--report", p(&r)]), EXIT_OK);
    let rep = report(&r);
    assert!(!rep.instances[0].labeled);
    assert!(rep.instances[0].metrics.is_none());
    assert!(rep.instances[0].iterations.iter().all(|s| s.join_marginal.is_none() && s.invalid_cycle_ratio.is_some()));

    assert_eq!(mccrf(&["eval", p(&inst), "--model", p(&m2), "--report", p(&r)]), EXIT_DATA);
    let out = dir.path().join("never.json");
    assert_eq!(mccrf(&["train", "--data", p(&unlabeled), "--stage", "unary", "--model-out", p(&out)]), EXIT_DATA);
    assert!(!out.exists());
    // Feature dimension mismatch between model and data.
    assert_eq!(mccrf(&["infer", p(&inst), "--model", p(&model), "--report", p(&r)]), EXIT_DATA);
}

#[test]
fn gen_is_reproducible_and_guards_existing_output() {
    let dir = TempDir::new().unwrap();
    let a = gen(dir.path(), 3);
    let snapshot: Vec<(String, Vec<u8>)> = {
        let mut v: Vec<_> = std::fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap())
            .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
            .collect();
        v.sort();
        v
    };
    assert_eq!(snapshot.len(), 4);
    assert!(snapshot.iter().any(|(n, _)| n == "manifest.json"));

    let args = ["gen", "--k", "3", "--per-cluster", "3", "--count", "3", "--seed", "5", "--out", p(&a)];
    assert_eq!(mccrf(&args), EXIT_USAGE);
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(mccrf(&forced), EXIT_OK);
    for (name, bytes) in &snapshot {
        assert_eq!(&std::fs::read(a.join(name)).unwrap(), bytes, "{name}");
    }

    // Fewer instances with --force leaves no stale files behind.
    let mut fewer = forced.clone();
    fewer[6] = "1";
    assert_eq!(mccrf(&fewer), EXIT_OK);
    assert_eq!(std::fs::read_dir(&a).unwrap().count(), 2);
}

#[test]
fn training_writes_curve_and_history() {
    let dir = TempDir::new().unwrap();
    let data = gen(dir.path(), 4);
    let model = unary_model(dir.path(), &data);
    let curve = std::fs::read_to_string(dir.path().join("unary.curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,validation_loss,validation_accuracy,validation_invalid_ratio");
    assert_eq!(lines.len(), 1 + 6);
    assert_eq!(mccrf(&["train", "--data", p(&data), "--stage", "unary", "--model-out", p(&model)]), EXIT_USAGE);

    let e2e = dir.path().join("e2e.json");
    let custom_curve = dir.path().join("curves/e2e.csv");
    let code = mccrf(&[
        "train", "--data", p(&data), "--stage", "end2end", "--model-in", p(&model), "--epochs", "2",
        "--model-out", p(&e2e), "--curve", p(&custom_curve),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(std::fs::read_to_string(&custom_curve).unwrap().lines().count(), 1 + 3);
    let file = ModelFile::load(&e2e).unwrap();
    assert_eq!(file.history.len(), 2);
    assert_eq!(file.history[1].instances, 4);
    assert_eq!(file.stage.name(), "end2end");
}

#[test]
fn default_output_directory_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_mccrf");
    let out = Command::new(bin)
        .args(["gen", "--k", "2", "--per-cluster", "2", "--count", "2"])
        .env("MCCRF_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("data/inst-0001.json").exists());
}
