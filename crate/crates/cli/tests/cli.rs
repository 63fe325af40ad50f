use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use topk_boost::data::{write_csv, Split};
use topk_testkit::synthetic_dataset;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topk-boost"))
}

fn fixtures(dir: &Path) -> (PathBuf, PathBuf) {
    let train = dir.join("toy-train.csv");
    let test = dir.join("toy-test.csv");
    write_csv(&synthetic_dataset(60, 5, 6, 1, Split::Train), &train).unwrap();
    write_csv(&synthetic_dataset(20, 5, 6, 1, Split::Test), &test).unwrap();
    (train, test)
}

fn run_args(train: &Path, test: &Path, out: &Path) -> Vec<String> {
    [
        "run", "--algo", "topada", "--k", "2", "--rho", "0.1", "--learners", "4", "--loops", "2", "--seeds", "3",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([
        "--dataset".into(),
        train.display().to_string(),
        "--test".into(),
        test.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ])
    .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = fixtures(dir.path());
    let out = dir.path().join("out");
    let o = bin().args(run_args(&train, &test, &out)).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next(), Some("seed,round,avg_weighted_rank_loss,explored,expert_index"));
    assert_eq!(lines.count(), 3 * (2 * 60 + 20));

    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    for key in ["algorithm=topada", "k=2", "rho=0.1", "seeds=0,1,2", "test_loss_mean=", "seed.2.alphas="] {
        assert!(summary.contains(key), "missing {key} in\n{summary}");
    }
}

#[test]
fn identical_runs_write_identical_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = fixtures(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = bin().args(run_args(&train, &test, out)).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(a.join("curves.csv")).unwrap(), fs::read(b.join("curves.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = fixtures(dir.path());
    let out = dir.path().join("out");

    let mut args = run_args(&train, &test, &out);
    let k = args.iter().position(|a| a == "--k").unwrap();
    args[k + 1] = "9".into();
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(2));

    let mut args = run_args(&train, &test, &out);
    let loops = args.iter().position(|a| a == "--loops").unwrap();
    args[loops + 1] = "21".into();
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(2));

    let o = bin().args(["run", "--algo", "nope"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = bin()
        .args(["run", "--algo", "topbbm", "--dataset"])
        .arg(&train)
        .arg("--test")
        .arg(&test)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "no preset and no --learners: {}", stderr(&o));
}

#[test]
fn runtime_failures_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let (_, test) = fixtures(dir.path());
    let bad = dir.path().join("bad.arff");
    fs::write(&bad, "@relation r\n@attribute x numeric\n@attribute y {0,1}\n@data\n0.5,2\n").unwrap();
    let out = dir.path().join("out");
    let o = bin().args(run_args(&bad, &test, &out)).args(["--labels", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn full_information_ignores_k_and_rho() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = fixtures(dir.path());
    let out = dir.path().join("out");
    let mut args = run_args(&train, &test, &out);
    let algo = args.iter().position(|a| a == "--algo").unwrap();
    args[algo + 1] = "fullbbm".into();
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("k=5\n") && summary.contains("rho=0\n"), "{summary}");
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(curves.lines().skip(1).all(|l| l.split(',').nth(3) == Some("0")));
}

#[test]
fn sweep_k_writes_one_curve_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = fixtures(dir.path());
    let out = dir.path().join("sweep");
    let mut args = run_args(&train, &test, &out);
    args[0] = "sweep-k".into();
    let algo = args.iter().position(|a| a == "--algo").unwrap();
    args[algo + 1] = "topbbm".into();
    let o = bin().args(&args).args(["--ks", "3,5"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for k in [3, 5] {
        let curve = fs::read_to_string(out.join(format!("curve_k{k}.csv"))).unwrap();
        assert!(curve.starts_with("round,mean_avg_weighted_rank_loss,std\n"));
        assert_eq!(curve.lines().count(), 1 + 2 * 60 + 20);
        assert!(out.join(format!("summary_k{k}.txt")).exists());
    }
}

#[test]
fn convert_arff_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let arff = dir.path().join("tiny.arff");
    fs::write(
        &arff,
        "% comment\n@relation tiny\n@attribute a numeric\n@attribute b numeric\n@attribute l1 {0,1}\n\
         @attribute l2 {0,1}\n@data\n{0.1,0.2,1,0}\n{0 0.5, 3 1}\n",
    )
    .unwrap();
    let csv = dir.path().join("tiny.csv");
    let o = bin()
        .args(["convert", "--labels", "2", "--input"])
        .arg(&arff)
        .arg("--output")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&csv).unwrap(), "f1,f2,l1,l2\n0.1,0.2,1,0\n0.5,0,0,1\n");
    let meta = fs::read_to_string(dir.path().join("tiny.csv.meta")).unwrap();
    assert!(meta.contains("m=2") && meta.contains("dim=2"));

    let o = bin().args(["convert", "--input"]).arg(&arff).arg("--output").arg(&csv).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "unknown label count must be a usage error");
}
