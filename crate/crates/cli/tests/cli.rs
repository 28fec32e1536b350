use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsefilt"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let text = std::fs::read_to_string(scenario("smoke.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    let p = dir.join("scenario.json");
    std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
    p
}

#[test]
fn missing_scenario_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "/nonexistent/scenario.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/nonexistent/scenario.json"));
}

#[test]
fn schema_violations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), |v| v["trails"] = 3.into());
    let o = run(&["run", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let p = write_scenario(dir.path(), |v| v["iterations"] = 0.into());
    assert_eq!(run(&["run", p.to_str().unwrap()], dir.path()).status.code(), Some(2));

    let o = run(&["run", scenario("smoke.json").to_str().unwrap(), "--override", "noequals"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{ not json").unwrap();
    assert_eq!(run(&["predict", p.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn predict_rejects_unstable_step_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["predict", scenario("smoke.json").to_str().unwrap(), "--override", "mu=2.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("0 < mu < 2"), "{}", stderr(&o));
}

#[test]
fn predict_without_attractor_is_unbiased() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["predict", scenario("smoke.json").to_str().unwrap(), "--override", "rho=0"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("prediction.json")).unwrap()).unwrap();
    let bias = report["predicted_bias"].as_array().unwrap();
    assert_eq!(bias.len(), 64);
    assert!(bias.iter().all(|b| b.as_f64() == Some(0.0)));
    for key in ["predicted_mean", "steady_gain", "s_matrix"] {
        assert!(report.get(key).is_some());
    }
}

#[test]
fn predict_general_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["predict", scenario("ar1_toy.json").to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("prediction.csv")).unwrap();
    assert!(csv.starts_with("tap,w_opt,predicted_mean,predicted_bias\n"));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn run_is_reproducible_and_exportable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let smoke = scenario("smoke.json");
    let args = [
        "run",
        smoke.to_str().unwrap(),
        "--override",
        "trials=2",
        "--override",
        "iterations=600",
        "--stride",
        "5",
        "--seed",
        "9",
    ];
    let oa = run(&args, a.path());
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(run(&args, b.path()).status.success());
    for f in ["curves.csv", "msd.csv", "emse.csv", "bias.csv", "result.json", "scenario.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("scenario.json")).unwrap()).unwrap();
    assert_eq!(resolved["trials"], 2);
    assert_eq!(resolved["stride"], 5);
    assert_eq!(resolved["seed"], 9);
    let curves = std::fs::read_to_string(a.path().join("curves.csv")).unwrap();
    assert!(curves.starts_with("n,alg,tap,value\n"));
    assert_eq!(curves.lines().count(), 1 + 3 * (600 / 5 + 1) * 64);
    let bias = std::fs::read_to_string(a.path().join("bias.csv")).unwrap();
    assert!(bias.starts_with("alg,tap,w_opt,bias,predicted_bias\n"));

    let c = tempfile::tempdir().unwrap();
    let o = run(&["export", a.path().join("result.json").to_str().unwrap()], c.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["curves.csv", "msd.csv", "emse.csv", "bias.csv", "result.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(c.path().join(f)).unwrap(),
            "{f} changed on export"
        );
    }
    let o = run(&["export", c.path().join("missing.json").to_str().unwrap()], c.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn divergence_exit_is_configurable() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = scenario("smoke.json");
    let base = [
        "run",
        smoke.to_str().unwrap(),
        "--override",
        "mu=4",
        "--override",
        "trials=1",
        "--override",
        "iterations=2000",
    ];
    let o = run(&base, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("diverged"));
    let mut strict = base.to_vec();
    strict.extend(["--override", "fail_on_divergence=true"]);
    assert_eq!(run(&strict, dir.path()).status.code(), Some(1));
}

#[test]
fn verify_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["reductions", "transform", "projection", "discretization"] {
        let o = run(&["verify", suite], dir.path());
        assert!(o.status.success(), "{suite}: {}", String::from_utf8_lossy(&o.stdout));
        let out = String::from_utf8_lossy(&o.stdout);
        assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
    }
    assert_eq!(run(&["verify", "nonsense"], dir.path()).status.code(), Some(2));
}

#[test]
fn thread_setting_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify", "projection", "--out"])
        .arg(dir.path())
        .env("SPARSEFILT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bias_scenario_reaches_largest_tap() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", scenario("reference_bias.json").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .env("SPARSEFILT_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    let mut sum = 0.0;
    let mut count = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let n: usize = f[0].parse().unwrap();
        if f[2] == "37" && n > 22_500 {
            sum += f[3].parse::<f64>().unwrap();
            count += 1;
        }
    }
    let tail = sum / count as f64;
    assert!((tail - 0.9).abs() <= 0.01, "tap 37 tail mean {tail}");
}
