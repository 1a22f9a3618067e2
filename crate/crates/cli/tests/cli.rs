use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn noisestab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisestab")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = noisestab(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(args: &[&str]) -> i32 {
    noisestab(args).status.code().expect("exit code")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn majority_influences_are_one() {
    let r = report(&["influences", "--model", "cube:n=3", "--fn", "majority"]);
    assert_eq!(r["command"], "influences");
    assert_eq!(r["passed"], true);
    let values = floats(&r["result"]["functions"][0]["values"]);
    assert_eq!(values.len(), 3);
    assert!(values.iter().all(|v| (v - 1.0).abs() < 1e-12), "{values:?}");
}

#[test]
fn halfspace_influence_is_the_density_at_the_threshold() {
    let r = report(&["influences", "--model", "gaussian:n=1", "--fn", "halfspace:a=0"]);
    let values = floats(&r["result"]["functions"][0]["values"]);
    assert!((values[0] - 0.398_942_280_401_432_7).abs() < 1e-12);
    assert_eq!(r["result"]["functions"][0]["kind"], "geometric");
}

#[test]
fn indicator_influences_include_set_influences() {
    let r = report(&["influences", "--model", "cube:n=3", "--fn", "dictator:i=1,values=01", "--r", "2"]);
    let f = &r["result"]["functions"][0];
    assert_eq!(floats(&f["set_influences"]), vec![0.0, 0.5, 0.0]);
    let r = report(&["influences", "--model", "symmetric:n=3", "--fn", "fixes:i=0"]);
    let f = &r["result"]["functions"][0];
    assert_eq!(f["labels"].as_array().unwrap().len(), 3);
    assert_eq!(floats(&f["set_influences"]).len(), 3);
}

#[test]
fn verify_builtins_passes() {
    let r = report(&["verify", "--model", "cube:n=5", "--fn", "majority", "--fn", "tribes:width=5", "--bound", "cube-l1"]);
    assert_eq!(r["passed"], true);
    assert_eq!(r["result"]["summary"]["violations"], 0);
    assert!(r["result"]["summary"]["instances"].as_u64().unwrap() > 0);
}

#[test]
fn verify_on_a_noise_grid() {
    let r = report(&[
        "verify", "--model", "gaussian:n=1", "--fn", "halfspace:a=0.5", "--bound", "gauss-sets", "--clock", "noise",
        "--grid", "0.1,0.3",
    ]);
    let instances = r["result"]["instances"].as_array().unwrap();
    assert_eq!(instances.len(), 2);
    assert_eq!(instances[0]["eta"].as_f64().unwrap(), 0.1);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&["verify", "--model", "cube:n=3", "--fn", "parity", "--bound", "no-such-bound"]), 2);
    assert_eq!(code(&["influences", "--model", "sphere:n=3", "--fn", "parity"]), 2);
    assert_eq!(code(&["influences", "--model", "cube:n=3"]), 2);
    assert_eq!(code(&["influences", "--model", "cube:n=4", "--fn", "majority"]), 2);
    assert_eq!(code(&["influences", "--model", "cube:n=3", "--fn", "halfspace:a=0"]), 2);
    assert_eq!(code(&["verify", "--model", "cube:n=3", "--fn", "parity"]), 2);
    assert_eq!(code(&["verify", "--model", "cube:n=3", "--fn", "parity", "--rho", "1"]), 2);
    assert_eq!(code(&["junta", "--model", "cube:n=3", "--fn", "parity", "--t", "1"]), 2);
    assert_eq!(code(&["junta", "--model", "symmetric:n=3", "--fn", "fixes:i=0", "--t", "1", "--eta", "0.1"]), 2);
    assert_eq!(code(&["influences", "--config", "/no/such/config.json"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = [
        "stability", "--model", "cube:n=4,p=0.3", "--fn", "random:count=3", "--grid", "0.2,0.6", "--mc", "2000",
        "--seed", "11",
    ];
    let a = noisestab(&args);
    let b = noisestab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let csv = dir.path().join(format!("{name}.csv"));
        let status = noisestab(&[
            "verify", "--model", "gaussian:n=2,degree=3", "--fn", "random:count=2", "--bound", "gauss-l1", "--grid",
            "0.2,1", "--seed", "4", "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
        ]);
        assert!(status.status.code().is_some_and(|c| c <= 1));
        (std::fs::read(out).unwrap(), std::fs::read(csv).unwrap())
    };
    assert_eq!(run("first"), run("second"));
}

#[test]
fn different_seeds_draw_different_functions() {
    let run = |seed: &str| report(&["stability", "--model", "cube:n=4", "--fn", "random", "--grid", "0.5", "--seed", seed]);
    assert_ne!(run("1")["result"], run("2")["result"]);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "run.json",
        r#"{"model": "cube:n=3", "functions": ["majority", "dictator:i=2"], "bound": {"bound": "cube-noise", "clock": "noise"}, "grid": [0.1, 0.4], "seed": 9}"#,
    );
    let from_file = noisestab(&["verify", "--config", &config]);
    let from_flags = noisestab(&[
        "verify", "--model", "cube:n=3", "--fn", "majority", "--fn", "dictator:i=2", "--bound", "cube-noise", "--clock",
        "noise", "--grid", "0.1,0.4", "--seed", "9",
    ]);
    let a: Value = serde_json::from_slice(&from_file.stdout).unwrap();
    let b: Value = serde_json::from_slice(&from_flags.stdout).unwrap();
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["passed"], b["passed"]);

    // flags override the file
    let r = report(&["influences", "--config", &config, "--fn", "parity"]);
    assert_eq!(r["result"]["functions"].as_array().unwrap().len(), 1);

    let bad = write(dir.path(), "bad.json", r#"{"model": "cube:n=3", "colour": 1}"#);
    assert_eq!(code(&["influences", "--config", &bad]), 2);
}

#[test]
fn function_files() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "and.txt", "# AND of two bits\n00 0\n10 0\n01 0\n11 1\n");
    let r = report(&["influences", "--model", "cube:n=2", "--fn", &format!("file:{table}")]);
    assert_eq!(floats(&r["result"]["functions"][0]["values"]), vec![0.5, 0.5]);
    assert_eq!(code(&["influences", "--model", "cube:n=3", "--fn", &format!("file:{table}")]), 2);
    let broken = write(dir.path(), "broken.txt", "00 0\n1x 1\n");
    assert_eq!(code(&["influences", "--model", "cube:n=2", "--fn", &format!("file:{broken}")]), 2);

    // f = x₁x₂ = He₁(x₁)He₁(x₂), so ‖∂₁f‖₁ = E|x₂| = √(2/π)
    let hermite = write(
        dir.path(),
        "f.json",
        r#"{"n": 2, "degree": 2, "terms": [{"index": [1, 1], "coefficient": 1.0}]}"#,
    );
    let r = report(&["influences", "--model", "gaussian:n=2", "--fn", &format!("hermite:{hermite}")]);
    let expected = (2.0 / std::f64::consts::PI).sqrt();
    for v in floats(&r["result"]["functions"][0]["values"]) {
        assert!((v - expected).abs() < 1e-7, "{v}");
    }
}

#[test]
fn stability_monte_carlo_agrees() {
    let r = report(&["stability", "--model", "gaussian:n=2", "--fn", "box:0,0.5", "--grid", "0.3,0.7", "--mc", "20000"]);
    assert_eq!(r["passed"], true);
    for row in r["result"]["rows"].as_array().unwrap() {
        let (exact, mc, se) = (row["exact"].as_f64().unwrap(), row["mc"].as_f64().unwrap(), row["mc_stderr"].as_f64().unwrap());
        assert!((exact - mc).abs() < 6.0 * se);
    }
    // majority at η: Cov = Σ (1−η)^{|S|} f̂(S)² = (3/4)(1−η) + (1/4)(1−η)³
    let r = report(&["stability", "--model", "cube:n=3", "--fn", "majority", "--grid", "0.5"]);
    let exact = r["result"]["rows"][0]["exact"].as_f64().unwrap();
    assert!((exact - (0.75 * 0.5 + 0.25 * 0.125)).abs() < 1e-14);
}

#[test]
fn cayley_stability_decreases_with_noise() {
    let r = report(&["stability", "--model", "torus:m=3,n=2", "--fn", "coordinate:k=0,value=0", "--grid", "0.1,0.5,0.9"]);
    let rows: Vec<f64> = r["result"]["rows"].as_array().unwrap().iter().map(|x| x["exact"].as_f64().unwrap()).collect();
    assert!(rows[0] > rows[1] && rows[1] > rows[2] && rows[2] > 0.0, "{rows:?}");
    assert!(rows[0] < 2.0 / 9.0);
}

#[test]
fn constants_match_closed_forms() {
    let r = report(&["constants", "--model", "cube:n=3,p=0.3"]);
    assert_eq!(r["passed"], true);
    assert!((r["result"]["log_sobolev"].as_f64().unwrap() - 0.944_178).abs() < 1e-5);
    let r = report(&["constants", "--model", "symmetric:n=4"]);
    assert!((r["result"]["spectral_gap"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let r = report(&["constants", "--model", "torus:m=4,n=2"]);
    assert!((r["result"]["spectral_gap"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let r = report(&["constants", "--model", "gaussian:n=3"]);
    assert_eq!(r["result"]["spectral_gap"].as_f64(), Some(1.0));
    assert_eq!(r["result"]["log_sobolev"].as_f64(), Some(1.0));
}

#[test]
fn junta_commands() {
    let r = report(&["junta", "--model", "torus:m=3,n=3", "--fn", "coordinate:k=1,value=0", "--epsilon", "0.1"]);
    assert_eq!(r["passed"], true);
    assert_eq!(r["result"]["functions"][0]["search"]["best"]["junta_size"], 1);

    let r = report(&["junta", "--model", "cube:n=4", "--fn", "dictator:i=2", "--t", "0.5", "--eta", "0.5"]);
    assert_eq!(r["result"]["functions"][0]["junta"]["coordinates"], serde_json::json!([2]));
    assert_eq!(r["result"]["functions"][0]["junta"]["l1_error"].as_f64(), Some(0.0));

    let r = report(&["junta", "--model", "gaussian:n=2,degree=3", "--fn", "random:count=2", "--t", "1", "--eta", "0.05"]);
    assert_eq!(r["passed"], true);
    for f in r["result"]["functions"].as_array().unwrap() {
        let junta = &f["junta"];
        assert!(junta["l2_tail"].as_f64().unwrap() <= junta["tail_bound"].as_f64().unwrap());
    }
}

#[test]
fn csv_tables_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let csv = csv.to_str().unwrap();
    report(&["influences", "--model", "cube:n=3", "--fn", "majority", "--csv", csv]);
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("function_id,coordinate,kind,value,set_influence"));
    assert_eq!(lines.count(), 3);
}
