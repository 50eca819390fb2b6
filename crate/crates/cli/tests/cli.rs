use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SMALL_SCHUR: &str = r#"
schema_version = 1
suite = "schur"

[region]
domain = "disc"

[sampling]
seed = 3
samples = 256

[projection]
p_list = [2.0]

[regularity]
eps_grid = [0.3]
depth = 6
layers = 16
samples_per_layer = 200
"#;

#[test]
fn successor_kernel_suite_passes_on_the_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify", "thm22", "--domain", "disc", "--alpha", "1", "--k", "1", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("[PASS] thm22"));
    let body = std::fs::read_to_string(dir.path().join("reports/thm22.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(body.lines().next().unwrap()).unwrap();
    assert_eq!(header["seed"], 7);
    let check = body
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["record"] == "check" && v["name"] == "max_rel_error")
        .unwrap();
    assert!(check["value"].as_f64().unwrap() <= 1e-8);
    assert!(dir.path().join("reports/thm22.csv").exists());
}

#[test]
fn forelli_rudin_sweep_with_one_delta_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify", "lemma34", "--k", "1", "--delta", "-0.5"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let csv = std::fs::read_to_string(dir.path().join("reports/lemma34.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",pass")), "{csv}");
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify", "nope"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
    assert_eq!(code(&run(dir.path(), &["verify", "thm22", "--domain", "moon"])), 2);
    assert_eq!(code(&run(dir.path(), &["verify", "thm22", "--samples", "0"])), 2);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 2);
    std::fs::write(dir.path().join("bad.toml"), "schema_version = 1\nsuite = \"thm22\"\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["verify", "thm22", "--config", "bad.toml"])), 2);
    std::fs::write(dir.path().join("v9.toml"), SMALL_SCHUR.replace("schema_version = 1", "schema_version = 9")).unwrap();
    assert_eq!(code(&run(dir.path(), &["verify", "schur", "--config", "v9.toml"])), 2);
}

#[test]
fn failing_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let strict = SMALL_SCHUR.replace("[projection]", "[tolerances]\nstability_factor = 1.0000001\n\n[projection]");
    std::fs::write(dir.path().join("strict.toml"), strict).unwrap();
    let out = run(dir.path(), &["verify", "schur", "--config", "strict.toml"]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    assert!(stdout(&out).contains("[FAIL]"));
}

#[test]
fn kernel_eval_prints_the_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["kernel", "eval", "--domain", "disc", "--z", "0.5", "--zeta", "0.5"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let expected = 1.0 / (std::f64::consts::PI * 0.75f64.powi(2));
    assert!((v["value"][0].as_f64().unwrap() - expected).abs() < 1e-12 * expected);
    let out = run(dir.path(), &["kernel", "eval", "--domain", "disc", "--z", "1.5", "--zeta", "0"]);
    assert_eq!(code(&out), 2);
    let out = run(
        dir.path(),
        &["kernel", "eval", "--domain", "disc", "--alpha", "1", "--k", "1", "--z", "0.1,0.2i", "--zeta", "0.3,-0.1"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn block_runs_merge_into_the_full_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.toml"), SMALL_SCHUR).unwrap();
    for range in ["0:2", "2:4"] {
        let out = run(dir.path(), &["verify", "schur", "--config", "s.toml", "--block-range", range]);
        assert_eq!(code(&out), 0, "{}", stdout(&out));
    }
    assert_eq!(code(&run(dir.path(), &["verify", "schur", "--config", "s.toml"])), 0);
    let out = run(
        dir.path(),
        &["merge", "reports/schur.blocks-0-2.jsonl", "reports/schur.blocks-2-4.jsonl", "-o", "merged/schur.jsonl"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let body = |p: &str| {
        let text = std::fs::read_to_string(dir.path().join(p)).unwrap();
        text.lines().skip(1).map(String::from).collect::<Vec<_>>()
    };
    assert_eq!(body("merged/schur.jsonl"), body("reports/schur.jsonl"));

    assert_eq!(code(&run(dir.path(), &["verify", "schur", "--config", "s.toml", "--seed", "4", "--block-range", "2:4", "--output-dir", "other"])), 0);
    let out = run(dir.path(), &["merge", "reports/schur.blocks-0-2.jsonl", "other/schur.blocks-2-4.jsonl", "-o", "bad.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash"));
}

#[test]
fn project_writes_lp_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["project", "--domain", "disc", "--samples", "400", "--p", "1.5,2,4", "--mode", "absolute", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("reports/project-lp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(code(&run(dir.path(), &["project", "--mode", "sideways"])), 2);
    assert_eq!(code(&run(dir.path(), &["project", "--p", "1"])), 2);
}
