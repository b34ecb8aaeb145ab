//! End-to-end behavior of the `popgame` binary: file formats, determinism,
//! overrides, and error classification.

use std::path::Path;
use std::process::{Command, Output};

fn popgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popgame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn generate_scenario(dir: &Path) -> std::path::PathBuf {
    let out = popgame(&["generate", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("scenario.json")
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = popgame(&[
            "generate",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let read = |p: &Path| std::fs::read(p.join("scenario.json")).unwrap();
    assert_eq!(read(&a), read(&b), "same seed produced different files");
    assert_ne!(read(&a), read(&c), "different seeds produced the same file");
    assert_eq!(
        std::fs::read(a.join("manifest.json")).unwrap(),
        std::fs::read(b.join("manifest.json")).unwrap()
    );
}

#[test]
fn trajectory_csv_has_the_documented_column_order() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let out = popgame(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# manifest_sha256 = "));
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "step,time,\
         x_p0_r0,x_p0_r1,x_p0_r2,x_p1_r0,x_p1_r1,x_p1_r2,x_p2_r0,x_p2_r1,x_p2_r2,\
         pi_p0_r0,pi_p0_r1,pi_p0_r2,pi_p1_r0,pi_p1_r1,pi_p1_r2,pi_p2_r0,pi_p2_r1,pi_p2_r2,\
         pibar_p0,pibar_p1,pibar_p2"
            .replace(' ', "")
    );

    // The embedded hash matches the manifest file's hash.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    let hash = manifest["manifest_sha256"].as_str().unwrap();
    assert_eq!(comment, format!("# manifest_sha256 = {hash}"));
}

#[test]
fn manifest_scenario_round_trips_to_the_same_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let run_dir = dir.path().join("run");
    let out = popgame(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--set",
        "integrator.max_time=5",
    ]);
    assert!(out.status.success());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap())
            .unwrap();
    // Re-feeding the manifest's scenario reproduces identical outputs.
    let extracted = dir.path().join("extracted.json");
    std::fs::write(
        &extracted,
        serde_json::to_string_pretty(&manifest["scenario"]).unwrap(),
    )
    .unwrap();
    let rerun_dir = dir.path().join("rerun");
    let out = popgame(&[
        "simulate",
        "--scenario",
        extracted.to_str().unwrap(),
        "--out",
        rerun_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(run_dir.join("trajectory.csv")).unwrap(),
        std::fs::read(rerun_dir.join("trajectory.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(run_dir.join("manifest.json")).unwrap(),
        std::fs::read(rerun_dir.join("manifest.json")).unwrap()
    );
}

#[test]
fn field_grid_row_count_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let out = popgame(&[
        "field",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid",
        "20",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    // Comment + header + 400 grid rows.
    assert_eq!(csv.lines().count(), 2 + 400);
    let data_rows = csv
        .lines()
        .skip(2)
        .filter(|l| l.ends_with(",0") || l.ends_with(",1"))
        .count();
    assert_eq!(data_rows, 400);
}

#[test]
fn unknown_scenario_keys_exit_2_with_the_offending_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        serde_json::json!({
            "seed": 1,
            "regions": [{"route_length_m": 1000.0, "reward_pool": 100.0, "reward_poool": 1.0}],
            "populations": [],
            "protocol": "hybrid"
        })
        .to_string(),
    )
    .unwrap();
    let out = popgame(&[
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("reward_poool"), "stderr: {stderr}");
    let wire: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(wire["error"], "schema");
}

#[test]
fn overrides_change_the_manifest_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let base = dir.path().join("base");
    let tweaked = dir.path().join("tweaked");
    for (out_dir, extra) in [(&base, None), (&tweaked, Some("populations.2.smith_alpha=0.8"))] {
        let mut args = vec![
            "simulate",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ];
        if let Some(setting) = extra {
            args.extend(["--set", setting]);
        }
        let out = popgame(&args);
        assert!(out.status.success());
    }
    let manifest = |p: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(p.join("manifest.json")).unwrap()).unwrap()
    };
    let base_manifest = manifest(&base);
    let tweaked_manifest = manifest(&tweaked);
    assert_ne!(
        base_manifest["manifest_sha256"],
        tweaked_manifest["manifest_sha256"]
    );
    assert_eq!(
        tweaked_manifest["scenario"]["populations"][2]["smith_alpha"],
        serde_json::json!(0.8)
    );
}

#[test]
fn agents_runs_are_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let run = |out_dir: &Path, set: &str| {
        let out = popgame(&[
            "agents",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--set",
            "stochastic.horizon=2",
            "--set",
            set,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run(&a, "stochastic.seed=5");
    run(&b, "stochastic.seed=5");
    run(&c, "stochastic.seed=6");
    let read = |p: &Path| std::fs::read(p.join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn converged_trajectory_rows_show_small_payoff_spreads() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let out = popgame(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--require-convergence",
    ]);
    assert!(out.status.success());

    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let last: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    for p in 0..3 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..3 {
            let share = last[header.iter().position(|h| *h == format!("x_p{p}_r{r}")).unwrap()];
            if share > 1e-3 {
                let pi = last[header.iter().position(|h| *h == format!("pi_p{p}_r{r}")).unwrap()];
                lo = lo.min(pi);
                hi = hi.max(pi);
            }
        }
        assert!(hi - lo <= 0.05, "population {p}: final spread {}", hi - lo);
    }
}

#[test]
fn rate_bound_violations_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let out = popgame(&[
        "agents",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "stochastic.rate_bound=1e-9",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let wire: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(wire["error"], "numerical");
    assert!(
        wire["message"].as_str().unwrap().contains("raise rate_bound"),
        "{stderr}"
    );
}

#[test]
fn km_suffixed_scenarios_normalize_to_meters() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate_scenario(dir.path());
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&scenario).unwrap()).unwrap();
    let meters = value["regions"][0]["route_length_m"].as_f64().unwrap();
    let obj = value["regions"][0].as_object_mut().unwrap();
    obj.remove("route_length_m");
    obj.insert("route_length_km".into(), serde_json::json!(meters / 1000.0));
    let km_path = dir.path().join("km.json");
    std::fs::write(&km_path, value.to_string()).unwrap();

    let out_dir = dir.path().join("km_run");
    let out = popgame(&[
        "simulate",
        "--scenario",
        km_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(
        manifest["scenario"]["regions"][0]["route_length_m"]
            .as_f64()
            .unwrap(),
        meters
    );
    assert!(manifest["scenario"]["regions"][0].get("route_length_km").is_none());
}
