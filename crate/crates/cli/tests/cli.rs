use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gapweight(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapweight"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_BANDIT: &str = "seeds = [3]\n[network]\nm = 32\n[ogd]\nT = 60\nmu = 0.1\n[predictor]\nc_p = 0.1\n";

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "[policy]\ngama0 = 1.0\n");
    let o = gapweight(&["run-bandit", "--config", "c.toml"], tmp.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: config: unknown key policy.gama0"), "{err}");
}

#[test]
fn missing_dataset_is_an_ingest_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "c.toml",
        "[environment]\nkind = \"dataset\"\ndataset = \"nope.csv\"\n",
    );
    let o = gapweight(&["run-bandit", "--config", "c.toml"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: ingest:"), "{}", stderr(&o));
}

#[test]
fn bad_csv_cell_names_row_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "d.csv", "a,b,label\n1,2,0\n3,x,1\n");
    write(
        tmp.path(),
        "c.toml",
        "[environment]\nkind = \"dataset\"\ndataset = \"d.csv\"\nK = 2\n",
    );
    let o = gapweight(&["run-bandit", "--config", "c.toml"], tmp.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("row 2") && err.contains("\"b\""), "{err}");
}

#[test]
fn two_seeds_write_two_round_files_and_an_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", SMALL_BANDIT);
    let o = gapweight(&["run-bandit", "--config", "c.toml", "--out", "res", "--seeds", "1,2"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let res = tmp.path().join("res");
    for s in [1, 2] {
        let rounds = fs::read_to_string(res.join(format!("seed{s}/rounds.csv"))).unwrap();
        assert_eq!(rounds.lines().next(), Some("t,chosen,loss,cum_loss,cum_regret"));
        assert_eq!(rounds.lines().count(), 61);
        assert!(res.join(format!("seed{s}/stream.json")).exists());
    }
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(res.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["per_seed"].as_array().unwrap().len(), 2);
    assert!(result["aggregate"]["std"].as_f64().unwrap() >= 0.0);
    assert!(result.get("wall_clock_secs").is_none());
}

#[test]
fn replay_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", SMALL_BANDIT);
    let read = |p: &str| fs::read(tmp.path().join(p)).unwrap();
    let args = ["run-bandit", "--config", "c.toml", "--out", "res", "--seeds", "4,5"];
    assert!(gapweight(&args, tmp.path()).status.success());
    let first = (read("res/result.json"), read("res/seed4/rounds.csv"), read("res/seed5/summary.json"));
    fs::remove_dir_all(tmp.path().join("res")).unwrap();
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "2"]);
    assert!(gapweight(&threaded, tmp.path()).status.success());
    assert_eq!(first, (read("res/result.json"), read("res/seed4/rounds.csv"), read("res/seed5/summary.json")));
}

#[test]
fn uniform_policy_mean_loss_near_three_quarters() {
    // one-hot classification losses with K = 4: a uniform draw errs with probability 3/4
    let tmp = tempfile::tempdir().unwrap();
    let t = 4000.0;
    write(
        tmp.path(),
        "c.toml",
        "[ogd]\nT = 4000\n[policy]\nkind = \"uniform\"\n[environment]\nkind = \"classes\"\nK = 4\n",
    );
    let o = gapweight(&["run-bandit", "--config", "c.toml", "--out", "u"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("u/result.json")).unwrap()).unwrap();
    let mean = result["per_seed"][0]["cum_loss"].as_f64().unwrap() / t;
    let sd = (0.75f64 * 0.25 / t).sqrt();
    assert!((mean - 0.75).abs() <= 3.0 * sd, "mean loss {mean}");
}

#[test]
fn plot_has_one_point_per_round() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", SMALL_BANDIT);
    assert!(gapweight(&["run-bandit", "--config", "c.toml", "--out", "res"], tmp.path()).status.success());
    let o = gapweight(&["plot", "res", "--out", "plots"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["res-seed3.svg", "overlay.svg"] {
        let svg = fs::read_to_string(tmp.path().join("plots").join(name)).unwrap();
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let points = poly.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(points.split(' ').count(), 60);
    }
}

#[test]
fn regression_bounds_and_diagnose_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "c.toml",
        "[network]\nm = 32\n[ogd]\nT = 50\nmu = 0.1\ncomparator_epochs = 10\n[predictor]\nc_p = 0.1\n\
         [environment]\nkind = \"teacher\"\n[diagnostics]\nwidths = [16, 32]\nhessian_samples = 3\nprobes = 5\n\
         gradient_checks = 1\npl_rounds = 30\nconvexity_pairs = 5\ninterpolation_points = 5\ninterpolation_epochs = 5\n\
         ntk_contexts = 5\n",
    );
    for (cmd, file) in [
        ("run-regression", "reg/seed0/trace.csv"),
        ("analyze-bounds", "reg/bounds.json"),
        ("diagnose", "reg/diagnostics.json"),
    ] {
        let o = gapweight(&[cmd, "--config", "c.toml", "--out", "reg"], tmp.path());
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        assert!(tmp.path().join(file).exists(), "{file}");
    }
    let bounds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("reg/bounds.json")).unwrap()).unwrap();
    assert_eq!(bounds["n"], 40);
    assert!(bounds["constructed"]["cert_nucb"].as_bool().unwrap());
}

#[test]
fn duplicate_contexts_are_reported_singular() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "x.json", "[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]");
    write(tmp.path(), "c.toml", "[network]\nm = 16\n[bounds]\nT = 3\nK = 1\ncontexts = \"x.json\"\n");
    let o = gapweight(&["analyze-bounds", "--config", "c.toml", "--out", "b"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: singular:"), "{}", stderr(&o));
}
