use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrsens_cli::run::PLOT_HEADER;
use lrsens_cli::Config;

const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

fn lrsens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrsens"))
        .args(args)
        .env_remove("LRSENS_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_to(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lrsens(&args)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

const SMALL_BD: &str = "model = \"birth-death\"\nseed = 3\ncheckpoints = [4.0, 8.0]\nreplicas = 100\n\
    estimators = [\"i2c\", \"i3c\", \"i4c\", \"i5\", \"cov\"]\nepsilon = 0.1\nwindow = 2.0\n";

#[test]
fn list_models_names_every_builtin() {
    let o = lrsens(&["list-models"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["logistic", "p53", "birth-death"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from {text}");
    }
    assert!(text.contains("b_x a_x a_k k b_y a_0 a_y"));
}

#[test]
fn parse_reports_dimensions_and_canonical_form() {
    let file = Path::new(ROOT).join("models/p53.rxn");
    let o = lrsens(&["parse", file.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("3 species, 5 reactions, 7 parameters"));

    let o = lrsens(&["parse", file.to_str().unwrap(), "--canonical"]);
    assert!(o.status.success());
    assert_eq!(o.stdout, std::fs::read(&file).unwrap());
}

#[test]
fn parse_error_names_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.rxn",
        "species x = 0\nparam k = 1\nx -> @ massaction(k)\n",
    );
    let o = lrsens(&["parse", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("bad.rxn: 3:6:"), "{err}");
}

#[test]
fn zero_replicas_is_rejected_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "zero.toml",
        "model = \"birth-death\"\nseed = 1\ncheckpoints = [1.0]\nreplicas = 0\n",
    );
    let o = run_to(&cfg, &dir.path().join("out"), &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`replicas`"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "typo.toml",
        "model = \"birth-death\"\nseed = 1\ncheckpoints = [1.0]\nreplicas = 10\nreplica = 5\n",
    );
    let o = run_to(&cfg, &dir.path().join("out"), &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("replica"), "{}", stderr(&o));
}

#[test]
fn one_estimator_one_checkpoint_gives_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p53.toml",
        &format!(
            "model = \"{}/models/p53.rxn\"\nseed = 4\ncheckpoints = [1.0]\nreplicas = 20\nestimators = [\"i3c\"]\n",
            ROOT
        ),
    );
    let out = dir.path().join("out");
    let o = run_to(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(out.join("plotdata.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), PLOT_HEADER);
    assert_eq!(reader.records().count(), 3 * 7);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report_i3c.json")).unwrap()).unwrap();
    assert_eq!(json["estimator"], "i3c");
    assert_eq!(json["settings"]["replicas"], 20);
    assert_eq!(json["reports"].as_array().unwrap().len(), 1);
}

#[test]
fn plot_rows_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bd.toml", SMALL_BD);
    let out = dir.path().join("out");
    assert!(run_to(&cfg, &out, &[]).status.success());
    let mut reader = csv::Reader::from_path(out.join("plotdata.csv")).unwrap();
    let keys: Vec<(String, f64, String, String)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].to_string(),
                r[1].parse().unwrap(),
                r[2].to_string(),
                r[3].to_string(),
            )
        })
        .collect();
    assert_eq!(keys.len(), 5 * 2 * 2);
    assert!(keys.windows(2).all(|w| w[0].partial_cmp(&w[1]).unwrap().is_lt()));
}

#[test]
fn outputs_are_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bd.toml", SMALL_BD);
    let outs: Vec<PathBuf> = ["1", "1", "8", "8"]
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let out = dir.path().join(format!("out{i}"));
            let o = run_to(&cfg, &out, &["--workers", w]);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    let reference = read_dir_sorted(&outs[0]);
    assert_eq!(reference.len(), 5 + 2);
    for out in &outs[1..] {
        assert!(read_dir_sorted(out) == reference, "{} differs", out.display());
    }
}

#[test]
fn seed_override_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bd.toml", SMALL_BD);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_to(&cfg, &a, &[]).status.success());
    assert!(run_to(&cfg, &b, &["--seed", "99"]).status.success());
    let pa = std::fs::read(a.join("plotdata.csv")).unwrap();
    let pb = std::fs::read(b.join("plotdata.csv")).unwrap();
    assert_ne!(pa, pb);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(b.join("report_cov.json")).unwrap()).unwrap();
    assert_eq!(json["settings"]["seed"], 99);
}

#[test]
fn shipped_configs_carry_the_experiment_settings() {
    let fig1b = Config::load(&Path::new(ROOT).join("configs/logistic_fig1b.toml")).unwrap();
    fig1b.validate().unwrap();
    assert_eq!(fig1b.checkpoints, vec![15.0, 30.0, 45.0, 60.0]);
    assert_eq!(fig1b.replicas, 1200);
    assert_eq!(fig1b.epsilon, Some(0.01));
    assert_eq!(fig1b.window, Some(10.0));
    assert_eq!(fig1b.steps, Some(12_000));
    let ids: Vec<&str> = fig1b.estimators.iter().map(|e| e.id()).collect();
    assert_eq!(ids, ["i1", "i2", "i2c", "i3", "i3c", "i4c", "i5"]);

    let fig3 = Config::load(&Path::new(ROOT).join("configs/p53_fig3.toml")).unwrap();
    fig3.validate().unwrap();
    assert_eq!(fig3.checkpoints.last(), Some(&50.0));
    assert_eq!(fig3.epsilon, Some(0.01));
    assert_eq!(fig3.replicas, 10_000);
    assert_eq!(fig3.cfd_replicas(), 1000);

    Config::load(&Path::new(ROOT).join("configs/birth_death.toml"))
        .unwrap()
        .validate()
        .unwrap();
}
