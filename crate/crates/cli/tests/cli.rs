use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surveyforge_cli::demo::write_demo;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_surveyforge"));
    c.env_remove("SURVEYFORGE_LOG");
    c
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    bin().args([cmd, "--config"]).arg(config).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Demo inputs with the weight run done.
fn weighted_demo() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path(), 2016).unwrap();
    let o = run("weight", &dir.path().join("weight.json"), &dir.path().join("out"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    (dir, out)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn weight_diagnostics_have_mean_one_after_scaling() {
    let (_dir, out) = weighted_demo();
    let (header, rows) = read_csv(&out.join("diagnostics.csv"));
    assert_eq!(header, ["city", "stage", "N", "Mean", "Sd", "Min", "Max", "IQR", "CV"]);
    let scaled: Vec<_> =
        rows.iter().filter(|r| ["scaled", "final", "section_adjusted"].contains(&r[1].as_str())).collect();
    assert_eq!(scaled.len(), 6);
    for r in scaled {
        let mean: f64 = r[3].parse().unwrap();
        assert!((mean - 1.0).abs() < 1e-9, "{r:?}");
    }
    for stem in ["base", "trimmed", "raked", "scaled", "retrimmed", "final", "section_adjusted"] {
        let (h, rows) = read_csv(&out.join(format!("weights_{stem}.csv")));
        assert_eq!(h, ["woman_id", "stage", "weight"]);
        assert!(!rows.is_empty());
    }
    assert!(fs::read_to_string(out.join("nonresponse_models.txt")).unwrap().contains("Observations"));
}

#[test]
fn missing_raking_spec_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path(), 3).unwrap();
    fs::remove_file(dir.path().join("raking.json")).unwrap();
    let o = run("weight", &dir.path().join("weight.json"), &dir.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("raking spec"), "{}", stderr(&o));
}

#[test]
fn bad_trimming_quantile_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path(), 3).unwrap();
    let cfg = dir.path().join("weight.json");
    let text = fs::read_to_string(&cfg).unwrap().replace("\"second_upper_q\": 0.95", "\"second_upper_q\": 1.5");
    fs::write(&cfg, text).unwrap();
    assert_eq!(code(&run("weight", &cfg, &dir.path().join("out"))), 2);
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("weight.json");
    assert_eq!(code(&run("weight", &cfg, &dir.path().join("out"))), 2);
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(code(&run("weight", &cfg, &dir.path().join("out"))), 2);
}

#[test]
fn weight_and_prevalence_rerun_byte_identical() {
    let (dir, out) = weighted_demo();
    let o = run("prevalence", &dir.path().join("prevalence.json"), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = snapshot(&out);
    let again = dir.path().join("again");
    assert_eq!(code(&run("weight", &dir.path().join("weight.json"), &again)), 0);
    // the prevalence config reads weights from out/, so only the weight files are compared
    let second = snapshot(&again);
    for (name, bytes) in &second {
        let (_, other) = first.iter().find(|(n, _)| n == name).unwrap();
        assert_eq!(bytes, other, "{name}");
    }
    assert_eq!(code(&run("prevalence", &dir.path().join("prevalence.json"), &out)), 0);
    assert_eq!(snapshot(&out), first);
}

#[test]
fn prevalence_report_layout() {
    let (dir, out) = weighted_demo();
    assert_eq!(code(&run("prevalence", &dir.path().join("prevalence.json"), &out)), 0);
    let (header, rows) = read_csv(&out.join("report.csv"));
    assert_eq!(header, ["year", "city", "type", "window", "design", "n", "prev", "se", "ci_low", "ci_high"]);
    // two cities, six outcomes, three designs
    assert_eq!(rows.len(), 36);
    let tables = fs::read_to_string(out.join("tables.txt")).unwrap();
    assert!(tables.contains("Original") && tables.contains("Unweighted") && tables.contains("Weighted"));
}

#[test]
fn unit_weights_make_weighted_equal_unweighted() {
    let (dir, out) = weighted_demo();
    let (_, rows) = read_csv(&out.join("weights_section_adjusted.csv"));
    let mut wtr = csv::Writer::from_path(dir.path().join("unit.csv")).unwrap();
    wtr.write_record(["woman_id", "stage", "weight"]).unwrap();
    for r in &rows {
        wtr.write_record([r[0].as_str(), "base", "1"]).unwrap();
    }
    wtr.flush().unwrap();
    let cfg = dir.path().join("unit.json");
    fs::write(&cfg, r#"{"observations": "observations.csv", "weights": "unit.csv"}"#).unwrap();
    let res = dir.path().join("unit_out");
    assert_eq!(code(&run("prevalence", &cfg, &res)), 0);
    let (_, report) = read_csv(&res.join("report.csv"));
    let pick = |design: &str| -> Vec<Vec<String>> {
        report.iter().filter(|r| r[4] == design).map(|r| [&r[..4], &r[5..]].concat()).collect()
    };
    assert_eq!(pick("weighted"), pick("unweighted"));
}

#[test]
fn empty_cell_rows_are_omitted_with_warning() {
    let (dir, out) = weighted_demo();
    // weights only for the first city leave the second city's weighted cells empty
    let (_, rows) = read_csv(&out.join("weights_section_adjusted.csv"));
    let mut wtr = csv::Writer::from_path(dir.path().join("c1.csv")).unwrap();
    wtr.write_record(["woman_id", "stage", "weight"]).unwrap();
    for r in rows.iter().filter(|r| r[0].starts_with("C1/")) {
        wtr.write_record(r).unwrap();
    }
    wtr.flush().unwrap();
    let cfg = dir.path().join("c1.json");
    fs::write(&cfg, r#"{"observations": "observations.csv", "weights": "c1.csv"}"#).unwrap();
    let res = dir.path().join("c1_out");
    let o = run("prevalence", &cfg, &res);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("row omitted"));
    let (_, report) = read_csv(&res.join("report.csv"));
    assert!(report.iter().any(|r| r[1] == "C2" && r[4] == "original"));
    assert!(!report.iter().any(|r| r[1] == "C2" && r[4] == "weighted"));
}

#[test]
fn prevalence_without_weights_is_a_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path(), 4).unwrap();
    let o = run("prevalence", &dir.path().join("prevalence.json"), &dir.path().join("out"));
    assert_eq!(code(&o), 3);
}

fn write_report(path: &Path, rows: &[(&str, &str, &str, &str, f64, f64)]) {
    let mut wtr = csv::Writer::from_path(path).unwrap();
    wtr.write_record(["year", "city", "type", "window", "design", "n", "prev", "se", "ci_low", "ci_high"]).unwrap();
    for (city, t, w, design, prev, se) in rows {
        let vals = [
            "2016".to_string(),
            city.to_string(),
            t.to_string(),
            w.to_string(),
            design.to_string(),
            "500".into(),
            prev.to_string(),
            se.to_string(),
            (prev - 1.0).to_string(),
            (prev + 1.0).to_string(),
        ];
        wtr.write_record(&vals).unwrap();
    }
    wtr.flush().unwrap();
}

#[test]
fn compare_reproduces_the_recife_difference() {
    let dir = tempfile::tempdir().unwrap();
    write_report(
        &dir.path().join("report.csv"),
        &[("Recife", "sexual", "12m", "weighted", 0.89, 0.30), ("Recife", "sexual", "12m", "unweighted", 1.84, 0.40)],
    );
    let cfg = dir.path().join("compare.json");
    fs::write(&cfg, r#"{"reports": ["report.csv"]}"#).unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&run("compare", &cfg, &out)), 0);
    let (header, rows) = read_csv(&out.join("comparison.csv"));
    assert_eq!(header, ["year", "city", "type", "window", "diff_pct", "var_ratio"]);
    let diff: f64 = rows[0][4].parse().unwrap();
    assert!((diff - (-51.63)).abs() < 0.01, "{diff}");
    // sexual 12m is panel f
    let (_, f) = read_csv(&out.join("panel_f.csv"));
    assert_eq!(f.len(), 1);
    for p in ['a', 'b', 'c', 'd', 'e'] {
        assert!(read_csv(&out.join(format!("panel_{p}.csv"))).1.is_empty());
    }
}

#[test]
fn identical_designs_compare_to_zero_and_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for (t, w) in [("emotional", "lifetime"), ("physical", "12m")] {
        rows.push(("A", t, w, "weighted", 12.5, 1.5));
        rows.push(("A", t, w, "unweighted", 12.5, 1.5));
    }
    write_report(&dir.path().join("report.csv"), &rows);
    let cfg = dir.path().join("compare.json");
    fs::write(&cfg, r#"{"reports": ["report.csv"]}"#).unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&run("compare", &cfg, &out)), 0);
    let (_, rows) = read_csv(&out.join("comparison.csv"));
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[5].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn compare_without_weighted_run_is_a_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    write_report(&dir.path().join("report.csv"), &[("Recife", "sexual", "12m", "unweighted", 1.84, 0.4)]);
    let cfg = dir.path().join("compare.json");
    fs::write(&cfg, r#"{"reports": ["report.csv"]}"#).unwrap();
    assert_eq!(code(&run("compare", &cfg, &dir.path().join("out"))), 3);
    fs::write(&cfg, r#"{"reports": ["absent.csv"]}"#).unwrap();
    assert_eq!(code(&run("compare", &cfg, &dir.path().join("out"))), 3);
}

const SMALL_SCENARIO: &str = r#"{
    "name": "small",
    "seed": 9,
    "replicates": 40,
    "frame": {"seed": 10, "n_neighborhoods": 40, "household_response": [1.0, 1.0]},
    "sample": {"psus_per_stratum": 4, "tracts_per_psu": 2, "visits_per_tract": {"min": 8, "max": 8}},
    "outcomes": [{"vtype": "physical", "window": "lifetime"}],
    "assertions": {"max_abs_rel_bias": 0.5}
}"#;

#[test]
fn simulate_passes_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, SMALL_SCENARIO).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run("simulate", &cfg, &a);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&run("simulate", &cfg, &b)), 0);
    assert_eq!(snapshot(&a), snapshot(&b));
    let names: Vec<String> = snapshot(&a).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["assertions.csv", "small_replicates.csv", "small_summary.csv"]);
    let (_, reps) = read_csv(&a.join("small_replicates.csv"));
    assert_eq!(reps.len(), 40);
}

#[test]
fn simulate_seed_flag_changes_the_draws() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, SMALL_SCENARIO).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run("simulate", &cfg, &a)), 0);
    let o = bin().args(["simulate", "--seed", "77", "--config"]).arg(&cfg).arg("--out").arg(&b).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(a.join("small_replicates.csv")).unwrap(), fs::read(b.join("small_replicates.csv")).unwrap());
}

#[test]
fn zero_replicates_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, SMALL_SCENARIO.replace("\"replicates\": 40", "\"replicates\": 0")).unwrap();
    let o = run("simulate", &cfg, &dir.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("replicates"));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        SMALL_SCENARIO.replace("\"max_abs_rel_bias\": 0.5", "\"coverage\": [0.999, 1.0], \"max_abs_rel_bias\": 0.0"),
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&run("simulate", &cfg, &out)), 1);
    let (_, rows) = read_csv(&out.join("assertions.csv"));
    assert!(rows.iter().any(|r| r[2] == "false"));
}

#[test]
fn demo_chain_runs_end_to_end() {
    let (dir, out) = weighted_demo();
    assert_eq!(code(&run("prevalence", &dir.path().join("prevalence.json"), &out)), 0);
    let o = run("compare", &dir.path().join("compare.json"), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&out.join("comparison.csv"));
    assert_eq!(rows.len(), 12);
}
