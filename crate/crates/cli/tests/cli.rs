use std::path::Path;
use std::process::{Command, Output};

use dibgeo_core::baselines::{hausdorff_distance, Polyline, Region};
use dibgeo_core::{preset_dataset, Preset};
use serde_json::Value;

fn dibgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dibgeo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dibgeo(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn assert_svg(path: &Path) {
    let text = read(path);
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    read(path)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn polylines(path: &Path) -> Vec<(String, Vec<Polyline>)> {
    let mut out: Vec<(String, Vec<Polyline>)> = Vec::new();
    for row in csv_rows(path) {
        let p = [row[2].parse().unwrap(), row[3].parse().unwrap()];
        let piece: usize = row[1].parse().unwrap();
        if out.last().is_none_or(|(name, _)| *name != row[0]) {
            out.push((row[0].clone(), Vec::new()));
        }
        let lines = &mut out.last_mut().unwrap().1;
        if lines.len() <= piece {
            lines.push(Vec::new());
        }
        lines[piece].push(p);
    }
    out
}

#[test]
fn generate_writes_preset_sizes() {
    let csv = ok(&["generate", "three_equal", "--seed", "7"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x1,x2,label");
    assert_eq!(lines.len(), 151);

    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "single_blob", "--out", dir.path().to_str().unwrap()]);
    let rows = csv_rows(&dir.path().join("points.csv"));
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r[2] == "0"));
}

#[test]
fn invalid_preset_lists_valid_names() {
    let out = dibgeo(&["generate", "four_equal"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for p in Preset::ALL {
        assert!(err.contains(p.name()), "{err}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(dibgeo(&["sweep", "--out", d]).status.code(), Some(1));
    assert_eq!(dibgeo(&["cluster", "--dataset", "three_equal", "--out", d]).status.code(), Some(1));
    assert_eq!(dibgeo(&["bogus-command"]).status.code(), Some(1));
    assert_eq!(dibgeo(&["smooth-dump", "--dataset", "nowhere.csv", "--out", d]).status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,x2\n1,oops\n").unwrap();
    let out = dibgeo(&["cluster", "--dataset", bad.to_str().unwrap(), "--beta", "1", "--out", d]);
    assert_eq!(out.status.code(), Some(2));

    let out = dibgeo(&[
        "cluster", "--dataset", "three_equal", "--beta", "50", "--max-iter", "1", "--init-clusters", "16",
        "--max-nonconverged", "0", "--out", d,
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("assignment.csv").exists());
}

#[test]
fn smooth_dump_table_and_heat_map() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["smooth-dump", "--dataset", "three_equal", "--s", "2", "--bins", "32", "--out", dir.path().to_str().unwrap()]);
    let text = read(&dir.path().join("joint.csv"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 1024 + 1);
    assert_eq!(header[1], "cell_0");
    assert_eq!(*header.last().unwrap(), "row_sum");
    let mut rows = 0;
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields.len(), 1026);
        let sum: f64 = fields[1..1025].iter().sum();
        assert!((fields[1025] - 1.0).abs() <= 1e-12);
        assert!((sum - 1.0).abs() <= 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 150);
    assert_svg(&dir.path().join("joint.svg"));
}

#[test]
fn smooth_dump_refuses_huge_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dibgeo(&["smooth-dump", "--dataset", "three_equal", "--bins", "400", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lower --bins"));
}

#[test]
fn tiny_beta_gives_one_cluster() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["cluster", "--dataset", "three_equal", "--beta", "1e-9", "--out", dir.path().to_str().unwrap()]);
    let rows = csv_rows(&dir.path().join("assignment.csv"));
    assert_eq!(rows.len(), 150);
    assert!(rows.iter().all(|r| r[3] == "0"));
    let record: Value = serde_json::from_str(&read(&dir.path().join("cluster.json"))).unwrap();
    assert_eq!(record["n_c"], 1);
    assert_svg(&dir.path().join("cluster.svg"));
}

/// Fraction of points whose cluster maps to their label under the best
/// one-to-one relabelling.
fn permutation_accuracy(found: &[usize], truth: &[usize]) -> f64 {
    let k = 1 + found.iter().chain(truth).max().copied().unwrap_or(0);
    let mut counts = vec![vec![0usize; k]; k];
    for (&f, &t) in found.iter().zip(truth) {
        counts[f][t] += 1;
    }
    fn best(counts: &[Vec<usize>], row: usize, used: &mut Vec<bool>) -> usize {
        if row == counts.len() {
            return 0;
        }
        let mut top = 0;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                top = top.max(counts[row][c] + best(counts, row + 1, used));
                used[c] = false;
            }
        }
        top
    }
    best(&counts, 0, &mut vec![false; k]) as f64 / found.len() as f64
}

#[test]
fn sweep_selects_three_and_cluster_recovers_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let stdout = ok(&["sweep", "--dataset", "three_equal", "--s", "2", "--out", d]);
    assert!(stdout.contains("selected n_c=3"), "{stdout}");
    assert!(!stdout.contains("no robust"));

    let json: Value = serde_json::from_str(&read(&dir.path().join("solutions.json"))).unwrap();
    assert_eq!(json["summary"]["selection"]["n_clusters"], 3);
    let records = json["records"].as_array().unwrap();
    assert_eq!(records.len(), 60);
    let beta = records.iter().find(|r| r["n_c"] == 3).unwrap()["beta"].as_f64().unwrap();
    let frontier = read(&dir.path().join("frontier.csv"));
    assert!(frontier.starts_with("H,I,n_c,frac_info,on_hull,beta_min,beta_max,theta\n"));
    assert_svg(&dir.path().join("sweep.svg"));

    let cdir = dir.path().join("cluster");
    ok(&["cluster", "--dataset", "three_equal", "--s", "2", "--beta", &beta.to_string(), "--out", cdir.to_str().unwrap()]);
    let found: Vec<usize> = csv_rows(&cdir.join("assignment.csv")).iter().map(|r| r[3].parse().unwrap()).collect();
    let points = preset_dataset(Preset::ThreeEqual, 0);
    let accuracy = permutation_accuracy(&found, points.labels().unwrap());
    assert!(accuracy >= 0.95, "accuracy {accuracy}");
}

#[test]
fn single_blob_has_no_robust_solution() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["sweep", "--dataset", "single_blob", "--s", "2", "--init-clusters", "16", "--out", dir.path().to_str().unwrap()]);
    assert!(stdout.contains("no robust multi-cluster solution"), "{stdout}");
    let json: Value = serde_json::from_str(&read(&dir.path().join("solutions.json"))).unwrap();
    assert_eq!(json["summary"]["robust"], false);
    assert_eq!(json["summary"]["reference"]["dataset"], "three_equal");
}

#[test]
fn sweep_is_byte_identical_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"dataset": "three_unequal", "s": 4.0, "beta_steps": 12, "restarts": 2}"#).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "sweep", "--config", config.to_str().unwrap(), "--s", "2", "--reference", "none", "--out",
            out.to_str().unwrap(),
        ]);
        std::fs::read(out.join("solutions.json")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let json: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["s"], 2.0);
    assert_eq!(json["dataset"], "three_unequal");
    assert_eq!(json["schedule"].as_array().unwrap().len(), 12);
    assert_eq!(json["restarts"], 2);
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"dataset": "three_equal", "smoothing": 2}"#).unwrap();
    let out = dibgeo(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn boundaries_overlay_five_curves_inside_the_region() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["boundaries", "--dataset", "symmetric_plus_skew", "--resolution", "120", "--out", dir.path().to_str().unwrap()]);
    let curves = polylines(&dir.path().join("boundaries.csv"));
    let names: Vec<&str> = curves.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["kmeans", "gmm", "dib_s=0.5", "dib_s=2", "dib_s=4"]);
    let region = Region::around(&preset_dataset(Preset::SymmetricPlusSkew, 0), 0.0).unwrap();
    for (name, lines) in &curves {
        assert!(!lines.is_empty(), "{name} is empty");
        assert!(lines.iter().flatten().all(|p| region.contains(*p)), "{name} leaves the region");
    }
    assert_svg(&dir.path().join("boundaries.svg"));
}

#[test]
fn small_s_scores_follow_the_gmm_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let resolution = 200;
    ok(&[
        "boundaries", "--dataset", "symmetric_plus_skew", "--dib-mode", "scores", "--s-list", "0.001",
        "--resolution", &resolution.to_string(), "--out", dir.path().to_str().unwrap(),
    ]);
    let curves = polylines(&dir.path().join("boundaries.csv"));
    let get = |n: &str| &curves.iter().find(|(name, _)| name == n).unwrap().1;
    let region = Region::around(&preset_dataset(Preset::SymmetricPlusSkew, 0), 0.0).unwrap();
    let cell = region.spacing(resolution);
    let d = hausdorff_distance(get("dib_s=0.001"), get("gmm"));
    assert!(d <= 2.0 * cell[0].max(cell[1]), "distance {d}");
}
