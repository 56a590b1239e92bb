use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dibgeo_core::baselines::{
    decision_boundary, dib_point_score, gmm_em, hausdorff_distance, kmeans, write_polylines_csv, DibClassifier,
    GmmResult, Polyline, Region,
};
use dibgeo_core::selection::{frac_info_by_n_clusters, theta_by_n_clusters};
use dibgeo_core::smoothing::MAX_DUMP_ENTRIES;
use dibgeo_core::{
    beta_sweep, build_grid, dib_solve_from, dib_solve_restarts, information_curve, preset_dataset, select_n_clusters,
    smooth_joint, write_points, HardClustering, InformationCurve, JointDistribution, PointSet, Preset, Selection,
    SolutionRecord,
};
use serde::Serialize;

use crate::config::{load_dataset, DibMode, RunConfig};
use crate::error::CliError;
use crate::svg::{color, document, Panel};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn smoothed(points: &PointSet, s: f64, bins: usize) -> Result<JointDistribution, CliError> {
    let grid = build_grid(points, s, bins)?;
    Ok(smooth_joint(points, s, &grid)?)
}

fn check_convergence(records: &[SolutionRecord], limit: f64) -> Result<(), CliError> {
    let failed = records.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        log::warn!("{failed} of {} solves hit max_iter", records.len());
    }
    if failed as f64 > limit * records.len() as f64 {
        return Err(CliError::NonConvergence {
            failed,
            total: records.len(),
            limit,
        });
    }
    Ok(())
}

fn xy(points: &PointSet, i: usize) -> [f64; 2] {
    let p = points.point(i);
    [p[0], p[1]]
}

fn scatter_panel(points: &PointSet, labels: Option<&[usize]>, title: &str) -> Panel {
    let (lo, hi) = points.bounding_box();
    let mut panel = Panel::new(560.0, 520.0, (lo[0], hi[0]), (lo[1], hi[1]))
        .title(title)
        .labels("x1", "x2");
    let n_groups = labels.map_or(1, |l| l.iter().max().map_or(1, |m| m + 1));
    for g in 0..n_groups {
        let pts: Vec<[f64; 2]> = (0..points.len())
            .filter(|&i| labels.is_none_or(|l| l[i] == g))
            .map(|i| xy(points, i))
            .collect();
        let fill = if labels.is_some() { color(g) } else { "#555555" };
        panel.points(&pts, fill, 2.5);
    }
    panel
}

pub fn generate(preset: &str, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let preset: Preset = preset.parse()?;
    let points = preset_dataset(preset, seed);
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("points.csv");
            write_points(&points, create(&path)?)?;
            eprintln!("wrote {}", path.display());
        }
        None => write_points(&points, std::io::stdout().lock())?,
    }
    eprintln!("{preset}: N = {}, seed = {seed}", points.len());
    for (k, c) in preset.mixture().components().iter().enumerate() {
        eprintln!(
            "  component {k}: weight {:.3}, mean {:?}, covariance {:?}",
            c.weight, c.mean, c.covariance
        );
    }
    Ok(())
}

/// Heat-map quantization levels; adjacent cells with equal levels share a rectangle.
const HEAT_LEVELS: f64 = 32.0;

pub fn smooth_dump(cfg: &RunConfig) -> Result<(), CliError> {
    let points = cfg.load_dataset()?;
    let cells = cfg.bins.pow(points.dim() as u32);
    let entries = points.len().saturating_mul(cells);
    if entries > MAX_DUMP_ENTRIES {
        return Err(CliError::Usage(format!(
            "table would have {} x {cells} = {entries} entries (limit {MAX_DUMP_ENTRIES}); lower --bins to at most {}",
            points.len(),
            ((MAX_DUMP_ENTRIES / points.len()) as f64).powf(1.0 / points.dim() as f64).floor()
        )));
    }
    let joint = smoothed(&points, cfg.s, cfg.bins)?;
    let dir = cfg.create_out()?;
    joint.write_csv(create(&dir.join("joint.csv"))?)?;

    let (n, m) = (joint.n_points(), joint.n_cells());
    let top = joint.conditional().iter().copied().fold(0.0, f64::max);
    let mut panel = Panel::new(900.0, 520.0, (0.0, m as f64), (0.0, n as f64))
        .title(&format!("p(x|i), s = {}, {} cells", cfg.s, m))
        .labels("grid cell (row-major, x1 outer)", "point i");
    for i in 0..n {
        let row = joint.row_slice(i);
        let y = i as f64;
        let mut start = 0;
        while start < m {
            let level = (row[start] / top * HEAT_LEVELS).round();
            let mut end = start + 1;
            while end < m && (row[end] / top * HEAT_LEVELS).round() == level {
                end += 1;
            }
            if level > 0.0 {
                panel.cell([start as f64, y], [end as f64, y + 1.0], "#08306b", level / HEAT_LEVELS);
            }
            start = end;
        }
    }
    write_text(&dir.join("joint.svg"), &document(&[panel]))?;
    println!("joint: {n} x {m}, I(i;x) = {:.6} nats, written to {}", joint.info_ix(), dir.display());
    Ok(())
}

pub fn cluster(cfg: &RunConfig, beta: f64) -> Result<(), CliError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(CliError::Usage(format!("--beta must be finite and non-negative, got {beta}")));
    }
    let points = cfg.load_dataset()?;
    let joint = smoothed(&points, cfg.s, cfg.bins)?;
    let init = cfg.init_clusters_for(&points);
    let sol = dib_solve_restarts(&joint, beta, init, cfg.seed, cfg.restarts, &cfg.solver)?;
    let dir = cfg.create_out()?;

    let mut out = create(&dir.join("assignment.csv"))?;
    let coords: Vec<String> = (1..=points.dim()).map(|k| format!("x{k}")).collect();
    writeln!(out, "i,{},cluster", coords.join(","))?;
    for (i, c) in sol.clustering.assignment().iter().enumerate() {
        let p: Vec<String> = points.point(i).iter().map(f64::to_string).collect();
        writeln!(out, "{i},{},{c}", p.join(","))?;
    }
    out.flush()?;
    write_json(&dir.join("cluster.json"), &sol.record)?;
    if points.dim() == 2 {
        let panel = scatter_panel(
            &points,
            Some(sol.clustering.assignment()),
            &format!("DIB clusters, beta = {beta}, s = {}", cfg.s),
        );
        write_text(&dir.join("cluster.svg"), &document(&[panel]))?;
    } else {
        log::warn!("scatter plot skipped for {}-D data", points.dim());
    }
    let r = &sol.record;
    println!(
        "n_c = {}, H(T) = {:.6}, I(T;x) = {:.6}, L = {:.6}, converged = {}",
        r.n_clusters, r.entropy_t, r.info_tx, r.cost, r.converged
    );
    check_convergence(std::slice::from_ref(r), cfg.max_nonconverged)
}

#[derive(Serialize)]
struct SweepSummary {
    selection: Selection,
    /// Largest kink angle over solutions with more than one cluster.
    max_theta_multi: Option<f64>,
    reference: Option<ReferenceSummary>,
    robust: bool,
}

#[derive(Serialize)]
struct ReferenceSummary {
    dataset: String,
    max_theta_multi: Option<f64>,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    dataset: &'a str,
    s: f64,
    bins: usize,
    seed: u64,
    restarts: usize,
    init_clusters: usize,
    schedule: &'a [f64],
    summary: SweepSummary,
    records: &'a [SolutionRecord],
}

fn max_theta_multi(curve: &InformationCurve) -> Option<f64> {
    theta_by_n_clusters(curve)
        .into_iter()
        .filter(|(n, _)| *n > 1)
        .map(|(_, t)| t)
        .reduce(f64::max)
}

fn sweep_panels(records: &[SolutionRecord], curve: &InformationCurve, title: &str) -> Vec<Panel> {
    let frac = frac_info_by_n_clusters(records);
    let theta = theta_by_n_clusters(curve);
    let max_n = records.iter().map(|r| r.n_clusters).max().unwrap_or(1) as f64;
    let n_range = (0.5, max_n + 0.5);

    let mut plane = Panel::new(420.0, 380.0, (0.0, curve.solutions.iter().map(|r| r.entropy_t).fold(0.0, f64::max)), {
        let top = curve.solutions.iter().map(|r| r.info_tx).fold(0.0, f64::max);
        (0.0, top)
    })
    .title(title)
    .labels("H(T) [nats]", "I(T;x) [nats]");
    let all: Vec<[f64; 2]> = curve.solutions.iter().map(|r| [r.entropy_t, r.info_tx]).collect();
    plane.points(&all, "#999999", 2.5);
    let front: Vec<[f64; 2]> = curve.frontier().map(|(r, _)| [r.entropy_t, r.info_tx]).collect();
    plane.polyline(&front, color(0), 1.5, None);
    plane.points(&front, color(0), 3.0);

    let mut fp = Panel::new(420.0, 380.0, n_range, (0.0, 1.0))
        .title("fraction of spatial information")
        .labels("number of clusters", "I(T;x) / I(i;x)");
    let scattered: Vec<[f64; 2]> = records
        .iter()
        .filter_map(|r| r.frac_info.map(|f| [r.n_clusters as f64, f]))
        .collect();
    fp.points(&scattered, "#bbbbbb", 2.5);
    let best: Vec<[f64; 2]> = frac.iter().map(|(n, f)| [*n as f64, *f]).collect();
    fp.polyline(&best, color(0), 1.5, None);
    fp.points(&best, color(0), 3.5);

    let top = theta.values().copied().fold(0.0, f64::max);
    let mut tp = Panel::new(420.0, 380.0, n_range, (0.0, if top > 0.0 { top * 1.1 } else { 1.0 }))
        .title("kink angle")
        .labels("number of clusters", "theta [rad]");
    let pts: Vec<[f64; 2]> = theta.iter().map(|(n, t)| [*n as f64, *t]).collect();
    for p in &pts {
        tp.polyline(&[[p[0], 0.0], *p], color(1), 6.0, None);
    }
    tp.points(&pts, color(1), 3.5);
    vec![plane, fp, tp]
}

pub fn sweep(cfg: &RunConfig, reference: Option<&str>) -> Result<(), CliError> {
    let points = cfg.load_dataset()?;
    let joint = smoothed(&points, cfg.s, cfg.bins)?;
    let config = cfg.sweep_config(&points)?;
    let records = beta_sweep(&joint, &config)?;
    let curve = information_curve(&records);
    let selection = select_n_clusters(&curve)?;
    let own = max_theta_multi(&curve);

    let reference = match reference {
        Some(name) if name != cfg.dataset => {
            let ref_points = load_dataset(name, cfg.seed)?;
            let ref_joint = smoothed(&ref_points, cfg.s, cfg.bins)?;
            let mut ref_config = config.clone();
            ref_config.init_clusters = cfg.init_clusters_for(&ref_points);
            let ref_records = beta_sweep(&ref_joint, &ref_config)?;
            Some(ReferenceSummary {
                dataset: name.to_string(),
                max_theta_multi: max_theta_multi(&information_curve(&ref_records)),
            })
        }
        _ => None,
    };
    let robust = match &reference {
        Some(r) => own.unwrap_or(0.0) >= r.max_theta_multi.unwrap_or(0.0) && own.is_some(),
        None => own.is_some(),
    };

    let dir = cfg.create_out()?;
    curve.write_frontier_csv(create(&dir.join("frontier.csv"))?)?;
    let output = SweepOutput {
        dataset: &cfg.dataset,
        s: cfg.s,
        bins: cfg.bins,
        seed: cfg.seed,
        restarts: config.restarts,
        init_clusters: config.init_clusters,
        schedule: &config.schedule,
        summary: SweepSummary {
            selection: selection.clone(),
            max_theta_multi: own,
            reference,
            robust,
        },
        records: &records,
    };
    write_json(&dir.join("solutions.json"), &output)?;
    let title = format!("{}, s = {}", cfg.dataset, cfg.s);
    write_text(&dir.join("sweep.svg"), &document(&sweep_panels(&records, &curve, &title)))?;

    let fmt = |t: Option<f64>| t.map_or("none".to_string(), |t| format!("{t:.4}"));
    println!(
        "selected n_c={} (theta = {}{})",
        selection.n_clusters,
        fmt(selection.theta),
        if selection.fallback { ", fallback" } else { "" }
    );
    match &output.summary.reference {
        Some(r) => println!(
            "max theta over n_c>1: {} (reference {}: {})",
            fmt(own),
            r.dataset,
            fmt(r.max_theta_multi)
        ),
        None => println!("max theta over n_c>1: {}", fmt(own)),
    }
    if !robust {
        println!("no robust multi-cluster solution");
    }
    let failed = records.iter().filter(|r| !r.converged).count();
    println!("{} solutions, {failed} not converged, written to {}", records.len(), dir.display());
    check_convergence(&records, cfg.max_nonconverged)
}

pub struct BoundaryOptions {
    pub s_list: Vec<f64>,
    pub resolution: usize,
    pub mode: DibMode,
    /// Tradeoff used when extending DIB clusters to the lattice.
    pub classify_beta: f64,
    /// Tradeoff used to train the tabulated clusters.
    pub train_beta: f64,
}

fn dib_curve(
    points: &PointSet,
    cfg: &RunConfig,
    opts: &BoundaryOptions,
    s: f64,
    gmm: Option<&GmmResult>,
    start_labels: Option<&[usize]>,
    region: &Region,
) -> Result<Vec<Polyline>, CliError> {
    match opts.mode {
        DibMode::Scores => {
            let gmm = gmm.ok_or_else(|| CliError::Usage("scores mode needs a fitted GMM".into()))?;
            let classify = |x: &[f64]| {
                let mut best = (0, f64::NEG_INFINITY);
                for (k, c) in gmm.components.iter().enumerate() {
                    let v = dib_point_score(x, s, c, c.weight, opts.classify_beta);
                    if v > best.1 {
                        best = (k, v);
                    }
                }
                best.0
            };
            Ok(decision_boundary(classify, region, opts.resolution)?)
        }
        DibMode::Trained => {
            let joint = smoothed(points, s, cfg.bins)?;
            let options = cfg.solver;
            let sol = match start_labels {
                Some(labels) => dib_solve_from(
                    &joint,
                    opts.train_beta,
                    HardClustering::from_assignment(&joint, labels)?,
                    &options,
                )?,
                None => dib_solve_restarts(&joint, opts.train_beta, 2, cfg.seed, cfg.restarts, &options)?,
            };
            if sol.record.n_clusters < 2 {
                log::warn!("DIB at s = {s} kept {} cluster(s); no boundary", sol.record.n_clusters);
            }
            let clf = DibClassifier::new(&joint, &sol.clustering, opts.classify_beta)?;
            Ok(decision_boundary(|x: &[f64]| clf.classify(x), region, opts.resolution)?)
        }
    }
}

pub fn boundaries(cfg: &RunConfig, opts: &BoundaryOptions) -> Result<(), CliError> {
    if opts.s_list.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(CliError::Usage("--s-list entries must be positive".into()));
    }
    if opts.resolution < 2 {
        return Err(CliError::Usage("--resolution must be at least 2".into()));
    }
    let points = cfg.load_dataset()?;
    let region = Region::around(&points, 0.0)?;
    let mut failures = Vec::new();
    let mut curves: Vec<(String, Vec<Polyline>)> = Vec::new();

    let km = kmeans(&points, 2, cfg.seed, cfg.restarts.max(10));
    match &km {
        Ok(km) => curves.push(("kmeans".into(), decision_boundary(|x: &[f64]| km.predict(x), &region, opts.resolution)?)),
        Err(e) => failures.push(format!("k-means: {e}")),
    }
    let gmm = gmm_em(&points, 2, cfg.seed, cfg.restarts, 500, 1e-9);
    match &gmm {
        Ok(g) => curves.push(("gmm".into(), decision_boundary(|x: &[f64]| g.predict(x), &region, opts.resolution)?)),
        Err(e) => failures.push(format!("GMM: {e}")),
    }
    let gmm = gmm.ok();
    let start: Option<Vec<usize>> = match (&gmm, &km) {
        (Some(g), _) => Some((0..points.len()).map(|i| g.predict(points.point(i))).collect()),
        (None, Ok(k)) => Some(k.assignment.clone()),
        _ => None,
    };
    for &s in &opts.s_list {
        match dib_curve(&points, cfg, opts, s, gmm.as_ref(), start.as_deref(), &region) {
            Ok(lines) => curves.push((format!("dib_s={s}"), lines)),
            Err(e) => failures.push(format!("DIB s = {s}: {e}")),
        }
    }

    let dir = cfg.create_out()?;
    let named: Vec<(&str, &[Polyline])> = curves.iter().map(|(n, l)| (n.as_str(), l.as_slice())).collect();
    write_polylines_csv(create(&dir.join("boundaries.csv"))?, &named)?;

    let mut panel = scatter_panel(&points, points.labels(), &format!("decision boundaries ({:?} DIB)", opts.mode).to_lowercase());
    for (k, (name, lines)) in curves.iter().enumerate() {
        let stroke = color(k + 3);
        let dash = (k < 2).then_some("6,4");
        for line in lines {
            panel.polyline(line, stroke, 2.0, dash);
        }
        panel.legend(name, stroke);
    }
    write_text(&dir.join("boundaries.svg"), &document(&[panel]))?;

    let lookup: BTreeMap<&str, &[Polyline]> = named.iter().copied().collect();
    for (name, lines) in &named {
        let mut line = format!("{name}: {} piece(s)", lines.len());
        if name.starts_with("dib") {
            for base in ["gmm", "kmeans"] {
                if let Some(other) = lookup.get(base) {
                    line.push_str(&format!(", Hausdorff to {base} {:.4}", hausdorff_distance(lines, other)));
                }
            }
        }
        println!("{line}");
    }
    println!("{} curves written to {}", curves.len(), dir.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(failures.join("; ")))
    }
}
