//! Point sets, Gaussian mixtures and the synthetic presets used throughout
//! the experiments.
//!
//! The preset parameters are fixed choices made for this crate (the
//! geometry was never published): unit-variance components whose
//! separations span several multiples of the component width, so that
//! structure at more than one scale is present.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Gaussian component of a mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Row-major `d x d` covariance.
    pub covariance: Vec<Vec<f64>>,
    pub weight: f64,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>, weight: f64) -> Result<Self> {
        let c = GaussianComponent {
            mean,
            covariance,
            weight,
        };
        c.validate(0)?;
        Ok(c)
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64, weight: f64) -> Result<Self> {
        let d = mean.len();
        let cov = (0..d)
            .map(|r| (0..d).map(|c| if r == c { variance } else { 0.0 }).collect())
            .collect();
        Self::new(mean, cov, weight)
    }

    pub fn diagonal(mean: Vec<f64>, variances: &[f64], weight: f64) -> Result<Self> {
        let d = mean.len();
        if variances.len() != d {
            return Err(Error::LengthMismatch {
                left: d,
                right: variances.len(),
            });
        }
        let cov = (0..d)
            .map(|r| (0..d).map(|c| if r == c { variances[r] } else { 0.0 }).collect())
            .collect();
        Self::new(mean, cov, weight)
    }

    /// 2-D component with covariance `R diag(eigenvalues) R^T`, `R` a
    /// rotation by `angle` radians.
    pub fn rotated_2d(mean: [f64; 2], eigenvalues: [f64; 2], angle: f64, weight: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let [a, b] = eigenvalues;
        let cov = vec![
            vec![a * c * c + b * s * s, (a - b) * c * s],
            vec![(a - b) * c * s, a * s * s + b * c * c],
        ];
        Self::new(mean.to_vec(), cov, weight)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.covariance
            .iter()
            .enumerate()
            .all(|(r, row)| row.iter().enumerate().all(|(c, &v)| r == c || v == 0.0))
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.covariance[r][c])
    }

    fn validate(&self, index: usize) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidMixture("component has zero dimensions".into()));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidMixture(format!(
                "component {index} has non-positive weight {}",
                self.weight
            )));
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMixture(format!("component {index} has a non-finite mean")));
        }
        if self.covariance.len() != d || self.covariance.iter().any(|r| r.len() != d) {
            return Err(Error::NotPositiveDefinite { component: index });
        }
        let m = self.covariance_matrix();
        let symmetric = (0..d).all(|r| {
            (0..d).all(|c| (m[(r, c)] - m[(c, r)]).abs() <= 1e-12 * (1.0 + m[(r, c)].abs()))
        });
        if !symmetric || m.iter().any(|v| !v.is_finite()) || m.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite { component: index });
        }
        Ok(())
    }

    /// Precomputed density evaluator.
    pub fn density(&self) -> GaussianDensity {
        GaussianDensity::new(&self.mean, &self.covariance_matrix())
            .expect("validated component has a positive-definite covariance")
    }
}

/// Log-density evaluator for a fixed Gaussian.
#[derive(Clone, Debug)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
}

impl GaussianDensity {
    pub fn new(mean: &[f64], covariance: &DMatrix<f64>) -> Option<Self> {
        let chol = covariance.clone().cholesky()?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(GaussianDensity {
            mean: DVector::from_column_slice(mean),
            precision: chol.inverse(),
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mu)^T Sigma^-1 (x - mu)`
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for r in 0..d {
            let dr = x[r] - self.mean[r];
            for c in 0..d {
                total += dr * self.precision[(r, c)] * (x[c] - self.mean[c]);
            }
        }
        total
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        -0.5 * (self.mahalanobis_sq(x) + self.log_det + d * (2.0 * std::f64::consts::PI).ln())
    }
}

/// A validated mixture with weights normalized to sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    components: Vec<GaussianComponent>,
    /// Sum of the weights as given, before normalization.
    total_weight: f64,
}

impl MixtureSpec {
    pub fn new(mut components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        let d = components[0].dim();
        for (i, c) in components.iter().enumerate() {
            c.validate(i)?;
            if c.dim() != d {
                return Err(Error::InvalidMixture(format!(
                    "component {i} has dimension {} but component 0 has {d}",
                    c.dim()
                )));
            }
        }
        let total_weight: f64 = components.iter().map(|c| c.weight).sum();
        for c in &mut components {
            c.weight /= total_weight;
        }
        Ok(MixtureSpec {
            components,
            total_weight,
        })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }
}

/// `N` observed points in `d` dimensions, with optional generative labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl PointSet {
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidArgument("a point set needs at least one point".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(Error::LengthMismatch {
                    left: points.nrows(),
                    right: l.len(),
                });
            }
        }
        let points = points.as_standard_layout().into_owned();
        Ok(PointSet { points, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("rows have inconsistent dimension".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(points, labels)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct generative labels, if labelled.
    pub fn n_labels(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in self.points.rows() {
            for (k, &v) in row.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (lo, hi)
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim())
            .map(|k| self.points.column(k).sum() / n)
            .collect()
    }
}

/// Draw `n` points from a mixture. Component indices are recorded as labels.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let d = spec.dim();
    let factors: Vec<DMatrix<f64>> = spec
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.covariance_matrix()
                .cholesky()
                .map(|ch| ch.l())
                .ok_or(Error::NotPositiveDefinite { component: i })
        })
        .collect::<Result<_>>()?;
    let chooser = WeightedIndex::new(spec.components().iter().map(|c| c.weight))
        .map_err(|e| Error::InvalidMixture(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for i in 0..n {
        let k = chooser.sample(&mut rng);
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        let comp = &spec.components()[k];
        let l = &factors[k];
        for r in 0..d {
            let mut v = comp.mean[r];
            for c in 0..=r {
                v += l[(r, c)] * z[c];
            }
            points[(i, r)] = v;
        }
        labels.push(k);
    }
    PointSet::new(points, Some(labels))
}

/// Named synthetic datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ThreeEqual,
    ThreeUnequal,
    FiveMultiscale,
    SingleBlob,
    SymmetricPlusSkew,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::ThreeEqual,
        Preset::ThreeUnequal,
        Preset::FiveMultiscale,
        Preset::SingleBlob,
        Preset::SymmetricPlusSkew,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ThreeEqual => "three_equal",
            Preset::ThreeUnequal => "three_unequal",
            Preset::FiveMultiscale => "five_multiscale",
            Preset::SingleBlob => "single_blob",
            Preset::SymmetricPlusSkew => "symmetric_plus_skew",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Preset::name).join(", ")
    }

    pub fn n_points(self) -> usize {
        match self {
            Preset::ThreeEqual | Preset::ThreeUnequal => 150,
            Preset::FiveMultiscale => 250,
            Preset::SingleBlob => 100,
            Preset::SymmetricPlusSkew => 1000,
        }
    }

    pub fn mixture(self) -> MixtureSpec {
        let unit = |x: f64, y: f64| GaussianComponent::isotropic(vec![x, y], 1.0, 1.0);
        let comps: Result<Vec<_>> = match self {
            Preset::ThreeEqual => {
                let h = 8.0 * 3f64.sqrt() / 2.0;
                vec![unit(0.0, 0.0), unit(8.0, 0.0), unit(4.0, h)].into_iter().collect()
            }
            Preset::ThreeUnequal => vec![unit(0.0, 0.0), unit(5.0, 0.0), unit(16.0, 0.0)]
                .into_iter()
                .collect(),
            Preset::FiveMultiscale => vec![
                unit(0.0, 0.0),
                unit(5.0, 0.0),
                unit(16.0, 0.0),
                unit(16.0, 12.0),
                unit(0.0, 12.0),
            ]
            .into_iter()
            .collect(),
            Preset::SingleBlob => vec![unit(0.0, 0.0)].into_iter().collect(),
            Preset::SymmetricPlusSkew => vec![
                unit(0.0, 0.0),
                GaussianComponent::rotated_2d([8.0, 0.0], [4.0, 1.0], std::f64::consts::FRAC_PI_4, 1.0),
            ]
            .into_iter()
            .collect(),
        };
        MixtureSpec::new(comps.expect("preset components are valid"))
            .expect("preset mixtures are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

pub fn preset_dataset(preset: Preset, seed: u64) -> PointSet {
    sample_mixture(&preset.mixture(), preset.n_points(), seed).expect("preset sampling cannot fail")
}

/// Load a point CSV: header `x1,...,xd[,label]`, one point per row.
pub fn load_points(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::NoPoints(path.to_path_buf()));
    }
    let has_label = headers.iter().next_back() == Some("label");
    let width = headers.len();
    let d = if has_label { width - 1 } else { width };
    if d == 0 {
        return Err(parse_err(1, "header has no coordinate columns".into()));
    }

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (k, field) in record.iter().take(d).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("field {} is not a number: {field:?}", k + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("field {} is not finite", k + 1)));
            }
            flat.push(v);
        }
        if has_label {
            let field = &record[d];
            let l: usize = field
                .parse()
                .map_err(|_| parse_err(line, format!("label is not a non-negative integer: {field:?}")))?;
            labels.push(l);
        }
    }
    if flat.is_empty() {
        return Err(Error::NoPoints(path.to_path_buf()));
    }
    let n = flat.len() / d;
    let points = Array2::from_shape_vec((n, d), flat).expect("shape checked per row");
    PointSet::new(points, has_label.then_some(labels))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn save_points(points: &PointSet, path: impl AsRef<Path>) -> Result<()> {
    let file = BufWriter::new(File::create(path.as_ref())?);
    write_points(points, file)
}

/// Write the point CSV to any writer. Floats use the shortest repr that
/// round-trips exactly.
pub fn write_points<W: std::io::Write>(points: &PointSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = points.dim();
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    if points.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| csv_error(Path::new("<output>"), e))?;
    for i in 0..points.len() {
        let mut row: Vec<String> = points.points().row(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = points.labels() {
            row.push(l[i].to_string());
        }
        w.write_record(&row).map_err(|e| csv_error(Path::new("<output>"), e))?;
    }
    w.flush()?;
    Ok(())
}
