//! Turning a point set into the tabulated joint `p(i, x)`.
//!
//! Each data point `i` gets a Gaussian of width `s` over a regular grid of
//! locations `x`; `p(i)` is uniform. The grid spans the bounding box of the
//! data padded by `3s`, and cells are flattened row-major with the first
//! coordinate outermost.

use std::io::Write;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::data::PointSet;
use crate::error::{Error, Result};

/// Exponents below this are flushed to an exact zero.
pub const UNDERFLOW_EXPONENT: f64 = -700.0;

pub const DEFAULT_BINS_PER_DIM: usize = 32;

/// Largest `N x M` table the dump routines will write.
pub const MAX_DUMP_ENTRIES: usize = 10_000_000;

/// Regular grid over the data domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    edges: Vec<Vec<f64>>,
}

impl Grid {
    /// Uniform grid with `bins` cells per dimension over `[lo[k], hi[k]]`.
    pub fn uniform(lo: &[f64], hi: &[f64], bins: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("grid bounds must be non-empty and of equal length".into()));
        }
        if bins < 1 {
            return Err(Error::InvalidArgument("bins_per_dim must be positive".into()));
        }
        let edges = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| {
                if !(b > a) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidArgument(format!("empty grid extent [{a}, {b}]")));
                }
                let w = (b - a) / bins as f64;
                let mut e: Vec<f64> = (0..=bins).map(|k| a + k as f64 * w).collect();
                e[bins] = b;
                Ok(e)
            })
            .collect::<Result<_>>()?;
        Ok(Grid { edges })
    }

    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn bins(&self, axis: usize) -> usize {
        self.edges[axis].len() - 1
    }

    /// Total number of cells `M`.
    pub fn n_cells(&self) -> usize {
        (0..self.dim()).map(|k| self.bins(k)).product()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e[0]).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e[e.len() - 1]).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.edges)
                .all(|(&v, e)| v >= e[0] && v <= e[e.len() - 1])
    }

    /// Per-axis bin indices of the cell holding `x` (upper edges inclusive).
    pub fn bin_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        if !self.contains(x) {
            return None;
        }
        Some(
            x.iter()
                .zip(&self.edges)
                .map(|(&v, e)| {
                    let b = e.len() - 1;
                    // partition_point gives the count of edges <= v
                    e.partition_point(|&edge| edge <= v).saturating_sub(1).min(b - 1)
                })
                .collect(),
        )
    }

    /// Flattened index of the cell holding `x`.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        self.bin_of(x).map(|b| self.flatten(&b))
    }

    pub fn flatten(&self, bins: &[usize]) -> usize {
        bins.iter()
            .enumerate()
            .fold(0, |acc, (k, &b)| acc * self.bins(k) + b)
    }

    pub fn unflatten(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let b = self.bins(k);
            out[k] = cell % b;
            cell /= b;
        }
        out
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        self.unflatten(cell)
            .iter()
            .zip(&self.edges)
            .map(|(&b, e)| 0.5 * (e[b] + e[b + 1]))
            .collect()
    }

    /// All cell centers, `M x d`, in flattened order.
    pub fn centers(&self) -> Array2<f64> {
        let m = self.n_cells();
        let mut out = Array2::zeros((m, self.dim()));
        for (cell, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for (k, v) in self.cell_center(cell).into_iter().enumerate() {
                row[k] = v;
            }
        }
        out
    }
}

/// Grid over the bounding box of `points` padded by `3s` on every side.
pub fn build_grid(points: &PointSet, s: f64, bins_per_dim: usize) -> Result<Grid> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("smoothing scale must be positive, got {s}")));
    }
    if bins_per_dim < 2 {
        return Err(Error::InvalidArgument("bins_per_dim must be at least 2".into()));
    }
    let (lo, hi) = points.bounding_box();
    let pad = 3.0 * s;
    let lo: Vec<f64> = lo.iter().map(|v| v - pad).collect();
    let hi: Vec<f64> = hi.iter().map(|v| v + pad).collect();
    Grid::uniform(&lo, &hi, bins_per_dim)
}

/// The tabulated `p(x|i)` with uniform `p(i)`, plus derived quantities the
/// solver reuses.
#[derive(Clone, Debug)]
pub struct JointDistribution {
    conditional: Array2<f64>,
    grid: Option<Grid>,
    smoothing: Option<f64>,
    /// `sum_x p(x|i) ln p(x|i)` per row.
    row_neg_entropy: Vec<f64>,
    /// `p(x) = sum_i p(i) p(x|i)`
    location_marginal: Vec<f64>,
    info_ix: f64,
}

impl JointDistribution {
    /// Wrap an `N x M` table of conditionals. Rows must be non-negative and
    /// sum to one.
    pub fn from_conditional(conditional: Array2<f64>, grid: Option<Grid>, smoothing: Option<f64>) -> Result<Self> {
        let (n, m) = conditional.dim();
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("empty conditional table".into()));
        }
        if let Some(g) = &grid {
            if g.n_cells() != m {
                return Err(Error::LengthMismatch {
                    left: g.n_cells(),
                    right: m,
                });
            }
        }
        for (i, row) in conditional.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {i} has a negative or non-finite entry")));
            }
            let total: f64 = row.sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("row {i} sums to {total}, not 1")));
            }
        }
        let conditional = conditional.as_standard_layout().into_owned();
        let row_neg_entropy: Vec<f64> = conditional
            .axis_iter(Axis(0))
            .map(|row| row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum())
            .collect();
        let location_marginal = conditional.mean_axis(Axis(0)).expect("n > 0").to_vec();
        let inv_n = 1.0 / n as f64;
        let info_ix = conditional
            .axis_iter(Axis(0))
            .zip(&row_neg_entropy)
            .map(|(row, &ne)| {
                let cross: f64 = row
                    .iter()
                    .zip(&location_marginal)
                    .filter(|(&p, _)| p > 0.0)
                    .map(|(&p, &px)| p * px.ln())
                    .sum();
                inv_n * (ne - cross)
            })
            .sum::<f64>()
            .max(0.0);
        Ok(JointDistribution {
            conditional,
            grid,
            smoothing,
            row_neg_entropy,
            location_marginal,
            info_ix,
        })
    }

    /// Number of data points `N`.
    pub fn n_points(&self) -> usize {
        self.conditional.nrows()
    }

    /// Number of location cells `M`.
    pub fn n_cells(&self) -> usize {
        self.conditional.ncols()
    }

    pub fn conditional(&self) -> &Array2<f64> {
        &self.conditional
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.conditional.row(i)
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        let m = self.n_cells();
        &self.conditional.as_slice().expect("standard layout")[i * m..(i + 1) * m]
    }

    /// `p(i)`, always `1/N`.
    pub fn point_mass(&self) -> f64 {
        1.0 / self.n_points() as f64
    }

    pub fn point_marginal(&self) -> Vec<f64> {
        vec![self.point_mass(); self.n_points()]
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    /// Smoothing width used to build the table, if it was smoothed.
    pub fn smoothing(&self) -> Option<f64> {
        self.smoothing
    }

    pub fn row_neg_entropy(&self) -> &[f64] {
        &self.row_neg_entropy
    }

    pub fn location_marginal(&self) -> &[f64] {
        &self.location_marginal
    }

    /// `I(i; x)` in nats.
    pub fn info_ix(&self) -> f64 {
        self.info_ix
    }

    /// The full joint `p(i, x) = p(x|i) / N`.
    pub fn joint_table(&self) -> Array2<f64> {
        &self.conditional * self.point_mass()
    }

    /// Write the table as CSV: `i,cell_0,...,cell_{M-1},row_sum`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let entries = self.n_points() * self.n_cells();
        if entries > MAX_DUMP_ENTRIES {
            return Err(Error::TooLarge {
                entries,
                limit: MAX_DUMP_ENTRIES,
            });
        }
        let mut out = std::io::BufWriter::new(out);
        write!(out, "i")?;
        for c in 0..self.n_cells() {
            write!(out, ",cell_{c}")?;
        }
        writeln!(out, ",row_sum")?;
        for (i, row) in self.conditional.axis_iter(Axis(0)).enumerate() {
            write!(out, "{i}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", row.sum())?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Gaussian bump of width `s` centred on `x`, evaluated at the cell centers
/// and normalized. Exponents are taken relative to the row maximum so the
/// row never underflows entirely; relative exponents below
/// [`UNDERFLOW_EXPONENT`] become exact zeros.
pub fn smoothed_row(centers: &Array2<f64>, x: &[f64], s: f64) -> Vec<f64> {
    let scale = -0.5 / (s * s);
    let mut row: Vec<f64> = centers
        .axis_iter(Axis(0))
        .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * scale)
        .collect();
    let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in row.iter_mut() {
        let e = *v - top;
        *v = if e < UNDERFLOW_EXPONENT { 0.0 } else { e.exp() };
    }
    let total: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= total;
    }
    row
}

/// Smooth every point with an isotropic Gaussian of width `s` over `grid`.
pub fn smooth_joint(points: &PointSet, s: f64, grid: &Grid) -> Result<JointDistribution> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "smoothing scale must be positive (got {s}); use delta_joint for unsmoothed data"
        )));
    }
    check_within(points, grid)?;
    let centers = grid.centers();
    let rows: Vec<Vec<f64>> = (0..points.len())
        .into_par_iter()
        .map(|i| smoothed_row(&centers, points.point(i), s))
        .collect();
    let table = stack_rows(rows, grid.n_cells());
    JointDistribution::from_conditional(table, Some(grid.clone()), Some(s))
}

/// Unsmoothed joint: each row is one-hot at the cell containing the point.
pub fn delta_joint(points: &PointSet, grid: &Grid) -> Result<JointDistribution> {
    check_within(points, grid)?;
    let m = grid.n_cells();
    let mut table = Array2::zeros((points.len(), m));
    for i in 0..points.len() {
        let cell = grid.cell_of(points.point(i)).expect("checked above");
        table[(i, cell)] = 1.0;
    }
    JointDistribution::from_conditional(table, Some(grid.clone()), None)
}

fn check_within(points: &PointSet, grid: &Grid) -> Result<()> {
    if points.dim() != grid.dim() {
        return Err(Error::LengthMismatch {
            left: points.dim(),
            right: grid.dim(),
        });
    }
    for i in 0..points.len() {
        if !grid.contains(points.point(i)) {
            return Err(Error::InvalidArgument(format!("point {i} lies outside the grid")));
        }
    }
    Ok(())
}

fn stack_rows(rows: Vec<Vec<f64>>, m: usize) -> Array2<f64> {
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, m), flat).expect("rows have M entries")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::kl_divergence;

    fn pts(rows: &[[f64; 2]]) -> PointSet {
        PointSet::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), None).unwrap()
    }

    #[test]
    fn grid_padding() {
        let p = pts(&[[0.0, 0.0], [10.0, 10.0], [3.0, 7.0]]);
        let g = build_grid(&p, 1.0, 32).unwrap();
        assert_eq!(g.lower(), vec![-3.0, -3.0]);
        assert_eq!(g.upper(), vec![13.0, 13.0]);
        assert_eq!(g.n_cells(), 1024);
        assert!(g.edges().iter().all(|e| e.windows(2).all(|w| w[1] > w[0])));

        let one = pts(&[[5.0, 5.0]]);
        let g = build_grid(&one, 2.0, 16).unwrap();
        assert_eq!(g.lower(), vec![-1.0, -1.0]);
        assert_eq!(g.upper(), vec![11.0, 11.0]);

        assert_eq!(build_grid(&p, 1.0, 2).unwrap().n_cells(), 4);
        assert!(build_grid(&p, 1.0, 1).is_err());
        assert!(build_grid(&p, 0.0, 8).is_err());
    }

    #[test]
    fn flatten_is_row_major_first_axis_outer() {
        let g = Grid::uniform(&[0.0, 0.0], &[4.0, 2.0], 4).unwrap();
        assert_eq!(g.flatten(&[1, 2]), 6);
        assert_eq!(g.unflatten(6), vec![1, 2]);
        assert_eq!(g.cell_of(&[1.2, 1.1]), Some(6));
        assert_eq!(g.cell_of(&[4.0, 2.0]), Some(15));
        assert_eq!(g.cell_of(&[4.1, 0.0]), None);
        assert_eq!(g.cell_center(6), vec![1.5, 1.25]);
    }

    #[test]
    fn rows_normalized() {
        let p = crate::data::preset_dataset(crate::data::Preset::ThreeUnequal, 3);
        for s in [0.1, 0.5, 1.0, 4.0] {
            let g = build_grid(&p, s, 24).unwrap();
            let j = smooth_joint(&p, s, &g).unwrap();
            for row in j.conditional().axis_iter(Axis(0)) {
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
            assert!(j.point_marginal().iter().all(|&v| v == 1.0 / 150.0));
        }
    }

    #[test]
    fn delta_limit_is_one_hot() {
        let g = Grid::uniform(&[0.0, 0.0], &[8.0, 8.0], 8).unwrap();
        let p = pts(&[[2.5, 5.5]]);
        let j = smooth_joint(&p, 0.01, &g).unwrap();
        let cell = g.cell_of(&[2.5, 5.5]).unwrap();
        assert!((j.row(0)[cell] - 1.0).abs() < 1e-12);

        // Off-center points still get a well-defined row.
        let q = pts(&[[2.9, 5.1]]);
        let j = smooth_joint(&q, 1e-3, &g).unwrap();
        assert!((j.row(0).sum() - 1.0).abs() < 1e-12);
        assert_eq!(j.row(0)[g.cell_of(&[2.9, 5.1]).unwrap()], 1.0);
    }

    #[test]
    fn mirror_points_have_mirrored_rows() {
        let g = Grid::uniform(&[-5.0, -5.0], &[5.0, 5.0], 20).unwrap();
        let p = pts(&[[-1.3, 0.7], [1.3, 0.7]]);
        let j = smooth_joint(&p, 1.1, &g).unwrap();
        for a in 0..20 {
            for b in 0..20 {
                let left = j.row(0)[g.flatten(&[a, b])];
                let right = j.row(1)[g.flatten(&[19 - a, b])];
                assert!((left - right).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn overlap_grows_with_smoothing() {
        let p = pts(&[[0.0, 0.0], [1.5, 0.0]]);
        let g = Grid::uniform(&[-30.0, -30.0], &[30.0, 30.0], 64).unwrap();
        let mut last = f64::INFINITY;
        for s in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let j = smooth_joint(&p, s, &g).unwrap();
            let kl = kl_divergence(j.row_slice(0), j.row_slice(1)).unwrap();
            assert!(kl <= last, "s={s}: {kl} > {last}");
            last = kl;
        }
    }

    #[test]
    fn delta_rows() {
        let g = Grid::uniform(&[0.0, 0.0], &[4.0, 4.0], 4).unwrap();
        let p = pts(&[[0.5, 0.5], [3.5, 0.5], [0.6, 0.4]]);
        let j = delta_joint(&p, &g).unwrap();
        assert_eq!(kl_divergence(j.row_slice(0), j.row_slice(1)).unwrap(), f64::INFINITY);
        assert_eq!(kl_divergence(j.row_slice(0), j.row_slice(2)).unwrap(), 0.0);
        for i in 0..3 {
            assert_eq!(j.row(i).sum(), 1.0);
        }
        // distinct cells: every row is a permutation of the same one-hot row
        let mut sorted: Vec<Vec<u64>> = (0..2)
            .map(|i| {
                let mut r: Vec<u64> = j.row(i).iter().map(|v| v.to_bits()).collect();
                r.sort();
                r
            })
            .collect();
        sorted.dedup();
        assert_eq!(sorted.len(), 1);
    }

    #[test]
    fn rejects_zero_width_and_outside_points() {
        let g = Grid::uniform(&[0.0, 0.0], &[4.0, 4.0], 4).unwrap();
        let p = pts(&[[0.5, 0.5]]);
        assert!(smooth_joint(&p, 0.0, &g).is_err());
        let far = pts(&[[10.0, 0.5]]);
        assert!(smooth_joint(&far, 1.0, &g).is_err());
        assert!(delta_joint(&far, &g).is_err());
    }

    #[test]
    fn csv_dump_shape() {
        let g = Grid::uniform(&[0.0, 0.0], &[4.0, 4.0], 4).unwrap();
        let p = pts(&[[0.5, 0.5], [3.0, 1.0]]);
        let j = smooth_joint(&p, 1.0, &g).unwrap();
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 16 + 2);
        for l in &lines[1..] {
            let sum: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
