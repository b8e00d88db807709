//! Distances between density slices, fields and curves.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::closedform::reconstruct_state;
use crate::error::{Error, Result};
use crate::fpsolver::DensityField;
use crate::model::DensitySlice;

/// Distances at one time slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceMetrics {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub sup: f64,
    pub first_moment_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub label: String,
    pub slices: Vec<SliceMetrics>,
    pub metadata: BTreeMap<String, String>,
}

impl ComparisonReport {
    pub fn terminal(&self) -> SliceMetrics {
        *self.slices.last().expect("report has at least one slice")
    }

    pub fn max_l1(&self) -> f64 {
        self.slices.iter().fold(0.0, |a, s| a.max(s.l1))
    }

    pub fn max_l2(&self) -> f64 {
        self.slices.iter().fold(0.0, |a, s| a.max(s.l2))
    }

    pub fn max_sup(&self) -> f64 {
        self.slices.iter().fold(0.0, |a, s| a.max(s.sup))
    }

    /// Rows (metric, slice_t, value): every slice, then the maxima with slice_t = "max".
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for s in &self.slices {
            let t = format!("{}", s.t);
            out.push((format!("{}.l1", self.label), t.clone(), s.l1));
            out.push((format!("{}.l2", self.label), t.clone(), s.l2));
            out.push((format!("{}.sup", self.label), t.clone(), s.sup));
            out.push((format!("{}.first_moment_diff", self.label), t, s.first_moment_diff));
        }
        out.push((format!("{}.l1", self.label), "max".into(), self.max_l1()));
        out.push((format!("{}.l2", self.label), "max".into(), self.max_l2()));
        out.push((format!("{}.sup", self.label), "max".into(), self.max_sup()));
        out
    }
}

/// Trapezoid L1, L2 and sup distances and the first-moment difference.
pub fn compare_slices(t: f64, a: &DensitySlice, b: &DensitySlice) -> Result<SliceMetrics> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!("space grids {:?} vs {:?}", a.grid, b.grid)));
    }
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    let d2: Vec<f64> = d.iter().map(|v| v * v).collect();
    Ok(SliceMetrics {
        t,
        l1: a.grid.trapezoid(&d),
        l2: a.grid.trapezoid(&d2).sqrt(),
        sup: d.iter().copied().fold(0.0, f64::max),
        first_moment_diff: (reconstruct_state(a).value - reconstruct_state(b).value).abs(),
    })
}

/// L1 of the difference restricted to nodes in [lo, hi].
pub fn restricted_l1(a: &DensitySlice, b: &DensitySlice, lo: f64, hi: f64) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("restricted L1 needs equal grids".into()));
    }
    let g = a.grid;
    let d: Vec<f64> = (0..g.n_nodes())
        .map(|i| if (lo..=hi).contains(&g.x(i)) { (a.values[i] - b.values[i]).abs() } else { 0.0 })
        .collect();
    Ok(g.trapezoid(&d))
}

/// Slice-by-slice comparison of two fields on identical lattices.
pub fn compare_fields(a: &DensityField, b: &DensityField) -> Result<ComparisonReport> {
    a.check_same_grids(b)?;
    let slices = (0..a.n_rows())
        .map(|j| compare_slices(a.time_grid().t(j), &a.slice(j), &b.slice(j)))
        .collect::<Result<_>>()?;
    Ok(ComparisonReport { label: "field".into(), slices, metadata: BTreeMap::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SpaceGrid, TimeGrid};

    fn field(rows: Vec<Vec<f64>>) -> DensityField {
        let tg = TimeGrid::new(1.0, rows.len() - 1).unwrap();
        let sg = SpaceGrid::new(0.0, 1.0, rows[0].len() - 1).unwrap();
        DensityField::from_rows(tg, sg, rows).unwrap()
    }

    #[test]
    fn identical_fields_have_zero_metrics() {
        let f = field(vec![vec![0.0, 1.0, 2.0, 1.0, 0.0]; 3]);
        let r = compare_fields(&f, &f).unwrap();
        assert_eq!(r.max_l1(), 0.0);
        assert_eq!(r.max_sup(), 0.0);
        assert_eq!(r.terminal().first_moment_diff, 0.0);
    }

    #[test]
    fn one_cell_shift() {
        // indicator of height 1/dx at node 2 against node 3: hand count 2·1
        let dx = 0.25;
        let mut a = vec![0.0; 5];
        let mut b = vec![0.0; 5];
        a[2] = 1.0 / dx;
        b[3] = 1.0 / dx;
        let r = compare_fields(&field(vec![a.clone(), a]), &field(vec![b.clone(), b])).unwrap();
        assert!((r.terminal().l1 - 2.0).abs() < 1e-14);
        assert!((r.terminal().first_moment_diff - dx).abs() < 1e-14);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = field(vec![vec![0.0; 5]; 2]);
        let b = field(vec![vec![0.0; 6]; 2]);
        assert!(matches!(compare_fields(&a, &b), Err(Error::GridMismatch(_))));
    }
}
