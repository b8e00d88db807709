//! CSV output with fixed headers.

use std::fs::File;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::fpsolver::{DensityField, MassRecord};
use crate::localtime::LocalTimeCurve;
use crate::model::{DensitySlice, SpaceGrid, TimeGrid};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn write_all(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// `t,x,m` for every `stride`-th row.
pub fn write_field(path: &Path, field: &DensityField, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let g = *field.space_grid();
    let tg = *field.time_grid();
    let mut rows = Vec::new();
    for j in (0..field.n_rows()).filter(|j| j % stride == 0 || *j + 1 == field.n_rows()) {
        let t = tg.t(j);
        for (i, m) in field.row(j).iter().enumerate() {
            rows.push(vec![t.to_string(), g.x(i).to_string(), m.to_string()]);
        }
    }
    write_all(path, &["t", "x", "m"], rows)
}

/// `t,x,m` for a single slice.
pub fn write_slice(path: &Path, t: f64, slice: &DensitySlice) -> Result<()> {
    let g = slice.grid;
    let rows = slice.values.iter().enumerate().map(|(i, m)| vec![t.to_string(), g.x(i).to_string(), m.to_string()]);
    write_all(path, &["t", "x", "m"], rows)
}

/// `t,L,estimator,x,epsilon`; epsilon is empty for the density integral.
pub fn write_curves(path: &Path, curves: &[&LocalTimeCurve]) -> Result<()> {
    let mut rows = Vec::new();
    for c in curves {
        let eps = c.epsilon.map(|e| e.to_string()).unwrap_or_default();
        for (j, l) in c.values.iter().enumerate() {
            rows.push(vec![c.time_grid.t(j).to_string(), l.to_string(), c.estimator.name().into(), c.x.to_string(), eps.clone()]);
        }
    }
    write_all(path, &["t", "L", "estimator", "x", "epsilon"], rows)
}

/// `metric,slice_t,value`.
pub fn write_report(path: &Path, rows: &[(String, String, f64)]) -> Result<()> {
    write_all(path, &["metric", "slice_t", "value"], rows.iter().map(|(m, t, v)| vec![m.clone(), t.clone(), v.to_string()]))
}

/// `t,mass,min_value`.
pub fn write_ledger(path: &Path, ledger: &[MassRecord]) -> Result<()> {
    write_all(
        path,
        &["t", "mass", "min_value"],
        ledger.iter().map(|r| vec![r.t.to_string(), r.mass.to_string(), r.min_value.to_string()]),
    )
}

/// `iteration,sup_diff`.
pub fn write_history(path: &Path, history: &[f64]) -> Result<()> {
    write_all(
        path,
        &["iteration", "sup_diff"],
        history.iter().enumerate().map(|(i, d)| vec![(i + 1).to_string(), d.to_string()]),
    )
}

/// Reads a `t,x,m` file written by [`write_field`] on uniform lattices.
pub fn read_field(path: &Path) -> Result<DensityField> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["t", "x", "m"] {
        return Err(invalid(format!("{}: expected header t,x,m", path.display())));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| invalid(format!("{}: bad number in record {:?}", path.display(), rec)))
        };
        let (t, x, m) = (num(0)?, num(1)?, num(2)?);
        if times.last() != Some(&t) {
            times.push(t);
            rows.push(Vec::new());
        }
        if times.len() == 1 {
            xs.push(x);
        }
        rows.last_mut().expect("row pushed above").push(m);
    }
    if times.len() < 2 || xs.len() < 2 {
        return Err(invalid(format!("{}: a field needs at least two times and two nodes", path.display())));
    }
    let sg = SpaceGrid::new(xs[0], *xs.last().expect("nonempty"), xs.len() - 1)?;
    let tg = TimeGrid::new(*times.last().expect("nonempty") - times[0], times.len() - 1)?;
    if times[0] != 0.0 {
        return Err(invalid(format!("{}: field must start at t = 0", path.display())));
    }
    DensityField::from_rows(tg, sg, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let sg = SpaceGrid::new(-1.0, 1.0, 8).unwrap();
        let rows: Vec<Vec<f64>> = (0..5).map(|j| (0..9).map(|i| 0.1 * (i + j) as f64).collect()).collect();
        let f = DensityField::from_rows(tg, sg, rows).unwrap();
        write_field(&p, &f, 1).unwrap();
        let g = read_field(&p).unwrap();
        assert_eq!(g.rows(), f.rows());
        assert_eq!(g.space_grid(), f.space_grid());
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,x,m\n"));
    }

    #[test]
    fn headers_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        write_history(&p, &[1.0, 0.5]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "iteration,sup_diff\n1,1\n2,0.5\n");
        write_report(&p, &[("a.l1".into(), "max".into(), 0.25)]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "metric,slice_t,value\na.l1,max,0.25\n");
    }
}
