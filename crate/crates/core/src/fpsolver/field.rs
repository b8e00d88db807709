use crate::error::{invalid, Error, Result};
use crate::model::{DensitySlice, SpaceGrid, TimeGrid};

/// Total mass and minimum value after one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassRecord {
    pub t: f64,
    pub mass: f64,
    pub min_value: f64,
}

/// Origin of the first row of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldOrigin {
    /// Row 0 is an ordinary density.
    Regular,
    /// Row 0 stands for a point source at `x0` evolving as a Gaussian of
    /// variance `variance0 + diffusivity·t` over the first interval.
    PointSource { x0: f64, variance0: f64, diffusivity: f64 },
}

/// Values of the field at a fixed point at every step of the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub x: f64,
    pub time_grid: TimeGrid,
    pub values: Vec<f64>,
}

/// Per-step translation (or log-dilation) split into drift and noise parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub drift: f64,
    pub noise: f64,
}

/// Grid values m[j][i] of a density over a time × space lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    time_grid: TimeGrid,
    space_grid: SpaceGrid,
    rows: Vec<Vec<f64>>,
    pub ledger: Vec<MassRecord>,
    pub origin: FieldOrigin,
    pub probes: Vec<Probe>,
    pub trace: Option<Vec<StepTrace>>,
    pub warnings: Vec<String>,
}

impl DensityField {
    /// Field from rows, one per knot of `time_grid`.
    pub fn from_rows(time_grid: TimeGrid, space_grid: SpaceGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != time_grid.n_steps() + 1 {
            return Err(invalid(format!(
                "field has {} rows for {} knots",
                rows.len(),
                time_grid.n_steps() + 1
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != space_grid.n_nodes()) {
            return Err(invalid(format!("field row has {} values for {} nodes", r.len(), space_grid.n_nodes())));
        }
        let ledger = rows
            .iter()
            .enumerate()
            .map(|(j, r)| MassRecord {
                t: time_grid.t(j),
                mass: space_grid.trapezoid(r),
                min_value: r.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .collect();
        Ok(Self {
            time_grid,
            space_grid,
            rows,
            ledger,
            origin: FieldOrigin::Regular,
            probes: Vec::new(),
            trace: None,
            warnings: Vec::new(),
        })
    }

    /// Field m(t, x) = f(t, x) for t > 0 with a point-source first row.
    ///
    /// Row 0 is a unit-mass spike at the node nearest `x0`.
    pub fn tabulate_point_source(
        time_grid: TimeGrid,
        space_grid: SpaceGrid,
        x0: f64,
        diffusivity: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(time_grid.n_steps() + 1);
        rows.push(spike(&space_grid, x0));
        for j in 1..=time_grid.n_steps() {
            let t = time_grid.t(j);
            rows.push(space_grid.tabulate(|x| f(t, x)));
        }
        let mut field = Self::from_rows(time_grid, space_grid, rows)?;
        field.origin = FieldOrigin::PointSource { x0, variance0: 0.0, diffusivity };
        Ok(field)
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn space_grid(&self) -> &SpaceGrid {
        &self.space_grid
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn slice(&self, j: usize) -> DensitySlice {
        DensitySlice { grid: self.space_grid, values: self.rows[j].clone() }
    }

    pub fn final_slice(&self) -> DensitySlice {
        self.slice(self.rows.len() - 1)
    }

    /// Largest |mass(t_j) - mass(0)| over the ledger.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.ledger.first().map_or(0.0, |r| r.mass);
        self.ledger.iter().fold(0.0, |a, r| a.max((r.mass - m0).abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.ledger.iter().fold(f64::INFINITY, |a, r| a.min(r.min_value))
    }

    pub fn probe(&self, x: f64) -> Option<&Probe> {
        self.probes.iter().find(|p| p.x == x)
    }

    /// Error unless both fields live on the same lattice.
    pub fn check_same_grids(&self, other: &Self) -> Result<()> {
        if self.space_grid != other.space_grid {
            return Err(Error::GridMismatch(format!("space grids {:?} vs {:?}", self.space_grid, other.space_grid)));
        }
        if self.time_grid != other.time_grid {
            return Err(Error::GridMismatch(format!("time grids {:?} vs {:?}", self.time_grid, other.time_grid)));
        }
        Ok(())
    }
}

/// Unit-mass spike at the node nearest `x0`.
pub fn spike(grid: &SpaceGrid, x0: f64) -> Vec<f64> {
    let mut r = vec![0.0; grid.n_nodes()];
    let i = grid.nearest(x0);
    r[i] = 1.0 / (grid.weight(i) * grid.dx());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rows_validated() {
        let tg = TimeGrid::new(1.0, 2).unwrap();
        let sg = SpaceGrid::new(0.0, 1.0, 4).unwrap();
        assert!(DensityField::from_rows(tg, sg, vec![vec![1.0; 5]; 2]).is_err());
        assert!(DensityField::from_rows(tg, sg, vec![vec![1.0; 4]; 3]).is_err());
        let f = DensityField::from_rows(tg, sg, vec![vec![1.0; 5]; 3]).unwrap();
        assert_eq!(f.mass_drift(), 0.0);
        assert_abs_diff_eq!(f.ledger[2].mass, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spike_has_unit_mass() {
        let sg = SpaceGrid::new(-1.0, 1.0, 40).unwrap();
        assert_abs_diff_eq!(sg.trapezoid(&spike(&sg, 0.01)), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sg.trapezoid(&spike(&sg, -5.0)), 1.0, epsilon = 1e-14);
    }
}
