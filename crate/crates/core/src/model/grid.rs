use crate::error::{invalid, Result};

/// Uniform spatial lattice on [x_min, x_max].
///
/// Values live on the `n_cells + 1` nodes `x_i = x_min + i·dx`; node `i`
/// is the center of its control volume, whose width is `dx` in the
/// interior and `dx/2` at the two ends. The trapezoid weights are
/// therefore the control-volume widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl SpaceGrid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(invalid("space grid bounds must be finite"));
        }
        if x_min >= x_max {
            return Err(invalid(format!("space grid requires x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n_cells == 0 {
            return Err(invalid("space grid n_cells must be positive"));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    /// Grid with spacing as close to `dx` as an integer cell count allows.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(invalid("space grid dx must be positive"));
        }
        let n = ((x_max - x_min) / dx).round();
        Self::new(x_min, x_max, n.max(1.0) as usize)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i` in units of dx.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5
        } else {
            1.0
        }
    }

    /// Control volume of node `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let h = 0.5 * self.dx();
        let x = self.x(i);
        ((x - h).max(self.x_min), (x + h).min(self.x_max))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Left node index and fractional offset of `x`, or `None` outside.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.x_min) / self.dx();
        let i = (s.floor() as usize).min(self.n_cells - 1);
        Some((i, s - i as f64))
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.dx()).round();
        s.clamp(0.0, self.n_cells as f64) as usize
    }

    pub fn tabulate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| f(self.x(i))).collect()
    }

    /// Trapezoid integral Σ w_i f_i dx.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_nodes());
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        (inner + 0.5 * (values[0] + values[n - 1])) * self.dx()
    }

    /// Same range with half the spacing.
    pub fn refined(&self) -> Self {
        Self { n_cells: 2 * self.n_cells, ..*self }
    }
}

/// Grid values of a density at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySlice {
    pub grid: SpaceGrid,
    pub values: Vec<f64>,
}

impl DensitySlice {
    pub fn new(grid: SpaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(invalid(format!(
                "density slice has {} values for {} grid nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpaceGrid, f: impl Fn(f64) -> f64) -> Self {
        Self { values: grid.tabulate(f), grid }
    }

    pub fn zeros(grid: SpaceGrid) -> Self {
        Self { values: vec![0.0; grid.n_nodes()], grid }
    }

    /// Linear interpolation; zero outside the grid.
    pub fn at(&self, x: f64) -> f64 {
        match self.grid.locate(x) {
            Some((i, f)) => (1.0 - f) * self.values[i] + f * self.values[i + 1],
            None => 0.0,
        }
    }

    pub fn mass(&self) -> f64 {
        self.grid.trapezoid(&self.values)
    }

    /// Trapezoid first moment Σ w_i x_i m_i dx.
    pub fn first_moment(&self) -> f64 {
        let g = &self.grid;
        let m: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| g.x(i) * v).collect();
        g.trapezoid(&m)
    }

    /// Second central moment about the normalized mean.
    pub fn central_second_moment(&self) -> f64 {
        let g = &self.grid;
        let mass = self.mass();
        let mean = self.first_moment() / mass;
        let m: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (g.x(i) - mean).powi(2) * v)
            .collect();
        g.trapezoid(&m) / mass
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_grids() {
        assert!(SpaceGrid::new(1.0, 1.0, 10).is_err());
        assert!(SpaceGrid::new(0.0, 1.0, 0).is_err());
        assert!(SpaceGrid::new(f64::NAN, 1.0, 4).is_err());
    }

    #[test]
    fn nodes_uniform_and_end_exact() {
        let g = SpaceGrid::new(-8.0, 8.0, 800).unwrap();
        assert_abs_diff_eq!(g.dx(), 0.02, epsilon = 1e-15);
        assert_eq!(g.x(800), 8.0);
        assert_eq!(g.x(0), -8.0);
        let xs = g.nodes();
        for w in xs.windows(2) {
            assert!(w[1] > w[0]);
            assert_abs_diff_eq!(w[1] - w[0], 0.02, epsilon = 1e-12);
        }
    }

    #[test]
    fn locate_and_interpolate() {
        let g = SpaceGrid::new(0.0, 1.0, 4).unwrap();
        let s = DensitySlice::from_fn(g, |x| 2.0 * x);
        assert_abs_diff_eq!(s.at(0.3), 0.6, epsilon = 1e-14);
        assert_eq!(s.at(1.0), 2.0);
        assert_eq!(s.at(1.1), 0.0);
        assert_eq!(g.nearest(0.3), 1);
        assert_eq!(g.nearest(-3.0), 0);
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let g = SpaceGrid::new(0.0, 2.0, 7).unwrap();
        let s = DensitySlice::from_fn(g, |x| 0.5 * x);
        assert_abs_diff_eq!(s.mass(), 1.0, epsilon = 1e-14);
    }
}
