use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::rng::{domain, stream_rng};

/// Uniform time lattice on [0, T].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("time horizon must be positive and finite, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(invalid("time grid n_steps must be positive"));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid with step as close to `dt` as an integer step count allows.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("time step dt must be positive"));
        }
        Self::new(horizon, ((horizon / dt).round() as usize).max(1))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Knot `t_j`; `t_{n_steps}` is exactly `T`.
    pub fn t(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.t(j)).collect()
    }

    pub fn refined(&self) -> Self {
        Self { n_steps: 2 * self.n_steps, ..*self }
    }

    /// Knot index nearest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.n_steps)
    }
}

/// One realization of the common Brownian motion on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    time_grid: TimeGrid,
    increments: Vec<f64>,
    values: Vec<f64>,
    seed: u64,
}

impl BrownianPath {
    /// Path from explicit increments; `seed` is carried as metadata.
    pub fn from_increments(time_grid: TimeGrid, increments: Vec<f64>, seed: u64) -> Result<Self> {
        if increments.len() != time_grid.n_steps() {
            return Err(invalid(format!(
                "path has {} increments for {} steps",
                increments.len(),
                time_grid.n_steps()
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(invalid("path increments must be finite"));
        }
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut b = 0.0;
        values.push(b);
        for &d in &increments {
            b += d;
            values.push(b);
        }
        Ok(Self { time_grid, increments, values, seed })
    }

    /// The zero path.
    pub fn zero(time_grid: TimeGrid) -> Self {
        Self::from_increments(time_grid, vec![0.0; time_grid.n_steps()], 0).expect("finite")
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Cumulative values `B(t_j)`, `n_steps + 1` of them.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_abs_increment(&self) -> f64 {
        self.increments.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Path on half as many steps with pairwise-summed increments.
    pub fn coarsen(&self) -> Result<Self> {
        let n = self.time_grid.n_steps();
        if !n.is_multiple_of(2) {
            return Err(invalid("only an even step count can be coarsened"));
        }
        let tg = TimeGrid::new(self.time_grid.horizon(), n / 2)?;
        let inc = self.increments.chunks_exact(2).map(|p| p[0] + p[1]).collect();
        Self::from_increments(tg, inc, self.seed)
    }
}

/// Draws the path with the given seed; increments are N(0, dt).
pub fn sample_brownian_path(time_grid: TimeGrid, seed: u64) -> BrownianPath {
    let mut rng = stream_rng(seed, domain::PATH, 0);
    let s = time_grid.dt().sqrt();
    let inc = (0..time_grid.n_steps())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            s * z
        })
        .collect();
    BrownianPath::from_increments(time_grid, inc, seed).expect("finite increments")
}
