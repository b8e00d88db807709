//! Flux-form semi-Lagrangian transport.
//!
//! The cumulative mass C is known at control-volume edges. A transport
//! step over "time" τ maps each edge back along the characteristic of the
//! velocity field to its departure point D(e); the new mass of a control
//! volume is C(D(e_right)) - C(D(e_left)), with C read by four-point
//! Lagrange interpolation. The end edges stay fixed (zero flux), so the
//! total mass telescopes and is conserved to round-off.

use crate::model::SpaceGrid;

/// How edges move during one transport step.
#[derive(Debug, Clone)]
pub enum Transport {
    /// Uniform displacement.
    Shift(f64),
    /// Dilation x ↦ x·e^{λ} (velocity λ x / τ).
    Dilation(f64),
    /// Node velocities integrated over signed time `tau`.
    Field { velocity: Vec<f64>, tau: f64 },
}

impl Transport {
    pub fn is_identity(&self) -> bool {
        match self {
            Self::Shift(s) => *s == 0.0,
            Self::Dilation(l) => *l == 0.0,
            Self::Field { velocity, tau } => *tau == 0.0 || velocity.iter().all(|v| *v == 0.0),
        }
    }
}

/// Edge coordinates: x_min, the interior midpoints, x_max.
pub(crate) fn edges(grid: &SpaceGrid) -> Vec<f64> {
    let n = grid.n_nodes();
    let dx = grid.dx();
    let mut e = Vec::with_capacity(n + 1);
    e.push(grid.x_min());
    for k in 1..n {
        e.push(grid.x_min() + (k as f64 - 0.5) * dx);
    }
    e.push(grid.x_max());
    e
}

fn cumulative(grid: &SpaceGrid, m: &[f64]) -> Vec<f64> {
    let dx = grid.dx();
    let mut c = Vec::with_capacity(m.len() + 1);
    let mut s = 0.0;
    c.push(s);
    for (i, v) in m.iter().enumerate() {
        s += grid.weight(i) * v * dx;
        c.push(s);
    }
    c
}

/// Four-point Lagrange interpolation of the cumulative mass.
struct Cumulative<'a> {
    grid: &'a SpaceGrid,
    edges: &'a [f64],
    values: Vec<f64>,
}

impl Cumulative<'_> {
    fn eval(&self, x: f64) -> f64 {
        let n_e = self.edges.len();
        if x <= self.grid.x_min() {
            return 0.0;
        }
        if x >= self.grid.x_max() {
            return self.values[n_e - 1];
        }
        let dx = self.grid.dx();
        // interval k with e_k <= x < e_{k+1}
        let s = (x - self.grid.x_min()) / dx + 0.5;
        let mut k = (s.floor() as usize).min(n_e - 2);
        if k >= 1 && x < self.edges[k] {
            k -= 1;
        }
        while k + 2 < n_e && x >= self.edges[k + 1] {
            k += 1;
        }
        let lo = k.saturating_sub(1).min(n_e - 4);
        let xs = &self.edges[lo..lo + 4];
        let ys = &self.values[lo..lo + 4];
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - xs[b]) / (xs[a] - xs[b]);
                }
            }
            acc += w * ys[a];
        }
        acc
    }
}

/// Linear interpolation of node values, constant beyond the ends.
fn node_interp(grid: &SpaceGrid, v: &[f64], x: f64) -> f64 {
    if x <= grid.x_min() {
        return v[0];
    }
    if x >= grid.x_max() {
        return v[v.len() - 1];
    }
    let (i, f) = grid.locate(x).expect("inside");
    (1.0 - f) * v[i] + f * v[i + 1]
}

/// Departure point of `x` under velocity `v` over signed time `tau`.
fn depart_rk4(grid: &SpaceGrid, v: &[f64], x: f64, tau: f64, n_sub: usize) -> f64 {
    let h = -tau / n_sub as f64;
    let mut y = x;
    for _ in 0..n_sub {
        let k1 = node_interp(grid, v, y);
        let k2 = node_interp(grid, v, y + 0.5 * h * k1);
        let k3 = node_interp(grid, v, y + 0.5 * h * k2);
        let k4 = node_interp(grid, v, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Applies one transport step to node values `m`.
pub fn remap(grid: &SpaceGrid, m: &[f64], transport: &Transport) -> Vec<f64> {
    if transport.is_identity() {
        return m.to_vec();
    }
    let e = edges(grid);
    let n_e = e.len();
    let cum = Cumulative { grid, edges: &e, values: cumulative(grid, m) };
    let depart: Vec<f64> = match transport {
        Transport::Shift(s) => e.iter().map(|x| x - s).collect(),
        Transport::Dilation(l) => {
            let f = (-l).exp();
            e.iter().map(|x| x * f).collect()
        }
        Transport::Field { velocity, tau } => {
            let vmax = velocity.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let n_sub = ((vmax * tau.abs() / grid.dx()).ceil() as usize).max(1);
            e.iter().map(|&x| depart_rk4(grid, velocity, x, *tau, n_sub)).collect()
        }
    };
    let mut c: Vec<f64> = depart.iter().map(|&x| cum.eval(x)).collect();
    c[0] = 0.0;
    c[n_e - 1] = cum.values[n_e - 1];
    let dx = grid.dx();
    (0..grid.n_nodes())
        .map(|i| (c[i + 1] - c[i]) / (grid.weight(i) * dx))
        .collect()
}
