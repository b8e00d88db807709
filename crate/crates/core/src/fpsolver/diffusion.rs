//! Crank-Nicolson step for ∂_t m = ∂_x²(D m) in conservative form.
//!
//! Flux across the interior edge between nodes i and i+1 is
//! -(D_{i+1} m_{i+1} - D_i m_i)/dx, zero across the two end edges. Column
//! sums of the volume-weighted operator vanish, so mass is conserved.

use crate::model::SpaceGrid;

/// Advances `m` by `tau` with node diffusivities `d`.
pub fn crank_nicolson(grid: &SpaceGrid, m: &[f64], d: &[f64], tau: f64) -> Vec<f64> {
    let n = m.len();
    let dx = grid.dx();
    let r = tau / (dx * dx);
    // (W dm/dt)_i = [D_{i+1}m_{i+1} - D_i m_i] - [D_i m_i - D_{i-1}m_{i-1}] / dx² (interior edges only)
    let apply = |u: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..n - 1 {
            let flux = d[i + 1] * u[i + 1] - d[i] * u[i];
            out[i] += flux;
            out[i + 1] -= flux;
        }
        out
    };
    let au = apply(m);
    let rhs: Vec<f64> = (0..n)
        .map(|i| m[i] + 0.5 * r * au[i] / grid.weight(i))
        .collect();
    // tridiagonal (I - r/2 W⁻¹ A) u = rhs
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let w = 0.5 * r / grid.weight(i);
        if i + 1 < n {
            diag[i] += w * d[i];
            upper[i] = -w * d[i + 1];
        }
        if i > 0 {
            diag[i] += w * d[i];
            lower[i] = -w * d[i - 1];
        }
    }
    thomas(&lower, &diag, &upper, &rhs)
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
