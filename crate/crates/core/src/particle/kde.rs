//! Density estimates from an ensemble.
//!
//! The kernel estimate integrates each particle's Gaussian over the node
//! control volumes (erf differences) and divides by the volume width, so
//! the grid mass plus the mass falling outside the grid is 1 for every
//! bandwidth.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::{DensitySlice, SpaceGrid};
use crate::quadrature::{normal_interval, std_normal_cdf};

/// Clipped mass above which a warning is attached.
pub const CLIP_WARN_TOL: f64 = 1e-6;
/// Kernel support in bandwidths.
const WINDOW: f64 = 8.0;
/// Particles per parallel chunk; fixed so sums do not depend on threads.
pub(crate) const CHUNK: usize = 4096;

/// Output of [`empirical_density`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub slice: DensitySlice,
    /// Fraction of the mass that fell outside the grid.
    pub clipped_mass: f64,
    pub warning: Option<String>,
}

/// 1.06·std·N^{-1/5}.
pub fn silverman_bandwidth(positions: &[f64]) -> f64 {
    let n = positions.len() as f64;
    let mean = positions.iter().sum::<f64>() / n;
    let var = positions.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Gaussian kernel estimate (bandwidth > 0) or nearest-node histogram
/// (bandwidth = 0) on the grid nodes.
pub fn empirical_density(positions: &[f64], grid: &SpaceGrid, bandwidth: f64) -> Result<DensityEstimate> {
    if positions.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
        return Err(invalid(format!("bandwidth must be >= 0, got {bandwidth}")));
    }
    let n = grid.n_nodes();
    let dx = grid.dx();
    let partials: Vec<(Vec<f64>, f64)> = positions
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut clipped = 0.0;
            for &x in chunk {
                if bandwidth == 0.0 {
                    if grid.contains(x) {
                        acc[grid.nearest(x)] += 1.0;
                    } else {
                        clipped += 1.0;
                    }
                } else {
                    clipped += kernel_into(&mut acc, grid, x, bandwidth);
                }
            }
            (acc, clipped)
        })
        .collect();
    let mut mass = vec![0.0; n];
    let mut clipped = 0.0;
    for (acc, c) in partials {
        for (m, a) in mass.iter_mut().zip(acc) {
            *m += a;
        }
        clipped += c;
    }
    let np = positions.len() as f64;
    let values: Vec<f64> = mass
        .iter()
        .enumerate()
        .map(|(i, m)| m / (np * grid.weight(i) * dx))
        .collect();
    let clipped_mass = clipped / np;
    let warning = (clipped_mass > CLIP_WARN_TOL).then(|| {
        format!("grid [{}, {}] misses a mass fraction {clipped_mass:e} of the ensemble", grid.x_min(), grid.x_max())
    });
    Ok(DensityEstimate { slice: DensitySlice::new(*grid, values)?, clipped_mass, warning })
}

/// Adds the control-volume masses of N(x, h²) to `acc`; returns the
/// mass outside the grid.
fn kernel_into(acc: &mut [f64], grid: &SpaceGrid, x: f64, h: f64) -> f64 {
    let lo_x = x - WINDOW * h;
    let hi_x = x + WINDOW * h;
    let outside = std_normal_cdf((grid.x_min() - x) / h) + std_normal_cdf((x - grid.x_max()) / h);
    if hi_x < grid.x_min() || lo_x > grid.x_max() {
        return outside.min(1.0);
    }
    let lo = grid.nearest(lo_x);
    let hi = grid.nearest(hi_x);
    for (i, slot) in acc.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let (a, b) = grid.cell(i);
        *slot += normal_interval(a, b, x, h * h);
    }
    outside
}

/// Kernel estimate by linear deposition onto the grid followed by a
/// discrete convolution with the cell-integrated kernel.
///
/// Cost O(N + n w) instead of O(N w); used inside time loops.
pub fn deposit_kde(positions: &[f64], grid: &SpaceGrid, h: f64) -> DensitySlice {
    let n = grid.n_nodes();
    let dx = grid.dx();
    let partials: Vec<Vec<f64>> = positions
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            for &x in chunk {
                if let Some((i, f)) = grid.locate(x) {
                    acc[i] += 1.0 - f;
                    acc[i + 1] += f;
                }
            }
            acc
        })
        .collect();
    let mut mass = vec![0.0; n];
    for acc in partials {
        for (m, a) in mass.iter_mut().zip(acc) {
            *m += a;
        }
    }
    let np = positions.len() as f64;
    let values = if h > 0.0 {
        let w = ((WINDOW * h / dx).ceil() as usize).max(1);
        let kern: Vec<f64> = (0..=2 * w)
            .map(|k| {
                let off = (k as f64 - w as f64) * dx;
                normal_interval(off - 0.5 * dx, off + 0.5 * dx, 0.0, h * h)
            })
            .collect();
        let mut out = vec![0.0; n];
        for (i, &mi) in mass.iter().enumerate() {
            if mi == 0.0 {
                continue;
            }
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            for (o, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *slot += mi * kern[o + w - i];
            }
        }
        out
    } else {
        mass
    };
    let values = values
        .iter()
        .enumerate()
        .map(|(i, m)| m / (np * grid.weight(i) * dx))
        .collect();
    DensitySlice { grid: *grid, values }
}

/// Grid covering the ensemble with margin `6h`, spacing about h/4.
pub fn covering_grid(positions: &[f64], h: f64) -> Result<SpaceGrid> {
    let (lo, hi) = positions
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(invalid("ensemble has non-finite positions"));
    }
    let h = if h > 0.0 { h } else { ((hi - lo) / 256.0).max(1e-6) };
    let a = lo - 6.0 * h;
    let b = hi + 6.0 * h;
    let n = (((b - a) / (0.25 * h)).ceil() as usize).clamp(16, 4096);
    SpaceGrid::new(a, b, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_initial, InitialLaw};
    use crate::quadrature::normal_pdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn histogram_of_point_ensemble() {
        let g = SpaceGrid::with_spacing(-1.0, 1.0, 0.1).unwrap();
        let e = empirical_density(&[0.0; 50], &g, 0.0).unwrap();
        let i0 = g.nearest(0.0);
        for (i, v) in e.slice.values.iter().enumerate() {
            if i == i0 {
                assert_abs_diff_eq!(*v, 1.0 / g.dx(), epsilon = 1e-9);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        assert_eq!(e.clipped_mass, 0.0);
    }

    #[test]
    fn mass_identity_any_bandwidth() {
        let g = SpaceGrid::with_spacing(-1.0, 1.0, 0.05).unwrap();
        let xs = [-1.2, -0.99, -0.3, 0.0, 0.01, 0.5, 0.98, 3.0];
        for h in [0.0, 1e-4, 0.01, 0.2, 1.5] {
            let e = empirical_density(&xs, &g, h).unwrap();
            assert_abs_diff_eq!(e.slice.mass() + e.clipped_mass, 1.0, epsilon = 1e-12);
            assert!(e.warning.is_some());
        }
    }

    #[test]
    fn kde_consistency_standard_normal() {
        let law = InitialLaw::gaussian(0.0, 1.0).unwrap();
        let xs = sample_initial(&law, 100_000, 17);
        let g = SpaceGrid::with_spacing(-8.0, 8.0, 0.02).unwrap();
        let e = empirical_density(&xs, &g, silverman_bandwidth(&xs)).unwrap();
        let diff: Vec<f64> = (0..g.n_nodes()).map(|i| (e.slice.values[i] - normal_pdf(g.x(i), 0.0, 1.0)).abs()).collect();
        let l1 = g.trapezoid(&diff);
        assert!(l1 <= 2e-2, "L1 {l1}");
        assert_abs_diff_eq!(e.slice.mass(), 1.0, epsilon = 1e-6);
        assert!(e.warning.is_none());
    }

    #[test]
    fn deposit_close_to_direct() {
        let law = InitialLaw::gaussian(0.3, 0.5).unwrap();
        let xs = sample_initial(&law, 20_000, 3);
        let h = silverman_bandwidth(&xs);
        let g = covering_grid(&xs, h).unwrap();
        let a = deposit_kde(&xs, &g, h);
        let b = empirical_density(&xs, &g, h).unwrap().slice;
        let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
        assert!(g.trapezoid(&diff) < 5e-3);
        assert_abs_diff_eq!(a.mass(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_negative_bandwidth() {
        let g = SpaceGrid::new(0.0, 1.0, 4).unwrap();
        assert!(empirical_density(&[0.5], &g, -1.0).is_err());
        assert!(empirical_density(&[], &g, 0.1).is_err());
    }
}
