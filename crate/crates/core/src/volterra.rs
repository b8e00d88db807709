//! Stochastic Volterra equation for the conditional density with constant
//! coefficients, solved by Picard iteration on one Brownian path.
//!
//! ```text
//! m(t, x) = ∫ k(t, x - y) m₀(y) dy + c ∫ ∫₀ᵗ k′(t - s, x - y) m(s, y) dB(s) dy
//! ```
//!
//! with k(t, ·) = N(-s α t, β² t) and c = -β (conservative sign) or +β.
//! The time integral uses left points, so the singular lag 0 never
//! appears; the space integral is the trapezoid rule on the grid,
//! evaluated as FFT convolutions.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::fpsolver::{spike, DensityField, FieldOrigin};
use crate::model::{sample_brownian_path, BrownianPath, InitialLaw, SpaceGrid, TimeGrid};
use crate::quadrature::normal_pdf;
use crate::rng::derive_seed;

/// Gaussian kernel k(t, z) = N(z; -s·α·t, β²·t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraKernel {
    pub alpha: f64,
    pub beta: f64,
    /// +1 for the kernel as derived (centre -αt), -1 for centre +αt.
    pub drift_sign: f64,
}

impl VolterraKernel {
    pub fn new(alpha: f64, beta: f64, drift_sign: f64) -> Result<Self> {
        let k = Self { alpha, beta, drift_sign };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta != 0.0 && self.beta.is_finite() && self.alpha.is_finite()) {
            return Err(invalid(format!("kernel needs finite alpha and nonzero beta, got ({}, {})", self.alpha, self.beta)));
        }
        if self.drift_sign != 1.0 && self.drift_sign != -1.0 {
            return Err(invalid(format!("drift_sign must be +1 or -1, got {}", self.drift_sign)));
        }
        Ok(())
    }

    pub fn centre(&self, t: f64) -> f64 {
        -self.drift_sign * self.alpha * t
    }

    pub fn variance(&self, t: f64) -> f64 {
        self.beta * self.beta * t
    }
}

pub fn volterra_kernel(kern: &VolterraKernel, t: f64, z: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("kernel needs t > 0, got {t}")));
    }
    Ok(normal_pdf(z, kern.centre(t), kern.variance(t)))
}

/// ∂k/∂z.
pub fn volterra_kernel_deriv(kern: &VolterraKernel, u: f64, z: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(invalid(format!("kernel needs u > 0, got {u}")));
    }
    Ok(deriv(kern, u, z))
}

fn deriv(kern: &VolterraKernel, u: f64, z: f64) -> f64 {
    let v = kern.variance(u);
    let c = kern.centre(u);
    -(z - c) / v * normal_pdf(z, c, v)
}

/// Coefficient in front of the stochastic integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolterraNoise {
    /// -β, consistent with the conservative Fokker-Planck sign.
    #[default]
    Conservative,
    /// +β as written in the equation above.
    Literal,
}

/// Order in which the Picard map is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PicardOrdering {
    /// Sweep forward in time using the rows already updated in the sweep.
    #[default]
    Causal,
    /// Every row of iterate r + 1 from iterate r.
    Jacobi,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VolterraConfig {
    pub noise: VolterraNoise,
    pub ordering: PicardOrdering,
}

#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub field: DensityField,
    /// Sup-norm difference between successive iterates.
    pub history: Vec<f64>,
}

impl VolterraSolution {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// Largest ratio of successive residuals (0 once a residual vanishes).
    pub fn max_ratio(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
            .fold(0.0, f64::max)
    }
}

pub fn solve_volterra(
    kern: &VolterraKernel,
    init: &InitialLaw,
    path: &BrownianPath,
    grid: &SpaceGrid,
    max_iter: usize,
    tol: f64,
) -> Result<VolterraSolution> {
    solve_volterra_with(kern, init, path, grid, max_iter, tol, &VolterraConfig::default())
}

pub fn solve_volterra_with(
    kern: &VolterraKernel,
    init: &InitialLaw,
    path: &BrownianPath,
    grid: &SpaceGrid,
    max_iter: usize,
    tol: f64,
    cfg: &VolterraConfig,
) -> Result<VolterraSolution> {
    kern.validate()?;
    if max_iter == 0 || !(tol > 0.0) {
        return Err(invalid("max_iter must be >= 1 and tol > 0"));
    }
    let tg = *path.time_grid();
    let n_t = tg.n_steps();
    let dx = grid.dx();
    let c = match cfg.noise {
        VolterraNoise::Conservative => -kern.beta,
        VolterraNoise::Literal => kern.beta,
    };
    let conv = Convolver::new(grid);

    let dirac = match init {
        InitialLaw::Dirac { x0 } => Some(*x0),
        _ => None,
    };
    let first: Vec<Vec<f64>> = first_terms(kern, init, &tg, grid, &conv)?;

    // K_p = FFT of lag p·dt kernel derivative samples, p = 1..=n_t
    let lag_spectra: Vec<Vec<Complex<f64>>> = (1..=n_t)
        .into_par_iter()
        .map(|p| {
            let tau = p as f64 * tg.dt();
            conv.kernel_spectrum(|z| deriv(kern, tau, z))
        })
        .collect();
    // contribution of the point mass at t = 0: k′(t_j, x - x0)
    let dirac_term: Vec<Vec<f64>> = match dirac {
        Some(x0) => (1..=n_t)
            .map(|j| grid.tabulate(|x| deriv(kern, tg.t(j), x - x0)))
            .collect(),
        None => Vec::new(),
    };
    let db = path.increments();

    let assemble = |j: usize, spectra: &[Vec<Complex<f64>>]| -> Vec<f64> {
        // row j from the spectra of rows l < j (row 0 omitted for a point mass)
        let start = usize::from(dirac.is_some());
        let mut acc = vec![Complex::new(0.0, 0.0); conv.len];
        acc.par_chunks_mut(256).enumerate().for_each(|(ci, chunk)| {
            let off = ci * 256;
            for l in start..j {
                let w = c * db[l];
                if w == 0.0 {
                    continue;
                }
                let k = &lag_spectra[j - l - 1];
                let m = &spectra[l];
                for (q, a) in chunk.iter_mut().enumerate() {
                    *a += k[off + q] * m[off + q] * w;
                }
            }
        });
        let integral = conv.finish(acc);
        let mut row = first[j].clone();
        for (r, v) in row.iter_mut().zip(&integral) {
            *r += v;
        }
        if let Some(d0) = dirac_term.get(j - 1) {
            for (r, v) in row.iter_mut().zip(d0) {
                *r += c * db[0] * v;
            }
        }
        row
    };
    let spectrum_of = |row: &[f64]| conv.data_spectrum(row, grid, dx);

    let mut rows = first.clone();
    let mut history = Vec::new();
    for it in 0..max_iter {
        let next: Vec<Vec<f64>> = match cfg.ordering {
            PicardOrdering::Causal => {
                let mut out = Vec::with_capacity(n_t + 1);
                let mut spectra = Vec::with_capacity(n_t + 1);
                out.push(first[0].clone());
                spectra.push(spectrum_of(&out[0]));
                for j in 1..=n_t {
                    let r = assemble(j, &spectra);
                    spectra.push(spectrum_of(&r));
                    out.push(r);
                }
                out
            }
            PicardOrdering::Jacobi => {
                let spectra: Vec<Vec<Complex<f64>>> = rows.par_iter().map(|r| spectrum_of(r)).collect();
                let mut out = vec![first[0].clone()];
                out.extend((1..=n_t).map(|j| assemble(j, &spectra)));
                out
            }
        };
        let diff = rows
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if !diff.is_finite() {
            return Err(Error::Blowup { step: it, detail: "Picard iterate is not finite".into() });
        }
        history.push(diff);
        rows = next;
        if diff < tol {
            let mut field = DensityField::from_rows(tg, *grid, rows)?;
            if let Some(x0) = dirac {
                field.origin = FieldOrigin::PointSource { x0, variance0: 0.0, diffusivity: kern.beta * kern.beta };
            }
            return Ok(VolterraSolution { field, history });
        }
    }
    let last = *history.last().unwrap_or(&f64::NAN);
    Err(Error::NoConvergence { iterations: max_iter, last, history })
}

/// First term at every knot: k(t, x - x0) or ∫ k(t, x - y) m₀(y) dy.
fn first_terms(
    kern: &VolterraKernel,
    init: &InitialLaw,
    tg: &TimeGrid,
    grid: &SpaceGrid,
    conv: &Convolver,
) -> Result<Vec<Vec<f64>>> {
    let n_t = tg.n_steps();
    let mut rows = Vec::with_capacity(n_t + 1);
    match init {
        InitialLaw::Dirac { x0 } => {
            rows.push(spike(grid, *x0));
            for j in 1..=n_t {
                let t = tg.t(j);
                rows.push(grid.tabulate(|x| normal_pdf(x - x0, kern.centre(t), kern.variance(t))));
            }
        }
        InitialLaw::Gaussian { mean, variance } => {
            for j in 0..=n_t {
                let t = tg.t(j);
                rows.push(grid.tabulate(|x| normal_pdf(x, mean + kern.centre(t), variance + kern.variance(t))));
            }
        }
        other => {
            let m0 = other.tabulate(*grid)?.values;
            let spec = conv.data_spectrum(&m0, grid, grid.dx());
            rows.push(m0);
            for j in 1..=n_t {
                let t = tg.t(j);
                let k = conv.kernel_spectrum(|z| normal_pdf(z, kern.centre(t), kern.variance(t)));
                let acc: Vec<Complex<f64>> = k.iter().zip(&spec).map(|(a, b)| a * b).collect();
                rows.push(conv.finish(acc));
            }
        }
    }
    Ok(rows)
}

/// Linear convolution out_i = Σ_k g((i - k)dx) a_k on the grid nodes,
/// via zero-padded FFTs of length L ≥ 2n - 1.
struct Convolver {
    n: usize,
    len: usize,
    dx: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Convolver {
    fn new(grid: &SpaceGrid) -> Self {
        let n = grid.n_nodes();
        let len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            n,
            len,
            dx: grid.dx(),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Samples g(p dx), p = -(n-1)..=(n-1), stored at offset n - 1.
    fn kernel_spectrum(&self, g: impl Fn(f64) -> f64) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for (q, slot) in buf.iter_mut().enumerate().take(2 * self.n - 1) {
            let p = q as f64 - (self.n - 1) as f64;
            *slot = Complex::new(g(p * self.dx), 0.0);
        }
        self.forward.process(&mut buf);
        buf
    }

    /// Spectrum of the trapezoid-weighted row w_k m_k dx.
    fn data_spectrum(&self, row: &[f64], grid: &SpaceGrid, dx: f64) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for (k, (slot, m)) in buf.iter_mut().zip(row).enumerate() {
            *slot = Complex::new(grid.weight(k) * m * dx, 0.0);
        }
        self.forward.process(&mut buf);
        buf
    }

    fn finish(&self, mut acc: Vec<Complex<f64>>) -> Vec<f64> {
        if acc.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            return vec![0.0; self.n];
        }
        self.inverse.process(&mut acc);
        let s = 1.0 / self.len as f64;
        (0..self.n).map(|i| acc[i + self.n - 1].re * s).collect()
    }
}

/// Path-averaged comparison for one drift sign.
#[derive(Debug, Clone, PartialEq)]
pub struct SignResult {
    pub drift_sign: f64,
    /// Mean over paths of the first moment of m(T).
    pub mean_first_moment: f64,
    pub standard_error: f64,
    /// z-scores against x0 - αT and x0 + αT.
    pub z_minus: f64,
    pub z_plus: f64,
    /// L1 of the path-averaged m(T) against N(x0 - αT, β²T) and N(x0 + αT, β²T).
    pub l1_minus: f64,
    pub l1_plus: f64,
}

impl SignResult {
    /// Matches the unconditional density centred at x0 + αT within 3 standard errors.
    pub fn matches_plus(&self) -> bool {
        self.z_plus.abs() <= 3.0
    }

    pub fn matches_minus(&self) -> bool {
        self.z_minus.abs() <= 3.0
    }
}

/// Solves with a point mass at x0 on `n_paths` seeded paths for both drift signs.
#[allow(clippy::too_many_arguments)]
pub fn sign_study(
    alpha: f64,
    beta: f64,
    x0: f64,
    tg: TimeGrid,
    grid: &SpaceGrid,
    n_paths: usize,
    master_seed: u64,
    cfg: &VolterraConfig,
) -> Result<Vec<SignResult>> {
    if n_paths < 2 {
        return Err(invalid("sign study needs at least two paths"));
    }
    let big_t = tg.horizon();
    let init = InitialLaw::Dirac { x0 };
    let mut out = Vec::new();
    for s in [1.0, -1.0] {
        let kern = VolterraKernel::new(alpha, beta, s)?;
        let finals: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let path = sample_brownian_path(tg, derive_seed(master_seed, p as u64));
                solve_volterra_with(&kern, &init, &path, grid, 20, 1e-10, cfg).map(|sol| sol.field.row(tg.n_steps()).to_vec())
            })
            .collect::<Result<_>>()?;
        let moments: Vec<f64> = finals
            .iter()
            .map(|r| grid.trapezoid(&r.iter().enumerate().map(|(i, m)| grid.x(i) * m).collect::<Vec<_>>()))
            .collect();
        let n = n_paths as f64;
        let mean = moments.iter().sum::<f64>() / n;
        let sd = (moments.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        let avg: Vec<f64> = (0..grid.n_nodes()).map(|i| finals.iter().map(|r| r[i]).sum::<f64>() / n).collect();
        let l1 = |centre: f64| {
            let d: Vec<f64> = (0..grid.n_nodes())
                .map(|i| (avg[i] - normal_pdf(grid.x(i), centre, beta * beta * big_t)).abs())
                .collect();
            grid.trapezoid(&d)
        };
        let zscore = |target: f64| if se > 0.0 { (mean - target) / se } else if mean == target { 0.0 } else { f64::INFINITY };
        out.push(SignResult {
            drift_sign: s,
            mean_first_moment: mean,
            standard_error: se,
            z_minus: zscore(x0 - alpha * big_t),
            z_plus: zscore(x0 + alpha * big_t),
            l1_minus: l1(x0 - alpha * big_t),
            l1_plus: l1(x0 + alpha * big_t),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn kern(a: f64, b: f64) -> VolterraKernel {
        VolterraKernel::new(a, b, 1.0).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_abs_diff_eq!(volterra_kernel(&kern(0.0, 1.0), 1.0, 0.0).unwrap(), 0.398_942_3, epsilon = 1e-7);
        assert!(volterra_kernel(&kern(0.0, 1.0), 0.0, 0.0).is_err());
        assert!(VolterraKernel::new(0.0, 0.0, 1.0).is_err());
        assert!(VolterraKernel::new(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn kernel_matches_written_form() {
        let (a, b, t) = (0.5_f64, 1.3_f64, 0.7_f64);
        for z in [-1.0, 0.0, 0.4] {
            let written = (2.0 * std::f64::consts::PI * b * b * t).powf(-0.5)
                * (-z * z / (2.0 * b * b * t) - a * z / (b * b)).exp()
                * (-a * a * t / (2.0 * b * b)).exp();
            assert_abs_diff_eq!(volterra_kernel(&kern(a, b), t, z).unwrap(), written, epsilon = 1e-14);
        }
    }

    #[test]
    fn kernel_mass_and_argmax() {
        let g = SpaceGrid::with_spacing(-12.0, 12.0, 0.001).unwrap();
        for s in [1.0, -1.0] {
            let k = VolterraKernel::new(0.5, 1.0, s).unwrap();
            let v = g.tabulate(|z| volterra_kernel(&k, 0.7, z).unwrap());
            assert_abs_diff_eq!(g.trapezoid(&v), 1.0, epsilon = 1e-8);
        }
        let v = g.tabulate(|z| volterra_kernel(&kern(0.5, 1.0), 1.0, z).unwrap());
        let imax = (0..v.len()).max_by(|a, b| v[*a].total_cmp(&v[*b])).unwrap();
        assert_abs_diff_eq!(g.x(imax), -0.5, epsilon = 1e-9);
    }

    #[test]
    fn derivative_values() {
        let k = kern(0.0, 1.0);
        assert_eq!(volterra_kernel_deriv(&k, 1.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(volterra_kernel_deriv(&k, 1.0, 1.0).unwrap(), -0.241_970_7, epsilon = 1e-7);
        let k = kern(0.2, 1.0);
        let h = 1e-5;
        let fd = (volterra_kernel(&k, 0.5, 0.3 + h).unwrap() - volterra_kernel(&k, 0.5, 0.3 - h).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(volterra_kernel_deriv(&k, 0.5, 0.3).unwrap(), fd, epsilon = 1e-8);
        assert!(volterra_kernel_deriv(&k, 0.0, 0.3).is_err());
    }

    #[test]
    fn zero_noise_gives_first_term() {
        let tg = TimeGrid::new(0.5, 50).unwrap();
        let g = SpaceGrid::with_spacing(-5.0, 5.0, 0.05).unwrap();
        let k = kern(0.5, 1.0);
        let sol = solve_volterra(&k, &InitialLaw::Dirac { x0: 0.3 }, &BrownianPath::zero(tg), &g, 5, 1e-12).unwrap();
        for j in 1..=50 {
            let t = tg.t(j);
            for i in 0..g.n_nodes() {
                assert_eq!(sol.field.row(j)[i], volterra_kernel(&k, t, g.x(i) - 0.3).unwrap());
            }
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let g = SpaceGrid::new(-2.0, 2.0, 40).unwrap();
        let conv = Convolver::new(&g);
        let row = g.tabulate(|x| (1.0 - x * x / 4.0).max(0.0));
        let f = |z: f64| (-z * z).exp() * z;
        let fast = conv.finish(
            conv.kernel_spectrum(f).iter().zip(conv.data_spectrum(&row, &g, g.dx())).map(|(a, b)| a * b).collect(),
        );
        for (i, v) in fast.iter().enumerate() {
            let direct: f64 = (0..g.n_nodes()).map(|k| f(g.x(i) - g.x(k)) * row[k] * g.weight(k) * g.dx()).sum();
            assert_abs_diff_eq!(*v, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn causal_sweep_converges_and_jacobi_reports_history() {
        let tg = TimeGrid::new(0.2, 40).unwrap();
        let g = SpaceGrid::with_spacing(-5.0, 5.0, 0.05).unwrap();
        let init = InitialLaw::gaussian(0.0, 0.01).unwrap();
        let path = sample_brownian_path(tg, 12);
        let sol = solve_volterra(&kern(0.0, 1.0), &init, &path, &g, 20, 1e-8).unwrap();
        assert!(sol.iterations() <= 3);
        assert!(sol.max_ratio() < 1.0);
        let cfg = VolterraConfig { ordering: PicardOrdering::Jacobi, ..Default::default() };
        match solve_volterra_with(&kern(0.0, 1.0), &init, &path, &g, 60, 1e-8, &cfg) {
            Ok(j) => {
                for (a, b) in j.field.rows().iter().zip(sol.field.rows()) {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x - y).abs() < 1e-6);
                    }
                }
            }
            Err(Error::NoConvergence { history, .. }) => assert_eq!(history.len(), 60),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn tabulated_initial_law_first_term() {
        let tg = TimeGrid::new(0.1, 4).unwrap();
        let g = SpaceGrid::with_spacing(-6.0, 6.0, 0.02).unwrap();
        let gauss = InitialLaw::gaussian(0.2, 0.3).unwrap();
        let tab = crate::model::TabulatedDensity::new(g, gauss.tabulate(g).unwrap().values).unwrap();
        let a = solve_volterra(&kern(0.3, 1.0), &gauss, &BrownianPath::zero(tg), &g, 3, 1e-10).unwrap();
        let b = solve_volterra(&kern(0.3, 1.0), &InitialLaw::Tabulated(tab), &BrownianPath::zero(tg), &g, 3, 1e-10).unwrap();
        for (x, y) in a.field.final_slice().values.iter().zip(&b.field.final_slice().values) {
            assert!((x - y).abs() < 1e-4);
        }
    }
}
