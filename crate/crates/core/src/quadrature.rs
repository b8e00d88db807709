//! Gaussian helpers and quadrature rules shared by the oracles.

use std::f64::consts::PI;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density of N(mean, var) at `x`.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability that N(mean, var) falls in [a, b].
///
/// Uses the tail on the far side of the mean so that both ends keep
/// relative accuracy.
pub fn normal_interval(a: f64, b: f64, mean: f64, var: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    let za = (a - mean) / s;
    let zb = (b - mean) / s;
    if za >= 0.0 {
        0.5 * (libm::erfc(za) - libm::erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (libm::erfc(-zb) - libm::erfc(-za))
    } else {
        0.5 * (libm::erf(zb) - libm::erf(za))
    }
}

/// Nodes and weights for ∫ f(u) n(u) du with n the standard normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Order-`n` rule, physicists' nodes by Newton iteration on the
    /// orthonormal recurrence, then rescaled to the standard normal weight.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt_pi = PI.sqrt();
        let nodes = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().rev().map(|v| v / sqrt_pi).collect();
        Self { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }
}

/// Ten-point Gauss-Legendre nodes on [-1, 1].
const GL10_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Ten-point Gauss-Legendre integral of `f` over [a, b].
pub fn gauss_legendre10(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..5 {
        let d = h * GL10_X[k];
        s += GL10_W[k] * (f(c - d) + f(c + d));
    }
    s * h
}

/// Adaptive Simpson integral of `f` over [a, b] to absolute tolerance `tol`.
///
/// Signed: returns the negated integral when `b < a`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Gauss-Legendre over `pieces` equal panels of [a, b].
pub fn composite_gl10(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + h * i as f64;
            gauss_legendre10(&f, lo, lo + h)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(64);
        assert_abs_diff_eq!(gh.integrate(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gh.integrate(|u| u), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gh.integrate(|u| u * u), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.integrate(|u| u.powi(4)), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(gh.integrate(|u| (0.7 * u).exp()), (0.245f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn hermite_small_orders() {
        let gh = GaussHermite::new(1);
        assert_abs_diff_eq!(gh.nodes[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gh.weights[0], 1.0, epsilon = 1e-14);
        let gh = GaussHermite::new(2);
        assert_abs_diff_eq!(gh.nodes[1], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gh.weights[0], 0.5, epsilon = 1e-13);
        let gh = GaussHermite::new(5);
        assert_abs_diff_eq!(gh.integrate(|u| u.powi(8)), 105.0, epsilon = 1e-9);
    }

    #[test]
    fn legendre_and_simpson() {
        assert_abs_diff_eq!(gauss_legendre10(|x| x.powi(19), 0.0, 1.0), 0.05, epsilon = 1e-14);
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-11);
        let w = adaptive_simpson(&|x: f64| x.sin(), PI, 0.0, 1e-12);
        assert_abs_diff_eq!(w, -2.0, epsilon = 1e-11);
    }

    #[test]
    fn normal_helpers() {
        assert_abs_diff_eq!(normal_pdf(0.0, 0.0, 1.0), INV_SQRT_2PI, epsilon = 1e-16);
        assert_abs_diff_eq!(std_normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_interval(-1.0, 1.0, 0.0, 1.0), 0.682_689_492_137_085_9, epsilon = 1e-15);
        let tail = normal_interval(9.0, 10.0, 0.0, 1.0);
        assert!(tail > 0.0 && tail < 1e-18);
    }
}
