//! Property tests over randomized inputs.

use proptest::prelude::*;

use crate::closedform::{gbm_slice, shift_slice, PathFunctionals};
use crate::fpsolver::solve_fp;
use crate::harness::compare_slices;
use crate::localtime::{density_local_time, occupation_local_time};
use crate::model::{sample_brownian_path, CoefficientModel, DensitySlice, InitialLaw, SpaceGrid, TimeGrid};
use crate::particle::{conditional_expectation, empirical_density, simulate_particles};
use crate::quadrature::normal_pdf;
use crate::rng::derive_seed;
use crate::volterra::{volterra_kernel, VolterraKernel};

fn grid() -> SpaceGrid {
    SpaceGrid::new(-6.0, 6.0, 240).unwrap()
}

fn bump(grid: SpaceGrid, centre: f64, width: f64) -> DensitySlice {
    DensitySlice::from_fn(grid, |x| normal_pdf(x, centre, width * width))
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn metrics_are_a_distance(c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, c3 in -2.0..2.0f64, w in 0.3..1.2f64) {
        let g = grid();
        let (a, b, c) = (bump(g, c1, w), bump(g, c2, w), bump(g, c3, w));
        let ab = compare_slices(0.0, &a, &b).unwrap();
        let ba = compare_slices(0.0, &b, &a).unwrap();
        let ac = compare_slices(0.0, &a, &c).unwrap();
        let cb = compare_slices(0.0, &c, &b).unwrap();
        prop_assert_eq!(compare_slices(0.0, &a, &a).unwrap().l1, 0.0);
        prop_assert!((ab.l1 - ba.l1).abs() <= 1e-14);
        prop_assert!(ab.l1 <= ac.l1 + cb.l1 + 1e-12);
        prop_assert!(ab.sup <= ac.sup + cb.sup + 1e-12);
        prop_assert!(ab.l1 <= 2.0 + 1e-9);
    }

    #[test]
    fn shift_preserves_mass(shift in -2.0..2.0f64, w in 0.3..0.6f64) {
        let g = grid();
        let s = shift_slice(|x| normal_pdf(x, 0.0, w * w), shift, g);
        prop_assert!((s.mass() - 1.0).abs() < 1e-8);
        prop_assert!((s.first_moment() - shift).abs() < 1e-8);
    }

    #[test]
    fn gbm_change_of_variables(a in -0.3..0.3f64, m in -0.3..0.3f64, sigma in 0.2..0.4f64) {
        let g = SpaceGrid::new(1e-3, 12.0, 24_000).unwrap();
        let s = gbm_slice(|u| normal_pdf(u, 0.0, sigma * sigma), a, m, g);
        prop_assert!((s.mass() - 1.0).abs() < 1e-5);
        let mean = (a + m + 0.5 * sigma * sigma).exp();
        prop_assert!((s.first_moment() - mean).abs() < 1e-4);
    }

    #[test]
    fn kernel_has_unit_mass(alpha in -1.0..1.0f64, beta in 0.2..1.5f64, t in 0.05..1.0f64, sign in prop::bool::ANY) {
        let k = VolterraKernel::new(alpha, beta, if sign { 1.0 } else { -1.0 }).unwrap();
        let g = SpaceGrid::new(-10.0, 10.0, 4000).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|&z| volterra_kernel(&k, t, z).unwrap()).collect();
        prop_assert!((g.trapezoid(&vals) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kde_mass_identity(seed in any::<u64>(), h in 0.05..0.8f64, spread in 0.5..4.0f64) {
        let g = SpaceGrid::new(-3.0, 3.0, 120).unwrap();
        let xs: Vec<f64> = (0..200u64).map(|i| spread * ((derive_seed(seed, i) >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0).collect();
        let est = empirical_density(&xs, &g, h).unwrap();
        prop_assert!((est.slice.mass() + est.clipped_mass - 1.0).abs() < 1e-10);
        prop_assert!(est.slice.min_value() >= 0.0);
    }

    #[test]
    fn occupation_is_monotone_and_bounded(seed in any::<u64>(), x in -1.0..1.0f64, eps in 0.02..0.5f64) {
        let tg = TimeGrid::new(1.0, 400).unwrap();
        let path = sample_brownian_path(tg, seed);
        let c = occupation_local_time(&tg, path.values(), x, eps).unwrap();
        prop_assert!(c.is_nondecreasing());
        prop_assert_eq!(c.values[0], 0.0);
        let cap = tg.dt() / (2.0 * eps) * (1.0 + 1e-12);
        for j in 0..tg.n_steps() {
            prop_assert!(c.increment(j, j + 1) <= cap);
        }
        let mid = tg.n_steps() / 2;
        let total = c.increment(0, mid) + c.increment(mid, tg.n_steps());
        prop_assert!((total - c.terminal()).abs() <= 1e-12);
    }

    #[test]
    fn conditional_expectation_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let tg = TimeGrid::new(0.5, 10).unwrap();
        let path = sample_brownian_path(tg, seed);
        let law = InitialLaw::gaussian(0.0, 1.0).unwrap();
        let traj = simulate_particles(&CoefficientModel::constant(0.2, 0.5), &law, &path, 64, derive_seed(seed, 1)).unwrap();
        let ens = traj.final_snapshot();
        let f = conditional_expectation(&ens, |x| x).unwrap();
        let g = conditional_expectation(&ens, |x| x * x).unwrap();
        let fg = conditional_expectation(&ens, |x| a * x + b * x * x).unwrap();
        prop_assert!((fg - (a * f + b * g)).abs() <= 1e-10 * (1.0 + fg.abs()));
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn fp_conserves_mass(seed in any::<u64>(), alpha in -0.5..0.5f64, beta in 0.2..0.8f64, mean in -0.5..0.5f64) {
        let g = grid();
        let tg = TimeGrid::new(1.0, 200).unwrap();
        let path = sample_brownian_path(tg, seed);
        let init = bump(g, mean, 0.5);
        let field = solve_fp(&CoefficientModel::constant(alpha, beta), &init, &path, g).unwrap();
        prop_assert!(field.mass_drift() < 1e-6);
        prop_assert!(field.min_value() > -1e-10);
        let pf = PathFunctionals::constant(alpha, beta, &path);
        let moved = field.final_slice().first_moment() - mean;
        prop_assert!((moved - pf.shift(tg.n_steps())).abs() < 1e-2);
    }

    #[test]
    fn density_local_time_is_monotone(seed in any::<u64>(), x in -1.5..1.5f64) {
        let g = grid();
        let tg = TimeGrid::new(1.0, 100).unwrap();
        let path = sample_brownian_path(tg, seed);
        let field = solve_fp(&CoefficientModel::constant(0.0, 0.6), &bump(g, 0.0, 0.7), &path, g).unwrap();
        let c = density_local_time(&field, x).unwrap();
        prop_assert!(c.is_nondecreasing());
        prop_assert!(c.terminal() <= tg.horizon() * field.rows().iter().flatten().fold(0.0f64, |m, v| m.max(*v)) + 1e-12);
    }
}
