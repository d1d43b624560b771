//! Property tests for the invariants the library promises.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use staticgeo::catalog::{self, CatalogEntry};
use staticgeo::connect::{action_j, lower_bound_gap};
use staticgeo::diagnostics::{
    causal_arrival, completeness_probe, growth_exponent, log_radii, GrowthOptions, GrowthTarget, ProbeMetric,
    ProbeOptions, ProbeVerdict,
};
use staticgeo::io;
use staticgeo::manifold::{integrate_slice_geodesic, slice_distance, Chart, DistanceOptions, SliceCurve, SliceGeodesicOptions};
use staticgeo::spacetime::{integrate_geodesic, GeodesicOptions, GeodesicState, StaticSpacetime, TrajectorySample};

fn entries() -> Vec<(CatalogEntry, StaticSpacetime)> {
    catalog::catalog_list()
        .into_iter()
        .map(|e| {
            let st = catalog::spacetime(e.name).unwrap();
            (e, st)
        })
        .collect()
}

fn point_in(st: &StaticSpacetime, bbox: &[(f64, f64)], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = bbox.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        if st.chart().in_domain(&x) {
            return x;
        }
    }
}

/// Chord between two random points plus a few sine modes, shrunk until admissible.
fn wavy_curve(st: &StaticSpacetime, bbox: &[(f64, f64)], n: usize, rng: &mut ChaCha8Rng) -> SliceCurve {
    loop {
        let a = point_in(st, bbox, rng);
        let b = point_in(st, bbox, rng);
        let chord = SliceCurve::chord(&a, &b, n).unwrap();
        let coef: Vec<f64> = (0..3 * a.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let width = bbox.iter().map(|(lo, hi)| hi - lo).fold(f64::INFINITY, f64::min);
        let mut amp = 0.2 * width;
        for _ in 0..10 {
            let mut c = chord.clone();
            for i in 1..n {
                let s = c.param(i);
                for d in 0..a.len() {
                    let mut bump = 0.0;
                    for m in 0..3 {
                        let k = (m + 1) as f64;
                        bump += coef[m * a.len() + d] / k * (k * std::f64::consts::PI * s).sin();
                    }
                    c.node_mut(i)[d] += amp * bump;
                }
            }
            if c.is_admissible(st.chart()) {
                return c;
            }
            amp *= 0.5;
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_is_symmetric_positive_definite(seed in any::<u64>()) {
        let mut r = rng(seed);
        for (e, st) in entries() {
            let x = point_in(&st, &catalog::sample_box(&e, st.dim()), &mut r);
            let g = st.chart().metric_at(&x).unwrap();
            let asym = (&g - g.transpose()).amax();
            prop_assert!(asym < 1e-12, "{}: asymmetry {asym}", e.name);
            prop_assert!(g.clone().cholesky().is_some(), "{}: not positive-definite at {x:?}", e.name);
            prop_assert!(st.beta_at(&x).unwrap() > 0.0);
        }
    }

    #[test]
    fn aux_norm_identity_is_algebraic(seed in any::<u64>(), td in -5.0f64..5.0, v in prop::collection::vec(-5.0f64..5.0, 2)) {
        let mut r = rng(seed);
        for (e, st) in entries() {
            let x = point_in(&st, &catalog::sample_box(&e, st.dim()), &mut r);
            let state = GeodesicState::new(0.0, x.clone(), td, v[..st.dim()].to_vec());
            let beta = st.beta_at(&x).unwrap();
            let lambda = st.lambda(&state).unwrap();
            let c = st.norm_c(&state).unwrap();
            let aux = st.aux_norm_sq(&state).unwrap();
            let direct = beta * td * td + st.chart().norm_sq(&x, &state.x_dot).unwrap();
            prop_assert!((aux - direct).abs() <= 1e-12 * direct.max(1.0));
            prop_assert!((aux - (c + 2.0 * lambda * lambda / beta)).abs() <= 1e-12 * aux.max(1.0), "{}", e.name);
        }
    }

    #[test]
    fn gap_to_cauchy_schwarz_bound_is_nonnegative(seed in any::<u64>(), dt in -10.0f64..10.0) {
        let mut r = rng(seed);
        for (e, st) in entries() {
            let c = wavy_curve(&st, &catalog::sample_box(&e, st.dim()), 16, &mut r);
            let gap = lower_bound_gap(&st, &c, dt).unwrap();
            prop_assert!(gap >= -1e-10, "{}: gap {gap}", e.name);
            prop_assert_eq!(lower_bound_gap(&st, &c, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn action_splits_into_kinetic_and_time_terms(seed in any::<u64>(), dt in -10.0f64..10.0) {
        let mut r = rng(seed);
        for (e, st) in entries() {
            let c = wavy_curve(&st, &catalog::sample_box(&e, st.dim()), 16, &mut r);
            let ev = action_j(&st, &c, dt).unwrap();
            prop_assert!(ev.inv_beta_integral > 0.0);
            prop_assert!(ev.kinetic >= 0.0);
            let j = ev.kinetic - dt * dt / (2.0 * ev.inv_beta_integral);
            prop_assert!((ev.j - j).abs() <= 1e-12 * j.abs().max(1.0));
        }
    }
}

/// `∫β⁻¹` along the polygon by the composite trapezoid rule on a fine grid.
fn inv_beta_trapezoid(st: &StaticSpacetime, c: &SliceCurve, per_segment: usize) -> f64 {
    let n = c.segments();
    let mut total = 0.0;
    for i in 0..n {
        let (a, b) = (c.node(i), c.node(i + 1));
        for k in 0..per_segment {
            let f = |tau: f64| {
                let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + tau * (q - p)).collect();
                1.0 / st.beta_at(&x).unwrap()
            };
            let (t0, t1) = (k as f64 / per_segment as f64, (k + 1) as f64 / per_segment as f64);
            total += 0.5 * (f(t0) + f(t1)) / per_segment as f64;
        }
    }
    total / n as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gap_nonnegative_over_many_curves(seed in any::<u64>(), dt in -20.0f64..20.0) {
        let mut r = rng(seed);
        for (e, st) in entries() {
            let c = wavy_curve(&st, &catalog::sample_box(&e, st.dim()), 8, &mut r);
            prop_assert!(lower_bound_gap(&st, &c, dt).unwrap() >= -1e-10, "{}", e.name);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gap_positive_when_beta_varies(seed in any::<u64>(), dt in 0.5f64..10.0) {
        let st = catalog::spacetime("quad_beta").unwrap();
        let c = wavy_curve(&st, &[(-2.0, 2.0), (-2.0, 2.0)], 16, &mut rng(seed));
        prop_assert!(lower_bound_gap(&st, &c, dt).unwrap() > 0.0);
    }

    #[test]
    fn inv_beta_quadrature_matches_fine_trapezoid(seed in any::<u64>()) {
        for name in ["quad_beta", "schwarzschild_exterior", "superquad_beta"] {
            let e = catalog::entry(name).unwrap();
            let st = catalog::spacetime(name).unwrap();
            let c = wavy_curve(&st, &catalog::sample_box(&e, st.dim()), 16, &mut rng(seed));
            let ev = action_j(&st, &c, 1.0).unwrap();
            let fine = inv_beta_trapezoid(&st, &c, 400);
            prop_assert!((ev.inv_beta_integral - fine).abs() < 1e-5 * fine, "{name}: {} vs {fine}", ev.inv_beta_integral);
        }
    }

    #[test]
    fn geodesics_conserve_lambda_and_c(seed in any::<u64>()) {
        let mut r = rng(seed);
        for name in ["minkowski", "quad_beta", "schwarzschild_exterior", "superquad_beta"] {
            let e = catalog::entry(name).unwrap();
            let st = catalog::spacetime(name).unwrap();
            let x = point_in(&st, &catalog::sample_box(&e, st.dim()), &mut r);
            let xd: Vec<f64> = (0..st.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let init = GeodesicState::new(0.0, x, r.gen_range(-1.5..1.5), xd);
            let tr = integrate_geodesic(&st, &init, 20.0, &GeodesicOptions::default()).unwrap();
            prop_assert!(tr.drift.lambda_rel < 1e-7, "{name}: lambda drift {}", tr.drift.lambda_rel);
            prop_assert!(tr.drift.c_rel < 1e-7, "{name}: C drift {}", tr.drift.c_rel);
            prop_assert!(tr.drift.aux_conserved < 1e-7);
            // the causal character is that of the conserved C
            if tr.c0.abs() > 1e-3 {
                prop_assert!(tr.samples.iter().all(|p| p.c.signum() == tr.c0.signum()));
            }
        }
    }

    #[test]
    fn static_slice_geodesics_stay_at_constant_time(seed in any::<u64>()) {
        let mut r = rng(seed);
        let st = catalog::spacetime("quad_beta").unwrap();
        let x = point_in(&st, &[(-2.0, 2.0), (-2.0, 2.0)], &mut r);
        let v: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
        let t0 = r.gen_range(-5.0..5.0);
        let tr = integrate_geodesic(&st, &GeodesicState::new(t0, x.clone(), 0.0, v.clone()), 5.0, &GeodesicOptions::default()).unwrap();
        prop_assert!(tr.samples.iter().all(|p| (p.state.t - t0).abs() <= 1e-12));
        let sg = integrate_slice_geodesic(st.chart(), &x, &v, &SliceGeodesicOptions { s_max: 5.0, ..Default::default() }).unwrap();
        let end = sg.end_position();
        for (a, b) in tr.last().x.iter().zip(end) {
            prop_assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn power_laws_recover_their_exponent(p in 0u32..=4) {
        let pf = p as f64;
        let st = StaticSpacetime::new("power", Chart::euclidean(2), move |x: &[f64]| {
            (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(0.5 * pf)
        });
        let rep = growth_exponent(&st, GrowthTarget::Beta, &[0.0, 0.0], &log_radii(1.0, 1000.0, 13), &GrowthOptions::default()).unwrap();
        prop_assert!((rep.exponent - pf).abs() < 0.1, "p = {p}: fitted {}", rep.exponent);
    }

    #[test]
    fn trajectory_csv_round_trips(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 10)) {
        let smp = TrajectorySample {
            s: vals[0],
            state: GeodesicState::new(vals[1], vec![vals[2], vals[3]], vals[4], vec![vals[5], vals[6]]),
            lambda: vals[7],
            c: vals[8],
            aux_norm: vals[9],
        };
        let text = io::trajectory_csv(2, std::slice::from_ref(&smp));
        prop_assert_eq!(io::parse_trajectory_csv(2, &text).unwrap(), vec![smp]);
    }

    #[test]
    fn curve_and_growth_csv_round_trip(vals in prop::collection::vec(-1e300f64..1e300, 12)) {
        let c = SliceCurve::from_flat(3, vals.clone()).unwrap();
        prop_assert_eq!(io::parse_curve_csv(3, &io::curve_csv(&c)).unwrap(), c);
        let radii: Vec<f64> = vals[..6].to_vec();
        let f: Vec<Option<f64>> = vals[6..].iter().map(|v| (*v > 0.0).then_some(*v)).collect();
        let back = io::parse_growth_csv(&io::growth_csv(&radii, &f)).unwrap();
        prop_assert_eq!(back, radii.into_iter().zip(f).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn slice_distance_is_symmetric(seed in any::<u64>()) {
        let st = catalog::spacetime("quad_beta").unwrap();
        let conf = st.conformal_slice();
        let mut r = rng(seed);
        let a = point_in(&st, &[(-2.0, 2.0), (-2.0, 2.0)], &mut r);
        let b = point_in(&st, &[(-2.0, 2.0), (-2.0, 2.0)], &mut r);
        let opts = DistanceOptions::default();
        let ab = slice_distance(&conf, &a, &b, &opts).unwrap().length;
        let ba = slice_distance(&conf, &b, &a, &opts).unwrap().length;
        prop_assert!((ab - ba).abs() < 1e-6 * (1.0 + ab), "{ab} vs {ba}");
    }

    #[test]
    fn removing_the_slit_never_delays_arrival(seed in any::<u64>()) {
        let slit = catalog::spacetime("slit_plane").unwrap();
        let full = catalog::spacetime("flat_plane").unwrap();
        let mut r = rng(seed);
        let target = point_in(&slit, &[(1.2, 3.0), (-2.0, 2.0)], &mut r);
        let opts = DistanceOptions::default();
        let a = causal_arrival(&slit, 0.0, &[0.0, 0.0], &target, &opts).unwrap();
        let b = causal_arrival(&full, 0.0, &[0.0, 0.0], &target, &opts).unwrap();
        prop_assert!(b.infimum_t <= a.infimum_t + 1e-9, "full {} slit {}", b.infimum_t, a.infimum_t);
        prop_assert!(b.attained);
    }

    #[test]
    fn flat_plane_never_yields_a_witness(seed in any::<u64>()) {
        let st = catalog::spacetime("flat_plane").unwrap();
        let opts = ProbeOptions { n_samples: 8, s_max: 50.0, seed, ..Default::default() };
        for m in [ProbeMetric::G, ProbeMetric::GR, ProbeMetric::GSStar] {
            let rep = completeness_probe(&st, m, &[(-5.0, 5.0), (-5.0, 5.0)], &opts).unwrap();
            prop_assert_eq!(rep.verdict, ProbeVerdict::NoWitness);
            prop_assert_eq!(rep.n_escapes, 0);
        }
    }
}
