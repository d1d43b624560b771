use staticgeo::catalog;
use staticgeo::connect::{action_j, minimize_action, ConnectOptions, ConnectStatus};
use staticgeo::manifold::{slice_distance, DistanceOptions};

fn opts(segments: usize) -> ConnectOptions {
    ConnectOptions {
        segments,
        ..Default::default()
    }
}

#[test]
fn geodesic_status_pins_lambda_and_endpoints() {
    let cases: [(&str, &[f64], &[f64], f64); 4] = [
        ("quad_beta", &[-1.0, 0.5], &[1.0, -1.0], 4.0),
        ("quad_beta", &[0.5, 0.5], &[-2.0, 1.0], -6.0),
        ("schwarzschild_exterior", &[6.0, 0.0], &[8.0, 0.7], 5.0),
        ("minkowski", &[0.0], &[1.0], 0.5),
    ];
    for (name, x0, x1, dt) in cases {
        let st = catalog::spacetime(name).unwrap();
        let r = minimize_action(&st, x0, x1, 1.25, dt, &ConnectOptions::default()).unwrap();
        assert_eq!(r.status, ConnectStatus::Geodesic, "{name} {x1:?}: residual {}", r.residual);
        assert!(r.residual < ConnectOptions::default().residual_tol);
        let states = r.lifted_states(&st).unwrap();
        let (first, last) = (&states[0].1, &states[states.len() - 1].1);
        assert_eq!(first.x.coords(), x0);
        assert_eq!(last.x.coords(), x1);
        assert_eq!(first.t, 1.25);
        assert_eq!(last.t, 1.25 + dt);
        for (_, s) in &states {
            let b = st.beta_at(&s.x).unwrap();
            assert!((b * s.t_dot - r.lambda).abs() < 1e-8, "{name}: {}", b * s.t_dot - r.lambda);
        }
    }
}

// J at a critical curve converges at second order in 1/N
#[test]
fn doubling_segments_shrinks_the_change_in_j() {
    let st = catalog::spacetime("schwarzschild_exterior").unwrap();
    let j: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let r = minimize_action(&st, &[5.0, 0.0], &[9.0, 0.8], 0.0, 6.0, &opts(n)).unwrap();
            assert_eq!(r.status, ConnectStatus::Geodesic);
            r.j_value
        })
        .collect();
    let (d1, d2) = ((j[1] - j[0]).abs(), (j[2] - j[1]).abs());
    assert!(d2 < 4.0 * d1, "{j:?}");
    let ratio = d2 / d1;
    assert!(ratio > 0.15 && ratio < 0.35, "ratio {ratio} {j:?}");
}

#[test]
fn zero_delta_t_matches_the_slice_distance() {
    let st = catalog::spacetime("schwarzschild_exterior").unwrap();
    let (x0, x1) = ([4.0, 0.0], [7.0, 1.1]);
    let r = minimize_action(&st, &x0, &x1, 0.0, 0.0, &opts(128)).unwrap();
    assert_eq!(r.status, ConnectStatus::Geodesic);
    assert_eq!(r.lambda, 0.0);
    let d = slice_distance(
        st.chart(),
        &x0,
        &x1,
        &DistanceOptions {
            segments: 128,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(d.attained);
    // at Δt = 0 the action is half the curve energy, L²/2 at a geodesic
    let l = (2.0 * r.j_value).sqrt();
    assert!((l - d.length).abs() < 1e-6 * d.length, "{l} vs {}", d.length);
    // the connecting curve is the distance minimizer
    let j_of_min = action_j(&st, d.minimizer.as_ref().unwrap(), 0.0).unwrap().j;
    assert!((j_of_min - r.j_value).abs() < 1e-8, "{j_of_min} vs {}", r.j_value);
}

#[test]
fn catalog_domains() {
    let names: Vec<_> = catalog::catalog_list().into_iter().map(|e| e.name).collect();
    assert!(names.contains(&"minkowski"));
    let ads = catalog::spacetime("ads_strip").unwrap();
    assert!(!ads.chart().in_domain(&[std::f64::consts::FRAC_PI_4]));
    assert!(!ads.chart().in_domain(&[-std::f64::consts::FRAC_PI_4]));
    assert!(ads.chart().in_domain(&[0.78]));
    let slit = catalog::spacetime("slit_plane").unwrap();
    assert!(!slit.chart().in_domain(&[1.0, 0.5]));
    assert!(slit.chart().in_domain(&[1.0, 1.5]));
    let sch = catalog::spacetime("schwarzschild_exterior").unwrap();
    assert!(!sch.chart().in_domain(&[2.0, 0.0]));
    assert!(sch.beta_at(&[1.5, 0.0]).is_err());
}
