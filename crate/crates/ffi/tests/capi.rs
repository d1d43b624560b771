use std::ffi::{CStr, CString};
use std::ptr;

use staticgeo_ffi::*;

fn last_error() -> String {
    let p = sg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn spacetime(name: &str) -> *mut SgSpacetime {
    let name = CString::new(name).unwrap();
    let mut st = ptr::null_mut();
    assert_eq!(unsafe { sg_spacetime_new(name.as_ptr(), &mut st) }, SgStatus::Ok);
    assert!(sg_last_error_message().is_null());
    st
}

#[test]
fn beta_and_domain() {
    let st = spacetime("quad_beta");
    unsafe {
        assert_eq!(sg_spacetime_dim(st), 2);
        let mut b = 0.0;
        assert_eq!(sg_spacetime_beta(st, [1.0, 2.0].as_ptr(), 2, &mut b), SgStatus::Ok);
        assert_eq!(b, 6.0);
        assert_eq!(sg_spacetime_beta(st, [1.0].as_ptr(), 1, &mut b), SgStatus::Validation);
        assert!(last_error().contains("dimension"));
        sg_spacetime_free(st);

        let slit = spacetime("slit_plane");
        let mut inside = true;
        assert_eq!(sg_spacetime_in_domain(slit, [1.0, 0.5].as_ptr(), 2, &mut inside), SgStatus::Ok);
        assert!(!inside);
        assert_eq!(sg_spacetime_in_domain(slit, [1.0, 1.5].as_ptr(), 2, &mut inside), SgStatus::Ok);
        assert!(inside);
        sg_spacetime_free(slit);
    }
}

#[test]
fn bad_arguments_are_reported() {
    unsafe {
        let mut st = ptr::null_mut();
        let name = CString::new("nope").unwrap();
        assert_eq!(sg_spacetime_new(name.as_ptr(), &mut st), SgStatus::Validation);
        assert!(st.is_null());
        assert!(last_error().contains("nope"));
        assert_eq!(sg_spacetime_new(ptr::null(), &mut st), SgStatus::NullArgument);
        let json = CString::new(r#"{"name": "ads_strip", "m": 1}"#).unwrap();
        assert_eq!(sg_spacetime_from_json(json.as_ptr(), &mut st), SgStatus::Validation);
        let json = CString::new("{").unwrap();
        assert_eq!(sg_spacetime_from_json(json.as_ptr(), &mut st), SgStatus::Validation);
        assert_eq!(sg_spacetime_beta(ptr::null(), ptr::null(), 0, ptr::null_mut()), SgStatus::NullArgument);
        assert_eq!(sg_spacetime_dim(ptr::null()), 0);
        sg_spacetime_free(ptr::null_mut());
        sg_trajectory_free(ptr::null_mut());
        sg_connection_free(ptr::null_mut());
        sg_string_free(ptr::null_mut());
    }
}

#[test]
fn json_spec_overrides_parameters() {
    let json = CString::new(r#"{"name": "schwarzschild_exterior", "m": 2}"#).unwrap();
    let mut st = ptr::null_mut();
    unsafe {
        assert_eq!(sg_spacetime_from_json(json.as_ptr(), &mut st), SgStatus::Ok);
        let mut b = 0.0;
        assert_eq!(sg_spacetime_beta(st, [8.0, 0.0].as_ptr(), 2, &mut b), SgStatus::Ok);
        assert!((b - 0.5).abs() < 1e-15);
        // r = 3 is inside the horizon for m = 2
        assert_eq!(sg_spacetime_beta(st, [3.0, 0.0].as_ptr(), 2, &mut b), SgStatus::Validation);
        sg_spacetime_free(st);
    }
}

#[test]
fn integrate_conserves_lambda() {
    let st = spacetime("quad_beta");
    unsafe {
        let mut tr = ptr::null_mut();
        let s = sg_geodesic_integrate(st, 0.0, [0.5, -0.2].as_ptr(), 1.0, [0.3, 0.4].as_ptr(), 2, 5.0, 0.0, &mut tr);
        assert_eq!(s, SgStatus::Ok);
        let len = sg_trajectory_len(tr);
        assert!(len > 2);
        let (mut dl, mut dc) = (1.0, 1.0);
        assert_eq!(sg_trajectory_drift(tr, &mut dl, &mut dc), SgStatus::Ok);
        assert!(dl < 1e-8 && dc < 1e-7, "{dl} {dc}");
        let mut kind = SgTermination::BlowUp;
        let mut s_end = 0.0;
        assert_eq!(sg_trajectory_termination(tr, &mut kind, &mut s_end), SgStatus::Ok);
        assert_eq!(kind, SgTermination::ReachedSMax);
        assert_eq!(s_end, 5.0);
        let mut state = [0.0; 6];
        let mut s = 0.0;
        assert_eq!(sg_trajectory_sample(tr, 0, &mut s, state.as_mut_ptr(), 6), SgStatus::Ok);
        assert_eq!((s, state), (0.0, [0.0, 0.5, -0.2, 1.0, 0.3, 0.4]));
        assert_eq!(sg_trajectory_sample(tr, len - 1, &mut s, state.as_mut_ptr(), 6), SgStatus::Ok);
        let beta = 1.0 + state[1] * state[1] + state[2] * state[2];
        assert!((beta * state[3] - 1.29).abs() < 1e-8);
        assert_eq!(sg_trajectory_sample(tr, len, &mut s, state.as_mut_ptr(), 6), SgStatus::Validation);
        assert_eq!(sg_trajectory_sample(tr, 0, &mut s, state.as_mut_ptr(), 5), SgStatus::Validation);
        sg_trajectory_free(tr);

        let disk = spacetime("unit_disk");
        let mut tr = ptr::null_mut();
        let s = sg_geodesic_integrate(disk, 0.0, [0.0, 0.0].as_ptr(), 1.0, [0.5, 0.0].as_ptr(), 2, 10.0, 0.0, &mut tr);
        assert_eq!(s, SgStatus::Ok);
        assert_eq!(sg_trajectory_termination(tr, &mut kind, &mut s_end), SgStatus::Ok);
        assert_eq!(kind, SgTermination::LeftDomain);
        assert!((s_end - 2.0).abs() < 1e-6, "{s_end}");
        sg_trajectory_free(tr);
        sg_spacetime_free(disk);
    }
    unsafe { sg_spacetime_free(st) };
}

#[test]
fn connect_and_read_back_the_curve() {
    let st = spacetime("minkowski");
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(sg_connect(st, [0.0].as_ptr(), [1.0].as_ptr(), 1, 0.5, 2.0, 16, &mut c), SgStatus::Ok);
        let mut status = SgConnectStatus::MaxIter;
        assert_eq!(sg_connection_status(c, &mut status), SgStatus::Ok);
        assert_eq!(status, SgConnectStatus::Geodesic);
        let mut sum = SgConnectSummary::default();
        assert_eq!(sg_connection_summary(c, &mut sum), SgStatus::Ok);
        assert!((sum.lambda - 2.0).abs() < 1e-12 && (sum.c + 3.0).abs() < 1e-10);
        assert_eq!(sg_connection_len(c), 17);
        let (mut t, mut x) = (0.0, [0.0]);
        assert_eq!(sg_connection_node(c, 16, &mut t, x.as_mut_ptr(), 1), SgStatus::Ok);
        assert_eq!((t, x[0]), (2.5, 1.0));
        assert_eq!(sg_connection_node(c, 8, &mut t, x.as_mut_ptr(), 1), SgStatus::Ok);
        assert!((t - 1.5).abs() < 1e-12 && (x[0] - 0.5).abs() < 1e-12);
        assert_eq!(sg_connection_node(c, 17, &mut t, x.as_mut_ptr(), 1), SgStatus::Validation);
        sg_connection_free(c);
    }
    unsafe { sg_spacetime_free(st) };

    let ads = spacetime("ads_strip");
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(sg_connect(ads, [0.0].as_ptr(), [0.4].as_ptr(), 1, 0.0, 2.8, 0, &mut c), SgStatus::Ok);
        let mut status = SgConnectStatus::Geodesic;
        assert_eq!(sg_connection_status(c, &mut status), SgStatus::Ok);
        assert_eq!(status, SgConnectStatus::Diverged);
        sg_connection_free(c);
        sg_spacetime_free(ads);
    }
}

#[test]
fn arrival_around_the_slit() {
    let st = spacetime("slit_plane");
    unsafe {
        let mut a = SgArrival::default();
        assert_eq!(sg_causal_arrival(st, 0.0, [0.0, 0.0].as_ptr(), [2.0, 2.0].as_ptr(), 2, &mut a), SgStatus::Ok);
        assert!((a.infimum_t - 8f64.sqrt()).abs() < 1e-6);
        assert!(!a.attained);
        assert_eq!(
            sg_causal_arrival(st, 0.0, [0.0, 0.0].as_ptr(), [1.0, 0.0].as_ptr(), 2, &mut a),
            SgStatus::Validation
        );
        sg_spacetime_free(st);
    }
}

#[test]
fn catalog_json_lists_entries() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(sg_catalog_json(&mut s), SgStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        sg_string_free(s);
        assert!(text.contains("\"minkowski\"") && text.contains("\"ads_strip\""));
        assert_eq!(sg_catalog_json(ptr::null_mut()), SgStatus::NullArgument);
    }
}

#[test]
fn errors_are_per_thread() {
    let name = CString::new("nope").unwrap();
    let mut st = ptr::null_mut();
    assert_eq!(unsafe { sg_spacetime_new(name.as_ptr(), &mut st) }, SgStatus::Validation);
    std::thread::spawn(|| assert!(sg_last_error_message().is_null())).join().unwrap();
    assert!(last_error().contains("nope"));
}
