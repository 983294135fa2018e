use std::ffi::{CStr, CString};
use std::ptr;

use parabolic_ls_ffi::*;

fn spike_field(periodic: bool) -> *mut PlsField {
    let shape = [32usize, 32];
    let box_len = [1.0];
    let values: Vec<f64> = (0..32 * 32)
        .map(|i| {
            let (x, t) = ((i / 32) as f64 / 32.0, (i % 32) as f64 / 32.0);
            (2.0 * std::f64::consts::PI * x).sin() + (2.0 * std::f64::consts::PI * t).cos()
        })
        .collect();
    let mut f = ptr::null_mut();
    let st = unsafe {
        pls_field_new(
            1,
            shape.as_ptr(),
            box_len.as_ptr(),
            1.0,
            periodic,
            values.as_ptr(),
            values.len(),
            &mut f,
        )
    };
    assert_eq!(st, PlsStatus::Ok);
    assert!(!f.is_null());
    f
}

fn last_error() -> String {
    let p = pls_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn field_round_trip_through_file() {
    let f = spike_field(true);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.field").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(pls_field_write(f, path.as_ptr()), PlsStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(pls_field_read(path.as_ptr(), &mut g), PlsStatus::Ok);
        let n = pls_field_len(g);
        assert_eq!(n, 1024);
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(pls_field_values(f, a.as_mut_ptr(), n), PlsStatus::Ok);
        assert_eq!(pls_field_values(g, b.as_mut_ptr(), n), PlsStatus::Ok);
        assert_eq!(a, b);
        pls_field_free(g);
        pls_field_free(f);
    }
}

#[test]
fn norms_are_finite_and_positive() {
    let f = spike_field(true);
    unsafe {
        for form in [
            PlsBmoForm::Oscillation,
            PlsBmoForm::Inf,
            PlsBmoForm::Overline,
        ] {
            let mut v = f64::NAN;
            assert_eq!(pls_bmo_norm(f, form, &mut v), PlsStatus::Ok);
            assert!(v.is_finite() && v > 0.0);
        }
        let mut w = f64::NAN;
        assert_eq!(pls_sobolev_norm(f, 1, &mut w), PlsStatus::Ok);
        assert!(w > 0.0);
        let mut lt = f64::NAN;
        assert_eq!(
            pls_lt_norm(f, 0.0, f64::INFINITY, 2.0, true, &mut lt),
            PlsStatus::Ok
        );
        assert!(lt > 0.0);
        let mut c = f64::NAN;
        let check = CString::new("theorem1").unwrap();
        assert_eq!(pls_verify(f, check.as_ptr(), 1, &mut c), PlsStatus::Ok);
        assert!(c.is_finite() && c > 0.0);
        pls_field_free(f);
    }
}

#[test]
fn bands_sum_to_field() {
    let f = spike_field(true);
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(pls_decompose(f, &mut s), PlsStatus::Ok);
        let count = pls_bands_count(s);
        assert!(count >= 2);
        let mut sum = vec![0.0; 1024];
        for j in 0..count {
            let mut b = ptr::null_mut();
            assert_eq!(pls_band(s, j, &mut b), PlsStatus::Ok);
            let mut v = vec![0.0; 1024];
            assert_eq!(pls_field_values(b, v.as_mut_ptr(), 1024), PlsStatus::Ok);
            sum.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            pls_field_free(b);
        }
        let mut b = ptr::null_mut();
        assert_eq!(pls_band(s, count, &mut b), PlsStatus::InvalidArgument);
        let mut orig = vec![0.0; 1024];
        pls_field_values(f, orig.as_mut_ptr(), 1024);
        let err = sum
            .iter()
            .zip(&orig)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        pls_bands_free(s);
        pls_field_free(f);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(
            pls_bmo_norm(ptr::null(), PlsBmoForm::Inf, &mut v),
            PlsStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        let shape = [4usize, 4];
        let box_len = [1.0];
        let values = [0.0; 3];
        let mut f = ptr::null_mut();
        let st = pls_field_new(
            1,
            shape.as_ptr(),
            box_len.as_ptr(),
            1.0,
            true,
            values.as_ptr(),
            3,
            &mut f,
        );
        assert_ne!(st, PlsStatus::Ok);
        assert!(f.is_null());

        let g = spike_field(true);
        let bogus = CString::new("nope").unwrap();
        assert_eq!(
            pls_verify(g, bogus.as_ptr(), 1, &mut v),
            PlsStatus::InvalidArgument
        );
        assert!(last_error().contains("nope"));
        assert_eq!(pls_sobolev_norm(g, 0, &mut v), PlsStatus::InvalidArgument);

        let missing = CString::new("/nonexistent/dir/f.field").unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(pls_field_read(missing.as_ptr(), &mut h), PlsStatus::Io);
        pls_field_free(g);
        pls_field_free(ptr::null_mut());
        pls_bands_free(ptr::null_mut());
    }
}

#[test]
fn decomposing_a_bounded_field_is_refused() {
    let f = spike_field(false);
    unsafe {
        let mut s = ptr::null_mut();
        assert_ne!(pls_decompose(f, &mut s), PlsStatus::Ok);
        assert!(s.is_null());
        pls_field_free(f);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/parabolic_ls.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
}
