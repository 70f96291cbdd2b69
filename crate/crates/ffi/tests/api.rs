use std::ffi::CStr;
use std::ptr;

use mlmc_fem_ffi::*;

fn last_error() -> String {
    let p = mlmc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn obstacle_run_round_trip() {
    unsafe {
        let mut problem = ptr::null_mut();
        assert_eq!(mlmc_problem_obstacle(&mut problem), MlmcStatus::Ok);
        assert_eq!(mlmc_problem_dim(problem), 1);
        let mut settings = ptr::null_mut();
        assert_eq!(mlmc_settings_new(problem, MlmcMode::Adaptive, &mut settings), MlmcStatus::Ok);
        assert_eq!(mlmc_settings_set_seed(settings, 11, 0), MlmcStatus::Ok);
        let mut cal = ptr::null_mut();
        assert_eq!(mlmc_calibrate(problem, settings, 50, &mut cal), MlmcStatus::Ok);
        assert!(mlmc_calibration_eta1(cal) > 0.0);
        let mut report = ptr::null_mut();
        assert_eq!(mlmc_run(problem, settings, cal, 0.08, &mut report), MlmcStatus::Ok);
        let levels = mlmc_report_num_levels(report);
        assert!(levels >= 2);
        let mut total = 0.0;
        for l in 1..=levels {
            let (mut m, mut v, mut c) = (0usize, 0.0, 0.0);
            assert_eq!(mlmc_report_level(report, l, &mut m, &mut v, &mut c), MlmcStatus::Ok);
            assert!(m >= 1 && v >= 0.0 && c >= 17.0);
            total += m as f64 * c;
        }
        assert!((total - mlmc_report_total_cost(report) as f64).abs() < 1e-6 * total);
        assert_eq!(mlmc_report_level(report, 0, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), MlmcStatus::InvalidArgument);

        let n = mlmc_report_num_vertices(report);
        let mut values = vec![0.0; n];
        assert_eq!(mlmc_report_values(report, values.as_mut_ptr(), n - 1), MlmcStatus::BufferTooSmall);
        assert_eq!(mlmc_report_values(report, values.as_mut_ptr(), n), MlmcStatus::Ok);
        let mut coords = vec![0.0; 2 * n];
        assert_eq!(mlmc_report_coords(report, coords.as_mut_ptr(), 2 * n), MlmcStatus::Ok);
        assert!(coords.chunks(2).all(|p| (-1.0..=1.0).contains(&p[0]) && p[1] == 0.0));

        let mut err = f64::NAN;
        assert_eq!(mlmc_report_h1_error(report, problem, 32, &mut err), MlmcStatus::Ok);
        assert!(err.is_finite() && err < 0.2);

        let mut needed = 0usize;
        assert_eq!(mlmc_report_json(report, ptr::null_mut(), 0, &mut needed), MlmcStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(mlmc_report_json(report, buf.as_mut_ptr(), needed, ptr::null_mut()), MlmcStatus::Ok);
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(buf.as_ptr()).to_str().unwrap()).unwrap();
        assert_eq!(json["total_cost"].as_u64(), Some(mlmc_report_total_cost(report)));

        mlmc_report_free(report);
        mlmc_calibration_free(cal);
        mlmc_settings_free(settings);
        mlmc_problem_free(problem);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut problem = ptr::null_mut();
        assert_eq!(mlmc_problem_poisson(-1.0, &mut problem), MlmcStatus::InvalidArgument);
        assert!(problem.is_null());
        assert!(last_error().contains("beta") || !last_error().is_empty());
        assert_eq!(mlmc_problem_obstacle(ptr::null_mut()), MlmcStatus::NullPointer);
        assert!(last_error().contains("null pointer"));

        assert_eq!(mlmc_problem_obstacle(&mut problem), MlmcStatus::Ok);
        assert!(mlmc_last_error_message().is_null());
        let mut settings = ptr::null_mut();
        assert_eq!(mlmc_settings_new(problem, MlmcMode::Uniform, &mut settings), MlmcStatus::Ok);
        assert_eq!(mlmc_settings_set_theta(settings, 1.5), MlmcStatus::InvalidArgument);
        assert_eq!(mlmc_settings_set_m_min(settings, 1), MlmcStatus::InvalidArgument);
        assert_eq!(mlmc_settings_set_q(settings, 1.0), MlmcStatus::InvalidArgument);
        let mut report = ptr::null_mut();
        assert_eq!(mlmc_run(problem, settings, ptr::null(), -0.1, &mut report), MlmcStatus::InvalidArgument);
        assert!(report.is_null());
        assert!(last_error().contains("tolerance"));
        assert_eq!(mlmc_report_num_levels(ptr::null()), 0);
        assert!(mlmc_calibration_eta1(ptr::null()).is_nan());
        mlmc_report_free(ptr::null_mut());
        mlmc_settings_free(settings);
        mlmc_problem_free(problem);
    }
}

#[test]
fn status_names_and_version() {
    let name = unsafe { CStr::from_ptr(mlmc_status_name(MlmcStatus::BufferTooSmall)) };
    assert_eq!(name.to_str().unwrap(), "buffer too small");
    let v = unsafe { CStr::from_ptr(mlmc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
