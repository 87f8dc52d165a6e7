use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use npcsma::stability::stable_regions_exponential;
use npcsma::Population;
use npcsma_ffi::*;

fn reference_params() -> NpcsmaParams {
    NpcsmaParams {
        n: 50,
        a: 0.1,
        lambda_hat: 0.3,
        q: 0.4,
        scheme: NpcsmaScheme::Exponential,
        cap_k: 0,
    }
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        npcsma_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn analytic_entry_points_match_the_library() {
    unsafe {
        let (mut lmax, mut gstar) = (0.0, 0.0);
        assert_eq!(
            npcsma_max_throughput(0.1, &mut lmax, &mut gstar),
            NpcsmaStatus::Ok
        );
        let direct = npcsma::channel::max_throughput(0.1).unwrap();
        assert_eq!((lmax, gstar), (direct.lambda_max, direct.g_star));

        let (mut gs, mut gl) = (0.0, 0.0);
        assert_eq!(
            npcsma_attempt_rate_roots(0.3, 0.1, &mut gs, &mut gl),
            NpcsmaStatus::Ok
        );
        assert!(gs < gl);

        let mut regions = NpcsmaRegions::default();
        assert_eq!(
            npcsma_stable_regions(&reference_params(), &mut regions),
            NpcsmaStatus::Ok
        );
        let direct = stable_regions_exponential(Population::Finite(50), 0.3, 0.1).unwrap();
        assert_eq!(regions.region_delay.lo, direct.region_delay.lo);
        assert_eq!(regions.region_ii.hi, direct.region_ii.hi);
        assert_eq!(regions.g_hat_large, direct.g_hat_large);

        let mut m = NpcsmaMoments::default();
        assert_eq!(
            npcsma_service_moments(1.0, 0.5, 1, 10, 1.0, &mut m),
            NpcsmaStatus::Ok
        );
        assert!((m.mean - 1.1).abs() < 1e-12);
        let mut delay = 0.0;
        assert_eq!(npcsma_pk_mean_delay(0.0, &m, &mut delay), NpcsmaStatus::Ok);
        assert!((delay - m.mean).abs() < 1e-12);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let (mut gs, mut gl) = (0.0, 0.0);
        assert_eq!(
            npcsma_attempt_rate_roots(0.9, 0.1, &mut gs, &mut gl),
            NpcsmaStatus::NoStableRate
        );
        assert!(last_error().contains("maximum throughput"));
        assert_eq!(
            npcsma_attempt_rate_roots(0.3, 0.1, ptr::null_mut(), &mut gl),
            NpcsmaStatus::NullPointer
        );

        let mut m = NpcsmaMoments::default();
        assert_eq!(
            npcsma_service_moments(0.3, 0.5, 0, 10, 0.5, &mut m),
            NpcsmaStatus::NotErgodic
        );
        assert_eq!(
            npcsma_service_moments(0.55, 0.5, 0, 10, 0.5, &mut m),
            NpcsmaStatus::Ok
        );
        assert!(m.divergent);
        let mut delay = 0.0;
        assert_eq!(
            npcsma_pk_mean_delay(0.01, &m, &mut delay),
            NpcsmaStatus::UnboundedDelay
        );

        let mut bad = reference_params();
        bad.a = 1.5;
        let mut regions = NpcsmaRegions::default();
        assert_eq!(
            npcsma_stable_regions(&bad, &mut regions),
            NpcsmaStatus::InvalidArgument
        );
        let s = CStr::from_ptr(npcsma_status_string(NpcsmaStatus::InvalidArgument));
        assert_eq!(s.to_str().unwrap(), "invalid argument");
    }
}

#[test]
fn simulation_handles_round_trip() {
    unsafe {
        let mut params = reference_params();
        params.n = 10;
        params.lambda_hat = 0.2;
        let mut sim: *mut NpcsmaSimulation = ptr::null_mut();
        assert_eq!(
            npcsma_simulation_new(&params, 200_000, 20_000, 3, &mut sim),
            NpcsmaStatus::Ok
        );
        assert!(!sim.is_null());
        assert_eq!(npcsma_simulation_advance(sim, 1_000), NpcsmaStatus::Ok);
        let (mut now, mut backlog) = (0, 0);
        assert_eq!(
            npcsma_simulation_state(sim, &mut now, &mut backlog),
            NpcsmaStatus::Ok
        );
        assert_eq!(now, 1_000);

        let mut report: *mut NpcsmaReport = ptr::null_mut();
        assert_eq!(npcsma_simulation_finish(sim, &mut report), NpcsmaStatus::Ok);
        let mut s = NpcsmaSummary::default();
        assert_eq!(npcsma_report_summary(report, &mut s), NpcsmaStatus::Ok);
        assert!((s.throughput - 0.2).abs() < 0.03);
        assert_eq!(s.arrived, s.delivered + s.final_backlog);

        let mut count = 0usize;
        assert_eq!(
            npcsma_report_backlog_trace(report, ptr::null_mut(), ptr::null_mut(), 0, &mut count),
            NpcsmaStatus::Ok
        );
        assert_eq!(count, 20);
        let mut t = vec![0u64; count];
        let mut b = vec![0u64; count];
        assert_eq!(
            npcsma_report_backlog_trace(report, t.as_mut_ptr(), b.as_mut_ptr(), count, &mut count),
            NpcsmaStatus::Ok
        );
        assert_eq!(t[1], 10_000);

        npcsma_report_free(report);
        npcsma_simulation_free(sim);
        npcsma_simulation_free(ptr::null_mut());

        params.n = 0;
        let mut sim: *mut NpcsmaSimulation = ptr::null_mut();
        assert_eq!(
            npcsma_simulation_new(&params, 1000, 100, 1, &mut sim),
            NpcsmaStatus::InvalidArgument
        );
        assert!(sim.is_null());
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/npcsma.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "npcsma_simulation_new",
        "npcsma_report_free",
        "NPCSMA_STATUS_OK",
        "typedef struct NpcsmaSimulation NpcsmaSimulation",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args([
            "-std=c99",
            "-Wall",
            "-Werror",
            "-fsyntax-only",
            "-x",
            "c",
            header,
        ])
        .output()
    else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
