use ofu_diffusion_ffi::*;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

fn last_error() -> String {
    unsafe {
        let n = ofu_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0 as std::ffi::c_char; n as usize + 1];
        assert_eq!(ofu_last_error_message(buf.as_mut_ptr(), buf.len()), n);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn benchmark_model_solves_and_runs() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(ofu_model_benchmark(0.2, &mut model), OfuStatus::Ok);
        let mut d = 0usize;
        assert_eq!(ofu_model_state_dim(model, &mut d), OfuStatus::Ok);
        assert_eq!(d, 1);

        let mut diff = ptr::null_mut();
        let mut jump = ptr::null_mut();
        assert_eq!(
            ofu_solve_diffusive(model, 6.0, 0.05, 17, &mut diff),
            OfuStatus::Ok
        );
        assert_eq!(
            ofu_solve_jump(model, 6.0, 0.05, 17, &mut jump),
            OfuStatus::Ok
        );
        let (mut rd, mut rj) = (0.0, 0.0);
        ofu_solution_rho(diff, &mut rd);
        ofu_solution_rho(jump, &mut rj);
        assert!(rd > rj && rj > 0.0, "{rd} {rj}");
        let mut len = 0usize;
        ofu_solution_len(jump, &mut len);
        assert_eq!(len, 241);
        let mut short = vec![0.0; 3];
        assert_eq!(
            ofu_solution_values(jump, short.as_mut_ptr(), 3),
            OfuStatus::BufferTooSmall
        );
        let mut w = vec![f64::NAN; len];
        assert_eq!(
            ofu_solution_values(jump, w.as_mut_ptr(), len),
            OfuStatus::Ok
        );
        assert_eq!(w[len / 2], 0.0);

        let mut run = ptr::null_mut();
        assert_eq!(
            ofu_agent_run(model, ptr::null(), 50.0, 3, &mut run),
            OfuStatus::Ok
        );
        let (mut n, mut k, mut regret) = (0usize, 0usize, 0.0);
        ofu_run_events(run, &mut n);
        ofu_run_episodes(run, &mut k);
        assert!(n > 100 && k >= 1);
        assert_eq!(ofu_run_regret(run, rj, &mut regret), OfuStatus::Ok);
        assert!(regret.is_finite());

        ofu_run_free(run);
        ofu_solution_free(diff);
        ofu_solution_free(jump);
        ofu_model_free(model);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(
            ofu_model_benchmark(2.0, &mut model),
            OfuStatus::InvalidConfig
        );
        assert!(model.is_null());
        assert!(last_error().contains("epsilon"));

        assert_eq!(
            ofu_model_from_json(ptr::null(), &mut model),
            OfuStatus::NullPointer
        );
        let junk = CString::new("{\"family\": 3}").unwrap();
        assert_eq!(
            ofu_model_from_json(junk.as_ptr(), &mut model),
            OfuStatus::InvalidConfig
        );
        assert!(!last_error().is_empty());

        let mut out = 0.0;
        assert_eq!(
            ofu_solution_rho(ptr::null(), &mut out),
            OfuStatus::NullPointer
        );
        assert_eq!(
            ofu_beta_n(0, 0.1, 0.1, 1.0, 0.0, 1.0, 1.0, &mut out),
            OfuStatus::InvalidArgument
        );

        let mut tiny = [0 as std::ffi::c_char; 2];
        assert_eq!(ofu_last_error_message(tiny.as_mut_ptr(), tiny.len()), -1);

        // Null handles are accepted by the destructors.
        ofu_model_free(ptr::null_mut());
        ofu_solution_free(ptr::null_mut());
        ofu_run_free(ptr::null_mut());
    }
}

#[test]
fn json_model_roundtrip() {
    let cfg = ofu_diffusion::model::ModelConfig::benchmark();
    let text = CString::new(serde_json::to_string(&cfg).unwrap()).unwrap();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(
            ofu_model_from_json(text.as_ptr(), &mut model),
            OfuStatus::Ok
        );
        let mut sol = ptr::null_mut();
        assert_eq!(
            ofu_solve_diffusive(model, 0.0, 0.05, 9, &mut sol),
            OfuStatus::InvalidConfig
        );
        ofu_model_free(model);
    }
}

#[test]
fn beta_matches_library() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            ofu_beta_n(1, 0.5, 0.25, 1.0, 0.0, 1.0, 1.0, &mut out),
            OfuStatus::Ok
        );
    }
    assert_eq!(
        out,
        ofu_diffusion::learning::beta_n(1, 0.5, 0.25, 1.0, 0.0, 1.0, 1.0)
    );
    let v = unsafe { CStr::from_ptr(ofu_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("ofu_diffusion.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs"))
        .unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(text.contains("OFU_STATUS_BUFFER_TOO_SMALL"));
}

/// Compiles and runs a C client against the shared library when a C
/// compiler is available.
#[test]
fn c_client_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        return;
    }
    // target/<profile>/deps/<test> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    if !lib_dir.join("libofu_diffusion_ffi.so").exists() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ofu_diffusion.h"
int main(void) {
    struct OfuModel *m = NULL;
    struct OfuSolution *s = NULL;
    double rho = 0.0;
    if (ofu_model_benchmark(0.1, &m) != OFU_STATUS_OK) return 3;
    if (ofu_solve_diffusive(m, 6.0, 0.1, 9, &s) != OFU_STATUS_OK) return 4;
    ofu_solution_rho(s, &rho);
    printf("%.6f\n", rho);
    if (ofu_model_benchmark(5.0, &m) != OFU_STATUS_INVALID_CONFIG) return 5;
    ofu_solution_free(s);
    ofu_model_free(m);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("client");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lofu_diffusion_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status);
    let rho: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(rho > 0.3 && rho < 1.0);
}
