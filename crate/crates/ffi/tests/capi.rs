use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use scfloer_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { scf_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn ddt_index_through_the_abi() {
    let (mut k, mut c, mut i) = (0usize, 0usize, 0i64);
    for level in 0..3 {
        assert_eq!(unsafe { scf_ddt_index(16, level, &mut k, &mut c, &mut i) }, ScfStatus::Ok);
        assert_eq!((k, c, i), (1, 1, 0));
    }
    assert_eq!(unsafe { scf_ddt_index(2, 0, &mut k, &mut c, &mut i) }, ScfStatus::InvalidArgument);
    assert!(last_error().contains("n_t"));
    assert_eq!(unsafe { scf_ddt_index(16, 0, ptr::null_mut(), &mut c, &mut i) }, ScfStatus::NullPointer);
}

#[test]
fn config_errors_carry_the_field() {
    let mut cfg: *mut ScfConfig = ptr::null_mut();
    let text = CString::new("[grid]\nn_s = 4\n").unwrap();
    assert_eq!(unsafe { scf_config_from_toml(text.as_ptr(), &mut cfg) }, ScfStatus::Config);
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { scf_config_preset(11, &mut cfg) }, ScfStatus::InvalidArgument);
    assert_eq!(unsafe { scf_config_from_toml(ptr::null(), &mut cfg) }, ScfStatus::NullPointer);
}

#[test]
fn toml_round_trip_and_buffer_sizing() {
    let mut cfg: *mut ScfConfig = ptr::null_mut();
    assert_eq!(unsafe { scf_config_default(&mut cfg) }, ScfStatus::Ok);
    let mut needed = 0usize;
    assert_eq!(unsafe { scf_config_to_toml(cfg, ptr::null_mut(), 0, &mut needed) }, ScfStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { scf_config_to_toml(cfg, buf.as_mut_ptr(), buf.len(), &mut needed) }, ScfStatus::Ok);
    let mut back: *mut ScfConfig = ptr::null_mut();
    assert_eq!(unsafe { scf_config_from_toml(buf.as_ptr(), &mut back) }, ScfStatus::Ok);
    unsafe {
        scf_config_free(back);
        scf_config_free(cfg);
        scf_config_free(ptr::null_mut());
    }
}

#[test]
fn suite_run_and_artifacts() {
    let mut cfg: *mut ScfConfig = ptr::null_mut();
    assert_eq!(unsafe { scf_config_preset(10, &mut cfg) }, ScfStatus::Ok);
    let name = CString::new("linop-index").unwrap();
    assert_eq!(unsafe { scf_suite_exit_code(name.as_ptr()) }, 4);
    let bogus = CString::new("nope").unwrap();
    assert_eq!(unsafe { scf_suite_exit_code(bogus.as_ptr()) }, -1);
    let mut rep: *mut ScfReport = ptr::null_mut();
    assert_eq!(unsafe { scf_run_suite(cfg, bogus.as_ptr(), &mut rep) }, ScfStatus::InvalidArgument);
    assert_eq!(unsafe { scf_run_suite(cfg, name.as_ptr(), &mut rep) }, ScfStatus::Ok);
    assert!(unsafe { scf_report_passed(rep) });
    assert_eq!(unsafe { scf_report_criterion_count(rep) }, 1);
    let (mut id, mut pass) = (0u32, false);
    assert_eq!(unsafe { scf_report_criterion(rep, 0, &mut id, &mut pass) }, ScfStatus::Ok);
    assert_eq!((id, pass), (10, true));
    assert_eq!(unsafe { scf_report_criterion(rep, 1, &mut id, &mut pass) }, ScfStatus::InvalidArgument);
    let mut buf = vec![0 as c_char; 4096];
    assert_eq!(unsafe { scf_report_summary(rep, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, ScfStatus::Ok);
    assert!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().starts_with("PASS criterion 10"));
    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { scf_report_write(rep, cfg, d.as_ptr()) }, ScfStatus::Ok);
    assert!(dir.path().join("linop-index_summary.json").exists());
    assert!(dir.path().join("linop-index_ddt_index.csv").exists());
    unsafe {
        scf_report_free(rep);
        scf_config_free(cfg);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/scfloer.h");
    let src = tempfile::Builder::new().suffix(".c").tempfile().unwrap();
    std::fs::write(src.path(), format!("#include \"{header}\"\nint main(void) {{ ScfStatus s = SCF_STATUS_OK; return (int)s; }}\n")).unwrap();
    let out = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(src.path()).output().expect("a C compiler");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
