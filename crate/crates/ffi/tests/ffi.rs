use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use primcodec_ffi::*;

fn last_error() -> String {
    let p = pc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_dataset() -> *mut PcDataset {
    let cfg = CString::new(r#"{"samples_per_primitive": 3, "seed": 5, "arm": {"steps": 10, "height": 8, "width": 8}}"#)
        .unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { pc_dataset_generate(cfg.as_ptr(), &mut ds) }, PcStatus::Ok, "{}", last_error());
    assert!(!ds.is_null());
    ds
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(pc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_shape_and_labels() {
    let ds = small_dataset();
    let (mut n, mut t, mut p, mut px, mut k) = (0, 0, 0, 0, 0);
    assert_eq!(unsafe { pc_dataset_shape(ds, &mut n, &mut t, &mut p, &mut px, &mut k) }, PcStatus::Ok);
    assert_eq!((n, t, p, px, k), (12, 10, 3, 64, 4));

    let mut labels = vec![0usize; n];
    assert_eq!(unsafe { pc_dataset_labels(ds, labels.as_mut_ptr(), n) }, PcStatus::Ok);
    assert_eq!(labels, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);

    let mut motor = vec![0.0; t * p];
    assert_eq!(unsafe { pc_dataset_motor(ds, 0, motor.as_mut_ptr(), t * p) }, PcStatus::Ok);
    assert!(motor.iter().all(|v| v.abs() <= 1.0 + 1e-12));

    let mut short = vec![0.0; 3];
    assert_eq!(unsafe { pc_dataset_motor(ds, 0, short.as_mut_ptr(), 3) }, PcStatus::BufferSize);
    assert!(last_error().contains("needed"));
    assert_eq!(unsafe { pc_dataset_motor(ds, 99, motor.as_mut_ptr(), t * p) }, PcStatus::Config);
    unsafe { pc_dataset_free(ds) };
}

#[test]
fn dataset_round_trips_through_disk() {
    let ds = small_dataset();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { pc_dataset_save(ds, path.as_ptr()) }, PcStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { pc_dataset_load(path.as_ptr(), &mut back) }, PcStatus::Ok);
    let mut a = vec![0.0; 30];
    let mut b = vec![0.0; 30];
    unsafe {
        pc_dataset_motor(ds, 7, a.as_mut_ptr(), 30);
        pc_dataset_motor(back, 7, b.as_mut_ptr(), 30);
        pc_dataset_free(ds);
        pc_dataset_free(back);
    }
    assert_eq!(a, b);
}

#[test]
fn errors_map_to_status_codes() {
    let mut ds = ptr::null_mut();
    let bad = CString::new(r#"{"seed": 1}"#).unwrap();
    assert_eq!(unsafe { pc_dataset_generate(bad.as_ptr(), &mut ds) }, PcStatus::Config);
    assert!(last_error().contains("samples_per_primitive"));
    assert!(ds.is_null());

    assert_eq!(unsafe { pc_dataset_generate(ptr::null(), &mut ds) }, PcStatus::NullPointer);
    let missing = CString::new("/nonexistent/primcodec").unwrap();
    assert_eq!(unsafe { pc_dataset_load(missing.as_ptr(), &mut ds) }, PcStatus::Io);
    assert_eq!(unsafe { pc_model_load(missing.as_ptr(), &mut ptr::null_mut()) }, PcStatus::Io);

    // A successful call clears the message.
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pc_projection_new(4, 2, 1, &mut p) }, PcStatus::Ok);
    assert!(pc_last_error().is_null());
    unsafe { pc_projection_free(p) };
}

#[test]
fn projection_is_linear_and_seeded() {
    let mut p = ptr::null_mut();
    let mut p2 = ptr::null_mut();
    unsafe {
        assert_eq!(pc_projection_new(5, 3, 11, &mut p), PcStatus::Ok);
        assert_eq!(pc_projection_new(5, 3, 11, &mut p2), PcStatus::Ok);
    }
    let a = [1.0, 0.0, 2.0, -1.0, 0.5];
    let b = [0.0, 3.0, 1.0, 1.0, -2.0];
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + 2.0 * y).collect();
    let mut za = [0.0; 3];
    let mut zb = [0.0; 3];
    let mut zs = [0.0; 3];
    let mut za2 = [0.0; 3];
    unsafe {
        pc_projection_apply(p, a.as_ptr(), 5, za.as_mut_ptr(), 3);
        pc_projection_apply(p, b.as_ptr(), 5, zb.as_mut_ptr(), 3);
        pc_projection_apply(p, sum.as_ptr(), 5, zs.as_mut_ptr(), 3);
        pc_projection_apply(p2, a.as_ptr(), 5, za2.as_mut_ptr(), 3);
        assert_eq!(pc_projection_apply(p, a.as_ptr(), 4, za.as_mut_ptr(), 3), PcStatus::Config);
        pc_projection_free(p);
        pc_projection_free(p2);
    }
    for i in 0..3 {
        assert!((zs[i] - za[i] - 2.0 * zb[i]).abs() < 1e-12);
    }
    assert_eq!(za, za2);
}

#[test]
fn resample_preserves_constants() {
    let input = [0.25; 10 * 2];
    let mut out = vec![0.0; 20 * 2];
    let s = unsafe { pc_resample(input.as_ptr(), 10, 2, 20, out.as_mut_ptr(), out.len()) };
    assert_eq!(s, PcStatus::Ok);
    assert!(out.iter().all(|v| (v - 0.25).abs() < 1e-10));
    let s = unsafe { pc_resample(input.as_ptr(), 10, 2, 20, out.as_mut_ptr(), 7) };
    assert_eq!(s, PcStatus::BufferSize);
}

#[test]
fn cluster_separates_two_lines() {
    // Two 1-D subspaces of R³.
    let mut z = Vec::new();
    for i in 1..=6 {
        let t = i as f64;
        z.extend_from_slice(&[t, 2.0 * t, 0.0]);
    }
    for i in 1..=6 {
        let t = i as f64;
        z.extend_from_slice(&[0.0, -t, 3.0 * t]);
    }
    let mut labels = vec![9usize; 12];
    let mut r2 = 0.0;
    let mut tau = 0.0;
    let s = unsafe { pc_cluster(z.as_ptr(), 12, 3, 2, false, 0.0, 1, labels.as_mut_ptr(), &mut r2, &mut tau) };
    assert_eq!(s, PcStatus::Ok, "{}", last_error());
    assert!(labels[..6].iter().all(|l| *l == labels[0]));
    assert!(labels[6..].iter().all(|l| *l == labels[6]));
    assert_ne!(labels[0], labels[6]);
    assert!(tau > 0.0 && r2 > 0.0);

    let s = unsafe { pc_cluster(z.as_ptr(), 12, 3, 20, false, 0.0, 1, labels.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, PcStatus::Config);
}

#[test]
fn intra_report_and_model_decoding() {
    let ds = small_dataset();
    let cfg = CString::new(
        r#"{"epochs_train": 2, "epochs_eval": 2, "latent_dim": 4, "train_fraction": 0.5,
            "model": {"layer_sizes": [5, 3], "timescales": [2.0, 4.0], "pb_hidden": 4, "pb_out": 3,
                      "motor_hidden": 4, "sensory_hidden": 0}}"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pc_run_intra(ds, cfg.as_ptr(), &mut out) }, PcStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { pc_string_free(out) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["experiment"], "intra");
    assert_eq!(v["runs"][0]["phases"][1]["curve"].as_array().unwrap().len(), 3);
    unsafe { pc_dataset_free(ds) };
}

#[test]
fn model_generates_motor_sequence() {
    use primcodec::mtrnn::{init_params, save_model, MtrnnArch};
    let mut arch = MtrnnArch::new(4, 3, 9, 6);
    arch.layer_sizes = vec![5, 3];
    let model = init_params(&arch, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_model(&model, &path).unwrap();

    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pc_model_load(c.as_ptr(), &mut m) }, PcStatus::Ok);
    let (mut q, mut t, mut p) = (0, 0, 0);
    unsafe { pc_model_shape(m, &mut q, &mut t, &mut p) };
    assert_eq!((q, t, p), (4, 6, 3));
    let z = [0.1, -0.2, 0.3, 0.0];
    let mut out = vec![0.0; t * p];
    assert_eq!(unsafe { pc_model_generate(m, z.as_ptr(), 4, out.as_mut_ptr(), out.len()) }, PcStatus::Ok);
    let direct = primcodec::mtrnn::forward(&model, &z).unwrap();
    assert_eq!(out, direct.motor.as_slice());
    assert_eq!(unsafe { pc_model_generate(m, z.as_ptr(), 3, out.as_mut_ptr(), out.len()) }, PcStatus::Config);
    unsafe { pc_model_free(m) };
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/primcodec.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["pc_version", "pc_last_error", "pc_cluster", "pc_resample", "pc_dataset_free", "PC_STATUS_IO = 4"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler; skipped compile check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
