use serde_json::Value;
use std::process::{Command, Output};

fn hillband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hillband")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn info_reports_case_and_dual() {
    let out = hillband(&["info", "--n", "2,2,1,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["case"], "B");
    assert_eq!(v["g"], 3);
    assert_eq!(v["m"], 2);
    assert_eq!(v["dual"], serde_json::json!([3, 1, 0, 0]));
}

#[test]
fn verify_lame_passes() {
    let out = hillband(&["verify", "--n", "1,0,0,0", "--tau", "1.0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["all_passed"], true);
    assert_eq!(v["thm11_consistent"], true);
    assert_eq!(v["thm12_counts_match"], true);
    assert_eq!(v["edge_signs_match"], true);
}

#[test]
fn scan_flags_complex_pairs() {
    let out = hillband(&["scan", "--n", "1,2,2,1", "--tau-list", "0.5,0.8,1.0,1.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let pairs: usize = row.split(',').nth(7).unwrap().parse().unwrap();
        assert!(pairs >= 1, "{row}");
    }
}

#[test]
fn scan_accepts_ranges() {
    let out = hillband(&["scan", "--n", "1,0,0,0", "--tau-list", "0.5:1.5:0.25", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let taus: Vec<f64> = v.as_array().unwrap().iter().map(|r| r["tau_im"].as_f64().unwrap()).collect();
    assert_eq!(taus, [0.5, 0.75, 1.0, 1.25, 1.5]);
}

#[test]
fn output_is_deterministic() {
    let args = ["spectrum", "--n", "2,1,0,0", "--tau", "0.9"];
    let a = hillband(&args);
    let b = hillband(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn qpoly_roots_match_spectrum_roots() {
    let q = json_of(&hillband(&["qpoly", "--n", "2,2,1,0"]));
    let s = json_of(&hillband(&["spectrum", "--n", "2,2,1,0"]));
    assert_eq!(q["roots"], s["roots"]);
    assert_eq!(s["bands"].as_array().unwrap().len(), 4);
    assert!(s["bands"][0][0].is_null());
}

#[test]
fn gaps_lists_the_closed_gap() {
    let v = json_of(&hillband(&["gaps", "--n", "2,2,1,0"]));
    assert_eq!(v["counts"], serde_json::json!([0, 0, 1]));
    assert_eq!(v["gaps"][2]["hits"][0]["parity"], -2);
}

#[test]
fn disc_of_lame_at_band_edge() {
    let v = json_of(&hillband(&["disc", "--n", "1,0,0,0", "--E", "0,0"]));
    let d = v["Delta"][0].as_f64().unwrap();
    assert!((d + 2.0).abs() < 1e-8, "{d}");
}

#[test]
fn arcs_write_csv() {
    let out = hillband(&["arcs", "--n", "1,0,0,0", "--window", "-10,10,-1,1", "--res", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("arc_id,re_E,im_E,re_Delta\n"));
    for line in text.lines().skip(1) {
        let im: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(im.abs() < 1e-3);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(hillband(&["info", "--n", "1,2"]).status.code(), Some(1));
    assert_eq!(hillband(&["qpoly", "--tau", "0.1"]).status.code(), Some(1));
    assert_eq!(hillband(&["bogus"]).status.code(), Some(1));
    assert_eq!(hillband(&["--help"]).status.code(), Some(0));
    let out = hillband(&["gaps", "--n", "1,2,2,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("BandStructureMissing"));
}

#[test]
fn thread_cap_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_hillband"))
        .args(["scan", "--n", "1,0,0,0", "--tau-list", "0.5,1.0"])
        .env("HILLBAND_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let bad = Command::new(env!("CARGO_BIN_EXE_hillband")).arg("info").env("HILLBAND_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn out_flag_writes_a_file() {
    let path = std::env::temp_dir().join(format!("hillband-cli-{}.json", std::process::id()));
    let out = hillband(&["info", "--n", "3,0,0,0", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(v["case"], "A");
}
