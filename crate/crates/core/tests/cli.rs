use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use ttstar_core::ade::cartan_seed;
use ttstar_core::braid::{apply_word, BraidWord, Generator};
use ttstar_core::io::{matrix_json, sha256_hex};

const OMEGA: &str = r#"{"u": [[1,0],[-0.5,0.8660254037844386],[-0.5,-0.8660254037844386]]}"#;
const PAIR: &str = r#"{"u": [[1,0],[-1,0]]}"#;

fn ttstar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttstar")).args(args).output().expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn a3_seed() -> String {
    let t = "A3".parse().unwrap();
    matrix_json(cartan_seed(t).unwrap().matrix()).to_string()
}

#[test]
fn rays_is_deterministic_and_hashes_input() {
    let dir = tempfile::tempdir().unwrap();
    let sp = write(dir.path(), "u.json", OMEGA);
    let a = ttstar(&["rays", "--spectrum", s(&sp)]);
    let b = ttstar(&["rays", "--spectrum", s(&sp)]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json_out(&a);
    assert_eq!(v["full_turn_crossings"], serde_json::json!([2, 1, 2, 1, 2, 1]));
    assert_eq!(v["provenance"]["inputs_sha256"]["spectrum"], sha256_hex(OMEGA.as_bytes()));
    assert!((v["delta"].as_f64().unwrap() - std::f64::consts::FRAC_PI_6).abs() < 1e-12);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let junk = write(dir.path(), "junk.json", "{not json");
    let lower = write(dir.path(), "m.json", "[[1,0],[2,1]]");
    let coincide = write(dir.path(), "u.json", r#"{"u": [[1,0],[1,0]]}"#);
    assert_eq!(ttstar(&["rays", "--spectrum", s(&junk)]).status.code(), Some(1));
    assert_eq!(ttstar(&["charges", "--matrix", s(&lower)]).status.code(), Some(1));
    assert_eq!(ttstar(&["rays", "--spectrum", s(&coincide)]).status.code(), Some(1));
    assert_eq!(ttstar(&["minimize-f", "--family", "E6", "--step", "0.2"]).status.code(), Some(1));
    let missing = ttstar(&["charges", "--matrix", "/nonexistent/m.json"]);
    assert_eq!(missing.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert!(err["error"].is_string());
}

#[test]
fn detect_ade_recovers_moved_seed() {
    let dir = tempfile::tempdir().unwrap();
    let seed = cartan_seed("D4".parse().unwrap()).unwrap();
    let moved = apply_word(&seed, &BraidWord(vec![Generator::Move(2), Generator::Move(1), Generator::Move(3)])).unwrap();
    let m = write(dir.path(), "m.json", &matrix_json(moved.matrix()).to_string());
    let o = ttstar(&["detect-ade", "--matrix", s(&m), "--bound", "4", "--permuted"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_eq!(v["type"], "D4");
    assert!(v["witness_word"].as_array().unwrap().len() <= 3);
}

#[test]
fn charges_exact_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", &a3_seed());
    let v = json_out(&ttstar(&["charges", "--matrix", s(&m)]));
    // S (S^-1)^t for A3 is a Coxeter element: eigenvalues are primitive 4th roots and -1
    let coeffs: Vec<&str> = v["charpoly"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(coeffs.len(), 4);
    for z in v["charges"].as_array().unwrap() {
        let (re, im) = (z[0].as_f64().unwrap(), z[1].as_f64().unwrap());
        assert!((re.hypot(im) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn certify_refuses_and_solve_stops() {
    let dir = tempfile::tempdir().unwrap();
    let sp = write(dir.path(), "u.json", PAIR);
    let m = write(dir.path(), "m.json", "[[1,-3],[0,1]]");
    let o = ttstar(&["certify", "--spectrum", s(&sp), "--matrix", s(&m)]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json_out(&o)["verdict"], "Refuted");
    let out = dir.path().join("c.csv");
    let o = ttstar(&["solve", "--spectrum", s(&sp), "--matrix", s(&m), "--x-count", "5", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn minimize_f_e6() {
    let v = json_out(&ttstar(&["minimize-f", "--family", "E6", "--step", "0.1"]));
    assert_eq!(v["min"].as_f64().unwrap(), 3.0);
    assert_eq!(v["attained_on_boundary"], true);
}

#[test]
fn pipeline_then_tampered_verify() {
    let dir = tempfile::tempdir().unwrap();
    let sp = write(dir.path(), "u.json", OMEGA);
    let m = write(dir.path(), "m.json", &a3_seed());
    let out_dir = dir.path().join("run");
    let args = [
        "pipeline", "--spectrum", s(&sp), "--matrix", s(&m), "--x-min", "0.6", "--x-max", "2", "--x-count", "7", "--out-dir",
        s(&out_dir),
    ];
    let o = ttstar(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert_eq!(v["verify"]["pass"], true);
    assert!(v["verify"]["deviation"].as_f64().unwrap() < 1e-6);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["command"], "pipeline");
    assert_eq!(report["verify"], v["verify"]);

    let curve = out_dir.join("curve.csv");
    let ok = ttstar(&["verify", "--curve", s(&curve), "--spectrum", s(&sp), "--matrix", s(&m), "--at", "0.8,1.6"]);
    assert_eq!(ok.status.code(), Some(0));

    // scale G_12 at the first row: recovered Stokes data must now disagree
    let mut rdr = csv::Reader::from_path(&curve).unwrap();
    let header = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let col = header.iter().position(|h| h == "G12_im").unwrap();
    let bad = dir.path().join("bad.csv");
    let mut w = csv::Writer::from_path(&bad).unwrap();
    w.write_record(&header).unwrap();
    for (i, r) in rows.iter().enumerate() {
        let mut r: Vec<String> = r.iter().map(String::from).collect();
        if i == 0 {
            let x: f64 = r[col].parse().unwrap();
            r[col] = (x * 1.01).to_string();
        }
        w.write_record(&r).unwrap();
    }
    w.flush().unwrap();
    let o = ttstar(&["verify", "--curve", s(&bad), "--spectrum", s(&sp), "--matrix", s(&m), "--at", "0.6,1.6"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json_out(&o)["pass"], false);
}
