use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use quick_xml::events::Event;
use quick_xml::Reader;
use serde_json::Value;
use tempfile::tempdir;

fn apollo(args: &[&str]) -> Output {
    apollo_env(args, None)
}

fn apollo_env(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_apollo"));
    cmd.args(args).env_remove("APOLLO_CACHE_DIR");
    if let Some(dir) = cache {
        cmd.env("APOLLO_CACHE_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(o)))
}

#[test]
fn expsum_q3_is_minus_one_third() {
    let o = apollo(&["expsum", "--q0", "3", "--form", "10,7,17,-11", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let re = v["results"]["direct"][0].as_f64().unwrap();
    let im = v["results"]["direct"][1].as_f64().unwrap();
    assert!((re + 1.0 / 3.0).abs() < 1e-9 && im.abs() < 1e-9, "{re} {im}");
    let text = stdout(&apollo(&["expsum", "--q0", "3", "--form", "10,7,17,-11"]));
    assert!(text.contains("-0.333333333333"), "{text}");
}

#[test]
fn singular_at_five_is_zero_and_non_admissible() {
    let o = apollo(&["singular", "--n", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("S(5) = 0.0 (non-admissible)"), "{text}");
}

#[test]
fn spectral_transference_prints_both_sides() {
    let o = apollo(&["spectral", "--q", "4", "--check", "transference"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("1 − λ₁′ = 0.800000000 ≥"), "{text}");
    assert!(text.lines().last() == Some("PASS"), "{text}");
}

#[test]
fn spectral_gap_lists_each_modulus() {
    let v = json(&apollo(&["spectral", "--q", "3,4", "--format", "json"]));
    let l: Vec<f64> = v["results"]["spectra"].as_array().unwrap().iter().map(|s| s["lambda1"].as_f64().unwrap()).collect();
    assert!((l[0] - 2.0 / 3.0).abs() < 1e-6 && (l[1] - 0.2).abs() < 1e-6, "{l:?}");
    assert_eq!(v["frozen"].as_array().unwrap().len(), 2);
}

#[test]
fn gasket_small_set() {
    let v = json(&apollo(&["gasket", "--limit", "100", "--format", "json"]));
    let got: Vec<u64> = v["results"]["curvatures"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(got, [21, 24, 28, 40, 52, 61, 76, 85, 96]);
    assert_eq!(v["schema"], "apollo-report/1");
}

#[test]
fn gasket_census_at_one_million_matches_registry() {
    let v = json(&apollo(&["gasket", "--limit", "1000000", "--format", "json"]));
    let d = v["results"]["density"].as_f64().unwrap();
    assert!((0.2..=0.25).contains(&d), "{d}");
    assert_eq!(v["pass"], true);
    assert_eq!(v["frozen"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_root_exits_two() {
    let o = apollo(&["gasket", "--root", "1,2,3,4", "--limit", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not on the Descartes cone"), "{}", stderr(&o));
    let o = apollo(&["gasket", "--root", "-1,2,2", "--limit", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flag_exits_two() {
    assert_eq!(apollo(&["gasket", "--limit", "lots"]).status.code(), Some(2));
}

#[test]
fn json_is_deterministic_and_sorted() {
    let args = ["gasket", "--limit", "20000", "--format", "json", "--threads", "1"];
    let a = apollo(&args);
    let b = apollo(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(!stdout(&a).contains("timing"));
}

#[test]
fn bitset_snapshot_round_trip() {
    let dir = tempdir().unwrap();
    let snap = dir.path().join("set.apbs");
    let snap_s = snap.to_str().unwrap();
    let a = apollo(&["gasket", "--limit", "5000", "--bitset", snap_s, "--format", "json"]);
    assert_eq!(a.status.code(), Some(0));
    let bytes = std::fs::read(&snap).unwrap();
    assert_eq!(&bytes[..8], b"APBS0001");
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 5000);
    assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize, bytes.len() - 24);
    let b = apollo(&["gasket", "--from-bitset", snap_s, "--format", "json"]);
    assert_eq!(json(&a)["results"], json(&b)["results"]);

    std::fs::write(&snap, b"APBS0001garbage").unwrap();
    assert_eq!(apollo(&["gasket", "--from-bitset", snap_s]).status.code(), Some(2));
}

#[test]
fn out_file_holds_json_report() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = apollo(&["admissible", "--q", "24", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"]["moduli"][0]["classes"], serde_json::json!([0, 4, 12, 13, 16, 21]));
}

#[test]
fn csv_table() {
    let o = apollo(&["admissible", "--q", "24,2", "--format", "csv"]);
    assert_eq!(stdout(&o), "q,order,classes\n24,3840,0 4 12 13 16 21\n2,1,0 1\n");
}

#[test]
fn closure_cache_is_used() {
    let dir = tempdir().unwrap();
    let first = json(&apollo_env(&["admissible", "--q", "5", "--format", "json"], Some(dir.path())));
    let file = dir.path().join("admissible-q5--11_21_24_28.json");
    assert!(file.exists());
    let mut cached: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(cached["order"], first["results"]["moduli"][0]["order"]);
    cached["order"] = 1.into();
    std::fs::write(&file, cached.to_string()).unwrap();
    let second = json(&apollo_env(&["admissible", "--q", "5", "--format", "json"], Some(dir.path())));
    assert_eq!(second["results"]["moduli"][0]["order"], 1);
}

#[test]
fn verify_partial_run_writes_then_compares() {
    let dir = tempdir().unwrap();
    let reg = dir.path().join("frozen.json");
    let reg_s = reg.to_str().unwrap();
    let o = apollo(&["verify", "--modules", "expsums", "--registry", reg_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("expsums/closed_vs_direct: ok"));
    assert!(!text.contains("orbit/") && !text.contains("spectral/"), "{text}");
    assert!(reg.exists());
    let again = apollo(&["verify", "--modules", "expsums", "--registry", reg_s, "--format", "json"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(json(&again)["results"]["registry_written"], false);
}

#[test]
fn verify_tampered_registry_exits_one_with_diff() {
    let dir = tempdir().unwrap();
    let reg = dir.path().join("frozen.json");
    let reg_s = reg.to_str().unwrap();
    assert_eq!(apollo(&["verify", "--modules", "expsums", "--registry", reg_s]).status.code(), Some(0));
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&reg).unwrap()).unwrap();
    v["constants"]["expsums.singular_96"]["value"] = 3.0.into();
    std::fs::write(&reg, v.to_string()).unwrap();
    let o = apollo(&["verify", "--modules", "expsums", "--registry", reg_s, "--ci"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("- expsums.singular_96: 3"), "{text}");
    assert!(text.contains("+ expsums.singular_96: 2.44438"), "{text}");
}

#[test]
fn verify_ci_never_writes() {
    let dir = tempdir().unwrap();
    let reg = dir.path().join("frozen.json");
    let o = apollo(&["verify", "--modules", "forms", "--registry", reg.to_str().unwrap(), "--ci"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!reg.exists());
}

#[test]
fn verify_rejects_unknown_module_and_conflicting_modes() {
    assert_eq!(apollo(&["verify", "--modules", "nope"]).status.code(), Some(2));
    assert_eq!(apollo(&["verify", "--modules", "core", "--ci", "--freeze"]).status.code(), Some(2));
}

fn svg_circles_and_labels(path: &Path) -> (usize, BTreeSet<i64>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut reader = Reader::from_str(&text);
    let (mut circles, mut labels, mut in_text) = (0, BTreeSet::new(), false);
    loop {
        match reader.read_event().expect("well-formed XML") {
            Event::Empty(e) | Event::Start(e) if e.name().as_ref() == b"circle" => circles += 1,
            Event::Start(e) if e.name().as_ref() == b"text" => in_text = true,
            Event::Text(t) if in_text => {
                labels.insert(t.unescape().unwrap().trim().parse().unwrap());
                in_text = false;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    (circles, labels)
}

#[test]
fn render_depth_zero_has_four_circles() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("g.svg");
    let o = apollo(&["render", "--depth", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (circles, labels) = svg_circles_and_labels(&out);
    assert_eq!(circles, 4);
    assert_eq!(labels, [21, 24, 28].into());
}

#[test]
fn render_labels_match_enumerated_curvatures() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("g.svg");
    let o = apollo(&["render", "--root", "-11,21,24,28", "--limit", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (_, labels) = svg_circles_and_labels(&out);
    let v = json(&apollo(&["gasket", "--limit", "100", "--format", "json"]));
    let set: BTreeSet<i64> = v["results"]["curvatures"].as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect();
    assert_eq!(labels, set);
}

#[test]
fn render_deeper_svg_is_well_formed() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("g.svg");
    assert_eq!(apollo(&["render", "--root", "-1,2,2,3", "--depth", "5", "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let (circles, _) = svg_circles_and_labels(&out);
    assert!(circles > 100, "{circles}");
}

#[test]
fn render_needs_out() {
    assert_eq!(apollo(&["render", "--depth", "1"]).status.code(), Some(2));
}

#[test]
fn circle_toy_decomposition() {
    let v = json(&apollo(&["circle", "--root", "-1,2,2,3", "--x", "4", "--u", "4", "--format", "json"]));
    assert_eq!(v["pass"], true);
    assert!(v["results"]["relative_residual"].as_f64().unwrap() <= 1e-6);
    assert!(v["results"]["restricted"]["l1_distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn oversized_grid_is_resource_cap() {
    let o = apollo(&["circle", "--root", "-1,2,2,3", "--x", "4", "--grid", "33554432"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn delta_fit_default_passes() {
    let v = json(&apollo(&["delta-fit", "--format", "json"]));
    let d = v["results"]["delta"].as_f64().unwrap();
    assert!((1.25..=1.36).contains(&d));
    assert_eq!(v["pass"], true);
}
