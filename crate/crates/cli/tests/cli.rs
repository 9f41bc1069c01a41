use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

use limcom::canonical::bester_strausz;
use limcom::screening::three_type_example;

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn run_with(args: &[&str], env: &[(&str, &str)]) -> (i32, Value) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_limcom"));
    cmd.args(args).env_remove("LIMCOM_TOL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    let text = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad JSON ({e}): {text}"));
    (out.status.code().unwrap(), v)
}

fn run(args: &[&str]) -> (i32, Value) {
    run_with(args, &[])
}

fn ok(args: &[&str]) -> Value {
    let (code, v) = run(args);
    assert_eq!(code, 0, "{v}");
    v["result"].clone()
}

fn write(dir: &tempfile::TempDir, name: &str, v: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn load(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(preset(name)).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn presets_match_library_constructors() {
    let t = load("three_type.json");
    assert_eq!(t["model"], serde_json::to_value(three_type_example::<f64>()).unwrap());
    let b = load("bester_strausz.json");
    assert_eq!(b["model"], serde_json::to_value(bester_strausz::<f64>()).unwrap());
}

#[test]
fn three_type_replication() {
    let r = ok(&["replicate", "--example", "three-type"]);
    assert!((f(&r["high_given_hm"]) - 0.5276).abs() < 5e-4);
    assert!((f(&r["mid_given_ml"]) - 0.0140).abs() < 5e-4);
    assert_eq!(r["transfers_infeasible"], json!(true));
    assert_eq!(r["transfers"]["status"], "infeasible");
    let conflict = &r["transfers"]["conflicts"][0];
    let implied = conflict["implied"].as_array().unwrap();
    let base = r["transfers"]["base"].as_array().unwrap();
    // the atom whose transfer is pinned twice: by the middle type's binding
    // constraint and by the high type's
    let (k, hit) = implied
        .iter()
        .enumerate()
        .find(|(_, x)| (f(x) - 2.6671).abs() < 1e-3)
        .expect("conflicting value");
    assert!((f(&base[k]) - 2.5528).abs() < 1e-3);
    assert!(f(hit) - f(&base[k]) >= 0.11);
}

#[test]
fn durable_commitment_and_mixing() {
    let r = ok(&["solve-durable", preset("durable_commitment.json").to_str().unwrap()]);
    assert_eq!(r["regime"], "commitment");
    assert_eq!(f(&r["value"]), 1.0);

    let r = ok(&["solve-durable", preset("durable_mixing.json").to_str().unwrap()]);
    assert_eq!(r["regime"], "mixing");
    let mut post: Vec<f64> = r["atoms"].as_array().unwrap().iter().map(|a| f(&a["posterior"])).collect();
    post.sort_by(f64::total_cmp);
    assert!((post[0] - 0.5).abs() < 1e-9 && (post[1] - 1.0).abs() < 1e-9);
    assert!((f(&r["period_one_price"]) - 2.0).abs() < 1e-9);
    assert!((f(&r["period_two_price"]) - 2.0).abs() < 1e-9);
    assert!((f(&r["posterior_after_no_sale"]) - 0.5).abs() < 1e-9);
}

#[test]
fn full_revelation_menu_is_implementable() {
    let r = ok(&["check-contracts", preset("menu_full_revelation.json").to_str().unwrap()]);
    assert_eq!(r["verdict"]["verdict"], "implementable");
    assert_eq!(r["dic_p_violations"], json!([]));
    let table = r["table"].as_array().unwrap();
    assert_eq!(table.len(), 2);
    // low type pays nothing; high type pays its value less the low contract's appeal
    assert_eq!(f(&table[0]["transfer"]), 0.0);
    assert!((f(&table[1]["transfer"]) - 1.5).abs() < 1e-12);
}

#[test]
fn bester_strausz_replication_and_canonicalization() {
    let r = ok(&["replicate", "--example", "bester-strausz"]);
    assert_eq!(r["passed"], json!(true));
    let device = &r["canonical"]["device"];
    for (v, h) in [(0, 0), (0, 1), (1, 1), (1, 2)] {
        assert_eq!(f(&device[v][h]), 0.5);
    }
    let c = ok(&["canonicalize", preset("bester_strausz.json").to_str().unwrap()]);
    assert_eq!(c["preserved"], json!(true));
    assert_eq!(c["truthful"], json!(true));
    assert_eq!(c["canonical"], r["canonical"]);
}

#[test]
fn malformed_files_point_at_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = load("three_type.json");
    t["model"]["agent"][1][0][0] = json!("oops");
    let (code, v) = run(&["solve-screening", &write(&dir, "a.json", &t)]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["pointer"], "/model/agent/1/0/0");

    let mut d = load("durable_mixing.json");
    d["model"].as_object_mut().unwrap().remove("v_high");
    let (code, v) = run(&["solve-durable", &write(&dir, "b.json", &d)]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["pointer"], "/model/v_high");

    d = load("durable_mixing.json");
    d["kind"] = json!("auction");
    let (code, v) = run(&["solve-durable", &write(&dir, "c.json", &d)]);
    assert_eq!((code, v["error"]["pointer"].clone()), (2, json!("/kind")));

    d = load("durable_mixing.json");
    d["extra"] = json!(1);
    let (code, v) = run(&["solve-durable", &write(&dir, "d.json", &d)]);
    assert_eq!(code, 2, "{v}");

    let p = dir.path().join("e.json");
    std::fs::write(&p, "{\"kind\": ").unwrap();
    assert_eq!(run(&["solve-durable", p.to_str().unwrap()]).0, 2);

    // model-level validation, not schema
    d = load("durable_mixing.json");
    d["model"]["v_low"] = json!(3.0);
    let (code, v) = run(&["solve-durable", &write(&dir, "f.json", &d)]);
    assert_eq!((code, v["error"]["pointer"].clone()), (2, json!("/model")));
}

#[test]
fn infeasible_programs_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = load("three_type.json");
    t["candidates"] = json!([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    let p = write(&dir, "t.json", &t);
    for mode in ["relaxed", "monotone", "full"] {
        let (code, v) = run(&["solve-screening", &p, "--mode", mode]);
        assert_eq!(code, 3, "{v}");
        assert_eq!(v["status"], "infeasible");
        assert_eq!(v["error"]["diagnostic"]["candidates"], json!(2));
    }
}

#[test]
fn tolerance_from_environment() {
    let p = preset("durable_mixing.json");
    let (code, _) = run_with(&["solve-durable", p.to_str().unwrap()], &[("LIMCOM_TOL", "1e-7")]);
    assert_eq!(code, 0);
    let (code, v) = run_with(&["solve-durable", p.to_str().unwrap()], &[("LIMCOM_TOL", "-1")]);
    assert_eq!(code, 2, "{v}");
}

fn round_trip(args: &[&str], problem: &str, dir: &tempfile::TempDir, name: &str) -> Value {
    let (code, out) = run(args);
    assert_eq!(code, 0, "{out}");
    let path = write(dir, name, &out);
    let v = ok(&["verify", problem, &path]);
    assert_eq!(v["verified"], json!(true));
    assert!(f(&v["max_difference"]) <= 1e-9);
    out
}

#[test]
fn results_verify_on_reingestion() {
    let dir = tempfile::tempdir().unwrap();
    let three = preset("three_type.json");
    let three = three.to_str().unwrap();
    for mode in ["relaxed", "monotone", "full"] {
        let out = round_trip(&["solve-screening", three, "--mode", mode], three, &dir, &format!("{mode}.json"));
        assert!(out["result"]["support_size"].as_u64().unwrap() >= 2);
    }
    let menu = preset("menu_full_revelation.json");
    let menu = menu.to_str().unwrap();
    round_trip(&["check-contracts", menu], menu, &dir, "menu.json");
    let mech = preset("bester_strausz.json");
    let mech = mech.to_str().unwrap();
    round_trip(&["canonicalize", mech], mech, &dir, "mech.json");
    let dur = preset("durable_mixing.json");
    let dur = dur.to_str().unwrap();
    round_trip(&["solve-durable", dur], dur, &dir, "dur.json");
}

#[test]
fn tampered_margins_are_caught() {
    let dir = tempfile::tempdir().unwrap();
    let three = preset("three_type.json");
    let three = three.to_str().unwrap();
    let (_, mut out) = run(&["solve-screening", three, "--mode", "full"]);
    let x = f(&out["result"]["margins"]["participation"][1]);
    out["result"]["margins"]["participation"][1] = json!(x + 1e-6);
    let (code, v) = run(&["verify", three, &write(&dir, "bad.json", &out)]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["pointer"], "/result/margins/participation/1");
}

struct CsvRow {
    mu: f64,
    pointwise: f64,
    cav: f64,
    atom: bool,
}

fn read_csv(path: &str) -> Vec<CsvRow> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let h: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(h, ["mu", "sell_now_value", "adjusted_r2", "pointwise_max", "concavified_value", "is_support_atom"]);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let x = |k: usize| rec[k].parse::<f64>().unwrap();
            assert!((x(3) - x(1).max(x(2))).abs() < 1e-12);
            CsvRow { mu: x(0), pointwise: x(3), cav: x(4), atom: rec[5].parse().unwrap() }
        })
        .collect()
}

fn check_slice(rows: &[CsvRow]) {
    assert!(rows.windows(2).all(|w| w[1].mu > w[0].mu));
    for r in rows {
        assert!(r.cav >= r.pointwise - 1e-9);
        if r.atom {
            assert!((r.cav - r.pointwise).abs() < 1e-9);
        }
    }
    for w in rows.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let chord = ((c.mu - b.mu) * a.cav + (b.mu - a.mu) * c.cav) / (c.mu - a.mu);
        assert!(b.cav - chord >= -1e-8, "not concave at {}", b.mu);
    }
}

#[test]
fn durable_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("durable.csv");
    let r = ok(&["plot-data", preset("durable_mixing.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r["files"].as_array().unwrap().len(), 1);
    let rows = read_csv(out.to_str().unwrap());
    check_slice(&rows);
    assert!(rows.len() >= 201);
    let atoms: Vec<f64> = rows.iter().filter(|r| r.atom).map(|r| r.mu).collect();
    assert_eq!(atoms, vec![0.5, 1.0]);
    let at_prior = rows.iter().find(|r| (r.mu - 0.8).abs() < 1e-12).unwrap();
    assert!((at_prior.cav - 1.4).abs() < 1e-9);
}

#[test]
fn three_type_plot_slices() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("three.csv");
    let r = ok(&["plot-data", preset("three_type.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let files = r["files"].as_array().unwrap();
    assert!(files.len() > 2);
    let mut thirds = Vec::new();
    let mut atoms = 0;
    for file in files {
        thirds.push(f(&file["third"]));
        let rows = read_csv(file["path"].as_str().unwrap());
        assert_eq!(rows.len() as u64, file["rows"].as_u64().unwrap());
        check_slice(&rows);
        atoms += rows.iter().filter(|r| r.atom).count();
    }
    assert!(thirds.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(atoms, 2);
}

#[test]
fn plot_data_needs_a_solvable_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let (code, _) = run(&["plot-data", preset("bester_strausz.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn numbers_round_trip_through_output() {
    let text = {
        let out = Command::new(env!("CARGO_BIN_EXE_limcom"))
            .args(["solve-durable", preset("durable_mixing.json").to_str().unwrap()])
            .output()
            .unwrap();
        String::from_utf8(out.stdout).unwrap()
    };
    // 0.4 and 0.6 weights carry their full 17-digit expansion
    assert!(text.contains("0.39999999999999991") || text.contains("0.40000000000000002"), "{text}");
}
