use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

use flowtree::rational;
use flowtree::spec_io::TreeSpecFile;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> (i32, String) {
    run_with(args, &[])
}

fn run_with(args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowtree"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

#[test]
fn gen_is_deterministic() {
    let args = ["gen", "random", "--seed", "9", "--top", "1", "--bottom", "-3"];
    let (code, a) = run(&args);
    let (_, b) = run(&args);
    assert_eq!(code, 0);
    assert_eq!(a, b);
    let (_, c) = run(&["gen", "random", "--seed", "10", "--top", "1", "--bottom", "-3"]);
    assert_ne!(a, c);
}

#[test]
fn homogeneous_spec_loads_with_counting_masses() {
    let (code, text) = run(&["gen", "homogeneous", "--q", "2", "--top", "3", "--bottom", "0"]);
    assert_eq!(code, 0);
    let tree = TreeSpecFile::parse(&text).unwrap().load().unwrap();
    assert_eq!(tree.measure.window().len(), 15);
    assert_eq!(*tree.measure.total(), rational::q(8));
}

#[test]
fn unknown_generator_is_an_error() {
    let (code, out) = run(&["gen", "lattice"]);
    assert_eq!(code, 2);
    assert_eq!(json(&out)["error"], "InvalidParams");
}

#[test]
fn malformed_spec_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"beta\": 12,\n  \"levels\": [").unwrap();
    let (code, out) = run(&["validate", "--tree", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    let err = json(&out);
    assert_eq!(err["error"], "Parse");
    assert!(err["message"].as_str().unwrap().contains("line 2"));
}

#[test]
fn stats_on_binary_fixture() {
    let (code, out) = run(&["stats", "--tree", &fixture("binary5.json")]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["c_tilde"], "11/1");
    assert_eq!(v["doubling"]["c_upper"], "2/1");
    assert_eq!(v["doubling"]["max_degree"], 2);
}

#[test]
fn stats_csv_lists_isoperimetric_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("iso.csv");
    let (code, _) = run(&["stats", "--tree", &fixture("binary5.json"), "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,expected,checked,mismatches"));
    assert_eq!(lines.next(), Some("1,1/1,31,0"));
}

#[test]
fn maximal_and_bmo_agree() {
    let tree = fixture("binary5.json");
    let func = fixture("jn/random.json");
    let (code, out) = run(&["maximal", "--tree", &tree, "--func", &func]);
    assert_eq!(code, 0);
    let maximal = json(&out);
    assert_eq!(maximal["max_sharp"], maximal["bmo1"]);
    let (code, out) = run(&["bmo", "--tree", &tree, "--func", &func, "--q", "2"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["bmo1_le_bmo2"], true);
}

#[test]
fn weak11_reports_each_lambda() {
    let (code, out) = run(&[
        "weak11",
        "--tree",
        &fixture("binary5.json"),
        "--func",
        &fixture("jn/random.json"),
        "--lambda",
        "1",
        "--lambda",
        "1/2",
        "--lambda",
        "3",
    ]);
    assert_eq!(code, 0);
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["ok"] == true && r["vitali_ok"] == true));
}

#[test]
fn cz_below_window_scale_is_an_error() {
    let args = |alpha: &'static str| {
        run(&["cz", "--tree", &fixture("binary5.json"), "--func", &fixture("jn/random.json"), "--alpha", alpha])
    };
    let (code, out) = args("1");
    assert_eq!(code, 0);
    assert_eq!(json(&out)["check"]["reconstruction"], true);
    let (code, out) = args("1/100");
    assert_eq!(code, 2);
    assert_eq!(json(&out)["error"], "WindowTooSmall");
}

#[test]
fn split_checks_pass() {
    let (code, out) = run(&[
        "split",
        "--tree",
        &fixture("binary5.json"),
        "--func",
        &fixture("jn/random.json"),
        "--lambda",
        "2",
        "--p",
        "2",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["check"].as_object().unwrap().values().all(|b| b == true));
}

#[test]
fn jn_writes_distribution_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("jn.csv");
    let mut args = vec!["jn".to_string(), "--tree".into(), fixture("binary5.json")];
    for name in ["jn/tent_a.json", "jn/tent_b.json", "jn/level.json"] {
        args.push("--func".into());
        args.push(fixture(name));
    }
    args.extend(["--csv".into(), csv.to_str().unwrap().into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, out) = run(&args);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["fit"]["eta"].as_f64().unwrap() > 0.0);
    let text = std::fs::read_to_string(csv).unwrap();
    let ratios: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| rational::to_f64(&rational::parse(l.split(',').nth(1).unwrap()).unwrap()))
        .collect();
    assert_eq!(ratios.len(), 33);
    assert!(ratios.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn atoms_upgrade_and_rebase() {
    let (code, out) = run(&["atoms", "--tree", &fixture("binary5.json"), "--atom", &fixture("atom_p2.json")]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["upgrade"]["reconstruction"], true);
    assert_eq!(v["upgrade"]["rounds"].as_array().unwrap().len(), 3);

    let (code, out) =
        run(&["atoms", "--tree", &fixture("comb30.json"), "--atom", &fixture("atom_tall.json"), "--beta-check", "12"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["rebase"]["sum_exact"], true);
    assert_eq!(v["rebase"]["pieces"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_atom_exits_one() {
    let (code, out) = run(&["atoms", "--tree", &fixture("binary5.json"), "--atom", &fixture("atom_bad.json")]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["valid"], false);
}

#[test]
fn broken_flow_names_vertex() {
    let (code, out) = run(&["validate", "--tree", &fixture("broken_flow.json")]);
    assert_eq!(code, 2);
    let v = json(&out);
    assert_eq!(v["error"], "InvalidTree");
    assert!(v["message"].as_str().unwrap().contains("vertex 0"));
}

#[test]
fn dyadic_reports_child_count() {
    let (code, out) = run(&["dyadic", "--tree", &fixture("binary5.json")]);
    assert_eq!(code, 1);
    let check = &json(&out)["check"];
    assert_eq!(check["partitions"], true);
    assert_eq!(check["nested"], true);
    assert_eq!(check["max_children"], 3);
    assert_eq!(check["children_bounded"], false);
}

#[test]
fn goodlambda_uses_binary_constant() {
    let (code, out) = run(&[
        "goodlambda",
        "--tree",
        &fixture("binary5.json"),
        "--func",
        &fixture("jn/random.json"),
        "--lambda",
        "4",
        "--gamma",
        "1/10",
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["constant"], "264/1");
}

#[test]
fn hormander_on_symmetric_kernel() {
    let (code, out) = run(&["hormander", "--tree", &fixture("binary5.json"), "--kernel", &fixture("kernel_avg.json")]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["star_mass_le_3"], true);
    assert_eq!(v["one_star"]["constant"], v["two_star"]["constant"]);
}

#[test]
fn pairing_is_bounded() {
    let (code, out) = run(&[
        "pair",
        "--tree",
        &fixture("binary5.json"),
        "--func",
        &fixture("jn/random.json"),
        "--atom",
        &fixture("atom_inf.json"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["bounded"], true);
}

#[test]
fn thread_count_does_not_change_results() {
    let (tree, func) = (fixture("binary5.json"), fixture("jn/random.json"));
    let args = ["bmo", "--tree", &tree, "--func", &func, "--q", "2"];
    let (a_code, a) = run_with(&args, &[("FLOWTREE_THREADS", "1")]);
    let (b_code, b) = run_with(&args, &[("FLOWTREE_THREADS", "4")]);
    assert_eq!((a_code, b_code), (0, 0));
    assert_eq!(a, b);
}
