use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_dchar");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn dchar(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn write_temp(dir: &tempfile::TempDir, name: &str, doc: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_vec(doc).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report-v1.schema.json");
    let schema: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(v: &jsonschema::Validator, r: &Value) {
    let errors: Vec<String> = v
        .iter_errors(r)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{}: {errors:#?}", r["command"]);
}

#[test]
fn split_rank4_pencil_has_constant_rank_four() {
    let r = report(&dchar(&["pencil", fixture("split-rank4.json").to_str().unwrap()]));
    assert_eq!(r["result"]["maxrank"], 4);
    assert_eq!(r["result"]["minrank"], 4);
}

#[test]
fn hyperbolic_plane_has_no_transversal_witness() {
    let out = dchar(&[
        "witness",
        fixture("hyperbolic-plane.json").to_str().unwrap(),
        "--mode",
        "trans",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["outcome"]["status"], "NONE_FOUND");
}

#[test]
fn dissipative_operator_is_inconclusive() {
    let r = report(&dchar(&[
        "check-heisenberg",
        fixture("dissipative-heisenberg.json").to_str().unwrap(),
    ]));
    assert_eq!(r["result"]["outcome"], "INCONCLUSIVE");
    assert_eq!(r["result"]["condition_a"], false);
}

#[test]
fn every_command_emits_schema_valid_reports() {
    let v = validator();
    let f = |n: &str| fixture(n).to_string_lossy().into_owned();
    let runs: Vec<Vec<String>> = vec![
        vec!["bracket".into(), f("split-rank4.json")],
        vec!["dissipativity".into(), f("split-rank4.json")],
        vec!["dissipativity".into(), f("hyperbolic-plane.json")],
        vec!["pencil".into(), f("hyperbolic-plane.json")],
        vec![
            "witness".into(),
            f("split-rank4.json"),
            "--mode".into(),
            "bracket".into(),
        ],
        vec!["check-heisenberg".into(), f("generic-heisenberg-d9.json")],
        vec!["check-heisenberg".into(), f("split-rank4-heisenberg.json")],
        vec!["check-2step".into(), f("two-step-m4.json")],
        vec!["check-point".into(), f("point-symbol-n2-m4.json")],
        vec!["reduce-step".into(), f("free-3step-two-generators.json")],
        vec!["fixtures".into(), "--restarts".into(), "10".into()],
    ];
    for args in runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let r = report(&dchar(&args));
        assert_eq!(r["schema_version"], "dchar-report/1");
        assert_valid(&v, &r);
    }
    // a found transversal witness and a dissipative certificate exercise the other variants
    let dir = tempfile::tempdir().unwrap();
    let dis = write_temp(
        &dir,
        "dis.json",
        &json!({"n": 2, "A": [[1, 0], [0, 1]], "B": [[1, 0], [0, -1]]}),
    );
    assert_valid(&v, &report(&dchar(&["dissipativity", &dis])));
    let big = write_temp(
        &dir,
        "trans.json",
        &json!({"n": 4, "A": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]],
                "B": [[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 0], [0, 0, 0, -1]]}),
    );
    let r = report(&dchar(&["witness", &big]));
    assert_eq!(r["result"]["outcome"]["status"], "FOUND");
    assert_valid(&v, &r);
}

#[test]
fn reports_are_byte_identical_per_seed() {
    let input = fixture("generic-heisenberg-d9.json");
    let a = dchar(&["check-heisenberg", input.to_str().unwrap(), "--seed", "7"]);
    let b = dchar(&["check-heisenberg", input.to_str().unwrap(), "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = dchar(&["check-heisenberg", input.to_str().unwrap(), "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout, "seed is part of the report");
}

#[test]
fn floats_print_seventeen_significant_digits() {
    let r = dchar(&["bracket", fixture("split-rank4.json").to_str().unwrap()]);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(
        text.contains("[-1.0000000000000000e0,") && text.contains(",1.0000000000000000e0]"),
        "{text}"
    );
    assert!(!text.contains("-0.0"), "negative zero printed unsigned");
}

#[test]
fn input_errors_name_the_field_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            json!({"n": 2, "A": [[1, 0], [0, 1]], "B": [[1, 0], [0, "x"]]}),
            "B[1][1]",
        ),
        (json!({"n": 3, "A": [[1, 0], [0, 1]], "B": [[1, 0], [0, 1]]}), "A:"),
        (json!({"n": 2, "A": [[1, 0], [0, 1]]}), "missing field `B`"),
        (
            json!({"n": 2, "A": [[1, 0], [0, 1]], "B": [[0, 1], [1, 0]], "J": [[0, 0], [0, 0]]}),
            "J:",
        ),
    ];
    for (i, (doc, needle)) in cases.iter().enumerate() {
        let p = write_temp(&dir, &format!("bad{i}.json"), doc);
        let out = dchar(&["pencil", &p]);
        assert_eq!(out.status.code(), Some(2), "case {i}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "case {i}: {err}");
        assert!(!err.contains("panicked") && out.stdout.is_empty());
    }
    let out = dchar(&["pencil", "/nonexistent/forms.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dependent_pair_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(
        &dir,
        "dep.json",
        &json!({"n": 2, "A": [[1, 0], [0, -1]], "B": [[2, 0], [0, -2]]}),
    );
    assert_eq!(dchar(&["pencil", &p]).status.code(), Some(2));
}

#[test]
fn missing_nondegenerate_combination_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(
        &dir,
        "flat.json",
        &json!({"m": 2, "J_list": [[[0, 0], [0, 0]]], "A_re": [[1, 0], [0, -1]], "A_im": [[0, 1], [1, 0]]}),
    );
    let out = dchar(&["check-2step", &p]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn asymmetric_matrices_warn() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(
        &dir,
        "asym.json",
        &json!({"n": 2, "A": [[1, 0.5], [0, -1]], "B": [[0, 1], [1, 0]]}),
    );
    let r = report(&dchar(&["pencil", &p]));
    assert_eq!(r["result"]["maxrank"], 2);
    assert!(r["warnings"][0].as_str().unwrap().starts_with("A: asymmetry"));
}

#[test]
fn text_mode_prints_a_table() {
    let out = dchar(&["pencil", fixture("split-rank4.json").to_str().unwrap(), "--text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.lines()
            .any(|l| l.starts_with("result.maxrank") && l.ends_with(" 4")),
        "{text}"
    );
    let out = dchar(&["fixtures", "--text", "--restarts", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.lines()
            .all(|l| l.starts_with("[PASS]") || l.ends_with("checks passed")),
        "{text}"
    );
}

#[test]
fn digest_tracks_the_input_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({"n": 2, "A": [[1, 0], [0, -1]], "B": [[0, 1], [1, 0]]});
    let p = write_temp(&dir, "x.json", &doc);
    let r = report(&dchar(&["pencil", &p]));
    let expected = {
        use sha2::Digest;
        format!(
            "sha256:{}",
            hex::encode(sha2::Sha256::digest(std::fs::read(&p).unwrap()))
        )
    };
    assert_eq!(r["inputs_digest"], expected.as_str());
}

/// Basis rescaling `e_i → s_i e_i` maps `c_ij^k` to `c_ij^k s_i s_j / s_k`
/// and preserves both the Jacobi identity and the grading.
fn rescaled(c: &[(usize, usize, usize, f64)], s: &[f64]) -> Vec<(usize, usize, usize, f64)> {
    c.iter()
        .map(|&(i, j, k, v)| (i, j, k, v * s[i] * s[j] / s[k]))
        .collect()
}

type Algebra = (usize, Vec<(usize, usize, usize, f64)>, Vec<usize>);

fn algebras() -> Vec<Algebra> {
    vec![
        // free 3-step on two generators
        (
            5,
            vec![(0, 1, 2, 1.0), (0, 2, 3, 1.0), (1, 2, 4, 1.0)],
            vec![1, 1, 2, 3, 3],
        ),
        // Engel algebra
        (4, vec![(0, 1, 2, 1.0), (0, 2, 3, 1.0)], vec![1, 1, 2, 3]),
        // free 2-step on three generators
        (
            6,
            vec![(0, 1, 3, 1.0), (0, 2, 4, 1.0), (1, 2, 5, 1.0)],
            vec![1, 1, 1, 2, 2, 2],
        ),
        // Heisenberg h_2
        (5, vec![(0, 2, 4, 1.0), (1, 3, 4, 1.0)], vec![1, 1, 1, 1, 2]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduced_specs_run_under_check_2step(
        which in 0usize..4,
        scales in proptest::collection::vec(0.25f64..4.0, 6),
        entries in proptest::collection::vec(-2.0f64..2.0, 32),
    ) {
        let (dim, c, grading) = algebras().swap_remove(which);
        let m = grading.iter().filter(|&&g| g == 1).count();
        let sym = |off: usize| -> Vec<Vec<f64>> {
            (0..m).map(|i| (0..m).map(|j| entries[off + i.min(j) * m + i.max(j)]).collect()).collect()
        };
        let c: Vec<Value> = rescaled(&c, &scales[..dim]).iter().map(|&(i, j, k, v)| json!([i, j, k, v])).collect();
        let lie = json!({"dim": dim, "c": c, "grading": grading, "A_re": sym(0), "A_im": sym(16)});
        let dir = tempfile::tempdir().unwrap();
        let p = write_temp(&dir, "lie.json", &lie);
        let reduced = dchar(&["reduce-step", &p]);
        prop_assert!(reduced.status.success(), "{}", String::from_utf8_lossy(&reduced.stderr));
        let spec = serde_json::from_slice::<Value>(&reduced.stdout).unwrap();
        prop_assert_eq!(spec["result"]["m"].as_u64(), Some(m as u64));

        // the full report and its bare result both re-parse
        let whole = dir.path().join("reduced.json");
        std::fs::write(&whole, &reduced.stdout).unwrap();
        let bare = write_temp(&dir, "bare.json", &spec["result"]);
        for input in [whole.to_string_lossy().into_owned(), bare] {
            let out = dchar(&["check-2step", &input, "--restarts", "20"]);
            // 0 for any verdict; 3 only when no non-degenerate J^mu exists (odd m)
            let code = out.status.code();
            prop_assert!(code == Some(0) || (code == Some(3) && m % 2 == 1), "{code:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
}

#[test]
fn reduce_step_pipes_into_check_2step_over_stdin() {
    use sha2::Digest;
    use std::io::Write;
    use std::process::Stdio;

    let reduced = dchar(&[
        "reduce-step",
        fixture("free-3step-two-generators.json").to_str().unwrap(),
    ]);
    assert!(reduced.status.success());
    let mut child = Command::new(BIN)
        .args(["check-2step", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&reduced.stdout).unwrap();
    let piped = report(&child.wait_with_output().unwrap());
    let digest = format!("sha256:{}", hex::encode(sha2::Sha256::digest(&reduced.stdout)));
    assert_eq!(piped["inputs_digest"], digest.as_str());
    assert!(piped["result"]["outcome"].is_string());
}
