use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ncpb_cli::scenario::{AlgebraSpec, CMatrix, HyperstateSpec, KrausTerm, ToleranceSpec, Weight};
use ncpb_cli::{emit, generate_scenario, parse_scenario, parse_str, GenerateKind, InputError, Scenario, Verb};
use ncpb_core::linalg::{Mat, C64};
use proptest::prelude::*;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn ncpb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncpb")).args(args).output().unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const MINIMAL: &str = r#"{"algebra": {"blocks":[1]}, "hyperstate": {"kraus": [{"matrix": [[[1,0]]], "weight": 1}]}}"#;

#[test]
fn minimal_scenario_is_the_trivial_one() {
    let sc = parse_str(MINIMAL, "minimal").unwrap();
    assert_eq!(sc.algebra.blocks, vec![1]);
    let HyperstateSpec::Kraus(terms) = &sc.hyperstate else { panic!("kraus form expected") };
    assert_eq!(terms.len(), 1);
    assert_eq!(terms[0].weight, Weight(1.0));
    assert_eq!(terms[0].matrix.0[(0, 0)], C64::new(1.0, 0.0));
    let b = sc.build().unwrap();
    assert_eq!(b.gns.dim(), 1);
}

#[test]
fn negative_weight_names_the_field() {
    let text = MINIMAL.replace("\"weight\": 1", "\"weight\": -1");
    let err = parse_str(&text, "bad").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, InputError::Syntax { .. }));
    assert!(msg.contains("hyperstate.kraus[0].weight"), "{msg}");
    assert!(msg.contains("positive"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = MINIMAL.replacen('{', r#"{"colour": "blue", "#, 1);
    let msg = parse_str(&text, "bad").unwrap_err().to_string();
    assert!(msg.contains("colour"), "{msg}");
}

#[test]
fn non_square_matrices_are_rejected() {
    let text = MINIMAL.replace("[[[1,0]]]", "[[[1,0],[0,0]]]");
    assert!(parse_str(&text, "bad").is_err());
}

#[test]
fn shipped_pauli_fixture() {
    let sc = parse_scenario(&fixture("pauli_m2.json")).unwrap();
    assert_eq!(sc.algebra.blocks, vec![2]);
    let HyperstateSpec::Kraus(terms) = &sc.hyperstate else { panic!("kraus form expected") };
    assert_eq!(terms.len(), 3);
    for t in terms {
        assert!((t.weight.0 - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn shipped_fixtures_round_trip() {
    for e in std::fs::read_dir(fixture("")).unwrap() {
        let p = e.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        let sc = parse_str(&text, "fixture").unwrap();
        assert_eq!(parse_str(&emit(&sc), "emitted").unwrap(), sc, "{}", p.display());
    }
}

fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), n * n)
        .prop_map(move |v| CMatrix(Mat::from_shape_fn((n, n), |(i, j)| C64::new(v[i * n + j].0, v[i * n + j].1))))
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop::collection::vec(1usize..4, 1..3).prop_flat_map(|blocks| {
        let d: usize = blocks.iter().sum();
        (
            Just(blocks),
            prop::collection::vec((matrix(d), 1e-6f64..10.0), 1..4),
            prop::option::of("[a-z_]{1,12}"),
            prop::option::of(any::<u64>()),
            prop::option::of(1e-14f64..1e-2),
            prop::sample::subsequence(Verb::ANALYSES.to_vec(), 0..4),
        )
            .prop_map(|(blocks, terms, name, seed, residual, analyses)| Scenario {
                name,
                description: None,
                algebra: AlgebraSpec { blocks, weights: None },
                hyperstate: HyperstateSpec::Kraus(
                    terms
                        .into_iter()
                        .map(|(matrix, w)| KrausTerm { matrix, weight: Weight(w) })
                        .collect(),
                ),
                partner: None,
                inclusion: None,
                channel: None,
                analyses,
                tolerances: ToleranceSpec {
                    residual,
                    ..Default::default()
                },
                expect: None,
                seed,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_inverts_emit(sc in scenario()) {
        prop_assert_eq!(parse_str(&emit(&sc), "emitted").unwrap(), sc);
    }
}

#[test]
fn generators_are_deterministic() {
    let kind = GenerateKind::RandomRegular { blocks: vec![2], pairs: 2 };
    let a = generate_scenario(&kind, 7).unwrap().scenario;
    let b = generate_scenario(&kind, 7).unwrap().scenario;
    let c = generate_scenario(&kind, 8).unwrap().scenario;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn random_regular_seed_7_classifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rr.json");
    let out = ncpb(&["generate", "random-regular", "--seed", "7", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let out = ncpb(&["classify", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let c = &stdout_json(&out)["analyses"][0]["result"]["classification"];
    assert_eq!(c["regular"], true);
    assert_eq!(c["symmetric"], true);
}

#[test]
fn group_walk_without_full_support_warns() {
    let out = ncpb(&["generate", "group-walk", "--group", "cyclic:3", "--support", "1,2", "--symmetric"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no full support"), "{err}");
    let sc = parse_str(&String::from_utf8_lossy(&out.stdout), "generated").unwrap();
    assert_eq!(sc.expect.unwrap().harmonic_dim, Some(3));
}

#[test]
fn non_generating_control_matches_fixture() {
    let g = generate_scenario(&GenerateKind::NonGeneratingControl, 0).unwrap().scenario;
    let HyperstateSpec::Kraus(terms) = g.hyperstate else { panic!("kraus form expected") };
    assert_eq!(terms.len(), 2);
    assert!(terms.iter().all(|t| t.weight.0 == 0.5));
}

#[test]
fn boundary_of_pauli_is_m2() {
    let out = ncpb(&["boundary", fixture("pauli_m2.json").to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = stdout_json(&out);
    assert_eq!(rep["schema"], "ncpb-report/1");
    let b = rep["analyses"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["analysis"] == "boundary")
        .unwrap();
    assert_eq!(b["result"]["boundary"]["boundary_blocks"], serde_json::json!([2]));
}

#[test]
fn dilate_trace_channel_at_depth_two() {
    let out = ncpb(&["dilate", fixture("trace_channel.json").to_str().unwrap(), "--depth", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    assert_eq!(&headers[0], "scenario");
    let names: Vec<String> = rows.records().map(|r| r.unwrap()[2].to_string()).collect();
    assert!(names.iter().any(|n| n == "bhat[2]"));
    assert!(!names.iter().any(|n| n == "bhat[3]"));
}

#[test]
fn reports_are_deterministic_apart_from_timing() {
    let run = || {
        let mut v = stdout_json(&ncpb(&["verify-all", fixture("e2_coherent.json").to_str().unwrap(), "--format", "json"]));
        v["wall_clock_s"] = Value::Null;
        for a in v["analyses"].as_array_mut().unwrap() {
            a["wall_clock_s"] = Value::Null;
        }
        v
    };
    assert_eq!(run(), run());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.json", "{ not json");
    assert_eq!(ncpb(&["classify", &bad]).status.code(), Some(3));
    assert_eq!(ncpb(&["classify", "/nonexistent/x.json"]).status.code(), Some(3));
    assert_eq!(ncpb(&["classify", "--bogus-flag", &bad]).status.code(), Some(3));
    assert_eq!(ncpb(&["--help"]).status.code(), Some(0));

    let ok = write(&dir, "ok.json", MINIMAL);
    assert_eq!(ncpb(&["classify", &ok]).status.code(), Some(0));

    // a wrong prediction is an assertion failure
    let wrong = MINIMAL.replacen('{', r#"{"expect": {"harmonic_dim": 2}, "#, 1);
    let wrong = write(&dir, "wrong.json", &wrong);
    assert_eq!(ncpb(&["harmonic", &wrong]).status.code(), Some(1));

    // an explicitly requested analysis that cannot run is inconclusive
    assert_eq!(ncpb(&["gap", &ok]).status.code(), Some(2));
}

#[test]
fn out_is_written_whole() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let st = ncpb(&["classify", fixture("c2_projections.json").to_str().unwrap(), "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(0));
    assert!(st.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["verdict"], "pass");
}
