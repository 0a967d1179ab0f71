use std::fs;
use std::path::PathBuf;

use splitctl::cli::{run, EXIT_NEGATIVE, EXIT_OK, EXIT_PARSE, EXIT_USAGE};
use splitctl::hall::HallBasis;
use splitctl::scheme::Scheme;

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn splitctl(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("splitctl").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn basis_reports_witt_totals() {
    let (code, out, _) = splitctl(&["basis", "--degree", "8"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("# 2 letters, degree <= 8, policy bstar-compatible, 71 elements"));
    assert!(out.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["5", "6", "6", "14"]));

    let (code, out, _) = splitctl(&["basis", "--degree", "6", "--policy", "lyndon"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("23 elements"));
}

#[test]
fn basis_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.txt");
    let (code, _, _) = splitctl(&["basis", "--degree", "5", "--output", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(path).unwrap();
    let basis = HallBasis::from_text(&text, 2).unwrap();
    assert_eq!(basis.len(), 14);
    assert_eq!(basis.to_text(), text);
}

#[test]
fn order_of_classical_schemes() {
    let (code, out, _) = splitctl(&["order", &data("schemes/strang.scheme")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("order: 2"));
    assert!(out.contains("defect M2: -1/24"));
    assert!(out.contains("defect W1: 1/12"));

    let (_, out, _) = splitctl(&["order", &data("schemes/trotter.scheme")]);
    assert!(out.starts_with("order: 1"));

    let (code, _, _) = splitctl(&["order", &data("schemes/strang.scheme"), "--expect", "3"]);
    assert_eq!(code, EXIT_NEGATIVE);
}

#[test]
fn parse_errors_carry_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scheme");
    fs::write(&path, "alpha-domain R+\nbeta-domain R\nstage 1/2 X1 1\nstage 1/2 X1\n").unwrap();
    let (code, _, err) = splitctl(&["order", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_PARSE);
    assert!(err.contains("4:"), "{err}");

    let (code, _, _) = splitctl(&["order"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn verify_recognizes_exact_scheme() {
    let (code, out, _) = splitctl(&["verify", &data("schemes/quadratic-exact.scheme"), "--system", "quadratic"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("exact"));

    let (code, out, _) = splitctl(&["verify", &data("schemes/strang.scheme"), "--expect", "2"]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn obstruct_controls_and_schemes() {
    let (code, out, _) = splitctl(&["obstruct", &data("schemes/quadratic-exact.scheme"), "--family", "w1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("functional: 1/48"));
    assert!(out.contains("verdict: obstructed"));
    assert!(out.contains("coordinate side: 1/48"));

    let (code, out, _) = splitctl(&["obstruct", &data("controls/worked.control")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("functional: 1/48"));

    let (code, out, _) = splitctl(&["obstruct", &data("controls/unmatched.control")]);
    assert_eq!(code, EXIT_NEGATIVE);
    assert!(out.contains("hypotheses-not-met"));
}

#[test]
fn obstruct_bounds() {
    let (_, out, _) = splitctl(&["obstruct", "--bound", "--flows", "X1"]);
    assert_eq!(out.trim(), "max order 2");
    let (_, out, _) = splitctl(&["obstruct", "--bound", "--flows", "X1,W1"]);
    assert_eq!(out.trim(), "max order 4");
}

#[test]
fn search_writes_a_verifiable_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("order2.spec");
    fs::write(
        &spec,
        "target-order 2\nflows X1\nstages 2\nalpha-domain R+\nbeta-domain R\nrestarts 8\n",
    )
    .unwrap();
    let scheme = dir.path().join("found.scheme");
    let (code, out, err) = splitctl(&[
        "search",
        spec.to_str().unwrap(),
        "--seed",
        "3",
        "--output",
        scheme.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    assert!(out.contains("# seed 3"));
    let text = fs::read_to_string(&scheme).unwrap();
    assert!(Scheme::parse(&text).is_ok(), "{text}");
    let (code, _, _) = splitctl(&["verify", scheme.to_str().unwrap(), "--expect", "2"]);
    assert_eq!(code, EXIT_OK);
}

#[test]
fn search_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("order3.spec");
    fs::write(
        &spec,
        "target-order 3\nflows X1\nstages 3\nalpha-domain R+\nbeta-domain R\nrestarts 4\n",
    )
    .unwrap();
    let (code, _, _) = splitctl(&["search", spec.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code, splitctl::cli::EXIT_SEARCH_FAILED);
}
