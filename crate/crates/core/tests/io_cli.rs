//! Shipped fixtures, fuzz corpus replay and command-line behaviour.

use socp_prune::conic::text::{parse_program, write_program};
use socp_prune::io::{
    parse_labels, parse_manifest, parse_predictions, parse_report, parse_summary, read_predictions, read_report,
    render_report, ReportFormat, SUMMARY_COLUMNS,
};
use socp_prune::rng::seeded_rng;
use socp_prune::solver::kkt_residuals;
use socp_prune::{ConicSolution, SolveStatus};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect()
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socp-prune"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn tiny_fixture_loads_exactly() {
    let (t, y, split) = read_predictions(&fixture("tiny/manifest.toml")).unwrap();
    assert_eq!((t.num_models(), t.num_samples(), t.num_classes()), (2, 3, 2));
    let expected = [
        [[0.75, 0.25], [0.5, 0.5], [0.125, 0.875]],
        [[0.2, 0.8], [1.0, 0.0], [0.6, 0.4]],
    ];
    for (i, model) in expected.iter().enumerate() {
        for (k, row) in model.iter().enumerate() {
            assert_eq!(t.row(i, k), row, "model {i} sample {k}");
        }
    }
    assert_eq!(y.labels(), &[0, 1, 1]);
    assert_eq!((split.train, split.valid, split.test), (vec![0], vec![1], vec![2]));
}

#[test]
fn rng_matches_golden_draws() {
    let text = std::fs::read_to_string(fixture("rng_seed42.txt")).unwrap();
    let field = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
            .unwrap()
    };
    assert_eq!(seeded_rng(42).next_u64(), field("next_u64").parse::<u64>().unwrap());
    assert_eq!(seeded_rng(42).uniform(), field("uniform").parse::<f64>().unwrap());
}

#[test]
fn fuzz_seeds_parse_and_round_trip() {
    for (path, text) in corpus("parse_program") {
        let p = parse_program(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_program(&write_program(&p)).unwrap(), p);
    }
    for (path, text) in corpus("parse_manifest") {
        let m = parse_manifest(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_manifest(&m.render()).unwrap(), m);
    }
    // Table targets are fuzzed against this fixed 2x3x2 manifest.
    let m = parse_manifest(&std::fs::read_to_string(fixture("tiny/manifest.toml")).unwrap()).unwrap();
    for (path, text) in corpus("parse_predictions") {
        parse_predictions(&text, &m).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    for (path, text) in corpus("parse_labels") {
        parse_labels(&text, &m).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    for (path, text) in corpus("parse_report") {
        let r = parse_report(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_report(&render_report(&r, ReportFormat::Json)).unwrap(), r);
    }
    for (path, text) in corpus("parse_summary") {
        parse_summary(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn malformed_inputs_are_rejected_without_panicking() {
    let m = parse_manifest(&std::fs::read_to_string(fixture("tiny/manifest.toml")).unwrap()).unwrap();
    let junk = [
        "",
        "\n",
        "coneprog",
        "vars -1",
        "a,b,c\n1,2",
        "{\"format_version\": 1}",
        "\u{0}\u{1}",
        "1e999",
    ];
    for s in junk {
        assert!(parse_program(s).is_err());
        assert!(parse_manifest(s).is_err());
        assert!(parse_predictions(s, &m).is_err());
        assert!(parse_labels(s, &m).is_err());
        assert!(parse_report(s).is_err());
        assert!(parse_summary(s).is_err());
    }
    assert!(parse_program("coneprog 1\nvars 99999999999\nend\n").is_err());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| run(args, d).status.code().unwrap();

    assert_eq!(
        code(&[
            "gen",
            "--models",
            "4",
            "--samples",
            "60",
            "--classes",
            "3",
            "--out",
            "data"
        ]),
        0
    );
    assert_eq!(code(&["check", "data/manifest.toml"]), 0);
    // Missing file: I/O error.
    assert_eq!(code(&["check", "absent/manifest.toml"]), 4);
    assert_eq!(code(&["run", "--data", "absent/manifest.toml"]), 4);
    // Invalid input: a single-cell command without alpha, alpha out of range, bad manifest.
    assert_eq!(code(&["fit", "--data", "data/manifest.toml", "--lambda", "0.1"]), 2);
    assert_eq!(
        code(&[
            "fit",
            "--data",
            "data/manifest.toml",
            "--alpha",
            "1.5",
            "--lambda",
            "0.1"
        ]),
        2
    );
    std::fs::write(d.join("bad.toml"), "format_version = 7\n").unwrap();
    assert_eq!(code(&["check", "bad.toml"]), 2);
    std::fs::write(d.join("bad.txt"), "coneprog 1\nvars 1\n").unwrap();
    assert_eq!(code(&["solve", "bad.txt"]), 2);
    // Solver did not reach optimality: infeasible x ≥ 0, x = -1.
    std::fs::write(
        d.join("infeasible.txt"),
        "coneprog 1\nvars 1\nrows 1\na 0 0 1\nb 0 -1\ncone nonneg 1 0\nend\n",
    )
    .unwrap();
    assert_eq!(code(&["solve", "infeasible.txt"]), 3);
    // clap usage errors also map to 2.
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn solve_prints_a_certified_solution() {
    let dir = tempfile::tempdir().unwrap();
    let text = "coneprog 1\nvars 3\nrows 2\nobj 0 1\na 0 1 1\nb 0 3\na 1 2 1\nb 1 4\ncone quad 3 0 1 2\nend\n";
    std::fs::write(dir.path().join("norm.txt"), text).unwrap();
    let out = run(&["solve", "norm.txt", "--verbose"], dir.path());
    assert!(out.status.success());
    let sol: ConicSolution = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.x[0] - 5.0).abs() < 1e-8);
    let r = kkt_residuals(&parse_program(text).unwrap(), &sol).unwrap();
    assert!(r.primal.max(r.dual).max(r.gap) < 1e-7, "{r:?}");
    let trace = String::from_utf8(out.stderr).unwrap();
    assert!(trace.lines().count() >= 2 && trace.lines().all(|l| l.starts_with("iter=")));
}

#[test]
fn reports_written_by_the_cli_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let out = run(args, d);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    ok(&[
        "gen",
        "--models",
        "5",
        "--samples",
        "120",
        "--classes",
        "3",
        "--seed",
        "3",
        "--out",
        "data",
    ]);
    let grid = ["--alpha", "0.2,0.8", "--lambda", "0.05,0.3"];
    let mut args = vec!["run", "--data", "data/manifest.toml", "--out", "r.json"];
    args.extend(grid);
    ok(&args);
    let mut args = vec![
        "run",
        "--data",
        "data/manifest.toml",
        "--format",
        "csv",
        "--out",
        "r.csv",
    ];
    args.extend(grid);
    ok(&args);

    let report = read_report(&d.join("r.json")).unwrap();
    assert_eq!(report.num_models_full, 5);
    assert_eq!(report.selected.len(), report.num_models_pruned);
    assert_eq!(report.cells.len(), 4);
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), SUMMARY_COLUMNS.join(","));
    let summary = parse_summary(&csv).unwrap();
    assert_eq!(summary.models_pruned, report.num_models_pruned);
    assert_eq!(summary.threshold, report.threshold_used);

    let stdout = ok(&["check", "r.json"]);
    assert!(String::from_utf8(stdout).unwrap().starts_with("report ok"));
    let stdout = ok(&["check", "r.csv"]);
    assert!(String::from_utf8(stdout).unwrap().starts_with("summary ok"));
}
