//! On-disk formats and report serialization.

use hyperx::hypergraph::{read_hypergraph, synth_hypergraph, write_hypergraph, FeatureScheme, SynthConfig};
use hyperx::par::Exec;
use hyperx::train::{train, RunReport, TrainConfig};
use hyperx::Error;

fn small() -> hyperx::Hypergraph {
    synth_hypergraph(&SynthConfig {
        num_nodes: 30,
        num_hyperedges: 12,
        num_features: 3,
        features: FeatureScheme::LabelGaussian { noise: 0.5 },
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn files_round_trip_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let h = small();
    let prefix = dir.path().join("toy");
    write_hypergraph(&h, &prefix).unwrap();
    for ext in ["hg", "feat", "labels"] {
        assert!(dir.path().join(format!("toy.{ext}")).is_file());
    }
    let back = read_hypergraph(&prefix).unwrap();
    assert_eq!(back, h);
    let bits = |g: &hyperx::Hypergraph| g.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&h));
}

/// Hyperedge, feature and label file contents, plus the expected error.
type Case = (&'static str, &'static str, &'static str, fn(&Error) -> bool);

fn write(dir: &std::path::Path, hg: &str, feat: &str, labels: &str) -> std::path::PathBuf {
    let prefix = dir.join("case");
    std::fs::write(prefix.with_extension("hg"), hg).unwrap();
    std::fs::write(prefix.with_extension("feat"), feat).unwrap();
    std::fs::write(prefix.with_extension("labels"), labels).unwrap();
    prefix
}

#[test]
fn malformed_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [Case; 6] = [
        ("2 1 1 1\ne0: 0 2\n", "1\n2\n", "0\n0\n", |e| matches!(e, Error::NodeOutOfRange { node: 2, .. })),
        ("2 1 1 1\ne0: 1 1\n", "1\n2\n", "0\n0\n", |e| matches!(e, Error::DuplicateNode { node: 1, .. })),
        ("2 1 1 1\ne0:\n", "1\n2\n", "0\n0\n", |e| matches!(e, Error::EmptyHyperedge(0))),
        ("2 1 1 1\ne0: 0 1\n", "1\nx\n", "0\n0\n", |e| matches!(e, Error::NonNumeric { line: 2, .. })),
        ("2 2 1 1\ne0: 0 1\n", "1\n2\n", "0\n0\n", |e| matches!(e, Error::RowCountMismatch { expected: 2, found: 1, .. })),
        ("2 1 1 2\ne0: 0 1\n", "1\n2\n", "0\n2\n", |e| matches!(e, Error::LabelOutOfRange { node: 1, .. })),
    ];
    for (k, (hg, feat, labels, expected)) in cases.into_iter().enumerate() {
        let err = read_hypergraph(write(d, hg, feat, labels)).unwrap_err();
        assert!(expected(&err), "case {k}: {err}");
    }
    assert!(read_hypergraph(d.join("absent")).is_err());
}

#[test]
fn run_reports_survive_json() {
    let h = small();
    let cfg = TrainConfig { epochs: 5, hidden: 4, ..TrainConfig::default() };
    let report = train(&h, &cfg, 3, Exec::Sequential).unwrap().report;
    let text = serde_json::to_string(&report).unwrap();
    assert!(!text.contains('\n'));
    assert!(!text.contains("wall_clock_ms"));
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    let cfg: TrainConfig = serde_json::from_str(r#"{"epochs": 7, "mode": "paper-literal"}"#).unwrap();
    assert_eq!(cfg.epochs, 7);
    assert_eq!(cfg.lr, TrainConfig::default().lr);
}
