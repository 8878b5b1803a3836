//! Training loop behaviour on small synthetic hypergraphs.

use hyperx::gcn::PropagationMode;
use hyperx::hypergraph::{synth_hypergraph, FeatureScheme, SynthConfig};
use hyperx::par::Exec;
use hyperx::train::{
    default_grid, grid_search, mean_std, repeat_seeds, train, GridCell, Method, TrainConfig,
};

fn separable(num_nodes: usize, seed: u64) -> hyperx::Hypergraph {
    synth_hypergraph(&SynthConfig {
        num_nodes,
        num_hyperedges: num_nodes / 2,
        num_classes: 2,
        num_features: 8,
        features: FeatureScheme::LabelGaussian { noise: 0.3 },
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn forty_nodes_fit_the_training_set() {
    let h = separable(40, 1);
    let cfg = TrainConfig { epochs: 200, hidden: 16, ..TrainConfig::default() };
    let r = train(&h, &cfg, 3, Exec::Parallel).unwrap().report;
    assert!(r.curve.iter().any(|e| e.train_acc == 1.0), "train accuracy never reached 1");
}

#[test]
fn loss_trends_down_in_every_window() {
    let h = separable(60, 2);
    let cfg = TrainConfig { epochs: 200, hidden: 16, dropout: 0.0, ..TrainConfig::default() };
    let r = train(&h, &cfg, 5, Exec::Parallel).unwrap().report;
    let losses: Vec<f64> = r.curve.iter().map(|e| e.loss).collect();
    for window in losses.chunks(50) {
        let upticks = window.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(upticks as f64 <= 0.05 * window.len() as f64, "{upticks} upticks in a window");
        assert!(window.last() <= window.first());
    }
}

#[test]
fn best_validation_snapshot_is_reported() {
    let h = separable(60, 4);
    let cfg = TrainConfig { epochs: 40, hidden: 8, ..TrainConfig::default() };
    let r = train(&h, &cfg, 9, Exec::Parallel).unwrap().report;
    let best = r.curve.iter().map(|e| e.val_acc).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.best_val_acc, best);
    let first = r.curve.iter().position(|e| e.val_acc == best).unwrap();
    assert_eq!(r.best_epoch, first);
}

#[test]
fn identical_runs_identical_reports() {
    let h = separable(50, 6);
    let cfg = TrainConfig { epochs: 15, hidden: 8, ..TrainConfig::default() };
    let a = train(&h, &cfg, 2, Exec::Parallel).unwrap();
    let b = train(&h, &cfg, 2, Exec::Parallel).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.best_logits, b.best_logits);
}

#[test]
fn zero_lr_cell_loses_the_grid() {
    let h = separable(60, 7);
    let base = TrainConfig { epochs: 60, hidden: 8, ..TrainConfig::default() };
    let grid = [GridCell { lr: 0.0, weight_decay: 0.0 }, GridCell { lr: 0.01, weight_decay: 5e-4 }];
    let seeds = repeat_seeds(1, 2);
    let report = grid_search(&h, &base, &grid, &seeds, Exec::Parallel).unwrap();
    assert_eq!(report.best, 1);
    assert_eq!(report.cells[0].runs.len(), 2);

    // Reported spread equals a direct sample-std computation.
    let cell = &report.cells[1];
    let tests: Vec<f64> = cell.runs.iter().map(|r| r.test_acc).collect();
    let mean = tests.iter().sum::<f64>() / tests.len() as f64;
    let var = tests.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (tests.len() - 1) as f64;
    assert!((cell.test_std - var.sqrt()).abs() < 1e-15);
    assert!((cell.test_mean - mean).abs() < 1e-15);
}

#[test]
fn one_cell_grid_is_plain_training() {
    let h = separable(40, 8);
    let base = TrainConfig { epochs: 10, hidden: 8, ..TrainConfig::default() };
    let cell = GridCell { lr: base.lr, weight_decay: base.weight_decay };
    let report = grid_search(&h, &base, &[cell], &[5], Exec::Sequential).unwrap();
    let mut run = report.cells[0].runs[0].clone();
    run.wall_clock_ms = None;
    assert_eq!(run, train(&h, &base, 5, Exec::Sequential).unwrap().report);
}

#[test]
fn std_over_five_seeds() {
    let values = [0.8, 0.85, 0.9, 0.82, 0.88];
    let (m, s) = mean_std(&values);
    let want_m = values.iter().sum::<f64>() / 5.0;
    let want_s = (values.iter().map(|v| (v - want_m).powi(2)).sum::<f64>() / 4.0).sqrt();
    assert!((m - want_m).abs() < 1e-15 && (s - want_s).abs() < 1e-15);
    assert_eq!(default_grid().len(), 4);
}

#[test]
fn ablations_and_baselines_learn() {
    let h = separable(80, 10);
    let variants = [
        TrainConfig { gate: false, ..TrainConfig::default() },
        TrainConfig { kernel: false, ..TrainConfig::default() },
        TrainConfig { method: Method::Ce, ..TrainConfig::default() },
        TrainConfig { method: Method::HypergcnFixed, ..TrainConfig::default() },
        TrainConfig { mode: PropagationMode::PaperLiteral, ..TrainConfig::default() },
    ];
    for cfg in variants {
        let cfg = TrainConfig { epochs: 80, hidden: 16, ..cfg };
        let r = train(&h, &cfg, 1, Exec::Parallel).unwrap().report;
        assert!(r.test_acc > 0.7, "{:?}/{:?} gate={} kernel={}: {}", cfg.method, cfg.mode, cfg.gate, cfg.kernel, r.test_acc);
    }
}
