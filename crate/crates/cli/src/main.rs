//! `hyperx` command-line tool.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperx::ade::{self, ExpandOptions};
use hyperx::bench::{self, BenchConfig, BenchExec};
use hyperx::classic::{self, WeightRule};
use hyperx::gcn::PropagationMode;
use hyperx::hypergraph::{self, FeatureScheme, FileSet, SynthConfig};
use hyperx::numfmt::fmt_g17;
use hyperx::par::{self, Exec};
use hyperx::train::{self, GridCell, Method, ModelParams, RunReport, TrainConfig};
use hyperx::wl::{self, HarnessConfig, TrialKind};
use hyperx::Hypergraph;

use output::{check_input, check_writable, write_atomic};

#[derive(Parser)]
#[command(name = "hyperx", version, about = "Adaptive hypergraph expansion and node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand a hypergraph into a graph.
    Expand(ExpandArgs),
    /// Train a GCN node classifier on an expanded hypergraph.
    Train(TrainArgs),
    /// Run the WL expressiveness trials.
    Wl(WlArgs),
    /// Generate a synthetic labelled hypergraph.
    Gen(GenArgs),
    /// Time the adaptive expansion on a ladder of growing hypergraphs.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpandMethod {
    Ade,
    Ce,
    Se,
    Le,
    HypergcnFixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    Unit,
    InverseSize,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long, value_enum)]
    method: ExpandMethod,
    /// Path prefix of the `.hg`, `.feat` and `.labels` files.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Edge list, `u<TAB>v<TAB>w` per line.
    #[arg(long)]
    out: PathBuf,
    /// Representative pairs and mediators per hyperedge (ade, hypergcn-fixed).
    #[arg(long)]
    dump_selections: Option<PathBuf>,
    /// Clique expansion weight rule.
    #[arg(long, value_enum, default_value = "unit")]
    weights: Weights,
    /// Line expansion vertex table, `id<TAB>node<TAB>hyperedge` per line.
    #[arg(long)]
    vertices: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMethod {
    Ade,
    Ce,
    HypergcnFixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Normalized,
    PaperLiteral,
}

fn parse_splits(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    let [a, b, c] = parts[..] else {
        return Err("expected three comma-separated proportions".into());
    };
    Ok([a, b, c])
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "ade")]
    method: TrainMethod,
    #[arg(long, value_enum, default_value = "normalized")]
    mode: Mode,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value = "0.2,0.2,0.6", value_parser = parse_splits)]
    splits: [f64; 3],
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    seed: u64,
    /// JSON array of `{"lr": .., "weight_decay": ..}` cells.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// One JSON object per run.
    #[arg(long)]
    out: PathBuf,
    /// Output-layer embeddings of the first run's best snapshot.
    #[arg(long)]
    dump_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Drop the feature gate (ade only).
    #[arg(long)]
    no_gsi: bool,
    /// Drop the kernel weights (ade only).
    #[arg(long)]
    no_kernel: bool,
    /// Record per-run wall-clock time in the report and on stderr.
    #[arg(long)]
    with_timing: bool,
}

#[derive(Args)]
struct WlArgs {
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 30)]
    max_nodes: usize,
    #[arg(long, default_value_t = 20)]
    max_hyperedges: usize,
    #[arg(long, default_value_t = 8)]
    max_size: usize,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 200)]
    nodes: usize,
    #[arg(long, default_value_t = 120)]
    hyperedges: usize,
    #[arg(long, default_value_t = 2)]
    min_size: usize,
    #[arg(long, default_value_t = 6)]
    max_size: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 16)]
    features: usize,
    /// Feature noise around the class means.
    #[arg(long, default_value_t = 0.6)]
    noise: f64,
    /// Every feature equals 1; overrides `--noise`.
    #[arg(long)]
    constant_features: bool,
    /// Probability that a hyperedge is drawn from one class.
    #[arg(long, default_value_t = 0.8)]
    homophily: f64,
    #[arg(long)]
    seed: u64,
    /// Output path prefix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 4)]
    ladder: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 4000)]
    base_nodes: usize,
    #[arg(long, default_value_t = 2000)]
    base_hyperedges: usize,
    /// Expand with the parallel execution policy.
    #[arg(long)]
    parallel: bool,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(prefix: &Path) -> Result<Hypergraph> {
    Ok(hypergraph::read_hypergraph(prefix)?)
}

fn expand(a: ExpandArgs) -> Result<()> {
    check_input(&a.input)?;
    check_writable(&a.out)?;
    for p in a.dump_selections.iter().chain(&a.vertices) {
        check_writable(p)?;
    }
    let h = load(&a.input)?;
    let selections = |plan: &ade::ExpansionPlan| -> Result<()> {
        match &a.dump_selections {
            Some(p) => write_atomic(p, |w| ade::write_selections(plan, w)),
            None => Ok(()),
        }
    };
    match a.method {
        ExpandMethod::Ade => {
            let params = ModelParams::init(&h, &TrainConfig::default(), a.seed);
            let ex = ade::expand_with(
                &h,
                &params.gsi,
                &params.kernel,
                a.seed,
                ExpandOptions::default(),
                &mut ade::DistanceCache::new(),
            )?;
            write_atomic(&a.out, |w| ex.graph.write_tsv(w))?;
            selections(&ex.plan)?;
        }
        ExpandMethod::HypergcnFixed => {
            let plan = ade::hypergcn_fixed_plan(&h, a.seed, Exec::Parallel);
            let graph = ade::expand_hypergcn_fixed(&h, a.seed)?;
            write_atomic(&a.out, |w| graph.write_tsv(w))?;
            selections(&plan)?;
        }
        ExpandMethod::Ce => {
            let rule = match a.weights {
                Weights::Unit => WeightRule::Unit,
                Weights::InverseSize => WeightRule::InverseSize,
            };
            write_atomic(&a.out, |w| classic::clique_expand(&h, rule).write_tsv(w))?;
        }
        ExpandMethod::Se => write_atomic(&a.out, |w| classic::star_expand(&h).write_tsv(w))?,
        ExpandMethod::Le => {
            let g = classic::line_expand(&h);
            write_atomic(&a.out, |w| g.write_tsv(w))?;
            if let Some(p) = &a.vertices {
                write_atomic(p, |w| g.write_vertices(w))?;
            }
        }
    }
    if a.dump_selections.is_some() && !matches!(a.method, ExpandMethod::Ade | ExpandMethod::HypergcnFixed) {
        eprintln!("warning: --dump-selections only applies to ade and hypergcn-fixed");
    }
    Ok(())
}

fn write_reports(path: &Path, runs: &[&RunReport], with_timing: bool) -> Result<()> {
    let lines = runs
        .iter()
        .map(|r| {
            let mut r = (*r).clone();
            if !with_timing {
                r.wall_clock_ms = None;
            }
            serde_json::to_string(&r)
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_atomic(path, |w| lines.iter().try_for_each(|l| writeln!(w, "{l}")))
}

fn write_embeddings(path: &Path, z: &ndarray::Array2<f64>) -> Result<()> {
    write_atomic(path, |w| {
        for (i, row) in z.outer_iter().enumerate() {
            write!(w, "{i}")?;
            for v in row {
                write!(w, "\t{}", fmt_g17(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

fn train(a: TrainArgs) -> Result<()> {
    check_input(&a.input)?;
    check_writable(&a.out)?;
    if let Some(p) = &a.dump_embeddings {
        check_writable(p)?;
    }
    if a.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let grid: Option<Vec<GridCell>> = match &a.grid {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing grid {}", p.display()))?)
        }
        None => None,
    };
    let cfg = TrainConfig {
        method: match a.method {
            TrainMethod::Ade => Method::Ade,
            TrainMethod::Ce => Method::Ce,
            TrainMethod::HypergcnFixed => Method::HypergcnFixed,
        },
        mode: match a.mode {
            Mode::Normalized => PropagationMode::Normalized,
            Mode::PaperLiteral => PropagationMode::PaperLiteral,
        },
        epochs: a.epochs,
        lr: a.lr,
        weight_decay: a.weight_decay,
        dropout: a.dropout,
        hidden: a.hidden,
        splits: a.splits,
        gate: !a.no_gsi,
        kernel: !a.no_kernel,
        ..TrainConfig::default()
    };
    let h = load(&a.input)?;
    let seeds = train::repeat_seeds(a.seed, a.repeats);

    let (chosen, runs): (TrainConfig, Vec<RunReport>) = match grid {
        Some(grid) => {
            let report = train::grid_search(&h, &cfg, &grid, &seeds, Exec::Parallel)?;
            for c in &report.cells {
                println!(
                    "cell lr={} weight_decay={}: val {:.4} test {:.4} ± {:.4}",
                    c.cell.lr, c.cell.weight_decay, c.val_mean, c.test_mean, c.test_std
                );
            }
            let best = report.cells[report.best].cell;
            println!("best cell lr={} weight_decay={}", best.lr, best.weight_decay);
            let chosen = TrainConfig { lr: best.lr, weight_decay: best.weight_decay, ..cfg };
            (chosen, report.cells.into_iter().flat_map(|c| c.runs).collect())
        }
        None => {
            let outcomes = par::map_slice(Exec::Parallel, &seeds, |_, &s| train::train(&h, &cfg, s, Exec::Sequential));
            let runs = outcomes
                .into_iter()
                .map(|o| {
                    o.map(|o| {
                        let mut r = o.report;
                        r.wall_clock_ms = Some(o.elapsed.as_secs_f64() * 1e3);
                        r
                    })
                })
                .collect::<hyperx::Result<Vec<_>>>()?;
            let tests: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
            let (mean, std) = train::mean_std(&tests);
            println!("test accuracy {mean:.4} ± {std:.4} over {} runs", runs.len());
            (cfg, runs)
        }
    };
    if a.with_timing {
        for r in &runs {
            eprintln!("seed {}: {:.1} ms", r.seed, r.wall_clock_ms.unwrap_or(f64::NAN));
        }
    }
    write_reports(&a.out, &runs.iter().collect::<Vec<_>>(), a.with_timing)?;
    if let Some(p) = &a.dump_embeddings {
        let z = train::train(&h, &chosen, seeds[0], Exec::Parallel)?.best_logits;
        write_embeddings(p, &z)?;
    }
    Ok(())
}

fn wl(a: WlArgs) -> Result<()> {
    check_writable(&a.out)?;
    let cfg = HarnessConfig {
        trials: a.trials,
        max_nodes: a.max_nodes,
        max_hyperedges: a.max_hyperedges,
        max_size: a.max_size,
        iters: a.iters,
        seed: a.seed,
    };
    let reports = wl::run_trials(&cfg, Exec::Parallel)?;
    let lines = reports.iter().map(serde_json::to_string).collect::<Result<Vec<_>, _>>()?;
    write_atomic(&a.out, |w| lines.iter().try_for_each(|l| writeln!(w, "{l}")))?;
    for kind in [TrialKind::Coupled, TrialKind::Uncoupled, TrialKind::Rewired] {
        let s = wl::summarize(&reports, kind);
        println!(
            "{kind:?}: trials {} gwl_rate {:.3} wl_rate {:.3} violations {}",
            s.trials, s.gwl_rate, s.wl_rate, s.violations
        );
    }
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let files = FileSet::from_prefix(&a.out);
    for p in [&files.hyperedges, &files.features, &files.labels] {
        check_writable(p)?;
    }
    let features = if a.constant_features {
        FeatureScheme::Constant
    } else {
        FeatureScheme::LabelGaussian { noise: a.noise }
    };
    let h = hypergraph::synth_hypergraph(&SynthConfig {
        num_nodes: a.nodes,
        num_hyperedges: a.hyperedges,
        size_range: (a.min_size, a.max_size),
        num_classes: a.classes,
        num_features: a.features,
        features,
        homophily: a.homophily,
        seed: a.seed,
    })?;
    write_atomic(&files.hyperedges, |w| hypergraph::write_hyperedges(&h, w))?;
    write_atomic(&files.features, |w| hypergraph::write_features(&h, w))?;
    write_atomic(&files.labels, |w| hypergraph::write_labels(&h, w))
}

fn bench(a: BenchArgs) -> Result<()> {
    if let Some(p) = &a.out {
        check_writable(p)?;
    }
    let cfg = BenchConfig {
        ladder: a.ladder,
        base_nodes: a.base_nodes,
        base_hyperedges: a.base_hyperedges,
        reps: a.reps,
        seed: a.seed,
        exec: if a.parallel { BenchExec::Parallel } else { BenchExec::Sequential },
        ..BenchConfig::default()
    };
    let rows = bench::bench_scaling(&cfg)?;
    match &a.out {
        Some(p) => write_atomic(p, |w| bench::write_csv(&rows, w))?,
        None => bench::write_csv(&rows, std::io::stdout().lock())?,
    }
    if let Some(r) = bench::top_ratio(&rows) {
        eprintln!("top-rung time ratio per doubling of E: {r:.2}");
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("HYPERX_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().ok().filter(|&n| n > 0).with_context(|| format!("HYPERX_THREADS={value} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Expand(a) => expand(a),
        Command::Train(a) => train(a),
        Command::Wl(a) => wl(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(2);
        }
        // --help and --version.
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
