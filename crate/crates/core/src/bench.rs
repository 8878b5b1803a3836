//! Scaling ladder for the adaptive expansion: synthetic hypergraphs whose
//! incidence count roughly doubles per rung, each expanded several times.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ade::{default_hidden, expand_with, DistanceCache, ExpandOptions, GsiNetParams, KernelParams};
use crate::hypergraph::{synth_hypergraph, FeatureScheme, Hypergraph, SynthConfig};
use crate::par::Exec;
use crate::rng::Seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub ladder: usize,
    pub base_nodes: usize,
    pub base_hyperedges: usize,
    pub num_features: usize,
    /// Timed repetitions per rung (after one warmup run).
    pub reps: usize,
    pub seed: u64,
    pub exec: BenchExec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchExec {
    #[default]
    Sequential,
    Parallel,
}

impl From<BenchExec> for Exec {
    fn from(e: BenchExec) -> Self {
        match e {
            BenchExec::Sequential => Exec::Sequential,
            BenchExec::Parallel => Exec::Parallel,
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ladder: 4,
            base_nodes: 4000,
            base_hyperedges: 2000,
            num_features: 16,
            reps: 5,
            seed: 1,
            exec: BenchExec::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub rung: usize,
    /// Total incidences `Σ_e |e|`.
    pub incidences: usize,
    pub median_ms: f64,
}

/// Hypergraph of rung `r`: `2^r` times the base node and hyperedge counts.
pub fn ladder_hypergraph(cfg: &BenchConfig, rung: usize) -> Result<Hypergraph> {
    synth_hypergraph(&SynthConfig {
        num_nodes: cfg.base_nodes << rung,
        num_hyperedges: cfg.base_hyperedges << rung,
        size_range: (2, 6),
        num_classes: 2,
        num_features: cfg.num_features,
        features: FeatureScheme::LabelGaussian { noise: 0.6 },
        homophily: 0.8,
        seed: Seed(cfg.seed).derive(rung as u64).0,
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Expansion setup for one hypergraph: gate weights and unit bandwidths.
struct Job<'a> {
    h: &'a Hypergraph,
    gsi: GsiNetParams,
    kernel: KernelParams,
    opts: ExpandOptions,
    seed: u64,
}

impl<'a> Job<'a> {
    fn new(h: &'a Hypergraph, seed: u64, exec: Exec) -> Self {
        let b = h.num_features();
        let gsi = GsiNetParams::glorot(b, default_hidden(b), &mut Seed(seed).rng());
        let opts = ExpandOptions { exec, ..ExpandOptions::default() };
        Job { h, gsi, kernel: KernelParams::unit(b), opts, seed }
    }

    /// One full expansion with a fresh distance cache, in milliseconds.
    fn run(&self) -> Result<f64> {
        let start = Instant::now();
        let ex = expand_with(self.h, &self.gsi, &self.kernel, self.seed, self.opts, &mut DistanceCache::new())?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(ex);
        Ok(ms)
    }
}

/// Median over `reps` timed expansions after one warmup.
pub fn time_expand(h: &Hypergraph, reps: usize, seed: u64, exec: Exec) -> Result<f64> {
    let job = Job::new(h, seed, exec);
    job.run()?;
    let times = (0..reps.max(1)).map(|_| job.run()).collect::<Result<Vec<_>>>()?;
    Ok(median(times))
}

pub fn bench_scaling(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.ladder < 2 {
        return Err(Error::config("the ladder needs at least two rungs"));
    }
    (0..cfg.ladder)
        .map(|rung| {
            let h = ladder_hypergraph(cfg, rung)?;
            let median_ms = time_expand(&h, cfg.reps, cfg.seed, cfg.exec.into())?;
            Ok(BenchRow { rung, incidences: h.num_incidences(), median_ms })
        })
        .collect()
}

/// `time(top) / time(top - 1)`, normalised by the incidence ratio of the two
/// rungs so that ladders whose `E` does not exactly double are compared
/// fairly.
pub fn top_ratio(rows: &[BenchRow]) -> Option<f64> {
    let [.., a, b] = rows else { return None };
    let e_ratio = b.incidences as f64 / a.incidences as f64;
    Some(b.median_ms / a.median_ms * 2.0 / e_ratio)
}

pub fn write_csv(rows: &[BenchRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "E,ms")?;
    for r in rows {
        writeln!(out, "{},{:.3}", r.incidences, r.median_ms)?;
    }
    Ok(())
}
