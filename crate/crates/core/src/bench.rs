//! Wall-clock comparison of online updating against re-solving every step.
//!
//! A benchmark over `T` time steps times the initial solve at step 0 and one
//! delta per later step, so each mode yields `T` rows.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::apply_delta;
use crate::pipeline::{init_offline, EmbeddingRun, RunConfig};
use crate::synth::{generate, SbmSpec, SyntheticStream};

pub const CSV_HEADER: &str = "step,mode,k,l,n,seconds,cumulative_seconds";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Online,
    Offline,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::Offline => "offline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub step: usize,
    pub mode: Mode,
    pub k: usize,
    pub l: usize,
    pub n: usize,
    pub seconds: f64,
    pub cumulative_seconds: f64,
}

impl TimingRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.9},{:.9}",
            self.step,
            self.mode.as_str(),
            self.k,
            self.l,
            self.n,
            self.seconds,
            self.cumulative_seconds
        )
    }
}

#[derive(Clone, Debug)]
pub struct BenchOutcome {
    pub rows: Vec<TimingRow>,
    /// State after the last step.
    pub run: EmbeddingRun,
}

impl BenchOutcome {
    pub fn total_seconds(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_seconds)
    }
}

/// Stream for a `steps`-step benchmark: `steps - 1` deltas.
pub fn bench_stream(spec: &SbmSpec, steps: usize) -> Result<SyntheticStream> {
    if steps == 0 {
        return Err(Error::InvalidInput("benchmark needs at least one step".into()));
    }
    generate(&SbmSpec {
        steps: steps - 1,
        ..spec.clone()
    })
}

/// Times one mode over the stream. `threads` sizes the worker pool; 1 keeps
/// both branches on the timing thread.
pub fn run_benchmark(stream: &SyntheticStream, config: &RunConfig, mode: Mode, threads: usize) -> Result<BenchOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| timed(stream, config, mode))
}

fn timed(stream: &SyntheticStream, config: &RunConfig, mode: Mode) -> Result<BenchOutcome> {
    // warm-up, not recorded
    init_offline(stream.initial.clone(), config.clone())?;

    let n = stream.initial.n();
    let mut rows = Vec::with_capacity(stream.deltas.len() + 1);
    let mut total = 0.0;
    let mut record = |step: usize, seconds: f64, rows: &mut Vec<TimingRow>| {
        total += seconds;
        rows.push(TimingRow {
            step,
            mode,
            k: config.k,
            l: config.l,
            n,
            seconds,
            cumulative_seconds: total,
        });
    };

    let t0 = Instant::now();
    let mut run = init_offline(stream.initial.clone(), config.clone())?;
    record(0, t0.elapsed().as_secs_f64(), &mut rows);
    for (t, delta) in stream.deltas.iter().enumerate() {
        let t0 = Instant::now();
        run = match mode {
            Mode::Online => run.step_online(delta)?,
            Mode::Offline => {
                let snapshot = apply_delta(&run.snapshot, delta)?;
                let mut fresh = init_offline(snapshot, config.clone())?;
                fresh.step = run.step + 1;
                fresh
            }
        };
        record(t + 1, t0.elapsed().as_secs_f64(), &mut rows);
    }
    Ok(BenchOutcome { rows, run })
}

pub fn write_csv(rows: &[TimingRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv())?;
    }
    Ok(())
}

/// Ratio of offline to online cumulative time.
pub fn speedup(online: &BenchOutcome, offline: &BenchOutcome) -> f64 {
    offline.total_seconds() / online.total_seconds()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SbmSpec {
        SbmSpec {
            n: 80,
            attr_dim: 10,
            drift_rate: 0.01,
            seed: 3,
            ..SbmSpec::default()
        }
    }

    #[test]
    fn rows_cover_every_step_in_both_modes() {
        let stream = bench_stream(&spec(), 4).unwrap();
        let cfg = RunConfig { k: 3, l: 3, ..RunConfig::default() };
        let on = run_benchmark(&stream, &cfg, Mode::Online, 1).unwrap();
        let off = run_benchmark(&stream, &cfg, Mode::Offline, 1).unwrap();
        assert_eq!(on.rows.len() + off.rows.len(), 8);
        for rows in [&on.rows, &off.rows] {
            assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
            assert!(rows.windows(2).all(|w| w[1].cumulative_seconds >= w[0].cumulative_seconds));
        }
        assert_eq!(on.run.step, 3);
        assert_eq!(on.run.snapshot, off.run.snapshot);
        let mut buf = Vec::new();
        write_csv(&on.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert!(text.lines().nth(1).unwrap().starts_with("0,online,3,3,80,"));
    }

    #[test]
    fn zero_steps_is_an_error() {
        assert!(bench_stream(&spec(), 0).is_err());
    }
}
