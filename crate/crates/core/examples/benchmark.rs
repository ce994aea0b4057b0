//! Online updates against re-solving every step, for a few embedding sizes.
//!
//! cargo run --release --example benchmark -- 1000

use dynembed::bench::{bench_stream, run_benchmark, speedup, Mode};
use dynembed::pipeline::RunConfig;
use dynembed::synth::SbmSpec;

fn main() -> dynembed::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    let spec = SbmSpec { n, p_in: 0.03, p_out: 0.005, seed: 1, ..SbmSpec::default() };
    let stream = bench_stream(&spec, 10)?;
    for k in [10, 20, 40] {
        let config = RunConfig { k, l: k, ..RunConfig::default() };
        let on = run_benchmark(&stream, &config, Mode::Online, 1)?;
        let off = run_benchmark(&stream, &config, Mode::Offline, 1)?;
        println!(
            "k {k:>2}: online {:.3}s  offline {:.3}s  speedup {:.2}",
            on.total_seconds(),
            off.total_seconds(),
            speedup(&on, &off)
        );
    }
    Ok(())
}
