//! Track a drifting synthetic network step by step and compare the tracked
//! embedding with a from-scratch solve at the end.
//!
//! cargo run --release --example online_updates

use dynembed::dense::max_principal_angle;
use dynembed::eval::{clustering_metrics, kmeans};
use dynembed::pipeline::{init_offline, ResidualThreshold, RunConfig};
use dynembed::synth::{generate, SbmSpec};

fn main() -> dynembed::Result<()> {
    let spec = SbmSpec { n: 300, steps: 10, seed: 7, ..SbmSpec::default() };
    let stream = generate(&spec)?;
    let config = RunConfig {
        k: 6,
        l: 4,
        refresh_residual: ResidualThreshold::Auto,
        ..RunConfig::default()
    };

    let mut run = init_offline(stream.initial.clone(), config.clone())?;
    for delta in &stream.deltas {
        run = run.step_online(delta)?;
        let km = kmeans(&run.embedding, spec.blocks, 10, 0)?;
        let (acc, nmi) = clustering_metrics(&km.assignments, &stream.labels)?;
        let how = match run.last_report.as_ref().and_then(|r| r.refreshed) {
            Some(reason) => format!("refresh {reason:?}"),
            None => "online".to_string(),
        };
        println!(
            "step {:2}  {:<16} residual {:.2e}  acc {acc:.3}  nmi {nmi:.3}",
            run.step, how, run.drift.network.last_residual
        );
    }

    let offline = init_offline(run.snapshot.clone(), config)?;
    let ones = vec![1.0; run.n()];
    println!(
        "angle to re-solved embedding: {:.4} rad",
        max_principal_angle(&run.embedding, &offline.embedding, &ones)
    );
    Ok(())
}
