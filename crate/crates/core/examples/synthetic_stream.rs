//! Generate a drifting SBM stream, write it in the file formats the CLI
//! reads, and read one delta back.
//!
//! cargo run --example synthetic_stream -- /tmp/sbm

use std::path::PathBuf;

use dynembed::io::{read_delta, write_stream, Manifest};
use dynembed::synth::{generate, SbmSpec};

fn main() -> dynembed::Result<()> {
    let dir = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sbm_stream"));
    let spec = SbmSpec { n: 150, steps: 5, drift_rate: 0.01, seed: 4, ..SbmSpec::default() };
    let stream = generate(&spec)?;
    let written = write_stream(&dir, &stream, Some(&spec))?;
    println!("wrote {} deltas to {}", written.deltas.len(), dir.display());

    let manifest = Manifest::read(&dir.join("manifest.json"))?;
    let (mean, var) = spec.expected_edges();
    println!(
        "{} edges at step 0 (expected {:.0} ± {:.0})",
        stream.initial.edge_count(),
        mean,
        var.sqrt()
    );
    for (t, path) in manifest.delta_paths(&dir.join("manifest.json")).iter().enumerate() {
        let delta = read_delta(path, manifest.nodes, manifest.attributes)?;
        println!(
            "delta {}: {} adjacency entries, {} attribute entries",
            t + 1,
            delta.adjacency().nnz(),
            delta.attributes().nnz()
        );
    }
    Ok(())
}
