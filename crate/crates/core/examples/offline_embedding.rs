//! Embed a small two-community network with topic-like attributes and print
//! the consensus coordinates.
//!
//! cargo run --example offline_embedding

use dynembed::graph::Snapshot;
use dynembed::pipeline::{init_offline, RunConfig};
use dynembed::sparse::CsrMatrix;

fn main() -> dynembed::Result<()> {
    // two 6-cliques joined by one bridge
    let mut edges = Vec::new();
    for base in [0, 6] {
        for i in 0..6 {
            for j in i + 1..6 {
                edges.push((base + i, base + j, 1.0));
            }
        }
    }
    edges.push((5, 6, 1.0));
    let adjacency = CsrMatrix::symmetric_from_triplets(12, edges)?;

    // first community talks about attributes 0-2, second about 3-5
    let attrs = (0..12).flat_map(|v| {
        let off = if v < 6 { 0 } else { 3 };
        (0..3).map(move |a| (v, off + a, 1.0 + ((v + a) % 3) as f64 * 0.5))
    });
    let attributes = CsrMatrix::from_triplets(12, 6, attrs)?;

    let snapshot = Snapshot::new(adjacency, attributes)?;
    let run = init_offline(snapshot, RunConfig { k: 3, l: 2, ..RunConfig::default() })?;

    println!("network eigenvalues   {:.4?}", run.network.values());
    println!("attribute eigenvalues {:.4?}", run.attributes.values());
    println!("correlations          {:.4?}", run.projection.gammas);
    for (v, row) in run.embedding.row_iter().enumerate() {
        println!("node {v:2}  {:+.4}  {:+.4}", row[0], row[1]);
    }
    Ok(())
}
