//! First-order eigenpair updates on a random weighted graph: the error after
//! a perturbation of size ε shrinks roughly like ε².
//!
//! cargo run --release --example perturbation_accuracy

use std::sync::Arc;

use dynembed::dense::generalized_eigen_of;
use dynembed::graph::{build_laplacian, delta_laplacian};
use dynembed::perturb::{update_state, PerturbOptions};
use dynembed::sparse::CsrMatrix;
use dynembed::spectral::solve_topk;
use dynembed::synth::random_weighted_graph;

fn main() -> dynembed::Result<()> {
    let n = 60;
    let base = random_weighted_graph(n, 0.2, 11)?;
    let old = Arc::new(build_laplacian(&base)?);
    let state = solve_topk(&old, 4, 0)?;
    // a fixed direction to scale: reweight a handful of existing edges
    let dir: Vec<_> = base.iter().filter(|&(i, j, _)| i < j).step_by(7).map(|(i, j, w)| (i, j, 0.5 * w)).collect();

    println!("{:>8} {:>12} {:>12}", "eps", "stale err", "updated err");
    for eps in [1e-1, 1e-2, 1e-3] {
        let bump = CsrMatrix::symmetric_from_triplets(n, dir.iter().map(|&(i, j, w)| (i, j, eps * w)))?;
        let new = Arc::new(build_laplacian(&base.add(&bump)?)?);
        let (ddeg, dlap) = delta_laplacian(&old, &new)?;
        let (updated, _) = update_state(&state, &dlap, &ddeg, new.clone(), &PerturbOptions::default())?;
        let (exact, _) = generalized_eigen_of(&new);
        // exact[0] is the trivial pair
        let err = |vals: Vec<f64>| vals.iter().zip(&exact[1..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{eps:>8.0e} {:>12.3e} {:>12.3e}", err(state.values()), err(updated.values()));
    }
    Ok(())
}
