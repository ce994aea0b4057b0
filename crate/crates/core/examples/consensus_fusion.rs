//! Fuse two views that share one informative direction and differ in noise.
//! The leading correlation sits near 2 (the shared signal), the rest lower.
//!
//! cargo run --example consensus_fusion

use dynembed::consensus::{fuse, objective};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dynembed::Result<()> {
    let (n, k) = (100, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let signal: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect();
    let mut view = |mix: f64| {
        DMatrix::from_fn(n, k, |i, j| {
            let noise: f64 = rng.random_range(-1.0..1.0);
            if j == 0 {
                signal[i] + mix * noise
            } else {
                noise
            }
        })
    };
    let ya = view(0.1);
    let yx = view(0.3);

    let (proj, emb) = fuse(&ya, &yx, 3, None)?;
    println!("correlations {:.4?}", proj.gammas);
    let top: Vec<f64> = proj.p.column(0).iter().copied().collect();
    let (num, den) = objective(&ya, &yx, &top)?;
    println!("objective {num:.4}, constraint {den:.4}");
    let s0 = emb.y[(0, 0)].signum();
    let agree = (0..n).filter(|&i| (emb.y[(i, 0)].signum() == s0) == (i < n / 2)).count();
    println!("first fused coordinate separates the halves on {agree}/{n} nodes");
    Ok(())
}
