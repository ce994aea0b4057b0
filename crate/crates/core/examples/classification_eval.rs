//! Cross-validated node classification on the fused embedding, swept over
//! its dimension.
//!
//! cargo run --release --example classification_eval

use dynembed::eval::{train_eval_classifier, LogisticOptions};
use dynembed::pipeline::{init_offline, RunConfig};
use dynembed::synth::{generate, SbmSpec};

fn main() -> dynembed::Result<()> {
    let spec = SbmSpec { n: 300, blocks: 4, p_in: 0.1, p_out: 0.04, steps: 0, seed: 9, ..SbmSpec::default() };
    let stream = generate(&spec)?;
    let run = init_offline(stream.initial.clone(), RunConfig { k: 10, l: 10, ..RunConfig::default() })?;

    println!("{:>3} {:>9} {:>9}", "l", "micro-F1", "macro-F1");
    for l in [2, 4, 8, 16, 20] {
        let (_, y) = run.refuse(l)?;
        let m = train_eval_classifier(&y, &stream.labels, 5, 0, &LogisticOptions::default())?;
        println!("{l:>3} {:>9.3} {:>9.3}", m.micro_f1, m.macro_f1);
    }
    Ok(())
}
