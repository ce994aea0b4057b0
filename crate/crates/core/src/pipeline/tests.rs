use super::*;
use crate::spectral::orthonormality_error;
use crate::synth::{generate, SbmSpec};

fn small_stream(steps: usize, drift: f64, seed: u64) -> crate::synth::SyntheticStream {
    generate(&SbmSpec {
        n: 60,
        blocks: 3,
        p_in: 0.4,
        p_out: 0.05,
        attr_dim: 12,
        attr_signal: 1.5,
        drift_rate: drift,
        steps,
        seed,
    })
    .unwrap()
}

fn config(k: usize, l: usize) -> RunConfig {
    RunConfig {
        k,
        l,
        refresh_residual: ResidualThreshold::Never,
        ..RunConfig::default()
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

#[test]
fn l_above_two_k_is_rejected() {
    let s = small_stream(0, 0.0, 1);
    assert!(matches!(init_offline(s.initial, config(3, 7)), Err(Error::InvalidInput(_))));
}

#[test]
fn offline_is_bitwise_deterministic() {
    let s = small_stream(0, 0.0, 2);
    let a = init_offline(s.initial.clone(), config(4, 4)).unwrap();
    let b = init_offline(s.initial, config(4, 4)).unwrap();
    assert_eq!(a.embedding, b.embedding);
    assert_eq!(a.step, 0);
    assert_eq!(a.embedding.shape(), (60, 4));
}

#[test]
fn empty_delta_is_identity() {
    let s = small_stream(0, 0.0, 3);
    let run = init_offline(s.initial, config(4, 3)).unwrap();
    let next = run.step_online(&Delta::empty(60, 12)).unwrap();
    assert_eq!(next.step, 1);
    assert!(max_abs_diff(&run.embedding, &next.embedding) <= 1e-10);
    for (p, q) in run.network.pairs.iter().zip(&next.network.pairs) {
        assert!((p.value - q.value).abs() <= 1e-10);
    }
}

#[test]
fn refresh_every_one_matches_offline_on_advanced_snapshot() {
    let s = small_stream(3, 0.01, 4);
    let cfg = RunConfig {
        refresh_every: Some(1),
        ..config(4, 4)
    };
    let mut run = init_offline(s.initial.clone(), cfg.clone()).unwrap();
    for (t, d) in s.deltas.iter().enumerate() {
        run = run.step_online(d).unwrap();
        let fresh = init_offline(s.snapshot_at(t + 1).unwrap(), cfg.clone()).unwrap();
        assert_eq!(run.embedding, fresh.embedding);
        assert_eq!(run.drift.refreshes.last(), Some(&(t + 1, RefreshReason::Schedule)));
        let worst = run.network.residuals().into_iter().fold(0.0, f64::max);
        assert!(worst <= 1e-8);
    }
    assert_eq!(run.drift.refreshes.len(), 3);
}

#[test]
fn updates_keep_d_orthonormality_and_sync() {
    let s = small_stream(5, 0.01, 5);
    let mut run = init_offline(s.initial.clone(), config(5, 5)).unwrap();
    for (t, d) in s.deltas.iter().enumerate() {
        run = run.step_online(d).unwrap();
        assert!(run.drift.refreshes.is_empty());
        assert_eq!(run.snapshot, s.snapshot_at(t + 1).unwrap());
        for st in [&run.network, &run.attributes] {
            let vecs: Vec<Vec<f64>> = st.pairs.iter().map(|p| p.vector.clone()).collect();
            assert!(orthonormality_error(&vecs, &st.laplacian.deg) <= 1e-8);
            assert!(st.laplacian.lap.row_sums().iter().all(|r| r.abs() <= 1e-10));
        }
        // tracked Laplacians agree with ones built from the snapshot
        let rebuilt = build_laplacian(run.snapshot.adjacency()).unwrap();
        assert!(max_abs_diff(&rebuilt.lap.to_dense(), &run.network.laplacian.lap.to_dense()) <= 1e-12);
        let w = build_similarity(&run.snapshot, None).unwrap();
        let rebuilt = build_laplacian(&w.w).unwrap();
        assert!(max_abs_diff(&rebuilt.lap.to_dense(), &run.attributes.laplacian.lap.to_dense()) <= 1e-10);
    }
}

#[test]
fn zero_residual_threshold_always_refreshes() {
    let s = small_stream(2, 0.01, 6);
    let cfg = RunConfig {
        refresh_residual: ResidualThreshold::Absolute(0.0),
        ..config(4, 4)
    };
    let run = init_offline(s.initial, cfg).unwrap();
    let next = run.step_online(&s.deltas[0]).unwrap();
    assert_eq!(next.drift.refreshes, vec![(1, RefreshReason::Residual)]);
    assert_eq!(next.last_report.unwrap().refreshed, Some(RefreshReason::Residual));
}

#[test]
fn tiny_deltas_commute_to_first_order() {
    let s = small_stream(0, 0.0, 7);
    let run = init_offline(s.initial.clone(), config(4, 4)).unwrap();
    let eps = 1e-4;
    let d1 = CsrMatrix::symmetric_from_triplets(60, vec![(0, 31, eps), (5, 44, eps)]).unwrap();
    let d2 = CsrMatrix::symmetric_from_triplets(60, vec![(2, 50, eps), (0, 31, eps)]).unwrap();
    let x0 = CsrMatrix::zeros(60, 12);
    let two = run
        .step_online(&Delta::new(d1.clone(), x0.clone()).unwrap())
        .unwrap()
        .step_online(&Delta::new(d2.clone(), x0.clone()).unwrap())
        .unwrap();
    let one = run.step_online(&Delta::new(d1.add(&d2).unwrap(), x0).unwrap()).unwrap();
    for (p, q) in two.network.pairs.iter().zip(&one.network.pairs) {
        assert!((p.value - q.value).abs() <= 1e-6);
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let s = small_stream(2, 0.01, 8);
    let run = init_offline(s.initial.clone(), config(4, 3)).unwrap();
    let run = run.step_online(&s.deltas[0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    run.save_checkpoint(&path).unwrap();
    let back = EmbeddingRun::load_checkpoint(&path).unwrap();
    assert_eq!(back.embedding, run.embedding);
    assert_eq!(back.step, 1);
    let a = run.step_online(&s.deltas[1]).unwrap();
    let b = back.step_online(&s.deltas[1]).unwrap();
    assert_eq!(a.embedding, b.embedding);
}

#[test]
fn stale_version_and_tampered_snapshot_are_rejected() {
    let s = small_stream(0, 0.0, 9);
    let run = init_offline(s.initial, config(3, 2)).unwrap();
    let mut v = serde_json::to_value(Checkpoint::from_run(&run)).unwrap();
    v["version"] = serde_json::json!(CHECKPOINT_VERSION + 1);
    assert!(matches!(
        Checkpoint::from_json(&v.to_string()),
        Err(Error::CheckpointVersion { .. })
    ));
    let mut v = serde_json::to_value(Checkpoint::from_run(&run)).unwrap();
    v["snapshot_digest"] = serde_json::json!("00");
    let cp = Checkpoint::from_json(&v.to_string()).unwrap();
    assert!(matches!(cp.into_run(), Err(Error::CorruptCheckpoint(_))));
    assert!(matches!(Checkpoint::from_json("{"), Err(Error::CorruptCheckpoint(_))));
}

#[test]
fn sparsified_similarity_path_runs() {
    let s = small_stream(2, 0.01, 10);
    let cfg = RunConfig {
        sparsify_top: Some(15),
        ..config(4, 4)
    };
    let mut run = init_offline(s.initial.clone(), cfg).unwrap();
    for d in &s.deltas {
        run = run.step_online(d).unwrap();
    }
    let w = build_similarity(&run.snapshot, Some(15)).unwrap();
    let rebuilt = build_laplacian(&w.w).unwrap();
    assert!(max_abs_diff(&rebuilt.lap.to_dense(), &run.attributes.laplacian.lap.to_dense()) <= 1e-12);
}
