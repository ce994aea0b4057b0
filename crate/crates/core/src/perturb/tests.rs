use super::*;
use crate::dense::{generalized_eigen_of, max_principal_angle};
use crate::graph::{build_laplacian, delta_laplacian};
use crate::spectral::{orthonormality_error, solve_topk};
use crate::synth::random_weighted_graph;
use nalgebra::DVector;

fn pair_of(base: &CsrMatrix) -> Arc<LaplacianPair> {
    Arc::new(build_laplacian(base).unwrap())
}

fn deltas(old: &LaplacianPair, new: &LaplacianPair) -> (SparseDiagonal, CsrMatrix) {
    delta_laplacian(old, new).unwrap()
}

fn path3() -> CsrMatrix {
    CsrMatrix::symmetric_from_triplets(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
}

#[test]
fn zero_delta_changes_nothing() {
    let p = pair_of(&random_weighted_graph(20, 0.2, 1).unwrap());
    let state = solve_topk(&p, 4, 0).unwrap();
    let dl = CsrMatrix::zeros(20, 20);
    let dd = SparseDiagonal::zeros(20);
    for pair in &state.pairs {
        assert_eq!(delta_eigenvalue(pair, &dl, &dd).unwrap(), 0.0);
    }
    let dv = delta_eigenvector(&state, 2, &dl, &dd, &PerturbOptions::default()).unwrap();
    assert!(dv.delta.iter().all(|&x| x == 0.0));
    let (next, report) = update_state(&state, &dl, &dd, Arc::clone(&p), &PerturbOptions::default()).unwrap();
    assert_eq!(next.pairs, state.pairs);
    assert!(report.flags.is_empty());
    assert_eq!(report.pairs.len(), 4);
}

#[test]
fn zero_eigenvalue_reduces_to_laplacian_form() {
    let a = vec![0.3, -0.1, 0.7];
    let pair = EigenPair { value: 0.0, vector: a.clone() };
    let dl = CsrMatrix::symmetric_from_triplets(3, vec![(0, 0, 1.0), (0, 2, -1.0), (2, 2, 1.0)]).unwrap();
    let dd = SparseDiagonal::new(3, vec![(1, 5.0)]);
    let got = delta_eigenvalue(&pair, &dl, &dd).unwrap();
    assert_eq!(got, dl.quad_form(&a, &a));
}

#[test]
fn path_to_triangle_first_order_estimate() {
    let old = pair_of(&path3());
    let tri = path3().add(&CsrMatrix::symmetric_from_triplets(3, vec![(0, 2, 1.0)]).unwrap()).unwrap();
    let new = pair_of(&tri);
    let state = solve_topk(&old, 1, 0).unwrap();
    let (dd, dl) = deltas(&old, &new);
    let predicted = state.pairs[0].value + delta_eigenvalue(&state.pairs[0], &dl, &dd).unwrap();
    let (exact, _) = generalized_eigen_of(&new);
    let (before, _) = generalized_eigen_of(&old);
    // a unit edge on three nodes is not small: 1 -> 2 predicted, 1.5 exact
    assert!((predicted - 2.0).abs() < 1e-12);
    assert!((exact[1] - 1.5).abs() < 1e-12);
    assert!((predicted - exact[1]).abs() <= (exact[1] - before[1]).abs() + 1e-12);
}

#[test]
fn path_to_weak_triangle_error_is_second_order() {
    let old = pair_of(&path3());
    let state = solve_topk(&old, 1, 0).unwrap();
    let mut last = f64::INFINITY;
    for eps in [0.1, 0.01, 0.001] {
        let tri = path3().add(&CsrMatrix::symmetric_from_triplets(3, vec![(0, 2, eps)]).unwrap()).unwrap();
        let new = pair_of(&tri);
        let (dd, dl) = deltas(&old, &new);
        let predicted = state.pairs[0].value + delta_eigenvalue(&state.pairs[0], &dl, &dd).unwrap();
        let (exact, _) = generalized_eigen_of(&new);
        let err = (predicted - exact[1]).abs();
        assert!(err <= 0.5 * (exact[1] - 1.0).abs(), "eps {eps}");
        assert!(err <= 2.0 * eps * eps, "eps {eps}: {err}");
        assert!(err < last);
        last = err;
    }
}

#[test]
fn uniform_degree_inflation_only_rescales() {
    let p = pair_of(&random_weighted_graph(25, 0.2, 4).unwrap());
    let state = solve_topk(&p, 5, 0).unwrap();
    let c = 0.01;
    let dd = SparseDiagonal::new(25, p.deg.iter().enumerate().map(|(i, d)| (i, c * d)));
    let dl = CsrMatrix::zeros(25, 25);
    for i in 0..5 {
        let dv = delta_eigenvector(&state, i, &dl, &dd, &PerturbOptions::default()).unwrap();
        for (x, a) in dv.delta.iter().zip(&state.pairs[i].vector) {
            assert!((x + 0.5 * c * a).abs() < 1e-12);
        }
        assert!(dv.flagged.is_empty());
    }
}

#[test]
fn index_out_of_range() {
    let p = pair_of(&random_weighted_graph(10, 0.3, 4).unwrap());
    let state = solve_topk(&p, 2, 0).unwrap();
    let r = delta_eigenvector(&state, 2, &CsrMatrix::zeros(10, 10), &SparseDiagonal::zeros(10), &PerturbOptions::default());
    assert!(matches!(r, Err(Error::IndexOutOfRange { index: 2, k: 2 })));
}

#[test]
fn dimension_mismatch() {
    let p = pair_of(&random_weighted_graph(10, 0.3, 4).unwrap());
    let state = solve_topk(&p, 2, 0).unwrap();
    let r = delta_eigenvalue(&state.pairs[0], &CsrMatrix::zeros(9, 9), &SparseDiagonal::zeros(10));
    assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn formulas_match_dense_quadratic_forms() {
    for seed in 0..10u64 {
        let base = random_weighted_graph(25, 0.2, seed).unwrap();
        let old = pair_of(&base);
        let state = solve_topk(&old, 4, seed).unwrap();
        let bump = CsrMatrix::symmetric_from_triplets(25, vec![(1, 7, 0.4), (3, 20, 1.1)]).unwrap();
        let new = pair_of(&base.add(&bump).unwrap());
        let (dd, dl) = deltas(&old, &new);
        let dld = dl.to_dense();
        let ddd = dd.to_dense();
        let (w, dlam, _) = weights_and_deltas(&state, &dl, &dd, &PerturbOptions::default()).unwrap();
        for i in 0..4 {
            let ai = DVector::from_row_slice(&state.pairs[i].vector);
            let li = state.pairs[i].value;
            let want = (ai.transpose() * &dld * &ai)[(0, 0)] - li * (ai.transpose() * &ddd * &ai)[(0, 0)];
            assert!((dlam[i] - want).abs() <= 1e-12);
            assert!((w.alpha[(i, i)] + 0.5 * (ai.transpose() * &ddd * &ai)[(0, 0)]).abs() <= 1e-12);
            for p in 0..4 {
                if p == i {
                    continue;
                }
                let ap = DVector::from_row_slice(&state.pairs[p].vector);
                let lp = state.pairs[p].value;
                let num = (ap.transpose() * &dld * &ai)[(0, 0)] - li * (ap.transpose() * &ddd * &ai)[(0, 0)];
                let want = num / (li - lp);
                assert!((w.alpha[(i, p)] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }
}

#[test]
fn single_edge_update_tracks_exact_eigenvectors() {
    let base = random_weighted_graph(30, 0.15, 9).unwrap();
    let old = pair_of(&base);
    let k = 4;
    let state = solve_topk(&old, k, 9).unwrap();
    let (u, v) = (0..30)
        .flat_map(|i| (0..30).map(move |j| (i, j)))
        .find(|&(i, j)| i < j && base.get(i, j) == 0.0)
        .unwrap();
    let bump = CsrMatrix::symmetric_from_triplets(30, vec![(u, v, 1.0)]).unwrap();
    let new = pair_of(&base.add(&bump).unwrap());
    let (dd, dl) = deltas(&old, &new);
    let (_, exact) = generalized_eigen_of(&new);
    for i in 0..k {
        let dv = delta_eigenvector(&state, i, &dl, &dd, &PerturbOptions::default()).unwrap();
        if !dv.flagged.is_empty() {
            continue;
        }
        let old_v = DMatrix::from_column_slice(30, 1, &state.pairs[i].vector);
        let upd: Vec<f64> = state.pairs[i].vector.iter().zip(&dv.delta).map(|(a, b)| a + b).collect();
        let upd_v = DMatrix::from_column_slice(30, 1, &upd);
        let ex = exact.columns(i + 1, 1).into_owned();
        let before = max_principal_angle(&old_v, &ex, &new.deg);
        let after = max_principal_angle(&upd_v, &ex, &new.deg);
        assert!(after <= 10.0 * before, "pair {i}: {after} vs {before}");
        assert!(after <= before, "pair {i}: update moved away ({after} > {before})");
    }
}

#[test]
fn update_restores_new_d_orthonormality() {
    let base = random_weighted_graph(40, 0.15, 2).unwrap();
    let old = pair_of(&base);
    let state = solve_topk(&old, 6, 0).unwrap();
    let bump = CsrMatrix::symmetric_from_triplets(40, vec![(0, 9, 0.02), (5, 30, 0.01), (11, 12, 0.03)]).unwrap();
    let new = pair_of(&base.add(&bump).unwrap());
    let (dd, dl) = deltas(&old, &new);
    let (next, report) = update_state(&state, &dl, &dd, Arc::clone(&new), &PerturbOptions::default()).unwrap();
    let vecs: Vec<Vec<f64>> = next.pairs.iter().map(|p| p.vector.clone()).collect();
    assert!(orthonormality_error(&vecs, &new.deg) <= 1e-8);
    assert!(next.pairs.windows(2).all(|w| w[0].value <= w[1].value));
    assert_eq!(report.pairs.len(), 6);
    // every updated eigenvalue is closer to the exact one than the stale value
    let (exact, _) = generalized_eigen_of(&new);
    for (i, (p, q)) in state.pairs.iter().zip(&next.pairs).enumerate() {
        assert!((q.value - exact[i + 1]).abs() < (p.value - exact[i + 1]).abs(), "pair {i}");
    }
}

#[test]
fn eigenvalue_error_is_second_order() {
    let base = random_weighted_graph(30, 0.2, 13).unwrap();
    let old = pair_of(&base);
    let state = solve_topk(&old, 3, 0).unwrap();
    let bump = CsrMatrix::symmetric_from_triplets(30, vec![(2, 17, 1.0), (4, 5, 0.7), (8, 21, 1.3)]).unwrap();
    let unit_new = pair_of(&base.add(&bump).unwrap());
    let (dd, dl) = deltas(&old, &unit_new);
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let new = pair_of(&base.add(&bump.scale(eps)).unwrap());
            let (exact, _) = generalized_eigen_of(&new);
            let pred = state.pairs[0].value + eps * delta_eigenvalue(&state.pairs[0], &dl, &dd).unwrap();
            (exact[1] - pred).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((50.0..=200.0).contains(&ratio), "ratio {ratio} from {errs:?}");
    }
}

#[test]
fn tiny_gaps_are_flagged_and_force_refresh() {
    // K5: all four nontrivial eigenvalues coincide
    let t = (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j, 1.0)));
    let base = CsrMatrix::symmetric_from_triplets(5, t).unwrap();
    let old = pair_of(&base);
    let state = solve_topk(&old, 4, 0).unwrap();
    let bump = CsrMatrix::symmetric_from_triplets(5, vec![(0, 1, 0.1)]).unwrap();
    let new = pair_of(&base.add(&bump).unwrap());
    let (dd, dl) = deltas(&old, &new);
    let dv = delta_eigenvector(&state, 0, &dl, &dd, &PerturbOptions::default()).unwrap();
    assert_eq!(dv.flagged.len(), 3);
    let r = update_state(&state, &dl, &dd, new, &PerturbOptions::default());
    assert!(matches!(r, Err(Error::RefreshRequired(_))));
}

#[test]
fn general_form_divides_by_d_norm() {
    let p = pair_of(&random_weighted_graph(12, 0.3, 6).unwrap());
    let state = solve_topk(&p, 2, 0).unwrap();
    let bump = CsrMatrix::symmetric_from_triplets(12, vec![(0, 3, 1.0)]).unwrap();
    let new = pair_of(&random_weighted_graph(12, 0.3, 6).unwrap().add(&bump).unwrap());
    let (dd, dl) = deltas(&p, &new);
    let mut scaled = state.pairs[0].clone();
    scaled.vector.iter_mut().for_each(|x| *x *= 3.0);
    let normalized = delta_eigenvalue(&state.pairs[0], &dl, &dd).unwrap();
    let general = delta_eigenvalue_general(&scaled, &p.deg, &dl, &dd).unwrap();
    assert!((normalized - general).abs() < 1e-13);
}

