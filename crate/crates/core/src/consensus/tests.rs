use super::*;
use crate::dense::max_principal_angle;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0))
}

/// Solves the fusion problem through `B^{-1/2}` from an eigen-decomposition of
/// `B`, descending, with columns sign-fixed the same way.
fn oracle(ya: &DMatrix<f64>, yx: &DMatrix<f64>, ridge: f64) -> (Vec<f64>, DMatrix<f64>) {
    let k = ya.ncols();
    let mut z = DMatrix::zeros(ya.nrows(), 2 * k);
    for j in 0..k {
        z.set_column(j, &ya.column(j));
        z.set_column(k + j, &yx.column(j));
    }
    let c = z.transpose() * &z;
    let mut b = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..2 * k {
        for j in 0..2 * k {
            if (i < k) == (j < k) {
                b[(i, j)] = c[(i, j)];
            }
        }
        b[(i, i)] += ridge;
    }
    let eb = SymmetricEigen::new(b);
    let inv_sqrt = &eb.eigenvectors
        * DMatrix::from_diagonal(&eb.eigenvalues.map(|x| 1.0 / x.sqrt()))
        * eb.eigenvectors.transpose();
    let m = &inv_sqrt * c * &inv_sqrt;
    let e = SymmetricEigen::new((&m + m.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut p = DMatrix::zeros(2 * k, 2 * k);
    for (c, &i) in order.iter().enumerate() {
        let mut col: Vec<f64> = (&inv_sqrt * e.eigenvectors.column(i)).iter().copied().collect();
        canonicalize_sign(&mut col);
        p.set_column(c, &DVector::from_vec(col));
    }
    (vals, p)
}

#[test]
fn identical_views_reach_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ya = random_matrix(30, 4, &mut rng);
    let (proj, _) = fuse(&ya, &ya, 4, Some(0.0)).unwrap();
    assert!((proj.gammas[0] - 2.0).abs() < 1e-10);
    // every aligned direction [p; p] attains 2, the anti-aligned ones 0
    assert!(proj.gammas.iter().all(|g| (g - 2.0).abs() < 1e-10));
}

#[test]
fn orthogonal_views_have_unit_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = random_matrix(20, 6, &mut rng).qr().q();
    let ya = q.columns(0, 3).into_owned();
    let yx = q.columns(3, 3).into_owned();
    let (proj, _) = fuse(&ya, &yx, 6, Some(0.0)).unwrap();
    for g in &proj.gammas {
        assert!((g - 1.0).abs() < 1e-10, "{g}");
    }
}

#[test]
fn random_views_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ya = random_matrix(40, 5, &mut rng);
    let yx = random_matrix(40, 5, &mut rng);
    let (proj, emb) = fuse(&ya, &yx, 3, None).unwrap();
    let (vals, p) = oracle(&ya, &yx, proj.ridge);
    for i in 0..3 {
        assert!((proj.gammas[i] - vals[i]).abs() <= 1e-8);
        for r in 0..10 {
            assert!((proj.p[(r, i)] - p[(r, i)]).abs() <= 1e-8);
        }
    }
    assert!(proj.gammas.windows(2).all(|w| w[0] >= w[1]));
    let z = stack_views(&ya, &yx).unwrap();
    assert!((&z * &proj.p - &emb.y).abs().max() <= 1e-10);
}

#[test]
fn columns_are_b_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ya = random_matrix(50, 6, &mut rng);
    let yx = random_matrix(50, 6, &mut rng);
    let (proj, _) = fuse(&ya, &yx, 8, None).unwrap();
    let (_, mut b) = fusion_matrices(&ya, &yx).unwrap();
    for i in 0..12 {
        b[(i, i)] += proj.ridge;
    }
    let gram = proj.p.transpose() * b * &proj.p;
    assert!((gram - DMatrix::identity(8, 8)).abs().max() <= 1e-8);
}

#[test]
fn objective_is_consistent_and_maximal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ya = random_matrix(40, 4, &mut rng);
    let yx = &ya * 0.5 + random_matrix(40, 4, &mut rng);
    let (proj, _) = fuse(&ya, &yx, 3, Some(0.0)).unwrap();
    for i in 0..3 {
        let col: Vec<f64> = proj.p.column(i).iter().copied().collect();
        let (obj, cons) = objective(&ya, &yx, &col).unwrap();
        assert!((obj - proj.gammas[i] * cons).abs() <= 1e-8);
    }
    let top: Vec<f64> = proj.p.column(0).iter().copied().collect();
    let (best, cons) = objective(&ya, &yx, &top).unwrap();
    let best = best / cons;
    for _ in 0..100 {
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (o, c) = objective(&ya, &yx, &v).unwrap();
        assert!(o / c <= best + 1e-10);
    }
}

#[test]
fn rotating_a_view_keeps_the_fused_subspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ya = random_matrix(45, 5, &mut rng);
    let yx = random_matrix(45, 5, &mut rng);
    let r = random_matrix(5, 5, &mut rng).qr().q();
    let (_, a) = fuse(&ya, &yx, 4, Some(0.0)).unwrap();
    let (_, b) = fuse(&(&ya * r), &yx, 4, Some(0.0)).unwrap();
    let angle = max_principal_angle(&a.y, &b.y, &vec![1.0; 45]);
    assert!(angle <= 1e-6, "{angle}");
}

#[test]
fn scaling_a_view_keeps_gammas() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ya = random_matrix(30, 3, &mut rng);
    let yx = random_matrix(30, 3, &mut rng);
    let (a, _) = fuse(&ya, &yx, 6, Some(0.0)).unwrap();
    let (b, _) = fuse(&(&ya * 3.5), &yx, 6, Some(0.0)).unwrap();
    for (x, y) in a.gammas.iter().zip(&b.gammas) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn rejects_bad_l_and_singular_constraint() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ya = random_matrix(20, 3, &mut rng);
    let yx = random_matrix(20, 3, &mut rng);
    assert!(matches!(fuse(&ya, &yx, 7, None), Err(Error::InvalidInput(_))));
    assert!(matches!(fuse(&ya, &yx, 0, None), Err(Error::InvalidInput(_))));
    let mut dup = ya.clone();
    let c0 = dup.column(0).into_owned();
    dup.set_column(1, &c0);
    assert!(matches!(fuse(&dup, &yx, 2, Some(0.0)), Err(Error::SingularConstraint)));
    assert!(fuse(&dup, &yx, 2, None).is_ok());
}

#[test]
fn deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ya = random_matrix(25, 4, &mut rng);
    let yx = random_matrix(25, 4, &mut rng);
    assert_eq!(fuse(&ya, &yx, 3, None).unwrap(), fuse(&ya, &yx, 3, None).unwrap());
}
