use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::class_count;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// L2 penalty on the weights (the bias row is not penalized).
    pub lambda: f64,
    /// Stop when the gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            lambda: 1e-4,
            grad_tol: 1e-7,
            max_iter: 5000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// Appends a constant column for the bias.
fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, l) = x.shape();
    DMatrix::from_fn(n, l + 1, |i, j| if j < l { x[(i, j)] } else { 1.0 })
}

/// Mean cross-entropy of a softmax model plus `λ/2 ‖W‖²` over all rows of
/// `theta` but the last (bias), and its gradient. `x` already carries the bias
/// column; `theta` is `(l + 1) x C`.
pub fn softmax_loss_grad(x: &DMatrix<f64>, labels: &[usize], theta: &DMatrix<f64>, lambda: f64) -> (f64, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mut scores = x * theta;
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let mut row = scores.row_mut(i);
        let m = row.max();
        row.iter_mut().for_each(|s| *s = (*s - m).exp());
        let z: f64 = row.sum();
        row.iter_mut().for_each(|s| *s /= z);
        loss -= row[y].max(f64::MIN_POSITIVE).ln();
        row[y] -= 1.0;
    }
    let mut grad = x.transpose() * scores / n;
    loss /= n;
    let last = theta.nrows() - 1;
    for r in 0..last {
        for c in 0..theta.ncols() {
            loss += 0.5 * lambda * theta[(r, c)].powi(2);
            grad[(r, c)] += lambda * theta[(r, c)];
        }
    }
    (loss, grad)
}

fn fit(x: &DMatrix<f64>, labels: &[usize], classes: usize, opts: &LogisticOptions) -> DMatrix<f64> {
    let mut theta = DMatrix::zeros(x.ncols(), classes);
    let (mut f, mut g) = softmax_loss_grad(x, labels, &theta, opts.lambda);
    let mut step = 1.0;
    for _ in 0..opts.max_iter {
        let gn2 = g.norm_squared();
        if gn2.sqrt() <= opts.grad_tol {
            break;
        }
        // Armijo backtracking from a step that grows after easy iterations
        step *= 2.0;
        loop {
            let cand = &theta - &g * step;
            let (fc, gc) = softmax_loss_grad(x, labels, &cand, opts.lambda);
            if fc <= f - 1e-4 * step * gn2 {
                theta = cand;
                f = fc;
                g = gc;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return theta;
            }
        }
    }
    theta
}

fn predict(x: &DMatrix<f64>, theta: &DMatrix<f64>) -> Vec<usize> {
    let s = x * theta;
    (0..s.nrows()).map(|i| s.row(i).transpose().argmax().0).collect()
}

/// Mean and standard deviation per column over the given rows; zero spread
/// maps to one.
fn column_stats(x: &DMatrix<f64>, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let m = rows.len() as f64;
    (0..x.ncols())
        .map(|j| {
            let mean = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / m;
            let var = rows.iter().map(|&i| (x[(i, j)] - mean).powi(2)).sum::<f64>() / m;
            let sd = var.sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        })
        .unzip()
}

fn standardized(x: &DMatrix<f64>, rows: &[usize], mean: &[f64], sd: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, j| (x[(rows[r], j)] - mean[j]) / sd[j])
}

fn f1(p: f64, r: f64) -> f64 {
    if p == r {
        p
    } else if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn score(pred: &[usize], truth: &[usize], classes: usize) -> ClassifierMetrics {
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let correct: usize = tp.iter().sum();
    let wrong: usize = fp.iter().sum();
    let missed: usize = fn_.iter().sum();
    let accuracy = correct as f64 / pred.len() as f64;
    let ratio = |a: usize, b: usize| if a + b > 0 { a as f64 / (a + b) as f64 } else { 0.0 };
    let micro_f1 = f1(ratio(correct, wrong), ratio(correct, missed));
    let macro_f1 = (0..classes).map(|c| f1(ratio(tp[c], fp[c]), ratio(tp[c], fn_[c]))).sum::<f64>() / classes as f64;
    ClassifierMetrics {
        accuracy,
        micro_f1,
        macro_f1,
    }
}

/// Assigns every node to one of `folds` folds, spreading each class evenly.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let classes = class_count(labels)?;
    if folds < 2 {
        return Err(Error::InvalidInput("need at least two folds".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if let Some(c) = members.iter().position(|m| m.len() < folds) {
        return Err(Error::Stratification(format!(
            "class {c} has {} members, fewer than {folds} folds",
            members[c].len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for m in &mut members {
        m.shuffle(&mut rng);
        for (r, &i) in m.iter().enumerate() {
            fold[i] = (offset + r) % folds;
        }
        offset += m.len();
    }
    Ok(fold)
}

/// Stratified `folds`-fold cross-validation of a multinomial logistic
/// regression on the rows of `y`; metrics are averaged over folds.
pub fn train_eval_classifier(
    y: &DMatrix<f64>,
    labels: &[usize],
    folds: usize,
    seed: u64,
    opts: &LogisticOptions,
) -> Result<ClassifierMetrics> {
    if y.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "classifier labels",
            expected: y.nrows().to_string(),
            actual: labels.len().to_string(),
        });
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("embedding contains non-finite values".into()));
    }
    let classes = class_count(labels)?;
    let fold = stratified_folds(labels, folds, seed)?;
    let per_fold: Vec<ClassifierMetrics> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] == f).collect();
            let (mean, sd) = column_stats(y, &train);
            let xtr = with_bias(&standardized(y, &train, &mean, &sd));
            let xte = with_bias(&standardized(y, &test, &mean, &sd));
            let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let yte: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let theta = fit(&xtr, &ytr, classes, opts);
            score(&predict(&xte, &theta), &yte, classes)
        })
        .collect();
    let k = folds as f64;
    let mean = |f: fn(&ClassifierMetrics) -> f64| per_fold.iter().map(f).sum::<f64>() / k;
    Ok(ClassifierMetrics {
        accuracy: mean(|m| m.accuracy),
        micro_f1: mean(|m| m.micro_f1),
        macro_f1: mean(|m| m.macro_f1),
    })
}
