//! Downstream evaluation of embeddings: k-means clustering scored by ACC and
//! NMI, and cross-validated multinomial logistic regression.

mod classify;
mod kmeans;
mod metrics;

pub use classify::{softmax_loss_grad, stratified_folds, train_eval_classifier, ClassifierMetrics, LogisticOptions};
pub use kmeans::{kmeans, lloyd, wcss, KMeans, DEFAULT_RESTARTS};
pub use metrics::{clustering_metrics, hungarian_max, nmi};

use crate::error::{Error, Result};

/// Number of classes, checking that every class in `0..C` occurs.
pub fn class_count(labels: &[usize]) -> Result<usize> {
    let c = labels.iter().max().map(|m| m + 1).ok_or(Error::Empty("labels"))?;
    let mut seen = vec![false; c];
    labels.iter().for_each(|&l| seen[l] = true);
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidInput(format!("class {missing} has no members")));
    }
    Ok(c)
}
