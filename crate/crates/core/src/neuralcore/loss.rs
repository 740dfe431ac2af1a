//! Loss functions. Loss values accumulate in f64 so histories and
//! checkpoint comparisons do not depend on the training scalar type.

use crate::neuralcore::tensor::Tensor;
use crate::neuralcore::NetError;
use crate::scalar::{cast, to_f64, Real};

/// Mean squared error over all elements; gradient 2 (pred - target) / n.
pub fn mse_loss<T: Real>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(f64, Tensor<T>), NetError> {
    if pred.shape() != target.shape() {
        return Err(NetError::ShapeMismatch(format!(
            "mse: pred {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.numel();
    let scale: T = cast(2.0 / n as f64);
    let mut loss = 0.0f64;
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss += to_f64(d) * to_f64(d);
        *g = d * scale;
    }
    Ok((loss / n as f64, grad))
}

/// Categorical cross entropy on logits via the log-sum-exp form, averaged
/// over the batch; gradient (softmax - one_hot) / batch.
pub fn cross_entropy_loss<T: Real>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>), NetError> {
    if logits.shape().len() != 2 || logits.shape()[0] != labels.len() {
        return Err(NetError::ShapeMismatch(format!(
            "cross entropy: logits {:?} vs {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let k = logits.shape()[1];
    let n = labels.len();
    let mut loss = 0.0f64;
    let mut grad = Tensor::zeros(logits.shape());
    let inv_n: T = cast(1.0 / n as f64);
    for (row, (&label, g_row)) in logits
        .data()
        .chunks(k)
        .zip(labels.iter().zip(grad.data_mut().chunks_mut(k)))
    {
        if label >= k {
            return Err(NetError::LabelOutOfRange { label, classes: k });
        }
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for &v in row {
            sum = sum + (v - m).exp();
        }
        let lse = to_f64(m) + to_f64(sum).ln();
        loss += lse - to_f64(row[label]);
        for (j, (g, &v)) in g_row.iter_mut().zip(row).enumerate() {
            let p = (v - m).exp() / sum;
            let y = if j == label { T::one() } else { T::zero() };
            *g = (p - y) * inv_n;
        }
    }
    Ok((loss / n as f64, grad))
}
