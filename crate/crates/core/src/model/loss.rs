//! Masked binary cross-entropy over token-pair logits.
//!
//! Positive cells contribute `-log sigma(x)`, negative cells
//! `-log(1 - sigma(x))`, unlabeled cells nothing. Both terms are evaluated as
//! softplus of the logit so large scores cannot overflow.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::decoder::ScoreMatrix;
use crate::corpus::PairLabelMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Sum over labeled cells.
    #[default]
    Sum,
    /// Sum divided by the number of labeled cells.
    Mean,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    /// `dL/dA`, zero at every unlabeled cell.
    pub grad: Array2<f64>,
    pub labeled: usize,
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn masked_bce_loss(scores: &ScoreMatrix, labels: &PairLabelMatrix) -> Result<f64> {
    Ok(masked_bce_with_grad(scores, labels, Reduction::Sum)?.loss)
}

pub fn masked_bce_with_grad(
    scores: &ScoreMatrix,
    labels: &PairLabelMatrix,
    reduction: Reduction,
) -> Result<LossOutput> {
    let n = scores.size();
    if labels.size() != n {
        return Err(Error::Shape(format!(
            "score matrix is {n}x{n} but labels are {0}x{0}",
            labels.size()
        )));
    }
    let mut grad = Array2::zeros((n, n));
    let mut loss = 0.0;
    let mut labeled = 0usize;
    for i in 0..n {
        for j in 0..n {
            let x = scores.get(i, j);
            match labels.get(i, j) {
                1 => {
                    loss += softplus(-x);
                    grad[[i, j]] = sigmoid(x) - 1.0;
                    labeled += 1;
                }
                -1 => {
                    loss += softplus(x);
                    grad[[i, j]] = sigmoid(x);
                    labeled += 1;
                }
                _ => {}
            }
        }
    }
    if labeled == 0 {
        log::warn!("label matrix has no labeled cells; loss is 0 and carries no gradient");
    } else if reduction == Reduction::Mean {
        let inv = 1.0 / labeled as f64;
        loss *= inv;
        grad *= inv;
    }
    Ok(LossOutput {
        loss,
        grad,
        labeled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledCell;

    fn one_cell(y: i8, logit: f64) -> (ScoreMatrix, PairLabelMatrix) {
        let mut s = Array2::zeros((3, 3));
        s[[1, 1]] = logit;
        let labels = PairLabelMatrix::from_cells(3, &[LabeledCell { i: 1, j: 1, y }]).unwrap();
        (ScoreMatrix::new(s).unwrap(), labels)
    }

    #[test]
    fn zero_logit_costs_ln2_either_way() {
        for y in [1, -1] {
            let (s, l) = one_cell(y, 0.0);
            assert!((masked_bce_loss(&s, &l).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn large_logits_stay_finite() {
        let (s, l) = one_cell(-1, 1e4);
        let loss = masked_bce_loss(&s, &l).unwrap();
        assert!((loss - 1e4).abs() < 1e-9);
        let (s, l) = one_cell(1, 1e4);
        assert_eq!(masked_bce_loss(&s, &l).unwrap(), 0.0);
    }

    #[test]
    fn unlabeled_matrix_has_zero_loss() {
        let s = ScoreMatrix::new(Array2::from_elem((3, 3), 5.0)).unwrap();
        let out = masked_bce_with_grad(&s, &PairLabelMatrix::zeros(3), Reduction::Sum).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.labeled, 0);
        assert!(out.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mean_reduction_divides_by_labeled_count() {
        let s = ScoreMatrix::new(Array2::zeros((4, 4))).unwrap();
        let l = PairLabelMatrix::from_cells(
            4,
            &[LabeledCell { i: 1, j: 2, y: 1 }, LabeledCell { i: 2, j: 1, y: -1 }],
        )
        .unwrap();
        let sum = masked_bce_with_grad(&s, &l, Reduction::Sum).unwrap();
        let mean = masked_bce_with_grad(&s, &l, Reduction::Mean).unwrap();
        assert!((sum.loss / 2.0 - mean.loss).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let s = ScoreMatrix::new(Array2::zeros((4, 4))).unwrap();
        assert!(masked_bce_loss(&s, &PairLabelMatrix::zeros(3)).is_err());
    }
}
