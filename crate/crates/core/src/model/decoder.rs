//! One-head token-pair decoder.
//!
//! Hidden vectors are projected to queries and keys, optionally rotated by
//! their positions, and every ordered pair gets the scaled dot product
//! `(R_i q_i) . (R_j k_j) / sqrt(d2)` as its logit.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::encoder::HiddenSequence;
use super::rope::rotate_rows;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    /// `d2 x d1`
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    /// `d2 x d1`
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub rope: bool,
}

impl DecoderParams {
    /// Weights drawn from `N(0, 1/d1)`, biases zero.
    pub fn init(d1: usize, d2: usize, rope: bool, rng: &mut impl Rng) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::Config("decoder dimensions must be nonzero".into()));
        }
        if rope && d2 % 2 != 0 {
            return Err(Error::Config(format!(
                "rotary embedding needs an even projection size; got {d2}"
            )));
        }
        let normal = Normal::new(0.0, 1.0 / (d1 as f64).sqrt()).expect("valid std");
        Ok(DecoderParams {
            wq: Array2::from_shape_simple_fn((d2, d1), || normal.sample(rng)),
            bq: Array1::zeros(d2),
            wk: Array2::from_shape_simple_fn((d2, d1), || normal.sample(rng)),
            bk: Array1::zeros(d2),
            rope,
        })
    }

    pub fn zeros(d1: usize, d2: usize, rope: bool) -> Self {
        DecoderParams {
            wq: Array2::zeros((d2, d1)),
            bq: Array1::zeros(d2),
            wk: Array2::zeros((d2, d1)),
            bk: Array1::zeros(d2),
            rope,
        }
    }

    pub fn d1(&self) -> usize {
        self.wq.ncols()
    }

    pub fn d2(&self) -> usize {
        self.wq.nrows()
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.wq.as_slice().expect("contiguous"),
            self.bq.as_slice().expect("contiguous"),
            self.wk.as_slice().expect("contiguous"),
            self.bk.as_slice().expect("contiguous"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.wq.as_slice_mut().expect("contiguous"),
            self.bq.as_slice_mut().expect("contiguous"),
            self.wk.as_slice_mut().expect("contiguous"),
            self.bk.as_slice_mut().expect("contiguous"),
        ]
    }

    fn check(&self) -> Result<()> {
        let (d2, d1) = self.wq.dim();
        if self.wk.dim() != (d2, d1) || self.bq.len() != d2 || self.bk.len() != d2 {
            return Err(Error::Shape(format!(
                "inconsistent decoder parameters: wq {:?}, wk {:?}, bq {}, bk {}",
                self.wq.dim(),
                self.wk.dim(),
                self.bq.len(),
                self.bk.len()
            )));
        }
        if self.rope && d2 % 2 != 0 {
            return Err(Error::Config(format!("odd d2 = {d2} with rotary embedding")));
        }
        Ok(())
    }
}

/// `N x N` pre-sigmoid scores; rows are subject tokens, columns object tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub scores: Array2<f64>,
}

impl ScoreMatrix {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        if scores.nrows() != scores.ncols() {
            return Err(Error::Shape(format!(
                "score matrix must be square, got {:?}",
                scores.dim()
            )));
        }
        Ok(ScoreMatrix { scores })
    }

    pub fn size(&self) -> usize {
        self.scores.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[[i, j]]
    }
}

/// `q_i = Wq h_i + bq`, `k_i = Wk h_i + bk` for every row.
pub fn project_qk(h: &HiddenSequence, params: &DecoderParams) -> Result<(Array2<f64>, Array2<f64>)> {
    params.check()?;
    if h.dim() != params.d1() {
        return Err(Error::Shape(format!(
            "hidden size {} does not match decoder input size {}",
            h.dim(),
            params.d1()
        )));
    }
    let q = h.vectors.dot(&params.wq.t()) + &params.bq;
    let k = h.vectors.dot(&params.wk.t()) + &params.bk;
    Ok((q, k))
}

pub fn score_matrix(q: &Array2<f64>, k: &Array2<f64>, params: &DecoderParams) -> Result<ScoreMatrix> {
    score_matrix_with_offset(q, k, params, 0.0)
}

/// Same as [`score_matrix`] with every token position shifted by `offset`.
pub fn score_matrix_with_offset(
    q: &Array2<f64>,
    k: &Array2<f64>,
    params: &DecoderParams,
    offset: f64,
) -> Result<ScoreMatrix> {
    if q.dim() != k.dim() || q.ncols() != params.d2() {
        return Err(Error::Shape(format!(
            "q {:?} and k {:?} must both be N x {}",
            q.dim(),
            k.dim(),
            params.d2()
        )));
    }
    let scale = 1.0 / (params.d2() as f64).sqrt();
    let scores = if params.rope {
        let qr = rotate_rows(q, offset, 1.0)?;
        let kr = rotate_rows(k, offset, 1.0)?;
        qr.dot(&kr.t()) * scale
    } else {
        q.dot(&k.t()) * scale
    };
    ScoreMatrix::new(scores)
}

/// Intermediates kept by [`decoder_forward`] for the backward pass.
pub struct DecoderCache {
    hidden: Array2<f64>,
    qr: Array2<f64>,
    kr: Array2<f64>,
}

/// Gradients with the same layout as [`DecoderParams`].
pub type DecoderGrads = DecoderParams;

pub fn decoder_forward(h: &HiddenSequence, params: &DecoderParams) -> Result<(ScoreMatrix, DecoderCache)> {
    let (q, k) = project_qk(h, params)?;
    let (qr, kr) = if params.rope {
        (rotate_rows(&q, 0.0, 1.0)?, rotate_rows(&k, 0.0, 1.0)?)
    } else {
        (q, k)
    };
    let scale = 1.0 / (params.d2() as f64).sqrt();
    let scores = ScoreMatrix::new(qr.dot(&kr.t()) * scale)?;
    Ok((
        scores,
        DecoderCache {
            hidden: h.vectors.clone(),
            qr,
            kr,
        },
    ))
}

/// Back-propagates `d_scores = dL/dA` through the decoder, accumulating
/// parameter gradients into `grads` and returning `dL/dh`.
pub fn decoder_backward(
    cache: &DecoderCache,
    params: &DecoderParams,
    d_scores: &Array2<f64>,
    grads: &mut DecoderGrads,
) -> Result<Array2<f64>> {
    let scale = 1.0 / (params.d2() as f64).sqrt();
    let d_qr = d_scores.dot(&cache.kr) * scale;
    let d_kr = d_scores.t().dot(&cache.qr) * scale;
    let (d_q, d_k) = if params.rope {
        (rotate_rows(&d_qr, 0.0, -1.0)?, rotate_rows(&d_kr, 0.0, -1.0)?)
    } else {
        (d_qr, d_kr)
    };
    grads.wq += &d_q.t().dot(&cache.hidden);
    grads.bq += &d_q.sum_axis(Axis(0));
    grads.wk += &d_k.t().dot(&cache.hidden);
    grads.bk += &d_k.sum_axis(Axis(0));
    Ok(d_q.dot(&params.wq) + d_k.dot(&params.wk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hidden(rows: usize, cols: usize, seed: u64) -> HiddenSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HiddenSequence::new(Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn zero_weights_give_zero_queries() {
        let p = DecoderParams::zeros(4, 2, true);
        let (q, _) = project_qk(&hidden(3, 4, 1), &p).unwrap();
        assert!(q.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_weights_copy_hidden_vectors() {
        let mut p = DecoderParams::zeros(4, 4, false);
        p.wq = Array2::eye(4);
        let h = hidden(3, 4, 2);
        let (q, _) = project_qk(&h, &p).unwrap();
        assert_eq!(q, h.vectors);
    }

    #[test]
    fn projection_matches_plain_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = DecoderParams::init(5, 4, true, &mut rng).unwrap();
        let mut p = p;
        p.bq = array![0.1, -0.2, 0.3, 0.05];
        let h = hidden(3, 5, 4);
        let (q, _) = project_qk(&h, &p).unwrap();
        for i in 0..3 {
            for r in 0..4 {
                let mut acc = p.bq[r];
                for c in 0..5 {
                    acc += p.wq[[r, c]] * h.vectors[[i, c]];
                }
                assert!((acc - q[[i, r]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let p = DecoderParams::zeros(4, 2, false);
        assert!(matches!(project_qk(&hidden(3, 5, 1), &p), Err(Error::Shape(_))));
    }

    #[test]
    fn odd_d2_with_rope_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(DecoderParams::init(4, 3, true, &mut rng).is_err());
        assert!(DecoderParams::init(4, 3, false, &mut rng).is_ok());
    }

    #[test]
    fn zero_queries_give_zero_scores() {
        let p = DecoderParams::zeros(4, 4, true);
        let z = Array2::zeros((3, 4));
        let s = score_matrix(&z, &z, &p).unwrap();
        assert!(s.scores.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn plain_scores_are_scaled_dot_products() {
        let p = DecoderParams::zeros(2, 4, false);
        let q = array![[1.0, 2.0, 0.0, -1.0], [0.5, 0.0, 1.0, 1.0]];
        let k = array![[2.0, 1.0, 1.0, 0.0], [-1.0, 0.0, 3.0, 2.0]];
        let s = score_matrix(&q, &k, &p).unwrap();
        // q0.k0 = 4, q0.k1 = -3, q1.k0 = 2, q1.k1 = 4.5, divided by sqrt(4)
        let want = array![[2.0, -1.5], [1.0, 2.25]];
        assert_eq!(s.scores, want);
    }

    #[test]
    fn shifted_positions_leave_scores_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = DecoderParams::init(6, 8, true, &mut rng).unwrap();
        let (q, k) = project_qk(&hidden(7, 6, 5), &p).unwrap();
        let a = score_matrix(&q, &k, &p).unwrap();
        let b = score_matrix_with_offset(&q, &k, &p, 13.0).unwrap();
        for (x, y) in a.scores.iter().zip(b.scores.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
