//! The evaluation model: encoder, token-pair decoder with rotary
//! embeddings, masked BCE loss, training and checkpoints.

mod checkpoint;
mod decoder;
mod encoder;
mod eval;
mod loss;
mod optim;
mod rope;
mod scorer;
mod train;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use decoder::{
    decoder_backward, decoder_forward, project_qk, score_matrix, score_matrix_with_offset, DecoderCache,
    DecoderGrads, DecoderParams, ScoreMatrix,
};
pub use encoder::{
    Encoder, FeatureTableEncoder, HiddenSequence, LayerParams, ToyEncoder, ToyEncoderConfig, ToyParams, Vocab,
    UNK_TOKEN,
};
pub use eval::{evaluate_pairs, PairClassification};
pub use loss::{masked_bce_loss, masked_bce_with_grad, sigmoid, softplus, LossOutput, Reduction};
pub use optim::{AdamW, AdamWConfig};
pub use rope::{frequencies, rope_rotate, ROPE_BASE};
pub use scorer::{infer_matrix, EncoderBackend, PairScorer};
pub use train::{train, EncoderMode, OptimizerKind, PretrainedSpec, TrainConfig, TrainReport};
