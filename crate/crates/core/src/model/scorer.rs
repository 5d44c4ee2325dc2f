use std::sync::atomic::{AtomicUsize, Ordering};

use super::decoder::{decoder_forward, DecoderParams, ScoreMatrix};
use super::encoder::{Encoder, FeatureTableEncoder, HiddenSequence, ToyEncoder};
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum EncoderBackend {
    Toy(ToyEncoder),
    Pretrained(FeatureTableEncoder),
}

impl Encoder for EncoderBackend {
    fn name(&self) -> &str {
        match self {
            EncoderBackend::Toy(e) => e.name(),
            EncoderBackend::Pretrained(e) => e.name(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            EncoderBackend::Toy(e) => e.dim(),
            EncoderBackend::Pretrained(e) => e.dim(),
        }
    }

    fn max_len(&self) -> usize {
        match self {
            EncoderBackend::Toy(e) => e.max_len(),
            EncoderBackend::Pretrained(e) => e.max_len(),
        }
    }

    fn encode(&self, tokens: &[String]) -> Result<HiddenSequence> {
        match self {
            EncoderBackend::Toy(e) => e.encode(tokens),
            EncoderBackend::Pretrained(e) => e.encode(tokens),
        }
    }
}

/// The evaluation model: an encoder feeding the token-pair decoder.
///
/// Immutable once trained or loaded; `infer_matrix` may be called from many
/// threads at once. Every encoder pass bumps an internal counter.
#[derive(Debug)]
pub struct PairScorer {
    pub(crate) encoder: EncoderBackend,
    pub(crate) decoder: DecoderParams,
    pub(crate) seed: u64,
    pub(crate) epochs_trained: usize,
    encode_calls: AtomicUsize,
}

impl Clone for PairScorer {
    fn clone(&self) -> Self {
        PairScorer {
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
            seed: self.seed,
            epochs_trained: self.epochs_trained,
            encode_calls: AtomicUsize::new(0),
        }
    }
}

impl PairScorer {
    pub fn new(encoder: EncoderBackend, decoder: DecoderParams, seed: u64) -> Result<Self> {
        if encoder.dim() != decoder.d1() {
            return Err(Error::Shape(format!(
                "encoder produces {}-dim vectors, decoder expects {}",
                encoder.dim(),
                decoder.d1()
            )));
        }
        Ok(PairScorer {
            encoder,
            decoder,
            seed,
            epochs_trained: 0,
            encode_calls: AtomicUsize::new(0),
        })
    }

    /// Treats the current parameters as final, e.g. for hand-set decoders.
    pub fn mark_trained(mut self) -> Self {
        self.epochs_trained = self.epochs_trained.max(1);
        self
    }

    pub fn is_trained(&self) -> bool {
        self.epochs_trained > 0
    }

    pub fn encoder(&self) -> &EncoderBackend {
        &self.encoder
    }

    pub fn decoder(&self) -> &DecoderParams {
        &self.decoder
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    /// Number of encoder passes since construction.
    pub fn encode_count(&self) -> usize {
        self.encode_calls.load(Ordering::Relaxed)
    }

    pub fn encode(&self, tokens: &[String]) -> Result<HiddenSequence> {
        self.encode_calls.fetch_add(1, Ordering::Relaxed);
        self.encoder.encode(tokens)
    }

    /// One encoder pass and one decoder pass over the whole sentence.
    pub fn infer_matrix(&self, sentence: &AnnotatedSentence) -> Result<ScoreMatrix> {
        self.infer_tokens(&sentence.tokens)
    }

    pub fn infer_tokens(&self, tokens: &[String]) -> Result<ScoreMatrix> {
        if !self.is_trained() {
            return Err(Error::State("model has not been trained or loaded".into()));
        }
        let hidden = self.encode(tokens)?;
        Ok(decoder_forward(&hidden, &self.decoder)?.0)
    }
}

pub fn infer_matrix(model: &PairScorer, sentence: &AnnotatedSentence) -> Result<ScoreMatrix> {
    model.infer_matrix(sentence)
}
