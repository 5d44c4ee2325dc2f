use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::decoder::{decoder_backward, decoder_forward, DecoderParams};
use super::encoder::{Encoder, FeatureTableEncoder, ToyEncoder, ToyEncoderConfig};
use super::loss::{masked_bce_with_grad, Reduction};
use super::optim::{AdamW, AdamWConfig};
use super::scorer::{EncoderBackend, PairScorer};
use crate::corpus::LabeledSentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderMode {
    PretrainedAdapter,
    ToyFromScratch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adamw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainedSpec {
    pub name: String,
    pub features: PathBuf,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_max_len() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub encoder_mode: EncoderMode,
    pub optimizer: OptimizerKind,
    pub d2: usize,
    pub rope: bool,
    pub weight_decay: f64,
    pub reduction: Reduction,
    pub toy: ToyEncoderConfig,
    pub pretrained: Option<PretrainedSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 5e-3,
            batch_size: 8,
            seed: 42,
            encoder_mode: EncoderMode::ToyFromScratch,
            optimizer: OptimizerKind::Adamw,
            d2: 64,
            rope: true,
            weight_decay: 0.01,
            reduction: Reduction::Sum,
            toy: ToyEncoderConfig::default(),
            pretrained: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.rope && self.d2 % 2 != 0 {
            return Err(Error::Config(format!("d2 = {} must be even with rotary embedding", self.d2)));
        }
        if self.encoder_mode == EncoderMode::PretrainedAdapter && self.pretrained.is_none() {
            return Err(Error::Config("pretrained-adapter mode needs a [pretrained] section".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss over the whole training set before the first update.
    pub initial_loss: f64,
    /// Running loss accumulated during each epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss over the whole training set after the last update.
    pub final_loss: f64,
    pub sentences: usize,
    pub labeled_cells: usize,
    pub checkpoints: Vec<PathBuf>,
}

/// Trains encoder and decoder jointly (toy mode) or the decoder alone over
/// frozen exported features (pretrained-adapter mode).
///
/// Single-threaded; the same data, config and seed give the same model.
pub fn train(
    dataset: &[LabeledSentence],
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(PairScorer, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let labeled_cells: usize = dataset
        .iter()
        .map(|s| s.labels.count(1) + s.labels.count(-1))
        .sum();
    if labeled_cells == 0 {
        return Err(Error::Validation("training set has no labeled token pairs".into()));
    }
    for s in dataset {
        if s.labels.size() != s.sentence.len() {
            return Err(Error::Shape(format!(
                "labels for `{}` do not match its token count",
                s.sentence.id
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let encoder = match config.encoder_mode {
        EncoderMode::ToyFromScratch => {
            let tokens = dataset
                .iter()
                .flat_map(|s| s.sentence.tokens.iter().map(String::as_str));
            EncoderBackend::Toy(ToyEncoder::init(config.toy, tokens, &mut rng)?)
        }
        EncoderMode::PretrainedAdapter => {
            let spec = config.pretrained.as_ref().expect("validated");
            EncoderBackend::Pretrained(FeatureTableEncoder::from_jsonl(
                &spec.name,
                &spec.features,
                spec.max_len,
            )?)
        }
    };
    let decoder = DecoderParams::init(encoder.dim(), config.d2, config.rope, &mut rng)?;
    let mut model = PairScorer::new(encoder, decoder, config.seed)?;

    let mut trainer = Trainer::new(&model, config);
    let initial_loss = trainer.dataset_loss(&model, dataset)?;
    log::info!("initial loss {initial_loss:.4} over {} sentences", dataset.len());

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut checkpoints = Vec::new();
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut running = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let loss = trainer.step(&mut model, dataset, batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                    loss,
                });
            }
            running += loss;
        }
        model.epochs_trained = epoch;
        log::info!("epoch {epoch}/{}: loss {running:.4}", config.epochs);
        epoch_losses.push(running);
        if let Some(dir) = checkpoint_dir {
            let path = dir.join(format!("epoch-{epoch:03}.json"));
            let features = config.pretrained.as_ref().map(|p| p.features.as_path());
            save_checkpoint(&model, &path, features)?;
            checkpoints.push(path);
        }
    }
    let final_loss = trainer.dataset_loss(&model, dataset)?;
    log::info!("final loss {final_loss:.4}");
    Ok((
        model,
        TrainReport {
            initial_loss,
            epoch_losses,
            final_loss,
            sentences: dataset.len(),
            labeled_cells,
            checkpoints,
        },
    ))
}

struct Trainer {
    reduction: Reduction,
    decoder_opt: AdamW,
    encoder_opt: Option<AdamW>,
}

impl Trainer {
    fn new(model: &PairScorer, config: &TrainConfig) -> Self {
        let opt_cfg = AdamWConfig {
            learning_rate: config.learning_rate,
            weight_decay: config.weight_decay,
            ..AdamWConfig::default()
        };
        let dec_shapes: Vec<usize> = model.decoder.slices().iter().map(|s| s.len()).collect();
        let encoder_opt = match &model.encoder {
            EncoderBackend::Toy(e) => {
                let mut p = e.params.clone();
                let shapes: Vec<usize> = p.slices_mut().iter().map(|s| s.len()).collect();
                Some(AdamW::new(opt_cfg, &shapes))
            }
            EncoderBackend::Pretrained(_) => None,
        };
        Trainer {
            reduction: config.reduction,
            decoder_opt: AdamW::new(opt_cfg, &dec_shapes),
            encoder_opt,
        }
    }

    fn dataset_loss(&self, model: &PairScorer, dataset: &[LabeledSentence]) -> Result<f64> {
        let mut total = 0.0;
        for s in dataset {
            let hidden = model.encoder.encode(&s.sentence.tokens)?;
            let (scores, _) = decoder_forward(&hidden, &model.decoder)?;
            total += masked_bce_with_grad(&scores, &s.labels, self.reduction)?.loss;
        }
        Ok(total)
    }

    /// One optimizer update over `batch`; returns the summed batch loss.
    fn step(&mut self, model: &mut PairScorer, dataset: &[LabeledSentence], batch: &[usize]) -> Result<f64> {
        let d1 = model.decoder.d1();
        let d2 = model.decoder.d2();
        let mut dec_grads = DecoderParams::zeros(d1, d2, model.decoder.rope);
        let mut enc_grads = match &model.encoder {
            EncoderBackend::Toy(e) => Some(e.params.zeros_like()),
            EncoderBackend::Pretrained(_) => None,
        };
        let mut batch_loss = 0.0;
        for &idx in batch {
            let item = &dataset[idx];
            if item.labels.is_unlabeled() {
                continue;
            }
            let (hidden, enc_cache) = match &model.encoder {
                EncoderBackend::Toy(e) => {
                    let (h, c) = e.forward(&item.sentence.tokens)?;
                    (h, Some(c))
                }
                EncoderBackend::Pretrained(e) => (e.encode(&item.sentence.tokens)?, None),
            };
            let (scores, dec_cache) = decoder_forward(&hidden, &model.decoder)?;
            let out = masked_bce_with_grad(&scores, &item.labels, self.reduction)?;
            batch_loss += out.loss;
            let d_hidden = decoder_backward(&dec_cache, &model.decoder, &out.grad, &mut dec_grads)?;
            if let (EncoderBackend::Toy(e), Some(cache), Some(g)) =
                (&model.encoder, enc_cache.as_ref(), enc_grads.as_mut())
            {
                e.backward(cache, &d_hidden, g);
            }
        }
        if !batch_loss.is_finite() {
            return Ok(batch_loss);
        }
        self.decoder_opt.step(
            model.decoder.slices_mut().into_iter().collect(),
            dec_grads.slices_mut().into_iter().collect(),
        );
        if let (EncoderBackend::Toy(e), Some(g), Some(opt)) =
            (&mut model.encoder, enc_grads.as_mut(), self.encoder_opt.as_mut())
        {
            opt.step(e.params.slices_mut(), g.slices_mut());
        }
        Ok(batch_loss)
    }
}
