//! Token encoders.
//!
//! Two backends sit behind [`Encoder`]: a small pre-LayerNorm transformer
//! trained from scratch together with the decoder, and an adapter that serves
//! hidden states exported from an external pretrained encoder.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::tokenize::{CLS_TOKEN, SEP_TOKEN};
use crate::error::{Error, Result};

/// One `d1`-dimensional vector per token.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSequence {
    pub vectors: Array2<f64>,
}

impl HiddenSequence {
    pub fn new(vectors: Array2<f64>) -> Self {
        HiddenSequence { vectors }
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

pub trait Encoder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn max_len(&self) -> usize;
    fn encode(&self, tokens: &[String]) -> Result<HiddenSequence>;
}

pub(crate) fn check_length(tokens: &[String], limit: usize) -> Result<()> {
    if tokens.len() < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 tokens (two boundary tokens and one content token), got {}",
            tokens.len()
        )));
    }
    if tokens.len() > limit {
        return Err(Error::Length {
            len: tokens.len(),
            limit,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Vocabulary

pub const UNK_TOKEN: &str = "[UNK]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Special tokens first, then every distinct token in sorted order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut words: Vec<&str> = tokens.into_iter().collect();
        words.sort_unstable();
        words.dedup();
        let mut index = BTreeMap::new();
        for special in [UNK_TOKEN, CLS_TOKEN, SEP_TOKEN] {
            let next = index.len();
            index.entry(special.to_string()).or_insert(next);
        }
        for w in words {
            let next = index.len();
            index.entry(w.to_string()).or_insert(next);
        }
        Vocab { index }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

// ---------------------------------------------------------------------------
// Toy transformer

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn: usize,
    pub max_len: usize,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        ToyEncoderConfig {
            d_model: 32,
            layers: 2,
            heads: 4,
            ffn: 64,
            max_len: 512,
        }
    }
}

impl ToyEncoderConfig {
    fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a nonzero multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.d_model % 2 != 0 {
            return Err(Error::Config("d_model must be even".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl LayerParams {
    fn init(d: usize, f: usize, rng: &mut impl Rng) -> Self {
        let mut mat = |rows: usize, cols: usize| {
            let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).expect("valid std");
            Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
        };
        LayerParams {
            ln1_g: Array1::ones(d),
            ln1_b: Array1::zeros(d),
            wq: mat(d, d),
            bq: Array1::zeros(d),
            wk: mat(d, d),
            bk: Array1::zeros(d),
            wv: mat(d, d),
            bv: Array1::zeros(d),
            wo: mat(d, d),
            bo: Array1::zeros(d),
            ln2_g: Array1::ones(d),
            ln2_b: Array1::zeros(d),
            w1: mat(f, d),
            b1: Array1::zeros(f),
            w2: mat(d, f),
            b2: Array1::zeros(d),
        }
    }

    fn zeros_like(&self) -> Self {
        let z1 = |a: &Array1<f64>| Array1::zeros(a.len());
        let z2 = |a: &Array2<f64>| Array2::zeros(a.dim());
        LayerParams {
            ln1_g: z1(&self.ln1_g),
            ln1_b: z1(&self.ln1_b),
            wq: z2(&self.wq),
            bq: z1(&self.bq),
            wk: z2(&self.wk),
            bk: z1(&self.bk),
            wv: z2(&self.wv),
            bv: z1(&self.bv),
            wo: z2(&self.wo),
            bo: z1(&self.bo),
            ln2_g: z1(&self.ln2_g),
            ln2_b: z1(&self.ln2_b),
            w1: z2(&self.w1),
            b1: z1(&self.b1),
            w2: z2(&self.w2),
            b2: z1(&self.b2),
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.ln1_g.as_slice_mut().expect("contiguous"),
            self.ln1_b.as_slice_mut().expect("contiguous"),
            self.wq.as_slice_mut().expect("contiguous"),
            self.bq.as_slice_mut().expect("contiguous"),
            self.wk.as_slice_mut().expect("contiguous"),
            self.bk.as_slice_mut().expect("contiguous"),
            self.wv.as_slice_mut().expect("contiguous"),
            self.bv.as_slice_mut().expect("contiguous"),
            self.wo.as_slice_mut().expect("contiguous"),
            self.bo.as_slice_mut().expect("contiguous"),
            self.ln2_g.as_slice_mut().expect("contiguous"),
            self.ln2_b.as_slice_mut().expect("contiguous"),
            self.w1.as_slice_mut().expect("contiguous"),
            self.b1.as_slice_mut().expect("contiguous"),
            self.w2.as_slice_mut().expect("contiguous"),
            self.b2.as_slice_mut().expect("contiguous"),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub embed: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array1<f64>,
    pub lnf_b: Array1<f64>,
}

impl ToyParams {
    pub fn zeros_like(&self) -> Self {
        ToyParams {
            embed: Array2::zeros(self.embed.dim()),
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
            lnf_g: Array1::zeros(self.lnf_g.len()),
            lnf_b: Array1::zeros(self.lnf_b.len()),
        }
    }

    /// Every tensor as a flat slice, in a fixed order shared with gradients.
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embed.as_slice_mut().expect("contiguous")];
        for l in &mut self.layers {
            out.extend(l.slices_mut());
        }
        out.push(self.lnf_g.as_slice_mut().expect("contiguous"));
        out.push(self.lnf_b.as_slice_mut().expect("contiguous"));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoder {
    pub config: ToyEncoderConfig,
    pub vocab: Vocab,
    pub params: ToyParams,
}

const LN_EPS: f64 = 1e-5;

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (i, mut row) in xhat.axis_iter_mut(Axis(0)).enumerate() {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row *= inv;
        inv_std[i] = inv;
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    g: &Array1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.dim());
    for i in 0..dy.nrows() {
        let dh = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_dh = dh.sum() / d;
        let mean_dh_xh = dh.dot(&xh) / d;
        let inv = cache.inv_std[i];
        for c in 0..dy.ncols() {
            dx[[i, c]] = inv * (dh[c] - mean_dh - xh[c] * mean_dh_xh);
        }
    }
    dx
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn sinusoid(n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |(i, c)| {
        let m = (c / 2) as f64;
        let angle = i as f64 / 10_000f64.powf(2.0 * m / d as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

struct LayerCache {
    ln1: LnCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    o: Array2<f64>,
    ln2: LnCache,
    b: Array2<f64>,
    u: Array2<f64>,
    f: Array2<f64>,
}

pub(crate) struct EncoderCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
}

impl ToyEncoder {
    /// Fresh encoder over a vocabulary built from `corpus_tokens`.
    pub fn init<'a>(
        config: ToyEncoderConfig,
        corpus_tokens: impl IntoIterator<Item = &'a str>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        let vocab = Vocab::build(corpus_tokens);
        let d = config.d_model;
        let normal = Normal::new(0.0, 1.0).expect("valid std");
        let embed = Array2::from_shape_simple_fn((vocab.len(), d), || normal.sample(rng));
        let layers = (0..config.layers)
            .map(|_| LayerParams::init(d, config.ffn, rng))
            .collect();
        Ok(ToyEncoder {
            config,
            vocab,
            params: ToyParams {
                embed,
                layers,
                lnf_g: Array1::ones(d),
                lnf_b: Array1::zeros(d),
            },
        })
    }

    pub(crate) fn forward(&self, tokens: &[String]) -> Result<(HiddenSequence, EncoderCache)> {
        check_length(tokens, self.config.max_len)?;
        let ids = self.vocab.ids(tokens);
        let n = ids.len();
        let d = self.config.d_model;
        let heads = self.config.heads;
        let hd = d / heads;
        let scale = 1.0 / (hd as f64).sqrt();

        let mut x = sinusoid(n, d);
        for (i, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            row += &self.params.embed.row(id);
        }

        let mut caches = Vec::with_capacity(self.params.layers.len());
        for p in &self.params.layers {
            let (a, ln1) = layer_norm(&x, &p.ln1_g, &p.ln1_b);
            let q = a.dot(&p.wq.t()) + &p.bq;
            let k = a.dot(&p.wk.t()) + &p.bk;
            let v = a.dot(&p.wv.t()) + &p.bv;
            let mut o = Array2::zeros((n, d));
            let mut probs = Vec::with_capacity(heads);
            for h in 0..heads {
                let cols = s![.., h * hd..(h + 1) * hd];
                let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                softmax_rows(&mut scores);
                o.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
                probs.push(scores);
            }
            let attn = o.dot(&p.wo.t()) + &p.bo;
            let x1 = &x + &attn;
            let (b, ln2) = layer_norm(&x1, &p.ln2_g, &p.ln2_b);
            let u = b.dot(&p.w1.t()) + &p.b1;
            let f = u.mapv(|z| z.max(0.0));
            let ffn = f.dot(&p.w2.t()) + &p.b2;
            x = x1 + ffn;
            caches.push(LayerCache {
                ln1,
                a,
                q,
                k,
                v,
                probs,
                o,
                ln2,
                b,
                u,
                f,
            });
        }
        let (h, lnf) = layer_norm(&x, &self.params.lnf_g, &self.params.lnf_b);
        Ok((
            HiddenSequence::new(h),
            EncoderCache {
                ids,
                layers: caches,
                lnf,
            },
        ))
    }

    /// Accumulates parameter gradients for `dL/dh` into `grads`.
    pub(crate) fn backward(&self, cache: &EncoderCache, d_hidden: &Array2<f64>, grads: &mut ToyParams) {
        let d = self.config.d_model;
        let heads = self.config.heads;
        let hd = d / heads;
        let scale = 1.0 / (hd as f64).sqrt();

        let mut dx = layer_norm_backward(
            d_hidden,
            &cache.lnf,
            &self.params.lnf_g,
            &mut grads.lnf_g,
            &mut grads.lnf_b,
        );
        for (li, p) in self.params.layers.iter().enumerate().rev() {
            let c = &cache.layers[li];
            let g = &mut grads.layers[li];

            // x_out = x1 + W2 relu(W1 LN2(x1) + b1) + b2
            let d_ffn = &dx;
            g.w2 += &d_ffn.t().dot(&c.f);
            g.b2 += &d_ffn.sum_axis(Axis(0));
            let mut du = d_ffn.dot(&p.w2);
            du.zip_mut_with(&c.u, |g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
            g.w1 += &du.t().dot(&c.b);
            g.b1 += &du.sum_axis(Axis(0));
            let db = du.dot(&p.w1);
            let dx1 = &dx + &layer_norm_backward(&db, &c.ln2, &p.ln2_g, &mut g.ln2_g, &mut g.ln2_b);

            // x1 = x + Wo attn(LN1(x)) + bo
            g.wo += &dx1.t().dot(&c.o);
            g.bo += &dx1.sum_axis(Axis(0));
            let d_o = dx1.dot(&p.wo);
            let n = d_o.nrows();
            let mut dq = Array2::zeros((n, d));
            let mut dk = Array2::zeros((n, d));
            let mut dv = Array2::zeros((n, d));
            for h in 0..heads {
                let cols = s![.., h * hd..(h + 1) * hd];
                let probs = &c.probs[h];
                let d_oh = d_o.slice(cols);
                let dp = d_oh.dot(&c.v.slice(cols).t());
                dv.slice_mut(cols).assign(&probs.t().dot(&d_oh));
                let mut ds = dp;
                for i in 0..n {
                    let dot: f64 = ds.row(i).dot(&probs.row(i));
                    for j in 0..n {
                        ds[[i, j]] = probs[[i, j]] * (ds[[i, j]] - dot);
                    }
                }
                dq.slice_mut(cols).assign(&(ds.dot(&c.k.slice(cols)) * scale));
                dk.slice_mut(cols).assign(&(ds.t().dot(&c.q.slice(cols)) * scale));
            }
            g.wq += &dq.t().dot(&c.a);
            g.bq += &dq.sum_axis(Axis(0));
            g.wk += &dk.t().dot(&c.a);
            g.bk += &dk.sum_axis(Axis(0));
            g.wv += &dv.t().dot(&c.a);
            g.bv += &dv.sum_axis(Axis(0));
            let da = dq.dot(&p.wq) + dk.dot(&p.wk) + dv.dot(&p.wv);
            dx = dx1 + layer_norm_backward(&da, &c.ln1, &p.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
        }
        for (i, &id) in cache.ids.iter().enumerate() {
            let mut row = grads.embed.row_mut(id);
            row += &dx.row(i);
        }
    }
}

impl Encoder for ToyEncoder {
    fn name(&self) -> &str {
        "toy-transformer"
    }

    fn dim(&self) -> usize {
        self.config.d_model
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn encode(&self, tokens: &[String]) -> Result<HiddenSequence> {
        Ok(self.forward(tokens)?.0)
    }
}

// ---------------------------------------------------------------------------
// Pretrained adapter

/// Serves hidden states exported from an external pretrained encoder.
///
/// The export is JSONL with one `{"tokens": [...], "vectors": [[...], ...]}`
/// record per sentence, tokens including the boundary tokens. Lookups are by
/// exact token sequence; the adapter itself has no trainable parameters.
#[derive(Debug, Clone)]
pub struct FeatureTableEncoder {
    name: String,
    dim: usize,
    max_len: usize,
    table: HashMap<Vec<String>, Array2<f64>>,
}

#[derive(Deserialize)]
struct FeatureRecord {
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl FeatureTableEncoder {
    pub fn from_jsonl(name: &str, path: &Path, max_len: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = HashMap::new();
        let mut dim = None;
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FeatureRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let width = rec.vectors.first().map_or(0, Vec::len);
            if rec.vectors.len() != rec.tokens.len() || rec.vectors.iter().any(|v| v.len() != width) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "one equal-width vector per token required".into(),
                });
            }
            if *dim.get_or_insert(width) != width {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("vector width {width} differs from earlier records"),
                });
            }
            let flat: Vec<f64> = rec.vectors.into_iter().flatten().collect();
            let m = Array2::from_shape_vec((rec.tokens.len(), width), flat)
                .map_err(|e| Error::Shape(e.to_string()))?;
            table.insert(rec.tokens, m);
        }
        Ok(FeatureTableEncoder {
            name: name.to_string(),
            dim: dim.unwrap_or(0),
            max_len,
            table,
        })
    }

    pub fn from_table(name: &str, max_len: usize, entries: Vec<(Vec<String>, Array2<f64>)>) -> Result<Self> {
        let dim = entries.first().map_or(0, |(_, m)| m.ncols());
        if entries.iter().any(|(t, m)| m.ncols() != dim || m.nrows() != t.len()) {
            return Err(Error::Shape("feature table entries disagree in shape".into()));
        }
        Ok(FeatureTableEncoder {
            name: name.to_string(),
            dim,
            max_len,
            table: entries.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Encoder for FeatureTableEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn encode(&self, tokens: &[String]) -> Result<HiddenSequence> {
        check_length(tokens, self.max_len)?;
        self.table
            .get(tokens)
            .map(|m| HiddenSequence::new(m.clone()))
            .ok_or_else(|| {
                Error::Lookup(format!(
                    "no exported hidden states for a {}-token sentence starting `{}`",
                    tokens.len(),
                    tokens.get(1).map_or("", String::as_str)
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn toy(d: usize, seed: u64) -> ToyEncoder {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ToyEncoderConfig {
            d_model: d,
            layers: 2,
            heads: 2,
            ffn: 2 * d,
            max_len: 16,
        };
        ToyEncoder::init(cfg, ["a", "b", "c", "d"], &mut rng).unwrap()
    }

    #[test]
    fn shapes_and_determinism() {
        let enc = toy(32, 1);
        let t = toks(&["[CLS]", "a", "b", "c", "[SEP]"]);
        let h1 = enc.encode(&t).unwrap();
        let h2 = enc.encode(&t).unwrap();
        assert_eq!((h1.len(), h1.dim()), (5, 32));
        assert_eq!(h1, h2);
        assert!(h1.vectors.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn length_limits() {
        let enc = toy(8, 1);
        let long = vec!["a".to_string(); 17];
        assert!(matches!(enc.encode(&long), Err(Error::Length { limit: 16, .. })));
        assert!(enc.encode(&toks(&["[CLS]", "[SEP]"])).is_err());
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let enc = toy(8, 1);
        assert_eq!(enc.vocab.id("zzz"), 0);
        assert_ne!(enc.vocab.id("a"), 0);
    }

    /// Loss = sum(h * w) for a fixed random w, so dL/dh = w.
    #[test]
    fn backward_matches_finite_differences() {
        let mut enc = toy(8, 4);
        let t = toks(&["[CLS]", "a", "d", "b", "[SEP]"]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = Array2::from_shape_simple_fn((5, 8), || rng.gen_range(-1.0..1.0));
        let loss = |e: &ToyEncoder| (&e.encode(&t).unwrap().vectors * &w).sum();

        let (_, cache) = enc.forward(&t).unwrap();
        let mut grads = enc.params.zeros_like();
        enc.backward(&cache, &w, &mut grads);
        let analytic: Vec<Vec<f64>> = grads.slices_mut().iter().map(|s| s.to_vec()).collect();

        let step = 1e-5;
        for (ti, grad) in analytic.iter().enumerate() {
            let len = grad.len();
            for idx in (0..len).step_by((len / 7).max(1)) {
                let orig = enc.params.slices_mut()[ti][idx];
                enc.params.slices_mut()[ti][idx] = orig + step;
                let up = loss(&enc);
                enc.params.slices_mut()[ti][idx] = orig - step;
                let down = loss(&enc);
                enc.params.slices_mut()[ti][idx] = orig;
                let numeric = (up - down) / (2.0 * step);
                let a = grad[idx];
                let err = (a - numeric).abs() / (1.0 + a.abs().max(numeric.abs()));
                assert!(err < 1e-6, "tensor {ti} idx {idx}: analytic {a} numeric {numeric}");
            }
        }
    }

    #[test]
    fn feature_table_lookup() {
        let t = toks(&["[CLS]", "x", "[SEP]"]);
        let enc = FeatureTableEncoder::from_table("bert", 8, vec![(t.clone(), Array2::ones((3, 4)))]).unwrap();
        assert_eq!(enc.encode(&t).unwrap().dim(), 4);
        assert!(matches!(
            enc.encode(&toks(&["[CLS]", "y", "[SEP]"])),
            Err(Error::Lookup(_))
        ));
    }
}
