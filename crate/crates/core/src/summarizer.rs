//! Attentional pointer-generator: a BiLSTM encoder, an LSTM decoder, and an
//! output distribution mixing vocabulary generation with copying from the
//! source through the attention weights.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bottom_up::{
    copy_supervision_loss, gold_alignment, joint_distribution, multitask_loss, resolve_hard_mask, CopyWeights,
    MaskConfig, TrainMode,
};
use crate::corpus::{ExamplePair, Token, Vocabulary, BOS, EOS, UNK};
use crate::error::{Error, Result};
use crate::selector::{selector_loss, Selector, SelectorConfig};
use crate::tensor::{
    clip_global_norm, lstm_cell_forward, Adagrad, BiLstm, Grads, Graph, Linear, LrSchedule, LstmParams, ParamId,
    ParamStore, Real, Var,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionScore {
    /// `h_dec · W · h_enc`
    #[default]
    Bilinear,
    /// `h_dec · h_enc`
    Dot,
    /// `v · tanh(W_e h_enc + W_d h_dec + b)`
    Additive,
}

impl fmt::Display for AttentionScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bilinear => "bilinear",
            Self::Dot => "dot",
            Self::Additive => "additive",
        })
    }
}

impl FromStr for AttentionScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" | "general" => Ok(Self::Bilinear),
            "dot" => Ok(Self::Dot),
            "additive" => Ok(Self::Additive),
            _ => Err(Error::InvalidArgument(format!("unknown attention score {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizerConfig {
    pub emb_dim: usize,
    /// Encoder hidden size per direction.
    pub enc_hidden: usize,
    /// Must equal `2 * enc_hidden`.
    pub dec_hidden: usize,
    pub attention: AttentionScore,
}

impl Default for SummarizerConfig {
    fn default() -> Self {
        Self {
            emb_dim: 32,
            enc_hidden: 32,
            dec_hidden: 64,
            attention: AttentionScore::Bilinear,
        }
    }
}

impl SummarizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.emb_dim == 0 || self.enc_hidden == 0 {
            return Err(Error::Config("summarizer dimensions must be positive".into()));
        }
        if self.dec_hidden != 2 * self.enc_hidden {
            return Err(Error::Config(format!(
                "decoder hidden ({}) must equal twice the encoder hidden ({})",
                self.dec_hidden, self.enc_hidden
            )));
        }
        Ok(())
    }
}

/// Source and target mapped into the per-example extended vocabulary, where
/// source words outside the base vocabulary get ids `V, V+1, …` by first
/// appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedVocabExample {
    pub vocab_size: usize,
    /// Base-vocabulary ids (out-of-vocabulary words map to UNK).
    pub source_ids: Vec<usize>,
    /// Extended id of every source position.
    pub ext_ids: Vec<usize>,
    /// Words behind the extended ids, in id order.
    pub oov: Vec<Token>,
    /// Target in extended ids; words in neither vocabulary map to UNK.
    pub target_ids: Vec<usize>,
}

impl ExtendedVocabExample {
    pub fn new(vocab: &Vocabulary, source: &[Token], target: &[Token]) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::EmptyInput("source"));
        }
        let v = vocab.len();
        let mut oov: Vec<Token> = Vec::new();
        let mut source_ids = Vec::with_capacity(source.len());
        let mut ext_ids = Vec::with_capacity(source.len());
        for t in source {
            match vocab.get(t) {
                Some(id) => {
                    source_ids.push(id);
                    ext_ids.push(id);
                }
                None => {
                    let k = oov.iter().position(|o| o == t).unwrap_or_else(|| {
                        oov.push(t.clone());
                        oov.len() - 1
                    });
                    source_ids.push(UNK);
                    ext_ids.push(v + k);
                }
            }
        }
        let target_ids = target
            .iter()
            .map(|t| {
                vocab
                    .get(t)
                    .or_else(|| oov.iter().position(|o| o == t).map(|k| v + k))
                    .unwrap_or(UNK)
            })
            .collect();
        Ok(Self {
            vocab_size: v,
            source_ids,
            ext_ids,
            oov,
            target_ids,
        })
    }

    pub fn source_len(&self) -> usize {
        self.source_ids.len()
    }

    pub fn ext_size(&self) -> usize {
        self.vocab_size + self.oov.len()
    }

    /// Extended id → source positions holding it.
    pub fn occurrences(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &id) in self.ext_ids.iter().enumerate() {
            map.entry(id).or_default().push(i);
        }
        map
    }

    pub fn token<'a>(&'a self, vocab: &'a Vocabulary, id: usize) -> &'a str {
        if id >= self.vocab_size {
            self.oov.get(id - self.vocab_size).map_or(vocab.token(UNK), |t| t.as_str())
        } else {
            vocab.token(id)
        }
    }

    /// Embedding row for a (possibly extended) id fed back into the decoder.
    pub fn input_id(&self, id: usize) -> usize {
        if id >= self.vocab_size {
            UNK
        } else {
            id
        }
    }
}

/// A training/evaluation example with everything the loss variants need.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub id: String,
    pub source: Vec<Token>,
    pub target: Vec<Token>,
    pub ext: ExtendedVocabExample,
    pub labels: Vec<u8>,
    /// Aligned source positions per output step (the final EOS step is `None`).
    pub gold: Vec<Option<Vec<usize>>>,
}

impl PreparedExample {
    pub fn new(vocab: &Vocabulary, pair: &ExamplePair) -> Result<Self> {
        let source = pair.source();
        let target = pair.target();
        let labels = match &pair.copy_labels {
            Some(l) => l.clone(),
            None => crate::corpus::align_copy_labels(&source, &target),
        };
        let mut gold = gold_alignment(&source, &target, &labels)?;
        gold.push(None);
        Ok(Self {
            id: pair.id.clone(),
            ext: ExtendedVocabExample::new(vocab, &source, &target)?,
            source,
            target,
            labels,
            gold,
        })
    }
}

#[derive(Debug, Clone)]
enum AttentionParams {
    Bilinear(ParamId),
    Dot,
    Additive { enc: Linear, dec: Linear, v: ParamId },
}

/// Encoder outputs shared by every decoder step.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// `[n, 2 * enc_hidden]`
    pub states: Var,
    /// Precomputed attention keys.
    keys: Var,
    pub h0: Var,
    pub c0: Var,
}

impl Encoded {
    /// Reassembles encoder outputs, e.g. from cached values placed on a new graph.
    pub fn from_parts(states: Var, keys: Var, h0: Var, c0: Var) -> Self {
        Self { states, keys, h0, c0 }
    }

    pub fn keys(&self) -> Var {
        self.keys
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecoderStep {
    pub h: Var,
    pub c: Var,
    /// `[1, n]`
    pub attention: Var,
    pub context: Var,
    /// `[1, V]`
    pub generation: Var,
    /// `p(copy)`, a single value.
    pub switch: Var,
    /// `[1, ext_size]`
    pub joint: Var,
}

#[derive(Debug, Clone)]
pub struct PointerGenerator {
    pub config: SummarizerConfig,
    pub vocab_size: usize,
    src_embed: ParamId,
    tgt_embed: ParamId,
    encoder: BiLstm,
    bridge_h: Linear,
    bridge_c: Linear,
    decoder: LstmParams,
    attention: AttentionParams,
    output: Linear,
    switch: Linear,
    /// Selection head over encoder states (multi-task mode).
    tag_head: Option<Linear>,
}

impl PointerGenerator {
    pub fn new<T: Real, R: Rng>(
        config: SummarizerConfig,
        vocab_size: usize,
        with_tag_head: bool,
        store: &mut ParamStore<T>,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let (e, h, d) = (config.emb_dim, config.enc_hidden, config.dec_hidden);
        let src_embed = store.add_uniform(&format!("{prefix}src_embed"), &[vocab_size, e], 0.1, rng)?;
        let tgt_embed = store.add_uniform(&format!("{prefix}tgt_embed"), &[vocab_size, e], 0.1, rng)?;
        let encoder = BiLstm::new(store, &format!("{prefix}encoder"), e, h, rng)?;
        let bridge_h = Linear::new(store, &format!("{prefix}bridge_h"), 2 * h, d, true, rng)?;
        let bridge_c = Linear::new(store, &format!("{prefix}bridge_c"), 2 * h, d, true, rng)?;
        let decoder = LstmParams::new(store, &format!("{prefix}decoder"), e, d, rng)?;
        let attention = match config.attention {
            AttentionScore::Bilinear => {
                AttentionParams::Bilinear(store.add_uniform(&format!("{prefix}attn.weight"), &[d, 2 * h], 0.1, rng)?)
            }
            AttentionScore::Dot => AttentionParams::Dot,
            AttentionScore::Additive => AttentionParams::Additive {
                enc: Linear::new(store, &format!("{prefix}attn.enc"), 2 * h, d, false, rng)?,
                dec: Linear::new(store, &format!("{prefix}attn.dec"), d, d, true, rng)?,
                v: store.add_uniform(&format!("{prefix}attn.v"), &[d, 1], 0.1, rng)?,
            },
        };
        let output = Linear::new(store, &format!("{prefix}output"), d + 2 * h, vocab_size, true, rng)?;
        let switch = Linear::new(store, &format!("{prefix}switch"), d + 2 * h + e, 1, true, rng)?;
        let tag_head = if with_tag_head {
            Some(Linear::new(store, &format!("{prefix}tag_head"), 2 * h, 1, true, rng)?)
        } else {
            None
        };
        Ok(Self {
            config,
            vocab_size,
            src_embed,
            tgt_embed,
            encoder,
            bridge_h,
            bridge_c,
            decoder,
            attention,
            output,
            switch,
            tag_head,
        })
    }

    pub fn has_tag_head(&self) -> bool {
        self.tag_head.is_some()
    }

    pub fn encode<T: Real>(&self, g: &mut Graph<'_, T>, ex: &ExtendedVocabExample) -> Result<Encoded> {
        if ex.source_ids.is_empty() {
            return Err(Error::EmptyInput("source"));
        }
        let table = g.param(self.src_embed);
        let emb = g.gather(table, &ex.source_ids)?;
        let bi = self.encoder.run(g, emb)?;
        let fh = g.concat_cols(&[bi.forward.final_h, bi.backward.final_h])?;
        let fc = g.concat_cols(&[bi.forward.final_c, bi.backward.final_c])?;
        let h0 = self.bridge_h.forward(g, fh)?;
        let c0 = self.bridge_c.forward(g, fc)?;
        let states = bi.outputs;
        let keys = match &self.attention {
            AttentionParams::Bilinear(w) => {
                let w = g.param(*w);
                let st = g.transpose(states)?;
                g.matmul(w, st)?
            }
            AttentionParams::Dot => g.transpose(states)?,
            AttentionParams::Additive { enc, .. } => enc.forward(g, states)?,
        };
        Ok(Encoded { states, keys, h0, c0 })
    }

    /// Selection probabilities from the multi-task head, `[n, 1]`.
    pub fn tag_probabilities<T: Real>(&self, g: &mut Graph<'_, T>, enc: &Encoded) -> Result<Var> {
        let head = self
            .tag_head
            .ok_or_else(|| Error::InvalidArgument("model has no selection head".into()))?;
        let logits = head.forward(g, enc.states)?;
        Ok(g.sigmoid(logits))
    }

    fn scores<T: Real>(&self, g: &mut Graph<'_, T>, enc: &Encoded, h: Var) -> Result<Var> {
        match &self.attention {
            AttentionParams::Bilinear(_) | AttentionParams::Dot => g.matmul(h, enc.keys),
            AttentionParams::Additive { dec, v, .. } => {
                let hd = dec.forward(g, h)?;
                let pre = g.add_row(enc.keys, hd)?;
                let act = g.tanh(pre);
                let v = g.param(*v);
                let col = g.matmul(act, v)?;
                g.transpose(col)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn decode_step<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        enc: &Encoded,
        ex: &ExtendedVocabExample,
        prev: usize,
        h: Var,
        c: Var,
        weights: &CopyWeights,
    ) -> Result<DecoderStep> {
        let table = g.param(self.tgt_embed);
        let emb = g.gather(table, &[ex.input_id(prev)])?;
        let (h, c) = lstm_cell_forward(g, emb, h, c, &self.decoder)?;
        let scores = self.scores(g, enc, h)?;
        let attention = g.softmax(scores)?;
        let context = g.matmul(attention, enc.states)?;
        let hc = g.concat_cols(&[h, context])?;
        let logits = self.output.forward(g, hc)?;
        let generation = g.softmax(logits)?;
        let features = g.concat_cols(&[h, context, emb])?;
        let z = self.switch.forward(g, features)?;
        let switch = g.sigmoid(z);
        let joint = joint_distribution(g, attention, switch, generation, &ex.ext_ids, ex.ext_size(), weights)?;
        Ok(DecoderStep {
            h,
            c,
            attention,
            context,
            generation,
            switch,
            joint,
        })
    }

    /// Teacher-forced mean negative log-likelihood of `target + EOS`.
    pub fn sequence_nll<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        ex: &ExtendedVocabExample,
        weights: &CopyWeights,
    ) -> Result<SequenceOutput> {
        let enc = self.encode(g, ex)?;
        self.sequence_nll_from(g, &enc, ex, weights)
    }

    pub fn sequence_nll_from<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        enc: &Encoded,
        ex: &ExtendedVocabExample,
        weights: &CopyWeights,
    ) -> Result<SequenceOutput> {
        let (mut h, mut c) = (enc.h0, enc.c0);
        let mut prev = BOS;
        let mut total: Option<Var> = None;
        let mut attention = Vec::with_capacity(ex.target_ids.len() + 1);
        for &gold in ex.target_ids.iter().chain(std::iter::once(&EOS)) {
            let step = self.decode_step(g, enc, ex, prev, h, c, weights)?;
            let p = g.pick(step.joint, gold)?;
            let p = g.clamp(p, 1e-12, 1.0);
            let lp = g.ln(p);
            total = Some(match total {
                Some(t) => g.add(t, lp)?,
                None => lp,
            });
            attention.push(step.attention);
            h = step.h;
            c = step.c;
            prev = gold;
        }
        let steps = attention.len();
        let loss = g.scale(total.expect("at least the EOS step"), -1.0 / steps as f64);
        Ok(SequenceOutput {
            loss,
            attention,
            encoded: *enc,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    /// Mean per-step NLL.
    pub loss: Var,
    pub attention: Vec<Var>,
    pub encoded: Encoded,
}

fn verify_layout<T: Real>(scratch: &ParamStore<T>, store: &ParamStore<T>) -> Result<()> {
    for (id, entry) in scratch.iter() {
        let found = store.id(&entry.name)?;
        if found != id || store.value(found).shape() != entry.value.shape() {
            return Err(Error::Config(format!("checkpoint layout mismatch at {}", entry.name)));
        }
    }
    Ok(())
}

/// The pointer-generator plus whatever the training mode attaches to it.
#[derive(Debug, Clone)]
pub struct Summarizer {
    pub pg: PointerGenerator,
    pub mode: TrainMode,
    /// Jointly trained selector (DiffMask).
    pub selector: Option<Selector>,
}

pub const PG_PREFIX: &str = "pg.";
pub const SELECTOR_PREFIX: &str = "sel.";

impl Summarizer {
    pub fn new<T: Real, R: Rng>(
        config: SummarizerConfig,
        selector_config: SelectorConfig,
        mode: TrainMode,
        vocab: &Vocabulary,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Result<Self> {
        let pg = PointerGenerator::new(config, vocab.len(), mode == TrainMode::MultiTask, store, PG_PREFIX, rng)?;
        let selector = if mode == TrainMode::DiffMask {
            Some(Selector::new(selector_config, vocab, None, store, SELECTOR_PREFIX, rng)?)
        } else {
            None
        };
        Ok(Self { pg, mode, selector })
    }

    /// Rebinds to parameters loaded from a checkpoint.
    pub fn bind<T: Real>(
        config: SummarizerConfig,
        selector_config: SelectorConfig,
        mode: TrainMode,
        vocab_size: usize,
        store: &ParamStore<T>,
    ) -> Result<Self> {
        let mut scratch = ParamStore::<T>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pg = PointerGenerator::new(config, vocab_size, mode == TrainMode::MultiTask, &mut scratch, PG_PREFIX, &mut rng)?;
        verify_layout(&scratch, store)?;
        let selector = if mode == TrainMode::DiffMask {
            Some(Selector::bind(selector_config, vocab_size, store, SELECTOR_PREFIX)?)
        } else {
            None
        };
        Ok(Self { pg, mode, selector })
    }

    /// Copy weights used during training for this mode.
    fn training_weights<T: Real>(&self, g: &mut Graph<'_, T>, ex: &PreparedExample) -> Result<(CopyWeights, Option<Var>)> {
        match &self.selector {
            Some(sel) if self.mode == TrainMode::DiffMask => {
                let q = sel.forward::<T, ChaCha8Rng>(g, &ex.ext.source_ids, None)?;
                let row = g.transpose(q)?;
                Ok((CopyWeights::Soft(row), Some(q)))
            }
            _ => Ok((CopyWeights::Identity, None)),
        }
    }

    /// Training objective for one example: `(total, NLL part)`.
    pub fn loss<T: Real>(&self, g: &mut Graph<'_, T>, ex: &PreparedExample, aux_weight: f64) -> Result<(Var, Var)> {
        let (weights, q) = self.training_weights(g, ex)?;
        let out = self.pg.sequence_nll(g, &ex.ext, &weights)?;
        let total = match self.mode {
            TrainMode::Baseline => out.loss,
            TrainMode::MaskOnly => {
                let sup = copy_supervision_loss(g, &out.attention, &ex.gold)?;
                match sup.loss {
                    Some(aux) => {
                        let aux = g.scale(aux, 1.0 / out.attention.len() as f64);
                        multitask_loss(g, out.loss, aux, aux_weight)?
                    }
                    None => out.loss,
                }
            }
            TrainMode::MultiTask => {
                let q = self.pg.tag_probabilities(g, &out.encoded)?;
                let tag = selector_loss(g, q, &ex.labels)?;
                multitask_loss(g, out.loss, tag, aux_weight)?
            }
            TrainMode::DiffMask => {
                let q = q.ok_or_else(|| Error::InvalidArgument("diffmask model has no selector".into()))?;
                let tag = selector_loss(g, q, &ex.labels)?;
                multitask_loss(g, out.loss, tag, aux_weight)?
            }
        };
        Ok((total, out.loss))
    }

    /// Mean per-step NLL under the mode's training-time copy weights.
    pub fn nll<T: Real>(&self, store: &ParamStore<T>, ex: &PreparedExample) -> Result<f64> {
        let mut g = Graph::with_params(store);
        let (weights, _) = self.training_weights(&mut g, ex)?;
        let out = self.pg.sequence_nll(&mut g, &ex.ext, &weights)?;
        Ok(g.scalar(out.loss)?.as_f64())
    }

    /// Copy weights for decoding. DiffMask always applies its own soft mask;
    /// multi-task applies a hard mask from its selection head; the other
    /// modes apply a hard mask only when external probabilities are given.
    pub fn inference_weights<T: Real>(
        &self,
        store: &ParamStore<T>,
        ex: &ExtendedVocabExample,
        mask: Option<&MaskConfig>,
        external_q: Option<&[f64]>,
    ) -> Result<(CopyWeights, Vec<String>)> {
        let mut warnings = Vec::new();
        let weights = match (self.mode, &self.selector) {
            (TrainMode::DiffMask, Some(sel)) => CopyWeights::Scale(sel.predict(store, &ex.source_ids)?.into_inner()),
            (TrainMode::MultiTask, _) if external_q.is_none() => {
                let mut g = Graph::with_params(store);
                let enc = self.pg.encode(&mut g, ex)?;
                let q = self.pg.tag_probabilities(&mut g, &enc)?;
                let q = g.value(q).to_f64_vec();
                let cfg = mask.copied().unwrap_or_default();
                let (w, warn) = resolve_hard_mask(&q, &cfg);
                warnings.extend(warn);
                w
            }
            _ => match (mask, external_q) {
                (Some(cfg), Some(q)) => {
                    if q.len() != ex.source_len() {
                        return Err(Error::LengthMismatch {
                            context: "selection probabilities",
                            left: q.len(),
                            right: ex.source_len(),
                        });
                    }
                    let (w, warn) = resolve_hard_mask(q, cfg);
                    warnings.extend(warn);
                    w
                }
                _ => CopyWeights::Identity,
            },
        };
        Ok((weights, warnings))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizerTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub initial_accumulator: f64,
    pub max_grad_norm: f64,
    /// Weight of the auxiliary loss in mask-only, multi-task and diffmask modes.
    pub aux_weight: f64,
    /// Halve the rate once validation perplexity stops decreasing; off keeps it constant.
    pub lr_halving: bool,
    pub seed: u64,
}

impl Default for SummarizerTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            lr: 0.15,
            initial_accumulator: 0.1,
            max_grad_norm: 2.0,
            aux_weight: 1.0,
            lr_halving: true,
            seed: 1,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_ppl: f64,
    pub lr: f64,
}

/// `exp` of the mean per-step NLL over `data`.
pub fn perplexity<T: Real>(model: &Summarizer, store: &ParamStore<T>, data: &[PreparedExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut steps = 0usize;
    for ex in data {
        let n = ex.ext.target_ids.len() + 1;
        total += model.nll(store, ex)? * n as f64;
        steps += n;
    }
    Ok((total / steps as f64).exp())
}

/// Adagrad with global-norm clipping and the halving schedule. When
/// `validation` is empty, training perplexity drives the schedule.
pub fn train_summarizer(
    model: &Summarizer,
    store: &mut ParamStore<f32>,
    train: &[PreparedExample],
    validation: &[PreparedExample],
    config: &SummarizerTrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut logs = Vec::new();
    if config.epochs == 0 {
        return Ok(logs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adagrad::new(store, config.lr, config.initial_accumulator)?;
    let mut schedule = LrSchedule::new(config.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = config.batch_size.max(1);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut nll_sum = 0.0;
        for chunk in order.chunks(batch) {
            let mut grads = Grads::for_store(store);
            for &i in chunk {
                let mut g = Graph::with_params(&*store);
                let (total, nll) = model.loss(&mut g, &train[i], config.aux_weight)?;
                nll_sum += g.scalar(nll)? as f64;
                g.backward(total, &mut grads)?;
            }
            grads.scale(1.0 / chunk.len() as f32);
            if config.max_grad_norm > 0.0 {
                clip_global_norm(&mut grads, config.max_grad_norm);
            }
            opt.step(store, &grads)?;
        }
        let train_nll = nll_sum / train.len() as f64;
        let val_ppl = if validation.is_empty() {
            train_nll.exp()
        } else {
            perplexity(model, store, validation)?
        };
        let lr = if config.lr_halving { schedule.observe(val_ppl) } else { config.lr };
        opt.set_lr(lr);
        let entry = EpochLog {
            epoch,
            train_nll,
            val_ppl,
            lr,
        };
        log::info!("epoch {epoch}: train_nll {train_nll:.4} val_ppl {val_ppl:.4} lr {lr}");
        on_epoch(&entry);
        logs.push(entry);
    }
    Ok(logs)
}
