//! Word-level content selector.
//!
//! Each token gets a static (frozen) embedding and a contextual embedding
//! mixed from the layers of a small bidirectional encoder,
//! `e_c = γ · Σ_ℓ s_ℓ · h^(ℓ)`. Both channels are concatenated and tagged by
//! a stacked BiLSTM; `q_i = σ(W_s·h_i + b_s)` is the selection probability.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ExamplePair, Token, Vocabulary, UNK};
use crate::error::{Error, Result};
use crate::tensor::{
    dropout, Adagrad, BiLstm, Grads, Graph, Linear, ParamId, ParamStore, Real, Tensor, Trainable, Var,
};

/// Hard cap on selector training examples.
pub const MAX_TRAIN_EXAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub static_dim: usize,
    /// Width of every contextual layer h^(0..2); must be even.
    pub context_dim: usize,
    /// Tagger hidden size per direction.
    pub tagger_hidden: usize,
    pub tagger_layers: usize,
    pub dropout: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            static_dim: 32,
            context_dim: 32,
            tagger_hidden: 64,
            tagger_layers: 2,
            dropout: 0.5,
        }
    }
}

/// Per-token selection probabilities, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProbabilities(Vec<f64>);

impl SelectionProbabilities {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("selection probabilities must lie in [0, 1]".into()));
        }
        Ok(Self(q))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Selector {
    pub config: SelectorConfig,
    pub vocab_size: usize,
    static_embed: ParamId,
    /// vocab id → static row; words missing from the vector file share the UNK row
    static_rows: Vec<usize>,
    context_embed: ParamId,
    context_layers: [BiLstm; 2],
    pub gamma: ParamId,
    pub mix: [ParamId; 3],
    tagger: Vec<BiLstm>,
    output: Linear,
}

/// Whitespace-separated word vectors: a word followed by `dim` floats per line.
pub fn load_word_vectors(path: &Path, dim: usize) -> Result<HashMap<String, Vec<f32>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: std::result::Result<Vec<f32>, _> = parts.map(str::parse::<f32>).collect();
        let values = values.map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        if values.len() != dim {
            return Err(Error::MalformedLine {
                line: i + 1,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        out.insert(word.to_lowercase(), values);
    }
    Ok(out)
}

impl Selector {
    pub fn new<T: Real, R: Rng>(
        config: SelectorConfig,
        vocab: &Vocabulary,
        vectors: Option<&HashMap<String, Vec<f32>>>,
        store: &mut ParamStore<T>,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        if !config.context_dim.is_multiple_of(2) || config.context_dim == 0 {
            return Err(Error::Config("selector context_dim must be even and positive".into()));
        }
        if config.tagger_layers == 0 {
            return Err(Error::Config("selector needs at least one tagger layer".into()));
        }
        let v = vocab.len();
        let d = config.static_dim;
        let mut table: Vec<T> = (0..v * d).map(|_| T::from_f64(rng.gen_range(-0.1..0.1))).collect();
        let mut static_rows: Vec<usize> = (0..v).collect();
        let trainable = match vectors {
            None => Trainable::Frozen,
            Some(vectors) => {
                let mut flags = vec![false; v];
                flags[UNK] = true;
                for id in 0..v {
                    match vectors.get(vocab.token(id)) {
                        Some(vec) if vec.len() == d => {
                            for (k, &x) in vec.iter().enumerate() {
                                table[id * d + k] = T::from_f64(x as f64);
                            }
                        }
                        _ => static_rows[id] = UNK,
                    }
                }
                Trainable::Rows(flags)
            }
        };
        let static_embed = store.add(&format!("{prefix}static_embed"), Tensor::new(vec![v, d], table)?, trainable)?;
        Self::build(config, v, static_embed, static_rows, store, prefix, rng)
    }

    fn build<T: Real, R: Rng>(
        config: SelectorConfig,
        vocab_size: usize,
        static_embed: ParamId,
        static_rows: Vec<usize>,
        store: &mut ParamStore<T>,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        let c = config.context_dim;
        let context_embed = store.add_uniform(&format!("{prefix}context_embed"), &[vocab_size, c], 0.1, rng)?;
        let context_layers = [
            BiLstm::new(store, &format!("{prefix}context.l1"), c, c / 2, rng)?,
            BiLstm::new(store, &format!("{prefix}context.l2"), c, c / 2, rng)?,
        ];
        let gamma = store.add(&format!("{prefix}gamma"), Tensor::scalar(T::one()), Trainable::All)?;
        let third = T::from_f64(1.0 / 3.0);
        let mix = [
            store.add(&format!("{prefix}mix.0"), Tensor::scalar(third), Trainable::All)?,
            store.add(&format!("{prefix}mix.1"), Tensor::scalar(third), Trainable::All)?,
            store.add(&format!("{prefix}mix.2"), Tensor::scalar(third), Trainable::All)?,
        ];
        let mut tagger = Vec::with_capacity(config.tagger_layers);
        let mut width = config.static_dim + c;
        for l in 0..config.tagger_layers {
            tagger.push(BiLstm::new(store, &format!("{prefix}tagger.l{l}"), width, config.tagger_hidden, rng)?);
            width = 2 * config.tagger_hidden;
        }
        let output = Linear::new(store, &format!("{prefix}output"), width, 1, true, rng)?;
        Ok(Self {
            config,
            vocab_size,
            static_embed,
            static_rows,
            context_embed,
            context_layers,
            gamma,
            mix,
            tagger,
            output,
        })
    }

    /// Rebinds a selector to parameters loaded from a checkpoint.
    pub fn bind<T: Real>(config: SelectorConfig, vocab_size: usize, store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let mut scratch = ParamStore::<T>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let static_embed = store.id(&format!("{prefix}static_embed"))?;
        let static_rows = match &store.entry(static_embed).trainable {
            Trainable::Rows(flags) => flags
                .iter()
                .enumerate()
                .map(|(i, &trainable)| if trainable { UNK } else { i })
                .collect(),
            _ => (0..vocab_size).collect(),
        };
        let placeholder = scratch.add(
            &format!("{prefix}static_embed"),
            Tensor::zeros(&[vocab_size, config.static_dim]),
            Trainable::Frozen,
        )?;
        let built = Self::build(config, vocab_size, placeholder, static_rows, &mut scratch, prefix, &mut rng)?;
        let offset = static_embed.index() - placeholder.index();
        for (id, entry) in scratch.iter() {
            let target = store.id(&entry.name)?;
            if target.index() != id.index() + offset || store.value(target).shape() != entry.value.shape() {
                return Err(Error::Config(format!("checkpoint layout mismatch at {}", entry.name)));
            }
        }
        let shift = |p: ParamId| ParamId(p.index() + offset);
        Ok(Self {
            static_embed,
            context_embed: shift(built.context_embed),
            context_layers: built.context_layers.map(|l| shift_bilstm(l, offset)),
            gamma: shift(built.gamma),
            mix: built.mix.map(shift),
            tagger: built.tagger.into_iter().map(|l| shift_bilstm(l, offset)).collect(),
            output: Linear {
                weight: shift(built.output.weight),
                bias: built.output.bias.map(shift),
            },
            ..built
        })
    }

    pub fn ids(&self, vocab: &Vocabulary, tokens: &[Token]) -> Vec<usize> {
        vocab.ids(tokens)
    }

    /// `e_c` for each token: `[n, context_dim]`.
    pub fn contextual_embed<T: Real>(&self, g: &mut Graph<'_, T>, ids: &[usize]) -> Result<Var> {
        let table = g.param(self.context_embed);
        let h0 = g.gather(table, ids)?;
        let h1 = self.context_layers[0].run(g, h0)?.outputs;
        let h2 = self.context_layers[1].run(g, h1)?.outputs;
        let gamma = g.param(self.gamma);
        let s = self.mix.map(|p| g.param(p));
        mix_layers(g, &[h0, h1, h2], gamma, &s)
    }

    /// Selection probabilities as an `[n, 1]` column. Dropout is applied when
    /// `rng` is given (training).
    pub fn forward<T: Real, R: Rng>(&self, g: &mut Graph<'_, T>, ids: &[usize], mut rng: Option<&mut R>) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("selector token sequence"));
        }
        let table = g.param(self.static_embed);
        let rows: Vec<usize> = ids.iter().map(|&i| self.static_rows.get(i).copied().unwrap_or(UNK)).collect();
        let e_w = g.gather(table, &rows)?;
        let e_c = self.contextual_embed(g, ids)?;
        let mut x = g.concat_cols(&[e_w, e_c])?;
        for layer in &self.tagger {
            if let Some(r) = rng.as_deref_mut() {
                x = dropout(g, x, self.config.dropout, r)?;
            }
            x = layer.run(g, x)?.outputs;
        }
        if let Some(r) = rng {
            x = dropout(g, x, self.config.dropout, r)?;
        }
        let logits = self.output.forward(g, x)?;
        Ok(g.sigmoid(logits))
    }

    pub fn predict<T: Real>(&self, store: &ParamStore<T>, ids: &[usize]) -> Result<SelectionProbabilities> {
        let mut g = Graph::with_params(store);
        let q = self.forward::<T, ChaCha8Rng>(&mut g, ids, None)?;
        SelectionProbabilities::new(g.value(q).to_f64_vec())
    }

    /// Probabilities for a whole document, tagged one sentence at a time as
    /// in training and concatenated in order.
    pub fn predict_sentences<T: Real>(
        &self,
        store: &ParamStore<T>,
        vocab: &Vocabulary,
        sentences: &[Vec<Token>],
    ) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for s in sentences.iter().filter(|s| !s.is_empty()) {
            out.extend(self.predict(store, &vocab.ids(s))?.into_inner());
        }
        Ok(out)
    }
}

/// Sentence-level tagging examples from labeled pairs (labels are computed
/// where missing).
pub fn tagged_sentences(vocab: &Vocabulary, pairs: &[ExamplePair]) -> Vec<TaggedSequence> {
    pairs
        .iter()
        .flat_map(|p| p.labeled_sentences())
        .map(|(tokens, labels)| TaggedSequence {
            ids: vocab.ids(&tokens),
            labels,
        })
        .collect()
}

fn shift_bilstm(l: BiLstm, offset: usize) -> BiLstm {
    let s = |p: ParamId| ParamId(p.index() + offset);
    let d = |p: crate::tensor::LstmParams| crate::tensor::LstmParams {
        w_ih: s(p.w_ih),
        w_hh: s(p.w_hh),
        bias: s(p.bias),
        ..p
    };
    BiLstm {
        forward: d(l.forward),
        backward: d(l.backward),
    }
}

/// `γ · Σ_ℓ s_ℓ · h^(ℓ)` with raw (unnormalized) layer weights.
pub fn mix_layers<T: Real>(g: &mut Graph<'_, T>, layers: &[Var], gamma: Var, weights: &[Var]) -> Result<Var> {
    if layers.is_empty() || layers.len() != weights.len() {
        return Err(Error::LengthMismatch {
            context: "layer mixing",
            left: layers.len(),
            right: weights.len(),
        });
    }
    let shape = g.value(layers[0]).shape().to_vec();
    let mut acc: Option<Var> = None;
    for (&h, &s) in layers.iter().zip(weights) {
        if g.value(h).shape() != shape.as_slice() {
            return Err(Error::shape(
                "layer mixing",
                format!("{:?} vs {:?}", g.value(h).shape(), shape),
            ));
        }
        let term = g.scale_by(s, h)?;
        acc = Some(match acc {
            Some(a) => g.add(a, term)?,
            None => term,
        });
    }
    g.scale_by(gamma, acc.expect("nonempty"))
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-7, 1 - 1e-7]`.
pub fn selector_loss<T: Real>(g: &mut Graph<'_, T>, q: Var, labels: &[u8]) -> Result<Var> {
    let n = g.value(q).len();
    if n != labels.len() {
        return Err(Error::LengthMismatch {
            context: "selector loss",
            left: n,
            right: labels.len(),
        });
    }
    let shape = g.value(q).shape().to_vec();
    let t: Vec<T> = labels.iter().map(|&l| T::from_f64(l as f64)).collect();
    let not_t: Vec<T> = labels.iter().map(|&l| T::from_f64(1.0 - l as f64)).collect();
    let t = g.constant(Tensor::new(shape.clone(), t)?);
    let not_t = g.constant(Tensor::new(shape, not_t)?);
    let qc = g.clamp(q, 1e-7, 1.0 - 1e-7);
    let lq = g.ln(qc);
    let nq = g.one_minus(qc);
    let lnq = g.ln(nq);
    let a = g.mul(lq, t)?;
    let b = g.mul(lnq, not_t)?;
    let s = g.add(a, b)?;
    let total = g.sum(s);
    Ok(g.scale(total, -1.0 / n as f64))
}

/// Plain-value form of [`selector_loss`].
pub fn selector_loss_value(q: &[f64], labels: &[u8]) -> Result<f64> {
    let mut g = Graph::<f64>::new();
    let qv = g.constant(Tensor::row(q.to_vec()));
    let loss = selector_loss(&mut g, qv, labels)?;
    g.scalar(loss)
}

/// ROC AUC via the rank statistic: `P(q_pos > q_neg) + ½·P(tie)` over all pairs.
pub fn compute_auc(q: &[f64], labels: &[u8]) -> Result<f64> {
    if q.len() != labels.len() {
        return Err(Error::LengthMismatch {
            context: "auc",
            left: q.len(),
            right: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
    // average ranks over tied groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && q[order[j + 1]] == q[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// One tagging example: token ids and their 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSequence {
    pub ids: Vec<usize>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub initial_accumulator: f64,
    pub max_examples: usize,
    /// Held-out fraction when no validation set is given.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SelectorTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 16,
            lr: 0.15,
            initial_accumulator: 0.1,
            max_examples: MAX_TRAIN_EXAMPLES,
            validation_fraction: 0.05,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SelectorTrainReport {
    pub examples_used: usize,
    pub validation_examples: usize,
    /// `(epoch, mean train loss, validation AUC)`
    pub epochs: Vec<(usize, f64, Option<f64>)>,
    pub best_epoch: Option<usize>,
    pub best_auc: Option<f64>,
}

/// AUC of `selector` over every token of `data`.
pub fn evaluate_auc<T: Real>(selector: &Selector, store: &ParamStore<T>, data: &[TaggedSequence]) -> Result<f64> {
    let mut q = Vec::new();
    let mut labels = Vec::new();
    for ex in data {
        q.extend(selector.predict(store, &ex.ids)?.into_inner());
        labels.extend_from_slice(&ex.labels);
    }
    compute_auc(&q, &labels)
}

/// Adagrad training with dropout; returns the parameters of the epoch with the
/// best validation AUC (or the initialization when `epochs == 0`).
pub fn train_selector(
    selector: &Selector,
    store: &mut ParamStore<f32>,
    data: &[TaggedSequence],
    validation: Option<&[TaggedSequence]>,
    config: &SelectorTrainConfig,
) -> Result<SelectorTrainReport> {
    let labeled: Vec<&TaggedSequence> = data.iter().filter(|e| !e.ids.is_empty() && e.ids.len() == e.labels.len()).collect();
    if labeled.is_empty() {
        return Err(Error::EmptyInput("labeled selector examples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut train, held_out): (Vec<&TaggedSequence>, Vec<TaggedSequence>) = match validation {
        Some(v) => (labeled, v.to_vec()),
        None => {
            let mut shuffled = labeled;
            shuffled.shuffle(&mut rng);
            let n_val = ((shuffled.len() as f64) * config.validation_fraction).round() as usize;
            let n_val = n_val.min(shuffled.len().saturating_sub(1));
            let val = shuffled.split_off(shuffled.len() - n_val);
            (shuffled, val.into_iter().cloned().collect())
        }
    };
    train.truncate(config.max_examples);
    let mut report = SelectorTrainReport {
        examples_used: train.len(),
        validation_examples: held_out.len(),
        ..Default::default()
    };
    if config.epochs == 0 {
        return Ok(report);
    }

    let mut opt = Adagrad::new(store, config.lr, config.initial_accumulator)?;
    let mut best: Option<(f64, ParamStore<f32>)> = None;
    let batch = config.batch_size.max(1);
    for epoch in 1..=config.epochs {
        train.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in train.chunks(batch) {
            let mut grads = Grads::for_store(store);
            for ex in chunk {
                let mut g = Graph::with_params(&*store);
                let q = selector.forward(&mut g, &ex.ids, Some(&mut rng))?;
                let loss = selector_loss(&mut g, q, &ex.labels)?;
                loss_sum += g.scalar(loss)? as f64;
                g.backward(loss, &mut grads)?;
            }
            grads.scale(1.0 / chunk.len() as f32);
            opt.step(store, &grads)?;
        }
        let auc = if held_out.is_empty() {
            None
        } else {
            evaluate_auc(selector, store, &held_out).ok()
        };
        log::info!("selector epoch {epoch}: loss {:.4} auc {auc:?}", loss_sum / train.len() as f64);
        report.epochs.push((epoch, loss_sum / train.len() as f64, auc));
        let score = auc.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, store.clone()));
            report.best_epoch = Some(epoch);
            report.best_auc = auc;
        }
    }
    if let Some((_, params)) = best {
        *store = params;
    }
    Ok(report)
}

/// `{"id", "q"}` JSON line.
pub fn q_json_line(id: &str, q: &[f64]) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::json!({ "id": id, "q": q }))?)
}

/// Reads `{"id", "q"}` lines into an id → q map.
pub fn parse_q_jsonl(text: &str) -> Result<HashMap<String, Vec<f64>>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        q: Vec<f64>,
    }
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Row = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.insert(row.id, row.q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_vocab(n: usize) -> Vocabulary {
        Vocabulary::from_words((0..n).map(|i| format!("w{i}")))
    }

    fn tiny(store: &mut ParamStore<f64>, seed: u64) -> Selector {
        let cfg = SelectorConfig {
            static_dim: 3,
            context_dim: 4,
            tagger_hidden: 3,
            tagger_layers: 2,
            dropout: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Selector::new(cfg, &tiny_vocab(6), None, store, "", &mut rng).unwrap()
    }

    #[test]
    fn mixing_formula_examples() {
        let mut g = Graph::<f64>::new();
        let h0 = g.constant_row(vec![1.0, 0.0]);
        let h1 = g.constant_row(vec![0.0, 1.0]);
        let h2 = g.constant_row(vec![5.0, 5.0]);
        let s = |g: &mut Graph<f64>, v: f64| g.constant(Tensor::scalar(v));

        let (gm, a, b, c) = (s(&mut g, 1.0), s(&mut g, 1.0), s(&mut g, 0.0), s(&mut g, 0.0));
        let e = mix_layers(&mut g, &[h0, h1, h2], gm, &[a, b, c]).unwrap();
        assert_eq!(g.value(e).data(), &[1.0, 0.0]);

        let z = s(&mut g, 0.0);
        let e = mix_layers(&mut g, &[h0, h1, h2], gm, &[z, z, z]).unwrap();
        assert_eq!(g.value(e).data(), &[0.0, 0.0]);

        let (g2, half) = (s(&mut g, 2.0), s(&mut g, 0.5));
        let e = mix_layers(&mut g, &[h0, h1, h2], g2, &[half, half, z]).unwrap();
        assert_eq!(g.value(e).data(), &[1.0, 1.0]);
    }

    #[test]
    fn mixing_rejects_mismatched_layers() {
        let mut g = Graph::<f64>::new();
        let h0 = g.constant_row(vec![1.0, 0.0]);
        let h1 = g.constant_row(vec![0.0]);
        let one = g.constant(Tensor::scalar(1.0));
        assert!(mix_layers(&mut g, &[h0, h1], one, &[one, one]).is_err());
    }

    #[test]
    fn four_mixing_parameters() {
        let mut store = ParamStore::new();
        let _ = tiny(&mut store, 1);
        let count = store
            .iter()
            .filter(|(_, e)| e.name == "gamma" || e.name.starts_with("mix."))
            .count();
        assert_eq!(count, 4);
    }

    #[test]
    fn zero_output_gives_half() {
        let mut store = ParamStore::new();
        let sel = tiny(&mut store, 2);
        let w = store.id("output.weight").unwrap();
        store.value_mut(w).data_mut().iter_mut().for_each(|v| *v = 0.0);
        let q = sel.predict(&store, &[4, 5, 6]).unwrap();
        assert!(q.as_slice().iter().all(|&v| v == 0.5));

        let b = store.id("output.bias").unwrap();
        store.value_mut(b).data_mut()[0] = 50.0;
        let q = sel.predict(&store, &[4, 5, 6]).unwrap();
        assert!(q.as_slice().iter().all(|&v| v >= 1.0 - 1e-9));
    }

    #[test]
    fn empty_sequence_errors() {
        let mut store = ParamStore::new();
        let sel = tiny(&mut store, 2);
        assert!(sel.predict(&store, &[]).is_err());
    }

    #[test]
    fn loss_examples() {
        assert!((selector_loss_value(&[0.5, 0.5], &[1, 0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((selector_loss_value(&[0.9], &[1]).unwrap() - 0.10536051565782628).abs() < 1e-9);
        let perfect = selector_loss_value(&[1.0, 0.0], &[1, 0]).unwrap();
        assert!(perfect <= 1e-6 + 1e-7);
        assert!(selector_loss_value(&[0.5], &[1, 0]).is_err());
    }

    #[test]
    fn loss_is_finite_at_extremes() {
        assert!(selector_loss_value(&[0.0, 1.0], &[1, 0]).unwrap().is_finite());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(compute_auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(compute_auc(&[0.1, 0.9], &[1, 0]).unwrap(), 0.0);
        assert_eq!(compute_auc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert!(matches!(compute_auc(&[0.5, 0.2], &[1, 1]), Err(Error::AucUndefined)));
    }

    fn brute_auc(q: &[f64], t: &[u8]) -> f64 {
        let mut s = 0.0;
        let mut pairs = 0.0;
        for i in 0..q.len() {
            for j in 0..q.len() {
                if t[i] == 1 && t[j] == 0 {
                    pairs += 1.0;
                    if q[i] > q[j] {
                        s += 1.0;
                    } else if q[i] == q[j] {
                        s += 0.5;
                    }
                }
            }
        }
        s / pairs
    }

    proptest::proptest! {
        #[test]
        fn auc_matches_pair_enumeration(
            items in proptest::collection::vec((0u8..5, 0u8..2), 2..30)
        ) {
            let q: Vec<f64> = items.iter().map(|(v, _)| *v as f64 / 4.0).collect();
            let t: Vec<u8> = items.iter().map(|(_, l)| *l).collect();
            proptest::prop_assume!(t.contains(&0) && t.contains(&1));
            let auc = compute_auc(&q, &t).unwrap();
            proptest::prop_assert!((auc - brute_auc(&q, &t)).abs() < 1e-12);
            // invariant under strictly increasing transforms
            let q2: Vec<f64> = q.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            proptest::prop_assert!((compute_auc(&q2, &t).unwrap() - auc).abs() < 1e-12);
        }
    }

    #[test]
    fn mixing_scale_degeneracy() {
        let mut store = ParamStore::new();
        let sel = tiny(&mut store, 9);
        let ids = [4, 7, 5, 6];
        let before = sel.predict(&store, &ids).unwrap();
        let c = 3.7;
        store.value_mut(sel.gamma).data_mut()[0] *= c;
        for m in sel.mix {
            store.value_mut(m).data_mut()[0] /= c;
        }
        let after = sel.predict(&store, &ids).unwrap();
        for (a, b) in before.as_slice().iter().zip(after.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn bind_recovers_layout() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pre = store.add_zeros("other", &[2]).unwrap();
        let _ = pre;
        let cfg = SelectorConfig {
            static_dim: 2,
            context_dim: 2,
            tagger_hidden: 2,
            tagger_layers: 1,
            dropout: 0.0,
        };
        let sel = Selector::new(cfg.clone(), &tiny_vocab(3), None, &mut store, "sel.", &mut rng).unwrap();
        let bound = Selector::bind(cfg, 7, &store, "sel.").unwrap();
        let ids = [4, 5, 6, 1];
        assert_eq!(sel.predict(&store, &ids).unwrap(), bound.predict(&store, &ids).unwrap());
    }

    #[test]
    fn oov_words_share_unk_row() {
        let vocab = tiny_vocab(2);
        let mut vectors = HashMap::new();
        vectors.insert("w0".to_string(), vec![1.0f32, 2.0]);
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SelectorConfig {
            static_dim: 2,
            context_dim: 2,
            tagger_hidden: 2,
            tagger_layers: 1,
            dropout: 0.0,
        };
        let sel = Selector::new(cfg, &vocab, Some(&vectors), &mut store, "", &mut rng).unwrap();
        assert_eq!(sel.static_rows[4], 4);
        assert_eq!(sel.static_rows[5], UNK);
        let id = store.id("static_embed").unwrap();
        assert_eq!(store.value(id).row_slice(4), &[1.0, 2.0]);
    }
}
