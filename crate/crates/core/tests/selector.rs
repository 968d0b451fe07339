//! Content-selector training and AUC properties.

use std::collections::HashMap;

use bottomup::corpus::Vocabulary;
use bottomup::selector::{
    compute_auc, evaluate_auc, train_selector, Selector, SelectorConfig, SelectorTrainConfig, TaggedSequence,
    MAX_TRAIN_EXAMPLES,
};
use bottomup::tensor::{ParamStore, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vocab(size: usize) -> Vocabulary {
    let v = Vocabulary::from_words((0..size - 4).map(|i| format!("w{i}")));
    assert_eq!(v.len(), size);
    v
}

fn small_config() -> SelectorConfig {
    SelectorConfig {
        static_dim: 8,
        context_dim: 8,
        tagger_hidden: 16,
        tagger_layers: 2,
        dropout: 0.5,
    }
}

/// Random sequences labeled by the parity of their token ids. Id 0 is never drawn.
fn parity_data(n: usize, len: usize, vocab_size: usize, rng: &mut ChaCha8Rng) -> Vec<TaggedSequence> {
    (0..n)
        .map(|_| {
            let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(1..vocab_size)).collect();
            let labels = ids.iter().map(|&i| u8::from(i % 2 == 0)).collect();
            TaggedSequence { ids, labels }
        })
        .collect()
}

#[test]
fn decodable_labels_reach_high_auc() {
    let v = vocab(50);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let train = parity_data(200, 6, v.len(), &mut rng);
    let valid = parity_data(50, 6, v.len(), &mut rng);
    // pretrained vectors carry the label in one coordinate among noise
    let vectors: HashMap<String, Vec<f32>> = v
        .words()
        .iter()
        .map(|w| {
            let mut vec: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            vec[0] = if v.id(w).is_multiple_of(2) { 1.0 } else { -1.0 };
            (w.clone(), vec)
        })
        .collect();
    let mut store = ParamStore::new();
    let sel = Selector::new(small_config(), &v, Some(&vectors), &mut store, "", &mut rng).unwrap();
    let cfg = SelectorTrainConfig {
        epochs: 10,
        batch_size: 1,
        ..Default::default()
    };
    let report = train_selector(&sel, &mut store, &train, Some(&valid), &cfg).unwrap();
    let auc = evaluate_auc(&sel, &store, &valid).unwrap();
    assert!(auc >= 0.99, "AUC {auc}, epochs {:?}", report.epochs);
    assert_eq!(report.best_auc, Some(auc));
}

fn values(store: &ParamStore) -> Vec<Tensor<f32>> {
    store.iter().map(|(_, e)| e.value.clone()).collect()
}

#[test]
fn training_consumes_at_most_the_example_limit() {
    let v = vocab(10);
    let data: Vec<TaggedSequence> = (0..150_000)
        .map(|i| TaggedSequence {
            ids: vec![4 + i % 6],
            labels: vec![(i % 2) as u8],
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let sel = Selector::new(small_config(), &v, None, &mut store, "", &mut rng).unwrap();
    let initial = store.clone();
    let cfg = SelectorTrainConfig {
        epochs: 0,
        ..Default::default()
    };
    let valid = data[..10].to_vec();
    let report = train_selector(&sel, &mut store, &data, Some(&valid), &cfg).unwrap();
    assert_eq!(report.examples_used, MAX_TRAIN_EXAMPLES);
    // zero epochs returns the initialization
    assert_eq!(values(&store), values(&initial));
}

#[test]
fn training_is_deterministic() {
    let v = vocab(20);
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = parity_data(30, 5, v.len(), &mut rng);
        let mut store = ParamStore::new();
        let sel = Selector::new(small_config(), &v, None, &mut store, "", &mut rng).unwrap();
        let cfg = SelectorTrainConfig {
            epochs: 2,
            ..Default::default()
        };
        train_selector(&sel, &mut store, &data, None, &cfg).unwrap();
        store
    };
    assert_eq!(values(&run()), values(&run()));
}

#[test]
fn no_labeled_examples_is_an_error() {
    let v = vocab(10);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let sel = Selector::new(small_config(), &v, None, &mut store, "", &mut rng).unwrap();
    assert!(train_selector(&sel, &mut store, &[], None, &SelectorTrainConfig::default()).is_err());
}

proptest! {
    #[test]
    fn predictions_are_probabilities(seed in 0u64..50, len in 1usize..8) {
        let v = vocab(12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::<f32>::new();
        let sel = Selector::new(small_config(), &v, None, &mut store, "", &mut rng).unwrap();
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..v.len())).collect();
        let q = sel.predict(&store, &ids).unwrap();
        prop_assert_eq!(q.len(), len);
        prop_assert!(q.as_slice().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn auc_ignores_increasing_transforms(
        points in prop::collection::vec((0.0f64..1.0, 0u8..2), 2..40),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let (q, labels): (Vec<f64>, Vec<u8>) = points.into_iter().unzip();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let transformed: Vec<f64> = q.iter().map(|&x| (scale * x + shift).exp()).collect();
        let a = compute_auc(&q, &labels).unwrap();
        let b = compute_auc(&transformed, &labels).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
