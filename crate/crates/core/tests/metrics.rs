//! ROUGE, extractive baselines and copy analyses.

use bottomup::corpus::{ExamplePair, Token};
use bottomup::metrics::{
    copy_phrase_histogram, extract_words_threshold, lead_k, novel_word_rate, rouge_l, rouge_n, select_top_sentences,
};
use proptest::prelude::*;

fn toks(n: usize, prefix: &str) -> Vec<Token> {
    (0..n).map(|i| Token::new(&format!("{prefix}{i}")).unwrap()).collect()
}

proptest! {
    #[test]
    fn rouge_n_swaps_precision_and_recall(
        a in prop::collection::vec(0u8..5, 0..12),
        b in prop::collection::vec(0u8..5, 0..12),
        n in 1usize..4,
    ) {
        let ab = rouge_n(&a, &b, n);
        let ba = rouge_n(&b, &a, n);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
        prop_assert!((0.0..=1.0).contains(&ab.f1));
    }

    #[test]
    fn rouge_l_is_bounded_by_unigram_overlap(
        a in prop::collection::vec(0u8..5, 0..12),
        b in prop::collection::vec(0u8..5, 0..12),
    ) {
        prop_assert!(rouge_l(&a, &b).recall <= rouge_n(&a, &b, 1).recall);
    }

    #[test]
    fn threshold_extraction_is_near_the_closest_count(
        q in prop::collection::vec(0.0f64..1.0, 1..20),
        target in 1usize..25,
    ) {
        let source = toks(q.len(), "t");
        let out = extract_words_threshold(&source, &q, target).unwrap();
        let achievable: Vec<usize> = q.iter().map(|&t| q.iter().filter(|&&x| x >= t).count()).collect();
        let best = achievable.iter().map(|&c| c.abs_diff(target)).min().unwrap();
        prop_assert!(out.len().abs_diff(target) <= best + 1);
        // document order is preserved
        let positions: Vec<usize> = out.iter().map(|t| source.iter().position(|s| s == t).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn histogram_counts_each_copied_token_once(
        source in prop::collection::vec(0u8..4, 1..20),
        generated in prop::collection::vec(0u8..6, 0..20),
    ) {
        let h = copy_phrase_histogram(&generated, &source);
        let copied = generated.iter().filter(|g| source.contains(g)).count();
        prop_assert_eq!(h.total(), copied);
    }
}

#[test]
fn top_sentences_with_lead_labels_reproduce_lead_three() {
    let sentences: Vec<Vec<Token>> = (0..6).map(|i| toks(3 + i % 2, &format!("s{i}w"))).collect();
    let q: Vec<f64> = sentences
        .iter()
        .enumerate()
        .flat_map(|(i, s)| std::iter::repeat_n(if i < 3 { 0.9 } else { 0.1 }, s.len()))
        .collect();
    let doc = ExamplePair::new("d", sentences, vec![toks(2, "x")]).unwrap();
    assert_eq!(select_top_sentences(&doc, &q, 3).unwrap(), lead_k(&doc, 3));
}

#[test]
fn novel_rate_on_a_constructed_sample() {
    let source = toks(500, "s");
    let mut generated: Vec<Token> = source.iter().cycle().take(852).cloned().collect();
    generated.extend(toks(148, "novel"));
    assert!((novel_word_rate(&generated, &source).unwrap() - 14.8).abs() < 1e-9);
    assert!(novel_word_rate(&[], &source).is_err());
}

#[test]
fn verbatim_long_span_lands_in_the_last_bucket() {
    let source = toks(20, "w");
    let h = copy_phrase_histogram(&source[3..15], &source);
    assert_eq!(h.0[10], 12);
    assert_eq!(h.long_share(), 100.0);
}
