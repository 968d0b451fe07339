//! Alignment, tokenization, vocabulary and dataset properties.

use bottomup::corpus::{
    align_copy_labels, build_vocab, parse_dataset, render_dataset, tokenize, truncate_example, ExamplePair, Token,
};
use proptest::prelude::*;

/// Direct reading of the labeling rules: for each position, find the longest
/// source span containing it that occurs in the target, and tag it when one
/// such span is the first occurrence of its content in the source.
fn reference_labels(source: &[u8], target: &[u8]) -> Vec<u8> {
    let occurs = |span: &[u8]| target.windows(span.len()).any(|w| w == span);
    let first = |s: usize, len: usize| !(0..s).any(|t| source[t..t + len] == source[s..s + len]);
    let spans_at = |i: usize, len: usize| (i + 1).saturating_sub(len)..=i.min(source.len() - len);
    (0..source.len())
        .map(|i| {
            let longest = (1..=source.len().min(target.len()))
                .rev()
                .find(|&len| spans_at(i, len).any(|s| occurs(&source[s..s + len])));
            match longest {
                Some(len) => u8::from(spans_at(i, len).any(|s| occurs(&source[s..s + len]) && first(s, len))),
                None => 0,
            }
        })
        .collect()
}

/// Length of the longest target-occurring span covering each position.
fn longest_cover(source: &[u8], target: &[u8]) -> Vec<usize> {
    (0..source.len())
        .map(|i| {
            (1..=source.len().min(target.len()))
                .rev()
                .find(|&len| {
                    ((i + 1).saturating_sub(len)..=i.min(source.len() - len))
                        .any(|s| target.windows(len).any(|w| w == &source[s..s + len]))
                })
                .unwrap_or(0)
        })
        .collect()
}

fn seq(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, 0..=max)
}

fn tokens(words: &[&str]) -> Vec<Token> {
    words.iter().map(|w| Token::new(w).unwrap()).collect()
}

proptest! {
    #[test]
    fn aligner_matches_reference(source in seq(12).prop_filter("nonempty", |s| !s.is_empty()), target in seq(12)) {
        prop_assert_eq!(align_copy_labels(&source, &target), reference_labels(&source, &target));
    }

    #[test]
    fn appending_without_a_longer_overlapping_span_keeps_tags(
        source in seq(12).prop_filter("nonempty", |s| !s.is_empty()),
        target in seq(10),
        extra in 0u8..4,
    ) {
        let before = align_copy_labels(&source, &target);
        let mut longer = target.clone();
        longer.push(extra);
        let after = align_copy_labels(&source, &longer);
        prop_assert_eq!(&after, &reference_labels(&source, &longer));
        let (lb, la) = (longest_cover(&source, &target), longest_cover(&source, &longer));
        let grew_over_tag = (0..source.len()).any(|i| before[i] == 1 && la[i] > lb[i]);
        if !grew_over_tag {
            for i in 0..source.len() {
                prop_assert!(!(before[i] == 1 && after[i] == 0), "tag {} flipped", i);
            }
        }
    }

    #[test]
    fn tokenize_is_idempotent(text in "[a-z .,!?'\"-]{0,40}") {
        let once = tokenize(&text);
        let joined: Vec<&str> = once.iter().map(Token::as_str).collect();
        prop_assert_eq!(tokenize(&joined.join(" ")), once);
    }

    #[test]
    fn truncation_respects_limits(len in 1usize..30, max_src in 1usize..40, max_tgt in 1usize..10) {
        let words: Vec<String> = (0..len).map(|i| format!("w{}", i % 7)).collect();
        let source: Vec<Vec<Token>> = words.chunks(4).map(|c| c.iter().map(|w| Token::new(w).unwrap()).collect()).collect();
        let pair = ExamplePair::new("p", source, vec![tokens(&["w1", "w2", "w3"])]).unwrap().with_labels();
        let cut = truncate_example(&pair, max_src, max_tgt).unwrap();
        prop_assert_eq!(cut.source_len(), len.min(max_src));
        prop_assert_eq!(cut.target_len(), 3.min(max_tgt));
        prop_assert_eq!(cut.source(), pair.source()[..len.min(max_src)].to_vec());
        let labels = cut.copy_labels.clone().unwrap();
        prop_assert_eq!(labels, align_copy_labels(&cut.source(), &cut.target()));
    }
}

#[test]
fn vocabulary_is_deterministic() {
    let corpus: Vec<ExamplePair> = (0..20)
        .map(|i| {
            let src = format!("a{} b{} c . the cat sat", i % 3, i % 5);
            ExamplePair::from_text(format!("d{i}"), &[src.as_str()], &["the cat"]).unwrap()
        })
        .collect();
    let a = build_vocab(&corpus, 100).unwrap();
    let b = build_vocab(&corpus, 100).unwrap();
    assert_eq!(a.words(), b.words());
    for (i, w) in a.words().iter().enumerate() {
        assert_eq!(a.id(w), i + 4);
    }
}

#[test]
fn dataset_round_trip_keeps_pairs() {
    let pairs = vec![
        ExamplePair::from_text("a", &["one two .", "three four ."], &["one two ."]).unwrap(),
        ExamplePair::from_text("b", &["\"quoted\" text , here"], &["text"]).unwrap(),
    ];
    let text = render_dataset(&pairs).unwrap();
    assert_eq!(parse_dataset(&text).unwrap(), pairs);
}
