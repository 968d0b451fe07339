//! The JSON views behind the browser page.

use bottomup_demo::{alignment, focused_attention, mask_view, parse_numbers, penalty_view, score_view};

const SOURCE: &str = "the quick brown fox jumps over the lazy dog .";

#[test]
fn alignment_tags_the_copied_phrase() {
    let a = alignment(SOURCE, "brown fox jumps");
    let tags: Vec<u8> = a.tokens.iter().map(|t| t.label).collect();
    assert_eq!(tags, [0, 0, 1, 1, 1, 0, 0, 0, 0, 0]);
    assert_eq!(a.selected, 3);
}

#[test]
fn attention_is_a_distribution_peaked_at_the_focus() {
    let a = focused_attention(7, 2.0, 1.5);
    assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let argmax = (0..7).max_by(|&i, &j| a[i].total_cmp(&a[j])).unwrap();
    assert_eq!(argmax, 2);
    assert!(focused_attention(4, 0.0, 0.0).iter().all(|&x| (x - 0.25).abs() < 1e-12));
}

#[test]
fn mask_zeroes_ineligible_tokens_and_scales_the_rest() {
    let q = "0.1 0.1 0.9 0.9 0.9 0.1 0.1 0.1 0.1 0.1";
    let v = mask_view(SOURCE, q, 3.0, 1.0, 0.5, 2.0).unwrap();
    assert!(!v.fallback);
    for t in &v.tokens {
        if t.eligible {
            assert!((t.weight - 2.0 * t.attention).abs() < 1e-12);
        } else {
            assert_eq!(t.weight, 0.0);
        }
    }
    assert!((v.mass_before - 1.0).abs() < 1e-12);
    let eligible: f64 = v.tokens.iter().filter(|t| t.eligible).map(|t| t.attention).sum();
    assert!((v.mass_after - 2.0 * eligible).abs() < 1e-12);
}

#[test]
fn mask_with_nothing_eligible_falls_back() {
    let v = mask_view("a b c", "0.1, 0.2, 0.3", 0.0, 1.0, 0.5, 2.0).unwrap();
    assert!(v.fallback);
    assert!((v.mass_after - 1.0).abs() < 1e-12);
}

#[test]
fn mask_rejects_bad_input() {
    assert!(mask_view("a b c", "0.5 0.5", 0.0, 1.0, 0.5, 2.0).is_err());
    assert!(mask_view("a b c", "0.5 x 0.5", 0.0, 1.0, 0.5, 2.0).is_err());
    assert!(mask_view("a b c", "0.5 1.5 0.5", 0.0, 1.0, 0.5, 2.0).is_err());
    assert!(mask_view("a b c", "0.5 0.5 0.5", 0.0, 1.0, 1.0, 2.0).is_err());
    assert!(mask_view("", "", 0.0, 1.0, 0.5, 2.0).is_err());
}

#[test]
fn penalty_curves_start_at_the_formula() {
    let v = penalty_view(20, "0, 1").unwrap();
    assert_eq!(v.lengths.len(), 20);
    assert!(v.curves[0].values.iter().all(|&x| x == 1.0));
    assert!((v.curves[1].values[0] - 1.0).abs() < 1e-12);
    assert!((v.curves[1].values[19] - 25.0 / 6.0).abs() < 1e-12);
    assert!(penalty_view(0, "1").is_err());
    assert!(penalty_view(10, "").is_err());
}

#[test]
fn scoring_a_verbatim_copy() {
    let v = score_view(SOURCE, SOURCE, SOURCE);
    assert!((v.rouge1 - 100.0).abs() < 1e-9);
    assert!((v.rouge_l - 100.0).abs() < 1e-9);
    assert_eq!(v.copied_word_precision, Some(100.0));
    assert_eq!(v.novel_word_rate, Some(0.0));
    assert_eq!(v.histogram.last().unwrap().label, "11+");
    assert_eq!(v.histogram[9].tokens, 10);
    let empty = score_view("", "a", "a");
    assert_eq!(empty.novel_word_rate, None);
}

#[test]
fn numbers_parse_with_commas_or_spaces() {
    assert_eq!(parse_numbers(" 1, 2.5\n3 ").unwrap(), [1.0, 2.5, 3.0]);
    assert!(parse_numbers("").unwrap().is_empty());
}
