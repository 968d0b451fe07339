//! The oracles checked against hand examples, and reduced sweeps that run in
//! seconds.

use bottomup::corpus::align_copy_labels;
use bottomup_acceptance::oracles::{alignment_sweep, beam_sweep, brute_force_labels, mask_sweep, penalty_check};

#[test]
fn brute_force_labels_hand_examples() {
    assert_eq!(brute_force_labels(&[0, 1, 2], &[1]), [0, 1, 0]);
    // the cat sat the cat ran / the cat ran
    assert_eq!(brute_force_labels(&[0, 1, 2, 0, 1, 3], &[0, 1, 3]), [1, 1, 0, 1, 1, 1]);
    assert_eq!(brute_force_labels(&[0, 1], &[2]), [0, 0]);
    assert_eq!(brute_force_labels(&[0, 1, 0, 1], &[0, 1]), [1, 1, 0, 0]);
    assert_eq!(brute_force_labels(&[0, 0, 0], &[]), [0, 0, 0]);
}

#[test]
fn brute_force_agrees_with_aligner_on_overlapping_spans() {
    let (src, tgt) = ([0u8, 1, 0, 2, 0, 1, 2], [1u8, 0, 2, 0, 1]);
    assert_eq!(brute_force_labels(&src, &tgt), align_copy_labels(&src, &tgt));
}

#[test]
fn reduced_alignment_sweep() {
    let s = alignment_sweep(8, 4);
    assert!(s.pairs > 100_000);
    assert_eq!(s.mismatches, 0, "first mismatch {:?}", s.first_mismatch);
}

#[test]
fn reduced_mask_sweep() {
    let s = mask_sweep(1_000, 17).unwrap();
    assert!(s.passed(), "{s:?}");
    assert!(s.fallbacks < s.instances);
}

#[test]
fn reduced_beam_sweep() {
    let s = beam_sweep(1).unwrap();
    assert!(s.passed(), "{s:?}");
    assert!(s.unblocked_repeats > 0, "blocking check is vacuous");
}

#[test]
fn penalty_fixtures() {
    let c = penalty_check(500, 2).unwrap();
    assert!(c.passed(), "{c:?}");
}
