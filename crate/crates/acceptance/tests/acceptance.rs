//! Runs every acceptance criterion and prints one PASS/FAIL line for each.
//! Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bottomup::Result;
use bottomup_acceptance::gradients::{self, TOLERANCE};
use bottomup_acceptance::oracles::{self, MASK_TOLERANCE, ORACLE_BEAM, PENALTY_TOLERANCE};
use bottomup_acceptance::scenarios::{self, ORACLE_EPSILON};
use bottomup_acceptance::Verdict;

const GRADIENT_TIME_LIMIT: Duration = Duration::from_secs(120);
const MASK_INSTANCES: usize = 10_000;
const BEAM_SEEDS: u64 = 8;
const BOUNDED_HISTORIES: usize = 10_000;
const OVERFIT_ROUGE1: f64 = 90.0;
const SELECTOR_AUC: f64 = 0.85;
const SELECTOR_AUC_GAP: f64 = 0.1;
const BLOCKING_ROUGE1_DROP: f64 = 1.0;
const END_TO_END_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);

fn report(v: Verdict, all: &mut Vec<Verdict>) {
    println!("{}", v.line());
    all.push(v);
}

fn failed(criterion: &'static str, e: bottomup::Error) -> Verdict {
    Verdict::new(criterion, false, format!("error: {e}"))
}

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    match gradients::all_families() {
        Ok(families) => {
            let elapsed = start.elapsed();
            let worst = families.iter().map(|f| f.worst_relative_error).fold(0.0, f64::max);
            let failing: Vec<&str> = families.iter().filter(|f| !f.passed()).map(|f| f.name).collect();
            let detail = format!(
                "{} families x {} instances; worst relative error {worst:.2e} (< {TOLERANCE:e}); {:.1} s (< {} s){}",
                families.len(),
                gradients::INSTANCES,
                elapsed.as_secs_f64(),
                GRADIENT_TIME_LIMIT.as_secs(),
                if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) }
            );
            Verdict::new("1 gradient suite", failing.is_empty() && elapsed < GRADIENT_TIME_LIMIT, detail)
        }
        Err(e) => failed("1 gradient suite", e),
    }
}

fn alignment() -> Verdict {
    let s = oracles::alignment_sweep(oracles::ALIGN_MAX_SOURCE, oracles::ALIGN_MAX_TARGET);
    let mut detail = format!(
        "{} source/target pairs (source <= {}, target <= {}, {} symbols); {} mismatches",
        s.pairs,
        oracles::ALIGN_MAX_SOURCE,
        oracles::ALIGN_MAX_TARGET,
        oracles::ALIGN_ALPHABET,
        s.mismatches
    );
    if let Some((src, tgt)) = &s.first_mismatch {
        detail.push_str(&format!("; first {src:?} / {tgt:?}"));
    }
    Verdict::new("2 alignment oracle", s.mismatches == 0 && s.pairs > 0, detail)
}

fn mask() -> Verdict {
    match oracles::mask_sweep(MASK_INSTANCES, 3) {
        Ok(s) => Verdict::new(
            "3 mask soundness",
            s.passed() && s.instances == MASK_INSTANCES,
            format!(
                "{} instances ({} fallbacks); leaked {}; off unit mass {}; monotonicity violations {}; \
                 identity error {:.1e}, graph error {:.1e} (<= {MASK_TOLERANCE:e})",
                s.instances,
                s.fallbacks,
                s.leaked_positions,
                s.unnormalized,
                s.monotonicity_violations,
                s.identity_max_error,
                s.graph_max_error
            ),
        ),
        Err(e) => failed("3 mask soundness", e),
    }
}

fn beam() -> Verdict {
    match oracles::beam_sweep(BEAM_SEEDS) {
        Ok(s) => {
            let mut detail = format!(
                "beam {ORACLE_BEAM} vs exhaustive: {} instances, {} mismatches; blocked decodes with repeats {}/{} \
                 (unblocked {})",
                s.instances, s.mismatches, s.blocked_repeats, s.blocked_decodes, s.unblocked_repeats
            );
            if let Some(m) = &s.first_mismatch {
                detail.push_str(&format!("; first {m}"));
            }
            Verdict::new("4 beam-search oracle", s.passed(), detail)
        }
        Err(e) => failed("4 beam-search oracle", e),
    }
}

fn penalties() -> Verdict {
    match oracles::penalty_check(BOUNDED_HISTORIES, 5) {
        Ok(c) => {
            let mut detail = format!(
                "{} fixtures within {PENALTY_TOLERANCE:e}, {} failing; cp nonzero on {}/{} histories with column sums <= 1",
                c.fixtures,
                c.failures.len(),
                c.nonzero_bounded,
                c.bounded_histories
            );
            if let Some(f) = c.failures.first() {
                detail.push_str(&format!("; first {f}"));
            }
            Verdict::new("5 penalty formulas", c.passed(), detail)
        }
        Err(e) => failed("5 penalty formulas", e),
    }
}

fn rouge() -> Verdict {
    let c = oracles::rouge_check();
    let mut detail = format!(
        "ROUGE-L vs brute-force LCS on {} pairs, {} mismatches; ROUGE-N {} fixtures, {} failing",
        c.lcs_pairs,
        c.lcs_mismatches,
        c.fixtures,
        c.fixture_failures.len()
    );
    if let Some(m) = &c.first_lcs_mismatch {
        detail.push_str(&format!("; first LCS mismatch {m:?}"));
    }
    if let Some(f) = c.fixture_failures.first() {
        detail.push_str(&format!("; first fixture {f}"));
    }
    Verdict::new("6 ROUGE oracle", c.passed(), detail)
}

fn end_to_end(all: &mut Vec<Verdict>) -> Result<()> {
    let start = Instant::now();
    let split = scenarios::end_to_end_split()?;

    let o = scenarios::overfit(&split)?;
    report(
        Verdict::new(
            "7a overfit 50 documents",
            o.rouge1 >= OVERFIT_ROUGE1,
            format!("ROUGE-1 {:.2} (>= {OVERFIT_ROUGE1}); {:.0} s", o.rouge1, o.elapsed.as_secs_f64()),
        ),
        all,
    );

    let s = scenarios::selector_efficiency()?;
    let gap = (s.small.test_auc - s.large.test_auc).abs();
    report(
        Verdict::new(
            "7b selector AUC at 1k sentences",
            s.small.test_auc >= SELECTOR_AUC && gap <= SELECTOR_AUC_GAP,
            format!(
                "AUC {:.4} at {} sentences ({} epochs, {:.0} s) vs {:.4} at {} ({} epochs, {:.0} s); \
                 need >= {SELECTOR_AUC} and gap {gap:.4} <= {SELECTOR_AUC_GAP}",
                s.small.test_auc,
                s.small.sentences,
                s.small.epochs,
                s.small.elapsed.as_secs_f64(),
                s.large.test_auc,
                s.large.sentences,
                s.large.epochs,
                s.large.elapsed.as_secs_f64()
            ),
        ),
        all,
    );

    let model = scenarios::baseline(&split)?;
    let m = scenarios::mask_effect(&model, &split.held_out)?;
    let (pp, mp) = (m.plain.copied_word_precision, m.masked.copied_word_precision);
    let (pl, ml) = (m.plain.histogram.long_share(), m.masked.histogram.long_share());
    report(
        Verdict::new(
            "7c oracle mask on held-out data",
            matches!((pp, mp), (Some(p), Some(q)) if q > p) && ml < pl,
            format!(
                "copied-word precision {} -> {}; 11+ share {pl:.2}% -> {ml:.2}%; ROUGE-1 {:.2} -> {:.2} \
                 (epsilon {ORACLE_EPSILON}, beam {}; baseline trained in {:.0} s)",
                pp.map_or("n/a".into(), |v| format!("{v:.2}%")),
                mp.map_or("n/a".into(), |v| format!("{v:.2}%")),
                m.plain_rouge1,
                m.masked_rouge1,
                m.masked_beam,
                model.elapsed.as_secs_f64()
            ),
        ),
        all,
    );
    let elapsed = start.elapsed();
    report(
        Verdict::new(
            "7 end-to-end runtime",
            elapsed < END_TO_END_TIME_LIMIT,
            format!("{:.0} s (< {} s)", elapsed.as_secs_f64(), END_TO_END_TIME_LIMIT.as_secs()),
        ),
        all,
    );

    let a = scenarios::ablation(&model, &split.held_out)?;
    let lengths: Vec<String> = a.lengths.iter().map(|(al, l)| format!("{al}: {l:.2}")).collect();
    report(
        Verdict::new(
            "8a length penalty sweep",
            a.monotone_lengths(),
            format!("mean output length by alpha {{{}}}", lengths.join(", ")),
        ),
        all,
    );
    let drop = a.unblocked_rouge1 - a.blocked_rouge1;
    report(
        Verdict::new(
            "8b trigram blocking",
            drop <= BLOCKING_ROUGE1_DROP && a.blocked_repeats == 0,
            format!(
                "ROUGE-1 {:.2} blocked vs {:.2} unblocked (drop {drop:.2} <= {BLOCKING_ROUGE1_DROP}); \
                 outputs with repeated trigrams {} blocked, {} unblocked",
                a.blocked_rouge1, a.unblocked_rouge1, a.blocked_repeats, a.unblocked_repeats
            ),
        ),
        all,
    );

    let dir = tempfile::tempdir().map_err(|e| bottomup::Error::io(std::env::temp_dir().as_path(), e))?;
    let p = scenarios::persistence(&model, &split, dir.path())?;
    report(
        Verdict::new(
            "9 persistence",
            p.round_trip_identical && p.rerun_identical,
            format!(
                "checkpoint round trip {}; config echo rerun {}; {}",
                if p.round_trip_identical { "identical" } else { "differs" },
                if p.rerun_identical { "identical" } else { "differs" },
                p.detail
            ),
        ),
        all,
    );
    Ok(())
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut all = Vec::new();
    println!("acceptance criteria");
    report(gradient_suite(), &mut all);
    report(alignment(), &mut all);
    report(mask(), &mut all);
    report(beam(), &mut all);
    report(penalties(), &mut all);
    report(rouge(), &mut all);
    if let Err(e) = end_to_end(&mut all) {
        report(failed("7-9 end-to-end", e), &mut all);
    }
    let passed = all.iter().filter(|v| v.passed).count();
    println!(
        "{passed}/{} criteria passed in {:.0} s",
        all.len(),
        start.elapsed().as_secs_f64()
    );
    if passed == all.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
