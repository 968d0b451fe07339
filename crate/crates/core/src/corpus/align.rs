//! Copy-label alignment between a source document and its summary.
//!
//! A source position is tagged when the longest source span around it that
//! also appears contiguously in the summary is the first occurrence of that
//! span in the source.

/// Reusable scratch space so exhaustive sweeps do not allocate per pair.
#[derive(Debug, Default, Clone)]
pub struct Aligner {
    prev: Vec<usize>,
    cur: Vec<usize>,
    end_len: Vec<usize>,
}

impl Aligner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes one 0/1 tag per source token into `out`.
    pub fn align_into<T: Eq>(&mut self, source: &[T], target: &[T], out: &mut Vec<u8>) {
        let (n, m) = (source.len(), target.len());
        out.clear();
        out.resize(n, 0);
        if n == 0 || m == 0 {
            return;
        }

        // end_len[e]: length of the longest span ending at source position e
        // that occurs somewhere in the target (longest common suffix DP).
        self.prev.clear();
        self.prev.resize(m + 1, 0);
        self.cur.clear();
        self.cur.resize(m + 1, 0);
        self.end_len.clear();
        self.end_len.resize(n, 0);
        for (e, s) in source.iter().enumerate() {
            let mut best = 0;
            self.cur[0] = 0;
            for (j, t) in target.iter().enumerate() {
                let v = if s == t { self.prev[j] + 1 } else { 0 };
                self.cur[j + 1] = v;
                best = best.max(v);
            }
            self.end_len[e] = best;
            std::mem::swap(&mut self.prev, &mut self.cur);
        }

        for i in 0..n {
            // longest common span containing i; no span is longer than m
            let last = (i + m).min(n);
            let mut longest = 0;
            for r in i..last {
                if self.end_len[r] > r - i {
                    longest = longest.max(self.end_len[r]);
                }
            }
            if longest == 0 {
                continue;
            }
            for r in i..(i + longest).min(n) {
                if self.end_len[r] != longest || r + 1 < longest {
                    continue;
                }
                let start = r + 1 - longest;
                if start <= i && is_first_occurrence(source, start, longest) {
                    out[i] = 1;
                    break;
                }
            }
        }
    }
}

fn is_first_occurrence<T: Eq>(source: &[T], start: usize, len: usize) -> bool {
    let span = &source[start..start + len];
    !(0..start).any(|s| &source[s..s + len] == span)
}

/// Binary copy tags for `source` given `target`.
pub fn align_copy_labels<T: Eq>(source: &[T], target: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(source.len());
    Aligner::new().align_into(source, target, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token() {
        assert_eq!(align_copy_labels(&["a", "b", "c"], &["b"]), [0, 1, 0]);
    }

    #[test]
    fn earlier_spans_suppress_later_ones() {
        let src = ["the", "cat", "sat", "the", "cat", "ran"];
        assert_eq!(align_copy_labels(&src, &["the", "cat", "ran"]), [1, 1, 0, 1, 1, 1]);
    }

    #[test]
    fn no_overlap() {
        assert_eq!(align_copy_labels(&["x", "y"], &["q"]), [0, 0]);
    }

    #[test]
    fn repeated_span_labels_first_only() {
        let src = ["a", "b", "x", "a", "b"];
        assert_eq!(align_copy_labels(&src, &["a", "b"]), [1, 1, 0, 0, 0]);
    }

    #[test]
    fn empty_target() {
        assert_eq!(align_copy_labels::<&str>(&["a"], &[]), [0]);
    }
}
