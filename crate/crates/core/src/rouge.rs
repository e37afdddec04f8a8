//! Rouge-L: longest-common-subsequence F-measure over normalized word tokens.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RougeError {
    #[error("reference list is empty")]
    EmptyReferences,
}

/// Normalized word tokens, as produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercases `text`, splits on Unicode whitespace, and trims leading and
/// trailing non-alphanumeric characters from each piece. Pieces left empty
/// after trimming are dropped.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(
        text.split_whitespace()
            .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|t| !t.is_empty())
            .collect(),
    )
}

/// Length of the longest common subsequence, using two DP rows sized by the
/// shorter input.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            curr[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(curr[j]) };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// F-measure from an LCS length and the two sequence lengths.
///
/// `beta` weights recall over precision; `beta = 1` is the harmonic mean.
pub fn f_measure(lcs: usize, candidate_len: usize, reference_len: usize, beta: f64) -> f64 {
    if lcs == 0 || candidate_len == 0 || reference_len == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / candidate_len as f64;
    let recall = lcs as f64 / reference_len as f64;
    let b2 = beta * beta;
    (1.0 + b2) * precision * recall / (recall + b2 * precision)
}

pub fn rouge_l_tokens(candidate: &TokenSequence, reference: &TokenSequence, beta: f64) -> f64 {
    let lcs = lcs_length(candidate.tokens(), reference.tokens());
    f_measure(lcs, candidate.len(), reference.len(), beta)
}

pub fn rouge_l_beta(candidate: &str, reference: &str, beta: f64) -> f64 {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference), beta)
}

/// Rouge-L F1 between two strings.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    rouge_l_beta(candidate, reference, 1.0)
}

pub fn rouge_l_max_beta(candidate: &str, references: &[String], beta: f64) -> Result<f64, RougeError> {
    if references.is_empty() {
        return Err(RougeError::EmptyReferences);
    }
    let cand = tokenize(candidate);
    Ok(references
        .iter()
        .map(|r| rouge_l_tokens(&cand, &tokenize(r), beta))
        .fold(0.0, f64::max))
}

/// Best Rouge-L F1 of `candidate` against any of `references`.
pub fn rouge_l_max(candidate: &str, references: &[String]) -> Result<f64, RougeError> {
    rouge_l_max_beta(candidate, references, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    /// Exhaustive oracle: longest subsequence of `a` that is also a
    /// subsequence of `b`, by enumerating all 2^|a| subsets.
    fn lcs_enumerate(a: &[u8], b: &[u8]) -> usize {
        let is_subseq = |s: &[u8]| {
            let mut it = b.iter();
            s.iter().all(|x| it.any(|y| y == x))
        };
        (0u32..(1 << a.len()))
            .map(|mask| {
                (0..a.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| a[i])
                    .collect::<Vec<_>>()
            })
            .filter(|s| is_subseq(s))
            .map(|s| s.len())
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn tokenizer_normalizes() {
        assert_eq!(tokenize("The cat sat.").tokens(), toks(&["the", "cat", "sat"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("  A  B ").tokens(), toks(&["a", "b"]));
        assert_eq!(
            tokenize("\"Paris,\" (France)! -- ?").tokens(),
            toks(&["paris", "france"])
        );
        assert_eq!(tokenize("don't U.S.").tokens(), toks(&["don't", "u.s"]));
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_length(&toks(&["a", "b", "c"]), &toks(&["a", "b", "c"])), 3);
        assert_eq!(lcs_length(&toks(&["a", "b", "c"]), &toks(&["d", "e", "f"])), 0);
        let a = toks(&["the", "cat", "sat", "on", "the", "mat"]);
        let b = toks(&["the", "cat", "is", "on", "the", "mat"]);
        assert_eq!(lcs_length(&a, &b), 5);
        assert_eq!(lcs_enumerate(b"abcdea", b"abfdea"), 5);
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge_l("the cat sat", "the cat sat"), 1.0);
        assert_eq!(rouge_l("a b c", "x y z"), 0.0);
        let r = rouge_l("the cat sat on the mat", "the cat is on the mat");
        assert!((r - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(rouge_l("", "x"), 0.0);
        assert_eq!(rouge_l("x", ""), 0.0);
    }

    #[test]
    fn beta_weights_recall() {
        // P = 1/1, R = 1/4
        let f1 = rouge_l_beta("a", "a b c d", 1.0);
        let f2 = rouge_l_beta("a", "a b c d", 2.0);
        assert!((f1 - 0.4).abs() < 1e-12);
        assert!((f2 - 5.0 * 0.25 / (0.25 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn max_over_references() {
        let refs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(rouge_l_max("x", &refs(&["x", "y"])).unwrap(), 1.0);
        assert_eq!(rouge_l_max("x", &refs(&["y"])).unwrap(), 0.0);
        let cand = "a b c d e";
        let low = "a x y z w";
        let high = "a b c d x";
        assert!((rouge_l(cand, low) - 0.2).abs() < 1e-12);
        assert!((rouge_l(cand, high) - 0.8).abs() < 1e-12);
        assert!((rouge_l_max(cand, &refs(&[low, high])).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(rouge_l_max("x", &[]), Err(RougeError::EmptyReferences));
    }

    proptest! {
        #[test]
        fn lcs_matches_enumeration(a in prop::collection::vec(0u8..3, 0..=8), b in prop::collection::vec(0u8..3, 0..=8)) {
            prop_assert_eq!(lcs_length(&a, &b), lcs_enumerate(&a, &b));
        }

        #[test]
        fn lcs_symmetric_and_monotone(a in prop::collection::vec(0u8..4, 0..20), b in prop::collection::vec(0u8..4, 0..20), t in 0u8..4) {
            let l = lcs_length(&a, &b);
            prop_assert_eq!(l, lcs_length(&b, &a));
            let mut a2 = a.clone();
            a2.push(t);
            prop_assert!(lcs_length(&a2, &b) >= l);
        }

        #[test]
        fn rouge_bounded_and_reflexive(x in "[a-c ]{0,30}", y in "[a-c ]{0,30}") {
            let r = rouge_l(&x, &y);
            prop_assert!((0.0..=1.0).contains(&r));
            if !tokenize(&x).is_empty() {
                prop_assert_eq!(rouge_l(&x, &x), 1.0);
            }
        }
    }
}
