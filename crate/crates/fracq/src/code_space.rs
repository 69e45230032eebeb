//! Finite words over {1..N}, truncated infinite codes, the
//! first-differing-symbol order, and mass-threshold antichains.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

/// Hard cap on antichain enumeration size.
const MAX_ANTICHAIN: usize = 20_000_000;

/// A finite word over the alphabet {1, ..., alphabet_size}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    symbols: Vec<u32>,
    alphabet: u32,
}

impl Word {
    pub fn new(symbols: Vec<u32>, alphabet: u32) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidInput(format!(
                "alphabet size must be at least 2, got {}",
                alphabet
            )));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s < 1 || s > alphabet) {
            return Err(Error::InvalidInput(format!(
                "symbol {} outside alphabet 1..={}",
                s, alphabet
            )));
        }
        Ok(Word { symbols, alphabet })
    }

    /// The empty word over the given alphabet.
    pub fn empty(alphabet: u32) -> Result<Self> {
        Word::new(Vec::new(), alphabet)
    }

    /// Convenience for the common small alphabets: "122" parses to [1,2,2].
    /// Only digits 1..=9 are meaningful here.
    pub fn parse(text: &str, alphabet: u32) -> Result<Self> {
        let mut symbols = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let d = ch.to_digit(10).ok_or_else(|| {
                Error::InvalidInput(format!("word character '{}' is not a digit", ch))
            })?;
            symbols.push(d);
        }
        Word::new(symbols, alphabet)
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        self.alphabet == other.alphabet
            && self.len() <= other.len()
            && self.symbols == other.symbols[..self.len()]
    }

    fn child(&self, symbol: u32) -> Word {
        let mut symbols = self.symbols.clone();
        symbols.push(symbol);
        Word {
            symbols,
            alphabet: self.alphabet,
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.alphabet <= 9 {
            for s in &self.symbols {
                write!(f, "{}", s)?;
            }
        } else {
            for (i, s) in self.symbols.iter().enumerate() {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{}", s)?;
            }
        }
        Ok(())
    }
}

/// How the finite word continues to an infinite code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailConvention {
    /// Repeat the final symbol of the word forever.
    RepeatLast,
    /// Continue with symbol 1 forever.
    RepeatMin,
    /// Continue with symbol N forever.
    RepeatMax,
}

/// An infinite code represented by a finite prefix plus a tail convention.
/// The truncation depth is the word length.
#[derive(Clone, Debug, PartialEq)]
pub struct CodePrefix {
    word: Word,
    tail: TailConvention,
}

impl CodePrefix {
    pub fn new(word: Word, tail: TailConvention) -> Self {
        CodePrefix { word, tail }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn tail_convention(&self) -> TailConvention {
        self.tail
    }

    pub fn truncation_depth(&self) -> usize {
        self.word.len()
    }

    pub fn alphabet_size(&self) -> u32 {
        self.word.alphabet_size()
    }

    /// Symbol of the represented infinite code at position `k` (0-based).
    pub fn symbol_at(&self, k: usize) -> Result<u32> {
        if k < self.word.len() {
            return Ok(self.word.symbols()[k]);
        }
        match self.tail {
            TailConvention::RepeatLast => self.word.symbols().last().copied().ok_or_else(|| {
                Error::InvalidInput(
                    "repeat-last tail on an empty word does not define a code".into(),
                )
            }),
            TailConvention::RepeatMin => Ok(1),
            TailConvention::RepeatMax => Ok(self.word.alphabet_size()),
        }
    }

    /// The first `depth` symbols as a word.
    pub fn expand(&self, depth: usize) -> Result<Word> {
        let mut symbols = Vec::with_capacity(depth);
        for k in 0..depth {
            symbols.push(self.symbol_at(k)?);
        }
        Word::new(symbols, self.word.alphabet_size())
    }

    /// Same code, re-truncated at `depth` (tail convention preserved).
    pub fn expand_prefix(&self, depth: usize) -> Result<CodePrefix> {
        Ok(CodePrefix::new(self.expand(depth)?, self.tail))
    }
}

/// Outcome of comparing two truncated codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeOrdering {
    Less,
    /// No symbol differed within the inspected depth.
    EqualToDepth,
    Greater,
}

/// Comparison result together with the depth certifying it: the index just
/// past the first differing symbol, or the full inspected depth for
/// `EqualToDepth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeComparison {
    pub ordering: CodeOrdering,
    pub certified_depth: usize,
}

/// Order on codes decided at the first differing symbol. Both prefixes are
/// expanded to one symbol past the longer truncation depth, so that pure
/// tail differences are still caught.
pub fn compare_codes(a: &CodePrefix, b: &CodePrefix) -> Result<CodeComparison> {
    if a.alphabet_size() != b.alphabet_size() {
        return Err(Error::InvalidInput(format!(
            "alphabet mismatch: {} vs {}",
            a.alphabet_size(),
            b.alphabet_size()
        )));
    }
    let depth = a.truncation_depth().max(b.truncation_depth()) + 1;
    for k in 0..depth {
        let sa = a.symbol_at(k)?;
        let sb = b.symbol_at(k)?;
        if sa != sb {
            let ordering = if sa < sb {
                CodeOrdering::Less
            } else {
                CodeOrdering::Greater
            };
            return Ok(CodeComparison {
                ordering,
                certified_depth: k + 1,
            });
        }
    }
    Ok(CodeComparison {
        ordering: CodeOrdering::EqualToDepth,
        certified_depth: depth,
    })
}

pub(crate) fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::InvalidInput(
            "probability vector needs at least 2 entries".into(),
        ));
    }
    if let Some(&p) = probs.iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "probabilities must be strictly positive, got {}",
            p
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "probabilities sum to {} (must be 1 within 1e-12)",
            sum
        )));
    }
    Ok(())
}

/// Product of symbol probabilities along the word; the empty word has mass 1.
pub fn word_probability(w: &Word, probs: &[f64]) -> Result<f64> {
    validate_probs(probs)?;
    if probs.len() != w.alphabet_size() as usize {
        return Err(Error::InvalidInput(format!(
            "probability vector length {} does not match alphabet size {}",
            probs.len(),
            w.alphabet_size()
        )));
    }
    Ok(w.symbols()
        .iter()
        .map(|&s| probs[(s - 1) as usize])
        .product())
}

/// A pairwise prefix-incomparable word set over a fixed alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct Antichain {
    words: Vec<Word>,
    alphabet: u32,
}

impl Antichain {
    /// Validates pairwise incomparability (which also excludes duplicates).
    pub fn new(words: Vec<Word>, alphabet: u32) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidInput(
                "alphabet size must be at least 2".into(),
            ));
        }
        if let Some(w) = words.iter().find(|w| w.alphabet_size() != alphabet) {
            return Err(Error::InvalidInput(format!(
                "word {} has alphabet size {}, expected {}",
                w,
                w.alphabet_size(),
                alphabet
            )));
        }
        let mut sorted: Vec<&Word> = words.iter().collect();
        sorted.sort();
        for pair in sorted.windows(2) {
            if pair[0].is_prefix_of(pair[1]) {
                return Err(Error::InvalidInput(format!(
                    "words {} and {} are comparable",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Antichain { words, alphabet })
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// The antichain Γ_ε = { σ : p_{σ⁻} ≥ ε > p_σ }, enumerated breadth-first
/// with children ordered 1..N. A node of mass exactly ε is expanded, not
/// kept: the strict inequality ε > p_σ is honored literally.
pub fn gamma_antichain(probs: &[f64], epsilon: f64) -> Result<Antichain> {
    validate_probs(probs)?;
    let min_p = probs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(epsilon > 0.0) || epsilon > min_p {
        return Err(Error::InvalidInput(format!(
            "epsilon must satisfy 0 < epsilon <= min(probs) = {}, got {}",
            min_p, epsilon
        )));
    }
    // |Γ_ε| ≤ 1/(ε · min(probs)); refuse enumerations beyond the cap.
    let bound = 1.0 / (epsilon * min_p);
    if bound > MAX_ANTICHAIN as f64 {
        return Err(Error::BudgetExceeded(format!(
            "antichain size bound {:.3e} exceeds the {} cap",
            bound, MAX_ANTICHAIN
        )));
    }
    let alphabet = probs.len() as u32;
    let mut members = Vec::new();
    let mut queue: VecDeque<(Word, f64)> = VecDeque::new();
    queue.push_back((Word::empty(alphabet)?, 1.0));
    while let Some((node, mass)) = queue.pop_front() {
        // Invariant: mass >= epsilon for every queued node.
        for s in 1..=alphabet {
            let child_mass = mass * probs[(s - 1) as usize];
            let child = node.child(s);
            if child_mass < epsilon {
                members.push(child);
            } else {
                queue.push_back((child, child_mass));
            }
        }
    }
    Antichain::new(members, alphabet)
}

/// True iff every infinite code has exactly one prefix in the antichain,
/// checked by an exact cover walk of the word tree.
pub fn is_maximal_antichain(g: &Antichain) -> bool {
    let mut sorted: Vec<&Word> = g.words().iter().collect();
    sorted.sort();
    !sorted.is_empty() && covers(&sorted, 0, g.alphabet_size())
}

/// Does the word set (sorted lexicographically, all sharing the length-
/// `depth` path taken so far) tile the full subtree below this node?
fn covers(words: &[&Word], depth: usize, alphabet: u32) -> bool {
    if words.is_empty() {
        return false;
    }
    if words[0].len() == depth {
        // A member ends exactly here; it must be the only word in range.
        return words.len() == 1;
    }
    // Partition by the symbol at `depth`; all N children must be covered.
    let mut start = 0;
    for symbol in 1..=alphabet {
        let end = start + words[start..].partition_point(|w| w.symbols()[depth] == symbol);
        if end == start || !covers(&words[start..end], depth + 1, alphabet) {
            return false;
        }
        start = end;
    }
    start == words.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(text: &str, n: u32) -> Word {
        Word::parse(text, n).unwrap()
    }

    #[test]
    fn word_validation() {
        assert!(Word::new(vec![1, 2, 3], 3).is_ok());
        assert!(Word::new(vec![0], 2).is_err());
        assert!(Word::new(vec![3], 2).is_err());
        assert!(Word::new(vec![], 1).is_err());
    }

    #[test]
    fn compare_first_symbol_decides() {
        // a = 2111..., b = 1222...
        let a = CodePrefix::new(w("2", 2), TailConvention::RepeatMin);
        let b = CodePrefix::new(w("1", 2), TailConvention::RepeatMax);
        let cmp = compare_codes(&a, &b).unwrap();
        assert_eq!(cmp.ordering, CodeOrdering::Greater);
        assert_eq!(cmp.certified_depth, 1);
    }

    #[test]
    fn compare_identical_codes() {
        let a = CodePrefix::new(w("1", 2), TailConvention::RepeatLast);
        let b = CodePrefix::new(w("1", 2), TailConvention::RepeatLast);
        let cmp = compare_codes(&a, &b).unwrap();
        assert_eq!(cmp.ordering, CodeOrdering::EqualToDepth);
    }

    #[test]
    fn compare_three_symbol_alphabet() {
        // a = 13222..., b = 2111... over N=3: less at the first symbol.
        let a = CodePrefix::new(w("13", 3), TailConvention::RepeatMax);
        let b = CodePrefix::new(w("2", 3), TailConvention::RepeatMin);
        assert_eq!(compare_codes(&a, &b).unwrap().ordering, CodeOrdering::Less);
    }

    #[test]
    fn compare_tail_difference_is_caught() {
        // Same word "1", different tails: 111... vs 122...
        let a = CodePrefix::new(w("1", 2), TailConvention::RepeatMin);
        let b = CodePrefix::new(w("1", 2), TailConvention::RepeatMax);
        let cmp = compare_codes(&a, &b).unwrap();
        assert_eq!(cmp.ordering, CodeOrdering::Less);
        assert_eq!(cmp.certified_depth, 2);
    }

    #[test]
    fn compare_alphabet_mismatch_rejected() {
        let a = CodePrefix::new(w("1", 2), TailConvention::RepeatMin);
        let b = CodePrefix::new(w("1", 3), TailConvention::RepeatMin);
        assert!(compare_codes(&a, &b).is_err());
    }

    #[test]
    fn word_probability_examples() {
        let probs = [0.5, 0.5];
        assert_eq!(
            word_probability(&Word::empty(2).unwrap(), &probs).unwrap(),
            1.0
        );
        let third = [1.0 / 3.0, 2.0 / 3.0];
        let p = word_probability(&w("12", 2), &third).unwrap();
        assert!((p - 2.0 / 9.0).abs() < 1e-15);
        // Hand oracle: .7 * .7 * .3 = 0.147.
        let p = word_probability(&w("221", 2), &[0.3, 0.7]).unwrap();
        assert!((p - 0.147).abs() < 1e-15);
    }

    #[test]
    fn word_probability_rejects_bad_vectors() {
        assert!(word_probability(&w("1", 2), &[0.5, 0.6]).is_err());
        assert!(word_probability(&w("1", 2), &[1.0, 0.0]).is_err());
        assert!(word_probability(&w("1", 2), &[0.2, 0.3, 0.5]).is_err());
    }

    #[test]
    fn gamma_expands_nodes_at_exact_threshold() {
        // p_1 = 0.5 is not < 0.5, so depth-1 nodes are expanded.
        let g = gamma_antichain(&[0.5, 0.5], 0.5).unwrap();
        let expected: Vec<Word> = ["11", "12", "21", "22"].iter().map(|t| w(t, 2)).collect();
        assert_eq!(g.words(), &expected[..]);
    }

    #[test]
    fn gamma_depth_two_for_smaller_epsilon() {
        let g = gamma_antichain(&[0.5, 0.5], 0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.words().iter().all(|word| word.len() == 2));
    }

    #[test]
    fn gamma_uniform_thirds() {
        let third = 1.0 / 3.0;
        let g = gamma_antichain(&[third, third, third], third).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.words().iter().all(|word| word.len() == 2));
    }

    #[test]
    fn gamma_rejects_epsilon_out_of_range() {
        assert!(gamma_antichain(&[0.5, 0.5], 0.0).is_err());
        assert!(gamma_antichain(&[0.3, 0.7], 0.31).is_err());
    }

    #[test]
    fn gamma_mass_identity_and_bound() {
        let probs = [0.2, 0.3, 0.5];
        let eps = 0.11;
        let g = gamma_antichain(&probs, eps).unwrap();
        let mass: f64 = g
            .words()
            .iter()
            .map(|word| word_probability(word, &probs).unwrap())
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((g.len() as f64) <= 1.0 / (eps * 0.2) + 1e-9);
        assert!(is_maximal_antichain(&g));
    }

    #[test]
    fn antichain_rejects_comparable_words() {
        assert!(Antichain::new(vec![w("1", 2), w("12", 2)], 2).is_err());
        assert!(Antichain::new(vec![w("1", 2), w("1", 2)], 2).is_err());
        assert!(Antichain::new(vec![w("1", 2), w("21", 2)], 2).is_ok());
    }

    #[test]
    fn maximality_examples() {
        let full = Antichain::new(vec![w("1", 2), w("21", 2), w("22", 2)], 2).unwrap();
        assert!(is_maximal_antichain(&full));
        let partial = Antichain::new(vec![w("1", 2), w("21", 2)], 2).unwrap();
        assert!(!is_maximal_antichain(&partial));
        let root_only = Antichain::new(vec![Word::empty(2).unwrap()], 2).unwrap();
        assert!(is_maximal_antichain(&root_only));
        let empty = Antichain::new(vec![], 2).unwrap();
        assert!(!is_maximal_antichain(&empty));
    }

    #[test]
    fn expand_prefix_repeats_tail() {
        let c = CodePrefix::new(w("12", 2), TailConvention::RepeatLast);
        let e = c.expand(5).unwrap();
        assert_eq!(e.symbols(), &[1, 2, 2, 2, 2]);
        let c = CodePrefix::new(Word::empty(2).unwrap(), TailConvention::RepeatLast);
        assert!(c.expand(1).is_err());
    }
}
