//! Symbols, alphabets and sample corpora.
//!
//! The corpus text format is one sample per line with whitespace-separated
//! symbols. Repeated lines encode multiplicity, a blank line is the empty
//! string, and lines starting with `#` are comments.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// An output symbol. Non-empty and free of whitespace.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(token: &str) -> Result<Self> {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidSymbol(token.to_string()));
        }
        Ok(Symbol(Arc::from(token)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A string of output symbols.
pub type Sample = Vec<Symbol>;

/// Parses a whitespace-separated sample, e.g. `"a b a"`.
pub fn sample(text: &str) -> Result<Sample> {
    text.split_whitespace().map(Symbol::new).collect()
}

/// Builds a sample from single-character symbols, e.g. `"aba"`.
pub fn chars(text: &str) -> Sample {
    text.chars()
        .map(|c| Symbol::new(&c.to_string()).expect("non-whitespace character"))
        .collect()
}

/// Formats a sample in corpus-line form.
pub fn display_sample(x: &[Symbol]) -> String {
    x.iter().map(Symbol::as_str).collect::<Vec<_>>().join(" ")
}

/// Ordered symbol set. Symbol ids are positions in this order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = Symbol>>(symbols: I) -> Self {
        let set: BTreeSet<Symbol> = symbols.into_iter().collect();
        let symbols: Vec<Symbol> = set.into_iter().collect();
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Alphabet { symbols, index }
    }

    /// Keeps the given order instead of sorting.
    pub fn ordered(symbols: Vec<Symbol>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate symbol `{s}` in alphabet")));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    pub fn from_chars(text: &str) -> Self {
        Alphabet::new(chars(text))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, id: usize) -> &Symbol {
        &self.symbols[id]
    }

    pub fn id(&self, s: &Symbol) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn encode(&self, x: &[Symbol]) -> Result<Vec<usize>> {
        x.iter()
            .map(|s| {
                self.id(s)
                    .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Sample {
        ids.iter().map(|&i| self.symbols[i].clone()).collect()
    }

    pub fn union(&self, other: &Alphabet) -> Alphabet {
        Alphabet::new(self.symbols.iter().chain(other.symbols.iter()).cloned())
    }
}

/// A sequence of samples in arrival order. Repeats encode multiplicity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    samples: Vec<Sample>,
}

impl Corpus {
    pub fn new(samples: Vec<Sample>) -> Self {
        Corpus { samples }
    }

    /// Corpus of single-character-symbol strings.
    pub fn from_chars(strings: &[&str]) -> Self {
        Corpus::new(strings.iter().map(|s| chars(s)).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for line in text.lines() {
            if line.trim_start().starts_with('#') {
                continue;
            }
            samples.push(sample(line)?);
        }
        Ok(Corpus { samples })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for x in &self.samples {
            out.push_str(&display_sample(x));
            out.push('\n');
        }
        out
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, x: Sample) {
        self.samples.push(x);
    }

    pub fn extend(&mut self, other: &Corpus) {
        self.samples.extend(other.samples.iter().cloned());
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Distinct samples with multiplicities, in order of first occurrence.
    pub fn distinct(&self) -> Vec<(Sample, usize)> {
        let mut order: Vec<(Sample, usize)> = Vec::new();
        let mut seen: HashMap<&[Symbol], usize> = HashMap::new();
        for x in &self.samples {
            match seen.get(x.as_slice()) {
                Some(&i) => order[i].1 += 1,
                None => {
                    seen.insert(x.as_slice(), order.len());
                    order.push((x.clone(), 1));
                }
            }
        }
        order
    }

    /// Multiset view keyed by sample.
    pub fn multiset(&self) -> BTreeMap<Sample, usize> {
        let mut m = BTreeMap::new();
        for x in &self.samples {
            *m.entry(x.clone()).or_insert(0) += 1;
        }
        m
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.samples.iter().flatten().cloned())
    }

    pub fn max_len(&self) -> usize {
        self.samples.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Total symbol count.
    pub fn symbol_count(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    /// Splits at `at`: the first `at` samples and the rest.
    pub fn split_at(&self, at: usize) -> (Corpus, Corpus) {
        let at = at.min(self.samples.len());
        (
            Corpus::new(self.samples[..at].to_vec()),
            Corpus::new(self.samples[at..].to_vec()),
        )
    }
}

impl FromIterator<Sample> for Corpus {
    fn from_iter<I: IntoIterator<Item = Sample>>(iter: I) -> Self {
        Corpus::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_reject_whitespace_and_empty() {
        assert!(Symbol::new("").is_err());
        assert!(Symbol::new("a b").is_err());
        assert!(Symbol::new("tcl").is_ok());
    }

    #[test]
    fn corpus_format() {
        let text = "# comment\na b\n\na b\n  # indented comment\nb\n";
        let c = Corpus::parse(text).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.samples()[1].is_empty());
        let d = c.distinct();
        assert_eq!(d.len(), 3);
        assert_eq!(d[0], (chars("ab"), 2));
        assert_eq!(Corpus::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn empty_text_is_empty_corpus() {
        assert!(Corpus::parse("").unwrap().is_empty());
        assert_eq!(Corpus::parse("\n").unwrap().len(), 1);
    }

    #[test]
    fn alphabet_encoding() {
        let a = Alphabet::from_chars("cab");
        assert_eq!(a.symbols(), &chars("abc")[..]);
        assert_eq!(a.encode(&chars("cab")).unwrap(), vec![2, 0, 1]);
        assert_eq!(
            a.encode(&chars("d")),
            Err(Error::UnknownSymbol("d".to_string()))
        );
    }
}
