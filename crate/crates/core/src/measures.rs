//! Vocabularies, documents as discrete probability measures over the
//! vocabulary, and labeled corpora with train/validation/test splits.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Allowed deviation of a document's total mass from one.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Result<Self> {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord(w.clone()));
            }
        }
        Ok(Vocabulary { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, position: usize) -> Option<&str> {
        self.words.get(position).map(String::as_str)
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Hex digest identifying the ordered word list. Trees and checkpoints
    /// record it so they are never applied to a different vocabulary.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update(w.as_bytes());
            hasher.update([0u8]);
        }
        hasher.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

/// Normalized bag-of-words: a sparse probability vector over vocabulary
/// positions, stored sorted by position, with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    entries: Vec<(usize, f64)>,
    label: Option<i64>,
}

impl Document {
    /// Checked constructor. Entries may come in any order; positions must be
    /// unique and below `n_leaf`, masses positive and summing to one.
    pub fn new(mut entries: Vec<(usize, f64)>, label: Option<i64>, n_leaf: usize) -> Result<Self> {
        entries.sort_by_key(|&(p, _)| p);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidDocument(format!("position {} repeated", w[0].0)));
            }
        }
        let doc = Document { entries, label };
        if let Some(issue) = doc.issues(n_leaf).into_iter().next() {
            return Err(Error::InvalidDocument(issue.to_string()));
        }
        Ok(doc)
    }

    /// Builds a document without checking the simplex constraint. Used for
    /// data that is validated later through [`validate_corpus`].
    pub fn new_unchecked(mut entries: Vec<(usize, f64)>, label: Option<i64>) -> Self {
        entries.sort_by_key(|&(p, _)| p);
        Document { entries, label }
    }

    pub fn from_dense(masses: &[f64], label: Option<i64>) -> Result<Self> {
        let entries = masses.iter().enumerate().filter(|(_, &m)| m != 0.0).map(|(i, &m)| (i, m)).collect();
        Document::new(entries, label, masses.len())
    }

    /// Point mass on a single word.
    pub fn dirac(position: usize, label: Option<i64>) -> Self {
        Document { entries: vec![(position, 1.0)], label }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn label(&self) -> Option<i64> {
        self.label
    }

    pub fn with_label(mut self, label: Option<i64>) -> Self {
        self.label = label;
        self
    }

    /// Number of distinct words.
    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn mass(&self, position: usize) -> f64 {
        match self.entries.binary_search_by_key(&position, |&(p, _)| p) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    pub fn max_position(&self) -> Option<usize> {
        self.entries.last().map(|&(p, _)| p)
    }

    pub fn dense(&self, n_leaf: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_leaf];
        for &(p, m) in &self.entries {
            out[p] = m;
        }
        out
    }

    pub(crate) fn check_dim(&self, n_leaf: usize) -> Result<()> {
        match self.max_position() {
            Some(p) if p >= n_leaf => Err(Error::DimensionMismatch { expected: n_leaf, got: p + 1 }),
            _ => Ok(()),
        }
    }

    fn issues(&self, n_leaf: usize) -> Vec<DocumentIssue> {
        let mut out = Vec::new();
        for &(p, m) in &self.entries {
            if p >= n_leaf {
                out.push(DocumentIssue::PositionOutOfRange { position: p, n_leaf });
            }
            if !(m > 0.0 && m.is_finite()) {
                out.push(DocumentIssue::NonPositiveMass { position: p, mass: m });
            }
        }
        let sum = self.total_mass();
        if !((sum - 1.0).abs() <= SIMPLEX_TOL) {
            out.push(DocumentIssue::MassSum { sum });
        }
        out
    }
}

/// Dense `a - b` over `n_leaf` positions.
pub fn difference(a: &Document, b: &Document, n_leaf: usize) -> Vec<f64> {
    let mut out = a.dense(n_leaf);
    for &(p, m) in b.entries() {
        out[p] -= m;
    }
    out
}

/// Handling of tokens missing from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownTokenPolicy {
    #[default]
    Drop,
    Error,
}

/// Turns token counts into a normalized bag-of-words. Repeated tokens are
/// summed. Masses are `count / total`, so scaling every count by the same
/// integer gives a bitwise identical document.
pub fn normalize_counts<K: AsRef<str>>(
    counts: impl IntoIterator<Item = (K, f64)>,
    vocab: &Vocabulary,
    policy: UnknownTokenPolicy,
    label: Option<i64>,
) -> Result<Document> {
    let mut by_position: BTreeMap<usize, f64> = BTreeMap::new();
    for (token, count) in counts {
        let token = token.as_ref();
        if !(count >= 0.0 && count.is_finite()) {
            return Err(Error::InvalidDocument(format!("count for `{token}` is {count}")));
        }
        match vocab.position(token) {
            Some(p) => *by_position.entry(p).or_insert(0.0) += count,
            None => match policy {
                UnknownTokenPolicy::Drop => {}
                UnknownTokenPolicy::Error => return Err(Error::UnknownToken(token.to_string())),
            },
        }
    }
    by_position.retain(|_, c| *c > 0.0);
    let total: f64 = by_position.values().sum();
    if by_position.is_empty() || total <= 0.0 {
        return Err(Error::EmptyDocument);
    }
    let entries = by_position.into_iter().map(|(p, c)| (p, c / total)).collect();
    Ok(Document { entries, label })
}

/// Dense copy of `doc` multiplied by `factor`, without renormalizing.
/// Training uses this to keep per-word masses away from zero in long
/// documents.
pub fn scale_measure(doc: &Document, factor: f64, n_leaf: usize) -> Vec<f64> {
    assert!(factor > 0.0, "scale factor must be positive, got {factor}");
    let mut out = vec![0.0; n_leaf];
    for &(p, m) in doc.entries() {
        out[p] = factor * m;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn get(&self, part: SplitPart) -> &[usize] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Valid => &self.valid,
            SplitPart::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Valid,
    Test,
}

impl SplitPart {
    pub fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Valid => "valid",
            SplitPart::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub vocabulary: Vocabulary,
    pub documents: Vec<Document>,
    pub split: Split,
}

impl LabeledCorpus {
    pub fn new(vocabulary: Vocabulary, documents: Vec<Document>, split: Split) -> Self {
        LabeledCorpus { vocabulary, documents, split }
    }

    pub fn n_leaf(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn documents_in(&self, part: SplitPart) -> impl Iterator<Item = &Document> + '_ {
        self.split.get(part).iter().map(move |&i| &self.documents[i])
    }

    /// Distinct labels present in a split, sorted.
    pub fn labels_in(&self, part: SplitPart) -> Vec<i64> {
        let mut labels: Vec<i64> = self.documents_in(part).filter_map(Document::label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Moves a seeded random `fraction` of the training split into the
    /// validation split. At least one document stays on each side.
    pub fn carve_validation(&self, fraction: f64, seed: u64) -> Result<LabeledCorpus> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("validation fraction {fraction} not in (0,1)")));
        }
        if self.split.train.len() < 2 {
            return Err(Error::EmptySplit("train split needs at least two documents to carve validation"));
        }
        let mut train = self.split.train.clone();
        train.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_valid = ((train.len() as f64 * fraction).round() as usize).clamp(1, train.len() - 1);
        let mut valid = train.split_off(train.len() - n_valid);
        train.sort_unstable();
        valid.sort_unstable();
        let mut split = self.split.clone();
        split.train = train;
        split.valid.extend(valid);
        split.valid.sort_unstable();
        Ok(LabeledCorpus { vocabulary: self.vocabulary.clone(), documents: self.documents.clone(), split })
    }

    /// Draws a fresh train/test split from every document in the current
    /// split, keeping the test size. The validation split comes back empty.
    pub fn resample_split(&self, seed: u64) -> Result<LabeledCorpus> {
        let s = &self.split;
        let mut pool: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
        if s.test.is_empty() || pool.len() <= s.test.len() {
            return Err(Error::EmptySplit("resampling needs nonempty train and test splits"));
        }
        pool.sort_unstable();
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut test = pool.split_off(pool.len() - s.test.len());
        pool.sort_unstable();
        test.sort_unstable();
        let split = Split { train: pool, valid: vec![], test };
        Ok(LabeledCorpus { vocabulary: self.vocabulary.clone(), documents: self.documents.clone(), split })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DocumentIssue {
    PositionOutOfRange { position: usize, n_leaf: usize },
    NonPositiveMass { position: usize, mass: f64 },
    MassSum { sum: f64 },
}

impl fmt::Display for DocumentIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocumentIssue::PositionOutOfRange { position, n_leaf } => {
                write!(f, "position {position} outside vocabulary of size {n_leaf}")
            }
            DocumentIssue::NonPositiveMass { position, mass } => {
                write!(f, "mass {mass} at position {position} is not positive")
            }
            DocumentIssue::MassSum { sum } => {
                write!(f, "masses sum to {sum} (deviation {:+e})", sum - 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusIssue {
    Document { document: usize, issue: DocumentIssue },
    SplitIndexOutOfRange { split: &'static str, index: usize },
    DuplicateInSplit { split: &'static str, index: usize },
    SplitOverlap { first: &'static str, second: &'static str, indices: Vec<usize> },
}

impl fmt::Display for CorpusIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusIssue::Document { document, issue } => write!(f, "document {document}: {issue}"),
            CorpusIssue::SplitIndexOutOfRange { split, index } => {
                write!(f, "{split} split references missing document {index}")
            }
            CorpusIssue::DuplicateInSplit { split, index } => write!(f, "{split} split lists document {index} twice"),
            CorpusIssue::SplitOverlap { first, second, indices } => {
                write!(f, "{first} and {second} splits overlap at {indices:?}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<CorpusIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return writeln!(f, "corpus is valid");
        }
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn validate_corpus(corpus: &LabeledCorpus) -> ValidationReport {
    let n_leaf = corpus.n_leaf();
    let mut issues = Vec::new();
    for (i, doc) in corpus.documents.iter().enumerate() {
        issues.extend(doc.issues(n_leaf).into_iter().map(|issue| CorpusIssue::Document { document: i, issue }));
    }
    let parts = [SplitPart::Train, SplitPart::Valid, SplitPart::Test];
    for part in parts {
        let mut seen = std::collections::HashSet::new();
        for &idx in corpus.split.get(part) {
            if idx >= corpus.documents.len() {
                issues.push(CorpusIssue::SplitIndexOutOfRange { split: part.name(), index: idx });
            }
            if !seen.insert(idx) {
                issues.push(CorpusIssue::DuplicateInSplit { split: part.name(), index: idx });
            }
        }
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let first: std::collections::BTreeSet<usize> = corpus.split.get(parts[a]).iter().copied().collect();
        let indices: Vec<usize> = corpus
            .split
            .get(parts[b])
            .iter()
            .copied()
            .filter(|i| first.contains(i))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if !indices.is_empty() {
            issues.push(CorpusIssue::SplitOverlap { first: parts[a].name(), second: parts[b].name(), indices });
        }
    }
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new(["piano", "flute", "a", "b"]).unwrap()
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(matches!(Vocabulary::new(["x", "x"]), Err(Error::DuplicateWord(_))));
        assert!(matches!(Vocabulary::new(Vec::<String>::new()), Err(Error::EmptyVocabulary)));
        let v = vocab();
        for (i, w) in v.words().iter().enumerate() {
            assert_eq!(v.position(w), Some(i));
        }
    }

    #[test]
    fn normalize_examples() {
        let v = vocab();
        let d = normalize_counts([("piano", 2.0), ("flute", 2.0)], &v, UnknownTokenPolicy::Error, None).unwrap();
        assert_eq!(d.entries(), &[(0, 0.5), (1, 0.5)]);
        let d = normalize_counts([("piano", 1.0)], &v, UnknownTokenPolicy::Error, None).unwrap();
        assert_eq!(d.entries(), &[(0, 1.0)]);
        let d = normalize_counts([("a", 1.0), ("b", 3.0)], &v, UnknownTokenPolicy::Error, None).unwrap();
        assert_eq!(d.entries(), &[(2, 0.25), (3, 0.75)]);
    }

    #[test]
    fn normalize_errors() {
        let v = vocab();
        assert!(matches!(
            normalize_counts([("piano", 0.0)], &v, UnknownTokenPolicy::Error, None),
            Err(Error::EmptyDocument)
        ));
        assert!(matches!(
            normalize_counts([("cello", 1.0)], &v, UnknownTokenPolicy::Error, None),
            Err(Error::UnknownToken(t)) if t == "cello"
        ));
        let d = normalize_counts([("cello", 1.0), ("a", 1.0)], &v, UnknownTokenPolicy::Drop, None).unwrap();
        assert_eq!(d.entries(), &[(2, 1.0)]);
        assert!(matches!(
            normalize_counts([("cello", 1.0)], &v, UnknownTokenPolicy::Drop, None),
            Err(Error::EmptyDocument)
        ));
    }

    #[test]
    fn scale_examples() {
        let d = Document::new(vec![(0, 0.5), (1, 0.5)], None, 4).unwrap();
        assert_eq!(scale_measure(&d, 5.0, 4), vec![2.5, 2.5, 0.0, 0.0]);
        assert_eq!(scale_measure(&d, 1.0, 4), d.dense(4));
        assert_eq!(scale_measure(&Document::dirac(2, None), 2.0, 4), vec![0.0, 0.0, 2.0, 0.0]);
    }

    fn corpus(docs: Vec<Document>, split: Split) -> LabeledCorpus {
        LabeledCorpus::new(vocab(), docs, split)
    }

    #[test]
    fn validation_reports() {
        let good = Document::new(vec![(0, 1.0)], Some(0), 4).unwrap();
        let c = corpus(vec![good.clone(), good.clone()], Split { train: vec![0], valid: vec![], test: vec![1] });
        assert!(validate_corpus(&c).is_valid());

        let bad = Document::new_unchecked(vec![(1, 0.9)], Some(1));
        let c = corpus(vec![good.clone(), bad], Split::default());
        let report = validate_corpus(&c);
        assert_eq!(report.issues.len(), 1);
        match &report.issues[0] {
            CorpusIssue::Document { document: 1, issue: DocumentIssue::MassSum { sum } } => {
                assert!((sum - 0.9).abs() < 1e-15)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(report.to_string().contains("document 1"));

        let c = corpus(
            vec![good.clone(), good.clone(), good],
            Split { train: vec![0, 1], valid: vec![], test: vec![1, 2] },
        );
        let report = validate_corpus(&c);
        assert_eq!(report.issues, vec![CorpusIssue::SplitOverlap { first: "train", second: "test", indices: vec![1] }]);
    }

    #[test]
    fn carve_keeps_splits_disjoint() {
        let docs: Vec<Document> = (0..10).map(|i| Document::dirac(i % 4, Some(i as i64 % 2))).collect();
        let c = corpus(docs, Split { train: (0..10).collect(), valid: vec![], test: vec![] });
        let carved = c.carve_validation(0.2, 3).unwrap();
        assert_eq!(carved.split.valid.len(), 2);
        assert_eq!(carved.split.train.len(), 8);
        assert!(validate_corpus(&carved).is_valid());
        assert_eq!(carved.split, c.carve_validation(0.2, 3).unwrap().split);
    }

    proptest! {
        #[test]
        fn normalize_is_scale_invariant(counts in proptest::collection::vec(0u32..50, 4), k in 1u32..1000) {
            prop_assume!(counts.iter().any(|&c| c > 0));
            let v = vocab();
            let base: Vec<(&str, f64)> = v.words().iter().map(String::as_str).zip(counts.iter().map(|&c| c as f64)).collect();
            let scaled: Vec<(&str, f64)> = base.iter().map(|&(w, c)| (w, c * k as f64)).collect();
            let a = normalize_counts(base, &v, UnknownTokenPolicy::Error, None).unwrap();
            let b = normalize_counts(scaled, &v, UnknownTokenPolicy::Error, None).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!((a.total_mass() - 1.0).abs() <= SIMPLEX_TOL);
            prop_assert!(a.entries().iter().all(|&(_, m)| m > 0.0));
        }
    }
}
