//! Corpus, split and embedding files, plus the synthetic instruments corpus.
//!
//! Corpus files hold one JSON object per line. An optional first line
//! `{"vocabulary": [...]}` fixes the vocabulary and its order; otherwise it
//! is the union of tokens in order of first appearance. Each record is
//! either `{"label": 3, "tokens": {"word": 2, ...}}` (counts, normalized on
//! load) or `{"label": 3, "masses": {"word": 0.25, ...}}` (already on the
//! simplex, kept as written). `label` may be omitted or null. Blank lines are
//! ignored. [`save_corpus`] writes the header and masses, so a saved corpus
//! loads back bitwise.
//!
//! Split files list document indices under the headers `train:`, `valid:`
//! and `test:`, separated by any whitespace.
//!
//! Embedding files are text: an optional `<count> <dim>` header line, then
//! `<word> <f1> ... <fD>` per line.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::PointCloud;
use crate::error::{Error, Result};
use crate::measures::{normalize_counts, Document, LabeledCorpus, Split, UnknownTokenPolicy, Vocabulary};

enum Record {
    Header(Vec<String>),
    Tokens(Option<i64>, Vec<(String, f64)>),
    Masses(Option<i64>, Vec<(String, f64)>),
}

fn parse_record(line: usize, text: &str) -> Result<Record> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::parse(line, e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| Error::parse(line, "record is not a JSON object"))?;
    if let Some(v) = obj.get("vocabulary") {
        let words = v
            .as_array()
            .and_then(|a| a.iter().map(|w| w.as_str().map(String::from)).collect::<Option<Vec<_>>>())
            .ok_or_else(|| Error::parse(line, "vocabulary must be an array of strings"))?;
        return Ok(Record::Header(words));
    }
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_i64().ok_or_else(|| Error::parse(line, format!("label {v} is not an integer")))?),
    };
    let entries = |key: &str, v: &Value| -> Result<Vec<(String, f64)>> {
        let map = v.as_object().ok_or_else(|| Error::parse(line, format!("`{key}` must be an object")))?;
        map.iter()
            .map(|(w, c)| {
                c.as_f64()
                    .map(|c| (w.clone(), c))
                    .ok_or_else(|| Error::parse(line, format!("value for `{w}` is not a number")))
            })
            .collect()
    };
    match (obj.get("tokens"), obj.get("masses")) {
        (Some(t), None) => Ok(Record::Tokens(label, entries("tokens", t)?)),
        (None, Some(m)) => Ok(Record::Masses(label, entries("masses", m)?)),
        (Some(_), Some(_)) => Err(Error::parse(line, "record has both `tokens` and `masses`")),
        (None, None) => Err(Error::parse(line, "record has neither `tokens` nor `masses`")),
    }
}

/// Reads a corpus; every document lands in the training split.
pub fn read_corpus(reader: impl Read) -> Result<LabeledCorpus> {
    let mut header: Option<Vec<String>> = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line_no, &line)? {
            Record::Header(words) => {
                if header.is_some() || !records.is_empty() {
                    return Err(Error::parse(line_no, "vocabulary header must be the first record"));
                }
                header = Some(words);
            }
            r => records.push((line_no, r)),
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocabulary = match header {
        Some(words) => Vocabulary::new(words)?,
        None => {
            let mut seen = HashSet::new();
            let mut words = Vec::new();
            for (_, r) in &records {
                if let Record::Tokens(_, e) | Record::Masses(_, e) = r {
                    for (w, _) in e {
                        if seen.insert(w.as_str()) {
                            words.push(w.clone());
                        }
                    }
                }
            }
            Vocabulary::new(words)?
        }
    };
    let n = vocabulary.len();
    let mut documents = Vec::with_capacity(records.len());
    for (line, r) in records {
        let at = |e: Error| Error::parse(line, e.to_string());
        let doc = match r {
            Record::Tokens(label, e) => {
                normalize_counts(e, &vocabulary, UnknownTokenPolicy::Error, label).map_err(at)?
            }
            Record::Masses(label, e) => {
                let mut entries = Vec::with_capacity(e.len());
                for (w, m) in e {
                    let p = vocabulary.position(&w).ok_or_else(|| at(Error::UnknownToken(w.clone())))?;
                    entries.push((p, m));
                }
                Document::new(entries, label, n).map_err(at)?
            }
            Record::Header(_) => unreachable!(),
        };
        documents.push(doc);
    }
    let split = Split { train: (0..documents.len()).collect(), valid: vec![], test: vec![] };
    Ok(LabeledCorpus::new(vocabulary, documents, split))
}

/// Loads a corpus and, when given, its split file.
pub fn load_corpus(path: impl AsRef<Path>, split: Option<&Path>) -> Result<LabeledCorpus> {
    let mut corpus = read_corpus(std::fs::File::open(path)?)?;
    if let Some(s) = split {
        corpus.split = load_split(s, corpus.documents.len())?;
    }
    Ok(corpus)
}

/// Writes the vocabulary header and one masses record per document.
pub fn write_corpus(mut out: impl Write, corpus: &LabeledCorpus) -> Result<()> {
    serde_json::to_writer(&mut out, &serde_json::json!({ "vocabulary": corpus.vocabulary.words() }))?;
    writeln!(out)?;
    for doc in &corpus.documents {
        let masses: serde_json::Map<String, Value> =
            doc.entries().iter().map(|&(p, m)| (corpus.vocabulary.words()[p].clone(), Value::from(m))).collect();
        serde_json::to_writer(&mut out, &serde_json::json!({ "label": doc.label(), "masses": masses }))?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &LabeledCorpus) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_corpus(&mut f, corpus)?;
    f.flush()?;
    Ok(())
}

/// Parses a split file against a corpus of `n_docs` documents. Each index
/// may appear at most once across all three parts.
pub fn parse_split(text: &str, n_docs: usize) -> Result<Split> {
    let mut split = Split::default();
    let mut current: Option<&mut Vec<usize>> = None;
    let mut seen = HashSet::new();
    let mut headers = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        for tok in line.split_whitespace() {
            if let Some(name) = tok.strip_suffix(':') {
                if !headers.insert(name.to_string()) {
                    return Err(Error::parse(line_no, format!("`{name}:` appears twice")));
                }
                current = Some(match name {
                    "train" => &mut split.train,
                    "valid" => &mut split.valid,
                    "test" => &mut split.test,
                    _ => return Err(Error::parse(line_no, format!("unknown split `{name}`"))),
                });
                continue;
            }
            let list = current.as_mut().ok_or_else(|| Error::parse(line_no, "index before any split header"))?;
            let idx: usize = tok.parse().map_err(|_| Error::parse(line_no, format!("`{tok}` is not an index")))?;
            if idx >= n_docs {
                return Err(Error::parse(line_no, format!("index {idx} out of range for {n_docs} documents")));
            }
            if !seen.insert(idx) {
                return Err(Error::parse(line_no, format!("index {idx} listed twice")));
            }
            list.push(idx);
        }
    }
    Ok(split)
}

pub fn load_split(path: impl AsRef<Path>, n_docs: usize) -> Result<Split> {
    parse_split(&std::fs::read_to_string(path)?, n_docs)
}

pub fn format_split(split: &Split) -> String {
    let line = |name: &str, idx: &[usize]| {
        let body: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        format!("{name}:\n{}\n", body.join(" "))
    };
    line("train", &split.train) + &line("valid", &split.valid) + &line("test", &split.test)
}

pub fn save_split(path: impl AsRef<Path>, split: &Split) -> Result<()> {
    std::fs::write(path, format_split(split))?;
    Ok(())
}

/// What to do with vocabulary words missing from an embedding file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingWordPolicy {
    #[default]
    Error,
    /// Seeded uniform vectors in `[-1, 1)^D`, drawn in vocabulary order.
    Random { seed: u64 },
}

/// Embedding rows aligned to a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocabulary: Vocabulary,
    pub vectors: Array2<f64>,
    /// Words that received a fallback vector.
    pub missing: Vec<String>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn point_cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.vectors.clone())
    }
}

fn is_header(tokens: &[&str]) -> bool {
    tokens.len() == 2 && tokens.iter().all(|t| t.parse::<usize>().is_ok())
}

pub fn read_embeddings(reader: impl Read, vocab: &Vocabulary, policy: MissingWordPolicy) -> Result<EmbeddingTable> {
    let mut found: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = None;
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if line_no == 1 && is_header(&tokens) {
            dim = Some(tokens[1].parse().expect("checked"));
            continue;
        }
        if tokens.len() < 2 {
            return Err(Error::parse(line_no, "expected a word followed by its vector"));
        }
        let d = tokens.len() - 1;
        match dim {
            Some(expected) if expected != d => {
                return Err(Error::parse(line_no, format!("vector has {d} values, expected {expected}")));
            }
            _ => dim = Some(d),
        }
        let word = tokens[0];
        if !seen.insert(word.to_string()) {
            return Err(Error::parse(line_no, format!("word `{word}` appears twice")));
        }
        if let Some(p) = vocab.position(word) {
            let v = tokens[1..]
                .iter()
                .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::parse(line_no, format!("bad number in the vector for `{word}`")))?;
            found.insert(p, v);
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(0, "embedding file has no vectors"))?;
    let mut rng = match policy {
        MissingWordPolicy::Error => None,
        MissingWordPolicy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut vectors = Array2::zeros((vocab.len(), dim));
    let mut missing = Vec::new();
    for (p, word) in vocab.words().iter().enumerate() {
        let mut row = vectors.row_mut(p);
        match (found.get(&p), rng.as_mut()) {
            (Some(v), _) => row.iter_mut().zip(v).for_each(|(r, x)| *r = *x),
            (None, Some(rng)) => {
                row.iter_mut().for_each(|r| *r = rng.gen_range(-1.0..1.0));
                missing.push(word.clone());
            }
            (None, None) => return Err(Error::MissingWord(word.clone())),
        }
    }
    Ok(EmbeddingTable { vocabulary: vocab.clone(), vectors, missing })
}

pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    policy: MissingWordPolicy,
) -> Result<EmbeddingTable> {
    read_embeddings(std::fs::File::open(path)?, vocab, policy)
}

/// Writes a header and one line per word, with shortest round-trip floats.
pub fn write_embeddings(mut out: impl Write, table: &EmbeddingTable) -> Result<()> {
    writeln!(out, "{} {}", table.vocabulary.len(), table.dim())?;
    for (word, row) in table.vocabulary.words().iter().zip(table.vectors.rows()) {
        write!(out, "{word}")?;
        for x in row {
            write!(out, " {x:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// The ten words of the synthetic corpus. The first two are the class
/// markers.
pub const INSTRUMENTS: [&str; 10] =
    ["piano", "violin", "cello", "viola", "contrabass", "trumpet", "trombone", "clarinet", "flute", "harpsichord"];

/// Two-class corpus over [`INSTRUMENTS`]. Every document holds exactly one
/// marker, `piano` (label 0) or `violin` (label 1) with equal odds, and each
/// other word independently with probability 1/2, all with count 1. The first
/// `n_train` documents form the training split, the rest the test split.
pub fn synthetic_instruments(n_train: usize, n_test: usize, seed: u64) -> LabeledCorpus {
    let vocabulary = Vocabulary::new(INSTRUMENTS).expect("distinct words");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let documents = (0..n_train + n_test)
        .map(|_| {
            let label: i64 = if rng.gen_bool(0.5) { 1 } else { 0 };
            let mut counts = BTreeMap::new();
            counts.insert(label as usize, 1.0);
            for w in 2..INSTRUMENTS.len() {
                if rng.gen_bool(0.5) {
                    counts.insert(w, 1.0);
                }
            }
            let total = counts.len() as f64;
            Document::new_unchecked(counts.into_iter().map(|(p, c)| (p, c / total)).collect(), Some(label))
        })
        .collect();
    let split = Split { train: (0..n_train).collect(), valid: vec![], test: (n_train..n_train + n_test).collect() };
    LabeledCorpus::new(vocabulary, documents, split)
}
