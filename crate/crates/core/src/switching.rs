//! Switch configurations and parallel corpus generation.
//!
//! One set of derivations is sampled once and written out under every
//! switch configuration, so line `n` of every grammar's file is the same
//! derivation linearized differently.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! grammar-000000/split-0/train.txt
//! grammar-000000/split-0/dev.txt
//! grammar-000000/split-0/test.txt
//! ...
//! ```
//!
//! Sentence `n` goes to split `n % num_splits`; within a split sentences
//! keep index order and the first `train` of them form the train section,
//! the next `dev` the dev section, the rest the test section.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::Grammar;
use crate::lexicon::{Lexicon, Number};
use crate::sampler::{sample, yield_into, DerivationTree, SampleConfig, SampleError};

pub const MAX_SWITCHES: usize = 20;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SwitchVector {
    bits: Vec<bool>,
}

impl SwitchVector {
    pub fn new(bits: Vec<bool>) -> Self {
        SwitchVector { bits }
    }

    pub fn zeros(k: usize) -> Self {
        SwitchVector { bits: vec![false; k] }
    }

    /// Parses a grammar name such as `011101`.
    pub fn parse(name: &str) -> Option<Self> {
        name.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(SwitchVector::new)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut bits = self.bits.clone();
        bits[i] = !bits[i];
        SwitchVector { bits }
    }

    /// Canonical name, bit 0 first.
    pub fn name(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for SwitchVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("number of switches {0} is outside 0..={MAX_SWITCHES}")]
    SwitchCount(usize),
    #[error("invalid corpus plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// All `2^k` configurations in lexicographic order of their names.
pub fn enumerate_switch_vectors(k: usize) -> Result<Vec<SwitchVector>, CorpusError> {
    if k > MAX_SWITCHES {
        return Err(CorpusError::SwitchCount(k));
    }
    Ok((0..1u64 << k)
        .map(|i| SwitchVector::new((0..k).map(|j| (i >> (k - 1 - j)) & 1 == 1).collect()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Train,
    Dev,
    Test,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Train, Section::Dev, Section::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Train => "train",
            Section::Dev => "dev",
            Section::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusPlan {
    pub sentences_total: usize,
    pub num_splits: usize,
    /// Train, dev, test.
    pub split_fractions: [f64; 3],
    pub seed: u64,
    pub max_expansions: usize,
}

impl CorpusPlan {
    /// 100,000 sentences in 10 splits, each 80/10/10.
    pub fn paper(seed: u64) -> Self {
        CorpusPlan {
            sentences_total: 100_000,
            num_splits: 10,
            split_fractions: [0.8, 0.1, 0.1],
            seed,
            max_expansions: 512,
        }
    }

    pub fn with_total(mut self, total: usize, splits: usize) -> Self {
        self.sentences_total = total;
        self.num_splits = splits;
        self
    }

    pub fn split_size(&self) -> usize {
        self.sentences_total / self.num_splits.max(1)
    }

    /// Checks the plan arithmetic and returns the train/dev/test sizes of
    /// one split.
    pub fn section_sizes(&self) -> Result<[usize; 3], CorpusError> {
        let bad = |m: String| Err(CorpusError::Plan(m));
        if self.sentences_total == 0 || self.num_splits == 0 {
            return bad("sentences_total and num_splits must be positive".into());
        }
        if !self.sentences_total.is_multiple_of(self.num_splits) {
            return bad(format!(
                "{} sentences cannot be divided into {} equal splits",
                self.sentences_total, self.num_splits
            ));
        }
        let f = self.split_fractions;
        if f.iter().any(|x| !(0.0..=1.0).contains(x)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions {f:?} must be in [0,1] and sum to 1"));
        }
        let size = self.split_size();
        let mut out = [0; 3];
        for (o, x) in out.iter_mut().zip(f) {
            let exact = x * size as f64;
            let rounded = exact.round();
            if (exact - rounded).abs() > 1e-6 {
                return bad(format!("fraction {x} of a {size}-sentence split is not an integer"));
            }
            *o = rounded as usize;
        }
        if out.iter().sum::<usize>() != size {
            return bad("section sizes do not add up to the split size".into());
        }
        Ok(out)
    }

    /// Split, section and line within that section for sentence `index`.
    pub fn assignment(&self, index: usize) -> Result<(usize, Section, usize), CorpusError> {
        let [train, dev, _] = self.section_sizes()?;
        Ok(assign(index, self.num_splits, train, dev))
    }

    /// Inverse of [`CorpusPlan::assignment`].
    pub fn sentence_index(&self, split: usize, section: Section, line: usize) -> Result<usize, CorpusError> {
        let [train, dev, _] = self.section_sizes()?;
        let pos = match section {
            Section::Train => line,
            Section::Dev => train + line,
            Section::Test => train + dev + line,
        };
        Ok(pos * self.num_splits + split)
    }
}

fn assign(index: usize, splits: usize, train: usize, dev: usize) -> (usize, Section, usize) {
    let split = index % splits;
    let pos = index / splits;
    if pos < train {
        (split, Section::Train, pos)
    } else if pos < train + dev {
        (split, Section::Dev, pos - train)
    } else {
        (split, Section::Test, pos - train - dev)
    }
}

pub fn corpus_path(root: &Path, grammar: &str, split: usize, section: Section) -> PathBuf {
    root.join(format!("grammar-{grammar}"))
        .join(format!("split-{split}"))
        .join(format!("{}.txt", section.as_str()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub tool: String,
    pub version: String,
    pub plan: CorpusPlan,
    pub grammar_hash: String,
    pub switches: Vec<String>,
    pub grammar_names: Vec<String>,
    pub section_sizes: [usize; 3],
    pub layout: String,
}

/// Sampled derivations plus the files they were written to.
#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pub plan: CorpusPlan,
    pub root: PathBuf,
    pub grammar_names: Vec<String>,
    pub trees: Vec<DerivationTree>,
    pub section_sizes: [usize; 3],
}

impl ParallelCorpus {
    pub fn assignment(&self, index: usize) -> (usize, Section, usize) {
        let [train, dev, _] = self.section_sizes;
        assign(index, self.plan.num_splits, train, dev)
    }

    pub fn path(&self, grammar: &str, split: usize, section: Section) -> PathBuf {
        corpus_path(&self.root, grammar, split, section)
    }

    /// Derivations of one split/section, in file line order.
    pub fn section_trees(&self, split: usize, section: Section) -> Vec<&DerivationTree> {
        self.trees
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let (s, sec, _) = self.assignment(*i);
                s == split && sec == section
            })
            .map(|(_, t)| t)
            .collect()
    }
}

/// Samples the plan's derivations once and writes them under every switch
/// configuration of `g`.
pub fn generate_parallel(g: &Grammar, plan: &CorpusPlan, out: &Path) -> Result<ParallelCorpus, CorpusError> {
    let sizes = plan.section_sizes()?;
    let vectors = enumerate_switch_vectors(g.num_switches())?;
    let mut cfg = SampleConfig::new(plan.seed, plan.sentences_total);
    cfg.max_expansions = plan.max_expansions;
    let trees = sample(g, &cfg)?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let assignments: Vec<(usize, Section)> = (0..trees.len())
        .map(|i| {
            let (s, sec, _) = assign(i, plan.num_splits, sizes[0], sizes[1]);
            (s, sec)
        })
        .collect();
    let mut tokens = Vec::new();
    for b in &vectors {
        let name = b.name();
        let mut writers = Vec::with_capacity(plan.num_splits * 3);
        for split in 0..plan.num_splits {
            for section in Section::ALL {
                let path = corpus_path(out, &name, split, section);
                let dir = path.parent().expect("corpus path has a parent");
                fs::create_dir_all(dir).map_err(io_err(dir))?;
                let f = File::create(&path).map_err(io_err(&path))?;
                writers.push((path, BufWriter::new(f)));
            }
        }
        for (t, &(split, section)) in trees.iter().zip(&assignments) {
            tokens.clear();
            yield_into(t, b, g, &mut tokens)?;
            let (path, w) = &mut writers[split * 3 + section as usize];
            write_line(w, &tokens).map_err(io_err(path))?;
        }
        for (path, mut w) in writers {
            w.flush().map_err(io_err(&path))?;
        }
    }

    let manifest = CorpusManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        plan: *plan,
        grammar_hash: g.content_hash(),
        switches: g.switches().to_vec(),
        grammar_names: vectors.iter().map(SwitchVector::name).collect(),
        section_sizes: sizes,
        layout: "grammar-<name>/split-<i>/{train,dev,test}.txt".into(),
    };
    let mpath = out.join(MANIFEST_FILE);
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&mpath))?;

    Ok(ParallelCorpus {
        plan: *plan,
        root: out.to_path_buf(),
        grammar_names: manifest.grammar_names,
        trees,
        section_sizes: sizes,
    })
}

fn write_line<W: Write>(w: &mut W, tokens: &[&str]) -> io::Result<()> {
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            w.write_all(b" ")?;
        }
        w.write_all(t.as_bytes())?;
    }
    w.write_all(b"\n")
}

pub fn read_manifest(root: &Path) -> Result<CorpusManifest, CorpusError> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a corpus file into token lists.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>, CorpusError> {
    let f = File::open(path).map_err(io_err(path))?;
    BufReader::new(f)
        .lines()
        .map(|l| {
            l.map(|l| l.split(' ').map(String::from).collect())
                .map_err(io_err(path))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordOrder {
    SOV,
    SVO,
    OVS,
    VOS,
}

impl WordOrder {
    pub const ALL: [WordOrder; 4] = [WordOrder::SOV, WordOrder::SVO, WordOrder::OVS, WordOrder::VOS];
}

impl fmt::Display for WordOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Basic constituent order of a base-grammar configuration, read from the
/// S switch (bit 0) and the VP switch (bit 1).
///
/// # Panics
///
/// If `b` has fewer than two bits.
pub fn word_order_of(b: &SwitchVector) -> WordOrder {
    match (b.bit(0), b.bit(1)) {
        (false, false) => WordOrder::SOV,
        (false, true) => WordOrder::SVO,
        (true, false) => WordOrder::OVS,
        (true, true) => WordOrder::VOS,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgreementViolation {
    /// Subject and verb number differ.
    Mismatch {
        sentence: usize,
        subject: String,
        verb: String,
        subject_number: Number,
        verb_number: Number,
    },
    /// A clause whose subject or verb head could not be resolved to a
    /// numbered lexicon entry.
    Unresolved { sentence: usize, detail: String },
    /// A corpus line differs from the yield of its derivation.
    LineMismatch { sentence: usize, expected: String, found: String },
}

/// Category name without subscripts: `NPSubj_sg` -> `NPSubj`.
fn base(name: &str) -> &str {
    name.split('_').next().unwrap_or(name)
}

fn child_with<'t>(g: &Grammar, t: &'t DerivationTree, cat: &str) -> Option<&'t DerivationTree> {
    t.children().iter().find(|c| base(g.name(c.label(g))) == cat)
}

/// Follows `prefs` (in priority order) down to a preterminal and returns its
/// token.
fn head_token<'g>(g: &'g Grammar, t: &DerivationTree, prefs: &[&str]) -> Option<&'g str> {
    match t {
        DerivationTree::Leaf(s) => Some(g.name(*s)),
        DerivationTree::Node { children, .. } => {
            if let [DerivationTree::Leaf(s)] = children.as_slice() {
                return Some(g.name(*s));
            }
            let next = prefs.iter().find_map(|p| child_with(g, t, p))?;
            head_token(g, next, prefs)
        }
    }
}

const NOUN_HEADS: &[&str] = &["Noun", "Pronoun", "NP"];
const VERB_HEADS: &[&str] = &["Verb"];

/// Checks subject–verb number agreement in every clause of every
/// derivation.
///
/// Clauses are found structurally from category names with subscripts
/// stripped: a node with `NPSubj` and `VP` children (subject is the
/// `NPSubj`), and a relative clause node with `VP` and `Noun` children
/// (subject is the modified noun). Head words are looked up in `lex`.
pub fn check_agreement(g: &Grammar, lex: &Lexicon, trees: &[DerivationTree]) -> Vec<AgreementViolation> {
    let mut out = Vec::new();
    for (i, t) in trees.iter().enumerate() {
        visit_clauses(g, lex, t, i, &mut out);
    }
    out
}

fn visit_clauses(g: &Grammar, lex: &Lexicon, t: &DerivationTree, sentence: usize, out: &mut Vec<AgreementViolation>) {
    if let Some(vp) = child_with(g, t, "VP") {
        let subject = child_with(g, t, "NPSubj").or_else(|| child_with(g, t, "Noun"));
        if let Some(subject) = subject {
            let subj = head_token(g, subject, NOUN_HEADS);
            let verb = head_token(g, vp, VERB_HEADS);
            let number = |tok: Option<&str>| {
                tok.and_then(|w| lex.features_of(w).ok())
                    .map(|a| a.features.number)
                    .filter(|n| *n != Number::NotApplicable)
            };
            match (subj, verb, number(subj), number(verb)) {
                (Some(s), Some(v), Some(sn), Some(vn)) => {
                    if sn != vn {
                        out.push(AgreementViolation::Mismatch {
                            sentence,
                            subject: s.to_string(),
                            verb: v.to_string(),
                            subject_number: sn,
                            verb_number: vn,
                        });
                    }
                }
                _ => out.push(AgreementViolation::Unresolved {
                    sentence,
                    detail: format!("subject head {subj:?}, verb head {verb:?}"),
                }),
            }
        }
    }
    for c in t.children() {
        visit_clauses(g, lex, c, sentence, out);
    }
}

/// Agreement check over a corpus file: each line must be the yield of the
/// matching derivation under `b`, and every derivation must agree.
pub fn check_corpus_agreement(
    path: &Path,
    b: &SwitchVector,
    g: &Grammar,
    lex: &Lexicon,
    trees: &[DerivationTree],
) -> Result<Vec<AgreementViolation>, CorpusError> {
    let lines = read_corpus(path)?;
    let mut out = Vec::new();
    let mut buf = Vec::new();
    for (i, t) in trees.iter().enumerate() {
        buf.clear();
        yield_into(t, b, g, &mut buf)?;
        let expected = buf.join(" ");
        let found = lines.get(i).map(|l| l.join(" ")).unwrap_or_default();
        if expected != found {
            out.push(AgreementViolation::LineMismatch { sentence: i, expected, found });
        }
    }
    for (i, line) in lines.iter().enumerate().skip(trees.len()) {
        out.push(AgreementViolation::LineMismatch {
            sentence: i,
            expected: String::new(),
            found: line.join(" "),
        });
    }
    out.extend(check_agreement(g, lex, trees));
    Ok(out)
}
