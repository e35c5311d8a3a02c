//! Word n-gram language models and per-sentence perplexity.
//!
//! Sentences are padded with `order - 1` beginning-of-sentence markers and
//! terminated by an end-of-sentence marker. BOS is context only and never
//! predicted; EOS is predicted and counted. The prediction vocabulary has
//! `V` entries: every training token, EOS, and UNK.
//!
//! Smoothing:
//!
//! * `mle`: `c(h,w) / c(h)`; unseen events get probability 0.
//! * `add_k`: `(c(h,w) + k) / (c(h) + kV)`.
//! * `kn`: interpolated Kneser–Ney with one discount per order,
//!   `D = n1 / (n1 + 2 n2)` from that order's count-of-counts. Lower orders
//!   use continuation counts and the unigram level interpolates with the
//!   uniform distribution over `V`. If any order has `n1 == 0` or
//!   `n2 == 0` the model falls back to add-one smoothing.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

pub const SCORES_HEADER: &str = "sentence_id\tgrammar\tperplexity\ttokens";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    Mle,
    AddK(f64),
    KneserNey,
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothing::Mle => f.write_str("mle"),
            Smoothing::AddK(k) => write!(f, "add_k({k})"),
            Smoothing::KneserNey => f.write_str("kn"),
        }
    }
}

impl FromStr for Smoothing {
    type Err = String;

    /// Accepts `mle`, `kn`, `add_k` (k = 1), `add_k:<k>` or `add_k(<k>)`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mle" => return Ok(Smoothing::Mle),
            "kn" | "kneser_ney" | "interpolated_kneser_ney" => return Ok(Smoothing::KneserNey),
            "add_k" | "add1" => return Ok(Smoothing::AddK(1.0)),
            _ => {}
        }
        let k = s
            .strip_prefix("add_k:")
            .or_else(|| s.strip_prefix("add_k(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| format!("unknown smoothing `{s}` (mle, add_k[:k], kn)"))?;
        let k: f64 = k.parse().map_err(|_| format!("invalid k in `{s}`"))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(format!("k must be positive in `{s}`"));
        }
        Ok(Smoothing::AddK(k))
    }
}

#[derive(Debug, Error)]
pub enum NGramError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("order must be at least 1")]
    Order,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> NGramError + '_ {
    move |source| NGramError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Per-context statistics: total count and number of distinct followers.
#[derive(Debug, Clone, Copy, Default)]
struct Context {
    total: f64,
    types: f64,
}

#[derive(Debug, Clone, Default)]
struct Level {
    counts: HashMap<Vec<u32>, f64>,
    contexts: HashMap<Vec<u32>, Context>,
    discount: f64,
}

impl Level {
    fn from_counts(counts: HashMap<Vec<u32>, f64>) -> Self {
        let mut contexts: HashMap<Vec<u32>, Context> = HashMap::new();
        for (g, &c) in &counts {
            let ctx = contexts.entry(g[..g.len() - 1].to_vec()).or_default();
            ctx.total += c;
            ctx.types += 1.0;
        }
        Level {
            counts,
            contexts,
            discount: 0.0,
        }
    }

    /// `n1 / (n1 + 2 n2)`, or `None` when either count-of-count is zero.
    fn kn_discount(&self) -> Option<f64> {
        let n1 = self.counts.values().filter(|&&c| c == 1.0).count() as f64;
        let n2 = self.counts.values().filter(|&&c| c == 2.0).count() as f64;
        (n1 > 0.0 && n2 > 0.0).then(|| n1 / (n1 + 2.0 * n2))
    }
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    requested: Smoothing,
    smoothing: Smoothing,
    vocab: HashMap<String, u32>,
    tokens: Vec<String>,
    /// `levels[k - 1]` holds k-gram statistics.
    levels: Vec<Level>,
}

impl NGramModel {
    /// Trains on tokenized sentences.
    pub fn train<S: AsRef<str>>(
        sentences: &[Vec<S>],
        order: usize,
        smoothing: Smoothing,
    ) -> Result<Self, NGramError> {
        if order == 0 {
            return Err(NGramError::Order);
        }
        if sentences.is_empty() {
            return Err(NGramError::EmptyCorpus);
        }
        let mut tokens: Vec<String> = [BOS, EOS, UNK].iter().map(|s| s.to_string()).collect();
        let mut vocab: HashMap<String, u32> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let mut raw: Vec<HashMap<Vec<u32>, f64>> = vec![HashMap::new(); order];
        let mut padded = Vec::new();
        for s in sentences {
            padded.clear();
            padded.extend(std::iter::repeat_n(BOS_ID, order - 1));
            for w in s {
                let w = w.as_ref();
                let id = match vocab.get(w) {
                    Some(&id) => id,
                    None => {
                        let id = tokens.len() as u32;
                        tokens.push(w.to_string());
                        vocab.insert(w.to_string(), id);
                        id
                    }
                };
                padded.push(id);
            }
            padded.push(EOS_ID);
            for end in order - 1..padded.len() {
                for k in 1..=order {
                    *raw[k - 1].entry(padded[end + 1 - k..=end].to_vec()).or_default() += 1.0;
                }
            }
        }

        let mut model = NGramModel {
            order,
            requested: smoothing,
            smoothing,
            vocab,
            tokens,
            levels: Vec::new(),
        };
        if let Smoothing::KneserNey = smoothing {
            let mut levels = Vec::with_capacity(order);
            for k in 1..=order {
                let counts = if k == order {
                    raw[k - 1].clone()
                } else {
                    let mut cont: HashMap<Vec<u32>, f64> = HashMap::new();
                    for g in raw[k].keys() {
                        *cont.entry(g[1..].to_vec()).or_default() += 1.0;
                    }
                    cont
                };
                levels.push(Level::from_counts(counts));
            }
            let discounts: Option<Vec<f64>> = levels.iter().map(Level::kn_discount).collect();
            match discounts {
                Some(d) => {
                    for (l, d) in levels.iter_mut().zip(d) {
                        l.discount = d;
                    }
                    model.levels = levels;
                    return Ok(model);
                }
                None => model.smoothing = Smoothing::AddK(1.0),
            }
        }
        let top = raw.pop().expect("order >= 1");
        model.levels = vec![Level::default(); order - 1];
        model.levels.push(Level::from_counts(top));
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Smoothing actually in use (after any Kneser–Ney fallback).
    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn requested_smoothing(&self) -> Smoothing {
        self.requested
    }

    /// Size of the prediction vocabulary (training types + EOS + UNK).
    pub fn vocab_size(&self) -> usize {
        self.tokens.len() - 1
    }

    /// Every predictable token, EOS and UNK included.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.tokens[1..].iter().map(String::as_str)
    }

    pub fn discounts(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.discount).collect()
    }

    fn id(&self, w: &str) -> u32 {
        self.vocab.get(w).copied().unwrap_or(UNK_ID)
    }

    /// `p(w | context)`; `context` is the preceding tokens (BOS/EOS markers
    /// allowed), of which only the last `order - 1` are used. Shorter
    /// contexts are left-padded with BOS.
    pub fn prob(&self, context: &[&str], w: &str) -> f64 {
        let n = self.order - 1;
        let mut h: Vec<u32> = context.iter().rev().take(n).rev().map(|t| self.id(t)).collect();
        while h.len() < n {
            h.insert(0, BOS_ID);
        }
        self.prob_ids(&h, self.id(w))
    }

    fn prob_ids(&self, h: &[u32], w: u32) -> f64 {
        if w == BOS_ID {
            return 0.0;
        }
        let v = self.vocab_size() as f64;
        let top = self.levels.last().expect("at least one level");
        match self.smoothing {
            Smoothing::Mle => {
                let Some(ctx) = top.contexts.get(h) else { return 0.0 };
                let mut key = h.to_vec();
                key.push(w);
                top.counts.get(&key).copied().unwrap_or(0.0) / ctx.total
            }
            Smoothing::AddK(k) => {
                let total = top.contexts.get(h).map_or(0.0, |c| c.total);
                let mut key = h.to_vec();
                key.push(w);
                (top.counts.get(&key).copied().unwrap_or(0.0) + k) / (total + k * v)
            }
            Smoothing::KneserNey => self.kn(h, w, v),
        }
    }

    fn kn(&self, h: &[u32], w: u32, v: f64) -> f64 {
        let mut p = 1.0 / v;
        let mut key = Vec::with_capacity(h.len() + 1);
        for k in 1..=self.order {
            let level = &self.levels[k - 1];
            let hist = &h[h.len() + 1 - k..];
            if let Some(ctx) = level.contexts.get(hist) {
                key.clear();
                key.extend_from_slice(hist);
                key.push(w);
                let c = level.counts.get(&key).copied().unwrap_or(0.0);
                let d = level.discount;
                p = ((c - d).max(0.0) + d * ctx.types * p) / ctx.total;
            }
        }
        p
    }

    /// Scores one sentence: `exp(-(1/T) Σ ln p)` over the `T = len + 1`
    /// positions including EOS. A zero-probability event gives infinity.
    pub fn perplexity<S: AsRef<str>>(&self, sentence: &[S]) -> (f64, usize) {
        let n = self.order - 1;
        let mut ids: Vec<u32> = vec![BOS_ID; n];
        ids.extend(sentence.iter().map(|w| self.id(w.as_ref())));
        ids.push(EOS_ID);
        let t = ids.len() - n;
        let mut nll = 0.0;
        for end in n..ids.len() {
            let p = self.prob_ids(&ids[end - n..end], ids[end]).min(1.0);
            if p <= 0.0 {
                return (f64::INFINITY, t);
            }
            nll -= p.ln();
        }
        ((nll / t as f64).exp().max(1.0), t)
    }
}

/// Reads a corpus file (one sentence per line, space-separated tokens).
pub fn read_sentences(path: &Path) -> Result<Vec<Vec<String>>, NGramError> {
    let f = File::open(path).map_err(io_err(path))?;
    BufReader::new(f)
        .lines()
        .map(|l| Ok(l.map_err(io_err(path))?.split_whitespace().map(String::from).collect()))
        .collect()
}

pub fn train_ngram(path: &Path, order: usize, smoothing: Smoothing) -> Result<NGramModel, NGramError> {
    let sentences = read_sentences(path)?;
    NGramModel::train(&sentences, order, smoothing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScore {
    pub sentence_id: usize,
    pub grammar: String,
    pub perplexity: f64,
    /// Scored positions, including EOS.
    pub tokens: usize,
}

pub fn perplexity<S: AsRef<str>>(model: &NGramModel, sentence_id: usize, grammar: &str, sentence: &[S]) -> SentenceScore {
    let (perplexity, tokens) = model.perplexity(sentence);
    SentenceScore {
        sentence_id,
        grammar: grammar.to_string(),
        perplexity,
        tokens,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScore {
    pub scores: Vec<SentenceScore>,
    /// Arithmetic mean of per-sentence perplexities.
    pub mean_perplexity: f64,
    /// `exp` of the mean per-token negative log-likelihood over the corpus.
    pub corpus_perplexity: f64,
}

pub fn score_sentences<S: AsRef<str>>(model: &NGramModel, sentences: &[Vec<S>], grammar: &str) -> CorpusScore {
    let scores: Vec<SentenceScore> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| perplexity(model, i, grammar, s))
        .collect();
    let mean_perplexity = scores.iter().map(|s| s.perplexity).sum::<f64>() / scores.len() as f64;
    let total_tokens: usize = scores.iter().map(|s| s.tokens).sum();
    let total_nll: f64 = scores.iter().map(|s| s.perplexity.ln() * s.tokens as f64).sum();
    CorpusScore {
        scores,
        mean_perplexity,
        corpus_perplexity: (total_nll / total_tokens as f64).exp(),
    }
}

/// Scores every line of `path`; `sentence_id` is the line index.
pub fn score_corpus(model: &NGramModel, path: &Path, grammar: &str) -> Result<CorpusScore, NGramError> {
    let sentences = read_sentences(path)?;
    if sentences.is_empty() {
        return Err(NGramError::EmptyCorpus);
    }
    Ok(score_sentences(model, &sentences, grammar))
}

pub fn write_scores<W: Write>(mut w: W, scores: &[SentenceScore]) -> io::Result<()> {
    writeln!(w, "{SCORES_HEADER}")?;
    for s in scores {
        writeln!(w, "{}\t{}\t{}\t{}", s.sentence_id, s.grammar, s.perplexity, s.tokens)?;
    }
    Ok(())
}

pub fn write_scores_file(path: &Path, scores: &[SentenceScore]) -> Result<(), NGramError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    write_scores(&mut w, scores).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Parses a scores file. Values are parsed but not range-checked.
pub fn read_scores_file(path: &Path) -> Result<Vec<SentenceScore>, NGramError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let bad = |message: String| NGramError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if i == 0 {
            if line.trim_end() != SCORES_HEADER {
                return Err(bad(format!("expected header `{SCORES_HEADER}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, got {}", cols.len())));
        }
        let sentence_id = cols[0].parse().map_err(|_| bad(format!("bad sentence_id `{}`", cols[0])))?;
        let perplexity = cols[2].parse().map_err(|_| bad(format!("bad perplexity `{}`", cols[2])))?;
        let tokens = cols[3].parse().map_err(|_| bad(format!("bad token count `{}`", cols[3])))?;
        out.push(SentenceScore {
            sentence_id,
            grammar: cols[1].to_string(),
            perplexity,
            tokens,
        });
    }
    Ok(out)
}
