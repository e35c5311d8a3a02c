//! Seeded top-down sampling of derivation trees, and re-linearization of a
//! tree under a switch configuration.
//!
//! Randomness: sentence `i` draws from ChaCha8 seeded with the corpus seed
//! and stream id `i` (`set_stream(i)`), so any sentence can be regenerated
//! on its own and the result never depends on scheduling.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grammar::{Diagnostic, Grammar, RuleId, SymbolId, SymbolKind};
use crate::switching::SwitchVector;

/// Attempts tracked when deciding whether a grammar is non-productive.
pub const REJECTION_WINDOW: usize = 10_000;
/// Maximum tolerated rejection rate over a full window.
pub const MAX_REJECTION_RATE: f64 = 0.999;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("grammar is invalid: {0:?}")]
    InvalidGrammar(Vec<Diagnostic>),
    #[error("invalid sample config: {0}")]
    Config(&'static str),
    #[error(
        "grammar looks non-productive: {rejected} of the last {window} attempts exceeded \
         {max_expansions} expansions (at sentence {sentence})"
    )]
    NonProductive {
        rejected: usize,
        window: usize,
        max_expansions: usize,
        sentence: u64,
    },
    #[error("switch vector has {got} bits, grammar has {expected} switches")]
    SwitchLength { expected: usize, got: usize },
    #[error("bracketed tree: {0}")]
    Bracketed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleConfig {
    pub seed: u64,
    pub count: usize,
    pub max_expansions: usize,
    pub dedupe: bool,
}

impl SampleConfig {
    pub fn new(seed: u64, count: usize) -> Self {
        SampleConfig {
            seed,
            count,
            max_expansions: 512,
            dedupe: false,
        }
    }
}

/// A sampled derivation. Children are stored in the rule's written
/// (all-switches-off) order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DerivationTree {
    Node {
        rule: RuleId,
        children: Vec<DerivationTree>,
    },
    Leaf(SymbolId),
}

impl DerivationTree {
    pub fn rule(&self) -> Option<RuleId> {
        match self {
            DerivationTree::Node { rule, .. } => Some(*rule),
            DerivationTree::Leaf(_) => None,
        }
    }

    pub fn children(&self) -> &[DerivationTree] {
        match self {
            DerivationTree::Node { children, .. } => children,
            DerivationTree::Leaf(_) => &[],
        }
    }

    /// Root symbol: the rule's left-hand side, or the leaf terminal.
    pub fn label(&self, g: &Grammar) -> SymbolId {
        match self {
            DerivationTree::Node { rule, .. } => g.rule(*rule).lhs,
            DerivationTree::Leaf(s) => *s,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            DerivationTree::Node { children, .. } => children.iter().map(Self::leaf_count).sum(),
            DerivationTree::Leaf(_) => 1,
        }
    }

    /// Left-to-right leaf tokens, ignoring switches.
    pub fn plain_yield<'g>(&self, g: &'g Grammar) -> Vec<&'g str> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.collect(g, None, &mut out);
        out
    }

    fn collect<'g>(&self, g: &'g Grammar, bits: Option<&[bool]>, out: &mut Vec<&'g str>) {
        match self {
            DerivationTree::Leaf(s) => out.push(g.name(*s)),
            DerivationTree::Node { rule, children } => {
                let flip = match (bits, g.rule(*rule).switch) {
                    (Some(b), Some(sw)) => b[sw],
                    _ => false,
                };
                if flip {
                    for c in children.iter().rev() {
                        c.collect(g, bits, out);
                    }
                } else {
                    for c in children {
                        c.collect(g, bits, out);
                    }
                }
            }
        }
    }

    /// Builds a tree from bracketed notation such as
    /// `(ROOT (S (NPSubj_sg (NP_sg (Noun_sg gop)) (Subj sub)) ...) .)`.
    ///
    /// Each node's rule is looked up from its label and its children's
    /// labels, so the notation must follow the grammar exactly.
    pub fn from_bracketed(g: &Grammar, text: &str) -> Result<Self, SampleError> {
        let tokens: Vec<String> = text
            .replace('(', " ( ")
            .replace(')', " ) ")
            .split_whitespace()
            .map(String::from)
            .collect();
        let mut pos = 0;
        let t = parse_node(g, &tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(SampleError::Bracketed("trailing input".into()));
        }
        Ok(t)
    }

    /// Bracketed rendering; inverse of [`DerivationTree::from_bracketed`].
    pub fn to_bracketed(&self, g: &Grammar) -> String {
        match self {
            DerivationTree::Leaf(s) => g.name(*s).to_string(),
            DerivationTree::Node { rule, children } => {
                let mut s = format!("({}", g.name(g.rule(*rule).lhs));
                for c in children {
                    s.push(' ');
                    s.push_str(&c.to_bracketed(g));
                }
                s.push(')');
                s
            }
        }
    }
}

fn parse_node(g: &Grammar, tokens: &[String], pos: &mut usize) -> Result<DerivationTree, SampleError> {
    let err = |m: String| SampleError::Bracketed(m);
    let tok = tokens.get(*pos).ok_or_else(|| err("unexpected end of input".into()))?;
    *pos += 1;
    if tok == ")" {
        return Err(err("unexpected `)`".into()));
    }
    if tok != "(" {
        let sym = g.symbol_id(tok).ok_or_else(|| err(format!("unknown symbol `{tok}`")))?;
        if g.symbol(sym).kind != SymbolKind::Terminal {
            return Err(err(format!("`{tok}` is a nonterminal and needs brackets")));
        }
        return Ok(DerivationTree::Leaf(sym));
    }
    let head = tokens.get(*pos).ok_or_else(|| err("unexpected end of input".into()))?;
    *pos += 1;
    let lhs = g.symbol_id(head).ok_or_else(|| err(format!("unknown symbol `{head}`")))?;
    let mut children = Vec::new();
    loop {
        match tokens.get(*pos).map(String::as_str) {
            Some(")") => {
                *pos += 1;
                break;
            }
            Some(_) => children.push(parse_node(g, tokens, pos)?),
            None => return Err(err("missing `)`".into())),
        }
    }
    let labels: Vec<SymbolId> = children.iter().map(|c| c.label(g)).collect();
    let rule = g
        .rules_for(lhs)
        .iter()
        .copied()
        .find(|&r| g.rule(r).rhs == labels)
        .ok_or_else(|| {
            let names: Vec<&str> = labels.iter().map(|&s| g.name(s)).collect();
            err(format!("no rule {head} -> {}", names.join(" ")))
        })?;
    Ok(DerivationTree::Node { rule, children })
}

/// Tokens of `t` with every node whose rule is tagged by an active switch
/// visited in reverse child order.
pub fn yield_of<'g>(
    t: &DerivationTree,
    b: &SwitchVector,
    g: &'g Grammar,
) -> Result<Vec<&'g str>, SampleError> {
    let mut out = Vec::with_capacity(t.leaf_count());
    yield_into(t, b, g, &mut out)?;
    Ok(out)
}

/// Like [`yield_of`] but appends into a reusable buffer.
pub fn yield_into<'g>(
    t: &DerivationTree,
    b: &SwitchVector,
    g: &'g Grammar,
    out: &mut Vec<&'g str>,
) -> Result<(), SampleError> {
    if b.len() != g.num_switches() {
        return Err(SampleError::SwitchLength {
            expected: g.num_switches(),
            got: b.len(),
        });
    }
    t.collect(g, Some(b.bits()), out);
    Ok(())
}

/// Deterministic generator for sentence `index` of a corpus seeded by `seed`.
pub fn sentence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One expansion attempt from `symbol`; `None` when the rule budget runs out.
pub fn expand<R: Rng>(g: &Grammar, symbol: SymbolId, rng: &mut R, budget: &mut usize) -> Option<DerivationTree> {
    if g.symbol(symbol).kind == SymbolKind::Terminal {
        return Some(DerivationTree::Leaf(symbol));
    }
    if *budget == 0 {
        return None;
    }
    *budget -= 1;
    let choices = g.rules_for(symbol);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut chosen = *choices.last()?;
    for &r in choices {
        acc += g.probability(r);
        if u < acc {
            chosen = r;
            break;
        }
    }
    let rhs = &g.rule(chosen).rhs;
    let mut children = Vec::with_capacity(rhs.len());
    for &s in rhs {
        children.push(expand(g, s, rng, budget)?);
    }
    Some(DerivationTree::Node {
        rule: chosen,
        children,
    })
}

/// Draws `cfg.count` derivation trees from the start symbol.
///
/// Attempts that need more than `cfg.max_expansions` rule applications are
/// discarded and redrawn from the same sentence stream. The result is a
/// pure function of `(g, cfg)`.
pub fn sample(g: &Grammar, cfg: &SampleConfig) -> Result<Vec<DerivationTree>, SampleError> {
    let diags = g.validate();
    if !diags.is_empty() {
        return Err(SampleError::InvalidGrammar(diags));
    }
    if cfg.count == 0 {
        return Err(SampleError::Config("count must be at least 1"));
    }
    if cfg.max_expansions == 0 {
        return Err(SampleError::Config("max_expansions must be at least 1"));
    }
    let limit = (MAX_REJECTION_RATE * REJECTION_WINDOW as f64) as usize;
    let mut window: VecDeque<bool> = VecDeque::with_capacity(REJECTION_WINDOW);
    let mut rejected = 0usize;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count as u64 {
        let mut rng = sentence_rng(cfg.seed, i);
        loop {
            let mut budget = cfg.max_expansions;
            let attempt = expand(g, g.start(), &mut rng, &mut budget);
            let failed = attempt.is_none();
            if window.len() == REJECTION_WINDOW && window.pop_front() == Some(true) {
                rejected -= 1;
            }
            window.push_back(failed);
            rejected += failed as usize;
            if window.len() == REJECTION_WINDOW && rejected > limit {
                return Err(SampleError::NonProductive {
                    rejected,
                    window: REJECTION_WINDOW,
                    max_expansions: cfg.max_expansions,
                    sentence: i,
                });
            }
            let Some(tree) = attempt else { continue };
            if cfg.dedupe && !seen.insert(tree.plain_yield(g).join(" ")) {
                continue;
            }
            out.push(tree);
            break;
        }
    }
    Ok(out)
}
