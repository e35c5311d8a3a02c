//! Switch-annotated probabilistic context-free grammars.
//!
//! A grammar is written with every production in its "all switches off"
//! order. Rules tagged with a switch have their right-hand side reversed
//! whenever that switch is on; see [`crate::sampler::yield_of`].
//!
//! Symbol kinds follow a naming convention: a name starting with an ASCII
//! uppercase letter is a nonterminal, anything else is a terminal.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexicon::{Lexicon, Number, Pos, Role, Tense};

const BASE_STRUCTURE: &str = include_str!("../resources/base_structure.grammar");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

impl SymbolKind {
    pub fn of_name(name: &str) -> SymbolKind {
        match name.chars().next() {
            Some(c) if c.is_ascii_uppercase() => SymbolKind::Nonterminal,
            _ => SymbolKind::Terminal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: SymbolId,
    pub rhs: Vec<SymbolId>,
    pub weight: f64,
    /// Index into [`Grammar::switches`].
    pub switch: Option<usize>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown symbol `{name}`: {reason}")]
    UnknownSymbol {
        line: usize,
        name: String,
        reason: String,
    },
    #[error("line {line}: undeclared switch `{name}`")]
    UndeclaredSwitch { line: usize, name: String },
    #[error("line {line}: weight must be positive, got {weight}")]
    NonPositiveWeight { line: usize, weight: f64 },
    #[error("line {line}: switch `{switch}` tags a unary rule")]
    SwitchedUnary { line: usize, switch: String },
    #[error("grammar is invalid: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

/// A violated grammar invariant, as reported by [`Grammar::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    StartNotNonterminal { symbol: String },
    StartHasNoRules { symbol: String },
    BadSymbolName { symbol: String },
    LhsNotNonterminal { rule: RuleId, symbol: String },
    EmptyRhs { rule: RuleId },
    NonPositiveWeight { rule: RuleId, weight: f64 },
    DeadNonterminal { rule: RuleId, symbol: String },
    UnknownSwitch { rule: RuleId },
    UnusedSwitch { switch: String },
    SwitchedUnary { rule: RuleId, switch: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::StartNotNonterminal { symbol } => {
                write!(f, "start symbol `{symbol}` is not a nonterminal")
            }
            Diagnostic::StartHasNoRules { symbol } => {
                write!(f, "start symbol `{symbol}` has no rules")
            }
            Diagnostic::BadSymbolName { symbol } => {
                write!(f, "symbol name `{symbol}` is empty or contains whitespace")
            }
            Diagnostic::LhsNotNonterminal { rule, symbol } => {
                write!(f, "rule {}: left-hand side `{symbol}` is not a nonterminal", rule.0)
            }
            Diagnostic::EmptyRhs { rule } => write!(f, "rule {}: empty right-hand side", rule.0),
            Diagnostic::NonPositiveWeight { rule, weight } => {
                write!(f, "rule {}: weight must be positive, got {weight}", rule.0)
            }
            Diagnostic::DeadNonterminal { rule, symbol } => write!(
                f,
                "dead nonterminal `{symbol}` on the right-hand side of rule {} has no rules",
                rule.0
            ),
            Diagnostic::UnknownSwitch { rule } => {
                write!(f, "rule {}: tagged with an undeclared switch", rule.0)
            }
            Diagnostic::UnusedSwitch { switch } => {
                write!(f, "unused switch `{switch}` tags no rule")
            }
            Diagnostic::SwitchedUnary { rule, switch } => {
                write!(f, "rule {}: switch `{switch}` tags a unary rule", rule.0)
            }
        }
    }
}

/// A probabilistic context-free grammar whose rules may be tagged with
/// order-reversing switches.
///
/// Rule weights are stored as given; [`Grammar::probability`] returns the
/// weight normalized over rules sharing the same left-hand side.
#[derive(Debug, Clone)]
pub struct Grammar {
    symbols: Vec<Symbol>,
    index: HashMap<String, SymbolId>,
    start: SymbolId,
    rules: Vec<Rule>,
    switches: Vec<String>,
    by_lhs: Vec<Vec<RuleId>>,
    probs: Vec<f64>,
}

/// Incremental construction of a grammar. Nothing is validated until
/// [`GrammarBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct GrammarBuilder {
    symbols: Vec<Symbol>,
    index: HashMap<String, SymbolId>,
    start: Option<SymbolId>,
    rules: Vec<Rule>,
    switches: Vec<String>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symbol(&mut self, name: &str) -> SymbolId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = SymbolId(self.symbols.len() as u32);
        self.symbols.push(Symbol {
            name: name.to_string(),
            kind: SymbolKind::of_name(name),
        });
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn start(&mut self, name: &str) -> &mut Self {
        let id = self.symbol(name);
        self.start = Some(id);
        self
    }

    /// Declares a switch; declaration order defines bit positions.
    pub fn switch(&mut self, name: &str) -> usize {
        if let Some(i) = self.switches.iter().position(|s| s == name) {
            return i;
        }
        self.switches.push(name.to_string());
        self.switches.len() - 1
    }

    pub fn switch_index(&self, name: &str) -> Option<usize> {
        self.switches.iter().position(|s| s == name)
    }

    pub fn rule(&mut self, lhs: &str, rhs: &[&str], weight: f64, switch: Option<&str>) -> RuleId {
        let lhs = self.symbol(lhs);
        let rhs = rhs.iter().map(|s| self.symbol(s)).collect();
        let switch = switch.map(|s| self.switch(s));
        self.push_rule(lhs, rhs, weight, switch)
    }

    fn push_rule(
        &mut self,
        lhs: SymbolId,
        rhs: Vec<SymbolId>,
        weight: f64,
        switch: Option<usize>,
    ) -> RuleId {
        let id = RuleId(self.rules.len());
        self.rules.push(Rule {
            id,
            lhs,
            rhs,
            weight,
            switch,
        });
        id
    }

    /// Assembles the grammar without checking any invariant.
    pub fn build_unchecked(self) -> Grammar {
        let start = self.start.unwrap_or(SymbolId(0));
        let mut by_lhs = vec![Vec::new(); self.symbols.len()];
        for r in &self.rules {
            by_lhs[r.lhs.0 as usize].push(r.id);
        }
        let mut probs = vec![0.0; self.rules.len()];
        for ids in &by_lhs {
            let total: f64 = ids.iter().map(|r| self.rules[r.0].weight).sum();
            for r in ids {
                probs[r.0] = self.rules[r.0].weight / total;
            }
        }
        Grammar {
            symbols: self.symbols,
            index: self.index,
            start,
            rules: self.rules,
            switches: self.switches,
            by_lhs,
            probs,
        }
    }

    pub fn build(self) -> Result<Grammar, GrammarError> {
        let g = self.build_unchecked();
        let diags = g.validate();
        if diags.is_empty() {
            Ok(g)
        } else {
            Err(GrammarError::Invalid(diags))
        }
    }
}

impl Grammar {
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.0 as usize]
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id.0 as usize].name
    }

    pub fn symbol_id(&self, name: &str) -> Option<SymbolId> {
        self.index.get(name).copied()
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0]
    }

    pub fn rules_for(&self, lhs: SymbolId) -> &[RuleId] {
        &self.by_lhs[lhs.0 as usize]
    }

    /// Normalized probability of a rule among the alternatives for its
    /// left-hand side.
    pub fn probability(&self, id: RuleId) -> f64 {
        self.probs[id.0]
    }

    pub fn switches(&self) -> &[String] {
        &self.switches
    }

    /// Number of switches, K.
    pub fn num_switches(&self) -> usize {
        self.switches.len()
    }

    pub fn switch_index(&self, name: &str) -> Option<usize> {
        self.switches.iter().position(|s| s == name)
    }

    /// Rule ids governed by the switch at `index`.
    pub fn rule_group(&self, index: usize) -> BTreeSet<RuleId> {
        self.rules
            .iter()
            .filter(|r| r.switch == Some(index))
            .map(|r| r.id)
            .collect()
    }

    pub fn rule_groups(&self) -> Vec<(String, BTreeSet<RuleId>)> {
        (0..self.switches.len())
            .map(|i| (self.switches[i].clone(), self.rule_group(i)))
            .collect()
    }

    /// Checks every grammar invariant; an empty result means the grammar is
    /// well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for s in &self.symbols {
            if s.name.is_empty() || s.name.chars().any(char::is_whitespace) {
                out.push(Diagnostic::BadSymbolName {
                    symbol: s.name.clone(),
                });
            }
        }
        let start = self.symbol(self.start);
        if start.kind != SymbolKind::Nonterminal {
            out.push(Diagnostic::StartNotNonterminal {
                symbol: start.name.clone(),
            });
        } else if self.rules_for(self.start).is_empty() {
            out.push(Diagnostic::StartHasNoRules {
                symbol: start.name.clone(),
            });
        }
        let mut used = vec![false; self.switches.len()];
        for r in &self.rules {
            let lhs = self.symbol(r.lhs);
            if lhs.kind != SymbolKind::Nonterminal {
                out.push(Diagnostic::LhsNotNonterminal {
                    rule: r.id,
                    symbol: lhs.name.clone(),
                });
            }
            if r.rhs.is_empty() {
                out.push(Diagnostic::EmptyRhs { rule: r.id });
            }
            if !(r.weight > 0.0 && r.weight.is_finite()) {
                out.push(Diagnostic::NonPositiveWeight {
                    rule: r.id,
                    weight: r.weight,
                });
            }
            let mut reported = BTreeSet::new();
            for &s in &r.rhs {
                let sym = self.symbol(s);
                if sym.kind == SymbolKind::Nonterminal
                    && self.rules_for(s).is_empty()
                    && reported.insert(s)
                {
                    out.push(Diagnostic::DeadNonterminal {
                        rule: r.id,
                        symbol: sym.name.clone(),
                    });
                }
            }
            if let Some(sw) = r.switch {
                match used.get_mut(sw) {
                    Some(u) => *u = true,
                    None => out.push(Diagnostic::UnknownSwitch { rule: r.id }),
                }
                if r.rhs.len() < 2 {
                    out.push(Diagnostic::SwitchedUnary {
                        rule: r.id,
                        switch: self.switches.get(sw).cloned().unwrap_or_default(),
                    });
                }
            }
        }
        for (i, u) in used.iter().enumerate() {
            if !u {
                out.push(Diagnostic::UnusedSwitch {
                    switch: self.switches[i].clone(),
                });
            }
        }
        out
    }

    /// Renders the grammar in the line-oriented grammar file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("start {}\n", self.name(self.start)));
        for sw in &self.switches {
            s.push_str(&format!("switch {sw}\n"));
        }
        for r in &self.rules {
            s.push_str("rule ");
            s.push_str(self.name(r.lhs));
            s.push_str(" ->");
            for &x in &r.rhs {
                s.push(' ');
                s.push_str(self.name(x));
            }
            s.push_str(&format!(" : {}", r.weight));
            if let Some(sw) = r.switch {
                s.push_str(&format!(" @{}", self.switches[sw]));
            }
            s.push('\n');
        }
        s
    }

    /// SHA-256 of the canonical text rendering, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Parses and validates a grammar file.
///
/// ```text
/// # comment
/// start S
/// switch S
/// rule S -> NP VP : 1.0 @S
/// ```
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    parse_unchecked(text)?.build()
}

/// Parses a grammar file, reporting only syntax-level errors.
pub fn parse_unchecked(text: &str) -> Result<GrammarBuilder, GrammarError> {
    let mut b = GrammarBuilder::new();
    let mut start_line = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let tokens = tokenize(content);
        let Some(&(col, head)) = tokens.first() else {
            continue;
        };
        let syntax = |column: usize, message: String| GrammarError::Syntax {
            line,
            column,
            message,
        };
        match head {
            "start" => {
                if tokens.len() != 2 {
                    return Err(syntax(col, "expected `start <NT>`".into()));
                }
                b.start(tokens[1].1);
                start_line = Some(line);
            }
            "switch" => {
                if tokens.len() != 2 {
                    return Err(syntax(col, "expected `switch <name>`".into()));
                }
                b.switch(tokens[1].1);
            }
            "rule" => {
                let arrow = tokens.get(2);
                if tokens.len() < 2 || arrow.map(|t| t.1) != Some("->") {
                    let c = arrow.or(tokens.get(1)).map_or(col, |t| t.0);
                    return Err(syntax(c, "expected `rule <LHS> -> ...`".into()));
                }
                let lhs = tokens[1];
                let Some(colon) = tokens.iter().position(|t| t.1 == ":") else {
                    return Err(syntax(col, "missing `: <weight>`".into()));
                };
                let rhs = &tokens[3..colon];
                if rhs.is_empty() {
                    return Err(syntax(tokens[2].0, "empty right-hand side".into()));
                }
                let rest = &tokens[colon + 1..];
                let Some(&(wcol, wtext)) = rest.first() else {
                    return Err(syntax(tokens[colon].0, "missing weight".into()));
                };
                let weight: f64 = wtext
                    .parse()
                    .map_err(|_| syntax(wcol, format!("invalid weight `{wtext}`")))?;
                if !(weight > 0.0 && weight.is_finite()) {
                    return Err(GrammarError::NonPositiveWeight { line, weight });
                }
                let switch = match rest.get(1) {
                    None => None,
                    Some(&(scol, tag)) => {
                        let Some(name) = tag.strip_prefix('@').filter(|n| !n.is_empty()) else {
                            return Err(syntax(scol, format!("expected `@<switch>`, got `{tag}`")));
                        };
                        if rest.len() > 2 {
                            return Err(syntax(rest[2].0, "trailing tokens after switch".into()));
                        }
                        let Some(idx) = b.switch_index(name) else {
                            return Err(GrammarError::UndeclaredSwitch {
                                line,
                                name: name.to_string(),
                            });
                        };
                        if rhs.len() < 2 {
                            return Err(GrammarError::SwitchedUnary {
                                line,
                                switch: name.to_string(),
                            });
                        }
                        Some(idx)
                    }
                };
                if SymbolKind::of_name(lhs.1) != SymbolKind::Nonterminal {
                    return Err(GrammarError::UnknownSymbol {
                        line,
                        name: lhs.1.to_string(),
                        reason: "left-hand side must be a nonterminal".into(),
                    });
                }
                let lhs = b.symbol(lhs.1);
                let rhs = rhs.iter().map(|t| b.symbol(t.1)).collect();
                b.push_rule(lhs, rhs, weight, switch);
            }
            other => return Err(syntax(col, format!("unknown directive `{other}`"))),
        }
    }
    let Some(start) = b.start else {
        return Err(GrammarError::Syntax {
            line: 1,
            column: 1,
            message: "missing `start` directive".into(),
        });
    };
    let name = b.symbols[start.0 as usize].name.clone();
    let line = start_line.unwrap_or(1);
    if SymbolKind::of_name(&name) != SymbolKind::Nonterminal {
        return Err(GrammarError::UnknownSymbol {
            line,
            name,
            reason: "start symbol must be a nonterminal".into(),
        });
    }
    if !b.rules.iter().any(|r| r.lhs == start) {
        return Err(GrammarError::UnknownSymbol {
            line,
            name,
            reason: "start symbol has no rules".into(),
        });
    }
    Ok(b)
}

/// Whitespace-separated tokens with their 1-based column.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((line[..s].chars().count() + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((line[..s].chars().count() + 1, &line[s..]));
    }
    out
}

/// Preterminal rules for every surface form of the lexicon, in the grammar
/// file format, one rule per form with weight 1.
pub fn lexical_rules(lex: &Lexicon) -> String {
    let mut s = String::from("# lexical rules\n");
    let mut push = |lhs: &str, form: &str| s.push_str(&format!("rule {lhs} -> {form} : 1\n"));
    for e in lex.entries() {
        for (feats, form) in e.forms() {
            let lhs = match (e.pos, feats.number, feats.tense) {
                (Pos::Noun, Number::Sg, _) => "Noun_sg",
                (Pos::Noun, Number::Pl, _) => "Noun_pl",
                (Pos::Verb, Number::Sg, Tense::Present) => "Verb_sg_pres",
                (Pos::Verb, Number::Sg, Tense::Past) => "Verb_sg_past",
                (Pos::Verb, Number::Pl, Tense::Present) => "Verb_pl_pres",
                (Pos::Verb, Number::Pl, Tense::Past) => "Verb_pl_past",
                (Pos::Adjective, _, _) => "Adj",
                (Pos::Preposition, _, _) => "Prep",
                (Pos::Pronoun, Number::Sg, _) => "Pronoun_sg",
                (Pos::Pronoun, Number::Pl, _) => "Pronoun_pl",
                _ => continue,
            };
            push(lhs, form);
        }
    }
    for (role, lhs) in [
        (Role::SubjectMarker, "Subj"),
        (Role::ObjectMarker, "Obj"),
        (Role::Relativizer, "Rel"),
        (Role::Complementizer, "Comp"),
    ] {
        push(lhs, lex.particle(role));
    }
    s
}

/// Full text of the built-in base grammar: the structural rules followed by
/// lexical rules for the built-in lexicon.
pub fn base_grammar_text() -> String {
    base_grammar_text_with(&Lexicon::builtin())
}

pub fn base_grammar_text_with(lex: &Lexicon) -> String {
    let mut s = BASE_STRUCTURE.to_string();
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s.push_str(&lexical_rules(lex));
    s
}

/// The built-in six-switch base grammar.
pub fn base_grammar() -> Grammar {
    parse_grammar(&base_grammar_text()).expect("built-in grammar is valid")
}
