//! Pseudoword vocabulary and its inflection rules.
//!
//! The built-in lexicon is generated from a fixed seed by a small
//! onset–vowel–coda syllable template, then inflected with English-like
//! suffixation:
//!
//! * noun plural: `+es` after a sibilant (`s`, `x`, `z`, `ch`, `sh`), else `+s`;
//! * verb present singular: `+es` after a sibilant or `o`, consonant + `y`
//!   becomes `ies`, else `+s`; present plural is the bare lemma;
//! * verb past singular: `+d` after `e`, consonant + `y` becomes `ied`,
//!   else `+ed`;
//! * verb past plural: lemma + [`PLURAL_PAST_SUFFIX`].
//!
//! A handful of words are always present so that fixed example sentences can
//! be reproduced: nouns `fusbender`, `serd`; verbs `povify`, `povicate`,
//! `strovokicize`; pronoun `me`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const LEXICON_SEED: u64 = 0x5eed_2021;
pub const PLURAL_PAST_SUFFIX: &str = "da";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Pronoun,
    Preposition,
    Particle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Number {
    Sg,
    Pl,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tense {
    Present,
    Past,
    NotApplicable,
}

/// Feature bundle keying a surface form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Features {
    pub number: Number,
    pub tense: Tense,
}

impl Features {
    pub const NONE: Features = Features {
        number: Number::NotApplicable,
        tense: Tense::NotApplicable,
    };

    pub fn new(number: Number, tense: Tense) -> Self {
        Features { number, tense }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    SubjectMarker,
    ObjectMarker,
    Relativizer,
    Complementizer,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::SubjectMarker,
        Role::ObjectMarker,
        Role::Relativizer,
        Role::Complementizer,
    ];
}

macro_rules! string_enum {
    ($ty:ty { $($variant:path => $s:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $s),* })
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($variant),)*
                    other => Err(format!("unrecognized value `{other}`")),
                }
            }
        }
    };
}

string_enum!(Pos {
    Pos::Noun => "noun",
    Pos::Verb => "verb",
    Pos::Adjective => "adjective",
    Pos::Pronoun => "pronoun",
    Pos::Preposition => "preposition",
    Pos::Particle => "particle",
});
string_enum!(Number { Number::Sg => "sg", Number::Pl => "pl", Number::NotApplicable => "na" });
string_enum!(Tense {
    Tense::Present => "present",
    Tense::Past => "past",
    Tense::NotApplicable => "na",
});
string_enum!(Role {
    Role::SubjectMarker => "subject_marker",
    Role::ObjectMarker => "object_marker",
    Role::Relativizer => "relativizer",
    Role::Complementizer => "complementizer",
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexEntry {
    pub lemma: String,
    pub pos: Pos,
    forms: BTreeMap<Features, String>,
}

impl LexEntry {
    pub fn forms(&self) -> impl Iterator<Item = (Features, &str)> {
        self.forms.iter().map(|(f, s)| (*f, s.as_str()))
    }

    pub fn form(&self, features: Features) -> Option<&str> {
        self.forms.get(&features).map(String::as_str)
    }

    pub fn noun(lemma: &str) -> Self {
        let mut forms = BTreeMap::new();
        forms.insert(Features::new(Number::Sg, Tense::NotApplicable), lemma.to_string());
        forms.insert(Features::new(Number::Pl, Tense::NotApplicable), pluralize(lemma));
        LexEntry { lemma: lemma.to_string(), pos: Pos::Noun, forms }
    }

    pub fn verb(lemma: &str) -> Self {
        let mut forms = BTreeMap::new();
        forms.insert(Features::new(Number::Sg, Tense::Present), third_singular(lemma));
        forms.insert(Features::new(Number::Pl, Tense::Present), lemma.to_string());
        forms.insert(Features::new(Number::Sg, Tense::Past), past(lemma));
        forms.insert(
            Features::new(Number::Pl, Tense::Past),
            format!("{lemma}{PLURAL_PAST_SUFFIX}"),
        );
        LexEntry { lemma: lemma.to_string(), pos: Pos::Verb, forms }
    }

    /// An uninflected word (adjective, preposition, or pronoun).
    pub fn invariant(lemma: &str, pos: Pos, number: Number) -> Self {
        let mut forms = BTreeMap::new();
        forms.insert(Features::new(number, Tense::NotApplicable), lemma.to_string());
        LexEntry { lemma: lemma.to_string(), pos, forms }
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn sibilant(w: &str) -> bool {
    ["s", "x", "z", "ch", "sh"].iter().any(|s| w.ends_with(s))
}

fn consonant_y(w: &str) -> bool {
    let mut it = w.chars().rev();
    matches!((it.next(), it.next()), (Some('y'), Some(c)) if !is_vowel(c))
}

pub fn pluralize(noun: &str) -> String {
    if sibilant(noun) {
        format!("{noun}es")
    } else {
        format!("{noun}s")
    }
}

pub fn third_singular(verb: &str) -> String {
    if sibilant(verb) || verb.ends_with('o') {
        format!("{verb}es")
    } else if consonant_y(verb) {
        format!("{}ies", &verb[..verb.len() - 1])
    } else {
        format!("{verb}s")
    }
}

pub fn past(verb: &str) -> String {
    if verb.ends_with('e') {
        format!("{verb}d")
    } else if consonant_y(verb) {
        format!("{}ied", &verb[..verb.len() - 1])
    } else {
        format!("{verb}ed")
    }
}

/// Grammatical annotation of a single token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annotation {
    pub pos: Pos,
    pub features: Features,
    /// Set only for particles.
    pub role: Option<Role>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("entry `{lemma}`: {message}")]
    Entry { lemma: String, message: String },
    #[error("surface form `{0}` is used more than once")]
    DuplicateForm(String),
    #[error("missing particle for role {0}")]
    MissingParticle(Role),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSizes {
    pub nouns: usize,
    pub verbs: usize,
    pub adjectives: usize,
    pub prepositions: usize,
    pub pronouns: usize,
}

impl Default for VocabSizes {
    fn default() -> Self {
        VocabSizes {
            nouns: 120,
            verbs: 80,
            adjectives: 40,
            prepositions: 10,
            pronouns: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<LexEntry>,
    particles: BTreeMap<Role, String>,
    index: HashMap<String, Annotation>,
}

impl Lexicon {
    /// Builds a lexicon, checking that every surface form is well formed and
    /// maps to exactly one annotation.
    pub fn new(entries: Vec<LexEntry>, particles: BTreeMap<Role, String>) -> Result<Self, LexiconError> {
        let mut index = HashMap::new();
        for role in Role::ALL {
            let Some(p) = particles.get(&role) else {
                return Err(LexiconError::MissingParticle(role));
            };
            check_form(p, &role.to_string())?;
            let ann = Annotation { pos: Pos::Particle, features: Features::NONE, role: Some(role) };
            if index.insert(p.clone(), ann).is_some() {
                return Err(LexiconError::DuplicateForm(p.clone()));
            }
        }
        for e in &entries {
            let bad = |message: &str| LexiconError::Entry {
                lemma: e.lemma.clone(),
                message: message.to_string(),
            };
            match e.pos {
                Pos::Noun => {
                    let want = [Number::Sg, Number::Pl].map(|n| Features::new(n, Tense::NotApplicable));
                    if e.forms.len() != 2 || !want.iter().all(|f| e.forms.contains_key(f)) {
                        return Err(bad("nouns need exactly a sg and a pl form"));
                    }
                }
                Pos::Verb => {
                    let ok = e.forms.len() == 4
                        && [Number::Sg, Number::Pl].iter().all(|&n| {
                            [Tense::Present, Tense::Past]
                                .iter()
                                .all(|&t| e.forms.contains_key(&Features::new(n, t)))
                        });
                    if !ok {
                        return Err(bad("verbs need all four number x tense forms"));
                    }
                }
                Pos::Particle => return Err(bad("particles belong in the particle table")),
                _ => {
                    if e.forms.len() != 1 {
                        return Err(bad("uninflected words have exactly one form"));
                    }
                }
            }
            for (f, s) in &e.forms {
                check_form(s, &e.lemma)?;
                let ann = Annotation { pos: e.pos, features: *f, role: None };
                if index.insert(s.clone(), ann).is_some() {
                    return Err(LexiconError::DuplicateForm(s.clone()));
                }
            }
        }
        Ok(Lexicon { entries, particles, index })
    }

    /// The shipped lexicon with default vocabulary sizes.
    pub fn builtin() -> Self {
        Self::generate(LEXICON_SEED, VocabSizes::default())
    }

    /// Generates a pseudoword lexicon. The same seed and sizes always give
    /// the same lexicon.
    pub fn generate(seed: u64, sizes: VocabSizes) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let particles: BTreeMap<Role, String> = [
            (Role::SubjectMarker, "sub"),
            (Role::ObjectMarker, "ob"),
            (Role::Relativizer, "rel"),
            (Role::Complementizer, "sa"),
        ]
        .into_iter()
        .map(|(r, s)| (r, s.to_string()))
        .collect();
        let mut taken: HashSet<String> = particles.values().cloned().collect();
        let mut entries = Vec::new();
        let mut add = |e: LexEntry, taken: &mut HashSet<String>, entries: &mut Vec<LexEntry>| {
            if e.forms.values().all(|f| !taken.contains(f)) {
                let forms: HashSet<&String> = e.forms.values().collect();
                if forms.len() == e.forms.len() {
                    taken.extend(e.forms.values().cloned());
                    entries.push(e);
                    return true;
                }
            }
            false
        };

        if sizes.pronouns > 0 {
            add(LexEntry::invariant("me", Pos::Pronoun, Number::Sg), &mut taken, &mut entries);
        }
        for n in ["fusbender", "serd"].iter().take(sizes.nouns) {
            add(LexEntry::noun(n), &mut taken, &mut entries);
        }
        fill(&mut rng, sizes.nouns, |rng| LexEntry::noun(&noun_word(rng)), &mut add, &mut taken, &mut entries);
        for v in ["povify", "povicate", "strovokicize"].iter().take(sizes.verbs) {
            add(LexEntry::verb(v), &mut taken, &mut entries);
        }
        fill(&mut rng, sizes.verbs, |rng| LexEntry::verb(&verb_word(rng)), &mut add, &mut taken, &mut entries);
        fill(
            &mut rng,
            sizes.adjectives,
            |rng| LexEntry::invariant(&adjective_word(rng), Pos::Adjective, Number::NotApplicable),
            &mut add,
            &mut taken,
            &mut entries,
        );
        fill(
            &mut rng,
            sizes.prepositions,
            |rng| LexEntry::invariant(&short_word(rng), Pos::Preposition, Number::NotApplicable),
            &mut add,
            &mut taken,
            &mut entries,
        );
        // pronouns alternate sg / pl after "me"
        let mut k = 1;
        while k < sizes.pronouns {
            let number = if k % 2 == 0 { Number::Sg } else { Number::Pl };
            let w = short_word(&mut rng);
            if add(LexEntry::invariant(&w, Pos::Pronoun, number), &mut taken, &mut entries) {
                k += 1;
            }
        }
        Lexicon::new(entries, particles).expect("generated lexicon is consistent")
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    pub fn entry(&self, lemma: &str) -> Option<&LexEntry> {
        self.entries.iter().find(|e| e.lemma == lemma)
    }

    pub fn particle(&self, role: Role) -> &str {
        &self.particles[&role]
    }

    pub fn particles(&self) -> &BTreeMap<Role, String> {
        &self.particles
    }

    /// Number of distinct surface tokens, particles included.
    pub fn surface_count(&self) -> usize {
        self.index.len()
    }

    pub fn features_of(&self, token: &str) -> Result<Annotation, LexiconError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| LexiconError::UnknownToken(token.to_string()))
    }

    /// Tab-separated line format: `lemma<TAB>pos<TAB>form=number/tense;...`.
    /// Particles are written with the role name as lemma.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (role, p) in &self.particles {
            s.push_str(&format!("{role}\tparticle\t{p}=na/na\n"));
        }
        for e in &self.entries {
            let forms: Vec<String> = e
                .forms
                .iter()
                .map(|(f, w)| format!("{w}={}/{}", f.number, f.tense))
                .collect();
            s.push_str(&format!("{}\t{}\t{}\n", e.lemma, e.pos, forms.join(";")));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        let mut particles = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| LexiconError::Format { line: i + 1, message };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 tab-separated columns, got {}", cols.len())));
            }
            let pos: Pos = cols[1].parse().map_err(err)?;
            let mut forms = BTreeMap::new();
            for item in cols[2].split(';') {
                let (w, feats) = item.split_once('=').ok_or_else(|| err(format!("bad form `{item}`")))?;
                let (n, t) = feats.split_once('/').ok_or_else(|| err(format!("bad features `{feats}`")))?;
                let f = Features::new(n.parse().map_err(err)?, t.parse().map_err(err)?);
                if forms.insert(f, w.to_string()).is_some() {
                    return Err(err(format!("feature bundle repeated in `{}`", cols[0])));
                }
            }
            if pos == Pos::Particle {
                let role: Role = cols[0].parse().map_err(err)?;
                let [(_, w)]: [(Features, String); 1] = forms
                    .into_iter()
                    .collect::<Vec<_>>()
                    .try_into()
                    .map_err(|_| err("particles have exactly one form".into()))?;
                particles.insert(role, w);
            } else {
                entries.push(LexEntry { lemma: cols[0].to_string(), pos, forms });
            }
        }
        Lexicon::new(entries, particles)
    }
}

fn check_form(s: &str, owner: &str) -> Result<(), LexiconError> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
        return Err(LexiconError::Entry {
            lemma: owner.to_string(),
            message: format!("surface form `{s}` must be non-empty, lowercase, whitespace-free"),
        });
    }
    Ok(())
}

fn fill<R, G, A>(
    rng: &mut R,
    target: usize,
    mut generate: G,
    add: &mut A,
    taken: &mut HashSet<String>,
    entries: &mut Vec<LexEntry>,
) where
    R: Rng,
    G: FnMut(&mut R) -> LexEntry,
    A: FnMut(LexEntry, &mut HashSet<String>, &mut Vec<LexEntry>) -> bool,
{
    let pos = generate(rng).pos;
    while entries.iter().filter(|e| e.pos == pos).count() < target {
        let e = generate(rng);
        add(e, taken, entries);
    }
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "fl", "gr",
    "pl", "sk", "sp", "st", "str", "tr", "kl", "sn", "bl", "th",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ee", "oo", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "t", "m", "l", "nd", "st", "rk", "mp", "nt"];

fn syllable<R: Rng>(rng: &mut R, coda: bool) -> String {
    let mut s = String::new();
    s.push_str(ONSETS.choose(rng).unwrap());
    s.push_str(VOWELS.choose(rng).unwrap());
    if coda {
        s.push_str(CODAS.choose(rng).unwrap());
    }
    s
}

fn noun_word<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=2);
    let mut w: String = (0..n).map(|i| syllable(rng, i + 1 == n)).collect();
    w.push_str(["", "", "er", "on", "el", "et"].choose(rng).unwrap());
    w
}

fn verb_word<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=2);
    let mut w: String = (0..n).map(|_| syllable(rng, false)).collect();
    w.push_str(["ify", "icate", "icize", "en", "ish", "ate", "ulp", "ast"].choose(rng).unwrap());
    w
}

fn adjective_word<R: Rng>(rng: &mut R) -> String {
    let mut w = syllable(rng, true);
    w.push_str(["ous", "al", "ic", "y", "ful", "ive"].choose(rng).unwrap());
    w
}

fn short_word<R: Rng>(rng: &mut R) -> String {
    let onset = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "t", "v", "z"].choose(rng).unwrap();
    let vowel = ["a", "e", "i", "o", "u"].choose(rng).unwrap();
    let coda = ["", "", "n", "k", "p"].choose(rng).unwrap();
    format!("{onset}{vowel}{coda}")
}
