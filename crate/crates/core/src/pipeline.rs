//! End-to-end stages behind the command-line tool.
//!
//! Everything lives under one output directory:
//!
//! ```text
//! <out>/corpus/    generate: parallel corpora + manifest.json + grammar.txt
//! <out>/scores/    score: grammar-<name>/split-<i>.tsv, averages.csv,
//!                  corpus_perplexity.csv, manifest.json
//! <out>/analysis/  analyze: fit.json, coefficients.csv, heatmap.csv/.svg,
//!                  groups.csv, distribution.csv, density.csv, manifest.json
//! ```
//!
//! `score` can be replaced by any external scorer that writes scores files;
//! pass them to `analyze` with `--scores`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    coefficient_heatmap, distribution_report, fit_mixed, group_report, heatmap_svg, ingest_scores,
    write_density_csv, write_group_csv, write_heatmap_csv, write_summary_csv, AnalysisError, Coding,
    DesignMatrix, Distribution, FitOptions, GroupRow, Heatmap, MixedModelFit, PerplexityMatrix,
};
use crate::grammar::{base_grammar_text_with, lexical_rules, parse_grammar, parse_unchecked, Grammar, GrammarError};
use crate::lexicon::{Lexicon, LexiconError};
use crate::ngram::{score_sentences, write_scores_file, NGramError, NGramModel, SentenceScore, Smoothing};
use crate::switching::{
    corpus_path, generate_parallel, read_corpus, read_manifest, word_order_of, CorpusError, CorpusManifest,
    CorpusPlan, Section, SwitchVector, MANIFEST_FILE,
};

pub const CORPUS_DIR: &str = "corpus";
pub const SCORES_DIR: &str = "scores";
pub const ANALYSIS_DIR: &str = "analysis";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    NGram(#[from] NGramError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Config(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

fn file_hash(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GrammarSource {
    Builtin,
    File(PathBuf),
}

impl GrammarSource {
    /// `"builtin"` or a path.
    pub fn from_arg(s: &str) -> Self {
        if s == "builtin" {
            GrammarSource::Builtin
        } else {
            GrammarSource::File(PathBuf::from(s))
        }
    }
}

/// Where the perplexities analyzed by `analyze` come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    /// The n-gram scores written by `score` under `<out>/scores`.
    Internal { order: usize, smoothing: String },
    /// Scores files written by an external scorer.
    External(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub grammar: GrammarSource,
    /// Replacement lexicon in the lexicon line format.
    pub lexicon: Option<PathBuf>,
    pub plan: CorpusPlan,
    pub order: usize,
    #[serde(serialize_with = "display")]
    pub smoothing: Smoothing,
    /// External scores files; when non-empty they replace the internal
    /// n-gram scores in `analyze`.
    pub scores: Vec<PathBuf>,
    pub out: PathBuf,
    pub coding: Coding,
    pub reml: bool,
    pub svg: bool,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl PipelineConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            grammar: GrammarSource::Builtin,
            lexicon: None,
            plan: CorpusPlan::paper(0),
            order: 3,
            smoothing: Smoothing::KneserNey,
            scores: Vec::new(),
            out: out.into(),
            coding: Coding::Binary,
            reml: false,
            svg: true,
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.out.join(CORPUS_DIR)
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.out.join(SCORES_DIR)
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.out.join(ANALYSIS_DIR)
    }

    pub fn score_source(&self) -> ScoreSource {
        if self.scores.is_empty() {
            ScoreSource::Internal {
                order: self.order,
                smoothing: self.smoothing.to_string(),
            }
        } else {
            ScoreSource::External(self.scores.clone())
        }
    }

    /// Grammar file text after applying the lexicon, if one was given.
    pub fn grammar_text(&self) -> Result<String, PipelineError> {
        let lexicon = match &self.lexicon {
            Some(p) => Some(Lexicon::parse(&fs::read_to_string(p).map_err(io_err(p))?)?),
            None => None,
        };
        Ok(match &self.grammar {
            GrammarSource::Builtin => base_grammar_text_with(&lexicon.unwrap_or_else(Lexicon::builtin)),
            GrammarSource::File(p) => {
                let mut text = fs::read_to_string(p).map_err(io_err(p))?;
                if let Some(lex) = lexicon {
                    if !text.ends_with('\n') {
                        text.push('\n');
                    }
                    text.push_str(&lexical_rules(&lex));
                }
                text
            }
        })
    }

    pub fn load_grammar(&self) -> Result<Grammar, PipelineError> {
        Ok(parse_grammar(&self.grammar_text()?)?)
    }
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, Serialize)]
pub struct GenerateSummary {
    pub root: PathBuf,
    pub grammars: usize,
    pub sentences: usize,
    pub section_sizes: [usize; 3],
    pub grammar_hash: String,
}

/// Samples the plan and writes every grammar's corpus under
/// `<out>/corpus`, plus the grammar text used.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<GenerateSummary, PipelineError> {
    let text = cfg.grammar_text()?;
    let g = parse_grammar(&text)?;
    let root = cfg.corpus_dir();
    let corpus = generate_parallel(&g, &cfg.plan, &root)?;
    write_file(&root.join("grammar.txt"), &g.to_text())?;
    Ok(GenerateSummary {
        root,
        grammars: corpus.grammar_names.len(),
        sentences: corpus.trees.len(),
        section_sizes: corpus.section_sizes,
        grammar_hash: g.content_hash(),
    })
}

// ---------------------------------------------------------------- score

/// Per-grammar test perplexities of one scoring run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRun {
    pub grammar_names: Vec<String>,
    pub num_splits: usize,
    /// Per grammar, per split; sentence ids are global corpus indices.
    pub scores: Vec<Vec<Vec<SentenceScore>>>,
    /// Per grammar, per split: `exp` of the mean token NLL over the test section.
    pub corpus_perplexity: Vec<Vec<f64>>,
}

impl ScoreRun {
    pub fn all_scores(&self) -> Vec<SentenceScore> {
        self.scores.iter().flatten().flatten().cloned().collect()
    }

    /// Mean test perplexity of every (grammar, split) model.
    pub fn model_means(&self) -> Vec<Vec<f64>> {
        self.scores
            .iter()
            .map(|splits| {
                splits
                    .iter()
                    .map(|s| s.iter().map(|x| x.perplexity).sum::<f64>() / s.len() as f64)
                    .collect()
            })
            .collect()
    }

    /// Grand average over a grammar's models.
    pub fn grammar_averages(&self) -> Vec<f64> {
        self.model_means()
            .iter()
            .map(|m| m.iter().sum::<f64>() / m.len() as f64)
            .collect()
    }
}

/// Trains one model per (grammar, split) on the train section and scores
/// the test section. Runs in memory; see [`cmd_score`] for the files.
pub fn score_corpus_dir(root: &Path, order: usize, smoothing: Smoothing) -> Result<(CorpusManifest, ScoreRun), PipelineError> {
    let manifest = read_manifest(root)?;
    let plan = manifest.plan;
    let mut scores = Vec::with_capacity(manifest.grammar_names.len());
    let mut corpus_perplexity = Vec::with_capacity(manifest.grammar_names.len());
    for name in &manifest.grammar_names {
        let mut per_split = Vec::with_capacity(plan.num_splits);
        let mut corpus_ppl = Vec::with_capacity(plan.num_splits);
        for split in 0..plan.num_splits {
            let train = read_corpus(&corpus_path(root, name, split, Section::Train))?;
            let test = read_corpus(&corpus_path(root, name, split, Section::Test))?;
            let model = NGramModel::train(&train, order, smoothing)?;
            let scored = score_sentences(&model, &test, name);
            corpus_ppl.push(scored.corpus_perplexity);
            let mut run = scored.scores;
            for (line, s) in run.iter_mut().enumerate() {
                s.sentence_id = plan.sentence_index(split, Section::Test, line)?;
            }
            per_split.push(run);
        }
        scores.push(per_split);
        corpus_perplexity.push(corpus_ppl);
    }
    let run = ScoreRun {
        grammar_names: manifest.grammar_names.clone(),
        num_splits: plan.num_splits,
        scores,
        corpus_perplexity,
    };
    Ok((manifest, run))
}

pub fn scores_file(dir: &Path, grammar: &str, split: usize) -> PathBuf {
    dir.join(format!("grammar-{grammar}")).join(format!("split-{split}.tsv"))
}

#[derive(Debug, Serialize)]
struct ScoreManifest<'a> {
    tool: &'a str,
    version: &'a str,
    corpus_manifest_sha256: String,
    order: usize,
    smoothing: String,
    files: Vec<String>,
}

/// `grammar,split_0,..,average` rows.
fn split_table(names: &[String], values: &[Vec<f64>]) -> String {
    let splits = values.first().map_or(0, Vec::len);
    let mut table = String::from("grammar");
    for split in 0..splits {
        table.push_str(&format!(",split_{split}"));
    }
    table.push_str(",average\n");
    for (name, row) in names.iter().zip(values) {
        table.push_str(name);
        for v in row {
            table.push_str(&format!(",{v}"));
        }
        table.push_str(&format!(",{}\n", row.iter().sum::<f64>() / row.len() as f64));
    }
    table
}

/// Scores `<out>/corpus` and writes one scores file per (grammar, split),
/// `averages.csv` (mean per-sentence perplexity), `corpus_perplexity.csv`
/// (token-level) and a manifest under `<out>/scores`.
pub fn cmd_score(cfg: &PipelineConfig) -> Result<ScoreRun, PipelineError> {
    let corpus = cfg.corpus_dir();
    let (_, run) = score_corpus_dir(&corpus, cfg.order, cfg.smoothing)?;
    let dir = cfg.scores_dir();
    let mut files = Vec::new();
    for (name, splits) in run.grammar_names.iter().zip(&run.scores) {
        for (split, scores) in splits.iter().enumerate() {
            let path = scores_file(&dir, name, split);
            let parent = path.parent().expect("scores path has a parent");
            fs::create_dir_all(parent).map_err(io_err(parent))?;
            write_scores_file(&path, scores)?;
            files.push(path.strip_prefix(&dir).expect("under dir").display().to_string());
        }
    }

    let table = split_table(&run.grammar_names, &run.model_means());
    write_file(&dir.join("averages.csv"), &table)?;
    write_file(&dir.join("corpus_perplexity.csv"), &split_table(&run.grammar_names, &run.corpus_perplexity))?;

    let manifest = ScoreManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        corpus_manifest_sha256: file_hash(&corpus.join(MANIFEST_FILE))?,
        order: cfg.order,
        smoothing: cfg.smoothing.to_string(),
        files,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(run)
}

/// Every `.tsv` file below `dir`, sorted.
pub fn find_scores_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(io_err(&d))? {
            let path = entry.map_err(io_err(&d))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "tsv") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

// ---------------------------------------------------------------- analyze

/// Everything `analyze` reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub fit: MixedModelFit,
    pub heatmap: Heatmap,
    pub groups: Vec<GroupRow>,
    /// One label per basic word order, over per-grammar average perplexity.
    pub distributions: Vec<Distribution>,
    pub grammar_means: Vec<(String, f64)>,
}

/// Switch names for `k`-bit grammar names: the grammar's own names when
/// the counts agree, otherwise `b0, b1, ...`.
pub fn switch_names_for(k: usize, g: Option<&Grammar>) -> Vec<String> {
    match g {
        Some(g) if g.num_switches() == k => g.switches().to_vec(),
        _ => (0..k).map(|i| format!("b{i}")).collect(),
    }
}

pub fn analyze_matrix(
    l: &PerplexityMatrix,
    switch_names: &[String],
    coding: Coding,
    opts: FitOptions,
) -> Result<Analysis, PipelineError> {
    let k = switch_names.len();
    let design = DesignMatrix::for_grammars(&l.grammar_names, switch_names, coding)?;
    let fit = fit_mixed(l, &design, opts)?;
    let heatmap = coefficient_heatmap(&fit, k);
    let groups = group_report(l)?;
    let means = l.grammar_means();
    let mut by_order: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, &m) in l.grammar_names.iter().zip(&means) {
        let b = SwitchVector::parse(name).ok_or_else(|| AnalysisError::GrammarName(name.clone()))?;
        let label = word_order_of(&b).to_string();
        match by_order.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push(m),
            None => by_order.push((label, vec![m])),
        }
    }
    // a density needs two points; small grammars can have singleton groups
    by_order.retain(|(_, v)| v.len() >= 2);
    by_order.sort_by(|a, b| a.0.cmp(&b.0));
    let distributions = distribution_report(&by_order)?;
    Ok(Analysis {
        fit,
        heatmap,
        groups,
        distributions,
        grammar_means: l.grammar_names.iter().cloned().zip(means).collect(),
    })
}

pub fn write_analysis(dir: &Path, a: &Analysis, svg: bool) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("fit.json"), &a.fit)?;
    write_summary_csv(&dir.join("coefficients.csv"), &a.fit)?;
    write_heatmap_csv(&dir.join("heatmap.csv"), &a.heatmap)?;
    write_group_csv(&dir.join("groups.csv"), &a.groups)?;
    write_density_csv(&dir.join("density.csv"), &a.distributions)?;
    let mut dist = String::from("label,count,min,max,mean,variance,bandwidth\n");
    for d in &a.distributions {
        dist.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.label, d.count, d.min, d.max, d.mean, d.variance, d.bandwidth
        ));
    }
    write_file(&dir.join("distribution.csv"), &dist)?;
    let mut means = String::from("grammar,mean_perplexity\n");
    for (g, m) in &a.grammar_means {
        means.push_str(&format!("{g},{m}\n"));
    }
    write_file(&dir.join("grammar_means.csv"), &means)?;
    if svg {
        write_file(&dir.join("heatmap.svg"), &heatmap_svg(&a.heatmap))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalysisManifest<'a> {
    tool: &'a str,
    version: &'a str,
    source: ScoreSource,
    coding: Coding,
    reml: bool,
    switch_names: Vec<String>,
    /// Scores were pooled over splits; split identity is not modeled.
    pooled_over_splits: bool,
    inputs: Vec<(String, String)>,
}

/// Ingests scores (external files, or everything under `<out>/scores`),
/// fits the mixed model and writes the reports under `<out>/analysis`.
pub fn cmd_analyze(cfg: &PipelineConfig) -> Result<Analysis, PipelineError> {
    let files = if cfg.scores.is_empty() {
        let dir = cfg.scores_dir();
        let found = find_scores_files(&dir)?;
        if found.is_empty() {
            return Err(PipelineError::Config(format!("no scores files under {}", dir.display())));
        }
        found
    } else {
        cfg.scores.clone()
    };
    let l = ingest_scores(&files)?;
    let k = l.grammar_names[0].len();
    let grammar = cfg.load_grammar().ok();
    let names = switch_names_for(k, grammar.as_ref());
    let analysis = analyze_matrix(&l, &names, cfg.coding, FitOptions { reml: cfg.reml })?;
    let dir = cfg.analysis_dir();
    write_analysis(&dir, &analysis, cfg.svg)?;
    let inputs = files
        .iter()
        .map(|f| Ok((f.display().to_string(), file_hash(f)?)))
        .collect::<Result<_, PipelineError>>()?;
    let manifest = AnalysisManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        source: cfg.score_source(),
        coding: cfg.coding,
        reml: cfg.reml,
        switch_names: names,
        pooled_over_splits: true,
        inputs,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(analysis)
}

// ---------------------------------------------------------------- validate

/// Checks the grammar, the lexicon and any scores files; returns one line
/// per error found.
pub fn cmd_validate(cfg: &PipelineConfig) -> Vec<String> {
    let mut out = Vec::new();
    match cfg.grammar_text() {
        Err(e) => out.push(e.to_string()),
        Ok(text) => match parse_unchecked(&text) {
            Err(e) => out.push(format!("grammar: {e}")),
            Ok(b) => out.extend(b.build_unchecked().validate().iter().map(|d| format!("grammar: {d}"))),
        },
    }
    if let Err(e) = cfg.plan.section_sizes() {
        out.push(e.to_string());
    }
    if !cfg.scores.is_empty() {
        if let Err(e) = ingest_scores(&cfg.scores) {
            out.push(format!("scores: {e}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(dir: &Path) -> PipelineConfig {
        let gpath = dir.join("toy.grammar");
        fs::write(
            &gpath,
            "start S\nswitch A\nswitch B\nrule S -> X Y : 1 @A\nrule X -> x z : 1 @B\nrule Y -> y : 1\n",
        )
        .unwrap();
        let mut cfg = PipelineConfig::new(dir.join("out"));
        cfg.grammar = GrammarSource::File(gpath);
        cfg.plan = cfg.plan.with_total(100, 10);
        cfg
    }

    #[test]
    fn toy_generate_and_score() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy(dir.path());
        // KN has no count-of-counts here and falls back to add-one
        cfg.smoothing = Smoothing::Mle;
        let s = cmd_generate(&cfg).unwrap();
        assert_eq!(s.grammars, 4);
        assert_eq!(s.section_sizes, [8, 1, 1]);
        let run = cmd_score(&cfg).unwrap();
        // one sentence per language: every model is certain
        for avg in run.grammar_averages() {
            assert_eq!(avg, 1.0);
        }
        assert!(run.corpus_perplexity.iter().flatten().all(|&p| p == 1.0));
        let table = fs::read_to_string(cfg.scores_dir().join("corpus_perplexity.csv")).unwrap();
        assert_eq!(table.lines().count(), 5);
        let files = find_scores_files(&cfg.scores_dir()).unwrap();
        assert_eq!(files.len(), 40);
        let l = ingest_scores(&files).unwrap();
        assert_eq!(l.values.shape(), (10, 4));
        // one grammar per word order: no densities, but the fit still runs
        let a = cmd_analyze(&cfg).unwrap();
        assert!(a.distributions.is_empty());
        assert_eq!(a.groups.len(), 4);
    }

    #[test]
    fn validate_reports_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy(dir.path());
        assert!(cmd_validate(&cfg).is_empty());
        let bad = dir.path().join("bad.grammar");
        fs::write(&bad, "start S\nswitch A\nrule S -> X Y : 1\nrule X -> x : 1\n").unwrap();
        cfg.grammar = GrammarSource::File(bad);
        let d = cmd_validate(&cfg);
        assert!(d.iter().any(|m| m.contains("dead nonterminal `Y`")), "{d:?}");
        assert!(d.iter().any(|m| m.contains("unused switch `A`")), "{d:?}");
    }
}
