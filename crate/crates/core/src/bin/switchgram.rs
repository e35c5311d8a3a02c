use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use switchgram::analysis::Coding;
use switchgram::lexicon::Lexicon;
use switchgram::ngram::Smoothing;
use switchgram::pipeline::{self, GrammarSource, PipelineConfig, PipelineError};
use switchgram::CorpusPlan;

/// Word-order experiments with switch-parameterized grammars.
#[derive(Parser)]
#[command(name = "switchgram", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Grammar file, or `builtin`.
    #[arg(long, global = true, default_value = "builtin")]
    grammar: String,
    /// Lexicon file replacing the built-in vocabulary.
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sentences sampled per grammar.
    #[arg(long, global = true, default_value_t = 100_000)]
    total: usize,
    #[arg(long, global = true, default_value_t = 10)]
    splits: usize,
    /// Output directory (corpus/, scores/ and analysis/ are created below it).
    #[arg(long, global = true, default_value = "switchgram-out")]
    out: PathBuf,
    /// N-gram order.
    #[arg(long, global = true, default_value_t = 3)]
    order: usize,
    /// mle, add_k:<k> or kn.
    #[arg(long, global = true, default_value = "kn")]
    smoothing: Smoothing,
    /// Scores file from an external scorer (repeatable).
    #[arg(long, global = true)]
    scores: Vec<PathBuf>,
    #[arg(long, global = true, default_value = "binary", value_parser = ["binary", "pm1"])]
    coding: String,
    /// Restricted maximum likelihood instead of ML.
    #[arg(long, global = true)]
    reml: bool,
    /// Skip the SVG heatmap.
    #[arg(long, global = true)]
    no_svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the corpus plan and write every grammar's corpora.
    Generate,
    /// Train an n-gram model per (grammar, split) and score the test sections.
    Score,
    /// Fit the mixed model and write the reports.
    Analyze,
    /// Check the grammar, lexicon, plan and any --scores files.
    Validate,
    /// Write the effective grammar and lexicon files to --out for editing.
    Export,
}

impl Common {
    fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(&self.out);
        cfg.grammar = GrammarSource::from_arg(&self.grammar);
        cfg.lexicon = self.lexicon.clone();
        cfg.plan = CorpusPlan::paper(self.seed).with_total(self.total, self.splits);
        cfg.order = self.order;
        cfg.smoothing = self.smoothing;
        cfg.scores = self.scores.clone();
        cfg.coding = self.coding.parse::<Coding>().expect("restricted by clap");
        cfg.reml = self.reml;
        cfg.svg = !self.no_svg;
        cfg
    }
}

fn run(cmd: &Command, cfg: &PipelineConfig) -> Result<Vec<String>, PipelineError> {
    match cmd {
        Command::Generate => {
            let s = pipeline::cmd_generate(cfg)?;
            let [train, dev, test] = s.section_sizes;
            println!(
                "wrote {} grammars x {} splits ({train}/{dev}/{test}) to {}",
                s.grammars,
                cfg.plan.num_splits,
                s.root.display()
            );
        }
        Command::Score => {
            let run = pipeline::cmd_score(cfg)?;
            println!("grammar\taverage_perplexity");
            for (g, avg) in run.grammar_names.iter().zip(run.grammar_averages()) {
                println!("{g}\t{avg:.4}");
            }
        }
        Command::Analyze => {
            let a = pipeline::cmd_analyze(cfg)?;
            for (label, (b, se)) in a.fit.labels.iter().zip(a.fit.beta.iter().zip(&a.fit.stderr)) {
                println!("{label:>10} {b:>10.4} ({se:.4})");
            }
            println!("sigma2_dif {:.4}  sigma2 {:.4}", a.fit.sigma2_dif, a.fit.sigma2);
            for r in &a.groups {
                println!("{} {:.4}", r.order, r.mean_perplexity);
            }
            for d in &a.fit.diagnostics {
                eprintln!("note: {d}");
            }
            println!("reports in {}", cfg.analysis_dir().display());
        }
        Command::Validate => return Ok(pipeline::cmd_validate(cfg)),
        Command::Export => {
            let g = cfg.load_grammar()?;
            std::fs::create_dir_all(&cfg.out).map_err(|source| PipelineError::Io {
                path: cfg.out.clone(),
                source,
            })?;
            let write = |name: &str, text: String| {
                let path = cfg.out.join(name);
                std::fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })
            };
            write("grammar.txt", g.to_text())?;
            if cfg.grammar == GrammarSource::Builtin && cfg.lexicon.is_none() {
                write("lexicon.tsv", Lexicon::builtin().to_text())?;
            }
            println!("exported to {}", cfg.out.display());
        }
    }
    Ok(Vec::new())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli.common.config();
    match run(&cli.command, &cfg) {
        Ok(diags) if diags.is_empty() => ExitCode::SUCCESS,
        Ok(diags) => {
            for d in diags {
                eprintln!("error: {d}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
