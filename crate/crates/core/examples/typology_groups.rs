// Runs the whole pipeline on a small plan: generate, score with a bigram
// model, analyze, then prints the word-order group means.

use switchgram::ngram::Smoothing;
use switchgram::pipeline::{cmd_analyze, cmd_generate, cmd_score, PipelineConfig};
use switchgram::CorpusPlan;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = PipelineConfig::new(dir.path());
    cfg.plan = CorpusPlan::paper(11).with_total(400, 2);
    cfg.order = 2;
    cfg.smoothing = Smoothing::KneserNey;
    cmd_generate(&cfg)?;
    cmd_score(&cfg)?;
    let a = cmd_analyze(&cfg)?;
    for r in &a.groups {
        println!("{} ({} grammars): {:.3}", r.order, r.grammars, r.mean_perplexity);
    }
    let k = a.heatmap.labels.len();
    for i in 0..k {
        let row: Vec<String> = a.heatmap.values[i].iter().map(|v| format!("{v:7.2}")).collect();
        println!("{:>5} {}", a.heatmap.labels[i], row.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("pipeline");
}
