// Trains n-gram models with each smoothing method and compares their
// perplexity on held-out sentences.

use switchgram::ngram::{score_sentences, NGramModel, Smoothing};
use switchgram::{base_grammar, sample, yield_of, SampleConfig, SwitchVector};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = base_grammar();
    let b = SwitchVector::zeros(g.num_switches());
    let trees = sample(&g, &SampleConfig::new(1, 2200))?;
    let sentences: Vec<Vec<&str>> = trees.iter().map(|t| yield_of(t, &b, &g)).collect::<Result<_, _>>()?;
    let (train, test) = sentences.split_at(2000);

    for (order, smoothing) in [
        (1, Smoothing::AddK(1.0)),
        (2, Smoothing::AddK(1.0)),
        (2, Smoothing::KneserNey),
        (3, Smoothing::KneserNey),
    ] {
        let model = NGramModel::train(train, order, smoothing)?;
        let scored = score_sentences(&model, test, "000000");
        println!(
            "order {order} {:<8} V={:<4} mean sentence ppl {:8.3}  corpus ppl {:8.3}",
            model.smoothing().to_string(),
            model.vocab_size(),
            scored.mean_perplexity,
            scored.corpus_perplexity
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("n-gram perplexity");
}
