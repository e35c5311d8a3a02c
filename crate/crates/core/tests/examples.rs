mod golden_derivation_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/golden_derivation.rs"));
}

#[test]
fn golden_derivation_example_runs() {
    golden_derivation_example::run_example().expect("golden derivation example should run");
}

mod sample_and_switch_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sample_and_switch.rs"));
}

#[test]
fn sample_and_switch_example_runs() {
    sample_and_switch_example::run_example().expect("sample and switch example should run");
}

mod parallel_corpus_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/parallel_corpus.rs"));
}

#[test]
fn parallel_corpus_example_runs() {
    parallel_corpus_example::run_example().expect("parallel corpus example should run");
}

mod ngram_perplexity_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ngram_perplexity.rs"));
}

#[test]
fn ngram_perplexity_example_runs() {
    ngram_perplexity_example::run_example().expect("ngram perplexity example should run");
}

mod mixed_model_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mixed_model.rs"));
}

#[test]
fn mixed_model_example_runs() {
    mixed_model_example::run_example().expect("mixed model example should run");
}

mod typology_groups_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/typology_groups.rs"));
}

#[test]
fn typology_groups_example_runs() {
    typology_groups_example::run_example().expect("typology groups example should run");
}

mod custom_grammar_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/custom_grammar.rs"));
}

#[test]
fn custom_grammar_example_runs() {
    custom_grammar_example::run_example().expect("custom grammar example should run");
}

mod lexicon_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lexicon.rs"));
}

#[test]
fn lexicon_example_runs() {
    lexicon_example::run_example().expect("lexicon example should run");
}
