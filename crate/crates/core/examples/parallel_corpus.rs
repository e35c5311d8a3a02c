// Writes a small parallel corpus and checks that line n of every grammar
// holds the same bag of words.

use std::collections::BTreeMap;

use switchgram::switching::{corpus_path, read_corpus, Section};
use switchgram::{base_grammar, generate_parallel, CorpusPlan};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let g = base_grammar();
    let plan = CorpusPlan::paper(42).with_total(200, 2);
    let corpus = generate_parallel(&g, &plan, dir.path())?;
    println!(
        "{} grammars, sections {:?} per split",
        corpus.grammar_names.len(),
        corpus.section_sizes
    );

    let bag = |line: &[String]| {
        let mut m = BTreeMap::new();
        for w in line {
            *m.entry(w.clone()).or_insert(0) += 1;
        }
        m
    };
    let reference = read_corpus(&corpus_path(dir.path(), "000000", 0, Section::Test))?;
    for name in &corpus.grammar_names {
        let lines = read_corpus(&corpus_path(dir.path(), name, 0, Section::Test))?;
        assert_eq!(lines.len(), reference.len());
        for (a, b) in lines.iter().zip(&reference) {
            assert_eq!(bag(a), bag(b));
        }
    }
    println!("first test line, 000000: {}", reference[0].join(" "));
    let other = read_corpus(&corpus_path(dir.path(), "110110", 0, Section::Test))?;
    println!("first test line, 110110: {}", other[0].join(" "));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("parallel corpus");
}
