// Generates a pseudo-word lexicon, prints a few entries in the lexicon
// file format and looks up token features.

use switchgram::lexicon::{Lexicon, VocabSizes};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let sizes = VocabSizes {
        nouns: 4,
        verbs: 3,
        adjectives: 2,
        prepositions: 2,
        pronouns: 2,
    };
    let lex = Lexicon::generate(99, sizes);
    let text = lex.to_text();
    for line in text.lines().take(8) {
        println!("{line}");
    }
    assert_eq!(Lexicon::parse(&text)?, lex);
    for token in ["fusbenders", "povicateda", "sub"] {
        let builtin = Lexicon::builtin();
        println!("{token}: {:?}", builtin.features_of(token)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("lexicon");
}
