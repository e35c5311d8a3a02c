// Parses a user grammar, shows what validation reports for a broken
// variant, and samples from the fixed one.

use switchgram::grammar::parse_unchecked;
use switchgram::{parse_grammar, sample, yield_of, SampleConfig, SwitchVector};

const TOY: &str = "\
start S
switch Head
switch Adp
rule S -> NP V : 1 @Head
rule NP -> N : 0.7
rule NP -> PP N : 0.3
rule PP -> NP P : 1 @Adp
rule N -> cat : 1
rule N -> dog : 1
rule V -> sleeps : 1
rule P -> near : 1
";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let broken = TOY.replace("rule P -> near : 1\n", "");
    for d in parse_unchecked(&broken)?.build_unchecked().validate() {
        println!("broken variant: {d}");
    }

    let g = parse_grammar(TOY)?;
    let trees = sample(&g, &SampleConfig::new(5, 4))?;
    for t in &trees {
        let parts: Vec<String> = ["00", "11"]
            .iter()
            .map(|n| yield_of(t, &SwitchVector::parse(n).expect("bits"), &g).map(|y| y.join(" ")))
            .collect::<Result<_, _>>()?;
        println!("{:<28} | {}", parts[0], parts[1]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("custom grammar");
}
