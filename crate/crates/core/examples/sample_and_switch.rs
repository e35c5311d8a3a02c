// Samples a few sentences from the built-in grammar and shows each one
// in the four basic word orders.

use switchgram::{base_grammar, sample, word_order_of, yield_of, SampleConfig, SwitchVector};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = base_grammar();
    let trees = sample(&g, &SampleConfig::new(7, 3))?;
    let configs = ["000000", "010000", "100000", "110000"];
    for (i, t) in trees.iter().enumerate() {
        println!("sentence {i}: {}", t.to_bracketed(&g));
        for name in configs {
            let b = SwitchVector::parse(name).expect("bit string");
            println!("  {} {name}  {}", word_order_of(&b), yield_of(t, &b, &g)?.join(" "));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("sampling");
}
