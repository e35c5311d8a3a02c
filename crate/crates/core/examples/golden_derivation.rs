// Builds the three-clause example derivation by hand and prints it under
// a few switch configurations.

use switchgram::{base_grammar, yield_of, DerivationTree, SwitchVector};

pub const FIGURE_TREE: &str = "(ROOT (S (NPSubj_pl (NP_pl (VP_pl (NPObj (NP_sg (Pronoun_sg me)) (Obj ob)) \
     (Verb_pl (Verb_pl_pres povify))) (Rel rel) (Noun_pl fusbenders)) (Subj sub)) \
     (VP_pl (SComp (S (NPSubj_pl (NP_pl (Noun_pl serds)) (Subj sub)) \
     (VP_pl (Verb_pl (Verb_pl_past povicateda)))) (Comp sa)) (Verb_pl (Verb_pl_past strovokicizeda)))) .)";

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let g = base_grammar();
    let tree = DerivationTree::from_bracketed(&g, FIGURE_TREE)?;
    println!("switches: {}", g.switches().join(" "));
    let mut lines = Vec::new();
    for name in ["000000", "011101", "111111"] {
        let b = SwitchVector::parse(name).expect("bit string");
        let line = yield_of(&tree, &b, &g)?.join(" ");
        println!("{name}  {line}");
        lines.push(line);
    }
    Ok(lines)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("golden derivation");
}
