// Switch algebra, grammar text round trips and parallel-corpus alignment.

use std::collections::BTreeMap;

use proptest::prelude::*;
use switchgram::grammar::base_grammar_text;
use switchgram::lexicon::Lexicon;
use switchgram::switching::check_agreement;
use switchgram::{
    base_grammar, enumerate_switch_vectors, parse_grammar, sample, yield_of, DerivationTree, Grammar, SampleConfig,
    SwitchVector,
};

fn base_trees(seed: u64, count: usize) -> (Grammar, Vec<DerivationTree>) {
    let g = base_grammar();
    let trees = sample(&g, &SampleConfig::new(seed, count)).unwrap();
    (g, trees)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn double_flip_is_identity(seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 6), i in 0usize..6) {
        let (g, trees) = base_trees(seed, 4);
        let b = SwitchVector::new(bits);
        prop_assert_eq!(b.flipped(i).flipped(i).clone(), b.clone());
        for t in &trees {
            prop_assert_eq!(yield_of(t, &b.flipped(i).flipped(i), &g).unwrap(), yield_of(t, &b, &g).unwrap());
        }
    }

    #[test]
    fn zeros_reproduce_written_order(seed in any::<u64>()) {
        let (g, trees) = base_trees(seed, 8);
        for t in &trees {
            prop_assert_eq!(yield_of(t, &SwitchVector::zeros(6), &g).unwrap(), t.plain_yield(&g));
        }
    }

    #[test]
    fn switching_permutes_tokens(seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 6)) {
        let (g, trees) = base_trees(seed, 4);
        let b = SwitchVector::new(bits);
        for t in &trees {
            let mut a = yield_of(t, &b, &g).unwrap();
            let mut z = t.plain_yield(&g);
            prop_assert_eq!(a.last(), Some(&"."));
            a.sort_unstable();
            z.sort_unstable();
            prop_assert_eq!(a, z);
        }
    }

    #[test]
    fn bracketed_round_trip(seed in any::<u64>()) {
        let (g, trees) = base_trees(seed, 4);
        for t in &trees {
            let back = DerivationTree::from_bracketed(&g, &t.to_bracketed(&g)).unwrap();
            prop_assert_eq!(&back, t);
        }
    }

    #[test]
    fn grammar_text_round_trip(text in grammar_text()) {
        let g = parse_grammar(&text).unwrap();
        let again = parse_grammar(&g.to_text()).unwrap();
        prop_assert_eq!(again.to_text(), g.to_text());
        prop_assert_eq!(again.content_hash(), g.content_hash());
        prop_assert_eq!(again.switches(), g.switches());
    }
}

/// Random acyclic grammars: nonterminal `Ni` only rewrites to terminals and
/// to `Nj` with `j > i`, so every symbol is productive.
fn grammar_text() -> impl Strategy<Value = String> {
    (2usize..6).prop_flat_map(|n| {
        let rule = (0..n, prop::collection::vec((0usize..8, any::<bool>()), 1..4), 1u32..9, any::<bool>());
        prop::collection::vec(rule, n..3 * n).prop_map(move |rules| {
            let mut text = String::from("start N0\n");
            let mut body = String::new();
            let mut used = Vec::new();
            let mut has_rule = vec![false; n];
            for (lhs, rhs, w, tag) in rules {
                let syms: Vec<String> = rhs
                    .iter()
                    .map(|&(x, nt)| if nt && lhs + 1 + x % 2 < n { format!("N{}", lhs + 1 + x % 2) } else { format!("t{x}") })
                    .collect();
                body.push_str(&format!("rule N{lhs} -> {} : {w}", syms.join(" ")));
                if tag && syms.len() > 1 {
                    body.push_str(&format!(" @W{lhs}"));
                    if !used.contains(&lhs) {
                        used.push(lhs);
                    }
                }
                body.push('\n');
                has_rule[lhs] = true;
            }
            for (i, h) in has_rule.iter().enumerate() {
                if !h {
                    body.push_str(&format!("rule N{i} -> t{i} : 1\n"));
                }
            }
            for s in used {
                text.push_str(&format!("switch W{s}\n"));
            }
            text + &body
        })
    })
}

fn bag(line: &[&str]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for w in line {
        *m.entry(w.to_string()).or_insert(0) += 1;
    }
    m
}

#[test]
fn all_grammar_pairs_share_token_multisets() {
    let (g, trees) = base_trees(31, 200);
    let vectors = enumerate_switch_vectors(6).unwrap();
    for t in &trees {
        let reference = bag(&t.plain_yield(&g));
        for b in &vectors {
            let y = yield_of(t, b, &g).unwrap();
            assert_eq!(bag(&y), reference);
        }
    }
}

#[test]
fn switch_only_affects_its_rule_group() {
    let (g, trees) = base_trees(12, 300);
    let zeros = SwitchVector::zeros(6);
    for i in 0..6 {
        let group = g.rule_group(i);
        for t in &trees {
            let uses = uses_any(t, &group);
            let changed = yield_of(t, &zeros.flipped(i), &g).unwrap() != yield_of(t, &zeros, &g).unwrap();
            // a flip can only change the yield of a tree that uses the group
            assert!(!changed || uses);
        }
    }
}

fn uses_any(t: &DerivationTree, group: &std::collections::BTreeSet<switchgram::grammar::RuleId>) -> bool {
    t.rule().is_some_and(|r| group.contains(&r)) || t.children().iter().any(|c| uses_any(c, group))
}

#[test]
fn base_grammar_agrees_and_broken_variant_does_not() {
    let lex = Lexicon::builtin();
    let (g, trees) = base_trees(4, 2000);
    assert!(check_agreement(&g, &lex, &trees).is_empty());
    let broken = parse_grammar(
        &base_grammar_text().replace("rule VP_pl -> Verb_pl : ", "rule VP_pl -> Verb_sg : "),
    )
    .unwrap();
    let trees = sample(&broken, &SampleConfig::new(4, 500)).unwrap();
    assert!(!check_agreement(&broken, &lex, &trees).is_empty());
}
