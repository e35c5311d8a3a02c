// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use switchgram::analysis::{build_design, fit_mixed, Coding, FitOptions, PerplexityMatrix};
use switchgram::grammar::base_grammar_text;
use switchgram::lexicon::Lexicon;
use switchgram::ngram::{write_scores_file, NGramModel, SentenceScore, Smoothing, BOS, EOS};
use switchgram::pipeline::{cmd_analyze, PipelineConfig};
use switchgram::switching::{check_agreement, corpus_path, read_corpus, Section};
use switchgram::{
    base_grammar, generate_parallel, parse_grammar, sample, yield_of, CorpusPlan,
    DerivationTree, SampleConfig, SwitchVector, WordOrder,
};

const CHI2_MIN_P: f64 = 0.001;
const CHI2_SAMPLES: usize = 100_000;
const NGRAM_REL_TOL: f64 = 1e-10;
const RECOVERY_MAX_Z: f64 = 3.0;
const VARIANCE_REL_TOL: f64 = 0.15;
const ORACLE_LL_TOL: f64 = 1e-3;
const ALGEBRA_PAIRS: usize = 10_000;
const AGREEMENT_SENTENCES: usize = 10_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const FIGURE_TREE: &str = "(ROOT (S (NPSubj_pl (NP_pl (VP_pl (NPObj (NP_sg (Pronoun_sg me)) (Obj ob)) \
     (Verb_pl (Verb_pl_pres povify))) (Rel rel) (Noun_pl fusbenders)) (Subj sub)) \
     (VP_pl (SComp (S (NPSubj_pl (NP_pl (Noun_pl serds)) (Subj sub)) \
     (VP_pl (Verb_pl (Verb_pl_past povicateda)))) (Comp sa)) (Verb_pl (Verb_pl_past strovokicizeda)))) .)";

fn golden_yields() -> Outcome {
    let expected = [
        ("000000", "me ob povify rel fusbenders sub serds sub povicateda sa strovokicizeda ."),
        ("011101", "fusbenders rel povify me ob sub strovokicizeda sa serds sub povicateda ."),
        ("111111", "strovokicizeda sa povicateda serds sub fusbenders rel povify me ob sub ."),
    ];
    let g = base_grammar();
    let t = DerivationTree::from_bracketed(&g, FIGURE_TREE).map_err(|e| e.to_string())?;
    for (name, want) in expected {
        let got = yield_of(&t, &SwitchVector::parse(name).unwrap(), &g)
            .map_err(|e| e.to_string())?
            .join(" ");
        if got != want {
            return Err(format!("{name}: got \"{got}\""));
        }
    }
    Ok("3/3 sentences exact".into())
}

fn count_lines(p: &Path) -> usize {
    BufReader::new(File::open(p).unwrap()).lines().count()
}

fn protocol_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let plan = CorpusPlan::paper(0);
    let c = generate_parallel(&base_grammar(), &plan, dir.path()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut bad = Vec::new();
    for name in &c.grammar_names {
        for split in 0..10 {
            for (section, want) in Section::ALL.into_iter().zip([8000, 1000, 1000]) {
                let n = count_lines(&corpus_path(dir.path(), name, split, section));
                if n != want {
                    bad.push(format!("{name}/{split}/{}: {n}", section.as_str()));
                }
            }
        }
    }
    check(
        c.grammar_names.len() == 64 && bad.is_empty(),
        format!("{} grammars x 10 splits x 8000/1000/1000, {secs:.1}s {bad:?}", c.grammar_names.len()),
    )
}

fn parallelism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = CorpusPlan::paper(1).with_total(1000, 10);
    let c = generate_parallel(&base_grammar(), &plan, dir.path()).map_err(|e| e.to_string())?;
    // every line of every grammar, sorted, plus its length
    let mut bags: Vec<Vec<(usize, Vec<String>)>> = Vec::new();
    for name in &c.grammar_names {
        let mut lines = Vec::new();
        for split in 0..plan.num_splits {
            for section in Section::ALL {
                for l in read_corpus(&corpus_path(dir.path(), name, split, section)).map_err(|e| e.to_string())? {
                    let mut sorted = l.clone();
                    sorted.sort();
                    lines.push((l.len(), sorted));
                }
            }
        }
        bags.push(lines);
    }
    let mut pairs = 0;
    for a in 0..bags.len() {
        for b in a + 1..bags.len() {
            pairs += 1;
            if bags[a].len() != bags[b].len() || bags[a] != bags[b] {
                return Err(format!("{} vs {}", c.grammar_names[a], c.grammar_names[b]));
            }
        }
    }
    check(pairs == 2016, format!("{pairs} pairs x {} lines aligned", bags[0].len()))
}

fn agreement() -> Outcome {
    let lex = Lexicon::builtin();
    let g = base_grammar();
    let trees = sample(&g, &SampleConfig::new(10, AGREEMENT_SENTENCES)).map_err(|e| e.to_string())?;
    let base = check_agreement(&g, &lex, &trees).len();
    let broken = parse_grammar(&base_grammar_text().replace("rule S -> NPSubj_sg VP_sg", "rule S -> NPSubj_sg VP_pl"))
        .map_err(|e| e.to_string())?;
    let trees = sample(&broken, &SampleConfig::new(10, 1000)).map_err(|e| e.to_string())?;
    let flagged = check_agreement(&broken, &lex, &trees).len();
    check(
        base == 0 && flagged >= 1,
        format!("{base} violations in {AGREEMENT_SENTENCES} base sentences, {flagged} in broken variant"),
    )
}

fn switch_algebra() -> Outcome {
    let g = base_grammar();
    let trees = sample(&g, &SampleConfig::new(11, ALGEBRA_PAIRS)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let zeros = SwitchVector::zeros(6);
    for t in &trees {
        let b = SwitchVector::new((0..6).map(|_| rng.gen()).collect());
        let i = rng.gen_range(0..6);
        let once = yield_of(t, &b, &g).unwrap();
        if yield_of(t, &b.flipped(i).flipped(i), &g).unwrap() != once {
            return Err(format!("double flip of bit {i} changed {b}"));
        }
        if yield_of(t, &zeros, &g).unwrap() != t.plain_yield(&g) {
            return Err("all-zeros yield differs from written order".into());
        }
    }
    Ok(format!("{ALGEBRA_PAIRS} (tree, vector) pairs"))
}

fn sampler_fidelity() -> Outcome {
    let text = "start S\nswitch X\nrule S -> A B : 0.6 @X\nrule S -> c : 0.4\nrule A -> a : 0.3\n\
                rule A -> d : 0.7\nrule B -> b : 0.5\nrule B -> A e : 0.5\n";
    let exact: HashMap<&str, f64> = [
        ("c", 0.4),
        ("a b", 0.09),
        ("d b", 0.21),
        ("a a e", 0.027),
        ("a d e", 0.063),
        ("d a e", 0.063),
        ("d d e", 0.147),
    ]
    .into_iter()
    .collect();
    let g = parse_grammar(text).map_err(|e| e.to_string())?;
    let trees = sample(&g, &SampleConfig::new(6, CHI2_SAMPLES)).map_err(|e| e.to_string())?;
    let mut observed: HashMap<String, f64> = HashMap::new();
    for t in &trees {
        *observed.entry(yield_of(t, &SwitchVector::zeros(1), &g).unwrap().join(" ")).or_default() += 1.0;
    }
    if observed.keys().any(|k| !exact.contains_key(k.as_str())) {
        return Err(format!("unexpected strings {observed:?}"));
    }
    let stat: f64 = exact
        .iter()
        .map(|(s, p)| {
            let e = p * CHI2_SAMPLES as f64;
            (observed.get(*s).copied().unwrap_or(0.0) - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new((exact.len() - 1) as f64).unwrap().cdf(stat);
    check(p > CHI2_MIN_P, format!("chi2 = {stat:.3}, p = {p:.4}"))
}

fn ngram_correctness() -> Outcome {
    let lines = |t: &str| -> Vec<Vec<String>> {
        t.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect()
    };
    let det = lines("x y z\nx y z");
    let det_ppl = NGramModel::train(&det, 3, Smoothing::Mle).unwrap().perplexity(&det[0]).0;
    let uni = NGramModel::train(&lines("a b c"), 1, Smoothing::Mle).unwrap();
    let uni_ppl = uni.perplexity(&lines("b c a")[0]).0;

    let train = lines("a b a c\nb b a\nc a b c a\na\nd e a b");
    let model = NGramModel::train(&train, 2, Smoothing::AddK(1.0)).unwrap();
    let mut pairs: HashMap<(String, String), f64> = HashMap::new();
    let mut hist: HashMap<String, f64> = HashMap::new();
    for s in &train {
        let mut prev = BOS.to_string();
        for w in s.iter().map(String::as_str).chain([EOS]) {
            *pairs.entry((prev.clone(), w.to_string())).or_default() += 1.0;
            *hist.entry(prev).or_default() += 1.0;
            prev = w.to_string();
        }
    }
    let v = 5.0 + 2.0; // a..e, EOS, UNK
    let mut worst: f64 = 0.0;
    for s in lines("a b c\nc c c d\ne\nb a d d") {
        let mut prev = BOS.to_string();
        let mut nll = 0.0;
        for w in s.iter().map(String::as_str).chain([EOS]) {
            let c = pairs.get(&(prev.clone(), w.to_string())).copied().unwrap_or(0.0);
            nll -= ((c + 1.0) / (hist.get(&prev).copied().unwrap_or(0.0) + v)).ln();
            prev = w.to_string();
        }
        let want = (nll / (s.len() + 1) as f64).exp();
        worst = worst.max((model.perplexity(&s).0 - want).abs() / want);
    }
    check(
        det_ppl == 1.0 && uni_ppl == 4.0 && worst < NGRAM_REL_TOL,
        format!("deterministic {det_ppl}, uniform V=4 gives {uni_ppl}, add-1 bigram max rel err {worst:.1e}"),
    )
}

fn full_loglik(l: &PerplexityMatrix, x: &DMatrix<f64>, sd: f64, s: f64) -> f64 {
    let (n, g) = l.values.shape();
    let v = DMatrix::from_element(g, g, sd) + DMatrix::identity(g, g) * s;
    let chol = v.cholesky().unwrap();
    let vinv = chol.inverse();
    let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let mut rhs = DVector::zeros(x.ncols());
    for i in 0..n {
        rhs += x.transpose() * &vinv * l.values.row(i).transpose();
    }
    let beta = (x.transpose() * &vinv * x * n as f64).cholesky().unwrap().solve(&rhs);
    let mu = x * beta;
    (0..n)
        .map(|i| {
            let r = l.values.row(i).transpose() - &mu;
            -0.5 * (g as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + (r.transpose() * &vinv * &r)[0])
        })
        .sum()
}

fn mixed_recovery() -> Outcome {
    let start = Instant::now();
    let d = build_design(6, Coding::Binary).map_err(|e| e.to_string())?;
    let mut beta = vec![0.0; d.ncols()];
    beta[0] = 50.0;
    for (i, b) in [-3.0, 1.0, 2.0, 0.0, -0.5, 0.7].into_iter().enumerate() {
        beta[d.main_column(i)] = b;
    }
    beta[d.interaction_column(0, 1)] = 1.5;
    beta[d.interaction_column(2, 5)] = -0.8;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (u, e) = (Normal::new(0.0, 2.0).unwrap(), Normal::new(0.0, 1.0).unwrap());
    let mean = &d.matrix * DVector::from_vec(beta.clone());
    let mut v = DMatrix::zeros(500, 64);
    for i in 0..500 {
        let ui = u.sample(&mut rng);
        for k in 0..64 {
            v[(i, k)] = mean[k] + ui + e.sample(&mut rng);
        }
    }
    let l = PerplexityMatrix::new(v, d.row_names.clone()).map_err(|e| e.to_string())?;
    let fit = fit_mixed(&l, &d, FitOptions::default()).map_err(|e| e.to_string())?;
    let max_z = (0..beta.len())
        .map(|i| ((fit.beta[i] - beta[i]) / fit.stderr[i]).abs())
        .fold(0.0, f64::max);
    let rel_dif = (fit.sigma2_dif / 4.0 - 1.0).abs();
    let rel_res = (fit.sigma2 - 1.0).abs();

    let tiny = build_design(2, Coding::Binary).map_err(|e| e.to_string())?;
    let raw = [[12.0, 15.5, 11.0, 14.2], [18.1, 20.0, 17.4, 22.9], [9.5, 13.0, 10.2, 12.8], [14.0, 16.1, 15.3, 19.0]];
    let lt = PerplexityMatrix::new(DMatrix::from_fn(4, 4, |i, j| raw[i][j]), tiny.row_names.clone()).unwrap();
    let ft = fit_mixed(&lt, &tiny, FitOptions::default()).map_err(|e| e.to_string())?;
    // zooming grid over (ln σ²_dif, ln σ²)
    let (mut c, mut half, mut best) = ((0.0, 0.0), 8.0, f64::NEG_INFINITY);
    for _ in 0..12 {
        let mut arg = c;
        for i in 0..=40 {
            for j in 0..=40 {
                let a = c.0 - half + half * i as f64 / 20.0;
                let b = c.1 - half + half * j as f64 / 20.0;
                let ll = full_loglik(&lt, &tiny.matrix, a.exp(), b.exp());
                if ll > best {
                    best = ll;
                    arg = (a, b);
                }
            }
        }
        c = arg;
        half *= 0.25;
    }
    let ll_gap = (ft.log_likelihood - best).abs();
    check(
        max_z < RECOVERY_MAX_Z && rel_dif < VARIANCE_REL_TOL && rel_res < VARIANCE_REL_TOL && ll_gap < ORACLE_LL_TOL,
        format!(
            "max |z| {max_z:.2}, sigma2_dif {:.3}, sigma2 {:.3}, tiny-oracle ll gap {ll_gap:.1e}, {:.1}s",
            fit.sigma2_dif,
            fit.sigma2,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn design_matrix() -> Outcome {
    let d = build_design(6, Coding::Binary).map_err(|e| e.to_string())?;
    let row = |name: &str| -> Vec<f64> {
        let i = d.row_names.iter().position(|r| r == name).unwrap();
        d.matrix.row(i).iter().copied().collect()
    };
    let mut zeros = vec![1.0];
    zeros.extend([0.0; 6]);
    zeros.extend([1.0; 15]);
    let ones = vec![1.0; 22];
    check(
        d.matrix.shape() == (64, 22) && d.rank() == 22 && row("000000") == zeros && row("111111") == ones,
        format!("{:?}, rank {}", d.matrix.shape(), d.rank()),
    )
}

/// Synthetic scores with group-dependent means, written as scores files
/// and pushed through the analyze stage.
fn synthetic_effect() -> Outcome {
    let d = build_design(6, Coding::Binary).map_err(|e| e.to_string())?;
    let mut beta = vec![0.0; d.ncols()];
    beta[0] = 40.0;
    let mains = [3.0, -2.0, 1.0, -0.6, 0.8, 0.5];
    for (i, b) in mains.iter().enumerate() {
        beta[d.main_column(i)] = *b;
    }
    let inter = [((0, 1), 1.5), ((1, 2), 0.9), ((3, 5), -0.7)];
    for ((i, j), b) in inter {
        beta[d.interaction_column(i, j)] = b;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (u, e) = (Normal::new(0.0, 3.0).unwrap(), Normal::new(0.0, 1.5).unwrap());
    let mean = &d.matrix * DVector::from_vec(beta.clone());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut rows: Vec<Vec<SentenceScore>> = vec![Vec::new(); 64];
    for n in 0..300 {
        let un = u.sample(&mut rng);
        for (k, row) in rows.iter_mut().enumerate() {
            row.push(SentenceScore {
                sentence_id: n,
                grammar: d.row_names[k].clone(),
                perplexity: (mean[k] + un + e.sample(&mut rng)).max(1.0),
                tokens: 12,
            });
        }
    }
    for (k, row) in rows.iter().enumerate() {
        let p = dir.path().join(format!("{}.tsv", d.row_names[k]));
        write_scores_file(&p, row).map_err(|e| e.to_string())?;
        files.push(p);
    }
    let mut cfg = PipelineConfig::new(dir.path().join("out"));
    cfg.scores = files;
    let a = cmd_analyze(&cfg).map_err(|e| e.to_string())?;

    // S and VP bits: SOV 1.5, SVO -2, OVS 3, VOS 2.5 above the shared base
    let want = [WordOrder::SVO, WordOrder::SOV, WordOrder::VOS, WordOrder::OVS];
    let mut got = a.groups.clone();
    got.sort_by(|x, y| x.mean_perplexity.total_cmp(&y.mean_perplexity));
    let order: Vec<WordOrder> = got.iter().map(|r| r.order).collect();
    let mut sign_errors = Vec::new();
    for (i, b) in mains.iter().enumerate() {
        if a.heatmap.values[i][i].signum() != b.signum() {
            sign_errors.push(a.heatmap.labels[i].clone());
        }
    }
    for ((i, j), b) in inter {
        if a.heatmap.values[i][j].signum() != f64::signum(b) {
            sign_errors.push(format!("{}:{}", a.heatmap.labels[i], a.heatmap.labels[j]));
        }
    }
    check(
        order == want && sign_errors.is_empty(),
        format!("group order {order:?}, sign errors {sign_errors:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("golden parallel yields", golden_yields),
        ("protocol shape", protocol_shape),
        ("parallelism property", parallelism),
        ("agreement property", agreement),
        ("switch algebra", switch_algebra),
        ("sampler fidelity", sampler_fidelity),
        ("n-gram correctness", ngram_correctness),
        ("mixed-model recovery", mixed_recovery),
        ("design matrix", design_matrix),
        ("synthetic effect detection", synthetic_effect),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
