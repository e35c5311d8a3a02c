// generate / score / analyze through the library API and the binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};
use switchgram::analysis::{ingest_scores, PerplexityMatrix};
use switchgram::ngram::{read_scores_file, write_scores_file, Smoothing};
use switchgram::pipeline::{
    analyze_matrix, cmd_analyze, cmd_generate, cmd_score, find_scores_files, switch_names_for, PipelineConfig,
};
use switchgram::analysis::FitOptions;
use switchgram::CorpusPlan;

fn small(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(out);
    cfg.plan = CorpusPlan::paper(5).with_total(200, 2);
    cfg.order = 2;
    cfg.smoothing = Smoothing::KneserNey;
    cfg
}

/// Hash over every relative path and file content under `root`.
fn tree_hash(root: &Path) -> String {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        h.update(fs::read(&f).unwrap());
    }
    hex::encode(h.finalize())
}

#[test]
fn generate_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = cmd_generate(&small(a.path())).unwrap();
    cmd_generate(&small(b.path())).unwrap();
    assert_eq!(s.grammars, 64);
    assert!(a.path().join("corpus/manifest.json").exists());
    assert_eq!(tree_hash(a.path()), tree_hash(b.path()));
    let mut other = small(b.path());
    other.plan.seed = 6;
    cmd_generate(&other).unwrap();
    assert_ne!(tree_hash(a.path()), tree_hash(b.path()));
}

#[test]
fn analyze_after_ingest_equals_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_generate(&cfg).unwrap();
    let run = cmd_score(&cfg).unwrap();
    assert_eq!(find_scores_files(&cfg.scores_dir()).unwrap().len(), 64 * 2);
    let from_disk = cmd_analyze(&cfg).unwrap();

    let l = PerplexityMatrix::from_scores(&run.all_scores()).unwrap();
    assert_eq!(l.values.shape(), (20, 64));
    let names = switch_names_for(6, cfg.load_grammar().ok().as_ref());
    let in_memory = analyze_matrix(&l, &names, cfg.coding, FitOptions::default()).unwrap();
    assert_eq!(in_memory, from_disk);
    for f in ["fit.json", "heatmap.csv", "heatmap.svg", "groups.csv", "density.csv", "manifest.json"] {
        assert!(cfg.analysis_dir().join(f).exists(), "{f}");
    }
    let heat = fs::read_to_string(cfg.analysis_dir().join("heatmap.csv")).unwrap();
    assert!(heat.starts_with("row,column,value,stderr\n"));
    assert_eq!(heat.lines().count(), 1 + 36);
}

#[test]
fn missing_cell_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_generate(&cfg).unwrap();
    cmd_score(&cfg).unwrap();
    let files = find_scores_files(&cfg.scores_dir()).unwrap();
    let victim = &files[5];
    let mut rows = read_scores_file(victim).unwrap();
    let gone = rows.remove(3);
    write_scores_file(victim, &rows).unwrap();
    let err = cmd_analyze(&cfg).unwrap_err().to_string();
    let want = format!("sentence {}, grammar \"{}\"", gone.sentence_id, gone.grammar);
    assert!(err.contains(&want), "{err}");
    assert!(ingest_scores(&files).is_err());
}

#[test]
fn binary_runs_and_reports_errors() {
    let exe = env!("CARGO_BIN_EXE_switchgram");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["--total", "100", "--splits", "2", "--order", "2", "--out", out];
    for cmd in ["validate", "generate", "score", "analyze"] {
        let status = Command::new(exe).arg(cmd).args(args).output().unwrap();
        assert!(status.status.success(), "{cmd}: {}", String::from_utf8_lossy(&status.stderr));
    }
    let pm1 = Command::new(exe)
        .args(["analyze", "--coding", "pm1", "--reml", "--out", out])
        .output()
        .unwrap();
    assert!(pm1.status.success());

    let bad = dir.path().join("bad.grammar");
    fs::write(&bad, "start S\nrule S -> A b : 1\n").unwrap();
    let r = Command::new(exe).args(["validate", "--grammar", bad.to_str().unwrap()]).output().unwrap();
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("dead nonterminal `A`"));

    let r = Command::new(exe)
        .args(["analyze", "--scores", dir.path().join("nope.tsv").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!r.status.success());
}
