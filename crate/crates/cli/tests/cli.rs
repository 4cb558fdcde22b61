use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hmm_merge::casestudy::CASE1_MINIMAL;
use hmm_merge::eval::same_language;
use hmm_merge::hmm::parse_hmm;
use hmm_merge::merging::build_initial_model;
use hmm_merge::{Corpus, Hmm, PriorConfig};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmm-merge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn spaced(words: &[&str]) -> String {
    words
        .iter()
        .map(|w| w.chars().map(String::from).collect::<Vec<_>>().join(" ") + "\n")
        .collect()
}

fn model(p: &Path) -> Hmm {
    parse_hmm(&fs::read_to_string(p).unwrap()).unwrap()
}

/// One path per distinct string: exactly the training language.
fn initial(words: &[&str]) -> Hmm {
    build_initial_model(&Corpus::from_chars(words), &PriorConfig::default())
        .unwrap()
        .hmm()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn two_strings_generalize_at_unit_weight_only() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = file(dir.path(), "ab.txt", &spaced(&["ab", "abab"]));
    let out = dir.path().join("m.txt");
    stdout(&run(&[
        "induce",
        "--corpus",
        s(&corpus),
        "--lookahead",
        "5",
        "--no-neff",
        "--out",
        s(&out),
    ]));
    let m = model(&out);
    assert_eq!(m.n_states(), 2);
    assert!(m.accepts(&hmm_merge::corpus::chars("ababab")));

    // Two samples against a target of 50 put the prior weight at 0.04, too
    // weak to pay for any generalization.
    let summary = stdout(&run(&[
        "induce",
        "--corpus",
        s(&corpus),
        "--neff",
        "50",
        "--lookahead",
        "5",
        "--out",
        s(&out),
    ]));
    assert!(summary.contains("lambda 0.04"), "{summary}");
    let training = initial(&["ab", "abab"]);
    assert!(same_language(&model(&out), &training));
}

#[test]
fn small_weight_keeps_the_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = file(dir.path(), "case1.txt", &spaced(&CASE1_MINIMAL));
    let out = dir.path().join("m.txt");
    let trace = dir.path().join("trace.txt");
    let dot = dir.path().join("m.dot");
    let summary = stdout(&run(&[
        "induce",
        "--corpus",
        s(&corpus),
        "--lambda",
        "0.016",
        "--no-neff",
        "--out",
        s(&out),
        "--trace",
        s(&trace),
        "--dot",
        s(&dot),
    ]));
    assert!(summary.contains("states "));
    let m = model(&out);
    assert!(same_language(&m, &initial(&CASE1_MINIMAL)));
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));
    assert!(trace.exists());
}

#[test]
fn input_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let empty = file(dir.path(), "empty.txt", "");
    assert_eq!(
        run(&["induce", "--corpus", s(&empty)]).status.code(),
        Some(1)
    );
    let missing = dir.path().join("missing.txt");
    assert_eq!(
        run(&["induce", "--corpus", s(&missing)]).status.code(),
        Some(1)
    );
    let bad = file(dir.path(), "bad.txt", "trans I 0 1\n");
    assert_eq!(run(&["sample", "--model", s(&bad)]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = file(dir.path(), "c.txt", "a b\n");
    assert_eq!(
        run(&["induce", "--corpus", s(&corpus), "--alpha-t", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["induce", "--corpus", s(&corpus), "--prior", "nonsense"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["bw", "--corpus", s(&corpus)]).status.code(), Some(2));
}

#[test]
fn baum_welch_reports_every_restart() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = file(dir.path(), "c.txt", &spaced(&["ab", "abab", "aab"]));
    let out = dir.path().join("best.txt");
    let text = stdout(&run(&[
        "bw",
        "--corpus",
        s(&corpus),
        "--states",
        "3",
        "--restarts",
        "10",
        "--out",
        s(&out),
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "restart,seed,iters,train_ll,test_ll,states_after_prune,parse_in,parse_out"
    );
    assert_eq!(lines.len(), 11);
    assert!(model(&out).n_states() <= 3);
}

#[test]
fn eval_rows() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = file(dir.path(), "c.txt", &spaced(&["ab", "abab", "aab"]));
    let m = dir.path().join("m.txt");
    stdout(&run(&["induce", "--corpus", s(&corpus), "--out", s(&m)]));

    let text = stdout(&run(&[
        "eval",
        "--model",
        s(&m),
        "--test",
        s(&corpus),
        "--target",
        s(&m),
        "--mc",
        "20",
    ]));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let ll: f64 = row[1].parse().unwrap();
    assert!(ll.is_finite() && ll < 0.0);
    assert_eq!(&row[3..5], ["20", "20"]);

    let heldout = file(dir.path(), "h.txt", &spaced(&["abb", "ab"]));
    let text = stdout(&run(&[
        "eval",
        "--model",
        s(&m),
        "--mixture",
        "--train",
        s(&corpus),
        "--heldout",
        s(&heldout),
    ]));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let w: f64 = row.last().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&w));
    assert!(row[1].parse::<f64>().unwrap().is_finite());
}

#[test]
fn sampling() {
    let dir = tempfile::tempdir().unwrap();
    let chain = file(
        dir.path(),
        "chain.txt",
        "alphabet: a b\nstates: 2\ntrans I 0 1\ntrans 0 1 1\ntrans 1 F 1\nemit 0 a 1\nemit 1 b 1\n",
    );
    let text = stdout(&run(&["sample", "--model", s(&chain), "-n", "5"]));
    assert_eq!(text, "a b\n".repeat(5));

    let looping = file(
        dir.path(),
        "loop.txt",
        "alphabet: a\nstates: 1\ntrans I 0 1\ntrans 0 0 0.9\ntrans 0 F 0.1\nemit 0 a 1\n",
    );
    let a = stdout(&run(&[
        "sample",
        "--model",
        s(&looping),
        "-n",
        "20",
        "--seed",
        "7",
    ]));
    let b = stdout(&run(&[
        "sample",
        "--model",
        s(&looping),
        "-n",
        "20",
        "--seed",
        "7",
    ]));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 20);
    let capped = run(&[
        "sample",
        "--model",
        s(&looping),
        "-n",
        "50",
        "--max-len",
        "2",
    ]);
    assert!(!capped.status.success());
}

#[test]
fn case_studies() {
    let text = stdout(&run(&["casestudy", "fig3"]));
    assert!(
        text.lines().nth(1).unwrap().ends_with(",6,-0.602"),
        "{text}"
    );
    assert!(text.contains(",1,-3.465"));

    let text = stdout(&run(&["casestudy", "case1", "--mc", "50"]));
    assert!(text.contains("language_equal true"), "{text}");
}

#[test]
fn model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = file(dir.path(), "c.txt", &spaced(&CASE1_MINIMAL));
    let a = dir.path().join("a.txt");
    stdout(&run(&["induce", "--corpus", s(&corpus), "--out", s(&a)]));
    let printed = stdout(&run(&["induce", "--corpus", s(&corpus)]));
    assert_eq!(fs::read_to_string(&a).unwrap(), printed);
    let dot = stdout(&run(&["dot", "--model", s(&a)]));
    assert!(dot.starts_with("digraph"));
}
