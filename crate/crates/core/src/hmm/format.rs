use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::algo::renormalize;
use super::{Dest, Hmm, Src};
use crate::corpus::{Alphabet, Symbol};
use crate::error::{Error, Result};

/// Row-sum tolerance when loading a model file.
const LOAD_TOL: f64 = 1e-6;

/// Serializes a model in the line-oriented text format.
pub fn write_hmm(hmm: &Hmm) -> String {
    let mut out = String::new();
    let syms: Vec<&str> = hmm
        .alphabet()
        .symbols()
        .iter()
        .map(Symbol::as_str)
        .collect();
    writeln!(out, "alphabet: {}", syms.join(" ")).unwrap();
    writeln!(out, "states: {}", hmm.n_states()).unwrap();
    for (src, row) in hmm.rows() {
        for (dst, lp) in row {
            writeln!(out, "trans {src} {dst} {:.17e}", lp.exp()).unwrap();
        }
    }
    for q in 0..hmm.n_states() {
        for (s, lp) in hmm.emissions(q) {
            writeln!(
                out,
                "emit {q} {} {:.17e}",
                hmm.alphabet().symbol(*s),
                lp.exp()
            )
            .unwrap();
        }
    }
    out
}

/// Parses the text format. Rows must sum to one within 1e-6 and are then renormalized.
pub fn parse_hmm(text: &str) -> Result<Hmm> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, msg: String| Error::Format { line, msg };

    let (ln, first) = lines
        .next()
        .ok_or_else(|| err(1, "missing alphabet line".into()))?;
    let rest = first
        .strip_prefix("alphabet:")
        .ok_or_else(|| err(ln, "expected `alphabet:`".into()))?;
    let symbols = rest
        .split_whitespace()
        .map(Symbol::new)
        .collect::<Result<Vec<_>>>()?;
    let alphabet = Alphabet::ordered(symbols).map_err(|e| err(ln, e.to_string()))?;

    let (ln, second) = lines
        .next()
        .ok_or_else(|| err(ln + 1, "missing states line".into()))?;
    let n: usize = second
        .strip_prefix("states:")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected `states: <N>`".into()))?;

    let mut initial = BTreeMap::new();
    let mut trans = vec![BTreeMap::new(); n];
    let mut emit = vec![BTreeMap::new(); n];
    let state = |tok: &str, line: usize| -> Result<usize> {
        tok.parse::<usize>()
            .ok()
            .filter(|&q| q < n)
            .ok_or_else(|| err(line, format!("bad state `{tok}`")))
    };
    let prob = |tok: &str, line: usize| -> Result<f64> {
        tok.parse::<f64>()
            .ok()
            .filter(|p| (0.0..=1.0 + LOAD_TOL).contains(p))
            .ok_or_else(|| err(line, format!("bad probability `{tok}`")))
    };
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["trans", from, to, p] => {
                let src = match *from {
                    "I" => Src::Initial,
                    f => Src::State(state(f, ln)?),
                };
                let dst = match *to {
                    "F" => Dest::Final,
                    t => Dest::State(state(t, ln)?),
                };
                let p = prob(p, ln)?;
                if p > 0.0 {
                    let row = match src {
                        Src::Initial => &mut initial,
                        Src::State(q) => &mut trans[q],
                    };
                    if row.insert(dst, p.ln()).is_some() {
                        return Err(err(ln, format!("duplicate transition {src} {dst}")));
                    }
                }
            }
            ["emit", q, sym, p] => {
                let q = state(q, ln)?;
                let s = Symbol::new(sym)?;
                let id = alphabet
                    .id(&s)
                    .ok_or_else(|| err(ln, format!("symbol `{s}` not in alphabet")))?;
                let p = prob(p, ln)?;
                if p > 0.0 && emit[q].insert(id, p.ln()).is_some() {
                    return Err(err(ln, format!("duplicate emission {q} {s}")));
                }
            }
            _ => return Err(err(ln, format!("unrecognized line `{line}`"))),
        }
    }
    let hmm = Hmm::from_log_tables(alphabet.clone(), initial, trans, emit);
    hmm.validate(LOAD_TOL).map_err(|e| err(0, e.to_string()))?;
    let initial = renormalize(hmm.initial.clone());
    let trans = hmm.trans.iter().cloned().map(renormalize).collect();
    let emit = hmm.emit.iter().cloned().map(renormalize).collect();
    Ok(Hmm::from_log_tables(alphabet, initial, trans, emit))
}

/// Graphviz rendering: one node per state labeled with its emissions.
pub fn to_dot(hmm: &Hmm) -> String {
    let mut out = String::from("digraph hmm {\n  rankdir=LR;\n");
    out.push_str("  I [shape=point];\n  F [shape=doublecircle, label=\"\"];\n");
    for q in 0..hmm.n_states() {
        let label: Vec<String> = hmm
            .emissions(q)
            .iter()
            .map(|(s, lp)| format!("{}:{:.3}", hmm.alphabet().symbol(*s), lp.exp()))
            .collect();
        writeln!(out, "  {q} [label=\"{q}\\n{}\"];", label.join("\\n")).unwrap();
    }
    for (src, row) in hmm.rows() {
        for (dst, lp) in row {
            writeln!(out, "  {src} -> {dst} [label=\"{:.3}\"];", lp.exp()).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
