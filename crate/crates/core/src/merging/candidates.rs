use std::collections::BTreeSet;

use super::{MergeState, SearchConfig};
use crate::hmm::Dest;

/// Unordered pairs of live states allowed by the search constraints, in
/// ascending order.
pub fn candidate_merges(
    state: &MergeState,
    search: &SearchConfig,
    same_emission: bool,
) -> Vec<(usize, usize)> {
    let ids = state.live_ids();
    let supports: Vec<BTreeSet<usize>> = ids
        .iter()
        .map(|&q| state.emission_support(q).collect())
        .collect();
    let mut out = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let (a, b) = (ids[i], ids[j]);
            if (same_emission || search.single_output) && supports[i] != supports[j] {
                continue;
            }
            if state.disallowed.contains(&(a, b)) {
                continue;
            }
            if search.forbid_loops && creates_loop(state, a, b, search.allow_self_loops) {
                continue;
            }
            out.push((a, b));
        }
    }
    out
}

/// Whether the graph after merging `a` and `b` has a cycle through the merged state.
pub fn creates_loop(state: &MergeState, a: usize, b: usize, allow_self_loops: bool) -> bool {
    let succ = |q: usize| -> Vec<usize> {
        state
            .trans_row(crate::hmm::Src::State(q))
            .keys()
            .filter_map(|d| match d {
                Dest::State(r) => Some(if *r == b { a } else { *r }),
                Dest::Final => None,
            })
            .collect()
    };
    let mut first: Vec<usize> = succ(a).into_iter().chain(succ(b)).collect();
    if first.contains(&a) {
        if !allow_self_loops {
            return true;
        }
        first.retain(|&r| r != a);
    }
    let mut seen = BTreeSet::new();
    let mut stack = first;
    while let Some(q) = stack.pop() {
        if q == a {
            return true;
        }
        if !seen.insert(q) {
            continue;
        }
        stack.extend(succ(q));
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::merging::build_initial_model;
    use crate::priors::PriorConfig;

    fn state(strings: &[&str]) -> MergeState {
        build_initial_model(&Corpus::from_chars(strings), &PriorConfig::default()).unwrap()
    }

    /// Cycle oracle: DFS over the explicit merged adjacency matrix.
    fn has_cycle_through(adj: &[Vec<bool>], m: usize, skip_self: bool) -> bool {
        let n = adj.len();
        if adj[m][m] && !skip_self {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&r| r != m && adj[m][r]).collect();
        while let Some(q) = stack.pop() {
            if q == m {
                return true;
            }
            if std::mem::replace(&mut seen[q], true) {
                continue;
            }
            stack.extend((0..n).filter(|&r| adj[q][r]));
        }
        false
    }

    #[test]
    fn pair_count_and_filters() {
        let s = state(&["abcd"]);
        let all = SearchConfig::default();
        assert_eq!(candidate_merges(&s, &all, false).len(), 6);
        let s = state(&["aab"]);
        let single = SearchConfig {
            single_output: true,
            ..SearchConfig::default()
        };
        assert_eq!(candidate_merges(&s, &single, false), vec![(0, 1)]);
    }

    #[test]
    fn loop_filter_excludes_cycle() {
        let s = state(&["abab"]);
        let cfg = SearchConfig {
            forbid_loops: true,
            ..SearchConfig::default()
        };
        let pairs = candidate_merges(&s, &cfg, false);
        assert!(!pairs.contains(&(0, 2)));
        assert!(!pairs.contains(&(0, 1)));
        let allow = SearchConfig {
            forbid_loops: true,
            allow_self_loops: true,
            ..SearchConfig::default()
        };
        let pairs = candidate_merges(&s, &allow, false);
        assert!(pairs.contains(&(0, 1)));
        assert!(!pairs.contains(&(0, 2)));
    }

    #[test]
    fn loop_filter_matches_dfs_oracle() {
        let mut s = state(&["abcab", "acb", "bca", "cab"]);
        // some prior merges to create branching structure
        s.merge_states(1, 6).unwrap();
        s.merge_states(0, 5).unwrap();
        let ids = s.live_ids();
        let n = ids.len();
        let pos = |q: usize| ids.iter().position(|&x| x == q).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (ids[i], ids[j]);
                let mut adj = vec![vec![false; n]; n];
                for &q in &ids {
                    for d in s.trans_row(crate::hmm::Src::State(q)).keys() {
                        if let Dest::State(r) = d {
                            let from = if q == b { a } else { q };
                            let to = if *r == b { a } else { *r };
                            adj[pos(from)][pos(to)] = true;
                        }
                    }
                }
                for allow in [false, true] {
                    assert_eq!(
                        creates_loop(&s, a, b, allow),
                        has_cycle_through(&adj, pos(a), allow),
                        "pair ({a},{b}) allow {allow}"
                    );
                }
            }
        }
    }
}
