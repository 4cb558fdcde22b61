use std::fmt;

/// One accepted merge.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub pair: (usize, usize),
    pub delta: f64,
    pub objective: f64,
    pub states: usize,
    pub log_prior_delta: f64,
    pub log_likelihood_delta: f64,
    pub lambda: f64,
    pub samples_seen: usize,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {} merge {} {} delta {:.9} objective {:.9} states {}",
            self.step, self.pair.0, self.pair.1, self.delta, self.objective, self.states
        )
    }
}

/// Record of a merge run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    /// `(samples_seen, states)` after every incorporation.
    pub profile: Vec<(usize, usize)>,
    /// Candidates checked against a full recomputation, and the worst discrepancy.
    pub audited: usize,
    pub max_audit_error: f64,
}

impl Trace {
    pub fn push(&mut self, mut step: TraceStep) {
        step.step = self.steps.len() + 1;
        self.steps.push(step);
    }

    /// The line-oriented log, one line per merge.
    pub fn to_text(&self) -> String {
        self.steps.iter().map(|s| format!("{s}\n")).collect()
    }

    /// Parses a log produced by [`Trace::to_text`] into `(step, pair, delta, objective, states)`.
    pub fn parse_line(line: &str) -> Option<(usize, (usize, usize), f64, f64, usize)> {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["step", n, "merge", a, b, "delta", d, "objective", o, "states", s] => Some((
                n.parse().ok()?,
                (a.parse().ok()?, b.parse().ok()?),
                d.parse().ok()?,
                o.parse().ok()?,
                s.parse().ok()?,
            )),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let mut t = Trace::default();
        t.push(TraceStep {
            step: 0,
            pair: (1, 5),
            delta: -0.5,
            objective: -1.25,
            states: 4,
            log_prior_delta: 0.0,
            log_likelihood_delta: -0.5,
            lambda: 1.0,
            samples_seen: 2,
        });
        let text = t.to_text();
        assert_eq!(
            text,
            "step 1 merge 1 5 delta -0.500000000 objective -1.250000000 states 4\n"
        );
        assert_eq!(
            Trace::parse_line(text.trim()),
            Some((1, (1, 5), -0.5, -1.25, 4))
        );
    }
}
