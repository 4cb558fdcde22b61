//! Model merging: the initial model, the merge operator with incremental
//! scoring, and the search strategies built on them.

mod candidates;
mod search;
mod state;
mod trace;

pub use candidates::{candidate_merges, creates_loop};
pub use search::{
    batch_merge, beam_merge, best_first_merge, online_merge, MergeResult, SearchConfig,
};
pub use state::{build_initial_model, incorporate_samples, MergeCandidate, MergeState};
pub use trace::{Trace, TraceStep};
