//! Structure induction for discrete-output hidden Markov models by Bayesian
//! state merging, with a Baum-Welch baseline and evaluation tools.

pub mod baum_welch;
pub mod casestudy;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hmm;
pub mod merging;
pub mod priors;

pub use corpus::{Alphabet, Corpus, Sample, Symbol};
pub use error::{Error, Result};
pub use hmm::{Counts, Dest, Hmm, Src};
pub use priors::{PriorConfig, Score};
