//! Part-of-speech tagging with a cascade of two sequential transducers.
//!
//! Words are first mapped to ambiguity classes (the sorted set of tags a
//! word was seen with, plus their probabilities). A left-to-right
//! transducer rewrites each class to a reduced class using the left
//! context, and a right-to-left transducer rewrites each reduced class to a
//! single tag using the right context. Tagging is a pair of table lookups
//! per word.
//!
//! A class-based bigram HMM with Viterbi decoding is included as the
//! reference baseline.
//!
//! ```no_run
//! use seqtag::{load_corpus, train, TrainConfig};
//!
//! let corpus = load_corpus("train.tsv")?;
//! let trained = train(&corpus, &TrainConfig::default())?;
//! let tags = seqtag::tag(&trained.bundle, &[vec!["the", "dog", "barks"]], 1)?;
//! # Ok::<(), seqtag::Error>(())
//! ```

pub mod classes;
pub mod context;
pub mod corpus;
mod error;
pub mod hmm;
pub mod pipeline;
pub mod transducer;

pub use classes::{
    AmbiguityClass, ClassInventory, ClassLexicon, ReducedAmbiguityClass, ReducedInventory,
};
pub use corpus::{compute_stats, load_corpus, CorpusStats, TaggedCorpus, TaggedToken};
pub use error::{Error, Result};
pub use hmm::{train_hmm, HmmModel};
pub use pipeline::{bench, evaluate, tag, train, ModelBundle, TrainConfig, Trained};
pub use transducer::{build_t1, build_t2, Direction, SequentialTransducer};
