//! Evidence-class triage for biomedical abstracts.
//!
//! Two interchangeable classifiers sort articles into five evidence classes
//! ([`DocClass`]): a random forest over TF-IDF features ([`forest`],
//! [`textpipe`]) and a multinomial logistic head over document embeddings
//! ([`linear`], [`embed`]). [`eval`] scores them per class, and [`triage`]
//! serves an uncertainty-ordered curation queue whose corrections retrain the
//! linear head.

pub mod bundle;
pub mod class;
pub mod embed;
pub mod eval;
pub mod forest;
pub mod hashing;
pub mod ingest;
pub mod linear;
pub mod prediction;
pub mod synth;
pub mod textpipe;
pub mod triage;
pub mod weights;

pub use class::{DocClass, N_CLASSES};
pub use ingest::{DocumentRecord, Source};
pub use prediction::PredictionResult;
pub use weights::ClassWeights;
