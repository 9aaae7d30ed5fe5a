//! Seeded synthetic nights with known stages, for end-to-end checks.

pub mod corpus;
pub mod hypnogram;
pub mod night;
pub mod profile;

use thiserror::Error;

pub use corpus::{
    corpus_split, generate_corpus, generate_nights, read_manifest, CorpusManifest, CorpusOptions,
    NightEntry, CORPUS_MANIFEST,
};
pub use hypnogram::{generate_hypnogram, Hypnogram};
pub use night::{generate_night, GroundTruth, SyntheticNight, TruthEvent};
pub use profile::{ProfileSet, StageProfile};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("a night needs at least {min} epochs, got {0}", min = night::MIN_EPOCHS)]
    TooShort(usize),
    #[error("a corpus needs at least {min} nights, got {0}", min = corpus::MIN_NIGHTS)]
    TooFewNights(usize),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error("corpus manifest: {0}")]
    Manifest(String),
}
