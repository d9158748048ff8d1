//! Street-level urban sound maps built from the tags of geo-referenced photos.
//!
//! The crate turns photo tags into per-segment sound, emotion, diversity and
//! perception layers:
//!
//! * [`ingest`] parses photos, street segments, lexicons, noise levels and
//!   soundwalk questionnaires.
//! * [`geo`] buffers street polylines into capsules and assigns photo tags to
//!   the segments whose capsule contains the photo.
//! * [`lexicon`] normalizes tags and matches them against word lists.
//! * [`taxonomy`] clusters sound words from their co-occurrence network
//!   (map-equation partition, modularity refinement, declarative merges).
//! * [`layers`] computes sound and emotion profiles, z-scores, dominant
//!   categories and Shannon diversity.
//! * [`stats`] holds Spearman correlation with a spatially corrected
//!   significance test and quartile indicators.
//! * [`perception`] turns soundwalk scores into sound-to-perception
//!   probabilities and projects them onto segments.
//! * [`validation`] computes weighted day-evening-night noise levels and the
//!   noise correlation sweep.
//! * [`pipeline`] wires everything into the `chattymaps` subcommands.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and sequentially otherwise; see [`Exec`].

pub mod categories;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod layers;
pub mod lexicon;
pub mod output;
pub mod par;
pub mod perception;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod taxonomy;
pub mod validation;

pub use categories::{Emotion, Perception, SoundCategory, WalkSound};
pub use error::{Error, Result};
pub use par::Exec;
