//! Research spaces: field-relatedness networks built from publication
//! records, relatedness-density prediction of entities entering new fields,
//! and backbone/community analysis of the resulting field networks.
//!
//! The pipeline runs `corpus` -> `presence` -> (`freq_model` | `emb_model`)
//! -> `specialization` -> `prediction_eval`, with `network` working on any
//! fitted proximity matrix.

pub mod corpus;
pub mod emb_model;
pub mod error;
pub mod freq_model;
pub mod io;
pub mod matrix;
pub mod network;
pub mod prediction_eval;
pub mod presence;
pub mod simulation;
pub mod specialization;

pub use corpus::{
    EntityKind, FieldId, FieldTaxonomy, PublicationRecord, ResolvedCorpus, VenueFieldMap,
};
pub use error::{Error, Result};
pub use freq_model::{ModelTag, ProximityMatrix};
pub use presence::{TimeWindow, WindowConfig};
pub use specialization::{Stage, TransitionKind};
