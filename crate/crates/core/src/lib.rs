//! Pleasantness elicitation by coarse rating plus targeted pairwise
//! comparison.
//!
//! Stimuli are first rated on a seven-level scale between two participant
//! chosen anchors. Only pairs with equal or adjacent ratings are then compared
//! directly (equal ratings twice, adjacent once); every other pair is entered
//! as an implied win for the higher-rated stimulus. The merged dataset is fit
//! with a Bradley-Terry model and the strengths are rescaled onto `[-3, +3]`.
//!
//! The crate is `no_std` and needs only `alloc`. IO, file formats and the
//! session service live in the `pleasance` crate.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod bt;
mod linalg;
pub mod protocol;
pub mod simulation;
pub mod stimulus;

pub use bt::{BtOptions, ComparisonDataset, StrengthEstimate};
pub use protocol::{ProtocolConfig, SessionState};
pub use stimulus::{default_catalog, StimulusSpec};
