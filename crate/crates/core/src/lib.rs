//! Position-aware decay weighted network (PDN) for aspect-term sentiment
//! classification.
//!
//! The crate is layered bottom-up:
//!
//! * [`numeric`] dense tensors, a reverse-mode tape, Adam and a
//!   finite-difference oracle.
//! * [`model`] position encoding, decay functions, the PDN forward pass,
//!   the positionless baselines and checkpoint I/O.
//! * [`data`] tokenisation, SemEval XML and TSV readers, vocabulary,
//!   embedding loading, batching and the synthetic task generator.
//! * [`train`] the training loop, evaluation and attention dumps.

pub mod data;
pub mod exec;
pub mod model;
pub mod numeric;
pub mod train;
