//! Interactive explainable-recommendation loop with explanatory-efficacy scoring
//! and an EEG feature and classification pipeline.

pub mod analysis;
pub mod api;
pub mod catalog;
pub mod eeg;
pub mod embed;
pub mod efficacy;
pub mod explain;
pub mod feedback;
pub mod recommend;
pub mod session;
pub mod simulate;
pub mod error;

pub use error::{Error, Result};
