//! Latent item embedding learned by an ADAM-trained autoencoder, and the
//! similar-item candidate pool built on it.

pub mod adam;
pub mod autoencoder;
pub mod latent;

use std::fs;
use std::path::Path;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use autoencoder::{train_autoencoder, Autoencoder, TrainConfig, TrainReport, DEFAULT_LAYER_SIZES};
pub use latent::{Candidate, LatentIndex, DEFAULT_POOL_SIZE};

use crate::catalog::Catalog;
use crate::error::Result;

/// Trained autoencoder plus the latent index it induces over a catalog.
#[derive(Debug, Clone)]
pub struct EmbedModel {
    pub autoencoder: Autoencoder,
    pub index: LatentIndex,
    pub report: Option<TrainReport>,
}

impl EmbedModel {
    pub fn train(catalog: &Catalog, cfg: &TrainConfig) -> Result<Self> {
        let rows = autoencoder::to_rows(catalog.encoded_rows());
        let (autoencoder, report) = train_autoencoder(&rows, cfg)?;
        let index = LatentIndex::build(catalog, &autoencoder);
        Ok(Self {
            autoencoder,
            index,
            report: Some(report),
        })
    }

    pub fn from_autoencoder(catalog: &Catalog, autoencoder: Autoencoder) -> Self {
        let index = LatentIndex::build(catalog, &autoencoder);
        Self {
            autoencoder,
            index,
            report: None,
        }
    }

    pub fn load(catalog: &Catalog, path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let ae = Autoencoder::read_from(bytes.as_slice())?;
        Ok(Self::from_autoencoder(catalog, ae))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.autoencoder.to_bytes())?;
        Ok(())
    }
}
