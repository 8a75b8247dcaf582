use std::path::Path;
use std::sync::Arc;

use crate::container::Container;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::features::{FeatureModels, PreparedText};
use crate::gbdt::{self, GbdtModel};
use crate::stancenet::{self, MatchLstmModel};

/// File names inside a model directory.
pub const MODEL_FILES: [&str; 4] = ["features.mstr", "gbdt.mstr", "mlstm.mstr", "embeddings.mstr"];

const EMBEDDINGS_TAG: &str = "EMB";

/// Everything needed to score a (question, article) pair.
#[derive(Debug, Clone)]
pub struct Models {
    pub features: FeatureModels,
    pub gbdt: GbdtModel,
    pub stance: MatchLstmModel,
}

impl Models {
    pub fn new(features: FeatureModels, gbdt: GbdtModel, stance: MatchLstmModel) -> Result<Self> {
        if gbdt.feature_count != features.feature_count() {
            return Err(Error::Dimension {
                expected: features.feature_count(),
                actual: gbdt.feature_count,
            });
        }
        if stance.config.embedding_dim != features.embeddings.dim() {
            return Err(Error::Dimension {
                expected: features.embeddings.dim(),
                actual: stance.config.embedding_dim,
            });
        }
        Ok(Models { features, gbdt, stance })
    }

    pub fn embeddings(&self) -> &Arc<EmbeddingStore> {
        &self.features.embeddings
    }

    /// Relatedness probability of a prepared pair.
    pub fn relatedness(&self, q: &PreparedText, d: &PreparedText) -> Result<f64> {
        self.gbdt.predict_rel(&self.features.row(q, d))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut c = Container::new();
        self.features.to_container(&mut c);
        c.write(dir.join(MODEL_FILES[0]))?;
        let mut c = Container::new();
        c.push(gbdt::SECTION_TAG, gbdt::encode_model(&self.gbdt));
        c.write(dir.join(MODEL_FILES[1]))?;
        let mut c = Container::new();
        c.push(stancenet::SECTION_TAG, self.stance.encode());
        c.write(dir.join(MODEL_FILES[2]))?;
        let mut c = Container::new();
        c.push(EMBEDDINGS_TAG, self.embeddings().encode());
        c.write(dir.join(MODEL_FILES[3]))
    }

    /// Loads a model directory, optionally replacing the stored vocabulary
    /// subset with a full embedding table.
    pub fn load(dir: impl AsRef<Path>, embeddings: Option<Arc<EmbeddingStore>>) -> Result<Self> {
        let dir = dir.as_ref();
        let embeddings = match embeddings {
            Some(e) => e,
            None => {
                let c = Container::read(dir.join(MODEL_FILES[3]))?;
                Arc::new(EmbeddingStore::decode(c.require(EMBEDDINGS_TAG)?)?)
            }
        };
        let features = FeatureModels::from_container(&Container::read(dir.join(MODEL_FILES[0]))?, embeddings)?;
        let gbdt = gbdt::decode_model(Container::read(dir.join(MODEL_FILES[1]))?.require(gbdt::SECTION_TAG)?)?;
        let stance =
            MatchLstmModel::decode(Container::read(dir.join(MODEL_FILES[2]))?.require(stancenet::SECTION_TAG)?)?;
        Models::new(features, gbdt, stance)
    }
}
