//! Section payload layout (little endian):
//!
//! ```text
//! embedding_dim u32 | hidden_dim u32 | key_sentences u32
//! max_question_len u32 | max_article_len u32
//! epochs u32 | batch_size u32 | learning_rate f64 | clip_norm f64
//! init_scale f64 | seed u64 | has_class_weights u8 [| 3 × f64]
//! param_count u64 | params f64 × param_count
//! ```
//!
//! Parameters follow [`Layout`](super::Layout): per LSTM (question,
//! article, matching) the row-major stacked `W`, `V`, `b` with gates in the
//! order i, f, o, c; then `w_e`, `W_q`, `W_d`, `W_m`; then each head's
//! weight vector and bias.

use super::{MatchLstmModel, StanceConfig};
use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const SECTION_TAG: &str = "MLSTM";

impl MatchLstmModel {
    pub fn encode(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = ByteWriter::new();
        w.u32(c.embedding_dim as u32)
            .u32(c.hidden_dim as u32)
            .u32(c.key_sentences as u32)
            .u32(c.max_question_len as u32)
            .u32(c.max_article_len as u32)
            .u32(c.epochs as u32)
            .u32(c.batch_size as u32)
            .f64(c.learning_rate)
            .f64(c.clip_norm)
            .f64(c.init_scale)
            .u64(c.seed);
        match c.class_weights {
            Some(cw) => {
                w.u8(1);
                cw.iter().for_each(|&v| {
                    w.f64(v);
                });
            }
            None => {
                w.u8(0);
            }
        }
        w.f64s(self.params());
        w.finish()
    }

    pub fn decode(payload: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(payload);
        let mut config = StanceConfig {
            embedding_dim: r.u32()? as usize,
            hidden_dim: r.u32()? as usize,
            key_sentences: r.u32()? as usize,
            max_question_len: r.u32()? as usize,
            max_article_len: r.u32()? as usize,
            epochs: r.u32()? as usize,
            batch_size: r.u32()? as usize,
            learning_rate: r.f64()?,
            clip_norm: r.f64()?,
            init_scale: r.f64()?,
            seed: r.u64()?,
            class_weights: None,
        };
        config.class_weights = match r.u8()? {
            0 => None,
            1 => Some([r.f64()?, r.f64()?, r.f64()?]),
            b => return Err(Error::Container(format!("mlstm section: bad class weight flag {b}"))),
        };
        let params = r.f64s()?;
        r.finish()?;
        MatchLstmModel::from_params(&config, params).map_err(|e| Error::Container(format!("mlstm section: {e}")))
    }
}
