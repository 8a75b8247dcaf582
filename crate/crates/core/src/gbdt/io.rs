//! Section payload layout (little endian):
//!
//! ```text
//! feature_count u32 | learning_rate f64 | base_margin f64 | tree_count u32
//! per tree:  node_count u32, then nodes
//! leaf:      0u8 | weight f64
//! split:     1u8 | feature u32 | threshold f64 | left u32 | right u32 | default_left u8 | gain f64
//! ```

use super::{GbdtModel, RegressionTree, TreeNode};
use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const SECTION_TAG: &str = "GBDT";

const LEAF: u8 = 0;
const SPLIT: u8 = 1;

pub fn encode_model(model: &GbdtModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u32(model.feature_count as u32)
        .f64(model.learning_rate)
        .f64(model.base_margin)
        .u32(model.trees.len() as u32);
    for tree in &model.trees {
        w.u32(tree.nodes.len() as u32);
        for node in &tree.nodes {
            match *node {
                TreeNode::Leaf { weight } => {
                    w.u8(LEAF).f64(weight);
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                    gain,
                } => {
                    w.u8(SPLIT)
                        .u32(feature)
                        .f64(threshold)
                        .u32(left)
                        .u32(right)
                        .u8(default_left as u8)
                        .f64(gain);
                }
            }
        }
    }
    w.finish()
}

pub fn decode_model(payload: &[u8]) -> Result<GbdtModel> {
    let bad = |m: String| Error::Container(format!("gbdt section: {m}"));
    let mut r = ByteReader::new(payload);
    let feature_count = r.u32()? as usize;
    let learning_rate = r.f64()?;
    let base_margin = r.f64()?;
    let tree_count = r.u32()? as usize;
    let mut trees = Vec::with_capacity(tree_count.min(1 << 16));
    for t in 0..tree_count {
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(bad(format!("tree {t} has no nodes")));
        }
        let mut nodes = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let node = match r.u8()? {
                LEAF => TreeNode::Leaf { weight: r.f64()? },
                SPLIT => {
                    let feature = r.u32()?;
                    let threshold = r.f64()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    let default_left = match r.u8()? {
                        0 => false,
                        1 => true,
                        b => return Err(bad(format!("bad default flag {b}"))),
                    };
                    let gain = r.f64()?;
                    if feature as usize >= feature_count {
                        return Err(bad(format!("tree {t} node {i} splits on feature {feature}")));
                    }
                    // children always follow their parent, which rules out cycles
                    for child in [left, right] {
                        if child as usize <= i || child as usize >= count {
                            return Err(bad(format!("tree {t} node {i} has child {child}")));
                        }
                    }
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        default_left,
                        gain,
                    }
                }
                k => return Err(bad(format!("unknown node kind {k}"))),
            };
            nodes.push(node);
        }
        trees.push(RegressionTree { nodes });
    }
    r.finish()?;
    Ok(GbdtModel {
        trees,
        learning_rate,
        base_margin,
        feature_count,
    })
}
