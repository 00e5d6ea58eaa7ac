//! `OSRT` forest files.
//!
//! Layout (little-endian): magic `OSRT`, u32 version (1), u32 classes, u32 dim,
//! u32 trees, u32 features per split, u64 seed, u32 training samples, then per
//! tree a u32 node count followed by its nodes in arena order (root first).
//! A node is a u8 tag: 0 = leaf followed by a u32 class, 1 = split followed
//! by u32 feature, f64 threshold, u32 left, u32 right.

use std::path::Path;

use super::{DecisionTree, RandomForest, TreeNode};
use crate::binio::ByteReader;
use crate::error::{FormatError, Result};

const MAGIC: &[u8; 4] = b"OSRT";
const VERSION: u32 = 1;

pub fn encode_forest(forest: &RandomForest) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        forest.num_classes() as u32,
        forest.feature_dim() as u32,
        forest.num_trees() as u32,
        forest.features_per_split() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&forest.seed().to_le_bytes());
    out.extend_from_slice(&(forest.training_samples() as u32).to_le_bytes());
    for tree in forest.trees() {
        out.extend_from_slice(&(tree.nodes().len() as u32).to_le_bytes());
        for node in tree.nodes() {
            match *node {
                TreeNode::Leaf { class } => {
                    out.push(0);
                    out.extend_from_slice(&class.to_le_bytes());
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(1);
                    out.extend_from_slice(&feature.to_le_bytes());
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
            }
        }
    }
    out
}

fn corrupt(msg: String) -> FormatError {
    FormatError::Corrupt(msg)
}

pub fn decode_forest(bytes: &[u8]) -> Result<RandomForest> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version("forest", VERSION)?;
    let classes = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let n_trees = r.u32()? as usize;
    let per_split = r.u32()? as usize;
    let seed = r.u64()?;
    let training_samples = r.u32()? as usize;
    if classes < 2 || dim == 0 || n_trees == 0 {
        return Err(corrupt(format!(
            "invalid forest header: {classes} classes, dim {dim}, {n_trees} trees"
        ))
        .into());
    }
    // Every tree takes at least 9 bytes.
    r.require(n_trees.saturating_mul(9))?;

    let mut trees = Vec::with_capacity(n_trees);
    for b in 0..n_trees {
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(corrupt(format!("tree {b} has no nodes")).into());
        }
        r.require(count.saturating_mul(5))?;
        let mut nodes = Vec::with_capacity(count);
        let mut referenced = vec![false; count];
        for i in 0..count {
            let node = match r.u8()? {
                0 => {
                    let class = r.u32()?;
                    if class as usize >= classes {
                        return Err(corrupt(format!("tree {b} node {i}: class {class} out of range")).into());
                    }
                    TreeNode::Leaf { class }
                }
                1 => {
                    let feature = r.u32()?;
                    let threshold = r.f64()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    if feature as usize >= dim || !threshold.is_finite() {
                        return Err(corrupt(format!("tree {b} node {i}: bad split on feature {feature}")).into());
                    }
                    for child in [left, right] {
                        let c = child as usize;
                        if c <= i || c >= count || referenced[c] {
                            return Err(corrupt(format!("tree {b} node {i}: bad child index {child}")).into());
                        }
                        referenced[c] = true;
                    }
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                tag => return Err(corrupt(format!("tree {b} node {i}: unknown tag {tag}")).into()),
            };
            nodes.push(node);
        }
        if let Some(orphan) = referenced.iter().skip(1).position(|&x| !x) {
            return Err(corrupt(format!("tree {b}: node {} is unreachable", orphan + 1)).into());
        }
        trees.push(DecisionTree::from_nodes(nodes));
    }
    r.finish()?;
    Ok(RandomForest::from_parts(
        trees,
        classes,
        dim,
        per_split,
        seed,
        training_samples,
    ))
}

pub fn write_forest_file(path: impl AsRef<Path>, forest: &RandomForest) -> Result<()> {
    std::fs::write(path, encode_forest(forest))?;
    Ok(())
}

pub fn read_forest_file(path: impl AsRef<Path>) -> Result<RandomForest> {
    decode_forest(&std::fs::read(path)?)
}
