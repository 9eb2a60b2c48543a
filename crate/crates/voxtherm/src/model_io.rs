//! Binary model files (little-endian):
//!
//! ```text
//! "VXMF" | u32 version
//! config: u64 n_trees | u64 k (0 = all) | u64 min_samples_leaf
//!         | u64 max_depth (u64::MAX = unlimited) | u8 bootstrap | u64 seed
//!         | u8 split rule (0 random, 1 best)
//! u64 train_horizon (u64::MAX = unknown)
//! u32 n_features | per feature: u32 len, name bytes | f64 importance x n_features
//! u32 n_trees | per tree: u32 n_nodes | nodes in pre-order
//! node: u8 0 | u32 feature | f64 threshold | u32 right
//!     | u8 1 | f64 value | u32 n_samples
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use voxtherm_core::ert::{Forest, Node, SplitRule, TrainConfig, Tree};

use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"VXMF";
const MODEL_VERSION: u32 = 1;

/// A fitted forest plus the last truth timestep it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub forest: Forest,
    pub train_horizon: Option<usize>,
}

pub fn write_model(path: &Path, model: &StoredModel) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(&mut w, model)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn encode(w: &mut impl Write, model: &StoredModel) -> std::io::Result<()> {
    let f = &model.forest;
    let c = f.config();
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    for v in [
        c.n_trees as u64,
        c.k_candidate_features.map_or(0, |k| k as u64),
        c.min_samples_leaf as u64,
        c.max_depth.map_or(u64::MAX, |d| d as u64),
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[c.bootstrap as u8])?;
    w.write_all(&c.seed.to_le_bytes())?;
    w.write_all(&[matches!(c.split_rule, SplitRule::Best) as u8])?;
    w.write_all(&model.train_horizon.map_or(u64::MAX, |m| m as u64).to_le_bytes())?;

    w.write_all(&(f.feature_names().len() as u32).to_le_bytes())?;
    for name in f.feature_names() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    for x in f.importances() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&(f.trees().len() as u32).to_le_bytes())?;
    for tree in f.trees() {
        w.write_all(&(tree.nodes().len() as u32).to_le_bytes())?;
        for node in tree.nodes() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    w.write_all(&[0])?;
                    w.write_all(&feature.to_le_bytes())?;
                    w.write_all(&threshold.to_le_bytes())?;
                    w.write_all(&right.to_le_bytes())?;
                }
                Node::Leaf { value, n_samples } => {
                    w.write_all(&[1])?;
                    w.write_all(&value.to_le_bytes())?;
                    w.write_all(&n_samples.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

struct Decoder<'p, R> {
    r: R,
    path: &'p Path,
}

impl<R: Read> Decoder<'_, R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r.read_exact(&mut b).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(self.path, "truncated model file")
            } else {
                Error::io(self.path, e)
            }
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn bad(&self, msg: impl Into<String>) -> Error {
        Error::format(self.path, msg)
    }
}

pub fn read_model(path: &Path) -> Result<StoredModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut d = Decoder {
        r: BufReader::new(file),
        path,
    };
    if &d.bytes::<4>()? != MODEL_MAGIC {
        return Err(d.bad("not a model file"));
    }
    let version = d.u32()?;
    if version != MODEL_VERSION {
        return Err(d.bad(format!("unsupported model version {version}")));
    }
    let n_trees = d.u64()? as usize;
    let k = d.u64()?;
    let min_samples_leaf = d.u64()? as usize;
    let max_depth = d.u64()?;
    let bootstrap = d.u8()? != 0;
    let seed = d.u64()?;
    let split_rule = match d.u8()? {
        0 => SplitRule::Random,
        1 => SplitRule::Best,
        x => return Err(d.bad(format!("unknown split rule {x}"))),
    };
    let config = TrainConfig {
        n_trees,
        k_candidate_features: (k != 0).then_some(k as usize),
        min_samples_leaf,
        max_depth: (max_depth != u64::MAX).then_some(max_depth as usize),
        bootstrap,
        seed,
        split_rule,
    };
    let horizon = d.u64()?;
    let train_horizon = (horizon != u64::MAX).then_some(horizon as usize);

    let n_features = d.u32()? as usize;
    let mut names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let len = d.u32()? as usize;
        let mut b = vec![0u8; len];
        d.r.read_exact(&mut b)
            .map_err(|_| d.bad("truncated feature name"))?;
        names.push(String::from_utf8(b).map_err(|_| d.bad("feature name is not UTF-8"))?);
    }
    let importances = (0..n_features).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
    let stored = d.u32()? as usize;
    let mut trees = Vec::with_capacity(stored);
    for _ in 0..stored {
        let n_nodes = d.u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 24));
        for _ in 0..n_nodes {
            nodes.push(match d.u8()? {
                0 => Node::Split {
                    feature: d.u32()?,
                    threshold: d.f64()?,
                    right: d.u32()?,
                },
                1 => Node::Leaf {
                    value: d.f64()?,
                    n_samples: d.u32()?,
                },
                x => return Err(d.bad(format!("unknown node tag {x}"))),
            });
        }
        trees.push(Tree::from_nodes(nodes, n_features).map_err(|e| d.bad(e.to_string()))?);
    }
    let mut rest = [0u8; 1];
    if d.r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(d.bad("trailing bytes after last tree"));
    }
    let forest =
        Forest::from_parts(trees, config, names, importances).map_err(|e| d.bad(e.to_string()))?;
    Ok(StoredModel {
        forest,
        train_horizon,
    })
}
