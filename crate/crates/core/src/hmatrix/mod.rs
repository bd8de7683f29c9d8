//! Hierarchical matrices over binary (line) and quadtree (face) partitions.
//!
//! An [`HMatrix`] stores a square matrix indexed by the points of a
//! [`PartitionTree`]. Admissible node pairs hold [`LowRankBlock`]s, the
//! remaining leaf-level pairs are dense, and everything else is subdivided.
//! The public interface takes and returns data in the natural order of the
//! index set; internally blocks are laid out in tree order.

mod block;
mod lowrank;
mod policy;
mod tree;

use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dense::dense_guard;
use crate::discretization::LayerBlock;
use crate::{CMat, C64};

use block::{Block, Ctx, Kind, Slot};

pub use lowrank::{compress_factors, randomized_lowrank, recompress, truncate_dense, LowRankBlock};
pub use policy::CompressionPolicy;
pub use tree::{Admissibility, PartitionTree, TreeNode, DEFAULT_LEAF_1D, DEFAULT_LEAF_2D};

#[derive(Debug, Error)]
pub enum HMatrixError {
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid compression policy: {0}")]
    Policy(String),
    #[error("operands are built on different partition trees")]
    TreeMismatch,
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("singular pivot block at level {level} (node {node})")]
    Singular { level: usize, node: usize },
    #[error("matrix of size {size} exceeds the dense guard {guard}")]
    DenseGuard { size: usize, guard: usize },
    #[error("sparsity pattern violation: {0}")]
    Pattern(String),
    #[error("bad serialized block: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which side a diagonal factor multiplies from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagSide {
    Left,
    Right,
}

/// Build a partition tree shared by H-matrices.
pub fn build_partition(
    n: usize,
    leaf_size: usize,
    index_dim: usize,
    admissibility: Admissibility,
) -> Result<Arc<PartitionTree>, HMatrixError> {
    PartitionTree::build(n, leaf_size, index_dim, admissibility).map(Arc::new)
}

#[derive(Debug, Clone)]
pub struct HMatrix {
    tree: Arc<PartitionTree>,
    root: Block,
}

impl PartialEq for HMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.tree.same_shape(&other.tree) && self.root == other.root
    }
}

impl HMatrix {
    pub fn tree(&self) -> &Arc<PartitionTree> {
        &self.tree
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }

    pub fn zeros(tree: Arc<PartitionTree>) -> Self {
        let root = Block::zeros(&tree, 0, 0);
        Self { tree, root }
    }

    pub fn identity(tree: Arc<PartitionTree>) -> Self {
        Self::from_diagonal(tree.clone(), &vec![C64::new(1.0, 0.0); tree.size()]).expect("diagonal has the tree's size")
    }

    /// Diagonal matrix from natural-order entries.
    pub fn from_diagonal(tree: Arc<PartitionTree>, d: &[C64]) -> Result<Self, HMatrixError> {
        if d.len() != tree.size() {
            return Err(HMatrixError::SizeMismatch { expected: tree.size(), got: d.len() });
        }
        let dt = tree.to_tree_order(d);
        let t = &tree;
        let root = Block::build(t, 0, 0, &mut |r, c, slot| {
            let (m, n) = (t.nodes[r].len(), t.nodes[c].len());
            match slot {
                Slot::Admissible => Kind::LowRank(LowRankBlock::zeros(m, n)),
                Slot::Leaf => {
                    let mut b = CMat::zeros(m, n);
                    if r == c {
                        let s = t.nodes[r].start;
                        for k in 0..m {
                            b[(k, k)] = dt[s + k];
                        }
                    }
                    Kind::Dense(b)
                }
            }
        });
        Ok(Self { tree, root })
    }

    /// Compress a dense natural-order matrix: admissible blocks by truncated
    /// SVD under `policy`, leaf blocks copied.
    pub fn compress_dense(
        m: &CMat,
        tree: Arc<PartitionTree>,
        policy: &CompressionPolicy,
    ) -> Result<Self, HMatrixError> {
        policy.validate()?;
        let size = tree.size();
        if m.shape() != (size, size) {
            return Err(HMatrixError::SizeMismatch { expected: size, got: m.nrows() });
        }
        let perm = tree.perm();
        let mt = CMat::from_fn(size, size, |i, j| m[(perm[i], perm[j])]);
        let t = &tree;
        let root = Block::build(t, 0, 0, &mut |r, c, slot| {
            let (rn, cn) = (&t.nodes[r], &t.nodes[c]);
            let sub = mt.view((rn.start, cn.start), (rn.len(), cn.len())).into_owned();
            match slot {
                Slot::Admissible => Kind::LowRank(truncate_dense(&sub, policy)),
                Slot::Leaf => Kind::Dense(sub),
            }
        });
        Ok(Self { tree, root })
    }

    /// Exact H-form of a sparse layer block; factorized blocks carry one rank-one
    /// term per nonzero they contain.
    pub fn from_sparse_layer(layer: &LayerBlock, tree: Arc<PartitionTree>) -> Result<Self, HMatrixError> {
        if layer.n != tree.n || layer.face_dim != tree.index_dim {
            return Err(HMatrixError::Pattern(format!(
                "layer with n = {} on a {}-dimensional face does not match the tree (n = {}, dim {})",
                layer.n, layer.face_dim, tree.n, tree.index_dim
            )));
        }
        let iperm = tree.iperm();
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); tree.size()];
        for (i, j, v) in layer.entries() {
            if v != C64::new(0.0, 0.0) {
                by_row[iperm[i]].push((iperm[j], v));
            }
        }
        let t = &tree;
        let root = Block::build(t, 0, 0, &mut |r, c, slot| {
            let (rn, cn) = (&t.nodes[r], &t.nodes[c]);
            let hits: Vec<(usize, usize, C64)> = (rn.start..rn.end)
                .flat_map(|i| {
                    by_row[i]
                        .iter()
                        .filter(|(j, _)| (cn.start..cn.end).contains(j))
                        .map(move |&(j, v)| (i - rn.start, j - cn.start, v))
                })
                .collect();
            match slot {
                Slot::Admissible => {
                    let mut u = CMat::zeros(rn.len(), hits.len());
                    let mut v = CMat::zeros(cn.len(), hits.len());
                    for (k, &(i, j, val)) in hits.iter().enumerate() {
                        u[(i, k)] = val;
                        v[(j, k)] = C64::new(1.0, 0.0);
                    }
                    Kind::LowRank(LowRankBlock { u, v })
                }
                Slot::Leaf => {
                    let mut d = CMat::zeros(rn.len(), cn.len());
                    for (i, j, val) in hits {
                        d[(i, j)] = val;
                    }
                    Kind::Dense(d)
                }
            }
        });
        Ok(Self { tree, root })
    }

    fn same_tree(&self, other: &Self) -> Result<(), HMatrixError> {
        if Arc::ptr_eq(&self.tree, &other.tree) || self.tree.same_shape(&other.tree) {
            Ok(())
        } else {
            Err(HMatrixError::TreeMismatch)
        }
    }

    fn ctx<'a>(&'a self, policy: &'a CompressionPolicy) -> Ctx<'a> {
        Ctx { tree: &self.tree, policy, rng: ChaCha8Rng::seed_from_u64(policy.seed) }
    }

    /// `G f` for a natural-order vector.
    pub fn matvec(&self, f: &[C64]) -> Result<Vec<C64>, HMatrixError> {
        if f.len() != self.size() {
            return Err(HMatrixError::SizeMismatch { expected: self.size(), got: f.len() });
        }
        let x = CMat::from_column_slice(f.len(), 1, &self.tree.to_tree_order(f));
        let y = self.root.apply(&self.tree, x.as_view(), false);
        Ok(self.tree.to_natural_order(y.as_slice()))
    }

    /// `self + alpha other`, recompressing factorized blocks under `policy`.
    pub fn add_scaled(&self, other: &Self, alpha: C64, policy: &CompressionPolicy) -> Result<Self, HMatrixError> {
        self.same_tree(other)?;
        policy.validate()?;
        let mut out = self.clone();
        let mut ctx = self.ctx(policy);
        out.root.add_block(&other.root, alpha, &mut ctx);
        Ok(out)
    }

    pub fn add(&self, other: &Self, policy: &CompressionPolicy) -> Result<Self, HMatrixError> {
        self.add_scaled(other, C64::new(1.0, 0.0), policy)
    }

    pub fn sub(&self, other: &Self, policy: &CompressionPolicy) -> Result<Self, HMatrixError> {
        self.add_scaled(other, C64::new(-1.0, 0.0), policy)
    }

    /// `self * other` with blockwise recompression.
    pub fn mul(&self, other: &Self, policy: &CompressionPolicy) -> Result<Self, HMatrixError> {
        self.same_tree(other)?;
        policy.validate()?;
        let mut out = Self::zeros(self.tree.clone());
        let mut ctx = self.ctx(policy);
        out.root.mul_add(&self.root, &other.root, C64::new(1.0, 0.0), &mut ctx);
        Ok(out)
    }

    /// Block Gauss-Jordan inverse; each pivot is inverted recursively and dense
    /// pivots by partial-pivoted LU.
    pub fn inverse(&self, policy: &CompressionPolicy) -> Result<Self, HMatrixError> {
        policy.validate()?;
        let mut out = self.clone();
        let mut ctx = self.ctx(policy);
        out.root.invert(&mut ctx)?;
        Ok(out)
    }

    /// `diag(d) G` (left) or `G diag(d)` (right) for natural-order `d`. Exact.
    pub fn diag_mul(&self, d: &[C64], side: DiagSide) -> Result<Self, HMatrixError> {
        let mut out = self.clone();
        out.diag_mul_in_place(d, side)?;
        Ok(out)
    }

    pub fn diag_mul_in_place(&mut self, d: &[C64], side: DiagSide) -> Result<(), HMatrixError> {
        if d.len() != self.size() {
            return Err(HMatrixError::SizeMismatch { expected: self.size(), got: d.len() });
        }
        let dt = self.tree.to_tree_order(d);
        match side {
            DiagSide::Left => self.root.scale_rows(&self.tree, &dt),
            DiagSide::Right => self.root.scale_cols(&self.tree, &dt),
        }
        Ok(())
    }

    /// Dense natural-order matrix; refused above the dense guard.
    pub fn to_dense(&self) -> Result<CMat, HMatrixError> {
        let guard = dense_guard();
        if self.size() > guard {
            return Err(HMatrixError::DenseGuard { size: self.size(), guard });
        }
        let t = self.root.to_dense(&self.tree);
        let ip = self.tree.iperm();
        Ok(CMat::from_fn(self.size(), self.size(), |i, j| t[(ip[i], ip[j])]))
    }

    /// Largest rank over all factorized blocks.
    pub fn max_rank(&self) -> usize {
        self.root.max_rank()
    }

    /// Verify the block structure against the tree and the rank cap.
    pub fn check_structure(&self, max_rank: usize) -> Result<(), String> {
        self.root.check(&self.tree, max_rank)
    }

    /// Indented text listing of every block with level, node coordinates,
    /// ranges, kind and rank.
    pub fn dump_structure(&self) -> String {
        let mut s = String::new();
        self.root.dump(&self.tree, &mut s);
        s
    }

    pub fn write_to(&self, w: &mut dyn Write) -> Result<(), HMatrixError> {
        Ok(self.root.write_to(w)?)
    }

    pub fn read_from(tree: Arc<PartitionTree>, r: &mut dyn Read) -> Result<Self, HMatrixError> {
        let root = Block::read_from(&tree, 0, 0, r)?;
        Ok(Self { tree, root })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{identity, rel_diff};

    fn tree(n: usize, leaf: usize, dim: usize, adm: Admissibility) -> Arc<PartitionTree> {
        build_partition(n, leaf, dim, adm).unwrap()
    }

    #[test]
    fn identity_and_zero() {
        for t in [tree(64, 8, 1, Admissibility::Weak), tree(8, 4, 2, Admissibility::Strong)] {
            let id = HMatrix::identity(t.clone());
            assert_eq!(id.to_dense().unwrap(), identity(t.size()));
            assert_eq!(id.max_rank(), 0);
            let f: Vec<C64> = (0..t.size()).map(|k| C64::new(k as f64, 1.0)).collect();
            assert_eq!(id.matvec(&f).unwrap(), f);
            let z = HMatrix::zeros(t.clone());
            assert!(z.to_dense().unwrap().iter().all(|v| *v == C64::new(0.0, 0.0)));
            id.check_structure(0).unwrap();
        }
    }

    #[test]
    fn inverse_of_two_times_identity() {
        let t = tree(64, 8, 1, Admissibility::Weak);
        let two = HMatrix::from_diagonal(t.clone(), &vec![C64::new(2.0, 0.0); 64]).unwrap();
        let inv = two.inverse(&CompressionPolicy::default()).unwrap();
        let expect = identity(64) * C64::new(0.5, 0.0);
        assert!((inv.to_dense().unwrap() - expect).norm() < 1e-13);
    }

    #[test]
    fn singular_leaf_is_reported() {
        let t = tree(32, 8, 1, Admissibility::Weak);
        let z = HMatrix::zeros(t);
        assert!(matches!(z.inverse(&CompressionPolicy::default()), Err(HMatrixError::Singular { .. })));
    }

    #[test]
    fn tree_mismatch() {
        let a = HMatrix::zeros(tree(32, 8, 1, Admissibility::Weak));
        let b = HMatrix::zeros(tree(32, 4, 1, Admissibility::Weak));
        assert!(matches!(a.add(&b, &CompressionPolicy::default()), Err(HMatrixError::TreeMismatch)));
        assert!(a.matvec(&[C64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let t = tree(16, 4, 1, Admissibility::Weak);
        let m = CMat::from_fn(16, 16, |i, j| C64::new(1.0 / (1.0 + i.abs_diff(j) as f64), (i * j) as f64 * 1e-3));
        let h = HMatrix::compress_dense(&m, t.clone(), &CompressionPolicy::with_rank(3)).unwrap();
        let mut buf = Vec::new();
        h.write_to(&mut buf).unwrap();
        let back = HMatrix::read_from(t, &mut buf.as_slice()).unwrap();
        assert_eq!(back, h);
        let f: Vec<C64> = (0..16).map(|k| C64::new(1.0, k as f64)).collect();
        assert!(rel_diff(&back.matvec(&f).unwrap(), &h.matvec(&f).unwrap()) == 0.0);
        assert!(h.dump_structure().contains("lowrank rank"));
    }
}
