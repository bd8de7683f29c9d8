use std::sync::Arc;

use crate::discretization::{BlockTridiagonalOperator, SweepOrdering};
use crate::hmatrix::{
    build_partition, Admissibility, CompressionPolicy, DiagSide, HMatrix, PartitionTree, DEFAULT_LEAF_1D,
    DEFAULT_LEAF_2D,
};
use crate::C64;

use super::{sweep_solve, SweepError};

/// Sweeping factorization with every `T_m` held as an H-matrix; applying it
/// is the sweeping preconditioner.
#[derive(Debug, Clone)]
pub struct SweepingFactorization {
    pub ordering: SweepOrdering,
    pub tree: Arc<PartitionTree>,
    pub policy: CompressionPolicy,
    pub t: Vec<HMatrix>,
    pub couplings: Vec<Vec<C64>>,
}

/// Partition used for layer faces: strongly admissible binary tree for
/// lines, strongly admissible quadtree for 2D faces.
pub fn default_face_tree(dim: usize, n: usize) -> Result<Arc<PartitionTree>, SweepError> {
    let tree = if dim == 2 {
        build_partition(n, DEFAULT_LEAF_1D, 1, Admissibility::Strong)?
    } else {
        build_partition(n, DEFAULT_LEAF_2D, 2, Admissibility::Strong)?
    };
    Ok(tree)
}

fn layer_seed(seed: u64, m: usize) -> u64 {
    seed ^ (m as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Approximate elimination: `S_m = A_{m,m} - D_m T_{m-1} D_m` with the
/// diagonal couplings `D_m` applied exactly, subtraction and inversion in
/// H-arithmetic under `policy`.
pub fn factor_hmatrix(
    a: &BlockTridiagonalOperator,
    tree: Arc<PartitionTree>,
    policy: &CompressionPolicy,
) -> Result<SweepingFactorization, SweepError> {
    policy.validate()?;
    let mut t: Vec<HMatrix> = Vec::with_capacity(a.num_layers());
    for (m, layer) in a.layers.iter().enumerate() {
        let local = CompressionPolicy { seed: layer_seed(policy.seed, m), ..*policy };
        let mut s = HMatrix::from_sparse_layer(layer, tree.clone())?;
        if m > 0 {
            let d = &a.couplings[m - 1];
            let mut update = t[m - 1].diag_mul(d, DiagSide::Right)?;
            update.diag_mul_in_place(d, DiagSide::Left)?;
            s = s.sub(&update, &local)?;
        }
        let inv = s.inverse(&local).map_err(|source| SweepError::LayerInverse { layer: m + 1, source })?;
        log::trace!("layer {} factored, max rank {}", m + 1, inv.max_rank());
        t.push(inv);
    }
    Ok(SweepingFactorization { ordering: a.ordering, tree, policy: *policy, t, couplings: a.couplings.clone() })
}

impl SweepingFactorization {
    pub fn num_layers(&self) -> usize {
        self.t.len()
    }

    pub fn face_len(&self) -> usize {
        self.tree.size()
    }

    pub fn dim(&self) -> usize {
        self.num_layers() * self.face_len()
    }

    /// `M f`, the approximate `A^{-1} f` (swept order).
    pub fn apply_preconditioner(&self, f: &[C64]) -> Result<Vec<C64>, SweepError> {
        self.apply_with(f, true)
    }

    /// [`apply_preconditioner`](Self::apply_preconditioner) without reusing
    /// `T_m u_m` between the forward and diagonal passes.
    pub fn apply_preconditioner_uncached(&self, f: &[C64]) -> Result<Vec<C64>, SweepError> {
        self.apply_with(f, false)
    }

    fn apply_with(&self, f: &[C64], cached: bool) -> Result<Vec<C64>, SweepError> {
        sweep_solve(&self.couplings, self.face_len(), f, cached, &|m, x| {
            self.t[m].matvec(x).expect("layer vector matches the face tree")
        })
    }

    /// Largest rank over all layers.
    pub fn max_rank(&self) -> usize {
        self.t.iter().map(HMatrix::max_rank).max().unwrap_or(0)
    }
}
