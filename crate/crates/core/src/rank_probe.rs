//! Numerical ranks of off-diagonal blocks of the dense Schur complement
//! inverses `T_m`.
//!
//! A block's rank is the number of its singular values above
//! `tau * sigma_max(T_m)`, i.e. the threshold is relative to the largest
//! singular value of the whole matrix, not of the block.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::dense::{singular_values, spectral_norm};
use crate::discretization::{
    assemble, build_velocity, BlockTridiagonalOperator, DiscretizationError, SimulationConfig, VelocityModel,
};
use crate::hmatrix::{build_partition, Admissibility, HMatrixError, PartitionTree, DEFAULT_LEAF_1D, DEFAULT_LEAF_2D};
use crate::sweeping::{factor_exact, SweepError};
use crate::CMat;

#[derive(Debug, Error)]
pub enum RankProbeError {
    #[error("layer index {m} outside 1..={layers}")]
    Layer { m: usize, layers: usize },
    #[error("matrix of size {matrix} does not match a tree of size {tree}")]
    TreeMismatch { matrix: usize, tree: usize },
    #[error("threshold tau = {0} must lie in (0, 1)")]
    Threshold(f64),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    HMatrix(#[from] HMatrixError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rank of one off-diagonal block `(J_i, J_i')` at a tree level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockRank {
    pub level: usize,
    /// 1-based position of the row node within its level (row-major on faces).
    pub i: usize,
    pub i_prime: usize,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
}

/// Ranks of every off-diagonal block of a weak partition, with metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    pub blocks: Vec<BlockRank>,
    pub tau: f64,
    pub omega: f64,
    pub n: usize,
    /// 1-based layer index of the probed `T_m`.
    pub m: usize,
    pub bc: String,
}

impl RankProfile {
    pub fn max_rank(&self) -> usize {
        self.blocks.iter().map(|b| b.rank).max().unwrap_or(0)
    }

    pub fn max_rank_at_level(&self, level: usize) -> usize {
        self.blocks.iter().filter(|b| b.level == level).map(|b| b.rank).max().unwrap_or(0)
    }

    pub fn levels(&self) -> usize {
        self.blocks.iter().map(|b| b.level).max().unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,i,i_prime,rows,cols,rank,tau,omega,n,m,bc\n");
        for b in &self.blocks {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:e},{},{},{},{}",
                b.level, b.i, b.i_prime, b.rows, b.cols, b.rank, self.tau, self.omega, self.n, self.m, self.bc
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), RankProbeError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// The dense `T_m = S_m^{-1}` of every layer.
pub fn schur_dense_sequence(a: &BlockTridiagonalOperator) -> Result<Vec<CMat>, RankProbeError> {
    Ok(factor_exact(a)?.t)
}

/// Dense `T_m` for a single 1-based layer index, eliminating only layers `1..=m`.
pub fn schur_dense_layer(a: &BlockTridiagonalOperator, m: usize) -> Result<CMat, RankProbeError> {
    if m == 0 || m > a.num_layers() {
        return Err(RankProbeError::Layer { m, layers: a.num_layers() });
    }
    let mut t = crate::sweeping::factor_exact_upto(a, m)?.t;
    Ok(t.pop().expect("at least one layer was factored"))
}

/// Weakly admissible partition used for probing faces of a `dim`-dimensional grid.
pub fn probe_tree(dim: usize, n: usize) -> Result<std::sync::Arc<PartitionTree>, RankProbeError> {
    let (leaf, index_dim) = if dim == 2 { (DEFAULT_LEAF_1D, 1) } else { (DEFAULT_LEAF_2D, 2) };
    Ok(build_partition(n, leaf, index_dim, Admissibility::Weak)?)
}

/// Numerical ranks of the blocks in the interaction lists of every level of `tree`.
pub fn offdiag_ranks(t: &CMat, tree: &PartitionTree, tau: f64) -> Result<Vec<BlockRank>, RankProbeError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(RankProbeError::Threshold(tau));
    }
    if t.nrows() != tree.size() || t.ncols() != tree.size() {
        return Err(RankProbeError::TreeMismatch { matrix: t.nrows(), tree: tree.size() });
    }
    let threshold = tau * spectral_norm(t);
    let perm = tree.perm();
    let side = |level: usize| 1usize << level;
    let position = |id: usize| {
        let node = &tree.nodes[id];
        if tree.index_dim == 1 {
            node.coord[0] + 1
        } else {
            node.coord[0] * side(node.level) + node.coord[1] + 1
        }
    };
    let mut out = Vec::new();
    for level in 1..tree.levels.len() {
        for &row in &tree.levels[level] {
            for col in tree.interaction_list(row) {
                let (r, c) = (&tree.nodes[row], &tree.nodes[col]);
                let block = CMat::from_fn(r.len(), c.len(), |a, b| t[(perm[r.start + a], perm[c.start + b])]);
                let rank = if threshold > 0.0 {
                    singular_values(&block).iter().filter(|&&s| s > threshold).count()
                } else {
                    0
                };
                out.push(BlockRank {
                    level,
                    i: position(row),
                    i_prime: position(col),
                    rows: r.len(),
                    cols: c.len(),
                    rank,
                });
            }
        }
    }
    out.sort_by_key(|b| (b.level, b.i, b.i_prime));
    Ok(out)
}

/// Assemble `config` with `velocity`, form the dense `T_m` and probe it.
pub fn probe(
    config: &SimulationConfig,
    velocity: &VelocityModel,
    m: usize,
    tau: f64,
) -> Result<RankProfile, RankProbeError> {
    let field = build_velocity(velocity, config)?;
    let a = assemble(config, &field)?;
    let t = schur_dense_layer(&a, m)?;
    let tree = probe_tree(config.dim, config.n)?;
    let blocks = offdiag_ranks(&t, &tree, tau)?;
    Ok(RankProfile { blocks, tau, omega: config.omega, n: config.n, m, bc: boundary_label(config) })
}

/// `pml`, `dirichlet`, or the per-side description with `;` separators (CSV-safe).
pub fn boundary_label(config: &SimulationConfig) -> String {
    use crate::discretization::{BoundaryKind, BoundarySpec};
    if config.boundary.is_all_pml(config.dim) {
        "pml".into()
    } else if config.boundary == BoundarySpec::uniform(BoundaryKind::ZeroDirichlet) {
        "dirichlet".into()
    } else {
        config.boundary.describe(config.dim).replace(',', ";")
    }
}

/// Least-squares slope of `max_rank` against `log2(omega)`.
pub fn log_growth_slope(samples: &[(f64, usize)]) -> f64 {
    let k = samples.len() as f64;
    if samples.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = samples.iter().map(|(w, _)| w.log2()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, r)| r as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn zero_and_identity_have_no_offdiagonal_rank() {
        let tree = build_partition(32, 4, 1, Admissibility::Weak).unwrap();
        let zero = CMat::zeros(32, 32);
        assert!(offdiag_ranks(&zero, &tree, 1e-6).unwrap().iter().all(|b| b.rank == 0));
        let id = CMat::identity(32, 32);
        let ranks = offdiag_ranks(&id, &tree, 1e-6).unwrap();
        assert!(ranks.iter().all(|b| b.rank == 0));
        // Two blocks per sibling pair on levels 1..3.
        assert_eq!(ranks.len(), 2 + 4 + 8);
    }

    #[test]
    fn rank_one_block_detected() {
        let tree = build_partition(16, 4, 1, Admissibility::Weak).unwrap();
        let t = CMat::from_fn(16, 16, |i, j| C64::new(((i + 1) * (j + 2)) as f64, 0.0));
        let ranks = offdiag_ranks(&t, &tree, 1e-10).unwrap();
        assert!(ranks.iter().all(|b| b.rank == 1));
    }

    #[test]
    fn slope_of_exact_log_law() {
        let s = [(8.0, 3), (16.0, 5), (32.0, 7)];
        assert!((log_growth_slope(&s) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        let tree = build_partition(16, 4, 1, Admissibility::Weak).unwrap();
        assert!(matches!(offdiag_ranks(&CMat::zeros(8, 8), &tree, 1e-6), Err(RankProbeError::TreeMismatch { .. })));
        assert!(matches!(offdiag_ranks(&CMat::zeros(16, 16), &tree, 0.0), Err(RankProbeError::Threshold(_))));
    }
}
