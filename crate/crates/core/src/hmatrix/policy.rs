use super::HMatrixError;

/// Truncation and sampling parameters for low-rank blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionPolicy {
    /// Hard cap on the rank of every factorized block.
    pub max_rank: usize,
    /// Singular values at or below `eps * sigma_max` of a block are dropped.
    pub eps: f64,
    /// Extra Gaussian test vectors beyond `max_rank` in randomized sampling.
    pub oversampling: usize,
    /// Power iterations in randomized sampling.
    pub power_iters: usize,
    /// Seed for randomized sampling.
    pub seed: u64,
}

impl Default for CompressionPolicy {
    fn default() -> Self {
        Self { max_rank: 2, eps: 1e-6, oversampling: 5, power_iters: 1, seed: 0 }
    }
}

impl CompressionPolicy {
    pub fn with_rank(max_rank: usize) -> Self {
        Self { max_rank, ..Self::default() }
    }

    /// A policy that only drops singular values at round-off level.
    pub fn lossless() -> Self {
        Self { max_rank: usize::MAX, eps: 1e-12, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), HMatrixError> {
        if self.max_rank < 1 {
            return Err(HMatrixError::Policy("max rank must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(HMatrixError::Policy(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        Ok(())
    }

    /// Number of singular values (descending) to keep.
    pub fn retained_rank(&self, sigma: &[f64]) -> usize {
        let smax = sigma.first().copied().unwrap_or(0.0);
        if smax <= 0.0 || !smax.is_finite() {
            return 0;
        }
        sigma.iter().take_while(|&&s| s > self.eps * smax).count().min(self.max_rank)
    }
}
