use super::config::SweepDirection;

/// Map between natural grid order (`x1` fastest) and the layer-by-layer
/// order used by a sweep.
///
/// In swept order the flat index is `face + n^(d-1) * m`, where `m` counts
/// layers in the direction of the sweep and `face` enumerates the remaining
/// axes in ascending order, lowest axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOrdering {
    pub dim: usize,
    pub n: usize,
    pub sweep: SweepDirection,
}

impl SweepOrdering {
    pub fn new(dim: usize, n: usize, sweep: SweepDirection) -> Self {
        debug_assert!(sweep.axis < dim);
        Self { dim, n, sweep }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unknowns per layer, `n^(d-1)`.
    pub fn face_len(&self) -> usize {
        self.n.pow(self.dim as u32 - 1)
    }

    /// Axes spanning a layer, ascending.
    pub fn face_axes(&self) -> Vec<usize> {
        (0..self.dim).filter(|&a| a != self.sweep.axis).collect()
    }

    /// Natural coordinate along the sweep axis of layer `m`.
    pub fn layer_coordinate(&self, m: usize) -> usize {
        if self.sweep.positive {
            m
        } else {
            self.n - 1 - m
        }
    }

    /// Natural multi-index of a swept `(layer, face)` pair.
    pub fn grid_index(&self, m: usize, face: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        idx[self.sweep.axis] = self.layer_coordinate(m);
        let mut rest = face;
        for a in self.face_axes() {
            idx[a] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    /// Swept `(layer, face)` pair of a natural multi-index.
    pub fn layer_and_face(&self, idx: [usize; 3]) -> (usize, usize) {
        let m = self.layer_coordinate(idx[self.sweep.axis]);
        let mut face = 0;
        let mut stride = 1;
        for a in self.face_axes() {
            face += idx[a] * stride;
            stride *= self.n;
        }
        (m, face)
    }

    pub fn natural_flat(&self, idx: [usize; 3]) -> usize {
        let mut flat = 0;
        let mut stride = 1;
        for &i in idx.iter().take(self.dim) {
            flat += i * stride;
            stride *= self.n;
        }
        flat
    }

    pub fn natural_multi(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for slot in idx.iter_mut().take(self.dim) {
            *slot = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    /// Swept flat index of natural flat index `k`.
    pub fn swept_of_natural(&self, k: usize) -> usize {
        let (m, face) = self.layer_and_face(self.natural_multi(k));
        face + self.face_len() * m
    }

    /// Natural flat index of swept flat index `k`.
    pub fn natural_of_swept(&self, k: usize) -> usize {
        let fl = self.face_len();
        self.natural_flat(self.grid_index(k / fl, k % fl))
    }

    /// `perm[k]` is the natural index of swept position `k`.
    pub fn permutation(&self) -> Vec<usize> {
        (0..self.len()).map(|k| self.natural_of_swept(k)).collect()
    }

    /// Reorder a natural-order field into swept order.
    pub fn to_swept<T: Copy>(&self, natural: &[T]) -> Vec<T> {
        assert_eq!(natural.len(), self.len());
        (0..self.len()).map(|k| natural[self.natural_of_swept(k)]).collect()
    }

    /// Reorder a swept-order field back into natural order.
    pub fn to_natural<T: Copy + Default>(&self, swept: &[T]) -> Vec<T> {
        assert_eq!(swept.len(), self.len());
        let mut out = vec![T::default(); self.len()];
        for (k, &v) in swept.iter().enumerate() {
            out[self.natural_of_swept(k)] = v;
        }
        out
    }
}
