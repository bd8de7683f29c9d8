use crate::dense::dense_guard;
use crate::{CMat, C64};

use super::config::{BoundaryKind, SimulationConfig, SweepDirection};
use super::fields::{ForcingField, VelocityField};
use super::ordering::SweepOrdering;
use super::pml::AxisStretch;
use super::{grid_coordinate, DiscretizationError};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Sparse symmetric block coupling the unknowns of one layer.
///
/// A layer is a line (`face_dim = 1`, tridiagonal) or an `n x n` face
/// (`face_dim = 2`, 5-point pattern). `east[f]` couples `f` with `f + 1` and
/// `north[f]` couples `f` with `f + n`; entries without such a neighbor are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBlock {
    pub n: usize,
    pub face_dim: usize,
    pub diag: Vec<C64>,
    pub east: Vec<C64>,
    pub north: Vec<C64>,
}

impl LayerBlock {
    pub fn zeros(n: usize, face_dim: usize) -> Self {
        let len = n.pow(face_dim as u32);
        Self {
            n,
            face_dim,
            diag: vec![ZERO; len],
            east: vec![ZERO; len],
            north: vec![ZERO; if face_dim == 2 { len } else { 0 }],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn has_east(&self, f: usize) -> bool {
        f % self.n + 1 < self.n
    }

    fn has_north(&self, f: usize) -> bool {
        self.face_dim == 2 && f / self.n + 1 < self.n
    }

    /// Off-diagonal neighbors `(g, value)` of row `f`, both directions.
    pub fn neighbors(&self, f: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let n = self.n;
        let west = (f % n > 0).then(|| (f - 1, self.east[f - 1]));
        let east = self.has_east(f).then(|| (f + 1, self.east[f]));
        let south = (self.face_dim == 2 && f / n > 0).then(|| (f - n, self.north[f - n]));
        let north = self.has_north(f).then(|| (f + n, self.north[f]));
        [west, east, south, north].into_iter().flatten()
    }

    /// All stored nonzeros `(row, col, value)` including both symmetric halves.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(5 * self.len());
        for f in 0..self.len() {
            out.push((f, f, self.diag[f]));
            for (g, v) in self.neighbors(f) {
                out.push((f, g, v));
            }
        }
        out
    }

    /// `y = B x`.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let n = self.n;
        for f in 0..self.len() {
            let mut acc = self.diag[f] * x[f];
            if f % n > 0 {
                acc += self.east[f - 1] * x[f - 1];
            }
            if self.has_east(f) {
                acc += self.east[f] * x[f + 1];
            }
            if self.face_dim == 2 {
                if f >= n {
                    acc += self.north[f - n] * x[f - n];
                }
                if self.has_north(f) {
                    acc += self.north[f] * x[f + n];
                }
            }
            y[f] += acc;
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.len(), self.len());
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    /// Build from arbitrary `(row, col, value)` triplets, checking that they fit
    /// the symmetric tridiagonal / 5-point pattern. Duplicates are summed.
    pub fn from_triplets(
        n: usize,
        face_dim: usize,
        triplets: &[(usize, usize, C64)],
    ) -> Result<Self, DiscretizationError> {
        let mut b = Self::zeros(n, face_dim);
        let len = b.len();
        let mut lower = Self::zeros(n, face_dim);
        for &(i, j, v) in triplets {
            if i >= len || j >= len {
                return Err(DiscretizationError::Pattern(format!("entry ({i}, {j}) outside a {len}x{len} block")));
            }
            let (lo, hi) = (i.min(j), i.max(j));
            let slot = if i == j {
                &mut b.diag[i]
            } else if hi == lo + 1 && b.has_east(lo) {
                if i < j {
                    &mut b.east[lo]
                } else {
                    &mut lower.east[lo]
                }
            } else if face_dim == 2 && hi == lo + n {
                if i < j {
                    &mut b.north[lo]
                } else {
                    &mut lower.north[lo]
                }
            } else {
                return Err(DiscretizationError::Pattern(format!("entry ({i}, {j}) is not a stencil neighbor")));
            };
            *slot += v;
        }
        let asym = |a: &[C64], b: &[C64]| a.iter().zip(b).any(|(x, y)| (x - y).norm() > 1e-14 * x.norm().max(y.norm()));
        if asym(&b.east, &lower.east) || asym(&b.north, &lower.north) {
            return Err(DiscretizationError::Pattern("layer block is not symmetric".into()));
        }
        Ok(b)
    }
}

/// Discrete Helmholtz operator in swept order: `n` layer blocks on the
/// diagonal and `n - 1` diagonal couplings `couplings[m] = diag(A_{m+1,m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonalOperator {
    pub ordering: SweepOrdering,
    pub layers: Vec<LayerBlock>,
    pub couplings: Vec<Vec<C64>>,
}

impl BlockTridiagonalOperator {
    pub fn dim(&self) -> usize {
        self.ordering.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn face_len(&self) -> usize {
        self.ordering.face_len()
    }

    /// `A u` in swept order.
    pub fn apply(&self, u: &[C64]) -> Result<Vec<C64>, DiscretizationError> {
        if u.len() != self.dim() {
            return Err(DiscretizationError::SizeMismatch { expected: self.dim(), got: u.len() });
        }
        let fl = self.face_len();
        let mut y = vec![ZERO; u.len()];
        for (m, block) in self.layers.iter().enumerate() {
            let ym = &mut y[m * fl..(m + 1) * fl];
            block.apply_into(&u[m * fl..(m + 1) * fl], ym);
            if m > 0 {
                for (f, d) in self.couplings[m - 1].iter().enumerate() {
                    ym[f] += d * u[(m - 1) * fl + f];
                }
            }
            if m + 1 < self.layers.len() {
                for (f, d) in self.couplings[m].iter().enumerate() {
                    ym[f] += d * u[(m + 1) * fl + f];
                }
            }
        }
        Ok(y)
    }

    /// Nonzeros `(row, col, value)` in swept order.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let fl = self.face_len();
        let mut out = Vec::new();
        for (m, block) in self.layers.iter().enumerate() {
            for (i, j, v) in block.entries() {
                out.push((m * fl + i, m * fl + j, v));
            }
        }
        for (m, c) in self.couplings.iter().enumerate() {
            for (f, &v) in c.iter().enumerate() {
                out.push(((m + 1) * fl + f, m * fl + f, v));
                out.push((m * fl + f, (m + 1) * fl + f, v));
            }
        }
        out
    }

    /// Nonzeros in natural grid order.
    pub fn natural_entries(&self) -> Vec<(usize, usize, C64)> {
        self.entries()
            .into_iter()
            .map(|(i, j, v)| (self.ordering.natural_of_swept(i), self.ordering.natural_of_swept(j), v))
            .collect()
    }

    /// Rebuild from natural-order nonzeros under `ordering`, rejecting entries
    /// that are not stencil neighbors in that ordering.
    pub fn from_natural_entries(
        ordering: SweepOrdering,
        entries: &[(usize, usize, C64)],
    ) -> Result<Self, DiscretizationError> {
        let (n, fl) = (ordering.n, ordering.face_len());
        let mut per_layer: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); n];
        let mut couplings = vec![vec![ZERO; fl]; n.saturating_sub(1)];
        let mut upper = couplings.clone();
        for &(i, j, v) in entries {
            if i >= ordering.len() || j >= ordering.len() {
                return Err(DiscretizationError::Pattern(format!("entry ({i}, {j}) outside the grid")));
            }
            let (si, sj) = (ordering.swept_of_natural(i), ordering.swept_of_natural(j));
            let (mi, fi, mj, fj) = (si / fl, si % fl, sj / fl, sj % fl);
            if mi == mj {
                per_layer[mi].push((fi, fj, v));
            } else if fi == fj && mi == mj + 1 {
                couplings[mj][fi] += v;
            } else if fi == fj && mj == mi + 1 {
                upper[mi][fi] += v;
            } else {
                return Err(DiscretizationError::Pattern(format!("entry ({i}, {j}) couples non-adjacent layers")));
            }
        }
        for (lo, up) in couplings.iter().zip(&upper) {
            if lo.iter().zip(up).any(|(a, b)| (a - b).norm() > 1e-14 * a.norm().max(b.norm())) {
                return Err(DiscretizationError::Pattern("layer couplings are not symmetric".into()));
            }
        }
        let layers = per_layer
            .iter()
            .map(|t| LayerBlock::from_triplets(n, ordering.dim - 1, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { ordering, layers, couplings })
    }

    /// The same operator with layers ordered for a different sweep.
    pub fn reordered(&self, sweep: SweepDirection) -> Result<Self, DiscretizationError> {
        let ordering = SweepOrdering::new(self.ordering.dim, self.ordering.n, sweep);
        Self::from_natural_entries(ordering, &self.natural_entries())
    }

    /// Dense matrix in swept order; refused above the dense guard.
    pub fn to_dense(&self) -> Result<CMat, DiscretizationError> {
        let guard = dense_guard();
        if self.dim() > guard {
            return Err(DiscretizationError::Assembly(format!(
                "operator of size {} exceeds the dense guard {guard}",
                self.dim()
            )));
        }
        let mut m = CMat::zeros(self.dim(), self.dim());
        for (i, j, v) in self.entries() {
            m[(i, j)] += v;
        }
        Ok(m)
    }
}

struct Stencil {
    stretches: Vec<AxisStretch>,
    omega: f64,
    h: f64,
    dim: usize,
}

impl Stencil {
    fn new(config: &SimulationConfig) -> Self {
        Self {
            stretches: (0..config.dim).map(|a| config.axis_stretch(a)).collect(),
            omega: config.omega,
            h: config.h(),
            dim: config.dim,
        }
    }

    fn coords(&self, idx: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = grid_coordinate(idx[a], self.h);
        }
        x
    }

    /// Coefficient of the edge leaving `x` along `axis` in direction `sign`:
    /// `s_a(x_a +- h/2) / prod_{b != a} s_b(x_b) / h^2`.
    fn edge(&self, x: [f64; 3], axis: usize, sign: f64) -> C64 {
        let mut den = C64::new(1.0, 0.0);
        for b in (0..self.dim).filter(|&b| b != axis) {
            den *= self.stretches[b].stretch(x[b]);
        }
        self.stretches[axis].stretch(x[axis] + sign * 0.5 * self.h) / den / (self.h * self.h)
    }

    fn diagonal(&self, x: [f64; 3], c: f64) -> C64 {
        let mut prod = C64::new(1.0, 0.0);
        let mut sum = ZERO;
        for a in 0..self.dim {
            prod *= self.stretches[a].stretch(x[a]);
            sum += self.edge(x, a, -1.0) + self.edge(x, a, 1.0);
        }
        self.omega * self.omega / (prod * c * c) - sum
    }
}

/// Assemble the operator for `config` with layers ordered along `config.sweep`.
///
/// Out-of-range neighbors are dropped (homogeneous Dirichlet data); nonzero
/// Dirichlet data enter through [`dirichlet_data_to_forcing`].
pub fn assemble(
    config: &SimulationConfig,
    velocity: &VelocityField,
) -> Result<BlockTridiagonalOperator, DiscretizationError> {
    config.validate()?;
    if velocity.dim != config.dim || velocity.n != config.n {
        return Err(DiscretizationError::Assembly(format!(
            "velocity grid dim={} n={} does not match configuration dim={} n={}",
            velocity.dim, velocity.n, config.dim, config.n
        )));
    }
    if let Some(k) = velocity.samples.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(DiscretizationError::Assembly(format!(
            "velocity sample {k} = {} is not strictly positive",
            velocity.samples[k]
        )));
    }
    let ordering = SweepOrdering::new(config.dim, config.n, config.sweep);
    let stencil = Stencil::new(config);
    let (n, fl) = (config.n, ordering.face_len());
    let face_axes = ordering.face_axes();
    let sweep_axis = config.sweep.axis;
    let step = if config.sweep.positive { 1.0 } else { -1.0 };

    let mut layers = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n.saturating_sub(1));
    for m in 0..n {
        let mut block = LayerBlock::zeros(n, config.dim - 1);
        let mut coupling = vec![ZERO; fl];
        for f in 0..fl {
            let idx = ordering.grid_index(m, f);
            let x = stencil.coords(idx);
            let c = velocity.samples[ordering.natural_flat(idx)];
            block.diag[f] = stencil.diagonal(x, c);
            if block.has_east(f) {
                block.east[f] = stencil.edge(x, face_axes[0], 1.0);
            }
            if block.has_north(f) {
                block.north[f] = stencil.edge(x, face_axes[1], 1.0);
            }
            if m + 1 < n {
                coupling[f] = stencil.edge(x, sweep_axis, step);
            }
        }
        layers.push(block);
        if m + 1 < n {
            couplings.push(coupling);
        }
    }
    Ok(BlockTridiagonalOperator { ordering, layers, couplings })
}

/// Forcing contribution (natural order) that imposes the configured
/// data-Dirichlet traces: `-coef * b` at every point next to a data side.
pub fn dirichlet_data_to_forcing(config: &SimulationConfig) -> Result<ForcingField, DiscretizationError> {
    config.validate()?;
    let mut out = ForcingField::zeros(config.dim, config.n);
    let stencil = Stencil::new(config);
    let ordering = SweepOrdering::new(config.dim, config.n, config.sweep);
    for (axis, side, trace) in config.boundary.data_sides(config.dim) {
        if (axis, side) != config.sweep.terminal_side() {
            return Err(DiscretizationError::Config(format!(
                "data-Dirichlet side on axis x{} is not the terminal side of the sweep",
                axis + 1
            )));
        }
        let (coord, sign) = match side {
            super::config::Side::Low => (0, -1.0),
            super::config::Side::High => (config.n - 1, 1.0),
        };
        for flat in 0..config.num_unknowns() {
            let idx = ordering.natural_multi(flat);
            if idx[axis] != coord {
                continue;
            }
            let x = stencil.coords(idx);
            let tangential: Vec<f64> = (0..config.dim).filter(|&a| a != axis).map(|a| x[a]).collect();
            let b = trace.eval(&tangential, config.omega);
            out.samples[flat] -= stencil.edge(x, axis, sign) * b;
        }
    }
    debug_assert!(config
        .boundary
        .data_sides(config.dim)
        .iter()
        .all(|(a, s, _)| matches!(config.boundary.get(*a, *s), BoundaryKind::DataDirichlet(_))));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::config::{BoundarySpec, DirichletTrace, Side};
    use crate::discretization::fields::{build_velocity, VelocityModel};

    fn cfg(dim: usize, n: usize) -> SimulationConfig {
        SimulationConfig::from_grid(dim, n, 2.0 * std::f64::consts::PI * 3.0, 0.25).unwrap()
    }

    fn unit(config: &SimulationConfig) -> VelocityField {
        build_velocity(&VelocityModel::Constant { value: 1.0 }, config).unwrap()
    }

    #[test]
    fn interior_row_without_pml() {
        for dim in [2, 3] {
            let c = cfg(dim, 9).with_boundary(BoundarySpec::all_zero_dirichlet()).unwrap();
            let a = assemble(&c, &unit(&c)).unwrap();
            let h2 = c.h() * c.h();
            let centre = a.face_len() / 2;
            let b = &a.layers[4];
            assert!((b.diag[centre] - C64::new(c.omega * c.omega - 2.0 * dim as f64 / h2, 0.0)).norm() < 1e-9);
            for (_, v) in b.neighbors(centre) {
                assert!((v - C64::new(1.0 / h2, 0.0)).norm() < 1e-9);
            }
            assert!((a.couplings[3][centre] - C64::new(1.0 / h2, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn operator_is_complex_symmetric() {
        for dim in [2, 3] {
            let c = cfg(dim, 6);
            let v = build_velocity(&VelocityModel::lens(), &c).unwrap();
            let a = assemble(&c, &v).unwrap().to_dense().unwrap();
            assert!((&a - a.transpose()).norm() < 1e-12 * a.norm());
            assert!((&a - a.adjoint()).norm() > 1e-6 * a.norm());
        }
    }

    #[test]
    fn apply_matches_dense() {
        let c = cfg(3, 5);
        let v = build_velocity(&VelocityModel::lens(), &c).unwrap();
        let a = assemble(&c, &v).unwrap();
        let u: Vec<C64> = (0..a.dim()).map(|k| C64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let y = a.apply(&u).unwrap();
        let yd = crate::dense::matvec(&a.to_dense().unwrap(), &u);
        assert!(crate::dense::rel_diff(&y, &yd) < 1e-14);
        assert!(a.apply(&u[1..]).is_err());
    }

    #[test]
    fn reordering_matches_direct_assembly() {
        for dim in [2, 3] {
            let c = cfg(dim, 5);
            let v = build_velocity(&VelocityModel::random(3), &c).unwrap();
            let a = assemble(&c, &v).unwrap();
            for axis in 0..dim {
                for positive in [true, false] {
                    let s = SweepDirection { axis, positive };
                    let direct = assemble(&c.clone().with_sweep(s).unwrap(), &v).unwrap();
                    let re = a.reordered(s).unwrap();
                    let d1 = direct.to_dense().unwrap();
                    let d2 = re.to_dense().unwrap();
                    assert!((d1 - d2).norm() < 1e-12);
                    let back = re.reordered(c.sweep).unwrap();
                    assert!((back.to_dense().unwrap() - a.to_dense().unwrap()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pattern_violation_detected() {
        let bad = [(0usize, 2usize, C64::new(1.0, 0.0)), (2, 0, C64::new(1.0, 0.0))];
        assert!(LayerBlock::from_triplets(4, 1, &bad).is_err());
        // Wrap-around between rows of a face is not a neighbor.
        let wrap = [(3usize, 4usize, C64::new(1.0, 0.0)), (4, 3, C64::new(1.0, 0.0))];
        assert!(LayerBlock::from_triplets(4, 2, &wrap).is_err());
        let asym = [(0usize, 1usize, C64::new(1.0, 0.0)), (1, 0, C64::new(2.0, 0.0))];
        assert!(LayerBlock::from_triplets(4, 1, &asym).is_err());
    }

    #[test]
    fn unit_dirichlet_data_forcing() {
        let data = BoundaryKind::DataDirichlet(DirichletTrace::Constant(C64::new(1.0, 0.0)));
        let bc = BoundarySpec::all_zero_dirichlet().with(1, Side::High, data);
        let c = cfg(2, 8).with_boundary(bc).unwrap();
        let f = dirichlet_data_to_forcing(&c).unwrap();
        let h2 = c.h() * c.h();
        for j in 0..8 {
            for i in 0..8 {
                let expect = if j == 7 { -1.0 / h2 } else { 0.0 };
                assert!((f.samples[i + 8 * j] - C64::new(expect, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn nonpositive_velocity_rejected() {
        let c = cfg(2, 4);
        let mut v = unit(&c);
        v.samples[5] = 0.0;
        assert!(matches!(assemble(&c, &v), Err(DiscretizationError::Assembly(_))));
    }
}
