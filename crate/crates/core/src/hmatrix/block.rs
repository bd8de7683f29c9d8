//! Recursive block storage and the algebra on it. Everything here works in
//! tree order with block-local row/column offsets.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::mem;

use nalgebra::{DMatrixView, DMatrixViewMut};
use rand_chacha::ChaCha8Rng;

use crate::dense::{lu_inverse, norm_1};
use crate::{CMat, C64};

use super::lowrank::{compress_factors, randomized_lowrank_with, truncate_dense, LowRankBlock};
use super::policy::CompressionPolicy;
use super::tree::PartitionTree;
use super::HMatrixError;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Kind {
    Dense(CMat),
    LowRank(LowRankBlock),
    /// Child blocks in row-major order over the children of the row and column nodes.
    Hier(Vec<Block>),
}

/// Block of an H-matrix spanning the index sets of two same-level tree nodes.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub row: usize,
    pub col: usize,
    pub kind: Kind,
}

/// How a node pair is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Admissible,
    Leaf,
}

/// Shared state of one algebra operation.
pub(crate) struct Ctx<'a> {
    pub tree: &'a PartitionTree,
    pub policy: &'a CompressionPolicy,
    pub rng: ChaCha8Rng,
}

impl Block {
    /// Build the block structure of `(row, col)`, filling admissible and leaf
    /// slots with `make`.
    pub fn build(
        tree: &PartitionTree,
        row: usize,
        col: usize,
        make: &mut dyn FnMut(usize, usize, Slot) -> Kind,
    ) -> Block {
        let kind = if tree.admissible(row, col) {
            make(row, col, Slot::Admissible)
        } else if tree.nodes[row].is_leaf() {
            make(row, col, Slot::Leaf)
        } else {
            let (rk, ck) = (&tree.nodes[row].children, &tree.nodes[col].children);
            let mut kids = Vec::with_capacity(rk.len() * ck.len());
            for &r in rk {
                for &c in ck {
                    kids.push(Block::build(tree, r, c, make));
                }
            }
            Kind::Hier(kids)
        };
        Block { row, col, kind }
    }

    pub fn zeros(tree: &PartitionTree, row: usize, col: usize) -> Block {
        Block::build(tree, row, col, &mut |r, c, slot| {
            let (m, n) = (tree.nodes[r].len(), tree.nodes[c].len());
            match slot {
                Slot::Admissible => Kind::LowRank(LowRankBlock::zeros(m, n)),
                Slot::Leaf => Kind::Dense(CMat::zeros(m, n)),
            }
        })
    }

    fn placeholder(&self) -> Block {
        Block { row: self.row, col: self.col, kind: Kind::Dense(CMat::zeros(0, 0)) }
    }

    pub fn rows(&self, tree: &PartitionTree) -> usize {
        tree.nodes[self.row].len()
    }

    pub fn cols(&self, tree: &PartitionTree) -> usize {
        tree.nodes[self.col].len()
    }

    /// `y += alpha B x`, or `y += alpha B^t x` when `transpose`.
    pub fn apply_acc(
        &self,
        tree: &PartitionTree,
        x: DMatrixView<C64>,
        mut y: DMatrixViewMut<C64>,
        alpha: C64,
        transpose: bool,
    ) {
        match &self.kind {
            Kind::Dense(d) => {
                if transpose {
                    y.gemm_tr(alpha, d, &x, ONE);
                } else {
                    y.gemm(alpha, d, &x, ONE);
                }
            }
            Kind::LowRank(lr) => {
                if lr.rank() == 0 {
                    return;
                }
                let (inner, outer) = if transpose { (&lr.u, &lr.v) } else { (&lr.v, &lr.u) };
                let tmp = inner.tr_mul(&x);
                y.gemm(alpha, outer, &tmp, ONE);
            }
            Kind::Hier(kids) => {
                let (r0, c0) = (tree.nodes[self.row].start, tree.nodes[self.col].start);
                for kid in kids {
                    let (rn, cn) = (&tree.nodes[kid.row], &tree.nodes[kid.col]);
                    let (ro, co) = (rn.start - r0, cn.start - c0);
                    if transpose {
                        kid.apply_acc(tree, x.rows(ro, rn.len()), y.rows_mut(co, cn.len()), alpha, true);
                    } else {
                        kid.apply_acc(tree, x.rows(co, cn.len()), y.rows_mut(ro, rn.len()), alpha, false);
                    }
                }
            }
        }
    }

    pub fn apply(&self, tree: &PartitionTree, x: DMatrixView<C64>, transpose: bool) -> CMat {
        let out_rows = if transpose { self.cols(tree) } else { self.rows(tree) };
        let mut y = CMat::zeros(out_rows, x.ncols());
        self.apply_acc(tree, x, y.as_view_mut(), ONE, transpose);
        y
    }

    pub fn to_dense(&self, tree: &PartitionTree) -> CMat {
        let mut m = CMat::zeros(self.rows(tree), self.cols(tree));
        self.fill(tree, m.as_view_mut());
        m
    }

    fn fill(&self, tree: &PartitionTree, mut out: DMatrixViewMut<C64>) {
        match &self.kind {
            Kind::Dense(d) => out.copy_from(d),
            Kind::LowRank(lr) => {
                if lr.rank() == 0 {
                    out.fill(C64::new(0.0, 0.0));
                } else {
                    out.gemm(ONE, &lr.u, &lr.v.transpose(), C64::new(0.0, 0.0));
                }
            }
            Kind::Hier(kids) => {
                let (r0, c0) = (tree.nodes[self.row].start, tree.nodes[self.col].start);
                for kid in kids {
                    let (rn, cn) = (&tree.nodes[kid.row], &tree.nodes[kid.col]);
                    kid.fill(tree, out.view_mut((rn.start - r0, cn.start - c0), (rn.len(), cn.len())));
                }
            }
        }
    }

    /// Multiply row `i` by `d[i]` (block-local indices).
    pub fn scale_rows(&mut self, tree: &PartitionTree, d: &[C64]) {
        match &mut self.kind {
            Kind::Dense(m) => {
                for (i, mut row) in m.row_iter_mut().enumerate() {
                    row *= d[i];
                }
            }
            Kind::LowRank(lr) => {
                for (i, mut row) in lr.u.row_iter_mut().enumerate() {
                    row *= d[i];
                }
            }
            Kind::Hier(kids) => {
                let r0 = tree.nodes[self.row].start;
                for kid in kids {
                    let rn = &tree.nodes[kid.row];
                    kid.scale_rows(tree, &d[rn.start - r0..rn.end - r0]);
                }
            }
        }
    }

    /// Multiply column `j` by `d[j]` (block-local indices).
    pub fn scale_cols(&mut self, tree: &PartitionTree, d: &[C64]) {
        match &mut self.kind {
            Kind::Dense(m) => {
                for (j, mut col) in m.column_iter_mut().enumerate() {
                    col *= d[j];
                }
            }
            Kind::LowRank(lr) => {
                for (j, mut row) in lr.v.row_iter_mut().enumerate() {
                    row *= d[j];
                }
            }
            Kind::Hier(kids) => {
                let c0 = tree.nodes[self.col].start;
                for kid in kids {
                    let cn = &tree.nodes[kid.col];
                    kid.scale_cols(tree, &d[cn.start - c0..cn.end - c0]);
                }
            }
        }
    }

    /// `self += alpha other` for blocks of identical structure.
    pub fn add_block(&mut self, other: &Block, alpha: C64, ctx: &mut Ctx) {
        match (&mut self.kind, &other.kind) {
            (Kind::Dense(a), Kind::Dense(b)) => {
                a.zip_apply(b, |x, y| *x += alpha * y);
            }
            (Kind::LowRank(_), Kind::LowRank(b)) => {
                self.add_lowrank(b.u.as_view(), b.v.as_view(), alpha, ctx);
            }
            (Kind::Hier(a), Kind::Hier(b)) if a.len() == b.len() => {
                for (x, y) in a.iter_mut().zip(b) {
                    x.add_block(y, alpha, ctx);
                }
            }
            _ => {
                let d = other.to_dense(ctx.tree);
                self.add_dense(d.as_view(), alpha, ctx);
            }
        }
    }

    /// `self += alpha U V^t`.
    pub fn add_lowrank(&mut self, u: DMatrixView<C64>, v: DMatrixView<C64>, alpha: C64, ctx: &mut Ctx) {
        if u.ncols() == 0 {
            return;
        }
        let tree = ctx.tree;
        match &mut self.kind {
            Kind::Dense(d) => d.gemm(alpha, &u, &v.transpose(), ONE),
            Kind::LowRank(lr) => {
                let k = lr.rank();
                let mut uu = CMat::zeros(u.nrows(), k + u.ncols());
                uu.columns_mut(0, k).copy_from(&lr.u);
                uu.columns_mut(k, u.ncols()).copy_from(&(u * alpha));
                let mut vv = CMat::zeros(v.nrows(), k + v.ncols());
                vv.columns_mut(0, k).copy_from(&lr.v);
                vv.columns_mut(k, v.ncols()).copy_from(&v);
                *lr = compress_factors(&uu, &vv, ctx.policy);
            }
            Kind::Hier(kids) => {
                let (r0, c0) = (tree.nodes[self.row].start, tree.nodes[self.col].start);
                for kid in kids {
                    let (rn, cn) = (&tree.nodes[kid.row], &tree.nodes[kid.col]);
                    kid.add_lowrank(u.rows(rn.start - r0, rn.len()), v.rows(cn.start - c0, cn.len()), alpha, ctx);
                }
            }
        }
    }

    /// `self += alpha P` for a dense `P` of the block's shape.
    pub fn add_dense(&mut self, p: DMatrixView<C64>, alpha: C64, ctx: &mut Ctx) {
        let tree = ctx.tree;
        match &mut self.kind {
            Kind::Dense(d) => d.zip_apply(&p, |x, y| *x += alpha * y),
            Kind::LowRank(lr) => {
                let mut sum = lr.to_dense();
                sum.zip_apply(&p, |x, y| *x += alpha * y);
                *lr = truncate_dense(&sum, ctx.policy);
            }
            Kind::Hier(kids) => {
                let (r0, c0) = (tree.nodes[self.row].start, tree.nodes[self.col].start);
                for kid in kids {
                    let (rn, cn) = (&tree.nodes[kid.row], &tree.nodes[kid.col]);
                    kid.add_dense(p.view((rn.start - r0, cn.start - c0), (rn.len(), cn.len())), alpha, ctx);
                }
            }
        }
    }

    /// `self += alpha A B` where `A` spans `(self.row, k)` and `B` spans `(k, self.col)`.
    pub fn mul_add(&mut self, a: &Block, b: &Block, alpha: C64, ctx: &mut Ctx) {
        let tree = ctx.tree;
        match (&a.kind, &b.kind) {
            (Kind::LowRank(la), _) => {
                if la.rank() == 0 {
                    return;
                }
                // U V^t B = U (B^t V)^t
                let w = b.apply(tree, la.v.as_view(), true);
                self.add_lowrank(la.u.as_view(), w.as_view(), alpha, ctx);
            }
            (_, Kind::LowRank(lb)) => {
                if lb.rank() == 0 {
                    return;
                }
                let w = a.apply(tree, lb.u.as_view(), false);
                self.add_lowrank(w.as_view(), lb.v.as_view(), alpha, ctx);
            }
            (Kind::Dense(da), Kind::Dense(db)) => match &mut self.kind {
                Kind::Dense(t) => t.gemm(alpha, da, db, ONE),
                _ => {
                    let p = da * db;
                    self.add_dense(p.as_view(), alpha, ctx);
                }
            },
            (Kind::Hier(ka), Kind::Hier(kb)) if matches!(self.kind, Kind::Hier(_)) => {
                let p = tree.arity();
                let Kind::Hier(kt) = &mut self.kind else { unreachable!() };
                debug_assert_eq!(ka.len(), p * p);
                for i in 0..p {
                    for j in 0..p {
                        for l in 0..p {
                            kt[i * p + j].mul_add(&ka[i * p + l], &kb[l * p + j], alpha, ctx);
                        }
                    }
                }
            }
            _ => self.mul_add_sampled(a, b, alpha, ctx),
        }
    }

    /// Product of two hierarchical operands landing in a factorized (or,
    /// defensively, dense) target: recompress `target + alpha A B` either from
    /// dense products or by randomized sampling.
    fn mul_add_sampled(&mut self, a: &Block, b: &Block, alpha: C64, ctx: &mut Ctx) {
        let tree = ctx.tree;
        let (rows, cols) = (self.rows(tree), self.cols(tree));
        let policy = ctx.policy;
        let sample_width = policy.max_rank.saturating_add(policy.oversampling).saturating_mul(4);
        let current = match &self.kind {
            Kind::LowRank(lr) => Some(lr.clone()),
            _ => None,
        };
        if current.is_none() || rows.min(cols) <= sample_width {
            let p = a.to_dense(tree) * b.to_dense(tree);
            self.add_dense(p.as_view(), alpha, ctx);
            return;
        }
        let cur = current.expect("checked above");
        let apply = |x: DMatrixView<C64>| {
            let bx = b.apply(tree, x, false);
            let mut y = a.apply(tree, bx.as_view(), false) * alpha;
            if cur.rank() > 0 {
                y += &cur.u * cur.v.tr_mul(&x);
            }
            y
        };
        let apply_t = |x: DMatrixView<C64>| {
            let ax = a.apply(tree, x, true);
            let mut y = b.apply(tree, ax.as_view(), true) * alpha;
            if cur.rank() > 0 {
                y += &cur.v * cur.u.tr_mul(&x);
            }
            y
        };
        let lr = randomized_lowrank_with(apply, apply_t, rows, cols, policy, &mut ctx.rng);
        self.kind = Kind::LowRank(lr);
    }

    /// Invert a diagonal block in place.
    pub fn invert(&mut self, ctx: &mut Ctx) -> Result<(), HMatrixError> {
        let tree = ctx.tree;
        let level = tree.nodes[self.row].level;
        let node = self.row;
        match &mut self.kind {
            Kind::Dense(d) => {
                let inv = lu_inverse(d).ok_or(HMatrixError::Singular { level, node })?;
                let cond = norm_1(d) * norm_1(&inv);
                if !(cond <= 1.0 / f64::EPSILON.sqrt()) {
                    return Err(HMatrixError::Singular { level, node });
                }
                *d = inv;
                Ok(())
            }
            Kind::LowRank(_) => Err(HMatrixError::Singular { level, node }),
            Kind::Hier(kids) => {
                let p = tree.arity();
                for k in 0..p {
                    kids[k * p + k].invert(ctx)?;
                    for j in (0..p).filter(|&j| j != k) {
                        let placeholder = kids[k * p + j].placeholder();
                        let old = mem::replace(&mut kids[k * p + j], placeholder);
                        let mut new = Block::zeros(tree, old.row, old.col);
                        new.mul_add(&kids[k * p + k], &old, ONE, ctx);
                        kids[k * p + j] = new;
                    }
                    for i in (0..p).filter(|&i| i != k) {
                        for j in (0..p).filter(|&j| j != k) {
                            let placeholder = kids[i * p + j].placeholder();
                            let mut t = mem::replace(&mut kids[i * p + j], placeholder);
                            t.mul_add(&kids[i * p + k], &kids[k * p + j], -ONE, ctx);
                            kids[i * p + j] = t;
                        }
                    }
                    for i in (0..p).filter(|&i| i != k) {
                        let placeholder = kids[i * p + k].placeholder();
                        let old = mem::replace(&mut kids[i * p + k], placeholder);
                        let mut new = Block::zeros(tree, old.row, old.col);
                        new.mul_add(&old, &kids[k * p + k], -ONE, ctx);
                        kids[i * p + k] = new;
                    }
                }
                Ok(())
            }
        }
    }

    /// Largest rank over all factorized blocks.
    pub fn max_rank(&self) -> usize {
        match &self.kind {
            Kind::Dense(_) => 0,
            Kind::LowRank(lr) => lr.rank(),
            Kind::Hier(kids) => kids.iter().map(Block::max_rank).max().unwrap_or(0),
        }
    }

    /// Check that the block mirrors the tree and every rank is at most `max_rank`.
    pub fn check(&self, tree: &PartitionTree, max_rank: usize) -> Result<(), String> {
        let (rows, cols) = (self.rows(tree), self.cols(tree));
        let here = format!("block ({}, {})", self.row, self.col);
        let admissible = tree.admissible(self.row, self.col);
        let leaf = tree.nodes[self.row].is_leaf();
        match &self.kind {
            Kind::LowRank(lr) => {
                if !admissible {
                    return Err(format!("{here}: factorized but not admissible"));
                }
                if lr.u.nrows() != rows || lr.v.nrows() != cols || lr.u.ncols() != lr.v.ncols() {
                    return Err(format!("{here}: factor shapes do not match"));
                }
                if lr.rank() > max_rank {
                    return Err(format!("{here}: rank {} exceeds {max_rank}", lr.rank()));
                }
            }
            Kind::Dense(d) => {
                if admissible || !leaf {
                    return Err(format!("{here}: dense block outside the leaf level"));
                }
                if d.shape() != (rows, cols) {
                    return Err(format!("{here}: dense shape {:?} != {:?}", d.shape(), (rows, cols)));
                }
            }
            Kind::Hier(kids) => {
                if admissible || leaf {
                    return Err(format!("{here}: subdivided where the tree says otherwise"));
                }
                let (rk, ck) = (&tree.nodes[self.row].children, &tree.nodes[self.col].children);
                if kids.len() != rk.len() * ck.len() {
                    return Err(format!("{here}: {} children", kids.len()));
                }
                for (idx, kid) in kids.iter().enumerate() {
                    if kid.row != rk[idx / ck.len()] || kid.col != ck[idx % ck.len()] {
                        return Err(format!("{here}: child {idx} misplaced"));
                    }
                    kid.check(tree, max_rank)?;
                }
            }
        }
        Ok(())
    }

    pub fn dump(&self, tree: &PartitionTree, out: &mut String) {
        let (rn, cn) = (&tree.nodes[self.row], &tree.nodes[self.col]);
        let indent = 2 * rn.level;
        let (kind, rank) = match &self.kind {
            Kind::Dense(_) => ("dense", String::new()),
            Kind::LowRank(lr) => ("lowrank", format!(" rank {}", lr.rank())),
            Kind::Hier(_) => ("hier", String::new()),
        };
        let _ = writeln!(
            out,
            "{:indent$}level {} rows {:?} {}..{} cols {:?} {}..{} {kind}{rank}",
            "",
            rn.level,
            &rn.coord[..tree.index_dim],
            rn.start,
            rn.end,
            &cn.coord[..tree.index_dim],
            cn.start,
            cn.end,
        );
        if let Kind::Hier(kids) = &self.kind {
            for kid in kids {
                kid.dump(tree, out);
            }
        }
    }

    pub fn write_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        fn mat(w: &mut dyn Write, m: &CMat) -> std::io::Result<()> {
            w.write_all(&(m.nrows() as u64).to_le_bytes())?;
            w.write_all(&(m.ncols() as u64).to_le_bytes())?;
            for z in m.iter() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
            Ok(())
        }
        match &self.kind {
            Kind::Dense(d) => {
                w.write_all(&[0])?;
                mat(w, d)
            }
            Kind::LowRank(lr) => {
                w.write_all(&[1])?;
                mat(w, &lr.u)?;
                mat(w, &lr.v)
            }
            Kind::Hier(kids) => {
                w.write_all(&[2])?;
                kids.iter().try_for_each(|k| k.write_to(w))
            }
        }
    }

    pub fn read_from(tree: &PartitionTree, row: usize, col: usize, r: &mut dyn Read) -> Result<Block, HMatrixError> {
        fn u64_of(r: &mut dyn Read) -> std::io::Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn mat(r: &mut dyn Read, rows: usize, cols: Option<usize>) -> Result<CMat, HMatrixError> {
            let (nr, nc) = (u64_of(r)? as usize, u64_of(r)? as usize);
            if nr != rows || cols.is_some_and(|c| c != nc) {
                return Err(HMatrixError::Format(format!("unexpected block shape {nr}x{nc}")));
            }
            let mut buf = vec![0u8; 16 * nr * nc];
            r.read_exact(&mut buf)?;
            let vals = buf.chunks_exact(16).map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                C64::new(re, im)
            });
            Ok(CMat::from_iterator(nr, nc, vals))
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let (rows, cols) = (tree.nodes[row].len(), tree.nodes[col].len());
        let admissible = tree.admissible(row, col);
        let leaf = tree.nodes[row].is_leaf();
        let kind = match tag[0] {
            0 if !admissible && leaf => Kind::Dense(mat(r, rows, Some(cols))?),
            1 if admissible => {
                let u = mat(r, rows, None)?;
                let v = mat(r, cols, Some(u.ncols()))?;
                Kind::LowRank(LowRankBlock { u, v })
            }
            2 if !admissible && !leaf => {
                let (rk, ck) = (tree.nodes[row].children.clone(), tree.nodes[col].children.clone());
                let mut kids = Vec::with_capacity(rk.len() * ck.len());
                for &a in &rk {
                    for &b in &ck {
                        kids.push(Block::read_from(tree, a, b, r)?);
                    }
                }
                Kind::Hier(kids)
            }
            t => return Err(HMatrixError::Format(format!("block tag {t} does not fit the tree at ({row}, {col})"))),
        };
        Ok(Block { row, col, kind })
    }
}
