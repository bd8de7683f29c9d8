use std::fmt::Write as _;

use super::HMatrixError;

/// Leaf cardinality used for line (1D) index sets.
pub const DEFAULT_LEAF_1D: usize = 16;
/// Leaf cardinality used for face (2D) index sets, i.e. 8 x 8 boxes.
pub const DEFAULT_LEAF_2D: usize = 64;

/// Which same-level node pairs get a low-rank block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Admissibility {
    /// Every pair of distinct nodes.
    Weak,
    /// Pairs whose coordinates differ by more than one in some direction.
    Strong,
}

impl Admissibility {
    pub fn name(self) -> &'static str {
        match self {
            Admissibility::Weak => "weak",
            Admissibility::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub level: usize,
    /// Position of the node within its level: `[i, 0]` on a line, `[i, j]` on a face.
    pub coord: [usize; 2],
    /// Range `start..end` in tree order.
    pub start: usize,
    pub end: usize,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

impl TreeNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Hierarchical bisection of a line of `n` points or a face of `n x n` points.
///
/// Nodes are stored in an arena with node 0 the root. Face points are
/// renumbered so that every node covers a contiguous range ("tree order");
/// `perm[t]` is the natural index (`a + n b`) of tree position `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTree {
    pub n: usize,
    pub index_dim: usize,
    pub leaf_size: usize,
    pub admissibility: Admissibility,
    pub nodes: Vec<TreeNode>,
    /// Node ids per level, ordered by coordinate (row-major, first coordinate fastest).
    pub levels: Vec<Vec<usize>>,
    perm: Vec<usize>,
    iperm: Vec<usize>,
}

impl PartitionTree {
    /// Bisect until a node holds at most `leaf_size` points.
    pub fn build(
        n: usize,
        leaf_size: usize,
        index_dim: usize,
        admissibility: Admissibility,
    ) -> Result<Self, HMatrixError> {
        if leaf_size < 2 {
            return Err(HMatrixError::Partition(format!("leaf size {leaf_size} must be at least 2")));
        }
        if !(1..=2).contains(&index_dim) {
            return Err(HMatrixError::Partition(format!("index dimension {index_dim} must be 1 or 2")));
        }
        if n == 0 {
            return Err(HMatrixError::Partition("empty index set".into()));
        }
        let mut depth = 0;
        let mut side = n;
        while side.pow(index_dim as u32) > leaf_size {
            if side % 2 != 0 {
                return Err(HMatrixError::Partition(format!(
                    "n = {n} is not evenly bisectable down to leaf size {leaf_size}"
                )));
            }
            side /= 2;
            depth += 1;
        }

        let mut tree = Self {
            n,
            index_dim,
            leaf_size,
            admissibility,
            nodes: Vec::new(),
            levels: vec![Vec::new(); depth + 1],
            perm: Vec::with_capacity(n.pow(index_dim as u32)),
            iperm: Vec::new(),
        };
        tree.grow(0, [0, 0], None, depth);
        for level in tree.levels.iter_mut() {
            level.sort_by_key(|&id| {
                let c = tree.nodes[id].coord;
                (c[1], c[0])
            });
        }
        let mut iperm = vec![0; tree.perm.len()];
        for (t, &p) in tree.perm.iter().enumerate() {
            iperm[p] = t;
        }
        tree.iperm = iperm;
        Ok(tree)
    }

    fn grow(&mut self, level: usize, coord: [usize; 2], parent: Option<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let start = self.perm.len();
        self.nodes.push(TreeNode { level, coord, start, end: start, children: Vec::new(), parent });
        self.levels[level].push(id);
        if level == depth {
            let side = self.n >> level;
            if self.index_dim == 1 {
                self.perm.extend(coord[0] * side..(coord[0] + 1) * side);
            } else {
                for b in coord[1] * side..(coord[1] + 1) * side {
                    for a in coord[0] * side..(coord[0] + 1) * side {
                        self.perm.push(a + self.n * b);
                    }
                }
            }
        } else {
            let kids: Vec<[usize; 2]> = if self.index_dim == 1 {
                vec![[2 * coord[0], 0], [2 * coord[0] + 1, 0]]
            } else {
                let (i, j) = (2 * coord[0], 2 * coord[1]);
                vec![[i, j], [i + 1, j], [i, j + 1], [i + 1, j + 1]]
            };
            for c in kids {
                let child = self.grow(level + 1, c, Some(id), depth);
                self.nodes[id].children.push(child);
            }
        }
        self.nodes[id].end = self.perm.len();
        id
    }

    /// Number of indices `n^index_dim`.
    pub fn size(&self) -> usize {
        self.perm.len()
    }

    /// Level of the leaves (root is level 0).
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Children per node: 2 on a line, 4 on a face.
    pub fn arity(&self) -> usize {
        1 << self.index_dim
    }

    /// Natural index of each tree position.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Tree position of each natural index.
    pub fn iperm(&self) -> &[usize] {
        &self.iperm
    }

    pub fn to_tree_order<T: Copy>(&self, natural: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| natural[p]).collect()
    }

    pub fn to_natural_order<T: Copy>(&self, tree: &[T]) -> Vec<T> {
        self.iperm.iter().map(|&t| tree[t]).collect()
    }

    /// Admissibility of two nodes on the same level.
    pub fn admissible(&self, a: usize, b: usize) -> bool {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        debug_assert_eq!(na.level, nb.level);
        match self.admissibility {
            Admissibility::Weak => a != b,
            Admissibility::Strong => {
                let di = na.coord[0].abs_diff(nb.coord[0]);
                let dj = na.coord[1].abs_diff(nb.coord[1]);
                di.max(dj) > 1
            }
        }
    }

    /// Same-level nodes admissible with `node` whose parents are not admissible
    /// with the parent of `node`.
    pub fn interaction_list(&self, node: usize) -> Vec<usize> {
        let level = self.nodes[node].level;
        let Some(parent) = self.nodes[node].parent else {
            return Vec::new();
        };
        self.levels[level]
            .iter()
            .copied()
            .filter(|&other| {
                let op = self.nodes[other].parent.expect("non-root node has a parent");
                self.admissible(node, other) && !self.admissible(parent, op)
            })
            .collect()
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n
            && self.index_dim == other.index_dim
            && self.leaf_size == other.leaf_size
            && self.admissibility == other.admissibility
    }

    /// Indented listing of the nodes, one per line.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for (id, node) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:indent$}node {id} level {} coord {:?} range {}..{}",
                "",
                node.level,
                &node.coord[..self.index_dim],
                node.start,
                node.end,
                indent = 2 * node.level
            );
        }
        s
    }
}
