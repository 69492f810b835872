//! Agglomerative hierarchical clustering via the Lance–Williams recurrence.
//!
//! Leaves are numbered `0..n`; the cluster created by merge `s` gets node id
//! `n + s`. Among equally distant candidate pairs the one with the smallest
//! `(node_a, node_b)` id pair is merged first, with `node_a < node_b`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    /// Minimum-variance criterion on Euclidean input distances.
    Ward,
    /// Unweighted mean of pairwise input dissimilarities.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub node_a: usize,
    pub node_b: usize,
    pub height: f64,
    pub new_node: usize,
    pub size: usize,
}

/// Merge sequence over `leaves` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

/// Symmetric dissimilarity matrix stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        DistanceMatrix { n, values }
    }

    /// Euclidean distances between the rows of a row-major `n × dim` matrix.
    pub fn euclidean(rows: &[f64], dim: usize) -> Self {
        let n = rows.len().checked_div(dim).unwrap_or(0);
        Self::from_fn(n, |i, j| {
            let a = &rows[i * dim..(i + 1) * dim];
            let b = &rows[j * dim..(j + 1) * dim];
            sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

pub fn agglomerate(dist: &DistanceMatrix, linkage: Linkage) -> Result<Tree> {
    let n = dist.len();
    for i in 0..n {
        for j in 0..n {
            if !dist.get(i, j).is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    // Ward runs on squared distances.
    let mut d: Vec<f64> = match linkage {
        Linkage::Ward => dist.values.iter().map(|x| x * x).collect(),
        Linkage::Average => dist.values.clone(),
    };
    let mut node = (0..n).collect::<Vec<usize>>();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for p in 0..n {
            if !active[p] {
                continue;
            }
            for q in (p + 1)..n {
                if !active[q] {
                    continue;
                }
                let v = d[p * n + q];
                let key = (node[p].min(node[q]), node[p].max(node[q]));
                let better = match best {
                    None => true,
                    Some((bv, bkey, _, _)) => v < bv || (v == bv && key < bkey),
                };
                if better {
                    best = Some((v, key, p, q));
                }
            }
        }
        let (v, (node_a, node_b), p, q) = best.expect("at least two active clusters");
        let (np, nq) = (size[p] as f64, size[q] as f64);
        for k in 0..n {
            if !active[k] || k == p || k == q {
                continue;
            }
            let nk = size[k] as f64;
            let dkp = d[k * n + p];
            let dkq = d[k * n + q];
            let updated = match linkage {
                Linkage::Ward => (((np + nk) * dkp + (nq + nk) * dkq - nk * v) / (np + nq + nk)).max(0.0),
                Linkage::Average => (np * dkp + nq * dkq) / (np + nq),
            };
            d[k * n + p] = updated;
            d[p * n + k] = updated;
        }
        let height = match linkage {
            Linkage::Ward => sqrt(v),
            Linkage::Average => v,
        };
        size[p] += size[q];
        active[q] = false;
        node[p] = n + step;
        merges.push(Merge { node_a, node_b, height, new_node: n + step, size: size[p] });
    }
    Ok(Tree { leaves: n, merges })
}

impl Tree {
    /// Leaves in left-to-right order, taking `node_a` as the left child.
    pub fn leaf_order(&self) -> Vec<usize> {
        if self.leaves == 0 {
            return Vec::new();
        }
        let root = if self.merges.is_empty() { 0 } else { self.leaves + self.merges.len() - 1 };
        let mut out = Vec::with_capacity(self.leaves);
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if id < self.leaves {
                out.push(id);
            } else {
                let m = &self.merges[id - self.leaves];
                stack.push(m.node_b);
                stack.push(m.node_a);
            }
        }
        out
    }

    /// Flat clustering into `k` groups by undoing the `k − 1` last merges.
    /// Groups are numbered by their smallest leaf.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.leaves {
            return Err(Error::InvalidClusterCount { k, leaves: self.leaves });
        }
        let total = self.leaves + self.merges.len();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in &self.merges[..self.leaves - k] {
            let a = find(&mut parent, m.node_a);
            let b = find(&mut parent, m.node_b);
            parent[a] = m.new_node;
            parent[b] = m.new_node;
        }
        let mut label_of_root: Vec<Option<usize>> = vec![None; total];
        let mut next = 0;
        let mut out = Vec::with_capacity(self.leaves);
        for leaf in 0..self.leaves {
            let r = find(&mut parent, leaf);
            let label = *label_of_root[r].get_or_insert_with(|| {
                next += 1;
                next - 1
            });
            out.push(label);
        }
        Ok(out)
    }
}
