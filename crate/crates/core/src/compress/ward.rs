use serde::{Deserialize, Serialize};

use crate::ensemble::SignificanceMatrix;
use crate::error::{Error, Result};

/// One agglomeration step. Leaves are nodes `0..d`; step `t` creates node
/// `d + t`. `left < right` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Increase in within-cluster sum of squares,
    /// `|A||B| / (|A|+|B|) * ||c_A - c_B||^2`.
    pub cost: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
    /// Leaves left to right, visiting the lower-numbered child first.
    pub leaf_order: Vec<usize>,
}

/// Cluster assignment of the `d` models into `k` groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub k: usize,
    pub labels: Vec<usize>,
}

impl Membership {
    /// Everything in one cluster.
    pub fn single(d: usize) -> Membership {
        Membership {
            k: 1,
            labels: vec![0; d],
        }
    }

    /// Member indices of each label, ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Ward agglomeration of the rows of `s` under squared Euclidean distance,
/// maintained with Lance-Williams updates. Among equal costs the pair with
/// the lexicographically smallest `(lower node, higher node)` merges first.
pub fn ward_cluster(s: &SignificanceMatrix) -> Result<Dendrogram> {
    let d = s.nrows();
    if d < 2 {
        return Err(Error::InvalidArgument(format!("clustering needs d >= 2 rows, got {d}")));
    }
    let mut dist = vec![0.0; d * d];
    for i in 0..d {
        for j in (i + 1)..d {
            let sq: f64 = s.row(i).iter().zip(s.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            dist[i * d + j] = 0.5 * sq;
            dist[j * d + i] = 0.5 * sq;
        }
    }
    let mut node = (0..d).collect::<Vec<usize>>();
    let mut size = vec![1usize; d];
    let mut active = vec![true; d];
    let mut merges = Vec::with_capacity(d - 1);

    for step in 0..d - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..d {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..d {
                if !active[b] {
                    continue;
                }
                let cost = dist[a * d + b];
                let (lo, hi) = (node[a].min(node[b]), node[a].max(node[b]));
                let better = match best {
                    None => true,
                    Some((c, blo, bhi, _, _)) => cost < c || (cost == c && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((cost, lo, hi, a, b));
                }
            }
        }
        let (cost, lo, hi, a, b) = best.expect("two active clusters remain");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..d {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let updated = ((na + nk) * dist[a * d + k] + (nb + nk) * dist[b * d + k] - nk * cost) / (na + nb + nk);
            dist[a * d + k] = updated;
            dist[k * d + a] = updated;
        }
        active[b] = false;
        size[a] += size[b];
        node[a] = d + step;
        merges.push(Merge {
            left: lo,
            right: hi,
            cost,
            size: size[a],
        });
    }

    let leaf_order = leaf_order(d, &merges);
    Ok(Dendrogram {
        n_leaves: d,
        merges,
        leaf_order,
    })
}

fn leaf_order(d: usize, merges: &[Merge]) -> Vec<usize> {
    let mut order = Vec::with_capacity(d);
    let mut stack = vec![2 * d - 2];
    while let Some(n) = stack.pop() {
        if n < d {
            order.push(n);
        } else {
            let m = &merges[n - d];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

impl Dendrogram {
    /// Cluster labels after undoing the last `k - 1` merges. Labels are
    /// numbered by first appearance along [`Dendrogram::leaf_order`].
    pub fn memberships_at(&self, k: usize) -> Result<Membership> {
        let d = self.n_leaves;
        if k < 1 || k > d {
            return Err(Error::KOutOfRange { k, d });
        }
        let mut parent: Vec<usize> = (0..2 * d - 1).collect();
        for (t, m) in self.merges.iter().take(d - k).enumerate() {
            parent[m.left] = d + t;
            parent[m.right] = d + t;
        }
        let root = |mut n: usize| {
            while parent[n] != n {
                n = parent[n];
            }
            n
        };
        let mut label_of_root = std::collections::HashMap::new();
        let mut labels = vec![0; d];
        for &leaf in &self.leaf_order {
            let next = label_of_root.len();
            labels[leaf] = *label_of_root.entry(root(leaf)).or_insert(next);
        }
        Ok(Membership { k, labels })
    }
}

/// Free-function form of [`Dendrogram::memberships_at`].
pub fn memberships_at(dendrogram: &Dendrogram, k: usize) -> Result<Membership> {
    dendrogram.memberships_at(k)
}
