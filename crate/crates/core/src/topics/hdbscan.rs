//! Density clustering over mutual-reachability distance: minimum spanning
//! tree, single-linkage hierarchy, condensed tree and excess-of-mass
//! cluster selection.

use rayon::prelude::*;
use thiserror::Error;

pub const NOISE: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("min_cluster_size must be at least 2, got {0}")]
    MinClusterSize(usize),
    #[error("points have inconsistent dimensions")]
    Ragged,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Distance to the `min_samples`-th nearest point, counting the point itself.
fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    points
        .par_iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| euclidean(p, q)).collect();
            let k = (min_samples - 1).min(d.len() - 1);
            *d.select_nth_unstable_by(k, f64::total_cmp).1
        })
        .collect()
}

/// Prim's algorithm on the complete mutual-reachability graph.
fn minimum_spanning_tree(points: &[Vec<f64>], core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = euclidean(&points[current], &points[j]).max(core[current]).max(core[j]);
            if d < best[j] {
                best[j] = d;
                from[j] = current;
            }
        }
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("a point remains outside the tree");
        in_tree[next] = true;
        edges.push((from[next], next, best[next]));
        current = next;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Merge `i` of the single-linkage hierarchy: node `n + i` joins `left` and `right`.
#[derive(Debug, Clone, Copy)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Vec<Merge> {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    // Node ids: 0..n points, n.. internal nodes. `label[root]` maps a
    // union-find root to the hierarchy node it currently represents.
    let mut uf = UnionFind::new(n);
    let mut label: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (a, b, d) in edges {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let size = uf.size[ra] + uf.size[rb];
        merges.push(Merge {
            left: label[ra],
            right: label[rb],
            distance: d,
            size,
        });
        let (big, small) = if uf.size[ra] >= uf.size[rb] { (ra, rb) } else { (rb, ra) };
        uf.parent[small] = big;
        uf.size[big] = size;
        label[big] = n + merges.len() - 1;
    }
    merges
}

/// Edge of the condensed tree. Points keep their index; clusters are
/// numbered from `n` (the root) upward, children after parents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(1e-10)
}

fn node_size(n: usize, merges: &[Merge], node: usize) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].size
    }
}

fn leaves(n: usize, merges: &[Merge], node: usize, out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
}

fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<CondensedEdge> {
    let root = 2 * n - 2;
    let mut relabel = vec![0usize; 2 * n - 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut out = Vec::new();
    let mut queue = std::collections::VecDeque::from([root]);
    let mut fallen = Vec::new();
    while let Some(node) = queue.pop_front() {
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let parent = relabel[node];
        let (ls, rs) = (node_size(n, merges, m.left), node_size(n, merges, m.right));
        let big_l = ls >= min_cluster_size;
        let big_r = rs >= min_cluster_size;
        for (child, size, big) in [(m.left, ls, big_l), (m.right, rs, big_r)] {
            if big && (big_l && big_r) {
                relabel[child] = next_label;
                next_label += 1;
                out.push(CondensedEdge {
                    parent,
                    child: relabel[child],
                    lambda,
                    child_size: size,
                });
                if child >= n {
                    queue.push_back(child);
                }
            } else if big {
                // The cluster persists under the parent's label.
                relabel[child] = parent;
                if child >= n {
                    queue.push_back(child);
                }
            } else {
                fallen.clear();
                leaves(n, merges, child, &mut fallen);
                for &p in &fallen {
                    out.push(CondensedEdge {
                        parent,
                        child: p,
                        lambda,
                        child_size: 1,
                    });
                }
            }
        }
    }
    out
}

/// Cluster labels for `points`; `NOISE` for points in no selected cluster.
/// Labels are numbered by decreasing cluster size, then by smallest member
/// index.
pub fn hdbscan(points: &[Vec<f64>], min_cluster_size: usize) -> Result<Vec<i64>, ClusterError> {
    if min_cluster_size < 2 {
        return Err(ClusterError::MinClusterSize(min_cluster_size));
    }
    let n = points.len();
    if let Some(first) = points.first() {
        if points.iter().any(|p| p.len() != first.len()) {
            return Err(ClusterError::Ragged);
        }
    }
    if n < min_cluster_size || n < 2 {
        return Ok(vec![NOISE; n]);
    }
    let core = core_distances(points, min_cluster_size);
    let merges = single_linkage(n, minimum_spanning_tree(points, &core));
    let tree = condense(n, &merges, min_cluster_size);
    let clusters = select_clusters(n, &tree, min_cluster_size);
    Ok(relabel_by_size(n, clusters))
}

/// Excess-of-mass selection; the root is only used when it has no child
/// clusters, and then only for the points that persist longest.
fn select_clusters(n: usize, tree: &[CondensedEdge], min_cluster_size: usize) -> Vec<Option<usize>> {
    let max_label = tree.iter().map(|e| e.parent.max(e.child)).max().unwrap_or(n).max(n);
    let count = max_label - n + 1;
    let mut birth = vec![0.0f64; count];
    let mut parent_of = vec![None; count];
    for e in tree.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
        parent_of[e.child - n] = Some(e.parent);
    }
    let mut stability = vec![0.0f64; count];
    for e in tree {
        stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * e.child_size as f64;
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
    for e in tree.iter().filter(|e| e.child >= n) {
        children[e.parent - n].push(e.child);
    }

    let mut selected = vec![false; count];
    if count > 1 {
        for c in (1..count).rev() {
            let subtree: f64 = children[c].iter().map(|&k| stability[k - n]).sum();
            if subtree > stability[c] {
                stability[c] = subtree;
            } else {
                selected[c] = true;
                let mut stack = children[c].clone();
                while let Some(k) = stack.pop() {
                    selected[k - n] = false;
                    stack.extend(children[k - n].iter().copied());
                }
            }
        }
    }

    let mut point_parent = vec![n; n];
    let mut point_lambda = vec![0.0; n];
    for e in tree.iter().filter(|e| e.child < n) {
        point_parent[e.child] = e.parent;
        point_lambda[e.child] = e.lambda;
    }
    if count == 1 {
        let max_lambda = point_lambda.iter().copied().fold(0.0f64, f64::max);
        let members: Vec<bool> = point_lambda.iter().map(|&l| l >= max_lambda).collect();
        if members.iter().filter(|&&m| m).count() < min_cluster_size {
            return vec![None; n];
        }
        return members.into_iter().map(|m| m.then_some(n)).collect();
    }
    (0..n)
        .map(|p| {
            let mut c = point_parent[p];
            loop {
                if selected[c - n] {
                    return Some(c);
                }
                c = parent_of[c - n]?;
            }
        })
        .collect()
}

fn relabel_by_size(n: usize, clusters: Vec<Option<usize>>) -> Vec<i64> {
    let mut groups: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    for (p, c) in clusters.iter().enumerate() {
        if let Some(c) = c {
            let g = groups.entry(*c).or_insert((0, p));
            g.0 += 1;
        }
    }
    let mut order: Vec<(usize, usize, usize)> = groups.into_iter().map(|(c, (size, first))| (c, size, first)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let mut id = vec![NOISE; 2 * n];
    for (rank, (c, _, _)) in order.iter().enumerate() {
        id[*c] = rank as i64;
    }
    clusters.into_iter().map(|c| c.map_or(NOISE, |c| id[c])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(cx: f64, cy: f64, n: usize, spread: f64) -> Vec<Vec<f64>> {
        // Deterministic points on a small spiral around the centre.
        (0..n)
            .map(|i| {
                let t = i as f64 * 2.399;
                let r = spread * ((i + 1) as f64 / n as f64).sqrt();
                vec![cx + r * t.cos(), cy + r * t.sin()]
            })
            .collect()
    }

    #[test]
    fn two_blobs() {
        let mut pts = blob(0.0, 0.0, 10, 1.0);
        pts.extend(blob(20.0, 20.0, 10, 1.0));
        let labels = hdbscan(&pts, 5).unwrap();
        assert!(labels.iter().all(|&l| l >= 0), "{labels:?}");
        assert!(labels[..10].iter().all(|&l| l == labels[0]));
        assert!(labels[10..].iter().all(|&l| l == labels[10]));
        assert_ne!(labels[0], labels[10]);
    }

    #[test]
    fn larger_cluster_gets_id_zero() {
        let mut pts = blob(0.0, 0.0, 8, 1.0);
        pts.extend(blob(30.0, 0.0, 14, 1.0));
        let labels = hdbscan(&pts, 5).unwrap();
        assert_eq!(labels[8], 0);
        assert_eq!(labels[0], 1);
    }

    #[test]
    fn too_few_points_is_all_noise() {
        let pts = blob(0.0, 0.0, 6, 1.0);
        assert_eq!(hdbscan(&pts, 7).unwrap(), vec![NOISE; 6]);
        assert!(hdbscan(&pts, 1).is_err());
    }

    #[test]
    fn tight_group_among_outliers() {
        let mut pts = vec![vec![0.0, 0.0]; 6];
        pts.extend([vec![50.0, 0.0], vec![0.0, 70.0], vec![-90.0, 10.0], vec![10.0, -120.0]]);
        let labels = hdbscan(&pts, 4).unwrap();
        assert_eq!(&labels[..6], &[0; 6]);
        assert_eq!(&labels[6..], &[NOISE; 4]);
    }
}
