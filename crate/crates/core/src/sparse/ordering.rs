//! Fill-reducing symmetric orderings.

use super::{Scalar, SparseError, SparseMatrix};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingKind {
    Natural,
    MinimumDegree,
    /// Eliminate leaves of a forest pattern before their parents. Produces
    /// zero fill on tree-structured matrices.
    LeafFirstTree,
}

/// Symmetric permutation: `perm[k]` is the original index eliminated at step `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    perm: Vec<usize>,
    kind: OrderingKind,
}

impl Ordering {
    pub fn new(perm: Vec<usize>, kind: OrderingKind) -> Result<Self, SparseError> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(SparseError::InvalidPermutation(format!(
                    "index {p} repeated or out of range for length {}",
                    perm.len()
                )));
            }
            seen[p] = true;
        }
        Ok(Self { perm, kind })
    }

    pub fn natural(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            kind: OrderingKind::Natural,
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn kind(&self) -> OrderingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

/// Computes an ordering of the (symmetrized) pattern of `m`.
pub fn order<T: Scalar>(m: &SparseMatrix<T>, kind: OrderingKind) -> Result<Ordering, SparseError> {
    if !m.is_square() {
        return Err(SparseError::NotSquare {
            nrows: m.nrows(),
            ncols: m.ncols(),
        });
    }
    match kind {
        OrderingKind::Natural => Ok(Ordering::natural(m.ncols())),
        OrderingKind::MinimumDegree => minimum_degree(m),
        OrderingKind::LeafFirstTree => leaf_first(&m.pattern_adjacency()),
    }
}

/// Leaf-first when the pattern graph is a forest, minimum degree otherwise.
pub fn order_auto<T: Scalar>(m: &SparseMatrix<T>) -> Result<Ordering, SparseError> {
    if !m.is_square() {
        return Err(SparseError::NotSquare {
            nrows: m.nrows(),
            ncols: m.ncols(),
        });
    }
    let adj = m.pattern_adjacency();
    if is_forest(&adj) {
        leaf_first(&adj)
    } else {
        minimum_degree(m)
    }
}

pub fn pattern_is_forest<T: Scalar>(m: &SparseMatrix<T>) -> bool {
    is_forest(&m.pattern_adjacency())
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn is_forest(adj: &[Vec<usize>]) -> bool {
    let mut parent: Vec<usize> = (0..adj.len()).collect();
    for (i, list) in adj.iter().enumerate() {
        for &j in list.iter().filter(|&&j| j > i) {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri == rj {
                return false;
            }
            parent[ri] = rj;
        }
    }
    true
}

fn leaf_first(adj: &[Vec<usize>]) -> Result<Ordering, SparseError> {
    if !is_forest(adj) {
        return Err(SparseError::NotAForest);
    }
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut done = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| degree[i] <= 1).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        if done[v] {
            continue;
        }
        done[v] = true;
        perm.push(v);
        for &w in &adj[v] {
            if !done[w] {
                degree[w] -= 1;
                if degree[w] <= 1 {
                    queue.push_back(w);
                }
            }
        }
    }
    debug_assert_eq!(perm.len(), n);
    Ordering::new(perm, OrderingKind::LeafFirstTree)
}

fn minimum_degree<T: Scalar>(m: &SparseMatrix<T>) -> Result<Ordering, SparseError> {
    let n = m.ncols();
    if n == 0 {
        return Ok(Ordering::natural(0));
    }
    let control = amd::Control::default();
    let (perm, _, _) = amd::order(n, m.colptr(), m.rowidx(), &control)
        .map_err(|status| SparseError::Ordering(format!("{status:?}")))?;
    Ordering::new(perm, OrderingKind::MinimumDegree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(n: usize, edges: &[(usize, usize)]) -> SparseMatrix<f64> {
        let mut t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 4.0)).collect();
        for &(i, j) in edges {
            t.push((i, j, -1.0));
            t.push((j, i, -1.0));
        }
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    /// Fill produced by eliminating the graph in the order `perm`.
    fn fill(n: usize, edges: &[(usize, usize)], perm: &[usize]) -> usize {
        let mut adj = vec![vec![false; n]; n];
        for &(i, j) in edges {
            adj[i][j] = true;
            adj[j][i] = true;
        }
        let mut gone = vec![false; n];
        let mut fill = 0;
        for &v in perm {
            let nb: Vec<usize> = (0..n).filter(|&w| !gone[w] && w != v && adj[v][w]).collect();
            for a in 0..nb.len() {
                for b in a + 1..nb.len() {
                    if !adj[nb[a]][nb[b]] {
                        adj[nb[a]][nb[b]] = true;
                        adj[nb[b]][nb[a]] = true;
                        fill += 1;
                    }
                }
            }
            gone[v] = true;
        }
        fill
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn natural_is_identity() {
        let m = SparseMatrix::<f64>::identity(4);
        assert_eq!(order(&m, OrderingKind::Natural).unwrap().perm(), &[0, 1, 2, 3]);
        for kind in [OrderingKind::MinimumDegree, OrderingKind::LeafFirstTree] {
            let o = order(&m, kind).unwrap();
            let mut p = o.perm().to_vec();
            p.sort_unstable();
            assert_eq!(p, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn path_endpoints_first() {
        let m = pattern(3, &[(0, 1), (1, 2)]);
        let o = order(&m, OrderingKind::LeafFirstTree).unwrap();
        assert_eq!(o.perm()[2], 1);
    }

    #[test]
    fn cycle_is_not_a_forest() {
        let m = pattern(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(matches!(
            order(&m, OrderingKind::LeafFirstTree),
            Err(SparseError::NotAForest)
        ));
        assert!(!pattern_is_forest(&m));
        assert_eq!(order_auto(&m).unwrap().kind(), OrderingKind::MinimumDegree);
    }

    #[test]
    fn star_hub_eliminated_last() {
        let n = 6;
        let edges: Vec<(usize, usize)> = (1..n).map(|leaf| (0, leaf)).collect();
        let perms = permutations(n);
        let best = perms.iter().map(|p| fill(n, &edges, p)).min().unwrap();
        // every zero-fill ordering keeps the hub in the final two slots
        for p in &perms {
            if fill(n, &edges, p) == best {
                assert!(p.iter().position(|&v| v == 0).unwrap() >= n - 2);
            }
        }
        let m = pattern(n, &edges);
        let o = order(&m, OrderingKind::MinimumDegree).unwrap();
        assert_eq!(fill(n, &edges, o.perm()), best);
        assert_eq!(*o.perm().last().unwrap(), 0);
    }

    #[test]
    fn forest_with_isolated_vertices() {
        let m = pattern(6, &[(0, 1), (3, 4), (4, 5)]);
        let o = order(&m, OrderingKind::LeafFirstTree).unwrap();
        assert_eq!(o.len(), 6);
        assert_eq!(fill(6, &[(0, 1), (3, 4), (4, 5)], o.perm()), 0);
    }

    #[test]
    fn rejects_bad_permutation() {
        assert!(Ordering::new(vec![0, 0, 1], OrderingKind::Natural).is_err());
        assert!(Ordering::new(vec![0, 3], OrderingKind::Natural).is_err());
    }
}
