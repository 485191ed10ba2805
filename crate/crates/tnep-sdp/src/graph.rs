//! Small undirected-graph helpers shared by the chordal decomposition and
//! the sparse factorization ordering.

use std::collections::BTreeSet;

/// Adjacency list over vertices `0..n`, no self loops, edges stored both ways.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub neighbors: Vec<BTreeSet<usize>>,
}

impl Adjacency {
    pub fn new(n: usize) -> Self {
        Adjacency { neighbors: vec![BTreeSet::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.neighbors[a].insert(b);
        self.neighbors[b].insert(a);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].contains(&b)
    }

    /// Connected components, each sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

/// Greedy minimum-degree elimination ordering with lowest-index tie-breaking.
///
/// Returns the ordering (position -> vertex). Eliminating a vertex connects
/// its remaining neighbors into a clique, so the ordering is also a perfect
/// elimination ordering of the graph plus its fill edges.
pub fn min_degree_ordering(adj: &Adjacency) -> Vec<usize> {
    let n = adj.len();
    let mut work: Vec<BTreeSet<usize>> = adj.neighbors.clone();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (work[v].len(), v))
            .expect("vertex remains");
        let nbrs: Vec<usize> = work[v].iter().copied().collect();
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                work[a].insert(b);
                work[b].insert(a);
            }
        }
        for &a in &nbrs {
            work[a].remove(&v);
        }
        work[v].clear();
        alive[v] = false;
        order.push(v);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_degree_on_path_is_valid_permutation() {
        let mut g = Adjacency::new(4);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(2, 3);
        let ord = min_degree_ordering(&g);
        let mut sorted = ord.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn components_split() {
        let mut g = Adjacency::new(5);
        g.add_edge(0, 1);
        g.add_edge(3, 4);
        let comps = g.components();
        assert_eq!(comps, vec![vec![0, 1], vec![2], vec![3, 4]]);
    }
}
