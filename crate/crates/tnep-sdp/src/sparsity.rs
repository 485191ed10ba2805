//! Chordal decomposition of the PSD constraint.
//!
//! The lifted matrix only enters the constraints through entries on the
//! network graph, so the PSD condition can be replaced by PSD conditions on
//! the maximal cliques of a chordal cover of that graph: by PSD matrix
//! completion the two formulations have the same optimal value, and the
//! completion along a clique tree reconstructs a full matrix (rank-one when
//! every clique block is rank-one) for voltage extraction.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix};

use crate::graph::{min_degree_ordering, Adjacency};

/// A chordal cover of a graph: elimination ordering, fill edges, maximal
/// cliques, and a clique tree with the running-intersection property.
#[derive(Debug, Clone)]
pub struct CliqueDecomposition {
    /// Perfect elimination ordering of the chordal cover.
    pub ordering: Vec<usize>,
    /// Fill edges added by the elimination.
    pub fill_edges: Vec<(usize, usize)>,
    /// Maximal cliques, each sorted ascending.
    pub cliques: Vec<Vec<usize>>,
    /// Clique-tree parent per clique; `usize::MAX` for roots.
    pub parent: Vec<usize>,
    /// Separator `clique ∩ parent` per clique; empty for roots.
    pub separators: Vec<Vec<usize>>,
}

const NO_PARENT: usize = usize::MAX;

/// Compute a chordal cover of `adj` with a minimum-degree elimination
/// ordering and build its clique tree.
pub fn chordal_decomposition(adj: &Adjacency) -> CliqueDecomposition {
    let n = adj.len();
    let ordering = min_degree_ordering(adj);
    let mut pos = vec![0usize; n];
    for (p, &v) in ordering.iter().enumerate() {
        pos[v] = p;
    }

    // Re-run the elimination to collect fill edges and the extended graph.
    let mut work = adj.neighbors.clone();
    let mut extended = adj.clone();
    let mut fill_edges = Vec::new();
    for &v in &ordering {
        let nbrs: Vec<usize> = work[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                if !extended.has_edge(a, b) {
                    fill_edges.push((a.min(b), a.max(b)));
                    extended.add_edge(a, b);
                }
                work[a].insert(b);
                work[b].insert(a);
            }
        }
        for &a in &nbrs {
            work[a].remove(&v);
        }
        work[v].clear();
    }

    // Candidate cliques: each vertex with its higher-ordered neighbors in
    // the chordal cover; keep the maximal ones.
    let mut candidates: Vec<Vec<usize>> = ordering
        .iter()
        .map(|&v| {
            let mut c: Vec<usize> =
                extended.neighbors[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
            c.push(v);
            c.sort_unstable();
            c
        })
        .collect();
    candidates.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for cand in candidates {
        let subset_of_existing =
            cliques.iter().any(|c| cand.iter().all(|v| c.binary_search(v).is_ok()));
        if !subset_of_existing {
            cliques.push(cand);
        }
    }
    cliques.sort();

    // Clique tree: maximum-weight spanning forest on intersection sizes
    // (Prim), which guarantees the running-intersection property.
    let nc = cliques.len();
    let mut parent = vec![NO_PARENT; nc];
    let mut in_tree = vec![false; nc];
    let overlap = |a: &Vec<usize>, b: &Vec<usize>| -> usize {
        a.iter().filter(|v| b.binary_search(v).is_ok()).count()
    };
    for root in 0..nc {
        if in_tree[root] {
            continue;
        }
        in_tree[root] = true;
        loop {
            let mut best: Option<(usize, usize, usize)> = None; // (weight, node, parent)
            for i in 0..nc {
                if in_tree[i] {
                    continue;
                }
                for j in 0..nc {
                    if !in_tree[j] {
                        continue;
                    }
                    let w = overlap(&cliques[i], &cliques[j]);
                    if w > 0 && best.map_or(true, |(bw, _, _)| w > bw) {
                        best = Some((w, i, j));
                    }
                }
            }
            match best {
                Some((_, i, j)) => {
                    parent[i] = j;
                    in_tree[i] = true;
                }
                None => break,
            }
        }
    }
    let separators = cliques
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if parent[i] == NO_PARENT {
                Vec::new()
            } else {
                c.iter().copied().filter(|v| cliques[parent[i]].binary_search(v).is_ok()).collect()
            }
        })
        .collect();

    CliqueDecomposition { ordering, fill_edges, cliques, parent, separators }
}

impl CliqueDecomposition {
    /// Check the running-intersection property: for every pair of cliques,
    /// their intersection is contained in every clique on the tree path
    /// between them.
    pub fn has_running_intersection(&self) -> bool {
        let nc = self.cliques.len();
        let path_to_root = |mut i: usize| -> Vec<usize> {
            let mut p = vec![i];
            while self.parent[i] != NO_PARENT {
                i = self.parent[i];
                p.push(i);
            }
            p
        };
        for i in 0..nc {
            for j in 0..nc {
                if i == j {
                    continue;
                }
                let inter: Vec<usize> = self.cliques[i]
                    .iter()
                    .copied()
                    .filter(|v| self.cliques[j].binary_search(v).is_ok())
                    .collect();
                if inter.is_empty() {
                    continue;
                }
                // Tree path between i and j.
                let pi = path_to_root(i);
                let pj = path_to_root(j);
                let common = pi.iter().find(|a| pj.contains(a));
                let Some(&meet) = common else { return false };
                let path: Vec<usize> = pi
                    .iter()
                    .take_while(|&&a| a != meet)
                    .chain(pj.iter().take_while(|&&a| a != meet))
                    .copied()
                    .chain(std::iter::once(meet))
                    .collect();
                for &k in &path {
                    if !inter.iter().all(|v| self.cliques[k].binary_search(v).is_ok()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// All vertex pairs covered by some clique (the extended pattern).
    pub fn pattern_pairs(&self) -> Vec<(usize, usize)> {
        let mut set = std::collections::BTreeSet::new();
        for c in &self.cliques {
            for (i, &a) in c.iter().enumerate() {
                for &b in &c[i + 1..] {
                    set.insert((a, b));
                }
            }
        }
        set.into_iter().collect()
    }

    /// Human-readable description of the decomposition.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ordering: {:?}", self.ordering);
        let _ = writeln!(out, "fill edges: {}", self.fill_edges.len());
        for (i, c) in self.cliques.iter().enumerate() {
            let p = if self.parent[i] == NO_PARENT {
                "root".to_string()
            } else {
                format!("parent {}", self.parent[i])
            };
            let _ = writeln!(out, "clique {i}: {:?} ({p}, separator {:?})", c, self.separators[i]);
        }
        out
    }
}

/// Complete a partial Hermitian matrix known on the clique pattern to a full
/// PSD matrix (Grone et al.): walk the clique tree from the roots and fill
/// each unknown block through the separator,
/// `X[u,v] = X[u,S] X[S,S]^+ X[S,v]`.
pub fn complete_psd(
    xmat: &DMatrix<Complex<f64>>,
    decomp: &CliqueDecomposition,
) -> DMatrix<Complex<f64>> {
    let n = xmat.nrows();
    let mut full = xmat.clone();
    let nc = decomp.cliques.len();
    // Process parents before children.
    let mut order: Vec<usize> = (0..nc).collect();
    let mut depth = vec![0usize; nc];
    for i in 0..nc {
        let mut j = i;
        while decomp.parent[j] != NO_PARENT {
            j = decomp.parent[j];
            depth[i] += 1;
        }
    }
    order.sort_by_key(|&i| depth[i]);

    let mut placed = vec![false; n];
    for &ci in &order {
        let clique = &decomp.cliques[ci];
        let sep: Vec<usize> = if decomp.parent[ci] == NO_PARENT {
            Vec::new()
        } else {
            decomp.separators[ci].clone()
        };
        let new: Vec<usize> = clique.iter().copied().filter(|&v| !placed[v]).collect();
        let old: Vec<usize> =
            (0..n).filter(|&v| placed[v] && !sep.contains(&v) && !clique.contains(&v)).collect();
        if !sep.is_empty() && !new.is_empty() && !old.is_empty() {
            // Blocks through the separator.
            let take = |rows: &[usize], cols: &[usize]| {
                DMatrix::from_fn(rows.len(), cols.len(), |i, j| full[(rows[i], cols[j])])
            };
            let xns = take(&new, &sep);
            let xss = take(&sep, &sep);
            let xso = take(&sep, &old);
            // Pseudo-inverse via eigendecomposition of the Hermitian block.
            let svd = nalgebra::SVD::new(xss.clone(), true, true);
            let tolr = 1e-10 * svd.singular_values.max();
            let pinv = svd.pseudo_inverse(tolr).expect("separator block pinv");
            let fillm = &xns * pinv * xso;
            for (a, &u) in new.iter().enumerate() {
                for (b, &v) in old.iter().enumerate() {
                    full[(u, v)] = fillm[(a, b)];
                    full[(v, u)] = fillm[(a, b)].conj();
                }
            }
        }
        for &v in clique {
            placed[v] = true;
        }
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn ring_with_chord(n: usize) -> Adjacency {
        let mut g = Adjacency::new(n);
        for i in 0..n {
            g.add_edge(i, (i + 1) % n);
        }
        g
    }

    #[test]
    fn tree_graph_needs_no_fill() {
        let mut g = Adjacency::new(5);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(1, 3);
        g.add_edge(3, 4);
        let d = chordal_decomposition(&g);
        assert!(d.fill_edges.is_empty());
        assert_eq!(d.cliques.len(), 4);
        assert!(d.cliques.iter().all(|c| c.len() == 2));
        assert!(d.has_running_intersection());
    }

    #[test]
    fn cycle_gets_filled_and_cliques_are_triangles() {
        let d = chordal_decomposition(&ring_with_chord(6));
        // A 6-cycle needs 3 fill edges; all maximal cliques are triangles.
        assert_eq!(d.fill_edges.len(), 3);
        assert!(d.cliques.iter().all(|c| c.len() == 3), "{:?}", d.cliques);
        assert_eq!(d.cliques.len(), 4);
        assert!(d.has_running_intersection());
    }

    #[test]
    fn elimination_ordering_is_perfect_for_cover() {
        // In the chordal cover, the higher neighbors of each vertex form a
        // clique.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        let mut g = Adjacency::new(n);
        for _ in 0..20 {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            g.add_edge(a, b);
        }
        let d = chordal_decomposition(&g);
        let mut cover = g.clone();
        for &(a, b) in &d.fill_edges {
            cover.add_edge(a, b);
        }
        let mut pos = vec![0usize; n];
        for (p, &v) in d.ordering.iter().enumerate() {
            pos[v] = p;
        }
        for v in 0..n {
            let higher: Vec<usize> =
                cover.neighbors[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
            for (i, &a) in higher.iter().enumerate() {
                for &b in &higher[i + 1..] {
                    assert!(cover.has_edge(a, b), "higher neighbors of {v} not a clique");
                }
            }
        }
        // Every original edge is inside some clique.
        for v in 0..n {
            for &u in &g.neighbors[v] {
                assert!(d
                    .cliques
                    .iter()
                    .any(|c| c.binary_search(&u).is_ok() && c.binary_search(&v).is_ok()));
            }
        }
    }

    #[test]
    fn completion_reproduces_rank1() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let mut g = Adjacency::new(n);
        for i in 0..n - 1 {
            g.add_edge(i, i + 1);
        }
        g.add_edge(0, 4);
        g.add_edge(2, 6);
        let d = chordal_decomposition(&g);
        let volts: Vec<Complex<f64>> = (0..n)
            .map(|_| Complex::new(rng.gen_range(0.9..1.1), rng.gen_range(-0.2..0.2)))
            .collect();
        // Partial matrix: exact values on the clique pattern, zeros outside.
        let mut partial = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
        for i in 0..n {
            partial[(i, i)] = volts[i] * volts[i].conj();
        }
        for &(a, b) in &d.pattern_pairs() {
            partial[(a, b)] = volts[a] * volts[b].conj();
            partial[(b, a)] = partial[(a, b)].conj();
        }
        let full = complete_psd(&partial, &d);
        for i in 0..n {
            for j in 0..n {
                let want = volts[i] * volts[j].conj();
                assert!(
                    (full[(i, j)] - want).norm() < 1e-9,
                    "entry ({i},{j}): {} vs {want}",
                    full[(i, j)]
                );
            }
        }
    }

    #[test]
    fn completion_of_clique_psd_data_is_psd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 7;
        let d = chordal_decomposition(&ring_with_chord(n));
        // Full random PSD matrix, then forget the off-pattern entries.
        let a = DMatrix::from_fn(n, n, |_, _| {
            Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let psd = &a * a.adjoint() + DMatrix::identity(n, n).map(|v: f64| Complex::new(v, 0.0));
        let mut partial = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
        for i in 0..n {
            partial[(i, i)] = psd[(i, i)];
        }
        for &(x, y) in &d.pattern_pairs() {
            partial[(x, y)] = psd[(x, y)];
            partial[(y, x)] = psd[(y, x)];
        }
        let full = complete_psd(&partial, &d);
        // Hermitian and PSD.
        for i in 0..n {
            for j in 0..n {
                assert!((full[(i, j)] - full[(j, i)].conj()).norm() < 1e-9);
            }
        }
        let emb = {
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = full[(i, j)].re;
                    m[(n + i, n + j)] = full[(i, j)].re;
                    m[(n + i, j)] = full[(i, j)].im;
                    m[(i, n + j)] = -full[(i, j)].im;
                }
            }
            m
        };
        let min_eig = nalgebra::SymmetricEigen::new(emb)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig > -1e-9, "completion not PSD: {min_eig}");
    }

    #[test]
    fn dump_lists_cliques() {
        let d = chordal_decomposition(&ring_with_chord(5));
        let text = d.dump();
        assert!(text.contains("clique 0"));
        assert!(text.contains("ordering"));
    }
}
