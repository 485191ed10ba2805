//! Assembly and factorization of the interior-point KKT system
//!
//! ```text
//! [ 0   A' ] [dx]   [bx]
//! [ A  -H  ] [dz] = [bz]      H = W'W
//! ```
//!
//! The sparsity pattern is fixed across iterations: A entries are static and
//! each cone block owns a set of slots for `-H`. A fill-reducing permutation
//! is computed once on a condensed graph where every SOC/PSD block is a
//! single supervertex, and the symbolic factorization is reused for every
//! numeric refactorization. Static regularization (+delta on the x diagonal,
//! -delta on the z diagonal) keeps the system quasi-definite; solves run a
//! few steps of iterative refinement against the unregularized matrix.

use crate::graph::{min_degree_ordering, Adjacency};
use crate::solver::cones::{ConeSpec, ConeSystem, Scaling};
use crate::solver::sparse::{CscMatrix, LdlFactor};
use crate::solver::standard::StandardForm;

struct BlockSlots {
    spec: ConeSpec,
    /// CSC positions for the block's `-H` entries. Diagonal cones store one
    /// slot per row; full cones store the local lower triangle column-major.
    pos: Vec<usize>,
}

pub struct KktSolver {
    n: usize,
    m: usize,
    dim: usize,
    /// Permuted upper triangle with regularized values (what gets factored).
    upper: CscMatrix,
    /// Values without regularization, same pattern, used for refinement.
    true_values: Vec<f64>,
    base_reg: Vec<f64>,
    base_true: Vec<f64>,
    slots: Vec<BlockSlots>,
    perm: Vec<usize>,
    factor: LdlFactor,
    signs: Vec<i8>,
    refine_steps: usize,
    // Scratch buffers.
    rhs: Vec<f64>,
    sol: Vec<f64>,
    resid: Vec<f64>,
}

fn find_pos(csc: &CscMatrix, r: usize, c: usize) -> usize {
    let lo = csc.colptr[c];
    let hi = csc.colptr[c + 1];
    let idx = csc.rowind[lo..hi].binary_search(&r).expect("entry present in pattern");
    lo + idx
}

impl KktSolver {
    pub fn new(sf: &StandardForm, static_reg: f64, refine_steps: usize) -> Self {
        let n = sf.n;
        let m = sf.m;
        let dim = n + m;
        let a = &sf.a_scaled;
        let cones = ConeSystem::new(sf.cones.clone());

        // Fill-reducing ordering on the condensed graph.
        let mut row_vertex = vec![0usize; m];
        let mut vertex_members: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
        for (k, spec) in cones.specs.iter().enumerate() {
            let off = cones.offsets[k];
            match spec {
                ConeSpec::Zero(len) | ConeSpec::NonNeg(len) => {
                    for r in off..off + len {
                        row_vertex[r] = vertex_members.len();
                        vertex_members.push(vec![n + r]);
                    }
                }
                ConeSpec::Soc(_) | ConeSpec::Psd(_) => {
                    let len = spec.len();
                    let v = vertex_members.len();
                    for r in off..off + len {
                        row_vertex[r] = v;
                    }
                    vertex_members.push((off..off + len).map(|r| n + r).collect());
                }
            }
        }
        let mut g = Adjacency::new(vertex_members.len());
        for c in 0..n {
            for p in a.colptr[c]..a.colptr[c + 1] {
                g.add_edge(c, row_vertex[a.rowind[p]]);
            }
        }
        let order = min_degree_ordering(&g);
        let mut perm = vec![0usize; dim];
        let mut next = 0;
        for &v in &order {
            for &member in &vertex_members[v] {
                perm[member] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next, dim);

        // Triplets for the permuted upper triangle. Every structural entry is
        // unique, so CSC positions can be recovered afterwards.
        let up = |a: usize, b: usize| -> (usize, usize) {
            let (pa, pb) = (perm[a], perm[b]);
            if pa <= pb {
                (pa, pb)
            } else {
                (pb, pa)
            }
        };
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for c in 0..n {
            let (r, cc) = up(c, c);
            triplets.push((r, cc, 0.0));
            for p in a.colptr[c]..a.colptr[c + 1] {
                let (r, cc) = up(c, n + a.rowind[p]);
                triplets.push((r, cc, a.values[p]));
            }
        }
        let mut slot_coords: Vec<Vec<(usize, usize)>> = Vec::new();
        for (k, spec) in cones.specs.iter().enumerate() {
            let off = cones.offsets[k];
            let len = spec.len();
            let mut coords = Vec::new();
            match spec {
                ConeSpec::Zero(_) | ConeSpec::NonNeg(_) => {
                    for i in 0..len {
                        coords.push(up(n + off + i, n + off + i));
                    }
                }
                ConeSpec::Soc(_) | ConeSpec::Psd(_) => {
                    for j in 0..len {
                        for i in j..len {
                            coords.push(up(n + off + i, n + off + j));
                        }
                    }
                }
            }
            for &(r, c) in &coords {
                triplets.push((r, c, 0.0));
            }
            slot_coords.push(coords);
        }
        let upper = CscMatrix::from_triplets(dim, dim, &triplets);
        let slots: Vec<BlockSlots> = cones
            .specs
            .iter()
            .zip(&slot_coords)
            .map(|(&spec, coords)| BlockSlots {
                spec,
                pos: coords.iter().map(|&(r, c)| find_pos(&upper, r, c)).collect(),
            })
            .collect();

        let mut base_true = upper.values.clone();
        // H slots must start at zero in the base copies.
        for s in &slots {
            for &p in &s.pos {
                base_true[p] = 0.0;
            }
        }
        let mut base_reg = base_true.clone();
        let mut signs = vec![0i8; dim];
        for j in 0..n {
            signs[perm[j]] = 1;
            base_reg[find_pos(&upper, perm[j], perm[j])] += static_reg;
        }
        for r in 0..m {
            signs[perm[n + r]] = -1;
        }
        for (k, spec) in cones.specs.iter().enumerate() {
            let off = cones.offsets[k];
            for i in 0..spec.len() {
                let (pr, pc) = up(n + off + i, n + off + i);
                base_reg[find_pos(&upper, pr, pc)] -= static_reg;
            }
        }

        let mut upper = upper;
        upper.values.copy_from_slice(&base_reg);
        let factor = LdlFactor::symbolic(&upper);
        KktSolver {
            n,
            m,
            dim,
            true_values: base_true.clone(),
            base_reg,
            base_true,
            slots,
            perm,
            factor,
            signs,
            refine_steps,
            rhs: vec![0.0; dim],
            sol: vec![0.0; dim],
            resid: vec![0.0; dim],
            upper,
        }
    }

    /// Refactor with the given NT scalings. Returns the number of pivots the
    /// factorization had to regularize dynamically.
    pub fn update(&mut self, scalings: &[Scaling], dyn_eps: f64) -> usize {
        self.upper.values.copy_from_slice(&self.base_reg);
        self.true_values.copy_from_slice(&self.base_true);
        for (blk, sc) in self.slots.iter().zip(scalings) {
            match blk.spec {
                ConeSpec::Zero(_) => {}
                ConeSpec::NonNeg(n) => {
                    if let Scaling::NonNeg { w } = sc {
                        for i in 0..n {
                            let h = w[i] * w[i];
                            self.upper.values[blk.pos[i]] -= h;
                            self.true_values[blk.pos[i]] -= h;
                        }
                    } else {
                        unreachable!("scaling kind mismatch");
                    }
                }
                ConeSpec::Soc(_) | ConeSpec::Psd(_) => {
                    let len = blk.spec.len();
                    let h = sc.wtw_dense(len);
                    let mut idx = 0;
                    for j in 0..len {
                        for i in j..len {
                            self.upper.values[blk.pos[idx]] -= h[(i, j)];
                            self.true_values[blk.pos[idx]] -= h[(i, j)];
                            idx += 1;
                        }
                    }
                }
            }
        }
        self.factor.factor(&self.upper, &self.signs, dyn_eps);
        self.factor.regularized
    }

    /// Solve the KKT system for the stacked right-hand side `(bx, bz)`.
    pub fn solve(&mut self, bx: &[f64], bz: &[f64], dx: &mut [f64], dz: &mut [f64]) {
        let (n, m, dim) = (self.n, self.m, self.dim);
        for j in 0..n {
            self.rhs[self.perm[j]] = bx[j];
        }
        for r in 0..m {
            self.rhs[self.perm[n + r]] = bz[r];
        }
        self.sol.copy_from_slice(&self.rhs);
        self.factor.solve(&mut self.sol);
        for _ in 0..self.refine_steps {
            // resid = rhs - K_true * sol, with K_true symmetric from the
            // stored upper triangle.
            self.resid.copy_from_slice(&self.rhs);
            for c in 0..dim {
                for p in self.upper.colptr[c]..self.upper.colptr[c + 1] {
                    let r = self.upper.rowind[p];
                    let v = self.true_values[p];
                    self.resid[r] -= v * self.sol[c];
                    if r != c {
                        self.resid[c] -= v * self.sol[r];
                    }
                }
            }
            let rnorm = self.resid.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
            if rnorm < 1e-14 {
                break;
            }
            self.factor.solve(&mut self.resid);
            for i in 0..dim {
                self.sol[i] += self.resid[i];
            }
        }
        for j in 0..n {
            dx[j] = self.sol[self.perm[j]];
        }
        for r in 0..m {
            dz[r] = self.sol[self.perm[n + r]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{ConicProgram, LinExpr};
    use crate::solver::cones::ConeSystem;

    #[test]
    fn kkt_solve_matches_dense() {
        let mut p = ConicProgram::new();
        let x = p.add_bounded_var("x", 0.0, 4.0);
        let y = p.add_bounded_var("y", 0.0, 4.0);
        p.add_eq("e", LinExpr::var(x).plus(&LinExpr::var(y)), 2.0);
        p.add_soc("s", LinExpr::constant(3.0), vec![LinExpr::var(x), LinExpr::var(y)]);
        p.set_objective(LinExpr::var(x));
        let sf = StandardForm::compile(&p);
        let cones = ConeSystem::new(sf.cones.clone());
        let mut s = vec![0.0; sf.m];
        let mut z = vec![0.0; sf.m];
        cones.identity(&mut s);
        cones.identity(&mut z);
        cones.shift_interior(&mut s, 0.3);
        cones.shift_interior(&mut z, 0.1);
        let scalings = cones.nt_scalings(&s, &z).unwrap();

        let mut kkt = KktSolver::new(&sf, 1e-9, 3);
        kkt.update(&scalings, 1e-13);
        let bx = vec![1.0, -2.0];
        let bz: Vec<f64> = (0..sf.m).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut dx = vec![0.0; sf.n];
        let mut dz = vec![0.0; sf.m];
        kkt.solve(&bx, &bz, &mut dx, &mut dz);

        // Dense check: A' dz = bx, A dx - H dz = bz.
        let mut atdz = vec![0.0; sf.n];
        sf.a_scaled.mul_transpose_add(&dz, &mut atdz);
        for j in 0..sf.n {
            assert!((atdz[j] - bx[j]).abs() < 1e-8, "dual row {j}");
        }
        let mut adx = vec![0.0; sf.m];
        sf.a_scaled.mul_add(&dx, &mut adx);
        let mut hdz = vec![0.0; sf.m];
        for (k, sc) in scalings.iter().enumerate() {
            let zi = cones.block(k, &dz).to_vec();
            let mut t1 = vec![0.0; zi.len()];
            sc.apply_w(&zi, &mut t1);
            let mut t2 = vec![0.0; zi.len()];
            sc.apply_wt(&t1, &mut t2);
            cones.block_mut(k, &mut hdz)[..].copy_from_slice(&t2);
        }
        for r in 0..sf.m {
            assert!((adx[r] - hdz[r] - bz[r]).abs() < 1e-8, "primal row {r}");
        }
    }
}
