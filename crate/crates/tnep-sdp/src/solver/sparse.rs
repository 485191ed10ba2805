//! Minimal compressed-sparse-column matrices and a simplicial LDL^T
//! factorization for symmetric quasi-definite KKT systems.
//!
//! The factorization is the classic up-looking algorithm driven by the
//! elimination tree. No pivoting is performed; the KKT assembler supplies a
//! fill-reducing permutation and the numeric phase applies dynamic
//! regularization with the expected diagonal signs, which downstream solves
//! compensate for with iterative refinement.

/// Compressed sparse column matrix.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    #[cfg_attr(not(test), allow(dead_code))]
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut colcount = vec![0usize; ncols];
        for &(_, c, _) in triplets {
            colcount[c] += 1;
        }
        let mut colptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            colptr[c + 1] = colptr[c] + colcount[c];
        }
        let mut rowind = vec![0usize; triplets.len()];
        let mut values = vec![0.0; triplets.len()];
        let mut next = colptr.clone();
        // Stable within-column order: sort a copy of the triplets by (col, row).
        let mut sorted: Vec<&(usize, usize, f64)> = triplets.iter().collect();
        sorted.sort_by_key(|&&(r, c, _)| (c, r));
        for &&(r, c, v) in &sorted {
            let p = next[c];
            rowind[p] = r;
            values[p] = v;
            next[c] = p + 1;
        }
        // Merge duplicates in place.
        let mut m = CscMatrix { nrows, ncols, colptr, rowind, values };
        m.merge_duplicates();
        m
    }

    fn merge_duplicates(&mut self) {
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowind = Vec::with_capacity(self.rowind.len());
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.ncols {
            colptr[c] = rowind.len();
            let lo = self.colptr[c];
            let hi = self.colptr[c + 1];
            let mut k = lo;
            while k < hi {
                let r = self.rowind[k];
                let mut v = self.values[k];
                let mut j = k + 1;
                while j < hi && self.rowind[j] == r {
                    v += self.values[j];
                    j += 1;
                }
                rowind.push(r);
                values.push(v);
                k = j;
            }
        }
        colptr[self.ncols] = rowind.len();
        self.colptr = colptr;
        self.rowind = rowind;
        self.values = values;
    }

    /// y += self * x
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowind[p]] += self.values[p] * xc;
            }
        }
    }

    /// y += self^T * x
    pub fn mul_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[c]..self.colptr[c + 1] {
                acc += self.values[p] * x[self.rowind[p]];
            }
            y[c] += acc;
        }
    }
}

/// LDL^T factorization of a permuted symmetric matrix given by its upper
/// triangle in CSC form.
pub struct LdlFactor {
    n: usize,
    // Symbolic data.
    parent: Vec<usize>,
    lnz: Vec<usize>,
    lp: Vec<usize>,
    // Numeric data.
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    // Workspaces.
    flag: Vec<usize>,
    pattern: Vec<usize>,
    y: Vec<f64>,
    /// Count of dynamically regularized pivots in the last numeric phase.
    pub regularized: usize,
}

pub const NONE: usize = usize::MAX;

impl LdlFactor {
    /// Symbolic analysis of the upper-triangular pattern.
    pub fn symbolic(upper: &CscMatrix) -> Self {
        let n = upper.ncols;
        let mut parent = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            flag[k] = k;
            for p in upper.colptr[k]..upper.colptr[k + 1] {
                let mut i = upper.rowind[p];
                debug_assert!(i <= k, "matrix must be upper triangular");
                while i != k && flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        LdlFactor {
            n,
            parent,
            lnz,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            flag,
            pattern: vec![0; n],
            y: vec![0.0; n],
            regularized: 0,
        }
    }

    /// Numeric factorization. `signs[k]` is the expected sign of D[k]; pivots
    /// smaller than `eps` in that direction are clamped to `sign * eps`.
    pub fn factor(&mut self, upper: &CscMatrix, signs: &[i8], eps: f64) {
        let n = self.n;
        self.regularized = 0;
        let mut lnz_used = vec![0usize; n];
        for k in 0..n {
            self.y[k] = 0.0;
            let mut top = n;
            self.flag[k] = k;
            for p in upper.colptr[k]..upper.colptr[k + 1] {
                let i0 = upper.rowind[p];
                self.y[i0] += upper.values[p];
                let mut len = 0usize;
                let mut i = i0;
                while self.flag[i] != k {
                    self.pattern[len] = i;
                    len += 1;
                    self.flag[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    self.pattern[top] = self.pattern[len];
                }
            }
            let mut dk = self.y[k];
            self.y[k] = 0.0;
            for &i in &self.pattern[top..n] {
                let yi = self.y[i];
                self.y[i] = 0.0;
                let p2 = self.lp[i] + lnz_used[i];
                let mut l_ki = yi;
                for p in self.lp[i]..p2 {
                    self.y[self.li[p]] -= self.lx[p] * yi;
                }
                l_ki /= self.d[i];
                dk -= l_ki * yi;
                self.li[p2] = k;
                self.lx[p2] = l_ki;
                lnz_used[i] += 1;
            }
            let sign = f64::from(signs[k]);
            if dk * sign < eps {
                dk = sign * eps;
                self.regularized += 1;
            }
            self.d[k] = dk;
        }
        debug_assert!((0..n).all(|k| lnz_used[k] == self.lnz[k]));
    }

    /// Solve LDL^T x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            for p in self.lp[k]..self.lp[k + 1] {
                b[self.li[p]] -= self.lx[p] * b[k];
            }
        }
        for k in 0..n {
            b[k] /= self.d[k];
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for p in self.lp[k]..self.lp[k + 1] {
                acc -= self.lx[p] * b[self.li[p]];
            }
            b[k] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_sym_from_upper(u: &CscMatrix) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(u.nrows, u.ncols);
        for c in 0..u.ncols {
            for p in u.colptr[c]..u.colptr[c + 1] {
                let r = u.rowind[p];
                m[(r, c)] = u.values[p];
                m[(c, r)] = u.values[p];
            }
        }
        m
    }

    #[test]
    fn ldl_solves_quasidefinite_system() {
        // [[2, 0, 1], [0, 3, -1], [1, -1, -2]] : quasi-definite with signs (+,+,-).
        let triplets = vec![
            (0usize, 0usize, 2.0),
            (1, 1, 3.0),
            (0, 2, 1.0),
            (1, 2, -1.0),
            (2, 2, -2.0),
        ];
        let u = CscMatrix::from_triplets(3, 3, &triplets);
        let mut f = LdlFactor::symbolic(&u);
        f.factor(&u, &[1, 1, -1], 1e-13);
        let mut x = vec![1.0, 2.0, 3.0];
        let b = x.clone();
        f.solve(&mut x);
        let m = dense_sym_from_upper(&u);
        let bx = m * nalgebra::DVector::from_vec(x);
        for i in 0..3 {
            assert!((bx[i] - b[i]).abs() < 1e-10, "{:?}", bx);
        }
    }

    #[test]
    fn ldl_random_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 25;
        // SPD matrix: B'B + I on a random sparse pattern.
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for _ in 0..120 {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            let v: f64 = rng.gen_range(-1.0..1.0);
            dense[(i, j)] += v;
        }
        let spd = dense.transpose() * dense.clone() + nalgebra::DMatrix::identity(n, n);
        let mut triplets = Vec::new();
        for c in 0..n {
            for r in 0..=c {
                if spd[(r, c)] != 0.0 {
                    triplets.push((r, c, spd[(r, c)]));
                }
            }
        }
        let u = CscMatrix::from_triplets(n, n, &triplets);
        let mut f = LdlFactor::symbolic(&u);
        f.factor(&u, &vec![1i8; n], 1e-13);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        f.solve(&mut x);
        let r = spd * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
        assert!(r.norm() < 1e-9, "residual {}", r.norm());
    }

    #[test]
    fn csc_merges_duplicate_triplets() {
        let u = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]);
        assert_eq!(u.rowind.len(), 2);
        assert_eq!(u.values[0], 3.0);
    }
}
