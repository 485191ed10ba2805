//! Compilation of a [`ConicProgram`] into the solver standard form
//!
//! ```text
//! minimize    c'x
//! subject to  A x + s = b,   s in K = Zero x NonNeg x SOC... x PSD...
//! ```
//!
//! together with Ruiz equilibration (uniform row scaling within each cone
//! block) and the bookkeeping needed to map solutions and dual rays back to
//! the original program.

use crate::conic::{ConicProgram, LinExpr, RowSense};
use crate::solver::cones::{ConeSpec, SQRT2};
use crate::solver::sparse::CscMatrix;

/// Where a standard-form row came from, for dual mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowOrigin {
    /// Linear row `idx` of the program; `flip` when the row was negated (Ge).
    Linear { idx: usize, flip: bool },
    UpperBound { var: usize },
    LowerBound { var: usize },
    Soc { idx: usize, component: usize },
    Psd { idx: usize, entry: usize },
}

pub struct StandardForm {
    pub n: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<ConeSpec>,
    pub origins: Vec<RowOrigin>,
    pub obj_constant: f64,
    // Equilibration: scaled data actually solved is
    //   min (sigma_c E c)' xh  s.t. (D A E) xh + sh = D b.
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
    pub cost_scale: f64,
    pub a_scaled: CscMatrix,
    pub b_scaled: Vec<f64>,
    pub c_scaled: Vec<f64>,
}

fn push_expr_row(
    triplets: &mut Vec<(usize, usize, f64)>,
    b: &mut Vec<f64>,
    row: usize,
    expr: &LinExpr,
    scale: f64,
) {
    // s_row = scale * expr(x)  =>  A_row = -scale * coefs, b_row = scale * const.
    for &(v, coef) in &expr.terms {
        triplets.push((row, v.0, -scale * coef));
    }
    b[row] = scale * expr.constant;
}

impl StandardForm {
    pub fn compile(prog: &ConicProgram) -> Self {
        let n = prog.num_vars();
        let mut cones = Vec::new();
        let mut origins = Vec::new();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b = Vec::new();
        let mut row = 0usize;

        // Zero cone: equality rows, `a'x + s = rhs` with s = 0.
        let mut n_eq = 0;
        for (idx, r) in prog.rows.iter().enumerate() {
            if let RowSense::Eq(rhs) = r.sense {
                b.push(0.0);
                for &(v, coef) in &r.expr.terms {
                    triplets.push((row, v.0, coef));
                }
                b[row] = rhs - r.expr.constant;
                origins.push(RowOrigin::Linear { idx, flip: false });
                row += 1;
                n_eq += 1;
            }
        }
        if n_eq > 0 {
            cones.push(ConeSpec::Zero(n_eq));
        }

        // Nonnegative orthant: inequality rows, then variable bounds.
        let mut n_ineq = 0;
        for (idx, r) in prog.rows.iter().enumerate() {
            let (coef_sign, rhs, flip) = match r.sense {
                RowSense::Eq(_) => continue,
                RowSense::Le(rhs) => (1.0, rhs, false),
                RowSense::Ge(rhs) => (-1.0, -rhs, true),
            };
            b.push(0.0);
            for &(v, coef) in &r.expr.terms {
                triplets.push((row, v.0, coef_sign * coef));
            }
            b[row] = rhs - coef_sign * r.expr.constant;
            origins.push(RowOrigin::Linear { idx, flip });
            row += 1;
            n_ineq += 1;
        }
        for (j, def) in prog.vars.iter().enumerate() {
            if def.ub.is_finite() {
                b.push(def.ub);
                triplets.push((row, j, 1.0));
                origins.push(RowOrigin::UpperBound { var: j });
                row += 1;
                n_ineq += 1;
            }
            if def.lb.is_finite() {
                b.push(-def.lb);
                triplets.push((row, j, -1.0));
                origins.push(RowOrigin::LowerBound { var: j });
                row += 1;
                n_ineq += 1;
            }
        }
        if n_ineq > 0 {
            cones.push(ConeSpec::NonNeg(n_ineq));
        }

        // Second-order cones.
        for (idx, soc) in prog.socs.iter().enumerate() {
            let dim = 1 + soc.norm_terms.len();
            b.resize(row + dim, 0.0);
            push_expr_row(&mut triplets, &mut b, row, &soc.radius, 1.0);
            origins.push(RowOrigin::Soc { idx, component: 0 });
            for (k, term) in soc.norm_terms.iter().enumerate() {
                push_expr_row(&mut triplets, &mut b, row + 1 + k, term, 1.0);
                origins.push(RowOrigin::Soc { idx, component: 1 + k });
            }
            row += dim;
            cones.push(ConeSpec::Soc(dim));
        }

        // PSD blocks in svec coordinates.
        for (idx, blk) in prog.psd_blocks.iter().enumerate() {
            let d = blk.dim;
            let len = d * (d + 1) / 2;
            b.resize(row + len, 0.0);
            let mut k = 0;
            for j in 0..d {
                for i in j..d {
                    let scale = if i == j { 1.0 } else { SQRT2 };
                    push_expr_row(&mut triplets, &mut b, row + k, &blk.entries[k], scale);
                    origins.push(RowOrigin::Psd { idx, entry: k });
                    k += 1;
                }
            }
            row += len;
            cones.push(ConeSpec::Psd(d));
        }

        let m = row;
        let a = CscMatrix::from_triplets(m, n, &triplets);
        let c: Vec<f64> = {
            let mut c = vec![0.0; n];
            for &(v, coef) in &prog.objective.terms {
                c[v.0] += coef;
            }
            c
        };

        let mut sf = StandardForm {
            n,
            m,
            c: c.clone(),
            a: a.clone(),
            b: b.clone(),
            cones,
            origins,
            obj_constant: prog.objective.constant,
            row_scale: vec![1.0; m],
            col_scale: vec![1.0; n],
            cost_scale: 1.0,
            a_scaled: a,
            b_scaled: b,
            c_scaled: c,
        };
        sf.equilibrate();
        sf
    }

    /// Ruiz equilibration with cone-block-uniform row scaling, then cost
    /// normalization.
    fn equilibrate(&mut self) {
        let m = self.m;
        let n = self.n;
        let mut d = vec![1.0f64; m];
        let mut e = vec![1.0f64; n];
        // Block index per row; LP-style cones scale rows individually.
        let mut block_of = vec![usize::MAX; m];
        let mut off = 0;
        for (bi, spec) in self.cones.iter().enumerate() {
            let len = spec.len();
            if matches!(spec, ConeSpec::Soc(_) | ConeSpec::Psd(_)) {
                for r in off..off + len {
                    block_of[r] = bi;
                }
            }
            off += len;
        }
        let nblocks = self.cones.len();
        for _ in 0..10 {
            let mut rmax = vec![0.0f64; m];
            let mut cmax = vec![0.0f64; n];
            for cidx in 0..n {
                for p in self.a.colptr[cidx]..self.a.colptr[cidx + 1] {
                    let r = self.a.rowind[p];
                    let v = (self.a.values[p] * d[r] * e[cidx]).abs();
                    rmax[r] = rmax[r].max(v);
                    cmax[cidx] = cmax[cidx].max(v);
                }
            }
            // Uniform within SOC/PSD blocks.
            let mut bmax = vec![0.0f64; nblocks];
            for r in 0..m {
                if block_of[r] != usize::MAX {
                    bmax[block_of[r]] = bmax[block_of[r]].max(rmax[r]);
                }
            }
            for r in 0..m {
                let mx = if block_of[r] != usize::MAX { bmax[block_of[r]] } else { rmax[r] };
                if mx > 0.0 {
                    d[r] /= mx.sqrt();
                }
            }
            for c in 0..n {
                if cmax[c] > 0.0 {
                    e[c] /= cmax[c].sqrt();
                }
            }
        }
        let mut a2 = self.a.clone();
        for cidx in 0..n {
            for p in a2.colptr[cidx]..a2.colptr[cidx + 1] {
                a2.values[p] *= d[a2.rowind[p]] * e[cidx];
            }
        }
        let cmaxval = self
            .c
            .iter()
            .enumerate()
            .map(|(j, &cj)| (cj * e[j]).abs())
            .fold(0.0f64, f64::max);
        let sigma_c = 1.0 / f64::max(1.0, cmaxval);
        self.b_scaled = self.b.iter().zip(&d).map(|(bv, dv)| bv * dv).collect();
        self.c_scaled = self
            .c
            .iter()
            .enumerate()
            .map(|(j, &cj)| cj * e[j] * sigma_c)
            .collect();
        self.a_scaled = a2;
        self.row_scale = d;
        self.col_scale = e;
        self.cost_scale = sigma_c;
    }

    /// Map a scaled primal-dual iterate back to original coordinates.
    pub fn unscale(&self, xh: &[f64], sh: &[f64], zh: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = xh.iter().zip(&self.col_scale).map(|(v, e)| v * e).collect();
        let s: Vec<f64> = sh.iter().zip(&self.row_scale).map(|(v, d)| v / d).collect();
        let z: Vec<f64> =
            zh.iter().zip(&self.row_scale).map(|(v, d)| v * d / self.cost_scale).collect();
        (x, s, z)
    }

    /// Scale a point from original coordinates into the equilibrated space.
    pub fn scale_point(&self, x: &[f64], s: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let xh: Vec<f64> = x.iter().zip(&self.col_scale).map(|(v, e)| v / e).collect();
        let sh: Vec<f64> = s.iter().zip(&self.row_scale).map(|(v, d)| v * d).collect();
        let zh: Vec<f64> =
            z.iter().zip(&self.row_scale).map(|(v, d)| v * self.cost_scale / d).collect();
        (xh, sh, zh)
    }
}
