//! Solver-agnostic conic program representation.
//!
//! A [`ConicProgram`] is a linear-objective minimization over scalar
//! variables subject to linear rows, second-order cone constraints, and PSD
//! blocks whose entries are affine expressions. Both the OPF relaxation and
//! the expansion model compile into this form, and the interior-point backend
//! consumes it directly.

use std::fmt::Write as _;

/// Index of a scalar variable in a [`ConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        LinExpr { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn plus(mut self, other: &LinExpr) -> LinExpr {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(&self, f: f64) -> LinExpr {
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * f)).collect(),
            constant: self.constant * f,
        }
    }

    /// Evaluate at a point given by variable values.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Merge duplicate variable references, dropping zero coefficients.
    pub fn simplified(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        LinExpr { terms: out, constant: self.constant }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|&(_, c)| c == 0.0)
    }
}

/// Sense of a linear row; the right-hand side is part of the sense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowSense {
    Eq(f64),
    Le(f64),
    Ge(f64),
}

/// A linear row `expr (=, <=, >=) rhs`.
#[derive(Debug, Clone)]
pub struct LinRow {
    pub expr: LinExpr,
    pub sense: RowSense,
    pub name: String,
}

/// Second-order cone constraint `radius >= || norm_terms ||`.
#[derive(Debug, Clone)]
pub struct SocConstraint {
    pub radius: LinExpr,
    pub norm_terms: Vec<LinExpr>,
    pub name: String,
}

/// PSD constraint on a symmetric matrix of affine expressions.
///
/// Entries are stored as the lower triangle in column-major order:
/// `(0,0), (1,0), ..., (dim-1,0), (1,1), (2,1), ...`.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub dim: usize,
    pub entries: Vec<LinExpr>,
    pub name: String,
}

impl PsdBlock {
    /// Number of lower-triangle entries for a `dim x dim` block.
    pub fn tri_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Lower-triangle index of entry `(i, j)` with `i >= j`.
    pub fn tri_index(dim: usize, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i < dim);
        j * dim - j * (j + 1) / 2 + i
    }
}

#[derive(Debug, Clone)]
pub struct VarDef {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
}

/// A conic optimization problem with a linear minimization objective.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    pub vars: Vec<VarDef>,
    pub rows: Vec<LinRow>,
    pub socs: Vec<SocConstraint>,
    pub psd_blocks: Vec<PsdBlock>,
    pub objective: LinExpr,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Add a free variable.
    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.add_bounded_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_bounded_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> VarId {
        assert!(lb <= ub, "variable bounds crossed");
        let id = VarId(self.vars.len());
        self.vars.push(VarDef { name: name.into(), lb, ub });
        id
    }

    pub fn var_bounds(&self, v: VarId) -> (f64, f64) {
        (self.vars[v.0].lb, self.vars[v.0].ub)
    }

    pub fn set_bounds(&mut self, v: VarId, lb: f64, ub: f64) {
        assert!(lb <= ub, "variable bounds crossed");
        self.vars[v.0].lb = lb;
        self.vars[v.0].ub = ub;
    }

    pub fn add_row(&mut self, name: impl Into<String>, expr: LinExpr, sense: RowSense) {
        let expr = expr.simplified();
        debug_assert!(expr.terms.iter().all(|&(v, _)| v.0 < self.vars.len()));
        self.rows.push(LinRow { expr, sense, name: name.into() });
    }

    pub fn add_eq(&mut self, name: impl Into<String>, expr: LinExpr, rhs: f64) {
        self.add_row(name, expr, RowSense::Eq(rhs));
    }

    pub fn add_le(&mut self, name: impl Into<String>, expr: LinExpr, rhs: f64) {
        self.add_row(name, expr, RowSense::Le(rhs));
    }

    pub fn add_ge(&mut self, name: impl Into<String>, expr: LinExpr, rhs: f64) {
        self.add_row(name, expr, RowSense::Ge(rhs));
    }

    /// `radius >= || norm_terms ||_2`.
    pub fn add_soc(
        &mut self,
        name: impl Into<String>,
        radius: LinExpr,
        norm_terms: Vec<LinExpr>,
    ) {
        self.socs.push(SocConstraint {
            radius: radius.simplified(),
            norm_terms: norm_terms.into_iter().map(|e| e.simplified()).collect(),
            name: name.into(),
        });
    }

    /// Rotated cone `u * v >= || w ||^2` with `u, v >= 0`, compiled to the
    /// standard cone `(u + v, u - v, 2w) in SOC`.
    pub fn add_rotated_soc(
        &mut self,
        name: impl Into<String>,
        u: LinExpr,
        v: LinExpr,
        w: Vec<LinExpr>,
    ) {
        let radius = u.clone().plus(&v);
        let mut terms = vec![u.plus(&v.scaled(-1.0))];
        terms.extend(w.into_iter().map(|e| e.scaled(2.0)));
        self.add_soc(name, radius, terms);
    }

    /// Add a PSD block; `entries` is the lower triangle, column-major.
    pub fn add_psd_block(&mut self, name: impl Into<String>, dim: usize, entries: Vec<LinExpr>) {
        assert_eq!(entries.len(), PsdBlock::tri_len(dim));
        self.psd_blocks.push(PsdBlock {
            dim,
            entries: entries.into_iter().map(|e| e.simplified()).collect(),
            name: name.into(),
        });
    }

    pub fn set_objective(&mut self, obj: LinExpr) {
        self.objective = obj.simplified();
    }

    /// Maximum violation of all constraints and bounds at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (j, def) in self.vars.iter().enumerate() {
            v = v.max(def.lb - x[j]).max(x[j] - def.ub);
        }
        for row in &self.rows {
            let lhs = row.expr.eval(x);
            match row.sense {
                RowSense::Eq(r) => v = v.max((lhs - r).abs()),
                RowSense::Le(r) => v = v.max(lhs - r),
                RowSense::Ge(r) => v = v.max(r - lhs),
            }
        }
        for soc in &self.socs {
            let r = soc.radius.eval(x);
            let n = soc.norm_terms.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
            v = v.max(n - r);
        }
        for blk in &self.psd_blocks {
            let m = blk.dense_at(x);
            let eig = nalgebra::SymmetricEigen::new(m);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            v = v.max(-min);
        }
        v
    }

    /// Render the program in a sectioned LP-like text format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let vname = |v: VarId| self.vars[v.0].name.clone();
        let expr_str = |e: &LinExpr| {
            let mut s = String::new();
            for (k, (v, c)) in e.terms.iter().enumerate() {
                if k == 0 {
                    let _ = write!(s, "{} {}", fmt_coef_lead(*c), vname(*v));
                } else {
                    let _ = write!(s, " {} {}", fmt_coef(*c), vname(*v));
                }
            }
            if e.constant != 0.0 || e.terms.is_empty() {
                let _ = write!(s, " {}", fmt_coef_term(e.constant));
            }
            s
        };
        let _ = writeln!(out, "minimize");
        let _ = writeln!(out, "  {}", expr_str(&self.objective));
        let _ = writeln!(out, "variables");
        for def in &self.vars {
            let _ = writeln!(out, "  {} in [{}, {}]", def.name, def.lb, def.ub);
        }
        let _ = writeln!(out, "linear");
        for row in &self.rows {
            let (op, rhs) = match row.sense {
                RowSense::Eq(r) => ("=", r),
                RowSense::Le(r) => ("<=", r),
                RowSense::Ge(r) => (">=", r),
            };
            let _ = writeln!(out, "  {}: {} {} {}", row.name, expr_str(&row.expr), op, rhs);
        }
        let _ = writeln!(out, "soc");
        for soc in &self.socs {
            let terms: Vec<String> = soc.norm_terms.iter().map(&expr_str).collect();
            let _ = writeln!(
                out,
                "  {}: {} >= norm({})",
                soc.name,
                expr_str(&soc.radius),
                terms.join("; ")
            );
        }
        let _ = writeln!(out, "psd");
        for blk in &self.psd_blocks {
            let _ = writeln!(out, "  {} dim {}", blk.name, blk.dim);
            for j in 0..blk.dim {
                for i in j..blk.dim {
                    let e = &blk.entries[PsdBlock::tri_index(blk.dim, i, j)];
                    if !e.is_zero() {
                        let _ = writeln!(out, "    [{},{}] = {}", i, j, expr_str(e));
                    }
                }
            }
        }
        out
    }
}

impl PsdBlock {
    /// Evaluate the block as a dense symmetric matrix at `x`.
    pub fn dense_at(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            for i in j..self.dim {
                let v = self.entries[PsdBlock::tri_index(self.dim, i, j)].eval(x);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

fn fmt_coef_lead(c: f64) -> String {
    if c < 0.0 {
        format!("-{}", -c)
    } else {
        format!("{}", c)
    }
}

fn fmt_coef(c: f64) -> String {
    if c < 0.0 {
        format!("- {}", -c)
    } else {
        format!("+ {}", c)
    }
}

fn fmt_coef_term(c: f64) -> String {
    if c < 0.0 {
        format!("- {}", -c)
    } else {
        format!("+ {}", c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tri_index_roundtrip() {
        let dim = 5;
        let mut seen = vec![false; PsdBlock::tri_len(dim)];
        for j in 0..dim {
            for i in j..dim {
                let k = PsdBlock::tri_index(dim, i, j);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn simplify_merges_terms() {
        let mut e = LinExpr::default();
        e.add_term(VarId(2), 1.0).add_term(VarId(0), 2.0).add_term(VarId(2), -1.0);
        let s = e.simplified();
        assert_eq!(s.terms, vec![(VarId(0), 2.0)]);
    }

    #[test]
    fn rotated_soc_feasibility_matches_product_form() {
        // u*v >= w^2 at sample points, via the compiled standard cone.
        let mut p = ConicProgram::new();
        let u = p.add_bounded_var("u", 0.0, f64::INFINITY);
        let v = p.add_bounded_var("v", 0.0, f64::INFINITY);
        let w = p.add_var("w");
        p.add_rotated_soc("rc", LinExpr::var(u), LinExpr::var(v), vec![LinExpr::var(w)]);
        for &(uv, vv, wv) in &[(1.0, 1.0, 0.5), (4.0, 1.0, 2.0), (0.25, 1.0, 0.6), (2.0, 0.0, 0.1)] {
            let x = {
                let mut x = vec![0.0; 3];
                x[u.0] = uv;
                x[v.0] = vv;
                x[w.0] = wv;
                x
            };
            let feas_product = uv * vv >= wv * wv;
            assert_eq!(p.violation(&x) <= 1e-12, feas_product, "({uv},{vv},{wv})");
        }
    }

    #[test]
    fn dump_contains_sections() {
        let mut p = ConicProgram::new();
        let x = p.add_bounded_var("x", 0.0, 10.0);
        p.add_ge("r0", LinExpr::var(x), 3.0);
        p.set_objective(LinExpr::var(x));
        let d = p.dump();
        for sec in ["minimize", "variables", "linear", "soc", "psd"] {
            assert!(d.contains(sec), "missing section {sec}");
        }
        assert!(d.contains("r0"));
    }
}
