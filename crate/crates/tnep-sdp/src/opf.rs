//! SDP relaxation of the AC optimal power flow.
//!
//! The rectangular AC equations are lifted to the Hermitian matrix
//! `X = V V*`: diagonals are squared voltage magnitudes, off-diagonals carry
//! the cross terms, and every power-flow quantity becomes linear in X.
//! Dropping the rank-one condition and keeping `X >= 0` (as the real
//! symmetric embedding `[[Re X, -Im X], [Im X, Re X]]`) yields a conic
//! program. The PSD condition can be imposed on the full matrix or on
//! principal submatrices given by the cliques of a chordal cover of the
//! network graph, which is equivalent by PSD matrix completion.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix};

use crate::conic::{ConicProgram, LinExpr, PsdBlock, VarId};
use crate::network::{Corridor, PowerNetwork};

/// How the PSD condition on the lifted matrix is imposed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PsdMode {
    /// One PSD block over all buses.
    Full,
    /// One PSD block per bus subset (cliques of a chordal cover).
    Cliques(Vec<Vec<usize>>),
}

/// Variables of the lifted Hermitian matrix over a sparsity pattern.
#[derive(Debug, Clone)]
pub struct XVars {
    pub n: usize,
    /// X_ll, bounded by squared voltage limits.
    pub diag: Vec<VarId>,
    /// Pairs `(l, m)` with `l < m` carrying off-diagonal variables.
    pub pairs: Vec<(usize, usize)>,
    pair_idx: HashMap<(usize, usize), usize>,
    /// Re X_lm per pair.
    pub re: Vec<VarId>,
    /// Im X_lm per pair, for the ordered pair `l < m`.
    pub im: Vec<VarId>,
}

impl XVars {
    /// Allocate lifted variables for the given pairs, with magnitude bounds
    /// from the bus voltage limits.
    pub fn allocate(prog: &mut ConicProgram, net: &PowerNetwork, pairs: Vec<(usize, usize)>) -> Self {
        let n = net.n_buses();
        let diag = net
            .buses
            .iter()
            .map(|b| {
                prog.add_bounded_var(format!("X[{0},{0}]", b.id), b.vmin * b.vmin, b.vmax * b.vmax)
            })
            .collect();
        let mut pair_idx = HashMap::new();
        let mut re = Vec::with_capacity(pairs.len());
        let mut im = Vec::with_capacity(pairs.len());
        for (k, &(l, m)) in pairs.iter().enumerate() {
            debug_assert!(l < m && m < n);
            let cap = net.buses[l].vmax * net.buses[m].vmax;
            let (lid, mid) = (net.buses[l].id, net.buses[m].id);
            re.push(prog.add_bounded_var(format!("ReX[{lid},{mid}]"), -cap, cap));
            im.push(prog.add_bounded_var(format!("ImX[{lid},{mid}]"), -cap, cap));
            pair_idx.insert((l, m), k);
        }
        XVars { n, diag, pairs, pair_idx, re, im }
    }

    pub fn pair(&self, l: usize, m: usize) -> Option<usize> {
        let key = if l < m { (l, m) } else { (m, l) };
        self.pair_idx.get(&key).copied()
    }

    /// Re X_lm as an expression (symmetric in l, m).
    pub fn re_expr(&self, l: usize, m: usize) -> LinExpr {
        if l == m {
            return LinExpr::var(self.diag[l]);
        }
        let k = self.pair(l, m).expect("pair in pattern");
        LinExpr::var(self.re[k])
    }

    /// Im X_lm as an expression; antisymmetric in l, m.
    pub fn im_expr(&self, l: usize, m: usize) -> LinExpr {
        if l == m {
            return LinExpr::constant(0.0);
        }
        let k = self.pair(l, m).expect("pair in pattern");
        if l < m {
            LinExpr::var(self.im[k])
        } else {
            LinExpr::term(self.im[k], -1.0)
        }
    }

    /// Lower-triangle entries of the real symmetric embedding
    /// `[[Re X, -Im X], [Im X, Re X]]` restricted to the bus subset, for use
    /// as a PSD block of dimension `2 |subset|`.
    pub fn embedding_entries(&self, subset: &[usize]) -> Vec<LinExpr> {
        let k = subset.len();
        let dim = 2 * k;
        let mut entries = vec![LinExpr::default(); PsdBlock::tri_len(dim)];
        // Local index -> bus; blocks: 0..k real part, k..2k imaginary rows.
        for (a, &la) in subset.iter().enumerate() {
            for (b, &lb) in subset.iter().enumerate().skip(a) {
                // (b, a) in the Re block and (k + b, k + a) in the copy.
                let re = self.re_expr(lb, la);
                entries[PsdBlock::tri_index(dim, b, a)] = re.clone();
                entries[PsdBlock::tri_index(dim, k + b, k + a)] = re;
            }
        }
        for (a, &la) in subset.iter().enumerate() {
            for (b, &lb) in subset.iter().enumerate() {
                // Entry (k + b, a) = Im X_{lb, la}.
                entries[PsdBlock::tri_index(dim, k + b, a)] = self.im_expr(lb, la);
            }
        }
        entries
    }
}

/// Directed per-circuit branch flows as linear expressions in the lifted
/// variables: from `l` toward the other end of the corridor.
pub fn branch_flow(x: &XVars, c: &Corridor, from_l: bool) -> (LinExpr, LinExpr) {
    let (l, m) = if from_l { (c.from, c.to) } else { (c.to, c.from) };
    let (g, b, bsh) = (c.g, c.b, c.bsh);
    // P_lm = g X_ll - g Re X_lm - b Im X_lm
    // Q_lm = -(b + bsh/2) X_ll + b Re X_lm - g Im X_lm
    let p = LinExpr::term(x.diag[l], g)
        .plus(&x.re_expr(l, m).scaled(-g))
        .plus(&x.im_expr(l, m).scaled(-b));
    let q = LinExpr::term(x.diag[l], -(b + bsh / 2.0))
        .plus(&x.re_expr(l, m).scaled(b))
        .plus(&x.im_expr(l, m).scaled(-g));
    (p.simplified(), q.simplified())
}

/// The SDP-OPF model for a fixed set of in-service circuit counts.
pub struct OpfModel {
    pub prog: ConicProgram,
    pub x: XVars,
    /// Active and reactive output per generator, per-unit.
    pub pg: Vec<VarId>,
    pub qg: Vec<VarId>,
    /// Bus subsets carrying PSD blocks.
    pub blocks: Vec<Vec<usize>>,
}

/// Pairs required by the PSD blocks plus all corridor endpoints.
fn pattern_pairs(net: &PowerNetwork, blocks: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut set = std::collections::BTreeSet::new();
    for c in &net.corridors {
        set.insert((c.from.min(c.to), c.from.max(c.to)));
    }
    for blk in blocks {
        for (i, &a) in blk.iter().enumerate() {
            for &b in &blk[i + 1..] {
                set.insert((a.min(b), a.max(b)));
            }
        }
    }
    set.into_iter().collect()
}

/// Build the SDP relaxation of the AC OPF with `circuits[k]` circuits in
/// service on corridor `k`. The objective is the polynomial generation cost.
pub fn build_sdp_opf(net: &PowerNetwork, circuits: &[usize], mode: &PsdMode) -> OpfModel {
    assert_eq!(circuits.len(), net.corridors.len());
    let blocks = match mode {
        PsdMode::Full => vec![(0..net.n_buses()).collect::<Vec<_>>()],
        PsdMode::Cliques(cliques) => cliques.clone(),
    };
    let mut prog = ConicProgram::new();
    let x = XVars::allocate(&mut prog, net, pattern_pairs(net, &blocks));
    let mut pg = Vec::new();
    let mut qg = Vec::new();
    for (k, g) in net.generators.iter().enumerate() {
        let id = net.buses[g.bus].id;
        pg.push(prog.add_bounded_var(format!("Pg[{k}@{id}]"), g.pmin, g.pmax));
        qg.push(prog.add_bounded_var(format!("Qg[{k}@{id}]"), g.qmin, g.qmax));
    }

    add_balance_and_limits(&mut prog, net, &x, &pg, &qg, |k| {
        let nc = circuits[k] as f64;
        (LinExpr::constant(nc), nc)
    });

    for blk in &blocks {
        let entries = x.embedding_entries(blk);
        let name = format!(
            "psd[{}]",
            blk.iter().map(|&i| net.buses[i].id.to_string()).collect::<Vec<_>>().join(",")
        );
        prog.add_psd_block(name, 2 * blk.len(), entries);
    }

    // Generation cost on MW output; the quadratic term uses an epigraph
    // variable t >= c2 (base Pg)^2 via a rotated cone.
    let mut obj = LinExpr::default();
    for (k, g) in net.generators.iter().enumerate() {
        obj.add_constant(g.c0);
        obj.add_term(pg[k], g.c1 * net.s_base);
        if g.c2 > 0.0 {
            let t = prog.add_bounded_var(format!("tq[{k}]"), 0.0, f64::INFINITY);
            prog.add_rotated_soc(
                format!("cost2[{k}]"),
                LinExpr::var(t),
                LinExpr::constant(1.0),
                vec![LinExpr::term(pg[k], g.c2.sqrt() * net.s_base)],
            );
            obj.add_term(t, 1.0);
        }
    }
    prog.set_objective(obj);

    OpfModel { prog, x, pg, qg, blocks }
}

/// Shared constraint block: bus power balance and per-circuit thermal
/// limits. `multiplier(k)` gives, per corridor, the expression scaling the
/// per-circuit flow in the bus balance and the circuit count for limits.
pub(crate) fn add_balance_and_limits(
    prog: &mut ConicProgram,
    net: &PowerNetwork,
    x: &XVars,
    pg: &[VarId],
    qg: &[VarId],
    multiplier: impl Fn(usize) -> (LinExpr, f64),
) {
    let n = net.n_buses();
    let mut p_inj: Vec<LinExpr> = vec![LinExpr::default(); n];
    let mut q_inj: Vec<LinExpr> = vec![LinExpr::default(); n];
    for (k, c) in net.corridors.iter().enumerate() {
        let (mult, count) = multiplier(k);
        for &from_l in &[true, false] {
            let bus = if from_l { c.from } else { c.to };
            let (p, q) = branch_flow(x, c, from_l);
            // Only constant multipliers appear here; expression multipliers
            // are handled by the expansion model with explicit flow vars.
            debug_assert!(mult.terms.is_empty());
            p_inj[bus] = std::mem::take(&mut p_inj[bus]).plus(&p.scaled(mult.constant));
            q_inj[bus] = std::mem::take(&mut q_inj[bus]).plus(&q.scaled(mult.constant));
            if count > 0.0 {
                let id_f = net.buses[bus].id;
                let id_t = net.buses[if from_l { c.to } else { c.from }].id;
                prog.add_soc(
                    format!("smax[{id_f}->{id_t}]"),
                    LinExpr::constant(c.smax),
                    vec![p, q],
                );
            }
        }
    }
    for i in 0..n {
        let mut gen_p = LinExpr::default();
        let mut gen_q = LinExpr::default();
        for (k, g) in net.generators.iter().enumerate() {
            if g.bus == i {
                gen_p.add_term(pg[k], 1.0);
                gen_q.add_term(qg[k], 1.0);
            }
        }
        let id = net.buses[i].id;
        prog.add_eq(
            format!("balP[{id}]"),
            gen_p.plus(&p_inj[i].scaled(-1.0)),
            net.buses[i].pd,
        );
        prog.add_eq(
            format!("balQ[{id}]"),
            gen_q.plus(&q_inj[i].scaled(-1.0)),
            net.buses[i].qd,
        );
    }
}

/// Assemble the Hermitian lifted matrix from a solution vector. Entries
/// outside the pattern are zero and flagged `false` in the mask.
pub fn hermitian_from_solution(x: &XVars, sol: &[f64]) -> (DMatrix<Complex<f64>>, DMatrix<bool>) {
    let n = x.n;
    let mut m = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    let mut mask = DMatrix::from_element(n, n, false);
    for i in 0..n {
        m[(i, i)] = Complex::new(sol[x.diag[i].0], 0.0);
        mask[(i, i)] = true;
    }
    for (k, &(l, mm)) in x.pairs.iter().enumerate() {
        let v = Complex::new(sol[x.re[k].0], sol[x.im[k].0]);
        m[(l, mm)] = v;
        m[(mm, l)] = v.conj();
        mask[(l, mm)] = true;
        mask[(mm, l)] = true;
    }
    (m, mask)
}

/// Rank-one voltage extraction from a (completed) Hermitian lifted matrix:
/// returns the voltage phasors scaled from the dominant eigenpair and the
/// rank ratio `lambda_2 / lambda_1`.
pub fn extract_rank1(xmat: &DMatrix<Complex<f64>>) -> (Vec<Complex<f64>>, f64) {
    let n = xmat.nrows();
    // Real embedding [[Re, -Im], [Im, Re]]; its spectrum doubles the
    // Hermitian spectrum.
    let mut emb = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            emb[(i, j)] = xmat[(i, j)].re;
            emb[(n + i, n + j)] = xmat[(i, j)].re;
            emb[(n + i, j)] = xmat[(i, j)].im;
            emb[(i, n + j)] = -xmat[(i, j)].im;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(emb);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]].max(0.0);
    // The embedding doubles each Hermitian eigenvalue, so the second
    // distinct one sits two positions down.
    let l2 = eig.eigenvalues[order[2]].max(0.0);
    let v = eig.eigenvectors.column(order[0]);
    let mut volts: Vec<Complex<f64>> = (0..n)
        .map(|i| Complex::new(v[i], v[n + i]) * (2.0 * l1).sqrt() / 2f64.sqrt())
        .collect();
    // Normalize the phase so the first bus angle is zero.
    if volts[0].norm() > 0.0 {
        let phase = volts[0] / volts[0].norm();
        for vv in volts.iter_mut() {
            *vv /= phase;
        }
    }
    let ratio = if l1 > 0.0 { l2 / l1 } else { f64::INFINITY };
    (volts, ratio)
}

/// Exact nonlinear AC flows at voltages `volts`: per-bus net injection
/// residuals `(P_gen_needed, Q_gen_needed)` given `circuits` per corridor,
/// and the per-circuit flow magnitudes for limit checks.
pub fn ac_injections(
    net: &PowerNetwork,
    circuits: &[usize],
    volts: &[Complex<f64>],
) -> Vec<(f64, f64)> {
    let n = net.n_buses();
    let mut inj = vec![(0.0, 0.0); n];
    for (k, c) in net.corridors.iter().enumerate() {
        let nc = circuits[k] as f64;
        if nc == 0.0 {
            continue;
        }
        let y = Complex::new(c.g, c.b);
        let ysh = Complex::new(0.0, c.bsh / 2.0);
        for &(l, m) in &[(c.from, c.to), (c.to, c.from)] {
            let vl = volts[l];
            let vm = volts[m];
            let s = vl * ((vl - vm) * y + vl * ysh).conj();
            inj[l].0 += nc * s.re;
            inj[l].1 += nc * s.im;
        }
    }
    inj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::PowerNetwork;
    use crate::solver::{solve, SolverSettings, SolverStatus};

    fn two_bus() -> PowerNetwork {
        let text = r#"{
          "sBase": 100.0, "lossPenalty": 0.0,
          "buses": [
            {"id": 1, "Pd": 0.0, "Qd": 0.0, "Vmin": 0.95, "Vmax": 1.05},
            {"id": 2, "Pd": 80.0, "Qd": 20.0, "Vmin": 0.95, "Vmax": 1.05}
          ],
          "generators": [
            {"bus": 1, "Pmin": 0.0, "Pmax": 200.0, "Qmin": -80.0, "Qmax": 120.0,
             "c2": 0.01, "c1": 5.0, "c0": 0.0}
          ],
          "corridors": [
            {"from": 1, "to": 2, "g": 1.923077, "b": -9.615385, "bsh": 0.02,
             "Smax": 150.0, "nExisting": 1, "nMin": 0, "nMax": 2, "cBuild": 10.0}
          ]
        }"#;
        PowerNetwork::from_json_str(text).unwrap()
    }

    #[test]
    fn two_bus_relaxation_is_rank1_and_ac_exact() {
        let net = two_bus();
        let model = build_sdp_opf(&net, &[1], &PsdMode::Full);
        let r = solve(&model.prog, &SolverSettings::default());
        assert_eq!(r.status, SolverStatus::Optimal);
        let (xmat, _) = hermitian_from_solution(&model.x, &r.x);
        let (volts, ratio) = extract_rank1(&xmat);
        assert!(ratio < 1e-5, "rank ratio {ratio}");
        // The extracted voltages satisfy the exact AC equations.
        let inj = ac_injections(&net, &[1], &volts);
        let pg = r.x[model.pg[0].0];
        let qg = r.x[model.qg[0].0];
        assert!((inj[0].0 - pg).abs() < 1e-4, "P slack {} vs {}", inj[0].0, pg);
        assert!((inj[0].1 - qg).abs() < 1e-4, "Q slack {} vs {}", inj[0].1, qg);
        assert!((inj[1].0 + net.buses[1].pd).abs() < 1e-4, "P load {}", inj[1].0);
        assert!((inj[1].1 + net.buses[1].qd).abs() < 1e-4, "Q load {}", inj[1].1);
        // Generation covers demand plus positive losses.
        assert!(pg > net.buses[1].pd && pg < net.buses[1].pd * 1.05);
        // Objective matches the polynomial cost at the solution.
        let mw = pg * net.s_base;
        let want = 0.01 * mw * mw + 5.0 * mw;
        assert!((r.objective - want).abs() < 1e-3 * want, "{} vs {want}", r.objective);
    }

    #[test]
    fn thermal_limit_binds_when_tightened() {
        let mut net = two_bus();
        net.corridors[0].smax = 0.5; // 50 MVA < 80 MW demand: infeasible.
        let model = build_sdp_opf(&net, &[1], &PsdMode::Full);
        let r = solve(&model.prog, &SolverSettings::default());
        assert_eq!(r.status, SolverStatus::PrimalInfeasible);
        // Two circuits carry the load again.
        let model2 = build_sdp_opf(&net, &[2], &PsdMode::Full);
        let r2 = solve(&model2.prog, &SolverSettings::default());
        assert_eq!(r2.status, SolverStatus::Optimal);
    }

    #[test]
    fn branch_flow_matches_rank1_product() {
        // For X = V V* the linear flow expressions equal the nonlinear ones.
        let net = two_bus();
        let c = &net.corridors[0];
        let v1 = Complex::new(1.02, 0.0);
        let v2 = Complex::new(0.97, -0.06);
        let mut prog = ConicProgram::new();
        let x = XVars::allocate(&mut prog, &net, vec![(0, 1)]);
        let sol = {
            let mut sol = vec![0.0; prog.num_vars()];
            sol[x.diag[0].0] = v1.norm_sqr();
            sol[x.diag[1].0] = v2.norm_sqr();
            let x12 = v1 * v2.conj();
            sol[x.re[0].0] = x12.re;
            sol[x.im[0].0] = x12.im;
            sol
        };
        let (p, q) = branch_flow(&x, c, true);
        let y = Complex::new(c.g, c.b);
        let ysh = Complex::new(0.0, c.bsh / 2.0);
        let s = v1 * ((v1 - v2) * y + v1 * ysh).conj();
        assert!((p.eval(&sol) - s.re).abs() < 1e-12, "{} vs {}", p.eval(&sol), s.re);
        assert!((q.eval(&sol) - s.im).abs() < 1e-12, "{} vs {}", q.eval(&sol), s.im);
        let (p2, q2) = branch_flow(&x, c, false);
        let s2 = v2 * ((v2 - v1) * y + v2 * ysh).conj();
        assert!((p2.eval(&sol) - s2.re).abs() < 1e-12);
        assert!((q2.eval(&sol) - s2.im).abs() < 1e-12);
    }

    #[test]
    fn embedding_entries_reproduce_hermitian_psd() {
        // A rank-one X = V V* makes every embedding block PSD; a sign flip
        // on Im breaks it.
        let net = two_bus();
        let mut prog = ConicProgram::new();
        let x = XVars::allocate(&mut prog, &net, vec![(0, 1)]);
        let entries = x.embedding_entries(&[0, 1]);
        prog.add_psd_block("emb", 4, entries);
        let v1 = Complex::new(1.0, 0.0);
        let v2 = Complex::new(0.98, -0.1);
        let mut sol = vec![0.0; prog.num_vars()];
        sol[x.diag[0].0] = v1.norm_sqr();
        sol[x.diag[1].0] = v2.norm_sqr();
        let x12 = v1 * v2.conj();
        sol[x.re[0].0] = x12.re;
        sol[x.im[0].0] = x12.im;
        assert!(prog.violation(&sol) < 1e-10);
        sol[x.im[0].0] = 0.5; // |X12|^2 > X11 X22 now
        assert!(prog.violation(&sol) > 1e-3);
    }

    #[test]
    fn extract_rank1_recovers_voltages() {
        let volts = [
            Complex::new(1.01, 0.0),
            Complex::new(0.99, -0.05),
            Complex::new(1.0, 0.03),
        ];
        let mut xmat = DMatrix::from_element(3, 3, Complex::new(0.0, 0.0));
        for i in 0..3 {
            for j in 0..3 {
                xmat[(i, j)] = volts[i] * volts[j].conj();
            }
        }
        let (rec, ratio) = extract_rank1(&xmat);
        assert!(ratio < 1e-12);
        for (a, b) in rec.iter().zip(&volts) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }
}
