//! Expansion-planning MISDP over the lifted voltage matrix.
//!
//! Each candidate circuit position `t` in a corridor gets a binary `alpha`
//! and its own surrogate copies of the lifted entries it touches. Big-M rows
//! tie the surrogates to zero when the circuit is absent and to the global
//! entries when present, so per-circuit flows are linear in the surrogates.
//! Installation is sequential (`alpha^t <= alpha^{t-1}`), existing circuits
//! are pinned on, and the root program relaxes the binaries to `[0, 1]`.

use std::collections::HashMap;

use nalgebra::Complex;

use crate::conic::{ConicProgram, LinExpr, VarId};
use crate::network::PowerNetwork;
use crate::opf::{build_sdp_opf, extract_rank1, hermitian_from_solution, PsdMode, XVars};
use crate::solver::{solve, SolveResult, SolverSettings, SolverStatus};
use crate::sparsity::{chordal_decomposition, complete_psd, CliqueDecomposition};

/// Rank-ratio threshold under which a lifted solution counts as rank-one.
pub const RANK1_TOL: f64 = 1e-5;

/// Variables attached to one circuit position of a corridor.
#[derive(Debug, Clone)]
pub struct LineVars {
    /// Corridor index in the network.
    pub corridor: usize,
    /// Circuit position, 1-based; positions `<= nExisting` are pinned on.
    pub t: usize,
    pub alpha: VarId,
    /// Surrogate of the diagonal entry at the corridor `from` bus.
    pub x_from: VarId,
    /// Surrogate of the diagonal entry at the corridor `to` bus.
    pub x_to: VarId,
    /// Surrogate of `Re X` for the endpoint pair in ascending bus order.
    pub re: VarId,
    /// Surrogate of `Im X` for the endpoint pair in ascending bus order.
    pub im: VarId,
}

/// Signalled by [`TnepModel::fix_binaries`] when requested fixings violate
/// the sequential-installation ordering on some corridor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingContradiction {
    pub corridor: usize,
}

/// The compiled expansion model.
pub struct TnepModel {
    pub net: PowerNetwork,
    pub prog: ConicProgram,
    pub x: XVars,
    pub pg: Vec<VarId>,
    pub qg: Vec<VarId>,
    pub lines: Vec<LineVars>,
    /// Candidate-circuit alphas in deterministic (corridor, t) order; these
    /// are the variables branched on.
    pub binaries: Vec<VarId>,
    /// Bus subsets carrying PSD blocks.
    pub blocks: Vec<Vec<usize>>,
    /// Handle into the objective: investment part and loss-penalty part.
    pub investment_terms: Vec<(VarId, f64)>,
    binary_pos: HashMap<usize, usize>,
}

impl TnepModel {
    /// Line-variable sets of one corridor, ascending in `t`.
    pub fn corridor_lines(&self, corridor: usize) -> impl Iterator<Item = &LineVars> {
        self.lines.iter().filter(move |lv| lv.corridor == corridor)
    }

    /// The line set owning a binary, if the variable is one.
    pub fn line_of_binary(&self, v: VarId) -> Option<&LineVars> {
        self.binary_pos.get(&v.0).map(|&i| &self.lines[i])
    }

    /// Directed per-circuit flow `(P, Q)` of a line set, from the corridor
    /// `from` bus when `from_side` and from the `to` bus otherwise.
    pub fn line_flow(&self, lv: &LineVars, from_side: bool) -> (LinExpr, LinExpr) {
        let c = &self.net.corridors[lv.corridor];
        let (g, b, bsh) = (c.g, c.b, c.bsh);
        let (a, o) = if from_side { (c.from, c.to) } else { (c.to, c.from) };
        let diag = if from_side { lv.x_from } else { lv.x_to };
        // The stored Im surrogate is for ascending endpoint order; flip the
        // sign for the descending orientation.
        let im_sign = if a < o { 1.0 } else { -1.0 };
        let p = LinExpr::term(diag, g)
            .plus(&LinExpr::term(lv.re, -g))
            .plus(&LinExpr::term(lv.im, -b * im_sign));
        let q = LinExpr::term(diag, -(b + bsh / 2.0))
            .plus(&LinExpr::term(lv.re, b))
            .plus(&LinExpr::term(lv.im, -g * im_sign));
        (p.simplified(), q.simplified())
    }

    /// The PSD mode the model was built with, reconstructed from its blocks.
    pub fn psd_mode(&self) -> PsdMode {
        if self.blocks.len() == 1 && self.blocks[0].len() == self.net.n_buses() {
            PsdMode::Full
        } else {
            PsdMode::Cliques(self.blocks.clone())
        }
    }

    /// Investment part of the objective at a solution.
    pub fn investment_at(&self, x: &[f64]) -> f64 {
        self.investment_terms.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    /// Copy of the program with the listed binaries pinned, propagating the
    /// sequential-installation ordering: fixing a position on pins every
    /// lower position, fixing one off pins every higher position.
    pub fn fix_binaries(
        &self,
        fixed: &HashMap<VarId, bool>,
    ) -> Result<ConicProgram, OrderingContradiction> {
        let mut prog = self.prog.clone();
        self.apply_fixings(&mut prog, fixed)?;
        Ok(prog)
    }

    /// [`Self::fix_binaries`] applied in place to a program sharing this
    /// model's variable layout (e.g. a cut-augmented copy).
    pub fn apply_fixings(
        &self,
        prog: &mut ConicProgram,
        fixed: &HashMap<VarId, bool>,
    ) -> Result<(), OrderingContradiction> {
        for k in 0..self.net.corridors.len() {
            // Highest position fixed on and lowest fixed off in the corridor.
            let mut hi_on = 0usize;
            let mut lo_off = usize::MAX;
            for lv in self.corridor_lines(k) {
                match fixed.get(&lv.alpha) {
                    Some(true) => hi_on = hi_on.max(lv.t),
                    Some(false) => lo_off = lo_off.min(lv.t),
                    None => {}
                }
            }
            if self.net.corridors[k].n_existing > 0 {
                hi_on = hi_on.max(self.net.corridors[k].n_existing);
            }
            if hi_on >= lo_off {
                return Err(OrderingContradiction { corridor: k });
            }
            for lv in self.corridor_lines(k) {
                if lv.t <= hi_on {
                    prog.set_bounds(lv.alpha, 1.0, 1.0);
                } else if lv.t >= lo_off {
                    prog.set_bounds(lv.alpha, 0.0, 0.0);
                }
            }
        }
        Ok(())
    }
}

/// Build the TNEP MISDP with binaries relaxed to `[0, 1]`.
pub fn build_tnep(net: &PowerNetwork, mode: &PsdMode) -> TnepModel {
    let blocks = match mode {
        PsdMode::Full => vec![(0..net.n_buses()).collect::<Vec<_>>()],
        PsdMode::Cliques(cliques) => cliques.clone(),
    };
    let mut prog = ConicProgram::new();
    let pairs = {
        let mut set = std::collections::BTreeSet::new();
        for c in &net.corridors {
            set.insert((c.from.min(c.to), c.from.max(c.to)));
        }
        for blk in &blocks {
            for (i, &a) in blk.iter().enumerate() {
                for &b in &blk[i + 1..] {
                    set.insert((a.min(b), a.max(b)));
                }
            }
        }
        set.into_iter().collect()
    };
    let x = XVars::allocate(&mut prog, net, pairs);
    let mut pg = Vec::new();
    let mut qg = Vec::new();
    for (k, g) in net.generators.iter().enumerate() {
        let id = net.buses[g.bus].id;
        pg.push(prog.add_bounded_var(format!("Pg[{k}@{id}]"), g.pmin, g.pmax));
        qg.push(prog.add_bounded_var(format!("Qg[{k}@{id}]"), g.qmin, g.qmax));
    }

    let mut lines: Vec<LineVars> = Vec::new();
    let mut binaries = Vec::new();
    let mut binary_pos = HashMap::new();
    let n = net.n_buses();
    let mut p_inj: Vec<LinExpr> = vec![LinExpr::default(); n];
    let mut q_inj: Vec<LinExpr> = vec![LinExpr::default(); n];

    for (k, c) in net.corridors.iter().enumerate() {
        let (l, m) = (c.from, c.to);
        let (bl, bm) = (&net.buses[l], &net.buses[m]);
        let (fid, tid) = (c.from_id, c.to_id);
        let cap = bl.vmax * bm.vmax;
        let mut prev_alpha: Option<VarId> = None;
        let mut alpha_sum = LinExpr::default();
        for t in 1..=c.n_max {
            let existing = t <= c.n_existing;
            let lb = if existing { 1.0 } else { 0.0 };
            let alpha = prog.add_bounded_var(format!("a[{fid}-{tid},{t}]"), lb, 1.0);
            let x_from =
                prog.add_bounded_var(format!("Xs[{fid}({fid}-{tid}),{t}]"), 0.0, bl.vmax * bl.vmax);
            let x_to =
                prog.add_bounded_var(format!("Xs[{tid}({fid}-{tid}),{t}]"), 0.0, bm.vmax * bm.vmax);
            let re = prog.add_bounded_var(format!("ReXs[{fid}-{tid},{t}]"), 0.0, cap);
            let im = prog.add_bounded_var(format!("ImXs[{fid}-{tid},{t}]"), -cap, cap);
            let lv = LineVars { corridor: k, t, alpha, x_from, x_to, re, im };

            if !existing {
                binary_pos.insert(alpha.0, lines.len());
                binaries.push(alpha);
            }
            alpha_sum.add_term(alpha, 1.0);
            if let Some(prev) = prev_alpha {
                prog.add_le(
                    format!("ord[{fid}-{tid},{t}]"),
                    LinExpr::var(alpha).plus(&LinExpr::term(prev, -1.0)),
                    0.0,
                );
            }
            prev_alpha = Some(alpha);

            // On/off linking of the surrogates: zero when alpha = 0, equal
            // to the global entries when alpha = 1.
            for (tag, diag, bus) in [("f", x_from, l), ("t", x_to, m)] {
                let bb = &net.buses[bus];
                let (lo, hi) = (bb.vmin * bb.vmin, bb.vmax * bb.vmax);
                prog.add_ge(
                    format!("don{tag}[{fid}-{tid},{t}]"),
                    LinExpr::var(diag).plus(&LinExpr::term(alpha, -lo)),
                    0.0,
                );
                prog.add_le(
                    format!("dup{tag}[{fid}-{tid},{t}]"),
                    LinExpr::var(diag).plus(&LinExpr::term(alpha, -hi)),
                    0.0,
                );
                // Global minus surrogate within (1 - alpha) band.
                let gap = LinExpr::var(x.diag[bus]).plus(&LinExpr::term(diag, -1.0));
                prog.add_ge(
                    format!("glo{tag}[{fid}-{tid},{t}]"),
                    gap.clone().plus(&LinExpr::term(alpha, lo)),
                    lo,
                );
                prog.add_le(
                    format!("ghi{tag}[{fid}-{tid},{t}]"),
                    gap.plus(&LinExpr::term(alpha, hi)),
                    hi,
                );
            }
            prog.add_le(
                format!("reup[{fid}-{tid},{t}]"),
                LinExpr::var(re).plus(&LinExpr::term(alpha, -cap)),
                0.0,
            );
            prog.add_le(
                format!("imup[{fid}-{tid},{t}]"),
                LinExpr::var(im).plus(&LinExpr::term(alpha, -cap)),
                0.0,
            );
            prog.add_ge(
                format!("imlo[{fid}-{tid},{t}]"),
                LinExpr::var(im).plus(&LinExpr::term(alpha, cap)),
                0.0,
            );
            let re_gap = x.re_expr(l, m).plus(&LinExpr::term(re, -1.0));
            prog.add_ge(format!("grelo[{fid}-{tid},{t}]"), re_gap.clone(), 0.0);
            prog.add_le(
                format!("greup[{fid}-{tid},{t}]"),
                re_gap.plus(&LinExpr::term(alpha, cap)),
                cap,
            );
            // Global Im in ascending endpoint order to match the surrogate.
            let (lo_b, hi_b) = (l.min(m), l.max(m));
            let im_gap = x.im_expr(lo_b, hi_b).plus(&LinExpr::term(im, -1.0));
            prog.add_ge(
                format!("gimlo[{fid}-{tid},{t}]"),
                im_gap.clone().plus(&LinExpr::term(alpha, -cap)),
                -cap,
            );
            prog.add_le(
                format!("gimup[{fid}-{tid},{t}]"),
                im_gap.plus(&LinExpr::term(alpha, cap)),
                cap,
            );

            lines.push(lv);
        }
        if c.n_max > 0 {
            prog.add_ge(format!("nmin[{fid}-{tid}]"), alpha_sum.clone(), c.n_min as f64);
            prog.add_le(format!("nmax[{fid}-{tid}]"), alpha_sum, c.n_max as f64);
        }
    }

    // Flow aggregation into the nodal balance and the first-circuit
    // apparent-power cone, both orientations.
    let model_stub = TnepModel {
        net: net.clone(),
        prog: ConicProgram::new(),
        x: x.clone(),
        pg: pg.clone(),
        qg: qg.clone(),
        lines: lines.clone(),
        binaries: binaries.clone(),
        blocks: blocks.clone(),
        investment_terms: Vec::new(),
        binary_pos: binary_pos.clone(),
    };
    for lv in &lines {
        let c = &net.corridors[lv.corridor];
        for from_side in [true, false] {
            let bus = if from_side { c.from } else { c.to };
            let (p, q) = model_stub.line_flow(lv, from_side);
            p_inj[bus] = std::mem::take(&mut p_inj[bus]).plus(&p);
            q_inj[bus] = std::mem::take(&mut q_inj[bus]).plus(&q);
            if lv.t == 1 {
                let dir = if from_side {
                    format!("{}->{}", c.from_id, c.to_id)
                } else {
                    format!("{}->{}", c.to_id, c.from_id)
                };
                prog.add_rotated_soc(
                    format!("smax1[{dir}]"),
                    LinExpr::term(lv.alpha, c.smax * c.smax),
                    LinExpr::constant(1.0),
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
            gen_p.plus(&p_inj[i].scaled(-1.0)).simplified(),
            net.buses[i].pd,
        );
        prog.add_eq(
            format!("balQ[{id}]"),
            gen_q.plus(&q_inj[i].scaled(-1.0)).simplified(),
            net.buses[i].qd,
        );
    }

    for blk in &blocks {
        let entries = x.embedding_entries(blk);
        let name = format!(
            "psd[{}]",
            blk.iter().map(|&i| net.buses[i].id.to_string()).collect::<Vec<_>>().join(",")
        );
        prog.add_psd_block(name, 2 * blk.len(), entries);
    }

    // Objective: build cost of candidate circuits plus the loss penalty on
    // total MW generation.
    let mut obj = LinExpr::default();
    let mut investment_terms = Vec::new();
    for lv in &lines {
        let c = &net.corridors[lv.corridor];
        if lv.t > c.n_existing {
            obj.add_term(lv.alpha, c.c_build);
            investment_terms.push((lv.alpha, c.c_build));
        }
    }
    for &v in &pg {
        obj.add_term(v, net.loss_penalty * net.s_base);
    }
    prog.set_objective(obj);

    TnepModel {
        net: net.clone(),
        prog,
        x,
        pg,
        qg,
        lines,
        binaries,
        blocks,
        investment_terms,
        binary_pos,
    }
}

/// A concrete expansion decision with its evaluation artifacts.
#[derive(Debug, Clone)]
pub struct ExpansionPlan {
    /// Circuits added per corridor, aligned with the network corridor list.
    pub additions: Vec<usize>,
    /// Build cost, in the case's cost unit.
    pub investment: f64,
    /// Loss-penalty part of the objective at the evaluated dispatch.
    pub loss_term: f64,
    /// Voltage phasors recovered from the rank-one factor.
    pub volts: Vec<Complex<f64>>,
    /// Second-to-first eigenvalue ratio of the lifted matrix.
    pub rank_ratio: f64,
}

impl ExpansionPlan {
    pub fn objective(&self) -> f64 {
        self.investment + self.loss_term
    }

    pub fn is_rank1(&self) -> bool {
        self.rank_ratio <= RANK1_TOL
    }
}

/// Outcome of checking a fixed plan against the AC feasibility SDP.
#[derive(Debug)]
pub enum PlanOutcome {
    Feasible(ExpansionPlan),
    Infeasible,
    SolverFailure(SolverStatus),
}

/// Solve the continuous SDP with the plan's circuits in service and recover
/// the rank-one voltages if the relaxation is exact.
pub fn evaluate_plan(
    net: &PowerNetwork,
    additions: &[usize],
    mode: &PsdMode,
    settings: &SolverSettings,
) -> PlanOutcome {
    assert_eq!(additions.len(), net.corridors.len());
    let circuits: Vec<usize> =
        net.corridors.iter().zip(additions).map(|(c, &a)| c.n_existing + a).collect();
    if circuits.iter().zip(&net.corridors).any(|(&n, c)| n > c.n_max) {
        return PlanOutcome::Infeasible;
    }
    let model = build_sdp_opf(net, &circuits, mode);
    let r = solve(&model.prog, settings);
    match r.status {
        SolverStatus::Optimal => {}
        SolverStatus::PrimalInfeasible => return PlanOutcome::Infeasible,
        other => return PlanOutcome::SolverFailure(other),
    }
    let (xmat, _) = hermitian_from_solution(&model.x, &r.x);
    let full = match mode {
        PsdMode::Full => xmat,
        PsdMode::Cliques(_) => {
            let decomp = plan_decomposition(net);
            complete_psd(&xmat, &decomp)
        }
    };
    // Each energized island carries its own phase reference, and buses with
    // no in-service circuit have unconstrained lifted cross terms, so the
    // rank test has to run per connected component of the built network.
    let mut adj = crate::graph::Adjacency::new(net.n_buses());
    for (k, c) in net.corridors.iter().enumerate() {
        if circuits[k] > 0 {
            adj.add_edge(c.from, c.to);
        }
    }
    let mut volts = vec![Complex::new(0.0, 0.0); net.n_buses()];
    let mut rank_ratio: f64 = 0.0;
    for comp in adj.components() {
        if comp.len() == 1 {
            volts[comp[0]] = Complex::new(full[(comp[0], comp[0])].re.max(0.0).sqrt(), 0.0);
            continue;
        }
        let sub = nalgebra::DMatrix::from_fn(comp.len(), comp.len(), |i, j| {
            full[(comp[i], comp[j])]
        });
        let (vsub, ratio) = extract_rank1(&sub);
        for (i, &b) in comp.iter().enumerate() {
            volts[b] = vsub[i];
        }
        rank_ratio = rank_ratio.max(ratio);
    }
    let investment: f64 =
        net.corridors.iter().zip(additions).map(|(c, &a)| a as f64 * c.c_build).sum();
    let loss_term: f64 =
        model.pg.iter().map(|v| r.x[v.0]).sum::<f64>() * net.loss_penalty * net.s_base;
    PlanOutcome::Feasible(ExpansionPlan {
        additions: additions.to_vec(),
        investment,
        loss_term,
        volts,
        rank_ratio,
    })
}

/// Chordal decomposition of the corridor graph (all corridors, since even
/// unbuilt candidates reference their lifted entries).
pub fn plan_decomposition(net: &PowerNetwork) -> CliqueDecomposition {
    chordal_decomposition(&net.adjacency(false))
}

/// PSD mode for a network under the chordal decomposition.
pub fn clique_mode(net: &PowerNetwork) -> PsdMode {
    PsdMode::Cliques(plan_decomposition(net).cliques)
}

/// Round a relaxed binary assignment to a plan: per corridor, the summed
/// alphas rounded to the nearest count, clamped to the candidate range.
pub fn round_to_plan(model: &TnepModel, x: &[f64]) -> Vec<usize> {
    let mut adds = vec![0usize; model.net.corridors.len()];
    for (k, c) in model.net.corridors.iter().enumerate() {
        let total: f64 =
            model.corridor_lines(k).filter(|lv| lv.t > c.n_existing).map(|lv| x[lv.alpha.0]).sum();
        let rounded = total.round().max(0.0) as usize;
        let cap = c.n_max - c.n_existing;
        adds[k] = rounded.min(cap);
        if c.n_existing + adds[k] < c.n_min {
            adds[k] = c.n_min - c.n_existing;
        }
    }
    adds
}

/// Solve the relaxed program of a model (optionally with extra rows already
/// added by the caller) and report the result unchanged.
pub fn solve_relaxation(prog: &ConicProgram, settings: &SolverSettings) -> SolveResult {
    solve(prog, settings)
}
