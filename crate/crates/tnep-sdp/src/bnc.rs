//! Depth-first branch-and-cut over the expansion binaries.
//!
//! Nodes fix binaries and solve the cut-augmented continuous relaxation,
//! warm-started from the parent. A node is fathomed when its relaxation is
//! infeasible, when its bound cannot beat the incumbent, or when its
//! solution is integral; fractional nodes run a rounding heuristic and
//! branch on the most fractional binary, exploring the build-it child
//! first. Incumbents are accepted only after the fixed plan passes the
//! rank-one feasibility check, so the returned optimum is exact for the
//! mixed-integer SDP, not its relaxation.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use crate::conic::VarId;
use crate::cuts::{add_conic_cuts, add_fence_cuts, ConeCut, FenceCut};
use crate::solver::{solve_with_start, RawPoint, SolveResult, SolverSettings, SolverStatus};
use crate::tnep::{evaluate_plan, round_to_plan, ExpansionPlan, PlanOutcome, TnepModel};

/// Binaries are integral within this tolerance.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Absolute tolerance on bound-versus-incumbent comparisons.
pub const BOUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BncSettings {
    pub solver: SolverSettings,
    pub max_nodes: usize,
    /// Emit one progress line per node.
    pub log: bool,
}

impl Default for BncSettings {
    fn default() -> Self {
        // Node relaxations only need bounds good to well under the cost
        // granularity; the looser gap tolerance lets near-converged solves
        // that break down numerically still return their best iterate.
        let solver = SolverSettings { tol: 1e-6, ..SolverSettings::default() };
        BncSettings { solver, max_nodes: 100_000, log: false }
    }
}

/// One open node of the search tree.
#[derive(Debug, Clone)]
pub struct BnbNode {
    pub id: usize,
    pub depth: usize,
    pub fixed: HashMap<VarId, bool>,
    pub parent_bound: f64,
    warm: Option<RawPoint>,
}

/// Counters and timings of a completed search.
#[derive(Debug, Clone)]
pub struct SearchStats {
    pub nodes_solved: usize,
    pub nodes_fathomed_bound: usize,
    pub nodes_fathomed_infeasible: usize,
    pub incumbent_updates: usize,
    /// Relaxation bound at the root, `-inf` if the root solve failed.
    pub root_bound: f64,
    pub wall_time_sec: f64,
}

#[derive(Debug)]
pub enum BncOutcome {
    /// Proven global optimum.
    Optimal(ExpansionPlan),
    /// Search tree exhausted without any rank-one feasible plan.
    Infeasible,
    /// Node budget hit; the best incumbent so far, if any.
    NodeLimit(Option<ExpansionPlan>),
}

/// Most fractional branchable binary: per corridor only the lowest unfixed
/// position is branchable (the installation ordering makes higher ones
/// redundant); ties go to the larger build cost, then the lower variable id.
pub fn select_branch_var(
    model: &TnepModel,
    values: &[f64],
    fixed: &HashMap<VarId, bool>,
) -> Option<VarId> {
    let mut best: Option<(f64, f64, usize)> = None;
    for k in 0..model.net.corridors.len() {
        let lv = match model
            .corridor_lines(k)
            .find(|lv| lv.t > model.net.corridors[k].n_existing && !fixed.contains_key(&lv.alpha))
        {
            Some(lv) => lv,
            None => continue,
        };
        let frac = (values[lv.alpha.0] - 0.5).abs();
        let cost = model.net.corridors[k].c_build;
        let key = (frac, -cost, lv.alpha.0);
        if best.map_or(true, |b| key < b) {
            best = Some(key);
        }
    }
    best.map(|(_, _, id)| VarId(id))
}

fn is_integral(model: &TnepModel, values: &[f64]) -> bool {
    model.binaries.iter().all(|v| {
        let a = values[v.0];
        a < INTEGRALITY_TOL || a > 1.0 - INTEGRALITY_TOL
    })
}

/// Rounding heuristic: per-corridor circuit counts from the summed relaxed
/// alphas, clamped to the corridor range.
pub fn round_heuristic(model: &TnepModel, values: &[f64]) -> Vec<usize> {
    round_to_plan(model, values)
}

struct Search<'a> {
    model: &'a TnepModel,
    settings: &'a BncSettings,
    incumbent: Option<ExpansionPlan>,
    stats: SearchStats,
    tried_plans: HashSet<Vec<usize>>,
    next_id: usize,
}

impl Search<'_> {
    fn incumbent_obj(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |p| p.objective())
    }

    /// Evaluate a candidate plan once; accept as incumbent on strict
    /// improvement with a rank-one certificate.
    fn try_plan(&mut self, additions: &[usize]) {
        if !self.tried_plans.insert(additions.to_vec()) {
            return;
        }
        let outcome = evaluate_plan(
            &self.model.net,
            additions,
            &self.model.psd_mode(),
            &self.settings.solver,
        );
        if let PlanOutcome::Feasible(plan) = outcome {
            if plan.is_rank1() && plan.objective() < self.incumbent_obj() - BOUND_TOL {
                self.incumbent = Some(plan);
                self.stats.incumbent_updates += 1;
            }
        }
    }

    fn log_node(&self, node: &BnbNode, status: &str, bound: f64) {
        if self.settings.log {
            println!(
                "node={} depth={} status={} bound={:.6} incumbent={:.6}",
                node.id,
                node.depth,
                status,
                bound,
                self.incumbent_obj()
            );
        }
    }
}

/// Run the search on a model with root-generated cuts attached to every
/// node, returning the outcome and the search statistics.
pub fn branch_and_cut(
    model: &TnepModel,
    fences: &[FenceCut],
    cones: &[ConeCut],
    settings: &BncSettings,
) -> (BncOutcome, SearchStats) {
    let start = Instant::now();
    let mut base = model.prog.clone();
    add_conic_cuts(model, &mut base, cones);
    add_fence_cuts(model, &mut base, fences);

    let mut search = Search {
        model,
        settings,
        incumbent: None,
        stats: SearchStats {
            nodes_solved: 0,
            nodes_fathomed_bound: 0,
            nodes_fathomed_infeasible: 0,
            incumbent_updates: 0,
            root_bound: f64::NEG_INFINITY,
            wall_time_sec: 0.0,
        },
        tried_plans: HashSet::new(),
        next_id: 1,
    };
    let mut stack = vec![BnbNode {
        id: 0,
        depth: 0,
        fixed: HashMap::new(),
        parent_bound: f64::NEG_INFINITY,
        warm: None,
    }];
    let mut hit_limit = false;

    while let Some(node) = stack.pop() {
        if search.stats.nodes_solved >= settings.max_nodes {
            hit_limit = true;
            break;
        }
        // Fence prefathom: if the fixings already cap some cut's left side
        // below its right side, every completion is infeasible.
        if !fences.is_empty() {
            let lo_off = corridor_lo_off(model, &node.fixed);
            let violated = fences.iter().any(|cut| {
                cut.terms.iter().filter(|&&(k, t)| t < lo_off[k]).count() < cut.rhs
            });
            if violated {
                search.stats.nodes_fathomed_infeasible += 1;
                search.log_node(&node, "infeasible", f64::INFINITY);
                continue;
            }
        }
        let mut prog = base.clone();
        if model.apply_fixings(&mut prog, &node.fixed).is_err() {
            // Children are built ordering-consistent, so this only guards
            // caller-supplied root fixings.
            search.stats.nodes_fathomed_infeasible += 1;
            continue;
        }
        let mut r = solve_with_start(&prog, &settings.solver, node.warm.as_ref());
        search.stats.nodes_solved += 1;
        if matches!(r.status, SolverStatus::NumericalError | SolverStatus::IterationLimit) {
            // One cold re-solve before giving up on the node's bound.
            r = solve_with_start(&prog, &settings.solver, None);
        }

        match r.status {
            SolverStatus::PrimalInfeasible => {
                search.log_node(&node, "infeasible", f64::INFINITY);
                search.stats.nodes_fathomed_infeasible += 1;
                continue;
            }
            SolverStatus::Optimal => {}
            _ => {
                // Unusable bound: inherit the parent's and branch, which
                // keeps the search exact at the cost of a wider tree.
                search.log_node(&node, "numerical", node.parent_bound);
                if node.id == 0 {
                    search.stats.root_bound = f64::NEG_INFINITY;
                }
                branch(&mut search, &mut stack, &node, node.parent_bound, None);
                continue;
            }
        }

        // Deflate the reported objective by the residual gap so a loosely
        // converged node never fathoms spuriously.
        let bound = r.objective - r.residuals.gap.max(0.0) * r.objective.abs().max(1.0);
        if node.id == 0 {
            search.stats.root_bound = bound;
        }
        if bound >= search.incumbent_obj() - BOUND_TOL {
            search.log_node(&node, "optimal", bound);
            search.stats.nodes_fathomed_bound += 1;
            continue;
        }

        if is_integral(model, &r.x) {
            // Integral nodes are leaves; acceptance still goes through the
            // rank-one check of the fixed plan.
            search.try_plan(&round_to_plan(model, &r.x));
            search.log_node(&node, "optimal", bound);
            continue;
        }

        search.try_plan(&round_heuristic(model, &r.x));
        search.log_node(&node, "optimal", bound);
        if bound >= search.incumbent_obj() - BOUND_TOL {
            search.stats.nodes_fathomed_bound += 1;
            continue;
        }
        branch(&mut search, &mut stack, &node, bound, Some(&r));
    }

    search.stats.wall_time_sec = start.elapsed().as_secs_f64();
    let stats = search.stats.clone();
    let outcome = match (search.incumbent, hit_limit) {
        (inc, true) => BncOutcome::NodeLimit(inc),
        (Some(plan), false) => BncOutcome::Optimal(plan),
        (None, false) => BncOutcome::Infeasible,
    };
    (outcome, stats)
}

/// Per corridor, the lowest position fixed off (`usize::MAX` when none).
fn corridor_lo_off(model: &TnepModel, fixed: &HashMap<VarId, bool>) -> Vec<usize> {
    let mut lo = vec![usize::MAX; model.net.corridors.len()];
    for (v, &on) in fixed {
        if !on {
            let lv = model.line_of_binary(*v).expect("binary");
            lo[lv.corridor] = lo[lv.corridor].min(lv.t);
        }
    }
    lo
}

fn branch(
    search: &mut Search,
    stack: &mut Vec<BnbNode>,
    node: &BnbNode,
    bound: f64,
    solution: Option<&SolveResult>,
) {
    let uniform = vec![0.5; search.model.prog.num_vars()];
    let values = solution.map_or(&uniform[..], |r| &r.x[..]);
    let var = match select_branch_var(search.model, values, &node.fixed) {
        Some(v) => v,
        None => {
            // Fully fixed node reached without a usable relaxation (both
            // solves failed); evaluate the implied plan directly so the
            // leaf is not lost.
            let mut adds = vec![0usize; search.model.net.corridors.len()];
            for (v, &on) in &node.fixed {
                if on {
                    let lv = search.model.line_of_binary(*v).expect("binary");
                    let c = &search.model.net.corridors[lv.corridor];
                    adds[lv.corridor] = adds[lv.corridor].max(lv.t - c.n_existing);
                }
            }
            search.try_plan(&adds);
            return;
        }
    };
    let warm = solution.map(|r| r.raw.clone());
    for on in [false, true] {
        let mut fixed = node.fixed.clone();
        fixed.insert(var, on);
        stack.push(BnbNode {
            id: search.next_id,
            depth: node.depth + 1,
            fixed,
            parent_bound: bound,
            warm: warm.clone(),
        });
        search.next_id += 1;
    }
}
