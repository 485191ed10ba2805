//! Command-line front end for the expansion planner.
//!
//! Modes: `solve` (full branch-and-cut), `relax` (root relaxation bound),
//! `cuts` (emit fence cuts as text), `validate` (check a plan file against
//! the AC feasibility SDP). Exit codes: 0 optimal/feasible, 1 infeasible,
//! 2 input error, 3 solver failure, 4 node or iteration limit.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tnep_sdp::bnc::{branch_and_cut, BncOutcome, BncSettings};
use tnep_sdp::cuts::{
    add_conic_cuts, add_fence_cuts, conic_line_cuts, format_fence, generate_fences,
};
use tnep_sdp::opf::PsdMode;
use tnep_sdp::tnep::{build_tnep, clique_mode, evaluate_plan, ExpansionPlan, PlanOutcome};
use tnep_sdp::{parse_case, PowerNetwork, SolverSettings, SolverStatus};

#[derive(Parser)]
#[command(name = "tnep", about = "Exact AC transmission expansion planning")]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Full branch-and-cut to a certified optimal plan.
    Solve(RunArgs),
    /// Root relaxation bound only.
    Relax(RunArgs),
    /// Emit the fence cuts for a case.
    Cuts(RunArgs),
    /// Evaluate a plan file against the AC feasibility SDP.
    Validate(RunArgs),
}

fn switch(v: &str) -> Result<bool, String> {
    match v {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected 'on' or 'off', got '{other}'")),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Case file (JSON).
    #[arg(long)]
    case: PathBuf,
    /// Valid inequalities at the root: on|off.
    #[arg(long, value_parser = switch, default_value = "on", action = clap::ArgAction::Set)]
    cuts: bool,
    /// Chordal PSD decomposition: on|off.
    #[arg(long, value_parser = switch, default_value = "on", action = clap::ArgAction::Set)]
    sparsity: bool,
    /// Relative duality-gap tolerance for node relaxations.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Interior-point iteration limit per solve.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Branch-and-cut node budget.
    #[arg(long, default_value_t = 100_000)]
    max_nodes: usize,
    /// Plan file for `validate`: array of {from, to, circuitsAdded}.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Write the summary JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Summary {
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_term: Option<f64>,
    plan: Vec<PlanEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    root_bound: Option<f64>,
    nodes: usize,
    wall_time_sec: f64,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PlanEntry {
    from: usize,
    to: usize,
    circuits_added: usize,
}

fn plan_entries(net: &PowerNetwork, additions: &[usize]) -> Vec<PlanEntry> {
    net.corridors
        .iter()
        .zip(additions)
        .filter(|(_, &a)| a > 0)
        .map(|(c, &a)| PlanEntry { from: c.from_id, to: c.to_id, circuits_added: a })
        .collect()
}

fn read_plan(net: &PowerNetwork, path: &PathBuf) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path:?}"))?;
    let entries: Vec<PlanEntry> = serde_json::from_str(&text).context("malformed plan file")?;
    let index: BTreeMap<(usize, usize), usize> = net
        .corridors
        .iter()
        .enumerate()
        .map(|(k, c)| ((c.from_id, c.to_id), k))
        .collect();
    let mut adds = vec![0usize; net.corridors.len()];
    for e in entries {
        let key = (e.from.min(e.to), e.from.max(e.to));
        let k = *index
            .get(&key)
            .ok_or_else(|| anyhow!("plan references unknown corridor {}-{}", e.from, e.to))?;
        adds[k] += e.circuits_added;
    }
    Ok(adds)
}

fn emit(out: &Option<PathBuf>, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

/// (exit code, summary) for each mode; `Err` means an input error (exit 2).
fn run(mode: &Mode) -> Result<(u8, Option<Summary>)> {
    let args = match mode {
        Mode::Solve(a) | Mode::Relax(a) | Mode::Cuts(a) | Mode::Validate(a) => a,
    };
    let net = parse_case(&args.case).with_context(|| format!("loading {:?}", args.case))?;
    let psd = if args.sparsity { clique_mode(&net) } else { PsdMode::Full };
    let solver = SolverSettings { tol: args.tol, max_iter: args.max_iter, ..Default::default() };

    match mode {
        Mode::Cuts(_) => {
            let mut lines: Vec<String> =
                generate_fences(&net).iter().map(|c| format_fence(&net, c)).collect();
            lines.sort();
            for line in lines {
                println!("{line}");
            }
            Ok((0, None))
        }
        Mode::Relax(_) => {
            let start = std::time::Instant::now();
            let model = build_tnep(&net, &psd);
            let mut prog = model.prog.clone();
            if args.cuts {
                add_conic_cuts(&model, &mut prog, &conic_line_cuts(&model));
                add_fence_cuts(&model, &mut prog, &generate_fences(&net));
            }
            let r = tnep_sdp::solver::solve(&prog, &solver);
            let (code, status) = match r.status {
                SolverStatus::Optimal => (0, "optimal"),
                SolverStatus::PrimalInfeasible => (1, "infeasible"),
                SolverStatus::IterationLimit => (4, "iterationLimit"),
                _ => (3, "solverFailure"),
            };
            let bound = (code == 0).then(|| r.objective);
            Ok((
                code,
                Some(Summary {
                    status: status.into(),
                    cost: None,
                    loss_term: None,
                    plan: Vec::new(),
                    root_bound: bound,
                    nodes: 1,
                    wall_time_sec: start.elapsed().as_secs_f64(),
                }),
            ))
        }
        Mode::Validate(_) => {
            let plan_path =
                args.plan.as_ref().ok_or_else(|| anyhow!("validate requires --plan"))?;
            let adds = read_plan(&net, plan_path)?;
            let start = std::time::Instant::now();
            let (code, status, plan): (u8, &str, Option<ExpansionPlan>) =
                match evaluate_plan(&net, &adds, &psd, &solver) {
                    PlanOutcome::Feasible(p) if p.is_rank1() => (0, "optimal", Some(p)),
                    PlanOutcome::Feasible(_) => (3, "notCertified", None),
                    PlanOutcome::Infeasible => (1, "infeasible", None),
                    PlanOutcome::SolverFailure(_) => (3, "solverFailure", None),
                };
            Ok((
                code,
                Some(Summary {
                    status: status.into(),
                    cost: plan.as_ref().map(|p| p.investment),
                    loss_term: plan.as_ref().map(|p| p.loss_term),
                    plan: plan_entries(&net, &adds),
                    root_bound: None,
                    nodes: 0,
                    wall_time_sec: start.elapsed().as_secs_f64(),
                }),
            ))
        }
        Mode::Solve(_) => {
            let model = build_tnep(&net, &psd);
            let (fences, cones) = if args.cuts {
                (generate_fences(&net), conic_line_cuts(&model))
            } else {
                (Vec::new(), Vec::new())
            };
            let settings = BncSettings { solver, max_nodes: args.max_nodes, log: true };
            let (outcome, stats) = branch_and_cut(&model, &fences, &cones, &settings);
            let root_bound = stats.root_bound.is_finite().then_some(stats.root_bound);
            let make = |status: &str, plan: Option<&ExpansionPlan>| Summary {
                status: status.into(),
                cost: plan.map(|p| p.investment),
                loss_term: plan.map(|p| p.loss_term),
                plan: plan.map_or(Vec::new(), |p| plan_entries(&net, &p.additions)),
                root_bound,
                nodes: stats.nodes_solved,
                wall_time_sec: stats.wall_time_sec,
            };
            let (code, summary) = match &outcome {
                BncOutcome::Optimal(plan) => {
                    for e in plan_entries(&net, &plan.additions) {
                        let c = net.corridors
                            [net.corridors.iter().position(|c| c.from_id == e.from && c.to_id == e.to).unwrap()]
                        .c_build;
                        println!("add {}-{}: {} circuits (cost {})", e.from, e.to, e.circuits_added, c * e.circuits_added as f64);
                    }
                    (0, make("optimal", Some(plan)))
                }
                BncOutcome::Infeasible => (1, make("infeasible", None)),
                BncOutcome::NodeLimit(best) => (4, make("nodeLimit", best.as_ref())),
            };
            Ok((code, Some(summary)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.mode {
        Mode::Solve(a) | Mode::Relax(a) | Mode::Cuts(a) | Mode::Validate(a) => a.out.clone(),
    };
    match run(&cli.mode) {
        Ok((code, summary)) => {
            if let Some(s) = &summary {
                if let Err(e) = emit(&out, s) {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
