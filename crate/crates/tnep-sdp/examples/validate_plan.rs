//! Check a candidate expansion plan against the AC feasibility SDP and
//! report its cost and the recovered operating point.
//! Usage: `validate_plan <case-file> <plan-file>` where the plan file is a
//! JSON array of `{"from": .., "to": .., "circuitsAdded": ..}` entries.

use serde::Deserialize;
use tnep_sdp::tnep::{clique_mode, evaluate_plan, PlanOutcome};
use tnep_sdp::{parse_case, PowerNetwork, SolverSettings};

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PlanEntry {
    from: usize,
    to: usize,
    circuits_added: usize,
}

fn read_plan(net: &PowerNetwork, path: &str) -> anyhow::Result<Vec<usize>> {
    let entries: Vec<PlanEntry> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut adds = vec![0usize; net.corridors.len()];
    for e in entries {
        let (lo, hi) = (e.from.min(e.to), e.from.max(e.to));
        let k = net
            .corridors
            .iter()
            .position(|c| c.from_id == lo && c.to_id == hi)
            .ok_or_else(|| anyhow::anyhow!("unknown corridor {}-{}", e.from, e.to))?;
        adds[k] += e.circuits_added;
    }
    Ok(adds)
}

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let case = args.next().unwrap_or_else(|| "cases/garver6.json".into());
    let plan_path = args.next().ok_or_else(|| anyhow::anyhow!("usage: validate_plan <case> <plan>"))?;

    let net = parse_case(&case)?;
    let adds = read_plan(&net, &plan_path)?;
    let mode = clique_mode(&net);

    match evaluate_plan(&net, &adds, &mode, &SolverSettings::default()) {
        PlanOutcome::Feasible(p) if p.is_rank1() => {
            println!("plan is AC-feasible and certified (rank ratio {:.2e})", p.rank_ratio);
            println!("investment {:.2}, loss term {:.4}", p.investment, p.loss_term);
            for (k, &a) in adds.iter().enumerate() {
                if a > 0 {
                    let c = &net.corridors[k];
                    println!("  {}-{}: +{a} circuits (cost {})", c.from_id, c.to_id, a as f64 * c.c_build);
                }
            }
            for (b, v) in net.buses.iter().zip(&p.volts) {
                println!(
                    "  bus {:>3}: |V| = {:.4}, angle = {:>7.3} deg",
                    b.id,
                    v.norm(),
                    v.arg().to_degrees()
                );
            }
        }
        PlanOutcome::Feasible(p) => {
            println!(
                "SDP is feasible but not rank one (ratio {:.2e}); plan is not certified",
                p.rank_ratio
            );
        }
        PlanOutcome::Infeasible => println!("plan is AC-infeasible"),
        PlanOutcome::SolverFailure(s) => anyhow::bail!("solver stopped with {s:?}"),
    }
    Ok(())
}
