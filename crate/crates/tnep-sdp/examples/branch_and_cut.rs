//! Full exact expansion planning run: build the MISDP, generate root cuts,
//! and search. Usage: `branch_and_cut [case-file] [--no-cuts] [--sparsity]`.

use tnep_sdp::bnc::{branch_and_cut, BncOutcome, BncSettings};
use tnep_sdp::cuts::{conic_line_cuts, generate_fences};
use tnep_sdp::opf::PsdMode;
use tnep_sdp::tnep::{build_tnep, clique_mode};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let case = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .cloned()
        .unwrap_or_else(|| "cases/garver6.json".into());
    let with_cuts = !args.iter().any(|a| a == "--no-cuts");
    let sparsity = args.iter().any(|a| a == "--sparsity");

    let net = tnep_sdp::parse_case(&case)?;
    let mode = if sparsity { clique_mode(&net) } else { PsdMode::Full };
    let model = build_tnep(&net, &mode);
    let (fences, cones) = if with_cuts {
        (generate_fences(&net), conic_line_cuts(&model))
    } else {
        (Vec::new(), Vec::new())
    };
    println!("case={case} binaries={} fences={} cones={}", model.binaries.len(), fences.len(), cones.len());

    let settings = BncSettings { log: true, ..BncSettings::default() };
    let (outcome, stats) = branch_and_cut(&model, &fences, &cones, &settings);
    println!("{stats:?}");
    match outcome {
        BncOutcome::Optimal(plan) => {
            println!("optimal objective {:.4} (investment {:.2})", plan.objective(), plan.investment);
            for (k, &a) in plan.additions.iter().enumerate() {
                if a > 0 {
                    let c = &net.corridors[k];
                    println!("  {}-{}: +{a} circuits (cost {})", c.from_id, c.to_id, a as f64 * c.c_build);
                }
            }
        }
        BncOutcome::Infeasible => println!("no feasible expansion"),
        BncOutcome::NodeLimit(best) => println!("node limit; best = {best:?}"),
    }
    Ok(())
}
