//! Solve the continuous root relaxation of the expansion MISDP with and
//! without the valid inequalities and compare the bounds.
//! Usage: `root_relaxation [case-file] [--sparsity]`.

use tnep_sdp::cuts::{add_conic_cuts, add_fence_cuts, conic_line_cuts, generate_fences};
use tnep_sdp::opf::PsdMode;
use tnep_sdp::solver::SolverStatus;
use tnep_sdp::tnep::{build_tnep, clique_mode, round_to_plan, solve_relaxation};
use tnep_sdp::{parse_case, SolverSettings};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let case = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .cloned()
        .unwrap_or_else(|| "cases/garver6.json".into());
    let sparsity = args.iter().any(|a| a == "--sparsity");

    let net = parse_case(&case)?;
    let mode = if sparsity { clique_mode(&net) } else { PsdMode::Full };
    let model = build_tnep(&net, &mode);
    let settings = SolverSettings::default();

    let plain = solve_relaxation(&model.prog, &settings);
    anyhow::ensure!(plain.status == SolverStatus::Optimal, "bare root: {:?}", plain.status);
    println!("case {case} ({} binaries)", model.binaries.len());
    println!("  root bound, no cuts:   {:.6}", plain.objective);

    let mut strengthened = model.prog.clone();
    let fences = generate_fences(&net);
    let cones = conic_line_cuts(&model);
    add_fence_cuts(&model, &mut strengthened, &fences);
    add_conic_cuts(&model, &mut strengthened, &cones);
    let cut = solve_relaxation(&strengthened, &settings);
    anyhow::ensure!(cut.status == SolverStatus::Optimal, "cut root: {:?}", cut.status);
    println!(
        "  root bound, with cuts: {:.6}  ({} fences, {} conic rows)",
        cut.objective,
        fences.len(),
        cones.len()
    );
    println!("  bound lift: {:+.6}", cut.objective - plain.objective);

    let rounded = round_to_plan(&model, &cut.x);
    println!("  nearest integral plan to the cut root:");
    for (k, &a) in rounded.iter().enumerate() {
        if a > 0 {
            let c = &net.corridors[k];
            println!("    {}-{}: +{a} circuits", c.from_id, c.to_id);
        }
    }
    Ok(())
}
