//! Generate the fence valid inequalities for a case and sanity-check them
//! against the fully built network. Usage: `fence_cuts [case-file]`.

use tnep_sdp::cuts::{format_fence, generate_fences, plan_satisfies_fence};
use tnep_sdp::parse_case;

fn main() -> anyhow::Result<()> {
    let case = std::env::args().nth(1).unwrap_or_else(|| "cases/garver6.json".into());
    let net = parse_case(&case)?;

    let fences = generate_fences(&net);
    println!("case {case}: {} fence cuts", fences.len());

    let mut lines: Vec<String> = fences.iter().map(|c| format_fence(&net, c)).collect();
    lines.sort();
    for line in &lines {
        println!("  {line}");
    }

    // A maximal build (every corridor at n_max) must satisfy every fence:
    // each cut's right-hand side is a lower bound on circuits any feasible
    // plan needs across the fence.
    let full: Vec<usize> = net.corridors.iter().map(|c| c.n_max - c.n_existing).collect();
    let ok = fences.iter().all(|c| plan_satisfies_fence(&net, c, &full));
    println!("maximal build satisfies all fences: {ok}");

    let empty = vec![0usize; net.corridors.len()];
    let violated = fences.iter().filter(|c| !plan_satisfies_fence(&net, c, &empty)).count();
    println!("fences violated by building nothing: {violated} of {}", fences.len());
    Ok(())
}
