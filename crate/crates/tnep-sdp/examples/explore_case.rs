//! Load a case file and print its topology and balance figures.
//! Usage: `explore_case [case-file]`.

use tnep_sdp::parse_case;

fn main() -> anyhow::Result<()> {
    let case = std::env::args().nth(1).unwrap_or_else(|| "cases/garver6.json".into());
    let net = parse_case(&case)?;

    let existing: usize = net.corridors.iter().map(|c| c.n_existing).sum();
    let candidates: usize = net.corridors.iter().map(|c| c.n_max - c.n_existing).sum();
    let greenfield = net.corridors.iter().filter(|c| c.n_existing == 0).count();

    println!("case {case}");
    println!(
        "  {} buses, {} corridors ({} greenfield), {} existing circuits, {} candidates",
        net.n_buses(),
        net.corridors.len(),
        greenfield,
        existing,
        candidates
    );
    println!(
        "  load {:.1} MW / generation capacity {:.1} MW (base {:.0} MVA)",
        net.total_pd() * net.s_base,
        net.total_pmax() * net.s_base,
        net.s_base
    );

    println!("  corridors (from-to  existing/max  smax MW  build cost):");
    for c in &net.corridors {
        println!(
            "    {:>3}-{:<3}  {}/{}  {:>7.1}  {:>10.1}",
            c.from_id,
            c.to_id,
            c.n_existing,
            c.n_max,
            c.smax * net.s_base,
            c.c_build
        );
    }

    println!(
        "  largest connected component of the existing network: {} of {} buses",
        largest_existing_component(&net),
        net.n_buses()
    );
    Ok(())
}

/// Size of the largest connected component of the existing network.
fn largest_existing_component(net: &tnep_sdp::PowerNetwork) -> usize {
    let n = net.n_buses();
    let mut adj = vec![Vec::new(); n];
    for c in &net.corridors {
        if c.n_existing > 0 {
            adj[c.from].push(c.to);
            adj[c.to].push(c.from);
        }
    }
    let mut seen = vec![false; n];
    let mut best = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut stack = vec![s];
        seen[s] = true;
        let mut size = 0;
        while let Some(u) = stack.pop() {
            size += 1;
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        best = best.max(size);
    }
    best
}
