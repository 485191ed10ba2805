//! Chordal decomposition of a case's candidate network: clique tree,
//! fill-in, and the PSD block sizes it yields compared to the monolithic
//! formulation. Usage: `chordal [case-file]`.

use tnep_sdp::opf::build_sdp_opf;
use tnep_sdp::opf::PsdMode;
use tnep_sdp::parse_case;
use tnep_sdp::tnep::plan_decomposition;

fn main() -> anyhow::Result<()> {
    let case = std::env::args().nth(1).unwrap_or_else(|| "cases/ieee24.json".into());
    let net = parse_case(&case)?;

    let dec = plan_decomposition(&net);
    let n = net.n_buses();
    let max_clique = dec.cliques.iter().map(Vec::len).max().unwrap_or(0);

    println!("case {case}: {} buses", n);
    println!(
        "  chordal cover: {} fill edges, {} maximal cliques, largest {}",
        dec.fill_edges.len(),
        dec.cliques.len(),
        max_clique
    );
    println!("  running intersection property holds: {}", dec.has_running_intersection());
    println!("{}", dec.dump());

    // Variable counts of the two PSD formulations of the same feasible set.
    let circuits: Vec<usize> = net.corridors.iter().map(|c| c.n_max).collect();
    let full = build_sdp_opf(&net, &circuits, &PsdMode::Full);
    let dec_model = build_sdp_opf(&net, &circuits, &PsdMode::Cliques(dec.cliques.clone()));
    println!(
        "  monolithic OPF SDP: one {n}x{n} block, {} lifted pairs",
        full.x.pairs.len()
    );
    println!(
        "  decomposed OPF SDP: {} blocks of size <= {max_clique}, {} lifted pairs",
        dec_model.blocks.len(),
        dec_model.x.pairs.len()
    );
    Ok(())
}
