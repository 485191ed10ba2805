//! Valid inequalities for the expansion model.
//!
//! Two families tighten the root relaxation without cutting off any
//! integral solution: apparent-power cones on every circuit position (the
//! base model carries them only for the first circuit), and fence cuts —
//! counting inequalities requiring enough boundary circuits to cover a bus
//! area's real-power deficit. Fences are generated around single buses,
//! corridor endpoint pairs, and closed bus neighborhoods; both sides of each
//! fence are examined and cuts are stored under the canonical (surplus)
//! side.

use std::collections::{BTreeMap, BTreeSet};

use crate::conic::{ConicProgram, LinExpr};
use crate::network::{AreaError, PowerNetwork};
use crate::tnep::TnepModel;

/// A fence counting inequality: at least `rhs` circuits among the listed
/// candidate positions must be built.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FenceCut {
    /// Canonical fence side, as bus ids.
    pub area: BTreeSet<usize>,
    /// Unit-coefficient terms `(corridor index, circuit position t)`.
    pub terms: Vec<(usize, usize)>,
    pub rhs: usize,
}

/// Deficit-side data behind a fence cut.
#[derive(Debug, Clone)]
pub struct FenceRhs {
    pub rhs: usize,
    /// Per boundary corridor, the truncated highest useful position `n̄`.
    pub truncations: BTreeMap<usize, usize>,
}

fn ceil_ratio(deficit: f64, smax: f64) -> usize {
    (deficit / smax - 1e-9).ceil().max(1.0) as usize
}

/// Fence right-hand side and per-corridor truncations for an area read as
/// the deficit side, or `None` when the area has no deficit once existing
/// boundary circuits are credited.
pub fn fence_rhs(
    net: &PowerNetwork,
    area: &BTreeSet<usize>,
) -> Result<Option<FenceRhs>, AreaError> {
    let stats = net.fenced_area_stats(area)?;
    let existing_cap: f64 = stats
        .boundary
        .iter()
        .map(|&(k, _)| net.corridors[k].n_existing as f64 * net.corridors[k].smax)
        .sum();
    let deficit = stats.load_sum - stats.gen_cap_sum - existing_cap;
    if deficit <= 0.0 {
        return Ok(None);
    }
    let widest = stats
        .boundary
        .iter()
        .map(|&(k, _)| net.corridors[k].smax)
        .fold(0.0, f64::max);
    if widest <= 0.0 {
        // Deficit with no boundary corridors at all: no cut can express it.
        return Ok(None);
    }
    // With existing boundary circuits credited in the deficit, up to
    // ⌈D/S⌉ *additional* circuits per corridor can contribute, so the
    // truncated highest position is offset by the existing count.
    let truncations = stats
        .boundary
        .iter()
        .map(|&(k, _)| {
            let c = &net.corridors[k];
            (k, c.n_max.min(c.n_existing + ceil_ratio(deficit, c.smax)))
        })
        .collect();
    Ok(Some(FenceRhs { rhs: ceil_ratio(deficit, widest), truncations }))
}

/// The cut arising from reading `side` as the deficit side of its fence,
/// stored under the canonical side, or `None` when there is no deficit.
fn cut_from_side(net: &PowerNetwork, side: &BTreeSet<usize>) -> Option<FenceCut> {
    let data = fence_rhs(net, side).ok()??;
    let mut terms = Vec::new();
    for (&k, &cap) in &data.truncations {
        let c = &net.corridors[k];
        for t in c.n_existing + 1..=cap.min(c.n_max) {
            terms.push((k, t));
        }
    }
    terms.sort_unstable();
    Some(FenceCut { area: canonical_side(net, side), terms, rhs: data.rhs })
}

/// The side of the fence with smaller demand-minus-generation surplus;
/// ties go to the smaller side.
fn canonical_side(net: &PowerNetwork, side: &BTreeSet<usize>) -> BTreeSet<usize> {
    let comp: BTreeSet<usize> =
        net.buses.iter().map(|b| b.id).filter(|id| !side.contains(id)).collect();
    let surplus = |s: &BTreeSet<usize>| {
        let stats = net.fenced_area_stats(s).expect("proper side");
        stats.load_sum - stats.gen_cap_sum
    };
    let (ss, sc) = (surplus(side), surplus(&comp));
    if sc < ss - 1e-12 || (sc <= ss + 1e-12 && (comp.len(), &comp) < (side.len(), side)) {
        comp
    } else {
        side.clone()
    }
}

/// Fence cuts for the three area families: each single bus, each corridor
/// endpoint pair, and each closed neighborhood, reading both sides of every
/// fence. Deduplicated and deterministically ordered.
pub fn generate_fences(net: &PowerNetwork) -> Vec<FenceCut> {
    let adj = net.adjacency(false);
    let mut areas: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    for (i, b) in net.buses.iter().enumerate() {
        areas.insert([b.id].into());
        let mut hood: BTreeSet<usize> = adj.neighbors[i].iter().map(|&j| net.buses[j].id).collect();
        hood.insert(b.id);
        areas.insert(hood);
    }
    for c in &net.corridors {
        areas.insert([c.from_id, c.to_id].into());
    }

    let n = net.n_buses();
    let mut cuts: BTreeSet<FenceCut> = BTreeSet::new();
    for area in &areas {
        if area.is_empty() || area.len() >= n {
            continue;
        }
        let comp: BTreeSet<usize> =
            net.buses.iter().map(|b| b.id).filter(|id| !area.contains(id)).collect();
        for side in [area, &comp] {
            if let Some(cut) = cut_from_side(net, side) {
                cuts.insert(cut);
            }
        }
    }
    cuts.into_iter().collect()
}

/// Whether an integral plan (circuits added per corridor) satisfies a cut.
pub fn plan_satisfies_fence(net: &PowerNetwork, cut: &FenceCut, additions: &[usize]) -> bool {
    let built = cut
        .terms
        .iter()
        .filter(|&&(k, t)| t <= net.corridors[k].n_existing + additions[k])
        .count();
    built >= cut.rhs
}

/// Append fence cuts to a program as linear rows over the model's alphas.
pub fn add_fence_cuts(model: &TnepModel, prog: &mut ConicProgram, cuts: &[FenceCut]) {
    for (i, cut) in cuts.iter().enumerate() {
        let mut lhs = LinExpr::default();
        for &(k, t) in &cut.terms {
            let lv = model
                .corridor_lines(k)
                .find(|lv| lv.t == t)
                .expect("cut references existing position");
            lhs.add_term(lv.alpha, 1.0);
        }
        prog.add_ge(format!("fence{i}[{}]", ids_str(&cut.area)), lhs, cut.rhs as f64);
    }
}

/// One apparent-power cone `P² + Q² ≤ Smax²·α` of a circuit position and
/// orientation.
#[derive(Debug, Clone)]
pub struct ConeCut {
    pub corridor: usize,
    pub t: usize,
    pub from_side: bool,
    pub u: LinExpr,
    pub w: [LinExpr; 2],
}

/// Apparent-power cones for every circuit position and orientation. The
/// base model already carries the `t = 1` instances; [`add_conic_cuts`]
/// skips those.
pub fn conic_line_cuts(model: &TnepModel) -> Vec<ConeCut> {
    let mut out = Vec::new();
    for lv in &model.lines {
        let c = &model.net.corridors[lv.corridor];
        for from_side in [true, false] {
            let (p, q) = model.line_flow(lv, from_side);
            out.push(ConeCut {
                corridor: lv.corridor,
                t: lv.t,
                from_side,
                u: LinExpr::term(lv.alpha, c.smax * c.smax),
                w: [p, q],
            });
        }
    }
    out
}

/// Append the cone cuts for positions `t ≥ 2` to a program.
pub fn add_conic_cuts(model: &TnepModel, prog: &mut ConicProgram, cuts: &[ConeCut]) {
    for cut in cuts {
        if cut.t == 1 {
            continue;
        }
        let c = &model.net.corridors[cut.corridor];
        let dir = if cut.from_side {
            format!("{}->{}", c.from_id, c.to_id)
        } else {
            format!("{}->{}", c.to_id, c.from_id)
        };
        prog.add_rotated_soc(
            format!("smax{}[{dir}]", cut.t),
            cut.u.clone(),
            LinExpr::constant(1.0),
            cut.w.to_vec(),
        );
    }
}

fn ids_str(area: &BTreeSet<usize>) -> String {
    area.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(",")
}

/// Render a cut in the text format emitted by the CLI.
pub fn format_fence(net: &PowerNetwork, cut: &FenceCut) -> String {
    let terms = cut
        .terms
        .iter()
        .map(|&(k, t)| {
            let c = &net.corridors[k];
            format!("alpha[{}-{},{t}]", c.from_id, c.to_id)
        })
        .collect::<Vec<_>>()
        .join(" + ");
    format!("fence area={{{}}} : {terms} >= {}", ids_str(&cut.area), cut.rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opf::PsdMode;
    use crate::solver::{solve, SolverSettings, SolverStatus};
    use crate::tnep::build_tnep;

    fn garver() -> PowerNetwork {
        crate::network::parse_case(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/garver6.json"))
            .unwrap()
    }

    fn greenfield() -> PowerNetwork {
        crate::network::parse_case(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../cases/garver6gf.json"
        ))
        .unwrap()
    }

    fn corridor(net: &PowerNetwork, f: usize, t: usize) -> usize {
        net.corridors.iter().position(|c| c.from_id == f && c.to_id == t).unwrap()
    }

    #[test]
    fn five_bus_fence_numbers() {
        let net = garver();
        let area: BTreeSet<usize> = [1, 2, 3, 4, 5].into();
        let data = fence_rhs(&net, &area).unwrap().unwrap();
        assert_eq!(data.rhs, 2);
        let want = [((1, 6), 3), ((2, 6), 2), ((3, 6), 2), ((4, 6), 2), ((5, 6), 3)];
        assert_eq!(data.truncations.len(), want.len());
        for ((f, t), cap) in want {
            assert_eq!(data.truncations[&corridor(&net, f, t)], cap, "{f}-{t}");
        }
        let cut = cut_from_side(&net, &area).unwrap();
        assert_eq!(cut.terms.len(), 12);
        assert_eq!(cut.area, [6].into());
    }

    #[test]
    fn surplus_area_yields_no_cut() {
        let net = garver();
        assert!(fence_rhs(&net, &[6].into()).unwrap().is_none());
        assert!(fence_rhs(&net, &[3].into()).unwrap().is_none());
    }

    #[test]
    fn fence_complement_shares_boundary() {
        let net = garver();
        for i in 0..net.n_buses() {
            let area: BTreeSet<usize> = [net.buses[i].id].into();
            let comp: BTreeSet<usize> =
                net.buses.iter().map(|b| b.id).filter(|id| !area.contains(id)).collect();
            let a = net.fenced_area_stats(&area).unwrap();
            let b = net.fenced_area_stats(&comp).unwrap();
            let ka: BTreeSet<usize> = a.boundary.iter().map(|&(k, _)| k).collect();
            let kb: BTreeSet<usize> = b.boundary.iter().map(|&(k, _)| k).collect();
            assert_eq!(ka, kb);
        }
    }

    #[test]
    fn greenfield_emits_single_node_fences() {
        let net = greenfield();
        let cuts = generate_fences(&net);
        assert!(!cuts.is_empty());
        // Bus 6 carries most generation; the rest of the system is in
        // deficit and the cut is stored under the single-node side.
        assert!(cuts.iter().any(|c| c.area == [6].into()), "{cuts:?}");
        for cut in &cuts {
            assert!(cut.rhs >= 1);
            for &(k, t) in &cut.terms {
                let c = &net.corridors[k];
                assert!(t > c.n_existing && t <= c.n_max);
                let inside = cut.area.contains(&c.from_id);
                assert_ne!(inside, cut.area.contains(&c.to_id), "term crosses boundary");
            }
        }
    }

    #[test]
    fn pinned_plans_satisfy_all_fences() {
        for (net, plan) in [
            (garver(), vec![(2, 6, 2), (3, 5, 2), (4, 6, 2)]),
            (greenfield(), vec![(1, 5, 1), (2, 3, 1), (2, 6, 2), (3, 5, 3), (4, 6, 3)]),
        ] {
            let mut adds = vec![0usize; net.corridors.len()];
            for (f, t, a) in plan {
                adds[corridor(&net, f, t)] = a;
            }
            for cut in generate_fences(&net) {
                assert!(
                    plan_satisfies_fence(&net, &cut, &adds),
                    "{}",
                    format_fence(&net, &cut)
                );
            }
        }
    }

    #[test]
    fn cone_cut_count_and_coverage() {
        let net = garver();
        let model = build_tnep(&net, &PsdMode::Full);
        let cuts = conic_line_cuts(&model);
        let want: usize = net.corridors.iter().map(|c| 2 * c.n_max).sum();
        assert_eq!(cuts.len(), want);
        let k = corridor(&net, 2, 6);
        assert_eq!(cuts.iter().filter(|c| c.corridor == k).count(), 2 * net.corridors[k].n_max);
    }

    #[test]
    fn cuts_tighten_root_bound() {
        let net = garver();
        let model = build_tnep(&net, &PsdMode::Full);
        let settings = SolverSettings::default();
        let plain = solve(&model.prog, &settings);
        assert_eq!(plain.status, SolverStatus::Optimal);

        let mut prog = model.prog.clone();
        add_conic_cuts(&model, &mut prog, &conic_line_cuts(&model));
        add_fence_cuts(&model, &mut prog, &generate_fences(&net));
        let strengthened = solve(&prog, &settings);
        assert_eq!(strengthened.status, SolverStatus::Optimal);
        assert!(
            strengthened.objective >= plain.objective - 1e-6,
            "{} < {}",
            strengthened.objective,
            plain.objective
        );
        // The fences around the import-constrained buses move the bound.
        assert!(
            strengthened.objective > plain.objective + 1.0,
            "cuts did not bite: {} vs {}",
            strengthened.objective,
            plain.objective
        );
    }

    #[test]
    fn fence_text_format() {
        let net = garver();
        let cut = cut_from_side(&net, &[1, 2, 3, 4, 5].into()).unwrap();
        let line = format_fence(&net, &cut);
        assert!(line.starts_with("fence area={6} : "), "{line}");
        assert!(line.ends_with(">= 2"), "{line}");
        assert!(line.contains("alpha[1-6,1]"), "{line}");
        assert!(line.contains("alpha[5-6,3]"), "{line}");
        assert!(!line.contains("alpha[2-6,3]"), "{line}");
    }
}
