//! Randomized property suites: fence-cut validity, branch-flow identities,
//! chordal decomposition invariants, solver duality and certificates, and
//! branch-and-cut consistency. Case budgets keep each suite well under five
//! minutes.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

use tnep_sdp::bnc::{branch_and_cut, BncOutcome, BncSettings};
use tnep_sdp::cuts::{generate_fences, plan_satisfies_fence};
use tnep_sdp::opf::{branch_flow, build_sdp_opf, PsdMode};
use tnep_sdp::solver::{solve, SolverStatus};
use tnep_sdp::sparsity::{chordal_decomposition, complete_psd};
use tnep_sdp::tnep::{build_tnep, clique_mode, evaluate_plan, PlanOutcome};
use tnep_sdp::{parse_case, ConicProgram, LinExpr, PowerNetwork, SolverSettings};

fn case(name: &str) -> PowerNetwork {
    let path = format!("{}/../../cases/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_case(&path).expect("bundled case file")
}

// ---------------------------------------------------------------- fences --

/// Maximum s-t flow by shortest augmenting paths; small dense graphs only.
fn max_flow(n: usize, arcs: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut cap = vec![vec![0.0f64; n]; n];
    for &(u, v, c) in arcs {
        cap[u][v] += c;
    }
    let mut flow = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 1e-9 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return flow;
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while v != s {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            cap[prev[v]][v] -= push;
            cap[v][prev[v]] += push;
            v = prev[v];
        }
        flow += push;
    }
}

/// Real-power transport feasibility: can generation reach every load through
/// the built circuits, capacities only (no impedances, no reactive power)?
fn transport_feasible(net: &PowerNetwork, additions: &[usize]) -> bool {
    let n = net.n_buses();
    let (s, t) = (n, n + 1);
    let mut arcs = Vec::new();
    for g in &net.generators {
        arcs.push((s, g.bus, g.pmax));
    }
    let mut demand = 0.0;
    for (i, b) in net.buses.iter().enumerate() {
        arcs.push((i, t, b.pd));
        demand += b.pd;
    }
    for (k, c) in net.corridors.iter().enumerate() {
        let cap = (c.n_existing + additions[k]) as f64 * c.smax;
        arcs.push((c.from, c.to, cap));
        arcs.push((c.to, c.from, cap));
    }
    max_flow(n + 2, &arcs, s, t) >= demand - 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Any plan that can even transport its real power satisfies every
    /// fence cut, so the cuts never exclude a feasible plan.
    #[test]
    fn fences_valid_for_transportable_plans(seed in 0u64..1_000_000) {
        for name in ["garver6.json", "garver6gf.json"] {
            let net = case(name);
            let fences = generate_fences(&net);
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            let mut rand = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            let adds: Vec<usize> = net
                .corridors
                .iter()
                .map(|c| (rand() as usize) % (c.n_max - c.n_existing + 1))
                .collect();
            if transport_feasible(&net, &adds) {
                for cut in &fences {
                    prop_assert!(
                        plan_satisfies_fence(&net, cut, &adds),
                        "{name}: transport-feasible plan {adds:?} violates fence {cut:?}"
                    );
                }
            }
        }
    }

    /// Conversely, a plan that violates a fence cut can never transport its
    /// real power.
    #[test]
    fn fence_violations_are_transport_infeasible(seed in 0u64..1_000_000) {
        let net = case("garver6.json");
        let fences = generate_fences(&net);
        let mut state = seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(1);
        let mut rand = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let adds: Vec<usize> = net
            .corridors
            .iter()
            .map(|c| (rand() as usize) % (c.n_max - c.n_existing + 1))
            .collect();
        if fences.iter().any(|cut| !plan_satisfies_fence(&net, cut, &adds)) {
            prop_assert!(!transport_feasible(&net, &adds));
        }
    }
}

// ----------------------------------------------------------- branch flow --

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The lifted linear branch-flow expressions evaluated at X = V V*
    /// reproduce the complex-arithmetic pi-model flows, and the two line
    /// ends sum to a nonnegative real loss.
    #[test]
    fn branch_flow_matches_complex_arithmetic(
        mags in proptest::collection::vec(0.9f64..1.1, 6),
        angs in proptest::collection::vec(-0.5f64..0.5, 6),
    ) {
        let net = case("garver6.json");
        let circuits: Vec<usize> = net.corridors.iter().map(|c| c.n_max).collect();
        let model = build_sdp_opf(&net, &circuits, &PsdMode::Full);

        let v: Vec<Complex<f64>> = mags
            .iter()
            .zip(&angs)
            .map(|(&m, &a)| Complex::from_polar(m, a))
            .collect();
        let mut x = vec![0.0; model.prog.num_vars()];
        for (l, &id) in model.x.diag.iter().enumerate() {
            x[id.0] = v[l].norm_sqr();
        }
        for (p, &(l, m)) in model.x.pairs.iter().enumerate() {
            let xi = v[l] * v[m].conj();
            x[model.x.re[p].0] = xi.re;
            x[model.x.im[p].0] = xi.im;
        }

        for c in &net.corridors {
            let y = Complex::new(c.g, c.b);
            for (from_l, l, m) in [(true, c.from, c.to), (false, c.to, c.from)] {
                let i = y * (v[l] - v[m]) + Complex::new(0.0, c.bsh / 2.0) * v[l];
                let s = v[l] * i.conj();
                let (pe, qe) = branch_flow(&model.x, c, from_l);
                prop_assert!((pe.eval(&x) - s.re).abs() < 1e-9, "P mismatch on {}-{}", c.from_id, c.to_id);
                prop_assert!((qe.eval(&x) - s.im).abs() < 1e-9, "Q mismatch on {}-{}", c.from_id, c.to_id);
            }
            let (pf, _) = branch_flow(&model.x, c, true);
            let (pt, _) = branch_flow(&model.x, c, false);
            prop_assert!(pf.eval(&x) + pt.eval(&x) >= -1e-9, "negative loss on {}-{}", c.from_id, c.to_id);
        }
    }
}

// -------------------------------------------------------------- sparsity --

/// Random adjacency as an edge set over `n` vertices.
fn random_edges(n: usize, picks: &[(usize, usize)]) -> Vec<(usize, usize)> {
    picks
        .iter()
        .map(|&(a, b)| (a % n, b % n))
        .filter(|&(a, b)| a != b)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// The chordal cover has the running-intersection property, covers every
    /// original edge with some clique, and its elimination ordering is
    /// perfect for the cover (later neighbors of each vertex form a clique).
    #[test]
    fn chordal_cover_invariants(
        n in 3usize..16,
        picks in proptest::collection::vec((0usize..16, 0usize..16), 0..40),
    ) {
        let edges = random_edges(n, &picks);
        let mut adj = tnep_sdp_adjacency(n, &edges);
        let dec = chordal_decomposition(&adj);

        prop_assert!(dec.has_running_intersection());
        for &(a, b) in &edges {
            prop_assert!(
                dec.cliques.iter().any(|c| c.contains(&a) && c.contains(&b)),
                "edge {a}-{b} not covered by any clique"
            );
        }

        // Cover = original edges plus fill; the ordering must be a perfect
        // elimination ordering of the cover.
        for &(a, b) in &dec.fill_edges {
            adj.add_edge(a, b);
        }
        let mut pos = vec![0usize; n];
        for (i, &v) in dec.ordering.iter().enumerate() {
            pos[v] = i;
        }
        for &v in &dec.ordering {
            let later: Vec<usize> =
                (0..n).filter(|&u| adj.has_edge(v, u) && pos[u] > pos[v]).collect();
            for (i, &a) in later.iter().enumerate() {
                for &b in &later[i + 1..] {
                    prop_assert!(adj.has_edge(a, b), "ordering not perfect at {v}: {a}-{b}");
                }
            }
        }
    }

    /// Completing a PSD matrix known on the clique pattern returns a PSD
    /// matrix that agrees with the input on every clique block.
    #[test]
    fn psd_completion_is_psd_and_consistent(
        n in 3usize..10,
        picks in proptest::collection::vec((0usize..10, 0usize..10), 2..20),
        re in proptest::collection::vec(-1.0f64..1.0, 20),
        im in proptest::collection::vec(-1.0f64..1.0, 20),
    ) {
        let edges = random_edges(n, &picks);
        let adj = tnep_sdp_adjacency(n, &edges);
        let dec = chordal_decomposition(&adj);

        // A genuinely PSD matrix of rank two from random factors.
        let f = |k: usize, i: usize| {
            Complex::new(re[(k * n + i) % re.len()], im[(k * n + i) % im.len()])
        };
        let mut xmat = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                xmat[(i, j)] = f(0, i) * f(0, j).conj() + f(1, i) * f(1, j).conj();
            }
            xmat[(i, i)] += Complex::new(0.1, 0.0);
        }

        let full = complete_psd(&xmat, &dec);
        for clique in &dec.cliques {
            for &a in clique {
                for &b in clique {
                    prop_assert!((full[(a, b)] - xmat[(a, b)]).norm() < 1e-9);
                }
            }
        }
        let herm = (full.clone() + full.adjoint()) * Complex::new(0.5, 0.0);
        let eigs = herm.symmetric_eigenvalues();
        let min = eigs.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        prop_assert!(min > -1e-7, "completion not PSD: min eigenvalue {min}");
    }
}

fn tnep_sdp_adjacency(n: usize, edges: &[(usize, usize)]) -> tnep_sdp::graph::Adjacency {
    let mut adj = tnep_sdp::graph::Adjacency::new(n);
    for &(a, b) in edges {
        adj.add_edge(a, b);
    }
    adj
}

// ---------------------------------------------------------------- solver --

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// On random feasible LPs the solver returns a near-feasible point whose
    /// objective is no worse than the known feasible point (weak duality
    /// against the construction witness).
    #[test]
    fn solver_beats_known_feasible_point(
        nv in 2usize..6,
        rows in 1usize..4,
        coefs in proptest::collection::vec(-2.0f64..2.0, 24),
        x0 in proptest::collection::vec(0.1f64..0.9, 6),
        c in proptest::collection::vec(-1.0f64..1.0, 6),
    ) {
        let mut prog = ConicProgram::new();
        let vars: Vec<_> = (0..nv).map(|i| prog.add_bounded_var(format!("x{i}"), 0.0, 1.0)).collect();
        for r in 0..rows {
            let mut expr = LinExpr::default();
            let mut rhs = 0.0;
            for (i, &v) in vars.iter().enumerate() {
                let a = coefs[(r * nv + i) % coefs.len()];
                expr.add_term(v, a);
                rhs += a * x0[i];
            }
            prog.add_eq(format!("r{r}"), expr, rhs);
        }
        let mut obj = LinExpr::default();
        for (i, &v) in vars.iter().enumerate() {
            obj.add_term(v, c[i]);
        }
        prog.set_objective(obj.clone());

        let r = solve(&prog, &SolverSettings::default());
        prop_assert_eq!(r.status, SolverStatus::Optimal);
        prop_assert!(prog.violation(&r.x) < 1e-6);
        let witness: f64 = (0..nv).map(|i| c[i] * x0[i]).sum();
        prop_assert!(r.objective <= witness + 1e-6, "objective {} above witness {witness}", r.objective);
    }

    /// Infeasible-by-construction programs are certified with a Farkas ray.
    #[test]
    fn infeasibility_is_certified(
        nv in 2usize..6,
        coefs in proptest::collection::vec(0.5f64..2.0, 6),
        gap in 0.5f64..3.0,
    ) {
        let mut prog = ConicProgram::new();
        let vars: Vec<_> = (0..nv).map(|i| prog.add_bounded_var(format!("x{i}"), 0.0, 1.0)).collect();
        // Nonnegative combination of bounded variables forced negative.
        let mut expr = LinExpr::default();
        for (i, &v) in vars.iter().enumerate() {
            expr.add_term(v, coefs[i]);
        }
        prog.add_eq("impossible", expr, -gap);
        prog.set_objective(LinExpr::var(vars[0]));

        let r = solve(&prog, &SolverSettings::default());
        prop_assert_eq!(r.status, SolverStatus::PrimalInfeasible);
        let (aty, bty) = r.farkas_violation(&prog);
        prop_assert!(aty < 1e-6, "Farkas ray not in the dual cone: {aty}");
        prop_assert!((bty - 1.0).abs() < 1e-6, "Farkas ray not normalized: {bty}");
    }
}

#[test]
fn solver_soc_projection_known_optimum() {
    // min c s.t. c >= ||(x-3, y-4)||, x,y in [0,1]: the distance from the
    // box to (3,4), attained at (1,1).
    let mut prog = ConicProgram::new();
    let x = prog.add_bounded_var("x", 0.0, 1.0);
    let y = prog.add_bounded_var("y", 0.0, 1.0);
    let c = prog.add_bounded_var("c", 0.0, f64::INFINITY);
    prog.add_soc(
        "dist",
        LinExpr::var(c),
        vec![
            LinExpr::var(x).plus(&LinExpr::constant(-3.0)),
            LinExpr::var(y).plus(&LinExpr::constant(-4.0)),
        ],
    );
    prog.set_objective(LinExpr::var(c));
    let r = solve(&prog, &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Optimal);
    assert!((r.objective - 13f64.sqrt()).abs() < 1e-6, "got {}", r.objective);
}

// ------------------------------------------------------------------- bnc --

/// A random but always-serviceable 3-bus case: one big generator, two loads,
/// three corridors wide enough that some build is feasible.
fn random_triangle(pd2: f64, pd3: f64, smax: [f64; 3], existing: [usize; 3]) -> PowerNetwork {
    let corridor = |from: usize, to: usize, s: f64, e: usize, cost: f64| {
        format!(
            r#"{{"from":{from},"to":{to},"g":0.5,"b":-5.0,"bsh":0,"Smax":{s},"nExisting":{e},"nMin":0,"nMax":3,"cBuild":{cost}}}"#
        )
    };
    let text = format!(
        r#"{{
          "sBase": 100, "lossPenalty": 0.001,
          "buses": [
            {{"id":1,"Pd":0,"Qd":0,"Vmin":0.95,"Vmax":1.05}},
            {{"id":2,"Pd":{pd2},"Qd":{q2},"Vmin":0.95,"Vmax":1.05}},
            {{"id":3,"Pd":{pd3},"Qd":{q3},"Vmin":0.95,"Vmax":1.05}}
          ],
          "generators": [
            {{"bus":1,"Pmin":0,"Pmax":600,"Qmin":-300,"Qmax":300,"c2":0,"c1":1,"c0":0}}
          ],
          "corridors": [{c12},{c13},{c23}]
        }}"#,
        q2 = 0.1 * pd2,
        q3 = 0.1 * pd3,
        c12 = corridor(1, 2, smax[0], existing[0], 10.0),
        c13 = corridor(1, 3, smax[1], existing[1], 14.0),
        c23 = corridor(2, 3, smax[2], existing[2], 7.0),
    );
    PowerNetwork::from_json_str(&text).expect("triangle case")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Branch-and-cut consistency on random 3-bus cases: the root bound
    /// never exceeds the final objective, the incumbent certifies through
    /// the standalone plan evaluator at the same cost, and switching the
    /// cuts off changes the search but not the optimum.
    #[test]
    fn bnc_bound_and_incumbent_consistency(
        pd2 in 40.0f64..120.0,
        pd3 in 40.0f64..120.0,
        s12 in 80.0f64..150.0,
        s23 in 80.0f64..150.0,
        e12 in 0usize..2,
    ) {
        let net = random_triangle(pd2, pd3, [s12, 120.0, s23], [e12, 0, 1]);
        let model = build_tnep(&net, &clique_mode(&net));
        let settings = BncSettings::default();

        let mut results: Vec<(f64, BTreeMap<usize, usize>)> = Vec::new();
        for with_cuts in [true, false] {
            let (fences, cones) = if with_cuts {
                (generate_fences(&net), tnep_sdp::cuts::conic_line_cuts(&model))
            } else {
                (Vec::new(), Vec::new())
            };
            let (outcome, stats) = branch_and_cut(&model, &fences, &cones, &settings);
            let plan = match outcome {
                BncOutcome::Optimal(p) => p,
                other => return Err(TestCaseError::fail(format!("search failed: {other:?}"))),
            };
            prop_assert!(
                stats.root_bound <= plan.objective() + 1e-6,
                "root bound {} exceeds objective {}",
                stats.root_bound,
                plan.objective()
            );
            prop_assert!(stats.incumbent_updates >= 1);
            prop_assert!(
                stats.nodes_fathomed_bound + stats.nodes_fathomed_infeasible <= stats.nodes_solved
            );

            // The incumbent must re-certify through the standalone checker.
            match evaluate_plan(&net, &plan.additions, &clique_mode(&net), &settings.solver) {
                PlanOutcome::Feasible(p) if p.is_rank1() => {
                    prop_assert!((p.investment - plan.investment).abs() < 1e-6);
                }
                other => return Err(TestCaseError::fail(format!("incumbent failed: {other:?}"))),
            }
            let map = plan
                .additions
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > 0)
                .map(|(k, &a)| (k, a))
                .collect();
            results.push((plan.investment, map));
        }
        prop_assert!(
            (results[0].0 - results[1].0).abs() < 1e-6,
            "cuts changed the optimum: {} vs {}",
            results[0].0,
            results[1].0
        );
    }
}
