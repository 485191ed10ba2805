//! Drive the interior-point solver on a small hand-built conic program,
//! mixing linear rows, a second-order cone, and a PSD block.
//!
//! minimize  c
//! s.t.      a + b = 2
//!           c >= || (a - 1, b - 2) ||
//!           [[a, 1], [1, b]] is PSD   (i.e. a, b >= 0 and a*b >= 1)
//!
//! The PSD block with the equality forces a = b = 1, so the optimum is
//! c = 1 at the point nearest to (1, 2) on that set.

use tnep_sdp::solver::{solve, SolverStatus};
use tnep_sdp::{ConicProgram, LinExpr, SolverSettings};

fn main() -> anyhow::Result<()> {
    let mut prog = ConicProgram::new();
    let a = prog.add_var("a");
    let b = prog.add_var("b");
    let c = prog.add_bounded_var("c", 0.0, f64::INFINITY);

    prog.add_eq("sum", LinExpr::var(a).plus(&LinExpr::var(b)), 2.0);
    prog.add_soc(
        "dist",
        LinExpr::var(c),
        vec![
            LinExpr::var(a).plus(&LinExpr::constant(-1.0)),
            LinExpr::var(b).plus(&LinExpr::constant(-2.0)),
        ],
    );
    // Lower triangle, column-major: (0,0), (1,0), (1,1).
    prog.add_psd_block(
        "gram",
        2,
        vec![LinExpr::var(a), LinExpr::constant(1.0), LinExpr::var(b)],
    );
    prog.set_objective(LinExpr::var(c));

    println!("{}", prog.dump());

    let r = solve(&prog, &SolverSettings::default());
    anyhow::ensure!(r.status == SolverStatus::Optimal, "solver stopped with {:?}", r.status);
    println!(
        "optimal objective {:.8} after {} iterations",
        r.objective, r.iterations
    );
    println!("a = {:.8}, b = {:.8}, c = {:.8}", r.x[a.0], r.x[b.0], r.x[c.0]);
    println!("max constraint violation {:.2e}", prog.violation(&r.x));
    println!("expected optimum: a = 1, b = 1, c = 1");
    Ok(())
}
