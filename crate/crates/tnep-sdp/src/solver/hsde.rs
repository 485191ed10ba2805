//! Homogeneous self-dual interior-point iteration
//!
//! Solves the standard-form pair through the self-dual embedding
//!
//! ```text
//! A'z + c tau = 0,    -A x + b tau = s in K,    -c'x - b'z = kappa >= 0,
//! ```
//!
//! with Nesterov-Todd scaled Mehrotra predictor-corrector steps. An optimal
//! point has tau > 0 and recovers (x, s, z) / tau; a converged point with
//! tau -> 0 yields a primal or dual infeasibility certificate.

use crate::solver::cones::{
    jordan_product, jordan_solve, max_step, ConeSpec, ConeSystem, Scaling,
};
use crate::solver::kkt::KktSolver;
use crate::solver::standard::StandardForm;
use crate::solver::{Residuals, SolverSettings, SolverStatus};

/// A primal-dual point in original (unequilibrated) standard-form
/// coordinates, used for warm starts.
#[derive(Debug, Clone)]
pub struct RawPoint {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
}

pub struct HsdOutcome {
    pub status: SolverStatus,
    /// Original coordinates. For `Optimal` and `IterationLimit` this is the
    /// point divided by tau; for infeasible statuses it is the normalized
    /// certificate ray.
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub obj: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn identity_scalings(cones: &ConeSystem) -> Vec<Scaling> {
    cones
        .specs
        .iter()
        .map(|&spec| match spec {
            ConeSpec::Zero(_) => Scaling::Zero,
            ConeSpec::NonNeg(n) => Scaling::NonNeg { w: vec![1.0; n] },
            ConeSpec::Soc(n) => {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                Scaling::Soc { eta: 1.0, v }
            }
            ConeSpec::Psd(d) => Scaling::Psd {
                r: nalgebra::DMatrix::identity(d, d),
                rinv: nalgebra::DMatrix::identity(d, d),
            },
        })
        .collect()
}

/// Zero out the entries of `v` that belong to zero-cone blocks.
fn clear_zero_blocks(cones: &ConeSystem, v: &mut [f64]) {
    for (k, spec) in cones.specs.iter().enumerate() {
        if let ConeSpec::Zero(len) = spec {
            let off = cones.offsets[k];
            v[off..off + len].iter_mut().for_each(|e| *e = 0.0);
        }
    }
}

/// Per-block application of a scaling operator onto a full-length vector.
fn apply_blocks(
    cones: &ConeSystem,
    scalings: &[Scaling],
    v: &[f64],
    out: &mut [f64],
    op: impl Fn(&Scaling, &[f64], &mut [f64]),
) {
    for (k, sc) in scalings.iter().enumerate() {
        let off = cones.offsets[k];
        let len = cones.specs[k].len();
        op(sc, &v[off..off + len], &mut out[off..off + len]);
    }
}

/// Minimum over blocks of the max feasible step from `u` along `d`.
fn min_max_step(cones: &ConeSystem, u: &[f64], d: &[f64]) -> f64 {
    let mut t = f64::INFINITY;
    for (k, &spec) in cones.specs.iter().enumerate() {
        let off = cones.offsets[k];
        let len = spec.len();
        t = t.min(max_step(spec, &u[off..off + len], &d[off..off + len]));
    }
    t
}

pub fn solve_standard(
    sf: &StandardForm,
    settings: &SolverSettings,
    warm: Option<&RawPoint>,
) -> HsdOutcome {
    let n = sf.n;
    let m = sf.m;
    let cones = ConeSystem::new(sf.cones.clone());
    let nu = cones.degree.max(1) as f64;
    let a = &sf.a_scaled;
    let b = &sf.b_scaled;
    let c = &sf.c_scaled;
    let bnorm = 1.0 + norm2(&sf.b);
    let cnorm = 1.0 + norm2(&sf.c);

    let mut kkt = KktSolver::new(sf, settings.static_reg, settings.refine_steps);

    // Initialization: least-norm primal and dual points from two solves with
    // identity scaling, shifted into the cone interior.
    let mut x = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut tau = 1.0;
    let mut kappa = 1.0;
    if let Some(w) = warm {
        let (xh, sh, zh) = sf.scale_point(&w.x, &w.s, &w.z);
        x = xh;
        s = sh;
        z = zh;
        clear_zero_blocks(&cones, &mut s);
        for v in [&mut s, &mut z] {
            let margin = cones.interior_margin(v);
            if margin < 1e-3 {
                cones.shift_interior(v, 1e-3 - margin.min(0.0) + 1e-3);
            }
        }
        kappa = (dot(&s, &z) / nu).max(1e-6);
    } else {
        kkt.update(&identity_scalings(&cones), settings.dyn_reg);
        let mut zt = vec![0.0; m];
        let zero_x = vec![0.0; n];
        kkt.solve(&zero_x, b, &mut x, &mut zt);
        for i in 0..m {
            s[i] = -zt[i];
        }
        clear_zero_blocks(&cones, &mut s);
        let margin = cones.interior_margin(&s);
        if margin < 0.0 || !margin.is_finite() {
            cones.shift_interior(&mut s, 1.0 - margin.min(0.0));
        } else if margin == 0.0 {
            cones.shift_interior(&mut s, 1.0);
        }
        let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let zero_z = vec![0.0; m];
        let mut x2 = vec![0.0; n];
        kkt.solve(&neg_c, &zero_z, &mut x2, &mut z);
        let margin = cones.interior_margin(&z);
        if margin <= 0.0 || !margin.is_finite() {
            cones.shift_interior(&mut z, 1.0 - margin.min(0.0));
        }
    }

    let mut stalls = 0usize;
    let mut status = SolverStatus::IterationLimit;
    let mut iters = 0usize;
    // Best iterate so far, by worst residual relative to its tolerance;
    // numerical trouble near the end rolls back to it.
    let mut best_score = f64::INFINITY;
    let mut best: Option<(Vec<f64>, Vec<f64>, Vec<f64>, f64, Residuals)> = None;

    // Workspaces.
    let mut lambda = vec![0.0; m];
    let mut ds_rhs = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut wg = vec![0.0; m];
    let mut rx = vec![0.0; n];
    let mut rz = vec![0.0; m];
    let mut x1 = vec![0.0; n];
    let mut z1 = vec![0.0; m];
    let mut x2 = vec![0.0; n];
    let mut z2 = vec![0.0; m];
    let mut dx = vec![0.0; n];
    let mut dz = vec![0.0; m];
    let mut ds = vec![0.0; m];
    let mut dzt = vec![0.0; m];
    let mut dst = vec![0.0; m];
    let mut dzt_aff = vec![0.0; m];
    let mut dst_aff = vec![0.0; m];
    let mut tmp = vec![0.0; m];

    for iter in 0..settings.max_iter {
        iters = iter;

        // Scaled residuals.
        rx.iter_mut().for_each(|v| *v = 0.0);
        a.mul_transpose_add(&z, &mut rx);
        for j in 0..n {
            rx[j] += c[j] * tau;
        }
        rz.copy_from_slice(&s);
        a.mul_add(&x, &mut rz);
        for i in 0..m {
            rz[i] -= b[i] * tau;
        }
        let rtau = kappa + dot(c, &x) + dot(b, &z);
        let mu = (dot(&s, &z) + tau * kappa) / (nu + 1.0);

        // Convergence checks in original coordinates.
        let (xu, su, zu) = sf.unscale(&x, &s, &z);
        let mut pr = su.clone();
        sf.a.mul_add(&xu, &mut pr);
        for i in 0..m {
            pr[i] -= sf.b[i] * tau;
        }
        let mut dr = vec![0.0; n];
        sf.a.mul_transpose_add(&zu, &mut dr);
        for j in 0..n {
            dr[j] += sf.c[j] * tau;
        }
        let pres = norm2(&pr) / tau / bnorm;
        let dres = norm2(&dr) / tau / cnorm;
        let pcost = dot(&sf.c, &xu) / tau;
        let dcost = -dot(&sf.b, &zu) / tau;
        let gap = dot(&su, &zu) / (tau * tau);
        let relgap = gap / f64::max(1.0, pcost.abs());
        if settings.verbose {
            eprintln!(
                "it={iter:3} pcost={pcost:+.6e} dcost={dcost:+.6e} gap={relgap:.2e} \
                 pres={pres:.2e} dres={dres:.2e} tau={tau:.2e} kappa={kappa:.2e} mu={mu:.2e}"
            );
        }
        if !(pres.is_finite() && dres.is_finite() && relgap.is_finite() && mu.is_finite()) {
            status = SolverStatus::NumericalError;
            break;
        }
        let score = (pres / settings.feas_tol)
            .max(dres / settings.feas_tol)
            .max(relgap / settings.tol);
        if score < best_score {
            best_score = score;
            best = Some((
                x.clone(),
                s.clone(),
                z.clone(),
                tau,
                Residuals { primal: pres, dual: dres, gap: relgap },
            ));
        }
        if pres <= settings.feas_tol && dres <= settings.feas_tol && relgap <= settings.tol {
            status = SolverStatus::Optimal;
            break;
        }
        // Infeasibility certificates.
        let minus_bz = -dot(&sf.b, &zu);
        if minus_bz > 0.0 {
            let ray: Vec<f64> = zu.iter().map(|v| v / minus_bz).collect();
            let mut atz = vec![0.0; n];
            sf.a.mul_transpose_add(&ray, &mut atz);
            if norm2(&atz) <= settings.infeas_tol * f64::max(1.0, norm2(&sf.b)) {
                return HsdOutcome {
                    status: SolverStatus::PrimalInfeasible,
                    x: vec![0.0; n],
                    s: vec![0.0; m],
                    z: ray,
                    obj: f64::INFINITY,
                    residuals: Residuals { primal: pres, dual: dres, gap: relgap },
                    iterations: iter,
                };
            }
        }
        let minus_cx = -dot(&sf.c, &xu);
        if minus_cx > 0.0 {
            let xray: Vec<f64> = xu.iter().map(|v| v / minus_cx).collect();
            let sray: Vec<f64> = su.iter().map(|v| v / minus_cx).collect();
            let mut axs = sray.clone();
            sf.a.mul_add(&xray, &mut axs);
            if norm2(&axs) <= settings.infeas_tol * f64::max(1.0, norm2(&sf.c)) {
                return HsdOutcome {
                    status: SolverStatus::DualInfeasible,
                    x: xray,
                    s: sray,
                    z: vec![0.0; m],
                    obj: f64::NEG_INFINITY,
                    residuals: Residuals { primal: pres, dual: dres, gap: relgap },
                    iterations: iter,
                };
            }
        }
        if tau < 1e-12 * kappa.max(1.0) {
            status = SolverStatus::NumericalError;
            break;
        }

        // NT scaling and KKT refactorization.
        let scalings = match cones.nt_scalings(&s, &z) {
            Some(sc) => sc,
            None => {
                status = SolverStatus::NumericalError;
                break;
            }
        };
        apply_blocks(&cones, &scalings, &z, &mut lambda, |sc, v, o| sc.lambda(v, o));

        // Refactor with escalating regularization if the scaled system has
        // degenerated enough that the solve comes back non-finite.
        let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let mut dyn_reg = settings.dyn_reg;
        let mut den;
        loop {
            kkt.update(&scalings, dyn_reg);
            kkt.solve(&neg_c, b, &mut x1, &mut z1);
            den = dot(c, &x1) + dot(b, &z1) - kappa / tau;
            if (den.is_finite() && den < 0.0) || dyn_reg > 1e-4 {
                break;
            }
            dyn_reg *= 1e3;
        }
        if !den.is_finite() || den >= 0.0 {
            status = SolverStatus::NumericalError;
            break;
        }

        // One Newton direction for a given target (eta scales the residuals;
        // ds_rhs and dkappa_rhs are the complementarity targets).
        let mut direction = |eta: f64,
                             ds_rhs: &[f64],
                             dkappa_rhs: f64,
                             g: &mut Vec<f64>,
                             wg: &mut Vec<f64>,
                             x2: &mut Vec<f64>,
                             z2: &mut Vec<f64>,
                             dx: &mut Vec<f64>,
                             dz: &mut Vec<f64>,
                             ds: &mut Vec<f64>,
                             tmp: &mut Vec<f64>|
         -> (f64, f64) {
            for (k, &spec) in cones.specs.iter().enumerate() {
                let off = cones.offsets[k];
                let len = spec.len();
                jordan_solve(spec, &lambda[off..off + len], &ds_rhs[off..off + len], &mut g[off..off + len]);
            }
            apply_blocks(&cones, &scalings, g, wg, |sc, v, o| sc.apply_wt(v, o));
            let bx: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let bz: Vec<f64> = rz.iter().zip(wg.iter()).map(|(r, w)| -eta * r - w).collect();
            kkt.solve(&bx, &bz, x2, z2);
            let dtau = (-eta * rtau - dot(c, x2) - dot(b, z2) - dkappa_rhs / tau)
                / den;
            for j in 0..n {
                dx[j] = x2[j] + dtau * x1[j];
            }
            for i in 0..m {
                dz[i] = z2[i] + dtau * z1[i];
            }
            // ds = W'g - W'W dz.
            apply_blocks(&cones, &scalings, dz, tmp, |sc, v, o| sc.apply_w(v, o));
            apply_blocks(&cones, &scalings, &tmp.clone(), ds, |sc, v, o| sc.apply_wt(v, o));
            for i in 0..m {
                ds[i] = wg[i] - ds[i];
            }
            let dkappa = (dkappa_rhs - kappa * dtau) / tau;
            (dtau, dkappa)
        };

        // Affine (predictor) direction: target -lambda o lambda, -tau kappa.
        for (k, &spec) in cones.specs.iter().enumerate() {
            let off = cones.offsets[k];
            let len = spec.len();
            jordan_product(spec, &lambda[off..off + len], &lambda[off..off + len], &mut tmp[off..off + len]);
        }
        for i in 0..m {
            ds_rhs[i] = -tmp[i];
        }
        let (dtau_a, dkappa_a) = direction(
            1.0, &ds_rhs, -tau * kappa, &mut g, &mut wg, &mut x2, &mut z2, &mut dx, &mut dz,
            &mut ds, &mut tmp,
        );
        apply_blocks(&cones, &scalings, &dz, &mut dzt_aff, |sc, v, o| sc.apply_w(v, o));
        apply_blocks(&cones, &scalings, &ds, &mut dst_aff, |sc, v, o| sc.apply_wt_inv(v, o));
        let mut alpha_aff = f64::INFINITY
            .min(min_max_step(&cones, &lambda, &dst_aff))
            .min(min_max_step(&cones, &lambda, &dzt_aff));
        if dtau_a < 0.0 {
            alpha_aff = alpha_aff.min(-tau / dtau_a);
        }
        if dkappa_a < 0.0 {
            alpha_aff = alpha_aff.min(-kappa / dkappa_a);
        }
        let alpha_aff = alpha_aff.min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Combined (corrector) direction with Mehrotra second-order term.
        for (k, &spec) in cones.specs.iter().enumerate() {
            let off = cones.offsets[k];
            let len = spec.len();
            jordan_product(
                spec,
                &dst_aff[off..off + len],
                &dzt_aff[off..off + len],
                &mut tmp[off..off + len],
            );
        }
        for i in 0..m {
            ds_rhs[i] -= tmp[i];
        }
        cones.shift_interior(&mut ds_rhs, sigma * mu);
        let dkappa_rhs = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
        let eta = 1.0 - sigma;
        let (dtau, dkappa) = direction(
            eta, &ds_rhs, dkappa_rhs, &mut g, &mut wg, &mut x2, &mut z2, &mut dx, &mut dz,
            &mut ds, &mut tmp,
        );
        apply_blocks(&cones, &scalings, &dz, &mut dzt, |sc, v, o| sc.apply_w(v, o));
        apply_blocks(&cones, &scalings, &ds, &mut dst, |sc, v, o| sc.apply_wt_inv(v, o));
        let mut alpha = f64::INFINITY
            .min(min_max_step(&cones, &lambda, &dst))
            .min(min_max_step(&cones, &lambda, &dzt));
        if dtau < 0.0 {
            alpha = alpha.min(-tau / dtau);
        }
        if dkappa < 0.0 {
            alpha = alpha.min(-kappa / dkappa);
        }
        let alpha = (0.99 * alpha).min(1.0);
        if !alpha.is_finite() || alpha < 1e-10 {
            stalls += 1;
            if stalls >= 2 {
                status = SolverStatus::NumericalError;
                break;
            }
        } else {
            stalls = 0;
        }

        for j in 0..n {
            x[j] += alpha * dx[j];
        }
        for i in 0..m {
            s[i] += alpha * ds[i];
            z[i] += alpha * dz[i];
        }
        clear_zero_blocks(&cones, &mut s);
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    // A run stopped by numerical limits rolls back to its best iterate; if
    // that sits just short of the target tolerance it is still reported as
    // optimal, with the residuals carrying the attained accuracy.
    if matches!(status, SolverStatus::NumericalError | SolverStatus::IterationLimit) {
        if let Some((bx, bs, bz, btau, bres)) = best {
            x = bx;
            s = bs;
            z = bz;
            tau = btau;
            if bres.primal <= 1e3 * settings.feas_tol
                && bres.dual <= 1e3 * settings.feas_tol
                && bres.gap <= 1e3 * settings.tol
            {
                status = SolverStatus::Optimal;
            }
        }
    }

    // Return the current point divided by tau in original coordinates.
    let (xu, su, zu) = sf.unscale(&x, &s, &z);
    let xd: Vec<f64> = xu.iter().map(|v| v / tau).collect();
    let sd: Vec<f64> = su.iter().map(|v| v / tau).collect();
    let zd: Vec<f64> = zu.iter().map(|v| v / tau).collect();
    let mut pr = sd.clone();
    sf.a.mul_add(&xd, &mut pr);
    for i in 0..m {
        pr[i] -= sf.b[i];
    }
    let mut drv = vec![0.0; n];
    sf.a.mul_transpose_add(&zd, &mut drv);
    for j in 0..n {
        drv[j] += sf.c[j];
    }
    let pcost = dot(&sf.c, &xd);
    let gap = dot(&sd, &zd);
    HsdOutcome {
        status,
        obj: pcost,
        residuals: Residuals {
            primal: norm2(&pr) / bnorm,
            dual: norm2(&drv) / cnorm,
            gap: gap / f64::max(1.0, pcost.abs()),
        },
        x: xd,
        s: sd,
        z: zd,
        iterations: iters,
    }
}
