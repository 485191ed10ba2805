//! Cone kernels for the interior-point solver.
//!
//! Each block of the slack vector lives in one of: the zero cone (equality
//! rows), the nonnegative orthant, a second-order cone, or a PSD cone in
//! scaled-vector (svec) coordinates. This module holds the Nesterov-Todd
//! scaling for each block together with the Jordan-algebra operations the
//! predictor-corrector needs.

use nalgebra::DMatrix;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Cone block description; `Psd(d)` is a d x d symmetric matrix block stored
/// as svec of length d(d+1)/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSpec {
    Zero(usize),
    NonNeg(usize),
    Soc(usize),
    Psd(usize),
}

impl ConeSpec {
    /// Number of slack entries the block occupies.
    pub fn len(&self) -> usize {
        match *self {
            ConeSpec::Zero(n) | ConeSpec::NonNeg(n) | ConeSpec::Soc(n) => n,
            ConeSpec::Psd(d) => d * (d + 1) / 2,
        }
    }

    /// Contribution to the barrier degree.
    pub fn degree(&self) -> usize {
        match *self {
            ConeSpec::Zero(_) => 0,
            ConeSpec::NonNeg(n) => n,
            ConeSpec::Soc(_) => 1,
            ConeSpec::Psd(d) => d,
        }
    }
}

/// svec(M) for symmetric M: lower triangle column-major, off-diagonals
/// scaled by sqrt(2) so that <svec(A), svec(B)> = trace(AB).
pub fn svec_from_mat(m: &DMatrix<f64>, out: &mut [f64]) {
    let d = m.nrows();
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            out[k] = if i == j { m[(i, j)] } else { SQRT2 * m[(i, j)] };
            k += 1;
        }
    }
}

pub fn mat_from_svec(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            let val = if i == j { v[k] } else { v[k] / SQRT2 };
            m[(i, j)] = val;
            m[(j, i)] = val;
            k += 1;
        }
    }
    m
}

/// Per-block Nesterov-Todd scaling state.
#[derive(Debug, Clone)]
pub enum Scaling {
    Zero,
    /// w_i = sqrt(s_i / z_i)
    NonNeg { w: Vec<f64> },
    /// W = eta (2 v v' - J) with v the Jordan square root of the scaling
    /// point wbar, so that W'W = eta^2 (2 wbar wbar' - J).
    Soc { eta: f64, v: Vec<f64> },
    /// W u = svec(R' U R); lambda = diag(sigma)
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64> },
}

pub struct ConeSystem {
    pub specs: Vec<ConeSpec>,
    pub offsets: Vec<usize>,
    pub degree: usize,
}

impl ConeSystem {
    pub fn new(specs: Vec<ConeSpec>) -> Self {
        let mut offsets = Vec::with_capacity(specs.len());
        let mut off = 0;
        let mut degree = 0;
        for s in &specs {
            offsets.push(off);
            off += s.len();
            degree += s.degree();
        }
        ConeSystem { specs, offsets, degree }
    }

    pub fn block<'a>(&self, k: usize, v: &'a [f64]) -> &'a [f64] {
        &v[self.offsets[k]..self.offsets[k] + self.specs[k].len()]
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn block_mut<'a>(&self, k: usize, v: &'a mut [f64]) -> &'a mut [f64] {
        &mut v[self.offsets[k]..self.offsets[k] + self.specs[k].len()]
    }

    /// Write the cone identity element into `out`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn identity(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, spec) in self.specs.iter().enumerate() {
            let b = self.block_mut(k, out);
            match *spec {
                ConeSpec::Zero(_) => {}
                ConeSpec::NonNeg(_) => b.iter_mut().for_each(|v| *v = 1.0),
                ConeSpec::Soc(_) => b[0] = 1.0,
                ConeSpec::Psd(d) => {
                    let mut idx = 0;
                    for j in 0..d {
                        for i in j..d {
                            b[idx] = if i == j { 1.0 } else { 0.0 };
                            idx += 1;
                        }
                    }
                }
            }
        }
    }

    /// Margin to the cone boundary: min over blocks of the distance of `v`
    /// from the boundary (eigenvalue sense). Zero-cone blocks are ignored.
    pub fn interior_margin(&self, v: &[f64]) -> f64 {
        let mut margin = f64::INFINITY;
        for (k, spec) in self.specs.iter().enumerate() {
            let b = self.block(k, v);
            let m = match *spec {
                ConeSpec::Zero(_) => f64::INFINITY,
                ConeSpec::NonNeg(_) => b.iter().cloned().fold(f64::INFINITY, f64::min),
                ConeSpec::Soc(_) => {
                    b[0] - b[1..].iter().map(|x| x * x).sum::<f64>().sqrt()
                }
                ConeSpec::Psd(d) => {
                    let eig = nalgebra::SymmetricEigen::new(mat_from_svec(b, d));
                    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
                }
            };
            margin = margin.min(m);
        }
        margin
    }

    /// Shift `v` toward the interior: v += delta * e on proper cones.
    pub fn shift_interior(&self, v: &mut [f64], delta: f64) {
        for (k, spec) in self.specs.iter().enumerate() {
            let off = self.offsets[k];
            match *spec {
                ConeSpec::Zero(_) => {}
                ConeSpec::NonNeg(n) => {
                    for i in 0..n {
                        v[off + i] += delta;
                    }
                }
                ConeSpec::Soc(_) => v[off] += delta,
                ConeSpec::Psd(d) => {
                    let mut idx = 0;
                    for j in 0..d {
                        for i in j..d {
                            if i == j {
                                v[off + idx] += delta;
                            }
                            idx += 1;
                        }
                    }
                }
            }
        }
    }

    /// Compute NT scalings for strictly interior (s, z). Returns `None` when
    /// a block is numerically on the boundary.
    pub fn nt_scalings(&self, s: &[f64], z: &[f64]) -> Option<Vec<Scaling>> {
        let mut out = Vec::with_capacity(self.specs.len());
        for (k, spec) in self.specs.iter().enumerate() {
            let sb = self.block(k, s);
            let zb = self.block(k, z);
            let sc = match *spec {
                ConeSpec::Zero(_) => Scaling::Zero,
                ConeSpec::NonNeg(_) => {
                    let mut w = Vec::with_capacity(sb.len());
                    for i in 0..sb.len() {
                        if sb[i] <= 0.0 || zb[i] <= 0.0 {
                            return None;
                        }
                        w.push((sb[i] / zb[i]).sqrt());
                    }
                    Scaling::NonNeg { w }
                }
                ConeSpec::Soc(_) => {
                    let sres = jdet_soc(sb);
                    let zres = jdet_soc(zb);
                    if sres <= 0.0 || zres <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0 {
                        return None;
                    }
                    let snorm = sres.sqrt();
                    let znorm = zres.sqrt();
                    let sbar: Vec<f64> = sb.iter().map(|v| v / snorm).collect();
                    let zbar: Vec<f64> = zb.iter().map(|v| v / znorm).collect();
                    let dot: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
                    let gamma = ((1.0 + dot) / 2.0).sqrt();
                    let mut wbar = vec![0.0; sb.len()];
                    wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
                    for i in 1..sb.len() {
                        wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
                    }
                    let eta = (snorm / znorm).sqrt();
                    // v = (wbar + e) / sqrt(2 (1 + wbar0)).
                    let mut v = wbar;
                    v[0] += 1.0;
                    let f = 1.0 / (2.0 * v[0]).sqrt();
                    v.iter_mut().for_each(|x| *x *= f);
                    Scaling::Soc { eta, v }
                }
                ConeSpec::Psd(d) => {
                    let smat = mat_from_svec(sb, d);
                    let zmat = mat_from_svec(zb, d);
                    let ls = nalgebra::Cholesky::new(smat)?;
                    let lz = nalgebra::Cholesky::new(zmat)?;
                    let ls_l = ls.l();
                    let lz_l = lz.l();
                    let prod = lz_l.transpose() * &ls_l;
                    let svd = nalgebra::SVD::new(prod, true, true);
                    let u = svd.u.as_ref()?;
                    let vt = svd.v_t.as_ref()?;
                    let sigma = &svd.singular_values;
                    if sigma.iter().any(|&x| x <= 0.0) {
                        return None;
                    }
                    // R = Ls V Sigma^{-1/2}; Rinv = Sigma^{1/2} V' Ls^{-1}.
                    let mut v = vt.transpose();
                    for j in 0..d {
                        let f = 1.0 / sigma[j].sqrt();
                        for i in 0..d {
                            v[(i, j)] *= f;
                        }
                    }
                    let r = &ls_l * &v;
                    // Rinv via R' Z R = Sigma => Rinv = Sigma^{-1} R' Z.
                    // Cheaper and stabler: Rinv = Sigma^{1/2} U' Lz^{-1}... use
                    // direct triangular solve: Rinv = Sigma^{1/2} V' Ls^{-1}.
                    let mut vt2 = v.transpose(); // = Sigma^{-1/2} V'
                    for i in 0..d {
                        let f = sigma[i]; // Sigma^{1/2} * Sigma^{1/2}
                        for j in 0..d {
                            vt2[(i, j)] *= f;
                        }
                    }
                    // vt2 = Sigma^{1/2} V'
                    let rinv = ls_l
                        .tr_solve_lower_triangular(&vt2.transpose())
                        .map(|m| m.transpose());
                    let rinv = match rinv {
                        Some(m) => m,
                        None => return None,
                    };
                    let _ = u;
                    Scaling::Psd { r, rinv }
                }
            };
            out.push(sc);
        }
        Some(out)
    }
}

fn jdet_soc(v: &[f64]) -> f64 {
    v[0] * v[0] - v[1..].iter().map(|x| x * x).sum::<f64>()
}

impl Scaling {
    /// out = W v
    pub fn apply_w(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Scaling::NonNeg { w } => {
                for i in 0..v.len() {
                    out[i] = w[i] * v[i];
                }
            }
            Scaling::Soc { eta, v: sv } => {
                soc_w_mul(*eta, sv, v, out, false);
            }
            Scaling::Psd { r, .. } => {
                let d = r.nrows();
                let m = mat_from_svec(v, d);
                let res = r.transpose() * m * r;
                svec_from_mat(&res, out);
            }
        }
    }

    /// out = W' v
    pub fn apply_wt(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Scaling::NonNeg { .. } | Scaling::Soc { .. } => self.apply_w(v, out),
            Scaling::Psd { r, .. } => {
                let d = r.nrows();
                let m = mat_from_svec(v, d);
                let res = r * m * r.transpose();
                svec_from_mat(&res, out);
            }
        }
    }

    /// out = W^{-T} v
    pub fn apply_wt_inv(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Scaling::NonNeg { w } => {
                for i in 0..v.len() {
                    out[i] = v[i] / w[i];
                }
            }
            Scaling::Soc { eta, v: sv } => {
                soc_w_mul(1.0 / *eta, sv, v, out, true);
            }
            Scaling::Psd { rinv, .. } => {
                let d = rinv.nrows();
                let m = mat_from_svec(v, d);
                let res = rinv * m * rinv.transpose();
                svec_from_mat(&res, out);
            }
        }
    }

    /// Dense W'W block for the KKT system, in block-local coordinates.
    pub fn wtw_dense(&self, len: usize) -> DMatrix<f64> {
        match self {
            Scaling::Zero => DMatrix::zeros(len, len),
            Scaling::NonNeg { w } => {
                let mut m = DMatrix::zeros(len, len);
                for i in 0..len {
                    m[(i, i)] = w[i] * w[i];
                }
                m
            }
            Scaling::Soc { eta, v } => {
                // W'W = eta^2 (2 v v' - J)^2.
                let q = v.len();
                let mut w = DMatrix::zeros(q, q);
                for i in 0..q {
                    for j in 0..q {
                        w[(i, j)] = 2.0 * v[i] * v[j];
                    }
                }
                w[(0, 0)] -= 1.0;
                for i in 1..q {
                    w[(i, i)] += 1.0;
                }
                (w.clone() * w) * (eta * eta)
            }
            Scaling::Psd { r, .. } => {
                // W'W u = svec(M U M) with M = R R'.
                let d = r.nrows();
                let m = r * r.transpose();
                let sl = d * (d + 1) / 2;
                let mut out = DMatrix::zeros(sl, sl);
                let mut basis = DMatrix::zeros(d, d);
                let mut col = vec![0.0; sl];
                let mut k = 0;
                for j in 0..d {
                    for i in j..d {
                        let val = if i == j { 1.0 } else { 1.0 / SQRT2 };
                        basis[(i, j)] = val;
                        basis[(j, i)] = val;
                        let prod = &m * &basis * &m;
                        svec_from_mat(&prod, &mut col);
                        for (rr, &cv) in col.iter().enumerate() {
                            out[(rr, k)] = cv;
                        }
                        basis[(i, j)] = 0.0;
                        basis[(j, i)] = 0.0;
                        k += 1;
                    }
                }
                // Symmetrize against rounding.
                let outt = out.transpose();
                (out + outt) * 0.5
            }
        }
    }

    /// lambda = W z (= W^{-T} s).
    pub fn lambda(&self, z: &[f64], out: &mut [f64]) {
        self.apply_w(z, out);
    }
}

/// y = scale * (2 v (v' x) - J x); the `inverse` form uses J v since
/// (2 v v' - J)^{-1} = J (2 v v' - J) J.
fn soc_w_mul(scale: f64, wbar: &[f64], x: &[f64], y: &mut [f64], inverse: bool) {
    let q = wbar.len();
    if inverse {
        // W^{-1} x = (1/eta) (2 (J wbar)(wbar' J x) - J x); scale = 1/eta.
        let mut jx = vec![0.0; q];
        jx[0] = x[0];
        for i in 1..q {
            jx[i] = -x[i];
        }
        let dot: f64 = wbar.iter().zip(&jx).map(|(a, b)| a * b).sum();
        y[0] = scale * (2.0 * wbar[0] * dot - jx[0]);
        for i in 1..q {
            y[i] = scale * (-2.0 * wbar[i] * dot - jx[i]);
        }
    } else {
        let dot: f64 = wbar.iter().zip(x).map(|(a, b)| a * b).sum();
        y[0] = scale * (2.0 * wbar[0] * dot - x[0]);
        for i in 1..q {
            y[i] = scale * (2.0 * wbar[i] * dot + x[i]);
        }
    }
}

/// Jordan product u o v within one block.
pub fn jordan_product(spec: ConeSpec, u: &[f64], v: &[f64], out: &mut [f64]) {
    match spec {
        ConeSpec::Zero(_) => out.iter_mut().for_each(|o| *o = 0.0),
        ConeSpec::NonNeg(_) => {
            for i in 0..u.len() {
                out[i] = u[i] * v[i];
            }
        }
        ConeSpec::Soc(_) => {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            out[0] = dot;
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
        ConeSpec::Psd(d) => {
            let um = mat_from_svec(u, d);
            let vm = mat_from_svec(v, d);
            let p = (&um * &vm + &vm * &um) * 0.5;
            svec_from_mat(&p, out);
        }
    }
}

/// Solve lambda o u = d for u, where lambda is a scaling point.
pub fn jordan_solve(spec: ConeSpec, lambda: &[f64], d: &[f64], out: &mut [f64]) {
    match spec {
        ConeSpec::Zero(_) => out.iter_mut().for_each(|o| *o = 0.0),
        ConeSpec::NonNeg(_) => {
            for i in 0..d.len() {
                out[i] = d[i] / lambda[i];
            }
        }
        ConeSpec::Soc(_) => {
            // Arrow system: [l0, lbar'; lbar, l0 I] u = d.
            let l0 = lambda[0];
            let lbar = &lambda[1..];
            let det = l0 * l0 - lbar.iter().map(|x| x * x).sum::<f64>();
            let lbar_dot_dbar: f64 = lbar.iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
            let u0 = (l0 * d[0] - lbar_dot_dbar) / det;
            out[0] = u0;
            for i in 1..d.len() {
                out[i] = (d[i] - u0 * lambda[i]) / l0;
            }
        }
        ConeSpec::Psd(dm) => {
            // lambda is diagonal (NT scaling) but accept general symmetric:
            // solve (L U + U L)/2 = D via eigen-decomposition of L.
            let lm = mat_from_svec(lambda, dm);
            let dmat = mat_from_svec(d, dm);
            let eig = nalgebra::SymmetricEigen::new(lm);
            let q = &eig.eigenvectors;
            let ev = &eig.eigenvalues;
            let dt = q.transpose() * dmat * q;
            let mut ut = DMatrix::zeros(dm, dm);
            for i in 0..dm {
                for j in 0..dm {
                    ut[(i, j)] = 2.0 * dt[(i, j)] / (ev[i] + ev[j]);
                }
            }
            let u = q * ut * q.transpose();
            svec_from_mat(&u, out);
        }
    }
}

/// Maximum step t such that u + t d stays in the cone, for u strictly
/// interior. Returns `f64::INFINITY` when unbounded.
pub fn max_step(spec: ConeSpec, u: &[f64], d: &[f64]) -> f64 {
    match spec {
        ConeSpec::Zero(_) => f64::INFINITY,
        ConeSpec::NonNeg(_) => {
            let mut t = f64::INFINITY;
            for i in 0..u.len() {
                if d[i] < 0.0 {
                    t = t.min(-u[i] / d[i]);
                }
            }
            t
        }
        ConeSpec::Soc(_) => soc_max_step(u, d),
        ConeSpec::Psd(dm) => {
            let um = mat_from_svec(u, dm);
            let dmat = mat_from_svec(d, dm);
            // u + t d >= 0  <=>  I + t L^{-1} D L^{-T} >= 0.
            let chol = match nalgebra::Cholesky::new(um) {
                Some(c) => c,
                None => return 0.0,
            };
            let l = chol.l();
            let tmp = l.solve_lower_triangular(&dmat).unwrap();
            let w = l.solve_lower_triangular(&tmp.transpose()).unwrap();
            let ws = (w.clone() + w.transpose()) * 0.5;
            let eig = nalgebra::SymmetricEigen::new(ws);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if min >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / min
            }
        }
    }
}

fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    // Feasible set {t >= 0 : u + t d in K} is an interval starting at 0.
    let a = d[0] * d[0] - d[1..].iter().map(|x| x * x).sum::<f64>();
    let b = u[0] * d[0] - u[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>();
    let c = u[0] * u[0] - u[1..].iter().map(|x| x * x).sum::<f64>();
    let c = c.max(0.0);
    let lin_exit = if d[0] < 0.0 { -u[0] / d[0] } else { f64::INFINITY };
    // Smallest positive root of a t^2 + 2 b t + c = 0.
    let quad_exit = {
        let disc = b * b - a * c;
        if a.abs() < 1e-300 {
            if b < 0.0 {
                -c / (2.0 * b)
            } else {
                f64::INFINITY
            }
        } else if disc < 0.0 {
            f64::INFINITY
        } else {
            let sq = disc.sqrt();
            let r1 = (-b - sq) / a;
            let r2 = (-b + sq) / a;
            let mut t = f64::INFINITY;
            for r in [r1, r2] {
                if r > 0.0 {
                    t = t.min(r);
                }
            }
            t
        }
    };
    // A quadratic root beyond the linear exit is a spurious (negative-radius)
    // branch; the true boundary hit is the earlier of the two.
    quad_exit.min(lin_exit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_interior(spec: ConeSpec, rng: &mut impl Rng) -> Vec<f64> {
        let len = spec.len();
        match spec {
            ConeSpec::NonNeg(_) => (0..len).map(|_| rng.gen_range(0.2..2.0)).collect(),
            ConeSpec::Soc(_) => {
                let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect();
                v[0] = 1.0 + v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                v
            }
            ConeSpec::Psd(d) => {
                let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
                let m = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
                let mut out = vec![0.0; len];
                svec_from_mat(&m, &mut out);
                out
            }
            ConeSpec::Zero(_) => vec![0.0; len],
        }
    }

    #[test]
    fn svec_preserves_inner_products() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let d = 4;
        let a = {
            let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            (m.clone() + m.transpose()) * 0.5
        };
        let b = {
            let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            (m.clone() + m.transpose()) * 0.5
        };
        let mut va = vec![0.0; d * (d + 1) / 2];
        let mut vb = vec![0.0; d * (d + 1) / 2];
        svec_from_mat(&a, &mut va);
        svec_from_mat(&b, &mut vb);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let tr = (a * b).trace();
        assert!((dot - tr).abs() < 1e-12);
    }

    #[test]
    fn nt_scaling_maps_s_and_z_to_same_lambda() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for spec in [ConeSpec::NonNeg(4), ConeSpec::Soc(5), ConeSpec::Psd(3)] {
            let sys = ConeSystem::new(vec![spec]);
            let s = rand_interior(spec, &mut rng);
            let z = rand_interior(spec, &mut rng);
            let sc = &sys.nt_scalings(&s, &z).expect("interior")[0];
            let mut wz = vec![0.0; spec.len()];
            let mut wts = vec![0.0; spec.len()];
            sc.apply_w(&z, &mut wz);
            sc.apply_wt_inv(&s, &mut wts);
            for i in 0..spec.len() {
                assert!(
                    (wz[i] - wts[i]).abs() < 1e-9,
                    "{spec:?}: W z != W^-T s at {i}: {} vs {}",
                    wz[i],
                    wts[i]
                );
            }
        }
    }

    #[test]
    fn wtw_dense_matches_operator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for spec in [ConeSpec::NonNeg(3), ConeSpec::Soc(4), ConeSpec::Psd(3)] {
            let sys = ConeSystem::new(vec![spec]);
            let s = rand_interior(spec, &mut rng);
            let z = rand_interior(spec, &mut rng);
            let sc = &sys.nt_scalings(&s, &z).expect("interior")[0];
            let len = spec.len();
            let dense = sc.wtw_dense(len);
            let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut wv = vec![0.0; len];
            let mut wtwv = vec![0.0; len];
            sc.apply_w(&v, &mut wv);
            sc.apply_wt(&wv, &mut wtwv);
            let direct = &dense * nalgebra::DVector::from_vec(v);
            for i in 0..len {
                assert!((direct[i] - wtwv[i]).abs() < 1e-8, "{spec:?} row {i}");
            }
        }
    }

    #[test]
    fn jordan_solve_inverts_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for spec in [ConeSpec::NonNeg(4), ConeSpec::Soc(4), ConeSpec::Psd(3)] {
            let lambda = rand_interior(spec, &mut rng);
            let d: Vec<f64> = (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut u = vec![0.0; spec.len()];
            jordan_solve(spec, &lambda, &d, &mut u);
            let mut back = vec![0.0; spec.len()];
            jordan_product(spec, &lambda, &u, &mut back);
            for i in 0..spec.len() {
                assert!((back[i] - d[i]).abs() < 1e-9, "{spec:?} at {i}");
            }
        }
    }

    #[test]
    fn max_step_is_boundary_accurate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for spec in [ConeSpec::NonNeg(4), ConeSpec::Soc(4), ConeSpec::Psd(3)] {
            for _ in 0..20 {
                let u = rand_interior(spec, &mut rng);
                let d: Vec<f64> = (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let t = max_step(spec, &u, &d);
                if t.is_finite() {
                    let feas: Vec<f64> =
                        u.iter().zip(&d).map(|(a, b)| a + 0.999 * t * b).collect();
                    let sys = ConeSystem::new(vec![spec]);
                    assert!(sys.interior_margin(&feas) > -1e-7, "{spec:?} step into cone");
                    let infeas: Vec<f64> =
                        u.iter().zip(&d).map(|(a, b)| a + 1.01 * (t + 1e-9) * b).collect();
                    assert!(sys.interior_margin(&infeas) < 1e-7, "{spec:?} step past boundary");
                }
            }
        }
    }
}
