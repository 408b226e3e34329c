//! Radial Dirichlet problems `-(r^{N-1} Φ(u'))' = r^{N-1} g(r)` on annuli,
//! solved by shooting on the flux constant, and the monotone iteration
//! built on them.

use serde::{Deserialize, Serialize};

use crate::error::{HenonError, Result};
use crate::numeric::cumulative_integral;
use crate::params::{phi, phi_inv, signed_pow, ProblemParams};
use crate::radial::{RadialSolution, SolveMeta};

pub const DEFAULT_NODES: usize = 2049;
const MAX_BISECTIONS: usize = 200;
pub const BLOW_UP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusBVP {
    pub params: ProblemParams,
    pub a: f64,
    pub b: f64,
    pub ua: f64,
    pub ub: f64,
    /// Solver mesh on `[a, b]`.
    pub mesh: Vec<f64>,
    /// Source `g` sampled on `mesh`.
    pub rhs: Vec<f64>,
}

/// Mesh on `[a, b]` whose spacing grows geometrically away from `a`, by a
/// total factor of ten.
pub fn graded_mesh(a: f64, b: f64, nodes: usize) -> Vec<f64> {
    let rho = 10f64.powf(1.0 / (nodes - 1) as f64);
    let total = rho.powi(nodes as i32 - 1) - 1.0;
    let mut mesh: Vec<f64> = (0..nodes)
        .map(|i| a + (b - a) * (rho.powi(i as i32) - 1.0) / total)
        .collect();
    mesh[0] = a;
    mesh[nodes - 1] = b;
    mesh
}

impl AnnulusBVP {
    /// Samples `g` on the default graded mesh.
    pub fn new(params: ProblemParams, a: f64, b: f64, ua: f64, ub: f64, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::with_nodes(params, a, b, ua, ub, g, DEFAULT_NODES)
    }

    pub fn with_nodes(
        params: ProblemParams,
        a: f64,
        b: f64,
        ua: f64,
        ub: f64,
        g: impl Fn(f64) -> f64,
        nodes: usize,
    ) -> Result<Self> {
        if nodes < 9 || nodes.is_multiple_of(2) {
            return Err(HenonError::InvalidArgument(format!(
                "node count must be odd and at least 9, got {nodes}"
            )));
        }
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(HenonError::InvalidArgument(format!(
                "need 0 < a < b, got a = {a}, b = {b}"
            )));
        }
        let mesh = graded_mesh(a, b, nodes);
        let rhs = mesh.iter().map(|&r| g(r)).collect();
        let bvp = Self {
            params,
            a,
            b,
            ua,
            ub,
            mesh,
            rhs,
        };
        bvp.validate()?;
        Ok(bvp)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.a > 0.0 && self.b > self.a && self.b.is_finite()) {
            return Err(HenonError::InvalidArgument(format!(
                "need 0 < a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.ua >= 0.0 && self.ub >= 0.0 && self.ua.is_finite() && self.ub.is_finite()) {
            return Err(HenonError::InvalidArgument(
                "boundary values must be finite and nonnegative".into(),
            ));
        }
        let n = self.mesh.len();
        if n < 9 || n.is_multiple_of(2) || self.rhs.len() != n {
            return Err(HenonError::InvalidArgument(
                "mesh must have an odd number (>= 9) of nodes matching rhs".into(),
            ));
        }
        if self.mesh[0] != self.a || self.mesh[n - 1] != self.b || self.mesh.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HenonError::InvalidArgument(
                "mesh must increase strictly from a to b".into(),
            ));
        }
        if self.rhs.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(HenonError::InvalidArgument(
                "source must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSolution {
    pub solution: RadialSolution,
    /// The constant `c` in `r^{N-1} Φ(u') = c - ∫_a^r s^{N-1} g`.
    pub flux_constant: f64,
    pub bisections: usize,
    /// Difference at shared nodes against the solve on every other node,
    /// divided by 15 (fourth-order Richardson estimate).
    pub richardson_error: f64,
    pub bracket: (f64, f64),
}

struct Quadrature<'a> {
    mesh: &'a [f64],
    cumulative_source: Vec<f64>,
    inv_weight: Vec<f64>,
    p: f64,
}

impl<'a> Quadrature<'a> {
    fn new(params: &ProblemParams, mesh: &'a [f64], rhs: &[f64]) -> Self {
        let n = params.dim();
        let weighted: Vec<f64> = mesh.iter().zip(rhs).map(|(r, g)| r.powf(n - 1.0) * g).collect();
        Self {
            mesh,
            cumulative_source: cumulative_integral(mesh, &weighted),
            inv_weight: mesh.iter().map(|r| r.powf(1.0 - n)).collect(),
            p: params.p,
        }
    }

    fn slopes(&self, c: f64) -> Vec<f64> {
        self.cumulative_source
            .iter()
            .zip(&self.inv_weight)
            .map(|(g, w)| phi_inv((c - g) * w, self.p))
            .collect()
    }

    fn profile(&self, c: f64, ua: f64) -> Vec<f64> {
        cumulative_integral(self.mesh, &self.slopes(c))
            .into_iter()
            .map(|v| ua + v)
            .collect()
    }

    fn end_value(&self, c: f64, ua: f64) -> f64 {
        *self.profile(c, ua).last().expect("nonempty mesh")
    }
}

/// Solves the annulus problem to `|u(b) - ub| < tol · max(1, |ub|)`.
pub fn solve_annulus(bvp: &AnnulusBVP, tol: f64) -> Result<AnnulusSolution> {
    bvp.validate()?;
    if !(tol > 0.0) {
        return Err(HenonError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let params = &bvp.params;
    let quad = Quadrature::new(params, &bvp.mesh, &bvp.rhs);
    // p-harmonic extremes: with the source ignored the flux constant c_h
    // hits ub exactly; with the full source added it overshoots.
    let unit: Vec<f64> = quad.inv_weight.iter().map(|w| phi_inv(*w, params.p)).collect();
    let reach = *cumulative_integral(&bvp.mesh, &unit).last().expect("nonempty mesh");
    let c_h = phi((bvp.ub - bvp.ua) / reach, params.p);
    let total = *quad.cumulative_source.last().expect("nonempty mesh");
    let target = bvp.ub;
    let accept = tol * target.abs().max(1.0);
    let (mut lo, mut hi) = (c_h, c_h + total);
    let widen = 1e-12 * (c_h.abs() + total).max(f64::MIN_POSITIVE);
    let (f_lo, f_hi) = (quad.end_value(lo, bvp.ua) - target, quad.end_value(hi, bvp.ua) - target);
    if f_lo > accept || f_hi < -accept {
        // Rounding in the quadrature can push the endpoints marginally.
        lo -= widen;
        hi += widen;
        let (f_lo, f_hi) = (quad.end_value(lo, bvp.ua) - target, quad.end_value(hi, bvp.ua) - target);
        if f_lo > accept || f_hi < -accept {
            return Err(HenonError::Numerical(format!(
                "flux bracket [{lo}, {hi}] does not enclose u(b) = {target}: endpoint misfits {f_lo}, {f_hi}"
            )));
        }
    }
    let bracket = (lo, hi);
    let mut c = 0.5 * (lo + hi);
    let mut bisections = 0;
    let mut best = (f64::INFINITY, c);
    for _ in 0..MAX_BISECTIONS {
        let f = quad.end_value(c, bvp.ua) - target;
        if f.abs() < best.0 {
            best = (f.abs(), c);
        }
        if f.abs() < accept || hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
        if f < 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        c = 0.5 * (lo + hi);
        bisections += 1;
    }
    let c = best.1;
    if !(best.0 < accept) {
        return Err(HenonError::Numerical(format!(
            "bisection stalled with |u(b) - ub| = {:e} > {accept:e}",
            best.0
        )));
    }
    let u = quad.profile(c, bvp.ua);
    let flux: Vec<f64> = quad.cumulative_source.iter().map(|g| c - g).collect();

    let coarse_mesh: Vec<f64> = bvp.mesh.iter().step_by(2).copied().collect();
    let coarse_rhs: Vec<f64> = bvp.rhs.iter().step_by(2).copied().collect();
    let coarse = Quadrature::new(params, &coarse_mesh, &coarse_rhs).profile(c, bvp.ua);
    let richardson_error = coarse
        .iter()
        .zip(u.iter().step_by(2))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / 15.0;
    let meta = SolveMeta {
        rtol: Some(tol),
        ..SolveMeta::analytic("annulus")
    };
    let solution = RadialSolution::new(*params, bvp.mesh.clone(), u, flux, meta)?;
    Ok(AnnulusSolution {
        solution,
        flux_constant: c,
        bisections,
        richardson_error,
        bracket,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterates: Vec<RadialSolution>,
    /// `sup |u_k - u_{k-1}|` for every step.
    pub deltas: Vec<f64>,
    /// `max (u_{k-1} - u_k)` over nodes and steps; nonpositive for a
    /// monotone sequence.
    pub max_monotonicity_violation: f64,
    pub converged: bool,
    pub blew_up: bool,
}

/// `u_0 ≡ 0`, `-Δ_p u_k = |x|^α u_{k-1}^q` on `a < |x| < b` with
/// `u_k(a) = m`, `u_k(b) = 0`.
pub fn monotone_iteration(
    params: &ProblemParams,
    m: f64,
    a: f64,
    b: f64,
    k_max: usize,
    tol: f64,
    nodes: usize,
) -> Result<IterationTrace> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(HenonError::InvalidArgument(format!("m must be positive, got {m}")));
    }
    if !(tol > 0.0) {
        return Err(HenonError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let mut bvp = AnnulusBVP::with_nodes(*params, a, b, m, 0.0, |_| 0.0, nodes)?;
    let mut prev: Vec<f64> = vec![0.0; bvp.mesh.len()];
    let mut trace = IterationTrace {
        iterates: Vec::new(),
        deltas: Vec::new(),
        max_monotonicity_violation: f64::NEG_INFINITY,
        converged: false,
        blew_up: false,
    };
    // The boundary solves are pushed well below the iteration tolerance.
    let solve_tol = (1e-3 * tol).min(1e-12);
    for _ in 0..k_max {
        bvp.rhs = bvp
            .mesh
            .iter()
            .zip(&prev)
            .map(|(&r, &u)| r.powf(params.alpha) * signed_pow(u.max(0.0), params.q))
            .collect();
        let next = solve_annulus(&bvp, solve_tol)?.solution;
        let delta = next.u.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let violation = prev
            .iter()
            .zip(&next.u)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        trace.max_monotonicity_violation = trace.max_monotonicity_violation.max(violation);
        let sup = next.u.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        prev.clone_from(&next.u);
        trace.iterates.push(next);
        trace.deltas.push(delta);
        if !sup.is_finite() || sup > BLOW_UP {
            trace.blew_up = true;
            break;
        }
        if delta < tol {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{max_abs, ode_residual};

    fn pp(n: u32, p: f64, q: f64, a: f64) -> ProblemParams {
        ProblemParams::new(n, p, q, a).unwrap()
    }

    #[test]
    fn harmonic_annulus() {
        let bvp = AnnulusBVP::new(pp(3, 2.0, 3.0, 0.0), 1.0, 2.0, 1.0, 0.0, |_| 0.0).unwrap();
        let sol = solve_annulus(&bvp, 1e-13).unwrap();
        for (r, u) in sol.solution.r.iter().zip(&sol.solution.u) {
            assert!((u - (2.0 / r - 1.0)).abs() < 1e-10);
        }
        assert!(sol.richardson_error < 1e-10);
    }

    #[test]
    fn p_harmonic_annulus() {
        for (n, p) in [(3, 1.5), (4, 2.5), (5, 3.0)] {
            let params = pp(n, p, p, 0.0);
            let (a, b, ua, ub): (f64, f64, f64, f64) = (0.5, 3.0, 2.0, 0.5);
            let beta = params.beta().unwrap();
            // u = A + B r^β through the boundary data
            let bb = (ua - ub) / (a.powf(beta) - b.powf(beta));
            let aa = ua - bb * a.powf(beta);
            let sol = solve_annulus(&AnnulusBVP::new(params, a, b, ua, ub, |_| 0.0).unwrap(), 1e-13).unwrap();
            for (r, u) in sol.solution.r.iter().zip(&sol.solution.u) {
                assert!((u - (aa + bb * r.powf(beta))).abs() < 1e-9, "N={n} p={p} r={r}");
            }
        }
    }

    #[test]
    fn exact_singular_source() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let (lambda, delta) = (params.lambda().unwrap(), params.delta());
        let exact = |r: f64| lambda * r.powf(-delta);
        let bvp = AnnulusBVP::new(params, 1.0, 3.0, exact(1.0), exact(3.0), |r| {
            r.powf(params.alpha) * exact(r).powf(params.q)
        })
        .unwrap();
        let sol = solve_annulus(&bvp, 1e-13).unwrap();
        for (r, u) in sol.solution.r.iter().zip(&sol.solution.u) {
            assert!((u - exact(*r)).abs() < 1e-8);
        }
    }

    #[test]
    fn bvp_validation() {
        let params = pp(3, 2.0, 3.0, 0.0);
        assert!(AnnulusBVP::new(params, 2.0, 1.0, 1.0, 0.0, |_| 0.0).is_err());
        assert!(AnnulusBVP::new(params, 1.0, 2.0, -1.0, 0.0, |_| 0.0).is_err());
        assert!(AnnulusBVP::new(params, 1.0, 2.0, 1.0, 0.0, |_| -1.0).is_err());
    }

    #[test]
    fn iteration_first_step_is_p_harmonic() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let trace = monotone_iteration(&params, 0.01, 2.0, 8.0, 1, 1e-10, DEFAULT_NODES).unwrap();
        let u1 = &trace.iterates[0];
        // u = A + B/r with u(2) = m, u(8) = 0
        for (r, u) in u1.r.iter().zip(&u1.u) {
            assert!((u - 0.01 * (8.0 / r - 1.0) / 3.0).abs() < 1e-12 + 1e-10 * 0.01);
        }
    }

    #[test]
    fn supercritical_iteration_converges_monotonically() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let trace = monotone_iteration(&params, 0.01, 2.0, 8.0, 200, 1e-9, DEFAULT_NODES).unwrap();
        assert!(trace.converged && !trace.blew_up);
        assert!(trace.max_monotonicity_violation < 1e-10);
        let limit = trace.iterates.last().unwrap();
        assert!((limit.u[0] - 0.01).abs() < 1e-9 && limit.u.last().unwrap().abs() < 1e-9);
        assert!(max_abs(&ode_residual(limit).unwrap()) < 1e-6);
    }
}
