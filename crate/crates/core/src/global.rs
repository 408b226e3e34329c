//! Integral identities on balls and annuli, the gradient decay bound for
//! exterior solutions, and the nonexistence sweep over regular shoots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HenonError, Result};
use crate::numeric::{adaptive_simpson, linear_fit};
use crate::params::{phi_inv, signed_pow, ProblemParams};
use crate::radial::{shoot_regular, Interpolant, RadialSolution, Terminal, ToleranceConfig};

/// Relative accuracy of the volume quadratures.
const QUAD_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    #[serde(rename = "R")]
    pub r: f64,
    /// Inner radius for the annulus form; 0 for the ball.
    pub r_inner: f64,
    pub term_volume: f64,
    pub term_flux_u: f64,
    pub term_flux_grad: f64,
    pub term_grad_p: f64,
    pub term_potential_boundary: f64,
    pub residual: f64,
    pub scale: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub r_inner: f64,
    /// `∫_{∂} |∇u|^{p-2} ∂_n u · u` with the outward normal.
    pub flux_term: f64,
    pub dirichlet: f64,
    pub potential: f64,
    /// `dirichlet - flux_term - potential`.
    pub residual: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientDecayReport {
    pub exponent: f64,
    pub bound: f64,
    pub holds: bool,
    /// No nonzero derivative samples to fit.
    pub degenerate: bool,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: ProblemParams,
    pub u0: f64,
    /// `p - 1 < q < q_sobolev`.
    pub admissible: bool,
    pub terminal: Terminal,
    pub first_zero: Option<f64>,
    /// First zero of the shoot from `SCALING_FACTOR * u0`.
    pub scaled_first_zero: Option<f64>,
    pub scaling_rel_error: Option<f64>,
    pub red: bool,
}

pub const SCALING_FACTOR: f64 = 2.0;
pub const SCALING_TOL: f64 = 1e-3;

fn check_radius(sol: &RadialSolution, r_inner: f64, r: f64) -> Result<()> {
    let (lo, hi) = (sol.r[0], sol.r[sol.len() - 1]);
    if !(r > r_inner) || r > hi * (1.0 + 1e-12) || (r_inner > 0.0 && r_inner < lo * (1.0 - 1e-12)) {
        return Err(HenonError::InvalidArgument(format!(
            "radii [{r_inner}, {r}] are not covered by the profile on [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Rejects profiles that are not bounded near the origin: the slope of
/// `ln u` against `ln r` over the innermost decade must be small.
fn require_regular(sol: &RadialSolution) -> Result<()> {
    let r0 = sol.r[0];
    let (x, y): (Vec<f64>, Vec<f64>) = (0..sol.len())
        .filter(|&i| sol.r[i] <= 10.0 * r0 && sol.u[i] > 0.0)
        .map(|i| (sol.r[i].ln(), sol.u[i].ln()))
        .unzip();
    if x.len() >= 3 {
        if let Some((slope, _, _)) = linear_fit(&x, &y) {
            if slope.abs() > 0.05 {
                return Err(HenonError::InvalidArgument(format!(
                    "the ball identities need a regular profile; ln u has slope {slope:.3} in ln r near the origin"
                )));
            }
        }
    }
    Ok(())
}

struct Integrals {
    potential: f64,
    dirichlet: f64,
}

/// `∫ r^{N-1+α} u^{q+1}` and `∫ r^{N-1} |u'|^p` over `[r_inner, r]`; for
/// `r_inner = 0` the stretch below the first sample is added from the
/// leading-order regular expansion.
fn integrals(sol: &RadialSolution, r_inner: f64, r: f64) -> Integrals {
    let params = &sol.params;
    let (n, p, q, a) = (params.dim(), params.p, params.q, params.alpha);
    let interp = Interpolant::from_equation(sol);
    let pot = |x: f64| {
        let (u, _) = interp.eval(x);
        x.powf(n - 1.0 + a) * signed_pow(u, q) * u
    };
    let dir = |x: f64| {
        let (_, f) = interp.eval(x);
        f * phi_inv(f * x.powf(1.0 - n), p)
    };
    let lo = if r_inner > 0.0 { r_inner } else { sol.r[0] };
    let rough = |g: &dyn Fn(f64) -> f64| {
        let k = 64;
        (0..=k)
            .map(|i| g(lo + (r - lo) * i as f64 / k as f64).abs())
            .fold(0.0, f64::max)
            * (r - lo)
    };
    let tol_p = QUAD_RTOL * rough(&pot).max(f64::MIN_POSITIVE);
    let tol_d = QUAD_RTOL * rough(&dir).max(f64::MIN_POSITIVE);
    let mut potential = integrate_on_samples(sol, &pot, lo, r, tol_p);
    let mut dirichlet = integrate_on_samples(sol, &dir, lo, r, tol_d);
    if r_inner == 0.0 {
        // u ≈ u(0), |u'| ∝ r^{(1+α)/(p-1)} below the first sample.
        let r0 = sol.r[0];
        potential += pot(r0) * r0 / (n + a);
        dirichlet += dir(r0) * r0 / (n + p * (1.0 + a) / (p - 1.0));
    }
    Integrals { potential, dirichlet }
}

/// Adaptive Simpson on each sample interval, so the refinement follows the
/// profile's own grid.
fn integrate_on_samples(sol: &RadialSolution, g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let mut knots: Vec<f64> = vec![lo];
    knots.extend(sol.r.iter().copied().filter(|&x| x > lo && x < hi));
    knots.push(hi);
    let share = tol / knots.len() as f64;
    knots.windows(2).map(|w| adaptive_simpson(&g, w[0], w[1], share)).sum()
}

struct Boundary {
    flux_u: f64,
    flux_grad: f64,
    grad_p: f64,
    potential: f64,
    flux_term: f64,
}

fn boundary(sol: &RadialSolution, r: f64) -> Boundary {
    let params = &sol.params;
    let (n, p, q, a) = (params.dim(), params.p, params.q, params.alpha);
    let omega = params.omega();
    let (u, f) = Interpolant::from_equation(sol).eval(r);
    let du = phi_inv(f * r.powf(1.0 - n), p);
    // r^{N-1} Φ(u') u' = r^{N-1} |u'|^p
    let grad = omega * r * f * du;
    Boundary {
        flux_u: (n / p - 1.0) * omega * f * u,
        flux_grad: grad,
        grad_p: -grad / p,
        potential: omega * r.powf(n + a) * signed_pow(u, q) * u / (q + 1.0),
        flux_term: omega * f * u,
    }
}

fn pohozaev_report(sol: &RadialSolution, r_inner: f64, r: f64) -> PohozaevReport {
    let params = &sol.params;
    let (n, p, q, a) = (params.dim(), params.p, params.q, params.alpha);
    let coeff = n / p - 1.0 - (n + a) / (q + 1.0);
    let ints = integrals(sol, r_inner, r);
    let outer = boundary(sol, r);
    let (flux_u, flux_grad, grad_p, potential) = if r_inner > 0.0 {
        let inner = boundary(sol, r_inner);
        (
            outer.flux_u - inner.flux_u,
            outer.flux_grad - inner.flux_grad,
            outer.grad_p - inner.grad_p,
            outer.potential - inner.potential,
        )
    } else {
        (outer.flux_u, outer.flux_grad, outer.grad_p, outer.potential)
    };
    let term_volume = coeff * params.omega() * ints.potential;
    let terms = [term_volume, flux_u, flux_grad, grad_p, potential];
    let residual: f64 = terms.iter().sum();
    let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    PohozaevReport {
        r,
        r_inner,
        term_volume,
        term_flux_u: flux_u,
        term_flux_grad: flux_grad,
        term_grad_p: grad_p,
        term_potential_boundary: potential,
        residual,
        scale,
        relative_residual: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
    }
}

/// The Pohozaev identity on the ball `B_R`, from multiplying the equation by
/// `x·∇u`. Every term carries the surface factor `ω_{N-1}`.
pub fn pohozaev_terms(sol: &RadialSolution, params: &ProblemParams, r: f64) -> Result<PohozaevReport> {
    same_params(sol, params)?;
    check_radius(sol, 0.0, r)?;
    require_regular(sol)?;
    Ok(pohozaev_report(sol, 0.0, r))
}

/// The same identity on the annulus `a < |x| < b`; boundary terms are
/// differences between the two spheres. Valid for singular profiles.
pub fn pohozaev_annulus(sol: &RadialSolution, params: &ProblemParams, a: f64, b: f64) -> Result<PohozaevReport> {
    same_params(sol, params)?;
    if !(a > 0.0) {
        return Err(HenonError::InvalidArgument(
            "annulus inner radius must be positive".into(),
        ));
    }
    check_radius(sol, a, b)?;
    Ok(pohozaev_report(sol, a, b))
}

fn energy_report(sol: &RadialSolution, r_inner: f64, r: f64) -> EnergyReport {
    let omega = sol.params.omega();
    let ints = integrals(sol, r_inner, r);
    let mut flux_term = boundary(sol, r).flux_term;
    if r_inner > 0.0 {
        flux_term -= boundary(sol, r_inner).flux_term;
    }
    let dirichlet = omega * ints.dirichlet;
    let potential = omega * ints.potential;
    let residual = dirichlet - flux_term - potential;
    let scale = flux_term.abs().max(dirichlet.abs()).max(potential.abs());
    EnergyReport {
        r,
        r_inner,
        flux_term,
        dirichlet,
        potential,
        residual,
        relative_residual: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
    }
}

/// The identity from multiplying the equation by `u` on `B_R`.
pub fn energy_identity(sol: &RadialSolution, params: &ProblemParams, r: f64) -> Result<EnergyReport> {
    same_params(sol, params)?;
    check_radius(sol, 0.0, r)?;
    require_regular(sol)?;
    Ok(energy_report(sol, 0.0, r))
}

pub fn energy_annulus(sol: &RadialSolution, params: &ProblemParams, a: f64, b: f64) -> Result<EnergyReport> {
    same_params(sol, params)?;
    if !(a > 0.0) {
        return Err(HenonError::InvalidArgument(
            "annulus inner radius must be positive".into(),
        ));
    }
    check_radius(sol, a, b)?;
    Ok(energy_report(sol, a, b))
}

fn same_params(sol: &RadialSolution, params: &ProblemParams) -> Result<()> {
    params.validate()?;
    if sol.params != *params {
        return Err(HenonError::InvalidArgument(
            "profile was computed for different parameters".into(),
        ));
    }
    Ok(())
}

/// Sum of the four boundary terms of the Pohozaev identity at radius `r`.
pub fn pohozaev_boundary_sum(sol: &RadialSolution, r: f64) -> Result<f64> {
    check_radius(sol, 0.0, r)?;
    let b = boundary(sol, r);
    Ok(b.flux_u + b.flux_grad + b.grad_p + b.potential)
}

/// Fits the decay exponent of `|u'|` over the outer two decades of an
/// exterior profile and compares it with `-(q+1+α)/(q+1-p)`.
pub fn gradient_decay_check(sol: &RadialSolution, params: &ProblemParams) -> Result<GradientDecayReport> {
    same_params(sol, params)?;
    let qs = params
        .q_serrin()
        .ok_or_else(|| HenonError::InvalidArgument("gradient decay bound is stated for p < N".into()))?;
    if !(params.q > qs) {
        return Err(HenonError::InvalidArgument(
            "gradient decay bound needs q > q_serrin".into(),
        ));
    }
    let (r_lo, r_hi) = (sol.r[0], sol.r[sol.len() - 1]);
    if r_hi < 10.0 * r_lo {
        return Err(HenonError::InsufficientData(
            "gradient decay fit needs a decade of samples".into(),
        ));
    }
    let from = r_lo.max(r_hi / 100.0);
    let bound = -(params.q + 1.0 + params.alpha) / (params.q + 1.0 - params.p) + 0.05;
    let du = sol.du();
    let (x, y): (Vec<f64>, Vec<f64>) = (0..sol.len())
        .filter(|&i| sol.r[i] >= from && du[i] != 0.0)
        .map(|i| (sol.r[i].ln(), du[i].abs().ln()))
        .unzip();
    if x.len() < 3 {
        return Ok(GradientDecayReport {
            exponent: f64::NEG_INFINITY,
            bound,
            holds: true,
            degenerate: true,
            window: (from, r_hi),
        });
    }
    let (exponent, _, _) = linear_fit(&x, &y).ok_or_else(|| HenonError::Numerical("gradient fit failed".into()))?;
    Ok(GradientDecayReport {
        exponent,
        bound,
        holds: exponent <= bound,
        degenerate: false,
        window: (from, r_hi),
    })
}

fn sweep_row(params: &ProblemParams, u0: f64, r_max: f64, tol: &ToleranceConfig) -> Result<SweepRow> {
    let admissible = params.q > params.p - 1.0 && params.q_sobolev().is_none_or(|qs| params.q < qs);
    let shot = shoot_regular(params, u0, r_max, tol)?;
    let (mut scaled_first_zero, mut scaling_rel_error) = (None, None);
    if let Some(r1) = shot.first_zero {
        let scaled = shoot_regular(params, SCALING_FACTOR * u0, r_max, tol)?;
        scaled_first_zero = scaled.first_zero;
        if let Some(r2) = scaled.first_zero {
            let predicted = r1 * SCALING_FACTOR.powf(-1.0 / params.delta());
            scaling_rel_error = Some((r2 - predicted).abs() / predicted);
        }
    }
    let red = admissible && (shot.terminal != Terminal::HitZero || scaling_rel_error.is_none_or(|e| e > SCALING_TOL));
    Ok(SweepRow {
        params: *params,
        u0,
        admissible,
        terminal: shot.terminal,
        first_zero: shot.first_zero,
        scaled_first_zero,
        scaling_rel_error,
        red,
    })
}

/// Shoots the regular solution from `u0` for every grid point, in parallel
/// on the current rayon pool; rows come back in grid order.
pub fn nonexistence_sweep(grid: &[ProblemParams], u0: f64, r_max: f64, tol: &ToleranceConfig) -> Result<Vec<SweepRow>> {
    if !(u0 > 0.0) || !u0.is_finite() {
        return Err(HenonError::InvalidArgument(format!("u0 must be positive, got {u0}")));
    }
    grid.par_iter()
        .map(|params| sweep_row(params, u0, r_max, tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::geometric_grid;
    use crate::radial::{exact_singular_solution, SolveMeta};

    fn pp(n: u32, p: f64, q: f64, a: f64) -> ProblemParams {
        ProblemParams::new(n, p, q, a).unwrap()
    }

    #[test]
    fn zero_profile_identities_vanish() {
        let params = pp(3, 2.0, 3.0, 0.0);
        let shot = shoot_regular(&params, 0.0, 10.0, &ToleranceConfig::default()).unwrap();
        let rep = pohozaev_terms(&shot.solution, &params, 5.0).unwrap();
        assert_eq!(rep.scale, 0.0);
        assert_eq!(rep.residual, 0.0);
        let e = energy_identity(&shot.solution, &params, 5.0).unwrap();
        assert_eq!((e.flux_term, e.dirichlet, e.potential), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identities_on_regular_shoot() {
        let params = pp(3, 2.0, 3.0, 0.0);
        let shot = shoot_regular(&params, 1.0, 1e4, &ToleranceConfig::default()).unwrap();
        let r1 = shot.first_zero.unwrap();
        for r in [0.5 * r1, 0.9 * r1, r1 * (1.0 - 1e-6)] {
            let rep = pohozaev_terms(&shot.solution, &params, r).unwrap();
            assert!(rep.relative_residual < 1e-6, "R={r}: {rep:?}");
            let e = energy_identity(&shot.solution, &params, r).unwrap();
            assert!(e.relative_residual < 1e-6, "R={r}: {e:?}");
        }
    }

    #[test]
    fn ball_identities_reject_singular_profiles() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let sing = exact_singular_solution(&params, &geometric_grid(1e-3, 10.0, 400)).unwrap();
        assert!(pohozaev_terms(&sing, &params, 1.0).is_err());
        let ann = pohozaev_annulus(&sing, &params, 0.1, 5.0).unwrap();
        assert!(ann.relative_residual < 1e-8, "{ann:?}");
        let e = energy_annulus(&sing, &params, 0.1, 5.0).unwrap();
        assert!(e.relative_residual < 1e-6, "{e:?}");
    }

    #[test]
    fn p_harmonic_annulus_energy() {
        let params = pp(3, 3.0 / 2.0, 1.0, 0.0);
        // With u tiny the source is negligible: Dirichlet energy equals the
        // boundary flux difference.
        let grid = geometric_grid(1.0, 4.0, 400);
        let beta = params.beta().unwrap();
        let amp = 1e-30;
        let n = params.dim();
        let u: Vec<f64> = grid.iter().map(|r| amp * r.powf(beta)).collect();
        let flux = grid
            .iter()
            .map(|r| r.powf(n - 1.0) * crate::params::phi(amp * beta * r.powf(beta - 1.0), params.p))
            .collect();
        let sol = RadialSolution::new(params, grid, u, flux, SolveMeta::analytic("p-harmonic")).unwrap();
        let e = energy_annulus(&sol, &params, 1.0, 4.0).unwrap();
        assert!(e.potential.abs() < 1e-12 * e.dirichlet.abs());
        assert!(e.relative_residual < 1e-8);
    }

    #[test]
    fn gradient_decay_examples() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let sing = exact_singular_solution(&params, &geometric_grid(1.0, 1e3, 300)).unwrap();
        let rep = gradient_decay_check(&sing, &params).unwrap();
        let target = -(params.q + 1.0 + params.alpha) / (params.q + 1.0 - params.p);
        assert!((rep.exponent - target).abs() < 1e-6 && rep.holds);

        let grid = geometric_grid(1.0, 1e3, 300);
        let n = params.dim();
        let mu: Vec<(f64, f64)> = grid
            .iter()
            .map(|&r| crate::params::fundamental_solution(&params, r).unwrap())
            .collect();
        let flux = grid
            .iter()
            .zip(&mu)
            .map(|(r, m)| r.powf(n - 1.0) * crate::params::phi(m.1, params.p))
            .collect();
        let harmonic = RadialSolution::new(
            params,
            grid,
            mu.iter().map(|m| m.0).collect(),
            flux,
            SolveMeta::analytic("mu"),
        )
        .unwrap();
        let rep = gradient_decay_check(&harmonic, &params).unwrap();
        assert!((rep.exponent + (n - 1.0) / (params.p - 1.0)).abs() < 1e-6);
        assert!(rep.holds, "{rep:?}");

        let grid = geometric_grid(1.0, 1e3, 50);
        let ones = vec![1.0; 50];
        let flat = RadialSolution::new(params, grid, ones, vec![0.0; 50], SolveMeta::analytic("flat")).unwrap();
        assert!(gradient_decay_check(&flat, &params).unwrap().degenerate);
    }

    #[test]
    fn boundary_terms_of_exact_singular_scale_with_radius() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let sing = exact_singular_solution(&params, &geometric_grid(1.0, 1e3, 400)).unwrap();
        let (n, p, q, a) = (3.0, 2.0, 4.0, 0.0);
        let expected = n - p - (p + a) * p / (q + 1.0 - p);
        let (x, y): (Vec<f64>, Vec<f64>) = [2.0, 10.0, 50.0, 200.0]
            .iter()
            .map(|&r: &f64| (r.ln(), pohozaev_boundary_sum(&sing, r).unwrap().abs().ln()))
            .unzip();
        let (slope, _, _) = linear_fit(&x, &y).unwrap();
        assert!((slope - expected).abs() < 0.1 * expected.abs());
    }

    #[test]
    fn volume_coefficient_sign_matches_sobolev_threshold() {
        for n in 3..6u32 {
            for &p in &[1.5, 2.0, 2.5] {
                for &a in &[0.0, 1.0, 2.0] {
                    let base = pp(n, p, p, a);
                    let qs = base.q_sobolev().unwrap();
                    for &q in &[0.5 * (p - 1.0 + qs), qs + 0.5] {
                        let nn = f64::from(n);
                        let coeff = nn / p - 1.0 - (nn + a) / (q + 1.0);
                        assert_eq!(coeff < 0.0, q < qs);
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_examples() {
        let tol = ToleranceConfig::default();
        let grid = [pp(3, 2.0, 3.0, 0.0), pp(3, 2.0, 4.0, 2.0), pp(3, 2.0, 5.0, 0.0)];
        let rows = nonexistence_sweep(&grid, 1.0, 1e4, &tol).unwrap();
        assert_eq!(rows[0].terminal, Terminal::HitZero);
        assert_eq!(rows[1].terminal, Terminal::HitZero);
        assert!(!rows[0].red && !rows[1].red);
        assert!(rows[0].scaling_rel_error.unwrap() < 1e-3);
        assert!(!rows[2].admissible);
        assert_eq!(rows[2].terminal, Terminal::ReachedRMax);
        assert!(!rows[2].red);
    }
}
