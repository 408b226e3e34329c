//! Radial profiles of `(r^{N-1} Φ(u'))' + r^{N-1+α} u^q = 0`.
//!
//! The integrator state is `(u, F)` with the flux `F = r^{N-1} Φ(u')`; the
//! derivative `u' = Φ^{-1}(F r^{1-N})` is recovered pointwise, which keeps
//! the vector field continuous for every `p > 1`.

use serde::{Deserialize, Serialize};

use crate::error::{HenonError, Result};
use crate::numeric::{derivative5, geometric_grid, hermite};
use crate::ode::{bisect_event, integrate, DenseStep, Flow, StepFailure, StepStats, StepperConfig};
use crate::params::{fundamental_solution, phi, phi_inv, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Number of output samples.
    pub samples: usize,
    /// Default startup radius as a fraction of `r_max`.
    pub startup_factor: f64,
    /// Allowed relative change when the startup radius is halved.
    pub startup_check: f64,
    pub blow_up: f64,
    pub min_step_rel: f64,
    /// Absolute accuracy in `r` of the first-zero refinement.
    pub zero_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            samples: 4001,
            startup_factor: 1e-6,
            startup_check: 1e-8,
            blow_up: 1e12,
            min_step_rel: 1e-14,
            zero_tol: 1e-12,
        }
    }
}

impl ToleranceConfig {
    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            rtol: self.rtol,
            atol: self.atol,
            min_step_rel: self.min_step_rel,
            ..StepperConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.rtol,
            self.atol,
            self.startup_factor,
            self.startup_check,
            self.blow_up,
            self.zero_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.samples < 5 {
            return Err(HenonError::InvalidArgument(format!(
                "invalid tolerance configuration {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    ReachedRMax,
    HitZero,
    BlowUp,
    StepUnderflow,
}

/// How a profile was produced and with which integrator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SolveMeta {
    pub origin: String,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub evaluations: usize,
    pub terminal: Option<Terminal>,
    pub first_zero: Option<f64>,
    pub startup_radius: Option<f64>,
}

impl SolveMeta {
    pub fn analytic(origin: &str) -> Self {
        Self {
            origin: origin.to_string(),
            ..Self::default()
        }
    }
}

/// A sampled radial profile `(r, u, F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub params: ProblemParams,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub flux: Vec<f64>,
    pub meta: SolveMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub solution: RadialSolution,
    pub first_zero: Option<f64>,
    pub terminal: Terminal,
}

/// The two exterior envelopes `c1 μ(r) <= u(r) <= c2 r^{-δ}` fitted over a
/// window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub window: (f64, f64),
    pub c1: f64,
    pub c2: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorResult {
    pub solution: RadialSolution,
    pub terminal: Terminal,
    pub first_zero: Option<f64>,
    pub envelope: Option<EnvelopeReport>,
}

impl RadialSolution {
    pub fn new(params: ProblemParams, r: Vec<f64>, u: Vec<f64>, flux: Vec<f64>, meta: SolveMeta) -> Result<Self> {
        let sol = Self {
            params,
            r,
            u,
            flux,
            meta,
        };
        sol.validate()?;
        Ok(sol)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.r.len();
        if n == 0 || self.u.len() != n || self.flux.len() != n {
            return Err(HenonError::InvalidArgument(format!(
                "profile columns differ in length or are empty (r={}, u={}, flux={})",
                n,
                self.u.len(),
                self.flux.len()
            )));
        }
        if self.r[0] <= 0.0 || self.r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HenonError::InvalidArgument(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        if self.r.iter().chain(&self.u).chain(&self.flux).any(|v| !v.is_finite()) {
            return Err(HenonError::InvalidArgument(
                "profile contains non-finite samples".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `u'(r_i) = Φ^{-1}(F_i r_i^{1-N})`.
    pub fn du_at(&self, i: usize) -> f64 {
        let n = self.params.dim();
        phi_inv(self.flux[i] * self.r[i].powf(1.0 - n), self.params.p)
    }

    pub fn du(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.du_at(i)).collect()
    }

    /// Restricts the profile to `lo <= r <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.r[i] >= lo && self.r[i] <= hi)
            .collect();
        if idx.is_empty() {
            return Err(HenonError::InsufficientData(format!("no samples in [{lo}, {hi}]")));
        }
        Ok(Self {
            params: self.params,
            r: idx.iter().map(|&i| self.r[i]).collect(),
            u: idx.iter().map(|&i| self.u[i]).collect(),
            flux: idx.iter().map(|&i| self.flux[i]).collect(),
            meta: self.meta.clone(),
        })
    }

    /// `F` strictly decreasing on every stretch where `u > 0`.
    pub fn flux_decreasing_where_positive(&self) -> bool {
        (1..self.len()).all(|i| !(self.u[i - 1] > 0.0 && self.u[i] > 0.0) || self.flux[i] < self.flux[i - 1])
    }
}

/// Cubic Hermite interpolant of `u` and `F` between samples. Slopes of `u`
/// come from the flux; slopes of `F` either from the equation itself or from
/// five-point differences of the samples (for profiles that are not
/// solutions).
pub struct Interpolant<'a> {
    sol: &'a RadialSolution,
    du: Vec<f64>,
    dflux: Vec<f64>,
}

impl<'a> Interpolant<'a> {
    pub fn from_equation(sol: &'a RadialSolution) -> Self {
        let params = &sol.params;
        let n = params.dim();
        let dflux = (0..sol.len())
            .map(|i| -sol.r[i].powf(n - 1.0) * params.source(sol.r[i], sol.u[i]))
            .collect();
        Self {
            sol,
            du: sol.du(),
            dflux,
        }
    }

    pub fn from_samples(sol: &'a RadialSolution) -> Result<Self> {
        if sol.len() < 5 {
            return Err(HenonError::InsufficientData(
                "interpolation needs at least 5 samples".into(),
            ));
        }
        Ok(Self {
            sol,
            du: sol.du(),
            dflux: derivative5(&sol.r, &sol.flux),
        })
    }

    /// `(u, F)` at `x` inside the sampled range.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let r = &self.sol.r;
        let last = r.len() - 1;
        let i = match r.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return (self.sol.u[i], self.sol.flux[i]),
            Err(0) => 0,
            Err(i) if i > last => last - 1,
            Err(i) => i - 1,
        };
        let (x0, x1) = (r[i], r[i + 1]);
        let u = hermite(x0, x1, self.sol.u[i], self.sol.u[i + 1], self.du[i], self.du[i + 1], x);
        let f = hermite(
            x0,
            x1,
            self.sol.flux[i],
            self.sol.flux[i + 1],
            self.dflux[i],
            self.dflux[i + 1],
            x,
        );
        (u, f)
    }

    /// `u'(x)` recovered from the interpolated flux.
    pub fn du(&self, x: f64) -> f64 {
        let (_, f) = self.eval(x);
        phi_inv(f * x.powf(1.0 - self.sol.params.dim()), self.sol.params.p)
    }
}

/// Normalised pointwise residual `(F' + r^{N-1+α} u^q) / max(1, |r^{N-1+α} u^q|)`
/// with `F'` from five-point differences of the flux samples.
pub fn ode_residual(sol: &RadialSolution) -> Result<Vec<f64>> {
    if sol.len() < 5 {
        return Err(HenonError::InsufficientData(format!(
            "residual needs at least 5 samples, got {}",
            sol.len()
        )));
    }
    let n = sol.params.dim();
    let dflux = derivative5(&sol.r, &sol.flux);
    Ok((0..sol.len())
        .map(|i| {
            let src = sol.r[i].powf(n - 1.0) * sol.params.source(sol.r[i], sol.u[i]);
            (dflux[i] + src) / src.abs().max(1.0)
        })
        .collect())
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn radial_field(params: &ProblemParams) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    let n = params.dim();
    move |r, y| {
        let du = phi_inv(y[1] * r.powf(1.0 - n), params.p);
        [du, -r.powf(n - 1.0) * params.source(r, y[0])]
    }
}

/// Startup state at `r = ε` from the leading-order balance of the flux
/// integral near the origin.
fn startup_state(params: &ProblemParams, u0: f64, eps: f64) -> [f64; 2] {
    let (n, p, a) = (params.dim(), params.p, params.alpha);
    let k = (u0.powf(params.q) / (n + a)).powf(1.0 / (p - 1.0));
    let u = u0 - k * (p - 1.0) / (p + a) * eps.powf((p + a) / (p - 1.0));
    let flux = -u0.powf(params.q) * eps.powf(n + a) / (n + a);
    [u, flux]
}

/// Radius over which a regular solution from `u0` drops by an O(1) fraction.
fn regular_length_scale(params: &ProblemParams, u0: f64) -> f64 {
    let (n, p, a) = (params.dim(), params.p, params.alpha);
    let k = (u0.powf(params.q) / (n + a)).powf(1.0 / (p - 1.0));
    (u0 * (p + a) / ((p - 1.0) * k)).powf((p - 1.0) / (p + a))
}

struct Trace {
    samples: Vec<(f64, [f64; 2])>,
    terminal: Terminal,
    first_zero: Option<f64>,
    end: f64,
    stats: StepStats,
}

/// Integrates from `(r0, y0)` toward `r_max`, landing on every entry of
/// `grid` and recording it. Stops at the first zero of `u`, on blow-up, or
/// on step underflow.
fn run(params: &ProblemParams, r0: f64, y0: [f64; 2], r_max: f64, grid: &[f64], tol: &ToleranceConfig) -> Trace {
    let field = radial_field(params);
    let mut samples = vec![(r0, y0)];
    let mut terminal = Terminal::ReachedRMax;
    let mut first_zero = None;
    let mut gi = grid.iter().position(|&g| g > r0).unwrap_or(grid.len());
    let blow_up = tol.blow_up;
    let on_step = |s: &DenseStep<2>| {
        if s.y1[0] <= 0.0 && s.y0[0] > 0.0 {
            let rz = bisect_event(s, |y| y[0], tol.zero_tol);
            let yz = s.eval(rz);
            while gi < grid.len() && grid[gi] < rz {
                samples.push((grid[gi], s.eval(grid[gi])));
                gi += 1;
            }
            if let Some(last) = samples.last() {
                if rz - last.0 <= 1e-9 * rz {
                    samples.pop();
                }
            }
            samples.push((rz, [yz[0], yz[1]]));
            terminal = Terminal::HitZero;
            first_zero = Some(rz);
            return Flow::Stop;
        }
        if s.y1.iter().any(|v| v.abs() > blow_up) {
            terminal = Terminal::BlowUp;
            return Flow::Stop;
        }
        while gi < grid.len() && grid[gi] <= s.t1 {
            let y = if grid[gi] == s.t1 { s.y1 } else { s.eval(grid[gi]) };
            samples.push((grid[gi], y));
            gi += 1;
        }
        Flow::Continue
    };
    let result = integrate(field, r0, y0, r_max, grid, &tol.stepper(), on_step);
    let (stats, end) = match result {
        Ok(v) => v,
        Err((failure, stats, end)) => {
            terminal = match failure {
                StepFailure::NonFinite => Terminal::BlowUp,
                StepFailure::StepUnderflow | StepFailure::MaxSteps => Terminal::StepUnderflow,
            };
            (stats, end)
        }
    };
    Trace {
        samples,
        terminal,
        first_zero,
        end,
        stats,
    }
}

fn trace_to_solution(
    params: &ProblemParams,
    trace: &Trace,
    tol: &ToleranceConfig,
    origin: &str,
    startup: Option<f64>,
) -> Result<RadialSolution> {
    let mut r = Vec::with_capacity(trace.samples.len());
    let mut u = Vec::with_capacity(trace.samples.len());
    let mut flux = Vec::with_capacity(trace.samples.len());
    for (ri, y) in &trace.samples {
        if r.last().is_some_and(|last| *ri <= *last) {
            continue;
        }
        r.push(*ri);
        u.push(y[0]);
        flux.push(y[1]);
    }
    let meta = SolveMeta {
        origin: origin.to_string(),
        rtol: Some(tol.rtol),
        atol: Some(tol.atol),
        steps_accepted: trace.stats.accepted,
        steps_rejected: trace.stats.rejected,
        evaluations: trace.stats.evaluations,
        terminal: Some(trace.terminal),
        first_zero: trace.first_zero,
        startup_radius: startup,
    };
    RadialSolution::new(*params, r, u, flux, meta)
}

/// `n` radii from `a` to `b` uniform in `asinh(r / scale)`: roughly uniform
/// below `scale` and geometric above it.
fn sinh_grid(a: f64, b: f64, scale: f64, n: usize) -> Vec<f64> {
    let (ta, tb) = ((a / scale).asinh(), (b / scale).asinh());
    let mut g: Vec<f64> = (0..n)
        .map(|i| scale * (ta + (tb - ta) * i as f64 / (n - 1) as f64).sinh())
        .collect();
    g[0] = a;
    g[n - 1] = b;
    g.dedup_by(|x, y| *x <= *y);
    g
}

/// Shoots the regular solution with `u(0) = u0`, `u'(0) = 0`.
pub fn shoot_regular(params: &ProblemParams, u0: f64, r_max: f64, tol: &ToleranceConfig) -> Result<ShootResult> {
    params.validate()?;
    tol.validate()?;
    if !(u0 >= 0.0) || !u0.is_finite() {
        return Err(HenonError::InvalidArgument(format!("u0 must be nonnegative, got {u0}")));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(HenonError::InvalidArgument(format!(
            "r_max must be positive, got {r_max}"
        )));
    }
    if u0 == 0.0 {
        let eps = tol.startup_factor * r_max;
        let r = sinh_grid(eps, r_max, r_max, tol.samples);
        let zeros = vec![0.0; r.len()];
        let meta = SolveMeta {
            terminal: Some(Terminal::ReachedRMax),
            startup_radius: Some(eps),
            rtol: Some(tol.rtol),
            atol: Some(tol.atol),
            ..SolveMeta::analytic("regular_shoot")
        };
        let solution = RadialSolution::new(*params, r, zeros.clone(), zeros, meta)?;
        return Ok(ShootResult {
            solution,
            first_zero: None,
            terminal: Terminal::ReachedRMax,
        });
    }

    let scale = regular_length_scale(params, u0);
    let mut eps = (tol.startup_factor * r_max).min(1e-3 * scale);
    // Accept the startup radius only if halving it does not move the state
    // at the O(1) length scale, where both components are well above atol.
    let check = scale.min(r_max);
    for _ in 0..40 {
        let a = run(params, eps, startup_state(params, u0, eps), check, &[check], tol);
        let b = run(
            params,
            0.5 * eps,
            startup_state(params, u0, 0.5 * eps),
            check,
            &[check],
            tol,
        );
        let (ya, yb) = (a.samples.last().unwrap(), b.samples.last().unwrap());
        if a.terminal != Terminal::ReachedRMax || b.terminal != Terminal::ReachedRMax || ya.0 != check || yb.0 != check
        {
            eps *= 0.5;
            continue;
        }
        let (ya, yb) = (ya.1, yb.1);
        let du = (ya[0] - yb[0]).abs() / ya[0].abs().max(f64::MIN_POSITIVE);
        let df = (ya[1] - yb[1]).abs() / ya[1].abs().max(f64::MIN_POSITIVE);
        if du < tol.startup_check && df < tol.startup_check.sqrt() {
            break;
        }
        eps *= 0.5;
    }

    let y0 = startup_state(params, u0, eps);
    let scout = run(params, eps, y0, r_max, &[], tol);
    let end = match scout.terminal {
        Terminal::HitZero => scout.first_zero.expect("zero recorded"),
        Terminal::ReachedRMax => r_max,
        _ => scout.end,
    };
    let mut grid = sinh_grid(eps, end, 0.5 * scale.min(end), tol.samples);
    let target = match scout.terminal {
        Terminal::HitZero => {
            grid.pop();
            (end * (1.0 + 1e-6)).min(r_max)
        }
        Terminal::ReachedRMax => r_max,
        _ => {
            grid.retain(|&g| g < end);
            end
        }
    };
    let trace = run(params, eps, y0, target, &grid, tol);
    let solution = trace_to_solution(params, &trace, tol, "regular_shoot", Some(eps))?;
    Ok(ShootResult {
        first_zero: trace.first_zero,
        terminal: trace.terminal,
        solution,
    })
}

/// Integrates outward from the inner radius `r_in` (1 by default) with data
/// `u(r_in) = u1`, `u'(r_in) = du1`.
pub fn integrate_exterior(
    params: &ProblemParams,
    u1: f64,
    du1: f64,
    r_max: f64,
    tol: &ToleranceConfig,
) -> Result<ExteriorResult> {
    integrate_exterior_from(params, 1.0, u1, du1, r_max, tol)
}

pub fn integrate_exterior_from(
    params: &ProblemParams,
    r_in: f64,
    u1: f64,
    du1: f64,
    r_max: f64,
    tol: &ToleranceConfig,
) -> Result<ExteriorResult> {
    params.validate()?;
    tol.validate()?;
    if !(u1 > 0.0) || !du1.is_finite() {
        return Err(HenonError::InvalidArgument(format!(
            "exterior data must have u1 > 0, got ({u1}, {du1})"
        )));
    }
    if !(r_in > 0.0) || !(r_max > r_in) {
        return Err(HenonError::InvalidArgument(format!(
            "need 0 < r_in < r_max, got {r_in}, {r_max}"
        )));
    }
    let n = params.dim();
    let y0 = [u1, r_in.powf(n - 1.0) * phi(du1, params.p)];
    let scout = run(params, r_in, y0, r_max, &[], tol);
    let end = match scout.terminal {
        Terminal::HitZero => scout.first_zero.expect("zero recorded"),
        Terminal::ReachedRMax => r_max,
        _ => scout.end,
    };
    let (grid, target) = if end > r_in {
        let mut grid = geometric_grid(r_in, end, tol.samples);
        let target = match scout.terminal {
            Terminal::HitZero => {
                grid.pop();
                (end * (1.0 + 1e-6)).min(r_max)
            }
            Terminal::ReachedRMax => r_max,
            _ => {
                grid.retain(|&g| g < end);
                end
            }
        };
        (grid, target)
    } else {
        (vec![r_in], end)
    };
    let trace = run(params, r_in, y0, target, &grid, tol);
    let solution = trace_to_solution(params, &trace, tol, "exterior", None)?;
    let envelope = exterior_envelope(&solution, 10.0 * r_in, solution.r[solution.len() - 1]);
    Ok(ExteriorResult {
        terminal: trace.terminal,
        first_zero: trace.first_zero,
        envelope,
        solution,
    })
}

/// Fits `c1 = min u/μ` and `c2 = max r^δ u` over `[lo, hi]`.
pub fn exterior_envelope(sol: &RadialSolution, lo: f64, hi: f64) -> Option<EnvelopeReport> {
    if hi <= lo || sol.params.is_p_equal_n() {
        return None;
    }
    let delta = sol.params.delta();
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut count = 0;
    for i in 0..sol.len() {
        let r = sol.r[i];
        if r < lo || r > hi {
            continue;
        }
        let mu = fundamental_solution(&sol.params, r).ok()?.0;
        c1 = c1.min(sol.u[i] / mu);
        c2 = c2.max(r.powf(delta) * sol.u[i]);
        count += 1;
    }
    if count == 0 {
        return None;
    }
    let holds = c1 > 0.0 && c2.is_finite() && c2 > 0.0;
    Some(EnvelopeReport {
        window: (lo, hi),
        c1,
        c2,
        holds,
    })
}

/// Samples `λ r^{-δ}` with its exact flux on `grid`.
pub fn exact_singular_solution(params: &ProblemParams, grid: &[f64]) -> Result<RadialSolution> {
    params.validate()?;
    let lambda = params.lambda().ok_or_else(|| {
        HenonError::InvalidArgument("λ is undefined: the exact singular solution needs q > q_serrin".into())
    })?;
    let delta = params.delta();
    let n = params.dim();
    let u = grid.iter().map(|&r| lambda * r.powf(-delta)).collect();
    let flux = grid
        .iter()
        .map(|&r| r.powf(n - 1.0) * phi(-lambda * delta * r.powf(-delta - 1.0), params.p))
        .collect();
    RadialSolution::new(*params, grid.to_vec(), u, flux, SolveMeta::analytic("exact_singular"))
}

/// Scaling map `u_θ(r) = θ^δ u(θ r)`, sampled at `r / θ`.
pub fn rescale_solution(sol: &RadialSolution, theta: f64) -> Result<RadialSolution> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(HenonError::InvalidArgument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let params = &sol.params;
    let delta = params.delta();
    let n = params.dim();
    let flux_factor = theta.powf((delta + 1.0) * (params.p - 1.0) + 1.0 - n);
    let u_factor = theta.powf(delta);
    let mut meta = sol.meta.clone();
    meta.first_zero = meta.first_zero.map(|z| z / theta);
    meta.startup_radius = meta.startup_radius.map(|z| z / theta);
    RadialSolution::new(
        *params,
        sol.r.iter().map(|r| r / theta).collect(),
        sol.u.iter().map(|u| u * u_factor).collect(),
        sol.flux.iter().map(|f| f * flux_factor).collect(),
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(n: u32, p: f64, q: f64, a: f64) -> ProblemParams {
        ProblemParams::new(n, p, q, a).unwrap()
    }

    #[test]
    fn zero_profile_has_zero_residual() {
        let params = pp(3, 2.0, 3.0, 0.0);
        let r = geometric_grid(0.1, 1.0, 50);
        let z = vec![0.0; 50];
        let sol = RadialSolution::new(params, r, z.clone(), z, SolveMeta::analytic("zero")).unwrap();
        assert_eq!(max_abs(&ode_residual(&sol).unwrap()), 0.0);
    }

    #[test]
    fn residual_rejects_short_profiles() {
        let params = pp(3, 2.0, 3.0, 0.0);
        let sol =
            RadialSolution::new(params, vec![1.0, 2.0], vec![0.0; 2], vec![0.0; 2], SolveMeta::default()).unwrap();
        assert!(matches!(ode_residual(&sol), Err(HenonError::InsufficientData(_))));
    }

    #[test]
    fn exact_singular_profile_is_a_solution() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let sol = exact_singular_solution(&params, &geometric_grid(0.1, 1.0, 400)).unwrap();
        assert!(max_abs(&ode_residual(&sol).unwrap()) < 1e-6);
        let one = exact_singular_solution(&params, &[1.0]).unwrap();
        assert_eq!(one.u[0], params.lambda().unwrap());
        assert!(exact_singular_solution(&pp(3, 2.0, 3.0, 0.0), &[1.0]).is_err());
    }

    #[test]
    fn sobolev_profile_is_a_solution() {
        // u = (1 + r^2/3)^{-1/2}: u' = -(r/3)(1 + r^2/3)^{-3/2}.
        let params = pp(3, 2.0, 5.0, 0.0);
        let r = geometric_grid(1e-3, 10.0, 2000);
        let u: Vec<f64> = r.iter().map(|r| (1.0 + r * r / 3.0).powf(-0.5)).collect();
        let flux: Vec<f64> = r
            .iter()
            .map(|r| r * r * (-(r / 3.0) * (1.0 + r * r / 3.0).powf(-1.5)))
            .collect();
        let sol = RadialSolution::new(params, r, u, flux, SolveMeta::analytic("sobolev")).unwrap();
        assert!(max_abs(&ode_residual(&sol).unwrap()) < 1e-6);
    }

    #[test]
    fn zero_datum_stays_zero() {
        let res = shoot_regular(&pp(3, 2.0, 3.0, 0.0), 0.0, 10.0, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.terminal, Terminal::ReachedRMax);
        assert!(res.solution.u.iter().all(|&u| u == 0.0));
        assert!(shoot_regular(&pp(3, 2.0, 3.0, 0.0), -1.0, 10.0, &ToleranceConfig::default()).is_err());
    }

    #[test]
    fn regular_shoot_hits_reference_zero() {
        // Reference: DOP853 at rtol 1e-13 gives R1 = 6.896848619377707.
        let res = shoot_regular(&pp(3, 2.0, 3.0, 0.0), 1.0, 1e4, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.terminal, Terminal::HitZero);
        let r1 = res.first_zero.unwrap();
        assert!((r1 - 6.896848619377707).abs() < 1e-7, "R1 = {r1}");
        let sol = &res.solution;
        assert!(sol.u[..sol.len() - 1].iter().all(|&u| u > 0.0));
        assert!(sol.flux_decreasing_where_positive());
        assert!(sol.u.windows(2).all(|w| w[1] < w[0]));
        assert!(max_abs(&ode_residual(sol).unwrap()) < 1e-6);
    }

    #[test]
    fn first_zero_scales_with_amplitude() {
        let params = pp(3, 2.0, 3.0, 0.0);
        let tol = ToleranceConfig::default();
        let base = shoot_regular(&params, 1.0, 1e4, &tol).unwrap().first_zero.unwrap();
        let theta: f64 = 2.0;
        let scaled = shoot_regular(&params, theta.powf(params.delta()), 1e4, &tol)
            .unwrap()
            .first_zero
            .unwrap();
        assert!((scaled - base / theta).abs() / (base / theta) < 1e-3);
    }

    #[test]
    fn rescaling_preserves_solutions() {
        let params = pp(3, 2.0, 3.0, 0.0);
        let shot = shoot_regular(&params, 1.0, 1e4, &ToleranceConfig::default()).unwrap();
        let same = rescale_solution(&shot.solution, 1.0).unwrap();
        assert_eq!(same.r, shot.solution.r);
        assert_eq!(same.u, shot.solution.u);
        let scaled = rescale_solution(&shot.solution, 2.0).unwrap();
        assert!(max_abs(&ode_residual(&scaled).unwrap()) < 1e-6);

        let sparams = pp(3, 2.0, 4.0, 0.0);
        let exact = exact_singular_solution(&sparams, &geometric_grid(0.5, 2.0, 64)).unwrap();
        let moved = rescale_solution(&exact, 3.0).unwrap();
        let lambda = sparams.lambda().unwrap();
        for (r, u) in moved.r.iter().zip(&moved.u) {
            assert!((u - lambda * r.powf(-sparams.delta())).abs() < 1e-12 * u);
        }
    }

    #[test]
    fn exterior_follows_exact_singular_solution() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let lambda = params.lambda().unwrap();
        let delta = params.delta();
        let res = integrate_exterior(&params, lambda, -delta * lambda, 100.0, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.terminal, Terminal::ReachedRMax);
        for (r, u) in res.solution.r.iter().zip(&res.solution.u) {
            let exact = lambda * r.powf(-delta);
            assert!((u - exact).abs() / exact < 1e-8, "r={r}: {u} vs {exact}");
        }
    }

    #[test]
    fn exterior_p_harmonic_envelope() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let beta = params.beta().unwrap();
        let amp = 1e-4;
        let res = integrate_exterior(&params, amp, beta * amp, 1e4, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.terminal, Terminal::ReachedRMax);
        // Source contribution over [1, ∞) is bounded by amp^q ∫ r^{2-4} ≤ 1e-16.
        for (r, u) in res.solution.r.iter().zip(&res.solution.u) {
            let exact = amp * r.powf(beta);
            assert!((u - exact).abs() < 1e-12 + 1e-6 * exact);
        }
        let env = res.envelope.unwrap();
        assert!(env.holds && env.c1 > 0.0);
    }

    #[test]
    fn subcritical_exterior_data_lose_positivity() {
        let params = pp(3, 2.0, 2.5, 0.0);
        let res = integrate_exterior(&params, 1.0, 1.0, 1e4, &ToleranceConfig::default()).unwrap();
        assert_ne!(res.terminal, Terminal::ReachedRMax);
    }

    #[test]
    fn interpolant_reproduces_samples() {
        let params = pp(3, 2.0, 4.0, 0.0);
        let sol = exact_singular_solution(&params, &geometric_grid(0.5, 2.0, 400)).unwrap();
        let it = Interpolant::from_equation(&sol);
        let x = 1.2345;
        let (u, _) = it.eval(x);
        let exact = params.lambda().unwrap() * x.powf(-params.delta());
        assert!((u - exact).abs() < 1e-12);
    }
}
