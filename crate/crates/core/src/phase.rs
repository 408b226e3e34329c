//! The log-delta equation as an autonomous system in `(w, w')`.
//!
//! With `z = w' + δw` the equation reads
//! `|z|^{p-2}(a1 w + a2 w' + a3 w'') + w^q = 0`. For `p != 2` the line
//! `z = 0` is singular; orbits that reach it are stopped and flagged.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HenonError, Result};
use crate::numeric::linear_fit;
use crate::ode::{bisect_event, integrate, DenseStep, Flow, StepFailure};
use crate::params::{compute_exponents, phi, signed_pow, ProblemParams};
use crate::radial::ToleranceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub w: f64,
    pub dw: f64,
}

impl PhaseState {
    pub fn new(w: f64, dw: f64) -> Self {
        Self { w, dw }
    }

    pub fn distance(&self, other: &PhaseState) -> f64 {
        (self.w - other.w).hypot(self.dw - other.dw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldValue {
    pub dw: f64,
    pub ddw: f64,
    /// Set at the origin, where both the weight and `w^q` vanish.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    StableNode,
    StableSpiral,
    UnstableNode,
    UnstableSpiral,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: PhaseState,
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [Complex64; 2],
    pub classification: Stability,
    pub h: f64,
    /// Roots of `μ² + a2 μ + (a1 + qλ^{q-1})` when `p = 2`.
    pub analytic_eigenvalues: Option<[Complex64; 2]>,
    pub analytic_deviation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitFate {
    ConvergesToLambda,
    RegularDecay,
    HitSingularLocus,
    Unbounded,
    Inconclusive,
}

/// Why the integration of an orbit ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitStop {
    ReachedSMax,
    SingularLocus,
    /// `w` fell below `decay_floor` times its running maximum.
    Decayed,
    WentNegative,
    Unbounded,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrajectory {
    pub params: ProblemParams,
    pub s: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub stop: OrbitStop,
    pub fate: OrbitFate,
}

pub const CONVERGENCE_RADIUS: f64 = 1e-6;
pub const DECAY_RATE_TOL: f64 = 0.05;
/// Deepest relative level to which a decaying orbit is followed.
pub const DECAY_FLOOR: f64 = 1e-10;
pub const DEFAULT_S_MAX: f64 = 200.0;
const LOCUS_EPS: f64 = 1e-300;

struct Coefficients {
    delta: f64,
    a1: f64,
    a2: f64,
    a3: f64,
    p: f64,
    q: f64,
}

impl Coefficients {
    fn new(params: &ProblemParams) -> Self {
        let e = compute_exponents(params).expect("validated parameters");
        Self {
            delta: e.delta,
            a1: e.a1,
            a2: e.a2,
            a3: e.a3,
            p: params.p,
            q: params.q,
        }
    }

    /// `w''` in signed form; not finite on the singular locus when `p > 2`.
    fn ddw(&self, w: f64, dw: f64) -> f64 {
        let z = dw + self.delta * w;
        let weight = if self.p == 2.0 { 1.0 } else { z.abs().powf(self.p - 2.0) };
        -(self.a1 * w + self.a2 * dw) / self.a3 - signed_pow(w, self.q) / (self.a3 * weight)
    }
}

pub fn vector_field(params: &ProblemParams, state: PhaseState) -> Result<FieldValue> {
    let c = Coefficients::new(params);
    let z = state.dw + c.delta * state.w;
    if state.w == 0.0 && z == 0.0 {
        return Ok(FieldValue {
            dw: state.dw,
            ddw: 0.0,
            degenerate: true,
        });
    }
    if c.p != 2.0 && phi(z, c.p).abs() <= LOCUS_EPS {
        return Err(HenonError::SingularLocus {
            w: state.w,
            dw: state.dw,
        });
    }
    Ok(FieldValue {
        dw: state.dw,
        ddw: c.ddw(state.w, state.dw),
        degenerate: false,
    })
}

/// The origin and, when λ is defined, `(λ, 0)`.
pub fn fixed_points(params: &ProblemParams) -> Vec<PhaseState> {
    let mut out = vec![PhaseState::new(0.0, 0.0)];
    if let Some(lambda) = params.lambda() {
        out.push(PhaseState::new(lambda, 0.0));
    }
    out
}

pub fn default_h(params: &ProblemParams) -> f64 {
    1e-6 * params.lambda().unwrap_or(1.0).max(1.0)
}

fn eigen2(j: &[[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}

fn classify_eigenvalues(ev: &[Complex64; 2]) -> Stability {
    if ev.iter().any(|e| e.re.abs() < 1e-9) {
        return Stability::Degenerate;
    }
    let spiral = ev[0].im.abs() > 0.0;
    match (ev[0].re < 0.0, ev[1].re < 0.0, spiral) {
        (true, true, true) => Stability::StableSpiral,
        (true, true, false) => Stability::StableNode,
        (false, false, true) => Stability::UnstableSpiral,
        (false, false, false) => Stability::UnstableNode,
        _ => Stability::Saddle,
    }
}

/// Linearizes the field at a fixed point off the singular locus by central
/// differences with step `h`.
pub fn linearize(params: &ProblemParams, point: PhaseState, h: f64) -> Result<FixedPointReport> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(HenonError::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let c = Coefficients::new(params);
    let z = point.dw + c.delta * point.w;
    if !(z > 0.0) {
        return Err(HenonError::InvalidArgument(
            "linearization needs a fixed point with w' + δw > 0".into(),
        ));
    }
    let f0 = c.ddw(point.w, point.dw);
    let scale = point.w.abs().max(1.0);
    if point.dw.abs() > 1e-10 * scale || f0.abs() > 1e-10 * scale {
        return Err(HenonError::InvalidArgument(format!(
            "({}, {}) is not a fixed point: field = ({}, {f0})",
            point.w, point.dw, point.dw
        )));
    }
    let dfdw = (c.ddw(point.w + h, point.dw) - c.ddw(point.w - h, point.dw)) / (2.0 * h);
    let dfdv = (c.ddw(point.w, point.dw + h) - c.ddw(point.w, point.dw - h)) / (2.0 * h);
    let jacobian = [[0.0, 1.0], [dfdw, dfdv]];
    let eigenvalues = eigen2(&jacobian);
    let classification = classify_eigenvalues(&eigenvalues);
    let (analytic_eigenvalues, analytic_deviation) = if params.p == 2.0 {
        let k = c.a1 + c.q * signed_pow(point.w, c.q - 1.0);
        let exact = eigen2(&[[0.0, 1.0], [-k, -c.a2]]);
        let dev = eigenvalues
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        (Some(exact), Some(dev))
    } else {
        (None, None)
    };
    Ok(FixedPointReport {
        location: point,
        jacobian,
        eigenvalues,
        classification,
        h,
        analytic_eigenvalues,
        analytic_deviation,
    })
}

/// Integrates an orbit on `s ∈ [0, s_max]`, sampling on a uniform grid of
/// `tol.samples` points plus every event, then classifies its fate.
pub fn integrate_orbit(
    params: &ProblemParams,
    initial: PhaseState,
    s_max: f64,
    tol: &ToleranceConfig,
) -> Result<PhaseTrajectory> {
    params.validate()?;
    tol.validate()?;
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(HenonError::InvalidArgument(format!(
            "s_max must be positive, got {s_max}"
        )));
    }
    if !(initial.w.is_finite() && initial.dw.is_finite()) || initial.w < 0.0 {
        return Err(HenonError::InvalidArgument(
            "initial state must be finite with w >= 0".into(),
        ));
    }
    let c = Coefficients::new(params);
    let singular_p = c.p != 2.0;
    let z_of = |y: &[f64; 2]| y[1] + c.delta * y[0];
    let mut s_out = vec![0.0];
    let mut states = vec![initial];
    if initial.w == 0.0 && z_of(&[initial.w, initial.dw]) == 0.0 {
        return Ok(finish(params, s_out, states, OrbitStop::ReachedSMax));
    }
    if singular_p && phi(z_of(&[initial.w, initial.dw]), c.p).abs() <= LOCUS_EPS {
        return Ok(finish(params, s_out, states, OrbitStop::SingularLocus));
    }
    let grid: Vec<f64> = (1..tol.samples)
        .map(|i| s_max * i as f64 / (tol.samples - 1) as f64)
        .collect();
    let mut gi = 0;
    let mut stop = OrbitStop::ReachedSMax;
    let mut w_max = initial.w;
    let blow_up = tol.blow_up;
    let floor = decay_floor(params);
    let field = |_s: f64, y: &[f64; 2]| [y[1], c.ddw(y[0], y[1])];
    let on_step = |st: &DenseStep<2>| {
        let mut event: Option<(f64, OrbitStop)> = None;
        if singular_p && z_of(&st.y0) * z_of(&st.y1) <= 0.0 {
            event = Some((
                bisect_event(st, |y| z_of(y), 1e-14 * st.t1.abs().max(1.0)),
                OrbitStop::SingularLocus,
            ));
        } else if st.y1[0] < 0.0 && st.y0[0] >= 0.0 {
            event = Some((
                bisect_event(st, |y| y[0], 1e-14 * st.t1.abs().max(1.0)),
                OrbitStop::WentNegative,
            ));
        }
        let end = event.map_or(st.t1, |e| e.0);
        while gi < grid.len() && grid[gi] <= end {
            let y = if grid[gi] == st.t1 { st.y1 } else { st.eval(grid[gi]) };
            s_out.push(grid[gi]);
            states.push(PhaseState::new(y[0], y[1]));
            gi += 1;
        }
        if let Some((se, kind)) = event {
            if s_out.last().is_some_and(|&l| l < se) {
                let y = st.eval(se);
                s_out.push(se);
                states.push(PhaseState::new(y[0], y[1]));
            }
            stop = kind;
            return Flow::Stop;
        }
        if st.y1.iter().any(|v| v.abs() > blow_up) {
            if s_out.last().is_some_and(|&l| l < st.t1) {
                s_out.push(st.t1);
                states.push(PhaseState::new(st.y1[0], st.y1[1]));
            }
            stop = OrbitStop::Unbounded;
            return Flow::Stop;
        }
        w_max = w_max.max(st.y1[0]);
        if st.y1[0] > 0.0 && st.y1[0] < floor * w_max && st.y1[1] < 0.0 {
            if s_out.last().is_some_and(|&l| l < st.t1) {
                s_out.push(st.t1);
                states.push(PhaseState::new(st.y1[0], st.y1[1]));
            }
            stop = OrbitStop::Decayed;
            return Flow::Stop;
        }
        Flow::Continue
    };
    // Decaying orbits are followed far below their initial size, so the
    // absolute tolerance is scaled down with it.
    let mut cfg = tol.stepper();
    cfg.atol *= DECAY_FLOOR * initial.w.abs().max(initial.dw.abs()).min(1.0);
    let result = integrate(field, 0.0, [initial.w, initial.dw], s_max, &grid, &cfg, on_step);
    if let Err((failure, _, _)) = result {
        let last = *states.last().expect("initial state recorded");
        let z = z_of(&[last.w, last.dw]).abs();
        stop = if singular_p && z <= 1e-6 * (last.w.abs() + last.dw.abs()).max(f64::MIN_POSITIVE) {
            OrbitStop::SingularLocus
        } else {
            match failure {
                StepFailure::NonFinite => OrbitStop::Unbounded,
                StepFailure::StepUnderflow | StepFailure::MaxSteps => OrbitStop::StepUnderflow,
            }
        };
    }
    Ok(finish(params, s_out, states, stop))
}

/// Relative level at which a decaying orbit is stopped. Rounding seeds the
/// growing mode `e^{-c1 s/(p-1)}` at about 1e-16 relative to `w`; the floor
/// keeps that contamination below 1e-8 when `w` has decayed like `e^{-δs}`.
pub fn decay_floor(params: &ProblemParams) -> f64 {
    let delta = params.delta();
    let growth = -params.c1() / (params.p - 1.0);
    if growth <= 0.0 {
        return DECAY_FLOOR;
    }
    1e-8_f64.powf(delta / (growth + delta)).clamp(DECAY_FLOOR, 1e-2)
}

fn finish(params: &ProblemParams, s: Vec<f64>, states: Vec<PhaseState>, stop: OrbitStop) -> PhaseTrajectory {
    let mut traj = PhaseTrajectory {
        params: *params,
        s,
        states,
        stop,
        fate: OrbitFate::Inconclusive,
    };
    traj.fate = classify_orbit(&traj);
    traj
}

/// Least-squares slope of `ln w` against `s` over the last tenth of the
/// orbit.
pub fn decay_rate(traj: &PhaseTrajectory) -> Option<f64> {
    let (s0, s1) = (*traj.s.first()?, *traj.s.last()?);
    let from = s1 - 0.1 * (s1 - s0);
    let (x, y): (Vec<f64>, Vec<f64>) = traj
        .s
        .iter()
        .zip(&traj.states)
        .filter(|(s, st)| **s >= from && st.w > 0.0)
        .map(|(s, st)| (*s, st.w.ln()))
        .unzip();
    if x.len() < 3 {
        return None;
    }
    linear_fit(&x, &y).map(|f| f.0)
}

pub fn classify_orbit(traj: &PhaseTrajectory) -> OrbitFate {
    match traj.stop {
        OrbitStop::SingularLocus => return OrbitFate::HitSingularLocus,
        OrbitStop::Unbounded => return OrbitFate::Unbounded,
        _ => {}
    }
    let Some(last) = traj.states.last() else {
        return OrbitFate::Inconclusive;
    };
    if let Some(lambda) = traj.params.lambda() {
        if last.distance(&PhaseState::new(lambda, 0.0)) < CONVERGENCE_RADIUS {
            return OrbitFate::ConvergesToLambda;
        }
    }
    if traj.stop == OrbitStop::WentNegative {
        return OrbitFate::Inconclusive;
    }
    let delta = traj.params.delta();
    match decay_rate(traj) {
        Some(rate) if ((rate + delta) / delta).abs() <= DECAY_RATE_TOL => OrbitFate::RegularDecay,
        _ => OrbitFate::Inconclusive,
    }
}

/// Start on the outgoing direction of the origin, `w' = -c1/(p-1) w`, at
/// distance `eps` in `w`.
pub fn outgoing_start(params: &ProblemParams, eps: f64) -> PhaseState {
    PhaseState::new(eps, -params.c1() / (params.p - 1.0) * eps)
}
