//! Dormand–Prince 5(4) integrator with dense output, used by the radial
//! shooter and the phase-plane orbits.

use serde::{Deserialize, Serialize};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrator tolerances and guards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Step underflow threshold relative to `|t|`.
    pub min_step_rel: f64,
    pub max_steps: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            min_step_rel: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFailure {
    StepUnderflow,
    NonFinite,
    MaxSteps,
}

/// An accepted step together with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; D],
    pub y1: [f64; D],
    cont: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    /// Fourth-order dense output at `t ∈ [t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let h = self.t1 - self.t0;
        let th = (t - self.t0) / h;
        let th1 = 1.0 - th;
        let c = &self.cont;
        std::array::from_fn(|i| c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i]))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Whether the integration should proceed after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[inline]
fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// Integrates `y' = f(t, y)` forward from `t0` to `t_end`. Every accepted
/// step is handed to `on_step`; steps never straddle an entry of `stops`,
/// so each stop is the endpoint of some step. Returns the statistics and
/// the time reached.
pub fn integrate<const D: usize, F, S>(
    f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    stops: &[f64],
    cfg: &StepperConfig,
    mut on_step: S,
) -> Result<(StepStats, f64), (StepFailure, StepStats, f64)>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    S: FnMut(&DenseStep<D>) -> Flow,
{
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    if k1.iter().any(|v| !v.is_finite()) {
        return Err((StepFailure::NonFinite, stats, t));
    }
    let mut h = initial_step(&f, t, &y, &k1, t_end - t0, cfg);
    let mut next_stop = stops.iter().position(|&s| s > t0).unwrap_or(stops.len());

    while t < t_end {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err((StepFailure::MaxSteps, stats, t));
        }
        while next_stop < stops.len() && stops[next_stop] <= t {
            next_stop += 1;
        }
        let target = if next_stop < stops.len() {
            stops[next_stop].min(t_end)
        } else {
            t_end
        };
        let mut landing = false;
        if t + h >= target || (target - t - h) < 1e-12 * h {
            h = target - t;
            landing = true;
        }
        if h <= cfg.min_step_rel * t.abs().max(f64::MIN_POSITIVE) {
            return Err((StepFailure::StepUnderflow, stats, t));
        }

        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t1 = if landing { target } else { t + h };
        let k7 = f(t1, &y1);
        stats.evaluations += 6;

        let finite = y1.iter().chain(k7.iter()).all(|v| v.is_finite());
        let mut err = 0.0;
        for i in 0..D {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / D as f64).sqrt();

        if !finite || !err.is_finite() {
            stats.rejected += 1;
            h *= 0.25;
            if h <= cfg.min_step_rel * t.abs().max(f64::MIN_POSITIVE) {
                return Err((StepFailure::NonFinite, stats, t));
            }
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            let mut cont = [[0.0; D]; 5];
            for i in 0..D {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k7[i] - bspl;
                cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep {
                t0: t,
                t1,
                y0: y,
                y1,
                cont,
            };
            t = t1;
            y = y1;
            k1 = k7;
            if on_step(&step) == Flow::Stop {
                return Ok((stats, t));
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // Landing on a stop shortens the step artificially; do not let
            // that shrink the next one.
            if !landing || fac > 1.0 {
                h *= fac;
            }
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok((stats, t))
}

fn initial_step<const D: usize, F>(f: &F, t: f64, y: &[f64; D], k1: &[f64; D], span: f64, cfg: &StepperConfig) -> f64
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let sc: [f64; D] = std::array::from_fn(|i| cfg.atol + cfg.rtol * y[i].abs());
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / D as f64).sqrt();
    let d1 = (k1.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / D as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs());
    let y1 = axpy(y, h0, &[(1.0, k1)]);
    let k2 = f(t + h0, &y1);
    let d2 = (k2
        .iter()
        .zip(k1)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / D as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1).min(span.abs());
    if h.is_finite() && h > 0.0 {
        h
    } else {
        span.abs() * 1e-6
    }
}

/// Refines a sign change of `g` inside a dense step by bisection until the
/// bracket is narrower than `tol`.
pub fn bisect_event<const D: usize, G>(step: &DenseStep<D>, g: G, tol: f64) -> f64
where
    G: Fn(&[f64; D]) -> f64,
{
    let (mut a, mut b) = (step.t0, step.t1);
    let mut ga = g(&step.y0);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(&step.eval(m));
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
