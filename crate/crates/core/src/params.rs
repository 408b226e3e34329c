//! Problem parameters `(N, p, q, alpha)` for `-Δ_p u = |x|^alpha u^q`, the
//! regime they fall in, and the closed-form exponents and constants that
//! govern radial solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{HenonError, Result};

/// Relative tolerance used to decide `q == q_serrin`.
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-12;

/// Tolerance for treating `p` as equal to the integer dimension.
const P_EQ_N_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(rename = "N")]
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
    SupercriticalBeyondSobolev,
    PEqualsN,
}

/// Every derived exponent of the problem. Fields that only make sense for
/// `p < N` are `None` when `p = N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub beta: Option<f64>,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub q_serrin: Option<f64>,
    pub q_sobolev: Option<f64>,
    pub c1: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub lambda: Option<f64>,
    pub crit_log_const: Option<f64>,
    pub omega: f64,
}

impl ProblemParams {
    /// Builds and validates a parameter set.
    pub fn new(n: u32, p: f64, q: f64, alpha: f64) -> Result<Self> {
        let params = Self { n, p, q, alpha };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let bad = |msg: String| Err(HenonError::InvalidParams(msg));
        if !(self.p.is_finite() && self.q.is_finite() && self.alpha.is_finite()) {
            return bad("p, q and alpha must be finite".into());
        }
        if self.n < 2 {
            return bad(format!("N >= 2 violated (N = {})", self.n));
        }
        if self.p <= 1.0 {
            return bad(format!("p > 1 violated (p = {})", self.p));
        }
        if self.p > n + P_EQ_N_TOL * n {
            return bad(format!("p <= N violated (p = {}, N = {})", self.p, self.n));
        }
        if self.q <= self.p - 1.0 {
            return bad(format!("q > p - 1 violated (q = {}, p - 1 = {})", self.q, self.p - 1.0));
        }
        if self.alpha <= -self.p.min(n) {
            return bad(format!("alpha > -min(p, N) violated (alpha = {})", self.alpha));
        }
        if n + self.alpha <= 0.0 {
            return bad(format!("N + alpha > 0 violated (N + alpha = {})", n + self.alpha));
        }
        if self.alpha < 0.0 {
            log::warn!("negative Henon weight exponent alpha = {}", self.alpha);
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> f64 {
        f64::from(self.n)
    }

    pub fn is_p_equal_n(&self) -> bool {
        (self.p - self.dim()).abs() <= P_EQ_N_TOL * self.dim()
    }

    /// `(p + alpha) / (q + 1 - p)`, the singular decay rate.
    pub fn delta(&self) -> f64 {
        (self.p + self.alpha) / (self.q + 1.0 - self.p)
    }

    /// `(p - N) / (p - 1)`, the exponent of the fundamental solution.
    pub fn beta(&self) -> Option<f64> {
        (!self.is_p_equal_n()).then(|| (self.p - self.dim()) / (self.p - 1.0))
    }

    pub fn q_serrin(&self) -> Option<f64> {
        let n = self.dim();
        (!self.is_p_equal_n()).then(|| (n + self.alpha) * (self.p - 1.0) / (n - self.p))
    }

    pub fn q_sobolev(&self) -> Option<f64> {
        let n = self.dim();
        (!self.is_p_equal_n()).then(|| (n + self.alpha) * self.p / (n - self.p) - 1.0)
    }

    /// `c1 = (p-1)(δ+1) - (N-1)`, the damping coefficient of the log-delta
    /// equation in divergence form.
    pub fn c1(&self) -> f64 {
        (self.p - 1.0) * (self.delta() + 1.0) - (self.dim() - 1.0)
    }

    pub fn omega(&self) -> f64 {
        surface_area(self.n)
    }

    pub fn is_critical(&self, tol: f64) -> bool {
        match self.q_serrin() {
            Some(qs) => (self.q - qs).abs() <= tol * qs.abs().max(1.0),
            None => false,
        }
    }

    /// `λ` of the exact singular solution `λ r^{-δ}`; defined only above
    /// the Serrin exponent.
    pub fn lambda(&self) -> Option<f64> {
        let qs = self.q_serrin()?;
        if self.q <= qs || self.is_critical(DEFAULT_CRITICAL_TOL) {
            return None;
        }
        let m = self.q + 1.0 - self.p;
        let delta = self.delta();
        let bracket = delta.powf(self.p - 1.0) * (self.dim() - (self.p * self.q + self.alpha * (self.p - 1.0)) / m);
        (bracket > 0.0).then(|| bracket.powf(1.0 / m))
    }

    /// Limit constant of `r^{(N-p)/(p-1)} (ln 1/r)^{(N-p)/((p+α)(p-1))} u` in the
    /// critical case.
    pub fn crit_log_const(&self) -> Option<f64> {
        if self.is_p_equal_n() {
            return None;
        }
        let (n, p, a) = (self.dim(), self.p, self.alpha);
        let base = ((n - p) / (p + a)) * ((n - p) / (p - 1.0)).powf(p - 1.0);
        Some(base.powf(self.crit_log_exponent()?))
    }

    /// `(N - p) / ((p + α)(p - 1))`, the power of `ln(1/r)` in the critical rate.
    pub fn crit_log_exponent(&self) -> Option<f64> {
        (!self.is_p_equal_n()).then(|| (self.dim() - self.p) / ((self.p + self.alpha) * (self.p - 1.0)))
    }

    /// Source term `r^alpha u^q` with a signed power so the field stays
    /// defined when a trajectory crosses zero.
    #[inline]
    pub fn source(&self, r: f64, u: f64) -> f64 {
        r.powf(self.alpha) * signed_pow(u, self.q)
    }
}

/// `sign(x)|x|^e`.
#[inline]
pub fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// `Φ(t) = |t|^{p-2} t`.
#[inline]
pub fn phi(t: f64, p: f64) -> f64 {
    signed_pow(t, p - 1.0)
}

/// Inverse of [`phi`]: `sign(z)|z|^{1/(p-1)}`.
#[inline]
pub fn phi_inv(z: f64, p: f64) -> f64 {
    signed_pow(z, 1.0 / (p - 1.0))
}

pub fn compute_exponents(params: &ProblemParams) -> Result<ExponentSet> {
    params.validate()?;
    let (p, q, a) = (params.p, params.q, params.alpha);
    let n = params.dim();
    let beta = params.beta();
    let delta = params.delta();
    let gamma = beta.map(|b| ((1.0 - b) / b) * p + a / b + q);
    let c1 = (p - 1.0) * (delta + 1.0) - (n - 1.0);
    Ok(ExponentSet {
        beta,
        delta,
        gamma,
        q_serrin: params.q_serrin(),
        q_sobolev: params.q_sobolev(),
        c1,
        a1: delta * c1,
        a2: (p - 1.0) * delta + c1,
        a3: p - 1.0,
        lambda: params.lambda(),
        crit_log_const: params.crit_log_const(),
        omega: params.omega(),
    })
}

pub fn classify_regime(params: &ProblemParams, tol: f64) -> Result<Regime> {
    params.validate()?;
    if params.is_p_equal_n() {
        return Ok(Regime::PEqualsN);
    }
    let qs = params.q_serrin().expect("p < N");
    let qsob = params.q_sobolev().expect("p < N");
    Ok(if params.is_critical(tol) {
        Regime::Critical
    } else if params.q < qs {
        Regime::Subcritical
    } else if params.q < qsob {
        Regime::Supercritical
    } else {
        Regime::SupercriticalBeyondSobolev
    })
}

/// Surface area `ω_{N-1} = 2π^{N/2}/Γ(N/2)` of the unit sphere in `R^N`,
/// evaluated through the integer/half-integer closed forms.
pub fn surface_area(n: u32) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    if n.is_multiple_of(2) {
        // Γ(k) = (k-1)!
        let k = n / 2;
        let fact: f64 = (1..k).map(f64::from).product();
        2.0 * PI.powi(k as i32) / fact
    } else {
        // 2π^{k+1/2}/Γ(k+1/2) = 2 (4π)^k k! / (2k)!
        let k = (n - 1) / 2;
        let mut value = 2.0;
        for j in 1..=k {
            value *= 4.0 * PI * f64::from(j) / (f64::from(2 * j) * f64::from(2 * j - 1));
        }
        value
    }
}

/// Fundamental solution `μ(r)` of `-Δ_p u = δ_0` and its radial derivative.
pub fn fundamental_solution(params: &ProblemParams, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(HenonError::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let (n, p) = (params.dim(), params.p);
    let omega = params.omega();
    if params.is_p_equal_n() {
        let k = omega.powf(-1.0 / (n - 1.0));
        Ok((k * (1.0 / r).ln(), -k / r))
    } else {
        let k = omega.powf(-1.0 / (p - 1.0));
        let beta = (p - n) / (p - 1.0);
        let value = (p - 1.0) / (n - p) * k * r.powf(beta);
        let derivative = -k * r.powf((1.0 - n) / (p - 1.0));
        Ok((value, derivative))
    }
}

/// Normalisation `k` with `μ(r) = k r^β` (only for `p < N`).
pub fn mu_coefficient(params: &ProblemParams) -> Option<f64> {
    if params.is_p_equal_n() {
        return None;
    }
    let (n, p) = (params.dim(), params.p);
    Some((p - 1.0) / (n - p) * params.omega().powf(-1.0 / (p - 1.0)))
}

/// Dirac coefficient `(C (N-p)/(p-1))^{p-1} ω_{N-1}` for a singular solution
/// with `u(r) ~ C r^{(p-N)/(p-1)}` as `r -> 0`.
pub fn dirac_coefficient(params: &ProblemParams, c: f64) -> Result<f64> {
    if params.is_p_equal_n() {
        return Err(HenonError::InvalidArgument(
            "Dirac coefficient formula requires p < N".into(),
        ));
    }
    if !(c > 0.0) {
        return Err(HenonError::InvalidArgument(format!("C must be positive, got {c}")));
    }
    let (n, p) = (params.dim(), params.p);
    Ok((c * (n - p) / (p - 1.0)).powf(p - 1.0) * params.omega())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pp(n: u32, p: f64, q: f64, a: f64) -> ProblemParams {
        ProblemParams::new(n, p, q, a).unwrap()
    }

    #[test]
    fn supercritical_example_exponents() {
        let e = compute_exponents(&pp(3, 2.0, 4.0, 0.0)).unwrap();
        assert_relative_eq!(e.q_serrin.unwrap(), 3.0, epsilon = 1e-15);
        assert_relative_eq!(e.q_sobolev.unwrap(), 5.0, epsilon = 1e-15);
        assert_relative_eq!(e.delta, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(e.lambda.unwrap(), (2.0f64 / 9.0).cbrt(), epsilon = 1e-15);
        assert!((e.lambda.unwrap() - 0.605707).abs() < 1e-6);
        assert_relative_eq!(e.a1, -2.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(e.a2, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(e.a3, 1.0);
        assert_relative_eq!(e.c1, -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn critical_example_exponents() {
        let e = compute_exponents(&pp(4, 2.0, 2.0, 0.0)).unwrap();
        assert_eq!(e.q_serrin.unwrap(), 2.0);
        assert_eq!(e.delta, 2.0);
        assert_relative_eq!(e.gamma.unwrap(), -1.0, epsilon = 1e-15);
        assert_relative_eq!(e.crit_log_const.unwrap(), 2.0, epsilon = 1e-15);
        assert!(e.lambda.is_none());
        assert_eq!(classify_regime(&pp(4, 2.0, 2.0, 0.0), 1e-12).unwrap(), Regime::Critical);
    }

    #[test]
    fn serrin_boundary_has_no_lambda() {
        let e = compute_exponents(&pp(3, 2.0, 3.0, 0.0)).unwrap();
        assert_eq!(e.beta.unwrap(), -1.0);
        assert_relative_eq!(e.gamma.unwrap(), -1.0, epsilon = 1e-15);
        assert!(e.lambda.is_none());
    }

    #[test]
    fn regimes() {
        let r = |n, p, q, a| classify_regime(&pp(n, p, q, a), DEFAULT_CRITICAL_TOL).unwrap();
        assert_eq!(r(3, 2.0, 2.5, 0.0), Regime::Subcritical);
        assert_eq!(r(3, 2.0, 4.0, 0.0), Regime::Supercritical);
        assert_eq!(r(3, 3.0, 5.0, 1.0), Regime::PEqualsN);
        assert_eq!(r(3, 2.0, 5.0, 0.0), Regime::SupercriticalBeyondSobolev);
        assert_eq!(r(3, 2.0, 3.0 + 1e-14, 0.0), Regime::Critical);
    }

    #[test]
    fn invalid_params_name_the_invariant() {
        let err = ProblemParams::new(1, 1.5, 2.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("N >= 2"));
        let err = ProblemParams::new(3, 1.0, 2.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("p > 1"));
        let err = ProblemParams::new(3, 4.0, 5.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("p <= N"));
        let err = ProblemParams::new(3, 2.0, 0.5, 0.0).unwrap_err();
        assert!(err.to_string().contains("q > p - 1"));
        let err = ProblemParams::new(3, 2.0, 2.0, -2.5).unwrap_err();
        assert!(err.to_string().contains("alpha > -min"));
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(surface_area(2), 2.0 * PI, epsilon = 1e-15);
        assert_relative_eq!(surface_area(3), 4.0 * PI, epsilon = 1e-15);
        assert_relative_eq!(surface_area(4), 2.0 * PI * PI, epsilon = 1e-15);
        assert_relative_eq!(surface_area(5), 8.0 * PI * PI / 3.0, epsilon = 1e-15);
        assert_relative_eq!(surface_area(6), PI.powi(3), epsilon = 1e-15);
    }

    #[test]
    fn fundamental_solution_values() {
        let (m, _) = fundamental_solution(&pp(3, 2.0, 2.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(m, 1.0 / (4.0 * PI), epsilon = 1e-15);
        assert!((m - 0.0795775).abs() < 1e-7);
        let (m, _) = fundamental_solution(&pp(3, 3.0, 5.0, 0.0), (-1.0f64).exp()).unwrap();
        assert_relative_eq!(m, (4.0 * PI).powf(-0.5), epsilon = 1e-14);
        let (m, _) = fundamental_solution(&pp(4, 2.0, 2.0, 0.0), 0.5).unwrap();
        assert_relative_eq!(m, 2.0 / (2.0 * PI * PI), epsilon = 1e-14);
        assert!(fundamental_solution(&pp(3, 2.0, 2.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn fundamental_solution_derivative_matches_finite_difference() {
        for params in [
            pp(3, 2.0, 2.0, 0.0),
            pp(4, 1.5, 1.0, 1.0),
            pp(3, 3.0, 4.0, 0.0),
            pp(5, 3.0, 4.0, 2.0),
        ] {
            let h = 1e-5;
            let (_, d) = fundamental_solution(&params, 1.0).unwrap();
            let fd = (fundamental_solution(&params, 1.0 + h).unwrap().0
                - fundamental_solution(&params, 1.0 - h).unwrap().0)
                / (2.0 * h);
            assert!(((fd - d) / d).abs() < 1e-8, "{params:?}: {fd} vs {d}");
        }
    }

    #[test]
    fn dirac_coefficients() {
        assert_relative_eq!(
            dirac_coefficient(&pp(3, 2.0, 2.0, 0.0), 1.0).unwrap(),
            4.0 * PI,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            dirac_coefficient(&pp(4, 2.0, 2.0, 0.0), 1.0).unwrap(),
            4.0 * PI * PI,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            dirac_coefficient(&pp(5, 3.0, 4.0, 0.0), 2.0).unwrap(),
            4.0 * surface_area(5),
            epsilon = 1e-13
        );
        assert!(dirac_coefficient(&pp(3, 3.0, 4.0, 0.0), 1.0).is_err());
        assert!(dirac_coefficient(&pp(3, 2.0, 2.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn lambda_vanishes_approaching_serrin() {
        let near = pp(3, 2.0, 3.0 + 1e-6, 0.0).lambda().unwrap();
        let far = pp(3, 2.0, 3.1, 0.0).lambda().unwrap();
        assert!(near > 0.0 && near < far && near < 1e-2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn admissible() -> impl Strategy<Value = ProblemParams> {
            (3u32..=6, 0.05f64..0.95, 0.01f64..4.0, 0.0f64..3.0).prop_map(|(n, pf, qx, a)| {
                let p = 1.0 + pf * (f64::from(n) - 1.0);
                ProblemParams {
                    n,
                    p,
                    q: p - 1.0 + qx,
                    alpha: a,
                }
            })
        }

        proptest! {
            #[test]
            fn delta_identity(params in admissible()) {
                let e = compute_exponents(&params).unwrap();
                let lhs = e.delta * (params.q + 1.0 - params.p);
                prop_assert!((lhs - (params.p + params.alpha)).abs() <= 1e-12 * (params.p + params.alpha));
                prop_assert!(e.a3 > 0.0);
                prop_assert_eq!(e.lambda.is_some(), params.q > e.q_serrin.unwrap());
                if let Some(l) = e.lambda { prop_assert!(l > 0.0); }
            }

            #[test]
            fn serrin_identities(n in 3u32..=6, pf in 0.05f64..0.95, a in 0.0f64..3.0) {
                let p = 1.0 + pf * (f64::from(n) - 1.0);
                let qs = (f64::from(n) + a) * (p - 1.0) / (f64::from(n) - p);
                let params = ProblemParams { n, p, q: qs, alpha: a };
                let e = compute_exponents(&params).unwrap();
                prop_assert!((e.gamma.unwrap() + 1.0).abs() < 1e-12);
                prop_assert!((e.delta - (f64::from(n) - p) / (p - 1.0)).abs() < 1e-12 * e.delta);
            }
        }
    }
}
