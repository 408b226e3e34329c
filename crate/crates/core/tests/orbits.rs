use henon_radial::phase::{default_h, integrate_orbit, linearize, outgoing_start, OrbitFate, PhaseState};
use henon_radial::transforms::{critical_flux_identity, TransformKind, TransformedProfile};
use henon_radial::{ProblemParams, ToleranceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn light_tol() -> ToleranceConfig {
    ToleranceConfig {
        samples: 801,
        ..ToleranceConfig::default()
    }
}

#[test]
fn outgoing_orbits_never_blow_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut fates = Vec::new();
    for _ in 0..100 {
        let n: u32 = rng.gen_range(3..6);
        let p: f64 = rng.gen_range(1.5..2.5_f64.min(f64::from(n) - 0.1));
        let alpha: f64 = rng.gen_range(0.0..2.0);
        let probe = ProblemParams::new(n, p, p, alpha).unwrap();
        let qs = probe.q_serrin().unwrap();
        let params = ProblemParams::new(n, p, qs + rng.gen_range(0.1..6.0), alpha).unwrap();
        let eps = 10f64.powf(rng.gen_range(-6.0..-3.0));
        let traj = integrate_orbit(&params, outgoing_start(&params, eps), 200.0, &light_tol()).unwrap();
        assert_ne!(traj.fate, OrbitFate::Unbounded, "{params:?} eps {eps}");
        fates.push(traj.fate);
    }
    assert!(fates.contains(&OrbitFate::ConvergesToLambda));
}

#[test]
fn lambda_is_stable_across_the_grid() {
    for n in [3u32, 4, 5] {
        for p in [1.5, 2.0, 3.0] {
            if p >= f64::from(n) {
                continue;
            }
            for alpha in [0.0, 1.0, 2.0] {
                let probe = ProblemParams::new(n, p, p, alpha).unwrap();
                let (qs, qsob) = (probe.q_serrin().unwrap(), probe.q_sobolev().unwrap());
                for f in [0.1, 0.5, 0.9] {
                    let params = ProblemParams::new(n, p, qs + f * (qsob - qs), alpha).unwrap();
                    let point = PhaseState::new(params.lambda().unwrap(), 0.0);
                    let rep = linearize(&params, point, default_h(&params)).unwrap();
                    assert!(
                        rep.eigenvalues.iter().all(|e| e.re < 0.0),
                        "{params:?}: {:?}",
                        rep.eigenvalues
                    );
                }
                let beyond = ProblemParams::new(n, p, qsob + 0.5, alpha).unwrap();
                let point = PhaseState::new(beyond.lambda().unwrap(), 0.0);
                let rep = linearize(&beyond, point, default_h(&beyond)).unwrap();
                let re = rep.eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
                println!("N={n} p={p} alpha={alpha} q=q_sob+0.5: max Re {re:.3e}");
            }
        }
    }
}

#[test]
fn critical_orbits_satisfy_the_integrated_equation() {
    let tol = ToleranceConfig {
        samples: 20001,
        ..ToleranceConfig::default()
    };
    for (n, p, alpha) in [(3, 2.0, 0.0), (4, 2.5, 1.0)] {
        let probe = ProblemParams::new(n, p, p, alpha).unwrap();
        let params = ProblemParams::new(n, p, probe.q_serrin().unwrap(), alpha).unwrap();
        let traj = integrate_orbit(&params, PhaseState::new(0.5, 0.0), 2000.0, &tol).unwrap();
        let profile = TransformedProfile::new(
            TransformKind::LogDelta,
            traj.s.clone(),
            traj.states.iter().map(|s| s.w).collect(),
            traj.states.iter().map(|s| s.dw).collect(),
        )
        .unwrap();
        let rep = critical_flux_identity(&profile, &params, 10.0).unwrap();
        assert!(
            rep.max_rel_gap < 0.02,
            "{params:?}: gap {} ({})",
            rep.max_rel_gap,
            rep.tail_model
        );
        assert!(rep.truncation_bound.is_finite() && rep.truncation_bound > 0.0);

        // Past the transient, w decays monotonically to the origin.
        let later = traj.s.iter().position(|s| *s > 10.0).unwrap();
        assert!(traj.states[later..].windows(2).all(|w| w[1].w <= w[0].w));
        assert!(traj.states.last().unwrap().w < 0.1);
    }
}
