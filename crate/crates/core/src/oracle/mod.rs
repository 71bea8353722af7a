//! Exact Lindblad propagation of the full `2^N`-dimensional density matrix.
//!
//! Small chains only; this is the reference the other engines are checked
//! against and the only engine that carries the collective channel.

mod density;
mod generator;

pub use density::{
    observables, site_mask, DensityMatrix, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL,
};
pub use generator::{build_generator, LindbladGenerator, DEFAULT_ORACLE_CAP};

use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Rk4};
use crate::lattice::{Engine, Observable, Trajectory};

/// Invariant breach that aborts a propagation.
pub const PROPAGATION_TOL: f64 = 1e-6;
/// `eta / kappa` above which the bad-cavity elimination is questionable.
pub const BAD_CAVITY_RATIO: f64 = 0.1;
/// Largest dimension at which positivity is checked at every sample by default.
pub const DENSE_POSITIVITY_DIM: usize = 256;

/// Purcell-enhanced collective rate `4 eta^2 / kappa`.
pub fn purcell_rate(eta: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() || !eta.is_finite() {
        return Err(Error::InvalidSpec(format!("cavity linewidth must be positive and finite, got {kappa}")));
    }
    if eta.abs() / kappa > BAD_CAVITY_RATIO {
        log::warn!("eta / kappa = {} exceeds {BAD_CAVITY_RATIO}; the cavity is not in the bad-cavity limit", eta.abs() / kappa);
    }
    Ok(4.0 * eta * eta / kappa)
}

/// When positivity is checked during a propagation. Trace and Hermiticity
/// are checked at every recorded sample regardless.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PositivityCheck {
    /// At every recorded sample.
    EverySample,
    /// Only on the final state.
    Final,
}

impl PositivityCheck {
    pub fn for_dim(dim: usize) -> Self {
        if dim <= DENSE_POSITIVITY_DIM {
            PositivityCheck::EverySample
        } else {
            PositivityCheck::Final
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleRun {
    pub trajectory: Trajectory,
    pub final_state: DensityMatrix,
    /// Largest trace, Hermiticity or positivity breach seen at any check.
    pub max_breach: f64,
}

/// Fixed-step RK4 on the vectorized density matrix, recording `observables`
/// at the sampled times.
pub fn propagate(
    generator: &LindbladGenerator,
    rho0: &DensityMatrix,
    cfg: &IntegratorConfig,
    requested: &[Observable],
) -> Result<OracleRun> {
    let dim = generator.dim();
    propagate_with(generator, rho0, cfg, requested, PositivityCheck::for_dim(dim))
}

pub fn propagate_with(
    generator: &LindbladGenerator,
    rho0: &DensityMatrix,
    cfg: &IntegratorConfig,
    requested: &[Observable],
    positivity: PositivityCheck,
) -> Result<OracleRun> {
    cfg.validate()?;
    let spec = *generator.spec();
    if rho0.dim() != generator.dim() {
        return Err(Error::InvalidState(format!(
            "density matrix has dimension {} but the generator acts on {}",
            rho0.dim(),
            generator.dim()
        )));
    }
    rho0.validate()?;
    for obs in requested {
        obs.check_sites(&spec)?;
    }

    let times = cfg.sample_times();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); requested.len()];
    let mut rho = rho0.clone();
    let mut max_breach = 0.0f64;
    let check = |rho: &DensityMatrix, t: f64, positive: bool| -> Result<f64> {
        let breach = rho.invariant_breach(positive)?;
        if !(breach <= PROPAGATION_TOL) {
            return Err(Error::Unstable {
                time: t,
                detail: format!("density-matrix invariant breached by {breach:.3e} at dt = {}", cfg.dt),
            });
        }
        Ok(breach)
    };

    for (col, obs) in columns.iter_mut().zip(requested) {
        col.push(rho.observable(&spec, obs));
    }
    let mut rk = Rk4::new(dim_sq(&rho));
    let mut f = |y: &[num_complex::Complex64], dy: &mut [num_complex::Complex64]| generator.apply(y, dy);
    let n_steps = cfg.n_steps();
    for step in 1..=n_steps {
        rk.step(&mut f, rho.as_mut_slice(), cfg.dt);
        if step % cfg.sample_every == 0 || step == n_steps {
            let t = step as f64 * cfg.dt;
            let positive = positivity == PositivityCheck::EverySample || step == n_steps;
            max_breach = max_breach.max(check(&rho, t, positive)?);
            for (col, obs) in columns.iter_mut().zip(requested) {
                col.push(rho.observable(&spec, obs));
            }
        }
    }

    let mut trajectory = Trajectory::new(times, spec, Engine::Oracle)?;
    for (obs, col) in requested.iter().zip(columns) {
        trajectory.push_column(obs.to_string(), col)?;
    }
    Ok(OracleRun { trajectory, final_state: rho, max_breach })
}

fn dim_sq(rho: &DensityMatrix) -> usize {
    rho.dim() * rho.dim()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    fn single_spin(gamma: f64) -> LatticeSpec {
        LatticeSpec {
            n_sites: 1,
            delta_a: 1.0,
            delta_b: 1.0,
            gamma_a: gamma,
            gamma_b: gamma,
            coupling: 0.05,
            gamma_collective: 0.0,
        }
    }

    #[test]
    fn purcell_examples() {
        assert!((purcell_rate(0.1, 10.0).unwrap() - 0.004).abs() < 1e-15);
        assert_eq!(purcell_rate(0.0, 3.0).unwrap(), 0.0);
        assert!((purcell_rate(1.0, 10.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(purcell_rate(0.1, 0.0).is_err());
        assert!(purcell_rate(0.1, -1.0).is_err());
    }

    #[test]
    fn single_spin_decays_exponentially() {
        let spec = single_spin(0.05);
        let g = build_generator(&spec).unwrap();
        let cfg = IntegratorConfig::new(0.01, 40.0, 100).unwrap();
        let run = propagate(&g, &DensityMatrix::fully_charged(1), &cfg, &[Observable::SigmaZ(1)]).unwrap();
        for (t, z) in run.trajectory.times().iter().zip(run.trajectory.column("sigma_z_1").unwrap()) {
            assert!((z - (2.0 * (-0.05 * t).exp() - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_state_stays_put() {
        let spec = LatticeSpec::dimeric(4, 0.25, 0.05, 0.05).unwrap().with_collective_decay(0.5);
        let g = build_generator(&spec).unwrap();
        let cfg = IntegratorConfig::new(0.05, 10.0, 20).unwrap();
        let run = propagate(&g, &DensityMatrix::ground(4), &cfg, &[Observable::Energy]).unwrap();
        assert_eq!(run.final_state, DensityMatrix::ground(4));
        assert!(run.trajectory.column("energy").unwrap().iter().all(|&e| e == -1.0));
    }

    #[test]
    fn decoupled_uniform_sites_are_identical() {
        let spec = LatticeSpec::dimeric(4, 1.0, 0.05, 0.0).unwrap();
        let g = build_generator(&spec).unwrap();
        let cfg = IntegratorConfig::new(0.05, 20.0, 10).unwrap();
        let obs: Vec<Observable> = (1..=4).map(Observable::SigmaZ).collect();
        let run = propagate(&g, &DensityMatrix::fully_charged(4), &cfg, &obs).unwrap();
        let first = run.trajectory.column("sigma_z_1").unwrap().to_vec();
        for j in 2..=4 {
            let col = run.trajectory.column(&format!("sigma_z_{j}")).unwrap();
            assert!(col.iter().zip(&first).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn fully_charged_excitation_is_monotone() {
        let spec = LatticeSpec::dimeric(6, 0.25, 0.05, 0.05).unwrap();
        let g = build_generator(&spec).unwrap();
        let cfg = IntegratorConfig::new(0.02, 30.0, 25).unwrap();
        let run = propagate(&g, &DensityMatrix::fully_charged(6), &cfg, &[Observable::TotalExcitation]).unwrap();
        let total = run.trajectory.column("total_excitation").unwrap();
        assert!(total.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(run.max_breach < 1e-10);
    }

    #[test]
    fn collective_channel_discharges_faster() {
        let base = LatticeSpec::dimeric(4, 0.25, 0.05, 0.05).unwrap();
        let cfg = IntegratorConfig::new(0.02, 40.0, 5).unwrap();
        let crossing = |spec: &LatticeSpec| {
            let run = propagate(&build_generator(spec).unwrap(), &DensityMatrix::fully_charged(4), &cfg, &[Observable::Population])
                .unwrap();
            let p = run.trajectory.column("population").unwrap();
            run.trajectory.times()[p.iter().position(|&x| x < 0.0).unwrap()]
        };
        assert!(crossing(&base.with_collective_decay(0.5)) < crossing(&base));
    }

    #[test]
    fn rk4_step_halving() {
        let spec = LatticeSpec::dimeric(2, 0.25, 0.05, 0.3).unwrap().with_collective_decay(0.1);
        let g = build_generator(&spec).unwrap();
        let rho0 = DensityMatrix::fully_charged(2);
        let final_at = |dt: f64| {
            propagate(&g, &rho0, &IntegratorConfig::new(dt, 20.0, 1000).unwrap(), &[]).unwrap().final_state
        };
        let reference = final_at(0.4 / 8.0);
        let err = |r: &DensityMatrix| {
            r.as_slice().iter().zip(reference.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let ratio = err(&final_at(0.4)) / err(&final_at(0.2));
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_invalid_initial_state() {
        let spec = LatticeSpec::dimeric(2, 0.25, 0.05, 0.05).unwrap();
        let g = build_generator(&spec).unwrap();
        let cfg = IntegratorConfig::new(0.1, 1.0, 1).unwrap();
        let bad = DensityMatrix::zeros(2);
        assert!(propagate(&g, &bad, &cfg, &[]).is_err());
        assert!(propagate(&g, &DensityMatrix::ground(3), &cfg, &[]).is_err());
    }
}
