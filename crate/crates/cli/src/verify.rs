//! Cross-engine equivalence suite on chains of at most eight sites.

use std::fmt::Write as _;

use qbattery::cumulant::{integrate, CumulantState};
use qbattery::integrator::IntegratorConfig;
use qbattery::oracle::{build_generator, propagate, DensityMatrix, POSITIVITY_TOL};
use qbattery::single_excitation::{DecayConvention, PureState1X, SingleExcitationDynamics};
use qbattery::{LatticeSpec, Observable};

/// Single spin against `2 exp(-gamma t) - 1`.
pub const SINGLE_SPIN_TOL: f64 = 1e-10;
/// Analytic one-excitation engine against the oracle.
pub const ANALYTIC_TOL: f64 = 1e-8;
/// Smallest deviation the full-rate convention must show.
pub const CANARY_MIN: f64 = 1e-2;
/// Cumulant populations and energy against the oracle on `t <= 5`.
pub const CUMULANT_TOL: f64 = 1e-4;
/// Uniform chains keep no correlations, so the closure is exact there.
pub const UNIFORM_CUMULANT_TOL: f64 = 1e-10;

const GAMMA_OVER_GAP: f64 = 0.05;
const COUPLING: f64 = 0.05;
const RATIOS: [f64; 2] = [0.25, 1.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expect {
    AtMost(f64),
    Above(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub expect: Expect,
    /// `NaN` when the check could not run.
    pub observed: f64,
    pub detail: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, expect: Expect, outcome: qbattery::Result<f64>) -> Self {
        let (observed, detail) = match outcome {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        Check { name: name.into(), expect, observed, detail }
    }

    pub fn passed(&self) -> bool {
        match self.expect {
            Expect::AtMost(tol) => self.observed <= tol,
            Expect::Above(min) => self.observed > min,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    /// Convention of the analytic engine under test.
    pub convention: DecayConvention,
}

/// Initial state `|g>/sqrt(2) + (|e_j1> + |e_j2>)/2` for a short chain, with
/// `j1` and `j2` next-nearest neighbours near the middle.
pub fn phi0_analog(n_sites: usize) -> qbattery::Result<PureState1X> {
    let (j1, j2) = match n_sites {
        2 => (1, 2),
        n => (n / 2 - (n / 2) % 2, n / 2 - (n / 2) % 2 + 2),
    };
    PureState1X::phi0(n_sites, j1, j2)
}

fn every_observable(n: usize) -> Vec<Observable> {
    let mut obs = Vec::new();
    for j in 1..=n {
        obs.push(Observable::SigmaZ(j));
        obs.push(Observable::SigmaX(j));
        for m in 1..=n {
            obs.push(Observable::CorrRe(j, m));
            obs.push(Observable::CorrIm(j, m));
        }
    }
    obs
}

/// Largest deviation between two trajectories over the shared columns.
fn max_deviation(a: &qbattery::Trajectory, b: &qbattery::Trajectory) -> f64 {
    let mut worst = 0.0f64;
    for (name, x) in a.columns() {
        if let Some(y) = b.column(name) {
            for (p, q) in x.iter().zip(y) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    worst
}

/// Largest `|analytic - oracle|` over every sigma_z, sigma_x and correlation,
/// together with the oracle's largest invariant breach.
pub fn analytic_vs_oracle(
    spec: &LatticeSpec,
    state: &PureState1X,
    convention: DecayConvention,
    cfg: &IntegratorConfig,
) -> qbattery::Result<(f64, f64)> {
    let obs = every_observable(spec.n_sites);
    let exact = propagate(&build_generator(spec)?, &DensityMatrix::from_single_excitation(state)?, cfg, &obs)?;
    let analytic = SingleExcitationDynamics::with_convention(spec, state, convention)?
        .trajectory(&obs, exact.trajectory.times())?;
    Ok((max_deviation(&analytic, &exact.trajectory), exact.max_breach))
}

/// Largest `|cumulant - oracle|` over sigma_z, energy and population for a
/// fully charged start, with the oracle's largest invariant breach.
pub fn cumulant_vs_oracle(spec: &LatticeSpec, cfg: &IntegratorConfig) -> qbattery::Result<(f64, f64)> {
    let n = spec.n_sites;
    let mut obs: Vec<Observable> = (1..=n).map(Observable::SigmaZ).collect();
    obs.extend([Observable::Energy, Observable::Population]);
    let exact = propagate(&build_generator(spec)?, &DensityMatrix::fully_charged(n), cfg, &obs)?;
    let closed = integrate(spec, &CumulantState::fully_charged(n), cfg, &obs)?;
    Ok((max_deviation(&exact.trajectory, &closed.trajectory), exact.max_breach))
}

fn single_spin(cfg: &IntegratorConfig) -> qbattery::Result<(f64, f64)> {
    let spec = LatticeSpec { n_sites: 1, ..LatticeSpec::dimeric(2, 1.0, GAMMA_OVER_GAP, COUPLING)? };
    let run = propagate(&build_generator(&spec)?, &DensityMatrix::fully_charged(1), cfg, &[Observable::SigmaZ(1)])?;
    let z = run.trajectory.column("sigma_z_1").expect("requested column");
    let dev = run
        .trajectory
        .times()
        .iter()
        .zip(z)
        .map(|(t, z)| (z - (2.0 * (-spec.gamma_a * t).exp() - 1.0)).abs())
        .fold(0.0, f64::max);
    Ok((dev, run.max_breach))
}

fn collective_breach() -> qbattery::Result<f64> {
    let spec = LatticeSpec::dimeric(6, 0.25, GAMMA_OVER_GAP, COUPLING)?;
    let spec = spec.with_collective_decay(10.0 * spec.gamma_a);
    let cfg = IntegratorConfig::new(0.02, 30.0, 10)?;
    Ok(propagate(&build_generator(&spec)?, &DensityMatrix::fully_charged(6), &cfg, &[Observable::Population])?
        .max_breach)
}

/// Runs every check in order. Engine failures become failing checks.
pub fn run_suite(opts: VerifyOptions) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut breach = 0.0f64;
    let mut record = |outcome: qbattery::Result<(f64, f64)>| -> qbattery::Result<f64> {
        outcome.map(|(dev, b)| {
            breach = breach.max(b);
            dev
        })
    };

    let fine = IntegratorConfig::new(0.01, 50.0, 50).expect("valid grid");
    let coarse = IntegratorConfig::new(0.015625, 50.0, 32).expect("valid grid");
    let short = IntegratorConfig::new(0.02, 5.0, 5).expect("valid grid");

    checks.push(Check::new("single spin decay, N=1", Expect::AtMost(SINGLE_SPIN_TOL), record(single_spin(&fine))));

    let conv = opts.convention.as_str();
    for (n, cfg) in [(2, &fine), (4, &fine), (6, &fine), (8, &coarse)] {
        for ratio in RATIOS {
            let outcome = LatticeSpec::dimeric(n, ratio, GAMMA_OVER_GAP, COUPLING)
                .and_then(|spec| analytic_vs_oracle(&spec, &phi0_analog(n)?, opts.convention, cfg));
            checks.push(Check::new(
                format!("analytic ({conv}) vs oracle, N={n}, ratio {ratio}"),
                Expect::AtMost(ANALYTIC_TOL),
                record(outcome),
            ));
        }
    }

    let canary = LatticeSpec::dimeric(4, 0.25, GAMMA_OVER_GAP, COUPLING)
        .and_then(|spec| analytic_vs_oracle(&spec, &phi0_analog(4)?, DecayConvention::FullRate, &fine));
    checks.push(Check::new("canary: full-rate analytic deviates, N=4", Expect::Above(CANARY_MIN), record(canary)));

    let dimeric = LatticeSpec::dimeric(8, 0.25, GAMMA_OVER_GAP, COUPLING).and_then(|s| cumulant_vs_oracle(&s, &short));
    checks.push(Check::new("cumulant vs oracle, N=8, ratio 0.25, t<=5", Expect::AtMost(CUMULANT_TOL), record(dimeric)));
    let uniform = LatticeSpec::dimeric(8, 1.0, GAMMA_OVER_GAP, COUPLING).and_then(|s| cumulant_vs_oracle(&s, &short));
    checks.push(Check::new(
        "cumulant vs oracle, N=8, uniform, t<=5",
        Expect::AtMost(UNIFORM_CUMULANT_TOL),
        record(uniform),
    ));

    let collective = collective_breach();
    let invariants = collective.map(|b| breach.max(b));
    checks.push(Check::new(
        "oracle trace/Hermiticity/positivity, all runs",
        Expect::AtMost(POSITIVITY_TOL),
        invariants,
    ));
    checks
}

/// One line per check: name, bound, observed value and verdict.
pub fn render(checks: &[Check]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<52} {:>12} {:>12}  result", "check", "bound", "observed");
    for c in checks {
        let bound = match c.expect {
            Expect::AtMost(t) => format!("<= {t:.1e}"),
            Expect::Above(t) => format!("> {t:.1e}"),
        };
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        let _ = write!(s, "{:<52} {:>12} {:>12.3e}  {verdict}", c.name, bound, c.observed);
        if let Some(d) = &c.detail {
            let _ = write!(s, " ({d})");
        }
        s.push('\n');
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    let _ = writeln!(s, "{} of {} checks passed", checks.len() - failed, checks.len());
    s
}
