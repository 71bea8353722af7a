//! Second-order cumulant dynamics for many excitations.
//!
//! The state holds the populations `<sigma_j^z>` and the pair correlations
//! `C_nm = <sigma_n^+ sigma_m^->` for `n < m`. Lower-triangle entries are
//! conjugates and the diagonal is `(1 + sz_j) / 2`; neither is stored.
//! Three-operator averages are closed with
//! `<sigma_n^z sigma_m^+ sigma_h^-> ~ <sigma_n^z> <sigma_m^+ sigma_h^->`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Rk4};
use crate::lattice::{Engine, LatticeSpec, Observable, Trajectory};

/// Integration slack on the population and correlation bounds.
pub const STATE_SLACK: f64 = 1e-6;
/// Bound violation that aborts an integration.
pub const ABORT_SLACK: f64 = 1e-3;

/// Populations and packed upper-triangular correlations in one flat vector.
///
/// Entries `0..N` hold `sz_j` in their real parts; the correlations of row
/// `n` follow at `row_offset(n)`, one per `m = n+1..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantState {
    n_sites: usize,
    data: Vec<Complex64>,
}

fn row_offset(n_sites: usize, n: usize) -> usize {
    n_sites + n * (2 * n_sites - n - 1) / 2
}

impl CumulantState {
    fn zeros(n_sites: usize) -> Self {
        CumulantState { n_sites, data: vec![Complex64::default(); n_sites + n_sites * (n_sites - 1) / 2] }
    }

    /// Every spin up, no correlations.
    pub fn fully_charged(n_sites: usize) -> Self {
        let mut s = Self::zeros(n_sites);
        s.data[..n_sites].iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        s
    }

    /// Every spin down.
    pub fn ground(n_sites: usize) -> Self {
        let mut s = Self::zeros(n_sites);
        s.data[..n_sites].iter_mut().for_each(|z| *z = Complex64::new(-1.0, 0.0));
        s
    }

    /// Builds a state from populations and a full correlation accessor
    /// (0-based, consulted for `n < m` only).
    pub fn from_parts(sz: &[f64], corr: impl Fn(usize, usize) -> Complex64) -> Self {
        let n_sites = sz.len();
        let mut s = Self::zeros(n_sites);
        for (slot, &z) in s.data.iter_mut().zip(sz) {
            *slot = Complex64::new(z, 0.0);
        }
        for n in 0..n_sites {
            for m in n + 1..n_sites {
                let i = s.index(n, m);
                s.data[i] = corr(n, m);
            }
        }
        s
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn index(&self, n: usize, m: usize) -> usize {
        debug_assert!(n < m && m < self.n_sites);
        row_offset(self.n_sites, n) + (m - n - 1)
    }

    /// `<sigma_j^z>`, 1-based.
    pub fn sz(&self, j: usize) -> f64 {
        self.data[j - 1].re
    }

    pub fn sz_all(&self) -> Vec<f64> {
        self.data[..self.n_sites].iter().map(|z| z.re).collect()
    }

    /// `<sigma_n^+ sigma_m^->`, 1-based, any ordering.
    pub fn corr(&self, n: usize, m: usize) -> Complex64 {
        corr_at(self.n_sites, &self.data, n - 1, m - 1)
    }

    /// `sum_j (1 + sz_j) / 2`.
    pub fn total_excitation(&self) -> f64 {
        self.data[..self.n_sites].iter().map(|z| 0.5 * (1.0 + z.re)).sum()
    }

    /// Normalized energy `(sum_j (delta_j/2) sz_j + 2 lambda sum_j Re C_{j,j+1}) / sum_j (delta_j/2)`.
    pub fn energy(&self, spec: &LatticeSpec) -> f64 {
        let hop: f64 = (1..self.n_sites).map(|j| 2.0 * spec.coupling * self.corr(j, j + 1).re).sum();
        (self.onsite(spec) + hop) / spec.energy_scale()
    }

    /// Normalized population `sum_j (delta_j/2) sz_j / sum_j (delta_j/2)`.
    pub fn population(&self, spec: &LatticeSpec) -> f64 {
        self.onsite(spec) / spec.energy_scale()
    }

    fn onsite(&self, spec: &LatticeSpec) -> f64 {
        spec.detunings().iter().zip(&self.data).map(|(d, z)| 0.5 * d * z.re).sum()
    }

    /// Largest violation of `|sz_j| <= 1` and `|C_nm| <= 1`, zero if none.
    /// Non-finite entries count as infinite.
    pub fn bound_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, z) in self.data.iter().enumerate() {
            let v = if i < self.n_sites { z.re.abs() } else { z.norm() };
            if !v.is_finite() || !z.im.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(v - 1.0);
        }
        worst
    }

    /// Dense `N x N` correlation matrix with the derived diagonal, row-major.
    pub fn full_correlation_matrix(&self) -> Vec<Complex64> {
        let n = self.n_sites;
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                out.push(corr_at(n, &self.data, a, b));
            }
        }
        out
    }
}

/// `C_ab` (0-based) from the flat layout.
#[inline]
fn corr_at(n_sites: usize, data: &[Complex64], a: usize, b: usize) -> Complex64 {
    use std::cmp::Ordering;
    match a.cmp(&b) {
        Ordering::Equal => Complex64::new(0.5 * (1.0 + data[a].re), 0.0),
        Ordering::Less => data[row_offset(n_sites, a) + (b - a - 1)],
        Ordering::Greater => data[row_offset(n_sites, b) + (a - b - 1)].conj(),
    }
}

/// `C_ab` for `a <= b` (0-based): the only accesses the equations make.
#[inline]
fn upper(n_sites: usize, data: &[Complex64], a: usize, b: usize) -> Complex64 {
    if a == b {
        Complex64::new(0.5 * (1.0 + data[a].re), 0.0)
    } else {
        data[row_offset(n_sites, a) + (b - a - 1)]
    }
}

pub fn init_fully_charged(spec: &LatticeSpec) -> Result<CumulantState> {
    spec.validate()?;
    Ok(CumulantState::fully_charged(spec.n_sites))
}

/// Precomputed site parameters for the right-hand side.
#[derive(Clone, Debug)]
pub struct CumulantRhs {
    n_sites: usize,
    coupling: f64,
    delta: Vec<f64>,
    gamma: Vec<f64>,
}

impl CumulantRhs {
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        spec.validate()?;
        if spec.gamma_collective != 0.0 {
            return Err(Error::CollectiveDecayUnsupported(spec.gamma_collective));
        }
        Ok(CumulantRhs {
            n_sites: spec.n_sites,
            coupling: spec.coupling,
            delta: spec.detunings(),
            gamma: spec.decay_rates(),
        })
    }

    /// Writes the time derivative of the flat state `y` into `dy`.
    ///
    /// Populations:
    /// `d sz_j/dt = 4 lambda (Im C_{j,j+1} + Im C_{j,j-1}) - gamma_j (1 + sz_j)`.
    /// Pairs, `n < m`:
    /// `d C_nm/dt = [i (Delta_n - Delta_m) - (gamma_n + gamma_m)/2] C_nm
    ///   - i lambda sz_n sum_{h = n +- 1} C_hm + i lambda sz_m sum_{h = m +- 1} C_nh`,
    /// dropping `h` outside the chain. For `m = n + 1` the hopping sums
    /// reach the derived diagonal, which yields the nearest-neighbour drive.
    pub fn eval(&self, y: &[Complex64], dy: &mut [Complex64]) {
        let n = self.n_sites;
        let lam = self.coupling;
        let i_lam = Complex64::new(0.0, lam);

        for j in 0..n {
            let mut im = 0.0;
            if j + 1 < n {
                im += upper(n, y, j, j + 1).im;
            }
            if j > 0 {
                im -= upper(n, y, j - 1, j).im;
            }
            dy[j] = Complex64::new(4.0 * lam * im - self.gamma[j] * (1.0 + y[j].re), 0.0);
        }

        for a in 0..n {
            let sz_a = y[a].re;
            let base = row_offset(n, a);
            for b in a + 1..n {
                let sz_b = y[b].re;
                let c = y[base + (b - a - 1)];
                let free = Complex64::new(-0.5 * (self.gamma[a] + self.gamma[b]), self.delta[a] - self.delta[b]);
                let mut left = upper(n, y, a + 1, b);
                if a > 0 {
                    left += upper(n, y, a - 1, b);
                }
                let mut right = upper(n, y, a, b - 1);
                if b + 1 < n {
                    right += upper(n, y, a, b + 1);
                }
                dy[base + (b - a - 1)] = free * c + i_lam * (right * sz_b - left * sz_a);
            }
        }
    }
}

/// Time derivative of `state` as a state-shaped rate.
pub fn derivative(spec: &LatticeSpec, state: &CumulantState) -> Result<CumulantState> {
    if state.n_sites != spec.n_sites {
        return Err(Error::InvalidState(format!(
            "state has {} sites but the lattice has {}",
            state.n_sites, spec.n_sites
        )));
    }
    let rhs = CumulantRhs::new(spec)?;
    let mut rate = CumulantState::zeros(spec.n_sites);
    rhs.eval(&state.data, &mut rate.data);
    Ok(rate)
}

/// Sampled trajectory plus the state at `t_end`.
#[derive(Clone, Debug)]
pub struct CumulantRun {
    pub trajectory: Trajectory,
    pub final_state: CumulantState,
}

fn sample_value(spec: &LatticeSpec, s: &CumulantState, obs: &Observable) -> Result<f64> {
    Ok(match *obs {
        Observable::SigmaZ(j) => s.sz(j),
        Observable::CorrRe(n, m) => s.corr(n, m).re,
        Observable::CorrIm(n, m) => s.corr(n, m).im,
        Observable::Energy => s.energy(spec),
        Observable::Population => s.population(spec),
        Observable::TotalExcitation => s.total_excitation(),
        Observable::SigmaX(_) => {
            return Err(Error::UnsupportedObservable {
                name: obs.to_string(),
                engine: Engine::Cumulant.to_string(),
            })
        }
    })
}

/// Fixed-step RK4 from `state0` to `cfg.t_end`.
///
/// Columns `sigma_z_1..sigma_z_N` are always recorded, followed by any
/// extra observables not already present. Aborts with [`Error::Unstable`]
/// once a bound is exceeded by more than [`ABORT_SLACK`].
pub fn integrate(
    spec: &LatticeSpec,
    state0: &CumulantState,
    cfg: &IntegratorConfig,
    extra: &[Observable],
) -> Result<CumulantRun> {
    cfg.validate()?;
    let rhs = CumulantRhs::new(spec)?;
    if state0.n_sites != spec.n_sites {
        return Err(Error::InvalidState(format!(
            "state has {} sites but the lattice has {}",
            state0.n_sites, spec.n_sites
        )));
    }
    let mut observables: Vec<Observable> = (1..=spec.n_sites).map(Observable::SigmaZ).collect();
    for obs in extra {
        obs.check_sites(spec)?;
        if !observables.contains(obs) {
            observables.push(*obs);
        }
    }
    if let Some(bad) = observables.iter().find(|o| matches!(o, Observable::SigmaX(_))) {
        return Err(Error::UnsupportedObservable { name: bad.to_string(), engine: Engine::Cumulant.to_string() });
    }

    let times = cfg.sample_times();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); observables.len()];
    let mut state = state0.clone();
    let mut record = |s: &CumulantState| -> Result<()> {
        for (col, obs) in columns.iter_mut().zip(&observables) {
            col.push(sample_value(spec, s, obs)?);
        }
        Ok(())
    };
    record(&state)?;

    let mut rk = Rk4::new(state.data.len());
    let mut f = |y: &[Complex64], dy: &mut [Complex64]| rhs.eval(y, dy);
    let n_steps = cfg.n_steps();
    for step in 1..=n_steps {
        rk.step(&mut f, &mut state.data, cfg.dt);
        let violation = state.bound_violation();
        if !(violation <= ABORT_SLACK) {
            return Err(Error::Unstable {
                time: step as f64 * cfg.dt,
                detail: format!("state bound exceeded by {violation:.3e} at dt = {}", cfg.dt),
            });
        }
        if step % cfg.sample_every == 0 || step == n_steps {
            record(&state)?;
        }
    }

    let mut trajectory = Trajectory::new(times, *spec, Engine::Cumulant)?;
    for (obs, col) in observables.iter().zip(columns) {
        trajectory.push_column(obs.to_string(), col)?;
    }
    Ok(CumulantRun { trajectory, final_state: state })
}
