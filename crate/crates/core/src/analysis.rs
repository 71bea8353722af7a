//! Figures of merit computed from trajectories: energy excess of an
//! engineered lattice over its uniform reference, power-law growth of the
//! energy ratio, turnover time, the detuning-ratio sweep and the
//! synchronization score of two coherence signals.

use rayon::prelude::*;
use serde::Serialize;

use crate::cumulant::{integrate, CumulantState};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::lattice::{LatticeSpec, Trajectory};

/// Times with `|E_u| <` this value are flagged: the relative excess divides by `E_u`.
pub const ILL_CONDITIONED_ENERGY: f64 = 0.05;
/// Absolute slack when matching two time grids.
pub const GRID_TOL: f64 = 1e-9;

/// Normalized energy of a cumulant state.
pub fn energy_from_cumulant(spec: &LatticeSpec, state: &CumulantState) -> f64 {
    state.energy(spec)
}

/// Normalized population of a cumulant state.
pub fn population_from_cumulant(spec: &LatticeSpec, state: &CumulantState) -> f64 {
    state.population(spec)
}

/// Pointwise comparison of an engineered run `d` with a reference run `u`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcessReport {
    pub times: Vec<f64>,
    /// `(E_d - E_u) / E_u`.
    pub relative_excess: Vec<f64>,
    /// `E_d - E_u`.
    pub absolute_excess: Vec<f64>,
    /// `|E_u| < ILL_CONDITIONED_ENERGY`; excluded from fits and norms.
    pub ill_conditioned: Vec<bool>,
    pub spec_d: LatticeSpec,
    pub spec_u: LatticeSpec,
}

impl ExcessReport {
    /// Builds the report from two energy series on a shared grid.
    pub fn from_series(
        times: &[f64],
        energy_d: &[f64],
        energy_u: &[f64],
        spec_d: LatticeSpec,
        spec_u: LatticeSpec,
    ) -> Result<Self> {
        if energy_d.len() != times.len() || energy_u.len() != times.len() {
            return Err(Error::GridMismatch(format!(
                "{} times but {} and {} energies",
                times.len(),
                energy_d.len(),
                energy_u.len()
            )));
        }
        let relative_excess = energy_d.iter().zip(energy_u).map(|(d, u)| (d - u) / u).collect();
        let absolute_excess = energy_d.iter().zip(energy_u).map(|(d, u)| d - u).collect();
        let ill_conditioned = energy_u.iter().map(|u| !(u.abs() >= ILL_CONDITIONED_ENERGY)).collect();
        Ok(ExcessReport { times: times.to_vec(), relative_excess, absolute_excess, ill_conditioned, spec_d, spec_u })
    }

    /// Times and relative excess with ill-conditioned points removed.
    pub fn well_conditioned(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.relative_excess)
            .zip(&self.ill_conditioned)
            .filter(|(_, &bad)| !bad)
            .map(|((&t, &r), _)| (t, r))
    }

    /// Intervals `[t0, t1]` of consecutive flagged samples.
    pub fn flagged_intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut open: Option<f64> = None;
        for (i, (&t, &bad)) in self.times.iter().zip(&self.ill_conditioned).enumerate() {
            match (bad, open) {
                (true, None) => open = Some(t),
                (false, Some(t0)) => {
                    out.push((t0, self.times[i - 1]));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(t0) = open {
            out.push((t0, *self.times.last().unwrap()));
        }
        out
    }
}

/// Checks that two grids agree point by point.
pub fn check_grids(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} samples against {}", a.len(), b.len())));
    }
    if let Some((i, (x, y))) = a.iter().zip(b).enumerate().find(|(_, (x, y))| (*x - *y).abs() > GRID_TOL) {
        return Err(Error::GridMismatch(format!("sample {i} is at t = {x} in one run and t = {y} in the other")));
    }
    Ok(())
}

/// Compares the `energy` columns of two runs.
pub fn excess_report(traj_d: &Trajectory, traj_u: &Trajectory) -> Result<ExcessReport> {
    check_grids(traj_d.times(), traj_u.times())?;
    fn energy(t: &Trajectory) -> Result<&[f64]> {
        t.column("energy").ok_or_else(|| Error::Analysis("trajectory has no `energy` column".into()))
    }
    ExcessReport::from_series(traj_d.times(), energy(traj_d)?, energy(traj_u)?, *traj_d.spec(), *traj_u.spec())
}

/// Least-squares power law `E_d / E_u ~ t^alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    /// `log` of the prefactor.
    pub intercept: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// The final third of a grid, `[t_last - span / 3, t_last]`.
pub fn default_fit_window(times: &[f64]) -> Option<(f64, f64)> {
    let (first, last) = (*times.first()?, *times.last()?);
    Some((last - (last - first) / 3.0, last))
}

/// Slope of `log(1 + relative_excess)` against `log t` over `window`,
/// skipping `t <= 0` and flagged samples.
pub fn power_law_fit(report: &ExcessReport, window: (f64, f64)) -> Result<PowerLawFit> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::Analysis(format!("empty fit window [{t0}, {t1}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, r) in report.well_conditioned() {
        if t < t0 - GRID_TOL || t > t1 + GRID_TOL || t <= 0.0 {
            continue;
        }
        let ratio = 1.0 + r;
        if !(ratio > 0.0) {
            return Err(Error::Analysis(format!("E_d / E_u = {ratio} at t = {t} is not positive")));
        }
        xs.push(t.ln());
        ys.push(ratio.ln());
    }
    let (alpha, intercept) = linear_regression(&xs, &ys)?;
    Ok(PowerLawFit { alpha, intercept, window, n_points: xs.len() })
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Analysis(format!("{n} points in the fit window, need at least 2")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Analysis("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Time of the largest absolute excess (earliest on ties). A maximum at
/// either end of the grid is not a turnover.
pub fn turnover_time(report: &ExcessReport) -> Result<f64> {
    let excess = &report.absolute_excess;
    if excess.is_empty() {
        return Err(Error::Analysis("empty report".into()));
    }
    let mut best = 0;
    for (i, v) in excess.iter().enumerate() {
        if *v > excess[best] {
            best = i;
        }
    }
    let t = report.times[best];
    if best == 0 || best + 1 == excess.len() {
        return Err(Error::NoInteriorTurnover(t));
    }
    Ok(t)
}

/// One entry of a detuning-ratio sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub ratio: f64,
    /// Relative excess at the probe time, or why the run failed.
    pub relative_excess: Result<f64>,
}

/// `base` with `delta_b = ratio * delta_a` and `gamma_b = ratio * gamma_a`.
pub fn spec_at_ratio(base: &LatticeSpec, ratio: f64) -> LatticeSpec {
    LatticeSpec { delta_b: ratio * base.delta_a, gamma_b: ratio * base.gamma_a, ..*base }
}

fn energy_at(spec: &LatticeSpec, t_probe: f64, dt: f64) -> Result<f64> {
    let cfg = IntegratorConfig::new(dt, t_probe, usize::MAX)?;
    let run = integrate(spec, &CumulantState::fully_charged(spec.n_sites), &cfg, &[])?;
    Ok(run.final_state.energy(spec))
}

/// Relative excess at `t_probe` of fully charged cumulant runs at each ratio
/// against the uniform reference of `base`. Runs execute in parallel;
/// output order follows `ratios`. Failures are reported per ratio.
pub fn ratio_sweep(base: &LatticeSpec, ratios: &[f64], t_probe: f64, dt: f64) -> Result<Vec<SweepPoint>> {
    let uniform = base.uniform_reference();
    let e_u = energy_at(&uniform, t_probe, dt)?;
    Ok(ratios
        .par_iter()
        .map(|&ratio| {
            let relative_excess = if !(ratio > 0.0 && ratio <= 1.0) {
                Err(Error::InvalidSpec(format!("ratio {ratio} is outside (0, 1]")))
            } else {
                energy_at(&spec_at_ratio(base, ratio), t_probe, dt).map(|e_d| (e_d - e_u) / e_u)
            };
            SweepPoint { ratio, relative_excess }
        })
        .collect())
}

/// Ratio with the largest successful relative excess (earliest on ties).
pub fn sweep_argmax(points: &[SweepPoint]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for p in points {
        if let Ok(v) = p.relative_excess {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((p.ratio, v));
            }
        }
    }
    best.map(|(r, _)| r)
}

/// Pearson correlation of two signals over the samples with `t` in `window`.
/// `-1` is perfect anti-phase locking.
pub fn synchronization_score(times: &[f64], x1: &[f64], x2: &[f64], window: (f64, f64)) -> Result<f64> {
    if x1.len() != times.len() || x2.len() != times.len() {
        return Err(Error::GridMismatch("signals and times differ in length".into()));
    }
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::Analysis(format!("empty window [{t0}, {t1}]")));
    }
    let picked: Vec<(f64, f64)> = times
        .iter()
        .zip(x1.iter().zip(x2))
        .filter(|(&t, _)| t >= t0 - GRID_TOL && t <= t1 + GRID_TOL)
        .map(|(_, (&a, &b))| (a, b))
        .collect();
    let n = picked.len();
    if n < 2 {
        return Err(Error::Analysis(format!("{n} samples in the window, need at least 2")));
    }
    let m1 = picked.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let m2 = picked.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
    for (a, b) in &picked {
        s11 += (a - m1).powi(2);
        s22 += (b - m2).powi(2);
        s12 += (a - m1) * (b - m2);
    }
    // Sums of squared rounding residues of a constant signal stay below this.
    let floor = |scale: f64| n as f64 * (16.0 * f64::EPSILON * scale).powi(2);
    let scale1 = picked.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let scale2 = picked.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if !(s11 > floor(scale1) && s22 > floor(scale2)) {
        return Err(Error::Analysis("a signal has zero variance in the window".into()));
    }
    Ok((s12 / (s11 * s22).sqrt()).clamp(-1.0, 1.0))
}

/// `sup |a - b| / sup max(|a|, |b|)` over the samples where `keep` holds.
pub fn relative_sup_distance(a: &[f64], b: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if keep(i) {
            num = num.max((x - y).abs());
            den = den.max(x.abs().max(y.abs()));
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
