//! Fixed-step classical Runge-Kutta shared by the cumulant and oracle engines.

use std::ops::{Add, AddAssign, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step size, horizon and output decimation (every `sample_every`-th step is
/// recorded; the final step always is).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
}

pub const DEFAULT_DT: f64 = 0.01;

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { dt: DEFAULT_DT, t_end: 100.0, sample_every: 10 }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, sample_every: usize) -> Result<Self> {
        let cfg = IntegratorConfig { dt, t_end, sample_every };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidIntegrator(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::InvalidIntegrator(format!(
                "t_end must be at least dt, got t_end = {} with dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidIntegrator("sample_every must be at least 1".into()));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::InvalidIntegrator(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn is_sample(&self, step: usize) -> bool {
        step % self.sample_every == 0 || step == self.n_steps()
    }

    /// Step indices at which output is recorded.
    pub fn sample_steps(&self) -> Vec<usize> {
        (0..=self.n_steps()).filter(|&k| self.is_sample(k)).collect()
    }

    /// Recorded times, `step * dt`.
    pub fn sample_times(&self) -> Vec<f64> {
        self.sample_steps().into_iter().map(|k| k as f64 * self.dt).collect()
    }
}

/// Element type of an integrable state vector.
pub trait Field: Copy + Default + Add<Output = Self> + AddAssign + Mul<f64, Output = Self> {}

impl Field for f64 {}
impl Field for Complex64 {}

/// Classical fourth-order Runge-Kutta with preallocated stage buffers.
#[derive(Clone, Debug)]
pub struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Field> Rk4<T> {
    pub fn new(len: usize) -> Self {
        let z = vec![T::default(); len];
        Rk4 { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), scratch: z }
    }

    /// Advances `y` by one step of size `dt` under `dy/dt = rhs(y)`.
    pub fn step<F>(&mut self, rhs: &mut F, y: &mut [T], dt: f64)
    where
        F: FnMut(&[T], &mut [T]),
    {
        debug_assert_eq!(y.len(), self.k1.len());
        let half = 0.5 * dt;

        rhs(y, &mut self.k1);
        for ((s, &yi), &k) in self.scratch.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = yi + k * half;
        }
        rhs(&self.scratch, &mut self.k2);
        for ((s, &yi), &k) in self.scratch.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = yi + k * half;
        }
        rhs(&self.scratch, &mut self.k3);
        for ((s, &yi), &k) in self.scratch.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = yi + k * dt;
        }
        rhs(&self.scratch, &mut self.k4);

        let w = dt / 6.0;
        for i in 0..y.len() {
            let incr = self.k1[i] + self.k2[i] * 2.0 + self.k3[i] * 2.0 + self.k4[i];
            y[i] += incr * w;
        }
    }
}

/// Integrates `y` from `t = 0` to `cfg.t_end`, calling `on_sample(t, y)` at
/// every recorded step (including `t = 0`). An error from `on_sample` aborts.
pub fn integrate_sampled<T, F, S>(cfg: &IntegratorConfig, y: &mut [T], mut rhs: F, mut on_sample: S) -> Result<()>
where
    T: Field,
    F: FnMut(&[T], &mut [T]),
    S: FnMut(f64, &[T]) -> Result<()>,
{
    cfg.validate()?;
    let mut rk = Rk4::new(y.len());
    let n_steps = cfg.n_steps();
    on_sample(0.0, y)?;
    for step in 1..=n_steps {
        rk.step(&mut rhs, y, cfg.dt);
        if cfg.is_sample(step) {
            on_sample(step as f64 * cfg.dt, y)?;
        }
    }
    Ok(())
}
