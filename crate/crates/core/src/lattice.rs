//! Dimeric spin chain parameters, observable names and the trajectory container.
//!
//! Frequencies and rates are measured in units of the odd-site gap `delta_a`
//! (conventionally 1), so times are in units of `1 / delta_a`. Sites are
//! numbered `1..=n_sites` in every public interface; odd sites are type A and
//! even sites type B.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of an open-boundary chain with staggered gaps and decay rates.
///
/// Fields may be set independently (e.g. to vary `gamma_a / gamma_b` on its
/// own); [`LatticeSpec::dimeric`] is the constructor that ties each decay rate
/// to its gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_sites: usize,
    pub delta_a: f64,
    pub delta_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub coupling: f64,
    pub gamma_collective: f64,
}

impl LatticeSpec {
    /// Chain with `delta_a = 1`, `delta_b = ratio` and decay rates
    /// proportional to the gaps, `gamma / delta = gamma_over_gap` on both
    /// sublattices. No collective channel.
    pub fn dimeric(n_sites: usize, delta_b_ratio: f64, gamma_over_gap: f64, coupling: f64) -> Result<Self> {
        if !(delta_b_ratio > 0.0 && delta_b_ratio <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "gap ratio must lie in (0, 1], got {delta_b_ratio}"
            )));
        }
        if !(gamma_over_gap >= 0.0) || !gamma_over_gap.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "decay-to-gap ratio must be non-negative, got {gamma_over_gap}"
            )));
        }
        let spec = LatticeSpec {
            n_sites,
            delta_a: 1.0,
            delta_b: delta_b_ratio,
            gamma_a: gamma_over_gap,
            gamma_b: gamma_over_gap * delta_b_ratio,
            coupling,
            gamma_collective: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every lattice invariant: an even number of sites (at least two),
    /// a positive A gap and non-negative rates.
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.n_sites % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "n_sites must be an even integer >= 2, got {}",
                self.n_sites
            )));
        }
        self.validate_rates()
    }

    /// Like [`validate`](Self::validate) but accepts any chain length >= 1.
    /// The exact oracle needs no sublattice pairing, so it also runs odd
    /// chains such as a single spin.
    pub fn validate_any_length(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidSpec("n_sites must be at least 1".into()));
        }
        self.validate_rates()
    }

    fn validate_rates(&self) -> Result<()> {
        let finite = [
            self.delta_a,
            self.delta_b,
            self.gamma_a,
            self.gamma_b,
            self.coupling,
            self.gamma_collective,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidSpec("parameters must be finite".into()));
        }
        if self.delta_a <= 0.0 {
            return Err(Error::InvalidSpec(format!("delta_a must be positive, got {}", self.delta_a)));
        }
        for (name, v) in [
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_collective", self.gamma_collective),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidSpec(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// `(detuning, decay rate)` of the 1-based site `j`.
    pub fn site_params(&self, j: usize) -> Result<(f64, f64)> {
        self.check_site(j)?;
        Ok(self.site_params_unchecked(j - 1))
    }

    /// Same as [`site_params`](Self::site_params) for a 0-based index.
    pub(crate) fn site_params_unchecked(&self, idx: usize) -> (f64, f64) {
        if idx % 2 == 0 {
            (self.delta_a, self.gamma_a)
        } else {
            (self.delta_b, self.gamma_b)
        }
    }

    pub fn check_site(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n_sites {
            return Err(Error::SiteOutOfRange { index: j, n_sites: self.n_sites });
        }
        Ok(())
    }

    /// Per-site detunings in site order.
    pub fn detunings(&self) -> Vec<f64> {
        (0..self.n_sites).map(|i| self.site_params_unchecked(i).0).collect()
    }

    /// Per-site decay rates in site order.
    pub fn decay_rates(&self) -> Vec<f64> {
        (0..self.n_sites).map(|i| self.site_params_unchecked(i).1).collect()
    }

    /// `sum_j delta_j / 2`, the energy scale used to normalize energies and populations.
    pub fn energy_scale(&self) -> f64 {
        self.detunings().iter().sum::<f64>() / 2.0
    }

    /// The non-engineered counterpart: both sublattices take the A parameters.
    pub fn uniform_reference(&self) -> Self {
        LatticeSpec { delta_b: self.delta_a, gamma_b: self.gamma_a, ..*self }
    }

    pub fn with_collective_decay(self, gamma_collective: f64) -> Self {
        LatticeSpec { gamma_collective, ..self }
    }

    pub fn is_uniform(&self) -> bool {
        self.delta_a == self.delta_b && self.gamma_a == self.gamma_b
    }
}

/// Which engine produced a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Engine {
    SingleExcitation,
    Cumulant,
    Oracle,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::SingleExcitation => "single-excitation",
            Engine::Cumulant => "cumulant",
            Engine::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "single-excitation" => Ok(Engine::SingleExcitation),
            "cumulant" => Ok(Engine::Cumulant),
            "oracle" => Ok(Engine::Oracle),
            other => Err(format!(
                "unknown engine `{other}` (expected single-excitation, cumulant or oracle)"
            )),
        }
    }
}

/// A named, per-time observable. Site indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observable {
    SigmaZ(usize),
    SigmaX(usize),
    /// Real part of `<sigma_n^+ sigma_m^->`.
    CorrRe(usize, usize),
    /// Imaginary part of `<sigma_n^+ sigma_m^->`.
    CorrIm(usize, usize),
    /// `<H_S> / (sum_j delta_j / 2)`.
    Energy,
    /// `sum_j (delta_j / 2) <sigma_j^z> / (sum_j delta_j / 2)`.
    Population,
    /// `sum_j (1 + <sigma_j^z>) / 2`.
    TotalExcitation,
}

impl Observable {
    /// Sites referenced by this observable.
    pub fn sites(&self) -> Vec<usize> {
        match *self {
            Observable::SigmaZ(j) | Observable::SigmaX(j) => vec![j],
            Observable::CorrRe(n, m) | Observable::CorrIm(n, m) => vec![n, m],
            _ => Vec::new(),
        }
    }

    pub fn check_sites(&self, spec: &LatticeSpec) -> Result<()> {
        self.sites().into_iter().try_for_each(|j| spec.check_site(j))
    }

    /// Parses a comma-separated request list. `sigma_z_*` and `sigma_x_*`
    /// expand to every site of a chain with `n_sites` sites.
    pub fn parse_list(list: &str, n_sites: usize) -> std::result::Result<Vec<Observable>, String> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "sigma_z_*" => out.extend((1..=n_sites).map(Observable::SigmaZ)),
                "sigma_x_*" => out.extend((1..=n_sites).map(Observable::SigmaX)),
                other => out.push(other.parse()?),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::SigmaZ(j) => write!(f, "sigma_z_{j}"),
            Observable::SigmaX(j) => write!(f, "sigma_x_{j}"),
            Observable::CorrRe(n, m) => write!(f, "corr_re_{n}_{m}"),
            Observable::CorrIm(n, m) => write!(f, "corr_im_{n}_{m}"),
            Observable::Energy => f.write_str("energy"),
            Observable::Population => f.write_str("population"),
            Observable::TotalExcitation => f.write_str("total_excitation"),
        }
    }
}

impl FromStr for Observable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("unknown observable `{s}`");
        let site = |v: &str| v.parse::<usize>().map_err(|_| bad());
        match s {
            "energy" => return Ok(Observable::Energy),
            "population" => return Ok(Observable::Population),
            "total_excitation" => return Ok(Observable::TotalExcitation),
            _ => {}
        }
        if let Some(j) = s.strip_prefix("sigma_z_") {
            return Ok(Observable::SigmaZ(site(j)?));
        }
        if let Some(j) = s.strip_prefix("sigma_x_") {
            return Ok(Observable::SigmaX(site(j)?));
        }
        for (prefix, re) in [("corr_re_", true), ("corr_im_", false)] {
            if let Some(rest) = s.strip_prefix(prefix) {
                let (n, m) = rest.split_once('_').ok_or_else(bad)?;
                let (n, m) = (site(n)?, site(m)?);
                return Ok(if re { Observable::CorrRe(n, m) } else { Observable::CorrIm(n, m) });
            }
        }
        Err(bad())
    }
}

/// Sampled observables on a strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
    spec: LatticeSpec,
    engine: Engine,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, spec: LatticeSpec, engine: Engine) -> Result<Self> {
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Trajectory(format!(
                "times must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Trajectory { times, columns: Vec::new(), spec, engine })
    }

    /// Appends a column; its length must match the time grid and its name must be new.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.times.len() {
            return Err(Error::Trajectory(format!(
                "column `{name}` has {} values for {} time points",
                values.len(),
                self.times.len()
            )));
        }
        if self.column(&name).is_some() {
            return Err(Error::Trajectory(format!("duplicate column `{name}`")));
        }
        self.columns.push((name, values));
        Ok(())
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push_column(name, values)?;
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.columns.iter().map(|(n, v)| (n.as_str(), v.as_slice()))
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
