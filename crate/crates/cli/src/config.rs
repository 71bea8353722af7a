//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! ```text
//! engine = cumulant
//! lattice.n_sites = 80
//! lattice.delta_a = 1.0
//! lattice.delta_b = 0.25
//! lattice.gamma_a = 0.05
//! lattice.gamma_b = 0.0125
//! lattice.coupling = 0.05
//! integrator.dt = 0.01
//! integrator.t_end = 100.0
//! integrator.sample_every = 10
//! observables = sigma_z_*, energy, population
//! initial_state = fully-charged
//! ```
//!
//! `#` starts a comment. A `pure-1x` initial state takes its amplitudes from
//! `initial_state.amp_g = <re> <im>` and `initial_state.amp_e.<site> = <re> <im>`;
//! sites without an entry have zero amplitude.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use qbattery::integrator::IntegratorConfig;
use qbattery::oracle::DEFAULT_ORACLE_CAP;
use qbattery::single_excitation::{DecayConvention, PureState1X};
use qbattery::{Engine, LatticeSpec, Observable};

use crate::error::{CliError, Result};

/// Tolerance on `|amp_g|^2 + sum |amp_e|^2 = 1` for a `pure-1x` state.
pub const AMPLITUDE_NORM_TOL: f64 = 1e-9;

/// Observables recorded when the config has no `observables` key.
pub const DEFAULT_OBSERVABLES: &str = "sigma_z_*, energy, population";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    FullyCharged,
    Ground,
    /// Ground amplitude and one amplitude per site.
    Pure1X { amp_g: Complex64, amp_e: Vec<Complex64> },
}

impl InitialState {
    pub fn name(&self) -> &'static str {
        match self {
            InitialState::FullyCharged => "fully-charged",
            InitialState::Ground => "ground",
            InitialState::Pure1X { .. } => "pure-1x",
        }
    }

    /// One-excitation form of the state, if it has one.
    pub fn single_excitation(&self, n_sites: usize) -> Result<Option<PureState1X>> {
        match self {
            InitialState::FullyCharged => Ok(None),
            InitialState::Ground => Ok(Some(PureState1X::ground(n_sites))),
            InitialState::Pure1X { amp_g, amp_e } => {
                Ok(Some(PureState1X::with_tolerance(*amp_g, amp_e.clone(), AMPLITUDE_NORM_TOL)?))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Everything one run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub engine: Engine,
    pub lattice: LatticeSpec,
    pub integrator: IntegratorConfig,
    pub observables: Vec<Observable>,
    pub initial_state: InitialState,
    pub convention: DecayConvention,
    pub output: OutputConfig,
}

/// The lattice block plus the decay convention, all that `spectrum` reads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumConfig {
    pub lattice: LatticeSpec,
    pub convention: DecayConvention,
}

const LATTICE_KEYS: [&str; 7] = [
    "lattice.n_sites",
    "lattice.delta_a",
    "lattice.delta_b",
    "lattice.gamma_a",
    "lattice.gamma_b",
    "lattice.coupling",
    "lattice.gamma_collective",
];

const OTHER_KEYS: [&str; 9] = [
    "engine",
    "integrator.dt",
    "integrator.t_end",
    "integrator.sample_every",
    "observables",
    "initial_state",
    "initial_state.amp_g",
    "single_excitation.convention",
    "output.path",
];

/// Key/value pairs of one config document with their line numbers.
struct Document {
    entries: BTreeMap<String, (usize, String)>,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("line {line_no}: expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Parse(format!("line {line_no}: empty key")));
            }
            if !is_known_key(key) {
                return Err(CliError::Parse(format!("line {line_no}: unknown key `{key}`")));
            }
            if entries.insert(key.to_string(), (line_no, value.trim().to_string())).is_some() {
                return Err(CliError::Parse(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Document { entries })
    }

    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn required(&self, key: &str) -> Result<(usize, &str)> {
        self.get(key).ok_or_else(|| CliError::Parse(format!("missing required key `{key}`")))
    }

    fn parse_value<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match (self.get(key), default) {
            (Some((line, v)), _) => {
                v.parse().map_err(|e| CliError::Parse(format!("line {line}: `{key}`: cannot parse `{v}`: {e}")))
            }
            (None, Some(d)) => Ok(d),
            (None, None) => Err(CliError::Parse(format!("missing required key `{key}`"))),
        }
    }

    fn lattice(&self) -> Result<LatticeSpec> {
        Ok(LatticeSpec {
            n_sites: self.parse_value("lattice.n_sites", None)?,
            delta_a: self.parse_value("lattice.delta_a", None)?,
            delta_b: self.parse_value("lattice.delta_b", None)?,
            gamma_a: self.parse_value("lattice.gamma_a", None)?,
            gamma_b: self.parse_value("lattice.gamma_b", None)?,
            coupling: self.parse_value("lattice.coupling", None)?,
            gamma_collective: self.parse_value("lattice.gamma_collective", Some(0.0))?,
        })
    }

    fn convention(&self) -> Result<DecayConvention> {
        self.parse_value("single_excitation.convention", Some(DecayConvention::Operator))
    }

    fn amplitudes(&self, n_sites: usize) -> Result<(Complex64, Vec<Complex64>)> {
        let (line, v) = self.required("initial_state.amp_g")?;
        let amp_g = parse_complex(v).map_err(|e| CliError::Parse(format!("line {line}: {e}")))?;
        let mut amp_e = vec![Complex64::default(); n_sites];
        for (key, (line, v)) in &self.entries {
            let Some(site) = key.strip_prefix("initial_state.amp_e.") else { continue };
            let j: usize = site
                .parse()
                .map_err(|_| CliError::Parse(format!("line {line}: bad site index in `{key}`")))?;
            if j == 0 || j > n_sites {
                return Err(CliError::Validation(format!("line {line}: site {j} out of range 1..={n_sites}")));
            }
            amp_e[j - 1] = parse_complex(v).map_err(|e| CliError::Parse(format!("line {line}: {e}")))?;
        }
        Ok((amp_g, amp_e))
    }

    fn has_amplitudes(&self) -> bool {
        self.entries.keys().any(|k| k.starts_with("initial_state.amp_"))
    }
}

fn is_known_key(key: &str) -> bool {
    LATTICE_KEYS.contains(&key)
        || OTHER_KEYS.contains(&key)
        || key == "output.format"
        || key.strip_prefix("initial_state.amp_e.").is_some_and(|s| !s.is_empty())
}

/// Parses `"<re> <im>"`.
pub fn parse_complex(v: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    let [re, im] = parts.as_slice() else {
        return Err(format!("expected `<re> <im>`, got `{v}`"));
    };
    let f = |s: &str| s.parse::<f64>().map_err(|e| format!("cannot parse `{s}`: {e}"));
    Ok(Complex64::new(f(re)?, f(im)?))
}

impl SpectrumConfig {
    /// Parses a document that may also hold run keys; only the lattice block
    /// and the convention are read.
    pub fn parse(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        Ok(SpectrumConfig { lattice: doc.lattice()?, convention: doc.convention()? })
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if self.lattice.gamma_collective != 0.0 {
            return Err(qbattery::Error::CollectiveDecayUnsupported(self.lattice.gamma_collective).into());
        }
        Ok(())
    }

    pub fn load(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Syntax and type checks only; see [`RunConfig::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let engine: Engine = doc.parse_value("engine", None)?;
        let lattice = doc.lattice()?;
        let defaults = IntegratorConfig::default();
        let integrator = IntegratorConfig {
            dt: doc.parse_value("integrator.dt", Some(defaults.dt))?,
            t_end: doc.parse_value("integrator.t_end", Some(defaults.t_end))?,
            sample_every: doc.parse_value("integrator.sample_every", Some(defaults.sample_every))?,
        };
        let list = doc.get("observables").map_or(DEFAULT_OBSERVABLES, |(_, v)| v);
        let observables =
            Observable::parse_list(list, lattice.n_sites).map_err(|e| CliError::Parse(format!("`observables`: {e}")))?;
        let (line, state) = doc.required("initial_state")?;
        let initial_state = match state {
            "fully-charged" => InitialState::FullyCharged,
            "ground" => InitialState::Ground,
            "pure-1x" => {
                let (amp_g, amp_e) = doc.amplitudes(lattice.n_sites)?;
                InitialState::Pure1X { amp_g, amp_e }
            }
            other => {
                return Err(CliError::Parse(format!(
                    "line {line}: unknown initial state `{other}` (expected fully-charged, ground or pure-1x)"
                )))
            }
        };
        if !matches!(initial_state, InitialState::Pure1X { .. }) && doc.has_amplitudes() {
            return Err(CliError::Parse(format!("amplitudes given for a `{state}` initial state")));
        }
        let output = OutputConfig {
            path: doc.get("output.path").map(|(_, v)| PathBuf::from(v)),
            format: doc.parse_value("output.format", Some(Format::Csv))?,
        };
        Ok(RunConfig {
            engine,
            lattice,
            integrator,
            observables,
            initial_state,
            convention: doc.convention()?,
            output,
        })
    }

    /// Lattice, integrator and observable checks plus engine/state compatibility.
    pub fn validate(&self) -> Result<()> {
        match self.engine {
            Engine::Oracle => {
                self.lattice.validate_any_length()?;
                if self.lattice.n_sites > DEFAULT_ORACLE_CAP {
                    return Err(qbattery::Error::OracleCap { n_sites: self.lattice.n_sites, cap: DEFAULT_ORACLE_CAP }
                        .into());
                }
            }
            Engine::SingleExcitation | Engine::Cumulant => {
                self.lattice.validate()?;
                if self.lattice.gamma_collective != 0.0 {
                    return Err(qbattery::Error::CollectiveDecayUnsupported(self.lattice.gamma_collective).into());
                }
            }
        }
        self.integrator.validate()?;
        if self.observables.is_empty() {
            return Err(CliError::Validation("no observables requested".into()));
        }
        for obs in &self.observables {
            obs.check_sites(&self.lattice)?;
        }
        match (self.engine, &self.initial_state) {
            (Engine::SingleExcitation, InitialState::FullyCharged) => {
                return Err(CliError::Validation(
                    "the single-excitation engine cannot start fully charged; use pure-1x or ground".into(),
                ))
            }
            (Engine::Cumulant, InitialState::Pure1X { .. }) => {
                return Err(CliError::Validation(
                    "the cumulant engine starts from product states only; use fully-charged or ground".into(),
                ))
            }
            (Engine::Cumulant, _) => {
                if let Some(obs) = self.observables.iter().find(|o| matches!(o, Observable::SigmaX(_))) {
                    return Err(qbattery::Error::UnsupportedObservable {
                        name: obs.to_string(),
                        engine: Engine::Cumulant.to_string(),
                    }
                    .into());
                }
            }
            _ => {}
        }
        if let InitialState::Pure1X { amp_e, .. } = &self.initial_state {
            if amp_e.len() != self.lattice.n_sites {
                return Err(CliError::Validation(format!(
                    "{} site amplitudes for {} sites",
                    amp_e.len(),
                    self.lattice.n_sites
                )));
            }
            self.initial_state.single_excitation(self.lattice.n_sites)?;
        }
        Ok(())
    }

    /// Parse then validate.
    pub fn load(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders a document that parses back to `self`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let l = &self.lattice;
        let i = &self.integrator;
        let names: Vec<String> = self.observables.iter().map(Observable::to_string).collect();
        let _ = writeln!(s, "engine = {}", self.engine);
        s.push_str(&render_lattice(l));
        let _ = writeln!(s, "integrator.dt = {:?}", i.dt);
        let _ = writeln!(s, "integrator.t_end = {:?}", i.t_end);
        let _ = writeln!(s, "integrator.sample_every = {}", i.sample_every);
        let _ = writeln!(s, "observables = {}", names.join(", "));
        let _ = writeln!(s, "initial_state = {}", self.initial_state.name());
        if let InitialState::Pure1X { amp_g, amp_e } = &self.initial_state {
            let _ = writeln!(s, "initial_state.amp_g = {}", render_complex(*amp_g));
            for (j, a) in amp_e.iter().enumerate() {
                if *a != Complex64::default() {
                    let _ = writeln!(s, "initial_state.amp_e.{} = {}", j + 1, render_complex(*a));
                }
            }
        }
        let _ = writeln!(s, "single_excitation.convention = {}", self.convention.as_str());
        if let Some(path) = &self.output.path {
            let _ = writeln!(s, "output.path = {}", path.display());
        }
        let _ = writeln!(s, "output.format = {}", self.output.format.as_str());
        s
    }
}

pub fn render_lattice(l: &LatticeSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lattice.n_sites = {}", l.n_sites);
    let _ = writeln!(s, "lattice.delta_a = {:?}", l.delta_a);
    let _ = writeln!(s, "lattice.delta_b = {:?}", l.delta_b);
    let _ = writeln!(s, "lattice.gamma_a = {:?}", l.gamma_a);
    let _ = writeln!(s, "lattice.gamma_b = {:?}", l.gamma_b);
    let _ = writeln!(s, "lattice.coupling = {:?}", l.coupling);
    let _ = writeln!(s, "lattice.gamma_collective = {:?}", l.gamma_collective);
    s
}

fn render_complex(z: Complex64) -> String {
    format!("{:?} {:?}", z.re, z.im)
}
