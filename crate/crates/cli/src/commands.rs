//! The `spectrum`, `run` and `compare` subcommands as pure functions from
//! inputs to rendered output.

use std::fmt::Write as _;

use qbattery::analysis::{
    default_fit_window, power_law_fit, turnover_time, ExcessReport, ILL_CONDITIONED_ENERGY,
};
use qbattery::cumulant::{integrate, CumulantState};
use qbattery::oracle::{build_generator, propagate, DensityMatrix};
use qbattery::single_excitation::{decay_band_report, PureState1X, SingleExcitationDynamics};
use qbattery::{Engine, Trajectory};
use serde::Serialize;
use serde_json::json;

use crate::config::{render_lattice, AMPLITUDE_NORM_TOL, Format, InitialState, RunConfig, SpectrumConfig};
use crate::csv_io::{Column, Table};
use crate::error::{CliError, Result};

/// Relative excess below this magnitude everywhere in the fit window
/// leaves the exponent undefined.
pub const VANISHING_EXCESS: f64 = 1e-12;

/// Decay-band table: one row per eigenvalue.
pub fn spectrum(cfg: &SpectrumConfig, format: Format) -> Result<String> {
    cfg.validate()?;
    let report = decay_band_report(&cfg.lattice, cfg.convention)?;
    let delta_a = cfg.lattice.delta_a;
    let mut comments: Vec<String> = render_lattice(&cfg.lattice).lines().map(String::from).collect();
    comments.push(format!("single_excitation.convention = {}", cfg.convention.as_str()));
    comments.push(format!("omega: {}", cfg.convention.describe()));
    comments.push(format!("uniform_abs_im_over_delta_a: {:?}", report.uniform_reference / delta_a));
    match format {
        Format::Csv => {
            let mut s = String::new();
            for c in &comments {
                let _ = writeln!(s, "# {c}");
            }
            s.push_str("l,k,band,re_omega,im_omega,abs_im_over_delta_a\n");
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                    r.l,
                    r.k,
                    r.band,
                    r.omega.re,
                    r.omega.im,
                    r.abs_im / delta_a
                );
            }
            Ok(s)
        }
        Format::Json => {
            let rows: Vec<_> = report
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "l": r.l,
                        "k": r.k,
                        "band": r.band.sign(),
                        "re_omega": r.omega.re,
                        "im_omega": r.omega.im,
                        "abs_im_over_delta_a": r.abs_im / delta_a,
                    })
                })
                .collect();
            let doc = json!({
                "meta": {
                    "lattice": cfg.lattice,
                    "convention": cfg.convention.as_str(),
                    "omega": cfg.convention.describe(),
                    "uniform_abs_im_over_delta_a": report.uniform_reference / delta_a,
                },
                "rows": rows,
            });
            Ok(pretty(&doc))
        }
    }
}

/// Runs the configured engine and returns the requested columns in order.
pub fn execute(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let spec = &cfg.lattice;
    let n = spec.n_sites;
    match cfg.engine {
        Engine::SingleExcitation => {
            let state = cfg
                .initial_state
                .single_excitation(n)?
                .ok_or_else(|| CliError::Validation("single-excitation engine needs a one-excitation state".into()))?;
            let dynamics = SingleExcitationDynamics::with_convention(spec, &state, cfg.convention)?;
            Ok(dynamics.trajectory(&cfg.observables, &cfg.integrator.sample_times())?)
        }
        Engine::Cumulant => {
            let state0 = match cfg.initial_state {
                InitialState::FullyCharged => CumulantState::fully_charged(n),
                InitialState::Ground => CumulantState::ground(n),
                InitialState::Pure1X { .. } => {
                    return Err(CliError::Validation("the cumulant engine cannot start from pure-1x".into()))
                }
            };
            let run = integrate(spec, &state0, &cfg.integrator, &cfg.observables)?;
            select(&run.trajectory, cfg)
        }
        Engine::Oracle => {
            let generator = build_generator(spec)?;
            let rho0 = match &cfg.initial_state {
                InitialState::FullyCharged => DensityMatrix::fully_charged(n),
                InitialState::Ground => DensityMatrix::ground(n),
                InitialState::Pure1X { amp_g, amp_e } => {
                    let state = PureState1X::with_tolerance(*amp_g, amp_e.clone(), AMPLITUDE_NORM_TOL)?;
                    DensityMatrix::from_single_excitation(&state)?
                }
            };
            let run = propagate(&generator, &rho0, &cfg.integrator, &cfg.observables)?;
            log::info!("oracle run finished; largest invariant breach {:.3e}", run.max_breach);
            Ok(run.trajectory)
        }
    }
}

/// Keeps the requested columns of an engine trajectory, in request order.
fn select(traj: &Trajectory, cfg: &RunConfig) -> Result<Trajectory> {
    let mut out = Trajectory::new(traj.times().to_vec(), *traj.spec(), traj.engine())?;
    for obs in &cfg.observables {
        let name = obs.to_string();
        if out.column(&name).is_some() {
            continue;
        }
        let col = traj.column(&name).ok_or_else(|| CliError::Engine(format!("engine did not record `{name}`")))?;
        out.push_column(name, col.to_vec())?;
    }
    Ok(out)
}

/// Table of a trajectory with the config echoed in the header.
pub fn run_table(cfg: &RunConfig, traj: &Trajectory) -> Table {
    Table {
        comments: cfg.render().lines().map(String::from).collect(),
        t: traj.times().to_vec(),
        columns: traj.columns().map(|(name, v)| Column { name: name.to_string(), values: v.to_vec() }).collect(),
    }
}

pub fn run(cfg: &RunConfig, format: Format) -> Result<String> {
    let table = run_table(cfg, &execute(cfg)?);
    Ok(match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    })
}

/// One side of a comparison: a run file and its parsed config echo.
pub struct RunFile {
    pub label: String,
    pub config: RunConfig,
    pub table: Table,
}

impl RunFile {
    pub fn parse(label: impl Into<String>, text: &str) -> Result<Self> {
        let label = label.into();
        let table = Table::from_text(text)?;
        let config = RunConfig::parse(&table.comment_text())
            .map_err(|e| CliError::Parse(format!("{label}: header is not a run config echo: {e}")))?;
        Ok(RunFile { label, config, table })
    }

    fn energy(&self) -> Result<&[f64]> {
        self.table
            .column("energy")
            .ok_or_else(|| CliError::Comparison(format!("{}: no `energy` column", self.label)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Flag {
    /// `|E_u|` below the conditioning threshold on `[t0, t1]`.
    IllConditioned { t0: f64, t1: f64, threshold: f64 },
    /// The absolute excess peaks at the first or last sample.
    NoInteriorTurnover { t_max: f64 },
    /// The exponent could not be fitted.
    AlphaUndefined { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaReport {
    pub value: Option<f64>,
    pub window: (f64, f64),
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub report: ExcessReport,
    pub turnover_time: Option<f64>,
    pub alpha: AlphaReport,
    pub flags: Vec<Flag>,
}

/// Excess of run `d` over run `u`, turnover time and power-law exponent.
pub fn compare(d: &RunFile, u: &RunFile, window: Option<(f64, f64)>) -> Result<Comparison> {
    qbattery::analysis::check_grids(&d.table.t, &u.table.t)?;
    let report =
        ExcessReport::from_series(&d.table.t, d.energy()?, u.energy()?, d.config.lattice, u.config.lattice)?;
    let mut flags: Vec<Flag> = report
        .flagged_intervals()
        .into_iter()
        .map(|(t0, t1)| Flag::IllConditioned { t0, t1, threshold: ILL_CONDITIONED_ENERGY })
        .collect();

    let turnover = match turnover_time(&report) {
        Ok(t) => Some(t),
        Err(qbattery::Error::NoInteriorTurnover(t_max)) => {
            flags.push(Flag::NoInteriorTurnover { t_max });
            None
        }
        Err(e) => return Err(CliError::Engine(e.to_string())),
    };

    let window = match window.or_else(|| default_fit_window(&report.times)) {
        Some(w) => w,
        None => return Err(CliError::Comparison("empty time grid".into())),
    };
    let in_window: Vec<f64> = report
        .well_conditioned()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|(_, r)| r)
        .collect();
    let alpha = if in_window.iter().all(|r| r.abs() < VANISHING_EXCESS) {
        flags.push(Flag::AlphaUndefined { reason: "relative excess vanishes in the window".into() });
        AlphaReport { value: None, window, n_points: in_window.len() }
    } else {
        match power_law_fit(&report, window) {
            Ok(fit) => AlphaReport { value: Some(fit.alpha), window, n_points: fit.n_points },
            Err(e) => {
                flags.push(Flag::AlphaUndefined { reason: e.to_string() });
                AlphaReport { value: None, window, n_points: in_window.len() }
            }
        }
    };
    Ok(Comparison { report, turnover_time: turnover, alpha, flags })
}

impl Comparison {
    pub fn to_json(&self, d: &RunFile, u: &RunFile) -> String {
        let doc = json!({
            "meta": {
                "file_d": d.label,
                "file_u": u.label,
                "engine_d": d.config.engine.as_str(),
                "engine_u": u.config.engine.as_str(),
                "spec_d": self.report.spec_d,
                "spec_u": self.report.spec_u,
                "n_samples": self.report.times.len(),
                "ill_conditioned_threshold": ILL_CONDITIONED_ENERGY,
            },
            "series": {
                "t": self.report.times,
                "relative_excess": self.report.relative_excess,
                "absolute_excess": self.report.absolute_excess,
            },
            "turnover_time": self.turnover_time,
            "alpha": self.alpha,
            "flags": self.flags,
        });
        pretty(&doc)
    }

    pub fn to_csv(&self, d: &RunFile, u: &RunFile) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# file_d = {}", d.label);
        let _ = writeln!(s, "# file_u = {}", u.label);
        match self.turnover_time {
            Some(t) => {
                let _ = writeln!(s, "# turnover_time = {t:?}");
            }
            None => s.push_str("# turnover_time = null\n"),
        }
        let (t0, t1) = self.alpha.window;
        match self.alpha.value {
            Some(a) => {
                let _ = writeln!(s, "# alpha = {a:?} over [{t0:?}, {t1:?}]");
            }
            None => {
                let _ = writeln!(s, "# alpha = null over [{t0:?}, {t1:?}]");
            }
        }
        for f in &self.flags {
            let _ = writeln!(s, "# flag = {}", serde_json::to_string(f).expect("flags serialize"));
        }
        s.push_str("t,relative_excess,absolute_excess,ill_conditioned\n");
        let r = &self.report;
        for i in 0..r.times.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{}",
                r.times[i], r.relative_excess[i], r.absolute_excess[i], r.ill_conditioned[i] as u8
            );
        }
        s
    }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Parses `t0:t1`.
pub fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `t0:t1`, got `{s}`"))?;
    let t0: f64 = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let t1: f64 = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    if !(t1 > t0) {
        return Err(format!("window end {t1} must exceed start {t0}"));
    }
    Ok((t0, t1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_syntax() {
        assert_eq!(parse_window("66.5:100").unwrap(), (66.5, 100.0));
        assert!(parse_window("5:1").is_err());
        assert!(parse_window("5").is_err());
        assert!(parse_window("a:1").is_err());
    }
}
