use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{site_frequencies, DecayConvention};
use crate::error::Result;
use crate::lattice::LatticeSpec;

/// Below this magnitude of the square-root argument the two bands (and
/// their eigenvectors) coalesce.
pub const EXCEPTIONAL_POINT_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    /// `Omega_k^-`.
    Lower,
    /// `Omega_k^+`.
    Upper,
}

impl Band {
    pub fn sign(self) -> &'static str {
        match self {
            Band::Lower => "-",
            Band::Upper => "+",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sign())
    }
}

/// Band and momentum label of one eigenvalue, `k = 2 pi l / (N + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeLabel {
    pub l: usize,
    pub k: f64,
    pub band: Band,
}

/// The two-band spectrum. Index `n < N/2` holds `Omega^-` at `l = n + 1`,
/// index `n >= N/2` holds `Omega^+` at `l = n - N/2 + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub omega: Vec<Complex64>,
    pub labels: Vec<ModeLabel>,
    /// Set when some momentum sits within [`EXCEPTIONAL_POINT_THRESHOLD`]
    /// of an exceptional point.
    pub near_exceptional: bool,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `(Omega^-, Omega^+)` at momentum index `l` (1-based).
    pub fn pair(&self, l: usize) -> (Complex64, Complex64) {
        let half = self.omega.len() / 2;
        (self.omega[l - 1], self.omega[half + l - 1])
    }
}

pub fn momentum(l: usize, n_sites: usize) -> f64 {
    2.0 * PI * l as f64 / (n_sites as f64 + 1.0)
}

/// `(Omega^-, Omega^+, root argument)` for one momentum.
pub(crate) fn band_pair(wa: Complex64, wb: Complex64, coupling: f64, k: f64) -> (Complex64, Complex64, Complex64) {
    let c = (k / 2.0).cos();
    let diff = wa - wb;
    let arg = diff * diff + 16.0 * coupling * coupling * c * c;
    let root = arg.sqrt();
    let mean = (wa + wb) * 0.5;
    (mean - root * 0.5, mean + root * 0.5, arg)
}

pub(crate) fn spectrum_from_frequencies(n_sites: usize, wa: Complex64, wb: Complex64, coupling: f64) -> SpectralData {
    let half = n_sites / 2;
    let mut omega = vec![Complex64::default(); n_sites];
    let mut labels = Vec::with_capacity(n_sites);
    let mut near_exceptional = false;
    for l in 1..=half {
        let k = momentum(l, n_sites);
        let (lower, upper, arg) = band_pair(wa, wb, coupling, k);
        // A vanishing root with a vanishing 2x2 block is a plain degeneracy.
        let trivial = (wa - wb).norm() < EXCEPTIONAL_POINT_THRESHOLD
            && (coupling * (k / 2.0).cos()).abs() < EXCEPTIONAL_POINT_THRESHOLD;
        if arg.norm() < EXCEPTIONAL_POINT_THRESHOLD && !trivial {
            near_exceptional = true;
        }
        omega[l - 1] = lower;
        omega[half + l - 1] = upper;
    }
    for band in [Band::Lower, Band::Upper] {
        for l in 1..=half {
            labels.push(ModeLabel { l, k: momentum(l, n_sites), band });
        }
    }
    SpectralData { omega, labels, near_exceptional }
}

/// Closed-form two-band spectrum under the operator convention.
pub fn analytic_spectrum(spec: &LatticeSpec) -> Result<SpectralData> {
    analytic_spectrum_with(spec, DecayConvention::Operator)
}

pub fn analytic_spectrum_with(spec: &LatticeSpec, convention: DecayConvention) -> Result<SpectralData> {
    spec.validate()?;
    let (wa, wb) = site_frequencies(spec, convention);
    let data = spectrum_from_frequencies(spec.n_sites, wa, wb, spec.coupling);
    if data.near_exceptional {
        log::warn!("lattice {spec:?} is within {EXCEPTIONAL_POINT_THRESHOLD:e} of an exceptional point");
    }
    Ok(data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayBandRow {
    pub l: usize,
    pub k: f64,
    pub band: Band,
    pub omega: Complex64,
    pub abs_im: f64,
}

/// Per-mode decay rates `|Im Omega|` next to the uniform-lattice value at the same `gamma_a`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayBandReport {
    pub rows: Vec<DecayBandRow>,
    pub uniform_reference: f64,
    pub convention: DecayConvention,
}

impl DecayBandReport {
    pub fn max_abs_im(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_im).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn decay_band_report(spec: &LatticeSpec, convention: DecayConvention) -> Result<DecayBandReport> {
    let spectrum = analytic_spectrum_with(spec, convention)?;
    let rows = spectrum
        .omega
        .iter()
        .zip(&spectrum.labels)
        .map(|(&omega, label)| DecayBandRow {
            l: label.l,
            k: label.k,
            band: label.band,
            omega,
            abs_im: omega.im.abs(),
        })
        .collect();
    Ok(DecayBandReport {
        rows,
        uniform_reference: convention.factor() * spec.gamma_a,
        convention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper(ratio: f64) -> LatticeSpec {
        LatticeSpec::dimeric(50, ratio, 0.05, 0.05).unwrap()
    }

    #[test]
    fn uniform_bands_are_cosine_split() {
        let spec = LatticeSpec::dimeric(8, 1.0, 0.05, 0.05).unwrap();
        let s = analytic_spectrum(&spec).unwrap();
        let wa = Complex64::new(1.0, -0.025);
        for l in 1..=4 {
            let split = 2.0 * 0.05 * (momentum(l, 8) / 2.0).cos();
            let (lo, hi) = s.pair(l);
            assert!((lo - (wa - split)).norm() < 1e-15);
            assert!((hi - (wa + split)).norm() < 1e-15);
            assert!((lo.im - wa.im).abs() < 1e-15 && (hi.im - wa.im).abs() < 1e-15);
        }
    }

    #[test]
    fn decoupled_bands_are_flat() {
        let spec = LatticeSpec::dimeric(10, 0.25, 0.05, 0.0).unwrap();
        let s = analytic_spectrum(&spec).unwrap();
        for l in 1..=5 {
            let (lo, hi) = s.pair(l);
            assert!((lo - Complex64::new(0.25, -0.00625)).norm() < 1e-15);
            assert!((hi - Complex64::new(1.0, -0.025)).norm() < 1e-15);
        }
    }

    #[test]
    fn labels_follow_band_then_momentum() {
        let s = analytic_spectrum(&LatticeSpec::dimeric(6, 0.5, 0.05, 0.05).unwrap()).unwrap();
        let got: Vec<_> = s.labels.iter().map(|m| (m.band, m.l)).collect();
        assert_eq!(
            got,
            vec![
                (Band::Lower, 1),
                (Band::Lower, 2),
                (Band::Lower, 3),
                (Band::Upper, 1),
                (Band::Upper, 2),
                (Band::Upper, 3)
            ]
        );
    }

    #[test]
    fn dimeric_rates_below_uniform_reference() {
        for convention in [DecayConvention::Operator, DecayConvention::FullRate] {
            let report = decay_band_report(&paper(0.25), convention).unwrap();
            assert_eq!(report.rows.len(), 50);
            assert!(report.rows.iter().all(|r| r.abs_im < report.uniform_reference));
        }
    }

    #[test]
    fn uniform_report_is_flat() {
        let report = decay_band_report(&paper(1.0), DecayConvention::Operator).unwrap();
        assert!(report.rows.iter().all(|r| (r.abs_im - 0.025).abs() < 1e-15));
        assert_eq!(report.uniform_reference, 0.025);
    }

    #[test]
    fn band_rates_sum_to_site_rates() {
        // Im(Omega^+ + Omega^-) = Im(Omega_A + Omega_B) = -(gamma_A + gamma_B)/2.
        let spec = paper(0.25);
        let report = decay_band_report(&spec, DecayConvention::Operator).unwrap();
        let total = 0.5 * (spec.gamma_a + spec.gamma_b);
        for l in 0..25 {
            let (lo, hi) = (report.rows[l], report.rows[25 + l]);
            assert!(lo.omega.im < 0.0 && hi.omega.im < 0.0);
            assert!((lo.abs_im + hi.abs_im - total).abs() < 1e-15);
        }
    }

    #[test]
    fn exceptional_point_is_flagged() {
        // Equal gaps, unequal rates: (Omega_A - Omega_B)^2 = -(gamma_a - gamma_b)^2 / 4
        // cancels 16 lambda^2 cos^2(k/2) when lambda is tuned to the first momentum.
        let c = (momentum(1, 2) / 2.0).cos();
        let spec = LatticeSpec {
            n_sites: 2,
            delta_a: 1.0,
            delta_b: 1.0,
            gamma_a: 0.1,
            gamma_b: 0.0,
            coupling: 0.05 / (4.0 * c),
            gamma_collective: 0.0,
        };
        let s = analytic_spectrum(&spec).unwrap();
        assert!(s.near_exceptional);
        assert!(!analytic_spectrum(&paper(0.25)).unwrap().near_exceptional);
        let degenerate = LatticeSpec::dimeric(8, 1.0, 0.05, 0.0).unwrap();
        assert!(!analytic_spectrum(&degenerate).unwrap().near_exceptional);
    }

    proptest! {
        #[test]
        fn band_sum_rule(half in 1usize..40, ratio in 0.05f64..=1.0, g in 0.0f64..0.1, lam in 0.0f64..0.3) {
            let spec = LatticeSpec::dimeric(2 * half, ratio, g, lam).unwrap();
            let s = analytic_spectrum(&spec).unwrap();
            let (wa, wb) = site_frequencies(&spec, DecayConvention::Operator);
            for l in 1..=half {
                let (lo, hi) = s.pair(l);
                prop_assert!((lo + hi - (wa + wb)).norm() < 1e-10);
            }
        }

        #[test]
        fn trace_identity(half in 1usize..40, ratio in 0.05f64..=1.0, g in 0.0f64..0.1, lam in 0.0f64..0.3) {
            let spec = LatticeSpec::dimeric(2 * half, ratio, g, lam).unwrap();
            let s = analytic_spectrum(&spec).unwrap();
            let total: Complex64 = s.omega.iter().sum();
            let trace: Complex64 = (1..=spec.n_sites)
                .map(|j| {
                    let (d, g) = spec.site_params(j).unwrap();
                    Complex64::new(d, -g / 2.0)
                })
                .sum();
            prop_assert!((total - trace).norm() < 1e-9);
        }
    }
}
