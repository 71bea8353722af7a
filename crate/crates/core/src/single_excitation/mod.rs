//! Closed-form dynamics in the sector with at most one spin excitation.
//!
//! Within `span{|g>, |e_1>, ..., |e_N>}` the quantum jumps only refill
//! `|g><g|`, so every coherence and excited-state population follows the
//! non-Hermitian effective Hamiltonian `K = H_S - i sum_j (gamma_j / 2) n_j`.
//! `K` is complex symmetric and tridiagonal; its spectrum splits into two
//! bands `Omega_k^{+-}` on the momenta `k = 2 pi l / (N + 1)`, `l = 1..N/2`.

mod dynamics;
mod eigenbasis;
mod hamiltonian;
mod spectrum;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use dynamics::{trajectory_correlation, trajectory_sigma_x, trajectory_sigma_z, SingleExcitationDynamics};
pub use eigenbasis::{
    analytic_eigenbasis, analytic_eigenbasis_with, numerical_spectrum, BasisSource, BiorthogonalBasis,
    BIORTHONORMALITY_TOL, COMPLETENESS_TOL, CONDITION_LIMIT, RESIDUAL_TOL,
};
pub use hamiltonian::{site_frequencies, DecayConvention, EffectiveHamiltonian};
pub use spectrum::{
    analytic_spectrum, analytic_spectrum_with, decay_band_report, momentum, Band, DecayBandReport, DecayBandRow,
    ModeLabel, SpectralData, EXCEPTIONAL_POINT_THRESHOLD,
};

/// Normalization slack for [`PureState1X::new`].
pub const STATE_NORM_TOL: f64 = 1e-12;

/// `amp_g |g> + sum_j amp_e[j-1] |e_j>` with `|e_j> = sigma_j^+ |g>`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState1X {
    amp_g: Complex64,
    amp_e: Vec<Complex64>,
}

impl PureState1X {
    pub fn new(amp_g: Complex64, amp_e: Vec<Complex64>) -> Result<Self> {
        Self::with_tolerance(amp_g, amp_e, STATE_NORM_TOL)
    }

    /// Accepts amplitudes whose squared norm is within `tol` of one and
    /// rescales them to unit norm.
    pub fn with_tolerance(amp_g: Complex64, amp_e: Vec<Complex64>, tol: f64) -> Result<Self> {
        if amp_e.is_empty() {
            return Err(Error::InvalidState("no sites".into()));
        }
        let norm_sqr = amp_g.norm_sqr() + amp_e.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if !((norm_sqr - 1.0).abs() <= tol) {
            return Err(Error::InvalidState(format!("squared norm is {norm_sqr}, expected 1 within {tol:e}")));
        }
        let scale = norm_sqr.sqrt();
        Ok(PureState1X { amp_g: amp_g / scale, amp_e: amp_e.into_iter().map(|a| a / scale).collect() })
    }

    pub fn ground(n_sites: usize) -> Self {
        PureState1X { amp_g: Complex64::new(1.0, 0.0), amp_e: vec![Complex64::default(); n_sites] }
    }

    /// `|e_j>`.
    pub fn excited(n_sites: usize, j: usize) -> Result<Self> {
        if j == 0 || j > n_sites {
            return Err(Error::SiteOutOfRange { index: j, n_sites });
        }
        let mut amp_e = vec![Complex64::default(); n_sites];
        amp_e[j - 1] = Complex64::new(1.0, 0.0);
        Ok(PureState1X { amp_g: Complex64::default(), amp_e })
    }

    /// `|g>/sqrt(2) + (|e_j1> + |e_j2>)/2`.
    pub fn phi0(n_sites: usize, j1: usize, j2: usize) -> Result<Self> {
        for j in [j1, j2] {
            if j == 0 || j > n_sites {
                return Err(Error::SiteOutOfRange { index: j, n_sites });
            }
        }
        if j1 == j2 {
            return Err(Error::InvalidState("the two excited sites must differ".into()));
        }
        let mut amp_e = vec![Complex64::default(); n_sites];
        amp_e[j1 - 1] = Complex64::new(0.5, 0.0);
        amp_e[j2 - 1] = Complex64::new(0.5, 0.0);
        Ok(PureState1X { amp_g: Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), amp_e })
    }

    pub fn amp_g(&self) -> Complex64 {
        self.amp_g
    }

    pub fn amp_e(&self) -> &[Complex64] {
        &self.amp_e
    }

    pub fn n_sites(&self) -> usize {
        self.amp_e.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_normalization() {
        let s = PureState1X::phi0(50, 10, 12).unwrap();
        let norm: f64 = s.amp_g().norm_sqr() + s.amp_e().iter().map(|a| a.norm_sqr()).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-15);
        assert!(PureState1X::new(Complex64::new(1.0, 0.0), vec![Complex64::new(0.1, 0.0); 2]).is_err());
        assert!(PureState1X::phi0(4, 2, 5).is_err());
        assert!(PureState1X::phi0(4, 2, 2).is_err());
        let loose = PureState1X::with_tolerance(Complex64::new(0.7071, 0.0), vec![Complex64::new(0.7071, 0.0)], 1e-3)
            .unwrap();
        assert!((loose.amp_g().norm_sqr() + loose.amp_e()[0].norm_sqr() - 1.0).abs() < 1e-15);
    }
}
