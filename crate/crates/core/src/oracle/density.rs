use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Observable};
use crate::single_excitation::PureState1X;

/// Hermiticity slack of a valid density matrix.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace slack of a valid density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a valid density matrix.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Bit mask of the 1-based site `j` in a chain of `n_sites`. Site 1 is the
/// most significant bit; a cleared bit is spin up, a set bit spin down.
#[inline]
pub fn site_mask(n_sites: usize, j: usize) -> usize {
    1 << (n_sites - j)
}

/// Dense `2^N x 2^N` density matrix, row-major.
///
/// Basis index `a` encodes one spin per bit with site 1 most significant;
/// bit value 0 is `|up>` (`sigma^z = +1`) and 1 is `|down>`. The fully
/// charged state is index 0 and the ground state index `2^N - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_sites: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        DensityMatrix { n_sites, dim, data: vec![Complex64::default(); dim * dim] }
    }

    /// `|a><a|` for a basis index.
    pub fn basis_state(n_sites: usize, a: usize) -> Self {
        let mut rho = Self::zeros(n_sites);
        let d = rho.dim;
        rho.data[a * d + a] = Complex64::new(1.0, 0.0);
        rho
    }

    pub fn fully_charged(n_sites: usize) -> Self {
        Self::basis_state(n_sites, 0)
    }

    pub fn ground(n_sites: usize) -> Self {
        Self::basis_state(n_sites, (1 << n_sites) - 1)
    }

    /// `|psi><psi|` for a state vector in the bit basis.
    pub fn from_pure(n_sites: usize, psi: &[Complex64]) -> Result<Self> {
        let dim = 1usize << n_sites;
        if psi.len() != dim {
            return Err(Error::InvalidState(format!("state vector has length {}, expected {dim}", psi.len())));
        }
        let mut rho = Self::zeros(n_sites);
        for a in 0..dim {
            for b in 0..dim {
                rho.data[a * dim + b] = psi[a] * psi[b].conj();
            }
        }
        Ok(rho)
    }

    /// Embeds a one-excitation pure state: `|g>` is all spins down and
    /// `|e_j>` flips site `j` up.
    pub fn from_single_excitation(state: &PureState1X) -> Result<Self> {
        let n = state.n_sites();
        let ground = (1usize << n) - 1;
        let mut psi = vec![Complex64::default(); 1 << n];
        psi[ground] = state.amp_g();
        for (j, &a) in state.amp_e().iter().enumerate() {
            psi[ground ^ site_mask(n, j + 1)] = a;
        }
        Self::from_pure(n, &psi)
    }

    /// Wraps raw row-major entries.
    pub fn from_raw(n_sites: usize, data: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << n_sites;
        if data.len() != dim * dim {
            return Err(Error::InvalidState(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Ok(DensityMatrix { n_sites, dim, data })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.data[a * self.dim + b]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|a| self.get(a, a)).sum()
    }

    /// `max |rho_ab - conj(rho_ba)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim;
        let m = Mat::<Complex64>::from_fn(d, d, |a, b| 0.5 * (self.get(a, b) + self.get(b, a).conj()));
        let values = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok(values.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Largest breach of the trace, Hermiticity and (optionally) positivity
    /// conditions, measured against zero.
    pub fn invariant_breach(&self, check_positivity: bool) -> Result<f64> {
        let tr = self.trace();
        let mut worst = ((tr.re - 1.0).abs()).max(tr.im.abs()).max(self.hermiticity_error());
        if check_positivity {
            worst = worst.max(-self.min_eigenvalue()?);
        }
        if worst.is_nan() {
            return Ok(f64::INFINITY);
        }
        Ok(worst)
    }

    /// Checks the invariants at their stated tolerances.
    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let herm = self.hermiticity_error();
        if !(herm <= HERMITICITY_TOL) {
            return Err(Error::InvalidState(format!("Hermiticity error {herm:.3e}")));
        }
        let min = self.min_eigenvalue()?;
        if !(min >= -POSITIVITY_TOL) {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// `<sigma_j^z>`.
    pub fn sigma_z(&self, j: usize) -> f64 {
        let m = site_mask(self.n_sites, j);
        (0..self.dim).map(|a| if a & m == 0 { self.get(a, a).re } else { -self.get(a, a).re }).sum()
    }

    /// `<sigma_j^->`.
    pub fn sigma_minus(&self, j: usize) -> Complex64 {
        let m = site_mask(self.n_sites, j);
        (0..self.dim).filter(|a| a & m != 0).map(|a| self.get(a ^ m, a)).sum()
    }

    /// `<sigma_j^x> = 2 Re <sigma_j^->`.
    pub fn sigma_x(&self, j: usize) -> f64 {
        2.0 * self.sigma_minus(j).re
    }

    /// `<sigma_n^+ sigma_m^->`.
    pub fn corr(&self, n: usize, m: usize) -> Complex64 {
        let (mn, mm) = (site_mask(self.n_sites, n), site_mask(self.n_sites, m));
        if n == m {
            return Complex64::new(0.5 * (1.0 + self.sigma_z(n)), 0.0);
        }
        // Row a of sigma_n^+ sigma_m^- is nonzero when n is up and m is down.
        (0..self.dim).filter(|a| a & mn == 0 && a & mm != 0).map(|a| self.get(a ^ mn ^ mm, a)).sum()
    }

    pub fn total_excitation(&self) -> f64 {
        (1..=self.n_sites).map(|j| 0.5 * (1.0 + self.sigma_z(j))).sum()
    }

    /// `<H_S> / sum_j (delta_j / 2)`.
    pub fn energy(&self, spec: &LatticeSpec) -> f64 {
        let hop: f64 = (1..self.n_sites).map(|j| 2.0 * spec.coupling * self.corr(j, j + 1).re).sum();
        (self.onsite(spec) + hop) / spec.energy_scale()
    }

    /// `sum_j (delta_j / 2) <sigma_j^z> / sum_j (delta_j / 2)`.
    pub fn population(&self, spec: &LatticeSpec) -> f64 {
        self.onsite(spec) / spec.energy_scale()
    }

    fn onsite(&self, spec: &LatticeSpec) -> f64 {
        spec.detunings().iter().enumerate().map(|(i, d)| 0.5 * d * self.sigma_z(i + 1)).sum()
    }

    /// Value of one named observable.
    pub fn observable(&self, spec: &LatticeSpec, obs: &Observable) -> f64 {
        match *obs {
            Observable::SigmaZ(j) => self.sigma_z(j),
            Observable::SigmaX(j) => self.sigma_x(j),
            Observable::CorrRe(n, m) => self.corr(n, m).re,
            Observable::CorrIm(n, m) => self.corr(n, m).im,
            Observable::Energy => self.energy(spec),
            Observable::Population => self.population(spec),
            Observable::TotalExcitation => self.total_excitation(),
        }
    }
}

/// Every per-site population and coherence, every pair correlation with
/// `n < m`, the normalized energy and the normalized population.
pub fn observables(rho: &DensityMatrix, spec: &LatticeSpec) -> Vec<(String, f64)> {
    let n = rho.n_sites();
    let mut list: Vec<Observable> = (1..=n).map(Observable::SigmaZ).collect();
    list.extend((1..=n).map(Observable::SigmaX));
    for a in 1..=n {
        for b in a + 1..=n {
            list.push(Observable::CorrRe(a, b));
            list.push(Observable::CorrIm(a, b));
        }
    }
    list.push(Observable::Energy);
    list.push(Observable::Population);
    list.iter().map(|o| (o.to_string(), rho.observable(spec, o))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(list: &[(String, f64)], name: &str) -> f64 {
        list.iter().find(|(k, _)| k == name).unwrap().1
    }

    #[test]
    fn product_states() {
        let spec = LatticeSpec::dimeric(4, 0.25, 0.05, 0.05).unwrap();
        let full = observables(&DensityMatrix::fully_charged(4), &spec);
        assert_eq!(value(&full, "energy"), 1.0);
        assert_eq!(value(&full, "population"), 1.0);
        let ground = observables(&DensityMatrix::ground(4), &spec);
        assert_eq!(value(&ground, "energy"), -1.0);
        assert_eq!(value(&ground, "population"), -1.0);
        assert_eq!(DensityMatrix::fully_charged(4).total_excitation(), 4.0);
    }

    #[test]
    fn single_excitation_embedding() {
        let state = PureState1X::phi0(6, 2, 4).unwrap();
        let rho = DensityMatrix::from_single_excitation(&state).unwrap();
        rho.validate().unwrap();
        // Site 1 carries no amplitude, sites 2 and 4 carry weight 1/4.
        assert!((rho.sigma_z(1) + 1.0).abs() < 1e-15);
        assert!((rho.sigma_z(2) + 0.5).abs() < 1e-15);
        assert!((rho.sigma_x(2) - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((rho.corr(2, 4) - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!(rho.corr(1, 2).norm() < 1e-15);
    }

    #[test]
    fn correlation_orientation() {
        // |psi> = (|e_1> + i |e_2>) / sqrt 2 in a two-site chain.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let state = PureState1X::new(Complex64::default(), vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)]).unwrap();
        let rho = DensityMatrix::from_single_excitation(&state).unwrap();
        // <sigma_1^+ sigma_2^-> = a_2 conj(a_1).
        assert!((rho.corr(1, 2) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert!((rho.corr(2, 1) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let mut rho = DensityMatrix::fully_charged(2);
        rho.data[1] = Complex64::new(0.1, 0.0);
        assert!(rho.validate().is_err());
        let mut rho = DensityMatrix::zeros(1);
        rho.data[0] = Complex64::new(1.5, 0.0);
        rho.data[3] = Complex64::new(-0.5, 0.0);
        assert!(rho.trace() == Complex64::new(1.0, 0.0));
        assert!(rho.validate().is_err());
    }
}
