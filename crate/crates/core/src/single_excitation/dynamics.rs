use num_complex::Complex64;

use super::eigenbasis::{analytic_eigenbasis_with, BiorthogonalBasis};
use super::hamiltonian::DecayConvention;
use super::spectrum::SpectralData;
use super::PureState1X;
use crate::error::{Error, Result};
use crate::lattice::{Engine, LatticeSpec, Observable, Trajectory};

/// Largest imaginary residue tolerated in a population before it is discarded.
const REALITY_TOL: f64 = 1e-10;

/// Closed-form one-excitation dynamics for a pure initial state.
///
/// Populations, coherences and pair correlations are evaluated as finite
/// sums over the eigenmodes of `K`; no time stepping is involved.
#[derive(Clone, Debug)]
pub struct SingleExcitationDynamics {
    spec: LatticeSpec,
    spectrum: SpectralData,
    basis: BiorthogonalBasis,
    state: PureState1X,
    /// `<K_n*|Phi_e>`, the projection of the excited amplitudes on each mode.
    overlaps: Vec<Complex64>,
}

impl SingleExcitationDynamics {
    pub fn new(spec: &LatticeSpec, state: &PureState1X) -> Result<Self> {
        Self::with_convention(spec, state, DecayConvention::Operator)
    }

    /// Uses site frequencies under `convention`. Only the operator convention
    /// reproduces the master equation; the other exists for sensitivity checks.
    pub fn with_convention(spec: &LatticeSpec, state: &PureState1X, convention: DecayConvention) -> Result<Self> {
        let (spectrum, basis) = analytic_eigenbasis_with(spec, convention)?;
        Self::from_parts(spec, spectrum, basis, state)
    }

    pub fn from_parts(
        spec: &LatticeSpec,
        spectrum: SpectralData,
        basis: BiorthogonalBasis,
        state: &PureState1X,
    ) -> Result<Self> {
        if state.n_sites() != spec.n_sites {
            return Err(Error::InvalidState(format!(
                "state has {} sites but the lattice has {}",
                state.n_sites(),
                spec.n_sites
            )));
        }
        let overlaps = (0..basis.dim())
            .map(|n| basis.left(n).iter().zip(state.amp_e()).map(|(l, a)| l * a).sum())
            .collect();
        Ok(SingleExcitationDynamics { spec: *spec, spectrum, basis, state: state.clone(), overlaps })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn spectrum(&self) -> &SpectralData {
        &self.spectrum
    }

    pub fn basis(&self) -> &BiorthogonalBasis {
        &self.basis
    }

    /// `exp(-i Omega_n t)` for every mode.
    fn phases(&self, t: f64) -> Vec<Complex64> {
        self.spectrum.omega.iter().map(|w| (Complex64::new(0.0, -t) * w).exp()).collect()
    }

    /// `sum_{n,m} C_nm exp(-i (Omega_n - Omega_m^*) t)` for a coefficient matrix in row-major order.
    fn double_sum(coeffs: &[Complex64], phases: &[Complex64]) -> Complex64 {
        let n = phases.len();
        let mut acc = Complex64::default();
        for (a, pa) in phases.iter().enumerate() {
            let row = &coeffs[a * n..(a + 1) * n];
            let inner: Complex64 = row.iter().zip(phases).map(|(c, pb)| c * pb.conj()).sum();
            acc += pa * inner;
        }
        acc
    }

    /// `F_n(j) = <K_n*|rho(0)|g><e_j|K_n>`.
    fn coherence_coefficients(&self, j: usize) -> Vec<Complex64> {
        let g = self.state.amp_g().conj();
        (0..self.basis.dim()).map(|n| self.overlaps[n] * g * self.basis.right(n)[j - 1]).collect()
    }

    /// `W_nm(j, j') = <K_n*|rho(0)|K_m*><K_m|e_j><e_j'|K_n>`; `G_nm(j) = W_nm(j, j)`.
    fn pair_coefficients(&self, j: usize, jp: usize) -> Vec<Complex64> {
        let n = self.basis.dim();
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            let row = self.overlaps[a] * self.basis.right(a)[jp - 1];
            for b in 0..n {
                out.push(row * (self.overlaps[b] * self.basis.right(b)[j - 1]).conj());
            }
        }
        out
    }

    /// `<sigma_j^x(t)> = 2 Re sum_n F_n(j) exp(-i Omega_n t)`.
    pub fn sigma_x(&self, j: usize, times: &[f64]) -> Result<Vec<f64>> {
        self.spec.check_site(j)?;
        let f = self.coherence_coefficients(j);
        Ok(times
            .iter()
            .map(|&t| {
                let s: Complex64 = self.phases(t).iter().zip(&f).map(|(p, c)| p * c).sum();
                2.0 * s.re
            })
            .collect())
    }

    /// `<sigma_j^z(t)> = 2 sum_{n,m} G_nm(j) exp(-i (Omega_n - Omega_m^*) t) - 1`.
    pub fn sigma_z(&self, j: usize, times: &[f64]) -> Result<Vec<f64>> {
        self.spec.check_site(j)?;
        let g = self.pair_coefficients(j, j);
        times
            .iter()
            .map(|&t| {
                let p = Self::double_sum(&g, &self.phases(t));
                if p.im.abs() > REALITY_TOL {
                    return Err(Error::Eigen(format!(
                        "population at site {j}, t = {t} has imaginary part {:.3e}",
                        p.im
                    )));
                }
                Ok(2.0 * p.re - 1.0)
            })
            .collect()
    }

    /// `<sigma_j^+ sigma_j'^-(t)> = sum_{n,m} W_nm(j, j') exp(-i (Omega_n - Omega_m^*) t)`.
    pub fn correlation(&self, j: usize, jp: usize, times: &[f64]) -> Result<Vec<Complex64>> {
        self.spec.check_site(j)?;
        self.spec.check_site(jp)?;
        let w = self.pair_coefficients(j, jp);
        Ok(times.iter().map(|&t| Self::double_sum(&w, &self.phases(t))).collect())
    }

    /// Evaluates a list of observables on a time grid.
    pub fn trajectory(&self, observables: &[Observable], times: &[f64]) -> Result<Trajectory> {
        let mut traj = Trajectory::new(times.to_vec(), self.spec, Engine::SingleExcitation)?;
        let n = self.spec.n_sites;
        let mut sz_all: Option<Vec<Vec<f64>>> = None;
        let all_sz = |cache: &mut Option<Vec<Vec<f64>>>| -> Result<Vec<Vec<f64>>> {
            if cache.is_none() {
                *cache = Some((1..=n).map(|j| self.sigma_z(j, times)).collect::<Result<_>>()?);
            }
            Ok(cache.clone().unwrap())
        };
        for obs in observables {
            obs.check_sites(&self.spec)?;
            let values = match *obs {
                Observable::SigmaZ(j) => self.sigma_z(j, times)?,
                Observable::SigmaX(j) => self.sigma_x(j, times)?,
                Observable::CorrRe(a, b) => self.correlation(a, b, times)?.iter().map(|c| c.re).collect(),
                Observable::CorrIm(a, b) => self.correlation(a, b, times)?.iter().map(|c| c.im).collect(),
                Observable::TotalExcitation => {
                    let sz = all_sz(&mut sz_all)?;
                    (0..times.len()).map(|i| sz.iter().map(|s| 0.5 * (1.0 + s[i])).sum()).collect()
                }
                Observable::Population => {
                    let sz = all_sz(&mut sz_all)?;
                    let d = self.spec.detunings();
                    let scale = self.spec.energy_scale();
                    (0..times.len())
                        .map(|i| sz.iter().zip(&d).map(|(s, dj)| 0.5 * dj * s[i]).sum::<f64>() / scale)
                        .collect()
                }
                Observable::Energy => {
                    let sz = all_sz(&mut sz_all)?;
                    let d = self.spec.detunings();
                    let scale = self.spec.energy_scale();
                    let bonds: Vec<Vec<Complex64>> =
                        (1..n).map(|j| self.correlation(j, j + 1, times)).collect::<Result<_>>()?;
                    (0..times.len())
                        .map(|i| {
                            let onsite: f64 = sz.iter().zip(&d).map(|(s, dj)| 0.5 * dj * s[i]).sum();
                            let hop: f64 = bonds.iter().map(|c| 2.0 * self.spec.coupling * c[i].re).sum();
                            (onsite + hop) / scale
                        })
                        .collect()
                }
            };
            traj.push_column(obs.to_string(), values)?;
        }
        Ok(traj)
    }
}

pub fn trajectory_sigma_x(spec: &LatticeSpec, state: &PureState1X, j: usize, times: &[f64]) -> Result<Trajectory> {
    SingleExcitationDynamics::new(spec, state)?.trajectory(&[Observable::SigmaX(j)], times)
}

pub fn trajectory_sigma_z(spec: &LatticeSpec, state: &PureState1X, j: usize, times: &[f64]) -> Result<Trajectory> {
    SingleExcitationDynamics::new(spec, state)?.trajectory(&[Observable::SigmaZ(j)], times)
}

/// Two columns, `corr_re_j_j'` and `corr_im_j_j'`.
pub fn trajectory_correlation(
    spec: &LatticeSpec,
    state: &PureState1X,
    j: usize,
    jp: usize,
    times: &[f64],
) -> Result<Trajectory> {
    SingleExcitationDynamics::new(spec, state)?
        .trajectory(&[Observable::CorrRe(j, jp), Observable::CorrIm(j, jp)], times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_excitation::eigenbasis::numerical_spectrum;
    use crate::single_excitation::hamiltonian::EffectiveHamiltonian;
    use proptest::prelude::*;

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    /// Excited amplitudes `exp(-i K t) a(0)` by a Taylor series on many small
    /// substeps: an oracle independent of any eigendecomposition.
    fn propagate_amplitudes(spec: &LatticeSpec, a0: &[Complex64], t: f64) -> Vec<Complex64> {
        let h = EffectiveHamiltonian::from_spec(spec).unwrap();
        let substeps = (t / 0.05).ceil().max(1.0) as usize;
        let dt = t / substeps as f64;
        let mut a = a0.to_vec();
        for _ in 0..substeps {
            let mut term = a.clone();
            let mut sum = a.clone();
            for order in 1..30 {
                term = h.apply(&term).iter().map(|x| x * Complex64::new(0.0, -dt / order as f64)).collect();
                sum.iter_mut().zip(&term).for_each(|(s, x)| *s += x);
            }
            a = sum;
        }
        a
    }

    #[test]
    fn ground_state_has_no_coherence() {
        let spec = LatticeSpec::dimeric(10, 0.25, 0.05, 0.05).unwrap();
        let dynamics = SingleExcitationDynamics::new(&spec, &PureState1X::ground(10)).unwrap();
        for j in 1..=10 {
            assert!(dynamics.sigma_x(j, &grid(30.0, 30)).unwrap().iter().all(|x| x.abs() < 1e-15));
            assert!(dynamics.sigma_z(j, &grid(30.0, 30)).unwrap().iter().all(|z| (z + 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn phi0_initial_population() {
        let spec = LatticeSpec::dimeric(50, 0.25, 0.05, 0.05).unwrap();
        let dynamics = SingleExcitationDynamics::new(&spec, &PureState1X::phi0(50, 10, 12).unwrap()).unwrap();
        let z = dynamics.sigma_z(10, &[0.0]).unwrap()[0];
        assert!((z + 0.5).abs() < 1e-12, "{z}");
        let x = dynamics.sigma_x(10, &[0.0]).unwrap()[0];
        // 2 Re(<e_10|rho|g>) = 2 * (1/2) * (1/sqrt 2).
        assert!((x - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_taylor_oracle() {
        let spec = LatticeSpec::dimeric(12, 0.25, 0.05, 0.05).unwrap();
        let state = PureState1X::phi0(12, 4, 6).unwrap();
        let dynamics = SingleExcitationDynamics::new(&spec, &state).unwrap();
        let times = [0.0, 3.7, 12.5, 40.0];
        for j in [1, 4, 5, 12] {
            let z = dynamics.sigma_z(j, &times).unwrap();
            let x = dynamics.sigma_x(j, &times).unwrap();
            let c = dynamics.correlation(j, 5, &times).unwrap();
            for (i, &t) in times.iter().enumerate() {
                let a = propagate_amplitudes(&spec, state.amp_e(), t);
                let g = state.amp_g();
                assert!((z[i] - (2.0 * a[j - 1].norm_sqr() - 1.0)).abs() < 1e-10);
                assert!((x[i] - 2.0 * (a[j - 1] * g.conj()).re).abs() < 1e-10);
                assert!((c[i] - a[4] * a[j - 1].conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_correlation_is_excitation() {
        let spec = LatticeSpec::dimeric(20, 0.25, 0.05, 0.05).unwrap();
        let state = PureState1X::phi0(20, 10, 12).unwrap();
        let dynamics = SingleExcitationDynamics::new(&spec, &state).unwrap();
        let times = grid(50.0, 50);
        for j in [9, 10, 11] {
            let z = dynamics.sigma_z(j, &times).unwrap();
            let c = dynamics.correlation(j, j, &times).unwrap();
            for (zi, ci) in z.iter().zip(&c) {
                assert!((ci.re - 0.5 * (1.0 + zi)).abs() < 1e-12);
                assert!(ci.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correlation_is_hermitian() {
        let spec = LatticeSpec::dimeric(20, 0.25, 0.05, 0.05).unwrap();
        let dynamics = SingleExcitationDynamics::new(&spec, &PureState1X::phi0(20, 10, 12).unwrap()).unwrap();
        let times = grid(40.0, 20);
        let a = dynamics.correlation(10, 11, &times).unwrap();
        let b = dynamics.correlation(11, 10, &times).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn uniform_bulk_decays_locally() {
        // In a uniform chain the hopping currents into and out of a bulk site
        // cancel only on average, so check the site-local law on the total
        // excitation instead: d/dt sum_j P_j = -gamma sum_j P_j exactly.
        let spec = LatticeSpec::dimeric(16, 1.0, 0.05, 0.05).unwrap();
        let dynamics = SingleExcitationDynamics::new(&spec, &PureState1X::phi0(16, 8, 10).unwrap()).unwrap();
        let h = 1e-3;
        for &t in &[2.0, 10.0, 25.0] {
            let total = |t: f64| -> f64 {
                (1..=16).map(|j| 0.5 * (1.0 + dynamics.sigma_z(j, &[t]).unwrap()[0])).sum()
            };
            let derivative = (total(t + h) - total(t - h)) / (2.0 * h);
            assert!((derivative + 0.05 * total(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn numerical_basis_gives_same_trajectories() {
        let spec = LatticeSpec::dimeric(10, 0.3, 0.05, 0.05).unwrap();
        let state = PureState1X::phi0(10, 4, 6).unwrap();
        let analytic = SingleExcitationDynamics::new(&spec, &state).unwrap();
        let (s, b) = numerical_spectrum(&EffectiveHamiltonian::from_spec(&spec).unwrap()).unwrap();
        let numeric = SingleExcitationDynamics::from_parts(&spec, s, b, &state).unwrap();
        let times = grid(30.0, 30);
        let za = analytic.sigma_z(5, &times).unwrap();
        let zn = numeric.sigma_z(5, &times).unwrap();
        for (a, b) in za.iter().zip(&zn) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_column_starts_from_state_energy() {
        let spec = LatticeSpec::dimeric(6, 0.25, 0.05, 0.05).unwrap();
        let dynamics = SingleExcitationDynamics::new(&spec, &PureState1X::excited(6, 1).unwrap()).unwrap();
        let traj = dynamics.trajectory(&[Observable::Energy, Observable::Population], &[0.0]).unwrap();
        // One A excitation: (1/2)(1) - (sum of other gaps)/2 over the scale 1.875.
        let expected = (0.5 - (0.25 + 1.0 + 0.25 + 1.0 + 0.25) / 2.0) / 1.875;
        assert!((traj.column("energy").unwrap()[0] - expected).abs() < 1e-12);
        assert!((traj.column("population").unwrap()[0] - expected).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn trajectories_ignore_mode_scaling(
            seeds in proptest::collection::vec((0.2f64..3.0, -3.0f64..3.0), 8),
            t in 0.0f64..60.0,
        ) {
            let spec = LatticeSpec::dimeric(8, 0.25, 0.05, 0.05).unwrap();
            let state = PureState1X::phi0(8, 2, 4).unwrap();
            let base = SingleExcitationDynamics::new(&spec, &state).unwrap();
            let scales: Vec<Complex64> = seeds.iter().map(|&(r, phi)| Complex64::from_polar(r, phi)).collect();
            let scaled = SingleExcitationDynamics::from_parts(
                &spec, base.spectrum().clone(), base.basis().rescaled(&scales), &state,
            ).unwrap();
            for j in 1..=8 {
                prop_assert!((base.sigma_z(j, &[t]).unwrap()[0] - scaled.sigma_z(j, &[t]).unwrap()[0]).abs() < 1e-10);
                prop_assert!((base.sigma_x(j, &[t]).unwrap()[0] - scaled.sigma_x(j, &[t]).unwrap()[0]).abs() < 1e-10);
                let (a, b) = (base.correlation(j, 3, &[t]).unwrap()[0], scaled.correlation(j, 3, &[t]).unwrap()[0]);
                prop_assert!((a - b).norm() < 1e-10);
            }
        }

        #[test]
        fn populations_bounded_and_excitation_decreasing(
            raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 11),
            ratio in 0.1f64..=1.0,
        ) {
            let spec = LatticeSpec::dimeric(10, ratio, 0.05, 0.05).unwrap();
            let amps: Vec<Complex64> = raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let amps: Vec<Complex64> = amps.iter().map(|a| a / norm).collect();
            let state = PureState1X::new(amps[0], amps[1..].to_vec()).unwrap();
            let dynamics = SingleExcitationDynamics::new(&spec, &state).unwrap();
            let times = grid(60.0, 120);
            let traj = dynamics.trajectory(&[Observable::TotalExcitation], &times).unwrap();
            let total = traj.column("total_excitation").unwrap();
            for w in total.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            for j in 1..=10 {
                for z in dynamics.sigma_z(j, &times).unwrap() {
                    prop_assert!((-1.0 - 1e-8..=1.0 + 1e-8).contains(&z));
                }
            }
        }
    }
}
