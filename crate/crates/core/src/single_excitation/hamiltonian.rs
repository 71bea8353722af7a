use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

/// How a site decay rate enters the complex site frequency `Delta - i * f * gamma`.
///
/// `Operator` (f = 1/2) follows from `K = H_S - i sum_j (gamma_j / 2) sigma_j^+ sigma_j^-`
/// and is the only convention that reproduces the master equation: an isolated
/// excited spin loses population as `exp(-gamma t)`. `FullRate` (f = 1) is kept
/// for comparing decay-band reports against figures drawn with `Delta - i gamma`,
/// and as a deliberately wrong variant for sensitivity checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayConvention {
    #[default]
    Operator,
    FullRate,
}

impl DecayConvention {
    pub fn factor(self) -> f64 {
        match self {
            DecayConvention::Operator => 0.5,
            DecayConvention::FullRate => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DecayConvention::Operator => "operator",
            DecayConvention::FullRate => "full-rate",
        }
    }

    /// Human-readable statement of the site frequencies in force.
    pub fn describe(self) -> &'static str {
        match self {
            DecayConvention::Operator => "Omega_{A,B} = Delta_{A,B} - i*gamma_{A,B}/2",
            DecayConvention::FullRate => "Omega_{A,B} = Delta_{A,B} - i*gamma_{A,B}",
        }
    }
}

impl std::str::FromStr for DecayConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "operator" => Ok(DecayConvention::Operator),
            "full-rate" => Ok(DecayConvention::FullRate),
            other => Err(format!("unknown decay convention `{other}` (expected operator or full-rate)")),
        }
    }
}

/// Complex site frequencies `(Omega_A, Omega_B)` under a convention.
pub fn site_frequencies(spec: &LatticeSpec, convention: DecayConvention) -> (Complex64, Complex64) {
    let f = convention.factor();
    (
        Complex64::new(spec.delta_a, -f * spec.gamma_a),
        Complex64::new(spec.delta_b, -f * spec.gamma_b),
    )
}

/// Non-Hermitian generator of the one-excitation amplitudes: a complex
/// symmetric tridiagonal matrix on `{|e_1>, ..., |e_N>}` with alternating
/// diagonal `Omega_A, Omega_B, ...` and uniform real off-diagonal `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveHamiltonian {
    diagonal: Vec<Complex64>,
    coupling: f64,
}

impl EffectiveHamiltonian {
    pub fn from_spec(spec: &LatticeSpec) -> Result<Self> {
        Self::with_convention(spec, DecayConvention::Operator)
    }

    pub fn with_convention(spec: &LatticeSpec, convention: DecayConvention) -> Result<Self> {
        spec.validate()?;
        if spec.gamma_collective != 0.0 {
            return Err(Error::CollectiveDecayUnsupported(spec.gamma_collective));
        }
        let (wa, wb) = site_frequencies(spec, convention);
        let diagonal = (0..spec.n_sites).map(|i| if i % 2 == 0 { wa } else { wb }).collect();
        Ok(EffectiveHamiltonian { diagonal, coupling: spec.coupling })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[Complex64] {
        &self.diagonal
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// `(Omega_A, Omega_B)`, the first two diagonal entries.
    pub fn site_frequencies(&self) -> (Complex64, Complex64) {
        (self.diagonal[0], self.diagonal[1])
    }

    /// Dense matrix element `K_{ij}` (0-based).
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            self.diagonal[i]
        } else if i.abs_diff(j) == 1 {
            Complex64::new(self.coupling, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// `K v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.diagonal[i] * v[i];
                if i > 0 {
                    acc += v[i - 1] * self.coupling;
                }
                if i + 1 < n {
                    acc += v[i + 1] * self.coupling;
                }
                acc
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let diag: f64 = self.diagonal.iter().map(|d| d.norm_sqr()).sum();
        let off = 2.0 * (self.dim() - 1) as f64 * self.coupling * self.coupling;
        (diag + off).sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal.iter().sum()
    }
}
