use num_complex::Complex64;

use super::density::{site_mask, DensityMatrix};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

/// Largest chain the oracle accepts by default: a `4^12`-entry density matrix.
pub const DEFAULT_ORACLE_CAP: usize = 12;

/// The Lindblad superoperator
/// `L rho = -i [H_S, rho] + sum_j gamma_j D[sigma_j^-] rho + Gamma D[J^-] rho`
/// with `D[L] rho = L rho L^+ - {L^+ L, rho} / 2` and `J^- = sum_j sigma_j^-`.
///
/// Internally `-i H_S rho - (1/2) {M, rho}` is folded into `-i (G rho - rho G^+)`
/// with `G = H_S - (i/2) M` and `M = sum_j gamma_j L_j^+ L_j + Gamma J^+ J^-`.
/// `G` is complex symmetric: a diagonal plus flip-flop entries `G_{a, a^p} = v_p`
/// for every site pair `p` whose two spins differ in `a`. The density matrix
/// stays dense.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    spec: LatticeSpec,
    dim: usize,
    diag: Vec<Complex64>,
    /// Flip-flop channels: combined mask of the two sites and `v_p`.
    pairs: Vec<(usize, Complex64)>,
    /// For each pair, the basis indices in which its two spins differ.
    pair_support: Vec<Vec<u32>>,
    /// `(mask, gamma_j)` for every site with a nonzero local rate.
    local: Vec<(usize, f64)>,
    collective: f64,
    masks: Vec<usize>,
}

pub fn build_generator(spec: &LatticeSpec) -> Result<LindbladGenerator> {
    LindbladGenerator::with_cap(spec, DEFAULT_ORACLE_CAP)
}

impl LindbladGenerator {
    pub fn with_cap(spec: &LatticeSpec, cap: usize) -> Result<Self> {
        spec.validate_any_length()?;
        let n = spec.n_sites;
        if n > cap {
            return Err(Error::OracleCap { n_sites: n, cap });
        }
        let dim = 1usize << n;
        let masks: Vec<usize> = (1..=n).map(|j| site_mask(n, j)).collect();
        let delta = spec.detunings();
        let gamma = spec.decay_rates();
        let big_gamma = spec.gamma_collective;
        let minus_half_i = Complex64::new(0.0, -0.5);

        let diag = (0..dim)
            .map(|a| {
                (0..n)
                    .map(|j| {
                        if a & masks[j] == 0 {
                            0.5 * delta[j] + minus_half_i * (gamma[j] + big_gamma)
                        } else {
                            Complex64::new(-0.5 * delta[j], 0.0)
                        }
                    })
                    .sum()
            })
            .collect();

        let mut pairs = Vec::new();
        for i in 0..n {
            for k in i + 1..n {
                let mut v = minus_half_i * big_gamma;
                if k == i + 1 {
                    v += spec.coupling;
                }
                if v != Complex64::default() {
                    pairs.push((masks[i] | masks[k], v));
                }
            }
        }
        let pair_support = pairs
            .iter()
            .map(|&(pm, _)| (0..dim).filter(|&b| (b & pm).count_ones() == 1).map(|b| b as u32).collect())
            .collect();

        let local = masks.iter().zip(&gamma).filter(|(_, &g)| g != 0.0).map(|(&m, &g)| (m, g)).collect();
        Ok(LindbladGenerator { spec: *spec, dim, diag, pairs, pair_support, local, collective: big_gamma, masks })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `L rho` into `out` for a row-major `dim x dim` matrix.
    pub fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        let minus_i = Complex64::new(0.0, -1.0);
        let plus_i = Complex64::new(0.0, 1.0);
        for a in 0..d {
            let rho_a = &rho[a * d..(a + 1) * d];
            let out_a = &mut out[a * d..(a + 1) * d];

            // Diagonal of G on both sides: -i (G_aa - conj(G_bb)) rho_ab.
            let ga = self.diag[a];
            for ((o, &r), gb) in out_a.iter_mut().zip(rho_a).zip(&self.diag) {
                *o = minus_i * (ga - gb.conj()) * r;
            }

            for (&(pm, v), support) in self.pairs.iter().zip(&self.pair_support) {
                // -i v rho_{a^p, b} when the pair differs in a.
                if (a & pm).count_ones() == 1 {
                    let coef = minus_i * v;
                    let src = &rho[(a ^ pm) * d..((a ^ pm) + 1) * d];
                    for (o, &r) in out_a.iter_mut().zip(src) {
                        *o += coef * r;
                    }
                }
                // +i conj(v) rho_{a, b^p} when the pair differs in b.
                let coef = plus_i * v.conj();
                for &b in support {
                    let b = b as usize;
                    out_a[b] += coef * rho_a[b ^ pm];
                }
            }

            // gamma_j sigma_j^- rho sigma_j^+: rows and columns with site j down.
            for &(m, g) in &self.local {
                if a & m == 0 {
                    continue;
                }
                let src = &rho[(a ^ m) * d..((a ^ m) + 1) * d];
                add_lowered(out_a, src, m, g);
            }

            // Gamma J^- rho J^+.
            if self.collective != 0.0 {
                for &mi in self.masks.iter().filter(|&&mi| a & mi != 0) {
                    let src = &rho[(a ^ mi) * d..((a ^ mi) + 1) * d];
                    for &mk in &self.masks {
                        add_lowered(out_a, src, mk, self.collective);
                    }
                }
            }
        }
    }

    /// `L rho` as a new matrix.
    pub fn apply_matrix(&self, rho: &DensityMatrix) -> DensityMatrix {
        let mut out = DensityMatrix::zeros(rho.n_sites());
        self.apply(rho.as_slice(), out.as_mut_slice());
        out
    }
}

/// `out[b] += rate * src[b ^ m]` for every `b` with bit `m` set. Those `b`
/// form contiguous runs of length `m`.
#[inline]
fn add_lowered(out: &mut [Complex64], src: &[Complex64], m: usize, rate: f64) {
    let d = out.len();
    let mut start = m;
    while start < d {
        let (o, s) = (&mut out[start..start + m], &src[start - m..start]);
        for (x, &y) in o.iter_mut().zip(s) {
            *x += rate * y;
        }
        start += 2 * m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, entries: &[(f64, f64)]) -> DensityMatrix {
        let dim = 1 << n;
        let mut data = vec![Complex64::default(); dim * dim];
        let mut it = entries.iter().cycle();
        for a in 0..dim {
            for b in a..dim {
                let &(re, im) = it.next().unwrap();
                let v = if a == b { Complex64::new(re, 0.0) } else { Complex64::new(re, im) };
                data[a * dim + b] = v;
                data[b * dim + a] = v.conj();
            }
        }
        DensityMatrix::from_raw(n, data).unwrap()
    }

    /// Dense Kronecker-product construction of the same superoperator.
    fn dense_reference(spec: &LatticeSpec, rho: &DensityMatrix) -> Vec<Complex64> {
        let n = spec.n_sites;
        let d = 1 << n;
        let zero = Complex64::default();
        let mat = |f: &dyn Fn(usize, usize) -> Complex64| -> Vec<Complex64> {
            (0..d * d).map(|i| f(i / d, i % d)).collect()
        };
        let mul = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            mat(&|a, b| (0..d).map(|c| x[a * d + c] * y[c * d + b]).sum())
        };
        let dag = |x: &[Complex64]| -> Vec<Complex64> { mat(&|a, b| x[b * d + a].conj()) };
        let lower = |j: usize| -> Vec<Complex64> {
            let m = site_mask(n, j);
            mat(&|a, c| if c & m == 0 && a == c | m { Complex64::new(1.0, 0.0) } else { zero })
        };
        let delta = spec.detunings();
        let gamma = spec.decay_rates();
        let mut h = mat(&|a, b| {
            if a != b {
                return zero;
            }
            (1..=n)
                .map(|j| {
                    let s = if a & site_mask(n, j) == 0 { 1.0 } else { -1.0 };
                    Complex64::new(0.5 * delta[j - 1] * s, 0.0)
                })
                .sum()
        });
        for j in 1..n {
            let (lj, lk) = (lower(j), lower(j + 1));
            let hop = mul(&dag(&lj), &lk);
            let hop_dag = dag(&hop);
            for i in 0..d * d {
                h[i] += (hop[i] + hop_dag[i]) * spec.coupling;
            }
        }
        let r = rho.as_slice();
        let hr = mul(&h, r);
        let rh = mul(r, &h);
        let mut out: Vec<Complex64> = (0..d * d).map(|i| Complex64::new(0.0, -1.0) * (hr[i] - rh[i])).collect();
        let mut dissipate = |l: &[Complex64], rate: f64| {
            let ld = dag(l);
            let ldl = mul(&ld, l);
            let jump = mul(&mul(l, r), &ld);
            let a1 = mul(&ldl, r);
            let a2 = mul(r, &ldl);
            for i in 0..d * d {
                out[i] += rate * (jump[i] - 0.5 * (a1[i] + a2[i]));
            }
        };
        for j in 1..=n {
            dissipate(&lower(j), gamma[j - 1]);
        }
        let mut jm = vec![zero; d * d];
        for j in 1..=n {
            for (x, y) in jm.iter_mut().zip(lower(j)) {
                *x += y;
            }
        }
        dissipate(&jm, spec.gamma_collective);
        out
    }

    #[test]
    fn rejects_chains_over_cap() {
        let spec = LatticeSpec::dimeric(14, 0.25, 0.05, 0.05).unwrap();
        assert_eq!(build_generator(&spec).unwrap_err(), Error::OracleCap { n_sites: 14, cap: 12 });
        assert!(LindbladGenerator::with_cap(&LatticeSpec::dimeric(4, 0.25, 0.05, 0.05).unwrap(), 2).is_err());
    }

    #[test]
    fn ground_state_is_stationary() {
        let spec = LatticeSpec::dimeric(4, 0.25, 0.05, 0.05).unwrap().with_collective_decay(0.3);
        let out = build_generator(&spec).unwrap().apply_matrix(&DensityMatrix::ground(4));
        assert!(out.as_slice().iter().all(|x| x.norm() < 1e-15));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn matches_dense_construction(
            n in 1usize..=4,
            ratio in 0.1f64..=1.0,
            lam in 0.0f64..0.3,
            big_gamma in 0.0f64..0.5,
            entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 136),
        ) {
            let spec = LatticeSpec { n_sites: n, ..LatticeSpec::dimeric(2, ratio, 0.05, lam).unwrap() }
                .with_collective_decay(big_gamma);
            let rho = random_hermitian(n, &entries);
            let fast = build_generator(&spec).unwrap().apply_matrix(&rho);
            let slow = dense_reference(&spec, &rho);
            for (x, y) in fast.as_slice().iter().zip(&slow) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }

        #[test]
        fn output_is_traceless_and_hermitian(
            n in 1usize..=5,
            big_gamma in 0.0f64..0.5,
            entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
        ) {
            let spec = LatticeSpec { n_sites: n, ..LatticeSpec::dimeric(2, 0.25, 0.05, 0.05).unwrap() }
                .with_collective_decay(big_gamma);
            let out = build_generator(&spec).unwrap().apply_matrix(&random_hermitian(n, &entries));
            prop_assert!(out.trace().norm() < 1e-12);
            prop_assert!(out.hermiticity_error() < 1e-12);
        }

        #[test]
        fn generator_is_linear(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            e1 in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 136),
            e2 in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 136),
        ) {
            let spec = LatticeSpec::dimeric(4, 0.25, 0.05, 0.05).unwrap().with_collective_decay(0.2);
            let g = build_generator(&spec).unwrap();
            let (r1, r2) = (random_hermitian(4, &e1), random_hermitian(4, &e2));
            let mix: Vec<Complex64> = r1.as_slice().iter().zip(r2.as_slice()).map(|(x, y)| a * x + b * y).collect();
            let lhs = g.apply_matrix(&DensityMatrix::from_raw(4, mix).unwrap());
            let (g1, g2) = (g.apply_matrix(&r1), g.apply_matrix(&r2));
            for ((l, x), y) in lhs.as_slice().iter().zip(g1.as_slice()).zip(g2.as_slice()) {
                prop_assert!((l - (a * x + b * y)).norm() < 1e-12);
            }
        }
    }
}
