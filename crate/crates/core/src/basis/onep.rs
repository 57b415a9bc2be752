use crate::error::{AceError, Result};
use crate::geom::Environment;
use crate::radial::RadialBasis;
use crate::sphharm::{lm_index, lm_len, SphericalHarmonics};
use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Flat layout of `(z, n, l, m)`; increasing flat index equals lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatIndex {
    pub n_species: usize,
    pub n_max: usize,
    pub l_max: usize,
}

impl FlatIndex {
    #[inline]
    pub fn block(&self) -> usize {
        (self.n_max + 1) * lm_len(self.l_max)
    }

    pub fn len(&self) -> usize {
        self.n_species * self.block()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, z: usize, n: usize, l: usize, m: i32) -> usize {
        z * self.block() + n * lm_len(self.l_max) + lm_index(l, m)
    }

    pub fn decode(&self, k: usize) -> (usize, usize, usize, i32) {
        let z = k / self.block();
        let rest = k % self.block();
        let n = rest / lm_len(self.l_max);
        let lm = rest % lm_len(self.l_max);
        let l = (lm as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= lm { l + 1 } else { l };
        (z, n, l, lm as i32 - (l * l + l) as i32)
    }
}

/// `φ_{znlm}(r) = δ_{z z_j} P_n(r) Y_l^m(r̂)`.
#[derive(Clone, Debug)]
pub struct OneParticleBasis {
    pub radial: RadialBasis,
    pub sh: SphericalHarmonics,
    pub species: Vec<u32>,
    pub flat: FlatIndex,
}

/// Per-neighbour gradients of the one-particle functions in the neighbour's species block.
#[derive(Clone, Debug)]
pub struct NeighborGrad {
    pub z: usize,
    /// Local `(n, lm)` index within the block; empty when the neighbour lies outside the support.
    pub dphi: Vec<Vector3<Complex64>>,
}

#[derive(Clone, Debug)]
pub struct Density {
    pub a: Vec<Complex64>,
    pub grads: Vec<NeighborGrad>,
}

impl Density {
    /// `∂V/∂r_j = Re Σ_k W_k ∇φ_k(r_j)` given the holomorphic adjoint `W` over the flat index.
    pub fn gradients(&self, w: &[Complex64], block: usize) -> Vec<Vector3<f64>> {
        self.grads
            .iter()
            .map(|ng| {
                let ws = &w[ng.z * block..(ng.z + 1) * block];
                ng.dphi
                    .iter()
                    .zip(ws)
                    .fold(Vector3::zeros(), |acc, (dp, wk)| acc + (dp * *wk).map(|x| x.re))
            })
            .collect()
    }
}

impl OneParticleBasis {
    pub fn new(radial: RadialBasis, l_max: usize, species: Vec<u32>) -> Self {
        let flat = FlatIndex {
            n_species: species.len(),
            n_max: radial.n_max(),
            l_max,
        };
        OneParticleBasis {
            sh: SphericalHarmonics::new(l_max),
            radial,
            species,
            flat,
        }
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn species_index(&self, z: u32) -> Result<usize> {
        self.species
            .iter()
            .position(|&s| s == z)
            .ok_or_else(|| AceError::Species(format!("species {z} not in {:?}", self.species)))
    }

    /// `A_k = Σ_j φ_k(r_j)`.
    pub fn project(&self, env: &Environment) -> Result<Vec<Complex64>> {
        let nr = self.radial.len();
        let nlm = self.sh.len();
        let mut a = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut p = vec![0.0; nr];
        let mut dp = vec![0.0; nr];
        let mut y = vec![Complex64::new(0.0, 0.0); nlm];
        let mut s = self.sh.scratch();
        for nb in &env.neighbors {
            let z = self.species_index(nb.z)?;
            let r = nb.r.norm();
            if !self.radial.in_support(r) {
                continue;
            }
            self.radial.eval_into(r, &mut p, &mut dp);
            self.sh.eval_into(&nb.r, &mut y, &mut s)?;
            let base = z * self.flat.block();
            for n in 0..nr {
                let off = base + n * nlm;
                for (k, yk) in y.iter().enumerate() {
                    a[off + k] += p[n] * yk;
                }
            }
        }
        Ok(a)
    }

    pub fn project_with_gradients(&self, env: &Environment) -> Result<Density> {
        let nr = self.radial.len();
        let nlm = self.sh.len();
        let mut a = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut p = vec![0.0; nr];
        let mut dp = vec![0.0; nr];
        let mut y = vec![Complex64::new(0.0, 0.0); nlm];
        let mut dy = vec![Vector3::zeros(); nlm];
        let mut s = self.sh.scratch();
        let mut grads = Vec::with_capacity(env.neighbors.len());
        for nb in &env.neighbors {
            let z = self.species_index(nb.z)?;
            let r = nb.r.norm();
            if !self.radial.in_support(r) {
                grads.push(NeighborGrad { z, dphi: Vec::new() });
                continue;
            }
            self.radial.eval_into(r, &mut p, &mut dp);
            self.sh.eval_with_gradients_into(&nb.r, &mut y, &mut dy, &mut s)?;
            let rhat = nb.r / r;
            let base = z * self.flat.block();
            let mut dphi = Vec::with_capacity(self.flat.block());
            for n in 0..nr {
                let off = base + n * nlm;
                for k in 0..nlm {
                    a[off + k] += p[n] * y[k];
                    dphi.push(rhat.map(|c| Complex64::new(c * dp[n], 0.0) * y[k]) + dy[k] * Complex64::new(p[n], 0.0));
                }
            }
            grads.push(NeighborGrad { z, dphi });
        }
        Ok(Density { a, grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialParams;

    fn basis() -> OneParticleBasis {
        let rb = RadialBasis::new(RadialParams::new(4, 1.0, 3.0)).unwrap();
        OneParticleBasis::new(rb, 3, vec![1, 8])
    }

    #[test]
    fn flat_index_roundtrip_and_order() {
        let f = FlatIndex { n_species: 2, n_max: 3, l_max: 4 };
        let mut last = None;
        for z in 0..2 {
            for n in 0..=3 {
                for l in 0..=4 {
                    for m in -(l as i32)..=l as i32 {
                        let k = f.index(z, n, l, m);
                        assert_eq!(f.decode(k), (z, n, l, m));
                        if let Some(p) = last {
                            assert_eq!(k, p + 1);
                        }
                        last = Some(k);
                    }
                }
            }
        }
        assert_eq!(last.unwrap() + 1, f.len());
    }

    #[test]
    fn projection_matches_direct_sum() {
        let b = basis();
        let rs = [Vector3::new(0.9, 0.2, -0.3), Vector3::new(-0.4, 1.1, 0.5), Vector3::new(0.1, 0.1, 2.9), Vector3::new(3.5, 0.0, 0.0)];
        let env = Environment::from_vectors(1, &rs, &[1, 8, 8, 1]);
        let a = b.project(&env).unwrap();
        for z in 0..2 {
            for n in 0..=4 {
                for l in 0..=3 {
                    for m in -(l as i32)..=l as i32 {
                        let mut s = Complex64::new(0.0, 0.0);
                        for (r, &zz) in rs.iter().zip(&[1u32, 8, 8, 1]) {
                            if b.species[z] != zz || r.norm() >= 3.0 {
                                continue;
                            }
                            let pn = b.radial.eval(r.norm()).0[n];
                            s += pn * b.sh.eval(r).unwrap()[lm_index(l, m)];
                        }
                        let k = b.flat.index(z, n, l, m);
                        assert!((a[k] - s).norm() < 1e-12);
                    }
                }
            }
        }
        let d = b.project_with_gradients(&env).unwrap();
        assert_eq!(d.a, a);
        assert!(d.grads[3].dphi.is_empty());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = basis();
        let r0 = Vector3::new(0.7, -0.5, 0.8);
        let env = Environment::from_vectors(1, &[r0], &[8]);
        let d = b.project_with_gradients(&env).unwrap();
        let h = 1e-6;
        let blk = b.flat.block();
        for c in 0..3 {
            let mut rp = r0;
            rp[c] += h;
            let mut rm = r0;
            rm[c] -= h;
            let ap = b.project(&Environment::from_vectors(1, &[rp], &[8])).unwrap();
            let am = b.project(&Environment::from_vectors(1, &[rm], &[8])).unwrap();
            for k in 0..blk {
                let fd = (ap[blk + k] - am[blk + k]) / (2.0 * h);
                assert!((fd - d.grads[0].dphi[k][c]).norm() < 1e-6 * (1.0 + fd.norm()));
            }
        }
    }

    #[test]
    fn unknown_species_is_an_error() {
        let b = basis();
        let env = Environment::from_vectors(1, &[Vector3::new(1.0, 0.0, 0.0)], &[6]);
        assert!(matches!(b.project(&env), Err(AceError::Species(_))));
    }
}
