//! Bond-environment basis with cylindrical symmetry: permutations, rotations about the
//! bond axis, and reflections `z → −z`, `θ → −θ`.

use crate::error::{AceError, Result};
use crate::quadrature::gauss_legendre;
use crate::radial::{RadialBasis, RadialParams};
use nalgebra::Vector3;
use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylNeighbor {
    /// Distance from the bond axis.
    pub rho: f64,
    pub theta: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondEnvironment {
    pub r: f64,
    pub neighbors: Vec<CylNeighbor>,
}

impl BondEnvironment {
    /// Frame with `e_z ∥ bond`; `positions` are relative to the bond midpoint.
    pub fn from_cartesian(bond: &Vector3<f64>, positions: &[Vector3<f64>]) -> Result<Self> {
        let r = bond.norm();
        if r == 0.0 {
            return Err(AceError::ZeroVector);
        }
        let ez = bond / r;
        let trial = if ez.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let ex = (trial - ez * ez.dot(&trial)).normalize();
        let ey = ez.cross(&ex);
        let neighbors = positions
            .iter()
            .map(|p| {
                let (x, y) = (p.dot(&ex), p.dot(&ey));
                CylNeighbor { rho: x.hypot(y), theta: y.atan2(x), z: p.dot(&ez) }
            })
            .collect();
        Ok(BondEnvironment { r, neighbors })
    }
}

/// One-particle index `(k^r, k^θ, k^z)`.
pub type CylIndex = (u16, i16, u16);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CylKey {
    pub n: u16,
    pub k: Vec<CylIndex>,
}

impl CylKey {
    pub fn degree(&self) -> usize {
        self.n as usize + self.k.iter().map(|&(r, t, z)| r as usize + t.unsigned_abs() as usize + z as usize).sum::<usize>()
    }

    fn mirrored(&self) -> Vec<CylIndex> {
        let mut m: Vec<CylIndex> = self.k.iter().map(|&(r, t, z)| (r, -t, z)).collect();
        m.sort_unstable();
        m
    }

    /// Ordered, `Σk^θ = 0`, `Σk^z` even, and the tuple is the larger of itself and its `θ`-mirror.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(AceError::InvalidKey(format!("{self:?}: {why}")));
        if self.k.windows(2).any(|w| w[0] > w[1]) {
            return bad("not ordered");
        }
        if self.k.iter().map(|p| p.1 as i64).sum::<i64>() != 0 {
            return bad("Σk^θ ≠ 0");
        }
        if self.k.iter().map(|p| p.2 as u64).sum::<u64>() % 2 == 1 {
            return bad("Σk^z odd");
        }
        if self.k < self.mirrored() {
            return bad("mirror image of an admitted key");
        }
        Ok(())
    }
}

/// Every valid key with at most `max_order` neighbours and `degree ≤ max_degree`.
pub fn enumerate_cyl_keys(max_order: usize, max_degree: usize, k_theta_max: usize) -> Vec<CylKey> {
    let kt = k_theta_max as i16;
    let mut singles: Vec<CylIndex> = Vec::new();
    for r in 0..=max_degree as u16 {
        for t in -kt..=kt {
            for z in 0..=max_degree as u16 {
                if (r as usize) + t.unsigned_abs() as usize + z as usize <= max_degree {
                    singles.push((r, t, z));
                }
            }
        }
    }
    singles.sort_unstable();
    let deg1 = |p: &CylIndex| p.0 as usize + p.1.unsigned_abs() as usize + p.2 as usize;
    let mut tuples: Vec<Vec<CylIndex>> = vec![vec![]];
    let mut out = Vec::new();
    let mut frontier: Vec<(Vec<CylIndex>, usize, usize)> = vec![(vec![], 0, 0)];
    for _ in 0..max_order {
        let mut next = Vec::new();
        for (t, start, d) in &frontier {
            for (i, p) in singles.iter().enumerate().skip(*start) {
                let nd = d + deg1(p);
                if nd > max_degree {
                    continue;
                }
                let mut u = t.clone();
                u.push(*p);
                next.push((u, i, nd));
            }
        }
        tuples.extend(next.iter().map(|x| x.0.clone()));
        frontier = next;
    }
    for k in tuples {
        let kd: usize = k.iter().map(deg1).sum();
        for n in 0..=(max_degree - kd) as u16 {
            let key = CylKey { n, k: k.clone() };
            if key.validate().is_ok() {
                out.push(key);
            }
        }
    }
    out
}

/// Orthonormal polynomials `q_k(t)` for the weight `(1 − t²)^{2p}` on `[−1, 1]` (unit mass),
/// times the envelope `(1 − t²)^p`; even/odd in `t` with `k`.
#[derive(Clone, Debug)]
pub struct SymmetricBasis {
    pub z_cut: f64,
    pub p: u32,
    b: Vec<f64>,
}

impl SymmetricBasis {
    pub fn new(k_max: usize, z_cut: f64, p: u32) -> Result<Self> {
        if !(z_cut > 0.0) {
            return Err(AceError::InvalidArgument("z_cut must be positive".into()));
        }
        let (t, w) = gauss_legendre(k_max + 2 * p as usize + 8);
        let w: Vec<f64> = t.iter().zip(&w).map(|(t, w)| 0.5 * w * (1.0 - t * t).powi(2 * p as i32)).collect();
        let mass: f64 = w.iter().sum();
        // Stieltjes with α_k = 0 by symmetry
        let mut b = vec![mass.sqrt()];
        let mut prev = vec![0.0; t.len()];
        let mut cur = vec![1.0 / mass.sqrt(); t.len()];
        for k in 0..k_max {
            let mut nxt: Vec<f64> = t.iter().zip(&cur).zip(&prev).map(|((t, c), p)| t * c - if k == 0 { 0.0 } else { b[k] * p }).collect();
            let nn: f64 = nxt.iter().zip(&w).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
            nxt.iter_mut().for_each(|x| *x /= nn);
            b.push(nn);
            prev = cur;
            cur = nxt;
        }
        Ok(SymmetricBasis { z_cut, p, b })
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval_into(&self, z: f64, out: &mut [f64]) {
        let t = z / self.z_cut;
        if t.abs() >= 1.0 {
            out.fill(0.0);
            return;
        }
        let env = (1.0 - t * t).powi(self.p as i32);
        let mut prev = 0.0;
        let mut cur = 1.0 / self.b[0];
        for (k, o) in out.iter_mut().enumerate().take(self.len()) {
            *o = cur * env;
            if k + 1 < self.len() {
                let nxt = (t * cur - if k == 0 { 0.0 } else { self.b[k] * prev }) / self.b[k + 1];
                prev = cur;
                cur = nxt;
            }
        }
    }

    pub fn eval(&self, z: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.eval_into(z, &mut v);
        v
    }
}

#[derive(Clone, Debug)]
pub struct CylBasis {
    /// Basis in the bond length.
    pub p0: RadialBasis,
    /// Basis in the distance from the axis.
    pub pr: RadialBasis,
    pub pz: SymmetricBasis,
}

impl CylBasis {
    pub fn new(k_max: usize, r_nn: f64, r_cut: f64, rho_cut: f64, z_cut: f64) -> Result<Self> {
        let mut rho = RadialParams::new(k_max, r_nn, rho_cut);
        rho.r0 = 0.0;
        Ok(CylBasis {
            p0: RadialBasis::new(RadialParams::new(k_max, r_nn, r_cut))?,
            pr: RadialBasis::new(rho)?,
            pz: SymmetricBasis::new(k_max, z_cut, 2)?,
        })
    }

    fn check_range(&self, key: &CylKey) -> Result<()> {
        let ok = key.n as usize <= self.p0.n_max()
            && key.k.iter().all(|&(r, _, z)| (r as usize) < self.pr.len() && (z as usize) < self.pz.len());
        if ok {
            Ok(())
        } else {
            Err(AceError::InvalidKey(format!("{key:?}: index beyond basis size")))
        }
    }

    fn densities(&self, env: &BondEnvironment, keys: &[CylKey]) -> FxHashMap<CylIndex, Complex64> {
        let nb: Vec<(Vec<f64>, Vec<f64>)> = env
            .neighbors
            .iter()
            .map(|q| (self.pr.eval(q.rho).0, self.pz.eval(q.z)))
            .collect();
        let mut a = FxHashMap::default();
        for key in keys {
            for &k in &key.k {
                a.entry(k).or_insert_with(|| {
                    env.neighbors
                        .iter()
                        .zip(&nb)
                        .map(|(q, (pr, pz))| Complex64::from_polar(pr[k.0 as usize] * pz[k.2 as usize], k.1 as f64 * q.theta))
                        .sum()
                });
            }
        }
        a
    }

    /// `B_{n,K} = P_n(r) Re Π_α A_{k_α}`; every key must be valid.
    pub fn eval(&self, env: &BondEnvironment, keys: &[CylKey]) -> Result<Vec<f64>> {
        for k in keys {
            k.validate()?;
        }
        self.eval_unchecked(env, keys)
    }

    /// Same product without the symmetry checks (negative controls).
    pub fn eval_unchecked(&self, env: &BondEnvironment, keys: &[CylKey]) -> Result<Vec<f64>> {
        if !(env.r > 0.0) || env.neighbors.iter().any(|q| q.rho < 0.0) {
            return Err(AceError::InvalidArgument("need r > 0 and r_j ≥ 0".into()));
        }
        for k in keys {
            self.check_range(k)?;
        }
        let p0 = self.p0.eval(env.r).0;
        let a = self.densities(env, keys);
        Ok(keys
            .iter()
            .map(|key| {
                let prod: Complex64 = key.k.iter().map(|k| a[k]).product();
                p0[key.n as usize] * prod.re
            })
            .collect())
    }
}
