pub mod keys;
pub mod onep;
pub mod standard;
pub mod spec;

pub use keys::{enumerate_keys, pack, pack_unsorted, unpack, Key};
pub use standard::StandardEvaluator;
pub use onep::{Density, FlatIndex, NeighborGrad, OneParticleBasis};
pub use spec::{enumerate_tuples, generate_spec, BasisSpec, DegreeKind, SpecEntry, SpecLimits};

use crate::coupling::{CouplingCache, RpiBlock};
use crate::error::{AceError, Result};
use crate::geom::Environment;
use crate::radial::{RadialBasis, RadialParams};
use nalgebra::Vector3;
use num_complex::Complex64;
use std::sync::Arc;

/// Relative imaginary part tolerated in a basis value.
pub const IMAG_TOL: f64 = 1e-10;

/// One coupling block laid out against the flat one-particle index.
#[derive(Clone, Debug)]
pub struct TupleBlock {
    pub block: Arc<RpiBlock>,
    /// Distinct flat indices used by the rows.
    pub slots: Vec<u16>,
    /// Row `m` as slot positions, one per particle.
    pub rows: Vec<Vec<u16>>,
    /// Row `m` as a packed correlation key.
    pub keys: Vec<Key>,
    /// First basis column of this block.
    pub offset: usize,
}

/// The RPI basis `B_i = Re Σ_m U_{m i} Π_α A_{k_α(m)}` for one centre species at a time.
#[derive(Clone, Debug)]
pub struct RpiBasis {
    pub spec: BasisSpec,
    pub onep: OneParticleBasis,
    pub tuples: Vec<TupleBlock>,
    n_per_center: usize,
    /// When false, imaginary residuals are not checked.
    pub check_imag: bool,
}

impl RpiBasis {
    pub fn new(spec: BasisSpec, radial: RadialParams, cache: &CouplingCache) -> Result<Self> {
        spec.validate()?;
        let mut radial = radial;
        radial.n_max = spec.n_max;
        let rb = RadialBasis::new(radial)?;
        let onep = OneParticleBasis::new(rb, spec.l_max, spec.species().to_vec());
        let flat = onep.flat;
        if flat.len() > u16::MAX as usize {
            return Err(AceError::InvalidArgument(format!(
                "one-particle basis too large for 16-bit keys: {}",
                flat.len()
            )));
        }
        let mut tuples = Vec::with_capacity(spec.tuples.len());
        let mut offset = 0;
        for t in &spec.tuples {
            let block = cache.get(&t.labels)?;
            if block.ncols() != t.n_rpi {
                return Err(AceError::InvalidConfig(format!(
                    "spec lists {} functions for {:?}, coupling gives {}",
                    t.n_rpi,
                    t.labels,
                    block.ncols()
                )));
            }
            let flat_rows: Vec<Vec<u16>> = block
                .rows
                .iter()
                .map(|m| {
                    t.labels
                        .iter()
                        .zip(m)
                        .map(|(p, &mi)| flat.index(p.z as usize, p.n as usize, p.l as usize, mi) as u16)
                        .collect()
                })
                .collect();
            let mut slots: Vec<u16> = flat_rows.iter().flatten().copied().collect();
            slots.sort_unstable();
            slots.dedup();
            let rows = flat_rows
                .iter()
                .map(|r| r.iter().map(|k| slots.binary_search(k).unwrap() as u16).collect())
                .collect();
            let keys = flat_rows.iter().map(|r| pack_unsorted(r)).collect();
            tuples.push(TupleBlock {
                block,
                slots,
                rows,
                keys,
                offset,
            });
            offset += t.n_rpi;
        }
        Ok(RpiBasis {
            spec,
            onep,
            tuples,
            n_per_center: offset,
            check_imag: true,
        })
    }

    pub fn len_per_center(&self) -> usize {
        self.n_per_center
    }

    pub fn n_species(&self) -> usize {
        self.onep.species.len()
    }

    pub fn r_cut(&self) -> f64 {
        self.onep.radial.r_cut()
    }

    pub fn center_index(&self, env: &Environment) -> Result<usize> {
        self.onep.species_index(env.center_species)
    }

    fn finish(&self, s: Complex64, scale: f64) -> Result<f64> {
        if self.check_imag && s.im.abs() > IMAG_TOL * scale.max(f64::MIN_POSITIVE) && s.im.abs() > 1e-300 {
            return Err(AceError::ImaginaryResidual(s.im.abs() / scale.max(f64::MIN_POSITIVE)));
        }
        Ok(s.re)
    }

    /// Basis values from a precomputed density.
    pub fn eval_from_density(&self, a: &[Complex64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_per_center];
        let mut vals = Vec::new();
        let mut acc = Vec::new();
        let mut scale = Vec::new();
        for t in &self.tuples {
            vals.clear();
            vals.extend(t.slots.iter().map(|&k| a[k as usize]));
            let nc = t.block.ncols();
            acc.clear();
            acc.resize(nc, Complex64::new(0.0, 0.0));
            scale.clear();
            scale.resize(nc, 0.0);
            for (mi, row) in t.rows.iter().enumerate() {
                let mut prod = Complex64::new(1.0, 0.0);
                for &s in row {
                    prod *= vals[s as usize];
                }
                let pn = prod.norm();
                for i in 0..nc {
                    let u = t.block.u[(mi, i)];
                    acc[i] += u * prod;
                    scale[i] += u.abs() * pn;
                }
            }
            for i in 0..nc {
                out[t.offset + i] = self.finish(acc[i], scale[i])?;
            }
        }
        Ok(out)
    }

    pub fn eval(&self, env: &Environment) -> Result<Vec<f64>> {
        self.center_index(env)?;
        let a = self.onep.project(env)?;
        self.eval_from_density(&a)
    }

    /// Values and `∂B_i/∂r_j` for every neighbour `j`, indexed `[i][j]`.
    pub fn eval_with_gradients(&self, env: &Environment) -> Result<(Vec<f64>, Vec<Vec<Vector3<f64>>>)> {
        self.center_index(env)?;
        let d = self.onep.project_with_gradients(env)?;
        let vals = self.eval_from_density(&d.a)?;
        let nj = env.neighbors.len();
        let mut grad = vec![vec![Vector3::zeros(); nj]; self.n_per_center];
        let block = self.onep.flat.block();
        let zero = Complex64::new(0.0, 0.0);
        let mut w: Vec<Complex64> = Vec::new();
        let mut pre: Vec<Complex64> = Vec::new();
        for t in &self.tuples {
            let nc = t.block.ncols();
            let ns = t.slots.len();
            let a: Vec<Complex64> = t.slots.iter().map(|&k| d.a[k as usize]).collect();
            // adjoint W[i][slot] = Σ_m U_{m i} ∂(Π A)/∂A_slot
            w.clear();
            w.resize(nc * ns, zero);
            for (mi, row) in t.rows.iter().enumerate() {
                let n = row.len();
                pre.clear();
                pre.push(Complex64::new(1.0, 0.0));
                for &s in row {
                    let p = *pre.last().unwrap() * a[s as usize];
                    pre.push(p);
                }
                let mut suf = Complex64::new(1.0, 0.0);
                for al in (0..n).rev() {
                    let dprod = pre[al] * suf;
                    let s = row[al] as usize;
                    for i in 0..nc {
                        w[i * ns + s] += t.block.u[(mi, i)] * dprod;
                    }
                    suf *= a[s];
                }
            }
            for (j, g) in d.grads.iter().enumerate() {
                if g.dphi.is_empty() {
                    continue;
                }
                let lo = g.z * block;
                for (s, &k) in t.slots.iter().enumerate() {
                    let k = k as usize;
                    if k < lo || k >= lo + block {
                        continue;
                    }
                    let dphi = g.dphi[k - lo];
                    for i in 0..nc {
                        let wi = w[i * ns + s];
                        if wi == zero {
                            continue;
                        }
                        grad[t.offset + i][j] += (dphi * wi).map(|c| c.re);
                    }
                }
            }
        }
        Ok((vals, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::cg::with_sign_defect;
    use nalgebra::{Rotation3, Unit};

    fn small_basis(order: usize, degree: f64, species: Vec<u32>) -> RpiBasis {
        let mut lim = SpecLimits::new(order, degree);
        lim.species = species;
        let cache = CouplingCache::default();
        let spec = generate_spec(&lim, &cache).unwrap();
        RpiBasis::new(spec, RadialParams::new(0, 1.0, 4.0), &cache).unwrap()
    }

    fn env() -> Environment {
        let rs = [
            Vector3::new(1.1, 0.2, -0.4),
            Vector3::new(-0.6, 1.3, 0.5),
            Vector3::new(0.2, -0.9, 1.2),
            Vector3::new(-1.0, -0.7, -0.9),
            Vector3::new(0.3, 0.4, -1.6),
        ];
        Environment::from_vectors(0, &rs, &[0; 5])
    }

    /// Brute force: `Re Σ_m U_{m i} Π_α Σ_j φ_{k_α}(r_j)` with per-particle sums recomputed.
    fn brute(b: &RpiBasis, e: &Environment) -> Vec<f64> {
        let mut out = vec![0.0; b.len_per_center()];
        for (t, te) in b.tuples.iter().zip(&b.spec.tuples) {
            for (mi, m) in t.block.rows.iter().enumerate() {
                let mut prod = Complex64::new(1.0, 0.0);
                for (p, &mm) in te.labels.iter().zip(m) {
                    let mut s = Complex64::new(0.0, 0.0);
                    for nb in &e.neighbors {
                        if b.onep.species[p.z as usize] != nb.z {
                            continue;
                        }
                        let r = nb.r.norm();
                        let pn = b.onep.radial.eval(r).0[p.n as usize];
                        let y = b.onep.sh.eval(&nb.r).unwrap();
                        s += pn * y[crate::sphharm::lm_index(p.l as usize, mm)];
                    }
                    prod *= s;
                }
                for i in 0..t.block.ncols() {
                    out[t.offset + i] += t.block.u[(mi, i)] * prod.re;
                }
            }
        }
        out
    }

    #[test]
    fn values_match_brute_force() {
        let b = small_basis(4, 8.0, vec![0]);
        let e = env();
        let v = b.eval(&e).unwrap();
        let w = brute(&b, &e);
        for (x, y) in v.iter().zip(&w) {
            assert!((x - y).abs() < 1e-11 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn invariant_under_rotation_reflection_permutation() {
        let b = small_basis(4, 10.0, vec![0]);
        let e = env();
        let v = b.eval(&e).unwrap();
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -1.0, 0.7)), 1.234);
        let mut e2 = e.clone();
        for nb in &mut e2.neighbors {
            nb.r = -(rot * nb.r);
        }
        e2.neighbors.reverse();
        e2.neighbors.swap(0, 2);
        let v2 = b.eval(&e2).unwrap();
        for (x, y) in v.iter().zip(&v2) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut lim = SpecLimits::new(3, 8.0);
        lim.species = vec![1, 8];
        let cache = CouplingCache::default();
        let spec = generate_spec(&lim, &cache).unwrap();
        let b = RpiBasis::new(spec, RadialParams::new(0, 1.0, 4.0), &cache).unwrap();
        let mut e = env();
        e.center_species = 8;
        for (i, nb) in e.neighbors.iter_mut().enumerate() {
            nb.z = if i % 2 == 0 { 1 } else { 8 };
        }
        let (v, g) = b.eval_with_gradients(&e).unwrap();
        assert_eq!(v, b.eval(&e).unwrap());
        let h = 1e-6;
        for j in 0..e.neighbors.len() {
            for c in 0..3 {
                let mut ep = e.clone();
                ep.neighbors[j].r[c] += h;
                let mut em = e.clone();
                em.neighbors[j].r[c] -= h;
                let vp = b.eval(&ep).unwrap();
                let vm = b.eval(&em).unwrap();
                for i in 0..v.len() {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((fd - g[i][j][c]).abs() < 1e-6 * (1.0 + fd.abs()), "i={i} j={j} c={c} {fd} vs {}", g[i][j][c]);
                }
            }
        }
    }

    #[test]
    fn sign_defect_breaks_invariance() {
        let mut lim = SpecLimits::new(3, 8.0);
        lim.species = vec![0];
        let bad_cache = CouplingCache::default();
        // the defect hook is thread-local, so fill the cache on this thread first
        with_sign_defect(|| {
            for t in enumerate_tuples(&lim) {
                bad_cache.get(&t).unwrap();
            }
        });
        let spec = generate_spec(&lim, &bad_cache).unwrap();
        let mut b = RpiBasis::new(spec, RadialParams::new(0, 1.0, 4.0), &bad_cache).unwrap();
        b.check_imag = false;
        let e = env();
        let v = b.eval(&e).unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), 0.9);
        let mut e2 = e.clone();
        for nb in &mut e2.neighbors {
            nb.r = rot * nb.r;
        }
        let v2 = b.eval(&e2).unwrap();
        let worst = v.iter().zip(&v2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst > 1e-6, "defect left the basis invariant ({worst})");
    }

    #[test]
    fn empty_environment_gives_zero_for_higher_orders() {
        let b = small_basis(3, 6.0, vec![0]);
        let e = Environment::from_vectors(0, &[], &[]);
        let v = b.eval(&e).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        let (_, g) = b.eval_with_gradients(&e).unwrap();
        assert!(g.iter().all(|r| r.is_empty()));
    }
}
