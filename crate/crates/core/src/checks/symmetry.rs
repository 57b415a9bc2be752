use super::{timed, CheckOutcome};
use crate::basis::{enumerate_tuples, generate_spec, RpiBasis, SpecLimits};
use crate::coupling::cg::with_sign_defect;
use crate::coupling::CouplingCache;
use crate::cyl::{enumerate_cyl_keys, BondEnvironment, CylBasis, CylKey, CylNeighbor};
use crate::error::Result;
use crate::geom::Environment;
use crate::radial::RadialParams;
use crate::synth::{random_environment, random_isometry};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct InvarianceParams {
    pub max_order: usize,
    pub max_degree: f64,
    pub n_envs: usize,
    pub min_neighbors: usize,
    pub max_neighbors: usize,
    /// Builds the coupling blocks with a corrupted Clebsch–Gordan sign (negative control).
    pub sign_defect: bool,
}

impl Default for InvarianceParams {
    fn default() -> Self {
        InvarianceParams { max_order: 5, max_degree: 12.0, n_envs: 200, min_neighbors: 2, max_neighbors: 10, sign_defect: false }
    }
}

pub const INVARIANCE_TOL: f64 = 1e-9;

fn build_basis(limits: &SpecLimits, sign_defect: bool) -> Result<RpiBasis> {
    let cache = CouplingCache::default();
    if sign_defect {
        // the hook is thread-local: fill every block on this thread first
        with_sign_defect(|| enumerate_tuples(limits).iter().try_for_each(|t| cache.get(t).map(|_| ())))?;
    }
    let spec = generate_spec(limits, &cache)?;
    let mut b = RpiBasis::new(spec, RadialParams::new(0, 1.0, 3.0), &cache)?;
    b.check_imag = !sign_defect;
    Ok(b)
}

fn transformed<R: Rng>(rng: &mut R, env: &Environment) -> Environment {
    let q = random_isometry(rng);
    let mut out = env.clone();
    out.neighbors.shuffle(rng);
    for nb in &mut out.neighbors {
        nb.r = q * nb.r;
    }
    out
}

/// Worst `|B(gR) − B(R)| / (1 + |B(R)|)` over random environments and isometries.
fn worst_violation<R: Rng>(rng: &mut R, b: &RpiBasis, n_envs: usize, nmin: usize, nmax: usize) -> Result<f64> {
    let species = b.spec.species().to_vec();
    let mut worst: f64 = 0.0;
    for _ in 0..n_envs {
        let j = rng.gen_range(nmin..=nmax);
        let env = random_environment(rng, j, &species, 0.75, 2.95);
        let v = b.eval(&env)?;
        let w = b.eval(&transformed(rng, &env))?;
        for (x, y) in v.iter().zip(&w) {
            worst = worst.max((x - y).abs() / (1.0 + x.abs()));
        }
    }
    Ok(worst)
}

/// Rotations, reflections and permutations leave every RPI basis value unchanged.
/// With `sign_defect` the suite is expected to fail.
pub fn invariance(p: &InvarianceParams, seed: u64) -> Result<CheckOutcome> {
    timed("invariance", seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut limits = SpecLimits::new(p.max_order, p.max_degree);
        let b = build_basis(&limits, p.sign_defect)?;
        let w1 = worst_violation(&mut rng, &b, p.n_envs, p.min_neighbors, p.max_neighbors)?;
        // a smaller two-species basis to exercise species-aware labels
        limits.species = vec![0, 1];
        limits.max_order = p.max_order.min(3);
        limits.max_degree = p.max_degree.min(8.0);
        let b2 = build_basis(&limits, p.sign_defect)?;
        let w2 = worst_violation(&mut rng, &b2, p.n_envs / 4, p.min_neighbors, p.max_neighbors)?;
        let worst = w1.max(w2);
        Ok((
            worst <= INVARIANCE_TOL,
            format!(
                "N≤{} deg≤{} ({} functions) over {} environments: worst {:.2e}; two species ({} functions): {:.2e}; tol {:.0e}{}",
                p.max_order,
                p.max_degree,
                b.len_per_center(),
                p.n_envs,
                w1,
                b2.len_per_center(),
                w2,
                INVARIANCE_TOL,
                if p.sign_defect { " [sign defect injected]" } else { "" }
            ),
        ))
    })
}

pub const CYL_TOL: f64 = 1e-10;

fn random_bond<R: Rng>(rng: &mut R) -> BondEnvironment {
    let n = rng.gen_range(2..9);
    BondEnvironment {
        r: rng.gen_range(1.0..3.5),
        neighbors: (0..n)
            .map(|_| CylNeighbor { rho: rng.gen_range(0.0..2.8), theta: rng.gen_range(-PI..PI), z: rng.gen_range(-2.8..2.8) })
            .collect(),
    }
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + x.abs())).fold(0.0, f64::max)
}

/// Axis rotation, `z` and `θ` reflections and permutations on random bond environments,
/// plus the rotation negative control for keys with `Σ k^θ ≠ 0`.
pub fn cylindrical(n_envs: usize, seed: u64) -> Result<CheckOutcome> {
    timed("cyl", seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = CylBasis::new(6, 1.0, 4.0, 3.0, 3.0)?;
        let keys = enumerate_cyl_keys(3, 6, 3);
        let bad = [CylKey { n: 0, k: vec![(0, 1, 0), (1, 1, 0)] }, CylKey { n: 1, k: vec![(0, 2, 1), (1, 0, 1)] }];
        let rejected = bad.iter().all(|k| k.validate().is_err());
        let (mut rot, mut zref, mut tref, mut perm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut broken = 0usize;
        for _ in 0..n_envs {
            let e = random_bond(&mut rng);
            let v = basis.eval(&e, &keys)?;
            let phi = rng.gen_range(-PI..PI);
            let mut g = e.clone();
            g.neighbors.iter_mut().for_each(|q| q.theta += phi);
            rot = rot.max(max_rel(&v, &basis.eval(&g, &keys)?));
            let vb = basis.eval_unchecked(&e, &bad)?;
            let wb = basis.eval_unchecked(&g, &bad)?;
            if max_rel(&vb, &wb) > 1e-8 {
                broken += 1;
            }
            let mut g = e.clone();
            g.neighbors.iter_mut().for_each(|q| q.z = -q.z);
            zref = zref.max(max_rel(&v, &basis.eval(&g, &keys)?));
            let mut g = e.clone();
            g.neighbors.iter_mut().for_each(|q| q.theta = -q.theta);
            tref = tref.max(max_rel(&v, &basis.eval(&g, &keys)?));
            let mut g = e.clone();
            g.neighbors.shuffle(&mut rng);
            perm = perm.max(max_rel(&v, &basis.eval(&g, &keys)?));
        }
        let worst = rot.max(zref).max(tref).max(perm);
        // the control must be visibly broken on almost every sample
        let control_ok = broken * 10 >= 9 * n_envs;
        Ok((
            worst <= CYL_TOL && control_ok && rejected,
            format!(
                "{} keys, {n_envs} bonds: rotation {rot:.1e}, z-reflection {zref:.1e}, θ-reflection {tref:.1e}, permutation {perm:.1e} (tol {CYL_TOL:.0e}); Σk^θ≠0 control broken on {broken}/{n_envs}{}",
                keys.len(),
                if rejected { "" } else { "; invalid keys were accepted" }
            ),
        ))
    })
}
