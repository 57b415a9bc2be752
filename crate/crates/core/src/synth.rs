//! Random geometry and a synthetic body-ordered reference PES.

use crate::basis::RpiBasis;
use crate::error::Result;
use crate::geom::{neighbor_environments, Configuration, Environment, Neighbor};
use crate::potential::{accumulate_site, Potential};
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_direction<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let n: f64 = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> Rotation3<f64> {
    let q = Vector4::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q)).to_rotation_matrix()
}

/// Random element of O(3): a rotation, reflected with probability ½.
pub fn random_isometry<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let q = random_rotation(rng).into_inner();
    if rng.gen_bool(0.5) {
        -q
    } else {
        q
    }
}

/// `n` neighbours at radii uniform in `[r_min, r_max)`, species drawn from `species`.
pub fn random_environment<R: Rng>(rng: &mut R, n: usize, species: &[u32], r_min: f64, r_max: f64) -> Environment {
    Environment {
        center_species: species[rng.gen_range(0..species.len())],
        center: 0,
        neighbors: (0..n)
            .map(|j| Neighbor {
                r: random_direction(rng) * rng.gen_range(r_min..r_max),
                z: species[rng.gen_range(0..species.len())],
                index: j + 1,
            })
            .collect(),
    }
}

/// Atoms in a ball of radius `radius` with pairwise distances at least `min_dist`.
pub fn random_cluster<R: Rng>(rng: &mut R, n: usize, species: &[u32], min_dist: f64, radius: f64) -> Configuration {
    let mut pos: Vec<Vector3<f64>> = Vec::with_capacity(n);
    let mut tries = 0usize;
    let mut radius = radius;
    while pos.len() < n {
        tries += 1;
        if tries % 10_000 == 0 {
            radius *= 1.1;
        }
        let p = random_direction(rng) * radius * rng.gen::<f64>().cbrt();
        if pos.iter().all(|q| (q - p).norm() >= min_dist) {
            pos.push(p);
        }
    }
    let sp = (0..n).map(|_| species[rng.gen_range(0..species.len())]).collect();
    Configuration::cluster(pos, sp)
}

/// Pair term `f(r) = amp · exp(−((r − r_c)/w)²) · (1 − r/r_cut)²` outside any polynomial span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub r_cut: f64,
}

impl Perturbation {
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r >= self.r_cut || self.amplitude == 0.0 {
            return (0.0, 0.0);
        }
        let u = (r - self.center) / self.width;
        let g = (-u * u).exp();
        let dg = -2.0 * u / self.width * g;
        let c = (1.0 - r / self.r_cut).powi(2);
        let dc = -2.0 * (1.0 - r / self.r_cut) / self.r_cut;
        (self.amplitude * g * c, self.amplitude * (dg * c + g * dc))
    }
}

/// Reference PES: an ACE potential plus a pair perturbation.
#[derive(Debug)]
pub struct SyntheticTruth {
    pub potential: Potential,
    pub perturbation: Perturbation,
}

impl SyntheticTruth {
    /// Random coefficients damped by `1 / (1 + i)^decay` along the basis order.
    pub fn random<R: Rng>(basis: &RpiBasis, rng: &mut R, decay: f64, perturbation: f64) -> Result<Self> {
        let k = basis.len_per_center();
        let c: Vec<f64> = (0..k * basis.n_species())
            .map(|i| rng.gen_range(-1.0..1.0) / (1.0 + (i % k) as f64).powf(decay))
            .collect();
        let v0 = (0..basis.n_species()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(SyntheticTruth {
            potential: Potential::from_basis(basis, &c, v0)?,
            perturbation: Perturbation {
                amplitude: perturbation,
                center: 0.6 * basis.r_cut(),
                width: 0.25 * basis.r_cut(),
                r_cut: basis.r_cut(),
            },
        })
    }

    /// Energy and forces.
    pub fn evaluate(&self, config: &Configuration) -> Result<(f64, Vec<Vector3<f64>>)> {
        let ev = self.potential.evaluate(config)?;
        let (mut e, mut f) = (ev.energy, ev.forces);
        if self.perturbation.amplitude != 0.0 {
            let mut w = Matrix3::zeros();
            for env in neighbor_environments(config, self.perturbation.r_cut)? {
                let g: Vec<Vector3<f64>> = env
                    .neighbors
                    .iter()
                    .map(|nb| {
                        let r = nb.r.norm();
                        let (v, dv) = self.perturbation.eval(r);
                        e += 0.5 * v;
                        nb.r * (0.5 * dv / r)
                    })
                    .collect();
                accumulate_site(&env, &g, &mut f, &mut w);
            }
        }
        Ok((e, f))
    }

    pub fn label(&self, config: &mut Configuration) -> Result<()> {
        let (e, f) = self.evaluate(config)?;
        config.energy = Some(e);
        config.forces = Some(f);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub n_frames: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub min_dist: f64,
    /// Number density used to size the cluster ball.
    pub density: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { n_frames: 20, min_atoms: 3, max_atoms: 8, min_dist: 0.9, density: 0.15 }
    }
}

pub fn generate_dataset<R: Rng>(truth: &SyntheticTruth, cfg: &DatasetConfig, rng: &mut R) -> Result<Vec<Configuration>> {
    let species = truth.potential.spec.species().to_vec();
    (0..cfg.n_frames)
        .map(|_| {
            let n = rng.gen_range(cfg.min_atoms..=cfg.max_atoms);
            let radius = (3.0 * n as f64 / (4.0 * std::f64::consts::PI * cfg.density)).cbrt();
            let mut c = random_cluster(rng, n, &species, cfg.min_dist, radius);
            truth.label(&mut c)?;
            Ok(c)
        })
        .collect()
}
