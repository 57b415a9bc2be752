//! Configurations, neighbour environments and training-data ingestion.

mod elements;
pub mod xyz;

pub use elements::{atomic_number, symbol};
pub use xyz::{load_training_set, read_xyz, write_xyz};

use crate::error::{AceError, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub positions: Vec<Vector3<f64>>,
    pub species: Vec<u32>,
    /// Lattice vectors as rows.
    pub cell: Option<Matrix3<f64>>,
    pub periodic: [bool; 3],
    pub energy: Option<f64>,
    pub forces: Option<Vec<Vector3<f64>>>,
    /// Parsed when present; not used by the fitting pipeline.
    pub virial: Option<Matrix3<f64>>,
}

impl Configuration {
    pub fn cluster(positions: Vec<Vector3<f64>>, species: Vec<u32>) -> Self {
        Configuration {
            positions,
            species,
            cell: None,
            periodic: [false; 3],
            energy: None,
            forces: None,
            virial: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic.iter().any(|&p| p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.species.len() != self.positions.len() {
            return Err(AceError::InvalidConfig(format!(
                "{} positions but {} species",
                self.positions.len(),
                self.species.len()
            )));
        }
        if let Some(f) = &self.forces {
            if f.len() != self.positions.len() {
                return Err(AceError::InvalidConfig(format!(
                    "{} positions but {} forces",
                    self.positions.len(),
                    f.len()
                )));
            }
        }
        if let Some(c) = &self.cell {
            if c.determinant().abs() < 1e-12 {
                return Err(AceError::InvalidConfig("cell is singular".into()));
            }
        }
        if self.is_periodic() && self.cell.is_none() {
            return Err(AceError::MissingCell);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    /// `r_j − r_ι` including the image shift.
    pub r: Vector3<f64>,
    pub z: u32,
    /// Atom index of the neighbour in the parent configuration.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Environment {
    pub center_species: u32,
    pub center: usize,
    pub neighbors: Vec<Neighbor>,
}

impl Environment {
    /// Environment from bare relative positions, for tests and tools.
    pub fn from_vectors(center_species: u32, rs: &[Vector3<f64>], zs: &[u32]) -> Self {
        Environment {
            center_species,
            center: 0,
            neighbors: rs
                .iter()
                .zip(zs)
                .enumerate()
                .map(|(i, (r, z))| Neighbor {
                    r: *r,
                    z: *z,
                    index: i + 1,
                })
                .collect(),
        }
    }
}

/// Image repeats needed along each lattice direction.
fn image_counts(cell: &Matrix3<f64>, periodic: [bool; 3], frac_span: [f64; 3], r_cut: f64) -> [i64; 3] {
    let a = [cell.row(0).transpose(), cell.row(1).transpose(), cell.row(2).transpose()];
    let vol = cell.determinant().abs();
    let mut n = [0i64; 3];
    for i in 0..3 {
        if !periodic[i] {
            continue;
        }
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let spacing = vol / a[j].cross(&a[k]).norm();
        n[i] = (r_cut / spacing + frac_span[i]).ceil() as i64;
    }
    n
}

pub fn neighbor_environments(config: &Configuration, r_cut: f64) -> Result<Vec<Environment>> {
    if !(r_cut > 0.0) {
        return Err(AceError::InvalidArgument(format!("r_cut must be positive, got {r_cut}")));
    }
    config.validate()?;
    let nat = config.len();
    let mut shifts: Vec<Vector3<f64>> = vec![Vector3::zeros()];
    if config.is_periodic() {
        let cell = config.cell.ok_or(AceError::MissingCell)?;
        let inv = cell
            .try_inverse()
            .ok_or_else(|| AceError::InvalidConfig("cell is singular".into()))?;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &config.positions {
            let f = inv.transpose() * p;
            for d in 0..3 {
                lo[d] = lo[d].min(f[d]);
                hi[d] = hi[d].max(f[d]);
            }
        }
        let span = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]].map(|v| if v.is_finite() { v } else { 0.0 });
        let n = image_counts(&cell, config.periodic, span, r_cut);
        shifts.clear();
        for a in -n[0]..=n[0] {
            for b in -n[1]..=n[1] {
                for c in -n[2]..=n[2] {
                    let s = cell.transpose() * Vector3::new(a as f64, b as f64, c as f64);
                    shifts.push(s);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(nat);
    for i in 0..nat {
        let mut nb: Vec<(f64, usize, Neighbor)> = Vec::new();
        for (si, s) in shifts.iter().enumerate() {
            for j in 0..nat {
                let r = config.positions[j] + s - config.positions[i];
                let d = r.norm();
                if d == 0.0 {
                    if j == i && s.norm() == 0.0 {
                        continue;
                    }
                    return Err(AceError::ZeroDistance(i, j));
                }
                if d < r_cut {
                    nb.push((
                        d,
                        si,
                        Neighbor {
                            r,
                            z: config.species[j],
                            index: j,
                        },
                    ));
                }
            }
        }
        nb.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.index.cmp(&b.2.index))
        });
        out.push(Environment {
            center_species: config.species[i],
            center: i,
            neighbors: nb.into_iter().map(|t| t.2).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn dimer(d: f64) -> Configuration {
        Configuration::cluster(vec![Vector3::zeros(), Vector3::new(0.0, 0.0, d)], vec![14, 14])
    }

    #[test]
    fn dimer_cases() {
        let e = neighbor_environments(&dimer(2.0), 3.0).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|e| e.neighbors.len() == 1));
        assert!((e[0].neighbors[0].r.norm() - 2.0).abs() < 1e-15);
        let e = neighbor_environments(&dimer(3.0), 3.0).unwrap();
        assert!(e.iter().all(|e| e.neighbors.is_empty()));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            neighbor_environments(&dimer(0.0), 3.0),
            Err(AceError::ZeroDistance(0, 1))
        ));
        let mut c = dimer(1.0);
        c.periodic = [true, false, false];
        assert!(matches!(neighbor_environments(&c, 3.0), Err(AceError::MissingCell)));
    }

    // Brute force over a fixed, generous image range.
    fn brute_counts(c: &Configuration, r_cut: f64, reach: i64) -> Vec<usize> {
        let cell = c.cell.unwrap();
        (0..c.len())
            .map(|i| {
                let mut k = 0;
                for a in -reach..=reach {
                    for b in -reach..=reach {
                        for d in -reach..=reach {
                            let s = cell.transpose() * Vector3::new(a as f64, b as f64, d as f64);
                            for j in 0..c.len() {
                                let r = (c.positions[j] + s - c.positions[i]).norm();
                                if r > 0.0 && r < r_cut {
                                    k += 1;
                                }
                            }
                        }
                    }
                }
                k
            })
            .collect()
    }

    #[test]
    fn simple_cubic_has_six_neighbours() {
        let a = 2.7;
        let mut c = Configuration::cluster(vec![Vector3::new(0.1, 0.2, 0.3)], vec![0]);
        c.cell = Some(Matrix3::identity() * a);
        c.periodic = [true; 3];
        let e = neighbor_environments(&c, 1.1 * a).unwrap();
        assert_eq!(e[0].neighbors.len(), 6);
        assert_eq!(brute_counts(&c, 1.1 * a, 2), vec![6]);
    }

    #[test]
    fn skewed_cell_matches_brute_force() {
        let cell = Matrix3::new(3.0, 0.0, 0.0, 1.4, 2.6, 0.0, 0.7, 0.9, 2.2);
        let mut c = Configuration::cluster(
            vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.1, 0.7, 0.9), Vector3::new(4.0, 3.0, 2.5)],
            vec![1, 2, 1],
        );
        c.cell = Some(cell);
        c.periodic = [true; 3];
        let e = neighbor_environments(&c, 4.5).unwrap();
        let ours: Vec<usize> = e.iter().map(|e| e.neighbors.len()).collect();
        assert_eq!(ours, brute_counts(&c, 4.5, 6));
        for env in &e {
            assert!(env.neighbors.windows(2).all(|w| w[0].r.norm() <= w[1].r.norm()));
        }
    }

    fn arb_cluster() -> impl Strategy<Value = Vec<Vector3<f64>>> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64), 1..12)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Vector3::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn pair_count_identity(pos in arb_cluster()) {
            let n = pos.len();
            let c = Configuration::cluster(pos.clone(), vec![0; n]);
            let e = neighbor_environments(&c, 2.5).unwrap();
            let total: usize = e.iter().map(|e| e.neighbors.len()).sum();
            let mut pairs = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if (pos[i] - pos[j]).norm() < 2.5 {
                        pairs += 1;
                    }
                }
            }
            prop_assert_eq!(total, 2 * pairs);
        }

        #[test]
        fn distance_multisets_invariant(pos in arb_cluster(), ax in -1.0..1.0f64, ay in -1.0..1.0f64, t in -5.0..5.0f64) {
            let n = pos.len();
            let q = Rotation3::from_euler_angles(ax, ay, 0.3 * t);
            let shift = Vector3::new(t, -t, 0.5);
            let c0 = Configuration::cluster(pos.clone(), vec![0; n]);
            let c1 = Configuration::cluster(pos.iter().map(|p| q * p + shift).collect(), vec![0; n]);
            let e0 = neighbor_environments(&c0, 2.5).unwrap();
            let e1 = neighbor_environments(&c1, 2.5).unwrap();
            for (a, b) in e0.iter().zip(&e1) {
                prop_assert_eq!(a.neighbors.len(), b.neighbors.len());
                for (x, y) in a.neighbors.iter().zip(&b.neighbors) {
                    prop_assert!((x.r.norm() - y.r.norm()).abs() < 1e-12);
                }
            }
        }
    }
}
