//! Site potentials in contracted form `V = V_0 + Re Σ_k a_k A_k`, with forces and virials.

use crate::basis::keys::{order, pack, unpack, Key};
use crate::basis::{BasisSpec, FlatIndex, OneParticleBasis, RpiBasis, StandardEvaluator};
use crate::dag::Graph;
use crate::error::{AceError, Result};
use crate::geom::{neighbor_environments, Configuration, Environment};
use crate::radial::{RadialBasis, RadialParams};
use crate::CONVENTION;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    Standard,
    #[default]
    Recursive,
}

/// Contracted coefficients for one centre species, keys sorted ascending.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteTerms {
    pub keys: Vec<Key>,
    pub a: Vec<f64>,
}

impl SiteTerms {
    /// Merges duplicate keys and sorts; applying it twice changes nothing.
    pub fn contract(pairs: impl IntoIterator<Item = (Key, f64)>) -> Self {
        let mut map: FxHashMap<Key, f64> = FxHashMap::default();
        for (k, v) in pairs {
            *map.entry(k).or_insert(0.0) += v;
        }
        let mut v: Vec<(Key, f64)> = map.into_iter().collect();
        v.sort_unstable_by(|x, y| order(x.0).cmp(&order(y.0)).then(x.0.cmp(&y.0)));
        SiteTerms {
            keys: v.iter().map(|p| p.0).collect(),
            a: v.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// `a_k = Σ_{m ↦ k} Σ_i c_i U_{m i}` for one centre species (`c` has `len_per_center` entries).
pub fn contract_coefficients(basis: &RpiBasis, c: &[f64]) -> SiteTerms {
    assert_eq!(c.len(), basis.len_per_center());
    let pairs = basis.tuples.iter().flat_map(|t| {
        let nc = t.block.ncols();
        t.keys.iter().enumerate().map(move |(mi, &k)| {
            let v: f64 = (0..nc).map(|i| c[t.offset + i] * t.block.u[(mi, i)]).sum();
            (k, v)
        })
    });
    SiteTerms::contract(pairs)
}

#[derive(Debug)]
struct Site {
    standard: StandardEvaluator,
    graph: Graph,
}

impl Site {
    fn new(t: &SiteTerms) -> Self {
        Site {
            standard: StandardEvaluator::new(t.keys.clone(), t.a.clone()),
            graph: Graph::build(&t.keys, &t.a),
        }
    }
}

/// Energy, forces and virial of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub forces: Vec<Vector3<f64>>,
    pub virial: Matrix3<f64>,
}

#[derive(Debug)]
pub struct Potential {
    pub spec: BasisSpec,
    pub radial: RadialParams,
    /// Constant per centre species.
    pub v0: Vec<f64>,
    pub terms: Vec<SiteTerms>,
    /// Basis-form coefficients, kept for refitting when known.
    pub c: Option<Vec<f64>>,
    pub evaluator: Evaluator,
    pub units: String,
    onep: OneParticleBasis,
    sites: Vec<Site>,
}

/// Adds per-neighbour site gradients `g_j = ∂V/∂r_j` to forces and virial.
pub fn accumulate_site(env: &Environment, g: &[Vector3<f64>], forces: &mut [Vector3<f64>], virial: &mut Matrix3<f64>) {
    for (nb, gj) in env.neighbors.iter().zip(g) {
        forces[nb.index] -= gj;
        forces[env.center] += gj;
        *virial -= nb.r * gj.transpose();
    }
}

impl Potential {
    pub fn new(spec: BasisSpec, radial: RadialParams, v0: Vec<f64>, terms: Vec<SiteTerms>, evaluator: Evaluator) -> Result<Self> {
        let ns = spec.n_species();
        if v0.len() != ns || terms.len() != ns {
            return Err(AceError::Species(format!(
                "{ns} species but {} constants and {} coefficient sets",
                v0.len(),
                terms.len()
            )));
        }
        let mut radial = radial;
        radial.n_max = spec.n_max;
        let onep = OneParticleBasis::new(RadialBasis::new(radial.clone())?, spec.l_max, spec.species().to_vec());
        for t in &terms {
            if t.keys.len() != t.a.len() {
                return Err(AceError::InvalidArgument("keys and coefficients differ in length".into()));
            }
            for &k in &t.keys {
                if unpack(k).iter().any(|&i| i as usize >= onep.len()) || order(k) == 0 {
                    return Err(AceError::InvalidKey(format!("{:?}", unpack(k))));
                }
            }
        }
        let sites = terms.iter().map(Site::new).collect();
        Ok(Potential {
            spec,
            radial,
            v0,
            terms,
            c: None,
            evaluator,
            units: "eV/Å".into(),
            onep,
            sites,
        })
    }

    /// Potential from basis coefficients laid out centre species by centre species.
    pub fn from_basis(basis: &RpiBasis, c: &[f64], v0: Vec<f64>) -> Result<Self> {
        let k = basis.len_per_center();
        if c.len() != k * basis.n_species() {
            return Err(AceError::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                k * basis.n_species(),
                c.len()
            )));
        }
        let terms = (0..basis.n_species()).map(|z| contract_coefficients(basis, &c[z * k..(z + 1) * k])).collect();
        let mut p = Potential::new(basis.spec.clone(), basis.onep.radial.params().clone(), v0, terms, Evaluator::default())?;
        p.c = Some(c.to_vec());
        Ok(p)
    }

    pub fn flat(&self) -> FlatIndex {
        self.onep.flat
    }

    pub fn onep(&self) -> &OneParticleBasis {
        &self.onep
    }

    pub fn r_cut(&self) -> f64 {
        self.radial.r_cut
    }

    pub fn graph(&self, center: usize) -> &Graph {
        &self.sites[center].graph
    }

    pub fn with_evaluator(mut self, e: Evaluator) -> Self {
        self.evaluator = e;
        self
    }

    pub fn site_energy(&self, env: &Environment) -> Result<f64> {
        let c = self.onep.species_index(env.center_species)?;
        let a = self.onep.project(env)?;
        let s = &self.sites[c];
        let v = match self.evaluator {
            Evaluator::Standard => s.standard.eval(&a),
            Evaluator::Recursive => s.graph.forward(&a)?.value,
        };
        Ok(self.v0[c] + v)
    }

    /// Site energy and `∂V/∂r_j` per neighbour.
    pub fn site_energy_with_gradients(&self, env: &Environment) -> Result<(f64, Vec<Vector3<f64>>)> {
        let c = self.onep.species_index(env.center_species)?;
        let d = self.onep.project_with_gradients(env)?;
        let s = &self.sites[c];
        let mut w = vec![Complex64::new(0.0, 0.0); self.onep.len()];
        let v = match self.evaluator {
            Evaluator::Standard => s.standard.eval_adjoint(&d.a, &mut w),
            Evaluator::Recursive => {
                let st = s.graph.forward(&d.a)?;
                s.graph.backward(&st, &mut w);
                st.value
            }
        };
        let g = d.gradients(&w, self.onep.flat.block());
        Ok((self.v0[c] + v, g))
    }

    pub fn energy(&self, config: &Configuration) -> Result<f64> {
        let envs = neighbor_environments(config, self.r_cut())?;
        let es: Vec<f64> = envs.par_iter().map(|e| self.site_energy(e)).collect::<Result<_>>()?;
        Ok(es.iter().sum())
    }

    pub fn evaluate(&self, config: &Configuration) -> Result<Evaluation> {
        let envs = neighbor_environments(config, self.r_cut())?;
        let sites: Vec<(f64, Vec<Vector3<f64>>)> = envs
            .par_iter()
            .map(|e| self.site_energy_with_gradients(e))
            .collect::<Result<_>>()?;
        let mut forces = vec![Vector3::zeros(); config.len()];
        let mut virial = Matrix3::zeros();
        let mut energy = 0.0;
        for (env, (e, g)) in envs.iter().zip(&sites) {
            energy += e;
            accumulate_site(env, g, &mut forces, &mut virial);
        }
        Ok(Evaluation { energy, forces, virial })
    }

    pub fn forces(&self, config: &Configuration) -> Result<Vec<Vector3<f64>>> {
        Ok(self.evaluate(config)?.forces)
    }

    pub fn virial(&self, config: &Configuration) -> Result<Matrix3<f64>> {
        Ok(self.evaluate(config)?.virial)
    }

    pub fn to_json(&self) -> Result<String> {
        let flat = self.onep.flat;
        let coefficients = self
            .terms
            .iter()
            .map(|t| t.keys.iter().zip(&t.a).map(|(&k, &a)| (key_string(k, &flat), a)).collect())
            .collect();
        let file = PotentialFile {
            format: FORMAT_VERSION,
            fingerprint: CONVENTION.to_string(),
            symmetry: "spherical".into(),
            units: self.units.clone(),
            spec_hash: self.spec.hash(),
            spec: self.spec.clone(),
            radial: self.radial.clone(),
            evaluator: self.evaluator,
            v0: self.v0.clone(),
            coefficients,
            c: self.c.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let head: FileHead = serde_json::from_str(text)?;
        if head.format != FORMAT_VERSION {
            return Err(AceError::Version(head.format));
        }
        if head.fingerprint != CONVENTION {
            return Err(AceError::Fingerprint {
                expected: CONVENTION.into(),
                found: head.fingerprint,
            });
        }
        let f: PotentialFile = serde_json::from_str(text)?;
        if f.spec.hash() != f.spec_hash {
            return Err(AceError::Fingerprint {
                expected: f.spec_hash,
                found: f.spec.hash(),
            });
        }
        let flat = FlatIndex {
            n_species: f.spec.n_species(),
            n_max: f.spec.n_max,
            l_max: f.spec.l_max,
        };
        let terms = f
            .coefficients
            .iter()
            .map(|m| {
                let pairs = m.iter().map(|(s, &a)| Ok((parse_key(s, &flat)?, a))).collect::<Result<Vec<_>>>()?;
                Ok(SiteTerms::contract(pairs))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = Potential::new(f.spec, f.radial, f.v0, terms, f.evaluator)?;
        p.c = f.c;
        p.units = f.units;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| AceError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AceError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Deserialize)]
struct FileHead {
    format: u32,
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct PotentialFile {
    format: u32,
    fingerprint: String,
    symmetry: String,
    units: String,
    spec_hash: String,
    spec: BasisSpec,
    radial: RadialParams,
    evaluator: Evaluator,
    v0: Vec<f64>,
    /// Per centre species: `"z,n,l,m;z,n,l,m;..." → a`.
    coefficients: Vec<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
}

pub fn key_string(k: Key, flat: &FlatIndex) -> String {
    unpack(k)
        .iter()
        .map(|&i| {
            let (z, n, l, m) = flat.decode(i as usize);
            format!("{z},{n},{l},{m}")
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_key(s: &str, flat: &FlatIndex) -> Result<Key> {
    let bad = || AceError::InvalidKey(s.to_string());
    let mut idx = Vec::new();
    for part in s.split(';') {
        let v: Vec<i64> = part.split(',').map(|x| x.trim().parse::<i64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let [z, n, l, m] = v[..] else { return Err(bad()) };
        if z < 0 || n < 0 || l < 0 || z as usize >= flat.n_species || n as usize > flat.n_max || l as usize > flat.l_max || m.abs() > l {
            return Err(bad());
        }
        idx.push(flat.index(z as usize, n as usize, l as usize, m as i32) as u16);
    }
    if idx.is_empty() || idx.len() > crate::basis::keys::MAX_ORDER || idx.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad());
    }
    Ok(pack(&idx))
}
