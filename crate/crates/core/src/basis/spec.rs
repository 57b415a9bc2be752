use crate::coupling::{CouplingCache, Label};
use crate::error::{AceError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeKind {
    /// `Σ_i n_i + l_i`
    Total,
    /// `max_i max(n_i, l_i)`
    Tensor,
    /// `Σ_i n_i + w_l l_i`
    WeightedTotal { wl: f64 },
}

impl Default for DegreeKind {
    fn default() -> Self {
        DegreeKind::WeightedTotal { wl: 2.0 }
    }
}

impl DegreeKind {
    pub fn single(&self, n: usize, l: usize) -> f64 {
        match *self {
            DegreeKind::Total => (n + l) as f64,
            DegreeKind::Tensor => n.max(l) as f64,
            DegreeKind::WeightedTotal { wl } => n as f64 + wl * l as f64,
        }
    }

    pub fn combine(&self, acc: f64, d: f64) -> f64 {
        match self {
            DegreeKind::Tensor => acc.max(d),
            _ => acc + d,
        }
    }

    pub fn of(&self, labels: &[Label]) -> f64 {
        labels
            .iter()
            .fold(0.0, |a, p| self.combine(a, self.single(p.n as usize, p.l as usize)))
    }

    /// Largest `l` with a single-particle degree within `max_degree`.
    pub fn l_bound(&self, max_degree: f64) -> usize {
        let mut l = 0;
        while self.single(0, l + 1) <= max_degree + 1e-12 {
            l += 1;
        }
        l
    }

    pub fn n_bound(&self, max_degree: f64) -> usize {
        let mut n = 0;
        while self.single(n + 1, 0) <= max_degree + 1e-12 {
            n += 1;
        }
        n
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecLimits {
    /// Atomic numbers; position in this list is the species index `z`.
    pub species: Vec<u32>,
    pub max_order: usize,
    pub max_degree: f64,
    #[serde(default)]
    pub degree: DegreeKind,
    #[serde(default)]
    pub l_max: Option<usize>,
    #[serde(default)]
    pub n_max: Option<usize>,
}

impl SpecLimits {
    pub fn new(max_order: usize, max_degree: f64) -> Self {
        SpecLimits {
            species: vec![0],
            max_order,
            max_degree,
            degree: DegreeKind::default(),
            l_max: None,
            n_max: None,
        }
    }

    pub fn l_max(&self) -> usize {
        let b = self.degree.l_bound(self.max_degree);
        self.l_max.map_or(b, |l| l.min(b))
    }

    pub fn n_max(&self) -> usize {
        let b = self.degree.n_bound(self.max_degree);
        self.n_max.map_or(b, |n| n.min(b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecEntry {
    pub labels: Vec<Label>,
    /// Number of RPI functions `n_{nl}` in this block.
    pub n_rpi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub limits: SpecLimits,
    pub l_max: usize,
    pub n_max: usize,
    /// Tuples shared by every centre species, in generation order.
    pub tuples: Vec<SpecEntry>,
}

impl BasisSpec {
    pub fn species(&self) -> &[u32] {
        &self.limits.species
    }

    pub fn n_species(&self) -> usize {
        self.limits.species.len()
    }

    pub fn species_index(&self, z: u32) -> Result<usize> {
        self.limits
            .species
            .iter()
            .position(|&s| s == z)
            .ok_or_else(|| AceError::Species(format!("species {z} not in basis {:?}", self.limits.species)))
    }

    /// Basis functions per centre species.
    pub fn len_per_center(&self) -> usize {
        self.tuples.iter().map(|t| t.n_rpi).sum()
    }

    pub fn len(&self) -> usize {
        self.len_per_center() * self.n_species()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sub-spec keeping only tuples accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&SpecEntry) -> bool) -> BasisSpec {
        BasisSpec {
            tuples: self.tuples.iter().filter(|t| keep(t)).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.tuples {
            if t.labels.windows(2).any(|w| w[0] > w[1]) {
                return Err(AceError::Unordered(format!("{:?}", t.labels)));
            }
            if t.labels.iter().map(|p| p.l as usize).sum::<usize>() % 2 == 1 {
                return Err(AceError::InvalidArgument(format!("odd Σl in {:?}", t.labels)));
            }
            if t.labels.len() > self.limits.max_order {
                return Err(AceError::InvalidArgument(format!("order too high: {:?}", t.labels)));
            }
            if self.limits.degree.of(&t.labels) > self.limits.max_degree + 1e-12 {
                return Err(AceError::InvalidArgument(format!("degree too high: {:?}", t.labels)));
            }
            if t.labels.iter().any(|p| p.z as usize >= self.n_species() || p.l as usize > self.l_max || p.n as usize > self.n_max) {
                return Err(AceError::InvalidArgument(format!("label out of range: {:?}", t.labels)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// All ordered label tuples within the limits with `Σl` even (no rank filter).
pub fn enumerate_tuples(limits: &SpecLimits) -> Vec<Vec<Label>> {
    let (lmax, nmax) = (limits.l_max(), limits.n_max());
    let deg = limits.degree;
    let md = limits.max_degree + 1e-12;
    let mut singles = Vec::new();
    for z in 0..limits.species.len() {
        for n in 0..=nmax {
            for l in 0..=lmax {
                if deg.single(n, l) <= md {
                    singles.push(Label::new(z, n, l));
                }
            }
        }
    }
    singles.sort();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(
        start: usize,
        acc: f64,
        singles: &[Label],
        deg: DegreeKind,
        md: f64,
        nmax_order: usize,
        cur: &mut Vec<Label>,
        out: &mut Vec<Vec<Label>>,
    ) {
        for i in start..singles.len() {
            let p = singles[i];
            let d = deg.combine(acc, deg.single(p.n as usize, p.l as usize));
            if d > md {
                continue;
            }
            cur.push(p);
            if cur.iter().map(|q| q.l as usize).sum::<usize>() % 2 == 0 {
                out.push(cur.clone());
            }
            if cur.len() < nmax_order {
                rec(i, d, singles, deg, md, nmax_order, cur, out);
            }
            cur.pop();
        }
    }
    rec(0, 0.0, &singles, deg, md, limits.max_order, &mut cur, &mut out);
    // order first, then lexicographic
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

pub fn generate_spec(limits: &SpecLimits, cache: &CouplingCache) -> Result<BasisSpec> {
    if !(limits.max_degree > 0.0) || limits.max_order < 1 {
        return Err(AceError::InvalidArgument(
            "need max_degree > 0 and max_order ≥ 1".into(),
        ));
    }
    if limits.species.is_empty() {
        return Err(AceError::InvalidArgument("no species".into()));
    }
    if limits.max_order > super::keys::MAX_ORDER {
        return Err(AceError::InvalidArgument(format!(
            "max_order {} exceeds supported {}",
            limits.max_order,
            super::keys::MAX_ORDER
        )));
    }
    let tuples = enumerate_tuples(limits);
    let counts: Vec<Result<usize>> = tuples
        .par_iter()
        .map(|t| Ok(cache.get(t)?.ncols()))
        .collect();
    let mut entries = Vec::new();
    for (t, c) in tuples.into_iter().zip(counts) {
        let c = c?;
        if c > 0 {
            entries.push(SpecEntry { labels: t, n_rpi: c });
        }
    }
    Ok(BasisSpec {
        limits: limits.clone(),
        l_max: limits.l_max(),
        n_max: limits.n_max(),
        tuples: entries,
    })
}
