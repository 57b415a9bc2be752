use super::{ri_block, Method};
use crate::error::{AceError, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// One-particle label `(z, n, l)`; `z` is a species index, not an atomic number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub z: u16,
    pub n: u16,
    pub l: u16,
}

impl Label {
    pub fn new(z: usize, n: usize, l: usize) -> Self {
        Label {
            z: z as u16,
            n: n as u16,
            l: l as u16,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RpiBlock {
    pub labels: Vec<Label>,
    pub rows: Vec<Vec<i32>>,
    pub u: DMatrix<f64>,
    /// Gramian eigenvalues (descending), before truncation.
    pub spectrum: Vec<f64>,
}

impl RpiBlock {
    pub fn bl(&self) -> Vec<usize> {
        self.labels.iter().map(|p| p.l as usize).collect()
    }

    pub fn ncols(&self) -> usize {
        self.u.ncols()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Runs of equal labels; positions inside a run can be permuted freely.
pub(crate) fn label_groups(labels: &[Label]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut s = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[s] {
            out.push((s, i));
            s = i;
        }
    }
    out
}

pub(crate) fn canonical_m(m: &[i32], groups: &[(usize, usize)]) -> Vec<i32> {
    let mut c = m.to_vec();
    for &(a, b) in groups {
        c[a..b].sort_unstable();
    }
    c
}

pub fn rpi_block(labels: &[Label]) -> Result<RpiBlock> {
    rpi_block_with(labels, Method::CgChain)
}

pub fn rpi_block_with(labels: &[Label], method: Method) -> Result<RpiBlock> {
    if labels.is_empty() {
        return Err(AceError::InvalidArgument("empty label tuple".into()));
    }
    if labels.windows(2).any(|w| w[0] > w[1]) {
        return Err(AceError::Unordered(format!("{:?}", labels)));
    }
    let bl: Vec<usize> = labels.iter().map(|p| p.l as usize).collect();
    let ri = ri_block(&bl, method)?;
    let n = labels.len();
    let nt = ri.u.ncols();
    if nt == 0 {
        return Ok(RpiBlock {
            labels: labels.to_vec(),
            u: DMatrix::zeros(ri.rows.len(), 0),
            rows: ri.rows,
            spectrum: Vec::new(),
        });
    }
    let groups = label_groups(labels);
    let stab: f64 = groups.iter().map(|&(a, b)| factorial(b - a)).product();
    let nfact = factorial(n);

    // Orbit sums of the RI columns over the stabiliser of the labels.
    let mut orbit: FxHashMap<Vec<i32>, (usize, Vec<f64>)> = FxHashMap::default();
    let canon: Vec<Vec<i32>> = ri.rows.iter().map(|m| canonical_m(m, &groups)).collect();
    for (i, c) in canon.iter().enumerate() {
        let e = orbit
            .entry(c.clone())
            .or_insert_with(|| (0, vec![0.0; nt]));
        e.0 += 1;
        for k in 0..nt {
            e.1[k] += ri.u[(i, k)];
        }
    }
    let mut s = DMatrix::zeros(ri.rows.len(), nt);
    for (i, c) in canon.iter().enumerate() {
        let (cnt, sum) = &orbit[c];
        let f = stab / *cnt as f64;
        for k in 0..nt {
            s[(i, k)] = f * sum[k];
        }
    }
    let g = (s.transpose() * &ri.u) * nfact;
    let g = (&g + g.transpose()) * 0.5;

    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = nfact * stab;
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] / scale > super::RANK_TOL)
        .collect();
    let mut u = DMatrix::zeros(ri.rows.len(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (k, x)| if x.abs() > acc.1 + 1e-12 { (k, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            v = -v;
        }
        let col = &ri.u * v / eig.eigenvalues[i].sqrt();
        u.set_column(j, &col);
    }
    Ok(RpiBlock {
        labels: labels.to_vec(),
        rows: ri.rows,
        u,
        spectrum,
    })
}
/// Gramian of the block columns under the abstract inner product on ordered `(label, m)`
/// tuples, summed explicitly over all of `S_N`.
pub fn abstract_gram(b: &RpiBlock) -> DMatrix<f64> {
    let n = b.labels.len();
    let perms = permutations(n);
    let index: FxHashMap<Vec<i32>, usize> =
        b.rows.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
    let k = b.ncols();
    let mut g = DMatrix::zeros(k, k);
    for (i, m) in b.rows.iter().enumerate() {
        for s in &perms {
            // permuted (label, m) tuple must coincide with the original labels
            if (0..n).any(|a| b.labels[s[a]] != b.labels[a]) {
                continue;
            }
            let mp: Vec<i32> = (0..n).map(|a| m[s[a]]).collect();
            let j = index[&mp];
            for p in 0..k {
                for q in 0..k {
                    g[(p, q)] += b.u[(i, p)] * b.u[(j, q)];
                }
            }
        }
    }
    g * perms.len() as f64
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}


