//! Angular-momentum coupling: rotation-invariant (RI) blocks `Ũ^l` and
//! rotation- and permutation-invariant (RPI) blocks `U^{nl}`.
//!
//! All coefficients are real in the orthonormal Condon–Shortley convention,
//! so blocks are stored as real matrices with rows indexed by `𝓜_l^0`.

pub mod cache;
pub mod cg;
mod rpi;

pub use cache::CouplingCache;
pub use cg::clebsch_gordan;
pub use rpi::{abstract_gram, permutations, rpi_block, rpi_block_with, Label, RpiBlock};

use crate::error::{AceError, Result};
use nalgebra::DMatrix;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Svd,
    CgChain,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LTuple {
    pub bl: Vec<usize>,
    /// Intermediate couplings `(L_2, ..., L_N)`, with `L_N = 0`.
    pub l: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct RiBlock {
    pub bl: Vec<usize>,
    pub rows: Vec<Vec<i32>>,
    pub u: DMatrix<f64>,
}

impl RiBlock {
    pub fn ncols(&self) -> usize {
        self.u.ncols()
    }
}

/// All `m` with `|m_i| ≤ l_i` and `Σ m = 0`, in lexicographic order.
pub fn m_tuples(bl: &[usize]) -> Vec<Vec<i32>> {
    let n = bl.len();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    // suffix capacity: how far the remaining entries can move the sum
    let mut cap = vec![0i32; n + 1];
    for i in (0..n).rev() {
        cap[i] = cap[i + 1] + bl[i] as i32;
    }
    let mut cur = vec![0i32; n];
    fn rec(i: usize, s: i32, bl: &[usize], cap: &[i32], cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        let n = bl.len();
        if i == n {
            if s == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let l = bl[i] as i32;
        for m in -l..=l {
            let t = s + m;
            if t.abs() <= cap[i + 1] {
                cur[i] = m;
                rec(i + 1, t, bl, cap, cur, out);
            }
        }
    }
    rec(0, 0, bl, &cap, &mut cur, &mut out);
    out
}

/// Coupling chains ending at total angular momentum zero, lexicographic in `L`.
pub fn enumerate_l0(bl: &[usize]) -> Result<Vec<LTuple>> {
    let n = bl.len();
    if n < 2 {
        return Err(AceError::InvalidArgument(format!(
            "coupling chains need at least two l values, got {}",
            n
        )));
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n - 1);
    fn rec(prev: usize, i: usize, bl: &[usize], cur: &mut Vec<usize>, out: &mut Vec<LTuple>) {
        let n = bl.len();
        let li = bl[i];
        let lo = prev.abs_diff(li);
        let hi = prev + li;
        if i == n - 1 {
            if lo == 0 {
                cur.push(0);
                out.push(LTuple {
                    bl: bl.to_vec(),
                    l: cur.clone(),
                });
                cur.pop();
            }
            return;
        }
        // remaining l's must be able to bring L back to zero
        let rest_max: usize = bl[i + 1..].iter().sum();
        for big in lo..=hi {
            if big > rest_max {
                break;
            }
            cur.push(big);
            rec(big, i + 1, bl, cur, out);
            cur.pop();
        }
    }
    rec(bl[0], 1, bl, &mut cur, &mut out);
    Ok(out)
}

/// Generalised Clebsch–Gordan coefficient `[𝓒_l]_{m,(L,0)}` for one chain.
pub fn chain_coefficient(bl: &[usize], big: &[usize], m: &[i32]) -> f64 {
    let mut prev_l = bl[0] as i64;
    let mut prev_m = m[0] as i64;
    let mut c = 1.0;
    for i in 1..bl.len() {
        let li = bl[i] as i64;
        let mi = m[i] as i64;
        let bl_i = big[i - 1] as i64;
        let bm_i = prev_m + mi;
        if bm_i.abs() > bl_i {
            return 0.0;
        }
        c *= clebsch_gordan(prev_l, prev_m, li, mi, bl_i, bm_i);
        if c == 0.0 {
            return 0.0;
        }
        prev_l = bl_i;
        prev_m = bm_i;
    }
    c
}

fn trivial_block(bl: &[usize]) -> RiBlock {
    let rows = m_tuples(bl);
    let u = if bl[0] == 0 {
        DMatrix::from_element(1, 1, 1.0)
    } else {
        DMatrix::zeros(rows.len(), 0)
    };
    RiBlock {
        bl: bl.to_vec(),
        rows,
        u,
    }
}

pub fn ri_block(bl: &[usize], method: Method) -> Result<RiBlock> {
    if bl.is_empty() {
        return Err(AceError::InvalidArgument("empty l tuple".into()));
    }
    if bl.iter().sum::<usize>() % 2 == 1 {
        return Err(AceError::InvalidArgument(format!(
            "Σl must be even for an invariant block, got {:?}",
            bl
        )));
    }
    if bl.len() == 1 {
        return Ok(trivial_block(bl));
    }
    match method {
        Method::CgChain => cg_chain_block(bl),
        Method::Svd => svd_block(bl),
    }
}

fn cg_chain_block(bl: &[usize]) -> Result<RiBlock> {
    let chains = enumerate_l0(bl)?;
    let rows = m_tuples(bl);
    let mut u = DMatrix::zeros(rows.len(), chains.len());
    for (j, ch) in chains.iter().enumerate() {
        for (i, m) in rows.iter().enumerate() {
            u[(i, j)] = chain_coefficient(bl, &ch.l, m);
        }
    }
    Ok(RiBlock {
        bl: bl.to_vec(),
        rows,
        u,
    })
}

struct Factor {
    rows: Vec<Vec<i32>>,
    index: FxHashMap<Vec<i32>, usize>,
    f: DMatrix<f64>,
}

/// Orthonormal factor `F` with `b̄D^l = F Fᵀ`, built from the pairwise
/// Clebsch–Gordan reduction `D^{l1} ⊗ D^{l2} = Σ_L D^L` and an SVD.
fn wigner_factor(bl: &[usize], memo: &mut FxHashMap<Vec<usize>, std::rc::Rc<Factor>>) -> std::rc::Rc<Factor> {
    if let Some(f) = memo.get(bl) {
        return f.clone();
    }
    let rows = m_tuples(bl);
    let index: FxHashMap<Vec<i32>, usize> =
        rows.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
    let f = if bl.len() == 1 {
        if bl[0] == 0 {
            DMatrix::from_element(1, 1, 1.0)
        } else {
            DMatrix::zeros(rows.len(), 0)
        }
    } else {
        let (l1, l2) = (bl[0], bl[1]);
        let mut cols: Vec<DMatrix<f64>> = Vec::new();
        for big in l1.abs_diff(l2)..=l1 + l2 {
            let mut sub = vec![big];
            sub.extend_from_slice(&bl[2..]);
            let fs = wigner_factor(&sub, memo);
            if fs.f.ncols() == 0 {
                continue;
            }
            let mut g = DMatrix::zeros(rows.len(), fs.f.ncols());
            let mut key = vec![0i32; sub.len()];
            for (i, m) in rows.iter().enumerate() {
                let mm = m[0] + m[1];
                if mm.unsigned_abs() as usize > big {
                    continue;
                }
                let c = clebsch_gordan(l1 as i64, m[0] as i64, l2 as i64, m[1] as i64, big as i64, mm as i64);
                if c == 0.0 {
                    continue;
                }
                key[0] = mm;
                key[1..].copy_from_slice(&m[2..]);
                if let Some(&r) = fs.index.get(&key) {
                    for k in 0..fs.f.ncols() {
                        g[(i, k)] = c * fs.f[(r, k)];
                    }
                }
            }
            cols.push(g);
        }
        let ncols: usize = cols.iter().map(|c| c.ncols()).sum();
        let mut g = DMatrix::zeros(rows.len(), ncols);
        let mut off = 0;
        for c in cols {
            g.view_mut((0, off), (rows.len(), c.ncols())).copy_from(&c);
            off += c.ncols();
        }
        orthonormal_range(g)
    };
    let out = std::rc::Rc::new(Factor { rows, index, f });
    memo.insert(bl.to_vec(), out.clone());
    out
}

/// Left singular vectors of `g` above the relative rank tolerance.
pub fn orthonormal_range(g: DMatrix<f64>) -> DMatrix<f64> {
    if g.ncols() == 0 || g.nrows() == 0 {
        return DMatrix::zeros(g.nrows(), 0);
    }
    let svd = g.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let s = svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let mut keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > RANK_TOL * smax).collect();
    keep.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let mut out = DMatrix::zeros(u.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

fn svd_block(bl: &[usize]) -> Result<RiBlock> {
    let mut memo = FxHashMap::default();
    let f = wigner_factor(bl, &mut memo);
    Ok(RiBlock {
        bl: bl.to_vec(),
        rows: f.rows.clone(),
        u: f.f.clone(),
    })
}

/// `b̄D^l = ∫_{SO(3)} Π_i D^{l_i}_{μ_i m_i}(Q) dQ` on the `𝓜_l^0 × 𝓜_l^0` block.
/// Zero if `Σ bl` is odd.
pub fn integrated_wigner(bl: &[usize]) -> (Vec<Vec<i32>>, DMatrix<f64>) {
    let mut memo = FxHashMap::default();
    let f = wigner_factor(bl, &mut memo);
    let d = &f.f * f.f.transpose();
    (f.rows.clone(), d)
}

/// `‖P_a − P_b‖_F` for two orthonormal column sets, computed from the
/// residuals `(I − P_a) B` and `(I − P_b) A` to avoid cancellation.
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ra = b - a * (a.transpose() * b);
    let rb = a - b * (b.transpose() * a);
    (ra.norm_squared() + rb.norm_squared()).sqrt()
}

/// Numerical rank with the module-wide relative tolerance.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > RANK_TOL * smax).count()
}
