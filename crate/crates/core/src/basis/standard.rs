//! Direct evaluation of `V = Re Σ_k a_k Π_α A_{k_α}` over a flat key list.

use super::keys::{unpack, Key};
use num_complex::Complex64;

#[derive(Clone, Debug, Default)]
pub struct StandardEvaluator {
    pub keys: Vec<Key>,
    idx: Vec<u16>,
    offs: Vec<u32>,
    pub coeffs: Vec<f64>,
}

impl StandardEvaluator {
    pub fn new(keys: Vec<Key>, coeffs: Vec<f64>) -> Self {
        assert_eq!(keys.len(), coeffs.len());
        let mut idx = Vec::new();
        let mut offs = vec![0u32];
        for &k in &keys {
            idx.extend(unpack(k));
            offs.push(idx.len() as u32);
        }
        StandardEvaluator { keys, idx, offs, coeffs }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Complex multiplications per forward evaluation.
    pub fn flops(&self) -> usize {
        self.idx.len() - self.keys.len()
    }

    pub fn eval(&self, a: &[Complex64]) -> f64 {
        let mut v = Complex64::new(0.0, 0.0);
        for (i, &c) in self.coeffs.iter().enumerate() {
            let (lo, hi) = (self.offs[i] as usize, self.offs[i + 1] as usize);
            let mut p = a[self.idx[lo] as usize];
            for &k in &self.idx[lo + 1..hi] {
                p *= a[k as usize];
            }
            v += c * p;
        }
        v.re
    }

    /// Value and `W_k = ∂V/∂A_k` (holomorphic derivative) via prefix/suffix products.
    pub fn eval_adjoint(&self, a: &[Complex64], w: &mut [Complex64]) -> f64 {
        w.fill(Complex64::new(0.0, 0.0));
        let mut v = Complex64::new(0.0, 0.0);
        let mut pre = Vec::with_capacity(super::keys::MAX_ORDER + 1);
        for (i, &c) in self.coeffs.iter().enumerate() {
            let row = &self.idx[self.offs[i] as usize..self.offs[i + 1] as usize];
            pre.clear();
            pre.push(Complex64::new(c, 0.0));
            for &k in row {
                let p = *pre.last().unwrap() * a[k as usize];
                pre.push(p);
            }
            v += pre[row.len()];
            let mut suf = Complex64::new(1.0, 0.0);
            for al in (0..row.len()).rev() {
                let k = row[al] as usize;
                w[k] += pre[al] * suf;
                suf *= a[k];
            }
        }
        v.re
    }
}
