//! Recursive evaluation graph: every correlation is a product of two shorter ones.

use crate::basis::keys::{order, pack, unpack, Key};
use crate::error::{AceError, Result};
use num_complex::Complex64;
use rustc_hash::FxHashMap;
use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Leaf(u16),
    Product(u32, u32),
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub keys: Vec<Key>,
    /// Per-node coefficient `a`; zero for auxiliary nodes.
    pub coeffs: Vec<f64>,
    pub aux: Vec<bool>,
    lookup: FxHashMap<Key, u32>,
    /// Node id of each input key, in input order.
    pub outputs: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct ForwardState {
    pub value: f64,
    pub vals: Vec<Complex64>,
}

impl Graph {
    /// Builds the graph for `keys` (deduplicated); `coeffs[i]` belongs to `keys[i]`.
    pub fn build(keys: &[Key], coeffs: &[f64]) -> Self {
        assert_eq!(keys.len(), coeffs.len());
        let mut g = Graph::default();
        let spec: FxHashMap<Key, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        // shorter keys first so that they are available as halves
        let mut todo: Vec<usize> = (0..keys.len()).collect();
        todo.sort_by_key(|&i| order(keys[i]));
        for &i in &todo {
            g.insert(keys[i], &spec);
        }
        g.outputs = keys.iter().map(|k| g.lookup[k]).collect();
        for (k, c) in keys.iter().zip(coeffs) {
            g.coeffs[g.lookup[k] as usize] = *c;
        }
        g
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_aux(&self) -> usize {
        self.aux.iter().filter(|&&a| a).count()
    }

    pub fn n_products(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Product(..))).count()
    }

    pub fn node_of(&self, k: Key) -> Option<u32> {
        self.lookup.get(&k).copied()
    }

    pub fn set_coeffs(&mut self, coeffs: &[f64]) {
        assert_eq!(coeffs.len(), self.outputs.len());
        self.coeffs.fill(0.0);
        for (&id, &c) in self.outputs.iter().zip(coeffs) {
            self.coeffs[id as usize] = c;
        }
    }

    fn push(&mut self, k: Key, node: Node, aux: bool) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        self.keys.push(k);
        self.coeffs.push(0.0);
        self.aux.push(aux);
        self.lookup.insert(k, id);
        id
    }

    fn exists(&self, k: Key, n: usize) -> bool {
        n == 1 || self.lookup.contains_key(&k)
    }

    fn insert(&mut self, k: Key, spec: &FxHashMap<Key, usize>) -> u32 {
        if let Some(&id) = self.lookup.get(&k) {
            return id;
        }
        let idx = unpack(k);
        let n = idx.len();
        let aux = !spec.contains_key(&k);
        if n == 1 {
            return self.push(k, Node::Leaf(idx[0]), aux);
        }
        // splits with element 0 on the left; masks in increasing order
        let mut best_one: Option<(usize, Key, Key)> = None;
        let mut chosen = None;
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for mask in (1u32..(1 << n) - 1).filter(|m| m & 1 == 1) {
            left.clear();
            right.clear();
            for (b, &x) in idx.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    left.push(x);
                } else {
                    right.push(x);
                }
            }
            let (kl, kr) = (pack(&left), pack(&right));
            let (el, er) = (self.exists(kl, left.len()), self.exists(kr, right.len()));
            if el && er {
                chosen = Some((kl, kr));
                break;
            }
            if el != er {
                let missing = if el { right.len() } else { left.len() };
                if best_one.map_or(true, |(m, _, _)| missing < m) {
                    best_one = Some((missing, kl, kr));
                }
            }
        }
        let (kl, kr) = chosen
            .or(best_one.map(|(_, a, b)| (a, b)))
            .unwrap_or_else(|| (pack(&idx[..n - 1]), pack(&idx[n - 1..])));
        let l = self.insert(kl, spec);
        let r = self.insert(kr, spec);
        self.push(k, Node::Product(l, r), aux)
    }

    pub fn forward(&self, a: &[Complex64]) -> Result<ForwardState> {
        let mut vals = Vec::with_capacity(self.nodes.len());
        let mut v = Complex64::new(0.0, 0.0);
        for (i, node) in self.nodes.iter().enumerate() {
            let x = match *node {
                Node::Leaf(k) => *a.get(k as usize).ok_or(AceError::MissingLeaf(k as usize))?,
                Node::Product(l, r) => vals[l as usize] * vals[r as usize],
            };
            v += self.coeffs[i] * x;
            vals.push(x);
        }
        Ok(ForwardState { value: v.re, vals })
    }

    /// Energy only, reusing `buf` for the node values.
    pub fn value(&self, a: &[Complex64], buf: &mut Vec<Complex64>) -> Result<f64> {
        buf.clear();
        let mut v = Complex64::new(0.0, 0.0);
        for (i, node) in self.nodes.iter().enumerate() {
            let x = match *node {
                Node::Leaf(k) => *a.get(k as usize).ok_or(AceError::MissingLeaf(k as usize))?,
                Node::Product(l, r) => buf[l as usize] * buf[r as usize],
            };
            v += self.coeffs[i] * x;
            buf.push(x);
        }
        Ok(v.re)
    }

    /// Leaf adjoints `W_k = ∂V/∂A_k`, accumulated into `w` (flat one-particle layout).
    pub fn backward(&self, st: &ForwardState, w: &mut [Complex64]) {
        w.fill(Complex64::new(0.0, 0.0));
        let mut adj: Vec<Complex64> = self.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        for i in (0..self.nodes.len()).rev() {
            let g = adj[i];
            match self.nodes[i] {
                Node::Leaf(k) => w[k as usize] += g,
                Node::Product(l, r) => {
                    if g != Complex64::new(0.0, 0.0) {
                        adj[l as usize] += g * st.vals[r as usize];
                        adj[r as usize] += g * st.vals[l as usize];
                    }
                }
            }
        }
    }

    /// Same graph with nodes renumbered by `perm` (new position of old node `i` is `perm[i]`);
    /// the permutation must keep children ahead of parents.
    pub fn renumbered(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.nodes.len();
        let mut g = Graph {
            nodes: vec![Node::Leaf(0); n],
            keys: vec![0; n],
            coeffs: vec![0.0; n],
            aux: vec![false; n],
            lookup: FxHashMap::default(),
            outputs: self.outputs.iter().map(|&o| perm[o as usize] as u32).collect(),
        };
        for i in 0..n {
            let p = perm[i];
            g.nodes[p] = match self.nodes[i] {
                Node::Leaf(k) => Node::Leaf(k),
                Node::Product(l, r) => {
                    let (l, r) = (perm[l as usize], perm[r as usize]);
                    if l >= p || r >= p {
                        return Err(AceError::InvalidArgument("order is not topological".into()));
                    }
                    Node::Product(l as u32, r as u32)
                }
            };
            g.keys[p] = self.keys[i];
            g.coeffs[p] = self.coeffs[i];
            g.aux[p] = self.aux[i];
            g.lookup.insert(self.keys[i], p as u32);
        }
        Ok(g)
    }

    /// Debug dump: one node per line, `id kind children coeff key`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let kind = match node {
                Node::Leaf(k) => format!("leaf {k}"),
                Node::Product(l, r) => format!("prod {l} {r}"),
            };
            let tag = if self.aux[i] { " aux" } else { "" };
            writeln!(s, "{i} {kind} {:e} {:?}{tag}", self.coeffs[i], unpack(self.keys[i])).unwrap();
        }
        s
    }
}
