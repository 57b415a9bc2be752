//! Radial bases `P_n(r) = J_n(ξ(r)) f_cut(ξ(r))`, orthonormal under a measure
//! in the transformed coordinate `x = ξ(r)`, evaluated by a three-term recurrence.

use crate::error::{AceError, Result};
use crate::quadrature::gauss_legendre_on;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// `(1 + r/r_nn)^{-q}`
    OnePlus { q: f64 },
    /// `(r/r_nn)^{-q}`
    InversePower { q: f64 },
    /// `exp(-λ r/r_nn)`
    Exponential { lambda: f64 },
    /// `1 / (1 + (r/r_nn)^p)`
    Agnesi { p: f64 },
}

impl Default for Transform {
    fn default() -> Self {
        Transform::OnePlus { q: 2.0 }
    }
}

impl Transform {
    /// `(ξ(r), ξ'(r))`
    pub fn eval(&self, r: f64, r_nn: f64) -> (f64, f64) {
        let s = r / r_nn;
        match *self {
            Transform::OnePlus { q } => {
                let x = (1.0 + s).powf(-q);
                (x, -q * x / (1.0 + s) / r_nn)
            }
            Transform::InversePower { q } => {
                let x = s.powf(-q);
                (x, -q * x / s / r_nn)
            }
            Transform::Exponential { lambda } => {
                let x = (-lambda * s).exp();
                (x, -lambda * x / r_nn)
            }
            Transform::Agnesi { p } => {
                let sp = s.powf(p);
                let x = 1.0 / (1.0 + sp);
                let d = if s > 0.0 { -p * sp / s * x * x / r_nn } else { 0.0 };
                (x, d)
            }
        }
    }

    pub fn inverse(&self, x: f64, r_nn: f64) -> f64 {
        match *self {
            Transform::OnePlus { q } => r_nn * (x.powf(-1.0 / q) - 1.0),
            Transform::InversePower { q } => r_nn * x.powf(-1.0 / q),
            Transform::Exponential { lambda } => -r_nn * x.ln() / lambda,
            Transform::Agnesi { p } => r_nn * (1.0 / x - 1.0).powf(1.0 / p),
        }
    }

    fn check(&self, r0: f64, r_nn: f64) -> Result<()> {
        let bad = |m: &str| Err(AceError::NonMonotone(m.to_string()));
        if !(r_nn > 0.0) {
            return bad("r_nn must be positive");
        }
        match *self {
            Transform::OnePlus { q } if !(q > 0.0) => bad("q must be positive"),
            Transform::InversePower { q } if !(q > 0.0) => bad("q must be positive"),
            Transform::InversePower { .. } if !(r0 > 0.0) => {
                bad("inverse power transform is singular at r0 = 0")
            }
            Transform::Exponential { lambda } if !(lambda > 0.0) => bad("lambda must be positive"),
            Transform::Agnesi { p } if !(p > 0.0) => bad("p must be positive"),
            Transform::Agnesi { p } if p < 1.0 && r0 == 0.0 => {
                bad("agnesi transform with p < 1 is not C¹ at r = 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cutoff {
    /// `|x − ξ(r_cut)|^p`
    OneSided { p: f64 },
    /// `|x − ξ(r_cut)|^p |x − ξ(r0)|^p`, zero outside `(r0, r_cut)`
    TwoSided { p: f64 },
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::OneSided { p: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    /// Uniform in `x` on `[ξ(r_cut), ξ(r0)]`.
    #[default]
    UniformInX,
    /// Discrete measure from `(r, weight)` samples, e.g. a radial distribution.
    Samples { r: Vec<f64>, w: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialParams {
    pub n_max: usize,
    pub r0: f64,
    pub r_cut: f64,
    pub r_nn: f64,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default)]
    pub cutoff: Cutoff,
    #[serde(default)]
    pub measure: Measure,
}

impl RadialParams {
    /// Defaults: `ξ = (1 + r/r_nn)^{-2}`, `f_cut = |ξ(r_cut) − x|²`, `r0 = 0.7 r_nn`,
    /// uniform measure in `x`.
    pub fn new(n_max: usize, r_nn: f64, r_cut: f64) -> Self {
        RadialParams {
            n_max,
            r0: 0.7 * r_nn,
            r_cut,
            r_nn,
            transform: Transform::default(),
            cutoff: Cutoff::default(),
            measure: Measure::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RadialBasis {
    params: RadialParams,
    xc: f64,
    x0: f64,
    j0: f64,
    s: Vec<f64>,
    t: Vec<f64>,
    u: Vec<f64>,
}

impl RadialBasis {
    pub fn new(params: RadialParams) -> Result<Self> {
        let RadialParams { r0, r_cut, r_nn, .. } = params;
        if !(r0 >= 0.0 && r0 < r_cut) {
            return Err(AceError::InvalidArgument(format!(
                "need 0 ≤ r0 < r_cut, got r0 = {r0}, r_cut = {r_cut}"
            )));
        }
        params.transform.check(r0, r_nn)?;
        let xc = params.transform.eval(r_cut, r_nn).0;
        let x0 = params.transform.eval(r0, r_nn).0;
        if !(x0.is_finite() && xc.is_finite()) || !(x0 > xc) {
            return Err(AceError::NonMonotone(format!(
                "ξ(r0) = {x0} must exceed ξ(r_cut) = {xc}"
            )));
        }
        let mut basis = RadialBasis {
            params,
            xc,
            x0,
            j0: 0.0,
            s: Vec::new(),
            t: Vec::new(),
            u: Vec::new(),
        };
        let (xs, ws) = basis.measure_points()?;
        basis.stieltjes(&xs, &ws)?;
        Ok(basis)
    }

    pub fn params(&self) -> &RadialParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.params.n_max
    }

    pub fn len(&self) -> usize {
        self.params.n_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r_cut(&self) -> f64 {
        self.params.r_cut
    }

    /// Interval `[ξ(r_cut), ξ(r0)]` carrying the measure.
    pub fn x_range(&self) -> (f64, f64) {
        (self.xc, self.x0)
    }

    /// `(f_cut(x), f_cut'(x))`
    pub fn cutoff_x(&self, x: f64) -> (f64, f64) {
        let pw = |d: f64, p: f64| -> (f64, f64) {
            let a = d.abs();
            if a == 0.0 {
                return (0.0, 0.0);
            }
            let v = a.powf(p);
            (v, p * v / d)
        };
        match self.params.cutoff {
            Cutoff::OneSided { p } => pw(x - self.xc, p),
            Cutoff::TwoSided { p } => {
                let (a, da) = pw(x - self.xc, p);
                let (b, db) = pw(x - self.x0, p);
                (a * b, da * b + a * db)
            }
        }
    }

    /// Nodes and unit-mass weights of the measure `ρ_x`.
    pub fn measure_points(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.params.measure {
            Measure::UniformInX => {
                let p = match self.params.cutoff {
                    Cutoff::OneSided { p } | Cutoff::TwoSided { p } => p,
                };
                let nq = 2 * self.len() + 4 * p.ceil() as usize + 64;
                let (x, w) = gauss_legendre_on(nq, self.xc, self.x0);
                let len = self.x0 - self.xc;
                Ok((x, w.into_iter().map(|w| w / len).collect()))
            }
            Measure::Samples { r, w } => {
                if r.len() != w.len() {
                    return Err(AceError::InvalidArgument(
                        "sample radii and weights differ in length".into(),
                    ));
                }
                let mut xs = Vec::new();
                let mut ws = Vec::new();
                for (&r, &w) in r.iter().zip(w) {
                    if w < 0.0 || !w.is_finite() {
                        return Err(AceError::InvalidArgument(format!("bad sample weight {w}")));
                    }
                    if r >= self.params.r0 && r < self.params.r_cut && w > 0.0 {
                        xs.push(self.params.transform.eval(r, self.params.r_nn).0);
                        ws.push(w);
                    }
                }
                let mass: f64 = ws.iter().sum();
                if !(mass > 0.0) {
                    return Err(AceError::ZeroMass);
                }
                Ok((xs, ws.into_iter().map(|w| w / mass).collect()))
            }
        }
    }

    // Discretised Stieltjes procedure in orthonormal form on the weighted
    // measure f_cut² ρ_x.
    fn stieltjes(&mut self, xs: &[f64], ws: &[f64]) -> Result<()> {
        let om: Vec<f64> = xs
            .iter()
            .zip(ws)
            .map(|(&x, &w)| w * self.cutoff_x(x).0.powi(2))
            .collect();
        let b0: f64 = om.iter().sum();
        if !(b0 > 0.0) {
            return Err(AceError::ZeroMass);
        }
        let nm = self.params.n_max;
        let mut jprev = vec![0.0; xs.len()];
        let mut jcur = vec![1.0 / b0.sqrt(); xs.len()];
        self.j0 = 1.0 / b0.sqrt();
        self.s = vec![0.0; nm + 1];
        self.t = vec![0.0; nm + 1];
        self.u = vec![0.0; nm + 1];
        let mut sqb_prev = 0.0;
        for n in 1..=nm {
            let a: f64 = (0..xs.len()).map(|k| om[k] * xs[k] * jcur[k] * jcur[k]).sum();
            let mut v: Vec<f64> = (0..xs.len())
                .map(|k| (xs[k] - a) * jcur[k] - sqb_prev * jprev[k])
                .collect();
            // one pass of reorthogonalisation against the two previous functions
            for prev in [&jcur, &jprev] {
                let c: f64 = (0..xs.len()).map(|k| om[k] * v[k] * prev[k]).sum();
                for k in 0..xs.len() {
                    v[k] -= c * prev[k];
                }
            }
            let b: f64 = (0..xs.len()).map(|k| om[k] * v[k] * v[k]).sum();
            if !(b > 1e-28) {
                return Err(AceError::InvalidArgument(format!(
                    "measure supports fewer than {} independent polynomials",
                    nm + 1
                )));
            }
            let sb = b.sqrt();
            self.s[n] = 1.0 / sb;
            self.t[n] = -a / sb;
            self.u[n] = -sqb_prev / sb;
            for vk in v.iter_mut() {
                *vk /= sb;
            }
            jprev = std::mem::replace(&mut jcur, v);
            sqb_prev = sb;
        }
        Ok(())
    }

    /// `J_n(x)` and `J_n'(x)` for all n.
    pub fn jacobi_x(&self, x: f64, j: &mut [f64], dj: &mut [f64]) {
        j[0] = self.j0;
        dj[0] = 0.0;
        for n in 1..=self.params.n_max {
            let (a, da) = (j[n - 1], dj[n - 1]);
            let (b, db) = if n >= 2 { (j[n - 2], dj[n - 2]) } else { (0.0, 0.0) };
            let lin = self.s[n] * x + self.t[n];
            j[n] = lin * a + self.u[n] * b;
            dj[n] = self.s[n] * a + lin * da + self.u[n] * db;
        }
    }

    pub fn in_support(&self, r: f64) -> bool {
        match self.params.cutoff {
            Cutoff::OneSided { .. } => r < self.params.r_cut,
            Cutoff::TwoSided { .. } => r < self.params.r_cut && r > self.params.r0,
        }
    }

    pub fn eval_into(&self, r: f64, p: &mut [f64], dp: &mut [f64]) {
        if !self.in_support(r) {
            p[..self.len()].fill(0.0);
            dp[..self.len()].fill(0.0);
            return;
        }
        let (x, dx) = self.params.transform.eval(r, self.params.r_nn);
        let (f, df) = self.cutoff_x(x);
        self.jacobi_x(x, p, dp);
        for n in 0..self.len() {
            let (j, dj) = (p[n], dp[n]);
            p[n] = j * f;
            dp[n] = (dj * f + j * df) * dx;
        }
    }

    pub fn eval(&self, r: f64) -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; self.len()];
        let mut dp = vec![0.0; self.len()];
        self.eval_into(r, &mut p, &mut dp);
        (p, dp)
    }

    /// Values at `x` directly, for quadrature in the transformed coordinate.
    pub fn eval_x(&self, x: f64) -> Vec<f64> {
        let mut j = vec![0.0; self.len()];
        let mut dj = vec![0.0; self.len()];
        self.jacobi_x(x, &mut j, &mut dj);
        let f = self.cutoff_x(x).0;
        j.iter().map(|v| v * f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gram_uniform(b: &RadialBasis, nq: usize) -> f64 {
        let (xc, x0) = b.x_range();
        let (xs, ws) = gauss_legendre_on(nq, xc, x0);
        let n = b.len();
        let mut g = vec![0.0; n * n];
        for (x, w) in xs.iter().zip(&ws) {
            let r = b.params.transform.inverse(*x, b.params.r_nn);
            let p = b.eval(r).0;
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] += w / (x0 - xc) * p[i] * p[j];
                }
            }
        }
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { 1.0 } else { 0.0 };
                e = e.max((g[i * n + j] - d).abs());
            }
        }
        e
    }

    #[test]
    fn orthonormal_for_all_transforms() {
        let ts = [
            Transform::OnePlus { q: 2.0 },
            Transform::InversePower { q: 1.5 },
            Transform::Exponential { lambda: 1.3 },
            Transform::Agnesi { p: 4.0 },
        ];
        let cs = [Cutoff::OneSided { p: 2.0 }, Cutoff::TwoSided { p: 2.0 }, Cutoff::OneSided { p: 3.0 }];
        for t in ts {
            for c in cs {
                let mut prm = RadialParams::new(20, 2.5, 5.5);
                prm.transform = t;
                prm.cutoff = c;
                let b = RadialBasis::new(prm).unwrap();
                let e = gram_uniform(&b, 256);
                assert!(e < 1e-9, "{:?} {:?} {e}", t, c);
            }
        }
    }

    // Orthonormal Jacobi P_n^{(α,β)} on [-1,1] by the textbook recurrence.
    fn jacobi(n: usize, a: f64, b: f64, t: f64) -> Vec<f64> {
        let mut p = vec![0.0; n + 1];
        p[0] = 1.0;
        if n >= 1 {
            p[1] = 0.5 * (a - b + (a + b + 2.0) * t);
        }
        for k in 2..=n {
            let k = k as f64;
            let c = 2.0 * k + a + b;
            let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
            let a2 = (c - 1.0) * (a * a - b * b);
            let a3 = (c - 2.0) * (c - 1.0) * c;
            let a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
            let ku = k as usize;
            p[ku] = ((a2 + a3 * t) * p[ku - 1] - a4 * p[ku - 2]) / a1;
        }
        p
    }

    #[test]
    fn uniform_one_sided_gives_shifted_jacobi() {
        let b = RadialBasis::new(RadialParams::new(8, 2.3, 5.0)).unwrap();
        let (xc, x0) = b.x_range();
        let probe = |x: f64| {
            let t = 2.0 * (x - xc) / (x0 - xc) - 1.0;
            let mut j = vec![0.0; 9];
            let mut dj = vec![0.0; 9];
            b.jacobi_x(x, &mut j, &mut dj);
            (j, jacobi(8, 0.0, 4.0, t))
        };
        let (ja, pa) = probe(xc + 0.31 * (x0 - xc));
        for x in [xc + 0.05 * (x0 - xc), xc + 0.77 * (x0 - xc), x0] {
            let (j, p) = probe(x);
            for n in 0..=8 {
                assert!((j[n] / p[n] - ja[n] / pa[n]).abs() < 1e-9 * (ja[n] / pa[n]).abs());
            }
        }
    }

    #[test]
    fn degree_zero_is_normalised_cutoff() {
        let b = RadialBasis::new(RadialParams::new(0, 2.0, 5.0)).unwrap();
        let (xc, x0) = b.x_range();
        let (xs, ws) = gauss_legendre_on(64, xc, x0);
        let norm: f64 = xs.iter().zip(&ws).map(|(x, w)| w / (x0 - xc) * b.cutoff_x(*x).0.powi(2)).sum();
        let r = 3.1;
        let x = b.params.transform.eval(r, 2.0).0;
        let p = b.eval(r).0;
        assert!((p[0] - b.cutoff_x(x).0 / norm.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn two_sided_has_double_roots() {
        let mut prm = RadialParams::new(6, 2.0, 5.0);
        prm.cutoff = Cutoff::TwoSided { p: 2.0 };
        let b = RadialBasis::new(prm.clone()).unwrap();
        for r in [prm.r0, prm.r_cut] {
            let (p, dp) = b.eval(r);
            assert!(p.iter().chain(&dp).all(|v| *v == 0.0));
        }
        // approach from inside: value ~ ε², derivative ~ ε
        for (r, e) in [(prm.r0, 1e-4), (prm.r_cut, -1e-4)] {
            let (p1, d1) = b.eval(r + e);
            let (p2, d2) = b.eval(r + e / 10.0);
            for n in 0..7 {
                assert!((p1[n] / p2[n] - 100.0).abs() < 1.0);
                assert!((d1[n] / d2[n] - 10.0).abs() < 0.1);
            }
        }
    }

    #[test]
    fn zero_beyond_cutoff_and_rate() {
        let b = RadialBasis::new(RadialParams::new(5, 2.0, 5.0)).unwrap();
        let (p, dp) = b.eval(5.0);
        assert!(p.iter().chain(&dp).all(|v| *v == 0.0));
        let (p, _) = b.eval(7.0);
        assert!(p.iter().all(|v| *v == 0.0));
        let a = b.eval(5.0 - 1e-3).0;
        let c = b.eval(5.0 - 1e-4).0;
        for n in 0..6 {
            let ratio = a[n] / c[n];
            assert!((ratio - 100.0).abs() < 1.0, "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn errors() {
        let mut prm = RadialParams::new(3, 2.0, 5.0);
        prm.transform = Transform::Exponential { lambda: 0.0 };
        assert!(matches!(RadialBasis::new(prm.clone()), Err(AceError::NonMonotone(_))));
        prm.transform = Transform::InversePower { q: 2.0 };
        prm.r0 = 0.0;
        assert!(matches!(RadialBasis::new(prm.clone()), Err(AceError::NonMonotone(_))));
        prm.transform = Transform::Agnesi { p: -1.0 };
        prm.r0 = 1.0;
        assert!(matches!(RadialBasis::new(prm.clone()), Err(AceError::NonMonotone(_))));
        let mut prm = RadialParams::new(3, 2.0, 5.0);
        prm.measure = Measure::Samples { r: vec![1.0, 6.0], w: vec![0.0, 1.0] };
        assert!(matches!(RadialBasis::new(prm.clone()), Err(AceError::ZeroMass)));
        prm.r0 = 6.0;
        assert!(RadialBasis::new(prm).is_err());
    }

    #[test]
    fn sample_measure_scale_invariance() {
        let r: Vec<f64> = (0..300).map(|k| 1.5 + 3.4 * (k as f64 + 0.5) / 300.0).collect();
        let w: Vec<f64> = r.iter().map(|r| (-(r - 2.5f64).powi(2)).exp()).collect();
        let mut a = RadialParams::new(10, 2.4, 5.0);
        a.measure = Measure::Samples { r: r.clone(), w: w.clone() };
        let mut b = a.clone();
        b.measure = Measure::Samples { r, w: w.iter().map(|w| 7.0 * w).collect() };
        let (ba, bb) = (RadialBasis::new(a).unwrap(), RadialBasis::new(b).unwrap());
        for r in [1.7, 2.5, 3.3, 4.9] {
            let (pa, pb) = (ba.eval(r).0, bb.eval(r).0);
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn sample_measure_is_orthonormal_discretely() {
        let r: Vec<f64> = (0..200).map(|k| 1.5 + 3.4 * (k as f64 + 0.5) / 200.0).collect();
        let w: Vec<f64> = r.iter().map(|r| 1.0 + r.sin().powi(2)).collect();
        let mut a = RadialParams::new(8, 2.4, 5.0);
        a.r0 = 1.4;
        a.measure = Measure::Samples { r: r.clone(), w: w.clone() };
        let b = RadialBasis::new(a).unwrap();
        let mass: f64 = w.iter().sum();
        let mut g = [[0.0; 9]; 9];
        for (r, w) in r.iter().zip(&w) {
            let p = b.eval(*r).0;
            for i in 0..9 {
                for j in 0..9 {
                    g[i][j] += w / mass * p[i] * p[j];
                }
            }
        }
        for i in 0..9 {
            for j in 0..9 {
                assert!((g[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn derivative_matches_fd(r in 1.2f64..4.95, which in 0usize..4) {
            let mut prm = RadialParams::new(12, 2.4, 5.0);
            prm.transform = [
                Transform::OnePlus { q: 2.0 },
                Transform::InversePower { q: 2.0 },
                Transform::Exponential { lambda: 2.0 },
                Transform::Agnesi { p: 3.0 },
            ][which];
            let b = RadialBasis::new(prm).unwrap();
            let h = 1e-6;
            let (_, dp) = b.eval(r);
            let (pp, _) = b.eval(r + h);
            let (pm, _) = b.eval(r - h);
            let scale = dp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for n in 0..13 {
                let fd = (pp[n] - pm[n]) / (2.0 * h);
                prop_assert!((fd - dp[n]).abs() < 1e-7 * scale.max(1.0), "n={} fd={} an={}", n, fd, dp[n]);
            }
        }
    }
}
