//! Complex orthonormal spherical harmonics with Condon–Shortley phase.
//!
//! Values are stored flat at `l*l + l + m`. The associated Legendre functions
//! are normalised so that `Y_l^m = P_l^m(cos θ) e^{imφ}`; for `m ≥ 1` the
//! recursion runs on `P_l^m / sin θ`, which keeps gradients finite at the poles.

use crate::error::{AceError, Result};
use nalgebra::Vector3;
use num_complex::Complex64;

#[inline]
pub fn lm_index(l: usize, m: i32) -> usize {
    ((l * l + l) as i64 + m as i64) as usize
}

#[inline]
pub fn lm_index_signed(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

pub fn lm_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

#[derive(Clone, Debug)]
pub struct SphericalHarmonics {
    l_max: usize,
    // A_l^m, B_l^m on the triangular (l, m ≥ 0) layout
    a: Vec<f64>,
    b: Vec<f64>,
    // diagonal seeds C_m = -sqrt(1 + 1/2m)
    c: Vec<f64>,
    // sqrt((2l+1)/(2l-1) (l-m)(l+m)) for the θ-derivative
    d: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct Scratch {
    p: Vec<f64>,
    q: Vec<f64>,
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl SphericalHarmonics {
    pub fn new(l_max: usize) -> Self {
        let n = tri(l_max, l_max) + 1;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut c = vec![0.0; l_max + 1];
        for m in 1..=l_max {
            c[m] = -(1.0 + 0.5 / m as f64).sqrt();
        }
        for l in 0..=l_max {
            for m in 0..=l {
                let (lf, mf) = (l as f64, m as f64);
                if l >= m + 1 {
                    a[tri(l, m)] = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                }
                if l >= m + 2 {
                    let l1 = lf - 1.0;
                    b[tri(l, m)] = -((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
                }
                if l >= 1 && l > m {
                    d[tri(l, m)] =
                        ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf - mf) * (lf + mf)).sqrt();
                }
            }
        }
        SphericalHarmonics { l_max, a, b, c, d }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn len(&self) -> usize {
        lm_len(self.l_max)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scratch(&self) -> Scratch {
        let n = tri(self.l_max, self.l_max) + 1;
        Scratch {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    /// Fills `p` with P̄_l^0 at m = 0 and `q` with P̄_l^m / sin θ for m ≥ 1.
    fn legendre(&self, ct: f64, st: f64, s: &mut Scratch) {
        let lm = self.l_max;
        let (p, q) = (&mut s.p, &mut s.q);
        p[0] = 0.5 / std::f64::consts::PI.sqrt();
        if lm >= 1 {
            p[tri(1, 0)] = self.a[tri(1, 0)] * ct * p[0];
        }
        for l in 2..=lm {
            let i = tri(l, 0);
            p[i] = self.a[i] * (ct * p[tri(l - 1, 0)] + self.b[i] * p[tri(l - 2, 0)]);
        }
        for m in 1..=lm {
            // Q_mm = C_m P̄_{m-1,m-1}
            let prev = if m == 1 {
                p[0]
            } else {
                st * q[tri(m - 1, m - 1)]
            };
            q[tri(m, m)] = self.c[m] * prev;
            if m < lm {
                let i = tri(m + 1, m);
                q[i] = self.a[i] * ct * q[tri(m, m)];
            }
            for l in m + 2..=lm {
                let i = tri(l, m);
                q[i] = self.a[i] * (ct * q[tri(l - 1, m)] + self.b[i] * q[tri(l - 2, m)]);
            }
            for l in m..=lm {
                p[tri(l, m)] = st * q[tri(l, m)];
            }
        }
    }

    fn angles(r: &Vector3<f64>) -> Result<(f64, f64, f64, f64, f64)> {
        let rn = r.norm();
        if !(rn > 0.0) || !rn.is_finite() {
            return Err(AceError::ZeroVector);
        }
        let rxy = r.x.hypot(r.y);
        let ct = r.z / rn;
        let st = rxy / rn;
        let phi = r.y.atan2(r.x);
        Ok((rn, ct, st, phi.cos(), phi.sin()))
    }

    pub fn eval(&self, r: &Vector3<f64>) -> Result<Vec<Complex64>> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut s = self.scratch();
        self.eval_into(r, &mut y, &mut s)?;
        Ok(y)
    }

    pub fn eval_into(&self, r: &Vector3<f64>, y: &mut [Complex64], s: &mut Scratch) -> Result<()> {
        let (_, ct, st, cp, sp) = Self::angles(r)?;
        self.legendre(ct, st, s);
        let e1 = Complex64::new(cp, sp);
        let mut em = Complex64::new(1.0, 0.0);
        for m in 0..=self.l_max {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            for l in m..=self.l_max {
                let v = em * s.p[tri(l, m)];
                y[lm_index(l, m as i32)] = v;
                if m > 0 {
                    y[lm_index(l, -(m as i32))] = v.conj() * sign;
                }
            }
            em *= e1;
        }
        Ok(())
    }

    pub fn eval_with_gradients(
        &self,
        r: &Vector3<f64>,
    ) -> Result<(Vec<Complex64>, Vec<Vector3<Complex64>>)> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut dy = vec![Vector3::zeros(); self.len()];
        let mut s = self.scratch();
        self.eval_with_gradients_into(r, &mut y, &mut dy, &mut s)?;
        Ok((y, dy))
    }

    pub fn eval_with_gradients_into(
        &self,
        r: &Vector3<f64>,
        y: &mut [Complex64],
        dy: &mut [Vector3<Complex64>],
        s: &mut Scratch,
    ) -> Result<()> {
        let (rn, ct, st, cp, sp) = Self::angles(r)?;
        self.legendre(ct, st, s);
        let inv_r = 1.0 / rn;
        let e_theta = Vector3::new(ct * cp, ct * sp, -st);
        let e_phi = Vector3::new(-sp, cp, 0.0);
        let e1 = Complex64::new(cp, sp);
        let mut em = Complex64::new(1.0, 0.0);
        let lm = self.l_max;
        for m in 0..=lm {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            for l in m..=lm {
                let i = tri(l, m);
                let p = s.p[i];
                let (dp, qm) = if m == 0 {
                    let dp = if l == 0 {
                        0.0
                    } else {
                        ((l * (l + 1)) as f64).sqrt() * s.p[tri(l, 1)]
                    };
                    (dp, 0.0)
                } else {
                    let q = s.q[i];
                    let qprev = if l > m { s.q[tri(l - 1, m)] } else { 0.0 };
                    (l as f64 * ct * q - self.d[i] * qprev, m as f64 * q)
                };
                let v = em * p;
                let gt = em * (dp * inv_r);
                let gp = em * Complex64::new(0.0, qm * inv_r);
                let g = e_theta.map(|c| gt * c) + e_phi.map(|c| gp * c);
                y[lm_index(l, m as i32)] = v;
                dy[lm_index(l, m as i32)] = g;
                if m > 0 {
                    y[lm_index(l, -(m as i32))] = v.conj() * sign;
                    dy[lm_index(l, -(m as i32))] = g.map(|c| c.conj() * sign);
                }
            }
            em *= e1;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sphere_rule;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Textbook closed forms for l ≤ 2, written from x, y, z directly.
    fn closed_form(l: usize, m: i32, r: &Vector3<f64>) -> Complex64 {
        let u = r / r.norm();
        let (x, y, z) = (u.x, u.y, u.z);
        let xp = c(x, y);
        match (l, m) {
            (0, 0) => c(0.5 * (1.0 / PI).sqrt(), 0.0),
            (1, 0) => c((3.0 / (4.0 * PI)).sqrt() * z, 0.0),
            (1, 1) => -xp * (3.0 / (8.0 * PI)).sqrt(),
            (2, 0) => c((5.0 / (16.0 * PI)).sqrt() * (3.0 * z * z - 1.0), 0.0),
            (2, 1) => -xp * z * (15.0 / (8.0 * PI)).sqrt(),
            (2, 2) => xp * xp * (15.0 / (32.0 * PI)).sqrt(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn matches_closed_forms() {
        let sh = SphericalHarmonics::new(2);
        for r in [
            Vector3::new(0.3, -0.4, 0.8),
            Vector3::new(-1.0, 2.0, -0.5),
            Vector3::new(0.0, 0.0, -2.0),
        ] {
            let y = sh.eval(&r).unwrap();
            for l in 0..=2 {
                for m in 0..=l as i32 {
                    let e = closed_form(l, m, &r);
                    assert!((y[lm_index(l, m)] - e).norm() < 1e-14, "{l} {m}");
                }
            }
        }
    }

    #[test]
    fn y00_and_pole() {
        let sh = SphericalHarmonics::new(8);
        let y = sh.eval(&Vector3::new(0.2, 0.7, -0.1)).unwrap();
        assert!((y[0].re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        let y = sh.eval(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        for l in 0..=8 {
            for m in -(l as i32)..=l as i32 {
                if m != 0 {
                    assert_eq!(y[lm_index(l, m)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_vector_is_error() {
        let sh = SphericalHarmonics::new(2);
        assert!(matches!(sh.eval(&Vector3::zeros()), Err(AceError::ZeroVector)));
    }

    #[test]
    fn gram_matrix_is_identity() {
        let lmax = 6;
        let sh = SphericalHarmonics::new(lmax);
        let n = sh.len();
        let mut g = vec![c(0.0, 0.0); n * n];
        for (x, w) in sphere_rule(2 * lmax + 2) {
            let y = sh.eval(&x).unwrap();
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] += y[i] * y[j].conj() * w;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[i * n + j] - e).norm() < 1e-10);
            }
        }
    }

    fn fd_check(sh: &SphericalHarmonics, r: Vector3<f64>, h: f64, tol: f64) {
        let (_, dy) = sh.eval_with_gradients(&r).unwrap();
        for k in 0..3 {
            let mut rp = r;
            let mut rm = r;
            rp[k] += h;
            rm[k] -= h;
            let yp = sh.eval(&rp).unwrap();
            let ym = sh.eval(&rm).unwrap();
            for i in 0..sh.len() {
                let fd = (yp[i] - ym[i]) / (2.0 * h);
                let scale = 1.0 + dy[i][k].norm();
                assert!(
                    (fd - dy[i][k]).norm() < tol * scale,
                    "i={i} k={k} fd={fd} an={}",
                    dy[i][k]
                );
            }
        }
    }

    #[test]
    fn gradients_at_pole_match_fd() {
        let sh = SphericalHarmonics::new(8);
        // At the pole the FD stencil itself straddles θ = 0; shift by 1e-6 in θ.
        let t: f64 = 1e-6;
        let r = Vector3::new(1.3 * t.sin(), 0.0, 1.3 * t.cos());
        let (_, dy) = sh.eval_with_gradients(&Vector3::new(0.0, 0.0, 1.3)).unwrap();
        assert!(dy.iter().all(|g| g.iter().all(|c| c.re.is_finite() && c.im.is_finite())));
        fd_check(&sh, r, 1e-6, 1e-6);
        fd_check(&sh, Vector3::new(0.0, 0.0, 1.3), 1e-6, 1e-6);
        fd_check(&sh, Vector3::new(1e-9, -2e-9, -0.7), 1e-6, 1e-6);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let sh = SphericalHarmonics::new(3);
        let (_, dy) = sh.eval_with_gradients(&Vector3::new(0.1, 0.2, 0.3)).unwrap();
        assert_eq!(dy[0], Vector3::zeros());
    }

    fn arb_vec() -> impl Strategy<Value = Vector3<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-4)
            .prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    fn arb_rot() -> impl Strategy<Value = Rotation3<f64>> {
        (arb_vec(), 0.0..(2.0 * PI))
            .prop_map(|(a, t)| Rotation3::from_axis_angle(&Unit::new_normalize(a), t))
    }

    proptest! {
        #[test]
        fn conjugation_symmetry(r in arb_vec()) {
            let sh = SphericalHarmonics::new(10);
            let y = sh.eval(&r).unwrap();
            for l in 0..=10usize {
                for m in 1..=l as i32 {
                    let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let d = y[lm_index(l, -m)] - y[lm_index(l, m)].conj() * s;
                    prop_assert!(d.norm() < 1e-13);
                }
            }
        }

        #[test]
        fn parity(r in arb_vec()) {
            let sh = SphericalHarmonics::new(10);
            let y = sh.eval(&r).unwrap();
            let ym = sh.eval(&(-r)).unwrap();
            for l in 0..=10usize {
                let s = if l % 2 == 0 { 1.0 } else { -1.0 };
                for m in -(l as i32)..=l as i32 {
                    prop_assert!((ym[lm_index(l, m)] - y[lm_index(l, m)] * s).norm() < 1e-13);
                }
            }
        }

        #[test]
        fn addition_theorem_rotation_invariance(a in arb_vec(), b in arb_vec(), q in arb_rot()) {
            let sh = SphericalHarmonics::new(4);
            let (ya, yb) = (sh.eval(&a).unwrap(), sh.eval(&b).unwrap());
            let (qa, qb) = (sh.eval(&(q * a)).unwrap(), sh.eval(&(q * b)).unwrap());
            for l in 0..=4usize {
                let mut s0 = c(0.0, 0.0);
                let mut s1 = c(0.0, 0.0);
                for m in -(l as i32)..=l as i32 {
                    let i = lm_index(l, m);
                    s0 += ya[i] * yb[i].conj();
                    s1 += qa[i] * qb[i].conj();
                }
                prop_assert!((s0 - s1).norm() < 1e-11);
            }
        }

        #[test]
        fn radial_derivative_vanishes(r in arb_vec()) {
            let sh = SphericalHarmonics::new(8);
            let (_, dy) = sh.eval_with_gradients(&r).unwrap();
            for g in dy {
                let d = g.x * r.x + g.y * r.y + g.z * r.z;
                prop_assert!(d.norm() < 1e-12);
            }
        }

        #[test]
        fn gradients_match_fd(r in arb_vec()) {
            let sh = SphericalHarmonics::new(6);
            fd_check(&sh, r, 1e-6, 1e-6);
        }
    }
}
