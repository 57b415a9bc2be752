//! Clebsch–Gordan coefficients ⟨l1 m1 l2 m2 | L M⟩ in the standard phase.
//!
//! The Racah sum is evaluated in exact rational arithmetic; only the final
//! square root is taken in floating point. Results are memoised.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use parking_lot::RwLock;
use rustc_hash::FxHashMap;
use std::cell::Cell;
use std::sync::OnceLock;

static TABLE: OnceLock<RwLock<FxHashMap<u64, f64>>> = OnceLock::new();

thread_local! {
    static SIGN_DEFECT: Cell<bool> = const { Cell::new(false) };
}

/// Test hook: while `f` runs on this thread, coefficients with `m1 > 0` and
/// `l2 > 0` come back with the wrong sign. Used as a negative control for the
/// invariance checks.
pub fn with_sign_defect<T>(f: impl FnOnce() -> T) -> T {
    SIGN_DEFECT.with(|d| d.set(true));
    let out = f();
    SIGN_DEFECT.with(|d| d.set(false));
    out
}

pub fn sign_defect_active() -> bool {
    SIGN_DEFECT.with(|d| d.get())
}

fn pack(l1: i64, m1: i64, l2: i64, m2: i64, l: i64) -> u64 {
    let f = |v: i64| (v + 512) as u64 & 0x3ff;
    f(l1) | f(m1) << 10 | f(l2) << 20 | f(m2) << 30 | f(l) << 40
}

pub fn clebsch_gordan(l1: i64, m1: i64, l2: i64, m2: i64, l: i64, m: i64) -> f64 {
    if m1 + m2 != m
        || l < 0
        || l1 < 0
        || l2 < 0
        || m1.abs() > l1
        || m2.abs() > l2
        || m.abs() > l
        || l < (l1 - l2).abs()
        || l > l1 + l2
    {
        return 0.0;
    }
    let key = pack(l1, m1, l2, m2, l);
    let table = TABLE.get_or_init(|| RwLock::new(FxHashMap::default()));
    let hit = table.read().get(&key).copied();
    let v = match hit {
        Some(v) => v,
        None => {
            let v = racah(l1, m1, l2, m2, l, m);
            table.write().insert(key, v);
            v
        }
    };
    if l2 > 0 && m1 > 0 && sign_defect_active() {
        -v
    } else {
        v
    }
}

fn fact(n: i64) -> BigInt {
    let mut f = BigInt::one();
    for k in 2..=n {
        f *= k;
    }
    f
}

fn racah(l1: i64, m1: i64, l2: i64, m2: i64, l: i64, m: i64) -> f64 {
    let num = BigInt::from(2 * l + 1)
        * fact(l + l1 - l2)
        * fact(l - l1 + l2)
        * fact(l1 + l2 - l)
        * fact(l + m)
        * fact(l - m)
        * fact(l1 - m1)
        * fact(l1 + m1)
        * fact(l2 - m2)
        * fact(l2 + m2);
    let den = fact(l1 + l2 + l + 1);
    let pref = BigRational::new(num, den);

    let kmin = 0.max(l2 - l - m1).max(l1 - l + m2);
    let kmax = (l1 + l2 - l).min(l1 - m1).min(l2 + m2);
    let mut sum = BigRational::zero();
    for k in kmin..=kmax {
        let d = fact(k)
            * fact(l1 + l2 - l - k)
            * fact(l1 - m1 - k)
            * fact(l2 + m2 - k)
            * fact(l - l2 + m1 + k)
            * fact(l - l1 - m2 + k);
        let t = BigRational::new(BigInt::one(), d);
        if k % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    let sq = pref * &sum * &sum;
    sign * ratio_to_f64(&sq).sqrt()
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Keep 64 significant bits in the quotient.
    let n = r.numer();
    let d = r.denom();
    let sh = d.bits() as i64 - n.bits() as i64 + 64;
    let q = if sh >= 0 {
        (n << (sh as usize)) / d
    } else {
        n / (d << ((-sh) as usize))
    };
    q.to_f64().unwrap() * 2f64.powi(-(sh as i32))
}
