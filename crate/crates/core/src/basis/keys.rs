//! Correlation keys: sorted multisets of flat one-particle indices packed into a `u128`.

use super::spec::{DegreeKind, SpecLimits};
use super::onep::FlatIndex;

pub type Key = u128;

/// Up to eight 16-bit slots.
pub const MAX_ORDER: usize = 8;

/// Packs indices (already sorted ascending); the first index lands in the top slot.
pub fn pack(idx: &[u16]) -> Key {
    debug_assert!(idx.len() <= MAX_ORDER);
    debug_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
    let mut k: u128 = 0;
    for (s, &i) in idx.iter().enumerate() {
        k |= ((i as u128) + 1) << (16 * (MAX_ORDER - 1 - s));
    }
    k
}

pub fn pack_unsorted(idx: &[u16]) -> Key {
    let mut v = idx.to_vec();
    v.sort_unstable();
    pack(&v)
}

pub fn order(k: Key) -> usize {
    (0..MAX_ORDER)
        .take_while(|&s| (k >> (16 * (MAX_ORDER - 1 - s))) & 0xffff != 0)
        .count()
}

pub fn unpack(k: Key) -> Vec<u16> {
    let mut out = Vec::with_capacity(MAX_ORDER);
    for s in 0..MAX_ORDER {
        let v = ((k >> (16 * (MAX_ORDER - 1 - s))) & 0xffff) as u16;
        if v == 0 {
            break;
        }
        out.push(v - 1);
    }
    out
}

/// All keys with `Σm = 0`, `Σl` even and degree within `limits`.
pub fn enumerate_keys(limits: &SpecLimits, flat: &FlatIndex) -> Vec<Key> {
    let deg = limits.degree;
    let md = limits.max_degree + 1e-12;
    let mut singles: Vec<(u16, f64, i32, usize)> = Vec::new();
    for z in 0..flat.n_species {
        for n in 0..=flat.n_max {
            for l in 0..=flat.l_max {
                let d = deg.single(n, l);
                if d > md {
                    continue;
                }
                for m in -(l as i32)..=(l as i32) {
                    singles.push((flat.index(z, n, l, m) as u16, d, m, l));
                }
            }
        }
    }
    singles.sort_by_key(|s| s.0);
    // largest Σl reachable by `k` more particles with degree budget `b`
    let l_room = |b: f64, k: usize| -> i64 {
        if b < 0.0 {
            return -1;
        }
        let per = deg.l_bound(b).min(flat.l_max) as i64;
        match deg {
            DegreeKind::Tensor => per * k as i64,
            DegreeKind::Total => (b.floor() as i64).min(per * k as i64),
            DegreeKind::WeightedTotal { wl } => ((b / wl).floor() as i64).min(per * k as i64),
        }
    };
    let mut out = Vec::new();
    let mut cur: Vec<u16> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        start: usize,
        acc: f64,
        msum: i32,
        lsum: usize,
        singles: &[(u16, f64, i32, usize)],
        deg: DegreeKind,
        md: f64,
        nmax: usize,
        l_room: &dyn Fn(f64, usize) -> i64,
        cur: &mut Vec<u16>,
        out: &mut Vec<Key>,
    ) {
        for i in start..singles.len() {
            let (k, d1, m, l) = singles[i];
            let d = deg.combine(acc, d1);
            if d > md {
                continue;
            }
            cur.push(k);
            let (ms, ls) = (msum + m, lsum + l);
            if ms == 0 && ls % 2 == 0 {
                out.push(pack(cur));
            }
            if cur.len() < nmax {
                let budget = match deg {
                    DegreeKind::Tensor => md,
                    _ => md - d,
                };
                let room = l_room(budget, nmax - cur.len());
                if (ms.unsigned_abs() as i64) <= room {
                    rec(i, d, ms, ls, singles, deg, md, nmax, l_room, cur, out);
                }
            }
            cur.pop();
        }
    }
    rec(0, 0.0, 0, 0, &singles, deg, md, limits.max_order, &l_room, &mut cur, &mut out);
    out.sort_unstable_by(|a, b| order(*a).cmp(&order(*b)).then(a.cmp(b)));
    out
}
