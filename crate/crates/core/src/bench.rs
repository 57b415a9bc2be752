//! Standard vs recursive evaluation on random potentials over full correlation key sets.

use crate::basis::{enumerate_keys, Key, OneParticleBasis, SpecLimits, StandardEvaluator};
use crate::dag::Graph;
use crate::error::Result;
use crate::radial::{RadialBasis, RadialParams};
use crate::synth::random_environment;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::fmt::Write;
use std::time::Instant;

/// Degrees of the benchmark grid.
pub const DEGREES: [usize; 7] = [8, 12, 14, 16, 18, 20, 22];

/// Radii used for random benchmark environments.
pub const R_NN: f64 = 1.0;
pub const R_CUT: f64 = 3.0;

/// Every `A`-correlation of order ≤ `order` and weighted degree ≤ `degree`, single species.
#[derive(Clone, Debug)]
pub struct KeyCell {
    pub order: usize,
    pub degree: usize,
    pub onep: OneParticleBasis,
    pub keys: Vec<Key>,
}

impl KeyCell {
    pub fn new(order: usize, degree: usize) -> Result<Self> {
        let limits = SpecLimits::new(order, degree as f64);
        let radial = RadialBasis::new(RadialParams::new(limits.n_max(), R_NN, R_CUT))?;
        let onep = OneParticleBasis::new(radial, limits.l_max(), vec![0]);
        let keys = enumerate_keys(&limits, &onep.flat);
        Ok(KeyCell { order, degree, onep, keys })
    }

    pub fn random_coeffs<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.keys.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Density projections of random environments with 6 to 10 neighbours.
    pub fn random_densities<R: Rng>(&self, rng: &mut R, count: usize) -> Result<Vec<Vec<Complex64>>> {
        (0..count)
            .map(|_| {
                let j = rng.gen_range(6..=10);
                let env = random_environment(rng, j, &[0], 0.8, 0.95 * R_CUT);
                self.onep.project(&env)
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub order: usize,
    pub degree: usize,
    pub n_basis: usize,
    pub n_nodes: usize,
    pub n_aux: usize,
    /// Seconds per site energy.
    pub t_std: f64,
    pub t_rec: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.t_std / self.t_rec
    }
}

/// Times one cell: best of `reps` passes over `n_env` random environments.
pub fn bench_cell<R: Rng>(cell: &KeyCell, rng: &mut R, n_env: usize, reps: usize) -> Result<BenchRow> {
    let c = cell.random_coeffs(rng);
    let graph = Graph::build(&cell.keys, &c);
    let std = StandardEvaluator::new(cell.keys.clone(), c);
    bench_prepared(cell, &std, &graph, rng, n_env, reps)
}

pub fn bench_prepared<R: Rng>(
    cell: &KeyCell,
    std: &StandardEvaluator,
    graph: &Graph,
    rng: &mut R,
    n_env: usize,
    reps: usize,
) -> Result<BenchRow> {
    let dens = cell.random_densities(rng, n_env)?;
    let mut buf = Vec::with_capacity(graph.len());
    let (mut t_std, mut t_rec) = (f64::INFINITY, f64::INFINITY);
    let mut sink = 0.0;
    // alternate the two evaluators so that background load hits both alike
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        for a in &dens {
            sink += std.eval(a);
        }
        t_std = t_std.min(t.elapsed().as_secs_f64());
        let t = Instant::now();
        for a in &dens {
            sink += graph.value(a, &mut buf)?;
        }
        t_rec = t_rec.min(t.elapsed().as_secs_f64());
    }
    std::hint::black_box(sink);
    let n = dens.len().max(1) as f64;
    Ok(BenchRow {
        order: cell.order,
        degree: cell.degree,
        n_basis: cell.keys.len(),
        n_nodes: graph.len(),
        n_aux: graph.n_aux(),
        t_std: t_std / n,
        t_rec: t_rec / n,
    })
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("N,degree,n_basis,n_nodes,n_aux,t_std,t_rec\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{:.6e},{:.6e}", r.order, r.degree, r.n_basis, r.n_nodes, r.n_aux, r.t_std, r.t_rec);
    }
    s
}

/// Speedup against degree, one polyline per order.
pub fn to_svg(rows: &[BenchRow]) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let dmin = rows.iter().map(|r| r.degree).min().unwrap_or(0) as f64;
    let dmax = rows.iter().map(|r| r.degree).max().unwrap_or(1) as f64;
    let smax = rows.iter().map(|r| r.speedup()).fold(1.0, f64::max) * 1.1;
    let x = |d: f64| pad + (d - dmin) / (dmax - dmin).max(1.0) * (w - 2.0 * pad);
    let y = |s: f64| h - pad - s / smax * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{0}" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="gray" stroke-dasharray="4"/>"#, y(1.0), w - pad);
    let _ = writeln!(s, r#"<text x="{0}" y="{1}" text-anchor="middle">degree</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{0}" transform="rotate(-90 14 {0})" text-anchor="middle">speedup</text>"#, h / 2.0);
    let mut orders: Vec<usize> = rows.iter().map(|r| r.order).collect();
    orders.sort_unstable();
    orders.dedup();
    for (i, n) in orders.iter().enumerate() {
        let mut pts: Vec<&BenchRow> = rows.iter().filter(|r| r.order == *n).collect();
        pts.sort_by_key(|r| r.degree);
        let path: Vec<String> = pts.iter().map(|r| format!("{:.1},{:.1}", x(r.degree as f64), y(r.speedup()))).collect();
        let c = colors[i % colors.len()];
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{0}" y="{1}" fill="{c}">N = {n}</text>"#, w - pad - 40.0, pad + 16.0 * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn csv_layout_and_single_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cell = KeyCell::new(1, 8).unwrap();
        let row = bench_cell(&cell, &mut rng, 4, 2).unwrap();
        // order one: nothing to reuse
        assert_eq!(row.n_aux, 0);
        assert_eq!(row.n_nodes, row.n_basis);
        let csv = to_csv(&[row.clone()]);
        assert!(csv.starts_with("N,degree,n_basis,n_nodes,n_aux,t_std,t_rec\n"));
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 7);
        assert!(to_svg(&[row]).contains("<polyline"));
    }
}
