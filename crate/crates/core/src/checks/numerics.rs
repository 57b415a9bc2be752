use super::{dims, timed, CheckOutcome};
use crate::basis::{generate_spec, RpiBasis, SpecLimits, StandardEvaluator};
use crate::bench::{bench_prepared, BenchRow, KeyCell, DEGREES, R_CUT};
use crate::coupling::{abstract_gram, projector_distance, ri_block, CouplingCache, Method};
use crate::dag::Graph;
use crate::error::Result;
use crate::geom::Configuration;
use crate::quadrature::{gauss_legendre_on, sphere_rule};
use crate::radial::{Cutoff, RadialBasis, RadialParams, Transform};
use crate::sphharm::SphericalHarmonics;
use crate::synth::{random_cluster, random_environment, SyntheticTruth};
use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const COUPLING_TOL: f64 = 1e-10;

/// Sorted `l`-tuples of every length `1..=max_order` with entries `≤ l_max` and even `Σl`
/// (odd sums carry no O(3) invariants).
fn all_bl(max_order: usize, l_max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, lo: usize, left: usize, l_max: usize) {
        if !cur.is_empty() && cur.iter().sum::<usize>() % 2 == 0 {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for l in lo..=l_max {
            cur.push(l);
            rec(out, cur, l, left - 1, l_max);
            cur.pop();
        }
    }
    rec(&mut out, &mut cur, 0, max_order, l_max);
    out
}

/// SVD and Clebsch–Gordan constructions of the rotation-invariant blocks span the same space.
pub fn coupling(max_order: usize, l_max: usize) -> Result<CheckOutcome> {
    timed("coupling", 0, || {
        let mut worst: f64 = 0.0;
        let mut rank_mismatch = Vec::new();
        let tuples = all_bl(max_order, l_max);
        for bl in &tuples {
            let a = ri_block(bl, Method::Svd)?;
            let b = ri_block(bl, Method::CgChain)?;
            if a.ncols() != b.ncols() {
                rank_mismatch.push(bl.clone());
                continue;
            }
            worst = worst.max(projector_distance(&a.u, &b.u));
        }
        Ok((
            worst < COUPLING_TOL && rank_mismatch.is_empty(),
            format!(
                "{} l-tuples (N≤{max_order}, l≤{l_max}): worst projector distance {worst:.2e} (tol {COUPLING_TOL:.0e}); rank mismatches {:?}",
                tuples.len(),
                rank_mismatch
            ),
        ))
    })
}

pub const RADIAL_TOL: f64 = 1e-9;
pub const SH_TOL: f64 = 1e-10;
pub const RPI_TOL: f64 = 1e-10;

fn identity_error(g: &DMatrix<f64>) -> f64 {
    (g - DMatrix::identity(g.nrows(), g.ncols())).amax()
}

fn radial_gram(b: &RadialBasis, nq: usize) -> DMatrix<f64> {
    let (xc, x0) = b.x_range();
    let (xs, ws) = gauss_legendre_on(nq, xc, x0);
    let n = b.len();
    let mut g = DMatrix::zeros(n, n);
    for (x, w) in xs.iter().zip(&ws) {
        let p = b.eval_x(*x);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] += w / (x0 - xc) * p[i] * p[j];
            }
        }
    }
    g
}

/// Radial, spherical-harmonic and abstract RPI Gramians are identities.
pub fn orthogonality() -> Result<CheckOutcome> {
    timed("orthogonality", 0, || {
        let mut radial: f64 = 0.0;
        for t in [Transform::OnePlus { q: 2.0 }, Transform::Exponential { lambda: 1.3 }, Transform::Agnesi { p: 4.0 }] {
            for c in [Cutoff::OneSided { p: 2.0 }, Cutoff::TwoSided { p: 2.0 }] {
                for n_max in [0, 5, 12, 20] {
                    let mut prm = RadialParams::new(n_max, 1.0, 3.0);
                    prm.transform = t;
                    prm.cutoff = c;
                    radial = radial.max(identity_error(&radial_gram(&RadialBasis::new(prm)?, 256)));
                }
            }
        }

        let sh = SphericalHarmonics::new(6);
        let n = sh.len();
        let mut g = vec![Complex64::new(0.0, 0.0); n * n];
        for (x, w) in sphere_rule(2 * 6 + 2) {
            let y = sh.eval(&x)?;
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] += y[i] * y[j].conj() * w;
                }
            }
        }
        let mut shw: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                shw = shw.max((g[i * n + j] - e).norm());
            }
        }

        let cache = CouplingCache::default();
        let mut limits = SpecLimits::new(4, 10.0);
        limits.species = vec![0, 1];
        let mut blocks = Vec::new();
        for t in generate_spec(&limits, &cache)?.tuples {
            blocks.push(cache.get(&t.labels)?);
        }
        for t in generate_spec(&SpecLimits::new(5, 10.0), &cache)?.tuples {
            blocks.push(cache.get(&t.labels)?);
        }
        for r in dims::SMALL_TABLE.iter().chain(dims::APPENDIX_TABLE) {
            blocks.push(cache.get(&dims::row_labels(r))?);
        }
        let rpi = blocks
            .iter()
            .filter(|b| b.ncols() > 0)
            .map(|b| identity_error(&abstract_gram(b)))
            .fold(0.0, f64::max);
        Ok((
            radial <= RADIAL_TOL && shw <= SH_TOL && rpi <= RPI_TOL,
            format!(
                "radial (n≤20) {radial:.1e} tol {RADIAL_TOL:.0e}; Y_l^m (l≤6) {shw:.1e} tol {SH_TOL:.0e}; RPI abstract product over {} blocks {rpi:.1e} tol {RPI_TOL:.0e}",
                blocks.len()
            ),
        ))
    })
}

#[derive(Clone, Debug)]
pub struct EvaluatorParams {
    pub orders: Vec<usize>,
    pub degrees: Vec<usize>,
    pub n_potentials: usize,
}

impl Default for EvaluatorParams {
    fn default() -> Self {
        EvaluatorParams { orders: (2..=7).collect(), degrees: DEGREES.to_vec(), n_potentials: 100 }
    }
}

pub const EVALUATOR_TOL: f64 = 1e-10;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn rel_vec(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Recursive and standard evaluators agree on energies and forces for random potentials.
pub fn evaluators(p: &EvaluatorParams, seed: u64) -> Result<CheckOutcome> {
    timed("evaluators", seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut we, mut wf) = (0.0f64, 0.0f64);
        let mut cells = 0;
        let mut largest = (0, 0, 0, 0);
        for &n in &p.orders {
            for &d in &p.degrees {
                let cell = KeyCell::new(n, d)?;
                let block = cell.onep.flat.block();
                let c = cell.random_coeffs(&mut rng);
                let mut graph = Graph::build(&cell.keys, &c);
                let mut std = StandardEvaluator::new(cell.keys.clone(), c);
                let dens: Vec<_> = (0..4)
                    .map(|_| {
                        let j = rng.gen_range(6..=10);
                        cell.onep.project_with_gradients(&random_environment(&mut rng, j, &[0], 0.8, 0.95 * R_CUT))
                    })
                    .collect::<Result<_>>()?;
                let mut ws = vec![Complex64::new(0.0, 0.0); cell.onep.len()];
                let mut wr = ws.clone();
                for k in 0..p.n_potentials {
                    if k > 0 {
                        let c = cell.random_coeffs(&mut rng);
                        graph.set_coeffs(&c);
                        std.coeffs = c;
                    }
                    let den = &dens[k % dens.len()];
                    let vs = std.eval_adjoint(&den.a, &mut ws);
                    let st = graph.forward(&den.a)?;
                    graph.backward(&st, &mut wr);
                    we = we.max(rel(vs, st.value));
                    wf = wf.max(rel_vec(&den.gradients(&ws, block), &den.gradients(&wr, block)));
                }
                cells += 1;
                if cell.keys.len() > largest.2 {
                    largest = (n, d, cell.keys.len(), graph.len());
                }
            }
        }
        Ok((
            we <= EVALUATOR_TOL && wf <= EVALUATOR_TOL,
            format!(
                "{cells} cells × {} potentials: energy {we:.1e}, forces {wf:.1e} (tol {EVALUATOR_TOL:.0e}); largest cell N={} deg={} with {} keys, {} nodes",
                p.n_potentials, largest.0, largest.1, largest.2, largest.3
            ),
        ))
    })
}

/// Wall-time ordering recursive ≤ standard where it is expected (N ≥ 4, degree ≥ 12).
pub fn performance(seed: u64) -> Result<(CheckOutcome, Vec<BenchRow>)> {
    let mut rows = Vec::new();
    let out = timed("performance", seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 2..=7 {
            for &d in &DEGREES {
                let cell = KeyCell::new(n, d)?;
                let c = cell.random_coeffs(&mut rng);
                let graph = Graph::build(&cell.keys, &c);
                let std = StandardEvaluator::new(cell.keys.clone(), c);
                let n_env = (2_000_000 / cell.keys.len().max(1)).clamp(4, 200);
                rows.push(bench_prepared(&cell, &std, &graph, &mut rng, n_env, 9)?);
            }
        }
        let gated: Vec<&BenchRow> = rows.iter().filter(|r| r.order >= 4 && r.degree >= 12).collect();
        let slow: Vec<String> = gated.iter().filter(|r| r.t_rec > r.t_std).map(|r| format!("N={} deg={}", r.order, r.degree)).collect();
        let (lo, hi) = gated.iter().map(|r| r.speedup()).fold((f64::INFINITY, 0.0f64), |(a, b), s| (a.min(s), b.max(s)));
        Ok((
            slow.is_empty(),
            format!("{} gated cells, speedup {lo:.2}× to {hi:.2}×; slower cells {slow:?}", gated.len()),
        ))
    })?;
    Ok((out, rows))
}

pub const GRADIENT_TOL: f64 = 1e-6;

fn random_frame<R: Rng>(rng: &mut R, species: &[u32], periodic: bool) -> Configuration {
    let n = rng.gen_range(4..=8);
    if !periodic {
        return random_cluster(rng, n, species, 0.9, 2.0);
    }
    // skewed cell, smaller than the cutoff sphere so that images interact
    let l = 3.2;
    let cell = Matrix3::new(l, 0.0, 0.0, 0.3, l, 0.0, -0.2, 0.1, l);
    let (at, inv) = (cell.transpose(), cell.transpose().try_inverse().unwrap());
    let mut pos: Vec<Vector3<f64>> = Vec::new();
    while pos.len() < n {
        let p = at * Vector3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
        let far = pos.iter().all(|q| (at * (inv * (p - q)).map(|x| x - x.round())).norm() >= 0.9);
        if far {
            pos.push(p);
        }
    }
    let sp = (0..n).map(|_| species[rng.gen_range(0..species.len())]).collect();
    let mut c = Configuration::cluster(pos, sp);
    c.cell = Some(cell);
    c.periodic = [true; 3];
    c
}

fn scaled(c: &Configuration, m: &Matrix3<f64>) -> Configuration {
    let mut s = c.clone();
    s.positions.iter_mut().for_each(|p| *p = m * *p);
    // cell rows are lattice vectors
    s.cell = c.cell.map(|cell| (m * cell.transpose()).transpose());
    s
}

/// Adjoint forces and virials against central finite differences.
pub fn gradients(n_configs: usize, seed: u64) -> Result<CheckOutcome> {
    timed("gradients", seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cache = CouplingCache::default();
        let mut limits = SpecLimits::new(4, 10.0);
        limits.species = vec![1, 8];
        let spec = generate_spec(&limits, &cache)?;
        let basis = RpiBasis::new(spec, RadialParams::new(0, 1.0, 3.0), &cache)?;
        let pot = SyntheticTruth::random(&basis, &mut rng, 1.0, 0.0)?.potential;
        let (mut wf5, mut wf6, mut wv, mut wm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut n_periodic = 0;
        for k in 0..n_configs {
            let periodic = k % 5 == 4;
            n_periodic += periodic as usize;
            let c = random_frame(&mut rng, &[1, 8], periodic);
            let ev = pot.evaluate(&c)?;
            let fmax = ev.forces.iter().map(|f| f.amax()).fold(0.0, f64::max);
            for (h, worst) in [(1e-5, &mut wf5), (1e-6, &mut wf6)] {
                for i in 0..c.len() {
                    for a in 0..3 {
                        let mut p = c.clone();
                        p.positions[i][a] += h;
                        let ep = pot.energy(&p)?;
                        p.positions[i][a] -= 2.0 * h;
                        let em = pot.energy(&p)?;
                        let fd = -(ep - em) / (2.0 * h);
                        *worst = worst.max((fd - ev.forces[i][a]).abs() / fmax.max(f64::MIN_POSITIVE));
                    }
                }
            }
            let h = 1e-5;
            let fd_strain = |m: Matrix3<f64>| -> Result<f64> {
                let ep = pot.energy(&scaled(&c, &(Matrix3::identity() + m * h)))?;
                let em = pot.energy(&scaled(&c, &(Matrix3::identity() - m * h)))?;
                Ok((ep - em) / (2.0 * h))
            };
            let tr = fd_strain(Matrix3::identity())?;
            let scale = ev.virial.amax().max(f64::MIN_POSITIVE);
            wv = wv.max((tr + ev.virial.trace()).abs() / ev.virial.trace().abs().max(1e-3 * scale));
            for a in 0..3 {
                for b in 0..3 {
                    let mut m = Matrix3::zeros();
                    m[(a, b)] = 1.0;
                    wm = wm.max((fd_strain(m)? + ev.virial[(b, a)]).abs() / scale);
                }
            }
        }
        Ok((
            wf5 <= GRADIENT_TOL && wf6 <= GRADIENT_TOL && wv <= GRADIENT_TOL && wm <= GRADIENT_TOL,
            format!(
                "{n_configs} configurations ({n_periodic} periodic), {} functions × 2 species: forces h=1e-5 {wf5:.1e}, h=1e-6 {wf6:.1e}; virial trace {wv:.1e}, full virial {wm:.1e} (tol {GRADIENT_TOL:.0e})",
                basis.len_per_center()
            ),
        ))
    })
}
