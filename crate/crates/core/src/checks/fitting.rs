use super::{timed, CheckOutcome};
use crate::basis::{generate_spec, RpiBasis, SpecLimits};
use crate::coupling::CouplingCache;
use crate::error::Result;
use crate::fit::{assemble, basis_values, gramian_condition, solve, LossConfig};
use crate::geom::{Environment, Neighbor};
use crate::radial::RadialParams;
use crate::synth::{generate_dataset, random_direction, DatasetConfig, SyntheticTruth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct ConvergenceParams {
    pub species: Vec<u32>,
    pub truth_order: usize,
    pub truth_degree: f64,
    pub fit_order: usize,
    /// Nested fit degrees, increasing.
    pub degrees: Vec<f64>,
    pub n_frames: usize,
    /// Amplitude of the out-of-span pair term.
    pub perturbation: f64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            species: vec![14],
            truth_order: 2,
            truth_degree: 6.0,
            fit_order: 3,
            degrees: vec![4.0, 6.0, 8.0, 10.0],
            n_frames: 60,
            perturbation: 0.2,
        }
    }
}

/// Squared residual per observation along the nested specs, and the data scale `‖y‖/√Z`.
fn nested_fits(p: &ConvergenceParams, cache: &CouplingCache, perturbation: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
    let radial = RadialParams::new(0, 1.0, 3.0);
    let mut tl = SpecLimits::new(p.truth_order, p.truth_degree);
    tl.species = p.species.clone();
    let tb = RpiBasis::new(generate_spec(&tl, cache)?, radial.clone(), cache)?;
    let truth = SyntheticTruth::random(&tb, rng, 1.0, perturbation)?;
    let frames = generate_dataset(&truth, &DatasetConfig { n_frames: p.n_frames, ..Default::default() }, rng)?;
    let loss = LossConfig::default();
    let mut out = Vec::new();
    let mut scale = 0.0;
    for &d in &p.degrees {
        let mut l = SpecLimits::new(p.fit_order, d);
        l.species = p.species.clone();
        let basis = RpiBasis::new(generate_spec(&l, cache)?, radial.clone(), cache)?;
        let design = assemble(&frames, &basis, &loss)?;
        let fit = solve(&design, &loss)?;
        let z = design.nrows() as f64;
        scale = design.y.norm() / z.sqrt();
        out.push(fit.residual * fit.residual / z);
    }
    Ok((out, scale))
}

pub const NESTING_TOL: f64 = 1e-10;
pub const INTERPOLATION_TOL: f64 = 1e-6;

/// Nested least-squares fits to a synthetic body-ordered PES.
pub fn convergence(p: &ConvergenceParams, seed: u64) -> Result<CheckOutcome> {
    timed("convergence", seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cache = CouplingCache::default();
        let (inside, scale_in) = nested_fits(p, &cache, 0.0, &mut rng)?;
        let (outside, scale_out) = nested_fits(p, &cache, p.perturbation, &mut rng)?;
        let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + NESTING_TOL);
        let strict = outside.windows(2).all(|w| w[1] < w[0]);
        let contained: Vec<f64> = p
            .degrees
            .iter()
            .zip(&inside)
            .filter(|(d, _)| **d >= p.truth_degree && p.fit_order >= p.truth_order)
            .map(|(_, j)| j.sqrt() / scale_in)
            .collect();
        let interp = !contained.is_empty() && contained.iter().all(|&r| r < INTERPOLATION_TOL);
        let fmt = |v: &[f64], s: f64| v.iter().map(|j| format!("{:.2e}", j.sqrt() / s)).collect::<Vec<_>>().join(" → ");
        Ok((
            monotone(&inside) && monotone(&outside) && strict && interp,
            format!(
                "relative RMSE over degrees {:?}: truth in span {}; perturbed {} (strictly decreasing: {strict}); nesting tol {NESTING_TOL:.0e} on RMSE², span tol {INTERPOLATION_TOL:.0e}",
                p.degrees,
                fmt(&inside, scale_in),
                fmt(&outside, scale_out)
            ),
        ))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditioningCell {
    pub order: usize,
    pub degree: usize,
    pub n_all: usize,
    pub n_pure: usize,
    pub cond_all: f64,
    pub cond_pure: f64,
}

pub const COND_ORDERS: [usize; 5] = [2, 3, 4, 5, 6];
pub const COND_DEGREES: [usize; 5] = [4, 6, 8, 10, 12];
pub const COND_SAMPLES: usize = 4000;

/// Environments with 1 to 6 neighbours, radii drawn from the radial measure.
fn sample_environments(basis: &RpiBasis, m: usize, rng: &mut ChaCha8Rng) -> Vec<Environment> {
    let rb = &basis.onep.radial;
    let (xa, xb) = rb.x_range();
    let prm = rb.params();
    (0..m)
        .map(|_| {
            let j = rng.gen_range(1..=6);
            Environment {
                center_species: 0,
                center: 0,
                neighbors: (0..j)
                    .map(|i| {
                        let r = prm.transform.inverse(rng.gen_range(xa..xb), prm.r_nn);
                        Neighbor { r: random_direction(rng) * r, z: 0, index: i + 1 }
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Gramian condition numbers of the all-orders and pure-order bases on the (order, degree)
/// grid. One sample set serves every cell, so each cell's columns are a subset of the
/// largest basis and nested cells are compared on the same data.
pub fn conditioning(seed: u64) -> Result<(CheckOutcome, Vec<ConditioningCell>)> {
    let mut cells = Vec::new();
    let out = timed("conditioning", seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cache = CouplingCache::default();
        let limits = SpecLimits::new(COND_ORDERS[4], COND_DEGREES[4] as f64);
        let spec = generate_spec(&limits, &cache)?;
        let basis = RpiBasis::new(spec, RadialParams::new(0, 1.0, 3.0), &cache)?;
        let envs = sample_environments(&basis, COND_SAMPLES, &mut rng);
        let values = basis_values(&basis, &envs)?;
        let blocks: Vec<(usize, f64, std::ops::Range<usize>)> = basis
            .tuples
            .iter()
            .zip(&basis.spec.tuples)
            .map(|(t, e)| (e.labels.len(), limits.degree.of(&e.labels), t.offset..t.offset + e.n_rpi))
            .collect();
        let select = |keep: &dyn Fn(usize, f64) -> bool| -> Vec<usize> {
            blocks.iter().filter(|b| keep(b.0, b.1)).flat_map(|b| b.2.clone()).collect()
        };
        for &n in &COND_ORDERS {
            for &d in &COND_DEGREES {
                let all = select(&|o, g| o <= n && g <= d as f64);
                let pure = select(&|o, g| o == n && g <= d as f64);
                cells.push(ConditioningCell {
                    order: n,
                    degree: d,
                    n_all: all.len(),
                    n_pure: pure.len(),
                    cond_all: gramian_condition(&values.select_columns(&all)),
                    cond_pure: gramian_condition(&values.select_columns(&pure)),
                });
            }
        }
        let at = |n: usize, d: usize| cells.iter().find(|c| c.order == n && c.degree == d).unwrap();
        let mut bad = Vec::new();
        for &n in &COND_ORDERS {
            for &d in &COND_DEGREES {
                let c = at(n, d);
                if c.cond_pure >= c.cond_all {
                    bad.push(format!("pure ≥ all at N={n} deg={d}"));
                }
                if d > COND_DEGREES[0] && c.cond_all <= at(n, d - 2).cond_all {
                    bad.push(format!("all not increasing in degree at N={n} deg={d}"));
                }
                if d > COND_DEGREES[0] && c.n_pure > at(n, d - 2).n_pure && c.cond_pure <= at(n, d - 2).cond_pure {
                    bad.push(format!("pure not increasing in degree at N={n} deg={d}"));
                }
                if n > COND_ORDERS[0] && c.cond_all <= at(n - 1, d).cond_all {
                    bad.push(format!("all not increasing in order at N={n} deg={d}"));
                }
            }
        }
        let corner = at(COND_ORDERS[4], COND_DEGREES[4]);
        Ok((
            bad.is_empty(),
            format!(
                "{} cells from {} samples of {} functions; κ(all) {:.1e} → {:.1e}, κ(pure) at N={} deg={}: {:.1e}; violations {:?}",
                cells.len(),
                COND_SAMPLES,
                basis.len_per_center(),
                at(2, COND_DEGREES[0]).cond_all,
                corner.cond_all,
                corner.order,
                corner.degree,
                corner.cond_pure,
                bad
            ),
        ))
    })?;
    Ok((out, cells))
}
