//! Weighted linear least squares for basis coefficients.

use crate::basis::RpiBasis;
use crate::error::{AceError, Result};
use crate::geom::{neighbor_environments, Configuration, Environment};
use crate::potential::{accumulate_site, Potential};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solver {
    Qr,
    Rrqr { tol: f64 },
    Lsqr { tol: f64, max_iter: usize },
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Qr
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// `w̄_E`; the energy row of frame `R` gets `w̄_E / #R`.
    pub energy_weight: f64,
    /// `w̄_F`, applied to every force component.
    pub force_weight: f64,
    pub ridge: f64,
    pub solver: Solver,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            energy_weight: 30.0,
            force_weight: 1.0,
            ridge: 0.0,
            solver: Solver::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_weight >= 0.0 && self.force_weight >= 0.0 && self.ridge >= 0.0) {
            return Err(AceError::InvalidArgument("weights and ridge must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn energy_weight_for(&self, n_atoms: usize) -> f64 {
        self.energy_weight / n_atoms.max(1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Energy,
    Force { atom: usize, dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowInfo {
    pub frame: usize,
    pub kind: RowKind,
}

/// Columns: one `V_0` per species, then the basis of each centre species in turn.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub psi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub rows: Vec<RowInfo>,
    pub n_species: usize,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.psi.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.psi.ncols()
    }
}

/// Unweighted energy row `Σ_ι [e_{z_ι}, B(env_ι)]` of one configuration.
pub fn energy_row(basis: &RpiBasis, envs: &[Environment]) -> Result<Vec<f64>> {
    let ns = basis.n_species();
    let k = basis.len_per_center();
    let mut row = vec![0.0; ns + ns * k];
    for env in envs {
        let z = basis.center_index(env)?;
        row[z] += 1.0;
        for (i, b) in basis.eval(env)?.into_iter().enumerate() {
            row[ns + z * k + i] += b;
        }
    }
    Ok(row)
}

/// Unweighted energy row and force rows (`3 #R × ncols`, atom-major) of one configuration.
pub fn frame_rows(basis: &RpiBasis, config: &Configuration) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let envs = neighbor_environments(config, basis.r_cut())?;
    let ns = basis.n_species();
    let k = basis.len_per_center();
    let nc = ns + ns * k;
    let mut e = vec![0.0; nc];
    let mut f = DMatrix::zeros(3 * config.len(), nc);
    let mut forces = vec![Vector3::zeros(); config.len()];
    let mut scratch = Matrix3::zeros();
    for env in &envs {
        let z = basis.center_index(env)?;
        e[z] += 1.0;
        let (vals, grads) = basis.eval_with_gradients(env)?;
        for (i, (b, g)) in vals.iter().zip(&grads).enumerate() {
            let col = ns + z * k + i;
            e[col] += b;
            forces.iter_mut().for_each(|x| *x = Vector3::zeros());
            accumulate_site(env, g, &mut forces, &mut scratch);
            for (a, fa) in forces.iter().enumerate() {
                for d in 0..3 {
                    f[(3 * a + d, col)] += fa[d];
                }
            }
        }
    }
    Ok((e, f))
}

pub fn assemble(frames: &[Configuration], basis: &RpiBasis, loss: &LossConfig) -> Result<DesignMatrix> {
    loss.validate()?;
    if frames.is_empty() {
        return Err(AceError::EmptyData("no training frames".into()));
    }
    for (i, fr) in frames.iter().enumerate() {
        if fr.energy.is_none() {
            return Err(AceError::Parse { frame: i, msg: "frame has no energy".into() });
        }
        for &z in &fr.species {
            basis.onep.species_index(z)?;
        }
    }
    let blocks: Vec<(Vec<f64>, Option<DMatrix<f64>>)> = frames
        .par_iter()
        .map(|fr| {
            if fr.forces.is_some() {
                let (e, f) = frame_rows(basis, fr)?;
                Ok((e, Some(f)))
            } else {
                let envs = neighbor_environments(fr, basis.r_cut())?;
                Ok((energy_row(basis, &envs)?, None))
            }
        })
        .collect::<Result<_>>()?;
    let nc = basis.n_species() * (1 + basis.len_per_center());
    let nrows: usize = frames.iter().map(|f| 1 + if f.forces.is_some() { 3 * f.len() } else { 0 }).sum();
    let mut psi = DMatrix::zeros(nrows, nc);
    let mut y = DVector::zeros(nrows);
    let mut rows = Vec::with_capacity(nrows);
    let mut r = 0;
    for (fi, (fr, (e, f))) in frames.iter().zip(blocks).enumerate() {
        let we = loss.energy_weight_for(fr.len());
        for (c, v) in e.iter().enumerate() {
            psi[(r, c)] = we * v;
        }
        y[r] = we * fr.energy.unwrap();
        rows.push(RowInfo { frame: fi, kind: RowKind::Energy });
        r += 1;
        if let (Some(f), Some(obs)) = (f, &fr.forces) {
            let wf = loss.force_weight;
            for a in 0..fr.len() {
                for d in 0..3 {
                    for c in 0..nc {
                        psi[(r, c)] = wf * f[(3 * a + d, c)];
                    }
                    y[r] = wf * obs[a][d];
                    rows.push(RowInfo { frame: fi, kind: RowKind::Force { atom: a, dim: d } });
                    r += 1;
                }
            }
        }
    }
    Ok(DesignMatrix { psi, y, rows, n_species: basis.n_species() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub coeffs: Vec<f64>,
    pub rank: usize,
    /// `‖Ψc − y‖` without the ridge term.
    pub residual: f64,
    /// Ratio of extreme triangular diagonal magnitudes; absent for the iterative solver.
    pub condition: Option<f64>,
    pub iterations: Option<usize>,
}

impl FitResult {
    /// Splits into `(V_0 per species, basis coefficients)`.
    pub fn split(&self, n_species: usize) -> (Vec<f64>, Vec<f64>) {
        (self.coeffs[..n_species].to_vec(), self.coeffs[n_species..].to_vec())
    }
}

fn with_ridge(psi: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> (DMatrix<f64>, DVector<f64>) {
    if ridge == 0.0 {
        return (psi.clone(), y.clone());
    }
    let (m, n) = psi.shape();
    let mut a = DMatrix::zeros(m + n, n);
    a.view_mut((0, 0), (m, n)).copy_from(psi);
    let s = ridge.sqrt();
    for i in 0..n {
        a[(m + i, i)] = s;
    }
    let mut b = DVector::zeros(m + n);
    b.rows_mut(0, m).copy_from(y);
    (a, b)
}

pub fn solve(design: &DesignMatrix, loss: &LossConfig) -> Result<FitResult> {
    solve_system(&design.psi, &design.y, loss)
}

pub fn solve_system(psi: &DMatrix<f64>, y: &DVector<f64>, loss: &LossConfig) -> Result<FitResult> {
    loss.validate()?;
    if psi.nrows() == 0 || psi.ncols() == 0 {
        return Err(AceError::EmptyData("design matrix has no rows or columns".into()));
    }
    let (coeffs, rank, condition, iterations) = match loss.solver {
        Solver::Qr => {
            let (a, b) = with_ridge(psi, y, loss.ridge);
            let (c, cond) = qr_solve(a, b)?;
            (c, psi.ncols(), Some(cond), None)
        }
        Solver::Rrqr { tol } => {
            let (a, b) = with_ridge(psi, y, loss.ridge);
            let (c, rank, cond) = rrqr_solve(a, b, tol);
            (c, rank, Some(cond), None)
        }
        Solver::Lsqr { tol, max_iter } => {
            let (c, it) = lsqr(psi, y, loss.ridge.sqrt(), tol, max_iter);
            (c, psi.ncols(), None, Some(it))
        }
    };
    let residual = (psi * &coeffs - y).norm();
    Ok(FitResult { coeffs: coeffs.iter().copied().collect(), rank, residual, condition, iterations })
}

fn qr_solve(a: DMatrix<f64>, mut b: DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(AceError::InvalidArgument(format!(
            "{m} rows for {n} columns; use rrqr or lsqr for underdetermined systems"
        )));
    }
    let qr = a.qr();
    qr.q_tr_mul(&mut b);
    let r = qr.r();
    let d: Vec<f64> = (0..n).map(|i| r[(i, i)].abs()).collect();
    let cond = d.iter().cloned().fold(0.0, f64::max) / d.iter().cloned().fold(f64::INFINITY, f64::min);
    let rhs = b.rows(0, n).into_owned();
    let c = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| AceError::InvalidArgument("singular design matrix; try rrqr".into()))?;
    Ok((c, cond))
}

/// Householder QR with column-norm pivoting; returns `(R, Qᵀb, perm)`.
fn pivoted_qr(mut a: DMatrix<f64>, mut b: DVector<f64>) -> (DMatrix<f64>, DVector<f64>, Vec<usize>) {
    let (m, n) = a.shape();
    let mut perm: Vec<usize> = (0..n).collect();
    let kmax = m.min(n);
    for k in 0..kmax {
        let (mut best, mut bj) = (-1.0, k);
        for j in k..n {
            let s = a.column(j).rows(k, m - k).norm_squared();
            if s > best {
                best = s;
                bj = j;
            }
        }
        a.swap_columns(k, bj);
        perm.swap(k, bj);
        let mut v = a.column(k).rows(k, m - k).into_owned();
        let alpha = v.norm();
        if alpha == 0.0 {
            continue;
        }
        let beta = if v[0] > 0.0 { -alpha } else { alpha };
        v[0] -= beta;
        let vn = v.norm_squared();
        if vn == 0.0 {
            continue;
        }
        for j in k..n {
            let mut col = a.column_mut(j);
            let mut col = col.rows_mut(k, m - k);
            let t = 2.0 * v.dot(&col) / vn;
            col.axpy(-t, &v, 1.0);
        }
        let mut bb = b.rows_mut(k, m - k);
        let t = 2.0 * v.dot(&bb) / vn;
        bb.axpy(-t, &v, 1.0);
        for i in k + 1..m {
            a[(i, k)] = 0.0;
        }
    }
    (a.rows(0, kmax).into_owned(), b, perm)
}

/// Rank-revealing solve: pivoted QR truncated at `|R_kk| ≤ tol |R_00|`, then the
/// minimum-norm solution of the truncated system.
fn rrqr_solve(a: DMatrix<f64>, b: DVector<f64>, tol: f64) -> (DVector<f64>, usize, f64) {
    let n = a.ncols();
    let (r, qb, perm) = pivoted_qr(a, b);
    let d0 = r[(0, 0)].abs();
    let rank = (0..r.nrows()).take_while(|&k| r[(k, k)].abs() > tol * d0).count();
    let mut c = DVector::zeros(n);
    if rank == 0 {
        return (c, 0, f64::INFINITY);
    }
    let cond = d0 / r[(rank - 1, rank - 1)].abs();
    // T z = b with T = R[..rank, ..]; z = Q2 R2^{-T} b from Tᵀ = Q2 R2
    let t = r.rows(0, rank).into_owned();
    let qr = t.transpose().qr();
    let r2 = qr.r();
    let w = r2
        .transpose()
        .solve_lower_triangular(&qb.rows(0, rank).into_owned())
        .expect("leading block is nonsingular");
    let z = qr.q() * w;
    for (j, &p) in perm.iter().enumerate() {
        c[p] = z[j];
    }
    (c, rank, cond)
}

/// LSQR for `min ‖Ax − b‖² + damp² ‖x‖²`.
pub fn lsqr(a: &DMatrix<f64>, b: &DVector<f64>, damp: f64, tol: f64, max_iter: usize) -> (DVector<f64>, usize) {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut u = b.clone();
    let mut beta = u.norm();
    if beta == 0.0 {
        return (x, 0);
    }
    u /= beta;
    let mut v = a.tr_mul(&u);
    let mut alpha = v.norm();
    if alpha == 0.0 {
        return (x, 0);
    }
    v /= alpha;
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let bnorm = beta;
    let mut anorm2 = 0.0;
    for it in 1..=max_iter {
        u = a * &v - &u * alpha;
        beta = u.norm();
        if beta > 0.0 {
            u /= beta;
        }
        anorm2 += alpha * alpha + beta * beta + damp * damp;
        v = a.tr_mul(&u) - &v * beta;
        alpha = v.norm();
        if alpha > 0.0 {
            v /= alpha;
        }
        // eliminate the damping term
        let rhobar1 = (rhobar * rhobar + damp * damp).sqrt();
        let cs1 = rhobar / rhobar1;
        let phibar1 = cs1 * phibar;
        let rho = (rhobar1 * rhobar1 + beta * beta).sqrt();
        let cs = rhobar1 / rho;
        let sn = beta / rho;
        let theta = sn * alpha;
        rhobar = -cs * alpha;
        let phi = cs * phibar1;
        phibar = sn * phibar1;
        x += &w * (phi / rho);
        w = &v - &w * (theta / rho);
        // ‖Aᵀr‖ estimate and ‖r‖ estimate
        let arnorm = (phibar * alpha * cs).abs();
        let rnorm = phibar.abs();
        if rnorm <= tol * bnorm || arnorm <= tol * anorm2.sqrt() * rnorm.max(f64::MIN_POSITIVE) {
            return (x, it);
        }
    }
    (x, max_iter)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RmseReport {
    pub n_frames: usize,
    /// `(J / Z)^{1/2}` with `Z = Σ_R (1 + 3#R)` counted over the observations present.
    pub rmse: f64,
    pub energy_rmse_per_atom: f64,
    pub energy_mae_per_atom: f64,
    pub force_rmse: Option<f64>,
}

pub fn rmse_report(potential: &Potential, frames: &[Configuration], loss: &LossConfig) -> Result<RmseReport> {
    loss.validate()?;
    if frames.is_empty() {
        return Err(AceError::EmptyData("no frames".into()));
    }
    let evals: Vec<_> = frames
        .par_iter()
        .map(|fr| {
            if fr.forces.is_some() {
                potential.evaluate(fr).map(|e| (e.energy, Some(e.forces)))
            } else {
                potential.energy(fr).map(|e| (e, None))
            }
        })
        .collect::<Result<_>>()?;
    let (mut j, mut z, mut wsum) = (0.0, 0.0, 0.0);
    let (mut e2, mut e1) = (0.0, 0.0);
    let (mut f2, mut nf) = (0.0, 0usize);
    for (i, (fr, (e, f))) in frames.iter().zip(&evals).enumerate() {
        let obs = fr.energy.ok_or_else(|| AceError::Parse { frame: i, msg: "frame has no energy".into() })?;
        let we = loss.energy_weight_for(fr.len());
        let de = e - obs;
        j += we * we * de * de;
        z += 1.0;
        wsum += we;
        let pa = de / fr.len().max(1) as f64;
        e2 += pa * pa;
        e1 += pa.abs();
        if let (Some(f), Some(of)) = (f, &fr.forces) {
            let s: f64 = f.iter().zip(of).map(|(a, b)| (a - b).norm_squared()).sum();
            j += loss.force_weight * loss.force_weight * s;
            z += 3.0 * fr.len() as f64;
            wsum += loss.force_weight * fr.len() as f64;
            f2 += s;
            nf += 3 * fr.len();
        }
    }
    if wsum == 0.0 {
        return Err(AceError::EmptyData("all observation weights are zero".into()));
    }
    let nfr = frames.len() as f64;
    Ok(RmseReport {
        n_frames: frames.len(),
        rmse: (j / z).sqrt(),
        energy_rmse_per_atom: (e2 / nfr).sqrt(),
        energy_mae_per_atom: e1 / nfr,
        force_rmse: (nf > 0).then(|| (f2 / nf as f64).sqrt()),
    })
}

/// Condition number of the empirical Gramian `(1/M) Σ B(R) B(R)ᵀ` of the given columns,
/// as `(σ_max / σ_min)²` of the sample matrix.
pub fn gramian_condition(values: &DMatrix<f64>) -> f64 {
    if values.ncols() == 0 {
        return 1.0;
    }
    let s = values.clone().svd(false, false).singular_values;
    let max = s.max();
    let min = s.min();
    if min <= 0.0 || values.nrows() < values.ncols() {
        f64::INFINITY
    } else {
        (max / min).powi(2)
    }
}

/// Basis values of `envs` as rows (`M × len_per_center`).
pub fn basis_values(basis: &RpiBasis, envs: &[Environment]) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = envs.par_iter().map(|e| basis.eval(e)).collect::<Result<_>>()?;
    let k = basis.len_per_center();
    Ok(DMatrix::from_fn(envs.len(), k, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{generate_spec, SpecLimits};
    use crate::coupling::CouplingCache;
    use crate::radial::RadialParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn exact_recovery_all_solvers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(40, 12, &mut rng);
        let c = DVector::from_fn(12, |_, _| rng.gen_range(-1.0..1.0));
        let y = &a * &c;
        for solver in [Solver::Qr, Solver::Rrqr { tol: 1e-12 }, Solver::Lsqr { tol: 1e-14, max_iter: 500 }] {
            let loss = LossConfig { solver, ..Default::default() };
            let r = solve_system(&a, &y, &loss).unwrap();
            let err = (DVector::from_vec(r.coeffs.clone()) - &c).amax();
            assert!(err < 1e-8, "{solver:?}: {err}");
            assert_eq!(r.rank, 12);
        }
    }

    #[test]
    fn normal_equations_hold_for_noisy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(60, 10, &mut rng);
        let y = DVector::from_fn(60, |_, _| rng.gen_range(-1.0..1.0));
        let r = solve_system(&a, &y, &LossConfig::default()).unwrap();
        let c = DVector::from_vec(r.coeffs);
        let g = a.tr_mul(&(&a * &c - &y));
        assert!(g.norm() <= 1e-8 * a.tr_mul(&y).norm());
    }

    #[test]
    fn rank_deficiency_is_revealed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_matrix(50, 6, &mut rng);
        let mix = random_matrix(6, 9, &mut rng);
        let a = &b * &mix; // rank 6, 9 columns
        let y = DVector::from_fn(50, |_, _| rng.gen_range(-1.0..1.0));
        let r = solve_system(&a, &y, &LossConfig { solver: Solver::Rrqr { tol: 1e-10 }, ..Default::default() }).unwrap();
        let sv = a.clone().svd(false, false).singular_values;
        let svd_rank = sv.iter().filter(|&&s| s > 1e-10 * sv[0]).count();
        assert_eq!(r.rank, svd_rank);
        assert_eq!(r.rank, 6);
        // same residual and norm as the pseudo-inverse solution
        let pinv = a.clone().pseudo_inverse(1e-10 * sv[0]).unwrap() * &y;
        let c = DVector::from_vec(r.coeffs.clone());
        assert!(((&a * &c - &y).norm() - (&a * &pinv - &y).norm()).abs() < 1e-9);
        assert!((c.norm() - pinv.norm()).abs() < 1e-8 * pinv.norm());
    }

    #[test]
    fn ridge_limit_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(30, 5, &mut rng);
        let y = DVector::from_fn(30, |_, _| rng.gen_range(-1.0..1.0));
        let mut last = f64::INFINITY;
        for lam in [0.0, 1.0, 1e2, 1e4, 1e8] {
            let r = solve_system(&a, &y, &LossConfig { ridge: lam, ..Default::default() }).unwrap();
            let n = DVector::from_vec(r.coeffs).norm();
            assert!(n <= last + 1e-12);
            last = n;
            let rl = solve_system(&a, &y, &LossConfig { ridge: lam, solver: Solver::Lsqr { tol: 1e-14, max_iter: 1000 }, ..Default::default() }).unwrap();
            assert!((DVector::from_vec(rl.coeffs).norm() - n).abs() < 1e-7 * (1.0 + n));
        }
        assert!(last < 1e-6);
        let empty = DMatrix::<f64>::zeros(0, 3);
        assert!(matches!(solve_system(&empty, &DVector::zeros(0), &LossConfig::default()), Err(AceError::EmptyData(_))));
    }

    fn small_basis() -> RpiBasis {
        let mut lim = SpecLimits::new(3, 6.0);
        lim.species = vec![1, 8];
        let cache = CouplingCache::default();
        let spec = generate_spec(&lim, &cache).unwrap();
        RpiBasis::new(spec, RadialParams::new(0, 1.0, 3.5), &cache).unwrap()
    }

    fn frame(rng: &mut ChaCha8Rng, n: usize) -> Configuration {
        let mut pos: Vec<Vector3<f64>> = Vec::new();
        while pos.len() < n {
            let p = Vector3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            if pos.iter().all(|q| (q - p).norm() > 0.8) {
                pos.push(p);
            }
        }
        let mut c = Configuration::cluster(pos, (0..n).map(|i| if i % 3 == 0 { 8 } else { 1 }).collect());
        c.energy = Some(rng.gen_range(-1.0..1.0));
        c
    }

    #[test]
    fn design_shapes_and_force_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = small_basis();
        let nc = 2 * (1 + b.len_per_center());
        let f0 = frame(&mut rng, 4);
        let d = assemble(std::slice::from_ref(&f0), &b, &LossConfig::default()).unwrap();
        assert_eq!((d.nrows(), d.ncols()), (1, nc));
        let mut f1 = frame(&mut rng, 5);
        f1.forces = Some(vec![Vector3::zeros(); 5]);
        let d = assemble(&[f0.clone(), f1.clone()], &b, &LossConfig::default()).unwrap();
        assert_eq!(d.nrows(), 1 + 1 + 15);
        // force rows are minus the position derivative of the energy row
        let (e, f) = frame_rows(&b, &f1).unwrap();
        let row = |c: &Configuration| energy_row(&b, &neighbor_environments(c, b.r_cut()).unwrap()).unwrap();
        assert_eq!(e, row(&f1));
        let h = 1e-6;
        for a in 0..5 {
            for dd in 0..3 {
                let mut p = f1.clone();
                p.positions[a][dd] += h;
                let mut m = f1.clone();
                m.positions[a][dd] -= h;
                let (rp, rm) = (row(&p), row(&m));
                for c in 0..nc {
                    let fd = -(rp[c] - rm[c]) / (2.0 * h);
                    assert!((fd - f[(3 * a + dd, c)]).abs() < 1e-6 * (1.0 + fd.abs()));
                }
            }
        }
        let mut bad = f0.clone();
        bad.species[0] = 6;
        assert!(matches!(assemble(&[bad], &b, &LossConfig::default()), Err(AceError::Species(_))));
    }

    #[test]
    fn fit_on_contained_truth_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = small_basis();
        let ncols = 2 * (1 + b.len_per_center());
        let truth_c: Vec<f64> = (0..ncols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let truth = Potential::from_basis(&b, &truth_c[2..], truth_c[..2].to_vec()).unwrap();
        let frames: Vec<Configuration> = (0..80)
            .map(|_| {
                let mut f = frame(&mut rng, 5);
                let ev = truth.evaluate(&f).unwrap();
                f.energy = Some(ev.energy);
                f.forces = Some(ev.forces);
                f
            })
            .collect();
        let loss = LossConfig { solver: Solver::Rrqr { tol: 1e-12 }, ..Default::default() };
        let d = assemble(&frames, &b, &loss).unwrap();
        let r = solve(&d, &loss).unwrap();
        let (v0, c) = r.split(2);
        let pot = Potential::from_basis(&b, &c, v0).unwrap();
        let rep = rmse_report(&pot, &frames, &loss).unwrap();
        assert!(rep.rmse < 1e-8, "{rep:?}");
        let zero = LossConfig { energy_weight: 0.0, force_weight: 0.0, ..loss };
        assert!(matches!(rmse_report(&pot, &frames, &zero), Err(AceError::EmptyData(_))));
        assert!(matches!(rmse_report(&pot, &[], &loss), Err(AceError::EmptyData(_))));
    }
}
