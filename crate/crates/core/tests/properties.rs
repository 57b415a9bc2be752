use ace_core::basis::{generate_spec, RpiBasis, SpecLimits};
use ace_core::coupling::{numerical_rank, CouplingCache};
use ace_core::fit::{assemble, basis_values, rmse_report, solve, LossConfig};
use ace_core::geom::{Configuration, Environment};
use ace_core::potential::Potential;
use ace_core::radial::RadialParams;
use ace_core::synth::{generate_dataset, random_cluster, random_environment, random_isometry, DatasetConfig, SyntheticTruth};
use nalgebra::{DVector, Matrix3, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn basis(order: usize, degree: f64, species: &[u32]) -> RpiBasis {
    let cache = CouplingCache::default();
    let mut l = SpecLimits::new(order, degree);
    l.species = species.to_vec();
    RpiBasis::new(generate_spec(&l, &cache).unwrap(), RadialParams::new(0, 1.0, 3.0), &cache).unwrap()
}

fn random_potential(b: &RpiBasis, seed: u64) -> Potential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SyntheticTruth::random(b, &mut rng, 1.0, 0.0).unwrap().potential
}

/// Least-squares residual of `f` against the span of the basis, relative to `‖f‖`.
fn span_residual(b: &RpiBasis, envs: &[Environment], f: &[f64]) -> f64 {
    let a = basis_values(b, envs).unwrap();
    let y = DVector::from_column_slice(f);
    let x = a.clone().svd(true, true).solve(&y, 1e-13).unwrap();
    (a * x - &y).norm() / y.norm()
}

#[test]
fn explicit_invariants_lie_in_the_span() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = basis(3, 10.0, &[0]);
    let envs: Vec<Environment> = (0..600)
        .map(|_| {
            let j = rng.gen_range(3..=8);
            random_environment(&mut rng, j, &[0], 0.75, 2.95)
        })
        .collect();
    let p = |r: &Vector3<f64>, n: usize| b.onep.radial.eval(r.norm()).0[n];
    // two-body: Σ_jk P_0(r_j) P_1(r_k) r̂_j·r̂_k
    let f2: Vec<f64> = envs
        .iter()
        .map(|e| {
            let mut s = 0.0;
            for x in &e.neighbors {
                for y in &e.neighbors {
                    s += p(&x.r, 0) * p(&y.r, 1) * x.r.normalize().dot(&y.r.normalize());
                }
            }
            s
        })
        .collect();
    // three-body: Σ_jkl P_0(r_j) P_0(r_k) P_1(r_l) (r̂_j·r̂_k)(r̂_k·r̂_l)
    let f3: Vec<f64> = envs
        .iter()
        .map(|e| {
            let mut s = 0.0;
            for x in &e.neighbors {
                for y in &e.neighbors {
                    for z in &e.neighbors {
                        let (u, v, w) = (x.r.normalize(), y.r.normalize(), z.r.normalize());
                        s += p(&x.r, 0) * p(&y.r, 0) * p(&z.r, 1) * u.dot(&v) * v.dot(&w);
                    }
                }
            }
            s
        })
        .collect();
    // a rotation-invariant function outside the span: depends on the largest distance only
    let out: Vec<f64> = envs.iter().map(|e| e.neighbors.iter().map(|x| x.r.norm()).fold(0.0, f64::max).sin()).collect();
    assert!(span_residual(&b, &envs, &f2) < 1e-10);
    assert!(span_residual(&b, &envs, &f3) < 1e-10);
    assert!(span_residual(&b, &envs, &out) > 1e-3);
}

#[test]
fn basis_is_linearly_independent_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let b = basis(4, 8.0, &[1, 6]);
    let k = b.len_per_center();
    let envs: Vec<Environment> = (0..3 * k)
        .map(|_| {
            let j = rng.gen_range(4..=10);
            let mut e = random_environment(&mut rng, j, &[1, 6], 0.75, 2.95);
            e.center_species = 1;
            e
        })
        .collect();
    let v = basis_values(&b, &envs).unwrap();
    assert_eq!(numerical_rank(&v), k);
}

fn isometric_copy(c: &Configuration, rng: &mut ChaCha8Rng) -> (Configuration, Matrix3<f64>, Vec<usize>) {
    let q = random_isometry(rng);
    let t = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    let mut perm: Vec<usize> = (0..c.len()).collect();
    perm.shuffle(rng);
    let pos = perm.iter().map(|&i| q * c.positions[i] + t).collect();
    let sp = perm.iter().map(|&i| c.species[i]).collect();
    (Configuration::cluster(pos, sp), q, perm)
}

#[test]
fn energy_invariant_and_forces_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pot = random_potential(&basis(3, 8.0, &[1, 6]), 1);
    for _ in 0..10 {
        let c = random_cluster(&mut rng, 8, &[1, 6], 0.9, 2.2);
        let e = pot.evaluate(&c).unwrap();
        let (g, q, perm) = isometric_copy(&c, &mut rng);
        let eg = pot.evaluate(&g).unwrap();
        assert!((e.energy - eg.energy).abs() <= 1e-11 * e.energy.abs().max(1.0));
        let fmax = e.forces.iter().map(|f| f.amax()).fold(0.0, f64::max);
        for (new, &old) in perm.iter().enumerate() {
            assert!((eg.forces[new] - q * e.forces[old]).amax() <= 1e-10 * fmax);
        }
        // W → Q W Qᵀ
        assert!((eg.virial - q * e.virial * q.transpose()).amax() <= 1e-10 * e.virial.amax());
    }
}

#[test]
fn supercell_energy_is_extensive() {
    let pot = random_potential(&basis(3, 8.0, &[14]), 2);
    let l = 3.4;
    let cell = Matrix3::new(l, 0.0, 0.0, 0.4, l, 0.0, 0.0, -0.3, l);
    let pos: Vec<Vector3<f64>> = vec![Vector3::new(0.1, 0.2, 0.0), Vector3::new(1.8, 1.5, 1.6), Vector3::new(0.4, 2.3, 2.2)];
    let mut c = Configuration::cluster(pos.clone(), vec![14; 3]);
    c.cell = Some(cell);
    c.periodic = [true; 3];
    let a0 = cell.row(0).transpose();
    let mut big = c.clone();
    big.positions.extend(pos.iter().map(|p| p + a0));
    big.species.extend([14; 3]);
    let mut bc = cell;
    bc.set_row(0, &(cell.row(0) * 2.0));
    big.cell = Some(bc);
    let e1 = pot.energy(&c).unwrap();
    let e2 = pot.energy(&big).unwrap();
    assert!((e2 - 2.0 * e1).abs() <= 1e-10 * e1.abs().max(1.0), "{e1} {e2}");
    // lattice translation of one atom changes nothing
    let mut shifted = c.clone();
    shifted.positions[1] += cell.row(2).transpose();
    assert!((pot.energy(&shifted).unwrap() - e1).abs() <= 1e-11 * e1.abs().max(1.0));
}

#[test]
fn distant_atoms_do_not_interact() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pot = random_potential(&basis(3, 8.0, &[1, 6]), 3);
    let c = random_cluster(&mut rng, 6, &[1, 6], 0.9, 2.0);
    let e = pot.evaluate(&c).unwrap();
    let mut far = c.clone();
    far.positions.push(Vector3::new(20.0, 0.0, 0.0));
    far.species.push(6);
    let ef = pot.evaluate(&far).unwrap();
    let isolated = pot.v0[pot.spec.species_index(6).unwrap()];
    assert!((ef.energy - e.energy - isolated).abs() < 1e-11 * e.energy.abs().max(1.0));
    for i in 0..c.len() {
        assert!((ef.forces[i] - e.forces[i]).amax() < 1e-12);
    }
    assert_eq!(ef.forces[c.len()], Vector3::zeros());
    // moving an atom inside the cutoff does change its neighbours' forces
    let mut moved = c.clone();
    moved.positions[0].x += 0.05;
    let em = pot.evaluate(&moved).unwrap();
    assert!((em.forces[1] - e.forces[1]).amax() > 1e-8);
}

#[test]
fn training_rmse_does_not_grow_with_the_spec() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let truth = SyntheticTruth::random(&basis(2, 6.0, &[14]), &mut rng, 1.0, 0.3).unwrap();
    let frames = generate_dataset(&truth, &DatasetConfig { n_frames: 30, ..Default::default() }, &mut rng).unwrap();
    let loss = LossConfig::default();
    let mut prev = f64::INFINITY;
    for d in [4.0, 6.0, 8.0] {
        let b = basis(3, d, &[14]);
        let design = assemble(&frames, &b, &loss).unwrap();
        let fit = solve(&design, &loss).unwrap();
        let (v0, c) = fit.split(1);
        let pot = Potential::from_basis(&b, &c, v0).unwrap();
        let r = rmse_report(&pot, &frames, &loss).unwrap();
        // the report recomputes the residual through the potential; it must match the solver
        let z = design.nrows() as f64;
        assert!((r.rmse * r.rmse - fit.residual * fit.residual / z).abs() < 1e-9 * (r.rmse * r.rmse).max(1e-12));
        assert!(r.rmse * r.rmse <= prev + 1e-10);
        prev = r.rmse * r.rmse;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn site_energy_invariance(seed in 0u64..1_000_000) {
        let b = basis(3, 6.0, &[0]);
        let pot = random_potential(&b, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = rng.gen_range(1..=9);
        let env = random_environment(&mut rng, j, &[0], 0.75, 2.95);
        let q = random_isometry(&mut rng);
        let mut g = env.clone();
        g.neighbors.shuffle(&mut rng);
        g.neighbors.iter_mut().for_each(|n| n.r = q * n.r);
        let e = pot.site_energy(&env).unwrap();
        prop_assert!((e - pot.site_energy(&g).unwrap()).abs() <= 1e-11 * e.abs().max(1.0));
    }

    #[test]
    fn design_energy_row_is_linear_in_coefficients(seed in 0u64..1_000_000) {
        let b = basis(2, 6.0, &[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..b.len_per_center()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pot = Potential::from_basis(&b, &c, vec![0.5]).unwrap();
        let cfg = random_cluster(&mut rng, 5, &[0], 0.9, 2.0);
        let row = ace_core::fit::energy_row(&b, &ace_core::geom::neighbor_environments(&cfg, b.r_cut()).unwrap()).unwrap();
        let lin: f64 = row[0] * 0.5 + row[1..].iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();
        let e = pot.energy(&cfg).unwrap();
        prop_assert!((lin - e).abs() <= 1e-12 * e.abs().max(1.0));
    }
}
