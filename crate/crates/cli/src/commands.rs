use crate::*;
use ace_core::basis::{generate_spec, BasisSpec, DegreeKind, RpiBasis, SpecLimits};
use ace_core::bench::{bench_cell, to_csv, to_svg, BenchRow, KeyCell};
use ace_core::checks::{invariance, CheckOutcome, InvarianceParams, Suite};
use ace_core::coupling::{CouplingCache, Method};
use ace_core::fit::{assemble, energy_row, rmse_report, solve, FitResult, LossConfig, RmseReport, Solver};
use ace_core::geom::{atomic_number, neighbor_environments, read_xyz, symbol, write_xyz, Configuration};
use ace_core::potential::Potential;
use ace_core::radial::RadialParams;
use ace_core::synth::{generate_dataset, DatasetConfig, SyntheticTruth};
use ace_core::AceError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ace(#[from] AceError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: AceError,
    },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Ace(AceError::InvalidArgument(_)) => 1,
            CliError::ChecksFailed { .. } => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Attaches the file name to errors raised while reading or writing it.
fn at<T>(path: &Path, r: ace_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ AceError::Io { .. } => CliError::Ace(e),
        e => CliError::File { path: path.display().to_string(), source: e },
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AceError::io(path, e).into())
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AceError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| AceError::io(path, e).into())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(AceError::from)?;
    s.push('\n');
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_frames(path: &Path) -> Result<Vec<Configuration>> {
    at(path, read_xyz(&read(path)?))
}

fn load_spec(path: &Path) -> Result<BasisSpec> {
    let spec: BasisSpec = at(path, serde_json::from_str(&read(path)?).map_err(AceError::from))?;
    at(path, spec.validate())?;
    Ok(spec)
}

pub fn parse_species(items: &[String]) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for s in items {
        let s = s.trim();
        let z = s
            .parse::<u32>()
            .ok()
            .or_else(|| atomic_number(s))
            .ok_or_else(|| CliError::Usage(format!("unknown species {s:?}")))?;
        if out.contains(&z) {
            return Err(CliError::Usage(format!("species {s} listed twice")));
        }
        out.push(z);
    }
    if out.is_empty() {
        return Err(CliError::Usage("no species given".into()));
    }
    Ok(out)
}

fn cache_path(c: &CacheArgs) -> PathBuf {
    c.cache_dir.clone().unwrap_or_else(|| PathBuf::from(".ace-cache")).join("coupling.json")
}

fn radial(r: &RadialArgs) -> RadialParams {
    RadialParams::new(0, r.r_nn, r.r_cut)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Ctx { seed: cli.seed, timing: !cli.no_timing };
    match &cli.command {
        Command::Spec(a) => cmd_spec(a),
        Command::Couple(a) => cmd_couple(a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Check(a) => cmd_check(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
    }
}

struct Ctx {
    seed: u64,
    timing: bool,
}

fn cmd_spec(a: &SpecArgs) -> Result<()> {
    let mut limits = SpecLimits::new(a.order, a.degree);
    limits.species = parse_species(&a.species)?;
    limits.degree = match a.degree_kind {
        DegreeArg::Weighted => DegreeKind::WeightedTotal { wl: a.wl },
        DegreeArg::Total => DegreeKind::Total,
        DegreeArg::Tensor => DegreeKind::Tensor,
    };
    limits.l_max = a.l_max;
    limits.n_max = a.n_max;
    let spec = generate_spec(&limits, &CouplingCache::default())?;
    emit(a.out.as_deref(), &to_json(&spec)?)?;
    if a.out.is_some() {
        let n: usize = spec.tuples.iter().map(|t| t.n_rpi).sum();
        eprintln!("{} tuples, {} functions per centre species", spec.tuples.len(), n);
    }
    Ok(())
}

#[derive(Serialize)]
struct CoupleReport {
    cache: String,
    method: Method,
    tuples: usize,
    computed: usize,
    cached: usize,
    n_rpi: usize,
    blocks_in_cache: usize,
}

fn cmd_couple(a: &CoupleArgs) -> Result<()> {
    let spec = load_spec(&a.spec)?;
    let path = cache_path(&a.cache);
    let method = match a.method {
        MethodArg::Cg => Method::CgChain,
        MethodArg::Svd => Method::Svd,
    };
    let cache = at(&path, CouplingCache::open(&path, method))?;
    if cache.method() != method {
        return Err(CliError::Usage(format!(
            "{} was built with {:?}; pass a different --cache-dir for {:?}",
            path.display(),
            cache.method(),
            method
        )));
    }
    let (mut computed, mut cached, mut n_rpi) = (0, 0, 0);
    for t in &spec.tuples {
        if cache.contains(&t.labels) {
            cached += 1;
        } else {
            computed += 1;
        }
        let got = cache.get(&t.labels)?.ncols();
        if got != t.n_rpi {
            return Err(CliError::File {
                path: a.spec.display().to_string(),
                source: AceError::InvalidConfig(format!("{:?}: spec lists {} functions, coupling gives {got}", t.labels, t.n_rpi)),
            });
        }
        n_rpi += got;
    }
    // an unchanged cache is not rewritten
    if computed > 0 {
        cache.save(&path)?;
    }
    let report = CoupleReport {
        cache: path.display().to_string(),
        method,
        tuples: spec.tuples.len(),
        computed,
        cached,
        n_rpi,
        blocks_in_cache: cache.len(),
    };
    print!("{}", to_json(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct FrameEnergy {
    n_atoms: usize,
    reference: Option<f64>,
    fitted: f64,
}

#[derive(Serialize)]
struct FitReport {
    seed: u64,
    spec_hash: String,
    loss: LossConfig,
    rows: usize,
    cols: usize,
    rank: usize,
    residual: f64,
    condition: Option<f64>,
    iterations: Option<usize>,
    rmse: RmseReport,
    frames: Vec<FrameEnergy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seconds: Option<f64>,
}

fn cmd_fit(ctx: &Ctx, a: &FitArgs) -> Result<()> {
    let t0 = Instant::now();
    let frames = load_frames(&a.train)?;
    let spec = load_spec(&a.spec)?;
    let cpath = cache_path(&a.cache);
    let cache = at(&cpath, CouplingCache::open(&cpath, Method::CgChain))?;
    let basis = at(&a.spec, RpiBasis::new(spec, radial(&a.radial), &cache))?;
    let loss = LossConfig {
        energy_weight: a.energy_weight,
        force_weight: a.force_weight,
        ridge: a.ridge,
        solver: match a.solver {
            SolverArg::Qr => Solver::Qr,
            SolverArg::Rrqr => Solver::Rrqr { tol: a.tol },
            SolverArg::Lsqr => Solver::Lsqr { tol: a.tol, max_iter: 10_000 },
        },
    };
    let design = at(&a.train, assemble(&frames, &basis, &loss))?;
    let fit: FitResult = solve(&design, &loss)?;
    let (v0, c) = fit.split(basis.n_species());
    let pot = Potential::from_basis(&basis, &c, v0)?;
    pot.save(&a.out)?;
    let rmse = rmse_report(&pot, &frames, &loss)?;
    let energies = frames
        .iter()
        .map(|fr| {
            let envs = neighbor_environments(fr, basis.r_cut())?;
            let row = energy_row(&basis, &envs)?;
            Ok(FrameEnergy {
                n_atoms: fr.len(),
                reference: fr.energy,
                fitted: row.iter().zip(&fit.coeffs).map(|(x, y)| x * y).sum(),
            })
        })
        .collect::<ace_core::Result<Vec<_>>>()?;
    let report = FitReport {
        seed: ctx.seed,
        spec_hash: basis.spec.hash(),
        loss,
        rows: design.nrows(),
        cols: design.ncols(),
        rank: fit.rank,
        residual: fit.residual,
        condition: fit.condition,
        iterations: fit.iterations,
        rmse,
        frames: energies,
        seconds: ctx.timing.then(|| t0.elapsed().as_secs_f64()),
    };
    let text = to_json(&report)?;
    match &a.report {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "fit: {} rows × {} cols, rank {}, rmse {:.3e} → {}",
        report.rows,
        report.cols,
        report.rank,
        report.rmse.rmse,
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalFrame {
    n_atoms: usize,
    energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    forces: Option<Vec<[f64; 3]>>,
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let pot = at(&a.potential, Potential::load(&a.potential))?;
    let frames = load_frames(&a.input)?;
    let mut out = Vec::with_capacity(frames.len());
    for (i, fr) in frames.iter().enumerate() {
        let ctx = |e: AceError| CliError::File { path: a.input.display().to_string(), source: AceError::Parse { frame: i, msg: e.to_string() } };
        let (energy, forces) = if a.forces {
            let ev = pot.evaluate(fr).map_err(ctx)?;
            (ev.energy, Some(ev.forces.iter().map(|f| [f.x, f.y, f.z]).collect()))
        } else {
            (pot.energy(fr).map_err(ctx)?, None)
        };
        out.push(EvalFrame { n_atoms: fr.len(), energy, forces });
    }
    match a.format {
        Format::Json => print!("{}", to_json(&out)?),
        Format::Text | Format::Csv => {
            let mut s = String::new();
            for (i, f) in out.iter().enumerate() {
                let _ = writeln!(s, "frame {i} atoms {} energy {:.17e}", f.n_atoms, f.energy);
                for (j, v) in f.forces.iter().flatten().enumerate() {
                    let _ = writeln!(s, "  {j:4} {:>3} {:.17e} {:.17e} {:.17e}", symbol(frames[i].species[j]), v[0], v[1], v[2]);
                }
            }
            print!("{s}");
        }
    }
    Ok(())
}

/// Property suites run by a bare `ace check`. The dimension tables, conditioning grid and
/// benchmark are opt-in.
const DEFAULT_SUITES: [Suite; 7] = [
    Suite::Invariance,
    Suite::Coupling,
    Suite::Evaluators,
    Suite::Gradients,
    Suite::Orthogonality,
    Suite::Convergence,
    Suite::Cylindrical,
];

fn cmd_check(ctx: &Ctx, a: &CheckArgs) -> Result<()> {
    let mut suites = Vec::new();
    for s in &a.suite {
        match s.as_str() {
            "all" => suites.extend(Suite::ALL),
            name => suites.push(Suite::parse(name).ok_or_else(|| {
                let known: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                CliError::Usage(format!("unknown suite {name:?}; expected one of {} or all", known.join(", ")))
            })?),
        }
    }
    if suites.is_empty() {
        suites = if a.inject_sign_defect { vec![Suite::Invariance] } else { DEFAULT_SUITES.to_vec() };
    }
    let mut seen = Vec::new();
    suites.retain(|s| !seen.contains(s) && {
        seen.push(*s);
        true
    });
    let mut results: Vec<CheckOutcome> = Vec::new();
    for s in suites {
        let mut r = match s {
            Suite::Invariance if a.inject_sign_defect => {
                invariance(&InvarianceParams { sign_defect: true, ..Default::default() }, ctx.seed)?
            }
            _ => s.run(ctx.seed)?,
        };
        if !ctx.timing {
            r.elapsed = 0.0;
        }
        if a.format == Format::Text {
            println!("{r}");
        }
        results.push(r);
    }
    if a.format != Format::Text {
        print!("{}", to_json(&results)?);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        for r in results.iter().filter(|r| !r.passed) {
            eprintln!("failed: {} (reproduce with --seed {} --suite {})", r.name, r.seed, r.name);
        }
        return Err(CliError::ChecksFailed { failed, total: results.len() });
    }
    Ok(())
}

fn bench_table(rows: &[BenchRow]) -> String {
    let mut s = format!("{:>2} {:>6} {:>8} {:>8} {:>7} {:>11} {:>11} {:>8}\n", "N", "degree", "n_basis", "n_nodes", "n_aux", "t_std [s]", "t_rec [s]", "speedup");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>2} {:>6} {:>8} {:>8} {:>7} {:>11.3e} {:>11.3e} {:>8.2}",
            r.order,
            r.degree,
            r.n_basis,
            r.n_nodes,
            r.n_aux,
            r.t_std,
            r.t_rec,
            r.speedup()
        );
    }
    s
}

fn cmd_bench(ctx: &Ctx, a: &BenchArgs) -> Result<()> {
    if a.orders.is_empty() || a.degrees.is_empty() || a.repetitions == 0 {
        return Err(CliError::Usage("need at least one order, one degree and one repetition".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut rows = Vec::new();
    for &n in &a.orders {
        for &d in &a.degrees {
            let cell = KeyCell::new(n, d)?;
            if cell.keys.is_empty() {
                continue;
            }
            let n_env = (2_000_000 / cell.keys.len()).clamp(4, 200);
            let row = bench_cell(&cell, &mut rng, n_env, a.repetitions)?;
            if a.format == Format::Text {
                eprintln!("N={n} degree={d}: {} keys, speedup {:.2}", row.n_basis, row.speedup());
            }
            rows.push(row);
        }
    }
    if let Some(p) = &a.csv {
        write(p, &to_csv(&rows))?;
    }
    if let Some(p) = &a.svg {
        write(p, &to_svg(&rows))?;
    }
    match a.format {
        Format::Text => print!("{}", bench_table(&rows)),
        Format::Csv => print!("{}", to_csv(&rows)),
        Format::Json => print!("{}", to_json(&rows)?),
    }
    Ok(())
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    if a.frames == 0 || a.min_atoms == 0 || a.min_atoms > a.max_atoms {
        return Err(CliError::Usage("need --frames ≥ 1 and 1 ≤ --min-atoms ≤ --max-atoms".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut limits = SpecLimits::new(a.order, a.degree);
    limits.species = parse_species(&a.species)?;
    let cache = CouplingCache::default();
    let basis = RpiBasis::new(generate_spec(&limits, &cache)?, radial(&a.radial), &cache)?;
    let truth = SyntheticTruth::random(&basis, &mut rng, 1.0, a.perturbation)?;
    let cfg = DatasetConfig { n_frames: a.frames, min_atoms: a.min_atoms, max_atoms: a.max_atoms, ..Default::default() };
    let frames = generate_dataset(&truth, &cfg, &mut rng)?;
    write(&a.out, &write_xyz(&frames))?;
    if let Some(p) = &a.truth {
        truth.potential.save(p)?;
    }
    eprintln!("wrote {} frames to {}", frames.len(), a.out.display());
    Ok(())
}
