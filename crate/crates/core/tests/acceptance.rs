//! One PASS/FAIL line per acceptance criterion. Run with `cargo test --test acceptance`.

use ace_core::checks::{self, dims, CheckOutcome, InvarianceParams};
use ace_core::Result;
use std::process::ExitCode;

const SEED: u64 = 20_240_917;

struct Line {
    id: usize,
    outcome: Result<CheckOutcome>,
    /// Extra condition on top of the suite verdict, with its description.
    extra: Option<(bool, String)>,
}

fn runtime_cap(o: &Result<CheckOutcome>, secs: f64) -> Option<(bool, String)> {
    o.as_ref().ok().map(|o| (o.elapsed < secs, format!("runtime {:.1}s < {secs}s", o.elapsed)))
}

fn main() -> ExitCode {
    let mut lines = Vec::new();
    let mut push = |id, outcome: Result<CheckOutcome>, extra| {
        let l = Line { id, outcome, extra };
        report(&l);
        lines.push(l);
    };

    let inv = checks::invariance(&InvarianceParams::default(), SEED);
    let control = checks::invariance(
        &InvarianceParams { max_order: 3, max_degree: 8.0, n_envs: 20, sign_defect: true, ..Default::default() },
        SEED,
    );
    let mut extra = runtime_cap(&inv, 60.0);
    if let (Some((ok, d)), Ok(c)) = (extra.as_mut(), &control) {
        *ok &= !c.passed;
        d.push_str(&format!("; sign-defect control fails: {} ({})", !c.passed, c.detail));
    }
    push(1, inv, extra);
    push(2, dims::check(), None);
    push(3, checks::coupling(5, 4), None);
    push(4, checks::evaluators(&checks::EvaluatorParams::default(), SEED), None);
    push(5, checks::gradients(50, SEED), None);
    push(6, checks::orthogonality(), None);
    let conv = checks::convergence(&checks::ConvergenceParams::default(), SEED);
    let extra = runtime_cap(&conv, 300.0);
    push(7, conv, extra);
    let cond = checks::conditioning(SEED);
    if let Ok((_, cells)) = &cond {
        println!("    N  deg  #all  #pure      κ(all)     κ(pure)");
        for c in cells {
            println!("    {}  {:>3}  {:>4}  {:>5}  {:>10.2e}  {:>10.2e}", c.order, c.degree, c.n_all, c.n_pure, c.cond_all, c.cond_pure);
        }
    }
    push(8, cond.map(|c| c.0), None);
    let perf = checks::performance(SEED);
    if let Ok((_, rows)) = &perf {
        println!("    N  deg   n_basis   n_nodes   n_aux       t_std       t_rec  speedup");
        for r in rows {
            println!(
                "    {}  {:>3}  {:>8}  {:>8}  {:>6}  {:>10.3e}  {:>10.3e}  {:>6.2}",
                r.order, r.degree, r.n_basis, r.n_nodes, r.n_aux, r.t_std, r.t_rec, r.speedup()
            );
        }
    }
    push(9, perf.map(|p| p.0), None);
    push(10, checks::cylindrical(200, SEED), None);

    // Criterion 2 stays red for the documented table conflicts only; anything else fails the run.
    let mut failed = 0;
    for l in &lines {
        if !passed(l) {
            let tolerated = l.id == 2 && matches!(dims::unexplained_mismatches(), Ok(v) if v.is_empty())
                && matches!(&l.outcome, Ok(o) if o.detail.contains("rank(D^(1,1,2)) = 1"));
            if !tolerated {
                failed += 1;
            }
        }
    }
    let red = lines.iter().filter(|l| !passed(l)).count();
    println!("{} of {} criteria pass; {} unexpected failures", lines.len() - red, lines.len(), failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn passed(l: &Line) -> bool {
    matches!(&l.outcome, Ok(o) if o.passed) && l.extra.as_ref().map_or(true, |e| e.0)
}

fn report(l: &Line) {
    let verdict = if passed(l) { "PASS" } else { "FAIL" };
    match &l.outcome {
        Ok(o) => {
            let extra = l.extra.as_ref().map(|e| format!("; {}", e.1)).unwrap_or_default();
            println!("{verdict} {:>2} {} [{:.1}s]: {}{extra}", l.id, o.name, o.elapsed, o.detail);
        }
        Err(e) => println!("{verdict} {:>2} error: {e}", l.id),
    }
}
