//! Drivers behind the `solver-bench` and `reg-path` commands.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prox::{
    enum_alm, enum_pgd, kkt_2sparse_threshold, oracle_prox, Block4, CandidateKind, PgdConfig,
    ProxParams, ProxSolution, SortedBlock,
};

/// `n` log-spaced values from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, n: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min) || n == 0 {
        return Err(Error::InvalidParam(
            "log grid needs 0 < min <= max and n >= 1".into(),
        ));
    }
    if n == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.log10(), max.log10());
    Ok((0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect())
}

/// Seeded standard-normal 4-vectors.
pub fn random_instances(n: usize, seed: u64) -> Vec<Block4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            Block4::new(y).expect("normal samples are finite")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    EnumAlm,
    EnumPgd,
    Oracle,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::EnumAlm => "enum_alm",
            Solver::EnumPgd => "enum_pgd",
            Solver::Oracle => "oracle",
        }
    }

    fn solve(self, y: &Block4, lambda: f64, eps_alm: f64) -> ProxSolution {
        match self {
            Solver::EnumAlm => {
                let p = ProxParams::new(lambda, eps_alm, ProxParams::DEFAULT_MAX_ITERS)
                    .expect("grid values are valid");
                enum_alm(y, &p)
            }
            Solver::EnumPgd => enum_pgd(y, lambda, &PgdConfig::default()),
            Solver::Oracle => oracle_prox(y, lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_instances: usize,
    pub n_lambdas: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub seed: u64,
    pub eps_alm: f64,
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_instances: 100,
            n_lambdas: 200,
            lambda_min: 1e-3,
            lambda_max: 10.0,
            seed: 42,
            eps_alm: ProxParams::BENCH_EPS,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub solver: Solver,
    pub instance: usize,
    pub lambda: f64,
    pub objective: f64,
    /// Objective minus the oracle objective on the same problem.
    pub gap: f64,
    pub micros: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub solver: Solver,
    pub total_seconds: f64,
    pub max_suboptimality: f64,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub instances: usize,
    pub lambda_grid: String,
    pub parallel: bool,
    pub solvers: Vec<SolverSummary>,
}

impl BenchReport {
    pub fn summary(&self, solver: Solver) -> Option<&SolverSummary> {
        self.solvers.iter().find(|s| s.solver == solver)
    }
}

fn run_solver(
    solver: Solver,
    instances: &[Block4],
    grid: &[f64],
    eps: f64,
    parallel: bool,
) -> (f64, Vec<Vec<(ProxSolution, f64)>>) {
    let per_instance = |y: &Block4| -> Vec<(ProxSolution, f64)> {
        grid.iter()
            .map(|&lambda| {
                let t = Instant::now();
                let sol = solver.solve(y, lambda, eps);
                (sol, t.elapsed().as_secs_f64() * 1e6)
            })
            .collect()
    };
    // one discarded warmup pass over the first instance
    if let Some(first) = instances.first() {
        std::hint::black_box(per_instance(first));
    }
    let start = Instant::now();
    let out = if parallel {
        instances.par_iter().map(per_instance).collect()
    } else {
        instances.iter().map(per_instance).collect()
    };
    (start.elapsed().as_secs_f64(), out)
}

/// Runs the oracle, EnumALM and EnumPGD over `n_instances x n_lambdas`
/// problems, one solver at a time.
pub fn solver_bench(cfg: &BenchConfig) -> Result<(BenchReport, Vec<BenchRow>)> {
    if cfg.n_instances == 0 {
        return Err(Error::InvalidParam("need at least one instance".into()));
    }
    let grid = log_grid(cfg.lambda_min, cfg.lambda_max, cfg.n_lambdas)?;
    let instances = random_instances(cfg.n_instances, cfg.seed);

    let (oracle_secs, oracle) =
        run_solver(Solver::Oracle, &instances, &grid, cfg.eps_alm, cfg.parallel);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut push = |solver: Solver, secs: f64, results: &[Vec<(ProxSolution, f64)>]| {
        let mut max_gap = f64::NEG_INFINITY;
        let mut unconverged = 0;
        for (i, per) in results.iter().enumerate() {
            for (j, (sol, micros)) in per.iter().enumerate() {
                let gap = sol.objective - oracle[i][j].0.objective;
                max_gap = max_gap.max(gap);
                unconverged += usize::from(!sol.converged);
                rows.push(BenchRow {
                    solver,
                    instance: i,
                    lambda: grid[j],
                    objective: sol.objective,
                    gap,
                    micros: *micros,
                });
            }
        }
        summaries.push(SolverSummary {
            solver,
            total_seconds: secs,
            max_suboptimality: max_gap,
            unconverged,
        });
    };
    push(Solver::Oracle, oracle_secs, &oracle);
    for solver in [Solver::EnumAlm, Solver::EnumPgd] {
        let (secs, res) = run_solver(solver, &instances, &grid, cfg.eps_alm, cfg.parallel);
        push(solver, secs, &res);
    }

    Ok((
        BenchReport {
            seed: cfg.seed,
            instances: cfg.n_instances,
            lambda_grid: format!(
                "{} log-spaced values in [{:e}, {:e}]",
                cfg.n_lambdas, cfg.lambda_min, cfg.lambda_max
            ),
            parallel: cfg.parallel,
            solvers: summaries,
        },
        rows,
    ))
}

pub fn write_bench_csv(out: impl Write, seed: u64, rows: &[BenchRow]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# seed={seed}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "instance", "lambda", "objective", "gap", "micros"])?;
    for r in rows {
        w.write_record([
            r.solver.as_str().to_string(),
            r.instance.to_string(),
            format!("{:e}", r.lambda),
            format!("{:e}", r.objective),
            format!("{:e}", r.gap),
            format!("{:.3}", r.micros),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegPathRow {
    pub lambda: f64,
    pub w: [f64; 4],
    pub kind: CandidateKind,
    pub kkt_2sparse: Option<f64>,
}

/// EnumALM solution of the prox of `y` along a grid of strengths.
pub fn reg_path(y: &Block4, grid: &[f64], eps_alm: f64) -> Result<Vec<RegPathRow>> {
    let kkt = kkt_2sparse_threshold(&SortedBlock::from_block(y)).ok();
    grid.iter()
        .map(|&lambda| {
            let p = ProxParams::new(lambda, eps_alm, ProxParams::DEFAULT_MAX_ITERS)?;
            let sol = enum_alm(y, &p);
            Ok(RegPathRow {
                lambda,
                w: sol.w,
                kind: sol.candidate_kind,
                kkt_2sparse: kkt,
            })
        })
        .collect()
}

pub fn write_reg_path_csv(out: impl Write, rows: &[RegPathRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "w1", "w2", "w3", "w4", "kind", "kkt_2sparse"])?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.lambda),
            format!("{:e}", r.w[0]),
            format!("{:e}", r.w[1]),
            format!("{:e}", r.w[2]),
            format!("{:e}", r.w[3]),
            r.kind.as_str().to_string(),
            r.kkt_2sparse.map(|v| format!("{v:e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
