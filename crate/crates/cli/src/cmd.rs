use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use prox24::bench::{self, BenchConfig, Solver};
use prox24::experiment::{ExperimentConfig, MaskComparison, Task};
use prox24::model::{mse, CalibSet, ModelKind, ToyModel};
use prox24::tensor::{
    apply_mask_snap, read_mask, read_weights, sparsity_ratio_24, write_mask, write_weights,
};
use prox24::train::{write_checkpoint, write_metrics_csv, MetricsRecord};
use prox24::{Block4, Error, MaskTensor, ProxParams, Result, WeightTensor};

pub fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else if e.is_divergence() {
        3
    } else {
        1
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn solver_bench(cfg: BenchConfig, out: Option<&Path>) -> Result<()> {
    println!("# seed={}", cfg.seed);
    let (report, rows) = bench::solver_bench(&cfg)?;
    println!(
        "# {} instances x {}{}",
        report.instances,
        report.lambda_grid,
        if report.parallel { " (parallel)" } else { "" }
    );
    println!(
        "{:<10} {:>12} {:>16} {:>12}",
        "solver", "seconds", "max_gap", "unconverged"
    );
    for s in &report.solvers {
        println!(
            "{:<10} {:>12.4} {:>16.3e} {:>12}",
            s.solver.as_str(),
            s.total_seconds,
            s.max_suboptimality,
            s.unconverged
        );
    }
    if let (Some(alm), Some(pgd)) = (
        report.summary(Solver::EnumAlm),
        report.summary(Solver::EnumPgd),
    ) {
        println!(
            "# enum_pgd / enum_alm runtime ratio: {:.2}",
            pgd.total_seconds / alm.total_seconds
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut csv = create(&dir.join("bench.csv"))?;
        bench::write_bench_csv(&mut csv, cfg.seed, &rows)?;
        csv.flush()?;
        write_json(&dir.join("bench_report.json"), &report)?;
    }
    Ok(())
}

pub fn reg_path(
    y: &[f64],
    lambdas: usize,
    lambda_min: f64,
    lambda_max: f64,
    out: Option<&Path>,
) -> Result<()> {
    if y.len() != 4 {
        return Err(Error::InvalidParam(format!(
            "--y needs 4 values, got {}",
            y.len()
        )));
    }
    let y = Block4::from_slice(y)?;
    let grid = bench::log_grid(lambda_min, lambda_max, lambdas)?;
    let rows = bench::reg_path(&y, &grid, ProxParams::BENCH_EPS)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut f = create(&dir.join("reg_path.csv"))?;
            bench::write_reg_path_csv(&mut f, &rows)?;
            f.flush()?;
        }
        None => bench::write_reg_path_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    seed: u64,
    model: ModelKind,
    arm: &'a str,
    total_steps: usize,
    removed_fraction: f64,
    sparsity_ratio: f64,
    pre_projection_sparsity: f64,
    early_final_similarity: Option<f64>,
    unconverged_prox_blocks: usize,
    final_calib_loss: f64,
    test_mse: MaskComparison,
}

fn write_history(path: &Path, seed: u64, history: &[MetricsRecord]) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "# seed={seed}")?;
    write_metrics_csv(&mut f, history)?;
    f.flush()?;
    Ok(())
}

pub fn train(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut exp = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        exp.train.seed = s;
    }
    let seed = exp.train.seed;
    println!("# seed={seed}");

    let task = Task::generate(&exp.task, seed)?;
    exp.train.validate(task.calib.len())?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), exp.to_json()? + "\n")?;
    let mut test = create(&out.join("test.csv"))?;
    task.test.write_csv(&mut test)?;
    test.flush()?;
    for (i, w0) in task.teacher.layers().iter().enumerate() {
        let mut f = create(&out.join(format!("w0_layer{i}.nmpx")))?;
        write_weights(&mut f, w0)?;
        f.flush()?;
    }

    let res = match prox24::train::train(&task.teacher, &task.calib, &exp.train) {
        Ok(res) => res,
        Err(Error::Diverged {
            step,
            loss,
            history,
        }) => {
            write_history(&out.join("metrics.csv"), seed, &history)?;
            return Err(Error::Diverged {
                step,
                loss,
                history,
            });
        }
        Err(e) => return Err(e),
    };
    write_history(&out.join("metrics.csv"), seed, &res.history)?;
    for (i, (m, w)) in res.masks.iter().zip(&res.final_weights).enumerate() {
        let mut f = create(&out.join(format!("mask_layer{i}.nmmk")))?;
        write_mask(&mut f, m)?;
        f.flush()?;
        let mut f = create(&out.join(format!("weights_layer{i}.nmpx")))?;
        write_weights(&mut f, w)?;
        f.flush()?;
    }
    let mut ckpt = create(&out.join("checkpoint.nmck"))?;
    write_checkpoint(&mut ckpt, res.total_steps as u64, &res.last_iterate)?;
    ckpt.flush()?;

    let final_model = res.final_model(&task.teacher)?;
    let summary = TrainSummary {
        seed,
        model: exp.task.model,
        arm: exp.train.arm.as_str(),
        total_steps: res.total_steps,
        removed_fraction: res.removed_fraction(),
        sparsity_ratio: sparsity_ratio_24(&WeightTensor::concat_blocks(&res.final_weights), 0.0),
        pre_projection_sparsity: res.pre_projection_sparsity(),
        early_final_similarity: res.early_final_similarity(),
        unconverged_prox_blocks: res.unconverged_prox_blocks,
        final_calib_loss: mse(&final_model, &task.calib)?,
        test_mse: task.compare(&res)?,
    };
    write_json(&out.join("summary.json"), &summary)?;
    let t = &summary.test_mse;
    println!(
        "test mse: dense {:.6}  learned {:.6}  magnitude {:.6}  wanda {:.6}",
        t.dense, t.learned, t.magnitude, t.wanda
    );
    println!(
        "steps {}  removed {:.3}  pre-projection 2:4 ratio {:.3}",
        summary.total_steps, summary.removed_fraction, summary.pre_projection_sparsity
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    test_mse: f64,
    sparsity_ratio: f64,
    removed_fraction: f64,
    layers: usize,
    samples: usize,
}

pub fn eval(
    weights: &[impl AsRef<Path>],
    masks: &[impl AsRef<Path>],
    testset: &Path,
) -> Result<()> {
    if weights.len() != masks.len() {
        return Err(Error::InvalidParam(format!(
            "{} weight files but {} mask files",
            weights.len(),
            masks.len()
        )));
    }
    let kind = match weights.len() {
        1 => ModelKind::Linear,
        2 => ModelKind::Mlp2,
        n => {
            return Err(Error::InvalidParam(format!(
                "expected 1 or 2 layers, got {n}"
            )))
        }
    };
    let mut layers = Vec::with_capacity(weights.len());
    let mut all_masks = Vec::with_capacity(masks.len());
    for (wp, mp) in weights.iter().zip(masks) {
        let w0 = read_weights(&mut BufReader::new(File::open(wp)?))?;
        let mask = read_mask(&mut BufReader::new(File::open(mp)?))?;
        mask.validate_24()?;
        layers.push(apply_mask_snap(&w0, &mask)?);
        all_masks.push(mask);
    }
    let combined = MaskTensor::concat_blocks(&all_masks);
    let data = CalibSet::read_csv(BufReader::new(File::open(testset)?))?;
    let model = ToyModel::new(kind, layers)?;
    let report = EvalReport {
        test_mse: mse(&model, &data)?,
        sparsity_ratio: sparsity_ratio_24(&WeightTensor::concat_blocks(model.layers()), 0.0),
        removed_fraction: 1.0 - combined.kept() as f64 / combined.bits().len() as f64,
        layers: model.layers().len(),
        samples: data.len(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    Ok(())
}
