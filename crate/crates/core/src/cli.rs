//! Command-line pipeline: generate, label, prune, train, eval, solve, bench, oracle-check.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::datagen::{fill_reward_table, generate_dataset};
use crate::error::{Error, Result};
use crate::inference::{bench, check_inputs, evaluate, fast_solve};
use crate::io::{self, parse_mps};
use crate::learner::{train, LossMode, SamplingMode, TrainingSet};
use crate::milp::solve_milp;
use crate::model::{validate_instance, SolveStatus};
use crate::oracle::run_oracle_check;
use crate::pruning::{build_bipartite, coverage_stats, greedy_set_cover};

#[derive(Debug, Parser)]
#[command(name = "stratlearn", version, about = "Learn reduced models for fast solving of parameterized MILP families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Preference,
    RewardFit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplingArg {
    Ranked,
    Nr,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample and label training and test instances.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        min_n: Option<usize>,
        #[arg(long)]
        max_n: Option<usize>,
        #[arg(long)]
        test_n: Option<usize>,
    },
    /// Fill the reward table of a dataset.
    Label {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Prune the strategy library with greedy SetCover.
    Prune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        library_out: Option<PathBuf>,
    },
    /// Train the reward model.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, value_enum)]
        loss: Option<LossArg>,
        #[arg(long, value_enum)]
        sampling: Option<SamplingArg>,
    },
    /// Evaluate a model on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Solve one MPS instance through the model and its library.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Also run branch-and-bound to report the suboptimality.
        #[arg(long)]
        reference: bool,
    },
    /// Time the model path against branch-and-bound on the test split.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Use at most this many test instances.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Compare branch-and-bound against exhaustive enumeration on random MILPs.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
}

struct Ctx {
    cfg: PipelineConfig,
    base: PathBuf,
}

impl Ctx {
    fn load(common: &Common, err: &mut dyn Write) -> Result<Self> {
        let (mut cfg, base) = match &common.config {
            Some(p) => (PipelineConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (PipelineConfig::default(), PathBuf::new()),
        };
        if let Some(s) = common.seed {
            cfg = cfg.with_seed(s);
        }
        if let Some(o) = &common.out {
            cfg.output_dir = o.clone();
        }
        for w in cfg.validate()? {
            let _ = writeln!(err, "warning: {w}");
        }
        Ok(Self { cfg, base })
    }

    fn out(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.cfg.output_dir.join(name))
    }
}

fn input(path: PathBuf) -> Result<PathBuf> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!("{} does not exist", path.display())));
    }
    Ok(path)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 success, 1 invalid input, 2 runtime failure.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() { 1 } else { 2 }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Generate { common, min_n, max_n, test_n } => {
            let mut ctx = Ctx::load(&common, err)?;
            if let Some(v) = min_n {
                ctx.cfg.datagen.min_n = v;
            }
            if let Some(v) = max_n {
                ctx.cfg.datagen.max_n = v;
            }
            if let Some(v) = test_n {
                ctx.cfg.test.n = v;
            }
            ctx.cfg.validate()?;
            let family = ctx.cfg.family.build(&ctx.base)?;
            let train_ds = generate_dataset(&family, &ctx.cfg.train_datagen())?;
            let test_ds = generate_dataset(&family, &ctx.cfg.test_datagen())?;
            io::save_dataset(&ctx.cfg.output_dir.join("train.ndjson"), &train_ds)?;
            io::save_dataset(&ctx.cfg.output_dir.join("test.ndjson"), &test_ds)?;
            writeln!(out, "N={}, M={}, good_turing={:.4}", train_ds.len(), train_ds.library.len(), train_ds.good_turing)?;
            writeln!(out, "test N={}", test_ds.len())?;
        }
        Command::Label { common, dataset } => {
            let ctx = Ctx::load(&common, err)?;
            let path = input(ctx.out(&dataset, "train.ndjson"))?;
            let mut ds = io::load_dataset(&path)?;
            fill_reward_table(&mut ds, None, None)?;
            io::save_dataset(&path, &ds)?;
            writeln!(out, "labeled {} x {} reward table", ds.len(), ds.library.len())?;
        }
        Command::Prune { common, dataset, library_out } => {
            let ctx = Ctx::load(&common, err)?;
            let ds = io::load_dataset(&input(ctx.out(&dataset, "train.ndjson"))?)?;
            let g = build_bipartite(&ds, ctx.cfg.pruning.eps_p, ctx.cfg.pruning.eps_d)?;
            let pruned = greedy_set_cover(&g, &ds.library)?;
            let stats = coverage_stats(&g);
            io::save_library(&ctx.out(&library_out, "library.json"), &ds.family.varying, &pruned)?;
            writeln!(
                out,
                "M={}, M_P={}, mean_coverage={:.4}, max_coverage={:.4}",
                ds.library.len(),
                pruned.len(),
                stats.mean_fraction,
                stats.max_fraction
            )?;
        }
        Command::Train { common, dataset, library, model_out, epochs, loss, sampling } => {
            let mut ctx = Ctx::load(&common, err)?;
            if let Some(e) = epochs {
                ctx.cfg.train.epochs = e;
            }
            if let Some(l) = loss {
                ctx.cfg.train.loss_mode = match l {
                    LossArg::Preference => LossMode::Preference,
                    LossArg::RewardFit => LossMode::RewardFit,
                };
            }
            if let Some(s) = sampling {
                ctx.cfg.train.sampling_mode = match s {
                    SamplingArg::Ranked => SamplingMode::Ranked,
                    SamplingArg::Nr => SamplingMode::Nr,
                };
            }
            let ds = io::load_dataset(&input(ctx.out(&dataset, "train.ndjson"))?)?;
            let lib = io::load_library(&input(ctx.out(&library, "library.json"))?)?;
            let set = TrainingSet::from_dataset(&ds, &lib.library)?;
            let start = Instant::now();
            let (model, report) = train(&set, &ctx.cfg.train_config())?;
            let model_path = ctx.out(&model_out, "model.json");
            io::save_model(&model_path, &model)?;
            let loss_path = model_path.with_file_name("loss.csv");
            io::write_atomic(&loss_path, io::loss_csv(&report.loss_trace)?.as_bytes())?;
            writeln!(
                out,
                "epochs={}, steps={}, final_loss={:.6}, seconds={:.2}",
                report.loss_trace.len(),
                report.steps,
                report.loss_trace.last().copied().unwrap_or(f64::NAN),
                start.elapsed().as_secs_f64()
            )?;
        }
        Command::Eval { common, dataset, model, library, k } => {
            let ctx = Ctx::load(&common, err)?;
            let ds = io::load_dataset(&input(ctx.out(&dataset, "test.ndjson"))?)?;
            let model = io::load_model(&input(ctx.out(&model, "model.json"))?)?;
            let lib = io::load_library(&input(ctx.out(&library, "library.json"))?)?;
            let k = k.unwrap_or(ctx.cfg.inference.k).min(lib.library.len());
            let ev = evaluate(&model, &ds, &lib.library, k, ctx.cfg.inference.eps1, ctx.cfg.inference.eps2)?;
            let dir = &ctx.cfg.output_dir;
            io::write_json(&dir.join("metrics.json"), &ev.metrics)?;
            io::write_atomic(&dir.join("metrics.csv"), io::metrics_csv(&ev)?.as_bytes())?;
            io::write_atomic(&dir.join("timings.csv"), io::timings_csv(&ev)?.as_bytes())?;
            let m = &ev.metrics;
            writeln!(out, "accuracy={:.4}, k={}, n={}, mean_p={:e}, mean_d={:e}", m.accuracy, m.k, m.n, m.mean_p, m.mean_d)?;
        }
        Command::Solve { common, instance, model, library, k, reference } => {
            let ctx = Ctx::load(&common, err)?;
            let text = std::fs::read_to_string(input(instance)?)?;
            let inst = parse_mps(&text)?;
            validate_instance(&inst).into_result()?;
            let model = io::load_model(&input(ctx.out(&model, "model.json"))?)?;
            let lib = io::load_library(&input(ctx.out(&library, "library.json"))?)?;
            let theta: Vec<f64> = lib.varying.iter().map(|c| c.read(&inst)).collect();
            check_inputs(&model, &theta, &lib.library)?;
            let f_star = if reference {
                let sol = solve_milp(&inst, &ctx.cfg.datagen.bnb);
                (sol.status == SolveStatus::Optimal).then_some(sol.objective)
            } else {
                None
            };
            let k = k.unwrap_or(ctx.cfg.inference.k).min(lib.library.len());
            let start = Instant::now();
            let sel = fast_solve(&model, &inst, &theta, &lib.library, k, f_star, ctx.cfg.inference.eps1)?;
            let time_ms = start.elapsed().as_secs_f64() * 1e3;
            let d = f_star.map(|_| sel.record.d);
            let doc = json!({
                "objective": sel.solution.objective,
                "p": sel.record.p,
                "d": d,
                "strategy_index": sel.index,
                "time_ms": time_ms,
                "all_infeasible": sel.all_infeasible,
                "x": sel.solution.x,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
        Command::Bench { common, dataset, model, library, k, limit } => {
            let ctx = Ctx::load(&common, err)?;
            let mut ds = io::load_dataset(&input(ctx.out(&dataset, "test.ndjson"))?)?;
            if let Some(l) = limit {
                ds.records.truncate(l);
                ds.reward_table = None;
            }
            let model = io::load_model(&input(ctx.out(&model, "model.json"))?)?;
            let lib = io::load_library(&input(ctx.out(&library, "library.json"))?)?;
            let k = k.unwrap_or(ctx.cfg.inference.k).min(lib.library.len());
            let report = bench(&model, &ds, &lib.library, k, &ctx.cfg.datagen.bnb, ctx.cfg.inference.eps1)?;
            io::write_json(&ctx.cfg.output_dir.join("bench.json"), &report)?;
            io::write_atomic(&ctx.cfg.output_dir.join("bench.csv"), io::bench_csv(&report)?.as_bytes())?;
            writeln!(
                out,
                "median_fast_ms={:.3}, median_bnb_ms={:.3}, ratio={:.4}",
                report.median_fast_s * 1e3,
                report.median_bnb_s * 1e3,
                report.ratio
            )?;
        }
        Command::OracleCheck { common, count } => {
            let ctx = Ctx::load(&common, err)?;
            let report = run_oracle_check(count, ctx.cfg.seed, 1e-6)?;
            writeln!(
                out,
                "checked={}, mismatches={}, max_abs_diff={:e}, seconds={:.2}",
                report.checked,
                report.mismatches.len(),
                report.max_abs_diff,
                report.elapsed_s
            )?;
            if !report.passed() {
                for m in &report.mismatches {
                    writeln!(err, "seed {}: branch-and-bound {} vs enumeration {}", m.seed, m.bnb, m.exhaustive)?;
                }
                return Ok(2);
            }
        }
    }
    Ok(0)
}

/// Caps the global worker pool at `MSK_THREADS` when set.
pub fn configure_threads() -> std::result::Result<(), String> {
    match std::env::var("MSK_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("MSK_THREADS must be a positive integer, got '{v}'"))?;
            if n == 0 {
                return Err("MSK_THREADS must be a positive integer, got '0'".into());
            }
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
        }
        Err(_) => Ok(()),
    }
}
