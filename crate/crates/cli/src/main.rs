use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use daa_core::config::RunConfig;
use daa_core::data::{gen_sample, gen_split, load_dataset, save_dataset, Dataset, Split};
use daa_core::exec::Exec;
use daa_core::model::{DaaMode, DaaModel};
use daa_core::train::{
    bench_inference, device_description, evaluate, export_st, run_ablation, sig6, train, EvalReport,
};

const CONFIG_ECHO: &str = "config.txt";
const TRAIN_SET: &str = "train.daad";
const TEST_SET: &str = "test.daad";
const WEIGHTS: &str = "weights.daaw";
const REPORT: &str = "report.json";
const TIMINGS: &str = "timings.json";
const LOSS_LOG: &str = "loss.log";
const ST_CSV: &str = "st.csv";
const ABLATION: &str = "ablation.json";
const BENCH: &str = "bench.json";

/// Delta-age AdaIN age regression on a synthetic aging dataset.
#[derive(Parser, Debug)]
#[command(name = "daa", version)]
struct Cli {
    /// `key = value` run configuration; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `data_seed` for gen-data and `seed` for every other command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `data_dir`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Weight file (default: `<out>/weights.daaw`).
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Comma-separated style-age intervals; overrides `eval_intervals`.
    #[arg(long, global = true, value_delimiter = ',')]
    interval: Option<Vec<usize>>,
    /// Overrides `daa_mode`.
    #[arg(long = "daa-mode", global = true)]
    daa_mode: Option<String>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate the synthetic train and test sets.
    GenData,
    /// Train a model on the training set.
    Train,
    /// Evaluate MAE and CA(3, 5, 7) at each interval.
    Eval,
    /// Train and evaluate all four transfer modes for every ablation seed.
    Ablation,
    /// Time transfer plus decoding at each interval.
    Bench,
    /// Write the learned style table as CSV.
    ExportSt,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Ablation => "ablation",
            Command::Bench => "bench",
            Command::ExportSt => "export-st",
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    exec: Exec,
    threads: usize,
    weights: PathBuf,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn dataset(&self, name: &str) -> Result<Dataset> {
        let path = self.cfg.data_dir().join(name);
        load_dataset(&path).with_context(|| format!("loading {}", path.display()))
    }

    fn model(&self) -> Result<DaaModel<f32>> {
        DaaModel::load(&self.weights).with_context(|| format!("loading {}", self.weights.display()))
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        let key = if cli.command == Command::GenData { "data_seed" } else { "seed" };
        cfg.set(key, &seed.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(data) = &cli.data {
        cfg.data_dir = Some(data.clone());
    }
    if let Some(list) = &cli.interval {
        let joined = list.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        cfg.set("eval_intervals", &joined)?;
    }
    if let Some(mode) = &cli.daa_mode {
        cfg.set("daa_mode", mode)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn gen_data(ctx: &Ctx) -> Result<()> {
    let spec = &ctx.cfg.data;
    let dir = ctx.cfg.data_dir();
    fs::create_dir_all(dir)?;
    for (split, name) in [(Split::Train, TRAIN_SET), (Split::Test, TEST_SET)] {
        let set = gen_split(spec, split, ctx.exec)?;
        let path = dir.join(name);
        save_dataset(&set, &path).with_context(|| format!("writing {}", path.display()))?;
        let counts = set.bucket_counts();
        println!("{name}: {} samples", set.len());
        for (b, c) in counts.iter().enumerate() {
            println!("  {:>2}-{:<2} {c}", b * 10, b * 10 + 9);
        }
    }
    Ok(())
}

fn train_cmd(ctx: &Ctx) -> Result<()> {
    let data = ctx.dataset(TRAIN_SET)?;
    let out = train(&ctx.cfg.train, &data, ctx.exec)?;
    out.model.save(&ctx.weights).with_context(|| format!("writing {}", ctx.weights.display()))?;
    let log: String = out
        .history
        .iter()
        .map(|h| {
            format!(
                "epoch={} lr={} loss={} train_mae={}\n",
                h.epoch,
                sig6(h.lr),
                sig6(h.loss),
                sig6(h.train_mae)
            )
        })
        .collect();
    fs::write(ctx.out(LOSS_LOG), log)?;
    if let Some(last) = out.history.last() {
        println!(
            "trained {} epochs in {:.1}s: loss {:.4}, train mae {:.3}",
            out.history.len(),
            out.seconds,
            last.loss,
            last.train_mae
        );
    }
    println!("weights: {}", ctx.weights.display());
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!("{} on {} samples", r.daa_mode, r.samples);
    println!("interval   K      MAE   CA(3)   CA(5)   CA(7)");
    for i in &r.intervals {
        println!(
            "{:>8} {:>3} {:>8.3} {:>7.2} {:>7.2} {:>7.2}",
            i.interval, i.k, i.mae, i.ca["3"], i.ca["5"], i.ca["7"]
        );
    }
}

fn eval_cmd(ctx: &Ctx) -> Result<()> {
    let model = ctx.model()?;
    let test = ctx.dataset(TEST_SET)?;
    let report = evaluate(&model, &test, &ctx.cfg.train.eval_intervals, ctx.exec)?;
    write_json(&ctx.out(REPORT), &report)?;
    write_json(&ctx.out(TIMINGS), &report.timings)?;
    print_report(&report);
    Ok(())
}

fn ablation_cmd(ctx: &Ctx) -> Result<()> {
    let train_set = ctx.dataset(TRAIN_SET)?;
    let test = ctx.dataset(TEST_SET)?;
    let t = Instant::now();
    let table = run_ablation(&train_set, &test, &ctx.cfg.train, &ctx.cfg.ablation_seeds, ctx.exec)?;
    write_json(&ctx.out(ABLATION), &table)?;
    println!("{:<16} {:>8} {:>8}", "", "MAE", "CA(7)");
    for row in &table.rows {
        println!("{:<16} {:>8.3} {:>8.2}", row.label, row.mean_mae, row.mean_ca7);
    }
    log::info!("ablation took {:.0}s", t.elapsed().as_secs_f64());
    Ok(())
}

fn bench_cmd(ctx: &Ctx) -> Result<()> {
    let model = ctx.model()?;
    let path = ctx.cfg.data_dir().join(TEST_SET);
    let image = match load_dataset(&path) {
        Ok(set) if !set.is_empty() => set.samples[0].image.clone(),
        _ => gen_sample(&ctx.cfg.data, Split::Test, 0).image,
    };
    let table = bench_inference(
        &model,
        &image,
        &ctx.cfg.train.eval_intervals,
        &ctx.cfg.bench,
        &device_description(ctx.threads),
    )?;
    write_json(&ctx.out(BENCH), &table)?;
    println!("{}", table.device);
    println!("interval   K  median ms     mad");
    for r in &table.rows {
        println!("{:>8} {:>3} {:>10.3} {:>7.3}", r.interval, r.k, r.median_ms, r.mad_ms);
    }
    Ok(())
}

fn export_cmd(ctx: &Ctx) -> Result<()> {
    let model = ctx.model()?;
    if model.mode() != DaaMode::Binary {
        anyhow::bail!(daa_core::Error::Contract(format!(
            "style export needs a binary-mapping model, got {}",
            model.mode().as_str()
        )));
    }
    let path = ctx.out(ST_CSV);
    export_st(&model, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    let threads = cli.threads.unwrap_or(0);
    #[cfg(feature = "parallel")]
    if threads > 0 {
        // a second pool build (tests calling run twice) keeps the first
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let exec = if threads == 1 { Exec::Sequential } else { Exec::default() };
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    fs::write(cfg.out_dir.join(CONFIG_ECHO), cfg.render())?;
    let weights = cli.weights.clone().unwrap_or_else(|| cfg.out_dir.join(WEIGHTS));
    let ctx = Ctx {
        cfg,
        exec,
        threads: if threads == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { threads },
        weights,
    };
    log::info!("{} in {}", cli.command.name(), ctx.cfg.out_dir.display());
    match cli.command {
        Command::GenData => gen_data(&ctx),
        Command::Train => train_cmd(&ctx),
        Command::Eval => eval_cmd(&ctx),
        Command::Ablation => ablation_cmd(&ctx),
        Command::Bench => bench_cmd(&ctx),
        Command::ExportSt => export_cmd(&ctx),
    }
}

/// Short error tag: the core error kind when there is one.
fn kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<daa_core::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DAA_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {}: {msg}", kind(&e));
            ExitCode::FAILURE
        }
    }
}
