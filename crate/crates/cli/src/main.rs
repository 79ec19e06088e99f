//! `rift`: config-driven runs of adversarial training, MRC scans and RiFT.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rift_core::attack::{adversarial_train, standard_train};
use rift_core::harness::{load_checkpoint, Dataset, save_checkpoint, write_atomic, MetricsReport, RunConfig};
use rift_core::mrc::{mrc_scan, MrcReport};
use rift_core::numerics::derive_seed;
use rift_core::rift::{rift_pipeline, sweep_and_select, InterpolationSweep, ModuleSelection};
use rift_core::{NetworkSpec, ParamSet};

const THETA_STD: &str = "theta_std.ckpt";
const THETA_AT: &str = "theta_at.ckpt";
const THETA_FT: &str = "theta_ft.ckpt";
const THETA_STAR: &str = "theta_ft_star.ckpt";
const MRC_REPORT: &str = "mrc_report.tsv";
const SWEEP: &str = "sweep.tsv";
const SUMMARY: &str = "rift_summary.txt";

#[derive(Parser)]
#[command(name = "rift", version, about = "Adversarial training, module robust criticality and robust critical fine-tuning")]
struct Cli {
    /// Run configuration (`key = value` lines); defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for checkpoints and reports.
    #[arg(long, global = true, default_value = "rift-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean training; writes theta_std.ckpt and train_std.log.
    TrainStd,
    /// Adversarial training; writes theta_at.ckpt and train_at.log.
    TrainAt,
    /// MRC of every module of theta_at.ckpt; writes mrc_report.tsv.
    MrcScan {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// MRC scan, fine-tuning and interpolation sweep starting from theta_at.ckpt.
    Rift {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Modules to fine-tune (overrides finetune.modules).
        #[arg(long)]
        module: Option<String>,
        /// Interpolation grid step (overrides sweep.alpha_step).
        #[arg(long)]
        alpha_step: Option<f64>,
    },
    /// Standard, adversarial and OOD accuracy of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Re-evaluates the interpolation line between two checkpoints.
    Sweep {
        #[arg(long)]
        at: Option<PathBuf>,
        #[arg(long)]
        ft: Option<PathBuf>,
        #[arg(long)]
        alpha_step: Option<f64>,
    },
    /// Before/after table for the run in --out, with its MRC report.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Rift { module, alpha_step, .. } => {
            if let Some(m) = module {
                cfg.modules = m.parse::<ModuleSelection>()?;
            }
            if let Some(step) = alpha_step {
                cfg.sweep.alpha_step = *step;
            }
        }
        Command::Sweep { alpha_step: Some(step), .. } => cfg.sweep.alpha_step = *step,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    print!("{}", cfg.render());
    println!();
    let out = cli.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let spec = cfg.network()?;
    let (train, test) = cfg.datasets()?;

    match &cli.command {
        Command::TrainStd => {
            let (theta, log) = standard_train(&spec, &train, &test, &cfg.standard_schedule())?;
            save(&theta, &spec, &out.join(THETA_STD))?;
            write_text(&out.join("train_std.log"), &log.render())?;
            print!("{}", metrics(&cfg, &spec, &theta, &test)?.render());
        }
        Command::TrainAt => {
            let (theta, log) = adversarial_train(&spec, &train, &test, &cfg.attack(), &cfg.schedule())?;
            save(&theta, &spec, &out.join(THETA_AT))?;
            write_text(&out.join("train_at.log"), &log.render())?;
            print!("{}", metrics(&cfg, &spec, &theta, &test)?.render());
        }
        Command::MrcScan { checkpoint } => {
            let theta = load(&spec, &input(checkpoint, out, THETA_AT))?;
            let report = mrc_scan(&spec, &theta, &train, &cfg.mrc_config(), mrc_seed(&cfg))?;
            write_text(&out.join(MRC_REPORT), &report.render())?;
            print!("{}", report.render());
        }
        Command::Rift { checkpoint, .. } => {
            let theta_at = load(&spec, &input(checkpoint, out, THETA_AT))?;
            let outcome = rift_pipeline(
                &spec,
                &theta_at,
                &train,
                &test,
                &cfg.mrc_config(),
                &cfg.finetune_config(),
                &cfg.modules,
                &cfg.sweep,
                cfg.seed,
            )?;
            let (theta_ft, theta_star, sweep) = (outcome.theta_ft, outcome.theta_star, outcome.sweep);
            write_text(&out.join(MRC_REPORT), &outcome.report.render())?;
            save(&theta_ft, &spec, &out.join(THETA_FT))?;
            save(&theta_star, &spec, &out.join(THETA_STAR))?;
            write_text(&out.join(SWEEP), &sweep.render())?;
            let before = metrics(&cfg, &spec, &theta_at, &test)?;
            let after = metrics(&cfg, &spec, &theta_star, &test)?;
            let summary = summary(&outcome.modules, &sweep, &before, &after);
            write_text(&out.join(SUMMARY), &summary)?;
            print!("{summary}");
        }
        Command::Eval { checkpoint } => {
            let theta = load(&spec, checkpoint)?;
            print!("{}", metrics(&cfg, &spec, &theta, &test)?.render());
        }
        Command::Sweep { at, ft, .. } => {
            let theta_at = load(&spec, &input(at, out, THETA_AT))?;
            let theta_ft = load(&spec, &input(ft, out, THETA_FT))?;
            let sweep = sweep_and_select(&spec, &theta_at, &theta_ft, &test, &cfg.attack(), &cfg.sweep, cfg.seed)?;
            write_text(&out.join(SWEEP), &sweep.render())?;
            print!("{}", sweep.render());
            println!("alpha_star\t{:.4}", sweep.alpha_star);
        }
        Command::Report => {
            let report_path = out.join(MRC_REPORT);
            if report_path.exists() {
                let text = fs::read_to_string(&report_path)?;
                let report = MrcReport::parse(&text).with_context(|| format!("in {}", report_path.display()))?;
                print!("{}", render_mrc_table(&report));
            }
            let theta_at = load(&spec, &out.join(THETA_AT))?;
            let theta_star = load(&spec, &out.join(THETA_STAR))?;
            let sweep_text = fs::read_to_string(out.join(SWEEP)).context("reading sweep.tsv")?;
            let sweep = InterpolationSweep::parse(&sweep_text, cfg.sweep.tolerance)?;
            let before = metrics(&cfg, &spec, &theta_at, &test)?;
            let after = metrics(&cfg, &spec, &theta_star, &test)?;
            print!("{}", delta_table(&before, &after, sweep.alpha_star));
        }
    }
    Ok(())
}

fn mrc_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.seed, 0x3C)
}

fn input(path: &Option<PathBuf>, out: &Path, default: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| out.join(default))
}

fn metrics(cfg: &RunConfig, spec: &NetworkSpec, theta: &ParamSet, test: &Dataset) -> Result<MetricsReport> {
    Ok(MetricsReport::evaluate(spec, theta, test, &cfg.attack(), cfg.seed)?)
}

fn save(theta: &ParamSet, spec: &NetworkSpec, path: &Path) -> Result<()> {
    save_checkpoint(theta, spec, path).with_context(|| format!("writing {}", path.display()))
}

fn load(spec: &NetworkSpec, path: &Path) -> Result<ParamSet> {
    if !path.exists() {
        bail!("checkpoint {} not found", path.display());
    }
    load_checkpoint(path, spec).with_context(|| format!("loading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn render_mrc_table(report: &MrcReport) -> String {
    let mut s = String::from("module\tmrc\tadv_before\tadv_after\tadv_drop\n");
    for r in &report.records {
        let _ = writeln!(
            s,
            "{}\t{:.4}\t{:.2}\t{:.2}\t{:.2}",
            r.module_name, r.mrc_value, r.robust_acc_before, r.robust_acc_after, r.robust_acc_drop
        );
    }
    s
}

fn delta_table(before: &MetricsReport, after: &MetricsReport, alpha_star: f64) -> String {
    let mut s = String::from("\tstd\tood\tadv\n");
    let _ = writeln!(s, "at\t{:.2}\t{:.2}\t{:.2}", before.std_acc, before.ood.mean, before.adv_acc);
    let _ = writeln!(s, "rift\t{:.2}\t{:.2}\t{:.2}", after.std_acc, after.ood.mean, after.adv_acc);
    let _ = writeln!(
        s,
        "delta\t{:+.2}\t{:+.2}\t{:+.2}",
        after.std_acc - before.std_acc,
        after.ood.mean - before.ood.mean,
        after.adv_acc - before.adv_acc
    );
    let _ = writeln!(s, "alpha_star\t{alpha_star:.4}");
    s
}

fn summary(modules: &[String], sweep: &InterpolationSweep, before: &MetricsReport, after: &MetricsReport) -> String {
    let mut s = format!("modules\t{}\n", modules.join(","));
    s.push_str(&delta_table(before, after, sweep.alpha_star));
    s
}
