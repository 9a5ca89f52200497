//! `hpk`: command-line driver for the highway perception pipeline.
//!
//! Exit status: 0 on success, 1 for invalid configuration, data or usage,
//! 2 for numeric failures such as a diverging loss.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hpk_core::pipeline::{self, bench::STAGES, Layout, RunConfig};
use hpk_core::Error;

#[derive(Parser)]
#[command(name = "hpk", version, about = "Highway vehicle and lane perception pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `paths.out_dir`, else `out` next to the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: frames, manifest, lidar map, trajectory.
    Synth(Common),
    /// Recover lane boundaries from the lidar map and relabel the manifest.
    Autolabel(Common),
    /// Train the detector and write a checkpoint.
    Train(Common),
    /// Run the detector over the manifest and write detections.
    Infer(Common),
    /// Score detections against the manifest.
    Eval(Common),
    /// Time each inference stage and the merge scaling sweep.
    Bench(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hpk: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}

fn setup(c: &Common) -> Result<(RunConfig, Layout), Error> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let base = c.config.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let layout = Layout::new(&cfg, base, c.out.as_deref());
    std::fs::create_dir_all(&layout.out).map_err(|e| Error::io(&layout.out, e))?;
    Ok((cfg, layout))
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Synth(c) => {
            let (cfg, layout) = setup(&c)?;
            let files = pipeline::cmd_synth(&cfg, &layout)?;
            println!("synth: {} frames (seed {})", cfg.synth.frames, cfg.seed);
            for f in files {
                println!("  wrote {}", f.display());
            }
        }
        Command::Autolabel(c) => {
            let (cfg, layout) = setup(&c)?;
            for f in pipeline::cmd_autolabel(&cfg, &layout)? {
                println!("autolabel: wrote {}", f.display());
            }
        }
        Command::Train(c) => {
            let (cfg, layout) = setup(&c)?;
            let o = pipeline::cmd_train(&cfg, &layout)?;
            match o.epochs.last() {
                Some(e) => println!("train: {} steps, final epoch loss {:.6}", o.optim.step_count, e.loss),
                None => println!("train: already at {} steps, nothing to do", o.optim.step_count),
            }
            println!("  wrote {}", layout.output(pipeline::CHECKPOINT).display());
        }
        Command::Infer(c) => {
            let (cfg, layout) = setup(&c)?;
            let d = pipeline::cmd_infer(&cfg, &layout)?;
            let v: usize = d.iter().map(|r| r.vehicles.len()).sum();
            let l: usize = d.iter().map(|r| r.lanes.len()).sum();
            println!("infer: {} frames, {v} vehicles, {l} lanes", d.len());
            println!("  wrote {}", layout.output(pipeline::DETECTIONS).display());
        }
        Command::Eval(c) => {
            let (cfg, layout) = setup(&c)?;
            let r = pipeline::cmd_eval(&cfg, &layout)?;
            println!("eval: {} frames", r.metadata.frames);
            for (name, b) in [
                ("vehicles", &r.vehicle_summary),
                ("radar", &r.radar_summary),
                ("lanes", &r.lane_summary),
                (r.ego_lane_summary.bin_id.as_str(), &r.ego_lane_summary),
            ] {
                println!(
                    "  {name:<14} tp {:>5} fp {:>5} fn {:>5}  P {:.3} R {:.3} F1 {:.3}",
                    b.tp, b.fp, b.fn_, b.precision, b.recall, b.f1
                );
            }
            println!("  wrote {}", layout.output(pipeline::REPORT_JSON).display());
        }
        Command::Bench(c) => {
            let (cfg, layout) = setup(&c)?;
            let r = pipeline::cmd_bench(&cfg, &layout)?;
            println!("bench: {} frames x {} repeats at {}x{}", r.frames, r.repeat, r.image_width, r.image_height);
            for s in STAGES.iter().filter_map(|n| r.stage(n)) {
                println!(
                    "  {:<10} mean {:>9.3} ms  median {:>9.3} ms  p95 {:>9.3} ms  {:>9.1} Hz",
                    s.stage, s.mean_ms, s.median_ms, s.p95_ms, s.hz
                );
            }
            println!("  merge sweep exponent {:.3}", r.merge_exponent);
            println!("  {}", r.note);
        }
    }
    Ok(())
}
