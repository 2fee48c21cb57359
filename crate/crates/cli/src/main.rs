use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsdecouple::pipeline::{write_synthetic_example, PipelineConfig, Stage};
use gsdecouple::synth::SynthConfig;
use gsdecouple::Error;

#[derive(Parser)]
#[command(name = "gsdecouple", version, about = "Decouple, restore and simulate objects in Gaussian-splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Separate the object and restore object and scene.
    Decouple(Common),
    /// Simulate the restored object inside the restored scene.
    Simulate(Common),
    /// Render the simulated frames.
    Render(Common),
    /// Chamfer and PSNR against the configured references.
    Eval(Common),
    /// Run stages in order.
    Run {
        #[command(flatten)]
        common: Common,
        /// Stages to run, comma separated, or `all`.
        #[arg(long, default_value = "all")]
        stage: String,
    },
    /// Write the synthetic sphere-on-slab scene and a config for it.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

fn stages(list: &str) -> Result<Vec<Stage>, Error> {
    if list == "all" {
        return Ok(Stage::ALL.to_vec());
    }
    list.split(',').map(|s| s.trim().parse()).collect()
}

fn run(common: &Common, stages: &[Stage]) -> Result<(), Error> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config {
                path: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for st in stages {
        log::info!("stage {}", st.name());
        let report = st.run(&cfg)?;
        println!("{}", serde_json::json!({ "stage": st.name(), "report": report }));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decouple(c) => run(c, &[Stage::Decouple]),
        Command::Simulate(c) => run(c, &[Stage::Simulate]),
        Command::Render(c) => run(c, &[Stage::Render]),
        Command::Eval(c) => run(c, &[Stage::Eval]),
        Command::Run { common, stage } => stages(stage).and_then(|s| run(common, &s)),
        Command::Synth { out } => write_synthetic_example(out, &SynthConfig::default()).map(|p| {
            println!("{}", p.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(if e.is_config() {
                2
            } else if e.is_numerical() {
                3
            } else {
                1
            })
        }
    }
}
