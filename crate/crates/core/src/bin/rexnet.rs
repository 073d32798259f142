use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rexnet::pipeline::{self, Config, ContrastSelection, StaticServer};

#[derive(Parser)]
#[command(name = "rexnet", version, about = "Relatable contrastive explanations for vocal emotion recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the full model and write checkpoints.
    Train {
        /// JSON config; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use the generated corpus instead of RAVDESS.
        #[arg(long)]
        synthetic: bool,
        /// RAVDESS speech directory.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        skip_gan: bool,
        #[arg(long, default_value = "runs/default")]
        out: PathBuf,
    },
    /// Explain one clip and write its bundle.
    Explain {
        /// Checkpoint directory written by `train`.
        #[arg(long, default_value = "runs/default")]
        checkpoints: PathBuf,
        clip_id: String,
        /// `all` or a comma-separated list of emotions.
        #[arg(long, default_value = "all")]
        contrasts: ContrastSelection,
        /// Bundle root.
        #[arg(long, default_value = "bundles")]
        out: PathBuf,
    },
    /// Run the evaluation suite and write metrics.json / metrics.txt.
    Evaluate {
        #[arg(long, default_value = "runs/default")]
        checkpoints: PathBuf,
        #[arg(long)]
        k_fraction: Option<f64>,
    },
    /// Serve a bundle directory over HTTP.
    Serve {
        #[arg(long, default_value = "bundles")]
        dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train {
            config,
            seed,
            synthetic,
            data,
            skip_gan,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => Config::default(),
            };
            let seed = seed.unwrap_or(cfg.seed);
            cfg = cfg.with_seed(seed);
            cfg.synthetic |= synthetic;
            cfg.skip_gan |= skip_gan;
            if data.is_some() {
                cfg.data_dir = data;
                cfg.synthetic = synthetic;
            }
            let start = std::time::Instant::now();
            let trace = pipeline::cmd_train(&cfg, &out)?;
            println!(
                "trained on {} clips in {:.1}s: base test accuracy {:.3}, checkpoints in {}",
                trace.clips,
                start.elapsed().as_secs_f64(),
                trace.base_test_accuracy,
                out.display()
            );
        }
        Command::Explain {
            checkpoints,
            clip_id,
            contrasts,
            out,
        } => {
            let run = pipeline::load_run(&checkpoints)?;
            let b = pipeline::cmd_explain(&run, &clip_id, &contrasts, &out)?;
            let available = b.contrasts.iter().filter(|c| c.available).count();
            println!(
                "{}: predicted {}, {available}/{} contrasts explained, bundle in {}",
                b.clip.clip_id,
                b.prediction.predicted,
                b.contrasts.len(),
                out.display()
            );
        }
        Command::Evaluate { checkpoints, k_fraction } => {
            let ev = pipeline::cmd_evaluate(&checkpoints, k_fraction)?;
            let text = std::fs::read_to_string(checkpoints.join(pipeline::TABLE_TEXT_FILE))?;
            print!("{text}");
            if !ev.passed() {
                bail!("{} of {} checks failed", ev.checks.iter().filter(|c| !c.passed).count(), ev.checks.len());
            }
        }
        Command::Serve { dir, port } => {
            let server = StaticServer::bind(&dir, port)?;
            println!("serving {} on http://127.0.0.1:{}/", dir.display(), server.port());
            server.run();
        }
    }
    Ok(())
}
