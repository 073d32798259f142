//! Runs the full command pipeline on a reduced generated corpus: train,
//! evaluate, explain every test clip into a bundle directory, and
//! optionally serve it.
//!
//! cargo run --release --example evaluate_metrics -- [run_dir] [--serve]

use std::path::PathBuf;

use rexnet::pipeline::{cmd_evaluate, cmd_explain, cmd_train, load_run, Config, ContrastSelection, StaticServer};

fn main() -> rexnet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let serve = args.iter().any(|a| a == "--serve");
    let dir = PathBuf::from(args.iter().find(|a| !a.starts_with("--")).cloned().unwrap_or_else(|| "runs/example".into()));

    let mut config = Config::default().with_seed(7);
    config.synthetic = true;
    config.synthetic_per_class = 8;
    config.pretrain.epochs = 8;
    config.gan.epochs = 4;
    config.joint.epochs = 4;
    cmd_train(&config, &dir)?;

    let ev = cmd_evaluate(&dir, None)?;
    print!("{}", std::fs::read_to_string(dir.join("metrics.txt")).unwrap_or_default());
    println!("all checks passed: {}", ev.passed());

    let run = load_run(&dir)?;
    let bundles = dir.join("bundles");
    for &i in &run.corpus.test_indices() {
        let id = &run.corpus.clips()[i].meta.clip_id;
        let b = cmd_explain(&run, id, &ContrastSelection::All, &bundles)?;
        println!("{id}: labelled {}, predicted {}", b.clip.emotion, b.prediction.predicted);
    }
    if serve {
        let server = StaticServer::bind(&bundles, 8080)?;
        println!("serving {} on http://127.0.0.1:{}/", bundles.display(), server.port());
        server.run();
    }
    Ok(())
}
