// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use btlab::config::ConfigDocument;
use btlab::external::{serve_mock, MockSettings};
use btlab::output::{emit_results, OutputFormat};
use btlab::presets::{describe, load_preset, PRESETS};
use btlab::{run_document, HarnessError, RunOptions};
use btlab_core::exec::Execution;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser)]
#[command(name = "btlab", version, about = "Run verifier-guided sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every grid point of a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a named preset.
    Preset {
        name: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
    /// List the named presets.
    ListPresets,
    /// Serve a uniform generator over the line protocol, for testing.
    MockOracle {
        #[arg(long, default_value_t = 2)]
        vocab: usize,
        /// Multiplies every probability; values other than 1 give malformed replies.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        delay_ms: u64,
        /// Listen on this address instead of standard streams.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    JsonLines,
}

#[derive(Args)]
struct RunArgs {
    /// Override the master seed of every grid point.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "BTLAB_OUT_DIR")]
    out: Option<PathBuf>,
    /// Output formats; defaults to the config's, else both.
    #[arg(long, value_enum)]
    format: Vec<FormatArg>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, env = "BTLAB_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Run episodes on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

fn execute(doc: ConfigDocument, args: RunArgs) -> Result<(), HarnessError> {
    let doc = match args.seed {
        Some(seed) => doc.with_seed(seed),
        None => doc,
    };
    let dir = args.out.or_else(|| doc.output.dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let formats: Vec<OutputFormat> = if args.format.is_empty() {
        doc.output.formats.clone()
    } else {
        args.format
            .iter()
            .map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::JsonLines => OutputFormat::JsonLines,
            })
            .collect()
    };
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let rows = run_document(&doc, RunOptions { exec, workers: args.workers })?;
    std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
    for format in formats {
        let path = dir.join(format!("{}.{}", doc.name, format.extension()));
        emit_results(&rows, &path, format)?;
        info!("wrote {} rows to {}", rows.len(), path.display());
        println!("{}", path.display());
    }
    Ok(())
}

fn mock_oracle(settings: MockSettings, listen: Option<String>) -> std::io::Result<()> {
    let Some(addr) = listen else {
        let stdin = std::io::stdin();
        return serve_mock(stdin.lock(), std::io::stdout().lock(), settings);
    };
    let listener = TcpListener::bind(&addr)?;
    println!("{}", listener.local_addr()?);
    std::io::stdout().flush()?;
    for stream in listener.incoming() {
        let stream = stream?;
        stream.set_nodelay(true)?;
        std::thread::spawn(move || {
            let reader = BufReader::new(stream.try_clone()?);
            serve_mock(reader, stream, settings)
        });
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Cmd::Run { config, run } => execute(ConfigDocument::load(&config)?, run),
        Cmd::Preset { name, run } => execute(load_preset(&name)?, run),
        Cmd::Validate { config } => {
            let doc = ConfigDocument::load(&config)?;
            println!("{}: {} grid point(s)", display(&config), doc.grid.len());
            Ok(())
        }
        Cmd::ListPresets => {
            for (name, text) in PRESETS {
                println!("{name:<22} {}", describe(text));
            }
            Ok(())
        }
        Cmd::MockOracle { vocab, scale, delay_ms, listen } => {
            let settings = MockSettings { vocab_size: vocab.max(1), scale, delay: Duration::from_millis(delay_ms) };
            mock_oracle(settings, listen).map_err(|source| HarnessError::Io { path: PathBuf::from("-"), source })
        }
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
