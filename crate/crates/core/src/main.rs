use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use octa_quant::biomarkers::analyze;
use octa_quant::config::{Config, EmbeddingSource};
use octa_quant::imaging::{load_grayscale, save_grayscale, BinaryMask, BitDepth, GrayImage};
use octa_quant::pipeline::{run_manifest, RunOptions};
use octa_quant::quality::quality_scores;
use octa_quant::vasculature::{graph_to_json, write_overlay_png};

/// Vascular biomarkers and image-quality statistics for OCTA projection maps.
#[derive(Parser)]
#[command(name = "octa-quant", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse every TR/GT pair of a manifest and write the report files.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
        /// Record entries with missing files in the error ledger instead of aborting.
        #[arg(long)]
        skip_missing: bool,
        /// Embeddings CSV (`id,<dims...>`) used for FID instead of the built-in embedding.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Print the biomarkers of a single image.
    Features {
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write mask, skeleton, overlay and graph listing into this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Print SSIM and PCQI of a translated image against its ground truth.
    Compare {
        tr: PathBuf,
        gt: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config, String> {
    match path {
        Some(p) => Config::load(p).map_err(|e| e.to_string()),
        None => Ok(Config::default()),
    }
}

fn mask_image(mask: &BinaryMask) -> GrayImage {
    GrayImage::from_fn(mask.width(), mask.height(), |x, y| {
        f64::from(u8::from(mask.get(x, y)))
    })
}

fn dump(dir: &Path, analysis: &octa_quant::biomarkers::VesselAnalysis) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    save_grayscale(
        &mask_image(&analysis.mask),
        dir.join("mask.png"),
        BitDepth::Eight,
    )
    .map_err(|e| e.to_string())?;
    save_grayscale(
        &mask_image(analysis.skeleton.as_mask()),
        dir.join("skeleton.png"),
        BitDepth::Eight,
    )
    .map_err(|e| e.to_string())?;
    write_overlay_png(
        &analysis.mask,
        &analysis.skeleton,
        &analysis.graph,
        dir.join("overlay.png"),
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(dir.join("graph.json"), graph_to_json(&analysis.graph))
        .map_err(|e| e.to_string())
}

fn execute(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run {
            manifest,
            out,
            config,
            jobs,
            skip_missing,
            embeddings,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(path) = embeddings {
                cfg.quality.fid.embedding = EmbeddingSource::File(path);
            }
            let mut opts = RunOptions {
                skip_missing,
                ..RunOptions::default()
            };
            if let Some(n) = jobs {
                opts.jobs = n;
            }
            let report = run_manifest(&manifest, &out, &cfg, &opts).map_err(|e| e.to_string())?;
            eprintln!(
                "{} of {} entries analysed, {} in error ledger; report in {}",
                report.rows.len(),
                report.n_entries,
                report.errors.len(),
                out.display()
            );
            Ok(if report.is_partial() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Features {
            image,
            config,
            dump: dump_dir,
        } => {
            let cfg = load_config(config.as_deref())?;
            let img = load_grayscale(&image).map_err(|e| e.to_string())?;
            let features = cfg.features();
            let analysis = analyze(&img, &features).map_err(|e| e.to_string())?;
            if let Some(dir) = dump_dir {
                dump(&dir, &analysis)?;
            }
            let set = analysis
                .biomarkers(features.scale_factor)
                .map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&set).expect("serializes")
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { tr, gt, config } => {
            let cfg = load_config(config.as_deref())?;
            let tr = load_grayscale(&tr).map_err(|e| e.to_string())?;
            let gt = load_grayscale(&gt).map_err(|e| e.to_string())?;
            let scores = quality_scores(&gt, &tr, &cfg.quality.ssim, &cfg.quality.pcqi)
                .map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&scores).expect("serializes")
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // exit code 2 is reserved for partial runs
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
