use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use log::warn;

use hdrssl::dataset::{
    classify_scene, list_frames, load_stack, parse_ev_pattern, run_pipeline, scene_flows, stats_report,
    triplets_from_frames, ConfigError, Manifest, ManifestError, PipelineConfig, PipelineError, SceneError,
    StatsError,
};
use hdrssl::flow::{flow_to_rgb, write_flo};
use hdrssl::imgcore::io::{write_pfm, write_png8};
use hdrssl::motion_domain::{PatchClass, PatchFate};

#[derive(Parser)]
#[command(
    name = "hdrssl",
    version,
    about = "Turn LDR exposure triplets into HDR supervision pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a manifest and write every pair.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print subset percentages of a generated tree and write stats.csv.
    Stats {
        #[arg(long)]
        root: PathBuf,
    },
    /// Dump patch classes and fused labels for one scene.
    Fuse {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write the four flows of one scene as .flo files and color images.
    VizFlow {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build a manifest from a directory of frames with a repeating EV cycle.
    TripletsFromVideo {
        #[arg(long)]
        dir: PathBuf,
        /// Comma-separated EV cycle, for example `-2,0,2`.
        #[arg(long, allow_hyphen_values = true)]
        evs: String,
        /// Dataset name recorded in the manifest; defaults to the directory name.
        #[arg(long)]
        dataset: Option<String>,
        /// Manifest path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

const CONFIG: u8 = 1;
const IO: u8 = 2;
const EMPTY: u8 = 3;

fn fail<E: Into<anyhow::Error>>(code: u8) -> impl FnOnce(E) -> Failure {
    move |e| Failure { code, err: e.into() }
}

fn config_code(e: &ConfigError) -> u8 {
    match e {
        ConfigError::Read { .. } => IO,
        _ => CONFIG,
    }
}

fn manifest_code(e: &ManifestError) -> u8 {
    match e {
        ManifestError::Read { .. } => IO,
        _ => CONFIG,
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(|e| Failure {
            code: config_code(&e),
            err: e.into(),
        }),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_manifest(path: &Path) -> Result<Manifest, Failure> {
    Manifest::load(path).map_err(|e| Failure {
        code: manifest_code(&e),
        err: e.into(),
    })
}

fn scene_error(e: SceneError) -> Failure {
    let code = match &e {
        SceneError::Manifest(_) | SceneError::Grid(_) | SceneError::Stack(_) => CONFIG,
        _ => IO,
    };
    Failure { code, err: e.into() }
}

fn generate(
    manifest: &Path,
    out: &Path,
    config: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = load_config(Some(config))?;
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.workers = workers.unwrap_or(cfg.workers);
    let manifest = load_manifest(manifest)?;
    let report = run_pipeline(&manifest, out, &cfg).map_err(|e| match e {
        PipelineError::Pool(_) => fail(CONFIG)(e),
        e => fail(IO)(e),
    })?;
    for (scene, why) in &report.failures {
        warn!("scene {scene} skipped: {why}");
    }
    println!(
        "{} pairs from {} scenes ({} skipped)",
        report.stats.total(),
        report.scenes.len(),
        report.failures.len()
    );
    if !manifest.scenes.is_empty() && report.stats.is_empty() {
        return Err(Failure {
            code: EMPTY,
            err: anyhow!("no supervision pairs were produced"),
        });
    }
    let table = report.stats.render_table();
    print!("{table}");
    for (name, text) in [("stats.md", table), ("stats.csv", report.stats.to_csv())] {
        let p = out.join(name);
        std::fs::write(&p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(fail(IO))?;
    }
    Ok(())
}

fn stats(root: &Path) -> Result<(), Failure> {
    let s = stats_report(root).map_err(|e| match e {
        StatsError::EmptyDataset(_) => fail(EMPTY)(e),
        e => fail(IO)(e),
    })?;
    print!("{}", s.render_table());
    let csv = root.join("stats.csv");
    std::fs::write(&csv, s.to_csv())
        .with_context(|| format!("writing {}", csv.display()))
        .map_err(fail(IO))?;
    Ok(())
}

fn find_scene<'a>(m: &'a Manifest, id: &str) -> Result<&'a hdrssl::dataset::SceneManifest, Failure> {
    m.scenes.iter().find(|s| s.id == id).ok_or_else(|| Failure {
        code: CONFIG,
        err: anyhow!("scene {id:?} is not in the manifest"),
    })
}

fn fuse(scene: &str, manifest: &Path, out: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let manifest = load_manifest(manifest)?;
    let sc = find_scene(&manifest, scene)?;
    let outcome = classify_scene(sc, &cfg).map_err(scene_error)?;
    let dir = out.join(scene).join("fuse");
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(fail(IO))?;
    let mut text = String::new();
    writeln!(
        text,
        "# alignable={} modes={:?}",
        outcome.alignment.alignable(),
        outcome.alignment.mode_centers
    )
    .expect("String write");
    for r in &outcome.reports {
        let class = match r.class {
            Some(PatchClass::Static) => "static",
            Some(PatchClass::Dynamic) => "dynamic",
            None => "unaligned",
        };
        let fate = match r.fate {
            PatchFate::Fused { consistency_db } => format!("fused {consistency_db:.2}dB"),
            PatchFate::RejectedWarp => "rejected_warp".into(),
            PatchFate::RejectedConsistency { db } => format!("rejected_consistency {db:?}"),
            PatchFate::ReferenceLabel => "reference_label".into(),
            PatchFate::Discarded => "discarded".into(),
        };
        writeln!(
            text,
            "{} {} {} {} {}",
            r.index, r.origin.0, r.origin.1, class, fate
        )
        .expect("String write");
    }
    std::fs::write(dir.join("classes.txt"), text)
        .context("writing classes.txt")
        .map_err(fail(IO))?;
    for p in &outcome.pairs {
        let path = dir.join(format!("{:05}_{}.pfm", p.index, p.source.as_str()));
        write_pfm(&p.label, &path).map_err(fail(IO))?;
    }
    println!(
        "{} patches, {} labels written to {}",
        outcome.reports.len(),
        outcome.pairs.len(),
        dir.display()
    );
    Ok(())
}

fn viz_flow(scene: &str, manifest: &Path, out: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let manifest = load_manifest(manifest)?;
    let sc = find_scene(&manifest, scene)?;
    let stack = load_stack(sc, cfg.gamma).map_err(scene_error)?;
    let flows = scene_flows(sc, &stack, &cfg).map_err(scene_error)?;
    let dir = out.join(scene).join("flow");
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(fail(IO))?;
    for (f, name) in flows.iter().zip(["1to0", "0to1", "1to2", "2to1"]) {
        write_flo(f, dir.join(format!("{name}.flo"))).map_err(fail(IO))?;
        write_png8(&flow_to_rgb(f, None), dir.join(format!("{name}.png"))).map_err(fail(IO))?;
    }
    println!("flows written to {}", dir.display());
    Ok(())
}

fn triplets(dir: &Path, evs: &str, dataset: Option<&str>, out: Option<&Path>) -> Result<(), Failure> {
    let pattern = parse_ev_pattern(evs).map_err(fail(CONFIG))?;
    let frames = list_frames(dir).map_err(fail(IO))?;
    let name = match dataset {
        Some(d) => d.to_string(),
        None => dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("video")
            .to_string(),
    };
    let m = triplets_from_frames(&frames, &pattern, &name);
    let text = m.to_toml_string();
    match out {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(fail(IO))?,
        None => print!("{text}"),
    }
    if m.scenes.is_empty() {
        return Err(Failure {
            code: EMPTY,
            err: anyhow!("no window of three frames has three distinct EVs"),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate {
            manifest,
            out,
            config,
            seed,
            workers,
        } => generate(manifest, out, config, *seed, *workers),
        Command::Stats { root } => stats(root),
        Command::Fuse {
            scene,
            manifest,
            out,
            config,
        } => fuse(scene, manifest, out, config.as_deref()),
        Command::VizFlow {
            scene,
            manifest,
            out,
            config,
        } => viz_flow(scene, manifest, out, config.as_deref()),
        Command::TripletsFromVideo {
            dir,
            evs,
            dataset,
            out,
        } => triplets(dir, evs, dataset.as_deref(), out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
