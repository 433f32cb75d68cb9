//! `segilm`: generate glyph datasets, run iterated-learning experiments and
//! extract metrics, latents and charts from their outputs.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use segilm::glyphset::{
    generate_dataset, load_dataset, render_base_glyph, save_dataset, write_pgm, GlyphId,
    NoiseParams, SegmentLayout, SigmaUnits,
};
use segilm::CoreError;
use segilm_cli::config::RunConfig;
use segilm_cli::csvfmt::Normalize;
use segilm_cli::runner::{self, RunSpec};
use segilm_cli::{chart, latents, presets};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "segilm",
    version,
    about = "Iterated learning on seven-segment glyph images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a noisy glyph variant dataset file.
    GenData(GenDataArgs),
    /// Run a multi-instantiation experiment and write CSVs and a manifest.
    Run(RunArgs),
    /// Dump continuous latent activations from agent snapshots.
    Latents(LatentsArgs),
    /// Recompute metrics offline from a directory of agent snapshots.
    Metrics(MetricsArgs),
    /// Regenerate charts from a run directory's CSVs.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Standard noise level 1, 2 or 3; overridden by --mu/--rho/--sigma.
    #[arg(long)]
    noise: Option<u8>,
    /// Mean of the exponential intensity dip.
    #[arg(long)]
    mu: Option<f64>,
    /// Rotation std-dev, radians.
    #[arg(long)]
    rho: Option<f64>,
    /// Translation std-dev.
    #[arg(long)]
    sigma: Option<f64>,
    /// Units for --sigma.
    #[arg(long, value_enum, default_value_t = SigmaUnitsArg::Upsampled)]
    sigma_units: SigmaUnitsArg,
    /// Variant images per glyph.
    #[arg(long, default_value_t = 100)]
    variants: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write PGM previews (base glyph and first variant per glyph) here.
    #[arg(long)]
    preview: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaUnitsArg {
    Upsampled,
    Base,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeArg {
    PerRun,
    Global,
}

#[derive(Args)]
struct RunArgs {
    /// Named experiment preset (fig3, fig4, fig6a, fig6b, fig6c, fig7).
    #[arg(long)]
    preset: Option<String>,
    /// Config file of key = value lines; applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline override, e.g. --set generations=30; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    instantiations: Option<usize>,
    /// Worker threads; output bytes are identical at any value.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Use this dataset file instead of generating one.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Save every generation's agent snapshot.
    #[arg(long)]
    snapshots: bool,
    /// Emit the normalized per-epoch loss CSV.
    #[arg(long)]
    losses: bool,
    /// Loss normalization reference.
    #[arg(long, value_enum, default_value_t = NormalizeArg::PerRun)]
    normalize: NormalizeArg,
    /// Also render SVG charts.
    #[arg(long)]
    charts: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct LatentsArgs {
    /// Single agent snapshot: one row per variant image of --glyph.
    #[arg(long, conflicts_with = "snapshot_dir")]
    snapshot: Option<PathBuf>,
    /// Snapshot directory: one row per generation in --from..=--to.
    #[arg(long, requires = "from", requires = "to")]
    snapshot_dir: Option<PathBuf>,
    #[arg(long)]
    glyph: u8,
    /// Variant rows to dump in --snapshot mode.
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long)]
    from: Option<usize>,
    #[arg(long)]
    to: Option<usize>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory of gen-NNNN.agent snapshots.
    #[arg(long)]
    snapshot_dir: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Background compositionality constant.
    #[arg(long, conflicts_with = "run_dir")]
    c0: Option<f64>,
    /// Read c0 from this run directory's manifest instead.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Run directory containing aggregate.csv and inst-*/generations.csv.
    #[arg(long)]
    run_dir: PathBuf,
}

/// Machine-readable failure category; doubles as the exit code.
fn category(err: &anyhow::Error) -> (&'static str, u8) {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::InvalidConfig(_)) | Some(CoreError::Dimension(_)) => ("config", 2),
        Some(CoreError::Io(_)) => ("io", 3),
        Some(CoreError::Format(_))
        | Some(CoreError::Version { .. })
        | Some(CoreError::Checksum) => ("format", 4),
        Some(CoreError::Divergence { .. }) => ("divergence", 5),
        None => ("other", 1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            let (cat, code) = category(&err);
            eprintln!("error-category: {cat}");
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Run(args) => run(args),
        Command::Latents(args) => latents_cmd(args),
        Command::Metrics(args) => metrics_cmd(args),
        Command::Plot(args) => {
            chart::write_charts(&args.run_dir)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn gen_data(args: GenDataArgs) -> anyhow::Result<ExitCode> {
    let mut params = match args.noise {
        Some(level) => NoiseParams::level(level).ok_or_else(|| {
            CoreError::InvalidConfig(format!("noise level must be 1..=3, got {level}"))
        })?,
        None => NoiseParams::none(),
    };
    if let Some(mu) = args.mu {
        params.mu = mu;
    }
    if let Some(rho) = args.rho {
        params.rho = rho;
    }
    if let Some(sigma) = args.sigma {
        params.sigma = sigma;
    }
    params.sigma_units = match args.sigma_units {
        SigmaUnitsArg::Upsampled => SigmaUnits::Upsampled,
        SigmaUnitsArg::Base => SigmaUnits::Base,
    };
    let layout = SegmentLayout::default();
    let ds = generate_dataset(&layout, &params, args.variants, args.seed)?;
    save_dataset(&ds, &args.output)?;
    println!(
        "wrote {} ({} glyphs x {} variants)",
        args.output.display(),
        128,
        args.variants
    );
    if let Some(dir) = args.preview {
        std::fs::create_dir_all(&dir).map_err(CoreError::Io)?;
        for id in GlyphId::all() {
            let base = render_base_glyph(id, &layout);
            write_pgm(&base, &dir.join(format!("glyph-{:03}-base.pgm", id.id())))?;
            write_pgm(
                &ds.variants_of(id)[0],
                &dir.join(format!("glyph-{:03}-variant.pgm", id.id())),
            )?;
        }
        println!("wrote previews to {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let preset_name = args.preset.clone().unwrap_or_else(|| "custom".into());
    let mut cfg = match &args.preset {
        Some(name) => presets::preset(name).ok_or_else(|| {
            anyhow!(CoreError::InvalidConfig(format!(
                "unknown preset {name:?}; known: {}",
                presets::PRESET_NAMES.join(", ")
            )))
        })?,
        None => RunConfig::default(),
    };
    if let Some(path) = &args.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    for kv in &args.sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            anyhow!(CoreError::InvalidConfig(format!(
                "--set wants KEY=VALUE, got {kv:?}"
            )))
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(g) = args.generations {
        cfg.generations = g;
    }
    if let Some(i) = args.instantiations {
        cfg.instantiations = i;
    }
    if args.snapshots {
        cfg.snapshots = true;
    }
    if args.losses {
        cfg.log_losses = true;
    }

    let spec = RunSpec {
        cfg,
        out_dir: args.output.clone(),
        dataset: args.dataset.clone(),
        parallel: args.parallel.max(1),
        charts: args.charts,
        normalize: match args.normalize {
            NormalizeArg::PerRun => Normalize::PerRun,
            NormalizeArg::Global => Normalize::Global,
        },
        preset_name,
    };
    let outcome = runner::run_experiment(&spec)?;
    for (i, err) in &outcome.failures {
        eprintln!("instantiation {i} failed: {err}");
    }
    println!(
        "{} of {} instantiations completed; results in {}",
        outcome.records.iter().flatten().count(),
        outcome.records.len(),
        args.output.display()
    );
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error-category: divergence");
        Ok(ExitCode::from(5))
    }
}

fn latents_cmd(args: LatentsArgs) -> anyhow::Result<ExitCode> {
    let ds = load_dataset(&args.dataset)?;
    let glyph = GlyphId::new(args.glyph).ok_or_else(|| {
        anyhow!(CoreError::InvalidConfig(format!(
            "glyph id {} out of range",
            args.glyph
        )))
    })?;
    let rows = match (&args.snapshot, &args.snapshot_dir) {
        (Some(snap), None) => {
            let agent = segilm::Agent::load_snapshot(snap)?;
            latents::variant_latents(&agent, &ds, glyph, args.count)?
        }
        (None, Some(dir)) => latents::generation_latents(
            &ds_dir(dir),
            &ds,
            glyph,
            args.from.unwrap(),
            args.to.unwrap(),
        )?,
        _ => {
            return Err(anyhow!(CoreError::InvalidConfig(
                "pass exactly one of --snapshot or --snapshot-dir".into()
            )))
        }
    };
    std::fs::write(&args.output, latents::latents_csv(&rows)).map_err(CoreError::Io)?;
    println!("wrote {} rows to {}", rows.len(), args.output.display());
    Ok(ExitCode::SUCCESS)
}

fn ds_dir(dir: &std::path::Path) -> PathBuf {
    // Accept either the snapshots directory itself or its parent inst dir.
    let nested = dir.join("snapshots");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn metrics_cmd(args: MetricsArgs) -> anyhow::Result<ExitCode> {
    let ds = load_dataset(&args.dataset)?;
    let c0 = match (args.c0, &args.run_dir) {
        (Some(v), _) => v,
        (None, Some(dir)) => {
            let text = std::fs::read_to_string(dir.join("manifest.txt")).map_err(CoreError::Io)?;
            runner::manifest_value(&text, "c0")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| anyhow!(CoreError::Format("manifest has no c0 entry".into())))?
        }
        (None, None) => {
            return Err(anyhow!(CoreError::InvalidConfig(
                "pass --c0 or --run-dir".into()
            )))
        }
    };
    let rows = runner::recompute_metrics(&ds_dir(&args.snapshot_dir), &ds, c0)?;
    std::fs::write(&args.output, runner::metrics_csv(&rows)).map_err(CoreError::Io)?;
    println!("wrote {} rows to {}", rows.len(), args.output.display());
    Ok(ExitCode::SUCCESS)
}
