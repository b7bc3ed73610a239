use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sfp_cli::batch::run_batch;
use sfp_cli::stats::{self, write_csv};
use sfp_cli::{run_single, Overrides};
use sfp_core::freq::{RhoNorm, DEFAULT_RHO_THRESHOLD};
use sfp_core::oracle::{CorpusSpec, DepthProfile, HazeRange};
use sfp_core::spatial::{GradientOperator, SpatialParams};

#[derive(Parser)]
#[command(
    name = "sfp",
    version,
    about = "Training-free scene recovery from spatial and frequency priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover a single image.
    Recover {
        input: PathBuf,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Recover every PNG/JPEG image in a directory and write summary.csv.
    Batch {
        dir: PathBuf,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Emit prior statistics as CSV.
    Stats(StatsArgs),
    /// Add synthetic haze to every image in a directory.
    Synth {
        clean_dir: PathBuf,
        #[arg(long)]
        beta_s: f64,
        #[arg(long, value_parser = parse_triple)]
        airlight: [f64; 3],
        #[arg(long, default_value = "perlin-like")]
        profile: DepthProfile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "synth")]
        output: PathBuf,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON config file; command-line options take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    patch_radius: Option<usize>,
    #[arg(long)]
    gf_radius: Option<usize>,
    #[arg(long)]
    gf_eps: Option<f64>,
    #[arg(long, value_enum)]
    gradient: Option<Gradient>,
    #[arg(long, value_enum)]
    rho_norm: Option<Norm>,
    #[arg(long)]
    rho_threshold: Option<f64>,
    #[arg(long)]
    phi_target: Option<f64>,
    #[arg(long)]
    beta_lo: Option<f64>,
    #[arg(long)]
    beta_hi: Option<f64>,
    /// Skip spatial restoration (the input stands in for it).
    #[arg(long)]
    no_sdp: bool,
    /// Skip frequency enhancement (the input stands in for it).
    #[arg(long)]
    no_fdp: bool,
    /// Average the three sources in Lab instead of weighted fusion.
    #[arg(long)]
    naive_fusion: bool,
    /// Skip gamma and highlight compression.
    #[arg(long)]
    no_pp: bool,
    /// Reserved; night input is processed like daytime input.
    #[arg(long)]
    night: bool,
    /// Also write the transmission map and both intermediate images.
    #[arg(long)]
    emit_intermediate: bool,
    /// Leave wall-clock timings out of reports.
    #[arg(long)]
    no_timings: bool,
    /// Worker threads, 0 = one per core.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_parser = parse_triple)]
    uciqe_coeffs: Option<[f64; 3]>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Gradient {
    Magnitude,
    L1,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Cycles,
    Diagonal,
}

impl From<Norm> for RhoNorm {
    fn from(n: Norm) -> Self {
        match n {
            Norm::Cycles => RhoNorm::Cycles,
            Norm::Diagonal => RhoNorm::Diagonal,
        }
    }
}

impl PipelineArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            patch_radius: self.patch_radius,
            gf_radius: self.gf_radius,
            gf_eps: self.gf_eps,
            gradient: self.gradient.map(|g| match g {
                Gradient::Magnitude => GradientOperator::Magnitude,
                Gradient::L1 => GradientOperator::L1,
            }),
            rho_norm: self.rho_norm.map(Into::into),
            rho_threshold: self.rho_threshold,
            phi_target: self.phi_target,
            beta_lo: self.beta_lo,
            beta_hi: self.beta_hi,
            no_sdp: self.no_sdp,
            no_fdp: self.no_fdp,
            naive_fusion: self.naive_fusion,
            no_pp: self.no_pp,
            night: self.night,
            emit_intermediate: self.emit_intermediate,
            no_timings: self.no_timings,
            threads: self.threads,
            uciqe_coeffs: self.uciqe_coeffs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsMode {
    DcDiff,
    Radial,
    TransmissionMse,
}

#[derive(Clone, Copy, ValueEnum)]
enum Haze {
    Default,
    Moderate,
}

#[derive(Args)]
struct StatsArgs {
    mode: StatsMode,
    /// CSV destination; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Corpus size (defaults: 100 pairs for dc-diff, 20 scenes otherwise).
    #[arg(long)]
    count: Option<usize>,
    /// Side of the square corpus images.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    haze: Option<Haze>,
    /// Force a gray airlight (always on for dc-diff).
    #[arg(long)]
    achromatic: bool,
    /// Images for radial mode; the bundled samples when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cycles")]
    rho_norm: Norm,
    #[arg(long, default_value_t = DEFAULT_RHO_THRESHOLD)]
    rho_threshold: f64,
    #[arg(long, default_value_t = SpatialParams::default().patch_radius)]
    patch_radius: usize,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl StatsArgs {
    fn corpus(&self, base: CorpusSpec) -> Result<CorpusSpec> {
        let spec = CorpusSpec {
            count: self.count.unwrap_or(base.count),
            size: self.size.unwrap_or(base.size),
            seed: self.seed.unwrap_or(base.seed),
            achromatic: base.achromatic || self.achromatic,
            haze: match self.haze {
                Some(Haze::Default) => HazeRange::DEFAULT,
                Some(Haze::Moderate) => HazeRange::MODERATE,
                None => base.haze,
            },
        };
        if spec.size < sfp_core::image::MIN_SIDE {
            bail!(
                "corpus images must be at least {} pixels wide",
                sfp_core::image::MIN_SIDE
            );
        }
        Ok(spec)
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| "expected three comma-separated numbers".to_string())
}

fn emit<T: serde::Serialize>(output: Option<&Path>, header: &[&str], rows: &[T]) -> Result<()> {
    match output {
        Some(p) => {
            let file =
                std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_csv(std::io::BufWriter::new(file), header, rows)
        }
        None => write_csv(std::io::stdout().lock(), header, rows),
    }
}

fn run_stats(args: &StatsArgs) -> Result<()> {
    let pool = sfp_cli::batch::worker_pool(args.threads)?;
    let out = args.output.as_deref();
    pool.install(|| match args.mode {
        StatsMode::DcDiff => {
            let rows = stats::dc_diff_rows(&args.corpus(CorpusSpec::DC_PRIOR)?);
            emit(out, &stats::DC_DIFF_HEADER, &rows)
        }
        StatsMode::TransmissionMse => {
            let params = SpatialParams {
                patch_radius: args.patch_radius,
                ..SpatialParams::default()
            };
            let rows = stats::transmission_rows(&args.corpus(CorpusSpec::DEFAULT)?, &params)?;
            emit(out, &stats::TRANSMISSION_HEADER, &rows)
        }
        StatsMode::Radial => {
            let images = match &args.input {
                Some(dir) => stats::load_named_images(dir)?,
                None => stats::bundled_images(),
            };
            let rows = stats::radial_rows(&images, args.rho_threshold, args.rho_norm.into())?;
            emit(out, &stats::RADIAL_HEADER, &rows)
        }
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Recover {
            input,
            output,
            pipeline,
        } => {
            let cfg = pipeline.overrides().resolve(pipeline.config.as_deref())?;
            let pool = sfp_cli::batch::worker_pool(cfg.threads)?;
            pool.install(|| run_single(&input, &cfg, &output))?;
            Ok(true)
        }
        Command::Batch {
            dir,
            output,
            pipeline,
        } => {
            let cfg = pipeline.overrides().resolve(pipeline.config.as_deref())?;
            let items = run_batch(&dir, &cfg, &output)?;
            let failed: Vec<_> = items.iter().filter(|i| !i.is_ok()).collect();
            let mut err = std::io::stderr().lock();
            for item in &failed {
                if let Err(e) = &item.result {
                    writeln!(err, "{}: {e}", item.input.display())?;
                }
            }
            writeln!(
                err,
                "{} of {} images recovered",
                items.len() - failed.len(),
                items.len()
            )?;
            Ok(failed.is_empty())
        }
        Command::Stats(args) => {
            run_stats(&args)?;
            Ok(true)
        }
        Command::Synth {
            clean_dir,
            beta_s,
            airlight,
            profile,
            seed,
            output,
        } => {
            let records = stats::synth_dir(&clean_dir, profile, beta_s, airlight, seed, &output)?;
            eprintln!(
                "wrote {} hazy images to {}",
                records.len(),
                output.display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
