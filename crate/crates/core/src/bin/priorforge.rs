//! Command-line front end: `synth`, `verify` and `metrics`.
//!
//! Exit status: 0 on success, 2 on validation failure (bad arguments, failed
//! verification, malformed input files), 1 on I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use priorforge::pipeline::{synthesize_dataset, synthesize_dataset_with_workers, OutputFormat, Preset, SynthesisConfig};
use priorforge::{compute_metrics, load_embeddings, verify_dataset, Error, UpscaleMode};

#[derive(Parser)]
#[command(name = "priorforge", version, about = "Synthesize image-prior datasets and score embedding sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sharded dataset and its manifest.
    Synth(SynthArgs),
    /// Re-check a dataset against its manifest.
    Verify(VerifyArgs),
    /// Precision / recall / density / coverage between two DIPE files.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Start from a JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a benchmark preset: mnist, fmnist, svhn, cifar10, cifar100, tiny-imagenet.
    #[arg(long, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Image channels [default: 3].
    #[arg(long)]
    channels: Option<usize>,
    /// Image height in pixels [default: 32].
    #[arg(long)]
    height: Option<usize>,
    /// Image width in pixels [default: 32].
    #[arg(long)]
    width: Option<usize>,
    /// Number of images [default: 10000].
    #[arg(long)]
    count: Option<u64>,
    /// Master seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Noise upscaling: nearest or bilinear [default: nearest].
    #[arg(long)]
    upscale_mode: Option<UpscaleMode>,
    /// Elastic displacement magnitude in pixels [default: 8 at side 32, linear in max(H, W)].
    #[arg(long)]
    elastic_alpha: Option<f64>,
    /// Elastic smoothing sigma in pixels [default: 4 at side 32, linear in max(H, W)].
    #[arg(long)]
    elastic_sigma: Option<f64>,
    /// Mask steady-state threshold on the mean absolute update [default: 0.01].
    #[arg(long)]
    mask_epsilon: Option<f64>,
    /// Mask refinement iteration cap [default: 50].
    #[arg(long)]
    mask_max_iters: Option<u32>,
    /// Mask blur sigma in pixels [default: 1.5 at side 32, linear in max(H, W)].
    #[arg(long)]
    blur_sigma: Option<f64>,
    /// Mask blur kernel side, odd and >= 3 [default: 5 at side 32].
    #[arg(long)]
    blur_kernel: Option<usize>,
    /// Probability that a cutmix slot is a monochrome image [default: 0.25].
    #[arg(long)]
    mono_prob: Option<f64>,
    /// Output format: f32bin or png (8-bit, visualization only) [default: f32bin].
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Images per shard [default: 10000].
    #[arg(long)]
    shard_size: Option<u64>,
    /// Worker threads; output is identical for any value [default: all cores].
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Path to manifest.json.
    manifest: PathBuf,
    /// Decode and range-check at most this many images per shard [default: all].
    #[arg(long)]
    sample: Option<u64>,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// Real embeddings (DIPE).
    #[arg(long)]
    real: PathBuf,
    /// Generated embeddings (DIPE).
    #[arg(long)]
    fake: PathBuf,
    /// Neighbourhood size.
    #[arg(long, default_value_t = priorforge::DEFAULT_K)]
    k: usize,
    /// Also write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl SynthArgs {
    fn build_config(&self) -> Result<SynthesisConfig, Error> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                SynthesisConfig::from_json(&text)?
            }
            (None, Some(p)) => p.config(),
            (None, None) => SynthesisConfig::new(3, 32, 32),
        };
        let reshaped = self.channels.is_some() || self.height.is_some() || self.width.is_some();
        if reshaped {
            // Size-dependent defaults follow the new shape unless given explicitly.
            let shaped = SynthesisConfig::new(
                self.channels.unwrap_or(cfg.channels),
                self.height.unwrap_or(cfg.height),
                self.width.unwrap_or(cfg.width),
            );
            cfg.channels = shaped.channels;
            cfg.height = shaped.height;
            cfg.width = shaped.width;
            cfg.elastic = shaped.elastic;
            cfg.mask.blur_sigma = shaped.mask.blur_sigma;
            cfg.mask.blur_kernel = shaped.mask.blur_kernel;
        }
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(cfg.count, self.count);
        set!(cfg.master_seed, self.seed);
        set!(cfg.upscale_mode, self.upscale_mode);
        set!(cfg.elastic.alpha, self.elastic_alpha);
        set!(cfg.elastic.sigma, self.elastic_sigma);
        set!(cfg.mask.epsilon, self.mask_epsilon);
        set!(cfg.mask.max_iters, self.mask_max_iters);
        set!(cfg.mask.blur_sigma, self.blur_sigma);
        set!(cfg.mask.blur_kernel, self.blur_kernel);
        set!(cfg.mono_prob, self.mono_prob);
        set!(cfg.format, self.format);
        set!(cfg.shard_size, self.shard_size);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_validation() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn run_synth(args: SynthArgs) -> ExitCode {
    let cfg = match args.build_config() {
        Ok(cfg) => cfg,
        Err(e) => return exit_for(&e),
    };
    let started = Instant::now();
    let result = match args.workers {
        Some(n) => synthesize_dataset_with_workers(&cfg, &args.out, n),
        None => synthesize_dataset(&cfg, &args.out),
    };
    match result {
        Ok(manifest) => {
            println!(
                "wrote {} images ({}x{}x{}) in {} shard(s) to {} in {:.2}s",
                manifest.total_count,
                cfg.channels,
                cfg.height,
                cfg.width,
                manifest.shards.len(),
                args.out.display(),
                started.elapsed().as_secs_f64()
            );
            println!("config hash {}", manifest.config_hash);
            ExitCode::SUCCESS
        }
        Err(e) => exit_for(&e),
    }
}

fn run_verify(args: VerifyArgs) -> ExitCode {
    let report = match verify_dataset(&args.manifest, args.sample) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for p in &report.manifest_problems {
            println!("manifest FAIL: {p}");
        }
        for s in &report.shards {
            if s.passed {
                println!("{} PASS ({} images checked)", s.path, s.images_checked);
            } else {
                println!("{} FAIL: {}", s.path, s.problems.join("; "));
            }
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run_metrics(args: MetricsArgs) -> ExitCode {
    let loaded = load_embeddings(&args.real).and_then(|r| Ok((r, load_embeddings(&args.fake)?)));
    let (real, fake) = match loaded {
        Ok(pair) => pair,
        Err(e) => return exit_for(&e),
    };
    let report = match compute_metrics(&real, &fake, args.k) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    println!("precision {:.2}", report.precision * 100.0);
    println!("recall    {:.2}", report.recall * 100.0);
    println!("density   {:.2}", report.density * 100.0);
    println!("coverage  {:.2}", report.coverage * 100.0);
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        if let Err(e) = std::fs::write(path, text + "\n") {
            return exit_for(&Error::Io {
                path: path.clone(),
                source: e,
            });
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Synth(args) => run_synth(args),
        Command::Verify(args) => run_verify(args),
        Command::Metrics(args) => run_metrics(args),
    }
}
