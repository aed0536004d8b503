use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fragilemark::experiment::{self, ExperimentConfig};
use fragilemark::io::{load_image, save_image, ImageFormat};
use fragilemark::manipulate::filters::resize_bilinear;
use fragilemark::manipulate::{self, Manipulation, ManipulationSpec};
use fragilemark::metrics::{self, Thresholds};
use fragilemark::morph::{sidecar_path, LandmarkSet, MorphAux};
use fragilemark::stego::{self, EmbedKey, EngineId, EngineParams};
use fragilemark::RasterImage;

/// Exit status of `verify` when the revealed marker fails the tamper rule.
const EXIT_FLAGGED: u8 = 2;

#[derive(Parser)]
#[command(name = "fragilemark", version, about = "Certify images with a fragile hidden marker and detect tampering")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct EngineArgs {
    /// Embedding engine: lsb or dct.
    #[arg(long)]
    engine: EngineId,
    /// Embedding key, decimal or 0x-prefixed hex.
    #[arg(long, value_parser = parse_key)]
    key: u64,
    /// QIM step for the dct engine.
    #[arg(long)]
    dct_step: Option<f64>,
}

impl EngineArgs {
    fn engine(&self) -> Result<Box<dyn stego::StegoEngine>> {
        let mut params = EngineParams::default();
        if let Some(step) = self.dct_step {
            params.dct_step = step;
        }
        Ok(stego::engine(self.engine, &params)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Hide a marker inside a cover image.
    Certify {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        cover: PathBuf,
        /// Resampled to the cover size if it differs.
        #[arg(long)]
        marker: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one manipulation, e.g. `compression/jpeg/q80` or `morph/landmark/a0.9`.
    Manipulate {
        #[arg(long = "spec")]
        spec: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Second face for morphs.
        #[arg(long)]
        partner: Option<PathBuf>,
        /// Landmarks of the input; defaults to its `.landmarks.txt` sidecar.
        #[arg(long)]
        landmarks_a: Option<PathBuf>,
        /// Landmarks of the partner; defaults to its sidecar.
        #[arg(long)]
        landmarks_b: Option<PathBuf>,
        /// Seed for the noise manipulations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recover the hidden marker.
    Reveal {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a revealed marker with the original. Exits 2 when flagged.
    Verify {
        #[arg(long)]
        marker: PathBuf,
        #[arg(long)]
        revealed: PathBuf,
        #[arg(long, default_value_t = Thresholds::default().ssim)]
        ssim_thresh: f64,
        #[arg(long, default_value_t = Thresholds::default().psnr)]
        psnr_thresh: f64,
    },
    /// Run the full certify/manipulate/reveal/classify experiment.
    RunExperiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic face corpus with landmarks, marker and manifest.
    GenCorpus {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn parse_key(s: &str) -> std::result::Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => s.replace('_', "").parse(),
    };
    parsed.map_err(|e| format!("invalid key {s:?}: {e}"))
}

fn load(path: &Path) -> Result<RasterImage> {
    load_image(path).with_context(|| format!("reading {}", path.display()))
}

/// Saves in the format implied by the extension, PNG when there is none.
fn save(img: &RasterImage, path: &Path) -> Result<()> {
    let fmt = if path.extension().is_none() {
        ImageFormat::png()
    } else {
        ImageFormat::from_path(path, 95)?
    };
    if fmt.kind().is_lossy() {
        log::warn!("{} is a lossy format; the hidden marker will not survive it", path.display());
    }
    save_image(img, path, fmt).with_context(|| format!("writing {}", path.display()))
}

fn landmarks_for(explicit: Option<&Path>, image: &Path) -> Result<LandmarkSet> {
    let path = explicit.map_or_else(|| sidecar_path(image), Path::to_path_buf);
    LandmarkSet::load(&path).with_context(|| format!("reading landmarks {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Certify {
            engine,
            cover,
            marker,
            out,
        } => {
            let cover_img = load(&cover)?.to_rgb();
            let mut secret = load(&marker)?;
            if (secret.width(), secret.height()) != (cover_img.width(), cover_img.height()) {
                log::info!("resampling marker to {}x{}", cover_img.width(), cover_img.height());
                secret = resize_bilinear(&secret, cover_img.width(), cover_img.height())?;
            }
            let secret = secret.to_channels(cover_img.channels())?;
            let stego = engine.engine()?.embed(EmbedKey(engine.key), &cover_img, &secret)?;
            let q = metrics::quality(&cover_img, &stego, &Thresholds::default(), &Default::default())?;
            save(&stego, &out)?;
            println!("certified {} (ssim {:.4}, psnr {:.2} dB)", out.display(), q.ssim, q.psnr);
        }
        Command::Manipulate {
            spec,
            input,
            out,
            partner,
            landmarks_a,
            landmarks_b,
            seed,
        } => {
            let m: Manipulation = spec.parse()?;
            let img = load(&input)?;
            let aux = if let Manipulation::Morph { .. } = m {
                let Some(partner) = partner else {
                    bail!("{spec} needs --partner");
                };
                Some(MorphAux {
                    partner: load(&partner)?.to_channels(img.channels())?,
                    landmarks_a: landmarks_for(landmarks_a.as_deref(), &input)?,
                    landmarks_b: landmarks_for(landmarks_b.as_deref(), &partner)?,
                })
            } else {
                None
            };
            let result = manipulate::apply(&ManipulationSpec::new(m).with_seed(seed), &img, aux.as_ref())?;
            save(&result, &out)?;
            println!("{} -> {}", m.id(), out.display());
        }
        Command::Reveal { engine, input, out } => {
            let img = load(&input)?;
            let revealed = engine.engine()?.reveal(EmbedKey(engine.key), &img)?;
            save(&revealed, &out)?;
            println!("revealed {}", out.display());
        }
        Command::Verify {
            marker,
            revealed,
            ssim_thresh,
            psnr_thresh,
        } => {
            let revealed = load(&revealed)?;
            let mut reference = load(&marker)?;
            if (reference.width(), reference.height()) != (revealed.width(), revealed.height()) {
                reference = resize_bilinear(&reference, revealed.width(), revealed.height())?;
            }
            let reference = reference.to_channels(revealed.channels())?;
            let thresholds = Thresholds {
                ssim: ssim_thresh,
                psnr: psnr_thresh,
            };
            let q = metrics::verify(&reference, &revealed, &thresholds)?;
            println!("ssim {:.4}  psnr {:.2} dB  mse {:.3}", q.ssim, q.psnr, q.mse);
            if q.flagged {
                println!("FLAGGED: marker degraded, image was likely modified");
                return Ok(ExitCode::from(EXIT_FLAGGED));
            }
            println!("intact");
        }
        Command::RunExperiment { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = experiment::run_to_dir(&cfg, &out)?;
            print!("{}", experiment::summary_text(&outcome.report));
            println!("reports written to {}", out.display());
        }
        Command::GenCorpus { n, out, seed } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            let manifest = experiment::generate_corpus(n, seed, &out)?;
            println!("wrote {n} identities; manifest {}", manifest.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
