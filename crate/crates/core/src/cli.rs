//! Command-line entry point: fitting, seamless training, sampling,
//! metrics, masks, Poisson baselines, and torus rendering.
//!
//! Flag precedence is built-in defaults, then `--config` key=value lines,
//! then explicit flags. Every run echoes its resolved configuration
//! (including the seed) to stderr. Exit codes: 0 success, 2 usage error,
//! 1 runtime error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};

use crate::baseline;
use crate::mrnet::{MrNet, StageConfig};
use crate::pinr::PeriodicInr;
use crate::texio::{self, ColorSpace, Rect};
use crate::torusmap::{self, Camera, RenderOptions, TorusGeom};
use crate::trainer::{self, MaskSpec, TrainConfig, TrainMode};

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
    fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

macro_rules! rt {
    ($e:expr) => {
        $e.map_err(|err| CliError::runtime(err.to_string()))?
    };
}

/// Parse arguments and run one subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors and 0 for --help/--version.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tileinr",
    about = "Periodic sinusoidal texture networks: fit, make seamless, sample, render",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a multiresolution periodic network to an image.
    Fit(FitArgs),
    /// Train for a seamless tile with the gradient-matching loss.
    Seamless(SeamlessArgs),
    /// Sample a model over a domain rectangle into a PNG.
    Sample(SampleArgs),
    /// Print the PSNR between two PNGs.
    Psnr(PsnrArgs),
    /// Emit a training mask as a PNG.
    Mask(MaskArgs),
    /// Classical pixel-space Poisson baselines for tileable textures.
    PoissonBaseline(PoissonArgs),
    /// Ray-trace a torus textured by a model.
    RenderTorus(RenderArgs),
    /// Describe a model file: stages, widths, parameter counts.
    Info(InfoArgs),
}

// ── config file + precedence plumbing ───────────────────────────────

const KNOWN_KEYS: &[&str] = &[
    "stages", "bands", "widths", "hidden", "period", "epochs", "lr", "batch", "seed", "color",
    "mask", "mask-margin", "gamma", "lp", "repeats", "domain", "res", "level", "mode", "init",
    "omega0", "wvalue", "wjac", "tol", "max-iter", "torus-major", "torus-minor", "uv-repeat",
    "eye", "look-at", "fov", "light", "base-res",
];

struct ConfigFile {
    map: BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::runtime(format!("cannot read config {path:?}: {e}")))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::usage(format!(
                        "config line {} is not key=value: {line:?}",
                        lineno + 1
                    )));
                };
                let key = key.trim().to_string();
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    return Err(CliError::usage(format!("unknown config key {key:?}")));
                }
                map.insert(key, value.trim().to_string());
            }
        }
        Ok(ConfigFile { map })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }
}

fn parse_one<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse::<T>()
        .map_err(|_| CliError::usage(format!("cannot parse {key}={raw:?}")))
}

fn resolve<T: FromStr + Clone>(
    flag: &Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    if let Some(raw) = cfg.get(key) {
        return parse_one(key, raw);
    }
    Ok(default)
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, CliError> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_one::<T>(key, s))
        .collect()
}

fn resolve_list<T: FromStr>(
    flag: &Option<String>,
    cfg: &ConfigFile,
    key: &str,
    default: &str,
) -> Result<Vec<T>, CliError> {
    let raw = flag
        .as_deref()
        .or_else(|| cfg.get(key))
        .unwrap_or(default);
    parse_list(key, raw)
}

fn parse_color(raw: &str) -> Result<ColorSpace, CliError> {
    match raw {
        "ycbcr" => Ok(ColorSpace::Ycbcr),
        "rgb" => Ok(ColorSpace::Rgb),
        other => Err(CliError::usage(format!(
            "color must be ycbcr or rgb, got {other:?}"
        ))),
    }
}

fn echo(pairs: &[(&str, String)]) {
    let joined: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("config: {}", joined.join(" "));
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Seamless(a) => cmd_seamless(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Psnr(a) => cmd_psnr(a),
        Command::Mask(a) => cmd_mask(a),
        Command::PoissonBaseline(a) => cmd_poisson(a),
        Command::RenderTorus(a) => cmd_render(a),
        Command::Info(a) => cmd_info(a),
    }
}

// ── shared architecture/training argument block ─────────────────────

#[derive(clap::Args)]
struct ArchArgs {
    /// Stage count.
    #[arg(long)]
    stages: Option<usize>,
    /// Per-stage band limits, flattened pairs: "4,4,16,16,64,64".
    #[arg(long)]
    bands: Option<String>,
    /// Per-stage first-layer widths (frequency counts): "40,160,512".
    #[arg(long)]
    widths: Option<String>,
    /// Hidden widths: one per stage (periodic) or the hidden stack (siren).
    #[arg(long)]
    hidden: Option<String>,
    /// Spatial period "p1,p2"; defaults to the domain extent.
    #[arg(long)]
    period: Option<String>,
    /// First-layer construction: periodic integer frequencies or SIREN.
    #[arg(long)]
    init: Option<String>,
    /// SIREN frequency scale.
    #[arg(long)]
    omega0: Option<f64>,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Pixels per optimizer batch.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training color space: ycbcr or rgb.
    #[arg(long)]
    color: Option<String>,
}

struct ResolvedArch {
    configs: Vec<StageConfig>,
    period: [f64; 2],
    init: String,
    omega0: f64,
    hidden: Vec<usize>,
    widths: Vec<usize>,
}

fn resolve_arch(
    arch: &ArchArgs,
    cfg: &ConfigFile,
    domain: &Rect,
) -> Result<ResolvedArch, CliError> {
    let stages = resolve(&arch.stages, cfg, "stages", 3usize)?;
    let bands: Vec<u32> = resolve_list(&arch.bands, cfg, "bands", "4,4,16,16,64,64")?;
    let widths: Vec<usize> = resolve_list(&arch.widths, cfg, "widths", "40,160,512")?;
    if bands.len() != 2 * stages {
        return Err(CliError::usage(format!(
            "--bands needs {} integers for {stages} stages, got {}",
            2 * stages,
            bands.len()
        )));
    }
    if widths.len() != stages {
        return Err(CliError::usage(format!(
            "--widths needs {stages} entries, got {}",
            widths.len()
        )));
    }
    let default_hidden: Vec<usize> = widths
        .iter()
        .map(|w| (w / 2).clamp(16, 256))
        .collect();
    let default_hidden_str = default_hidden
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let hidden: Vec<usize> = resolve_list(&arch.hidden, cfg, "hidden", &default_hidden_str)?;

    let init = resolve(&arch.init, cfg, "init", "periodic".to_string())?;
    let omega0 = resolve(&arch.omega0, cfg, "omega0", 30.0)?;
    if init != "periodic" && init != "siren" {
        return Err(CliError::usage(format!(
            "--init must be periodic or siren, got {init:?}"
        )));
    }
    if init == "periodic" && hidden.len() != stages {
        return Err(CliError::usage(format!(
            "--hidden needs {stages} entries for periodic init, got {}",
            hidden.len()
        )));
    }

    let period_default = format!("{},{}", domain.width(), domain.height());
    let period_vals: Vec<f64> = resolve_list(&arch.period, cfg, "period", &period_default)?;
    if period_vals.len() != 2 {
        return Err(CliError::usage("--period needs two values".to_string()));
    }

    let configs = (0..stages)
        .map(|i| StageConfig {
            band: (bands[2 * i], bands[2 * i + 1]),
            freq_count: widths[i],
            hidden_widths: vec![hidden[i.min(hidden.len() - 1)]],
        })
        .collect();
    Ok(ResolvedArch {
        configs,
        period: [period_vals[0], period_vals[1]],
        init,
        omega0,
        hidden,
        widths,
    })
}

fn resolve_domain(flag: &Option<String>, cfg: &ConfigFile) -> Result<Rect, CliError> {
    let vals: Vec<f64> = resolve_list(flag, cfg, "domain", "-1,-1,1,1")?;
    if vals.len() != 4 {
        return Err(CliError::usage("--domain needs x0 y0 x1 y1".to_string()));
    }
    if vals[2] <= vals[0] || vals[3] <= vals[1] {
        return Err(CliError::usage("--domain must have x1 > x0 and y1 > y0".to_string()));
    }
    Ok(Rect::new(vals[0], vals[1], vals[2], vals[3]))
}

// ── fit ─────────────────────────────────────────────────────────────

#[derive(clap::Args)]
struct FitArgs {
    /// Input PNG.
    #[arg(long)]
    image: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Write the per-epoch training report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Domain rectangle "x0,y0,x1,y1" the image spans.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Drop mask: none or periodic.
    #[arg(long)]
    mask: Option<String>,
    /// Pattern repeats "r1,r2" for the periodic drop mask.
    #[arg(long)]
    repeats: Option<String>,
    #[command(flatten)]
    arch: ArchArgs,
    #[command(flatten)]
    train: TrainArgs,
}

fn resolve_train(
    train: &TrainArgs,
    cfg: &ConfigFile,
    mode: TrainMode,
) -> Result<TrainConfig, CliError> {
    Ok(TrainConfig {
        mode,
        epochs: resolve(&train.epochs, cfg, "epochs", 200)?,
        stage_epochs: None,
        batch_pixels: resolve(&train.batch, cfg, "batch", 65536)?,
        learning_rate: resolve(&train.lr, cfg, "lr", 1e-4)?,
        seed: resolve(&train.seed, cfg, "seed", 0)?,
        color_space: parse_color(&resolve(&train.color, cfg, "color", "ycbcr".to_string())?)?,
        mask: MaskSpec::None,
        drop_mask: None,
        value_weight: 1.0,
        jacobian_weight: 1.0,
    })
}

fn build_net(arch: &ResolvedArch, channels: usize, seed: u64) -> Result<MrNet, CliError> {
    if arch.init == "siren" {
        let stage = PeriodicInr::init_siren(
            arch.widths[0],
            arch.omega0,
            arch.period,
            &arch.hidden,
            channels,
            seed,
        )
        .map_err(|e| CliError::runtime(e.to_string()))?;
        Ok(MrNet::from_single(stage))
    } else {
        MrNet::init(&arch.configs, arch.period, channels, seed)
            .map_err(|e| CliError::runtime(e.to_string()))
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let domain = resolve_domain(&a.domain, &cfg)?;
    let arch = resolve_arch(&a.arch, &cfg, &domain)?;
    let mut tc = resolve_train(&a.train, &cfg, TrainMode::Fit)?;
    let mask_kind = resolve(&a.mask, &cfg, "mask", "none".to_string())?;
    let repeats: Vec<usize> = resolve_list(&a.repeats, &cfg, "repeats", "2,2")?;
    tc.mask = match mask_kind.as_str() {
        "none" => MaskSpec::None,
        "periodic" => {
            if repeats.len() != 2 {
                return Err(CliError::usage("--repeats needs two values".to_string()));
            }
            MaskSpec::PeriodicClass {
                repeats: (repeats[0], repeats[1]),
            }
        }
        other => {
            return Err(CliError::usage(format!(
                "fit mask must be none or periodic, got {other:?}"
            )))
        }
    };

    echo(&[
        ("image", format!("{:?}", a.image)),
        ("out", format!("{:?}", a.out)),
        ("domain", format!("{:?}", domain)),
        ("period", format!("{:?}", arch.period)),
        ("init", arch.init.clone()),
        ("stages", arch.configs.len().to_string()),
        ("widths", format!("{:?}", arch.widths)),
        ("hidden", format!("{:?}", arch.hidden)),
        ("epochs", tc.epochs.to_string()),
        ("lr", tc.learning_rate.to_string()),
        ("batch", tc.batch_pixels.to_string()),
        ("mask", mask_kind.clone()),
        ("seed", tc.seed.to_string()),
    ]);

    let mut img = rt!(texio::load_png(&a.image));
    img.domain = domain;
    let mut net = build_net(&arch, img.channels, tc.seed)?;
    let report = rt!(trainer::train(&mut net, &img, &tc));
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    rt!(net.save(&a.out));
    if let Some(path) = &a.report {
        rt!(report.write_csv(path));
    }
    println!(
        "fit: {} epochs, final psnr {:.2} dB, {:.1}s",
        report.records.len(),
        report.final_psnr,
        report.wall_seconds
    );
    Ok(())
}

// ── seamless ────────────────────────────────────────────────────────

#[derive(clap::Args)]
struct SeamlessArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fine-tune this model instead of training from scratch.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Weight mask: soft, binary, or none.
    #[arg(long)]
    mask: Option<String>,
    /// Border width for the binary mask.
    #[arg(long)]
    mask_margin: Option<usize>,
    /// Soft mask exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Soft mask norm order.
    #[arg(long)]
    lp: Option<f64>,
    /// Multiplier on the value term.
    #[arg(long)]
    wvalue: Option<f64>,
    /// Multiplier on the Jacobian term.
    #[arg(long)]
    wjac: Option<f64>,
    #[command(flatten)]
    arch: ArchArgs,
    #[command(flatten)]
    train: TrainArgs,
}

fn cmd_seamless(a: SeamlessArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let domain = resolve_domain(&a.domain, &cfg)?;
    let arch = resolve_arch(&a.arch, &cfg, &domain)?;
    let mut tc = resolve_train(&a.train, &cfg, TrainMode::Seamless)?;
    tc.value_weight = resolve(&a.wvalue, &cfg, "wvalue", 1.0)?;
    tc.jacobian_weight = resolve(&a.wjac, &cfg, "wjac", 1.0)?;
    let mask_kind = resolve(&a.mask, &cfg, "mask", "soft".to_string())?;
    tc.mask = match mask_kind.as_str() {
        "soft" => MaskSpec::Soft {
            gamma: resolve(&a.gamma, &cfg, "gamma", 2.0)?,
            p: resolve(&a.lp, &cfg, "lp", 2.0)?,
        },
        "binary" => MaskSpec::Binary {
            margin: resolve(&a.mask_margin, &cfg, "mask-margin", 8)?,
        },
        "none" => MaskSpec::None,
        other => {
            return Err(CliError::usage(format!(
                "seamless mask must be soft, binary, or none, got {other:?}"
            )))
        }
    };

    echo(&[
        ("image", format!("{:?}", a.image)),
        ("out", format!("{:?}", a.out)),
        ("model", format!("{:?}", a.model)),
        ("domain", format!("{:?}", domain)),
        ("mask", mask_kind.clone()),
        ("epochs", tc.epochs.to_string()),
        ("lr", tc.learning_rate.to_string()),
        ("batch", tc.batch_pixels.to_string()),
        ("wvalue", tc.value_weight.to_string()),
        ("wjac", tc.jacobian_weight.to_string()),
        ("seed", tc.seed.to_string()),
    ]);

    let mut img = rt!(texio::load_png(&a.image));
    img.domain = domain;
    let mut net = match &a.model {
        Some(path) => rt!(MrNet::load(path)),
        None => build_net(&arch, img.channels, tc.seed)?,
    };
    let report = rt!(trainer::train(&mut net, &img, &tc));
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    rt!(net.save(&a.out));
    if let Some(path) = &a.report {
        rt!(report.write_csv(path));
    }
    println!(
        "seamless: {} epochs, final psnr {:.2} dB, {:.1}s",
        report.records.len(),
        report.final_psnr,
        report.wall_seconds
    );
    Ok(())
}

// ── sample ──────────────────────────────────────────────────────────

#[derive(clap::Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Output resolution (square).
    #[arg(long)]
    res: Option<usize>,
    /// Detail level t; defaults to the stage count (finest).
    #[arg(long, allow_hyphen_values = true)]
    level: Option<f64>,
    /// Color space the model was trained in.
    #[arg(long)]
    color: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_sample(a: SampleArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let domain = resolve_domain(&a.domain, &cfg)?;
    let res = resolve(&a.res, &cfg, "res", 256usize)?;
    let color = parse_color(&resolve(&a.color, &cfg, "color", "ycbcr".to_string())?)?;
    let seed = resolve(&a.seed, &cfg, "seed", 0u64)?;
    let net = rt!(MrNet::load(&a.model));
    let level = match a.level {
        Some(l) => l,
        None => match cfg.get("level") {
            Some(raw) => parse_one("level", raw)?,
            None => net.stage_count() as f64,
        },
    };
    echo(&[
        ("model", format!("{:?}", a.model)),
        ("out", format!("{:?}", a.out)),
        ("domain", format!("{:?}", domain)),
        ("res", res.to_string()),
        ("level", level.to_string()),
        ("color", format!("{color:?}")),
        ("seed", seed.to_string()),
    ]);
    let img = texio::sample_grid(&net, domain, res, res, level, color);
    rt!(texio::save_png(&img, &a.out));
    println!("sample: wrote {:?} at {res}x{res}, level {level}", a.out);
    Ok(())
}

// ── psnr ────────────────────────────────────────────────────────────

#[derive(clap::Args)]
struct PsnrArgs {
    a: PathBuf,
    b: PathBuf,
}

fn cmd_psnr(args: PsnrArgs) -> Result<(), CliError> {
    echo(&[
        ("a", format!("{:?}", args.a)),
        ("b", format!("{:?}", args.b)),
    ]);
    let a = rt!(texio::load_png(&args.a));
    let b = rt!(texio::load_png(&args.b));
    let value = rt!(texio::psnr(&a, &b));
    if value.is_infinite() {
        println!("inf");
    } else {
        println!("{value:.4}");
    }
    Ok(())
}

// ── mask ────────────────────────────────────────────────────────────

#[derive(clap::Args)]
struct MaskArgs {
    /// Mask kind: binary, soft, or periodic.
    #[arg(long)]
    mask: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    res: Option<usize>,
    #[arg(long)]
    mask_margin: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lp: Option<f64>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_mask(a: MaskArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let res = resolve(&a.res, &cfg, "res", 256usize)?;
    let kind = resolve(&a.mask, &cfg, "mask", "soft".to_string())?;
    let seed = resolve(&a.seed, &cfg, "seed", 0u64)?;
    let field = match kind.as_str() {
        "soft" => rt!(trainer::soft_mask(
            res,
            res,
            resolve(&a.gamma, &cfg, "gamma", 2.0)?,
            resolve(&a.lp, &cfg, "lp", 2.0)?,
        )),
        "binary" => rt!(trainer::binary_border_mask(
            res,
            res,
            resolve(&a.mask_margin, &cfg, "mask-margin", res / 8)?,
        )),
        "periodic" => {
            let repeats: Vec<usize> = resolve_list(&a.repeats, &cfg, "repeats", "2,2")?;
            if repeats.len() != 2 {
                return Err(CliError::usage("--repeats needs two values".to_string()));
            }
            rt!(trainer::periodic_class_mask(
                res,
                res,
                (repeats[0], repeats[1]),
                seed,
            ))
        }
        other => {
            return Err(CliError::usage(format!(
                "mask must be binary, soft, or periodic, got {other:?}"
            )))
        }
    };
    echo(&[
        ("mask", kind),
        ("res", res.to_string()),
        ("out", format!("{:?}", a.out)),
        ("seed", seed.to_string()),
    ]);
    rt!(texio::save_png(&field.to_image(), &a.out));
    println!("mask: wrote {:?}", a.out);
    Ok(())
}

// ── poisson baseline ────────────────────────────────────────────────

#[derive(clap::Args)]
struct PoissonArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// torus or average-border.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

fn cmd_poisson(a: PoissonArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let mode = resolve(&a.mode, &cfg, "mode", "torus".to_string())?;
    let tol = resolve(&a.tol, &cfg, "tol", 1e-8)?;
    let max_iter = resolve(&a.max_iter, &cfg, "max-iter", 20000usize)?;
    echo(&[
        ("image", format!("{:?}", a.image)),
        ("out", format!("{:?}", a.out)),
        ("mode", mode.clone()),
        ("tol", tol.to_string()),
        ("max-iter", max_iter.to_string()),
    ]);
    let img = rt!(texio::load_png(&a.image));
    let mut solved = match mode.as_str() {
        "torus" => {
            let guidance = baseline::seam_muted_gradient(&img);
            let means: Vec<f64> = (0..img.channels)
                .map(|c| {
                    let mut acc = 0.0;
                    for i in 0..img.h {
                        for j in 0..img.w {
                            acc += img.get(i, j, c);
                        }
                    }
                    acc / (img.h * img.w) as f64
                })
                .collect();
            rt!(baseline::solve_torus(&guidance, &means, tol, max_iter))
        }
        "average-border" => rt!(baseline::solve_average_border(&img, tol, max_iter)),
        other => {
            return Err(CliError::usage(format!(
                "mode must be torus or average-border, got {other:?}"
            )))
        }
    };
    solved.clamp01_in_place();
    rt!(texio::save_png(&solved, &a.out));
    println!("poisson-baseline: wrote {:?} ({mode})", a.out);
    Ok(())
}

// ── render-torus ────────────────────────────────────────────────────

#[derive(clap::Args)]
struct RenderArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    color: Option<String>,
    /// Major radius of the torus.
    #[arg(long)]
    torus_major: Option<f64>,
    /// Minor (tube) radius.
    #[arg(long)]
    torus_minor: Option<f64>,
    /// Texture repeats along u and v: "1,1".
    #[arg(long)]
    uv_repeat: Option<String>,
    /// Camera position "x,y,z".
    #[arg(long, allow_hyphen_values = true)]
    eye: Option<String>,
    /// Camera target "x,y,z".
    #[arg(long, allow_hyphen_values = true)]
    look_at: Option<String>,
    /// Vertical field of view in degrees.
    #[arg(long)]
    fov: Option<f64>,
    /// Output resolution "w,h".
    #[arg(long)]
    res: Option<String>,
    /// Directional light "x,y,z".
    #[arg(long, allow_hyphen_values = true)]
    light: Option<String>,
    /// Texture resolution the LOD footprint rule compares against.
    #[arg(long)]
    base_res: Option<usize>,
}

fn cmd_render(a: RenderArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let color = parse_color(&resolve(&a.color, &cfg, "color", "ycbcr".to_string())?)?;
    let major = resolve(&a.torus_major, &cfg, "torus-major", 2.0)?;
    let minor = resolve(&a.torus_minor, &cfg, "torus-minor", 1.0)?;
    let uv: Vec<f64> = resolve_list(&a.uv_repeat, &cfg, "uv-repeat", "1,1")?;
    let eye: Vec<f64> = resolve_list(&a.eye, &cfg, "eye", "6,0,3")?;
    let look: Vec<f64> = resolve_list(&a.look_at, &cfg, "look-at", "0,0,0")?;
    let fov_deg = resolve(&a.fov, &cfg, "fov", 40.0)?;
    let res: Vec<usize> = resolve_list(&a.res, &cfg, "res", "512,384")?;
    let light: Vec<f64> = resolve_list(&a.light, &cfg, "light", "0.4,-0.6,0.8")?;
    let base_res = resolve(&a.base_res, &cfg, "base-res", 256usize)?;
    for (name, v, want) in [
        ("uv-repeat", uv.len(), 2),
        ("eye", eye.len(), 3),
        ("look-at", look.len(), 3),
        ("res", res.len(), 2),
        ("light", light.len(), 3),
    ] {
        if v != want {
            return Err(CliError::usage(format!("--{name} needs {want} values")));
        }
    }
    echo(&[
        ("model", format!("{:?}", a.model)),
        ("out", format!("{:?}", a.out)),
        ("torus", format!("{major}/{minor}")),
        ("uv-repeat", format!("{uv:?}")),
        ("eye", format!("{eye:?}")),
        ("look-at", format!("{look:?}")),
        ("fov", fov_deg.to_string()),
        ("res", format!("{res:?}")),
        ("light", format!("{light:?}")),
        ("base-res", base_res.to_string()),
        ("color", format!("{color:?}")),
    ]);

    let net = rt!(MrNet::load(&a.model));
    let geom = rt!(TorusGeom::new(major, minor, [uv[0], uv[1]]));
    let camera = Camera {
        eye: [eye[0], eye[1], eye[2]],
        look_at: [look[0], look[1], look[2]],
        fov_y: fov_deg.to_radians(),
        width: res[0],
        height: res[1],
    };
    let opts = RenderOptions {
        light_dir: [light[0], light[1], light[2]],
        texture_base_res: base_res,
        ambient: 0.15,
    };
    let img = rt!(torusmap::rasterize_torus(&net, color, &geom, &camera, &opts));
    rt!(texio::save_png(&img, &a.out));
    println!("render-torus: wrote {:?} at {}x{}", a.out, res[0], res[1]);
    Ok(())
}

// ── info ────────────────────────────────────────────────────────────

#[derive(clap::Args)]
struct InfoArgs {
    #[arg(long)]
    model: PathBuf,
}

fn cmd_info(a: InfoArgs) -> Result<(), CliError> {
    echo(&[("model", format!("{:?}", a.model))]);
    let net = rt!(MrNet::load(&a.model));
    println!(
        "model: {} stage(s), {} channel(s), period {:?}, periodic: {}",
        net.stage_count(),
        net.channels(),
        net.period(),
        net.is_periodic()
    );
    println!("stage  width  band           hidden        trainable  frozen");
    for (i, stage) in net.stages().iter().enumerate() {
        let count = stage.param_count();
        let band = match stage.frequency_set() {
            Some(f) => {
                let b1 = f.multipliers().iter().map(|k| k[0].abs()).max().unwrap_or(0);
                let b2 = f.multipliers().iter().map(|k| k[1].abs()).max().unwrap_or(0);
                format!("[0,{b1}]x[-{b2},{b2}]")
            }
            None => "continuous".to_string(),
        };
        println!(
            "{:<6} {:<6} {:<14} {:<13} {:<10} {}",
            i,
            stage.freq_count(),
            band,
            format!("{:?}", stage.hidden_widths()),
            count.trainable,
            count.frozen
        );
    }
    let total = net.param_count();
    println!(
        "total: {} trainable + {} frozen = {}",
        total.trainable,
        total.frozen,
        total.trainable + total.frozen
    );
    Ok(())
}
