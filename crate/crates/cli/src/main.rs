//! `framereg` command-line interface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use framereg::experiments::{
    self, add_noise, noise_rng, rel_l2, shepp_logan, ssim, Method, Phantom, RateStudyConfig, RuleSpec,
    SvdDecomposition, SweepConfig, TableConfig,
};
use framereg::frames::Decomposition;
use framereg::hilbert::LinearMap;
use framereg::radon::{RadonOperator, TomoGeometry};
use framereg::radon_frames::{AlphaUnits, DualConfig, ExpConfig, FrameConfig, RadonFrameDecomposition, WaveletConfig};
use framereg::regfilter::{regularize, AlphaGrid, Filter, ParameterRule};
use framereg::{io, runtime, Error};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Domain(_) | Error::Json { .. } | Error::Io { .. } => 1,
                Error::Numeric(_) | Error::Dimension(_) | Error::Contract(_) => 2,
                Error::MissingArtifact(_) | Error::ArtifactNotBuilt { .. } | Error::Format { .. } => 3,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Frame decompositions and regularization for tomographic reconstruction.
///
/// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
/// 3 missing or malformed artifact. `FRAMEREG_THREADS` sets the worker count
/// (default 1).
#[derive(Parser, Debug)]
#[command(name = "framereg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Radon matrix assembly.
    #[command(subcommand)]
    Radon(RadonCmd),
    /// Frame decompositions of the Radon transform.
    #[command(subcommand)]
    Frame(FrameCmd),
    /// Singular value decomposition of the Radon matrix.
    #[command(subcommand)]
    Svd(SvdCmd),
    /// Reconstructs the Shepp-Logan phantom from noisy data.
    Reconstruct(ReconstructArgs),
    /// Comparison table, parameter sweep and convergence rates.
    #[command(subcommand)]
    Study(StudyCmd),
}

#[derive(Subcommand, Debug)]
enum RadonCmd {
    /// Assembles the Radon matrix and writes it to DIR.
    Assemble {
        /// Pixels per side.
        #[arg(long, default_value_t = 60)]
        n: usize,
        /// Detector offsets.
        #[arg(long, default_value_t = 60)]
        p: usize,
        /// Angles in [0, pi).
        #[arg(long, default_value_t = 180)]
        ntheta: usize,
        #[arg(long)]
        out: PathBuf,
        /// Rebuild even if the manifest matches.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Wavelet,
    Exp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DualMethodArg {
    Recursive,
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum UnitsArg {
    Plain,
    Quadrature,
}

#[derive(Subcommand, Debug)]
enum FrameCmd {
    /// Builds the data frame, the solution frame operator and its bounds.
    Build {
        #[arg(long, value_enum)]
        kind: Kind,
        /// JSON frame configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory written by `radon assemble`.
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Computes and stores the dual of the solution frame.
    Duals {
        #[arg(long, value_enum)]
        method: DualMethodArg,
        /// Tikhonov parameter (explicit) or relaxation sum R (recursive).
        /// For the recursive method the default is B1 + B2.
        #[arg(long)]
        param: Option<f64>,
        /// Iterations of the recursive method.
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        /// Unit of the explicit parameter.
        #[arg(long, value_enum, default_value_t = UnitsArg::Plain)]
        units: UnitsArg,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Subcommand, Debug)]
enum SvdCmd {
    /// Computes the singular system of the operator in DIR.
    Compute {
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of singular triples kept (default: all nonzero).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FilterArg {
    None,
    Tikhonov,
    Landweber,
    Tsvd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum RuleArg {
    Fixed,
    Apriori,
    Aposteriori,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PhantomArg {
    SheppLogan,
    Modified,
}

#[derive(clap::Args, Debug, Serialize)]
struct ReconstructArgs {
    /// Frame directory (`frame build` + `frame duals`) or `svd compute` output.
    #[arg(long)]
    frame: PathBuf,
    /// Operator directory; defaults to the one recorded when the frame was built.
    #[arg(long)]
    operator: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FilterArg::None)]
    filter: FilterArg,
    #[arg(long, value_enum, default_value_t = RuleArg::Aposteriori)]
    rule: RuleArg,
    /// Relative noise level.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Parameter of the fixed rule.
    #[arg(long)]
    alpha: Option<f64>,
    /// Constant of the a-priori rule.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Smoothness index of the a-priori rule.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Safety factor of the discrepancy principle (default 1.5 sqrt(C2) gamma).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = PhantomArg::SheppLogan)]
    phantom: PhantomArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum StudyCmd {
    /// Every method under every filter, rule and noise level.
    Table {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Error and SSIM along a grid of regularization parameters.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Convergence rates on synthetic diagonal problems.
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

/// Record of how the contents of a directory were produced.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct Manifest {
    command: String,
    config_hash: String,
    inputs: BTreeMap<String, PathBuf>,
    seed: Option<u64>,
    tool_version: String,
    /// Hashes of follow-up stages run in the same directory (e.g. duals).
    #[serde(default)]
    stages: BTreeMap<String, String>,
    /// Wall-clock seconds per stage.
    #[serde(default)]
    timings: BTreeMap<String, f64>,
}

const MANIFEST: &str = "manifest.json";

fn hash_of<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("serializable");
    hex::encode(Sha256::digest(&bytes))
}

fn read_manifest(dir: &Path) -> Option<Manifest> {
    io::read_json(&dir.join(MANIFEST)).ok()
}

fn write_manifest(dir: &Path, m: &Manifest) -> CliResult<()> {
    Ok(io::write_json(&dir.join(MANIFEST), m)?)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Returns true (and says so) when `dir` already holds the result for `hash`.
fn up_to_date(dir: &Path, hash: &str, force: bool) -> bool {
    if force {
        return false;
    }
    match read_manifest(dir) {
        Some(m) if m.config_hash == hash => {
            println!("{} is up to date (config hash {})", dir.display(), &hash[..12]);
            true
        }
        _ => false,
    }
}

fn manifest(command: &str, hash: String) -> Manifest {
    Manifest {
        command: command.into(),
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        ..Default::default()
    }
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    Ok(io::read_json(path)?)
}

fn input_hash(dir: &Path) -> String {
    read_manifest(dir).map(|m| m.config_hash).unwrap_or_default()
}

fn radon_assemble(n: usize, p: usize, ntheta: usize, out: &Path, force: bool) -> CliResult<()> {
    let geom = TomoGeometry::new(n, p, ntheta)?;
    let hash = hash_of(&("radon assemble", geom));
    if up_to_date(out, &hash, force) {
        return Ok(());
    }
    create_dir(out)?;
    let t = Instant::now();
    let op = RadonOperator::assemble(geom)?;
    op.save(out)?;
    let mut m = manifest("radon assemble", hash);
    m.timings.insert("assemble".into(), t.elapsed().as_secs_f64());
    write_manifest(out, &m)?;
    println!(
        "radon matrix {} x {} with {} nonzeros written to {}",
        op.rows(),
        n * n,
        op.nnz(),
        out.display()
    );
    Ok(())
}

fn frame_config(kind: Kind, path: Option<&Path>) -> CliResult<FrameConfig> {
    Ok(match (kind, path) {
        (Kind::Wavelet, None) => FrameConfig::Wavelet(WaveletConfig::default()),
        (Kind::Exp, None) => FrameConfig::Exponential(ExpConfig::default()),
        (Kind::Wavelet, Some(p)) => FrameConfig::Wavelet(load_config(p)?),
        (Kind::Exp, Some(p)) => FrameConfig::Exponential(load_config(p)?),
    })
}

fn frame_build(kind: Kind, config: Option<&Path>, operator: &Path, out: &Path, force: bool) -> CliResult<()> {
    let cfg = frame_config(kind, config)?;
    let hash = hash_of(&("frame build", &cfg, input_hash(operator)));
    if up_to_date(out, &hash, force) {
        return Ok(());
    }
    let t = Instant::now();
    let op = Arc::new(RadonOperator::load(operator)?);
    let fd = RadonFrameDecomposition::build(op, cfg)?;
    let built = t.elapsed().as_secs_f64();
    let idx = fd.sample_indices(64);
    let link = fd.link_residuals(&idx)?.into_iter().fold(0.0, f64::max);
    create_dir(out)?;
    fd.save(out)?;
    let mut m = manifest("frame build", hash);
    m.inputs.insert("operator".into(), absolute(operator));
    m.timings.insert("build".into(), built);
    write_manifest(out, &m)?;
    let b = fd.bounds();
    println!("{} frame functions", fd.len());
    println!("frame bounds B1 = {:.6e}, B2 = {:.6e}", b.lower, b.upper);
    println!("max link residual over {} sampled elements: {:.3e}", idx.len(), link);
    Ok(())
}

fn operator_of(frame_dir: &Path, explicit: Option<&Path>) -> CliResult<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    read_manifest(frame_dir)
        .and_then(|m| m.inputs.get("operator").cloned())
        .ok_or_else(|| {
            Error::ArtifactNotBuilt {
                path: frame_dir.join(MANIFEST),
                hint: "framereg frame build --operator DIR ... (or pass --operator)".into(),
            }
            .into()
        })
}

#[allow(clippy::too_many_arguments)]
fn frame_duals(
    method: DualMethodArg,
    param: Option<f64>,
    iterations: usize,
    units: UnitsArg,
    frame: &Path,
    force: bool,
) -> CliResult<()> {
    let cfg = match method {
        DualMethodArg::Explicit => DualConfig::Explicit {
            alpha: param.ok_or_else(|| CliError::Usage("explicit duals need --param ALPHA".into()))?,
            units: match units {
                UnitsArg::Plain => AlphaUnits::Plain,
                UnitsArg::Quadrature => AlphaUnits::Quadrature,
            },
        },
        DualMethodArg::Recursive => DualConfig::Recursive {
            relaxation_sum: param,
            iterations,
        },
    };
    let mut m = read_manifest(frame).ok_or_else(|| Error::ArtifactNotBuilt {
        path: frame.join(MANIFEST),
        hint: format!("framereg frame build --out {}", frame.display()),
    })?;
    let hash = hash_of(&("frame duals", &cfg, &m.config_hash));
    if !force && m.stages.get("duals") == Some(&hash) {
        println!("{} duals are up to date (hash {})", frame.display(), &hash[..12]);
        return Ok(());
    }
    let op = Arc::new(RadonOperator::load(&operator_of(frame, None)?)?);
    let mut fd = RadonFrameDecomposition::load(frame, op)?;
    let t = Instant::now();
    let tol = fd.compute_dual(&cfg)?.tol_dual();
    let residual = framereg::frames::measured_dual_error(
        fd.frame_operator().as_ref(),
        fd.dual().expect("dual just computed").map(),
    );
    let secs = t.elapsed().as_secs_f64();
    fd.save(frame)?;
    m.stages.insert("duals".into(), hash);
    m.timings.insert("duals".into(), secs);
    write_manifest(frame, &m)?;
    println!("dual frame stored in {} ({secs:.1} s)", frame.display());
    println!("tol_dual = {tol:.3e}");
    println!("measured reconstruction residual max ||x - G S x|| / ||x|| = {residual:.3e}");
    Ok(())
}

fn svd_compute(operator: &Path, out: &Path, count: Option<usize>, force: bool) -> CliResult<()> {
    let hash = hash_of(&("svd compute", count, input_hash(operator)));
    if up_to_date(out, &hash, force) {
        return Ok(());
    }
    let t = Instant::now();
    let op = RadonOperator::load(operator)?;
    let dense = op.to_dense();
    let k = count.unwrap_or(usize::MAX);
    let svd = SvdDecomposition::compute(&dense, k)?;
    create_dir(out)?;
    svd.save(out)?;
    let mut m = manifest("svd compute", hash);
    m.inputs.insert("operator".into(), absolute(operator));
    m.timings.insert("svd".into(), t.elapsed().as_secs_f64());
    write_manifest(out, &m)?;
    let s = &svd.system().sigmas;
    println!(
        "{} singular values in [{:.4e}, {:.4e}] written to {}",
        s.len(),
        s.last().copied().unwrap_or(0.0),
        s.first().copied().unwrap_or(0.0),
        out.display()
    );
    Ok(())
}

fn is_svd_dir(dir: &Path) -> bool {
    dir.join("sigmas.frv").exists()
}

#[derive(Serialize)]
struct ReconstructionReport {
    method: &'static str,
    filter: &'static str,
    rule: &'static str,
    noise_rel: f64,
    delta: f64,
    alpha: Option<String>,
    rel_l2: f64,
    ssim: f64,
    warning: Option<String>,
    image_min: f64,
    image_max: f64,
    seed: u64,
}

fn reconstruct(args: &ReconstructArgs) -> CliResult<()> {
    let svd = is_svd_dir(&args.frame);
    let op_dir = operator_of(&args.frame, args.operator.as_deref())?;
    let hash = hash_of(&(
        "reconstruct",
        args,
        input_hash(&args.frame),
        read_manifest(&args.frame).map(|m| m.stages),
    ));
    if up_to_date(&args.out, &hash, args.force) {
        return Ok(());
    }
    let op = Arc::new(RadonOperator::load(&op_dir)?);
    let fd: Box<dyn Decomposition> = if svd {
        Box::new(SvdDecomposition::load(&args.frame)?)
    } else {
        let fd = RadonFrameDecomposition::load(&args.frame, op.clone())?;
        if fd.dual().is_none() {
            return Err(Error::ArtifactNotBuilt {
                path: args.frame.join("dual_map.frm"),
                hint: format!("framereg frame duals --frame {}", args.frame.display()),
            }
            .into());
        }
        Box::new(fd)
    };
    let phantom = match args.phantom {
        PhantomArg::SheppLogan => Phantom::SheppLogan,
        PhantomArg::Modified => Phantom::ModifiedSheppLogan,
    };
    let x = shepp_logan(op.geometry().n, phantom)?;
    let y = op.apply(&x)?;
    let (yd, delta) = add_noise(&y, args.noise, &mut noise_rng(args.seed, 0))?;
    let filter = match args.filter {
        FilterArg::None => None,
        FilterArg::Tikhonov => Some(Filter::Tikhonov),
        FilterArg::Landweber => Some(Filter::Landweber),
        FilterArg::Tsvd => Some(Filter::Tsvd),
    };
    let spec = match args.rule {
        RuleArg::Fixed => RuleSpec::Fixed {
            alpha: args
                .alpha
                .ok_or_else(|| CliError::Usage("the fixed rule needs --alpha".into()))?,
        },
        RuleArg::Apriori => RuleSpec::Apriori { c: args.c, mu: args.mu },
        RuleArg::Aposteriori => RuleSpec::Aposteriori {
            tau: args.tau,
            tau_factor: 1.5,
            grid: AlphaGrid::default(),
        },
    };
    let rule = match filter {
        Some(f) => spec.resolve(f, fd.y_upper_bound()),
        None => ParameterRule::Fixed { alpha: 1.0 },
    };
    let t = Instant::now();
    let r = regularize(fd.as_ref(), filter, &rule, &yd, delta)?;
    let secs = t.elapsed().as_secs_f64();
    let n = op.geometry().n;
    create_dir(&args.out)?;
    // Image rows run from top (y = 1) to bottom.
    let vals = r.x.real_values();
    let flipped: Vec<f64> = (0..n * n).map(|i| vals[(n - 1 - i / n) * n + i % n]).collect();
    let (lo, hi) = io::write_pgm(&args.out.join("reconstruction.pgm"), n, n, &flipped)?;
    io::write_vector(&args.out.join("reconstruction.frv"), &vals)?;
    let report = ReconstructionReport {
        method: if svd { "svd" } else { "frame" },
        filter: filter.map_or("none", |f| f.name()),
        rule: if filter.is_some() { spec.name() } else { "none" },
        noise_rel: args.noise,
        delta,
        alpha: r.alpha.map(|a| match a {
            framereg::regfilter::Alpha::Finite(v) => format!("{v:e}"),
            framereg::regfilter::Alpha::Infinite => "inf".into(),
        }),
        rel_l2: rel_l2(&r.x, &x)?,
        ssim: ssim(&r.x, &x)?,
        warning: r.warning.clone(),
        image_min: lo,
        image_max: hi,
        seed: args.seed,
    };
    io::write_json(&args.out.join("reconstruction.json"), &report)?;
    let mut m = manifest("reconstruct", hash);
    m.inputs.insert("frame".into(), absolute(&args.frame));
    m.inputs.insert("operator".into(), absolute(&op_dir));
    m.seed = Some(args.seed);
    m.timings.insert("reconstruct".into(), secs);
    write_manifest(&args.out, &m)?;
    if let Some(w) = &r.warning {
        eprintln!("warning: {w}");
    }
    println!(
        "rel_l2 = {:.4}, ssim = {:.4}, alpha = {}",
        report.rel_l2,
        report.ssim,
        report.alpha.as_deref().unwrap_or("-")
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Hash of a study config together with the manifests of the artifacts it reads.
fn study_hash<T: Serialize>(name: &str, cfg: &T, artifacts: Option<&Path>, methods: &[Method]) -> String {
    let inputs: Vec<String> = match artifacts {
        Some(root) => std::iter::once(experiments::artifact_path(root, None))
            .chain(methods.iter().map(|&m| experiments::artifact_path(root, Some(m))))
            .map(|d| {
                let m = read_manifest(&d);
                hash_of(&(m.as_ref().map(|m| &m.config_hash), m.as_ref().map(|m| &m.stages)))
            })
            .collect(),
        None => Vec::new(),
    };
    hash_of(&(name, cfg, inputs))
}

fn study_table(config: &Path, out: &Path, force: bool) -> CliResult<()> {
    let cfg: TableConfig = load_config(config)?;
    let hash = study_hash("study table", &cfg, Some(&cfg.artifacts), &cfg.methods);
    if up_to_date(out, &hash, force) {
        return Ok(());
    }
    let t = Instant::now();
    let cells = experiments::run_table(&cfg)?;
    create_dir(out)?;
    write_text(&out.join("table.csv"), &experiments::cells_to_csv(&cells))?;
    io::write_json(&out.join("table.json"), &cells)?;
    for c in cells.iter().filter(|c| c.warning.is_some()) {
        eprintln!(
            "warning ({} {:?} {}): {}",
            c.method.name(),
            c.filter,
            c.rule,
            c.warning.as_ref().unwrap()
        );
    }
    let mut m = manifest("study table", hash);
    m.inputs.insert("artifacts".into(), absolute(&cfg.artifacts));
    m.seed = Some(cfg.seed);
    m.timings.insert("table".into(), t.elapsed().as_secs_f64());
    write_manifest(out, &m)?;
    println!("{} rows written to {}", cells.len(), out.join("table.csv").display());
    Ok(())
}

fn study_sweep(config: &Path, out: &Path, force: bool) -> CliResult<()> {
    let cfg: SweepConfig = load_config(config)?;
    let hash = study_hash("study sweep", &cfg, Some(&cfg.artifacts), &[cfg.method]);
    if up_to_date(out, &hash, force) {
        return Ok(());
    }
    let t = Instant::now();
    let r = experiments::alpha_sweep(&cfg)?;
    create_dir(out)?;
    write_text(&out.join("sweep.csv"), &r.to_csv())?;
    io::write_json(&out.join("sweep.json"), &r)?;
    let mut m = manifest("study sweep", hash);
    m.inputs.insert("artifacts".into(), absolute(&cfg.artifacts));
    m.seed = Some(cfg.seed);
    m.timings.insert("sweep".into(), t.elapsed().as_secs_f64());
    write_manifest(out, &m)?;
    println!(
        "min rel_l2 {:.4} at alpha {:.3e}; max ssim {:.4} at alpha {:.3e}",
        r.argmin_rel_l2.rel_l2, r.argmin_rel_l2.alpha, r.argmax_ssim.ssim, r.argmax_ssim.alpha
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesConfig {
    studies: Vec<RateStudyConfig>,
}

fn study_rates(config: &Path, out: &Path, force: bool) -> CliResult<()> {
    let cfg: RatesConfig = load_config(config)?;
    if cfg.studies.is_empty() {
        return Err(Error::Config("rates config lists no studies".into()).into());
    }
    let hash = study_hash("study rates", &cfg, None, &[]);
    if up_to_date(out, &hash, force) {
        return Ok(());
    }
    let t = Instant::now();
    let mut results = Vec::new();
    let mut csv = String::from("study,delta,error,alpha\n");
    // Studies sharing an operator share its decomposition.
    let mut cache: Vec<((usize, u64), framereg::frames::FrameDecomposition)> = Vec::new();
    for (i, s) in cfg.studies.iter().enumerate() {
        let key = (s.truncation, s.decay.to_bits());
        if !cache.iter().any(|(k, _)| *k == key) {
            cache.push((key, experiments::diagonal_decomposition(s.truncation, s.decay)?));
        }
        let fd = &cache.iter().find(|(k, _)| *k == key).unwrap().1;
        let r = experiments::rate_study_on(s, fd)?;
        for line in r.to_csv().lines().skip(1) {
            csv.push_str(&format!("{i},{line}\n"));
        }
        println!(
            "study {i}: mu = {}, {} {:?}: slope {:.3} (theory {:.3})",
            s.mu,
            s.filter.name(),
            s.rule,
            r.slope,
            r.theory
        );
        results.push(r);
    }
    create_dir(out)?;
    write_text(&out.join("rates.csv"), &csv)?;
    io::write_json(&out.join("rates.json"), &results)?;
    let mut m = manifest("study rates", hash);
    m.timings.insert("rates".into(), t.elapsed().as_secs_f64());
    write_manifest(out, &m)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    runtime::configure_threads()?;
    match cli.command {
        Command::Radon(RadonCmd::Assemble {
            n,
            p,
            ntheta,
            out,
            force,
        }) => radon_assemble(n, p, ntheta, &out, force),
        Command::Frame(FrameCmd::Build {
            kind,
            config,
            operator,
            out,
            force,
        }) => frame_build(kind, config.as_deref(), &operator, &out, force),
        Command::Frame(FrameCmd::Duals {
            method,
            param,
            iterations,
            units,
            frame,
            force,
        }) => frame_duals(method, param, iterations, units, &frame, force),
        Command::Svd(SvdCmd::Compute {
            operator,
            out,
            count,
            force,
        }) => svd_compute(&operator, &out, count, force),
        Command::Reconstruct(args) => reconstruct(&args),
        Command::Study(StudyCmd::Table { config, out, force }) => study_table(&config, &out, force),
        Command::Study(StudyCmd::Sweep { config, out, force }) => study_sweep(&config, &out, force),
        Command::Study(StudyCmd::Rates { config, out, force }) => study_rates(&config, &out, force),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
