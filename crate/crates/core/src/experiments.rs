//! Phantoms, noise, image metrics and the numerical studies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use faer::Mat;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{build_decomposition, Decomposition, Field, FrameDecomposition, FrameSystem};
use crate::hilbert::{self, DenseOperator, Geometry, GridFunction, LinearMap, SingularSystem, C64};
use crate::io;
use crate::radon::{RadonOperator, TomoGeometry};
use crate::radon_frames::{AlphaUnits, DualConfig, ExpConfig, FrameConfig, RadonFrameDecomposition, WaveletConfig};
use crate::regfilter::{
    self, apriori_alpha, discrepancy_alpha_from_coeffs, filtered_coefficients, regularized_coefficients, Alpha,
    AlphaGrid, Filter, ParameterRule,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phantom {
    /// Low-contrast intensities (1, -0.98, -0.02, ...).
    #[default]
    SheppLogan,
    /// High-contrast intensities (1, -0.8, -0.2, ...).
    ModifiedSheppLogan,
}

/// `(A, a, b, x0, y0, phi in degrees)` of the ten ellipses.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.02, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.02, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.01, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.01, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.01, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.01, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.01, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.01, 0.023, 0.046, 0.06, -0.605, 0.0],
];

const MODIFIED_INTENSITIES: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];

/// Shepp-Logan phantom sampled at the pixel centres of an `n x n` grid.
pub fn shepp_logan(n: usize, variant: Phantom) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::Config("phantom size must be positive".into()));
    }
    let h = 2.0 / n as f64;
    let mut v = vec![0.0; n * n];
    for (idx, out) in v.iter_mut().enumerate() {
        let x = -1.0 + ((idx % n) as f64 + 0.5) * h;
        let y = -1.0 + ((idx / n) as f64 + 0.5) * h;
        for (e, row) in SHEPP_LOGAN.iter().enumerate() {
            let [a0, a, b, x0, y0, deg] = *row;
            let amp = match variant {
                Phantom::SheppLogan => a0,
                Phantom::ModifiedSheppLogan => MODIFIED_INTENSITIES[e],
            };
            let (s, c) = deg.to_radians().sin_cos();
            let (dx, dy) = (x - x0, y - y0);
            let u = dx * c + dy * s;
            let w = -dx * s + dy * c;
            if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                *out += amp;
            }
        }
    }
    GridFunction::from_real(Geometry::Pixels { n }, &v)
}

/// `y + delta_rel ||y|| g / ||g||` with seeded Gaussian `g`; returns the noisy
/// data and the absolute noise level.
pub fn add_noise(y: &GridFunction, delta_rel: f64, rng: &mut ChaCha8Rng) -> Result<(GridFunction, f64)> {
    if !(delta_rel >= 0.0) || !delta_rel.is_finite() {
        return Err(Error::Config(format!("noise level {delta_rel} must be >= 0")));
    }
    let g: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(rng)).collect();
    let gf = GridFunction::from_real(y.geometry(), &g)?;
    let delta = delta_rel * y.norm();
    if delta == 0.0 {
        return Ok((y.clone(), 0.0));
    }
    let c = delta / gf.norm();
    Ok((y.axpy(C64::new(c, 0.0), &gf)?, delta))
}

/// Noise generator for stream `stream` of `seed`.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `||x - x_ref|| / ||x_ref||`.
pub fn rel_l2(x: &GridFunction, x_ref: &GridFunction) -> Result<f64> {
    let r = x_ref.norm();
    if r == 0.0 {
        return Err(Error::Contract("relative error against a zero reference".into()));
    }
    Ok(x.sub(x_ref)?.norm() / r)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// Mean SSIM over `11 x 11` Gaussian windows (sigma 1.5) fully inside the image,
/// with dynamic range `max(x_ref) - min(x_ref)`. Clamped to `[0, 1]`.
pub fn ssim(x: &GridFunction, x_ref: &GridFunction) -> Result<f64> {
    let Geometry::Pixels { n } = x_ref.geometry() else {
        return Err(Error::Contract("ssim needs pixel images".into()));
    };
    hilbert::check_geometry("ssim", x_ref.geometry(), x.geometry())?;
    if n < SSIM_WINDOW {
        return Err(Error::Contract(format!(
            "ssim needs at least {SSIM_WINDOW} pixels per side"
        )));
    }
    let a = x.real_values();
    let b = x_ref.real_values();
    let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let l = hi - lo;
    if !(l > 0.0) {
        return Err(Error::Contract("ssim reference has no dynamic range".into()));
    }
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let half = SSIM_WINDOW / 2;
    let g1: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half as f64).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g1.iter().sum();
    let g1: Vec<f64> = g1.into_iter().map(|v| v / s).collect();
    let m = n - SSIM_WINDOW + 1;
    let mut total = 0.0;
    for oy in 0..m {
        for ox in 0..m {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for wy in 0..SSIM_WINDOW {
                for wx in 0..SSIM_WINDOW {
                    let w = g1[wx] * g1[wy];
                    let idx = (ox + wx) + n * (oy + wy);
                    let (p, q) = (a[idx], b[idx]);
                    mx += w * p;
                    my += w * q;
                    xx += w * p * p;
                    yy += w * q * q;
                    xy += w * p * q;
                }
            }
            let vx = xx - mx * mx;
            let vy = yy - my * my;
            let cxy = xy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok((total / (m * m) as f64).clamp(0.0, 1.0))
}

/// The singular system viewed as a frame decomposition with orthonormal frames.
#[derive(Clone, Debug)]
pub struct SvdDecomposition {
    system: SingularSystem,
    lambdas: Vec<C64>,
}

impl SvdDecomposition {
    pub fn new(system: SingularSystem) -> Self {
        let lambdas = system.sigmas.iter().map(|&s| C64::new(s, 0.0)).collect();
        Self { system, lambdas }
    }

    pub fn compute(op: &DenseOperator, k: usize) -> Result<Self> {
        Ok(Self::new(hilbert::svd(op, k)?))
    }

    pub fn system(&self) -> &SingularSystem {
        &self.system
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_json(
            &dir.join("meta.json"),
            &SvdMeta {
                domain: self.system.domain,
                range: self.system.range,
                count: self.system.len(),
            },
        )?;
        io::write_vector(&dir.join("sigmas.frv"), &self.system.sigmas)?;
        io::write_matrix(&dir.join("left.frm"), &self.system.left)?;
        io::write_matrix(&dir.join("right.frm"), &self.system.right)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: SvdMeta = io::read_json(&dir.join("meta.json"))?;
        let sigmas = io::read_real_vector(&dir.join("sigmas.frv"))?;
        let left = io::read_matrix(&dir.join("left.frm"))?;
        let right = io::read_matrix(&dir.join("right.frm"))?;
        if sigmas.len() != meta.count
            || left.ncols() != meta.count
            || right.ncols() != meta.count
            || left.nrows() != meta.range.len()
            || right.nrows() != meta.domain.len()
        {
            return Err(Error::Format {
                path: dir.to_path_buf(),
                reason: "singular system files disagree with meta.json".into(),
            });
        }
        Ok(Self::new(SingularSystem {
            sigmas,
            left,
            right,
            domain: meta.domain,
            range: meta.range,
        }))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SvdMeta {
    domain: Geometry,
    range: Geometry,
    count: usize,
}

impl Decomposition for SvdDecomposition {
    fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    fn x_geometry(&self) -> Geometry {
        self.system.domain
    }

    fn y_geometry(&self) -> Geometry {
        self.system.range
    }

    fn analyze_y(&self, y: &GridFunction) -> Result<Vec<C64>> {
        hilbert::check_geometry("data", self.system.range, y.geometry())?;
        let w = self.system.range.cell_weight();
        let (re, im) = (y.real_values(), y.imag_values());
        let u = &self.system.left;
        Ok((0..self.system.len())
            .map(|k| {
                let col = u.col(k);
                let a: f64 = col.iter().zip(&re).map(|(p, q)| p * q).sum();
                let b: f64 = col.iter().zip(&im).map(|(p, q)| p * q).sum();
                C64::new(w * a, w * b)
            })
            .collect())
    }

    fn synthesize_dual_x(&self, d: &[C64]) -> Result<GridFunction> {
        if d.len() != self.system.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} singular vectors",
                d.len(),
                self.system.len()
            )));
        }
        let re: Vec<f64> = d.iter().map(|z| z.re).collect();
        let mut out = vec![0.0; self.system.domain.len()];
        hilbert::matvec(self.system.right.as_ref(), &re, &mut out);
        GridFunction::from_real(self.system.domain, &out)
    }

    fn y_upper_bound(&self) -> Option<f64> {
        Some(1.0)
    }

    fn x_lower_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Filtered SVD reconstruction `sum_k sigma_k g_alpha(sigma_k^2) <y, u_k> v_k`.
pub fn svd_baseline(
    svd: &SvdDecomposition,
    filter: Option<Filter>,
    rule: &ParameterRule,
    y: &GridFunction,
    delta: f64,
) -> Result<regfilter::Regularized> {
    regfilter::regularize(svd, filter, rule, y, delta)
}

/// Reconstruction method of a table row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Svd,
    Wavelet,
    #[serde(alias = "exponential")]
    Exp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Svd => "svd",
            Method::Wavelet => "wavelet",
            Method::Exp => "exp",
        }
    }
}

/// Parameter rule as written in study configs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    /// Unfiltered reconstruction.
    None,
    Fixed {
        alpha: f64,
    },
    Apriori {
        c: f64,
        mu: f64,
    },
    /// Discrepancy principle; `tau` defaults to `tau_factor * sqrt(C2) * gamma`.
    Aposteriori {
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default = "default_tau_factor")]
        tau_factor: f64,
        #[serde(default)]
        grid: AlphaGrid,
    },
}

fn default_tau_factor() -> f64 {
    1.5
}

impl RuleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RuleSpec::None => "none",
            RuleSpec::Fixed { .. } => "fixed",
            RuleSpec::Apriori { .. } => "apriori",
            RuleSpec::Aposteriori { .. } => "aposteriori",
        }
    }

    /// Concrete rule for a decomposition.
    pub fn resolve(&self, filter: Filter, y_upper_bound: Option<f64>) -> ParameterRule {
        match *self {
            RuleSpec::None => ParameterRule::Fixed { alpha: f64::NAN },
            RuleSpec::Fixed { alpha } => ParameterRule::Fixed { alpha },
            RuleSpec::Apriori { c, mu } => ParameterRule::Apriori { c, mu },
            RuleSpec::Aposteriori { tau, tau_factor, grid } => ParameterRule::Discrepancy {
                tau: tau.unwrap_or_else(|| tau_factor * y_upper_bound.unwrap_or(1.0).sqrt() * filter.gamma()),
                grid,
            },
        }
    }
}

/// One column of the comparison table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    /// `None` (JSON `null`) for the unfiltered reconstruction.
    pub filter: Option<Filter>,
    #[serde(flatten)]
    pub rule: RuleSpec,
}

impl ColumnSpec {
    fn validate(&self) -> Result<()> {
        match (self.filter, self.rule) {
            (None, RuleSpec::None)
            | (Some(_), RuleSpec::Fixed { .. })
            | (Some(_), RuleSpec::Apriori { .. })
            | (Some(_), RuleSpec::Aposteriori { .. }) => Ok(()),
            _ => Err(Error::Config(format!(
                "column {self:?}: a filter needs a rule and the rule `none` needs no filter"
            ))),
        }
    }
}

/// Outcome of one reconstruction in a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub method: Method,
    pub filter: Option<Filter>,
    pub rule: &'static str,
    pub noise_rel: f64,
    pub alpha: Option<Alpha>,
    pub rel_l2: f64,
    pub ssim: f64,
    pub runtime_s: f64,
    pub seed: u64,
    pub warning: Option<String>,
}

pub const CSV_HEADER: &str = "method,filter,rule,noise_rel,alpha,rel_l2,ssim,runtime_s,seed";

fn format_alpha(a: Option<Alpha>) -> String {
    match a {
        None => String::new(),
        Some(Alpha::Finite(v)) => format!("{v:e}"),
        Some(Alpha::Infinite) => "inf".into(),
    }
}

/// CSV text with header for a list of cells.
pub fn cells_to_csv(cells: &[Cell]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.method.name(),
            c.filter.map_or("none", |f| f.name()),
            c.rule,
            c.noise_rel,
            format_alpha(c.alpha),
            c.rel_l2,
            c.ssim,
            c.runtime_s,
            c.seed
        );
    }
    s
}

/// Precomputed operator, frame decompositions and singular system.
pub struct Artifacts {
    pub operator: Arc<RadonOperator>,
    pub decompositions: BTreeMap<Method, Box<dyn Decomposition + Send + Sync>>,
}

/// Artifact directories below a root.
pub fn artifact_path(root: &Path, what: Option<Method>) -> PathBuf {
    match what {
        None => root.join("operator"),
        Some(Method::Svd) => root.join("svd"),
        Some(Method::Wavelet) => root.join("frames").join("wavelet"),
        Some(Method::Exp) => root.join("frames").join("exp"),
    }
}

fn with_hint<T>(r: Result<T>, hint: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::MissingArtifact(p) => Error::ArtifactNotBuilt {
            path: p,
            hint: hint.to_string(),
        },
        other => other,
    })
}

impl Artifacts {
    pub fn load(root: &Path, methods: &[Method]) -> Result<Self> {
        let op_dir = artifact_path(root, None);
        let operator = Arc::new(with_hint(
            RadonOperator::load(&op_dir),
            &format!("framereg radon assemble --out {}", op_dir.display()),
        )?);
        let mut decompositions: BTreeMap<Method, Box<dyn Decomposition + Send + Sync>> = BTreeMap::new();
        for &m in methods {
            let dir = artifact_path(root, Some(m));
            let d: Box<dyn Decomposition + Send + Sync> = match m {
                Method::Svd => Box::new(with_hint(
                    SvdDecomposition::load(&dir),
                    &format!(
                        "framereg svd compute --operator {} --out {}",
                        op_dir.display(),
                        dir.display()
                    ),
                )?),
                Method::Wavelet | Method::Exp => {
                    let fd = with_hint(
                        RadonFrameDecomposition::load(&dir, operator.clone()),
                        &format!(
                            "framereg frame build --kind {} --operator {} --out {} && framereg frame duals --frame {}",
                            m.name(),
                            op_dir.display(),
                            dir.display(),
                            dir.display()
                        ),
                    )?;
                    if fd.dual().is_none() {
                        return Err(Error::ArtifactNotBuilt {
                            path: dir.join("dual_map.frm"),
                            hint: format!("framereg frame duals --frame {}", dir.display()),
                        });
                    }
                    Box::new(fd)
                }
            };
            decompositions.insert(m, d);
        }
        Ok(Self {
            operator,
            decompositions,
        })
    }
}

/// Everything [`build_artifacts`] produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactSpec {
    pub geometry: TomoGeometry,
    pub exp: ExpConfig,
    pub exp_dual: DualConfig,
    pub wavelet: WaveletConfig,
    pub wavelet_dual: DualConfig,
    /// Singular triples kept; `None` keeps all nonzero ones.
    pub svd_count: Option<usize>,
}

impl Default for ArtifactSpec {
    fn default() -> Self {
        Self {
            geometry: TomoGeometry {
                n: 60,
                p: 60,
                n_theta: 180,
            },
            exp: ExpConfig::default(),
            exp_dual: DualConfig::Explicit {
                alpha: 2.0,
                units: AlphaUnits::Plain,
            },
            wavelet: WaveletConfig::default(),
            wavelet_dual: DualConfig::Explicit {
                alpha: 0.01,
                units: AlphaUnits::Plain,
            },
            svd_count: None,
        }
    }
}

/// Wall-clock seconds of each build stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildTimings {
    pub stages: BTreeMap<String, f64>,
}

const ARTIFACT_MARKER: &str = "artifacts.json";

#[derive(Serialize, Deserialize)]
struct ArtifactMarker {
    spec: ArtifactSpec,
    timings: BuildTimings,
}

/// Builds operator, frame decompositions with duals and the singular system
/// below `root`, unless a previous build with the same spec is present.
/// Returns the timings of the build that produced the artifacts.
pub fn ensure_artifacts(root: &Path, spec: &ArtifactSpec) -> Result<BuildTimings> {
    if let Ok(m) = io::read_json::<ArtifactMarker>(&root.join(ARTIFACT_MARKER)) {
        if m.spec == *spec {
            return Ok(m.timings);
        }
    }
    let timings = build_artifacts(root, spec)?;
    io::write_json(
        &root.join(ARTIFACT_MARKER),
        &ArtifactMarker {
            spec: spec.clone(),
            timings: timings.clone(),
        },
    )?;
    Ok(timings)
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Unconditional artifact build; see [`ensure_artifacts`].
pub fn build_artifacts(root: &Path, spec: &ArtifactSpec) -> Result<BuildTimings> {
    let mut t = BuildTimings::default();
    let mut stage = |name: &str, start: Instant| {
        t.stages.insert(name.to_string(), start.elapsed().as_secs_f64());
    };
    let _ = std::fs::remove_file(root.join(ARTIFACT_MARKER));
    let g = spec.geometry;
    let start = Instant::now();
    let op = Arc::new(RadonOperator::assemble(TomoGeometry::new(g.n, g.p, g.n_theta)?)?);
    let dir = artifact_path(root, None);
    mkdir(&dir)?;
    op.save(&dir)?;
    stage("operator", start);
    for (m, cfg, dual) in [
        (Method::Exp, FrameConfig::Exponential(spec.exp.clone()), spec.exp_dual),
        (
            Method::Wavelet,
            FrameConfig::Wavelet(spec.wavelet.clone()),
            spec.wavelet_dual,
        ),
    ] {
        let start = Instant::now();
        let mut fd = RadonFrameDecomposition::build(op.clone(), cfg)?;
        stage(&format!("{}_frame", m.name()), start);
        let start = Instant::now();
        fd.compute_dual(&dual)?;
        stage(&format!("{}_dual", m.name()), start);
        let dir = artifact_path(root, Some(m));
        mkdir(&dir)?;
        fd.save(&dir)?;
    }
    let start = Instant::now();
    let svd = SvdDecomposition::compute(&op.to_dense(), spec.svd_count.unwrap_or(usize::MAX))?;
    stage("svd", start);
    let dir = artifact_path(root, Some(Method::Svd));
    mkdir(&dir)?;
    svd.save(&dir)?;
    Ok(t)
}

fn default_noise_levels() -> Vec<f64> {
    vec![0.01, 0.15]
}

fn default_seed() -> u64 {
    42
}

fn default_methods() -> Vec<Method> {
    vec![Method::Svd, Method::Wavelet, Method::Exp]
}

fn default_columns() -> Vec<ColumnSpec> {
    let apriori = RuleSpec::Apriori { c: 0.5, mu: 0.5 };
    let apost = RuleSpec::Aposteriori {
        tau: None,
        tau_factor: default_tau_factor(),
        grid: AlphaGrid::default(),
    };
    vec![
        ColumnSpec {
            filter: None,
            rule: RuleSpec::None,
        },
        ColumnSpec {
            filter: Some(Filter::Tikhonov),
            rule: apriori,
        },
        ColumnSpec {
            filter: Some(Filter::Landweber),
            rule: apriori,
        },
        ColumnSpec {
            filter: Some(Filter::Tikhonov),
            rule: apost,
        },
        ColumnSpec {
            filter: Some(Filter::Landweber),
            rule: apost,
        },
    ]
}

/// Configuration of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    /// Root of the artifact cache.
    pub artifacts: PathBuf,
    #[serde(default = "default_noise_levels")]
    pub noise_levels: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_columns")]
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub phantom: Phantom,
    /// Write measured runtimes into the CSV (otherwise 0, keeping it reproducible).
    #[serde(default)]
    pub record_runtime: bool,
}

impl TableConfig {
    pub fn new(artifacts: PathBuf) -> Self {
        Self {
            artifacts,
            noise_levels: default_noise_levels(),
            seed: default_seed(),
            methods: default_methods(),
            columns: default_columns(),
            phantom: Phantom::default(),
            record_runtime: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(d) = self.noise_levels.iter().find(|d| !(**d >= 0.0 && **d < 1.0)) {
            return Err(Error::Config(format!("noise level {d} outside [0, 1)")));
        }
        if self.methods.is_empty() || self.columns.is_empty() || self.noise_levels.is_empty() {
            return Err(Error::Config("table needs methods, columns and noise levels".into()));
        }
        self.columns.iter().try_for_each(ColumnSpec::validate)
    }
}

/// Exact data, noisy data and the noise level for every configured noise level.
struct Datasets {
    phantom: GridFunction,
    noisy: Vec<(f64, GridFunction, f64)>,
}

fn datasets(op: &RadonOperator, phantom: Phantom, levels: &[f64], seed: u64) -> Result<Datasets> {
    let x = shepp_logan(op.geometry().n, phantom)?;
    let y = op.apply(&x)?;
    let noisy = levels
        .iter()
        .enumerate()
        .map(|(i, &lvl)| {
            let mut rng = noise_rng(seed, i as u64);
            add_noise(&y, lvl, &mut rng).map(|(yd, d)| (lvl, yd, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Datasets { phantom: x, noisy })
}

/// Reconstruction from precomputed coefficients.
fn reconstruct_cell(
    fd: &dyn Decomposition,
    coeffs: &[C64],
    column: &ColumnSpec,
    delta: f64,
) -> Result<(GridFunction, Option<Alpha>, Option<String>)> {
    let filter = column.filter;
    let rule = match filter {
        Some(f) => column.rule.resolve(f, fd.y_upper_bound()),
        None => ParameterRule::Fixed { alpha: 1.0 },
    };
    let (d, alpha, warning) = regularized_coefficients(fd.lambdas(), coeffs, filter, &rule, delta, fd.y_upper_bound())?;
    let x = match alpha {
        Some(Alpha::Infinite) => GridFunction::zeros(fd.x_geometry()),
        _ => fd.synthesize_dual_x(&d)?,
    };
    Ok((x, alpha, warning))
}

/// Runs every (method, noise level, column) combination of the table.
pub fn run_table(cfg: &TableConfig) -> Result<Vec<Cell>> {
    cfg.validate()?;
    let art = Artifacts::load(&cfg.artifacts, &cfg.methods)?;
    run_table_with(cfg, &art)
}

/// [`run_table`] on already loaded artifacts.
pub fn run_table_with(cfg: &TableConfig, art: &Artifacts) -> Result<Vec<Cell>> {
    cfg.validate()?;
    let data = datasets(&art.operator, cfg.phantom, &cfg.noise_levels, cfg.seed)?;
    let mut cells = Vec::new();
    for &m in &cfg.methods {
        let fd = art
            .decompositions
            .get(&m)
            .ok_or_else(|| Error::Config(format!("method {} was not loaded", m.name())))?;
        for (lvl, yd, delta) in &data.noisy {
            let coeffs = fd.analyze_y(yd)?;
            for col in &cfg.columns {
                let t = Instant::now();
                let (x, alpha, warning) = reconstruct_cell(fd.as_ref(), &coeffs, col, *delta)?;
                let runtime = t.elapsed().as_secs_f64();
                cells.push(Cell {
                    method: m,
                    filter: col.filter,
                    rule: col.rule.name(),
                    noise_rel: *lvl,
                    alpha,
                    rel_l2: rel_l2(&x, &data.phantom)?,
                    ssim: ssim(&x, &data.phantom)?,
                    runtime_s: if cfg.record_runtime { runtime } else { 0.0 },
                    seed: cfg.seed,
                    warning,
                });
            }
        }
    }
    Ok(cells)
}

fn default_sweep_method() -> Method {
    Method::Exp
}

fn default_sweep_filter() -> Filter {
    Filter::Tikhonov
}

fn default_sweep_noise() -> f64 {
    0.15
}

fn default_sweep_grid() -> SweepGrid {
    SweepGrid {
        min: 1e-4,
        max: 1e1,
        points: 50,
    }
}

/// Log-spaced ascending list of alphas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SweepGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0) || !(self.max > self.min) || self.points < 2 {
            return Err(Error::Config(format!("invalid sweep grid {self:?}")));
        }
        let n = self.points;
        Ok((0..n)
            .map(|i| self.min * (self.max / self.min).powf(i as f64 / (n - 1) as f64))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub artifacts: PathBuf,
    #[serde(default = "default_sweep_method")]
    pub method: Method,
    #[serde(default = "default_sweep_filter")]
    pub filter: Filter,
    #[serde(default = "default_sweep_noise")]
    pub noise_rel: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sweep_grid")]
    pub alphas: SweepGrid,
    #[serde(default)]
    pub phantom: Phantom,
    /// Rules whose choice is marked on the curve.
    #[serde(default = "default_sweep_marks")]
    pub marks: Vec<RuleSpec>,
}

fn default_sweep_marks() -> Vec<RuleSpec> {
    vec![
        RuleSpec::Apriori { c: 0.5, mu: 0.5 },
        RuleSpec::Aposteriori {
            tau: None,
            tau_factor: default_tau_factor(),
            grid: AlphaGrid::default(),
        },
    ]
}

impl SweepConfig {
    pub fn new(artifacts: PathBuf) -> Self {
        Self {
            artifacts,
            method: default_sweep_method(),
            filter: default_sweep_filter(),
            noise_rel: default_sweep_noise(),
            seed: default_seed(),
            alphas: default_sweep_grid(),
            phantom: Phantom::default(),
            marks: default_sweep_marks(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub rel_l2: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMark {
    pub rule: &'static str,
    pub alpha: Alpha,
    pub rel_l2: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub argmin_rel_l2: SweepPoint,
    pub argmax_ssim: SweepPoint,
    /// True when the minimum of the error curve is at neither end of the grid.
    pub interior_minimum: bool,
    pub marks: Vec<SweepMark>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,rel_l2,ssim\n");
        for p in &self.points {
            let _ = writeln!(s, "{:e},{},{}", p.alpha, p.rel_l2, p.ssim);
        }
        s
    }
}

/// Error and SSIM along a grid of alphas for one method and filter.
pub fn alpha_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let art = Artifacts::load(&cfg.artifacts, &[cfg.method])?;
    alpha_sweep_with(cfg, &art)
}

/// [`alpha_sweep`] on already loaded artifacts.
pub fn alpha_sweep_with(cfg: &SweepConfig, art: &Artifacts) -> Result<SweepResult> {
    if !(cfg.noise_rel >= 0.0 && cfg.noise_rel < 1.0) {
        return Err(Error::Config(format!("noise level {} outside [0, 1)", cfg.noise_rel)));
    }
    let fd = art
        .decompositions
        .get(&cfg.method)
        .ok_or_else(|| Error::Config(format!("method {} was not loaded", cfg.method.name())))?;
    let data = datasets(&art.operator, cfg.phantom, &[cfg.noise_rel], cfg.seed)?;
    let (_, yd, delta) = &data.noisy[0];
    let coeffs = fd.analyze_y(yd)?;
    let filter = cfg.filter;
    // Landweber runs on the unit-spectrum rescaling, like the table does.
    let scale = if filter == Filter::Landweber {
        fd.lambdas().iter().map(|l| l.norm()).fold(0.0, f64::max)
    } else {
        1.0
    };
    let lam: Vec<C64> = fd.lambdas().iter().map(|l| l / scale).collect();
    let c: Vec<C64> = coeffs.iter().map(|v| v / scale).collect();
    let eval = |alpha: Alpha| -> Result<(f64, f64)> {
        let x = match alpha {
            Alpha::Infinite => GridFunction::zeros(fd.x_geometry()),
            a => fd.synthesize_dual_x(&filtered_coefficients(filter, a, &lam, &c)?)?,
        };
        Ok((rel_l2(&x, &data.phantom)?, ssim(&x, &data.phantom)?))
    };
    let mut points = Vec::new();
    for a in cfg.alphas.values()? {
        let (e, s) = eval(Alpha::Finite(a))?;
        if !e.is_finite() || !s.is_finite() {
            return Err(Error::Numeric(format!(
                "sweep produced a non-finite value at alpha = {a}"
            )));
        }
        points.push(SweepPoint {
            alpha: a,
            rel_l2: e,
            ssim: s,
        });
    }
    let imin = (0..points.len())
        .min_by(|&i, &j| points[i].rel_l2.partial_cmp(&points[j].rel_l2).unwrap())
        .unwrap();
    let imax = (0..points.len())
        .max_by(|&i, &j| points[i].ssim.partial_cmp(&points[j].ssim).unwrap())
        .unwrap();
    let mut marks = Vec::new();
    for spec in &cfg.marks {
        let alpha = match spec.resolve(filter, fd.y_upper_bound()) {
            ParameterRule::Fixed { alpha } => Alpha::Finite(alpha),
            ParameterRule::Apriori { c: cc, mu } => Alpha::Finite(apriori_alpha(*delta, mu, cc)?),
            ParameterRule::Discrepancy { tau, grid } => {
                discrepancy_alpha_from_coeffs(filter, &lam, &c, delta / scale, tau, &grid)?.alpha
            }
        };
        let (e, s) = eval(alpha)?;
        marks.push(SweepMark {
            rule: spec.name(),
            alpha,
            rel_l2: e,
            ssim: s,
        });
    }
    Ok(SweepResult {
        argmin_rel_l2: points[imin].clone(),
        argmax_ssim: points[imax].clone(),
        interior_minimum: imin > 0 && imin + 1 < points.len(),
        points,
        marks,
    })
}

/// Parameter choice in a rate study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateRule {
    /// `alpha = c delta^{2/(2mu+1)}` with the study's `mu`.
    Apriori { c: f64 },
    /// Discrepancy principle with safety factor `tau`.
    Aposteriori {
        tau: f64,
        #[serde(default = "rate_grid")]
        grid: AlphaGrid,
    },
}

fn rate_grid() -> AlphaGrid {
    AlphaGrid {
        min: 1e-12,
        max: 1e2,
        points: 400,
    }
}

fn default_rate_deltas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
}

fn default_truncation() -> usize {
    2000
}

fn default_rate_seeds() -> usize {
    10
}

fn default_decay() -> f64 {
    1.0
}

fn default_source_decay() -> f64 {
    0.55
}

/// Synthetic diagonal problem `sigma_k = k^{-a}` with orthonormal frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudyConfig {
    #[serde(default = "default_decay")]
    pub decay: f64,
    pub mu: f64,
    #[serde(default = "default_rate_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_rate_seeds")]
    pub seeds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub filter: Filter,
    pub rule: RateRule,
    /// Source element coefficients `w_k = k^{-source_decay}` (square summable for > 1/2).
    #[serde(default = "default_source_decay")]
    pub source_decay: f64,
}

impl RateStudyConfig {
    fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0) || !(self.mu > 0.0) || self.truncation == 0 || self.seeds == 0 {
            return Err(Error::Config(
                "rate study needs decay > 0, mu > 0, truncation > 0, seeds > 0".into(),
            ));
        }
        if self.deltas.len() < 2
            || self.deltas.windows(2).any(|w| !(w[1] < w[0]))
            || self.deltas.iter().any(|d| !(*d > 0.0))
        {
            return Err(Error::Config("deltas must be positive and strictly decreasing".into()));
        }
        if !(self.source_decay > 0.5) {
            return Err(Error::Config("source_decay must exceed 1/2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub delta: f64,
    /// Geometric mean of the error over seeds.
    pub error: f64,
    /// Geometric mean of the chosen alphas over seeds.
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateResult {
    pub slope: f64,
    pub theory: f64,
    pub points: Vec<RatePoint>,
}

impl RateResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,error,alpha\n");
        for p in &self.points {
            let _ = writeln!(s, "{:e},{:e},{:e}", p.delta, p.error, p.alpha);
        }
        s
    }
}

/// Exact data and solution of the synthetic problem for one smoothness index.
pub struct SyntheticProblem {
    /// Exact data `y` with `<y, f_k> = lambda_k^{2mu+1} w_k`.
    pub y: GridFunction,
    /// `A^dagger y = sum lambda_k^{2mu} w_k e_k`.
    pub exact: GridFunction,
}

/// Diagonal operator `sigma_k = k^{-decay}` with orthonormal frames, bounds and duals.
pub fn diagonal_decomposition(truncation: usize, decay: f64) -> Result<FrameDecomposition> {
    let k = truncation;
    let g = Geometry::unit(k);
    let a = Mat::from_fn(k, k, |i, j| if i == j { ((i + 1) as f64).powf(-decay) } else { 0.0 });
    let alphas: Vec<C64> = (0..k).map(|i| C64::new(1.0 / a[(i, i)], 0.0)).collect();
    let op = DenseOperator::new(a, g, g)?;
    let yf = FrameSystem::orthonormal_basis(g)?;
    let mut fd = build_decomposition(op, yf, &alphas, Field::Real)?;
    fd.x_frame_mut().estimate_bounds_and_dual(0.0)?;
    fd.y_frame_mut().estimate_bounds()?;
    Ok(fd)
}

/// Source element of order `mu` with coefficients `w_k = k^{-source_decay}`.
pub fn synthetic_problem(fd: &FrameDecomposition, mu: f64, source_decay: f64) -> Result<SyntheticProblem> {
    let g = fd.x_geometry();
    let lam: Vec<f64> = fd.lambdas().iter().map(|l| l.re).collect();
    let w: Vec<f64> = (1..=lam.len()).map(|i| (i as f64).powf(-source_decay)).collect();
    let ycoef: Vec<f64> = (0..lam.len()).map(|i| lam[i].powf(2.0 * mu + 1.0) * w[i]).collect();
    let xcoef: Vec<f64> = (0..lam.len()).map(|i| lam[i].powf(2.0 * mu) * w[i]).collect();
    Ok(SyntheticProblem {
        y: GridFunction::from_real(fd.y_geometry(), &ycoef)?,
        exact: GridFunction::from_real(g, &xcoef)?,
    })
}

/// Least-squares slope of `log error` against `log delta`.
pub fn fit_slope(deltas: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Convergence-rate study on the synthetic diagonal problem.
pub fn rate_study(cfg: &RateStudyConfig) -> Result<RateResult> {
    cfg.validate()?;
    let fd = diagonal_decomposition(cfg.truncation, cfg.decay)?;
    rate_study_on(cfg, &fd)
}

/// [`rate_study`] on a prebuilt [`diagonal_decomposition`].
pub fn rate_study_on(cfg: &RateStudyConfig, fd: &FrameDecomposition) -> Result<RateResult> {
    cfg.validate()?;
    if fd.lambdas().len() != cfg.truncation {
        return Err(Error::Config(format!(
            "decomposition has {} elements, config asks for {}",
            fd.lambdas().len(),
            cfg.truncation
        )));
    }
    let prob = synthetic_problem(fd, cfg.mu, cfg.source_decay)?;
    let rule = match cfg.rule {
        RateRule::Apriori { c } => ParameterRule::Apriori { c, mu: cfg.mu },
        RateRule::Aposteriori { tau, grid } => ParameterRule::Discrepancy { tau, grid },
    };
    let mut points = Vec::new();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let (mut log_err, mut log_alpha) = (0.0, 0.0);
        for s in 0..cfg.seeds {
            let mut rng = noise_rng(cfg.seed, (di * cfg.seeds + s) as u64);
            let ynorm = prob.y.norm();
            let (yd, d) = add_noise(&prob.y, delta / ynorm, &mut rng)?;
            let r = regfilter::regularize(fd, Some(cfg.filter), &rule, &yd, d)?;
            let err = r.x.sub(&prob.exact)?.norm();
            if !err.is_finite() || !(err > 0.0) {
                return Err(Error::Numeric(format!(
                    "rate study error {err} at delta = {delta}, seed {s}, alpha {:?}",
                    r.alpha
                )));
            }
            log_err += err.ln();
            log_alpha += r.alpha.map_or(0.0, |a| a.value().ln());
        }
        let n = cfg.seeds as f64;
        points.push(RatePoint {
            delta,
            error: (log_err / n).exp(),
            alpha: (log_alpha / n).exp(),
        });
    }
    let slope = fit_slope(
        &points.iter().map(|p| p.delta).collect::<Vec<_>>(),
        &points.iter().map(|p| p.error).collect::<Vec<_>>(),
    );
    Ok(RateResult {
        slope,
        theory: 2.0 * cfg.mu / (2.0 * cfg.mu + 1.0),
        points,
    })
}

/// Worst ratio of the data-propagation error to its bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub trials: usize,
    /// `max ||z_alpha - z_alpha^delta|| / (sqrt(C C2 G_alpha / B1) ||y - y^delta||)`.
    pub max_ratio: f64,
}

/// Checks `||z_alpha - z_alpha^delta|| <= sqrt(C C2 G_alpha / B1) ||y - y^delta||`
/// on random data, perturbations, filters and parameters.
pub fn stability_check(fd: &FrameDecomposition, trials: usize, seed: u64) -> Result<StabilityReport> {
    let b1 = fd
        .x_lower_bound()
        .ok_or_else(|| Error::Contract("solution frame bounds not estimated".into()))?;
    let c2 = fd
        .y_upper_bound()
        .ok_or_else(|| Error::Contract("data frame bounds not estimated".into()))?;
    let lmax = fd.lambdas().iter().map(|l| l.norm()).fold(0.0, f64::max);
    let g = fd.y_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    for t in 0..trials {
        let y: Vec<f64> = (0..g.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = GridFunction::from_real(g, &y)?;
        let level: f64 = 10f64.powf(rng.random_range(-4.0..0.0));
        let (yd, _) = add_noise(&y, level, &mut rng)?;
        let filter = [Filter::Tikhonov, Filter::Landweber, Filter::Tsvd][t % 3];
        let alpha = 10f64.powf(rng.random_range(-4.0..0.0));
        if filter == Filter::Landweber && lmax > 1.0 {
            return Err(Error::Domain("stability check needs lambda <= 1 for landweber".into()));
        }
        let z = regfilter::filtered_solution(fd, filter, Alpha::Finite(alpha), &y)?;
        let zd = regfilter::filtered_solution(fd, filter, Alpha::Finite(alpha), &yd)?;
        let lhs = z.sub(&zd)?.norm();
        let bound = (filter.c_bound() * c2 * filter.sup_g(alpha) / b1).sqrt() * y.sub(&yd)?.norm();
        max_ratio = max_ratio.max(lhs / bound);
    }
    Ok(StabilityReport { trials, max_ratio })
}

/// Redundant synthetic decomposition: diagonal `A`, data frame made of an
/// orthonormal basis plus `extra` random unit vectors, `lambda_k = ||A^* f_k||`.
pub fn redundant_synthetic(n: usize, extra: usize, seed: u64) -> Result<FrameDecomposition> {
    let g = Geometry::unit(n);
    let a = Mat::from_fn(n, n, |i, j| if i == j { 1.0 / (i + 1) as f64 } else { 0.0 });
    let op = DenseOperator::new(a, g, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..extra {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        cols.push(v);
    }
    let e = Mat::from_fn(n, cols.len(), |i, j| C64::new(cols[j][i], 0.0));
    let mut yf = FrameSystem::new(e, g, Field::Real)?;
    yf.estimate_bounds()?;
    let alphas: Vec<C64> = (0..yf.len())
        .map(|k| {
            let af = op.adjoint(&yf.element(k))?;
            Ok(C64::new(1.0 / af.norm(), 0.0))
        })
        .collect::<Result<_>>()?;
    let mut fd = build_decomposition(op, yf, &alphas, Field::Real)?;
    fd.x_frame_mut().estimate_bounds_and_dual(0.0)?;
    Ok(fd)
}
