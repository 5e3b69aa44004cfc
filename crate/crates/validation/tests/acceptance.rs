//! Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//!
//! Tomography artifacts are cached under the cargo target tmp directory; the
//! first run builds them. Optional arguments select criteria by number.

use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use faer::Mat;
use framereg::experiments::{
    self, add_noise, diagonal_decomposition, ensure_artifacts, noise_rng, redundant_synthetic, rel_l2, stability_check,
    ArtifactSpec, Artifacts, Cell, Method, RateRule, RateStudyConfig, SweepConfig, TableConfig,
};
use framereg::frames::{recursive_dual, Decomposition, Field, FrameSystem};
use framereg::hilbert::{Geometry, GridFunction, LinearMap, C64};
use framereg::regfilter::{qualification_check, regularize, AlphaGrid, Filter, ParameterRule};
use framereg_validation::Criterion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Orthonormal columns by modified Gram-Schmidt.
fn gram_schmidt(mut cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for j in 0..cols.len() {
        for i in 0..j {
            let d: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            let ci = cols[i].clone();
            cols[j].iter_mut().zip(&ci).for_each(|(b, a)| *b -= d * a);
        }
        let n = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|v| *v /= n);
    }
    cols
}

fn real_frame(cols: &[Vec<f64>]) -> FrameSystem {
    let n = cols[0].len();
    let m = Mat::from_fn(n, cols.len(), |i, j| cols[j][i]);
    FrameSystem::from_real(&m, Geometry::unit(n)).unwrap()
}

/// Worst relative error of `x = sum <x, e_k> e~_k` over random `x`.
fn reconstruction_error(f: &FrameSystem, rng: &mut ChaCha8Rng, trials: usize) -> f64 {
    let g = f.geometry();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = match f.field() {
            Field::Real => GridFunction::from_real(g, &gaussian(rng, g.len())).unwrap(),
            Field::Complex => {
                let re = gaussian(rng, g.len());
                let im = gaussian(rng, g.len());
                GridFunction::new(g, re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect()).unwrap()
            }
        };
        let r = f.reconstruct(&x).unwrap();
        worst = worst.max(r.sub(&x).unwrap().norm() / x.norm());
    }
    worst
}

fn frames_criterion(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = 1e-6;

    let q = gram_schmidt((0..6).map(|_| gaussian(&mut rng, 6)).collect());
    let mut ortho = real_frame(&q);
    let b = ortho.estimate_bounds().unwrap();
    ortho.compute_dual_explicit(0.0).unwrap();
    let e = reconstruction_error(&ortho, &mut rng, 20);
    c.check(
        "orthonormal basis reconstruction",
        e <= tol,
        format!("{e:.2e} <= {tol:e}"),
    );
    c.check(
        "orthonormal basis bounds",
        (b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9,
        format!("({:.12}, {:.12}) vs (1, 1)", b.lower, b.upper),
    );

    let h = 3f64.sqrt() / 2.0;
    let mercedes = vec![vec![0.0, 1.0], vec![-h, -0.5], vec![h, -0.5]];
    let mut m = real_frame(&mercedes);
    let coeffs = m
        .analyze(&GridFunction::from_real(Geometry::unit(2), &[1.0, 0.0]).unwrap())
        .unwrap();
    let want = [0.0, -h, h];
    let cerr = coeffs
        .iter()
        .zip(want)
        .map(|(a, b)| (a - C64::new(b, 0.0)).norm())
        .fold(0.0, f64::max);
    c.check(
        "mercedes coefficients",
        cerr < 1e-12,
        format!("max deviation {cerr:.1e} from (0, -sqrt3/2, sqrt3/2)"),
    );
    let b = m.estimate_bounds().unwrap();
    c.check(
        "mercedes bounds",
        (b.lower - 1.5).abs() < 1e-9 && (b.upper - 1.5).abs() < 1e-9 && b.is_tight(1e-9),
        format!("({:.12}, {:.12}) vs (1.5, 1.5)", b.lower, b.upper),
    );
    let mut worst_tight: f64 = 0.0;
    for _ in 0..20 {
        let x = GridFunction::from_real(Geometry::unit(2), &gaussian(&mut rng, 2)).unwrap();
        let r = m.reconstruct_tight(&x).unwrap();
        worst_tight = worst_tight.max(r.sub(&x).unwrap().norm() / x.norm());
    }
    c.check(
        "tight-frame shortcut x = S^-1-free sum / B",
        worst_tight <= tol,
        format!("{worst_tight:.2e} <= {tol:e}"),
    );
    m.compute_dual_explicit(0.0).unwrap();
    let mut derr: f64 = 0.0;
    for k in 0..3 {
        let d = m.dual_element(k).unwrap();
        let e = m.element(k).scaled(C64::new(2.0 / 3.0, 0.0));
        derr = derr.max(d.sub(&e).unwrap().norm());
    }
    c.check(
        "mercedes dual equals (2/3) e_k",
        derr < 1e-12,
        format!("max deviation {derr:.1e}"),
    );
    let e = reconstruction_error(&m, &mut rng, 20);
    c.check("mercedes reconstruction", e <= tol, format!("{e:.2e} <= {tol:e}"));

    let cols: Vec<Vec<f64>> = (0..30).map(|_| gaussian(&mut rng, 10)).collect();
    let mut red = real_frame(&cols);
    let b = red.estimate_bounds().unwrap();
    red.compute_dual_explicit(0.0).unwrap();
    let e = reconstruction_error(&red, &mut rng, 20);
    c.check(
        "redundant real frame reconstruction",
        e <= tol,
        format!(
            "{e:.2e} <= {tol:e} (30 vectors in R^10, B1 = {:.3}, B2 = {:.3})",
            b.lower, b.upper
        ),
    );

    let n = 4;
    let k = 12;
    let vals: Vec<C64> = (0..n * k)
        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let mut cf = FrameSystem::new(
        Mat::from_fn(n, k, |i, j| vals[i + n * j]),
        Geometry::unit(n),
        Field::Complex,
    )
    .unwrap();
    cf.estimate_bounds().unwrap();
    cf.compute_dual_explicit(0.0).unwrap();
    let e = reconstruction_error(&cf, &mut rng, 20);
    c.check(
        "redundant complex frame reconstruction",
        e <= tol,
        format!("{e:.2e} <= {tol:e} (12 vectors in C^4)"),
    );

    // Recursive duals: ||x - sum <x, e_k> e~_k^M|| <= q^{M+1} ||x||.
    let s = red.frame_operator_matrix();
    let q = (b.upper - b.lower) / (b.upper + b.lower);
    let mut worst_excess = f64::NEG_INFINITY;
    for m_iter in [0usize, 1, 3, 10, 40] {
        let dual = recursive_dual(s.as_ref(), b.lower + b.upper, m_iter, Some(b)).unwrap();
        let mut fr = red.clone();
        fr.set_dual(dual).unwrap();
        let bound = q.powi(m_iter as i32 + 1);
        for _ in 0..20 {
            let x = GridFunction::from_real(Geometry::unit(10), &gaussian(&mut rng, 10)).unwrap();
            let r = fr.reconstruct(&x).unwrap();
            let err = r.sub(&x).unwrap().norm() / x.norm();
            worst_excess = worst_excess.max(err - bound);
        }
    }
    c.check(
        "recursive dual error bound",
        worst_excess <= 1e-8,
        format!("max (error - q^(M+1)) = {worst_excess:.2e} <= 1e-8, q = {q:.4}, M in 0,1,3,10,40"),
    );
}

fn filters_criterion(c: &mut Criterion) {
    let spots = [
        (Filter::Tikhonov, 0.5, 1.0, 2.0 / 3.0, 1.0 / 3.0),
        (Filter::Landweber, 0.5, 0.5, 1.5, 0.25),
        (Filter::Tsvd, 0.1, 0.04, 0.0, 1.0),
        (Filter::Tsvd, 0.1, 0.25, 4.0, 0.0),
    ];
    for (f, a, s, g, r) in spots {
        let (gv, rv) = f.eval(a, s).unwrap();
        c.check(
            format!("{} spot value at alpha = {a}, s = {s}", f.name()),
            (gv - g).abs() < 1e-12 && (rv - r).abs() < 1e-12,
            format!("(g, r) = ({gv}, {rv}) vs ({g}, {r})"),
        );
    }
    let alphas: Vec<f64> = (0..50).map(|i| 1e-6 * 1e6f64.powf(i as f64 / 49.0)).collect();
    for f in [Filter::Tikhonov, Filter::Landweber, Filter::Tsvd] {
        let s_max = if f == Filter::Landweber { 1.0 } else { 100.0 };
        let (mut sg, mut g_ratio) = (0.0f64, 0.0f64);
        for &a in &alphas {
            let mut sup = 0.0f64;
            for i in 0..=2000 {
                let s = s_max * i as f64 / 2000.0;
                let (g, _) = f.eval(a, s).unwrap();
                sg = sg.max((s * g).abs());
                sup = sup.max(g.abs());
            }
            g_ratio = g_ratio.max(sup * a);
        }
        c.check(
            format!("{} |s g(s)| <= 1", f.name()),
            sg <= 1.0 + 1e-12,
            format!("max {sg:.15}"),
        );
        c.check(
            format!("{} G_alpha <= 1/alpha", f.name()),
            g_ratio <= 1.0 + 1e-12,
            format!("max alpha sup|g| = {g_ratio:.15} over alpha in [1e-6, 1]"),
        );
    }
    let q1 = qualification_check(Filter::Tikhonov, 1.0, 1.0).unwrap();
    c.check(
        "tikhonov qualification c_1 <= 1",
        q1.holds && q1.c_mu <= 1.0 + 1e-9,
        format!("c_1 = {:.12}, holds = {}", q1.c_mu, q1.holds),
    );
    let q2 = qualification_check(Filter::Tikhonov, 2.0, 1.0).unwrap();
    c.check(
        "tikhonov qualification fails at mu = 2",
        !q2.holds,
        format!("holds = {}", q2.holds),
    );
}

fn rates_criterion(c: &mut Criterion) {
    let fd = diagonal_decomposition(2000, 1.0).unwrap();
    for (mu, filter) in [(0.5, Filter::Tikhonov), (1.0, Filter::Tsvd)] {
        let tau = 1.5 * fd.y_upper_bound().unwrap().sqrt() * filter.gamma();
        for rule in [
            RateRule::Apriori { c: 1.0 },
            RateRule::Aposteriori {
                tau,
                grid: AlphaGrid {
                    min: 1e-12,
                    max: 1e2,
                    points: 400,
                },
            },
        ] {
            let cfg = RateStudyConfig {
                decay: 1.0,
                mu,
                deltas: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
                truncation: 2000,
                seeds: 10,
                seed: 42,
                filter,
                rule,
                source_decay: 0.55,
            };
            let r = experiments::rate_study_on(&cfg, &fd).unwrap();
            let name = match rule {
                RateRule::Apriori { .. } => "a-priori",
                RateRule::Aposteriori { .. } => "discrepancy",
            };
            c.check(
                format!("mu = {mu}, {}, {name}", filter.name()),
                (r.slope - r.theory).abs() <= 0.1,
                format!("slope {:.4} vs {:.4} +- 0.1", r.slope, r.theory),
            );
        }
    }
}

fn stability_criterion(c: &mut Criterion) {
    let fd = redundant_synthetic(100, 50, 7).unwrap();
    let r = stability_check(&fd, 100, 11).unwrap();
    c.check(
        "data-propagation bound on 100 perturbations",
        r.max_ratio <= 1.0 + 1e-6,
        format!("max ratio {:.6} <= 1 + 1e-6", r.max_ratio),
    );
}

fn artifact_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-artifacts")
}

struct Tomo {
    art: Artifacts,
    timings: experiments::BuildTimings,
}

fn tomography() -> Result<Tomo, String> {
    let root = artifact_root();
    let timings = ensure_artifacts(&root, &ArtifactSpec::default()).map_err(|e| e.to_string())?;
    let art = Artifacts::load(&root, &[Method::Svd, Method::Wavelet, Method::Exp]).map_err(|e| e.to_string())?;
    Ok(Tomo { art, timings })
}

fn cell<'a>(cells: &'a [Cell], m: Method, noise: f64, filter: Option<Filter>, rule: &str) -> &'a Cell {
    cells
        .iter()
        .find(|c| c.method == m && c.noise_rel == noise && c.filter == filter && c.rule == rule)
        .expect("table cell")
}

fn tomography_criterion(c: &mut Criterion, t: &Tomo) {
    let dual_secs: f64 = t
        .timings
        .stages
        .iter()
        .filter(|(k, _)| !k.starts_with("operator"))
        .map(|(_, v)| v)
        .sum();
    c.check(
        "precomputation time",
        dual_secs <= 7200.0,
        format!("{dual_secs:.0} s for frames, duals and svd <= 7200 s"),
    );
    let op = &t.art.operator;
    let x = experiments::shepp_logan(op.geometry().n, experiments::Phantom::SheppLogan).unwrap();
    let y = op.apply(&x).unwrap();
    let (yd, delta) = add_noise(&y, 0.01, &mut noise_rng(42, 0)).unwrap();
    let mut unfiltered = std::collections::BTreeMap::new();
    for (m, lo, hi) in [
        (Method::Exp, 0.02, 0.06),
        (Method::Wavelet, 0.02, 0.06),
        (Method::Svd, 0.15, 0.23),
    ] {
        let fd = &t.art.decompositions[&m];
        let start = Instant::now();
        let r = regularize(fd.as_ref(), None, &ParameterRule::Fixed { alpha: 1.0 }, &yd, delta).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let e = rel_l2(&r.x, &x).unwrap();
        unfiltered.insert(m, e);
        c.check(
            format!("{} 1% noise unfiltered error", m.name()),
            (lo..=hi).contains(&e),
            format!("{:.2}% in [{:.0}%, {:.0}%]", 100.0 * e, 100.0 * lo, 100.0 * hi),
        );
        c.check(
            format!("{} reconstruction time", m.name()),
            secs <= 30.0,
            format!("{secs:.2} s <= 30 s"),
        );
    }
    let svd = unfiltered[&Method::Svd];
    for m in [Method::Exp, Method::Wavelet] {
        c.check(
            format!("{} beats svd at 1% noise", m.name()),
            unfiltered[&m] < svd,
            format!("{:.2}% < {:.2}%", 100.0 * unfiltered[&m], 100.0 * svd),
        );
    }
    let cells = experiments::run_table_with(&TableConfig::new(artifact_root()), &t.art).unwrap();
    let improvement = |m: Method| {
        let none = cell(&cells, m, 0.15, None, "none").rel_l2;
        let best = cells
            .iter()
            .filter(|c| c.method == m && c.noise_rel == 0.15 && c.filter.is_some())
            .map(|c| c.rel_l2)
            .fold(f64::INFINITY, f64::min);
        none - best
    };
    let (is, ie, iw) = (
        improvement(Method::Svd),
        improvement(Method::Exp),
        improvement(Method::Wavelet),
    );
    c.check(
        "svd most improved by filtering at 15% noise",
        is > ie && is > iw,
        format!(
            "error reduction svd {:.2} pts, exp {:.2} pts, wavelet {:.2} pts",
            100.0 * is,
            100.0 * ie,
            100.0 * iw
        ),
    );
}

fn sweep_criterion(c: &mut Criterion, t: &Tomo) {
    let r = experiments::alpha_sweep_with(&SweepConfig::new(artifact_root()), &t.art).unwrap();
    c.check(
        "interior minimum of the error curve",
        r.interior_minimum,
        format!(
            "min {:.2}% at alpha {:.3e} within [{:.0e}, {:.0e}], {} points",
            100.0 * r.argmin_rel_l2.rel_l2,
            r.argmin_rel_l2.alpha,
            r.points[0].alpha,
            r.points.last().unwrap().alpha,
            r.points.len()
        ),
    );
    c.check(
        "argmax ssim alpha >= argmin error alpha",
        r.argmax_ssim.alpha >= r.argmin_rel_l2.alpha,
        format!(
            "{:.3e} (ssim {:.3}) >= {:.3e}",
            r.argmax_ssim.alpha, r.argmax_ssim.ssim, r.argmin_rel_l2.alpha
        ),
    );
}

fn determinism_criterion(c: &mut Criterion) {
    let cfg = TableConfig::new(artifact_root());
    let a = experiments::cells_to_csv(&experiments::run_table(&cfg).unwrap());
    let b = experiments::cells_to_csv(&experiments::run_table(&cfg).unwrap());
    c.check(
        "table csv byte-identical across runs",
        a.as_bytes() == b.as_bytes(),
        format!("{} bytes, {} rows, seed 42, 1 thread", a.len(), a.lines().count() - 1),
    );
}

fn run(id: u32, name: &'static str, body: impl FnOnce(&mut Criterion)) -> bool {
    let mut c = Criterion::new(id, name);
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| body(&mut c)));
    if let Err(e) = outcome {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        c.abort(msg);
    }
    let line = c.report(start.elapsed().as_secs_f64());
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    c.passed()
}

fn main() {
    // Reference mode.
    std::env::set_var(framereg::runtime::THREADS_ENV, "1");
    framereg::runtime::configure_threads().expect("thread configuration");
    panic::set_hook(Box::new(|_| {}));
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |id: u32| selected.is_empty() || selected.contains(&id);

    let mut results = Vec::new();
    let timed = |limit: f64, body: fn(&mut Criterion)| {
        move |c: &mut Criterion| {
            let start = Instant::now();
            body(c);
            let secs = start.elapsed().as_secs_f64();
            c.check("runtime", secs < limit, format!("{secs:.2} s < {limit} s"));
        }
    };
    if want(1) {
        results.push(run(1, "frame algebra", timed(5.0, frames_criterion)));
    }
    if want(2) {
        results.push(run(2, "filters", timed(5.0, filters_criterion)));
    }
    if want(3) {
        results.push(run(3, "convergence rates", timed(60.0, rates_criterion)));
    }
    if want(4) {
        results.push(run(4, "stability bound", stability_criterion));
    }
    if want(5) || want(6) || want(7) {
        let start = Instant::now();
        let tomo = tomography();
        let _ = writeln!(
            std::io::stdout(),
            "     tomography artifacts ready in {:.1} s ({})",
            start.elapsed().as_secs_f64(),
            artifact_root().display()
        );
        match tomo {
            Ok(t) => {
                if want(5) {
                    results.push(run(5, "tomography", |c| tomography_criterion(c, &t)));
                }
                if want(6) {
                    results.push(run(6, "alpha sweep", |c| sweep_criterion(c, &t)));
                }
            }
            Err(e) => {
                for (id, name) in [(5, "tomography"), (6, "alpha sweep")] {
                    if want(id) {
                        let err = e.clone();
                        results.push(run(id, name, move |c| c.abort(format!("artifacts: {err}"))));
                    }
                }
            }
        }
        if want(7) {
            results.push(run(7, "determinism", determinism_criterion));
        }
    }
    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
