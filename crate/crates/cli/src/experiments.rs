//! Experiment drivers shared by the command line and the acceptance tests.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use homdyn::config::ExperimentConfig;
use homdyn::ergodic::averaging::{birkhoff_battery, genericity_test_scaled, AveragingReport};
use homdyn::ergodic::integrals::{autocorrelation, haar_integral, mu_integral};
use homdyn::ergodic::testfn::{BumpFunction, TestFunction, SOBOLEV_DEGREE};
use homdyn::flows::{choose_n, orbit_from_form, orbit_walk, shear_displacement, ClosedOrbit, OrbitSample};
use homdyn::form::TernaryForm;
use homdyn::haar::haar_sample;
use homdyn::lattice::{delta0, local_coords, SpacePoint};
use homdyn::linalg::split_r;
use homdyn::rng::stream;
use homdyn::stats::{log_log_slope, spearman};
use homdyn::{Error, Result};

/// How the test functions of an experiment are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum BumpSpec {
    /// `k` bumps of maximal radius.
    Battery(usize),
    /// `k` bumps of the given radius.
    Radius(usize, f64),
    /// The constant function.
    Constant(f64),
}

impl std::str::FromStr for BumpSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bump spec {s:?}: expected battery:K, radius:K:RHO or constant:C"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["battery", k] => Ok(BumpSpec::Battery(k.parse().map_err(|_| bad())?)),
            ["radius", k, r] => Ok(BumpSpec::Radius(k.parse().map_err(|_| bad())?, r.parse().map_err(|_| bad())?)),
            ["constant", c] => Ok(BumpSpec::Constant(c.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

/// Test functions centered at evenly spaced entries of `centers`.
pub fn build_battery(spec: &BumpSpec, centers: &[SpacePoint]) -> Result<Vec<TestFunction>> {
    let pick = |k: usize| -> Result<Vec<SpacePoint>> {
        if k == 0 || centers.is_empty() {
            return Err(Error::Invalid("battery needs at least one center".into()));
        }
        Ok((0..k).map(|i| centers[(i * centers.len()) / k]).collect())
    };
    match spec {
        BumpSpec::Constant(c) => Ok(vec![TestFunction::Constant(*c)]),
        BumpSpec::Battery(k) => Ok(pick(*k)?.into_iter().map(|z| TestFunction::Bump(BumpFunction::widest(z))).collect()),
        BumpSpec::Radius(k, rho) => {
            pick(*k)?.into_iter().map(|z| Ok(TestFunction::Bump(BumpFunction::new(z, *rho)?))).collect()
        }
    }
}

/// Seed of a derived task.
pub fn sub_seed(seed: u64, task: &str, index: u64) -> u64 {
    stream(seed, task, index).next_u64()
}

/// Orbit of `form` sampled with `samples` recorded points.
pub fn sample_orbit(cfg: &ExperimentConfig, form: &TernaryForm, samples: usize, seed: u64) -> Result<(ClosedOrbit, OrbitSample)> {
    let orbit = orbit_from_form(form)?;
    let walk = cfg.walk(samples.max(1) * cfg.flows.thinning, seed);
    let sample = orbit_walk(&orbit, &walk)?;
    Ok((orbit, sample))
}

fn evenly_spaced<T: Copy>(xs: &[T], k: usize) -> Vec<T> {
    let k = k.min(xs.len());
    (0..k).map(|i| xs[(i * xs.len()) / k.max(1)]).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffRow {
    pub point: usize,
    pub function: usize,
    #[serde(flatten)]
    pub report: AveragingReport,
}

/// `D_t^f` on an orbit for each `t` in the grid, at `points` sample points.
/// The orbit means come from the same sample; bump centers from an
/// independent walk on the orbit.
pub fn birkhoff_experiment(
    cfg: &ExperimentConfig,
    form: &TernaryForm,
    t_grid: &[f64],
    bump: &BumpSpec,
    samples: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<BirkhoffRow>> {
    let (orbit, sample) = sample_orbit(cfg, form, samples, sub_seed(seed, "birkhoff-walk", 0))?;
    let centers = orbit_walk(&orbit, &cfg.walk(1000 * cfg.flows.thinning, sub_seed(seed, "birkhoff-centers", 0)))?;
    let fs = build_battery(bump, &centers.points)?;
    let mus: Vec<f64> = fs.iter().map(|f| mu_integral(f, &sample).map(|m| m.0)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (p, x) in evenly_spaced(&sample.points, points).iter().enumerate() {
        for &t in t_grid {
            for (k, report) in birkhoff_battery(&fs, x, t, &mus, cfg.ergodic.quad_points)?.into_iter().enumerate() {
                rows.push(BirkhoffRow { point: p, function: k, report });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct GenericRow {
    pub point: usize,
    pub passed: bool,
    /// Largest `|D_n^f| / tolerance` over the battery and `n`.
    pub worst_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GenericSummary {
    pub t: f64,
    pub n_max: u32,
    pub points: usize,
    pub pass_fraction: f64,
    pub tolerance_factor: f64,
}

/// Genericity test at `points` walk points of the orbit, with the battery
/// of maximal bumps centered at an independent walk.
#[allow(clippy::too_many_arguments)]
pub fn generic_experiment(
    cfg: &ExperimentConfig,
    form: &TernaryForm,
    t: f64,
    n_max: u32,
    bump: &BumpSpec,
    samples: usize,
    points: usize,
    factor: f64,
    seed: u64,
) -> Result<(Vec<GenericRow>, GenericSummary)> {
    let (orbit, sample) = sample_orbit(cfg, form, samples, sub_seed(seed, "generic-walk", 0))?;
    let centers = orbit_walk(&orbit, &cfg.walk(1000 * cfg.flows.thinning, sub_seed(seed, "generic-centers", 0)))?;
    let fs = build_battery(bump, &centers.points)?;
    let mus: Vec<f64> = fs.iter().map(|f| mu_integral(f, &sample).map(|m| m.0)).collect::<Result<_>>()?;
    let xs = evenly_spaced(&sample.points, points);
    let rows: Vec<GenericRow> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let r = genericity_test_scaled(x, t, &fs, &mus, n_max, factor)?;
            let worst = r.entries.iter().map(|e| e.d_value.abs() / e.tolerance).fold(0.0, f64::max);
            Ok(GenericRow { point: i, passed: r.passed, worst_ratio: worst })
        })
        .collect::<Result<_>>()?;
    let pass = rows.iter().filter(|r| r.passed).count() as f64 / rows.len().max(1) as f64;
    let summary = GenericSummary { t, n_max, points: rows.len(), pass_fraction: pass, tolerance_factor: factor };
    Ok((rows, summary))
}

/// Constant bounding `‖Ad(a_n u_s) r − e^{2n} r₀‖` by `C e^{−n}` for trials
/// with `‖r₀‖ ≥ ratio ‖r‖`: since `e^{2n}‖r₀‖ ≤ e⁴`,
/// `e^n ‖r‖ ≤ e^n ‖r₀‖ / ratio ≤ e^{4−n} / ratio`.
pub fn shear_constant(ratio: f64) -> f64 {
    4f64.exp() / ratio
}

/// Minimum ratio `‖r₀‖/‖r‖` of the shear trials.
pub const SHEAR_RATIO: f64 = 0.1;

#[derive(Clone, Debug, Serialize)]
pub struct ShearTrial {
    pub norm_r: f64,
    pub ratio_r0: f64,
    pub n: i32,
    pub s: f64,
    pub deviation: f64,
    /// `e^n ‖r‖`.
    pub bound_en: f64,
    /// `C e^{−n}`.
    pub bound_c: f64,
    /// Deviation of the same `r` with `s = 0`.
    pub deviation_s0: f64,
}

/// Random `r ∈ 𝔯` with `‖r‖` log-uniform in `[e^{−12}, e^{−4}]` and
/// `‖r₀‖ ≥ 0.1‖r‖`, `n = choose_n(r)`, `s` uniform in `[0, e^{−7n/24}]`.
pub fn shear_trial(rng: &mut impl Rng) -> Result<ShearTrial> {
    let r = loop {
        let v = homdyn::flows::random_unit_r(rng);
        let (r0, _) = split_r(&v)?;
        if r0.norm() >= SHEAR_RATIO {
            break v;
        }
    };
    let norm = (-12.0 + 8.0 * rng.gen::<f64>()).exp();
    let r = r * norm;
    let (r0, _) = split_r(&r)?;
    let n = choose_n(&r)?;
    let s = rng.gen::<f64>() * (-7.0 * n as f64 / 24.0).exp();
    let (_, deviation) = shear_displacement(&r, n, s)?;
    let (_, deviation_s0) = shear_displacement(&r, n, 0.0)?;
    Ok(ShearTrial {
        norm_r: norm,
        ratio_r0: r0.norm() / norm,
        n,
        s,
        deviation,
        bound_en: (n as f64).exp() * norm,
        bound_c: shear_constant(SHEAR_RATIO) * (-(n as f64)).exp(),
        deviation_s0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ShearByN {
    pub n: i32,
    pub trials: usize,
    pub violations_en: usize,
    pub violations_c: usize,
    pub violations_en_s0: usize,
    pub max_ratio_en: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShearSummary {
    pub trials: usize,
    pub violations_en: usize,
    pub violations_c: usize,
    /// Violations of `e^n‖r‖` by the `s = 0` control.
    pub violations_en_s0: usize,
    pub constant: f64,
    pub max_ratio_en: f64,
    pub max_ratio_c: f64,
    pub by_n: Vec<ShearByN>,
}

pub fn shear_experiment(trials: usize, seed: u64) -> Result<ShearSummary> {
    let rows: Vec<ShearTrial> =
        (0..trials).into_par_iter().map(|i| shear_trial(&mut stream(seed, "shear", i as u64))).collect::<Result<_>>()?;
    let mut by_n: std::collections::BTreeMap<i32, ShearByN> = Default::default();
    for r in &rows {
        let e = by_n.entry(r.n).or_insert(ShearByN {
            n: r.n,
            trials: 0,
            violations_en: 0,
            violations_c: 0,
            violations_en_s0: 0,
            max_ratio_en: 0.0,
        });
        e.trials += 1;
        e.violations_en += (r.deviation > r.bound_en) as usize;
        e.violations_c += (r.deviation > r.bound_c) as usize;
        e.violations_en_s0 += (r.deviation_s0 > r.bound_en) as usize;
        e.max_ratio_en = e.max_ratio_en.max(r.deviation / r.bound_en);
    }
    let by_n: Vec<ShearByN> = by_n.into_values().collect();
    Ok(ShearSummary {
        trials,
        violations_en: by_n.iter().map(|b| b.violations_en).sum(),
        violations_c: by_n.iter().map(|b| b.violations_c).sum(),
        violations_en_s0: by_n.iter().map(|b| b.violations_en_s0).sum(),
        constant: shear_constant(SHEAR_RATIO),
        max_ratio_en: rows.iter().map(|r| r.deviation / r.bound_en).fold(0.0, f64::max),
        max_ratio_c: rows.iter().map(|r| r.deviation / r.bound_c).fold(0.0, f64::max),
        by_n,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosePair {
    pub index_a: usize,
    pub index_b: usize,
    pub norm_r: f64,
    pub norm_h: f64,
    /// `‖r₀‖/‖r‖`; absent when `r = 0`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosePairSummary {
    pub pairs_found: usize,
    pub reported: usize,
    pub smallest_norm_r: Option<f64>,
    pub iota: f64,
    /// Fraction of the reported pairs with ratio at least `iota`.
    pub generic_fraction: Option<f64>,
}

fn log_minima(p: &SpacePoint) -> [f64; 3] {
    let m = p.reduced();
    std::array::from_fn(|j| {
        let c = m.column(j);
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt().ln()
    })
}

/// Pairs `y_b = exp(r) exp(h) y_a` with `‖r‖, ‖h‖ ≤ delta` between two
/// samples, nearest first. Successive minima move by a factor at most
/// `e^{2 delta}` under such a displacement, so candidates are bucketed by
/// their logarithms.
pub fn close_pairs(a: &[SpacePoint], b: &[SpacePoint], delta: f64, keep: usize, iota: f64) -> Result<(Vec<ClosePair>, ClosePairSummary)> {
    let width = 2.0 * delta * 1.001 + 1e-12;
    let cell = |p: &SpacePoint| {
        let l = log_minima(p);
        ((l[0] / width).floor() as i64, (l[1] / width).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in a.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let found: Vec<Vec<ClosePair>> = b
        .par_iter()
        .enumerate()
        .map(|(j, y)| {
            let (cx, cy) = cell(y);
            let ly = log_minima(y);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(list) = grid.get(&(cx + dx, cy + dy)) else { continue };
                    for &i in list {
                        let la = log_minima(&a[i]);
                        if (0..3).any(|k| (la[k] - ly[k]).abs() > 2.0 * delta * 1.001) {
                            continue;
                        }
                        let d = delta.min(delta0(&a[i]));
                        if let Some((r, h)) = local_coords(&a[i], y, d)? {
                            let nr = r.norm();
                            let ratio = if nr > 0.0 { Some(split_r(&r)?.0.norm() / nr) } else { None };
                            out.push(ClosePair { index_a: i, index_b: j, norm_r: nr, norm_h: h.norm(), ratio });
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut pairs: Vec<ClosePair> = found.into_iter().flatten().collect();
    let total = pairs.len();
    pairs.sort_by(|p, q| p.norm_r.total_cmp(&q.norm_r).then(p.index_a.cmp(&q.index_a)).then(p.index_b.cmp(&q.index_b)));
    pairs.truncate(keep);
    let with_ratio: Vec<f64> = pairs.iter().filter_map(|p| p.ratio).collect();
    let generic = (!with_ratio.is_empty())
        .then(|| with_ratio.iter().filter(|&&x| x >= iota).count() as f64 / with_ratio.len() as f64);
    let summary = ClosePairSummary {
        pairs_found: total,
        reported: pairs.len(),
        smallest_norm_r: pairs.first().map(|p| p.norm_r),
        iota,
        generic_fraction: generic,
    };
    Ok((pairs, summary))
}

#[derive(Clone, Debug, Serialize)]
pub struct EquidistRow {
    pub form: String,
    pub disc: f64,
    /// `max_f |μ̂(f) − m̂(f)| / 𝒮₂₀(f)`.
    pub discrepancy: f64,
    /// `max_f |μ̂(f) − m̂(f)|`.
    pub raw_discrepancy: f64,
    /// Sample points inside the support of some battery member.
    pub support_hits: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquidistSummary {
    pub forms: usize,
    pub dropped_isotropic: usize,
    pub samples: usize,
    /// Spearman correlation of discrepancy against discriminant; absent
    /// when either column is constant.
    pub spearman: Option<f64>,
}

/// Forms `x² + y² − p z²` for primes `p ≤ bound`.
pub fn default_family(bound: u64) -> Vec<TernaryForm> {
    (2..=bound as i64)
        .filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0))
        .map(|p| TernaryForm::diagonal(1, 1, -p).expect("indefinite diagonal form"))
        .collect()
}

/// Orbit means against Haar means of a battery centered at Haar points,
/// over a family of forms; isotropic forms are dropped.
pub fn equidist_scan(
    cfg: &ExperimentConfig,
    family: &[TernaryForm],
    bump: &BumpSpec,
    samples: usize,
    seed: u64,
) -> Result<(Vec<EquidistRow>, EquidistSummary)> {
    let kept: Vec<&TernaryForm> = family.iter().filter(|f| !f.is_isotropic()).collect();
    let centers = haar_sample(64, sub_seed(seed, "equidist-centers", 0));
    let fs = build_battery(bump, &centers)?;
    let haar: Vec<f64> = fs
        .iter()
        .enumerate()
        .map(|(k, f)| haar_integral(f, cfg.ergodic.haar_count, sub_seed(seed, "equidist-haar", k as u64)).map(|m| m.0))
        .collect::<Result<_>>()?;
    let bounds: Vec<f64> = fs.iter().map(|f| f.sobolev_bound(SOBOLEV_DEGREE)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, form) in kept.iter().enumerate() {
        let (orbit, sample) = sample_orbit(cfg, form, samples, sub_seed(seed, "equidist-walk", i as u64))?;
        let mut disc = 0.0f64;
        let mut raw = 0.0f64;
        for (k, f) in fs.iter().enumerate() {
            let (mu, _) = mu_integral(f, &sample)?;
            let d = (mu - haar[k]).abs();
            raw = raw.max(d);
            disc = disc.max(if bounds[k] > 0.0 { d / bounds[k] } else { 0.0 });
        }
        let hits = if fs.iter().all(|f| f.constant_value().is_some()) {
            sample.points.len()
        } else {
            sample.points.par_iter().filter(|p| fs.iter().any(|f| f.eval(p) != 0.0)).count()
        };
        rows.push(EquidistRow {
            form: form.to_text(),
            disc: orbit.volume_proxy,
            discrepancy: disc,
            raw_discrepancy: raw,
            support_hits: hits,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.disc).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.discrepancy).collect();
    let summary = EquidistSummary {
        forms: rows.len(),
        dropped_isotropic: family.len() - kept.len(),
        samples,
        spearman: spearman(&x, &y),
    };
    Ok((rows, summary))
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationSummary {
    pub s_grid: Vec<f64>,
    /// `max_f |centered(s)|` over the battery.
    pub envelope: Vec<f64>,
    /// Log-log slope of the envelope; absent with fewer than two positive
    /// values.
    pub slope: Option<f64>,
    pub support_hits: usize,
}

/// Centered autocorrelation envelope over a battery of maximal bumps at
/// independent walk points.
pub fn correlation_experiment(
    cfg: &ExperimentConfig,
    form: &TernaryForm,
    battery: usize,
    samples: usize,
    s_grid: &[f64],
    seed: u64,
) -> Result<CorrelationSummary> {
    let (orbit, sample) = sample_orbit(cfg, form, samples, sub_seed(seed, "corr-walk", 0))?;
    let centers = orbit_walk(&orbit, &cfg.walk(1000 * cfg.flows.thinning, sub_seed(seed, "corr-centers", 0)))?;
    let fs = build_battery(&BumpSpec::Battery(battery), &centers.points)?;
    let mut envelope = vec![0.0f64; s_grid.len()];
    for f in &fs {
        for (k, c) in autocorrelation(f, &sample, s_grid)?.iter().enumerate() {
            envelope[k] = envelope[k].max(c.centered.abs());
        }
    }
    let hits = sample.points.par_iter().filter(|p| fs.iter().any(|f| f.eval(p) != 0.0)).count();
    Ok(CorrelationSummary { s_grid: s_grid.to_vec(), slope: log_log_slope(s_grid, &envelope), envelope, support_hits: hits })
}

/// Fractions of points with `α₁ > R`.
pub fn cusp_tail(points: &[SpacePoint], grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&r| points.iter().filter(|p| p.alpha1() > r).count() as f64 / points.len().max(1) as f64).collect()
}
