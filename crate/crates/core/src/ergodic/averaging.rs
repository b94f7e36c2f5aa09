//! The averaging operator `D_t^f` and the genericity test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{flow_a, flow_u};
use crate::lattice::SpacePoint;

use super::testfn::{TestFunction, KAPPA, SOBOLEV_DEGREE};

/// Gauss–Legendre order used on each panel.
pub const GL_ORDER: usize = 8;

/// Default number of quadrature nodes before path-length adaptation.
pub const DEFAULT_QUAD_POINTS: usize = 512;

/// Upper limit on panels per average.
pub const MAX_PANELS: usize = 1 << 18;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// One evaluation of `D_t^f(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub t: f64,
    /// `e^{7t/24} ∫₀^{e^{−7t/24}} f(a_t u_s x) ds`.
    pub raw_average: f64,
    pub mu_estimate: f64,
    #[serde(rename = "D_value")]
    pub d_value: f64,
    pub quadrature_error_bound: f64,
}

/// Length of the `s`-window at time `t`.
pub fn window(t: f64) -> f64 {
    (-7.0 * t / 24.0).exp()
}

/// Speed of `s ↦ a_t u_s x` in the chart metric: moving `s` by `ds` is the
/// left translation by `u_{e^t ds}`, whose logarithm has norm `√2 e^t ds`.
fn path_speed(t: f64) -> f64 {
    std::f64::consts::SQRT_2 * t.exp()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Panels used at time `t` for a battery whose smallest radius is `rho`.
pub fn panel_count(t: f64, rho: Option<f64>, quad_points: usize) -> usize {
    let base = (quad_points / GL_ORDER).max(2);
    let adaptive = match rho {
        Some(r) => (window(t) * path_speed(t) * 2.0 * KAPPA * (2.0 * r).exp() / r).ceil() as usize,
        None => 0,
    };
    base.max(adaptive).min(MAX_PANELS)
}

/// Bound on `|quadrature − integral| / window` for one function: the smaller
/// of the Lipschitz bound (rule and integral both average `f` over each panel)
/// and the Gauss–Legendre remainder with the derivative bound of order `2n`.
fn error_bound(f: &TestFunction, t: f64, h: f64) -> f64 {
    if f.constant_value().is_some() {
        return 0.0;
    }
    let v = path_speed(t);
    let lip = f.lipschitz() * v * h;
    let n = GL_ORDER;
    let rho = f.min_radius().unwrap_or(1.0);
    let scale = (2.0 * rho).exp() * v;
    let remainder = h.powi(2 * n as i32) * factorial(n).powi(4) / ((2 * n + 1) as f64 * factorial(2 * n).powi(3))
        * f.derivative_bound(2 * n)
        * scale.powi(2 * n as i32);
    lip.min(remainder).min(2.0 * f.sup())
}

/// `D_t^f(x)` for several functions sharing the quadrature nodes.
pub fn birkhoff_battery(
    fs: &[TestFunction],
    x: &SpacePoint,
    t: f64,
    mu_estimates: &[f64],
    quad_points: usize,
) -> Result<Vec<AveragingReport>> {
    if !(t >= 1.0) {
        return Err(Error::Invalid(format!("t = {t} must be at least 1")));
    }
    if quad_points < 16 {
        return Err(Error::Invalid("quad_points must be at least 16".into()));
    }
    if fs.len() != mu_estimates.len() {
        return Err(Error::Invalid("one mu estimate per function is required".into()));
    }
    let len = window(t);
    let rho = fs.iter().filter_map(|f| f.min_radius()).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.min(r))));
    let panels = panel_count(t, rho, quad_points);
    let h = len / panels as f64;
    let rule = gauss_legendre(GL_ORDER);
    let needs_points = fs.iter().any(|f| f.constant_value().is_none());
    let a = flow_a(t);
    let sums: Vec<Vec<f64>> = if needs_points {
        (0..panels)
            .into_par_iter()
            .map(|p| {
                let mut acc = vec![0.0; fs.len()];
                for (node, w) in &rule {
                    let s = h * (p as f64 + 0.5 * (node + 1.0));
                    let y = x.translate(&(a * flow_u(s)))?;
                    for (k, f) in fs.iter().enumerate() {
                        acc[k] += 0.5 * w * f.eval(&y);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut out = Vec::with_capacity(fs.len());
    for (k, f) in fs.iter().enumerate() {
        let raw = match f.constant_value() {
            Some(c) => c,
            None => {
                let per_panel: Vec<f64> = sums.iter().map(|s| s[k]).collect();
                crate::stats::pairwise_sum(&per_panel) / panels as f64
            }
        };
        out.push(AveragingReport {
            t,
            raw_average: raw,
            mu_estimate: mu_estimates[k],
            d_value: raw - mu_estimates[k],
            quadrature_error_bound: error_bound(f, t, h),
        });
    }
    Ok(out)
}

pub fn birkhoff_d(f: &TestFunction, x: &SpacePoint, t: f64, mu_estimate: f64, quad_points: usize) -> Result<AveragingReport> {
    Ok(birkhoff_battery(std::slice::from_ref(f), x, t, &[mu_estimate], quad_points)?.remove(0))
}

/// One `(f, n)` cell of the genericity test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericityEntry {
    pub function: usize,
    pub n: u32,
    #[serde(rename = "D_value")]
    pub d_value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub entries: Vec<GenericityEntry>,
    pub passed: bool,
}

/// Checks `|D_n^f(x)| ≤ factor · e^{−n/8} 𝒮₂₀(f)` for integers
/// `ceil(t) ≤ n ≤ n_max`.
pub fn genericity_test_scaled(
    x: &SpacePoint,
    t: f64,
    fs: &[TestFunction],
    mu_estimates: &[f64],
    n_max: u32,
    factor: f64,
) -> Result<GenericityReport> {
    let n_min = t.ceil() as u32;
    if n_max < n_min {
        return Err(Error::Invalid(format!("n_max = {n_max} is below ceil(t) = {n_min}")));
    }
    let bounds: Vec<f64> = fs.iter().map(|f| f.sobolev_bound(SOBOLEV_DEGREE)).collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for n in n_min..=n_max {
        let reports = birkhoff_battery(fs, x, n as f64, mu_estimates, DEFAULT_QUAD_POINTS)?;
        for (k, r) in reports.iter().enumerate() {
            let tolerance = factor * (-(n as f64) / 8.0).exp() * bounds[k];
            entries.push(GenericityEntry { function: k, n, d_value: r.d_value, tolerance, pass: r.d_value.abs() <= tolerance });
        }
    }
    let passed = entries.iter().all(|e| e.pass);
    Ok(GenericityReport { entries, passed })
}

pub fn genericity_test(
    x: &SpacePoint,
    t: f64,
    fs: &[TestFunction],
    mu_estimates: &[f64],
    n_max: u32,
) -> Result<GenericityReport> {
    genericity_test_scaled(x, t, fs, mu_estimates, n_max, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::testfn::BumpFunction;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let rule = gauss_legendre(GL_ORDER);
        for k in 0..(2 * GL_ORDER) {
            let q: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
            assert!((q - exact).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn constants_and_disjoint_bumps() {
        let x = SpacePoint::standard();
        let r = birkhoff_d(&TestFunction::Constant(0.7), &x, 2.0, 0.7, 64).unwrap();
        assert_eq!(r.d_value, 0.0);
        // a deep-cusp-free center far from the path
        let c = SpacePoint::new(crate::linalg::Mat3::from_rows([[1.0, 0.5, 0.3], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]]))
            .unwrap()
            .translate(&flow_a(0.4))
            .unwrap();
        let f = TestFunction::Bump(BumpFunction::widest(c));
        let r = birkhoff_d(&f, &x, 1.0, 0.01, 64).unwrap();
        assert_eq!(r.raw_average, 0.0);
        assert_eq!(r.d_value, -0.01);
    }

    #[test]
    fn refinement_stays_within_bound() {
        // bump centered on the path at s = window/2
        let x = SpacePoint::new(crate::linalg::Mat3::from_rows([[1.0, 0.2, 0.1], [0.0, 1.0, -0.3], [0.0, 0.0, 1.0]]))
            .unwrap();
        let t = 2.0;
        let c = x.translate(&(flow_a(t) * flow_u(window(t) / 2.0))).unwrap();
        let f = TestFunction::Bump(BumpFunction::widest(c));
        let a = birkhoff_d(&f, &x, t, 0.0, 512).unwrap();
        let b = birkhoff_d(&f, &x, t, 0.0, 1024 * 64).unwrap();
        assert!(a.raw_average > 0.0);
        assert!((a.raw_average - b.raw_average).abs() <= a.quadrature_error_bound + b.quadrature_error_bound);
    }
}
