//! Integrals against orbit measures and Haar measure, correlations and
//! almost-invariance defects.

use nalgebra::SMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{flow_u, OrbitSample};
use crate::haar::COVOLUME;
use crate::lattice::SpacePoint;
use crate::linalg::{decompose, matrix_exp, matrix_log_near_identity, LieVector, Mat3};
use crate::rng::stream;
use crate::stats::{batch_means, mean, pairwise_sum};

use super::profile::psi;
use super::testfn::{chart_jacobian_lower, unit_ball_volume_8, BumpFunction, TestFunction, SOBOLEV_DEGREE};

/// Batches used for batch-means standard errors.
pub const BATCHES: usize = 20;

const JACOBIAN_STEP: f64 = 1e-6;

fn eval_all(f: &TestFunction, points: &[SpacePoint]) -> Vec<f64> {
    points.par_iter().map(|p| f.eval(p)).collect()
}

/// Orbit-measure integral: sample mean with batch-means standard error.
pub fn mu_integral(f: &TestFunction, sample: &OrbitSample) -> Result<(f64, f64)> {
    if sample.points.is_empty() {
        return Err(Error::Invalid("empty orbit sample".into()));
    }
    if let Some(c) = f.constant_value() {
        return Ok((c, 0.0));
    }
    Ok(batch_means(&eval_all(f, &sample.points), BATCHES))
}

fn chart_group_element(x: &LieVector) -> Result<Mat3> {
    let (h, r) = decompose(x);
    Ok(matrix_exp(&r)? * matrix_exp(&h)?)
}

/// Density of Haar measure in the chart coordinates `(r, h) ↦ exp(r) exp(h)`,
/// from the left-trivialized derivative by central differences.
pub fn chart_jacobian(x: &LieVector) -> Result<f64> {
    let mut m = SMatrix::<f64, 8, 8>::zeros();
    for j in 0..8 {
        let e = LieVector::basis(j) * JACOBIAN_STEP;
        let gp = chart_group_element(&(*x + e))?;
        let gm = chart_group_element(&(*x - e))?;
        let inv = gm.inverse().ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
        let l = matrix_log_near_identity(&(inv * gp)).ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
        let col = LieVector::from_matrix(&l);
        for i in 0..8 {
            m[(i, j)] = col.coords[i] / (2.0 * JACOBIAN_STEP);
        }
    }
    Ok(m.determinant().abs())
}

fn uniform_direction(rng: &mut impl Rng) -> LieVector {
    let v = LieVector::new(std::array::from_fn(|_| StandardNormal.sample(rng)));
    v * (1.0 / v.norm())
}

/// `ψ(|x|/ρ)·J(x)` integrated over the chart ball, by stratified sampling of
/// the plateau ball and the transition shell. Returns (integral, stderr).
fn bump_chart_integral(b: &BumpFunction, count: usize, seed: u64) -> Result<(f64, f64)> {
    let rho = b.radius();
    let per = (count / 2).max(2);
    let omega = unit_ball_volume_8();
    let inner = 0.5f64.powi(8);
    let vol_plateau = omega * (rho / 2.0).powi(8);
    let vol_shell = omega * rho.powi(8) * (1.0 - inner);
    let draw = |stratum: &str| -> Result<Vec<f64>> {
        (0..per)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, stratum, i as u64);
                let u: f64 = rng.gen();
                let len = match stratum {
                    "plateau" => rho / 2.0 * u.powf(0.125),
                    _ => rho * (inner + u * (1.0 - inner)).powf(0.125),
                };
                let x = uniform_direction(&mut rng) * len;
                Ok(psi(len / rho) * chart_jacobian(&x)?)
            })
            .collect()
    };
    let plateau = draw("plateau")?;
    let shell = draw("shell")?;
    let (mp, sp) = batch_means(&plateau, BATCHES);
    let (ms, ss) = batch_means(&shell, BATCHES);
    let est = vol_plateau * mp + vol_shell * ms;
    let se = ((vol_plateau * sp).powi(2) + (vol_shell * ss).powi(2)).sqrt();
    Ok((est, se))
}

/// Haar-measure integral. A bump is integrated in the chart at its center,
/// where the chart is injective on the support; constants are exact.
pub fn haar_integral(f: &TestFunction, count: usize, seed: u64) -> Result<(f64, f64)> {
    haar_integral_part(f, count, seed, 0)
}

fn haar_integral_part(f: &TestFunction, count: usize, seed: u64, index: u64) -> Result<(f64, f64)> {
    match f {
        TestFunction::Constant(c) => Ok((*c, 0.0)),
        TestFunction::Bump(b) => {
            let s = crate::rng::task_key(seed, "bump") ^ index;
            let (v, se) = bump_chart_integral(b, count, s)?;
            Ok((v / COVOLUME, se / COVOLUME))
        }
        TestFunction::Combination(parts) => {
            let mut est = 0.0;
            let mut var = 0.0;
            for (k, (c, g)) in parts.iter().enumerate() {
                let (e, se) = haar_integral_part(g, count, seed, index.wrapping_mul(31).wrapping_add(k as u64 + 1))?;
                est += c * e;
                var += (c * se).powi(2);
            }
            Ok((est, var.sqrt()))
        }
    }
}

/// Analytic lower bound `ω₈ (ρ/2)⁸ J⁻(ρ) / vol(X)` for the Haar mass of a bump.
pub fn haar_lower_bound(b: &BumpFunction) -> f64 {
    let rho = b.radius();
    unit_ball_volume_8() * (rho / 2.0).powi(8) * chart_jacobian_lower(rho) / COVOLUME
}

/// One row of an autocorrelation scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub s: f64,
    /// Mean of `f(u_s y) f(y)` over the sample.
    pub raw: f64,
    /// `raw − (mean f)²`.
    pub centered: f64,
}

pub fn autocorrelation(f: &TestFunction, sample: &OrbitSample, s_grid: &[f64]) -> Result<Vec<Correlation>> {
    if sample.points.is_empty() {
        return Err(Error::Invalid("empty orbit sample".into()));
    }
    let base = eval_all(f, &sample.points);
    let m = mean(&base);
    let n = base.len() as f64;
    let support: Vec<usize> = (0..base.len()).filter(|&i| base[i] != 0.0).collect();
    s_grid
        .iter()
        .map(|&s| {
            let u = flow_u(s);
            let prods: Vec<f64> = support
                .par_iter()
                .map(|&i| Ok(f.eval(&sample.points[i].translate(&u)?) * base[i]))
                .collect::<Result<_>>()?;
            let raw = pairwise_sum(&prods) / n;
            Ok(Correlation { s, raw, centered: raw - m * m })
        })
        .collect()
}

/// Per-function result of an almost-invariance measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceEntry {
    /// `|σ̂(g·f) − σ̂(f)| / 𝒮₂₀(f)`.
    pub defect: f64,
    /// `3 · stderr / 𝒮₂₀(f)` of the paired difference.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub entries: Vec<InvarianceEntry>,
    pub worst_defect: f64,
    pub passed: bool,
}

/// Defect of the empirical measure on `points` under `g`, with
/// `(g·f)(x) = f(g⁻¹x)`. Requires `‖g‖ ≤ 2` in the group norm.
pub fn almost_invariance(fs: &[TestFunction], g: &Mat3, points: &[SpacePoint]) -> Result<InvarianceReport> {
    if points.is_empty() {
        return Err(Error::Invalid("empty sample".into()));
    }
    let norm = g.group_norm();
    if !(norm <= 2.0) {
        return Err(Error::Invalid(format!("group norm {norm} exceeds 2")));
    }
    let ginv = g.inverse().ok_or(Error::NotUnimodular { residual: 1.0 })?;
    let moved: Vec<SpacePoint> = points.par_iter().map(|p| p.translate(&ginv)).collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(fs.len());
    for f in fs {
        let s = f.sobolev_bound(SOBOLEV_DEGREE)?;
        if f.constant_value().is_some() || s == 0.0 {
            entries.push(InvarianceEntry { defect: 0.0, threshold: 0.0 });
            continue;
        }
        let a = eval_all(f, &moved);
        let b = eval_all(f, points);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let (m, se) = batch_means(&diff, BATCHES);
        entries.push(InvarianceEntry { defect: m.abs() / s, threshold: 3.0 * se / s });
    }
    let worst_defect = entries.iter().map(|e| e.defect).fold(0.0, f64::max);
    let passed = entries.iter().all(|e| e.defect <= e.threshold);
    Ok(InvarianceReport { entries, worst_defect, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{orbit_from_form, orbit_walk, WalkSpec};
    use crate::form::TernaryForm;
    use crate::lattice::chart_point;

    #[test]
    fn jacobian_is_one_at_origin_and_within_bounds() {
        assert!((chart_jacobian(&LieVector::ZERO).unwrap() - 1.0).abs() < 1e-8);
        let mut rng = stream(3, "jac", 0);
        for rho in [0.01, 0.03, 0.05] {
            for _ in 0..20 {
                let x = uniform_direction(&mut rng) * (rho * rng.gen::<f64>());
                let j = chart_jacobian(&x).unwrap();
                assert!(j >= chart_jacobian_lower(rho) && j <= super::super::testfn::chart_jacobian_upper(rho), "{j}");
            }
        }
    }

    #[test]
    fn jacobian_matches_volume_of_small_image_box() {
        // independent route: the chart image of a small coordinate cube,
        // measured in the left-trivialized coordinates at its corner
        let x = LieVector::new([0.01, -0.02, 0.005, 0.015, 0.0, -0.01, 0.02, 0.01]);
        let h = 1e-4;
        let g0 = chart_group_element(&x).unwrap();
        let g0i = g0.inverse().unwrap();
        let mut m = SMatrix::<f64, 8, 8>::zeros();
        for j in 0..8 {
            let g = chart_group_element(&(x + LieVector::basis(j) * h)).unwrap();
            let l = LieVector::from_matrix(&matrix_log_near_identity(&(g0i * g)).unwrap());
            for i in 0..8 {
                m[(i, j)] = l.coords[i] / h;
            }
        }
        let forward = m.determinant().abs();
        assert!((forward - chart_jacobian(&x).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn constants_are_exact() {
        let one = TestFunction::Constant(1.0);
        assert_eq!(haar_integral(&one, 10, 0).unwrap(), (1.0, 0.0));
        let orbit = orbit_from_form(&TernaryForm::diagonal(1, 1, -3).unwrap()).unwrap();
        let sample = orbit_walk(&orbit, &WalkSpec { steps: 200, burn_in: 20, ..WalkSpec::default() }).unwrap();
        assert_eq!(mu_integral(&one, &sample).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn haar_bump_mass_scaling_and_lower_bound() {
        let z = SpacePoint::new(Mat3::from_rows([[1.0, 0.3, 0.1], [0.0, 1.0, 0.2], [0.0, 0.0, 1.0]])).unwrap();
        let b1 = BumpFunction::new(z, 0.02).unwrap();
        let b2 = BumpFunction::new(z, 0.01).unwrap();
        let (m1, s1) = haar_integral(&b1.clone().into(), 4000, 1).unwrap();
        let (m2, _) = haar_integral(&b2.clone().into(), 4000, 2).unwrap();
        assert!(s1 < 0.05 * m1);
        let ratio = m2 / m1;
        let base = 2f64.powi(-8);
        assert!(ratio >= base / 4.0 && ratio <= 4.0 * base, "{ratio}");
        assert!(m1 >= haar_lower_bound(&b1));
        // against the flat-chart value ∫ψ(|x|/ρ)dx / vol(X)
        let flat = {
            let n = 4000;
            let vals: Vec<f64> = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) / n as f64;
                    8.0 * t.powi(7) * psi(t)
                })
                .collect();
            unit_ball_volume_8() * 0.02f64.powi(8) * mean(&vals) / COVOLUME
        };
        assert!((m1 / flat - 1.0).abs() < 0.1, "{m1} {flat}");
    }

    #[test]
    fn correlation_at_zero_is_mean_square() {
        let orbit = orbit_from_form(&TernaryForm::diagonal(1, 1, -3).unwrap()).unwrap();
        let sample = orbit_walk(&orbit, &WalkSpec { steps: 2000, burn_in: 100, ..WalkSpec::default() }).unwrap();
        let f = TestFunction::Bump(BumpFunction::widest(sample.points[3]));
        let c = autocorrelation(&f, &sample, &[0.0]).unwrap();
        let sq: Vec<f64> = sample.points.iter().map(|p| f.eval(p).powi(2)).collect();
        assert!((c[0].raw - mean(&sq)).abs() < 1e-12);
    }

    #[test]
    fn identity_has_no_defect() {
        let pts = crate::haar::haar_sample(50, 4);
        let fs = vec![TestFunction::Bump(BumpFunction::widest(pts[0])), TestFunction::Constant(2.0)];
        let r = almost_invariance(&fs, &Mat3::identity(), &pts).unwrap();
        assert_eq!(r.worst_defect, 0.0);
        assert!(r.passed);
        assert!(almost_invariance(&fs, &crate::flows::flow_a(1.0), &pts).is_err());
    }

    #[test]
    fn chart_point_of_sample_is_inside_bump() {
        let z = SpacePoint::standard();
        let b = BumpFunction::new(z, 0.03).unwrap();
        let mut rng = stream(9, "inside", 0);
        for _ in 0..20 {
            let x = uniform_direction(&mut rng) * 0.012;
            let (h, r) = decompose(&x);
            let p = chart_point(&z, &r, &h).unwrap();
            assert_eq!(b.eval(&p), 1.0);
        }
    }
}
