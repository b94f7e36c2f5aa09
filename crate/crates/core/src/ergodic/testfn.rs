//! Test functions on X and their Sobolev bounds.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::haar::COVOLUME;
use crate::lattice::{delta0, local_coords, SpacePoint};

use super::profile::{derivative_sup, psi, psi_lipschitz, telephone};

/// Distortion of the chart coordinates against the basis vector fields of
/// 𝔰𝔩₃ on a chart ball of admissible radius.
pub const KAPPA: f64 = 2.0;

/// Default Sobolev degree.
pub const SOBOLEV_DEGREE: u32 = 20;

/// Height above which bumps are refused.
pub const MAX_CENTER_ALPHA1: f64 = 100.0;

/// Volume of the unit ball in ℝ⁸.
pub fn unit_ball_volume_8() -> f64 {
    PI.powi(4) / 24.0
}

/// Upper bound for the Jacobian of the chart `(r, h) ↦ exp(r) exp(h) z` on
/// the ball of radius `rho`.
pub fn chart_jacobian_upper(rho: f64) -> f64 {
    (32.0 * rho).exp()
}

/// Lower bound for the same Jacobian.
pub fn chart_jacobian_lower(rho: f64) -> f64 {
    (-32.0 * rho).exp()
}

/// Smooth bump `f(x) = ψ(dist(x, center)/ρ)`, distance taken in the chart at
/// the center.
#[derive(Clone, Debug)]
pub struct BumpFunction {
    center: SpacePoint,
    radius: f64,
}

impl BumpFunction {
    pub fn new(center: SpacePoint, radius: f64) -> Result<Self> {
        let bound = delta0(&center);
        if !(radius > 0.0 && radius <= bound) {
            return Err(Error::ChartRadius { delta: radius, bound });
        }
        Ok(BumpFunction { center, radius })
    }

    /// Bump with the largest admissible radius.
    pub fn widest(center: SpacePoint) -> Self {
        let radius = delta0(&center);
        BumpFunction { center, radius }
    }

    pub fn center(&self) -> &SpacePoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Chart distance to the center, `None` beyond the radius.
    pub fn distance(&self, x: &SpacePoint) -> Option<f64> {
        let (r, h) = local_coords(&self.center, x, self.radius).ok()??;
        let d = (r.norm().powi(2) + h.norm().powi(2)).sqrt();
        (d <= self.radius).then_some(d)
    }

    pub fn eval(&self, x: &SpacePoint) -> f64 {
        self.distance(x).map_or(0.0, |d| psi(d / self.radius))
    }

    pub fn sobolev_bound(&self, d: u32) -> Result<f64> {
        let a = self.center.alpha1();
        if a > MAX_CENTER_ALPHA1 {
            return Err(Error::CuspOverflow { alpha1: a });
        }
        let v = log_sobolev_bound(a, self.radius, d).exp();
        if !v.is_finite() {
            return Err(Error::CuspOverflow { alpha1: a });
        }
        Ok(v)
    }
}

/// `ln` of the analytic bound
/// `W^d · m(supp)^{1/2} · (Σ_{k≤d} 8^k (T_k P_k (2κ/ρ)^k)²)^{1/2}` with
/// `W = max(1, α₁(center) e^{2ρ})`, `m(supp) ≤ ω₈ ρ⁸ J⁺(ρ) / vol(X)`, `T_k`
/// the telephone numbers and `P_k` the profile derivative sups. There are
/// `8^k` monomials of degree `k`; each derivative of `Ψ(dist²/ρ²)` costs at
/// most `2κ/ρ` per order, and Faà di Bruno over a quadratic inner function
/// has `T_k` terms.
pub fn log_sobolev_bound(alpha1_center: f64, rho: f64, d: u32) -> f64 {
    let w = (alpha1_center * (2.0 * rho).exp()).max(1.0);
    let support = unit_ball_volume_8() * rho.powi(8) * chart_jacobian_upper(rho) / COVOLUME;
    let terms: Vec<f64> = (0..=d as usize)
        .map(|k| {
            let lt = (k as f64) * 8f64.ln() / 2.0
                + telephone(k).ln()
                + derivative_sup(k).ln()
                + (k as f64) * (2.0 * KAPPA / rho).ln();
            2.0 * lt
        })
        .collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    d as f64 * w.ln() + 0.5 * support.ln() + 0.5 * lse
}

/// Functions that the estimators accept: constants, bumps and finite linear
/// combinations.
#[derive(Clone, Debug)]
pub enum TestFunction {
    Constant(f64),
    Bump(BumpFunction),
    Combination(Vec<(f64, TestFunction)>),
}

impl TestFunction {
    pub fn eval(&self, x: &SpacePoint) -> f64 {
        match self {
            TestFunction::Constant(c) => *c,
            TestFunction::Bump(b) => b.eval(x),
            TestFunction::Combination(parts) => parts.iter().map(|(c, f)| c * f.eval(x)).sum(),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            TestFunction::Constant(c) => Some(*c),
            TestFunction::Bump(_) => None,
            TestFunction::Combination(parts) => {
                let mut s = 0.0;
                for (c, f) in parts {
                    s += c * f.constant_value()?;
                }
                Some(s)
            }
        }
    }

    /// Upper bound for 𝒮_d. For a constant the derivative terms vanish and
    /// the bound is `|c|` (the weighted L² norm of a constant diverges in the
    /// cusp, so only the unweighted part is kept).
    pub fn sobolev_bound(&self, d: u32) -> Result<f64> {
        match self {
            TestFunction::Constant(c) => Ok(c.abs()),
            TestFunction::Bump(b) => b.sobolev_bound(d),
            TestFunction::Combination(parts) => {
                let mut s = 0.0;
                for (c, f) in parts {
                    s += c.abs() * f.sobolev_bound(d)?;
                }
                Ok(s)
            }
        }
    }

    /// `sup |f|`.
    pub fn sup(&self) -> f64 {
        match self {
            TestFunction::Constant(c) => c.abs(),
            TestFunction::Bump(_) => 1.0,
            TestFunction::Combination(parts) => parts.iter().map(|(c, f)| c.abs() * f.sup()).sum(),
        }
    }

    /// Lipschitz constant against displacement `exp(X)·x` with `‖X‖` as the
    /// distance.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TestFunction::Constant(_) => 0.0,
            TestFunction::Bump(b) => psi_lipschitz() * (2.0 * b.radius).exp() / b.radius,
            TestFunction::Combination(parts) => parts.iter().map(|(c, f)| c.abs() * f.lipschitz()).sum(),
        }
    }

    /// Bound for the `k`-th derivative along a curve moving at unit speed.
    pub fn derivative_bound(&self, k: usize) -> f64 {
        match self {
            TestFunction::Constant(_) => 0.0,
            TestFunction::Bump(b) => telephone(k) * derivative_sup(k) * (2.0 * KAPPA / b.radius).powi(k as i32),
            TestFunction::Combination(parts) => parts.iter().map(|(c, f)| c.abs() * f.derivative_bound(k)).sum(),
        }
    }

    /// Smallest bump radius involved, if any.
    pub fn min_radius(&self) -> Option<f64> {
        match self {
            TestFunction::Constant(_) => None,
            TestFunction::Bump(b) => Some(b.radius),
            TestFunction::Combination(parts) => {
                parts.iter().filter_map(|(_, f)| f.min_radius()).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.min(r))))
            }
        }
    }
}

impl From<BumpFunction> for TestFunction {
    fn from(b: BumpFunction) -> Self {
        TestFunction::Bump(b)
    }
}

/// Bumps of maximal radius centered at `size` evenly spaced entries of
/// `points`.
pub fn battery_from_points(points: &[SpacePoint], size: usize) -> Vec<TestFunction> {
    if points.is_empty() {
        return Vec::new();
    }
    (0..size)
        .map(|i| {
            let idx = (i * points.len()) / size.max(1);
            TestFunction::Bump(BumpFunction::widest(points[idx.min(points.len() - 1)]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::chart_point;
    use crate::linalg::LieVector;

    #[test]
    fn bump_values() {
        let z = SpacePoint::standard();
        let f = BumpFunction::new(z, 0.04).unwrap();
        assert_eq!(f.eval(&z), 1.0);
        let r = LieVector::e13() * (0.9 * 0.04);
        let x = chart_point(&z, &r, &LieVector::ZERO).unwrap();
        let v = f.eval(&x);
        assert!(v > 0.0 && v < 1.0);
        let far = chart_point(&z, &(LieVector::e13() * 0.045), &LieVector::ZERO).unwrap();
        assert_eq!(f.eval(&far), 0.0);
        assert!(BumpFunction::new(z, 0.2).is_err());
    }

    #[test]
    fn bump_profile_on_radial_grid() {
        let z = SpacePoint::standard();
        let rho = 0.04;
        let f = BumpFunction::new(z, rho).unwrap();
        let dir = (LieVector::basis(4) + LieVector::basis(1) * 0.5) * (1.0 / 1.25f64.sqrt());
        let (h, r) = crate::linalg::decompose(&dir);
        for i in 0..=60 {
            let t = i as f64 / 50.0 * rho;
            let x = chart_point(&z, &(r * t), &(h * t)).unwrap();
            let v = f.eval(&x);
            assert!((0.0..=1.0).contains(&v));
            if t <= rho / 2.0 * (1.0 - 1e-9) {
                assert_eq!(v, 1.0);
            }
            if t > rho * (1.0 + 1e-9) {
                assert_eq!(v, 0.0);
            }
            if t > rho / 2.0 * 1.001 && t < rho * 0.999 {
                assert!((v - psi(t / rho)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sobolev_bound_scaling() {
        let d = 20;
        let b1 = log_sobolev_bound(1.0, 0.01, d);
        let b2 = log_sobolev_bound(1.0, 0.005, d);
        assert!(b2 - b1 <= d as f64 * 2f64.ln());
        for rho in [0.02, 0.01, 0.005, 0.001] {
            for d in 1..20 {
                assert!(log_sobolev_bound(1.3, rho, d + 1) >= log_sobolev_bound(1.3, rho, d));
            }
        }
        // ρ = ε^{1/3}: growth rate in ln(1/ε) between ε = 1e-3 and 1e-4
        let slope = (log_sobolev_bound(1.0, 1e-4f64.cbrt(), 20) - log_sobolev_bound(1.0, 1e-3f64.cbrt(), 20))
            / (1e4f64.ln() - 1e3f64.ln());
        assert!(slope <= 20.0 / 3.0, "{slope}");
        assert_eq!(TestFunction::Constant(1.0).sobolev_bound(20).unwrap(), 1.0);
    }
}
