//! Points of the space of unimodular lattices, the height α₁, compact parts
//! and the local chart `(r, h) ↦ exp(r) exp(h) z`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{decompose, matrix_exp, matrix_log_near_identity, LieVector, Mat3};
use crate::reduction::{canonical_basis, enumerate, int_det};

/// Tolerance on `|det − 1|` for a basis to represent a unimodular lattice.
pub const DET_TOL: f64 = 1e-8;

/// Constant in the chart radius `delta0(z) = C_INJ · α₁(z)⁻²`.
pub const C_INJ: f64 = 0.05;

/// Entrywise tolerance used when comparing points.
pub const POINT_TOL: f64 = 1e-8;

/// A lattice `gℤ³` with `det g = 1`.
///
/// The canonical reduced representative and the height are computed once at
/// construction.
#[derive(Clone, Copy)]
pub struct SpacePoint {
    basis: Mat3,
    reduced: Mat3,
    shortest: f64,
}

impl SpacePoint {
    pub fn new(basis: Mat3) -> Result<Self> {
        if !basis.is_finite() {
            return Err(Error::Invalid("basis has non-finite entries".into()));
        }
        let residual = (basis.det() - 1.0).abs();
        if !(residual <= DET_TOL) {
            return Err(Error::NotUnimodular { residual });
        }
        let (reduced, _) = canonical_basis(&basis)?;
        let b1 = reduced.column(0);
        let shortest = (b1[0] * b1[0] + b1[1] * b1[1] + b1[2] * b1[2]).sqrt();
        Ok(SpacePoint { basis, reduced, shortest })
    }

    /// The standard lattice ℤ³.
    pub fn standard() -> Self {
        SpacePoint::new(Mat3::identity()).expect("identity is unimodular")
    }

    pub fn basis(&self) -> &Mat3 {
        &self.basis
    }

    pub fn reduced(&self) -> &Mat3 {
        &self.reduced
    }

    /// Reciprocal of the shortest nonzero vector length.
    pub fn alpha1(&self) -> f64 {
        1.0 / self.shortest
    }

    pub fn shortest_length(&self) -> f64 {
        self.shortest
    }

    /// The point `g·x`, computed from the reduced representative.
    pub fn translate(&self, g: &Mat3) -> Result<SpacePoint> {
        SpacePoint::new(g * &self.reduced)
    }

    /// Same lattice: `reduced_x⁻¹ · reduced_y` is an integer matrix within
    /// `POINT_TOL`.
    pub fn same_lattice(&self, other: &SpacePoint) -> bool {
        if (self.reduced - other.reduced).max_abs() <= POINT_TOL {
            return true;
        }
        match self.reduced.inverse() {
            Some(inv) => {
                let gamma = inv * other.reduced;
                gamma.rows().iter().flatten().all(|x| (x - x.round()).abs() <= POINT_TOL)
            }
            None => false,
        }
    }

    /// Nine floats, row-major, 17 significant digits.
    pub fn to_text(&self) -> String {
        self.basis
            .rows()
            .iter()
            .flatten()
            .map(|x| format!("{x:.16e}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl PartialEq for SpacePoint {
    fn eq(&self, other: &Self) -> bool {
        self.same_lattice(other)
    }
}

impl fmt::Debug for SpacePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpacePoint(alpha1={:.6}, reduced={:?})", self.alpha1(), self.reduced)
    }
}

impl fmt::Display for SpacePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for SpacePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Invalid(format!("bad number {t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != 9 {
            return Err(Error::Invalid(format!("expected 9 numbers, found {}", values.len())));
        }
        let rows = [
            [values[0], values[1], values[2]],
            [values[3], values[4], values[5]],
            [values[6], values[7], values[8]],
        ];
        SpacePoint::new(Mat3::from_rows(rows))
    }
}

/// Parses one point per nonblank line; `#` starts a comment.
pub fn parse_points(text: &str) -> Result<Vec<SpacePoint>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let p = line.parse::<SpacePoint>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.push(p);
    }
    Ok(out)
}

pub fn alpha1(x: &SpacePoint) -> f64 {
    x.alpha1()
}

pub fn reduce(x: &SpacePoint) -> Mat3 {
    x.reduced
}

/// Membership in the compact part `{α₁ ≤ R}`. `R = ∞` accepts every point.
pub fn in_compact(x: &SpacePoint, r: f64) -> bool {
    x.alpha1() <= r
}

/// Chart radius at `z`.
///
/// The closed form `C_INJ · α₁(z)⁻²` is capped by a certified radius: two
/// chart points that coincide in X differ by `g γ g⁻¹` with `γ ≠ I`, some
/// column of which moves a reduced basis vector `w` by a nonzero lattice
/// vector, so `‖gγg⁻¹ − I‖ ≥ λ₁ / max|w|`, while chart displacements stay
/// within `e^{4δ} − 1`.
pub fn delta0(z: &SpacePoint) -> f64 {
    let closed = C_INJ * z.alpha1().powi(-2);
    let longest = (0..3)
        .map(|j| {
            let c = z.reduced.column(j);
            (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
        })
        .fold(0.0, f64::max);
    let certified = (z.shortest / longest).ln_1p() / 4.0;
    closed.min(certified)
}

/// Chart coordinates of `x` around `z`: `(r, h)` with `r ∈ 𝔯`, `h ∈ 𝔥`,
/// `‖r‖, ‖h‖ ≤ delta` and `x = exp(r) exp(h) z`, or `None` when `x` is not in
/// that box.
pub fn local_coords(z: &SpacePoint, x: &SpacePoint, delta: f64) -> Result<Option<(LieVector, LieVector)>> {
    let bound = delta0(z);
    if !(delta <= bound) {
        return Err(Error::ChartRadius { delta, bound });
    }
    let eps = (2.0 * delta).exp_m1();
    let ratio = x.shortest / z.shortest;
    if ratio < (1.0 - eps) * (1.0 - 1e-12) || ratio > (1.0 + eps) * (1.0 + 1e-12) {
        return Ok(None);
    }
    let w = &z.reduced;
    let w_inv = w.inverse().ok_or(Error::DegenerateForm)?;
    let mut per_column = Vec::with_capacity(3);
    for j in 0..3 {
        let c = w.column(j);
        let len = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let found = enumerate(&x.reduced, c, eps * len * (1.0 + 1e-9) + 1e-14)?;
        if found.is_empty() {
            return Ok(None);
        }
        per_column.push(found);
    }
    let mut best: Option<(f64, LieVector, LieVector)> = None;
    for a in &per_column[0] {
        for b in &per_column[1] {
            for c in &per_column[2] {
                let coeffs = [
                    [a.coeffs[0], b.coeffs[0], c.coeffs[0]],
                    [a.coeffs[1], b.coeffs[1], c.coeffs[1]],
                    [a.coeffs[2], b.coeffs[2], c.coeffs[2]],
                ];
                if int_det(&coeffs) != 1 {
                    continue;
                }
                let v = Mat3::from_columns([a.vector, b.vector, c.vector]);
                let m = v * w_inv;
                if let Some((r, h)) = solve_chart(&m) {
                    let (nr, nh) = (r.norm(), h.norm());
                    if nr <= delta * (1.0 + 1e-9) && nh <= delta * (1.0 + 1e-9) {
                        let size = nr * nr + nh * nh;
                        if best.as_ref().is_none_or(|(s, _, _)| size < *s) {
                            best = Some((size, r, h));
                        }
                    }
                }
            }
        }
    }
    Ok(best.map(|(_, r, h)| (r, h)))
}

/// Solves `m = exp(r) exp(h)` near the identity by fixed-point refinement.
pub fn solve_chart(m: &Mat3) -> Option<(LieVector, LieVector)> {
    let log = matrix_log_near_identity(m)?;
    let (mut h, mut r) = decompose(&LieVector::from_matrix(&log));
    for _ in 0..100 {
        let approx = matrix_exp(&r).ok()? * matrix_exp(&h).ok()?;
        let err = m * &approx.inverse()?;
        let dl = LieVector::from_matrix(&matrix_log_near_identity(&err)?);
        let (dh, dr) = decompose(&dl);
        r = r + dr;
        h = h + dh;
        if dl.norm() <= 1e-15 * (1.0 + r.norm() + h.norm()) {
            break;
        }
    }
    Some((r, h))
}

/// The chart map `(r, h) ↦ exp(r) exp(h) z`.
pub fn chart_point(z: &SpacePoint, r: &LieVector, h: &LieVector) -> Result<SpacePoint> {
    let m = matrix_exp(r)? * matrix_exp(h)?;
    z.translate(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LieVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn a_t(t: f64) -> Mat3 {
        Mat3::diag([t.exp(), 1.0, (-t).exp()])
    }

    #[test]
    fn alpha1_examples() {
        assert!((SpacePoint::standard().alpha1() - 1.0).abs() < 1e-15);
        let x = SpacePoint::new(a_t(1.0)).unwrap();
        assert!((x.alpha1() - std::f64::consts::E).abs() < 1e-12);
        let x = SpacePoint::new(Mat3::diag([2.0, 1.0, 0.5])).unwrap();
        assert!((x.alpha1() - 2.0).abs() < 1e-15);
        for t in [0.5, -0.5, 1.0, -1.0, 2.0, -2.0] {
            let x = SpacePoint::new(a_t(t)).unwrap();
            let t: f64 = t;
            assert!((x.alpha1() - t.abs().exp()).abs() < 1e-9 * t.abs().exp());
        }
    }

    #[test]
    fn reduce_examples() {
        let b = Mat3::from_columns([[1.0, 0.0, 0.0], [10.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let x = SpacePoint::new(b).unwrap();
        assert!((reduce(&x) - Mat3::identity()).norm() < 1e-12);
        let again = SpacePoint::new(reduce(&x)).unwrap();
        assert!((reduce(&again) - reduce(&x)).norm() < 1e-15);
    }

    #[test]
    fn compact_part_examples() {
        assert!(in_compact(&SpacePoint::standard(), 1.0));
        assert!(!in_compact(&SpacePoint::new(a_t(3.0)).unwrap(), 2.0));
        assert!(in_compact(&SpacePoint::new(a_t(3.0)).unwrap(), f64::INFINITY));
    }

    #[test]
    fn rejects_non_unimodular() {
        assert!(matches!(SpacePoint::new(Mat3::diag([2.0, 1.0, 1.0])), Err(Error::NotUnimodular { .. })));
    }

    #[test]
    fn text_round_trip() {
        let x = SpacePoint::new(Mat3::from_rows([[1.0, 0.3, -0.2], [0.0, 1.0, 0.7], [0.0, 0.0, 1.0]])).unwrap();
        let y: SpacePoint = x.to_text().parse().unwrap();
        assert_eq!(x.basis(), y.basis());
        let err = parse_points("1 0 0 0 1 0 0 0 1\n1 2 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn local_coords_examples() {
        let z = SpacePoint::standard();
        let (r, h) = local_coords(&z, &z, 0.01).unwrap().unwrap();
        assert!(r.norm() < 1e-14 && h.norm() < 1e-14);

        let r0 = LieVector::e13() * 0.001;
        let x = z.translate(&matrix_exp(&r0).unwrap()).unwrap();
        let (r, h) = local_coords(&z, &x, 0.01).unwrap().unwrap();
        assert!((r - r0).norm() < 1e-9 && h.norm() < 1e-9);

        let h0 = LieVector::u_generator() * 0.001;
        let x = z.translate(&matrix_exp(&h0).unwrap()).unwrap();
        let (r, h) = local_coords(&z, &x, 0.01).unwrap().unwrap();
        assert!(r.norm() < 1e-9 && (h - h0).norm() < 1e-9);

        assert!(matches!(local_coords(&z, &x, 1.0), Err(Error::ChartRadius { .. })));
        let far = SpacePoint::new(a_t(0.3)).unwrap();
        assert!(local_coords(&z, &far, 0.01).unwrap().is_none());
    }

    #[test]
    fn local_coords_inverts_chart() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = SpacePoint::new(Mat3::from_rows([[1.1, 0.2, 0.1], [0.0, 0.95, -0.3], [0.0, 0.0, 1.0 / (1.1 * 0.95)]]))
            .unwrap();
        let d0 = delta0(&z);
        for _ in 0..200 {
            let r = LieVector::from_r_coords(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            let h = LieVector::from_h_coords(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            let r = r * (rng.gen_range(0.0..0.5) * d0 / r.norm());
            let h = h * (rng.gen_range(0.0..0.5) * d0 / h.norm());
            let x = chart_point(&z, &r, &h).unwrap();
            let (rr, hh) = local_coords(&z, &x, d0).unwrap().expect("point inside chart");
            assert!((rr - r).norm() < 1e-8 && (hh - h).norm() < 1e-8);
            let back = chart_point(&z, &rr, &hh).unwrap();
            assert!((back.reduced - x.reduced).max_abs() < 1e-8);
        }
    }

    #[test]
    fn chart_radius_has_no_collisions_at_haar_points() {
        // a collision needs a lattice vector v ≠ w_j with |v − w_j| ≤ (e^{4δ₀} − 1)|w_j|
        for z in crate::haar::haar_sample(100, 11) {
            let w = z.reduced();
            let reach = (4.0 * delta0(&z)).exp_m1();
            for j in 0..3 {
                let wj = w.column(j);
                let len = (wj[0] * wj[0] + wj[1] * wj[1] + wj[2] * wj[2]).sqrt();
                for c1 in -20i32..=20 {
                    for c2 in -20i32..=20 {
                        for c3 in -20i32..=20 {
                            let c = [c1 as f64, c2 as f64, c3 as f64];
                            if c[j] == 1.0 && c.iter().filter(|x| **x == 0.0).count() == 2 {
                                continue;
                            }
                            let v = w.apply(c);
                            let d = ((v[0] - wj[0]).powi(2) + (v[1] - wj[1]).powi(2) + (v[2] - wj[2]).powi(2)).sqrt();
                            assert!(d > reach * len, "collision at {z:?}");
                        }
                    }
                }
            }
        }
    }
}
