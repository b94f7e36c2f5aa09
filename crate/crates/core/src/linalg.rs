//! Linear algebra for `sl(3)`, the form `B(v) = 2 v1 v3 - v2^2`, its isometry
//! group `H = SO(B)`, and the `Ad(H)`-invariant splitting `g = h + r`,
//! `r = r0 + r1`.
//!
//! # Basis
//!
//! Lie algebra elements are stored as 8 coordinates in a fixed basis that is
//! orthonormal for the Frobenius inner product `<X, Y> = tr(X Y^T)`. The basis
//! is adapted to the splitting, so that the first three vectors span `h` and
//! the last five span `r`, ordered by weight under `ad(diag(1, 0, -1))`:
//!
//! | index | element                   | part | weight |
//! |-------|---------------------------|------|--------|
//! | 0     | `diag(1, 0, -1) / √2`     | h    | 0      |
//! | 1     | `(E12 + E23) / √2`        | h    | +1     |
//! | 2     | `(E21 + E32) / √2`        | h    | -1     |
//! | 3     | `E13`                     | r0   | +2     |
//! | 4     | `(E12 - E23) / √2`        | r1   | +1     |
//! | 5     | `diag(1, -2, 1) / √6`     | r1   | 0      |
//! | 6     | `(E21 - E32) / √2`        | r1   | -1     |
//! | 7     | `E31`                     | r1   | -2     |
//!
//! `E12 + E23` generates the unipotent flow `u_s`, `diag(1, 0, -1)` generates
//! `a_t`, and `E13` spans the centralizer `r0` of `u_s` in `r`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on `‖X‖` accepted by [`matrix_exp`].
pub const EXP_NORM_LIMIT: f64 = 50.0;

/// Dimension of `sl(3)`.
pub const DIM_G: usize = 8;

/// Index of the `r0` direction `E13` in the coordinate vector.
pub const R0_INDEX: usize = 3;

const FRAC_1_SQRT_6: f64 = 0.408_248_290_463_863_f64;

/// A real 3×3 matrix. Column `j` of a lattice basis is its `j`-th basis vector.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub Matrix3<f64>);

/// Numerical health of a matrix: its largest entry and how far it is from
/// determinant one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    pub max_entry: f64,
    pub det_residual: f64,
    pub condition: f64,
}

impl Mat3 {
    pub fn identity() -> Self {
        Mat3(Matrix3::identity())
    }

    pub fn zeros() -> Self {
        Mat3(Matrix3::zeros())
    }

    /// Builds a matrix from rows.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Mat3(Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        ))
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: [[f64; 3]; 3]) -> Self {
        Mat3(Matrix3::from_columns(&[
            Vector3::from(cols[0]),
            Vector3::from(cols[1]),
            Vector3::from(cols[2]),
        ]))
    }

    pub fn diag(d: [f64; 3]) -> Self {
        Mat3(Matrix3::from_diagonal(&Vector3::from(d)))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn column(&self, j: usize) -> [f64; 3] {
        [self.0[(0, j)], self.0[(1, j)], self.0[(2, j)]]
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    pub fn transpose(&self) -> Self {
        Mat3(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.try_inverse().map(Mat3)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// `‖g‖` on the group: largest absolute entry of `g` and `g^{-1}`.
    pub fn group_norm(&self) -> f64 {
        let inv = self.inverse().map(|m| m.max_abs()).unwrap_or(f64::INFINITY);
        self.max_abs().max(inv)
    }

    pub fn scale(&self, c: f64) -> Self {
        Mat3(self.0 * c)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let w = self.0 * Vector3::from(v);
        [w[0], w[1], w[2]]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Largest entry, determinant residual and 2-norm condition number.
    pub fn diagnostics(&self) -> Diagnostics {
        let sv = self.0.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        Diagnostics {
            max_entry: self.max_abs(),
            det_residual: (self.det() - 1.0).abs(),
            condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        }
    }
}

impl fmt::Debug for Mat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat3{:?}", self.rows())
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        Mat3(self.0 * rhs.0)
    }
}

impl Mul for &Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: &Mat3) -> Mat3 {
        Mat3(self.0 * rhs.0)
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        Mat3(self.0 + rhs.0)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        Mat3(self.0 - rhs.0)
    }
}

/// The Gram matrix `J` of `B(v) = 2 v1 v3 - v2^2`.
pub fn form_b() -> Mat3 {
    Mat3::from_rows([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
}

/// `B(v) = 2 v1 v3 - v2^2`.
#[inline]
pub fn b_value(v: [f64; 3]) -> f64 {
    2.0 * v[0] * v[2] - v[1] * v[1]
}

/// `J X^T J`, the involution whose eigenspaces are `r` (+1) and `h` (-1).
fn b_reflect(x: &Mat3) -> Mat3 {
    let j = form_b();
    j * x.transpose() * j
}

/// The `i`-th basis matrix of `sl(3)`; see the module docs for the order.
pub fn basis_matrix(i: usize) -> Mat3 {
    use std::f64::consts::FRAC_1_SQRT_2 as S2;
    let mut m = [[0.0; 3]; 3];
    match i {
        0 => {
            m[0][0] = S2;
            m[2][2] = -S2;
        }
        1 => {
            m[0][1] = S2;
            m[1][2] = S2;
        }
        2 => {
            m[1][0] = S2;
            m[2][1] = S2;
        }
        3 => m[0][2] = 1.0,
        4 => {
            m[0][1] = S2;
            m[1][2] = -S2;
        }
        5 => {
            m[0][0] = FRAC_1_SQRT_6;
            m[1][1] = -2.0 * FRAC_1_SQRT_6;
            m[2][2] = FRAC_1_SQRT_6;
        }
        6 => {
            m[1][0] = S2;
            m[2][1] = -S2;
        }
        7 => m[2][0] = 1.0,
        _ => panic!("sl(3) basis index {i} out of range"),
    }
    Mat3::from_rows(m)
}

/// An element of `sl(3)` in the fixed orthonormal basis.
#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LieVector {
    pub coords: [f64; DIM_G],
}

/// A Lie algebra element together with its `h`, `r0` and `r1` components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitVector {
    pub vector: LieVector,
    pub h_part: LieVector,
    pub r0_part: LieVector,
    pub r1_part: LieVector,
}

impl LieVector {
    pub const ZERO: LieVector = LieVector { coords: [0.0; DIM_G] };

    pub fn new(coords: [f64; DIM_G]) -> Self {
        LieVector { coords }
    }

    /// The `i`-th basis vector.
    pub fn basis(i: usize) -> Self {
        let mut c = [0.0; DIM_G];
        c[i] = 1.0;
        LieVector { coords: c }
    }

    /// Generator `diag(1, 0, -1)` of `a_t` (norm `√2`).
    pub fn a_generator() -> Self {
        LieVector::basis(0) * std::f64::consts::SQRT_2
    }

    /// Generator `N = E12 + E23` of `u_s` (norm `√2`).
    pub fn u_generator() -> Self {
        LieVector::basis(1) * std::f64::consts::SQRT_2
    }

    /// `E13`, the unit vector spanning `r0`.
    pub fn e13() -> Self {
        LieVector::basis(R0_INDEX)
    }

    /// Orthogonal projection of a matrix onto `sl(3)`; the trace part is dropped.
    pub fn from_matrix(m: &Mat3) -> Self {
        use std::f64::consts::FRAC_1_SQRT_2 as S2;
        let x = &m.0;
        LieVector {
            coords: [
                S2 * (x[(0, 0)] - x[(2, 2)]),
                S2 * (x[(0, 1)] + x[(1, 2)]),
                S2 * (x[(1, 0)] + x[(2, 1)]),
                x[(0, 2)],
                S2 * (x[(0, 1)] - x[(1, 2)]),
                FRAC_1_SQRT_6 * (x[(0, 0)] - 2.0 * x[(1, 1)] + x[(2, 2)]),
                S2 * (x[(1, 0)] - x[(2, 1)]),
                x[(2, 0)],
            ],
        }
    }

    pub fn to_matrix(&self) -> Mat3 {
        use std::f64::consts::FRAC_1_SQRT_2 as S2;
        let c = &self.coords;
        let d5 = FRAC_1_SQRT_6 * c[5];
        Mat3::from_rows([
            [S2 * c[0] + d5, S2 * (c[1] + c[4]), c[3]],
            [S2 * (c[2] + c[6]), -2.0 * d5, S2 * (c[1] - c[4])],
            [c[7], S2 * (c[2] - c[6]), -S2 * c[0] + d5],
        ])
    }

    pub fn dot(&self, other: &LieVector) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// The `h` coordinates (indices 0..3).
    pub fn h_coords(&self) -> [f64; 3] {
        [self.coords[0], self.coords[1], self.coords[2]]
    }

    /// The `r` coordinates (indices 3..8).
    pub fn r_coords(&self) -> [f64; 5] {
        let c = &self.coords;
        [c[3], c[4], c[5], c[6], c[7]]
    }

    pub fn from_h_coords(h: [f64; 3]) -> Self {
        let mut c = [0.0; DIM_G];
        c[..3].copy_from_slice(&h);
        LieVector { coords: c }
    }

    pub fn from_r_coords(r: [f64; 5]) -> Self {
        let mut c = [0.0; DIM_G];
        c[3..].copy_from_slice(&r);
        LieVector { coords: c }
    }

    /// Component-wise splitting into `h`, `r0` and `r1`.
    pub fn split(&self) -> SplitVector {
        let (h, r) = decompose(self);
        let r0 = LieVector::e13() * r.coords[R0_INDEX];
        SplitVector { vector: *self, h_part: h, r0_part: r0, r1_part: r - r0 }
    }
}

impl fmt::Debug for LieVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LieVector{:?}", self.coords)
    }
}

impl Add for LieVector {
    type Output = LieVector;
    fn add(self, rhs: LieVector) -> LieVector {
        let mut c = self.coords;
        c.iter_mut().zip(rhs.coords).for_each(|(a, b)| *a += b);
        LieVector { coords: c }
    }
}

impl Sub for LieVector {
    type Output = LieVector;
    fn sub(self, rhs: LieVector) -> LieVector {
        let mut c = self.coords;
        c.iter_mut().zip(rhs.coords).for_each(|(a, b)| *a -= b);
        LieVector { coords: c }
    }
}

impl Neg for LieVector {
    type Output = LieVector;
    fn neg(self) -> LieVector {
        self * -1.0
    }
}

impl Mul<f64> for LieVector {
    type Output = LieVector;
    fn mul(self, s: f64) -> LieVector {
        LieVector { coords: self.coords.map(|a| a * s) }
    }
}

/// Splits `X = h_part + r_part` with `h_part = (X - J X^T J)/2` and
/// `r_part = (X + J X^T J)/2`.
pub fn decompose(x: &LieVector) -> (LieVector, LieVector) {
    let m = x.to_matrix();
    let refl = b_reflect(&m);
    let h = LieVector::from_matrix(&(m - refl).scale(0.5));
    let r = LieVector::from_matrix(&(m + refl).scale(0.5));
    (h, r)
}

/// Splits `r` into its `r0 = span{E13}` component and the orthogonal rest.
pub fn split_r(r: &LieVector) -> Result<(LieVector, LieVector)> {
    let (h, _) = decompose(r);
    let residual = h.norm();
    if residual > 1e-10 * r.norm().max(1.0) {
        return Err(Error::NotInComplement { residual });
    }
    let r0 = LieVector::e13() * r.dot(&LieVector::e13());
    Ok((r0, *r - r0))
}

/// `Z_r = r0 / ‖r0‖`, or zero when `r0 = 0`.
pub fn z_direction(r: &LieVector) -> LieVector {
    let c = r.dot(&LieVector::e13());
    if c == 0.0 {
        LieVector::ZERO
    } else {
        LieVector::e13() * c.signum()
    }
}

/// Matrix exponential of a traceless matrix.
///
/// Inputs on the line spanned by `N = E12 + E23` use the terminating series
/// `I + sN + s^2 N^2 / 2`; everything else goes through scaling and squaring
/// with the degree-13 Padé approximant.
pub fn matrix_exp(x: &LieVector) -> Result<Mat3> {
    let norm = x.norm();
    if !(norm <= EXP_NORM_LIMIT) {
        return Err(Error::NormOverflow { norm, limit: EXP_NORM_LIMIT });
    }
    let off_n: f64 = x
        .coords
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != 1)
        .map(|(_, c)| c * c)
        .sum::<f64>()
        .sqrt();
    if off_n <= 1e-14 {
        let s = x.coords[1] * std::f64::consts::FRAC_1_SQRT_2;
        return Ok(unipotent(s));
    }
    Ok(expm(&x.to_matrix()))
}

fn unipotent(s: f64) -> Mat3 {
    Mat3::from_rows([[1.0, s, 0.5 * s * s], [0.0, 1.0, s], [0.0, 0.0, 1.0]])
}

/// Padé-13 scaling and squaring for a general 3×3 matrix.
pub(crate) fn expm(a: &Mat3) -> Mat3 {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;

    let norm1 = (0..3)
        .map(|j| (0..3).map(|i| a.0[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.0 * 2f64.powi(-s);
    let id = Matrix3::<f64>::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u = a * (a6 * (a6 * B[13] + a4 * B[11] + a2 * B[9])
        + a6 * B[7]
        + a4 * B[5]
        + a2 * B[3]
        + id * B[1]);
    let v = a6 * (a6 * B[12] + a4 * B[10] + a2 * B[8]) + a6 * B[6] + a4 * B[4] + a2 * B[2] + id * B[0];
    let p = v + u;
    let q = v - u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is invertible in range");
    for _ in 0..s {
        r = r * r;
    }
    Mat3(r)
}

/// Principal logarithm of a matrix near the identity (`‖M - I‖_F < 1`).
pub fn matrix_log_near_identity(m: &Mat3) -> Option<Mat3> {
    let id = Matrix3::<f64>::identity();
    if !m.is_finite() || (m.0 - id).norm() >= 1.0 {
        return None;
    }
    let mut y = m.0;
    let mut halvings = 0;
    // Denman–Beavers square roots until close enough for the series.
    while (y - id).norm() > 0.05 {
        let mut z = id;
        for _ in 0..40 {
            let yi = y.try_inverse()?;
            let zi = z.try_inverse()?;
            let ny = (y + zi) * 0.5;
            let nz = (z + yi) * 0.5;
            let done = (ny - y).norm() <= 1e-16 * ny.norm();
            y = ny;
            z = nz;
            if done {
                break;
            }
        }
        halvings += 1;
        if halvings > 10 {
            return None;
        }
    }
    // log Y = 2 atanh(Z), Z = (Y - I)(Y + I)^{-1}
    let z = (y - id) * (y + id).try_inverse()?;
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for k in 1..30 {
        term *= z2;
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if add.norm() < 1e-18 {
            break;
        }
    }
    Some(Mat3(sum * 2.0 * 2f64.powi(halvings)))
}

fn check_unimodular(g: &Mat3, tol: f64) -> Result<()> {
    let residual = (g.det() - 1.0).abs();
    if residual.is_nan() || residual > tol {
        return Err(Error::NotUnimodular { residual });
    }
    Ok(())
}

/// `Ad(g) X = g X g^{-1}`.
pub fn adjoint(g: &Mat3, x: &LieVector) -> Result<LieVector> {
    check_unimodular(g, 1e-8)?;
    let inv = g.inverse().ok_or(Error::NotUnimodular { residual: 1.0 })?;
    Ok(LieVector::from_matrix(&(g * &x.to_matrix() * inv)))
}

/// `Ad(g)` as an 8×8 matrix in the fixed basis.
pub fn adjoint_matrix(g: &Mat3) -> Result<SMatrix<f64, 8, 8>> {
    check_unimodular(g, 1e-8)?;
    let inv = g.inverse().ok_or(Error::NotUnimodular { residual: 1.0 })?;
    let mut out = SMatrix::<f64, 8, 8>::zeros();
    for j in 0..DIM_G {
        let img = LieVector::from_matrix(&(g * &basis_matrix(j) * inv));
        for i in 0..DIM_G {
            out[(i, j)] = img.coords[i];
        }
    }
    Ok(out)
}

/// `ad(X)` as an 8×8 matrix in the fixed basis.
pub fn ad_matrix(x: &LieVector) -> SMatrix<f64, 8, 8> {
    let xm = x.to_matrix();
    let mut out = SMatrix::<f64, 8, 8>::zeros();
    for j in 0..DIM_G {
        let e = basis_matrix(j);
        let br = LieVector::from_matrix(&(xm * e - e * xm));
        for i in 0..DIM_G {
            out[(i, j)] = br.coords[i];
        }
    }
    out
}

/// Lie bracket `[X, Y]`.
pub fn bracket(x: &LieVector, y: &LieVector) -> LieVector {
    let a = x.to_matrix();
    let b = y.to_matrix();
    LieVector::from_matrix(&(a * b - b * a))
}

/// Membership test for `H = SO(B)`. Returns the verdict and the residual
/// `max(‖g^T J g - J‖_F, |det g - 1|)`.
pub fn is_in_h(g: &Mat3, tol: f64) -> (bool, f64) {
    let j = form_b();
    let res_form = (g.transpose() * j * *g - j).norm();
    let res_det = (g.det() - 1.0).abs();
    let residual = res_form.max(res_det);
    (residual <= tol, residual)
}

/// Constant `C` with `‖Ad(u_s) r - r‖ ≤ C |s| ‖r‖` for `r ∈ r`, `|s| ≤ 1`.
///
/// `ad(N)` restricted to `r` is nilpotent of order 5, so
/// `Ad(u_s) - I = Σ_{k=1}^{4} s^k ad(N)^k / k!` and the bound is
/// `Σ ‖ad(N)|_r‖^k / k!` with the operator norm taken from the SVD.
pub fn ad_u_constant() -> f64 {
    let ad = ad_matrix(&LieVector::u_generator());
    let restricted = ad.fixed_view::<5, 5>(3, 3).into_owned();
    let op = restricted.singular_values().max();
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..=4 {
        term *= op / k as f64;
        sum += term;
    }
    sum
}
