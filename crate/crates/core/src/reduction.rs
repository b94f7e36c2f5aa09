//! Lattice reduction and short-vector enumeration in dimension three.
//!
//! Bases are column matrices. [`lll`] brings a basis to near-orthogonality,
//! [`enumerate`] lists every lattice vector inside a ball (Fincke–Pohst on the
//! Gram–Schmidt data of a reduced basis), and [`canonical_basis`] picks a
//! Minkowski-reduced basis that depends only on the lattice.

use crate::error::{Error, Result};
use crate::linalg::Mat3;

/// Integer 3×3 matrix, row-major.
pub type IntMat = [[i64; 3]; 3];

pub const INT_IDENTITY: IntMat = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

/// Largest 2-norm condition number accepted by the reduction routines.
pub const MAX_CONDITION: f64 = 1e12;

const LLL_DELTA: f64 = 0.99;
const MAX_ENUMERATED: usize = 2_000_000;
const TIE_TOL: f64 = 1e-9;

/// A lattice vector with its integer coordinates in the basis it was
/// enumerated from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeVector {
    pub coeffs: [i64; 3],
    pub vector: [f64; 3],
    pub norm2: f64,
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn columns(b: &Mat3) -> [[f64; 3]; 3] {
    [b.column(0), b.column(1), b.column(2)]
}

pub fn int_det(m: &IntMat) -> i128 {
    let m = m.map(|r| r.map(|x| x as i128));
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn int_mul(a: &IntMat, b: &IntMat) -> IntMat {
    let mut out = [[0i64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn int_to_mat(m: &IntMat) -> Mat3 {
    Mat3::from_rows(m.map(|r| r.map(|x| x as f64)))
}

fn check_condition(b: &Mat3) -> Result<()> {
    if !b.is_finite() {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let condition = b.diagnostics().condition;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    Ok(())
}

/// Gram–Schmidt data: `R` upper triangular with positive diagonal and the
/// orthonormal frame `Q` with `B = Q R`.
struct GramSchmidt {
    q: [[f64; 3]; 3],
    r: [[f64; 3]; 3],
}

fn gram_schmidt(cols: &[[f64; 3]; 3]) -> GramSchmidt {
    let mut q = [[0.0; 3]; 3];
    let mut r = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut v = cols[j];
        for i in 0..j {
            // modified Gram–Schmidt, run twice for stability
            let c = dot(&q[i], &v);
            r[i][j] = c;
            for k in 0..3 {
                v[k] -= c * q[i][k];
            }
        }
        for i in 0..j {
            let c = dot(&q[i], &v);
            r[i][j] += c;
            for k in 0..3 {
                v[k] -= c * q[i][k];
            }
        }
        let n = dot(&v, &v).sqrt();
        r[j][j] = n;
        q[j] = v.map(|x| x / n);
    }
    GramSchmidt { q, r }
}

/// LLL reduction of the columns of `b` (δ = 0.99). Returns the reduced basis
/// and the unimodular `U` with `reduced = b · U`.
pub fn lll(b: &Mat3) -> Result<(Mat3, IntMat)> {
    check_condition(b)?;
    let mut cols = columns(b);
    let mut u = INT_IDENTITY;
    let mut k = 1;
    let mut iterations = 0;
    while k < 3 {
        iterations += 1;
        if iterations > 10_000 {
            return Err(Error::IllConditioned { condition: f64::INFINITY });
        }
        for j in (0..k).rev() {
            let gs = gram_schmidt(&cols);
            let mu = gs.r[j][k] / gs.r[j][j];
            if mu.abs() > 0.5 {
                let q = mu.round();
                if q.abs() > 4.5e15 {
                    return Err(Error::IllConditioned { condition: f64::INFINITY });
                }
                let qi = q as i64;
                for t in 0..3 {
                    cols[k][t] -= q * cols[j][t];
                    u[t][k] -= qi * u[t][j];
                }
            }
        }
        let gs = gram_schmidt(&cols);
        let mu = gs.r[k - 1][k] / gs.r[k - 1][k - 1];
        let lhs = gs.r[k][k] * gs.r[k][k];
        let rhs = (LLL_DELTA - mu * mu) * gs.r[k - 1][k - 1] * gs.r[k - 1][k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            for row in u.iter_mut() {
                row.swap(k, k - 1);
            }
            k = (k - 1).max(1);
        }
    }
    Ok((Mat3::from_columns(cols), u))
}

/// All lattice vectors `b·c` with `|b·c - center| ≤ radius`, including zero
/// when it qualifies. `b` should be reduced for the enumeration to stay small.
pub fn enumerate(b: &Mat3, center: [f64; 3], radius: f64) -> Result<Vec<LatticeVector>> {
    let cols = columns(b);
    let gs = gram_schmidt(&cols);
    let r = gs.r;
    let y = [dot(&gs.q[0], &center), dot(&gs.q[1], &center), dot(&gs.q[2], &center)];
    let rad2 = radius * radius;
    let slack = 1e-12 * rad2.max(1e-300);
    let mut out = Vec::new();
    let span = |c: f64, rem: f64, rii: f64| -> (i64, i64) {
        let w = rem.max(0.0).sqrt() / rii;
        ((c - w).ceil() as i64, (c + w).floor() as i64)
    };
    let (lo3, hi3) = span(y[2] / r[2][2], rad2 + slack, r[2][2]);
    for c3 in lo3..=hi3 {
        let d3 = r[2][2] * c3 as f64 - y[2];
        let rem3 = rad2 + slack - d3 * d3;
        if rem3 < 0.0 {
            continue;
        }
        let ctr2 = (y[1] - r[1][2] * c3 as f64) / r[1][1];
        let (lo2, hi2) = span(ctr2, rem3, r[1][1]);
        for c2 in lo2..=hi2 {
            let d2 = r[1][1] * c2 as f64 + r[1][2] * c3 as f64 - y[1];
            let rem2 = rem3 - d2 * d2;
            if rem2 < 0.0 {
                continue;
            }
            let ctr1 = (y[0] - r[0][1] * c2 as f64 - r[0][2] * c3 as f64) / r[0][0];
            let (lo1, hi1) = span(ctr1, rem2, r[0][0]);
            for c1 in lo1..=hi1 {
                let c = [c1, c2, c3];
                let v: [f64; 3] = std::array::from_fn(|t| {
                    cols[0][t] * c1 as f64 + cols[1][t] * c2 as f64 + cols[2][t] * c3 as f64
                });
                let diff = [v[0] - center[0], v[1] - center[1], v[2] - center[2]];
                let d2 = dot(&diff, &diff);
                if d2 <= rad2 + slack {
                    out.push(LatticeVector { coeffs: c, vector: v, norm2: dot(&v, &v) });
                    if out.len() > MAX_ENUMERATED {
                        return Err(Error::IllConditioned { condition: f64::INFINITY });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Length of a shortest nonzero vector of the lattice spanned by `b`.
pub fn shortest_length(b: &Mat3) -> Result<f64> {
    let (red, _) = lll(b)?;
    let first = dot(&red.column(0), &red.column(0)).sqrt();
    let vs = enumerate(&red, [0.0; 3], first * (1.0 + 1e-12))?;
    Ok(vs
        .iter()
        .filter(|v| v.coeffs != [0, 0, 0])
        .map(|v| v.norm2)
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}

fn sign_normalize(v: &mut LatticeVector) {
    let scale = v.norm2.sqrt();
    for k in 0..3 {
        if v.vector[k].abs() > TIE_TOL * scale {
            if v.vector[k] < 0.0 {
                v.vector = v.vector.map(|x| -x);
                v.coeffs = v.coeffs.map(|x| -x);
            }
            return;
        }
    }
}

/// Ordering for canonical choices: shorter first, then lexicographically
/// larger real coordinates first. Lengths and coordinates within a relative
/// `1e-9` are treated as ties.
fn canonical_order(a: &LatticeVector, b: &LatticeVector) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let scale = a.norm2.max(b.norm2);
    if (a.norm2 - b.norm2).abs() > TIE_TOL * scale {
        return a.norm2.total_cmp(&b.norm2);
    }
    let len = scale.sqrt();
    for k in 0..3 {
        if (a.vector[k] - b.vector[k]).abs() > TIE_TOL * len {
            return b.vector[k].total_cmp(&a.vector[k]);
        }
    }
    Ordering::Equal
}

fn gcd(a: i64, b: i64) -> i64 {
    num_integer::Integer::gcd(&a, &b)
}

fn is_primitive_pair(a: &[i64; 3], b: &[i64; 3]) -> bool {
    let m1 = a[0] * b[1] - a[1] * b[0];
    let m2 = a[0] * b[2] - a[2] * b[0];
    let m3 = a[1] * b[2] - a[2] * b[1];
    gcd(gcd(m1, m2), m3) == 1
}

/// Canonical Minkowski-reduced basis of the lattice spanned by `b`.
///
/// The first column is a shortest vector, the second a shortest vector that
/// extends it to a primitive pair, the third a shortest vector completing a
/// basis. Ties are broken by the real coordinates of the vectors, and the
/// first two columns are signed so that their leading nonzero coordinate is
/// positive; the third is signed to make the determinant positive. The
/// result depends only on the lattice (up to floating error), so it serves
/// as a canonical representative. Returns the basis and `U` with
/// `canonical = b · U`.
pub fn canonical_basis(b: &Mat3) -> Result<(Mat3, IntMat)> {
    let (red, u) = lll(b)?;
    let cols = columns(&red);
    let max_len = cols.iter().map(|c| dot(c, c)).fold(0.0, f64::max).sqrt();
    let mut radius = max_len * (1.0 + 1e-9);
    for _ in 0..8 {
        let mut cands: Vec<LatticeVector> = enumerate(&red, [0.0; 3], radius)?
            .into_iter()
            .filter(|v| v.coeffs != [0, 0, 0])
            .map(|mut v| {
                sign_normalize(&mut v);
                v
            })
            .collect();
        cands.sort_by(|a, b| a.norm2.total_cmp(&b.norm2));
        cands.dedup_by(|a, b| a.coeffs == b.coeffs);
        // stable re-sort within length ties
        cands.sort_by(canonical_order);
        if let Some(choice) = greedy_basis(&cands) {
            let mut c = [[0i64; 3]; 3];
            for (j, v) in choice.iter().enumerate() {
                for i in 0..3 {
                    c[i][j] = v.coeffs[i];
                }
            }
            let mut vecs = [choice[0].vector, choice[1].vector, choice[2].vector];
            if Mat3::from_columns(vecs).det() < 0.0 {
                for row in c.iter_mut() {
                    row[2] = -row[2];
                }
                vecs[2] = vecs[2].map(|x| -x);
            }
            let total = int_mul(&u, &c);
            return Ok((Mat3::from_columns(vecs), total));
        }
        radius *= 1.5;
    }
    Err(Error::IllConditioned { condition: f64::INFINITY })
}

fn greedy_basis(cands: &[LatticeVector]) -> Option<[LatticeVector; 3]> {
    let first = *cands.first()?;
    let second = *cands.iter().find(|v| is_primitive_pair(&first.coeffs, &v.coeffs))?;
    let third = *cands.iter().find(|v| {
        let m = [
            [first.coeffs[0], second.coeffs[0], v.coeffs[0]],
            [first.coeffs[1], second.coeffs[1], v.coeffs[1]],
            [first.coeffs[2], second.coeffs[2], v.coeffs[2]],
        ];
        int_det(&m).abs() == 1
    })?;
    Some([first, second, third])
}
