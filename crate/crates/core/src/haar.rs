//! Haar sampling on X by rejection from a Siegel box in Iwasawa coordinates.
//!
//! A basis is written `g = k·a·n` with `k ∈ SO(3)`, `a = diag(a₁, a₂, a₃)`
//! and `n` upper unipotent, so `n` holds the Gram–Schmidt coefficients and `a`
//! the Gram–Schmidt lengths. With `u = ln(a₂/a₁)`, `v = ln(a₃/a₂)` the Haar
//! density is `c_J · e^{−2u−2v} dk du dv dn`. Every canonical basis has
//! `u, v ≥ ln ½`, `|n₁₂|, |n₁₃| ≤ ½` and `|n₂₃| ≤ 1`, so sampling that box
//! and keeping the candidates that are already canonical gives exact Haar
//! samples on X.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::lattice::SpacePoint;
use crate::linalg::{LieVector, Mat3};
use crate::reduction::{canonical_basis, INT_IDENTITY};
use crate::rng::stream;

/// Samples per independently seeded shard.
pub const SHARD: usize = 512;

/// Lower end of the sampled `u` and `v` ranges.
pub const LOG_RATIO_FLOOR: f64 = -std::f64::consts::LN_2;

/// Volume of X for the Haar measure whose density at the identity is
/// Lebesgue measure in Frobenius-orthonormal coordinates of 𝔰𝔩₃.
///
/// Equals `3^{1/2} ζ(2) ζ(3)`; the sampler reproduces it through
/// [`covolume_estimate`].
pub const COVOLUME: f64 = 3.424_791_596_741_886;

/// Riemannian volume of SO(3) for the Frobenius metric.
pub fn so3_volume() -> f64 {
    16.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI.powi(2)
}

/// Jacobian at the identity of `(k, u, v, n) ↦ k·a·n` against Lebesgue
/// measure in the orthonormal coordinates of 𝔰𝔩₃.
pub fn iwasawa_jacobian() -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut tangents: Vec<Mat3> = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mut rows = [[0.0; 3]; 3];
        rows[i][j] = s;
        rows[j][i] = -s;
        tangents.push(Mat3::from_rows(rows));
    }
    tangents.push(Mat3::diag([-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]));
    tangents.push(Mat3::diag([-1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]));
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mut rows = [[0.0; 3]; 3];
        rows[i][j] = 1.0;
        tangents.push(Mat3::from_rows(rows));
    }
    let m = nalgebra::SMatrix::<f64, 8, 8>::from_fn(|r, c| LieVector::from_matrix(&tangents[c]).coords[r]);
    m.determinant().abs()
}

/// Haar volume of the sampling box.
pub fn box_volume() -> f64 {
    let a_part = (0.5 * (-2.0 * LOG_RATIO_FLOOR).exp()).powi(2);
    let n_part = 1.0 * 1.0 * 2.0;
    iwasawa_jacobian() * so3_volume() * a_part * n_part
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let mut q = [0.0f64; 4];
    loop {
        for x in q.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            q = q.map(|x| x / n);
            break;
        }
    }
    let [w, x, y, z] = q;
    Mat3::from_rows([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

/// One draw from the Haar measure restricted to the Siegel box.
pub fn box_candidate(rng: &mut impl Rng) -> Mat3 {
    let rate = Exp::new(2.0).expect("positive rate");
    let u = LOG_RATIO_FLOOR + rate.sample(rng);
    let v = LOG_RATIO_FLOOR + rate.sample(rng);
    let l1 = -(2.0 * u + v) / 3.0;
    let a = Mat3::diag([l1.exp(), (l1 + u).exp(), (l1 + u + v).exp()]);
    let n = Mat3::from_rows([
        [1.0, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
        [0.0, 1.0, rng.gen_range(-1.0..1.0)],
        [0.0, 0.0, 1.0],
    ]);
    random_rotation(rng) * a * n
}

/// Necessary conditions for a canonical basis: the first two columns have a
/// positive leading coordinate and column lengths are nondecreasing.
fn could_be_canonical(g: &Mat3) -> bool {
    let cols = [g.column(0), g.column(1), g.column(2)];
    let len2 = cols.map(|c| c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    if len2[0] > len2[1] * (1.0 + 1e-6) || len2[1] > len2[2] * (1.0 + 1e-6) {
        return false;
    }
    cols[..2].iter().zip(&len2).all(|(c, l)| {
        let scale = 1e-9 * l.sqrt();
        c.iter().find(|x| x.abs() > scale).is_none_or(|x| *x > 0.0)
    })
}

/// Accepted points together with the number of candidates drawn.
#[derive(Clone, Debug)]
pub struct HaarDraw {
    pub points: Vec<SpacePoint>,
    pub attempts: u64,
}

fn shard(seed: u64, index: usize, count: usize) -> HaarDraw {
    let mut rng = stream(seed, "haar", index as u64);
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0u64;
    while points.len() < count {
        attempts += 1;
        let g = box_candidate(&mut rng);
        if !could_be_canonical(&g) {
            continue;
        }
        if let Ok((_, u)) = canonical_basis(&g) {
            if u == INT_IDENTITY {
                if let Ok(p) = SpacePoint::new(g) {
                    points.push(p);
                }
            }
        }
    }
    HaarDraw { points, attempts }
}

/// `count` independent Haar-distributed points, deterministic in `seed`.
pub fn haar_draw(count: usize, seed: u64) -> HaarDraw {
    let shards = count.div_ceil(SHARD);
    let parts: Vec<HaarDraw> = (0..shards)
        .into_par_iter()
        .map(|i| shard(seed, i, SHARD.min(count - i * SHARD)))
        .collect();
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0;
    for p in parts {
        points.extend(p.points);
        attempts += p.attempts;
    }
    HaarDraw { points, attempts }
}

pub fn haar_sample(count: usize, seed: u64) -> Vec<SpacePoint> {
    haar_draw(count, seed).points
}

/// Covolume estimate `box_volume · acceptance` with its binomial standard
/// error.
pub fn covolume_estimate(count: usize, seed: u64) -> (f64, f64) {
    let draw = haar_draw(count, seed);
    let p = draw.points.len() as f64 / draw.attempts as f64;
    let se = (p * (1.0 - p) / draw.attempts as f64).sqrt();
    (box_volume() * p, box_volume() * se)
}
