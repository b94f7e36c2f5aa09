//! The flows `a_t`, `u_s`, closed H-orbits of rational forms, random walks
//! on those orbits and the shearing computation `Ad(a_n u_s) r`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::form::TernaryForm;
use crate::lattice::SpacePoint;
use crate::linalg::{adjoint, form_b, matrix_exp, split_r, LieVector, Mat3};
use crate::reduction::lll;
use crate::rng::stream;

/// Calibrated displacement-genericity constant.
pub const IOTA: f64 = 1.0 / 256.0;

/// Relative tolerance of the orbit membership certificate.
pub const CERT_TOL: f64 = 1e-7;

/// Drift level that triggers re-projection onto the form quadric.
pub const DRIFT_TOL: f64 = 1e-6;

pub fn flow_a(t: f64) -> Mat3 {
    Mat3::diag([t.exp(), 1.0, (-t).exp()])
}

pub fn flow_u(s: f64) -> Mat3 {
    Mat3::from_rows([[1.0, s, s * s / 2.0], [0.0, 1.0, s], [0.0, 0.0, 1.0]])
}

/// A closed H-orbit: the lattice `g ℤ³` with `gᵀ J g = λ G`.
#[derive(Clone, Debug)]
pub struct ClosedOrbit {
    pub form: TernaryForm,
    pub conjugator: Mat3,
    pub lambda: f64,
    pub basepoint: SpacePoint,
    /// `|det G|`, used to order orbits.
    pub volume_proxy: f64,
}

/// `λ` with `λ³ det G = det J = 1`.
pub fn form_scale(form: &TernaryForm) -> f64 {
    let det = form.det().to_f64().unwrap_or(f64::NAN);
    1.0 / det.cbrt()
}

/// Builds `g ∈ SL₃(ℝ)` with `gᵀ J g = λ G` by real congruence: both
/// `λG` and `J` are brought to `diag(1, −1, −1)` and the two congruences
/// composed.
pub fn orbit_from_form(form: &TernaryForm) -> Result<ClosedOrbit> {
    let lambda = form_scale(form);
    let target = form.gram_f64().scale(lambda);
    let eig = nalgebra::SymmetricEigen::new(target.0);
    let mut pairs: Vec<(f64, nalgebra::Vector3<f64>)> =
        (0..3).map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    if pairs.iter().any(|p| p.0 == 0.0) {
        return Err(Error::DegenerateForm);
    }
    if !(pairs[0].0 > 0.0 && pairs[1].0 < 0.0) {
        return Err(Error::DefiniteForm);
    }
    // λG = Aᵀ Σ A with Σ = diag(1, −1, −1)
    let a = Mat3::from_rows(std::array::from_fn(|i| {
        let (d, v) = &pairs[i];
        let s = d.abs().sqrt();
        [s * v[0], s * v[1], s * v[2]]
    }));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = Mat3::from_rows([[h, 0.0, h], [h, 0.0, -h], [0.0, 1.0, 0.0]]);
    let mut g = c.inverse().expect("C is orthogonal") * a;
    if g.det() < 0.0 {
        g = g.scale(-1.0);
    }
    let residual = (g.transpose() * form_b() * g - target).norm();
    if !(residual <= 1e-9 * target.norm().max(1.0)) || (g.det() - 1.0).abs() > 1e-9 {
        return Err(Error::Drift { residual });
    }
    let basepoint = SpacePoint::new(g)?;
    Ok(ClosedOrbit {
        form: form.clone(),
        conjugator: g,
        lambda,
        basepoint,
        volume_proxy: form.disc().to_f64().unwrap_or(f64::NAN),
    })
}

/// Orbit membership certificate for a basis `g`: the form `gᵀJg/λ` must be
/// rational with the denominator of the orbit's form and the same
/// determinant. Returns the relative rounding residual, or infinity when the
/// determinant does not match.
pub fn certificate_residual(orbit: &ClosedOrbit, g: &Mat3) -> f64 {
    let m = (g.transpose() * form_b() * *g).scale(1.0 / orbit.lambda);
    let denom = orbit.form.denominator().to_f64().unwrap_or(f64::NAN);
    let scaled = m.scale(denom);
    let mut residual: f64 = 0.0;
    let mut rounded = [[0i64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let x = scaled.get(i, j);
            if !(x.abs() < 9e15) {
                return f64::INFINITY;
            }
            rounded[i][j] = x.round() as i64;
            residual = residual.max((x - x.round()).abs());
        }
    }
    let scale = scaled.max_abs().max(1.0);
    let rows = rounded.map(|r| r.map(|x| BigRational::from_integer(BigInt::from(x))));
    match TernaryForm::new(rows) {
        Ok(f) => {
            let d = BigRational::from_integer(orbit.form.denominator());
            let det = f.det() / (&d * &d * &d);
            if det != orbit.form.det() {
                return f64::INFINITY;
            }
        }
        Err(_) => return f64::INFINITY,
    }
    residual / scale
}

/// Rational form carried by a basis of an orbit point, recovered by
/// rounding.
fn rounded_form(orbit: &ClosedOrbit, g: &Mat3) -> Mat3 {
    let m = (g.transpose() * form_b() * *g).scale(1.0 / orbit.lambda);
    let denom = orbit.form.denominator().to_f64().unwrap_or(f64::NAN);
    Mat3::from_rows(m.scale(denom).rows().map(|r| r.map(|x| x.round() / denom)))
}

/// One Newton step back onto the quadric `gᵀJg = λT`, followed by
/// determinant normalization.
pub fn reproject(orbit: &ClosedOrbit, g: &Mat3) -> Mat3 {
    let t = rounded_form(orbit, g).scale(orbit.lambda);
    let s = g.transpose() * form_b() * *g;
    let delta = t - s;
    let correction = match s.inverse() {
        Some(inv) => inv * delta,
        None => return *g,
    };
    let step = Mat3::identity() + correction.scale(0.5);
    let out = *g * step;
    out.scale(out.det().cbrt().recip())
}

/// Parameters of the orbit random walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    /// Radius of the uniform 𝔥-ball for random steps.
    pub step_radius: f64,
    /// Stretch `a_{t0} u_{s0}` applied after each random step.
    pub stretch_t: f64,
    pub stretch_s: f64,
    /// Record every `thinning`-th state.
    pub thinning: usize,
    pub burn_in: usize,
    /// Steps after burn-in.
    pub steps: usize,
    pub seed: u64,
    /// Independent chains, each run for `steps / chains` steps.
    pub chains: usize,
}

impl Default for WalkSpec {
    fn default() -> Self {
        WalkSpec { step_radius: 0.5, stretch_t: 2.0, stretch_s: 1.0, thinning: 10, burn_in: 1000, steps: 10_000, seed: 0, chains: 1 }
    }
}

/// Recorded orbit points.
#[derive(Clone, Debug)]
pub struct OrbitSample {
    pub points: Vec<SpacePoint>,
    pub walk: WalkSpec,
    /// Largest certificate residual over the recorded points.
    pub max_residual: f64,
}

impl OrbitSample {
    pub fn to_text(&self) -> String {
        self.points.iter().map(|p| p.to_text() + "\n").collect()
    }
}

/// Uniform vector in the 𝔥-ball of the given radius.
pub fn random_h(rng: &mut impl Rng, radius: f64) -> LieVector {
    let dir: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let len = radius * rng.gen::<f64>().cbrt();
    LieVector::from_h_coords(dir.map(|x| x * len / n))
}

/// Uniform unit vector in 𝔯.
pub fn random_unit_r(rng: &mut impl Rng) -> LieVector {
    let dir: [f64; 5] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let r = LieVector::from_r_coords(dir);
    r * (1.0 / r.norm())
}

fn run_chain(orbit: &ClosedOrbit, spec: &WalkSpec, chain: usize, steps: usize) -> Result<(Vec<SpacePoint>, f64)> {
    let mut rng = stream(spec.seed, "walk", chain as u64);
    let stretch = flow_a(spec.stretch_t) * flow_u(spec.stretch_s);
    let mut g = orbit.conjugator;
    let mut points = Vec::with_capacity(steps / spec.thinning.max(1) + 1);
    let mut max_residual: f64 = 0.0;
    for step in 1..=(spec.burn_in + steps) {
        let xi = random_h(&mut rng, spec.step_radius);
        g = stretch * matrix_exp(&xi)? * g;
        // transverse rounding errors grow by e^{2 t0} per stretch, so the
        // frame is pulled back onto the quadric at every step
        g = reproject(orbit, &lll(&g)?.0);
        if step > spec.burn_in && (step - spec.burn_in).is_multiple_of(spec.thinning.max(1)) {
            let mut res = certificate_residual(orbit, &g);
            if res > DRIFT_TOL {
                g = reproject(orbit, &g);
                res = certificate_residual(orbit, &g);
                if res > DRIFT_TOL {
                    return Err(Error::Drift { residual: res });
                }
            }
            max_residual = max_residual.max(res);
            points.push(SpacePoint::new(g)?);
        }
    }
    Ok((points, max_residual))
}

/// Markov chain on the orbit: each step applies a random `exp(ξ)`, `ξ`
/// uniform in the 𝔥-ball, followed by the fixed stretch. Every recorded
/// point passes the membership certificate.
pub fn orbit_walk(orbit: &ClosedOrbit, spec: &WalkSpec) -> Result<OrbitSample> {
    if spec.steps == 0 || spec.thinning == 0 || spec.chains == 0 {
        return Err(Error::Invalid("walk needs steps, thinning and chains ≥ 1".into()));
    }
    use rayon::prelude::*;
    let per_chain = spec.steps.div_ceil(spec.chains);
    let parts: Vec<Result<(Vec<SpacePoint>, f64)>> =
        (0..spec.chains).into_par_iter().map(|c| run_chain(orbit, spec, c, per_chain)).collect();
    let mut points = Vec::new();
    let mut max_residual: f64 = 0.0;
    for p in parts {
        let (pts, res) = p?;
        points.extend(pts);
        max_residual = max_residual.max(res);
    }
    Ok(OrbitSample { points, walk: spec.clone(), max_residual })
}

/// `Ad(a_n u_s) r` and its distance from `e^{2n} r₀`.
pub fn shear_displacement(r: &LieVector, n: i32, s: f64) -> Result<(LieVector, f64)> {
    let (r0, _) = split_r(r)?;
    let g = flow_a(n as f64) * flow_u(s);
    let image = adjoint(&g, r)?;
    let deviation = (image - r0 * (2.0 * n as f64).exp()).norm();
    Ok((image, deviation))
}

/// Smallest `n ≥ 1` with `e^{2n}‖r₀‖ ≥ 1`.
pub fn choose_n(r: &LieVector) -> Result<i32> {
    let (r0, _) = split_r(r)?;
    let norm = r0.norm();
    if norm == 0.0 {
        return Err(Error::ZeroTransverse);
    }
    if norm > 1.0 {
        return Err(Error::Invalid(format!("‖r₀‖ = {norm} exceeds 1")));
    }
    let mut n = ((-norm.ln()) / 2.0).ceil().max(1.0) as i32;
    while n > 1 && (2.0 * (n - 1) as f64).exp() * norm >= 1.0 {
        n -= 1;
    }
    while (2.0 * n as f64).exp() * norm < 1.0 {
        n += 1;
    }
    Ok(n)
}

/// Fraction of `h` drawn uniformly from the 𝔥-ball of radius `radius` with
/// `‖(Ad(exp h) r)₀‖ ≥ iota ‖r‖`.
pub fn generic_fraction(r: &LieVector, iota: f64, radius: f64, draws: usize, rng: &mut impl Rng) -> Result<f64> {
    let mut hits = 0usize;
    for _ in 0..draws {
        let h = random_h(rng, radius);
        let image = adjoint(&matrix_exp(&h)?, r)?;
        let (r0, _) = split_r(&image)?;
        if r0.norm() >= iota * r.norm() {
            hits += 1;
        }
    }
    Ok(hits as f64 / draws as f64)
}

/// Largest `2^{−k}` for which every one of `trials` random unit `r ∈ 𝔯` has
/// generic fraction at least `margin`.
pub fn calibrate_iota(seed: u64, trials: usize, draws: usize, radius: f64, margin: f64) -> Result<f64> {
    let mut rng = stream(seed, "iota", 0);
    let rs: Vec<LieVector> = (0..trials).map(|_| random_unit_r(&mut rng)).collect();
    for k in 0..40 {
        let iota = 0.5f64.powi(k);
        let mut ok = true;
        for (i, r) in rs.iter().enumerate() {
            let mut local = stream(seed, "iota-h", i as u64);
            if generic_fraction(r, iota, radius, draws, &mut local)? < margin {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(iota);
        }
    }
    Err(Error::Invalid("no admissible iota".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_in_h;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flow_identities() {
        assert_eq!(flow_a(0.0), Mat3::identity());
        assert_eq!(flow_u(0.0), Mat3::identity());
        let lhs = flow_a(1.0) * flow_u(0.3) * flow_a(-1.0);
        assert!((lhs - flow_u(1f64.exp() * 0.3)).max_abs() < 1e-12);
        assert!(is_in_h(&flow_a(2.0), 1e-12).0);
        assert!(is_in_h(&flow_u(1.5), 1e-12).0);
        assert!((flow_a(0.7) * flow_a(-1.9) - flow_a(-1.2)).max_abs() < 1e-12);
        assert!((flow_u(0.7) * flow_u(-1.9) - flow_u(-1.2)).max_abs() < 1e-12);
        let n = LieVector::u_generator();
        assert!((matrix_exp(&(n * 0.4)).unwrap() - flow_u(0.4)).max_abs() < 1e-14);
    }

    #[test]
    fn orbits_of_examples() {
        let b = orbit_from_form(&TernaryForm::form_b()).unwrap();
        assert!((b.lambda - 1.0).abs() < 1e-15);
        assert!(is_in_h(&b.conjugator, 1e-9).0);

        let f = TernaryForm::diagonal(1, 1, -1).unwrap();
        let o = orbit_from_form(&f).unwrap();
        assert!((o.lambda + 1.0).abs() < 1e-15);
        let res = (o.conjugator.transpose() * form_b() * o.conjugator - f.gram_f64().scale(o.lambda)).norm();
        assert!(res <= 1e-9);

        let f = TernaryForm::diagonal(1, 1, -3).unwrap();
        let o = orbit_from_form(&f).unwrap();
        assert!((o.lambda.abs() - 3f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        let res = (o.conjugator.transpose() * form_b() * o.conjugator - f.gram_f64().scale(o.lambda)).norm();
        assert!(res <= 1e-9);
        assert!((o.conjugator.det() - 1.0).abs() <= 1e-9);
        assert!(certificate_residual(&o, &o.conjugator) < 1e-12);
    }

    #[test]
    fn walk_points_carry_the_form() {
        let o = orbit_from_form(&TernaryForm::diagonal(1, 1, -3).unwrap()).unwrap();
        let spec = WalkSpec { steps: 3000, burn_in: 100, seed: 4, ..WalkSpec::default() };
        let s = orbit_walk(&o, &spec).unwrap();
        assert_eq!(s.points.len(), 300);
        assert!(s.max_residual <= DRIFT_TOL);
        for p in &s.points {
            assert!(certificate_residual(&o, p.basis()) <= CERT_TOL);
        }
        let again = orbit_walk(&o, &spec).unwrap();
        assert_eq!(s.to_text(), again.to_text());
    }

    #[test]
    fn reprojection_removes_drift() {
        let o = orbit_from_form(&TernaryForm::diagonal(1, 1, -3).unwrap()).unwrap();
        let noisy = o.conjugator + Mat3::from_rows([[1e-7, 0.0, -2e-7], [0.0, 3e-7, 0.0], [1e-7, 0.0, 0.0]]);
        let before = certificate_residual(&o, &noisy);
        let after = certificate_residual(&o, &reproject(&o, &noisy));
        assert!(before > 1e-8 && after < 1e-12, "{before} {after}");
    }

    #[test]
    fn choose_n_examples() {
        let e13 = LieVector::e13();
        let t: f64 = -2.0;
        assert_eq!(choose_n(&(e13 * t.exp())).unwrap(), 1);
        assert_eq!(choose_n(&(e13 * (-10f64).exp())).unwrap(), 5);
        assert_eq!(choose_n(&e13).unwrap(), 1);
        let r1 = LieVector::basis(5);
        assert_eq!(choose_n(&r1), Err(Error::ZeroTransverse));
    }

    #[test]
    fn shear_examples() {
        let r0 = LieVector::e13() * 0.3;
        let (_, dev) = shear_displacement(&r0, 3, 0.0).unwrap();
        assert!(dev < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let mut c: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            c[0] = 0.0;
            let r = LieVector::from_r_coords(c);
            let n = rng.gen_range(1..6);
            let (image, _) = shear_displacement(&r, n, 0.0).unwrap();
            assert!(image.norm() <= 3.0 * (n as f64).exp() * r.norm());
        }
    }

    #[test]
    fn iota_calibration_is_frozen() {
        let iota = calibrate_iota(2024, 100, 1000, 0.025, 0.55).unwrap();
        assert_eq!(iota, IOTA);
    }
}
