//! Markov triples, the binary spectrum above 4/9, and minima of ternary
//! forms.

use std::collections::{BTreeSet, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::form::TernaryForm;

/// Solution of `a² + b² + c² = 3abc`, sorted ascending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MarkovTriple {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl MarkovTriple {
    fn sorted(mut v: [u64; 3]) -> Self {
        v.sort_unstable();
        MarkovTriple { a: v[0], b: v[1], c: v[2] }
    }

    /// The Markov identity in arbitrary precision.
    pub fn is_valid(&self) -> bool {
        let [a, b, c] = [self.a, self.b, self.c].map(BigUint::from);
        &a * &a + &b * &b + &c * &c == BigUint::from(3u32) * &a * &b * &c
    }
}

/// All triples with largest entry at most `bound`, by Vieta moves from
/// `(1, 1, 1)`, ordered by `(c, b, a)`.
pub fn markov_triples(bound: u64) -> Result<Vec<MarkovTriple>> {
    if bound < 1 {
        return Err(Error::Invalid("bound must be at least 1".into()));
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([MarkovTriple { a: 1, b: 1, c: 1 }]);
    while let Some(t) = queue.pop_front() {
        if t.c > bound || !seen.insert(t) {
            continue;
        }
        debug_assert!(t.is_valid());
        let (a, b, c) = (t.a as u128, t.b as u128, t.c as u128);
        for (x, y, z) in [(a, c, 3 * a * c - b), (b, c, 3 * b * c - a)] {
            if z <= bound as u128 {
                queue.push_back(MarkovTriple::sorted([x as u64, y as u64, z as u64]));
            }
        }
    }
    let mut out: Vec<MarkovTriple> = seen.into_iter().filter(|t| t.is_valid()).collect();
    out.sort_by_key(|t| (t.c, t.b, t.a));
    Ok(out)
}

/// Distinct Markov numbers up to `bound`, ascending.
pub fn markov_numbers(bound: u64) -> Result<Vec<u64>> {
    let set: BTreeSet<u64> = markov_triples(bound)?.iter().flat_map(|t| [t.a, t.b, t.c]).collect();
    Ok(set.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumValue {
    pub m: u64,
    #[serde(serialize_with = "ser_rational")]
    pub value: BigRational,
}

fn ser_rational<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

/// `4m² / (9m² − 4)`.
pub fn spectrum_value(m: u64) -> BigRational {
    let m2 = BigInt::from(m) * BigInt::from(m);
    BigRational::new(BigInt::from(4) * &m2, BigInt::from(9) * &m2 - BigInt::from(4))
}

/// Spectrum values for all Markov numbers up to `bound`, in decreasing order.
pub fn binary_spectrum(bound: u64) -> Result<Vec<SpectrumValue>> {
    Ok(markov_numbers(bound)?.into_iter().map(|m| SpectrumValue { m, value: spectrum_value(m) }).collect())
}

/// Smallest `|Q(v)|` over a box, with the certification status.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuReport {
    #[serde(serialize_with = "ser_form")]
    pub form: TernaryForm,
    #[serde(serialize_with = "ser_rational")]
    pub min_abs: BigRational,
    pub attaining: [i64; 3],
    pub search_radius: i64,
    #[serde(serialize_with = "ser_rational")]
    pub disc: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub mu: BigRational,
    /// Whether `min_abs` is the infimum over all of `ℤ³ ∖ {0}`.
    pub certified: bool,
}

fn ser_form<S: serde::Serializer>(q: &TernaryForm, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_text())
}

/// Ordering key for candidate minimizers: value, sup norm, ℓ¹ norm, then the
/// lexicographically largest coordinates, so `(1, 0, 0)` wins ties.
type Key = (BigInt, i64, i64, std::cmp::Reverse<[i64; 3]>);

fn better(a: &Key, b: &Key) -> bool {
    a < b
}

/// Scans `D·Q(v)` over `0 < ‖v‖_∞ ≤ n` with `v` taken up to sign. Values fit
/// in `i128` when the integer Gram entries are below `2^60 / (9n²)`; larger
/// forms fall back to big integers.
fn box_minimum(form: &TernaryForm, n: i64) -> Key {
    let g = form.integer_gram();
    let small: Option<[[i128; 3]; 3]> = {
        let limit = (1i128 << 60) / (9 * (n as i128) * (n as i128));
        let mut out = [[0i128; 3]; 3];
        let mut ok = true;
        for i in 0..3 {
            for j in 0..3 {
                match g[i][j].to_i128() {
                    Some(x) if x.abs() <= limit => out[i][j] = x,
                    _ => ok = false,
                }
            }
        }
        ok.then_some(out)
    };
    let slab = |x: i64| -> Option<Key> {
        let mut best: Option<Key> = None;
        for y in -n..=n {
            for z in -n..=n {
                // canonical representative of ±v: first nonzero coordinate positive
                if x == 0 && (y < 0 || (y == 0 && z <= 0)) {
                    continue;
                }
                let v = [x, y, z];
                let val = match &small {
                    Some(m) => {
                        let w = [x as i128, y as i128, z as i128];
                        let mut s = 0i128;
                        for i in 0..3 {
                            for j in 0..3 {
                                s += m[i][j] * w[i] * w[j];
                            }
                        }
                        BigInt::from(s.abs())
                    }
                    None => {
                        let mut s = BigInt::zero();
                        for i in 0..3 {
                            for j in 0..3 {
                                s += &g[i][j] * BigInt::from(v[i]) * BigInt::from(v[j]);
                            }
                        }
                        s.abs()
                    }
                };
                let key = (val, x.abs().max(y.abs()).max(z.abs()), x.abs() + y.abs() + z.abs(), std::cmp::Reverse(v));
                if best.as_ref().is_none_or(|b| better(&key, b)) {
                    best = Some(key);
                }
            }
        }
        best
    };
    (0..=n)
        .into_par_iter()
        .filter_map(slab)
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("box is nonempty")
}

/// Exact minimum of `|Q(v)|` over `0 ≠ v ∈ ℤ³`, `‖v‖_∞ ≤ n`.
///
/// The value is certified as `m(Q)` when it is zero, or when `Q` is
/// anisotropic over ℚ and the box minimum equals the content of `Q` (no
/// nonzero value can be smaller). Otherwise it is an upper bound.
pub fn ternary_min(form: &TernaryForm, n: i64) -> Result<MuReport> {
    if n < 1 {
        return Err(Error::Invalid("search radius must be at least 1".into()));
    }
    let (value, _, _, std::cmp::Reverse(v)) = box_minimum(form, n);
    let min_abs = BigRational::new(value, form.denominator());
    let certified = min_abs.is_zero() || (min_abs == form.content() && !form.is_isotropic());
    let disc = form.disc();
    let mu = mu_from(&min_abs, &disc);
    Ok(MuReport { form: form.clone(), min_abs, attaining: v, search_radius: n, disc, mu, certified })
}

fn mu_from(min_abs: &BigRational, disc: &BigRational) -> BigRational {
    min_abs * min_abs * min_abs / disc
}

/// `μ(Q) = m(Q)³ / |det G|`.
pub fn mu_value(report: &MuReport) -> BigRational {
    mu_from(&report.min_abs, &report.disc)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    #[serde(serialize_with = "ser_form")]
    pub form: TernaryForm,
    #[serde(serialize_with = "ser_rational")]
    pub mu: BigRational,
    /// `|det G|`, standing in for the orbit volume.
    #[serde(serialize_with = "ser_rational")]
    pub disc: BigRational,
    pub certified: bool,
    pub included: bool,
}

/// Marks the forms with `μ > ε`.
pub fn fat_form_scan(family: &[TernaryForm], epsilon: &BigRational, n: i64) -> Result<Vec<ScanRow>> {
    if !epsilon.is_positive() {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    family
        .iter()
        .map(|f| {
            let r = ternary_min(f, n)?;
            Ok(ScanRow { included: r.mu > *epsilon, form: r.form, mu: r.mu, disc: r.disc, certified: r.certified })
        })
        .collect()
}

/// CSV rows `m,value_num,value_den`.
pub fn spectrum_csv(values: &[SpectrumValue]) -> String {
    let mut s = String::from("m,value_num,value_den\n");
    for v in values {
        s += &format!("{},{},{}\n", v.m, v.value.numer(), v.value.denom());
    }
    s
}

/// CSV rows `form,min_abs,vx,vy,vz,disc,mu_num,mu_den,certified`.
pub fn reports_csv(reports: &[MuReport]) -> String {
    let mut s = String::from("form,min_abs,vx,vy,vz,disc,mu_num,mu_den,certified\n");
    for r in reports {
        s += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.form.to_text(),
            r.min_abs,
            r.attaining[0],
            r.attaining[1],
            r.attaining[2],
            r.disc,
            r.mu.numer(),
            r.mu.denom(),
            r.certified
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::orbit_from_form;
    use crate::linalg::b_value;
    use crate::reduction::{int_det, INT_IDENTITY};
    use rand::Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn small_triples() {
        let t = markov_triples(2).unwrap();
        assert_eq!(t, vec![MarkovTriple { a: 1, b: 1, c: 1 }, MarkovTriple { a: 1, b: 1, c: 2 }]);
        assert_eq!(markov_numbers(30).unwrap(), vec![1, 2, 5, 13, 29]);
        assert_eq!(markov_triples(30).unwrap().len(), 5);
        // brute force over c ≤ 200
        let mut brute = Vec::new();
        for c in 1..=200u64 {
            for b in 1..=c {
                for a in 1..=b {
                    if a * a + b * b + c * c == 3 * a * b * c {
                        brute.push(MarkovTriple { a, b, c });
                    }
                }
            }
        }
        assert_eq!(markov_triples(200).unwrap(), brute);
    }

    #[test]
    fn spectrum_endpoints() {
        let s = binary_spectrum(1000).unwrap();
        assert_eq!(s[0].value, q(4, 5));
        assert_eq!(s[1].value, q(1, 2));
        for w in s.windows(2) {
            assert!(w[0].value > w[1].value);
        }
        assert!(s.iter().all(|v| v.value > q(4, 9) && v.value <= q(4, 5)));
    }

    #[test]
    fn spectrum_matches_markov_forms() {
        // f = m x² + (3m − 2k) xy + (l − 3k) y² with k² + 1 = l m has
        // discriminant 9m² − 4; its minimum over a box is m
        for m in markov_numbers(200).unwrap() {
            let m = m as i64;
            let k = (0..m.max(2)).find(|k| (k * k + 1) % m == 0).unwrap();
            let l = (k * k + 1) / m;
            let (a, b, c) = (m, 3 * m - 2 * k, l - 3 * k);
            assert_eq!(b * b - 4 * a * c, 9 * m * m - 4);
            let mut best = i64::MAX;
            for x in -60i64..=60 {
                for y in -60i64..=60 {
                    if (x, y) != (0, 0) {
                        best = best.min((a * x * x + b * x * y + c * y * y).abs());
                    }
                }
            }
            assert_eq!(best, m);
            // Gram determinant of the binary form is (b² − 4ac)/4 in absolute value
            let value = q(best * best, 1) / q(9 * m * m - 4, 4);
            assert_eq!(value, spectrum_value(m as u64));
        }
    }

    #[test]
    fn ternary_examples() {
        let r = ternary_min(&TernaryForm::diagonal(1, 1, -1).unwrap(), 3).unwrap();
        assert!(r.min_abs.is_zero() && r.certified);
        assert_eq!(r.attaining, [1, 0, 1]);
        let f = TernaryForm::diagonal(1, 1, -1).unwrap();
        assert!(f.eval(r.attaining).is_zero());
        let r = ternary_min(&TernaryForm::diagonal(1, 1, -3).unwrap(), 10).unwrap();
        assert_eq!(r.min_abs, q(1, 1));
        assert_eq!(r.attaining, [1, 0, 0]);
        assert_eq!(mu_value(&r), q(1, 3));
        assert!(r.certified);
        let r = ternary_min(&TernaryForm::form_b(), 5).unwrap();
        assert!(r.min_abs.is_zero());
        assert_eq!(r.attaining, [1, 0, 0]);
    }

    #[test]
    fn box_minimum_matches_bigint_scan() {
        let f: TernaryForm = "3 -5 7 1 2 -1".parse().unwrap();
        let r = ternary_min(&f, 6).unwrap();
        let mut best: Option<BigRational> = None;
        for x in -6i64..=6 {
            for y in -6i64..=6 {
                for z in -6i64..=6 {
                    if (x, y, z) != (0, 0, 0) {
                        let v = f.eval([x, y, z]).abs();
                        if best.as_ref().is_none_or(|b| v < *b) {
                            best = Some(v);
                        }
                    }
                }
            }
        }
        assert_eq!(Some(r.min_abs.clone()), best);
        assert_eq!(f.eval(r.attaining).abs(), r.min_abs);
    }

    #[test]
    fn monotone_in_radius_and_scaling() {
        let f: TernaryForm = "2 3 -7 1 0 0".parse().unwrap();
        let mut last = None;
        for n in 1..8 {
            let r = ternary_min(&f, n).unwrap();
            if let Some(prev) = last {
                assert!(r.min_abs <= prev);
            }
            last = Some(r.min_abs);
        }
        let g = TernaryForm::diagonal(1, 1, -3).unwrap();
        let a = ternary_min(&g, 6).unwrap();
        let b = ternary_min(&g.scaled(&q(5, 1)).unwrap(), 6).unwrap();
        assert_eq!(mu_value(&a), mu_value(&b));
        let c = ternary_min(&g, 11).unwrap();
        assert_eq!((a.min_abs, a.certified), (c.min_abs, c.certified));
    }

    fn random_unimodular(rng: &mut impl Rng) -> [[i64; 3]; 3] {
        let mut g = INT_IDENTITY;
        for _ in 0..4 {
            let (i, j) = (rng.gen_range(0..3), rng.gen_range(0..3));
            if i != j {
                let c = rng.gen_range(-2..=2);
                for row in g.iter_mut() {
                    row[j] += c * row[i];
                }
            }
        }
        g
    }

    #[test]
    fn equivalent_forms_share_certified_minimum() {
        let f = TernaryForm::diagonal(1, 1, -3).unwrap();
        let base = ternary_min(&f, 4).unwrap();
        let mut rng = crate::rng::stream(11, "gl3", 0);
        for _ in 0..20 {
            let g = random_unimodular(&mut rng);
            assert_eq!(int_det(&g).abs(), 1);
            let inv = crate::linalg::Mat3::from_rows(g.map(|r| r.map(|x| x as f64))).inverse().unwrap();
            // γ⁻¹ maps the minimizer (1, 0, 0) into a box of this radius
            let n = (0..3).map(|i| inv.get(i, 0).abs().round() as i64).max().unwrap().max(1);
            let r = ternary_min(&f.transform(&g), n).unwrap();
            assert!(r.certified);
            assert_eq!(r.min_abs, base.min_abs);
        }
    }

    #[test]
    fn orbit_basepoint_reproduces_mu() {
        for f in [TernaryForm::diagonal(1, 1, -3).unwrap(), "2 3 -7 1 0 0".parse().unwrap()] {
            let n = 5;
            let r = ternary_min(&f, n).unwrap();
            let orbit = orbit_from_form(&f).unwrap();
            let g = orbit.conjugator;
            let mut best = f64::INFINITY;
            for x in -n..=n {
                for y in -n..=n {
                    for z in -n..=n {
                        if (x, y, z) != (0, 0, 0) {
                            best = best.min(b_value(g.apply([x as f64, y as f64, z as f64])).abs());
                        }
                    }
                }
            }
            let mu = r.mu.to_f64().unwrap();
            assert!((best.powi(3) - mu).abs() < 1e-9, "{} {}", best.powi(3), mu);
        }
    }

    #[test]
    fn scan_filters_by_epsilon() {
        let fam: Vec<TernaryForm> =
            [(1, 1, -1), (1, 1, -3), (1, 1, -7), (1, 2, -5)].iter().map(|&(a, b, c)| TernaryForm::diagonal(a, b, c).unwrap()).collect();
        let rows = fat_form_scan(&fam, &q(1, 4), 6).unwrap();
        assert!(!rows[0].included);
        assert!(rows[1].included);
        let mut last = usize::MAX;
        for k in 1..40 {
            let eps = q(k, 40);
            let c = fat_form_scan(&fam, &eps, 6).unwrap().iter().filter(|r| r.included).count();
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn csv_headers() {
        assert!(spectrum_csv(&binary_spectrum(5).unwrap()).starts_with("m,value_num,value_den\n1,4,5\n"));
        let r = ternary_min(&TernaryForm::diagonal(1, 1, -3).unwrap(), 2).unwrap();
        assert_eq!(reports_csv(&[r]).lines().nth(1).unwrap(), "1 1 -3 0 0 0,1,1,0,0,3,1,3,true");
    }
}
