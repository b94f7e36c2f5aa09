//! Exact rational ternary quadratic forms.
//!
//! A form is stored through its symmetric Gram matrix, `Q(v) = vᵀ G v`.
//! Text input lists six rationals `a11 a22 a33 a12 a13 a23`, meaning
//! `Q(v) = Σ aᵢᵢvᵢ² + 2 Σ_{i<j} aᵢⱼvᵢvⱼ`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::Mat3;
use crate::reduction::IntMat;

pub type Gram = [[BigRational; 3]; 3];

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TernaryForm {
    gram: Gram,
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl TernaryForm {
    /// Builds a form from a symmetric Gram matrix. The form must be
    /// nondegenerate and indefinite.
    pub fn new(gram: Gram) -> Result<Self> {
        for i in 0..3 {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(Error::Invalid("Gram matrix is not symmetric".into()));
                }
            }
        }
        let form = TernaryForm { gram };
        if form.det().is_zero() {
            return Err(Error::DegenerateForm);
        }
        let (p, n) = form.signature();
        if p == 0 || n == 0 {
            return Err(Error::DefiniteForm);
        }
        Ok(form)
    }

    pub fn from_coeffs(c: [BigRational; 6]) -> Result<Self> {
        let [a11, a22, a33, a12, a13, a23] = c;
        TernaryForm::new([
            [a11, a12.clone(), a13.clone()],
            [a12, a22, a23.clone()],
            [a13, a23, a33],
        ])
    }

    pub fn from_int_coeffs(c: [i64; 6]) -> Result<Self> {
        TernaryForm::from_coeffs(c.map(q))
    }

    pub fn diagonal(a: i64, b: i64, c: i64) -> Result<Self> {
        TernaryForm::from_int_coeffs([a, b, c, 0, 0, 0])
    }

    /// The form `B(v) = 2v₁v₃ − v₂²`.
    pub fn form_b() -> Self {
        TernaryForm::from_int_coeffs([0, -1, 0, 0, 1, 0]).expect("B is nondegenerate and indefinite")
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    pub fn coeffs(&self) -> [BigRational; 6] {
        let g = &self.gram;
        [g[0][0].clone(), g[1][1].clone(), g[2][2].clone(), g[0][1].clone(), g[0][2].clone(), g[1][2].clone()]
    }

    pub fn det(&self) -> BigRational {
        let g = &self.gram;
        &g[0][0] * (&g[1][1] * &g[2][2] - &g[1][2] * &g[2][1]) - &g[0][1] * (&g[1][0] * &g[2][2] - &g[1][2] * &g[2][0])
            + &g[0][2] * (&g[1][0] * &g[2][1] - &g[1][1] * &g[2][0])
    }

    /// `|det G|`.
    pub fn disc(&self) -> BigRational {
        self.det().abs()
    }

    /// Diagonal entries of a rational congruence diagonalization.
    pub fn diagonalize(&self) -> [BigRational; 3] {
        let mut a = self.gram.clone();
        let mut out: Vec<BigRational> = Vec::with_capacity(3);
        let mut active: Vec<usize> = vec![0, 1, 2];
        while !active.is_empty() {
            let pivot = active.iter().copied().find(|&i| !a[i][i].is_zero());
            let p = match pivot {
                Some(p) => p,
                None => {
                    // all diagonal entries vanish: x_i → x_i + x_j creates one
                    let pair = active
                        .iter()
                        .flat_map(|&i| active.iter().map(move |&j| (i, j)))
                        .find(|&(i, j)| i != j && !a[i][j].is_zero());
                    match pair {
                        Some((i, j)) => {
                            for k in 0..3 {
                                let v = a[j][k].clone();
                                a[i][k] += v;
                            }
                            for k in 0..3 {
                                let v = a[k][j].clone();
                                a[k][i] += v;
                            }
                            i
                        }
                        None => {
                            for _ in &active {
                                out.push(BigRational::zero());
                            }
                            break;
                        }
                    }
                }
            };
            let d = a[p][p].clone();
            for &i in &active {
                for &j in &active {
                    if i != p && j != p {
                        let v = &a[i][p] * &a[p][j] / &d;
                        a[i][j] -= v;
                    }
                }
            }
            out.push(d);
            active.retain(|&i| i != p);
        }
        [out[0].clone(), out[1].clone(), out[2].clone()]
    }

    /// Numbers of positive and negative squares.
    pub fn signature(&self) -> (usize, usize) {
        let d = self.diagonalize();
        (d.iter().filter(|x| x.is_positive()).count(), d.iter().filter(|x| x.is_negative()).count())
    }

    pub fn gram_f64(&self) -> Mat3 {
        Mat3::from_rows(std::array::from_fn(|i| std::array::from_fn(|j| self.gram[i][j].to_f64().unwrap_or(f64::NAN))))
    }

    pub fn eval(&self, v: [i64; 3]) -> BigRational {
        let mut s = BigRational::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += &self.gram[i][j] * BigInt::from(v[i]) * BigInt::from(v[j]);
            }
        }
        s
    }

    /// `γᵀ G γ`.
    pub fn transform(&self, gamma: &IntMat) -> TernaryForm {
        let mut out: Gram = std::array::from_fn(|_| std::array::from_fn(|_| BigRational::zero()));
        for i in 0..3 {
            for j in 0..3 {
                let mut s = BigRational::zero();
                for k in 0..3 {
                    for l in 0..3 {
                        s += &self.gram[k][l] * BigInt::from(gamma[k][i] * gamma[l][j]);
                    }
                }
                out[i][j] = s;
            }
        }
        TernaryForm { gram: out }
    }

    pub fn scaled(&self, c: &BigRational) -> Result<TernaryForm> {
        TernaryForm::new(std::array::from_fn(|i| std::array::from_fn(|j| &self.gram[i][j] * c)))
    }

    /// Least common denominator of the Gram entries.
    pub fn denominator(&self) -> BigInt {
        self.gram.iter().flatten().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
    }

    /// `D·G` as integers, where `D` is [`denominator`](Self::denominator).
    pub fn integer_gram(&self) -> [[BigInt; 3]; 3] {
        let d = self.denominator();
        std::array::from_fn(|i| std::array::from_fn(|j| (&self.gram[i][j] * &d).to_integer()))
    }

    /// The gcd of all values `Q(v)`, `v ∈ ℤ³`: `gcd(aᵢᵢ, 2aᵢⱼ)`.
    pub fn content(&self) -> BigRational {
        let d = self.denominator();
        let g = self.integer_gram();
        let mut c = BigInt::zero();
        for i in 0..3 {
            for j in i..3 {
                let v = if i == j { g[i][i].clone() } else { BigInt::from(2) * &g[i][j] };
                c = c.gcd(&v);
            }
        }
        BigRational::new(c, d)
    }

    /// Whether `Q(v) = 0` has a nonzero rational solution, decided by Hilbert
    /// symbols at 2 and at the odd primes dividing the diagonalized
    /// coefficients.
    pub fn is_isotropic(&self) -> bool {
        let d = self.diagonalize().map(|x| square_class(&x));
        let (a, b, c) = (&d[0], &d[1], &d[2]);
        // ax² + by² + cz² = 0 is solvable iff (−ac, −bc)_p = 1 for all p
        let x = -(a * c);
        let y = -(b * c);
        let mut primes = vec![BigInt::from(2)];
        for n in [a, b, c] {
            for p in prime_factors(&n.abs()) {
                if !primes.contains(&p) {
                    primes.push(p);
                }
            }
        }
        if x.is_negative() && y.is_negative() {
            return false;
        }
        primes.iter().all(|p| hilbert_symbol(&x, &y, p) == 1)
    }

    pub fn to_text(&self) -> String {
        self.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    }
}

impl fmt::Debug for TernaryForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TernaryForm({})", self.to_text())
    }
}

impl fmt::Display for TernaryForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for TernaryForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.len() != 6 {
            return Err(Error::Invalid(format!("expected 6 coefficients, found {}", tokens.len())));
        }
        let mut c: Vec<BigRational> = Vec::with_capacity(6);
        for t in tokens {
            let r = t.parse::<BigRational>().map_err(|_| Error::Invalid(format!("bad rational {t:?}")))?;
            c.push(r);
        }
        let c: [BigRational; 6] = c.try_into().expect("six entries");
        TernaryForm::from_coeffs(c)
    }
}

/// Parses one form per nonblank line; `#` starts a comment.
pub fn parse_forms(text: &str) -> Result<Vec<TernaryForm>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f = line.parse::<TernaryForm>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.push(f);
    }
    Ok(out)
}

/// Squarefree integer in the square class of a nonzero rational.
fn square_class(x: &BigRational) -> BigInt {
    let n = x.numer() * x.denom();
    let sign = if n.is_negative() { -BigInt::one() } else { BigInt::one() };
    let mut m = n.abs();
    let mut out = BigInt::one();
    for p in prime_factors(&m.clone()) {
        let mut e = 0u32;
        while (&m % &p).is_zero() {
            m /= &p;
            e += 1;
        }
        if e % 2 == 1 {
            out *= &p;
        }
    }
    sign * out
}

fn prime_factors(n: &BigInt) -> Vec<BigInt> {
    let mut m = n.abs();
    let mut out = Vec::new();
    let mut p = BigInt::from(2);
    while &p * &p <= m {
        if (&m % &p).is_zero() {
            out.push(p.clone());
            while (&m % &p).is_zero() {
                m /= &p;
            }
        }
        p += 1;
    }
    if m > BigInt::one() {
        out.push(m);
    }
    out
}

fn valuation(n: &BigInt, p: &BigInt) -> (u32, BigInt) {
    let mut m = n.clone();
    let mut e = 0;
    while (&m % p).is_zero() {
        m /= p;
        e += 1;
    }
    (e, m)
}

fn legendre(u: &BigInt, p: &BigInt) -> i32 {
    let r = u.mod_floor(p);
    let e: BigInt = (p - 1i32) / 2i32;
    let v = r.modpow(&e, p);
    if v.is_one() {
        1
    } else {
        -1
    }
}

fn mod8(u: &BigInt) -> i64 {
    u.mod_floor(&BigInt::from(8)).to_i64().expect("small")
}

/// Hilbert symbol `(a, b)_p` for nonzero integers and a finite prime `p`.
pub fn hilbert_symbol(a: &BigInt, b: &BigInt, p: &BigInt) -> i32 {
    let (alpha, u) = valuation(a, p);
    let (beta, v) = valuation(b, p);
    if *p == BigInt::from(2) {
        let eps = |x: &BigInt| ((mod8(x) - 1) / 2) % 2;
        let omega = |x: &BigInt| {
            let m = mod8(x);
            ((m * m - 1) / 8) % 2
        };
        let e = eps(&u) * eps(&v) + alpha as i64 * omega(&v) + beta as i64 * omega(&u);
        if e % 2 == 0 {
            1
        } else {
            -1
        }
    } else {
        let half: BigInt = ((p - 1i32) / 2i32).mod_floor(&BigInt::from(2));
        let mut s = if (alpha as u64 * beta as u64) % 2 == 1 && half.is_one() { -1 } else { 1 };
        if beta % 2 == 1 {
            s *= legendre(&u, p);
        }
        if alpha % 2 == 1 {
            s *= legendre(&v, p);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let f: TernaryForm = "1 1 -3 0 0 0".parse().unwrap();
        assert_eq!(f, TernaryForm::diagonal(1, 1, -3).unwrap());
        let g: TernaryForm = "1/2 3 -5/3 1/4 0 -1".parse().unwrap();
        assert_eq!(g.to_text().parse::<TernaryForm>().unwrap(), g);
        assert!(matches!("1 1 1 0 0 0".parse::<TernaryForm>(), Err(Error::DefiniteForm)));
        assert!(matches!("1 1 0 0 0 0".parse::<TernaryForm>(), Err(Error::DegenerateForm)));
        assert!(matches!(parse_forms("1 1 -1 0 0 0\nfoo"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn signature_and_disc() {
        assert_eq!(TernaryForm::diagonal(1, 1, -3).unwrap().signature(), (2, 1));
        assert_eq!(TernaryForm::form_b().signature(), (1, 2));
        assert_eq!(TernaryForm::form_b().disc(), q(1));
        assert_eq!(TernaryForm::diagonal(1, 1, -3).unwrap().disc(), q(3));
        assert_eq!(TernaryForm::form_b().eval([1, 2, 3]), q(2 * 3 - 4));
    }

    #[test]
    fn hilbert_symbol_table() {
        let h = |a: i64, b: i64, p: i64| hilbert_symbol(&BigInt::from(a), &BigInt::from(b), &BigInt::from(p));
        assert_eq!(h(-1, -1, 2), -1);
        assert_eq!(h(2, 3, 3), -1);
        assert_eq!(h(3, 3, 3), -1);
        assert_eq!(h(5, 5, 5), 1);
        assert_eq!(h(-1, 3, 3), -1);
        assert_eq!(h(2, 5, 5), -1);
        assert_eq!(h(2, 7, 2), 1);
        assert_eq!(h(3, 5, 2), 1);
        assert_eq!(h(3, 3, 2), -1);
    }

    fn brute_isotropic(f: &TernaryForm, n: i64) -> bool {
        for x in -n..=n {
            for y in -n..=n {
                for z in -n..=n {
                    if (x, y, z) != (0, 0, 0) && f.eval([x, y, z]).is_zero() {
                        return true;
                    }
                }
            }
        }
        false
    }

    #[test]
    fn isotropy_matches_small_search() {
        for p in [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31] {
            let f = TernaryForm::diagonal(1, 1, -p).unwrap();
            assert_eq!(f.is_isotropic(), p % 4 != 3, "p = {p}");
            assert_eq!(f.is_isotropic(), brute_isotropic(&f, 12), "p = {p}");
        }
        assert!(TernaryForm::form_b().is_isotropic());
        let f: TernaryForm = "1 2 -5 1 0 1".parse().unwrap();
        assert_eq!(f.is_isotropic(), brute_isotropic(&f, 15));
    }

    #[test]
    fn transform_and_content() {
        let f = TernaryForm::diagonal(1, 1, -3).unwrap();
        let g = f.transform(&[[1, 1, 0], [0, 1, 0], [0, 0, 1]]);
        assert_eq!(g.disc(), f.disc());
        assert_eq!(g.eval([1, 0, 0]), q(1));
        assert_eq!(g.eval([0, 1, 0]), q(2));
        let h: TernaryForm = "2 4 -6 1 0 0".parse().unwrap();
        assert_eq!(h.content(), q(2));
        let k: TernaryForm = "1/2 1/3 -1 0 0 0".parse().unwrap();
        assert_eq!(k.content(), BigRational::new(BigInt::from(1), BigInt::from(6)));
    }
}
