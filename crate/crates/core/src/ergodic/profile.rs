//! The plateau profile and sup bounds for its derivatives.
//!
//! `ψ(u) = step(2(1 − u))` with `step(y) = φ(y) / (φ(y) + φ(1 − y))` and
//! `φ(x) = e^{−1/x}` for `x > 0`. So `ψ = 1` on `[0, ½]`, `ψ = 0` on
//! `[1, ∞)`. Bumps use `Ψ(q) = ψ(√q)` with `q = dist²/ρ²`, which is smooth
//! in the chart coordinates.

use std::sync::OnceLock;

/// Highest derivative order with a precomputed sup bound.
pub const MAX_ORDER: usize = 24;

const GRID: usize = 40_000;

/// Truncated Taylor series `Σ c_k ε^k`.
#[derive(Clone, Copy, Debug)]
struct Jet {
    c: [f64; MAX_ORDER + 2],
}

impl Jet {
    const N: usize = MAX_ORDER + 2;

    fn constant(x: f64) -> Self {
        let mut c = [0.0; Self::N];
        c[0] = x;
        Jet { c }
    }

    fn variable(x: f64) -> Self {
        let mut j = Jet::constant(x);
        j.c[1] = 1.0;
        j
    }

    fn add(&self, o: &Jet) -> Jet {
        Jet { c: std::array::from_fn(|i| self.c[i] + o.c[i]) }
    }

    fn scale(&self, a: f64) -> Jet {
        Jet { c: self.c.map(|x| a * x) }
    }

    fn shift(&self, a: f64) -> Jet {
        let mut j = *self;
        j.c[0] += a;
        j
    }

    fn mul(&self, o: &Jet) -> Jet {
        let mut c = [0.0; Self::N];
        for i in 0..Self::N {
            for k in 0..=i {
                c[i] += self.c[k] * o.c[i - k];
            }
        }
        Jet { c }
    }

    fn recip(&self) -> Jet {
        let mut c = [0.0; Self::N];
        c[0] = 1.0 / self.c[0];
        for i in 1..Self::N {
            let s: f64 = (1..=i).map(|k| self.c[k] * c[i - k]).sum();
            c[i] = -s / self.c[0];
        }
        Jet { c }
    }

    fn exp(&self) -> Jet {
        // e' = a' e
        let mut c = [0.0; Self::N];
        c[0] = self.c[0].exp();
        for i in 1..Self::N {
            let s: f64 = (1..=i).map(|k| k as f64 * self.c[k] * c[i - k]).sum();
            c[i] = s / i as f64;
        }
        Jet { c }
    }

    fn sqrt(&self) -> Jet {
        let mut c = [0.0; Self::N];
        c[0] = self.c[0].sqrt();
        for i in 1..Self::N {
            let s: f64 = (1..i).map(|k| c[k] * c[i - k]).sum();
            c[i] = (self.c[i] - s) / (2.0 * c[0]);
        }
        Jet { c }
    }
}

fn phi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn step(y: f64) -> f64 {
    let a = phi(y);
    let b = phi(1.0 - y);
    if a + b == 0.0 {
        return if y >= 1.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

/// `ψ(u)`.
pub fn psi(u: f64) -> f64 {
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        step(2.0 * (1.0 - u))
    }
}

/// Taylor coefficients of `Ψ` at `q`, or `None` where the profile is flat to
/// working precision.
fn psi_q_jet(q: f64) -> Option<Jet> {
    if !(q > 0.25 && q < 1.0) {
        return None;
    }
    let s = Jet::variable(q).sqrt();
    let y = s.scale(-2.0).shift(2.0);
    let one_minus_y = y.scale(-1.0).shift(1.0);
    let z = y.recip().add(&one_minus_y.recip().scale(-1.0));
    if z.c[0].abs() > 600.0 {
        return None;
    }
    // Ψ = 1/(1 + e^z), written with e^{−|z|} so no jet coefficient overflows
    if z.c[0] > 0.0 {
        let w = z.scale(-1.0).exp();
        Some(w.mul(&w.shift(1.0).recip()))
    } else {
        Some(z.exp().shift(1.0).recip())
    }
}

/// `Ψ^{(k)}(q)` for `k ≤ MAX_ORDER + 1`.
pub fn psi_q_derivative(q: f64, k: usize) -> f64 {
    match psi_q_jet(q) {
        Some(j) => j.c[k] * factorial(k),
        None => {
            if k == 0 {
                if q <= 0.25 {
                    1.0
                } else {
                    0.0
                }
            } else {
                0.0
            }
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

struct Sups {
    /// `P_k = max_{j ≤ k} sup |Ψ^{(j)}|`.
    p: [f64; MAX_ORDER + 1],
    /// `sup |ψ'|`.
    dpsi: f64,
}

fn sups() -> &'static Sups {
    static CELL: OnceLock<Sups> = OnceLock::new();
    CELL.get_or_init(|| {
        let h = 0.75 / GRID as f64;
        let mut grid_max = [0.0f64; MAX_ORDER + 2];
        let mut dpsi: f64 = 0.0;
        for i in 0..=GRID {
            let q = 0.25 + i as f64 * h;
            if let Some(j) = psi_q_jet(q) {
                for (k, m) in grid_max.iter_mut().enumerate() {
                    *m = m.max((j.c[k] * factorial(k)).abs());
                }
            }
            let u = 0.5 + 0.5 * i as f64 / GRID as f64;
            let d = (psi((u + 1e-7).min(1.0)) - psi((u - 1e-7).max(0.5))) / 2e-7;
            dpsi = dpsi.max(d.abs());
        }
        // between grid points |Ψ^{(k)}| exceeds the grid value by at most
        // h·sup|Ψ^{(k+1)}|; the safety factor covers rounding in the jets
        let mut p = [0.0; MAX_ORDER + 1];
        let mut running: f64 = 0.0;
        for k in 0..=MAX_ORDER {
            let local = (grid_max[k] + h * grid_max[k + 1]) * 1.01;
            running = running.max(local);
            p[k] = running;
        }
        Sups { p, dpsi: dpsi * 1.01 + 1e-6 }
    })
}

/// `P_k = max_{j ≤ k} sup |Ψ^{(j)}|`.
pub fn derivative_sup(k: usize) -> f64 {
    sups().p[k.min(MAX_ORDER)]
}

/// `sup |ψ'|`.
pub fn psi_lipschitz() -> f64 {
    sups().dpsi
}

/// Telephone numbers: `T_0 = T_1 = 1`, `T_k = T_{k−1} + (k − 1)T_{k−2}`.
pub fn telephone(k: usize) -> f64 {
    let (mut a, mut b) = (1.0f64, 1.0f64);
    for i in 2..=k {
        let c = b + (i as f64 - 1.0) * a;
        a = b;
        b = c;
    }
    if k == 0 {
        1.0
    } else {
        b
    }
}
