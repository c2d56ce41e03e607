//! Dirichlet characters mod m and L-values.
//!
//! Characters are parameterised by exponent vectors against fixed generators
//! of (ℤ/mℤ)^× (CRT over prime powers; 2-power part generated by −1 and 5).
//! Values are roots of unity of order dividing the unit-group exponent.
//!
//! L(1, χ) for non-principal χ uses the finite Gauss digamma formula
//! L(1,χ) = −(1/m) Σ_a χ(a) ψ(a/m), valid for imprimitive characters too;
//! an independent cross-check via Gauss sums over the primitive core is in
//! the tests. L(s, χ) for real s > 1 goes through Hurwitz zeta with
//! Euler–Maclaurin. Absolute target error is 1e-12.

use num::complex::Complex64;
use std::f64::consts::PI;

use crate::primes::{factorize, primitive_root_mod_prime_power, sieve_primes};
use crate::util::{gcd_u64, lcm_u64};

/// Multiplicative structure of (ℤ/mℤ)^×.
#[derive(Clone, Debug)]
pub struct UnitGroup {
    pub m: u64,
    pub gens: Vec<u64>,
    pub gen_orders: Vec<u64>,
    /// exponent of the unit group (lcm of generator orders)
    pub lambda: u64,
    dlog: Vec<Option<Vec<u32>>>,
}

impl UnitGroup {
    pub fn new(m: u64) -> Self {
        assert!(m >= 1);
        let mut gens: Vec<u64> = Vec::new();
        let mut gen_orders: Vec<u64> = Vec::new();
        for (p, e) in factorize(m) {
            let pe = p.pow(e);
            let rest = m / pe;
            let mut push = |g_local: u64, order: u64| {
                gens.push(crt(g_local, pe, 1, rest));
                gen_orders.push(order);
            };
            if p == 2 {
                match e {
                    1 => {}
                    2 => push(3, 2),
                    _ => {
                        push(pe - 1, 2);
                        push(5, pe / 4);
                    }
                }
            } else {
                push(primitive_root_mod_prime_power(p, e), pe / p * (p - 1));
            }
        }
        let lambda = gen_orders.iter().fold(1u64, |acc, &o| lcm_u64(acc, o));
        // decompose all units
        let mut dlog: Vec<Option<Vec<u32>>> = vec![None; m as usize];
        let mut stack: Vec<(usize, u64, Vec<u32>)> = vec![(0, 1 % m.max(1), vec![])];
        while let Some((i, acc, exps)) = stack.pop() {
            if i == gens.len() {
                dlog[acc as usize] = Some(exps);
                continue;
            }
            let mut cur = acc;
            for e in 0..gen_orders[i] {
                let mut ex = exps.clone();
                ex.push(e as u32);
                stack.push((i + 1, cur, ex));
                cur = cur * gens[i] % m;
            }
        }
        UnitGroup {
            m,
            gens,
            gen_orders,
            lambda,
            dlog,
        }
    }

    pub fn phi(&self) -> u64 {
        self.gen_orders.iter().product::<u64>().max(1)
    }

    pub fn is_unit(&self, a: u64) -> bool {
        self.dlog[(a % self.m) as usize].is_some()
    }

    pub fn units(&self) -> Vec<u64> {
        (0..self.m).filter(|&a| self.is_unit(a)).collect()
    }
}

fn crt(a: u64, m: u64, b: u64, n: u64) -> u64 {
    if n <= 1 {
        return a % m.max(1);
    }
    let mut x = a % m;
    while x % n != b % n {
        x += m;
    }
    x % (m * n)
}

/// A Dirichlet character mod m as an exponent vector against the fixed
/// generators: χ(g_i) = e^{2πi·exps_i/ord_i}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DirichletCharacter {
    pub m: u64,
    pub exps: Vec<u32>,
}

impl DirichletCharacter {
    pub fn principal(ug: &UnitGroup) -> Self {
        DirichletCharacter {
            m: ug.m,
            exps: vec![0; ug.gens.len()],
        }
    }

    pub fn is_principal(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    /// χ(a) as k ∈ ℤ/λ with value e^{2πik/λ}; None when gcd(a, m) > 1.
    pub fn eval_additive(&self, ug: &UnitGroup, a: u64) -> Option<u64> {
        let exps = ug.dlog[(a % ug.m) as usize].as_ref()?;
        let lam = ug.lambda;
        let mut acc: u64 = 0;
        for ((&e, &chi_e), &ord) in exps.iter().zip(self.exps.iter()).zip(ug.gen_orders.iter()) {
            // χ contributes e·chi_e/ord of a turn
            acc = (acc + (e as u64 % ord) * (chi_e as u64) % ord * (lam / ord)) % lam;
        }
        Some(acc)
    }

    pub fn eval(&self, ug: &UnitGroup, a: u64) -> Complex64 {
        match self.eval_additive(ug, a) {
            None => Complex64::new(0.0, 0.0),
            Some(k) => unit_circle(k as f64 / ug.lambda as f64),
        }
    }

    pub fn conj(&self, ug: &UnitGroup) -> Self {
        DirichletCharacter {
            m: self.m,
            exps: self
                .exps
                .iter()
                .zip(ug.gen_orders.iter())
                .map(|(&e, &o)| ((o - e as u64 % o) % o) as u32)
                .collect(),
        }
    }

    pub fn pow(&self, ug: &UnitGroup, k: u64) -> Self {
        DirichletCharacter {
            m: self.m,
            exps: self
                .exps
                .iter()
                .zip(ug.gen_orders.iter())
                .map(|(&e, &o)| ((e as u64 * k) % o) as u32)
                .collect(),
        }
    }

    /// Smallest f | m such that χ factors through (ℤ/fℤ)^×.
    pub fn conductor(&self, ug: &UnitGroup) -> u64 {
        let m = ug.m;
        let mut best = m;
        for f in 1..=m {
            if m % f != 0 {
                continue;
            }
            let factors_through = ug
                .units()
                .iter()
                .all(|&a| a % f != 1 % f.max(1) || self.eval_additive(ug, a) == Some(0));
            if factors_through {
                best = f;
                break;
            }
        }
        best
    }
}

pub fn all_characters(ug: &UnitGroup) -> Vec<DirichletCharacter> {
    let mut out = vec![DirichletCharacter {
        m: ug.m,
        exps: vec![],
    }];
    out.clear();
    let mut stack: Vec<Vec<u32>> = vec![vec![]];
    for &ord in &ug.gen_orders {
        let mut next = Vec::new();
        for prefix in stack {
            for e in 0..ord {
                let mut v = prefix.clone();
                v.push(e as u32);
                next.push(v);
            }
        }
        stack = next;
    }
    for exps in stack {
        out.push(DirichletCharacter { m: ug.m, exps });
    }
    out
}

fn unit_circle(turns: f64) -> Complex64 {
    let theta = 2.0 * PI * turns;
    Complex64::new(theta.cos(), theta.sin())
}

// ---------------------------------------------------------------------------
// digamma, Hurwitz zeta, L-values

/// Gauss digamma theorem at a rational argument a/m with 0 < a < m.
pub fn digamma_rational(a: u64, m: u64) -> f64 {
    const EULER_GAMMA: f64 = 0.5772156649015328606;
    let x = a as f64 / m as f64;
    let mut val = -EULER_GAMMA - (2.0 * m as f64).ln() - PI / 2.0 * (PI * x).tan().recip();
    let half = (m - 1) / 2;
    for k in 1..=half {
        let t = PI * k as f64 / m as f64;
        val += 2.0 * (2.0 * PI * k as f64 * x).cos() * t.sin().ln();
    }
    val
}

const BERNOULLI_2J: [f64; 11] = [
    0.0, // unused
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta ζ(s, x) for real s > 1, x > 0, via Euler–Maclaurin.
pub fn hurwitz_zeta(s: f64, x: f64) -> f64 {
    assert!(s > 1.0 && x > 0.0);
    let k = 24usize;
    let mut sum = 0.0;
    for i in 0..k {
        sum += (x + i as f64).powf(-s);
    }
    let xk = x + k as f64;
    sum += xk.powf(1.0 - s) / (s - 1.0);
    sum += 0.5 * xk.powf(-s);
    // Σ B_{2j}/(2j)! (s)_{2j-1} xk^{-s-2j+1}
    let mut rising = s; // (s)_1 = s
    let mut fact = 1.0f64; // (2j)!
    for j in 1..=10 {
        fact *= (2 * j) as f64 * (2 * j - 1) as f64;
        let term = BERNOULLI_2J[j] / fact * rising * xk.powf(-s - (2 * j - 1) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
        rising *= (s + (2 * j - 1) as f64) * (s + (2 * j) as f64);
    }
    sum
}

pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LValueError {
    #[error("L(1, χ) diverges for the principal character")]
    PrincipalAtOne,
    #[error("L(s, χ) only implemented for s >= 1")]
    OutOfRange(f64),
}

/// L(s, χ) for real s ≥ 1. χ may be imprimitive. Absolute error ~1e-12.
pub fn l_value(ug: &UnitGroup, chi: &DirichletCharacter, s: f64) -> Result<Complex64, LValueError> {
    if s < 1.0 {
        return Err(LValueError::OutOfRange(s));
    }
    if (s - 1.0).abs() < 1e-15 {
        if chi.is_principal() {
            return Err(LValueError::PrincipalAtOne);
        }
        // L(1,χ) = −(1/m) Σ_a χ(a) ψ(a/m)
        let m = ug.m;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 1..m {
            let v = chi.eval(ug, a);
            if v.norm_sqr() == 0.0 {
                continue;
            }
            acc += v * digamma_rational(a, m);
        }
        return Ok(-acc / m as f64);
    }
    if chi.is_principal() {
        // ζ(s) Π_{p|m} (1 − p^{-s})
        let mut v = riemann_zeta(s);
        for (p, _) in factorize(ug.m) {
            v *= 1.0 - (p as f64).powf(-s);
        }
        return Ok(Complex64::new(v, 0.0));
    }
    // m^{-s} Σ_a χ(a) ζ(s, a/m)
    let m = ug.m;
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 1..m {
        let v = chi.eval(ug, a);
        if v.norm_sqr() == 0.0 {
            continue;
        }
        acc += v * hurwitz_zeta(s, a as f64 / m as f64);
    }
    Ok(acc * (m as f64).powf(-s))
}

/// log L(s, χ) matching the Euler-product branch (the value of the Dirichlet
/// series Σ_{p,j} χ(p)^j/(j p^{js})), not necessarily the principal log.
pub fn log_l_series_branch(
    ug: &UnitGroup,
    chi: &DirichletCharacter,
    s: f64,
) -> Result<Complex64, LValueError> {
    let value = l_value(ug, chi, s)?;
    let principal = Complex64::new(value.norm().ln(), value.arg());
    if s >= 2.0 || chi.is_principal() {
        // |L − 1| < 1 here, the principal branch is the series branch
        return Ok(principal);
    }
    // estimate the series branch coarsely and correct by multiples of 2πi
    let mut est = Complex64::new(0.0, 0.0);
    for &p in sieve_primes(20_000).iter() {
        let cp = chi.eval(ug, p);
        if cp.norm_sqr() == 0.0 {
            continue;
        }
        let ps = (p as f64).powf(-s);
        let mut powc = cp;
        let mut powp = ps;
        for j in 1..=3 {
            est += powc * powp / j as f64;
            powc *= cp;
            powp *= ps;
        }
    }
    let n = ((est.im - principal.im) / (2.0 * PI)).round();
    Ok(principal + Complex64::new(0.0, 2.0 * PI * n))
}

/// Σ_p χ(p) p^{−s} over all primes, via P(s) = Σ_k μ(k)/k · log L(ks, χ^k).
pub fn prime_zeta_chi(
    ug: &UnitGroup,
    chi: &DirichletCharacter,
    s: f64,
) -> Result<Complex64, LValueError> {
    let mu = crate::primes::moebius_table(80);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 1..=((64.0 / s).ceil() as usize).clamp(2, 79) {
        if mu[k] == 0 {
            continue;
        }
        let term = log_l_series_branch(ug, &chi.pow(ug, k as u64), s * k as f64)?;
        acc += term * (mu[k] as f64 / k as f64);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chi_minus4(ug: &UnitGroup) -> DirichletCharacter {
        // the odd character mod 4
        all_characters(ug)
            .into_iter()
            .find(|c| !c.is_principal())
            .unwrap()
    }

    #[test]
    fn character_table_mod4() {
        let ug = UnitGroup::new(4);
        assert_eq!(ug.phi(), 2);
        let chi = chi_minus4(&ug);
        assert_eq!(chi.eval_additive(&ug, 1), Some(0));
        let v3 = chi.eval(&ug, 3);
        assert!((v3.re + 1.0).abs() < 1e-15 && v3.im.abs() < 1e-15);
        assert_eq!(chi.eval_additive(&ug, 2), None);
    }

    #[test]
    fn leibniz_value() {
        // L(1, χ_{−4}) = π/4
        let ug = UnitGroup::new(4);
        let chi = chi_minus4(&ug);
        let v = l_value(&ug, &chi, 1.0).unwrap();
        assert!((v.re - PI / 4.0).abs() < 1e-12, "{v}");
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn quadratic_mod8_value() {
        // L(1, χ_8) = log(1+√2)/√2
        let ug = UnitGroup::new(8);
        let chi = all_characters(&ug)
            .into_iter()
            .find(|c| {
                !c.is_principal()
                    && (c.eval(&ug, 7).re - 1.0).abs() < 1e-12
                    && (c.eval(&ug, 3).re + 1.0).abs() < 1e-12
            })
            .unwrap();
        let expected = (1.0 + 2f64.sqrt()).ln() / 2f64.sqrt();
        let v = l_value(&ug, &chi, 1.0).unwrap();
        assert!((v.re - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn gauss_sum_cross_check() {
        // independent evaluation of L(1,χ) for primitive odd χ:
        // L(1,χ) = iπ τ(χ) B_{1,χ̄} / f
        let ug = UnitGroup::new(4);
        let chi = chi_minus4(&ug);
        let f = 4u64;
        let mut tau = Complex64::new(0.0, 0.0);
        for a in 1..f {
            tau += chi.eval(&ug, a) * unit_circle(a as f64 / f as f64);
        }
        let chib = chi.conj(&ug);
        let mut b1 = Complex64::new(0.0, 0.0);
        for a in 1..f {
            b1 += chib.eval(&ug, a) * (a as f64 / f as f64);
        }
        let gauss_route = Complex64::new(0.0, PI) * tau * b1 / f as f64;
        let digamma_route = l_value(&ug, &chi, 1.0).unwrap();
        assert!((gauss_route - digamma_route).norm() < 1e-12);
    }

    #[test]
    fn conjugate_pairs_positive() {
        let ug = UnitGroup::new(16);
        for chi in all_characters(&ug) {
            if chi.is_principal() {
                continue;
            }
            let l = l_value(&ug, &chi, 1.0).unwrap();
            let lb = l_value(&ug, &chi.conj(&ug), 1.0).unwrap();
            let prod = l * lb;
            assert!(prod.im.abs() < 1e-10);
            assert!(prod.re > 0.0);
        }
    }

    #[test]
    fn principal_at_one_rejected() {
        let ug = UnitGroup::new(4);
        let chi0 = DirichletCharacter::principal(&ug);
        assert_eq!(l_value(&ug, &chi0, 1.0), Err(LValueError::PrincipalAtOne));
    }

    #[test]
    fn zeta_values() {
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((riemann_zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-13);
        // Hurwitz splitting: ζ(s) = 2^{-s}(ζ(s, 1/2) + ζ(s, 1))
        let s = 3.3;
        let lhs = riemann_zeta(s);
        let rhs = 2f64.powf(-s) * (hurwitz_zeta(s, 0.5) + hurwitz_zeta(s, 1.0));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn prime_zeta_against_direct_sum() {
        // at s = 3 the direct prime sum converges quickly
        let ug = UnitGroup::new(4);
        for chi in all_characters(&ug) {
            let via_l = prime_zeta_chi(&ug, &chi, 3.0).unwrap();
            let mut direct = Complex64::new(0.0, 0.0);
            for &p in sieve_primes(200_000).iter() {
                direct += chi.eval(&ug, p) * (p as f64).powf(-3.0);
            }
            assert!((via_l - direct).norm() < 1e-9, "chi = {chi:?}");
        }
    }

    #[test]
    fn conductor_computation() {
        let ug = UnitGroup::new(8);
        for chi in all_characters(&ug) {
            let f = chi.conductor(&ug);
            match chi.exps.as_slice() {
                [0, 0] => assert_eq!(f, 1),
                // χ(−1-part) only: that is χ_{−4} induced mod 8
                [1, 0] => assert_eq!(f, 4),
                _ => assert_eq!(f, 8),
            }
        }
    }
}
