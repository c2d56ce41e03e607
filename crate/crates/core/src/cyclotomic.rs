//! Exact arithmetic with sums of roots of unity.
//!
//! A [`CycQ`] stores Σ c_j ζ_N^j with rational coefficients as a vector in
//! the group algebra ℚ[ℤ/Nℤ]. Addition, multiplication and conjugation are
//! convolution-style operations on that vector. The representation is not
//! unique as a complex number (e.g. 1 + ζ_3 + ζ_3² = 0), so equality and
//! rationality tests reduce modulo the N-th cyclotomic polynomial first.
//!
//! Frobenian means and local masses must snap to exact rationals; this type
//! is what makes those snaps exact rather than floating-point guesses.
//! A float fast path ([`CycQ::to_complex`]) exists for |value| evaluations
//! with roughly 1e-15 per-operation rounding.

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;
use std::sync::OnceLock;

use crate::util::lcm_u64;

#[derive(Clone, Debug)]
pub struct CycQ {
    /// Order of the root of unity: the value is Σ coeffs[j]·ζ_order^j.
    pub order: u64,
    pub coeffs: Vec<BigRational>,
}

impl CycQ {
    pub fn zero(order: u64) -> Self {
        CycQ {
            order,
            coeffs: vec![BigRational::zero(); order as usize],
        }
    }

    pub fn one(order: u64) -> Self {
        Self::from_rational(order, BigRational::one())
    }

    pub fn from_rational(order: u64, r: BigRational) -> Self {
        let mut v = Self::zero(order);
        v.coeffs[0] = r;
        v
    }

    pub fn from_integer(order: u64, n: i64) -> Self {
        Self::from_rational(order, BigRational::from_integer(BigInt::from(n)))
    }

    /// ζ_order^k.
    pub fn root_of_unity(order: u64, k: u64) -> Self {
        let mut v = Self::zero(order);
        let idx = (k % order) as usize;
        v.coeffs[idx] = BigRational::one();
        v
    }

    pub fn is_zero_vector(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Re-embed into the group algebra of order `new_order` (a multiple).
    pub fn embed(&self, new_order: u64) -> CycQ {
        assert_eq!(new_order % self.order, 0, "embedding needs a multiple order");
        let scale = new_order / self.order;
        let mut out = CycQ::zero(new_order);
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out.coeffs[j * scale as usize] = c.clone();
            }
        }
        out
    }

    fn common(a: &CycQ, b: &CycQ) -> (CycQ, CycQ) {
        if a.order == b.order {
            (a.clone(), b.clone())
        } else {
            let n = lcm_u64(a.order, b.order);
            (a.embed(n), b.embed(n))
        }
    }

    pub fn add(&self, other: &CycQ) -> CycQ {
        let (mut a, b) = Self::common(self, other);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x += y;
        }
        a
    }

    pub fn sub(&self, other: &CycQ) -> CycQ {
        let (mut a, b) = Self::common(self, other);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x -= y;
        }
        a
    }

    pub fn mul(&self, other: &CycQ) -> CycQ {
        let (a, b) = Self::common(self, other);
        let n = a.order as usize;
        let mut out = CycQ::zero(a.order);
        for (i, ci) in a.coeffs.iter().enumerate() {
            if ci.is_zero() {
                continue;
            }
            for (j, cj) in b.coeffs.iter().enumerate() {
                if cj.is_zero() {
                    continue;
                }
                let k = (i + j) % n;
                out.coeffs[k] += ci * cj;
            }
        }
        out
    }

    pub fn scale(&self, r: &BigRational) -> CycQ {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= r;
        }
        out
    }

    /// Complex conjugate: ζ^j -> ζ^{-j}.
    pub fn conj(&self) -> CycQ {
        let n = self.order as usize;
        let mut out = CycQ::zero(self.order);
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out.coeffs[(n - j) % n] = c.clone();
            }
        }
        out
    }

    /// Real part, still exact: (x + conj x)/2.
    pub fn real_part(&self) -> CycQ {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        self.add(&self.conj()).scale(&half)
    }

    /// Canonical residue mod the order-N cyclotomic polynomial; two CycQ are
    /// the same complex number iff these agree.
    pub fn canonical(&self) -> Vec<BigRational> {
        let phi = cyclotomic_polynomial(self.order);
        // reduce the polynomial Σ coeffs[j] x^j mod phi(x)
        let mut rem: Vec<BigRational> = self.coeffs.clone();
        let deg_phi = phi.len() - 1;
        while rem.len() > deg_phi {
            let lead = rem.pop().unwrap();
            if lead.is_zero() {
                continue;
            }
            let top = rem.len() - deg_phi;
            // phi is monic with integer coefficients
            for (k, pk) in phi.iter().enumerate().take(deg_phi) {
                if !pk.is_zero() {
                    let delta = &lead * BigRational::from_integer(pk.clone());
                    rem[top + k] -= delta;
                }
            }
        }
        rem.resize(deg_phi.max(1), BigRational::zero());
        rem
    }

    pub fn eq_value(&self, other: &CycQ) -> bool {
        let (a, b) = Self::common(self, other);
        a.canonical() == b.canonical()
    }

    /// Exact rational value, if this cyclotomic number is rational.
    pub fn as_rational(&self) -> Option<BigRational> {
        let c = self.canonical();
        if c.iter().skip(1).all(|x| x.is_zero()) {
            Some(c[0].clone())
        } else {
            None
        }
    }

    pub fn to_complex(&self) -> (f64, f64) {
        let n = self.order as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let x = crate::util::rational_to_f64(c);
            let theta = 2.0 * PI * (j as f64) / n;
            re += x * theta.cos();
            im += x * theta.sin();
        }
        (re, im)
    }

    pub fn to_f64_real(&self) -> f64 {
        self.to_complex().0
    }
}

/// Coefficients (constant term first) of the N-th cyclotomic polynomial,
/// integer and monic. Computed by dividing x^N - 1 by the Φ_d for d | N.
fn cyclotomic_polynomial(n: u64) -> Vec<BigInt> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Vec<BigInt>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&n) {
        return p.clone();
    }
    let result = compute_cyclotomic(n);
    cache.lock().unwrap().insert(n, result.clone());
    result
}

fn compute_cyclotomic(n: u64) -> Vec<BigInt> {
    if n == 1 {
        return vec![BigInt::from(-1), BigInt::from(1)];
    }
    // x^n - 1
    let mut num = vec![BigInt::zero(); n as usize + 1];
    num[0] = BigInt::from(-1);
    num[n as usize] = BigInt::one();
    for d in 1..n {
        if n % d == 0 {
            let phi_d = cyclotomic_polynomial(d);
            num = poly_div_exact(&num, &phi_d);
        }
    }
    num
}

/// Exact division of integer polynomials (remainder must vanish).
fn poly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let mut rem: Vec<BigInt> = num.to_vec();
    let dd = den.len() - 1;
    assert!(den[dd].is_one(), "divisor must be monic");
    let mut quot = vec![BigInt::zero(); rem.len() - dd];
    for i in (dd..rem.len()).rev() {
        let c = rem[i].clone();
        if c.is_zero() {
            continue;
        }
        quot[i - dd] = c.clone();
        for (k, dk) in den.iter().enumerate() {
            let sub = dk * &c;
            rem[i - dd + k] -= sub;
        }
    }
    assert!(rem.iter().all(|c| c.is_zero()), "non-exact polynomial division");
    quot
}

/// Majorant Σ |c_j| of the coefficient vector, as f64.
pub fn coeff_l1_norm(v: &CycQ) -> f64 {
    v.coeffs
        .iter()
        .map(|c| crate::util::rational_to_f64(&c.abs()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_sum_detected() {
        // 1 + ζ_3 + ζ_3² = 0
        let s = CycQ::one(3)
            .add(&CycQ::root_of_unity(3, 1))
            .add(&CycQ::root_of_unity(3, 2));
        assert!(!s.is_zero_vector());
        assert!(s.eq_value(&CycQ::zero(3)));
        assert_eq!(s.as_rational(), Some(BigRational::zero()));
    }

    #[test]
    fn i_squared_is_minus_one() {
        let i = CycQ::root_of_unity(4, 1);
        let m1 = i.mul(&i);
        assert!(m1.eq_value(&CycQ::from_integer(4, -1)));
        assert_eq!(m1.as_rational(), Some(BigRational::from_integer(BigInt::from(-1))));
    }

    #[test]
    fn cross_order_arithmetic() {
        // ζ_4 · ζ_4 = ζ_2
        let a = CycQ::root_of_unity(4, 1);
        let b = CycQ::root_of_unity(2, 1);
        assert!(a.mul(&a).eq_value(&b));
        // real part of ζ_8 is sqrt(2)/2, not rational
        let z8 = CycQ::root_of_unity(8, 1);
        assert!(z8.real_part().as_rational().is_none());
        let (re, im) = z8.to_complex();
        assert!((re - (PI / 4.0).cos()).abs() < 1e-14);
        assert!((im - (PI / 4.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn cyclotomic_polys() {
        let p4 = compute_cyclotomic(4); // x^2 + 1
        assert_eq!(p4, vec![BigInt::from(1), BigInt::from(0), BigInt::from(1)]);
        let p6 = compute_cyclotomic(6); // x^2 - x + 1
        assert_eq!(p6, vec![BigInt::from(1), BigInt::from(-1), BigInt::from(1)]);
    }
}
