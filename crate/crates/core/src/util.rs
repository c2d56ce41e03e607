//! Small shared helpers: exact rationals as strings, deterministic
//! formatting of floats, gcd/lcm on machine integers.

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use std::str::FromStr;

use crate::config::ConfigError;

/// Parse a rational from `"3"`, `"1/2"`, `"-7/4"` form.
pub fn parse_rational(s: &str) -> Result<BigRational, ConfigError> {
    let s = s.trim();
    let mk_err = || ConfigError::BadRational(s.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| mk_err())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| mk_err())?;
        if d.is_zero() {
            return Err(mk_err());
        }
        Ok(BigRational::new(n, d))
    } else {
        let n = BigInt::from_str(s).map_err(|_| mk_err())?;
        Ok(BigRational::from_integer(n))
    }
}

/// Render a rational as `num/den` (or plain integer when den = 1).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Floats are emitted with 17 significant digits so that re-emission is
/// byte-identical and round-trips through f64 exactly.
pub fn format_f64(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        // keep integral values readable but unambiguous
        format!("{:.1}", x)
    } else {
        format!("{:.16e}", x)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // good enough for the magnitudes used here (heights, weights, masses)
    let n = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let d = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    n / d
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm_u64(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd_u64(a, b) * b
    }
}

/// Euler phi of a machine integer.
pub fn euler_phi(mut m: u64) -> u64 {
    let mut result = m;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

/// Integer part of the d-th root, exact (largest r with r^d <= x).
pub fn iroot(x: u128, d: u32) -> u128 {
    if d == 1 || x <= 1 {
        return x;
    }
    let mut r = (x as f64).powf(1.0 / d as f64) as u128;
    // float guess can be off by one in either direction
    while r > 0 && checked_pow_u128(r, d).map_or(true, |v| v > x) {
        r -= 1;
    }
    while checked_pow_u128(r + 1, d).map_or(false, |v| v <= x) {
        r += 1;
    }
    r
}

pub fn checked_pow_u128(base: u128, exp: u32) -> Option<u128> {
    if base <= 1 {
        return Some(if exp == 0 { 1 } else { base });
    }
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Convert a non-negative rational with denominator 1 into u128.
pub fn rational_to_u128_floor(r: &BigRational) -> Option<u128> {
    if r.is_negative() {
        return None;
    }
    let q = r.numer() / r.denom();
    let (_, digits) = q.to_u64_digits();
    match digits.len() {
        0 => Some(0),
        1 => Some(digits[0] as u128),
        2 => Some((digits[1] as u128) << 64 | digits[0] as u128),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trip() {
        for s in ["1/2", "3", "-7/4", "10/4"] {
            let r = parse_rational(s).unwrap();
            let t = parse_rational(&format_rational(&r)).unwrap();
            assert_eq!(r, t);
        }
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn iroot_exact() {
        assert_eq!(iroot(10_000_000, 2), 3162);
        assert_eq!(iroot(3162 * 3162, 2), 3162);
        assert_eq!(iroot(1, 5), 1);
        assert_eq!(iroot(u128::MAX, 1), u128::MAX);
    }

    #[test]
    fn phi_values() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(8), 4);
        assert_eq!(euler_phi(9), 6);
        assert_eq!(euler_phi(2 * 3 * 5 * 7), 48);
    }
}
