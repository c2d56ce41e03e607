//! Prime sieves, primitive roots, modular arithmetic and small discrete
//! logarithms in subgroups of (ℤ/pℤ)^×.
//!
//! Everything here is deterministic; per-prime data (least primitive root,
//! small discrete logs) is computed on demand and safe to recompute
//! concurrently.

/// Simple sieve of Eratosthenes returning all primes <= limit.
pub fn sieve_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Möbius function table for 0..=limit.
pub fn moebius_table(limit: usize) -> Vec<i8> {
    let mut mu = vec![1i8; limit + 1];
    let mut is_composite = vec![false; limit + 1];
    let mut primes: Vec<usize> = Vec::new();
    if limit >= 1 {
        mu[0] = 0;
    }
    for i in 2..=limit {
        if !is_composite[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &p in &primes {
            let ip = i.checked_mul(p);
            let Some(ip) = ip else { break };
            if ip > limit {
                break;
            }
            is_composite[ip] = true;
            if i % p == 0 {
                mu[ip] = 0;
                break;
            } else {
                mu[ip] = -mu[i];
            }
        }
    }
    mu
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    // deterministic Miller-Rabin for u64
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a % n, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Least positive primitive root mod a prime p; (ℤ/2ℤ)^× is trivial and
/// gets the degenerate generator 1.
pub fn least_primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    assert!(p >= 3 && is_prime(p), "primitive root wanted mod prime {p}");
    let factors: Vec<u64> = factorize(p - 1).into_iter().map(|(q, _)| q).collect();
    'cand: for g in 2..p {
        for &q in &factors {
            if pow_mod(g, (p - 1) / q, p) == 1 {
                continue 'cand;
            }
        }
        return g;
    }
    unreachable!("no primitive root mod {p}")
}

/// Least primitive root mod p^e for odd prime p (generator of (ℤ/p^e)^×).
pub fn primitive_root_mod_prime_power(p: u64, e: u32) -> u64 {
    let g = least_primitive_root(p);
    if e == 1 {
        return g;
    }
    // g generates mod p^e unless g^(p-1) = 1 mod p^2, in which case g + p does.
    let p2 = p * p;
    if pow_mod(g, p - 1, p2) == 1 {
        g + p
    } else {
        g
    }
}

/// Discrete log of u in the order-d subgroup of (ℤ/pℤ)^×, where d | p-1:
/// returns k mod d with u^((p-1)/d) = h^k for h = g^((p-1)/d).
/// This equals ind_g(u) mod d without computing the full index.
pub fn tame_dlog_mod_d(p: u64, g: u64, u: u64, d: u64) -> u64 {
    debug_assert_eq!((p - 1) % d, 0);
    let u = u % p;
    assert!(u != 0, "dlog of 0 mod {p}");
    if d == 1 {
        return 0;
    }
    let q = (p - 1) / d;
    let target = pow_mod(u, q, p);
    let h = pow_mod(g, q, p);
    // d is tiny (<= exponent of G), brute force the cyclic group
    let mut acc = 1u64;
    for k in 0..d {
        if acc == target {
            return k;
        }
        acc = mul_mod(acc, h, p);
    }
    panic!("{u} is not in the subgroup of order {d} mod {p} (g = {g})");
}

/// All primitive roots mod p (used by property tests only; p small).
pub fn all_primitive_roots(p: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let factors: Vec<u64> = factorize(p - 1).into_iter().map(|(q, _)| q).collect();
    'cand: for g in 2..p {
        for &q in &factors {
            if pow_mod(g, (p - 1) / q, p) == 1 {
                continue 'cand;
            }
        }
        out.push(g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_and_primality_agree() {
        let primes = sieve_primes(1000);
        for n in 0..=1000u64 {
            assert_eq!(primes.contains(&n), is_prime(n), "n = {n}");
        }
    }

    #[test]
    fn primitive_roots() {
        assert_eq!(least_primitive_root(5), 2);
        assert_eq!(least_primitive_root(7), 3);
        assert_eq!(least_primitive_root(13), 2);
        // 2 generates (Z/9)^x: 2,4,8,7,5,1
        assert_eq!(primitive_root_mod_prime_power(3, 2), 2);
    }

    #[test]
    fn subgroup_dlog_matches_full_index() {
        let p = 13u64;
        let g = least_primitive_root(p);
        // full index table
        let mut ind = vec![0u64; p as usize];
        let mut acc = 1u64;
        for k in 0..p - 1 {
            ind[acc as usize] = k;
            acc = mul_mod(acc, g, p);
        }
        for d in [1u64, 2, 3, 4, 6, 12] {
            for u in 1..p {
                assert_eq!(tame_dlog_mod_d(p, g, u, d), ind[u as usize] % d);
            }
        }
    }

    #[test]
    fn moebius_small() {
        let mu = moebius_table(12);
        assert_eq!(&mu[1..=12], &[1, -1, -1, 0, -1, 1, -1, 0, 0, 1, -1, 0]);
    }
}
