//! Rigorous evaluation of Euler products over the tame primes.
//!
//! A product ∏_p F_p(p^{−1/denom}) is described by local factor polynomials
//! with cyclotomic coefficients. Three modes:
//!
//! * rigorous (periodic): the coefficient functions are periodic mod m, so
//!   the log-series coefficients decompose against Dirichlet characters and
//!   the conditionally convergent layer is evaluated through L(s, χ) and
//!   prime-zeta values. Primes up to a cutoff are multiplied exactly as
//!   written; only the tail goes through the character model, with an
//!   explicit majorant bound on the discarded terms.
//! * absolute (direct): every exponent exceeds 1, so the raw product with an
//!   integral tail bound suffices. Used for aperiodic (non-abelian) factor
//!   systems in the absolutely convergent regime.
//! * heuristic (scan): a flagged partial product with an empirical
//!   oscillation error bar, for conditionally convergent aperiodic systems.
//!
//! Divergent inputs (a nonvanishing principal coefficient at exponent 1) are
//! rejected, never truncated into a finite answer.

use num::complex::Complex64;
use num::rational::BigRational;
use num::{BigInt, One, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

use crate::cyclotomic::{coeff_l1_norm, CycQ};
use crate::dirichlet::{all_characters, prime_zeta_chi, DirichletCharacter, UnitGroup};
use crate::primes::sieve_primes;

#[derive(Debug, Error)]
pub enum EulerError {
    #[error("divergent Euler product: principal character coefficient at exponent 1 is {0}")]
    Divergent(String),
    #[error("exponent {0} below 1: product diverges")]
    ExponentBelowOne(u32),
    #[error("skip prime {0} exceeds the evaluation cutoff {1}")]
    SkipBeyondCutoff(u64, u64),
    #[error("absolute mode needs all exponents > 1 (found {0}/{1})")]
    NotAbsolutelyConvergent(u32, u32),
    #[error(transparent)]
    LValue(#[from] crate::dirichlet::LValueError),
    #[error("local factor vanished at p = {0}; product is exactly zero")]
    VanishingFactor(u64),
}

/// Polynomial Σ_e coeff_e · y^e with cyclotomic coefficients, y = p^{−1/denom}.
/// The constant term (e = 0) must be 1 for a local Euler factor.
#[derive(Clone, Debug)]
pub struct CycPoly {
    pub terms: BTreeMap<u32, CycQ>,
}

impl CycPoly {
    pub fn one(order: u64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(0, CycQ::one(order));
        CycPoly { terms }
    }

    pub fn add_term(&mut self, exp: u32, coeff: CycQ) {
        match self.terms.get_mut(&exp) {
            Some(c) => *c = c.add(&coeff),
            None => {
                self.terms.insert(exp, coeff);
            }
        }
    }

    pub fn mul(&self, other: &CycPoly) -> CycPoly {
        let mut terms: BTreeMap<u32, CycQ> = BTreeMap::new();
        for (&e1, c1) in &self.terms {
            for (&e2, c2) in &other.terms {
                let prod = c1.mul(c2);
                match terms.get_mut(&(e1 + e2)) {
                    Some(c) => *c = c.add(&prod),
                    None => {
                        terms.insert(e1 + e2, prod);
                    }
                }
            }
        }
        CycPoly { terms }
    }

    /// (1 − y^d)^b convergence factor.
    pub fn convergence_factor(order: u64, d: u32, b: u64) -> CycPoly {
        let mut base = CycPoly::one(order);
        base.add_term(d, CycQ::from_integer(order, -1));
        let mut acc = CycPoly::one(order);
        for _ in 0..b {
            acc = acc.mul(&base);
        }
        acc
    }

    fn nonconstant_min_exp(&self) -> Option<u32> {
        self.terms.keys().copied().find(|&e| e > 0)
    }

    /// complex coefficients sorted by exponent, constant term dropped
    fn complex_terms(&self) -> Vec<(u32, Complex64)> {
        self.terms
            .iter()
            .filter(|(&e, _)| e > 0)
            .map(|(&e, c)| {
                let (re, im) = c.to_complex();
                (e, Complex64::new(re, im))
            })
            .collect()
    }

    fn eval_complex(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&e, c) in &self.terms {
            let (re, im) = c.to_complex();
            acc += Complex64::new(re, im) * t.powi(e as i32);
        }
        acc
    }

    /// Σ_{e>0} |coeff_e| as f64 (majorant data).
    pub fn l1_norm(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(&e, _)| e > 0)
            .map(|(_, c)| coeff_l1_norm(c))
            .sum()
    }

    /// Formal log series Σ_{j>=1} (−1)^{j+1}(F−1)^j/j truncated at degree E.
    fn log_series(&self, order: u64, max_deg: u32) -> BTreeMap<u32, CycQ> {
        let mut u = self.clone();
        u.terms.remove(&0); // F − 1
        let mut out: BTreeMap<u32, CycQ> = BTreeMap::new();
        let mut power = CycPoly::one(order); // u^j accumulator starts at u^0
        let e_min = u.nonconstant_min_exp().unwrap_or(max_deg + 1);
        let mut j = 0u32;
        loop {
            j += 1;
            if e_min.saturating_mul(j) > max_deg {
                break;
            }
            power = power.mul(&u);
            power.terms.retain(|&e, _| e <= max_deg);
            let sign = if j % 2 == 1 { 1i64 } else { -1 };
            let scale = BigRational::new(BigInt::from(sign), BigInt::from(j));
            for (&e, c) in &power.terms {
                if e == 0 {
                    continue;
                }
                let term = c.scale(&scale);
                match out.get_mut(&e) {
                    Some(acc) => *acc = acc.add(&term),
                    None => {
                        out.insert(e, term);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EulerMode {
    RigorousLExtracted,
    AbsoluteDirect,
    HeuristicScan,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractedFactor {
    pub modulus: u64,
    pub character: Vec<u32>,
    pub exponent: f64,
    pub coefficient_re: f64,
    pub coefficient_im: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EulerProductResult {
    pub value_re: f64,
    pub value_im: f64,
    pub error: f64,
    pub mode: EulerMode,
    pub factors: Vec<ExtractedFactor>,
}

impl EulerProductResult {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.value_re, self.value_im)
    }

    pub fn real_checked(&self, tol: f64) -> Option<f64> {
        (self.value_im.abs() <= tol).then_some(self.value_re)
    }
}

/// How the local factors are known.
pub enum FactorSource<'f> {
    /// Periodicity holds a priori (constructed from group data alone).
    PeriodicExact {
        m: u64,
        polys: HashMap<u64, CycPoly>,
    },
    /// Periodicity certified by scanning up to a horizon; per-prime
    /// evaluation is still exact below the cutoff, only the tail model
    /// relies on the scan.
    Scanned {
        m: u64,
        polys: HashMap<u64, CycPoly>,
        eval: Box<dyn Fn(u64) -> CycPoly + Sync + Send + 'f>,
        horizon: u64,
    },
    /// No periodic model; per-prime evaluation only.
    Aperiodic {
        eval: Box<dyn Fn(u64) -> CycPoly + Sync + Send + 'f>,
        /// upper bound on Σ|coeffs| of F_p − 1, uniform in p
        l1_bound: f64,
        min_exponent: u32,
    },
}

pub struct FactorSystem<'f> {
    /// y = p^{−1/denom}
    pub denom: u32,
    /// order of the cyclotomic coefficients
    pub order: u64,
    /// primes excluded from the product (the finite places of S)
    pub skip: Vec<u64>,
    pub source: FactorSource<'f>,
}

/// Rigorous bound on Σ_{p > p0} p^{−s} for s > 1, via π(x) ≤ 1.26 x/log x.
pub fn prime_tail_bound(p0: f64, s: f64) -> f64 {
    assert!(s > 1.0 && p0 >= 17.0);
    1.26 * s / (s - 1.0) / p0.ln() * p0.powf(1.0 - s)
}

pub struct EvalParams {
    /// prime cutoff for exact multiplication
    pub cutoff: u64,
    /// extraction depth: exponents e/denom ≤ depth go through L-values
    pub depth: u32,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            cutoff: 100_000,
            depth: 3,
        }
    }
}

pub fn evaluate(sys: &FactorSystem<'_>, params: &EvalParams) -> Result<EulerProductResult, EulerError> {
    match &sys.source {
        FactorSource::PeriodicExact { m, polys } => {
            evaluate_periodic(sys, *m, polys, None, params)
        }
        FactorSource::Scanned { m, polys, eval, .. } => {
            evaluate_periodic(sys, *m, polys, Some(eval.as_ref()), params)
        }
        FactorSource::Aperiodic {
            eval,
            l1_bound,
            min_exponent,
        } => evaluate_absolute(sys, eval.as_ref(), *l1_bound, *min_exponent, params),
    }
}

#[allow(clippy::type_complexity)]
fn evaluate_periodic(
    sys: &FactorSystem<'_>,
    m: u64,
    polys: &HashMap<u64, CycPoly>,
    per_prime: Option<&(dyn Fn(u64) -> CycPoly + Sync + Send)>,
    params: &EvalParams,
) -> Result<EulerProductResult, EulerError> {
    let denom = sys.denom;
    let cutoff = params.cutoff;
    for &q in &sys.skip {
        if q > cutoff {
            return Err(EulerError::SkipBeyondCutoff(q, cutoff));
        }
    }
    let ug = UnitGroup::new(m);
    let chars = all_characters(&ug);
    let max_deg = params.depth * denom;

    // exact log-series per class; divergence checks
    let mut series: HashMap<u64, BTreeMap<u32, CycQ>> = HashMap::new();
    let mut exponents: Vec<u32> = Vec::new();
    for (&a, f) in polys {
        for &e in f.terms.keys() {
            if e > 0 && e < denom {
                return Err(EulerError::ExponentBelowOne(e));
            }
        }
        let ls = f.log_series(sys.order, max_deg);
        for &e in ls.keys() {
            if !exponents.contains(&e) {
                exponents.push(e);
            }
        }
        series.insert(a, ls);
    }
    exponents.sort_unstable();

    // principal coefficient at the conditionally convergent layer must vanish
    if exponents.contains(&denom) {
        let mut principal = CycQ::zero(sys.order);
        for (_, ls) in series.iter() {
            if let Some(c) = ls.get(&denom) {
                principal = principal.add(c);
            }
        }
        if !principal.eq_value(&CycQ::zero(sys.order)) {
            return Err(EulerError::Divergent(format!(
                "sum over classes = {:?}",
                principal.canonical()
            )));
        }
    }

    // χ-decomposition of each exponent layer
    let phi = ug.phi() as f64;
    let mut coeffs: Vec<(u32, usize, Complex64)> = Vec::new(); // (e, char idx, c)
    for &e in &exponents {
        for (ci, chi) in chars.iter().enumerate() {
            let chib = chi.conj(&ug);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&a, ls) in series.iter() {
                let Some(c) = ls.get(&e) else { continue };
                let (re, im) = c.to_complex();
                acc += Complex64::new(re, im) * chib.eval(&ug, a);
            }
            acc /= phi;
            if acc.norm() > 1e-13 {
                coeffs.push((e, ci, acc));
            }
        }
    }

    // exact partial product over p <= cutoff
    let primes = sieve_primes(cutoff);
    let mut partial = Complex64::new(1.0, 0.0);
    let mut class_terms: HashMap<u64, Vec<(u32, Complex64)>> = HashMap::new();
    for (&a, f) in polys {
        class_terms.insert(a, f.complex_terms());
    }
    for &p in &primes {
        if sys.skip.binary_search(&p).is_ok() {
            continue;
        }
        let f_p = if let Some(eval) = per_prime {
            eval(p).eval_complex((p as f64).powf(-1.0 / denom as f64))
        } else {
            if m > 1 && m % p == 0 {
                // classes only model p coprime to m; such primes must be in skip
                return Err(EulerError::SkipBeyondCutoff(p, 0));
            }
            let t = (p as f64).powf(-1.0 / denom as f64);
            let mut acc = Complex64::new(1.0, 0.0);
            for &(e, c) in &class_terms[&(p % m.max(1))] {
                acc += c * t.powi(e as i32);
            }
            acc
        };
        if f_p.norm() < 1e-300 {
            return Err(EulerError::VanishingFactor(p));
        }
        partial *= f_p;
    }

    // tail via prime zeta values
    let mut log_tail = Complex64::new(0.0, 0.0);
    let mut factors_meta = Vec::new();
    let mut l_error = 0.0f64;
    for &(e, ci, c) in &coeffs {
        let s_e = e as f64 / denom as f64;
        let chi = &chars[ci];
        let pz_full = prime_zeta_chi(&ug, chi, s_e)?;
        let mut pz_partial = Complex64::new(0.0, 0.0);
        for &p in &primes {
            let v = chi.eval(&ug, p);
            if v.norm_sqr() > 0.0 {
                pz_partial += v * (p as f64).powf(-s_e);
            }
        }
        log_tail += c * (pz_full - pz_partial);
        l_error += c.norm() * 1e-11;
        factors_meta.push(ExtractedFactor {
            modulus: m,
            character: chi.exps.clone(),
            exponent: s_e,
            coefficient_re: c.re,
            coefficient_im: c.im,
        });
    }

    // majorant bound on the discarded log-series terms for p > cutoff
    let discarded = majorant_tail_bound(polys, denom, max_deg, cutoff);

    let value = partial * log_tail.exp();
    let error = value.norm() * (discarded + l_error + 1e-13 * primes.len() as f64 / 1e5);
    Ok(EulerProductResult {
        value_re: value.re,
        value_im: value.im,
        error: error + discarded * value.norm(),
        mode: EulerMode::RigorousLExtracted,
        factors: factors_meta,
    })
}

/// Upper bound on Σ_{p > cutoff} |log F_p − (series ≤ max_deg)| using the
/// positive-coefficient majorant −log(1 − Σ|c_i| t^{e_i}).
fn majorant_tail_bound(
    polys: &HashMap<u64, CycPoly>,
    denom: u32,
    max_deg: u32,
    cutoff: u64,
) -> f64 {
    // coefficient majorant across classes per exponent
    let mut maj: BTreeMap<u32, f64> = BTreeMap::new();
    for f in polys.values() {
        for (&e, c) in &f.terms {
            if e == 0 {
                continue;
            }
            let norm = coeff_l1_norm(c);
            let entry = maj.entry(e).or_insert(0.0);
            if norm > *entry {
                *entry = norm;
            }
        }
    }
    let t0 = (cutoff as f64).powf(-1.0 / denom as f64);
    // expand −log(1−u(t)) to high degree with positive coefficients
    let deep = 4 * max_deg.max(denom) + 8;
    let mut u_pow: BTreeMap<u32, f64> = BTreeMap::new();
    u_pow.insert(0, 1.0);
    let mut logcoef: BTreeMap<u32, f64> = BTreeMap::new();
    let e_min = *maj.keys().next().unwrap_or(&(deep + 1));
    let mut j = 0u32;
    loop {
        j += 1;
        if e_min.saturating_mul(j) > deep {
            break;
        }
        // u_pow *= u
        let mut next: BTreeMap<u32, f64> = BTreeMap::new();
        for (&e1, &c1) in &u_pow {
            for (&e2, &c2) in &maj {
                if e1 + e2 <= deep {
                    *next.entry(e1 + e2).or_insert(0.0) += c1 * c2;
                }
            }
        }
        u_pow = next;
        for (&e, &c) in &u_pow {
            *logcoef.entry(e).or_insert(0.0) += c / j as f64;
        }
    }
    // Σ_{e > max_deg} M_e Σ_{p>cutoff} p^{-e/denom}
    //   ≤ Σ_{e > max_deg, e ≤ deep} M_e cutoff^{1-e/denom}/(e/denom - 1)
    //   + 2 cutoff · (remaining majorant value at t0)
    let mut bound = 0.0;
    let mut accounted = 0.0;
    for (&e, &c) in &logcoef {
        if e <= max_deg {
            accounted += c * t0.powi(e as i32);
            continue;
        }
        let s_e = e as f64 / denom as f64;
        bound += c * prime_tail_bound(cutoff as f64, s_e);
        accounted += c * t0.powi(e as i32);
    }
    let u_t0: f64 = maj.iter().map(|(&e, &c)| c * t0.powi(e as i32)).sum();
    if u_t0 < 0.9 {
        let full = -(1.0 - u_t0).ln();
        let remaining = (full - accounted).max(0.0);
        bound += 2.0 * cutoff as f64 * remaining;
    } else {
        bound += 1.0; // cutoff too small for the majorant; refuse tight claims
    }
    bound
}

fn evaluate_absolute(
    sys: &FactorSystem<'_>,
    eval: &(dyn Fn(u64) -> CycPoly + Sync + Send),
    l1_bound: f64,
    min_exponent: u32,
    params: &EvalParams,
) -> Result<EulerProductResult, EulerError> {
    let denom = sys.denom;
    if min_exponent <= denom {
        return Err(EulerError::NotAbsolutelyConvergent(min_exponent, denom));
    }
    let cutoff = params.cutoff;
    let primes = sieve_primes(cutoff);
    let mut value = Complex64::new(1.0, 0.0);
    for &p in &primes {
        if sys.skip.binary_search(&p).is_ok() {
            continue;
        }
        let t = (p as f64).powf(-1.0 / denom as f64);
        let f_p = eval(p).eval_complex(t);
        if f_p.norm() < 1e-300 {
            return Err(EulerError::VanishingFactor(p));
        }
        value *= f_p;
    }
    let s_min = min_exponent as f64 / denom as f64;
    let u_at_cutoff = l1_bound * (cutoff as f64).powf(-s_min);
    assert!(u_at_cutoff < 0.5, "cutoff too small for tail bound");
    // |log(1+u)| <= |u| + |u|^2 <= 1.5|u| here
    let tail = 1.5 * l1_bound * prime_tail_bound(cutoff as f64, s_min);
    Ok(EulerProductResult {
        value_re: value.re,
        value_im: value.im,
        error: value.norm() * tail + 1e-13 * primes.len() as f64,
        mode: EulerMode::AbsoluteDirect,
        factors: Vec::new(),
    })
}

/// Flagged partial product for conditionally convergent aperiodic systems.
pub fn evaluate_heuristic(
    sys: &FactorSystem<'_>,
    eval: &(dyn Fn(u64) -> CycPoly + Sync + Send),
    cutoff: u64,
) -> Result<EulerProductResult, EulerError> {
    let primes = sieve_primes(cutoff);
    let mut value = Complex64::new(1.0, 0.0);
    let mut window_vals: Vec<Complex64> = Vec::new();
    for &p in &primes {
        if sys.skip.binary_search(&p).is_ok() {
            continue;
        }
        let t = (p as f64).powf(-1.0 / sys.denom as f64);
        let f_p = eval(p).eval_complex(t);
        value *= f_p;
        if p * 2 > cutoff {
            window_vals.push(value);
        }
    }
    // spread of the partial products over the last dyadic block
    let mut spread = 0.0f64;
    for v in &window_vals {
        spread = spread.max((v - value).norm());
    }
    Ok(EulerProductResult {
        value_re: value.re,
        value_im: value.im,
        error: spread + value.norm() / (cutoff as f64).ln(),
        mode: EulerMode::HeuristicScan,
        factors: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Π_{p odd} (1 − p^{-2}) = (1/ζ(2)) / (1 − 1/4) = 8/π²
    #[test]
    fn absolutely_convergent_zeta_identity() {
        let order = 2u64;
        let mut f = CycPoly::one(order);
        f.add_term(2, CycQ::from_integer(order, -1));
        let sys = FactorSystem {
            denom: 1,
            order,
            skip: vec![2],
            source: FactorSource::PeriodicExact {
                m: 1,
                polys: HashMap::from([(0u64, f)]),
            },
        };
        let res = evaluate(&sys, &EvalParams::default()).unwrap();
        let expected = 8.0 / (PI * PI);
        assert!((res.value_re - expected).abs() < 1e-10, "{res:?}");
        assert!(res.error < 1e-8);
        assert_eq!(res.mode, EulerMode::RigorousLExtracted);
    }

    /// Π_{p odd} (1 − 1/p)(1 + 1/p) — same value through the conditionally
    /// convergent machinery exercised with exponent-1 terms present.
    #[test]
    fn conditionally_structured_product() {
        let order = 2u64;
        let mut f = CycPoly::one(order);
        f.add_term(1, CycQ::from_integer(order, 1));
        let f = f.mul(&CycPoly::convergence_factor(order, 1, 1));
        let sys = FactorSystem {
            denom: 1,
            order,
            skip: vec![2],
            source: FactorSource::PeriodicExact {
                m: 1,
                polys: HashMap::from([(0u64, f)]),
            },
        };
        let res = evaluate(&sys, &EvalParams::default()).unwrap();
        let expected = 8.0 / (PI * PI);
        assert!(
            (res.value_re - expected).abs() < 1e-9,
            "{} vs {expected}",
            res.value_re
        );
    }

    /// Part-2 product of the ℤ/4 example:
    /// Π_{p≡1(4)} (1−1/p)(1+2/p) Π_{p≡3(4)} (1−1/p); verified against the
    /// closed form (8/π²)·(1/L(1,χ_{−4})²)·Π(1−1/p²)^{-1}|αcorrection…
    /// Here we check only internal consistency: doubling the cutoff moves the
    /// value by less than the combined reported error.
    #[test]
    fn rigorous_result_stable_under_cutoff_doubling() {
        let order = 4u64;
        let mut f1 = CycPoly::one(order);
        f1.add_term(1, CycQ::from_integer(order, 2));
        let f1 = f1.mul(&CycPoly::convergence_factor(order, 1, 1));
        let f3 = CycPoly::convergence_factor(order, 1, 1);
        let polys = HashMap::from([(1u64, f1), (3u64, f3)]);
        let sys = FactorSystem {
            denom: 1,
            order,
            skip: vec![2],
            source: FactorSource::PeriodicExact { m: 4, polys },
        };
        let r1 = evaluate(
            &sys,
            &EvalParams {
                cutoff: 50_000,
                depth: 3,
            },
        )
        .unwrap();
        let r2 = evaluate(
            &sys,
            &EvalParams {
                cutoff: 100_000,
                depth: 3,
            },
        )
        .unwrap();
        assert!(
            (r1.value_re - r2.value_re).abs() <= 2.0 * (r1.error + r2.error),
            "{} vs {} (errors {} {})",
            r1.value_re,
            r2.value_re,
            r1.error,
            r2.error
        );
        assert!(r1.error < 1e-7);
    }

    #[test]
    fn divergent_product_rejected() {
        // Π (1 + 1/p) without convergence factors diverges
        let order = 2u64;
        let mut f = CycPoly::one(order);
        f.add_term(1, CycQ::from_integer(order, 1));
        let sys = FactorSystem {
            denom: 1,
            order,
            skip: vec![2],
            source: FactorSource::PeriodicExact {
                m: 1,
                polys: HashMap::from([(0u64, f)]),
            },
        };
        assert!(matches!(
            evaluate(&sys, &EvalParams::default()),
            Err(EulerError::Divergent(_))
        ));
    }

    #[test]
    fn absolute_mode_matches_periodic_route() {
        // Π_{p odd}(1 + χ_{-4}(p)/p²) via both modes
        let order = 4u64;
        let eval = |p: u64| {
            let mut f = CycPoly::one(4);
            let sign = if p % 4 == 1 { 1 } else { -1 };
            f.add_term(2, CycQ::from_integer(4, sign));
            f
        };
        let sys_abs = FactorSystem {
            denom: 1,
            order,
            skip: vec![2],
            source: FactorSource::Aperiodic {
                eval: Box::new(eval),
                l1_bound: 1.0,
                min_exponent: 2,
            },
        };
        let abs = evaluate(&sys_abs, &EvalParams::default()).unwrap();

        let mut f1 = CycPoly::one(order);
        f1.add_term(2, CycQ::from_integer(order, 1));
        let mut f3 = CycPoly::one(order);
        f3.add_term(2, CycQ::from_integer(order, -1));
        let sys_per = FactorSystem {
            denom: 1,
            order,
            skip: vec![2],
            source: FactorSource::PeriodicExact {
                m: 4,
                polys: HashMap::from([(1u64, f1), (3u64, f3)]),
            },
        };
        let per = evaluate(&sys_per, &EvalParams::default()).unwrap();
        assert!((abs.value_re - per.value_re).abs() < 1e-7);
        assert_eq!(abs.mode, EulerMode::AbsoluteDirect);
    }
}
