//! Local character spaces at the places of ℚ.
//!
//! At a tame prime p (p ∤ |G|) the characters of ℤ_p^× with values in G are
//! parameterised by the image δ of a fixed least primitive root g mod p, with
//! (p−1)δ = 0. The ramification type of such a character is the Galois orbit
//! of δ, which does not depend on the choice of g. At a wild prime (p | |G|,
//! including p = 2 when |G| is even) characters are parameterised by images
//! of fixed topological generators of ℤ_p^× at the minimal modulus p^m
//! through which every continuous character factors. A full local point also
//! carries the image of the uniformizer (the Frobenius value).
//!
//! Twist elements are the character-side avatars of Brauer classes: elements
//! of 𝒪_S^× ⊗ G^∧ written on the generators −1 and the finite primes of S.
//! The (−1)-component is only well-defined modulo 2·G^∧ and is stored by its
//! canonical coset representative.
//!
//! Artin-map normalization: uniformizers map to arithmetic Frobenius and the
//! sign convention is fixed so that the product formula ∏_v ⟨φ_v, x_v⟩ = 1
//! holds; the reciprocity property test in the global module pins it.

use num::rational::BigRational;
use num::{BigInt, One};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

use crate::cyclotomic::CycQ;
use crate::group::{FiniteAbelianGroup, GaloisOrbit, RamSet};
use crate::heights::{bigint_pow, HeightSpec, Place};
use crate::primes::{factorize, is_prime, least_primitive_root, tame_dlog_mod_d};
use crate::util::gcd_u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LocalError {
    #[error("prime {0} is wild for this group; tame characters rejected")]
    WildPlace(u64),
    #[error("prime {0} is tame for this group; wild characters rejected")]
    TamePlace(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {0} lies in S; operation needs a place outside S")]
    InsideS(u64),
    #[error("exponent s·w(δ) = {0} is not a non-negative integer; exact evaluation impossible")]
    NonIntegralExponent(String),
    #[error("orbit conditions at wild places are not supported")]
    WildOrbitCondition,
}

/// Least primitive root mod p, cached process-wide.
pub fn primitive_root_cached(p: u64) -> u64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, u64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&g) = cache.lock().unwrap().get(&p) {
        return g;
    }
    let g = least_primitive_root(p);
    cache.lock().unwrap().insert(p, g);
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamePlaceData {
    pub p: u64,
    pub g: u64,
}

impl TamePlaceData {
    pub fn new(p: u64) -> Self {
        TamePlaceData {
            p,
            g: primitive_root_cached(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TameCharacter {
    pub place: TamePlaceData,
    /// image δ of the primitive root; (p−1)δ = 0
    pub delta: u32,
}

impl TameCharacter {
    /// χ(u) for a unit u mod p: δ · ind_g(u).
    pub fn eval(&self, group: &FiniteAbelianGroup, u: u64) -> u32 {
        let d = group.element_order(self.delta);
        if d == 1 {
            return 0;
        }
        let k = tame_dlog_mod_d(self.place.p, self.place.g, u, d);
        group.smul(k, self.delta)
    }
}

/// All characters of ℤ_p^× into G at a tame prime: exactly the δ with
/// (p−1)δ = 0, each once.
pub fn tame_characters(
    group: &FiniteAbelianGroup,
    p: u64,
) -> Result<Vec<TameCharacter>, LocalError> {
    if !is_prime(p) {
        return Err(LocalError::NotPrime(p));
    }
    if group.order() % p == 0 {
        return Err(LocalError::WildPlace(p));
    }
    let place = TamePlaceData::new(p);
    Ok(group
        .torsion_elements(p - 1)
        .iter()
        .map(|&delta| TameCharacter { place, delta })
        .collect())
}

/// The unit-exponentiation orbit of δ = χ(g); independent of the primitive
/// root used.
pub fn ramification_orbit<'g>(
    group: &'g FiniteAbelianGroup,
    chi: &TameCharacter,
) -> &'g GaloisOrbit {
    &group.orbits()[group.orbit_of(chi.delta) as usize]
}

// ---------------------------------------------------------------------------
// wild places

#[derive(Clone, Debug)]
pub struct WildUnitChar {
    /// images of the fixed generators, same order as `WildTable::gens`
    pub images: Vec<u32>,
}

/// Character table of ℤ_p^× at a wild prime p, at the minimal modulus p^m
/// through which all continuous characters into G factor:
/// m = v_p(n)+1 for odd p and m = v_2(n)+2 for p = 2 (n = exponent of G).
#[derive(Clone, Debug)]
pub struct WildTable {
    pub p: u64,
    pub m: u32,
    pub modulus: u64,
    /// generator residues; for p = 2, m >= 3 this is [modulus-1, 5]
    pub gens: Vec<u64>,
    gen_orders: Vec<u64>,
    /// dlog[u] = exponent vector of u w.r.t. gens (None off the unit group)
    dlog: Vec<Option<Vec<u32>>>,
    pub chars: Vec<WildUnitChar>,
}

impl WildTable {
    pub fn build(group: &FiniteAbelianGroup, p: u64) -> Result<WildTable, LocalError> {
        if !is_prime(p) {
            return Err(LocalError::NotPrime(p));
        }
        if group.order() % p != 0 && p != 2 {
            return Err(LocalError::TamePlace(p));
        }
        let n = group.exponent();
        let vp = {
            let mut v = 0u32;
            let mut m = n;
            while m % p == 0 {
                v += 1;
                m /= p;
            }
            v
        };
        let m = if p == 2 { vp + 2 } else { vp + 1 };
        let modulus = p.pow(m);
        let (gens, gen_orders): (Vec<u64>, Vec<u64>) = if p == 2 {
            if m >= 3 {
                (vec![modulus - 1, 5], vec![2, modulus / 4])
            } else {
                (vec![modulus - 1], vec![2])
            }
        } else {
            let w = crate::primes::primitive_root_mod_prime_power(p, m);
            let phi = modulus / p * (p - 1);
            (vec![w], vec![phi])
        };

        // decompose every unit as a product of generator powers
        let mut dlog: Vec<Option<Vec<u32>>> = vec![None; modulus as usize];
        let mut stack: Vec<(usize, u64, Vec<u32>)> = vec![(0, 1, vec![])];
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
                cur = cur * gens[i] % modulus;
            }
        }

        // all characters: images of gens with admissible orders
        let mut chars = Vec::new();
        let mut images = vec![0u32; gens.len()];
        build_chars(group, &gen_orders, &mut images, 0, &mut chars);

        Ok(WildTable {
            p,
            m,
            modulus,
            gens,
            gen_orders,
            dlog,
            chars,
        })
    }

    /// χ(u) for a unit u (given mod any multiple of the modulus).
    pub fn eval(&self, group: &FiniteAbelianGroup, char_idx: u32, u: u64) -> u32 {
        let reduced = u % self.modulus;
        let exps = self.dlog[reduced as usize]
            .as_ref()
            .expect("unit expected in wild character evaluation");
        let images = &self.chars[char_idx as usize].images;
        let mut acc = 0u32;
        for (e, &img) in exps.iter().zip(images.iter()) {
            acc = group.add(acc, group.smul(*e as u64, img));
        }
        acc
    }

    /// χ(u) for u an arbitrary nonzero integer prime to p (negative allowed).
    pub fn eval_int(&self, group: &FiniteAbelianGroup, char_idx: u32, u: i64) -> u32 {
        let m = self.modulus as i64;
        let red = ((u % m) + m) % m;
        self.eval(group, char_idx, red as u64)
    }

    pub fn trivial_char_index(&self) -> u32 {
        self.chars
            .iter()
            .position(|c| c.images.iter().all(|&i| i == 0))
            .expect("trivial character present") as u32
    }
}

fn build_chars(
    group: &FiniteAbelianGroup,
    gen_orders: &[u64],
    images: &mut Vec<u32>,
    i: usize,
    out: &mut Vec<WildUnitChar>,
) {
    if i == gen_orders.len() {
        out.push(WildUnitChar {
            images: images.clone(),
        });
        return;
    }
    for &cand in group.torsion_elements(gen_orders[i]) {
        images[i] = cand;
        build_chars(group, gen_orders, images, i + 1, out);
    }
    images[i] = 0;
}

/// Complete duplicate-free list of wild unit characters at p.
pub fn wild_characters(group: &FiniteAbelianGroup, p: u64) -> Result<Vec<WildUnitChar>, LocalError> {
    Ok(WildTable::build(group, p)?.chars)
}

// ---------------------------------------------------------------------------
// local points and conditions

/// A full local point: a character of ℚ_v^× (unit data plus uniformizer
/// image), or the image of complex conjugation at ∞.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocalPoint {
    Tame {
        place: TamePlaceData,
        delta: u32,
        frob: u32,
    },
    Wild {
        p: u64,
        char_idx: u32,
        frob: u32,
    },
    Arch {
        gamma: u32,
    },
}

/// Restriction on the local points considered at one place.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalCondition {
    /// no condition (f_{R,v} = 1)
    Free,
    /// completely split: the trivial local point only
    Split,
    /// ramification orbit lies in this exact list of orbit representatives
    /// (include 0 to allow the unramified point)
    OrbitIn(Vec<u32>),
}

/// Shared per-run local data: the group, the finite places of S, and the
/// wild character tables. Build once, read from many workers.
#[derive(Clone, Debug)]
pub struct LocalData {
    pub group: FiniteAbelianGroup,
    /// finite places of S: the primes dividing |G|, 2 if |G| is even, and
    /// any user-added primes; sorted
    pub s_f: Vec<u64>,
    pub wild: BTreeMap<u64, WildTable>,
}

impl LocalData {
    pub fn new(group: FiniteAbelianGroup, extra_s: &[u64]) -> Self {
        let mut s_f: Vec<u64> = factorize(group.order()).into_iter().map(|(p, _)| p).collect();
        for &q in extra_s {
            s_f.push(q);
        }
        s_f.sort_unstable();
        s_f.dedup();
        let mut wild = BTreeMap::new();
        for (p, _) in factorize(group.order()) {
            wild.insert(p, WildTable::build(&group, p).expect("wild table"));
        }
        LocalData { group, s_f, wild }
    }

    pub fn is_wild(&self, p: u64) -> bool {
        self.wild.contains_key(&p)
    }

    pub fn in_s(&self, p: u64) -> bool {
        self.s_f.binary_search(&p).is_ok()
    }

    /// Number of finite places in S.
    pub fn s_f_len(&self) -> usize {
        self.s_f.len()
    }

    /// All local points at a place satisfying a condition. At a tame place
    /// outside S pass `integral_r` to impose ρ ∈ R ∪ {0} under `Free`.
    pub fn local_points(
        &self,
        place: Place,
        cond: &LocalCondition,
        integral_r: Option<&RamSet>,
    ) -> Result<Vec<LocalPoint>, LocalError> {
        let g = &self.group;
        match place {
            Place::Inf => {
                let gammas: Vec<u32> = match cond {
                    LocalCondition::Split => vec![0],
                    LocalCondition::Free => g.two_torsion().to_vec(),
                    LocalCondition::OrbitIn(_) => return Err(LocalError::WildOrbitCondition),
                };
                Ok(gammas.into_iter().map(|gamma| LocalPoint::Arch { gamma }).collect())
            }
            Place::Finite(p) if self.is_wild(p) => {
                let table = &self.wild[&p];
                match cond {
                    LocalCondition::Split => Ok(vec![LocalPoint::Wild {
                        p,
                        char_idx: table.trivial_char_index(),
                        frob: 0,
                    }]),
                    LocalCondition::Free => {
                        let mut out = Vec::new();
                        for ci in 0..table.chars.len() as u32 {
                            for f in 0..g.num_elements() as u32 {
                                out.push(LocalPoint::Wild {
                                    p,
                                    char_idx: ci,
                                    frob: f,
                                });
                            }
                        }
                        Ok(out)
                    }
                    LocalCondition::OrbitIn(_) => Err(LocalError::WildOrbitCondition),
                }
            }
            Place::Finite(p) => {
                let place_data = TamePlaceData::new(p);
                let deltas: Vec<u32> = g.torsion_elements(p - 1).to_vec();
                let allowed = |delta: u32| -> bool {
                    match cond {
                        LocalCondition::Split => delta == 0,
                        LocalCondition::OrbitIn(reps) => reps.contains(&g.orbit_rep(delta)),
                        LocalCondition::Free => match integral_r {
                            Some(r) => delta == 0 || r.contains(delta),
                            None => true,
                        },
                    }
                };
                let mut out = Vec::new();
                for delta in deltas.into_iter().filter(|&d| allowed(d)) {
                    match cond {
                        LocalCondition::Split => out.push(LocalPoint::Tame {
                            place: place_data,
                            delta,
                            frob: 0,
                        }),
                        _ => {
                            for f in 0..g.num_elements() as u32 {
                                out.push(LocalPoint::Tame {
                                    place: place_data,
                                    delta,
                                    frob: f,
                                });
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// twist elements

/// An element of 𝒪_S^× ⊗ G^∧ written as (−1)⊗ψ_{−1} + Σ_q q⊗ψ_q over the
/// finite q ∈ S. The (−1)-component is canonicalized modulo 2·G^∧ (its
/// pairing with the 2-torsion values χ_v(−1) only depends on that coset).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwistElement {
    pub psi_minus1: u32,
    pub psi_q: BTreeMap<u64, u32>,
}

impl TwistElement {
    pub fn zero(s_f: &[u64]) -> Self {
        TwistElement {
            psi_minus1: 0,
            psi_q: s_f.iter().map(|&q| (q, 0u32)).collect(),
        }
    }

    pub fn new(group: &FiniteAbelianGroup, psi_minus1: u32, psi_q: BTreeMap<u64, u32>) -> Self {
        TwistElement {
            psi_minus1: group.dual_mod_two_rep(psi_minus1),
            psi_q,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.psi_minus1 == 0 && self.psi_q.values().all(|&v| v == 0)
    }

    pub fn neg(&self, group: &FiniteAbelianGroup) -> Self {
        TwistElement::new(
            group,
            group.neg(self.psi_minus1),
            self.psi_q
                .iter()
                .map(|(&q, &psi)| (q, group.neg(psi)))
                .collect(),
        )
    }
}

/// The full finite twist group 𝒪_S^× ⊗ G^∧ in a deterministic order;
/// |G[2]| · |G|^{|S_f|} elements.
pub fn twist_group(ld: &LocalData) -> Vec<TwistElement> {
    let g = &ld.group;
    let reps = g.dual_mod_two_reps();
    let n = g.num_elements() as u32;
    let mut out = Vec::new();
    let mut stack: Vec<(usize, BTreeMap<u64, u32>)> = vec![(0, BTreeMap::new())];
    while let Some((i, partial)) = stack.pop() {
        if i == ld.s_f.len() {
            for &rep in &reps {
                out.push(TwistElement {
                    psi_minus1: rep,
                    psi_q: partial.clone(),
                });
            }
            continue;
        }
        for v in (0..n).rev() {
            let mut next = partial.clone();
            next.insert(ld.s_f[i], v);
            stack.push((i + 1, next));
        }
    }
    out.sort_by(|a, b| (a.psi_minus1, a.psi_q.values().collect::<Vec<_>>())
        .cmp(&(b.psi_minus1, b.psi_q.values().collect::<Vec<_>>())));
    out
}

/// ⟨φ_v, x_v⟩ as an element of ℤ/nℤ (additively; the root of unity is
/// ζ_n^value). At v ∉ S only the unit restriction of φ_v is used; at v ∈ S
/// the Frobenius value enters through the uniformizer components of x.
pub fn local_pairing(ld: &LocalData, point: &LocalPoint, x: &TwistElement) -> u64 {
    let g = &ld.group;
    let n = g.exponent();
    match point {
        LocalPoint::Arch { gamma } => g.pairing(*gamma, x.psi_minus1),
        LocalPoint::Tame { place, delta, frob } => {
            let chi = TameCharacter {
                place: *place,
                delta: *delta,
            };
            let p = place.p;
            let mut acc: u64 = 0;
            if ld.in_s(p) {
                // full character: unit part plus frobenius on the uniformizer
                for (u, psi) in twist_components(x) {
                    let val = match u {
                        TwistGen::MinusOne => chi.eval(g, p - 1),
                        TwistGen::Prime(q) if q == p => *frob,
                        TwistGen::Prime(q) => chi.eval(g, q % p),
                    };
                    acc = (acc + g.pairing(val, psi)) % n;
                }
            } else {
                for (u, psi) in twist_components(x) {
                    let val = match u {
                        TwistGen::MinusOne => chi.eval(g, p - 1),
                        TwistGen::Prime(q) => chi.eval(g, q % p),
                    };
                    acc = (acc + g.pairing(val, psi)) % n;
                }
            }
            acc
        }
        LocalPoint::Wild { p, char_idx, frob } => {
            let table = &ld.wild[p];
            let mut acc: u64 = 0;
            for (u, psi) in twist_components(x) {
                let val = match u {
                    TwistGen::MinusOne => table.eval_int(g, *char_idx, -1),
                    TwistGen::Prime(q) if q == *p => *frob,
                    TwistGen::Prime(q) => table.eval(g, *char_idx, q),
                };
                acc = (acc + g.pairing(val, psi)) % g.exponent();
            }
            acc
        }
    }
}

enum TwistGen {
    MinusOne,
    Prime(u64),
}

fn twist_components(x: &TwistElement) -> impl Iterator<Item = (TwistGen, u32)> + '_ {
    std::iter::once((TwistGen::MinusOne, x.psi_minus1)).chain(
        x.psi_q
            .iter()
            .map(|(&q, &psi)| (TwistGen::Prime(q), psi)),
    )
}

// ---------------------------------------------------------------------------
// local heights, Fourier transforms, masses

/// Local height of a point as an exact rational, valid when the relevant
/// exponent is integral (overridden places always; tame places when w(δ) is
/// an integer). General rational weights go through the cleared-denominator
/// machinery in the enumerator instead.
pub fn local_height(
    ld: &LocalData,
    heights: &HeightSpec,
    point: &LocalPoint,
) -> Result<BigRational, LocalError> {
    let g = &ld.group;
    match point {
        LocalPoint::Arch { gamma } => {
            let ov = heights.override_at(Place::Inf).expect("inf override");
            Ok(ov.value_for(Place::Inf, *gamma).expect("arch class"))
        }
        LocalPoint::Wild { p, char_idx, .. } => {
            let ov = heights
                .override_at(Place::Finite(*p))
                .expect("wild override present by construction");
            Ok(ov.value_for(Place::Finite(*p), *char_idx).expect("wild class"))
        }
        LocalPoint::Tame { place, delta, .. } => {
            let p = place.p;
            if let Some(ov) = heights.override_at(Place::Finite(p)) {
                let class = g.orbit_rep(*delta);
                return Ok(ov.value_for(Place::Finite(p), class).expect("tame class"));
            }
            let w = heights.weight.of_element(g, *delta);
            if !w.denom().is_one() {
                return Err(LocalError::NonIntegralExponent(w.to_string()));
            }
            let e: u32 = w
                .numer()
                .to_string()
                .parse()
                .map_err(|_| LocalError::NonIntegralExponent(w.to_string()))?;
            Ok(BigRational::from_integer(bigint_pow(p, e)))
        }
    }
}

/// Exact local Fourier transform at a tame prime outside S:
/// Σ_{χ: ρ(χ) ∈ R ∪ {0}} ⟨χ, x⟩ p^{−s·w(ρ(χ))}. Requires every contributing
/// exponent s·w to be a non-negative integer.
pub fn local_fourier(
    ld: &LocalData,
    heights: &HeightSpec,
    p: u64,
    x: &TwistElement,
    s: &BigRational,
    r: &RamSet,
) -> Result<CycQ, LocalError> {
    if ld.in_s(p) {
        return Err(LocalError::InsideS(p));
    }
    let g = &ld.group;
    let n = g.exponent();
    let chars = tame_characters(g, p)?;
    let mut total = CycQ::zero(n);
    for chi in chars {
        if chi.delta != 0 && !r.contains(chi.delta) {
            continue;
        }
        let w = heights.weight.of_element(g, chi.delta);
        let e = s * w;
        if !e.denom().is_one() {
            return Err(LocalError::NonIntegralExponent(e.to_string()));
        }
        let exp: u32 = e
            .numer()
            .to_string()
            .parse()
            .map_err(|_| LocalError::NonIntegralExponent(e.to_string()))?;
        let point = LocalPoint::Tame {
            place: chi.place,
            delta: chi.delta,
            frob: 0,
        };
        let pair = local_pairing(ld, &point, x);
        let term = CycQ::root_of_unity(n, pair)
            .scale(&BigRational::new(BigInt::one(), bigint_pow(p, exp)));
        total = total.add(&term);
    }
    Ok(total)
}

/// Exact local Tamagawa mass / twisted transform
/// (1/|G|) Σ_{points in W_v} ⟨φ_v, x_v⟩ H_v(φ_v)^{−a}.
/// With x = 0 and the R-integral condition at a tame place this equals the
/// local Fourier transform at s = a (the |G| Frobenius choices collapse
/// against the measure normalization).
pub fn local_tamagawa_mass(
    ld: &LocalData,
    heights: &HeightSpec,
    place: Place,
    cond: &LocalCondition,
    integral_r: Option<&RamSet>,
    x: &TwistElement,
    a: &BigRational,
) -> Result<CycQ, LocalError> {
    let g = &ld.group;
    let n = g.exponent();
    let points = ld.local_points(place, cond, integral_r)?;
    let mut total = CycQ::zero(n);
    for point in &points {
        let h = local_height(ld, heights, point)?;
        let ha = rational_pow_exact(&h, a)?;
        let pair = local_pairing(ld, point, x);
        let term = CycQ::root_of_unity(n, pair).scale(&ha.recip());
        total = total.add(&term);
    }
    let order_inv = BigRational::new(BigInt::one(), BigInt::from(g.order()));
    Ok(total.scale(&order_inv))
}

/// h^a for rational h, a — exact when the result is rational (h = 1, or a
/// integral, or h a perfect power).
pub fn rational_pow_exact(h: &BigRational, a: &BigRational) -> Result<BigRational, LocalError> {
    if h.is_one() {
        return Ok(BigRational::one());
    }
    if a.denom().is_one() {
        let e: i64 = a
            .numer()
            .to_string()
            .parse()
            .map_err(|_| LocalError::NonIntegralExponent(a.to_string()))?;
        let p = crate::heights::pow_rational(h, e.unsigned_abs());
        return Ok(if e < 0 { p.recip() } else { p });
    }
    // h^(num/den): need an exact den-th root of h^num
    let den: u32 = a
        .denom()
        .to_string()
        .parse()
        .map_err(|_| LocalError::NonIntegralExponent(a.to_string()))?;
    let num: i64 = a
        .numer()
        .to_string()
        .parse()
        .map_err(|_| LocalError::NonIntegralExponent(a.to_string()))?;
    let hn = crate::heights::pow_rational(h, num.unsigned_abs());
    let root = exact_root(&hn, den).ok_or(LocalError::NonIntegralExponent(a.to_string()))?;
    Ok(if num < 0 { root.recip() } else { root })
}

fn exact_root(r: &BigRational, d: u32) -> Option<BigRational> {
    let nr = int_root_exact(r.numer(), d)?;
    let dr = int_root_exact(r.denom(), d)?;
    Some(BigRational::new(nr, dr))
}

fn int_root_exact(x: &BigInt, d: u32) -> Option<BigInt> {
    if x < &BigInt::from(0) {
        return None;
    }
    let v: u128 = x.to_string().parse().ok()?;
    let r = crate::util::iroot(v, d);
    if crate::util::checked_pow_u128(r, d) == Some(v) {
        Some(BigInt::from(r))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::WeightFunction;
    use num::Zero;

    fn z4_data() -> LocalData {
        LocalData::new(FiniteAbelianGroup::new(&[4]).unwrap(), &[])
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn example_heights(ld: &LocalData) -> HeightSpec {
        // w: 1 -> 1, 2 -> 2 (orbit {1,3} has weight 1), H_2 = H_inf = 1
        let mut wm = BTreeMap::new();
        wm.insert(crate::group::GroupElement { coords: vec![1] }, rat(1, 1));
        wm.insert(crate::group::GroupElement { coords: vec![2] }, rat(2, 1));
        let w = WeightFunction::from_orbit_map(&ld.group, &wm).unwrap();
        HeightSpec::new(&ld.group, w, BTreeMap::new()).unwrap()
    }

    #[test]
    fn tame_character_counts() {
        let ld = z4_data();
        assert_eq!(tame_characters(&ld.group, 5).unwrap().len(), 4);
        assert_eq!(tame_characters(&ld.group, 7).unwrap().len(), 2);
        let z2 = FiniteAbelianGroup::new(&[2]).unwrap();
        assert_eq!(tame_characters(&z2, 3).unwrap().len(), 2);
        assert_eq!(
            tame_characters(&ld.group, 2),
            Err(LocalError::WildPlace(2))
        );
    }

    #[test]
    fn ramification_orbits() {
        let ld = z4_data();
        let g = &ld.group;
        let place = TamePlaceData::new(5);
        let chi = TameCharacter { place, delta: 3 };
        assert_eq!(ramification_orbit(g, &chi).members, vec![1, 3]);
        let chi0 = TameCharacter { place, delta: 0 };
        assert_eq!(ramification_orbit(g, &chi0).members, vec![0]);
        let place13 = TamePlaceData::new(13);
        let chi2 = TameCharacter {
            place: place13,
            delta: 2,
        };
        assert_eq!(ramification_orbit(g, &chi2).members, vec![2]);
    }

    #[test]
    fn root_independence_of_orbit() {
        // orbit of χ(g) is the same for every primitive root g
        for &p in &[5u64, 7, 11, 13, 17] {
            for shape in [vec![4u32], vec![2, 2], vec![6]] {
                let g = FiniteAbelianGroup::new(&shape).unwrap();
                if g.order() % p == 0 {
                    continue;
                }
                let roots = crate::primes::all_primitive_roots(p);
                let g0 = roots[0];
                for &delta in g.torsion_elements(p - 1) {
                    // the same character w.r.t. another root g' has image
                    // delta' with g0 = g'^k: delta' = k·delta where g'^k = g0
                    let orbit0 = g.orbit_of(delta);
                    for &gp in &roots {
                        let k = crate::primes::tame_dlog_mod_d(p, gp, g0, p - 1);
                        let delta_p = g.smul(k, delta);
                        assert_eq!(g.orbit_of(delta_p), orbit0);
                    }
                }
            }
        }
    }

    #[test]
    fn homomorphism_law() {
        // rep map χ -> χ(g) is additive for the fixed root
        let ld = z4_data();
        let g = &ld.group;
        for &p in &[5u64, 13, 17] {
            let chars = tame_characters(g, p).unwrap();
            for a in &chars {
                for b in &chars {
                    let sum_delta = g.add(a.delta, b.delta);
                    // evaluation is additive at every unit
                    for u in 1..p {
                        let lhs = g.add(a.eval(g, u), b.eval(g, u));
                        let chi_sum = TameCharacter {
                            place: a.place,
                            delta: sum_delta,
                        };
                        assert_eq!(lhs, chi_sum.eval(g, u));
                    }
                }
            }
        }
    }

    #[test]
    fn wild_character_counts() {
        let ld = z4_data();
        assert_eq!(ld.wild[&2].chars.len(), 8); // |G[2]|·|G_2| = 2·4
        let z2 = FiniteAbelianGroup::new(&[2]).unwrap();
        assert_eq!(wild_characters(&z2, 2).unwrap().len(), 4);
        let z3 = FiniteAbelianGroup::new(&[3]).unwrap();
        assert_eq!(wild_characters(&z3, 3).unwrap().len(), 3);
    }

    #[test]
    fn wild_count_oracle() {
        // independent oracle: |Hom(A, G)| = Π_i |G[e_i]| where the e_i are
        // the invariant factors of A = (ℤ/p^mℤ)^×, read off from torsion
        // counts |A[d]| computed by brute-force multiplication.
        let cases: Vec<(Vec<u32>, u64)> = vec![
            (vec![4], 2), // (Z/16)^x ≅ Z/2 × Z/4 -> 2·4 = 8 characters
            (vec![2], 2), // (Z/8)^x ≅ Z/2 × Z/2 -> 4
            (vec![3], 3), // (Z/9)^x ≅ Z/6 -> 3
        ];
        for (shape, p) in cases {
            let g = FiniteAbelianGroup::new(&shape).unwrap();
            let table = WildTable::build(&g, p).unwrap();
            let m = table.modulus;
            let ord = |u: u64| -> u64 {
                let mut acc = u % m;
                let mut o = 1;
                while acc != 1 {
                    acc = acc * u % m;
                    o += 1;
                }
                o
            };
            let orders: Vec<u64> = (1..m).filter(|&u| gcd_u64(u, m) == 1).map(ord).collect();
            let h = orders.len() as u64;
            let mut per_prime: Vec<(u64, Vec<u32>)> = Vec::new();
            for (q, _) in factorize(h) {
                let mut exps: Vec<u32> = Vec::new();
                for j in 1.. {
                    let killed = orders.iter().filter(|&&o| q.pow(j) % o == 0).count() as u64;
                    let prev = orders.iter().filter(|&&o| q.pow(j - 1) % o == 0).count() as u64;
                    if killed == prev {
                        break;
                    }
                    let mut a = 0u32;
                    let mut v = killed / prev;
                    while v > 1 {
                        v /= q;
                        a += 1;
                    }
                    exps.push(a);
                }
                let nf = exps.first().copied().unwrap_or(0) as usize;
                let mut parts = vec![0u32; nf];
                for (jm1, &cnt) in exps.iter().enumerate() {
                    for part in parts.iter_mut().take(cnt as usize) {
                        *part = jm1 as u32 + 1;
                    }
                }
                per_prime.push((q, parts));
            }
            let max_rank = per_prime.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
            let mut invariants = vec![1u64; max_rank];
            for (q, parts) in per_prime {
                for (i, &e) in parts.iter().enumerate() {
                    invariants[i] *= q.pow(e);
                }
            }
            let mut hom_count: u64 = 1;
            for f in invariants {
                hom_count *= g.torsion_elements(f).len() as u64;
            }
            assert_eq!(table.chars.len() as u64, hom_count, "p = {p}");
        }
    }

    #[test]
    fn local_height_examples() {
        let ld = z4_data();
        let hs = example_heights(&ld);
        let p7 = TamePlaceData::new(7);
        let pt = LocalPoint::Tame {
            place: p7,
            delta: 2,
            frob: 0,
        };
        assert_eq!(local_height(&ld, &hs, &pt).unwrap(), rat(49, 1));
        let pt0 = LocalPoint::Tame {
            place: p7,
            delta: 0,
            frob: 0,
        };
        assert_eq!(local_height(&ld, &hs, &pt0).unwrap(), rat(1, 1));
        let w2 = LocalPoint::Wild {
            p: 2,
            char_idx: 3,
            frob: 1,
        };
        assert_eq!(local_height(&ld, &hs, &w2).unwrap(), rat(1, 1));
    }

    #[test]
    fn pairing_half_turn_example() {
        // p = 5, g = 2, δ = 1, x = (−1)⊗ψ with ψ of order 4:
        // −1 = 2² mod 5, so χ(−1) = 2δ = 2 and the pairing is ψ(2) = half turn
        let ld = z4_data();
        let x = TwistElement::new(&ld.group, 1, BTreeMap::from([(2u64, 0u32)]));
        let pt = LocalPoint::Tame {
            place: TamePlaceData::new(5),
            delta: 1,
            frob: 0,
        };
        assert_eq!(local_pairing(&ld, &pt, &x), 2); // ζ_4² = −1
        // x = 0 pairs trivially
        let x0 = TwistElement::zero(&ld.s_f);
        assert_eq!(local_pairing(&ld, &pt, &x0), 0);
        // unramified char pairs trivially with unit-supported twists
        let pt0 = LocalPoint::Tame {
            place: TamePlaceData::new(5),
            delta: 0,
            frob: 0,
        };
        assert_eq!(local_pairing(&ld, &pt0, &x), 0);
    }

    #[test]
    fn local_fourier_paper_values() {
        let ld = z4_data();
        let hs = example_heights(&ld);
        let r = RamSet::full(&ld.group);
        let x0 = TwistElement::zero(&ld.s_f);
        let s1 = rat(1, 1);
        // p = 5: 1 + 2/5 + 1/25
        let f5 = local_fourier(&ld, &hs, 5, &x0, &s1, &r).unwrap();
        assert_eq!(f5.as_rational().unwrap(), rat(1, 1) + rat(2, 5) + rat(1, 25));
        // p = 7: 1 + 1/49
        let f7 = local_fourier(&ld, &hs, 7, &x0, &s1, &r).unwrap();
        assert_eq!(f7.as_rational().unwrap(), rat(50, 49));
        // R = {1,3}, p = 7: only the trivial character contributes
        let r13 = RamSet::new(&ld.group, &[1, 3]).unwrap();
        let f7r = local_fourier(&ld, &hs, 7, &x0, &s1, &r13).unwrap();
        assert_eq!(f7r.as_rational().unwrap(), rat(1, 1));
    }

    #[test]
    fn local_fourier_minus_four_twist() {
        // the −4 twist: ψ_{−1} of order 4, ψ_2 = 2ψ_{−1}
        let ld = z4_data();
        let hs = example_heights(&ld);
        let r = RamSet::full(&ld.group);
        let x = TwistElement::new(&ld.group, 1, BTreeMap::from([(2u64, 2u32)]));
        let s1 = rat(1, 1);
        // p ≡ 1 mod 4: (−4) is a fourth power, same as x = 0
        let f13 = local_fourier(&ld, &hs, 13, &x, &s1, &r).unwrap();
        assert_eq!(
            f13.as_rational().unwrap(),
            rat(1, 1) + rat(2, 13) + rat(1, 169)
        );
        // p ≡ 3 mod 4: 1 − 1/p²
        let f7 = local_fourier(&ld, &hs, 7, &x, &s1, &r).unwrap();
        assert_eq!(f7.as_rational().unwrap(), rat(48, 49));
        let f11 = local_fourier(&ld, &hs, 11, &x, &s1, &r).unwrap();
        assert_eq!(f11.as_rational().unwrap(), rat(120, 121));
    }

    #[test]
    fn tamagawa_mass_examples() {
        let ld = z4_data();
        let hs = example_heights(&ld);
        let x0 = TwistElement::zero(&ld.s_f);
        let a1 = rat(1, 1);
        // p ≡ 1 mod 4, R = {1,3}: 1 + 2/p
        let r13 = RamSet::new(&ld.group, &[1, 3]).unwrap();
        let m5 = local_tamagawa_mass(
            &ld,
            &hs,
            Place::Finite(5),
            &LocalCondition::Free,
            Some(&r13),
            &x0,
            &a1,
        )
        .unwrap();
        assert_eq!(m5.as_rational().unwrap(), rat(7, 5));
        // split condition at 2 and ∞: mass 1/4
        let m2 = local_tamagawa_mass(
            &ld,
            &hs,
            Place::Finite(2),
            &LocalCondition::Split,
            None,
            &x0,
            &a1,
        )
        .unwrap();
        assert_eq!(m2.as_rational().unwrap(), rat(1, 4));
        let mi = local_tamagawa_mass(&ld, &hs, Place::Inf, &LocalCondition::Split, None, &x0, &a1)
            .unwrap();
        assert_eq!(mi.as_rational().unwrap(), rat(1, 4));
        // p ≡ 3 mod 4, R full: 1 + 1/p²
        let rfull = RamSet::full(&ld.group);
        let m7 = local_tamagawa_mass(
            &ld,
            &hs,
            Place::Finite(7),
            &LocalCondition::Free,
            Some(&rfull),
            &x0,
            &a1,
        )
        .unwrap();
        assert_eq!(m7.as_rational().unwrap(), rat(50, 49));
    }

    #[test]
    fn mass_formula_matches_fourier() {
        // local_tamagawa_mass with R-integral condition at tame p equals
        // 1 + Σ_{γ∈R, (p−1)γ=0} p^{−w(γ)a} exactly
        let ld = z4_data();
        let hs = example_heights(&ld);
        let x0 = TwistElement::zero(&ld.s_f);
        let a1 = rat(1, 1);
        for &p in &[5u64, 7, 11, 13, 17, 19] {
            for r in [RamSet::full(&ld.group), RamSet::new(&ld.group, &[1, 3]).unwrap()] {
                let mass = local_tamagawa_mass(
                    &ld,
                    &hs,
                    Place::Finite(p),
                    &LocalCondition::Free,
                    Some(&r),
                    &x0,
                    &a1,
                )
                .unwrap();
                let fourier = local_fourier(&ld, &hs, p, &x0, &a1, &r).unwrap();
                assert!(mass.eq_value(&fourier), "p = {p}");
            }
        }
    }

    #[test]
    fn fourier_expansion_minimal_support() {
        // local_fourier − 1 − fixed_count(M_R, p)·p^{−s/a_R} is supported on
        // weights strictly above the minimum: exact check at s = 1
        let ld = z4_data();
        let hs = example_heights(&ld);
        let r = RamSet::full(&ld.group);
        let x0 = TwistElement::zero(&ld.s_f);
        let md = crate::group::minimal_set(&ld.group, &r, &hs.weight).unwrap();
        for &p in &[5u64, 7, 11, 13] {
            let f = local_fourier(&ld, &hs, p, &x0, &rat(1, 1), &r)
                .unwrap()
                .as_rational()
                .unwrap();
            let fixed = crate::group::fixed_count(
                &ld.group,
                &md.minimal,
                p % ld.group.exponent(),
            )
            .unwrap();
            let lead = rat(1, 1) + rat(fixed as i64, 1) * rat(1, p as i64);
            let tail = f - lead;
            // remaining term is the δ = 2 contribution p^{-2}
            assert_eq!(tail, rat(1, (p * p) as i64));
        }
    }

    #[test]
    fn twist_group_size_and_canonical_form() {
        let ld = z4_data();
        let tg = twist_group(&ld);
        assert_eq!(tg.len(), 8); // |G[2]|·|G|^{|S_f|} = 2·4
        assert!(tg.iter().any(|x| x.is_zero()));
        // canonicalization folds ψ and ψ+2Ĝ together
        let a = TwistElement::new(&ld.group, 3, BTreeMap::from([(2, 1)]));
        let b = TwistElement::new(&ld.group, 1, BTreeMap::from([(2, 1)]));
        assert_eq!(a, b);
    }

    #[test]
    fn rational_pow_edge_cases() {
        assert_eq!(
            rational_pow_exact(&rat(4, 9), &rat(1, 2)).unwrap(),
            rat(2, 3)
        );
        assert_eq!(rational_pow_exact(&rat(5, 1), &rat(2, 1)).unwrap(), rat(25, 1));
        assert!(rational_pow_exact(&rat(5, 1), &rat(1, 2)).is_err());
        assert_eq!(rational_pow_exact(&rat(1, 1), &rat(7, 3)).unwrap(), rat(1, 1));
        assert!(!rational_pow_exact(&rat(8, 27), &rat(1, 3))
            .unwrap()
            .is_zero());
    }
}
