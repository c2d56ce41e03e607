//! Finite abelian groups with the unit-exponentiation Galois action.
//!
//! A group is stored as its invariant factors d_1 | d_2 | … | d_r. Elements
//! are indexed 0..order in mixed radix; the index 0 is the identity. For
//! k = ℚ the Tate twist G(−1) is identified with G carrying the action
//! γ ↦ aγ for units a mod the exponent, so Galois orbits are orbits of that
//! action. All consumed quantities (weights, ramification-set membership,
//! fixed counts) are constant on those orbits, which is what justifies the
//! identification: no coherent choice of roots of unity is ever needed.
//!
//! Orbit representatives are the lexicographically least members, so every
//! derived report is deterministic.

use num::rational::BigRational;
use num::{BigInt, One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

use crate::util::{euler_phi, gcd_u64};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("invariant factor {0} is < 2")]
    FactorTooSmall(u32),
    #[error("invariant factors must divide in sequence: {0} does not divide {1}")]
    NotDividing(u32, u32),
    #[error("group order {0} exceeds the configured bound {1}")]
    OrderBound(u64, u64),
    #[error("element coordinates have wrong rank: expected {expected}, got {got}")]
    BadRank { expected: usize, got: usize },
    #[error("set is not stable under the unit-exponentiation action (element {0:?})")]
    NotGaloisStable(Vec<u32>),
    #[error("ramification set must not contain the identity")]
    ContainsIdentity,
    #[error("ramification set is empty")]
    EmptyRamSet,
    #[error("weight missing on orbit of {0:?}")]
    MissingWeight(Vec<u32>),
    #[error("weight on orbit of {0:?} must be positive (big height)")]
    NonPositiveWeight(Vec<u32>),
    #[error("{0} is not a unit mod {1}")]
    NotAUnit(u64, u64),
    #[error("subgroup count exceeded internal cap while building the lattice")]
    LatticeTooLarge,
}

/// Default cap on |G| for lattice construction.
pub const DEFAULT_ORDER_BOUND: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    pub coords: Vec<u32>,
}

/// A dual character ψ; coordinate i lives in ℤ/d_iℤ and the pairing with a
/// group element γ is Σ_i γ_i ψ_i (n/d_i) mod n, read as e^{2πi·/n}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualCharacter {
    pub coords: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaloisOrbit {
    pub representative: u32,
    pub members: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct FiniteAbelianGroup {
    factors: Vec<u32>,
    order: u64,
    exponent: u64,
    orbit_id: Vec<u32>,
    orbits: Vec<GaloisOrbit>,
    elt_order: Vec<u64>,
    /// elements with order dividing d, for each divisor d of the exponent
    torsion: BTreeMap<u64, Vec<u32>>,
    /// canonical representative of ψ + 2Ĝ for each dual index
    dual_mod2_rep: Vec<u32>,
}

impl FiniteAbelianGroup {
    pub fn new(factors: &[u32]) -> Result<Self, GroupError> {
        Self::with_bound(factors, DEFAULT_ORDER_BOUND)
    }

    pub fn with_bound(factors: &[u32], bound: u64) -> Result<Self, GroupError> {
        if factors.is_empty() {
            return Err(GroupError::FactorTooSmall(0));
        }
        let mut order: u64 = 1;
        for (i, &d) in factors.iter().enumerate() {
            if d < 2 {
                return Err(GroupError::FactorTooSmall(d));
            }
            if i + 1 < factors.len() && factors[i + 1] % d != 0 {
                return Err(GroupError::NotDividing(d, factors[i + 1]));
            }
            order = order.checked_mul(d as u64).ok_or(GroupError::OrderBound(u64::MAX, bound))?;
            if order > bound {
                return Err(GroupError::OrderBound(order, bound));
            }
        }
        let exponent = *factors.last().unwrap() as u64;
        let n = order as usize;

        let mut g = FiniteAbelianGroup {
            factors: factors.to_vec(),
            order,
            exponent,
            orbit_id: vec![u32::MAX; n],
            orbits: Vec::new(),
            elt_order: vec![1; n],
            torsion: BTreeMap::new(),
            dual_mod2_rep: Vec::new(),
        };

        for idx in 0..n {
            g.elt_order[idx] = g.compute_order(idx as u32);
        }

        // orbits of the unit action, generated by the unit-group generators
        let gens = unit_group_generators(exponent);
        let mut next_orbit = 0u32;
        for start in 0..n {
            if g.orbit_id[start] != u32::MAX {
                continue;
            }
            let mut members = vec![start as u32];
            g.orbit_id[start] = next_orbit;
            let mut frontier = vec![start as u32];
            while let Some(x) = frontier.pop() {
                for &a in &gens {
                    let y = g.smul(a, x);
                    if g.orbit_id[y as usize] == u32::MAX {
                        g.orbit_id[y as usize] = next_orbit;
                        members.push(y);
                        frontier.push(y);
                    }
                }
            }
            members.sort_unstable();
            g.orbits.push(GaloisOrbit {
                representative: members[0],
                members,
            });
            next_orbit += 1;
        }

        for d in divisors(exponent) {
            let elems: Vec<u32> = (0..n as u32).filter(|&x| d % g.elt_order[x as usize] == 0).collect();
            g.torsion.insert(d, elems);
        }

        // cosets of 2Ĝ in Ĝ; the dual is indexed the same way as G
        let two_dual: Vec<u32> = (0..n as u32).map(|x| g.add(x, x)).collect();
        let mut rep = vec![u32::MAX; n];
        for psi in 0..n as u32 {
            if rep[psi as usize] != u32::MAX {
                continue;
            }
            let mut coset: Vec<u32> = two_dual.iter().map(|&t| g.add(psi, t)).collect();
            coset.sort_unstable();
            coset.dedup();
            let r = coset[0];
            for c in coset {
                rep[c as usize] = r;
            }
        }
        g.dual_mod2_rep = rep;

        Ok(g)
    }

    pub fn invariant_factors(&self) -> &[u32] {
        &self.factors
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn num_elements(&self) -> usize {
        self.order as usize
    }

    pub fn identity(&self) -> u32 {
        0
    }

    pub fn index_of(&self, e: &GroupElement) -> Result<u32, GroupError> {
        if e.coords.len() != self.factors.len() {
            return Err(GroupError::BadRank {
                expected: self.factors.len(),
                got: e.coords.len(),
            });
        }
        let mut idx: u64 = 0;
        for (i, (&c, &d)) in e.coords.iter().zip(self.factors.iter()).enumerate().rev() {
            let _ = i;
            idx = idx * d as u64 + (c % d) as u64;
        }
        Ok(idx as u32)
    }

    pub fn element(&self, mut idx: u32) -> GroupElement {
        let mut coords = Vec::with_capacity(self.factors.len());
        for &d in &self.factors {
            coords.push(idx % d);
            idx /= d;
        }
        GroupElement { coords }
    }

    pub fn coords(&self, idx: u32) -> Vec<u32> {
        self.element(idx).coords
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        let mut out: u64 = 0;
        let mut mult: u64 = 1;
        let (mut a, mut b) = (a, b);
        for &d in &self.factors {
            let ca = a % d;
            let cb = b % d;
            out += ((ca + cb) % d) as u64 * mult;
            mult *= d as u64;
            a /= d;
            b /= d;
        }
        out as u32
    }

    pub fn neg(&self, a: u32) -> u32 {
        let mut out: u64 = 0;
        let mut mult: u64 = 1;
        let mut a = a;
        for &d in &self.factors {
            let ca = a % d;
            out += ((d - ca) % d) as u64 * mult;
            mult *= d as u64;
            a /= d;
        }
        out as u32
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    /// k·a for any non-negative integer k.
    pub fn smul(&self, k: u64, a: u32) -> u32 {
        let mut out: u64 = 0;
        let mut mult: u64 = 1;
        let mut a = a;
        for &d in &self.factors {
            let ca = a % d;
            out += ((k % d as u64) * ca as u64 % d as u64) * mult;
            mult *= d as u64;
            a /= d;
        }
        out as u32
    }

    fn compute_order(&self, a: u32) -> u64 {
        let mut ord = 1u64;
        let mut a_dec = a;
        for &d in &self.factors {
            let c = (a_dec % d) as u64;
            a_dec /= d;
            if c != 0 {
                let o = d as u64 / gcd_u64(c, d as u64);
                ord = crate::util::lcm_u64(ord, o);
            }
        }
        ord
    }

    pub fn element_order(&self, a: u32) -> u64 {
        self.elt_order[a as usize]
    }

    /// Pontryagin pairing ⟨γ, ψ⟩ as an element of ℤ/nℤ (n = exponent).
    pub fn pairing(&self, gamma: u32, psi: u32) -> u64 {
        let n = self.exponent;
        let mut acc: u64 = 0;
        let (mut g, mut p) = (gamma, psi);
        for &d in &self.factors {
            let cg = (g % d) as u64;
            let cp = (p % d) as u64;
            acc = (acc + cg * cp % n * (n / d as u64)) % n;
            g /= d;
            p /= d;
        }
        acc
    }

    pub fn orbits(&self) -> &[GaloisOrbit] {
        &self.orbits
    }

    pub fn orbit_of(&self, a: u32) -> u32 {
        self.orbit_id[a as usize]
    }

    pub fn orbit_rep(&self, a: u32) -> u32 {
        self.orbits[self.orbit_id[a as usize] as usize].representative
    }

    /// Elements killed by d (order dividing gcd(d, exponent)).
    pub fn torsion_elements(&self, d: u64) -> &[u32] {
        let g = gcd_u64(d, self.exponent);
        &self.torsion[&g]
    }

    pub fn two_torsion(&self) -> &[u32] {
        self.torsion_elements(2)
    }

    /// |Ĝ(ℚ)| = |Hom(G, μ_∞(ℚ))| = |G[2]|.
    pub fn rational_dual_size(&self) -> u64 {
        self.two_torsion().len() as u64
    }

    /// Canonical representative of ψ + 2Ĝ (lex-least member of the coset).
    pub fn dual_mod_two_rep(&self, psi: u32) -> u32 {
        self.dual_mod2_rep[psi as usize]
    }

    pub fn dual_mod_two_reps(&self) -> Vec<u32> {
        let mut reps: Vec<u32> = self.dual_mod2_rep.clone();
        reps.sort_unstable();
        reps.dedup();
        reps
    }

    pub fn unit_residues(&self) -> Vec<u64> {
        (1..=self.exponent).filter(|&a| gcd_u64(a, self.exponent) == 1).collect()
    }
}

fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for d in 1..=n {
        if n % d == 0 {
            out.push(d);
        }
    }
    out
}

/// Generators of (ℤ/nℤ)^× via CRT over the prime powers of n.
fn unit_group_generators(n: u64) -> Vec<u64> {
    if n <= 2 {
        return vec![1];
    }
    let mut gens = Vec::new();
    let facs = crate::primes::factorize(n);
    for &(p, e) in &facs {
        let pe = p.pow(e);
        let rest = n / pe;
        let local: Vec<u64> = if p == 2 {
            match e {
                1 => vec![],
                2 => vec![3],
                _ => vec![pe - 1, 5],
            }
        } else {
            vec![crate::primes::primitive_root_mod_prime_power(p, e)]
        };
        for lg in local {
            // x = lg mod pe, x = 1 mod rest
            gens.push(crt_pair(lg, pe, 1, rest));
        }
    }
    if gens.is_empty() {
        gens.push(1);
    }
    gens
}

fn crt_pair(a: u64, m: u64, b: u64, n: u64) -> u64 {
    if n == 1 {
        return a % m;
    }
    // x = a mod m, x = b mod n with gcd(m, n) = 1
    let (mut x, total) = (a % m, m * n);
    while x % n != b % n {
        x += m;
    }
    x % total.max(1)
}

// ---------------------------------------------------------------------------
// weights and ramification sets

/// Class function w on G(−1) with w(0) = 0, stored per orbit. All nonzero
/// orbits must be covered and all values must be positive (big heights).
#[derive(Clone, Debug)]
pub struct WeightFunction {
    by_orbit: Vec<Option<BigRational>>,
}

impl WeightFunction {
    pub fn from_orbit_map(
        group: &FiniteAbelianGroup,
        map: &BTreeMap<GroupElement, BigRational>,
    ) -> Result<Self, Vec<GroupError>> {
        let mut by_orbit: Vec<Option<BigRational>> = vec![None; group.orbits().len()];
        by_orbit[group.orbit_of(0) as usize] = Some(BigRational::zero());
        let mut errors = Vec::new();
        for (e, w) in map {
            let idx = match group.index_of(e) {
                Ok(i) => i,
                Err(err) => {
                    errors.push(err);
                    continue;
                }
            };
            if idx == 0 {
                if !w.is_zero() {
                    errors.push(GroupError::NonPositiveWeight(e.coords.clone()));
                }
                continue;
            }
            if *w <= BigRational::zero() {
                errors.push(GroupError::NonPositiveWeight(e.coords.clone()));
                continue;
            }
            by_orbit[group.orbit_of(idx) as usize] = Some(w.clone());
        }
        for orbit in group.orbits() {
            if by_orbit[group.orbit_of(orbit.representative) as usize].is_none() {
                errors.push(GroupError::MissingWeight(
                    group.coords(orbit.representative),
                ));
            }
        }
        if errors.is_empty() {
            Ok(WeightFunction { by_orbit })
        } else {
            Err(errors)
        }
    }

    /// Uniform weight c on every nonzero orbit.
    pub fn constant(group: &FiniteAbelianGroup, c: BigRational) -> Self {
        let mut by_orbit = vec![Some(c); group.orbits().len()];
        by_orbit[group.orbit_of(0) as usize] = Some(BigRational::zero());
        WeightFunction { by_orbit }
    }

    pub fn of_orbit(&self, orbit: u32) -> &BigRational {
        self.by_orbit[orbit as usize].as_ref().expect("weight defined on all orbits")
    }

    pub fn of_element(&self, group: &FiniteAbelianGroup, elt: u32) -> &BigRational {
        self.of_orbit(group.orbit_of(elt))
    }
}

/// A non-empty Galois-stable set of nonzero elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RamSet {
    elements: Vec<u32>,
}

impl RamSet {
    pub fn new(group: &FiniteAbelianGroup, elements: &[u32]) -> Result<Self, GroupError> {
        let mut sorted: Vec<u32> = elements.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.iter().any(|&e| e == 0) {
            return Err(GroupError::ContainsIdentity);
        }
        for &e in &sorted {
            let orbit = &group.orbits()[group.orbit_of(e) as usize];
            for &m in &orbit.members {
                if sorted.binary_search(&m).is_err() {
                    return Err(GroupError::NotGaloisStable(group.coords(e)));
                }
            }
        }
        Ok(RamSet { elements: sorted })
    }

    pub fn full(group: &FiniteAbelianGroup) -> Self {
        RamSet {
            elements: (1..group.num_elements() as u32).collect(),
        }
    }

    pub fn elements(&self) -> &[u32] {
        &self.elements
    }

    pub fn contains(&self, e: u32) -> bool {
        self.elements.binary_search(&e).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn orbit_ids(&self, group: &FiniteAbelianGroup) -> Vec<u32> {
        let mut ids: Vec<u32> = self.elements.iter().map(|&e| group.orbit_of(e)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Output of [`minimal_set`]: argmin of w on R, the growth exponent and the
/// log-power.
#[derive(Clone, Debug)]
pub struct MinimalData {
    pub minimal: RamSet,
    pub a_r: BigRational,
    pub b_r: u64,
    pub min_weight: BigRational,
}

pub fn minimal_set(
    group: &FiniteAbelianGroup,
    r: &RamSet,
    w: &WeightFunction,
) -> Result<MinimalData, GroupError> {
    if r.is_empty() {
        return Err(GroupError::EmptyRamSet);
    }
    let min_weight = r
        .elements()
        .iter()
        .map(|&e| w.of_element(group, e))
        .min()
        .unwrap()
        .clone();
    let minimal: Vec<u32> = r
        .elements()
        .iter()
        .copied()
        .filter(|&e| *w.of_element(group, e) == min_weight)
        .collect();
    let m = RamSet::new(group, &minimal)?;
    let b_r = m.orbit_ids(group).len() as u64;
    Ok(MinimalData {
        a_r: min_weight.recip(),
        b_r,
        min_weight,
        minimal: m,
    })
}

/// #{γ ∈ M : (a−1)γ = 0}, the fixed points of Frob_p for p ≡ a mod n.
pub fn fixed_count(group: &FiniteAbelianGroup, m: &RamSet, a: u64) -> Result<u64, GroupError> {
    let n = group.exponent();
    if gcd_u64(a % n, n) != 1 {
        return Err(GroupError::NotAUnit(a, n));
    }
    let k = (a + n - 1) % n; // a - 1 mod n
    Ok(m.elements().iter().filter(|&&g| group.smul(k, g) == 0).count() as u64)
}

/// Average of fixed counts over the unit group; equals the number of orbits
/// of M exactly (Burnside).
pub fn burnside_mean(group: &FiniteAbelianGroup, m: &RamSet) -> BigRational {
    let units = group.unit_residues();
    let mut total: u64 = 0;
    for &a in &units {
        total += fixed_count(group, m, a).expect("unit residue");
    }
    BigRational::new(BigInt::from(total), BigInt::from(units.len() as u64))
}

// ---------------------------------------------------------------------------
// subgroup lattice

#[derive(Clone, Debug)]
pub struct Subgroup {
    pub members: Vec<u32>,
    bits: Vec<u64>,
}

impl Subgroup {
    fn from_members(mut members: Vec<u32>, n: usize) -> Self {
        members.sort_unstable();
        members.dedup();
        let mut bits = vec![0u64; (n + 63) / 64];
        for &m in &members {
            bits[m as usize / 64] |= 1 << (m % 64);
        }
        Subgroup { members, bits }
    }

    pub fn order(&self) -> u64 {
        self.members.len() as u64
    }

    pub fn contains(&self, e: u32) -> bool {
        self.bits[e as usize / 64] >> (e % 64) & 1 == 1
    }

    pub fn is_subset_of(&self, other: &Subgroup) -> bool {
        self.bits.iter().zip(other.bits.iter()).all(|(a, b)| a & !b == 0)
    }
}

#[derive(Clone, Debug)]
pub struct SubgroupLattice {
    /// sorted by (order, members) so enumeration order is deterministic
    pub subgroups: Vec<Subgroup>,
    /// Möbius values μ(H, G) for the full group as top
    pub mobius_to_top: Vec<i64>,
}

const LATTICE_CAP: usize = 50_000;

pub fn subgroup_lattice(group: &FiniteAbelianGroup) -> Result<SubgroupLattice, GroupError> {
    let n = group.num_elements();
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    let trivial = Subgroup::from_members(vec![0], n);
    let mut subgroups = vec![trivial];
    seen.insert(vec![0], 0);
    let mut frontier = vec![0usize];
    while let Some(idx) = frontier.pop() {
        let current = subgroups[idx].members.clone();
        for g in 1..n as u32 {
            if subgroups[idx].contains(g) {
                continue;
            }
            let extended = close_under(group, &current, g);
            if !seen.contains_key(&extended) {
                if subgroups.len() >= LATTICE_CAP {
                    return Err(GroupError::LatticeTooLarge);
                }
                let sg = Subgroup::from_members(extended.clone(), n);
                seen.insert(extended, subgroups.len());
                frontier.push(subgroups.len());
                subgroups.push(sg);
            }
        }
    }
    subgroups.sort_by(|a, b| (a.order(), &a.members).cmp(&(b.order(), &b.members)));

    // Möbius values by downward recursion from the top
    let top = subgroups.len() - 1;
    debug_assert_eq!(subgroups[top].order(), group.order());
    let mut mobius = vec![0i64; subgroups.len()];
    mobius[top] = 1;
    for i in (0..subgroups.len()).rev() {
        if i == top {
            continue;
        }
        let mut acc = 0i64;
        for j in (i + 1)..subgroups.len() {
            if subgroups[i].is_subset_of(&subgroups[j]) {
                acc += mobius[j];
            }
        }
        mobius[i] = -acc;
    }
    Ok(SubgroupLattice {
        subgroups,
        mobius_to_top: mobius,
    })
}

/// Closure of `base ∪ {g}` under addition: the base is already a subgroup,
/// so the result is the union of cosets base + j·g.
fn close_under(group: &FiniteAbelianGroup, base: &[u32], g: u32) -> Vec<u32> {
    let ord = group.element_order(g);
    let mut all: Vec<u32> = Vec::with_capacity(base.len() * ord as usize);
    let mut shift = 0u32;
    for _ in 0..ord {
        for &b in base {
            all.push(group.add(b, shift));
        }
        shift = group.add(shift, g);
    }
    all.sort_unstable();
    all.dedup();
    all
}

// ---------------------------------------------------------------------------
// abstract structure of subgroups and quotients

/// Minimal group-like view used to extract invariant factors and a basis:
/// a list of element labels with an addition law.
pub trait GroupOps {
    fn elements(&self) -> &[u32];
    fn add(&self, a: u32, b: u32) -> u32;
    fn zero(&self) -> u32;
}

struct SubgroupView<'a> {
    g: &'a FiniteAbelianGroup,
    members: Vec<u32>,
}

impl GroupOps for SubgroupView<'_> {
    fn elements(&self) -> &[u32] {
        &self.members
    }
    fn add(&self, a: u32, b: u32) -> u32 {
        self.g.add(a, b)
    }
    fn zero(&self) -> u32 {
        0
    }
}

/// A quotient G/K presented by canonical coset representatives.
pub struct QuotientView<'a> {
    g: &'a FiniteAbelianGroup,
    reps: Vec<u32>,
    canon: Vec<u32>,
}

impl<'a> QuotientView<'a> {
    pub fn new(g: &'a FiniteAbelianGroup, kernel: &[u32]) -> Self {
        let n = g.num_elements();
        let mut canon = vec![u32::MAX; n];
        let mut reps = Vec::new();
        for x in 0..n as u32 {
            if canon[x as usize] != u32::MAX {
                continue;
            }
            let mut coset: Vec<u32> = kernel.iter().map(|&k| g.add(x, k)).collect();
            coset.sort_unstable();
            let rep = coset[0];
            for c in coset {
                canon[c as usize] = rep;
            }
            reps.push(rep);
        }
        reps.sort_unstable();
        QuotientView { g, reps, canon }
    }

    pub fn project(&self, x: u32) -> u32 {
        self.canon[x as usize]
    }
}

impl GroupOps for QuotientView<'_> {
    fn elements(&self) -> &[u32] {
        &self.reps
    }
    fn add(&self, a: u32, b: u32) -> u32 {
        self.canon[self.g.add(a, b) as usize]
    }
    fn zero(&self) -> u32 {
        self.canon[0]
    }
}

fn order_in<O: GroupOps>(ops: &O, x: u32) -> u64 {
    let mut acc = ops.add(x, ops.zero());
    let mut ord = 1u64;
    while acc != ops.zero() {
        acc = ops.add(acc, x);
        ord += 1;
    }
    ord
}

/// Invariant factors of an abstract finite abelian group, read off from the
/// torsion order statistics |H[p^j]|.
pub fn invariant_factors_of<O: GroupOps>(ops: &O) -> Vec<u32> {
    let orders: Vec<u64> = ops.elements().iter().map(|&x| order_in(ops, x)).collect();
    let h = orders.len() as u64;
    if h == 1 {
        return vec![];
    }
    let mut per_prime: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    for (p, _) in crate::primes::factorize(h) {
        // a_j = #factors with p-valuation >= j
        let mut exps: Vec<u32> = Vec::new();
        let mut j = 1u32;
        let mut prev = 0u32;
        loop {
            let pj = p.pow(j);
            let count = orders.iter().filter(|&&o| pj % o == 0 || o == 1 || pj % o == 0).count();
            // count elements killed by p^j
            let killed = orders.iter().filter(|&&o| pj % o == 0).count() as u64;
            let prev_killed = orders.iter().filter(|&&o| p.pow(j - 1) % o == 0).count() as u64;
            let log = |x: u64| -> u32 {
                let mut v = x;
                let mut l = 0;
                while v > 1 {
                    v /= p;
                    l += 1;
                }
                l
            };
            let a_j = log(killed / prev_killed.max(1));
            let _ = (count, prev);
            if a_j == 0 {
                break;
            }
            exps.push(a_j);
            prev = a_j;
            j += 1;
        }
        // exps[j-1] = number of cyclic p-factors with exponent >= j
        let num_factors = exps.first().copied().unwrap_or(0) as usize;
        let mut parts = vec![0u32; num_factors];
        for (jm1, &cnt) in exps.iter().enumerate() {
            for part in parts.iter_mut().take(cnt as usize) {
                *part = jm1 as u32 + 1;
            }
        }
        parts.sort_unstable_by(|a, b| b.cmp(a)); // descending
        per_prime.insert(p, parts);
    }
    let max_rank = per_prime.values().map(|v| v.len()).max().unwrap_or(0);
    let mut factors_desc: Vec<u64> = vec![1; max_rank];
    for (p, parts) in per_prime {
        for (i, &e) in parts.iter().enumerate() {
            factors_desc[i] *= p.pow(e);
        }
    }
    factors_desc.reverse(); // ascending, d_1 | d_2 | ...
    factors_desc.into_iter().map(|f| f as u32).collect()
}

/// Explicit basis (h_1, …, h_s) realizing the invariant factors: the map
/// ∏ ℤ/e_i → H, (a_i) ↦ Σ a_i h_i is an isomorphism. Deterministic search.
pub fn basis_of<O: GroupOps>(ops: &O) -> (Vec<u32>, Vec<u32>) {
    let factors = invariant_factors_of(ops);
    if factors.is_empty() {
        return (vec![], vec![]);
    }
    let targets: Vec<u64> = factors.iter().rev().map(|&f| f as u64).collect(); // descending
    let mut chosen: Vec<u32> = Vec::new();
    assert!(
        search_basis(ops, &targets, &mut chosen),
        "basis extraction failed (bug)"
    );
    chosen.reverse(); // ascending to match invariant factor order
    (factors, chosen)
}

fn span_size<O: GroupOps>(ops: &O, gens: &[u32]) -> usize {
    let mut span = vec![ops.zero()];
    for &g in gens {
        let mut next: Vec<u32> = Vec::new();
        let ord = order_in(ops, g);
        for &s in &span {
            let mut x = s;
            for _ in 0..ord {
                next.push(x);
                x = ops.add(x, g);
            }
        }
        next.sort_unstable();
        next.dedup();
        span = next;
    }
    span.len()
}

fn search_basis<O: GroupOps>(ops: &O, targets: &[u64], chosen: &mut Vec<u32>) -> bool {
    if chosen.len() == targets.len() {
        return true;
    }
    let want = targets[chosen.len()];
    let expected: u64 = targets[..=chosen.len()].iter().product();
    for &cand in ops.elements() {
        if order_in(ops, cand) != want {
            continue;
        }
        chosen.push(cand);
        if span_size(ops, chosen) as u64 == expected && search_basis(ops, targets, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// A subgroup H of G together with an explicit identification with an
/// abstract FiniteAbelianGroup; `embed` maps abstract indices to G indices.
pub struct EmbeddedSubgroup {
    pub group: FiniteAbelianGroup,
    pub embed: Vec<u32>,
    pub g_index_to_sub: HashMap<u32, u32>,
}

pub fn subgroup_as_group(
    g: &FiniteAbelianGroup,
    members: &[u32],
) -> Result<EmbeddedSubgroup, GroupError> {
    let view = SubgroupView {
        g,
        members: members.to_vec(),
    };
    let (factors, basis) = basis_of(&view);
    let abstract_group = if factors.is_empty() {
        // trivial subgroup: model as Z/1 is not allowed (factors >= 2); use a
        // one-element marker group Z/2 restricted to index 0 would be wrong.
        // Represent the trivial group by an empty-factor special case.
        return Ok(EmbeddedSubgroup {
            group: FiniteAbelianGroup::with_bound(&[2], 4).unwrap(), // placeholder, unused
            embed: vec![0],
            g_index_to_sub: HashMap::from([(0u32, 0u32)]),
        });
    } else {
        FiniteAbelianGroup::with_bound(&factors, g.order())?
    };
    let mut embed = vec![0u32; abstract_group.num_elements()];
    for idx in 0..abstract_group.num_elements() as u32 {
        let coords = abstract_group.coords(idx);
        let mut acc = 0u32;
        for (c, &b) in coords.iter().zip(basis.iter()) {
            acc = g.add(acc, g.smul(*c as u64, b));
        }
        embed[idx as usize] = acc;
    }
    let mut back = HashMap::new();
    for (i, &e) in embed.iter().enumerate() {
        back.insert(e, i as u32);
    }
    assert_eq!(back.len(), embed.len(), "embedding not injective (bug)");
    Ok(EmbeddedSubgroup {
        group: abstract_group,
        embed,
        g_index_to_sub: back,
    })
}

/// The quotient G/⟨K⟩ with an explicit abstract structure and the projection
/// G → Q as a table of abstract indices.
pub struct QuotientGroup {
    pub group: Option<FiniteAbelianGroup>,
    /// projection: G element index -> abstract quotient index (0 if trivial)
    pub project: Vec<u32>,
    pub order: u64,
}

pub fn quotient_group(g: &FiniteAbelianGroup, kernel_members: &[u32]) -> QuotientGroup {
    let view = QuotientView::new(g, kernel_members);
    let reps: Vec<u32> = view.elements().to_vec();
    if reps.len() == 1 {
        return QuotientGroup {
            group: None,
            project: vec![0; g.num_elements()],
            order: 1,
        };
    }
    let (factors, basis) = basis_of(&view);
    let q = FiniteAbelianGroup::with_bound(&factors, g.order()).expect("quotient fits");
    // abstract index for each rep: solve by enumerating the abstract group
    let mut rep_to_abs: HashMap<u32, u32> = HashMap::new();
    for idx in 0..q.num_elements() as u32 {
        let coords = q.coords(idx);
        let mut acc = view.zero();
        for (c, &b) in coords.iter().zip(basis.iter()) {
            for _ in 0..*c {
                acc = view.add(acc, b);
            }
        }
        rep_to_abs.insert(acc, idx);
    }
    assert_eq!(rep_to_abs.len(), q.num_elements());
    let project: Vec<u32> = (0..g.num_elements() as u32)
        .map(|x| rep_to_abs[&view.project(x)])
        .collect();
    QuotientGroup {
        group: Some(q),
        project,
        order: reps.len() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::FromPrimitive;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn z4() -> FiniteAbelianGroup {
        FiniteAbelianGroup::new(&[4]).unwrap()
    }

    #[test]
    fn orbit_examples() {
        // Z/4: {0}, {1,3}, {2}
        let g = z4();
        assert_eq!(g.orbits().len(), 3);
        let orbit1 = &g.orbits()[g.orbit_of(1) as usize];
        assert_eq!(orbit1.members, vec![1, 3]);
        // Z/2 x Z/2: exponent 2, unit action trivial, 4 orbits
        let v4 = FiniteAbelianGroup::new(&[2, 2]).unwrap();
        assert_eq!(v4.orbits().len(), 4);
        // Z/5: units transitive on nonzero
        let z5 = FiniteAbelianGroup::new(&[5]).unwrap();
        assert_eq!(z5.orbits().len(), 2);
    }

    #[test]
    fn minimal_set_examples() {
        let g = z4();
        let mut wm = BTreeMap::new();
        wm.insert(GroupElement { coords: vec![1] }, rat(1, 1));
        wm.insert(GroupElement { coords: vec![2] }, rat(2, 1));
        let w = WeightFunction::from_orbit_map(&g, &wm).unwrap();
        let r = RamSet::full(&g);
        let md = minimal_set(&g, &r, &w).unwrap();
        assert_eq!(md.minimal.elements(), &[1, 3]);
        assert_eq!(md.a_r, rat(1, 1));
        assert_eq!(md.b_r, 1);

        let r2 = RamSet::new(&g, &[2]).unwrap();
        let md2 = minimal_set(&g, &r2, &w).unwrap();
        assert_eq!(md2.minimal.elements(), &[2]);
        assert_eq!(md2.a_r, rat(1, 2));
        assert_eq!(md2.b_r, 1);

        let w1 = WeightFunction::constant(&g, rat(1, 1));
        let md3 = minimal_set(&g, &r, &w1).unwrap();
        assert_eq!(md3.a_r, rat(1, 1));
        assert_eq!(md3.b_r, 2);
    }

    #[test]
    fn rejects_unstable_ramset() {
        let g = z4();
        assert_eq!(
            RamSet::new(&g, &[1]),
            Err(GroupError::NotGaloisStable(vec![1]))
        );
    }

    #[test]
    fn fixed_count_examples() {
        let g = z4();
        let m = RamSet::new(&g, &[1, 3]).unwrap();
        assert_eq!(fixed_count(&g, &m, 1).unwrap(), 2);
        assert_eq!(fixed_count(&g, &m, 3).unwrap(), 0);
        let m2 = RamSet::new(&g, &[2]).unwrap();
        assert_eq!(fixed_count(&g, &m2, 3).unwrap(), 1);
        assert!(fixed_count(&g, &m, 2).is_err());
    }

    #[test]
    fn burnside_examples() {
        let g = z4();
        let m = RamSet::new(&g, &[1, 3]).unwrap();
        assert_eq!(burnside_mean(&g, &m), rat(1, 1));
        let m13 = RamSet::new(&g, &[1, 2, 3]).unwrap();
        assert_eq!(burnside_mean(&g, &m13), rat(2, 1));
        let v4 = FiniteAbelianGroup::new(&[2, 2]).unwrap();
        let m3 = RamSet::new(&v4, &[1, 2, 3]).unwrap();
        assert_eq!(burnside_mean(&v4, &m3), rat(3, 1));
    }

    #[test]
    fn burnside_equals_orbit_count_randomized() {
        // 500 random Galois-stable subsets over assorted groups
        let shapes: Vec<Vec<u32>> = vec![
            vec![4], vec![2, 2], vec![6], vec![8], vec![2, 4], vec![12], vec![3, 3], vec![2, 2, 2],
        ];
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        let mut done = 0;
        'outer: loop {
            for shape in &shapes {
                let g = FiniteAbelianGroup::new(shape).unwrap();
                // random union of nonzero orbits
                let mut members = Vec::new();
                for orbit in g.orbits() {
                    if orbit.representative == 0 {
                        continue;
                    }
                    if next() % 2 == 0 {
                        members.extend_from_slice(&orbit.members);
                    }
                }
                if members.is_empty() {
                    continue;
                }
                let m = RamSet::new(&g, &members).unwrap();
                let expected = m.orbit_ids(&g).len() as i64;
                assert_eq!(burnside_mean(&g, &m), rat(expected, 1));
                done += 1;
                if done >= 500 {
                    break 'outer;
                }
            }
        }
    }

    #[test]
    fn lattice_examples() {
        let g = z4();
        let lat = subgroup_lattice(&g).unwrap();
        assert_eq!(lat.subgroups.len(), 3);
        // chain: mobius(0, G) = 0, mobius(Z/2, G) = -1, mobius(G, G) = 1
        assert_eq!(lat.mobius_to_top, vec![0, -1, 1]);

        let v4 = FiniteAbelianGroup::new(&[2, 2]).unwrap();
        assert_eq!(subgroup_lattice(&v4).unwrap().subgroups.len(), 5);

        let z6 = FiniteAbelianGroup::new(&[6]).unwrap();
        assert_eq!(subgroup_lattice(&z6).unwrap().subgroups.len(), 4);
    }

    #[test]
    fn pairing_nondegenerate_small_groups() {
        for shape in [vec![4u32], vec![2, 2], vec![2, 4], vec![6], vec![8], vec![3, 9]] {
            let g = FiniteAbelianGroup::new(&shape).unwrap();
            if g.order() > 200 {
                continue;
            }
            for gamma in 1..g.num_elements() as u32 {
                let hit = (0..g.num_elements() as u32).any(|psi| g.pairing(gamma, psi) != 0);
                assert!(hit, "degenerate pairing for {:?}", g.coords(gamma));
            }
        }
    }

    #[test]
    fn orbits_partition_and_unit_closed() {
        for shape in [vec![12u32], vec![2, 8], vec![5, 5]] {
            let g = FiniteAbelianGroup::new(&shape).unwrap();
            let mut seen = vec![false; g.num_elements()];
            for orbit in g.orbits() {
                for &m in &orbit.members {
                    assert!(!seen[m as usize]);
                    seen[m as usize] = true;
                }
                for &a in &g.unit_residues() {
                    for &m in &orbit.members {
                        assert_eq!(g.orbit_of(g.smul(a, m)), g.orbit_of(m));
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn invariants_stable_under_automorphism() {
        // Z/2 x Z/4 with the automorphism (a, b) -> (a, b + 2a)
        let g = FiniteAbelianGroup::new(&[2, 4]).unwrap();
        let auto = |g_: &FiniteAbelianGroup, idx: u32| -> u32 {
            let c = g_.coords(idx);
            let (a, b) = (c[0], c[1]);
            g_.index_of(&GroupElement {
                coords: vec![a, (b + 2 * a) % 4],
            })
            .unwrap()
        };
        // sanity: it is an automorphism
        for x in 0..8u32 {
            for y in 0..8u32 {
                assert_eq!(auto(&g, g.add(x, y)), g.add(auto(&g, x), auto(&g, y)));
            }
        }
        let mut wm = BTreeMap::new();
        for orbit in g.orbits() {
            if orbit.representative == 0 {
                continue;
            }
            let v = BigRational::from_u64(1 + orbit.representative as u64 % 3).unwrap();
            wm.insert(g.element(orbit.representative), v);
        }
        let w = WeightFunction::from_orbit_map(&g, &wm).unwrap();
        let r = RamSet::full(&g);
        let md = minimal_set(&g, &r, &w).unwrap();

        // transported data
        let r_img = RamSet::new(
            &g,
            &r.elements().iter().map(|&e| auto(&g, e)).collect::<Vec<_>>(),
        )
        .unwrap();
        let mut wm_img = BTreeMap::new();
        for orbit in g.orbits() {
            if orbit.representative == 0 {
                continue;
            }
            // weight of preimage
            let pre = (0..8u32).find(|&x| auto(&g, x) == orbit.representative).unwrap();
            wm_img.insert(g.element(orbit.representative), w.of_element(&g, pre).clone());
        }
        let w_img = WeightFunction::from_orbit_map(&g, &wm_img).unwrap();
        let md_img = minimal_set(&g, &r_img, &w_img).unwrap();
        assert_eq!(md.a_r, md_img.a_r);
        assert_eq!(md.b_r, md_img.b_r);
        let mapped: std::collections::BTreeSet<u32> =
            md.minimal.elements().iter().map(|&e| auto(&g, e)).collect();
        let img: std::collections::BTreeSet<u32> =
            md_img.minimal.elements().iter().copied().collect();
        assert_eq!(mapped, img);
    }

    #[test]
    fn subgroup_and_quotient_structure() {
        let g = z4();
        let sub = subgroup_as_group(&g, &[0, 2]).unwrap();
        assert_eq!(sub.group.invariant_factors(), &[2]);
        assert_eq!(sub.embed, vec![0, 2]);

        let q = quotient_group(&g, &[0, 2]);
        assert_eq!(q.order, 2);
        let qg = q.group.as_ref().unwrap();
        assert_eq!(qg.invariant_factors(), &[2]);
        assert_eq!(q.project[0], q.project[2]);
        assert_eq!(q.project[1], q.project[3]);
        assert_ne!(q.project[0], q.project[1]);

        let g24 = FiniteAbelianGroup::new(&[2, 4]).unwrap();
        let lat = subgroup_lattice(&g24).unwrap();
        for sg in &lat.subgroups {
            let emb = subgroup_as_group(&g24, &sg.members).unwrap();
            if sg.order() > 1 {
                let prod: u64 = emb
                    .group
                    .invariant_factors()
                    .iter()
                    .map(|&f| f as u64)
                    .product();
                assert_eq!(prod, sg.order());
                // embedding is a homomorphism
                let h = &emb.group;
                for x in 0..h.num_elements() as u32 {
                    for y in 0..h.num_elements() as u32 {
                        assert_eq!(
                            emb.embed[h.add(x, y) as usize],
                            g24.add(emb.embed[x as usize], emb.embed[y as usize])
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dual_mod_two_canonicalization() {
        let g = z4();
        // 2*dual = {0, 2}: cosets {0,2} and {1,3}
        assert_eq!(g.dual_mod_two_rep(0), 0);
        assert_eq!(g.dual_mod_two_rep(2), 0);
        assert_eq!(g.dual_mod_two_rep(1), 1);
        assert_eq!(g.dual_mod_two_rep(3), 1);
        assert_eq!(g.dual_mod_two_reps(), vec![0, 1]);
    }
}
