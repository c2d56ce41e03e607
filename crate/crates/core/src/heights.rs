//! Adelic height specifications.
//!
//! Away from a finite override set S_H the local height at a tame prime p is
//! p^{w(ρ)} for the weight function w; at overridden places (always including
//! the wild primes and ∞) the height is a configured positive rational per
//! local class, defaulting to the constant 1.
//!
//! Weights are exact rationals. All comparisons H(φ) ≤ B clear the common
//! denominator d of the weights and compare integer powers H^d ≤ B^d, so
//! boundary ties are exact.

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::group::{FiniteAbelianGroup, WeightFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Place {
    Inf,
    Finite(u64),
}

impl std::fmt::Display for Place {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Place::Inf => write!(f, "inf"),
            Place::Finite(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum HeightError {
    #[error("override value at {0} must be positive")]
    NonPositiveOverride(Place),
    #[error("missing override for class {1} at place {0}")]
    MissingClass(Place, u32),
    #[error("height bound overflows exact budget arithmetic")]
    BudgetOverflow,
    #[error("weight is not big (zero or negative on a nonzero orbit)")]
    NotBig,
}

/// Height override at one place. Class keys: the wild unit-character index
/// at a wild prime, the inertia orbit id at a tame prime, the component of
/// complex conjugation at ∞.
#[derive(Clone, Debug)]
pub enum Override {
    Constant(BigRational),
    ByClass {
        map: BTreeMap<u32, BigRational>,
        default: Option<BigRational>,
    },
}

impl Override {
    pub fn value_for(&self, place: Place, class: u32) -> Result<BigRational, HeightError> {
        match self {
            Override::Constant(c) => Ok(c.clone()),
            Override::ByClass { map, default } => map
                .get(&class)
                .or(default.as_ref())
                .cloned()
                .ok_or(HeightError::MissingClass(place, class)),
        }
    }

    fn validate(&self, place: Place) -> Result<(), HeightError> {
        let check = |v: &BigRational| {
            if v.is_positive() {
                Ok(())
            } else {
                Err(HeightError::NonPositiveOverride(place))
            }
        };
        match self {
            Override::Constant(c) => check(c),
            Override::ByClass { map, default } => {
                for v in map.values() {
                    check(v)?;
                }
                if let Some(d) = default {
                    check(d)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeightSpec {
    pub weight: WeightFunction,
    overrides: BTreeMap<Place, Override>,
}

impl HeightSpec {
    /// Overrides must cover all wild places of the group; places not listed
    /// get the default constant 1 (the wild places are added implicitly).
    pub fn new(
        group: &FiniteAbelianGroup,
        weight: WeightFunction,
        mut overrides: BTreeMap<Place, Override>,
    ) -> Result<Self, HeightError> {
        for (p, _) in crate::primes::factorize(group.order()) {
            overrides
                .entry(Place::Finite(p))
                .or_insert_with(|| Override::Constant(BigRational::one()));
        }
        overrides
            .entry(Place::Inf)
            .or_insert_with(|| Override::Constant(BigRational::one()));
        for (place, ov) in &overrides {
            ov.validate(*place)?;
        }
        Ok(HeightSpec { weight, overrides })
    }

    pub fn overridden_places(&self) -> impl Iterator<Item = Place> + '_ {
        self.overrides.keys().copied()
    }

    pub fn override_at(&self, place: Place) -> Option<&Override> {
        self.overrides.get(&place)
    }

    pub fn is_overridden(&self, place: Place) -> bool {
        self.overrides.contains_key(&place)
    }

    /// Common denominator d of all weight values and override exponents;
    /// integer comparisons use H^d.
    pub fn weight_denominator(&self, group: &FiniteAbelianGroup) -> u32 {
        let mut d: BigInt = BigInt::one();
        for orbit in group.orbits() {
            let w = self.weight.of_orbit(group.orbit_of(orbit.representative));
            d = num::integer::lcm(d, w.denom().clone());
        }
        // denominators are tiny in practice
        let s = d.to_string();
        s.parse::<u32>().expect("weight denominator fits u32")
    }

    /// d·w as integer exponent per element index (for tame local heights).
    pub fn integer_exponents(
        &self,
        group: &FiniteAbelianGroup,
        d: u32,
    ) -> Result<Vec<u32>, HeightError> {
        let mut out = Vec::with_capacity(group.num_elements());
        for idx in 0..group.num_elements() as u32 {
            let w = self.weight.of_orbit(group.orbit_of(idx));
            if idx != 0 && !w.is_positive() {
                return Err(HeightError::NotBig);
            }
            let scaled = w * BigRational::from_integer(BigInt::from(d));
            debug_assert!(scaled.denom().is_one());
            let v = scaled.numer().to_string().parse::<u64>().map_err(|_| HeightError::BudgetOverflow)?;
            out.push(u32::try_from(v).map_err(|_| HeightError::BudgetOverflow)?);
        }
        Ok(out)
    }
}

/// An exact height value v = pow^(1/denom) with pow rational.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactHeight {
    pub pow: BigRational,
    pub denom: u32,
}

impl ExactHeight {
    pub fn one() -> Self {
        ExactHeight {
            pow: BigRational::one(),
            denom: 1,
        }
    }

    pub fn from_rational(r: BigRational) -> Self {
        ExactHeight { pow: r, denom: 1 }
    }

    pub fn mul(&self, other: &ExactHeight) -> ExactHeight {
        let d = num::integer::lcm(self.denom, other.denom);
        let a = pow_rational(&self.pow, (d / self.denom) as u64);
        let b = pow_rational(&other.pow, (d / other.denom) as u64);
        ExactHeight { pow: a * b, denom: d }
    }

    /// Exact comparison with a rational bound: pow^(1/denom) <= b.
    pub fn le_bound(&self, b: &BigRational) -> bool {
        self.pow <= pow_rational(b, self.denom as u64)
    }

    pub fn to_f64(&self) -> f64 {
        crate::util::rational_to_f64(&self.pow).powf(1.0 / self.denom as f64)
    }

    /// Exact rational value if denom-th root is trivial (pow has an exact
    /// representation); only used where weights are integral.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.denom == 1 {
            Some(self.pow.clone())
        } else {
            None
        }
    }
}

pub fn pow_rational(r: &BigRational, e: u64) -> BigRational {
    let mut acc = BigRational::one();
    let mut base = r.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

pub fn bigint_pow(b: u64, e: u32) -> BigInt {
    let mut acc = BigInt::one();
    let base = BigInt::from(b);
    for _ in 0..e {
        acc *= &base;
    }
    acc
}

/// True if r = 1.
pub fn is_one(r: &BigRational) -> bool {
    r.is_one()
}

/// True if r = 0.
pub fn is_zero_rat(r: &BigRational) -> bool {
    r.is_zero()
}
