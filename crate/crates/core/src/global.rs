//! Global homomorphisms Γ_ℚ → G and exact height-bounded enumeration.
//!
//! Through the idele-class identification, a continuous homomorphism
//! Γ_ℚ → G is exactly a finitely supported family of local unit characters:
//! a tame character δ_p at finitely many tame primes and a wild unit
//! character at each prime dividing |G|. Nothing else is stored — the
//! archimedean component is γ_∞ = Σ_p χ_p(−1) and the local uniformizer
//! image at v is φ_v(v) = −Σ_{ℓ≠v} χ_ℓ(v), both derived. The sign is the
//! one that makes the reciprocity product ∏_v ⟨φ_v, x_v⟩ vanish identically,
//! which the randomized reciprocity suite pins down.
//!
//! Enumeration walks primes in increasing order, keeping an exact integer
//! budget: with d the common denominator of the weights, a branch survives
//! iff ∏ p^{d·w(δ_p)} ≤ B^d / (wild and archimedean factors)^d. Split
//! conditions couple all components through the derived Frobenius sums, so
//! they are applied as post-filters at emission, with the running sums
//! carried incrementally. Work is partitioned by (wild combination, first
//! support prime) into fixed chunks so results are bit-identical for any
//! worker count.

use num::rational::BigRational;
use num::{BigInt, One, Zero};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

use crate::group::{subgroup_lattice, FiniteAbelianGroup, RamSet, SubgroupLattice};
use crate::heights::{bigint_pow, pow_rational, ExactHeight, HeightSpec, Place};
use crate::local::{
    local_pairing, LocalCondition, LocalData, LocalError, LocalPoint, TamePlaceData, TwistElement,
};
use crate::primes::{factorize, pow_mod, sieve_primes, tame_dlog_mod_d};
use crate::util::{gcd_u64, iroot, rational_to_u128_floor};

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("weight is not big; enumeration would not terminate")]
    NotBig,
    #[error("height budget exceeds 128-bit exact arithmetic")]
    BudgetOverflow,
    #[error("condition at {0} conflicts with the ramification set (no allowed branch)")]
    EmptyCondition(Place),
    #[error("marked place must be a tame prime outside S")]
    BadMarkedPlace,
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error("subgroup runs need the value subgroup to contain 0")]
    BadSubgroup,
}

/// A global homomorphism as stored data: tame support with nonzero δ, and a
/// wild unit character index for every wild prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalHom {
    pub tame: BTreeMap<u64, u32>,
    pub wild: BTreeMap<u64, u32>,
}

impl GlobalHom {
    pub fn trivial(ld: &LocalData) -> Self {
        GlobalHom {
            tame: BTreeMap::new(),
            wild: ld
                .wild
                .iter()
                .map(|(&p, t)| (p, t.trivial_char_index()))
                .collect(),
        }
    }

    /// χ_ℓ(u) for an integer u coprime to ℓ (u may be negative).
    fn component_at(&self, ld: &LocalData, ell: u64, u: i64) -> u32 {
        let g = &ld.group;
        if let Some(table) = ld.wild.get(&ell) {
            let idx = self.wild.get(&ell).copied().unwrap_or(table.trivial_char_index());
            return table.eval_int(g, idx, u);
        }
        let Some(&delta) = self.tame.get(&ell) else {
            return 0;
        };
        let m = ell as i64;
        let red = (((u % m) + m) % m) as u64;
        let chi = crate::local::TameCharacter {
            place: TamePlaceData::new(ell),
            delta,
        };
        chi.eval(g, red)
    }

    /// γ_∞ = Σ_p χ_p(−1), the image of complex conjugation.
    pub fn gamma_inf(&self, ld: &LocalData) -> u32 {
        let g = &ld.group;
        let mut acc = 0u32;
        for &p in self.tame.keys() {
            acc = g.add(acc, self.component_at(ld, p, -1));
        }
        for &p in self.wild.keys() {
            acc = g.add(acc, self.component_at(ld, p, -1));
        }
        acc
    }

    /// The local uniformizer image φ_v(v) = −Σ_{ℓ≠v} χ_ℓ(v) at a finite
    /// place, or γ_∞ at ∞. "Completely split at v" means the inertia at v is
    /// trivial and this value is 0.
    pub fn frobenius_at(&self, ld: &LocalData, v: Place) -> u32 {
        let g = &ld.group;
        match v {
            Place::Inf => self.gamma_inf(ld),
            Place::Finite(p) => {
                let mut acc = 0u32;
                for &ell in self.tame.keys() {
                    if ell != p {
                        acc = g.add(acc, self.component_at(ld, ell, p as i64));
                    }
                }
                for &ell in self.wild.keys() {
                    if ell != p {
                        acc = g.add(acc, self.component_at(ld, ell, p as i64));
                    }
                }
                g.neg(acc)
            }
        }
    }

    pub fn is_split_at(&self, ld: &LocalData, v: Place) -> bool {
        match v {
            Place::Inf => self.gamma_inf(ld) == 0,
            Place::Finite(p) => {
                let inertia_trivial = if let Some(t) = ld.wild.get(&p) {
                    self.wild.get(&p).copied().unwrap_or(t.trivial_char_index())
                        == t.trivial_char_index()
                } else {
                    !self.tame.contains_key(&p)
                };
                inertia_trivial && self.frobenius_at(ld, v) == 0
            }
        }
    }

    /// The full local point at a place (for pairings).
    pub fn local_point(&self, ld: &LocalData, v: Place) -> LocalPoint {
        match v {
            Place::Inf => LocalPoint::Arch {
                gamma: self.gamma_inf(ld),
            },
            Place::Finite(p) => {
                let frob = self.frobenius_at(ld, v);
                if let Some(t) = ld.wild.get(&p) {
                    LocalPoint::Wild {
                        p,
                        char_idx: self.wild.get(&p).copied().unwrap_or(t.trivial_char_index()),
                        frob,
                    }
                } else {
                    LocalPoint::Tame {
                        place: TamePlaceData::new(p),
                        delta: self.tame.get(&p).copied().unwrap_or(0),
                        frob,
                    }
                }
            }
        }
    }

    /// Exact height: product of local heights.
    pub fn height(&self, ld: &LocalData, heights: &HeightSpec) -> ExactHeight {
        let g = &ld.group;
        let d = heights.weight_denominator(g);
        let mut pow = BigRational::one();
        for (&p, &delta) in &self.tame {
            if let Some(ov) = heights.override_at(Place::Finite(p)) {
                let v = ov
                    .value_for(Place::Finite(p), g.orbit_rep(delta))
                    .expect("tame override class");
                pow *= pow_rational(&v, d as u64);
            } else {
                let w = heights.weight.of_element(g, delta);
                let e = w * BigRational::from_integer(BigInt::from(d));
                let e: u32 = e.numer().to_string().parse().expect("integer exponent");
                pow *= BigRational::from_integer(bigint_pow(p, e));
            }
        }
        for (&p, &ci) in &self.wild {
            let ov = heights.override_at(Place::Finite(p)).expect("wild override");
            let v = ov.value_for(Place::Finite(p), ci).expect("wild class");
            pow *= pow_rational(&v, d as u64);
        }
        if let Some(ov) = heights.override_at(Place::Inf) {
            let v = ov
                .value_for(Place::Inf, self.gamma_inf(ld))
                .expect("arch class");
            pow *= pow_rational(&v, d as u64);
        }
        ExactHeight { pow, denom: d }
    }

    /// ∏_v ⟨φ_v, x_v⟩ over all places, as an element of ℤ/nℤ (0 = trivial).
    /// Must vanish for every global homomorphism.
    pub fn reciprocity(&self, ld: &LocalData, x: &TwistElement) -> u64 {
        let n = ld.group.exponent();
        let mut acc = 0u64;
        let mut places: Vec<Place> = vec![Place::Inf];
        for &q in &ld.s_f {
            places.push(Place::Finite(q));
        }
        for &p in self.tame.keys() {
            if !ld.in_s(p) {
                places.push(Place::Finite(p));
            }
        }
        for v in places {
            let point = self.local_point(ld, v);
            acc = (acc + local_pairing(ld, &point, x)) % n;
        }
        acc
    }

    /// Key for deterministic minimal-witness selection.
    pub fn lex_key(&self) -> Vec<(u64, u32)> {
        let mut k: Vec<(u64, u32)> = self.tame.iter().map(|(&p, &d)| (p, d)).collect();
        for (&p, &c) in &self.wild {
            k.push((p, c));
        }
        k.sort_unstable();
        k
    }
}

// ---------------------------------------------------------------------------
// enumeration

#[derive(Clone, Debug)]
pub struct EnumTask {
    pub conditions: BTreeMap<Place, LocalCondition>,
    pub bound: u64,
    /// checkpoint grid (each ≤ bound); counts N(B_i) are recorded per entry
    pub checkpoints: Vec<u64>,
    /// tame place at which the local class of every emitted hom is recorded
    pub marked: Option<u64>,
    /// restrict all component values to this subgroup (member list)
    pub value_subgroup: Option<Vec<u32>>,
    /// classify homs by generated image subgroup (needs |G| ≤ 64)
    pub track_images: bool,
    pub workers: usize,
}

impl EnumTask {
    pub fn new(bound: u64) -> Self {
        EnumTask {
            conditions: BTreeMap::new(),
            bound,
            checkpoints: vec![bound],
            marked: None,
            value_subgroup: None,
            track_images: false,
            workers: 0,
        }
    }
}

#[derive(Clone)]
pub struct WildCombo {
    chars: Vec<(u64, u32)>,
    /// exact (wild · arch)-part of H^d
    w0_pow: BigRational,
    budget: u128,
    thresholds: Vec<u128>,
    /// initial target sums (wild contributions), targets as in `Plan`
    target0: Vec<u32>,
    image_bits: u64,
}

/// Per-target identifiers: the units whose character values are accumulated
/// along the walk. Target 0 is always −1 (for γ_∞).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    MinusOne,
    Prime(u64),
}

pub struct Plan<'a> {
    ld: &'a LocalData,
    heights: &'a HeightSpec,
    d: u32,
    min_exp: u32,
    primes: Vec<u64>,
    prime_allowed: Vec<u8>,
    prime_dlogs: Vec<u64>,
    allowed_lists: Vec<Vec<(u32, u32)>>,
    targets: Vec<Target>,
    split_finite: Vec<(u64, usize)>,
    split_inf: bool,
    forced: Vec<u64>,
    combos: Vec<WildCombo>,
    marked: Option<u64>,
    task: EnumTask,
    lattice: Option<SubgroupLattice>,
}

/// Sink for enumerated homomorphisms. Emission order is deterministic within
/// a job; merging across jobs happens in fixed chunk order.
pub trait Collector: Send {
    fn emit(&mut self, ctx: &Emit<'_, '_>);
}

pub struct Emit<'p, 'w> {
    pub plan: &'p Plan<'p>,
    pub combo_idx: usize,
    pub combo: &'w WildCombo,
    /// exact tame part of H^d
    pub tame_pow: u128,
    pub target_sums: &'w [u32],
    pub image_bits: u64,
    /// (prime index, δ) pairs of the tame support
    pub support: &'w [(u32, u32)],
}

impl Emit<'_, '_> {
    pub fn to_hom(&self) -> GlobalHom {
        GlobalHom {
            tame: self
                .support
                .iter()
                .map(|&(pi, d)| (self.plan.primes[pi as usize], d))
                .collect(),
            wild: self.combo.chars.iter().copied().collect(),
        }
    }

    /// exact H^d as a rational
    pub fn height_pow(&self) -> BigRational {
        &self.combo.w0_pow * BigRational::from_integer(BigInt::from(self.tame_pow))
    }

    pub fn gamma_inf(&self) -> u32 {
        self.target_sums[0]
    }

    /// δ at the marked place (0 when unramified there)
    pub fn marked_delta(&self) -> u32 {
        let Some(m) = self.plan.marked else { return 0 };
        for &(pi, d) in self.support {
            if self.plan.primes[pi as usize] == m {
                return d;
            }
        }
        0
    }

    /// Frobenius value at target index t (finite prime target).
    pub fn frobenius_for_target(&self, t: usize) -> u32 {
        self.plan.ld.group.neg(self.target_sums[t])
    }
}

impl<'a> Plan<'a> {
    pub fn build(
        ld: &'a LocalData,
        heights: &'a HeightSpec,
        r: &RamSet,
        task: EnumTask,
    ) -> Result<Plan<'a>, EnumError> {
        let g = &ld.group;
        let d = heights.weight_denominator(g);
        let exps = heights.integer_exponents(g, d).map_err(|_| EnumError::NotBig)?;

        // targets: −1 always; every finite split place; the marked place
        let mut targets = vec![Target::MinusOne];
        let mut split_finite = Vec::new();
        let mut split_inf = false;
        for (&place, cond) in &task.conditions {
            match (place, cond) {
                (Place::Inf, LocalCondition::Split) => split_inf = true,
                (Place::Finite(q), LocalCondition::Split) => {
                    targets.push(Target::Prime(q));
                    split_finite.push((q, targets.len() - 1));
                }
                _ => {}
            }
        }
        if let Some(m) = task.marked {
            if ld.in_s(m) || ld.is_wild(m) {
                return Err(EnumError::BadMarkedPlace);
            }
            if !targets.contains(&Target::Prime(m)) {
                targets.push(Target::Prime(m));
            }
        }

        // allowed (δ, d·w) per divisor of the exponent: R-membership plus the
        // optional value-subgroup restriction
        let in_subgroup = |e: u32| -> bool {
            task.value_subgroup
                .as_ref()
                .map_or(true, |m| m.binary_search(&e).is_ok())
        };
        let n = g.exponent();
        let divisors: Vec<u64> = (1..=n).filter(|&dd| n % dd == 0).collect();
        let mut allowed_lists: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut divisor_id: HashMap<u64, u8> = HashMap::new();
        for &dv in &divisors {
            let list: Vec<(u32, u32)> = g
                .torsion_elements(dv)
                .iter()
                .copied()
                .filter(|&e| e != 0 && r.contains(e) && in_subgroup(e))
                .map(|e| (e, exps[e as usize]))
                .collect();
            divisor_id.insert(dv, allowed_lists.len() as u8);
            allowed_lists.push(list);
        }
        // empty allowed lists (e.g. the trivial value subgroup) just mean no
        // tame branching at all
        let min_exp = allowed_lists
            .iter()
            .flatten()
            .map(|&(_, e)| e)
            .min()
            .unwrap_or(u32::MAX);

        // wild combinations with their exact budgets
        let combos = build_combos(ld, heights, &task, &targets, d)?;
        let max_budget = combos.iter().map(|c| c.budget).max().unwrap_or(0);
        let tame_max = iroot(max_budget, min_exp).min(u128::from(u64::MAX)) as u64;

        // primes outside S, ascending, with per-prime allowance and dlogs
        let raw_primes = sieve_primes(tame_max);
        let mut primes = Vec::with_capacity(raw_primes.len());
        for &p in &raw_primes {
            if !ld.in_s(p) && !ld.is_wild(p) {
                primes.push(p);
            }
        }
        // per-prime allowed list after local conditions, and dlog targets
        let cond_at: BTreeMap<u64, &LocalCondition> = task
            .conditions
            .iter()
            .filter_map(|(pl, c)| match pl {
                Place::Finite(q) => Some((*q, c)),
                _ => None,
            })
            .collect();
        // conditioned places get bespoke lists appended after the shared ones
        let mut extra_lists: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut prime_allowed = vec![0u8; primes.len()];
        let shared = allowed_lists.len();
        for (i, &p) in primes.iter().enumerate() {
            let dv = gcd_u64(p - 1, n);
            match cond_at.get(&p) {
                None => prime_allowed[i] = divisor_id[&dv],
                Some(LocalCondition::Split) => {
                    // no ramified branch at p
                    prime_allowed[i] = u8::MAX;
                }
                Some(LocalCondition::Free) => prime_allowed[i] = divisor_id[&dv],
                Some(LocalCondition::OrbitIn(reps)) => {
                    let list: Vec<(u32, u32)> = g
                        .torsion_elements(dv)
                        .iter()
                        .copied()
                        .filter(|&e| e != 0 && reps.contains(&g.orbit_rep(e)) && in_subgroup(e))
                        .map(|e| (e, exps[e as usize]))
                        .collect();
                    extra_lists.push(list);
                    prime_allowed[i] = (shared + extra_lists.len() - 1) as u8;
                }
            }
        }
        allowed_lists.extend(extra_lists);

        // forced places: OrbitIn conditions that exclude the unramified point
        let mut forced: Vec<u64> = Vec::new();
        for (&q, cond) in &cond_at {
            if let LocalCondition::OrbitIn(reps) = cond {
                if !reps.contains(&0) {
                    forced.push(q);
                }
            }
        }
        forced.sort_unstable();

        // dlogs: for each prime, ind_g(target) mod gcd(p−1, n)
        let nt = targets.len();
        let targets_cl = targets.clone();
        let prime_dlogs: Vec<u64> = primes
            .par_iter()
            .flat_map_iter(|&p| {
                let g_root = crate::local::primitive_root_cached(p);
                let dv = gcd_u64(p - 1, n);
                let mut row = Vec::with_capacity(nt);
                for t in &targets_cl {
                    let val = match t {
                        Target::MinusOne => tame_dlog_mod_d(p, g_root, p - 1, dv),
                        Target::Prime(q) => {
                            if *q % p == 0 {
                                0 // χ_p never contributes to its own Frobenius sum
                            } else {
                                tame_dlog_mod_d(p, g_root, q % p, dv)
                            }
                        }
                    };
                    row.push(val);
                }
                row
            })
            .collect();

        let lattice = if task.track_images {
            if g.num_elements() > 64 {
                return Err(EnumError::BudgetOverflow);
            }
            Some(subgroup_lattice(g).expect("lattice for image tracking"))
        } else {
            None
        };

        Ok(Plan {
            ld,
            heights,
            d,
            min_exp,
            primes,
            prime_allowed,
            prime_dlogs,
            allowed_lists,
            targets,
            split_finite,
            split_inf,
            forced,
            combos,
            marked: task.marked,
            task,
            lattice,
        })
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.ld.group
    }

    pub fn local_data(&self) -> &LocalData {
        self.ld
    }

    pub fn lattice(&self) -> Option<&SubgroupLattice> {
        self.lattice.as_ref()
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.task.checkpoints
    }

    /// Run the walk, producing one collector per fixed-size job chunk; the
    /// caller merges in order. Results are scheduling-independent.
    pub fn run<C: Collector, F: Fn() -> C + Sync>(&self, factory: F) -> Vec<C> {
        #[derive(Clone, Copy)]
        enum Job {
            Root(usize),
            Branch(usize, u32),
        }
        let mut jobs: Vec<Job> = Vec::new();
        for ci in 0..self.combos.len() {
            jobs.push(Job::Root(ci));
            let budget = self.combos[ci].budget;
            for (pi, &p) in self.primes.iter().enumerate() {
                if self.prime_allowed[pi] == u8::MAX {
                    continue;
                }
                match crate::util::checked_pow_u128(p as u128, self.min_exp) {
                    Some(v) if v <= budget => jobs.push(Job::Branch(ci, pi as u32)),
                    _ => break,
                }
            }
        }
        const CHUNK: usize = 256;
        let run_chunk = |chunk: &[Job]| -> C {
            let mut collector = factory();
            let mut walker = Walker::new(self);
            for job in chunk {
                match *job {
                    Job::Root(ci) => walker.emit_root(ci, &mut collector),
                    Job::Branch(ci, pi) => walker.branch_from(ci, pi as usize, &mut collector),
                }
            }
            collector
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.task.workers)
            .build()
            .expect("worker pool");
        pool.install(|| {
            jobs.par_chunks(CHUNK)
                .map(run_chunk)
                .collect::<Vec<C>>()
        })
    }
}

fn build_combos(
    ld: &LocalData,
    heights: &HeightSpec,
    task: &EnumTask,
    targets: &[Target],
    d: u32,
) -> Result<Vec<WildCombo>, EnumError> {
    let g = &ld.group;
    // archimedean height must be constant for exact budgeting
    let h_inf = heights
        .override_at(Place::Inf)
        .expect("inf override")
        .value_for(Place::Inf, 0)
        .expect("constant arch height");
    let bound_pow = pow_rational(
        &BigRational::from_integer(BigInt::from(task.bound)),
        d as u64,
    );
    let wild_places: Vec<u64> = ld.wild.keys().copied().collect();
    let in_subgroup = |e: u32| -> bool {
        task.value_subgroup
            .as_ref()
            .map_or(true, |m| m.binary_search(&e).is_ok())
    };

    let mut combos: Vec<WildCombo> = Vec::new();
    let mut stack: Vec<Vec<(u64, u32)>> = vec![vec![]];
    for &p in &wild_places {
        let table = &ld.wild[&p];
        let cond = task.conditions.get(&Place::Finite(p));
        let mut next = Vec::new();
        for prefix in stack {
            for ci in 0..table.chars.len() as u32 {
                if matches!(cond, Some(LocalCondition::Split)) && ci != table.trivial_char_index()
                {
                    continue;
                }
                if !table.chars[ci as usize].images.iter().all(|&im| in_subgroup(im)) {
                    continue;
                }
                let mut v = prefix.clone();
                v.push((p, ci));
                next.push(v);
            }
        }
        stack = next;
    }

    for chars in stack {
        let mut w0 = pow_rational(&h_inf, d as u64);
        for &(p, ci) in &chars {
            let hv = heights
                .override_at(Place::Finite(p))
                .expect("wild override")
                .value_for(Place::Finite(p), ci)
                .expect("wild class");
            w0 *= pow_rational(&hv, d as u64);
        }
        let budget_rat = &bound_pow / &w0;
        if budget_rat < BigRational::one() {
            continue;
        }
        let budget = rational_to_u128_floor(&budget_rat).ok_or(EnumError::BudgetOverflow)?;
        let mut thresholds = Vec::with_capacity(task.checkpoints.len());
        for &b in &task.checkpoints {
            let bp = pow_rational(&BigRational::from_integer(BigInt::from(b)), d as u64);
            let t = &bp / &w0;
            thresholds.push(if t < BigRational::zero() {
                0
            } else {
                rational_to_u128_floor(&t).ok_or(EnumError::BudgetOverflow)?
            });
        }
        // wild contributions to each target sum
        let mut target0 = Vec::with_capacity(targets.len());
        for t in targets {
            let mut acc = 0u32;
            for &(p, ci) in &chars {
                let table = &ld.wild[&p];
                let val = match t {
                    Target::MinusOne => table.eval_int(g, ci, -1),
                    Target::Prime(q) => {
                        if *q == p {
                            0
                        } else {
                            table.eval(g, ci, *q)
                        }
                    }
                };
                acc = g.add(acc, val);
            }
            target0.push(acc);
        }
        let mut image_bits = 0u64;
        if task.track_images && g.num_elements() <= 64 {
            for &(p, ci) in &chars {
                for &im in &ld.wild[&p].chars[ci as usize].images {
                    image_bits |= 1u64 << im;
                }
            }
        }
        combos.push(WildCombo {
            chars,
            w0_pow: w0,
            budget,
            thresholds,
            target0,
            image_bits,
        });
    }
    Ok(combos)
}

struct Walker<'p, 'a> {
    plan: &'p Plan<'a>,
    support: Vec<(u32, u32)>,
    target_sums: Vec<u32>,
}

impl<'p, 'a> Walker<'p, 'a> {
    fn new(plan: &'p Plan<'a>) -> Self {
        Walker {
            plan,
            support: Vec::with_capacity(32),
            target_sums: vec![0; plan.targets.len()],
        }
    }

    fn emit_if_valid<C: Collector>(
        &self,
        combo_idx: usize,
        tame_pow: u128,
        image_bits: u64,
        forced_done: usize,
        collector: &mut C,
    ) {
        let plan = self.plan;
        if forced_done != plan.forced.len() {
            return;
        }
        if plan.split_inf && self.target_sums[0] != 0 {
            return;
        }
        for &(_, tidx) in &plan.split_finite {
            if self.target_sums[tidx] != 0 {
                return;
            }
        }
        let emit = Emit {
            plan,
            combo_idx,
            combo: &plan.combos[combo_idx],
            tame_pow,
            target_sums: &self.target_sums,
            image_bits,
            support: &self.support,
        };
        collector.emit(&emit);
    }

    fn emit_root<C: Collector>(&mut self, combo_idx: usize, collector: &mut C) {
        let combo = &self.plan.combos[combo_idx];
        self.target_sums.copy_from_slice(&combo.target0);
        self.support.clear();
        self.emit_if_valid(combo_idx, 1, combo.image_bits, 0, collector);
    }

    fn branch_from<C: Collector>(&mut self, combo_idx: usize, pi: usize, collector: &mut C) {
        let combo = &self.plan.combos[combo_idx];
        self.target_sums.copy_from_slice(&combo.target0);
        self.support.clear();
        let budget = combo.budget;
        self.descend(combo_idx, pi, budget, 1, combo.image_bits, 0, true, collector);
    }

    /// Branch into prime index `pi` (all allowed δ) and recurse over larger
    /// primes. `only_this_prime` is set at the top level where each first
    /// prime is a separate job.
    #[allow(clippy::too_many_arguments)]
    fn descend<C: Collector>(
        &mut self,
        combo_idx: usize,
        pi: usize,
        budget: u128,
        tame_pow: u128,
        image_bits: u64,
        forced_done: usize,
        only_this_prime: bool,
        collector: &mut C,
    ) {
        let plan = self.plan;
        let g = &plan.ld.group;
        let nt = plan.targets.len();
        let p = plan.primes[pi];
        let list_id = plan.prime_allowed[pi];
        if list_id == u8::MAX {
            return;
        }
        let list = &plan.allowed_lists[list_id as usize];
        if list.is_empty() {
            return;
        }
        // forced-place pruning: branches that skipped a forced prime are dead
        let forced_here = forced_done < plan.forced.len() && plan.forced[forced_done] == p;
        if forced_done < plan.forced.len() && plan.forced[forced_done] < p {
            return;
        }
        let dlogs = &plan.prime_dlogs[pi * nt..(pi + 1) * nt];
        for &(delta, exp) in list {
            let Some(ppow) = crate::util::checked_pow_u128(p as u128, exp) else {
                continue;
            };
            if ppow > budget {
                continue;
            }
            let new_budget = budget / ppow;
            let new_pow = tame_pow * ppow;
            let new_forced = forced_done + usize::from(forced_here);
            let new_bits = if plan.task.track_images {
                image_bits | (1u64 << delta)
            } else {
                0
            };
            self.support.push((pi as u32, delta));
            for t in 0..nt {
                self.target_sums[t] = g.add(self.target_sums[t], g.smul(dlogs[t], delta));
            }

            self.emit_if_valid(combo_idx, new_pow, new_bits, new_forced, collector);
            // extend with strictly larger primes
            for qi in (pi + 1)..plan.primes.len() {
                let q = plan.primes[qi];
                match crate::util::checked_pow_u128(q as u128, plan.min_exp) {
                    Some(v) if v <= new_budget => {}
                    _ => break,
                }
                self.descend(
                    combo_idx,
                    qi,
                    new_budget,
                    new_pow,
                    new_bits,
                    new_forced,
                    false,
                    collector,
                );
            }

            for t in 0..nt {
                self.target_sums[t] = g.sub(self.target_sums[t], g.smul(dlogs[t], delta));
            }
            self.support.pop();
        }
        let _ = only_this_prime;
    }
}

// ---------------------------------------------------------------------------
// collectors

/// Counts per checkpoint, with optional per-image-subgroup and per-marked-
/// class tallies.
pub struct CountCollector {
    pub counts: Vec<u64>,
    /// image subgroup index (in the plan's lattice) -> per-checkpoint counts
    pub by_image: HashMap<usize, Vec<u64>>,
    /// (marked orbit rep, frobenius value) -> count at the full bound
    pub by_marked_class: HashMap<(u32, u32), u64>,
    span_cache: HashMap<u64, usize>,
}

impl CountCollector {
    pub fn new(num_checkpoints: usize) -> Self {
        CountCollector {
            counts: vec![0; num_checkpoints],
            by_image: HashMap::new(),
            by_marked_class: HashMap::new(),
            span_cache: HashMap::new(),
        }
    }

    pub fn merge(&mut self, other: CountCollector) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (k, v) in other.by_image {
            let e = self.by_image.entry(k).or_insert_with(|| vec![0; self.counts.len()]);
            for (a, b) in e.iter_mut().zip(v) {
                *a += b;
            }
        }
        for (k, v) in other.by_marked_class {
            *self.by_marked_class.entry(k).or_insert(0) += v;
        }
    }
}

impl Collector for CountCollector {
    fn emit(&mut self, ctx: &Emit<'_, '_>) {
        let combo = ctx.combo;
        let mut any = false;
        for (i, &t) in combo.thresholds.iter().enumerate() {
            if ctx.tame_pow <= t {
                self.counts[i] += 1;
                any = true;
            }
        }
        if !any {
            return;
        }
        if let Some(lat) = ctx.plan.lattice() {
            let g = ctx.plan.group();
            let span = *self.span_cache.entry(ctx.image_bits).or_insert_with(|| {
                let members = span_of_bits(g, ctx.image_bits);
                lat.subgroups
                    .iter()
                    .position(|s| {
                        s.members.len() == members.len()
                            && s.members.iter().zip(&members).all(|(a, b)| a == b)
                    })
                    .expect("span present in lattice")
            });
            let e = self
                .by_image
                .entry(span)
                .or_insert_with(|| vec![0; combo.thresholds.len()]);
            for (i, &t) in combo.thresholds.iter().enumerate() {
                if ctx.tame_pow <= t {
                    e[i] += 1;
                }
            }
        }
        if ctx.plan.marked.is_some() && ctx.tame_pow <= *combo.thresholds.last().unwrap() {
            let g = ctx.plan.group();
            let delta = ctx.marked_delta();
            let orbit_rep = g.orbit_rep(delta);
            let tidx = ctx
                .plan
                .targets
                .iter()
                .position(|t| matches!(t, Target::Prime(q) if Some(*q) == ctx.plan.marked))
                .expect("marked target");
            let frob = ctx.frobenius_for_target(tidx);
            *self.by_marked_class.entry((orbit_rep, frob)).or_insert(0) += 1;
        }
    }
}

fn span_of_bits(g: &FiniteAbelianGroup, bits: u64) -> Vec<u32> {
    let mut members = vec![0u32];
    let mut seen = 1u64;
    let mut frontier = vec![0u32];
    let gens: Vec<u32> = (0..g.num_elements() as u32)
        .filter(|&e| bits >> e & 1 == 1)
        .collect();
    while let Some(x) = frontier.pop() {
        for &gen in &gens {
            let y = g.add(x, gen);
            if seen >> y & 1 == 0 {
                seen |= 1 << y;
                members.push(y);
                frontier.push(y);
            }
        }
    }
    members.sort_unstable();
    members
}

/// Collect full homs (small bounds only).
pub struct VecCollector {
    pub homs: Vec<(BigRational, GlobalHom)>,
}

impl Collector for VecCollector {
    fn emit(&mut self, ctx: &Emit<'_, '_>) {
        self.homs.push((ctx.height_pow(), ctx.to_hom()));
    }
}

/// Minimal witness by (height, lex key) among homs passing a caller filter.
pub struct WitnessCollector<F: Fn(&Emit<'_, '_>) -> bool + Send> {
    pub filter: F,
    pub best: Option<(BigRational, Vec<(u64, u32)>, GlobalHom)>,
    pub seen: u64,
}

impl<F: Fn(&Emit<'_, '_>) -> bool + Send> Collector for WitnessCollector<F> {
    fn emit(&mut self, ctx: &Emit<'_, '_>) {
        if ctx.tame_pow > *ctx.combo.thresholds.last().unwrap() {
            return;
        }
        if !(self.filter)(ctx) {
            return;
        }
        self.seen += 1;
        let h = ctx.height_pow();
        let hom = ctx.to_hom();
        let key = hom.lex_key();
        let better = match &self.best {
            None => true,
            Some((bh, bk, _)) => (&h, &key) < (bh, bk),
        };
        if better {
            self.best = Some((h, key, hom));
        }
    }
}

/// Σ f_R(φ)/H(φ)^s partial sum over the enumerated range (float).
pub struct ZetaCollector {
    pub s: f64,
    /// d (weight denominator), so H = tame_pow^(1/d) · w0
    pub sum: f64,
}

impl Collector for ZetaCollector {
    fn emit(&mut self, ctx: &Emit<'_, '_>) {
        if ctx.tame_pow > *ctx.combo.thresholds.last().unwrap() {
            return;
        }
        let d = ctx.plan.d as f64;
        let w0 = crate::util::rational_to_f64(&ctx.combo.w0_pow);
        let h = (ctx.tame_pow as f64 * w0).powf(1.0 / d);
        self.sum += h.powf(-self.s);
    }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, serde::Serialize)]
pub struct CountReport {
    pub checkpoints: Vec<CountPoint>,
    pub settings_hash: String,
    pub wall_ms: u128,
    pub workers: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CountPoint {
    pub bound: u64,
    pub total: u64,
    pub surjective: u64,
}

/// Enumerate and count, classifying by image subgroup so the surjective
/// count comes out of the same pass.
pub fn count_n(
    ld: &LocalData,
    heights: &HeightSpec,
    r: &RamSet,
    mut task: EnumTask,
    settings_hash: String,
) -> Result<CountReport, EnumError> {
    let start = std::time::Instant::now();
    task.track_images = ld.group.num_elements() <= 64;
    let workers = task.workers;
    let track = task.track_images;
    let plan = Plan::build(ld, heights, r, task)?;
    let ncp = plan.checkpoints().len();
    let parts = plan.run(|| CountCollector::new(ncp));
    let mut acc = CountCollector::new(ncp);
    for part in parts {
        acc.merge(part);
    }
    let top = plan.lattice().map(|l| l.subgroups.len() - 1);
    let mut checkpoints = Vec::new();
    for (i, &b) in plan.checkpoints().iter().enumerate() {
        let surjective = match (track, top) {
            (true, Some(t)) => acc.by_image.get(&t).map_or(0, |v| v[i]),
            _ => 0,
        };
        checkpoints.push(CountPoint {
            bound: b,
            total: acc.counts[i],
            surjective,
        });
    }
    Ok(CountReport {
        checkpoints,
        settings_hash,
        wall_ms: start.elapsed().as_millis(),
        workers,
    })
}

/// Möbius inversion over the subgroup lattice: given, for every subgroup H,
/// the counts of homs with values in H (same checkpoint grid), returns the
/// surjective counts.
pub fn surjective_count(
    lattice: &SubgroupLattice,
    totals_by_subgroup: &[Vec<u64>],
) -> Vec<u64> {
    let top = lattice.subgroups.len() - 1;
    let ncp = totals_by_subgroup[top].len();
    let mut out = vec![0i64; ncp];
    for (h, counts) in totals_by_subgroup.iter().enumerate() {
        let mu = lattice.mobius_to_top[h];
        if mu == 0 {
            continue;
        }
        for (i, &c) in counts.iter().enumerate() {
            out[i] += mu * c as i64;
        }
    }
    out.into_iter().map(|v| u64::try_from(v).expect("non-negative")).collect()
}

/// Enumerate all homs with H ≤ bound into a vector (small bounds).
pub fn enumerate_collect(
    ld: &LocalData,
    heights: &HeightSpec,
    r: &RamSet,
    task: EnumTask,
) -> Result<Vec<(BigRational, GlobalHom)>, EnumError> {
    let plan = Plan::build(ld, heights, r, task)?;
    let parts = plan.run(|| VecCollector { homs: Vec::new() });
    let mut homs: Vec<(BigRational, GlobalHom)> = parts.into_iter().flat_map(|c| c.homs).collect();
    homs.sort_by(|a, b| (&a.0, a.1.lex_key()).cmp(&(&b.0, b.1.lex_key())));
    Ok(homs)
}

/// Partial height zeta sum Σ_{H ≤ cutoff} f_R(φ) H(φ)^{−s}; the certified
/// tail bound is supplied by the analytic layer (Rankin trick against the
/// absolutely convergent product at s − θ).
pub fn height_zeta_partial(
    ld: &LocalData,
    heights: &HeightSpec,
    r: &RamSet,
    task: EnumTask,
    s: f64,
) -> Result<f64, EnumError> {
    let plan = Plan::build(ld, heights, r, task)?;
    let parts = plan.run(|| ZetaCollector { s, sum: 0.0 });
    Ok(parts.into_iter().map(|c| c.sum).sum())
}

/// Frequencies of (inertia orbit rep, Frobenius value) classes at a marked
/// tame place among the counted homs.
pub fn empirical_local_distribution(
    ld: &LocalData,
    heights: &HeightSpec,
    r: &RamSet,
    mut task: EnumTask,
    place: u64,
) -> Result<BTreeMap<(u32, u32), f64>, EnumError> {
    task.marked = Some(place);
    task.track_images = false;
    let plan = Plan::build(ld, heights, r, task)?;
    let ncp = plan.checkpoints().len();
    let parts = plan.run(|| CountCollector::new(ncp));
    let mut acc = CountCollector::new(ncp);
    for p in parts {
        acc.merge(p);
    }
    let total: u64 = acc.by_marked_class.values().sum();
    Ok(acc
        .by_marked_class
        .into_iter()
        .map(|(k, v)| (k, v as f64 / total.max(1) as f64))
        .collect())
}

// ---------------------------------------------------------------------------

/// Brute-force oracle: enumerate all characters (ℤ/mℤ)^× → G for every
/// modulus m ≤ limit, keep those of conductor exactly m, and filter by
/// height and conditions. Completely independent of the walker: group
/// structure comes from `dirichlet::UnitGroup` and heights are recomputed
/// from scratch. Only usable at small bounds.
pub fn oracle_count(
    ld: &LocalData,
    heights: &HeightSpec,
    r: &RamSet,
    conditions: &BTreeMap<Place, LocalCondition>,
    bound: u64,
) -> u64 {
    let g = &ld.group;
    let d = heights.weight_denominator(g);
    let bound_pow = pow_rational(
        &BigRational::from_integer(BigInt::from(bound)),
        d as u64,
    );
    // the conductor of any hom of height ≤ bound divides
    // Π wild moduli · Π tame support; enumerate moduli of the right shape
    let wild_modulus: u64 = ld.wild.values().map(|t| t.modulus).product();
    let a_min = heights.integer_exponents(g, d).expect("exponents");
    let min_exp = (1..g.num_elements() as u32)
        .filter(|&e| r.contains(e))
        .map(|e| a_min[e as usize])
        .min()
        .unwrap_or(d);
    let tame_limit = iroot(
        rational_to_u128_floor(&bound_pow).unwrap_or(0),
        min_exp,
    ) as u64;

    let mut count = 0u64;
    // moduli: w · m with w | wild_modulus and m squarefree prime-to-S
    let mut wild_divs: Vec<u64> = divisors_of(wild_modulus);
    wild_divs.sort_unstable();
    let mut tame_parts: Vec<u64> = vec![1];
    let primes = sieve_primes(tame_limit.max(1));
    let tame_primes: Vec<u64> = primes
        .into_iter()
        .filter(|&p| !ld.in_s(p) && !ld.is_wild(p))
        .collect();
    // tame conductor parts are squarefree with Π p ≤ B^{1/min weight}
    let cap = tame_limit.max(1);
    let mut stack: Vec<(usize, u64)> = vec![(0, 1)];
    while let Some((i, m)) = stack.pop() {
        for j in i..tame_primes.len() {
            let p = tame_primes[j];
            let Some(nm) = m.checked_mul(p) else { continue };
            if nm > cap {
                break;
            }
            tame_parts.push(nm);
            stack.push((j + 1, nm));
        }
    }
    tame_parts.sort_unstable();
    tame_parts.dedup();

    for &w in &wild_divs {
        for &t in &tame_parts {
            let m = w * t;
            count += oracle_count_modulus(ld, heights, r, conditions, &bound_pow, d, m);
        }
    }
    count
}

fn divisors_of(n: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for (p, e) in factorize(n) {
        let snapshot = out.clone();
        let mut pe = 1u64;
        for _ in 0..e {
            pe *= p;
            for &s in &snapshot {
                out.push(s * pe);
            }
        }
    }
    out
}

fn oracle_count_modulus(
    ld: &LocalData,
    heights: &HeightSpec,
    r: &RamSet,
    conditions: &BTreeMap<Place, LocalCondition>,
    bound_pow: &BigRational,
    d: u32,
    m: u64,
) -> u64 {
    let g = &ld.group;
    let ug = crate::dirichlet::UnitGroup::new(m);
    // homs (Z/m)^x -> G: images of the generators with admissible orders
    let mut assignments: Vec<Vec<u32>> = vec![vec![]];
    for &ord in &ug.gen_orders {
        let mut next = Vec::new();
        for prefix in assignments {
            for &img in g.torsion_elements(ord) {
                let mut v = prefix.clone();
                v.push(img);
                next.push(v);
            }
        }
        assignments = next;
    }
    let eval = |images: &[u32], a: u64| -> u32 {
        // χ(a) = Σ e_i · images_i where a = Π g_i^{e_i}
        if m == 1 {
            return 0;
        }
        let mut acc = 0u32;
        let exps = match a % m {
            0 => return u32::MAX,
            red => match exps_of(&ug, red) {
                Some(e) => e,
                None => return u32::MAX,
            },
        };
        for (e, &img) in exps.iter().zip(images.iter()) {
            acc = g.add(acc, g.smul(*e as u64, img));
        }
        acc
    };

    let mut count = 0u64;
    'hom: for images in &assignments {
        // conductor must be exactly m: χ nontrivial on units ≡ 1 mod m/q
        for (p, _) in factorize(m) {
            let f = m / p;
            let mut trivial_on_kernel = true;
            for a in ug.units() {
                if a % f.max(1) == 1 % f.max(1) && eval(images, a) != 0 {
                    trivial_on_kernel = false;
                    break;
                }
            }
            if trivial_on_kernel {
                continue 'hom;
            }
        }
        // local data per prime dividing m
        let mut height_pow = BigRational::one();
        let mut ok = true;
        for (p, e) in factorize(m) {
            if ld.is_wild(p) {
                continue; // wild heights handled below via class override
            }
            if ld.in_s(p) {
                // extra-S tame prime: no R-condition; override height
                let delta = tame_delta_of(&ug, images, g, p, e);
                let ov = heights.override_at(Place::Finite(p)).expect("override");
                let v = ov
                    .value_for(Place::Finite(p), g.orbit_rep(delta))
                    .expect("class");
                height_pow *= pow_rational(&v, d as u64);
                continue;
            }
            let delta = tame_delta_of(&ug, images, g, p, e);
            if delta == 0 || e > 1 {
                // tame ramified char of modulus p^e needs e = 1 and δ ≠ 0
                ok = false;
                break;
            }
            // R-condition / per-place conditions
            let allowed = match conditions.get(&Place::Finite(p)) {
                Some(LocalCondition::Split) => false,
                Some(LocalCondition::OrbitIn(reps)) => reps.contains(&g.orbit_rep(delta)),
                _ => r.contains(delta),
            };
            if !allowed {
                ok = false;
                break;
            }
            let w = heights.weight.of_element(g, delta);
            let ewd = w * BigRational::from_integer(BigInt::from(d));
            let exp: u32 = ewd.numer().to_string().parse().expect("integral");
            height_pow *= BigRational::from_integer(bigint_pow(p, exp));
        }
        if !ok {
            continue;
        }
        // wild heights: identify the wild unit character by evaluation
        for (&p, table) in &ld.wild {
            let mut chosen = None;
            'chars: for ci in 0..table.chars.len() as u32 {
                for u in (1..table.modulus).filter(|&u| gcd_u64(u, p) == 1) {
                    // compare χ restricted to the p-part against table char:
                    // lift u to a unit mod m that is ≡ u mod p^vp(m) and
                    // ≡ 1 mod m/p^vp(m)
                    let vp = {
                        let mut v = 0u32;
                        let mut mm = m;
                        while mm % p == 0 {
                            v += 1;
                            mm /= p;
                        }
                        v
                    };
                    let pe = p.pow(vp);
                    if pe == 1 {
                        // p does not divide m: component is trivial
                        break;
                    }
                    let rest = m / pe;
                    let lifted = crt2(u % pe, pe, 1, rest);
                    let val = eval(images, lifted);
                    if val != table.eval(g, ci, u % pe) {
                        continue 'chars;
                    }
                }
                chosen = Some(ci);
                break;
            }
            let ci = chosen.expect("wild component identified");
            let ov = heights.override_at(Place::Finite(p)).expect("override");
            let v = ov.value_for(Place::Finite(p), ci).expect("class");
            height_pow *= pow_rational(&v, d as u64);
        }
        let h_inf = heights
            .override_at(Place::Inf)
            .expect("inf")
            .value_for(Place::Inf, 0)
            .expect("const");
        height_pow *= pow_rational(&h_inf, d as u64);
        if &height_pow > bound_pow {
            continue;
        }
        // split conditions: χ evaluated at the place itself
        for (place, cond) in conditions {
            if !matches!(cond, LocalCondition::Split) {
                continue;
            }
            match place {
                Place::Inf => {
                    let v = eval(images, m - 1); // χ(−1)
                    if v != 0 {
                        ok = false;
                    }
                }
                Place::Finite(q) => {
                    if m % q == 0 {
                        ok = false; // ramified at q
                    } else if eval(images, q % m) != 0 {
                        ok = false;
                    }
                }
            }
            if !ok {
                break;
            }
        }
        if ok {
            count += 1;
        }
    }
    count
}

fn exps_of(ug: &crate::dirichlet::UnitGroup, a: u64) -> Option<Vec<u32>> {
    // recover the exponent vector by brute force over the dlog of the group
    // (the UnitGroup keeps it internal; recompute small)
    let mut stack: Vec<(usize, u64, Vec<u32>)> = vec![(0, 1 % ug.m.max(1), vec![])];
    while let Some((i, acc, exps)) = stack.pop() {
        if i == ug.gens.len() {
            if acc == a % ug.m {
                return Some(exps);
            }
            continue;
        }
        let mut cur = acc;
        for e in 0..ug.gen_orders[i] {
            let mut ex = exps.clone();
            ex.push(e as u32);
            stack.push((i + 1, cur, ex));
            cur = cur * ug.gens[i] % ug.m;
        }
    }
    None
}

fn crt2(a: u64, m: u64, b: u64, n: u64) -> u64 {
    if n <= 1 {
        return a % m.max(1);
    }
    let mut x = a % m;
    while x % n != b % n {
        x += m;
    }
    x
}

fn tame_delta_of(
    ug: &crate::dirichlet::UnitGroup,
    images: &[u32],
    g: &FiniteAbelianGroup,
    p: u64,
    e: u32,
) -> u32 {
    // δ = χ(u_p) where u_p ≡ g_p mod p^e and ≡ 1 elsewhere
    let pe = p.pow(e);
    let rest = ug.m / pe;
    let gp = crate::primes::primitive_root_mod_prime_power(p, e);
    let lifted = crt2(gp, pe, 1, rest);
    let exps = exps_of(ug, lifted).expect("unit");
    let mut acc = 0u32;
    for (ex, &img) in exps.iter().zip(images.iter()) {
        acc = g.add(acc, g.smul(*ex as u64, img));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupElement, WeightFunction};
    use crate::heights::Override;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn z4_setup() -> (LocalData, HeightSpec) {
        let g = FiniteAbelianGroup::new(&[4]).unwrap();
        let ld = LocalData::new(g, &[]);
        let mut wm = BTreeMap::new();
        wm.insert(GroupElement { coords: vec![1] }, rat(1, 1));
        wm.insert(GroupElement { coords: vec![2] }, rat(2, 1));
        let w = WeightFunction::from_orbit_map(&ld.group, &wm).unwrap();
        let hs = HeightSpec::new(&ld.group, w, BTreeMap::new()).unwrap();
        (ld, hs)
    }

    fn z2_setup() -> (LocalData, HeightSpec) {
        let g = FiniteAbelianGroup::new(&[2]).unwrap();
        let ld = LocalData::new(g, &[]);
        let w = WeightFunction::constant(&ld.group, rat(1, 1));
        let hs = HeightSpec::new(&ld.group, w, BTreeMap::new()).unwrap();
        (ld, hs)
    }

    #[test]
    fn height_examples() {
        let (ld, hs) = z4_setup();
        let mut phi = GlobalHom::trivial(&ld);
        phi.tame.insert(5, 1);
        assert_eq!(phi.height(&ld, &hs).pow, rat(5, 1));
        let triv = GlobalHom::trivial(&ld);
        assert_eq!(triv.height(&ld, &hs).pow, rat(1, 1));
        let mut phi2 = GlobalHom::trivial(&ld);
        phi2.tame.insert(5, 1);
        phi2.tame.insert(7, 2);
        assert_eq!(phi2.height(&ld, &hs).pow, rat(245, 1));
    }

    #[test]
    fn frobenius_examples() {
        let (ld, _) = z4_setup();
        // quartic character at 5 (g = 2, δ = 1): 2 is inert in Q(ζ_5),
        // Frobenius at 2 has order 4
        let mut phi = GlobalHom::trivial(&ld);
        phi.tame.insert(5, 1);
        let f2 = phi.frobenius_at(&ld, Place::Finite(2));
        assert_eq!(ld.group.element_order(f2), 4);
        // quadratic character mod 5 in Z/2: Q(√5) is real
        let (ld2, _) = z2_setup();
        let mut psi = GlobalHom::trivial(&ld2);
        psi.tame.insert(5, 1);
        assert_eq!(psi.gamma_inf(&ld2), 0);
        // trivial hom: split everywhere
        let triv = GlobalHom::trivial(&ld);
        assert_eq!(triv.frobenius_at(&ld, Place::Finite(17)), 0);
        assert!(triv.is_split_at(&ld, Place::Inf));
    }

    #[test]
    fn z2_enumeration_b10() {
        // conductor height, B = 10: 4 wild choices × odd parts {1, 3, 5, 7}
        let (ld, hs) = z2_setup();
        let r = RamSet::full(&ld.group);
        let homs = enumerate_collect(&ld, &hs, &r, EnumTask::new(10)).unwrap();
        assert_eq!(homs.len(), 16);
        // exact hand enumeration: supports ∅, {3}, {5}, {7}
        let supports: Vec<Vec<u64>> = homs
            .iter()
            .map(|(_, h)| h.tame.keys().copied().collect())
            .collect();
        for s in [vec![], vec![3], vec![5], vec![7]] {
            assert_eq!(supports.iter().filter(|x| **x == s).count(), 4, "{s:?}");
        }
    }

    #[test]
    fn b1_only_s_supported() {
        let (ld, hs) = z4_setup();
        let r = RamSet::full(&ld.group);
        let homs = enumerate_collect(&ld, &hs, &r, EnumTask::new(1)).unwrap();
        assert_eq!(homs.len(), 8); // the 8 wild unit characters at 2
        assert!(homs.iter().all(|(_, h)| h.tame.is_empty()));
    }

    #[test]
    fn count_matches_oracle_small() {
        let (ld, hs) = z4_setup();
        let r = RamSet::full(&ld.group);
        for bound in [30u64, 100, 400] {
            let task = EnumTask::new(bound);
            let conditions = BTreeMap::new();
            let report = count_n(&ld, &hs, &r, task, "t".into()).unwrap();
            let oracle = oracle_count(&ld, &hs, &r, &conditions, bound);
            assert_eq!(report.checkpoints[0].total, oracle, "B = {bound}");
        }
    }

    #[test]
    fn part2_oracle_at_25() {
        // split at 2 and ∞, R = {1,3}, B = 25
        let (ld, hs) = z4_setup();
        let r = RamSet::new(&ld.group, &[1, 3]).unwrap();
        let mut task = EnumTask::new(25);
        task.conditions.insert(Place::Finite(2), LocalCondition::Split);
        task.conditions.insert(Place::Inf, LocalCondition::Split);
        let report = count_n(&ld, &hs, &r, task.clone(), "t".into()).unwrap();
        let oracle = oracle_count(&ld, &hs, &r, &task.conditions, 25);
        assert_eq!(report.checkpoints[0].total, oracle);
    }

    #[test]
    fn monotone_and_worker_invariant() {
        let (ld, hs) = z4_setup();
        let r = RamSet::full(&ld.group);
        let mut task = EnumTask::new(2000);
        task.checkpoints = vec![10, 100, 1000, 2000];
        let r1 = count_n(&ld, &hs, &r, task.clone(), "t".into()).unwrap();
        for w in [1usize, 2, 8] {
            let mut t = task.clone();
            t.workers = w;
            let rw = count_n(&ld, &hs, &r, t, "t".into()).unwrap();
            for (a, b) in r1.checkpoints.iter().zip(rw.checkpoints.iter()) {
                assert_eq!(a.total, b.total);
                assert_eq!(a.surjective, b.surjective);
            }
        }
        for w in r1.checkpoints.windows(2) {
            assert!(w[0].total <= w[1].total);
            assert!(w[0].surjective <= w[1].surjective);
        }
    }

    #[test]
    fn surjective_examples() {
        // Z/2: surjective = total − 1 (only the trivial hom is non-surjective)
        let (ld, hs) = z2_setup();
        let r = RamSet::full(&ld.group);
        let report = count_n(&ld, &hs, &r, EnumTask::new(50), "t".into()).unwrap();
        assert_eq!(
            report.checkpoints[0].surjective,
            report.checkpoints[0].total - 1
        );

        // Z/4 via Möbius inversion over subgroup runs
        let (ld4, hs4) = z4_setup();
        let r4 = RamSet::full(&ld4.group);
        let lat = subgroup_lattice(&ld4.group).unwrap();
        let bound = 200u64;
        let mut by_subgroup = Vec::new();
        for sg in &lat.subgroups {
            let mut t = EnumTask::new(bound);
            t.value_subgroup = Some(sg.members.clone());
            let rep = count_n(&ld4, &hs4, &r4, t, "t".into()).unwrap();
            by_subgroup.push(vec![rep.checkpoints[0].total]);
        }
        let surj = surjective_count(&lat, &by_subgroup);
        let direct = count_n(&ld4, &hs4, &r4, EnumTask::new(bound), "t".into()).unwrap();
        assert_eq!(surj[0], direct.checkpoints[0].surjective);
        // below the least nontrivial height the surjective count is 0: give
        // the nontrivial wild characters at 3 a height above the bound
        let g3 = FiniteAbelianGroup::new(&[3]).unwrap();
        let ld3 = LocalData::new(g3, &[]);
        let w3 = WeightFunction::constant(&ld3.group, rat(1, 1));
        let trivial_idx = ld3.wild[&3].trivial_char_index();
        let mut ov = BTreeMap::new();
        ov.insert(
            Place::Finite(3),
            Override::ByClass {
                map: BTreeMap::from([(trivial_idx, rat(1, 1))]),
                default: Some(rat(5, 1)),
            },
        );
        let hs3 = HeightSpec::new(&ld3.group, w3, ov).unwrap();
        let r3 = RamSet::full(&ld3.group);
        let rep3 = count_n(&ld3, &hs3, &r3, EnumTask::new(2), "t".into()).unwrap();
        assert_eq!(rep3.checkpoints[0].total, 1);
        assert_eq!(rep3.checkpoints[0].surjective, 0);
    }

    #[test]
    fn reciprocity_randomized() {
        // 1000 random (φ, x) pairs across three groups; exact vanishing
        let mut seed = 0x243f6a8885a308d3u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        let shapes: [&[u32]; 3] = [&[2], &[4], &[2, 2]];
        let mut done = 0u32;
        while done < 1000 {
            for shape in shapes {
                let g = FiniteAbelianGroup::new(shape).unwrap();
                let ld = LocalData::new(g, &[]);
                let tg = crate::local::twist_group(&ld);
                // random hom: wild char + up to 3 tame primes
                let mut phi = GlobalHom::trivial(&ld);
                for (&p, table) in &ld.wild {
                    let idx = (next() % table.chars.len() as u64) as u32;
                    phi.wild.insert(p, idx);
                }
                let primes = [3u64, 5, 7, 11, 13, 17, 19, 23];
                for _ in 0..(next() % 4) {
                    let p = primes[(next() % 8) as usize];
                    if ld.is_wild(p) {
                        continue;
                    }
                    let deltas = ld.group.torsion_elements(p - 1);
                    let delta = deltas[(next() % deltas.len() as u64) as usize];
                    if delta != 0 {
                        phi.tame.insert(p, delta);
                    }
                }
                let x = &tg[(next() % tg.len() as u64) as usize];
                assert_eq!(phi.reciprocity(&ld, x), 0, "phi {phi:?} x {x:?}");
                done += 1;
            }
        }
    }

    #[test]
    fn forced_ramification_and_split_filter() {
        // smallest witness with orbit {2} forced at 3 and 7, split at 2, ∞
        let (ld, hs) = z4_setup();
        let r = RamSet::full(&ld.group);
        let mut task = EnumTask::new(1_000_000);
        task.conditions.insert(Place::Finite(2), LocalCondition::Split);
        task.conditions.insert(Place::Inf, LocalCondition::Split);
        task.conditions
            .insert(Place::Finite(3), LocalCondition::OrbitIn(vec![2]));
        task.conditions
            .insert(Place::Finite(7), LocalCondition::OrbitIn(vec![2]));
        // elsewhere only {1,3} allowed:
        let r13 = RamSet::new(&ld.group, &[1, 3]).unwrap();
        let plan = Plan::build(&ld, &hs, &r13, task).unwrap();
        let parts = plan.run(|| WitnessCollector {
            filter: |_: &Emit<'_, '_>| true,
            best: None,
            seen: 0,
        });
        let mut best: Option<(BigRational, Vec<(u64, u32)>, GlobalHom)> = None;
        let mut seen = 0u64;
        for p in parts {
            seen += p.seen;
            if let Some(b) = p.best {
                let better = match &best {
                    None => true,
                    Some(cur) => (&b.0, &b.1) < (&cur.0, &cur.1),
                };
                if better {
                    best = Some(b);
                }
            }
        }
        assert!(seen > 0, "witness expected for S = {{3, 7}}");
        let (h, _, hom) = best.unwrap();
        // δ = 2 at both forced places; wild trivial; split conditions hold
        assert_eq!(hom.tame.get(&3), Some(&2));
        assert_eq!(hom.tame.get(&7), Some(&2));
        assert!(hom.is_split_at(&ld, Place::Finite(2)));
        assert!(hom.is_split_at(&ld, Place::Inf));
        assert_eq!(hom.height(&ld, &hs).pow, h);
    }

    #[test]
    fn empirical_distribution_sums_to_one() {
        let (ld, hs) = z2_setup();
        let r = RamSet::full(&ld.group);
        let dist =
            empirical_local_distribution(&ld, &hs, &r, EnumTask::new(20_000), 3).unwrap();
        let total: f64 = dist.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // fraction ramified at 3 trends to 1/4 for the conductor height
        let ram: f64 = dist
            .iter()
            .filter(|((orbit, _), _)| *orbit != 0)
            .map(|(_, f)| f)
            .sum();
        assert!((ram - 0.25).abs() < 0.02, "ram fraction {ram}");
    }
}
