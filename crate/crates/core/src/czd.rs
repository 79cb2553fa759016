//! Stopping sets, large-mass partitions, the Calderón–Zygmund decomposition
//! and the `L^p = L^∞ + H^1` splitting built on it.

use std::collections::{BTreeSet, VecDeque};

use num::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{BandSums, VertexFunction};
use crate::measure::FlowMeasure;
use crate::rational::{self, Q};
use crate::trapezoid::{self, FamilyConfig, Trapezoid};
use crate::tree::{TreeWindow, VertexId};

#[derive(Clone, Debug)]
pub struct StoppingFamily {
    pub base: Trapezoid,
    pub alpha: Q,
    pub sets: Vec<Trapezoid>,
    /// Decomposition round in which each set appeared (`E ∈ F(base, k)`).
    pub rounds: Vec<u32>,
    /// `|f| < alpha` on `base` minus the stopping sets.
    pub complement_ok: bool,
}

/// Descend through the decomposition tree of `base`, stopping at the first
/// pieces where `avg |f| >= alpha`.
pub fn stopping_sets(
    m: &FlowMeasure,
    f: &VertexFunction,
    base: &Trapezoid,
    alpha: &Q,
    cfg: FamilyConfig,
) -> Result<StoppingFamily> {
    let sums = BandSums::abs_integral_of(m, f);
    stopping_sets_with(m, f, &sums, base, alpha, cfg)
}

fn stopping_sets_with(
    m: &FlowMeasure,
    f: &VertexFunction,
    sums: &BandSums,
    base: &Trapezoid,
    alpha: &Q,
    cfg: FamilyConfig,
) -> Result<StoppingFamily> {
    let w = m.window();
    let heavy = |r: &Trapezoid| sums.sum(w, r) >= alpha * r.mass_unchecked(m);
    base.mass(m)?;
    if heavy(base) {
        return Err(Error::PreconditionViolated(format!(
            "average of |f| over {base} is not below alpha = {}",
            rational::format(alpha)
        )));
    }
    let mut sets = Vec::new();
    let mut rounds = Vec::new();
    let mut queue = VecDeque::from([(*base, 0u32)]);
    let mut light_singletons = Vec::new();
    while let Some((r, k)) = queue.pop_front() {
        if r.is_singleton() {
            light_singletons.push(r.root);
            continue;
        }
        for piece in trapezoid::decompose(w, &r, cfg)? {
            if heavy(&piece) {
                sets.push(piece);
                rounds.push(k + 1);
            } else {
                queue.push_back((piece, k + 1));
            }
        }
    }
    let complement_ok = light_singletons.iter().all(|&v| f.get(v).abs() < *alpha);
    Ok(StoppingFamily { base: *base, alpha: alpha.clone(), sets, rounds, complement_ok })
}

/// The three stopping-set properties, checked directly from the sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StoppingCheck {
    pub disjoint_inside_base: bool,
    /// `avg_E |f| >= alpha`.
    pub heavy: bool,
    /// `avg_E |f| < C~ alpha`.
    pub bounded: bool,
    /// `|f| < alpha` off the union.
    pub small_outside: bool,
    /// Every set is a piece of `decompose_depth(base, k)` for its round `k`.
    pub from_decomposition: bool,
}

impl StoppingCheck {
    pub fn all_ok(&self) -> bool {
        self.disjoint_inside_base && self.heavy && self.bounded && self.small_outside && self.from_decomposition
    }
}

pub fn check_stopping(m: &FlowMeasure, f: &VertexFunction, fam: &StoppingFamily, cfg: FamilyConfig) -> StoppingCheck {
    let w = m.window();
    let ct = trapezoid::c_tilde_of(m, cfg);
    let base = fam.base.members(w).unwrap_or_default();
    let mut covered = BTreeSet::new();
    let mut disjoint_inside_base = true;
    for e in &fam.sets {
        for v in e.iter_members(w) {
            disjoint_inside_base &= base.contains(&v) && covered.insert(v);
        }
    }
    let integral = |e: &Trapezoid| -> Q { e.iter_members(w).map(|v| f.get(v).abs() * m.mass(v)).sum() };
    let heavy = fam.sets.iter().all(|e| integral(e) >= &fam.alpha * e.mass_unchecked(m));
    let bounded = fam.sets.iter().all(|e| integral(e) < &ct * &fam.alpha * e.mass_unchecked(m));
    let small_outside = base.iter().filter(|v| !covered.contains(v)).all(|&v| f.get(v).abs() < fam.alpha);
    let from_decomposition = fam.sets.iter().zip(&fam.rounds).all(|(e, &k)| {
        trapezoid::decompose_depth(w, &fam.base, cfg, k).map(|layer| layer.contains(e)).unwrap_or(false)
    });
    StoppingCheck { disjoint_inside_base, heavy, bounded, small_outside, from_decomposition }
}

/// Largest mass of an admissible in-window trapezoid containing `x`.
pub fn largest_containing_mass(w: &TreeWindow, m: &FlowMeasure, x: VertexId, cfg: FamilyConfig) -> Q {
    trapezoid::enumerate_containing(w, x, cfg).iter().map(|r| r.mass_unchecked(m)).max().unwrap()
}

/// Cut points `1 = c_0 < ... < c_k` with `need <= c_k <= limit`, each step
/// admissible (`2c <= c' <= beta c`) and heavy (`(c' - c) m > sigma`).
fn heavy_cuts(mass: &Q, sigma: &Q, need: u32, limit: u32, beta: u32) -> Option<Vec<u32>> {
    let mut prev: Vec<Option<u32>> = vec![None; limit as usize + 1];
    let mut seen = vec![false; limit as usize + 1];
    seen[1] = true;
    for c in 1..=limit {
        if !seen[c as usize] {
            continue;
        }
        if c >= need && c > 1 {
            let mut cuts = vec![c];
            let mut at = c;
            while let Some(p) = prev[at as usize] {
                cuts.push(p);
                at = p;
            }
            cuts.reverse();
            return Some(cuts);
        }
        for next in (2 * c)..=(beta * c).min(limit) {
            if !seen[next as usize] && mass * rational::q((next - c) as i64) > *sigma {
                seen[next as usize] = true;
                prev[next as usize] = Some(c);
            }
        }
    }
    None
}

/// Disjoint admissible trapezoids of mass `> sigma` covering `support`.
pub fn sigma_partition(
    m: &FlowMeasure,
    support: &BTreeSet<VertexId>,
    sigma: &Q,
    cfg: FamilyConfig,
) -> Result<Vec<Trapezoid>> {
    let w = m.window();
    let too_small = |v: VertexId| Error::WindowTooSmall { vertex: v.index(), sigma: rational::format(sigma) };
    if let Some(&v) = support.iter().find(|&&v| largest_containing_mass(w, m, v, cfg) <= *sigma) {
        return Err(too_small(v));
    }
    // deepest support vertex below each vertex, as a relative depth
    let mut reach: Vec<Option<u32>> = vec![None; w.len()];
    for l in w.bottom()..=w.top() {
        for &v in w.row(l) {
            let own = support.contains(&v).then_some(0);
            let below = w.children(v).iter().filter_map(|c| reach[c.index()]).max().map(|d| d + 1);
            reach[v.index()] = own.max(below);
        }
    }
    let mut out = Vec::new();
    let mut stack = vec![w.apex()];
    while let Some(y) = stack.pop() {
        let Some(depth) = reach[y.index()] else { continue };
        let heavy_root = m.mass(y) > sigma;
        let in_support = support.contains(&y);
        if depth > 0 && (heavy_root || !in_support) {
            let limit = w.depth_below(y) + 1;
            if let Some(cuts) = heavy_cuts(m.mass(y), sigma, depth + 1, limit, cfg.beta) {
                if in_support {
                    out.push(Trapezoid::singleton(y));
                }
                for c in cuts.windows(2) {
                    out.push(Trapezoid::band(y, c[0], c[1])?);
                }
                continue;
            }
        }
        if in_support {
            if !heavy_root {
                return Err(too_small(y));
            }
            out.push(Trapezoid::singleton(y));
        }
        stack.extend(w.children(y).iter().rev());
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CZDecomposition {
    pub alpha: Q,
    pub good: VertexFunction,
    pub bad: Vec<(Trapezoid, VertexFunction)>,
    /// The large-mass partition the stopping sets were cut from.
    pub partition: Vec<Trapezoid>,
}

/// `f = g + Σ b_i` at height `alpha`.
pub fn cz_decompose(m: &FlowMeasure, f: &VertexFunction, alpha: &Q, cfg: FamilyConfig) -> Result<CZDecomposition> {
    if !alpha.is_positive() {
        return Err(Error::InvalidParams("alpha must be positive".into()));
    }
    let w = m.window();
    let support: BTreeSet<VertexId> = f.support().collect();
    if support.is_empty() {
        return Ok(CZDecomposition { alpha: alpha.clone(), good: f.clone(), bad: Vec::new(), partition: Vec::new() });
    }
    let sigma = f.l1_norm(m) / alpha;
    let partition = sigma_partition(m, &support, &sigma, cfg)?;
    let sums = BandSums::abs_integral_of(m, f);
    let mut good = f.clone();
    let mut bad = Vec::new();
    for r in &partition {
        let fam = stopping_sets_with(m, f, &sums, r, alpha, cfg)?;
        for e in fam.sets {
            let mean = crate::maximal::average(m, f, &e);
            let mut b = VertexFunction::zero(w.len());
            for v in e.iter_members(w) {
                b.set(v, f.get(v) - &mean);
                good.set(v, mean.clone());
            }
            bad.push((e, b));
        }
    }
    Ok(CZDecomposition { alpha: alpha.clone(), good, bad, partition })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CzCheck {
    /// `f = g + Σ b_i`.
    pub reconstruction: bool,
    /// `|g| <= C~ alpha`.
    pub good_bounded: bool,
    /// `b_i = 0` off `E_i`, and the `E_i` are disjoint.
    pub supports: bool,
    /// `‖b_i‖_1 <= 2 C~ alpha m(E_i)` and `∫ b_i = 0`.
    pub bad_controlled: bool,
    /// `Σ m(E_i) <= ‖f‖_1 / alpha`.
    pub total_mass: bool,
    /// Partition sets are disjoint, admissible and of mass `> ‖f‖_1 / alpha`.
    pub partition_ok: bool,
}

impl CzCheck {
    pub fn all_ok(&self) -> bool {
        self.reconstruction
            && self.good_bounded
            && self.supports
            && self.bad_controlled
            && self.total_mass
            && self.partition_ok
    }
}

pub fn check_cz(m: &FlowMeasure, f: &VertexFunction, cz: &CZDecomposition, cfg: FamilyConfig) -> CzCheck {
    let w = m.window();
    let ct = trapezoid::c_tilde_of(m, cfg);
    let alpha = &cz.alpha;
    let mut total = cz.good.clone();
    for (_, b) in &cz.bad {
        total = &total + b;
    }
    let reconstruction = total == *f;
    let good_bounded = cz.good.sup_norm() <= &ct * alpha;
    let mut seen = BTreeSet::new();
    let supports = cz.bad.iter().all(|(e, b)| {
        let members = e.members(w).unwrap_or_default();
        b.support().all(|v| members.contains(&v)) && members.iter().all(|v| seen.insert(*v))
    });
    let two_ct_alpha = &ct * alpha * rational::q(2);
    let bad_controlled =
        cz.bad.iter().all(|(e, b)| b.l1_norm(m) <= &two_ct_alpha * e.mass_unchecked(m) && b.integral(m).is_zero());
    let mass: Q = cz.bad.iter().map(|(e, _)| e.mass_unchecked(m)).sum();
    let total_mass = mass * alpha <= f.l1_norm(m);
    let sigma = f.l1_norm(m) / alpha;
    let mut pseen = BTreeSet::new();
    let partition_ok = cz.partition.iter().all(|r| {
        r.is_admissible(cfg.beta)
            && r.mass(m).map(|x| x > sigma).unwrap_or(false)
            && r.iter_members(w).all(|v| pseen.insert(v))
    }) && f.support().all(|v| pseen.contains(&v));
    CzCheck { reconstruction, good_bounded, supports, bad_controlled, total_mass, partition_ok }
}

#[derive(Clone, Debug)]
pub struct InterpolationSplit {
    pub good: VertexFunction,
    pub bad: Vec<(Trapezoid, VertexFunction)>,
    /// `lambda Σ m(R_i)`, the H^1 size of the bad part up to a constant.
    pub h1_bound: Q,
}

/// `f = g^λ + Σ (f - f_{R_i}) χ_{R_i}` with `R_i` the stopping sets of the
/// decomposition of `|f|^p` at height `λ^p`.
pub fn interpolation_split(
    m: &FlowMeasure,
    f: &VertexFunction,
    lambda: &Q,
    p: &Q,
    cfg: FamilyConfig,
) -> Result<InterpolationSplit> {
    let p = rational::integer_exponent(p, 2)?;
    if !lambda.is_positive() {
        return Err(Error::InvalidParams("lambda must be positive".into()));
    }
    let w = m.window();
    let fp = f.abs_pow(p);
    let cz = cz_decompose(m, &fp, &rational::pow(lambda, p), cfg)?;
    let mut good = f.clone();
    let mut bad = Vec::new();
    let mut mass = Q::zero();
    for (r, _) in &cz.bad {
        let mean = crate::maximal::average(m, f, r);
        let mut b = VertexFunction::zero(w.len());
        for v in r.iter_members(w) {
            b.set(v, f.get(v) - &mean);
            good.set(v, mean.clone());
        }
        mass += r.mass_unchecked(m);
        bad.push((*r, b));
    }
    Ok(InterpolationSplit { good, bad, h1_bound: lambda * mass })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitCheck {
    pub reconstruction: bool,
    /// `‖g‖_∞^p <= C~ λ^p`.
    pub good_bounded: bool,
    /// `λ^p Σ m(R_i) <= ‖f‖_p^p`.
    pub mass_bounded: bool,
    /// Each `b_i` has mean zero and `‖b_i‖_p^p <= 2^p C~ λ^p m(R_i)`.
    pub pieces_are_atoms: bool,
}

impl SplitCheck {
    pub fn all_ok(&self) -> bool {
        self.reconstruction && self.good_bounded && self.mass_bounded && self.pieces_are_atoms
    }
}

pub fn check_split(
    m: &FlowMeasure,
    f: &VertexFunction,
    s: &InterpolationSplit,
    lambda: &Q,
    p: u32,
    cfg: FamilyConfig,
) -> SplitCheck {
    let ct = trapezoid::c_tilde_of(m, cfg);
    let lp = rational::pow(lambda, p);
    let mut total = s.good.clone();
    for (_, b) in &s.bad {
        total = &total + b;
    }
    let mass: Q = s.bad.iter().map(|(r, _)| r.mass_unchecked(m)).sum();
    let two_p = rational::pow(&rational::q(2), p);
    SplitCheck {
        reconstruction: total == *f,
        good_bounded: rational::pow(&s.good.sup_norm(), p) <= &ct * &lp,
        mass_bounded: &lp * mass <= f.lp_norm_pow(m, p),
        pieces_are_atoms: s
            .bad
            .iter()
            .all(|(r, b)| b.integral(m).is_zero() && b.lp_norm_pow(m, p) <= &two_p * &ct * &lp * r.mass_unchecked(m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::rational::{q, ratio};

    fn cfg() -> FamilyConfig {
        FamilyConfig::default()
    }

    #[test]
    fn stopping_examples() {
        let m = generate::homogeneous_flow(2, 3, 0).unwrap();
        let w = m.window();
        let v = w.row(0)[0];
        let base = Trapezoid::band(w.parent(v).unwrap(), 1, 2).unwrap();
        let zero = stopping_sets(&m, &VertexFunction::zero(w.len()), &base, &q(1), cfg()).unwrap();
        assert!(zero.sets.is_empty() && zero.complement_ok);

        let f = VertexFunction::indicator(w.len(), [v]);
        assert_eq!(base.mass(&m).unwrap(), q(2));
        let fam = stopping_sets(&m, &f, &base, &ratio(3, 4), cfg()).unwrap();
        assert_eq!(fam.sets, vec![Trapezoid::singleton(v)]);
        assert!(check_stopping(&m, &f, &fam, cfg()).all_ok());
        assert!(matches!(stopping_sets(&m, &f, &base, &ratio(1, 2), cfg()), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn stopping_on_random_flows() {
        for seed in 0..20 {
            let m = generate::random_flow(3, seed, 1, -4).unwrap();
            let w = m.window();
            let f = generate::random_function(w, seed, 0.3);
            for r in trapezoid::all_admissible(w, 12).iter().step_by(7) {
                let avg = crate::maximal::average(&m, &f.abs(), r);
                let alpha = avg + ratio(1, 2);
                let fam = stopping_sets(&m, &f, r, &alpha, cfg()).unwrap();
                assert!(check_stopping(&m, &f, &fam, cfg()).all_ok(), "{r}");
            }
        }
    }

    #[test]
    fn sigma_partitions() {
        let m = generate::homogeneous_flow(2, 4, 0).unwrap();
        let w = m.window();
        let leaf = w.row(0)[3];
        let p = sigma_partition(&m, &BTreeSet::from([leaf]), &ratio(1, 2), cfg()).unwrap();
        assert!(p.iter().any(|r| r.contains(w, leaf)));

        let sigma = m.total() / q(2);
        let support: BTreeSet<_> = w.vertices().filter(|&v| w.level(v) <= w.top() - 2).collect();
        let p = sigma_partition(&m, &support, &sigma, cfg()).unwrap();
        let mut seen = BTreeSet::new();
        for r in &p {
            assert!(r.is_admissible(12));
            assert!(r.mass(&m).unwrap() > sigma);
            for v in r.iter_members(w) {
                assert!(seen.insert(v));
            }
        }
        assert!(support.is_subset(&seen));

        let err = sigma_partition(&m, &BTreeSet::from([leaf]), &(m.total() * q(4)), cfg()).unwrap_err();
        assert!(matches!(err, Error::WindowTooSmall { .. }));
    }

    #[test]
    fn cz_examples() {
        let m = generate::homogeneous_flow(2, 6, 0).unwrap();
        let w = m.window();
        let zero = VertexFunction::zero(w.len());
        let cz = cz_decompose(&m, &zero, &q(1), cfg()).unwrap();
        assert!(cz.bad.is_empty() && cz.good.is_zero());

        let v = w.row(0)[9];
        let f = VertexFunction::indicator(w.len(), [v]);
        assert_eq!(f.l1_norm(&m), q(1));
        let cz = cz_decompose(&m, &f, &ratio(1, 4), cfg()).unwrap();
        assert!(check_cz(&m, &f, &cz, cfg()).all_ok());
        assert!(!cz.bad.is_empty());

        let cz = cz_decompose(&m, &f, &q(2), cfg()).unwrap();
        assert!(cz.bad.is_empty());
        assert_eq!(cz.good, f);
    }

    #[test]
    fn cz_on_random_flows() {
        for seed in 0..15 {
            let m = generate::random_flow(3, seed, 2, -4).unwrap();
            let f = generate::random_function(m.window(), seed + 7, 0.25);
            for alpha in [ratio(1, 5), q(1), q(4)] {
                match cz_decompose(&m, &f, &alpha, cfg()) {
                    Ok(cz) => assert!(check_cz(&m, &f, &cz, cfg()).all_ok()),
                    Err(Error::WindowTooSmall { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let m = generate::homogeneous_flow(2, 5, 0).unwrap();
        let w = m.window();
        let zero = VertexFunction::zero(w.len());
        let s = interpolation_split(&m, &zero, &q(1), &q(2), cfg()).unwrap();
        assert!(s.bad.is_empty() && s.h1_bound.is_zero() && s.good.is_zero());
        let f = VertexFunction::indicator(w.len(), [w.row(0)[0], w.row(1)[3]]);
        let lambda = ratio(1, 2);
        let s = interpolation_split(&m, &f, &lambda, &q(2), cfg()).unwrap();
        assert!(check_split(&m, &f, &s, &lambda, 2, cfg()).all_ok());
        let s = interpolation_split(&m, &f, &q(2), &q(2), cfg()).unwrap();
        assert!(s.bad.is_empty());
        assert!(matches!(interpolation_split(&m, &f, &lambda, &ratio(3, 2), cfg()), Err(Error::NonIntegerExponent(_))));
    }
}
