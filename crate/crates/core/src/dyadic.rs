//! Increasing exhaustions, dyadic families of partitions, and the good-λ and
//! Fefferman–Stein checks that run on them.
//!
//! Scales `j >= 0` come from the expansion chain started at a vertex: `D_j`
//! holds the brothers of the `j`-th chain element plus the brothers of every
//! later vertical increment. The levels of the window that the chain never
//! reaches are covered by a fixed family of admissible bands, the same at
//! every nonnegative scale. Negative scales apply one decomposition round to
//! each set, down to the all-singleton partition.

use std::collections::BTreeSet;

use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{BandSums, VertexFunction};
use crate::maximal::{self, MaximalReport};
use crate::measure::FlowMeasure;
use crate::rational::{self, Q};
use crate::trapezoid::{self, FamilyConfig, Trapezoid, Vertical};
use crate::tree::{TreeWindow, VertexId};

#[derive(Clone, Debug)]
pub struct DyadicFamily {
    /// Scale of `levels[0]`; every set there is a singleton.
    pub j_min: i32,
    /// `levels[i]` is `D_{j_min + i}`.
    pub levels: Vec<Vec<Trapezoid>>,
    pub exhaustion: Vec<Trapezoid>,
}

impl DyadicFamily {
    pub fn j_max(&self) -> i32 {
        self.j_min + self.levels.len() as i32 - 1
    }

    pub fn scale(&self, j: i32) -> Option<&[Trapezoid]> {
        let i = j.checked_sub(self.j_min)?;
        self.levels.get(usize::try_from(i).ok()?).map(Vec::as_slice)
    }

    pub fn scales(&self) -> impl Iterator<Item = (i32, &[Trapezoid])> {
        self.levels.iter().enumerate().map(|(i, d)| (self.j_min + i as i32, d.as_slice()))
    }

    /// Every dyadic set, each once.
    pub fn all_sets(&self) -> Vec<Trapezoid> {
        let set: BTreeSet<Trapezoid> = self.levels.iter().flatten().copied().collect();
        set.into_iter().collect()
    }
}

/// Levels `(low, high)` spanned by a trapezoid.
fn strip(w: &TreeWindow, r: &Trapezoid) -> (i64, i64) {
    let l = w.level(r.root);
    let d = r.depths();
    (l - d.end as i64 + 1, l - d.start as i64)
}

/// `R_0 = {start}`, `R_{j+1} = expand(R_j)` until the window edge. Vertical
/// expansions alternate, the first one going down.
pub fn exhaustion(w: &TreeWindow, cfg: FamilyConfig, start: VertexId) -> Vec<Trapezoid> {
    let mut chain = vec![Trapezoid::singleton(start)];
    let mut policy = Vertical::Down;
    loop {
        let r = *chain.last().unwrap();
        let Ok(next) = trapezoid::expand(w, &r, cfg, policy) else { break };
        if next.root == r.root {
            policy = policy.flip();
        }
        chain.push(next);
    }
    chain
}

/// Levels gained by `next` over `prev`, as a band rooted at `next.root`.
fn increment(w: &TreeWindow, prev: &Trapezoid, next: &Trapezoid) -> Option<Trapezoid> {
    let (lo, hi) = strip(w, prev);
    let (nlo, nhi) = strip(w, next);
    let (a, b) = if nhi > hi {
        (hi + 1, nhi)
    } else if nlo < lo {
        (nlo, lo - 1)
    } else {
        return None;
    };
    let l = w.level(next.root);
    Some(Trapezoid::band(next.root, (l - b) as u32, (l - a + 1) as u32).expect("increments are proper bands"))
}

fn brothers<'a>(w: &'a TreeWindow, r: &Trapezoid) -> impl Iterator<Item = Trapezoid> + 'a {
    let shape = r.shape;
    w.row(w.level(r.root)).iter().map(move |&y| Trapezoid { root: y, shape })
}

/// Cut depths `[a, b)` (with `b >= 2a`) into admissible ranges.
fn split_depths(mut a: u32, b: u32) -> Vec<(u32, u32)> {
    debug_assert!(b >= 2 * a);
    let mut out = Vec::new();
    while b >= 4 * a {
        out.push((a, 2 * a));
        a *= 2;
    }
    out.push((a, b));
    out
}

/// Admissible sets covering the window levels outside `[low, high]`.
fn cover_outside(w: &TreeWindow, low: i64, high: i64) -> Vec<Trapezoid> {
    let apex = w.apex();
    let mut out = Vec::new();
    if high < w.top() {
        out.push(Trapezoid::singleton(apex));
        let gap = (w.top() - high - 1) as u32;
        if gap > 0 {
            for (a, b) in split_depths(1, gap + 1) {
                out.push(Trapezoid::band(apex, a, b).unwrap());
            }
        }
    }
    if low > w.bottom() {
        let n = (low - w.bottom()) as u32;
        let reach = (w.top() - low + 1) as u32;
        if n <= reach {
            let root_level = low - 1 + n as i64;
            for &y in w.row(root_level) {
                out.push(Trapezoid::band(y, n, 2 * n).unwrap());
            }
        } else {
            for (a, b) in split_depths(reach, reach + n) {
                out.push(Trapezoid::band(apex, a, b).unwrap());
            }
        }
    }
    out
}

pub fn build_dyadic(w: &TreeWindow, cfg: FamilyConfig, start: VertexId) -> DyadicFamily {
    let chain = exhaustion(w, cfg, start);
    let increments: Vec<Option<Trapezoid>> = chain.windows(2).map(|p| increment(w, &p[0], &p[1])).collect();
    let (low, high) = strip(w, chain.last().unwrap());
    let outside = cover_outside(w, low, high);

    let mut upper: Vec<Vec<Trapezoid>> = Vec::with_capacity(chain.len());
    for (j, r) in chain.iter().enumerate() {
        let mut d: Vec<Trapezoid> = brothers(w, r).collect();
        for inc in increments[j..].iter().flatten() {
            d.extend(brothers(w, inc));
        }
        d.extend(outside.iter().copied());
        d.sort();
        upper.push(d);
    }

    let mut lower: Vec<Vec<Trapezoid>> = Vec::new();
    let mut current = upper[0].clone();
    while current.iter().any(|r| !r.is_singleton()) {
        let mut next: Vec<Trapezoid> = current
            .iter()
            .flat_map(|r| trapezoid::decompose(w, r, cfg).expect("dyadic sets are admissible and fit"))
            .collect();
        next.sort();
        lower.push(next.clone());
        current = next;
    }
    let j_min = -(lower.len() as i32);
    lower.reverse();
    lower.extend(upper);
    DyadicFamily { j_min, levels: lower, exhaustion: chain }
}

/// Outcome of checking the dyadic properties on the represented scales.
#[derive(Clone, Debug, Serialize)]
pub struct DyadicCheck {
    /// Every `D_j` is a partition of the window into admissible sets.
    pub partitions: bool,
    /// Sets of different scales are nested or disjoint.
    pub nested: bool,
    /// Each set lies in one set of the next scale with `m(parent) <= C~ m(R)`.
    pub parent_mass: bool,
    /// Largest number of sets of scale `j - 1` making up a set of scale `j`.
    pub max_children: usize,
    /// `max_children <= c`.
    pub children_bounded: bool,
    /// A singleton at scale `j` stays a singleton at every lower scale, and
    /// the lowest scale is all singletons.
    pub singletons_persist: bool,
}

impl DyadicCheck {
    pub fn all_ok(&self) -> bool {
        self.partitions && self.nested && self.parent_mass && self.children_bounded && self.singletons_persist
    }
}

/// `owner[v]` = index of the set of `d` containing `v`, or `None` when `d`
/// is not a partition.
fn owners(w: &TreeWindow, d: &[Trapezoid]) -> Option<Vec<usize>> {
    let mut owner = vec![usize::MAX; w.len()];
    for (i, r) in d.iter().enumerate() {
        if !r.fits(w) {
            return None;
        }
        for v in r.iter_members(w) {
            if owner[v.index()] != usize::MAX {
                return None;
            }
            owner[v.index()] = i;
        }
    }
    owner.iter().all(|&o| o != usize::MAX).then_some(owner)
}

pub fn check_dyadic(m: &FlowMeasure, family: &DyadicFamily, cfg: FamilyConfig) -> DyadicCheck {
    let w = m.window();
    let c = m.edge_ratio_max();
    let ct = trapezoid::c_tilde(&c, cfg.beta);
    let owner: Vec<Option<Vec<usize>>> = family.levels.iter().map(|d| owners(w, d)).collect();
    let partitions =
        owner.iter().all(Option::is_some) && family.levels.iter().flatten().all(|r| r.is_admissible(cfg.beta));
    if !partitions {
        return DyadicCheck {
            partitions,
            nested: false,
            parent_mass: false,
            max_children: 0,
            children_bounded: false,
            singletons_persist: false,
        };
    }
    let owner: Vec<Vec<usize>> = owner.into_iter().map(Option::unwrap).collect();
    let n = family.levels.len();

    let nested = (0..n).all(|i| {
        family.levels[i].iter().all(|r| {
            let first = r.iter_members(w).next().unwrap();
            (i + 1..n).all(|k| r.iter_members(w).all(|v| owner[k][v.index()] == owner[k][first.index()]))
        })
    });

    let parent_mass = (0..n.saturating_sub(1)).all(|i| {
        family.levels[i].iter().all(|r| {
            let first = r.iter_members(w).next().unwrap();
            let parent = family.levels[i + 1][owner[i + 1][first.index()]];
            parent.mass_unchecked(m) <= &ct * r.mass_unchecked(m)
        })
    });

    let mut max_children = 0;
    for i in 1..n {
        for r in &family.levels[i] {
            let kids: BTreeSet<usize> = r.iter_members(w).map(|v| owner[i - 1][v.index()]).collect();
            max_children = max_children.max(kids.len());
        }
    }
    let children_bounded = rational::q(max_children as i64) <= c;

    let bottom_singletons = family.levels[0].iter().all(Trapezoid::is_singleton);
    let singletons_persist = bottom_singletons
        && (1..n).all(|i| {
            family.levels[i]
                .iter()
                .filter(|r| r.is_singleton())
                .all(|r| (0..i).all(|k| family.levels[k][owner[k][r.root.index()]].is_singleton()))
        });

    DyadicCheck { partitions, nested, parent_mass, max_children, children_bounded, singletons_persist }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodLambda {
    #[serde(serialize_with = "crate::spec_io::ser_q")]
    pub lhs: Q,
    #[serde(serialize_with = "crate::spec_io::ser_q")]
    pub rhs: Q,
    pub ok: bool,
    /// Every top-scale dyadic set has `avg |f| <= lambda`, so each maximal
    /// dyadic set above `lambda` has a parent inside the window.
    pub top_scale_covered: bool,
}

/// `C' = 2 beta C~`.
pub fn good_lambda_constant(m: &FlowMeasure, cfg: FamilyConfig) -> Q {
    rational::q(2 * cfg.beta as i64) * trapezoid::c_tilde_of(m, cfg)
}

/// Largest `avg |f|` over the top-scale sets.
pub fn top_scale_average(m: &FlowMeasure, f: &VertexFunction, family: &DyadicFamily) -> Q {
    let sums = BandSums::abs_integral_of(m, f);
    let top = family.scale(family.j_max()).unwrap();
    top.iter().map(|r| maximal::average_abs(m, &sums, r)).max().unwrap_or_else(Q::zero)
}

/// `m({M_D f > 2λ, M#f < γλ}) <= C' γ m({M_D f > λ})`.
pub fn good_lambda_check(
    m: &FlowMeasure,
    f: &VertexFunction,
    family: &DyadicFamily,
    lambda: &Q,
    gamma: &Q,
    cfg: FamilyConfig,
) -> GoodLambda {
    let md = maximal::dyadic_maximal(m, f, family);
    let sharp = maximal::sharp_maximal(m, f, cfg);
    good_lambda_from(m, f, family, &md, &sharp, lambda, gamma, cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn good_lambda_from(
    m: &FlowMeasure,
    f: &VertexFunction,
    family: &DyadicFamily,
    md: &MaximalReport,
    sharp: &MaximalReport,
    lambda: &Q,
    gamma: &Q,
    cfg: FamilyConfig,
) -> GoodLambda {
    let two_lambda = lambda * rational::q(2);
    let gl = gamma * lambda;
    let lhs: Q =
        m.window().vertices().filter(|&x| *md.value(x) > two_lambda && *sharp.value(x) < gl).map(|x| m.mass(x)).sum();
    let rhs = good_lambda_constant(m, cfg) * gamma * m.set_mass(&md.superlevel(lambda));
    let ok = lhs <= rhs;
    let top_scale_covered = top_scale_average(m, f, family) <= *lambda;
    GoodLambda { lhs, rhs, ok, top_scale_covered }
}

/// `‖M_D f‖_p^p / ‖M#f‖_p^p`.
pub fn fefferman_stein_ratio(
    m: &FlowMeasure,
    f: &VertexFunction,
    family: &DyadicFamily,
    p: u32,
    cfg: FamilyConfig,
) -> Result<Q> {
    if p < 1 {
        return Err(Error::NonIntegerExponent(p.to_string()));
    }
    let sharp = maximal::sharp_maximal(m, f, cfg);
    let den = VertexFunction::from_values(sharp.values).lp_norm_pow(m, p);
    if den.is_zero() {
        return Err(Error::SharpVanishes);
    }
    let md = maximal::dyadic_maximal(m, f, family);
    Ok(VertexFunction::from_values(md.values).lp_norm_pow(m, p) / den)
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
    fn exhaustion_from_a_leaf() {
        let w = generate::homogeneous(2, 4, 0).unwrap();
        let x = w.row(0)[0];
        let chain = exhaustion(&w, cfg(), x);
        let p = w.parent(x).unwrap();
        assert_eq!(chain[0], Trapezoid::singleton(x));
        assert_eq!(chain[1], Trapezoid::band(p, 1, 2).unwrap());
        assert_eq!(chain[2], Trapezoid::band(w.parent(p).unwrap(), 1, 3).unwrap());
        assert!(chain.len() >= 3);
        for pair in chain.windows(2) {
            let a = pair[0].members(&w).unwrap();
            let b = pair[1].members(&w).unwrap();
            assert!(a.is_subset(&b) && a.len() < b.len(), "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn vertical_increments_are_admissible() {
        for seed in 0..6 {
            let w = generate::random(3, seed, 3, -9).unwrap();
            let start = *w.spine().last().unwrap();
            let chain = exhaustion(&w, cfg(), start);
            for p in chain.windows(2) {
                if let Some(inc) = increment(&w, &p[0], &p[1]) {
                    assert!(inc.is_admissible(12), "{} -> {}: {inc}", p[0], p[1]);
                    let a = p[0].members(&w).unwrap();
                    let b = p[1].members(&w).unwrap();
                    let i = inc.members(&w).unwrap();
                    assert!(i.is_disjoint(&a) && i.is_subset(&b));
                    if p[1].root == p[0].root {
                        assert_eq!(a.len() + i.len(), b.len());
                    }
                }
            }
        }
    }

    #[test]
    fn depth_splitting() {
        assert_eq!(split_depths(1, 2), vec![(1, 2)]);
        assert_eq!(split_depths(1, 9), vec![(1, 2), (2, 4), (4, 9)]);
        for a in 1..6 {
            for b in 2 * a..60 {
                let parts = split_depths(a, b);
                assert_eq!(parts[0].0, a);
                assert_eq!(parts.last().unwrap().1, b);
                assert!(parts.windows(2).all(|p| p[0].1 == p[1].0));
                assert!(parts.iter().all(|&(s, e)| 2 * s <= e && e <= 12 * s));
            }
        }
    }

    #[test]
    fn families_partition_and_nest() {
        for (seed, start_at_leaf) in [(0, true), (1, false), (2, true), (3, false)] {
            let m = generate::random_flow(2, seed, 2, -5).unwrap();
            let w = m.window();
            let start = if start_at_leaf { *w.spine().last().unwrap() } else { w.spine()[2] };
            let d = build_dyadic(w, cfg(), start);
            let check = check_dyadic(&m, &d, cfg());
            assert!(check.partitions && check.nested && check.parent_mass && check.singletons_persist, "{check:?}");
            assert!(d.scale(d.j_min).unwrap().iter().all(Trapezoid::is_singleton));
            assert_eq!(d.scale(0).unwrap().iter().filter(|r| r.root == start).count(), 1);
        }
        let m = generate::homogeneous_flow(2, 1, -3).unwrap();
        let d = build_dyadic(m.window(), cfg(), m.window().apex());
        assert_eq!(d.exhaustion.len(), 1);
        assert!(check_dyadic(&m, &d, cfg()).partitions);
    }

    #[test]
    fn dyadic_maximal_is_below_hardy_littlewood() {
        let m = generate::random_flow(3, 6, 1, -4).unwrap();
        let w = m.window();
        let d = build_dyadic(w, cfg(), *w.spine().last().unwrap());
        let f = generate::random_function(w, 3, 0.3);
        let md = maximal::dyadic_maximal(&m, &f, &d);
        let mf = maximal::hl_maximal(&m, &f, cfg());
        for x in w.vertices() {
            assert!(md.value(x) <= mf.value(x));
            assert!(*md.value(x) >= num::Signed::abs(f.get(x)));
        }
        let k = ratio(3, 7);
        let c = VertexFunction::constant(w.len(), k.clone());
        assert!(maximal::dyadic_maximal(&m, &c, &d).values.iter().all(|v| *v == k));
    }

    #[test]
    fn good_lambda_examples() {
        let m = generate::homogeneous_flow(2, 2, -3).unwrap();
        let w = m.window();
        assert_eq!(good_lambda_constant(&m, cfg()), q(264));
        let d = build_dyadic(w, cfg(), *w.spine().last().unwrap());
        let zero = VertexFunction::zero(w.len());
        let r = good_lambda_check(&m, &zero, &d, &q(1), &ratio(1, 10), cfg());
        assert_eq!((r.lhs.clone(), r.rhs.clone(), r.ok), (q(0), q(0), true));
        let f = generate::random_function(w, 5, 0.4);
        let lambda = top_scale_average(&m, &f, &d).max(ratio(1, 8));
        for gamma in [ratio(1, 100), ratio(1, 10), q(1)] {
            for scale in [q(1), q(2), q(5)] {
                let r = good_lambda_check(&m, &f, &d, &(&lambda * &scale), &gamma, cfg());
                assert!(r.top_scale_covered && r.ok, "{r:?}");
            }
        }
    }

    #[test]
    fn fefferman_stein() {
        let m = generate::homogeneous_flow(2, 1, -3).unwrap();
        let w = m.window();
        let d = build_dyadic(w, cfg(), *w.spine().last().unwrap());
        let c = VertexFunction::constant(w.len(), q(4));
        assert_eq!(fefferman_stein_ratio(&m, &c, &d, 2, cfg()), Err(Error::SharpVanishes));
        let f = VertexFunction::indicator(w.len(), [w.row(-3)[0]]);
        let r = fefferman_stein_ratio(&m, &f, &d, 2, cfg()).unwrap();
        assert!(r > q(0));
    }
}
