//! Trapezoids: singletons and bands of levels hanging below a root vertex.
//!
//! `Band { start, end }` rooted at `x` holds the descendants of `x` at relative
//! depths `start..end`, so its mass under a flow is `m(x)·(end - start)`.
//! It is admissible for the parameter `beta` when `2 <= end/start <= beta`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::FlowMeasure;
use crate::rational::{self, Q};
use crate::tree::{TreeWindow, VertexId};

pub const MIN_BETA: u32 = 12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Singleton,
    Band { start: u32, end: u32 },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trapezoid {
    pub root: VertexId,
    #[serde(flatten)]
    pub shape: Shape,
}

impl fmt::Display for Trapezoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            Shape::Singleton => write!(f, "{{{}}}", self.root),
            Shape::Band { start, end } => write!(f, "Band({start},{end})@{}", self.root),
        }
    }
}

/// Which way to grow a band whose ratio is below 3.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vertical {
    Up,
    Down,
}

impl Vertical {
    pub fn flip(self) -> Self {
        match self {
            Vertical::Up => Vertical::Down,
            Vertical::Down => Vertical::Up,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub beta: u32,
}

impl FamilyConfig {
    pub fn new(beta: u32) -> Result<Self> {
        if beta < MIN_BETA {
            return Err(Error::InvalidParams(format!("beta must be at least {MIN_BETA}, got {beta}")));
        }
        Ok(FamilyConfig { beta })
    }
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { beta: MIN_BETA }
    }
}

/// `max{2c, beta - 1, 3}`, the dyadic parent/child mass ratio bound.
pub fn c_tilde(c: &Q, beta: u32) -> Q {
    let two_c = c * rational::q(2);
    [two_c, rational::q(beta as i64 - 1), rational::q(3)].into_iter().max().unwrap()
}

/// [`c_tilde`] with `c` the measure's edge ratio bound.
pub fn c_tilde_of(m: &FlowMeasure, cfg: FamilyConfig) -> Q {
    c_tilde(&m.edge_ratio_max(), cfg.beta)
}

impl Trapezoid {
    pub fn singleton(root: VertexId) -> Self {
        Trapezoid { root, shape: Shape::Singleton }
    }

    pub fn band(root: VertexId, start: u32, end: u32) -> Result<Self> {
        if start < 1 || end <= start {
            return Err(Error::InvalidTrapezoid(format!("band needs 1 <= start < end, got ({start}, {end})")));
        }
        Ok(Trapezoid { root, shape: Shape::Band { start, end } })
    }

    fn band_unchecked(root: VertexId, start: u32, end: u32) -> Self {
        debug_assert!(1 <= start && start < end);
        Trapezoid { root, shape: Shape::Band { start, end } }
    }

    pub fn is_singleton(&self) -> bool {
        self.shape == Shape::Singleton
    }

    /// Relative depths covered: `0..1` for a singleton.
    pub fn depths(&self) -> std::ops::Range<u32> {
        match self.shape {
            Shape::Singleton => 0..1,
            Shape::Band { start, end } => start..end,
        }
    }

    /// Number of levels spanned (1 for a singleton).
    pub fn height(&self) -> u32 {
        let d = self.depths();
        d.end - d.start
    }

    pub fn is_admissible(&self, beta: u32) -> bool {
        match self.shape {
            Shape::Singleton => true,
            Shape::Band { start, end } => 2 * start <= end && end <= beta * start,
        }
    }

    pub fn fits(&self, w: &TreeWindow) -> bool {
        w.level(self.root) - (self.depths().end as i64 - 1) >= w.bottom()
    }

    fn check_fit(&self, w: &TreeWindow) -> Result<()> {
        if self.fits(w) {
            Ok(())
        } else {
            Err(Error::OutOfWindow(format!("{self} reaches below the bottom level")))
        }
    }

    /// Members, lazily. Caller guarantees the trapezoid fits.
    pub fn iter_members<'a>(&self, w: &'a TreeWindow) -> impl Iterator<Item = VertexId> + 'a {
        let root = self.root;
        self.depths().flat_map(move |d| w.slice(root, d).iter().copied())
    }

    pub fn members(&self, w: &TreeWindow) -> Result<BTreeSet<VertexId>> {
        self.check_fit(w)?;
        Ok(self.iter_members(w).collect())
    }

    pub fn size(&self, w: &TreeWindow) -> usize {
        self.depths().map(|d| w.slice(self.root, d).len()).sum()
    }

    /// Membership test that works whether or not the trapezoid fits.
    pub fn contains(&self, w: &TreeWindow, v: VertexId) -> bool {
        let d = w.level(self.root) - w.level(v);
        d >= 0 && self.depths().contains(&(d as u32)) && w.ancestor(v, d as u32) == Some(self.root)
    }

    /// `m(R) = m(root)·height`.
    pub fn mass(&self, m: &FlowMeasure) -> Result<Q> {
        self.check_fit(m.window())?;
        Ok(self.mass_unchecked(m))
    }

    pub fn mass_unchecked(&self, m: &FlowMeasure) -> Q {
        m.mass(self.root) * rational::q(self.height() as i64)
    }

    /// Both fit the window; decided from the parameters alone.
    pub fn intersects(&self, w: &TreeWindow, other: &Trapezoid) -> bool {
        let (hi, lo) = if w.level(self.root) >= w.level(other.root) { (self, other) } else { (other, self) };
        let k = w.level(hi.root) - w.level(lo.root);
        if w.ancestor(lo.root, k as u32) != Some(hi.root) {
            return false;
        }
        let a = hi.depths();
        let b = lo.depths();
        let (b0, b1) = (b.start as i64 + k, b.end as i64 + k);
        (a.start as i64) < b1 && b0 < a.end as i64
    }

    pub fn is_subset_of(&self, w: &TreeWindow, other: &Trapezoid) -> bool {
        self.iter_members(w).all(|v| other.contains(w, v))
    }

    /// The dilation `Band(ceil(start/beta), beta·end)`. A singleton is its own
    /// envelope. The result need not be admissible nor fit the window.
    pub fn envelope(&self, beta: u32) -> Trapezoid {
        match self.shape {
            Shape::Singleton => *self,
            Shape::Band { start, end } => Trapezoid::band_unchecked(self.root, start.div_ceil(beta), beta * end),
        }
    }

    /// `R* = {x : d(x, R) < start}`, which is `Band(1, end + start - 1)` at the
    /// same root.
    pub fn star(&self) -> Result<Trapezoid> {
        match self.shape {
            Shape::Singleton => Err(Error::InvalidTrapezoid("R* is undefined for a singleton".into())),
            Shape::Band { start, end } => Ok(Trapezoid::band_unchecked(self.root, 1, end + start - 1)),
        }
    }
}

/// Order used by the greedy selections: heavier root first, then the higher
/// root, then enumeration order.
pub fn priority_cmp(m: &FlowMeasure, a: &Trapezoid, b: &Trapezoid) -> Ordering {
    m.mass(b.root)
        .cmp(m.mass(a.root))
        .then_with(|| m.window().level(b.root).cmp(&m.window().level(a.root)))
        .then_with(|| a.cmp(b))
}

/// `R*` by multi-source breadth-first search from the members of `R`.
pub fn star_set(w: &TreeWindow, r: &Trapezoid) -> Result<BTreeSet<VertexId>> {
    let star = r.star()?;
    if !star.fits(w) {
        return Err(Error::OutOfWindow(format!("R* of {r} reaches below the bottom level")));
    }
    r.check_fit(w)?;
    let reach = r.depths().start;
    let mut dist = vec![u32::MAX; w.len()];
    let mut queue = VecDeque::new();
    for v in r.iter_members(w) {
        dist[v.index()] = 0;
        queue.push_back(v);
    }
    let mut out = BTreeSet::new();
    while let Some(v) = queue.pop_front() {
        let d = dist[v.index()];
        if d >= reach {
            continue;
        }
        out.insert(v);
        for u in w.children(v).iter().copied().chain(w.parent(v)) {
            if dist[u.index()] == u32::MAX {
                dist[u.index()] = d + 1;
                queue.push_back(u);
            }
        }
    }
    Ok(out)
}

/// One round of the decomposition algorithm. Every piece is admissible and
/// the pieces partition `r`.
///
/// A `Band(1,3)` is split into the sons of the root plus the sons of each
/// son, since cutting it at depth 2 would leave the non-admissible
/// `Band(2,3)`.
pub fn decompose(w: &TreeWindow, r: &Trapezoid, cfg: FamilyConfig) -> Result<Vec<Trapezoid>> {
    if !r.is_admissible(cfg.beta) {
        return Err(Error::InvalidTrapezoid(format!("{r} is not admissible for beta = {}", cfg.beta)));
    }
    r.check_fit(w)?;
    let x = r.root;
    Ok(match r.shape {
        Shape::Singleton => vec![*r],
        Shape::Band { start: 1, end: 2 } => w.children(x).iter().map(|&y| Trapezoid::singleton(y)).collect(),
        Shape::Band { start: 1, end: 3 } => std::iter::once(Trapezoid::band_unchecked(x, 1, 2))
            .chain(w.children(x).iter().map(|&y| Trapezoid::band_unchecked(y, 1, 2)))
            .collect(),
        Shape::Band { start, end } if end >= 4 * start => {
            vec![Trapezoid::band_unchecked(x, start, 2 * start), Trapezoid::band_unchecked(x, 2 * start, end)]
        }
        Shape::Band { start, end } => {
            w.children(x).iter().map(|&y| Trapezoid::band_unchecked(y, start - 1, end - 1)).collect()
        }
    })
}

/// `k` rounds of [`decompose`] applied to every piece.
pub fn decompose_depth(w: &TreeWindow, r: &Trapezoid, cfg: FamilyConfig, k: u32) -> Result<Vec<Trapezoid>> {
    let mut family = vec![*r];
    for _ in 0..k {
        let mut next = Vec::with_capacity(family.len() * 2);
        for piece in &family {
            next.extend(decompose(w, piece, cfg)?);
        }
        family = next;
    }
    Ok(family)
}

/// One step of the expansion algorithm. The result contains `r`, strictly
/// unless the new root has a single son.
pub fn expand(w: &TreeWindow, r: &Trapezoid, cfg: FamilyConfig, policy: Vertical) -> Result<Trapezoid> {
    if !r.is_admissible(cfg.beta) {
        return Err(Error::InvalidTrapezoid(format!("{r} is not admissible for beta = {}", cfg.beta)));
    }
    let x = r.root;
    let up = || w.parent(x).ok_or_else(|| Error::OutOfWindow(format!("{r} has no parent root in the window")));
    let out = match r.shape {
        Shape::Singleton => Trapezoid::band_unchecked(up()?, 1, 2),
        Shape::Band { start: 1, end: 2 } => Trapezoid::band_unchecked(up()?, 1, 3),
        Shape::Band { start, end } if end >= 3 * start => Trapezoid::band_unchecked(up()?, start + 1, end + 1),
        Shape::Band { start, end } => match policy {
            Vertical::Down => Trapezoid::band_unchecked(x, start, 2 * end),
            Vertical::Up => Trapezoid::band_unchecked(x, start / 2, end),
        },
    };
    out.check_fit(w)?;
    Ok(out)
}

/// Every admissible trapezoid that fits the window and contains `x`, ordered
/// by distance to the root, then `start`, then `end`.
pub fn enumerate_containing(w: &TreeWindow, x: VertexId, cfg: FamilyConfig) -> Vec<Trapezoid> {
    let mut out = vec![Trapezoid::singleton(x)];
    let mut root = x;
    let mut k = 0u32;
    while let Some(p) = w.parent(root) {
        root = p;
        k += 1;
        let max_end = w.depth_below(root) + 1;
        for start in 1..=k {
            let lo = (2 * start).max(k + 1);
            let hi = (cfg.beta * start).min(max_end);
            for end in lo..=hi {
                out.push(Trapezoid::band_unchecked(root, start, end));
            }
        }
    }
    out
}

/// Admissible bands rooted at `x` that fit the window.
pub fn bands_at(w: &TreeWindow, x: VertexId, beta: u32) -> impl Iterator<Item = Trapezoid> + '_ {
    let max_end = w.depth_below(x) + 1;
    (1..max_end).flat_map(move |start| {
        (2 * start..=(beta * start).min(max_end)).map(move |end| Trapezoid::band_unchecked(x, start, end))
    })
}

/// Every admissible trapezoid that fits the window, in `(root, shape)` order.
pub fn all_admissible(w: &TreeWindow, beta: u32) -> Vec<Trapezoid> {
    w.vertices().flat_map(|x| std::iter::once(Trapezoid::singleton(x)).chain(bands_at(w, x, beta))).collect()
}
