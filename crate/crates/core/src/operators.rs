//! Integral operators given by kernels, and the Hörmander-type integral
//! conditions over trapezoids.

use std::collections::BTreeMap;

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::hardy::Atom;
use crate::measure::FlowMeasure;
use crate::rational::{self, Q};
use crate::spec_io::ser_q;
use crate::trapezoid::{self, FamilyConfig, Trapezoid};
use crate::tree::{TreeWindow, VertexId};

/// Sparse kernel `K(x, y)`; absent entries are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Kernel {
    len: usize,
    entries: BTreeMap<(VertexId, VertexId), Q>,
}

impl Kernel {
    pub fn zero(len: usize) -> Self {
        Kernel { len, entries: BTreeMap::new() }
    }

    pub fn from_entries(len: usize, entries: impl IntoIterator<Item = (VertexId, VertexId, Q)>) -> Result<Self> {
        let mut k = Self::zero(len);
        for (x, y, value) in entries {
            if x.index() >= len || y.index() >= len {
                return Err(Error::OutOfWindow(format!("kernel entry ({x}, {y})")));
            }
            k.set(x, y, value);
        }
        Ok(k)
    }

    /// `K(x, y) = [x = y] / m(y)`, so that `T f = f`.
    pub fn identity(m: &FlowMeasure) -> Self {
        let w = m.window();
        let mut k = Self::zero(w.len());
        for v in w.vertices() {
            k.set(v, v, rational::one() / m.mass(v));
        }
        k
    }

    /// `K(x, y) = χ_R(x) χ_R(y) / m(R)`, so that `T f = f_R χ_R`.
    pub fn averaging(m: &FlowMeasure, r: &Trapezoid) -> Result<Self> {
        let w = m.window();
        let inv = rational::one() / r.mass(m)?;
        let members: Vec<_> = r.iter_members(w).collect();
        let mut k = Self::zero(w.len());
        for &x in &members {
            for &y in &members {
                k.set(x, y, inv.clone());
            }
        }
        Ok(k)
    }

    /// Each entry present with probability `density`, values `n/d` with
    /// `n` in `-5..=5` and `d` in `1..=4`.
    pub fn random(w: &TreeWindow, seed: u64, density: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65726e);
        let mut k = Self::zero(w.len());
        for x in w.vertices() {
            for y in w.vertices() {
                if rng.gen_bool(density.clamp(0.0, 1.0)) {
                    k.set(x, y, rational::ratio(rng.gen_range(-5..=5), rng.gen_range(1..=4)));
                }
            }
        }
        k
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, x: VertexId, y: VertexId) -> Q {
        self.entries.get(&(x, y)).cloned().unwrap_or_else(Q::zero)
    }

    pub fn set(&mut self, x: VertexId, y: VertexId, value: Q) {
        if value.is_zero() {
            self.entries.remove(&(x, y));
        } else {
            self.entries.insert((x, y), value);
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (VertexId, VertexId, &Q)> {
        self.entries.iter().map(|((x, y), k)| (*x, *y, k))
    }

    pub fn transpose(&self) -> Self {
        Kernel { len: self.len, entries: self.entries.iter().map(|((x, y), k)| ((*y, *x), k.clone())).collect() }
    }

    /// Nonzero entries of `K(·, y)` for every `y`.
    fn columns(&self) -> Vec<Vec<(VertexId, Q)>> {
        let mut cols = vec![Vec::new(); self.len];
        for ((x, y), k) in &self.entries {
            cols[y.index()].push((*x, k.clone()));
        }
        cols
    }
}

/// `T f(x) = Σ_y K(x, y) f(y) m(y)`.
pub fn apply(m: &FlowMeasure, k: &Kernel, f: &VertexFunction) -> VertexFunction {
    let mut out = VertexFunction::zero(k.len());
    for ((x, y), value) in &k.entries {
        let fy = f.get(*y);
        if !fy.is_zero() {
            out.set(*x, out.get(*x) + value * fy * m.mass(*y));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HormanderReport {
    /// `max_R max_{y,z ∈ R} ∫_{(R*)^c} |K(x,y) - K(x,z)| dm(x)`.
    #[serde(serialize_with = "ser_q")]
    pub constant: Q,
    /// Admissible bands scanned.
    pub checked: usize,
    /// Admissible bands skipped because `R*` leaves the window.
    pub excluded: usize,
    /// `(R, y, z)` attaining the constant.
    pub witness: Option<(Trapezoid, VertexId, VertexId)>,
}

fn column_gap(m: &FlowMeasure, cy: &[(VertexId, Q)], cz: &[(VertexId, Q)], star: &Trapezoid) -> Q {
    let w = m.window();
    let mut diff: BTreeMap<VertexId, Q> = BTreeMap::new();
    for (x, k) in cy {
        *diff.entry(*x).or_insert_with(Q::zero) += k;
    }
    for (x, k) in cz {
        *diff.entry(*x).or_insert_with(Q::zero) -= k;
    }
    diff.into_iter().filter(|(x, _)| !star.contains(w, *x)).map(|(x, d)| d.abs() * m.mass(x)).sum()
}

/// The first kernel condition, scanned over every admissible band whose
/// `R*` fits the window.
pub fn hormander_1star(m: &FlowMeasure, k: &Kernel, cfg: FamilyConfig) -> HormanderReport {
    let w = m.window();
    let cols = k.columns();
    let bands: Vec<Trapezoid> =
        trapezoid::all_admissible(w, cfg.beta).into_iter().filter(|r| !r.is_singleton()).collect();
    let scanned: Vec<(Trapezoid, Trapezoid)> =
        bands.iter().filter_map(|r| r.star().ok().filter(|s| s.fits(w)).map(|s| (*r, s))).collect();
    let excluded = bands.len() - scanned.len();
    let best = scanned
        .par_iter()
        .filter_map(|(r, star)| {
            let members: Vec<_> = r.iter_members(w).collect();
            let mut best: Option<(Q, VertexId, VertexId)> = None;
            for (i, &y) in members.iter().enumerate() {
                for &z in &members[i + 1..] {
                    let gap = column_gap(m, &cols[y.index()], &cols[z.index()], star);
                    if best.as_ref().is_none_or(|b| gap > b.0) {
                        best = Some((gap, y, z));
                    }
                }
            }
            best.map(|(gap, y, z)| (gap, (*r, y, z)))
        })
        .reduce_with(|a, b| match a.0.cmp(&b.0) {
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Equal => std::cmp::min_by_key(a, b, |x| x.1),
        });
    let (constant, witness) = match best {
        Some((c, wit)) => (c, Some(wit)),
        None => (Q::zero(), None),
    };
    HormanderReport { constant, checked: scanned.len(), excluded, witness }
}

/// The second kernel condition: the first one for `K^T`.
pub fn hormander_2star(m: &FlowMeasure, k: &Kernel, cfg: FamilyConfig) -> HormanderReport {
    hormander_1star(m, &k.transpose(), cfg)
}

/// `max_a ‖T a‖_1` over the corpus.
pub fn h1_l1_probe(m: &FlowMeasure, k: &Kernel, atoms: &[Atom]) -> Result<Q> {
    if atoms.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(atoms.par_iter().map(|a| apply(m, k, &a.values).l1_norm(m)).max().unwrap())
}

/// `(m(R*), m(R))` for every admissible band whose `R*` fits the window.
pub fn star_masses(m: &FlowMeasure, cfg: FamilyConfig) -> Vec<(Trapezoid, Q, Q)> {
    let w = m.window();
    trapezoid::all_admissible(w, cfg.beta)
        .into_iter()
        .filter(|r| !r.is_singleton())
        .filter_map(|r| {
            let star = r.star().ok().filter(|s| s.fits(w))?;
            Some((r, star.mass_unchecked(m), r.mass_unchecked(m)))
        })
        .collect()
}
