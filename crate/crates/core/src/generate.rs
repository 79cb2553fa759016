//! Window and measure generators.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::FlowMeasure;
use crate::rational::{self, Q};
use crate::tree::{TreeWindow, VertexId, VertexSpec};

fn check_levels(top: i64, bottom: i64) -> Result<()> {
    if bottom >= top {
        return Err(Error::InvalidParams(format!("need bottom < top, got {bottom} >= {top}")));
    }
    Ok(())
}

/// Grow a window level by level; `arity(level_of_parent)` gives each
/// parent's number of sons.
fn grow(top: i64, bottom: i64, mut arity: impl FnMut() -> usize) -> Result<TreeWindow> {
    let mut specs = vec![VertexSpec { parent: None, level: top, on_spine: false }];
    let mut frontier = vec![0usize];
    for l in (bottom..top).rev() {
        let mut next = Vec::new();
        for &p in &frontier {
            for _ in 0..arity().max(1) {
                specs.push(VertexSpec { parent: Some(p), level: l, on_spine: false });
                next.push(specs.len() - 1);
            }
        }
        frontier = next;
    }
    TreeWindow::new(&specs)
}

/// Complete `q`-ary window. With unit leaf masses this is the flow
/// `m(x) = q^{l(x) - bottom}`.
pub fn homogeneous(q: usize, top: i64, bottom: i64) -> Result<TreeWindow> {
    check_levels(top, bottom)?;
    if q == 0 {
        return Err(Error::InvalidParams("q must be positive".into()));
    }
    let size: f64 = (0..=(top - bottom)).map(|k| (q as f64).powi(k as i32)).sum();
    if size > 5e6 {
        return Err(Error::InvalidParams(format!("homogeneous window would have {size:.0} vertices")));
    }
    grow(top, bottom, || q)
}

/// One vertex per level.
pub fn chain(top: i64, bottom: i64) -> Result<TreeWindow> {
    check_levels(top, bottom)?;
    grow(top, bottom, || 1)
}

/// A chain from `top` to `bottom` where every chain vertex above the
/// bottom also carries a pendant chain reaching the bottom level.
pub fn comb(top: i64, bottom: i64) -> Result<TreeWindow> {
    check_levels(top, bottom)?;
    let height = (top - bottom) as usize;
    if height * height > 4_000_000 {
        return Err(Error::InvalidParams(format!("comb of height {height} is too large")));
    }
    let mut specs = vec![VertexSpec { parent: None, level: top, on_spine: false }];
    let mut spine = 0usize;
    for l in (bottom..top).rev() {
        let spine_parent = spine;
        specs.push(VertexSpec { parent: Some(spine_parent), level: l, on_spine: false });
        spine = specs.len() - 1;
        let mut tip = spine_parent;
        for k in (bottom..=l).rev() {
            specs.push(VertexSpec { parent: Some(tip), level: k, on_spine: false });
            tip = specs.len() - 1;
        }
    }
    TreeWindow::new(&specs)
}

pub fn comb_flow(top: i64, bottom: i64, seed: u64) -> Result<FlowMeasure> {
    let w = Arc::new(comb(top, bottom)?);
    let leaves = random_leaf_masses(&w, seed);
    FlowMeasure::from_leaf_masses(w, &leaves)
}

/// Apex at level 1 with `q` leaves at level 0.
pub fn star(q: usize) -> Result<TreeWindow> {
    homogeneous(q, 1, 0)
}

/// Each vertex gets between 1 and `max_degree` sons, uniformly.
pub fn random(max_degree: usize, seed: u64, top: i64, bottom: i64) -> Result<TreeWindow> {
    check_levels(top, bottom)?;
    if max_degree == 0 {
        return Err(Error::InvalidParams("max_degree must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grow(top, bottom, || rng.gen_range(1..=max_degree))
}

/// Leaf masses `a/b` with `a ∈ 1..=9`, `b ∈ 1..=4`.
pub fn random_leaf_masses(w: &TreeWindow, seed: u64) -> BTreeMap<VertexId, Q> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1eaf);
    w.row(w.bottom()).iter().map(|&v| (v, rational::ratio(rng.gen_range(1..=9), rng.gen_range(1..=4)))).collect()
}

pub fn random_flow(max_degree: usize, seed: u64, top: i64, bottom: i64) -> Result<FlowMeasure> {
    let w = Arc::new(random(max_degree, seed, top, bottom)?);
    let leaves = random_leaf_masses(&w, seed);
    FlowMeasure::from_leaf_masses(w, &leaves)
}

pub fn homogeneous_flow(q: usize, top: i64, bottom: i64) -> Result<FlowMeasure> {
    Ok(FlowMeasure::counting_leaves(Arc::new(homogeneous(q, top, bottom)?)))
}

/// Sparse random function with values in `-k..=k` over `1..=3`.
pub fn random_function(w: &TreeWindow, seed: u64, density: f64) -> crate::function::VertexFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf00d);
    let mut f = crate::function::VertexFunction::zero(w.len());
    for v in w.vertices() {
        if rng.gen_bool(density.clamp(0.0, 1.0)) {
            let n: i64 = rng.gen_range(-6..=6);
            let d: i64 = rng.gen_range(1..=3);
            f.set(v, rational::ratio(n, d));
        }
    }
    f
}
