//! Maximal operators over admissible trapezoids and the greedy disjoint
//! selection behind the weak type (1,1) bound.
//!
//! Every supremum is a maximum over the finite family of admissible
//! trapezoids fitting the window. All trapezoid values are computed once,
//! sorted, and each vertex takes the first (largest) value among the
//! trapezoids that contain it.

use num::{Signed, Zero};
use rayon::prelude::*;

use crate::function::{BandSums, VertexFunction};
use crate::measure::FlowMeasure;
use crate::rational::{self, Q};
use crate::trapezoid::{self, FamilyConfig, Trapezoid};
use crate::tree::VertexId;

#[derive(Clone, Debug, PartialEq)]
pub struct MaximalReport {
    pub values: Vec<Q>,
    /// A trapezoid containing the vertex whose value equals the reported one.
    pub witness: Vec<Trapezoid>,
}

impl MaximalReport {
    pub fn value(&self, v: VertexId) -> &Q {
        &self.values[v.index()]
    }

    pub fn max(&self) -> Q {
        self.values.iter().max().cloned().unwrap_or_else(Q::zero)
    }

    /// `{x : Mf(x) > lambda}`.
    pub fn superlevel(&self, lambda: &Q) -> Vec<VertexId> {
        (0..self.values.len()).filter(|&i| self.values[i] > *lambda).map(VertexId::new).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weak11 {
    pub lhs: Q,
    pub rhs: Q,
    pub ok: bool,
}

/// Pointwise maximum of `value(R)` over the trapezoids of `family`
/// containing each vertex. Every vertex must lie in some member.
pub fn sup_over<F>(m: &FlowMeasure, family: &[Trapezoid], value: F) -> MaximalReport
where
    F: Fn(&Trapezoid) -> Q + Sync,
{
    let w = m.window();
    let mut scored: Vec<(Q, Trapezoid)> = family.par_iter().map(|r| (value(r), *r)).collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut values: Vec<Option<Q>> = vec![None; w.len()];
    let mut witness = vec![Trapezoid::singleton(VertexId::new(0)); w.len()];
    let mut left = w.len();
    for (val, r) in &scored {
        for v in r.iter_members(w) {
            if values[v.index()].is_none() {
                values[v.index()] = Some(val.clone());
                witness[v.index()] = *r;
                left -= 1;
            }
        }
        if left == 0 {
            break;
        }
    }
    let values = values.into_iter().map(|v| v.expect("family covers the window")).collect();
    MaximalReport { values, witness }
}

/// `(1/m(R)) ∫_R |f| dm`.
pub fn average_abs(m: &FlowMeasure, sums: &BandSums, r: &Trapezoid) -> Q {
    sums.sum(m.window(), r) / r.mass_unchecked(m)
}

/// `(1/m(R)) ∫_R f dm`.
pub fn average(m: &FlowMeasure, f: &VertexFunction, r: &Trapezoid) -> Q {
    let w = m.window();
    let s: Q = r.iter_members(w).map(|v| f.get(v) * m.mass(v)).sum();
    s / r.mass_unchecked(m)
}

/// `(1/m(R)) ∫_R |f - f_R| dm`.
pub fn oscillation(m: &FlowMeasure, f: &VertexFunction, r: &Trapezoid) -> Q {
    let w = m.window();
    let avg = average(m, f, r);
    let s: Q = r.iter_members(w).map(|v| (f.get(v) - &avg).abs() * m.mass(v)).sum();
    s / r.mass_unchecked(m)
}

/// `Mf(x) = max_{R ∋ x} (1/m(R)) ∫_R |f| dm`.
pub fn hl_maximal(m: &FlowMeasure, f: &VertexFunction, cfg: FamilyConfig) -> MaximalReport {
    let family = trapezoid::all_admissible(m.window(), cfg.beta);
    let sums = BandSums::abs_integral_of(m, f);
    sup_over(m, &family, |r| average_abs(m, &sums, r))
}

/// `M#f(x) = max_{R ∋ x} (1/m(R)) ∫_R |f - f_R| dm`.
pub fn sharp_maximal(m: &FlowMeasure, f: &VertexFunction, cfg: FamilyConfig) -> MaximalReport {
    let family = trapezoid::all_admissible(m.window(), cfg.beta);
    sup_over(m, &family, |r| oscillation(m, f, r))
}

/// Maximal function over the sets of a dyadic family (all scales).
pub fn dyadic_maximal(m: &FlowMeasure, f: &VertexFunction, family: &crate::dyadic::DyadicFamily) -> MaximalReport {
    let sets = family.all_sets();
    let sums = BandSums::abs_integral_of(m, f);
    sup_over(m, &sets, |r| average_abs(m, &sums, r))
}

/// Greedy disjoint selection among the trapezoids with `avg |f| > lambda`,
/// heaviest (then highest) root first.
pub fn vitali_select(m: &FlowMeasure, f: &VertexFunction, lambda: &Q, cfg: FamilyConfig) -> Vec<Trapezoid> {
    let w = m.window();
    let sums = BandSums::abs_integral_of(m, f);
    let mut pool: Vec<Trapezoid> = trapezoid::all_admissible(w, cfg.beta)
        .into_par_iter()
        .filter(|r| sums.sum(w, r) > lambda * r.mass_unchecked(m))
        .collect();
    pool.sort_by(|a, b| trapezoid::priority_cmp(m, a, b));
    let mut chosen: Vec<Trapezoid> = Vec::new();
    for r in pool {
        if chosen.iter().all(|c| !c.intersects(w, &r)) {
            chosen.push(r);
        }
    }
    chosen
}

/// `m({Mf > lambda}) <= (2 beta / lambda) ‖f‖_1`.
pub fn weak11_check(m: &FlowMeasure, f: &VertexFunction, lambda: &Q, cfg: FamilyConfig) -> Weak11 {
    let mf = hl_maximal(m, f, cfg);
    weak11_from(m, f, &mf, lambda, cfg)
}

pub fn weak11_from(m: &FlowMeasure, f: &VertexFunction, mf: &MaximalReport, lambda: &Q, cfg: FamilyConfig) -> Weak11 {
    let lhs = m.set_mass(&mf.superlevel(lambda));
    let rhs = rational::q(2 * cfg.beta as i64) / lambda * f.l1_norm(m);
    let ok = lhs <= rhs;
    Weak11 { lhs, rhs, ok }
}

/// Checks on a greedy selection: pairwise disjoint, envelopes cover the
/// superlevel set, and `Σ m(envelope) <= 2 beta Σ m(R_i) <= (2 beta/lambda) ‖f‖_1`.
pub fn vitali_certificate(
    m: &FlowMeasure,
    f: &VertexFunction,
    lambda: &Q,
    chosen: &[Trapezoid],
    superlevel: &[VertexId],
    cfg: FamilyConfig,
) -> bool {
    let w = m.window();
    let disjoint = chosen.iter().enumerate().all(|(i, a)| chosen[i + 1..].iter().all(|b| !a.intersects(w, b)));
    let envelopes: Vec<Trapezoid> = chosen.iter().map(|r| r.envelope(cfg.beta)).collect();
    let covered = superlevel.iter().all(|&x| envelopes.iter().any(|e| e.contains(w, x)));
    let env_mass: Q = envelopes.iter().map(|e| e.mass_unchecked(m)).sum();
    let sel_mass: Q = chosen.iter().map(|r| r.mass_unchecked(m)).sum();
    let two_beta = rational::q(2 * cfg.beta as i64);
    let masses = env_mass <= &two_beta * &sel_mass && &sel_mass * lambda <= f.l1_norm(m);
    disjoint && covered && masses && env_mass <= two_beta / lambda * f.l1_norm(m)
}

/// `‖Mf‖_p / ‖f‖_p` in floating point, `None` for `f = 0`.
pub fn lp_ratio(m: &FlowMeasure, f: &VertexFunction, mf: &MaximalReport, p: u32) -> Option<f64> {
    let lhs: f64 =
        mf.values.iter().zip(m.masses()).map(|(v, w)| rational::to_f64(v).powi(p as i32) * rational::to_f64(w)).sum();
    let rhs = rational::to_f64(&f.lp_norm_pow(m, p));
    (rhs > 0.0).then(|| (lhs / rhs).powf(1.0 / p as f64))
}

/// `2 (2 beta p / (p - 1))^{1/p}`.
pub fn lp_constant(beta: u32, p: u32) -> f64 {
    let p = p as f64;
    2.0 * (2.0 * beta as f64 * p / (p - 1.0)).powf(1.0 / p)
}
