//! BMO norms, John–Nirenberg distributions, atoms and atomic
//! re-decompositions.

use num::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::czd;
use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::maximal;
use crate::measure::{self, FlowMeasure};
use crate::rational::{self, Q};
use crate::spec_io::ser_q;
use crate::trapezoid::{self, FamilyConfig, Shape, Trapezoid};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BmoReport {
    pub q: u32,
    /// `sup_R (1/m(R)) ∫_R |f - f_R|^q dm`, exactly.
    #[serde(serialize_with = "ser_q")]
    pub power: Q,
    pub witness: Trapezoid,
}

impl BmoReport {
    /// The norm itself, `power^(1/q)`.
    pub fn norm_f64(&self) -> f64 {
        rational::to_f64(&self.power).powf(1.0 / self.q as f64)
    }
}

/// `(1/m(R)) ∫_R |f - f_R|^q dm`.
pub fn mean_oscillation_pow(m: &FlowMeasure, f: &VertexFunction, r: &Trapezoid, q: u32) -> Q {
    let w = m.window();
    let mass = r.mass_unchecked(m);
    let integral: Q = r.iter_members(w).map(|v| f.get(v) * m.mass(v)).sum();
    let avg = integral / &mass;
    let s: Q = r.iter_members(w).map(|v| rational::pow(&(f.get(v) - &avg).abs(), q) * m.mass(v)).sum();
    s / mass
}

pub fn bmo_norm(m: &FlowMeasure, f: &VertexFunction, q: u32, cfg: FamilyConfig) -> Result<BmoReport> {
    if q == 0 {
        return Err(Error::NonIntegerExponent("0".into()));
    }
    let family = trapezoid::all_admissible(m.window(), cfg.beta);
    let (power, witness) = family
        .par_iter()
        .map(|r| (mean_oscillation_pow(m, f, r, q), *r))
        .reduce_with(|a, b| match a.0.cmp(&b.0) {
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Equal => std::cmp::min_by_key(a, b, |x| x.1),
        })
        .expect("every window has an admissible trapezoid");
    Ok(BmoReport { q, power, witness })
}

/// `m({x ∈ R : |f(x) - f_R| > t ‖f‖_BMO1}) / m(R)` for each `t`.
pub fn jn_distribution(
    m: &FlowMeasure,
    f: &VertexFunction,
    r: &Trapezoid,
    t_grid: &[Q],
    cfg: FamilyConfig,
) -> Result<Vec<(Q, Q)>> {
    let bmo = bmo_norm(m, f, 1, cfg)?.power;
    jn_distribution_with(m, f, r, t_grid, &bmo)
}

fn jn_distribution_with(
    m: &FlowMeasure,
    f: &VertexFunction,
    r: &Trapezoid,
    t_grid: &[Q],
    bmo: &Q,
) -> Result<Vec<(Q, Q)>> {
    if f.is_constant() {
        return Err(Error::ConstantFunction);
    }
    let w = m.window();
    let mass = r.mass(m)?;
    let avg = maximal::average(m, f, r);
    let deviations: Vec<(Q, &Q)> = r.iter_members(w).map(|v| ((f.get(v) - &avg).abs(), m.mass(v))).collect();
    Ok(t_grid
        .iter()
        .map(|t| {
            let level = t * bmo;
            let above: Q = deviations.iter().filter(|(d, _)| *d > level).map(|(_, mv)| (*mv).clone()).sum();
            (t.clone(), above / &mass)
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct JnFit {
    pub eta: f64,
    pub a: f64,
    /// Fewer than two distinct positive samples, or a non-negative slope.
    pub degenerate: bool,
    /// Every `(t, ratio)` sampled, over all functions and trapezoids.
    #[serde(skip)]
    pub samples: Vec<(Q, Q)>,
}

impl JnFit {
    /// `ratio <= A e^{-eta t}` at every sample.
    pub fn dominates_samples(&self) -> bool {
        self.samples.iter().all(|(t, r)| rational::to_f64(r) <= self.a * (-self.eta * rational::to_f64(t)).exp())
    }
}

/// Least-squares fit of `log ratio ≈ log A - eta t` over every admissible
/// trapezoid of the window and every function of the corpus, with `A`
/// raised until it dominates all samples.
pub fn jn_fit(m: &FlowMeasure, corpus: &[VertexFunction], t_grid: &[Q], cfg: FamilyConfig) -> Result<JnFit> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let family = trapezoid::all_admissible(m.window(), cfg.beta);
    let mut samples = Vec::new();
    for f in corpus {
        let bmo = bmo_norm(m, f, 1, cfg)?.power;
        let per_set: Vec<Vec<(Q, Q)>> =
            family.par_iter().map(|r| jn_distribution_with(m, f, r, t_grid, &bmo)).collect::<Result<_>>()?;
        samples.extend(per_set.into_iter().flatten());
    }
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, r)| r.is_positive())
        .map(|(t, r)| (rational::to_f64(t), rational::to_f64(r).ln()))
        .collect();
    let fitted = measure::least_squares(&points).filter(|(slope, _)| *slope < 0.0);
    let (eta, degenerate) = match fitted {
        Some((slope, _)) => (-slope, false),
        None => (0.0, true),
    };
    let intercept = fitted.map(|(_, b)| b.exp()).unwrap_or(1.0);
    let a = points.iter().map(|(t, lr)| (lr + eta * t).exp()).fold(intercept.max(1.0), f64::max);
    Ok(JnFit { eta, a, degenerate, samples })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub support: Trapezoid,
    pub values: VertexFunction,
    /// Integer size exponent; `None` is `p = ∞`.
    pub p: Option<u32>,
}

impl Atom {
    pub fn new(support: Trapezoid, values: VertexFunction, p: Option<&Q>) -> Result<Self> {
        let p = p.map(|p| rational::integer_exponent(p, 2)).transpose()?;
        Ok(Atom { support, values, p })
    }

    pub fn infinite(support: Trapezoid, values: VertexFunction) -> Self {
        Atom { support, values, p: None }
    }
}

/// Support, vanishing integral and size, all exact.
pub fn validate_atom(m: &FlowMeasure, a: &Atom) -> bool {
    let w = m.window();
    let Ok(mass) = a.support.mass(m) else { return false };
    if a.values.len() != w.len() || !a.values.support().all(|v| a.support.contains(w, v)) {
        return false;
    }
    if !a.values.integral(m).is_zero() {
        return false;
    }
    match a.p {
        None => a.values.sup_norm() * mass <= rational::one(),
        Some(p) => a.values.lp_norm_pow(m, p) * rational::pow(&mass, p - 1) <= rational::one(),
    }
}

#[derive(Clone, Debug)]
pub struct UpgradeRound {
    /// Stopping sets `R_{j_n}` produced in this round.
    pub sets: Vec<Trapezoid>,
    /// `‖Σ f_{j_n}‖_1` for `b = m(Q) a`.
    pub residual_l1: Q,
    /// `Σ m(R_{j_n}) <= 2^{p(n-1)} α^{-np} ‖b‖_p^p`.
    pub mass_ok: bool,
    /// Each coefficient of the previous round is at most `C~^{1/p} α^n m(R)`.
    pub coefficients_ok: bool,
    /// `residual^p <= C~ (2 α^n 2^{p(n-1)} α^{-np} ‖b‖_p^p)^p`.
    pub residual_ok: bool,
    /// Partial atomic sum plus residual reproduces `b`.
    pub reconstruction_ok: bool,
    /// `α^p residual_n <= 2^p residual_{n-1}`, from the second round on.
    pub shrink_ok: bool,
}

#[derive(Clone, Debug)]
pub struct AtomicDecomposition {
    pub coefficients: Vec<Q>,
    pub atoms: Vec<Atom>,
    pub residual: VertexFunction,
    pub residual_l1: Q,
    pub rounds: Vec<UpgradeRound>,
}

impl AtomicDecomposition {
    /// `Σ |λ_j|`, the empirical `A_p` for this atom.
    pub fn coefficient_sum(&self) -> Q {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }

    pub fn reconstruct(&self) -> VertexFunction {
        let mut total = self.residual.clone();
        for (c, a) in self.coefficients.iter().zip(&self.atoms) {
            total = &total + &a.values.scale(c);
        }
        total
    }

    pub fn rounds_ok(&self) -> bool {
        self.rounds
            .iter()
            .all(|r| r.mass_ok && r.coefficients_ok && r.residual_ok && r.reconstruction_ok && r.shrink_ok)
    }
}

/// Rewrite a `(1,p)`-atom as `Σ λ_j a_j + residual` with `(1,∞)`-atoms
/// `a_j`, running `rounds` stages of the stopping construction.
pub fn atom_upgrade(
    m: &FlowMeasure,
    a: &Atom,
    alpha: &Q,
    rounds: u32,
    cfg: FamilyConfig,
) -> Result<AtomicDecomposition> {
    let p = a.p.ok_or_else(|| Error::NonIntegerExponent("inf".into()))?;
    if p < 2 {
        return Err(Error::NonIntegerExponent(p.to_string()));
    }
    let w = m.window();
    let ct = trapezoid::c_tilde_of(m, cfg);
    let two = rational::q(2);
    let alpha_p = rational::pow(alpha, p);
    // α > 2^{p/(p-1)} and α > 2 C~^{1/p}
    if rational::pow(alpha, p - 1) <= rational::pow(&two, p) || alpha_p <= rational::pow(&two, p) * &ct {
        return Err(Error::AlphaTooSmall(rational::format(alpha)));
    }
    if !validate_atom(m, a) {
        return Err(Error::PreconditionViolated("input is not a valid atom".into()));
    }
    let q_mass = a.support.mass_unchecked(m);
    let b = a.values.scale(&q_mass);
    let b_pp = b.lp_norm_pow(m, p);

    let mut pieces = vec![(a.support, b.clone())];
    let mut partial = VertexFunction::zero(w.len());
    let mut coefficients = Vec::new();
    let mut atoms = Vec::new();
    let mut round_reports: Vec<UpgradeRound> = Vec::new();
    for n in 1..=rounds {
        let threshold = rational::pow(alpha, n * p);
        let mut next = Vec::new();
        let mut coefficients_ok = true;
        let level_bound = &ct * rational::pow(alpha, n * p);
        for (r, f) in &pieces {
            let fam = czd::stopping_sets(m, &f.abs_pow(p), r, &threshold, cfg)?;
            let mut g = f.clone();
            for e in fam.sets {
                let mean = maximal::average(m, f, &e);
                let mut piece = VertexFunction::zero(w.len());
                for v in e.iter_members(w) {
                    piece.set(v, f.get(v) - &mean);
                    g.set(v, mean.clone());
                }
                next.push((e, piece));
            }
            if g.is_zero() {
                continue;
            }
            let sup = g.sup_norm();
            coefficients_ok &= rational::pow(&sup, p) <= level_bound;
            let mass = r.mass_unchecked(m);
            let lambda = &sup * &mass;
            partial = &partial + &g;
            atoms.push(Atom::infinite(*r, g.scale(&(rational::one() / &lambda))));
            coefficients.push(lambda / &q_mass);
        }
        let mut residual = VertexFunction::zero(w.len());
        for (_, f) in &next {
            residual = &residual + f;
        }
        let residual_l1 = residual.l1_norm(m);
        let set_mass: Q = next.iter().map(|(e, _)| e.mass_unchecked(m)).sum();
        let mass_bound = rational::pow(&two, p * (n - 1)) * &b_pp / rational::pow(alpha, n * p);
        let residual_scale = &two * rational::pow(alpha, n) * &mass_bound;
        let shrink_ok = match round_reports.last() {
            Some(prev) => &residual_l1 * &alpha_p <= rational::pow(&two, p) * &prev.residual_l1,
            None => true,
        };
        round_reports.push(UpgradeRound {
            sets: next.iter().map(|(e, _)| *e).collect(),
            mass_ok: set_mass <= mass_bound,
            coefficients_ok,
            residual_ok: rational::pow(&residual_l1, p) <= &ct * rational::pow(&residual_scale, p),
            reconstruction_ok: &partial + &residual == b,
            shrink_ok,
            residual_l1,
        });
        pieces = next;
    }
    let mut residual = VertexFunction::zero(w.len());
    for (_, f) in &pieces {
        residual = &residual + f;
    }
    let residual = residual.scale(&(rational::one() / &q_mass));
    let residual_l1 = residual.l1_norm(m);
    Ok(AtomicDecomposition { coefficients, atoms, residual, residual_l1, rounds: round_reports })
}

/// Split a `(1,∞)`-atom supported in a band that is too tall for `beta`
/// into multiples of `(1,∞)`-atoms supported in `beta`-admissible sets.
/// The coefficients sum to the returned total; pieces sum to `a`.
pub fn atom_rebase(m: &FlowMeasure, a: &Atom, beta: u32) -> Result<Vec<(Q, Atom)>> {
    FamilyConfig::new(beta)?;
    if a.p.is_some() || !validate_atom(m, a) {
        return Err(Error::PreconditionViolated("input is not a valid (1,inf)-atom".into()));
    }
    if a.support.is_admissible(beta) {
        return Err(Error::NotRebaseNeeded);
    }
    let Shape::Band { start, end } = a.support.shape else { return Err(Error::NotRebaseNeeded) };
    if end < 2 * start {
        return Err(Error::InvalidTrapezoid(a.support.to_string()));
    }
    let w = m.window();
    let x = a.support.root;
    let lower = Trapezoid::band(x, start, 2 * start)?;
    let upper = Trapezoid::band(x, 2 * start, end)?;
    let t = Trapezoid::band(x, 2 * start, 4 * start)?;
    let targets = [Trapezoid::band(x, start, 4 * start)?, upper];
    let t_mass = t.mass(m)?;
    let mut out = Vec::new();
    for (part, target) in [lower, upper].iter().zip(targets) {
        let restricted = a.values.restrict(w, part);
        let shift = restricted.integral(m) / &t_mass;
        let mut phi = restricted;
        for v in t.iter_members(w) {
            phi.set(v, phi.get(v) - &shift);
        }
        let atom = Atom::infinite(target, phi.scale(&rational::ratio(1, 2)));
        if target.is_admissible(beta) {
            out.push((rational::q(2), atom));
        } else {
            for (c, piece) in atom_rebase(m, &atom, beta)? {
                out.push((c * rational::q(2), piece));
            }
        }
    }
    Ok(out)
}

/// `∫ f a dm`.
pub fn duality_pairing(m: &FlowMeasure, f: &VertexFunction, a: &Atom) -> Q {
    a.values.support().map(|v| f.get(v) * a.values.get(v) * m.mass(v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::rational::{q, ratio};
    use crate::tree::VertexId;

    fn cfg() -> FamilyConfig {
        FamilyConfig::default()
    }

    #[test]
    fn bmo_examples() {
        let m = generate::homogeneous_flow(2, 3, 0).unwrap();
        let w = m.window();
        assert!(bmo_norm(&m, &VertexFunction::constant(w.len(), q(3)), 1, cfg()).unwrap().power.is_zero());
        let v = w.row(0)[0];
        let f = VertexFunction::indicator(w.len(), [v]);
        let pair = Trapezoid::band(w.parent(v).unwrap(), 1, 2).unwrap();
        assert_eq!(mean_oscillation_pow(&m, &f, &pair, 1), ratio(1, 2));
        assert!(bmo_norm(&m, &f, 1, cfg()).unwrap().power >= ratio(1, 2));
    }

    #[test]
    fn bmo_comparisons_and_invariance() {
        for seed in 0..10 {
            let m = generate::random_flow(3, seed, 1, -3).unwrap();
            let f = generate::random_function(m.window(), seed, 0.4);
            let one = bmo_norm(&m, &f, 1, cfg()).unwrap();
            let two = bmo_norm(&m, &f, 2, cfg()).unwrap();
            assert!(rational::pow(&one.power, 2) <= two.power);

            let sharp = maximal::sharp_maximal(&m, &f, cfg());
            assert_eq!(sharp.max(), one.power);

            let shifted = f.map(|x| x + ratio(7, 3));
            assert_eq!(bmo_norm(&m, &shifted, 1, cfg()).unwrap().power, one.power);
            let scaled = bmo_norm(&m, &f.scale(&q(-5)), 1, cfg()).unwrap();
            assert_eq!(scaled.power, &one.power * q(5));
            assert_eq!(scaled.witness, one.witness);
        }
    }

    #[test]
    fn jn_examples() {
        let m = generate::homogeneous_flow(2, 4, 0).unwrap();
        let w = m.window();
        let f = generate::random_function(w, 3, 0.5);
        let r = Trapezoid::band(w.apex(), 1, 4).unwrap();
        let grid: Vec<Q> = (0..12).map(|k| ratio(k, 2)).collect();
        let dist = jn_distribution(&m, &f, &r, &grid, cfg()).unwrap();
        assert!(dist.iter().all(|(_, x)| *x <= q(1)));
        assert!(dist.windows(2).all(|p| p[1].1 <= p[0].1));
        let bmo = bmo_norm(&m, &f, 1, cfg()).unwrap().power;
        let avg = maximal::average(&m, &f, &r);
        let spread = r.iter_members(w).map(|v| (f.get(v) - &avg).abs()).max().unwrap();
        let t = spread / bmo + q(1);
        assert!(jn_distribution(&m, &f, &r, &[t], cfg()).unwrap()[0].1.is_zero());
        assert_eq!(
            jn_distribution(&m, &VertexFunction::constant(w.len(), q(1)), &r, &grid, cfg()),
            Err(Error::ConstantFunction)
        );
    }

    #[test]
    fn jn_fit_corpus() {
        let m = generate::homogeneous_flow(2, 4, 0).unwrap();
        let w = m.window();
        let corpus: Vec<_> = w.row(1).iter().map(|&v| VertexFunction::indicator(w.len(), w.tent(v))).collect();
        let grid: Vec<Q> = (0..16).map(|k| ratio(k, 4)).collect();
        let fit = jn_fit(&m, &corpus, &grid, cfg()).unwrap();
        assert!(fit.eta > 0.0 && !fit.degenerate);
        assert!(fit.dominates_samples());
        let scaled: Vec<_> = corpus.iter().map(|f| f.scale(&q(10))).collect();
        let again = jn_fit(&m, &scaled, &grid, cfg()).unwrap();
        assert_eq!((again.eta, again.a), (fit.eta, fit.a));
        assert!(matches!(jn_fit(&m, &[], &grid, cfg()), Err(Error::EmptyCorpus)));
    }

    fn two_point_atom(m: &FlowMeasure, r: Trapezoid, e1: VertexId, e2: VertexId, c: Q) -> VertexFunction {
        let mut f = VertexFunction::zero(m.window().len());
        f.set(e1, &c / m.mass(e1));
        f.set(e2, -&c / m.mass(e2));
        assert!(r.contains(m.window(), e1) && r.contains(m.window(), e2));
        f
    }

    #[test]
    fn validate_examples() {
        let m = generate::homogeneous_flow(2, 4, 0).unwrap();
        let w = m.window();
        let r = Trapezoid::band(w.apex(), 1, 4).unwrap();
        let (e1, e2) = (w.row(1)[0], w.row(2)[1]);
        assert!(validate_atom(&m, &Atom::infinite(r, VertexFunction::zero(w.len()))));
        let mass = r.mass(&m).unwrap();
        // |a| = c / m(E_i) must stay below 1/m(R)
        let ok = two_point_atom(&m, r, e1, e2, ratio(1, 2) / &mass);
        assert!(validate_atom(&m, &Atom::infinite(r, ok)));
        let big = two_point_atom(&m, r, e1, e2, ratio(5, 2) / &mass);
        assert!(!validate_atom(&m, &Atom::infinite(r, big)));
        let lopsided = VertexFunction::indicator(w.len(), [e1]).scale(&(q(1) / &mass));
        assert!(!validate_atom(&m, &Atom::infinite(r, lopsided)));
        let mut outside = VertexFunction::zero(w.len());
        outside.set(w.apex(), ratio(1, 1600));
        outside.set(e2, ratio(-1, 100));
        assert!(!validate_atom(&m, &Atom::infinite(r, outside)));
    }

    #[test]
    fn upgrade_examples() {
        let m = generate::homogeneous_flow(2, 8, 0).unwrap();
        let w = m.window();
        let x = w.row(7)[0];
        let r = Trapezoid::band(x, 1, 8).unwrap();
        assert_eq!(r.mass(&m).unwrap(), q(896));
        let leaves = w.slice(x, 7);
        let (e1, e2) = (leaves[0], leaves[leaves.len() - 1]);
        // ‖a‖_2^2 = 2c^2 <= 1/m(Q)
        let values = two_point_atom(&m, r, e1, e2, ratio(1, 43));
        let a = Atom::new(r, values, Some(&q(2))).unwrap();
        assert!(validate_atom(&m, &a));
        let dec = atom_upgrade(&m, &a, &q(8), 3, cfg()).unwrap();
        assert!(dec.rounds_ok());
        assert_eq!(dec.reconstruct(), a.values);
        assert!(dec.atoms.iter().all(|x| validate_atom(&m, x)));
        assert!(!dec.rounds[0].sets.is_empty());
        assert_eq!(dec.rounds[0].residual_l1, a.values.l1_norm(&m) * q(896));
        assert!(dec.rounds[1..].iter().all(|r| r.residual_l1.is_zero()));

        let zero = Atom::new(r, VertexFunction::zero(w.len()), Some(&q(2))).unwrap();
        let dec = atom_upgrade(&m, &zero, &q(8), 2, cfg()).unwrap();
        assert!(dec.atoms.is_empty() && dec.residual.is_zero());

        assert!(matches!(atom_upgrade(&m, &a, &q(4), 1, cfg()), Err(Error::AlphaTooSmall(_))));
        assert!(matches!(Atom::new(r, a.values.clone(), Some(&ratio(5, 2))), Err(Error::NonIntegerExponent(_))));
    }

    #[test]
    fn upgrade_random_atoms() {
        for seed in 0..10 {
            let m = generate::random_flow(2, seed, 2, -5).unwrap();
            let w = m.window();
            let r = Trapezoid::band(w.apex(), 1, 7).unwrap();
            let mut members: Vec<_> = r.iter_members(w).collect();
            members.sort_by(|a, b| m.mass(*a).cmp(m.mass(*b)));
            let (e1, e2) = (members[0], members[1]);
            let mass = r.mass(&m).unwrap();
            let c2 = m.mass(e1) * m.mass(e2) / ((m.mass(e1) + m.mass(e2)) * &mass);
            let mut k = rational::to_f64(&(q(1) / &c2)).sqrt().ceil() as i64;
            while rational::pow(&ratio(1, k), 2) > c2 {
                k += 1;
            }
            let a = Atom::new(r, two_point_atom(&m, r, e1, e2, ratio(1, k)), Some(&q(2))).unwrap();
            assert!(validate_atom(&m, &a));
            let ct = trapezoid::c_tilde_of(&m, cfg());
            let alpha = q(rational::ceil(&(ct * q(4))).to_string().parse::<i64>().unwrap().max(5));
            let dec = atom_upgrade(&m, &a, &alpha, 3, cfg()).unwrap();
            assert!(dec.rounds_ok(), "seed {seed}");
            assert_eq!(dec.reconstruct(), a.values);
            assert!(dec.atoms.iter().all(|x| validate_atom(&m, x)));
        }
    }

    #[test]
    fn rebase_examples() {
        let m = generate::homogeneous_flow(1, 3, -25).unwrap();
        let w = m.window();
        let x = w.row(-1)[0];
        let r = Trapezoid::band(x, 1, 20).unwrap();
        let (e1, e2) = (w.row(-2)[0], w.row(-15)[0]);
        let mass = r.mass(&m).unwrap();
        let a = Atom::infinite(r, two_point_atom(&m, r, e1, e2, ratio(1, 1) / &mass));
        assert!(validate_atom(&m, &a));
        let pieces = atom_rebase(&m, &a, 12).unwrap();
        let supports: Vec<_> = pieces.iter().map(|(_, p)| p.support).collect();
        assert_eq!(supports, vec![Trapezoid::band(x, 1, 4).unwrap(), Trapezoid::band(x, 2, 20).unwrap()]);
        let mut total = VertexFunction::zero(w.len());
        for (c, p) in &pieces {
            assert!(validate_atom(&m, p) && p.support.is_admissible(12));
            total = &total + &p.values.scale(c);
        }
        assert_eq!(total, a.values);
        assert_eq!(pieces.iter().map(|(c, _)| c.clone()).sum::<Q>(), q(4));

        let small = Atom::infinite(Trapezoid::band(x, 1, 12).unwrap(), VertexFunction::zero(w.len()));
        assert_eq!(atom_rebase(&m, &small, 12), Err(Error::NotRebaseNeeded));

        let tall = Trapezoid::band(w.apex(), 1, 23).unwrap();
        let tall_mass = tall.mass(&m).unwrap();
        let a = Atom::infinite(tall, two_point_atom(&m, tall, w.row(2)[0], w.row(-19)[0], ratio(1, 1) / &tall_mass));
        let pieces = atom_rebase(&m, &a, 12).unwrap();
        let mut total = VertexFunction::zero(w.len());
        for (c, p) in &pieces {
            assert!(validate_atom(&m, p) && p.support.is_admissible(12));
            total = &total + &p.values.scale(c);
        }
        assert_eq!(total, a.values);
    }

    #[test]
    fn pairing_bound() {
        for seed in 0..20 {
            let m = generate::random_flow(3, seed, 1, -3).unwrap();
            let w = m.window();
            let f = generate::random_function(w, seed + 1, 0.5);
            let bmo = bmo_norm(&m, &f, 1, cfg()).unwrap().power;
            for r in trapezoid::all_admissible(w, 12).iter().filter(|r| r.size(w) >= 2).step_by(5) {
                let members: Vec<_> = r.iter_members(w).collect();
                let mass = r.mass(&m).unwrap();
                let (e1, e2) = (members[0], members[members.len() - 1]);
                let c = m.mass(e1).min(m.mass(e2)) / &mass;
                let values = two_point_atom(&m, *r, e1, e2, c);
                let a = Atom::infinite(*r, values);
                assert!(validate_atom(&m, &a));
                assert!(duality_pairing(&m, &f, &a).abs() <= bmo);
                assert!(duality_pairing(&m, &VertexFunction::constant(w.len(), q(4)), &a).is_zero());
            }
        }
    }
}
