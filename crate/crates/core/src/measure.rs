//! Flow measures and the growth diagnostics built on them.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::tree::{TreeWindow, VertexId};

/// Strictly positive vertex masses with `m(x) = Σ_{y ∈ s(x)} m(y)`.
#[derive(Clone, Debug)]
pub struct FlowMeasure {
    window: Arc<TreeWindow>,
    mass: Vec<Q>,
}

/// `(lower, ratio, upper)` for `m(B_2r) / m(B_r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallRatio {
    pub lower: Q,
    pub ratio: Q,
    pub upper: Q,
}

impl BallRatio {
    pub fn holds(&self) -> bool {
        self.lower <= self.ratio && self.ratio <= self.upper
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingReport {
    /// Least `c` with `m(x) <= c m(y)` on every edge.
    #[serde(serialize_with = "crate::spec_io::ser_q")]
    pub c_upper: Q,
    /// `m(x) >= c/(c-1) m(y)` at every branching vertex, for `c = c_upper`.
    pub lower_ok: bool,
    pub max_degree: usize,
    /// Largest number of branching vertices on an apex-to-leaf chain.
    pub branch_count_max: usize,
    /// Largest number of branching vertices on the path joining two leaves.
    pub branch_count_pair_max: usize,
    /// Slope of `ln m(x_r)` against `r` up the spine.
    pub growth_alpha: f64,
    /// `c/(c-1)`; absent when `c_upper = 1` (no branching at all).
    #[serde(serialize_with = "crate::spec_io::ser_opt_q")]
    pub k_gain: Option<Q>,
}

impl FlowMeasure {
    /// Upward summation from the bottom-level masses.
    pub fn from_leaf_masses(window: Arc<TreeWindow>, leaf_mass: &BTreeMap<VertexId, Q>) -> Result<Self> {
        let mut mass = vec![Q::zero(); window.len()];
        for &v in window.row(window.bottom()) {
            let m = leaf_mass.get(&v).ok_or(Error::MissingLeaf(v.index()))?;
            if !m.is_positive() {
                return Err(Error::NonPositiveMass(v.index()));
            }
            mass[v.index()] = m.clone();
        }
        if let Some(v) = leaf_mass.keys().find(|v| v.index() >= window.len() || !window.is_leaf(**v)) {
            return Err(Error::InvalidTree(format!("leaf mass given for non-leaf vertex {v}")));
        }
        for l in window.bottom() + 1..=window.top() {
            for &v in window.row(l) {
                let s: Q = window.children(v).iter().map(|c| &mass[c.index()]).sum();
                mass[v.index()] = s;
            }
        }
        Ok(FlowMeasure { window, mass })
    }

    /// Unit leaf masses.
    pub fn counting_leaves(window: Arc<TreeWindow>) -> Self {
        let leaves = window.row(window.bottom()).iter().map(|&v| (v, rational::one())).collect();
        Self::from_leaf_masses(window, &leaves).expect("unit leaves form a flow")
    }

    /// Arbitrary masses with no checking; see [`FlowMeasure::validate_flow`].
    pub fn from_raw_masses(window: Arc<TreeWindow>, mass: Vec<Q>) -> Result<Self> {
        if mass.len() != window.len() {
            return Err(Error::InvalidParams(format!("{} masses for {} vertices", mass.len(), window.len())));
        }
        Ok(FlowMeasure { window, mass })
    }

    pub fn window(&self) -> &TreeWindow {
        &self.window
    }

    pub fn window_arc(&self) -> &Arc<TreeWindow> {
        &self.window
    }

    #[inline]
    pub fn mass(&self, v: VertexId) -> &Q {
        &self.mass[v.index()]
    }

    pub fn masses(&self) -> &[Q] {
        &self.mass
    }

    pub fn total(&self) -> &Q {
        self.mass(self.window.apex())
    }

    pub fn set_mass<'a>(&self, set: impl IntoIterator<Item = &'a VertexId>) -> Q {
        set.into_iter().map(|v| self.mass(*v)).sum()
    }

    /// First vertex breaking positivity or the flow sum, if any.
    pub fn flow_violation(&self) -> Option<VertexId> {
        self.window.vertices().find(|&v| {
            if !self.mass(v).is_positive() {
                return true;
            }
            let kids = self.window.children(v);
            !kids.is_empty() && kids.iter().map(|c| self.mass(*c)).sum::<Q>() != *self.mass(v)
        })
    }

    pub fn validate_flow(&self) -> bool {
        self.flow_violation().is_none()
    }

    /// `m(S_r(x0)) = m(x_{r-1}) + m(x_r)` (just `m(x0)` for `r = 0`).
    pub fn sphere_mass(&self, x0: VertexId, r: u32) -> Result<Q> {
        check_fit(&self.window, x0, r)?;
        let chain = self.window.predecessor_chain(x0, r)?;
        Ok(match r {
            0 => self.mass(x0).clone(),
            _ => self.mass(chain[r as usize - 1]) + self.mass(chain[r as usize]),
        })
    }

    /// `m(B_r(x0)) = 2 Σ_{j<r} m(x_j) + m(x_r)`.
    pub fn ball_mass(&self, x0: VertexId, r: u32) -> Result<Q> {
        check_fit(&self.window, x0, r)?;
        let chain = self.window.predecessor_chain(x0, r)?;
        let below: Q = chain[..r as usize].iter().map(|v| self.mass(*v)).sum();
        Ok(below * rational::q(2) + self.mass(chain[r as usize]))
    }

    pub fn ball_ratio_bounds(&self, x0: VertexId, r: u32) -> Result<BallRatio> {
        let big = self.ball_mass(x0, 2 * r)?;
        let small = self.ball_mass(x0, r)?;
        let chain = self.window.predecessor_chain(x0, 2 * r)?;
        let m_r = self.mass(chain[r as usize]);
        let m_2r = self.mass(chain[2 * r as usize]);
        let r = r as i64;
        Ok(BallRatio {
            lower: m_2r / (m_r * rational::q(2 * r + 1)),
            ratio: big / small,
            upper: rational::q(4 * r + 1) * m_2r / m_r,
        })
    }

    /// `m(∂B) / m(B)` for `B = B_r^-(x0)`, where a vertex is on the boundary
    /// when some neighbour lies outside `B`. Leaves count as having (cut)
    /// sons and the apex as having a (cut) parent, as in the infinite tree.
    pub fn isoperimetric_ratio(&self, x0: VertexId, r: u32) -> Result<Q> {
        let w = &*self.window;
        let ball = w.ball_lower(x0, r)?;
        let boundary = ball.iter().filter(|&&v| {
            let up_out = w.parent(v).is_none_or(|p| !ball.contains(&p));
            let down_out = w.is_leaf(v) || w.children(v).iter().any(|c| !ball.contains(c));
            up_out || down_out
        });
        let num: Q = boundary.map(|v| self.mass(*v)).sum();
        let den: Q = ball.iter().map(|v| self.mass(*v)).sum();
        Ok(num / den)
    }

    /// Number of branching vertices (two or more sons) among `x_1..=x_r`.
    pub fn branching_ancestors(&self, x0: VertexId, r: u32) -> Result<usize> {
        let chain = self.window.predecessor_chain(x0, r)?;
        Ok(chain[1..].iter().filter(|v| self.window.degree(**v) >= 2).count())
    }

    pub fn edge_ratio_max(&self) -> Q {
        self.window
            .vertices()
            .filter_map(|v| self.window.parent(v).map(|p| self.mass(p) / self.mass(v)))
            .max()
            .unwrap_or_else(rational::one)
    }

    pub fn doubling_report(&self) -> DoublingReport {
        let w = &*self.window;
        let c = self.edge_ratio_max();
        let k_gain = (c > rational::one()).then(|| &c / (&c - rational::one()));
        let lower_ok = w.vertices().filter(|&x| w.degree(x) >= 2).all(|x| {
            let k = k_gain.as_ref().expect("a branching vertex forces c > 1");
            w.children(x).iter().all(|y| *self.mass(x) >= k * self.mass(*y))
        });

        // branching vertices on the chain from v up to the apex, inclusive
        let mut up = vec![0usize; w.len()];
        for l in (w.bottom()..=w.top()).rev() {
            for &v in w.row(l) {
                let own = usize::from(w.degree(v) >= 2);
                up[v.index()] = own + w.parent(v).map_or(0, |p| up[p.index()]);
            }
        }
        let leaves = w.row(w.bottom());
        let branch_count_max = leaves.iter().map(|v| up[v.index()]).max().unwrap_or(0);
        let mut branch_count_pair_max = 0;
        for (i, &a) in leaves.iter().enumerate() {
            for &b in &leaves[i + 1..] {
                let z = w.confluent(a, b);
                let own = usize::from(w.degree(z) >= 2);
                let n = up[a.index()] + up[b.index()] + own - 2 * up[z.index()];
                branch_count_pair_max = branch_count_pair_max.max(n);
            }
        }

        let points: Vec<(f64, f64)> =
            w.spine().iter().rev().enumerate().map(|(r, v)| (r as f64, rational::to_f64(self.mass(*v)).ln())).collect();
        let growth_alpha = least_squares(&points).map_or(0.0, |(slope, _)| slope);

        DoublingReport {
            c_upper: c,
            lower_ok,
            max_degree: w.max_degree(),
            branch_count_max,
            branch_count_pair_max,
            growth_alpha,
            k_gain,
        }
    }
}

fn check_fit(w: &TreeWindow, x0: VertexId, r: u32) -> Result<()> {
    let l = w.level(x0);
    if l + r as i64 > w.top() || l - (r as i64) < w.bottom() {
        return Err(Error::OutOfWindow(format!("ball of radius {r} around {x0} is clipped by the window")));
    }
    Ok(())
}

/// Ordinary least squares `y ≈ slope·x + intercept`; `None` when the
/// abscissae are all equal.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx.abs() < 1e-300 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
