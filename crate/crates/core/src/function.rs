//! Exact rational functions on the vertices of a window.

use std::ops::{Add, Sub};

use num::{Signed, Zero};

use crate::measure::FlowMeasure;
use crate::rational::{self, Q};
use crate::trapezoid::Trapezoid;
use crate::tree::{TreeWindow, VertexId};

/// Dense storage, zero by default; serialized sparsely.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexFunction {
    values: Vec<Q>,
}

impl VertexFunction {
    pub fn zero(len: usize) -> Self {
        VertexFunction { values: vec![Q::zero(); len] }
    }

    pub fn constant(len: usize, c: Q) -> Self {
        VertexFunction { values: vec![c; len] }
    }

    pub fn from_values(values: Vec<Q>) -> Self {
        VertexFunction { values }
    }

    pub fn indicator(len: usize, set: impl IntoIterator<Item = VertexId>) -> Self {
        let mut f = Self::zero(len);
        for v in set {
            f.values[v.index()] = rational::one();
        }
        f
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, v: VertexId) -> &Q {
        &self.values[v.index()]
    }

    pub fn set(&mut self, v: VertexId, value: Q) {
        self.values[v.index()] = value;
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.values.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, _)| VertexId::new(i))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    pub fn map(&self, g: impl Fn(&Q) -> Q) -> Self {
        VertexFunction { values: self.values.iter().map(g).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(|x| x.abs())
    }

    pub fn abs_pow(&self, p: u32) -> Self {
        self.map(|x| rational::pow(&x.abs(), p))
    }

    pub fn scale(&self, k: &Q) -> Self {
        self.map(|x| x * k)
    }

    pub fn sup_norm(&self) -> Q {
        self.values.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero)
    }

    /// `∫ f dm`.
    pub fn integral(&self, m: &FlowMeasure) -> Q {
        self.values.iter().zip(m.masses()).filter(|(f, _)| !f.is_zero()).map(|(f, w)| f * w).sum()
    }

    /// `∫ |f| dm`.
    pub fn l1_norm(&self, m: &FlowMeasure) -> Q {
        self.values.iter().zip(m.masses()).filter(|(f, _)| !f.is_zero()).map(|(f, w)| f.abs() * w).sum()
    }

    /// `∫ |f|^p dm`.
    pub fn lp_norm_pow(&self, m: &FlowMeasure, p: u32) -> Q {
        self.values
            .iter()
            .zip(m.masses())
            .filter(|(f, _)| !f.is_zero())
            .map(|(f, w)| rational::pow(&f.abs(), p) * w)
            .sum()
    }

    /// `f·χ_R`.
    pub fn restrict(&self, w: &TreeWindow, r: &Trapezoid) -> Self {
        let mut out = Self::zero(self.len());
        for v in r.iter_members(w) {
            out.values[v.index()] = self.values[v.index()].clone();
        }
        out
    }
}

impl Add for &VertexFunction {
    type Output = VertexFunction;
    fn add(self, rhs: &VertexFunction) -> VertexFunction {
        VertexFunction { values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &VertexFunction {
    type Output = VertexFunction;
    fn sub(self, rhs: &VertexFunction) -> VertexFunction {
        VertexFunction { values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect() }
    }
}

/// Per-level prefix sums of a vertex weight, so that the integral over any
/// trapezoid costs one subtraction per level it spans.
#[derive(Clone, Debug)]
pub struct BandSums {
    bottom: i64,
    prefix: Vec<Vec<Q>>,
}

impl BandSums {
    pub fn new(w: &TreeWindow, weight: impl Fn(VertexId) -> Q) -> Self {
        let prefix = (w.bottom()..=w.top())
            .map(|l| {
                let mut acc = Q::zero();
                let mut row = Vec::with_capacity(w.row(l).len() + 1);
                row.push(acc.clone());
                for &v in w.row(l) {
                    acc += weight(v);
                    row.push(acc.clone());
                }
                row
            })
            .collect();
        BandSums { bottom: w.bottom(), prefix }
    }

    /// Weights `f·m`, so [`BandSums::sum`] is `∫_R f dm`.
    pub fn integral_of(m: &FlowMeasure, f: &VertexFunction) -> Self {
        Self::new(m.window(), |v| f.get(v) * m.mass(v))
    }

    /// Weights `|f|·m`.
    pub fn abs_integral_of(m: &FlowMeasure, f: &VertexFunction) -> Self {
        Self::new(m.window(), |v| f.get(v).abs() * m.mass(v))
    }

    /// Sum of the weight over the members of `r` (which must fit the window).
    pub fn sum(&self, w: &TreeWindow, r: &Trapezoid) -> Q {
        let mut total = Q::zero();
        for d in r.depths() {
            let (a, b) = w.span(r.root, d).expect("trapezoid fits the window");
            let row = &self.prefix[(w.level(r.root) - d as i64 - self.bottom) as usize];
            total += &row[b] - &row[a];
        }
        total
    }
}
