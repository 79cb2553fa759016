//! Finite windows of a tree rooted at infinity.
//!
//! A window is the tent of a single apex vertex, cut at a uniform bottom
//! level. Every bottom-level vertex is a leaf standing in for its (cut)
//! infinite subtree. Levels grow towards the root at infinity: a parent sits
//! exactly one level above each of its sons.
//!
//! Vertices of each level are stored in breadth-first order from the apex, so
//! the descendants of any vertex at a fixed depth form a contiguous run of
//! that level. Trapezoids, tents and integrals are all evaluated over those
//! runs.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vertex handle, valid for the lifetime of its [`TreeWindow`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(u32);

impl VertexId {
    pub fn new(index: usize) -> Self {
        VertexId(index as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Input record for [`TreeWindow::new`]; the vertex id is the record index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSpec {
    pub parent: Option<usize>,
    pub level: i64,
    pub on_spine: bool,
}

#[derive(Clone, Debug)]
pub struct TreeWindow {
    parent: Vec<Option<VertexId>>,
    children: Vec<Vec<VertexId>>,
    level: Vec<i64>,
    apex: VertexId,
    bottom: i64,
    top: i64,
    spine: Vec<VertexId>,
    /// `rows[l - bottom]` lists the vertices of level `l` in breadth-first order.
    rows: Vec<Vec<VertexId>>,
    /// Position of each vertex inside its row.
    position: Vec<u32>,
    /// `spans[v][d]` is the half-open run of `rows[level(v) - d - bottom]`
    /// holding the descendants of `v` at depth `d`.
    spans: Vec<Vec<(u32, u32)>>,
}

impl TreeWindow {
    /// Build a window from vertex records. Children keep the input order. If
    /// no vertex is marked `on_spine`, the spine defaults to the first-son
    /// chain below the apex.
    pub fn new(specs: &[VertexSpec]) -> Result<Self> {
        let n = specs.len();
        if n == 0 {
            return Err(Error::InvalidTree("no vertices".into()));
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut apex = None;
        for (i, s) in specs.iter().enumerate() {
            match s.parent {
                None => {
                    if apex.replace(VertexId::new(i)).is_some() {
                        return Err(Error::InvalidTree("more than one vertex without parent".into()));
                    }
                }
                Some(p) => {
                    if p >= n || p == i {
                        return Err(Error::InvalidTree(format!("vertex {i}: bad parent {p}")));
                    }
                    if specs[p].level != s.level + 1 {
                        return Err(Error::InvalidTree(format!(
                            "vertex {i}: level {} but parent {p} has level {}",
                            s.level, specs[p].level
                        )));
                    }
                    parent[i] = Some(VertexId::new(p));
                    children[p].push(VertexId::new(i));
                }
            }
        }
        let apex = apex.ok_or_else(|| Error::InvalidTree("no apex (vertex without parent)".into()))?;
        let level: Vec<i64> = specs.iter().map(|s| s.level).collect();
        let top = level[apex.index()];
        let bottom = *level.iter().min().unwrap();
        if bottom >= top {
            return Err(Error::InvalidTree("window needs at least two levels".into()));
        }
        if let Some(i) = (0..n).find(|&i| level[i] > top) {
            return Err(Error::InvalidTree(format!("vertex {i} lies above the apex")));
        }
        for i in 0..n {
            if level[i] > bottom && children[i].is_empty() {
                return Err(Error::InvalidTree(format!(
                    "vertex {i} at level {} has no sons; leaves must sit on the bottom level {bottom}",
                    level[i]
                )));
            }
        }

        // Breadth-first rows; also proves every vertex hangs below the apex.
        let height = (top - bottom) as usize;
        let mut rows = vec![Vec::new(); height + 1];
        let mut position = vec![u32::MAX; n];
        let mut queue = VecDeque::from([apex]);
        while let Some(v) = queue.pop_front() {
            let row = &mut rows[(level[v.index()] - bottom) as usize];
            position[v.index()] = row.len() as u32;
            row.push(v);
            queue.extend(children[v.index()].iter().copied());
        }
        if let Some(i) = position.iter().position(|&p| p == u32::MAX) {
            return Err(Error::InvalidTree(format!("vertex {i} is not connected to the apex")));
        }

        let mut spans: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for row in rows.iter() {
            for &v in row {
                let depth = (level[v.index()] - bottom) as usize;
                let mut s = Vec::with_capacity(depth + 1);
                let p = position[v.index()];
                s.push((p, p + 1));
                if depth > 0 {
                    let first = children[v.index()][0].index();
                    let last = children[v.index()].last().unwrap().index();
                    s.extend(spans[first].iter().zip(&spans[last]).take(depth).map(|(a, b)| (a.0, b.1)));
                }
                spans[v.index()] = s;
            }
        }

        let marked: Vec<usize> = (0..n).filter(|&i| specs[i].on_spine).collect();
        let spine = if marked.is_empty() {
            let mut chain = vec![apex];
            let mut v = apex;
            while let Some(&c) = children[v.index()].first() {
                chain.push(c);
                v = c;
            }
            chain
        } else {
            let mut chain: Vec<VertexId> = marked.iter().map(|&i| VertexId::new(i)).collect();
            chain.sort_by_key(|v| -level[v.index()]);
            let ok = chain.len() == height + 1
                && chain[0] == apex
                && chain.windows(2).all(|w| parent[w[1].index()] == Some(w[0]));
            if !ok {
                return Err(Error::InvalidTree(
                    "spine must be a parent-son chain from the apex with one vertex per level".into(),
                ));
            }
            chain
        };

        Ok(TreeWindow { parent, children, level, apex, bottom, top, spine, rows, position, spans })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.len()).map(VertexId::new)
    }

    pub fn apex(&self) -> VertexId {
        self.apex
    }

    pub fn top(&self) -> i64 {
        self.top
    }

    pub fn bottom(&self) -> i64 {
        self.bottom
    }

    pub fn height(&self) -> u32 {
        (self.top - self.bottom) as u32
    }

    pub fn spine(&self) -> &[VertexId] {
        &self.spine
    }

    pub fn on_spine(&self, v: VertexId) -> bool {
        let k = (self.top - self.level(v)) as usize;
        self.spine.get(k) == Some(&v)
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v.index()]
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v.index()]
    }

    /// Number of sons, `q(x)`.
    pub fn degree(&self, v: VertexId) -> usize {
        self.children[v.index()].len()
    }

    pub fn max_degree(&self) -> usize {
        self.children.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn level(&self, v: VertexId) -> i64 {
        self.level[v.index()]
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.children[v.index()].is_empty()
    }

    /// Number of levels below `v` inside the window.
    pub fn depth_below(&self, v: VertexId) -> u32 {
        (self.level(v) - self.bottom) as u32
    }

    /// Vertices of level `l`, breadth-first order. Empty outside the window.
    pub fn row(&self, l: i64) -> &[VertexId] {
        if l < self.bottom || l > self.top {
            return &[];
        }
        &self.rows[(l - self.bottom) as usize]
    }

    pub fn position(&self, v: VertexId) -> usize {
        self.position[v.index()] as usize
    }

    /// Half-open index range inside `row(level(v) - d)` of the descendants of
    /// `v` at depth `d`; `None` when that level is below the window.
    pub fn span(&self, v: VertexId, d: u32) -> Option<(usize, usize)> {
        self.spans[v.index()].get(d as usize).map(|&(a, b)| (a as usize, b as usize))
    }

    /// Descendants of `v` at depth exactly `d`.
    pub fn slice(&self, v: VertexId, d: u32) -> &[VertexId] {
        match self.span(v, d) {
            Some((a, b)) => &self.rows[(self.level(v) - d as i64 - self.bottom) as usize][a..b],
            None => &[],
        }
    }

    /// The `k`-th predecessor, if it lies in the window.
    pub fn ancestor(&self, v: VertexId, k: u32) -> Option<VertexId> {
        let mut x = v;
        for _ in 0..k {
            x = self.parent(x)?;
        }
        Some(x)
    }

    /// `true` when `y` is `x` or one of its ancestors (`y >= x`).
    pub fn is_ancestor_or_equal(&self, y: VertexId, x: VertexId) -> bool {
        let dl = self.level(y) - self.level(x);
        dl >= 0 && self.ancestor(x, dl as u32) == Some(y)
    }

    /// `[x_0 = x, x_1, ..., x_k]`.
    pub fn predecessor_chain(&self, x: VertexId, k: u32) -> Result<Vec<VertexId>> {
        let mut chain = Vec::with_capacity(k as usize + 1);
        chain.push(x);
        let mut v = x;
        for j in 0..k {
            v = self
                .parent(v)
                .ok_or_else(|| Error::OutOfWindow(format!("vertex {x} has only {j} predecessors in the window")))?;
            chain.push(v);
        }
        Ok(chain)
    }

    /// Lowest common ancestor `x ∧ y`.
    pub fn confluent(&self, x: VertexId, y: VertexId) -> VertexId {
        let (mut a, mut b) = (x, y);
        while self.level(a) < self.level(b) {
            a = self.parent(a).unwrap();
        }
        while self.level(b) < self.level(a) {
            b = self.parent(b).unwrap();
        }
        while a != b {
            a = self.parent(a).unwrap();
            b = self.parent(b).unwrap();
        }
        a
    }

    pub fn distance(&self, x: VertexId, y: VertexId) -> u32 {
        let z = self.level(self.confluent(x, y));
        ((z - self.level(x)) + (z - self.level(y))) as u32
    }

    /// The tent `V_x = {y <= x}` (always inside the window).
    pub fn tent(&self, x: VertexId) -> BTreeSet<VertexId> {
        (0..=self.depth_below(x)).flat_map(|d| self.slice(x, d).iter().copied()).collect()
    }

    fn check_ball(&self, x0: VertexId, r: u32, upward: bool) -> Result<()> {
        if self.level(x0) - (r as i64) < self.bottom {
            return Err(Error::OutOfWindow(format!("radius {r} around {x0} reaches below the bottom level")));
        }
        if upward && self.level(x0) + (r as i64) > self.top {
            return Err(Error::OutOfWindow(format!("radius {r} around {x0} reaches above the apex")));
        }
        Ok(())
    }

    /// `B_r^-(x0) = {x <= x0 : d(x, x0) <= r}`.
    pub fn ball_lower(&self, x0: VertexId, r: u32) -> Result<BTreeSet<VertexId>> {
        self.check_ball(x0, r, false)?;
        Ok((0..=r).flat_map(|d| self.slice(x0, d).iter().copied()).collect())
    }

    /// `S_r(x0)`, assembled level slice by level slice: the part hanging from
    /// `x_k` at depth `r - k`, minus what already hangs from `x_{k-1}`.
    pub fn sphere(&self, x0: VertexId, r: u32) -> Result<BTreeSet<VertexId>> {
        self.check_ball(x0, r, true)?;
        let chain = self.predecessor_chain(x0, r)?;
        let mut out = BTreeSet::new();
        for k in 0..=r {
            let xk = chain[k as usize];
            let d = r - k;
            let row = self.slice(xk, d);
            if k == 0 || d == 0 {
                out.extend(row.iter().copied());
                continue;
            }
            let (a, _) = self.span(xk, d).unwrap();
            let (ia, ib) = self.span(chain[k as usize - 1], d - 1).unwrap();
            out.extend(row[..ia - a].iter().copied());
            out.extend(row[ib - a..].iter().copied());
        }
        Ok(out)
    }

    pub fn ball(&self, x0: VertexId, r: u32) -> Result<BTreeSet<VertexId>> {
        self.check_ball(x0, r, true)?;
        let mut out = BTreeSet::new();
        for j in 0..=r {
            out.extend(self.sphere(x0, j)?);
        }
        Ok(out)
    }
}
