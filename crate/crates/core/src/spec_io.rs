//! JSON file formats for windows, functions, kernels and atoms.
//!
//! Rationals are written as `"num/den"` strings so files round-trip exactly.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::hardy::Atom;
use crate::measure::FlowMeasure;
use crate::operators::Kernel;
use crate::rational::{self, Q};
use crate::trapezoid::{FamilyConfig, Shape, Trapezoid};
use crate::tree::{TreeWindow, VertexId, VertexSpec};

pub fn ser_q<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rational::format(x))
}

pub fn ser_opt_q<S: Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => s.serialize_str(&rational::format(x)),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Levels {
    pub top: i64,
    pub bottom: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexEntry {
    pub id: u64,
    pub parent: Option<u64>,
    pub level: i64,
    #[serde(default)]
    pub on_spine: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpecFile {
    #[serde(default = "default_beta")]
    pub beta: u32,
    pub levels: Levels,
    pub vertices: Vec<VertexEntry>,
    pub leaf_masses: BTreeMap<u64, String>,
    /// Full mass table; when present it must be a flow matching the leaves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<BTreeMap<u64, String>>,
    /// Generator seed, recorded for randomly grown windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_beta() -> u32 {
    crate::trapezoid::MIN_BETA
}

/// A parsed window with the file's vertex ids.
#[derive(Clone, Debug)]
pub struct LoadedTree {
    pub measure: FlowMeasure,
    pub cfg: FamilyConfig,
    pub ids: Vec<u64>,
    index: HashMap<u64, VertexId>,
}

impl LoadedTree {
    pub fn vertex(&self, id: u64) -> Result<VertexId> {
        self.index.get(&id).copied().ok_or_else(|| Error::Parse(format!("unknown vertex id {id}")))
    }

    pub fn id(&self, v: VertexId) -> u64 {
        self.ids[v.index()]
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("{what}: line {}, column {}: {e}", e.line(), e.column())))
}

fn parse_q(s: &str, id: u64) -> Result<Q> {
    rational::parse(s).map_err(|e| Error::Parse(format!("vertex {id}: {e}")))
}

impl TreeSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text, "tree spec")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree spec serializes")
    }

    pub fn from_measure(m: &FlowMeasure, cfg: FamilyConfig) -> Self {
        let w = m.window();
        let vertices = w
            .vertices()
            .map(|v| VertexEntry {
                id: v.index() as u64,
                parent: w.parent(v).map(|p| p.index() as u64),
                level: w.level(v),
                on_spine: w.on_spine(v),
            })
            .collect();
        let leaf_masses =
            w.vertices().filter(|&v| w.is_leaf(v)).map(|v| (v.index() as u64, rational::format(m.mass(v)))).collect();
        TreeSpecFile {
            beta: cfg.beta,
            levels: Levels { top: w.top(), bottom: w.bottom() },
            vertices,
            leaf_masses,
            masses: None,
            seed: None,
        }
    }

    pub fn load(&self) -> Result<LoadedTree> {
        let cfg = FamilyConfig::new(self.beta)?;
        let mut index = HashMap::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if index.insert(v.id, VertexId::new(i)).is_some() {
                return Err(Error::InvalidTree(format!("duplicate vertex id {}", v.id)));
            }
        }
        let lookup =
            |id: u64| index.get(&id).copied().ok_or_else(|| Error::InvalidTree(format!("unknown vertex id {id}")));
        let specs = self
            .vertices
            .iter()
            .map(|v| {
                Ok(VertexSpec {
                    parent: v.parent.map(lookup).transpose()?.map(VertexId::index),
                    level: v.level,
                    on_spine: v.on_spine,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let window = TreeWindow::new(&specs).map_err(|e| match e {
            Error::InvalidTree(msg) => Error::InvalidTree(rename_vertices(&msg, &self.vertices)),
            other => other,
        })?;
        if window.top() != self.levels.top || window.bottom() != self.levels.bottom {
            return Err(Error::InvalidTree(format!(
                "levels say top {} bottom {}, vertices span {}..{}",
                self.levels.top,
                self.levels.bottom,
                window.bottom(),
                window.top()
            )));
        }
        let ids: Vec<u64> = self.vertices.iter().map(|v| v.id).collect();
        let mut leaves = BTreeMap::new();
        for (id, s) in &self.leaf_masses {
            leaves.insert(lookup(*id)?, parse_q(s, *id)?);
        }
        let window = Arc::new(window);
        let named = |e: Error| match e {
            Error::MissingLeaf(i) => Error::MissingLeaf(ids[i] as usize),
            Error::NonPositiveMass(i) => Error::NonPositiveMass(ids[i] as usize),
            other => other,
        };
        let measure = FlowMeasure::from_leaf_masses(window.clone(), &leaves).map_err(named)?;
        if let Some(table) = &self.masses {
            let mut full = vec![Q::default(); window.len()];
            for v in window.vertices() {
                let id = ids[v.index()];
                let s = table.get(&id).ok_or_else(|| Error::Parse(format!("masses: vertex {id} is missing")))?;
                full[v.index()] = parse_q(s, id)?;
            }
            let given = FlowMeasure::from_raw_masses(window, full).map_err(named)?;
            if let Some(v) = given.flow_violation() {
                return Err(Error::InvalidTree(format!(
                    "flow violated at vertex {}: mass {} differs from the sum over its sons",
                    ids[v.index()],
                    rational::format(given.mass(v))
                )));
            }
            if given.masses() != measure.masses() {
                return Err(Error::InvalidTree("masses table disagrees with leaf_masses".into()));
            }
        }
        Ok(LoadedTree { measure, cfg, ids, index })
    }
}

/// Rewrite `vertex <position>` in a window diagnostic as the file id.
fn rename_vertices(msg: &str, vertices: &[VertexEntry]) -> String {
    let mut out = String::new();
    let mut rest = msg;
    while let Some(at) = rest.find("vertex ") {
        out.push_str(&rest[..at + 7]);
        rest = &rest[at + 7..];
        let digits = rest.chars().take_while(char::is_ascii_digit).count();
        match rest[..digits].parse::<usize>().ok().and_then(|i| vertices.get(i)) {
            Some(v) => out.push_str(&v.id.to_string()),
            None => out.push_str(&rest[..digits]),
        }
        rest = &rest[digits..];
    }
    out.push_str(rest);
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpecFile {
    pub values: BTreeMap<u64, String>,
}

impl FunctionSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text, "function spec")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("function spec serializes")
    }

    pub fn from_function(tree: &LoadedTree, f: &VertexFunction) -> Self {
        FunctionSpecFile { values: f.support().map(|v| (tree.id(v), rational::format(f.get(v)))).collect() }
    }

    pub fn load(&self, tree: &LoadedTree) -> Result<VertexFunction> {
        let mut f = VertexFunction::zero(tree.ids.len());
        for (id, s) in &self.values {
            f.set(tree.vertex(*id)?, parse_q(s, *id)?);
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelFile {
    pub entries: Vec<(u64, u64, String)>,
}

impl KernelFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text, "kernel")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("kernel serializes")
    }

    pub fn from_kernel(tree: &LoadedTree, k: &Kernel) -> Self {
        KernelFile { entries: k.entries().map(|(x, y, v)| (tree.id(x), tree.id(y), rational::format(v))).collect() }
    }

    pub fn load(&self, tree: &LoadedTree) -> Result<Kernel> {
        let entries = self
            .entries
            .iter()
            .map(|(x, y, s)| Ok((tree.vertex(*x)?, tree.vertex(*y)?, parse_q(s, *x)?)))
            .collect::<Result<Vec<_>>>()?;
        Kernel::from_entries(tree.ids.len(), entries)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSpec {
    pub root: u64,
    #[serde(flatten)]
    pub shape: Shape,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSpecFile {
    pub support: SupportSpec,
    pub values: BTreeMap<u64, String>,
    /// An integer `>= 2`, or `"inf"`.
    pub p: String,
}

impl AtomSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text, "atom spec")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("atom spec serializes")
    }

    pub fn from_atom(tree: &LoadedTree, a: &Atom) -> Self {
        AtomSpecFile {
            support: SupportSpec { root: tree.id(a.support.root), shape: a.support.shape },
            values: FunctionSpecFile::from_function(tree, &a.values).values,
            p: a.p.map_or_else(|| "inf".to_string(), |p| p.to_string()),
        }
    }

    pub fn load(&self, tree: &LoadedTree) -> Result<Atom> {
        let root = tree.vertex(self.support.root)?;
        let support = match self.support.shape {
            Shape::Singleton => Trapezoid::singleton(root),
            Shape::Band { start, end } => Trapezoid::band(root, start, end)?,
        };
        let values = FunctionSpecFile { values: self.values.clone() }.load(tree)?;
        if self.p == "inf" {
            return Ok(Atom::infinite(support, values));
        }
        Atom::new(support, values, Some(&rational::parse(&self.p)?))
    }
}
