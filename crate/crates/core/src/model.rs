//! Instance model: requirements, catalog, selections, scoring and feasibility.
//!
//! An instance is a binary selection problem over `n` variables with linear
//! weights, pairwise interactions and four constraint kinds (cardinality,
//! precedence, mutual exclusion and groups). Instances travel as one JSON
//! document per line.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("variable index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("duplicate interaction key for pair ({0}, {1})")]
    DuplicateInteraction(usize, usize),
    #[error("interaction key {0:?} is not of the form \"i,j\" with i != j")]
    BadInteractionKey(String),
    #[error("catalog lists {found} variables but n_variables = {expected}")]
    VariableCount { expected: usize, found: usize },
    #[error("cardinality bounds [{lo}, {hi}] are inverted")]
    InvertedBounds { lo: usize, hi: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Constraint block of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    pub n_variables: usize,
    /// Inclusive `[L, U]` bounds on the number of selected variables.
    pub cardinality_bounds: (usize, usize),
    /// Pairs `(i, j)` meaning `j` may only be selected when `i` is.
    #[serde(default)]
    pub precedence: Vec<(usize, usize)>,
    /// Pairs that may not both be selected.
    #[serde(default)]
    pub mutex: Vec<(usize, usize)>,
    /// Named groups; at most one member of each group may be selected.
    #[serde(default)]
    pub groups: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub weight: f64,
}

/// Interaction map keyed by canonical pairs `i < j`.
///
/// Serialized as a JSON object with `"i,j"` keys. Parsing rejects
/// repeated pairs, including `"j,i"` repeats of `"i,j"`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interactions(pub BTreeMap<(usize, usize), f64>);

impl Interactions {
    pub fn parse_key(key: &str) -> Result<(usize, usize), CoreError> {
        let bad = || CoreError::BadInteractionKey(key.to_string());
        let (a, b) = key.split_once(',').ok_or_else(bad)?;
        let i: usize = a.trim().parse().map_err(|_| bad())?;
        let j: usize = b.trim().parse().map_err(|_| bad())?;
        if i == j {
            return Err(bad());
        }
        Ok((i.min(j), i.max(j)))
    }

    pub fn from_entries<I>(entries: I) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map = BTreeMap::new();
        for (i, j, w) in entries {
            if i == j {
                return Err(CoreError::BadInteractionKey(format!("{i},{j}")));
            }
            let key = (i.min(j), i.max(j));
            if map.insert(key, w).is_some() {
                return Err(CoreError::DuplicateInteraction(key.0, key.1));
            }
        }
        Ok(Interactions(map))
    }
}

impl Serialize for Interactions {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for ((i, j), w) in &self.0 {
            m.serialize_entry(&format!("{i},{j}"), w)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for Interactions {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Interactions;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping \"i,j\" to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Interactions, A::Error> {
                let mut map = BTreeMap::new();
                while let Some((k, w)) = access.next_entry::<String, f64>()? {
                    let key = Interactions::parse_key(&k).map_err(de::Error::custom)?;
                    if map.insert(key, w).is_some() {
                        return Err(de::Error::custom(CoreError::DuplicateInteraction(key.0, key.1)));
                    }
                }
                Ok(Interactions(map))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub interactions: Interactions,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    uuid: String,
    problem_type: String,
    requirements: Requirements,
    catalog: Catalog,
}

#[derive(Serialize)]
struct CandidatePayload<'a> {
    requirements: &'a Requirements,
    catalog: &'a Catalog,
}

/// A validated instance with adjacency indexes built for fast evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub uuid: String,
    pub problem_type: String,
    pub requirements: Requirements,
    pub catalog: Catalog,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Instance {
    pub fn new(
        uuid: impl Into<String>,
        problem_type: impl Into<String>,
        requirements: Requirements,
        catalog: Catalog,
    ) -> Result<Self, CoreError> {
        let n = requirements.n_variables;
        if catalog.variables.len() != n {
            return Err(CoreError::VariableCount { expected: n, found: catalog.variables.len() });
        }
        let (lo, hi) = requirements.cardinality_bounds;
        if lo > hi {
            return Err(CoreError::InvertedBounds { lo, hi });
        }
        let check = |index: usize| {
            if index < n {
                Ok(())
            } else {
                Err(CoreError::IndexOutOfRange { index, n })
            }
        };
        for &(a, b) in requirements.precedence.iter().chain(&requirements.mutex) {
            check(a)?;
            check(b)?;
        }
        for members in requirements.groups.values() {
            members.iter().try_for_each(|&m| check(m))?;
        }
        if catalog.variables.iter().any(|v| !v.weight.is_finite()) {
            return Err(CoreError::NonFinite("weights".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &w) in &catalog.interactions.0 {
            check(j)?;
            if !w.is_finite() {
                return Err(CoreError::NonFinite(format!("interaction {i},{j}")));
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(j, _)| j);
        }
        Ok(Instance {
            uuid: uuid.into(),
            problem_type: problem_type.into(),
            requirements,
            catalog,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.requirements.n_variables
    }

    pub fn bounds(&self) -> (usize, usize) {
        self.requirements.cardinality_bounds
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.catalog.variables[i].weight
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.catalog.variables.iter().map(|v| v.weight)
    }

    /// Interaction partners of `i`, sorted by index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn interaction(&self, i: usize, j: usize) -> f64 {
        self.catalog.interactions.0.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        let raw: RawInstance =
            serde_json::from_str(text).map_err(|e| CoreError::Parse { line: 1, message: e.to_string() })?;
        Instance::new(raw.uuid, raw.problem_type, raw.requirements, raw.catalog)
    }

    pub fn to_json(&self) -> String {
        let raw = RawInstance {
            uuid: self.uuid.clone(),
            problem_type: self.problem_type.clone(),
            requirements: self.requirements.clone(),
            catalog: self.catalog.clone(),
        };
        serde_json::to_string(&raw).expect("instance serialization cannot fail")
    }

    /// The stdin payload handed to candidate programs.
    pub fn candidate_payload(&self) -> String {
        serde_json::to_string(&CandidatePayload { requirements: &self.requirements, catalog: &self.catalog })
            .expect("payload serialization cannot fail")
    }
}

/// Read one instance per non-blank line. Errors carry the 1-based line number.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Instance>, CoreError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CoreError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = Instance::from_json(&line).map_err(|e| match e {
            CoreError::Parse { message, .. } => CoreError::Parse { line: idx + 1, message },
            other => CoreError::Parse { line: idx + 1, message: other.to_string() },
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, instances: &[Instance]) -> Result<(), CoreError> {
    for inst in instances {
        writeln!(writer, "{}", inst.to_json()).map_err(|e| CoreError::Io(e.to_string()))?;
    }
    Ok(())
}

/// A set of selected variable indices, kept sorted and free of repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Selection(Vec<usize>);

impl Selection {
    pub fn new(mut vars: Vec<usize>) -> Self {
        vars.sort_unstable();
        vars.dedup();
        Selection(vars)
    }

    pub fn empty() -> Self {
        Selection(Vec::new())
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Selection(mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    pub fn to_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.0 {
            mask[i] = true;
        }
        mask
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    fn validate(&self, n: usize) -> Result<(), CoreError> {
        match self.0.last() {
            Some(&index) if index >= n => Err(CoreError::IndexOutOfRange { index, n }),
            _ => Ok(()),
        }
    }
}

/// Objective value. Terms are summed in canonical index order so the result
/// does not depend on how the selection was built.
pub fn score(inst: &Instance, sel: &Selection) -> Result<f64, CoreError> {
    sel.validate(inst.n())?;
    let mut mask = vec![false; inst.n()];
    let mut total = 0.0;
    for &i in sel.indices() {
        total += inst.weight(i);
        mask[i] = true;
    }
    for &i in sel.indices() {
        for &(j, w) in inst.neighbors(i) {
            if j > i && mask[j] {
                total += w;
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    CardinalityBelow { size: usize, min: usize },
    CardinalityAbove { size: usize, max: usize },
    Precedence { required: usize, dependent: usize },
    Mutex { a: usize, b: usize },
    Group { id: String, selected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub n_vio: usize,
    pub violations: Vec<Violation>,
}

/// Count violations: one per violated cardinality side, per broken
/// precedence pair, per co-selected mutex pair and per over-full group.
pub fn check_feasibility(inst: &Instance, sel: &Selection) -> Result<FeasibilityReport, CoreError> {
    sel.validate(inst.n())?;
    let mask = sel.to_mask(inst.n());
    let req = &inst.requirements;
    let (lo, hi) = req.cardinality_bounds;
    let size = sel.len();
    let mut violations = Vec::new();
    if size < lo {
        violations.push(Violation::CardinalityBelow { size, min: lo });
    }
    if size > hi {
        violations.push(Violation::CardinalityAbove { size, max: hi });
    }
    for &(i, j) in &req.precedence {
        if mask[j] && !mask[i] {
            violations.push(Violation::Precedence { required: i, dependent: j });
        }
    }
    for &(a, b) in &req.mutex {
        if mask[a] && mask[b] {
            violations.push(Violation::Mutex { a, b });
        }
    }
    for (id, members) in &req.groups {
        let selected = members.iter().filter(|&&m| mask[m]).count();
        if selected > 1 {
            violations.push(Violation::Group { id: id.clone(), selected });
        }
    }
    Ok(FeasibilityReport { feasible: violations.is_empty(), n_vio: violations.len(), violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Instance {
        let req = Requirements {
            n_variables: 4,
            cardinality_bounds: (1, 3),
            precedence: vec![(0, 1)],
            mutex: vec![(2, 3)],
            groups: BTreeMap::from([("g".to_string(), vec![1, 2])]),
        };
        let cat = Catalog {
            variables: [1.0, 2.0, -0.5, 4.0].iter().map(|&weight| Variable { weight }).collect(),
            interactions: Interactions::from_entries([(0, 1, 3.0), (1, 3, -1.5)]).unwrap(),
        };
        Instance::new("u", "test", req, cat).unwrap()
    }

    #[test]
    fn score_sums_weights_and_pairs() {
        let inst = small();
        assert_eq!(score(&inst, &Selection::new(vec![0, 1])).unwrap(), 6.0);
        assert_eq!(score(&inst, &Selection::new(vec![3, 1, 0])).unwrap(), 8.5);
        assert_eq!(score(&inst, &Selection::empty()).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_selection_is_rejected() {
        let inst = small();
        assert!(matches!(score(&inst, &Selection::new(vec![4])), Err(CoreError::IndexOutOfRange { .. })));
    }

    #[test]
    fn violation_counting() {
        let inst = small();
        let r = check_feasibility(&inst, &Selection::new(vec![1, 2, 3])).unwrap();
        // precedence 0->1, mutex 2-3, group {1,2}
        assert_eq!(r.n_vio, 3);
        let r = check_feasibility(&inst, &Selection::empty()).unwrap();
        assert_eq!(r.n_vio, 1);
        // above U, mutex 2-3, group {1,2}
        let r = check_feasibility(&inst, &Selection::new(vec![0, 1, 2, 3])).unwrap();
        assert_eq!(r.n_vio, 3);
        assert!(check_feasibility(&inst, &Selection::new(vec![0, 1, 3])).unwrap().feasible);
    }

    #[test]
    fn json_roundtrip() {
        let inst = small();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let text = r#"{"uuid":"a","problem_type":"t","requirements":{"n_variables":2,"cardinality_bounds":[0,2]},
            "catalog":{"variables":[{"weight":1},{"weight":2}],"interactions":{"0,1":1.0,"1,0":2.0}}}"#;
        assert!(Instance::from_json(text).is_err());
        let text = text.replace("\"1,0\":2.0", "\"1,1\":2.0");
        assert!(Instance::from_json(&text).is_err());
    }

    #[test]
    fn reversed_key_is_canonicalized() {
        let text = r#"{"uuid":"a","problem_type":"t","requirements":{"n_variables":2,"cardinality_bounds":[0,2]},
            "catalog":{"variables":[{"weight":1},{"weight":2}],"interactions":{"1,0":1.5}}}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.interaction(0, 1), 1.5);
        assert!(inst.to_json().contains("\"0,1\":1.5"));
    }

    #[test]
    fn jsonl_reports_line_number() {
        let inst = small();
        let text = format!("{}\n\n{{broken\n", inst.to_json());
        match read_jsonl(text.as_bytes()) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
