//! Seeded instance generator with ten structural families.
//!
//! Each instance draws from its own ChaCha8 stream whose seed is derived from
//! the run seed and the instance index with SplitMix64, so output is
//! byte-identical across runs and platforms and independent of batch size.
//!
//! Every family first fixes a witness selection and then only adds
//! constraints that the witness satisfies. The witness is re-checked with
//! [`check_feasibility`] before the instance is emitted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{check_feasibility, Catalog, Instance, Interactions, Requirements, Selection, Variable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("family {family}: {reason}")]
    Unsatisfiable { family: Family, reason: String },
    #[error("family {family}: invalid parameter {name}")]
    InvalidParam { family: Family, name: &'static str },
    #[error("mixture weights must be non-negative with a positive sum")]
    BadWeights,
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DenseDeceptive,
    StructuralTrap,
    BnbShowcase,
    RandomSds,
    TreeStructured,
    GreedyEasy,
    Decomposable,
    LocalOptima,
    PlantedQubo,
    MaxcutQubo,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::DenseDeceptive,
        Family::StructuralTrap,
        Family::BnbShowcase,
        Family::RandomSds,
        Family::TreeStructured,
        Family::GreedyEasy,
        Family::Decomposable,
        Family::LocalOptima,
        Family::PlantedQubo,
        Family::MaxcutQubo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::DenseDeceptive => "dense_deceptive",
            Family::StructuralTrap => "structural_trap",
            Family::BnbShowcase => "bnb_showcase",
            Family::RandomSds => "random_sds",
            Family::TreeStructured => "tree_structured",
            Family::GreedyEasy => "greedy_easy",
            Family::Decomposable => "decomposable",
            Family::LocalOptima => "local_optima",
            Family::PlantedQubo => "planted_qubo",
            Family::MaxcutQubo => "maxcut_qubo",
        }
    }

    /// Share of the default training mixture.
    pub fn default_weight(self) -> f64 {
        match self {
            Family::DenseDeceptive => 0.20,
            Family::StructuralTrap | Family::BnbShowcase => 0.15,
            Family::Decomposable | Family::LocalOptima | Family::PlantedQubo => 0.10,
            Family::RandomSds | Family::TreeStructured | Family::GreedyEasy | Family::MaxcutQubo => 0.05,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = GenError;
    fn from_str(s: &str) -> Result<Self, GenError> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| GenError::UnknownFamily(s.to_string()))
    }
}

/// Fully resolved knobs for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub n_min: usize,
    pub n_max: usize,
    pub weight_lo: f64,
    pub weight_hi: f64,
    pub pair_lo: f64,
    pub pair_hi: f64,
    /// Edge probability of the interaction graph.
    pub density: f64,
    /// Mutex pairs per variable.
    pub mutex_ratio: f64,
    /// Precedence pairs per variable.
    pub precedence_ratio: f64,
    /// Groups per variable.
    pub group_ratio: f64,
    pub chain_min: usize,
    pub chain_max: usize,
    pub bait: f64,
    pub trap: f64,
    pub blocks: usize,
    pub cliques: usize,
    pub clique_min: usize,
    pub clique_max: usize,
    pub signal: f64,
    pub noise: f64,
    /// Forces the lower cardinality bound when set.
    pub min_lower: Option<usize>,
}

impl FamilyParams {
    pub fn defaults(family: Family) -> Self {
        let base = FamilyParams {
            n_min: 20,
            n_max: 60,
            weight_lo: -2.0,
            weight_hi: 2.0,
            pair_lo: -20.0,
            pair_hi: 20.0,
            density: 0.5,
            mutex_ratio: 0.3,
            precedence_ratio: 0.2,
            group_ratio: 0.05,
            chain_min: 4,
            chain_max: 7,
            bait: 100.0,
            trap: -10.0,
            blocks: 4,
            cliques: 3,
            clique_min: 4,
            clique_max: 8,
            signal: 5.0,
            noise: 2.0,
            min_lower: None,
        };
        match family {
            Family::DenseDeceptive | Family::Decomposable => base,
            Family::StructuralTrap => FamilyParams { pair_lo: -5.0, pair_hi: 5.0, density: 0.2, ..base },
            Family::BnbShowcase => {
                FamilyParams { weight_lo: -1.0, weight_hi: 1.0, pair_lo: -25.0, pair_hi: 25.0, density: 0.3, ..base }
            }
            Family::RandomSds => FamilyParams {
                n_min: 50,
                n_max: 100,
                weight_lo: -5.0,
                weight_hi: 5.0,
                pair_lo: -5.0,
                pair_hi: 5.0,
                density: 0.1,
                ..base
            },
            Family::TreeStructured => FamilyParams {
                weight_lo: -5.0,
                weight_hi: 5.0,
                pair_lo: -15.0,
                pair_hi: 15.0,
                density: 0.0,
                precedence_ratio: 0.1,
                ..base
            },
            Family::GreedyEasy => FamilyParams {
                weight_lo: 1.0,
                weight_hi: 10.0,
                pair_lo: -0.05,
                pair_hi: 0.05,
                density: 0.1,
                mutex_ratio: 0.0,
                precedence_ratio: 0.0,
                group_ratio: 0.0,
                ..base
            },
            Family::LocalOptima => FamilyParams {
                weight_lo: -1.0,
                weight_hi: 1.0,
                pair_lo: 4.0,
                pair_hi: 8.0,
                density: 0.1,
                mutex_ratio: 0.1,
                precedence_ratio: 0.0,
                group_ratio: 0.0,
                ..base
            },
            Family::PlantedQubo => FamilyParams { density: 0.3, mutex_ratio: 0.1, precedence_ratio: 0.0, group_ratio: 0.0, ..base },
            Family::MaxcutQubo => FamilyParams {
                density: 0.6,
                mutex_ratio: 0.0,
                precedence_ratio: 0.0,
                group_ratio: 0.0,
                ..base
            },
        }
    }
}

/// Partial overrides applied on top of [`FamilyParams::defaults`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub weight_lo: Option<f64>,
    pub weight_hi: Option<f64>,
    pub pair_lo: Option<f64>,
    pub pair_hi: Option<f64>,
    pub density: Option<f64>,
    pub mutex_ratio: Option<f64>,
    pub precedence_ratio: Option<f64>,
    pub group_ratio: Option<f64>,
    pub chain_min: Option<usize>,
    pub chain_max: Option<usize>,
    pub bait: Option<f64>,
    pub trap: Option<f64>,
    pub blocks: Option<usize>,
    pub cliques: Option<usize>,
    pub clique_min: Option<usize>,
    pub clique_max: Option<usize>,
    pub signal: Option<f64>,
    pub noise: Option<f64>,
    pub min_lower: Option<usize>,
}

impl ParamOverrides {
    pub fn apply(&self, mut p: FamilyParams) -> FamilyParams {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        take!(
            n_min, n_max, weight_lo, weight_hi, pair_lo, pair_hi, density, mutex_ratio, precedence_ratio,
            group_ratio, chain_min, chain_max, bait, trap, blocks, cliques, clique_min, clique_max, signal, noise
        );
        if self.min_lower.is_some() {
            p.min_lower = self.min_lower;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub params: ParamOverrides,
}

fn one() -> f64 {
    1.0
}

impl GenSpec {
    pub fn new(family: Family) -> Self {
        GenSpec { family, weight: family.default_weight(), params: ParamOverrides::default() }
    }

    pub fn with_n_range(mut self, lo: usize, hi: usize) -> Self {
        self.params.n_min = Some(lo);
        self.params.n_max = Some(hi);
        self
    }

    pub fn resolved(&self) -> FamilyParams {
        self.params.apply(FamilyParams::defaults(self.family))
    }

    /// One spec per family at its default mixture weight.
    pub fn default_mixture() -> Vec<GenSpec> {
        Family::ALL.into_iter().map(GenSpec::new).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-instance seed for stream `index` of run `seed`.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x5D5)))
}

/// `count` instances of one family.
pub fn generate(spec: &GenSpec, count: usize, seed: u64) -> Result<Vec<Instance>, GenError> {
    (0..count).map(|i| generate_one(spec, instance_seed(seed, i as u64)).map(|(inst, _)| inst)).collect()
}

/// Instances drawn in proportion to the spec weights.
///
/// Family counts follow largest-remainder rounding of `count * weight / sum`
/// with ties to the earlier spec; the family order is then shuffled with the
/// run seed.
pub fn generate_mixture(specs: &[GenSpec], count: usize, seed: u64) -> Result<Vec<Instance>, GenError> {
    let total: f64 = specs.iter().map(|s| s.weight).sum();
    if specs.is_empty() || specs.iter().any(|s| !(s.weight >= 0.0)) || !(total > 0.0) {
        return Err(GenError::BadWeights);
    }
    let quotas: Vec<f64> = specs.iter().map(|s| count as f64 * s.weight / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..specs.len()).collect();
    rest.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let short = count - counts.iter().sum::<usize>();
    for &k in rest.iter().take(short) {
        counts[k] += 1;
    }
    let mut slots: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat(k).take(c)).collect();
    slots.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0xA11CE)));
    slots
        .iter()
        .enumerate()
        .map(|(i, &k)| generate_one(&specs[k], instance_seed(seed, i as u64)).map(|(inst, _)| inst))
        .collect()
}

/// One instance and its feasible witness.
pub fn generate_one(spec: &GenSpec, instance_seed: u64) -> Result<(Instance, Selection), GenError> {
    let family = spec.family;
    let p = spec.resolved();
    validate(family, &p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let n = rng.gen_range(p.n_min..=p.n_max);
    let mut b = Builder::new(family, n, &p, &mut rng)?;
    b.build_family()?;
    b.finish(instance_seed)
}

fn validate(family: Family, p: &FamilyParams) -> Result<(), GenError> {
    let bad = |name| Err(GenError::InvalidParam { family, name });
    if p.n_min == 0 || p.n_min > p.n_max {
        return bad("n_min/n_max");
    }
    if !(p.weight_lo <= p.weight_hi) {
        return bad("weight_lo/weight_hi");
    }
    if !(p.pair_lo <= p.pair_hi) {
        return bad("pair_lo/pair_hi");
    }
    if !(0.0..=1.0).contains(&p.density) {
        return bad("density");
    }
    for (name, r) in [("mutex_ratio", p.mutex_ratio), ("precedence_ratio", p.precedence_ratio), ("group_ratio", p.group_ratio)] {
        if !(r >= 0.0 && r.is_finite()) {
            return bad(name);
        }
    }
    if p.chain_min < 2 || p.chain_min > p.chain_max {
        return bad("chain_min/chain_max");
    }
    if p.clique_min < 2 || p.clique_min > p.clique_max {
        return bad("clique_min/clique_max");
    }
    if p.blocks == 0 {
        return bad("blocks");
    }
    let unsat = |reason: String| Err(GenError::Unsatisfiable { family, reason });
    match family {
        Family::StructuralTrap if p.chain_min > p.n_min => {
            unsat(format!("chain length {} exceeds n = {}", p.chain_min, p.n_min))
        }
        Family::Decomposable if p.blocks > p.n_min => unsat(format!("{} blocks exceed n = {}", p.blocks, p.n_min)),
        Family::LocalOptima if p.cliques * p.clique_min > p.n_min => {
            unsat(format!("{} cliques of size {} exceed n = {}", p.cliques, p.clique_min, p.n_min))
        }
        _ => match p.min_lower {
            Some(l) if l > p.n_min => unsat(format!("lower bound {l} exceeds n = {}", p.n_min)),
            _ => Ok(()),
        },
    }
}

struct Builder<'a> {
    family: Family,
    n: usize,
    p: &'a FamilyParams,
    rng: &'a mut ChaCha8Rng,
    weights: Vec<f64>,
    pairs: BTreeMap<(usize, usize), f64>,
    witness: BTreeSet<usize>,
    /// Block label per variable; constraints never cross blocks.
    block: Vec<usize>,
    /// Precedence pairs placed by the family itself.
    precedence: Vec<(usize, usize)>,
    mutex: Vec<(usize, usize)>,
    /// Smallest admissible upper bound.
    min_upper: usize,
    sprinkle: bool,
}

impl<'a> Builder<'a> {
    fn new(family: Family, n: usize, p: &'a FamilyParams, rng: &'a mut ChaCha8Rng) -> Result<Self, GenError> {
        Ok(Builder {
            family,
            n,
            p,
            rng,
            weights: vec![0.0; n],
            pairs: BTreeMap::new(),
            witness: BTreeSet::new(),
            block: vec![0; n],
            precedence: Vec::new(),
            mutex: Vec::new(),
            min_upper: 0,
            sprinkle: true,
        })
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            lo
        } else {
            self.rng.gen_range(lo..hi)
        }
    }

    fn random_weights(&mut self) {
        for i in 0..self.n {
            self.weights[i] = self.uniform(self.p.weight_lo, self.p.weight_hi);
        }
    }

    fn random_pairs(&mut self, members: &[usize], density: f64) {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if self.rng.gen_bool(density) {
                    let w = self.uniform(self.p.pair_lo, self.p.pair_hi);
                    self.pairs.insert((i.min(j), i.max(j)), w);
                }
            }
        }
    }

    fn random_witness(&mut self) {
        let n = self.n;
        let k = self.rng.gen_range((n / 6).max(1)..=(n / 3).max(1));
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(self.rng);
        self.witness.extend(all.into_iter().take(k));
    }

    fn build_family(&mut self) -> Result<(), GenError> {
        let n = self.n;
        let all: Vec<usize> = (0..n).collect();
        match self.family {
            Family::DenseDeceptive | Family::BnbShowcase | Family::RandomSds => {
                self.random_weights();
                self.random_pairs(&all, self.p.density);
                self.random_witness();
            }
            Family::GreedyEasy => {
                self.random_weights();
                self.random_pairs(&all, self.p.density);
                self.random_witness();
                self.min_upper = n / 2;
            }
            Family::StructuralTrap => self.structural_trap()?,
            Family::TreeStructured => {
                self.random_weights();
                for v in 1..n {
                    let parent = self.rng.gen_range(0..v);
                    let w = self.uniform(self.p.pair_lo, self.p.pair_hi);
                    self.pairs.insert((parent, v), w);
                }
                self.random_witness();
            }
            Family::Decomposable => {
                self.random_weights();
                let blocks = self.p.blocks;
                let mut order = all.clone();
                order.shuffle(self.rng);
                for (pos, &v) in order.iter().enumerate() {
                    self.block[v] = pos * blocks / n;
                }
                for b in 0..blocks {
                    let members: Vec<usize> = (0..n).filter(|&v| self.block[v] == b).collect();
                    self.random_pairs(&members, self.p.density);
                }
                self.random_witness();
            }
            Family::LocalOptima => self.local_optima()?,
            Family::PlantedQubo => {
                let k = self.rng.gen_range((n / 3).max(1)..=(n / 2).max(1));
                let mut order = all.clone();
                order.shuffle(self.rng);
                let planted: BTreeSet<usize> = order.into_iter().take(k).collect();
                let noise = self.p.noise;
                for i in 0..n {
                    self.weights[i] = self.uniform(-noise, noise);
                }
                for i in 0..n {
                    for j in i + 1..n {
                        if !self.rng.gen_bool(self.p.density) {
                            continue;
                        }
                        let signal = match (planted.contains(&i), planted.contains(&j)) {
                            (true, true) => self.p.signal,
                            (false, false) => 0.0,
                            _ => -self.p.signal,
                        };
                        let w = signal + self.uniform(-noise, noise);
                        self.pairs.insert((i, j), w);
                    }
                }
                self.min_upper = planted.len();
                self.witness = planted;
            }
            Family::MaxcutQubo => {
                let mut degree = vec![0usize; n];
                for i in 0..n {
                    for j in i + 1..n {
                        if self.rng.gen_bool(self.p.density) {
                            self.pairs.insert((i, j), -2.0);
                            degree[i] += 1;
                            degree[j] += 1;
                        }
                    }
                }
                self.weights = degree.iter().map(|&d| d as f64).collect();
                self.random_witness();
                self.min_upper = n;
                self.sprinkle = false;
            }
        }
        Ok(())
    }

    fn structural_trap(&mut self) -> Result<(), GenError> {
        let n = self.n;
        self.random_weights();
        let all: Vec<usize> = (0..n).collect();
        self.random_pairs(&all, self.p.density);
        let chains = 1 + self.rng.gen_range(0..=n / 25);
        let mut free = all;
        free.shuffle(self.rng);
        let mut chain_vars = 0;
        for _ in 0..chains {
            let len = self.rng.gen_range(self.p.chain_min..=self.p.chain_max);
            if free.len() < len {
                break;
            }
            let chain: Vec<usize> = free.split_off(free.len() - len);
            for (a, &u) in chain.iter().enumerate() {
                for &v in &chain[a + 1..] {
                    self.pairs.remove(&(u.min(v), u.max(v)));
                }
            }
            for w in chain.windows(2) {
                self.precedence.push((w[0], w[1]));
                self.pairs.insert((w[0].min(w[1]), w[0].max(w[1])), self.p.trap);
            }
            for &v in &chain[..len - 1] {
                self.weights[v] = self.uniform(-2.0, -0.5);
            }
            self.weights[chain[len - 1]] = self.p.bait;
            self.witness.extend(chain.iter().copied());
            chain_vars += len;
        }
        if chain_vars == 0 {
            return Err(GenError::Unsatisfiable { family: self.family, reason: "no room for a chain".into() });
        }
        self.min_upper = chain_vars;
        Ok(())
    }

    fn local_optima(&mut self) -> Result<(), GenError> {
        let n = self.n;
        self.random_weights();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(self.rng);
        let cap = (n / self.p.cliques).max(self.p.clique_min).min(self.p.clique_max);
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        for _ in 0..self.p.cliques {
            let size = self.rng.gen_range(self.p.clique_min..=cap.max(self.p.clique_min));
            if order.len() < size {
                return Err(GenError::Unsatisfiable { family: self.family, reason: "cliques do not fit".into() });
            }
            cliques.push(order.split_off(order.len() - size));
        }
        let background = order.clone();
        for &v in &background {
            for &u in &background {
                if u < v && self.rng.gen_bool(self.p.density) {
                    let w = self.uniform(-2.0, 2.0);
                    self.pairs.insert((u, v), w);
                }
            }
        }
        for clique in &cliques {
            for &v in clique {
                self.weights[v] = self.uniform(-3.0, -1.0);
            }
            for (a, &i) in clique.iter().enumerate() {
                for &j in &clique[a + 1..] {
                    let w = self.uniform(self.p.pair_lo, self.p.pair_hi);
                    self.pairs.insert((i.min(j), i.max(j)), w);
                }
            }
        }
        for a in 0..cliques.len() {
            for b in a + 1..cliques.len() {
                for _ in 0..2 {
                    let x = *cliques[a].choose(self.rng).expect("non-empty clique");
                    let y = *cliques[b].choose(self.rng).expect("non-empty clique");
                    self.mutex.push((x.min(y), x.max(y)));
                }
            }
        }
        let pick = self.rng.gen_range(0..cliques.len());
        self.witness.extend(cliques[pick].iter().copied());
        self.min_upper = cliques.iter().map(Vec::len).max().unwrap_or(0);
        Ok(())
    }

    fn sprinkle_constraints(&mut self) -> BTreeMap<String, Vec<usize>> {
        let n = self.n;
        let mut groups = BTreeMap::new();
        if !self.sprinkle || n < 2 {
            return groups;
        }
        let attempts = 20 * n;
        let target = |ratio: f64| (ratio * n as f64).round() as usize;

        let mut rank: Vec<usize> = (0..n).collect();
        rank.shuffle(self.rng);
        let mut placed: BTreeSet<(usize, usize)> = self.precedence.iter().copied().collect();
        let want = placed.len() + target(self.p.precedence_ratio);
        for _ in 0..attempts {
            if placed.len() >= want {
                break;
            }
            let (a, b) = (self.rng.gen_range(0..n), self.rng.gen_range(0..n));
            if a == b || self.block[a] != self.block[b] {
                continue;
            }
            let (i, j) = if rank[a] < rank[b] { (a, b) } else { (b, a) };
            if self.witness.contains(&j) && !self.witness.contains(&i) {
                continue;
            }
            if placed.insert((i, j)) {
                self.precedence.push((i, j));
            }
        }

        let mut placed: BTreeSet<(usize, usize)> = self.mutex.iter().copied().collect();
        let want = placed.len() + target(self.p.mutex_ratio);
        for _ in 0..attempts {
            if placed.len() >= want {
                break;
            }
            let (a, b) = (self.rng.gen_range(0..n), self.rng.gen_range(0..n));
            if a == b || self.block[a] != self.block[b] || (self.witness.contains(&a) && self.witness.contains(&b)) {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if placed.insert(key) {
                self.mutex.push(key);
            }
        }

        let mut used = vec![false; n];
        for g in 0..target(self.p.group_ratio) {
            let size = self.rng.gen_range(2..=4);
            let mut members = Vec::new();
            let mut has_witness = false;
            for _ in 0..attempts {
                if members.len() == size {
                    break;
                }
                let v = self.rng.gen_range(0..n);
                let in_w = self.witness.contains(&v);
                if used[v] || (in_w && has_witness) || members.first().is_some_and(|&m| self.block[m] != self.block[v]) {
                    continue;
                }
                used[v] = true;
                has_witness |= in_w;
                members.push(v);
            }
            if members.len() >= 2 {
                members.sort_unstable();
                groups.insert(format!("g{g}"), members);
            }
        }
        groups
    }

    fn finish(mut self, instance_seed: u64) -> Result<(Instance, Selection), GenError> {
        let groups = self.sprinkle_constraints();
        let n = self.n;
        let k = self.witness.len();
        let lo = match self.p.min_lower {
            Some(l) => {
                if l > n {
                    return Err(GenError::Unsatisfiable { family: self.family, reason: format!("lower bound {l} exceeds n = {n}") });
                }
                if l > k {
                    self.grow_witness(l, &groups);
                }
                l
            }
            None => self.rng.gen_range(0..=k.min((n / 10).max(1))),
        };
        let k = self.witness.len();
        if k < lo {
            return Err(GenError::Unsatisfiable {
                family: self.family,
                reason: format!("no feasible selection of size {lo} could be constructed"),
            });
        }
        let floor = k.max(self.min_upper).max(lo);
        let hi = if self.family == Family::MaxcutQubo {
            n
        } else {
            self.rng.gen_range(floor.min(n)..=floor.max(n / 2).min(n))
        };
        let requirements = Requirements {
            n_variables: n,
            cardinality_bounds: (lo, hi),
            precedence: self.precedence.clone(),
            mutex: self.mutex.clone(),
            groups,
        };
        let catalog = Catalog {
            variables: self.weights.iter().map(|&weight| Variable { weight }).collect(),
            interactions: Interactions(self.pairs.clone()),
        };
        let mut id = [0u8; 16];
        ChaCha8Rng::seed_from_u64(instance_seed ^ 0x1D).fill(&mut id);
        let uuid = format_uuid(&id);
        let inst = Instance::new(uuid, self.family.name(), requirements, catalog).expect("generator emits valid instances");
        let witness = Selection::new(self.witness.iter().copied().collect());
        let report = check_feasibility(&inst, &witness).expect("witness indices in range");
        if !report.feasible {
            return Err(GenError::Unsatisfiable { family: self.family, reason: "witness check failed".into() });
        }
        Ok((inst, witness))
    }

    /// Add variables that keep the witness feasible until it has `target`
    /// members or nothing more fits.
    fn grow_witness(&mut self, target: usize, groups: &BTreeMap<String, Vec<usize>>) {
        let mut changed = true;
        while self.witness.len() < target && changed {
            changed = false;
            for v in 0..self.n {
                if self.witness.len() >= target {
                    break;
                }
                if self.witness.contains(&v) {
                    continue;
                }
                let prereqs_ok = self.precedence.iter().all(|&(i, j)| j != v || self.witness.contains(&i));
                let mutex_ok = self.mutex.iter().all(|&(a, b)| {
                    !((a == v && self.witness.contains(&b)) || (b == v && self.witness.contains(&a)))
                });
                let group_ok = groups
                    .values()
                    .all(|m| !m.contains(&v) || !m.iter().any(|x| self.witness.contains(x)));
                if prereqs_ok && mutex_ok && group_ok {
                    self.witness.insert(v);
                    changed = true;
                }
            }
        }
    }
}

fn format_uuid(b: &[u8; 16]) -> String {
    let hex: String = b.iter().map(|x| format!("{x:02x}")).collect();
    format!("{}-{}-{}-{}-{}", &hex[0..8], &hex[8..12], &hex[12..16], &hex[16..20], &hex[20..32])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_is_feasible_for_every_family() {
        for fam in Family::ALL {
            for i in 0..20 {
                let (inst, w) = generate_one(&GenSpec::new(fam), instance_seed(5, i)).unwrap();
                assert!(check_feasibility(&inst, &w).unwrap().feasible, "{fam}");
                assert_eq!(inst.problem_type, fam.name());
                let p = FamilyParams::defaults(fam);
                assert!((p.n_min..=p.n_max).contains(&inst.n()));
            }
        }
    }

    #[test]
    fn mixture_weights_sum_to_one() {
        let s: f64 = Family::ALL.iter().map(|f| f.default_weight()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_counts_are_proportional() {
        let insts = generate_mixture(&GenSpec::default_mixture(), 100, 3).unwrap();
        let dd = insts.iter().filter(|i| i.problem_type == "dense_deceptive").count();
        let st = insts.iter().filter(|i| i.problem_type == "structural_trap").count();
        assert_eq!((dd, st), (20, 15));
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let spec = GenSpec::new(Family::PlantedQubo);
        let a = generate(&spec, 6, 42).unwrap();
        let b = generate(&spec, 3, 42).unwrap();
        assert_eq!(&a[..3], &b[..]);
        let c = generate(&spec, 6, 43).unwrap();
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn family_parameters() {
        let inst = &generate(&GenSpec::new(Family::StructuralTrap), 1, 8).unwrap()[0];
        assert!(inst.weights().any(|w| w == 100.0));
        assert!(inst.catalog.interactions.0.values().any(|&w| w == -10.0));
        let mc = &generate(&GenSpec::new(Family::MaxcutQubo), 1, 8).unwrap()[0];
        for v in 0..mc.n() {
            assert_eq!(mc.weight(v), mc.neighbors(v).len() as f64);
            assert!(mc.neighbors(v).iter().all(|&(_, w)| w == -2.0));
        }
        let tree = &generate(&GenSpec::new(Family::TreeStructured), 1, 8).unwrap()[0];
        assert_eq!(tree.catalog.interactions.0.len(), tree.n() - 1);
    }

    #[test]
    fn unsatisfiable_request_names_family() {
        let mut spec = GenSpec::new(Family::LocalOptima).with_n_range(10, 10);
        spec.params.cliques = Some(5);
        let err = generate(&spec, 1, 1).unwrap_err();
        assert!(err.to_string().contains("local_optima"));
        let mut spec = GenSpec::new(Family::DenseDeceptive).with_n_range(10, 12);
        spec.params.min_lower = Some(11);
        assert!(matches!(generate(&spec, 1, 1), Err(GenError::Unsatisfiable { .. })));
    }

    #[test]
    fn forced_lower_bound_is_met() {
        let mut spec = GenSpec::new(Family::GreedyEasy);
        spec.params.min_lower = Some(15);
        for inst in generate(&spec, 5, 2).unwrap() {
            assert_eq!(inst.bounds().0, 15);
        }
    }

    #[test]
    fn zero_count_is_empty() {
        assert!(generate_mixture(&GenSpec::default_mixture(), 0, 1).unwrap().is_empty());
    }
}
