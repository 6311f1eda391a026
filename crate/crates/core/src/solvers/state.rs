//! Incremental selection state shared by the solvers.
//!
//! Flipping a variable costs time proportional to its interaction and
//! constraint degree. Violation counts follow the same rules as
//! [`crate::model::check_feasibility`].

use crate::model::{Instance, Selection};

#[derive(Debug, Clone)]
pub(crate) struct Tracker<'a> {
    inst: &'a Instance,
    pub mask: Vec<bool>,
    pub size: usize,
    pub score: f64,
    /// `w_i + sum_{j selected, j != i} W_ij` for every variable.
    link: Vec<f64>,
    prereqs: Vec<Vec<usize>>,
    dependents: Vec<Vec<usize>>,
    mutex_adj: Vec<Vec<usize>>,
    self_mutex: Vec<usize>,
    item_groups: Vec<Vec<usize>>,
    group_count: Vec<usize>,
    prec_vio: usize,
    mutex_vio: usize,
    groups_over: usize,
}

impl<'a> Tracker<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let n = inst.n();
        let req = &inst.requirements;
        let mut prereqs = vec![Vec::new(); n];
        let mut dependents = vec![Vec::new(); n];
        for &(i, j) in &req.precedence {
            if i != j {
                prereqs[j].push(i);
                dependents[i].push(j);
            }
        }
        let mut mutex_adj = vec![Vec::new(); n];
        let mut self_mutex = vec![0; n];
        for &(a, b) in &req.mutex {
            if a == b {
                self_mutex[a] += 1;
            } else {
                mutex_adj[a].push(b);
                mutex_adj[b].push(a);
            }
        }
        let mut item_groups = vec![Vec::new(); n];
        for (g, members) in req.groups.values().enumerate() {
            for &m in members {
                item_groups[m].push(g);
            }
        }
        Tracker {
            inst,
            mask: vec![false; n],
            size: 0,
            score: 0.0,
            link: inst.weights().collect(),
            prereqs,
            dependents,
            mutex_adj,
            self_mutex,
            item_groups,
            group_count: vec![0; req.groups.len()],
            prec_vio: 0,
            mutex_vio: 0,
            groups_over: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.mask.len()
    }

    pub fn bounds(&self) -> (usize, usize) {
        self.inst.bounds()
    }

    pub fn clear(&mut self) {
        for v in 0..self.n() {
            if self.mask[v] {
                self.flip(v);
            }
        }
        self.score = 0.0;
    }

    pub fn set(&mut self, sel: &Selection) {
        self.clear();
        for &v in sel.indices() {
            self.flip(v);
        }
    }

    /// Objective change if `v` were flipped.
    pub fn gain(&self, v: usize) -> f64 {
        if self.mask[v] {
            -self.link[v]
        } else {
            self.link[v]
        }
    }

    pub fn link(&self, v: usize) -> f64 {
        self.link[v]
    }

    pub fn flip(&mut self, v: usize) {
        let adding = !self.mask[v];
        if adding {
            self.score += self.link[v];
        } else {
            self.score -= self.link[v];
        }
        for &(j, w) in self.inst.neighbors(v) {
            if adding {
                self.link[j] += w;
            } else {
                self.link[j] -= w;
            }
        }
        self.flip_constraints(v);
    }

    /// Flip `v` updating only the mask and violation counters. The score
    /// and links go stale until the same variable is flipped back this way.
    pub fn flip_constraints(&mut self, v: usize) {
        let adding = !self.mask[v];
        let unmet = self.prereqs[v].iter().filter(|&&i| !self.mask[i]).count();
        let sel_dependents = self.dependents[v].iter().filter(|&&j| self.mask[j]).count();
        let sel_mutex = self.mutex_adj[v].iter().filter(|&&j| self.mask[j]).count() + self.self_mutex[v];
        if adding {
            self.prec_vio += unmet;
            self.prec_vio -= sel_dependents;
            self.mutex_vio += sel_mutex;
            for &g in &self.item_groups[v] {
                self.group_count[g] += 1;
                if self.group_count[g] == 2 {
                    self.groups_over += 1;
                }
            }
            self.size += 1;
        } else {
            self.prec_vio -= unmet;
            self.prec_vio += sel_dependents;
            self.mutex_vio -= sel_mutex;
            for &g in &self.item_groups[v] {
                if self.group_count[g] == 2 {
                    self.groups_over -= 1;
                }
                self.group_count[g] -= 1;
            }
            self.size -= 1;
        }
        self.mask[v] = adding;
    }

    pub fn n_vio(&self) -> usize {
        let (lo, hi) = self.bounds();
        self.prec_vio + self.mutex_vio + self.groups_over + usize::from(self.size < lo) + usize::from(self.size > hi)
    }

    pub fn feasible(&self) -> bool {
        self.n_vio() == 0
    }

    /// Whether adding `v` keeps every constraint except the lower
    /// cardinality bound, given that the current state respects them.
    pub fn can_add(&self, v: usize) -> bool {
        !self.mask[v]
            && self.size < self.bounds().1
            && self.self_mutex[v] == 0
            && self.prereqs[v].iter().all(|&i| self.mask[i])
            && !self.mutex_adj[v].iter().any(|&j| self.mask[j])
            && self.item_groups[v].iter().all(|&g| self.group_count[g] == 0)
    }

    pub fn can_add_ignoring_prereqs(&self, v: usize) -> bool {
        !self.mask[v] && self.size < self.bounds().1 && !self.blocked_by_exclusion(v)
    }

    /// Whether removing `v` keeps every constraint, given a feasible state.
    pub fn can_remove(&self, v: usize) -> bool {
        self.mask[v] && self.size > self.bounds().0 && !self.dependents[v].iter().any(|&j| self.mask[j])
    }

    pub fn prereqs(&self, v: usize) -> &[usize] {
        &self.prereqs[v]
    }

    pub fn dependents(&self, v: usize) -> &[usize] {
        &self.dependents[v]
    }

    pub fn blocked_by_exclusion(&self, v: usize) -> bool {
        self.self_mutex[v] > 0
            || self.mutex_adj[v].iter().any(|&j| self.mask[j])
            || self.item_groups[v].iter().any(|&g| self.group_count[g] > 0)
    }

    pub fn selection(&self) -> Selection {
        Selection::from_mask(&self.mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, Family, GenSpec};
    use crate::model::{check_feasibility, score};
    use rand::{Rng, SeedableRng};

    #[test]
    fn incremental_matches_full_recompute() {
        let spec = GenSpec::new(Family::DenseDeceptive);
        let insts = generate(&spec, 5, 7).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for inst in &insts {
            let mut t = Tracker::new(inst);
            for _ in 0..400 {
                let v = rng.gen_range(0..inst.n());
                let predicted = t.score + t.gain(v);
                t.flip(v);
                assert!((predicted - t.score).abs() < 1e-9);
                let sel = t.selection();
                let full = score(inst, &sel).unwrap();
                assert!((full - t.score).abs() < 1e-8);
                assert_eq!(check_feasibility(inst, &sel).unwrap().n_vio, t.n_vio());
            }
        }
    }
}
