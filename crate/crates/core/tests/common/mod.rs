//! Reference implementations that work on the raw JSON form of an instance,
//! plus proptest strategies for small random instances.
#![allow(dead_code)]

use proptest::prelude::*;
use sds_core::model::Instance;
use serde_json::{json, Value};

pub fn raw(inst: &Instance) -> Value {
    serde_json::from_str(&inst.to_json()).unwrap()
}

fn pairs(v: &Value) -> Vec<(usize, usize)> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_u64().unwrap() as usize, p[1].as_u64().unwrap() as usize))
        .collect()
}

pub fn oracle_score(doc: &Value, mask: &[bool]) -> f64 {
    let vars = doc["catalog"]["variables"].as_array().unwrap();
    let mut s = 0.0;
    for (i, v) in vars.iter().enumerate() {
        if mask[i] {
            s += v["weight"].as_f64().unwrap();
        }
    }
    for (k, w) in doc["catalog"]["interactions"].as_object().unwrap() {
        let mut it = k.split(',').map(|p| p.trim().parse::<usize>().unwrap());
        let (a, b) = (it.next().unwrap(), it.next().unwrap());
        if mask[a] && mask[b] {
            s += w.as_f64().unwrap();
        }
    }
    s
}

pub fn oracle_n_vio(doc: &Value, mask: &[bool]) -> usize {
    let req = &doc["requirements"];
    let lo = req["cardinality_bounds"][0].as_u64().unwrap() as usize;
    let hi = req["cardinality_bounds"][1].as_u64().unwrap() as usize;
    let k = mask.iter().filter(|&&b| b).count();
    let mut v = usize::from(k < lo) + usize::from(k > hi);
    v += pairs(&req["precedence"]).into_iter().filter(|&(i, j)| mask[j] && !mask[i]).count();
    v += pairs(&req["mutex"]).into_iter().filter(|&(a, b)| mask[a] && mask[b]).count();
    for members in req["groups"].as_object().unwrap().values() {
        let c = members.as_array().unwrap().iter().filter(|m| mask[m.as_u64().unwrap() as usize]).count();
        v += usize::from(c > 1);
    }
    v
}

pub fn mask_of(n: usize, bits: u64) -> Vec<bool> {
    (0..n).map(|i| bits >> i & 1 == 1).collect()
}

/// Best feasible objective by enumerating all masks, or `None`.
pub fn oracle_optimum(inst: &Instance) -> Option<f64> {
    let doc = raw(inst);
    let n = inst.n();
    assert!(n <= 20);
    (0u64..1 << n)
        .map(|b| mask_of(n, b))
        .filter(|m| oracle_n_vio(&doc, m) == 0)
        .map(|m| oracle_score(&doc, &m))
        .max_by(f64::total_cmp)
}

/// Random instance with up to `max_n` variables. Weights and interactions are
/// small integers so float sums are exact.
pub fn arb_instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (1..=max_n).prop_flat_map(|n| {
        let weights = prop::collection::vec(-5i32..10, n);
        let inter = prop::collection::vec((0..n, 0..n, -8i32..8), 0..=2 * n);
        let prec = prop::collection::vec((0..n, 0..n), 0..=n / 3);
        let mutex = prop::collection::vec((0..n, 0..n), 0..=n / 3);
        let groups = prop::collection::vec(prop::collection::vec(0..n, 1..=3), 0..=2);
        let bounds = (0..=n, 0..=n);
        (Just(n), weights, inter, prec, mutex, groups, bounds).prop_map(|(n, w, inter, prec, mutex, groups, (a, b))| {
            let mut ints = serde_json::Map::new();
            for (i, j, v) in inter {
                if i != j && v != 0 {
                    ints.insert(format!("{},{}", i.min(j), i.max(j)), json!(v));
                }
            }
            let prec: Vec<_> = prec.into_iter().filter(|(i, j)| i != j).map(|(i, j)| json!([i, j])).collect();
            let mutex: Vec<_> = mutex.into_iter().filter(|(i, j)| i != j).map(|(i, j)| json!([i, j])).collect();
            let groups: serde_json::Map<String, Value> = groups
                .into_iter()
                .enumerate()
                .map(|(k, mut g)| {
                    g.sort();
                    g.dedup();
                    (format!("g{k}"), json!(g))
                })
                .collect();
            let doc = json!({
                "uuid": "p",
                "problem_type": "prop",
                "requirements": {
                    "n_variables": n,
                    "cardinality_bounds": [a.min(b), a.max(b)],
                    "precedence": prec,
                    "mutex": mutex,
                    "groups": groups,
                },
                "catalog": {
                    "variables": w.iter().map(|&x| json!({"weight": x})).collect::<Vec<_>>(),
                    "interactions": ints,
                }
            });
            Instance::from_json(&doc.to_string()).unwrap()
        })
    })
}
