#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use sgnet::conllu::DependencyTree;
use sgnet::numerics::{Graph, ParamId, ParamStore, Var};

/// Random tree: a random word order where each word hangs off an earlier one.
pub fn random_heads<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for t in 1..n {
        heads[order[t] - 1] = order[rng.gen_range(0..t)];
    }
    heads
}

pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> DependencyTree {
    DependencyTree::from_heads(&random_heads(n, rng)).unwrap()
}

/// Ancestors by following head links until the virtual root.
pub fn oracle_ancestors(heads: &[usize], i: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut cur = heads[i - 1];
    while cur != 0 {
        out.insert(cur);
        cur = heads[cur - 1];
    }
    out
}

/// Largest relative error between reverse-mode and central differences
/// over every coordinate of `params`.
pub fn fd_max_rel_error(
    store: &ParamStore,
    params: &[ParamId],
    h: f64,
    f: impl Fn(&mut Graph, &ParamStore) -> Var,
) -> f64 {
    let mut g = Graph::new();
    let out = f(&mut g, store);
    let grads = g.backward(out);
    let mut work = store.clone();
    let mut worst = 0.0f64;
    for &id in params {
        let analytic = g.param_var(id).and_then(|v| grads.get(v).cloned());
        for k in 0..store.value(id).len() {
            let a = analytic.as_ref().map_or(0.0, |t| t.data()[k]);
            let orig = store.value(id).data()[k];
            let mut eval = |x: f64| {
                work.get_mut(id).value.data_mut()[k] = x;
                let mut g = Graph::new();
                let v = f(&mut g, &work);
                g.value(v).item()
            };
            let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
            work.get_mut(id).value.data_mut()[k] = orig;
            worst = worst.max((a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs()));
        }
    }
    worst
}

/// All `(k, l)` with `1 < k ≤ l ≤ n` (1-based), first maximum kept.
pub fn brute_force_span(s: &[f64], e: &[f64]) -> (f64, (usize, usize)) {
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for k in 1..s.len() {
        for l in k..s.len() {
            let v = s[k] + e[l];
            if v > best.0 {
                best = (v, (k + 1, l + 1));
            }
        }
    }
    best
}

pub fn random_probs<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}
