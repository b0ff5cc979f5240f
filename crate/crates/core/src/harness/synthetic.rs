//! Synthetic tasks whose labels follow from the tree alone.
//!
//! Sequences are `[CLS]` followed by the words, so word `k` (1-based) sits at
//! position `k`. A word's id encodes its depth; marked words use separate id
//! bands.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::HarnessError;
use crate::conllu::{DependencyTree, Token};

pub const CLS: usize = 0;
pub const SEP: usize = 1;
pub const PAD: usize = 2;
const WORD_BASE: usize = 4;
const MARK_A_BASE: usize = 20;
const MARK_B_BASE: usize = 36;
const MAX_DEPTH_ID: usize = 15;
/// Smallest vocabulary that holds every id produced here.
pub const MIN_VOCAB: usize = MARK_B_BASE + MAX_DEPTH_ID + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    HeadPredict,
    Span,
    Classify,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::HeadPredict => "head-predict",
            Task::Span => "span",
            Task::Classify => "classify",
        })
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "head-predict" => Ok(Task::HeadPredict),
            "span" => Ok(Task::Span),
            "classify" => Ok(Task::Classify),
            _ => Err(format!("unknown task {s:?} (expected head-predict, span or classify)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// Head position of every word; `0` points at `[CLS]` for the root.
    Heads(Vec<usize>),
    /// `(start, end)` positions, or `None` when the question is unanswerable.
    Span(Option<(usize, usize)>),
    /// 0: first marked word dominates the second, 1: the reverse, 2: neither.
    Class(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExample {
    pub id: String,
    pub tree: DependencyTree,
    pub token_ids: Vec<usize>,
    pub target: Target,
}

impl SyntheticExample {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Display forms, `[CLS]` first.
    pub fn tokens(&self) -> Vec<String> {
        std::iter::once("[CLS]".to_string())
            .chain(self.tree.tokens.iter().map(|t| t.form.clone()))
            .collect()
    }
}

fn depth_id(base: usize, depth: usize) -> usize {
    base + depth.min(MAX_DEPTH_ID)
}

/// Random recursive tree over `n` words: words join in a random order and
/// each attaches to a uniformly drawn earlier word.
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> DependencyTree {
    assert!(n > 0, "a tree needs at least one word");
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for t in 1..n {
        heads[order[t] - 1] = order[rng.gen_range(0..t)];
    }
    let tokens = heads
        .iter()
        .enumerate()
        .map(|(k, &h)| Token::new(k + 1, format!("w{}", k + 1), h))
        .collect();
    DependencyTree::from_tokens(tokens).expect("constructed trees are valid")
}

fn is_ancestor(tree: &DependencyTree, a: usize, of: usize) -> bool {
    let mut cur = tree.head(of);
    while cur != 0 {
        if cur == a {
            return true;
        }
        cur = tree.head(cur);
    }
    false
}

/// Builds one example for `task` over an existing tree.
pub fn example_from_tree<R: Rng>(task: Task, id: String, tree: DependencyTree, rng: &mut R) -> SyntheticExample {
    let n = tree.len();
    let mut ids: Vec<usize> = std::iter::once(CLS)
        .chain((1..=n).map(|k| depth_id(WORD_BASE, tree.depth(k))))
        .collect();
    let target = match task {
        Task::HeadPredict => Target::Heads(tree.heads()),
        Task::Span => {
            let k = rng.gen_range(1..=n);
            ids[k] = depth_id(MARK_A_BASE, tree.depth(k));
            let h = tree.head(k);
            Target::Span((h != 0).then(|| (k.min(h), k.max(h))))
        }
        Task::Classify => {
            let a = rng.gen_range(1..=n);
            let b = if n == 1 {
                a
            } else {
                let r = rng.gen_range(1..n);
                if r >= a {
                    r + 1
                } else {
                    r
                }
            };
            ids[a] = depth_id(MARK_A_BASE, tree.depth(a));
            if b != a {
                ids[b] = depth_id(MARK_B_BASE, tree.depth(b));
            }
            let label = if a != b && is_ancestor(&tree, a, b) {
                0
            } else if a != b && is_ancestor(&tree, b, a) {
                1
            } else {
                2
            };
            Target::Class(label)
        }
    };
    SyntheticExample {
        id,
        tree,
        token_ids: ids,
        target,
    }
}

/// `n_examples` examples with word counts drawn from `min_words..=max_words`.
pub fn gen_synthetic<R: Rng>(
    task: Task,
    n_examples: usize,
    min_words: usize,
    max_words: usize,
    max_len: usize,
    rng: &mut R,
) -> Result<Vec<SyntheticExample>, HarnessError> {
    if min_words == 0 || min_words > max_words {
        return Err(HarnessError::Config(format!("bad size range {min_words}..={max_words}")));
    }
    if max_words + 1 > max_len {
        return Err(HarnessError::Config(format!(
            "{max_words} words plus [CLS] exceed max_len {max_len}"
        )));
    }
    Ok((0..n_examples)
        .map(|k| {
            let n = rng.gen_range(min_words..=max_words);
            let tree = random_tree(n, rng);
            example_from_tree(task, format!("ex{k}"), tree, rng)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::validate_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_and_oversized() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_synthetic(Task::Span, 0, 2, 5, 64, &mut rng).unwrap().is_empty());
        assert!(gen_synthetic(Task::Span, 1, 2, 64, 64, &mut rng).is_err());
    }

    #[test]
    fn trees_are_valid_and_ids_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for task in [Task::HeadPredict, Task::Span, Task::Classify] {
            for ex in gen_synthetic(task, 200, 1, 12, 64, &mut rng).unwrap() {
                validate_tree(&ex.tree).unwrap();
                assert_eq!(ex.len(), ex.tree.len() + 1);
                assert_eq!(ex.token_ids[0], CLS);
                assert!(ex.token_ids.iter().all(|&i| i < MIN_VOCAB));
            }
        }
    }

    #[test]
    fn span_targets_follow_the_marked_word() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for ex in gen_synthetic(Task::Span, 200, 1, 8, 64, &mut rng).unwrap() {
            let k = (1..ex.len()).find(|&p| ex.token_ids[p] >= MARK_A_BASE).unwrap();
            let h = ex.tree.head(k);
            let expected = if h == 0 { None } else { Some((k.min(h), k.max(h))) };
            assert_eq!(ex.target, Target::Span(expected));
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = gen_synthetic(Task::Classify, 20, 2, 9, 64, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = gen_synthetic(Task::Classify, 20, 2, 9, 64, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }
}

#[cfg(test)]
mod label_tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn head_labels_match_tree_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let exs = gen_synthetic(Task::HeadPredict, 10_000, 1, 12, 64, &mut rng).unwrap();
        for ex in exs {
            let Target::Heads(h) = &ex.target else { panic!() };
            let from_tokens: Vec<usize> = ex.tree.tokens.iter().map(|t| t.head).collect();
            assert_eq!(*h, from_tokens);
        }
    }

    #[test]
    fn classify_labels_by_ancestry() {
        // 1 <- 2 <- 3, plus 4 under 1
        let tree = DependencyTree::from_heads(&[0, 1, 2, 1]).unwrap();
        assert!(is_ancestor(&tree, 1, 3));
        assert!(!is_ancestor(&tree, 3, 1));
        assert!(!is_ancestor(&tree, 4, 3));
    }
}
