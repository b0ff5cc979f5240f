//! Syntactic-dependency-of-interest masks.
//!
//! Row `i` of a mask lists the positions query `i` may attend to: itself and
//! every ancestor of its token in the dependency tree. Reserved symbols
//! (`[CLS]`, `[SEP]`, padding) only see themselves.

use std::collections::BTreeSet;
use std::ops::Range;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{validate_tree, DependencyTree, TreeDiagnostic};
use crate::numerics::BitMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("invalid tree: {0}")]
    InvalidTree(#[from] TreeDiagnostic),
    #[error("token index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("token {0} is a special token and has no ancestors")]
    SpecialToken(usize),
    #[error("special position {position} outside a sequence of length {len}")]
    SpecialOutOfRange { position: usize, len: usize },
    #[error("alignment covers {alignment} words but the mask has {mask} positions")]
    AlignmentMismatch { alignment: usize, mask: usize },
    #[error("alignment ranges must be contiguous, non-empty and start at 0 (word {0})")]
    BadAlignment(usize),
    #[error("cannot merge an empty list of masks")]
    EmptyMerge,
    #[error("degradation fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("malformed mask: {0}")]
    Malformed(String),
}

/// Square boolean attention support; `get(i, j)` is true when query `i` may
/// attend to key `j`. Positions are 0-based sequence positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SdoiMask {
    bits: BitMatrix,
}

impl SdoiMask {
    pub fn from_matrix(bits: BitMatrix) -> Result<Self, MaskError> {
        if bits.rows() != bits.cols() {
            return Err(MaskError::Malformed(format!(
                "mask must be square, got {}x{}",
                bits.rows(),
                bits.cols()
            )));
        }
        let mask = SdoiMask { bits };
        for i in 0..mask.n() {
            if !mask.get(i, i) {
                return Err(MaskError::Malformed(format!("diagonal entry {i} is 0")));
            }
        }
        Ok(mask)
    }

    pub fn identity(n: usize) -> Self {
        SdoiMask {
            bits: BitMatrix::identity(n),
        }
    }

    pub fn all_ones(n: usize) -> Self {
        SdoiMask {
            bits: BitMatrix::filled(n, n, true),
        }
    }

    pub fn n(&self) -> usize {
        self.bits.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits.get(i, j)
    }

    /// Allowed key positions of query `i`.
    pub fn row_set(&self, i: usize) -> BTreeSet<usize> {
        (0..self.n()).filter(|&j| self.get(i, j)).collect()
    }

    pub fn as_matrix(&self) -> &BitMatrix {
        &self.bits
    }

    pub fn is_unit_row(&self, i: usize) -> bool {
        (0..self.n()).all(|j| self.get(i, j) == (i == j))
    }

    pub fn to_json(&self) -> String {
        let rows = (0..self.n())
            .map(|i| self.bits.row(i).iter().map(|&b| b as u8).collect())
            .collect();
        serde_json::to_string(&MaskJson { n: self.n(), rows }).expect("mask serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MaskError> {
        let parsed: MaskJson =
            serde_json::from_str(text).map_err(|e| MaskError::Malformed(e.to_string()))?;
        if parsed.rows.len() != parsed.n || parsed.rows.iter().any(|r| r.len() != parsed.n) {
            return Err(MaskError::Malformed(format!(
                "expected {0}x{0} rows",
                parsed.n
            )));
        }
        let mut bits = Vec::with_capacity(parsed.n * parsed.n);
        for row in &parsed.rows {
            for &v in row {
                match v {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    other => return Err(MaskError::Malformed(format!("entry {other} is not 0/1"))),
                }
            }
        }
        Self::from_matrix(BitMatrix::new(parsed.n, parsed.n, bits).expect("n*n bits"))
    }

    /// Run-length sidecar:
    /// `b"SDOI"`, version `u8 = 1`, `n: u32`, `runs: u32`, then `runs` lengths
    /// as `u32`, alternating 0-runs and 1-runs over the row-major bits and
    /// starting with a (possibly empty) 0-run. Integers are little-endian.
    pub fn to_rle_bytes(&self) -> Vec<u8> {
        let mut runs: Vec<u32> = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in self.bits.bits() {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        let mut out = Vec::with_capacity(13 + runs.len() * 4);
        out.extend_from_slice(b"SDOI");
        out.push(1);
        out.extend_from_slice(&(self.n() as u32).to_le_bytes());
        out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
        for r in runs {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out
    }

    pub fn from_rle_bytes(bytes: &[u8]) -> Result<Self, MaskError> {
        let bad = |m: &str| MaskError::Malformed(m.to_string());
        if bytes.len() < 13 || &bytes[..4] != b"SDOI" || bytes[4] != 1 {
            return Err(bad("missing SDOI header"));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes"));
        let n = word(5) as usize;
        let count = word(9) as usize;
        if bytes.len() != 13 + count * 4 {
            return Err(bad("run table length mismatch"));
        }
        let mut bits = Vec::with_capacity(n * n);
        let mut value = false;
        for k in 0..count {
            let len = word(13 + 4 * k) as usize;
            if bits.len() + len > n * n {
                return Err(bad("runs exceed n*n bits"));
            }
            bits.extend(std::iter::repeat(value).take(len));
            value = !value;
        }
        if bits.len() != n * n {
            return Err(bad("runs do not cover n*n bits"));
        }
        Self::from_matrix(BitMatrix::new(n, n, bits).expect("n*n bits"))
    }
}

#[derive(Serialize, Deserialize)]
struct MaskJson {
    n: usize,
    rows: Vec<Vec<u8>>,
}

/// Indices on the head chain above token `i` (1-based), excluding `i`.
pub fn ancestors(tree: &DependencyTree, i: usize) -> Result<BTreeSet<usize>, MaskError> {
    if i == 0 || i > tree.len() {
        return Err(MaskError::IndexOutOfRange {
            index: i,
            len: tree.len(),
        });
    }
    if tree.tokens[i - 1].is_special {
        return Err(MaskError::SpecialToken(i));
    }
    let mut out = BTreeSet::new();
    let mut cur = tree.head(i);
    while cur != 0 {
        // a validated tree never revisits a node
        if !out.insert(cur) {
            return Err(MaskError::InvalidTree(TreeDiagnostic::Cycle { index: cur }));
        }
        cur = tree.head(cur);
    }
    Ok(out)
}

/// Sequence positions of the tree tokens when `special_positions` are
/// interleaved: token `k` (1-based) lands on the `k`-th non-special position.
pub fn token_positions(
    n_tokens: usize,
    special_positions: &BTreeSet<usize>,
) -> Result<Vec<usize>, MaskError> {
    let len = n_tokens + special_positions.len();
    if let Some(&p) = special_positions.iter().find(|&&p| p >= len) {
        return Err(MaskError::SpecialOutOfRange { position: p, len });
    }
    Ok((0..len).filter(|p| !special_positions.contains(p)).collect())
}

/// Builds the SDOI mask over the merged sequence of tree tokens and special
/// positions.
pub fn build_sdoi_mask(
    tree: &DependencyTree,
    special_positions: &BTreeSet<usize>,
) -> Result<SdoiMask, MaskError> {
    validate_tree(tree)?;
    let positions = token_positions(tree.len(), special_positions)?;
    let len = positions.len() + special_positions.len();
    let mut bits = BitMatrix::identity(len);
    for (k, &row) in positions.iter().enumerate() {
        let token = &tree.tokens[k];
        if token.is_special {
            continue;
        }
        let mut cur = token.head;
        while cur != 0 {
            bits.set(row, positions[cur - 1], true);
            cur = tree.head(cur);
        }
    }
    Ok(SdoiMask { bits })
}

/// How a word-level mask is expanded over subword pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubwordMode {
    /// Every piece inherits its word's full row and column.
    #[default]
    SharedTag,
    /// Pieces after the first are children of the first piece; only first
    /// pieces stand in for their word as ancestors.
    FirstPieceHead,
}

impl std::str::FromStr for SubwordMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shared-tag" => Ok(SubwordMode::SharedTag),
            "first-piece-head" => Ok(SubwordMode::FirstPieceHead),
            _ => Err(format!("unknown subword mode {s:?} (expected shared-tag or first-piece-head)")),
        }
    }
}

/// Contiguous piece ranges per word, in order, covering `0..n_subwords`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordAlignment {
    ranges: Vec<Range<usize>>,
    word_of: Vec<usize>,
}

impl SubwordAlignment {
    pub fn new(ranges: Vec<Range<usize>>) -> Result<Self, MaskError> {
        let mut next = 0;
        let mut word_of = Vec::new();
        for (w, r) in ranges.iter().enumerate() {
            if r.start != next || r.end <= r.start {
                return Err(MaskError::BadAlignment(w));
            }
            word_of.extend(std::iter::repeat(w).take(r.len()));
            next = r.end;
        }
        Ok(SubwordAlignment { ranges, word_of })
    }

    /// Alignment where word `w` has `counts[w]` pieces.
    pub fn from_counts(counts: &[usize]) -> Result<Self, MaskError> {
        let mut start = 0;
        let ranges = counts
            .iter()
            .map(|&c| {
                let r = start..start + c;
                start += c;
                r
            })
            .collect();
        Self::new(ranges)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_counts(&vec![1; n]).expect("unit counts")
    }

    pub fn n_words(&self) -> usize {
        self.ranges.len()
    }

    pub fn n_subwords(&self) -> usize {
        self.word_of.len()
    }

    pub fn range(&self, word: usize) -> Range<usize> {
        self.ranges[word].clone()
    }

    pub fn word_of(&self, subword: usize) -> usize {
        self.word_of[subword]
    }

    pub fn is_first_piece(&self, subword: usize) -> bool {
        self.ranges[self.word_of[subword]].start == subword
    }
}

/// Expands a word-level mask to subword granularity.
pub fn project_to_subwords(
    mask: &SdoiMask,
    align: &SubwordAlignment,
    mode: SubwordMode,
) -> Result<SdoiMask, MaskError> {
    if align.n_words() != mask.n() {
        return Err(MaskError::AlignmentMismatch {
            alignment: align.n_words(),
            mask: mask.n(),
        });
    }
    let n = align.n_subwords();
    let mut bits = BitMatrix::filled(n, n, false);
    for a in 0..n {
        let wa = align.word_of(a);
        match mode {
            SubwordMode::SharedTag => {
                for wb in 0..mask.n() {
                    if mask.get(wa, wb) {
                        for b in align.range(wb) {
                            bits.set(a, b, true);
                        }
                    }
                }
            }
            SubwordMode::FirstPieceHead => {
                bits.set(a, a, true);
                for wb in 0..mask.n() {
                    // the first piece is an ancestor of its siblings, never of itself
                    if mask.get(wa, wb) && (wb != wa || !align.is_first_piece(a)) {
                        bits.set(a, align.range(wb).start, true);
                    }
                }
            }
        }
    }
    Ok(SdoiMask { bits })
}

/// Places the masks on the diagonal of one larger mask; no cross-block
/// attention.
pub fn block_diagonal_merge(masks: &[SdoiMask]) -> Result<SdoiMask, MaskError> {
    if masks.is_empty() {
        return Err(MaskError::EmptyMerge);
    }
    let total: usize = masks.iter().map(SdoiMask::n).sum();
    let mut bits = BitMatrix::filled(total, total, false);
    let mut offset = 0;
    for m in masks {
        for i in 0..m.n() {
            for j in 0..m.n() {
                if m.get(i, j) {
                    bits.set(offset + i, offset + j, true);
                }
            }
        }
        offset += m.n();
    }
    Ok(SdoiMask { bits })
}

/// `round(p·n)` with halves rounded up.
pub fn degraded_count(p: f64, n: usize) -> usize {
    (p * n as f64 + 0.5).floor() as usize
}

/// Re-attaches `round(p·n)` uniformly chosen non-root tokens to uniformly
/// drawn heads, redrawing any head that would close a cycle.
///
/// `n` counts the non-special tokens; the count is capped at the number of
/// non-root tokens.
pub fn degrade_tree(tree: &DependencyTree, p: f64, seed: u64) -> Result<DependencyTree, MaskError> {
    validate_tree(tree)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(MaskError::BadFraction(p));
    }
    let regular: Vec<usize> = tree
        .tokens
        .iter()
        .filter(|t| !t.is_special)
        .map(|t| t.index)
        .collect();
    let changeable: Vec<usize> = regular
        .iter()
        .copied()
        .filter(|&i| i != tree.root_index)
        .collect();
    let count = degraded_count(p, regular.len()).min(changeable.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = index::sample(&mut rng, changeable.len(), count)
        .into_iter()
        .map(|k| changeable[k])
        .collect();
    chosen.sort_unstable();

    let mut out = tree.clone();
    for i in chosen {
        let candidates: Vec<usize> = regular.iter().copied().filter(|&j| j != i).collect();
        loop {
            let head = candidates[rng.gen_range(0..candidates.len())];
            if !is_descendant(&out, head, i) {
                out.tokens[i - 1].head = head;
                break;
            }
        }
    }
    debug_assert!(validate_tree(&out).is_ok());
    Ok(out)
}

/// True when walking up from `node` reaches `ancestor`.
fn is_descendant(tree: &DependencyTree, node: usize, ancestor: usize) -> bool {
    let mut cur = node;
    while cur != 0 {
        if cur == ancestor {
            return true;
        }
        cur = tree.head(cur);
    }
    false
}

/// Deterministic toy word-piece splitter: pieces of at most `max_piece`
/// characters, continuation pieces prefixed with `##`.
pub fn split_word(form: &str, max_piece: usize) -> Vec<String> {
    let chars: Vec<char> = form.chars().collect();
    if chars.is_empty() {
        return vec![String::new()];
    }
    chars
        .chunks(max_piece.max(1))
        .enumerate()
        .map(|(k, c)| {
            let s: String = c.iter().collect();
            if k == 0 {
                s
            } else {
                format!("##{s}")
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::Token;

    fn chain() -> DependencyTree {
        DependencyTree::from_heads(&[2, 0, 2]).unwrap()
    }

    /// Position 0 is `[CLS]`; token k sits at position k.
    fn figure_sentence() -> DependencyTree {
        DependencyTree::from_tokens(vec![
            Token::new(1, "Income", 2),
            Token::new(2, "reflects", 0),
            Token::new(3, "lower", 5),
            Token::new(4, "credit", 5),
            Token::new(5, "losses", 2),
            Token::new(6, ".", 2),
        ])
        .unwrap()
    }

    #[test]
    fn ancestors_of_chain() {
        assert_eq!(ancestors(&chain(), 1).unwrap(), BTreeSet::from([2]));
        assert!(ancestors(&chain(), 2).unwrap().is_empty());
        assert_eq!(
            ancestors(&chain(), 4),
            Err(MaskError::IndexOutOfRange { index: 4, len: 3 })
        );
    }

    #[test]
    fn credit_example() {
        let t = figure_sentence();
        assert_eq!(ancestors(&t, 4).unwrap(), BTreeSet::from([2, 5]));
        let m = build_sdoi_mask(&t, &BTreeSet::from([0])).unwrap();
        for j in [2, 4, 5] {
            assert!(m.get(4, j));
        }
        for j in [0, 1, 3] {
            assert!(!m.get(4, j));
        }
        assert!(m.is_unit_row(0));
    }

    #[test]
    fn single_token() {
        let t = DependencyTree::from_heads(&[0]).unwrap();
        let m = build_sdoi_mask(&t, &BTreeSet::new()).unwrap();
        assert_eq!(m, SdoiMask::all_ones(1));
    }

    #[test]
    fn special_positions_interleave() {
        // [CLS] w1 w2 w3 [SEP]
        let m = build_sdoi_mask(&chain(), &BTreeSet::from([0, 4])).unwrap();
        assert_eq!(m.n(), 5);
        assert!(m.is_unit_row(0) && m.is_unit_row(4));
        assert_eq!(m.row_set(1), BTreeSet::from([1, 2]));
        assert_eq!(m.row_set(3), BTreeSet::from([2, 3]));
        assert_eq!(
            build_sdoi_mask(&chain(), &BTreeSet::from([7])),
            Err(MaskError::SpecialOutOfRange { position: 7, len: 4 })
        );
    }

    #[test]
    fn projection_examples() {
        let m = build_sdoi_mask(&chain(), &BTreeSet::new()).unwrap();
        let id = SubwordAlignment::identity(3);
        assert_eq!(project_to_subwords(&m, &id, SubwordMode::SharedTag).unwrap(), m);
        assert_eq!(project_to_subwords(&m, &id, SubwordMode::FirstPieceHead).unwrap(), m);

        let split = SubwordAlignment::from_counts(&[2]).unwrap();
        let one = SdoiMask::all_ones(1);
        assert_eq!(
            project_to_subwords(&one, &split, SubwordMode::SharedTag).unwrap(),
            SdoiMask::all_ones(2)
        );
        let p = project_to_subwords(&one, &split, SubwordMode::FirstPieceHead).unwrap();
        assert_eq!(p.row_set(0), BTreeSet::from([0]));
        assert_eq!(p.row_set(1), BTreeSet::from([0, 1]));
        assert!(matches!(
            project_to_subwords(&one, &id, SubwordMode::SharedTag),
            Err(MaskError::AlignmentMismatch { .. })
        ));
    }

    #[test]
    fn first_piece_mode_matches_subword_tree() {
        // words: w1 (2 pieces) <- w2 (root, 1 piece) -> w3 (3 pieces)
        let m = build_sdoi_mask(&chain(), &BTreeSet::new()).unwrap();
        let align = SubwordAlignment::from_counts(&[2, 1, 3]).unwrap();
        let p = project_to_subwords(&m, &align, SubwordMode::FirstPieceHead).unwrap();
        // equivalent subword-level tree over pieces 1..=6
        let sub = DependencyTree::from_heads(&[3, 1, 0, 3, 4, 4]).unwrap();
        assert_eq!(p, build_sdoi_mask(&sub, &BTreeSet::new()).unwrap());
    }

    #[test]
    fn bad_alignments() {
        assert_eq!(
            SubwordAlignment::new(vec![0..1, 2..3]),
            Err(MaskError::BadAlignment(1))
        );
        assert_eq!(SubwordAlignment::from_counts(&[1, 0]), Err(MaskError::BadAlignment(1)));
    }

    #[test]
    fn merge_examples() {
        let one = SdoiMask::all_ones(1);
        assert_eq!(block_diagonal_merge(&[one.clone()]).unwrap(), one);
        assert_eq!(
            block_diagonal_merge(&[one.clone(), one]).unwrap(),
            SdoiMask::identity(2)
        );
        assert_eq!(block_diagonal_merge(&[]), Err(MaskError::EmptyMerge));
    }

    #[test]
    fn degrade_edge_cases() {
        let t = figure_sentence();
        assert_eq!(degrade_tree(&t, 0.0, 9).unwrap(), t);
        let two = DependencyTree::from_heads(&[0, 1]).unwrap();
        assert_eq!(degrade_tree(&two, 1.0, 3).unwrap(), two);
        assert_eq!(degrade_tree(&t, 1.5, 0), Err(MaskError::BadFraction(1.5)));
        assert_eq!(degrade_tree(&t, 0.7, 42), degrade_tree(&t, 0.7, 42));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(degraded_count(0.5, 5), 3);
        assert_eq!(degraded_count(0.25, 2), 1);
        assert_eq!(degraded_count(0.2, 6), 1);
        assert_eq!(degraded_count(1.0, 7), 7);
    }

    #[test]
    fn mask_serialization() {
        let m = build_sdoi_mask(&figure_sentence(), &BTreeSet::from([0, 7])).unwrap();
        let json = m.to_json();
        assert!(json.starts_with("{\"n\":8,\"rows\":[[1,0,0,0,0,0,0,0],"));
        assert_eq!(SdoiMask::from_json(&json).unwrap(), m);
        let rle = m.to_rle_bytes();
        assert_eq!(&rle[..5], b"SDOI\x01");
        assert_eq!(SdoiMask::from_rle_bytes(&rle).unwrap(), m);
        assert!(SdoiMask::from_json("{\"n\":1,\"rows\":[[2]]}").is_err());
        assert!(SdoiMask::from_json("{\"n\":1,\"rows\":[[0]]}").is_err());
        assert!(SdoiMask::from_rle_bytes(&rle[..rle.len() - 1]).is_err());
    }

    #[test]
    fn splitter() {
        assert_eq!(split_word("reflects", 3), vec!["ref", "##lec", "##ts"]);
        assert_eq!(split_word("a", 3), vec!["a"]);
    }
}
