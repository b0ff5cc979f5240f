//! Reading dependency-annotated sentences.
//!
//! Two input flavours are understood: standard CoNLL-U (only columns ID,
//! FORM, HEAD and DEPREL are consumed) and a minimal three-column
//! `index<TAB>form<TAB>head` format. Every tree that leaves this module has
//! passed [`validate_tree`].

use std::fmt;
use std::path::Path;

use thiserror::Error;

/// A single token of a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position within the sentence.
    pub index: usize,
    pub form: String,
    /// 1-based index of the syntactic head, 0 for the root.
    pub head: usize,
    pub deprel: String,
    /// Reserved symbols (separators, padding). They never take part in the parse.
    pub is_special: bool,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>, head: usize) -> Self {
        Token {
            index,
            form: form.into(),
            head,
            deprel: String::from("_"),
            is_special: false,
        }
    }

    pub fn with_deprel(mut self, deprel: impl Into<String>) -> Self {
        self.deprel = deprel.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    pub tokens: Vec<Token>,
    /// 1-based index of the unique non-special token whose head is 0.
    pub root_index: usize,
}

/// First violated tree invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeDiagnostic {
    #[error("sentence has no tokens")]
    Empty,
    #[error("token at position {position} has index {index}, expected {expected}")]
    BadIndex {
        position: usize,
        index: usize,
        expected: usize,
    },
    #[error("token {index} is its own head")]
    SelfHead { index: usize },
    #[error("token {index} has head {head} outside the sentence")]
    HeadOutOfRange { index: usize, head: usize },
    #[error("token {index} is attached to special token {head}")]
    HeadIsSpecial { index: usize, head: usize },
    #[error("special token {index} has head {head}, expected 0")]
    SpecialWithHead { index: usize, head: usize },
    #[error("no root: no non-special token has head 0")]
    NoRoot,
    #[error("multiple roots: tokens {first} and {second} both have head 0")]
    MultipleRoots { first: usize, second: usize },
    #[error("cycle through token {index}")]
    Cycle { index: usize },
    #[error("root_index is {found}, but the root is token {expected}")]
    RootMismatch { found: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("sentence {sentence} (starting at line {line}): {diagnostic}")]
    InvalidTree {
        sentence: usize,
        line: usize,
        diagnostic: TreeDiagnostic,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl DependencyTree {
    /// Builds a tree from bare head indices (`heads[k]` is the head of token `k+1`).
    pub fn from_heads(heads: &[usize]) -> Result<Self, TreeDiagnostic> {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(k, &h)| Token::new(k + 1, format!("w{}", k + 1), h))
            .collect();
        Self::from_tokens(tokens)
    }

    /// Builds and validates a tree, filling in `root_index`.
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self, TreeDiagnostic> {
        let root_index = tokens
            .iter()
            .find(|t| !t.is_special && t.head == 0)
            .map(|t| t.index)
            .unwrap_or(0);
        let tree = DependencyTree { tokens, root_index };
        validate_tree(&tree)?;
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Head of the 1-based token `index`.
    pub fn head(&self, index: usize) -> usize {
        self.tokens[index - 1].head
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    /// Depth of token `index` (the root has depth 0).
    pub fn depth(&self, index: usize) -> usize {
        let mut depth = 0;
        let mut cur = self.head(index);
        while cur != 0 {
            depth += 1;
            cur = self.head(cur);
        }
        depth
    }

    /// Columns ID, FORM, HEAD, DEPREL rendered as CoNLL-U lines.
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(&format!(
                "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_\n",
                t.index, t.form, t.head, t.deprel
            ));
        }
        out
    }
}

impl fmt::Display for DependencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.tokens.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}/{}", t.form, t.head)?;
        }
        Ok(())
    }
}

/// Checks every tree invariant, reporting the first one that fails.
pub fn validate_tree(tree: &DependencyTree) -> Result<(), TreeDiagnostic> {
    let n = tree.tokens.len();
    if n == 0 {
        return Err(TreeDiagnostic::Empty);
    }
    for (pos, t) in tree.tokens.iter().enumerate() {
        if t.index != pos + 1 {
            return Err(TreeDiagnostic::BadIndex {
                position: pos + 1,
                index: t.index,
                expected: pos + 1,
            });
        }
    }
    let mut roots = Vec::new();
    for t in &tree.tokens {
        if t.is_special {
            if t.head != 0 {
                return Err(TreeDiagnostic::SpecialWithHead {
                    index: t.index,
                    head: t.head,
                });
            }
            continue;
        }
        if t.head == t.index {
            return Err(TreeDiagnostic::SelfHead { index: t.index });
        }
        if t.head > n {
            return Err(TreeDiagnostic::HeadOutOfRange {
                index: t.index,
                head: t.head,
            });
        }
        if t.head != 0 && tree.tokens[t.head - 1].is_special {
            return Err(TreeDiagnostic::HeadIsSpecial {
                index: t.index,
                head: t.head,
            });
        }
        if t.head == 0 {
            roots.push(t.index);
        }
    }

    // 0 = unvisited, 1 = on the current walk, 2 = known to reach the root
    let mut state = vec![0u8; n + 1];
    for start in 1..=n {
        if tree.tokens[start - 1].is_special || state[start] == 2 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        while cur != 0 && state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            cur = tree.tokens[cur - 1].head;
        }
        if cur != 0 && state[cur] == 1 {
            return Err(TreeDiagnostic::Cycle { index: cur });
        }
        for p in path {
            state[p] = 2;
        }
    }
    let root = match roots[..] {
        [] => return Err(TreeDiagnostic::NoRoot),
        [root] => root,
        [first, second, ..] => return Err(TreeDiagnostic::MultipleRoots { first, second }),
    };
    if tree.root_index != root {
        return Err(TreeDiagnostic::RootMismatch {
            found: tree.root_index,
            expected: root,
        });
    }
    Ok(())
}

/// Column layout of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// ≥ 8 tab-separated columns; ID, FORM, HEAD, DEPREL are read.
    Conllu,
    /// `index<TAB>form<TAB>head`.
    Minimal,
}

impl Format {
    /// `.conllu` files are CoNLL-U, everything else the minimal format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("conllu") => Format::Conllu,
            _ => Format::Minimal,
        }
    }
}

/// Parses CoNLL-U text into validated trees, one per sentence block.
pub fn parse_conllu(text: &str) -> Result<Vec<DependencyTree>, IngestError> {
    parse_with_format(text, Format::Conllu)
}

/// Parses the minimal `index<TAB>form<TAB>head` format.
pub fn parse_minimal(text: &str) -> Result<Vec<DependencyTree>, IngestError> {
    parse_with_format(text, Format::Minimal)
}

pub fn read_trees(path: &Path) -> Result<Vec<DependencyTree>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_with_format(&text, Format::from_path(path))
}

pub fn parse_with_format(text: &str, format: Format) -> Result<Vec<DependencyTree>, IngestError> {
    let mut trees = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut block_start = 0;

    let mut finish = |tokens: &mut Vec<Token>, block_start: usize| -> Result<(), IngestError> {
        if tokens.is_empty() {
            return Ok(());
        }
        let sentence = trees.len() + 1;
        let tree = DependencyTree::from_tokens(std::mem::take(tokens)).map_err(|diagnostic| {
            IngestError::InvalidTree {
                sentence,
                line: block_start,
                diagnostic,
            }
        })?;
        trees.push(tree);
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut tokens, block_start)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (min_cols, head_col, deprel_col) = match format {
            Format::Conllu => (8, 6, Some(7)),
            Format::Minimal => (3, 2, None),
        };
        if cols.len() < min_cols {
            return Err(IngestError::Malformed {
                line: lineno,
                message: format!("expected at least {min_cols} tab-separated columns, found {}", cols.len()),
            });
        }
        // multiword ranges ("3-4") and empty nodes ("8.1")
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0].parse().map_err(|_| IngestError::Malformed {
            line: lineno,
            message: format!("token index {:?} is not a non-negative integer", cols[0]),
        })?;
        let head: usize = cols[head_col].parse().map_err(|_| IngestError::Malformed {
            line: lineno,
            message: format!("head {:?} is not a non-negative integer", cols[head_col]),
        })?;
        if tokens.iter().any(|t| t.index == index) {
            return Err(IngestError::Malformed {
                line: lineno,
                message: format!("duplicate token index {index}"),
            });
        }
        if tokens.is_empty() {
            block_start = lineno;
        }
        let deprel = deprel_col.map(|c| cols[c]).unwrap_or("_");
        tokens.push(Token::new(index, cols[1], head).with_deprel(deprel));
    }
    finish(&mut tokens, block_start)?;
    Ok(trees)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HE_SLEEPS: &str = "1\tHe\the\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n\
                             2\tsleeps\tsleep\tVERB\tVBZ\t_\t0\troot\t_\t_\n\
                             3\t.\t.\tPUNCT\t.\t_\t2\tpunct\t_\t_\n";

    #[test]
    fn smallest_sentence() {
        let trees = parse_conllu(HE_SLEEPS).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].root_index, 2);
        assert_eq!(trees[0].heads(), vec![2, 0, 2]);
        assert_eq!(trees[0].tokens[0].deprel, "nsubj");
    }

    #[test]
    fn empty_input() {
        assert!(parse_conllu("").unwrap().is_empty());
        assert!(parse_conllu("\n\n# just a comment\n").unwrap().is_empty());
    }

    #[test]
    fn skips_comments_ranges_and_empty_nodes() {
        let text = "# sent_id = 1\n\
                    1\tI\t_\t_\t_\t_\t2\tnsubj\t_\t_\n\
                    2-3\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    2\tdo\t_\t_\t_\t_\t0\troot\t_\t_\n\
                    2.1\tgap\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    3\tnot\t_\t_\t_\t_\t2\tadvmod\t_\t_\n";
        let trees = parse_conllu(text).unwrap();
        assert_eq!(trees[0].heads(), vec![2, 0, 2]);
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let err = parse_conllu("1\tHe\t_\t_\n").unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 1, .. }), "{err}");
        let err = parse_conllu("x\tHe\t_\t_\t_\t_\t0\troot\n").unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 1, .. }));
        let err = parse_conllu("1\tHe\t_\t_\t_\t_\tzero\troot\n").unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 1, .. }));
        let dup = "1\ta\t_\t_\t_\t_\t0\troot\n1\tb\t_\t_\t_\t_\t1\tdep\n";
        let err = parse_conllu(dup).unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 2, .. }));
    }

    #[test]
    fn self_head_in_tenth_sentence() {
        let mut text = String::new();
        for s in 0..10 {
            if s == 6 {
                text.push_str("1\tA\t_\t_\t_\t_\t0\troot\t_\t_\n2\tB\t_\t_\t_\t_\t2\tdep\t_\t_\n\n");
            } else {
                text.push_str(HE_SLEEPS);
                text.push('\n');
            }
        }
        let err = parse_conllu(&text).unwrap_err();
        match err {
            IngestError::InvalidTree {
                sentence,
                line,
                diagnostic,
            } => {
                assert_eq!(sentence, 7);
                assert_eq!(line, 6 * 4 + 1);
                assert_eq!(diagnostic, TreeDiagnostic::SelfHead { index: 2 });
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn validator_examples() {
        assert!(DependencyTree::from_heads(&[0, 1, 2]).is_ok());
        let cyc = DependencyTree {
            tokens: vec![Token::new(1, "a", 2), Token::new(2, "b", 1)],
            root_index: 0,
        };
        assert!(matches!(
            validate_tree(&cyc),
            Err(TreeDiagnostic::Cycle { index: 1 | 2 })
        ));
        let cyc = DependencyTree {
            tokens: vec![
                Token::new(1, "a", 0),
                Token::new(2, "b", 3),
                Token::new(3, "c", 2),
            ],
            root_index: 1,
        };
        assert!(matches!(
            validate_tree(&cyc),
            Err(TreeDiagnostic::Cycle { index: 2 | 3 })
        ));
        assert_eq!(
            DependencyTree::from_heads(&[0, 0, 1]),
            Err(TreeDiagnostic::MultipleRoots { first: 1, second: 2 })
        );
        assert_eq!(
            DependencyTree::from_heads(&[0, 5]),
            Err(TreeDiagnostic::HeadOutOfRange { index: 2, head: 5 })
        );
    }

    #[test]
    fn cycle_beside_a_root() {
        let with_root = DependencyTree {
            tokens: vec![
                Token::new(1, "a", 2),
                Token::new(2, "b", 1),
                Token::new(3, "c", 0),
            ],
            root_index: 3,
        };
        assert!(matches!(
            validate_tree(&with_root),
            Err(TreeDiagnostic::Cycle { index: 1 | 2 })
        ));
    }

    #[test]
    fn minimal_format() {
        let trees = parse_minimal("1\tHe\t2\n2\tsleeps\t0\n3\t.\t2\n").unwrap();
        assert_eq!(trees[0].heads(), vec![2, 0, 2]);
        assert_eq!(Format::from_path(Path::new("a.conllu")), Format::Conllu);
        assert_eq!(Format::from_path(Path::new("a.tsv")), Format::Minimal);
    }

    #[test]
    fn depth_follows_head_chain() {
        let t = DependencyTree::from_heads(&[0, 1, 2, 1]).unwrap();
        assert_eq!(
            (1..=4).map(|i| t.depth(i)).collect::<Vec<_>>(),
            vec![0, 1, 2, 1]
        );
    }
}
