//! Information-gain decision trees over integer attribute rows.

/// Binary tree splitting on `attr ≤ cut`; the `le` child takes satisfying
/// rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree {
    Leaf(bool),
    Node {
        attr: usize,
        cut: i64,
        le: Box<Tree>,
        gt: Box<Tree>,
    },
}

impl Tree {
    pub fn classify(&self, row: &[i64]) -> bool {
        match self {
            Tree::Leaf(l) => *l,
            Tree::Node { attr, cut, le, gt } => {
                if row[*attr] <= *cut {
                    le.classify(row)
                } else {
                    gt.classify(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// Two opposite-label rows are identical on every attribute.
    Unseparable { pos_row: usize, neg_row: usize },
}

pub fn entropy(pos: usize, neg: usize) -> f64 {
    let total = (pos + neg) as f64;
    let mut e = 0.0;
    for n in [pos, neg] {
        if n > 0 {
            let p = n as f64 / total;
            e -= p * p.log2();
        }
    }
    e
}

/// ε(S) − (|S≤|·ε(S≤) + |S>|·ε(S>)) / |S|.
pub fn info_gain(le_pos: usize, le_neg: usize, gt_pos: usize, gt_neg: usize) -> f64 {
    let le = le_pos + le_neg;
    let gt = gt_pos + gt_neg;
    let total = (le + gt) as f64;
    entropy(le_pos + gt_pos, le_neg + gt_neg)
        - (le as f64 * entropy(le_pos, le_neg) + gt as f64 * entropy(gt_pos, gt_neg)) / total
}

/// Grow a tree classifying every row correctly. `matrix[r][a]` is attribute
/// `a` evaluated at row `r`. Splits maximize information gain over integer
/// midpoints of consecutive attribute values; ties prefer the smaller
/// attribute index, then the smaller |cut|. Sibling leaves with equal
/// labels are merged.
pub fn induce_tree(matrix: &[Vec<i64>], labels: &[bool]) -> Result<Tree, TreeError> {
    let rows: Vec<usize> = (0..labels.len()).collect();
    grow(matrix, labels, &rows)
}

fn grow(matrix: &[Vec<i64>], labels: &[bool], rows: &[usize]) -> Result<Tree, TreeError> {
    let pos = rows.iter().filter(|&&r| labels[r]).count();
    if pos == 0 || pos == rows.len() {
        return Ok(Tree::Leaf(pos > 0));
    }
    let n_attrs = matrix[rows[0]].len();
    let mut best: Option<(f64, usize, i64)> = None;
    for a in 0..n_attrs {
        let mut vals: Vec<i64> = rows.iter().map(|&r| matrix[r][a]).collect();
        vals.sort_unstable();
        vals.dedup();
        for win in vals.windows(2) {
            let cut = win[0] + (win[1] - win[0]) / 2;
            let (mut lp, mut ln, mut gp, mut gn) = (0, 0, 0, 0);
            for &r in rows {
                match (matrix[r][a] <= cut, labels[r]) {
                    (true, true) => lp += 1,
                    (true, false) => ln += 1,
                    (false, true) => gp += 1,
                    (false, false) => gn += 1,
                }
            }
            let gain = info_gain(lp, ln, gp, gn);
            let better = match best {
                None => true,
                Some((bg, ba, bc)) => {
                    gain > bg + 1e-12
                        || ((gain - bg).abs() <= 1e-12
                            && (a, cut.abs(), cut) < (ba, bc.abs(), bc))
                }
            };
            if better {
                best = Some((gain, a, cut));
            }
        }
    }
    let (attr, cut) = match best {
        Some((gain, a, c)) if gain > 1e-12 => (a, c),
        _ => {
            // zero gain everywhere: force any value split so recursion still
            // shrinks, or give up when the rows are indistinguishable
            match forced_split(matrix, rows, n_attrs) {
                Some(ac) => ac,
                None => {
                    let p = rows.iter().find(|&&r| labels[r]).unwrap();
                    let n = rows.iter().find(|&&r| !labels[r]).unwrap();
                    return Err(TreeError::Unseparable {
                        pos_row: *p,
                        neg_row: *n,
                    });
                }
            }
        }
    };
    let (le_rows, gt_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| matrix[r][attr] <= cut);
    let le = grow(matrix, labels, &le_rows)?;
    let gt = grow(matrix, labels, &gt_rows)?;
    if let (Tree::Leaf(a), Tree::Leaf(b)) = (&le, &gt) {
        if a == b {
            return Ok(Tree::Leaf(*a));
        }
    }
    Ok(Tree::Node {
        attr,
        cut,
        le: Box::new(le),
        gt: Box::new(gt),
    })
}

fn forced_split(matrix: &[Vec<i64>], rows: &[usize], n_attrs: usize) -> Option<(usize, i64)> {
    for a in 0..n_attrs {
        let lo = rows.iter().map(|&r| matrix[r][a]).min()?;
        let hi = rows.iter().map(|&r| matrix[r][a]).max()?;
        if lo < hi {
            return Some((a, lo + (hi - lo) / 2));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_basics() {
        assert_eq!(entropy(0, 0), 0.0);
        assert_eq!(entropy(4, 0), 0.0);
        assert!((entropy(2, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gain_matches_hand_computation() {
        // 3 pos / 1 neg split into (2 pos | 1 pos, 1 neg)
        let gain = info_gain(2, 0, 1, 1);
        let expected = entropy(3, 1) - (2.0 * 0.0 + 2.0 * 1.0) / 4.0;
        assert!((gain - expected).abs() < 1e-12);
        assert!((gain - 0.311_278_124_459_132_84).abs() < 1e-9);
    }

    #[test]
    fn perfect_split_gains_one() {
        assert!((info_gain(2, 0, 0, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuous_split_gains_zero() {
        assert!(info_gain(2, 2, 0, 0).abs() < 1e-12);
    }

    #[test]
    fn single_cut_suffices() {
        let matrix = vec![vec![0], vec![5]];
        let t = induce_tree(&matrix, &[true, false]).unwrap();
        match &t {
            Tree::Node { attr: 0, cut, le, gt } => {
                assert!((0..5).contains(cut));
                assert_eq!(**le, Tree::Leaf(true));
                assert_eq!(**gt, Tree::Leaf(false));
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn uniform_labels_collapse_to_a_leaf() {
        let matrix = vec![vec![0], vec![5], vec![9]];
        let t = induce_tree(&matrix, &[true, true, true]).unwrap();
        assert_eq!(t, Tree::Leaf(true));
    }

    #[test]
    fn xor_rows_need_forced_splits() {
        // XOR over two attributes: every root split has exactly zero gain,
        // yet the tree must still separate
        let matrix = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let labels = [true, false, false, true];
        let t = induce_tree(&matrix, &labels).unwrap();
        for (r, row) in matrix.iter().enumerate() {
            assert_eq!(t.classify(row), labels[r]);
        }
    }

    #[test]
    fn identical_rows_with_opposite_labels_fail() {
        let matrix = vec![vec![1, 2], vec![1, 2]];
        let err = induce_tree(&matrix, &[true, false]).unwrap_err();
        assert_eq!(
            err,
            TreeError::Unseparable {
                pos_row: 0,
                neg_row: 1
            }
        );
    }

    #[test]
    fn ties_prefer_smaller_attribute_then_smaller_cut() {
        // both attributes separate perfectly; attr 0 must win
        let matrix = vec![vec![0, 10], vec![4, 14]];
        let t = induce_tree(&matrix, &[true, false]).unwrap();
        match t {
            Tree::Node { attr, cut, .. } => {
                assert_eq!(attr, 0);
                assert_eq!(cut, 2);
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }
}
