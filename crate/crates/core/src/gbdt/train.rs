use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{is_missing, sigmoid, FeatureTable, GbdtModel, GbdtParams, RegressionTree, TreeNode};
use crate::error::{Error, Result};
use crate::par;

const NOT_IN_NODE: u32 = u32::MAX;

/// Best split found for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub default_left: bool,
    pub left_grad: f64,
    pub left_hess: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    grad: f64,
    hess: f64,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.grad += g;
        self.hess += h;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
        }
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            grad: self.grad + o.grad,
            hess: self.hess + o.hess,
        }
    }
}

fn score(s: Stats, lambda: f64) -> f64 {
    s.grad * s.grad / (s.hess + lambda)
}

fn split_gain(left: Stats, right: Stats, parent: Stats, p: &GbdtParams) -> f64 {
    0.5 * (score(left, p.lambda) + score(right, p.lambda) - score(parent, p.lambda)) - p.gamma
}

fn leaf_weight(s: Stats, lambda: f64) -> f64 {
    if s.hess + lambda == 0.0 {
        0.0
    } else {
        -s.grad / (s.hess + lambda)
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo && m <= hi {
        m
    } else {
        hi
    }
}

/// Presorted view of one feature column.
struct Column {
    /// Rows with a value, ascending by (value, row).
    sorted: Vec<u32>,
    missing: Vec<u32>,
}

fn presort(table: &FeatureTable) -> Vec<Column> {
    par::map_range(table.cols(), |c| {
        let mut sorted: Vec<u32> = Vec::with_capacity(table.rows());
        let mut missing = Vec::new();
        for r in 0..table.rows() {
            if is_missing(table.get(r, c)) {
                missing.push(r as u32);
            } else {
                sorted.push(r as u32);
            }
        }
        sorted.sort_by(|&a, &b| {
            table
                .get(a as usize, c)
                .total_cmp(&table.get(b as usize, c))
                .then(a.cmp(&b))
        });
        Column { sorted, missing }
    })
}

#[derive(Clone, Copy)]
struct ScanState {
    acc: Stats,
    last: f64,
    seen: bool,
}

/// Candidate update: strictly larger gain wins, so earlier thresholds and
/// the right-default orientation win ties.
fn consider(best: &mut Option<SplitCandidate>, cand: SplitCandidate) {
    if cand.gain > 0.0 && best.is_none_or(|b| cand.gain > b.gain) {
        *best = Some(cand);
    }
}

/// Best split per active node along feature `c`.
#[allow(clippy::too_many_arguments)]
fn scan_feature(
    table: &FeatureTable,
    column: &Column,
    c: usize,
    pos: &[u32],
    slot_of: &[u32],
    totals: &[Stats],
    grad: &[f64],
    hess: &[f64],
    p: &GbdtParams,
) -> Vec<Option<SplitCandidate>> {
    let n_slots = totals.len();
    let mut miss = vec![Stats::default(); n_slots];
    let mut miss_count = vec![0usize; n_slots];
    for &r in &column.missing {
        let node = pos[r as usize];
        if node == NOT_IN_NODE {
            continue;
        }
        let s = slot_of[node as usize];
        if s == NOT_IN_NODE {
            continue;
        }
        miss[s as usize].add(grad[r as usize], hess[r as usize]);
        miss_count[s as usize] += 1;
    }
    let mut state = vec![
        ScanState {
            acc: Stats::default(),
            last: 0.0,
            seen: false,
        };
        n_slots
    ];
    let mut best: Vec<Option<SplitCandidate>> = vec![None; n_slots];
    for &r in &column.sorted {
        let node = pos[r as usize];
        if node == NOT_IN_NODE {
            continue;
        }
        let s = slot_of[node as usize];
        if s == NOT_IN_NODE {
            continue;
        }
        let s = s as usize;
        let v = table.get(r as usize, c);
        let st = &mut state[s];
        if st.seen && v > st.last {
            let parent = totals[s];
            let present = parent.minus(miss[s]);
            let left_nm = st.acc;
            let right_nm = present.minus(left_nm);
            let threshold = midpoint(st.last, v);
            let mut orientations = vec![false];
            if miss_count[s] > 0 {
                orientations.push(true);
            }
            for default_left in orientations {
                let (left, right) = if default_left {
                    (left_nm.plus(miss[s]), right_nm)
                } else {
                    (left_nm, right_nm.plus(miss[s]))
                };
                if left.hess < p.min_child_weight || right.hess < p.min_child_weight {
                    continue;
                }
                let default_left = if miss_count[s] > 0 {
                    default_left
                } else {
                    left.hess >= right.hess
                };
                consider(
                    &mut best[s],
                    SplitCandidate {
                        feature: c,
                        threshold,
                        gain: split_gain(left, right, parent, p),
                        default_left,
                        left_grad: left.grad,
                        left_hess: left.hess,
                    },
                );
            }
        }
        st.acc.add(grad[r as usize], hess[r as usize]);
        st.last = v;
        st.seen = true;
    }
    best
}

/// Exact greedy search for the best split of the rows in `rows`.
///
/// Thresholds are midpoints between consecutive distinct values; a row goes
/// left when its value is below the threshold. Returns `None` when no split
/// has positive gain under the parameters.
pub fn best_split(
    table: &FeatureTable,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> Option<SplitCandidate> {
    let columns = presort(table);
    let mut pos = vec![NOT_IN_NODE; table.rows()];
    let mut total = Stats::default();
    for &r in rows {
        pos[r] = 0;
        total.add(grad[r], hess[r]);
    }
    let slot_of = [0u32];
    let mut best = None;
    for (c, col) in columns.iter().enumerate() {
        if let Some(cand) = scan_feature(table, col, c, &pos, &slot_of, &[total], grad, hess, params)[0] {
            consider(&mut best, cand);
        }
    }
    best
}

fn validate(table: &FeatureTable, labels: &[f64]) -> Result<()> {
    if table.rows() != labels.len() {
        return Err(Error::Dimension {
            expected: table.rows(),
            actual: labels.len(),
        });
    }
    if table.rows() < 2 {
        return Err(Error::invalid("gbdt needs at least two examples"));
    }
    if table.cols() == 0 {
        return Err(Error::invalid("gbdt needs at least one feature"));
    }
    if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::invalid("gbdt labels must be 0 or 1"));
    }
    let pos = labels.iter().filter(|&&y| y == 1.0).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::invalid("gbdt labels contain a single class"));
    }
    for r in 0..table.rows() {
        for (c, &v) in table.row(r).iter().enumerate() {
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::invalid(format!(
                    "invalid feature value {v} at row {r}, column {c}"
                )));
            }
        }
    }
    Ok(())
}

fn build_tree(
    table: &FeatureTable,
    columns: &[Column],
    in_sample: &[bool],
    grad: &[f64],
    hess: &[f64],
    p: &GbdtParams,
) -> RegressionTree {
    let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { weight: 0.0 }];
    let mut pos: Vec<u32> = in_sample.iter().map(|&s| if s { 0 } else { NOT_IN_NODE }).collect();
    let mut frontier: Vec<u32> = vec![0];

    for depth in 0..=p.max_depth {
        let mut slot_of = vec![NOT_IN_NODE; nodes.len()];
        for (s, &n) in frontier.iter().enumerate() {
            slot_of[n as usize] = s as u32;
        }
        let mut totals = vec![Stats::default(); frontier.len()];
        for (r, &n) in pos.iter().enumerate() {
            if n != NOT_IN_NODE {
                let s = slot_of[n as usize];
                if s != NOT_IN_NODE {
                    totals[s as usize].add(grad[r], hess[r]);
                }
            }
        }
        if depth == p.max_depth {
            for (s, &n) in frontier.iter().enumerate() {
                nodes[n as usize] = TreeNode::Leaf {
                    weight: leaf_weight(totals[s], p.lambda),
                };
            }
            break;
        }

        let per_feature = par::map_range(table.cols(), |c| {
            scan_feature(table, &columns[c], c, &pos, &slot_of, &totals, grad, hess, p)
        });
        // reduce in feature-index order
        let mut best: Vec<Option<SplitCandidate>> = vec![None; frontier.len()];
        for cands in per_feature {
            for (b, cand) in best.iter_mut().zip(cands) {
                if let Some(c) = cand {
                    consider(b, c);
                }
            }
        }

        let mut next = Vec::new();
        let mut children = vec![(NOT_IN_NODE, NOT_IN_NODE); frontier.len()];
        for (s, &n) in frontier.iter().enumerate() {
            match best[s] {
                Some(c) => {
                    let left = nodes.len() as u32;
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes[n as usize] = TreeNode::Split {
                        feature: c.feature as u32,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                        default_left: c.default_left,
                        gain: c.gain,
                    };
                    children[s] = (left, left + 1);
                    next.push(left);
                    next.push(left + 1);
                }
                None => {
                    nodes[n as usize] = TreeNode::Leaf {
                        weight: leaf_weight(totals[s], p.lambda),
                    };
                }
            }
        }
        if next.is_empty() {
            break;
        }
        for (r, n) in pos.iter_mut().enumerate() {
            if *n == NOT_IN_NODE {
                continue;
            }
            let s = slot_of[*n as usize];
            if s == NOT_IN_NODE || children[s as usize].0 == NOT_IN_NODE {
                continue;
            }
            if let TreeNode::Split {
                feature,
                threshold,
                default_left,
                ..
            } = nodes[*n as usize]
            {
                let v = table.get(r, feature as usize);
                let go_left = if is_missing(v) { default_left } else { v < threshold };
                let (l, rgt) = children[s as usize];
                *n = if go_left { l } else { rgt };
            }
        }
        frontier = next;
    }
    RegressionTree { nodes }
}

fn log_loss(margins: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // log(1 + e^m) - y m, computed stably
            let softplus = if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
            softplus - y * m
        })
        .sum();
    total / labels.len() as f64
}

/// Trains a boosted ensemble. `labels` are 1 for related, 0 for unrelated.
pub fn train_gbdt(table: &FeatureTable, labels: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    train_gbdt_logged(table, labels, params).map(|(m, _)| m)
}

/// Like [`train_gbdt`], also returning the mean training log-loss after
/// each round.
pub fn train_gbdt_logged(table: &FeatureTable, labels: &[f64], params: &GbdtParams) -> Result<(GbdtModel, Vec<f64>)> {
    params.validate()?;
    validate(table, labels)?;
    let n = table.rows();
    let base_margin = match params.base_score {
        Some(b) => (b / (1.0 - b)).ln(),
        None => {
            let rate = labels.iter().sum::<f64>() / n as f64;
            (rate / (1.0 - rate)).ln()
        }
    };
    let columns = presort(table);
    let mut margins = vec![base_margin; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.num_rounds);
    let mut losses = Vec::with_capacity(params.num_rounds);
    let sample_size = ((n as f64 * params.subsample).round() as usize).clamp(1, n);

    for round in 0..params.num_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - labels[i];
            hess[i] = p * (1.0 - p);
        }
        let in_sample = if sample_size == n {
            vec![true; n]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(round as u64));
            let mut mask = vec![false; n];
            for i in sample(&mut rng, n, sample_size) {
                mask[i] = true;
            }
            mask
        };
        let tree = build_tree(table, &columns, &in_sample, &grad, &hess, params);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += params.learning_rate * tree.predict(table.row(i));
        }
        losses.push(log_loss(&margins, labels));
        trees.push(tree);
    }
    log::debug!(
        "gbdt: {} rounds, final train log-loss {:.5}",
        params.num_rounds,
        losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok((
        GbdtModel {
            trees,
            learning_rate: params.learning_rate,
            base_margin,
            feature_count: table.cols(),
        },
        losses,
    ))
}
