use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn params(rounds: usize, depth: usize) -> GbdtParams {
    GbdtParams {
        num_rounds: rounds,
        max_depth: depth,
        subsample: 1.0,
        ..GbdtParams::default()
    }
}

fn table(rows: &[&[f64]]) -> FeatureTable {
    FeatureTable::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn separable_one_feature() {
    let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
    let ys: Vec<f64> = (0..20).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
    let t = FeatureTable::from_rows(&xs).unwrap();
    let model = train_gbdt(&t, &ys, &params(50, 2)).unwrap();
    for (x, y) in xs.iter().zip(&ys) {
        let p = model.predict_rel(x).unwrap();
        assert_eq!(p >= 0.5, *y == 1.0, "x={x:?} p={p}");
    }
    let TreeNode::Split { threshold, .. } = model.trees[0].nodes[0] else {
        panic!("root should split");
    };
    assert_eq!(threshold, 9.5);
}

#[test]
fn huge_lambda_keeps_base_rate() {
    let t = table(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
    let ys = [0.0, 0.0, 0.0, 1.0];
    let p = GbdtParams {
        lambda: 1e12,
        ..params(20, 3)
    };
    let model = train_gbdt(&t, &ys, &p).unwrap();
    for r in 0..4 {
        assert_relative_eq!(model.predict_rel(t.row(r)).unwrap(), 0.25, epsilon = 1e-9);
    }
}

#[test]
fn hand_computed_leaf_weights() {
    // base 0.5: g = p - y = [-0.5, -0.5, 0.5, 0.5], h = 0.25 each
    let t = table(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
    let ys = [1.0, 1.0, 0.0, 0.0];
    let p = GbdtParams {
        min_child_weight: 0.0,
        learning_rate: 1.0,
        ..params(1, 1)
    };
    let model = train_gbdt(&t, &ys, &p).unwrap();
    assert_eq!(model.base_margin, 0.0);
    let tree = &model.trees[0];
    let TreeNode::Split {
        threshold,
        left,
        right,
        gain,
        ..
    } = tree.nodes[0]
    else {
        panic!("expected split");
    };
    assert_eq!(threshold, 2.5);
    // G_L = -1, H_L = 0.5 -> w = 1 / 1.5
    assert_eq!(tree.nodes[left as usize], TreeNode::Leaf { weight: 1.0 / 1.5 });
    assert_eq!(tree.nodes[right as usize], TreeNode::Leaf { weight: -1.0 / 1.5 });
    assert_relative_eq!(gain, 0.5 * (1.0 / 1.5 + 1.0 / 1.5 - 0.0), epsilon = 1e-12);
}

#[test]
fn empty_model_predicts_half() {
    let m = GbdtModel::constant(0.0, 3, 0.1);
    assert_eq!(m.predict_rel(&[1.0, 2.0, 3.0]).unwrap(), 0.5);
    assert!(m.feature_importance().is_empty());
    assert!(matches!(m.predict_rel(&[1.0]), Err(Error::Dimension { .. })));
}

#[test]
fn single_split_importance() {
    let tree = RegressionTree {
        nodes: vec![
            TreeNode::Split {
                feature: 2,
                threshold: 0.5,
                left: 1,
                right: 2,
                default_left: true,
                gain: 3.0,
            },
            TreeNode::Leaf { weight: -1.0 },
            TreeNode::Leaf { weight: 1.0 },
        ],
    };
    let m = GbdtModel {
        trees: vec![tree],
        learning_rate: 1.0,
        base_margin: 0.0,
        feature_count: 3,
    };
    let imp = m.feature_importance();
    assert_eq!(imp.len(), 1);
    assert_eq!(imp[&2], 1.0);
    assert_eq!(m.grouped_importance(&['a', 'a', 'b'])[&'b'], 1.0);
    assert_eq!(m.predict_rel(&[0.0, 0.0, MISSING]).unwrap(), sigmoid(-1.0));
}

#[test]
fn two_feature_gain_matches_hand_value() {
    // feature 0 separates perfectly, feature 1 separates one row
    let t = table(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
    let g = [-0.5, -0.5, 0.5, 0.5];
    let h = [0.25; 4];
    let p = GbdtParams {
        min_child_weight: 0.0,
        ..GbdtParams::default()
    };
    let best = best_split(&t, &[0, 1, 2, 3], &g, &h, &p).unwrap();
    assert_eq!(best.feature, 0);
    assert_eq!(best.threshold, 0.5);
    // 0.5 * [1/1.5 + 1/1.5 - 0/2]
    assert_relative_eq!(best.gain, 2.0 / 3.0, epsilon = 1e-12);
    // feature 1 alone: left {g=-0.5,h=.25}, right {g=.5,h=.75}
    let only_f1 = table(&[&[0.0], &[1.0], &[1.0], &[1.0]]);
    let s = best_split(&only_f1, &[0, 1, 2, 3], &g, &h, &p).unwrap();
    let expected = 0.5 * (0.25 / 1.25 + 0.25 / 1.75);
    assert_relative_eq!(s.gain, expected, epsilon = 1e-12);
}

#[test]
fn missing_values_follow_learned_default() {
    let t = table(&[&[MISSING], &[MISSING], &[0.0], &[1.0], &[2.0], &[3.0]]);
    let ys = [1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
    let p = GbdtParams {
        min_child_weight: 0.0,
        ..params(30, 1)
    };
    let model = train_gbdt(&t, &ys, &p).unwrap();
    let TreeNode::Split {
        default_left,
        threshold,
        ..
    } = model.trees[0].nodes[0]
    else {
        panic!("expected split");
    };
    assert_eq!(threshold, 1.5);
    assert!(!default_left);
    assert!(model.predict_rel(&[MISSING]).unwrap() > 0.5);
}

#[test]
fn rejects_bad_training_input() {
    let t = table(&[&[0.0], &[1.0]]);
    assert!(train_gbdt(&t, &[1.0, 1.0], &params(1, 1)).is_err());
    assert!(train_gbdt(&t, &[1.0], &params(1, 1)).is_err());
    let nan = table(&[&[f64::NAN], &[1.0]]);
    assert!(train_gbdt(&nan, &[0.0, 1.0], &params(1, 1)).is_err());
    let p = GbdtParams {
        subsample: 0.0,
        ..params(1, 1)
    };
    assert!(train_gbdt(&t, &[0.0, 1.0], &p).is_err());
}

fn random_problem(seed: u64, n: usize, d: usize) -> (FeatureTable, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    MISSING
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let signal = row[0].min(1.0) + 0.5 * row[1].min(1.0);
        ys.push(if signal + rng.gen_range(-0.3..0.3) > 0.0 {
            1.0
        } else {
            0.0
        });
        values.extend(row);
    }
    (FeatureTable::new(n, d, values).unwrap(), ys)
}

#[test]
fn loss_nonincreasing_without_subsampling() {
    let (t, ys) = random_problem(7, 300, 4);
    let (_, losses) = train_gbdt_logged(&t, &ys, &params(40, 3)).unwrap();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn training_is_deterministic() {
    let (t, ys) = random_problem(11, 200, 5);
    let p = GbdtParams {
        num_rounds: 20,
        ..GbdtParams::default()
    };
    let a = train_gbdt(&t, &ys, &p).unwrap();
    let b = train_gbdt(&t, &ys, &p).unwrap();
    assert_eq!(encode_model(&a), encode_model(&b));
}

#[test]
fn round_trip_preserves_predictions() {
    let (t, ys) = random_problem(3, 250, 6);
    let model = train_gbdt(
        &t,
        &ys,
        &GbdtParams {
            num_rounds: 30,
            ..GbdtParams::default()
        },
    )
    .unwrap();
    let decoded = decode_model(&encode_model(&model)).unwrap();
    assert_eq!(decoded, model);
    let (probe, _) = random_problem(99, 100, 6);
    for r in 0..probe.rows() {
        let a = model.predict_rel(probe.row(r)).unwrap();
        let b = decoded.predict_rel(probe.row(r)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn decode_rejects_corrupt_payloads() {
    let (t, ys) = random_problem(5, 50, 2);
    let model = train_gbdt(&t, &ys, &params(3, 2)).unwrap();
    let bytes = encode_model(&model);
    assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_model(&extra).is_err());
    // first node of the first tree: kind byte sits after the 4 + 8 + 8 + 4 + 4 header
    let mut bad_kind = bytes.clone();
    bad_kind[28] = 7;
    assert!(decode_model(&bad_kind).is_err());
}
