use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn tiny_config(l: usize, d: usize) -> StanceConfig {
    StanceConfig {
        embedding_dim: l,
        hidden_dim: d,
        ..StanceConfig::default()
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn lstm_step_zero_params() {
    let cfg = tiny_config(3, 2);
    let model = MatchLstmModel::zeros(&cfg).unwrap();
    let (h, c) = lstm_step(&model.qlstm(), &[1.0, -2.0, 3.0], &[0.0; 2], &[0.0; 2]).unwrap();
    assert_eq!(h, vec![0.0; 2]);
    assert_eq!(c, vec![0.0; 2]);
    // with nonzero c_prev only the forget gate (0.5) acts
    let (_, c) = lstm_step(&model.qlstm(), &[0.0; 3], &[0.0; 2], &[2.0, -4.0]).unwrap();
    assert_eq!(c, vec![1.0, -2.0]);
}

#[test]
fn lstm_step_scalar_fixture() {
    let w = [1.0; 4];
    let p = LstmParams {
        input: 1,
        hidden: 1,
        w: &w,
        v: &w,
        b: &w,
    };
    let (h, c) = lstm_step(&p, &[1.0], &[0.0], &[0.0]).unwrap();
    // gates see 1·1 + 1·0 + 1 = 2
    let s = 1.0 / (1.0 + (-2.0f64).exp());
    let cell = s * 2.0f64.tanh();
    assert_relative_eq!(c[0], cell, epsilon = 1e-15);
    assert_relative_eq!(h[0], s * cell.tanh(), epsilon = 1e-15);
    // zero bias reproduces the σ(1) values
    let b = [0.0; 4];
    let p = LstmParams { b: &b, ..p };
    let (h, c) = lstm_step(&p, &[1.0], &[0.0], &[0.0]).unwrap();
    assert_relative_eq!(c[0], 0.7311 * 0.7616, epsilon = 1e-4);
    assert_relative_eq!(c[0], 0.5567, epsilon = 1e-4);
    // 0.7311 · tanh(0.5567) = 0.7311 · 0.5056
    assert_relative_eq!(h[0], 0.3696, epsilon = 1e-4);
}

#[test]
fn lstm_step_rejects_bad_shapes() {
    let model = MatchLstmModel::zeros(&tiny_config(3, 2)).unwrap();
    assert!(lstm_step(&model.qlstm(), &[1.0], &[0.0; 2], &[0.0; 2]).is_err());
    assert!(lstm_step(&model.qlstm(), &[1.0; 3], &[0.0; 3], &[0.0; 2]).is_err());
}

#[test]
fn cell_state_growth_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = StanceConfig {
        init_scale: 3.0,
        ..tiny_config(4, 3)
    };
    let model = MatchLstmModel::init(&cfg, 9).unwrap();
    for _ in 0..200 {
        let x = random_matrix(&mut rng, 1, 4);
        let h = random_matrix(&mut rng, 1, 3);
        let c_prev: Vec<f64> = random_matrix(&mut rng, 1, 3).iter().map(|v| v * 5.0).collect();
        let (h_new, c) = lstm_step(&model.dlstm(), &x, &h, &c_prev).unwrap();
        let bound = c_prev.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
        assert!(c.iter().all(|v| v.abs() <= bound));
        assert!(h_new.iter().all(|v| v.abs() < 1.0));
    }
}

#[test]
fn attention_single_question_state() {
    let model = MatchLstmModel::init(&tiny_config(2, 3), 4).unwrap();
    let hq = [0.3, -0.2, 0.9];
    let (a, alpha) = attention_step(&hq, &[0.1, 0.2, 0.3], &[0.5, 0.0, -0.5], &model.attention()).unwrap();
    assert_eq!(alpha, vec![1.0]);
    assert_eq!(a, hq.to_vec());
}

#[test]
fn attention_uniform_when_energies_equal() {
    let model = MatchLstmModel::zeros(&tiny_config(2, 3)).unwrap();
    let hq = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
    let (a, alpha) = attention_step(&hq, &[0.0; 3], &[0.0; 3], &model.attention()).unwrap();
    assert_eq!(alpha, vec![0.25; 4]);
    assert_eq!(a, vec![5.5, 6.5, 7.5]);
}

#[test]
fn attention_hand_softmax() {
    // w_e = 2, W_q = 1: energies are 2·tanh(h^q_j)
    let target = 3f64.ln() / 2.0;
    let hq = [0.0, target.atanh()];
    let attn = AttentionParams {
        hidden: 1,
        we: &[2.0],
        wq: &[1.0],
        wd: &[0.0],
        wm: &[0.0],
    };
    let (_, alpha) = attention_step(&hq, &[0.7], &[-0.3], &attn).unwrap();
    assert_relative_eq!(alpha[0], 0.25, epsilon = 1e-12);
    assert_relative_eq!(alpha[1], 0.75, epsilon = 1e-12);
}

/// Step-by-step composition of the public operations.
fn reference_forward(model: &MatchLstmModel, xq: &[f64], m: usize, xd: &[f64], n: usize) -> (f64, f64, Vec<f64>) {
    let l = model.config.embedding_dim;
    let d = model.config.hidden_dim;
    let run = |p: LstmParams<'_>, x: &[f64], steps: usize| {
        let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
        let mut hs = Vec::new();
        for k in 0..steps {
            let (h2, c2) = lstm_step(&p, &x[k * l..(k + 1) * l], &h, &c).unwrap();
            hs.extend_from_slice(&h2);
            h = h2;
            c = c2;
        }
        hs
    };
    let hq = run(model.qlstm(), xq, m);
    let hd = run(model.dlstm(), xd, n);
    let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
    let mut alphas = Vec::new();
    for k in 0..n {
        let hdk = &hd[k * d..(k + 1) * d];
        let (a, alpha) = attention_step(&hq, hdk, &h, &model.attention()).unwrap();
        alphas.extend(alpha);
        let input: Vec<f64> = hdk.iter().chain(&a).copied().collect();
        let (h2, c2) = lstm_step(&model.mlstm(), &input, &h, &c).unwrap();
        h = h2;
        c = c2;
    }
    let lay = model.layout();
    let p = model.params();
    let head = |w: std::ops::Range<usize>, b: usize| {
        let z: f64 = p[w].iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + p[b];
        1.0 / (1.0 + (-z).exp())
    };
    (
        head(lay.agree_w.clone(), lay.agree_b),
        head(lay.disagree_w.clone(), lay.disagree_b),
        alphas,
    )
}

#[test]
fn fused_forward_matches_step_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..5 {
        let cfg = StanceConfig {
            init_scale: 0.6,
            ..tiny_config(5, 4)
        };
        let mut model = MatchLstmModel::init(&cfg, trial).unwrap();
        let lay = model.layout().clone();
        model.params_mut()[lay.agree_b] = 0.3;
        model.params_mut()[lay.disagree_b] = -0.2;
        let (m, n) = (1 + trial as usize, 2 + 2 * trial as usize);
        let xq = random_matrix(&mut rng, m, 5);
        let xd = random_matrix(&mut rng, n, 5);
        let got = model.score_embedded(&xq, m, &xd, n).unwrap();
        let (sa, sd, alphas) = reference_forward(&model, &xq, m, &xd, n);
        assert_relative_eq!(got.score_agree, sa, epsilon = 1e-12);
        assert_relative_eq!(got.score_disagree, sd, epsilon = 1e-12);
        let weights = model.attention_weights(&xq, m, &xd, n).unwrap();
        for (x, y) in weights.iter().zip(&alphas) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }
}

#[test]
fn zero_model_scores_half() {
    let cfg = tiny_config(3, 2);
    let model = MatchLstmModel::zeros(&cfg).unwrap();
    let s = model.score_embedded(&[1.0; 6], 2, &[0.5; 9], 3).unwrap();
    assert_eq!(s, AgreementScores::fallback());
    assert_eq!(s.beta, -0.5);
}

#[test]
fn beta_rule() {
    assert_eq!(AgreementScores::from_heads(0.8, 0.3).beta, 0.8);
    assert_eq!(AgreementScores::from_heads(0.3, 0.8).beta, -0.8);
    assert_eq!(AgreementScores::from_heads(0.4, 0.4).beta, -0.4);
}

fn toy_store() -> EmbeddingStore {
    let mut store = EmbeddingStore::new(2);
    let unit = |c: f64| [c as f32, (1.0 - c * c).sqrt() as f32];
    store.insert("rumor", &[1.0, 0.0]).unwrap();
    store.insert("alpha", &unit(0.9)).unwrap();
    store.insert("beta", &unit(0.2)).unwrap();
    store.insert("gamma", &unit(0.5)).unwrap();
    store
}

#[test]
fn key_sentences_follow_hand_cosines() {
    let store = toy_store();
    let q = Question::new("Rumor");
    let a = Article::new(1, "Alpha here. Beta there. Gamma everywhere.");
    let sel = select_key_sentences(&q, &a, 2, &store).unwrap();
    let idx: Vec<usize> = sel.sentences.iter().map(|s| s.index).collect();
    assert_eq!(idx, vec![0, 2]);
    assert_relative_eq!(sel.sentences[0].similarity, 0.9, epsilon = 1e-6);
    assert_relative_eq!(sel.sentences[1].similarity, 0.5, epsilon = 1e-6);
    let all = select_key_sentences(&q, &a, 10, &store).unwrap();
    assert_eq!(all.sentences.len(), 3);
    assert!(all.sentences.windows(2).all(|w| w[0].similarity >= w[1].similarity));
}

#[test]
fn verbatim_question_sentence_ranks_first() {
    let store = toy_store();
    let q = Question::new("Gamma rumor");
    let a = Article::new(1, "Alpha here. Gamma rumor. Beta there.");
    let sel = select_key_sentences(&q, &a, 1, &store).unwrap();
    assert_eq!(sel.sentences[0].index, 1);
    assert_relative_eq!(sel.sentences[0].similarity, 1.0, epsilon = 1e-12);
}

#[test]
fn unembedded_sentences_sort_last_and_empty_articles_select_nothing() {
    let store = toy_store();
    let q = Question::new("rumor");
    let a = Article::new(1, "Nothing known. Beta there.");
    let sel = select_key_sentences(&q, &a, 2, &store).unwrap();
    assert_eq!(sel.sentences[1].index, 0);
    assert_eq!(sel.sentences[1].similarity, NO_EMBEDDING_SIMILARITY);
    let empty = Article::new(2, "");
    assert!(select_key_sentences(&q, &empty, 3, &store)
        .unwrap()
        .sentences
        .is_empty());
    assert!(select_key_sentences(&q, &a, 0, &store).is_err());
}

#[test]
fn encoding_drops_oov_and_separates_sentences() {
    let store = toy_store();
    let cfg = StanceConfig {
        max_article_len: 4,
        ..tiny_config(2, 2)
    };
    let sents = vec![
        vec!["alpha", "zzz", "beta"],
        vec!["qqq"],
        vec!["gamma", "alpha", "beta"],
    ];
    let pair = EncodedPair::encode(&["rumor", "unknown"], &sents, &store, &cfg);
    assert_eq!(pair.question, vec![store.lookup("rumor").unwrap()]);
    let a = store.lookup("alpha").unwrap();
    let b = store.lookup("beta").unwrap();
    let g = store.lookup("gamma").unwrap();
    assert_eq!(pair.article, vec![a, b, BOUNDARY, g]);
    let xd = embed(&pair.article, &store);
    assert_eq!(&xd[4..6], &[0.0, 0.0]);
}

#[test]
fn fallback_when_nothing_embeds() {
    let store = toy_store();
    let model = MatchLstmModel::init(&tiny_config(2, 3), 1).unwrap();
    let s = match_forward(&model, &["zzz"], &[vec!["qqq"]], &store).unwrap();
    assert_eq!(s, AgreementScores::fallback());
    // an unembedded question still scores against the article
    let s = match_forward(&model, &["zzz"], &[vec!["alpha"]], &store).unwrap();
    assert!(s.beta > -1.0 && s.beta < 1.0);
    let wrong = MatchLstmModel::init(&tiny_config(3, 3), 1).unwrap();
    assert!(match_forward(&wrong, &["rumor"], &[vec!["alpha"]], &store).is_err());
}

#[test]
fn gradient_check_tiny_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (trial, label) in [StanceLabel::Agree, StanceLabel::Disagree, StanceLabel::Discuss]
        .into_iter()
        .enumerate()
    {
        let cfg = StanceConfig {
            init_scale: 0.5,
            ..tiny_config(3, 3)
        };
        let model = MatchLstmModel::init(&cfg, 100 + trial as u64).unwrap();
        let (m, n) = (2 + trial, 4);
        let xq = random_matrix(&mut rng, m, 3);
        let xd = random_matrix(&mut rng, n, 3);
        let report = gradient_check(&model, &xq, m, &xd, n, label).unwrap();
        assert_eq!(report.blocks.len(), 44);
        assert_eq!(report.checked, model.params().len());
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert!(report.max_abs_grad > 1e-3);
    }
}

#[test]
fn gradient_check_near_saturation() {
    let cfg = StanceConfig {
        init_scale: 0.3,
        ..tiny_config(2, 2)
    };
    let mut model = MatchLstmModel::init(&cfg, 3).unwrap();
    let lay = model.layout().clone();
    model.params_mut()[lay.agree_b] = 30.0;
    model.params_mut()[lay.disagree_b] = -30.0;
    let xq = [0.1, 0.2, -0.3, 0.4];
    let xd = [0.5, -0.1, 0.2, 0.2, -0.7, 0.3];
    let report = gradient_check(&model, &xq, 2, &xd, 3, StanceLabel::Agree).unwrap();
    assert!(report.max_abs_grad < 1e-9);
    assert!(report.max_abs_error < 1e-6);
}

fn negation_corpus() -> (EmbeddingStore, Vec<TrainingExample>, StanceConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let words = [
        "police", "found", "the", "man", "alive", "city", "report", "said", "not", "no", "claims", "story",
    ];
    let mut store = EmbeddingStore::new(6);
    for w in words {
        let v: Vec<f32> = (0..6).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        store.insert(w, &v).unwrap();
    }
    let cfg = StanceConfig {
        batch_size: 4,
        epochs: 3,
        learning_rate: 1e-2,
        ..tiny_config(6, 5)
    };
    let q = ["police", "found", "the", "man", "alive"];
    let mut examples = Vec::new();
    for i in 0..20 {
        let (sent, label): (Vec<&str>, _) = match i % 3 {
            0 => (vec!["report", "said", "the", "man", "alive"], StanceLabel::Agree),
            1 => (
                vec!["report", "said", "not", "no", "man", "alive"],
                StanceLabel::Disagree,
            ),
            _ => (vec!["city", "claims", "story"], StanceLabel::Discuss),
        };
        examples.push(TrainingExample {
            pair: EncodedPair::encode(&q, &[sent], &store, &cfg),
            label,
        });
    }
    (store, examples, cfg)
}

#[test]
fn training_loss_decreases_on_negation_fixture() {
    let (store, examples, cfg) = negation_corpus();
    let (_, losses) = train_stance_logged(&examples, &store, &cfg).unwrap();
    assert_eq!(losses.len(), 3);
    assert!((losses[0] - 2.0 * 2f64.ln()).abs() < 0.3, "{losses:?}");
    assert!(losses[0] > losses[1] && losses[1] > losses[2], "{losses:?}");
}

#[test]
fn training_is_deterministic() {
    let (store, examples, cfg) = negation_corpus();
    let a = train_stance(&examples, &store, &cfg).unwrap();
    let b = train_stance(&examples, &store, &cfg).unwrap();
    assert_eq!(a.encode(), b.encode());
}

#[test]
fn training_rejects_bad_sets() {
    let (store, examples, cfg) = negation_corpus();
    assert!(train_stance(&[], &store, &cfg).is_err());
    let mut bad = examples.clone();
    bad[0].label = StanceLabel::Unrelated;
    assert!(train_stance(&bad, &store, &cfg).is_err());
}

#[test]
fn container_round_trip() {
    let cfg = StanceConfig {
        class_weights: Some([1.0, 5.0, 0.5]),
        ..tiny_config(3, 2)
    };
    let model = MatchLstmModel::init(&cfg, 8).unwrap();
    let bytes = model.encode();
    let back = MatchLstmModel::decode(&bytes).unwrap();
    assert_eq!(back, model);
    assert!(MatchLstmModel::decode(&bytes[..bytes.len() - 3]).is_err());
    let mut wrong_dims = bytes.clone();
    wrong_dims[0] = 9;
    assert!(MatchLstmModel::decode(&wrong_dims).is_err());
}
