use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::metrics::{Metric, MetricRegistry};
use crate::train::{MetricStats, NormalizationStats};

fn tiny(ref_audio: bool, ref_text: bool) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        heads: 2,
        layers: 1,
        ffn_dim: 16,
        dropout: 0.0,
        use_ref_audio: ref_audio,
        use_ref_text: ref_text,
        metrics: MetricRegistry::default(),
        feature_dim: 6,
        text_vocab_size: 12,
    }
}

fn example(cfg: &ModelConfig, seed: u64, frames: usize) -> BatchExample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = |n: usize| Array2::from_shape_fn((n, cfg.feature_dim), |_| rng.random_range(-2.0..2.0));
    let target = feats(frames);
    let ref_audio = cfg.use_ref_audio.then(|| feats(frames + 3));
    let n = cfg.metrics.len();
    let targets = (0..n).map(|i| (i as f64 * 0.7).sin() * 2.0).collect();
    BatchExample {
        id: format!("ex{seed}"),
        target,
        ref_audio,
        ref_text: cfg.use_ref_text.then(|| vec![3, 5, 1, 11, 2]),
        targets,
        mask: MetricMask::all(n),
    }
}

fn loss_of(model: &UniVersa, ex: &BatchExample) -> f64 {
    let (raw, _) = model.forward(&ex.input(), &mut ForwardCtx::eval()).unwrap();
    masked_l1_loss(&raw, &ex.targets, &ex.mask).unwrap().0
}

#[test]
fn output_has_one_value_per_head() {
    for (a, t) in [(false, false), (true, false), (false, true), (true, true)] {
        let cfg = tiny(a, t);
        let model = UniVersa::new(cfg.clone(), 1).unwrap();
        let ex = example(&cfg, 2, 7);
        let (raw, _) = model.forward(&ex.input(), &mut ForwardCtx::eval()).unwrap();
        assert_eq!(raw.len(), 11);
        assert!(raw.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn same_seed_same_weights() {
    let a = UniVersa::new(tiny(true, true), 9).unwrap();
    let b = UniVersa::new(tiny(true, true), 9).unwrap();
    let c = UniVersa::new(tiny(true, true), 10).unwrap();
    assert_eq!(a.params().tensors(), b.params().tensors());
    assert_ne!(a.params().tensors(), c.params().tensors());
}

#[test]
fn frame_order_matters() {
    let cfg = tiny(false, false);
    let model = UniVersa::new(cfg.clone(), 3).unwrap();
    let ex = example(&cfg, 4, 6);
    let mut swapped = ex.clone();
    swapped.target = ex.target.slice(s![..;-1, ..]).to_owned();
    let (a, _) = model.forward(&ex.input(), &mut ForwardCtx::eval()).unwrap();
    let (b, _) = model.forward(&swapped.input(), &mut ForwardCtx::eval()).unwrap();
    assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
}

#[test]
fn zeroed_fusion_output_is_identity() {
    let cfg = tiny(true, true);
    let mut model = UniVersa::new(cfg.clone(), 5).unwrap();
    for name in model.fusion_output_params() {
        let id = model.params().id_of(&name).unwrap();
        model.params_mut().get_mut(id).fill(0.0);
    }
    let ex = example(&cfg, 6, 5);
    let h = model.encode_target(ex.target.view()).unwrap();
    let ra = model.encode_ref_audio(ex.ref_audio.as_ref().unwrap().view()).unwrap();
    let rt = model.encode_ref_text(ex.ref_text.as_ref().unwrap()).unwrap();
    let fused = model.fuse(&h, Some(&ra), Some(&rt)).unwrap();
    assert_eq!(fused, h);
}

#[test]
fn staged_api_matches_forward() {
    let cfg = tiny(true, true);
    let model = UniVersa::new(cfg.clone(), 7).unwrap();
    let ex = example(&cfg, 8, 9);
    let h = model.encode_target(ex.target.view()).unwrap();
    let ra = model.encode_ref_audio(ex.ref_audio.as_ref().unwrap().view()).unwrap();
    let rt = model.encode_ref_text(ex.ref_text.as_ref().unwrap()).unwrap();
    let fused = model.fuse(&h, Some(&ra), Some(&rt)).unwrap();
    let staged = model.predict_raw(&fused).unwrap();
    let (direct, _) = model.forward(&ex.input(), &mut ForwardCtx::eval()).unwrap();
    for (a, b) in staged.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(model.fuse(&h, None, Some(&rt)).is_err());
}

#[test]
fn head_is_linear_in_pooled_state() {
    let cfg = tiny(false, false);
    let mut model = UniVersa::new(cfg, 11).unwrap();
    let (w, b) = model.head_params(Metric::Mos).unwrap();
    let (w, b) = (model.params().id_of(&w).unwrap(), model.params().id_of(&b).unwrap());
    model.params_mut().get_mut(w).fill(0.5);
    model.params_mut().get_mut(b).fill(0.25);
    let fused = HiddenStates(Array2::from_shape_fn((4, 8), |(i, j)| (i * 8 + j) as f64));
    let raw = model.predict_raw(&fused).unwrap();
    let pooled_sum: f64 = (0..8).map(|j| (0..4).map(|i| (i * 8 + j) as f64).sum::<f64>() / 4.0).sum();
    let mos = model.metrics().iter().position(|&m| m == Metric::Mos).unwrap();
    assert!((raw[mos] - (0.5 * pooled_sum + 0.25)).abs() < 1e-12);

    let mut stats = std::collections::BTreeMap::new();
    stats.insert(Metric::Mos, MetricStats { mean: 3.0, std: 0.5, count: 2 });
    let norm = NormalizationStats { stats };
    assert_eq!(norm.denormalize(Metric::Mos, 2.0).unwrap(), 4.0);
}

#[test]
fn gradients_match_finite_differences() {
    let cfg = tiny(true, true);
    let mut model = UniVersa::new(cfg.clone(), 13).unwrap();
    let ex = example(&cfg, 14, 5);
    let (_, grads) = forward_backward(&model, &[&ex], None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let eps = 1e-6;
    let ids: Vec<ParamId> = model.params().ids().collect();
    let mut ok = 0;
    let total = 60;
    for _ in 0..total {
        let id = ids[rng.random_range(0..ids.len())];
        let (r, c) = model.params().get(id).dim();
        let (i, j) = (rng.random_range(0..r), rng.random_range(0..c));
        let orig = model.params().get(id)[[i, j]];
        model.params_mut().get_mut(id)[[i, j]] = orig + eps;
        let up = loss_of(&model, &ex);
        model.params_mut().get_mut(id)[[i, j]] = orig - eps;
        let down = loss_of(&model, &ex);
        model.params_mut().get_mut(id)[[i, j]] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads.get(id)[[i, j]];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
        if rel < 1e-4 {
            ok += 1;
        }
    }
    assert!(ok >= total - 1, "{ok}/{total}");
}

#[test]
fn masked_targets_do_not_leak() {
    let cfg = tiny(true, true);
    let model = UniVersa::new(cfg.clone(), 17).unwrap();
    let mut ex = example(&cfg, 18, 6);
    ex.mask.present[2] = false;
    ex.mask.present[7] = false;
    let (la, ga) = forward_backward(&model, &[&ex], None).unwrap();
    ex.targets[2] = 1e9;
    ex.targets[7] = f64::NAN;
    let (lb, gb) = forward_backward(&model, &[&ex], None).unwrap();
    assert_eq!(la.to_bits(), lb.to_bits());
    for (a, b) in ga.tensors().iter().zip(gb.tensors()) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn batch_gradient_is_sum_of_singles() {
    let cfg = tiny(true, false);
    let model = UniVersa::new(cfg.clone(), 19).unwrap();
    let exs: Vec<BatchExample> = (0..3).map(|i| example(&cfg, 20 + i, 4 + i as usize)).collect();
    let refs: Vec<&BatchExample> = exs.iter().collect();
    let (total, g) = forward_backward(&model, &refs, None).unwrap();
    let mut sum = model.params().zero_grads();
    let mut loss = 0.0;
    for ex in &exs {
        let (l, gi) = forward_backward(&model, &[ex], None).unwrap();
        loss += l;
        sum.add_assign(&gi);
    }
    assert_eq!(total, loss);
    assert_eq!(g.tensors(), sum.tensors());
}

#[test]
fn dropout_is_seeded() {
    let mut cfg = tiny(true, true);
    cfg.dropout = 0.3;
    let model = UniVersa::new(cfg.clone(), 21).unwrap();
    let ex = example(&cfg, 22, 6);
    let a = forward_backward(&model, &[&ex], Some(1)).unwrap().0;
    let b = forward_backward(&model, &[&ex], Some(1)).unwrap().0;
    let c = forward_backward(&model, &[&ex], Some(2)).unwrap().0;
    let off = forward_backward(&model, &[&ex], None).unwrap().0;
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(off, loss_of(&model, &ex));
}

#[test]
fn disabled_modules_are_absent() {
    let full = UniVersa::new(tiny(true, true), 0).unwrap();
    let none = UniVersa::new(tiny(false, false), 0).unwrap();
    let prefixes = ["ref_audio_encoder.", "ref_text_encoder.", "audio_fusion.", "text_fusion."];
    for p in prefixes {
        assert!(full.params().names().iter().any(|n| n.starts_with(p)));
        assert!(!none.params().names().iter().any(|n| n.starts_with(p)));
    }
    let ex = example(&tiny(false, false), 1, 4);
    assert!(full.forward(&ex.input(), &mut ForwardCtx::eval()).is_err());
}

#[test]
fn rejects_bad_inputs() {
    let cfg = tiny(false, true);
    let model = UniVersa::new(cfg.clone(), 0).unwrap();
    let mut ex = example(&cfg, 1, 4);
    ex.ref_text = Some(vec![12]);
    assert!(model.forward(&ex.input(), &mut ForwardCtx::eval()).is_err());
    let mut ex = example(&cfg, 1, 4);
    ex.target = Array2::zeros((4, 5));
    assert!(model.forward(&ex.input(), &mut ForwardCtx::eval()).is_err());
    assert!(UniVersa::new(ModelConfig { heads: 3, ..tiny(true, true) }, 0).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let cfg = tiny(true, true);
    let model = UniVersa::new(cfg.clone(), 23).unwrap();
    let mut stats = std::collections::BTreeMap::new();
    for &m in cfg.metrics.metrics() {
        stats.insert(m, MetricStats { mean: 1.5, std: 0.25, count: 4 });
    }
    let ckpt = Checkpoint::new(model, NormalizationStats { stats }, Some("#universa-bpe v1\n".into()));
    let bytes = ckpt.to_bytes().unwrap();
    assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
    let loaded = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(loaded.meta, ckpt.meta);
    assert_eq!(loaded.to_bytes().unwrap(), bytes);
    let ex = example(&cfg, 24, 5);
    let a = loss_of(&ckpt.model, &ex);
    let b = loss_of(&loaded.model, &ex);
    assert!((a - b).abs() < 1e-4 * a.abs().max(1.0));

    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad).is_err());
}
