//! Joint training of detector and supervisor, the knowledge-distillation
//! baseline, and per-step history.
//!
//! Each batch contributes the detector's own cross-entropy on the original
//! texts plus `lambda` times the supervisor's loss on up to `n_prime` longer
//! texts assembled from the same batch. Both are minimized with one SGD step
//! over the detector and supervisor parameters together.

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{tokenize, Corpus, Split, TextSample, TokenSeq, Vocab};
use crate::detector::{self, original_loss, smoothed_target, DetectorParams, Head};
use crate::error::{Error, Result};
use crate::metrics::{self, ScoredSet};
use crate::nn::{self, Params};
use crate::rng::{self, streams, Rng};
use crate::supervisor::{self, plan_long_texts, LongTextPlan, SupervisorParams};

/// Tokenized sample ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub id: String,
    pub tokens: TokenSeq,
    pub label: u8,
}

pub fn encode<'a>(
    samples: impl IntoIterator<Item = &'a TextSample>,
    vocab: &Vocab,
    max_len: usize,
) -> Result<Vec<EncodedSample>> {
    samples
        .into_iter()
        .map(|s| {
            Ok(EncodedSample {
                id: s.id.clone(),
                tokens: tokenize(s, vocab, max_len)?,
                label: s.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_ori: f64,
    pub l_supv: f64,
    pub total: f64,
    /// Longer texts actually built (plans whose class was present).
    pub n_long: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub l_ori: f64,
    pub l_supv: f64,
    pub total: f64,
    pub n_long: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub val_auroc: Option<f64>,
    pub val_tpr_at_fpr_1pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochMetrics>,
}

impl TrainHistory {
    /// One JSON object per step.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        for record in &self.steps {
            serde_json::to_writer(&mut buf, record)?;
            buf.push(b'\n');
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct JointGradients {
    pub detector: DetectorParams,
    pub supervisor: SupervisorParams,
}

/// Loss components and gradients of `L_ori + lambda * L_supv` for a batch,
/// given pre-drawn longer-text plans (member positions and gate noise).
pub fn joint_loss_and_grad(
    batch: &[&EncodedSample],
    det: &DetectorParams,
    sup: &SupervisorParams,
    config: &RunConfig,
    plans: &[LongTextPlan],
) -> Result<(LossBreakdown, JointGradients)> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    // detector forward once; the longer texts reuse these outputs
    let heads: Vec<Head> = batch.iter().map(|s| Head::for_tokens(det, &s.tokens)).collect();
    let scores: Vec<f64> = heads.iter().map(|h| h.probs[1]).collect();
    let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
    let l_ori = original_loss(&scores, &labels, config.smoothing)?;

    let use_supervisor = config.lambda > 0.0 && !plans.is_empty();
    let pass = use_supervisor.then(|| {
        let pooled: Vec<Vec<f64>> = heads.iter().map(|h| h.pooled.clone()).collect();
        let log_odds: Vec<f64> = heads.iter().map(|h| h.logits[1] - h.logits[0]).collect();
        supervisor::long_text_pass(plans, &pooled, &log_odds, sup, config.tau, config.gate_mode)
    });

    let scale = 1.0 / batch.len() as f64;
    let mut g_det = det.zeros_like();
    for (i, (sample, head)) in batch.iter().zip(&heads).enumerate() {
        let target = smoothed_target(sample.label, config.smoothing);
        let mut gap = nn::bce_grad_logit_gap(head.probs[1], target) * scale;
        let mut extra = None;
        if let Some(pass) = &pass {
            gap += config.lambda * pass.d_log_odds[i];
            if !config.stop_embedding_gradient {
                extra = Some(pass.d_pooled[i].iter().map(|v| config.lambda * v).collect::<Vec<_>>());
            }
        }
        head.backward(det, &sample.tokens, [-gap, gap], extra.as_deref(), &mut g_det);
    }

    let (l_supv, n_long, mut g_sup) = match pass {
        Some(pass) => (pass.loss, pass.predictions.len(), pass.grad),
        None => (0.0, 0, sup.zeros_like()),
    };
    if use_supervisor {
        for a in g_sup.arrays_mut() {
            a.iter_mut().for_each(|v| *v *= config.lambda);
        }
    }
    let losses = LossBreakdown {
        l_ori,
        l_supv,
        total: l_ori + config.lambda * l_supv,
        n_long,
    };
    Ok((
        losses,
        JointGradients {
            detector: g_det,
            supervisor: g_sup,
        },
    ))
}

/// One step of joint training. With `lambda == 0` no longer texts are drawn
/// and `rng` is left untouched.
pub fn joint_step(
    batch: &[&EncodedSample],
    det: &mut DetectorParams,
    sup: &mut SupervisorParams,
    config: &RunConfig,
    rng: &mut Rng,
) -> Result<LossBreakdown> {
    let plans = if config.lambda > 0.0 {
        let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
        plan_long_texts(&labels, config.k, config.n_prime, rng)
    } else {
        Vec::new()
    };
    let (losses, grads) = joint_loss_and_grad(batch, det, sup, config, &plans)?;
    det.add_scaled(-config.learning_rate, &grads.detector);
    if config.lambda > 0.0 {
        sup.add_scaled(-config.learning_rate, &grads.supervisor);
    }
    Ok(losses)
}

/// Plain cross-entropy SGD step on the detector alone.
pub fn plain_step(batch: &[&EncodedSample], det: &mut DetectorParams, config: &RunConfig) -> Result<f64> {
    let (l_ori, grad) = detector_grad(batch, det, config, |_, _| 0.0, 1.0)?;
    det.add_scaled(-config.learning_rate, &grad);
    Ok(l_ori)
}

/// Detector cross-entropy gradient with an extra per-sample term on the
/// logit gap, mixed as `hard_weight * ce + extra`.
fn detector_grad(
    batch: &[&EncodedSample],
    det: &DetectorParams,
    config: &RunConfig,
    extra_gap: impl Fn(usize, &Head) -> f64,
    hard_weight: f64,
) -> Result<(f64, DetectorParams)> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let heads: Vec<Head> = batch.iter().map(|s| Head::for_tokens(det, &s.tokens)).collect();
    let scores: Vec<f64> = heads.iter().map(|h| h.probs[1]).collect();
    let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
    let l_ori = original_loss(&scores, &labels, config.smoothing)?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = det.zeros_like();
    for (i, (sample, head)) in batch.iter().zip(&heads).enumerate() {
        let target = smoothed_target(sample.label, config.smoothing);
        let gap = hard_weight * (nn::bce_grad_logit_gap(head.probs[1], target) * scale) + extra_gap(i, head);
        head.backward(det, &sample.tokens, [-gap, gap], None, &mut grad);
    }
    Ok((l_ori, grad))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub detector: DetectorParams,
    pub supervisor: SupervisorParams,
    pub vocab: Vocab,
    pub history: TrainHistory,
}

/// Detector and supervisor at their seeded initial values.
pub fn init_models(config: &RunConfig, vocab: &Vocab) -> Result<(DetectorParams, SupervisorParams)> {
    let det = DetectorParams::init(
        vocab.len(),
        config.embed_dim,
        config.hidden_dim,
        &mut rng::stream(config.seed, streams::DETECTOR_INIT),
    )?;
    let sup = SupervisorParams::init(
        config.k,
        config.embed_dim,
        &mut rng::stream(config.seed, streams::SUPERVISOR_INIT),
    )?;
    Ok((det, sup))
}

fn train_split(corpus: &Corpus) -> Result<Vec<&TextSample>> {
    if !corpus.is_split() {
        return Err(Error::Training("corpus has not been split".into()));
    }
    if let Some(issue) = corpus.split_issue() {
        return Err(Error::Training(issue.to_string()));
    }
    Ok(corpus.in_split(Split::Train).collect())
}

pub fn train(config: &RunConfig, corpus: &Corpus) -> Result<TrainOutcome> {
    config.validate()?;
    let train_samples = train_split(corpus)?;
    let vocab = Vocab::build(train_samples.iter().copied());
    let train_set = encode(train_samples, &vocab, config.max_len)?;
    let val_set = encode(corpus.in_split(Split::Val), &vocab, config.max_len)?;
    let (mut det, mut sup) = init_models(config, &vocab)?;

    let mut shuffle_rng = rng::stream(config.seed, streams::SHUFFLE);
    let mut long_rng = rng::stream(config.seed, streams::LONG_TEXT);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut any_two_class_batch = false;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            any_two_class_batch |= has_both_classes(&batch);
            let losses = joint_step(&batch, &mut det, &mut sup, config, &mut long_rng)?;
            history.steps.push(StepRecord {
                epoch,
                step: history.steps.len(),
                l_ori: losses.l_ori,
                l_supv: losses.l_supv,
                total: losses.total,
                n_long: losses.n_long,
            });
            if !losses.total.is_finite() || !det.all_finite() || !sup.all_finite() {
                let step = history.steps.len() - 1;
                return Err(Error::Diverged {
                    step,
                    history: Box::new(history),
                });
            }
        }
        if config.lambda > 0.0 && !any_two_class_batch && !order.is_empty() {
            return Err(Error::Training(format!(
                "epoch {epoch}: no batch contained both classes"
            )));
        }
        history.epochs.push(validation_metrics(epoch, &det, &val_set)?);
    }

    Ok(TrainOutcome {
        detector: det,
        supervisor: sup,
        vocab,
        history,
    })
}

fn has_both_classes(batch: &[&EncodedSample]) -> bool {
    let mut seen = [false; 2];
    for s in batch {
        seen[s.label as usize] = true;
    }
    seen == [true, true]
}

fn validation_metrics(epoch: usize, det: &DetectorParams, val: &[EncodedSample]) -> Result<EpochMetrics> {
    let mut out = EpochMetrics {
        epoch,
        val_auroc: None,
        val_tpr_at_fpr_1pct: None,
    };
    let scores = score_encoded(det, val)?;
    let set = ScoredSet::new(scores, val.iter().map(|s| s.label).collect())?;
    let (pos, neg) = set.counts();
    if pos > 0 && neg > 0 {
        out.val_auroc = Some(metrics::auroc(&set)?);
        out.val_tpr_at_fpr_1pct = Some(metrics::tpr_at_fpr(&set, 0.01)?);
    }
    Ok(out)
}

/// Detector scores through the public inference path.
pub fn score_encoded(det: &DetectorParams, samples: &[EncodedSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            if s.tokens.len == 0 {
                // nothing to read; stay undecided
                Ok(0.5)
            } else {
                detector::score(&s.tokens, det).map(|o| o.score)
            }
        })
        .collect()
}

pub fn score_samples<'a>(
    det: &DetectorParams,
    vocab: &Vocab,
    max_len: usize,
    samples: impl IntoIterator<Item = &'a TextSample>,
) -> Result<Vec<f64>> {
    score_encoded(det, &encode(samples, vocab, max_len)?)
}

#[derive(Debug, Clone)]
pub struct KdOutcome {
    pub student: DetectorParams,
    pub history: TrainHistory,
}

/// Distillation loss on one batch:
/// `alpha * BCE(hard) + (1 - alpha) * CE(teacher_T, student_T)`.
pub fn kd_batch_loss(
    batch: &[&EncodedSample],
    student: &DetectorParams,
    teacher_logits: &[[f64; 2]],
    config: &RunConfig,
) -> Result<f64> {
    let heads: Vec<Head> = batch.iter().map(|s| Head::for_tokens(student, &s.tokens)).collect();
    let scores: Vec<f64> = heads.iter().map(|h| h.probs[1]).collect();
    let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
    let hard = original_loss(&scores, &labels, config.smoothing)?;
    let soft = heads
        .iter()
        .zip(teacher_logits)
        .map(|(h, &t)| soft_cross_entropy(t, h.logits, config.kd_temperature))
        .sum::<f64>()
        / batch.len() as f64;
    Ok(config.kd_alpha * hard + (1.0 - config.kd_alpha) * soft)
}

fn soft_cross_entropy(teacher: [f64; 2], student: [f64; 2], temperature: f64) -> f64 {
    let t = nn::softmax_with_temperature(teacher, temperature);
    let s = nn::softmax_with_temperature(student, temperature);
    -(t[0] * nn::clip_prob(s[0]).ln() + t[1] * nn::clip_prob(s[1]).ln())
}

/// Trains a fresh student on the teacher's softened outputs mixed with the
/// hard labels. The student shares the teacher's vocabulary.
pub fn kd_train(
    teacher: &DetectorParams,
    vocab: &Vocab,
    config: &RunConfig,
    corpus: &Corpus,
) -> Result<KdOutcome> {
    config.validate()?;
    teacher.validate()?;
    teacher.check_vocab(vocab)?;
    let train_set = encode(train_split(corpus)?, vocab, config.max_len)?;
    let val_set = encode(corpus.in_split(Split::Val), vocab, config.max_len)?;
    let teacher_logits: Vec<[f64; 2]> = train_set
        .iter()
        .map(|s| Head::for_tokens(teacher, &s.tokens).logits)
        .collect();
    let (mut student, _) = init_models(config, vocab)?;

    let alpha = config.kd_alpha;
    let temp = config.kd_temperature;
    let mut shuffle_rng = rng::stream(config.seed, streams::SHUFFLE);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let targets: Vec<[f64; 2]> = chunk.iter().map(|&i| teacher_logits[i]).collect();
            let loss = kd_batch_loss(&batch, &student, &targets, config)?;
            let scale = 1.0 / batch.len() as f64;
            let (_, grad) = detector_grad(
                &batch,
                &student,
                config,
                |i, head| {
                    if alpha == 1.0 {
                        return 0.0;
                    }
                    let t = nn::softmax_with_temperature(targets[i], temp);
                    let s = nn::softmax_with_temperature(head.logits, temp);
                    (1.0 - alpha) * ((s[1] - t[1]) / temp * scale)
                },
                alpha,
            )?;
            student.add_scaled(-config.learning_rate, &grad);
            history.steps.push(StepRecord {
                epoch,
                step: history.steps.len(),
                l_ori: loss,
                l_supv: 0.0,
                total: loss,
                n_long: 0,
            });
            if !loss.is_finite() || !student.all_finite() {
                let step = history.steps.len() - 1;
                return Err(Error::Diverged {
                    step,
                    history: Box::new(history),
                });
            }
        }
        history.epochs.push(validation_metrics(epoch, &student, &val_set)?);
    }
    Ok(KdOutcome { student, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_synthetic, SyntheticDist};

    fn synthetic_corpus(seed: u64) -> Corpus {
        let h = vec![0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0];
        let m = vec![0.0, 0.0, 0.0, 0.0, 0.25, 0.25, 0.25, 0.25];
        let dist = SyntheticDist::new(h, m).unwrap();
        gen_synthetic(&dist, 6, 60, 0.0, seed).unwrap().split(0.5, seed).unwrap()
    }

    fn small_config() -> RunConfig {
        RunConfig {
            embed_dim: 4,
            hidden_dim: 6,
            n_prime: 16,
            batch_size: 16,
            epochs: 2,
            max_len: 8,
            ..RunConfig::default()
        }
    }

    fn encoded(corpus: &Corpus, config: &RunConfig) -> (Vocab, Vec<EncodedSample>) {
        let vocab = Vocab::build(corpus.in_split(Split::Train));
        let set = encode(corpus.in_split(Split::Train), &vocab, config.max_len).unwrap();
        (vocab, set)
    }

    #[test]
    fn zero_lambda_step_equals_plain_step() {
        let corpus = synthetic_corpus(1);
        let cfg = RunConfig {
            lambda: 0.0,
            smoothing: 0.05,
            ..small_config()
        };
        let (vocab, set) = encoded(&corpus, &cfg);
        let batch: Vec<&EncodedSample> = set.iter().take(16).collect();
        let (mut det_a, mut sup) = init_models(&cfg, &vocab).unwrap();
        let mut det_b = det_a.clone();
        let sup_before = sup.clone();
        let mut r = rng::stream(9, 0);
        let r_before = r.clone();
        let joint = joint_step(&batch, &mut det_a, &mut sup, &cfg, &mut r).unwrap();
        let plain = plain_step(&batch, &mut det_b, &cfg).unwrap();
        assert_eq!(det_a, det_b);
        assert_eq!(joint.l_ori, plain);
        assert_eq!(joint.n_long, 0);
        assert_eq!(sup, sup_before);
        assert_eq!(r, r_before);
    }

    #[test]
    fn small_step_reduces_total_loss_for_most_seeds() {
        let cfg = RunConfig {
            learning_rate: 1e-3,
            ..small_config()
        };
        let mut improved = 0;
        for seed in 0..5 {
            let corpus = synthetic_corpus(seed + 10);
            let cfg = RunConfig { seed, ..cfg.clone() };
            let (vocab, set) = encoded(&corpus, &cfg);
            let batch: Vec<&EncodedSample> = set.iter().take(16).collect();
            let (mut det, mut sup) = init_models(&cfg, &vocab).unwrap();
            let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
            let plans = plan_long_texts(&labels, cfg.k, cfg.n_prime, &mut rng::stream(seed, 99));
            let (before, grads) = joint_loss_and_grad(&batch, &det, &sup, &cfg, &plans).unwrap();
            det.add_scaled(-cfg.learning_rate, &grads.detector);
            sup.add_scaled(-cfg.learning_rate, &grads.supervisor);
            let (after, _) = joint_loss_and_grad(&batch, &det, &sup, &cfg, &plans).unwrap();
            if after.total < before.total {
                improved += 1;
            }
        }
        assert!(improved >= 3, "only {improved}/5 seeds descended");
    }

    #[test]
    fn severed_coupling_gives_no_detector_gradient() {
        let corpus = synthetic_corpus(2);
        let cfg = RunConfig {
            stop_embedding_gradient: true,
            ..small_config()
        };
        let (vocab, set) = encoded(&corpus, &cfg);
        let batch: Vec<&EncodedSample> = set.iter().take(16).collect();
        let (mut det, sup) = init_models(&cfg, &vocab).unwrap();
        // saturate every gate open: huge class-1 bias
        det.output.bias = vec![-40.0, 40.0];
        let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
        let plans = plan_long_texts(&labels, cfg.k, cfg.n_prime, &mut rng::stream(3, 0));

        let only_supv = RunConfig {
            lambda: 1.0,
            ..cfg.clone()
        };
        let (_, with) = joint_loss_and_grad(&batch, &det, &sup, &only_supv, &plans).unwrap();
        let (_, without) = joint_loss_and_grad(&batch, &det, &sup, &RunConfig { lambda: 0.0, ..cfg }, &plans).unwrap();
        let mut diff = with.detector.clone();
        diff.add_scaled(-1.0, &without.detector);
        let max = diff.arrays().iter().flat_map(|a| a.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-12, "max detector gradient from supervisor {max}");
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let corpus = synthetic_corpus(3);
        let cfg = RunConfig {
            epochs: 0,
            ..small_config()
        };
        let out = train(&cfg, &corpus).unwrap();
        let (det, sup) = init_models(&cfg, &out.vocab).unwrap();
        assert_eq!(out.detector, det);
        assert_eq!(out.supervisor, sup);
        assert!(out.history.steps.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_records_every_step() {
        let corpus = synthetic_corpus(4);
        let cfg = small_config();
        let a = train(&cfg, &corpus).unwrap();
        let b = train(&cfg, &corpus).unwrap();
        assert_eq!(a.detector, b.detector);
        assert_eq!(a.supervisor, b.supervisor);
        assert_eq!(a.history, b.history);
        // 60 train samples, batches of 16 -> 4 steps per epoch
        assert_eq!(a.history.steps.len(), 8);
        assert_eq!(a.history.epochs.len(), 2);
        assert!(a.history.steps.iter().all(|s| s.n_long > 0));
    }

    #[test]
    fn unsplit_or_one_class_corpus_is_rejected() {
        let h = vec![0.5, 0.5];
        let dist = SyntheticDist::new(h.clone(), h).unwrap();
        let corpus = gen_synthetic(&dist, 3, 5, 0.0, 1).unwrap();
        assert!(matches!(train(&small_config(), &corpus), Err(Error::Training(_))));
        let tiny = corpus.split(0.1, 1).unwrap();
        assert!(matches!(train(&small_config(), &tiny), Err(Error::Training(_))));
    }

    #[test]
    fn divergence_preserves_history() {
        let corpus = synthetic_corpus(5);
        let cfg = RunConfig {
            learning_rate: 1e300,
            ..small_config()
        };
        match train(&cfg, &corpus) {
            Err(Error::Diverged { step, history }) => {
                assert_eq!(history.steps.len(), step + 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn kd_with_full_hard_weight_is_plain_training() {
        let corpus = synthetic_corpus(6);
        let cfg = RunConfig {
            kd_alpha: 1.0,
            lambda: 0.0,
            ..small_config()
        };
        let baseline = train(&cfg, &corpus).unwrap();
        let teacher = train(&RunConfig { lambda: 10.0, ..cfg.clone() }, &corpus).unwrap();
        let kd = kd_train(&teacher.detector, &baseline.vocab, &cfg, &corpus).unwrap();
        assert_eq!(kd.student, baseline.detector);
    }

    #[test]
    fn self_distillation_loss_is_own_entropy() {
        let corpus = synthetic_corpus(7);
        let cfg = RunConfig {
            kd_alpha: 0.0,
            learning_rate: 0.0,
            epochs: 1,
            kd_temperature: 2.5,
            ..small_config()
        };
        let (vocab, set) = encoded(&corpus, &cfg);
        let (teacher, _) = init_models(&cfg, &vocab).unwrap();
        let out = kd_train(&teacher, &vocab, &cfg, &corpus).unwrap();
        assert_eq!(out.student, teacher);

        let batch: Vec<&EncodedSample> = set.iter().collect();
        let logits: Vec<[f64; 2]> = batch.iter().map(|s| Head::for_tokens(&teacher, &s.tokens).logits).collect();
        let entropy = logits
            .iter()
            .map(|&l| {
                let p = nn::softmax_with_temperature(l, cfg.kd_temperature);
                -(p[0] * p[0].ln() + p[1] * p[1].ln())
            })
            .sum::<f64>()
            / logits.len() as f64;
        let loss = kd_batch_loss(&batch, &teacher, &logits, &cfg).unwrap();
        assert!((loss - entropy).abs() < 1e-12);
    }

    #[test]
    fn kd_rejects_vocab_mismatch() {
        let corpus = synthetic_corpus(8);
        let cfg = small_config();
        let (vocab, _) = encoded(&corpus, &cfg);
        let teacher = DetectorParams::init(vocab.len() + 3, 4, 6, &mut rng::stream(1, 1)).unwrap();
        assert!(matches!(kd_train(&teacher, &vocab, &cfg, &corpus), Err(Error::Config(_))));
    }
}
