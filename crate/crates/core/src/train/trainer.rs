use ndarray::{concatenate, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, EpochRecord, StopReason};
use super::loss::{main_loss_node, masked_onehot, total_loss, LossBundle};
use super::optim::{scheduled_rate, Adam};
use super::{Dataset, Part, Sample, Split};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::labels::{argmax_rows, classification_metrics, joint_accuracy, MetricsReport, ViewMetrics};
use crate::model::hierarchy::cluster_entropy;
use crate::model::{is_hyper_param, mix_seed, Forward, GraphContext, Model, ParamSet};
use crate::tape::{Matrix, Var};

const ORDER_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Class probabilities for one target step, each |K| × m.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub target_step: usize,
    pub supply_probs: Matrix,
    pub demand_probs: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub part: Part,
    pub supply: ViewMetrics,
    pub demand: ViewMetrics,
    pub summary: MetricsReport,
    /// Mean joint cross-entropy over the part's windows.
    pub main_loss: f64,
    /// Number of (window, skill) pairs scored.
    pub n_instances: usize,
}

struct LossNodes {
    total: Var,
    main: Var,
    cluster: Option<Var>,
    l2: Var,
}

fn record_loss(f: &mut Forward<'_>, model: &Model, sample: &Sample, graphs: &GraphContext, skills: &[usize]) -> Result<LossNodes> {
    let cfg = &model.config;
    let out = model.forward(f, &sample.input, graphs)?;
    let ys = masked_onehot(&sample.supply_labels, skills);
    let yd = masked_onehot(&sample.demand_labels, skills);
    let main = main_loss_node(&mut f.tape, out.supply_probs, out.demand_probs, ys, yd, skills.len());
    let cluster = out.assignment.map(|s| cluster_entropy(f, s));
    let placed: Vec<Var> = f.bound.placed().map(|(_, v)| v).collect();
    let t = &mut f.tape;
    let squares: Vec<Var> = placed.into_iter().map(|v| t.sum_sq(v)).collect();
    let mut l2 = squares[0];
    for &s in &squares[1..] {
        l2 = t.add(l2, s);
    }
    let mut total = main;
    if let Some(c) = cluster {
        let weighted = t.scale(c, cfg.lambda1);
        total = t.add(total, weighted);
    }
    let weighted = t.scale(l2, cfg.lambda2);
    total = t.add(total, weighted);
    Ok(LossNodes {
        total,
        main,
        cluster,
        l2,
    })
}

fn bundle(f: &Forward<'_>, nodes: &LossNodes, cfg: &ModelConfig) -> Result<LossBundle> {
    let t = &f.tape;
    let b = total_loss(
        t.scalar(nodes.main),
        nodes.cluster.map_or(0.0, |c| t.scalar(c)),
        t.scalar(nodes.l2),
        cfg.lambda1,
        cfg.lambda2,
    )?;
    Ok(b)
}

/// Loss components for one window without building gradients. Dropout is
/// off, so the value is deterministic.
pub fn loss_value(model: &Model, sample: &Sample, graphs: &GraphContext, skills: &[usize]) -> Result<LossBundle> {
    let mut f = Forward::eval(&model.params);
    let nodes = record_loss(&mut f, model, sample, graphs, skills)?;
    bundle(&f, &nodes, &model.config)
}

/// Loss components and the gradient of the total with respect to every
/// parameter, in [`ParamSet`] order. `dropout_seed = None` disables dropout.
pub fn loss_and_gradients(
    model: &Model,
    sample: &Sample,
    graphs: &GraphContext,
    skills: &[usize],
    dropout_seed: Option<u64>,
) -> Result<(LossBundle, Vec<Matrix>)> {
    let mut f = match dropout_seed {
        Some(seed) => Forward::train(&model.params, model.config.dropout, seed),
        None => Forward::eval(&model.params),
    };
    let nodes = record_loss(&mut f, model, sample, graphs, skills)?;
    let b = bundle(&f, &nodes, &model.config)?;
    let grads = f.tape.backward(nodes.total);
    Ok((b, f.bound.gradients(&grads)))
}

/// Probabilities for the window whose target is `target_step`.
pub fn predict(model: &Model, data: &Dataset, target_step: usize) -> Result<Prediction> {
    let sample = data.sample(target_step, &model.config)?;
    predict_sample(model, &sample, &data.graphs)
}

fn predict_sample(model: &Model, sample: &Sample, graphs: &GraphContext) -> Result<Prediction> {
    let mut f = Forward::eval(&model.params);
    let out = model.forward(&mut f, &sample.input, graphs)?;
    Ok(Prediction {
        target_step: sample.target_step,
        supply_probs: f.tape.value(out.supply_probs).clone(),
        demand_probs: f.tape.value(out.demand_probs).clone(),
    })
}

/// Metrics for one part of the checkpoint's own split of `data`.
pub fn evaluate(ckpt: &Checkpoint, data: &Dataset, part: Part) -> Result<EvalReport> {
    let cfg = ckpt.config();
    let samples = data.samples(cfg)?;
    let split = Split::new(cfg.split_mode, samples.len(), data.n_skills(), cfg.seed)?;
    evaluate_model(&ckpt.model, &samples, &split, part, &data.graphs)
}

pub(crate) fn evaluate_model(
    model: &Model,
    samples: &[Sample],
    split: &Split,
    part: Part,
    graphs: &GraphContext,
) -> Result<EvalReport> {
    let windows = split.windows(part);
    let skills = split.skills(part);
    if windows.is_empty() || skills.is_empty() {
        return Err(Error::Config(format!("the {part} split is empty")));
    }
    let mut ps = Vec::new();
    let mut pd = Vec::new();
    let (mut ts, mut td) = (Vec::new(), Vec::new());
    let mut loss = 0.0;
    for &w in windows {
        let s = &samples[w];
        let p = predict_sample(model, s, graphs)?;
        let sel_s = p.supply_probs.select(Axis(0), skills);
        let sel_d = p.demand_probs.select(Axis(0), skills);
        let truth_s: Vec<usize> = skills.iter().map(|&k| s.supply_labels.classes[k]).collect();
        let truth_d: Vec<usize> = skills.iter().map(|&k| s.demand_labels.classes[k]).collect();
        loss += subset_loss(&sel_s, &sel_d, &truth_s, &truth_d);
        ps.push(sel_s);
        pd.push(sel_d);
        ts.extend(truth_s);
        td.extend(truth_d);
    }
    let stack = |parts: &[Matrix]| {
        let views: Vec<_> = parts.iter().map(|m| m.view()).collect();
        concatenate(Axis(0), &views).expect("prediction blocks share a width")
    };
    let ps = stack(&ps);
    let pd = stack(&pd);
    let supply = classification_metrics(ps.view(), &ts)?;
    let demand = classification_metrics(pd.view(), &td)?;
    let jacc = joint_accuracy(&argmax_rows(ps.view()), &argmax_rows(pd.view()), &ts, &td)?;
    Ok(EvalReport {
        part,
        supply,
        demand,
        summary: MetricsReport {
            accuracy: (supply.accuracy + demand.accuracy) / 2.0,
            weighted_f1: (supply.weighted_f1 + demand.weighted_f1) / 2.0,
            auc: (supply.auc + demand.auc) / 2.0,
            joint_accuracy: jacc,
        },
        main_loss: loss / windows.len() as f64,
        n_instances: ts.len(),
    })
}

fn subset_loss(ps: &Matrix, pd: &Matrix, ts: &[usize], td: &[usize]) -> f64 {
    let floor = super::loss::LOG_FLOOR;
    let s: f64 = ts.iter().enumerate().map(|(i, &c)| ps[[i, c]].max(floor).ln()).sum();
    let d: f64 = td.iter().enumerate().map(|(i, &c)| pd[[i, c]].max(floor).ln()).sum();
    -(s + d) / (2 * ts.len()) as f64
}

/// Higher validation joint accuracy wins; ties go to lower validation loss.
fn improves(candidate: &EvalReport, best: Option<&(f64, f64)>) -> bool {
    match best {
        None => true,
        Some(&(jacc, loss)) => {
            let c = candidate.summary.joint_accuracy;
            c > jacc || (c == jacc && candidate.main_loss < loss)
        }
    }
}

/// Fit a fresh model to `data`.
///
/// Every epoch takes one full-batch step per training window, in an order
/// shuffled from the seed, then scores the validation part. The parameters
/// of the best validation epoch are kept. Training stops after `epochs`
/// epochs, after `patience` epochs without improvement (`patience = 0`
/// disables this), or at the first non-finite loss; in the last case the
/// best parameters so far are returned with [`StopReason::Diverged`].
pub fn train(config: &ModelConfig, data: &Dataset) -> Result<Checkpoint> {
    config.validate()?;
    let samples = data.samples(config)?;
    let split = Split::new(config.split_mode, samples.len(), data.n_skills(), config.seed)?;
    let mut model = Model::new(config.clone(), data.n_skills())?;
    let mut adam = Adam::new(model.params.values().iter().map(Matrix::dim));
    let multipliers: Vec<f64> = model
        .params
        .names()
        .iter()
        .map(|n| if is_hyper_param(n) { config.hyper_lr_multiplier } else { 1.0 })
        .collect();

    let train_skills = split.skills(Part::Train).to_vec();
    let mut order = split.windows(Part::Train).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, ORDER_STREAM));
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut best_params: ParamSet = model.params.clone();
    let mut best_epoch = 0;
    let mut stop = StopReason::Completed;

    'epochs: for epoch in 0..config.epochs {
        let lr = scheduled_rate(config.learning_rate, epoch, config.scheduler_step, config.scheduler_factor);
        let rates: Vec<f64> = multipliers.iter().map(|m| m * lr).collect();
        order.shuffle(&mut rng);
        let mut losses = Vec::with_capacity(order.len());
        let batch = if config.batch_windows == 0 { order.len() } else { config.batch_windows };
        for (c, chunk) in order.chunks(batch).enumerate() {
            let mut sum: Option<Vec<Matrix>> = None;
            for (j, &w) in chunk.iter().enumerate() {
                let i = c * batch + j;
                let seed = mix_seed(mix_seed(config.seed, DROPOUT_STREAM), (epoch * order.len() + i) as u64);
                let step = loss_and_gradients(&model, &samples[w], &data.graphs, &train_skills, Some(seed))
                    .and_then(|(b, g)| {
                        if g.iter().all(|m| m.iter().all(|v| v.is_finite())) {
                            Ok((b, g))
                        } else {
                            Err(Error::Numeric("non-finite gradient".into()))
                        }
                    });
                match step {
                    Ok((b, grads)) => {
                        losses.push(b);
                        match sum.as_mut() {
                            None => sum = Some(grads),
                            Some(acc) => acc.iter_mut().zip(&grads).for_each(|(a, g)| *a += g),
                        }
                    }
                    Err(Error::Numeric(message)) => {
                        log::error!("training diverged in epoch {epoch}: {message}");
                        stop = StopReason::Diverged { epoch, message };
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                }
            }
            if let Some(mut grads) = sum {
                if chunk.len() > 1 {
                    let k = 1.0 / chunk.len() as f64;
                    grads.iter_mut().for_each(|g| *g *= k);
                }
                adam.step(model.params.values_mut(), &grads, &rates);
            }
        }
        if let Err(Error::Numeric(message)) = model.params.check_finite() {
            stop = StopReason::Diverged { epoch, message };
            break;
        }
        let val = evaluate_model(&model, &samples, &split, Part::Val, &data.graphs)?;
        let train_metrics = if config.track_train_metrics {
            Some(evaluate_model(&model, &samples, &split, Part::Train, &data.graphs)?.summary)
        } else {
            None
        };
        let loss = LossBundle::mean(&losses);
        log::debug!(
            "epoch {epoch}: loss {:.5} val J-ACC {:.4}",
            loss.total,
            val.summary.joint_accuracy
        );
        history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            loss,
            val: val.summary,
            train: train_metrics,
        });
        if improves(&val, best.as_ref()) {
            best = Some((val.summary.joint_accuracy, val.main_loss));
            best_params = model.params.clone();
            best_epoch = epoch;
        } else if config.patience > 0 && epoch - best_epoch >= config.patience {
            stop = StopReason::EarlyStopped { epoch };
            break;
        }
    }
    model.params = best_params;
    Ok(Checkpoint {
        model,
        epoch: best_epoch,
        history,
        stop,
        data_dir: None,
    })
}
