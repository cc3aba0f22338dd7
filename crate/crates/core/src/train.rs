//! Training: cross-entropy and the regularized adaptation loss, ADADELTA,
//! inverted dropout, the epoch loop with early stopping, and instance
//! selection for domain adaptation.

use crate::cnn::{backward, forward, predict_ids, CnnConfig, CnnGrads, CnnParams};
use crate::corpus::{LabeledExample, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Probabilities are clamped to this floor before logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without strict validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// ADADELTA decay.
    pub rho: f64,
    /// ADADELTA stabilizer.
    pub eps: f64,
    /// Worker count for per-example gradient computation. Gradients are
    /// always reduced in example-index order, so results do not depend on
    /// this value.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 25,
            batch_size: 64,
            patience: 5,
            seed: 7,
            rho: 0.95,
            eps: 1e-6,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::invalid("max_epochs, patience, and batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.rho) || self.eps <= 0.0 {
            return Err(Error::invalid("require rho in [0,1) and eps > 0"));
        }
        Ok(())
    }
}

/// One example ready for the model: padded token ids plus the optional fixed
/// feature channel.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub ids: Vec<usize>,
    pub extra: Option<Vec<f64>>,
    pub label: usize,
}

impl TrainExample {
    pub fn from_labeled(
        example: &LabeledExample,
        vocab: &Vocabulary,
        cfg: &CnnConfig,
        extra: Option<Vec<f64>>,
    ) -> Self {
        TrainExample {
            ids: crate::embeddings::token_ids(vocab, &example.tokens, cfg.t_max),
            extra,
            label: example.label,
        }
    }
}

/// Negative log-likelihood of the gold class. The clamp guards against
/// log(0) but lets NaN through so training can detect it.
pub fn cross_entropy(probs: &[f64], gold: usize) -> f64 {
    let p = probs[gold];
    let clamped = if p < PROB_FLOOR { PROB_FLOOR } else { p };
    -clamped.ln()
}

/// Weight the adaptation loss puts on an example: lambda for the gold label
/// plus (1 - lambda) times the reference model's confidence in it.
pub fn adaptation_weight(probs_reference: &[f64], gold: usize, lambda: f64) -> f64 {
    lambda + (1.0 - lambda) * probs_reference[gold]
}

/// Loss mixing the gold label with a frozen reference model's prediction:
/// -[lambda + (1 - lambda) P_ref(gold)] * log P(gold).
pub fn adaptation_loss(probs: &[f64], probs_reference: &[f64], gold: usize, lambda: f64) -> f64 {
    adaptation_weight(probs_reference, gold, lambda) * cross_entropy(probs, gold)
}

/// Inverted dropout mask: zero with probability `rate`, else 1/(1 - rate).
pub fn make_dropout_mask(rng: &mut Rng, size: usize, rate: f64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
    let keep = 1.0 / (1.0 - rate);
    (0..size).map(|_| if rng.next_f64() < rate { 0.0 } else { keep }).collect()
}

/// One dense tensor per trainable parameter tensor, embeddings included.
/// Used for summed minibatch gradients and for the optimizer accumulators.
#[derive(Debug, Clone)]
pub struct ParamTensors {
    pub filters: Matrix,
    pub filter_bias: Vec<f64>,
    pub dense_w: Matrix,
    pub dense_b: Vec<f64>,
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
    pub embeddings: Matrix,
}

impl ParamTensors {
    pub fn zeros(cfg: &CnnConfig, vocab_size: usize) -> Self {
        ParamTensors {
            filters: Matrix::zeros(cfg.num_filters, cfg.window * cfg.embed_dim),
            filter_bias: vec![0.0; cfg.num_filters],
            dense_w: Matrix::zeros(cfg.dense_units, cfg.dense_input_len()),
            dense_b: vec![0.0; cfg.dense_units],
            out_w: Matrix::zeros(cfg.output_units(), cfg.dense_units),
            out_b: vec![0.0; cfg.output_units()],
            embeddings: Matrix::zeros(vocab_size, cfg.embed_dim),
        }
    }

    pub fn reset(&mut self) {
        self.filters.fill(0.0);
        self.filter_bias.fill(0.0);
        self.dense_w.fill(0.0);
        self.dense_b.fill(0.0);
        self.out_w.fill(0.0);
        self.out_b.fill(0.0);
        self.embeddings.fill(0.0);
    }

    /// Fold one example's gradients in. Calling this in example-index order
    /// is what keeps training independent of the worker count.
    pub fn add_grads(&mut self, g: &CnnGrads) {
        add_slices(self.filters.data_mut(), g.filters.data());
        add_slices(&mut self.filter_bias, &g.filter_bias);
        add_slices(self.dense_w.data_mut(), g.dense_w.data());
        add_slices(&mut self.dense_b, &g.dense_b);
        add_slices(self.out_w.data_mut(), g.out_w.data());
        add_slices(&mut self.out_b, &g.out_b);
        for (row, values) in &g.embedding_rows {
            add_slices(self.embeddings.row_mut(*row), values);
        }
    }
}

fn add_slices(acc: &mut [f64], values: &[f64]) {
    debug_assert_eq!(acc.len(), values.len());
    for (a, v) in acc.iter_mut().zip(values) {
        *a += v;
    }
}

/// ADADELTA accumulators, one pair per parameter coordinate.
#[derive(Debug, Clone)]
pub struct AdadeltaState {
    pub grad_sq: ParamTensors,
    pub update_sq: ParamTensors,
    pub rho: f64,
    pub eps: f64,
}

impl AdadeltaState {
    pub fn new(cfg: &CnnConfig, vocab_size: usize, rho: f64, eps: f64) -> Self {
        AdadeltaState {
            grad_sq: ParamTensors::zeros(cfg, vocab_size),
            update_sq: ParamTensors::zeros(cfg, vocab_size),
            rho,
            eps,
        }
    }
}

fn adadelta_update(param: &mut [f64], grad: &[f64], eg2: &mut [f64], ex2: &mut [f64], rho: f64, eps: f64) {
    for i in 0..param.len() {
        let g = grad[i];
        eg2[i] = rho * eg2[i] + (1.0 - rho) * g * g;
        let step = -((ex2[i] + eps).sqrt() / (eg2[i] + eps).sqrt()) * g;
        ex2[i] = rho * ex2[i] + (1.0 - rho) * step * step;
        param[i] += step;
    }
}

/// One ADADELTA step over every tensor. A frozen embedding table is skipped.
pub fn adadelta_step(params: &mut CnnParams, grads: &ParamTensors, state: &mut AdadeltaState) {
    let (rho, eps) = (state.rho, state.eps);
    adadelta_update(
        params.filters.data_mut(),
        grads.filters.data(),
        state.grad_sq.filters.data_mut(),
        state.update_sq.filters.data_mut(),
        rho,
        eps,
    );
    adadelta_update(
        &mut params.filter_bias,
        &grads.filter_bias,
        &mut state.grad_sq.filter_bias,
        &mut state.update_sq.filter_bias,
        rho,
        eps,
    );
    adadelta_update(
        params.dense_w.data_mut(),
        grads.dense_w.data(),
        state.grad_sq.dense_w.data_mut(),
        state.update_sq.dense_w.data_mut(),
        rho,
        eps,
    );
    adadelta_update(
        &mut params.dense_b,
        &grads.dense_b,
        &mut state.grad_sq.dense_b,
        &mut state.update_sq.dense_b,
        rho,
        eps,
    );
    adadelta_update(
        params.out_w.data_mut(),
        grads.out_w.data(),
        state.grad_sq.out_w.data_mut(),
        state.update_sq.out_w.data_mut(),
        rho,
        eps,
    );
    adadelta_update(
        &mut params.out_b,
        &grads.out_b,
        &mut state.grad_sq.out_b,
        &mut state.update_sq.out_b,
        rho,
        eps,
    );
    if params.embeddings.trainable {
        adadelta_update(
            params.embeddings.matrix.data_mut(),
            grads.embeddings.data(),
            state.grad_sq.embeddings.data_mut(),
            state.update_sq.embeddings.data_mut(),
            rho,
            eps,
        );
    }
}

/// Reference model and mixing weight for regularized adaptation.
#[derive(Debug, Clone, Copy)]
pub struct AdaptSetup<'a> {
    pub reference: &'a CnnParams,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub best_so_far: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: CnnParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_accuracy: f64,
}

/// History as CSV: `epoch,train_loss,val_accuracy,best_so_far`.
pub fn history_to_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_accuracy,best_so_far\n");
    for s in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.epoch, s.train_loss, s.val_accuracy, s.best_so_far
        ));
    }
    out
}

fn example_pass(
    cfg: &CnnConfig,
    params: &CnnParams,
    adapt: Option<&AdaptSetup<'_>>,
    example: &TrainExample,
    mask: Option<&[f64]>,
) -> Result<(CnnGrads, f64)> {
    let trace = forward(cfg, params, &example.ids, example.extra.as_deref(), mask)?;
    let (weight, loss) = match adapt {
        None => (1.0, cross_entropy(&trace.probs, example.label)),
        Some(setup) => {
            // The reference model is evaluated with dropout off.
            let reference =
                forward(cfg, setup.reference, &example.ids, example.extra.as_deref(), None)?;
            let weight = adaptation_weight(&reference.probs, example.label, setup.lambda);
            (weight, weight * cross_entropy(&trace.probs, example.label))
        }
    };
    let mut grads = CnnGrads::zeros(cfg);
    backward(cfg, params, &trace, example.label, weight, &mut grads);
    Ok((grads, loss))
}

/// Fraction of examples whose prediction matches the gold label.
pub fn accuracy_on(cfg: &CnnConfig, params: &CnnParams, data: &[TrainExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot compute accuracy on an empty dataset"));
    }
    let mut correct = 0usize;
    for e in data {
        let (label, _) = predict_ids(cfg, params, &e.ids, e.extra.as_deref())?;
        if label == e.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Minibatch training with ADADELTA, inverted dropout, and early stopping on
/// validation accuracy. Returns the best snapshot observed.
pub fn train(
    cfg: &CnnConfig,
    tcfg: &TrainConfig,
    initial: CnnParams,
    train_data: &[TrainExample],
    val_data: &[TrainExample],
    adapt: Option<AdaptSetup<'_>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    tcfg.validate()?;
    initial.check_shapes(cfg)?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::invalid("training and validation data must be non-empty"));
    }
    let vocab_size = initial.embeddings.vocab_size();
    for e in train_data.iter().chain(val_data) {
        if e.ids.iter().any(|&id| id >= vocab_size) {
            return Err(Error::invalid(
                "vocabulary mismatch: token id outside the embedding table",
            ));
        }
    }
    if let Some(setup) = &adapt {
        setup.reference.check_shapes(cfg)?;
        if setup.reference.embeddings.vocab_size() != vocab_size {
            return Err(Error::invalid(
                "vocabulary mismatch between the reference model and the training pipeline",
            ));
        }
        if !(0.0..=1.0).contains(&setup.lambda) {
            return Err(Error::invalid("lambda must lie in [0, 1]"));
        }
    }

    let mut params = initial;
    let mut state = AdadeltaState::new(cfg, vocab_size, tcfg.rho, tcfg.eps);
    let mut batch_grads = ParamTensors::zeros(cfg, vocab_size);
    let mut rng = Rng::new(tcfg.seed);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let threads = tcfg.threads.max(1);

    let mut history: Vec<EpochStats> = Vec::new();
    let mut best: Option<(CnnParams, usize, f64)> = None;
    let mut stale_epochs = 0usize;

    for epoch in 1..=tcfg.max_epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (batch_index, batch) in order.chunks(tcfg.batch_size).enumerate() {
            batch_grads.reset();
            // Masks come off the rng in example order, before any fan-out.
            let masks: Vec<Option<Vec<f64>>> = batch
                .iter()
                .map(|_| {
                    (cfg.dropout_rate > 0.0)
                        .then(|| make_dropout_mask(&mut rng, cfg.dense_units, cfg.dropout_rate))
                })
                .collect();

            for (window_at, window) in batch.chunks(threads).enumerate() {
                let results: Vec<Result<(CnnGrads, f64)>> = if threads == 1 {
                    let i = window[0];
                    let mask = masks[window_at].as_deref();
                    vec![example_pass(cfg, &params, adapt.as_ref(), &train_data[i], mask)]
                } else {
                    std::thread::scope(|scope| {
                        let handles: Vec<_> = window
                            .iter()
                            .enumerate()
                            .map(|(w, &i)| {
                                let mask = masks[window_at * threads + w].as_deref();
                                let params = &params;
                                let adapt = adapt.as_ref();
                                scope.spawn(move || {
                                    example_pass(cfg, params, adapt, &train_data[i], mask)
                                })
                            })
                            .collect();
                        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
                    })
                };
                for result in results {
                    let (grads, loss) = result?;
                    if !loss.is_finite() {
                        return Err(Error::NonFiniteLoss { epoch, batch: batch_index + 1 });
                    }
                    epoch_loss += loss;
                    batch_grads.add_grads(&grads);
                }
            }
            adadelta_step(&mut params, &batch_grads, &mut state);
        }

        let train_loss = epoch_loss / train_data.len() as f64;
        let val_accuracy = accuracy_on(cfg, &params, val_data)?;
        let improved = best.as_ref().is_none_or(|(_, _, acc)| val_accuracy > *acc);
        if improved {
            best = Some((params.clone(), epoch, val_accuracy));
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
        }
        let best_so_far = best.as_ref().map(|(_, _, a)| *a).unwrap_or(val_accuracy);
        history.push(EpochStats { epoch, train_loss, val_accuracy, best_so_far });
        if stale_epochs >= tcfg.patience {
            break;
        }
    }

    let (params, best_epoch, best_accuracy) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { params, history, best_epoch, best_accuracy })
}

/// Indices of out-of-event examples the event model already classifies
/// correctly, in input order.
pub fn select_instances(
    cfg: &CnnConfig,
    params: &CnnParams,
    vocab: &Vocabulary,
    examples: &[LabeledExample],
    extra: Option<&[Vec<f64>]>,
) -> Result<Vec<usize>> {
    if let Some(x) = extra {
        if x.len() != examples.len() {
            return Err(Error::invalid("extra feature rows must match example count"));
        }
    }
    let mut selected = Vec::new();
    for (i, e) in examples.iter().enumerate() {
        let features = extra.map(|x| x[i].as_slice());
        let (label, _) = crate::cnn::predict(cfg, params, vocab, &e.tokens, features)?;
        if label == e.label {
            selected.push(i);
        }
    }
    Ok(selected)
}

/// Train an adapted model on combined event and out-of-event data, starting
/// from the frozen event model and regularizing toward it with `lambda`.
pub fn fit_adapted(
    cfg: &CnnConfig,
    tcfg: &TrainConfig,
    reference: &CnnParams,
    train_data: &[TrainExample],
    val_data: &[TrainExample],
    lambda: f64,
) -> Result<TrainOutcome> {
    train(
        cfg,
        tcfg,
        reference.clone(),
        train_data,
        val_data,
        Some(AdaptSetup { reference, lambda }),
    )
}
