//! The convolutional classifier: wide convolution over token embeddings,
//! non-overlapping max-pooling, one dense hidden layer (optionally fed a fixed
//! auxiliary feature channel), and a Bernoulli or softmax output head, with
//! exact reverse-mode gradients.

use crate::corpus::Vocabulary;
use crate::embeddings::{embed_ids, token_ids, EmbeddingTable};
use crate::error::{Error, Result};
use crate::numerics::{dot, relu, sigmoid, softmax, Matrix, Rng};

/// Hyperparameters. `num_classes == 2` selects the single-sigmoid head;
/// `extra_dim > 0` enables the fixed auxiliary feature channel into the dense
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    pub t_max: usize,
    pub embed_dim: usize,
    pub num_filters: usize,
    pub window: usize,
    pub pool_len: usize,
    pub dense_units: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
    pub extra_dim: usize,
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 || self.embed_dim == 0 {
            return Err(Error::invalid("t_max and embed_dim must be at least 1"));
        }
        if self.num_filters == 0 || self.window == 0 || self.pool_len == 0 || self.dense_units == 0
        {
            return Err(Error::invalid(
                "num_filters, window, pool_len, and dense_units must be at least 1",
            ));
        }
        if self.window > self.t_max + 1 {
            return Err(Error::invalid(format!(
                "filter window {} exceeds t_max + 1 = {}",
                self.window,
                self.t_max + 1
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("at least two classes are required"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Output positions of the wide convolution.
    pub fn conv_len(&self) -> usize {
        self.t_max + self.window - 1
    }

    /// Pooled positions per feature map.
    pub fn pooled_per_filter(&self) -> usize {
        self.conv_len().div_ceil(self.pool_len)
    }

    /// Length of the concatenated pooled vector m.
    pub fn pooled_total(&self) -> usize {
        self.num_filters * self.pooled_per_filter()
    }

    /// Length of the dense-layer input m' = [m; y].
    pub fn dense_input_len(&self) -> usize {
        self.pooled_total() + self.extra_dim
    }

    /// One sigmoid unit for binary, K softmax units otherwise.
    pub fn output_units(&self) -> usize {
        if self.num_classes == 2 {
            1
        } else {
            self.num_classes
        }
    }
}

/// All trainable tensors.
#[derive(Debug, Clone)]
pub struct CnnParams {
    pub embeddings: EmbeddingTable,
    /// N x (window * D), one flattened filter per row.
    pub filters: Matrix,
    pub filter_bias: Vec<f64>,
    /// dense_units x dense_input_len.
    pub dense_w: Matrix,
    pub dense_b: Vec<f64>,
    /// output_units x dense_units.
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
}

impl CnnParams {
    /// Fresh parameters around an existing embedding table. Weight matrices
    /// use uniform fan-in/fan-out scaling, biases start at zero.
    pub fn init(cfg: &CnnConfig, embeddings: EmbeddingTable, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if embeddings.dim() != cfg.embed_dim {
            return Err(Error::invalid(format!(
                "embedding dim {} does not match config embed_dim {}",
                embeddings.dim(),
                cfg.embed_dim
            )));
        }
        let mut rng = Rng::new(seed);
        let mut uniform_matrix = |rows: usize, cols: usize, limit: f64| {
            let mut m = Matrix::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.uniform(-limit, limit);
            }
            m
        };
        let filter_in = cfg.window * cfg.embed_dim;
        let filters = uniform_matrix(
            cfg.num_filters,
            filter_in,
            (6.0 / (filter_in + cfg.num_filters) as f64).sqrt(),
        );
        // Conv positions covering only padding see exactly the bias, so a
        // small nonzero init keeps those pre-activations off the ReLU kink.
        let filter_bias = uniform_matrix(1, cfg.num_filters, 0.1);
        let dense_in = cfg.dense_input_len();
        let dense_w = uniform_matrix(
            cfg.dense_units,
            dense_in,
            (6.0 / (dense_in + cfg.dense_units) as f64).sqrt(),
        );
        let out_units = cfg.output_units();
        let out_w = uniform_matrix(
            out_units,
            cfg.dense_units,
            (6.0 / (cfg.dense_units + out_units) as f64).sqrt(),
        );
        Ok(CnnParams {
            embeddings,
            filters,
            filter_bias: filter_bias.data().to_vec(),
            dense_w,
            dense_b: vec![0.0; cfg.dense_units],
            out_w,
            out_b: vec![0.0; out_units],
        })
    }

    pub fn check_shapes(&self, cfg: &CnnConfig) -> Result<()> {
        let expect = [
            (self.filters.rows(), cfg.num_filters, "filter count"),
            (self.filters.cols(), cfg.window * cfg.embed_dim, "filter width"),
            (self.filter_bias.len(), cfg.num_filters, "filter bias"),
            (self.dense_w.rows(), cfg.dense_units, "dense rows"),
            (self.dense_w.cols(), cfg.dense_input_len(), "dense cols"),
            (self.dense_b.len(), cfg.dense_units, "dense bias"),
            (self.out_w.rows(), cfg.output_units(), "output rows"),
            (self.out_w.cols(), cfg.dense_units, "output cols"),
            (self.out_b.len(), cfg.output_units(), "output bias"),
            (self.embeddings.dim(), cfg.embed_dim, "embedding dim"),
        ];
        for (got, want, what) in expect {
            if got != want {
                return Err(Error::invalid(format!("{what}: got {got}, expected {want}")));
            }
        }
        Ok(())
    }

    /// Flatten every trainable value in a fixed order: filters, filter_bias,
    /// dense_w, dense_b, out_w, out_b, then embedding rows 1.. (the pinned
    /// padding row is excluded). Used by gradient checking.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        flat.extend_from_slice(self.filters.data());
        flat.extend_from_slice(&self.filter_bias);
        flat.extend_from_slice(self.dense_w.data());
        flat.extend_from_slice(&self.dense_b);
        flat.extend_from_slice(self.out_w.data());
        flat.extend_from_slice(&self.out_b);
        for r in 1..self.embeddings.vocab_size() {
            flat.extend_from_slice(self.embeddings.matrix.row(r));
        }
        flat
    }

    /// Inverse of [`CnnParams::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &flat[pos..pos + n];
            pos += n;
            s
        };
        let n = self.filters.rows() * self.filters.cols();
        self.filters.data_mut().copy_from_slice(take(n));
        let n = self.filter_bias.len();
        self.filter_bias.copy_from_slice(take(n));
        let n = self.dense_w.rows() * self.dense_w.cols();
        self.dense_w.data_mut().copy_from_slice(take(n));
        let n = self.dense_b.len();
        self.dense_b.copy_from_slice(take(n));
        let n = self.out_w.rows() * self.out_w.cols();
        self.out_w.data_mut().copy_from_slice(take(n));
        let n = self.out_b.len();
        self.out_b.copy_from_slice(take(n));
        let dim = self.embeddings.dim();
        for r in 1..self.embeddings.vocab_size() {
            self.embeddings.matrix.row_mut(r).copy_from_slice(take(dim));
        }
        assert_eq!(pos, flat.len(), "flat parameter vector length mismatch");
    }
}

/// All cached intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub token_ids: Vec<usize>,
    pub x: Matrix,
    pub conv_pre: Matrix,
    pub conv_act: Matrix,
    pub pooled: Vec<f64>,
    /// Flat conv index (filter * conv_len + position) feeding each pooled
    /// entry; `usize::MAX` when the zero padding won the window.
    pub pool_src: Vec<usize>,
    pub dense_input: Vec<f64>,
    pub dense_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub hidden_dropped: Vec<f64>,
    pub dropout_mask: Option<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Wide convolution: every window position that overlaps the input at all,
/// out-of-range rows read as zero. Returns pre-activations and ReLU feature
/// maps, both N x (T + window - 1).
pub fn conv_wide(x: &Matrix, filters: &Matrix, bias: &[f64]) -> (Matrix, Matrix) {
    let t = x.rows();
    let d = x.cols();
    debug_assert_eq!(filters.cols() % d, 0);
    let window = filters.cols() / d;
    let conv_len = t + window - 1;
    let mut pre = Matrix::zeros(filters.rows(), conv_len);
    let mut act = Matrix::zeros(filters.rows(), conv_len);
    for i in 0..filters.rows() {
        let u = filters.row(i);
        for j in 0..conv_len {
            let start = j as isize - (window as isize - 1);
            let mut acc = bias[i];
            if start >= 0 && start as usize + window <= t {
                let s = start as usize;
                acc += dot(&x.data()[s * d..(s + window) * d], u);
            } else {
                let lo = start.max(0) as usize;
                let hi = ((start + window as isize) as usize).min(t);
                for r in lo..hi {
                    let off = (r as isize - start) as usize * d;
                    acc += dot(x.row(r), &u[off..off + d]);
                }
            }
            pre.set(i, j, acc);
            act.set(i, j, relu(acc));
        }
    }
    (pre, act)
}

/// Max over non-overlapping windows of `p` entries, the map zero-padded on
/// the right to a multiple of `p`. Returns pooled values and the in-map index
/// of each winner (`usize::MAX` when the padding zero won).
pub fn max_pool(map: &[f64], p: usize) -> (Vec<f64>, Vec<usize>) {
    assert!(p >= 1 && !map.is_empty());
    let windows = map.len().div_ceil(p);
    let mut values = Vec::with_capacity(windows);
    let mut sources = Vec::with_capacity(windows);
    for w in 0..windows {
        let lo = w * p;
        let hi = (lo + p).min(map.len());
        let mut best = map[lo];
        let mut src = lo;
        for (offset, &v) in map[lo + 1..hi].iter().enumerate() {
            if v > best {
                best = v;
                src = lo + 1 + offset;
            }
        }
        // Right zero-padding participates in a partial final window.
        if hi - lo < p && best < 0.0 {
            best = 0.0;
            src = usize::MAX;
        }
        values.push(best);
        sources.push(src);
    }
    (values, sources)
}

/// Full forward pass. `extra` must be present exactly when the config enables
/// the auxiliary channel; `dropout_mask` only during training.
pub fn forward(
    cfg: &CnnConfig,
    params: &CnnParams,
    ids: &[usize],
    extra: Option<&[f64]>,
    dropout_mask: Option<&[f64]>,
) -> Result<ForwardTrace> {
    params.check_shapes(cfg)?;
    if ids.len() != cfg.t_max {
        return Err(Error::invalid(format!(
            "expected {} token ids, got {}",
            cfg.t_max,
            ids.len()
        )));
    }
    match (cfg.extra_dim, extra) {
        (0, None) => {}
        (d, Some(y)) if d > 0 && y.len() == d => {}
        (d, y) => {
            return Err(Error::invalid(format!(
                "extra features: config wants dim {d}, got {:?}",
                y.map(<[f64]>::len)
            )))
        }
    }
    if let Some(mask) = dropout_mask {
        if mask.len() != cfg.dense_units {
            return Err(Error::invalid("dropout mask length must equal dense_units"));
        }
    }

    let x = embed_ids(&params.embeddings, ids);
    let (conv_pre, conv_act) = conv_wide(&x, &params.filters, &params.filter_bias);

    let conv_len = cfg.conv_len();
    let mut pooled = Vec::with_capacity(cfg.pooled_total());
    let mut pool_src = Vec::with_capacity(cfg.pooled_total());
    for i in 0..cfg.num_filters {
        let (values, sources) = max_pool(conv_act.row(i), cfg.pool_len);
        pool_src.extend(sources.iter().map(|&s| {
            if s == usize::MAX {
                usize::MAX
            } else {
                i * conv_len + s
            }
        }));
        pooled.extend(values);
    }

    let mut dense_input = pooled.clone();
    if let Some(y) = extra {
        dense_input.extend_from_slice(y);
    }

    let mut dense_pre = params.dense_w.matvec(&dense_input);
    for (v, b) in dense_pre.iter_mut().zip(&params.dense_b) {
        *v += b;
    }
    let hidden: Vec<f64> = dense_pre.iter().map(|&v| relu(v)).collect();
    let hidden_dropped: Vec<f64> = match dropout_mask {
        Some(mask) => hidden.iter().zip(mask).map(|(h, m)| h * m).collect(),
        None => hidden.clone(),
    };

    let mut logits = params.out_w.matvec(&hidden_dropped);
    for (v, b) in logits.iter_mut().zip(&params.out_b) {
        *v += b;
    }
    let probs = if cfg.num_classes == 2 {
        let p = sigmoid(logits[0]);
        vec![p, 1.0 - p]
    } else {
        softmax(&logits)
    };

    Ok(ForwardTrace {
        token_ids: ids.to_vec(),
        x,
        conv_pre,
        conv_act,
        pooled,
        pool_src,
        dense_input,
        dense_pre,
        hidden,
        hidden_dropped,
        dropout_mask: dropout_mask.map(<[f64]>::to_vec),
        logits,
        probs,
    })
}

/// Per-example gradients. Embedding gradients are sparse: only rows used by
/// the input appear, and the padding row never does.
#[derive(Debug, Clone)]
pub struct CnnGrads {
    pub filters: Matrix,
    pub filter_bias: Vec<f64>,
    pub dense_w: Matrix,
    pub dense_b: Vec<f64>,
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
    pub embedding_rows: Vec<(usize, Vec<f64>)>,
}

impl CnnGrads {
    pub fn zeros(cfg: &CnnConfig) -> Self {
        CnnGrads {
            filters: Matrix::zeros(cfg.num_filters, cfg.window * cfg.embed_dim),
            filter_bias: vec![0.0; cfg.num_filters],
            dense_w: Matrix::zeros(cfg.dense_units, cfg.dense_input_len()),
            dense_b: vec![0.0; cfg.dense_units],
            out_w: Matrix::zeros(cfg.output_units(), cfg.dense_units),
            out_b: vec![0.0; cfg.output_units()],
            embedding_rows: Vec::new(),
        }
    }

    pub fn reset(&mut self) {
        self.filters.fill(0.0);
        self.filter_bias.fill(0.0);
        self.dense_w.fill(0.0);
        self.dense_b.fill(0.0);
        self.out_w.fill(0.0);
        self.out_b.fill(0.0);
        self.embedding_rows.clear();
    }

    /// Gradient of one embedding row, zero vector when untouched.
    pub fn embedding_row(&self, row: usize, dim: usize) -> Vec<f64> {
        self.embedding_rows
            .iter()
            .find(|(r, _)| *r == row)
            .map(|(_, g)| g.clone())
            .unwrap_or_else(|| vec![0.0; dim])
    }
}

/// Reverse-mode gradients of `loss_weight * cross_entropy(probs, gold)` with
/// respect to every parameter tensor, accumulated into `grads` (callers reset
/// between examples). The trace must come from `forward` with these params.
pub fn backward(
    cfg: &CnnConfig,
    params: &CnnParams,
    trace: &ForwardTrace,
    gold: usize,
    loss_weight: f64,
    grads: &mut CnnGrads,
) {
    let d = cfg.embed_dim;
    let window = cfg.window;
    let t = cfg.t_max;

    // Output head: d loss / d logit is probs - onehot for both heads.
    let mut dlogits = vec![0.0; cfg.output_units()];
    if cfg.num_classes == 2 {
        let target = if gold == 0 { 1.0 } else { 0.0 };
        dlogits[0] = loss_weight * (trace.probs[0] - target);
    } else {
        for (k, dl) in dlogits.iter_mut().enumerate() {
            let target = if k == gold { 1.0 } else { 0.0 };
            *dl = loss_weight * (trace.probs[k] - target);
        }
    }

    let mut dhidden = vec![0.0; cfg.dense_units];
    for (k, &dl) in dlogits.iter().enumerate() {
        grads.out_b[k] += dl;
        let grow = grads.out_w.row_mut(k);
        for (h, g) in grow.iter_mut().enumerate() {
            *g += dl * trace.hidden_dropped[h];
        }
        for (h, dh) in dhidden.iter_mut().enumerate() {
            *dh += dl * params.out_w.get(k, h);
        }
    }

    // Through dropout, then the dense ReLU.
    if let Some(mask) = &trace.dropout_mask {
        for (dh, m) in dhidden.iter_mut().zip(mask) {
            *dh *= m;
        }
    }
    let mut dm_prime = vec![0.0; cfg.dense_input_len()];
    for h in 0..cfg.dense_units {
        if trace.dense_pre[h] <= 0.0 {
            continue;
        }
        let dpre = dhidden[h];
        if dpre == 0.0 {
            continue;
        }
        grads.dense_b[h] += dpre;
        let grow = grads.dense_w.row_mut(h);
        for (c, g) in grow.iter_mut().enumerate() {
            *g += dpre * trace.dense_input[c];
        }
        let wrow = params.dense_w.row(h);
        for (c, dm) in dm_prime.iter_mut().enumerate() {
            *dm += dpre * wrow[c];
        }
    }
    // Gradients for the fixed auxiliary channel are discarded.

    // Un-pool into the touched conv positions, through the conv ReLU, into
    // filters, biases, and the input rows.
    let conv_len = cfg.conv_len();
    let mut dx = Matrix::zeros(t, d);
    for (e, &src) in trace.pool_src.iter().enumerate() {
        if src == usize::MAX {
            continue;
        }
        let upstream = dm_prime[e];
        if upstream == 0.0 {
            continue;
        }
        let (i, j) = (src / conv_len, src % conv_len);
        if trace.conv_pre.get(i, j) <= 0.0 {
            continue;
        }
        grads.filter_bias[i] += upstream;
        let start = j as isize - (window as isize - 1);
        let lo = start.max(0) as usize;
        let hi = ((start + window as isize) as usize).min(t);
        let filter_row = params.filters.row(i);
        let grad_row = grads.filters.row_mut(i);
        for r in lo..hi {
            let off = (r as isize - start) as usize * d;
            let xrow = trace.x.row(r);
            for c in 0..d {
                grad_row[off + c] += upstream * xrow[c];
            }
            let dxrow = dx.row_mut(r);
            for c in 0..d {
                dxrow[c] += upstream * filter_row[off + c];
            }
        }
    }

    // Scatter input-row gradients onto embedding rows; the padding row is
    // pinned at zero.
    for (pos, &id) in trace.token_ids.iter().enumerate() {
        if id == Vocabulary::PAD {
            continue;
        }
        let row = dx.row(pos);
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        match grads.embedding_rows.iter_mut().find(|(r, _)| *r == id) {
            Some((_, acc)) => {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            None => grads.embedding_rows.push((id, row.to_vec())),
        }
    }
}

/// Inference: argmax of the forward probabilities, ties toward the smaller
/// class index, dropout never applied.
pub fn predict(
    cfg: &CnnConfig,
    params: &CnnParams,
    vocab: &Vocabulary,
    tokens: &[String],
    extra: Option<&[f64]>,
) -> Result<(usize, Vec<f64>)> {
    let ids = token_ids(vocab, tokens, cfg.t_max);
    predict_ids(cfg, params, &ids, extra)
}

/// [`predict`] over precomputed token ids.
pub fn predict_ids(
    cfg: &CnnConfig,
    params: &CnnParams,
    ids: &[usize],
    extra: Option<&[f64]>,
) -> Result<(usize, Vec<f64>)> {
    let trace = forward(cfg, params, ids, extra, None)?;
    Ok((argmax(&trace.probs), trace.probs))
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
