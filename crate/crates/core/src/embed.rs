//! Embedding training over the aggregated call graph.
//!
//! The objective pulls every embedding toward the arithmetic mean of its
//! callees' embeddings and every norm toward one:
//!
//! ```text
//! L = alpha     * sum over m with callees  |v(m) - mean of v(callees)|^2
//!   + (1-alpha) * sum over all m           (1 - |v(m)|)^2
//! ```
//!
//! Minimization runs as minibatch SGD. A step owns the terms of the batch
//! methods and updates every embedding those terms touch, so a callee is
//! also dragged toward its caller's residual whenever the caller lands in a
//! batch; leaf methods therefore still learn from how they are used. After
//! the gradient step each batch method is pushed toward the orthogonal
//! complement of a handful of randomly sampled unconnected names.
//!
//! Training is single-threaded and bit-reproducible for a fixed config.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acg::AggregatedCallGraph;
use crate::{Error, Result};

/// Norms below this skip the norm-term gradient (singular at the origin).
const NORM_EPSILON: f64 = 1e-8;

/// One vector per graph node, names in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// Row-major `names.len() * dim` storage.
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Build a table from (name, vector) pairs; names are sorted, vectors
    /// must all have length `dim` and finite components.
    pub fn from_pairs(dim: usize, pairs: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut names = Vec::with_capacity(pairs.len());
        let mut data = Vec::with_capacity(pairs.len() * dim);
        for (name, vector) in pairs {
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("non-finite component for {name}")));
            }
            names.push(name);
            data.extend_from_slice(&vector);
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(EmbeddingTable {
            dim,
            names,
            index,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Names in lexicographic order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.index.get(name).map(|&i| self.row(i))
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    fn row_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), self.row(i)))
    }

    fn validate_finite(&self, step: usize) -> Result<()> {
        if self.data.iter().any(|x| !x.is_finite()) {
            Err(Error::NonFiniteLoss { step })
        } else {
            Ok(())
        }
    }
}

/// Training hyperparameters. Defaults reproduce the reference run:
/// 100 dimensions, 5000 minibatch steps of 200 methods, 10 negative samples
/// per method, learning rate 0.75 decaying 4% per epoch.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    /// Number of minibatch steps.
    pub loops: usize,
    pub batch_size: usize,
    pub negatives: usize,
    pub lr0: f64,
    /// Fractional decay applied to the learning rate after each full pass
    /// over the node set.
    pub lr_decay: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            loops: 5000,
            batch_size: 200,
            negatives: 10,
            lr0: 0.75,
            lr_decay: 0.04,
            alpha: 0.5,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return Err(Error::InvalidConfig("lr-decay must be in (0, 1)".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One trace row per training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub lr: f64,
    /// Value of the batch-owned objective terms before the step's update.
    pub batch_loss: f64,
}

/// Training output: the final table plus the per-step loss trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub table: EmbeddingTable,
    pub trace: Vec<TraceRow>,
}

/// Seeded uniform initialization: every component drawn from
/// `[-1, 1] / sqrt(dim)`, names visited in canonical order.
pub fn init_embeddings(graph: &AggregatedCallGraph, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let mut data = Vec::with_capacity(graph.node_count() * dim);
    for _ in 0..graph.node_count() {
        for _ in 0..dim {
            let unit: f64 = rng.random::<f64>() * 2.0 - 1.0;
            data.push(unit * scale);
        }
    }
    let names: Vec<String> = graph.names().to_vec();
    let index = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    EmbeddingTable {
        dim,
        names,
        index,
        data,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mean of the callee vectors of node `id`; `None` for leaves.
fn callee_mean(table: &EmbeddingTable, graph: &AggregatedCallGraph, id: u32) -> Option<Vec<f64>> {
    let callees = graph.callee_ids(id);
    if callees.is_empty() {
        return None;
    }
    let mut mean = vec![0.0; table.dim()];
    for &c in callees {
        let row = table.row(c as usize);
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    let inv = 1.0 / callees.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Some(mean)
}

/// Full objective over the graph.
pub fn loss(table: &EmbeddingTable, graph: &AggregatedCallGraph, alpha: f64) -> Result<f64> {
    check_coverage(table, graph)?;
    let mut callee_term = 0.0;
    let mut norm_term = 0.0;
    for id in 0..graph.node_count() as u32 {
        let v = table.row(id as usize);
        if let Some(mean) = callee_mean(table, graph, id) {
            callee_term += v
                .iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let deviation = 1.0 - norm(v);
        norm_term += deviation * deviation;
    }
    Ok(alpha * callee_term + (1.0 - alpha) * norm_term)
}

/// Analytic gradient of [`loss`] with respect to `v(name)`.
///
/// Three contributions: the node's own callee-mean residual, the coupling
/// through every caller's residual, and the norm regularizer.
pub fn gradient(
    table: &EmbeddingTable,
    graph: &AggregatedCallGraph,
    alpha: f64,
    name: &str,
) -> Result<Vec<f64>> {
    check_coverage(table, graph)?;
    let id = graph
        .node_id(name)
        .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
    let dim = table.dim();
    let v = table.row(id as usize);
    let mut grad = vec![0.0; dim];

    if let Some(mean) = callee_mean(table, graph, id) {
        for ((g, a), b) in grad.iter_mut().zip(v).zip(&mean) {
            *g += 2.0 * alpha * (a - b);
        }
    }

    for &caller in graph.caller_ids(id) {
        let mean = callee_mean(table, graph, caller).expect("caller has at least one callee");
        let scale = 2.0 * alpha / graph.callee_ids(caller).len() as f64;
        let p = table.row(caller as usize);
        for ((g, a), b) in grad.iter_mut().zip(p).zip(&mean) {
            *g -= scale * (a - b);
        }
    }

    let n = norm(v);
    if n >= NORM_EPSILON {
        let scale = -2.0 * (1.0 - alpha) * (1.0 - n) / n;
        for (g, a) in grad.iter_mut().zip(v) {
            *g += scale * a;
        }
    }
    Ok(grad)
}

fn check_coverage(table: &EmbeddingTable, graph: &AggregatedCallGraph) -> Result<()> {
    if table.len() != graph.node_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.node_count(),
            actual: table.len(),
        });
    }
    // Both sides are sorted, so ids align exactly when the name sets match.
    for (table_name, graph_name) in table.names().iter().zip(graph.names()) {
        if table_name != graph_name {
            return Err(Error::UnknownNode(graph_name.clone()));
        }
    }
    Ok(())
}

/// Draw up to `k` distinct names not connected to `name` (neither callee nor
/// caller, nor the name itself), uniformly without replacement. Returns fewer
/// when the eligible pool is smaller than `k`.
pub fn sample_negatives<'g, R: Rng>(
    graph: &'g AggregatedCallGraph,
    name: &str,
    k: usize,
    rng: &mut R,
) -> Result<Vec<&'g str>> {
    let id = graph
        .node_id(name)
        .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
    let excluded = excluded_set(graph, id);
    Ok(sample_negative_ids(graph, &excluded, k, rng)
        .into_iter()
        .map(|i| graph.name(i))
        .collect())
}

fn excluded_set(graph: &AggregatedCallGraph, id: u32) -> HashSet<u32> {
    let mut excluded: HashSet<u32> = HashSet::new();
    excluded.insert(id);
    excluded.extend(graph.callee_ids(id).iter().copied());
    excluded.extend(graph.caller_ids(id).iter().copied());
    excluded
}

fn sample_negative_ids<R: Rng>(
    graph: &AggregatedCallGraph,
    excluded: &HashSet<u32>,
    k: usize,
    rng: &mut R,
) -> Vec<u32> {
    let n = graph.node_count() as u32;
    let eligible = n as usize - excluded.len();
    if eligible <= k {
        return (0..n).filter(|i| !excluded.contains(i)).collect();
    }
    let mut picked: Vec<u32> = Vec::with_capacity(k);
    let mut seen: HashSet<u32> = HashSet::with_capacity(k);
    let mut attempts = 0usize;
    let max_attempts = 20 * (n as usize) + 100;
    while picked.len() < k && attempts < max_attempts {
        attempts += 1;
        let candidate = rng.random_range(0..n);
        if excluded.contains(&candidate) || !seen.insert(candidate) {
            continue;
        }
        picked.push(candidate);
    }
    if picked.len() < k {
        // Pathologically dense graph: fall back to the exact pool.
        let mut pool: Vec<u32> = (0..n)
            .filter(|i| !excluded.contains(i) && !seen.contains(i))
            .collect();
        pool.shuffle(rng);
        picked.extend(pool.into_iter().take(k - picked.len()));
    }
    picked
}

/// Shrink the component of `v_m` parallel to the negative sample:
/// `v_m <- v_m - eta * (v_m . n_hat) * n_hat`. No-op for zero-norm negatives.
pub fn negative_update(v_m: &mut [f64], v_n: &[f64], eta: f64) {
    let n = norm(v_n);
    if n < NORM_EPSILON {
        return;
    }
    let projection: f64 = v_m.iter().zip(v_n).map(|(a, b)| a * b).sum::<f64>() / n;
    let scale = eta * projection / n;
    for (m, b) in v_m.iter_mut().zip(v_n) {
        *m -= scale * b;
    }
}

/// Deterministic cycling batch source: a seeded shuffle of all node ids,
/// reshuffled at every epoch boundary.
struct BatchCycler {
    order: Vec<u32>,
    cursor: usize,
    epochs_completed: usize,
    rng: ChaCha8Rng,
}

impl BatchCycler {
    fn new(node_count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<u32> = (0..node_count as u32).collect();
        order.shuffle(&mut rng);
        BatchCycler {
            order,
            cursor: 0,
            epochs_completed: 0,
            rng,
        }
    }

    fn next_batch(&mut self, size: usize, out: &mut Vec<u32>) {
        out.clear();
        while out.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
                self.epochs_completed += 1;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
    }
}

/// Minibatch SGD training. Bit-reproducible for a fixed config; aborts with
/// the offending step if the objective stops being finite.
pub fn train(graph: &AggregatedCallGraph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut table = init_embeddings(graph, cfg.dim, cfg.seed);
    let node_count = graph.node_count();
    let dim = cfg.dim;

    // Negative sampling exclusions are static; build them once.
    let exclusions: Vec<HashSet<u32>> = (0..node_count as u32)
        .map(|id| excluded_set(graph, id))
        .collect();

    let mut cycler = BatchCycler::new(node_count, cfg.seed.wrapping_add(0x9e37_79b9));
    let mut negative_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7f4a_7c15));

    let mut batch: Vec<u32> = Vec::with_capacity(cfg.batch_size);
    let mut delta = vec![0.0f64; node_count * dim];
    let mut touched: Vec<u32> = Vec::new();
    let mut is_touched = vec![false; node_count];
    let mut trace = Vec::with_capacity(cfg.loops);
    let mut negative_buf = vec![0.0f64; dim];

    for step in 0..cfg.loops {
        let lr = cfg.lr0 * (1.0 - cfg.lr_decay).powi(cycler.epochs_completed as i32);
        cycler.next_batch(cfg.batch_size, &mut batch);

        let mut batch_loss = 0.0;
        for &m in &batch {
            let v = table.row(m as usize);
            if let Some(mean) = callee_mean(&table, graph, m) {
                let residual: Vec<f64> = v.iter().zip(&mean).map(|(a, b)| a - b).collect();
                batch_loss += cfg.alpha * residual.iter().map(|x| x * x).sum::<f64>();
                let callees = graph.callee_ids(m);
                let callee_scale = 2.0 * cfg.alpha / callees.len() as f64;
                touch(&mut delta, &mut touched, &mut is_touched, m, dim, |d| {
                    for (g, r) in d.iter_mut().zip(&residual) {
                        *g += 2.0 * cfg.alpha * r;
                    }
                });
                for &c in callees {
                    touch(&mut delta, &mut touched, &mut is_touched, c, dim, |d| {
                        for (g, r) in d.iter_mut().zip(&residual) {
                            *g -= callee_scale * r;
                        }
                    });
                }
            }
            let v = table.row(m as usize);
            let n = norm(v);
            let deviation = 1.0 - n;
            batch_loss += (1.0 - cfg.alpha) * deviation * deviation;
            if n >= NORM_EPSILON {
                let scale = -2.0 * (1.0 - cfg.alpha) * deviation / n;
                let row: Vec<f64> = v.to_vec();
                touch(&mut delta, &mut touched, &mut is_touched, m, dim, |d| {
                    for (g, a) in d.iter_mut().zip(&row) {
                        *g += scale * a;
                    }
                });
            }
        }
        if !batch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }

        for &id in &touched {
            let base = id as usize * dim;
            let row = table.row_mut(id as usize);
            for (x, g) in row.iter_mut().zip(&delta[base..base + dim]) {
                *x -= lr * g;
            }
            delta[base..base + dim].fill(0.0);
            is_touched[id as usize] = false;
        }
        touched.clear();

        for &m in &batch {
            let negatives =
                sample_negative_ids(graph, &exclusions[m as usize], cfg.negatives, &mut negative_rng);
            for neg in negatives {
                negative_buf.copy_from_slice(table.row(neg as usize));
                negative_update(table.row_mut(m as usize), &negative_buf, lr);
            }
        }

        trace.push(TraceRow {
            step,
            lr,
            batch_loss,
        });
    }

    table.validate_finite(cfg.loops)?;
    Ok(TrainOutcome { table, trace })
}

fn touch(
    delta: &mut [f64],
    touched: &mut Vec<u32>,
    is_touched: &mut [bool],
    id: u32,
    dim: usize,
    apply: impl FnOnce(&mut [f64]),
) {
    if !is_touched[id as usize] {
        is_touched[id as usize] = true;
        touched.push(id);
    }
    let base = id as usize * dim;
    apply(&mut delta[base..base + dim]);
}

/// Write the table: `<count> <dim>` header, then one `name v1 .. v_dim` line
/// per name in lexicographic order, floats at full round-trip precision.
pub fn save<W: Write>(table: &EmbeddingTable, mut out: W) -> Result<()> {
    use std::fmt::Write as _;
    let io_err = |e| Error::io("<embeddings>", e);
    writeln!(out, "{} {}", table.len(), table.dim()).map_err(io_err)?;
    let mut line = String::new();
    for (name, vector) in table.iter() {
        line.clear();
        line.push_str(name);
        for x in vector {
            let _ = write!(line, " {x}");
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(())
}

/// Read a table written by [`save`]; errors name the offending line.
pub fn load<R: BufRead>(reader: R, origin: &Path) -> Result<EmbeddingTable> {
    let fail = |line: usize, msg: String| Error::format(origin, line, msg);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| fail(1, "empty embedding file".into()))?;
    let header = header.map_err(|e| Error::io(origin, e))?;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fail(1, format!("bad header {header:?}")))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fail(1, format!("bad header {header:?}")))?;
    if parts.next().is_some() {
        return Err(fail(1, format!("bad header {header:?}")));
    }

    let mut pairs: Vec<(String, Vec<f64>)> = Vec::with_capacity(count);
    let mut previous_name: Option<String> = None;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let name = fields.next().unwrap_or("").to_string();
        if name.is_empty() {
            return Err(fail(lineno, "missing name".into()));
        }
        if let Some(prev) = &previous_name {
            if *prev >= name {
                return Err(fail(lineno, format!("names out of order: {prev:?} then {name:?}")));
            }
        }
        let vector: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| fail(lineno, format!("bad float {f:?}")))
            })
            .collect::<Result<_>>()?;
        if vector.len() != dim {
            return Err(fail(
                lineno,
                format!("expected {dim} components, got {}", vector.len()),
            ));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(fail(lineno, "non-finite component".into()));
        }
        previous_name = Some(name.clone());
        pairs.push((name, vector));
    }
    if pairs.len() != count {
        return Err(fail(
            1,
            format!("header declares {count} rows, file has {}", pairs.len()),
        ));
    }
    EmbeddingTable::from_pairs(dim, pairs)
}
