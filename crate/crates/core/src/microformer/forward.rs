use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::model::{Linear, ParamKind, Tensor, TransformerClassifier};
use super::ops::{
    add_assign, axpy, dot, gelu, gelu_grad, layer_norm, layer_norm_backward, matmul, matmul_at_acc, matmul_bt,
    softmax_backward, softmax_in_place, LnCache,
};
use crate::error::{Error, Result};

/// Intermediate values of one forward pass, for inspection.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub logits: [f64; 2],
    /// `[layer][head]`, each a row-major `T x T` matrix of attention weights.
    pub attention: Vec<Vec<Vec<f64>>>,
    /// Pre-gain output of every layer norm, in evaluation order, `T x d` (the
    /// final one is `1 x d`).
    pub normalized: Vec<Vec<f64>>,
}

struct LinearCache {
    y: Vec<f64>,
    u: Option<Vec<f64>>,
}

fn linear_forward(lin: &Linear, x: &[f64], rows: usize) -> LinearCache {
    let (d_out, d_in) = (lin.d_out(), lin.d_in());
    let mut y = matmul_bt(x, &lin.weight.data, rows, d_in, d_out);
    for r in 0..rows {
        add_assign(&mut y[r * d_out..(r + 1) * d_out], &lin.bias.data);
    }
    let u = lin.lora.as_ref().map(|l| {
        let u = matmul_bt(x, &l.a.data, rows, d_in, l.rank);
        let delta = matmul_bt(&u, &l.b.data, rows, l.rank, d_out);
        axpy(&mut y, l.scaling(), &delta);
        u
    });
    LinearCache { y, u }
}

/// Gradient buffers for one linear layer. Empty buffers mean frozen.
#[derive(Debug, Clone, Default)]
pub(crate) struct LinearGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub bl: Vec<f64>,
}

fn buf(trainable: bool, len: usize) -> Vec<f64> {
    if trainable {
        vec![0.0; len]
    } else {
        Vec::new()
    }
}

impl LinearGrad {
    fn zeros(lin: &Linear, base: bool, adapter: bool) -> Self {
        let (a, bl) = match &lin.lora {
            Some(l) => (buf(adapter, l.a.numel()), buf(adapter, l.b.numel())),
            None => (Vec::new(), Vec::new()),
        };
        LinearGrad {
            w: buf(base, lin.weight.numel()),
            b: buf(base, lin.bias.numel()),
            a,
            bl,
        }
    }

    fn add(&mut self, o: &LinearGrad) {
        add_assign(&mut self.w, &o.w);
        add_assign(&mut self.b, &o.b);
        add_assign(&mut self.a, &o.a);
        add_assign(&mut self.bl, &o.bl);
    }
}

/// Accumulates parameter gradients and returns `dx` when requested.
fn linear_backward(
    lin: &Linear,
    x: &[f64],
    cache: &LinearCache,
    dy: &[f64],
    rows: usize,
    g: &mut LinearGrad,
    need_dx: bool,
) -> Option<Vec<f64>> {
    let (d_out, d_in) = (lin.d_out(), lin.d_in());
    if !g.w.is_empty() {
        matmul_at_acc(&mut g.w, dy, x, rows, d_out, d_in);
    }
    if !g.b.is_empty() {
        for r in 0..rows {
            add_assign(&mut g.b, &dy[r * d_out..(r + 1) * d_out]);
        }
    }
    let mut du = None;
    if let (Some(l), Some(u)) = (&lin.lora, &cache.u) {
        let s = l.scaling();
        if !g.bl.is_empty() {
            let mut db = vec![0.0; d_out * l.rank];
            matmul_at_acc(&mut db, dy, u, rows, d_out, l.rank);
            axpy(&mut g.bl, s, &db);
        }
        if need_dx || !g.a.is_empty() {
            let mut d = matmul(dy, &l.b.data, rows, d_out, l.rank);
            d.iter_mut().for_each(|v| *v *= s);
            if !g.a.is_empty() {
                matmul_at_acc(&mut g.a, &d, x, rows, l.rank, d_in);
            }
            du = Some(d);
        }
    }
    if !need_dx {
        return None;
    }
    let mut dx = matmul(dy, &lin.weight.data, rows, d_out, d_in);
    if let (Some(l), Some(du)) = (&lin.lora, &du) {
        add_assign(&mut dx, &matmul(du, &l.a.data, rows, l.rank, d_in));
    }
    Some(dx)
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LnGrad {
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

impl LnGrad {
    fn zeros(d: usize, trainable: bool) -> Self {
        LnGrad {
            g: buf(trainable, d),
            b: buf(trainable, d),
        }
    }

    fn add(&mut self, o: &LnGrad) {
        add_assign(&mut self.g, &o.g);
        add_assign(&mut self.b, &o.b);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerGrad {
    pub ln1: LnGrad,
    pub attn: [LinearGrad; 4],
    pub ln2: LnGrad,
    pub ff_in: LinearGrad,
    pub ff_out: LinearGrad,
}

/// Gradients shaped like the model. Token-embedding rows are kept sparse.
#[derive(Debug, Clone)]
pub(crate) struct ModelGrad {
    pub tok: Option<BTreeMap<usize, Vec<f64>>>,
    pub pos: Vec<f64>,
    pub layers: Vec<LayerGrad>,
    pub ln_f: LnGrad,
    pub head: LinearGrad,
}

impl ModelGrad {
    pub fn zeros(m: &TransformerClassifier) -> Self {
        let base = m.is_trainable(ParamKind::Base);
        let adapter = m.is_trainable(ParamKind::Adapter);
        let head = m.is_trainable(ParamKind::Head);
        let d = m.config.d_model;
        ModelGrad {
            tok: base.then(BTreeMap::new),
            pos: buf(base, m.pos_emb.numel()),
            layers: m
                .layers
                .iter()
                .map(|l| LayerGrad {
                    ln1: LnGrad::zeros(d, base),
                    attn: std::array::from_fn(|i| LinearGrad::zeros(&l.attn[i], base, adapter)),
                    ln2: LnGrad::zeros(d, base),
                    ff_in: LinearGrad::zeros(&l.ff_in, base, adapter),
                    ff_out: LinearGrad::zeros(&l.ff_out, base, adapter),
                })
                .collect(),
            ln_f: LnGrad::zeros(d, base),
            head: LinearGrad::zeros(&m.head, head, adapter),
        }
    }

    pub fn add(&mut self, o: &ModelGrad) {
        if let (Some(t), Some(ot)) = (&mut self.tok, &o.tok) {
            for (row, g) in ot {
                match t.get_mut(row) {
                    Some(r) => add_assign(r, g),
                    None => {
                        t.insert(*row, g.clone());
                    }
                }
            }
        }
        add_assign(&mut self.pos, &o.pos);
        for (l, ol) in self.layers.iter_mut().zip(&o.layers) {
            l.ln1.add(&ol.ln1);
            for (p, op) in l.attn.iter_mut().zip(&ol.attn) {
                p.add(op);
            }
            l.ln2.add(&ol.ln2);
            l.ff_in.add(&ol.ff_in);
            l.ff_out.add(&ol.ff_out);
        }
        self.ln_f.add(&o.ln_f);
        self.head.add(&o.head);
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_dense_mut(|v| v.iter_mut().for_each(|x| *x *= s));
        if let Some(t) = &mut self.tok {
            t.values_mut().for_each(|r| r.iter_mut().for_each(|x| *x *= s));
        }
    }

    fn for_each_dense_mut(&mut self, mut f: impl FnMut(&mut Vec<f64>)) {
        f(&mut self.pos);
        for l in &mut self.layers {
            f(&mut l.ln1.g);
            f(&mut l.ln1.b);
            for p in &mut l.attn {
                f(&mut p.w);
                f(&mut p.b);
                f(&mut p.a);
                f(&mut p.bl);
            }
            f(&mut l.ln2.g);
            f(&mut l.ln2.b);
            for p in [&mut l.ff_in, &mut l.ff_out] {
                f(&mut p.w);
                f(&mut p.b);
            }
        }
        f(&mut self.ln_f.g);
        f(&mut self.ln_f.b);
        f(&mut self.head.w);
        f(&mut self.head.b);
    }

    /// Buffers in the model's canonical tensor order; the token embedding is
    /// skipped because it is handled row-wise.
    pub fn dense_slots(&self, m: &TransformerClassifier) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&[], &self.pos];
        for (l, layer) in self.layers.iter().zip(&m.layers) {
            out.push(&l.ln1.g);
            out.push(&l.ln1.b);
            for (p, lin) in l.attn.iter().zip(&layer.attn) {
                out.push(&p.w);
                out.push(&p.b);
                if lin.lora.is_some() {
                    out.push(&p.a);
                    out.push(&p.bl);
                }
            }
            out.push(&l.ln2.g);
            out.push(&l.ln2.b);
            out.push(&l.ff_in.w);
            out.push(&l.ff_in.b);
            out.push(&l.ff_out.w);
            out.push(&l.ff_out.b);
        }
        out.push(&self.ln_f.g);
        out.push(&self.ln_f.b);
        out.push(&self.head.w);
        out.push(&self.head.b);
        out
    }
}

/// Gradients of trainable tensors, keyed by tensor name.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub BTreeMap<String, Tensor>);

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub(crate) fn from_model_grad(m: &TransformerClassifier, g: &ModelGrad) -> Self {
        let slots = g.dense_slots(m);
        let mut out = BTreeMap::new();
        for ((name, t, kind), slot) in m.params().into_iter().zip(slots) {
            if !m.is_trainable(kind) {
                continue;
            }
            let data = if name == "tok_emb" {
                let mut dense = vec![0.0; t.numel()];
                let d = m.config.d_model;
                for (row, v) in g.tok.as_ref().expect("trainable embeddings") {
                    dense[row * d..(row + 1) * d].copy_from_slice(v);
                }
                dense
            } else {
                slot.to_vec()
            };
            debug_assert_eq!(data.len(), t.numel(), "{name}");
            out.insert(
                name,
                Tensor {
                    shape: t.shape.clone(),
                    data,
                },
            );
        }
        Gradients(out)
    }
}

struct LayerCache {
    ln1: LnCache,
    a: Vec<f64>,
    qkv: [LinearCache; 3],
    probs: Vec<Vec<f64>>,
    o: Vec<f64>,
    out: LinearCache,
    mask1: Option<Vec<f64>>,
    ln2: LnCache,
    b: Vec<f64>,
    f1: LinearCache,
    g: Vec<f64>,
    f2: LinearCache,
    mask2: Option<Vec<f64>>,
}

struct Cache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    ln_f: LnCache,
    z: Vec<f64>,
    head: LinearCache,
}

fn dropout_mask(rng: Option<&mut ChaCha8Rng>, p: f64, len: usize) -> Option<Vec<f64>> {
    let rng = rng?;
    if p == 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some((0..len).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect())
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
    }
}

impl TransformerClassifier {
    pub(crate) fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::InvalidArgument("empty token sequence".into()));
        }
        if ids.len() > self.config.max_seq_len {
            return Err(Error::InvalidArgument(format!(
                "sequence of {} tokens exceeds max_seq_len {}",
                ids.len(),
                self.config.max_seq_len
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Error::InvalidArgument(format!(
                "token id {bad} is outside the vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Runs the encoder. `rng` enables dropout.
    fn forward_cached(&self, ids: &[usize], mut rng: Option<&mut ChaCha8Rng>) -> Cache {
        let cfg = &self.config;
        let (t, d, nh, dh) = (ids.len(), cfg.d_model, cfg.n_heads, cfg.head_dim());
        let mut x = vec![0.0; t * d];
        for (i, &id) in ids.iter().enumerate() {
            let row = &mut x[i * d..(i + 1) * d];
            row.copy_from_slice(&self.tok_emb.data[id * d..(id + 1) * d]);
            add_assign(row, &self.pos_emb.data[i * d..(i + 1) * d]);
        }
        let scale = 1.0 / (dh as f64).sqrt();
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (a, ln1) = layer_norm(&x, &layer.ln1.gain.data, &layer.ln1.bias.data, t, d);
            let qkv = [0, 1, 2].map(|i| linear_forward(&layer.attn[i], &a, t));
            let (q, k, v) = (&qkv[0].y, &qkv[1].y, &qkv[2].y);
            let mut o = vec![0.0; t * d];
            let mut probs = Vec::with_capacity(nh);
            for h in 0..nh {
                let hs = h * dh..(h + 1) * dh;
                let mut p = vec![0.0; t * t];
                for i in 0..t {
                    let qi = &q[i * d..][hs.clone()];
                    let row = &mut p[i * t..(i + 1) * t];
                    for (j, s) in row.iter_mut().enumerate() {
                        *s = scale * dot(qi, &k[j * d..][hs.clone()]);
                    }
                    softmax_in_place(row);
                    let oi = &mut o[i * d..][hs.clone()];
                    for (j, &pij) in row.iter().enumerate() {
                        axpy(oi, pij, &v[j * d..][hs.clone()]);
                    }
                }
                probs.push(p);
            }
            let out = linear_forward(&layer.attn[3], &o, t);
            let mask1 = dropout_mask(rng.as_deref_mut(), cfg.dropout, t * d);
            let mut x_mid = out.y.clone();
            apply_mask(&mut x_mid, &mask1);
            add_assign(&mut x_mid, &x);
            let (b, ln2) = layer_norm(&x_mid, &layer.ln2.gain.data, &layer.ln2.bias.data, t, d);
            let f1 = linear_forward(&layer.ff_in, &b, t);
            let g: Vec<f64> = f1.y.iter().map(|&v| gelu(v)).collect();
            let f2 = linear_forward(&layer.ff_out, &g, t);
            let mask2 = dropout_mask(rng.as_deref_mut(), cfg.dropout, t * d);
            let mut x_out = f2.y.clone();
            apply_mask(&mut x_out, &mask2);
            add_assign(&mut x_out, &x_mid);
            x = x_out;
            layers.push(LayerCache {
                ln1,
                a,
                qkv,
                probs,
                o,
                out,
                mask1,
                ln2,
                b,
                f1,
                g,
                f2,
                mask2,
            });
        }
        let mut pooled = vec![0.0; d];
        for i in 0..t {
            add_assign(&mut pooled, &x[i * d..(i + 1) * d]);
        }
        pooled.iter_mut().for_each(|v| *v /= t as f64);
        let (z, ln_f) = layer_norm(&pooled, &self.ln_f.gain.data, &self.ln_f.bias.data, 1, d);
        let head = linear_forward(&self.head, &z, 1);
        Cache {
            ids: ids.to_vec(),
            layers,
            ln_f,
            z,
            head,
        }
    }

    /// Class logits `[negative, positive]` in evaluation mode.
    pub fn forward(&self, ids: &[usize]) -> Result<[f64; 2]> {
        self.check_ids(ids)?;
        let c = self.forward_cached(ids, None);
        Ok([c.head.y[0], c.head.y[1]])
    }

    pub fn predict(&self, ids: &[usize]) -> Result<bool> {
        let [neg, pos] = self.forward(ids)?;
        Ok(pos > neg)
    }

    pub fn forward_trace(&self, ids: &[usize]) -> Result<ForwardTrace> {
        self.check_ids(ids)?;
        let c = self.forward_cached(ids, None);
        let mut normalized = Vec::new();
        for l in &c.layers {
            normalized.push(l.ln1.xhat.clone());
            normalized.push(l.ln2.xhat.clone());
        }
        normalized.push(c.ln_f.xhat.clone());
        Ok(ForwardTrace {
            logits: [c.head.y[0], c.head.y[1]],
            attention: c.layers.into_iter().map(|l| l.probs).collect(),
            normalized,
        })
    }

    /// Cross-entropy of one example; gradients are added into `grad`.
    pub(crate) fn example_grad(
        &self,
        ids: &[usize],
        label: bool,
        rng: Option<&mut ChaCha8Rng>,
        grad: &mut ModelGrad,
    ) -> (f64, bool) {
        let c = self.forward_cached(ids, rng);
        let logits = [c.head.y[0], c.head.y[1]];
        let mut p = logits;
        softmax_in_place(&mut p);
        let y = label as usize;
        let loss = log_sum_exp(&logits) - logits[y];
        let correct = (logits[1] > logits[0]) == label;
        let mut dlogits = p.to_vec();
        dlogits[y] -= 1.0;
        self.backward(&c, &dlogits, grad);
        (loss, correct)
    }

    fn backward(&self, c: &Cache, dlogits: &[f64], grad: &mut ModelGrad) {
        let cfg = &self.config;
        let (t, d, nh, dh) = (c.ids.len(), cfg.d_model, cfg.n_heads, cfg.head_dim());
        let dz = linear_backward(&self.head, &c.z, &c.head, dlogits, 1, &mut grad.head, true)
            .expect("dx requested");
        let base = grad.tok.is_some();
        let dpooled = layer_norm_backward(
            &dz,
            &c.ln_f,
            &self.ln_f.gain.data,
            &mut grad.ln_f.g,
            &mut grad.ln_f.b,
            1,
            d,
        );
        let mut dx = vec![0.0; t * d];
        for i in 0..t {
            axpy(&mut dx[i * d..(i + 1) * d], 1.0 / t as f64, &dpooled);
        }
        let scale = 1.0 / (dh as f64).sqrt();
        for (li, (layer, lc)) in self.layers.iter().zip(&c.layers).enumerate().rev() {
            let g = &mut grad.layers[li];
            // Nothing below the first layer's attention needs gradients when
            // the embeddings and layer norms are frozen.
            let need_input = base || li > 0;

            // Feed-forward branch.
            let mut df2 = dx.clone();
            apply_mask(&mut df2, &lc.mask2);
            let dgel = linear_backward(&layer.ff_out, &lc.g, &lc.f2, &df2, t, &mut g.ff_out, true)
                .expect("dx requested");
            let df1: Vec<f64> = dgel.iter().zip(&lc.f1.y).map(|(dg, &v)| dg * gelu_grad(v)).collect();
            let db = linear_backward(&layer.ff_in, &lc.b, &lc.f1, &df1, t, &mut g.ff_in, true)
                .expect("dx requested");
            let dmid = layer_norm_backward(&db, &lc.ln2, &layer.ln2.gain.data, &mut g.ln2.g, &mut g.ln2.b, t, d);
            add_assign(&mut dx, &dmid);

            // Attention branch.
            let mut dattn = dx.clone();
            apply_mask(&mut dattn, &lc.mask1);
            let d_o = linear_backward(&layer.attn[3], &lc.o, &lc.out, &dattn, t, &mut g.attn[3], true)
                .expect("dx requested");
            let (q, k, v) = (&lc.qkv[0].y, &lc.qkv[1].y, &lc.qkv[2].y);
            let mut dq = vec![0.0; t * d];
            let mut dk = vec![0.0; t * d];
            let mut dv = vec![0.0; t * d];
            let mut dp = vec![0.0; t];
            for h in 0..nh {
                let hs = h * dh..(h + 1) * dh;
                let p = &lc.probs[h];
                for i in 0..t {
                    let doi = &d_o[i * d..][hs.clone()];
                    let pi = &p[i * t..(i + 1) * t];
                    for j in 0..t {
                        dp[j] = dot(doi, &v[j * d..][hs.clone()]);
                        axpy(&mut dv[j * d..][hs.clone()], pi[j], doi);
                    }
                    let ds = softmax_backward(pi, &dp);
                    for j in 0..t {
                        let s = scale * ds[j];
                        axpy(&mut dq[i * d..][hs.clone()], s, &k[j * d..][hs.clone()]);
                        axpy(&mut dk[j * d..][hs.clone()], s, &q[i * d..][hs.clone()]);
                    }
                }
            }
            let mut da = vec![0.0; t * d];
            for (i, dy) in [dq, dk, dv].iter().enumerate() {
                if let Some(part) = linear_backward(&layer.attn[i], &lc.a, &lc.qkv[i], dy, t, &mut g.attn[i], need_input)
                {
                    add_assign(&mut da, &part);
                }
            }
            if need_input {
                let din = layer_norm_backward(&da, &lc.ln1, &layer.ln1.gain.data, &mut g.ln1.g, &mut g.ln1.b, t, d);
                add_assign(&mut dx, &din);
            }
        }
        if let Some(tok) = &mut grad.tok {
            for (i, &id) in c.ids.iter().enumerate() {
                let row = &dx[i * d..(i + 1) * d];
                tok.entry(id).and_modify(|r| add_assign(r, row)).or_insert_with(|| row.to_vec());
                add_assign(&mut grad.pos[i * d..(i + 1) * d], row);
            }
        }
    }

    /// Mean cross-entropy over `batch` and its gradient with respect to every
    /// trainable tensor, in evaluation mode (no dropout).
    pub fn loss_and_grads(&self, batch: &[(Vec<usize>, bool)]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::EmptyData);
        }
        for (ids, _) in batch {
            self.check_ids(ids)?;
        }
        let mut grad = ModelGrad::zeros(self);
        let mut loss = 0.0;
        for (ids, label) in batch {
            loss += self.example_grad(ids, *label, None, &mut grad).0;
        }
        let n = batch.len() as f64;
        grad.scale(1.0 / n);
        Ok((loss / n, Gradients::from_model_grad(self, &grad)))
    }

    /// Mean cross-entropy over `batch` in evaluation mode.
    pub fn loss(&self, batch: &[(Vec<usize>, bool)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut total = 0.0;
        for (ids, label) in batch {
            let logits = self.forward(ids)?;
            total += log_sum_exp(&logits) - logits[*label as usize];
        }
        Ok(total / batch.len() as f64)
    }
}

fn log_sum_exp(x: &[f64; 2]) -> f64 {
    let m = x[0].max(x[1]);
    m + ((x[0] - m).exp() + (x[1] - m).exp()).ln()
}
