use super::params::{AttentionParams, Layout, LstmParams};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, gemm, matvec_acc, matvec_t_acc, sigmoid_in_place, tanh_in_place, MatRef};

/// One LSTM transition. Returns `(h_k, c_k)`.
pub fn lstm_step(p: &LstmParams<'_>, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = p.hidden;
    for (len, want) in [(x.len(), p.input), (h_prev.len(), d), (c_prev.len(), d)] {
        if len != want {
            return Err(Error::Dimension {
                expected: want,
                actual: len,
            });
        }
    }
    let mut z = p.b.to_vec();
    matvec_acc(p.w, x, &mut z);
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    let mut gates = vec![0.0; 4 * d];
    let mut tanh_c = vec![0.0; d];
    cell_forward(p.v, &mut z, h_prev, c_prev, &mut gates, &mut c, &mut tanh_c, &mut h);
    Ok((h, c))
}

/// Attention over the question states `hq_all` (`m × d`, row-major) for
/// article position `k`. Returns `(a_k, alpha_k)`.
pub fn attention_step(
    hq_all: &[f64],
    hd_k: &[f64],
    hm_prev: &[f64],
    attn: &AttentionParams<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = attn.hidden;
    if hd_k.len() != d || hm_prev.len() != d || !hq_all.len().is_multiple_of(d) {
        return Err(Error::Dimension {
            expected: d,
            actual: hd_k.len(),
        });
    }
    let m = hq_all.len() / d;
    if m == 0 {
        return Err(Error::invalid("attention over an empty question"));
    }
    let mut base = vec![0.0; d];
    matvec_acc(attn.wd, hd_k, &mut base);
    matvec_acc(attn.wm, hm_prev, &mut base);
    let mut energies = Vec::with_capacity(m);
    let mut pre = vec![0.0; d];
    for j in 0..m {
        pre.copy_from_slice(&base);
        matvec_acc(attn.wq, &hq_all[j * d..(j + 1) * d], &mut pre);
        tanh_in_place(&mut pre);
        energies.push(dot(attn.we, &pre));
    }
    let alpha = softmax(&energies);
    let mut a = vec![0.0; d];
    for (j, &w) in alpha.iter().enumerate() {
        axpy(w, &hq_all[j * d..(j + 1) * d], &mut a);
    }
    Ok((a, alpha))
}

pub(crate) fn softmax(e: &[f64]) -> Vec<f64> {
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = e.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// `z` holds `W x + b` on entry; adds `V h_prev` and applies the gates.
#[allow(clippy::too_many_arguments)]
fn cell_forward(
    v: &[f64],
    z: &mut [f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: &mut [f64],
    c: &mut [f64],
    tanh_c: &mut [f64],
    h: &mut [f64],
) {
    let d = h.len();
    matvec_acc(v, h_prev, z);
    gates[..4 * d].copy_from_slice(&z[..4 * d]);
    sigmoid_in_place(&mut gates[..3 * d]);
    tanh_in_place(&mut gates[3 * d..4 * d]);
    for r in 0..d {
        let (i, f, g) = (gates[r], gates[d + r], gates[3 * d + r]);
        c[r] = f * c_prev[r] + i * g;
    }
    tanh_c[..d].copy_from_slice(&c[..d]);
    tanh_in_place(&mut tanh_c[..d]);
    for r in 0..d {
        let o = gates[2 * d + r];
        h[r] = o * tanh_c[r];
    }
}

/// Activations of one LSTM over a sequence, row-major by step.
#[derive(Debug, Clone)]
pub(crate) struct LstmTrace {
    pub hidden: usize,
    pub steps: usize,
    /// `steps × 4d`: i, f, o after the sigmoid, candidate after tanh.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmTrace {
    fn with_capacity(steps: usize, d: usize) -> Self {
        LstmTrace {
            hidden: d,
            steps: 0,
            gates: Vec::with_capacity(steps * 4 * d),
            c: Vec::with_capacity(steps * d),
            tanh_c: Vec::with_capacity(steps * d),
            h: Vec::with_capacity(steps * d),
        }
    }

    pub fn h_at(&self, k: usize) -> &[f64] {
        &self.h[k * self.hidden..(k + 1) * self.hidden]
    }

    /// Appends one step; `z` holds the input projection plus bias.
    fn push(&mut self, v: &[f64], z: &mut [f64], zeros: &[f64]) {
        let d = self.hidden;
        let k = self.steps;
        let at = k * d;
        self.gates.resize((k + 1) * 4 * d, 0.0);
        self.c.resize(at + d, 0.0);
        self.tanh_c.resize(at + d, 0.0);
        self.h.resize(at + d, 0.0);
        let (h_done, h_new) = self.h.split_at_mut(at);
        let (c_done, c_new) = self.c.split_at_mut(at);
        let (h_prev, c_prev) = if k == 0 {
            (zeros, zeros)
        } else {
            (&h_done[at - d..], &c_done[at - d..])
        };
        cell_forward(
            v,
            z,
            h_prev,
            c_prev,
            &mut self.gates[k * 4 * d..],
            c_new,
            &mut self.tanh_c[at..],
            h_new,
        );
        self.steps += 1;
    }

    /// Last hidden state, zeros for an empty sequence.
    pub fn last_h(&self) -> Vec<f64> {
        if self.steps == 0 {
            vec![0.0; self.hidden]
        } else {
            self.h_at(self.steps - 1).to_vec()
        }
    }

    /// Hidden states shifted by one step (`h_{k-1}` at row `k`).
    pub fn h_prev_matrix(&self) -> Vec<f64> {
        let d = self.hidden;
        let mut out = vec![0.0; self.steps * d];
        if self.steps > 1 {
            out[d..].copy_from_slice(&self.h[..(self.steps - 1) * d]);
        }
        out
    }

    pub fn c_prev(&self, k: usize) -> Option<&[f64]> {
        let d = self.hidden;
        (k > 0).then(|| &self.c[(k - 1) * d..k * d])
    }
}

fn run_lstm(p: &LstmParams<'_>, x: &[f64], steps: usize) -> LstmTrace {
    let d = p.hidden;
    let mut z = vec![0.0; steps * 4 * d];
    gemm(
        MatRef::new(x, steps, p.input),
        MatRef::new(p.w, 4 * d, p.input).t(),
        0.0,
        &mut z,
        4 * d,
    );
    let zeros = vec![0.0; d];
    let mut trace = LstmTrace::with_capacity(steps, d);
    for k in 0..steps {
        let zk = &mut z[k * 4 * d..(k + 1) * 4 * d];
        axpy(1.0, p.b, zk);
        trace.push(p.v, zk, &zeros);
    }
    trace
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub m: usize,
    pub n: usize,
    pub q: LstmTrace,
    pub doc: LstmTrace,
    pub mm: LstmTrace,
    /// `n × m` attention weights.
    pub alpha: Vec<f64>,
    /// `n × d` attention summaries.
    pub a: Vec<f64>,
    /// `n × m × d` tanh activations inside the energies; empty unless
    /// recorded.
    pub u: Vec<f64>,
    pub logit_agree: f64,
    pub logit_disagree: f64,
}

/// Runs the full model on embedded sequences `xq` (`m × l`, `m ≥ 1`) and
/// `xd` (`n × l`).
pub(crate) fn forward(
    layout: &Layout,
    params: &[f64],
    xq: &[f64],
    m: usize,
    xd: &[f64],
    n: usize,
    record: bool,
) -> Trace {
    let d = layout.hidden_dim;
    debug_assert!(m >= 1);
    let q = run_lstm(&LstmParams::from_flat(&layout.qlstm, params), xq, m);
    let doc = run_lstm(&LstmParams::from_flat(&layout.dlstm, params), xd, n);
    let attn = AttentionParams::from_flat(layout, params);
    let ml = LstmParams::from_flat(&layout.mlstm, params);

    let mut pq = vec![0.0; m * d];
    gemm(MatRef::new(&q.h, m, d), MatRef::new(attn.wq, d, d).t(), 0.0, &mut pq, d);
    let mut pd = vec![0.0; n * d];
    gemm(
        MatRef::new(&doc.h, n, d),
        MatRef::new(attn.wd, d, d).t(),
        0.0,
        &mut pd,
        d,
    );
    // the mLSTM input projection splits into an article part and a
    // question part mixed by the attention weights
    let mut gd = vec![0.0; n * 4 * d];
    gemm(
        MatRef::new(&doc.h, n, d),
        MatRef::columns(ml.w, 4 * d, 2 * d, 0, d).t(),
        0.0,
        &mut gd,
        4 * d,
    );
    let mut gq = vec![0.0; m * 4 * d];
    gemm(
        MatRef::new(&q.h, m, d),
        MatRef::columns(ml.w, 4 * d, 2 * d, d, d).t(),
        0.0,
        &mut gq,
        4 * d,
    );

    let zeros = vec![0.0; d];
    let mut mm = LstmTrace::with_capacity(n, d);
    let mut alpha = Vec::with_capacity(n * m);
    let mut a_all = vec![0.0; n * d];
    let mut u_all = if record { vec![0.0; n * m * d] } else { Vec::new() };
    let mut scratch = if record { Vec::new() } else { vec![0.0; m * d] };
    let mut base = vec![0.0; d];
    let mut energies = vec![0.0; m];
    let mut z = vec![0.0; 4 * d];
    for k in 0..n {
        let hm_prev = if k == 0 { &zeros[..] } else { mm.h_at(k - 1) };
        base.copy_from_slice(&pd[k * d..(k + 1) * d]);
        matvec_acc(attn.wm, hm_prev, &mut base);
        let u = if record {
            &mut u_all[k * m * d..(k + 1) * m * d]
        } else {
            &mut scratch[..]
        };
        for j in 0..m {
            let row = &mut u[j * d..(j + 1) * d];
            for ((o, &p), &b) in row.iter_mut().zip(&pq[j * d..(j + 1) * d]).zip(&base) {
                *o = p + b;
            }
        }
        tanh_in_place(u);
        energies.iter_mut().for_each(|e| *e = 0.0);
        matvec_acc(u, attn.we, &mut energies);
        let alpha_k = softmax(&energies);
        let a = &mut a_all[k * d..(k + 1) * d];
        matvec_t_acc(&q.h, &alpha_k, a);
        z.copy_from_slice(&gd[k * 4 * d..(k + 1) * 4 * d]);
        axpy(1.0, ml.b, &mut z);
        matvec_t_acc(&gq, &alpha_k, &mut z);
        mm.push(ml.v, &mut z, &zeros);
        alpha.extend_from_slice(&alpha_k);
    }

    let h_last = mm.last_h();
    let logit_agree = dot(&params[layout.agree_w.clone()], &h_last) + params[layout.agree_b];
    let logit_disagree = dot(&params[layout.disagree_w.clone()], &h_last) + params[layout.disagree_b];
    Trace {
        m,
        n,
        q,
        doc,
        mm,
        alpha,
        a: a_all,
        u: u_all,
        logit_agree,
        logit_disagree,
    }
}
