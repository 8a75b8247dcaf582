use super::forward::{LstmTrace, Trace};
use super::params::{Layout, LstmLayout};
use crate::linalg::{axpy, dot, gemm, matvec_t_acc, MatRef};

/// Binary cross-entropy from a logit, `softplus(z) - y z`.
pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - y * z
}

/// Cell backward for step `k`. `dh` is the total gradient reaching `h_k`;
/// `dc` holds the gradient reaching `c_k` from step `k+1` and is replaced
/// by the gradient for `c_{k-1}`. Writes the pre-activation gradient.
fn cell_backward(trace: &LstmTrace, k: usize, dh: &[f64], dc: &mut [f64], dz: &mut [f64]) {
    let d = trace.hidden;
    let gates = &trace.gates[k * 4 * d..(k + 1) * 4 * d];
    let tanh_c = &trace.tanh_c[k * d..(k + 1) * d];
    let c_prev = trace.c_prev(k);
    for r in 0..d {
        let (i, f, o, g) = (gates[r], gates[d + r], gates[2 * d + r], gates[3 * d + r]);
        let tc = tanh_c[r];
        let d_o = dh[r] * tc;
        let dct = dc[r] + dh[r] * o * (1.0 - tc * tc);
        let cp = c_prev.map_or(0.0, |c| c[r]);
        dz[r] = dct * g * i * (1.0 - i);
        dz[d + r] = dct * cp * f * (1.0 - f);
        dz[2 * d + r] = d_o * o * (1.0 - o);
        dz[3 * d + r] = dct * i * (1.0 - g * g);
        dc[r] = dct * f;
    }
}

/// Accumulates `dW += dZᵀ X`, `dV += dZᵀ H_prev`, `db += Σ dZ` for one LSTM.
fn accumulate_lstm(lstm: &LstmLayout, trace: &LstmTrace, dz: &[f64], x: MatRef<'_>, grad: &mut [f64]) {
    let (d, steps) = (lstm.hidden, trace.steps);
    if steps == 0 {
        return;
    }
    let dzm = MatRef::new(dz, steps, 4 * d);
    gemm(dzm.t(), x, 1.0, &mut grad[lstm.w()], x.cols);
    let h_prev = trace.h_prev_matrix();
    gemm(dzm.t(), MatRef::new(&h_prev, steps, d), 1.0, &mut grad[lstm.v()], d);
    let gb = &mut grad[lstm.b()];
    for k in 0..steps {
        axpy(1.0, &dz[k * 4 * d..(k + 1) * 4 * d], gb);
    }
}

/// Backpropagates per-step output gradients `dh_out` (`steps × d`) through
/// a plain LSTM that consumed `x` (`steps × input`).
fn lstm_backward(lstm: &LstmLayout, params: &[f64], trace: &LstmTrace, x: &[f64], dh_out: &[f64], grad: &mut [f64]) {
    let (d, steps) = (lstm.hidden, trace.steps);
    let v = &params[lstm.v()];
    let mut dz = vec![0.0; steps * 4 * d];
    let mut dh = vec![0.0; d];
    let mut dc = vec![0.0; d];
    let mut dh_next = vec![0.0; d];
    for k in (0..steps).rev() {
        for r in 0..d {
            dh[r] = dh_out[k * d + r] + dh_next[r];
        }
        let dzk = &mut dz[k * 4 * d..(k + 1) * 4 * d];
        cell_backward(trace, k, &dh, &mut dc, dzk);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_acc(v, dzk, &mut dh_next);
    }
    accumulate_lstm(lstm, trace, &dz, MatRef::new(x, steps, lstm.input), grad);
}

/// Adds `weight ·` the gradient of the two-head loss to `grad` and returns
/// the weighted loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    layout: &Layout,
    params: &[f64],
    trace: &Trace,
    xq: &[f64],
    xd: &[f64],
    targets: (f64, f64),
    weight: f64,
    grad: &mut [f64],
) -> f64 {
    let d = layout.hidden_dim;
    let (m, n) = (trace.m, trace.n);
    let (ya, yd) = targets;
    let loss = weight * (bce_with_logit(trace.logit_agree, ya) + bce_with_logit(trace.logit_disagree, yd));
    let dla = weight * (crate::gbdt::sigmoid(trace.logit_agree) - ya);
    let dld = weight * (crate::gbdt::sigmoid(trace.logit_disagree) - yd);

    let h_last = trace.mm.last_h();
    axpy(dla, &h_last, &mut grad[layout.agree_w.clone()]);
    grad[layout.agree_b] += dla;
    axpy(dld, &h_last, &mut grad[layout.disagree_w.clone()]);
    grad[layout.disagree_b] += dld;
    if n == 0 {
        // h^m is the zero initial state and depends on nothing
        return loss;
    }

    let ml = &layout.mlstm;
    let w_ml = &params[ml.w()];
    let v_ml = &params[ml.v()];
    let we = &params[layout.attn_we.clone()];
    let wm = &params[layout.attn_wm.clone()];
    let wq = &params[layout.attn_wq.clone()];
    let wd = &params[layout.attn_wd.clone()];

    let mut dh = vec![0.0; d];
    axpy(dla, &params[layout.agree_w.clone()], &mut dh);
    axpy(dld, &params[layout.disagree_w.clone()], &mut dh);
    let mut dc = vec![0.0; d];
    let mut dz_m = vec![0.0; n * 4 * d];
    let mut d_pq = vec![0.0; m * d];
    let mut d_s = vec![0.0; n * d];
    let mut d_hq = vec![0.0; m * d];
    let mut d_we = vec![0.0; d];
    let mut da = vec![0.0; d];
    let mut d_alpha = vec![0.0; m];
    let mut dsum = vec![0.0; d];
    for k in (0..n).rev() {
        let dzk = &mut dz_m[k * 4 * d..(k + 1) * 4 * d];
        cell_backward(&trace.mm, k, &dh, &mut dc, dzk);
        let mut dh_prev = vec![0.0; d];
        matvec_t_acc(v_ml, dzk, &mut dh_prev);
        // gradient reaching a_k through the right half of the mLSTM input
        da.iter_mut().for_each(|v| *v = 0.0);
        for (row, &g) in dzk.iter().enumerate() {
            if g != 0.0 {
                axpy(g, &w_ml[row * 2 * d + d..(row + 1) * 2 * d], &mut da);
            }
        }
        let alpha = &trace.alpha[k * m..(k + 1) * m];
        let mut mean = 0.0;
        for j in 0..m {
            d_alpha[j] = dot(&da, trace.q.h_at(j));
            mean += alpha[j] * d_alpha[j];
            axpy(alpha[j], &da, &mut d_hq[j * d..(j + 1) * d]);
        }
        dsum.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..m {
            let de = alpha[j] * (d_alpha[j] - mean);
            let u = &trace.u[(k * m + j) * d..(k * m + j + 1) * d];
            axpy(de, u, &mut d_we);
            let dpq = &mut d_pq[j * d..(j + 1) * d];
            for r in 0..d {
                let dpre = de * we[r] * (1.0 - u[r] * u[r]);
                dpq[r] += dpre;
                dsum[r] += dpre;
            }
        }
        d_s[k * d..(k + 1) * d].copy_from_slice(&dsum);
        matvec_t_acc(wm, &dsum, &mut dh_prev);
        dh = dh_prev;
    }
    axpy(1.0, &d_we, &mut grad[layout.attn_we.clone()]);

    let hq = MatRef::new(&trace.q.h, m, d);
    let hd = MatRef::new(&trace.doc.h, n, d);
    let hm_prev = trace.mm.h_prev_matrix();
    // the article part of the energies shares d_s
    let d_pd = &d_s;
    gemm(
        MatRef::new(&d_pq, m, d).t(),
        hq,
        1.0,
        &mut grad[layout.attn_wq.clone()],
        d,
    );
    gemm(
        MatRef::new(d_pd, n, d).t(),
        hd,
        1.0,
        &mut grad[layout.attn_wd.clone()],
        d,
    );
    gemm(
        MatRef::new(&d_s, n, d).t(),
        MatRef::new(&hm_prev, n, d),
        1.0,
        &mut grad[layout.attn_wm.clone()],
        d,
    );
    gemm(MatRef::new(&d_pq, m, d), MatRef::new(wq, d, d), 1.0, &mut d_hq, d);
    let mut d_hd = vec![0.0; n * d];
    gemm(MatRef::new(d_pd, n, d), MatRef::new(wd, d, d), 0.0, &mut d_hd, d);
    gemm(
        MatRef::new(&dz_m, n, 4 * d),
        MatRef::columns(w_ml, 4 * d, 2 * d, 0, d),
        1.0,
        &mut d_hd,
        d,
    );

    // mLSTM weights: input is [h^d_k ; a_k]
    let dzm = MatRef::new(&dz_m, n, 4 * d);
    {
        let gw = &mut grad[ml.w()];
        gemm(dzm.t(), hd, 1.0, gw, 2 * d);
        gemm(dzm.t(), MatRef::new(&trace.a, n, d), 1.0, &mut gw[d..], 2 * d);
    }
    gemm(dzm.t(), MatRef::new(&hm_prev, n, d), 1.0, &mut grad[ml.v()], d);
    {
        let gb = &mut grad[ml.b()];
        for k in 0..n {
            axpy(1.0, &dz_m[k * 4 * d..(k + 1) * 4 * d], gb);
        }
    }

    lstm_backward(&layout.dlstm, params, &trace.doc, xd, &d_hd, grad);
    lstm_backward(&layout.qlstm, params, &trace.q, xq, &d_hq, grad);
    loss
}
