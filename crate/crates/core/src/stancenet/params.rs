use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the agreement model and its training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceConfig {
    /// Word vector size `l`.
    pub embedding_dim: usize,
    /// Hidden size `d` shared by all three LSTMs.
    pub hidden_dim: usize,
    /// Key sentences per article.
    pub key_sentences: usize,
    /// Question truncation length `m`.
    pub max_question_len: usize,
    /// Article-side truncation length `n`.
    pub max_article_len: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub init_scale: f64,
    pub seed: u64,
    /// Per-example loss weights for agree, disagree, discuss.
    pub class_weights: Option<[f64; 3]>,
}

impl Default for StanceConfig {
    fn default() -> Self {
        StanceConfig {
            embedding_dim: 300,
            hidden_dim: 100,
            key_sentences: 3,
            max_question_len: 30,
            max_article_len: 120,
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            init_scale: 0.08,
            seed: 42,
            class_weights: None,
        }
    }
}

impl StanceConfig {
    // negated comparisons so that NaN fails every check
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("stance config: {m}")));
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return bad("dimensions must be positive");
        }
        if self.key_sentences == 0 {
            return bad("key_sentences must be at least 1");
        }
        if self.max_question_len == 0 || self.max_article_len == 0 {
            return bad("sequence limits must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) || !(self.init_scale >= 0.0) {
            return bad("learning_rate and clip_norm must be positive, init_scale non-negative");
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return bad("class weights must be finite and non-negative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Cell,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];

    fn index(self) -> usize {
        self as usize
    }

    fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Cell => "c",
        }
    }
}

/// Offsets of one LSTM inside the flat parameter vector. Gates are stacked
/// in the order i, f, o, c, so `W` is a `4d × input` row-major matrix whose
/// rows `g·d .. (g+1)·d` hold `W^g`; likewise `V` (`4d × d`) and `b` (`4d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmLayout {
    pub input: usize,
    pub hidden: usize,
    pub offset: usize,
}

impl LstmLayout {
    pub fn w(&self) -> Range<usize> {
        self.offset..self.offset + 4 * self.hidden * self.input
    }

    pub fn v(&self) -> Range<usize> {
        let s = self.w().end;
        s..s + 4 * self.hidden * self.hidden
    }

    pub fn b(&self) -> Range<usize> {
        let s = self.v().end;
        s..s + 4 * self.hidden
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    pub fn end(&self) -> usize {
        self.offset + self.len()
    }

    fn gate_rows(&self, r: Range<usize>, g: Gate, width: usize) -> Range<usize> {
        let start = r.start + g.index() * self.hidden * width;
        start..start + self.hidden * width
    }
}

/// Named contiguous parameter block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub range: Range<usize>,
}

/// Placement of every parameter of the model in one flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub qlstm: LstmLayout,
    pub dlstm: LstmLayout,
    pub mlstm: LstmLayout,
    pub attn_we: Range<usize>,
    pub attn_wq: Range<usize>,
    pub attn_wd: Range<usize>,
    pub attn_wm: Range<usize>,
    pub agree_w: Range<usize>,
    pub agree_b: usize,
    pub disagree_w: Range<usize>,
    pub disagree_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(l: usize, d: usize) -> Self {
        let qlstm = LstmLayout {
            input: l,
            hidden: d,
            offset: 0,
        };
        let dlstm = LstmLayout {
            input: l,
            hidden: d,
            offset: qlstm.end(),
        };
        let mlstm = LstmLayout {
            input: 2 * d,
            hidden: d,
            offset: dlstm.end(),
        };
        let mut at = mlstm.end();
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let attn_we = take(d);
        let attn_wq = take(d * d);
        let attn_wd = take(d * d);
        let attn_wm = take(d * d);
        let agree_w = take(d);
        let agree_b = take(1).start;
        let disagree_w = take(d);
        let disagree_b = take(1).start;
        Layout {
            embedding_dim: l,
            hidden_dim: d,
            qlstm,
            dlstm,
            mlstm,
            attn_we,
            attn_wq,
            attn_wd,
            attn_wm,
            agree_w,
            agree_b,
            disagree_w,
            disagree_b,
            total: at,
        }
    }

    /// Every named block: per-gate `W`, `V`, `b` of the three LSTMs, the four
    /// attention parameters and both heads.
    pub fn blocks(&self) -> Vec<ParamBlock> {
        let mut out = Vec::new();
        for (name, lstm) in [("qlstm", self.qlstm), ("dlstm", self.dlstm), ("mlstm", self.mlstm)] {
            for (kind, range, width) in [
                ("W", lstm.w(), lstm.input),
                ("V", lstm.v(), lstm.hidden),
                ("b", lstm.b(), 1),
            ] {
                for g in Gate::ALL {
                    out.push(ParamBlock {
                        name: format!("{name}.{kind}_{}", g.suffix()),
                        range: lstm.gate_rows(range.clone(), g, width),
                    });
                }
            }
        }
        for (name, range) in [
            ("attn.w_e", self.attn_we.clone()),
            ("attn.W_q", self.attn_wq.clone()),
            ("attn.W_d", self.attn_wd.clone()),
            ("attn.W_m", self.attn_wm.clone()),
            ("head_agree.w", self.agree_w.clone()),
            ("head_agree.b", self.agree_b..self.agree_b + 1),
            ("head_disagree.w", self.disagree_w.clone()),
            ("head_disagree.b", self.disagree_b..self.disagree_b + 1),
        ] {
            out.push(ParamBlock {
                name: name.to_string(),
                range,
            });
        }
        out
    }
}

/// Borrowed view of one LSTM's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    pub input: usize,
    pub hidden: usize,
    /// Stacked `4d × input`.
    pub w: &'a [f64],
    /// Stacked `4d × d`.
    pub v: &'a [f64],
    pub b: &'a [f64],
}

impl<'a> LstmParams<'a> {
    pub fn from_flat(layout: &LstmLayout, params: &'a [f64]) -> Self {
        LstmParams {
            input: layout.input,
            hidden: layout.hidden,
            w: &params[layout.w()],
            v: &params[layout.v()],
            b: &params[layout.b()],
        }
    }

    pub fn gate_w(&self, g: Gate) -> &'a [f64] {
        let n = self.hidden * self.input;
        &self.w[g.index() * n..(g.index() + 1) * n]
    }

    pub fn gate_v(&self, g: Gate) -> &'a [f64] {
        let n = self.hidden * self.hidden;
        &self.v[g.index() * n..(g.index() + 1) * n]
    }

    pub fn gate_b(&self, g: Gate) -> &'a [f64] {
        &self.b[g.index() * self.hidden..(g.index() + 1) * self.hidden]
    }
}

/// Borrowed view of the attention parameters.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams<'a> {
    pub hidden: usize,
    pub we: &'a [f64],
    pub wq: &'a [f64],
    pub wd: &'a [f64],
    pub wm: &'a [f64],
}

impl<'a> AttentionParams<'a> {
    pub fn from_flat(layout: &Layout, params: &'a [f64]) -> Self {
        AttentionParams {
            hidden: layout.hidden_dim,
            we: &params[layout.attn_we.clone()],
            wq: &params[layout.attn_wq.clone()],
            wd: &params[layout.attn_wd.clone()],
            wm: &params[layout.attn_wm.clone()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_tile_the_vector() {
        let layout = Layout::new(3, 2);
        let blocks = layout.blocks();
        assert_eq!(blocks.len(), 3 * 12 + 4 + 4);
        let mut next = 0;
        let mut sorted = blocks.clone();
        sorted.sort_by_key(|b| b.range.start);
        for b in &sorted {
            assert_eq!(b.range.start, next, "{}", b.name);
            next = b.range.end;
        }
        assert_eq!(next, layout.total);
        // 4d(l+d+1) twice, 4d(2d+d+1), d + 3d², 2(d+1)
        assert_eq!(layout.total, 2 * 8 * 6 + 8 * 7 + 2 + 12 + 6);
    }

    #[test]
    fn gate_views_match_blocks() {
        let layout = Layout::new(3, 2);
        let params: Vec<f64> = (0..layout.total).map(|i| i as f64).collect();
        let p = LstmParams::from_flat(&layout.mlstm, &params);
        let block = layout.blocks().into_iter().find(|b| b.name == "mlstm.V_o").unwrap();
        assert_eq!(p.gate_v(Gate::Output), &params[block.range]);
        assert_eq!(p.gate_w(Gate::Input).len(), 2 * 4);
    }
}
