#include "gatecap/forward.hpp"

#include <stdexcept>

namespace gatecap {

ModelBinding bind_model(Graph& g, const DecoderModel& model, const BindOptions& opt) {
  if (opt.mask_mode == MaskMode::kBernoulli && opt.rng == nullptr) {
    throw std::invalid_argument("bernoulli masks require an rng");
  }
  if (opt.mask_mode == MaskMode::kFixed && opt.fixed_masks == nullptr) {
    throw std::invalid_argument("fixed mask mode requires masks");
  }

  ModelBinding b;
  b.g = &g;
  b.model = &model;
  b.opt = opt;
  b.has_gates = opt.mask_mode == MaskMode::kBernoulli || opt.mask_mode == MaskMode::kMl;

  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const GatedParameter& p = model.layers[i];
    Tensor w = p.W;
    w.requires_grad = opt.train_weights;
    b.raw[i] = g.leaf(w);

    switch (opt.mask_mode) {
      case MaskMode::kNone:
        b.eff[i] = b.raw[i];
        break;
      case MaskMode::kFixed: {
        Tensor mask = (*opt.fixed_masks)[i];
        b.eff[i] = mul(b.raw[i], g.constant(std::move(mask)));
        break;
      }
      case MaskMode::kBernoulli:
      case MaskMode::kMl: {
        Tensor logits = p.G;
        logits.requires_grad = opt.train_gates && !p.frozen;
        b.gate[i] = g.leaf(logits);
        Tensor mask = opt.mask_mode == MaskMode::kBernoulli ? bernoulli_mask(p.G, *opt.rng)
                                                            : ml_mask(p.G);
        b.eff[i] = mul(b.raw[i], ste_mask(sigmoid(b.gate[i]), std::move(mask)));
        break;
      }
    }
  }

  auto bias_leaf = [&](const Tensor& t) {
    Tensor c = t;
    c.requires_grad = opt.train_weights;
    return g.leaf(c);
  };
  b.rnn_bias = bias_leaf(model.rnn_bias);
  b.attn_bias = bias_leaf(model.attn_bias);
  b.logits_bias = bias_leaf(model.logits_bias);

  Tensor enc = model.encoder;
  enc.requires_grad = opt.train_encoder;
  b.encoder = g.leaf(enc);
  return b;
}

ExampleCtx make_example(const ModelBinding& b, const Tensor& raw_features) {
  Graph& g = *b.g;
  const DecoderDims& d = b.model->dims;
  if (raw_features.rank() != 2 || raw_features.dim(0) != d.feat_positions ||
      raw_features.dim(1) != d.raw_dim) {
    throw std::invalid_argument("scene features must be " + std::to_string(d.feat_positions) +
                                "x" + std::to_string(d.raw_dim) + ", got " +
                                raw_features.shape_str());
  }
  ExampleCtx ex;
  ex.f = matmul(g.constant(raw_features), b.encoder);
  ex.keys = matmul(ex.f, b.eff[kAttnKey]);
  ex.values = matmul(ex.f, b.eff[kAttnValue]);
  ex.i_embed = mean_rows(ex.f);
  return ex;
}

DecoderStateVars init_state(const ModelBinding& b, const ExampleCtx& ex) {
  Graph& g = *b.g;
  DecoderStateVars st;
  st.h = matmul(ex.i_embed, b.eff[kWInit]);
  if (b.model->cell == CellKind::kLstm) {
    st.m = g.constant(Tensor({b.model->dims.rnn_units}));
    st.has_m = true;
  }
  return st;
}

std::pair<Var, Var> soft_attention(const ModelBinding& b, const ExampleCtx& ex, Var h_prev) {
  Graph& g = *b.g;
  Var query = matmul(h_prev, b.eff[kAttnQuery]);                       // [a]
  Var hidden = tanh(add_rowvec(ex.keys, add(query, b.attn_bias)));     // [n_pos, a]
  Var scores = reshape(matmul(hidden, b.eff[kAttnMlp]),
                       {b.model->dims.feat_positions});                // [n_pos]
  Var weights = softmax(scores);
  Var applied = weights;
  if (b.opt.training && b.opt.drop_attn > 0.0) {
    applied = dropout(applied, b.opt.drop_attn, true, *b.opt.rng);
  }
  Var context = matmul(applied, ex.values);                            // [a]
  (void)g;
  return {context, weights};
}

StepOut decoder_step(const ModelBinding& b, const ExampleCtx& ex, const DecoderStateVars& state,
                     std::size_t prev_token) {
  Graph& g = *b.g;
  const DecoderModel& m = *b.model;
  const std::size_t r = m.dims.rnn_units;

  auto [context, attn_w] = soft_attention(b, ex, state.h);
  Var x = concat(lookup(b.eff[kWordEmb], prev_token), context);  // [q + a]
  if (b.opt.training && b.opt.drop_rnn > 0.0) {
    x = dropout(x, b.opt.drop_rnn, true, *b.opt.rng);
  }
  Var xh = concat(x, state.h);  // [q + a + r]

  StepOut out;
  out.attn_weights = attn_w;

  if (m.cell == CellKind::kLstm) {
    Var pre = add(matmul(xh, b.eff[kRnnKernel]), b.rnn_bias);  // [4r]
    Var gi = sigmoid(slice(pre, 0, r));
    Var gf = sigmoid(slice(pre, r, r));
    Var gc = tanh(slice(pre, 2 * r, r));
    Var go = sigmoid(slice(pre, 3 * r, r));
    Var m_new = add(mul(gf, state.m), mul(gi, gc));
    Var h_new = mul(go, tanh(m_new));
    out.state.h = h_new;
    out.state.m = m_new;
    out.state.has_m = true;
  } else {
    // GRU blocks: update, reset, candidate. The candidate block sees the
    // reset-scaled hidden state, so the kernel is applied in two pieces.
    Var zr_pre = add(matmul(xh, slice_cols(b.eff[kRnnKernel], 0, 2 * r)),
                     slice(b.rnn_bias, 0, 2 * r));
    Var z = sigmoid(slice(zr_pre, 0, r));
    Var rr = sigmoid(slice(zr_pre, r, r));
    Var xh2 = concat(x, mul(rr, state.h));
    Var n_pre = add(matmul(xh2, slice_cols(b.eff[kRnnKernel], 2 * r, r)),
                    slice(b.rnn_bias, 2 * r, r));
    Var cand = tanh(n_pre);
    Var keep = mul(z, state.h);
    Var one_minus_z = add_scalar(mul_scalar(z, -1.0), 1.0);
    out.state.h = add(keep, mul(one_minus_z, cand));
    out.state.has_m = false;
  }

  Var h_out = out.state.h;
  if (b.opt.training && b.opt.drop_rnn > 0.0) {
    h_out = dropout(h_out, b.opt.drop_rnn, true, *b.opt.rng);
  }
  out.logits = add(matmul(h_out, b.eff[kLogits]), b.logits_bias);
  out.probs = softmax(out.logits);
  (void)g;
  return out;
}

Var caption_tokens_loss(const ModelBinding& b, const ExampleCtx& ex,
                        const std::vector<int>& targets, int start_token) {
  if (targets.empty()) {
    throw std::invalid_argument("caption loss requires at least one target token");
  }
  DecoderStateVars st = init_state(b, ex);
  std::vector<Var> terms;
  terms.reserve(targets.size());
  int prev = start_token;
  for (int target : targets) {
    if (target < 0 || static_cast<std::size_t>(target) >= b.model->dims.vocab) {
      throw std::out_of_range("caption token id " + std::to_string(target) +
                              " outside vocabulary of size " + std::to_string(b.model->dims.vocab));
    }
    StepOut step = decoder_step(b, ex, st, static_cast<std::size_t>(prev));
    terms.push_back(cross_entropy(step.logits, static_cast<std::size_t>(target)));
    st = step.state;
    prev = target;
  }
  return add_n(terms);
}

Var weight_decay_term(const ModelBinding& b, double lambda_d) {
  std::vector<Var> terms;
  terms.reserve(kLayerCount + 3);
  for (std::size_t i = 0; i < kLayerCount; ++i) terms.push_back(sum_squares(b.raw[i]));
  terms.push_back(sum_squares(b.rnn_bias));
  terms.push_back(sum_squares(b.attn_bias));
  terms.push_back(sum_squares(b.logits_bias));
  return mul_scalar(add_n(terms), lambda_d);
}

}  // namespace gatecap
