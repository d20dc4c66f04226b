#include "gatecap/runtime.hpp"

#include <cmath>
#include <stdexcept>

namespace gatecap {

namespace rtmath {

void vecmat(const std::vector<double>& x, const Tensor& w, std::vector<double>& y) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  if (x.size() != in) {
    throw std::invalid_argument("vecmat length mismatch: " + std::to_string(x.size()) + " vs " +
                                w.shape_str());
  }
  y.assign(out, 0.0);
  const double* W = w.data();
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* row = W + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xi * row[j];
  }
}

void softmax_inplace(std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double z = 0.0;
  for (double& v : x) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : x) v /= z;
}

void lstm_update(const std::vector<double>& pre, const Tensor& bias, std::vector<double>& h,
                 std::vector<double>& m) {
  const std::size_t r = h.size();
  auto sg = [](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  };
  for (std::size_t i = 0; i < r; ++i) {
    double gi = sg(pre[i] + bias[i]);
    double gf = sg(pre[r + i] + bias[r + i]);
    double gc = std::tanh(pre[2 * r + i] + bias[2 * r + i]);
    double go = sg(pre[3 * r + i] + bias[3 * r + i]);
    m[i] = gf * m[i] + gi * gc;
    h[i] = go * std::tanh(m[i]);
  }
}

}  // namespace rtmath

RuntimeWeights materialize(const DecoderModel& model, const LayerMasks* fixed_masks) {
  RuntimeWeights w;
  w.cell = model.cell;
  w.dims = model.dims;
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const GatedParameter& p = model.layers[i];
    if (fixed_masks != nullptr && (*fixed_masks)[i].numel() > 0) {
      const Tensor& mask = (*fixed_masks)[i];
      if (!mask.same_shape(p.W)) {
        throw std::invalid_argument("mask shape " + mask.shape_str() + " does not match layer " +
                                    p.name + " " + p.W.shape_str());
      }
      Tensor out(p.W.shape());
      for (std::size_t j = 0; j < out.numel(); ++j) out[j] = p.W[j] * mask[j];
      w.layer[i] = std::move(out);
    } else if (model.gates_active) {
      w.layer[i] = export_final(p);
    } else {
      w.layer[i] = p.W;
    }
  }
  w.rnn_bias = model.rnn_bias;
  w.attn_bias = model.attn_bias;
  w.logits_bias = model.logits_bias;
  w.encoder = model.encoder;
  return w;
}

DecodeState DenseRuntime::begin(const Tensor& raw_features) const {
  const DecoderDims& d = w_.dims;
  if (raw_features.rank() != 2 || raw_features.dim(0) != d.feat_positions ||
      raw_features.dim(1) != d.raw_dim) {
    throw std::invalid_argument("scene features must be " + std::to_string(d.feat_positions) +
                                "x" + std::to_string(d.raw_dim) + ", got " +
                                raw_features.shape_str());
  }

  // f = raw . encoder, then keys/values per position and mean-pooled embed.
  Tensor f({d.feat_positions, d.feat_dim});
  std::vector<double> xrow(d.raw_dim), yrow;
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    for (std::size_t j = 0; j < d.raw_dim; ++j) xrow[j] = raw_features.at(p, j);
    rtmath::vecmat(xrow, w_.encoder, yrow);
    for (std::size_t j = 0; j < d.feat_dim; ++j) f.at(p, j) = yrow[j];
  }

  auto keys = std::make_shared<Tensor>(Tensor({d.feat_positions, d.attn_size}));
  auto values = std::make_shared<Tensor>(Tensor({d.feat_positions, d.attn_size}));
  std::vector<double> frow(d.feat_dim);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    for (std::size_t j = 0; j < d.feat_dim; ++j) frow[j] = f.at(p, j);
    rtmath::vecmat(frow, w_.layer[kAttnKey], yrow);
    for (std::size_t j = 0; j < d.attn_size; ++j) keys->at(p, j) = yrow[j];
    rtmath::vecmat(frow, w_.layer[kAttnValue], yrow);
    for (std::size_t j = 0; j < d.attn_size; ++j) values->at(p, j) = yrow[j];
  }

  std::vector<double> i_embed(d.feat_dim, 0.0);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    for (std::size_t j = 0; j < d.feat_dim; ++j) i_embed[j] += f.at(p, j);
  }
  for (double& v : i_embed) v /= static_cast<double>(d.feat_positions);

  DecodeState st;
  rtmath::vecmat(i_embed, w_.layer[kWInit], st.h);
  if (w_.cell == CellKind::kLstm) st.m.assign(d.rnn_units, 0.0);
  st.keys = std::move(keys);
  st.values = std::move(values);
  return st;
}

std::vector<double> DenseRuntime::step(DecodeState& st, int prev_token) const {
  const DecoderDims& d = w_.dims;
  const std::size_t r = d.rnn_units, q = d.word_size, a = d.attn_size;
  if (prev_token < 0 || static_cast<std::size_t>(prev_token) >= d.vocab) {
    throw std::out_of_range("token id " + std::to_string(prev_token) +
                            " outside vocabulary of size " + std::to_string(d.vocab));
  }

  // Attention: additive scoring against every feature position.
  std::vector<double> query;
  rtmath::vecmat(st.h, w_.layer[kAttnQuery], query);
  const Tensor& keys = *st.keys;
  const Tensor& values = *st.values;
  const Tensor& mlp = w_.layer[kAttnMlp];
  std::vector<double> scores(d.feat_positions, 0.0);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < a; ++j) {
      s += mlp[j] * std::tanh(keys.at(p, j) + query[j] + w_.attn_bias[j]);
    }
    scores[p] = s;
  }
  rtmath::softmax_inplace(scores);
  std::vector<double> context(a, 0.0);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    const double wgt = scores[p];
    for (std::size_t j = 0; j < a; ++j) context[j] += wgt * values.at(p, j);
  }

  // RNN input: [word embedding, context, h_prev].
  std::vector<double> xh(q + a + r);
  const Tensor& emb = w_.layer[kWordEmb];
  for (std::size_t j = 0; j < q; ++j) xh[j] = emb.at(static_cast<std::size_t>(prev_token), j);
  for (std::size_t j = 0; j < a; ++j) xh[q + j] = context[j];
  for (std::size_t j = 0; j < r; ++j) xh[q + a + j] = st.h[j];

  const Tensor& kernel = w_.layer[kRnnKernel];
  if (w_.cell == CellKind::kLstm) {
    std::vector<double> pre;
    rtmath::vecmat(xh, kernel, pre);
    rtmath::lstm_update(pre, w_.rnn_bias, st.h, st.m);
  } else {
    auto sg = [](double v) {
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    };
    const std::size_t cols = kernel.dim(1);  // 3r
    std::vector<double> zr(2 * r, 0.0);
    for (std::size_t i = 0; i < q + a + r; ++i) {
      const double xi = xh[i];
      const double* row = kernel.data() + i * cols;
      for (std::size_t j = 0; j < 2 * r; ++j) zr[j] += xi * row[j];
    }
    std::vector<double> z(r), rr(r);
    for (std::size_t i = 0; i < r; ++i) {
      z[i] = sg(zr[i] + w_.rnn_bias[i]);
      rr[i] = sg(zr[r + i] + w_.rnn_bias[r + i]);
    }
    std::vector<double> cand(r, 0.0);
    for (std::size_t i = 0; i < q + a; ++i) {
      const double xi = xh[i];
      const double* row = kernel.data() + i * cols + 2 * r;
      for (std::size_t j = 0; j < r; ++j) cand[j] += xi * row[j];
    }
    // reset-scaled hidden feeds the candidate block
    for (std::size_t i = 0; i < r; ++i) {
      const double xi = rr[i] * st.h[i];
      const double* row = kernel.data() + (q + a + i) * cols + 2 * r;
      for (std::size_t j = 0; j < r; ++j) cand[j] += xi * row[j];
    }
    for (std::size_t i = 0; i < r; ++i) {
      double n = std::tanh(cand[i] + w_.rnn_bias[2 * r + i]);
      st.h[i] = z[i] * st.h[i] + (1.0 - z[i]) * n;
    }
  }

  std::vector<double> logits;
  rtmath::vecmat(st.h, w_.layer[kLogits], logits);
  for (std::size_t j = 0; j < d.vocab; ++j) logits[j] += w_.logits_bias[j];
  rtmath::softmax_inplace(logits);
  return logits;
}

}  // namespace gatecap
