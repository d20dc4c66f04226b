#include "gatecap/sparse_model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "gatecap/serialize.hpp"

namespace gatecap {

SparseMatrix to_sparse_transposed(const Tensor& dense) {
  if (dense.rank() != 2) {
    throw std::invalid_argument("to_sparse_transposed expects rank 2, got " + dense.shape_str());
  }
  SparseMatrix m;
  m.rows = dense.dim(1);
  m.cols = dense.dim(0);
  m.row_ptr.assign(m.rows + 1, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      double v = dense.at(c, r);
      if (v != 0.0) {
        m.col_idx.push_back(static_cast<std::uint32_t>(c));
        m.values.push_back(v);
      }
    }
    m.row_ptr[r + 1] = m.values.size();
  }
  return m;
}

Tensor dense_from_transposed(const SparseMatrix& m) {
  Tensor t({m.cols, m.rows});
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::uint64_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      t.at(m.col_idx[k], r) = m.values[k];
    }
  }
  return t;
}

SparseModel export_sparse(const DecoderModel& model, const LayerMasks* fixed_masks,
                          std::vector<std::string> vocab_tokens, std::string config_echo) {
  RuntimeWeights w = materialize(model, fixed_masks);
  SparseModel out;
  out.cell = model.cell;
  out.dims = model.dims;
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    out.layers[i] = to_sparse_transposed(w.layer[i]);
  }
  out.rnn_bias = w.rnn_bias;
  out.attn_bias = w.attn_bias;
  out.logits_bias = w.logits_bias;
  out.encoder = w.encoder;
  out.vocab_tokens = std::move(vocab_tokens);
  out.config_echo = std::move(config_echo);
  return out;
}

void save_gspm(const std::string& path, const SparseModel& m) {
  BinWriter w(path);
  w.magic("GSPM");
  w.u32(1);  // version
  w.u32(m.cell == CellKind::kLstm ? 0 : 1);
  for (std::size_t d : {m.dims.rnn_units, m.dims.word_size, m.dims.attn_size, m.dims.vocab,
                        m.dims.feat_positions, m.dims.feat_dim, m.dims.raw_dim}) {
    w.u64(d);
  }
  w.u32(static_cast<std::uint32_t>(m.vocab_tokens.size()));
  for (const auto& t : m.vocab_tokens) w.str(t);
  w.str(m.config_echo);

  w.u32(4);
  w.named_tensor("rnn_bias", m.rnn_bias);
  w.named_tensor("attn_bias", m.attn_bias);
  w.named_tensor("logits_bias", m.logits_bias);
  w.named_tensor("encoder", m.encoder);

  w.u32(static_cast<std::uint32_t>(kLayerCount));
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const SparseMatrix& s = m.layers[i];
    w.str(kLayerNames[i]);
    w.u64(s.rows);
    w.u64(s.cols);
    w.u64(s.nnz());
    w.bytes(s.row_ptr.data(), s.row_ptr.size() * sizeof(std::uint64_t));
    w.bytes(s.col_idx.data(), s.col_idx.size() * sizeof(std::uint32_t));
    w.bytes(s.values.data(), s.values.size() * sizeof(double));
  }
}

SparseModel load_gspm(const std::string& path) {
  BinReader r(path);
  r.expect_magic("GSPM");
  std::uint32_t version = r.u32();
  if (version != 1) throw std::runtime_error(path + ": unsupported GSPM version");
  SparseModel m;
  m.cell = r.u32() == 0 ? CellKind::kLstm : CellKind::kGru;
  m.dims.rnn_units = r.u64();
  m.dims.word_size = r.u64();
  m.dims.attn_size = r.u64();
  m.dims.vocab = r.u64();
  m.dims.feat_positions = r.u64();
  m.dims.feat_dim = r.u64();
  m.dims.raw_dim = r.u64();
  std::uint32_t vcount = r.u32();
  m.vocab_tokens.reserve(vcount);
  for (std::uint32_t i = 0; i < vcount; ++i) m.vocab_tokens.push_back(r.str());
  m.config_echo = r.str();

  std::uint32_t ndense = r.u32();
  for (std::uint32_t i = 0; i < ndense; ++i) {
    auto [name, t] = r.named_tensor();
    if (name == "rnn_bias") m.rnn_bias = std::move(t);
    else if (name == "attn_bias") m.attn_bias = std::move(t);
    else if (name == "logits_bias") m.logits_bias = std::move(t);
    else if (name == "encoder") m.encoder = std::move(t);
    else throw std::runtime_error(path + ": unknown dense tensor " + name);
  }

  std::uint32_t nlayers = r.u32();
  if (nlayers != kLayerCount) throw std::runtime_error(path + ": unexpected layer count");
  for (std::uint32_t i = 0; i < nlayers; ++i) {
    std::string name = r.str();
    if (name != kLayerNames[i]) throw std::runtime_error(path + ": unexpected layer " + name);
    SparseMatrix& s = m.layers[i];
    s.rows = r.u64();
    s.cols = r.u64();
    std::uint64_t nnz = r.u64();
    s.row_ptr.resize(s.rows + 1);
    r.bytes(s.row_ptr.data(), s.row_ptr.size() * sizeof(std::uint64_t));
    s.col_idx.resize(nnz);
    r.bytes(s.col_idx.data(), nnz * sizeof(std::uint32_t));
    s.values.resize(nnz);
    r.bytes(s.values.data(), nnz * sizeof(double));
  }
  return m;
}

DecodeState SparseRuntime::begin(const Tensor& raw_features) const {
  const DecoderDims& d = m_.dims;
  if (raw_features.rank() != 2 || raw_features.dim(0) != d.feat_positions ||
      raw_features.dim(1) != d.raw_dim) {
    throw std::invalid_argument("scene features must be " + std::to_string(d.feat_positions) +
                                "x" + std::to_string(d.raw_dim) + ", got " +
                                raw_features.shape_str());
  }

  Tensor f({d.feat_positions, d.feat_dim});
  std::vector<double> xrow(d.raw_dim), yrow;
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    for (std::size_t j = 0; j < d.raw_dim; ++j) xrow[j] = raw_features.at(p, j);
    rtmath::vecmat(xrow, m_.encoder, yrow);
    for (std::size_t j = 0; j < d.feat_dim; ++j) f.at(p, j) = yrow[j];
  }

  auto keys = std::make_shared<Tensor>(Tensor({d.feat_positions, d.attn_size}));
  auto values = std::make_shared<Tensor>(Tensor({d.feat_positions, d.attn_size}));
  std::vector<double> frow(d.feat_dim), proj(d.attn_size);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    for (std::size_t j = 0; j < d.feat_dim; ++j) frow[j] = f.at(p, j);
    spmv_into(m_.layers[kAttnKey], frow.data(), proj.data());
    for (std::size_t j = 0; j < d.attn_size; ++j) keys->at(p, j) = proj[j];
    spmv_into(m_.layers[kAttnValue], frow.data(), proj.data());
    for (std::size_t j = 0; j < d.attn_size; ++j) values->at(p, j) = proj[j];
  }

  std::vector<double> i_embed(d.feat_dim, 0.0);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    for (std::size_t j = 0; j < d.feat_dim; ++j) i_embed[j] += f.at(p, j);
  }
  for (double& v : i_embed) v /= static_cast<double>(d.feat_positions);

  DecodeState st;
  st.h.assign(d.rnn_units, 0.0);
  spmv_into(m_.layers[kWInit], i_embed.data(), st.h.data());
  if (m_.cell == CellKind::kLstm) st.m.assign(d.rnn_units, 0.0);
  st.keys = std::move(keys);
  st.values = std::move(values);
  return st;
}

std::vector<double> SparseRuntime::step(DecodeState& st, int prev_token) const {
  const DecoderDims& d = m_.dims;
  const std::size_t r = d.rnn_units, q = d.word_size, a = d.attn_size;
  if (prev_token < 0 || static_cast<std::size_t>(prev_token) >= d.vocab) {
    throw std::out_of_range("token id " + std::to_string(prev_token) +
                            " outside vocabulary of size " + std::to_string(d.vocab));
  }

  std::vector<double> query(a, 0.0);
  spmv_into(m_.layers[kAttnQuery], st.h.data(), query.data());
  const Tensor& keys = *st.keys;
  const Tensor& values = *st.values;
  const SparseMatrix& mlp = m_.layers[kAttnMlp];  // 1 x a
  std::vector<double> scores(d.feat_positions, 0.0);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    double s = 0.0;
    for (std::uint64_t k = mlp.row_ptr[0]; k < mlp.row_ptr[1]; ++k) {
      const std::size_t j = mlp.col_idx[k];
      s += mlp.values[k] * std::tanh(keys.at(p, j) + query[j] + m_.attn_bias[j]);
    }
    scores[p] = s;
  }
  rtmath::softmax_inplace(scores);
  std::vector<double> context(a, 0.0);
  for (std::size_t p = 0; p < d.feat_positions; ++p) {
    const double wgt = scores[p];
    for (std::size_t j = 0; j < a; ++j) context[j] += wgt * values.at(p, j);
  }

  // Word embedding lookup == spmv of the transposed embedding against a
  // one-hot vector: gather column prev_token from the q x v layout.
  std::vector<double> xh(q + a + r, 0.0);
  const SparseMatrix& emb = m_.layers[kWordEmb];  // q x v
  for (std::size_t row = 0; row < emb.rows; ++row) {
    for (std::uint64_t k = emb.row_ptr[row]; k < emb.row_ptr[row + 1]; ++k) {
      if (emb.col_idx[k] == static_cast<std::uint32_t>(prev_token)) {
        xh[row] = emb.values[k];
        break;
      }
      if (emb.col_idx[k] > static_cast<std::uint32_t>(prev_token)) break;
    }
  }
  for (std::size_t j = 0; j < a; ++j) xh[q + j] = context[j];
  for (std::size_t j = 0; j < r; ++j) xh[q + a + j] = st.h[j];

  const SparseMatrix& kernel = m_.layers[kRnnKernel];  // (blocks*r) x (q+a+r)
  if (m_.cell == CellKind::kLstm) {
    std::vector<double> pre(4 * r, 0.0);
    spmv_into(kernel, xh.data(), pre.data());
    rtmath::lstm_update(pre, m_.rnn_bias, st.h, st.m);
  } else {
    auto sg = [](double v) {
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    };
    // update/reset rows use the raw xh; candidate rows use the reset-scaled h.
    std::vector<double> zr(2 * r, 0.0);
    spmv_row_range(kernel, 0, 2 * r, xh.data(), zr.data());
    std::vector<double> z(r), rr(r);
    for (std::size_t i = 0; i < r; ++i) {
      z[i] = sg(zr[i] + m_.rnn_bias[i]);
      rr[i] = sg(zr[r + i] + m_.rnn_bias[r + i]);
    }
    std::vector<double> xh2(xh);
    for (std::size_t i = 0; i < r; ++i) xh2[q + a + i] = rr[i] * st.h[i];
    std::vector<double> cand(r, 0.0);
    spmv_row_range(kernel, 2 * r, r, xh2.data(), cand.data());
    for (std::size_t i = 0; i < r; ++i) {
      double n = std::tanh(cand[i] + m_.rnn_bias[2 * r + i]);
      st.h[i] = z[i] * st.h[i] + (1.0 - z[i]) * n;
    }
  }

  std::vector<double> logits(d.vocab, 0.0);
  spmv_into(m_.layers[kLogits], st.h.data(), logits.data());
  for (std::size_t j = 0; j < d.vocab; ++j) logits[j] += m_.logits_bias[j];
  rtmath::softmax_inplace(logits);
  return logits;
}

}  // namespace gatecap
