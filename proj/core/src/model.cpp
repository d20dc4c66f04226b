#include "gatecap/model.hpp"

#include <cmath>
#include <stdexcept>

namespace gatecap {

const char* cell_name(CellKind c) { return c == CellKind::kLstm ? "lstm" : "gru"; }

CellKind cell_from_name(const std::string& s) {
  if (s == "lstm") return CellKind::kLstm;
  if (s == "gru") return CellKind::kGru;
  throw std::invalid_argument("unknown cell kind: " + s);
}

std::vector<const GatedParameter*> DecoderModel::gated_layers() const {
  std::vector<const GatedParameter*> out;
  out.reserve(kLayerCount);
  for (const auto& p : layers) out.push_back(&p);
  return out;
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

DecoderModel DecoderModel::init(CellKind cell, DecoderDims dims, double gate_init, bool gated,
                                Rng& rng) {
  if (dims.vocab == 0) throw std::invalid_argument("decoder requires a nonempty vocabulary");
  DecoderModel m;
  m.cell = cell;
  m.dims = dims;
  m.gates_active = gated;

  const std::size_t r = dims.rnn_units, q = dims.word_size, a = dims.attn_size, v = dims.vocab;
  const std::size_t blocks = m.gate_blocks();
  const std::size_t kernel_rows = q + a + r;

  auto make = [&](LayerId id, std::size_t rows, std::size_t cols) {
    m.layers[id] = GatedParameter(kLayerNames[id], xavier_uniform(rows, cols, rng), gate_init);
  };
  make(kWInit, dims.feat_dim, r);
  make(kRnnKernel, kernel_rows, blocks * r);
  make(kAttnKey, dims.feat_dim, a);
  make(kAttnValue, dims.feat_dim, a);
  make(kAttnQuery, r, a);
  make(kAttnMlp, a, 1);
  make(kWordEmb, v, q);
  make(kLogits, r, v);

  m.rnn_bias = Tensor({blocks * r});
  if (cell == CellKind::kLstm) {
    // gate block order: input, forget, candidate, output
    for (std::size_t i = 0; i < r; ++i) m.rnn_bias[r + i] = 1.0;
  }
  m.attn_bias = Tensor({a});
  m.logits_bias = Tensor({v});
  m.encoder = xavier_uniform(dims.raw_dim, dims.feat_dim, rng);
  return m;
}

}  // namespace gatecap
